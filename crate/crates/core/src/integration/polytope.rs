//! The slice `Delta_a` of the probability simplex cut by the hyperplane
//! `v . f = a`: exact vertices, a triangulation coned from the vertex
//! centroid, and an orthonormal chart of the 4-dimensional affine hull.

use num_rational::Rational64;
use num_traits::{One, Zero};
use rand::Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::types::{rational_to_f64, Average, Distribution, FACES, FACE_VALUES};

/// Dimension of the slice.
pub const DIM: usize = FACES - 2;

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintPolytope {
    average: Average,
    exact_vertices: Vec<[Rational64; FACES]>,
    vertices: Vec<Distribution>,
    centroid: [f64; FACES],
    /// Index tuples into `vertices`; the index `vertices.len()` stands for
    /// the centroid.
    simplices: Vec<[usize; DIM + 1]>,
    relative_volumes: Vec<f64>,
    /// Orthonormal basis of `{x : sum x = 0, v . x = 0}`.
    chart: [[f64; FACES]; DIM],
    /// Volume of the slice in chart coordinates.
    volume: f64,
}

impl ConstraintPolytope {
    pub fn average(&self) -> Average {
        self.average
    }

    pub fn vertices(&self) -> &[Distribution] {
        &self.vertices
    }

    pub fn exact_vertices(&self) -> &[[Rational64; FACES]] {
        &self.exact_vertices
    }

    pub fn centroid(&self) -> &[f64; FACES] {
        &self.centroid
    }

    pub fn simplices(&self) -> &[[usize; DIM + 1]] {
        &self.simplices
    }

    pub fn relative_volumes(&self) -> &[f64] {
        &self.relative_volumes
    }

    pub fn chart(&self) -> &[[f64; FACES]; DIM] {
        &self.chart
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    fn point(&self, index: usize) -> [f64; FACES] {
        if index == self.vertices.len() {
            self.centroid
        } else {
            *self.vertices[index].probs()
        }
    }

    /// Vertex coordinates of triangulation simplex `s`.
    pub fn simplex_points(&self, s: usize) -> Vec<[f64; FACES]> {
        self.simplices[s].iter().map(|&i| self.point(i)).collect()
    }

    /// Chart coordinates of `p` relative to the centroid.
    pub fn to_chart(&self, p: &[f64; FACES]) -> [f64; DIM] {
        std::array::from_fn(|d| {
            self.chart[d].iter().zip(p.iter().zip(&self.centroid)).map(|(b, (x, c))| b * (x - c)).sum()
        })
    }

    /// The point of the hyperplane with chart coordinates `y`. It may lie
    /// outside the simplex.
    pub fn from_chart(&self, y: &[f64; DIM]) -> [f64; FACES] {
        let mut p = self.centroid;
        for (b, yd) in self.chart.iter().zip(y) {
            for (pi, bi) in p.iter_mut().zip(b) {
                *pi += bi * yd;
            }
        }
        p
    }

    /// Draws a point uniformly on the slice: a simplex by volume, then
    /// uniform barycentric coordinates.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; FACES] {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = self.simplices.len() - 1;
        for (s, v) in self.relative_volumes.iter().enumerate() {
            acc += v;
            if u < acc {
                chosen = s;
                break;
            }
        }
        let e: [f64; DIM + 1] = std::array::from_fn(|_| rng.sample::<f64, _>(Exp1));
        let total: f64 = e.iter().sum();
        let mut p = [0.0; FACES];
        for (&i, ei) in self.simplices[chosen].iter().zip(e) {
            let v = self.point(i);
            for (pi, vi) in p.iter_mut().zip(v) {
                *pi += ei / total * vi;
            }
        }
        p.map(|x| x.max(0.0))
    }
}

/// Builds `Delta_a`. Fails with [`Error::DegeneratePolytope`] at `a = 1` and
/// `a = 6`, where the slice is a single vertex.
pub fn build_constraint_polytope(a: Average) -> Result<ConstraintPolytope> {
    if a.vertex_face().is_some_and(|f| f.value() == 1 || f.value() == 6) {
        return Err(Error::DegeneratePolytope(a.to_string()));
    }
    let target = a.ratio();
    let mut exact = Vec::new();
    for i in 1..=FACES as i64 {
        if Rational64::from_integer(i) == target {
            let mut v = [Rational64::zero(); FACES];
            v[i as usize - 1] = Rational64::one();
            exact.push(v);
        }
        for j in i + 1..=FACES as i64 {
            let (ri, rj) = (Rational64::from_integer(i), Rational64::from_integer(j));
            if ri < target && target < rj {
                let mut v = [Rational64::zero(); FACES];
                v[i as usize - 1] = (rj - target) / (rj - ri);
                v[j as usize - 1] = (target - ri) / (rj - ri);
                exact.push(v);
            }
        }
    }
    let floats: Vec<[f64; FACES]> = exact.iter().map(|v| v.map(rational_to_f64)).collect();
    let vertices = floats.iter().map(|v| Distribution::new(*v)).collect::<Result<Vec<_>>>()?;
    let mut centroid = [0.0; FACES];
    for v in &floats {
        for (c, x) in centroid.iter_mut().zip(v) {
            *c += x / floats.len() as f64;
        }
    }
    let chart = hyperplane_basis();

    let apex = floats.len();
    let all: Vec<usize> = (0..floats.len()).collect();
    let mut simplices = Vec::new();
    for facet in subfaces(&all, &exact, DIM) {
        for mut s in pulling_triangulation(&facet, &exact, DIM - 1) {
            s.push(apex);
            simplices.push(<[usize; DIM + 1]>::try_from(s).expect("4-simplex"));
        }
    }

    let mut points = floats.clone();
    points.push(centroid);
    let volumes: Vec<f64> =
        simplices.iter().map(|s| simplex_volume(&s.map(|i| points[i]), &chart, &centroid)).collect();
    let volume: f64 = volumes.iter().sum();
    let relative_volumes = volumes.iter().map(|v| v / volume).collect();
    Ok(ConstraintPolytope {
        average: a,
        exact_vertices: exact,
        vertices,
        centroid,
        simplices,
        relative_volumes,
        chart,
        volume,
    })
}

// Orthonormal basis of the directions keeping both sum and mean fixed.
fn hyperplane_basis() -> [[f64; FACES]; DIM] {
    let ones = [1.0 / (FACES as f64).sqrt(); FACES];
    let mean = FACE_VALUES.iter().sum::<f64>() / FACES as f64;
    let centered = FACE_VALUES.map(|v| v - mean);
    let norm = centered.iter().map(|x| x * x).sum::<f64>().sqrt();
    let centered = centered.map(|x| x / norm);
    let mut basis: Vec<[f64; FACES]> = vec![ones, centered];
    for e in 0..FACES {
        let mut x = [0.0; FACES];
        x[e] = 1.0;
        for b in &basis {
            let dot: f64 = x.iter().zip(b).map(|(p, q)| p * q).sum();
            for (xi, bi) in x.iter_mut().zip(b) {
                *xi -= dot * bi;
            }
        }
        let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 1e-8 {
            basis.push(x.map(|v| v / n));
        }
        if basis.len() == DIM + 2 {
            break;
        }
    }
    std::array::from_fn(|d| basis[d + 2])
}

fn simplex_volume(points: &[[f64; FACES]; DIM + 1], chart: &[[f64; FACES]; DIM], origin: &[f64; FACES]) -> f64 {
    let coords = |p: &[f64; FACES]| -> [f64; DIM] {
        std::array::from_fn(|d| chart[d].iter().zip(p.iter().zip(origin)).map(|(b, (x, o))| b * (x - o)).sum())
    };
    let base = coords(&points[0]);
    let mut m = [[0.0; DIM]; DIM];
    for r in 0..DIM {
        let c = coords(&points[r + 1]);
        for d in 0..DIM {
            m[r][d] = c[d] - base[d];
        }
    }
    determinant(m).abs() / 24.0
}

fn determinant<const N: usize>(mut m: [[f64; N]; N]) -> f64 {
    let mut det = 1.0;
    for col in 0..N {
        let pivot = (col..N).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs())).expect("rows");
        if m[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            m.swap(pivot, col);
            det = -det;
        }
        det *= m[col][col];
        for r in col + 1..N {
            let factor = m[r][col] / m[col][col];
            for c in col..N {
                m[r][c] -= factor * m[col][c];
            }
        }
    }
    det
}

// Affine dimension of a set of exact points.
fn affine_dim(face: &[usize], exact: &[[Rational64; FACES]]) -> usize {
    if face.is_empty() {
        return 0;
    }
    let base = exact[face[0]];
    let mut rows: Vec<[Rational64; FACES]> =
        face[1..].iter().map(|&i| std::array::from_fn(|k| exact[i][k] - base[k])).collect();
    let mut rank = 0;
    for col in 0..FACES {
        let Some(p) = (rank..rows.len()).find(|&r| !rows[r][col].is_zero()) else {
            continue;
        };
        rows.swap(rank, p);
        for r in 0..rows.len() {
            if r != rank && !rows[r][col].is_zero() {
                let f = rows[r][col] / rows[rank][col];
                for c in 0..FACES {
                    let x = rows[rank][c];
                    rows[r][c] -= f * x;
                }
            }
        }
        rank += 1;
    }
    rank
}

// Faces of dimension `dim - 1` of the face spanned by `face` (of dimension
// `dim`): its intersections with the facets f_k = 0 of the simplex.
fn subfaces(face: &[usize], exact: &[[Rational64; FACES]], dim: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for k in 0..FACES {
        let sub: Vec<usize> = face.iter().copied().filter(|&i| exact[i][k].is_zero()).collect();
        if sub.len() == face.len() || sub.len() < dim || out.contains(&sub) {
            continue;
        }
        if affine_dim(&sub, exact) == dim - 1 {
            out.push(sub);
        }
    }
    out
}

// Pulling triangulation: cone the lowest-index vertex over the
// triangulated subfaces that do not contain it.
fn pulling_triangulation(face: &[usize], exact: &[[Rational64; FACES]], dim: usize) -> Vec<Vec<usize>> {
    if dim == 0 {
        return vec![vec![face[0]]];
    }
    let apex = *face.iter().min().expect("nonempty face");
    let mut out = Vec::new();
    for sub in subfaces(face, exact, dim) {
        if sub.contains(&apex) {
            continue;
        }
        for mut s in pulling_triangulation(&sub, exact, dim - 1) {
            s.insert(0, apex);
            out.push(s);
        }
    }
    out
}
