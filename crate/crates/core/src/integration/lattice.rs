//! Lattice sums for integrands of the form
//! `sum_j c_j prod_l p_l^(E_jl) phi_l(p_l)` over the 5-simplex.
//!
//! On the lattice `p = k / M` (`k` a composition of `M`) the product form
//! turns each sum into the coefficient of `x^M` in a product of six power
//! series, evaluated with truncated convolutions shared along a prefix trie
//! of exponent vectors. Refining `M = M0, 2 M0, 4 M0, ...` and extrapolating
//! in `1 / M` removes the lattice error of smooth integrands.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::types::FACES;

/// One term `exp(log_coeff) prod p^exponents` carrying a constant
/// observable vector.
#[derive(Debug, Clone, PartialEq)]
pub struct MonomialTerm {
    pub log_coeff: f64,
    pub exponents: [u32; FACES],
    pub observable: [f64; FACES],
}

/// Ratios `[sum int f_j o_j / sum int f_j ; int f p / int f]` and the
/// Richardson error indicator.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeResult {
    pub ratios: [f64; 2 * FACES],
    pub error: f64,
    pub levels: Vec<u32>,
    /// Evaluations of the one-dimensional factors `p^e phi_l(p)`.
    pub evaluations: u64,
}

// Series h_{l,e}[k] = (k/M)^e phi_l(k/M) / max_k phi_l, for k = 0..=M.
struct SeriesTable<'a, F> {
    m: usize,
    log_factor: &'a F,
    tilt: f64,
    shifts: [f64; FACES],
    cache: BTreeMap<(usize, u32), Vec<f64>>,
    evaluations: u64,
}

impl<'a, F: Fn(usize, f64) -> f64> SeriesTable<'a, F> {
    fn new(m: usize, log_factor: &'a F) -> Self {
        // A common tilt exp(theta k) multiplies every lattice point by
        // exp(theta M) and so cancels in ratios. It moves the peak of each
        // series towards k = M / 6, where the mass sits when phi is sharp,
        // keeping the products of six series representable.
        let k0 = (m / FACES).max(1).min(m - 1);
        let slope: f64 = (0..FACES)
            .map(|l| log_factor(l, (k0 + 1) as f64 / m as f64) - log_factor(l, k0 as f64 / m as f64))
            .sum::<f64>()
            / FACES as f64;
        let tilt = if slope.is_finite() { -slope } else { 0.0 };
        let shifts = std::array::from_fn(|l| {
            (0..=m).map(|k| log_factor(l, k as f64 / m as f64) + tilt * k as f64).fold(f64::NEG_INFINITY, f64::max)
        });
        SeriesTable { m, log_factor, tilt, shifts, cache: BTreeMap::new(), evaluations: 6 * (m as u64 + 1) }
    }

    fn get(&mut self, face: usize, e: u32) -> &[f64] {
        let (m, tilt, shift, log_factor) = (self.m, self.tilt, self.shifts[face], self.log_factor);
        let evaluations = &mut self.evaluations;
        self.cache.entry((face, e)).or_insert_with(|| {
            *evaluations += m as u64 + 1;
            (0..=m)
                .map(|k| {
                    let p = k as f64 / m as f64;
                    let mono = if e == 0 { 0.0 } else { f64::from(e) * p.ln() };
                    (mono + log_factor(face, p) + tilt * k as f64 - shift).exp()
                })
                .collect()
        })
    }
}

fn truncated_convolution(a: &[f64], b: &[f64]) -> Vec<f64> {
    let m = a.len();
    let mut out = vec![0.0; m];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (o, &y) in out[i..].iter_mut().zip(b) {
            *o += x * y;
        }
    }
    out
}

// Lattice sums for each exponent vector in `vectors` (sorted), written to
// `out` in the same order.
fn trie_sums<F: Fn(usize, f64) -> f64>(
    vectors: &[[u32; FACES]],
    depth: usize,
    prefix: Option<&[f64]>,
    table: &mut SeriesTable<'_, F>,
    out: &mut Vec<f64>,
) {
    if depth == FACES - 1 {
        let prefix = prefix.expect("five faces convolved");
        for v in vectors {
            let last = table.get(depth, v[depth]);
            let s: f64 = prefix.iter().zip(last.iter().rev()).map(|(a, b)| a * b).sum();
            out.push(s);
        }
        return;
    }
    let mut start = 0;
    while start < vectors.len() {
        let e = vectors[start][depth];
        let end = start + vectors[start..].iter().take_while(|v| v[depth] == e).count();
        let series = table.get(depth, e).to_vec();
        let next = match prefix {
            None => series,
            Some(p) => truncated_convolution(p, &series),
        };
        trie_sums(&vectors[start..end], depth + 1, Some(&next), table, out);
        start = end;
    }
}

fn unit(i: usize) -> [u32; FACES] {
    let mut e = [0; FACES];
    e[i] = 1;
    e
}

fn add(a: &[u32; FACES], b: &[u32; FACES]) -> [u32; FACES] {
    std::array::from_fn(|i| a[i] + b[i])
}

fn ratios_at<F: Fn(usize, f64) -> f64>(terms: &[MonomialTerm], log_factor: &F, m: usize) -> ([f64; 2 * FACES], u64) {
    let mut vectors: Vec<[u32; FACES]> = Vec::with_capacity(terms.len() * (FACES + 1));
    for t in terms {
        vectors.push(t.exponents);
        for i in 0..FACES {
            vectors.push(add(&t.exponents, &unit(i)));
        }
    }
    vectors.sort_unstable();
    vectors.dedup();
    let mut table = SeriesTable::new(m, log_factor);
    let mut sums = Vec::with_capacity(vectors.len());
    trie_sums(&vectors, 0, None, &mut table, &mut sums);
    let lookup = |e: &[u32; FACES]| sums[vectors.binary_search(e).expect("collected")];

    let max_coeff = terms.iter().map(|t| t.log_coeff).fold(f64::NEG_INFINITY, f64::max);
    let mut den = 0.0;
    let mut num = [0.0; 2 * FACES];
    for t in terms {
        let c = (t.log_coeff - max_coeff).exp();
        let s = c * lookup(&t.exponents);
        den += s;
        for i in 0..FACES {
            num[i] += s * t.observable[i];
            num[FACES + i] += c * lookup(&add(&t.exponents, &unit(i)));
        }
    }
    (num.map(|x| x / den), table.evaluations)
}

/// Runs the refinement `M = m0 2^j` until two successive extrapolated
/// values agree within `tolerance` (after at least three levels) or
/// `max_levels` is reached. Levels are computed in parallel.
pub fn lattice_ratios<F>(
    terms: &[MonomialTerm],
    log_factor: &F,
    m0: u32,
    min_levels: usize,
    max_levels: usize,
    tolerance: f64,
) -> LatticeResult
where
    F: Fn(usize, f64) -> f64 + Sync,
{
    assert!(!terms.is_empty() && min_levels >= 2 && max_levels >= min_levels);
    let mut levels: Vec<u32> = (0..min_levels).map(|j| m0 << j).collect();
    let (mut rows, counts): (Vec<[f64; 2 * FACES]>, Vec<u64>) =
        levels.par_iter().map(|&m| ratios_at(terms, log_factor, m as usize)).unzip();
    let mut evaluations: u64 = counts.iter().sum();
    loop {
        let (best, error) = richardson(&rows);
        if error <= tolerance || levels.len() >= max_levels {
            return LatticeResult { ratios: best, error, levels, evaluations };
        }
        let m = m0 << levels.len();
        levels.push(m);
        let (row, count) = ratios_at(terms, log_factor, m as usize);
        rows.push(row);
        evaluations += count;
    }
}

// Neville-style table for a sequence at step ratio 2 with error expansion in
// integer powers of 1/M. Returns the last diagonal entry and its distance
// to the previous one.
fn richardson(rows: &[[f64; 2 * FACES]]) -> ([f64; 2 * FACES], f64) {
    let mut table: Vec<[f64; 2 * FACES]> = rows.to_vec();
    let mut previous_best = *rows.last().expect("rows");
    let mut best = previous_best;
    for j in 1..rows.len() {
        let factor = f64::from(1u32 << j);
        table =
            table.windows(2).map(|w| std::array::from_fn(|k| (factor * w[1][k] - w[0][k]) / (factor - 1.0))).collect();
        previous_best = best;
        best = *table.last().expect("entries");
    }
    let error = best.iter().zip(previous_best).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    (best, error)
}
