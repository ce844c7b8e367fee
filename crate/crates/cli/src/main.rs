use std::io::Write;

fn main() {
    let seed = exdice_cli::cli::env_seed();
    let out = exdice_cli::run(std::env::args_os(), seed.as_deref());
    print!("{}", out.stdout);
    eprint!("{}", out.stderr);
    let _ = std::io::stdout().flush();
    std::process::exit(out.code);
}
