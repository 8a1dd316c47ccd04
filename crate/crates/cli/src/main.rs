use std::path::PathBuf;

fn main() {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let state_path = std::env::var_os("SLICEKIT_STATE").map(PathBuf::from);
    let result = slicekit_cli::run_with_state(&argv, state_path.as_deref());
    print!("{}", result.stdout);
    eprint!("{}", result.stderr);
    std::process::exit(result.exit_code);
}
