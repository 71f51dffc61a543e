use std::io::Write;

fn main() {
    let (code, out) = prp_core::cli::run_command(std::env::args_os());
    // A closed pipe downstream is not an error of ours.
    let _ = writeln!(std::io::stdout().lock(), "{out}");
    std::process::exit(code);
}
