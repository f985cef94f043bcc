use std::io::Write;

fn main() {
    let (code, output) = pathmeasure::cli::run(std::env::args_os());
    let mut stdout = std::io::stdout().lock();
    if stdout.write_all(output.as_bytes()).and_then(|_| stdout.flush()).is_err() {
        std::process::exit(1);
    }
    std::process::exit(code);
}
