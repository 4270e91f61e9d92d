use clap::Parser;
use flatgp_cli::{configure_threads, run, ExperimentConfig};

fn main() {
    let cfg = match ExperimentConfig::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("flatgp: {e}");
        std::process::exit(1);
    }
    std::process::exit(run(&cfg));
}
