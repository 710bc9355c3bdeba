use clap::Parser;
use latmap::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        let record = serde_json::json!({ "error": e.kind(), "message": e.to_string(), "exit_code": e.exit_code() });
        eprintln!("{record}");
        std::process::exit(e.exit_code());
    }
}
