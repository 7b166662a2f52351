use clap::Parser;
use nmmp_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(manifest) => {
            println!("{}", serde_json::to_string(&manifest).expect("manifest serializes"));
        }
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            std::process::exit(e.exit_code());
        }
    }
}
