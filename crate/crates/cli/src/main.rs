use clap::Parser;

use xvanon_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        #[cfg(feature = "parallel")]
        {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                eprintln!("error: cannot configure {n} threads: {e}");
                std::process::exit(xvanon_cli::commands::EXIT_USAGE);
            }
        }
        #[cfg(not(feature = "parallel"))]
        eprintln!("warning: --threads {n} ignored (built without the `parallel` feature)");
    }
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.code);
    }
}
