use std::sync::Arc;
use std::time::Duration;

use creasim::cli::main_with;
use creasim::providers::http::UreqTransport;

fn main() {
    let transport = Arc::new(UreqTransport::new(Duration::from_secs(120)));
    let code = main_with(
        std::env::args(),
        transport,
        &mut std::io::stdout(),
        &mut std::io::stderr(),
    );
    std::process::exit(code);
}
