//! Runs the planning service.
//!
//! ```text
//! cargo run -p havnfp-service --example serve -- 127.0.0.1:8080 /tmp/sessions
//! ```
//!
//! The optional second argument is a directory for session snapshots.

use std::time::Duration;

use havnfp_service::{serve, ServiceConfig};

#[tokio::main]
async fn main() -> std::io::Result<()> {
    let mut args = std::env::args().skip(1);
    let addr = args.next().unwrap_or_else(|| "127.0.0.1:8080".into());
    let config = ServiceConfig {
        persist_dir: args.next().map(Into::into),
        sync_window: Duration::from_secs(2),
        ..ServiceConfig::default()
    };
    let addr = addr.parse().map_err(std::io::Error::other)?;
    println!("listening on http://{addr}/v1/sessions");
    serve(addr, config).await
}
