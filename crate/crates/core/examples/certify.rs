//! Ten-stage certificate over twelve greedy radii, printed as JSON.

use padic_wander::cli::certify;
use padic_wander::skeleton::LogRadius;

fn main() -> padic_wander::error::Result<()> {
    let cert = certify(2, 12, 10, &LogRadius::integer(1), 0)?;
    let failing = cert.margins.iter().filter(|m| !m.holds()).count();
    eprintln!("{} margins, {failing} non-positive; trace consistent: {}", cert.margins.len(), cert.trace_consistent);
    println!("{}", serde_json::to_string_pretty(&cert)?);
    Ok(())
}
