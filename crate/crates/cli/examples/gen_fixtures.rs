//! Regenerates the shipped fixtures: `cargo run -p lexlabel-cli --example gen_fixtures [dir]`.

#[path = "../tests/support/fixtures.rs"]
mod fixtures;

fn main() -> std::io::Result<()> {
    let root = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/audit").to_string());
    fixtures::write_all(std::path::Path::new(&root))?;
    println!("fixtures written to {root}");
    Ok(())
}
