//! Runs a small grid and prints the aggregated CSV.

use ura::harness::{sweep, write_csv, SweepGrid};

fn main() -> ura::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/small_grid.json").into());
    let text = std::fs::read_to_string(&path).map_err(|e| ura::Error::Io(e.to_string()))?;
    let grid = SweepGrid::from_json(&text)?;
    let rows = sweep(&grid, |_| Ok(()))?;
    write_csv(&mut std::io::stdout().lock(), &rows)
}
