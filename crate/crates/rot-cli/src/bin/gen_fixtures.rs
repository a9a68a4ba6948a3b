//! Regenerates the seeded fixture files under crates/rot-core/fixtures.
//! Usage: cargo run -p rot-cli --bin gen-fixtures -- [out_dir]

use std::path::PathBuf;

fn main() {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../rot-core/fixtures"));
    rot_core::fixtures::write_all(&out).expect("write fixtures");
    println!("fixtures written to {}", out.display());
}
