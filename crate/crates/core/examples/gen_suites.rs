//! Regenerates the committed scenario suites under `suites/`.

use dynroute::suite::{bundled_root, write_suites, SUITE_SEED};

fn main() -> std::io::Result<()> {
    let root = bundled_root();
    write_suites(&root, SUITE_SEED)?;
    println!("wrote suites to {}", root.display());
    Ok(())
}
