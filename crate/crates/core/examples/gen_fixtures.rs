//! Regenerate the CSV fixtures under `fixtures/`.
//!
//!     cargo run -p dplan-core --example gen_fixtures

use std::fs::File;
use std::path::Path;

use dplan::workloads::fixtures::Dataset;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    std::fs::create_dir_all(&dir)?;
    for ds in Dataset::ALL {
        ds.write(File::create(dir.join(ds.file_name()))?)?;
    }
    println!("wrote fixtures to {}", dir.display());
    Ok(())
}
