//! Builds a phantom, saves it, and writes its standard plane slices as PGM.
//!
//! cargo run --example phantom_slice -- /tmp/phantom

use std::path::PathBuf;

use planeguide::geometry::SpDirection;
use planeguide::io::{save_pgm, save_volume_with_planes};
use planeguide::volume::{generate_phantom, sample_slice, DEFAULT_SLICE_SIZE};

fn main() -> planeguide::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "phantom_out".into()));
    std::fs::create_dir_all(&dir).map_err(|e| planeguide::Error::InvalidArgument(e.to_string()))?;
    let (volume, planes) = generate_phantom(0, [64, 64, 64])?;
    save_volume_with_planes(&volume, &planes, dir.join("phantom.raw"))?;
    for sp in &planes {
        let image = sample_slice(&volume, &sp.pose(SpDirection::Pos), DEFAULT_SLICE_SIZE, DEFAULT_SLICE_SIZE);
        let path = dir.join(format!("{}.pgm", sp.id));
        save_pgm(&image, &path)?;
        println!("{} -> {}", sp.id, path.display());
    }
    Ok(())
}
