//! Crops a wide frame to the network geometry and smooths it.

use planeguide::geometry::{Pose, Quaternion};
use planeguide::preprocess::{crop_resize, smooth, CropSpec};
use planeguide::similarity::ncc;
use planeguide::volume::{generate_phantom, sample_slice};

fn main() -> planeguide::Result<()> {
    let (volume, _) = generate_phantom(0, [64, 64, 64])?;
    let pose = Pose::new(Quaternion::from_axis_angle([1.0, 0.0, 0.0], 0.2), [0.0, 0.0, 0.1]);
    // a 4:3 acquisition frame
    let frame = sample_slice(&volume, &pose, 320, 240);
    let spec = CropSpec::default();
    let cropped = crop_resize(&frame, &spec)?;
    let (w, h) = spec.content_size();
    println!("{}x{} frame -> {}x{} ({}x{} content)", frame.width, frame.height, cropped.width, cropped.height, w, h);
    let smoothed = smooth(&cropped, 2, 0.1)?;
    println!("NCC to the unsmoothed crop {:.4}", ncc(&cropped, &smoothed)?.value);
    Ok(())
}
