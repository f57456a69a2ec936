//! Image metrics between a standard plane slice and slices tilted away from it.

use planeguide::geometry::{Pose, Quaternion, SpDirection};
use planeguide::similarity::{atlas_loss, dice_percent, ms_ssim, ncc};
use planeguide::volume::{binarize, generate_phantom, sample_slice, DEFAULT_MASK_THRESHOLD};

fn main() -> planeguide::Result<()> {
    let (volume, planes) = generate_phantom(0, [64, 64, 64])?;
    let theta = planes[0].pose(SpDirection::Pos);
    let reference = sample_slice(&volume, &theta, 160, 160);
    let mask = binarize(&reference, DEFAULT_MASK_THRESHOLD);
    println!("tilt  NCC    MS-SSIM  Dice%   atlas dice  regression");
    for deg in [0.0, 2.0, 5.0, 10.0, 20.0, 40.0] {
        let tilt = Quaternion::from_axis_angle([1.0, 0.3, 0.0], f64::to_radians(deg));
        let pose = Pose::new((theta.q * tilt).normalized(), theta.delta);
        let img = sample_slice(&volume, &pose, 160, 160);
        let loss = atlas_loss(&volume, &mask, &theta, &pose)?;
        println!(
            "{deg:>4}  {:.3}  {:.3}    {:>6.2}  {:.4}      {:.4}",
            ncc(&reference, &img)?.value,
            ms_ssim(&reference, &img)?,
            dice_percent(&mask, &binarize(&img, DEFAULT_MASK_THRESHOLD))?,
            loss.dice,
            loss.regression
        );
    }
    Ok(())
}
