//! Locates a slice inside the volume with no pose prior.

use std::time::Instant;

use planeguide::geometry::{norm3, rotation_angle_3d, sub3, Pose, Quaternion};
use planeguide::registration::{register_slice, RegistrationConfig};
use planeguide::volume::{generate_phantom, sample_slice};

fn main() -> planeguide::Result<()> {
    let (volume, _) = generate_phantom(0, [64, 64, 64])?;
    let truth = Pose::new(Quaternion::from_axis_angle([0.4, -0.7, 0.2], 2.1), [0.08, -0.12, 0.05]);
    let image = sample_slice(&volume, &truth, 160, 160);
    let t0 = Instant::now();
    let result = register_slice(&volume, &image, &RegistrationConfig::default())?;
    println!("NCC {:.4} in {:.1?}", result.score, t0.elapsed());
    println!(
        "rotation error {:.2} deg, translation error {:.4}",
        rotation_angle_3d(result.pose.q, truth.q).to_degrees(),
        norm3(sub3(result.pose.delta, truth.delta))
    );
    Ok(())
}
