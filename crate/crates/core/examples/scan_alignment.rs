//! Refines noisy per-frame orientations of a sweep with the scan objective.

use planeguide::alignment::{refine_scan_poses, ContrastiveConfig, OptimizerConfig};
use planeguide::evaluation::{simulate_scan, TrajectoryConfig};
use planeguide::geometry::{rotation_angle_3d, Pose, Quaternion};
use planeguide::volume::generate_phantom;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

fn main() -> planeguide::Result<()> {
    let (volume, planes) = generate_phantom(0, [64, 64, 64])?;
    let sp = &planes[1];
    let (scan, truth) = simulate_scan(&volume, sp, &TrajectoryConfig::default())?;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let noise = Normal::new(0.0, 3f64.to_radians()).unwrap();
    let init: Vec<Pose> = truth
        .iter()
        .map(|p| {
            let v = [noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng)];
            Pose::new((p.q * Quaternion::from_rotation_vector(v)).normalized(), p.delta)
        })
        .collect();
    let mean_err = |poses: &[Pose]| {
        poses.iter().zip(&truth).map(|(a, b)| rotation_angle_3d(a.q, b.q).to_degrees()).sum::<f64>() / poses.len() as f64
    };

    let r = refine_scan_poses(&scan, &init, sp, &ContrastiveConfig::default(), &OptimizerConfig::default())?;
    println!("{} frames towards {}", scan.len(), sp.id);
    println!("objective {:.4} -> {:.4} in {} iterations", r.initial_objective, r.final_objective, r.iterations);
    println!("mean rotation error {:.3} -> {:.3} deg", mean_err(&init), mean_err(&r.poses));
    Ok(())
}
