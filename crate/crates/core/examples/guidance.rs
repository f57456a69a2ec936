//! Rotation and translation that carry a probe pose onto each standard plane.

use planeguide::geometry::{transform_to_sp, DirectionChoice, Pose, Quaternion};
use planeguide::volume::generate_phantom;

fn main() -> planeguide::Result<()> {
    let (_, planes) = generate_phantom(0, [32, 32, 32])?;
    let probe = Pose::new(Quaternion::from_axis_angle([0.2, 1.0, 0.1], 0.6), [0.1, 0.0, -0.05]);
    for sp in &planes {
        let g = transform_to_sp(&probe, sp, DirectionChoice::Auto);
        println!(
            "{}: rotate {:.1} deg about [{:.3}, {:.3}, {:.3}], then translate [{:.3}, {:.3}, {:.3}] ({:?} view)",
            sp.id,
            g.angle.to_degrees(),
            g.axis[0],
            g.axis[1],
            g.axis[2],
            g.translation[0],
            g.translation[1],
            g.translation[2],
            g.chosen_direction
        );
        let reached = g.apply(&probe);
        let left = transform_to_sp(&reached, sp, DirectionChoice::Auto);
        println!("  after moving: {:.2e} deg left", left.angle.to_degrees());
    }
    Ok(())
}
