//! Quaternion algebra on SO(3), geodesic distances and the pose-to-standard-plane
//! transformation.
//!
//! Conventions: Hamilton product, scalar-first `(w, x, y, z)`, active rotations.
//! `q` and `-q` describe the same orientation and every distance in this module
//! is invariant under a sign flip of either argument.

use std::fmt;
use std::ops::{Mul, Neg};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];
/// Row-major 3x3 matrix.
pub type Mat3 = [[f64; 3]; 3];

/// Scale between the SO(3) geodesic and the physical rotation angle.
pub const GEODESIC_ALPHA: f64 = 0.5;

/// Tolerance used when checking that a quaternion is unit norm.
pub const UNIT_TOLERANCE: f64 = 1e-6;

const AXIS_ANGLE_EPS: f64 = 1e-9;

#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl fmt::Debug for Quaternion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Quaternion({}, {}, {}, {})", self.w, self.x, self.y, self.z)
    }
}

impl From<[f64; 4]> for Quaternion {
    fn from(v: [f64; 4]) -> Self {
        Quaternion::new(v[0], v[1], v[2], v[3])
    }
}

impl From<Quaternion> for [f64; 4] {
    fn from(q: Quaternion) -> Self {
        q.to_array()
    }
}

impl Default for Quaternion {
    fn default() -> Self {
        Quaternion::IDENTITY
    }
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quaternion { w, x, y, z }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn vector(self) -> Vec3 {
        [self.x, self.y, self.z]
    }

    /// Rotation of `angle` radians about `axis`. The axis need not be normalized;
    /// a zero axis yields the identity.
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let n = norm3(axis);
        if n == 0.0 {
            return Quaternion::IDENTITY;
        }
        let (s, c) = (0.5 * angle).sin_cos();
        let k = s / n;
        Quaternion::new(c, axis[0] * k, axis[1] * k, axis[2] * k)
    }

    /// Exponential map of a rotation vector (axis scaled by angle).
    pub fn from_rotation_vector(v: Vec3) -> Self {
        let angle = norm3(v);
        if angle < 1e-12 {
            // second-order expansion keeps tiny finite-difference steps accurate
            let q = Quaternion::new(1.0 - angle * angle / 8.0, 0.5 * v[0], 0.5 * v[1], 0.5 * v[2]);
            return q.normalized();
        }
        Quaternion::from_axis_angle(v, angle)
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.to_array().iter().all(|c| c.is_finite())
    }

    pub fn is_unit(self) -> bool {
        (self.norm() - 1.0).abs() <= UNIT_TOLERANCE
    }

    pub fn normalized(self) -> Self {
        let n = self.norm();
        Quaternion::new(self.w / n, self.x / n, self.y / n, self.z / n)
    }

    pub fn dot(self, other: Quaternion) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn conjugate(self) -> Self {
        Quaternion::new(self.w, -self.x, -self.y, -self.z)
    }

    /// Representative with non-negative scalar part.
    pub fn canonical(self) -> Self {
        if self.w < 0.0 {
            -self
        } else {
            self
        }
    }

    pub fn to_rotation_matrix(self) -> Result<Mat3> {
        if !self.is_unit() {
            return Err(Error::NonUnitQuaternion { norm: self.norm() });
        }
        Ok(self.rotation_matrix_unchecked())
    }

    pub(crate) fn rotation_matrix_unchecked(self) -> Mat3 {
        let Quaternion { w, x, y, z } = self;
        [
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ]
    }

    /// Rotates `v` by this (unit) quaternion.
    pub fn rotate(self, v: Vec3) -> Vec3 {
        mat_vec(&self.rotation_matrix_unchecked(), v)
    }

    /// Axis-angle decomposition with `angle` in `[0, pi]`. The axis defaults to
    /// `(0, 0, 1)` when the angle is below `1e-9`.
    pub fn to_axis_angle(self) -> (Vec3, f64) {
        let q = self.canonical();
        let v = q.vector();
        let s = norm3(v);
        let angle = 2.0 * s.atan2(q.w);
        if angle < AXIS_ANGLE_EPS {
            return ([0.0, 0.0, 1.0], angle.max(0.0));
        }
        ([v[0] / s, v[1] / s, v[2] / s], angle)
    }

    /// Rotation vector (log map), angle in `[0, pi]`.
    pub fn to_rotation_vector(self) -> Vec3 {
        let (axis, angle) = self.to_axis_angle();
        scale3(axis, angle)
    }

    /// Spherical linear interpolation along the shorter arc.
    pub fn slerp(self, other: Quaternion, t: f64) -> Quaternion {
        let other = if self.dot(other) < 0.0 { -other } else { other };
        let delta = self.conjugate() * other;
        let v = delta.to_rotation_vector();
        (self * Quaternion::from_rotation_vector(scale3(v, t))).normalized()
    }

    /// Uniformly distributed orientation on SO(3).
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Quaternion {
        loop {
            let q = Quaternion::new(
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            );
            let n = q.norm();
            if n > 1e-6 {
                return q.normalized();
            }
        }
    }
}

impl Mul for Quaternion {
    type Output = Quaternion;

    fn mul(self, b: Quaternion) -> Quaternion {
        let a = self;
        Quaternion::new(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;

    fn neg(self) -> Quaternion {
        Quaternion::new(-self.w, -self.x, -self.y, -self.z)
    }
}

pub fn quat_multiply(a: Quaternion, b: Quaternion) -> Quaternion {
    a * b
}

pub fn quat_conjugate(q: Quaternion) -> Quaternion {
    q.conjugate()
}

pub fn to_rotation_matrix(q: Quaternion) -> Result<Mat3> {
    q.to_rotation_matrix()
}

pub fn to_axis_angle(q: Quaternion) -> (Vec3, f64) {
    q.to_axis_angle()
}

/// `arccos(|<a, b>|)`: half the 3D rotation angle between `a` and `b`, in
/// `[0, pi/2]`.
///
/// Evaluated as `2 atan2(|a - b|, |a + b|)` after aligning signs, which is the
/// same quantity for unit quaternions but keeps full precision near zero where
/// `arccos` of a rounded inner product does not.
pub fn geodesic_loss(a: Quaternion, b: Quaternion) -> f64 {
    let a = a.normalized();
    let mut b = b.normalized();
    if a.dot(b) < 0.0 {
        b = -b;
    }
    let diff = [a.w - b.w, a.x - b.x, a.y - b.y, a.z - b.z];
    let sum = [a.w + b.w, a.x + b.x, a.y + b.y, a.z + b.z];
    let nd = diff.iter().map(|c| c * c).sum::<f64>().sqrt();
    let ns = sum.iter().map(|c| c * c).sum::<f64>().sqrt();
    (2.0 * nd.atan2(ns)).clamp(0.0, std::f64::consts::FRAC_PI_2)
}

/// Physical rotation angle between two orientations, in `[0, pi]`.
pub fn rotation_angle_3d(a: Quaternion, b: Quaternion) -> f64 {
    geodesic_loss(a, b) / GEODESIC_ALPHA
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub q: Quaternion,
    /// Translation in normalized volume coordinates, 0 at the volume center.
    pub delta: Vec3,
}

impl Default for Pose {
    fn default() -> Self {
        Pose::IDENTITY
    }
}

impl Pose {
    pub const IDENTITY: Pose = Pose {
        q: Quaternion::IDENTITY,
        delta: [0.0; 3],
    };

    pub fn new(q: Quaternion, delta: Vec3) -> Self {
        Pose { q, delta }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.q.is_finite() || !self.q.is_unit() {
            return Err(Error::NonUnitQuaternion { norm: self.q.norm() });
        }
        if !self.delta.iter().all(|d| d.is_finite()) {
            return Err(Error::InvalidArgument("pose translation is not finite".into()));
        }
        Ok(())
    }

    pub fn sign_flipped(self) -> Pose {
        Pose::new(-self.q, self.delta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SpId {
    #[serde(rename = "TVP")]
    Tvp,
    #[serde(rename = "TCP")]
    Tcp,
}

impl SpId {
    pub const ALL: [SpId; 2] = [SpId::Tvp, SpId::Tcp];

    pub fn as_str(self) -> &'static str {
        match self {
            SpId::Tvp => "TVP",
            SpId::Tcp => "TCP",
        }
    }
}

impl fmt::Display for SpId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SpId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "TVP" => Ok(SpId::Tvp),
            "TCP" => Ok(SpId::Tcp),
            other => Err(Error::InvalidArgument(format!("unknown standard plane '{other}'"))),
        }
    }
}

/// One of the two viewing directions of a standard plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpDirection {
    Pos,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectionChoice {
    Pos,
    Neg,
    Auto,
}

/// A named standard plane with its two opposite orientation priors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StandardPlaneDef {
    pub id: SpId,
    pub q_pos: Quaternion,
    pub q_neg: Quaternion,
    pub delta_sp: Vec3,
}

/// Half-turn about the local x axis: keeps the image plane, reverses its heading.
pub const HEADING_FLIP: Quaternion = Quaternion::new(0.0, 1.0, 0.0, 0.0);

impl StandardPlaneDef {
    /// Builds the definition from one direction; the opposite one is the same
    /// plane flipped about its in-plane x axis.
    pub fn new(id: SpId, q_pos: Quaternion, delta_sp: Vec3) -> Self {
        let q_pos = q_pos.normalized();
        StandardPlaneDef {
            id,
            q_pos,
            q_neg: (q_pos * HEADING_FLIP).normalized(),
            delta_sp,
        }
    }

    pub fn orientation(&self, dir: SpDirection) -> Quaternion {
        match dir {
            SpDirection::Pos => self.q_pos,
            SpDirection::Neg => self.q_neg,
        }
    }

    pub fn pose(&self, dir: SpDirection) -> Pose {
        Pose::new(self.orientation(dir), self.delta_sp)
    }

    /// Checks unit norms and that the two directions are a half-turn apart
    /// about an axis lying in the image plane.
    pub fn validate(&self) -> Result<()> {
        for q in [self.q_pos, self.q_neg] {
            if !q.is_unit() {
                return Err(Error::NonUnitQuaternion { norm: q.norm() });
            }
        }
        let rel = self.q_pos.conjugate() * self.q_neg;
        let (axis, angle) = rel.to_axis_angle();
        if (angle - std::f64::consts::PI).abs() > 1e-6 || axis[2].abs() > 1e-6 {
            return Err(Error::InvalidArgument(format!(
                "{}: directions are not opposite in-plane (angle {angle}, axis {axis:?})",
                self.id
            )));
        }
        Ok(())
    }

    /// The direction closer to `q`; ties resolve to `Pos`.
    pub fn nearest_direction(&self, q: Quaternion) -> SpDirection {
        let d_pos = geodesic_loss(q, self.q_pos);
        let d_neg = geodesic_loss(q, self.q_neg);
        if d_neg < d_pos {
            SpDirection::Neg
        } else {
            SpDirection::Pos
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuidanceInstruction {
    pub target_sp: SpId,
    pub axis: Vec3,
    pub angle: f64,
    pub translation: Vec3,
    pub chosen_direction: SpDirection,
}

impl GuidanceInstruction {
    /// The rotation `q_I^sp` reassembled from axis and angle.
    pub fn rotation(&self) -> Quaternion {
        Quaternion::from_axis_angle(self.axis, self.angle)
    }

    /// Moves `pose` by this instruction: orientation `q * q_I^sp`, translation
    /// `R(q_I^sp) delta + delta_I^sp`.
    pub fn apply(&self, pose: &Pose) -> Pose {
        let r = self.rotation();
        Pose::new((pose.q * r).normalized(), add3(r.rotate(pose.delta), self.translation))
    }
}

/// Transformation from `pose` toward the standard plane:
/// `q_I^sp = q* q_sp`, `delta_I^sp = delta_sp - R(q_I^sp) delta`.
pub fn transform_to_sp(pose: &Pose, sp: &StandardPlaneDef, direction: DirectionChoice) -> GuidanceInstruction {
    let dir = match direction {
        DirectionChoice::Pos => SpDirection::Pos,
        DirectionChoice::Neg => SpDirection::Neg,
        DirectionChoice::Auto => sp.nearest_direction(pose.q),
    };
    let q_sp = sp.orientation(dir);
    let q_rel = pose.q.conjugate() * q_sp;
    let translation = sub3(sp.delta_sp, q_rel.rotate(pose.delta));
    let (axis, angle) = q_rel.to_axis_angle();
    GuidanceInstruction {
        target_sp: sp.id,
        axis,
        angle,
        translation,
        chosen_direction: dir,
    }
}

pub fn norm3(v: Vec3) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub fn add3(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub3(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale3(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn dot3(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn mat_vec(m: &Mat3, v: Vec3) -> Vec3 {
    [dot3(m[0], v), dot3(m[1], v), dot3(m[2], v)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI};

    const Z90: Quaternion = Quaternion::new(FRAC_1_SQRT_2, 0.0, 0.0, FRAC_1_SQRT_2);

    fn assert_quat_eq(a: Quaternion, b: Quaternion, tol: f64) {
        for (x, y) in a.to_array().iter().zip(b.to_array()) {
            assert_abs_diff_eq!(*x, y, epsilon = tol);
        }
    }

    #[test]
    fn multiply_basics() {
        let q = Quaternion::new(0.3, -0.1, 0.5, 0.2);
        assert_quat_eq(Quaternion::IDENTITY * q, q, 0.0);
        let i = Quaternion::new(0.0, 1.0, 0.0, 0.0);
        assert_quat_eq(i * i, Quaternion::new(-1.0, 0.0, 0.0, 0.0), 0.0);
        assert_quat_eq(Z90 * Z90, Quaternion::new(0.0, 0.0, 0.0, 1.0), 1e-15);
    }

    #[test]
    fn conjugate_basics() {
        assert_eq!(quat_conjugate(Quaternion::IDENTITY), Quaternion::IDENTITY);
        assert_eq!(
            quat_conjugate(Quaternion::new(0.0, 0.0, 0.0, 1.0)),
            Quaternion::new(0.0, -0.0, -0.0, -1.0)
        );
        let q = Quaternion::new(0.4, -0.2, 0.7, 0.1).normalized();
        assert_quat_eq(q * q.conjugate(), Quaternion::IDENTITY, 1e-12);
    }

    #[test]
    fn rotation_matrix_examples() {
        let m = to_rotation_matrix(Quaternion::IDENTITY).unwrap();
        assert_eq!(m, [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        let v = mat_vec(&to_rotation_matrix(Z90).unwrap(), [1.0, 0.0, 0.0]);
        assert_abs_diff_eq!(v[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v[1], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v[2], 0.0, epsilon = 1e-15);
        assert!(to_rotation_matrix(Quaternion::new(2.0, 0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn rotation_matrix_orthonormal_on_random_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let q = Quaternion::random(&mut rng);
            let m = q.to_rotation_matrix().unwrap();
            let mn = (-q).to_rotation_matrix().unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    let rtr: f64 = (0..3).map(|k| m[k][i] * m[k][j]).sum();
                    assert_abs_diff_eq!(rtr, if i == j { 1.0 } else { 0.0 }, epsilon = 1e-9);
                    assert_abs_diff_eq!(m[i][j], mn[i][j], epsilon = 1e-15);
                }
            }
            let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
            assert_abs_diff_eq!(det, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn geodesic_examples() {
        let q = Quaternion::new(0.2, 0.5, -0.4, 0.3).normalized();
        assert_eq!(geodesic_loss(q, q), 0.0);
        assert_eq!(geodesic_loss(q, -q), 0.0);
        assert_abs_diff_eq!(geodesic_loss(Quaternion::IDENTITY, Z90), FRAC_PI_4, epsilon = 1e-12);
        assert_abs_diff_eq!(
            geodesic_loss(Quaternion::IDENTITY, Z90),
            (FRAC_1_SQRT_2).acos(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn rotation_angle_examples() {
        let q = Quaternion::new(0.9, 0.1, 0.0, 0.3).normalized();
        assert_eq!(rotation_angle_3d(q, q), 0.0);
        assert_abs_diff_eq!(rotation_angle_3d(Quaternion::IDENTITY, Z90), FRAC_PI_2, epsilon = 1e-12);
        assert_abs_diff_eq!(
            rotation_angle_3d(Quaternion::IDENTITY, Quaternion::new(0.0, 1.0, 0.0, 0.0)),
            PI,
            epsilon = 1e-12
        );
    }

    #[test]
    fn axis_angle_examples() {
        let (_, angle) = to_axis_angle(Quaternion::IDENTITY);
        assert_eq!(angle, 0.0);
        let (axis, angle) = to_axis_angle(Z90);
        assert_abs_diff_eq!(angle, FRAC_PI_2, epsilon = 1e-12);
        assert_abs_diff_eq!(axis[2], 1.0, epsilon = 1e-12);
        let (axis, angle) = to_axis_angle(Quaternion::new(0.0, 1.0, 0.0, 0.0));
        assert_abs_diff_eq!(angle, PI, epsilon = 1e-12);
        assert_eq!(axis, [1.0, 0.0, 0.0]);
        let (axis, _) = to_axis_angle(Quaternion::IDENTITY);
        assert_eq!(axis, [0.0, 0.0, 1.0]);
    }

    fn identity_sp() -> StandardPlaneDef {
        StandardPlaneDef::new(SpId::Tvp, Quaternion::IDENTITY, [0.0; 3])
    }

    #[test]
    fn transform_to_sp_examples() {
        let g = transform_to_sp(&Pose::IDENTITY, &identity_sp(), DirectionChoice::Auto);
        assert_eq!(g.angle, 0.0);
        assert_eq!(g.translation, [0.0; 3]);

        let sp = StandardPlaneDef::new(
            SpId::Tcp,
            Quaternion::new(0.8, 0.1, -0.3, 0.2).normalized(),
            [0.1, -0.2, 0.05],
        );
        let g = transform_to_sp(&sp.pose(SpDirection::Pos), &sp, DirectionChoice::Auto);
        assert!(g.angle < 1e-9);
        assert!(norm3(g.translation) < 1e-12);

        // hand-evaluated: q_I = (r, 0, 0, -r), R(q_I) (0.1, 0, 0) = (0, -0.1, 0)
        let pose = Pose::new(Z90, [0.1, 0.0, 0.0]);
        let g = transform_to_sp(&pose, &identity_sp(), DirectionChoice::Pos);
        assert_quat_eq(g.rotation(), Quaternion::new(FRAC_1_SQRT_2, 0.0, 0.0, -FRAC_1_SQRT_2), 1e-12);
        assert_abs_diff_eq!(g.translation[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.translation[1], 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(g.translation[2], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn auto_direction_tie_prefers_pos() {
        let sp = identity_sp();
        // 90 degrees about x is equidistant from identity and the x half-turn
        let q = Quaternion::from_axis_angle([1.0, 0.0, 0.0], FRAC_PI_2);
        assert_eq!(sp.nearest_direction(q), SpDirection::Pos);
        let g = transform_to_sp(&Pose::new(q, [0.0; 3]), &sp, DirectionChoice::Auto);
        assert_eq!(g.chosen_direction, SpDirection::Pos);
    }

    #[test]
    fn standard_plane_directions_are_opposite() {
        let sp = StandardPlaneDef::new(SpId::Tvp, Quaternion::new(0.9, 0.2, 0.1, -0.3), [0.0; 3]);
        sp.validate().unwrap();
        assert_abs_diff_eq!(rotation_angle_3d(sp.q_pos, sp.q_neg), PI, epsilon = 1e-9);
        let bad = StandardPlaneDef { q_neg: sp.q_pos, ..sp };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn sp_json_layout() {
        let sp = identity_sp();
        let v: serde_json::Value = serde_json::to_value(sp).unwrap();
        assert_eq!(v["id"], "TVP");
        assert_eq!(v["q_pos"], serde_json::json!([1.0, 0.0, 0.0, 0.0]));
        assert_eq!(v["q_neg"], serde_json::json!([0.0, 1.0, 0.0, 0.0]));
        assert_eq!(v["delta_sp"], serde_json::json!([0.0, 0.0, 0.0]));
        let back: StandardPlaneDef = serde_json::from_value(v).unwrap();
        assert_eq!(back, sp);
    }

    #[test]
    fn slerp_endpoints_and_midpoint() {
        let a = Quaternion::IDENTITY;
        let b = Quaternion::from_axis_angle([0.0, 1.0, 0.0], 1.0);
        assert!(rotation_angle_3d(a.slerp(b, 0.0), a) < 1e-12);
        assert!(rotation_angle_3d(a.slerp(b, 1.0), b) < 1e-12);
        assert_abs_diff_eq!(rotation_angle_3d(a.slerp(b, 0.5), a), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(rotation_angle_3d(a.slerp(-b, 0.25), a), 0.25, epsilon = 1e-12);
    }
}
