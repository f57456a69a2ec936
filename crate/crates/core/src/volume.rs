//! Atlas volumes, pose-parameterized plane grids and trilinear slice sampling.
//!
//! Volumes live in normalized coordinates `[-1, 1]^3` with voxel centers on the
//! corners of that cube (voxel `i` of `W` sits at `-1 + 2 i / (W - 1)`).
//! Samples outside the cube read as zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{add3, Pose, Quaternion, SpId, StandardPlaneDef, Vec3};

/// Default slice resolution, matching the conditioned ultrasound frames.
pub const DEFAULT_SLICE_SIZE: usize = 160;

/// Default foreground threshold for mask generation.
pub const DEFAULT_MASK_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    dims: [usize; 3],
    data: Vec<f32>,
    pub name: String,
}

impl Volume {
    pub fn new(dims: [usize; 3], data: Vec<f32>, name: impl Into<String>) -> Result<Self> {
        if dims.iter().any(|&d| d < 2) {
            return Err(Error::InvalidDimensions(format!("volume dims {dims:?} must all be >= 2")));
        }
        let expected = dims[0] * dims[1] * dims[2];
        if data.len() != expected {
            return Err(Error::PayloadSize {
                expected,
                actual: data.len() * 4,
            });
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
            return Err(Error::InvalidArgument(format!("voxel intensity {bad} outside [0, 1]")));
        }
        Ok(Volume {
            dims,
            data,
            name: name.into(),
        })
    }

    /// Fills a volume by evaluating `f` at every voxel's normalized coordinate.
    /// Values are clamped into `[0, 1]`.
    pub fn from_fn(dims: [usize; 3], name: impl Into<String>, mut f: impl FnMut(Vec3) -> f64) -> Result<Self> {
        if dims.iter().any(|&d| d < 2) {
            return Err(Error::InvalidDimensions(format!("volume dims {dims:?} must all be >= 2")));
        }
        let mut data = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let p = [
                        voxel_to_normalized(i, dims[0]),
                        voxel_to_normalized(j, dims[1]),
                        voxel_to_normalized(k, dims[2]),
                    ];
                    data.push(f(p).clamp(0.0, 1.0) as f32);
                }
            }
        }
        Volume::new(dims, data, name)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    /// Voxels in x-fastest order.
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn voxel(&self, i: usize, j: usize, k: usize) -> f32 {
        self.data[self.index(i, j, k)]
    }

    #[inline]
    fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    /// Maps a normalized coordinate to the lower cell corner and fractional
    /// offsets, or `None` outside the volume.
    #[inline]
    fn locate(&self, p: Vec3) -> Option<([usize; 3], Vec3)> {
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let c = p[a];
            if !(-1.0..=1.0).contains(&c) {
                return None;
            }
            let n = self.dims[a];
            let u = (c + 1.0) * 0.5 * (n - 1) as f64;
            let i0 = (u.floor() as usize).min(n - 2);
            base[a] = i0;
            frac[a] = u - i0 as f64;
        }
        Some((base, frac))
    }

    #[inline]
    fn corners(&self, base: [usize; 3]) -> [f64; 8] {
        let [i, j, k] = base;
        let sx = 1;
        let sy = self.dims[0];
        let sz = self.dims[0] * self.dims[1];
        let o = self.index(i, j, k);
        let d = &self.data;
        [
            d[o] as f64,
            d[o + sx] as f64,
            d[o + sy] as f64,
            d[o + sx + sy] as f64,
            d[o + sz] as f64,
            d[o + sx + sz] as f64,
            d[o + sy + sz] as f64,
            d[o + sx + sy + sz] as f64,
        ]
    }

    /// Trilinear intensity at a normalized coordinate; zero outside `[-1, 1]^3`.
    #[inline]
    pub fn sample(&self, p: Vec3) -> f64 {
        let Some((base, [fx, fy, fz])) = self.locate(p) else {
            return 0.0;
        };
        let c = self.corners(base);
        let c00 = c[0] + (c[1] - c[0]) * fx;
        let c10 = c[2] + (c[3] - c[2]) * fx;
        let c01 = c[4] + (c[5] - c[4]) * fx;
        let c11 = c[6] + (c[7] - c[6]) * fx;
        let c0 = c00 + (c10 - c00) * fy;
        let c1 = c01 + (c11 - c01) * fy;
        c0 + (c1 - c0) * fz
    }

    /// Intensity and its analytic spatial gradient with respect to normalized
    /// coordinates. Outside the volume both are zero.
    pub fn sample_with_gradient(&self, p: Vec3) -> (f64, Vec3) {
        let Some((base, [fx, fy, fz])) = self.locate(p) else {
            return (0.0, [0.0; 3]);
        };
        let c = self.corners(base);
        let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;

        let c00 = lerp(c[0], c[1], fx);
        let c10 = lerp(c[2], c[3], fx);
        let c01 = lerp(c[4], c[5], fx);
        let c11 = lerp(c[6], c[7], fx);
        let c0 = lerp(c00, c10, fy);
        let c1 = lerp(c01, c11, fy);
        let value = lerp(c0, c1, fz);

        let dz = c1 - c0;
        let dy = lerp(c10 - c00, c11 - c01, fz);
        let dx = lerp(
            lerp(c[1] - c[0], c[3] - c[2], fy),
            lerp(c[5] - c[4], c[7] - c[6], fy),
            fz,
        );
        // voxel units -> normalized units
        let s = |a: usize| 0.5 * (self.dims[a] - 1) as f64;
        (value, [dx * s(0), dy * s(1), dz * s(2)])
    }

    /// Samples the pose's image plane at arbitrary in-plane coordinates `(x, y)`.
    pub fn sample_plane_points(&self, pose: &Pose, local: &[[f64; 2]], out: &mut Vec<f64>) {
        let m = pose.q.normalized().rotation_matrix_unchecked();
        out.clear();
        out.extend(local.iter().map(|&[x, y]| {
            let p = [
                m[0][0] * x + m[0][1] * y + pose.delta[0],
                m[1][0] * x + m[1][1] * y + pose.delta[1],
                m[2][0] * x + m[2][1] * y + pose.delta[2],
            ];
            self.sample(p)
        }));
    }
}

pub fn voxel_to_normalized(i: usize, n: usize) -> f64 {
    -1.0 + 2.0 * i as f64 / (n - 1) as f64
}

/// In-plane coordinate of pixel `i` out of `n`, spanning `[-extent, extent]`.
pub fn pixel_to_plane(i: usize, n: usize, extent: f64) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    -extent + 2.0 * extent * i as f64 / (n - 1) as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn to_image(&self) -> SliceImage {
        SliceImage::from_fn(self.width, self.height, |u, v| {
            if self.data[v * self.width + u] {
                1.0
            } else {
                0.0
            }
        })
    }
}

/// Row-major grayscale image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
    pub mask: Option<Mask>,
    pub pose: Option<Pose>,
}

impl SliceImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(Error::InvalidDimensions(format!("image {width}x{height} must be at least 2x2")));
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidDimensions(format!(
                "image {width}x{height} needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        Ok(SliceImage {
            width,
            height,
            pixels,
            mask: None,
            pose: None,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for v in 0..height {
            for u in 0..width {
                pixels.push(f(u, v));
            }
        }
        SliceImage {
            width,
            height,
            pixels,
            mask: None,
            pose: None,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.pixels[v * self.width + u]
    }

    pub fn with_pose(mut self, pose: Pose) -> Self {
        self.pose = Some(pose);
        self
    }

    pub fn with_mask(mut self, mask: Mask) -> Self {
        self.mask = Some(mask);
        self
    }

    /// 8-bit quantization used for display and transport: `round(255 v)`.
    pub fn to_u8(&self) -> Vec<u8> {
        self.pixels.iter().map(|&v| quantize_u8(v)).collect()
    }

    pub fn from_u8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        SliceImage::new(width, height, bytes.iter().map(|&b| b as f64 / 255.0).collect())
    }
}

pub fn quantize_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// 3D sample coordinates for every output pixel, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneGrid {
    pub width: usize,
    pub height: usize,
    pub points: Vec<Vec3>,
}

impl PlaneGrid {
    pub fn at(&self, u: usize, v: usize) -> Vec3 {
        self.points[v * self.width + u]
    }
}

/// Pixel `(u, v)` maps to `R(q) (x_u, y_v, 0) + delta`, with `x_u`, `y_v`
/// spanning `[-extent, extent]`.
pub fn build_grid(pose: &Pose, out_w: usize, out_h: usize, extent: f64) -> PlaneGrid {
    let m = pose.q.normalized().rotation_matrix_unchecked();
    let mut points = Vec::with_capacity(out_w * out_h);
    for v in 0..out_h {
        let y = pixel_to_plane(v, out_h, extent);
        for u in 0..out_w {
            let x = pixel_to_plane(u, out_w, extent);
            points.push(add3(
                [m[0][0] * x + m[0][1] * y, m[1][0] * x + m[1][1] * y, m[2][0] * x + m[2][1] * y],
                pose.delta,
            ));
        }
    }
    PlaneGrid {
        width: out_w,
        height: out_h,
        points,
    }
}

/// `V o M_theta`: trilinear resampling of the volume on the pose's plane grid.
pub fn sample_slice(volume: &Volume, pose: &Pose, out_w: usize, out_h: usize) -> SliceImage {
    let grid = build_grid(pose, out_w, out_h, 1.0);
    let pixels = grid.points.iter().map(|&p| volume.sample(p)).collect();
    SliceImage {
        width: out_w,
        height: out_h,
        pixels,
        mask: None,
        pose: Some(*pose),
    }
}

/// Spatial gradient of the volume at every pixel of the pose's plane grid.
pub fn sample_slice_gradient(volume: &Volume, pose: &Pose, out_w: usize, out_h: usize) -> Vec<Vec3> {
    build_grid(pose, out_w, out_h, 1.0)
        .points
        .iter()
        .map(|&p| volume.sample_with_gradient(p).1)
        .collect()
}

pub fn binarize(image: &SliceImage, threshold: f64) -> Mask {
    Mask {
        width: image.width,
        height: image.height,
        data: image.pixels.iter().map(|&v| v > threshold).collect(),
    }
}

/// Oriented ellipsoid with an approximate signed distance (positive inside).
struct Ellipsoid {
    center: Vec3,
    semi_axes: Vec3,
    orientation: Quaternion,
}

impl Ellipsoid {
    fn new(center: Vec3, semi_axes: Vec3, tilt_z_deg: f64) -> Self {
        Ellipsoid {
            center,
            semi_axes,
            orientation: Quaternion::from_axis_angle([0.0, 0.0, 1.0], tilt_z_deg.to_radians()),
        }
    }

    fn signed_distance(&self, p: Vec3) -> f64 {
        let d = [p[0] - self.center[0], p[1] - self.center[1], p[2] - self.center[2]];
        let local = self.orientation.conjugate().rotate(d);
        let r = (0..3)
            .map(|a| (local[a] / self.semi_axes[a]).powi(2))
            .sum::<f64>()
            .sqrt();
        let min_axis = self.semi_axes.iter().cloned().fold(f64::INFINITY, f64::min);
        (1.0 - r) * min_axis
    }
}

fn smoothstep(lo: f64, hi: f64, x: f64) -> f64 {
    let t = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Smallest phantom edge length.
pub const MIN_PHANTOM_DIM: usize = 32;


/// Synthetic head phantom: a skull shell around bright tissue, shaped as a
/// union of a main ellipsoid with frontal and occipital lobes, holding
/// asymmetric inner structures of distinct intensities (lateral ventricles,
/// septum, thalami, cerebellum, cisterna, orbit). Background is exactly zero.
///
/// Returns the volume and the TVP-like and TCP-like standard planes.
pub fn generate_phantom(seed: u64, dims: [usize; 3]) -> Result<(Volume, Vec<StandardPlaneDef>)> {
    if dims.iter().any(|&d| d < MIN_PHANTOM_DIM) {
        return Err(Error::InvalidDimensions(format!(
            "phantom dims {dims:?} must all be >= {MIN_PHANTOM_DIM}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    fn jitter(rng: &mut ChaCha8Rng, c: Vec3, amount: f64) -> Vec3 {
        [
            c[0] + rng.random_range(-amount..=amount),
            c[1] + rng.random_range(-amount..=amount),
            c[2] + rng.random_range(-amount..=amount),
        ]
    }

    let head = [
        Ellipsoid::new(jitter(&mut rng, [0.02, -0.02, 0.0], 0.01), [0.82, 0.92, 0.74], 0.0),
        Ellipsoid::new(jitter(&mut rng, [0.06, -0.44, -0.28], 0.01), [0.55, 0.46, 0.44], -10.0),
        Ellipsoid::new(jitter(&mut rng, [-0.05, 0.42, 0.18], 0.01), [0.62, 0.50, 0.50], 6.0),
    ];
    // (center, semi-axes, tilt about z in degrees, intensity)
    let layout: [(Vec3, Vec3, f64, f64); 10] = [
        // lateral ventricles and septum: fluid, near black
        ([-0.22, 0.10, 0.14], [0.12, 0.38, 0.12], 14.0, 0.0),
        ([0.22, 0.0, 0.18], [0.08, 0.26, 0.09], -8.0, 0.03),
        ([0.02, 0.46, 0.10], [0.07, 0.11, 0.08], 0.0, 0.015),
        // thalami, cerebellum
        ([-0.08, -0.12, 0.0], [0.16, 0.10, 0.10], 20.0, 0.95),
        ([0.08, -0.56, -0.28], [0.32, 0.14, 0.14], -5.0, 0.93),
        // cisterna magna, orbit
        ([-0.04, -0.78, -0.36], [0.12, 0.08, 0.09], 0.0, 0.04),
        ([-0.34, 0.70, -0.16], [0.10, 0.08, 0.10], 0.0, 0.90),
        // asymmetric fluid cavities
        ([0.44, -0.18, -0.10], [0.14, 0.24, 0.16], 25.0, 0.0),
        ([-0.34, 0.34, -0.30], [0.18, 0.13, 0.12], -30.0, 0.0),
        ([0.30, 0.50, -0.20], [0.10, 0.08, 0.16], 10.0, 0.0),
    ];
    let structures: Vec<(Ellipsoid, f64)> = layout
        .iter()
        .map(|&(center, semi_axes, deg, value)| {
            let center = jitter(&mut rng, center, 0.015);
            let value = (value + rng.random_range(-0.01..=0.01)).clamp(0.0, 1.0);
            (Ellipsoid::new(center, semi_axes, deg), value)
        })
        .collect();

    // transition width of half a voxel along the shortest axis
    let edge = 1.0 / (dims.iter().copied().min().unwrap_or(2) - 1) as f64;
    let volume = Volume::from_fn(dims, format!("phantom-{seed}"), |p| {
        let sd = head
            .iter()
            .map(|e| e.signed_distance(p))
            .fold(f64::NEG_INFINITY, f64::max);
        let inside = smoothstep(-0.5 * edge, 0.5 * edge, sd);
        if inside == 0.0 {
            return 0.0;
        }
        let mut value = 1.0;
        for (shape, v) in &structures {
            let m = smoothstep(-0.5 * edge, 0.5 * edge, shape.signed_distance(p));
            value += (v - value) * m;
        }
        value * inside
    })?;

    let tilt = |axis: Vec3, deg: f64| Quaternion::from_axis_angle(axis, deg.to_radians());
    let tvp = StandardPlaneDef::new(
        SpId::Tvp,
        tilt([1.0, 0.0, 0.0], -8.0) * tilt([0.0, 1.0, 0.0], 5.0),
        [0.0, 0.0, 0.14],
    );
    let tcp = StandardPlaneDef::new(
        SpId::Tcp,
        tilt([1.0, 0.0, 0.0], 30.0) * tilt([0.0, 1.0, 0.0], 4.0),
        [0.04, -0.04, -0.12],
    );
    Ok((volume, vec![tvp, tcp]))
}
