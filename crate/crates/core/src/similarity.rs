//! Losses and image/motion metrics: the atlas loss (soft dice plus pose
//! regression), NCC, MS-SSIM, KL divergence over rotation histograms and a
//! deterministic semantic descriptor.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Pose;
use crate::volume::{sample_slice, Mask, SliceImage, Volume};

/// Smoothing term of the dice ratio; both empty inputs give a loss of 0.
pub const DICE_EPS: f64 = 1e-8;

/// Variance below which NCC is reported as degenerate.
pub const NCC_MIN_VARIANCE: f64 = 1e-12;

pub const DEFAULT_HISTOGRAM_BINS: usize = 32;
pub const DEFAULT_HISTOGRAM_EPS: f64 = 1e-6;

pub const DESCRIPTOR_LEN: usize = 128;
pub const SEMANTIC_FLOOR: f64 = 1e-3;

fn check_shape(a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch { left: a, right: b });
    }
    Ok(())
}

/// `1 - 2 sum(s y) / (sum(s) + sum(y))` with the slice intensities as a soft
/// foreground.
pub fn dice_loss(slice: &SliceImage, mask: &Mask) -> Result<f64> {
    check_shape(slice.shape(), (mask.width, mask.height))?;
    let (mut inter, mut sum_s, mut sum_y) = (0.0, 0.0, 0.0);
    for (&s, &y) in slice.pixels.iter().zip(&mask.data) {
        sum_s += s;
        if y {
            inter += s;
            sum_y += 1.0;
        }
    }
    Ok(1.0 - (2.0 * inter + DICE_EPS) / (sum_s + sum_y + DICE_EPS))
}

/// Dice overlap of two binary masks, in percent.
pub fn dice_percent(a: &Mask, b: &Mask) -> Result<f64> {
    Ok(100.0 * (1.0 - dice_loss(&a.to_image(), b)?))
}

/// L2 distance between the 7-vectors `(q, delta)` after flipping `theta_hat.q`
/// onto the same hemisphere as `theta.q`.
pub fn pose_regression_loss(theta: &Pose, theta_hat: &Pose) -> f64 {
    let q = theta.q;
    let q_hat = if q.dot(theta_hat.q) < 0.0 { -theta_hat.q } else { theta_hat.q };
    let dq = [q.w - q_hat.w, q.x - q_hat.x, q.y - q_hat.y, q.z - q_hat.z];
    let dt = [
        theta.delta[0] - theta_hat.delta[0],
        theta.delta[1] - theta_hat.delta[1],
        theta.delta[2] - theta_hat.delta[2],
    ];
    dq.iter().chain(dt.iter()).map(|d| d * d).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtlasLoss {
    pub dice: f64,
    pub regression: f64,
}

impl AtlasLoss {
    pub fn total(&self) -> f64 {
        self.dice + self.regression
    }
}

/// Atlas objective: soft dice of the slice resampled at `theta_hat` against the
/// label mask of the slice at `theta`, plus the pose regression term.
pub fn atlas_loss(volume: &Volume, atlas_slice_mask: &Mask, theta: &Pose, theta_hat: &Pose) -> Result<AtlasLoss> {
    let resampled = sample_slice(volume, theta_hat, atlas_slice_mask.width, atlas_slice_mask.height);
    Ok(AtlasLoss {
        dice: dice_loss(&resampled, atlas_slice_mask)?,
        regression: pose_regression_loss(theta, theta_hat),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NccScore {
    pub value: f64,
    pub degenerate: bool,
}

/// Pearson correlation of two equally long intensity sequences. Returns
/// `0` flagged degenerate when either variance is below `1e-12`.
pub fn ncc_values(a: &[f64], b: &[f64]) -> NccScore {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - mean_a, y - mean_b);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa / n < NCC_MIN_VARIANCE || sbb / n < NCC_MIN_VARIANCE {
        return NccScore {
            value: 0.0,
            degenerate: true,
        };
    }
    NccScore {
        value: (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0),
        degenerate: false,
    }
}

pub fn ncc(a: &SliceImage, b: &SliceImage) -> Result<NccScore> {
    check_shape(a.shape(), b.shape())?;
    if a.pixels.len() < 2 {
        return Err(Error::ImageTooSmall("ncc needs at least 2 pixels".into()));
    }
    Ok(ncc_values(&a.pixels, &b.pixels))
}

const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;
const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
pub const MS_SSIM_SCALES: usize = 3;
pub const MS_SSIM_MIN_SIZE: usize = 32;

#[derive(Clone)]
struct Plane {
    w: usize,
    h: usize,
    data: Vec<f64>,
}

impl Plane {
    fn map2(&self, other: &Plane, f: impl Fn(f64, f64) -> f64) -> Plane {
        Plane {
            w: self.w,
            h: self.h,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    fn downsample(&self) -> Plane {
        let (w, h) = (self.w / 2, self.h / 2);
        let mut data = Vec::with_capacity(w * h);
        for v in 0..h {
            for u in 0..w {
                let at = |du: usize, dv: usize| self.data[(2 * v + dv) * self.w + 2 * u + du];
                data.push(0.25 * (at(0, 0) + at(1, 0) + at(0, 1) + at(1, 1)));
            }
        }
        Plane { w, h, data }
    }

    /// Separable Gaussian blur with symmetric (half-sample) boundary handling.
    fn blur(&self, kernel: &[f64]) -> Plane {
        let r = (kernel.len() / 2) as isize;
        let reflect = |i: isize, n: usize| -> usize {
            let n = n as isize;
            let mut i = i;
            while i < 0 || i >= n {
                i = if i < 0 { -i - 1 } else { 2 * n - i - 1 };
            }
            i as usize
        };
        let mut tmp = vec![0.0; self.data.len()];
        for v in 0..self.h {
            for u in 0..self.w {
                tmp[v * self.w + u] = kernel
                    .iter()
                    .enumerate()
                    .map(|(k, &g)| g * self.data[v * self.w + reflect(u as isize + k as isize - r, self.w)])
                    .sum();
            }
        }
        let mut data = vec![0.0; self.data.len()];
        for v in 0..self.h {
            for u in 0..self.w {
                data[v * self.w + u] = kernel
                    .iter()
                    .enumerate()
                    .map(|(k, &g)| g * tmp[reflect(v as isize + k as isize - r, self.h) * self.w + u])
                    .sum();
            }
        }
        Plane { w: self.w, h: self.h, data }
    }
}

fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size / 2) as f64;
    let k: Vec<f64> = (0..size)
        .map(|i| (-(i as f64 - c).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

/// Mean luminance and contrast-structure terms of single-scale SSIM.
fn ssim_terms(a: &Plane, b: &Plane, kernel: &[f64]) -> (f64, f64) {
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let mu_a = a.blur(kernel);
    let mu_b = b.blur(kernel);
    let aa = a.map2(a, |x, y| x * y).blur(kernel);
    let bb = b.map2(b, |x, y| x * y).blur(kernel);
    let ab = a.map2(b, |x, y| x * y).blur(kernel);
    let n = a.data.len() as f64;
    let (mut l_sum, mut cs_sum) = (0.0, 0.0);
    for i in 0..a.data.len() {
        let (ma, mb) = (mu_a.data[i], mu_b.data[i]);
        let va = aa.data[i] - ma * ma;
        let vb = bb.data[i] - mb * mb;
        let cov = ab.data[i] - ma * mb;
        l_sum += (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
        cs_sum += (2.0 * cov + c2) / (va + vb + c2);
    }
    (l_sum / n, cs_sum / n)
}

/// Multi-scale SSIM over three dyadic scales (11-tap Gaussian, sigma 1.5,
/// standard weights renormalized to three scales, dynamic range 1).
/// Negative per-scale terms are clamped to zero.
pub fn ms_ssim(a: &SliceImage, b: &SliceImage) -> Result<f64> {
    check_shape(a.shape(), b.shape())?;
    if a.width.min(a.height) < MS_SSIM_MIN_SIZE {
        return Err(Error::ImageTooSmall(format!(
            "ms-ssim needs at least {MS_SSIM_MIN_SIZE}x{MS_SSIM_MIN_SIZE}, got {}x{}",
            a.width, a.height
        )));
    }
    let weights = &MS_SSIM_WEIGHTS[..MS_SSIM_SCALES];
    let wsum: f64 = weights.iter().sum();
    let kernel = gaussian_kernel(SSIM_WINDOW, SSIM_SIGMA);
    let mut pa = Plane {
        w: a.width,
        h: a.height,
        data: a.pixels.clone(),
    };
    let mut pb = Plane {
        w: b.width,
        h: b.height,
        data: b.pixels.clone(),
    };
    let mut value = 1.0;
    for (scale, &w) in weights.iter().enumerate() {
        let (l, cs) = ssim_terms(&pa, &pb, &kernel);
        let term = if scale + 1 == MS_SSIM_SCALES { l * cs } else { cs };
        value *= term.max(0.0).powf(w / wsum);
        if scale + 1 < MS_SSIM_SCALES {
            pa = pa.downsample();
            pb = pb.downsample();
        }
    }
    Ok(value.clamp(0.0, 1.0))
}

/// Normalized histogram of rotation angles over `[0, pi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationHistogram {
    pub edges: Vec<f64>,
    pub probabilities: Vec<f64>,
}

fn uniform_edges(bins: usize) -> Vec<f64> {
    (0..=bins).map(|i| PI * i as f64 / bins as f64).collect()
}

impl RotationHistogram {
    /// Builds a histogram on `bins` uniform bins from raw probabilities, with
    /// additive `eps` smoothing and renormalization.
    pub fn from_probabilities(probabilities: &[f64], eps: f64) -> Result<Self> {
        if probabilities.len() < 2 {
            return Err(Error::InvalidArgument("histogram needs at least 2 bins".into()));
        }
        let total: f64 = probabilities.iter().sum();
        if total <= 0.0 || probabilities.iter().any(|p| *p < 0.0 || !p.is_finite()) {
            return Err(Error::InvalidArgument("histogram masses must be non-negative with positive sum".into()));
        }
        let norm = 1.0 + eps * probabilities.len() as f64;
        Ok(RotationHistogram {
            edges: uniform_edges(probabilities.len()),
            probabilities: probabilities.iter().map(|p| (p / total + eps) / norm).collect(),
        })
    }

    pub fn bins(&self) -> usize {
        self.probabilities.len()
    }
}

pub fn rotation_histogram(angles: &[f64], bins: usize, eps: f64) -> Result<RotationHistogram> {
    if angles.is_empty() {
        return Err(Error::Empty("rotation angles"));
    }
    if bins < 2 {
        return Err(Error::InvalidArgument("histogram needs at least 2 bins".into()));
    }
    let mut counts = vec![0.0; bins];
    for &a in angles {
        if !(0.0..=PI + 1e-9).contains(&a) {
            return Err(Error::InvalidArgument(format!("rotation angle {a} outside [0, pi]")));
        }
        let bin = ((a / PI * bins as f64) as usize).min(bins - 1);
        counts[bin] += 1.0;
    }
    RotationHistogram::from_probabilities(&counts, eps)
}

/// `sum p_i ln(p_i / q_i)` in nats.
pub fn kl_divergence(p: &RotationHistogram, q: &RotationHistogram) -> Result<f64> {
    if p.bins() != q.bins() || p.edges != q.edges {
        return Err(Error::BinMismatch(p.bins(), q.bins()));
    }
    Ok(p
        .probabilities
        .iter()
        .zip(&q.probabilities)
        .map(|(&pi, &qi)| if pi > 0.0 { pi * (pi / qi).ln() } else { 0.0 })
        .sum())
}

/// Fixed-length, non-negative, unit-norm image descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticDescriptor(Vec<f64>);

impl SemanticDescriptor {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

const INTENSITY_BINS: usize = 64;
const ORIENTATION_BINS: usize = 8;
const CELL_COLS: usize = 4;
const CELL_ROWS: usize = 2;

fn normalize_or_uniform(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    } else {
        let u = 1.0 / (v.len() as f64).sqrt();
        v.iter_mut().for_each(|x| *x = u);
    }
}

/// 64-bin foreground intensity histogram followed by an 8-orientation
/// gradient histogram over a 4x2 grid of cells. Each half is unit-normalized
/// and the concatenation scaled to unit norm.
pub fn semantic_descriptor(image: &SliceImage) -> Result<SemanticDescriptor> {
    if image.width < 32 || image.height < 32 {
        return Err(Error::ImageTooSmall(format!(
            "descriptor needs at least 32x32, got {}x{}",
            image.width, image.height
        )));
    }
    let mut intensity = vec![0.0; INTENSITY_BINS];
    for &v in &image.pixels {
        if v > 0.0 {
            intensity[((v * INTENSITY_BINS as f64) as usize).min(INTENSITY_BINS - 1)] += 1.0;
        }
    }
    let mut gradient = vec![0.0; ORIENTATION_BINS * CELL_COLS * CELL_ROWS];
    let (w, h) = (image.width, image.height);
    for v in 1..h - 1 {
        for u in 1..w - 1 {
            let gx = 0.5 * (image.get(u + 1, v) - image.get(u - 1, v));
            let gy = 0.5 * (image.get(u, v + 1) - image.get(u, v - 1));
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let theta = gy.atan2(gx).rem_euclid(2.0 * PI);
            let ob = ((theta / (2.0 * PI) * ORIENTATION_BINS as f64) as usize).min(ORIENTATION_BINS - 1);
            let cell = (v * CELL_ROWS / h) * CELL_COLS + u * CELL_COLS / w;
            gradient[cell * ORIENTATION_BINS + ob] += mag;
        }
    }
    normalize_or_uniform(&mut intensity);
    normalize_or_uniform(&mut gradient);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Ok(SemanticDescriptor(intensity.into_iter().chain(gradient).map(|x| x * s).collect()))
}

/// Inner product of two descriptors, floored at `1e-3`.
pub fn semantic_similarity(a: &SemanticDescriptor, b: &SemanticDescriptor) -> f64 {
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    dot.clamp(SEMANTIC_FLOOR, 1.0)
}

/// One row of image/motion metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub kl: f64,
    pub dice: f64,
    pub ncc: f64,
    pub ms_ssim: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::{binarize, generate_phantom};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn square_mask(w: usize, h: usize, x0: usize, x1: usize, y0: usize, y1: usize) -> Mask {
        let img = SliceImage::from_fn(w, h, |u, v| ((x0..x1).contains(&u) && (y0..y1).contains(&v)) as u8 as f64);
        binarize(&img, 0.5)
    }

    fn noise(seed: u64, w: usize, h: usize) -> SliceImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SliceImage::from_fn(w, h, |_, _| rng.random::<f64>())
    }

    #[test]
    fn dice_examples() {
        let m = square_mask(10, 10, 2, 6, 2, 6);
        assert_abs_diff_eq!(dice_loss(&m.to_image(), &m).unwrap(), 0.0, epsilon = 1e-12);
        let other = square_mask(10, 10, 6, 10, 6, 10);
        assert_abs_diff_eq!(dice_loss(&m.to_image(), &other).unwrap(), 1.0, epsilon = 1e-9);
        // 4x4 squares offset by two columns share half their area
        let shifted = square_mask(10, 10, 4, 8, 2, 6);
        assert_abs_diff_eq!(dice_loss(&m.to_image(), &shifted).unwrap(), 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(dice_loss(&shifted.to_image(), &m).unwrap(), 0.5, epsilon = 1e-9);
        let wrong = square_mask(9, 10, 0, 1, 0, 1);
        assert!(matches!(dice_loss(&m.to_image(), &wrong), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn pose_regression_examples() {
        let p = Pose::new(crate::geometry::Quaternion::new(0.6, 0.0, 0.8, 0.0), [0.1, 0.2, 0.3]);
        assert_eq!(pose_regression_loss(&p, &p), 0.0);
        assert_eq!(pose_regression_loss(&p, &p.sign_flipped()), 0.0);
        let moved = Pose::new(p.q, [0.4, 0.2, 0.3]);
        assert_abs_diff_eq!(pose_regression_loss(&p, &moved), 0.3, epsilon = 1e-12);
    }

    #[test]
    fn atlas_loss_examples() {
        let (v, sps) = generate_phantom(5, [64, 64, 64]).unwrap();
        let theta = sps[0].pose(crate::geometry::SpDirection::Pos);
        let mask = binarize(&sample_slice(&v, &theta, 160, 160), crate::volume::DEFAULT_MASK_THRESHOLD);
        let at_truth = atlas_loss(&v, &mask, &theta, &theta).unwrap();
        assert!(at_truth.dice < 0.05, "dice {}", at_truth.dice);
        assert_eq!(at_truth.regression, 0.0);
        let flipped = atlas_loss(&v, &mask, &theta, &theta.sign_flipped()).unwrap();
        assert_eq!(flipped.total(), at_truth.total());
        let far = Pose::new(theta.q, [3.0, 3.0, 3.0]);
        assert_abs_diff_eq!(atlas_loss(&v, &mask, &theta, &far).unwrap().dice, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn ncc_examples() {
        let a = noise(1, 16, 16);
        assert_abs_diff_eq!(ncc(&a, &a).unwrap().value, 1.0, epsilon = 1e-12);
        let inv = SliceImage::new(16, 16, a.pixels.iter().map(|v| 1.0 - v).collect()).unwrap();
        assert_abs_diff_eq!(ncc(&a, &inv).unwrap().value, -1.0, epsilon = 1e-12);
        let flat = SliceImage::new(16, 16, vec![0.3; 256]).unwrap();
        let s = ncc(&a, &flat).unwrap();
        assert_eq!(s.value, 0.0);
        assert!(s.degenerate);
        assert!(ncc(&a, &noise(1, 8, 16)).is_err());
    }

    #[test]
    fn ncc_is_affine_invariant_and_symmetric() {
        let a = noise(2, 20, 12);
        let b = noise(3, 20, 12);
        let base = ncc(&a, &b).unwrap().value;
        let scaled = SliceImage::new(20, 12, b.pixels.iter().map(|v| 0.3 * v + 0.5).collect()).unwrap();
        assert_abs_diff_eq!(ncc(&a, &scaled).unwrap().value, base, epsilon = 1e-9);
        assert_abs_diff_eq!(ncc(&b, &a).unwrap().value, base, epsilon = 1e-15);
    }

    #[test]
    fn ms_ssim_examples() {
        let (v, sps) = generate_phantom(2, [48, 48, 48]).unwrap();
        let img = sample_slice(&v, &sps[0].pose(crate::geometry::SpDirection::Pos), 160, 160);
        assert_abs_diff_eq!(ms_ssim(&img, &img).unwrap(), 1.0, epsilon = 1e-12);

        let n1 = noise(10, 160, 160);
        let n2 = noise(11, 160, 160);
        let noise_value = ms_ssim(&n1, &n2).unwrap();
        assert!(noise_value < 0.3, "noise ms-ssim {noise_value}");

        let half = SliceImage::new(160, 160, n1.pixels.iter().map(|v| 0.5 * v).collect()).unwrap();
        let contrast = ms_ssim(&n1, &half).unwrap();
        assert!(contrast < 1.0 && contrast > noise_value, "contrast {contrast} vs noise {noise_value}");
        assert_abs_diff_eq!(ms_ssim(&half, &n1).unwrap(), contrast, epsilon = 1e-12);

        assert!(matches!(ms_ssim(&noise(1, 31, 64), &noise(2, 31, 64)), Err(Error::ImageTooSmall(_))));
    }

    #[test]
    fn histogram_examples() {
        let h = rotation_histogram(&[0.0; 10], 32, DEFAULT_HISTOGRAM_EPS).unwrap();
        assert_abs_diff_eq!(h.probabilities[0], 1.0, epsilon = 1e-4);
        assert_abs_diff_eq!(h.probabilities.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
        let h = rotation_histogram(&[PI], 32, DEFAULT_HISTOGRAM_EPS).unwrap();
        assert_abs_diff_eq!(h.probabilities[31], 1.0, epsilon = 1e-4);
        assert!(h.probabilities.iter().all(|&p| p > 0.0));
        assert!(matches!(rotation_histogram(&[], 32, 1e-6), Err(Error::Empty(_))));
    }

    #[test]
    fn histogram_of_uniform_angles_is_flat() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let angles: Vec<f64> = (0..100_000).map(|_| rng.random_range(0.0..PI)).collect();
        let h = rotation_histogram(&angles, 32, DEFAULT_HISTOGRAM_EPS).unwrap();
        for p in &h.probabilities {
            assert!((p - 1.0 / 32.0).abs() < 0.01);
        }
    }

    #[test]
    fn kl_examples() {
        let p = RotationHistogram::from_probabilities(&[1.0, 0.0], 1e-9).unwrap();
        let q = RotationHistogram::from_probabilities(&[0.5, 0.5], 1e-9).unwrap();
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        let forward = kl_divergence(&p, &q).unwrap();
        assert_abs_diff_eq!(forward, 2f64.ln(), epsilon = 1e-6);
        let backward = kl_divergence(&q, &p).unwrap();
        assert!((forward - backward).abs() > 1.0, "{forward} vs {backward}");
        let r = RotationHistogram::from_probabilities(&[1.0, 1.0, 1.0], 1e-9).unwrap();
        assert!(matches!(kl_divergence(&p, &r), Err(Error::BinMismatch(2, 3))));
    }

    #[test]
    fn kl_is_non_negative() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let a: Vec<f64> = (0..32).map(|_| rng.random::<f64>()).collect();
            let b: Vec<f64> = (0..32).map(|_| rng.random::<f64>()).collect();
            let p = RotationHistogram::from_probabilities(&a, 1e-6).unwrap();
            let q = RotationHistogram::from_probabilities(&b, 1e-6).unwrap();
            assert!(kl_divergence(&p, &q).unwrap() >= 0.0);
        }
    }

    #[test]
    fn descriptor_examples() {
        let (v, sps) = generate_phantom(4, [48, 48, 48]).unwrap();
        let tvp = sample_slice(&v, &sps[0].pose(crate::geometry::SpDirection::Pos), 160, 160);
        let tcp = sample_slice(&v, &sps[1].pose(crate::geometry::SpDirection::Pos), 160, 160);
        let d1 = semantic_descriptor(&tvp).unwrap();
        let d2 = semantic_descriptor(&tcp).unwrap();
        assert_eq!(d1.as_slice().len(), DESCRIPTOR_LEN);
        assert_abs_diff_eq!(d1.norm(), 1.0, epsilon = 1e-9);
        assert!(d1.as_slice().iter().all(|&x| x >= 0.0));
        assert_abs_diff_eq!(semantic_similarity(&d1, &d1), 1.0, epsilon = 1e-9);
        let s = semantic_similarity(&d1, &d2);
        assert!(s < 0.999, "similarity {s}");
        assert_eq!(s, semantic_similarity(&d2, &d1));
        let black = semantic_descriptor(&SliceImage::new(32, 32, vec![0.0; 1024]).unwrap()).unwrap();
        assert_abs_diff_eq!(black.norm(), 1.0, epsilon = 1e-9);
        assert!(semantic_descriptor(&noise(0, 31, 40)).is_err());
    }

    #[test]
    fn semantic_similarity_floor() {
        let mut a = vec![0.0; DESCRIPTOR_LEN];
        let mut b = vec![0.0; DESCRIPTOR_LEN];
        a[0] = 1.0;
        b[1] = 1.0;
        let (a, b) = (SemanticDescriptor(a), SemanticDescriptor(b));
        assert_eq!(semantic_similarity(&a, &b), SEMANTIC_FLOOR);
    }
}
