//! Simulated sweeps towards a standard plane, the random-plane baseline and
//! the per-scan evaluation behind the benchmark table.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, UnitSphere};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alignment::{refine_scan_poses, ContrastiveConfig, OptimizerConfig, ScanSequence};
use crate::error::{Error, Result};
use crate::geometry::{rotation_angle_3d, Pose, Quaternion, SpDirection, SpId, StandardPlaneDef};
use crate::registration::{register_scan_frames, RegistrationConfig};
use crate::similarity::{
    dice_percent, kl_divergence, ms_ssim, ncc, rotation_histogram, DEFAULT_HISTOGRAM_BINS, DEFAULT_HISTOGRAM_EPS,
};
use crate::volume::{binarize, sample_slice, Volume, DEFAULT_MASK_THRESHOLD, DEFAULT_SLICE_SIZE};

/// Half-width of the uniform translation box used for random planes.
pub const RANDOM_TRANSLATION_RANGE: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrajectoryConfig {
    pub steps: usize,
    /// Angle between the first frame and the standard plane, degrees.
    pub start_offset_deg: f64,
    /// Standard deviation of the per-frame orientation jitter, degrees per axis.
    pub noise_deg: f64,
    /// Half-width of the uniform offset of the first frame's translation.
    pub translation_offset: f64,
    /// Standard deviation of multiplicative intensity noise on rendered frames
    /// (0 renders frames straight from the volume).
    pub image_noise: f64,
    pub slice_size: usize,
    pub rng_seed: u64,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        TrajectoryConfig {
            steps: 60,
            start_offset_deg: 40.0,
            noise_deg: 1.0,
            translation_offset: 0.1,
            image_noise: 0.0,
            slice_size: DEFAULT_SLICE_SIZE,
            rng_seed: 0,
        }
    }
}

impl TrajectoryConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidArgument("a scan needs at least one step".into()));
        }
        if !(self.start_offset_deg > 0.0 && self.start_offset_deg <= 90.0) {
            return Err(Error::InvalidArgument("start offset must be in (0, 90] degrees".into()));
        }
        if !(self.noise_deg >= 0.0 && self.noise_deg <= 90.0) {
            return Err(Error::InvalidArgument("noise must be in [0, 90] degrees".into()));
        }
        if !(0.0..=1.0).contains(&self.translation_offset) {
            return Err(Error::InvalidArgument("translation offset must lie inside [0, 1]".into()));
        }
        if !(self.image_noise >= 0.0 && self.image_noise.is_finite()) {
            return Err(Error::InvalidArgument("image noise must be non-negative".into()));
        }
        if self.slice_size < 2 {
            return Err(Error::InvalidArgument("slice size must be at least 2".into()));
        }
        Ok(())
    }
}

fn random_axis(rng: &mut ChaCha8Rng) -> [f64; 3] {
    UnitSphere.sample(rng)
}

/// A sweep that slerps from a seeded start orientation to the plane's positive
/// direction, ending exactly on the standard plane. Returns the scan (with the
/// true orientations as probe orientations) and the true poses.
pub fn simulate_scan(volume: &Volume, sp: &StandardPlaneDef, cfg: &TrajectoryConfig) -> Result<(ScanSequence, Vec<Pose>)> {
    cfg.validate()?;
    sp.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let target = sp.orientation(SpDirection::Pos);
    let start = (target * Quaternion::from_axis_angle(random_axis(&mut rng), cfg.start_offset_deg.to_radians())).normalized();
    let r = cfg.translation_offset;
    let offset: [f64; 3] = std::array::from_fn(|_| if r > 0.0 { rng.random_range(-r..=r) } else { 0.0 });
    let jitter = Normal::new(0.0, cfg.noise_deg.to_radians()).map_err(|e| Error::InvalidArgument(e.to_string()))?;

    let last = cfg.steps - 1;
    let poses: Vec<Pose> = (0..cfg.steps)
        .map(|i| {
            if i == last {
                return sp.pose(SpDirection::Pos);
            }
            let t = i as f64 / last as f64;
            let mut q = start.slerp(target, t);
            if cfg.noise_deg > 0.0 {
                let v = [jitter.sample(&mut rng), jitter.sample(&mut rng), jitter.sample(&mut rng)];
                q = (q * Quaternion::from_rotation_vector(v)).normalized();
            }
            let delta = std::array::from_fn(|k| sp.delta_sp[k] + (1.0 - t) * offset[k]);
            Pose::new(q, delta)
        })
        .collect();

    let frames = poses
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut frame = sample_slice(volume, p, cfg.slice_size, cfg.slice_size);
            if cfg.image_noise > 0.0 {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed ^ (0xA5A5_0000 + i as u64));
                let noise = Normal::new(1.0, cfg.image_noise).expect("validated noise level");
                for v in &mut frame.pixels {
                    *v = (*v * noise.sample(&mut rng)).clamp(0.0, 1.0);
                }
            }
            frame
        })
        .collect();
    let scan = ScanSequence::new(frames, last, sp.id)?.with_probe(poses.iter().map(|p| p.q).collect())?;
    Ok((scan, poses))
}

/// Uniform random orientations with translations uniform in the +-0.3 box, one per frame.
pub fn random_plane_baseline(frames: usize, seed: u64) -> Vec<Pose> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = RANDOM_TRANSLATION_RANGE;
    (0..frames)
        .map(|_| {
            let q = Quaternion::random(&mut rng);
            let delta = std::array::from_fn(|_| rng.random_range(-r..=r));
            Pose::new(q, delta)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub kl: f64,
    pub dice_pct: f64,
    pub ncc_mean: f64,
    pub ncc_sd: f64,
    pub ms_ssim_mean: f64,
    pub ms_ssim_sd: f64,
    pub dice_trace: Vec<f64>,
    pub ncc_trace: Vec<f64>,
    pub ms_ssim_trace: Vec<f64>,
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Rotation angle of `q* . q_ref`, the rotation that carries `q` onto `q_ref`.
fn angle_to(q: Quaternion, q_ref: Quaternion) -> f64 {
    rotation_angle_3d(Quaternion::IDENTITY, q.conjugate() * q_ref)
}

/// Compares predicted poses against a scan: KL between the distributions of
/// rotation angles to the standard plane (probe versus prediction), and
/// per-frame Dice / NCC / MS-SSIM between each frame and the slice resampled
/// at its predicted pose.
pub fn evaluate_scan(scan: &ScanSequence, predicted: &[Pose], sp: &StandardPlaneDef, volume: &Volume) -> Result<EvaluationReport> {
    scan.validate()?;
    let probe = scan
        .probe_q
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("scan has no probe orientations".into()))?;
    if predicted.len() != scan.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predicted poses for {} frames",
            predicted.len(),
            scan.len()
        )));
    }
    for p in predicted {
        p.validate()?;
    }

    let probe_sp = probe[scan.sp_index];
    let truth_angles: Vec<f64> = probe.iter().map(|q| angle_to(*q, probe_sp)).collect();
    let predicted_angles: Vec<f64> = predicted
        .iter()
        .map(|p| angle_to(p.q, sp.orientation(sp.nearest_direction(p.q))))
        .collect();
    let kl = kl_divergence(
        &rotation_histogram(&truth_angles, DEFAULT_HISTOGRAM_BINS, DEFAULT_HISTOGRAM_EPS)?,
        &rotation_histogram(&predicted_angles, DEFAULT_HISTOGRAM_BINS, DEFAULT_HISTOGRAM_EPS)?,
    )?;

    let per_frame: Vec<(f64, f64, f64)> = scan
        .frames
        .par_iter()
        .zip(predicted)
        .map(|(frame, pose)| {
            let rendered = sample_slice(volume, pose, frame.width, frame.height);
            let dice = dice_percent(
                &binarize(frame, DEFAULT_MASK_THRESHOLD),
                &binarize(&rendered, DEFAULT_MASK_THRESHOLD),
            )?;
            Ok((dice, ncc(frame, &rendered)?.value, ms_ssim(frame, &rendered)?))
        })
        .collect::<Result<_>>()?;
    let dice_trace: Vec<f64> = per_frame.iter().map(|t| t.0).collect();
    let ncc_trace: Vec<f64> = per_frame.iter().map(|t| t.1).collect();
    let ms_ssim_trace: Vec<f64> = per_frame.iter().map(|t| t.2).collect();
    let (ncc_mean, ncc_sd) = mean_sd(&ncc_trace);
    let (ms_ssim_mean, ms_ssim_sd) = mean_sd(&ms_ssim_trace);
    Ok(EvaluationReport {
        kl,
        dice_pct: mean_sd(&dice_trace).0,
        ncc_mean,
        ncc_sd,
        ms_ssim_mean,
        ms_ssim_sd,
        dice_trace,
        ncc_trace,
        ms_ssim_trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    pub trajectory: TrajectoryConfig,
    pub registration: RegistrationConfig,
    pub contrastive: ContrastiveConfig,
    pub optimizer: OptimizerConfig,
    /// Base seed; scan `i` of plane `s` derives its seeds from it.
    pub seed: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            // shorter sweeps than a full clip, with speckle-level appearance noise
            // so that frames are not exact copies of atlas slices
            trajectory: TrajectoryConfig {
                steps: 20,
                image_noise: 0.5,
                ..TrajectoryConfig::default()
            },
            registration: RegistrationConfig::default(),
            contrastive: ContrastiveConfig::default(),
            optimizer: OptimizerConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub name: String,
    /// Mean over scans of the per-scan KL divergence.
    pub kl: f64,
    pub dice_pct: f64,
    pub ncc_mean: f64,
    pub ncc_sd: f64,
    pub ms_ssim_mean: f64,
    pub ms_ssim_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTable {
    pub sp_id: SpId,
    pub rows: Vec<BenchmarkRow>,
}

pub const ROW_RANDOM: &str = "random plane";
pub const ROW_REGISTRATION: &str = "registration";
pub const ROW_ALIGNED: &str = "registration + alignment";

/// Per-scan reports of the three methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanEvaluation {
    pub seed: u64,
    pub random: EvaluationReport,
    pub registration: EvaluationReport,
    pub aligned: EvaluationReport,
}

fn scan_seed(base: u64, sp_index: usize, scan: usize) -> u64 {
    base.wrapping_mul(1_000_003)
        .wrapping_add((sp_index as u64) << 32)
        .wrapping_add(scan as u64)
}

/// Simulates one scan and evaluates the three methods on it.
pub fn evaluate_methods(volume: &Volume, sp: &StandardPlaneDef, seed: u64, cfg: &BenchmarkConfig) -> Result<ScanEvaluation> {
    let trajectory = TrajectoryConfig {
        rng_seed: seed,
        ..cfg.trajectory
    };
    let (scan, _) = simulate_scan(volume, sp, &trajectory)?;
    let random = random_plane_baseline(scan.len(), seed ^ 0x5eed);
    let registered: Vec<Pose> = register_scan_frames(volume, &scan, &cfg.registration)?
        .into_iter()
        .map(|r| r.pose)
        .collect();
    let contrastive = ContrastiveConfig {
        rng_seed: seed,
        ..cfg.contrastive
    };
    let aligned = refine_scan_poses(&scan, &registered, sp, &contrastive, &cfg.optimizer)?.poses;
    Ok(ScanEvaluation {
        seed,
        random: evaluate_scan(&scan, &random, sp, volume)?,
        registration: evaluate_scan(&scan, &registered, sp, volume)?,
        aligned: evaluate_scan(&scan, &aligned, sp, volume)?,
    })
}

fn summarize(name: &str, reports: &[&EvaluationReport]) -> BenchmarkRow {
    let n = reports.len() as f64;
    let ncc: Vec<f64> = reports.iter().flat_map(|r| r.ncc_trace.iter().copied()).collect();
    let ssim: Vec<f64> = reports.iter().flat_map(|r| r.ms_ssim_trace.iter().copied()).collect();
    let dice: Vec<f64> = reports.iter().flat_map(|r| r.dice_trace.iter().copied()).collect();
    let (ncc_mean, ncc_sd) = mean_sd(&ncc);
    let (ms_ssim_mean, ms_ssim_sd) = mean_sd(&ssim);
    BenchmarkRow {
        name: name.to_string(),
        kl: reports.iter().map(|r| r.kl).sum::<f64>() / n,
        dice_pct: mean_sd(&dice).0,
        ncc_mean,
        ncc_sd,
        ms_ssim_mean,
        ms_ssim_sd,
    }
}

/// Runs `n_scans` simulated scans per standard plane and summarizes each
/// method into one row. Also returns the per-scan evaluations.
pub fn run_benchmark_detailed(
    volume: &Volume,
    sps: &[StandardPlaneDef],
    n_scans: usize,
    cfg: &BenchmarkConfig,
) -> Result<Vec<(BenchmarkTable, Vec<ScanEvaluation>)>> {
    if n_scans == 0 {
        return Err(Error::InvalidArgument("the benchmark needs at least one scan".into()));
    }
    if sps.is_empty() {
        return Err(Error::Empty("standard planes"));
    }
    sps.iter()
        .enumerate()
        .map(|(s, sp)| {
            let scans = (0..n_scans)
                .map(|i| evaluate_methods(volume, sp, scan_seed(cfg.seed, s, i), cfg))
                .collect::<Result<Vec<_>>>()?;
            let pick = |f: fn(&ScanEvaluation) -> &EvaluationReport| scans.iter().map(f).collect::<Vec<_>>();
            let rows = vec![
                summarize(ROW_RANDOM, &pick(|e| &e.random)),
                summarize(ROW_REGISTRATION, &pick(|e| &e.registration)),
                summarize(ROW_ALIGNED, &pick(|e| &e.aligned)),
            ];
            Ok((BenchmarkTable { sp_id: sp.id, rows }, scans))
        })
        .collect()
}

pub fn run_benchmark(volume: &Volume, sps: &[StandardPlaneDef], n_scans: usize, cfg: &BenchmarkConfig) -> Result<Vec<BenchmarkTable>> {
    Ok(run_benchmark_detailed(volume, sps, n_scans, cfg)?
        .into_iter()
        .map(|(t, _)| t)
        .collect())
}

/// Plain-text table with one block per standard plane.
pub fn format_table(tables: &[BenchmarkTable]) -> String {
    let mut out = String::new();
    for t in tables {
        let _ = writeln!(out, "{}", t.sp_id);
        let _ = writeln!(
            out,
            "  {:<26} {:>8} {:>8} {:>16} {:>16}",
            "method", "KL", "Dice%", "NCC", "MS-SSIM"
        );
        for r in &t.rows {
            let _ = writeln!(
                out,
                "  {:<26} {:>8.3} {:>8.2} {:>16} {:>16}",
                r.name,
                r.kl,
                r.dice_pct,
                format!("{:.3}±{:.3}", r.ncc_mean, r.ncc_sd),
                format!("{:.3}±{:.3}", r.ms_ssim_mean, r.ms_ssim_sd),
            );
        }
    }
    out
}
