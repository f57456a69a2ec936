//! Single-frame slice-to-volume pose estimation by multi-start optimization.
//!
//! A coarse stage scores a near-uniform set of orientations crossed with a
//! translation grid by NCC on a subsampled pixel lattice; the best distinct
//! candidates are then polished by Nelder-Mead over the 7 pose parameters
//! (quaternion renormalized on every evaluation).

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alignment::{refine_scan_poses, ContrastiveConfig, OptimizerConfig, ScanSequence};
use crate::error::{Error, Result};
use crate::geometry::{norm3, rotation_angle_3d, sub3, Pose, Quaternion, StandardPlaneDef};
use crate::optim::{nelder_mead, NelderMeadConfig};
use crate::similarity::{ncc_values, NccScore};
use crate::volume::{pixel_to_plane, SliceImage, Volume};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegistrationConfig {
    /// Near-uniform orientations scored in the coarse stage.
    pub orientation_samples: usize,
    /// Seed of the global rotation applied to the orientation set (0 keeps it as generated).
    pub orientation_seed: u64,
    /// Translation grid points per axis.
    pub translation_steps: usize,
    /// Half-width of the translation grid.
    pub translation_range: f64,
    /// Orientation search radius around the prior, in degrees (180 searches all of SO(3)).
    pub search_radius_deg: f64,
    /// Distinct coarse candidates given a short pre-refinement.
    pub prerefine_candidates: usize,
    /// Simplex budget of the pre-refinement (scored on the coarse lattice).
    pub prerefine_evaluations: usize,
    /// Pre-refined candidates passed on to full refinement.
    pub top_k: usize,
    /// Refinement budget per candidate.
    pub max_evaluations: usize,
    /// Pixel stride of the coarse scoring lattice.
    pub coarse_stride: usize,
    /// Pixel stride of the refinement scoring lattice.
    pub refine_stride: usize,
    /// Initial simplex offsets for quaternion components and translation.
    pub simplex_rotation_step: f64,
    pub simplex_translation_step: f64,
    /// Candidates refined when starting from a temporal prior.
    pub temporal_top_k: usize,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        RegistrationConfig {
            orientation_samples: 256,
            orientation_seed: 0,
            translation_steps: 5,
            translation_range: 0.3,
            search_radius_deg: 180.0,
            prerefine_candidates: 192,
            prerefine_evaluations: 120,
            top_k: 8,
            max_evaluations: 500,
            coarse_stride: 8,
            refine_stride: 2,
            simplex_rotation_step: 0.08,
            simplex_translation_step: 0.06,
            temporal_top_k: 2,
        }
    }
}

impl RegistrationConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            self.orientation_samples,
            self.translation_steps,
            self.prerefine_candidates,
            self.prerefine_evaluations,
            self.top_k,
            self.max_evaluations,
            self.coarse_stride,
            self.refine_stride,
            self.temporal_top_k,
        ];
        if counts.contains(&0) {
            return Err(Error::InvalidArgument("registration counts must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.translation_range) {
            return Err(Error::InvalidArgument("translation range must lie inside [0, 1]".into()));
        }
        if !(self.search_radius_deg > 0.0 && self.search_radius_deg <= 180.0) {
            return Err(Error::InvalidArgument("search radius must be in (0, 180] degrees".into()));
        }
        Ok(())
    }

    /// Search settings around a previous frame's pose: half the orientation
    /// radius and half the translation range.
    pub fn temporal(&self) -> RegistrationConfig {
        RegistrationConfig {
            search_radius_deg: 0.5 * self.search_radius_deg,
            translation_range: 0.5 * self.translation_range,
            top_k: self.temporal_top_k,
            prerefine_candidates: self.prerefine_candidates.min(4 * self.temporal_top_k),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub pose: Pose,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistrationResult {
    pub pose: Pose,
    pub score: f64,
    pub degenerate: bool,
    /// Coarse starting candidates with their full-resolution NCC.
    pub candidates: Vec<Candidate>,
}

/// Super-Fibonacci spiral on the unit 3-sphere: `n` near-uniform rotations.
pub fn orientation_samples(n: usize, seed: u64) -> Vec<Quaternion> {
    const PHI: f64 = std::f64::consts::SQRT_2;
    const PSI: f64 = 1.533_751_168_755_204_3;
    let global = if seed == 0 {
        Quaternion::IDENTITY
    } else {
        use rand::SeedableRng;
        Quaternion::random(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed))
    };
    (0..n)
        .map(|i| {
            let s = i as f64 + 0.5;
            let t = s / n as f64;
            let (r, big_r) = (t.sqrt(), (1.0 - t).sqrt());
            let alpha = 2.0 * PI * s / PHI;
            let beta = 2.0 * PI * s / PSI;
            let q = Quaternion::new(r * alpha.sin(), r * alpha.cos(), big_r * beta.sin(), big_r * beta.cos());
            (global * q).normalized().canonical()
        })
        .collect()
}

/// Image pixels on a strided lattice together with their in-plane coordinates.
struct Lattice {
    local: Vec<[f64; 2]>,
    values: Vec<f64>,
}

impl Lattice {
    fn new(image: &SliceImage, stride: usize) -> Self {
        let mut local = Vec::new();
        let mut values = Vec::new();
        for v in (0..image.height).step_by(stride) {
            for u in (0..image.width).step_by(stride) {
                local.push([pixel_to_plane(u, image.width, 1.0), pixel_to_plane(v, image.height, 1.0)]);
                values.push(image.get(u, v));
            }
        }
        Lattice { local, values }
    }

    fn score(&self, volume: &Volume, pose: &Pose, buf: &mut Vec<f64>) -> NccScore {
        volume.sample_plane_points(pose, &self.local, buf);
        ncc_values(&self.values, buf)
    }
}

fn pose_from_params(x: &[f64]) -> Pose {
    let q = Quaternion::new(x[0], x[1], x[2], x[3]);
    let n = q.norm();
    let q = if n > 1e-12 { q.normalized() } else { Quaternion::IDENTITY };
    Pose::new(q, [x[4], x[5], x[6]])
}

fn params_from_pose(p: &Pose) -> [f64; 7] {
    [p.q.w, p.q.x, p.q.y, p.q.z, p.delta[0], p.delta[1], p.delta[2]]
}

/// Half-turns about the slice's own axes. The outline of a slice barely
/// changes under them, so they are the usual wrong answers.
const HALF_TURNS: [Quaternion; 3] = [
    Quaternion::new(0.0, 1.0, 0.0, 0.0),
    Quaternion::new(0.0, 0.0, 1.0, 0.0),
    Quaternion::new(0.0, 0.0, 0.0, 1.0),
];

/// Nelder-Mead from `start` with the configured simplex steps times `scale`.
fn polish(volume: &Volume, lattice: &Lattice, start: &Pose, budget: usize, scale: f64, cfg: &RegistrationConfig) -> Candidate {
    let (r, t) = (cfg.simplex_rotation_step * scale, cfg.simplex_translation_step * scale);
    let steps = [r, r, r, r, t, t, t];
    let mut buf = Vec::with_capacity(lattice.local.len());
    let nm = NelderMeadConfig {
        max_evaluations: budget,
        f_tolerance: 1e-9,
    };
    let m = nelder_mead(
        |x| -lattice.score(volume, &pose_from_params(x), &mut buf).value,
        &params_from_pose(start),
        &steps,
        &nm,
    );
    Candidate {
        pose: pose_from_params(&m.x),
        score: -m.value,
    }
}

fn grid_values(steps: usize, range: f64) -> Vec<f64> {
    if steps == 1 {
        return vec![0.0];
    }
    (0..steps)
        .map(|i| -range + 2.0 * range * i as f64 / (steps - 1) as f64)
        .collect()
}

fn near_duplicate(a: &Pose, b: &Pose) -> bool {
    rotation_angle_3d(a.q, b.q) < 15f64.to_radians() && norm3(sub3(a.delta, b.delta)) < 0.1
}

/// Highest-scoring candidates, skipping near-duplicates of ones already kept.
fn distinct_best(sorted: Vec<Candidate>, count: usize) -> Vec<Candidate> {
    let mut kept: Vec<Candidate> = Vec::with_capacity(count);
    for c in sorted {
        if kept.len() == count {
            break;
        }
        if !kept.iter().any(|k| near_duplicate(&k.pose, &c.pose)) {
            kept.push(c);
        }
    }
    kept
}

fn degenerate_result() -> RegistrationResult {
    RegistrationResult {
        pose: Pose::IDENTITY,
        score: 0.0,
        degenerate: true,
        candidates: Vec::new(),
    }
}

/// Registers `image` against `volume` with a global coarse search.
pub fn register_slice(volume: &Volume, image: &SliceImage, cfg: &RegistrationConfig) -> Result<RegistrationResult> {
    register_slice_near(volume, image, &Pose::IDENTITY, cfg)
}

/// Registers `image` searching orientations within `cfg.search_radius_deg` of
/// `prior` and translations within `cfg.translation_range` of its translation.
pub fn register_slice_near(
    volume: &Volume,
    image: &SliceImage,
    prior: &Pose,
    cfg: &RegistrationConfig,
) -> Result<RegistrationResult> {
    cfg.validate()?;
    prior.validate()?;
    let full = Lattice::new(image, 1);
    if ncc_values(&full.values, &full.values).degenerate {
        return Ok(degenerate_result());
    }
    let prior = Pose::new(prior.q.normalized().canonical(), prior.delta);
    let coarse = Lattice::new(image, cfg.coarse_stride);
    let fine = Lattice::new(image, cfg.refine_stride);

    // coarse search
    let radius = cfg.search_radius_deg.to_radians();
    let mut orientations: Vec<Quaternion> = orientation_samples(cfg.orientation_samples, cfg.orientation_seed)
        .into_iter()
        .filter(|s| rotation_angle_3d(Quaternion::IDENTITY, *s) <= radius + 1e-12)
        .map(|s| (prior.q * s).normalized())
        .collect();
    if radius < PI {
        orientations.push(prior.q);
    }
    let offsets = grid_values(cfg.translation_steps, cfg.translation_range);
    let mut translations = Vec::with_capacity(offsets.len().pow(3));
    for &dz in &offsets {
        for &dy in &offsets {
            for &dx in &offsets {
                translations.push([prior.delta[0] + dx, prior.delta[1] + dy, prior.delta[2] + dz]);
            }
        }
    }
    let mut scored: Vec<Candidate> = orientations
        .par_iter()
        .flat_map_iter(|&q| {
            let mut buf = Vec::with_capacity(coarse.local.len());
            translations
                .iter()
                .map(|&t| {
                    let pose = Pose::new(q, t);
                    let s = coarse.score(volume, &pose, &mut buf);
                    Candidate { pose, score: s.value }
                })
                .collect::<Vec<_>>()
        })
        .collect();
    scored.sort_by(|a, b| b.score.total_cmp(&a.score));

    let polish = |start: &Pose, lattice: &Lattice, budget: usize, scale: f64| {
        polish(volume, lattice, start, budget, scale, cfg)
    };

    // short polish of the best distinct coarse candidates, then full
    // refinement of the most promising ones
    let mut coarse_starts = distinct_best(scored, cfg.prerefine_candidates);
    // the leading candidates also get their half-turn twins
    let twins: Vec<Candidate> = coarse_starts
        .iter()
        .take(cfg.top_k)
        .flat_map(|c| {
            HALF_TURNS.iter().map(move |f| Candidate {
                pose: Pose::new(c.pose.q * *f, c.pose.delta),
                score: c.score,
            })
        })
        // a local search keeps to its radius
        .filter(|c| rotation_angle_3d(prior.q, c.pose.q) <= radius + 1e-9)
        .collect();
    coarse_starts.extend(twins);
    let mut polished: Vec<(Candidate, Candidate)> = coarse_starts
        .par_iter()
        .map(|c| (*c, polish(&c.pose, &coarse, cfg.prerefine_evaluations, 1.0)))
        .collect();
    polished.sort_by(|a, b| b.1.score.total_cmp(&a.1.score));
    let mut chosen: Vec<(Candidate, Candidate)> = Vec::with_capacity(cfg.top_k);
    for pair in polished {
        if chosen.len() == cfg.top_k {
            break;
        }
        if !chosen.iter().any(|(_, p)| near_duplicate(&p.pose, &pair.1.pose)) {
            chosen.push(pair);
        }
    }
    // a local search also refines straight from the prior
    if radius < PI {
        let start = Candidate { pose: prior, score: f64::NEG_INFINITY };
        chosen.push((start, start));
    }

    let outcomes: Vec<(Candidate, Candidate)> = chosen
        .par_iter()
        .map(|(start, pre)| {
            // restarts with a shrinking simplex escape premature collapse
            let mut best = polish(&pre.pose, &fine, cfg.max_evaluations / 2, 1.0);
            let mut left = cfg.max_evaluations - cfg.max_evaluations / 2;
            let mut scale = 0.5;
            while left > 0 {
                let budget = (cfg.max_evaluations / 8).clamp(1, left);
                left -= budget;
                let next = polish(&best.pose, &fine, budget, scale);
                let gain = next.score - best.score;
                if gain > 0.0 {
                    best = next;
                }
                if gain < 1e-6 {
                    scale *= 0.5;
                    if scale < 0.05 {
                        break;
                    }
                }
            }
            let refined_pose = best.pose;
            let mut buf = Vec::with_capacity(full.local.len());
            let start_full = Candidate {
                pose: start.pose,
                score: full.score(volume, &start.pose, &mut buf).value,
            };
            let refined_full = Candidate {
                pose: refined_pose,
                score: full.score(volume, &refined_pose, &mut buf).value,
            };
            (start_full, refined_full)
        })
        .collect();

    let candidates: Vec<Candidate> = outcomes.iter().map(|(s, _)| *s).collect();
    let best = outcomes
        .iter()
        .flat_map(|(s, r)| [*r, *s])
        .reduce(|best, c| if c.score > best.score { c } else { best })
        .ok_or(Error::Empty("registration candidates"))?;
    Ok(RegistrationResult {
        pose: Pose::new(best.pose.q.canonical(), best.pose.delta),
        score: best.score,
        degenerate: false,
        candidates,
    })
}

/// Pixel stride and simplex budget of the cheap sweep tracking that picks
/// the first frame's pose among its half-turn twins.
const TRACK_STRIDE: usize = 4;
const TRACK_EVALUATIONS: usize = 150;

/// Summed lattice NCC of a sweep followed from `start`, each frame polished
/// briefly from its predecessor's pose.
fn track_score(volume: &Volume, lattices: &[Lattice], start: Pose, cfg: &RegistrationConfig) -> f64 {
    let mut pose = start;
    let mut total = 0.0;
    for lattice in lattices {
        let c = polish(volume, lattice, &pose, TRACK_EVALUATIONS, 1.0, cfg);
        total += c.score;
        pose = c.pose;
    }
    total
}

/// Registers every frame of a scan: the first one globally, each later one
/// near its predecessor's pose with the temporal search settings.
///
/// A single frame can match a half-turn of itself about as well as the truth,
/// and every later frame would inherit that. So the first frame's pose and its
/// three half-turn twins are each tracked cheaply through the whole sweep, and
/// the one that explains the sweep best seeds the chain.
pub fn register_scan_frames(volume: &Volume, scan: &ScanSequence, cfg: &RegistrationConfig) -> Result<Vec<RegistrationResult>> {
    scan.validate()?;
    let temporal = cfg.temporal();
    let mut first = register_slice(volume, &scan.frames[0], cfg)?;
    if !first.degenerate && scan.len() > 1 {
        let lattices: Vec<Lattice> = scan.frames.iter().map(|f| Lattice::new(f, TRACK_STRIDE)).collect();
        let hypotheses: Vec<Pose> = std::iter::once(first.pose)
            .chain(HALF_TURNS.iter().map(|h| Pose::new((first.pose.q * *h).normalized(), first.pose.delta)))
            .collect();
        let scores: Vec<f64> = hypotheses
            .par_iter()
            .map(|h| track_score(volume, &lattices, *h, cfg))
            .collect();
        let best = (0..scores.len()).fold(0, |b, i| if scores[i] > scores[b] { i } else { b });
        if best != 0 {
            first = register_slice_near(volume, &scan.frames[0], &hypotheses[best], &temporal)?;
        }
    }
    let mut results: Vec<RegistrationResult> = Vec::with_capacity(scan.len());
    results.push(first);
    for frame in &scan.frames[1..] {
        let prev = results.last().expect("first frame pushed");
        let result = if prev.degenerate {
            register_slice(volume, frame, cfg)?
        } else {
            register_slice_near(volume, frame, &prev.pose, &temporal)?
        };
        results.push(result);
    }
    Ok(results)
}

/// Per-frame registration followed by scan-level orientation refinement.
/// Scores are re-evaluated at the refined poses.
pub fn register_scan(
    volume: &Volume,
    scan: &ScanSequence,
    sp: &StandardPlaneDef,
    cfg: &RegistrationConfig,
    contrastive: &ContrastiveConfig,
    optimizer: &OptimizerConfig,
) -> Result<Vec<RegistrationResult>> {
    let mut results = register_scan_frames(volume, scan, cfg)?;
    let init: Vec<Pose> = results.iter().map(|r| r.pose).collect();
    let refined = refine_scan_poses(scan, &init, sp, contrastive, optimizer)?;
    for ((result, pose), frame) in results.iter_mut().zip(refined.poses).zip(&scan.frames) {
        if result.degenerate {
            continue;
        }
        let score = Lattice::new(frame, 1).score(volume, &pose, &mut Vec::new());
        result.pose = Pose::new(pose.q.canonical(), pose.delta);
        result.score = score.value;
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::{generate_phantom, sample_slice};

    #[test]
    fn orientation_samples_cover_so3() {
        use rand::SeedableRng;
        let samples = orientation_samples(256, 0);
        assert_eq!(samples.len(), 256);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut total = 0.0;
        let mut worst: f64 = 0.0;
        for _ in 0..500 {
            let q = Quaternion::random(&mut rng);
            let d = samples
                .iter()
                .map(|s| rotation_angle_3d(*s, q))
                .fold(f64::INFINITY, f64::min);
            total += d;
            worst = worst.max(d);
        }
        let mean = (total / 500.0).to_degrees();
        assert!(mean < 25.0, "mean nearest-sample distance {mean}");
        assert!(worst.to_degrees() < 45.0, "covering radius {}", worst.to_degrees());
    }

    #[test]
    fn constant_image_is_degenerate() {
        let (v, _) = generate_phantom(0, [32, 32, 32]).unwrap();
        let img = SliceImage::new(40, 40, vec![0.4; 1600]).unwrap();
        let r = register_slice(&v, &img, &RegistrationConfig::default()).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.score, 0.0);
    }

    #[test]
    fn result_beats_every_coarse_candidate() {
        let (v, sps) = generate_phantom(1, [40, 40, 40]).unwrap();
        let img = sample_slice(&v, &sps[0].pose(crate::geometry::SpDirection::Pos), 64, 64);
        let cfg = RegistrationConfig {
            coarse_stride: 4,
            max_evaluations: 200,
            ..Default::default()
        };
        let r = register_slice(&v, &img, &cfg).unwrap();
        assert!(!r.degenerate);
        assert!(r.candidates.iter().all(|c| r.score >= c.score));
        assert!((r.pose.q.norm() - 1.0).abs() < 1e-12);
        let again = register_slice(&v, &img, &cfg).unwrap();
        assert_eq!(again, r);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let (v, _) = generate_phantom(0, [32, 32, 32]).unwrap();
        let img = SliceImage::new(8, 8, (0..64).map(|i| i as f64 / 64.0).collect()).unwrap();
        let cfg = RegistrationConfig {
            top_k: 0,
            ..Default::default()
        };
        assert!(register_slice(&v, &img, &cfg).is_err());
    }
}
