//! Scan-level pose alignment: an in-plane geodesic anchor on the standard
//! plane frame plus a semantic-weighted contrastive term over the sweep.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{geodesic_loss, Pose, Quaternion, SpDirection, SpId, StandardPlaneDef};
use crate::similarity::{semantic_descriptor, semantic_similarity, SemanticDescriptor};
use crate::volume::SliceImage;

pub const DEFAULT_FRAME_RATE_HZ: f64 = 6.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ScanSequence {
    pub frames: Vec<SliceImage>,
    pub sp_index: usize,
    pub sp_id: SpId,
    /// Probe orientation per frame, when known.
    pub probe_q: Option<Vec<Quaternion>>,
    pub frame_rate_hz: f64,
}

impl ScanSequence {
    pub fn new(frames: Vec<SliceImage>, sp_index: usize, sp_id: SpId) -> Result<Self> {
        let scan = ScanSequence {
            frames,
            sp_index,
            sp_id,
            probe_q: None,
            frame_rate_hz: DEFAULT_FRAME_RATE_HZ,
        };
        scan.validate()?;
        Ok(scan)
    }

    pub fn with_probe(mut self, probe_q: Vec<Quaternion>) -> Result<Self> {
        self.probe_q = Some(probe_q);
        self.validate()?;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames.is_empty() {
            return Err(Error::Empty("scan frames"));
        }
        if self.sp_index >= self.frames.len() {
            return Err(Error::InvalidArgument(format!(
                "sp_index {} outside a scan of {} frames",
                self.sp_index,
                self.frames.len()
            )));
        }
        if let Some(q) = &self.probe_q {
            if q.len() != self.frames.len() {
                return Err(Error::InvalidArgument(format!(
                    "{} probe orientations for {} frames",
                    q.len(),
                    self.frames.len()
                )));
            }
        }
        if !(self.frame_rate_hz > 0.0) {
            return Err(Error::InvalidArgument("frame rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContrastiveConfig {
    pub num_negatives: usize,
    pub temperature: f64,
    pub rng_seed: u64,
}

impl Default for ContrastiveConfig {
    fn default() -> Self {
        ContrastiveConfig {
            num_negatives: 5,
            temperature: 0.8,
            rng_seed: 0,
        }
    }
}

impl ContrastiveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_negatives == 0 {
            return Err(Error::InvalidArgument("at least one negative is required".into()));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::InvalidArgument("temperature must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub max_iterations: usize,
    /// Central-difference step on each axis-angle component, radians.
    pub fd_step: f64,
    /// Stop when the objective improved by less than `min_relative_improvement`
    /// (relative) over this many iterations.
    pub patience: usize,
    pub min_relative_improvement: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            learning_rate: 0.05,
            max_iterations: 200,
            fd_step: 1e-3,
            patience: 10,
            min_relative_improvement: 1e-6,
        }
    }
}

/// Geodesic distance from `q_hat` to the nearer of the plane's two directions.
pub fn in_plane_loss(q_hat: Quaternion, sp: &StandardPlaneDef) -> f64 {
    geodesic_loss(sp.orientation(SpDirection::Pos), q_hat).min(geodesic_loss(sp.orientation(SpDirection::Neg), q_hat))
}

/// `-cos(d+)/tau + ln sum_n w_n exp(cos(d_n)/tau)` for geodesic distances `d`
/// and negative weights `w_n`, given as `(weight, distance)` pairs.
pub fn contrastive_loss(positive_distance: f64, negatives: &[(f64, f64)], temperature: f64) -> f64 {
    let logits: Vec<f64> = negatives
        .iter()
        .map(|&(w, d)| w.ln() + d.cos() / temperature)
        .collect();
    let peak = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = peak + logits.iter().map(|l| (l - peak).exp()).sum::<f64>().ln();
    -positive_distance.cos() / temperature + lse
}

/// Consecutive partner of `anchor`: the next frame, or the previous one for the last frame.
pub fn positive_index(anchor: usize, len: usize) -> usize {
    if anchor + 1 < len {
        anchor + 1
    } else {
        anchor.saturating_sub(1)
    }
}

/// Frames a contrastive term needs: anchor, positive, negatives and the
/// excluded standard plane frame.
pub fn required_frames(cfg: &ContrastiveConfig) -> usize {
    cfg.num_negatives + 3
}

/// Negatives for `anchor`, drawn without replacement from every frame other
/// than the anchor, its positive and `exclude`. The draw depends only on the
/// seed, the anchor and the scan length, so it can be replayed.
pub fn negative_indices(anchor: usize, len: usize, exclude: Option<usize>, cfg: &ContrastiveConfig) -> Result<Vec<usize>> {
    cfg.validate()?;
    if anchor >= len {
        return Err(Error::InvalidArgument(format!("anchor {anchor} outside a scan of {len} frames")));
    }
    let positive = positive_index(anchor, len);
    let pool: Vec<usize> = (0..len)
        .filter(|&i| i != anchor && i != positive && Some(i) != exclude)
        .collect();
    if pool.len() < cfg.num_negatives || positive == anchor {
        return Err(Error::ScanTooShort {
            frames: len,
            required: cfg.num_negatives + 2 + usize::from(exclude.is_some()),
        });
    }
    let seed = cfg.rng_seed ^ (anchor as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = rand::seq::index::sample(&mut rng, pool.len(), cfg.num_negatives);
    Ok(picked.into_iter().map(|i| pool[i]).collect())
}

/// Contrastive loss of one anchor over the scan's current orientations.
pub fn out_of_plane_loss(
    anchor: usize,
    poses: &[Quaternion],
    descriptors: &[SemanticDescriptor],
    exclude: Option<usize>,
    cfg: &ContrastiveConfig,
) -> Result<f64> {
    if poses.len() != descriptors.len() {
        return Err(Error::InvalidArgument(format!(
            "{} poses for {} descriptors",
            poses.len(),
            descriptors.len()
        )));
    }
    let negatives = negative_indices(anchor, poses.len(), exclude, cfg)?;
    let term = ContrastiveTerm::new(anchor, negatives, poses.len(), descriptors);
    Ok(term.loss(poses, cfg.temperature))
}

struct ContrastiveTerm {
    anchor: usize,
    positive: usize,
    negatives: Vec<(usize, f64)>,
}

impl ContrastiveTerm {
    fn new(anchor: usize, negatives: Vec<usize>, len: usize, descriptors: &[SemanticDescriptor]) -> Self {
        let negatives = negatives
            .into_iter()
            .map(|n| (n, semantic_similarity(&descriptors[anchor], &descriptors[n])))
            .collect();
        ContrastiveTerm {
            anchor,
            positive: positive_index(anchor, len),
            negatives,
        }
    }

    fn loss(&self, q: &[Quaternion], temperature: f64) -> f64 {
        let a = q[self.anchor];
        let negatives: Vec<(f64, f64)> = self
            .negatives
            .iter()
            .map(|&(n, w)| (w, geodesic_loss(a, q[n])))
            .collect();
        contrastive_loss(geodesic_loss(a, q[self.positive]), &negatives, temperature)
    }
}

/// The scan objective with descriptors and negative draws fixed, so it can be
/// evaluated repeatedly on candidate orientations.
pub struct ScanObjective {
    sp: StandardPlaneDef,
    sp_index: usize,
    len: usize,
    temperature: f64,
    terms: Vec<ContrastiveTerm>,
    /// Indices of the terms that read each frame's orientation.
    terms_of: Vec<Vec<usize>>,
}

impl ScanObjective {
    pub fn new(scan: &ScanSequence, sp: &StandardPlaneDef, cfg: &ContrastiveConfig) -> Result<Self> {
        scan.validate()?;
        cfg.validate()?;
        sp.validate()?;
        let mut terms = Vec::new();
        // scans too short for a full set of negatives keep only the anchor term
        if scan.len() >= required_frames(cfg) {
            let descriptors = scan
                .frames
                .iter()
                .map(semantic_descriptor)
                .collect::<Result<Vec<_>>>()?;
            for anchor in (0..scan.len()).filter(|&i| i != scan.sp_index) {
                let negatives = negative_indices(anchor, scan.len(), Some(scan.sp_index), cfg)?;
                terms.push(ContrastiveTerm::new(anchor, negatives, scan.len(), &descriptors));
            }
        }
        let mut terms_of = vec![Vec::new(); scan.len()];
        for (t, term) in terms.iter().enumerate() {
            let mut frames: Vec<usize> = term.negatives.iter().map(|&(n, _)| n).collect();
            frames.extend([term.anchor, term.positive]);
            frames.sort_unstable();
            frames.dedup();
            for f in frames {
                terms_of[f].push(t);
            }
        }
        Ok(ScanObjective {
            sp: *sp,
            sp_index: scan.sp_index,
            len: scan.len(),
            temperature: cfg.temperature,
            terms,
            terms_of,
        })
    }

    /// Number of contrastive terms averaged into the objective.
    pub fn out_of_plane_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn evaluate(&self, q: &[Quaternion]) -> Result<f64> {
        if q.len() != self.len {
            return Err(Error::InvalidArgument(format!("{} orientations for {} frames", q.len(), self.len)));
        }
        Ok(self.evaluate_unchecked(q))
    }

    fn evaluate_unchecked(&self, q: &[Quaternion]) -> f64 {
        let anchor = in_plane_loss(q[self.sp_index], &self.sp);
        if self.terms.is_empty() {
            return anchor;
        }
        let sum: f64 = self.terms.iter().map(|t| t.loss(q, self.temperature)).sum();
        anchor + sum / self.terms.len() as f64
    }

    /// The part of the objective that depends on frame `i`.
    fn local(&self, i: usize, q: &[Quaternion]) -> f64 {
        let mut value = 0.0;
        if !self.terms.is_empty() {
            let sum: f64 = self.terms_of[i].iter().map(|&t| self.terms[t].loss(q, self.temperature)).sum();
            value = sum / self.terms.len() as f64;
        }
        if i == self.sp_index {
            value += in_plane_loss(q[i], &self.sp);
        }
        value
    }
}

pub fn scan_objective(scan: &ScanSequence, poses: &[Pose], sp: &StandardPlaneDef, cfg: &ContrastiveConfig) -> Result<f64> {
    let q: Vec<Quaternion> = poses.iter().map(|p| p.q).collect();
    ScanObjective::new(scan, sp, cfg)?.evaluate(&q)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub poses: Vec<Pose>,
    pub initial_objective: f64,
    pub final_objective: f64,
    pub iterations: usize,
}

/// Descends the scan objective over the frame orientations by finite-difference
/// axis-angle steps. Translations are kept; a step is taken only if it lowers
/// the objective, halving the rate up to a few times otherwise.
pub fn refine_scan_poses(
    scan: &ScanSequence,
    init: &[Pose],
    sp: &StandardPlaneDef,
    cfg: &ContrastiveConfig,
    opt: &OptimizerConfig,
) -> Result<Refinement> {
    if init.len() != scan.len() {
        return Err(Error::InvalidArgument(format!("{} poses for {} frames", init.len(), scan.len())));
    }
    for p in init {
        p.validate()?;
    }
    if !(opt.learning_rate > 0.0 && opt.fd_step > 0.0) {
        return Err(Error::InvalidArgument("learning rate and step must be positive".into()));
    }
    let objective = ScanObjective::new(scan, sp, cfg)?;
    let mut q: Vec<Quaternion> = init.iter().map(|p| p.q).collect();
    let initial = objective.evaluate_unchecked(&q);
    let mut current = initial;
    let mut history = vec![current];
    let mut iterations = 0;
    let h = opt.fd_step;

    while iterations < opt.max_iterations {
        iterations += 1;
        let mut grad = vec![[0.0; 3]; q.len()];
        let mut probe = q.clone();
        for (i, g) in grad.iter_mut().enumerate() {
            for (k, gk) in g.iter_mut().enumerate() {
                let mut e = [0.0; 3];
                e[k] = h;
                probe[i] = q[i] * Quaternion::from_rotation_vector(e);
                let plus = objective.local(i, &probe);
                e[k] = -h;
                probe[i] = q[i] * Quaternion::from_rotation_vector(e);
                let minus = objective.local(i, &probe);
                probe[i] = q[i];
                *gk = (plus - minus) / (2.0 * h);
            }
        }

        let mut rate = opt.learning_rate;
        let mut accepted = None;
        for _ in 0..6 {
            let candidate: Vec<Quaternion> = q
                .iter()
                .zip(&grad)
                .map(|(qi, g)| (*qi * Quaternion::from_rotation_vector([-rate * g[0], -rate * g[1], -rate * g[2]])).normalized())
                .collect();
            let value = objective.evaluate_unchecked(&candidate);
            if value < current {
                accepted = Some((candidate, value));
                break;
            }
            rate *= 0.5;
        }
        let Some((next, value)) = accepted else {
            break;
        };
        q = next;
        current = value;
        history.push(current);
        if history.len() > opt.patience {
            let before = history[history.len() - 1 - opt.patience];
            if (before - current) <= opt.min_relative_improvement * before.abs().max(f64::MIN_POSITIVE) {
                break;
            }
        }
    }

    let poses = init
        .iter()
        .zip(&q)
        .map(|(p, qi)| Pose::new(*qi, p.delta))
        .collect();
    Ok(Refinement {
        poses,
        initial_objective: initial,
        final_objective: current,
        iterations,
    })
}
