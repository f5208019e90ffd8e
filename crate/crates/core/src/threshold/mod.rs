//! False-positive estimation by importance sampling and minimum-area
//! threshold search.

pub mod nelder_mead;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ellipse::ThresholdEllipse;
use crate::nominal::{cholesky2, quantize, NominalModel};

pub use nelder_mead::{minimize, NmConfig, NmResult};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ThresholdError {
    #[error("degenerate proposal distribution: {0}")]
    DegenerateProposal(String),
    #[error("invalid falsification config: {0}")]
    InvalidConfig(String),
    #[error("no threshold up to 3x the starting size reaches p_hat <= {target:e} (best {best:e})")]
    NoFeasiblePoint { target: f64, best: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FalsificationConfig {
    pub rollouts: usize,
    /// Proposal covariance is the model covariance times this squared.
    pub proposal_scale: f64,
    pub target_fpr: f64,
    pub seed: u64,
    /// Snap samples to their grid-cell centre before testing the threshold.
    pub quantize: bool,
}

impl Default for FalsificationConfig {
    fn default() -> Self {
        Self {
            rollouts: 100_000,
            proposal_scale: 3.0,
            target_fpr: 1e-6,
            seed: 0,
            quantize: true,
        }
    }
}

pub const MIN_ROLLOUTS: usize = 10_000;

impl FalsificationConfig {
    pub fn validate(&self) -> Result<(), ThresholdError> {
        if self.rollouts < MIN_ROLLOUTS {
            return Err(ThresholdError::InvalidConfig(format!(
                "rollouts {} below {MIN_ROLLOUTS}",
                self.rollouts
            )));
        }
        if !(self.target_fpr > 0.0 && self.target_fpr < 1.0) {
            return Err(ThresholdError::InvalidConfig(format!(
                "target_fpr {} outside (0, 1)",
                self.target_fpr
            )));
        }
        if !(self.proposal_scale >= 1.0) || !self.proposal_scale.is_finite() {
            return Err(ThresholdError::DegenerateProposal(format!(
                "proposal_scale {} must be finite and >= 1",
                self.proposal_scale
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FprEstimate {
    pub p_hat: f64,
    pub std_err: f64,
    pub rollouts_used: usize,
}

/// Weighted proposal draws shared by every estimate made with one config.
#[derive(Debug, Clone)]
pub struct RolloutSet {
    points: Vec<(f64, f64)>,
    weights: Vec<f64>,
}

impl RolloutSet {
    /// Samples come from `N(mean, s² Σ)`; each sample carries the weight
    /// `p/q = s² exp(-d²/2 · (1 - 1/s²))` with `d` its Mahalanobis radius
    /// under the model. One generator, seeded from `cfg.seed`, per call.
    pub fn draw(model: &NominalModel, cfg: &FalsificationConfig) -> Result<Self, ThresholdError> {
        cfg.validate()?;
        let l = cholesky2(&model.covariance)
            .ok_or_else(|| ThresholdError::DegenerateProposal("covariance not positive definite".into()))?;
        let s = cfg.proposal_scale;
        let s2 = s * s;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let m = cfg.rollouts;
        let mut points = Vec::with_capacity(m);
        let mut weights = Vec::with_capacity(m);
        for _ in 0..m {
            let z0: f64 = StandardNormal.sample(&mut rng);
            let z1: f64 = StandardNormal.sample(&mut rng);
            let x = model.mean[0] + s * l[0][0] * z0;
            let y = model.mean[1] + s * (l[1][0] * z0 + l[1][1] * z1);
            points.push(if cfg.quantize { quantize(x, y) } else { (x, y) });
            weights.push(if s == 1.0 {
                1.0
            } else {
                let d2 = z0 * z0 + z1 * z1;
                s2 * (-0.5 * d2 * s2 * (1.0 - 1.0 / s2)).exp()
            });
        }
        Ok(Self { points, weights })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn estimate(&self, ellipse: &ThresholdEllipse) -> FprEstimate {
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for (&(x, y), &w) in self.points.iter().zip(&self.weights) {
            if !ellipse.contains(x, y) {
                sum += w;
                sum_sq += w * w;
            }
        }
        let mf = self.len() as f64;
        let p_hat = sum / mf;
        let var = ((sum_sq - mf * p_hat * p_hat) / (mf - 1.0)).max(0.0);
        FprEstimate {
            p_hat,
            std_err: (var / mf).sqrt(),
            rollouts_used: self.len(),
        }
    }

    /// Smallest factor `k` such that `ellipse.scaled(k)` has `p_hat <= target`.
    pub fn critical_scale(&self, ellipse: &ThresholdEllipse, target: f64) -> f64 {
        let mut by_dist: Vec<(f64, f64)> = self
            .points
            .iter()
            .zip(&self.weights)
            .map(|(&(x, y), &w)| (ellipse.norm_dist2(x, y).sqrt(), w))
            .collect();
        by_dist.sort_by(|a, b| b.0.total_cmp(&a.0));
        let budget = target * self.len() as f64;
        let mut acc = 0.0;
        for &(d, w) in &by_dist {
            acc += w;
            if acc > budget {
                // this sample must stay inside; nudge for rounding in `contains`
                return d * (1.0 + 1e-9);
            }
        }
        0.0
    }
}

/// Importance-sampled probability that a nominal epoch falls outside
/// `ellipse`. See [`RolloutSet::draw`] for the sampling scheme.
pub fn estimate_fpr(
    model: &NominalModel,
    ellipse: &ThresholdEllipse,
    cfg: &FalsificationConfig,
) -> Result<FprEstimate, ThresholdError> {
    Ok(RolloutSet::draw(model, cfg)?.estimate(ellipse))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerReport {
    pub ellipse: ThresholdEllipse,
    pub achieved_fpr: FprEstimate,
    pub area: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub objective: f64,
    /// Growth applied to the Mahalanobis start ellipse to make it feasible.
    pub start_scale: f64,
}

const OVER_WEIGHT: f64 = 1e6;
const UNDER_WEIGHT: f64 = 1e2;
const MAX_START_GROWTH: f64 = 3.0;

/// Objective value: area plus asymmetric relative penalties around the
/// target, both scaled by `area_scale`.
pub fn penalised_objective(area: f64, p_hat: f64, target: f64, area_scale: f64) -> f64 {
    area + OVER_WEIGHT * area_scale * (p_hat - target).max(0.0) / target
        + UNDER_WEIGHT * area_scale * (target - p_hat).max(0.0) / target
}

/// Smallest ellipse whose estimated false-positive rate meets the target.
///
/// Search runs over five normalised coordinates: the centre shift in units
/// of the model standard deviations, a size factor, an aspect factor and the
/// rotation offset. The size factor is relative to the critical scale of the
/// candidate shape, the size at which `p_hat` first drops to the target, so
/// the feasibility boundary sits at 1 whatever the other coordinates are.
/// Every candidate is scored on the same draws.
pub fn optimize_threshold(
    model: &NominalModel,
    cfg: &FalsificationConfig,
    nm: &NmConfig,
) -> Result<OptimizerReport, ThresholdError> {
    let t = cfg.target_fpr;
    let draws = RolloutSet::draw(model, cfg)?;
    let r0 = (-2.0 * t.ln()).sqrt();
    let base = ThresholdEllipse::mahalanobis(model, r0)
        .map_err(|e| ThresholdError::DegenerateProposal(e.to_string()))?;
    let area_scale = base.area();

    let mut scale = 1.0;
    let start = loop {
        let e = base.scaled(scale);
        let est = draws.estimate(&e);
        if est.p_hat <= t {
            break e;
        }
        if scale * 1.1 > MAX_START_GROWTH + 1e-12 {
            return Err(ThresholdError::NoFeasiblePoint { target: t, best: est.p_hat });
        }
        scale *= 1.1;
    };

    let (sx, sy) = model.std_devs();
    let build = |v: &[f64]| {
        let shape = ThresholdEllipse::new(
            [model.mean[0] + v[0] * sx, model.mean[1] + v[1] * sy],
            [start.semi_axes[0] * v[3], start.semi_axes[1] / v[3]],
            start.rotation + v[4],
        )?;
        let k = draws.critical_scale(&shape, t);
        ThresholdEllipse::new(shape.center, [shape.semi_axes[0] * k * v[2], shape.semi_axes[1] * k * v[2]], shape.rotation)
    };
    let objective = |v: &[f64]| match build(v) {
        Ok(e) => penalised_objective(e.area(), draws.estimate(&e).p_hat, t, area_scale),
        Err(_) => f64::INFINITY,
    };
    let res = minimize(objective, &[0.0, 0.0, 1.0, 1.0, 0.0], nm);
    let ellipse = build(&res.x).expect("best vertex has finite objective");
    let achieved = draws.estimate(&ellipse);
    Ok(OptimizerReport {
        area: ellipse.area(),
        ellipse,
        achieved_fpr: achieved,
        iterations: res.iterations,
        evaluations: res.evaluations,
        converged: res.converged,
        objective: res.fx,
        start_scale: scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn std_model() -> NominalModel {
        NominalModel::from_params([0.0, 0.0], [[1.0, 0.0], [0.0, 1.0]]).unwrap()
    }

    fn cont(m: usize, s: f64, seed: u64) -> FalsificationConfig {
        FalsificationConfig {
            rollouts: m,
            proposal_scale: s,
            target_fpr: 1e-2,
            seed,
            quantize: false,
        }
    }

    #[test]
    fn unit_scale_is_plain_fraction() {
        let model = std_model();
        let e = ThresholdEllipse::circle([0.0, 0.0], 1.5).unwrap();
        let cfg = cont(20_000, 1.0, 11);
        let est = estimate_fpr(&model, &e, &cfg).unwrap();
        // replay the same stream of draws
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut out = 0usize;
        for _ in 0..20_000 {
            let z0: f64 = StandardNormal.sample(&mut rng);
            let z1: f64 = StandardNormal.sample(&mut rng);
            out += !e.contains(z0, z1) as usize;
        }
        assert_eq!(est.p_hat, out as f64 / 20_000.0);
    }

    #[test]
    fn circular_tail_oracle() {
        let model = std_model();
        let r: f64 = 3.0349;
        let e = ThresholdEllipse::circle([0.0, 0.0], r).unwrap();
        let est = estimate_fpr(&model, &e, &cont(100_000, 3.0, 5)).unwrap();
        let truth = (-r * r / 2.0).exp();
        assert!((est.p_hat - truth).abs() < 3.0 * est.std_err, "{est:?} vs {truth}");
    }

    #[test]
    fn tiny_ellipse_fails_everything() {
        let model = std_model();
        let e = ThresholdEllipse::circle([0.0, 0.0], 1e-6).unwrap();
        let est = estimate_fpr(&model, &e, &cont(10_000, 1.0, 1)).unwrap();
        assert_eq!(est.p_hat, 1.0);
    }

    #[test]
    fn deterministic_and_validated() {
        let model = std_model();
        let e = ThresholdEllipse::circle([0.0, 0.0], 2.0).unwrap();
        let a = estimate_fpr(&model, &e, &cont(10_000, 2.0, 9)).unwrap();
        let b = estimate_fpr(&model, &e, &cont(10_000, 2.0, 9)).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            estimate_fpr(&model, &e, &cont(10_000, 0.5, 9)),
            Err(ThresholdError::DegenerateProposal(_))
        ));
        assert!(matches!(
            estimate_fpr(&model, &e, &cont(100, 2.0, 9)),
            Err(ThresholdError::InvalidConfig(_))
        ));
    }

    #[test]
    fn quantised_estimate_uses_cell_centres() {
        // every sample in the centre cell of a grid-aligned model maps to (0.5, 0.5)
        let model = NominalModel::from_params([0.5, 0.5], [[1e-4, 0.0], [0.0, 1e-4]]).unwrap();
        let e = ThresholdEllipse::circle([0.5, 0.5], 0.01).unwrap();
        let cfg = FalsificationConfig {
            quantize: true,
            ..cont(10_000, 1.0, 3)
        };
        assert_eq!(estimate_fpr(&model, &e, &cfg).unwrap().p_hat, 0.0);
        let raw = estimate_fpr(&model, &e, &cont(10_000, 1.0, 3)).unwrap();
        assert!(raw.p_hat > 0.5);
    }

    #[test]
    fn objective_penalties() {
        assert_eq!(penalised_objective(10.0, 0.01, 0.01, 5.0), 10.0);
        assert!((penalised_objective(10.0, 0.02, 0.01, 5.0) - (10.0 + 5e6)).abs() < 1e-6);
        assert!((penalised_objective(10.0, 0.0, 0.01, 5.0) - (10.0 + 500.0)).abs() < 1e-9);
    }

    #[test]
    fn optimiser_half_target() {
        let model = std_model();
        let cfg = FalsificationConfig {
            rollouts: 20_000,
            proposal_scale: 1.0,
            target_fpr: 0.5,
            seed: 4,
            quantize: false,
        };
        let rep = optimize_threshold(&model, &cfg, &NmConfig::default()).unwrap();
        let r = (rep.ellipse.semi_axes[0] * rep.ellipse.semi_axes[1]).sqrt();
        assert!((r - (2.0 * 2f64.ln()).sqrt()).abs() / 1.177 < 0.05, "{rep:?}");
    }
}
