//! Temperature calibration curve.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::CalibrationError;

/// Polynomial with ascending coefficients.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial(pub Vec<f64>);

impl Polynomial {
    pub fn zero() -> Self {
        Self(vec![0.0])
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TempCurveFit {
    pub curve: Polynomial,
    pub residual_rms: f64,
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Least-squares fit of a dB offset against temperature in Kelvin.
///
/// Fitting runs on a centred, scaled variable and is expanded back to raw
/// Kelvin coefficients afterwards.
pub fn fit_temp_curve(samples: &[(f64, f64)], degree: usize) -> Result<TempCurveFit, CalibrationError> {
    let terms = degree + 1;
    if samples.len() < terms {
        return Err(CalibrationError::Underdetermined {
            samples: samples.len(),
            degree,
        });
    }
    let mut temps: Vec<f64> = samples.iter().map(|s| s.0).collect();
    temps.sort_by(f64::total_cmp);
    temps.dedup();
    if temps.len() < terms {
        return Err(CalibrationError::DegenerateTemps {
            distinct: temps.len(),
            degree,
        });
    }
    let n = samples.len();
    let center = samples.iter().map(|s| s.0).sum::<f64>() / n as f64;
    let scale = samples
        .iter()
        .map(|s| (s.0 - center).abs())
        .fold(0.0, f64::max)
        .max(1.0);

    let design = DMatrix::from_fn(n, terms, |r, c| ((samples[r].0 - center) / scale).powi(c as i32));
    let rhs = DVector::from_iterator(n, samples.iter().map(|s| s.1));
    let svd = design.clone().svd(true, true);
    let q = svd
        .solve(&rhs, 1e-12)
        .map_err(|e| CalibrationError::InvalidConfig(e.to_string()))?;

    // p(T) = Σ_k q_k ((T - c)/s)^k, expanded in powers of T
    let mut coeffs = vec![0.0; terms];
    for (k, qk) in q.iter().enumerate() {
        let sk = qk / scale.powi(k as i32);
        for (j, coeff) in coeffs.iter_mut().enumerate().take(k + 1) {
            *coeff += sk * binomial(k, j) * (-center).powi((k - j) as i32);
        }
    }
    let curve = Polynomial(coeffs);
    let residual_rms = (samples
        .iter()
        .map(|&(t, v)| (curve.eval(t) - v).powi(2))
        .sum::<f64>()
        / n as f64)
        .sqrt();
    Ok(TempCurveFit { curve, residual_rms })
}
