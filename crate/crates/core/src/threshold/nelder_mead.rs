//! Derivative-free Nelder-Mead simplex minimiser.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NmConfig {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// Stop once every vertex is within `tol` of the best one.
    pub tol: f64,
    pub max_iter: usize,
    /// Fresh simplices built around the incumbent after convergence.
    pub restarts: usize,
    /// Per-coordinate offset of the initial simplex vertices.
    pub initial_step: f64,
}

impl Default for NmConfig {
    fn default() -> Self {
        Self {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            tol: 1e-3,
            max_iter: 500,
            restarts: 2,
            initial_step: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NmResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

fn diameter(simplex: &[(Vec<f64>, f64)]) -> f64 {
    let best = &simplex[0].0;
    simplex[1..]
        .iter()
        .map(|(v, _)| v.iter().zip(best).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max)
}

fn sort(simplex: &mut [(Vec<f64>, f64)]) {
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
}

/// Minimise `f` from `x0`. Non-finite objective values count as +∞.
pub fn minimize<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], cfg: &NmConfig) -> NmResult {
    let n = x0.len();
    let mut evals = 0;
    let mut eval = |x: &[f64]| {
        evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut best = (x0.to_vec(), eval(x0));
    let mut iterations = 0;
    let mut converged = false;

    for _ in 0..=cfg.restarts {
        let mut simplex = vec![best.clone()];
        for k in 0..n {
            let mut v = best.0.clone();
            v[k] += cfg.initial_step;
            let fv = eval(&v);
            simplex.push((v, fv));
        }
        sort(&mut simplex);
        converged = false;

        while iterations < cfg.max_iter {
            if diameter(&simplex) < cfg.tol {
                converged = true;
                break;
            }
            iterations += 1;
            let centroid: Vec<f64> = (0..n)
                .map(|k| simplex[..n].iter().map(|(v, _)| v[k]).sum::<f64>() / n as f64)
                .collect();
            let toward = |coef: f64, from: &[f64]| -> Vec<f64> {
                centroid.iter().zip(from).map(|(c, w)| c + coef * (c - w)).collect()
            };
            let worst = simplex[n].clone();
            let xr = toward(cfg.reflection, &worst.0);
            let fr = eval(&xr);

            if fr < simplex[0].1 {
                let xe = toward(cfg.reflection * cfg.expansion, &worst.0);
                let fe = eval(&xe);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
            } else {
                let (xc, fc) = if fr < worst.1 {
                    let xc = toward(cfg.reflection * cfg.contraction, &worst.0);
                    let fc = eval(&xc);
                    (xc, fc)
                } else {
                    let xc = toward(-cfg.contraction, &worst.0);
                    let fc = eval(&xc);
                    (xc, fc)
                };
                if fc < fr.min(worst.1) {
                    simplex[n] = (xc, fc);
                } else {
                    let b = simplex[0].0.clone();
                    for (v, fv) in simplex.iter_mut().skip(1) {
                        for (vk, bk) in v.iter_mut().zip(&b) {
                            *vk = bk + cfg.shrink * (*vk - bk);
                        }
                        *fv = eval(v);
                    }
                }
            }
            sort(&mut simplex);
        }
        if simplex[0].1 <= best.1 {
            best = simplex[0].clone();
        }
        if iterations >= cfg.max_iter {
            break;
        }
    }

    NmResult {
        x: best.0,
        fx: best.1,
        iterations,
        evaluations: evals,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let r = minimize(
            |x| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2),
            &[0.0, 0.0],
            &NmConfig {
                tol: 1e-8,
                max_iter: 2000,
                ..Default::default()
            },
        );
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] + 2.0).abs() < 1e-6, "{:?}", r.x);
    }

    #[test]
    fn rosenbrock() {
        let r = minimize(
            |x| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2),
            &[-1.2, 1.0],
            &NmConfig {
                tol: 1e-9,
                max_iter: 5000,
                initial_step: 0.5,
                ..Default::default()
            },
        );
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] - 1.0).abs() < 1e-4, "{:?}", r.x);
    }

    #[test]
    fn infinite_region_avoided() {
        let r = minimize(
            |x| if x[0] < 0.5 { f64::INFINITY } else { x[0] },
            &[2.0],
            &NmConfig {
                tol: 1e-9,
                max_iter: 1000,
                ..Default::default()
            },
        );
        assert!((r.x[0] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn iteration_cap_respected() {
        let r = minimize(|x| x[0].powi(2), &[100.0], &NmConfig {
            max_iter: 3,
            tol: 0.0,
            ..Default::default()
        });
        assert_eq!(r.iterations, 3);
        assert!(!r.converged);
    }
}
