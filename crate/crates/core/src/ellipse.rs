//! Elliptical detection threshold in the (rx_power, cn0) plane.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nominal::NominalModel;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EllipseError {
    #[error("semi-axes must be finite and positive, got ({0}, {1})")]
    BadAxes(f64, f64),
    #[error("non-finite ellipse parameter")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEllipse {
    pub center: [f64; 2],
    /// First axis lies along `rotation`, second perpendicular to it.
    pub semi_axes: [f64; 2],
    /// Radians in [-π/2, π/2).
    pub rotation: f64,
}

/// Wrap an axis angle into [-π/2, π/2); an ellipse is symmetric under π.
pub fn wrap_rotation(theta: f64) -> f64 {
    let w = (theta + FRAC_PI_2).rem_euclid(PI) - FRAC_PI_2;
    if w >= FRAC_PI_2 {
        -FRAC_PI_2
    } else {
        w
    }
}

impl ThresholdEllipse {
    pub fn new(center: [f64; 2], semi_axes: [f64; 2], rotation: f64) -> Result<Self, EllipseError> {
        if !(center.iter().all(|c| c.is_finite()) && rotation.is_finite()) {
            return Err(EllipseError::NonFinite);
        }
        let [a, b] = semi_axes;
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(EllipseError::BadAxes(a, b));
        }
        Ok(Self {
            center,
            semi_axes,
            rotation: wrap_rotation(rotation),
        })
    }

    pub fn circle(center: [f64; 2], r: f64) -> Result<Self, EllipseError> {
        Self::new(center, [r, r], 0.0)
    }

    /// Level set of the model's Mahalanobis distance at radius `r`.
    pub fn mahalanobis(model: &NominalModel, r: f64) -> Result<Self, EllipseError> {
        let c = &model.covariance;
        let half_tr = (c[0][0] + c[1][1]) / 2.0;
        let disc = (((c[0][0] - c[1][1]) / 2.0).powi(2) + c[0][1] * c[0][1]).sqrt();
        let (l1, l2) = (half_tr + disc, (half_tr - disc).max(0.0));
        let theta = 0.5 * (2.0 * c[0][1]).atan2(c[0][0] - c[1][1]);
        Self::new(model.mean, [r * l1.sqrt(), r * l2.sqrt()], theta)
    }

    pub fn area(&self) -> f64 {
        PI * self.semi_axes[0] * self.semi_axes[1]
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            semi_axes: [self.semi_axes[0] * k, self.semi_axes[1] * k],
            ..*self
        }
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            center: [self.center[0] + dx, self.center[1] + dy],
            ..*self
        }
    }

    /// `R diag(a², b²) Rᵀ`
    pub fn shape_matrix(&self) -> [[f64; 2]; 2] {
        let (s, c) = self.rotation.sin_cos();
        let (a2, b2) = (self.semi_axes[0].powi(2), self.semi_axes[1].powi(2));
        [
            [c * c * a2 + s * s * b2, c * s * (a2 - b2)],
            [c * s * (a2 - b2), s * s * a2 + c * c * b2],
        ]
    }

    fn inv_shape(&self) -> [[f64; 2]; 2] {
        let (s, c) = self.rotation.sin_cos();
        let (ia, ib) = (self.semi_axes[0].powi(-2), self.semi_axes[1].powi(-2));
        [
            [c * c * ia + s * s * ib, c * s * (ia - ib)],
            [c * s * (ia - ib), s * s * ia + c * c * ib],
        ]
    }

    /// Squared normalised radius; ≤ 1 inside.
    pub fn norm_dist2(&self, x: f64, y: f64) -> f64 {
        let (s, c) = self.rotation.sin_cos();
        let dx = x - self.center[0];
        let dy = y - self.center[1];
        let u = (c * dx + s * dy) / self.semi_axes[0];
        let v = (-s * dx + c * dy) / self.semi_axes[1];
        u * u + v * v
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.norm_dist2(x, y) <= 1.0
    }

    /// Half-widths of the axis-aligned bounding box.
    pub fn extent(&self) -> (f64, f64) {
        let m = self.shape_matrix();
        (m[0][0].sqrt(), m[1][1].sqrt())
    }

    /// Boundary point maximising `w · p`.
    pub fn support_point(&self, w: [f64; 2]) -> [f64; 2] {
        let m = self.shape_matrix();
        let mw = [m[0][0] * w[0] + m[0][1] * w[1], m[1][0] * w[0] + m[1][1] * w[1]];
        let norm = (w[0] * mw[0] + w[1] * mw[1]).sqrt();
        [self.center[0] + mw[0] / norm, self.center[1] + mw[1] / norm]
    }

    /// cn0 interval of the ellipse at a given rx_power, if the vertical
    /// line meets it.
    pub fn y_range_at(&self, x: f64) -> Option<(f64, f64)> {
        let m = self.inv_shape();
        let dx = x - self.center[0];
        let (p, q, r) = (m[0][0], m[0][1], m[1][1]);
        let disc = q * q * dx * dx - r * (p * dx * dx - 1.0);
        if disc < 0.0 {
            return None;
        }
        let root = disc.sqrt();
        Some((
            self.center[1] + (-q * dx - root) / r,
            self.center[1] + (-q * dx + root) / r,
        ))
    }

    /// Parameter `t ≥ 0` at which `origin + t·dir` leaves the ellipse, for an
    /// origin inside it.
    pub fn ray_exit(&self, origin: [f64; 2], dir: [f64; 2]) -> Option<f64> {
        let m = self.inv_shape();
        let o = [origin[0] - self.center[0], origin[1] - self.center[1]];
        let quad = |u: [f64; 2], v: [f64; 2]| {
            u[0] * (m[0][0] * v[0] + m[0][1] * v[1]) + u[1] * (m[1][0] * v[0] + m[1][1] * v[1])
        };
        let a = quad(dir, dir);
        let b = 2.0 * quad(dir, o);
        let c = quad(o, o) - 1.0;
        if a <= 0.0 || c > 0.0 {
            return None;
        }
        let disc = b * b - 4.0 * a * c;
        Some((-b + disc.sqrt()) / (2.0 * a))
    }

    /// Euclidean distance from a point to the ellipse curve.
    pub fn boundary_distance(&self, x: f64, y: f64) -> f64 {
        let (s, c) = self.rotation.sin_cos();
        let dx = x - self.center[0];
        let dy = y - self.center[1];
        let u = (c * dx + s * dy).abs();
        let v = (-s * dx + c * dy).abs();
        let [a, b] = self.semi_axes;
        if a >= b {
            dist_canonical(a, b, u, v)
        } else {
            dist_canonical(b, a, v, u)
        }
    }
}

// Distance from (y0, y1), first quadrant, to the ellipse with axes e0 ≥ e1.
fn dist_canonical(e0: f64, e1: f64, y0: f64, y1: f64) -> f64 {
    if y1 > 0.0 {
        if y0 > 0.0 {
            let z0 = y0 / e0;
            let z1 = y1 / e1;
            let g = z0 * z0 + z1 * z1 - 1.0;
            if g == 0.0 {
                return 0.0;
            }
            let r0 = (e0 / e1).powi(2);
            let sbar = bisect_root(r0, z0, z1, g);
            let x0 = r0 * y0 / (sbar + r0);
            let x1 = y1 / (sbar + 1.0);
            (x0 - y0).hypot(x1 - y1)
        } else {
            (y1 - e1).abs()
        }
    } else {
        let numer0 = e0 * y0;
        let denom0 = e0 * e0 - e1 * e1;
        if numer0 < denom0 {
            let xde0 = numer0 / denom0;
            let x0 = e0 * xde0;
            let x1 = e1 * (1.0 - xde0 * xde0).sqrt();
            (x0 - y0).hypot(x1)
        } else {
            (y0 - e0).abs()
        }
    }
}

fn bisect_root(r0: f64, z0: f64, z1: f64, g: f64) -> f64 {
    let n0 = r0 * z0;
    let mut s0 = z1 - 1.0;
    let mut s1 = if g < 0.0 { 0.0 } else { n0.hypot(z1) - 1.0 };
    let mut s = 0.0;
    for _ in 0..200 {
        s = (s0 + s1) / 2.0;
        if s == s0 || s == s1 {
            break;
        }
        let g = (n0 / (s + r0)).powi(2) + (z1 / (s + 1.0)).powi(2) - 1.0;
        if g > 0.0 {
            s0 = s;
        } else if g < 0.0 {
            s1 = s;
        } else {
            break;
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn area_examples() {
        assert!((ThresholdEllipse::new([0.0, 0.0], [1.0, 1.0], 0.0).unwrap().area() - PI).abs() < 1e-15);
        let e = ThresholdEllipse::new([0.0, 0.0], [2.0, 3.0], 0.0).unwrap();
        assert!((e.area() - 6.0 * PI).abs() < 1e-12);
        let r = ThresholdEllipse::new([0.0, 0.0], [2.0, 3.0], 1.1).unwrap();
        assert_eq!(r.area(), e.area());
    }

    #[test]
    fn rotation_wraps() {
        let e = ThresholdEllipse::new([0.0, 0.0], [2.0, 1.0], PI / 2.0).unwrap();
        assert!((e.rotation + PI / 2.0).abs() < 1e-15);
        let e2 = ThresholdEllipse::new([0.0, 0.0], [2.0, 1.0], 3.0).unwrap();
        assert!(e2.rotation >= -PI / 2.0 && e2.rotation < PI / 2.0);
        assert!((e2.norm_dist2(1.3, 0.4) - ThresholdEllipse { rotation: 3.0, ..e2 }.norm_dist2(1.3, 0.4)).abs() < 1e-12);
        assert!(ThresholdEllipse::new([0.0, 0.0], [0.0, 1.0], 0.0).is_err());
    }

    #[test]
    fn circle_support_point() {
        let e = ThresholdEllipse::circle([-200.0, 45.0], 3.0).unwrap();
        let p = e.support_point([1.0, 1.0]);
        let d = 3.0 / 2f64.sqrt();
        assert!((p[0] - (-200.0 + d)).abs() < 1e-12);
        assert!((p[1] - (45.0 + d)).abs() < 1e-12);
    }

    #[test]
    fn rotated_support_point_on_boundary_and_tangent() {
        let e = ThresholdEllipse::new([1.0, -2.0], [3.0, 1.0], 0.4).unwrap();
        let p = e.support_point([1.0, 1.0]);
        assert!((e.norm_dist2(p[0], p[1]) - 1.0).abs() < 1e-12);
        // no boundary sample beats it on x + y
        let best = (0..10_000)
            .map(|k| {
                let t = k as f64 / 10_000.0 * 2.0 * PI;
                let (s, c) = e.rotation.sin_cos();
                let (u, v) = (3.0 * t.cos(), t.sin());
                (e.center[0] + c * u - s * v) + (e.center[1] + s * u + c * v)
            })
            .fold(f64::MIN, f64::max);
        assert!(p[0] + p[1] >= best - 1e-9);
        assert!(p[0] + p[1] - best < 1e-6);
    }

    #[test]
    fn mahalanobis_ellipse_matches_model() {
        let m = NominalModel::from_params([0.0, 0.0], [[2.0, 0.8], [0.8, 1.0]]).unwrap();
        let e = ThresholdEllipse::mahalanobis(&m, 2.5).unwrap();
        for k in 0..32 {
            let t = k as f64 / 32.0 * 2.0 * PI;
            let (s, c) = e.rotation.sin_cos();
            let (u, v) = (e.semi_axes[0] * t.cos(), e.semi_axes[1] * t.sin());
            let (x, y) = (c * u - s * v, s * u + c * v);
            assert!((m.mahalanobis2(x, y) - 6.25).abs() < 1e-9);
        }
        let sm = e.shape_matrix();
        assert!((sm[0][0] - 6.25 * 2.0).abs() < 1e-9 && (sm[0][1] - 6.25 * 0.8).abs() < 1e-9);
    }

    #[test]
    fn y_range_and_extent() {
        let e = ThresholdEllipse::circle([0.0, 0.0], 5.0).unwrap();
        let (lo, hi) = e.y_range_at(3.0).unwrap();
        assert!((lo + 4.0).abs() < 1e-12 && (hi - 4.0).abs() < 1e-12);
        assert!(e.y_range_at(5.1).is_none());
        assert_eq!(e.extent(), (5.0, 5.0));
    }

    #[test]
    fn ray_exit_on_circle() {
        let e = ThresholdEllipse::circle([-200.0, 45.0], 3.0).unwrap();
        let t = e.ray_exit([-200.0, 45.0], [1.0, -1.0]).unwrap();
        assert!((t - 3.0 / 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn boundary_distance_cases() {
        let c = ThresholdEllipse::circle([0.0, 0.0], 2.0).unwrap();
        assert!((c.boundary_distance(5.0, 0.0) - 3.0).abs() < 1e-12);
        assert!((c.boundary_distance(0.3, 0.4) - 1.5).abs() < 1e-9);
        let e = ThresholdEllipse::new([0.0, 0.0], [3.0, 1.0], 0.0).unwrap();
        assert!((e.boundary_distance(0.0, 4.0) - 3.0).abs() < 1e-12);
        assert!((e.boundary_distance(6.0, 0.0) - 3.0).abs() < 1e-12);
        // brute force for a generic point
        let r = ThresholdEllipse::new([1.0, 2.0], [3.0, 1.5], 0.7).unwrap();
        let (px, py) = (4.2, -0.3);
        let brute = (0..200_000)
            .map(|k| {
                let t = k as f64 / 200_000.0 * 2.0 * PI;
                let (s, c) = r.rotation.sin_cos();
                let (u, v) = (3.0 * t.cos(), 1.5 * t.sin());
                (1.0 + c * u - s * v - px).hypot(2.0 + s * u + c * v - py)
            })
            .fold(f64::MAX, f64::min);
        assert!((r.boundary_distance(px, py) - brute).abs() < 1e-6);
    }
}
