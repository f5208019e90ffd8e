//! Nominal (interference-free) distribution of the metric, fitted as a
//! bivariate Gaussian and discretised onto the 1 dB x 1 dB-Hz grid.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::calibration::MetricPoint;
use crate::numeric::{integrate, norm_mass};

pub const MIN_FIT_POINTS: usize = 100;
/// Cells whose centre lies beyond this Mahalanobis radius are dropped.
pub const GRID_RADIUS: f64 = 8.0;
pub const MAX_SITE_OFFSET: f64 = 20.0;
pub const DEFAULT_ELEVATION_WIDTH_DEG: f64 = 2.0;

// Gauss-Legendre panels per cell along rx_power.
const PANELS_PER_CELL: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NominalError {
    #[error("{have} points after filtering, need at least {need}")]
    TooFewPoints { have: usize, need: usize },
    #[error("degenerate covariance: {0}")]
    DegenerateCovariance(String),
    #[error("site offset ({0:.3}, {1:.3}) exceeds the 20 dB sanity bound")]
    OffsetTooLarge(f64, f64),
}

/// Integer grid cell; cell `(i, j)` covers `[i, i+1) x [j, j+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub i: i64,
    pub j: i64,
}

impl Cell {
    pub fn center(self) -> (f64, f64) {
        (self.i as f64 + 0.5, self.j as f64 + 0.5)
    }
}

pub fn cell_of(rx_power: f64, cn0: f64) -> Cell {
    Cell {
        i: rx_power.floor() as i64,
        j: cn0.floor() as i64,
    }
}

/// Representative point of the cell containing `(x, y)`.
pub fn quantize(x: f64, y: f64) -> (f64, f64) {
    (x.floor() + 0.5, y.floor() + 0.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElevationBin {
    pub lo_deg: f64,
    pub hi_deg: f64,
}

impl ElevationBin {
    pub fn all() -> Self {
        Self {
            lo_deg: 0.0,
            hi_deg: 90.0,
        }
    }

    pub fn around(center_deg: f64, width_deg: f64) -> Self {
        Self {
            lo_deg: center_deg - width_deg / 2.0,
            hi_deg: center_deg + width_deg / 2.0,
        }
    }

    pub fn contains(&self, elev: f64) -> bool {
        elev >= self.lo_deg && elev <= self.hi_deg
    }
}

impl Default for ElevationBin {
    fn default() -> Self {
        Self::all()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SiteOffset {
    pub d_rx_power: f64,
    pub d_cn0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridMass {
    pub i: i64,
    pub j: i64,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub n_points: usize,
    pub created_unix: u64,
    pub tool_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NominalModel {
    /// (rx_power dBW/Hz, cn0 dB-Hz)
    pub mean: [f64; 2],
    pub covariance: [[f64; 2]; 2],
    pub elevation_bin: ElevationBin,
    /// Empty means every satellite.
    pub sat_filter: BTreeSet<String>,
    /// Accumulated recentering shift relative to the fitted site.
    pub site_offset: SiteOffset,
    pub metadata: ModelMetadata,
    /// Sorted by `(i, j)`.
    pub grid: Vec<GridMass>,
}

/// Lower Cholesky factor of a 2x2 SPD matrix.
pub fn cholesky2(c: &[[f64; 2]; 2]) -> Option<[[f64; 2]; 2]> {
    let l00 = c[0][0].sqrt();
    if !(l00 > 0.0) {
        return None;
    }
    let l10 = c[1][0] / l00;
    let d = c[1][1] - l10 * l10;
    if !(d > 0.0) {
        return None;
    }
    Some([[l00, 0.0], [l10, d.sqrt()]])
}

fn check_covariance(c: &[[f64; 2]; 2]) -> Result<(), NominalError> {
    let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
    let scale = c[0][0].abs().max(c[1][1].abs());
    if !c.iter().flatten().all(|v| v.is_finite()) || (c[0][1] - c[1][0]).abs() > 1e-12 * scale.max(1.0) {
        return Err(NominalError::DegenerateCovariance("not finite and symmetric".into()));
    }
    if !(c[0][0] > 0.0 && c[1][1] > 0.0 && det > 1e-12 * scale * scale) {
        return Err(NominalError::DegenerateCovariance(format!("determinant {det:e}")));
    }
    Ok(())
}

impl NominalModel {
    /// Model from known parameters, with the grid computed.
    pub fn from_params(mean: [f64; 2], covariance: [[f64; 2]; 2]) -> Result<Self, NominalError> {
        check_covariance(&covariance)?;
        let mut m = Self {
            mean,
            covariance,
            elevation_bin: ElevationBin::all(),
            sat_filter: BTreeSet::new(),
            site_offset: SiteOffset::default(),
            metadata: ModelMetadata::default(),
            grid: Vec::new(),
        };
        m.grid = m.compute_grid();
        Ok(m)
    }

    pub fn std_devs(&self) -> (f64, f64) {
        (self.covariance[0][0].sqrt(), self.covariance[1][1].sqrt())
    }

    pub fn correlation(&self) -> f64 {
        let (sx, sy) = self.std_devs();
        self.covariance[0][1] / (sx * sy)
    }

    pub fn cholesky(&self) -> [[f64; 2]; 2] {
        cholesky2(&self.covariance).expect("covariance validated at construction")
    }

    pub fn mahalanobis2(&self, x: f64, y: f64) -> f64 {
        let c = &self.covariance;
        let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
        let dx = x - self.mean[0];
        let dy = y - self.mean[1];
        (c[1][1] * dx * dx - 2.0 * c[0][1] * dx * dy + c[0][0] * dy * dy) / det
    }

    pub fn matches(&self, p: &MetricPoint) -> bool {
        (self.sat_filter.is_empty() || self.sat_filter.contains(&p.sat_id))
            && self.elevation_bin.contains(p.elevation_deg)
    }

    fn compute_grid(&self) -> Vec<GridMass> {
        let (sx, sy) = self.std_devs();
        let rho = self.correlation();
        let cond_sd = sy * (1.0 - rho * rho).sqrt();
        let i_lo = (self.mean[0] - GRID_RADIUS * sx).floor() as i64 - 1;
        let i_hi = (self.mean[0] + GRID_RADIUS * sx).ceil() as i64;
        let j_lo = (self.mean[1] - GRID_RADIUS * sy).floor() as i64 - 1;
        let j_hi = (self.mean[1] + GRID_RADIUS * sy).ceil() as i64;
        let r2 = GRID_RADIUS * GRID_RADIUS;

        let phi = |x: f64| {
            let z = (x - self.mean[0]) / sx;
            (-0.5 * z * z).exp() / (sx * (2.0 * std::f64::consts::PI).sqrt())
        };
        let mut grid = Vec::new();
        for i in i_lo..=i_hi {
            for j in j_lo..=j_hi {
                let cell = Cell { i, j };
                let (cx, cy) = cell.center();
                if self.mahalanobis2(cx, cy) > r2 {
                    continue;
                }
                // outer quadrature in x, exact conditional normal mass in y
                let mass = integrate(
                    |x| {
                        let mu = self.mean[1] + rho * sy / sx * (x - self.mean[0]);
                        phi(x) * norm_mass((j as f64 - mu) / cond_sd, (j as f64 + 1.0 - mu) / cond_sd)
                    },
                    i as f64,
                    i as f64 + 1.0,
                    PANELS_PER_CELL,
                );
                if mass > 0.0 {
                    grid.push(GridMass { i, j, mass });
                }
            }
        }
        let total: f64 = grid.iter().map(|g| g.mass).sum();
        grid.iter_mut().for_each(|g| g.mass /= total);
        grid
    }

    pub fn mass_at(&self, cell: Cell) -> f64 {
        self.grid
            .binary_search_by(|g| (g.i, g.j).cmp(&(cell.i, cell.j)))
            .map(|k| self.grid[k].mass)
            .unwrap_or(0.0)
    }

    pub fn grid_total(&self) -> f64 {
        self.grid.iter().map(|g| g.mass).sum()
    }

    /// SHA-256 over everything except `metadata`, hex encoded.
    pub fn content_hash(&self) -> String {
        #[derive(Serialize)]
        struct View<'a> {
            mean: &'a [f64; 2],
            covariance: &'a [[f64; 2]; 2],
            elevation_bin: &'a ElevationBin,
            sat_filter: &'a BTreeSet<String>,
            site_offset: &'a SiteOffset,
            grid: &'a [GridMass],
        }
        let bytes = serde_json::to_vec(&View {
            mean: &self.mean,
            covariance: &self.covariance,
            elevation_bin: &self.elevation_bin,
            sat_filter: &self.sat_filter,
            site_offset: &self.site_offset,
            grid: &self.grid,
        })
        .expect("model serialises");
        hex::encode(Sha256::digest(&bytes))
    }
}

fn sample_moments(points: &[&MetricPoint]) -> ([f64; 2], [[f64; 2]; 2]) {
    let n = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |a, p| (a.0 + p.rx_power, a.1 + p.cn0.unwrap_or(0.0)));
    let mean = [sx / n, sy / n];
    let mut c = [[0.0; 2]; 2];
    for p in points {
        let dx = p.rx_power - mean[0];
        let dy = p.cn0.unwrap_or(0.0) - mean[1];
        c[0][0] += dx * dx;
        c[0][1] += dx * dy;
        c[1][1] += dy * dy;
    }
    let d = n - 1.0;
    c[0][0] /= d;
    c[0][1] /= d;
    c[1][1] /= d;
    c[1][0] = c[0][1];
    (mean, c)
}

fn select<'a>(
    points: &'a [MetricPoint],
    elevation_bin: &ElevationBin,
    sat_filter: &BTreeSet<String>,
) -> Vec<&'a MetricPoint> {
    points
        .iter()
        .filter(|p| p.cn0.is_some() && p.rx_power.is_finite())
        .filter(|p| sat_filter.is_empty() || sat_filter.contains(&p.sat_id))
        .filter(|p| elevation_bin.contains(p.elevation_deg))
        .collect()
}

/// Fit the nominal Gaussian on points that match the filters and carry C/N0.
pub fn fit_nominal(
    points: &[MetricPoint],
    elevation_bin: ElevationBin,
    sat_filter: &BTreeSet<String>,
) -> Result<NominalModel, NominalError> {
    let chosen = select(points, &elevation_bin, sat_filter);
    if chosen.len() < MIN_FIT_POINTS {
        return Err(NominalError::TooFewPoints {
            have: chosen.len(),
            need: MIN_FIT_POINTS,
        });
    }
    let distinct = |f: &dyn Fn(&MetricPoint) -> f64| {
        chosen.iter().map(|p| f(p).floor() as i64).collect::<BTreeSet<_>>().len()
    };
    let (ni, nj) = (distinct(&|p| p.rx_power), distinct(&|p| p.cn0.unwrap_or(0.0)));
    if ni < 2 || nj < 2 {
        return Err(NominalError::DegenerateCovariance(format!(
            "points span {ni} x {nj} grid cells, need at least 2 per axis"
        )));
    }
    let (mean, cov) = sample_moments(&chosen);
    let mut model = NominalModel::from_params(mean, cov)?;
    model.elevation_bin = elevation_bin;
    model.sat_filter = sat_filter.clone();
    model.metadata.n_points = chosen.len();
    Ok(model)
}

/// Shift the model so its mean equals the mean of local nominal data.
///
/// Local points go through the model's own satellite and elevation filters.
pub fn recenter(model: &NominalModel, local_points: &[MetricPoint]) -> Result<(NominalModel, SiteOffset), NominalError> {
    let chosen = select(local_points, &model.elevation_bin, &model.sat_filter);
    if chosen.len() < MIN_FIT_POINTS {
        return Err(NominalError::TooFewPoints {
            have: chosen.len(),
            need: MIN_FIT_POINTS,
        });
    }
    let (local_mean, _) = sample_moments(&chosen);
    let offset = SiteOffset {
        d_rx_power: local_mean[0] - model.mean[0],
        d_cn0: local_mean[1] - model.mean[1],
    };
    if !(offset.d_rx_power.abs() <= MAX_SITE_OFFSET && offset.d_cn0.abs() <= MAX_SITE_OFFSET) {
        return Err(NominalError::OffsetTooLarge(offset.d_rx_power, offset.d_cn0));
    }
    if offset == SiteOffset::default() {
        return Ok((model.clone(), offset));
    }
    let mut out = model.clone();
    out.mean = local_mean;
    out.site_offset.d_rx_power += offset.d_rx_power;
    out.site_offset.d_cn0 += offset.d_cn0;
    out.grid = out.compute_grid();
    Ok((out, offset))
}
