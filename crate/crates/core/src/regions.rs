//! Region geometry and per-epoch labelling.
//!
//! The plane is split by the threshold ellipse, a vertical noise-floor line
//! on its left, and a spoof boundary running from the ellipse's top-right
//! tangent point down the jamming slope until it meets the C/N0 floor.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::MetricPoint;
use crate::ellipse::ThresholdEllipse;
use crate::nominal::NominalModel;

pub const DEFAULT_CN0_FLOOR: f64 = 27.0;
pub const DEFAULT_JAM_SLOPE: f64 = -1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegionError {
    #[error("threshold ellipse does not enclose the model mean")]
    EllipseExcludesMean,
    #[error("invalid region config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LossCause {
    Blocked,
    Jamming,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Nominal,
    Jamming,
    Blocked,
    Spoofing,
    Unrealistic,
    SignalLoss(LossCause),
}

impl Label {
    pub const ALL: [Label; 7] = [
        Label::Nominal,
        Label::Jamming,
        Label::Blocked,
        Label::Spoofing,
        Label::Unrealistic,
        Label::SignalLoss(LossCause::Blocked),
        Label::SignalLoss(LossCause::Jamming),
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Nominal => "nominal",
            Label::Jamming => "jamming",
            Label::Blocked => "blocked",
            Label::Spoofing => "spoofing",
            Label::Unrealistic => "unrealistic",
            Label::SignalLoss(LossCause::Blocked) => "signal_loss_blocked",
            Label::SignalLoss(LossCause::Jamming) => "signal_loss_jamming",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown label '{0}'")]
pub struct UnknownLabel(pub String);

impl FromStr for Label {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Label::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| UnknownLabel(s.to_string()))
    }
}

impl Serialize for Label {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegionConfig {
    pub cn0_floor: f64,
    pub jam_slope: f64,
}

impl Default for RegionConfig {
    fn default() -> Self {
        Self {
            cn0_floor: DEFAULT_CN0_FLOOR,
            jam_slope: DEFAULT_JAM_SLOPE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionMap {
    pub ellipse: ThresholdEllipse,
    pub cn0_floor: f64,
    pub jam_slope: f64,
    /// Ellipse point maximising rx_power + cn0; the spoof boundary starts here.
    pub anchor: [f64; 2],
    /// Left edge of the ellipse; anything weaker is unrealistic.
    pub noise_floor: f64,
    /// Right edge of the ellipse.
    pub band_hi: f64,
    /// Upper rx_power bound of the blocked region.
    pub blocked_hi: f64,
    /// Content hash of the model the geometry was built from.
    pub model_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifiedPoint {
    pub point: MetricPoint,
    pub label: Label,
    /// Distance to the nearest region boundary.
    pub margin: f64,
}

pub fn build_regions(model: &NominalModel, ellipse: &ThresholdEllipse, cfg: &RegionConfig) -> Result<RegionMap, RegionError> {
    if !cfg.cn0_floor.is_finite() || !(cfg.jam_slope < 0.0 && cfg.jam_slope.is_finite()) {
        return Err(RegionError::InvalidConfig(format!(
            "cn0_floor {} must be finite and jam_slope {} negative",
            cfg.cn0_floor, cfg.jam_slope
        )));
    }
    if !ellipse.contains(model.mean[0], model.mean[1]) {
        return Err(RegionError::EllipseExcludesMean);
    }
    let anchor = ellipse.support_point([1.0, 1.0]);
    let (hx, _) = ellipse.extent();
    Ok(RegionMap {
        ellipse: *ellipse,
        cn0_floor: cfg.cn0_floor,
        jam_slope: cfg.jam_slope,
        anchor,
        noise_floor: ellipse.center[0] - hx,
        band_hi: ellipse.center[0] + hx,
        blocked_hi: anchor[0],
        model_hash: model.content_hash(),
    })
}

impl RegionMap {
    /// cn0 of the spoof boundary at `x`.
    pub fn spoof_boundary_at(&self, x: f64) -> f64 {
        (self.anchor[1] + self.jam_slope * (x - self.anchor[0])).max(self.cn0_floor)
    }

    /// rx_power where the sloped part of the boundary meets the floor.
    pub fn floor_crossing(&self) -> f64 {
        self.anchor[0] + (self.cn0_floor - self.anchor[1]) / self.jam_slope
    }

    fn below_ellipse(&self, x: f64, y: f64) -> bool {
        match self.ellipse.y_range_at(x) {
            Some((lo, _)) => y < lo,
            None => y < self.ellipse.center[1],
        }
    }

    pub fn label(&self, rx: f64, cn0: Option<f64>) -> Label {
        if rx < self.noise_floor {
            return Label::Unrealistic;
        }
        let Some(y) = cn0 else {
            return if rx <= self.blocked_hi {
                Label::SignalLoss(LossCause::Blocked)
            } else {
                Label::SignalLoss(LossCause::Jamming)
            };
        };
        if self.ellipse.contains(rx, y) {
            Label::Nominal
        } else if y > self.spoof_boundary_at(rx) && rx > self.band_hi {
            Label::Spoofing
        } else if rx <= self.blocked_hi && self.below_ellipse(rx, y) {
            Label::Blocked
        } else {
            Label::Jamming
        }
    }

    // Sloped boundary restricted to x ≥ band_hi, then the floor ray.
    fn spoof_boundary_distance(&self, x: f64, y: f64) -> f64 {
        let fx = self.floor_crossing();
        let sx = self.band_hi;
        let seg = if sx < fx {
            let (ax, ay) = (sx, self.spoof_boundary_at(sx));
            let (dx, dy) = (fx - ax, self.cn0_floor - ay);
            let t = (((x - ax) * dx + (y - ay) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
            (x - ax - t * dx).hypot(y - ay - t * dy)
        } else {
            f64::INFINITY
        };
        let start = fx.max(sx);
        let ray = if x >= start {
            (y - self.cn0_floor).abs()
        } else {
            (x - start).hypot(y - self.cn0_floor)
        };
        seg.min(ray)
    }

    /// Distance to the nearest boundary curve of the partition.
    pub fn margin(&self, rx: f64, cn0: Option<f64>) -> f64 {
        let floor_line = (rx - self.noise_floor).abs();
        let Some(y) = cn0 else {
            return floor_line.min((rx - self.blocked_hi).abs());
        };
        // spoofing/jamming divider above the spoof boundary
        let up_from = self.spoof_boundary_at(self.band_hi);
        let spoof_edge = ray_distance(rx - self.band_hi, y - up_from, true);
        // blocked/jamming divider below the ellipse
        let down_from = self
            .ellipse
            .y_range_at(self.blocked_hi)
            .map_or(self.anchor[1], |r| r.0);
        let blocked_edge = ray_distance(rx - self.blocked_hi, y - down_from, false);
        floor_line
            .min(self.ellipse.boundary_distance(rx, y))
            .min(self.spoof_boundary_distance(rx, y))
            .min(spoof_edge)
            .min(blocked_edge)
    }

    pub fn classify(&self, point: &MetricPoint) -> ClassifiedPoint {
        ClassifiedPoint {
            point: point.clone(),
            label: self.label(point.rx_power, point.cn0),
            margin: self.margin(point.rx_power, point.cn0),
        }
    }

    /// Same geometry shifted by `(dx, dy)`; the C/N0 floor stays absolute.
    pub fn translated(&self, dx: f64, dy: f64, model_hash: String) -> RegionMap {
        let ellipse = self.ellipse.translated(dx, dy);
        let anchor = [self.anchor[0] + dx, self.anchor[1] + dy];
        RegionMap {
            ellipse,
            cn0_floor: self.cn0_floor,
            jam_slope: self.jam_slope,
            anchor,
            noise_floor: self.noise_floor + dx,
            band_hi: self.band_hi + dx,
            blocked_hi: anchor[0],
            model_hash,
        }
    }
}

// Distance to a vertical ray from the origin, pointing up or down.
fn ray_distance(dx: f64, dy: f64, up: bool) -> f64 {
    if (up && dy >= 0.0) || (!up && dy <= 0.0) {
        dx.abs()
    } else {
        dx.hypot(dy)
    }
}

pub fn classify(point: &MetricPoint, regions: &RegionMap) -> ClassifiedPoint {
    regions.classify(point)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClassifiedStream {
    pub points: Vec<ClassifiedPoint>,
    pub counts: BTreeMap<Label, usize>,
}

pub fn classify_stream(points: &[MetricPoint], regions: &RegionMap) -> ClassifiedStream {
    let mut out = ClassifiedStream::default();
    for p in points {
        let c = regions.classify(p);
        *out.counts.entry(c.label).or_default() += 1;
        out.points.push(c);
    }
    out
}
