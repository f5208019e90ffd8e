//! Spectrum-to-received-power calibration.
//!
//! A raw spectrum record becomes one environment-referenced power density in
//! four steps: remove the AGC gain, reference the bins to a fixed board
//! temperature, collapse the bins with signal-PSD weights, and map device
//! units to dBW/Hz minus the antenna chain gain. The result is paired with the
//! satellite's C/N0 into a [`MetricPoint`].

pub mod pairing;
pub mod psd;
pub mod temperature;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{EpochStream, SpectrumRecord, TEMP_RANGE_K};
use crate::numeric::{db_to_lin, lin_to_db};

pub use pairing::{pair_metric, Paired, DEFAULT_PAIR_WINDOW_S};
pub use psd::{compute_weights, PsdShape, SignalPsd, WeightTable, GPS_L1CA_FRACTIONS};
pub use temperature::{fit_temp_curve, Polynomial, TempCurveFit};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrationError {
    #[error("AGC gain already removed from this record")]
    AlreadyAdjusted,
    #[error("{samples} samples cannot determine a degree-{degree} curve")]
    Underdetermined { samples: usize, degree: usize },
    #[error("only {distinct} distinct temperatures for a degree-{degree} curve")]
    DegenerateTemps { distinct: usize, degree: usize },
    #[error("temperature {0} K outside [200, 350]")]
    TempOutOfRange(f64),
    #[error("signal band {band:?} not covered by bins spanning {bins:?}")]
    BandNotCovered { band: (f64, f64), bins: (f64, f64) },
    #[error("no record bin within 1 kHz of weight bin {0} Hz")]
    BinMisalignment(f64),
    #[error("span value {value} outside unit-curve bounds, clamped to {clamped} dBW/Hz")]
    Saturated { value: f64, clamped: f64 },
    #[error("invalid weight table: {0}")]
    InvalidWeights(String),
    #[error("invalid calibration config: {0}")]
    InvalidConfig(String),
    #[error("unknown signal '{0}'")]
    UnknownSignal(String),
}

/// Affine device-unit to dBW/Hz map, valid between `lo` and `hi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitCurve {
    /// dB per device unit.
    pub a: f64,
    /// dBW/Hz intercept.
    pub b: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Default for UnitCurve {
    /// Synthetic default, not a lab fit.
    fn default() -> Self {
        Self {
            a: 1.0,
            b: -100.0,
            lo: -150.0,
            hi: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationConfig {
    pub agc_factor: f64,
    pub ref_temp_k: f64,
    /// Δ(T) in dB, ascending coefficients in Kelvin.
    pub temp_curve: Polynomial,
    pub unit_curve: UnitCurve,
    /// Antenna + LNA gain net of cable loss, dB.
    pub chain_gain_db: f64,
    pub pair_window_s: f64,
    pub weights: BTreeMap<String, WeightTable>,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        let mut weights = BTreeMap::new();
        weights.insert("gps_l1ca".to_string(), WeightTable::gps_l1ca());
        Self {
            agc_factor: 3.7,
            ref_temp_k: 300.0,
            temp_curve: Polynomial::zero(),
            unit_curve: UnitCurve::default(),
            chain_gain_db: 24.9,
            pair_window_s: DEFAULT_PAIR_WINDOW_S,
            weights,
        }
    }
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<(), CalibrationError> {
        let bad = |m: String| Err(CalibrationError::InvalidConfig(m));
        if !(self.agc_factor > 0.0) {
            return bad(format!("agc_factor {} must be > 0", self.agc_factor));
        }
        if !(250.0..=330.0).contains(&self.ref_temp_k) {
            return bad(format!("ref_temp_k {} outside [250, 330]", self.ref_temp_k));
        }
        if !(self.unit_curve.a > 0.0) {
            return bad(format!("unit_curve.a {} must be > 0", self.unit_curve.a));
        }
        if !(self.unit_curve.lo < self.unit_curve.hi) {
            return bad("unit_curve.lo must be below unit_curve.hi".into());
        }
        if self.temp_curve.0.is_empty() || self.temp_curve.0.iter().any(|c| !c.is_finite()) {
            return bad("temp_curve needs at least one finite coefficient".into());
        }
        if !self.chain_gain_db.is_finite() || !(self.pair_window_s >= 0.0) {
            return bad("chain_gain_db and pair_window_s must be finite".into());
        }
        for (name, w) in &self.weights {
            w.validate()
                .map_err(|e| CalibrationError::InvalidConfig(format!("weights.{name}: {e}")))?;
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self, CalibrationError> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| CalibrationError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }

    pub fn load(path: &Path) -> Result<Self, CalibrationError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CalibrationError::InvalidConfig(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn weights_for(&self, signal: &str) -> Result<&WeightTable, CalibrationError> {
        self.weights
            .get(signal)
            .ok_or_else(|| CalibrationError::UnknownSignal(signal.to_string()))
    }
}

/// One point of the two-dimensional detection metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricPoint {
    pub timestamp: f64,
    pub sat_id: String,
    /// dBW/Hz
    pub rx_power: f64,
    /// dB-Hz; `None` for loss of lock.
    pub cn0: Option<f64>,
    pub elevation_deg: f64,
}

impl MetricPoint {
    pub fn new(timestamp: f64, sat_id: impl Into<String>, rx_power: f64, cn0: Option<f64>, elevation_deg: f64) -> Self {
        Self {
            timestamp,
            sat_id: sat_id.into(),
            rx_power,
            cn0,
            elevation_deg,
        }
    }
}

/// Remove the AGC gain: every bin drops by `agc_factor × pga_level`.
pub fn adjust_agc(record: &SpectrumRecord, cfg: &CalibrationConfig) -> Result<SpectrumRecord, CalibrationError> {
    if record.agc_adjusted {
        return Err(CalibrationError::AlreadyAdjusted);
    }
    let offset = cfg.agc_factor * record.pga_level;
    let mut out = record.clone();
    out.bin_powers.iter_mut().for_each(|p| *p -= offset);
    out.pga_level = 0.0;
    out.agc_adjusted = true;
    Ok(out)
}

/// Reference every bin to `cfg.ref_temp_k`: `P - Δ(T) + Δ(T_ref)`.
pub fn apply_temp_cal(record: &SpectrumRecord, cfg: &CalibrationConfig) -> Result<SpectrumRecord, CalibrationError> {
    let t = record.temperature;
    if !(TEMP_RANGE_K.0..=TEMP_RANGE_K.1).contains(&t) {
        return Err(CalibrationError::TempOutOfRange(t));
    }
    let offset = cfg.temp_curve.eval(cfg.ref_temp_k) - cfg.temp_curve.eval(t);
    let mut out = record.clone();
    out.bin_powers.iter_mut().for_each(|p| *p += offset);
    Ok(out)
}

/// PSD-weighted sum of the bins, `10 log10 Σ 10^(P_i/10) f_i`, device dB.
///
/// Record bins are matched to weight bins by center frequency (1 kHz
/// tolerance), so a wide spectrum can be weighted by a narrow table.
pub fn aggregate_power(record: &SpectrumRecord, weights: &WeightTable) -> Result<f64, CalibrationError> {
    let mut sum = 0.0;
    for (&center, &frac) in weights.bin_center_hz.iter().zip(&weights.fractions) {
        let idx = ((center - record.first_bin_hz) / crate::ingest::BIN_SPACING_HZ).round();
        if idx < 0.0 || idx as usize >= record.len() {
            return Err(CalibrationError::BinMisalignment(center));
        }
        let idx = idx as usize;
        if (record.bin_center(idx) - center).abs() > 1e3 {
            return Err(CalibrationError::BinMisalignment(center));
        }
        sum += db_to_lin(record.bin_powers[idx]) * frac;
    }
    Ok(lin_to_db(sum))
}

/// Device units to environment-referenced dBW/Hz.
///
/// Out-of-bounds inputs return [`CalibrationError::Saturated`] carrying the
/// value clamped at the violated bound.
pub fn to_dbw_hz(span_value: f64, cfg: &CalibrationConfig) -> Result<f64, CalibrationError> {
    let u = &cfg.unit_curve;
    let map = |v: f64| u.a * v + u.b - cfg.chain_gain_db;
    if span_value.is_nan() || span_value < u.lo || span_value > u.hi {
        let bound = if span_value > u.hi { u.hi } else { u.lo };
        return Err(CalibrationError::Saturated {
            value: span_value,
            clamped: map(bound),
        });
    }
    Ok(map(span_value))
}

/// Calibrated power of one record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibratedPower {
    pub timestamp: f64,
    pub dbw_hz: f64,
    pub saturated: bool,
}

/// Full chain for one record. Saturation is reported, not fatal.
pub fn calibrate_record(
    record: &SpectrumRecord,
    cfg: &CalibrationConfig,
    weights: &WeightTable,
) -> Result<CalibratedPower, CalibrationError> {
    let adjusted = adjust_agc(record, cfg)?;
    let referenced = apply_temp_cal(&adjusted, cfg)?;
    let span = aggregate_power(&referenced, weights)?;
    let (dbw_hz, saturated) = match to_dbw_hz(span, cfg) {
        Ok(v) => (v, false),
        Err(CalibrationError::Saturated { clamped, .. }) => (clamped, true),
        Err(e) => return Err(e),
    };
    Ok(CalibratedPower {
        timestamp: record.timestamp,
        dbw_hz,
        saturated,
    })
}

/// Build a uniform-bin spectrum record whose calibrated power is `dbw_hz`.
///
/// Inverse of [`calibrate_record`], used by the simulator to emit canonical
/// spectrum lines. `pga_level` and `temperature` are folded back in so the
/// forward chain has real work to do.
pub fn synthesize_spectrum(
    timestamp: f64,
    dbw_hz: f64,
    pga_level: f64,
    temperature: f64,
    cfg: &CalibrationConfig,
    weights: &WeightTable,
) -> Result<SpectrumRecord, CalibrationError> {
    let u = &cfg.unit_curve;
    let span = (dbw_hz + cfg.chain_gain_db - u.b) / u.a;
    let referenced = span - lin_to_db(weights.sum());
    let raw = referenced + cfg.temp_curve.eval(temperature) - cfg.temp_curve.eval(cfg.ref_temp_k)
        + cfg.agc_factor * pga_level;
    let first = weights.bin_center_hz[0];
    let n = weights.len();
    SpectrumRecord::new(
        timestamp,
        first,
        crate::ingest::BIN_SPACING_HZ,
        vec![raw; n],
        pga_level,
        temperature,
    )
    .map_err(|e| CalibrationError::InvalidConfig(e.to_string()))
}

/// Calibrated and paired output of a whole observable stream.
#[derive(Debug, Clone, Default)]
pub struct CalibratedStream {
    pub points: Vec<MetricPoint>,
    /// Epochs without a power sample in the pairing window.
    pub unpaired: usize,
    /// Records whose span value hit a unit-curve bound.
    pub saturated: usize,
    /// Spectrum records the chain rejected, with the reason.
    pub rejected: Vec<(f64, CalibrationError)>,
}

pub fn calibrate_stream(
    stream: &EpochStream,
    cfg: &CalibrationConfig,
    signal: &str,
) -> Result<CalibratedStream, CalibrationError> {
    let weights = cfg.weights_for(signal)?;
    let mut out = CalibratedStream::default();
    let mut powers = Vec::new();
    for rec in stream.spectra() {
        match calibrate_record(rec, cfg, weights) {
            Ok(p) => {
                out.saturated += p.saturated as usize;
                powers.push((p.timestamp, p.dbw_hz));
            }
            Err(e) => out.rejected.push((rec.timestamp, e)),
        }
    }
    powers.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut epochs: Vec<_> = stream.epochs().cloned().collect();
    epochs.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    let paired = pair_metric(&epochs, &powers, cfg.pair_window_s);
    out.points = paired.points;
    out.unpaired = paired.dropped;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(bins: Vec<f64>, pga: f64, temp: f64) -> SpectrumRecord {
        SpectrumRecord::new(0.0, 1573.0e6, 500e3, bins, pga, temp).unwrap()
    }

    #[test]
    fn agc_subtracts_factor_times_pga() {
        let cfg = CalibrationConfig::default();
        let out = adjust_agc(&rec(vec![-100.0], 4.0, 300.0), &cfg).unwrap();
        assert!((out.bin_powers[0] + 114.8).abs() < 1e-12);
        assert_eq!(out.pga_level, 0.0);
        assert_eq!(adjust_agc(&out, &cfg), Err(CalibrationError::AlreadyAdjusted));
        let same = adjust_agc(&rec(vec![-100.0], 0.0, 300.0), &cfg).unwrap();
        assert_eq!(same.bin_powers, vec![-100.0]);
    }

    #[test]
    fn temperature_reference() {
        let cfg = CalibrationConfig {
            temp_curve: Polynomial(vec![15.0, -0.05]),
            ..Default::default()
        };
        let at_ref = apply_temp_cal(&rec(vec![-110.0], 0.0, 300.0), &cfg).unwrap();
        assert!((at_ref.bin_powers[0] + 110.0).abs() < 1e-12);
        let warm = apply_temp_cal(&rec(vec![-110.0], 0.0, 320.0), &cfg).unwrap();
        assert!((warm.bin_powers[0] + 109.0).abs() < 1e-12);
        let mut cold = rec(vec![-110.0], 0.0, 300.0);
        cold.temperature = 150.0;
        assert_eq!(apply_temp_cal(&cold, &cfg), Err(CalibrationError::TempOutOfRange(150.0)));
    }

    #[test]
    fn aggregation_closed_forms() {
        let w = WeightTable::gps_l1ca();
        let uniform = aggregate_power(&rec(vec![-140.0; 10], 0.0, 300.0), &w).unwrap();
        assert!((uniform - (-140.0 + 10.0 * 1.001f64.log10())).abs() < 1e-9);
        assert!((uniform + 139.995_658).abs() < 1e-5);

        let mut bins = vec![f64::NEG_INFINITY; 10];
        bins[5] = 0.0;
        let single = aggregate_power(&rec(bins, 0.0, 300.0), &w).unwrap();
        assert!((single - 10.0 * 0.492f64.log10()).abs() < 1e-12);
        assert!((single + 3.080).abs() < 1e-3);

        let unit = WeightTable::new(vec![1573.0e6], vec![1.0]).unwrap();
        assert_eq!(aggregate_power(&rec(vec![-77.5], 0.0, 300.0), &unit).unwrap(), -77.5);
    }

    #[test]
    fn aggregation_alignment() {
        let w = WeightTable::gps_l1ca();
        // 256-bin record that contains the table window
        let wide = SpectrumRecord::new(0.0, 1573.0e6 - 100.0 * 500e3, 500e3, vec![-120.0; 256], 0.0, 300.0)
            .unwrap();
        assert!(aggregate_power(&wide, &w).is_ok());
        let shifted = SpectrumRecord::new(0.0, 1573.2e6, 500e3, vec![-120.0; 10], 0.0, 300.0).unwrap();
        assert!(matches!(
            aggregate_power(&shifted, &w),
            Err(CalibrationError::BinMisalignment(_))
        ));
    }

    #[test]
    fn unit_conversion() {
        let cfg = CalibrationConfig {
            unit_curve: UnitCurve {
                a: 1.0,
                b: 0.0,
                lo: -300.0,
                hi: 0.0,
            },
            ..Default::default()
        };
        assert!((to_dbw_hz(-170.0, &cfg).unwrap() + 194.9).abs() < 1e-12);
        let ident = CalibrationConfig {
            chain_gain_db: 0.0,
            ..cfg.clone()
        };
        assert_eq!(to_dbw_hz(-42.0, &ident).unwrap(), -42.0);
        assert_eq!(
            to_dbw_hz(5.0, &cfg),
            Err(CalibrationError::Saturated {
                value: 5.0,
                clamped: -24.9
            })
        );
    }

    #[test]
    fn synthesize_inverts_chain() {
        let cfg = CalibrationConfig {
            temp_curve: Polynomial(vec![15.0, -0.05]),
            ..Default::default()
        };
        let w = WeightTable::gps_l1ca();
        let r = synthesize_spectrum(5.0, -201.3, 3.0, 312.0, &cfg, &w).unwrap();
        let p = calibrate_record(&r, &cfg, &w).unwrap();
        assert!((p.dbw_hz + 201.3).abs() < 1e-9);
        assert!(!p.saturated);
    }

    #[test]
    fn config_toml_roundtrip_and_validation() {
        let cfg = CalibrationConfig::default();
        let back = CalibrationConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        let bad = CalibrationConfig {
            ref_temp_k: 200.0,
            ..Default::default()
        };
        assert!(CalibrationConfig::from_toml(&bad.to_toml()).is_err());
        let bad = CalibrationConfig {
            agc_factor: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
