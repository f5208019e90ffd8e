//! Receiver observable ingestion.
//!
//! Two entry points produce the same record types: a binary frame adapter
//! ([`frame`] + [`layout`]) for vendor spectrum messages, and the canonical
//! line-oriented JSON stream ([`stream`]) that every other stage consumes.

pub mod frame;
pub mod layout;
pub mod stream;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use frame::{encode_frame, parse_frame, FrameError, FrameReader, RawFrame};
pub use layout::{decode_spectrum, DecodeError, DecodeLayout};
pub use stream::{read_epoch_stream, EpochStream, Record, SchemaViolation};

/// Spectrum bin spacing of the receiver's FFT output.
pub const BIN_SPACING_HZ: f64 = 500_000.0;

/// Allowed board temperature range, Kelvin.
pub const TEMP_RANGE_K: (f64, f64) = (200.0, 350.0);

/// Allowed reported C/N0 range, dB-Hz.
pub const CN0_RANGE_DBHZ: (f64, f64) = (0.0, 65.0);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RecordError {
    #[error("spectrum has no bins")]
    EmptySpectrum,
    #[error("bin spacing {0} Hz, expected 500 kHz")]
    BadSpacing(f64),
    #[error("temperature {0} K outside [200, 350]")]
    TemperatureOutOfRange(f64),
    #[error("C/N0 {0} dB-Hz outside [0, 65]")]
    Cn0OutOfRange(f64),
    #[error("elevation {0} deg outside [0, 90]")]
    ElevationOutOfRange(f64),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

/// One timestamped FFT snapshot in device units.
///
/// Bin centers are stored as first-center plus fixed spacing so a record can
/// never carry non-uniform spacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRecord {
    /// UTC seconds.
    pub timestamp: f64,
    pub first_bin_hz: f64,
    /// Device-unit dB per 500 kHz bin. `-inf` is a legal (empty) bin.
    pub bin_powers: Vec<f64>,
    /// AGC programmable-gain level, unitless device index.
    pub pga_level: f64,
    /// Board temperature, Kelvin.
    pub temperature: f64,
    /// Set once the AGC gain has been removed.
    #[serde(default)]
    pub agc_adjusted: bool,
}

impl SpectrumRecord {
    pub fn new(
        timestamp: f64,
        first_bin_hz: f64,
        spacing_hz: f64,
        bin_powers: Vec<f64>,
        pga_level: f64,
        temperature: f64,
    ) -> Result<Self, RecordError> {
        if bin_powers.is_empty() {
            return Err(RecordError::EmptySpectrum);
        }
        if (spacing_hz - BIN_SPACING_HZ).abs() > 1.0 {
            return Err(RecordError::BadSpacing(spacing_hz));
        }
        if !timestamp.is_finite() {
            return Err(RecordError::NonFinite("timestamp"));
        }
        if !first_bin_hz.is_finite() {
            return Err(RecordError::NonFinite("first_bin_hz"));
        }
        if !pga_level.is_finite() {
            return Err(RecordError::NonFinite("pga_level"));
        }
        if bin_powers.iter().any(|p| p.is_nan() || *p == f64::INFINITY) {
            return Err(RecordError::NonFinite("bin_powers"));
        }
        if !(TEMP_RANGE_K.0..=TEMP_RANGE_K.1).contains(&temperature) {
            return Err(RecordError::TemperatureOutOfRange(temperature));
        }
        Ok(Self {
            timestamp,
            first_bin_hz,
            bin_powers,
            pga_level,
            temperature,
            agc_adjusted: false,
        })
    }

    pub fn with_timestamp(mut self, timestamp: f64) -> Self {
        self.timestamp = timestamp;
        self
    }

    pub fn len(&self) -> usize {
        self.bin_powers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bin_powers.is_empty()
    }

    pub fn bin_center(&self, idx: usize) -> f64 {
        self.first_bin_hz + idx as f64 * BIN_SPACING_HZ
    }

    pub fn bin_center_freqs(&self) -> Vec<f64> {
        (0..self.bin_powers.len()).map(|i| self.bin_center(i)).collect()
    }
}

/// Per-epoch, per-satellite receiver observables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceiverEpoch {
    pub timestamp: f64,
    /// Constellation-qualified id, e.g. `S131` or `G07`.
    pub sat_id: String,
    /// `None` encodes loss of lock.
    pub cn0: Option<f64>,
    pub elevation_deg: f64,
}

impl ReceiverEpoch {
    pub fn new(
        timestamp: f64,
        sat_id: impl Into<String>,
        cn0: Option<f64>,
        elevation_deg: f64,
    ) -> Result<Self, RecordError> {
        if !timestamp.is_finite() {
            return Err(RecordError::NonFinite("timestamp"));
        }
        if let Some(c) = cn0 {
            if !(CN0_RANGE_DBHZ.0..=CN0_RANGE_DBHZ.1).contains(&c) {
                return Err(RecordError::Cn0OutOfRange(c));
            }
        }
        if !(0.0..=90.0).contains(&elevation_deg) {
            return Err(RecordError::ElevationOutOfRange(elevation_deg));
        }
        Ok(Self {
            timestamp,
            sat_id: sat_id.into(),
            cn0,
            elevation_deg,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectrum_record_validates() {
        assert!(SpectrumRecord::new(0.0, 1573.0e6, 500e3, vec![-100.0], 0.0, 300.0).is_ok());
        assert_eq!(
            SpectrumRecord::new(0.0, 1573.0e6, 500e3, vec![], 0.0, 300.0),
            Err(RecordError::EmptySpectrum)
        );
        assert_eq!(
            SpectrumRecord::new(0.0, 1573.0e6, 250e3, vec![1.0], 0.0, 300.0),
            Err(RecordError::BadSpacing(250e3))
        );
        assert_eq!(
            SpectrumRecord::new(0.0, 1573.0e6, 500e3, vec![1.0], 0.0, 150.0),
            Err(RecordError::TemperatureOutOfRange(150.0))
        );
        // empty bins are fine
        assert!(SpectrumRecord::new(0.0, 1.0e9, 500e3, vec![f64::NEG_INFINITY], 0.0, 300.0).is_ok());
    }

    #[test]
    fn bin_centers_are_uniform() {
        let r = SpectrumRecord::new(0.0, 1573.0e6, 500e3, vec![0.0; 10], 0.0, 300.0).unwrap();
        let f = r.bin_center_freqs();
        assert_eq!(f[0], 1573.0e6);
        assert_eq!(f[9], 1577.5e6);
    }

    #[test]
    fn epoch_cn0_range() {
        assert!(ReceiverEpoch::new(0.0, "S131", Some(45.0), 46.0).is_ok());
        assert!(ReceiverEpoch::new(0.0, "S131", None, 46.0).is_ok());
        assert_eq!(
            ReceiverEpoch::new(0.0, "S131", Some(99.0), 46.0),
            Err(RecordError::Cn0OutOfRange(99.0))
        );
        assert!(ReceiverEpoch::new(0.0, "S131", Some(45.0), 91.0).is_err());
    }
}
