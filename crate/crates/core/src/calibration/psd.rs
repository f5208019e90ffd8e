//! Signal power spectral densities and per-bin weight tables.

use serde::{Deserialize, Serialize};

use super::CalibrationError;
use crate::numeric::integrate;

/// GPS L1 carrier, Hz.
pub const GPS_L1_HZ: f64 = 1575.42e6;
/// C/A code chipping rate, chips/s.
pub const CA_CHIP_RATE: f64 = 1.023e6;

/// GPS L1 C/A power fraction per 0.5 MHz bin, 1573.0 to 1577.5 MHz.
pub const GPS_L1CA_FRACTIONS: [f64; 10] = [
    0.007, 0.005, 0.020, 0.020, 0.268, 0.492, 0.158, 0.009, 0.019, 0.003,
];
pub const GPS_L1CA_FIRST_BIN_HZ: f64 = 1573.0e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum PsdShape {
    /// BPSK(n) spectrum `Tc * sinc²((f - fc) Tc)`.
    Sinc2 { center_hz: f64, chip_rate: f64 },
    Flat,
    /// All power at one frequency.
    Impulse { freq_hz: f64 },
}

/// Unit-power signal spectrum, normalised to integrate to one over
/// `[band_lo, band_hi]` and zero outside it.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalPsd {
    pub signal_name: String,
    pub band_lo: f64,
    pub band_hi: f64,
    pub shape: PsdShape,
    norm: f64,
}

fn sinc2(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        (px.sin() / px).powi(2)
    }
}

// Pieces per 500 kHz keeps the sinc² quadrature error far below 1e-4.
const PIECES_PER_HZ: f64 = 64.0 / 500e3;

impl SignalPsd {
    pub fn new(name: impl Into<String>, band_lo: f64, band_hi: f64, shape: PsdShape) -> Self {
        let mut psd = Self {
            signal_name: name.into(),
            band_lo,
            band_hi,
            shape,
            norm: 1.0,
        };
        psd.norm = match psd.shape {
            PsdShape::Impulse { .. } => 1.0,
            _ => psd.raw_integral(band_lo, band_hi),
        };
        psd
    }

    /// GPS L1 C/A over the ten bins of the standard weight table.
    pub fn gps_l1ca() -> Self {
        Self::new(
            "gps_l1ca",
            GPS_L1CA_FIRST_BIN_HZ - 250e3,
            GPS_L1CA_FIRST_BIN_HZ + 9.0 * 500e3 + 250e3,
            PsdShape::Sinc2 {
                center_hz: GPS_L1_HZ,
                chip_rate: CA_CHIP_RATE,
            },
        )
    }

    fn raw_density(&self, f: f64) -> f64 {
        match self.shape {
            PsdShape::Sinc2 {
                center_hz,
                chip_rate,
            } => sinc2((f - center_hz) / chip_rate) / chip_rate,
            PsdShape::Flat => 1.0,
            PsdShape::Impulse { .. } => 0.0,
        }
    }

    fn raw_integral(&self, lo: f64, hi: f64) -> f64 {
        let lo = lo.max(self.band_lo);
        let hi = hi.min(self.band_hi);
        if hi <= lo {
            return 0.0;
        }
        match self.shape {
            PsdShape::Impulse { freq_hz } => {
                // half-open so adjacent bins never double count
                if (lo..hi).contains(&freq_hz) {
                    1.0
                } else {
                    0.0
                }
            }
            PsdShape::Flat => hi - lo,
            PsdShape::Sinc2 { .. } => {
                let pieces = ((hi - lo) * PIECES_PER_HZ).ceil() as usize;
                integrate(|f| self.raw_density(f), lo, hi, pieces)
            }
        }
    }

    /// Normalised density, 1/Hz.
    pub fn density(&self, f: f64) -> f64 {
        if f < self.band_lo || f > self.band_hi {
            return 0.0;
        }
        self.raw_density(f) / self.norm
    }

    /// Fraction of unit signal power in `[lo, hi)`.
    pub fn power_in(&self, lo: f64, hi: f64) -> f64 {
        self.raw_integral(lo, hi) / self.norm
    }
}

/// Per-bin weights used to collapse a spectrum into one power value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightTable {
    pub bin_center_hz: Vec<f64>,
    pub fractions: Vec<f64>,
}

impl WeightTable {
    pub fn new(bin_center_hz: Vec<f64>, fractions: Vec<f64>) -> Result<Self, CalibrationError> {
        let t = Self {
            bin_center_hz,
            fractions,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), CalibrationError> {
        if self.bin_center_hz.len() != self.fractions.len() || self.fractions.is_empty() {
            return Err(CalibrationError::InvalidWeights(format!(
                "{} centers vs {} fractions",
                self.bin_center_hz.len(),
                self.fractions.len()
            )));
        }
        if self.fractions.iter().any(|f| !(f.is_finite() && *f >= 0.0)) {
            return Err(CalibrationError::InvalidWeights(
                "fractions must be finite and non-negative".into(),
            ));
        }
        let sum = self.sum();
        if !(0.98..=1.02).contains(&sum) {
            return Err(CalibrationError::InvalidWeights(format!(
                "fractions sum to {sum}, expected within [0.98, 1.02]"
            )));
        }
        Ok(())
    }

    /// The published GPS L1 C/A table, used verbatim (it sums to 1.001).
    pub fn gps_l1ca() -> Self {
        Self {
            bin_center_hz: (0..10)
                .map(|i| GPS_L1CA_FIRST_BIN_HZ + i as f64 * 500e3)
                .collect(),
            fractions: GPS_L1CA_FRACTIONS.to_vec(),
        }
    }

    pub fn sum(&self) -> f64 {
        self.fractions.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.fractions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fractions.is_empty()
    }
}

/// Integrate the signal PSD over each bin.
///
/// The result is not range-checked against [0.98, 1.02]: a PSD whose band is
/// wider than the bins legitimately yields a smaller total.
pub fn compute_weights(
    psd: &SignalPsd,
    bin_centers: &[f64],
    bin_width: f64,
) -> Result<WeightTable, CalibrationError> {
    let (Some(first), Some(last)) = (bin_centers.first(), bin_centers.last()) else {
        return Err(CalibrationError::BandNotCovered {
            band: (psd.band_lo, psd.band_hi),
            bins: (f64::NAN, f64::NAN),
        });
    };
    let cover = (first - bin_width / 2.0, last + bin_width / 2.0);
    // 1 Hz slack for float round-off in the bin edges.
    if psd.band_lo < cover.0 - 1.0 || psd.band_hi > cover.1 + 1.0 {
        return Err(CalibrationError::BandNotCovered {
            band: (psd.band_lo, psd.band_hi),
            bins: cover,
        });
    }
    let fractions = bin_centers
        .iter()
        .map(|c| psd.power_in(c - bin_width / 2.0, c + bin_width / 2.0))
        .collect();
    Ok(WeightTable {
        bin_center_hz: bin_centers.to_vec(),
        fractions,
    })
}
