//! Config-driven decoding of vendor spectrum frames.
//!
//! Byte offsets of the spectrum message are receiver and firmware specific,
//! so they live in a [`DecodeLayout`] rather than in code.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::frame::RawFrame;
use super::{RecordError, SpectrumRecord, BIN_SPACING_HZ};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecodeError {
    #[error("frame {found:02x?} does not match layout {expected:02x?}")]
    LayoutMismatch { expected: (u8, u8), found: (u8, u8) },
    #[error("payload has {available} bytes, layout needs {needed}")]
    PayloadTooShort { needed: usize, available: usize },
    #[error("layout yields {0} Hz bin spacing, expected 500 kHz")]
    BadSpacing(f64),
    #[error(transparent)]
    Record(#[from] RecordError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeLayout {
    pub msg_class: u8,
    pub msg_id: u8,
    pub center_freq_hz: f64,
    pub span_hz: f64,
    pub bin_count: usize,
    /// Byte offset of the first (u8) bin value.
    pub bins_offset: usize,
    /// dB per LSB of a bin value.
    pub power_scale: f64,
    /// dB added after scaling; an all-zero payload decodes to this value.
    #[serde(default)]
    pub zero_offset: f64,
    /// Byte offset of the PGA level (u8).
    pub pga_offset: usize,
    /// Optional i16 LE temperature field in hundredths of a Kelvin.
    #[serde(default)]
    pub temp_offset: Option<usize>,
    /// Board temperature used when the frame carries none.
    #[serde(default = "default_temp")]
    pub default_temp_k: f64,
}

fn default_temp() -> f64 {
    300.0
}

impl DecodeLayout {
    /// 10 bins, 1573.0..=1577.5 MHz, single-block payload: bins then PGA.
    pub fn gps_l1_window() -> Self {
        Self {
            msg_class: 0x0A,
            msg_id: 0x31,
            center_freq_hz: 1575.25e6,
            span_hz: 5.0e6,
            bin_count: 10,
            bins_offset: 0,
            power_scale: 0.25,
            zero_offset: 0.0,
            pga_offset: 10,
            temp_offset: None,
            default_temp_k: 300.0,
        }
    }

    pub fn spacing_hz(&self) -> f64 {
        self.span_hz / self.bin_count as f64
    }

    pub fn first_bin_hz(&self) -> f64 {
        self.center_freq_hz - self.span_hz / 2.0 + self.spacing_hz() / 2.0
    }

    fn required_len(&self) -> usize {
        let bins = self.bins_offset + self.bin_count;
        let pga = self.pga_offset + 1;
        let temp = self.temp_offset.map_or(0, |o| o + 2);
        bins.max(pga).max(temp)
    }
}

/// Decode a spectrum frame. The timestamp is left at zero; frames carry no
/// time of their own, so callers attach one with [`SpectrumRecord::with_timestamp`].
pub fn decode_spectrum(frame: &RawFrame, layout: &DecodeLayout) -> Result<SpectrumRecord, DecodeError> {
    if (frame.msg_class, frame.msg_id) != (layout.msg_class, layout.msg_id) {
        return Err(DecodeError::LayoutMismatch {
            expected: (layout.msg_class, layout.msg_id),
            found: (frame.msg_class, frame.msg_id),
        });
    }
    let spacing = layout.spacing_hz();
    if (spacing - BIN_SPACING_HZ).abs() > 1.0 {
        return Err(DecodeError::BadSpacing(spacing));
    }
    let needed = layout.required_len();
    if frame.payload.len() < needed {
        return Err(DecodeError::PayloadTooShort {
            needed,
            available: frame.payload.len(),
        });
    }
    let p = &frame.payload;
    let bins = p[layout.bins_offset..layout.bins_offset + layout.bin_count]
        .iter()
        .map(|&b| b as f64 * layout.power_scale + layout.zero_offset)
        .collect();
    let pga = p[layout.pga_offset] as f64;
    let temp = match layout.temp_offset {
        Some(o) => i16::from_le_bytes([p[o], p[o + 1]]) as f64 / 100.0,
        None => layout.default_temp_k,
    };
    Ok(SpectrumRecord::new(
        0.0,
        layout.first_bin_hz(),
        BIN_SPACING_HZ,
        bins,
        pga,
        temp,
    )?)
}
