//! Time alignment of receiver epochs with calibrated power samples.

use super::MetricPoint;
use crate::ingest::ReceiverEpoch;

pub const DEFAULT_PAIR_WINDOW_S: f64 = 1.0;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Paired {
    pub points: Vec<MetricPoint>,
    /// Epochs with no power sample inside the window.
    pub dropped: usize,
}

/// Pair each epoch with the nearest power sample within `window` seconds.
///
/// Both inputs must be sorted by time. On equal distance the earlier power
/// sample wins.
pub fn pair_metric(epochs: &[ReceiverEpoch], powers: &[(f64, f64)], window: f64) -> Paired {
    let mut out = Paired::default();
    for e in epochs {
        let idx = powers.partition_point(|p| p.0 < e.timestamp);
        let before = idx.checked_sub(1).map(|i| powers[i]);
        let after = powers.get(idx).copied();
        let best = match (before, after) {
            (Some(b), Some(a)) => {
                if e.timestamp - b.0 <= a.0 - e.timestamp {
                    Some(b)
                } else {
                    Some(a)
                }
            }
            (b, a) => b.or(a),
        };
        match best {
            Some((t, rx)) if (t - e.timestamp).abs() <= window => out.points.push(MetricPoint {
                timestamp: e.timestamp,
                sat_id: e.sat_id.clone(),
                rx_power: rx,
                cn0: e.cn0,
                elevation_deg: e.elevation_deg,
            }),
            _ => out.dropped += 1,
        }
    }
    out
}
