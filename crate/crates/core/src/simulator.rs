//! Ground-truth scenario generator for the metric plane.
//!
//! Interference adds to the receiver noise floor in the linear domain, and
//! every dB of received-power excess above the floor costs one dB of C/N0.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::{synthesize_spectrum, CalibrationConfig, CalibrationError, MetricPoint, WeightTable};
use crate::ingest::{ReceiverEpoch, Record};
use crate::numeric::{db_to_lin, lin_to_db};
use crate::regions::{Label, RegionMap};

/// Tracking is lost below this C/N0 ...
pub const LOSE_LOCK_DBHZ: f64 = 25.0;
/// ... and regained at or above this one.
pub const REACQUIRE_DBHZ: f64 = 27.0;
/// Spoofer captures tracking when it beats the jammer by this margin.
pub const CAPTURE_MARGIN_DB: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScript(String),
    #[error("scenario has no single ramp-jamming event")]
    NoRamp,
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    /// Receiver noise floor N0, dBW/Hz.
    pub rx_power: f64,
    /// Unjammed C/N0, dB-Hz.
    pub cn0: f64,
    pub sigma_rx: f64,
    pub sigma_cn0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    /// Interference `power_db` above the noise floor.
    StepJam { power_db: f64 },
    /// Received-power excess growing at `rate_db_per_s`, optionally capped.
    RampJam {
        rate_db_per_s: f64,
        #[serde(default)]
        peak_db: Option<f64>,
    },
    /// Counterfeit signals at `spoof_power_db` above the noise floor,
    /// optionally alongside a jammer.
    Spoof {
        spoof_cn0: f64,
        spoof_power_db: f64,
        #[serde(default)]
        jam_power_db: Option<f64>,
    },
    Block { attenuation_db: f64 },
}

impl EventKind {
    pub fn truth(&self) -> Label {
        match self {
            EventKind::StepJam { .. } | EventKind::RampJam { .. } => Label::Jamming,
            EventKind::Spoof { .. } => Label::Spoofing,
            EventKind::Block { .. } => Label::Blocked,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t_start: f64,
    pub t_end: f64,
    /// Receiver response delay; shifts the rendered effect, not the truth.
    #[serde(default)]
    pub lag_s: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

impl Event {
    pub fn new(t_start: f64, t_end: f64, kind: EventKind) -> Self {
        Self {
            t_start,
            t_end,
            lag_s: 0.0,
            kind,
        }
    }

    fn truth_active(&self, t: f64) -> bool {
        t >= self.t_start && t < self.t_end
    }

    fn effect_active(&self, t: f64) -> bool {
        t >= self.t_start + self.lag_s && t < self.t_end + self.lag_s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioScript {
    pub duration_s: f64,
    pub epoch_rate_hz: f64,
    #[serde(default = "default_sat")]
    pub sat_id: String,
    #[serde(default = "default_elevation")]
    pub elevation_deg: f64,
    pub baseline: Baseline,
    #[serde(default)]
    pub events: Vec<Event>,
}

fn default_sat() -> String {
    "S131".to_string()
}

fn default_elevation() -> f64 {
    46.0
}

impl ScenarioScript {
    pub fn new(duration_s: f64, epoch_rate_hz: f64, baseline: Baseline, events: Vec<Event>) -> Self {
        Self {
            duration_s,
            epoch_rate_hz,
            sat_id: default_sat(),
            elevation_deg: default_elevation(),
            baseline,
            events,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidScript(m));
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return bad(format!("duration {} must be positive", self.duration_s));
        }
        if !(self.epoch_rate_hz > 0.0 && self.epoch_rate_hz.is_finite()) {
            return bad(format!("epoch rate {} must be positive", self.epoch_rate_hz));
        }
        let b = &self.baseline;
        if !(b.rx_power.is_finite() && b.cn0.is_finite() && b.sigma_rx >= 0.0 && b.sigma_cn0 >= 0.0) {
            return bad("baseline must be finite with non-negative noise".into());
        }
        let mut spans: Vec<(f64, f64)> = Vec::new();
        for (k, e) in self.events.iter().enumerate() {
            if !(e.t_start >= 0.0 && e.t_start < e.t_end && e.t_end <= self.duration_s) {
                return bad(format!("event {k}: need 0 <= t_start < t_end <= duration"));
            }
            if !(e.lag_s >= 0.0) {
                return bad(format!("event {k}: lag must be non-negative"));
            }
            let ok = match e.kind {
                EventKind::StepJam { power_db } => power_db >= 0.0,
                EventKind::RampJam { rate_db_per_s, peak_db } => {
                    rate_db_per_s > 0.0 && peak_db.is_none_or(|p| p >= 0.0)
                }
                EventKind::Spoof {
                    spoof_cn0,
                    spoof_power_db,
                    jam_power_db,
                } => spoof_cn0.is_finite() && spoof_power_db >= 0.0 && jam_power_db.is_none_or(|j| j >= 0.0),
                EventKind::Block { attenuation_db } => attenuation_db >= 0.0,
            };
            if !ok {
                return bad(format!("event {k}: powers must be non-negative and rates positive"));
            }
            spans.push((e.t_start, e.t_end));
        }
        spans.sort_by(|a, b| a.0.total_cmp(&b.0));
        if spans.windows(2).any(|w| w[1].0 < w[0].1) {
            return bad("events overlap in time".into());
        }
        Ok(())
    }

    pub fn epoch_times(&self) -> impl Iterator<Item = f64> + '_ {
        let n = (self.duration_s * self.epoch_rate_hz).round() as usize;
        (0..n).map(move |k| k as f64 / self.epoch_rate_hz)
    }

    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let s: Self = toml::from_str(text).map_err(|e| SimError::InvalidScript(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("script serialises")
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledStream {
    pub points: Vec<MetricPoint>,
    pub truth: Vec<Label>,
}

/// Received-power excess over the noise floor for interference `j_db`
/// above it: `10 log10(1 + 10^(j/10))`.
pub fn excess_db(j_db: f64) -> f64 {
    lin_to_db(1.0 + db_to_lin(j_db))
}

// Noiseless effect of an active event at `t`:
// (rx excess dB, captured cn0 if any, cn0 attenuation dB).
fn event_effect(e: &Event, t: f64) -> (f64, Option<f64>, f64) {
    match e.kind {
        EventKind::StepJam { power_db } => (excess_db(power_db), None, 0.0),
        EventKind::RampJam { rate_db_per_s, peak_db } => {
            let d = rate_db_per_s * (t - e.t_start - e.lag_s);
            (peak_db.map_or(d, |p| d.min(p)).max(0.0), None, 0.0)
        }
        EventKind::Spoof {
            spoof_cn0,
            spoof_power_db,
            jam_power_db,
        } => {
            let jam_lin = jam_power_db.map_or(0.0, db_to_lin);
            let excess = lin_to_db(1.0 + db_to_lin(spoof_power_db) + jam_lin);
            let captured = jam_power_db.is_none_or(|j| spoof_power_db - j >= CAPTURE_MARGIN_DB);
            (excess, captured.then_some(spoof_cn0), 0.0)
        }
        EventKind::Block { attenuation_db } => (0.0, None, attenuation_db),
    }
}

/// Render a script into labelled metric points.
pub fn render(script: &ScenarioScript, seed: u64) -> Result<LabeledStream, SimError> {
    script.validate()?;
    let b = script.baseline;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nx = Normal::new(0.0, b.sigma_rx).expect("sigma validated");
    let ny = Normal::new(0.0, b.sigma_cn0).expect("sigma validated");
    let mut locked = true;
    let mut out = LabeledStream::default();

    for t in script.epoch_times() {
        let truth = script
            .events
            .iter()
            .find(|e| e.truth_active(t))
            .map_or(Label::Nominal, |e| e.kind.truth());
        let (excess, captured, atten) = script
            .events
            .iter()
            .find(|e| e.effect_active(t))
            .map_or((0.0, None, 0.0), |e| event_effect(e, t));

        let rx = b.rx_power + excess + nx.sample(&mut rng);
        let clean_cn0 = captured.unwrap_or(b.cn0 - excess - atten);
        let cn0 = clean_cn0 + ny.sample(&mut rng);

        locked = if locked { cn0 >= LOSE_LOCK_DBHZ } else { cn0 >= REACQUIRE_DBHZ };
        let reported = locked.then_some(cn0.clamp(0.0, 65.0));
        out.points.push(MetricPoint::new(t, script.sat_id.clone(), rx, reported, script.elevation_deg));
        out.truth.push(truth);
    }
    Ok(out)
}

/// Time the noiseless ramp trajectory leaves the threshold ellipse.
///
/// `Ok(None)` when the ramp ends, peaks or the scenario finishes first.
pub fn ramp_crossing_time(script: &ScenarioScript, regions: &RegionMap) -> Result<Option<f64>, SimError> {
    let mut ramps = script
        .events
        .iter()
        .filter(|e| matches!(e.kind, EventKind::RampJam { .. }));
    let (Some(ramp), None) = (ramps.next(), ramps.next()) else {
        return Err(SimError::NoRamp);
    };
    let EventKind::RampJam { rate_db_per_s, peak_db } = ramp.kind else {
        unreachable!()
    };
    let origin = [script.baseline.rx_power, script.baseline.cn0];
    let delta = regions.ellipse.ray_exit(origin, [1.0, -1.0]).unwrap_or(0.0);
    if peak_db.is_some_and(|p| p <= delta) {
        return Ok(None);
    }
    let t = ramp.t_start + ramp.lag_s + delta / rate_db_per_s;
    if t >= ramp.t_end + ramp.lag_s || t >= script.duration_s {
        return Ok(None);
    }
    Ok(Some(t))
}

/// Canonical observable records for a rendered stream: one synthetic
/// spectrum and one epoch line per point.
pub fn to_records(stream: &LabeledStream, cfg: &CalibrationConfig, weights: &WeightTable) -> Result<Vec<Record>, SimError> {
    let mut out = Vec::with_capacity(2 * stream.points.len());
    for p in &stream.points {
        let spec = synthesize_spectrum(p.timestamp, p.rx_power, 0.0, cfg.ref_temp_k.clamp(200.0, 350.0), cfg, weights)?;
        out.push(Record::Spectrum(spec));
        let ep = ReceiverEpoch::new(p.timestamp, p.sat_id.clone(), p.cn0, p.elevation_deg)
            .map_err(|e| SimError::InvalidScript(e.to_string()))?;
        out.push(Record::Epoch(ep));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ellipse::ThresholdEllipse;
    use crate::nominal::NominalModel;
    use crate::regions::{build_regions, RegionConfig};

    fn quiet() -> Baseline {
        Baseline {
            rx_power: -200.0,
            cn0: 45.0,
            sigma_rx: 0.0,
            sigma_cn0: 0.0,
        }
    }

    #[test]
    fn equal_power_costs_three_db() {
        assert!((excess_db(0.0) - 3.0103).abs() < 1e-4);
        let s = ScenarioScript::new(10.0, 1.0, quiet(), vec![Event::new(2.0, 5.0, EventKind::StepJam { power_db: 0.0 })]);
        let out = render(&s, 1).unwrap();
        let p = &out.points[3];
        assert!((p.rx_power + 200.0 - 3.0103).abs() < 1e-4);
        assert!((45.0 - p.cn0.unwrap() - 3.0103).abs() < 1e-4);
        assert_eq!(out.truth[3], Label::Jamming);
        assert_eq!(out.truth[5], Label::Nominal);
    }

    #[test]
    fn twenty_db_step() {
        let b = Baseline { cn0: 50.0, ..quiet() };
        let s = ScenarioScript::new(10.0, 1.0, b, vec![Event::new(2.0, 5.0, EventKind::StepJam { power_db: 20.0 })]);
        let out = render(&s, 1).unwrap();
        let drop = 50.0 - out.points[2].cn0.unwrap();
        assert!((drop - 10.0 * 101f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn no_event_matches_baseline() {
        let b = Baseline {
            sigma_rx: 0.3,
            sigma_cn0: 0.5,
            ..quiet()
        };
        let s = ScenarioScript::new(5000.0, 1.0, b, vec![]);
        let out = render(&s, 3).unwrap();
        let n = out.points.len() as f64;
        let mx = out.points.iter().map(|p| p.rx_power).sum::<f64>() / n;
        let my = out.points.iter().map(|p| p.cn0.unwrap()).sum::<f64>() / n;
        assert!((mx + 200.0).abs() < 3.0 * 0.3 / n.sqrt());
        assert!((my - 45.0).abs() < 3.0 * 0.5 / n.sqrt());
        assert!(out.truth.iter().all(|l| *l == Label::Nominal));
    }

    #[test]
    fn ramp_follows_slope_and_drops_lock() {
        let s = ScenarioScript::new(
            400.0,
            1.0,
            quiet(),
            vec![Event::new(100.0, 400.0, EventKind::RampJam { rate_db_per_s: 0.1, peak_db: None })],
        );
        let out = render(&s, 0).unwrap();
        for p in &out.points {
            if let Some(c) = p.cn0 {
                assert!(((p.rx_power + 200.0) + (c - 45.0)).abs() < 1e-9);
            }
        }
        // 45 - 0.1 (t - 100) < 25 from t = 300 on
        assert!(out.points[299].cn0.is_some());
        assert!(out.points[301].cn0.is_none());
    }

    #[test]
    fn hysteresis() {
        // step pushes cn0 to 26: below 27 but above 25, lock holds
        let s = ScenarioScript::new(
            20.0,
            1.0,
            quiet(),
            vec![
                Event::new(2.0, 6.0, EventKind::Block { attenuation_db: 19.0 }),
                Event::new(6.0, 10.0, EventKind::Block { attenuation_db: 21.0 }),
                Event::new(10.0, 14.0, EventKind::Block { attenuation_db: 19.0 }),
            ],
        );
        let out = render(&s, 0).unwrap();
        assert!(out.points[3].cn0.is_some());
        assert!(out.points[7].cn0.is_none());
        assert!(out.points[11].cn0.is_none(), "26 dB-Hz does not reacquire");
        assert!(out.points[15].cn0.is_some());
        assert_eq!(out.truth[7], Label::Blocked);
    }

    #[test]
    fn spoof_capture_rule() {
        let s = ScenarioScript::new(
            10.0,
            1.0,
            quiet(),
            vec![
                Event::new(0.0, 5.0, EventKind::Spoof {
                    spoof_cn0: 50.0,
                    spoof_power_db: 16.0,
                    jam_power_db: Some(10.0),
                }),
                Event::new(5.0, 10.0, EventKind::Spoof {
                    spoof_cn0: 50.0,
                    spoof_power_db: 7.0,
                    jam_power_db: Some(10.0),
                }),
            ],
        );
        let out = render(&s, 0).unwrap();
        assert_eq!(out.points[1].cn0, Some(50.0));
        let rx = out.points[7].rx_power + 200.0;
        assert!((out.points[7].cn0.unwrap() - (45.0 - rx)).abs() < 1e-12);
        assert!(out.truth.iter().all(|l| *l == Label::Spoofing));
    }

    #[test]
    fn lag_delays_effect_not_truth() {
        let mut e = Event::new(2.0, 5.0, EventKind::StepJam { power_db: 20.0 });
        e.lag_s = 2.0;
        let out = render(&ScenarioScript::new(10.0, 1.0, quiet(), vec![e]), 0).unwrap();
        assert_eq!(out.truth[2], Label::Jamming);
        assert_eq!(out.points[2].rx_power, -200.0);
        assert!(out.points[4].rx_power > -181.0);
        assert_eq!(out.truth[6], Label::Nominal);
        assert!(out.points[6].rx_power > -181.0);
    }

    #[test]
    fn reproducible_and_validated() {
        let b = Baseline {
            sigma_rx: 0.3,
            sigma_cn0: 0.5,
            ..quiet()
        };
        let s = ScenarioScript::new(100.0, 1.0, b, vec![Event::new(10.0, 20.0, EventKind::StepJam { power_db: 5.0 })]);
        assert_eq!(render(&s, 9).unwrap(), render(&s, 9).unwrap());
        let overlap = ScenarioScript::new(
            100.0,
            1.0,
            b,
            vec![
                Event::new(10.0, 20.0, EventKind::StepJam { power_db: 5.0 }),
                Event::new(15.0, 30.0, EventKind::StepJam { power_db: 5.0 }),
            ],
        );
        assert!(render(&overlap, 0).is_err());
    }

    #[test]
    fn crossing_time_geometry() {
        let model = NominalModel::from_params([-200.0, 45.0], [[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let e = ThresholdEllipse::circle([-200.0, 45.0], 3.0).unwrap();
        let regions = build_regions(&model, &e, &RegionConfig::default()).unwrap();
        let ramp = |rate: f64, end: f64| {
            ScenarioScript::new(
                1000.0,
                1.0,
                quiet(),
                vec![Event::new(100.0, end, EventKind::RampJam { rate_db_per_s: rate, peak_db: None })],
            )
        };
        let t = ramp_crossing_time(&ramp(0.1, 1000.0), &regions).unwrap().unwrap();
        assert!((t - 100.0 - 30.0 / 2f64.sqrt()).abs() < 1e-9);
        let fast = ramp_crossing_time(&ramp(1e12, 1000.0), &regions).unwrap().unwrap();
        assert!((fast - 100.0).abs() < 1e-9);
        assert_eq!(ramp_crossing_time(&ramp(0.001, 1000.0), &regions).unwrap(), None);
        assert_eq!(
            ramp_crossing_time(&ScenarioScript::new(10.0, 1.0, quiet(), vec![]), &regions),
            Err(SimError::NoRamp)
        );
    }

    #[test]
    fn script_toml_roundtrip() {
        let mut s = ScenarioScript::new(
            100.0,
            1.0,
            quiet(),
            vec![
                Event::new(10.0, 20.0, EventKind::RampJam { rate_db_per_s: 0.1, peak_db: Some(30.0) }),
                Event::new(30.0, 40.0, EventKind::Spoof {
                    spoof_cn0: 48.0,
                    spoof_power_db: 16.0,
                    jam_power_db: None,
                }),
            ],
        );
        s.events[1].lag_s = 1.5;
        let back = ScenarioScript::from_toml(&s.to_toml()).unwrap();
        assert_eq!(back, s);
        let hand = "duration_s = 60\nepoch_rate_hz = 1\n[baseline]\nrx_power = -200\ncn0 = 45\nsigma_rx = 0\nsigma_cn0 = 0\n[[events]]\nkind = \"step_jam\"\nt_start = 5\nt_end = 10\npower_db = 20\n";
        let parsed = ScenarioScript::from_toml(hand).unwrap();
        assert_eq!(parsed.events[0].kind, EventKind::StepJam { power_db: 20.0 });
    }

    #[test]
    fn records_calibrate_back() {
        let s = ScenarioScript::new(5.0, 1.0, quiet(), vec![]);
        let out = render(&s, 0).unwrap();
        let cfg = CalibrationConfig::default();
        let w = WeightTable::gps_l1ca();
        let recs = to_records(&out, &cfg, &w).unwrap();
        assert_eq!(recs.len(), 10);
        let Record::Spectrum(spec) = &recs[0] else { panic!() };
        let p = crate::calibration::calibrate_record(spec, &cfg, &w).unwrap();
        assert!((p.dbw_hz + 200.0).abs() < 1e-9);
    }
}
