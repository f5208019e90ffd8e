//! On-disk formats: TOML model, region and report files, and the CSV
//! exchange tables.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::MetricPoint;
use crate::nominal::NominalModel;
use crate::regions::{ClassifiedPoint, Label, RegionMap};
use crate::threshold::{FalsificationConfig, NmConfig, OptimizerReport};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error("model hash mismatch: file records {recorded}, model is {actual}")]
    HashMismatch { recorded: String, actual: String },
}

fn read_text(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn fmt_err(path: &Path, e: impl std::fmt::Display) -> IoError {
    IoError::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    std::fs::write(path, text).map_err(|source| IoError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn load_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, IoError> {
    toml::from_str(&read_text(path)?).map_err(|e| fmt_err(path, e))
}

fn to_toml<T: Serialize>(v: &T) -> String {
    toml::to_string(v).expect("value serialises to TOML")
}

/// Model file: the model plus its content hash for integrity checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub model_hash: String,
    pub model: NominalModel,
}

pub fn save_model(path: &Path, model: &NominalModel) -> Result<(), IoError> {
    let file = ModelFile {
        model_hash: model.content_hash(),
        model: model.clone(),
    };
    write_text(path, &to_toml(&file))
}

pub fn load_model(path: &Path) -> Result<NominalModel, IoError> {
    let file: ModelFile = load_toml(path)?;
    let actual = file.model.content_hash();
    if actual != file.model_hash {
        return Err(IoError::HashMismatch {
            recorded: file.model_hash,
            actual,
        });
    }
    Ok(file.model)
}

pub fn save_regions(path: &Path, regions: &RegionMap) -> Result<(), IoError> {
    write_text(path, &to_toml(regions))
}

pub fn load_regions(path: &Path) -> Result<RegionMap, IoError> {
    load_toml(path)
}

/// Fail unless `regions` were built from `model`.
pub fn check_binding(regions: &RegionMap, model: &NominalModel) -> Result<(), IoError> {
    let actual = model.content_hash();
    if regions.model_hash != actual {
        return Err(IoError::HashMismatch {
            recorded: regions.model_hash.clone(),
            actual,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerReportFile {
    pub model_hash: String,
    pub falsification: FalsificationConfig,
    pub simplex: NmConfig,
    pub result: OptimizerReport,
}

pub fn save_optimizer_report(path: &Path, report: &OptimizerReportFile) -> Result<(), IoError> {
    write_text(path, &to_toml(report))
}

pub fn load_optimizer_report(path: &Path) -> Result<OptimizerReportFile, IoError> {
    load_toml(path)
}

#[derive(Debug, Serialize, Deserialize)]
struct MetricRow {
    t: f64,
    sat: String,
    rx_power_dbw_hz: f64,
    cn0_dbhz: Option<f64>,
    elev_deg: f64,
}

pub fn write_metric_csv<W: Write>(sink: W, points: &[MetricPoint]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    for p in points {
        w.serialize(MetricRow {
            t: p.timestamp,
            sat: p.sat_id.clone(),
            rx_power_dbw_hz: p.rx_power,
            cn0_dbhz: p.cn0,
            elev_deg: p.elevation_deg,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metric_csv<R: Read>(source: R) -> csv::Result<Vec<MetricPoint>> {
    csv::Reader::from_reader(source)
        .deserialize::<MetricRow>()
        .map(|r| r.map(|r| MetricPoint::new(r.t, r.sat, r.rx_power_dbw_hz, r.cn0_dbhz, r.elev_deg)))
        .collect()
}

pub fn read_metric_file(path: &Path) -> Result<Vec<MetricPoint>, IoError> {
    let f = std::fs::File::open(path).map_err(|source| IoError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_metric_csv(f).map_err(|e| fmt_err(path, e))
}

#[derive(Debug, Serialize, Deserialize)]
struct ClassifiedRow {
    t: f64,
    sat: String,
    rx_power: f64,
    cn0: Option<f64>,
    label: Label,
    margin: f64,
}

pub fn write_classified_csv<W: Write>(sink: W, points: &[ClassifiedPoint]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    for c in points {
        w.serialize(ClassifiedRow {
            t: c.point.timestamp,
            sat: c.point.sat_id.clone(),
            rx_power: c.point.rx_power,
            cn0: c.point.cn0,
            label: c.label,
            margin: c.margin,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// `(t, label)` pairs of a classified CSV.
pub fn read_classified_labels(path: &Path) -> Result<Vec<(f64, Label)>, IoError> {
    let f = std::fs::File::open(path).map_err(|source| IoError::Io {
        path: path.display().to_string(),
        source,
    })?;
    csv::Reader::from_reader(f)
        .deserialize::<ClassifiedRow>()
        .map(|r| r.map(|r| (r.t, r.label)).map_err(|e| fmt_err(path, e)))
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct TruthRow {
    t: f64,
    label: Label,
}

pub fn write_truth_csv<W: Write>(sink: W, rows: &[(f64, Label)]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    for &(t, label) in rows {
        w.serialize(TruthRow { t, label })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_truth_file(path: &Path) -> Result<Vec<(f64, Label)>, IoError> {
    let f = std::fs::File::open(path).map_err(|source| IoError::Io {
        path: path.display().to_string(),
        source,
    })?;
    csv::Reader::from_reader(f)
        .deserialize::<TruthRow>()
        .map(|r| r.map(|r| (r.t, r.label)).map_err(|e| fmt_err(path, e)))
        .collect()
}

/// One cell of the plot-data density grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityRow {
    pub i: i64,
    pub j: i64,
    pub count: u64,
    pub fraction: f64,
    pub model_mass: Option<f64>,
    pub label: Option<Label>,
}

pub fn write_density_csv<W: Write>(sink: W, rows: &[DensityRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ellipse::ThresholdEllipse;
    use crate::regions::{build_regions, RegionConfig};

    #[test]
    fn model_file_roundtrip_keeps_hash() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.toml");
        let m = NominalModel::from_params([-200.13, 45.71], [[0.09, 0.01], [0.01, 0.25]]).unwrap();
        save_model(&p, &m).unwrap();
        let back = load_model(&p).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.content_hash(), m.content_hash());

        let text = std::fs::read_to_string(&p).unwrap().replace("-200.13", "-200.12");
        std::fs::write(&p, text).unwrap();
        assert!(matches!(load_model(&p), Err(IoError::HashMismatch { .. })));
    }

    #[test]
    fn region_binding() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.toml");
        let m = NominalModel::from_params([-200.0, 45.0], [[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let other = NominalModel::from_params([-200.0, 45.0], [[1.0, 0.0], [0.0, 2.0]]).unwrap();
        let e = ThresholdEllipse::circle([-200.0, 45.0], 3.0).unwrap();
        let r = build_regions(&m, &e, &RegionConfig::default()).unwrap();
        save_regions(&p, &r).unwrap();
        let back = load_regions(&p).unwrap();
        assert_eq!(back, r);
        assert!(check_binding(&back, &m).is_ok());
        assert!(matches!(check_binding(&back, &other), Err(IoError::HashMismatch { .. })));
    }

    #[test]
    fn metric_csv_signal_loss_is_empty_field() {
        let pts = vec![
            MetricPoint::new(1.0, "S131", -200.5, Some(45.25), 46.0),
            MetricPoint::new(2.0, "S131", -180.0, None, 46.0),
        ];
        let mut buf = Vec::new();
        write_metric_csv(&mut buf, &pts).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), "t,sat,rx_power_dbw_hz,cn0_dbhz,elev_deg");
        assert_eq!(text.lines().nth(2).unwrap(), "2.0,S131,-180.0,,46.0");
        assert_eq!(read_metric_csv(&buf[..]).unwrap(), pts);
    }

    #[test]
    fn truth_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let rows = vec![(0.0, Label::Nominal), (1.0, Label::Spoofing)];
        write_truth_csv(std::fs::File::create(&p).unwrap(), &rows).unwrap();
        assert_eq!(read_truth_file(&p).unwrap(), rows);
        assert!(std::fs::read_to_string(&p).unwrap().starts_with("t,label\n"));
    }
}
