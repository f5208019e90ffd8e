//! Stage wiring shared by the command-line tool and the tests.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::calibration::MetricPoint;
use crate::ellipse::ThresholdEllipse;
use crate::nominal::{fit_nominal, ElevationBin, NominalError, NominalModel};
use crate::regions::{build_regions, RegionConfig, RegionError, RegionMap};
use crate::threshold::{optimize_threshold, FalsificationConfig, NmConfig, OptimizerReport, ThresholdError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Nominal(#[from] NominalError),
    #[error(transparent)]
    Threshold(#[from] ThresholdError),
    #[error(transparent)]
    Region(#[from] RegionError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detector {
    pub model: NominalModel,
    pub report: OptimizerReport,
    pub regions: RegionMap,
}

/// Optimise a threshold for `model` and freeze the region geometry.
pub fn detector_for_model(
    model: NominalModel,
    fcfg: &FalsificationConfig,
    nm: &NmConfig,
    rcfg: &RegionConfig,
) -> Result<Detector, PipelineError> {
    let report = optimize_threshold(&model, fcfg, nm)?;
    let regions = build_regions(&model, &report.ellipse, rcfg)?;
    Ok(Detector { model, report, regions })
}

/// Fit, optimise and build regions from nominal training points.
pub fn train_detector(
    points: &[MetricPoint],
    elevation: ElevationBin,
    sats: &BTreeSet<String>,
    fcfg: &FalsificationConfig,
    nm: &NmConfig,
    rcfg: &RegionConfig,
) -> Result<Detector, PipelineError> {
    let model = fit_nominal(points, elevation, sats)?;
    detector_for_model(model, fcfg, nm, rcfg)
}

/// Regions from a fixed ellipse, skipping the optimiser.
pub fn regions_for_ellipse(model: &NominalModel, ellipse: &ThresholdEllipse, rcfg: &RegionConfig) -> Result<RegionMap, PipelineError> {
    Ok(build_regions(model, ellipse, rcfg)?)
}
