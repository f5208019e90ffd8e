use std::path::{Path, PathBuf};

use gnss_rfi::calibration::CalibrationConfig;
use gnss_rfi::regions::RegionConfig;
use gnss_rfi::threshold::{FalsificationConfig, NmConfig};
use serde::{Deserialize, Serialize};

use crate::failure::Failure;

pub const CONFIG_DIR_ENV: &str = "GNSS_RFI_CONFIG_DIR";
pub const CONFIG_FILE_NAME: &str = "gnss-rfi.toml";

/// Everything a run can be configured with; every table is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolConfig {
    pub calibration: CalibrationConfig,
    pub falsification: FalsificationConfig,
    pub simplex: NmConfig,
    pub regions: RegionConfig,
}

impl ToolConfig {
    /// `--config` wins, then `$GNSS_RFI_CONFIG_DIR/gnss-rfi.toml` if present,
    /// then built-in defaults.
    pub fn resolve(explicit: Option<&Path>) -> Result<(Self, Option<PathBuf>), Failure> {
        let path = match explicit {
            Some(p) => Some(p.to_path_buf()),
            None => std::env::var_os(CONFIG_DIR_ENV)
                .map(|d| PathBuf::from(d).join(CONFIG_FILE_NAME))
                .filter(|p| p.is_file()),
        };
        let Some(path) = path else {
            return Ok((Self::default(), None));
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Failure::input(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: Self = toml::from_str(&text)
            .map_err(|e| Failure::input(format!("invalid config {}: {e}", path.display())))?;
        cfg.calibration
            .validate()
            .map_err(|e| Failure::input(format!("invalid config {}: {e}", path.display())))?;
        Ok((cfg, Some(path)))
    }
}
