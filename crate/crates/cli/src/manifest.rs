//! Run manifests and replay.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::runner::{execute, with_threads};
use crate::table::{first_difference, Table, WALL_COLUMN};

pub const VERSION: &str = concat!("y00lab ", env!("CARGO_PKG_VERSION"));

/// Everything needed to re-execute a run. The master seed lives in
/// `config.session`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: String,
    /// CSV file name, relative to the manifest.
    pub csv: String,
    pub excluded_columns: Vec<String>,
    pub config: RunConfig,
}

impl Manifest {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let m: Manifest = toml::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        m.config.validate()?;
        Ok(m)
    }
}

/// Paths written by [`run`].
#[derive(Clone, Debug)]
pub struct RunArtifacts {
    pub csv: PathBuf,
    pub manifest: PathBuf,
    pub table: Table,
}

/// Execute `cfg` and write its CSV and manifest. Nothing is written when
/// the run fails.
pub fn run(cfg: &RunConfig, threads: Option<usize>) -> CliResult<RunArtifacts> {
    cfg.validate()?;
    let table = with_threads(threads, || execute(cfg))??;
    let out = &cfg.output;
    std::fs::create_dir_all(&out.dir)?;
    let csv = out.csv_path();
    let manifest = out.manifest_path();
    std::fs::write(&csv, table.to_csv())?;
    let m = Manifest {
        version: VERSION.into(),
        csv: csv.file_name().expect("file name").to_string_lossy().into_owned(),
        excluded_columns: vec![WALL_COLUMN.into()],
        config: cfg.clone(),
    };
    std::fs::write(&manifest, toml::to_string(&m).expect("manifest serializes"))?;
    Ok(RunArtifacts { csv, manifest, table })
}

/// Re-execute a manifest and compare with its CSV.
pub fn replay(path: &Path, threads: Option<usize>) -> CliResult<Table> {
    let m = Manifest::load(path)?;
    let csv_path = path.parent().unwrap_or(Path::new(".")).join(&m.csv);
    let text = std::fs::read_to_string(&csv_path).map_err(|e| CliError::Validation(format!("{}: {e}", csv_path.display())))?;
    let expected = Table::from_csv(&text)?;
    let actual = with_threads(threads, || execute(&m.config))??;
    match first_difference(&expected, &actual) {
        Some(d) => Err(CliError::ReplayMismatch(d)),
        None => Ok(actual),
    }
}
