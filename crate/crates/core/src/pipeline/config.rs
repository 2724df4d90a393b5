use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::markov::{RtMode, TimeMode};
use crate::synthgen::GeneratorSpec;

use super::PipelineError;

/// Where encoding gets its tertile thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdSource {
    /// Fit on the province's own data.
    Fit,
    /// Read `<thresholds_dir>/<province>/thresholds.csv`.
    Load,
}

impl FromStr for ThresholdSource {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "fit" => Ok(Self::Fit),
            "load" => Ok(Self::Load),
            _ => Err(format!("invalid threshold source {s:?} (expected fit or load)")),
        }
    }
}

impl std::fmt::Display for ThresholdSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Fit => "fit",
            Self::Load => "load",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub xdr: Option<PathBuf>,
    pub catalog: Option<PathBuf>,
    pub out: PathBuf,
    /// Restrict per-province stages to one province.
    pub province: Option<String>,
    pub time_mode: TimeMode,
    pub alpha: f64,
    pub rt_mode: RtMode,
    pub diversity_window: usize,
    pub bins: usize,
    pub repeats: usize,
    pub seed: u64,
    /// Worker threads; 0 means one per core.
    pub threads: usize,
    pub thresholds: ThresholdSource,
    pub thresholds_dir: Option<PathBuf>,
    pub max_missing_rate: f64,
    /// Fraction of full-sequence users held out for testing.
    pub test_fraction: f64,
    pub kmeans_restarts: usize,
    pub forest_trees: usize,
    pub forest_depth: usize,
    pub synth: GeneratorSpec,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            xdr: None,
            catalog: None,
            out: PathBuf::from("out"),
            province: None,
            time_mode: TimeMode::Hour,
            alpha: 0.0,
            rt_mode: RtMode::All,
            diversity_window: 2,
            bins: crate::eval::DEFAULT_BINS,
            repeats: crate::eval::DEFAULT_REPEATS,
            seed: 0,
            threads: 0,
            thresholds: ThresholdSource::Fit,
            thresholds_dir: None,
            max_missing_rate: crate::ingest::DEFAULT_MAX_MISSING_RATE,
            test_fraction: 0.2,
            kmeans_restarts: 50,
            forest_trees: 100,
            forest_depth: 8,
            synth: GeneratorSpec::default(),
        }
    }
}

/// Every key accepted by the config file, in the order the resolved config is written.
pub const CONFIG_KEYS: [&str; 28] = [
    "xdr",
    "catalog",
    "out",
    "province",
    "time_mode",
    "alpha",
    "rt_mode",
    "diversity_window",
    "bins",
    "repeats",
    "seed",
    "threads",
    "thresholds",
    "thresholds_dir",
    "max_missing_rate",
    "test_fraction",
    "kmeans_restarts",
    "forest_trees",
    "forest_depth",
    "synth_users",
    "synth_cells",
    "synth_provinces",
    "synth_extent_km",
    "synth_kappa",
    "synth_routiner",
    "synth_regular",
    "synth_scouter",
    "synth_sparse_fraction",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, PipelineError>
where
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e| PipelineError::Config(format!("{key} = {value:?}: {e}")))
}

fn unit_interval(key: &str, value: &str) -> Result<f64, PipelineError> {
    let v: f64 = parse(key, value)?;
    if !(0.0..=1.0).contains(&v) {
        return Err(PipelineError::Config(format!("{key} = {value}: must lie in [0, 1]")));
    }
    Ok(v)
}

impl PipelineConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), PipelineError> {
        let value = value.trim();
        let path = || (!value.is_empty()).then(|| PathBuf::from(value));
        match key {
            "xdr" => self.xdr = path(),
            "catalog" => self.catalog = path(),
            "out" => self.out = PathBuf::from(value),
            "province" => self.province = (!value.is_empty()).then(|| value.to_string()),
            "time_mode" => self.time_mode = parse(key, value)?,
            "alpha" => self.alpha = unit_interval(key, value)?,
            "rt_mode" => self.rt_mode = parse(key, value)?,
            "diversity_window" => {
                self.diversity_window = parse(key, value)?;
                if self.diversity_window == 0 {
                    return Err(PipelineError::Config("diversity_window must be positive".into()));
                }
            }
            "bins" => {
                self.bins = parse(key, value)?;
                if self.bins == 0 {
                    return Err(PipelineError::Config("bins must be positive".into()));
                }
            }
            "repeats" => {
                self.repeats = parse(key, value)?;
                if self.repeats == 0 {
                    return Err(PipelineError::Config("repeats must be positive".into()));
                }
            }
            "seed" => {
                self.seed = parse(key, value)?;
                self.synth.seed = self.seed;
            }
            "threads" => self.threads = parse(key, value)?,
            "thresholds" => self.thresholds = parse(key, value)?,
            "thresholds_dir" => self.thresholds_dir = path(),
            "max_missing_rate" => self.max_missing_rate = unit_interval(key, value)?,
            "test_fraction" => self.test_fraction = unit_interval(key, value)?,
            "kmeans_restarts" => self.kmeans_restarts = parse(key, value)?,
            "forest_trees" => self.forest_trees = parse(key, value)?,
            "forest_depth" => self.forest_depth = parse(key, value)?,
            "synth_users" => self.synth.n_users = parse(key, value)?,
            "synth_cells" => self.synth.n_cells = parse(key, value)?,
            "synth_provinces" => self.synth.n_provinces = parse(key, value)?,
            "synth_extent_km" => self.synth.grid_extent_km = parse(key, value)?,
            "synth_kappa" => self.synth.coupling = unit_interval(key, value)?,
            "synth_routiner" => self.synth.profile_mix[0] = unit_interval(key, value)?,
            "synth_regular" => self.synth.profile_mix[1] = unit_interval(key, value)?,
            "synth_scouter" => self.synth.profile_mix[2] = unit_interval(key, value)?,
            "synth_sparse_fraction" => self.synth.sparse_fraction = unit_interval(key, value)?,
            _ => return Err(PipelineError::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let opt_path = |p: &Option<PathBuf>| p.as_ref().map_or(String::new(), |p| p.display().to_string());
        Some(match key {
            "xdr" => self.xdr_path().display().to_string(),
            "catalog" => self.catalog_path().display().to_string(),
            "out" => self.out.display().to_string(),
            "province" => self.province.clone().unwrap_or_default(),
            "time_mode" => self.time_mode.to_string(),
            "alpha" => self.alpha.to_string(),
            "rt_mode" => self.rt_mode.to_string(),
            "diversity_window" => self.diversity_window.to_string(),
            "bins" => self.bins.to_string(),
            "repeats" => self.repeats.to_string(),
            "seed" => self.seed.to_string(),
            "threads" => self.threads.to_string(),
            "thresholds" => self.thresholds.to_string(),
            "thresholds_dir" => opt_path(&self.thresholds_dir),
            "max_missing_rate" => self.max_missing_rate.to_string(),
            "test_fraction" => self.test_fraction.to_string(),
            "kmeans_restarts" => self.kmeans_restarts.to_string(),
            "forest_trees" => self.forest_trees.to_string(),
            "forest_depth" => self.forest_depth.to_string(),
            "synth_users" => self.synth.n_users.to_string(),
            "synth_cells" => self.synth.n_cells.to_string(),
            "synth_provinces" => self.synth.n_provinces.to_string(),
            "synth_extent_km" => self.synth.grid_extent_km.to_string(),
            "synth_kappa" => self.synth.coupling.to_string(),
            "synth_routiner" => self.synth.profile_mix[0].to_string(),
            "synth_regular" => self.synth.profile_mix[1].to_string(),
            "synth_scouter" => self.synth.profile_mix[2].to_string(),
            "synth_sparse_fraction" => self.synth.sparse_fraction.to_string(),
            _ => return None,
        })
    }

    /// Applies `key = value` lines; blank lines and `#` comments are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<(), PipelineError> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                PipelineError::Config(format!("line {}: expected `key = value`, got {line:?}", i + 1))
            })?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Input {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        self.apply_text(&text)
    }

    /// The fully resolved configuration as `key = value` lines.
    pub fn to_text(&self) -> String {
        CONFIG_KEYS
            .iter()
            .map(|k| format!("{k} = {}\n", self.get(k).unwrap_or_default()))
            .collect()
    }

    pub fn xdr_path(&self) -> PathBuf {
        self.xdr.clone().unwrap_or_else(|| self.out.join("xdr.csv"))
    }

    pub fn catalog_path(&self) -> PathBuf {
        self.catalog.clone().unwrap_or_else(|| self.out.join("catalog.csv"))
    }

    pub fn ground_truth_path(&self) -> PathBuf {
        self.xdr_path().with_file_name("ground_truth.json")
    }
}
