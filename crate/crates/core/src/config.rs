//! Pipeline configuration: a flat `key = value` text format, shared with
//! the dataset metadata sidecar.

use crate::dataset::GridSpec;
use crate::error::{Error, Result};
use crate::nfm::TrainConfig;
use crate::rod::SheetParams;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Parses `key = value` lines. Blank lines and `#` comments are ignored.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::FormatError(format!("line {}: expected 'key = value'", lineno + 1)))?;
        let key = k.trim().to_string();
        if key.is_empty() {
            return Err(Error::FormatError(format!("line {}: empty key", lineno + 1)));
        }
        if map.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(Error::FormatError(format!("line {}: duplicate key '{key}'", lineno + 1)));
        }
    }
    Ok(map)
}

#[derive(Debug, Clone)]
pub struct Config {
    pub output_dir: PathBuf,
    pub seed: u64,
    pub sheet: SheetParams,
    pub n_segments: usize,
    pub grid: GridSpec,
    pub ls_bar_max: f64,
    pub train: TrainConfig,
    /// Manifold cell size δ (m).
    pub manifold_delta: f64,
    /// Penalty-region threshold on l̄_s.
    pub penalty_ls_bar: f64,
    pub mu_s: f64,
    pub intervals: usize,
    /// Crease target C (m) for single plan/run commands.
    pub crease: f64,
    pub hanging_curve_points: usize,
}

impl Default for Config {
    fn default() -> Self {
        // Desk-scale defaults: a paper-like sheet whose workspace reaches
        // the half-fold goals of the scenario matrix.
        let sheet = SheetParams::new(2.083e9, 1.0e-4, 0.21, 800.0, 0.56).unwrap();
        Config {
            output_dir: PathBuf::from("out"),
            seed: 7,
            sheet,
            n_segments: 160,
            grid: GridSpec::new(-7.0, 0.5, 76, 0.05, 4.0, 40).unwrap(),
            ls_bar_max: 6.84,
            train: TrainConfig::default(),
            manifold_delta: 0.002,
            penalty_ls_bar: 0.958,
            mu_s: 0.12,
            intervals: 5,
            crease: 0.25,
            hanging_curve_points: 200,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|_| Error::ConfigError(format!("cannot read config {}", path.display())))?;
        let kv = parse_kv(&text)?;
        Self::from_kv(&kv)
    }

    pub fn from_kv(kv: &BTreeMap<String, String>) -> Result<Self> {
        let mut cfg = Config::default();
        let mut sheet = (
            cfg.sheet.young_modulus,
            cfg.sheet.thickness,
            cfg.sheet.width,
            cfg.sheet.density,
            cfg.sheet.total_length,
            cfg.sheet.gravity,
        );
        let mut grid = (
            cfg.grid.x_min,
            cfg.grid.x_max,
            cfg.grid.x_count,
            cfg.grid.z_min,
            cfg.grid.z_max,
            cfg.grid.z_count,
        );
        for (k, v) in kv {
            let fval = || -> Result<f64> {
                v.parse()
                    .map_err(|_| Error::ConfigError(format!("key '{k}': '{v}' is not a number")))
            };
            let uval = || -> Result<usize> {
                v.parse()
                    .map_err(|_| Error::ConfigError(format!("key '{k}': '{v}' is not an integer")))
            };
            match k.as_str() {
                "output_dir" => cfg.output_dir = PathBuf::from(v),
                "seed" => {
                    cfg.seed = v
                        .parse()
                        .map_err(|_| Error::ConfigError(format!("key 'seed': '{v}' is not an integer")))?
                }
                "sheet_young_modulus" => sheet.0 = fval()?,
                "sheet_thickness" => sheet.1 = fval()?,
                "sheet_width" => sheet.2 = fval()?,
                "sheet_density" => sheet.3 = fval()?,
                "sheet_total_length" => sheet.4 = fval()?,
                "sheet_gravity" => sheet.5 = fval()?,
                "n_segments" => cfg.n_segments = uval()?,
                "grid_x_min" => grid.0 = fval()?,
                "grid_x_max" => grid.1 = fval()?,
                "grid_x_count" => grid.2 = uval()?,
                "grid_z_min" => grid.3 = fval()?,
                "grid_z_max" => grid.4 = fval()?,
                "grid_z_count" => grid.5 = uval()?,
                "ls_bar_max" => cfg.ls_bar_max = fval()?,
                "train_hidden" => {
                    cfg.train.hidden = v
                        .split(',')
                        .map(|s| s.trim().parse::<usize>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| Error::ConfigError(format!("key 'train_hidden': bad layer list '{v}'")))?
                }
                "train_batch_initial" => cfg.train.batch_initial = uval()?,
                "train_batch_max" => cfg.train.batch_max = uval()?,
                "train_stop_mae" => cfg.train.stop_mae = fval()?,
                "train_full_data_mae" => cfg.train.full_data_mae = fval()?,
                "train_acceptable_mae" => cfg.train.acceptable_mae = Some(fval()?),
                "train_max_epochs" => cfg.train.max_epochs = uval()?,
                "manifold_delta" => cfg.manifold_delta = fval()?,
                "manifold_penalty_ls_bar" => cfg.penalty_ls_bar = fval()?,
                "exec_mu_s" => cfg.mu_s = fval()?,
                "exec_intervals" => cfg.intervals = uval()?,
                "exec_crease" => cfg.crease = fval()?,
                "hanging_curve_points" => cfg.hanging_curve_points = uval()?,
                other => {
                    return Err(Error::ConfigError(format!("unknown config key '{other}'")));
                }
            }
        }
        cfg.sheet = SheetParams::with_gravity(sheet.0, sheet.1, sheet.2, sheet.3, sheet.4, sheet.5)?;
        cfg.grid = GridSpec::new(grid.0, grid.1, grid.2, grid.3, grid.4, grid.5)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_segments < crate::rod::MIN_SEGMENTS {
            return Err(Error::ConfigError(format!(
                "n_segments = {} below the floor of {}",
                self.n_segments,
                crate::rod::MIN_SEGMENTS
            )));
        }
        for (name, v) in [
            ("ls_bar_max", self.ls_bar_max),
            ("manifold_delta", self.manifold_delta),
            ("manifold_penalty_ls_bar", self.penalty_ls_bar),
            ("exec_mu_s", self.mu_s),
            ("exec_crease", self.crease),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::ConfigError(format!("{name} must be positive, got {v}")));
            }
        }
        if self.intervals < 1 {
            return Err(Error::ConfigError("exec_intervals must be at least 1".into()));
        }
        if self.crease > self.sheet.total_length {
            return Err(Error::ConfigError(format!(
                "exec_crease {} exceeds the sheet length {}",
                self.crease, self.sheet.total_length
            )));
        }
        if self.hanging_curve_points < 10 {
            return Err(Error::ConfigError("hanging_curve_points must be at least 10".into()));
        }
        Ok(())
    }

    pub fn dataset_csv(&self) -> PathBuf {
        self.output_dir.join("dataset.csv")
    }

    pub fn model_path(&self) -> PathBuf {
        self.output_dir.join("model.bin")
    }

    pub fn manifold_csv(&self) -> PathBuf {
        self.output_dir.join("manifold.csv")
    }

    pub fn manifold_ppm(&self) -> PathBuf {
        self.output_dir.join("manifold_lambda.ppm")
    }

    pub fn hanging_curve_csv(&self) -> PathBuf {
        self.output_dir.join("hanging_curve.csv")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_basic_kv() {
        let kv = parse_kv("a = 1\n# comment\n\nb=two words \n").unwrap();
        assert_eq!(kv["a"], "1");
        assert_eq!(kv["b"], "two words");
        assert!(parse_kv("no equals sign").is_err());
        assert!(parse_kv("a = 1\na = 2").is_err());
    }

    #[test]
    fn config_roundtrip_and_unknown_key() {
        let text = "seed = 42\nsheet_total_length = 0.3\nexec_crease = 0.2\ntrain_hidden = 32,16\n";
        let cfg = Config::from_kv(&parse_kv(text).unwrap()).unwrap();
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.sheet.total_length, 0.3);
        assert_eq!(cfg.train.hidden, vec![32, 16]);

        let bad = parse_kv("no_such_key = 1\n").unwrap();
        assert!(matches!(Config::from_kv(&bad), Err(Error::ConfigError(_))));
    }

    #[test]
    fn config_rejects_bad_values() {
        let bad = parse_kv("exec_mu_s = -0.5\n").unwrap();
        assert!(Config::from_kv(&bad).is_err());
        let bad = parse_kv("n_segments = 5\n").unwrap();
        assert!(Config::from_kv(&bad).is_err());
        let bad = parse_kv("exec_crease = 99\n").unwrap();
        assert!(Config::from_kv(&bad).is_err());
    }
}
