//! Batch sampling of fold equilibria over an (x̄, z̄) grid, input
//! standardization statistics, and the on-disk dataset format.
//!
//! Samples are generated column by column: within a column the z̄ sweep is
//! sequential so each solve warm-starts from its neighbor, and each
//! column's bottom pose is chained from the neighboring column. Columns
//! are independent after their bottom states exist, so they may run in
//! parallel without affecting the output bytes.

use crate::error::{Error, Result};
use crate::rod::{RodState, SheetParams};
use crate::scaling;
use crate::solver::{self, FoldSample};
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

pub const FORMAT_VERSION: u32 = 1;

/// Paper-scale cutoff on the normalized suspended length.
pub const DEFAULT_LS_BAR_MAX: f64 = 6.84;

/// Uniform non-dimensional sampling grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub x_count: usize,
    pub z_min: f64,
    pub z_max: f64,
    pub z_count: usize,
}

impl GridSpec {
    pub fn new(x_min: f64, x_max: f64, x_count: usize, z_min: f64, z_max: f64, z_count: usize) -> Result<Self> {
        if x_count < 1 || z_count < 1 {
            return Err(Error::OutOfRange("grid counts must be at least 1".into()));
        }
        if !(x_min <= x_max && z_min <= z_max) || !(x_min.is_finite() && z_max.is_finite()) {
            return Err(Error::OutOfRange("grid ranges are invalid".into()));
        }
        if z_min < 0.0 {
            return Err(Error::OutOfRange("z̄ range must be non-negative".into()));
        }
        Ok(GridSpec { x_min, x_max, x_count, z_min, z_max, z_count })
    }

    pub fn x_values(&self) -> Vec<f64> {
        linspace(self.x_min, self.x_max, self.x_count)
    }

    pub fn z_values(&self) -> Vec<f64> {
        linspace(self.z_min, self.z_max, self.z_count)
    }

    pub fn x_spacing(&self) -> f64 {
        if self.x_count > 1 {
            (self.x_max - self.x_min) / (self.x_count - 1) as f64
        } else {
            1.0
        }
    }

    pub fn z_spacing(&self) -> f64 {
        if self.z_count > 1 {
            (self.z_max - self.z_min) / (self.z_count - 1) as f64
        } else {
            1.0
        }
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

#[derive(Debug, Clone)]
pub struct DatasetMeta {
    pub format_version: u32,
    pub n_samples: usize,
    pub ls_bar_max: f64,
    pub grid: GridSpec,
    /// Mean of (x̄, z̄) over the kept rows.
    pub input_mean: [f64; 2],
    /// Population standard deviation of (x̄, z̄).
    pub input_std: [f64; 2],
    pub params: SheetParams,
    pub n_segments: usize,
    /// Failure-reason counts for dropped grid points.
    pub dropped: BTreeMap<String, usize>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub rows: Vec<FoldSample>,
}

/// Per-channel mean and population standard deviation of the (x̄, z̄)
/// inputs.
pub fn standardization_stats(rows: &[FoldSample]) -> Result<([f64; 2], [f64; 2])> {
    if rows.len() < 2 {
        return Err(Error::OutOfRange(format!("need at least 2 rows, have {}", rows.len())));
    }
    let n = rows.len() as f64;
    let mut mean = [0.0f64; 2];
    for r in rows {
        let nd = r
            .nondim
            .ok_or_else(|| Error::InvariantViolation("row lacks non-dimensional fields".into()))?;
        mean[0] += nd.x_bar;
        mean[1] += nd.z_bar;
    }
    mean[0] /= n;
    mean[1] /= n;
    let mut var = [0.0f64; 2];
    for r in rows {
        let nd = r.nondim.unwrap();
        var[0] += (nd.x_bar - mean[0]).powi(2);
        var[1] += (nd.z_bar - mean[1]).powi(2);
    }
    let std = [(var[0] / n).sqrt(), (var[1] / n).sqrt()];
    for (c, s) in std.iter().enumerate() {
        if *s <= 0.0 || !s.is_finite() {
            return Err(Error::DegenerateChannel(format!("channel {c} has σ = {s}")));
        }
    }
    Ok((mean, std))
}

struct ColumnOutcome {
    rows: Vec<FoldSample>,
    dropped: Vec<(&'static str, usize)>,
}

/// Reason a grid point produced no row.
fn classify(err: &Error) -> &'static str {
    match err {
        Error::NoRoot { .. } => "no_root",
        Error::NoConvergence { .. } => "no_convergence",
        Error::FullLiftOff => "full_lift_off",
        Error::Penetration(_) => "penetration",
        Error::OutOfRange(_) => "beyond_reach",
        _ => "other",
    }
}

fn sweep_column(
    x_bar: f64,
    z_values: &[f64],
    params: &SheetParams,
    n_segments: usize,
    lgb: f64,
    ls_bar_max: f64,
    bottom: Option<(f64, RodState)>,
) -> ColumnOutcome {
    let mut out = ColumnOutcome { rows: Vec::new(), dropped: Vec::new() };
    let length = params.total_length;
    let dl = length / n_segments as f64;
    let mut warm: Option<(f64, RodState)> = bottom;
    for &z_bar in z_values {
        let (x, z) = (x_bar * lgb, z_bar * lgb);
        // Geometric prechecks avoid burning solver time on hopeless poses.
        if x_bar >= -1e-9 {
            out.dropped.push(("infeasible_pose", 1));
            continue;
        }
        let l_min = solver::minimal_suspended_length(x, z).unwrap_or(f64::INFINITY);
        if l_min > length - 3.0 * dl {
            out.dropped.push(("beyond_reach", 1));
            continue;
        }
        if l_min / lgb > ls_bar_max {
            out.dropped.push(("ls_beyond_cutoff", 1));
            continue;
        }
        let hint = warm.as_ref().map(|(a, _)| *a);
        let init = warm.as_ref().map(|(_, s)| s);
        match solver::find_zero_moment_alpha_hinted(x, z, params, n_segments, hint, init) {
            Ok((alpha, sol)) => {
                let pose = solver::GraspPose::new(x, z, alpha).expect("validated inputs");
                match solver::extract_sample(&sol, &pose, params) {
                    Ok(mut sample) => {
                        warm = Some((alpha, sol.state.clone()));
                        if scaling::nondimensionalize(&mut sample, lgb).is_err() {
                            out.dropped.push(("other", 1));
                            continue;
                        }
                        if sample.nondim.unwrap().ls_bar > ls_bar_max {
                            out.dropped.push(("ls_beyond_cutoff", 1));
                            continue;
                        }
                        out.rows.push(sample);
                    }
                    Err(e) => out.dropped.push((classify(&e), 1)),
                }
            }
            Err(e) => out.dropped.push((classify(&e), 1)),
        }
    }
    out
}

/// Generates a dataset over the grid. `jobs = 0` uses all cores.
pub fn generate(
    params: &SheetParams,
    n_segments: usize,
    grid: &GridSpec,
    ls_bar_max: f64,
    jobs: usize,
) -> Result<Dataset> {
    if !(ls_bar_max > 0.0) {
        return Err(Error::NonPositiveInput(format!("ls_bar_max = {ls_bar_max}")));
    }
    let lgb = params.gravito_bending_length();
    let xs = grid.x_values();
    let zs = grid.z_values();

    // Phase 1: chain the bottom pose of each column, right to left, so
    // every column has a warm start in the fold branch.
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[b].partial_cmp(&xs[a]).unwrap());
    let mut bottoms: Vec<Option<(f64, RodState)>> = vec![None; xs.len()];
    let mut chain: Option<(f64, RodState)> = None;
    for &ci in &order {
        let x_bar = xs[ci];
        if x_bar >= -1e-9 {
            continue;
        }
        let (x, z) = (x_bar * lgb, zs[0].max(1e-3) * lgb);
        let l_min = solver::minimal_suspended_length(x, z).unwrap_or(f64::INFINITY);
        if l_min > params.total_length - 3.0 * params.total_length / n_segments as f64
            || l_min / lgb > ls_bar_max
        {
            continue;
        }
        let hint = chain.as_ref().map(|(a, _)| *a);
        let init = chain.as_ref().map(|(_, s)| s);
        if let Ok((alpha, sol)) =
            solver::find_zero_moment_alpha_hinted(x, z, params, n_segments, hint, init)
        {
            chain = Some((alpha, sol.state.clone()));
            bottoms[ci] = Some((alpha, sol.state));
        }
    }

    // Phase 2: sweep columns upward in parallel.
    let run = |ci: usize| {
        sweep_column(
            xs[ci],
            &zs,
            params,
            n_segments,
            lgb,
            ls_bar_max,
            bottoms[ci].clone(),
        )
    };
    let outcomes: Vec<ColumnOutcome> = if jobs == 1 {
        (0..xs.len()).map(run).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::ConfigError(format!("thread pool: {e}")))?;
        pool.install(|| {
            use rayon::prelude::*;
            (0..xs.len()).into_par_iter().map(run).collect()
        })
    };

    let mut rows = Vec::new();
    let mut dropped: BTreeMap<String, usize> = BTreeMap::new();
    for oc in outcomes {
        rows.extend(oc.rows);
        for (reason, k) in oc.dropped {
            *dropped.entry(reason.to_string()).or_insert(0) += k;
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (input_mean, input_std) = standardization_stats(&rows)?;
    Ok(Dataset {
        meta: DatasetMeta {
            format_version: FORMAT_VERSION,
            n_samples: rows.len(),
            ls_bar_max,
            grid: *grid,
            input_mean,
            input_std,
            params: *params,
            n_segments,
            dropped,
        },
        rows,
    })
}

/// Re-solves selected rows at their recorded (x, z, α) and returns the
/// largest |λ_resolved − λ_recorded|.
pub fn audit_rows(ds: &Dataset, indices: &[usize]) -> Result<f64> {
    let mut worst = 0.0f64;
    for &i in indices {
        let row = ds
            .rows
            .get(i)
            .ok_or_else(|| Error::OutOfRange(format!("row {i} out of bounds")))?;
        let pose = solver::GraspPose::new(row.x, row.z, row.alpha)?;
        let sol = solver::solve_equilibrium(&pose, &ds.meta.params, ds.meta.n_segments, None)?;
        let sample = solver::extract_sample(&sol, &pose, &ds.meta.params)?;
        worst = worst.max((sample.lambda - row.lambda).abs());
    }
    Ok(worst)
}

fn meta_path(csv_path: &Path) -> PathBuf {
    let mut p = csv_path.as_os_str().to_owned();
    p.push(".meta");
    PathBuf::from(p)
}

impl Dataset {
    /// Writes the CSV (`lambda,alpha,ls_bar,x_bar,z_bar`) and the sidecar
    /// metadata file `<csv>.meta`.
    pub fn save(&self, csv_path: &Path) -> Result<()> {
        if let Some(dir) = csv_path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
        let mut f = std::fs::File::create(csv_path)?;
        writeln!(f, "lambda,alpha,ls_bar,x_bar,z_bar")?;
        for r in &self.rows {
            let nd = r
                .nondim
                .ok_or_else(|| Error::InvariantViolation("row lacks non-dimensional fields".into()))?;
            writeln!(
                f,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.lambda, r.alpha, nd.ls_bar, nd.x_bar, nd.z_bar
            )?;
        }
        drop(f);

        let m = &self.meta;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        kv("format_version", m.format_version.to_string());
        kv("n_samples", m.n_samples.to_string());
        kv("ls_bar_max", format!("{:.16e}", m.ls_bar_max));
        kv("grid_x_min", format!("{:.16e}", m.grid.x_min));
        kv("grid_x_max", format!("{:.16e}", m.grid.x_max));
        kv("grid_x_count", m.grid.x_count.to_string());
        kv("grid_z_min", format!("{:.16e}", m.grid.z_min));
        kv("grid_z_max", format!("{:.16e}", m.grid.z_max));
        kv("grid_z_count", m.grid.z_count.to_string());
        kv("mean_x_bar", format!("{:.16e}", m.input_mean[0]));
        kv("mean_z_bar", format!("{:.16e}", m.input_mean[1]));
        kv("std_x_bar", format!("{:.16e}", m.input_std[0]));
        kv("std_z_bar", format!("{:.16e}", m.input_std[1]));
        kv("sheet_young_modulus", format!("{:.16e}", m.params.young_modulus));
        kv("sheet_thickness", format!("{:.16e}", m.params.thickness));
        kv("sheet_width", format!("{:.16e}", m.params.width));
        kv("sheet_density", format!("{:.16e}", m.params.density));
        kv("sheet_total_length", format!("{:.16e}", m.params.total_length));
        kv("sheet_gravity", format!("{:.16e}", m.params.gravity));
        kv("n_segments", m.n_segments.to_string());
        for (reason, count) in &m.dropped {
            kv(&format!("dropped_{reason}"), count.to_string());
        }
        std::fs::write(meta_path(csv_path), s)?;
        Ok(())
    }

    pub fn load(csv_path: &Path) -> Result<Self> {
        let meta = Self::load_meta(&meta_path(csv_path))?;
        let f = std::fs::File::open(csv_path)?;
        let mut lines = BufReader::new(f).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::FormatError("empty dataset file".into()))??;
        if header.trim() != "lambda,alpha,ls_bar,x_bar,z_bar" {
            return Err(Error::FormatError(format!("unexpected header '{header}'")));
        }
        let lgb = meta.params.gravito_bending_length();
        let mut rows = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::FormatError(format!("unparseable row {}", i + 2)))?;
            if vals.len() != 5 {
                return Err(Error::FormatError(format!(
                    "row {} has {} fields, expected 5",
                    i + 2,
                    vals.len()
                )));
            }
            let (lambda, alpha, ls_bar, x_bar, z_bar) = (vals[0], vals[1], vals[2], vals[3], vals[4]);
            if !vals.iter().all(|v| v.is_finite()) {
                return Err(Error::InvariantViolation(format!("non-finite value on row {}", i + 2)));
            }
            if lambda < 0.0 {
                return Err(Error::InvariantViolation(format!("negative λ on row {}", i + 2)));
            }
            if ls_bar > meta.ls_bar_max * (1.0 + 1e-12) {
                return Err(Error::InvariantViolation(format!(
                    "l̄_s = {ls_bar} beyond the cutoff {} on row {}",
                    meta.ls_bar_max,
                    i + 2
                )));
            }
            if !seen.insert((x_bar.to_bits(), z_bar.to_bits())) {
                return Err(Error::InvariantViolation(format!(
                    "duplicate (x̄, z̄) on row {}",
                    i + 2
                )));
            }
            rows.push(FoldSample {
                // Forces are not persisted; only their ratio λ is.
                tangential_force: f64::NAN,
                normal_force: f64::NAN,
                alpha,
                suspended_length: ls_bar * lgb,
                x: x_bar * lgb,
                z: z_bar * lgb,
                lambda,
                nondim: Some(solver::NondimSample { x_bar, z_bar, ls_bar }),
                degenerate_flat: false,
            });
        }
        if rows.len() != meta.n_samples {
            return Err(Error::FormatError(format!(
                "row count {} disagrees with metadata n_samples {}",
                rows.len(),
                meta.n_samples
            )));
        }
        Ok(Dataset { meta, rows })
    }

    fn load_meta(path: &Path) -> Result<DatasetMeta> {
        let text = std::fs::read_to_string(path)
            .map_err(|_| Error::MissingArtifact(format!("metadata sidecar {}", path.display())))?;
        let kv = crate::config::parse_kv(&text)?;
        let get = |k: &str| -> Result<&String> {
            kv.get(k)
                .ok_or_else(|| Error::FormatError(format!("metadata missing key '{k}'")))
        };
        let f = |k: &str| -> Result<f64> {
            get(k)?
                .parse()
                .map_err(|_| Error::FormatError(format!("metadata key '{k}' is not a number")))
        };
        let u = |k: &str| -> Result<usize> {
            get(k)?
                .parse()
                .map_err(|_| Error::FormatError(format!("metadata key '{k}' is not an integer")))
        };
        let version: u32 = get("format_version")?
            .parse()
            .map_err(|_| Error::FormatError("bad format_version".into()))?;
        if version != FORMAT_VERSION {
            return Err(Error::VersionMismatch { found: version, expected: FORMAT_VERSION });
        }
        let grid = GridSpec::new(
            f("grid_x_min")?,
            f("grid_x_max")?,
            u("grid_x_count")?,
            f("grid_z_min")?,
            f("grid_z_max")?,
            u("grid_z_count")?,
        )?;
        let params = SheetParams::with_gravity(
            f("sheet_young_modulus")?,
            f("sheet_thickness")?,
            f("sheet_width")?,
            f("sheet_density")?,
            f("sheet_total_length")?,
            f("sheet_gravity")?,
        )?;
        let mut dropped = BTreeMap::new();
        for (k, v) in &kv {
            if let Some(reason) = k.strip_prefix("dropped_") {
                dropped.insert(
                    reason.to_string(),
                    v.parse()
                        .map_err(|_| Error::FormatError(format!("bad count for '{k}'")))?,
                );
            }
        }
        Ok(DatasetMeta {
            format_version: version,
            n_samples: u("n_samples")?,
            ls_bar_max: f("ls_bar_max")?,
            grid,
            input_mean: [f("mean_x_bar")?, f("mean_z_bar")?],
            input_std: [f("std_x_bar")?, f("std_z_bar")?],
            params,
            n_segments: u("n_segments")?,
            dropped,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::NondimSample;

    fn sample(x_bar: f64, z_bar: f64, lambda: f64) -> FoldSample {
        FoldSample {
            tangential_force: lambda,
            normal_force: 1.0,
            alpha: 0.3,
            suspended_length: 1.0,
            x: x_bar,
            z: z_bar,
            lambda,
            nondim: Some(NondimSample { x_bar, z_bar, ls_bar: 1.0 }),
            degenerate_flat: false,
        }
    }

    #[test]
    fn stats_two_points() {
        let rows = vec![sample(0.0, 0.0, 0.1), sample(2.0, 2.0, 0.2)];
        let (mean, std) = standardization_stats(&rows).unwrap();
        assert_eq!(mean, [1.0, 1.0]);
        assert_eq!(std, [1.0, 1.0]);
    }

    #[test]
    fn stats_shuffle_invariant_and_standardized_moments() {
        let rows: Vec<FoldSample> = (0..25)
            .map(|i| sample(-3.0 + 0.2 * i as f64, 0.1 * (i as f64).sin() + 1.0, 0.1))
            .collect();
        let (mean, std) = standardization_stats(&rows).unwrap();
        let mut shuffled = rows.clone();
        shuffled.reverse();
        shuffled.swap(3, 17);
        let (mean2, std2) = standardization_stats(&shuffled).unwrap();
        assert_eq!(mean, mean2);
        assert_eq!(std, std2);
        // Standardized columns have zero mean, unit std.
        for c in 0..2 {
            let vals: Vec<f64> = rows
                .iter()
                .map(|r| {
                    let nd = r.nondim.unwrap();
                    let v = if c == 0 { nd.x_bar } else { nd.z_bar };
                    (v - mean[c]) / std[c]
                })
                .collect();
            let m: f64 = vals.iter().sum::<f64>() / vals.len() as f64;
            let s: f64 = (vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / vals.len() as f64).sqrt();
            assert!(m.abs() < 1e-12);
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn stats_degenerate_channel() {
        let rows = vec![sample(1.0, 0.0, 0.1), sample(1.0, 1.0, 0.2)];
        assert!(matches!(
            standardization_stats(&rows),
            Err(Error::DegenerateChannel(_))
        ));
    }

    #[test]
    fn grid_spec_values() {
        let g = GridSpec::new(-4.0, 2.0, 61, 0.0, 4.0, 41).unwrap();
        assert_eq!(g.x_values().len(), 61);
        assert!((g.x_spacing() - 0.1).abs() < 1e-12);
        assert!((g.z_spacing() - 0.1).abs() < 1e-12);
        assert!(GridSpec::new(0.0, 1.0, 0, 0.0, 1.0, 5).is_err());
        assert!(GridSpec::new(0.0, 1.0, 5, -1.0, 1.0, 5).is_err());
    }

    fn tiny_dataset() -> Dataset {
        let params = SheetParams::new(2.0e9, 1.0e-4, 0.21, 800.0, 0.35).unwrap();
        let grid = GridSpec::new(-2.2, -0.4, 7, 0.2, 1.4, 5).unwrap();
        generate(&params, 60, &grid, DEFAULT_LS_BAR_MAX, 1).unwrap()
    }

    #[test]
    fn generate_and_roundtrip() {
        let ds = tiny_dataset();
        assert!(ds.rows.len() >= 20, "only {} rows", ds.rows.len());
        for r in &ds.rows {
            assert!(r.lambda >= 0.0);
            let nd = r.nondim.unwrap();
            assert!(nd.ls_bar <= DEFAULT_LS_BAR_MAX);
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.csv");
        ds.save(&path).unwrap();
        let loaded = Dataset::load(&path).unwrap();
        assert_eq!(loaded.rows.len(), ds.rows.len());
        for (a, b) in ds.rows.iter().zip(&loaded.rows) {
            assert_eq!(a.lambda, b.lambda);
            assert_eq!(a.alpha, b.alpha);
            assert_eq!(a.nondim.unwrap().x_bar, b.nondim.unwrap().x_bar);
        }
        // Second save is byte-identical.
        let path2 = dir.path().join("ds2.csv");
        loaded.save(&path2).unwrap();
        let b1 = std::fs::read(&path).unwrap();
        let b2 = std::fs::read(&path2).unwrap();
        assert_eq!(b1, b2);
    }

    #[test]
    fn truncated_and_tampered_files() {
        let ds = tiny_dataset();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.csv");
        ds.save(&path).unwrap();

        // Truncated: fewer rows than metadata claims.
        let text = std::fs::read_to_string(&path).unwrap();
        let truncated: Vec<&str> = text.lines().take(ds.rows.len() / 2).collect();
        std::fs::write(&path, truncated.join("\n") + "\n").unwrap();
        assert!(matches!(Dataset::load(&path), Err(Error::FormatError(_))));

        // Tampered: negative λ.
        ds.save(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let mut fields: Vec<String> = lines[1].split(',').map(String::from).collect();
        fields[0] = "-1.0".into();
        lines[1] = fields.join(",");
        std::fs::write(&path, lines.join("\n") + "\n").unwrap();
        assert!(matches!(Dataset::load(&path), Err(Error::InvariantViolation(_))));

        // Version bump.
        ds.save(&path).unwrap();
        let mp = meta_path(&path);
        let meta_text = std::fs::read_to_string(&mp).unwrap().replace(
            "format_version = 1",
            "format_version = 99",
        );
        std::fs::write(&mp, meta_text).unwrap();
        assert!(matches!(Dataset::load(&path), Err(Error::VersionMismatch { .. })));
    }

    #[test]
    fn single_z_slice_has_single_valley() {
        let ds = tiny_dataset();
        // Pick the most-populated z̄ level and check the λ profile over x̄
        // has a single local minimum.
        let mut by_z: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
        for r in &ds.rows {
            let nd = r.nondim.unwrap();
            by_z.entry(nd.z_bar.to_bits()).or_default().push((nd.x_bar, r.lambda));
        }
        let mut best: Vec<(f64, f64)> = by_z.into_values().max_by_key(|v| v.len()).unwrap();
        best.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        assert!(best.len() >= 4);
        let lams: Vec<f64> = best.iter().map(|p| p.1).collect();
        let minima = lams
            .windows(3)
            .filter(|w| w[1] < w[0] && w[1] < w[2])
            .count();
        assert!(minima <= 1, "λ slice has {minima} interior minima: {lams:?}");
    }

    #[test]
    fn audit_reproduces_lambda() {
        let ds = tiny_dataset();
        let idx: Vec<usize> = (0..ds.rows.len()).step_by(ds.rows.len() / 3).collect();
        let worst = audit_rows(&ds, &idx).unwrap();
        assert!(worst < 1e-4, "audit worst |Δλ| = {worst}");
    }

    #[test]
    fn generation_is_deterministic() {
        let params = SheetParams::new(2.0e9, 1.0e-4, 0.21, 800.0, 0.35).unwrap();
        let grid = GridSpec::new(-1.8, -0.6, 4, 0.3, 1.0, 3).unwrap();
        let a = generate(&params, 60, &grid, DEFAULT_LS_BAR_MAX, 1).unwrap();
        let b = generate(&params, 60, &grid, DEFAULT_LS_BAR_MAX, 2).unwrap();
        assert_eq!(a.rows.len(), b.rows.len());
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ra.lambda.to_bits(), rb.lambda.to_bits());
            assert_eq!(ra.alpha.to_bits(), rb.alpha.to_bits());
        }
    }
}
