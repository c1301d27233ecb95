//! Discretized neural force manifold with workspace and penalty masks.
//!
//! The manifold is a rectangular grid of δ̄ × δ̄ cells (δ̄ = δ/L_gb) whose
//! per-cell (λ, α, l̄_s) come from evaluating the network at cell
//! midpoints. The workspace marks cells whose midpoint falls near the
//! dataset's sampled grid (occupancy dilated by one dataset cell: exact
//! for grid-sampled data and parameter-free). The penalty mask excludes
//! cells whose predicted suspended length is below the threshold, where
//! high curvature risks plastic deformation.

use super::mlp::MlpModel;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

#[derive(Debug, Clone)]
pub struct Manifold {
    /// Lower-left corner of cell (0, 0), non-dimensional.
    pub x_origin: f64,
    /// Always 0: the substrate plane is a cell boundary.
    pub z_origin: f64,
    /// Cell size δ̄.
    pub cell: f64,
    pub nx: usize,
    pub nz: usize,
    pub lambda: Vec<f64>,
    pub alpha: Vec<f64>,
    pub ls_bar: Vec<f64>,
    pub in_workspace: Vec<bool>,
    pub in_penalty: Vec<bool>,
    pub plannable: Vec<bool>,
    /// Cell holding the flat start pose; always plannable.
    pub start_cell: (usize, usize),
}

impl Manifold {
    pub fn idx(&self, ix: usize, iz: usize) -> usize {
        iz * self.nx + ix
    }

    pub fn midpoint(&self, ix: usize, iz: usize) -> (f64, f64) {
        (
            self.x_origin + (ix as f64 + 0.5) * self.cell,
            self.z_origin + (iz as f64 + 0.5) * self.cell,
        )
    }

    /// Cell containing a point. Points exactly on a vertical boundary are
    /// assigned leftward (so the flat pose x̄ = 0 lands in the start
    /// cell); points on a horizontal boundary are assigned upward (so
    /// z̄ = 0 lands in the bottom row).
    pub fn cell_of(&self, x_bar: f64, z_bar: f64) -> Option<(usize, usize)> {
        let eps = 1e-9 * self.cell;
        let fx = (x_bar - self.x_origin - eps) / self.cell;
        let fz = (z_bar - self.z_origin + eps) / self.cell;
        if fx < 0.0 || fz < 0.0 {
            return None;
        }
        let (ix, iz) = (fx.floor() as usize, fz.floor() as usize);
        if ix >= self.nx || iz >= self.nz {
            return None;
        }
        Some((ix, iz))
    }

    pub fn is_plannable(&self, ix: usize, iz: usize) -> bool {
        self.plannable[self.idx(ix, iz)]
    }

    pub fn lambda_at(&self, ix: usize, iz: usize) -> f64 {
        self.lambda[self.idx(ix, iz)]
    }

    pub fn plannable_count(&self) -> usize {
        self.plannable.iter().filter(|&&p| p).count()
    }

    /// Nearest plannable cell to a point (Euclidean midpoint distance,
    /// ties broken by cell index order).
    pub fn nearest_plannable(&self, x_bar: f64, z_bar: f64) -> Option<(usize, usize)> {
        let mut best: Option<((usize, usize), f64)> = None;
        for iz in 0..self.nz {
            for ix in 0..self.nx {
                if !self.plannable[self.idx(ix, iz)] {
                    continue;
                }
                let (mx, mz) = self.midpoint(ix, iz);
                let d = (mx - x_bar).powi(2) + (mz - z_bar).powi(2);
                match best {
                    Some((_, bd)) if bd <= d => {}
                    _ => best = Some(((ix, iz), d)),
                }
            }
        }
        best.map(|(c, _)| c)
    }

    /// CSV export: one row per cell, `x_bar,z_bar,lambda,alpha,ls_bar,plannable`.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
        let mut f = std::fs::File::create(path)?;
        writeln!(f, "x_bar,z_bar,lambda,alpha,ls_bar,plannable")?;
        for iz in 0..self.nz {
            for ix in 0..self.nx {
                let (x, z) = self.midpoint(ix, iz);
                let k = self.idx(ix, iz);
                writeln!(
                    f,
                    "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                    x,
                    z,
                    self.lambda[k],
                    self.alpha[k],
                    self.ls_bar[k],
                    if self.plannable[k] { 1 } else { 0 }
                )?;
            }
        }
        Ok(())
    }

    /// Rebuilds a manifold from its CSV export. The workspace/penalty
    /// split is not persisted; the loaded masks carry plannability only.
    pub fn load_csv(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)
            .map_err(|_| Error::MissingArtifact(format!("manifold file {}", path.display())))?;
        let mut lines = BufReader::new(f).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::FormatError("empty manifold file".into()))??;
        if header.trim() != "x_bar,z_bar,lambda,alpha,ls_bar,plannable" {
            return Err(Error::FormatError(format!("unexpected header '{header}'")));
        }
        let mut rows: Vec<(f64, f64, f64, f64, f64, bool)> = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 6 {
                return Err(Error::FormatError(format!("row {}: expected 6 fields", i + 2)));
            }
            let num = |s: &str| -> Result<f64> {
                s.trim()
                    .parse()
                    .map_err(|_| Error::FormatError(format!("row {}: bad number '{s}'", i + 2)))
            };
            rows.push((
                num(parts[0])?,
                num(parts[1])?,
                num(parts[2])?,
                num(parts[3])?,
                num(parts[4])?,
                parts[5].trim() == "1",
            ));
        }
        if rows.is_empty() {
            return Err(Error::FormatError("manifold file has no cells".into()));
        }
        let mut xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        xs.dedup();
        let mut zs: Vec<f64> = rows.iter().map(|r| r.1).collect();
        zs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        zs.dedup();
        let (nx, nz) = (xs.len(), zs.len());
        if nx * nz != rows.len() {
            return Err(Error::FormatError(format!(
                "{} rows do not fill a {}x{} grid",
                rows.len(),
                nx,
                nz
            )));
        }
        let cell = if nx > 1 {
            xs[1] - xs[0]
        } else if nz > 1 {
            zs[1] - zs[0]
        } else {
            return Err(Error::FormatError("degenerate 1x1 manifold".into()));
        };
        let x_origin = xs[0] - 0.5 * cell;
        let z_origin = zs[0] - 0.5 * cell;
        let mut m = Manifold {
            x_origin,
            z_origin,
            cell,
            nx,
            nz,
            lambda: vec![0.0; nx * nz],
            alpha: vec![0.0; nx * nz],
            ls_bar: vec![0.0; nx * nz],
            in_workspace: vec![false; nx * nz],
            in_penalty: vec![false; nx * nz],
            plannable: vec![false; nx * nz],
            start_cell: (0, 0),
        };
        for (x, z, lam, al, ls, pl) in rows {
            let (ix, iz) = m
                .cell_of(x, z)
                .ok_or_else(|| Error::FormatError(format!("cell midpoint ({x}, {z}) out of grid")))?;
            let k = m.idx(ix, iz);
            m.lambda[k] = lam;
            m.alpha[k] = al;
            m.ls_bar[k] = ls;
            m.plannable[k] = pl;
            m.in_workspace[k] = pl;
        }
        m.start_cell = start_cell_for(&m)?;
        Ok(m)
    }

    /// Binary portable-pixmap heatmap of λ: plannable cells on a
    /// blue-to-red ramp, masked cells dark gray. Top row is max z̄.
    pub fn save_lambda_ppm(&self, path: &Path) -> Result<()> {
        let mut plannable_lams: Vec<f64> = self
            .plannable
            .iter()
            .zip(&self.lambda)
            .filter(|(p, _)| **p)
            .map(|(_, &l)| l)
            .collect();
        plannable_lams.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let hi = plannable_lams
            .get(plannable_lams.len().saturating_sub(1) * 95 / 100)
            .copied()
            .unwrap_or(1.0)
            .max(1e-9);
        let mut buf = Vec::with_capacity(self.nx * self.nz * 3 + 32);
        buf.extend_from_slice(format!("P6\n{} {}\n255\n", self.nx, self.nz).as_bytes());
        for iz in (0..self.nz).rev() {
            for ix in 0..self.nx {
                let k = self.idx(ix, iz);
                if self.plannable[k] {
                    let t = (self.lambda[k] / hi).clamp(0.0, 1.0);
                    let r = (255.0 * t) as u8;
                    let g = (64.0 * (1.0 - (2.0 * t - 1.0).abs())) as u8;
                    let b = (255.0 * (1.0 - t)) as u8;
                    buf.extend_from_slice(&[r, g, b]);
                } else {
                    buf.extend_from_slice(&[40, 40, 40]);
                }
            }
        }
        std::fs::write(path, buf)?;
        Ok(())
    }
}

fn start_cell_for(m: &Manifold) -> Result<(usize, usize)> {
    // The cell with x̄ ∈ [-δ̄, 0) at the bottom row: the flat grasp pose
    // sits on its right boundary.
    let ix = ((0.0 - m.x_origin) / m.cell).round() as isize - 1;
    let iz = ((0.0 - m.z_origin) / m.cell).round() as isize;
    if ix < 0 || ix as usize >= m.nx || iz < 0 || iz as usize >= m.nz {
        return Err(Error::EmptyWorkspace);
    }
    Ok((ix as usize, iz as usize))
}

/// Evaluates the model on a δ̄ grid covering the dataset region and masks
/// cells outside the workspace or inside the penalty region.
pub fn build_manifold(
    model: &MlpModel,
    ds: &Dataset,
    delta: f64,
    lgb: f64,
    penalty_ls_bar: f64,
) -> Result<Manifold> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::NonPositiveInput(format!("δ = {delta}")));
    }
    if !(lgb > 0.0 && lgb.is_finite()) {
        return Err(Error::NonPositiveInput(format!("L_gb = {lgb}")));
    }
    if !(penalty_ls_bar > 0.0) {
        return Err(Error::NonPositiveInput(format!("penalty threshold = {penalty_ls_bar}")));
    }
    let cell = delta / lgb;
    let grid = &ds.meta.grid;
    let sx = grid.x_spacing();
    let sz = grid.z_spacing();

    // Dataset-grid occupancy, dilated by one dataset cell.
    let mut occupied = vec![false; grid.x_count * grid.z_count];
    for r in &ds.rows {
        let nd = r
            .nondim
            .ok_or_else(|| Error::InvariantViolation("dataset row lacks non-dimensional fields".into()))?;
        let kx = ((nd.x_bar - grid.x_min) / sx).round() as isize;
        let kz = ((nd.z_bar - grid.z_min) / sz).round() as isize;
        if kx >= 0 && (kx as usize) < grid.x_count && kz >= 0 && (kz as usize) < grid.z_count {
            occupied[kz as usize * grid.x_count + kx as usize] = true;
        }
    }
    let mut dilated = occupied.clone();
    for kz in 0..grid.z_count as isize {
        for kx in 0..grid.x_count as isize {
            if occupied[kz as usize * grid.x_count as isize as usize + kx as usize] {
                for dz in -1..=1 {
                    for dx in -1..=1 {
                        let (nxk, nzk) = (kx + dx, kz + dz);
                        if nxk >= 0
                            && (nxk as usize) < grid.x_count
                            && nzk >= 0
                            && (nzk as usize) < grid.z_count
                        {
                            dilated[nzk as usize * grid.x_count + nxk as usize] = true;
                        }
                    }
                }
            }
        }
    }
    let in_hull = |x: f64, z: f64| -> bool {
        let kx = ((x - grid.x_min) / sx).round() as isize;
        let kz = ((z - grid.z_min) / sz).round() as isize;
        kx >= 0
            && (kx as usize) < grid.x_count
            && kz >= 0
            && (kz as usize) < grid.z_count
            && dilated[kz as usize * grid.x_count + kx as usize]
    };

    // Extent: dataset range plus a margin, aligned so x̄ = 0 and z̄ = 0
    // are cell boundaries.
    let x_lo = grid.x_min - 1.5 * sx;
    let x_hi = (grid.x_max + 1.5 * sx).max(cell);
    let z_hi = grid.z_max + 1.5 * sz;
    let nx_neg = ((0.0 - x_lo) / cell).ceil().max(1.0) as usize;
    let nx_pos = (x_hi / cell).ceil().max(1.0) as usize;
    let nx = nx_neg + nx_pos;
    let nz = (z_hi / cell).ceil().max(1.0) as usize;
    let x_origin = -(nx_neg as f64) * cell;
    let z_origin = 0.0;

    let mut m = Manifold {
        x_origin,
        z_origin,
        cell,
        nx,
        nz,
        lambda: vec![0.0; nx * nz],
        alpha: vec![0.0; nx * nz],
        ls_bar: vec![0.0; nx * nz],
        in_workspace: vec![false; nx * nz],
        in_penalty: vec![false; nx * nz],
        plannable: vec![false; nx * nz],
        start_cell: (nx_neg - 1, 0),
    };
    for iz in 0..nz {
        for ix in 0..nx {
            let (x, z) = m.midpoint(ix, iz);
            let out = model.forward(x, z);
            let k = m.idx(ix, iz);
            m.lambda[k] = out[0].max(0.0);
            m.alpha[k] = out[1];
            m.ls_bar[k] = out[2];
            m.in_workspace[k] = in_hull(x, z);
            m.in_penalty[k] = out[2] < penalty_ls_bar;
            m.plannable[k] = m.in_workspace[k] && !m.in_penalty[k];
        }
    }
    // The flat start state is always plannable.
    let sk = m.idx(m.start_cell.0, m.start_cell.1);
    m.plannable[sk] = true;
    if m.plannable_count() == 0 {
        return Err(Error::EmptyWorkspace);
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{DatasetMeta, GridSpec};
    use crate::rod::SheetParams;
    use crate::solver::{FoldSample, NondimSample};
    use std::collections::BTreeMap;

    fn toy_dataset() -> Dataset {
        let params = SheetParams::new(2.0e9, 1e-4, 0.2, 800.0, 0.4).unwrap();
        let grid = GridSpec::new(-2.0, -0.2, 10, 0.2, 1.4, 7).unwrap();
        let mut rows = Vec::new();
        for x in grid.x_values() {
            for z in grid.z_values() {
                // Leave a corner unsampled to give the hull a shape.
                if x < -1.5 && z > 1.0 {
                    continue;
                }
                rows.push(FoldSample {
                    tangential_force: 0.1,
                    normal_force: 1.0,
                    alpha: 0.2,
                    suspended_length: 1.0,
                    x,
                    z,
                    lambda: 0.1,
                    nondim: Some(NondimSample { x_bar: x, z_bar: z, ls_bar: 1.0 + x.abs() }),
                    degenerate_flat: false,
                });
            }
        }
        let (mean, std) = crate::dataset::standardization_stats(&rows).unwrap();
        Dataset {
            meta: DatasetMeta {
                format_version: 1,
                n_samples: rows.len(),
                ls_bar_max: 6.84,
                grid,
                input_mean: mean,
                input_std: std,
                params,
                n_segments: 60,
                dropped: BTreeMap::new(),
            },
            rows,
        }
    }

    fn toy_model(ds: &Dataset) -> MlpModel {
        MlpModel::init(&[8], ds.meta.input_mean, ds.meta.input_std, 5).unwrap()
    }

    #[test]
    fn masks_and_start_cell() {
        let ds = toy_dataset();
        let model = toy_model(&ds);
        let m = build_manifold(&model, &ds, 0.002, 0.05, 0.958).unwrap();
        // Cells far outside the sampled region are unplannable.
        let far = m.cell_of(1.5, 3.0);
        if let Some((ix, iz)) = far {
            assert!(!m.is_plannable(ix, iz));
        }
        // The unsampled corner is outside the hull.
        let (cx, cz) = m.cell_of(-1.9, 1.35).unwrap();
        assert!(!m.in_workspace[m.idx(cx, cz)]);
        // A sampled interior point is in the hull.
        let (ix, iz) = m.cell_of(-1.0, 0.8).unwrap();
        assert!(m.in_workspace[m.idx(ix, iz)]);
        // Start cell plannable, adjacent to the origin, in the bottom row.
        let (sx_, sz_) = m.start_cell;
        assert!(m.is_plannable(sx_, sz_));
        assert_eq!(sz_, 0);
        let (mx, mz) = m.midpoint(sx_, sz_);
        assert!(mx < 0.0 && mx > -m.cell && mz > 0.0 && mz < m.cell);
        // λ is clamped non-negative on every cell.
        assert!(m.lambda.iter().all(|&l| l >= 0.0));
        // Plannable ⇔ in workspace and not in penalty, start excepted.
        for iz in 0..m.nz {
            for ix in 0..m.nx {
                let k = m.idx(ix, iz);
                if (ix, iz) != m.start_cell {
                    assert_eq!(m.plannable[k], m.in_workspace[k] && !m.in_penalty[k]);
                }
            }
        }
    }

    #[test]
    fn cell_boundary_conventions() {
        let ds = toy_dataset();
        let model = toy_model(&ds);
        let m = build_manifold(&model, &ds, 0.002, 0.05, 0.958).unwrap();
        // x̄ = 0 maps leftward into the start cell; z̄ = 0 maps upward.
        let c = m.cell_of(0.0, 0.0).unwrap();
        assert_eq!(c, m.start_cell);
    }

    #[test]
    fn csv_roundtrip_preserves_planning_fields() {
        let ds = toy_dataset();
        let model = toy_model(&ds);
        let m = build_manifold(&model, &ds, 0.002, 0.05, 0.958).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifold.csv");
        m.save_csv(&path).unwrap();
        let l = Manifold::load_csv(&path).unwrap();
        assert_eq!(l.nx, m.nx);
        assert_eq!(l.nz, m.nz);
        assert_eq!(l.start_cell, m.start_cell);
        assert!((l.cell - m.cell).abs() < 1e-12 * m.cell);
        for k in 0..m.lambda.len() {
            assert_eq!(l.lambda[k].to_bits(), m.lambda[k].to_bits());
            assert_eq!(l.plannable[k], m.plannable[k]);
        }
        // Heatmap writes and has the right pixel count.
        let ppm = dir.path().join("m.ppm");
        m.save_lambda_ppm(&ppm).unwrap();
        let bytes = std::fs::read(&ppm).unwrap();
        let header = format!("P6\n{} {}\n255\n", m.nx, m.nz);
        assert!(bytes.starts_with(header.as_bytes()));
        assert_eq!(bytes.len(), header.len() + 3 * m.nx * m.nz);
    }
}
