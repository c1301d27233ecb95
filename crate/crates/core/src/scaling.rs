//! Unit ↔ non-dimensional conversions and the hanging-plate procedure for
//! estimating the gravito-bending length of a physical sheet.
//!
//! All lengths collapse onto the gravito-bending length
//! L_gb = (E h² / 24 ρ g)^(1/3); after dividing positions and suspended
//! lengths by it, the fold mapping no longer depends on any quantity with
//! units.

use crate::error::{Error, Result};
use crate::planner::{Frame, Trajectory};
use crate::rod::SheetParams;
use crate::solver::{self, FoldSample, NondimSample};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// L_gb = (E·h²/(24·ρ·g))^(1/3).
pub fn gravito_bending_length(young_modulus: f64, thickness: f64, density: f64, gravity: f64) -> Result<f64> {
    for (name, v) in [
        ("young_modulus", young_modulus),
        ("thickness", thickness),
        ("density", density),
        ("gravity", gravity),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::NonPositiveInput(format!("{name} = {v}")));
        }
    }
    Ok((young_modulus * thickness * thickness / (24.0 * density * gravity)).powf(1.0 / 3.0))
}

/// Non-dimensional grasp pose (x̄, z̄, α, l̄_s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NondimPose {
    pub x_bar: f64,
    pub z_bar: f64,
    pub alpha: f64,
    pub ls_bar: f64,
}

/// Fills the sample's (x̄, z̄, l̄_s); λ and α pass through unchanged.
pub fn nondimensionalize(sample: &mut FoldSample, lgb: f64) -> Result<()> {
    if !(lgb.is_finite() && lgb > 0.0) {
        return Err(Error::NonPositiveInput(format!("L_gb = {lgb}")));
    }
    sample.nondim = Some(NondimSample {
        x_bar: sample.x / lgb,
        z_bar: sample.z / lgb,
        ls_bar: sample.suspended_length / lgb,
    });
    Ok(())
}

/// Scales a non-dimensional trajectory's positions by L_gb; α unchanged.
pub fn redimensionalize_trajectory(traj: &Trajectory, lgb: f64) -> Result<Trajectory> {
    if !(lgb.is_finite() && lgb > 0.0) {
        return Err(Error::NonPositiveInput(format!("L_gb = {lgb}")));
    }
    if traj.frame != Frame::NonDimensional {
        return Err(Error::InvariantViolation("trajectory is already dimensional".into()));
    }
    Ok(traj.scaled(lgb, Frame::Dimensional))
}

/// Inverse of `redimensionalize_trajectory`.
pub fn nondimensionalize_trajectory(traj: &Trajectory, lgb: f64) -> Result<Trajectory> {
    if !(lgb.is_finite() && lgb > 0.0) {
        return Err(Error::NonPositiveInput(format!("L_gb = {lgb}")));
    }
    if traj.frame != Frame::Dimensional {
        return Err(Error::InvariantViolation("trajectory is already non-dimensional".into()));
    }
    Ok(traj.scaled(1.0 / lgb, Frame::NonDimensional))
}

/// Hanging-plate measurement: total length L and free-end vertical drop l_h.
#[derive(Debug, Clone, Copy)]
pub struct HangingMeasurement {
    pub total_length: f64,
    pub drop: f64,
}

impl HangingMeasurement {
    pub fn new(total_length: f64, drop: f64) -> Result<Self> {
        if !(total_length.is_finite() && total_length > 0.0) {
            return Err(Error::NonPositiveInput(format!("total_length = {total_length}")));
        }
        if !(drop.is_finite() && drop >= 0.0) {
            return Err(Error::NonPositiveInput(format!("drop = {drop}")));
        }
        if drop >= total_length {
            return Err(Error::OutOfRange(format!(
                "drop {drop} must be strictly less than total length {total_length}"
            )));
        }
        Ok(HangingMeasurement { total_length, drop })
    }

    pub fn epsilon(&self) -> f64 {
        self.drop / self.total_length
    }
}

pub const HANGING_LBAR_MIN: f64 = 0.1;
pub const HANGING_LBAR_MAX: f64 = 20.0;
pub const HANGING_CURVE_POINTS: usize = 200;

/// Monotone table of (L̄, ε): ε = l_h/L of a horizontally clamped plate
/// hanging under its own weight, as a function of L̄ = L/L_gb.
#[derive(Debug, Clone)]
pub struct HangingCurve {
    rows: Vec<(f64, f64)>,
}

impl HangingCurve {
    /// Builds the table by solving the cantilever equilibrium over a
    /// log-spaced range of L̄. The template supplies h, ρ, w, g; the
    /// Young's modulus is adjusted per point to realize each L̄.
    pub fn build_with_template(template: &SheetParams, n_points: usize) -> Result<Self> {
        if n_points < 10 {
            return Err(Error::OutOfRange(format!("n_points = {n_points} < 10")));
        }
        let length = 1.0; // fixed rod length; L̄ realized through E
        let n_segments = 200;
        let log_lo = HANGING_LBAR_MIN.ln();
        let log_hi = HANGING_LBAR_MAX.ln();
        let mut rows = Vec::with_capacity(n_points);
        let mut warm = None;
        for k in 0..n_points {
            let t = k as f64 / (n_points - 1) as f64;
            let l_bar = (log_lo + t * (log_hi - log_lo)).exp();
            let lgb = length / l_bar;
            let e = 24.0 * template.density * template.gravity * lgb.powi(3)
                / (template.thickness * template.thickness);
            let params = SheetParams::with_gravity(
                e,
                template.thickness,
                template.width,
                template.density,
                length,
                template.gravity,
            )?;
            let sol = solver::solve_cantilever(&params, n_segments, warm.as_ref())?;
            let drop = -sol
                .nodes()
                .iter()
                .map(|q| q.z)
                .fold(f64::INFINITY, f64::min);
            rows.push((l_bar, drop / length));
            warm = Some(sol);
        }
        for w in rows.windows(2) {
            if w[1].1 <= w[0].1 {
                return Err(Error::InvariantViolation(format!(
                    "hanging curve not strictly monotone near L̄ = {}",
                    w[1].0
                )));
            }
        }
        Ok(HangingCurve { rows })
    }

    /// Builds with a paper-like template sheet.
    pub fn build(n_points: usize) -> Result<Self> {
        let template = SheetParams::new(1.0e9, 1.0e-4, 0.2, 800.0, 1.0)?;
        Self::build_with_template(&template, n_points)
    }

    pub fn rows(&self) -> &[(f64, f64)] {
        &self.rows
    }

    pub fn epsilon_range(&self) -> (f64, f64) {
        (self.rows.first().unwrap().1, self.rows.last().unwrap().1)
    }

    /// Inverts ε → L̄ by piecewise-linear interpolation on the monotone table.
    pub fn invert(&self, epsilon: f64) -> Result<f64> {
        let (lo, hi) = self.epsilon_range();
        if !(epsilon >= lo && epsilon <= hi) {
            return Err(Error::OutOfRange(format!(
                "ε = {epsilon:.6} outside the tabulated range [{lo:.6}, {hi:.6}]"
            )));
        }
        let idx = self.rows.partition_point(|r| r.1 < epsilon);
        if idx == 0 {
            return Ok(self.rows[0].0);
        }
        let (l0, e0) = self.rows[idx - 1];
        let (l1, e1) = self.rows[idx];
        if e1 == e0 {
            return Ok(l0);
        }
        let t = (epsilon - e0) / (e1 - e0);
        Ok(l0 + t * (l1 - l0))
    }

    /// Forward lookup L̄ → ε by piecewise-linear interpolation.
    pub fn epsilon_at(&self, l_bar: f64) -> Result<f64> {
        let lo = self.rows.first().unwrap().0;
        let hi = self.rows.last().unwrap().0;
        if !(l_bar >= lo && l_bar <= hi) {
            return Err(Error::OutOfRange(format!("L̄ = {l_bar} outside [{lo}, {hi}]")));
        }
        let idx = self.rows.partition_point(|r| r.0 < l_bar);
        if idx == 0 {
            return Ok(self.rows[0].1);
        }
        let (l0, e0) = self.rows[idx - 1];
        let (l1, e1) = self.rows[idx];
        let t = (l_bar - l0) / (l1 - l0);
        Ok(e0 + t * (e1 - e0))
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        writeln!(f, "L_bar,epsilon")?;
        for &(l, e) in &self.rows {
            writeln!(f, "{l:.16e},{e:.16e}")?;
        }
        Ok(())
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        let mut lines = BufReader::new(f).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::FormatError("empty hanging-curve file".into()))??;
        if header.trim() != "L_bar,epsilon" {
            return Err(Error::FormatError(format!("unexpected header '{header}'")));
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split(',');
            let l: f64 = it
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::FormatError(format!("bad L̄ on row {}", i + 2)))?;
            let e: f64 = it
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::FormatError(format!("bad ε on row {}", i + 2)))?;
            rows.push((l, e));
        }
        if rows.len() < 2 {
            return Err(Error::FormatError("hanging curve needs at least 2 rows".into()));
        }
        for w in rows.windows(2) {
            if w[1].0 <= w[0].0 || w[1].1 <= w[0].1 {
                return Err(Error::InvariantViolation("hanging curve rows not monotone".into()));
            }
        }
        Ok(HangingCurve { rows })
    }

    /// Loads the cached table when present, otherwise builds and caches it.
    pub fn load_or_build(cache: &Path, n_points: usize) -> Result<Self> {
        if cache.exists() {
            if let Ok(c) = Self::load_csv(cache) {
                return Ok(c);
            }
        }
        let c = Self::build(n_points)?;
        if let Some(dir) = cache.parent() {
            std::fs::create_dir_all(dir)?;
        }
        c.save_csv(cache)?;
        Ok(c)
    }
}

/// L_gb = L / L̄ with L̄ from inverting the hanging curve at the measured ε.
pub fn estimate_lgb(measurement: &HangingMeasurement, curve: &HangingCurve) -> Result<f64> {
    let l_bar = curve.invert(measurement.epsilon())?;
    Ok(measurement.total_length / l_bar)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula_identity() {
        // E = 24 ρ g, h = 1 → L_gb = 1.
        let rho = 3.7;
        let g = 9.81;
        let lgb = gravito_bending_length(24.0 * rho * g, 1.0, rho, g).unwrap();
        assert!((lgb - 1.0).abs() < 1e-15);
    }

    #[test]
    fn formula_direct_evaluation() {
        // Independent route: exp(ln(x)/3) instead of powf(1/3).
        let (e, h, rho, g) = (6.5e9, 1.0e-4, 800.0, 9.81);
        let lgb = gravito_bending_length(e, h, rho, g).unwrap();
        let x = e * h * h / (24.0 * rho * g);
        let independent = (x.ln() / 3.0).exp();
        assert!((lgb - independent).abs() / independent < 1e-12);
    }

    #[test]
    fn power_laws() {
        let (e, h, rho, g) = (2.0e9, 2.0e-4, 700.0, 9.81);
        let base = gravito_bending_length(e, h, rho, g).unwrap();
        let e2 = gravito_bending_length(2.0 * e, h, rho, g).unwrap();
        assert!((e2 / base - 2f64.powf(1.0 / 3.0)).abs() < 1e-12);
        let h2 = gravito_bending_length(e, 2.0 * h, rho, g).unwrap();
        assert!((h2 / base - 2f64.powf(2.0 / 3.0)).abs() < 1e-12);
        let r2 = gravito_bending_length(e, h, 2.0 * rho, g).unwrap();
        assert!((r2 / base - 2f64.powf(-1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(matches!(
            gravito_bending_length(-1.0, 1.0, 1.0, 1.0),
            Err(Error::NonPositiveInput(_))
        ));
        assert!(matches!(
            gravito_bending_length(1.0, 0.0, 1.0, 1.0),
            Err(Error::NonPositiveInput(_))
        ));
    }

    #[test]
    fn nondimensionalize_arithmetic() {
        let mut s = FoldSample {
            tangential_force: 0.1,
            normal_force: 1.0,
            alpha: 0.5,
            suspended_length: 0.144,
            x: 0.048,
            z: 0.096,
            lambda: 0.1,
            nondim: None,
            degenerate_flat: false,
        };
        nondimensionalize(&mut s, 0.048).unwrap();
        let nd = s.nondim.unwrap();
        assert!((nd.x_bar - 1.0).abs() < 1e-15);
        assert!((nd.z_bar - 2.0).abs() < 1e-15);
        assert!((nd.ls_bar - 3.0).abs() < 1e-15);
        // A4 constant: x = 0.25 m maps to x̄ ≈ 5.208.
        assert!((0.25 / 0.048 - 5.2083).abs() < 1e-3);
    }

    #[test]
    fn measurement_validation() {
        assert!(HangingMeasurement::new(0.297, 0.1).is_ok());
        assert!(HangingMeasurement::new(0.297, 0.297).is_err());
        assert!(HangingMeasurement::new(0.297, 0.4).is_err());
        assert!(HangingMeasurement::new(0.0, 0.0).is_err());
    }
}
