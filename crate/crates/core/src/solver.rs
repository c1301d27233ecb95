//! Constrained static folding equilibria.
//!
//! Solves the force balance ∂E_el/∂q = F_ext for a rod whose manipulated
//! end is pinned at a grasp pose (position + end-edge tangent angle), with
//! the substrate modeled as unilateral contact at z = 0. Contact nodes are
//! fixed in both x and z: during data generation the flat region is
//! genuinely static under the infinite-friction assumption, so fixing both
//! DOFs there is exact. An active-set loop releases contact nodes whose
//! normal reaction turns negative and re-fixes penetrating nodes.
//!
//! The zero-moment orientation search scans the grasp angle α for the root
//! of the end bending moment M_N = k_b · 2 tan(φ_{N-1}/2) / Δl, then
//! bisects: zero end curvature is equivalent to zero end moment.

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::rod::{self, RodState, SheetParams};

/// Newton residual tolerance as a fraction of the total weight.
pub const RESIDUAL_WEIGHT_FRACTION: f64 = 1e-8;
/// Newton iteration budget per active-set pass.
pub const NEWTON_MAX_ITER: usize = 200;
/// Active-set passes before giving up.
const ACTIVE_SET_MAX_ITER: usize = 60;
/// Free nodes may hover this far below the substrate (fraction of L).
pub const PENETRATION_TOLERANCE_FRACTION: f64 = 1e-9;
/// Coarse scan increment for the zero-moment search: 2 degrees.
pub const ALPHA_SCAN_STEP: f64 = std::f64::consts::PI / 90.0;
/// Bisection width target for the zero-moment search (rad).
pub const ALPHA_BISECTION_TOL: f64 = 1e-4;
/// End-moment tolerance in units of k_b/Δl.
pub const MOMENT_TOL_FRACTION: f64 = 1e-8;
/// Scan range for the zero-moment orientation.
pub const ALPHA_SCAN_MIN: f64 = -0.15;
pub const ALPHA_SCAN_MAX: f64 = std::f64::consts::PI + 0.45;

/// Commanded pose of the manipulated end: position (x, z) and the
/// orientation α of the end-edge tangent, counter-clockwise from +x̂
/// (0 = flat grasp, π = folded over).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspPose {
    pub x: f64,
    pub z: f64,
    pub alpha: f64,
}

impl GraspPose {
    pub fn new(x: f64, z: f64, alpha: f64) -> Result<Self> {
        if !(x.is_finite() && z.is_finite() && alpha.is_finite()) {
            return Err(Error::NonFiniteGeometry(format!("pose ({x}, {z}, {alpha})")));
        }
        if z < 0.0 {
            return Err(Error::OutOfRange(format!("grasp height z = {z} must be >= 0")));
        }
        Ok(GraspPose { x, z, alpha })
    }
}

/// Non-dimensional counterparts of a sample's lengths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NondimSample {
    pub x_bar: f64,
    pub z_bar: f64,
    pub ls_bar: f64,
}

/// One equilibrium record: substrate forces, zero-moment orientation,
/// suspended length, grasp position, and (once filled) the
/// non-dimensional form.
#[derive(Debug, Clone, Copy)]
pub struct FoldSample {
    /// Tangential substrate force magnitude ‖F_x‖ (N).
    pub tangential_force: f64,
    /// Normal substrate force ‖F_z‖ (N).
    pub normal_force: f64,
    /// Grasp orientation (rad), continuous (not wrapped).
    pub alpha: f64,
    /// Suspended arc length (m).
    pub suspended_length: f64,
    pub x: f64,
    pub z: f64,
    /// λ = ‖F_x‖ / ‖F_z‖.
    pub lambda: f64,
    pub nondim: Option<NondimSample>,
    /// Flat start state: zero deformation, λ = 0 by convention.
    pub degenerate_flat: bool,
}

/// Converged constrained equilibrium.
#[derive(Debug, Clone)]
pub struct EquilibriumSolution {
    pub state: RodState,
    /// Per-node substrate contact flags.
    pub contact: Vec<bool>,
    pub contact_count: usize,
    /// Per-node constraint reactions (zero on free nodes).
    pub reactions: Vec<Vec2>,
    /// Total reaction applied by the gripper on the two pinned end nodes.
    pub grasp_reaction: Vec2,
    /// Discrete end bending moment k_b · 2 tan(φ_{N-1}/2) / Δl (N·m).
    pub end_moment: f64,
    /// Final Newton residual norm (N).
    pub residual: f64,
    pub degenerate_flat: bool,
}

impl EquilibriumSolution {
    /// Index of the connective node: last node of the contiguous contact
    /// run anchored at the far end.
    pub fn connective_node(&self) -> Option<usize> {
        if !self.contact.first().copied().unwrap_or(false) {
            return None;
        }
        let mut c = 0;
        for (i, &flag) in self.contact.iter().enumerate() {
            if flag {
                c = i;
            } else {
                break;
            }
        }
        Some(c)
    }

    pub fn suspended_length(&self) -> f64 {
        match self.connective_node() {
            Some(c) => (self.state.n_segments() - c) as f64 * self.state.rest_edge_length(),
            None => self.state.n_segments() as f64 * self.state.rest_edge_length(),
        }
    }
}

fn potential(state: &RodState, params: &SheetParams) -> Result<f64> {
    let elastic = rod::elastic_energy(state, params)?;
    let masses = rod::lumped_masses(state, params);
    let grav: f64 = state
        .nodes()
        .iter()
        .zip(&masses)
        .map(|(q, m)| m * params.gravity * q.z)
        .sum();
    Ok(elastic + grav)
}

/// ∇E_el − F_gravity, the gradient of the total potential.
fn potential_gradient(state: &RodState, params: &SheetParams) -> Result<Vec<f64>> {
    let mut g = rod::elastic_gradient(state, params)?;
    let f = rod::gravity_force(state, params);
    for (gi, fi) in g.iter_mut().zip(&f) {
        *gi -= fi;
    }
    Ok(g)
}

fn free_dof_indices(pinned: &[Option<Vec2>]) -> Vec<usize> {
    let mut free = Vec::new();
    for (i, p) in pinned.iter().enumerate() {
        if p.is_none() {
            free.push(2 * i);
            free.push(2 * i + 1);
        }
    }
    free
}

fn snap_pinned(state: &mut RodState, pinned: &[Option<Vec2>]) {
    for (i, p) in pinned.iter().enumerate() {
        if let Some(target) = p {
            state.set_node(i, *target);
        }
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Damped Newton with Armijo line search on the reduced (free-DOF) system.
/// Returns the final residual norm.
fn newton(
    state: &mut RodState,
    params: &SheetParams,
    pinned: &[Option<Vec2>],
    tol: f64,
    max_iter: usize,
) -> Result<f64> {
    snap_pinned(state, pinned);
    let free = free_dof_indices(pinned);
    if free.is_empty() {
        return Ok(0.0);
    }
    let cap = 0.1 * params.total_length;
    let mut shift_hint = 0.0f64;
    let mut residual = f64::INFINITY;
    for it in 0..max_iter {
        let g = potential_gradient(state, params)
            .map_err(|_| Error::NoConvergence { residual, iterations: it })?;
        let gf: Vec<f64> = free.iter().map(|&k| g[k]).collect();
        residual = l2(&gf);
        if residual < tol {
            return Ok(residual);
        }
        let h = rod::elastic_hessian(state, params)
            .map_err(|_| Error::NoConvergence { residual, iterations: it })?;
        let hf = h.restricted(&free);
        let n = hf.dim();
        let diag_scale = (0..n).map(|i| hf.get(i, i).abs()).sum::<f64>() / n as f64;
        let mut shift = shift_hint;
        let factor = loop {
            match hf.ldlt(shift) {
                Some(f) => break f,
                None => {
                    shift = if shift == 0.0 { 1e-10 * diag_scale } else { shift * 10.0 };
                    if shift > 1e8 * diag_scale {
                        return Err(Error::NoConvergence { residual, iterations: it });
                    }
                }
            }
        };
        let rhs: Vec<f64> = gf.iter().map(|&v| -v).collect();
        let mut delta = factor.solve(&rhs);
        // Cap the step so a single iteration cannot fling nodes far away.
        let mut max_comp = 0.0f64;
        for d in &delta {
            max_comp = max_comp.max(d.abs());
        }
        if max_comp > cap {
            let s = cap / max_comp;
            delta.iter_mut().for_each(|d| *d *= s);
        }
        let slope: f64 = gf.iter().zip(&delta).map(|(a, b)| a * b).sum();
        let phi0 = potential(state, params)
            .map_err(|_| Error::NoConvergence { residual, iterations: it })?;
        let mut t = 1.0f64;
        let mut accepted = false;
        while t >= 1e-12 {
            let mut trial = state.clone();
            for (fi, &k) in free.iter().enumerate() {
                let node = k / 2;
                let mut q = trial.node(node);
                if k % 2 == 0 {
                    q.x += t * delta[fi];
                } else {
                    q.z += t * delta[fi];
                }
                trial.set_node(node, q);
            }
            if let Ok(phi) = potential(&trial, params) {
                if phi <= phi0 + 1e-4 * t * slope {
                    *state = trial;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if accepted {
            shift_hint = 0.0;
        } else {
            // Steepest-descent-like retry with heavier damping.
            shift_hint = (shift * 100.0).max(1e-6 * diag_scale);
        }
    }
    Err(Error::NoConvergence { residual, iterations: max_iter })
}

/// Implicit-Euler dynamic relaxation with viscous damping; settles the
/// state into the Newton basin when a cold start diverges. Runs until the
/// kinetic energy drops below 1e-12·W·L.
fn dynamic_relaxation(
    state: &mut RodState,
    params: &SheetParams,
    pinned: &[Option<Vec2>],
    max_steps: usize,
) -> Result<()> {
    snap_pinned(state, pinned);
    state.zero_velocities();
    let free = free_dof_indices(pinned);
    if free.is_empty() {
        return Ok(());
    }
    let dl = state.rest_edge_length();
    let masses = rod::lumped_masses(state, params);
    let m_typ = params.density * params.width * params.thickness * dl;
    let t_bend = (m_typ * dl.powi(3) / params.bend_stiffness()).sqrt();
    let dt = 4.0 * t_bend;
    let ke_tol = 1e-12 * params.total_weight() * params.total_length;

    for step in 0..max_steps {
        let g = match potential_gradient(state, params) {
            Ok(g) => g,
            Err(_) => {
                return Err(Error::NoConvergence { residual: f64::INFINITY, iterations: step })
            }
        };
        let h = match rod::elastic_hessian(state, params) {
            Ok(h) => h,
            Err(_) => {
                return Err(Error::NoConvergence { residual: f64::INFINITY, iterations: step })
            }
        };
        // Implicit velocity update with viscous damping c = 2 m/dt:
        // (m/dt + c) I + dt H = diag(3 m/dt) + dt H.
        let hf = h.restricted(&free);
        let nf = hf.dim();
        let mut sys = crate::band::SymBandMatrix::zeros(nf, hf.half_bandwidth());
        for i in 0..nf {
            for j in i.saturating_sub(hf.half_bandwidth())..=i {
                let v = hf.get(i, j);
                if v != 0.0 {
                    sys.add(i, j, dt * v);
                }
            }
        }
        for (fi, &k) in free.iter().enumerate() {
            sys.add(fi, fi, 3.0 * masses[k / 2] / dt);
        }
        let diag_scale = (0..nf).map(|i| sys.get(i, i).abs()).sum::<f64>() / nf as f64;
        let mut shift = 0.0;
        let factor = loop {
            match sys.ldlt(shift) {
                Some(f) => break f,
                None => {
                    shift = if shift == 0.0 { 1e-10 * diag_scale } else { shift * 10.0 };
                    if shift > 1e8 * diag_scale {
                        return Err(Error::NoConvergence { residual: f64::INFINITY, iterations: step });
                    }
                }
            }
        };
        // rhs = m v / dt − g  (free dofs)
        let mut rhs = Vec::with_capacity(nf);
        for &k in &free {
            let node = k / 2;
            let v = state.velocities()[node];
            let vc = if k % 2 == 0 { v.x } else { v.z };
            rhs.push(masses[node] * vc / dt - g[k]);
        }
        let vnew = factor.solve(&rhs);
        let mut ke = 0.0;
        {
            let mut trial = state.clone();
            for (fi, &k) in free.iter().enumerate() {
                let node = k / 2;
                let mut q = trial.node(node);
                let mut vel = trial.velocities()[node];
                if k % 2 == 0 {
                    q.x += dt * vnew[fi];
                    vel.x = vnew[fi];
                } else {
                    q.z += dt * vnew[fi];
                    vel.z = vnew[fi];
                }
                trial.set_node(node, q);
                trial.velocities_mut()[node] = vel;
                ke += 0.5 * masses[node] * vnew[fi] * vnew[fi];
            }
            if potential(&trial, params).is_err() {
                return Err(Error::NoConvergence { residual: f64::INFINITY, iterations: step });
            }
            *state = trial;
        }
        if ke < ke_tol {
            state.zero_velocities();
            return Ok(());
        }
    }
    state.zero_velocities();
    Ok(()) // hand whatever we have back to Newton
}

fn newton_with_fallback(
    state: &mut RodState,
    params: &SheetParams,
    pinned: &[Option<Vec2>],
    tol: f64,
) -> Result<f64> {
    match newton(state, params, pinned, tol, NEWTON_MAX_ITER) {
        Ok(r) => Ok(r),
        Err(_) => {
            dynamic_relaxation(state, params, pinned, 4000)?;
            newton(state, params, pinned, tol, NEWTON_MAX_ITER)
        }
    }
}

/// Pins for the grasp: node N at the pose, node N-1 one rest edge behind
/// along the commanded tangent.
fn grasp_pins(pose: &GraspPose, state: &RodState) -> (Vec2, Vec2) {
    let dl = state.rest_edge_length();
    let tip = Vec2::new(pose.x, pose.z);
    let tangent = Vec2::unit_from_angle(pose.alpha);
    (tip - tangent * dl, tip)
}

/// Minimal suspended length that makes (x, z) reachable without slip:
/// the chord from the connective node (-l_s, 0) must not exceed l_s.
pub fn minimal_suspended_length(x: f64, z: f64) -> Option<f64> {
    if x >= 0.0 {
        return None;
    }
    Some((x * x + z * z) / (-2.0 * x))
}

/// Cubic-Hermite cold-start guess: flat region at rest, suspended region
/// on a smooth curve from the connective node to the grasp.
fn cold_start_guess(pose: &GraspPose, params: &SheetParams, n_segments: usize) -> Result<RodState> {
    let mut state = RodState::flat(params, n_segments)?;
    let dl = state.rest_edge_length();
    let length = params.total_length;
    let l_min = minimal_suspended_length(pose.x, pose.z).unwrap_or(0.9 * length);
    let chord0 = Vec2::new(pose.x + l_min, pose.z).norm();
    let ls_guess = (1.25 * l_min)
        .max(1.05 * chord0)
        .min(0.95 * length)
        .max(3.0 * dl);
    let c = ((length - ls_guess) / dl).floor().clamp(0.0, (n_segments - 3) as f64) as usize;
    let p0 = state.node(c);
    let p1 = Vec2::new(pose.x, pose.z);
    let chord = (p1 - p0).norm().max(3.0 * dl);
    let t0 = Vec2::new(chord, 0.0);
    let t1 = Vec2::unit_from_angle(pose.alpha) * chord;
    let m = n_segments - c;
    for k in 1..=m {
        let t = k as f64 / m as f64;
        let h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
        let h10 = t * (1.0 - t) * (1.0 - t);
        let h01 = t * t * (3.0 - 2.0 * t);
        let h11 = t * t * (t - 1.0);
        let mut p = p0 * h00 + t0 * h10 + p1 * h01 + t1 * h11;
        if k < m && p.z < 0.0 {
            p.z = 0.0;
        }
        state.set_node(c + k, p);
    }
    Ok(state)
}

fn is_degenerate_flat(pose: &GraspPose, params: &SheetParams) -> bool {
    let eps = 1e-12 * params.total_length;
    pose.x.abs() <= eps && pose.z.abs() <= eps && pose.alpha.abs() <= 1e-12
}

fn flat_solution(params: &SheetParams, n_segments: usize) -> Result<EquilibriumSolution> {
    let state = RodState::flat(params, n_segments)?;
    let masses = rod::lumped_masses(&state, params);
    let reactions: Vec<Vec2> = masses.iter().map(|m| Vec2::new(0.0, m * params.gravity)).collect();
    Ok(EquilibriumSolution {
        contact: vec![true; state.n_nodes()],
        contact_count: state.n_nodes(),
        reactions,
        grasp_reaction: Vec2::ZERO,
        end_moment: 0.0,
        residual: 0.0,
        degenerate_flat: true,
        state,
    })
}

/// Solves the constrained folding equilibrium at a prescribed grasp pose.
///
/// `init` warm-starts the solve; the initial contact set is taken from
/// nodes resting at the substrate in the initial state.
pub fn solve_equilibrium(
    pose: &GraspPose,
    params: &SheetParams,
    n_segments: usize,
    init: Option<&RodState>,
) -> Result<EquilibriumSolution> {
    if is_degenerate_flat(pose, params) {
        return flat_solution(params, n_segments);
    }
    let length = params.total_length;
    if Vec2::new(pose.x + length, pose.z).norm() > length * (1.0 + 1e-9) {
        return Err(Error::OutOfRange(format!(
            "pose ({}, {}) is beyond the sheet's reach",
            pose.x, pose.z
        )));
    }

    let mut state = match init {
        Some(s) => {
            if s.n_nodes() != n_segments + 1 {
                return Err(Error::InvariantViolation(format!(
                    "warm start has {} nodes, expected {}",
                    s.n_nodes(),
                    n_segments + 1
                )));
            }
            let mut c = s.clone();
            c.zero_velocities();
            c
        }
        None => cold_start_guess(pose, params, n_segments)?,
    };

    let n = n_segments;
    let dl = state.rest_edge_length();
    let weight = params.total_weight();
    let tol = RESIDUAL_WEIGHT_FRACTION * weight;
    let pen_tol = 1e-10 * length;
    let release_tol = 1e-10 * weight;
    let contact_seed_tol = 1e-7 * length;

    // Initial contact set: nodes resting at the substrate, grasp excluded.
    let mut contact: Vec<bool> = (0..=n)
        .map(|i| i < n - 1 && state.node(i).z.abs() <= contact_seed_tol)
        .collect();
    // Contact pin positions: where each node entered the set.
    let mut contact_x: Vec<f64> = (0..=n).map(|i| state.node(i).x).collect();

    let (pin_prev, pin_tip) = grasp_pins(pose, &state);
    let mut flips = vec![0usize; n + 1];
    let mut residual = f64::INFINITY;

    for _pass in 0..ACTIVE_SET_MAX_ITER {
        let mut pinned: Vec<Option<Vec2>> = vec![None; n + 1];
        for i in 0..=n {
            if contact[i] {
                pinned[i] = Some(Vec2::new(contact_x[i], 0.0));
            }
        }
        pinned[n - 1] = Some(pin_prev);
        pinned[n] = Some(pin_tip);

        residual = newton_with_fallback(&mut state, params, pinned.as_slice(), tol)?;

        let g = potential_gradient(&state, params)?;
        let mut changed = false;
        for i in 0..=n {
            if i >= n - 1 {
                continue;
            }
            if contact[i] {
                let r_z = g[2 * i + 1];
                if r_z < -release_tol && flips[i] < 8 {
                    contact[i] = false;
                    flips[i] += 1;
                    changed = true;
                }
            } else {
                let z = state.node(i).z;
                if z < -pen_tol {
                    contact[i] = true;
                    contact_x[i] = state.node(i).x;
                    let mut q = state.node(i);
                    q.z = 0.0;
                    state.set_node(i, q);
                    flips[i] += 1;
                    changed = true;
                }
            }
        }
        if !changed {
            let reactions: Vec<Vec2> = (0..=n)
                .map(|i| {
                    if contact[i] || i >= n - 1 {
                        Vec2::new(g[2 * i], g[2 * i + 1])
                    } else {
                        Vec2::ZERO
                    }
                })
                .collect();
            let contact_count = contact.iter().filter(|&&c| c).count();
            if contact_count == 0 {
                return Err(Error::FullLiftOff);
            }
            for i in 0..=n {
                if !contact[i] && i < n - 1 && state.node(i).z < -PENETRATION_TOLERANCE_FRACTION * length {
                    return Err(Error::Penetration(format!(
                        "free node {i} at z = {:.3e}",
                        state.node(i).z
                    )));
                }
            }
            let grasp_reaction = reactions[n - 1] + reactions[n];
            let phis = rod::TurningAngles::compute(&state)?;
            let phi_end = phis.0[n - 2];
            let end_moment = params.bend_stiffness() * 2.0 * (phi_end / 2.0).tan() / dl;
            return Ok(EquilibriumSolution {
                state,
                contact,
                contact_count,
                reactions,
                grasp_reaction,
                end_moment,
                residual,
                degenerate_flat: false,
            });
        }
    }
    Err(Error::Penetration(format!(
        "active set did not stabilize (residual {residual:.3e})"
    )))
}

/// Extracts the force/geometry record from a converged equilibrium.
pub fn extract_sample(
    sol: &EquilibriumSolution,
    pose: &GraspPose,
    params: &SheetParams,
) -> Result<FoldSample> {
    if sol.degenerate_flat {
        return Ok(FoldSample {
            tangential_force: 0.0,
            normal_force: params.total_weight(),
            alpha: pose.alpha,
            suspended_length: 0.0,
            x: pose.x,
            z: pose.z,
            lambda: 0.0,
            nondim: None,
            degenerate_flat: true,
        });
    }
    if sol.contact_count == 0 {
        return Err(Error::FullLiftOff);
    }
    let mut substrate = Vec2::ZERO;
    for (i, &flag) in sol.contact.iter().enumerate() {
        if flag {
            substrate += sol.reactions[i];
        }
    }
    let f_t = substrate.x.abs();
    let f_n = substrate.z;
    if f_n <= 0.0 {
        return Err(Error::InvariantViolation(format!(
            "non-positive normal force {f_n:.3e}"
        )));
    }
    let l_s = sol.suspended_length();
    Ok(FoldSample {
        tangential_force: f_t,
        normal_force: f_n,
        alpha: pose.alpha,
        suspended_length: l_s,
        x: pose.x,
        z: pose.z,
        lambda: f_t / f_n,
        nondim: None,
        degenerate_flat: false,
    })
}

/// Evaluates the end moment at one grasp angle, reusing a warm state.
fn moment_at(
    x: f64,
    z: f64,
    alpha: f64,
    params: &SheetParams,
    n_segments: usize,
    init: Option<&RodState>,
) -> Result<(f64, EquilibriumSolution)> {
    let pose = GraspPose::new(x, z, alpha)?;
    let sol = solve_equilibrium(&pose, params, n_segments, init)?;
    Ok((sol.end_moment, sol))
}

/// Finds the grasp orientation α at which the end bending moment vanishes.
///
/// Coarse 2° scan to bracket the sign change, then bisection; each solve
/// warm-starts from its neighbor.
pub fn find_zero_moment_alpha(
    x: f64,
    z: f64,
    params: &SheetParams,
    n_segments: usize,
) -> Result<(f64, EquilibriumSolution)> {
    find_zero_moment_alpha_hinted(x, z, params, n_segments, None, None)
}

pub fn find_zero_moment_alpha_hinted(
    x: f64,
    z: f64,
    params: &SheetParams,
    n_segments: usize,
    hint: Option<f64>,
    init: Option<&RodState>,
) -> Result<(f64, EquilibriumSolution)> {
    let dl = params.total_length / n_segments as f64;
    let moment_tol = MOMENT_TOL_FRACTION * params.bend_stiffness() / dl;

    // Bracket the root.
    let mut bracket: Option<((f64, f64, EquilibriumSolution), (f64, f64, EquilibriumSolution))> = None;

    if let Some(h0) = hint {
        let a0 = h0.clamp(ALPHA_SCAN_MIN, ALPHA_SCAN_MAX);
        if let Ok((m0, s0)) = moment_at(x, z, a0, params, n_segments, init) {
            // March in the direction that drives M toward zero (M grows
            // with α near the physical root).
            let dir = if m0 > 0.0 { -1.0 } else { 1.0 };
            let mut prev = (a0, m0, s0);
            let mut a = a0;
            for _ in 0..((ALPHA_SCAN_MAX - ALPHA_SCAN_MIN) / ALPHA_SCAN_STEP) as usize + 2 {
                a += dir * ALPHA_SCAN_STEP;
                if !(ALPHA_SCAN_MIN..=ALPHA_SCAN_MAX).contains(&a) {
                    break;
                }
                match moment_at(x, z, a, params, n_segments, Some(&prev.2.state)) {
                    Ok((m, s)) => {
                        if m == 0.0 || m.signum() != prev.1.signum() {
                            let cur = (a, m, s);
                            bracket = Some(if dir > 0.0 { (prev, cur) } else { (cur, prev) });
                            break;
                        }
                        prev = (a, m, s);
                    }
                    Err(_) => break,
                }
            }
        }
    }

    if bracket.is_none() {
        // Full upward scan.
        let mut prev: Option<(f64, f64, EquilibriumSolution)> = None;
        let steps = ((ALPHA_SCAN_MAX - ALPHA_SCAN_MIN) / ALPHA_SCAN_STEP).ceil() as usize;
        for k in 0..=steps {
            let a = (ALPHA_SCAN_MIN + k as f64 * ALPHA_SCAN_STEP).min(ALPHA_SCAN_MAX);
            let warm = prev.as_ref().map(|p| &p.2.state).or(init);
            match moment_at(x, z, a, params, n_segments, warm) {
                Ok((m, s)) => {
                    if let Some(p) = prev.take() {
                        if m == 0.0 || m.signum() != p.1.signum() {
                            bracket = Some((p, (a, m, s)));
                            break;
                        }
                    }
                    prev = Some((a, m, s));
                }
                Err(_) => {
                    prev = None;
                }
            }
        }
    }

    let (mut lo, mut hi) = bracket.ok_or(Error::NoRoot {
        lo: ALPHA_SCAN_MIN,
        hi: ALPHA_SCAN_MAX,
    })?;

    // Bisection: continue until the bracket is narrow AND the midpoint
    // moment is below tolerance.
    for _ in 0..80 {
        let mid = 0.5 * (lo.0 + hi.0);
        let warm = if (mid - lo.0).abs() < (hi.0 - mid).abs() {
            &lo.2.state
        } else {
            &hi.2.state
        };
        let (m, s) = moment_at(x, z, mid, params, n_segments, Some(warm))?;
        let entry = (mid, m, s);
        if m == 0.0 {
            lo = entry.clone();
            hi = entry;
            break;
        }
        if m.signum() == lo.1.signum() {
            lo = entry;
        } else {
            hi = entry;
        }
        if (hi.0 - lo.0).abs() < ALPHA_BISECTION_TOL && lo.1.abs().min(hi.1.abs()) < moment_tol {
            break;
        }
    }
    let root = if lo.1.abs() <= hi.1.abs() { lo } else { hi };
    Ok((root.0, root.2))
}

/// Cantilever equilibrium for the hanging-plate measurement: the end edge
/// clamped horizontal at the origin, the rest of the sheet hanging free
/// under gravity (no substrate).
pub fn solve_cantilever(
    params: &SheetParams,
    n_segments: usize,
    warm: Option<&RodState>,
) -> Result<RodState> {
    let tol = RESIDUAL_WEIGHT_FRACTION * params.total_weight();
    let clamp = |state: &RodState| -> Vec<Option<Vec2>> {
        let dl = state.rest_edge_length();
        let mut pinned = vec![None; state.n_nodes()];
        pinned[state.n_nodes() - 1] = Some(Vec2::ZERO);
        pinned[state.n_nodes() - 2] = Some(Vec2::new(-dl, 0.0));
        pinned
    };

    if let Some(w) = warm {
        if w.n_nodes() == n_segments + 1 {
            let mut state = w.clone();
            state.zero_velocities();
            let pins = clamp(&state);
            newton_with_fallback(&mut state, params, &pins, tol)?;
            return Ok(state);
        }
    }

    // Cold start: continuation in stiffness from a nearly rigid sheet.
    let lgb_target = params.gravito_bending_length();
    let lgb_start = (params.total_length / 0.3).max(lgb_target);
    let n_steps = 12;
    let mut state = RodState::flat(params, n_segments)?;
    // Shift so the clamp (last edge) sits at the origin: flat() puts the
    // last node at the origin already.
    for k in 0..=n_steps {
        let t = k as f64 / n_steps as f64;
        let lgb = lgb_start * (lgb_target / lgb_start).powf(t);
        let e = 24.0 * params.density * params.gravity * lgb.powi(3)
            / (params.thickness * params.thickness);
        let p = SheetParams::with_gravity(
            e,
            params.thickness,
            params.width,
            params.density,
            params.total_length,
            params.gravity,
        )?;
        let pins = clamp(&state);
        newton_with_fallback(&mut state, &p, &pins, RESIDUAL_WEIGHT_FRACTION * p.total_weight())?;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desk_params() -> SheetParams {
        // L_gb ≈ 0.0701 m, L̄ ≈ 4.3
        SheetParams::new(6.5e9, 1.0e-4, 0.21, 800.0, 0.3).unwrap()
    }

    #[test]
    fn degenerate_flat_pose() {
        let p = desk_params();
        let pose = GraspPose::new(0.0, 0.0, 0.0).unwrap();
        let sol = solve_equilibrium(&pose, &p, 60, None).unwrap();
        assert!(sol.degenerate_flat);
        assert_eq!(sol.contact_count, 61);
        let s = extract_sample(&sol, &pose, &p).unwrap();
        assert_eq!(s.lambda, 0.0);
        assert_eq!(s.suspended_length, 0.0);
        assert!((s.normal_force - p.total_weight()).abs() / p.total_weight() < 1e-12);
        assert!(s.degenerate_flat);
    }

    #[test]
    fn gentle_lift_force_closure() {
        let p = desk_params();
        let lgb = p.gravito_bending_length();
        let z = 0.3 * lgb;
        // 45-degree-ish fold approach: x on the near diagonal.
        let x = -0.8 * z;
        let (alpha, sol) = find_zero_moment_alpha(x, z, &p, 80).unwrap();
        assert!(alpha > 0.0 && alpha < std::f64::consts::PI);
        let pose = GraspPose::new(x, z, alpha).unwrap();
        let sample = extract_sample(&sol, &pose, &p).unwrap();
        assert!(sample.suspended_length > 0.0 && sample.suspended_length < p.total_length);
        assert!(sample.normal_force < p.total_weight());
        assert!(sol.residual < RESIDUAL_WEIGHT_FRACTION * p.total_weight());

        // Global force closure: grasp + substrate reactions balance weight.
        let mut total = sol.grasp_reaction;
        for (i, &c) in sol.contact.iter().enumerate() {
            if c {
                total += sol.reactions[i];
            }
        }
        total.z -= p.total_weight();
        assert!(
            total.norm() < 1e-8,
            "force closure violated: {:?}",
            total
        );
    }

    #[test]
    fn zero_moment_root_properties() {
        let p = desk_params();
        let lgb = p.gravito_bending_length();
        let (x, z) = (-1.2 * lgb, 0.9 * lgb);
        let n = 80;
        let (alpha, sol) = find_zero_moment_alpha(x, z, &p, n).unwrap();
        let dl = p.total_length / n as f64;
        let tol = MOMENT_TOL_FRACTION * p.bend_stiffness() / dl;
        assert!(sol.end_moment.abs() < tol);
        // End turning angle consistency.
        let phis = rod::TurningAngles::compute(&sol.state).unwrap();
        assert!(phis.0[n - 2].abs() < 1e-6);
        // |M| grows on both sides of the root.
        for da in [-0.01, 0.01] {
            let (m, _) = moment_at(x, z, alpha + da, &p, n, Some(&sol.state)).unwrap();
            assert!(m.abs() > sol.end_moment.abs());
        }
    }

    #[test]
    fn moment_scan_single_sign_change_tall_arc() {
        let p = desk_params();
        let lgb = p.gravito_bending_length();
        let (x, z) = (-1.1 * lgb, 1.5 * lgb);
        let n = 80;
        let mut signs = Vec::new();
        let mut warm: Option<EquilibriumSolution> = None;
        for k in 0..100 {
            let a = 0.1 + k as f64 * (std::f64::consts::PI + 0.2 - 0.1) / 99.0;
            match moment_at(x, z, a, &p, n, warm.as_ref().map(|s| &s.state)) {
                Ok((m, s)) => {
                    signs.push(m.signum());
                    warm = Some(s);
                }
                Err(_) => {}
            }
        }
        let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
        assert_eq!(changes, 1, "expected a single sign change, got {changes}");
    }

    #[test]
    fn width_invariance() {
        let p = desk_params();
        let mut p2 = p;
        p2.width *= 2.0;
        let lgb = p.gravito_bending_length();
        for (fx, fz) in [(-0.6, 0.5), (-1.5, 1.0), (-2.0, 0.4)] {
            let (x, z) = (fx * lgb, fz * lgb);
            let (a1, s1) = find_zero_moment_alpha(x, z, &p, 60).unwrap();
            let (a2, s2) = find_zero_moment_alpha(x, z, &p2, 60).unwrap();
            let pose1 = GraspPose::new(x, z, a1).unwrap();
            let pose2 = GraspPose::new(x, z, a2).unwrap();
            let f1 = extract_sample(&s1, &pose1, &p).unwrap();
            let f2 = extract_sample(&s2, &pose2, &p2).unwrap();
            assert!((f1.lambda - f2.lambda).abs() <= 1e-9 * f1.lambda.abs().max(1e-300));
            assert!((a1 - a2).abs() <= 1e-9 * a1.abs().max(1e-12));
            assert!(
                (f1.suspended_length - f2.suspended_length).abs()
                    <= 1e-9 * f1.suspended_length
            );
        }
    }

    #[test]
    fn complementarity_and_contact_contiguity() {
        let p = desk_params();
        let lgb = p.gravito_bending_length();
        let (x, z) = (-1.0 * lgb, 0.7 * lgb);
        let (_, sol) = find_zero_moment_alpha(x, z, &p, 70).unwrap();
        let n = sol.state.n_segments();
        for i in 0..=n {
            if sol.contact[i] {
                assert!(sol.state.node(i).z.abs() < 1e-12 * p.total_length);
                assert!(sol.reactions[i].z >= -1e-9 * p.total_weight());
            } else if i < n - 1 {
                assert!(sol.state.node(i).z >= -1e-9 * p.total_length);
            }
        }
        // Contiguous from the far end.
        let c = sol.connective_node().unwrap();
        for i in 0..=c {
            assert!(sol.contact[i]);
        }
        for i in c + 1..=n {
            assert!(!sol.contact[i]);
        }
    }

    #[test]
    fn unreachable_pose_rejected() {
        let p = desk_params();
        let pose = GraspPose::new(0.2, 0.4, 0.5).unwrap();
        assert!(solve_equilibrium(&pose, &p, 40, None).is_err());
    }

    #[test]
    fn cantilever_drop_monotone_in_compliance() {
        let template = SheetParams::new(1.0e9, 1.0e-4, 0.2, 800.0, 1.0).unwrap();
        let mut last = 0.0;
        for l_bar in [0.5, 2.0, 6.0] {
            let lgb = template.total_length / l_bar;
            let e = 24.0 * template.density * template.gravity * lgb.powi(3)
                / (template.thickness * template.thickness);
            let p = SheetParams::new(e, template.thickness, template.width, template.density, 1.0).unwrap();
            let sol = solve_cantilever(&p, 100, None).unwrap();
            let drop = -sol.nodes().iter().map(|q| q.z).fold(f64::INFINITY, f64::min);
            assert!(drop > last, "drop {drop} not monotone at L̄ = {l_bar}");
            last = drop;
        }
        assert!(last < 1.0);
    }
}
