//! Discrete planar elastic rod: degrees of freedom, elastic energies,
//! analytic gradients and Hessians, and lumped gravity.
//!
//! The sheet's centerline is N+1 nodes q_0..q_N in the x–z plane. The
//! undeformed state lies on the substrate with the manipulated end q_N at
//! the origin and the far end q_0 at (-L, 0). Stretching uses the edge
//! strain 1 - |e|/Δl; bending uses the discrete curvature 2 tan(φ/2)/Δl
//! at each interior node, where φ is the signed turning angle between
//! consecutive edges (positive for counter-clockwise bending with x̂
//! right and ẑ up).

use crate::band::SymBandMatrix;
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::scaling;

/// Discretization floor. Coarser rods cannot resolve the fold shapes the
/// downstream manifold needs.
pub const MIN_SEGMENTS: usize = 20;

/// Default segment count for desk-scale work.
pub const DEFAULT_SEGMENTS: usize = 100;

/// Edges shorter than this fraction of the rest length are degenerate.
pub const DEGENERATE_EDGE_FRACTION: f64 = 1e-12;

pub const STANDARD_GRAVITY: f64 = 9.81;

/// Material and geometric scalars of the sheet, SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SheetParams {
    /// Young's modulus E (Pa).
    pub young_modulus: f64,
    /// Thickness h (m).
    pub thickness: f64,
    /// Width w (m).
    pub width: f64,
    /// Volume density ρ (kg/m³).
    pub density: f64,
    /// Total centerline length L (m).
    pub total_length: f64,
    /// Gravitational acceleration g (m/s²).
    pub gravity: f64,
}

impl SheetParams {
    pub fn new(young_modulus: f64, thickness: f64, width: f64, density: f64, total_length: f64) -> Result<Self> {
        Self::with_gravity(young_modulus, thickness, width, density, total_length, STANDARD_GRAVITY)
    }

    pub fn with_gravity(
        young_modulus: f64,
        thickness: f64,
        width: f64,
        density: f64,
        total_length: f64,
        gravity: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("young_modulus", young_modulus),
            ("thickness", thickness),
            ("width", width),
            ("density", density),
            ("total_length", total_length),
            ("gravity", gravity),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::NonPositiveInput(format!("{name} = {v}")));
            }
        }
        Ok(SheetParams {
            young_modulus,
            thickness,
            width,
            density,
            total_length,
            gravity,
        })
    }

    /// Stretching stiffness k_s = E·w·h (N).
    pub fn stretch_stiffness(&self) -> f64 {
        self.young_modulus * self.width * self.thickness
    }

    /// Bending stiffness k_b = E·w·h³/12 (N·m²).
    pub fn bend_stiffness(&self) -> f64 {
        self.young_modulus * self.width * self.thickness.powi(3) / 12.0
    }

    /// Gravito-bending length (E·h²/(24·ρ·g))^(1/3) (m).
    pub fn gravito_bending_length(&self) -> f64 {
        scaling::gravito_bending_length(self.young_modulus, self.thickness, self.density, self.gravity)
            .expect("params validated positive")
    }

    /// Total weight ρ·w·h·L·g (N).
    pub fn total_weight(&self) -> f64 {
        self.density * self.width * self.thickness * self.total_length * self.gravity
    }
}

/// Nodal positions and velocities of the discretized centerline.
#[derive(Debug, Clone)]
pub struct RodState {
    nodes: Vec<Vec2>,
    velocities: Vec<Vec2>,
    rest_edge_length: f64,
}

impl RodState {
    /// Undeformed flat state: node i at (i·Δl − L, 0), q_N at the origin.
    pub fn flat(params: &SheetParams, n_segments: usize) -> Result<Self> {
        if n_segments < MIN_SEGMENTS {
            return Err(Error::OutOfRange(format!(
                "n_segments = {n_segments} below the floor of {MIN_SEGMENTS}"
            )));
        }
        let dl = params.total_length / n_segments as f64;
        let nodes = (0..=n_segments)
            .map(|i| Vec2::new(i as f64 * dl - params.total_length, 0.0))
            .collect::<Vec<_>>();
        let velocities = vec![Vec2::ZERO; n_segments + 1];
        Ok(RodState {
            nodes,
            velocities,
            rest_edge_length: dl,
        })
    }

    pub fn from_nodes(nodes: Vec<Vec2>, rest_edge_length: f64) -> Result<Self> {
        if nodes.len() < MIN_SEGMENTS + 1 {
            return Err(Error::OutOfRange(format!(
                "{} nodes is below the floor of {}",
                nodes.len(),
                MIN_SEGMENTS + 1
            )));
        }
        if !(rest_edge_length.is_finite() && rest_edge_length > 0.0) {
            return Err(Error::NonPositiveInput(format!("rest_edge_length = {rest_edge_length}")));
        }
        let n = nodes.len();
        Ok(RodState {
            nodes,
            velocities: vec![Vec2::ZERO; n],
            rest_edge_length,
        })
    }

    pub fn n_segments(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn dof_count(&self) -> usize {
        2 * self.nodes.len()
    }

    pub fn rest_edge_length(&self) -> f64 {
        self.rest_edge_length
    }

    pub fn nodes(&self) -> &[Vec2] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> Vec2 {
        self.nodes[i]
    }

    pub fn set_node(&mut self, i: usize, p: Vec2) {
        self.nodes[i] = p;
    }

    pub fn velocities(&self) -> &[Vec2] {
        &self.velocities
    }

    pub fn velocities_mut(&mut self) -> &mut [Vec2] {
        &mut self.velocities
    }

    pub fn zero_velocities(&mut self) {
        self.velocities.iter_mut().for_each(|v| *v = Vec2::ZERO);
    }

    /// Edge vector e_i = q_{i+1} - q_i.
    pub fn edge(&self, i: usize) -> Vec2 {
        self.nodes[i + 1] - self.nodes[i]
    }
}

/// Signed interior turning angles φ_1..φ_{N-1} (rad).
#[derive(Debug, Clone)]
pub struct TurningAngles(pub Vec<f64>);

impl TurningAngles {
    pub fn compute(state: &RodState) -> Result<Self> {
        validate_geometry(state)?;
        let n = state.n_segments();
        let mut phis = Vec::with_capacity(n - 1);
        for i in 1..n {
            let e_prev = state.edge(i - 1);
            let e_next = state.edge(i);
            let phi = e_prev.cross(e_next).atan2(e_prev.dot(e_next));
            if phi.abs() >= std::f64::consts::PI - 1e-12 {
                return Err(Error::NonFiniteGeometry(format!(
                    "tangent reversal at node {i}: |φ| = {phi}"
                )));
            }
            phis.push(phi);
        }
        Ok(TurningAngles(phis))
    }
}

fn validate_geometry(state: &RodState) -> Result<()> {
    if state.n_nodes() < 3 {
        return Err(Error::OutOfRange("need at least 3 nodes".into()));
    }
    let dl = state.rest_edge_length;
    for (i, q) in state.nodes.iter().enumerate() {
        if !q.is_finite() {
            return Err(Error::NonFiniteGeometry(format!("node {i} = ({}, {})", q.x, q.z)));
        }
    }
    for i in 0..state.n_segments() {
        let len = state.edge(i).norm();
        if len < DEGENERATE_EDGE_FRACTION * dl {
            return Err(Error::DegenerateEdge(format!("edge {i} has length {len:.3e}")));
        }
    }
    Ok(())
}

/// Total elastic energy E_s + E_b (J).
///
/// E_s = ½ k_s Σ (1 − |e_i|/Δl)² Δl over edges,
/// E_b = ½ k_b Σ (2 tan(φ_i/2))² / Δl over interior nodes (φ⁰ = 0).
pub fn elastic_energy(state: &RodState, params: &SheetParams) -> Result<f64> {
    validate_geometry(state)?;
    let dl = state.rest_edge_length;
    let ks = params.stretch_stiffness();
    let kb = params.bend_stiffness();

    let mut e_s = 0.0;
    for i in 0..state.n_segments() {
        let strain = 1.0 - state.edge(i).norm() / dl;
        e_s += 0.5 * ks * strain * strain * dl;
    }

    let mut e_b = 0.0;
    for i in 1..state.n_segments() {
        let e_prev = state.edge(i - 1);
        let e_next = state.edge(i);
        let phi = e_prev.cross(e_next).atan2(e_prev.dot(e_next));
        if phi.abs() >= std::f64::consts::PI - 1e-12 {
            return Err(Error::NonFiniteGeometry(format!("tangent reversal at node {i}")));
        }
        let kappa = 2.0 * (phi / 2.0).tan();
        e_b += 0.5 * kb * kappa * kappa / dl;
    }
    Ok(e_s + e_b)
}

/// Gradient of `elastic_energy` with respect to all 2(N+1) DOFs, laid out
/// (x0, z0, x1, z1, ...). The elastic force vector is its negative.
pub fn elastic_gradient(state: &RodState, params: &SheetParams) -> Result<Vec<f64>> {
    validate_geometry(state)?;
    let dl = state.rest_edge_length;
    let ks = params.stretch_stiffness();
    let kb = params.bend_stiffness();
    let mut grad = vec![0.0; state.dof_count()];

    let mut add = |i: usize, v: Vec2, g: &mut Vec<f64>| {
        g[2 * i] += v.x;
        g[2 * i + 1] += v.z;
    };

    // Stretching: dE/dq_{i+1} = -k_s ε ê, opposite on q_i.
    for i in 0..state.n_segments() {
        let e = state.edge(i);
        let r = e.norm();
        let strain = 1.0 - r / dl;
        let f = e * (-ks * strain / r);
        add(i + 1, f, &mut grad);
        add(i, -f, &mut grad);
    }

    // Bending: dE/dφ = (k_b/Δl) κ (1 + κ²/4), chained through the
    // turning-angle gradient g_k = perp(e_k)/|e_k|².
    for i in 1..state.n_segments() {
        let e_prev = state.edge(i - 1);
        let e_next = state.edge(i);
        let phi = e_prev.cross(e_next).atan2(e_prev.dot(e_next));
        if phi.abs() >= std::f64::consts::PI - 1e-12 {
            return Err(Error::NonFiniteGeometry(format!("tangent reversal at node {i}")));
        }
        let kappa = 2.0 * (phi / 2.0).tan();
        let w = kb / dl * kappa * (1.0 + 0.25 * kappa * kappa);
        let g_prev = e_prev.perp() * (1.0 / e_prev.norm_sq());
        let g_next = e_next.perp() * (1.0 / e_next.norm_sq());
        add(i - 1, g_prev * w, &mut grad);
        add(i, (g_prev + g_next) * (-w), &mut grad);
        add(i + 1, g_next * w, &mut grad);
    }
    Ok(grad)
}

/// Hessian of the angle of a single edge vector, ∇²θ(e).
fn d2_theta(e: Vec2) -> [[f64; 2]; 2] {
    let r2 = e.norm_sq();
    let r4 = r2 * r2;
    let a = 2.0 * e.x * e.z / r4;
    let b = (e.z * e.z - e.x * e.x) / r4;
    [[a, b], [b, -a]]
}

/// Analytic Hessian of `elastic_energy`: symmetric, half-bandwidth 5
/// (each node couples only to neighbors within two edges).
pub fn elastic_hessian(state: &RodState, params: &SheetParams) -> Result<SymBandMatrix> {
    validate_geometry(state)?;
    let dl = state.rest_edge_length;
    let ks = params.stretch_stiffness();
    let kb = params.bend_stiffness();
    let mut h = SymBandMatrix::zeros(state.dof_count(), 5);

    // Adds s * block (2x2) at node pair (a, b); only the lower triangle of
    // the global matrix is stored, so skip pairs with a < b.
    let mut add_block = |a: usize, b: usize, blk: [[f64; 2]; 2], s: f64, h: &mut SymBandMatrix| {
        if a < b {
            return;
        }
        if a == b {
            h.add(2 * a, 2 * a, s * blk[0][0]);
            h.add(2 * a + 1, 2 * a, s * 0.5 * (blk[0][1] + blk[1][0]));
            h.add(2 * a + 1, 2 * a + 1, s * blk[1][1]);
        } else {
            h.add(2 * a, 2 * b, s * blk[0][0]);
            h.add(2 * a, 2 * b + 1, s * blk[0][1]);
            h.add(2 * a + 1, 2 * b, s * blk[1][0]);
            h.add(2 * a + 1, 2 * b + 1, s * blk[1][1]);
        }
    };

    // Stretching blocks.
    for i in 0..state.n_segments() {
        let e = state.edge(i);
        let r = e.norm();
        let strain = 1.0 - r / dl;
        let u = e * (1.0 / r);
        let uu = [[u.x * u.x, u.x * u.z], [u.z * u.x, u.z * u.z]];
        let proj = [[1.0 - uu[0][0], -uu[0][1]], [-uu[1][0], 1.0 - uu[1][1]]];
        let mut blk = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                blk[a][b] = ks / dl * uu[a][b] - ks * strain / r * proj[a][b];
            }
        }
        add_block(i, i, blk, 1.0, &mut h);
        add_block(i + 1, i + 1, blk, 1.0, &mut h);
        add_block(i + 1, i, blk, -1.0, &mut h);
    }

    // Bending blocks: H += W ∇²φ + W' ∇φ ∇φᵀ.
    for i in 1..state.n_segments() {
        let e_prev = state.edge(i - 1);
        let e_next = state.edge(i);
        let phi = e_prev.cross(e_next).atan2(e_prev.dot(e_next));
        if phi.abs() >= std::f64::consts::PI - 1e-12 {
            return Err(Error::NonFiniteGeometry(format!("tangent reversal at node {i}")));
        }
        let kappa = 2.0 * (phi / 2.0).tan();
        let sec2 = 1.0 + 0.25 * kappa * kappa; // sec²(φ/2)
        let w = kb / dl * kappa * sec2;
        let wp = kb / dl * sec2 * (1.0 + 0.75 * kappa * kappa);

        let g_prev = e_prev.perp() * (1.0 / e_prev.norm_sq());
        let g_next = e_next.perp() * (1.0 / e_next.norm_sq());
        // dφ/dq over the stencil (i-1, i, i+1).
        let dphi = [g_prev, (g_prev + g_next) * -1.0, g_next];
        let stencil = [i - 1, i, i + 1];

        // W' ∇φ∇φᵀ
        for (ai, &a) in stencil.iter().enumerate() {
            for (bi, &b) in stencil.iter().enumerate() {
                if a < b {
                    continue;
                }
                let va = dphi[ai];
                let vb = dphi[bi];
                let blk = [[va.x * vb.x, va.x * vb.z], [va.z * vb.x, va.z * vb.z]];
                add_block(a, b, blk, wp, &mut h);
            }
        }

        // W ∇²φ: θ(e_next) spans (i, i+1) with signs (-1, +1);
        // -θ(e_prev) spans (i-1, i) with signs (-1, +1).
        let t_next = d2_theta(e_next);
        let t_prev = d2_theta(e_prev);
        let pairs_next = [(i, -1.0), (i + 1, 1.0)];
        for &(a, sa) in &pairs_next {
            for &(b, sb) in &pairs_next {
                if a < b {
                    continue;
                }
                add_block(a, b, t_next, w * sa * sb, &mut h);
            }
        }
        let pairs_prev = [(i - 1, -1.0), (i, 1.0)];
        for &(a, sa) in &pairs_prev {
            for &(b, sb) in &pairs_prev {
                if a < b {
                    continue;
                }
                add_block(a, b, t_prev, -w * sa * sb, &mut h);
            }
        }
    }
    Ok(h)
}

/// Per-node gravity force (0, -m_i g), flat layout. Lumped mass
/// m_i = ρ·w·h·Δl with half weight at the two end nodes.
pub fn gravity_force(state: &RodState, params: &SheetParams) -> Vec<f64> {
    let m_full = params.density * params.width * params.thickness * state.rest_edge_length;
    let n = state.n_segments();
    let mut f = vec![0.0; state.dof_count()];
    for i in 0..=n {
        let m = if i == 0 || i == n { 0.5 * m_full } else { m_full };
        f[2 * i + 1] = -m * params.gravity;
    }
    f
}

/// Lumped nodal masses (kg), matching `gravity_force`.
pub fn lumped_masses(state: &RodState, params: &SheetParams) -> Vec<f64> {
    let m_full = params.density * params.width * params.thickness * state.rest_edge_length;
    let n = state.n_segments();
    (0..=n)
        .map(|i| if i == 0 || i == n { 0.5 * m_full } else { m_full })
        .collect()
}
