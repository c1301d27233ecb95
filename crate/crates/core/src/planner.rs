//! Minimum-sliding trajectory optimization over the discretized force
//! manifold: uniform cost search with a step cost equal to the entered
//! cell's λ, moving-average smoothing, orientation annotation, and the
//! intuitive semicircle baseline.

use crate::error::{Error, Result};
use crate::nfm::{Manifold, MlpModel};
use std::collections::BinaryHeap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// Poses closer than this (non-dimensional) to the origin count as the
/// flat start when annotating orientations.
const FLAT_START_RADIUS: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    Dimensional,
    NonDimensional,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannedPose {
    pub x: f64,
    pub z: f64,
    pub alpha: f64,
    pub lambda: f64,
}

/// Ordered end-effector poses with per-pose λ and the summed path cost
/// (λ accumulated over entered cells; the start cell is free).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub poses: Vec<PlannedPose>,
    pub frame: Frame,
    pub total_cost: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    /// Positions scaled by `s`; α and λ unchanged.
    pub fn scaled(&self, s: f64, frame: Frame) -> Trajectory {
        Trajectory {
            poses: self
                .poses
                .iter()
                .map(|p| PlannedPose { x: p.x * s, z: p.z * s, alpha: p.alpha, lambda: p.lambda })
                .collect(),
            frame,
            total_cost: self.total_cost,
        }
    }

    pub fn translated(&self, dx: f64, dz: f64) -> Trajectory {
        Trajectory {
            poses: self
                .poses
                .iter()
                .map(|p| PlannedPose { x: p.x + dx, z: p.z + dz, alpha: p.alpha, lambda: p.lambda })
                .collect(),
            frame: self.frame,
            total_cost: self.total_cost,
        }
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
        let mut f = std::fs::File::create(path)?;
        writeln!(
            f,
            "# frame: {}",
            match self.frame {
                Frame::Dimensional => "dimensional",
                Frame::NonDimensional => "nondimensional",
            }
        )?;
        writeln!(f, "x,z,alpha,lambda")?;
        for p in &self.poses {
            writeln!(f, "{:.16e},{:.16e},{:.16e},{:.16e}", p.x, p.z, p.alpha, p.lambda)?;
        }
        Ok(())
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)
            .map_err(|_| Error::MissingArtifact(format!("trajectory file {}", path.display())))?;
        let mut lines = BufReader::new(f).lines();
        let frame_line = lines
            .next()
            .ok_or_else(|| Error::FormatError("empty trajectory file".into()))??;
        let frame = if frame_line.contains("nondimensional") {
            Frame::NonDimensional
        } else if frame_line.contains("dimensional") {
            Frame::Dimensional
        } else {
            return Err(Error::FormatError(format!("missing frame comment: '{frame_line}'")));
        };
        let header = lines
            .next()
            .ok_or_else(|| Error::FormatError("trajectory file missing header".into()))??;
        if header.trim() != "x,z,alpha,lambda" {
            return Err(Error::FormatError(format!("unexpected header '{header}'")));
        }
        let mut poses = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::FormatError(format!("bad trajectory row {}", i + 3)))?;
            if vals.len() != 4 {
                return Err(Error::FormatError(format!("row {}: expected 4 fields", i + 3)));
            }
            poses.push(PlannedPose { x: vals[0], z: vals[1], alpha: vals[2], lambda: vals[3] });
        }
        let total_cost = poses.iter().skip(1).map(|p| p.lambda).sum();
        Ok(Trajectory { poses, frame, total_cost })
    }
}

/// Search endpoints on a manifold.
#[derive(Debug, Clone, Copy)]
pub struct PlanQuery<'m> {
    pub manifold: &'m Manifold,
    pub start: (usize, usize),
    pub goal: (usize, usize),
}

impl<'m> PlanQuery<'m> {
    pub fn new(manifold: &'m Manifold, start: (usize, usize), goal: (usize, usize)) -> Result<Self> {
        if start == goal {
            return Err(Error::InvalidQuery("start equals goal".into()));
        }
        for (name, (ix, iz)) in [("start", start), ("goal", goal)] {
            if ix >= manifold.nx || iz >= manifold.nz {
                return Err(Error::InvalidQuery(format!("{name} cell ({ix}, {iz}) out of grid")));
            }
            if !manifold.is_plannable(ix, iz) {
                return Err(Error::InvalidQuery(format!("{name} cell ({ix}, {iz}) not plannable")));
            }
        }
        Ok(PlanQuery { manifold, start, goal })
    }
}

struct HeapEntry {
    cost: f64,
    seq: u64,
    cell: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cost == other.cost && self.seq == other.seq
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Reversed: BinaryHeap pops the smallest cost, FIFO among equals.
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

const NEIGHBORS: [(isize, isize); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

/// Uniform cost search. Entering a cell costs that cell's λ; the start
/// cell costs nothing. 8-connected, deterministic tie-breaking.
pub fn ucs(query: &PlanQuery) -> Result<Trajectory> {
    let m = query.manifold;
    let n_cells = m.nx * m.nz;
    let start = m.idx(query.start.0, query.start.1);
    let goal = m.idx(query.goal.0, query.goal.1);

    let mut dist = vec![f64::INFINITY; n_cells];
    let mut parent = vec![usize::MAX; n_cells];
    let mut closed = vec![false; n_cells];
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    dist[start] = 0.0;
    heap.push(HeapEntry { cost: 0.0, seq, cell: start });

    while let Some(e) = heap.pop() {
        if closed[e.cell] {
            continue;
        }
        closed[e.cell] = true;
        if e.cell == goal {
            break;
        }
        let (ix, iz) = (e.cell % m.nx, e.cell / m.nx);
        for (dx, dz) in NEIGHBORS {
            let (jx, jz) = (ix as isize + dx, iz as isize + dz);
            if jx < 0 || jz < 0 || jx as usize >= m.nx || jz as usize >= m.nz {
                continue;
            }
            let j = m.idx(jx as usize, jz as usize);
            if closed[j] || !m.plannable[j] {
                continue;
            }
            let cost = e.cost + m.lambda[j];
            if cost < dist[j] {
                dist[j] = cost;
                parent[j] = e.cell;
                seq += 1;
                heap.push(HeapEntry { cost, seq, cell: j });
            }
        }
    }

    if !closed[goal] {
        return Err(Error::NoPath);
    }
    let mut cells = vec![goal];
    let mut cur = goal;
    while cur != start {
        cur = parent[cur];
        cells.push(cur);
    }
    cells.reverse();
    let poses = cells
        .iter()
        .map(|&k| {
            let (ix, iz) = (k % m.nx, k / m.nx);
            let (x, z) = m.midpoint(ix, iz);
            PlannedPose { x, z, alpha: 0.0, lambda: m.lambda[k] }
        })
        .collect();
    Ok(Trajectory {
        poses,
        frame: Frame::NonDimensional,
        total_cost: dist[goal],
    })
}

/// Centered moving average (window 5, shrinking at the ends) on the
/// positions; endpoints pinned; poses leaving the plannable set are
/// re-projected to the nearest plannable cell midpoint; λ and the path
/// cost are re-annotated from the manifold.
pub fn smooth(traj: &Trajectory, manifold: &Manifold) -> Trajectory {
    if traj.frame != Frame::NonDimensional || traj.len() < 3 {
        return traj.clone();
    }
    let n = traj.len();
    let mut out = traj.clone();
    for i in 0..n {
        let k = 2.min(i).min(n - 1 - i);
        if k == 0 {
            continue;
        }
        let (mut sx, mut sz) = (0.0, 0.0);
        for j in i - k..=i + k {
            sx += traj.poses[j].x;
            sz += traj.poses[j].z;
        }
        let w = (2 * k + 1) as f64;
        let (mut x, mut z) = (sx / w, sz / w);
        match manifold.cell_of(x, z) {
            Some((ix, iz)) if manifold.is_plannable(ix, iz) => {}
            _ => {
                if let Some((ix, iz)) = manifold.nearest_plannable(x, z) {
                    let (mx, mz) = manifold.midpoint(ix, iz);
                    x = mx;
                    z = mz;
                }
            }
        }
        out.poses[i].x = x;
        out.poses[i].z = z;
    }
    for p in out.poses.iter_mut() {
        if let Some((ix, iz)) = manifold.cell_of(p.x, p.z) {
            p.lambda = manifold.lambda_at(ix, iz);
        }
    }
    out.total_cost = out.poses.iter().skip(1).map(|p| p.lambda).sum();
    out
}

/// Per-pose α from the model; a flat start pose is forced to α = 0
/// (undeformed grasp).
pub fn annotate_alpha(traj: &Trajectory, model: &MlpModel) -> Trajectory {
    let mut out = traj.clone();
    debug_assert_eq!(traj.frame, Frame::NonDimensional);
    for p in out.poses.iter_mut() {
        p.alpha = model.forward(p.x, p.z)[1];
    }
    if let Some(first) = out.poses.first_mut() {
        if (first.x * first.x + first.z * first.z).sqrt() <= FLAT_START_RADIUS {
            first.alpha = 0.0;
        }
    }
    out
}

/// The intuitive baseline: trace the half perimeter of a circle of radius
/// R = C/2. Pose i = (R cos(i·dθ), R sin(i·dθ), i·dθ), dθ = π/M, starting
/// at (R, 0); the harness aligns the start offset onto the grasp.
pub fn baseline_semicircle(crease: f64, m: usize) -> Result<Trajectory> {
    if !(crease > 0.0 && crease.is_finite()) {
        return Err(Error::NonPositiveInput(format!("C = {crease}")));
    }
    if m < 2 {
        return Err(Error::OutOfRange(format!("M = {m} must be at least 2")));
    }
    let r = crease / 2.0;
    let dtheta = std::f64::consts::PI / m as f64;
    let poses = (0..=m)
        .map(|i| {
            let th = i as f64 * dtheta;
            PlannedPose { x: r * th.cos(), z: r * th.sin(), alpha: th, lambda: 0.0 }
        })
        .collect();
    Ok(Trajectory { poses, frame: Frame::Dimensional, total_cost: 0.0 })
}

/// Non-dimensional search + smoothing between two cells.
pub fn plan_cells(manifold: &Manifold, start: (usize, usize), goal: (usize, usize)) -> Result<Trajectory> {
    let q = PlanQuery::new(manifold, start, goal)?;
    let raw = ucs(&q)?;
    Ok(smooth(&raw, manifold))
}

/// Full planning pipeline: map dimensional endpoints to cells, search,
/// smooth, annotate α, and scale back to real space.
pub fn plan(
    start: (f64, f64),
    goal: (f64, f64),
    lgb: f64,
    model: &MlpModel,
    manifold: &Manifold,
) -> Result<Trajectory> {
    if !(lgb > 0.0 && lgb.is_finite()) {
        return Err(Error::NonPositiveInput(format!("L_gb = {lgb}")));
    }
    let sc = manifold
        .cell_of(start.0 / lgb, start.1 / lgb)
        .ok_or_else(|| Error::InvalidQuery(format!("start {start:?} outside the manifold")))?;
    let gc = manifold
        .cell_of(goal.0 / lgb, goal.1 / lgb)
        .ok_or_else(|| Error::InvalidQuery(format!("goal {goal:?} outside the manifold")))?;
    let smoothed = plan_cells(manifold, sc, gc)?;
    let annotated = annotate_alpha(&smoothed, model);
    crate::scaling::redimensionalize_trajectory(&annotated, lgb)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Uniform-λ manifold with every cell plannable.
    fn uniform_manifold(nx: usize, nz: usize, lam: f64) -> Manifold {
        Manifold {
            x_origin: -(nx as f64) * 0.1,
            z_origin: 0.0,
            cell: 0.1,
            nx,
            nz,
            lambda: vec![lam; nx * nz],
            alpha: vec![0.0; nx * nz],
            ls_bar: vec![2.0; nx * nz],
            in_workspace: vec![true; nx * nz],
            in_penalty: vec![false; nx * nz],
            plannable: vec![true; nx * nz],
            start_cell: (nx - 1, 0),
        }
    }

    fn random_manifold(nx: usize, nz: usize, seed: u64, mask_fraction: f64) -> Manifold {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut m = uniform_manifold(nx, nz, 0.0);
        for k in 0..nx * nz {
            m.lambda[k] = rng.random_range(0.05..1.0);
            if rng.random_range(0.0..1.0) < mask_fraction {
                m.plannable[k] = false;
            }
        }
        m.plannable[0] = true;
        let last = nx * nz - 1;
        m.plannable[last] = true;
        m
    }

    /// Independent oracle: array-scan Dijkstra, O(V²), no heap.
    fn dijkstra_oracle(m: &Manifold, start: (usize, usize), goal: (usize, usize)) -> Option<f64> {
        let n = m.nx * m.nz;
        let s = m.idx(start.0, start.1);
        let g = m.idx(goal.0, goal.1);
        let mut dist = vec![f64::INFINITY; n];
        let mut done = vec![false; n];
        dist[s] = 0.0;
        loop {
            let mut best = usize::MAX;
            let mut bd = f64::INFINITY;
            for k in 0..n {
                if !done[k] && dist[k] < bd {
                    bd = dist[k];
                    best = k;
                }
            }
            if best == usize::MAX {
                return None;
            }
            if best == g {
                return Some(dist[g]);
            }
            done[best] = true;
            let (ix, iz) = (best % m.nx, best / m.nx);
            for (dx, dz) in NEIGHBORS {
                let (jx, jz) = (ix as isize + dx, iz as isize + dz);
                if jx < 0 || jz < 0 || jx as usize >= m.nx || jz as usize >= m.nz {
                    continue;
                }
                let j = m.idx(jx as usize, jz as usize);
                if !m.plannable[j] || done[j] {
                    continue;
                }
                let nd = dist[best] + m.lambda[j];
                if nd < dist[j] {
                    dist[j] = nd;
                }
            }
        }
    }

    #[test]
    fn uniform_cost_gives_chebyshev_paths() {
        let m = uniform_manifold(12, 9, 0.3);
        let q = PlanQuery::new(&m, (1, 1), (10, 7)).unwrap();
        let t = ucs(&q).unwrap();
        let hops = 9usize.max(6); // Chebyshev distance
        assert_eq!(t.len(), hops + 1);
        assert!((t.total_cost - hops as f64 * 0.3).abs() < 1e-12);
    }

    #[test]
    fn ucs_matches_dijkstra_oracle_on_random_manifolds() {
        let mut compared = 0;
        for seed in 0..100 {
            let m = random_manifold(20, 20, seed, 0.25);
            let start = (0, 0);
            let goal = (19, 19);
            if !m.is_plannable(0, 0) || !m.is_plannable(19, 19) {
                continue;
            }
            let q = PlanQuery::new(&m, start, goal).unwrap();
            let ours = ucs(&q);
            let oracle = dijkstra_oracle(&m, start, goal);
            match (ours, oracle) {
                (Ok(t), Some(c)) => {
                    assert!(
                        (t.total_cost - c).abs() < 1e-12,
                        "seed {seed}: {} vs {}",
                        t.total_cost,
                        c
                    );
                    compared += 1;
                }
                (Err(Error::NoPath), None) => {}
                (a, b) => panic!("seed {seed}: disagreement {a:?} vs {b:?}", a = a.map(|t| t.total_cost), b = b),
            }
        }
        assert!(compared > 50, "only {compared} solvable instances");
    }

    #[test]
    fn ucs_deterministic() {
        let m = random_manifold(15, 15, 7, 0.2);
        let q = PlanQuery::new(&m, (0, 0), (14, 14)).unwrap();
        let a = ucs(&q).unwrap();
        let b = ucs(&q).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn query_validation() {
        let mut m = uniform_manifold(6, 6, 0.1);
        assert!(matches!(
            PlanQuery::new(&m, (2, 2), (2, 2)),
            Err(Error::InvalidQuery(_))
        ));
        m.plannable[m.idx(3, 3)] = false;
        assert!(matches!(
            PlanQuery::new(&m, (3, 3), (1, 1)),
            Err(Error::InvalidQuery(_))
        ));
        assert!(matches!(
            PlanQuery::new(&m, (9, 0), (1, 1)),
            Err(Error::InvalidQuery(_))
        ));
    }

    #[test]
    fn no_path_when_walled_off() {
        let mut m = uniform_manifold(7, 7, 0.1);
        for iz in 0..7 {
            let k = m.idx(3, iz);
            m.plannable[k] = false;
        }
        let q = PlanQuery::new(&m, (0, 0), (6, 6)).unwrap();
        assert!(matches!(ucs(&q), Err(Error::NoPath)));
    }

    #[test]
    fn smooth_straight_path_unchanged() {
        let m = uniform_manifold(20, 5, 0.2);
        let poses: Vec<PlannedPose> = (0..10)
            .map(|i| {
                let (x, z) = m.midpoint(i + 3, 2);
                PlannedPose { x, z, alpha: 0.0, lambda: 0.2 }
            })
            .collect();
        let t = Trajectory { poses, frame: Frame::NonDimensional, total_cost: 9.0 * 0.2 };
        let s = smooth(&t, &m);
        for (a, b) in t.poses.iter().zip(&s.poses) {
            assert!((a.x - b.x).abs() < 1e-12);
            assert!((a.z - b.z).abs() < 1e-12);
        }
    }

    #[test]
    fn smooth_shortens_staircase_and_pins_endpoints() {
        let m = uniform_manifold(20, 20, 0.2);
        // Staircase diagonal: alternate right and up steps.
        let mut cells = vec![(2usize, 2usize)];
        for k in 0..10 {
            let last = *cells.last().unwrap();
            if k % 2 == 0 {
                cells.push((last.0 + 1, last.1));
            } else {
                cells.push((last.0, last.1 + 1));
            }
        }
        let poses: Vec<PlannedPose> = cells
            .iter()
            .map(|&(ix, iz)| {
                let (x, z) = m.midpoint(ix, iz);
                PlannedPose { x, z, alpha: 0.0, lambda: 0.2 }
            })
            .collect();
        let arc = |ps: &[PlannedPose]| -> f64 {
            ps.windows(2)
                .map(|w| ((w[1].x - w[0].x).powi(2) + (w[1].z - w[0].z).powi(2)).sqrt())
                .sum()
        };
        let t = Trajectory { poses, frame: Frame::NonDimensional, total_cost: 0.0 };
        let s = smooth(&t, &m);
        assert!(arc(&s.poses) < arc(&t.poses));
        assert_eq!(s.poses.first().unwrap().x, t.poses.first().unwrap().x);
        assert_eq!(s.poses.last().unwrap().z, t.poses.last().unwrap().z);
    }

    #[test]
    fn baseline_semicircle_poses() {
        let c = 0.25;
        let m = 250;
        let t = baseline_semicircle(c, m).unwrap();
        assert_eq!(t.len(), m + 1);
        let r = c / 2.0;
        let p0 = t.poses[0];
        assert!((p0.x - r).abs() < 1e-15 && p0.z.abs() < 1e-15 && p0.alpha.abs() < 1e-15);
        let pm = t.poses[m];
        assert!((pm.x + r).abs() < 1e-12);
        assert!(pm.z.abs() < 1e-12);
        assert!((pm.alpha - std::f64::consts::PI).abs() < 1e-15);
        let ph = t.poses[m / 2];
        assert!(ph.x.abs() < 1e-12);
        assert!((ph.z - r).abs() < 1e-12);
        assert!((ph.alpha - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert!(baseline_semicircle(0.0, 10).is_err());
        assert!(baseline_semicircle(0.1, 1).is_err());
    }

    #[test]
    fn trajectory_csv_roundtrip() {
        let t = baseline_semicircle(0.2, 12).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        t.save_csv(&path).unwrap();
        let l = Trajectory::load_csv(&path).unwrap();
        assert_eq!(l.frame, Frame::Dimensional);
        assert_eq!(l.len(), t.len());
        for (a, b) in t.poses.iter().zip(&l.poses) {
            assert_eq!(a.x.to_bits(), b.x.to_bits());
            assert_eq!(a.alpha.to_bits(), b.alpha.to_bits());
        }
    }

    #[test]
    fn smoothing_does_not_blow_up_cost() {
        for seed in [3u64, 9, 21] {
            let m = random_manifold(18, 18, seed, 0.1);
            if let Ok(q) = PlanQuery::new(&m, (0, 0), (17, 17)) {
                if let Ok(t) = ucs(&q) {
                    let s = smooth(&t, &m);
                    assert!(
                        s.total_cost <= 1.05 * t.total_cost + 1e-12,
                        "seed {seed}: smoothed {} vs raw {}",
                        s.total_cost,
                        t.total_cost
                    );
                }
            }
        }
    }
}
