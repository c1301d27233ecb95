//! Symmetric banded matrix storage and an LDLᵀ solver.
//!
//! The rod Hessian couples each node only to neighbors within two edges,
//! so in DOF ordering (x0, z0, x1, z1, ...) the half-bandwidth is 5.
//! Factorization is unpivoted; callers add a diagonal shift when the
//! matrix is not positive definite (Levenberg-style damping in Newton).

/// Symmetric matrix stored by diagonal and lower bands.
///
/// Entry (i, j) with j <= i and i - j <= half_bw lives at
/// `data[i * (half_bw + 1) + (i - j)]`.
#[derive(Debug, Clone)]
pub struct SymBandMatrix {
    n: usize,
    half_bw: usize,
    data: Vec<f64>,
}

impl SymBandMatrix {
    pub fn zeros(n: usize, half_bw: usize) -> Self {
        SymBandMatrix {
            n,
            half_bw,
            data: vec![0.0; n * (half_bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn half_bandwidth(&self) -> usize {
        self.half_bw
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        if hi - lo > self.half_bw {
            0.0
        } else {
            self.data[hi * (self.half_bw + 1) + (hi - lo)]
        }
    }

    /// Adds `v` to entry (i, j) and, implicitly, to (j, i).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        debug_assert!(hi - lo <= self.half_bw, "entry outside band");
        self.data[hi * (self.half_bw + 1) + (hi - lo)] += v;
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.n]; self.n];
        for i in 0..self.n {
            for j in i.saturating_sub(self.half_bw)..=i {
                m[i][j] = self.get(i, j);
                m[j][i] = m[i][j];
            }
        }
        m
    }

    /// y = A x
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            for j in i.saturating_sub(self.half_bw)..=i {
                let a = self.get(i, j);
                y[i] += a * x[j];
                if i != j {
                    y[j] += a * x[i];
                }
            }
        }
        y
    }

    /// Restriction to the rows/columns selected by `keep` (ascending full
    /// indices). Index distances only shrink, so the band is preserved.
    pub fn restricted(&self, keep: &[usize]) -> SymBandMatrix {
        let mut out = SymBandMatrix::zeros(keep.len(), self.half_bw.min(keep.len().saturating_sub(1)));
        for (ri, &fi) in keep.iter().enumerate() {
            for (rj, &fj) in keep.iter().enumerate().take(ri + 1).skip(ri.saturating_sub(self.half_bw)) {
                if fi >= fj && fi - fj <= self.half_bw {
                    let v = self.get(fi, fj);
                    if v != 0.0 {
                        out.add(ri, rj, v);
                    }
                }
            }
        }
        out
    }

    /// LDLᵀ factorization with diagonal shift. Fails when a pivot is not
    /// strictly positive, signalling the caller to increase the shift.
    pub fn ldlt(&self, shift: f64) -> Option<LdltFactor> {
        let n = self.n;
        let hb = self.half_bw;
        let w = hb + 1;
        // l[i*w + (i-j)] holds L(i,j); d holds the pivots.
        let mut l = vec![0.0; n * w];
        let mut d = vec![0.0; n];
        for i in 0..n {
            let j0 = i.saturating_sub(hb);
            for j in j0..i {
                let mut s = self.get(i, j);
                let k0 = j.saturating_sub(hb).max(j0);
                for k in k0..j {
                    s -= l[i * w + (i - k)] * d[k] * l[j * w + (j - k)];
                }
                l[i * w + (i - j)] = s / d[j];
            }
            let mut s = self.get(i, i) + shift;
            for k in j0..i {
                let lik = l[i * w + (i - k)];
                s -= lik * lik * d[k];
            }
            if !(s.is_finite() && s > 0.0) {
                return None;
            }
            d[i] = s;
            l[i * w] = 1.0;
        }
        Some(LdltFactor { n, half_bw: hb, l, d })
    }
}

pub struct LdltFactor {
    n: usize,
    half_bw: usize,
    l: Vec<f64>,
    d: Vec<f64>,
}

impl LdltFactor {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.n);
        let w = self.half_bw + 1;
        let mut x = rhs.to_vec();
        // Forward: L y = b
        for i in 0..self.n {
            let j0 = i.saturating_sub(self.half_bw);
            let mut s = x[i];
            for j in j0..i {
                s -= self.l[i * w + (i - j)] * x[j];
            }
            x[i] = s;
        }
        // Diagonal
        for i in 0..self.n {
            x[i] /= self.d[i];
        }
        // Backward: Lᵀ x = y
        for i in (0..self.n).rev() {
            let jmax = (i + self.half_bw).min(self.n - 1);
            let mut s = x[i];
            for j in (i + 1)..=jmax {
                s -= self.l[j * w + (j - i)] * x[j];
            }
            x[i] = s;
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_and_solve_tridiagonal() {
        // SPD tridiagonal: 2 on diagonal, -1 off.
        let n = 12;
        let mut a = SymBandMatrix::zeros(n, 1);
        for i in 0..n {
            a.add(i, i, 2.0);
            if i > 0 {
                a.add(i, i - 1, -1.0);
            }
        }
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let b = a.mul_vec(&x_true);
        let f = a.ldlt(0.0).expect("SPD");
        let x = f.solve(&b);
        for i in 0..n {
            assert!((x[i] - x_true[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn indefinite_requires_shift() {
        let mut a = SymBandMatrix::zeros(2, 1);
        a.add(0, 0, 1.0);
        a.add(1, 1, -1.0);
        assert!(a.ldlt(0.0).is_none());
        assert!(a.ldlt(2.0).is_some());
    }

    #[test]
    fn restriction_matches_dense() {
        let n = 8;
        let mut a = SymBandMatrix::zeros(n, 3);
        for i in 0..n {
            for j in i.saturating_sub(3)..=i {
                a.add(i, j, (1 + i * 7 + j * 3) as f64);
            }
        }
        let keep = vec![0, 2, 3, 6, 7];
        let r = a.restricted(&keep);
        for (ri, &fi) in keep.iter().enumerate() {
            for (rj, &fj) in keep.iter().enumerate() {
                assert_eq!(r.get(ri, rj), if fi.abs_diff(fj) <= 3 { a.get(fi, fj) } else { 0.0 });
            }
        }
    }
}
