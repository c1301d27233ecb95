//! Fully-connected regression network, double precision, rectifier
//! activations on all but the final layer, with input standardization
//! baked into the model.

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::{Read, Write};
use std::path::Path;

pub const MODEL_FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"PFNFMDL\0";

#[derive(Debug, Clone)]
pub struct MlpModel {
    /// Layer widths, input to output, e.g. [2, 64, 64, 3].
    pub layer_sizes: Vec<usize>,
    /// Per layer: out × in, row-major.
    pub weights: Vec<Vec<f64>>,
    /// Per layer: out.
    pub biases: Vec<Vec<f64>>,
    pub input_mean: [f64; 2],
    pub input_std: [f64; 2],
}

impl MlpModel {
    /// He-style uniform initialization scaled by fan-in; biases zero.
    pub fn init(hidden: &[usize], input_mean: [f64; 2], input_std: [f64; 2], seed: u64) -> Result<Self> {
        let mut sizes = vec![2usize];
        sizes.extend_from_slice(hidden);
        sizes.push(3);
        if hidden.iter().any(|&h| h == 0) {
            return Err(Error::OutOfRange("hidden layer of width 0".into()));
        }
        if input_std.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::DegenerateChannel(format!("input std {input_std:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..sizes.len() - 1 {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let bound = (6.0 / fan_in as f64).sqrt();
            let w: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-bound..bound))
                .collect();
            weights.push(w);
            biases.push(vec![0.0; fan_out]);
        }
        Ok(MlpModel {
            layer_sizes: sizes,
            weights,
            biases,
            input_mean,
            input_std,
        })
    }

    pub fn n_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    /// Standardizes the raw input exactly once.
    pub fn standardize(&self, x_bar: f64, z_bar: f64) -> [f64; 2] {
        [
            (x_bar - self.input_mean[0]) / self.input_std[0],
            (z_bar - self.input_mean[1]) / self.input_std[1],
        ]
    }

    /// (λ, α, l̄_s) prediction at a raw (x̄, z̄) input.
    pub fn forward(&self, x_bar: f64, z_bar: f64) -> [f64; 3] {
        let std_in = self.standardize(x_bar, z_bar);
        let out = self.forward_standardized(&std_in);
        [out[0], out[1], out[2]]
    }

    /// Forward pass on an already standardized input.
    pub fn forward_standardized(&self, input: &[f64]) -> Vec<f64> {
        let mut a: Vec<f64> = input.to_vec();
        for l in 0..self.n_layers() {
            a = self.layer_forward(l, &a, l + 1 < self.n_layers());
        }
        a
    }

    fn layer_forward(&self, l: usize, input: &[f64], relu: bool) -> Vec<f64> {
        let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
        debug_assert_eq!(input.len(), n_in);
        let w = &self.weights[l];
        let b = &self.biases[l];
        let mut out = Vec::with_capacity(n_out);
        for o in 0..n_out {
            let mut s = b[o];
            let row = &w[o * n_in..(o + 1) * n_in];
            for (wi, xi) in row.iter().zip(input) {
                s += wi * xi;
            }
            out.push(if relu && s <= 0.0 { 0.0 } else { s });
        }
        out
    }

    /// Forward pass retaining every layer's post-activation output
    /// (activations[0] is the standardized input). Used by training.
    pub(crate) fn forward_trace(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.n_layers() + 1);
        acts.push(input.to_vec());
        for l in 0..self.n_layers() {
            let next = self.layer_forward(l, acts.last().unwrap(), l + 1 < self.n_layers());
            acts.push(next);
        }
        acts
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
        let mut f = std::fs::File::create(path)?;
        f.write_all(MAGIC)?;
        f.write_all(&MODEL_FORMAT_VERSION.to_le_bytes())?;
        f.write_all(&(self.layer_sizes.len() as u32).to_le_bytes())?;
        for &s in &self.layer_sizes {
            f.write_all(&(s as u32).to_le_bytes())?;
        }
        for v in self.input_mean.iter().chain(self.input_std.iter()) {
            f.write_all(&v.to_le_bytes())?;
        }
        for l in 0..self.n_layers() {
            for v in &self.weights[l] {
                f.write_all(&v.to_le_bytes())?;
            }
            for v in &self.biases[l] {
                f.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut f = std::fs::File::open(path)
            .map_err(|_| Error::MissingArtifact(format!("model file {}", path.display())))?;
        let mut magic = [0u8; 8];
        f.read_exact(&mut magic)
            .map_err(|_| Error::FormatError("model file too short for magic".into()))?;
        if &magic != MAGIC {
            return Err(Error::FormatError("bad model magic bytes".into()));
        }
        let mut u32buf = [0u8; 4];
        let mut read_u32 = |f: &mut std::fs::File| -> Result<u32> {
            f.read_exact(&mut u32buf)
                .map_err(|_| Error::FormatError("model file truncated".into()))?;
            Ok(u32::from_le_bytes(u32buf))
        };
        let version = read_u32(&mut f)?;
        if version != MODEL_FORMAT_VERSION {
            return Err(Error::VersionMismatch { found: version, expected: MODEL_FORMAT_VERSION });
        }
        let n_sizes = read_u32(&mut f)? as usize;
        if !(2..=64).contains(&n_sizes) {
            return Err(Error::FormatError(format!("implausible layer count {n_sizes}")));
        }
        let mut layer_sizes = Vec::with_capacity(n_sizes);
        for _ in 0..n_sizes {
            layer_sizes.push(read_u32(&mut f)? as usize);
        }
        if layer_sizes[0] != 2 || *layer_sizes.last().unwrap() != 3 {
            return Err(Error::FormatError(format!(
                "model must map 2 inputs to 3 outputs, found {layer_sizes:?}"
            )));
        }
        let mut f64buf = [0u8; 8];
        let mut read_f64 = |f: &mut std::fs::File| -> Result<f64> {
            f.read_exact(&mut f64buf)
                .map_err(|_| Error::FormatError("model file truncated".into()))?;
            Ok(f64::from_le_bytes(f64buf))
        };
        let input_mean = [read_f64(&mut f)?, read_f64(&mut f)?];
        let input_std = [read_f64(&mut f)?, read_f64(&mut f)?];
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..n_sizes - 1 {
            let (n_in, n_out) = (layer_sizes[l], layer_sizes[l + 1]);
            let mut w = Vec::with_capacity(n_in * n_out);
            for _ in 0..n_in * n_out {
                w.push(read_f64(&mut f)?);
            }
            let mut b = Vec::with_capacity(n_out);
            for _ in 0..n_out {
                b.push(read_f64(&mut f)?);
            }
            weights.push(w);
            biases.push(b);
        }
        let mut extra = Vec::new();
        f.read_to_end(&mut extra)?;
        if !extra.is_empty() {
            return Err(Error::FormatError(format!("{} trailing bytes", extra.len())));
        }
        Ok(MlpModel {
            layer_sizes,
            weights,
            biases,
            input_mean,
            input_std,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_model(seed: u64) -> MlpModel {
        MlpModel::init(&[4], [0.5, -0.2], [1.3, 0.8], seed).unwrap()
    }

    /// Independent forward-pass oracle: plain nested-loop matrix
    /// arithmetic, written separately from the implementation path.
    fn oracle_forward(m: &MlpModel, x_bar: f64, z_bar: f64) -> [f64; 3] {
        let mut a = vec![
            (x_bar - m.input_mean[0]) / m.input_std[0],
            (z_bar - m.input_mean[1]) / m.input_std[1],
        ];
        for l in 0..m.layer_sizes.len() - 1 {
            let (n_in, n_out) = (m.layer_sizes[l], m.layer_sizes[l + 1]);
            let mut next = vec![0.0; n_out];
            #[allow(clippy::needless_range_loop)]
            for o in 0..n_out {
                let mut s = m.biases[l][o];
                for i in 0..n_in {
                    s += m.weights[l][o * n_in + i] * a[i];
                }
                next[o] = s;
            }
            if l + 1 < m.layer_sizes.len() - 1 {
                for v in next.iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            a = next;
        }
        [a[0], a[1], a[2]]
    }

    #[test]
    fn forward_matches_independent_oracle() {
        let m = MlpModel::init(&[16, 8], [0.1, 0.2], [0.9, 1.1], 3).unwrap();
        for k in 0..50 {
            let x = -3.0 + 0.13 * k as f64;
            let z = 0.05 * k as f64;
            let a = m.forward(x, z);
            let b = oracle_forward(&m, x, z);
            for c in 0..3 {
                let denom = b[c].abs().max(1e-12);
                assert!((a[c] - b[c]).abs() / denom < 1e-12, "{a:?} vs {b:?}");
            }
        }
    }

    #[test]
    fn zero_weights_output_final_bias() {
        let mut m = tiny_model(1);
        for w in m.weights.iter_mut() {
            w.iter_mut().for_each(|v| *v = 0.0);
        }
        let lb = m.biases.last_mut().unwrap();
        lb.copy_from_slice(&[0.7, -0.3, 2.0]);
        for (x, z) in [(0.0, 0.0), (-5.0, 3.0), (100.0, -40.0)] {
            assert_eq!(m.forward(x, z), [0.7, -0.3, 2.0]);
        }
    }

    #[test]
    fn forward_deterministic_bitwise() {
        let m = tiny_model(9);
        let a = m.forward(-1.234, 0.567);
        let b = m.forward(-1.234, 0.567);
        for c in 0..3 {
            assert_eq!(a[c].to_bits(), b[c].to_bits());
        }
    }

    #[test]
    fn standardization_applied_exactly_once() {
        let m = tiny_model(4);
        let (x, z) = (-2.0, 1.5);
        let manual = m.forward_standardized(&m.standardize(x, z));
        let direct = m.forward(x, z);
        for c in 0..3 {
            assert!((manual[c] - direct[c]).abs() <= 1e-12 * manual[c].abs().max(1.0));
        }
    }

    #[test]
    fn save_load_bitwise_roundtrip() {
        let m = MlpModel::init(&[8, 8], [0.3, 0.6], [2.0, 0.5], 11).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        m.save(&path).unwrap();
        let l = MlpModel::load(&path).unwrap();
        assert_eq!(m.layer_sizes, l.layer_sizes);
        for (wa, wb) in m.weights.iter().zip(&l.weights) {
            for (a, b) in wa.iter().zip(wb) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
        let a = m.forward(-0.8, 0.9);
        let b = l.forward(-0.8, 0.9);
        for c in 0..3 {
            assert_eq!(a[c].to_bits(), b[c].to_bits());
        }
    }

    #[test]
    fn corrupted_magic_and_version() {
        let m = tiny_model(2);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        m.save(&path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(MlpModel::load(&path), Err(Error::FormatError(_))));

        m.save(&path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[8] = 99; // version field
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(MlpModel::load(&path), Err(Error::VersionMismatch { .. })));
    }
}
