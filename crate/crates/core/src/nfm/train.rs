//! Training loop: mean-absolute-error loss, momentum gradient descent
//! alternating with the adaptive-moment method whenever validation stalls,
//! and a batch size that only grows.

use super::mlp::MlpModel;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimizer {
    MomentumSgd,
    Adam,
}

impl Optimizer {
    pub fn name(self) -> &'static str {
        match self {
            Optimizer::MomentumSgd => "sgd",
            Optimizer::Adam => "adam",
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub batch_initial: usize,
    pub batch_max: usize,
    pub lr_sgd: f64,
    pub momentum: f64,
    pub lr_adam: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub val_fraction: f64,
    /// Epochs without a 1% relative improvement before a stall event.
    pub stall_epochs: usize,
    pub stall_rel_improvement: f64,
    /// Switch to training on the entire dataset below this validation MAE.
    pub full_data_mae: f64,
    /// Hard stop once validation MAE reaches this.
    pub stop_mae: f64,
    /// Treat exhaustion as success when the best MAE is at or below this.
    pub acceptable_mae: Option<f64>,
    pub max_epochs: usize,
    /// Stall events at the maximum batch size before giving up.
    pub max_stalls_at_full_batch: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: vec![64, 64],
            batch_initial: 128,
            batch_max: 4096,
            lr_sgd: 1e-2,
            momentum: 0.9,
            lr_adam: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            val_fraction: 0.2,
            stall_epochs: 20,
            stall_rel_improvement: 0.01,
            full_data_mae: 0.001,
            stop_mae: 0.0005,
            acceptable_mae: Some(0.01),
            max_epochs: 1500,
            max_stalls_at_full_batch: 4,
        }
    }
}

impl TrainConfig {
    /// Full-size network and targets as configured for the physical runs;
    /// far too slow for CI-scale datasets.
    pub fn paper_scale() -> Self {
        TrainConfig {
            hidden: vec![392, 392, 392, 392],
            acceptable_mae: None,
            max_epochs: 100_000,
            ..TrainConfig::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct EpochStat {
    pub epoch: usize,
    pub train_mae: f64,
    pub val_mae: f64,
    pub optimizer: Optimizer,
    pub batch_size: usize,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub epochs: Vec<EpochStat>,
    pub best_val_mae: f64,
    pub final_val_mae: f64,
    pub reached_stop: bool,
}

/// MAE subgradient: zero at an exact zero residual.
fn mae_sign(r: f64) -> f64 {
    if r > 0.0 {
        1.0
    } else if r < 0.0 {
        -1.0
    } else {
        0.0
    }
}

struct Gradients {
    w: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros(model: &MlpModel) -> Self {
        Gradients {
            w: model.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            b: model.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }
}

/// Exact MAE gradients for a batch of (standardized input, target) pairs.
/// Loss is the mean over batch entries and the three output channels.
pub(crate) fn backward(model: &MlpModel, batch: &[(Vec<f64>, [f64; 3])]) -> (Gradients, f64) {
    let mut grads = Gradients::zeros(model);
    let n_layers = model.n_layers();
    let denom = (batch.len() * 3) as f64;
    let mut loss = 0.0;
    for (input, target) in batch {
        let acts = model.forward_trace(input);
        let out = acts.last().unwrap();
        let mut delta: Vec<f64> = out
            .iter()
            .zip(target.iter())
            .map(|(y, t)| {
                loss += (y - t).abs();
                mae_sign(y - t) / denom
            })
            .collect();
        for l in (0..n_layers).rev() {
            let a_in = &acts[l];
            let n_in = model.layer_sizes[l];
            let n_out = model.layer_sizes[l + 1];
            let gw = &mut grads.w[l];
            for o in 0..n_out {
                let d = delta[o];
                if d != 0.0 {
                    let row = &mut gw[o * n_in..(o + 1) * n_in];
                    for (g, a) in row.iter_mut().zip(a_in) {
                        *g += d * a;
                    }
                }
                grads.b[l][o] += d;
            }
            if l > 0 {
                let w = &model.weights[l];
                let mut prev = vec![0.0; n_in];
                #[allow(clippy::needless_range_loop)]
                for i in 0..n_in {
                    // Rectifier subgradient: zero at z <= 0 (post-activation
                    // zero means the pre-activation was at or below zero).
                    if a_in[i] > 0.0 {
                        let mut s = 0.0;
                        for o in 0..n_out {
                            s += w[o * n_in + i] * delta[o];
                        }
                        prev[i] = s;
                    }
                }
                delta = prev;
            }
        }
    }
    (grads, loss / denom)
}

fn mae_over(model: &MlpModel, set: &[(Vec<f64>, [f64; 3])]) -> f64 {
    if set.is_empty() {
        return f64::NAN;
    }
    let mut s = 0.0;
    for (input, target) in set {
        let out = model.forward_standardized(input);
        for c in 0..3 {
            s += (out[c] - target[c]).abs();
        }
    }
    s / (set.len() * 3) as f64
}

struct OptState {
    velocity_w: Vec<Vec<f64>>,
    velocity_b: Vec<Vec<f64>>,
    m_w: Vec<Vec<f64>>,
    m_b: Vec<Vec<f64>>,
    v_w: Vec<Vec<f64>>,
    v_b: Vec<Vec<f64>>,
    t: u64,
}

impl OptState {
    fn fresh(model: &MlpModel) -> Self {
        let zw = || model.weights.iter().map(|w| vec![0.0; w.len()]).collect::<Vec<_>>();
        let zb = || model.biases.iter().map(|b| vec![0.0; b.len()]).collect::<Vec<_>>();
        OptState {
            velocity_w: zw(),
            velocity_b: zb(),
            m_w: zw(),
            m_b: zb(),
            v_w: zw(),
            v_b: zb(),
            t: 0,
        }
    }
}

fn apply_update(model: &mut MlpModel, grads: &Gradients, opt: Optimizer, st: &mut OptState, cfg: &TrainConfig) {
    match opt {
        Optimizer::MomentumSgd => {
            for l in 0..model.n_layers() {
                for (i, g) in grads.w[l].iter().enumerate() {
                    st.velocity_w[l][i] = cfg.momentum * st.velocity_w[l][i] - cfg.lr_sgd * g;
                    model.weights[l][i] += st.velocity_w[l][i];
                }
                for (i, g) in grads.b[l].iter().enumerate() {
                    st.velocity_b[l][i] = cfg.momentum * st.velocity_b[l][i] - cfg.lr_sgd * g;
                    model.biases[l][i] += st.velocity_b[l][i];
                }
            }
        }
        Optimizer::Adam => {
            st.t += 1;
            let bc1 = 1.0 - cfg.beta1.powi(st.t as i32);
            let bc2 = 1.0 - cfg.beta2.powi(st.t as i32);
            for l in 0..model.n_layers() {
                for (i, g) in grads.w[l].iter().enumerate() {
                    st.m_w[l][i] = cfg.beta1 * st.m_w[l][i] + (1.0 - cfg.beta1) * g;
                    st.v_w[l][i] = cfg.beta2 * st.v_w[l][i] + (1.0 - cfg.beta2) * g * g;
                    let mh = st.m_w[l][i] / bc1;
                    let vh = st.v_w[l][i] / bc2;
                    model.weights[l][i] -= cfg.lr_adam * mh / (vh.sqrt() + cfg.adam_eps);
                }
                for (i, g) in grads.b[l].iter().enumerate() {
                    st.m_b[l][i] = cfg.beta1 * st.m_b[l][i] + (1.0 - cfg.beta1) * g;
                    st.v_b[l][i] = cfg.beta2 * st.v_b[l][i] + (1.0 - cfg.beta2) * g * g;
                    let mh = st.m_b[l][i] / bc1;
                    let vh = st.v_b[l][i] / bc2;
                    model.biases[l][i] -= cfg.lr_adam * mh / (vh.sqrt() + cfg.adam_eps);
                }
            }
        }
    }
}

/// Trains on the dataset's non-dimensional rows. Fully reproducible given
/// the seed; returns the best-validation model and the per-epoch report.
pub fn train(ds: &Dataset, cfg: &TrainConfig, seed: u64) -> Result<(MlpModel, TrainReport)> {
    if ds.rows.len() < 100 {
        return Err(Error::OutOfRange(format!(
            "dataset has {} rows, need at least 100",
            ds.rows.len()
        )));
    }
    let mean = ds.meta.input_mean;
    let std = ds.meta.input_std;
    let mut model = MlpModel::init(&cfg.hidden, mean, std, seed)?;

    // Standardized inputs and raw targets.
    let all: Vec<(Vec<f64>, [f64; 3])> = ds
        .rows
        .iter()
        .map(|r| {
            let nd = r.nondim.expect("dataset rows carry non-dimensional fields");
            (
                model.standardize(nd.x_bar, nd.z_bar).to_vec(),
                [r.lambda, r.alpha, nd.ls_bar],
            )
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x5eed));
    let mut order: Vec<usize> = (0..all.len()).collect();
    order.shuffle(&mut rng);
    let n_val = ((all.len() as f64) * cfg.val_fraction).round().max(1.0) as usize;
    let val_idx: Vec<usize> = order[..n_val].to_vec();
    let mut train_idx: Vec<usize> = order[n_val..].to_vec();
    let val_set: Vec<(Vec<f64>, [f64; 3])> = val_idx.iter().map(|&i| all[i].clone()).collect();

    let mut opt = Optimizer::MomentumSgd;
    let mut opt_state = OptState::fresh(&model);
    let mut batch = cfg.batch_initial.max(1);
    let mut best_val = f64::INFINITY;
    let mut best_threshold = f64::INFINITY; // for the 1%-improvement stall rule
    let mut best_model = model.clone();
    let mut patience = 0usize;
    let mut stall_count = 0usize;
    let mut stalls_at_full = 0usize;
    let mut merged_full_data = false;
    let mut report = TrainReport {
        epochs: Vec::new(),
        best_val_mae: f64::INFINITY,
        final_val_mae: f64::INFINITY,
        reached_stop: false,
    };

    for epoch in 0..cfg.max_epochs {
        train_idx.shuffle(&mut rng);
        for chunk in train_idx.chunks(batch.min(train_idx.len())) {
            let b: Vec<(Vec<f64>, [f64; 3])> = chunk.iter().map(|&i| all[i].clone()).collect();
            let (grads, _) = backward(&model, &b);
            apply_update(&mut model, &grads, opt, &mut opt_state, cfg);
        }
        let train_mae = {
            let set: Vec<(Vec<f64>, [f64; 3])> = train_idx.iter().map(|&i| all[i].clone()).collect();
            mae_over(&model, &set)
        };
        let val_mae = mae_over(&model, &val_set);
        report.epochs.push(EpochStat {
            epoch,
            train_mae,
            val_mae,
            optimizer: opt,
            batch_size: batch,
        });
        if val_mae < best_val {
            best_val = val_mae;
            best_model = model.clone();
        }
        if val_mae <= cfg.stop_mae {
            report.reached_stop = true;
            break;
        }
        if !merged_full_data && val_mae < cfg.full_data_mae {
            // Train on the entire dataset from here on; the monitored
            // validation rows stay the same for comparable reporting.
            train_idx = (0..all.len()).collect();
            merged_full_data = true;
        }
        if val_mae < best_threshold * (1.0 - cfg.stall_rel_improvement) {
            best_threshold = val_mae;
            patience = 0;
        } else {
            patience += 1;
        }
        if patience >= cfg.stall_epochs {
            patience = 0;
            stall_count += 1;
            opt = match opt {
                Optimizer::MomentumSgd => Optimizer::Adam,
                Optimizer::Adam => Optimizer::MomentumSgd,
            };
            opt_state = OptState::fresh(&model);
            if stall_count % 2 == 0 {
                let grown = (batch * 2).min(cfg.batch_max).min(train_idx.len().max(1));
                if grown == batch {
                    stalls_at_full += 1;
                } else {
                    batch = grown;
                }
            } else if batch >= cfg.batch_max.min(train_idx.len().max(1)) {
                stalls_at_full += 1;
            }
            if stalls_at_full > cfg.max_stalls_at_full_batch {
                match cfg.acceptable_mae {
                    Some(floor) if best_val <= floor => break,
                    _ => return Err(Error::NoProgress { best: best_val }),
                }
            }
        }
    }

    report.best_val_mae = best_val;
    report.final_val_mae = mae_over(&best_model, &val_set);
    if !report.reached_stop {
        if let Some(floor) = cfg.acceptable_mae {
            if best_val > floor {
                return Err(Error::NoProgress { best: best_val });
            }
        }
    }
    Ok((best_model, report))
}
