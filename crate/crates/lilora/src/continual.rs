//! Sequential task training: task loss plus the weighted basis stability
//! loss, per-task freezing, snapshotting, and the Adam optimizer.
//!
//! For the first task only the task loss is minimized. From the second task
//! on, strategies with the regularizer add `lambda * L_reg` where
//! `L_reg = sum_layers (1 - sim_t) * ||B0 - B0_prev||^2` and `sim_t` is the
//! Frobenius cosine between the live task residual `B~_t A~_t` and the
//! previous task's snapshot. `sim_t` is recomputed every optimization step;
//! by default it enters the loss as a plain coefficient (no gradient flows
//! through it), and `grad_through_sim` switches on full differentiation.
//!
//! Optimizer state is created fresh for every task (each task is its own
//! training run); within a task all trainable parameters share one step
//! counter for Adam bias correction.

use crate::adapters::{AdapterBank, Fusion, LayerAdapter, LiLoRALayerState, Strategy};
use crate::backbone::{accuracy, predictions, AdaptedModel, Backbone};
use crate::diffcore::{NodeId, Tape};
use crate::error::{Error, Result};
use crate::linalg::{frobenius_inner, Matrix, Rng};
use crate::metrics::AccuracyMatrix;
use crate::taskgen::{TaskSpec, TaskSuite};
use serde::Serialize;
use std::collections::BTreeMap;

/// Norm floor below which the residual cosine is defined as 0.
pub const SIM_NORM_FLOOR: f64 = 1e-12;

/// Hyperparameters of one continual run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs_per_task: usize,
    /// Weight of the basis stability loss.
    pub lambda: f64,
    pub strategy: Strategy,
    /// Differentiate through `sim_t` instead of treating it as a constant
    /// coefficient per step.
    pub grad_through_sim: bool,
    pub seed: u64,
    /// Rank of the shared matrices.
    pub rank: usize,
    /// Rank of the per-task residual.
    pub task_rank: usize,
    /// Draw down-projections from N(0,1) instead of N(0, 1/rank).
    pub unit_variance_init: bool,
}

impl TrainConfig {
    /// Desk-scale defaults: lr 1e-3, batch 32, 5 epochs per task, lambda 1.
    pub fn desk(strategy: Strategy, seed: u64) -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 32,
            epochs_per_task: 5,
            lambda: 1.0,
            strategy,
            grad_through_sim: false,
            seed,
            rank: 8,
            task_rank: 4,
            unit_variance_init: false,
        }
    }

    /// Settings matching the large-scale reference runs: lr 2e-5, batch 64,
    /// one epoch per task, rank 128 with half-rank residuals.
    pub fn paper(strategy: Strategy, seed: u64) -> Self {
        TrainConfig {
            learning_rate: 2e-5,
            batch_size: 64,
            epochs_per_task: 1,
            rank: 128,
            task_rank: 64,
            ..TrainConfig::desk(strategy, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.lambda < 0.0 {
            return Err(Error::Config(format!(
                "lambda must be non-negative, got {}",
                self.lambda
            )));
        }
        if self.batch_size == 0 || self.epochs_per_task == 0 {
            return Err(Error::Config(
                "batch size and epochs per task must be positive".into(),
            ));
        }
        if self.task_rank >= self.rank {
            return Err(Error::Config(format!(
                "task rank {} must be below rank {}",
                self.task_rank, self.rank
            )));
        }
        Ok(())
    }
}

/// Adam with one moment pair per named parameter and a shared step counter.
pub struct Optimizer {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
    slots: BTreeMap<String, (Matrix, Matrix)>,
}

impl Optimizer {
    pub fn adam(lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Optimizer {
            lr,
            beta1,
            beta2,
            eps,
            step: 0,
            slots: BTreeMap::new(),
        }
    }

    pub fn begin_step(&mut self) {
        self.step += 1;
    }

    /// One Adam update of `param` under gradient `grad`.
    pub fn update(&mut self, key: &str, param: &mut Matrix, grad: &Matrix) -> Result<()> {
        if param.shape() != grad.shape() {
            return Err(Error::Shape(format!(
                "gradient shape {}x{} does not match parameter {}x{} ({key})",
                grad.rows(),
                grad.cols(),
                param.rows(),
                param.cols()
            )));
        }
        let (m, v) = self.slots.entry(key.to_string()).or_insert_with(|| {
            let z = Matrix::zeros(param.rows(), param.cols()).expect("positive shape");
            (z.clone(), z)
        });
        let t = self.step.max(1) as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for i in 0..param.data().len() {
            let g = grad.data()[i];
            let mi = self.beta1 * m.data()[i] + (1.0 - self.beta1) * g;
            let vi = self.beta2 * v.data()[i] + (1.0 - self.beta2) * g * g;
            m.data_mut()[i] = mi;
            v.data_mut()[i] = vi;
            let update = self.lr * (mi / bc1) / ((vi / bc2).sqrt() + self.eps);
            param.data_mut()[i] -= update;
        }
        Ok(())
    }
}

/// Mean negative log-likelihood of `labels` under column-wise softmax.
pub fn task_loss(logits: &Matrix, labels: &[usize]) -> Result<f64> {
    if labels.len() != logits.cols() {
        return Err(Error::Data(format!(
            "{} labels for a batch of {}",
            labels.len(),
            logits.cols()
        )));
    }
    let classes = logits.rows();
    let mut total = 0.0;
    for (col, &label) in labels.iter().enumerate() {
        if label >= classes {
            return Err(Error::Data(format!(
                "label {label} out of range for {classes} classes"
            )));
        }
        let mut max = f64::NEG_INFINITY;
        for r in 0..classes {
            max = max.max(logits.get(r, col));
        }
        let mut sum = 0.0;
        for r in 0..classes {
            sum += (logits.get(r, col) - max).exp();
        }
        total += sum.ln() + max - logits.get(label, col);
    }
    Ok(total / labels.len() as f64)
}

/// Frobenius cosine between the current task's live residual `B~_t A~_t`
/// and the previous task's snapshot; 0 when either norm is below the floor.
pub fn residual_cosine(state: &LiLoRALayerState) -> Result<f64> {
    let prev = state.residual_prev.as_ref().ok_or_else(|| {
        Error::Contract("residual cosine is undefined for the first task".into())
    })?;
    let entry = state
        .tasks
        .last()
        .ok_or_else(|| Error::State("no task entry present".into()))?;
    let live = entry.residual()?;
    let np = live.frobenius_norm();
    let nq = prev.frobenius_norm();
    if np < SIM_NORM_FLOOR || nq < SIM_NORM_FLOOR {
        return Ok(0.0);
    }
    Ok(frobenius_inner(&live, prev)? / (np * nq))
}

/// `(1 - sim_t) * ||B0 - B0_prev||_F^2` for one layer.
pub fn basis_stability_loss(state: &LiLoRALayerState) -> Result<f64> {
    let b0_prev = state
        .b0_prev
        .as_ref()
        .ok_or_else(|| Error::State("missing B0 snapshot from the previous task".into()))?;
    let sim = residual_cosine(state)?;
    let drift = state.b0.sub(b0_prev)?;
    Ok((1.0 - sim) * drift.frobenius_norm_sq())
}

/// Stability loss summed over all injected layers of a lilora bank.
pub fn bank_stability_loss(bank: &AdapterBank) -> Result<f64> {
    if !bank.strategy.is_lilora_family() {
        return Err(Error::Contract(format!(
            "strategy {} has no stability loss",
            bank.strategy.tag()
        )));
    }
    let mut total = 0.0;
    for layer in &bank.layers {
        if let LayerAdapter::LiLora(s) = layer {
            total += basis_stability_loss(s)?;
        }
    }
    Ok(total)
}

/// Parameter slot inside one layer of a bank.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    /// Down-projection: shared `A` or the per-task / reused pair's `A`.
    A,
    /// Full up-projection `B` (seq-lora, dir-lora, shared-a).
    B,
    /// Shared basis `B0`.
    B0,
    BTilde,
    ATilde,
    /// Fusion pre-activation, stored as a 1x1 matrix.
    Z,
}

impl Slot {
    fn key(&self, layer: usize) -> String {
        format!("l{layer}/{self:?}")
    }
}

fn slot_value(bank: &AdapterBank, layer: usize, slot: Slot, task: usize) -> Result<Matrix> {
    let missing = || Error::Lookup(format!("slot {slot:?} missing in layer {layer}"));
    match (&bank.layers[layer], slot) {
        (LayerAdapter::Seq(s), Slot::A) => Ok(s.a.clone()),
        (LayerAdapter::Seq(s), Slot::B) => Ok(s.b.clone()),
        (LayerAdapter::Dir(s), Slot::A) => Ok(s.tasks[task].a.clone()),
        (LayerAdapter::Dir(s), Slot::B) => Ok(s.tasks[task].b.clone()),
        (LayerAdapter::SharedA(s), Slot::A) => Ok(s.a.clone()),
        (LayerAdapter::SharedA(s), Slot::B) => Ok(s.tasks[task].b.clone()),
        (LayerAdapter::LiLora(s), Slot::A) => Ok(s.a.clone()),
        (LayerAdapter::LiLora(s), Slot::B0) => Ok(s.b0.clone()),
        (LayerAdapter::LiLora(s), Slot::BTilde) => Ok(s.tasks[task].b_tilde.clone()),
        (LayerAdapter::LiLora(s), Slot::ATilde) => Ok(s.tasks[task].a_tilde.clone()),
        (LayerAdapter::LiLora(s), Slot::Z) => match s.tasks[task].fusion {
            Fusion::Learnable { z } => Ok(Matrix::scalar(z)),
            Fusion::Fixed(_) => Err(missing()),
        },
        _ => Err(missing()),
    }
}

fn slot_store(
    bank: &mut AdapterBank,
    layer: usize,
    slot: Slot,
    task: usize,
    value: Matrix,
) -> Result<()> {
    let missing = || Error::Lookup(format!("slot {slot:?} missing in layer {layer}"));
    match (&mut bank.layers[layer], slot) {
        (LayerAdapter::Seq(s), Slot::A) => s.a = value,
        (LayerAdapter::Seq(s), Slot::B) => s.b = value,
        (LayerAdapter::Dir(s), Slot::A) => s.tasks[task].a = value,
        (LayerAdapter::Dir(s), Slot::B) => s.tasks[task].b = value,
        (LayerAdapter::SharedA(s), Slot::A) => s.a = value,
        (LayerAdapter::SharedA(s), Slot::B) => s.tasks[task].b = value,
        (LayerAdapter::LiLora(s), Slot::A) => s.a = value,
        (LayerAdapter::LiLora(s), Slot::B0) => s.b0 = value,
        (LayerAdapter::LiLora(s), Slot::BTilde) => s.tasks[task].b_tilde = value,
        (LayerAdapter::LiLora(s), Slot::ATilde) => s.tasks[task].a_tilde = value,
        (LayerAdapter::LiLora(s), Slot::Z) => match &mut s.tasks[task].fusion {
            Fusion::Learnable { z } => *z = value.as_scalar()?,
            Fusion::Fixed(_) => return Err(missing()),
        },
        _ => return Err(missing()),
    }
    Ok(())
}

/// The tape of one optimization step, with handles to the loss parts and
/// the bound trainable parameters.
pub struct TrainingGraph {
    pub tape: Tape,
    /// `L_task + lambda * L_reg` (or just `L_task` when no regularizer).
    pub root: NodeId,
    pub task_loss: NodeId,
    /// Raw stability loss (pre-lambda), present when the regularizer is on.
    pub reg_loss: Option<NodeId>,
    /// (layer, slot, node) of every trainable parameter.
    pub params: Vec<(usize, Slot, NodeId)>,
    /// Per-layer `sim_t` used this step (empty before the second task or for
    /// strategies without the decomposition).
    pub sims: Vec<f64>,
}

/// Build the forward graph of one training step for the current (last) task.
pub fn build_training_graph(
    backbone: &Backbone,
    bank: &AdapterBank,
    x: Matrix,
    labels: Vec<usize>,
    cfg: &TrainConfig,
) -> Result<TrainingGraph> {
    let task = bank
        .num_tasks()
        .checked_sub(1)
        .ok_or_else(|| Error::State("bank has no task entries".into()))?;
    let first_task = task == 0;
    let use_reg = cfg.strategy.uses_reg() && !first_task && cfg.lambda > 0.0;

    let mut tape = Tape::new();
    let mut params: Vec<(usize, Slot, NodeId)> = Vec::new();
    let mut sims = Vec::new();
    let mut reg_terms: Vec<NodeId> = Vec::new();

    let mut h = tape.input(x);
    let last = backbone.layers().len() - 1;
    for (i, layer) in backbone.layers().iter().enumerate() {
        let delta = match &bank.layers[i] {
            LayerAdapter::Seq(s) => {
                let b = tape.param(s.b.clone());
                let a = tape.param(s.a.clone());
                params.push((i, Slot::B, b));
                params.push((i, Slot::A, a));
                tape.matmul(b, a)?
            }
            LayerAdapter::Dir(s) => {
                let b = tape.param(s.tasks[task].b.clone());
                let a = tape.param(s.tasks[task].a.clone());
                params.push((i, Slot::B, b));
                params.push((i, Slot::A, a));
                tape.matmul(b, a)?
            }
            LayerAdapter::SharedA(s) => {
                let b = tape.param(s.tasks[task].b.clone());
                let a = tape.param(s.a.clone());
                params.push((i, Slot::B, b));
                params.push((i, Slot::A, a));
                tape.matmul(b, a)?
            }
            LayerAdapter::LiLora(s) => {
                let a = tape.param(s.a.clone());
                let b0 = tape.param(s.b0.clone());
                let bt = tape.param(s.tasks[task].b_tilde.clone());
                let at = tape.param(s.tasks[task].a_tilde.clone());
                params.push((i, Slot::A, a));
                params.push((i, Slot::B0, b0));
                params.push((i, Slot::BTilde, bt));
                params.push((i, Slot::ATilde, at));
                let residual = tape.matmul(bt, at)?;
                let blended = match s.tasks[task].fusion {
                    Fusion::Learnable { z } => {
                        let zn = tape.param(Matrix::scalar(z));
                        params.push((i, Slot::Z, zn));
                        let alpha = tape.sigmoid(zn);
                        let one = tape.input(Matrix::scalar(1.0));
                        let neg_alpha = tape.scale(alpha, -1.0);
                        let one_minus = tape.add(one, neg_alpha)?;
                        let shared_part = tape.scale_by(b0, alpha)?;
                        let task_part = tape.scale_by(residual, one_minus)?;
                        tape.add(shared_part, task_part)?
                    }
                    Fusion::Fixed(alpha) => {
                        let shared_part = tape.scale(b0, alpha);
                        let task_part = tape.scale(residual, 1.0 - alpha);
                        tape.add(shared_part, task_part)?
                    }
                };
                // Stability loss wiring shares the residual node.
                if use_reg || (cfg.strategy.is_lilora_family() && !first_task) {
                    let sim = residual_cosine(s)?;
                    sims.push(sim);
                    if use_reg {
                        let b0_prev = s.b0_prev.as_ref().ok_or_else(|| {
                            Error::State("missing B0 snapshot from the previous task".into())
                        })?;
                        let prev_const = tape.input(b0_prev.clone());
                        let neg_prev = tape.scale(prev_const, -1.0);
                        let drift = tape.add(b0, neg_prev)?;
                        let norm_sq = tape.frobenius_norm_sq(drift);
                        let term = if cfg.grad_through_sim {
                            let res_prev = s.residual_prev.as_ref().ok_or_else(|| {
                                Error::State("missing residual snapshot".into())
                            })?;
                            let prev_res = tape.input(res_prev.clone());
                            let cos = tape.frobenius_cosine(residual, prev_res)?;
                            let one = tape.input(Matrix::scalar(1.0));
                            let neg_cos = tape.scale(cos, -1.0);
                            let one_minus = tape.add(one, neg_cos)?;
                            tape.scale_by(norm_sq, one_minus)?
                        } else {
                            tape.scale(norm_sq, 1.0 - sim)
                        };
                        reg_terms.push(term);
                    }
                }
                tape.matmul(blended, a)?
            }
        };
        let w0 = tape.input(layer.w0.clone());
        let merged = tape.add(w0, delta)?;
        let z = tape.matmul(merged, h)?;
        let b = tape.input(layer.b0.clone());
        h = tape.bias_add(z, b)?;
        if i != last {
            h = tape.relu(h);
        }
    }
    let loss_task = tape.softmax_cross_entropy(h, labels)?;

    let (root, reg_loss) = if reg_terms.is_empty() {
        (loss_task, None)
    } else {
        let mut sum = reg_terms[0];
        for &t in &reg_terms[1..] {
            sum = tape.add(sum, t)?;
        }
        let weighted = tape.scale(sum, cfg.lambda);
        (tape.add(loss_task, weighted)?, Some(sum))
    };

    Ok(TrainingGraph {
        tape,
        root,
        task_loss: loss_task,
        reg_loss,
        params,
        sims,
    })
}

/// One optimization step, logged.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct StepRecord {
    pub step: u64,
    pub task: usize,
    pub l_task: f64,
    /// Raw stability loss (pre-lambda); 0 when inactive.
    pub l_reg: f64,
    /// Per-layer `sim_t` (empty before the second task / without the
    /// decomposition).
    pub sim: Vec<f64>,
    /// Per-layer fusion coefficients (empty outside the lilora family).
    pub alpha: Vec<f64>,
}

/// Log of one task's training.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct TaskTrainLog {
    pub task: usize,
    pub steps: Vec<StepRecord>,
    pub final_train_accuracy: f64,
    /// Per-layer `||B0 - B0_prev||_F` at task end (lilora, second task on).
    pub b0_drift: Vec<f64>,
}

/// Train the bank's current (last) task on `task.train`. Previous entries
/// must be frozen; at task end the entry is frozen and the lilora snapshots
/// are refreshed.
pub fn train_task(
    backbone: &Backbone,
    bank: &mut AdapterBank,
    task: &TaskSpec,
    cfg: &TrainConfig,
    rng: &mut Rng,
    global_step: &mut u64,
) -> Result<TaskTrainLog> {
    cfg.validate()?;
    if !backbone.is_frozen() {
        return Err(Error::State("backbone must be frozen before task training".into()));
    }
    let task_idx = bank
        .num_tasks()
        .checked_sub(1)
        .ok_or_else(|| Error::State("bank has no task entries".into()))?;
    if task.task_id != task_idx {
        return Err(Error::State(format!(
            "task {} is not the bank's current task {task_idx}",
            task.task_id
        )));
    }

    let mut opt = Optimizer::adam(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);
    let mut indices: Vec<usize> = (0..task.train.len()).collect();
    let mut steps = Vec::new();

    for _epoch in 0..cfg.epochs_per_task {
        rng.shuffle(&mut indices);
        for chunk in indices.chunks(cfg.batch_size) {
            *global_step += 1;
            let x = task.train.x.gather_columns(chunk)?;
            let labels: Vec<usize> = chunk.iter().map(|&i| task.train.labels[i]).collect();

            let mut graph = build_training_graph(backbone, bank, x, labels, cfg)?;
            let total = graph.tape.forward(graph.root)?.get(0, 0);
            if !total.is_finite() {
                return Err(Error::Training {
                    step: *global_step,
                    msg: format!("loss is {total}"),
                });
            }
            let l_task = graph.tape.value(graph.task_loss).get(0, 0);
            let l_reg = graph
                .reg_loss
                .map(|n| graph.tape.value(n).get(0, 0))
                .unwrap_or(0.0);
            graph.tape.backward(graph.root)?;

            opt.begin_step();
            for &(layer, slot, node) in &graph.params {
                let mut value = slot_value(bank, layer, slot, task_idx)?;
                opt.update(&slot.key(layer), &mut value, graph.tape.grad(node))?;
                slot_store(bank, layer, slot, task_idx, value)?;
            }

            let alpha = if bank.strategy.is_lilora_family() {
                bank.alphas(task_idx)?
            } else {
                Vec::new()
            };
            steps.push(StepRecord {
                step: *global_step,
                task: task_idx,
                l_task,
                l_reg,
                sim: graph.sims.clone(),
                alpha,
            });
        }
    }

    // Task-end bookkeeping: measure drift, then freeze and refresh snapshots.
    let mut b0_drift = Vec::new();
    if bank.strategy.is_lilora_family() && task_idx > 0 {
        for layer in &bank.layers {
            if let LayerAdapter::LiLora(s) = layer {
                let prev = s
                    .b0_prev
                    .as_ref()
                    .ok_or_else(|| Error::State("missing B0 snapshot".into()))?;
                b0_drift.push(s.b0.sub(prev)?.frobenius_norm());
            }
        }
    }
    bank.freeze_task(task_idx)?;

    let model = AdaptedModel::new(backbone, bank, task_idx);
    let logits = model.forward(&task.train.x)?;
    let final_train_accuracy = accuracy(&logits, &task.train.labels);

    Ok(TaskTrainLog {
        task: task_idx,
        steps,
        final_train_accuracy,
        b0_drift,
    })
}

/// Per-layer fusion coefficient before and after training one task.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct AlphaTrace {
    pub task: usize,
    pub layer: usize,
    pub before: f64,
    pub after: f64,
}

/// Everything a continual run produces.
pub struct ContinualRun {
    pub accuracy: AccuracyMatrix,
    pub bank: AdapterBank,
    pub logs: Vec<TaskTrainLog>,
    pub alpha_traces: Vec<AlphaTrace>,
    /// `stage_predictions[k][j]`: predicted class ids on task `j`'s test set
    /// after training task `k` (j <= k).
    pub stage_predictions: Vec<Vec<Vec<usize>>>,
}

/// Train all suite tasks in order; after each task `k`, evaluate every task
/// `j <= k` with its own entry to fill the accuracy matrix (in percent).
pub fn run_continual(
    suite: &TaskSuite,
    backbone: &Backbone,
    cfg: &TrainConfig,
) -> Result<ContinualRun> {
    cfg.validate()?;
    if backbone.output_dim() != suite.total_classes() {
        return Err(Error::Config(format!(
            "backbone head covers {} classes, suite has {}",
            backbone.output_dim(),
            suite.total_classes()
        )));
    }
    let mut rng = Rng::from_seed(cfg.seed);
    let dims = backbone.adapter_dims(cfg.rank, cfg.task_rank)?;
    let mut bank = AdapterBank::new(cfg.strategy, &dims, &mut rng, cfg.unit_variance_init)?;

    let k_tasks = suite.num_tasks();
    let mut matrix = AccuracyMatrix::new(k_tasks)?;
    let mut logs = Vec::with_capacity(k_tasks);
    let mut alpha_traces = Vec::new();
    let mut stage_predictions = Vec::with_capacity(k_tasks);
    let mut global_step = 0u64;

    for t in 0..k_tasks {
        bank.add_task(&mut rng)?;
        let before = if bank.strategy.is_lilora_family() {
            bank.alphas(t)?
        } else {
            Vec::new()
        };

        let log = train_task(backbone, &mut bank, &suite.tasks[t], cfg, &mut rng, &mut global_step)?;
        logs.push(log);

        if bank.strategy.is_lilora_family() {
            let after = bank.alphas(t)?;
            for (layer, (&b, &a)) in before.iter().zip(after.iter()).enumerate() {
                alpha_traces.push(AlphaTrace {
                    task: t,
                    layer,
                    before: b,
                    after: a,
                });
            }
        }

        let mut stage = Vec::with_capacity(t + 1);
        for j in 0..=t {
            let model = AdaptedModel::new(backbone, &bank, j);
            let logits = model.forward(&suite.tasks[j].test.x)?;
            let acc = accuracy(&logits, &suite.tasks[j].test.labels);
            matrix.set(t + 1, j + 1, 100.0 * acc)?;
            stage.push(predictions(&logits));
        }
        stage_predictions.push(stage);
    }

    Ok(ContinualRun {
        accuracy: matrix,
        bank,
        logs,
        alpha_traces,
        stage_predictions,
    })
}
