//! Small frozen feed-forward classifier with adapter injection points.
//!
//! The backbone is pretrained once on the base split of a suite, then frozen
//! for the rest of the experiment; adapters supply per-task weight updates
//! on top of the frozen linear maps. The output head covers the union of all
//! task label ranges, so adapters must repurpose it per task — which is what
//! makes forgetting measurable. Bias vectors are never adapted.

use crate::adapters::{merge_weights, AdapterBank, LayerDims};
use crate::continual::Optimizer;
use crate::diffcore::Tape;
use crate::error::{Error, Result};
use crate::linalg::{gaussian_matrix, Matrix, Rng};
use crate::persist::TensorContainer;
use crate::taskgen::Dataset;

/// One frozen linear map with bias.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    /// `d x k` weight.
    pub w0: Matrix,
    /// `d x 1` bias.
    pub b0: Matrix,
}

/// Frozen feed-forward classifier; ReLU between hidden layers, linear head.
#[derive(Clone, Debug, PartialEq)]
pub struct Backbone {
    layers: Vec<DenseLayer>,
    input_dim: usize,
    output_dim: usize,
    frozen: bool,
}

impl Backbone {
    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// Adapter dimensions for injecting into every linear map.
    pub fn adapter_dims(&self, r: usize, r_tilde: usize) -> Result<Vec<LayerDims>> {
        self.layers
            .iter()
            .map(|l| LayerDims::new(l.w0.rows(), l.w0.cols(), r, r_tilde))
            .collect()
    }

    /// Forward pass of the frozen network alone (logits, classes x batch).
    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        if x.rows() != self.input_dim {
            return Err(Error::Shape(format!(
                "input has {} rows, backbone expects {}",
                x.rows(),
                self.input_dim
            )));
        }
        let mut h = x.clone();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.w0.matmul(&h)?;
            for row in 0..h.rows() {
                let b = layer.b0.get(row, 0);
                for col in 0..h.cols() {
                    h.set(row, col, h.get(row, col) + b);
                }
            }
            if i != last {
                h = h.map(|v| if v > 0.0 { v } else { 0.0 });
            }
        }
        Ok(h)
    }

    /// Named tensors for checkpointing; the serialized bytes double as the
    /// immutability witness across a continual run.
    pub fn to_named_tensors(&self) -> Vec<(String, Matrix)> {
        let mut out = Vec::new();
        let mut dims = vec![self.input_dim as f64];
        for l in &self.layers {
            dims.push(l.w0.rows() as f64);
        }
        out.push((
            "meta/dims".into(),
            Matrix::from_vec(1, dims.len(), dims).expect("dims nonempty"),
        ));
        for (i, l) in self.layers.iter().enumerate() {
            out.push((format!("layer{i}/W0"), l.w0.clone()));
            out.push((format!("layer{i}/b0"), l.b0.clone()));
        }
        out
    }

    pub fn from_named_tensors(container: &TensorContainer) -> Result<Self> {
        let dims = container.get("meta/dims")?;
        let n_layers = dims.cols() - 1;
        let mut layers = Vec::with_capacity(n_layers);
        for i in 0..n_layers {
            layers.push(DenseLayer {
                w0: container.get(&format!("layer{i}/W0"))?.clone(),
                b0: container.get(&format!("layer{i}/b0"))?.clone(),
            });
        }
        let input_dim = dims.get(0, 0) as usize;
        let output_dim = layers
            .last()
            .map(|l| l.w0.rows())
            .ok_or_else(|| Error::Parse {
                offset: 0,
                msg: "backbone checkpoint has no layers".into(),
            })?;
        Ok(Backbone {
            layers,
            input_dim,
            output_dim,
            frozen: true,
        })
    }

    /// CRC32 of the serialized backbone.
    pub fn checksum(&self) -> u32 {
        let bytes = TensorContainer::from_entries(self.to_named_tensors()).to_bytes();
        crc32fast::hash(&bytes)
    }
}

/// Pretraining settings for the backbone.
#[derive(Clone, Debug, PartialEq)]
pub struct PretrainConfig {
    /// Hidden layer widths, e.g. `[64, 64]`.
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            hidden: vec![64, 64],
            epochs: 10,
            learning_rate: 1e-3,
            batch_size: 32,
        }
    }
}

/// Train all backbone weights on the base split, freeze, and report test
/// accuracy. With `epochs = 0` the randomly initialized network is frozen
/// as-is (accuracy near chance).
pub fn pretrain_backbone(
    train: &Dataset,
    test: &Dataset,
    num_classes: usize,
    cfg: &PretrainConfig,
    rng: &mut Rng,
) -> Result<(Backbone, f64)> {
    if train.is_empty() {
        return Err(Error::Data("base training set is empty".into()));
    }
    let input_dim = train.x.rows();
    let mut widths = vec![input_dim];
    widths.extend_from_slice(&cfg.hidden);
    widths.push(num_classes);

    // He-style init for relu hidden layers.
    let mut layers = Vec::with_capacity(widths.len() - 1);
    for w in widths.windows(2) {
        let (k, d) = (w[0], w[1]);
        let std = (2.0 / k as f64).sqrt();
        layers.push(DenseLayer {
            w0: gaussian_matrix(rng, d, k, std)?,
            b0: Matrix::zeros(d, 1)?,
        });
    }

    let mut opt = Optimizer::adam(cfg.learning_rate, 0.9, 0.999, 1e-8);
    let mut indices: Vec<usize> = (0..train.len()).collect();
    let mut step: u64 = 0;
    for _epoch in 0..cfg.epochs {
        rng.shuffle(&mut indices);
        for chunk in indices.chunks(cfg.batch_size) {
            step += 1;
            let x = train.x.gather_columns(chunk)?;
            let labels: Vec<usize> = chunk.iter().map(|&i| train.labels[i]).collect();
            if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
                return Err(Error::Data(format!(
                    "label {bad} out of range for {num_classes} classes"
                )));
            }

            let mut tape = Tape::new();
            let mut bound = Vec::new();
            let mut h = tape.input(x);
            let last = layers.len() - 1;
            for (i, layer) in layers.iter().enumerate() {
                let w = tape.param(layer.w0.clone());
                let b = tape.param(layer.b0.clone());
                bound.push((i, w, b));
                let z = tape.matmul(w, h)?;
                h = tape.bias_add(z, b)?;
                if i != last {
                    h = tape.relu(h);
                }
            }
            let loss = tape.softmax_cross_entropy(h, labels)?;
            let value = tape.forward(loss)?.get(0, 0);
            if !value.is_finite() {
                return Err(Error::Training {
                    step,
                    msg: format!("pretraining loss is {value}"),
                });
            }
            tape.backward(loss)?;

            opt.begin_step();
            for &(i, w, b) in &bound {
                opt.update(&format!("l{i}/W"), &mut layers[i].w0, tape.grad(w))?;
                opt.update(&format!("l{i}/b"), &mut layers[i].b0, tape.grad(b))?;
            }
        }
    }

    let backbone = Backbone {
        layers,
        input_dim,
        output_dim: num_classes,
        frozen: true,
    };
    let logits = backbone.forward(&test.x)?;
    let acc = accuracy(&logits, &test.labels);
    Ok((backbone, acc))
}

/// Fraction of columns whose argmax equals the label (ties resolve to the
/// lowest class id).
pub fn accuracy(logits: &Matrix, labels: &[usize]) -> f64 {
    let preds = predictions(logits);
    let correct = preds
        .iter()
        .zip(labels)
        .filter(|(p, l)| *p == *l)
        .count();
    correct as f64 / labels.len().max(1) as f64
}

/// Argmax class id per column.
pub fn predictions(logits: &Matrix) -> Vec<usize> {
    (0..logits.cols())
        .map(|c| {
            let mut best = 0;
            let mut best_v = f64::NEG_INFINITY;
            for r in 0..logits.rows() {
                let v = logits.get(r, c);
                if v > best_v {
                    best_v = v;
                    best = r;
                }
            }
            best
        })
        .collect()
}

/// Backbone plus adapter bank with a selected task.
pub struct AdaptedModel<'a> {
    pub backbone: &'a Backbone,
    pub bank: &'a AdapterBank,
    pub active_task: Option<usize>,
}

impl<'a> AdaptedModel<'a> {
    pub fn new(backbone: &'a Backbone, bank: &'a AdapterBank, active_task: usize) -> Self {
        AdaptedModel {
            backbone,
            bank,
            active_task: Some(active_task),
        }
    }

    fn task(&self) -> Result<usize> {
        self.active_task
            .ok_or_else(|| Error::State("no active task selected".into()))
    }

    /// Merged-path forward: each injected layer computes `(W0 + dW) x + b0`.
    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let task = self.task()?;
        if x.rows() != self.backbone.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} rows, backbone expects {}",
                x.rows(),
                self.backbone.input_dim()
            )));
        }
        let mut h = x.clone();
        let last = self.backbone.layers().len() - 1;
        for (i, layer) in self.backbone.layers().iter().enumerate() {
            let delta = self.bank.compose(i, task)?;
            let merged = merge_weights(&layer.w0, &delta)?;
            h = merged.matmul(&h)?;
            h = add_bias(&h, &layer.b0);
            if i != last {
                h = h.map(|v| if v > 0.0 { v } else { 0.0 });
            }
        }
        Ok(h)
    }

    /// Two-path forward: `W0 x + dW x + b0` per layer, the way a low-rank
    /// adapter actually runs unmerged.
    pub fn forward_unmerged(&self, x: &Matrix) -> Result<Matrix> {
        let task = self.task()?;
        let mut h = x.clone();
        let last = self.backbone.layers().len() - 1;
        for (i, layer) in self.backbone.layers().iter().enumerate() {
            let delta = self.bank.compose(i, task)?;
            let base = layer.w0.matmul(&h)?;
            let residual = delta.matmul(&h)?;
            h = add_bias(&base.add(&residual)?, &layer.b0);
            if i != last {
                h = h.map(|v| if v > 0.0 { v } else { 0.0 });
            }
        }
        Ok(h)
    }
}

fn add_bias(h: &Matrix, b: &Matrix) -> Matrix {
    let mut out = h.clone();
    for r in 0..out.rows() {
        let bv = b.get(r, 0);
        for c in 0..out.cols() {
            out.set(r, c, out.get(r, c) + bv);
        }
    }
    out
}
