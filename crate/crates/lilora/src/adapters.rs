//! Adapter parameter containers and weight-composition rules.
//!
//! Four strategies are supported on top of a frozen weight `W0`:
//!
//! * seq-lora: one `(B, A)` pair reused and re-trained for every task;
//! * dir-lora: an independent `(B_i, A_i)` pair per task;
//! * shared-a: a single shared `A` with a full per-task `B_i`;
//! * lilora: shared `A` and shared basis `B0`, with a low-rank per-task
//!   residual `B~_i A~_i` and a fusion coefficient `alpha` in (0,1) blending
//!   the two, so `dW_i = (alpha B0 + (1-alpha) B~_i A~_i) A`.
//!
//! All strategies initialize the up-projection to zero, so a freshly created
//! bank composes to the zero update and the adapted model coincides with the
//! backbone.

use crate::error::{Error, Result};
use crate::linalg::{gaussian_matrix, Matrix, Rng};

/// Dimensions of one injected layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerDims {
    /// Output dimension of the adapted weight.
    pub d: usize,
    /// Input dimension of the adapted weight.
    pub k: usize,
    /// Rank of the shared matrices.
    pub r: usize,
    /// Rank of the per-task residual; must be strictly below `r`.
    pub r_tilde: usize,
}

impl LayerDims {
    pub fn new(d: usize, k: usize, r: usize, r_tilde: usize) -> Result<Self> {
        if d == 0 || k == 0 || r == 0 || r_tilde == 0 {
            return Err(Error::Shape(format!(
                "layer dims must be positive, got d={d} k={k} r={r} r_tilde={r_tilde}"
            )));
        }
        if r > d.min(k) {
            return Err(Error::Shape(format!(
                "rank r={r} exceeds min(d,k)=min({d},{k})"
            )));
        }
        if r_tilde >= r {
            return Err(Error::Shape(format!(
                "task rank r_tilde={r_tilde} must be below r={r}"
            )));
        }
        Ok(LayerDims { d, k, r, r_tilde })
    }
}

/// Adapter strategy tag.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Strategy {
    SeqLora,
    DirLora,
    SharedA,
    LiLora,
    LiLoraNoReg,
    LiLoraFixedAlpha(f64),
}

impl Strategy {
    pub fn tag(&self) -> String {
        match self {
            Strategy::SeqLora => "seq-lora".into(),
            Strategy::DirLora => "dir-lora".into(),
            Strategy::SharedA => "shared-a".into(),
            Strategy::LiLora => "lilora".into(),
            Strategy::LiLoraNoReg => "lilora-no-reg".into(),
            Strategy::LiLoraFixedAlpha(v) => format!("lilora-fixed-alpha:{v}"),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "seq-lora" => Ok(Strategy::SeqLora),
            "dir-lora" => Ok(Strategy::DirLora),
            "shared-a" => Ok(Strategy::SharedA),
            "lilora" => Ok(Strategy::LiLora),
            "lilora-no-reg" => Ok(Strategy::LiLoraNoReg),
            other => {
                if let Some(v) = other.strip_prefix("lilora-fixed-alpha:") {
                    let alpha: f64 = v.parse().map_err(|_| {
                        Error::Config(format!("invalid fixed alpha value '{v}'"))
                    })?;
                    if !(0.0..=1.0).contains(&alpha) {
                        return Err(Error::Config(format!(
                            "fixed alpha must lie in [0,1], got {alpha}"
                        )));
                    }
                    Ok(Strategy::LiLoraFixedAlpha(alpha))
                } else {
                    Err(Error::Config(format!("unknown strategy tag '{other}'")))
                }
            }
        }
    }

    /// Numeric id for checkpoint metadata.
    pub fn id(&self) -> u8 {
        match self {
            Strategy::SeqLora => 0,
            Strategy::DirLora => 1,
            Strategy::SharedA => 2,
            Strategy::LiLora => 3,
            Strategy::LiLoraNoReg => 4,
            Strategy::LiLoraFixedAlpha(_) => 5,
        }
    }

    fn from_id(id: u8, fixed_alpha: Option<f64>) -> Result<Self> {
        match id {
            0 => Ok(Strategy::SeqLora),
            1 => Ok(Strategy::DirLora),
            2 => Ok(Strategy::SharedA),
            3 => Ok(Strategy::LiLora),
            4 => Ok(Strategy::LiLoraNoReg),
            5 => fixed_alpha
                .map(Strategy::LiLoraFixedAlpha)
                .ok_or_else(|| Error::Parse {
                    offset: 0,
                    msg: "fixed-alpha strategy without meta/fixed_alpha entry".into(),
                }),
            other => Err(Error::Parse {
                offset: 0,
                msg: format!("unknown strategy id {other}"),
            }),
        }
    }

    /// Whether the strategy uses the decomposed-B parameterization.
    pub fn is_lilora_family(&self) -> bool {
        matches!(
            self,
            Strategy::LiLora | Strategy::LiLoraNoReg | Strategy::LiLoraFixedAlpha(_)
        )
    }

    /// Whether the basis stability loss is applied during training.
    pub fn uses_reg(&self) -> bool {
        matches!(self, Strategy::LiLora | Strategy::LiLoraFixedAlpha(_))
    }
}

/// Fusion coefficient of one task entry: learnable pre-activation `z` with
/// `alpha = sigmoid(z)`, or a fixed constant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Fusion {
    Learnable { z: f64 },
    Fixed(f64),
}

impl Fusion {
    pub fn alpha(&self) -> f64 {
        match *self {
            Fusion::Learnable { z } => crate::diffcore::sigmoid(z),
            Fusion::Fixed(a) => a,
        }
    }
}

/// One task entry of a lilora layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LiLoraTaskEntry {
    /// `d x r_tilde`, zero-initialized.
    pub b_tilde: Matrix,
    /// `r_tilde x r`, Gaussian-initialized.
    pub a_tilde: Matrix,
    pub fusion: Fusion,
    pub frozen: bool,
}

impl LiLoraTaskEntry {
    /// The residual product `B~ A~` (`d x r`).
    pub fn residual(&self) -> Result<Matrix> {
        self.b_tilde.matmul(&self.a_tilde)
    }
}

/// Lilora state for one injected layer: shared `A` and `B0`, snapshots from
/// the previous task, and the per-task entries.
#[derive(Clone, Debug, PartialEq)]
pub struct LiLoRALayerState {
    pub dims: LayerDims,
    /// `r x k`, shared across tasks, trainable throughout.
    pub a: Matrix,
    /// `d x r` shared basis, zero-initialized, trainable throughout.
    pub b0: Matrix,
    /// `B0` as it stood at the end of the previous task.
    pub b0_prev: Option<Matrix>,
    /// `B~_{t-1} A~_{t-1}` snapshot from the end of the previous task.
    pub residual_prev: Option<Matrix>,
    pub tasks: Vec<LiLoraTaskEntry>,
}

/// One task entry of a dir-lora layer.
#[derive(Clone, Debug, PartialEq)]
pub struct DirLoraTaskEntry {
    pub b: Matrix,
    pub a: Matrix,
    pub frozen: bool,
}

/// Dir-lora state: a fully independent pair per task.
#[derive(Clone, Debug, PartialEq)]
pub struct DirLoRALayerState {
    pub dims: LayerDims,
    pub tasks: Vec<DirLoraTaskEntry>,
    /// Every task entry is initialized from this per-layer seed, so each
    /// task trains from the same starting point (a fresh run per task).
    pub init_seed: u64,
}

/// Shared-A state: one shared `A`, full `B_i` per task.
#[derive(Clone, Debug, PartialEq)]
pub struct SharedALayerState {
    pub dims: LayerDims,
    pub a: Matrix,
    pub tasks: Vec<SharedATaskEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SharedATaskEntry {
    pub b: Matrix,
    pub frozen: bool,
}

/// Seq-lora state: a single pair re-trained every task.
#[derive(Clone, Debug, PartialEq)]
pub struct SeqLoraLayerState {
    pub dims: LayerDims,
    pub b: Matrix,
    pub a: Matrix,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LayerAdapter {
    Seq(SeqLoraLayerState),
    Dir(DirLoRALayerState),
    SharedA(SharedALayerState),
    LiLora(LiLoRALayerState),
}

/// Standard deviation for the Gaussian init of a down-projection of rank `r`.
///
/// The default keeps pre-merge activations scale-stable as `r` grows
/// (entries ~ N(0, 1/r)); `unit_variance` switches to plain N(0, 1).
fn init_std(r: usize, unit_variance: bool) -> f64 {
    if unit_variance {
        1.0
    } else {
        1.0 / (r as f64).sqrt()
    }
}

/// Initialize the shared parts of a lilora layer: `B0 = 0`,
/// `A ~ N(0, 1/r)` entrywise; no task entries yet.
pub fn init_lilora_layer(
    dims: LayerDims,
    rng: &mut Rng,
    unit_variance: bool,
) -> Result<LiLoRALayerState> {
    let a = gaussian_matrix(rng, dims.r, dims.k, init_std(dims.r, unit_variance))?;
    let b0 = Matrix::zeros(dims.d, dims.r)?;
    Ok(LiLoRALayerState {
        dims,
        a,
        b0,
        b0_prev: None,
        residual_prev: None,
        tasks: Vec::new(),
    })
}

/// Append a fresh task entry: `B~_t = 0`, `A~_t ~ N(0, 1/r_tilde)`,
/// `z ~ N(0,1)` with `alpha = sigmoid(z)` (or the fixed value), unfrozen.
pub fn add_task_entry(
    state: &mut LiLoRALayerState,
    rng: &mut Rng,
    fixed_alpha: Option<f64>,
    unit_variance: bool,
) -> Result<()> {
    if let Some(last) = state.tasks.last() {
        if !last.frozen {
            return Err(Error::State(
                "cannot add a task entry while the previous one is unfrozen".into(),
            ));
        }
    }
    let a_tilde = gaussian_matrix(
        rng,
        state.dims.r_tilde,
        state.dims.r,
        init_std(state.dims.r_tilde, unit_variance),
    )?;
    let fusion = match fixed_alpha {
        Some(a) => Fusion::Fixed(a),
        None => Fusion::Learnable { z: rng.normal() },
    };
    state.tasks.push(LiLoraTaskEntry {
        b_tilde: Matrix::zeros(state.dims.d, state.dims.r_tilde)?,
        a_tilde,
        fusion,
        frozen: false,
    });
    Ok(())
}

/// `dW_t = (alpha B0 + (1-alpha) B~_t A~_t) A`.
pub fn compose_lilora(state: &LiLoRALayerState, task_id: usize) -> Result<Matrix> {
    let entry = state
        .tasks
        .get(task_id)
        .ok_or_else(|| Error::Lookup(format!("unknown task id {task_id}")))?;
    let alpha = entry.fusion.alpha();
    let residual = entry.residual()?;
    let blended = state.b0.scale(alpha).add(&residual.scale(1.0 - alpha))?;
    blended.matmul(&state.a)
}

/// `dW_i = B_i A_i`.
pub fn compose_dirlora(state: &DirLoRALayerState, task_id: usize) -> Result<Matrix> {
    let entry = state
        .tasks
        .get(task_id)
        .ok_or_else(|| Error::Lookup(format!("unknown task id {task_id}")))?;
    entry.b.matmul(&entry.a)
}

/// `dW_i = B_i A` with the shared `A`.
pub fn compose_shared_a(state: &SharedALayerState, task_id: usize) -> Result<Matrix> {
    let entry = state
        .tasks
        .get(task_id)
        .ok_or_else(|| Error::Lookup(format!("unknown task id {task_id}")))?;
    entry.b.matmul(&state.a)
}

/// `W' = W0 + dW`; the merged forward pass equals the two-path forward.
pub fn merge_weights(w0: &Matrix, delta: &Matrix) -> Result<Matrix> {
    if w0.shape() != delta.shape() {
        return Err(Error::Shape(format!(
            "merge shape mismatch: {}x{} vs {}x{}",
            w0.rows(),
            w0.cols(),
            delta.rows(),
            delta.cols()
        )));
    }
    w0.add(delta)
}

/// Per-layer adapter stack for one strategy.
#[derive(Clone, Debug, PartialEq)]
pub struct AdapterBank {
    pub strategy: Strategy,
    pub layers: Vec<LayerAdapter>,
    num_tasks: usize,
    unit_variance: bool,
}

impl AdapterBank {
    /// Create a bank with no task entries yet. Consumes one `u64` per layer
    /// from `rng` for dir-lora init seeds and the Gaussian draws for shared
    /// matrices, in layer order.
    pub fn new(
        strategy: Strategy,
        dims: &[LayerDims],
        rng: &mut Rng,
        unit_variance: bool,
    ) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::Config("adapter bank needs at least one layer".into()));
        }
        let mut layers = Vec::with_capacity(dims.len());
        for &d in dims {
            let layer = match strategy {
                Strategy::SeqLora => LayerAdapter::Seq(SeqLoraLayerState {
                    dims: d,
                    b: Matrix::zeros(d.d, d.r)?,
                    a: gaussian_matrix(rng, d.r, d.k, init_std(d.r, unit_variance))?,
                }),
                Strategy::DirLora => LayerAdapter::Dir(DirLoRALayerState {
                    dims: d,
                    tasks: Vec::new(),
                    init_seed: rng.next_u64(),
                }),
                Strategy::SharedA => LayerAdapter::SharedA(SharedALayerState {
                    dims: d,
                    a: gaussian_matrix(rng, d.r, d.k, init_std(d.r, unit_variance))?,
                    tasks: Vec::new(),
                }),
                Strategy::LiLora | Strategy::LiLoraNoReg | Strategy::LiLoraFixedAlpha(_) => {
                    LayerAdapter::LiLora(init_lilora_layer(d, rng, unit_variance)?)
                }
            };
            layers.push(layer);
        }
        Ok(AdapterBank {
            strategy,
            layers,
            num_tasks: 0,
            unit_variance,
        })
    }

    pub fn num_tasks(&self) -> usize {
        self.num_tasks
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn dims(&self, layer: usize) -> LayerDims {
        match &self.layers[layer] {
            LayerAdapter::Seq(s) => s.dims,
            LayerAdapter::Dir(s) => s.dims,
            LayerAdapter::SharedA(s) => s.dims,
            LayerAdapter::LiLora(s) => s.dims,
        }
    }

    /// Start a new task: freeze nothing implicitly — the previous entry must
    /// already be frozen — and append fresh per-task parameters to every
    /// layer.
    pub fn add_task(&mut self, rng: &mut Rng) -> Result<usize> {
        let fixed_alpha = match self.strategy {
            Strategy::LiLoraFixedAlpha(v) => Some(v),
            _ => None,
        };
        let unit_variance = self.unit_variance;
        for layer in &mut self.layers {
            match layer {
                LayerAdapter::Seq(_) => {
                    // The single pair is reused; nothing to add.
                }
                LayerAdapter::Dir(s) => {
                    if let Some(last) = s.tasks.last() {
                        if !last.frozen {
                            return Err(Error::State(
                                "cannot add a task entry while the previous one is unfrozen"
                                    .into(),
                            ));
                        }
                    }
                    // Same starting point for every task: a fresh training
                    // run per task, seeded per layer.
                    let mut init_rng = Rng::from_seed(s.init_seed);
                    s.tasks.push(DirLoraTaskEntry {
                        b: Matrix::zeros(s.dims.d, s.dims.r)?,
                        a: gaussian_matrix(
                            &mut init_rng,
                            s.dims.r,
                            s.dims.k,
                            init_std(s.dims.r, unit_variance),
                        )?,
                        frozen: false,
                    });
                }
                LayerAdapter::SharedA(s) => {
                    if let Some(last) = s.tasks.last() {
                        if !last.frozen {
                            return Err(Error::State(
                                "cannot add a task entry while the previous one is unfrozen"
                                    .into(),
                            ));
                        }
                    }
                    s.tasks.push(SharedATaskEntry {
                        b: Matrix::zeros(s.dims.d, s.dims.r)?,
                        frozen: false,
                    });
                }
                LayerAdapter::LiLora(s) => {
                    add_task_entry(s, rng, fixed_alpha, unit_variance)?;
                }
            }
        }
        self.num_tasks += 1;
        Ok(self.num_tasks - 1)
    }

    /// Freeze the given task's entries and, for lilora, refresh the `B0` and
    /// residual snapshots used by the stability loss of the next task.
    pub fn freeze_task(&mut self, task_id: usize) -> Result<()> {
        if task_id >= self.num_tasks {
            return Err(Error::Lookup(format!("unknown task id {task_id}")));
        }
        for layer in &mut self.layers {
            match layer {
                LayerAdapter::Seq(_) => {}
                LayerAdapter::Dir(s) => s.tasks[task_id].frozen = true,
                LayerAdapter::SharedA(s) => s.tasks[task_id].frozen = true,
                LayerAdapter::LiLora(s) => {
                    s.tasks[task_id].frozen = true;
                    s.b0_prev = Some(s.b0.clone());
                    s.residual_prev = Some(s.tasks[task_id].residual()?);
                }
            }
        }
        Ok(())
    }

    /// The weight update `dW` of `layer` for `task_id`.
    pub fn compose(&self, layer: usize, task_id: usize) -> Result<Matrix> {
        match &self.layers[layer] {
            LayerAdapter::Seq(s) => {
                if task_id >= self.num_tasks {
                    return Err(Error::Lookup(format!("unknown task id {task_id}")));
                }
                s.b.matmul(&s.a)
            }
            LayerAdapter::Dir(s) => compose_dirlora(s, task_id),
            LayerAdapter::SharedA(s) => compose_shared_a(s, task_id),
            LayerAdapter::LiLora(s) => compose_lilora(s, task_id),
        }
    }

    /// Fusion coefficients (one per layer) of `task_id`; lilora only.
    pub fn alphas(&self, task_id: usize) -> Result<Vec<f64>> {
        if !self.strategy.is_lilora_family() {
            return Err(Error::Contract(format!(
                "strategy {} has no fusion coefficients",
                self.strategy.tag()
            )));
        }
        self.layers
            .iter()
            .map(|layer| match layer {
                LayerAdapter::LiLora(s) => s
                    .tasks
                    .get(task_id)
                    .map(|e| e.fusion.alpha())
                    .ok_or_else(|| Error::Lookup(format!("unknown task id {task_id}"))),
                _ => unreachable!("lilora bank holds lilora layers"),
            })
            .collect()
    }

    /// Flatten the bank into named tensors for checkpointing. Scalars and
    /// flags are stored as 1x1 matrices; each layer carries a `dims` entry
    /// `[d, k, r, r_tilde]` so the bank is fully reconstructible.
    pub fn to_named_tensors(&self) -> Vec<(String, Matrix)> {
        let mut out = Vec::new();
        out.push(("meta/num_tasks".into(), Matrix::scalar(self.num_tasks as f64)));
        out.push((
            "meta/strategy_id".into(),
            Matrix::scalar(self.strategy.id() as f64),
        ));
        if let Strategy::LiLoraFixedAlpha(v) = self.strategy {
            out.push(("meta/fixed_alpha".into(), Matrix::scalar(v)));
        }
        out.push((
            "meta/unit_variance".into(),
            Matrix::scalar(if self.unit_variance { 1.0 } else { 0.0 }),
        ));
        out.push((
            "meta/num_layers".into(),
            Matrix::scalar(self.layers.len() as f64),
        ));
        for (i, layer) in self.layers.iter().enumerate() {
            let d = self.dims(i);
            out.push((
                format!("layer{i}/dims"),
                Matrix::from_vec(
                    1,
                    4,
                    vec![d.d as f64, d.k as f64, d.r as f64, d.r_tilde as f64],
                )
                .expect("fixed shape"),
            ));
            if let LayerAdapter::Dir(s) = layer {
                // Bit-reinterpreted so the full u64 survives the f64 container.
                out.push((
                    format!("layer{i}/init_seed"),
                    Matrix::scalar(f64::from_bits(s.init_seed)),
                ));
            }
        }
        for (i, layer) in self.layers.iter().enumerate() {
            match layer {
                LayerAdapter::Seq(s) => {
                    out.push((format!("layer{i}/B"), s.b.clone()));
                    out.push((format!("layer{i}/A"), s.a.clone()));
                }
                LayerAdapter::Dir(s) => {
                    for (t, e) in s.tasks.iter().enumerate() {
                        out.push((format!("layer{i}/task{t}/B"), e.b.clone()));
                        out.push((format!("layer{i}/task{t}/A"), e.a.clone()));
                        out.push((
                            format!("layer{i}/task{t}/frozen"),
                            Matrix::scalar(if e.frozen { 1.0 } else { 0.0 }),
                        ));
                    }
                }
                LayerAdapter::SharedA(s) => {
                    out.push((format!("layer{i}/A"), s.a.clone()));
                    for (t, e) in s.tasks.iter().enumerate() {
                        out.push((format!("layer{i}/task{t}/B"), e.b.clone()));
                        out.push((
                            format!("layer{i}/task{t}/frozen"),
                            Matrix::scalar(if e.frozen { 1.0 } else { 0.0 }),
                        ));
                    }
                }
                LayerAdapter::LiLora(s) => {
                    out.push((format!("layer{i}/A"), s.a.clone()));
                    out.push((format!("layer{i}/B0"), s.b0.clone()));
                    if let Some(p) = &s.b0_prev {
                        out.push((format!("layer{i}/B0_prev"), p.clone()));
                    }
                    if let Some(p) = &s.residual_prev {
                        out.push((format!("layer{i}/residual_prev"), p.clone()));
                    }
                    for (t, e) in s.tasks.iter().enumerate() {
                        out.push((format!("layer{i}/task{t}/B_tilde"), e.b_tilde.clone()));
                        out.push((format!("layer{i}/task{t}/A_tilde"), e.a_tilde.clone()));
                        match e.fusion {
                            Fusion::Learnable { z } => {
                                out.push((format!("layer{i}/task{t}/z"), Matrix::scalar(z)))
                            }
                            Fusion::Fixed(a) => out
                                .push((format!("layer{i}/task{t}/alpha_fixed"), Matrix::scalar(a))),
                        }
                        out.push((
                            format!("layer{i}/task{t}/frozen"),
                            Matrix::scalar(if e.frozen { 1.0 } else { 0.0 }),
                        ));
                    }
                }
            }
        }
        out
    }
}

impl AdapterBank {
    /// Rebuild a bank from checkpoint tensors produced by
    /// [`AdapterBank::to_named_tensors`].
    pub fn from_named_tensors(entries: &[(String, Matrix)]) -> Result<Self> {
        let get = |name: &str| -> Result<&Matrix> {
            entries
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, m)| m)
                .ok_or_else(|| Error::Lookup(format!("checkpoint entry '{name}' not found")))
        };
        let maybe = |name: &str| entries.iter().find(|(n, _)| n == name).map(|(_, m)| m);

        let num_tasks = get("meta/num_tasks")?.as_scalar()? as usize;
        let strategy_id = get("meta/strategy_id")?.as_scalar()? as u8;
        let fixed_alpha = maybe("meta/fixed_alpha").map(|m| m.as_scalar()).transpose()?;
        let strategy = Strategy::from_id(strategy_id, fixed_alpha)?;
        let unit_variance = get("meta/unit_variance")?.as_scalar()? != 0.0;
        let num_layers = get("meta/num_layers")?.as_scalar()? as usize;

        let mut layers = Vec::with_capacity(num_layers);
        for i in 0..num_layers {
            let dims_row = get(&format!("layer{i}/dims"))?;
            let dims = LayerDims::new(
                dims_row.get(0, 0) as usize,
                dims_row.get(0, 1) as usize,
                dims_row.get(0, 2) as usize,
                dims_row.get(0, 3) as usize,
            )?;
            let frozen_flag = |t: usize| -> Result<bool> {
                Ok(get(&format!("layer{i}/task{t}/frozen"))?.as_scalar()? != 0.0)
            };
            let layer = match strategy {
                Strategy::SeqLora => LayerAdapter::Seq(SeqLoraLayerState {
                    dims,
                    b: get(&format!("layer{i}/B"))?.clone(),
                    a: get(&format!("layer{i}/A"))?.clone(),
                }),
                Strategy::DirLora => {
                    let init_seed = get(&format!("layer{i}/init_seed"))?.as_scalar()?.to_bits();
                    let mut tasks = Vec::with_capacity(num_tasks);
                    for t in 0..num_tasks {
                        tasks.push(DirLoraTaskEntry {
                            b: get(&format!("layer{i}/task{t}/B"))?.clone(),
                            a: get(&format!("layer{i}/task{t}/A"))?.clone(),
                            frozen: frozen_flag(t)?,
                        });
                    }
                    LayerAdapter::Dir(DirLoRALayerState {
                        dims,
                        tasks,
                        init_seed,
                    })
                }
                Strategy::SharedA => {
                    let mut tasks = Vec::with_capacity(num_tasks);
                    for t in 0..num_tasks {
                        tasks.push(SharedATaskEntry {
                            b: get(&format!("layer{i}/task{t}/B"))?.clone(),
                            frozen: frozen_flag(t)?,
                        });
                    }
                    LayerAdapter::SharedA(SharedALayerState {
                        dims,
                        a: get(&format!("layer{i}/A"))?.clone(),
                        tasks,
                    })
                }
                Strategy::LiLora | Strategy::LiLoraNoReg | Strategy::LiLoraFixedAlpha(_) => {
                    let mut tasks = Vec::with_capacity(num_tasks);
                    for t in 0..num_tasks {
                        let fusion = if let Some(z) = maybe(&format!("layer{i}/task{t}/z")) {
                            Fusion::Learnable {
                                z: z.as_scalar()?,
                            }
                        } else {
                            Fusion::Fixed(
                                get(&format!("layer{i}/task{t}/alpha_fixed"))?.as_scalar()?,
                            )
                        };
                        tasks.push(LiLoraTaskEntry {
                            b_tilde: get(&format!("layer{i}/task{t}/B_tilde"))?.clone(),
                            a_tilde: get(&format!("layer{i}/task{t}/A_tilde"))?.clone(),
                            fusion,
                            frozen: frozen_flag(t)?,
                        });
                    }
                    LayerAdapter::LiLora(LiLoRALayerState {
                        dims,
                        a: get(&format!("layer{i}/A"))?.clone(),
                        b0: get(&format!("layer{i}/B0"))?.clone(),
                        b0_prev: maybe(&format!("layer{i}/B0_prev")).cloned(),
                        residual_prev: maybe(&format!("layer{i}/residual_prev")).cloned(),
                        tasks,
                    })
                }
            };
            layers.push(layer);
        }
        Ok(AdapterBank {
            strategy,
            layers,
            num_tasks,
            unit_variance,
        })
    }
}

/// Closed-form parameter counts of one strategy over a stack of layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamCounts {
    /// All parameters after `num_tasks` tasks: `shared + num_tasks * per_task`.
    pub total: u64,
    /// Parameters added per task (summed over layers).
    pub per_task: u64,
    /// Parameters shared across tasks (counted once).
    pub shared: u64,
}

/// Closed-form counts: dir-lora grows by `r(d+k)` per layer per task;
/// shared-a keeps `rk` shared and adds `dr` per task; lilora keeps
/// `rk + dr` shared and adds `r_tilde (d + r) + 1` per task (the `+1` is the
/// fusion pre-activation, dropped when alpha is fixed); seq-lora holds one
/// `r(d+k)` pair regardless of the task count.
pub fn param_count(strategy: Strategy, dims: &[LayerDims], num_tasks: usize) -> ParamCounts {
    let mut shared = 0u64;
    let mut per_task = 0u64;
    for &LayerDims { d, k, r, r_tilde } in dims {
        let (d, k, r, rt) = (d as u64, k as u64, r as u64, r_tilde as u64);
        match strategy {
            Strategy::SeqLora => {
                shared += r * (d + k);
            }
            Strategy::DirLora => {
                per_task += r * (d + k);
            }
            Strategy::SharedA => {
                shared += r * k;
                per_task += d * r;
            }
            Strategy::LiLora | Strategy::LiLoraNoReg => {
                shared += r * k + d * r;
                per_task += rt * (d + r) + 1;
            }
            Strategy::LiLoraFixedAlpha(_) => {
                shared += r * k + d * r;
                per_task += rt * (d + r);
            }
        }
    }
    ParamCounts {
        total: shared + num_tasks as u64 * per_task,
        per_task,
        shared,
    }
}
