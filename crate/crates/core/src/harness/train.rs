//! Loss, Adam, and the training loop shared by ICGN and ICNN models.

use serde::{Deserialize, Serialize};

use super::config::{sample_batch, AdamConfig, HiddenKind, ModelSpec, TrainConfig};
use super::grid::{eval_grid, GridReport};
use super::target::target_eval;
use crate::autodiff::{Activation, NodeId, Tape};
use crate::error::{Error, Result};
use crate::integrator::{icgn_forward, sample_nodes, ConvexGradientModel, Mode};
use crate::models::{DeepMap, HiddenMap, Icnn, Icnn1, Icnn2, Model, OneLayerMap, Parameterized};
use crate::numeric::{RngStream, Vector};

/// `(1/|batch|) Σ ‖forward(xᵢ) − tᵢ‖²` recorded on `tape`.
pub fn loss<F>(mut forward: F, batch: &[Vec<f64>], targets: &[Vector], tape: &mut Tape) -> Result<NodeId>
where
    F: FnMut(&mut Tape, &[f64]) -> Result<NodeId>,
{
    if batch.len() != targets.len() {
        return Err(Error::dims("loss batch/targets", batch.len(), targets.len()));
    }
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let mut acc: Option<NodeId> = None;
    for (x, t) in batch.iter().zip(targets) {
        let out = forward(tape, x)?;
        if tape.shape(out).len() != t.len() {
            return Err(Error::dims("loss output", t.len(), tape.shape(out).len()));
        }
        let neg = tape.constant(t.iter().map(|v| -v).collect());
        let diff = tape.add(out, neg)?;
        let sq = tape.sum_sq(diff);
        acc = Some(match acc {
            None => sq,
            Some(a) => tape.add(a, sq)?,
        });
    }
    Ok(tape.scale(acc.expect("non-empty batch"), 1.0 / batch.len() as f64))
}

/// Adam moment estimates over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }
}

/// One bias-corrected Adam update of `theta` in place.
pub fn adam_step(state: &mut AdamState, theta: &mut [f64], grads: &[f64], hyper: &AdamConfig) -> Result<()> {
    if theta.len() != state.m.len() {
        return Err(Error::dims("adam_step params", state.m.len(), theta.len()));
    }
    if grads.len() != theta.len() {
        return Err(Error::dims("adam_step grads", theta.len(), grads.len()));
    }
    state.t += 1;
    let c1 = 1.0 - hyper.beta1.powi(state.t as i32);
    let c2 = 1.0 - hyper.beta2.powi(state.t as i32);
    for i in 0..theta.len() {
        let g = grads[i];
        state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * g;
        state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * g * g;
        let mh = state.m[i] / c1;
        let vh = state.v[i] / c2;
        theta[i] -= hyper.lr * mh / (vh.sqrt() + hyper.eps);
    }
    Ok(())
}

/// A model the training loop can fit to the target field.
#[derive(Debug, Clone, PartialEq)]
pub enum Trainable {
    Icgn(ConvexGradientModel),
    Icnn(Icnn),
}

impl Trainable {
    /// Freshly initialised model for `spec` on `dim` inputs.
    pub fn init(spec: &ModelSpec, dim: usize, allow_unconstrained: bool, rng: &mut RngStream) -> Result<Self> {
        Ok(match spec {
            ModelSpec::Icgn(s) => {
                let act = Activation::builtin(&s.activation)?;
                let hidden: HiddenMap = match s.hidden {
                    HiddenKind::OneLayer => OneLayerMap::init(dim, s.width, act, rng).into(),
                    HiddenKind::Deep => {
                        if !allow_unconstrained {
                            return Err(Error::invalid(
                                "a deep hidden map gives up the convex-gradient guarantee; \
                                 pass --allow-unconstrained to train one",
                            ));
                        }
                        let mut dims = vec![dim];
                        dims.extend(std::iter::repeat_n(s.width, s.depth));
                        DeepMap::init(&dims, act, rng)?.into()
                    }
                };
                let model = ConvexGradientModel::new(hidden, s.train_rule, s.eval_rule)?;
                let offset = s.offset.then(|| Vector::zeros(dim));
                Trainable::Icgn(model.with_offset(offset)?)
            }
            ModelSpec::Icnn1(s) => Trainable::Icnn(Icnn::One(Icnn1::init(dim, s.hidden_units, s.learn_output_weights, rng))),
            ModelSpec::Icnn2(s) => {
                Trainable::Icnn(Icnn::Two(Icnn2::init(dim, s.h1, s.h2, s.learn_output_weights, rng)))
            }
        })
    }

    /// Deterministic evaluation (the fixed quadrature rule for ICGN).
    pub fn eval(&self, x: &[f64]) -> Result<Vector> {
        match self {
            Trainable::Icgn(m) => icgn_forward(m, x, Mode::Eval, None),
            Trainable::Icnn(m) => m.grad_map(x),
        }
    }

    /// Records a training-mode forward pass at `x`; ICGN draws fresh nodes from `rng`.
    pub fn record(&self, tape: &mut Tape, leaves: &[NodeId], x: &[f64], rng: &mut RngStream) -> Result<NodeId> {
        match self {
            Trainable::Icgn(m) => {
                let nodes = sample_nodes(m.train_rule(), Some(rng))?;
                m.record_forward(tape, leaves, x, &nodes)
            }
            Trainable::Icnn(m) => m.record_grad_map(tape, leaves, x),
        }
    }

    /// Restores constraints after a parameter update.
    pub fn project(&mut self) {
        if let Trainable::Icnn(m) = self {
            m.project_constraints();
        }
    }

    pub fn into_model(self) -> Model {
        match self {
            Trainable::Icgn(m) => Model::Icgn(m),
            Trainable::Icnn(m) => Model::Icnn(m),
        }
    }
}

impl Parameterized for Trainable {
    fn params(&self) -> crate::autodiff::Params {
        match self {
            Trainable::Icgn(m) => m.params(),
            Trainable::Icnn(m) => m.params(),
        }
    }

    fn set_params(&mut self, params: &crate::autodiff::Params) -> Result<()> {
        match self {
            Trainable::Icgn(m) => m.set_params(params),
            Trainable::Icnn(m) => m.set_params(params),
        }
    }
}

/// Everything recorded about a run except wall-clock time, so two runs with
/// the same config serialize identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub model: String,
    pub seed: u64,
    pub param_count: usize,
    pub steps: usize,
    pub loss_curve: Vec<f64>,
    pub final_grid_mean: f64,
    pub final_grid_max: f64,
    pub config: TrainConfig,
}

impl RunMetrics {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map(|s| s + "\n")
            .map_err(|e| Error::Parse(e.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub metrics: RunMetrics,
    pub model: Trainable,
    pub grid: GridReport,
    pub elapsed_secs: f64,
}

/// Fits `config.model` to the target field.
///
/// Each step draws a fresh batch (and, for ICGN, fresh quadrature nodes per
/// point), takes one Adam step, then re-projects any constrained weights.
/// A non-finite loss or gradient stops the run with [`Error::Divergence`].
pub fn train(config: &TrainConfig, allow_unconstrained: bool) -> Result<TrainOutcome> {
    config.validate()?;
    let start = std::time::Instant::now();
    let root = RngStream::new(config.seed);
    let mut init_rng = root.fork(0);
    let mut batch_rng = root.fork(1);
    let mut node_rng = root.fork(2);
    let mut model = Trainable::init(&config.model, config.domain.dim(), allow_unconstrained, &mut init_rng)?;
    model.project();

    let mut params = model.params();
    let mut theta = params.flatten();
    let mut adam = AdamState::new(theta.len());
    let mut curve = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        let batch = sample_batch(&config.domain, config.batch, &mut batch_rng);
        let targets = batch.iter().map(|x| target_eval(x)).collect::<Result<Vec<_>>>()?;
        let mut tape = Tape::new();
        let leaves = params.register(&mut tape);
        let root = loss(|t, x| model.record(t, &leaves, x, &mut node_rng), &batch, &targets, &mut tape)?;
        let value = tape.scalar(root);
        let grads = tape.backward(root)?.flatten(&leaves);
        let grad_norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
        if !value.is_finite() || !grad_norm.is_finite() {
            return Err(Error::Divergence {
                step,
                loss: value,
                grad_norm,
            });
        }
        curve.push(value);
        adam_step(&mut adam, &mut theta, &grads, &config.optimizer)?;
        params = params.unflatten(&theta)?;
        model.set_params(&params)?;
        model.project();
        params = model.params();
        theta = params.flatten();
    }

    let grid = eval_grid(|x| model.eval(x), config.grid_resolution, &config.domain)?;
    let metrics = RunMetrics {
        model: config.model.name().into(),
        seed: config.seed,
        param_count: model.param_count(),
        steps: config.steps,
        loss_curve: curve,
        final_grid_mean: grid.mean,
        final_grid_max: grid.max,
        config: config.clone(),
    };
    Ok(TrainOutcome {
        metrics,
        model,
        grid,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}

/// [`train`] for an ICGN config.
pub fn train_icgn(config: &TrainConfig, allow_unconstrained: bool) -> Result<TrainOutcome> {
    if !matches!(config.model, ModelSpec::Icgn(_)) {
        return Err(Error::invalid(format!("train_icgn needs an icgn model, got {}", config.model.name())));
    }
    train(config, allow_unconstrained)
}

/// [`train`] for an ICNN config.
pub fn train_icnn(config: &TrainConfig) -> Result<TrainOutcome> {
    if matches!(config.model, ModelSpec::Icgn(_)) {
        return Err(Error::invalid("train_icnn needs an icnn1 or icnn2 model"));
    }
    train(config, false)
}
