//! Run configuration, read from JSON.
//!
//! Every field has a default, so `{}` is a complete config:
//!
//! ```json
//! {
//!   "model": {
//!     "kind": "icgn",
//!     "hidden": "one_layer",
//!     "width": 5,
//!     "depth": 2,
//!     "activation": "tanh",
//!     "train_rule": { "kind": "stratified", "nodes": 8 },
//!     "eval_rule": { "kind": "gauss_legendre", "nodes": 32 },
//!     "offset": false
//!   },
//!   "optimizer": { "lr": 0.01, "beta1": 0.9, "beta2": 0.999, "eps": 1e-8 },
//!   "steps": 5000,
//!   "batch": 128,
//!   "domain": { "lower": [0.0, 0.0], "upper": [1.0, 1.0] },
//!   "seed": 0,
//!   "grid_resolution": 64
//! }
//! ```
//!
//! ICNN baselines use `{"kind": "icnn1", "hidden_units": 25,
//! "learn_output_weights": false}` or `{"kind": "icnn2", "h1": 25, "h2": 25,
//! "learn_output_weights": false}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{ConvexGradientModel, QuadratureRule};
use crate::numeric::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HiddenKind {
    OneLayer,
    Deep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IcgnSpec {
    pub hidden: HiddenKind,
    /// Output dimension of the hidden map (and of every deep layer).
    pub width: usize,
    /// Number of layers when `hidden` is `deep`.
    pub depth: usize,
    pub activation: String,
    pub train_rule: QuadratureRule,
    pub eval_rule: QuadratureRule,
    pub offset: bool,
}

impl Default for IcgnSpec {
    fn default() -> Self {
        IcgnSpec {
            hidden: HiddenKind::OneLayer,
            width: 5,
            depth: 2,
            activation: "tanh".into(),
            train_rule: ConvexGradientModel::DEFAULT_TRAIN_RULE,
            eval_rule: ConvexGradientModel::DEFAULT_EVAL_RULE,
            offset: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Icnn1Spec {
    pub hidden_units: usize,
    pub learn_output_weights: bool,
}

impl Default for Icnn1Spec {
    fn default() -> Self {
        Icnn1Spec {
            hidden_units: 25,
            learn_output_weights: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Icnn2Spec {
    pub h1: usize,
    pub h2: usize,
    pub learn_output_weights: bool,
}

impl Default for Icnn2Spec {
    fn default() -> Self {
        Icnn2Spec {
            h1: 25,
            h2: 25,
            learn_output_weights: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Icgn(IcgnSpec),
    Icnn1(Icnn1Spec),
    Icnn2(Icnn2Spec),
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::Icgn(IcgnSpec::default())
    }
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Icgn(_) => "icgn",
            ModelSpec::Icnn1(_) => "icnn1",
            ModelSpec::Icnn2(_) => "icnn2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Axis-aligned box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Default for Domain {
    fn default() -> Self {
        Domain::unit_square()
    }
}

impl Domain {
    pub fn unit_square() -> Self {
        Domain {
            lower: vec![0.0, 0.0],
            upper: vec![1.0, 1.0],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.len() != self.upper.len() {
            return Err(Error::dims("domain bounds", self.lower.len(), self.upper.len()));
        }
        for (k, (lo, hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::invalid(format!("domain axis {k}: need lower < upper, got [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().enumerate().all(|(k, v)| self.lower[k] <= *v && *v <= self.upper[k])
    }
}

/// `n` iid uniform points in `domain`.
pub fn sample_batch(domain: &Domain, n: usize, rng: &mut RngStream) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            domain
                .lower
                .iter()
                .zip(&domain.upper)
                .map(|(lo, hi)| lo + (hi - lo) * rng.next_f64())
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub model: ModelSpec,
    pub optimizer: AdamConfig,
    pub steps: usize,
    pub batch: usize,
    pub domain: Domain,
    pub seed: u64,
    pub grid_resolution: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelSpec::default(),
            optimizer: AdamConfig::default(),
            steps: 5000,
            batch: 128,
            domain: Domain::default(),
            seed: 0,
            grid_resolution: 64,
        }
    }
}

impl TrainConfig {
    pub fn with_model(model: ModelSpec) -> Self {
        TrainConfig {
            model,
            ..Self::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: TrainConfig = serde_json::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::invalid(msg));
        if self.steps < 1 {
            return bad("steps must be at least 1".into());
        }
        if self.batch < 1 {
            return bad("batch must be at least 1".into());
        }
        let o = &self.optimizer;
        if !(o.lr > 0.0 && o.lr.is_finite()) {
            return bad(format!("optimizer.lr must be positive, got {}", o.lr));
        }
        for (name, b) in [("beta1", o.beta1), ("beta2", o.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("optimizer.{name} must lie in [0, 1), got {b}"));
            }
        }
        if !(o.eps > 0.0) {
            return bad(format!("optimizer.eps must be positive, got {}", o.eps));
        }
        self.domain.validate()?;
        if self.domain.dim() != 2 {
            return bad(format!("the target field is two-dimensional; domain has {} axes", self.domain.dim()));
        }
        if self.grid_resolution < 2 {
            return bad(format!("grid_resolution must be at least 2, got {}", self.grid_resolution));
        }
        match &self.model {
            ModelSpec::Icgn(s) => {
                if s.width < 1 {
                    return bad("model.width must be at least 1".into());
                }
                if s.hidden == HiddenKind::Deep && s.depth < 2 {
                    return bad(format!("model.depth must be at least 2 for a deep hidden map, got {}", s.depth));
                }
                crate::autodiff::Activation::builtin(&s.activation)?;
                s.train_rule.validate()?;
                s.eval_rule.validate()?;
                if !s.eval_rule.is_deterministic() {
                    return bad("model.eval_rule must be deterministic".into());
                }
            }
            ModelSpec::Icnn1(s) => {
                if s.hidden_units < 1 {
                    return bad("model.hidden_units must be at least 1".into());
                }
            }
            ModelSpec::Icnn2(s) => {
                if s.h1 < 1 || s.h2 < 1 {
                    return bad("model.h1 and model.h2 must be at least 1".into());
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        let cfg = TrainConfig::from_json("{}").unwrap();
        assert_eq!(cfg, TrainConfig::default());
        let back = TrainConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_model_spec_fills_defaults() {
        let cfg = TrainConfig::from_json(r#"{"model": {"kind": "icnn2", "h2": 10}, "steps": 3}"#).unwrap();
        assert_eq!(
            cfg.model,
            ModelSpec::Icnn2(Icnn2Spec {
                h1: 25,
                h2: 10,
                learn_output_weights: false
            })
        );
        assert_eq!(cfg.steps, 3);
    }

    #[test]
    fn invalid_configs_rejected() {
        for text in [
            r#"{"steps": 0}"#,
            r#"{"batch": 0}"#,
            r#"{"optimizer": {"lr": 0}}"#,
            r#"{"optimizer": {"beta2": 1.0}}"#,
            r#"{"domain": {"lower": [0, 1], "upper": [1, 1]}}"#,
            r#"{"domain": {"lower": [0], "upper": [1]}}"#,
            r#"{"model": {"kind": "icgn", "activation": "relu"}}"#,
            r#"{"model": {"kind": "icgn", "eval_rule": {"kind": "stratified", "nodes": 4}}}"#,
            r#"{"model": {"kind": "mlp"}}"#,
            r#"{"bogus": 1}"#,
            r#"{"grid_resolution": 1}"#,
        ] {
            assert!(TrainConfig::from_json(text).is_err(), "{text}");
        }
    }

    #[test]
    fn batches_stay_inside_and_repeat() {
        let d = Domain {
            lower: vec![-1.0, 2.0],
            upper: vec![0.5, 3.0],
        };
        let a = sample_batch(&d, 500, &mut RngStream::new(3));
        assert!(a.iter().all(|x| d.contains(x)));
        assert_eq!(a, sample_batch(&d, 500, &mut RngStream::new(3)));
        let mut rng = RngStream::new(3);
        let first = sample_batch(&d, 10, &mut rng);
        assert_ne!(first, sample_batch(&d, 10, &mut rng));
    }

    #[test]
    fn batch_mean_near_center() {
        let pts = sample_batch(&Domain::unit_square(), 100_000, &mut RngStream::new(4));
        for k in 0..2 {
            let mean = pts.iter().map(|p| p[k]).sum::<f64>() / pts.len() as f64;
            assert!((mean - 0.5).abs() < 0.005, "{mean}");
        }
    }
}
