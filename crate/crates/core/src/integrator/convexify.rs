use super::quadrature::{sample_nodes, QuadNode, QuadratureRule};
use crate::autodiff::{NodeId, Params, Shape, Tape};
use crate::error::{Error, Result};
use crate::models::{HiddenMap, OneLayerMap, Parameterized};
use crate::numeric::{dot_raw, mat_t_vec_raw, RngStream, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Fresh stratified nodes on every call.
    Train,
    /// The fixed deterministic evaluation rule.
    Eval,
}

/// `Σ_k w_k [DG(s_k x)]ᵀ DG(s_k x) x`.
pub fn convexify_eval(hidden: &HiddenMap, x: &[f64], nodes: &[QuadNode]) -> Result<Vector> {
    check_weights(nodes)?;
    let mut acc = vec![0.0; hidden.input_dim()];
    for q in nodes {
        let v = hidden.integrand(x, q.s)?;
        for (a, vi) in acc.iter_mut().zip(v.iter()) {
            *a += q.w * vi;
        }
    }
    if x.len() != acc.len() {
        return Err(Error::dims("convexify_eval", acc.len(), x.len()));
    }
    Ok(Vector::from_raw(acc))
}

fn check_weights(nodes: &[QuadNode]) -> Result<()> {
    let total: f64 = nodes.iter().map(|q| q.w).sum();
    if nodes.is_empty() || (total - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!(
            "quadrature weights must sum to 1, got {total} over {} nodes",
            nodes.len()
        )));
    }
    Ok(())
}

/// `Aᵀ(γ(σ(Ax+b)) − γ(σ(b)))`: the exact convexification of a one-layer map.
pub fn closed_form_convexifier(map: &OneLayerMap, x: &[f64]) -> Result<Vector> {
    if x.len() != map.input_dim() {
        return Err(Error::dims("closed_form_convexifier", map.input_dim(), x.len()));
    }
    let act = map.activation();
    if !act.has_gamma() {
        return Err(Error::invalid(format!(
            "activation `{}` has no closed-form convexifier",
            act.name()
        )));
    }
    let u = map.pre_activation(x);
    let diff = u
        .iter()
        .zip(map.bias().iter())
        .map(|(&ux, &b)| {
            let (yx, y0) = (act.value(ux), act.value(b));
            for y in [yx, y0] {
                if !act.in_gamma_domain(y) {
                    let (lo, hi) = act.gamma_domain();
                    return Err(Error::invalid(format!(
                        "σ value {y} outside the convexifier domain ({lo}, {hi}) of `{}`",
                        act.name()
                    )));
                }
            }
            Ok(act.gamma(yx).unwrap() - act.gamma(y0).unwrap())
        })
        .collect::<Result<Vec<f64>>>()?;
    let a = map.weight();
    Ok(Vector::from_raw(mat_t_vec_raw(a.data(), a.rows(), a.cols(), &diff)))
}

/// `φ(x) ≈ Σ_k w_k ⟨field(s_k x), x⟩`, the potential normalised by `φ(0) = 0`.
pub fn reconstruct_potential<F>(field: F, x: &[f64], rule: QuadratureRule) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<Vector>,
{
    if !rule.is_deterministic() {
        return Err(Error::invalid("potential reconstruction needs a deterministic rule"));
    }
    let nodes = sample_nodes(rule, None)?;
    let mut total = 0.0;
    for q in &nodes {
        let sx: Vec<f64> = x.iter().map(|v| q.s * v).collect();
        let f = field(&sx)?;
        if f.len() != x.len() {
            return Err(Error::dims("reconstruct_potential", x.len(), f.len()));
        }
        total += q.w * dot_raw(&f, x);
    }
    Ok(total)
}

/// The implicit model `N_θ(x) = ∫₀¹ [DM_θ(sx)]ᵀ DM_θ(sx) x ds (+ offset)`.
///
/// `constrained()` holds exactly when the hidden map is one-layer, the case
/// where the output is guaranteed to be a convex gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexGradientModel {
    hidden: HiddenMap,
    train_rule: QuadratureRule,
    eval_rule: QuadratureRule,
    offset: Option<Vector>,
    eval_nodes: Vec<QuadNode>,
}

impl ConvexGradientModel {
    pub const DEFAULT_TRAIN_RULE: QuadratureRule = QuadratureRule::Stratified { nodes: 8 };
    pub const DEFAULT_EVAL_RULE: QuadratureRule = QuadratureRule::GaussLegendre { nodes: 32 };

    pub fn new(hidden: HiddenMap, train_rule: QuadratureRule, eval_rule: QuadratureRule) -> Result<Self> {
        train_rule.validate()?;
        if !eval_rule.is_deterministic() {
            return Err(Error::invalid("the evaluation rule must be deterministic"));
        }
        let eval_nodes = sample_nodes(eval_rule, None)?;
        Ok(ConvexGradientModel {
            hidden,
            train_rule,
            eval_rule,
            offset: None,
            eval_nodes,
        })
    }

    pub fn with_defaults(hidden: HiddenMap) -> Self {
        Self::new(hidden, Self::DEFAULT_TRAIN_RULE, Self::DEFAULT_EVAL_RULE).expect("default rules are valid")
    }

    /// Adds a learnable constant output `F(0)`, initialised to zero.
    pub fn with_offset(mut self, offset: Option<Vector>) -> Result<Self> {
        if let Some(o) = &offset {
            if o.len() != self.dim() {
                return Err(Error::dims("offset", self.dim(), o.len()));
            }
        }
        self.offset = offset;
        Ok(self)
    }

    pub fn with_eval_rule(&self, eval_rule: QuadratureRule) -> Result<Self> {
        let mut m = Self::new(self.hidden.clone(), self.train_rule, eval_rule)?;
        m.offset = self.offset.clone();
        Ok(m)
    }

    pub fn hidden(&self) -> &HiddenMap {
        &self.hidden
    }

    pub fn train_rule(&self) -> QuadratureRule {
        self.train_rule
    }

    pub fn eval_rule(&self) -> QuadratureRule {
        self.eval_rule
    }

    pub fn offset(&self) -> Option<&Vector> {
        self.offset.as_ref()
    }

    pub fn eval_nodes(&self) -> &[QuadNode] {
        &self.eval_nodes
    }

    pub fn constrained(&self) -> bool {
        self.hidden.is_one_layer()
    }

    pub fn dim(&self) -> usize {
        self.hidden.input_dim()
    }

    /// Nodes for one forward call in `mode`.
    pub fn nodes(&self, mode: Mode, rng: Option<&mut RngStream>) -> Result<Vec<QuadNode>> {
        match mode {
            Mode::Eval => Ok(self.eval_nodes.clone()),
            Mode::Train => {
                let rng = rng.ok_or_else(|| Error::invalid("train mode requires an RNG stream"))?;
                sample_nodes(self.train_rule, Some(rng))
            }
        }
    }

    pub fn forward_with_nodes(&self, x: &[f64], nodes: &[QuadNode]) -> Result<Vector> {
        let mut f = convexify_eval(&self.hidden, x, nodes)?;
        if let Some(o) = &self.offset {
            for (fi, oi) in f.as_mut_slice().iter_mut().zip(o.iter()) {
                *fi += oi;
            }
        }
        Ok(f)
    }

    /// Records the forward map at `x` with the given nodes on `tape`.
    pub fn record_forward(&self, tape: &mut Tape, leaves: &[NodeId], x: &[f64], nodes: &[QuadNode]) -> Result<NodeId> {
        check_weights(nodes)?;
        let hidden_count = self.hidden.params().entries().len();
        let hidden_leaves = &leaves[..hidden_count];
        let mut acc: Option<NodeId> = None;
        for q in nodes {
            let v = self.hidden.record_integrand(tape, hidden_leaves, x, q.s)?;
            let term = tape.scale(v, q.w);
            acc = Some(match acc {
                None => term,
                Some(a) => tape.add(a, term)?,
            });
        }
        let mut out = acc.expect("at least one node");
        if self.offset.is_some() {
            out = tape.add(out, leaves[hidden_count])?;
        }
        Ok(out)
    }
}

impl Parameterized for ConvexGradientModel {
    fn params(&self) -> Params {
        let mut p = self.hidden.params();
        if let Some(o) = &self.offset {
            p.push("offset", Shape::Vector(o.len()), o.to_vec());
        }
        p
    }

    fn set_params(&mut self, params: &Params) -> Result<()> {
        self.hidden.set_params(params)?;
        if let Some(o) = &mut self.offset {
            let v = params.value("offset")?;
            if v.len() != o.len() {
                return Err(Error::dims("offset", o.len(), v.len()));
            }
            o.as_mut_slice().copy_from_slice(v);
        }
        Ok(())
    }
}

/// `N_θ(x)` with freshly sampled training nodes or the fixed evaluation rule.
pub fn icgn_forward(
    model: &ConvexGradientModel,
    x: &[f64],
    mode: Mode,
    rng: Option<&mut RngStream>,
) -> Result<Vector> {
    let nodes = model.nodes(mode, rng)?;
    model.forward_with_nodes(x, &nodes)
}
