use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::RngStream;

/// A node `s ∈ [0, 1]` with weight `w`; weights of a rule sum to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadNode {
    pub s: f64,
    pub w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum QuadratureRule {
    /// One uniform draw per equal-width subinterval.
    Stratified { nodes: usize },
    GaussLegendre { nodes: usize },
    Midpoint { nodes: usize },
}

impl QuadratureRule {
    pub fn node_count(self) -> usize {
        match self {
            QuadratureRule::Stratified { nodes }
            | QuadratureRule::GaussLegendre { nodes }
            | QuadratureRule::Midpoint { nodes } => nodes,
        }
    }

    pub fn is_deterministic(self) -> bool {
        !matches!(self, QuadratureRule::Stratified { .. })
    }

    pub fn validate(self) -> Result<()> {
        if self.node_count() == 0 {
            return Err(Error::invalid("quadrature rules need at least one node"));
        }
        Ok(())
    }
}

/// Nodes and weights of `rule` on `[0, 1]`, sorted by `s`.
///
/// `rng` is required for (and only consumed by) the stratified rule.
pub fn sample_nodes(rule: QuadratureRule, rng: Option<&mut RngStream>) -> Result<Vec<QuadNode>> {
    rule.validate()?;
    match rule {
        QuadratureRule::Stratified { nodes: k } => {
            let rng = rng.ok_or_else(|| Error::invalid("stratified quadrature requires an RNG stream"))?;
            let kf = k as f64;
            Ok((0..k)
                .map(|i| {
                    let hi = (i + 1) as f64 / kf;
                    let mut s = (i as f64 + rng.next_f64()) / kf;
                    if s >= hi {
                        s = f64::from_bits(hi.to_bits() - 1);
                    }
                    QuadNode { s, w: 1.0 / kf }
                })
                .collect())
        }
        QuadratureRule::Midpoint { nodes: n } => {
            let nf = n as f64;
            Ok((0..n)
                .map(|i| QuadNode {
                    s: (i as f64 + 0.5) / nf,
                    w: 1.0 / nf,
                })
                .collect())
        }
        QuadratureRule::GaussLegendre { nodes: n } => Ok(gauss_legendre(n)
            .into_iter()
            .map(|(t, w)| QuadNode {
                s: 0.5 * (t + 1.0),
                w: 0.5 * w,
            })
            .collect()),
    }
}

const NEWTON_TOL: f64 = 1e-15;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, ascending.
///
/// Roots of `P_n` by Newton iteration from the Tricomi-style initial guess
/// `cos(π(i + 3/4)/(n + 1/2))`; weights `2 / ((1 - t²) P_n′(t)²)`. Nodes are
/// mirrored so the rule is exactly symmetric.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1, "need at least one node");
    let mut out = vec![(0.0, 0.0); n];
    for i in 0..n.div_ceil(2) {
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, t);
            dp = d;
            let step = p / d;
            t -= step;
            if step.abs() < NEWTON_TOL {
                break;
            }
        }
        let (_, d) = legendre(n, t);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - t * t) * dp * dp);
        out[i] = (-t, w);
        out[n - 1 - i] = (t, w);
    }
    if n % 2 == 1 {
        out[n / 2].0 = 0.0;
    }
    out
}

/// `(P_n(t), P_n′(t))` by the three-term recurrence.
fn legendre(n: usize, t: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, t);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * t * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (t * p1 - p0) / (t * t - 1.0);
    (p1, d)
}
