//! Numerical checks of the construction's guarantees: the integrability
//! condition on the hidden map, symmetry and positive semidefiniteness of the
//! field's Jacobian, agreement with the closed-form convexifier, and
//! gradient checks of training losses.
//!
//! The integrability condition checked by [`pde_residual`] is
//!
//! ```text
//! ∂²G/∂xᵏ∂xⁱ · ∂G/∂xʲ = ∂²G/∂xᵏ∂xʲ · ∂G/∂xⁱ   for all i, j, k
//! ```
//!
//! (dot products in the output space). It is the closedness of the rows of
//! `[DG]ᵀDG` viewed as 1-forms, written in the form `d ω_k = 0` expands to;
//! only this form is asserted.

use crate::autodiff::{NodeId, Params, Tape};
use crate::error::{Error, Result};
use crate::integrator::{
    closed_form_convexifier, convexify_eval, icgn_forward, sample_nodes, ConvexGradientModel, Mode, QuadratureRule,
};
use crate::models::{HiddenMap, OneLayerMap};
use crate::numeric::{dot_raw, sym_min_eig, Matrix, RngStream, Vector};

pub const FIRST_DERIVATIVE_STEP: f64 = 1e-5;
pub const SECOND_DERIVATIVE_STEP: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub point: Vector,
    /// Largest absolute defect over all index triples.
    pub residual: f64,
    /// `(i, j, k)` attaining `residual`.
    pub worst: Option<[usize; 3]>,
}

/// Central-difference Jacobian; column `j` is `(f(x+h e_j) − f(x−h e_j)) / 2h`.
pub fn fd_jacobian<F>(field: F, x: &[f64], h: f64) -> Result<Matrix>
where
    F: Fn(&[f64]) -> Result<Vector>,
{
    if !(h > 0.0) {
        return Err(Error::invalid(format!("finite-difference step must be positive, got {h}")));
    }
    let mut cols = Vec::with_capacity(x.len());
    let mut rows = 0;
    for j in 0..x.len() {
        let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
        xp[j] += h;
        xm[j] -= h;
        let (fp, fm) = (field(&xp)?, field(&xm)?);
        rows = fp.len();
        cols.push(fp.iter().zip(fm.iter()).map(|(a, b)| (a - b) / (2.0 * h)).collect());
    }
    Ok(Matrix::from_columns(rows, &cols))
}

/// `‖J − Jᵀ‖_F / max(1, ‖J‖_F)`.
pub fn symmetry_residual(j: &Matrix) -> Result<f64> {
    if !j.is_square() {
        return Err(Error::invalid(format!(
            "symmetry residual needs a square matrix, got {}x{}",
            j.rows(),
            j.cols()
        )));
    }
    let mut skew = 0.0;
    for r in 0..j.rows() {
        for c in 0..j.cols() {
            let d = j.get(r, c) - j.get(c, r);
            skew += d * d;
        }
    }
    Ok(skew.sqrt() / j.frobenius_norm().max(1.0))
}

/// Smallest eigenvalue of `(J + Jᵀ)/2`.
pub fn psd_min_eig(j: &Matrix) -> Result<f64> {
    sym_min_eig(j)
}

/// Columns `∂G/∂xⁱ` at `x`.
fn first_derivatives(g: &HiddenMap, x: &[f64]) -> Result<Vec<Vector>> {
    let n = g.input_dim();
    (0..n).map(|i| g.jvp(x, &Vector::basis(n, i))).collect()
}

/// `second[k][i] = ∂²G/∂xᵏ∂xⁱ`: analytic for one-layer maps, central
/// differences of JVPs otherwise.
fn second_derivatives(g: &HiddenMap, x: &[f64]) -> Result<Vec<Vec<Vec<f64>>>> {
    let n = g.input_dim();
    match g {
        HiddenMap::OneLayer(m) => {
            let u = m.pre_activation(x);
            let a = m.weight();
            let act = m.activation();
            let curv: Vec<f64> = u.iter().map(|&v| act.d2(v).unwrap_or(f64::NAN)).collect();
            if curv.iter().any(|v| v.is_nan()) {
                return Err(Error::invalid("activation has no second derivative"));
            }
            Ok((0..n)
                .map(|k| {
                    (0..n)
                        .map(|i| (0..a.rows()).map(|r| curv[r] * a.get(r, k) * a.get(r, i)).collect())
                        .collect()
                })
                .collect())
        }
        HiddenMap::Deep(_) => {
            let h = SECOND_DERIVATIVE_STEP;
            (0..n)
                .map(|k| {
                    let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
                    xp[k] += h;
                    xm[k] -= h;
                    (0..n)
                        .map(|i| {
                            let e = Vector::basis(n, i);
                            let (jp, jm) = (g.jvp(&xp, &e)?, g.jvp(&xm, &e)?);
                            Ok(jp.iter().zip(jm.iter()).map(|(a, b)| (a - b) / (2.0 * h)).collect())
                        })
                        .collect()
                })
                .collect()
        }
    }
}

/// Largest `|∂²G/∂xᵏ∂xⁱ·∂G/∂xʲ − ∂²G/∂xᵏ∂xʲ·∂G/∂xⁱ|` over all triples.
pub fn pde_residual(hidden: &HiddenMap, x: &[f64]) -> Result<ResidualReport> {
    if x.len() != hidden.input_dim() {
        return Err(Error::dims("pde_residual", hidden.input_dim(), x.len()));
    }
    let first = first_derivatives(hidden, x)?;
    let second = second_derivatives(hidden, x)?;
    let n = hidden.input_dim();
    let mut residual = 0.0;
    let mut worst = None;
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let d = (dot_raw(&second[k][i], &first[j]) - dot_raw(&second[k][j], &first[i])).abs();
                if d > residual || worst.is_none() {
                    residual = residual.max(d);
                    worst = Some([i, j, k]);
                }
            }
        }
    }
    Ok(ResidualReport {
        point: Vector::from_raw(x.to_vec()),
        residual,
        worst,
    })
}

/// Largest cross-condition defect
/// `|∂²G/∂xᵏ∂xⁱ·∂F/∂xʲ − ∂²F/∂xᵏ∂xⁱ·∂G/∂xʲ|` over `i ≠ j`, with `F = f`
/// and `G = g`. When it vanishes, `f + g` inherits the integrability
/// condition from `f` and `g`.
pub fn additive_cross_residual(f: &HiddenMap, g: &HiddenMap, x: &[f64]) -> Result<f64> {
    if f.input_dim() != g.input_dim() {
        return Err(Error::dims("additive_cross_residual input", f.input_dim(), g.input_dim()));
    }
    if f.output_dim() != g.output_dim() {
        return Err(Error::dims("additive_cross_residual output", f.output_dim(), g.output_dim()));
    }
    if x.len() != f.input_dim() {
        return Err(Error::dims("additive_cross_residual", f.input_dim(), x.len()));
    }
    let (df, dg) = (first_derivatives(f, x)?, first_derivatives(g, x)?);
    let (hf, hg) = (second_derivatives(f, x)?, second_derivatives(g, x)?);
    let n = f.input_dim();
    let mut worst: f64 = 0.0;
    for k in 0..n {
        for i in 0..n {
            for j in (0..n).filter(|&j| j != i) {
                let d = dot_raw(&hg[k][i], &df[j]) - dot_raw(&hf[k][i], &dg[j]);
                worst = worst.max(d.abs());
            }
        }
    }
    Ok(worst)
}

/// `⟨field(x) − field(y), x − y⟩`; nonnegative for gradients of convex functions.
pub fn monotonicity_probe<F>(field: F, x: &[f64], y: &[f64]) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<Vector>,
{
    if x.len() != y.len() {
        return Err(Error::dims("monotonicity_probe", x.len(), y.len()));
    }
    let (fx, fy) = (field(x)?, field(y)?);
    Ok(fx
        .iter()
        .zip(fy.iter())
        .zip(x.iter().zip(y))
        .map(|((a, b), (c, d))| (a - b) * (c - d))
        .sum())
}

/// `‖quadrature − closed form‖∞` for a one-layer map.
pub fn closed_form_gap(map: &OneLayerMap, x: &[f64], rule: QuadratureRule) -> Result<f64> {
    if !rule.is_deterministic() {
        return Err(Error::invalid("closed-form comparison needs a deterministic rule"));
    }
    let nodes = sample_nodes(rule, None)?;
    let hidden = HiddenMap::OneLayer(map.clone());
    let quad = convexify_eval(&hidden, x, &nodes)?;
    let exact = closed_form_convexifier(map, x)?;
    Ok(quad
        .iter()
        .zip(exact.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// `F = ∫[DG]ᵀDG x` has Jacobian `[DG]ᵀDG`; entrywise gap between a
/// finite-difference Jacobian of the model's output and the Gram product of
/// the hidden map's Jacobian at `x`.
pub fn gram_residual(model: &ConvexGradientModel, x: &[f64], h: f64) -> Result<f64> {
    let fd = fd_jacobian(|y| icgn_forward(model, y, Mode::Eval, None), x, h)?;
    let gram = model.hidden().jacobian(x)?.gram();
    fd.max_abs_diff(&gram)
}

/// Per-component statistics of a stochastic forward estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorStats {
    pub mean: f64,
    pub std_err: f64,
    pub reference: f64,
}

impl EstimatorStats {
    /// `|mean − reference|` in standard errors.
    pub fn z_score(&self) -> f64 {
        let d = (self.mean - self.reference).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.std_err
        }
    }
}

/// Train-mode estimates of `model(x)` over `seeds` independent streams,
/// against the deterministic `reference_rule`.
pub fn estimator_stats(
    model: &ConvexGradientModel,
    x: &[f64],
    seeds: std::ops::Range<u64>,
    reference_rule: QuadratureRule,
) -> Result<Vec<EstimatorStats>> {
    let reference = model.forward_with_nodes(x, &sample_nodes(reference_rule, None)?)?;
    let n = (seeds.end - seeds.start) as f64;
    if n < 2.0 {
        return Err(Error::invalid("need at least two seeds"));
    }
    let samples = seeds
        .map(|s| icgn_forward(model, x, Mode::Train, Some(&mut RngStream::new(s))))
        .collect::<Result<Vec<_>>>()?;
    Ok((0..x.len())
        .map(|c| {
            let mean = samples.iter().map(|v| v[c]).sum::<f64>() / n;
            let var = samples.iter().map(|v| (v[c] - mean).powi(2)).sum::<f64>() / (n - 1.0);
            EstimatorStats {
                mean,
                std_err: (var / n).sqrt(),
                reference: reference[c],
            }
        })
        .collect())
}

/// Largest relative error between reverse-mode gradients and central
/// differences (step `1e-5`, denominator `max(1e-8, |fd|)`) over every
/// scalar parameter.
pub fn grad_check<F>(loss: F, params: &Params) -> Result<f64>
where
    F: Fn(&mut Tape, &[NodeId]) -> Result<NodeId>,
{
    let eval = |p: &Params| -> Result<f64> {
        let mut tape = Tape::new();
        let leaves = p.register(&mut tape);
        let root = loss(&mut tape, &leaves)?;
        Ok(tape.scalar(root))
    };
    let mut tape = Tape::new();
    let leaves = params.register(&mut tape);
    let root = loss(&mut tape, &leaves)?;
    let value = tape.scalar(root);
    if !value.is_finite() {
        return Err(Error::invalid(format!("loss is not finite ({value})")));
    }
    let grad = tape.backward(root)?.flatten(&leaves);
    let flat = params.flatten();
    let h = FIRST_DERIVATIVE_STEP;
    let mut worst: f64 = 0.0;
    for idx in 0..flat.len() {
        let (mut up, mut down) = (flat.clone(), flat.clone());
        up[idx] += h;
        down[idx] -= h;
        let fd = (eval(&params.unflatten(&up)?)? - eval(&params.unflatten(&down)?)?) / (2.0 * h);
        let err = (grad[idx] - fd).abs() / fd.abs().max(1e-8);
        worst = worst.max(err);
    }
    Ok(worst)
}
