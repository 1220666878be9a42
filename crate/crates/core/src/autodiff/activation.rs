use std::fmt;

use crate::error::{Error, Result};

type ScalarFn = fn(f64) -> f64;

/// An elementwise activation with analytic derivatives.
///
/// `gamma`, when present, is the antiderivative satisfying `γ′ = σ′∘σ⁻¹` on
/// `gamma_domain`; it gives the closed-form convexifier of `σ(Ax+b)`.
#[derive(Clone, Copy)]
pub struct Activation {
    name: &'static str,
    value: ScalarFn,
    d1: ScalarFn,
    d2: Option<ScalarFn>,
    gamma: Option<ScalarFn>,
    inverse: Option<ScalarFn>,
    gamma_domain: (f64, f64),
}

impl Activation {
    pub const BUILTIN_NAMES: [&'static str; 3] = ["tanh", "softplus", "identity"];

    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "tanh" => Ok(Self::tanh()),
            "softplus" => Ok(Self::softplus()),
            "identity" => Ok(Self::identity()),
            other => Err(Error::invalid(format!(
                "unknown activation `{other}` (expected one of {})",
                Self::BUILTIN_NAMES.join(", ")
            ))),
        }
    }

    pub fn tanh() -> Self {
        Activation {
            name: "tanh",
            value: f64::tanh,
            d1: |x| {
                let t = x.tanh();
                1.0 - t * t
            },
            d2: Some(|x| {
                let t = x.tanh();
                -2.0 * t * (1.0 - t * t)
            }),
            gamma: Some(|y| y - y * y * y / 3.0),
            inverse: Some(f64::atanh),
            gamma_domain: (-1.0, 1.0),
        }
    }

    /// `ln(1 + eˣ)`, evaluated as `max(x, 0) + ln(1 + e^{-|x|})`.
    pub fn softplus() -> Self {
        Activation {
            name: "softplus",
            value: |x| x.max(0.0) + (-x.abs()).exp().ln_1p(),
            d1: logistic,
            d2: Some(|x| {
                let l = logistic(x);
                l * (1.0 - l)
            }),
            gamma: Some(|y| y + (-y).exp() - 1.0),
            inverse: Some(|y| y + (-(-y).exp_m1()).ln()),
            gamma_domain: (0.0, f64::INFINITY),
        }
    }

    pub fn identity() -> Self {
        Activation {
            name: "identity",
            value: |x| x,
            d1: |_| 1.0,
            d2: Some(|_| 0.0),
            gamma: Some(|y| y),
            inverse: Some(|y| y),
            gamma_domain: (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// A user-supplied activation. Without `d2` it cannot be recorded as a
    /// derivative primitive on a [`Tape`](super::Tape).
    pub fn custom(name: &'static str, value: ScalarFn, d1: ScalarFn, d2: Option<ScalarFn>) -> Self {
        Activation {
            name,
            value,
            d1,
            d2,
            gamma: None,
            inverse: None,
            gamma_domain: (f64::NAN, f64::NAN),
        }
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn is_builtin(&self) -> bool {
        Self::BUILTIN_NAMES.contains(&self.name)
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        (self.value)(x)
    }

    #[inline]
    pub fn d1(&self, x: f64) -> f64 {
        (self.d1)(x)
    }

    pub fn d2(&self, x: f64) -> Option<f64> {
        self.d2.map(|f| f(x))
    }

    pub fn has_d2(&self) -> bool {
        self.d2.is_some()
    }

    pub(crate) fn d2_unchecked(&self, x: f64) -> f64 {
        (self.d2.expect("activation without second derivative"))(x)
    }

    pub fn gamma(&self, y: f64) -> Option<f64> {
        self.gamma.map(|f| f(y))
    }

    pub fn has_gamma(&self) -> bool {
        self.gamma.is_some()
    }

    pub fn inverse(&self, y: f64) -> Option<f64> {
        self.inverse.map(|f| f(y))
    }

    /// Open interval on which `gamma` is defined.
    pub fn gamma_domain(&self) -> (f64, f64) {
        self.gamma_domain
    }

    pub fn in_gamma_domain(&self, y: f64) -> bool {
        let (lo, hi) = self.gamma_domain;
        y > lo && y < hi
    }
}

impl PartialEq for Activation {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
    }
}

impl fmt::Debug for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Activation").field(&self.name).finish()
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> impl Iterator<Item = f64> {
        (-30..=30).map(|i| i as f64 / 10.0)
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1.0)
    }

    fn builtins() -> Vec<Activation> {
        Activation::BUILTIN_NAMES
            .iter()
            .map(|n| Activation::builtin(n).unwrap())
            .collect()
    }

    #[test]
    fn derivatives_match_central_differences() {
        let h = 1e-5;
        for act in builtins() {
            for x in grid() {
                let fd1 = (act.value(x + h) - act.value(x - h)) / (2.0 * h);
                assert!(rel_err(act.d1(x), fd1) < 1e-7, "{} d1 at {x}", act.name());
                let fd2 = (act.d1(x + h) - act.d1(x - h)) / (2.0 * h);
                let d2 = act.d2(x).unwrap();
                assert!(rel_err(d2, fd2) < 1e-7, "{} d2 at {x}", act.name());
            }
        }
    }

    #[test]
    fn gamma_derivative_is_d1_at_preimage() {
        let h = 1e-6;
        for act in builtins() {
            for x in grid() {
                let y = act.value(x);
                if !act.in_gamma_domain(y - h) || !act.in_gamma_domain(y + h) {
                    continue;
                }
                let fd = (act.gamma(y + h).unwrap() - act.gamma(y - h).unwrap()) / (2.0 * h);
                assert!((fd - act.d1(x)).abs() < 1e-7, "{} at {x}", act.name());
            }
        }
    }

    #[test]
    fn gamma_identity_exact_form() {
        // γ′(y) in closed form: tanh → 1 − y², softplus → 1 − e^{−y}.
        for x in grid() {
            let y = x.tanh();
            assert!(((1.0 - y * y) - Activation::tanh().d1(x)).abs() < 1e-9);
            let sp = Activation::softplus();
            let y = sp.value(x);
            assert!(((1.0 - (-y).exp()) - sp.d1(x)).abs() < 1e-9);
        }
    }

    #[test]
    fn inverse_roundtrips() {
        for act in builtins() {
            for x in grid() {
                let back = act.inverse(act.value(x)).unwrap();
                assert!((back - x).abs() < 1e-8, "{} at {x}", act.name());
            }
        }
    }

    #[test]
    fn examples() {
        let t = Activation::tanh();
        assert!((t.gamma(0.5).unwrap() - (0.5 - 0.125 / 3.0)).abs() < 1e-15);
        let sp = Activation::softplus();
        assert!((sp.value(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        // γ′(ln 2) = 1 − e^{−ln 2} = 0.5 = logistic(0)
        let h = 1e-6;
        let ln2 = std::f64::consts::LN_2;
        let fd = (sp.gamma(ln2 + h).unwrap() - sp.gamma(ln2 - h).unwrap()) / (2.0 * h);
        assert!((fd - 0.5).abs() < 1e-9);
        assert_eq!(sp.d1(0.0), 0.5);
    }

    #[test]
    fn softplus_does_not_overflow() {
        let sp = Activation::softplus();
        assert_eq!(sp.value(800.0), 800.0);
        assert!(sp.value(-800.0) >= 0.0 && sp.value(-800.0).is_finite());
        assert_eq!(sp.d1(800.0), 1.0);
        assert_eq!(sp.d1(-800.0), 0.0);
    }

    #[test]
    fn unknown_name_rejected() {
        let err = Activation::builtin("relu").unwrap_err().to_string();
        assert!(err.contains("relu"));
    }
}
