use super::init::{init_bias, init_weight};
use super::Parameterized;
use crate::autodiff::{Activation, NodeId, Params, Shape, Tape};
use crate::error::{Error, Result};
use crate::numeric::{mat_t_vec_raw, mat_vec_raw, Matrix, RngStream, Vector};

/// `G(x) = σ(Ax + b)` with `A: m×n`.
#[derive(Debug, Clone, PartialEq)]
pub struct OneLayerMap {
    a: Matrix,
    b: Vector,
    act: Activation,
}

impl OneLayerMap {
    pub fn new(a: Matrix, b: Vector, act: Activation) -> Result<Self> {
        if b.len() != a.rows() {
            return Err(Error::dims("OneLayerMap::new", a.rows(), b.len()));
        }
        Ok(OneLayerMap { a, b, act })
    }

    pub fn init(input_dim: usize, output_dim: usize, act: Activation, rng: &mut RngStream) -> Self {
        OneLayerMap {
            a: init_weight(output_dim, input_dim, rng),
            b: init_bias(output_dim),
            act,
        }
    }

    pub fn weight(&self) -> &Matrix {
        &self.a
    }

    pub fn bias(&self) -> &Vector {
        &self.b
    }

    pub fn activation(&self) -> Activation {
        self.act
    }

    pub fn input_dim(&self) -> usize {
        self.a.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.a.rows()
    }

    /// `Ax + b`, unchecked.
    pub(crate) fn pre_activation(&self, x: &[f64]) -> Vec<f64> {
        let mut u = mat_vec_raw(self.a.data(), self.a.rows(), self.a.cols(), x);
        for (ui, bi) in u.iter_mut().zip(self.b.iter()) {
            *ui += bi;
        }
        u
    }

    fn integrand_raw(&self, x: &[f64], s: f64) -> Vec<f64> {
        let (m, n) = (self.a.rows(), self.a.cols());
        let sx: Vec<f64> = x.iter().map(|v| s * v).collect();
        let u = self.pre_activation(&sx);
        let ax = mat_vec_raw(self.a.data(), m, n, x);
        let w: Vec<f64> = u
            .iter()
            .zip(&ax)
            .map(|(&ui, &axi)| {
                let d = self.act.d1(ui);
                d * (d * axi)
            })
            .collect();
        mat_t_vec_raw(self.a.data(), m, n, &w)
    }

    fn record_integrand(&self, tape: &mut Tape, leaves: &[NodeId], x: &[f64], s: f64) -> Result<NodeId> {
        let (a, b) = (leaves[0], leaves[1]);
        let sx = tape.constant(x.iter().map(|v| s * v).collect());
        let xc = tape.constant(x.to_vec());
        let lin = tape.mat_vec(a, sx)?;
        let u = tape.add(lin, b)?;
        let d = tape.activation(u, self.act, 1)?;
        let ax = tape.mat_vec(a, xc)?;
        let jv = tape.hadamard(d, ax)?;
        let w = tape.hadamard(d, jv)?;
        tape.mat_t_vec(a, w)
    }
}

impl Parameterized for OneLayerMap {
    fn params(&self) -> Params {
        let mut p = Params::new();
        p.push("A", Shape::Matrix(self.a.rows(), self.a.cols()), self.a.data().to_vec());
        p.push("b", Shape::Vector(self.b.len()), self.b.to_vec());
        p
    }

    fn set_params(&mut self, params: &Params) -> Result<()> {
        let a = params.value("A")?;
        let b = params.value("b")?;
        if a.len() != self.a.data().len() {
            return Err(Error::dims("OneLayerMap::set_params", self.a.data().len(), a.len()));
        }
        if b.len() != self.b.len() {
            return Err(Error::dims("OneLayerMap::set_params", self.b.len(), b.len()));
        }
        self.a.data_mut().copy_from_slice(a);
        self.b.as_mut_slice().copy_from_slice(b);
        Ok(())
    }

    fn param_count(&self) -> usize {
        self.a.data().len() + self.b.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub w: Matrix,
    pub b: Vector,
    pub act: Activation,
}

/// `G = σ_L ∘ (W_L · + b_L) ∘ … ∘ σ_1 ∘ (W_1 · + b_1)`.
///
/// Such maps generally violate the integrability condition, so their
/// convexification is well defined but not guaranteed to be a gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct DeepMap {
    layers: Vec<Layer>,
}

impl DeepMap {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.len() < 2 {
            return Err(Error::invalid(format!(
                "a deep map needs at least 2 layers, got {}",
                layers.len()
            )));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.b.len() != l.w.rows() {
                return Err(Error::invalid(format!(
                    "layer {i}: bias length {} does not match {} rows",
                    l.b.len(),
                    l.w.rows()
                )));
            }
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[1].w.cols() != pair[0].w.rows() {
                return Err(Error::invalid(format!(
                    "layer {}: expects input dim {}, previous layer outputs {}",
                    i + 1,
                    pair[1].w.cols(),
                    pair[0].w.rows()
                )));
            }
        }
        Ok(DeepMap { layers })
    }

    /// `dims = [n, h_1, …, m]`, one activation for every layer.
    pub fn init(dims: &[usize], act: Activation, rng: &mut RngStream) -> Result<Self> {
        if dims.len() < 3 {
            return Err(Error::invalid("deep map needs dims [n, h, ..., m] with at least 2 layers"));
        }
        let layers = dims
            .windows(2)
            .map(|d| Layer {
                w: init_weight(d[1], d[0], rng),
                b: init_bias(d[1]),
                act,
            })
            .collect();
        DeepMap::new(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("≥ 2 layers").w.rows()
    }

    /// Pre-activations of each layer at `x`.
    fn pre_activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut h = x.to_vec();
        let mut us = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let mut u = mat_vec_raw(l.w.data(), l.w.rows(), l.w.cols(), &h);
            for (ui, bi) in u.iter_mut().zip(l.b.iter()) {
                *ui += bi;
            }
            h = u.iter().map(|&v| l.act.value(v)).collect();
            us.push(u);
        }
        us
    }

    fn jvp_with(&self, us: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
        let mut v = v.to_vec();
        for (l, u) in self.layers.iter().zip(us) {
            let wv = mat_vec_raw(l.w.data(), l.w.rows(), l.w.cols(), &v);
            v = wv.iter().zip(u).map(|(a, &ui)| l.act.d1(ui) * a).collect();
        }
        v
    }

    fn vjp_with(&self, us: &[Vec<f64>], u_bar: &[f64]) -> Vec<f64> {
        let mut g = u_bar.to_vec();
        for (l, u) in self.layers.iter().zip(us).rev() {
            let scaled: Vec<f64> = g.iter().zip(u).map(|(a, &ui)| l.act.d1(ui) * a).collect();
            g = mat_t_vec_raw(l.w.data(), l.w.rows(), l.w.cols(), &scaled);
        }
        g
    }

    fn record_integrand(&self, tape: &mut Tape, leaves: &[NodeId], x: &[f64], s: f64) -> Result<NodeId> {
        let mut h = tape.constant(x.iter().map(|v| s * v).collect());
        let mut v = tape.constant(x.to_vec());
        let mut derivs = Vec::with_capacity(self.layers.len());
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let (w, b) = (leaves[2 * i], leaves[2 * i + 1]);
            let lin = tape.mat_vec(w, h)?;
            let u = tape.add(lin, b)?;
            let d = tape.activation(u, l.act, 1)?;
            let wv = tape.mat_vec(w, v)?;
            v = tape.hadamard(d, wv)?;
            if i < last {
                h = tape.activation(u, l.act, 0)?;
            }
            derivs.push(d);
        }
        let mut g = v;
        for i in (0..self.layers.len()).rev() {
            let scaled = tape.hadamard(derivs[i], g)?;
            g = tape.mat_t_vec(leaves[2 * i], scaled)?;
        }
        Ok(g)
    }
}

impl Parameterized for DeepMap {
    fn params(&self) -> Params {
        let mut p = Params::new();
        for (i, l) in self.layers.iter().enumerate() {
            p.push(format!("W{i}"), Shape::Matrix(l.w.rows(), l.w.cols()), l.w.data().to_vec());
            p.push(format!("b{i}"), Shape::Vector(l.b.len()), l.b.to_vec());
        }
        p
    }

    fn set_params(&mut self, params: &Params) -> Result<()> {
        for (i, l) in self.layers.iter_mut().enumerate() {
            let w = params.value(&format!("W{i}"))?;
            let b = params.value(&format!("b{i}"))?;
            if w.len() != l.w.data().len() || b.len() != l.b.len() {
                return Err(Error::invalid(format!("layer {i}: parameter shape mismatch")));
            }
            l.w.data_mut().copy_from_slice(w);
            l.b.as_mut_slice().copy_from_slice(b);
        }
        Ok(())
    }
}

/// The explicit network whose Jacobian Gram product gets integrated.
#[derive(Debug, Clone, PartialEq)]
pub enum HiddenMap {
    OneLayer(OneLayerMap),
    Deep(DeepMap),
}

impl From<OneLayerMap> for HiddenMap {
    fn from(m: OneLayerMap) -> Self {
        HiddenMap::OneLayer(m)
    }
}

impl From<DeepMap> for HiddenMap {
    fn from(m: DeepMap) -> Self {
        HiddenMap::Deep(m)
    }
}

impl HiddenMap {
    pub fn input_dim(&self) -> usize {
        match self {
            HiddenMap::OneLayer(m) => m.input_dim(),
            HiddenMap::Deep(m) => m.input_dim(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            HiddenMap::OneLayer(m) => m.output_dim(),
            HiddenMap::Deep(m) => m.output_dim(),
        }
    }

    pub fn is_one_layer(&self) -> bool {
        matches!(self, HiddenMap::OneLayer(_))
    }

    pub fn as_one_layer(&self) -> Option<&OneLayerMap> {
        match self {
            HiddenMap::OneLayer(m) => Some(m),
            HiddenMap::Deep(_) => None,
        }
    }

    fn check_input(&self, op: &'static str, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::dims(op, self.input_dim(), x.len()));
        }
        Ok(())
    }

    /// `G(x)`.
    pub fn eval(&self, x: &[f64]) -> Result<Vector> {
        self.check_input("eval_hidden", x)?;
        let out = match self {
            HiddenMap::OneLayer(m) => m
                .pre_activation(x)
                .into_iter()
                .map(|u| m.act.value(u))
                .collect(),
            HiddenMap::Deep(m) => {
                let us = m.pre_activations(x);
                let (l, u) = (m.layers.last().unwrap(), us.last().unwrap());
                u.iter().map(|&v| l.act.value(v)).collect()
            }
        };
        Ok(Vector::from_raw(out))
    }

    /// `DG_x · v`.
    pub fn jvp(&self, x: &[f64], v: &[f64]) -> Result<Vector> {
        self.check_input("jvp", x)?;
        self.check_input("jvp", v)?;
        let out = match self {
            HiddenMap::OneLayer(m) => {
                let u = m.pre_activation(x);
                let av = mat_vec_raw(m.a.data(), m.a.rows(), m.a.cols(), v);
                u.iter().zip(&av).map(|(&ui, a)| m.act.d1(ui) * a).collect()
            }
            HiddenMap::Deep(m) => m.jvp_with(&m.pre_activations(x), v),
        };
        Ok(Vector::from_raw(out))
    }

    /// `DG_xᵀ · u`.
    pub fn vjp(&self, x: &[f64], u: &[f64]) -> Result<Vector> {
        self.check_input("vjp", x)?;
        if u.len() != self.output_dim() {
            return Err(Error::dims("vjp", self.output_dim(), u.len()));
        }
        let out = match self {
            HiddenMap::OneLayer(m) => {
                let pre = m.pre_activation(x);
                let scaled: Vec<f64> = pre.iter().zip(u).map(|(&p, a)| m.act.d1(p) * a).collect();
                mat_t_vec_raw(m.a.data(), m.a.rows(), m.a.cols(), &scaled)
            }
            HiddenMap::Deep(m) => m.vjp_with(&m.pre_activations(x), u),
        };
        Ok(Vector::from_raw(out))
    }

    /// `DG` at `x`, assembled column by column from JVPs.
    pub fn jacobian(&self, x: &[f64]) -> Result<Matrix> {
        let n = self.input_dim();
        let cols = (0..n)
            .map(|j| self.jvp(x, &Vector::basis(n, j)).map(Vector::into_vec))
            .collect::<Result<Vec<_>>>()?;
        Ok(Matrix::from_columns(self.output_dim(), &cols))
    }

    /// `[DG_{sx}]ᵀ DG_{sx} x`.
    pub fn integrand(&self, x: &[f64], s: f64) -> Result<Vector> {
        self.check_input("integrand", x)?;
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::invalid(format!("integration variable s = {s} outside [0, 1]")));
        }
        let out = match self {
            HiddenMap::OneLayer(m) => m.integrand_raw(x, s),
            HiddenMap::Deep(m) => {
                let sx: Vec<f64> = x.iter().map(|v| s * v).collect();
                let us = m.pre_activations(&sx);
                let jv = m.jvp_with(&us, x);
                m.vjp_with(&us, &jv)
            }
        };
        Ok(Vector::from_raw(out))
    }

    /// Records the integrand on `tape`; `leaves` are the registered
    /// [`params`](Parameterized::params) in order.
    pub fn record_integrand(&self, tape: &mut Tape, leaves: &[NodeId], x: &[f64], s: f64) -> Result<NodeId> {
        self.check_input("integrand", x)?;
        match self {
            HiddenMap::OneLayer(m) => m.record_integrand(tape, leaves, x, s),
            HiddenMap::Deep(m) => m.record_integrand(tape, leaves, x, s),
        }
    }
}

impl Parameterized for HiddenMap {
    fn params(&self) -> Params {
        match self {
            HiddenMap::OneLayer(m) => m.params(),
            HiddenMap::Deep(m) => m.params(),
        }
    }

    fn set_params(&mut self, params: &Params) -> Result<()> {
        match self {
            HiddenMap::OneLayer(m) => m.set_params(params),
            HiddenMap::Deep(m) => m.set_params(params),
        }
    }

    fn param_count(&self) -> usize {
        match self {
            HiddenMap::OneLayer(m) => m.param_count(),
            HiddenMap::Deep(m) => m.params().count(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{dot, max_abs_diff};

    fn one_layer(rows: &[&[f64]], b: &[f64], act: Activation) -> HiddenMap {
        OneLayerMap::new(Matrix::from_rows(rows).unwrap(), Vector::new(b.to_vec()).unwrap(), act)
            .unwrap()
            .into()
    }

    fn rand_vec(rng: &mut RngStream, n: usize, r: f64) -> Vec<f64> {
        (0..n).map(|_| rng.uniform(-r, r).unwrap()).collect()
    }

    fn random_maps(rng: &mut RngStream) -> Vec<HiddenMap> {
        let n = 1 + (rng.next_u64() % 4) as usize;
        let m = 1 + (rng.next_u64() % 6) as usize;
        let mut one = OneLayerMap::init(n, m, Activation::tanh(), rng);
        let b = rand_vec(rng, m, 1.0);
        one.b = Vector::new(b).unwrap();
        let mut deep = DeepMap::init(&[n, 4, m], Activation::softplus(), rng).unwrap();
        for l in &mut deep.layers {
            l.b = Vector::new(rand_vec(rng, l.b.len(), 1.0)).unwrap();
        }
        vec![one.into(), deep.into()]
    }

    #[test]
    fn eval_examples() {
        let g = one_layer(&[&[1.0, 0.0], &[0.0, 2.0]], &[0.0, 0.0], Activation::identity());
        assert_eq!(g.eval(&[1.0, 1.0]).unwrap().as_slice(), &[1.0, 2.0]);

        let g = one_layer(&[&[1.0, -1.0], &[2.0, 0.5]], &[0.0, -2.5], Activation::tanh());
        assert_eq!(g.eval(&[1.0, 1.0]).unwrap().as_slice(), &[0.0, 0.0]);

        let layer = |act| Layer { w: Matrix::identity(2), b: Vector::zeros(2), act };
        let deep: HiddenMap = DeepMap::new(vec![layer(Activation::identity()), layer(Activation::identity())])
            .unwrap()
            .into();
        assert_eq!(deep.eval(&[0.3, -4.0]).unwrap().as_slice(), &[0.3, -4.0]);
        assert!(deep.eval(&[1.0]).is_err());
    }

    #[test]
    fn jvp_vjp_examples() {
        let rows: &[&[f64]] = &[&[1.0, -1.0], &[2.0, 0.5]];
        let a = Matrix::from_rows(rows).unwrap();
        let g = one_layer(rows, &[0.0, -2.5], Activation::tanh());
        let v = [0.7, -0.2];
        let x = [1.0, 1.0]; // Ax + b = 0
        assert!(max_abs_diff(&g.jvp(&x, &v).unwrap(), &a.mat_vec(&v).unwrap()) < 1e-15);
        let u = [0.4, 1.3];
        assert!(max_abs_diff(&g.vjp(&x, &u).unwrap(), &a.mat_t_vec(&u).unwrap()) < 1e-15);

        let lin = one_layer(rows, &[0.3, 0.1], Activation::identity());
        assert_eq!(lin.jvp(&[5.0, 2.0], &v).unwrap(), a.mat_vec(&v).unwrap());
        assert_eq!(lin.vjp(&[5.0, 2.0], &u).unwrap(), a.mat_t_vec(&u).unwrap());
        assert!(lin.vjp(&x, &[1.0]).is_err());
    }

    #[test]
    fn jvp_matches_central_differences() {
        let mut rng = RngStream::new(21);
        let eps = 1e-5;
        for _ in 0..50 {
            for g in random_maps(&mut rng) {
                let n = g.input_dim();
                let x = rand_vec(&mut rng, n, 1.0);
                let v = rand_vec(&mut rng, n, 1.0);
                let xp: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + eps * b).collect();
                let xm: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a - eps * b).collect();
                let gp = g.eval(&xp).unwrap();
                let gm = g.eval(&xm).unwrap();
                let jv = g.jvp(&x, &v).unwrap();
                for k in 0..jv.len() {
                    let fd = (gp[k] - gm[k]) / (2.0 * eps);
                    assert!((jv[k] - fd).abs() <= 1e-7 * fd.abs().max(1.0), "{} vs {fd}", jv[k]);
                }
            }
        }
    }

    #[test]
    fn jvp_vjp_are_adjoint() {
        let mut rng = RngStream::new(22);
        for _ in 0..100 {
            for g in random_maps(&mut rng) {
                let x = rand_vec(&mut rng, g.input_dim(), 2.0);
                let v = rand_vec(&mut rng, g.input_dim(), 1.0);
                let u = rand_vec(&mut rng, g.output_dim(), 1.0);
                let lhs = dot(&u, &g.jvp(&x, &v).unwrap()).unwrap();
                let rhs = dot(&g.vjp(&x, &u).unwrap(), &v).unwrap();
                assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
            }
        }
    }

    #[test]
    fn jacobian_matches_fd_of_eval() {
        let mut rng = RngStream::new(23);
        let h = 1e-5;
        for _ in 0..30 {
            let g: HiddenMap = OneLayerMap::init(3, 5, Activation::tanh(), &mut rng).into();
            let x = rand_vec(&mut rng, 3, 1.0);
            let j = g.jacobian(&x).unwrap();
            for c in 0..3 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[c] += h;
                xm[c] -= h;
                let (gp, gm) = (g.eval(&xp).unwrap(), g.eval(&xm).unwrap());
                for r in 0..5 {
                    let fd = (gp[r] - gm[r]) / (2.0 * h);
                    assert!((j.get(r, c) - fd).abs() <= 1e-6 * fd.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn integrand_examples() {
        let rows: &[&[f64]] = &[&[1.0, 0.0], &[0.0, 2.0]];
        let lin = one_layer(rows, &[0.5, -1.0], Activation::identity());
        let expected = [1.0, 4.0]; // AᵀA x at x = (1, 1)
        for k in 0..=20 {
            let s = k as f64 / 20.0;
            let v = lin.integrand(&[1.0, 1.0], s).unwrap();
            assert!(max_abs_diff(&v, &expected) < 1e-14);
        }
        let scalar = one_layer(&[&[1.0]], &[0.0], Activation::tanh());
        assert_eq!(scalar.integrand(&[1.0], 0.0).unwrap().as_slice(), &[1.0]);
        let sech2 = 1.0 - 1f64.tanh().powi(2);
        assert!((scalar.integrand(&[1.0], 1.0).unwrap()[0] - sech2 * sech2).abs() < 1e-15);
        assert!((sech2 * sech2 - 0.176_378_447_614_134_74).abs() < 1e-12);
        assert!(scalar.integrand(&[1.0], 1.5).is_err());
    }

    #[test]
    fn tape_integrand_matches_direct() {
        let mut rng = RngStream::new(24);
        for _ in 0..20 {
            for g in random_maps(&mut rng) {
                let x = rand_vec(&mut rng, g.input_dim(), 1.0);
                let s = rng.next_f64();
                let mut tape = Tape::new();
                let leaves = g.params().register(&mut tape);
                let node = g.record_integrand(&mut tape, &leaves, &x, s).unwrap();
                let direct = g.integrand(&x, s).unwrap();
                assert!(max_abs_diff(tape.value(node), &direct) < 1e-14);
            }
        }
    }

    #[test]
    fn parameter_counts() {
        let mut rng = RngStream::new(0);
        assert_eq!(OneLayerMap::init(2, 5, Activation::tanh(), &mut rng).param_count(), 15);
        let deep = DeepMap::init(&[2, 4, 4], Activation::tanh(), &mut rng).unwrap();
        assert_eq!(deep.param_count(), 2 * 4 + 4 + 4 * 4 + 4);
        assert!(DeepMap::init(&[2, 4], Activation::tanh(), &mut rng).is_err());
    }

    #[test]
    fn set_params_roundtrip() {
        let mut rng = RngStream::new(25);
        let mut g: HiddenMap = OneLayerMap::init(2, 3, Activation::tanh(), &mut rng).into();
        let p = g.params();
        let shifted = p.unflatten(&p.flatten().iter().map(|v| v + 1.0).collect::<Vec<_>>()).unwrap();
        g.set_params(&shifted).unwrap();
        assert_eq!(g.params(), shifted);
    }
}
