use super::init::{init_bias, init_nonnegative, init_weight};
use super::Parameterized;
use crate::autodiff::{Activation, NodeId, Params, Shape, Tape};
use crate::error::{Error, Result};
use crate::numeric::{dot_raw, mat_t_vec_raw, mat_vec_raw, Matrix, RngStream, Vector};

/// Output weights of the last ICNN layer. Learned weights are kept
/// nonnegative by [`Icnn::project_constraints`].
#[derive(Debug, Clone, PartialEq)]
pub enum OutputWeights {
    FixedOnes,
    Learned(Vector),
}

impl OutputWeights {
    fn value(&self, i: usize) -> f64 {
        match self {
            OutputWeights::FixedOnes => 1.0,
            OutputWeights::Learned(w) => w[i],
        }
    }

    fn check_len(&self, h: usize) -> Result<()> {
        match self {
            OutputWeights::Learned(w) if w.len() != h => Err(Error::dims("output weights", h, w.len())),
            _ => Ok(()),
        }
    }
}

/// `f(x) = wᵀ g(W0 x + b0) + aᵀx + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Icnn1 {
    pub w0: Matrix,
    pub b0: Vector,
    pub w: OutputWeights,
    pub a: Vector,
    pub c: f64,
    pub act: Activation,
}

/// `f(x) = wᵀ g(Wz g(W0 x + b0) + Wx x + b1) + aᵀx + c` with `Wz, w ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Icnn2 {
    pub w0: Matrix,
    pub b0: Vector,
    pub wz: Matrix,
    pub wx: Matrix,
    pub b1: Vector,
    pub w: OutputWeights,
    pub a: Vector,
    pub c: f64,
    pub act: Activation,
}

/// Input-convex network; its input gradient is the modelled field.
#[derive(Debug, Clone, PartialEq)]
pub enum Icnn {
    One(Icnn1),
    Two(Icnn2),
}

impl Icnn1 {
    pub fn new(w0: Matrix, b0: Vector, w: OutputWeights, a: Vector, c: f64, act: Activation) -> Result<Self> {
        if b0.len() != w0.rows() {
            return Err(Error::dims("Icnn1 b0", w0.rows(), b0.len()));
        }
        if a.len() != w0.cols() {
            return Err(Error::dims("Icnn1 a", w0.cols(), a.len()));
        }
        w.check_len(w0.rows())?;
        Ok(Icnn1 { w0, b0, w, a, c, act })
    }

    pub fn init(input_dim: usize, hidden: usize, learn_output: bool, rng: &mut RngStream) -> Self {
        let w0 = init_weight(hidden, input_dim, rng);
        let w = if learn_output {
            OutputWeights::Learned(Vector::from_raw(init_nonnegative(1, hidden, hidden, rng).data().to_vec()))
        } else {
            OutputWeights::FixedOnes
        };
        Icnn1 {
            w0,
            b0: init_bias(hidden),
            w,
            a: init_bias(input_dim),
            c: 0.0,
            act: Activation::softplus(),
        }
    }
}

impl Icnn2 {
    pub fn init(input_dim: usize, h1: usize, h2: usize, learn_output: bool, rng: &mut RngStream) -> Self {
        let w0 = init_weight(h1, input_dim, rng);
        let wz = init_nonnegative(h2, h1, h1 + input_dim, rng);
        let wx = init_weight(h2, input_dim, rng);
        let w = if learn_output {
            OutputWeights::Learned(Vector::from_raw(init_nonnegative(1, h2, h2, rng).data().to_vec()))
        } else {
            OutputWeights::FixedOnes
        };
        Icnn2 {
            w0,
            b0: init_bias(h1),
            wz,
            wx,
            b1: init_bias(h2),
            w,
            a: init_bias(input_dim),
            c: 0.0,
            act: Activation::softplus(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (h1, n) = (self.w0.rows(), self.w0.cols());
        let h2 = self.wz.rows();
        if self.b0.len() != h1 {
            return Err(Error::dims("Icnn2 b0", h1, self.b0.len()));
        }
        if self.wz.cols() != h1 {
            return Err(Error::dims("Icnn2 Wz cols", h1, self.wz.cols()));
        }
        if self.wx.rows() != h2 || self.wx.cols() != n {
            return Err(Error::invalid(format!(
                "Icnn2 Wx must be {h2}x{n}, got {}x{}",
                self.wx.rows(),
                self.wx.cols()
            )));
        }
        if self.b1.len() != h2 {
            return Err(Error::dims("Icnn2 b1", h2, self.b1.len()));
        }
        if self.a.len() != n {
            return Err(Error::dims("Icnn2 a", n, self.a.len()));
        }
        self.w.check_len(h2)
    }

    fn hidden(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (h1, n) = (self.w0.rows(), self.w0.cols());
        let h2 = self.wz.rows();
        let mut u0 = mat_vec_raw(self.w0.data(), h1, n, x);
        add_into(&mut u0, &self.b0);
        let z1: Vec<f64> = u0.iter().map(|&v| self.act.value(v)).collect();
        let mut u1 = mat_vec_raw(self.wz.data(), h2, h1, &z1);
        add_into(&mut u1, &mat_vec_raw(self.wx.data(), h2, n, x));
        add_into(&mut u1, &self.b1);
        (u0, u1)
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

impl Icnn {
    pub fn input_dim(&self) -> usize {
        match self {
            Icnn::One(m) => m.w0.cols(),
            Icnn::Two(m) => m.w0.cols(),
        }
    }

    pub fn activation(&self) -> Activation {
        match self {
            Icnn::One(m) => m.act,
            Icnn::Two(m) => m.act,
        }
    }

    fn check_input(&self, op: &'static str, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::dims(op, self.input_dim(), x.len()));
        }
        Ok(())
    }

    /// The convex potential `f(x)`.
    pub fn potential(&self, x: &[f64]) -> Result<f64> {
        self.check_input("icnn_potential", x)?;
        Ok(match self {
            Icnn::One(m) => {
                let mut u = mat_vec_raw(m.w0.data(), m.w0.rows(), m.w0.cols(), x);
                add_into(&mut u, &m.b0);
                let hidden: f64 = u.iter().enumerate().map(|(i, &v)| m.w.value(i) * m.act.value(v)).sum();
                hidden + dot_raw(&m.a, x) + m.c
            }
            Icnn::Two(m) => {
                let (_, u1) = m.hidden(x);
                let hidden: f64 = u1.iter().enumerate().map(|(i, &v)| m.w.value(i) * m.act.value(v)).sum();
                hidden + dot_raw(&m.a, x) + m.c
            }
        })
    }

    /// `∇f(x)`, in closed form.
    pub fn grad_map(&self, x: &[f64]) -> Result<Vector> {
        self.check_input("icnn_grad_map", x)?;
        let out = match self {
            Icnn::One(m) => {
                let (h, n) = (m.w0.rows(), m.w0.cols());
                let mut u = mat_vec_raw(m.w0.data(), h, n, x);
                add_into(&mut u, &m.b0);
                let q: Vec<f64> = u.iter().enumerate().map(|(i, &v)| m.w.value(i) * m.act.d1(v)).collect();
                let mut g = mat_t_vec_raw(m.w0.data(), h, n, &q);
                add_into(&mut g, &m.a);
                g
            }
            Icnn::Two(m) => {
                let (h1, n) = (m.w0.rows(), m.w0.cols());
                let h2 = m.wz.rows();
                let (u0, u1) = m.hidden(x);
                let q1: Vec<f64> = u1.iter().enumerate().map(|(i, &v)| m.w.value(i) * m.act.d1(v)).collect();
                let back = mat_t_vec_raw(m.wz.data(), h2, h1, &q1);
                let q0: Vec<f64> = u0.iter().zip(&back).map(|(&v, b)| m.act.d1(v) * b).collect();
                let mut g = mat_t_vec_raw(m.w0.data(), h1, n, &q0);
                add_into(&mut g, &mat_t_vec_raw(m.wx.data(), h2, n, &q1));
                add_into(&mut g, &m.a);
                g
            }
        };
        Ok(Vector::from_raw(out))
    }

    /// Records `∇f(x)` on `tape` using the registered [`params`](Parameterized::params).
    pub fn record_grad_map(&self, tape: &mut Tape, leaves: &[NodeId], x: &[f64]) -> Result<NodeId> {
        self.check_input("icnn_grad_map", x)?;
        let xc = tape.constant(x.to_vec());
        match self {
            Icnn::One(m) => {
                let (w0, b0) = (leaves[0], leaves[1]);
                let lin = tape.mat_vec(w0, xc)?;
                let u = tape.add(lin, b0)?;
                let d = tape.activation(u, m.act, 1)?;
                let (q, a) = match m.w {
                    OutputWeights::FixedOnes => (d, leaves[2]),
                    OutputWeights::Learned(_) => (tape.hadamard(leaves[2], d)?, leaves[3]),
                };
                let back = tape.mat_t_vec(w0, q)?;
                tape.add(back, a)
            }
            Icnn::Two(m) => {
                let (w0, b0, wz, wx, b1) = (leaves[0], leaves[1], leaves[2], leaves[3], leaves[4]);
                let lin0 = tape.mat_vec(w0, xc)?;
                let u0 = tape.add(lin0, b0)?;
                let z1 = tape.activation(u0, m.act, 0)?;
                let zpart = tape.mat_vec(wz, z1)?;
                let xpart = tape.mat_vec(wx, xc)?;
                let lin1 = tape.add(zpart, xpart)?;
                let u1 = tape.add(lin1, b1)?;
                let d1 = tape.activation(u1, m.act, 1)?;
                let (q1, a) = match m.w {
                    OutputWeights::FixedOnes => (d1, leaves[5]),
                    OutputWeights::Learned(_) => (tape.hadamard(leaves[5], d1)?, leaves[6]),
                };
                let back = tape.mat_t_vec(wz, q1)?;
                let d0 = tape.activation(u0, m.act, 1)?;
                let q0 = tape.hadamard(d0, back)?;
                let g0 = tape.mat_t_vec(w0, q0)?;
                let gx = tape.mat_t_vec(wx, q1)?;
                let g = tape.add(g0, gx)?;
                tape.add(g, a)
            }
        }
    }

    /// Clamps the constrained weights (`Wz`, learned `w`) at zero.
    pub fn project_constraints(&mut self) {
        fn clamp(v: &mut [f64]) {
            for x in v {
                *x = x.max(0.0);
            }
        }
        match self {
            Icnn::One(m) => {
                if let OutputWeights::Learned(w) = &mut m.w {
                    clamp(w.as_mut_slice());
                }
            }
            Icnn::Two(m) => {
                clamp(m.wz.data_mut());
                if let OutputWeights::Learned(w) = &mut m.w {
                    clamp(w.as_mut_slice());
                }
            }
        }
    }

    /// Smallest entry among the constrained weights, if any.
    pub fn min_constrained_weight(&self) -> Option<f64> {
        let learned = |w: &OutputWeights| match w {
            OutputWeights::Learned(v) => v.iter().copied().fold(f64::INFINITY, f64::min),
            OutputWeights::FixedOnes => f64::INFINITY,
        };
        let m = match self {
            Icnn::One(m) => learned(&m.w),
            Icnn::Two(m) => m.wz.data().iter().copied().fold(learned(&m.w), f64::min),
        };
        m.is_finite().then_some(m)
    }
}

impl Parameterized for Icnn {
    fn params(&self) -> Params {
        let mut p = Params::new();
        let mat = |p: &mut Params, name: &str, m: &Matrix| {
            p.push(name, Shape::Matrix(m.rows(), m.cols()), m.data().to_vec())
        };
        let vec = |p: &mut Params, name: &str, v: &Vector| p.push(name, Shape::Vector(v.len()), v.to_vec());
        match self {
            Icnn::One(m) => {
                mat(&mut p, "W0", &m.w0);
                vec(&mut p, "b0", &m.b0);
                if let OutputWeights::Learned(w) = &m.w {
                    vec(&mut p, "w", w);
                }
                vec(&mut p, "a", &m.a);
                p.push("c", Shape::Vector(1), vec![m.c]);
            }
            Icnn::Two(m) => {
                mat(&mut p, "W0", &m.w0);
                vec(&mut p, "b0", &m.b0);
                mat(&mut p, "Wz", &m.wz);
                mat(&mut p, "Wx", &m.wx);
                vec(&mut p, "b1", &m.b1);
                if let OutputWeights::Learned(w) = &m.w {
                    vec(&mut p, "w", w);
                }
                vec(&mut p, "a", &m.a);
                p.push("c", Shape::Vector(1), vec![m.c]);
            }
        }
        p
    }

    fn set_params(&mut self, params: &Params) -> Result<()> {
        fn copy(dst: &mut [f64], params: &Params, name: &str) -> Result<()> {
            let src = params.value(name)?;
            if src.len() != dst.len() {
                return Err(Error::invalid(format!(
                    "parameter `{name}`: expected {} values, got {}",
                    dst.len(),
                    src.len()
                )));
            }
            dst.copy_from_slice(src);
            Ok(())
        }
        match self {
            Icnn::One(m) => {
                copy(m.w0.data_mut(), params, "W0")?;
                copy(m.b0.as_mut_slice(), params, "b0")?;
                if let OutputWeights::Learned(w) = &mut m.w {
                    copy(w.as_mut_slice(), params, "w")?;
                }
                copy(m.a.as_mut_slice(), params, "a")?;
                m.c = params.value("c")?[0];
            }
            Icnn::Two(m) => {
                copy(m.w0.data_mut(), params, "W0")?;
                copy(m.b0.as_mut_slice(), params, "b0")?;
                copy(m.wz.data_mut(), params, "Wz")?;
                copy(m.wx.data_mut(), params, "Wx")?;
                copy(m.b1.as_mut_slice(), params, "b1")?;
                if let OutputWeights::Learned(w) = &mut m.w {
                    copy(w.as_mut_slice(), params, "w")?;
                }
                copy(m.a.as_mut_slice(), params, "a")?;
                m.c = params.value("c")?[0];
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{dot, max_abs_diff};

    fn tiny() -> Icnn {
        Icnn::One(
            Icnn1::new(
                Matrix::from_rows(&[&[1.0, 0.0]]).unwrap(),
                Vector::zeros(1),
                OutputWeights::FixedOnes,
                Vector::zeros(2),
                0.0,
                Activation::softplus(),
            )
            .unwrap(),
        )
    }

    fn random_icnns(rng: &mut RngStream) -> Vec<Icnn> {
        let perturb = |v: &mut [f64], rng: &mut RngStream| {
            for x in v {
                *x += rng.uniform(-0.5, 0.5).unwrap();
            }
        };
        let mut one = Icnn1::init(2, 6, true, rng);
        perturb(one.b0.as_mut_slice(), rng);
        perturb(one.a.as_mut_slice(), rng);
        let mut two = Icnn2::init(2, 5, 4, true, rng);
        perturb(two.b0.as_mut_slice(), rng);
        perturb(two.b1.as_mut_slice(), rng);
        vec![Icnn::One(one), Icnn::One(Icnn1::init(2, 7, false, rng)), Icnn::Two(two)]
    }

    fn rand_point(rng: &mut RngStream) -> Vec<f64> {
        vec![rng.uniform(-2.0, 2.0).unwrap(), rng.uniform(-2.0, 2.0).unwrap()]
    }

    #[test]
    fn potential_examples() {
        let f = tiny();
        assert!((f.potential(&[0.0, 0.0]).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(f.potential(&[0.0]).is_err());

        let affine = Icnn::One(
            Icnn1::new(
                Matrix::zeros(3, 2),
                Vector::new(vec![0.2, -0.1, 0.0]).unwrap(),
                OutputWeights::FixedOnes,
                Vector::ones(2),
                0.7,
                Activation::softplus(),
            )
            .unwrap(),
        );
        let sp = Activation::softplus();
        let constant = sp.value(0.2) + sp.value(-0.1) + sp.value(0.0) + 0.7;
        let x = [0.3, -1.2];
        assert!((affine.potential(&x).unwrap() - (x[0] + x[1] + constant)).abs() < 1e-14);
    }

    #[test]
    fn grad_map_examples() {
        assert_eq!(tiny().grad_map(&[0.0, 0.0]).unwrap().as_slice(), &[0.5, 0.0]);
    }

    #[test]
    fn convexity_midpoint() {
        let mut rng = RngStream::new(31);
        for f in random_icnns(&mut rng) {
            for _ in 0..1000 {
                let (x, y) = (rand_point(&mut rng), rand_point(&mut rng));
                let mid = [(x[0] + y[0]) / 2.0, (x[1] + y[1]) / 2.0];
                let lhs = f.potential(&mid).unwrap();
                let rhs = (f.potential(&x).unwrap() + f.potential(&y).unwrap()) / 2.0;
                assert!(lhs <= rhs + 1e-12);
            }
        }
    }

    #[test]
    fn grad_map_matches_fd_of_potential() {
        let mut rng = RngStream::new(32);
        let h = 1e-5;
        for f in random_icnns(&mut rng) {
            for _ in 0..50 {
                let x = rand_point(&mut rng);
                let g = f.grad_map(&x).unwrap();
                for i in 0..2 {
                    let (mut xp, mut xm) = (x.clone(), x.clone());
                    xp[i] += h;
                    xm[i] -= h;
                    let fd = (f.potential(&xp).unwrap() - f.potential(&xm).unwrap()) / (2.0 * h);
                    assert!((g[i] - fd).abs() <= 1e-7 * fd.abs().max(1.0), "{} vs {fd}", g[i]);
                }
            }
        }
    }

    #[test]
    fn grad_map_is_monotone() {
        let mut rng = RngStream::new(33);
        for f in random_icnns(&mut rng) {
            for _ in 0..500 {
                let (x, y) = (rand_point(&mut rng), rand_point(&mut rng));
                let (gx, gy) = (f.grad_map(&x).unwrap(), f.grad_map(&y).unwrap());
                let diff_g: Vec<f64> = gx.iter().zip(gy.iter()).map(|(a, b)| a - b).collect();
                let diff_x = [x[0] - y[0], x[1] - y[1]];
                assert!(dot(&diff_g, &diff_x).unwrap() >= -1e-12);
            }
        }
    }

    #[test]
    fn tape_grad_map_matches_direct() {
        let mut rng = RngStream::new(34);
        for f in random_icnns(&mut rng) {
            let x = rand_point(&mut rng);
            let mut tape = Tape::new();
            let leaves = f.params().register(&mut tape);
            let node = f.record_grad_map(&mut tape, &leaves, &x).unwrap();
            assert!(max_abs_diff(tape.value(node), &f.grad_map(&x).unwrap()) < 1e-14);
        }
    }

    #[test]
    fn projection() {
        let mut rng = RngStream::new(35);
        let mut f = Icnn::Two(Icnn2::init(2, 3, 3, true, &mut rng));
        if let Icnn::Two(m) = &mut f {
            m.wz.set(0, 1, -0.3);
        }
        let before = f.clone();
        f.project_constraints();
        let Icnn::Two(m) = &f else { unreachable!() };
        assert_eq!(m.wz.get(0, 1), 0.0);
        let Icnn::Two(b) = &before else { unreachable!() };
        assert_eq!(m.w0, b.w0);
        assert!(f.min_constrained_weight().unwrap() >= 0.0);
        let once = f.clone();
        f.project_constraints();
        assert_eq!(f, once);

        let mut clean = Icnn::Two(Icnn2::init(2, 3, 3, true, &mut rng));
        let snapshot = clean.clone();
        clean.project_constraints();
        assert_eq!(clean, snapshot);
    }

    #[test]
    fn parameter_counts() {
        let mut rng = RngStream::new(0);
        assert_eq!(Icnn::One(Icnn1::init(2, 25, false, &mut rng)).param_count(), 78);
        assert_eq!(Icnn::One(Icnn1::init(2, 25, true, &mut rng)).param_count(), 103);
    }
}
