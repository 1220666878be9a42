use super::Activation;
use crate::error::{Error, Result};
use crate::numeric::{dot_raw, mat_t_vec_raw, mat_vec_raw};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Vector(usize),
    /// Row-major `rows × cols`.
    Matrix(usize, usize),
}

impl Shape {
    pub fn len(self) -> usize {
        match self {
            Shape::Vector(n) => n,
            Shape::Matrix(r, c) => r * c,
        }
    }

    pub fn is_empty(self) -> bool {
        self.len() == 0
    }

    fn describe(self) -> String {
        match self {
            Shape::Vector(n) => format!("vector({n})"),
            Shape::Matrix(r, c) => format!("matrix({r}x{c})"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Leaf,
    MatVec(NodeId, NodeId),
    MatTVec(NodeId, NodeId),
    Hadamard(NodeId, NodeId),
    Add(NodeId, NodeId),
    Scale(NodeId, f64),
    Dot(NodeId, NodeId),
    SumSq(NodeId),
    /// `order` 0 records `σ`, order 1 records `σ′`.
    Act(NodeId, Activation, u8),
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    shape: Shape,
    value: Vec<f64>,
}

/// Define-by-run record of primitive evaluations.
///
/// Every node's inputs precede it, so a single reverse pass over the node
/// list is a valid backward schedule.
#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar root with respect to every node on the tape.
#[derive(Debug, Clone)]
pub struct Adjoints {
    grads: Vec<Vec<f64>>,
}

impl Adjoints {
    pub fn wrt(&self, id: NodeId) -> &[f64] {
        &self.grads[id.0]
    }

    /// Concatenated gradients of `ids`, in order.
    pub fn flatten(&self, ids: &[NodeId]) -> Vec<f64> {
        ids.iter()
            .flat_map(|id| self.grads[id.0].iter().copied())
            .collect()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id.0].value
    }

    pub fn shape(&self, id: NodeId) -> Shape {
        self.nodes[id.0].shape
    }

    /// Scalar value of a one-element node.
    pub fn scalar(&self, id: NodeId) -> f64 {
        self.nodes[id.0].value[0]
    }

    fn push(&mut self, op: Op, shape: Shape, value: Vec<f64>) -> NodeId {
        debug_assert_eq!(shape.len(), value.len());
        self.nodes.push(Node { op, shape, value });
        NodeId(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, shape: Shape, value: Vec<f64>) -> Result<NodeId> {
        if shape.len() != value.len() {
            return Err(Error::dims("Tape::leaf", shape.len(), value.len()));
        }
        Ok(self.push(Op::Leaf, shape, value))
    }

    /// A vector input. Constants are leaves whose gradients nobody reads.
    pub fn constant(&mut self, value: Vec<f64>) -> NodeId {
        let n = value.len();
        self.push(Op::Leaf, Shape::Vector(n), value)
    }

    fn vector_len(&self, id: NodeId, op: &str) -> Result<usize> {
        match self.shape(id) {
            Shape::Vector(n) => Ok(n),
            s => Err(Error::invalid(format!(
                "{op}: expected a vector input, got {}",
                s.describe()
            ))),
        }
    }

    fn matrix_dims(&self, id: NodeId, op: &str) -> Result<(usize, usize)> {
        match self.shape(id) {
            Shape::Matrix(r, c) => Ok((r, c)),
            s => Err(Error::invalid(format!(
                "{op}: expected a matrix input, got {}",
                s.describe()
            ))),
        }
    }

    pub fn mat_vec(&mut self, m: NodeId, v: NodeId) -> Result<NodeId> {
        let (r, c) = self.matrix_dims(m, "mat_vec")?;
        let n = self.vector_len(v, "mat_vec")?;
        if n != c {
            return Err(Error::dims("mat_vec", c, n));
        }
        let value = mat_vec_raw(self.value(m), r, c, self.value(v));
        Ok(self.push(Op::MatVec(m, v), Shape::Vector(r), value))
    }

    pub fn mat_t_vec(&mut self, m: NodeId, u: NodeId) -> Result<NodeId> {
        let (r, c) = self.matrix_dims(m, "mat_t_vec")?;
        let n = self.vector_len(u, "mat_t_vec")?;
        if n != r {
            return Err(Error::dims("mat_t_vec", r, n));
        }
        let value = mat_t_vec_raw(self.value(m), r, c, self.value(u));
        Ok(self.push(Op::MatTVec(m, u), Shape::Vector(c), value))
    }

    fn same_shape(&self, a: NodeId, b: NodeId, op: &'static str) -> Result<Shape> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Error::invalid(format!(
                "{op}: shape mismatch {} vs {}",
                sa.describe(),
                sb.describe()
            )));
        }
        Ok(sa)
    }

    pub fn hadamard(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let shape = self.same_shape(a, b, "hadamard")?;
        let value = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x * y)
            .collect();
        Ok(self.push(Op::Hadamard(a, b), shape, value))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let shape = self.same_shape(a, b, "add")?;
        let value = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x + y)
            .collect();
        Ok(self.push(Op::Add(a, b), shape, value))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let shape = self.shape(a);
        let value = self.value(a).iter().map(|x| c * x).collect();
        self.push(Op::Scale(a, c), shape, value)
    }

    pub fn dot(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.vector_len(a, "dot")?;
        self.same_shape(a, b, "dot")?;
        let value = vec![dot_raw(self.value(a), self.value(b))];
        Ok(self.push(Op::Dot(a, b), Shape::Vector(1), value))
    }

    pub fn sum_sq(&mut self, a: NodeId) -> NodeId {
        let value = vec![self.value(a).iter().map(|x| x * x).sum()];
        self.push(Op::SumSq(a), Shape::Vector(1), value)
    }

    /// Records `σ(a)` (order 0) or `σ′(a)` (order 1) elementwise.
    pub fn activation(&mut self, a: NodeId, act: Activation, order: u8) -> Result<NodeId> {
        let f: fn(&Activation, f64) -> f64 = match order {
            0 => Activation::value,
            1 => {
                if !act.has_d2() {
                    return Err(Error::invalid(format!(
                        "activation `{}` has no second derivative; cannot record its derivative",
                        act.name()
                    )));
                }
                Activation::d1
            }
            k => {
                return Err(Error::invalid(format!(
                    "activation order {k} unsupported (0 or 1)"
                )))
            }
        };
        let shape = self.shape(a);
        let value = self.value(a).iter().map(|&x| f(&act, x)).collect();
        Ok(self.push(Op::Act(a, act, order), shape, value))
    }

    /// Reverse sweep from a scalar root.
    pub fn backward(&self, root: NodeId) -> Result<Adjoints> {
        if self.nodes[root.0].value.len() != 1 {
            return Err(Error::invalid(format!(
                "backward requires a scalar root, got {}",
                self.shape(root).describe()
            )));
        }
        let mut grads: Vec<Vec<f64>> = self
            .nodes
            .iter()
            .map(|n| vec![0.0; n.value.len()])
            .collect();
        grads[root.0][0] = 1.0;

        for i in (0..=root.0).rev() {
            let node = &self.nodes[i];
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let g = std::mem::take(&mut grads[i]);
            if g.iter().all(|&x| x == 0.0) {
                grads[i] = g;
                continue;
            }
            match node.op {
                Op::Leaf => unreachable!(),
                Op::MatVec(m, v) => {
                    let Shape::Matrix(r, c) = self.shape(m) else { unreachable!() };
                    let mv = self.value(m);
                    let vv = self.value(v);
                    let gm = &mut grads[m.0];
                    for row in 0..r {
                        for col in 0..c {
                            gm[row * c + col] += g[row] * vv[col];
                        }
                    }
                    let back = mat_t_vec_raw(mv, r, c, &g);
                    accumulate(&mut grads[v.0], &back, 1.0);
                }
                Op::MatTVec(m, u) => {
                    let Shape::Matrix(r, c) = self.shape(m) else { unreachable!() };
                    let mv = self.value(m);
                    let uv = self.value(u);
                    let gm = &mut grads[m.0];
                    for row in 0..r {
                        for col in 0..c {
                            gm[row * c + col] += uv[row] * g[col];
                        }
                    }
                    let back = mat_vec_raw(mv, r, c, &g);
                    accumulate(&mut grads[u.0], &back, 1.0);
                }
                Op::Hadamard(a, b) => {
                    let (va, vb) = (self.value(a), self.value(b));
                    for k in 0..g.len() {
                        grads[a.0][k] += g[k] * vb[k];
                    }
                    for k in 0..g.len() {
                        grads[b.0][k] += g[k] * va[k];
                    }
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads[a.0], &g, 1.0);
                    accumulate(&mut grads[b.0], &g, 1.0);
                }
                Op::Scale(a, c) => accumulate(&mut grads[a.0], &g, c),
                Op::Dot(a, b) => {
                    let (va, vb) = (self.value(a), self.value(b));
                    accumulate(&mut grads[a.0], vb, g[0]);
                    accumulate(&mut grads[b.0], va, g[0]);
                }
                Op::SumSq(a) => accumulate(&mut grads[a.0], self.value(a), 2.0 * g[0]),
                Op::Act(a, act, order) => {
                    let va = self.value(a);
                    let ga = &mut grads[a.0];
                    for k in 0..g.len() {
                        let d = if order == 0 {
                            act.d1(va[k])
                        } else {
                            act.d2_unchecked(va[k])
                        };
                        ga[k] += g[k] * d;
                    }
                }
            }
            grads[i] = g;
        }
        Ok(Adjoints { grads })
    }
}

fn accumulate(dst: &mut [f64], src: &[f64], c: f64) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += c * s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::RngStream;

    fn rand_vec(rng: &mut RngStream, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.uniform(-1.0, 1.0).unwrap()).collect()
    }

    #[test]
    fn activation_examples() {
        let mut t = Tape::new();
        let x = t.constant(vec![0.0]);
        let y0 = t.activation(x, Activation::tanh(), 0).unwrap();
        assert_eq!(t.value(y0), &[0.0]);
        let y1 = t.activation(x, Activation::tanh(), 1).unwrap();
        assert_eq!(t.value(y1), &[1.0]);
        let adj = t.backward(y1).unwrap();
        assert_eq!(adj.wrt(x), &[0.0]);
    }

    #[test]
    fn dot_gradient_is_other_argument() {
        let mut t = Tape::new();
        let x = t.constant(vec![1.0, 2.0, 3.0]);
        let y = t.constant(vec![-1.0, 0.5, 4.0]);
        let d = t.dot(x, y).unwrap();
        let adj = t.backward(d).unwrap();
        assert_eq!(adj.wrt(x), &[-1.0, 0.5, 4.0]);
        assert_eq!(adj.wrt(y), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn sum_of_squares_gradient() {
        let mut t = Tape::new();
        let x = t.constant(vec![1.0, 2.0]);
        let s = t.sum_sq(x);
        assert_eq!(t.backward(s).unwrap().wrt(x), &[2.0, 4.0]);
    }

    #[test]
    fn non_ancestor_gets_zero() {
        let mut t = Tape::new();
        let x = t.constant(vec![1.0, 2.0]);
        let unused = t.constant(vec![3.0]);
        let s = t.sum_sq(x);
        assert_eq!(t.backward(s).unwrap().wrt(unused), &[0.0]);
    }

    #[test]
    fn errors() {
        let mut t = Tape::new();
        let x = t.constant(vec![1.0, 2.0]);
        assert!(t.backward(x).is_err());
        let m = t.leaf(Shape::Matrix(3, 3), vec![0.0; 9]).unwrap();
        assert!(t.mat_vec(m, x).is_err());
        assert!(t.mat_vec(x, x).is_err());
        let y = t.constant(vec![1.0]);
        assert!(t.add(x, y).is_err());
        assert!(t.leaf(Shape::Vector(2), vec![1.0]).is_err());
        let no_d2 = Activation::custom("cube", |x| x * x * x, |x| 3.0 * x * x, None);
        assert!(t.activation(x, no_d2, 0).is_ok());
        assert!(t.activation(x, no_d2, 1).is_err());
        assert!(t.activation(x, Activation::tanh(), 2).is_err());
    }

    // For linear primitives, the backward rule must be the exact adjoint of
    // the forward Jacobian: ⟨u, J v⟩ = ⟨Jᵀ u, v⟩.
    #[test]
    fn adjoint_rules_pass_dot_product_test() {
        let mut rng = RngStream::new(11);
        let (r, c) = (4, 3);
        for trial in 0..6 {
            let mdata = rand_vec(&mut rng, r * c);
            let x = rand_vec(&mut rng, c);
            let y = rand_vec(&mut rng, r);
            // forward directional derivative along random perturbation,
            // computed by linearity for each kind
            let dm = rand_vec(&mut rng, r * c);
            let dx = rand_vec(&mut rng, c);
            let dy = rand_vec(&mut rng, r);
            let mut t = Tape::new();
            let m = t.leaf(Shape::Matrix(r, c), mdata.clone()).unwrap();
            let xv = t.constant(x.clone());
            let yv = t.constant(y.clone());
            let (out, jv) = match trial {
                0 => {
                    let o = t.mat_vec(m, xv).unwrap();
                    let mut jv = mat_vec_raw(&dm, r, c, &x);
                    accumulate(&mut jv, &mat_vec_raw(&mdata, r, c, &dx), 1.0);
                    (o, jv)
                }
                1 => {
                    let o = t.mat_t_vec(m, yv).unwrap();
                    let mut jv = mat_t_vec_raw(&dm, r, c, &y);
                    accumulate(&mut jv, &mat_t_vec_raw(&mdata, r, c, &dy), 1.0);
                    (o, jv)
                }
                2 => {
                    let o = t.hadamard(yv, yv).unwrap();
                    let jv = (0..r).map(|k| 2.0 * y[k] * dy[k]).collect();
                    (o, jv)
                }
                3 => {
                    let o = t.add(yv, yv).unwrap();
                    (o, dy.iter().map(|v| 2.0 * v).collect())
                }
                4 => {
                    let o = t.scale(yv, -1.5);
                    (o, dy.iter().map(|v| -1.5 * v).collect())
                }
                _ => {
                    let o = t.dot(yv, yv).unwrap();
                    (o, vec![2.0 * dot_raw(&y, &dy)])
                }
            };
            let seed = rand_vec(&mut rng, jv.len());
            let s = t.constant(seed.clone());
            let root = t.dot(out, s).unwrap();
            let adj = t.backward(root).unwrap();
            let lhs = dot_raw(&seed, &jv);
            let rhs = dot_raw(adj.wrt(m), &dm) + dot_raw(adj.wrt(xv), &dx) + dot_raw(adj.wrt(yv), &dy);
            assert!(
                (lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0),
                "trial {trial}: {lhs} vs {rhs}"
            );
        }
    }
}
