//! Eager reverse-mode autodiff on a flat tape.
//!
//! Every operation computes its value immediately and records a node; a tape
//! therefore lists nodes in topological order and `backward` is a single
//! reverse sweep. Tapes are built fresh for each loss evaluation and dropped
//! afterwards. `Var` handles are only valid on the tape that created them.

use crate::diffcore::tensor::{matmul, matmul_nt, matmul_tn, Tensor};
use crate::error::{GacError, Result};

/// Clamp floor used by `sqrt_clamped`, keeping the square root differentiable
/// at zero. MMD estimates are clamped here before the outer root.
pub const EPS_MMD: f64 = 1e-12;

/// Handle to a node on a `Tape`.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    BiasAdd(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Min(Var, Var),
    Relu(Var),
    Tanh(Var),
    Square(Var),
    Exp(Var),
    Ln(Var),
    SqrtClamped(Var),
    Sum(Var),
    Mean(Var),
    ConcatCols(Var, Var),
    SliceRows { input: Var, start: usize },
    ScalarMul(Var, f64),
    ScalarAdd(Var),
    PairwiseSqDist(Var, Var),
}

struct Node {
    op: Op,
    value: Tensor,
    requires_grad: bool,
}

/// Gradients of a scalar output with respect to every tape node, indexed by
/// `Var`. Nodes off the path to the output have no entry.
pub struct Gradients {
    adj: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.adj[v.0].as_ref()
    }

    /// Gradient for `v`, or zeros of the given shape if `v` never influenced
    /// the output.
    pub fn get_or_zeros(&self, v: Var, shape: &[usize]) -> Tensor {
        match self.adj[v.0].as_ref() {
            Some(t) => t.clone(),
            None => Tensor::zeros(shape),
        }
    }
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn shape_err(op: &'static str, detail: String) -> GacError {
    GacError::ShapeMismatch { op, detail }
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records a leaf that does not receive gradients.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(Op::Leaf, value, false)
    }

    /// Records a leaf that receives gradients (a trainable parameter).
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(Op::Leaf, value, true)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, op: Op, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node { op, value, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn push_unary(&mut self, op: Op, input: Var, value: Tensor) -> Var {
        let rg = self.nodes[input.0].requires_grad;
        self.push(op, value, rg)
    }

    fn push_binary(&mut self, op: Op, a: Var, b: Var, value: Tensor) -> Var {
        let rg = self.nodes[a.0].requires_grad || self.nodes[b.0].requires_grad;
        self.push(op, value, rg)
    }

    fn require_rank2(&self, op: &'static str, v: Var) -> Result<(usize, usize)> {
        let s = self.value(v).shape();
        if s.len() != 2 {
            return Err(shape_err(op, format!("expected a matrix, got shape {s:?}")));
        }
        Ok((s[0], s[1]))
    }

    fn require_same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(shape_err(op, format!("operand shapes {sa:?} and {sb:?} differ")));
        }
        Ok(())
    }

    /// Matrix product `[m,k] x [k,n] -> [m,n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (_, ka) = self.require_rank2("matmul", a)?;
        let (kb, _) = self.require_rank2("matmul", b)?;
        if ka != kb {
            return Err(shape_err(
                "matmul",
                format!("inner dimensions {ka} and {kb} differ"),
            ));
        }
        let value = matmul(self.value(a), self.value(b));
        Ok(self.push_binary(Op::MatMul(a, b), a, b, value))
    }

    /// Adds a length-n bias vector to every row of an `[m,n]` matrix.
    pub fn bias_add(&mut self, x: Var, b: Var) -> Result<Var> {
        let (_, n) = self.require_rank2("bias_add", x)?;
        let bs = self.value(b).shape();
        if bs != [n] {
            return Err(shape_err(
                "bias_add",
                format!("bias shape {bs:?} does not match {n} columns"),
            ));
        }
        let xv = self.value(x);
        let bv = self.value(b);
        let mut data = xv.data().to_vec();
        for row in data.chunks_mut(n) {
            for (d, &bb) in row.iter_mut().zip(bv.data()) {
                *d += bb;
            }
        }
        let value = Tensor::new(xv.shape().to_vec(), data)?;
        Ok(self.push_binary(Op::BiasAdd(x, b), x, b, value))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.require_same_shape("add", a, b)?;
        let value = {
            let (av, bv) = (self.value(a), self.value(b));
            let data = av.data().iter().zip(bv.data()).map(|(x, y)| x + y).collect();
            Tensor::new(av.shape().to_vec(), data)?
        };
        Ok(self.push_binary(Op::Add(a, b), a, b, value))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.require_same_shape("mul", a, b)?;
        let value = {
            let (av, bv) = (self.value(a), self.value(b));
            let data = av.data().iter().zip(bv.data()).map(|(x, y)| x * y).collect();
            Tensor::new(av.shape().to_vec(), data)?
        };
        Ok(self.push_binary(Op::Mul(a, b), a, b, value))
    }

    /// Elementwise minimum; on ties the gradient flows to the first input.
    pub fn min(&mut self, a: Var, b: Var) -> Result<Var> {
        self.require_same_shape("min", a, b)?;
        let value = {
            let (av, bv) = (self.value(a), self.value(b));
            let data = av
                .data()
                .iter()
                .zip(bv.data())
                .map(|(&x, &y)| if x <= y { x } else { y })
                .collect();
            Tensor::new(av.shape().to_vec(), data)?
        };
        Ok(self.push_binary(Op::Min(a, b), a, b, value))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let value = self.value(x).map(|v| v.max(0.0));
        Ok(self.push_unary(Op::Relu(x), x, value))
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        let value = self.value(x).map(f64::tanh);
        Ok(self.push_unary(Op::Tanh(x), x, value))
    }

    pub fn square(&mut self, x: Var) -> Result<Var> {
        let value = self.value(x).map(|v| v * v);
        Ok(self.push_unary(Op::Square(x), x, value))
    }

    pub fn exp(&mut self, x: Var) -> Result<Var> {
        let value = self.value(x).map(f64::exp);
        Ok(self.push_unary(Op::Exp(x), x, value))
    }

    /// Natural log; defined for positive inputs.
    pub fn ln(&mut self, x: Var) -> Result<Var> {
        let value = self.value(x).map(f64::ln);
        Ok(self.push_unary(Op::Ln(x), x, value))
    }

    /// `sqrt(max(x, EPS_MMD))` elementwise. The gradient is zero wherever the
    /// clamp is active, so the op stays finite everywhere.
    pub fn sqrt_clamped(&mut self, x: Var) -> Result<Var> {
        let value = self.value(x).map(|v| v.max(EPS_MMD).sqrt());
        Ok(self.push_unary(Op::SqrtClamped(x), x, value))
    }

    /// Sum of all elements, producing a scalar.
    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let value = Tensor::scalar(self.value(x).data().iter().sum());
        Ok(self.push_unary(Op::Sum(x), x, value))
    }

    /// Mean of all elements, producing a scalar.
    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let n = self.value(x).len();
        if n == 0 {
            return Err(GacError::InvalidArgument("mean of an empty tensor".into()));
        }
        let value = Tensor::scalar(self.value(x).data().iter().sum::<f64>() / n as f64);
        Ok(self.push_unary(Op::Mean(x), x, value))
    }

    /// Concatenates two matrices with equal row counts along columns.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ma, na) = self.require_rank2("concat_cols", a)?;
        let (mb, nb) = self.require_rank2("concat_cols", b)?;
        if ma != mb {
            return Err(shape_err(
                "concat_cols",
                format!("row counts {ma} and {mb} differ"),
            ));
        }
        let (av, bv) = (self.value(a), self.value(b));
        let mut data = Vec::with_capacity(ma * (na + nb));
        for i in 0..ma {
            data.extend_from_slice(&av.data()[i * na..(i + 1) * na]);
            data.extend_from_slice(&bv.data()[i * nb..(i + 1) * nb]);
        }
        let value = Tensor::new(vec![ma, na + nb], data)?;
        Ok(self.push_binary(Op::ConcatCols(a, b), a, b, value))
    }

    /// Rows `start..start+rows` of a matrix.
    pub fn slice_rows(&mut self, x: Var, start: usize, rows: usize) -> Result<Var> {
        let (m, n) = self.require_rank2("slice_rows", x)?;
        if start + rows > m {
            return Err(shape_err(
                "slice_rows",
                format!("rows {start}..{} out of bounds for {m} rows", start + rows),
            ));
        }
        let data = self.value(x).data()[start * n..(start + rows) * n].to_vec();
        let value = Tensor::new(vec![rows, n], data)?;
        Ok(self.push_unary(Op::SliceRows { input: x, start }, x, value))
    }

    pub fn scalar_mul(&mut self, x: Var, c: f64) -> Result<Var> {
        let value = self.value(x).map(|v| v * c);
        Ok(self.push_unary(Op::ScalarMul(x, c), x, value))
    }

    pub fn scalar_add(&mut self, x: Var, c: f64) -> Result<Var> {
        let value = self.value(x).map(|v| v + c);
        Ok(self.push_unary(Op::ScalarAdd(x), x, value))
    }

    /// Squared Euclidean distances between all row pairs:
    /// `[m,d] x [n,d] -> [m,n]` with `D[i,j] = ||x_i - y_j||^2`.
    pub fn pairwise_sq_dist(&mut self, x: Var, y: Var) -> Result<Var> {
        let (m, dx) = self.require_rank2("pairwise_sq_dist", x)?;
        let (n, dy) = self.require_rank2("pairwise_sq_dist", y)?;
        if dx != dy {
            return Err(shape_err(
                "pairwise_sq_dist",
                format!("point dimensions {dx} and {dy} differ"),
            ));
        }
        let (xv, yv) = (self.value(x), self.value(y));
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            let xi = &xv.data()[i * dx..(i + 1) * dx];
            let drow = &mut data[i * n..(i + 1) * n];
            for (j, d) in drow.iter_mut().enumerate() {
                let yj = &yv.data()[j * dx..(j + 1) * dx];
                *d = xi.iter().zip(yj).map(|(a, b)| (a - b) * (a - b)).sum();
            }
        }
        let value = Tensor::new(vec![m, n], data)?;
        Ok(self.push_binary(Op::PairwiseSqDist(x, y), x, y, value))
    }

    /// Reverse sweep from a scalar `output`, returning gradients for every
    /// node that influenced it.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        let out_val = self.value(output);
        if out_val.len() != 1 {
            return Err(GacError::NonScalarOutput { shape: out_val.shape().to_vec() });
        }
        let mut adj: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        adj[output.0] = Some(self.value(output).map(|_| 1.0));

        // Node inputs always precede the node, so one reverse pass visits
        // every node after all of its consumers.
        for i in (0..=output.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = adj[i].take() else { continue };
            self.apply_vjp(i, &g, &mut adj);
            adj[i] = Some(g);
        }
        Ok(Gradients { adj })
    }

    fn accum(&self, adj: &mut [Option<Tensor>], v: Var, delta: Tensor) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut adj[v.0] {
            Some(t) => t.add_assign(&delta),
            slot @ None => *slot = Some(delta),
        }
    }

    fn apply_vjp(&self, i: usize, g: &Tensor, adj: &mut [Option<Tensor>]) {
        match self.nodes[i].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(a), self.value(b));
                self.accum(adj, a, matmul_nt(g, bv));
                self.accum(adj, b, matmul_tn(av, g));
            }
            Op::BiasAdd(x, b) => {
                let n = self.value(b).len();
                let mut db = vec![0.0; n];
                for row in g.data().chunks(n) {
                    for (d, &gv) in db.iter_mut().zip(row) {
                        *d += gv;
                    }
                }
                self.accum(adj, x, g.clone());
                self.accum(adj, b, Tensor::vector(db));
            }
            Op::Add(a, b) => {
                self.accum(adj, a, g.clone());
                self.accum(adj, b, g.clone());
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(a), self.value(b));
                let da = zip_map(g, bv, |gv, o| gv * o);
                let db = zip_map(g, av, |gv, o| gv * o);
                self.accum(adj, a, da);
                self.accum(adj, b, db);
            }
            Op::Min(a, b) => {
                let (av, bv) = (self.value(a), self.value(b));
                let pick_a: Vec<bool> =
                    av.data().iter().zip(bv.data()).map(|(&x, &y)| x <= y).collect();
                let da = mask_map(g, &pick_a, true);
                let db = mask_map(g, &pick_a, false);
                self.accum(adj, a, da);
                self.accum(adj, b, db);
            }
            Op::Relu(x) => {
                let y = &self.nodes[i].value;
                let dx = zip_map(g, y, |gv, yv| if yv > 0.0 { gv } else { 0.0 });
                self.accum(adj, x, dx);
            }
            Op::Tanh(x) => {
                let y = &self.nodes[i].value;
                let dx = zip_map(g, y, |gv, yv| gv * (1.0 - yv * yv));
                self.accum(adj, x, dx);
            }
            Op::Square(x) => {
                let xv = self.value(x);
                let dx = zip_map(g, xv, |gv, v| gv * 2.0 * v);
                self.accum(adj, x, dx);
            }
            Op::Exp(x) => {
                let y = &self.nodes[i].value;
                let dx = zip_map(g, y, |gv, yv| gv * yv);
                self.accum(adj, x, dx);
            }
            Op::Ln(x) => {
                let xv = self.value(x);
                let dx = zip_map(g, xv, |gv, v| gv / v);
                self.accum(adj, x, dx);
            }
            Op::SqrtClamped(x) => {
                let xv = self.value(x);
                let y = &self.nodes[i].value;
                let dx_data: Vec<f64> = g
                    .data()
                    .iter()
                    .zip(xv.data().iter().zip(y.data()))
                    .map(|(&gv, (&v, &yv))| if v > EPS_MMD { gv / (2.0 * yv) } else { 0.0 })
                    .collect();
                let dx = Tensor::new(xv.shape().to_vec(), dx_data).expect("shape preserved");
                self.accum(adj, x, dx);
            }
            Op::Sum(x) => {
                let gv = g.item();
                let dx = self.value(x).map(|_| gv);
                self.accum(adj, x, dx);
            }
            Op::Mean(x) => {
                let xv = self.value(x);
                let gv = g.item() / xv.len() as f64;
                let dx = xv.map(|_| gv);
                self.accum(adj, x, dx);
            }
            Op::ConcatCols(a, b) => {
                let (m, na) = self.value(a).dims2();
                let (_, nb) = self.value(b).dims2();
                let mut da = vec![0.0; m * na];
                let mut db = vec![0.0; m * nb];
                for i in 0..m {
                    let grow = &g.data()[i * (na + nb)..(i + 1) * (na + nb)];
                    da[i * na..(i + 1) * na].copy_from_slice(&grow[..na]);
                    db[i * nb..(i + 1) * nb].copy_from_slice(&grow[na..]);
                }
                self.accum(adj, a, Tensor::new(vec![m, na], da).expect("shape preserved"));
                self.accum(adj, b, Tensor::new(vec![m, nb], db).expect("shape preserved"));
            }
            Op::SliceRows { input, start } => {
                let (m, n) = self.value(input).dims2();
                let (rows, _) = self.nodes[i].value.dims2();
                let mut dx = vec![0.0; m * n];
                dx[start * n..(start + rows) * n].copy_from_slice(g.data());
                self.accum(adj, input, Tensor::new(vec![m, n], dx).expect("shape preserved"));
            }
            Op::ScalarMul(x, c) => {
                let dx = g.map(|gv| gv * c);
                self.accum(adj, x, dx);
            }
            Op::ScalarAdd(x) => {
                self.accum(adj, x, g.clone());
            }
            Op::PairwiseSqDist(x, y) => {
                let (xv, yv) = (self.value(x), self.value(y));
                let (m, d) = xv.dims2();
                let (n, _) = yv.dims2();
                let mut row_sum = vec![0.0; m];
                let mut col_sum = vec![0.0; n];
                for i in 0..m {
                    for j in 0..n {
                        let gv = g.data()[i * n + j];
                        row_sum[i] += gv;
                        col_sum[j] += gv;
                    }
                }
                // dX = 2 (diag(row_sum) X - G Y), dY = 2 (diag(col_sum) Y - G^T X)
                let gy = matmul(g, yv);
                let mut dx = vec![0.0; m * d];
                for i in 0..m {
                    for k in 0..d {
                        dx[i * d + k] =
                            2.0 * (row_sum[i] * xv.data()[i * d + k] - gy.data()[i * d + k]);
                    }
                }
                let gtx = matmul_tn(g, xv);
                let mut dy = vec![0.0; n * d];
                for j in 0..n {
                    for k in 0..d {
                        dy[j * d + k] =
                            2.0 * (col_sum[j] * yv.data()[j * d + k] - gtx.data()[j * d + k]);
                    }
                }
                self.accum(adj, x, Tensor::new(vec![m, d], dx).expect("shape preserved"));
                self.accum(adj, y, Tensor::new(vec![n, d], dy).expect("shape preserved"));
            }
        }
    }
}

fn zip_map(g: &Tensor, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = g.data().iter().zip(other.data()).map(|(&a, &b)| f(a, b)).collect();
    Tensor::new(g.shape().to_vec(), data).expect("shape preserved")
}

fn mask_map(g: &Tensor, mask: &[bool], keep: bool) -> Tensor {
    let data = g
        .data()
        .iter()
        .zip(mask)
        .map(|(&gv, &m)| if m == keep { gv } else { 0.0 })
        .collect();
    Tensor::new(g.shape().to_vec(), data).expect("shape preserved")
}
