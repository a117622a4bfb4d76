//! Reverse-mode automatic differentiation over dense matrices.
//!
//! The tape is an append-only list of nodes in topological order; every node
//! caches its forward value at record time, and the backward pass never
//! recomputes a forward value. Gradients follow the convention
//! `g = dL/dRe(z) + i dL/dIm(z)` for a real-valued loss, which reduces to
//! the ordinary gradient over the reals and makes finite differences on the
//! real and imaginary parts directly comparable.
//!
//! The truncated exponential operators are recorded as compositions of
//! primitive ops, so their backward pass differentiates the unrolled Horner
//! recursion exactly rather than approximating the derivative of the
//! underlying matrix exponential.

use ndarray::Array2;
use thiserror::Error;

use crate::scalar::{Scalar, ScalarKind};

#[derive(Debug, Error)]
pub enum AutodiffError {
    #[error("{op}: shape mismatch, {left:?} vs {right:?}")]
    ShapeMismatch { op: &'static str, left: (usize, usize), right: (usize, usize) },
    #[error("{op}: operand must be 1x1, got {got:?}")]
    NotScalar { op: &'static str, got: (usize, usize) },
    #[error("{op} is defined over real scalars only")]
    RealOnly { op: &'static str },
    #[error("complex scalars required for {op}")]
    ComplexRequired { op: &'static str },
    #[error("group_sort needs an even number of columns, got {0}")]
    OddWidth(usize),
    #[error("zero_pad target width {target} is below input width {input}")]
    PadNarrows { input: usize, target: usize },
    #[error("slice_columns range {start}..{end} exceeds width {width}")]
    SliceOutOfRange { start: usize, end: usize, width: usize },
    #[error("loss node must be 1x1, got {got:?}")]
    LossNotScalar { got: (usize, usize) },
    #[error("parameter slot {0} recorded twice on one tape")]
    DuplicateSlot(usize),
    #[error("truncated exponential needs t_max >= 1, got 0")]
    ZeroOrderExp,
}

/// Index of a node on its tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op<T: Scalar> {
    Leaf,
    Matmul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    ScaleConst(NodeId, T),
    /// Multiply a matrix by a 1x1 node.
    ScaleNode { mat: NodeId, scalar: NodeId },
    Hadamard(NodeId, NodeId),
    TransposeConj(NodeId),
    ZeroPad { input: NodeId, d_in: usize },
    SliceCols { input: NodeId, start: usize, len: usize, width: usize },
    /// Flat permutation: output entry k reads input entry perm[k].
    GroupSort { input: NodeId, perm: Vec<usize> },
    Sin(NodeId),
    Relu(NodeId),
    Mse(NodeId, NodeId),
}

struct Node<T: Scalar> {
    op: Op<T>,
    value: Array2<T>,
    slot: Option<usize>,
}

pub struct Tape<T: Scalar> {
    nodes: Vec<Node<T>>,
    slots: Vec<usize>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new(), slots: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Array2<T> {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op: Op<T>, value: Array2<T>, slot: Option<usize>) -> NodeId {
        self.nodes.push(Node { op, value, slot });
        NodeId(self.nodes.len() - 1)
    }

    fn dims(&self, id: NodeId) -> (usize, usize) {
        self.nodes[id.0].value.dim()
    }

    /// Leaf that receives no gradient slot (operators, inputs, targets).
    pub fn constant(&mut self, value: Array2<T>) -> NodeId {
        self.push(Op::Leaf, value, None)
    }

    /// Leaf bound to a parameter slot; `backward` returns one gradient per
    /// slot. A slot may appear at most once per tape.
    pub fn param(&mut self, slot: usize, value: Array2<T>) -> Result<NodeId, AutodiffError> {
        if self.slots.contains(&slot) {
            return Err(AutodiffError::DuplicateSlot(slot));
        }
        self.slots.push(slot);
        Ok(self.push(Op::Leaf, value, Some(slot)))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        let (ar, ac) = self.dims(a);
        let (br, bc) = self.dims(b);
        if ac != br {
            return Err(AutodiffError::ShapeMismatch { op: "matmul", left: (ar, ac), right: (br, bc) });
        }
        let value = self.nodes[a.0].value.dot(&self.nodes[b.0].value);
        Ok(self.push(Op::Matmul(a, b), value, None))
    }

    fn elementwise_pair(
        &self,
        op: &'static str,
        a: NodeId,
        b: NodeId,
    ) -> Result<(), AutodiffError> {
        let (l, r) = (self.dims(a), self.dims(b));
        if l != r {
            return Err(AutodiffError::ShapeMismatch { op, left: l, right: r });
        }
        Ok(())
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        self.elementwise_pair("add", a, b)?;
        let value = &self.nodes[a.0].value + &self.nodes[b.0].value;
        Ok(self.push(Op::Add(a, b), value, None))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        self.elementwise_pair("subtract", a, b)?;
        let value = &self.nodes[a.0].value - &self.nodes[b.0].value;
        Ok(self.push(Op::Sub(a, b), value, None))
    }

    pub fn scale_const(&mut self, a: NodeId, c: T) -> NodeId {
        let value = self.nodes[a.0].value.mapv(|v| v * c);
        self.push(Op::ScaleConst(a, c), value, None)
    }

    pub fn scale_node(&mut self, mat: NodeId, scalar: NodeId) -> Result<NodeId, AutodiffError> {
        let sdim = self.dims(scalar);
        if sdim != (1, 1) {
            return Err(AutodiffError::NotScalar { op: "scalar_multiply", got: sdim });
        }
        let s = self.nodes[scalar.0].value[(0, 0)];
        let value = self.nodes[mat.0].value.mapv(|v| v * s);
        Ok(self.push(Op::ScaleNode { mat, scalar }, value, None))
    }

    pub fn hadamard(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        self.elementwise_pair("hadamard", a, b)?;
        let value = &self.nodes[a.0].value * &self.nodes[b.0].value;
        Ok(self.push(Op::Hadamard(a, b), value, None))
    }

    pub fn transpose_conj(&mut self, a: NodeId) -> NodeId {
        let value = crate::linalg::transpose_conj(&self.nodes[a.0].value);
        self.push(Op::TransposeConj(a), value, None)
    }

    /// Append zero columns up to `target` width; norm-preserving lift.
    pub fn zero_pad(&mut self, a: NodeId, target: usize) -> Result<NodeId, AutodiffError> {
        let (n, d_in) = self.dims(a);
        if target < d_in {
            return Err(AutodiffError::PadNarrows { input: d_in, target });
        }
        let mut value = Array2::zeros((n, target));
        for r in 0..n {
            for c in 0..d_in {
                value[(r, c)] = self.nodes[a.0].value[(r, c)];
            }
        }
        Ok(self.push(Op::ZeroPad { input: a, d_in }, value, None))
    }

    pub fn slice_columns(
        &mut self,
        a: NodeId,
        start: usize,
        len: usize,
    ) -> Result<NodeId, AutodiffError> {
        let (n, width) = self.dims(a);
        if start + len > width || len == 0 {
            return Err(AutodiffError::SliceOutOfRange { start, end: start + len, width });
        }
        let value = Array2::from_shape_fn((n, len), |(r, c)| self.nodes[a.0].value[(r, start + c)]);
        Ok(self.push(Op::SliceCols { input: a, start, len, width }, value, None))
    }

    fn require_real(op: &'static str) -> Result<(), AutodiffError> {
        if T::KIND != ScalarKind::Real64 {
            return Err(AutodiffError::RealOnly { op });
        }
        Ok(())
    }

    /// Sort each adjacent column pair ascending per row (group size 2).
    /// Ties keep the original order, and the backward pass routes gradients
    /// through the recorded permutation.
    pub fn group_sort(&mut self, a: NodeId) -> Result<NodeId, AutodiffError> {
        Self::require_real("group_sort")?;
        let (n, d) = self.dims(a);
        if d % 2 != 0 {
            return Err(AutodiffError::OddWidth(d));
        }
        let input = self.nodes[a.0].value.clone();
        let mut value = input.clone();
        let mut perm: Vec<usize> = (0..n * d).collect();
        for r in 0..n {
            for p in 0..d / 2 {
                let c = 2 * p;
                let (lo, hi) = (input[(r, c)], input[(r, c + 1)]);
                if hi.re() < lo.re() {
                    value[(r, c)] = hi;
                    value[(r, c + 1)] = lo;
                    perm[r * d + c] = r * d + c + 1;
                    perm[r * d + c + 1] = r * d + c;
                }
            }
        }
        Ok(self.push(Op::GroupSort { input: a, perm }, value, None))
    }

    pub fn sin(&mut self, a: NodeId) -> Result<NodeId, AutodiffError> {
        Self::require_real("sin")?;
        let value = self.nodes[a.0].value.mapv(|v| T::from_f64(v.re().sin()));
        Ok(self.push(Op::Sin(a), value, None))
    }

    pub fn relu(&mut self, a: NodeId) -> Result<NodeId, AutodiffError> {
        Self::require_real("relu")?;
        let value = self.nodes[a.0].value.mapv(|v| if v.re() > 0.0 { v } else { T::zero() });
        Ok(self.push(Op::Relu(a), value, None))
    }

    /// Mean squared deviation `mean |a - b|^2` as a 1x1 node.
    pub fn mse(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        self.elementwise_pair("mse", a, b)?;
        let (n, d) = self.dims(a);
        let total: f64 = self.nodes[a.0]
            .value
            .iter()
            .zip(self.nodes[b.0].value.iter())
            .map(|(x, y)| (*x - *y).abs2())
            .sum();
        let value = Array2::from_elem((1, 1), T::from_f64(total / (n * d) as f64));
        Ok(self.push(Op::Mse(a, b), value, None))
    }

    /// Truncated exponential of the conjugation operator `L(X) = A X W`,
    /// summed to order `t_max` by the Horner recursion
    /// `p <- X + A p W / k`. The recursion is recorded op by op.
    pub fn truncated_exp_operator(
        &mut self,
        a_norm: NodeId,
        x: NodeId,
        w: NodeId,
        t_max: usize,
    ) -> Result<NodeId, AutodiffError> {
        if t_max == 0 {
            return Err(AutodiffError::ZeroOrderExp);
        }
        let mut p = x;
        for k in (1..=t_max).rev() {
            let ap = self.matmul(a_norm, p)?;
            let apw = self.matmul(ap, w)?;
            let scaled = self.scale_const(apw, T::from_f64(1.0 / k as f64));
            p = self.add(x, scaled)?;
        }
        Ok(p)
    }

    /// Truncated exponential of left multiplication `X -> exp(c A) X` with a
    /// 1x1 coefficient node `c`, Horner recursion `p <- X + (c/k) A p`.
    pub fn truncated_exp_scaled(
        &mut self,
        coeff: NodeId,
        a_norm: NodeId,
        x: NodeId,
        t_max: usize,
    ) -> Result<NodeId, AutodiffError> {
        if t_max == 0 {
            return Err(AutodiffError::ZeroOrderExp);
        }
        let mut p = x;
        for k in (1..=t_max).rev() {
            let ap = self.matmul(a_norm, p)?;
            let cap = self.scale_node(ap, coeff)?;
            let scaled = self.scale_const(cap, T::from_f64(1.0 / k as f64));
            p = self.add(x, scaled)?;
        }
        Ok(p)
    }

    /// Reverse pass from a 1x1 loss node. Returns one gradient per
    /// parameter slot in `0..n_slots`; slots never recorded get zero-sized
    /// placeholders is not possible, so they yield `None`.
    pub fn backward(
        &self,
        loss: NodeId,
        n_slots: usize,
    ) -> Result<Vec<Option<Array2<T>>>, AutodiffError> {
        let ldim = self.dims(loss);
        if ldim != (1, 1) {
            return Err(AutodiffError::LossNotScalar { got: ldim });
        }
        let mut grads: Vec<Option<Array2<T>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Array2::from_elem((1, 1), T::one()));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            match &self.nodes[idx].op {
                Op::Leaf => {
                    grads[idx] = Some(g);
                    continue;
                }
                Op::Matmul(a, b) => {
                    let bh = crate::linalg::transpose_conj(&self.nodes[b.0].value);
                    let ah = crate::linalg::transpose_conj(&self.nodes[a.0].value);
                    accumulate(&mut grads, *a, g.dot(&bh));
                    accumulate(&mut grads, *b, ah.dot(&g));
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g.mapv(|v| -v));
                }
                Op::ScaleConst(a, c) => {
                    let cc = c.conj();
                    accumulate(&mut grads, *a, g.mapv(|v| v * cc));
                }
                Op::ScaleNode { mat, scalar } => {
                    let s = self.nodes[scalar.0].value[(0, 0)].conj();
                    accumulate(&mut grads, *mat, g.mapv(|v| v * s));
                    let ds: T = self.nodes[mat.0]
                        .value
                        .iter()
                        .zip(g.iter())
                        .fold(T::zero(), |acc, (a, gv)| acc + a.conj() * *gv);
                    accumulate(&mut grads, *scalar, Array2::from_elem((1, 1), ds));
                }
                Op::Hadamard(a, b) => {
                    let da = self.nodes[b.0].value.mapv(|v| v.conj()) * &g;
                    let db = self.nodes[a.0].value.mapv(|v| v.conj()) * &g;
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::TransposeConj(a) => {
                    accumulate(&mut grads, *a, crate::linalg::transpose_conj(&g));
                }
                Op::ZeroPad { input, d_in } => {
                    let n = g.nrows();
                    let da = Array2::from_shape_fn((n, *d_in), |(r, c)| g[(r, c)]);
                    accumulate(&mut grads, *input, da);
                }
                Op::SliceCols { input, start, len, width } => {
                    let n = g.nrows();
                    let mut da = Array2::zeros((n, *width));
                    for r in 0..n {
                        for c in 0..*len {
                            da[(r, start + c)] = g[(r, c)];
                        }
                    }
                    accumulate(&mut grads, *input, da);
                }
                Op::GroupSort { input, perm } => {
                    let (n, d) = g.dim();
                    let mut da = Array2::zeros((n, d));
                    for k in 0..n * d {
                        let src = perm[k];
                        da[(src / d, src % d)] = da[(src / d, src % d)] + g[(k / d, k % d)];
                    }
                    accumulate(&mut grads, *input, da);
                }
                Op::Sin(a) => {
                    let da = self.nodes[a.0].value.mapv(|v| T::from_f64(v.re().cos())) * &g;
                    accumulate(&mut grads, *a, da);
                }
                Op::Relu(a) => {
                    let mask = self.nodes[a.0]
                        .value
                        .mapv(|v| if v.re() > 0.0 { T::one() } else { T::zero() });
                    accumulate(&mut grads, *a, mask * &g);
                }
                Op::Mse(a, b) => {
                    let (n, d) = self.dims(*a);
                    let scale = g[(0, 0)] * T::from_f64(2.0 / (n * d) as f64);
                    let diff = &self.nodes[a.0].value - &self.nodes[b.0].value;
                    accumulate(&mut grads, *a, diff.mapv(|v| v * scale));
                    accumulate(&mut grads, *b, diff.mapv(|v| -(v * scale)));
                }
            }
        }

        let mut out: Vec<Option<Array2<T>>> = vec![None; n_slots];
        for (idx, node) in self.nodes.iter().enumerate() {
            if let Some(slot) = node.slot {
                if slot < n_slots {
                    out[slot] = grads[idx].take().or_else(|| {
                        Some(Array2::zeros(self.nodes[idx].value.dim()))
                    });
                }
            }
        }
        Ok(out)
    }
}

fn accumulate<T: Scalar>(grads: &mut [Option<Array2<T>>], id: NodeId, delta: Array2<T>) {
    match &mut grads[id.0] {
        Some(g) => *g = &*g + &delta,
        slot => *slot = Some(delta),
    }
}

/// Maximum relative disagreement between tape gradients and central finite
/// differences, taken over every real component of every parameter.
///
/// `build` must record the same computation for identical parameter values;
/// the checker rebuilds the tape per perturbation and compares against the
/// analytic gradient of one unperturbed pass.
pub fn grad_check<T, F>(
    build: F,
    params: &[Array2<T>],
    eps: f64,
) -> Result<f64, AutodiffError>
where
    T: Scalar,
    F: Fn(&mut Tape<T>, &[NodeId]) -> Result<NodeId, AutodiffError>,
{
    let record = |values: &[Array2<T>]| -> Result<(Tape<T>, NodeId), AutodiffError> {
        let mut tape = Tape::new();
        let ids: Vec<NodeId> = values
            .iter()
            .enumerate()
            .map(|(slot, v)| tape.param(slot, v.clone()))
            .collect::<Result<_, _>>()?;
        let loss = build(&mut tape, &ids)?;
        Ok((tape, loss))
    };

    let (tape, loss) = record(params)?;
    let grads = tape.backward(loss, params.len())?;

    let components: &[bool] = match T::KIND {
        ScalarKind::Real64 => &[false],
        ScalarKind::Complex128 => &[false, true],
    };

    let mut worst: f64 = 0.0;
    let mut perturbed: Vec<Array2<T>> = params.to_vec();
    for (p_idx, p) in params.iter().enumerate() {
        let (rows, cols) = p.dim();
        for r in 0..rows {
            for c in 0..cols {
                for &imag in components {
                    let base = p[(r, c)];
                    let unit = if imag {
                        T::imaginary_unit().expect("imag component implies complex kind")
                    } else {
                        T::one()
                    };
                    let step = unit * T::from_f64(eps);

                    perturbed[p_idx][(r, c)] = base + step;
                    let (tp, lp) = record(&perturbed)?;
                    let up = tp.value(lp)[(0, 0)].re();

                    perturbed[p_idx][(r, c)] = base - step;
                    let (tm, lm) = record(&perturbed)?;
                    let um = tm.value(lm)[(0, 0)].re();

                    perturbed[p_idx][(r, c)] = base;

                    let numeric = (up - um) / (2.0 * eps);
                    let analytic = match &grads[p_idx] {
                        Some(g) => {
                            if imag {
                                g[(r, c)].im()
                            } else {
                                g[(r, c)].re()
                            }
                        }
                        None => 0.0,
                    };
                    let denom = analytic.abs().max(numeric.abs()).max(1e-8);
                    worst = worst.max((analytic - numeric).abs() / denom);
                }
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn randm<T: Scalar>(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<T> {
        Array2::from_shape_fn((rows, cols), |_| T::standard_normal(rng))
    }

    const EPS: f64 = 1e-5;
    const TOL: f64 = 1e-6;

    #[test]
    fn mse_gradient_matches_closed_form() {
        // L = mean x^2 has gradient 2x / N.
        let x = array![[1.0, -2.0], [0.5, 3.0]];
        let mut tape = Tape::new();
        let xid = tape.param(0, x.clone()).unwrap();
        let zero = tape.constant(Array2::zeros((2, 2)));
        let loss = tape.mse(xid, zero).unwrap();
        let grads = tape.backward(loss, 1).unwrap();
        let g = grads[0].as_ref().unwrap();
        for (gv, xv) in g.iter().zip(x.iter()) {
            assert!((gv - 2.0 * xv / 4.0).abs() < 1e-14);
        }
    }

    #[test]
    fn each_primitive_op_passes_grad_check_real() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let a: Array2<f64> = randm(3, 4, &mut rng);
        let b: Array2<f64> = randm(4, 3, &mut rng);
        let c: Array2<f64> = randm(3, 4, &mut rng);
        let s: Array2<f64> = randm(1, 1, &mut rng);
        let target = randm::<f64>(3, 3, &mut rng);
        let target2 = randm::<f64>(3, 4, &mut rng);

        let worst = grad_check(
            |tape, ids| {
                let t = tape.constant(target.clone());
                let m = tape.matmul(ids[0], ids[1])?;
                tape.mse(m, t)
            },
            &[a.clone(), b.clone()],
            EPS,
        )
        .unwrap();
        assert!(worst < TOL, "matmul: {worst}");

        let worst = grad_check(
            |tape, ids| {
                let t = tape.constant(target2.clone());
                let sum = tape.add(ids[0], ids[1])?;
                let diff = tape.sub(sum, ids[1])?;
                let had = tape.hadamard(diff, ids[1])?;
                let sc = tape.scale_const(had, -1.7);
                let sn = tape.scale_node(sc, ids[2])?;
                tape.mse(sn, t)
            },
            &[a.clone(), c.clone(), s.clone()],
            EPS,
        )
        .unwrap();
        assert!(worst < TOL, "elementwise chain: {worst}");

        let worst = grad_check(
            |tape, ids| {
                let tr = tape.transpose_conj(ids[0]);
                let t = tape.constant(Array2::zeros((4, 3)));
                tape.mse(tr, t)
            },
            &[a.clone()],
            EPS,
        )
        .unwrap();
        assert!(worst < TOL, "transpose: {worst}");

        let worst = grad_check(
            |tape, ids| {
                let padded = tape.zero_pad(ids[0], 6)?;
                let sliced = tape.slice_columns(padded, 1, 4)?;
                let t = tape.constant(Array2::ones((3, 4)));
                tape.mse(sliced, t)
            },
            &[a.clone()],
            EPS,
        )
        .unwrap();
        assert!(worst < TOL, "pad/slice: {worst}");

        let worst = grad_check(
            |tape, ids| {
                let gs = tape.group_sort(ids[0])?;
                let sn = tape.sin(gs)?;
                let rl = tape.relu(sn)?;
                let t = tape.constant(Array2::ones((3, 4)));
                tape.mse(rl, t)
            },
            &[a.clone()],
            EPS,
        )
        .unwrap();
        assert!(worst < TOL, "group_sort/sin/relu: {worst}");
    }

    #[test]
    fn each_primitive_op_passes_grad_check_complex() {
        let mut rng = ChaCha8Rng::seed_from_u64(202);
        let a: Array2<Complex64> = randm(3, 3, &mut rng);
        let b: Array2<Complex64> = randm(3, 3, &mut rng);
        let s: Array2<Complex64> = randm(1, 1, &mut rng);
        let target: Array2<Complex64> = randm(3, 3, &mut rng);

        let worst = grad_check(
            |tape, ids| {
                let t = tape.constant(target.clone());
                let m = tape.matmul(ids[0], ids[1])?;
                let h = tape.transpose_conj(m);
                let had = tape.hadamard(h, ids[1])?;
                let sc = tape.scale_const(had, Complex64::new(0.3, -1.1));
                let sn = tape.scale_node(sc, ids[2])?;
                let d = tape.sub(sn, ids[0])?;
                tape.mse(d, t)
            },
            &[a, b, s],
            EPS,
        )
        .unwrap();
        assert!(worst < TOL, "complex chain: {worst}");
    }

    #[test]
    fn group_sort_orders_pairs_and_keeps_ties_stable() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(array![[3.0, 1.0, 2.0, 5.0], [2.0, 2.0, -1.0, -4.0]]);
        let y = tape.group_sort(x).unwrap();
        assert_eq!(tape.value(y), &array![[1.0, 3.0, 2.0, 5.0], [2.0, 2.0, -4.0, -1.0]]);
    }

    #[test]
    fn group_sort_routes_gradients_through_the_permutation() {
        // With distinct pair entries the sort is locally a fixed permutation,
        // so gradients of mean(output * mask) land on the source entries.
        let x = array![[3.0, 1.0], [2.0, 5.0]];
        let mask = array![[1.0, 0.0], [0.0, 1.0]];
        let mut tape = Tape::new();
        let xid = tape.param(0, x).unwrap();
        let m = tape.constant(mask);
        let gs = tape.group_sort(xid).unwrap();
        let prod = tape.hadamard(gs, m).unwrap();
        let zero = tape.constant(Array2::zeros((2, 2)));
        let loss = tape.mse(prod, zero).unwrap();
        let grads = tape.backward(loss, 1).unwrap();
        let g = grads[0].as_ref().unwrap();
        // Output (0,0) = 1.0 came from input (0,1); output (1,1) = 5.0 stayed.
        assert!(g[(0, 0)].abs() < 1e-15);
        assert!(g[(0, 1)].abs() > 1e-3);
        assert!(g[(1, 0)].abs() < 1e-15);
        assert!(g[(1, 1)].abs() > 1e-3);
    }

    #[test]
    fn truncated_exp_matches_kronecker_route() {
        // Independent oracle: vec(exp(L) X) = exp_taylor(A (x) W^T) vec(X)
        // with the Kronecker product built by explicit loops.
        let mut rng = ChaCha8Rng::seed_from_u64(303);
        let n = 4;
        let d = 3;
        let a: Array2<f64> = {
            let raw = randm::<f64>(n, n, &mut rng);
            (&raw + &raw.t()).mapv(|v| 0.2 * v)
        };
        let w: Array2<f64> = randm::<f64>(d, d, &mut rng).mapv(|v| 0.3 * v);
        let x: Array2<f64> = randm(n, d, &mut rng);
        let t_max = 9;

        let mut tape = Tape::<f64>::new();
        let aid = tape.constant(a.clone());
        let wid = tape.constant(w.clone());
        let xid = tape.constant(x.clone());
        let out = tape.truncated_exp_operator(aid, xid, wid, t_max).unwrap();

        let mut big = Array2::<f64>::zeros((n * d, n * d));
        for i in 0..n {
            for j in 0..n {
                for p in 0..d {
                    for q in 0..d {
                        // vec is column-stacked: entry (i, p) sits at p*n + i.
                        big[(p * n + i, q * n + j)] = a[(i, j)] * w[(q, p)];
                    }
                }
            }
        }
        let e = crate::linalg::mat_exp_taylor(&big, t_max).unwrap();
        let mut vx = Array2::<f64>::zeros((n * d, 1));
        for p in 0..d {
            for i in 0..n {
                vx[(p * n + i, 0)] = x[(i, p)];
            }
        }
        let vy = e.dot(&vx);
        let y = tape.value(out);
        for p in 0..d {
            for i in 0..n {
                assert!(
                    (y[(i, p)] - vy[(p * n + i, 0)]).abs() < 1e-12,
                    "entry ({i},{p}) disagrees"
                );
            }
        }
    }

    #[test]
    fn truncated_exp_operators_pass_grad_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(404);
        let n = 4;
        let d = 2;
        let a_sym = {
            let raw = randm::<f64>(n, n, &mut rng);
            (&raw + &raw.t()).mapv(|v| 0.25 * v)
        };
        let x: Array2<f64> = randm(n, d, &mut rng);
        let w: Array2<f64> = randm(d, d, &mut rng);
        let target: Array2<f64> = randm(n, d, &mut rng);

        let worst = grad_check(
            |tape, ids| {
                let aid = tape.constant(a_sym.clone());
                let t = tape.constant(target.clone());
                let out = tape.truncated_exp_operator(aid, ids[0], ids[1], 6)?;
                tape.mse(out, t)
            },
            &[x.clone(), w.clone()],
            EPS,
        )
        .unwrap();
        assert!(worst < TOL, "conjugation exp: {worst}");

        let ac = a_sym.mapv(|v| Complex64::new(v, 0.0));
        let xc: Array2<Complex64> = randm(n, d, &mut rng);
        let tc: Array2<Complex64> = randm(n, d, &mut rng);
        let coeff = Array2::from_elem((1, 1), Complex64::new(0.0, 0.8));
        let worst = grad_check(
            |tape, ids| {
                let aid = tape.constant(ac.clone());
                let t = tape.constant(tc.clone());
                let out = tape.truncated_exp_scaled(ids[1], aid, ids[0], 6)?;
                tape.mse(out, t)
            },
            &[xc, coeff],
            EPS,
        )
        .unwrap();
        assert!(worst < TOL, "scaled exp: {worst}");
    }

    #[test]
    fn backward_is_deterministic() {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            let a: Array2<f64> = randm(5, 5, &mut rng);
            let x: Array2<f64> = randm(5, 3, &mut rng);
            let mut tape = Tape::new();
            let aid = tape.param(0, a).unwrap();
            let xid = tape.param(1, x).unwrap();
            let m = tape.matmul(aid, xid).unwrap();
            let r = tape.relu(m).unwrap();
            let z = tape.constant(Array2::zeros((5, 3)));
            let loss = tape.mse(r, z).unwrap();
            tape.backward(loss, 2).unwrap()
        };
        let g1 = run();
        let g2 = run();
        for (a, b) in g1.iter().zip(g2.iter()) {
            assert_eq!(a.as_ref().unwrap(), b.as_ref().unwrap());
        }
    }

    #[test]
    fn error_paths() {
        let mut tape = Tape::<f64>::new();
        let a = tape.constant(Array2::zeros((2, 3)));
        let b = tape.constant(Array2::zeros((2, 3)));
        assert!(matches!(tape.matmul(a, b), Err(AutodiffError::ShapeMismatch { .. })));
        assert!(matches!(tape.scale_node(a, b), Err(AutodiffError::NotScalar { .. })));
        assert!(matches!(tape.zero_pad(a, 2), Err(AutodiffError::PadNarrows { .. })));
        assert!(matches!(tape.slice_columns(a, 2, 2), Err(AutodiffError::SliceOutOfRange { .. })));
        assert!(matches!(tape.backward(a, 0), Err(AutodiffError::LossNotScalar { .. })));
        let odd = tape.constant(Array2::zeros((2, 5)));
        assert!(matches!(tape.group_sort(odd), Err(AutodiffError::OddWidth(5))));

        let mut ct = Tape::<Complex64>::new();
        let c = ct.constant(Array2::zeros((2, 2)));
        assert!(matches!(ct.group_sort(c), Err(AutodiffError::RealOnly { .. })));
        assert!(matches!(ct.sin(c), Err(AutodiffError::RealOnly { .. })));
        assert!(matches!(ct.relu(c), Err(AutodiffError::RealOnly { .. })));

        let mut dup = Tape::<f64>::new();
        dup.param(0, Array2::zeros((1, 1))).unwrap();
        assert!(matches!(dup.param(0, Array2::zeros((1, 1))), Err(AutodiffError::DuplicateSlot(0))));
    }
}
