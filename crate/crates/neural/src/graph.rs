use crate::{NeuralError, ParamId, ParamSet, Result};

/// Log-probability written into masked-out softmax slots. Finite so that
/// downstream arithmetic never produces NaN, but far below any real score.
pub const MASKED_LOG_PROB: f64 = -1.0e30;

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Input,
    Param(ParamId),
    Lookup { param: ParamId, row: usize },
    Affine { w: ParamId, x: Var, b: Option<ParamId> },
    Add(Vec<Var>),
    Mul(Var, Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Concat(Vec<Var>),
    Slice { x: Var, start: usize },
    LogSoftmax { x: Var, mask: Option<Vec<bool>> },
    Pick { x: Var, index: usize },
}

#[derive(Debug, Clone)]
struct Node {
    value: Vec<f64>,
    op: Op,
}

/// Append-only computation tape over vectors. Parameters are borrowed from
/// a [`ParamSet`]; gradients flow back into a separate [`Gradients`] value so
/// that several graphs may read the same parameters concurrently.
pub struct Graph<'p> {
    params: &'p ParamSet,
    nodes: Vec<Node>,
}

/// Per-parameter gradients produced by [`Graph::backward`].
#[derive(Debug, Clone)]
pub struct Gradients {
    params: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// `None` when the parameter was not reachable from the loss.
    pub fn get(&self, id: ParamId) -> Option<&[f64]> {
        self.params.get(id.0).and_then(|g| g.as_deref())
    }

    /// Dense gradient, zero-filled for unreached parameters.
    pub fn dense(&self, id: ParamId, len: usize) -> Vec<f64> {
        self.get(id).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; len])
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamSet) -> Self {
        Graph {
            params,
            nodes: Vec::with_capacity(64),
        }
    }

    pub fn params(&self) -> &'p ParamSet {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Vec<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    /// Constant leaf; receives no gradient.
    pub fn input(&mut self, values: Vec<f64>) -> Var {
        self.push(values, Op::Input)
    }

    /// Whole parameter, flattened.
    pub fn param(&mut self, id: ParamId) -> Var {
        let v = self.params.get(id).values().to_vec();
        self.push(v, Op::Param(id))
    }

    /// One row of a matrix parameter (embedding lookup).
    pub fn lookup(&mut self, id: ParamId, row: usize) -> Result<Var> {
        let t = self.params.get(id);
        let (rows, cols) = t.dims2();
        if row >= rows {
            return Err(NeuralError::Index {
                op: "lookup",
                index: row,
                len: rows,
            });
        }
        let v = t.values()[row * cols..(row + 1) * cols].to_vec();
        Ok(self.push(v, Op::Lookup { param: id, row }))
    }

    /// `W x + b`.
    pub fn affine(&mut self, w: ParamId, x: Var, b: Option<ParamId>) -> Result<Var> {
        let wt = self.params.get(w);
        let (rows, cols) = wt.dims2();
        let xv = &self.nodes[x.0].value;
        if wt.shape().len() != 2 || cols != xv.len() {
            return Err(NeuralError::Shape {
                op: "affine",
                left: wt.shape().to_vec(),
                right: vec![xv.len()],
            });
        }
        let mut out = match b {
            Some(b) => {
                let bt = self.params.get(b);
                if bt.len() != rows {
                    return Err(NeuralError::Shape {
                        op: "affine bias",
                        left: wt.shape().to_vec(),
                        right: bt.shape().to_vec(),
                    });
                }
                bt.values().to_vec()
            }
            None => vec![0.0; rows],
        };
        let wv = wt.values();
        for (i, o) in out.iter_mut().enumerate() {
            let row = &wv[i * cols..(i + 1) * cols];
            *o += row.iter().zip(xv).map(|(a, b)| a * b).sum::<f64>();
        }
        Ok(self.push(out, Op::Affine { w, x, b }))
    }

    fn same_len(&self, op: &'static str, a: Var, b: Var) -> Result<usize> {
        let (la, lb) = (self.nodes[a.0].value.len(), self.nodes[b.0].value.len());
        if la != lb {
            return Err(NeuralError::Shape {
                op,
                left: vec![la],
                right: vec![lb],
            });
        }
        Ok(la)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.sum(&[a, b])
    }

    /// Elementwise sum of equally sized vectors.
    pub fn sum(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or(NeuralError::EmptyInput("sum"))?;
        let mut out = self.nodes[first.0].value.clone();
        for &p in &parts[1..] {
            self.same_len("sum", first, p)?;
            for (o, x) in out.iter_mut().zip(&self.nodes[p.0].value) {
                *o += x;
            }
        }
        Ok(self.push(out, Op::Add(parts.to_vec())))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_len("mul", a, b)?;
        let out = self.nodes[a.0]
            .value
            .iter()
            .zip(&self.nodes[b.0].value)
            .map(|(x, y)| x * y)
            .collect();
        Ok(self.push(out, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.nodes[a.0].value.iter().map(|x| x * c).collect();
        self.push(out, Op::Scale(a, c))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.nodes[a.0].value.iter().map(|&x| sigmoid(x)).collect();
        self.push(out, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.nodes[a.0].value.iter().map(|x| x.tanh()).collect();
        self.push(out, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.nodes[a.0].value.iter().map(|x| x.max(0.0)).collect();
        self.push(out, Op::Relu(a))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let mut out = Vec::new();
        for p in parts {
            out.extend_from_slice(&self.nodes[p.0].value);
        }
        self.push(out, Op::Concat(parts.to_vec()))
    }

    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let n = self.nodes[x.0].value.len();
        if start + len > n {
            return Err(NeuralError::Index {
                op: "slice",
                index: start + len,
                len: n,
            });
        }
        let out = self.nodes[x.0].value[start..start + len].to_vec();
        Ok(self.push(out, Op::Slice { x, start }))
    }

    /// Log-softmax, optionally restricted to `mask[i] == true` entries.
    /// Masked slots hold [`MASKED_LOG_PROB`].
    pub fn log_softmax(&mut self, x: Var, mask: Option<&[bool]>) -> Result<Var> {
        let xv = &self.nodes[x.0].value;
        if xv.is_empty() {
            return Err(NeuralError::EmptyInput("log_softmax"));
        }
        if let Some(m) = mask {
            if m.len() != xv.len() {
                return Err(NeuralError::Shape {
                    op: "log_softmax mask",
                    left: vec![xv.len()],
                    right: vec![m.len()],
                });
            }
            if !m.iter().any(|&b| b) {
                return Err(NeuralError::EmptyMask);
            }
        }
        let allowed = |i: usize| mask.is_none_or(|m| m[i]);
        let max = xv
            .iter()
            .enumerate()
            .filter(|&(i, _)| allowed(i))
            .map(|(_, &v)| v)
            .fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = xv
            .iter()
            .enumerate()
            .filter(|&(i, _)| allowed(i))
            .map(|(_, &v)| (v - max).exp())
            .sum();
        let lse = max + sum.ln();
        let out = xv
            .iter()
            .enumerate()
            .map(|(i, &v)| if allowed(i) { v - lse } else { MASKED_LOG_PROB })
            .collect();
        Ok(self.push(
            out,
            Op::LogSoftmax {
                x,
                mask: mask.map(<[bool]>::to_vec),
            },
        ))
    }

    /// Scalar node holding element `index` of `x`.
    pub fn pick(&mut self, x: Var, index: usize) -> Result<Var> {
        let n = self.nodes[x.0].value.len();
        if index >= n {
            return Err(NeuralError::Index {
                op: "pick",
                index,
                len: n,
            });
        }
        let v = self.nodes[x.0].value[index];
        Ok(self.push(vec![v], Op::Pick { x, index }))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let n = self.nodes[loss.0].value.len();
        if n != 1 {
            return Err(NeuralError::NonScalarLoss(n));
        }
        let mut grads: Vec<Vec<f64>> = vec![Vec::new(); loss.0 + 1];
        let mut pgrads: Vec<Option<Vec<f64>>> = vec![None; self.params.len()];
        grads[loss.0] = vec![1.0];

        fn acc(grads: &mut [Vec<f64>], v: Var, len: usize) -> &mut Vec<f64> {
            let g = &mut grads[v.0];
            if g.is_empty() {
                *g = vec![0.0; len];
            }
            g
        }

        for idx in (0..=loss.0).rev() {
            if grads[idx].is_empty() {
                continue;
            }
            let g = std::mem::take(&mut grads[idx]);
            let node = &self.nodes[idx];
            match &node.op {
                Op::Input => {}
                Op::Param(id) => {
                    let n = self.params.get(*id).len();
                    let pg = pgrads[id.0].get_or_insert_with(|| vec![0.0; n]);
                    for (p, x) in pg.iter_mut().zip(&g) {
                        *p += x;
                    }
                }
                Op::Lookup { param, row } => {
                    let t = self.params.get(*param);
                    let (_, cols) = t.dims2();
                    let pg = pgrads[param.0].get_or_insert_with(|| vec![0.0; t.len()]);
                    for (p, x) in pg[row * cols..(row + 1) * cols].iter_mut().zip(&g) {
                        *p += x;
                    }
                }
                Op::Affine { w, x, b } => {
                    let wt = self.params.get(*w);
                    let (rows, cols) = wt.dims2();
                    let xv = &self.nodes[x.0].value;
                    {
                        let pg = pgrads[w.0].get_or_insert_with(|| vec![0.0; rows * cols]);
                        for i in 0..rows {
                            let gi = g[i];
                            if gi == 0.0 {
                                continue;
                            }
                            for (p, xj) in pg[i * cols..(i + 1) * cols].iter_mut().zip(xv) {
                                *p += gi * xj;
                            }
                        }
                    }
                    if let Some(b) = b {
                        let pg = pgrads[b.0].get_or_insert_with(|| vec![0.0; rows]);
                        for (p, x) in pg.iter_mut().zip(&g) {
                            *p += x;
                        }
                    }
                    let wv = wt.values();
                    let gx = acc(&mut grads, *x, cols);
                    for i in 0..rows {
                        let gi = g[i];
                        if gi == 0.0 {
                            continue;
                        }
                        for (gxj, wij) in gx.iter_mut().zip(&wv[i * cols..(i + 1) * cols]) {
                            *gxj += gi * wij;
                        }
                    }
                }
                Op::Add(parts) => {
                    for p in parts {
                        let gp = acc(&mut grads, *p, g.len());
                        for (a, x) in gp.iter_mut().zip(&g) {
                            *a += x;
                        }
                    }
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    let ga: Vec<f64> = g.iter().zip(bv).map(|(x, y)| x * y).collect();
                    let gb: Vec<f64> = g.iter().zip(av).map(|(x, y)| x * y).collect();
                    for (t, x) in acc(&mut grads, *a, g.len()).iter_mut().zip(&ga) {
                        *t += x;
                    }
                    for (t, x) in acc(&mut grads, *b, g.len()).iter_mut().zip(&gb) {
                        *t += x;
                    }
                }
                Op::Scale(a, c) => {
                    for (t, x) in acc(&mut grads, *a, g.len()).iter_mut().zip(&g) {
                        *t += c * x;
                    }
                }
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    for ((t, x), yi) in acc(&mut grads, *a, g.len()).iter_mut().zip(&g).zip(y) {
                        *t += x * yi * (1.0 - yi);
                    }
                }
                Op::Tanh(a) => {
                    let y = &node.value;
                    for ((t, x), yi) in acc(&mut grads, *a, g.len()).iter_mut().zip(&g).zip(y) {
                        *t += x * (1.0 - yi * yi);
                    }
                }
                Op::Relu(a) => {
                    let y = &node.value;
                    for ((t, x), yi) in acc(&mut grads, *a, g.len()).iter_mut().zip(&g).zip(y) {
                        if *yi > 0.0 {
                            *t += x;
                        }
                    }
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let len = self.nodes[p.0].value.len();
                        for (t, x) in acc(&mut grads, *p, len).iter_mut().zip(&g[off..off + len]) {
                            *t += x;
                        }
                        off += len;
                    }
                }
                Op::Slice { x, start } => {
                    let len = self.nodes[x.0].value.len();
                    let gx = acc(&mut grads, *x, len);
                    for (t, v) in gx[*start..*start + g.len()].iter_mut().zip(&g) {
                        *t += v;
                    }
                }
                Op::LogSoftmax { x, mask } => {
                    let y = &node.value;
                    let allowed = |i: usize| mask.as_ref().is_none_or(|m| m[i]);
                    let gsum: f64 = (0..g.len()).filter(|&i| allowed(i)).map(|i| g[i]).sum();
                    let gx = acc(&mut grads, *x, g.len());
                    for i in 0..g.len() {
                        if allowed(i) {
                            gx[i] += g[i] - y[i].exp() * gsum;
                        }
                    }
                }
                Op::Pick { x, index } => {
                    let len = self.nodes[x.0].value.len();
                    acc(&mut grads, *x, len)[*index] += g[0];
                }
            }
        }
        Ok(Gradients { params: pgrads })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Tensor;

    fn params_2x2() -> (ParamSet, ParamId, ParamId) {
        let mut ps = ParamSet::new();
        let w = ps
            .add(
                "w",
                Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap(),
            )
            .unwrap();
        let b = ps.add("b", Tensor::vector(vec![1.0, 1.0])).unwrap();
        (ps, w, b)
    }

    #[test]
    fn affine_hand_example() {
        let (ps, w, b) = params_2x2();
        let mut g = Graph::new(&ps);
        let x = g.input(vec![1.0, 1.0]);
        let y = g.affine(w, x, Some(b)).unwrap();
        assert_eq!(g.value(y), &[4.0, 8.0]);
    }

    #[test]
    fn affine_zero_input_gives_bias() {
        let (ps, w, b) = params_2x2();
        let mut g = Graph::new(&ps);
        let x = g.input(vec![0.0, 0.0]);
        let y = g.affine(w, x, Some(b)).unwrap();
        assert_eq!(g.value(y), &[1.0, 1.0]);
    }

    #[test]
    fn affine_identity() {
        let mut ps = ParamSet::new();
        let w = ps
            .add("i", Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap())
            .unwrap();
        let b = ps.add("z", Tensor::zeros(vec![2])).unwrap();
        let mut g = Graph::new(&ps);
        let x = g.input(vec![1.0, 2.0]);
        let y = g.affine(w, x, Some(b)).unwrap();
        assert_eq!(g.value(y), &[1.0, 2.0]);
    }

    #[test]
    fn affine_shape_error_names_both_shapes() {
        let (ps, w, b) = params_2x2();
        let mut g = Graph::new(&ps);
        let x = g.input(vec![1.0, 2.0, 3.0]);
        let err = g.affine(w, x, Some(b)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 2]") && msg.contains("[3]"), "{msg}");
    }

    #[test]
    fn log_softmax_uniform_and_limit() {
        let ps = ParamSet::new();
        let mut g = Graph::new(&ps);
        let x = g.input(vec![0.3; 4]);
        let y = g.log_softmax(x, None).unwrap();
        for v in g.value(y) {
            assert!((v + 4f64.ln()).abs() < 1e-15);
        }
        let x = g.input(vec![0.0, 800.0]);
        let y = g.log_softmax(x, None).unwrap();
        assert!(g.value(y)[1].abs() < 1e-12);
        assert!(g.value(y).iter().all(|v| v.is_finite()));
    }

    #[test]
    fn log_softmax_masked_hand_example() {
        let ps = ParamSet::new();
        let mut g = Graph::new(&ps);
        let x = g.input(vec![1.0, 2.0, 3.0]);
        let y = g.log_softmax(x, Some(&[true, false, true])).unwrap();
        // two-way softmax over [1, 3]
        let z = (1f64.exp() + 3f64.exp()).ln();
        let v = g.value(y);
        assert!((v[0] - (1.0 - z)).abs() < 1e-14);
        assert!((v[2] - (3.0 - z)).abs() < 1e-14);
        assert_eq!(v[1], MASKED_LOG_PROB);
        let total: f64 = [v[0], v[2]].iter().map(|x| x.exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn log_softmax_empty_mask_errors() {
        let ps = ParamSet::new();
        let mut g = Graph::new(&ps);
        let x = g.input(vec![1.0, 2.0]);
        assert!(matches!(
            g.log_softmax(x, Some(&[false, false])),
            Err(NeuralError::EmptyMask)
        ));
    }

    #[test]
    fn backward_of_sum_wx_is_outer_product_structure() {
        let (ps, w, _) = params_2x2();
        let mut g = Graph::new(&ps);
        let x = g.input(vec![0.5, -2.0]);
        let y = g.affine(w, x, None).unwrap();
        let a = g.pick(y, 0).unwrap();
        let b = g.pick(y, 1).unwrap();
        let loss = g.add(a, b).unwrap();
        let grads = g.backward(loss).unwrap();
        // d/dW_ij sum_i (W x)_i = x_j for every row i
        assert_eq!(grads.get(w).unwrap(), &[0.5, -2.0, 0.5, -2.0]);
    }

    #[test]
    fn unreached_parameter_gets_zero() {
        let (mut ps, w, b) = params_2x2();
        let grads = {
            let mut g = Graph::new(&ps);
            let x = g.input(vec![1.0, 1.0]);
            let y = g.affine(w, x, None).unwrap();
            let loss = g.pick(y, 0).unwrap();
            g.backward(loss).unwrap()
        };
        assert!(grads.get(b).is_none());
        ps.accumulate(&grads);
        assert_eq!(ps.get(b).grad().unwrap(), &[0.0, 0.0]);
    }

    #[test]
    fn backward_rejects_vector_loss() {
        let ps = ParamSet::new();
        let mut g = Graph::new(&ps);
        let x = g.input(vec![1.0, 2.0]);
        assert!(matches!(g.backward(x), Err(NeuralError::NonScalarLoss(2))));
    }
}
