use crate::error::{Result, TensorError};

/// Dense row-major f64 tensor. Immutable after creation except for `grad`.
#[derive(Debug, Clone)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
    pub requires_grad: bool,
    pub grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_scalar(&self) -> bool {
        self.numel() == 1
    }
}

/// Handle to a node in a [`Graph`]. The wrapped index is the node id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

/// Operation record: kind, parent ids and values saved for the backward rule.
#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Detach,
    MatMul { a: Var, b: Var },
    Add { a: Var, b: Var, row_broadcast: bool },
    Mul { a: Var, b: Var },
    Gelu { x: Var },
    LayerNorm { x: Var, gain: Var, bias: Var, mean: Vec<f64>, rstd: Vec<f64> },
    EmbeddingLookup { table: Var, ids: Vec<usize> },
    Reshape { x: Var },
    Transpose { x: Var },
    Sum { x: Var },
    Mean { x: Var },
    L2NormSq { x: Var },
    Scale { x: Var, c: f64 },
    SoftmaxRows { x: Var, probs: Vec<f64> },
    ConcatRows { parts: Vec<Var>, row_offsets: Vec<usize> },
    SliceRows { x: Var, start: usize },
    SoftmaxCrossEntropy { logits: Var, targets: Vec<usize>, probs: Vec<f64> },
}

struct Node {
    op: Op,
    tensor: Tensor,
}

/// Append-only differentiation graph. Node insertion order is a topological
/// order, so backward is a single reverse sweep.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

pub(crate) fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        let ci = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            let bp = &b[p * n..(p + 1) * n];
            for j in 0..n {
                ci[j] += aip * bp[j];
            }
        }
    }
    c
}

fn transpose_raw(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut t = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            t[j * rows + i] = a[i * cols + j];
        }
    }
    t
}

fn gelu_scalar(x: f64) -> f64 {
    let c = (2.0 / std::f64::consts::PI).sqrt();
    0.5 * x * (1.0 + (c * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad_scalar(x: f64) -> f64 {
    let c = (2.0 / std::f64::consts::PI).sqrt();
    let u = c * (x + 0.044715 * x * x * x);
    let t = u.tanh();
    let sech2 = 1.0 - t * t;
    0.5 * (1.0 + t) + 0.5 * x * sech2 * c * (1.0 + 3.0 * 0.044715 * x * x)
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].tensor
    }

    pub fn data(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].tensor.data
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].tensor.shape
    }

    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].tensor.grad.as_deref()
    }

    /// Reset every grad field in the graph to absent.
    pub fn zero_grads(&mut self) {
        for node in &mut self.nodes {
            node.tensor.grad = None;
        }
    }

    fn push(&mut self, op: Op, shape: Vec<usize>, data: Vec<f64>, requires_grad: bool) -> Var {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.nodes.push(Node {
            op,
            tensor: Tensor { shape, data, requires_grad, grad: None },
        });
        Var(self.nodes.len() - 1)
    }

    fn requires(&self, v: Var) -> bool {
        self.nodes[v.0].tensor.requires_grad
    }

    pub fn leaf(&mut self, data: Vec<f64>, shape: Vec<usize>, requires_grad: bool) -> Result<Var> {
        if shape.iter().any(|&d| d == 0) {
            return Err(TensorError::BadDimension("zero-size dimension".into()));
        }
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(TensorError::ShapeMismatch {
                op: "leaf",
                detail: format!("shape {:?} needs {} values, got {}", shape, numel, data.len()),
            });
        }
        Ok(self.push(Op::Leaf, shape, data, requires_grad))
    }

    pub fn constant(&mut self, data: Vec<f64>, shape: Vec<usize>) -> Result<Var> {
        self.leaf(data, shape, false)
    }

    pub fn scalar(&mut self, value: f64) -> Var {
        self.push(Op::Leaf, vec![1], vec![value], false)
    }

    /// Copy of `x` cut out of the differentiation graph.
    pub fn detach(&mut self, x: Var) -> Var {
        let t = &self.nodes[x.0].tensor;
        let (shape, data) = (t.shape.clone(), t.data.clone());
        self.push(Op::Detach, shape, data, false)
    }

    fn dims2(&self, v: Var, op: &'static str) -> Result<(usize, usize)> {
        let s = self.shape(v);
        if s.len() != 2 {
            return Err(TensorError::ShapeMismatch {
                op,
                detail: format!("expected 2-d tensor, got shape {:?}", s),
            });
        }
        Ok((s[0], s[1]))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, ka) = self.dims2(a, "matmul")?;
        let (kb, n) = self.dims2(b, "matmul")?;
        if ka != kb {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                detail: format!("inner dims differ: {:?} x {:?}", self.shape(a), self.shape(b)),
            });
        }
        let data = matmul_raw(self.data(a), self.data(b), m, ka, n);
        let rg = self.requires(a) || self.requires(b);
        Ok(self.push(Op::MatMul { a, b }, vec![m, n], data, rg))
    }

    /// Elementwise add. Also accepts `[r, c] + [c]` as a row-vector bias.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let sa = self.shape(a).to_vec();
        let sb = self.shape(b).to_vec();
        let row_broadcast = sa.len() == 2 && sb.len() == 1 && sa[1] == sb[0];
        if !row_broadcast && sa != sb {
            return Err(TensorError::ShapeMismatch {
                op: "add",
                detail: format!("{:?} vs {:?}", sa, sb),
            });
        }
        let bd = self.data(b);
        let data: Vec<f64> = if row_broadcast {
            let cols = sb[0];
            self.data(a)
                .iter()
                .enumerate()
                .map(|(i, &x)| x + bd[i % cols])
                .collect()
        } else {
            self.data(a).iter().zip(bd).map(|(&x, &y)| x + y).collect()
        };
        let rg = self.requires(a) || self.requires(b);
        Ok(self.push(Op::Add { a, b, row_broadcast }, sa, data, rg))
    }

    /// Elementwise product of same-shape tensors.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let sa = self.shape(a).to_vec();
        if sa != self.shape(b) {
            return Err(TensorError::ShapeMismatch {
                op: "mul",
                detail: format!("{:?} vs {:?}", sa, self.shape(b)),
            });
        }
        let data: Vec<f64> =
            self.data(a).iter().zip(self.data(b)).map(|(&x, &y)| x * y).collect();
        let rg = self.requires(a) || self.requires(b);
        Ok(self.push(Op::Mul { a, b }, sa, data, rg))
    }

    pub fn gelu(&mut self, x: Var) -> Var {
        let shape = self.shape(x).to_vec();
        let data: Vec<f64> = self.data(x).iter().map(|&v| gelu_scalar(v)).collect();
        let rg = self.requires(x);
        self.push(Op::Gelu { x }, shape, data, rg)
    }

    /// Row-wise layer normalization over the last dimension with learned
    /// gain and bias: `y = (x - mean) / sqrt(var + eps) * gain + bias`.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        if eps <= 0.0 {
            return Err(TensorError::BadDimension(format!("layer_norm eps must be > 0, got {eps}")));
        }
        let shape = self.shape(x).to_vec();
        let d = *shape.last().ok_or_else(|| TensorError::ShapeMismatch {
            op: "layer_norm",
            detail: "0-d input".into(),
        })?;
        for (name, v) in [("gain", gain), ("bias", bias)] {
            let s = self.shape(v);
            if s != [d] {
                return Err(TensorError::ShapeMismatch {
                    op: "layer_norm",
                    detail: format!("{name} shape {:?}, expected [{d}]", s),
                });
            }
        }
        let rows = self.value(x).numel() / d;
        let xd = self.data(x);
        let gd = self.data(gain);
        let bd = self.data(bias);
        let mut data = vec![0.0; rows * d];
        let mut means = vec![0.0; rows];
        let mut rstds = vec![0.0; rows];
        for r in 0..rows {
            let row = &xd[r * d..(r + 1) * d];
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let rstd = 1.0 / (var + eps).sqrt();
            means[r] = mean;
            rstds[r] = rstd;
            for j in 0..d {
                data[r * d + j] = (row[j] - mean) * rstd * gd[j] + bd[j];
            }
        }
        let rg = self.requires(x) || self.requires(gain) || self.requires(bias);
        Ok(self.push(Op::LayerNorm { x, gain, bias, mean: means, rstd: rstds }, shape, data, rg))
    }

    /// Gather rows of `table` by token id: `[V, d] x ids(T) -> [T, d]`.
    pub fn embedding_lookup(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let (vocab, d) = self.dims2(table, "embedding_lookup")?;
        if ids.is_empty() {
            return Err(TensorError::EmptySequence);
        }
        if let Some(&bad) = ids.iter().find(|&&id| id >= vocab) {
            return Err(TensorError::TokenOutOfRange { id: bad, vocab });
        }
        let td = self.data(table);
        let mut data = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            data.extend_from_slice(&td[id * d..(id + 1) * d]);
        }
        let rg = self.requires(table);
        Ok(self.push(
            Op::EmbeddingLookup { table, ids: ids.to_vec() },
            vec![ids.len(), d],
            data,
            rg,
        ))
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var> {
        if shape.iter().any(|&d| d == 0) {
            return Err(TensorError::BadDimension("zero-size dimension".into()));
        }
        let numel: usize = shape.iter().product();
        if numel != self.value(x).numel() {
            return Err(TensorError::ShapeMismatch {
                op: "reshape",
                detail: format!("{:?} -> {:?}", self.shape(x), shape),
            });
        }
        let data = self.data(x).to_vec();
        let rg = self.requires(x);
        Ok(self.push(Op::Reshape { x }, shape, data, rg))
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let (r, c) = self.dims2(x, "transpose")?;
        let data = transpose_raw(self.data(x), r, c);
        let rg = self.requires(x);
        Ok(self.push(Op::Transpose { x }, vec![c, r], data, rg))
    }

    /// Sum of all elements, as a scalar.
    pub fn sum(&mut self, x: Var) -> Var {
        let s: f64 = self.data(x).iter().sum();
        let rg = self.requires(x);
        self.push(Op::Sum { x }, vec![1], vec![s], rg)
    }

    /// Mean of all elements, as a scalar.
    pub fn mean(&mut self, x: Var) -> Var {
        let n = self.value(x).numel() as f64;
        let s: f64 = self.data(x).iter().sum();
        let rg = self.requires(x);
        self.push(Op::Mean { x }, vec![1], vec![s / n], rg)
    }

    /// Sum of squared elements, as a scalar.
    pub fn l2_norm_sq(&mut self, x: Var) -> Var {
        let s: f64 = self.data(x).iter().map(|&v| v * v).sum();
        let rg = self.requires(x);
        self.push(Op::L2NormSq { x }, vec![1], vec![s], rg)
    }

    /// Multiply every element by the constant `c`.
    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let shape = self.shape(x).to_vec();
        let data: Vec<f64> = self.data(x).iter().map(|&v| v * c).collect();
        let rg = self.requires(x);
        self.push(Op::Scale { x, c }, shape, data, rg)
    }

    pub fn softmax_rows(&mut self, x: Var) -> Result<Var> {
        self.softmax_rows_inner(x, false)
    }

    /// Row-wise softmax over a square matrix where entries above the
    /// diagonal are excluded; excluded probabilities are exactly zero.
    pub fn causal_softmax_rows(&mut self, x: Var) -> Result<Var> {
        let (r, c) = self.dims2(x, "causal_softmax_rows")?;
        if r != c {
            return Err(TensorError::ShapeMismatch {
                op: "causal_softmax_rows",
                detail: format!("expected square scores, got [{r}, {c}]"),
            });
        }
        self.softmax_rows_inner(x, true)
    }

    fn softmax_rows_inner(&mut self, x: Var, causal: bool) -> Result<Var> {
        let (rows, cols) = self.dims2(x, "softmax_rows")?;
        let xd = self.data(x);
        let mut probs = vec![0.0; rows * cols];
        for r in 0..rows {
            let limit = if causal { r + 1 } else { cols };
            let row = &xd[r * cols..r * cols + limit];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut denom = 0.0;
            for j in 0..limit {
                let e = (row[j] - max).exp();
                probs[r * cols + j] = e;
                denom += e;
            }
            for j in 0..limit {
                probs[r * cols + j] /= denom;
            }
        }
        let rg = self.requires(x);
        let data = probs.clone();
        Ok(self.push(Op::SoftmaxRows { x, probs }, vec![rows, cols], data, rg))
    }

    /// Stack 2-d tensors with equal column counts along the row axis.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(TensorError::EmptySequence);
        }
        let (_, cols) = self.dims2(parts[0], "concat_rows")?;
        let mut row_offsets = Vec::with_capacity(parts.len() + 1);
        let mut total = 0;
        let mut rg = false;
        for &p in parts {
            let (r, c) = self.dims2(p, "concat_rows")?;
            if c != cols {
                return Err(TensorError::ShapeMismatch {
                    op: "concat_rows",
                    detail: format!("column counts differ: {cols} vs {c}"),
                });
            }
            row_offsets.push(total);
            total += r;
            rg |= self.requires(p);
        }
        row_offsets.push(total);
        let mut data = Vec::with_capacity(total * cols);
        for &p in parts {
            data.extend_from_slice(self.data(p));
        }
        Ok(self.push(
            Op::ConcatRows { parts: parts.to_vec(), row_offsets },
            vec![total, cols],
            data,
            rg,
        ))
    }

    /// Rows `[start, start + len)` of a 2-d tensor.
    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (rows, cols) = self.dims2(x, "slice_rows")?;
        if start + len > rows || len == 0 {
            return Err(TensorError::ShapeMismatch {
                op: "slice_rows",
                detail: format!("rows [{start}, {}) out of 0..{rows}", start + len),
            });
        }
        let data = self.data(x)[start * cols..(start + len) * cols].to_vec();
        let rg = self.requires(x);
        Ok(self.push(Op::SliceRows { x, start }, vec![len, cols], data, rg))
    }

    /// Mean token-level negative log-likelihood:
    /// `(1/T) * sum_t -log softmax(logits[t])[targets[t]]`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let (rows, vocab) = self.dims2(logits, "softmax_cross_entropy")?;
        if targets.is_empty() {
            return Err(TensorError::EmptySequence);
        }
        if targets.len() != rows {
            return Err(TensorError::ShapeMismatch {
                op: "softmax_cross_entropy",
                detail: format!("{} logit rows vs {} targets", rows, targets.len()),
            });
        }
        if let Some(&bad) = targets.iter().find(|&&id| id >= vocab) {
            return Err(TensorError::TokenOutOfRange { id: bad, vocab });
        }
        let xd = self.data(logits);
        let mut probs = vec![0.0; rows * vocab];
        let mut loss = 0.0;
        for (t, &y) in targets.iter().enumerate() {
            let row = &xd[t * vocab..(t + 1) * vocab];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut denom = 0.0;
            for j in 0..vocab {
                let e = (row[j] - max).exp();
                probs[t * vocab + j] = e;
                denom += e;
            }
            for j in 0..vocab {
                probs[t * vocab + j] /= denom;
            }
            loss -= probs[t * vocab + y].ln();
        }
        loss /= rows as f64;
        let rg = self.requires(logits);
        Ok(self.push(
            Op::SoftmaxCrossEntropy { logits, targets: targets.to_vec(), probs },
            vec![1],
            vec![loss],
            rg,
        ))
    }

    /// Reverse sweep from a scalar loss. Gradients accumulate additively into
    /// the `grad` field of every `requires_grad` ancestor; call
    /// [`Graph::zero_grads`] to reset between backward passes.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let lt = &self.nodes[loss.0].tensor;
        if !lt.is_scalar() {
            return Err(TensorError::NonScalarLoss { shape: lt.shape.clone() });
        }
        if !lt.requires_grad {
            return Ok(());
        }

        let mut adj: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        adj[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            self.propagate(i, &g, &mut adj);
            let t = &mut self.nodes[i].tensor;
            match &mut t.grad {
                Some(acc) => {
                    for (a, &gi) in acc.iter_mut().zip(&g) {
                        *a += gi;
                    }
                }
                None => t.grad = Some(g),
            }
        }
        Ok(())
    }

    fn propagate(&mut self, node: usize, g: &[f64], adj: &mut [Option<Vec<f64>>]) {
        let send = |graph: &Graph, v: Var, contrib: Vec<f64>, adj: &mut [Option<Vec<f64>>]| {
            if !graph.requires(v) {
                return;
            }
            match &mut adj[v.0] {
                Some(acc) => {
                    for (a, c) in acc.iter_mut().zip(contrib) {
                        *a += c;
                    }
                }
                slot => *slot = Some(contrib),
            }
        };

        let op = self.nodes[node].op.clone();
        match op {
            Op::Leaf | Op::Detach => {}
            Op::MatMul { a, b } => {
                let (m, k) = (self.shape(a)[0], self.shape(a)[1]);
                let n = self.shape(b)[1];
                if self.requires(a) {
                    let bt = transpose_raw(self.data(b), k, n);
                    let da = matmul_raw(g, &bt, m, n, k);
                    send(self, a, da, adj);
                }
                if self.requires(b) {
                    let at = transpose_raw(self.data(a), m, k);
                    let db = matmul_raw(&at, g, k, m, n);
                    send(self, b, db, adj);
                }
            }
            Op::Add { a, b, row_broadcast } => {
                send(self, a, g.to_vec(), adj);
                if self.requires(b) {
                    if row_broadcast {
                        let cols = self.shape(b)[0];
                        let mut db = vec![0.0; cols];
                        for (i, &gi) in g.iter().enumerate() {
                            db[i % cols] += gi;
                        }
                        send(self, b, db, adj);
                    } else {
                        send(self, b, g.to_vec(), adj);
                    }
                }
            }
            Op::Mul { a, b } => {
                if self.requires(a) {
                    let da: Vec<f64> = g.iter().zip(self.data(b)).map(|(&gi, &y)| gi * y).collect();
                    send(self, a, da, adj);
                }
                if self.requires(b) {
                    let db: Vec<f64> = g.iter().zip(self.data(a)).map(|(&gi, &x)| gi * x).collect();
                    send(self, b, db, adj);
                }
            }
            Op::Gelu { x } => {
                if self.requires(x) {
                    let dx: Vec<f64> = g
                        .iter()
                        .zip(self.data(x))
                        .map(|(&gi, &v)| gi * gelu_grad_scalar(v))
                        .collect();
                    send(self, x, dx, adj);
                }
            }
            Op::LayerNorm { x, gain, bias, mean, rstd } => {
                let d = self.shape(gain)[0];
                let rows = mean.len();
                let xd = self.data(x).to_vec();
                let gd = self.data(gain).to_vec();
                if self.requires(bias) {
                    let mut db = vec![0.0; d];
                    for r in 0..rows {
                        for j in 0..d {
                            db[j] += g[r * d + j];
                        }
                    }
                    send(self, bias, db, adj);
                }
                if self.requires(gain) {
                    let mut dg = vec![0.0; d];
                    for r in 0..rows {
                        for j in 0..d {
                            let xhat = (xd[r * d + j] - mean[r]) * rstd[r];
                            dg[j] += g[r * d + j] * xhat;
                        }
                    }
                    send(self, gain, dg, adj);
                }
                if self.requires(x) {
                    let mut dx = vec![0.0; rows * d];
                    for r in 0..rows {
                        let mut mean_dxhat = 0.0;
                        let mut mean_dxhat_xhat = 0.0;
                        for j in 0..d {
                            let xhat = (xd[r * d + j] - mean[r]) * rstd[r];
                            let dxhat = g[r * d + j] * gd[j];
                            mean_dxhat += dxhat;
                            mean_dxhat_xhat += dxhat * xhat;
                        }
                        mean_dxhat /= d as f64;
                        mean_dxhat_xhat /= d as f64;
                        for j in 0..d {
                            let xhat = (xd[r * d + j] - mean[r]) * rstd[r];
                            let dxhat = g[r * d + j] * gd[j];
                            dx[r * d + j] =
                                rstd[r] * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat);
                        }
                    }
                    send(self, x, dx, adj);
                }
            }
            Op::EmbeddingLookup { table, ids } => {
                if self.requires(table) {
                    let (vocab, d) = (self.shape(table)[0], self.shape(table)[1]);
                    let mut dt = vec![0.0; vocab * d];
                    for (t, &id) in ids.iter().enumerate() {
                        for j in 0..d {
                            dt[id * d + j] += g[t * d + j];
                        }
                    }
                    send(self, table, dt, adj);
                }
            }
            Op::Reshape { x } => send(self, x, g.to_vec(), adj),
            Op::Transpose { x } => {
                if self.requires(x) {
                    let (r, c) = (self.shape(x)[0], self.shape(x)[1]);
                    // grad has shape [c, r]; transpose it back to [r, c].
                    send(self, x, transpose_raw(g, c, r), adj);
                }
            }
            Op::Sum { x } => {
                let n = self.value(x).numel();
                send(self, x, vec![g[0]; n], adj);
            }
            Op::Mean { x } => {
                let n = self.value(x).numel();
                send(self, x, vec![g[0] / n as f64; n], adj);
            }
            Op::L2NormSq { x } => {
                if self.requires(x) {
                    let dx: Vec<f64> = self.data(x).iter().map(|&v| 2.0 * v * g[0]).collect();
                    send(self, x, dx, adj);
                }
            }
            Op::Scale { x, c } => {
                let dx: Vec<f64> = g.iter().map(|&gi| gi * c).collect();
                send(self, x, dx, adj);
            }
            Op::SoftmaxRows { x, probs } => {
                if self.requires(x) {
                    let (rows, cols) = (self.shape(x)[0], self.shape(x)[1]);
                    let mut dx = vec![0.0; rows * cols];
                    for r in 0..rows {
                        let mut dot = 0.0;
                        for j in 0..cols {
                            dot += g[r * cols + j] * probs[r * cols + j];
                        }
                        for j in 0..cols {
                            let p = probs[r * cols + j];
                            dx[r * cols + j] = p * (g[r * cols + j] - dot);
                        }
                    }
                    send(self, x, dx, adj);
                }
            }
            Op::ConcatRows { parts, row_offsets } => {
                let cols = self.shape(Var(node))[1];
                for (idx, &p) in parts.iter().enumerate() {
                    if self.requires(p) {
                        let (lo, hi) = (row_offsets[idx], row_offsets[idx + 1]);
                        send(self, p, g[lo * cols..hi * cols].to_vec(), adj);
                    }
                }
            }
            Op::SliceRows { x, start } => {
                if self.requires(x) {
                    let (rows, cols) = (self.shape(x)[0], self.shape(x)[1]);
                    let len = self.shape(Var(node))[0];
                    let mut dx = vec![0.0; rows * cols];
                    dx[start * cols..(start + len) * cols].copy_from_slice(g);
                    send(self, x, dx, adj);
                }
            }
            Op::SoftmaxCrossEntropy { logits, targets, probs } => {
                if self.requires(logits) {
                    let (rows, vocab) = (self.shape(logits)[0], self.shape(logits)[1]);
                    let scale = g[0] / rows as f64;
                    let mut dl = vec![0.0; rows * vocab];
                    for (t, &y) in targets.iter().enumerate() {
                        for j in 0..vocab {
                            let indicator = if j == y { 1.0 } else { 0.0 };
                            dl[t * vocab + j] = (probs[t * vocab + j] - indicator) * scale;
                        }
                    }
                    send(self, logits, dl, adj);
                }
            }
        }
    }
}
