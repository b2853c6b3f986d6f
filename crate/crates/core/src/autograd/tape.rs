use std::collections::HashMap;

use super::{numel, Scalar, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Sigmoid(Var),
    Tanh(Var),
    Affine(Var, T),
    MatVec(Var, Var),
    Conv2d {
        kernel: Var,
        input: Var,
        cols: usize,
    },
    ChannelBias(Var, Var),
    Reshape(Var),
    Mse(Var, Var),
    SumAll(Var),
    Mean(Vec<Var>),
}

#[derive(Debug, Clone)]
struct Node<T> {
    shape: Vec<usize>,
    value: Vec<T>,
    op: Op<T>,
    requires_grad: bool,
    /// Accumulated gradient, kept for leaves only.
    grad: Option<Vec<T>>,
}

/// Geometry of a same-padded, stride-1 convolution.
#[derive(Debug, Clone, Copy)]
struct ConvGeom {
    channels: usize,
    height: usize,
    width: usize,
    kh: usize,
    kw: usize,
}

impl ConvGeom {
    fn rows(&self) -> usize {
        self.channels * self.kh * self.kw
    }

    fn plane(&self) -> usize {
        self.height * self.width
    }
}

/// Lays out every receptive field as a column: `[C*kh*kw, H*W]`.
fn im2col<T: Scalar>(input: &[T], g: ConvGeom) -> Vec<T> {
    let (h, w) = (g.height, g.width);
    let (ph, pw) = (g.kh / 2, g.kw / 2);
    let mut cols = vec![T::zero(); g.rows() * g.plane()];
    for c in 0..g.channels {
        let src = &input[c * h * w..(c + 1) * h * w];
        for dy in 0..g.kh {
            for dx in 0..g.kw {
                let r = (c * g.kh + dy) * g.kw + dx;
                let dst = &mut cols[r * h * w..(r + 1) * h * w];
                let x_lo = pw.saturating_sub(dx);
                let x_hi = (w + pw).saturating_sub(dx).min(w);
                if x_lo >= x_hi {
                    continue;
                }
                for y in 0..h {
                    let yy = y as isize + dy as isize - ph as isize;
                    if yy < 0 || yy >= h as isize {
                        continue;
                    }
                    let yy = yy as usize;
                    let xs = x_lo + dx - pw;
                    let n = x_hi - x_lo;
                    dst[y * w + x_lo..y * w + x_hi].copy_from_slice(&src[yy * w + xs..yy * w + xs + n]);
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatters column gradients back onto the input.
fn col2im_add<T: Scalar>(cols: &[T], g: ConvGeom, out: &mut [T]) {
    let (h, w) = (g.height, g.width);
    let (ph, pw) = (g.kh / 2, g.kw / 2);
    for c in 0..g.channels {
        let dst = &mut out[c * h * w..(c + 1) * h * w];
        for dy in 0..g.kh {
            for dx in 0..g.kw {
                let r = (c * g.kh + dy) * g.kw + dx;
                let src = &cols[r * h * w..(r + 1) * h * w];
                let x_lo = pw.saturating_sub(dx);
                let x_hi = (w + pw).saturating_sub(dx).min(w);
                if x_lo >= x_hi {
                    continue;
                }
                for y in 0..h {
                    let yy = y as isize + dy as isize - ph as isize;
                    if yy < 0 || yy >= h as isize {
                        continue;
                    }
                    let yy = yy as usize;
                    let xs = x_lo + dx - pw;
                    let n = x_hi - x_lo;
                    for (d, s) in dst[yy * w + xs..yy * w + xs + n]
                        .iter_mut()
                        .zip(&src[y * w + x_lo..y * w + x_hi])
                    {
                        *d += *s;
                    }
                }
            }
        }
    }
}

/// Record of executed operations for one forward pass.
#[derive(Debug, Clone, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    cols: Vec<Vec<T>>,
    cols_cache: HashMap<(usize, usize, usize), usize>,
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            cols: Vec::new(),
            cols_cache: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<T>, op: Op<T>, requires_grad: bool) -> Var {
        debug_assert_eq!(numel(&shape), value.len());
        self.nodes.push(Node {
            shape,
            value,
            op,
            requires_grad,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    fn node(&self, v: Var) -> &Node<T> {
        &self.nodes[v.0]
    }

    /// Records a trainable leaf holding a copy of `tensor`'s values.
    pub fn param(&mut self, tensor: &Tensor<T>) -> Var {
        self.push(tensor.shape.clone(), tensor.values.clone(), Op::Leaf, true)
    }

    /// Records a leaf that never receives gradients.
    pub fn constant(&mut self, shape: Vec<usize>, values: Vec<T>) -> Result<Var> {
        if numel(&shape) != values.len() {
            return Err(Error::Shape(format!(
                "constant: {} values for shape {shape:?}",
                values.len()
            )));
        }
        Ok(self.push(shape, values, Op::Leaf, false))
    }

    pub fn zeros(&mut self, shape: Vec<usize>) -> Var {
        let n = numel(&shape);
        self.push(shape, vec![T::zero(); n], Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &[T] {
        &self.node(v).value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.node(v).shape
    }

    /// Value of a one-element variable.
    pub fn scalar(&self, v: Var) -> T {
        self.node(v).value[0]
    }

    /// Accumulated gradient of a leaf, if any has been computed.
    pub fn grad(&self, v: Var) -> Option<&[T]> {
        self.node(v).grad.as_deref()
    }

    pub fn zero_grad(&mut self) {
        for node in &mut self.nodes {
            node.grad = None;
        }
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.node(*v).requires_grad)
    }

    fn same_shape(&self, name: &str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Error::Shape(format!("{name}: {sa:?} vs {sb:?}")));
        }
        Ok(())
    }

    fn zip_map(&mut self, name: &str, a: Var, b: Var, f: impl Fn(T, T) -> T, op: Op<T>) -> Result<Var> {
        self.same_shape(name, a, b)?;
        let value = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(&x, &y)| f(x, y))
            .collect();
        let rg = self.rg(&[a, b]);
        Ok(self.push(self.shape(a).to_vec(), value, op, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_map("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_map("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_map("hadamard", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self
            .value(a)
            .iter()
            .map(|&x| T::one() / (T::one() + (-x).exp()))
            .collect();
        let rg = self.rg(&[a]);
        self.push(self.shape(a).to_vec(), value, Op::Sigmoid(a), rg)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).iter().map(|&x| x.tanh()).collect();
        let rg = self.rg(&[a]);
        self.push(self.shape(a).to_vec(), value, Op::Tanh(a), rg)
    }

    /// `scale * a + shift`, elementwise.
    pub fn affine(&mut self, a: Var, scale: T, shift: T) -> Var {
        let value = self.value(a).iter().map(|&x| scale * x + shift).collect();
        let rg = self.rg(&[a]);
        self.push(self.shape(a).to_vec(), value, Op::Affine(a, scale), rg)
    }

    /// Same values under a new shape with equal element count.
    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Result<Var> {
        if numel(&shape) != self.value(a).len() {
            return Err(Error::Shape(format!(
                "reshape: {:?} into {shape:?}",
                self.shape(a)
            )));
        }
        let value = self.value(a).to_vec();
        let rg = self.rg(&[a]);
        Ok(self.push(shape, value, Op::Reshape(a), rg))
    }

    /// `W x` for `W: [m, n]`, `x: [n]`.
    pub fn matvec(&mut self, w: Var, x: Var) -> Result<Var> {
        let (ws, xs) = (self.shape(w), self.shape(x));
        if ws.len() != 2 || xs.len() != 1 || ws[1] != xs[0] {
            return Err(Error::Shape(format!("matvec: W {ws:?} vs x {xs:?}")));
        }
        let (m, n) = (ws[0], ws[1]);
        let mut value = vec![T::zero(); m];
        T::gemm(
            m,
            n,
            1,
            T::one(),
            self.value(w),
            (n as isize, 1),
            self.value(x),
            (1, 1),
            T::zero(),
            &mut value,
            (1, 1),
        );
        let rg = self.rg(&[w, x]);
        Ok(self.push(vec![m], value, Op::MatVec(w, x), rg))
    }

    fn cols_for(&mut self, input: Var, g: ConvGeom) -> usize {
        let key = (input.0, g.kh, g.kw);
        if let Some(&idx) = self.cols_cache.get(&key) {
            return idx;
        }
        let cols = im2col(self.value(input), g);
        self.cols.push(cols);
        let idx = self.cols.len() - 1;
        self.cols_cache.insert(key, idx);
        idx
    }

    /// Stride-1 convolution with zero "same" padding:
    /// `K: [c_out, c_in, kh, kw]`, `X: [c_in, H, W]` → `[c_out, H, W]`.
    pub fn conv2d(&mut self, kernel: Var, input: Var) -> Result<Var> {
        let (ks, xs) = (self.shape(kernel).to_vec(), self.shape(input).to_vec());
        if ks.len() != 4 || xs.len() != 3 || ks[1] != xs[0] {
            return Err(Error::Shape(format!("conv2d: kernel {ks:?} vs input {xs:?}")));
        }
        if ks[2] % 2 == 0 || ks[3] % 2 == 0 {
            return Err(Error::Shape(format!(
                "conv2d: same padding needs odd kernel sizes, got {ks:?}"
            )));
        }
        let g = ConvGeom {
            channels: xs[0],
            height: xs[1],
            width: xs[2],
            kh: ks[2],
            kw: ks[3],
        };
        let c_out = ks[0];
        let cols = self.cols_for(input, g);
        let mut value = vec![T::zero(); c_out * g.plane()];
        T::gemm(
            c_out,
            g.rows(),
            g.plane(),
            T::one(),
            self.value(kernel),
            (g.rows() as isize, 1),
            &self.cols[cols],
            (g.plane() as isize, 1),
            T::zero(),
            &mut value,
            (g.plane() as isize, 1),
        );
        let rg = self.rg(&[kernel, input]);
        Ok(self.push(
            vec![c_out, g.height, g.width],
            value,
            Op::Conv2d {
                kernel,
                input,
                cols,
            },
            rg,
        ))
    }

    /// Adds `b[c]` to every element of channel `c` of `x: [C, H, W]`.
    pub fn channel_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let (xs, bs) = (self.shape(x).to_vec(), self.shape(b).to_vec());
        if xs.len() != 3 || bs != [xs[0]] {
            return Err(Error::Shape(format!("channel bias: x {xs:?} vs b {bs:?}")));
        }
        let plane = xs[1] * xs[2];
        let bias = self.value(b);
        let value = self
            .value(x)
            .iter()
            .enumerate()
            .map(|(i, &v)| v + bias[i / plane])
            .collect();
        let rg = self.rg(&[x, b]);
        Ok(self.push(xs, value, Op::ChannelBias(x, b), rg))
    }

    /// Mean squared difference over all elements, as a scalar.
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mse", a, b)?;
        let n = self.value(a).len();
        let sum: T = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(&x, &y)| (x - y) * (x - y))
            .sum();
        let rg = self.rg(&[a, b]);
        Ok(self.push(vec![], vec![sum / T::of(n as f64)], Op::Mse(a, b), rg))
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let sum: T = self.value(a).iter().copied().sum();
        let rg = self.rg(&[a]);
        self.push(vec![], vec![sum], Op::SumAll(a), rg)
    }

    /// Mean of scalar variables.
    pub fn mean(&mut self, vars: &[Var]) -> Result<Var> {
        if vars.is_empty() {
            return Err(Error::Shape("mean of zero scalars".into()));
        }
        let mut sum = T::zero();
        for &v in vars {
            if self.value(v).len() != 1 {
                return Err(Error::Shape(format!("mean: non-scalar shape {:?}", self.shape(v))));
            }
            sum += self.scalar(v);
        }
        let rg = self.rg(vars);
        Ok(self.push(
            vec![],
            vec![sum / T::of(vars.len() as f64)],
            Op::Mean(vars.to_vec()),
            rg,
        ))
    }

    /// Accumulates `d loss / d leaf` into every trainable leaf reachable from `loss`.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).len() != 1 {
            return Err(Error::NonScalarLoss(self.shape(loss).to_vec()));
        }
        let nodes = &self.nodes;
        let mut grads: Vec<Option<Vec<T>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![T::one()]);
        let mut leaf_grads = Vec::new();

        fn slot<'g, T: Scalar>(
            grads: &'g mut [Option<Vec<T>>],
            nodes: &[Node<T>],
            v: Var,
        ) -> Option<&'g mut Vec<T>> {
            let node = &nodes[v.0];
            if !node.requires_grad {
                return None;
            }
            Some(grads[v.0].get_or_insert_with(|| vec![T::zero(); node.value.len()]))
        }

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &nodes[i];
            if !node.requires_grad {
                continue;
            }
            match &node.op {
                Op::Leaf => leaf_grads.push((i, g)),
                Op::Add(a, b) => {
                    for v in [*a, *b] {
                        if let Some(d) = slot(&mut grads, nodes, v) {
                            d.iter_mut().zip(&g).for_each(|(d, &g)| *d += g);
                        }
                    }
                }
                Op::Sub(a, b) => {
                    if let Some(d) = slot(&mut grads, nodes, *a) {
                        d.iter_mut().zip(&g).for_each(|(d, &g)| *d += g);
                    }
                    if let Some(d) = slot(&mut grads, nodes, *b) {
                        d.iter_mut().zip(&g).for_each(|(d, &g)| *d += -g);
                    }
                }
                Op::Mul(a, b) => {
                    if let Some(d) = slot(&mut grads, nodes, *a) {
                        for ((d, &g), &y) in d.iter_mut().zip(&g).zip(&nodes[b.0].value) {
                            *d += g * y;
                        }
                    }
                    if let Some(d) = slot(&mut grads, nodes, *b) {
                        for ((d, &g), &x) in d.iter_mut().zip(&g).zip(&nodes[a.0].value) {
                            *d += g * x;
                        }
                    }
                }
                Op::Sigmoid(a) => {
                    if let Some(d) = slot(&mut grads, nodes, *a) {
                        for ((d, &g), &y) in d.iter_mut().zip(&g).zip(&node.value) {
                            *d += g * y * (T::one() - y);
                        }
                    }
                }
                Op::Tanh(a) => {
                    if let Some(d) = slot(&mut grads, nodes, *a) {
                        for ((d, &g), &y) in d.iter_mut().zip(&g).zip(&node.value) {
                            *d += g * (T::one() - y * y);
                        }
                    }
                }
                Op::Affine(a, scale) => {
                    if let Some(d) = slot(&mut grads, nodes, *a) {
                        d.iter_mut().zip(&g).for_each(|(d, &g)| *d += *scale * g);
                    }
                }
                Op::Reshape(a) => {
                    if let Some(d) = slot(&mut grads, nodes, *a) {
                        d.iter_mut().zip(&g).for_each(|(d, &g)| *d += g);
                    }
                }
                Op::MatVec(w, x) => {
                    let (m, n) = (nodes[w.0].shape[0], nodes[w.0].shape[1]);
                    if let Some(d) = slot(&mut grads, nodes, *w) {
                        // dW += g xᵀ
                        T::gemm(m, 1, n, T::one(), &g, (1, 1), &nodes[x.0].value, (1, 1), T::one(), d, (n as isize, 1));
                    }
                    if let Some(d) = slot(&mut grads, nodes, *x) {
                        // dx += Wᵀ g
                        T::gemm(n, m, 1, T::one(), &nodes[w.0].value, (1, n as isize), &g, (1, 1), T::one(), d, (1, 1));
                    }
                }
                Op::Conv2d {
                    kernel,
                    input,
                    cols,
                } => {
                    let ks = &nodes[kernel.0].shape;
                    let xs = &nodes[input.0].shape;
                    let geom = ConvGeom {
                        channels: xs[0],
                        height: xs[1],
                        width: xs[2],
                        kh: ks[2],
                        kw: ks[3],
                    };
                    let (c_out, rows, plane) = (ks[0], geom.rows(), geom.plane());
                    let cols = &self.cols[*cols];
                    if let Some(d) = slot(&mut grads, nodes, *kernel) {
                        // dK += dY colsᵀ
                        T::gemm(
                            c_out,
                            plane,
                            rows,
                            T::one(),
                            &g,
                            (plane as isize, 1),
                            cols,
                            (1, plane as isize),
                            T::one(),
                            d,
                            (rows as isize, 1),
                        );
                    }
                    if nodes[input.0].requires_grad {
                        let mut dcols = vec![T::zero(); rows * plane];
                        T::gemm(
                            rows,
                            c_out,
                            plane,
                            T::one(),
                            &nodes[kernel.0].value,
                            (1, rows as isize),
                            &g,
                            (plane as isize, 1),
                            T::zero(),
                            &mut dcols,
                            (plane as isize, 1),
                        );
                        if let Some(d) = slot(&mut grads, nodes, *input) {
                            col2im_add(&dcols, geom, d);
                        }
                    }
                }
                Op::ChannelBias(x, b) => {
                    if let Some(d) = slot(&mut grads, nodes, *x) {
                        d.iter_mut().zip(&g).for_each(|(d, &g)| *d += g);
                    }
                    let plane = nodes[x.0].shape[1] * nodes[x.0].shape[2];
                    if let Some(d) = slot(&mut grads, nodes, *b) {
                        for (c, chunk) in g.chunks(plane).enumerate() {
                            d[c] += chunk.iter().copied().sum::<T>();
                        }
                    }
                }
                Op::Mse(a, b) => {
                    let n = nodes[a.0].value.len();
                    let k = g[0] * T::of(2.0) / T::of(n as f64);
                    let (va, vb) = (&nodes[a.0].value, &nodes[b.0].value);
                    if let Some(d) = slot(&mut grads, nodes, *a) {
                        for ((d, &x), &y) in d.iter_mut().zip(va).zip(vb) {
                            *d += k * (x - y);
                        }
                    }
                    if let Some(d) = slot(&mut grads, nodes, *b) {
                        for ((d, &x), &y) in d.iter_mut().zip(va).zip(vb) {
                            *d += k * (y - x);
                        }
                    }
                }
                Op::SumAll(a) => {
                    if let Some(d) = slot(&mut grads, nodes, *a) {
                        d.iter_mut().for_each(|d| *d += g[0]);
                    }
                }
                Op::Mean(vars) => {
                    let share = g[0] / T::of(vars.len() as f64);
                    for v in vars {
                        if let Some(d) = slot(&mut grads, nodes, *v) {
                            d[0] += share;
                        }
                    }
                }
            }
        }

        for (i, g) in leaf_grads {
            match &mut self.nodes[i].grad {
                Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, &g)| *a += g),
                slot @ None => *slot = Some(g),
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(tape: &mut Tape<f64>, shape: Vec<usize>, v: Vec<f64>) -> Var {
        tape.constant(shape, v).unwrap()
    }

    fn param(tape: &mut Tape<f64>, shape: Vec<usize>, v: Vec<f64>) -> Var {
        tape.param(&Tensor::new(shape, v).unwrap())
    }

    #[test]
    fn activations_at_zero() {
        let mut tape = Tape::<f64>::new();
        let z = constant(&mut tape, vec![1], vec![0.0]);
        let s = tape.sigmoid(z);
        let t = tape.tanh(z);
        assert_eq!(tape.value(s), &[0.5]);
        assert_eq!(tape.value(t), &[0.0]);
    }

    #[test]
    fn identity_matvec_and_conv() {
        let mut tape = Tape::<f64>::new();
        let eye = constant(&mut tape, vec![3, 3], vec![1., 0., 0., 0., 1., 0., 0., 0., 1.]);
        let x = constant(&mut tape, vec![3], vec![1., 2., 3.]);
        let y = tape.matvec(eye, x).unwrap();
        assert_eq!(tape.value(y), &[1., 2., 3.]);

        let img: Vec<f64> = (0..20).map(|i| i as f64 * 0.3 - 1.0).collect();
        let x = constant(&mut tape, vec![1, 4, 5], img.clone());
        let k = constant(&mut tape, vec![1, 1, 1, 1], vec![1.0]);
        let y = tape.conv2d(k, x).unwrap();
        assert_eq!(tape.value(y), &img[..]);
    }

    #[test]
    fn conv_same_shape_for_odd_kernels() {
        for k in [1, 3, 5, 7] {
            let mut tape = Tape::<f64>::new();
            let x = tape.zeros(vec![2, 6, 9]);
            let w = tape.zeros(vec![3, 2, k, k]);
            let y = tape.conv2d(w, x).unwrap();
            assert_eq!(tape.shape(y), &[3, 6, 9]);
        }
        let mut tape = Tape::<f64>::new();
        let x = tape.zeros(vec![1, 6, 6]);
        let w = tape.zeros(vec![1, 1, 2, 2]);
        assert!(tape.conv2d(w, x).is_err());
    }

    #[test]
    fn conv_matches_direct_sum() {
        let (c_in, c_out, h, w, k) = (2, 3, 5, 4, 3);
        let xv: Vec<f64> = (0..c_in * h * w).map(|i| ((i * 7 % 11) as f64) - 5.0).collect();
        let kv: Vec<f64> = (0..c_out * c_in * k * k).map(|i| ((i * 5 % 7) as f64) * 0.1).collect();
        let mut tape = Tape::<f64>::new();
        let x = constant(&mut tape, vec![c_in, h, w], xv.clone());
        let kk = constant(&mut tape, vec![c_out, c_in, k, k], kv.clone());
        let y = tape.conv2d(kk, x).unwrap();
        for co in 0..c_out {
            for r in 0..h {
                for c in 0..w {
                    let mut acc = 0.0;
                    for ci in 0..c_in {
                        for dy in 0..k {
                            for dx in 0..k {
                                let (rr, cc) = (r as isize + dy as isize - 1, c as isize + dx as isize - 1);
                                if rr < 0 || cc < 0 || rr >= h as isize || cc >= w as isize {
                                    continue;
                                }
                                acc += kv[((co * c_in + ci) * k + dy) * k + dx]
                                    * xv[(ci * h + rr as usize) * w + cc as usize];
                            }
                        }
                    }
                    let got = tape.value(y)[(co * h + r) * w + c];
                    assert!((got - acc).abs() < 1e-12, "{got} vs {acc}");
                }
            }
        }
    }

    #[test]
    fn shape_errors_name_both_shapes() {
        let mut tape = Tape::<f64>::new();
        let a = tape.zeros(vec![2]);
        let b = tape.zeros(vec![3]);
        let err = tape.add(a, b).unwrap_err().to_string();
        assert!(err.contains("[2]") && err.contains("[3]"), "{err}");
        let w = tape.zeros(vec![2, 4]);
        assert!(tape.matvec(w, b).is_err());
    }

    #[test]
    fn analytic_gradients() {
        let mut tape = Tape::<f64>::new();
        let x = param(&mut tape, vec![2], vec![1.0, 2.0]);
        let sq = tape.mul(x, x).unwrap();
        let loss = tape.sum_all(sq);
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[2.0, 4.0]);

        let mut tape = Tape::<f64>::new();
        let w = param(&mut tape, vec![1], vec![0.0]);
        let one = constant(&mut tape, vec![1], vec![1.0]);
        let wx = tape.mul(w, one).unwrap();
        let s = tape.sigmoid(wx);
        let loss = tape.sum_all(s);
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(w).unwrap(), &[0.25]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut tape = Tape::<f64>::new();
        let x = param(&mut tape, vec![2], vec![1.0, 2.0]);
        assert!(matches!(tape.backward(x), Err(Error::NonScalarLoss(_))));
    }

    #[test]
    fn grads_accumulate_until_zeroed() {
        let mut tape = Tape::<f64>::new();
        let x = param(&mut tape, vec![2], vec![1.0, -3.0]);
        let sq = tape.mul(x, x).unwrap();
        let loss = tape.sum_all(sq);
        tape.backward(loss).unwrap();
        let first = tape.grad(x).unwrap().to_vec();
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[2.0 * first[0], 2.0 * first[1]]);
        tape.zero_grad();
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &first[..]);
    }

    #[test]
    fn constants_receive_no_gradient() {
        let mut tape = Tape::<f64>::new();
        let x = param(&mut tape, vec![2], vec![1.0, 2.0]);
        let c = constant(&mut tape, vec![2], vec![3.0, 4.0]);
        let loss = tape.mse(x, c).unwrap();
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[-2.0, -2.0]);
        assert!(tape.grad(c).is_none());
    }
}
