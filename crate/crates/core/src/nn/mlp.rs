use std::fmt;

use num_traits::Float;
use rand::Rng;

use crate::game::LegalMask;

use super::NnError;

/// Scalar type of a network: `f32` for training and play, `f64` for checks.
pub trait Real: Float + Default + Send + Sync + fmt::Debug + 'static {
    fn of(x: f64) -> Self;
    fn as_f64(self) -> f64;
    /// `C = alpha * A * B + beta * C` with explicit strides.
    ///
    /// # Safety
    /// Strides and dimensions must stay inside the pointed-to allocations.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );
}

impl Real for f32 {
    fn of(x: f64) -> Self {
        x as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: f32,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

impl Real for f64 {
    fn of(x: f64) -> Self {
        x
    }
    fn as_f64(self) -> f64 {
        self
    }
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: f64,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        beta: f64,
        c: *mut f64,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

/// Row-major operand view: `rows x cols` with element `(r, c)` at `r*rs + c*cs`.
#[derive(Clone, Copy)]
struct View<'a, R> {
    data: &'a [R],
    rs: isize,
    cs: isize,
}

impl<'a, R> View<'a, R> {
    fn plain(data: &'a [R], cols: usize) -> Self {
        View { data, rs: cols as isize, cs: 1 }
    }
    fn transposed(data: &'a [R], cols: usize) -> Self {
        View { data, rs: 1, cs: cols as isize }
    }
}

/// `c (m x n) = a (m x k) * b (k x n) + beta * c`.
fn matmul<R: Real>(m: usize, k: usize, n: usize, a: View<R>, b: View<R>, beta: R, c: &mut [R]) {
    let span = |v: &View<R>, rows: usize, cols: usize| {
        if rows == 0 || cols == 0 {
            0
        } else {
            ((rows - 1) as isize * v.rs + (cols - 1) as isize * v.cs) as usize + 1
        }
    };
    assert!(span(&a, m, k) <= a.data.len() && span(&b, k, n) <= b.data.len() && m * n <= c.len());
    // SAFETY: the assertion above keeps every access in bounds.
    unsafe {
        R::gemm(
            m,
            k,
            n,
            R::one(),
            a.data.as_ptr(),
            a.rs,
            a.cs,
            b.data.as_ptr(),
            b.rs,
            b.cs,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        )
    }
}

/// Layer sizes of a fully connected network with rectifier hidden units.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetConfig {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
}

impl NetConfig {
    pub fn new(input_dim: usize, hidden: Vec<usize>, output_dim: usize) -> Self {
        NetConfig { input_dim, hidden, output_dim }
    }

    /// Three hidden layers of 64 units.
    pub fn standard(input_dim: usize, output_dim: usize) -> Self {
        NetConfig::new(input_dim, vec![64, 64, 64], output_dim)
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden.contains(&0) {
            return Err(NnError::InvalidConfig(format!("zero-width layer in {self:?}")));
        }
        Ok(())
    }

    /// `[input, hidden..., output]`.
    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.input_dim];
        d.extend(&self.hidden);
        d.push(self.output_dim);
        d
    }
}

/// Affine map `out = W in + b`; `weights` is `rows x cols` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<R> {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<R>,
    pub biases: Vec<R>,
}

impl<R: Real> Layer<R> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Layer { rows, cols, weights: vec![R::zero(); rows * cols], biases: vec![R::zero(); rows] }
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut R> {
        self.weights.iter_mut().chain(self.biases.iter_mut())
    }

    fn params(&self) -> impl Iterator<Item = &R> {
        self.weights.iter().chain(self.biases.iter())
    }
}

/// Multilayer perceptron: rectifier after every layer but the last.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<R = f32> {
    layers: Vec<Layer<R>>,
}

/// Activations kept from a batched forward pass for backpropagation.
pub struct ForwardCache<R> {
    n: usize,
    /// `acts[0]` is the input; `acts[l + 1]` the output of layer `l`.
    acts: Vec<Vec<R>>,
}

impl<R: Real> ForwardCache<R> {
    pub fn output(&self) -> &[R] {
        self.acts.last().expect("at least one layer")
    }
}

impl<R: Real> Mlp<R> {
    /// Uniform initialization in `±1/sqrt(fan_in)` for weights and biases.
    pub fn init<G: Rng + ?Sized>(config: &NetConfig, rng: &mut G) -> Result<Self, NnError> {
        config.validate()?;
        let dims = config.dims();
        let layers = dims
            .windows(2)
            .map(|w| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                let mut draw = || R::of(rng.gen_range(-bound..bound));
                let weights = (0..w[0] * w[1]).map(|_| draw()).collect();
                let biases = (0..w[1]).map(|_| draw()).collect();
                Layer { rows: w[1], cols: w[0], weights, biases }
            })
            .collect();
        Ok(Mlp { layers })
    }

    pub fn zeros(config: &NetConfig) -> Result<Self, NnError> {
        config.validate()?;
        let dims = config.dims();
        Ok(Mlp { layers: dims.windows(2).map(|w| Layer::zeros(w[1], w[0])).collect() })
    }

    /// Checks that consecutive layers chain and buffers match their shapes.
    pub fn from_layers(layers: Vec<Layer<R>>) -> Result<Self, NnError> {
        if layers.is_empty() {
            return Err(NnError::InvalidConfig("network needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.rows == 0 || l.cols == 0 || l.weights.len() != l.rows * l.cols || l.biases.len() != l.rows {
                return Err(NnError::InvalidConfig(format!("layer {i} buffers do not match {}x{}", l.rows, l.cols)));
            }
            if i > 0 && layers[i - 1].rows != l.cols {
                return Err(NnError::InvalidConfig(format!("layer {i} input {} != previous output", l.cols)));
            }
        }
        Ok(Mlp { layers })
    }

    pub fn layers(&self) -> &[Layer<R>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<R>] {
        &mut self.layers
    }

    pub fn config(&self) -> NetConfig {
        let hidden = self.layers[..self.layers.len() - 1].iter().map(|l| l.rows).collect();
        NetConfig::new(self.input_dim(), hidden, self.output_dim())
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].cols
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].rows
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn params(&self) -> impl Iterator<Item = &R> {
        self.layers.iter().flat_map(|l| l.params())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut R> {
        self.layers.iter_mut().flat_map(|l| l.params_mut())
    }

    /// Same shapes, all zeros.
    pub fn zeros_like(&self) -> Self {
        Mlp { layers: self.layers.iter().map(|l| Layer::zeros(l.rows, l.cols)).collect() }
    }

    pub fn forward(&self, x: &[R]) -> Result<Vec<R>, NnError> {
        self.forward_batch(x, 1)
    }

    /// Outputs for `n` inputs stored row-major in `x`; `n x output_dim` row-major.
    pub fn forward_batch(&self, x: &[R], n: usize) -> Result<Vec<R>, NnError> {
        Ok(self.forward_cached(x, n)?.acts.pop().expect("at least one layer"))
    }

    pub fn forward_cached(&self, x: &[R], n: usize) -> Result<ForwardCache<R>, NnError> {
        let expected = n * self.input_dim();
        if x.len() != expected {
            return Err(NnError::ShapeMismatch { expected, found: x.len() });
        }
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(n * l.rows);
            for _ in 0..n {
                z.extend_from_slice(&l.biases);
            }
            let input = &acts[i];
            matmul(n, l.cols, l.rows, View::plain(input, l.cols), View::transposed(&l.weights, l.cols), R::one(), &mut z);
            if i != last {
                for v in z.iter_mut() {
                    if *v < R::zero() {
                        *v = R::zero();
                    }
                }
            }
            acts.push(z);
        }
        Ok(ForwardCache { n, acts })
    }

    /// Backpropagates `d_out` (`n x output_dim`, gradient of the loss with
    /// respect to the outputs) through `cache`. Returns parameter gradients
    /// and the gradient with respect to the inputs.
    pub fn backward(&self, cache: &ForwardCache<R>, d_out: &[R]) -> (Mlp<R>, Vec<R>) {
        let n = cache.n;
        let mut grads = self.zeros_like();
        let mut dz = d_out.to_vec();
        for i in (0..self.layers.len()).rev() {
            let l = &self.layers[i];
            let input = &cache.acts[i];
            let g = &mut grads.layers[i];
            // dW = dZ^T * input
            matmul(l.rows, n, l.cols, View::transposed(&dz, l.rows), View::plain(input, l.cols), R::zero(), &mut g.weights);
            for row in dz.chunks_exact(l.rows) {
                for (b, d) in g.biases.iter_mut().zip(row) {
                    *b = *b + *d;
                }
            }
            let mut dx = vec![R::zero(); n * l.cols];
            matmul(n, l.rows, l.cols, View::plain(&dz, l.rows), View::plain(&l.weights, l.cols), R::zero(), &mut dx);
            if i > 0 {
                // rectifier gate: the stored activation is positive exactly where it passed
                for (d, a) in dx.iter_mut().zip(input) {
                    if *a <= R::zero() {
                        *d = R::zero();
                    }
                }
            }
            dz = dx;
        }
        (grads, dz)
    }

    /// Weighted masked squared error on a batch and its parameter gradient:
    /// `(1/n) * sum_b w_b * sum_{a legal} (y_ba - t_ba)^2`.
    pub fn loss_and_grad(
        &self,
        x: &[R],
        targets: &[R],
        masks: &[LegalMask],
        weights: &[R],
    ) -> Result<(R, Mlp<R>), NnError> {
        let n = masks.len();
        let out = self.output_dim();
        if targets.len() != n * out || weights.len() != n {
            return Err(NnError::ShapeMismatch { expected: n * out, found: targets.len() });
        }
        let cache = self.forward_cached(x, n)?;
        let y = cache.output();
        let inv_n = R::one() / R::of(n as f64);
        let two = R::of(2.0);
        let mut loss = R::zero();
        let mut d_out = vec![R::zero(); n * out];
        for b in 0..n {
            for a in masks[b].slots().filter(|&a| a < out) {
                let k = b * out + a;
                let e = y[k] - targets[k];
                loss = loss + weights[b] * e * e;
                d_out[k] = two * weights[b] * e * inv_n;
            }
        }
        let (grads, _) = self.backward(&cache, &d_out);
        Ok((loss * inv_n, grads))
    }

    /// `output_dim x input_dim` Jacobian of the outputs with respect to the input.
    pub fn input_jacobian(&self, x: &[R]) -> Result<Vec<R>, NnError> {
        let cache = self.forward_cached(x, 1)?;
        let (o, i) = (self.output_dim(), self.input_dim());
        let mut jac = Vec::with_capacity(o * i);
        for k in 0..o {
            let mut e = vec![R::zero(); o];
            e[k] = R::one();
            jac.extend(self.backward(&cache, &e).1);
        }
        Ok(jac)
    }

    pub fn cast<S: Real>(&self) -> Mlp<S> {
        Mlp {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    rows: l.rows,
                    cols: l.cols,
                    weights: l.weights.iter().map(|w| S::of(w.as_f64())).collect(),
                    biases: l.biases.iter().map(|w| S::of(w.as_f64())).collect(),
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    #[test]
    fn zero_params_give_zero_output() {
        let net: Mlp<f32> = Mlp::zeros(&NetConfig::standard(5, 3)).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 3.0, 0.5, 9.0]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn identity_layer_copies_input_slice() {
        let mut l = Layer::<f32>::zeros(2, 4);
        l.weights[0] = 1.0;
        l.weights[4 + 1] = 1.0;
        let net = Mlp::from_layers(vec![l]).unwrap();
        assert_eq!(net.forward(&[3.0, -7.0, 1.0, 1.0]).unwrap(), vec![3.0, -7.0]);
    }

    #[test]
    fn shape_errors() {
        let net: Mlp<f32> = Mlp::zeros(&NetConfig::standard(5, 3)).unwrap();
        assert_eq!(net.forward(&[1.0]), Err(NnError::ShapeMismatch { expected: 5, found: 1 }));
        assert!(NetConfig::new(3, vec![0], 2).validate().is_err());
        assert!(Mlp::from_layers(vec![Layer::<f32>::zeros(2, 3), Layer::zeros(2, 3)]).is_err());
    }

    #[test]
    fn batch_matches_single_rows() {
        let net: Mlp<f64> = Mlp::init(&NetConfig::new(4, vec![8, 8], 3), &mut stream(1, Purpose::Test, 0, 0)).unwrap();
        let x: Vec<f64> = (0..12).map(|i| (i as f64 * 0.37).sin()).collect();
        let batch = net.forward_batch(&x, 3).unwrap();
        for r in 0..3 {
            let single = net.forward(&x[r * 4..r * 4 + 4]).unwrap();
            for (a, b) in single.iter().zip(&batch[r * 3..r * 3 + 3]) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn init_respects_fan_in_bound() {
        let net: Mlp<f32> = Mlp::init(&NetConfig::standard(16, 3), &mut stream(2, Purpose::Test, 0, 0)).unwrap();
        assert_eq!(net.num_params(), 16 * 64 + 64 + 2 * (64 * 64 + 64) + 64 * 3 + 3);
        for l in net.layers() {
            let bound = 1.0 / (l.cols as f32).sqrt();
            assert!(l.weights.iter().chain(&l.biases).all(|w| w.abs() <= bound));
        }
    }
}
