//! Parameterized layer blocks, initialization, the Adam optimizer, and the
//! forward/backward orchestration the autoencoder is assembled from.

use crate::error::{Error, Result};
use crate::tensor::{
    conv2d_backward, conv2d_forward, convtranspose2d_backward, convtranspose2d_forward, l1_loss,
    leaky_relu, leaky_relu_backward, maxpool2d_backward, maxpool2d_forward, ConvSpec, PoolIndices,
    Real, Tensor4,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ── parameters & optimizer ───────────────────────────────────────────────────

/// Weights + bias of one layer together with their Adam moment buffers.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams<T: Real = f32> {
    pub name: String,
    pub weights: Tensor4<T>,
    pub bias: Vec<T>,
    pub adam_m: Tensor4<T>,
    pub adam_v: Tensor4<T>,
    pub adam_mb: Vec<T>,
    pub adam_vb: Vec<T>,
    pub step: u64,
}

impl<T: Real> LayerParams<T> {
    pub fn new(name: impl Into<String>, weights: Tensor4<T>, bias: Vec<T>) -> Self {
        let shape = weights.shape();
        let blen = bias.len();
        LayerParams {
            name: name.into(),
            weights,
            bias,
            adam_m: Tensor4::zeros(shape[0], shape[1], shape[2], shape[3]),
            adam_v: Tensor4::zeros(shape[0], shape[1], shape[2], shape[3]),
            adam_mb: vec![T::zero(); blen],
            adam_vb: vec![T::zero(); blen],
            step: 0,
        }
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn cast<U: Real>(&self) -> LayerParams<U> {
        LayerParams {
            name: self.name.clone(),
            weights: self.weights.cast(),
            bias: self.bias.iter().map(|v| U::from_f64(v.as_f64())).collect(),
            adam_m: self.adam_m.cast(),
            adam_v: self.adam_v.cast(),
            adam_mb: self.adam_mb.iter().map(|v| U::from_f64(v.as_f64())).collect(),
            adam_vb: self.adam_vb.iter().map(|v| U::from_f64(v.as_f64())).collect(),
            step: self.step,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(Error::invalid("OptimConfig: learning rate must be > 0"));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0 < b && b < 1.0) {
                return Err(Error::invalid(format!(
                    "OptimConfig: {name} must lie in (0,1), got {b}"
                )));
            }
        }
        Ok(())
    }
}

/// Uniform Xavier/Glorot samples in ±sqrt(6/(fan_in+fan_out)).
///
/// For a (d0,d1,kh,kw) kernel the fans are d1·kh·kw and d0·kh·kw; their sum —
/// all the formula uses — is layout-symmetric, so conv and transposed-conv
/// weights share this path. Draws are made in f64 and cast, so f32 and f64
/// builds from one seed agree.
pub fn xavier_init<T: Real>(shape: [usize; 4], seed: u64) -> Tensor4<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    xavier_from_stream(shape, &mut rng)
}

pub(crate) fn xavier_from_stream<T: Real>(shape: [usize; 4], rng: &mut ChaCha8Rng) -> Tensor4<T> {
    let [d0, d1, kh, kw] = shape;
    let fan_sum = (d0 + d1) * kh * kw;
    let bound = (6.0 / fan_sum as f64).sqrt();
    let data = (0..d0 * d1 * kh * kw)
        .map(|_| T::from_f64((rng.random::<f64>() * 2.0 - 1.0) * bound))
        .collect();
    Tensor4::from_vec(shape, data).expect("length matches by construction")
}

/// One bias-corrected Adam update. Rejects non-finite gradients by layer name
/// and leaves the parameters untouched in that case.
pub fn adam_step<T: Real>(
    params: &mut LayerParams<T>,
    grad_w: &Tensor4<T>,
    grad_b: &[T],
    cfg: &OptimConfig,
) -> Result<()> {
    cfg.validate()?;
    if grad_w.shape() != params.weights.shape() {
        return Err(Error::shape(
            "adam_step: grad_weights",
            grad_w.shape(),
            params.weights.shape(),
        ));
    }
    if grad_b.len() != params.bias.len() {
        return Err(Error::shape(
            "adam_step: grad_bias",
            [grad_b.len()],
            [params.bias.len()],
        ));
    }
    if !grad_w.all_finite() || !grad_b.iter().all(|g| g.is_finite()) {
        return Err(Error::NonFiniteGrad(params.name.clone()));
    }

    params.step += 1;
    let t = params.step as i32;
    let b1 = T::from_f64(cfg.beta1);
    let b2 = T::from_f64(cfg.beta2);
    let one = T::one();
    let corr1 = T::from_f64(1.0 - cfg.beta1.powi(t));
    let corr2 = T::from_f64(1.0 - cfg.beta2.powi(t));
    let lr = T::from_f64(cfg.learning_rate);
    let eps = T::from_f64(cfg.epsilon);

    let w = params.weights.data_mut();
    let m = params.adam_m.data_mut();
    let v = params.adam_v.data_mut();
    for i in 0..w.len() {
        let g = grad_w.data()[i];
        m[i] = b1 * m[i] + (one - b1) * g;
        v[i] = b2 * v[i] + (one - b2) * g * g;
        let m_hat = m[i] / corr1;
        let v_hat = v[i] / corr2;
        w[i] = w[i] - lr * m_hat / (v_hat.sqrt() + eps);
    }
    for i in 0..params.bias.len() {
        let g = grad_b[i];
        params.adam_mb[i] = b1 * params.adam_mb[i] + (one - b1) * g;
        params.adam_vb[i] = b2 * params.adam_vb[i] + (one - b2) * g * g;
        let m_hat = params.adam_mb[i] / corr1;
        let v_hat = params.adam_vb[i] / corr2;
        params.bias[i] = params.bias[i] - lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

// ── layer stacks ─────────────────────────────────────────────────────────────

/// One block in a sequential stack.
#[derive(Clone, Debug)]
pub enum Layer<T: Real = f32> {
    Conv {
        spec: ConvSpec,
        params: LayerParams<T>,
    },
    /// Stride-2 upsampler; its target size is consumed from the `targets`
    /// list passed to `forward` (recorded by the encoder's PadPlan).
    ConvTranspose {
        spec: ConvSpec,
        params: LayerParams<T>,
    },
    Pool,
    LeakyRelu {
        slope: T,
    },
}

impl<T: Real> Layer<T> {
    pub fn params(&self) -> Option<&LayerParams<T>> {
        match self {
            Layer::Conv { params, .. } | Layer::ConvTranspose { params, .. } => Some(params),
            _ => None,
        }
    }

    pub fn params_mut(&mut self) -> Option<&mut LayerParams<T>> {
        match self {
            Layer::Conv { params, .. } | Layer::ConvTranspose { params, .. } => Some(params),
            _ => None,
        }
    }
}

/// Sequential stack of blocks with explicit backward.
#[derive(Clone, Debug)]
pub struct Stack<T: Real = f32> {
    pub layers: Vec<Layer<T>>,
}

/// Everything the backward pass needs, recorded by `forward`.
pub struct StackCache<T: Real = f32> {
    /// Input to each layer, plus the final output appended last.
    activations: Vec<Tensor4<T>>,
    pool_indices: Vec<Option<PoolIndices>>,
}

impl<T: Real> StackCache<T> {
    pub fn output(&self) -> &Tensor4<T> {
        self.activations.last().expect("non-empty by construction")
    }
}

/// Per-layer parameter gradients, aligned with `Stack::layers`. Blocks
/// without parameters get `None`.
pub struct StackGrads<T: Real = f32> {
    pub per_layer: Vec<Option<(Tensor4<T>, Vec<T>)>>,
}

impl<T: Real> StackGrads<T> {
    pub fn zeros_like(stack: &Stack<T>) -> Self {
        let per_layer = stack
            .layers
            .iter()
            .map(|l| {
                l.params().map(|p| {
                    let s = p.weights.shape();
                    (Tensor4::zeros(s[0], s[1], s[2], s[3]), vec![T::zero(); p.bias.len()])
                })
            })
            .collect();
        StackGrads { per_layer }
    }

    /// self += other, elementwise. Order of accumulation is the caller's
    /// responsibility (training sums per-sample grads in sample order so the
    /// result is independent of thread count).
    pub fn accumulate(&mut self, other: &StackGrads<T>) {
        assert_eq!(self.per_layer.len(), other.per_layer.len());
        for (a, b) in self.per_layer.iter_mut().zip(&other.per_layer) {
            match (a, b) {
                (Some((aw, ab)), Some((bw, bb))) => {
                    for (x, y) in aw.data_mut().iter_mut().zip(bw.data()) {
                        *x = *x + *y;
                    }
                    for (x, y) in ab.iter_mut().zip(bb) {
                        *x = *x + *y;
                    }
                }
                (None, None) => {}
                _ => panic!("StackGrads::accumulate: mismatched layout"),
            }
        }
    }

    pub fn scale(&mut self, factor: T) {
        for g in self.per_layer.iter_mut().flatten() {
            for v in g.0.data_mut() {
                *v = *v * factor;
            }
            for v in &mut g.1 {
                *v = *v * factor;
            }
        }
    }
}

impl<T: Real> Stack<T> {
    pub fn new(layers: Vec<Layer<T>>) -> Self {
        Stack { layers }
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .filter_map(|l| l.params().map(|p| p.param_count()))
            .sum()
    }

    /// Runs the stack, caching every activation and pool index map needed for
    /// an exact backward pass. `tconv_targets` are consumed in encounter
    /// order by ConvTranspose blocks.
    pub fn forward(
        &self,
        input: &Tensor4<T>,
        tconv_targets: &[(usize, usize)],
    ) -> Result<StackCache<T>> {
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        let mut pool_indices = Vec::with_capacity(self.layers.len());
        activations.push(input.clone());
        let mut next_target = 0usize;
        for layer in &self.layers {
            let x = activations.last().expect("non-empty by construction");
            let y = match layer {
                Layer::Conv { spec, params } => {
                    pool_indices.push(None);
                    conv2d_forward(x, spec, &params.weights, &params.bias)?
                }
                Layer::ConvTranspose { spec, params } => {
                    pool_indices.push(None);
                    let target = *tconv_targets.get(next_target).ok_or_else(|| {
                        Error::invalid("Stack::forward: missing transposed-conv target size")
                    })?;
                    next_target += 1;
                    convtranspose2d_forward(x, spec, &params.weights, &params.bias, target)?
                }
                Layer::Pool => {
                    let (y, idx) = maxpool2d_forward(x);
                    pool_indices.push(Some(idx));
                    y
                }
                Layer::LeakyRelu { slope } => {
                    pool_indices.push(None);
                    leaky_relu(x, *slope)?
                }
            };
            activations.push(y);
        }
        Ok(StackCache {
            activations,
            pool_indices,
        })
    }

    /// Walks the cache backwards; returns the gradient w.r.t. the stack input
    /// and per-layer parameter gradients. Rejects a cache that does not match
    /// this stack (e.g. backward called without/with a stale forward).
    pub fn backward(
        &self,
        cache: &StackCache<T>,
        grad_output: &Tensor4<T>,
    ) -> Result<(Tensor4<T>, StackGrads<T>)> {
        if cache.activations.len() != self.layers.len() + 1
            || cache.pool_indices.len() != self.layers.len()
        {
            return Err(Error::invalid(
                "Stack::backward: cache does not match stack (run forward first)",
            ));
        }
        if grad_output.shape() != cache.output().shape() {
            return Err(Error::shape(
                "Stack::backward: grad_output",
                grad_output.shape(),
                cache.output().shape(),
            ));
        }
        let mut grads = StackGrads {
            per_layer: vec![None; self.layers.len()]
                .into_iter()
                .map(|_: Option<()>| None)
                .collect(),
        };
        let mut g = grad_output.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let x = &cache.activations[i];
            g = match layer {
                Layer::Conv { spec, params } => {
                    let (gi, gw, gb) = conv2d_backward(&g, x, spec, &params.weights)?;
                    grads.per_layer[i] = Some((gw, gb));
                    gi
                }
                Layer::ConvTranspose { spec, params } => {
                    let (gi, gw, gb) = convtranspose2d_backward(&g, x, spec, &params.weights)?;
                    grads.per_layer[i] = Some((gw, gb));
                    gi
                }
                Layer::Pool => {
                    let idx = cache.pool_indices[i].as_ref().ok_or_else(|| {
                        Error::invalid("Stack::backward: missing pool indices in cache")
                    })?;
                    maxpool2d_backward(&g, idx)?
                }
                Layer::LeakyRelu { slope } => leaky_relu_backward(&g, x, *slope)?,
            };
        }
        Ok((g, grads))
    }

    /// Applies one Adam step per parameterized layer.
    pub fn apply_grads(&mut self, grads: &StackGrads<T>, cfg: &OptimConfig) -> Result<()> {
        if grads.per_layer.len() != self.layers.len() {
            return Err(Error::invalid("Stack::apply_grads: gradient layout mismatch"));
        }
        for (layer, g) in self.layers.iter_mut().zip(&grads.per_layer) {
            match (layer.params_mut(), g) {
                (Some(p), Some((gw, gb))) => adam_step(p, gw, gb, cfg)?,
                (None, None) => {}
                (Some(p), None) => {
                    return Err(Error::invalid(format!(
                        "Stack::apply_grads: missing gradient for layer `{}`",
                        p.name
                    )))
                }
                (None, Some(_)) => {
                    return Err(Error::invalid(
                        "Stack::apply_grads: gradient supplied for parameterless layer",
                    ))
                }
            }
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> Stack<U> {
        let layers = self
            .layers
            .iter()
            .map(|l| match l {
                Layer::Conv { spec, params } => Layer::Conv {
                    spec: *spec,
                    params: params.cast(),
                },
                Layer::ConvTranspose { spec, params } => Layer::ConvTranspose {
                    spec: *spec,
                    params: params.cast(),
                },
                Layer::Pool => Layer::Pool,
                Layer::LeakyRelu { slope } => Layer::LeakyRelu {
                    slope: U::from_f64(slope.as_f64()),
                },
            })
            .collect();
        Stack { layers }
    }
}

/// Convenience: forward through a stack and return only the output.
pub fn layer_forward<T: Real>(
    stack: &Stack<T>,
    input: &Tensor4<T>,
    tconv_targets: &[(usize, usize)],
) -> Result<Tensor4<T>> {
    Ok(stack.forward(input, tconv_targets)?.output().clone())
}

/// Convenience: full backward given the forward cache; see [`Stack::backward`].
pub fn layer_backward<T: Real>(
    stack: &Stack<T>,
    cache: &StackCache<T>,
    grad_output: &Tensor4<T>,
) -> Result<(Tensor4<T>, StackGrads<T>)> {
    stack.backward(cache, grad_output)
}

/// Loss + gradient of mean |pred − target| in one call (training hot path).
pub fn l1_with_grad<T: Real>(pred: &Tensor4<T>, target: &Tensor4<T>) -> Result<(T, Tensor4<T>)> {
    let loss = l1_loss(pred, target)?;
    let grad = crate::tensor::l1_loss_backward(pred, target)?;
    Ok((loss, grad))
}
