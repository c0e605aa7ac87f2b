//! The full convolutional autoencoder: 5 encoding units, a mirrored decoder,
//! variable-length handling, and weight serialization.
//!
//! Encoder unit: [3×3 conv → leaky ReLU → 3×3 conv → leaky ReLU → 2×2 maxpool];
//! decoder unit: [stride-2 transposed conv to the recorded size → leaky ReLU →
//! 3×3 conv → leaky ReLU], with no activation after the last conv. The vanilla
//! variant replaces each unit by a single stride-2 conv / transposed conv.

pub mod io;

use crate::error::{Error, Result};
use crate::nn::{xavier_from_stream, Layer, LayerParams, Stack, StackCache, StackGrads};
use crate::tensor::{ConvSpec, Real, Tensor4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const UNITS: usize = 5;
pub const DEFAULT_CHANNELS: [usize; UNITS] = [32, 64, 128, 256, 256];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arch {
    Full,
    Vanilla,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub channels: [usize; UNITS],
    /// f32 so configs survive weight-file round trips bit-exactly.
    pub leaky_slope: f32,
    pub input_rows: usize,
    pub arch: Arch,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            channels: DEFAULT_CHANNELS,
            leaky_slope: 0.2,
            input_rows: 69,
            arch: Arch::Full,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.channels[UNITS - 1] != 256 {
            return Err(Error::invalid(format!(
                "bottleneck must have 256 channels, config ends in {}",
                self.channels[UNITS - 1]
            )));
        }
        if self.channels.iter().any(|&c| c == 0) {
            return Err(Error::invalid("channel counts must be ≥ 1"));
        }
        if !(self.leaky_slope > 0.0 && self.leaky_slope < 1.0) {
            return Err(Error::invalid(format!(
                "leaky slope {} outside (0,1)",
                self.leaky_slope
            )));
        }
        if self.input_rows == 0 {
            return Err(Error::invalid("input rows must be ≥ 1"));
        }
        Ok(())
    }

    /// Decoder channel chain: per unit (input channels, output channels).
    fn decoder_io(&self) -> [(usize, usize); UNITS] {
        let c = &self.channels;
        [
            (c[4], c[3]),
            (c[3], c[2]),
            (c[2], c[1]),
            (c[1], c[0]),
            (c[0], 1),
        ]
    }

    /// Encoder channel chain: per unit (input channels, output channels).
    fn encoder_io(&self) -> [(usize, usize); UNITS] {
        let c = &self.channels;
        [(1, c[0]), (c[0], c[1]), (c[1], c[2]), (c[2], c[3]), (c[3], c[4])]
    }
}

/// Trained (or training) parameters plus the config that shaped them.
#[derive(Clone, Debug)]
pub struct ModelWeights<T: Real = f32> {
    pub config: ModelConfig,
    pub encoder: Stack<T>,
    pub decoder: Stack<T>,
    /// Completed training epochs (checkpoint metadata; 0 for a fresh build).
    pub trained_epochs: u32,
}

/// Per-level pre-downsample sizes recorded while encoding, consumed by the
/// decoder's transposed convolutions so decode(encode(x)) recovers x's shape
/// exactly for any length. With explicit upsample targets no temporal padding
/// is ever required, so [`pad_for_depth`] records sizes without padding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PadPlan {
    /// Encoder-order (h, w) entering each downsample: levels[0] is the input.
    pub levels: [(usize, usize); UNITS],
}

impl PadPlan {
    pub fn for_input(h: usize, w: usize) -> Self {
        let mut levels = [(0, 0); UNITS];
        let (mut ch, mut cw) = (h, w);
        for l in levels.iter_mut() {
            *l = (ch, cw);
            ch = ch.div_ceil(2);
            cw = cw.div_ceil(2);
        }
        PadPlan { levels }
    }

    /// Bottleneck spatial size implied by the plan.
    pub fn bottleneck_hw(&self) -> (usize, usize) {
        let (h, w) = self.levels[UNITS - 1];
        (h.div_ceil(2), w.div_ceil(2))
    }

    /// Upsample targets in decoder order.
    pub fn decoder_targets(&self) -> [(usize, usize); UNITS] {
        let mut t = self.levels;
        t.reverse();
        t
    }
}

/// Records the (no-op) temporal padding plan for a clip-shaped tensor.
pub fn pad_for_depth<T: Real>(x: &Tensor4<T>) -> (Tensor4<T>, PadPlan) {
    (x.clone(), PadPlan::for_input(x.h(), x.w()))
}

// ── wiring ───────────────────────────────────────────────────────────────────

fn build_stacks<T: Real>(config: &ModelConfig, seed: u64) -> (Stack<T>, Stack<T>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let conv = |name: String, spec: ConvSpec, rng: &mut ChaCha8Rng| Layer::Conv {
        params: LayerParams::new(
            name,
            xavier_from_stream(spec.weight_shape(), rng),
            vec![T::zero(); spec.out_channels],
        ),
        spec,
    };
    let tconv = |name: String, spec: ConvSpec, rng: &mut ChaCha8Rng| Layer::ConvTranspose {
        params: LayerParams::new(
            name,
            xavier_from_stream(spec.tconv_weight_shape(), rng),
            vec![T::zero(); spec.out_channels],
        ),
        spec,
    };
    let slope = T::from_f64(config.leaky_slope as f64);
    let relu = || Layer::LeakyRelu { slope };

    let mut encoder = Vec::new();
    let mut decoder = Vec::new();
    match config.arch {
        Arch::Full => {
            for (i, (cin, cout)) in config.encoder_io().into_iter().enumerate() {
                let u = i + 1;
                encoder.push(conv(format!("enc{u}.conv1"), ConvSpec::k3(cout, cin, (1, 1)), &mut rng));
                encoder.push(relu());
                encoder.push(conv(format!("enc{u}.conv2"), ConvSpec::k3(cout, cout, (1, 1)), &mut rng));
                encoder.push(relu());
                encoder.push(Layer::Pool);
            }
            for (i, (din, dout)) in config.decoder_io().into_iter().enumerate() {
                let u = i + 1;
                decoder.push(tconv(format!("dec{u}.tconv"), ConvSpec::k3(dout, din, (2, 2)), &mut rng));
                decoder.push(relu());
                decoder.push(conv(format!("dec{u}.conv"), ConvSpec::k3(dout, dout, (1, 1)), &mut rng));
                if i + 1 < UNITS {
                    decoder.push(relu()); // final conv: no activation
                }
            }
        }
        Arch::Vanilla => {
            for (i, (cin, cout)) in config.encoder_io().into_iter().enumerate() {
                encoder.push(conv(format!("enc{}.conv", i + 1), ConvSpec::k3(cout, cin, (2, 2)), &mut rng));
                encoder.push(relu());
            }
            for (i, (din, dout)) in config.decoder_io().into_iter().enumerate() {
                decoder.push(tconv(format!("dec{}.tconv", i + 1), ConvSpec::k3(dout, din, (2, 2)), &mut rng));
                if i + 1 < UNITS {
                    decoder.push(relu());
                }
            }
        }
    }
    (Stack::new(encoder), Stack::new(decoder))
}

/// Xavier-initialized model; one RNG stream in layer order, so weights are a
/// pure function of (config, seed).
pub fn build<T: Real>(config: &ModelConfig, seed: u64) -> Result<ModelWeights<T>> {
    config.validate()?;
    let (encoder, decoder) = build_stacks(config, seed);
    Ok(ModelWeights {
        config: config.clone(),
        encoder,
        decoder,
        trained_epochs: 0,
    })
}

/// Same-shaped model with all parameters zero (serialization scaffold).
pub(crate) fn build_zeroed(config: &ModelConfig) -> Result<ModelWeights<f32>> {
    let mut weights = build::<f32>(config, 0)?;
    for stack in [&mut weights.encoder, &mut weights.decoder] {
        for layer in &mut stack.layers {
            if let Some(p) = layer.params_mut() {
                for v in p.weights.data_mut() {
                    *v = 0.0;
                }
            }
        }
    }
    Ok(weights)
}

impl<T: Real> ModelWeights<T> {
    pub fn param_count(&self) -> usize {
        self.encoder.param_count() + self.decoder.param_count()
    }

    /// Parameterized layers in canonical (encoder-then-decoder) order.
    pub fn param_layers(&self) -> impl Iterator<Item = &LayerParams<T>> {
        self.encoder
            .layers
            .iter()
            .chain(&self.decoder.layers)
            .filter_map(|l| l.params())
    }

    pub fn cast<U: Real>(&self) -> ModelWeights<U> {
        ModelWeights {
            config: self.config.clone(),
            encoder: self.encoder.cast(),
            decoder: self.decoder.cast(),
            trained_epochs: self.trained_epochs,
        }
    }
}

// ── running the model ────────────────────────────────────────────────────────

fn check_input<T: Real>(x: &Tensor4<T>, config: &ModelConfig) -> Result<()> {
    if x.c() != 1 || x.h() != config.input_rows {
        return Err(Error::shape(
            "model input",
            x.shape(),
            [x.n(), 1, config.input_rows, x.w()],
        ));
    }
    Ok(())
}

pub fn encode<T: Real>(
    x: &Tensor4<T>,
    weights: &ModelWeights<T>,
) -> Result<(Tensor4<T>, PadPlan)> {
    check_input(x, &weights.config)?;
    let plan = PadPlan::for_input(x.h(), x.w());
    let cache = weights.encoder.forward(x, &[])?;
    Ok((cache.output().clone(), plan))
}

pub fn decode<T: Real>(
    bottleneck: &Tensor4<T>,
    plan: &PadPlan,
    weights: &ModelWeights<T>,
) -> Result<Tensor4<T>> {
    let (bh, bw) = plan.bottleneck_hw();
    let cb = weights.config.channels[UNITS - 1];
    if bottleneck.c() != cb || bottleneck.h() != bh || bottleneck.w() != bw {
        return Err(Error::shape(
            "decode: bottleneck vs PadPlan",
            bottleneck.shape(),
            [bottleneck.n(), cb, bh, bw],
        ));
    }
    let cache = weights.decoder.forward(bottleneck, &plan.decoder_targets())?;
    Ok(cache.output().clone())
}

/// One full reconstruction pass; accepts any temporal length.
pub fn forward<T: Real>(x: &Tensor4<T>, weights: &ModelWeights<T>) -> Result<Tensor4<T>> {
    let (bottleneck, plan) = encode(x, weights)?;
    decode(&bottleneck, &plan, weights)
}

/// Forward pass retaining every cache needed for backprop.
pub struct ForwardCache<T: Real = f32> {
    pub plan: PadPlan,
    pub encoder: StackCache<T>,
    pub decoder: StackCache<T>,
}

impl<T: Real> ForwardCache<T> {
    pub fn output(&self) -> &Tensor4<T> {
        self.decoder.output()
    }
}

pub fn forward_cached<T: Real>(
    x: &Tensor4<T>,
    weights: &ModelWeights<T>,
) -> Result<ForwardCache<T>> {
    check_input(x, &weights.config)?;
    let plan = PadPlan::for_input(x.h(), x.w());
    let encoder = weights.encoder.forward(x, &[])?;
    let decoder = weights
        .decoder
        .forward(encoder.output(), &plan.decoder_targets())?;
    Ok(ForwardCache {
        plan,
        encoder,
        decoder,
    })
}

/// Full backward pass; returns (grad wrt input, encoder grads, decoder grads).
pub fn backward<T: Real>(
    weights: &ModelWeights<T>,
    cache: &ForwardCache<T>,
    grad_output: &Tensor4<T>,
) -> Result<(Tensor4<T>, StackGrads<T>, StackGrads<T>)> {
    let (grad_bottleneck, dec_grads) = weights.decoder.backward(&cache.decoder, grad_output)?;
    let (grad_input, enc_grads) = weights.encoder.backward(&cache.encoder, &grad_bottleneck)?;
    Ok((grad_input, enc_grads, dec_grads))
}

/// Temporal receptive field of one bottleneck column, by stride/jump tracking.
pub fn encoder_receptive_field(config: &ModelConfig) -> usize {
    let (mut rf, mut jump) = (1usize, 1usize);
    let mut tap = |k: usize, s: usize| {
        rf += (k - 1) * jump;
        jump *= s;
    };
    for _ in 0..UNITS {
        match config.arch {
            Arch::Full => {
                tap(3, 1);
                tap(3, 1);
                tap(2, 2);
            }
            Arch::Vanilla => tap(3, 2),
        }
    }
    rf
}
