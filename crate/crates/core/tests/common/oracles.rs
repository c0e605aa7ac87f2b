//! Independent nested-loop kernel oracles, derived straight from the operator
//! definitions — no im2col, no GEMM — so the production kernels are never
//! compared against themselves. Everything runs in verification precision.

use mofill::tensor::{
    conv2d_forward, convtranspose2d_forward, maxpool2d_backward, maxpool2d_forward, ConvSpec,
    Tensor4,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rand_tensor(rng: &mut ChaCha8Rng, shape: [usize; 4]) -> Tensor4<f64> {
    let len = shape.iter().product();
    let data = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor4::from_vec(shape, data).unwrap()
}

pub fn random_spec(rng: &mut ChaCha8Rng) -> (ConvSpec, [usize; 4]) {
    // span 1..=10 so both the im2col path and the ≥8-channel nine-tap
    // stride-1 path come up
    let cin = rng.random_range(1..=10);
    let cout = rng.random_range(1..=10);
    let stride = *[(1, 1), (2, 2), (1, 2), (2, 1)]
        .get(rng.random_range(0..4))
        .unwrap();
    let n = rng.random_range(1..=2);
    let h = rng.random_range(1..=9);
    let w = rng.random_range(1..=9);
    (ConvSpec::k3(cout, cin, stride), [n, cin, h, w])
}

pub fn inner<T: Copy + Into<f64>>(a: &[T], b: &[T]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x.into() * y.into()).sum()
}

/// Direct same-padded cross-correlation from the definition:
/// Y[n,oc,oh,ow] = b[oc] + Σ_{ic,ky,kx} W[oc,ic,ky,kx] · X[n,ic,oh·sh+ky−ph,ow·sw+kx−pw]
pub fn direct_conv2d(
    input: &Tensor4<f64>,
    spec: &ConvSpec,
    weights: &Tensor4<f64>,
    bias: &[f64],
) -> Tensor4<f64> {
    let [n, cin, h, w] = input.shape();
    let (ho, wo) = spec.out_size(h, w);
    let (ph, pw) = spec.pad_lo(h, w);
    let mut out = Tensor4::zeros(n, spec.out_channels, ho, wo);
    for s in 0..n {
        for oc in 0..spec.out_channels {
            for oh in 0..ho {
                for ow in 0..wo {
                    let mut acc = bias[oc];
                    for ic in 0..cin {
                        for ky in 0..spec.kh {
                            for kx in 0..spec.kw {
                                let iy = (oh * spec.stride.0 + ky) as isize - ph as isize;
                                let ix = (ow * spec.stride.1 + kx) as isize - pw as isize;
                                if iy >= 0 && iy < h as isize && ix >= 0 && ix < w as isize {
                                    acc += weights.at(oc, ic, ky, kx)
                                        * input.at(s, ic, iy as usize, ix as usize);
                                }
                            }
                        }
                    }
                    out.set(s, oc, oh, ow, acc);
                }
            }
        }
    }
    out
}

/// Direct transposed convolution: scatter every input cell through every tap.
/// Output position for input (oh,ow) and tap (ky,kx) is (oh·sh+ky−ph, ...)
/// where padding comes from the adjoint conv's geometry on the target size.
pub fn direct_convtranspose2d(
    input: &Tensor4<f64>,
    spec: &ConvSpec,
    weights: &Tensor4<f64>,
    bias: &[f64],
    target: (usize, usize),
) -> Tensor4<f64> {
    let [n, cin, h, w] = input.shape();
    let (th, tw) = target;
    let cout = spec.out_channels;
    let adj = ConvSpec::new(cin, cout, (spec.kh, spec.kw), spec.stride);
    let (ph, pw) = adj.pad_lo(th, tw);
    let mut out = Tensor4::zeros(n, cout, th, tw);
    for s in 0..n {
        for oc in 0..cout {
            for ty in 0..th {
                for tx in 0..tw {
                    out.set(s, oc, ty, tx, bias[oc]);
                }
            }
        }
        for ic in 0..cin {
            for oh in 0..h {
                for ow in 0..w {
                    let v = input.at(s, ic, oh, ow);
                    for oc in 0..cout {
                        let wv = |ky: usize, kx: usize| weights.at(ic, oc, ky, kx);
                        for ky in 0..spec.kh {
                            for kx in 0..spec.kw {
                                let ty = (oh * spec.stride.0 + ky) as isize - ph as isize;
                                let tx = (ow * spec.stride.1 + kx) as isize - pw as isize;
                                if ty >= 0 && ty < th as isize && tx >= 0 && tx < tw as isize {
                                    let cur = out.at(s, oc, ty as usize, tx as usize);
                                    out.set(s, oc, ty as usize, tx as usize, cur + v * wv(ky, kx));
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Brute-force 2×2/2 ceil-mode max pool window scan.
pub fn direct_maxpool(input: &Tensor4<f64>) -> Tensor4<f64> {
    let [n, c, h, w] = input.shape();
    let (ho, wo) = (h.div_ceil(2), w.div_ceil(2));
    let mut out = Tensor4::zeros(n, c, ho, wo);
    for s in 0..n {
        for ch in 0..c {
            for oh in 0..ho {
                for ow in 0..wo {
                    let mut best = f64::NEG_INFINITY;
                    for y in oh * 2..(oh * 2 + 2).min(h) {
                        for x in ow * 2..(ow * 2 + 2).min(w) {
                            best = best.max(input.at(s, ch, y, x));
                        }
                    }
                    out.set(s, ch, oh, ow, best);
                }
            }
        }
    }
    out
}

// ── equivalence sweeps ───────────────────────────────────────────────────────
// Each sweep asserts per case (so a failure names the case) and returns the
// worst |Δ| for reporting.

pub fn conv_equivalence_sweep(cases: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for case in 0..cases {
        let (spec, in_shape) = random_spec(&mut rng);
        let input = rand_tensor(&mut rng, in_shape);
        let weights = rand_tensor(&mut rng, spec.weight_shape());
        let bias: Vec<f64> = (0..spec.out_channels)
            .map(|_| rng.random_range(-0.5..0.5))
            .collect();
        let got = conv2d_forward(&input, &spec, &weights, &bias).unwrap();
        let want = direct_conv2d(&input, &spec, &weights, &bias);
        let diff = got.max_abs_diff(&want);
        assert!(diff < 1e-6, "case {case}: conv2d diff {diff}");
        worst = worst.max(diff);
    }
    worst
}

pub fn tconv_equivalence_sweep(cases: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for case in 0..cases {
        let (spec, _) = random_spec(&mut rng);
        // draw a target, derive the tconv input size from it
        let n = rng.random_range(1..=2);
        let th = rng.random_range(1..=9);
        let tw = rng.random_range(1..=9);
        let (h, w) = spec.out_size(th, tw);
        // tconv maps spec.in_channels → spec.out_channels
        let input = rand_tensor(&mut rng, [n, spec.in_channels, h, w]);
        let weights = rand_tensor(&mut rng, spec.tconv_weight_shape());
        let bias: Vec<f64> = (0..spec.out_channels)
            .map(|_| rng.random_range(-0.5..0.5))
            .collect();
        let got = convtranspose2d_forward(&input, &spec, &weights, &bias, (th, tw)).unwrap();
        let want = direct_convtranspose2d(&input, &spec, &weights, &bias, (th, tw));
        let diff = got.max_abs_diff(&want);
        assert!(diff < 1e-6, "case {case}: tconv diff {diff}");
        worst = worst.max(diff);
    }
    worst
}

pub fn pool_equivalence_sweep(cases: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for case in 0..cases {
        let n = rng.random_range(1..=2);
        let c = rng.random_range(1..=4);
        let h = rng.random_range(1..=10);
        let w = rng.random_range(1..=10);
        let input = rand_tensor(&mut rng, [n, c, h, w]);
        let (got, idx) = maxpool2d_forward(&input);
        let want = direct_maxpool(&input);
        let diff = got.max_abs_diff(&want);
        assert!(diff < 1e-6, "case {case}");
        worst = worst.max(diff);
        // backward scatters exactly the forwarded mass
        let go = rand_tensor(&mut rng, got.shape());
        let gi = maxpool2d_backward(&go, &idx).unwrap();
        let sum_gi: f64 = gi.data().iter().sum();
        let sum_go: f64 = go.data().iter().sum();
        assert!((sum_gi - sum_go).abs() < 1e-9, "case {case}: mass leak");
    }
    worst
}

/// <conv(x), y> = <x, tconv(y)> with shared weights — the defining property
/// of the transposed convolution. Returns the worst relative defect.
pub fn adjointness_sweep(cases: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for case in 0..cases {
        let (spec, in_shape) = random_spec(&mut rng);
        let x = rand_tensor(&mut rng, in_shape);
        let [n, _, h, w] = in_shape;
        let (ho, wo) = spec.out_size(h, w);
        let y = rand_tensor(&mut rng, [n, spec.out_channels, ho, wo]);
        let weights = rand_tensor(&mut rng, spec.weight_shape());
        let zeros_out = vec![0.0; spec.out_channels];
        let zeros_in = vec![0.0; spec.in_channels];

        let cx = conv2d_forward(&x, &spec, &weights, &zeros_out).unwrap();
        // adjoint direction: cout → cin, same weight tensor
        let tspec = ConvSpec::k3(spec.in_channels, spec.out_channels, spec.stride);
        let ty = convtranspose2d_forward(&y, &tspec, &weights, &zeros_in, (h, w)).unwrap();

        let lhs = inner(cx.data(), y.data());
        let rhs = inner(x.data(), ty.data());
        let defect = ((lhs - rhs) / lhs.abs().max(rhs.abs()).max(1.0)).abs();
        assert!(defect < 1e-5, "case {case}: <Cx,y>={lhs} vs <x,Cᵀy>={rhs}");
        worst = worst.max(defect);
    }
    worst
}
