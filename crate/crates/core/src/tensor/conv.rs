//! Strided same-padded convolution and its exact adjoint (transposed
//! convolution), implemented as im2col/col2im plus GEMM.
//!
//! Geometry: output spatial size is ceil(input/stride); zero padding is split
//! evenly with the extra element on the high side. That ceil rule is what
//! walks 69×240 down to 3×8 over five pooled units.

use super::{gemm_rm, gemm_rm_at, gemm_rm_bt, Real, Tensor4};
use crate::error::{Error, Result};

/// Geometry of a same-padded (cross-correlation) convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvSpec {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: (usize, usize),
}

impl ConvSpec {
    pub fn new(
        out_channels: usize,
        in_channels: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
    ) -> Self {
        ConvSpec {
            out_channels,
            in_channels,
            kh: kernel.0,
            kw: kernel.1,
            stride,
        }
    }

    /// The 3×3 kernel every layer in this model uses.
    pub fn k3(out_channels: usize, in_channels: usize, stride: (usize, usize)) -> Self {
        ConvSpec::new(out_channels, in_channels, (3, 3), stride)
    }

    pub fn out_size(&self, h: usize, w: usize) -> (usize, usize) {
        (ceil_div(h, self.stride.0), ceil_div(w, self.stride.1))
    }

    /// Low-side padding per dimension. Total pad is max((o−1)·s + k − in, 0),
    /// floored halves go on the low side so the extra element lands high.
    pub fn pad_lo(&self, h: usize, w: usize) -> (usize, usize) {
        let (ho, wo) = self.out_size(h, w);
        let ph = ((ho - 1) * self.stride.0 + self.kh).saturating_sub(h) / 2;
        let pw = ((wo - 1) * self.stride.1 + self.kw).saturating_sub(w) / 2;
        (ph, pw)
    }

    /// Expected weight tensor shape for a forward convolution.
    pub fn weight_shape(&self) -> [usize; 4] {
        [self.out_channels, self.in_channels, self.kh, self.kw]
    }

    /// Expected weight tensor shape when this spec drives a transposed
    /// convolution (input channels lead).
    pub fn tconv_weight_shape(&self) -> [usize; 4] {
        [self.in_channels, self.out_channels, self.kh, self.kw]
    }
}

#[inline]
fn ceil_div(a: usize, b: usize) -> usize {
    a.div_ceil(b)
}

// ── nine-tap direct path ─────────────────────────────────────────────────────
//
// For the ubiquitous same-padded 3×3 stride-1 case the forward and
// grad-input products skip the column matrix: each kernel tap (ky,kx)
// contributes A_tap · (plane shifted by the tap offset), one strided GEMM
// over the whole image treated as a single flat row. Flattening wraps each
// row end onto the next row's start, so the one phantom border column per
// row is subtracted afterwards. This removes the im2col/col2im memory
// traffic that dominates training time on large planes; below
// `TAP_MIN_AREA` pixels the GEMM packing overhead of nine small calls loses
// to plain im2col, so the threshold routes small planes to the legacy path.
// The weight gradient keeps the single unfolded GEMM in all cases — nine
// tall-k tap products measure far slower than one im2col pass.

/// Plane size where nine tap GEMMs start beating one im2col GEMM.
const TAP_MIN_AREA: usize = 1024;

fn tap_path(spec: &ConvSpec, ncols: usize) -> bool {
    spec.stride == (1, 1)
        && (spec.kh, spec.kw) == (3, 3)
        && spec.in_channels >= 8
        && spec.out_channels >= 8
        && ncols >= TAP_MIN_AREA
}

/// Clipped flat output range for shift (sy, sx): every p = oh·w + ow whose
/// tap p + sy·w + sx stays inside the plane, minus the per-row border column
/// that the flat GEMM gets wrong (fixed up by the callers). Returns
/// (oh_lo, oh_hi, p_lo, p_hi) or None when the range is empty.
fn shift_range(h: usize, w: usize, sy: isize, sx: isize) -> Option<(usize, usize, usize, usize)> {
    let oh_lo = (-sy).max(0) as usize;
    let oh_hi = (h as isize - sy.max(0)).max(0) as usize;
    if oh_lo >= oh_hi {
        return None;
    }
    let p_lo = oh_lo * w + (-sx).max(0) as usize;
    let p_hi = oh_hi * w - sx.max(0) as usize;
    if p_lo >= p_hi {
        return None;
    }
    Some((oh_lo, oh_hi, p_lo, p_hi))
}

/// Wrapped border positions for shift (sy, sx): (p, ip) pairs where the flat
/// GEMM used src position ip for output p although the true tap is padding.
fn wrapped_positions(
    oh_lo: usize,
    oh_hi: usize,
    w: usize,
    sy: isize,
    sx: isize,
) -> impl Iterator<Item = (usize, usize)> {
    let range = if sx == 1 { oh_lo..oh_hi - 1 } else { oh_lo + 1..oh_hi };
    range.map(move |oh| {
        if sx == 1 {
            (oh * w + w - 1, ((oh as isize + sy + 1) * w as isize) as usize)
        } else {
            (oh * w, ((oh as isize + sy - 1) * w as isize) as usize + w - 1)
        }
    })
}

/// dst[i, p] += Σ_k a[a_off + i·rsa + k·csa] · src[k, p + sy·w + sx] for every
/// output position whose tap lands in the plane. src holds kdim and dst m
/// channel-major h×w planes.
#[allow(clippy::too_many_arguments)]
fn shifted_accumulate<T: Real>(
    a: &[T],
    a_off: usize,
    rsa: usize,
    csa: usize,
    m: usize,
    kdim: usize,
    src: &[T],
    dst: &mut [T],
    h: usize,
    w: usize,
    sy: isize,
    sx: isize,
) {
    let hw = h * w;
    debug_assert!(src.len() == kdim * hw && dst.len() == m * hw);
    debug_assert!(a_off + (m - 1) * rsa + (kdim - 1) * csa < a.len());
    let Some((oh_lo, oh_hi, p_lo, p_hi)) = shift_range(h, w, sy, sx) else {
        return;
    };
    let off = (p_lo as isize + sy * w as isize + sx) as usize;
    unsafe {
        T::gemm(
            m,
            kdim,
            p_hi - p_lo,
            T::one(),
            a.as_ptr().add(a_off),
            rsa as isize,
            csa as isize,
            src.as_ptr().add(off),
            hw as isize,
            1,
            T::one(),
            dst.as_mut_ptr().add(p_lo),
            hw as isize,
            1,
        );
    }
    if sx == 0 {
        return;
    }
    let mut col = vec![T::zero(); kdim];
    for (p, ip) in wrapped_positions(oh_lo, oh_hi, w, sy, sx) {
        for (k, cv) in col.iter_mut().enumerate() {
            *cv = src[k * hw + ip];
        }
        for mi in 0..m {
            let base = a_off + mi * rsa;
            let mut acc = T::zero();
            for (k, cv) in col.iter().enumerate() {
                acc = acc + a[base + k * csa] * *cv;
            }
            let d = &mut dst[mi * hw + p];
            *d = *d - acc;
        }
    }
}


// ── im2col / col2im ──────────────────────────────────────────────────────────

/// Unfold one sample (cin·h·w) into a (cin·kh·kw) × (ho·wo) column matrix.
/// Out-of-image taps are zero.
pub(crate) fn im2col<T: Real>(img: &[T], h: usize, w: usize, spec: &ConvSpec, col: &mut [T]) {
    let cin = spec.in_channels;
    let (sh, sw) = spec.stride;
    let (ho, wo) = spec.out_size(h, w);
    let (ph, pw) = spec.pad_lo(h, w);
    let ncols = ho * wo;
    debug_assert_eq!(img.len(), cin * h * w);
    debug_assert_eq!(col.len(), cin * spec.kh * spec.kw * ncols);

    let mut k = 0usize;
    for c in 0..cin {
        let plane = &img[c * h * w..(c + 1) * h * w];
        for ky in 0..spec.kh {
            for kx in 0..spec.kw {
                let base = k * ncols;
                k += 1;
                for oh in 0..ho {
                    let iy = (oh * sh + ky) as isize - ph as isize;
                    let dst = &mut col[base + oh * wo..base + (oh + 1) * wo];
                    if iy < 0 || iy >= h as isize {
                        dst.fill(T::zero());
                        continue;
                    }
                    let row = &plane[iy as usize * w..(iy as usize + 1) * w];
                    if sw == 1 {
                        // iw = ow + shift; copy the in-range span in one go
                        let shift = kx as isize - pw as isize;
                        let lo = (-shift).max(0).min(wo as isize) as usize;
                        let hi = (w as isize - shift).clamp(0, wo as isize) as usize;
                        dst[..lo].fill(T::zero());
                        if lo < hi {
                            let s = (lo as isize + shift) as usize;
                            dst[lo..hi].copy_from_slice(&row[s..s + (hi - lo)]);
                        }
                        dst[hi.max(lo)..].fill(T::zero());
                    } else {
                        for (ow, d) in dst.iter_mut().enumerate() {
                            let ix = (ow * sw + kx) as isize - pw as isize;
                            *d = if ix < 0 || ix >= w as isize {
                                T::zero()
                            } else {
                                row[ix as usize]
                            };
                        }
                    }
                }
            }
        }
    }
}

/// Fold a column matrix back onto an image, accumulating overlaps — the exact
/// adjoint of [`im2col`]. `img` is added into, not overwritten.
pub(crate) fn col2im_add<T: Real>(col: &[T], h: usize, w: usize, spec: &ConvSpec, img: &mut [T]) {
    let cin = spec.in_channels;
    let (sh, sw) = spec.stride;
    let (ho, wo) = spec.out_size(h, w);
    let (ph, pw) = spec.pad_lo(h, w);
    let ncols = ho * wo;
    debug_assert_eq!(img.len(), cin * h * w);
    debug_assert_eq!(col.len(), cin * spec.kh * spec.kw * ncols);

    let mut k = 0usize;
    for c in 0..cin {
        let plane = &mut img[c * h * w..(c + 1) * h * w];
        for ky in 0..spec.kh {
            for kx in 0..spec.kw {
                let base = k * ncols;
                k += 1;
                for oh in 0..ho {
                    let iy = (oh * sh + ky) as isize - ph as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let src = &col[base + oh * wo..base + (oh + 1) * wo];
                    let row = &mut plane[iy as usize * w..(iy as usize + 1) * w];
                    if sw == 1 {
                        let shift = kx as isize - pw as isize;
                        let lo = (-shift).max(0).min(wo as isize) as usize;
                        let hi = (w as isize - shift).clamp(0, wo as isize) as usize;
                        if lo < hi {
                            let s = (lo as isize + shift) as usize;
                            for (r, v) in row[s..s + (hi - lo)].iter_mut().zip(&src[lo..hi]) {
                                *r = *r + *v;
                            }
                        }
                    } else {
                        for (ow, v) in src.iter().enumerate() {
                            let ix = (ow * sw + kx) as isize - pw as isize;
                            if ix >= 0 && ix < w as isize {
                                row[ix as usize] = row[ix as usize] + *v;
                            }
                        }
                    }
                }
            }
        }
    }
}

// ── forward convolution ──────────────────────────────────────────────────────

fn check_conv_args<T: Real>(
    input: &Tensor4<T>,
    spec: &ConvSpec,
    weights: &Tensor4<T>,
    bias_len: usize,
    weight_shape: [usize; 4],
    context: &str,
) -> Result<()> {
    if weights.shape() != weight_shape {
        return Err(Error::shape(context, weights.shape(), weight_shape));
    }
    if input.c() != spec.in_channels {
        return Err(Error::shape(
            context,
            input.shape(),
            [input.n(), spec.in_channels, input.h(), input.w()],
        ));
    }
    if bias_len != spec.out_channels {
        return Err(Error::shape(context, [bias_len], [spec.out_channels]));
    }
    Ok(())
}

/// Same-padded strided cross-correlation plus per-channel bias.
pub fn conv2d_forward<T: Real>(
    input: &Tensor4<T>,
    spec: &ConvSpec,
    weights: &Tensor4<T>,
    bias: &[T],
) -> Result<Tensor4<T>> {
    check_conv_args(
        input,
        spec,
        weights,
        bias.len(),
        spec.weight_shape(),
        "conv2d_forward",
    )?;
    let [n, _, h, w] = input.shape();
    let (ho, wo) = spec.out_size(h, w);
    let m = spec.out_channels;
    let kdim = spec.in_channels * spec.kh * spec.kw;
    let ncols = ho * wo;

    let mut out = Tensor4::zeros(n, m, ho, wo);
    if tap_path(spec, ncols) {
        let cin = spec.in_channels;
        // Tap matrices packed contiguous once per call so the GEMM streams
        // them instead of gathering the strided kernel layout per sample.
        let wd = weights.data();
        let mut a_taps = vec![T::zero(); 9 * m * cin];
        for t in 0..9 {
            let at = &mut a_taps[t * m * cin..(t + 1) * m * cin];
            for oc in 0..m {
                for ic in 0..cin {
                    at[oc * cin + ic] = wd[(oc * cin + ic) * 9 + t];
                }
            }
        }
        for s in 0..n {
            let o = out.sample_mut(s);
            for oc in 0..m {
                o[oc * ncols..(oc + 1) * ncols].fill(bias[oc]);
            }
            for ky in 0..3usize {
                for kx in 0..3usize {
                    let t = ky * 3 + kx;
                    shifted_accumulate(
                        &a_taps,
                        t * m * cin,
                        cin,
                        1,
                        m,
                        cin,
                        input.sample(s),
                        o,
                        h,
                        w,
                        ky as isize - 1,
                        kx as isize - 1,
                    );
                }
            }
        }
        return Ok(out);
    }
    let mut col = vec![T::zero(); kdim * ncols];
    for s in 0..n {
        im2col(input.sample(s), h, w, spec, &mut col);
        let o = out.sample_mut(s);
        gemm_rm(m, kdim, ncols, weights.data(), &col, T::zero(), o);
        for oc in 0..m {
            let b = bias[oc];
            for v in &mut o[oc * ncols..(oc + 1) * ncols] {
                *v = *v + b;
            }
        }
    }
    Ok(out)
}

/// Gradients of sum(grad_out ⊙ conv2d_forward(input)) w.r.t. input, weights
/// and bias.
pub fn conv2d_backward<T: Real>(
    grad_out: &Tensor4<T>,
    input: &Tensor4<T>,
    spec: &ConvSpec,
    weights: &Tensor4<T>,
) -> Result<(Tensor4<T>, Tensor4<T>, Vec<T>)> {
    check_conv_args(
        input,
        spec,
        weights,
        spec.out_channels,
        spec.weight_shape(),
        "conv2d_backward",
    )?;
    let [n, _, h, w] = input.shape();
    let (ho, wo) = spec.out_size(h, w);
    let m = spec.out_channels;
    if grad_out.shape() != [n, m, ho, wo] {
        return Err(Error::shape(
            "conv2d_backward: grad_out",
            grad_out.shape(),
            [n, m, ho, wo],
        ));
    }
    let kdim = spec.in_channels * spec.kh * spec.kw;
    let ncols = ho * wo;

    let mut grad_input = Tensor4::zeros(n, spec.in_channels, h, w);
    let mut grad_weights = vec![T::zero(); m * kdim];
    let mut grad_bias = vec![T::zero(); m];

    if tap_path(spec, ncols) {
        let cin = spec.in_channels;
        let wd = weights.data();
        // dX taps transposed and packed contiguous once per call.
        let mut at_taps = vec![T::zero(); 9 * cin * m];
        for t in 0..9 {
            let at = &mut at_taps[t * cin * m..(t + 1) * cin * m];
            for oc in 0..m {
                for ic in 0..cin {
                    at[ic * m + oc] = wd[(oc * cin + ic) * 9 + t];
                }
            }
        }
        let mut col = vec![T::zero(); kdim * ncols];
        for s in 0..n {
            let go = grad_out.sample(s);
            for oc in 0..m {
                let mut acc = T::zero();
                for v in &go[oc * ncols..(oc + 1) * ncols] {
                    acc = acc + *v;
                }
                grad_bias[oc] = grad_bias[oc] + acc;
            }
            let gi = grad_input.sample_mut(s);
            for ky in 0..3usize {
                for kx in 0..3usize {
                    let t = ky * 3 + kx;
                    // dX is the exact adjoint: transposed tap, negated shift
                    shifted_accumulate(
                        &at_taps,
                        t * cin * m,
                        m,
                        1,
                        cin,
                        m,
                        go,
                        gi,
                        h,
                        w,
                        1 - ky as isize,
                        1 - kx as isize,
                    );
                }
            }
            // dW += dY · colᵀ, one unfolded GEMM
            im2col(input.sample(s), h, w, spec, &mut col);
            gemm_rm_bt(m, ncols, kdim, go, &col, T::one(), &mut grad_weights);
        }
        let grad_weights = Tensor4::from_vec(spec.weight_shape(), grad_weights)?;
        return Ok((grad_input, grad_weights, grad_bias));
    }

    let mut col = vec![T::zero(); kdim * ncols];
    let mut gcol = vec![T::zero(); kdim * ncols];

    for s in 0..n {
        let go = grad_out.sample(s); // m × ncols
        for oc in 0..m {
            let mut acc = T::zero();
            for v in &go[oc * ncols..(oc + 1) * ncols] {
                acc = acc + *v;
            }
            grad_bias[oc] = grad_bias[oc] + acc;
        }
        // dW += dY · colᵀ
        im2col(input.sample(s), h, w, spec, &mut col);
        gemm_rm_bt(m, ncols, kdim, go, &col, T::one(), &mut grad_weights);
        // dX = fold(Wᵀ · dY)
        gemm_rm_at(kdim, m, ncols, weights.data(), go, T::zero(), &mut gcol);
        col2im_add(&gcol, h, w, spec, grad_input.sample_mut(s));
    }

    let grad_weights = Tensor4::from_vec(spec.weight_shape(), grad_weights)?;
    Ok((grad_input, grad_weights, grad_bias))
}

// ── transposed convolution ───────────────────────────────────────────────────
//
// Defined as the exact adjoint of the matching strided conv: with shared
// weights, <conv(x), y> = <x, tconv(y)>. The target size is supplied
// explicitly because ceil-division is not invertible (e.g. both 15 and 16
// halve to 8). Weights are stored (in_channels, out_channels, kh, kw).

fn check_tconv_target(spec: &ConvSpec, in_hw: (usize, usize), target: (usize, usize)) -> Result<()> {
    let (th, tw) = target;
    if th == 0 || tw == 0 || spec.out_size(th, tw) != in_hw {
        return Err(Error::invalid(format!(
            "convtranspose2d: target {}×{} is incompatible with input {}×{} at stride {}×{} \
             (need ceil(target/stride) = input)",
            th, tw, in_hw.0, in_hw.1, spec.stride.0, spec.stride.1
        )));
    }
    Ok(())
}

/// Transposed convolution: upsamples (h,w) to the explicit `target` size.
pub fn convtranspose2d_forward<T: Real>(
    input: &Tensor4<T>,
    spec: &ConvSpec,
    weights: &Tensor4<T>,
    bias: &[T],
    target: (usize, usize),
) -> Result<Tensor4<T>> {
    check_conv_args(
        input,
        spec,
        weights,
        bias.len(),
        spec.tconv_weight_shape(),
        "convtranspose2d_forward",
    )?;
    let [n, cin, h, w] = input.shape();
    check_tconv_target(spec, (h, w), target)?;
    let (th, tw) = target;
    let cout = spec.out_channels;
    // The adjoint conv maps (cout, th, tw) → (cin, h, w).
    let adj = ConvSpec::new(cin, cout, (spec.kh, spec.kw), spec.stride);
    let kdim = cout * spec.kh * spec.kw;
    let ncols = h * w;

    let mut out = Tensor4::zeros(n, cout, th, tw);
    let mut gcol = vec![T::zero(); kdim * ncols];
    for s in 0..n {
        // weights as (cin × kdim); spread input back through the taps
        gemm_rm_at(kdim, cin, ncols, weights.data(), input.sample(s), T::zero(), &mut gcol);
        let o = out.sample_mut(s);
        col2im_add(&gcol, th, tw, &adj, o);
        let plane = th * tw;
        for oc in 0..cout {
            let b = bias[oc];
            for v in &mut o[oc * plane..(oc + 1) * plane] {
                *v = *v + b;
            }
        }
    }
    Ok(out)
}

/// Gradients of the transposed convolution. `grad_out` has the target size;
/// running the adjoint conv forward over it recovers grad_input.
pub fn convtranspose2d_backward<T: Real>(
    grad_out: &Tensor4<T>,
    input: &Tensor4<T>,
    spec: &ConvSpec,
    weights: &Tensor4<T>,
) -> Result<(Tensor4<T>, Tensor4<T>, Vec<T>)> {
    check_conv_args(
        input,
        spec,
        weights,
        spec.out_channels,
        spec.tconv_weight_shape(),
        "convtranspose2d_backward",
    )?;
    let [n, cin, h, w] = input.shape();
    let cout = spec.out_channels;
    let [gn, gc, th, tw] = grad_out.shape();
    if gn != n || gc != cout {
        return Err(Error::shape(
            "convtranspose2d_backward: grad_out",
            grad_out.shape(),
            [n, cout, th, tw],
        ));
    }
    check_tconv_target(spec, (h, w), (th, tw))?;
    let adj = ConvSpec::new(cin, cout, (spec.kh, spec.kw), spec.stride);
    let kdim = cout * spec.kh * spec.kw;
    let ncols = h * w;

    let mut grad_input = Tensor4::zeros(n, cin, h, w);
    let mut grad_weights = vec![T::zero(); cin * kdim];
    let mut grad_bias = vec![T::zero(); cout];
    let mut col = vec![T::zero(); kdim * ncols];
    let plane = th * tw;

    for s in 0..n {
        let go = grad_out.sample(s);
        for oc in 0..cout {
            let mut acc = T::zero();
            for v in &go[oc * plane..(oc + 1) * plane] {
                acc = acc + *v;
            }
            grad_bias[oc] = grad_bias[oc] + acc;
        }
        // dX = conv_adj(dY): unfold dY, contract with W
        im2col(go, th, tw, &adj, &mut col);
        gemm_rm(
            cin,
            kdim,
            ncols,
            weights.data(),
            &col,
            T::zero(),
            grad_input.sample_mut(s),
        );
        // dW += X · unfold(dY)ᵀ  (roles of input/grad swap relative to conv)
        gemm_rm_bt(cin, ncols, kdim, input.sample(s), &col, T::one(), &mut grad_weights);
    }

    let grad_weights = Tensor4::from_vec(spec.tconv_weight_shape(), grad_weights)?;
    Ok((grad_input, grad_weights, grad_bias))
}
