//! 2×2 stride-2 max pooling in ceil mode: edge windows shrink instead of the
//! output dropping a row/column, so every input cell belongs to exactly one
//! window and ceil-halving shape arithmetic holds at odd sizes.

use super::{Real, Tensor4};
use crate::error::{Error, Result};

/// Argmax map recorded by the forward pass; routes gradients back.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PoolIndices {
    pub input_shape: [usize; 4],
    pub output_shape: [usize; 4],
    /// Flat index into the input tensor per output element.
    pub argmax: Vec<u32>,
}

/// Returns the pooled tensor and the argmax map. Ties break toward the lowest
/// flat index (scan order: row-major within the window).
pub fn maxpool2d_forward<T: Real>(input: &Tensor4<T>) -> (Tensor4<T>, PoolIndices) {
    let [n, c, h, w] = input.shape();
    let ho = h.div_ceil(2);
    let wo = w.div_ceil(2);
    let mut out = Tensor4::zeros(n, c, ho, wo);
    let mut argmax = vec![0u32; n * c * ho * wo];

    let data = input.data();
    let mut opos = 0usize;
    for s in 0..n {
        for ch in 0..c {
            let plane_base = (s * c + ch) * h * w;
            for oh in 0..ho {
                let y0 = oh * 2;
                let y1 = (y0 + 2).min(h);
                for ow in 0..wo {
                    let x0 = ow * 2;
                    let x1 = (x0 + 2).min(w);
                    let mut best_idx = plane_base + y0 * w + x0;
                    let mut best = data[best_idx];
                    for y in y0..y1 {
                        for x in x0..x1 {
                            let idx = plane_base + y * w + x;
                            if data[idx] > best {
                                best = data[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    out.data_mut()[opos] = best;
                    argmax[opos] = best_idx as u32;
                    opos += 1;
                }
            }
        }
    }

    let indices = PoolIndices {
        input_shape: [n, c, h, w],
        output_shape: [n, c, ho, wo],
        argmax,
    };
    (out, indices)
}

/// Scatters each gradient to its recorded argmax position. Total gradient
/// mass is conserved: sum(grad_input) = sum(grad_out).
pub fn maxpool2d_backward<T: Real>(
    grad_out: &Tensor4<T>,
    indices: &PoolIndices,
) -> Result<Tensor4<T>> {
    if grad_out.shape() != indices.output_shape {
        return Err(Error::shape(
            "maxpool2d_backward: grad_out",
            grad_out.shape(),
            indices.output_shape,
        ));
    }
    if indices.argmax.len() != grad_out.len() {
        return Err(Error::shape(
            "maxpool2d_backward: index map",
            [indices.argmax.len()],
            [grad_out.len()],
        ));
    }
    let [n, c, h, w] = indices.input_shape;
    let in_len = n * c * h * w;
    let mut grad_input = Tensor4::zeros(n, c, h, w);
    let gi = grad_input.data_mut();
    for (pos, &idx) in indices.argmax.iter().enumerate() {
        let idx = idx as usize;
        if idx >= in_len {
            return Err(Error::shape(
                "maxpool2d_backward: argmax out of range",
                [idx],
                [in_len],
            ));
        }
        gi[idx] = gi[idx] + grad_out.data()[pos];
    }
    Ok(grad_input)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pose_matrix_pools_to_ceil_halves() {
        let input = Tensor4::<f32>::zeros(1, 1, 69, 240);
        let (out, idx) = maxpool2d_forward(&input);
        assert_eq!(out.shape(), [1, 1, 35, 120]);
        assert_eq!(idx.output_shape, [1, 1, 35, 120]);
    }

    #[test]
    fn constant_input_ties_break_to_first_element() {
        let input = Tensor4::<f64>::full([1, 1, 4, 4], 3.0);
        let (_, idx) = maxpool2d_forward(&input);
        // windows start at (0,0),(0,2),(2,0),(2,2) → flat 0,2,8,10
        assert_eq!(idx.argmax, vec![0, 2, 8, 10]);
        let go = Tensor4::<f64>::full([1, 1, 2, 2], 1.0);
        let gi = maxpool2d_backward(&go, &idx).unwrap();
        assert_eq!(gi.at(0, 0, 0, 0), 1.0);
        assert_eq!(gi.at(0, 0, 0, 1), 0.0);
        assert_eq!(gi.at(0, 0, 2, 2), 1.0);
    }

    #[test]
    fn odd_edges_use_shrunk_windows() {
        let input = Tensor4::from_vec(
            [1, 1, 3, 3],
            vec![1.0f64, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0],
        )
        .unwrap();
        let (out, idx) = maxpool2d_forward(&input);
        assert_eq!(out.shape(), [1, 1, 2, 2]);
        assert_eq!(out.data(), &[5.0, 6.0, 8.0, 9.0]);
        assert_eq!(idx.argmax, vec![4, 5, 7, 8]);
    }

    #[test]
    fn gradient_mass_is_conserved() {
        let vals: Vec<f64> = (0..60).map(|i| ((i * 37) % 13) as f64 - 6.0).collect();
        let input = Tensor4::from_vec([1, 2, 5, 6], vals).unwrap();
        let (out, idx) = maxpool2d_forward(&input);
        let go = Tensor4::from_vec(
            out.shape(),
            (0..out.len()).map(|i| (i as f64) * 0.31 - 2.0).collect(),
        )
        .unwrap();
        let gi = maxpool2d_backward(&go, &idx).unwrap();
        let sum_in: f64 = gi.data().iter().sum();
        let sum_out: f64 = go.data().iter().sum();
        assert!((sum_in - sum_out).abs() < 1e-12);
    }

    #[test]
    fn inconsistent_index_map_is_rejected() {
        let input = Tensor4::<f32>::zeros(1, 1, 4, 4);
        let (out, mut idx) = maxpool2d_forward(&input);
        let go = Tensor4::<f32>::zeros(1, 1, 2, 2);
        idx.argmax[0] = 999; // out of range for a 16-element input
        assert!(maxpool2d_backward(&go, &idx).is_err());
        let (_, idx2) = maxpool2d_forward(&Tensor4::<f32>::zeros(1, 1, 6, 6));
        assert!(maxpool2d_backward(&go, &idx2).is_err());
        let _ = out;
    }
}
