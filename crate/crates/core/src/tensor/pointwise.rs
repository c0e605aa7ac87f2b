//! Elementwise kernels: leaky ReLU activation and the mean-reduced ℓ1 loss.

use super::{Real, Tensor4};
use crate::error::{Error, Result};

fn check_slope<T: Real>(slope: T) -> Result<()> {
    if !(slope > T::zero() && slope < T::one()) {
        return Err(Error::invalid(format!(
            "leaky_relu: slope must lie in (0,1), got {slope}"
        )));
    }
    Ok(())
}

/// Elementwise max(x, slope·x) for slope in (0,1).
pub fn leaky_relu<T: Real>(input: &Tensor4<T>, slope: T) -> Result<Tensor4<T>> {
    check_slope(slope)?;
    Ok(input.map(|x| if x >= T::zero() { x } else { slope * x }))
}

/// d/dx of leaky ReLU routed through grad_out; the kink at 0 takes the
/// positive branch.
pub fn leaky_relu_backward<T: Real>(
    grad_out: &Tensor4<T>,
    input: &Tensor4<T>,
    slope: T,
) -> Result<Tensor4<T>> {
    check_slope(slope)?;
    if grad_out.shape() != input.shape() {
        return Err(Error::shape(
            "leaky_relu_backward",
            grad_out.shape(),
            input.shape(),
        ));
    }
    let data = grad_out
        .data()
        .iter()
        .zip(input.data())
        .map(|(&g, &x)| if x >= T::zero() { g } else { slope * g })
        .collect();
    Tensor4::from_vec(input.shape(), data)
}

/// Mean |pred − target| over all entries. Mean (not sum) keeps the loss
/// magnitude independent of clip length.
pub fn l1_loss<T: Real>(pred: &Tensor4<T>, target: &Tensor4<T>) -> Result<T> {
    if pred.shape() != target.shape() {
        return Err(Error::shape("l1_loss", pred.shape(), target.shape()));
    }
    let mut acc = T::zero();
    for (&p, &t) in pred.data().iter().zip(target.data()) {
        acc = acc + (p - t).abs();
    }
    Ok(acc / T::from_f64(pred.len() as f64))
}

/// Gradient of [`l1_loss`] w.r.t. pred: sign(pred − target)/count, with
/// sign(0) = 0.
pub fn l1_loss_backward<T: Real>(pred: &Tensor4<T>, target: &Tensor4<T>) -> Result<Tensor4<T>> {
    if pred.shape() != target.shape() {
        return Err(Error::shape("l1_loss_backward", pred.shape(), target.shape()));
    }
    let inv = T::one() / T::from_f64(pred.len() as f64);
    let data = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| {
            let d = p - t;
            if d > T::zero() {
                inv
            } else if d < T::zero() {
                -inv
            } else {
                T::zero()
            }
        })
        .collect();
    Tensor4::from_vec(pred.shape(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leaky_relu_values() {
        let x = Tensor4::from_vec([1, 1, 1, 3], vec![2.0f64, -2.0, 0.0]).unwrap();
        let y = leaky_relu(&x, 0.2).unwrap();
        assert_eq!(y.data(), &[2.0, -0.4, 0.0]);
    }

    #[test]
    fn leaky_relu_rejects_bad_slope() {
        let x = Tensor4::<f32>::zeros(1, 1, 1, 1);
        assert!(leaky_relu(&x, 0.0).is_err());
        assert!(leaky_relu(&x, 1.0).is_err());
        assert!(leaky_relu(&x, -0.5).is_err());
    }

    #[test]
    fn l1_loss_values() {
        let a = Tensor4::<f64>::full([1, 1, 2, 2], 1.0);
        assert_eq!(l1_loss(&a, &a).unwrap(), 0.0);
        let b = Tensor4::<f64>::full([1, 1, 2, 2], 0.5);
        assert_eq!(l1_loss(&a, &b).unwrap(), 0.5);
    }

    #[test]
    fn l1_loss_rejects_shape_mismatch() {
        let a = Tensor4::<f32>::zeros(1, 1, 2, 2);
        let b = Tensor4::<f32>::zeros(1, 1, 2, 3);
        assert!(l1_loss(&a, &b).is_err());
    }

    #[test]
    fn l1_backward_is_scaled_sign() {
        let p = Tensor4::from_vec([1, 1, 1, 4], vec![1.0f64, -1.0, 0.5, 0.5]).unwrap();
        let t = Tensor4::from_vec([1, 1, 1, 4], vec![0.0f64, 0.0, 0.5, 1.0]).unwrap();
        let g = l1_loss_backward(&p, &t).unwrap();
        assert_eq!(g.data(), &[0.25, -0.25, 0.0, -0.25]);
    }

    #[test]
    fn l1_matches_direct_summation_oracle() {
        let p = Tensor4::from_vec(
            [2, 1, 3, 4],
            (0..24).map(|i| ((i * 13) % 7) as f64 * 0.5 - 1.0).collect(),
        )
        .unwrap();
        let t = Tensor4::from_vec(
            [2, 1, 3, 4],
            (0..24).map(|i| ((i * 5) % 11) as f64 * 0.25 - 1.0).collect(),
        )
        .unwrap();
        let want: f64 = p
            .data()
            .iter()
            .zip(t.data())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / 24.0;
        assert!((l1_loss(&p, &t).unwrap() - want).abs() < 1e-15);
    }
}
