//! Central finite-difference verification of analytic gradients.

use crate::error::{Error, Result};
use crate::num::{c, Real};

use super::tensor::Tensor;

/// Compares an analytic gradient against central finite differences of `f`.
///
/// `probes` lists `(parameter index, flat coordinate)` pairs to perturb; an
/// empty list probes every coordinate of every parameter. Returns the
/// maximum of `|analytic - central| / max(1, |central|)` over the probes.
pub fn finite_diff_check<T: Real>(
    mut f: impl FnMut(&[Tensor<T>]) -> Result<T>,
    params: &[Tensor<T>],
    analytic: &[Tensor<T>],
    h: T,
    probes: &[(usize, usize)],
) -> Result<T> {
    if h <= T::zero() {
        return Err(Error::invalid("finite_diff_check: h must be > 0"));
    }
    if params.len() != analytic.len() {
        return Err(Error::invalid(format!(
            "finite_diff_check: {} params but {} analytic gradients",
            params.len(),
            analytic.len()
        )));
    }

    let all: Vec<(usize, usize)>;
    let probes = if probes.is_empty() {
        all = params
            .iter()
            .enumerate()
            .flat_map(|(p, t)| (0..t.numel()).map(move |i| (p, i)))
            .collect();
        &all
    } else {
        probes
    };

    let mut work: Vec<Tensor<T>> = params.to_vec();
    let mut max_err = T::zero();
    for &(p, i) in probes {
        if p >= params.len() || i >= params[p].numel() {
            return Err(Error::OutOfBounds { context: format!("probe ({p}, {i})") });
        }
        let orig = work[p].data()[i];
        work[p].data_mut()[i] = orig + h;
        let up = f(&work)?;
        work[p].data_mut()[i] = orig - h;
        let down = f(&work)?;
        work[p].data_mut()[i] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFinite {
                context: format!("finite_diff_check: loss at perturbed coordinate ({p}, {i})"),
            });
        }
        let central = (up - down) / (c::<T>(2.0) * h);
        let err = (analytic[p].data()[i] - central).abs() / T::one().max(central.abs());
        if err > max_err {
            max_err = err;
        }
    }
    Ok(max_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grad::tape::Tape;

    #[test]
    fn quadratic_is_exact_up_to_rounding() {
        let w = Tensor::scalar(3.0);
        let f = |p: &[Tensor<f64>]| Ok(p[0].data()[0] * p[0].data()[0]);
        let analytic = [Tensor::scalar(6.0)];
        let err = finite_diff_check(f, &[w], &analytic, 1e-5, &[]).unwrap();
        assert!(err <= 1e-8, "err = {err}");
    }

    #[test]
    fn tanh_matches_tape_gradient() {
        let w = Tensor::scalar(0.5).with_grad();
        let mut tape = Tape::new();
        let v = tape.leaf(w.clone());
        let y = tape.tanh(v).unwrap();
        let grads = tape.backward(y).unwrap();
        let analytic = [grads.wrt(v).unwrap().clone()];
        let f = |p: &[Tensor<f64>]| Ok(p[0].data()[0].tanh());
        let err = finite_diff_check(f, &[w], &analytic, 1e-5, &[]).unwrap();
        assert!(err <= 1e-6, "err = {err}");
    }

    #[test]
    fn nan_loss_is_an_error() {
        let w = Tensor::scalar(1.0);
        let f = |_: &[Tensor<f64>]| Ok(f64::NAN);
        let analytic = [Tensor::scalar(0.0)];
        assert!(matches!(
            finite_diff_check(f, &[w], &analytic, 1e-5, &[]),
            Err(Error::NonFinite { .. })
        ));
    }
}
