//! Pure forward kernels. The tape records these and replays matching
//! adjoint rules in [`super::tape`]; inference paths call them directly.

use crate::error::{Error, Result};
use crate::num::Real;

use super::tensor::Tensor;

fn require_same_shape<T: Real>(op: &'static str, a: &Tensor<T>, b: &Tensor<T>) -> Result<()> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(Error::ShapeMismatch {
            op,
            detail: format!("{:?} vs {:?}", a.shape(), b.shape()),
        })
    }
}

pub fn add<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    require_same_shape("add", a, b)?;
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| x + y).collect();
    Tensor::new(a.shape().to_vec(), data)
}

pub fn sub<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    require_same_shape("sub", a, b)?;
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| x - y).collect();
    Tensor::new(a.shape().to_vec(), data)
}

pub fn mul<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    require_same_shape("mul", a, b)?;
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| x * y).collect();
    Tensor::new(a.shape().to_vec(), data)
}

pub fn scale<T: Real>(a: &Tensor<T>, k: T) -> Result<Tensor<T>> {
    let data = a.data().iter().map(|&x| x * k).collect();
    Tensor::new(a.shape().to_vec(), data)
}

pub fn shift<T: Real>(a: &Tensor<T>, k: T) -> Result<Tensor<T>> {
    let data = a.data().iter().map(|&x| x + k).collect();
    Tensor::new(a.shape().to_vec(), data)
}

pub fn recip<T: Real>(a: &Tensor<T>) -> Result<Tensor<T>> {
    let data = a.data().iter().map(|&x| x.recip()).collect();
    Tensor::new(a.shape().to_vec(), data)
}

pub fn relu<T: Real>(a: &Tensor<T>) -> Result<Tensor<T>> {
    let data = a.data().iter().map(|&x| if x > T::zero() { x } else { T::zero() }).collect();
    Tensor::new(a.shape().to_vec(), data)
}

pub fn tanh<T: Real>(a: &Tensor<T>) -> Result<Tensor<T>> {
    let data = a.data().iter().map(|&x| x.tanh()).collect();
    Tensor::new(a.shape().to_vec(), data)
}

pub fn square<T: Real>(a: &Tensor<T>) -> Result<Tensor<T>> {
    let data = a.data().iter().map(|&x| x * x).collect();
    Tensor::new(a.shape().to_vec(), data)
}

pub fn sum<T: Real>(a: &Tensor<T>) -> Result<Tensor<T>> {
    let mut acc = T::zero();
    for &v in a.data() {
        acc = acc + v;
    }
    Ok(Tensor::scalar(acc))
}

pub fn dot<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    if a.shape().len() != 1 || b.shape().len() != 1 {
        return Err(Error::ShapeMismatch {
            op: "dot",
            detail: format!("wants two vectors, got {:?} and {:?}", a.shape(), b.shape()),
        });
    }
    require_same_shape("dot", a, b)?;
    let mut acc = T::zero();
    for (&x, &y) in a.data().iter().zip(b.data()) {
        acc = acc + x * y;
    }
    Ok(Tensor::scalar(acc))
}

/// Channel-wise bias: `x` has shape `[c, h, w]`, `b` has shape `[c]`.
pub fn bias_add<T: Real>(x: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    if x.shape().len() != 3 || b.shape().len() != 1 || x.shape()[0] != b.shape()[0] {
        return Err(Error::ShapeMismatch {
            op: "bias_add",
            detail: format!("{:?} with bias {:?}", x.shape(), b.shape()),
        });
    }
    let plane = x.shape()[1] * x.shape()[2];
    let mut data = x.data().to_vec();
    for (ch, &bv) in b.data().iter().enumerate() {
        for v in &mut data[ch * plane..(ch + 1) * plane] {
            *v = *v + bv;
        }
    }
    Tensor::new(x.shape().to_vec(), data)
}

/// Normalizes each row of an `[n, d]` matrix to unit Euclidean norm.
/// A zero row stays zero (and contributes zero gradient).
pub fn l2norm_rows<T: Real>(a: &Tensor<T>) -> Result<Tensor<T>> {
    if a.shape().len() != 2 {
        return Err(Error::ShapeMismatch {
            op: "l2norm_rows",
            detail: format!("wants a matrix, got {:?}", a.shape()),
        });
    }
    let (n, d) = (a.shape()[0], a.shape()[1]);
    let mut data = a.data().to_vec();
    for r in 0..n {
        let row = &mut data[r * d..(r + 1) * d];
        let mut sq = T::zero();
        for &v in row.iter() {
            sq = sq + v * v;
        }
        if sq > T::zero() {
            let norm = sq.sqrt();
            for v in row.iter_mut() {
                *v = *v / norm;
            }
        }
    }
    Tensor::new(a.shape().to_vec(), data)
}

/// Direct 2D convolution, stride 1, symmetric zero padding `(k-1)/2` so the
/// spatial size is preserved. `x`: `[c_in, h, w]`, `w`: `[c_out, c_in, k, k]`
/// with odd `k`; output `[c_out, h, w]`.
pub fn conv2d<T: Real>(x: &Tensor<T>, weight: &Tensor<T>) -> Result<Tensor<T>> {
    let (xs, ws) = (x.shape(), weight.shape());
    if xs.len() != 3 || ws.len() != 4 || ws[1] != xs[0] || ws[2] != ws[3] || ws[2] % 2 == 0 {
        return Err(Error::ShapeMismatch {
            op: "conv2d",
            detail: format!("input {xs:?} with kernel {ws:?} (kernel must be [co, ci, k, k], k odd, ci matching)"),
        });
    }
    let (c_in, h, w) = (xs[0], xs[1], xs[2]);
    let (c_out, k) = (ws[0], ws[2]);
    let pad = (k - 1) / 2;
    let mut out = vec![T::zero(); c_out * h * w];
    let xd = x.data();
    let wd = weight.data();
    for co in 0..c_out {
        for ci in 0..c_in {
            let wbase = ((co * c_in) + ci) * k * k;
            let xbase = ci * h * w;
            for oy in 0..h {
                for ox in 0..w {
                    let mut acc = T::zero();
                    for dy in 0..k {
                        let iy = oy as isize + dy as isize - pad as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let wrow = wbase + dy * k;
                        let xrow = xbase + iy as usize * w;
                        for dx in 0..k {
                            let ix = ox as isize + dx as isize - pad as isize;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            acc = acc + xd[xrow + ix as usize] * wd[wrow + dx];
                        }
                    }
                    out[(co * h + oy) * w + ox] = out[(co * h + oy) * w + ox] + acc;
                }
            }
        }
    }
    Tensor::new(vec![c_out, h, w], out)
}

/// Permutes a `[c, h, w]` feature volume into `[h*w, c]` rows (one row per
/// pixel, row-major over pixels).
pub fn channels_to_rows<T: Real>(x: &Tensor<T>) -> Result<Tensor<T>> {
    if x.shape().len() != 3 {
        return Err(Error::ShapeMismatch {
            op: "channels_to_rows",
            detail: format!("wants [c, h, w], got {:?}", x.shape()),
        });
    }
    let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let plane = h * w;
    let mut out = vec![T::zero(); c * plane];
    let xd = x.data();
    for ch in 0..c {
        for p in 0..plane {
            out[p * c + ch] = xd[ch * plane + p];
        }
    }
    Tensor::new(vec![plane, c], out)
}

pub fn gather_row<T: Real>(m: &Tensor<T>, row: usize) -> Result<Tensor<T>> {
    if m.shape().len() != 2 {
        return Err(Error::ShapeMismatch {
            op: "gather_row",
            detail: format!("wants a matrix, got {:?}", m.shape()),
        });
    }
    let (n, d) = (m.shape()[0], m.shape()[1]);
    if row >= n {
        return Err(Error::OutOfBounds { context: format!("row {row} of {n}") });
    }
    Tensor::new(vec![d], m.data()[row * d..(row + 1) * d].to_vec())
}

fn check_rows<T: Real>(op: &'static str, m: &Tensor<T>, rows: &[usize]) -> Result<usize> {
    if m.shape().len() != 2 {
        return Err(Error::ShapeMismatch { op, detail: format!("wants a matrix, got {:?}", m.shape()) });
    }
    let n = m.shape()[0];
    if let Some(&bad) = rows.iter().find(|&&r| r >= n) {
        return Err(Error::OutOfBounds { context: format!("{op}: row {bad} of {n}") });
    }
    Ok(m.shape()[1])
}

/// Sum of squared Euclidean distances over all unordered row pairs.
///
/// This is kept as a single fused kernel (rather than one node per pair) so
/// that both its cost and its adjoint's cost scale with the number of pairs,
/// which is the quantity the sampled-vs-exhaustive benchmark measures.
pub fn pair_sqdist_within<T: Real>(m: &Tensor<T>, rows: &[usize]) -> Result<Tensor<T>> {
    let d = check_rows("pair_sqdist_within", m, rows)?;
    let md = m.data();
    let mut acc = T::zero();
    for i in 0..rows.len() {
        let a = &md[rows[i] * d..rows[i] * d + d];
        for j in (i + 1)..rows.len() {
            let b = &md[rows[j] * d..rows[j] * d + d];
            let mut s = T::zero();
            for (x, y) in a.iter().zip(b) {
                let diff = *x - *y;
                s = s + diff * diff;
            }
            acc = acc + s;
        }
    }
    Ok(Tensor::scalar(acc))
}

/// Sum of squared Euclidean distances over the `left x right` row pairs.
pub fn pair_sqdist_between<T: Real>(m: &Tensor<T>, left: &[usize], right: &[usize]) -> Result<Tensor<T>> {
    let d = check_rows("pair_sqdist_between", m, left)?;
    check_rows("pair_sqdist_between", m, right)?;
    let md = m.data();
    let mut acc = T::zero();
    for &i in left {
        let a = &md[i * d..i * d + d];
        for &j in right {
            let b = &md[j * d..j * d + d];
            let mut s = T::zero();
            for (x, y) in a.iter().zip(b) {
                let diff = *x - *y;
                s = s + diff * diff;
            }
            acc = acc + s;
        }
    }
    Ok(Tensor::scalar(acc))
}

/// Sum of `1 - <row_i, row_j>` over all unordered row pairs.
pub fn pair_one_minus_dot_within<T: Real>(m: &Tensor<T>, rows: &[usize]) -> Result<Tensor<T>> {
    let d = check_rows("pair_one_minus_dot_within", m, rows)?;
    let md = m.data();
    let mut acc = T::zero();
    for i in 0..rows.len() {
        let a = &md[rows[i] * d..rows[i] * d + d];
        for j in (i + 1)..rows.len() {
            let b = &md[rows[j] * d..rows[j] * d + d];
            let mut s = T::zero();
            for (x, y) in a.iter().zip(b) {
                s = s + *x * *y;
            }
            acc = acc + (T::one() - s);
        }
    }
    Ok(Tensor::scalar(acc))
}

/// Sum of `1 + <row_i, row_j>` over the `left x right` row pairs.
pub fn pair_one_plus_dot_between<T: Real>(m: &Tensor<T>, left: &[usize], right: &[usize]) -> Result<Tensor<T>> {
    let d = check_rows("pair_one_plus_dot_between", m, left)?;
    check_rows("pair_one_plus_dot_between", m, right)?;
    let md = m.data();
    let mut acc = T::zero();
    for &i in left {
        let a = &md[i * d..i * d + d];
        for &j in right {
            let b = &md[j * d..j * d + d];
            let mut s = T::zero();
            for (x, y) in a.iter().zip(b) {
                s = s + *x * *y;
            }
            acc = acc + (T::one() + s);
        }
    }
    Ok(Tensor::scalar(acc))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_elementwise() {
        let a = Tensor::from_vec(vec![1.0, 2.0]);
        let b = Tensor::from_vec(vec![3.0, 4.0]);
        assert_eq!(add(&a, &b).unwrap().data(), &[4.0, 6.0]);
    }

    #[test]
    fn add_shape_mismatch_names_op() {
        let a = Tensor::from_vec(vec![1.0, 2.0]);
        let b = Tensor::from_vec(vec![3.0]);
        let err = add(&a, &b).unwrap_err().to_string();
        assert!(err.contains("add"), "{err}");
        assert!(err.contains("[2]") && err.contains("[1]"), "{err}");
    }

    #[test]
    fn l2norm_rows_345_triangle() {
        let a = Tensor::new(vec![1, 2], vec![3.0, 4.0]).unwrap();
        let n = l2norm_rows(&a).unwrap();
        assert_eq!(n.data(), &[0.6, 0.8]);
    }

    #[test]
    fn l2norm_rows_zero_row_stays_zero() {
        let a = Tensor::<f64>::new(vec![2, 2], vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let n = l2norm_rows(&a).unwrap();
        assert_eq!(&n.data()[..2], &[0.0, 0.0]);
        let norm = (n.data()[2] * n.data()[2] + n.data()[3] * n.data()[3]).sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn conv2d_ones_center_is_nine() {
        // 3x3 ones kernel over a 3x3 ones image with zero padding:
        // full overlap only at the center.
        let x = Tensor::new(vec![1, 3, 3], vec![1.0; 9]).unwrap();
        let w = Tensor::new(vec![1, 1, 3, 3], vec![1.0; 9]).unwrap();
        let y = conv2d(&x, &w).unwrap();
        assert_eq!(y.data()[4], 9.0);
        assert_eq!(y.data()[0], 4.0); // corner sees a 2x2 window
        assert_eq!(y.data()[1], 6.0); // edge sees a 2x3 window
    }

    /// Independent oracle: nested-loop convolution written directly from the
    /// padded-sum definition, with explicit padding buffer.
    fn conv2d_oracle(x: &Tensor<f64>, w: &Tensor<f64>) -> Tensor<f64> {
        let (ci, h, wid) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let (co, k) = (w.shape()[0], w.shape()[2]);
        let pad = (k - 1) / 2;
        let (ph, pw) = (h + 2 * pad, wid + 2 * pad);
        let mut padded = vec![0.0; ci * ph * pw];
        for c in 0..ci {
            for y in 0..h {
                for xx in 0..wid {
                    padded[(c * ph + y + pad) * pw + xx + pad] = x.data()[(c * h + y) * wid + xx];
                }
            }
        }
        let mut out = vec![0.0; co * h * wid];
        for o in 0..co {
            for y in 0..h {
                for xx in 0..wid {
                    let mut acc = 0.0;
                    for c in 0..ci {
                        for dy in 0..k {
                            for dx in 0..k {
                                acc += padded[(c * ph + y + dy) * pw + xx + dx]
                                    * w.data()[(((o * ci) + c) * k + dy) * k + dx];
                            }
                        }
                    }
                    out[(o * h + y) * wid + xx] = acc;
                }
            }
        }
        Tensor::new(vec![co, h, wid], out).unwrap()
    }

    #[test]
    fn conv2d_matches_padded_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let x = Tensor::new(vec![2, 5, 4], (0..40).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let w = Tensor::new(vec![3, 2, 3, 3], (0..54).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let got = conv2d(&x, &w).unwrap();
        let want = conv2d_oracle(&x, &w);
        for (g, e) in got.data().iter().zip(want.data()) {
            assert!((g - e).abs() < 1e-12);
        }
    }

    #[test]
    fn pairwise_sums_match_naive() {
        let m = Tensor::<f64>::new(vec![4, 2], vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0, -1.0, 0.5]).unwrap();
        let rows = [0usize, 1, 2];
        let got = pair_sqdist_within(&m, &rows).unwrap().scalar_value().unwrap();
        let mut want = 0.0f64;
        for i in 0..3 {
            for j in (i + 1)..3 {
                let (a, b) = (&m.data()[rows[i] * 2..rows[i] * 2 + 2], &m.data()[rows[j] * 2..rows[j] * 2 + 2]);
                want += (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
            }
        }
        assert!((got - want).abs() < 1e-12);

        let between = pair_sqdist_between(&m, &[0, 1], &[3]).unwrap().scalar_value().unwrap();
        let w2 = (1.0f64 - -1.0).powi(2) + (0.0f64 - 0.5).powi(2) + (0.0f64 - -1.0).powi(2) + (1.0f64 - 0.5).powi(2);
        assert!((between - w2).abs() < 1e-12);
    }

    #[test]
    fn channels_to_rows_layout() {
        // c=2, h=1, w=2: planes [1,2] and [3,4] -> rows [[1,3],[2,4]].
        let x = Tensor::new(vec![2, 1, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let r = channels_to_rows(&x).unwrap();
        assert_eq!(r.shape(), &[2, 2]);
        assert_eq!(r.data(), &[1.0, 3.0, 2.0, 4.0]);
    }
}
