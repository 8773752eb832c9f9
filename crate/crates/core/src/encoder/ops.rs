//! Dense row-major kernels with hand-written backward passes.

use super::weights::Scalar;

pub(crate) const LN_EPS: f64 = 1e-5;

/// `a[n×k] · w[k×m] + bias`.
pub(crate) fn linear<T: Scalar>(a: &[T], w: &[T], bias: &[T], n: usize, k: usize, m: usize) -> Vec<T> {
    debug_assert_eq!(a.len(), n * k);
    debug_assert_eq!(w.len(), k * m);
    let mut out = Vec::with_capacity(n * m);
    for _ in 0..n {
        out.extend_from_slice(bias);
    }
    for (row, a_row) in out.chunks_exact_mut(m).zip(a.chunks_exact(k)) {
        for (&av, w_row) in a_row.iter().zip(w.chunks_exact(m)) {
            for (o, &wv) in row.iter_mut().zip(w_row) {
                *o += av * wv;
            }
        }
    }
    out
}

/// Accumulate `dw += aᵀ·g` and `db += Σ_rows g`.
pub(crate) fn linear_backward_params<T: Scalar>(a: &[T], g: &[T], dw: &mut [T], db: &mut [T], k: usize, m: usize) {
    for (a_row, g_row) in a.chunks_exact(k).zip(g.chunks_exact(m)) {
        for (&av, dw_row) in a_row.iter().zip(dw.chunks_exact_mut(m)) {
            for (d, &gv) in dw_row.iter_mut().zip(g_row) {
                *d += av * gv;
            }
        }
        for (d, &gv) in db.iter_mut().zip(g_row) {
            *d += gv;
        }
    }
}

/// `g[n×m] · wᵀ` for `w[k×m]`.
pub(crate) fn linear_backward_input<T: Scalar>(g: &[T], w: &[T], k: usize, m: usize) -> Vec<T> {
    let n = g.len() / m;
    let mut out = Vec::with_capacity(n * k);
    for g_row in g.chunks_exact(m) {
        for w_row in w.chunks_exact(m) {
            out.push(dot(g_row, w_row));
        }
    }
    out
}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub(crate) fn add_assign<T: Scalar>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

pub(crate) struct LnCache<T> {
    xhat: Vec<T>,
    rstd: Vec<T>,
}

pub(crate) fn layer_norm<T: Scalar>(x: &[T], gain: &[T], bias: &[T], d: usize) -> (Vec<T>, LnCache<T>) {
    let n = x.len() / d;
    let inv_d = T::of(1.0 / d as f64);
    let mut y = Vec::with_capacity(x.len());
    let mut xhat = Vec::with_capacity(x.len());
    let mut rstd = Vec::with_capacity(n);
    for row in x.chunks_exact(d) {
        let mean = row.iter().fold(T::zero(), |a, &v| a + v) * inv_d;
        let var = row.iter().fold(T::zero(), |a, &v| a + (v - mean) * (v - mean)) * inv_d;
        let r = T::one() / (var + T::of(LN_EPS)).sqrt();
        rstd.push(r);
        for ((&v, &g), &b) in row.iter().zip(gain).zip(bias) {
            let h = (v - mean) * r;
            xhat.push(h);
            y.push(g * h + b);
        }
    }
    (y, LnCache { xhat, rstd })
}

pub(crate) fn layer_norm_backward<T: Scalar>(
    dy: &[T],
    cache: &LnCache<T>,
    gain: &[T],
    dgain: &mut [T],
    dbias: &mut [T],
    d: usize,
) -> Vec<T> {
    let inv_d = T::of(1.0 / d as f64);
    let mut dx = Vec::with_capacity(dy.len());
    let mut dxhat = vec![T::zero(); d];
    for ((dy_row, xhat_row), &r) in dy.chunks_exact(d).zip(cache.xhat.chunks_exact(d)).zip(&cache.rstd) {
        let mut sum = T::zero();
        let mut sum_xhat = T::zero();
        for j in 0..d {
            dgain[j] += dy_row[j] * xhat_row[j];
            dbias[j] += dy_row[j];
            dxhat[j] = dy_row[j] * gain[j];
            sum += dxhat[j];
            sum_xhat += dxhat[j] * xhat_row[j];
        }
        let mean = sum * inv_d;
        let mean_xhat = sum_xhat * inv_d;
        for j in 0..d {
            dx.push(r * (dxhat[j] - mean - xhat_row[j] * mean_xhat));
        }
    }
    dx
}

const GELU_A: f64 = 0.044715;

fn gelu_c<T: Scalar>() -> T {
    T::of((2.0 / std::f64::consts::PI).sqrt())
}

/// Tanh approximation of GELU.
pub(crate) fn gelu<T: Scalar>(x: T) -> T {
    let t = (gelu_c::<T>() * (x + T::of(GELU_A) * x * x * x)).tanh();
    T::of(0.5) * x * (T::one() + t)
}

pub(crate) fn gelu_grad<T: Scalar>(x: T) -> T {
    let c = gelu_c::<T>();
    let t = (c * (x + T::of(GELU_A) * x * x * x)).tanh();
    let half = T::of(0.5);
    half * (T::one() + t) + half * x * (T::one() - t * t) * c * (T::one() + T::of(3.0 * GELU_A) * x * x)
}

/// In-place numerically stable softmax.
pub(crate) fn softmax_in_place<T: Scalar>(v: &mut [T]) {
    let max = v.iter().fold(T::neg_infinity(), |m, &x| m.max(x));
    let mut sum = T::zero();
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x = *x / sum;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_matches_hand_product() {
        // [1 2] · [[1 0 2], [3 1 0]] + [0.5 0 0]
        let y = linear(&[1.0f64, 2.0], &[1.0, 0.0, 2.0, 3.0, 1.0, 0.0], &[0.5, 0.0, 0.0], 1, 2, 3);
        assert_eq!(y, [7.5, 2.0, 2.0]);
        let back = linear_backward_input(&[1.0f64, 0.0, 1.0], &[1.0, 0.0, 2.0, 3.0, 1.0, 0.0], 2, 3);
        assert_eq!(back, [3.0, 3.0]);
    }

    #[test]
    fn layer_norm_rows_are_standardized() {
        let (y, _) = layer_norm(&[1.0f64, 2.0, 3.0, 4.0], &[1.0; 4], &[0.0; 4], 4);
        let mean: f64 = y.iter().sum::<f64>() / 4.0;
        let var: f64 = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.25 / (1.25 + LN_EPS)).abs() < 1e-12);
    }

    #[test]
    fn gelu_reference_points() {
        assert_eq!(gelu(0.0f64), 0.0);
        // 0.5 · (1 + tanh(√(2/π)·1.044715))
        let expected = 0.5 * (1.0 + ((2.0 / std::f64::consts::PI).sqrt() * 1.044715f64).tanh());
        assert!((gelu(1.0f64) - expected).abs() < 1e-15);
        for x in [-2.0f64, -0.3, 0.0, 0.7, 3.0] {
            let fd = (gelu(x + 1e-6) - gelu(x - 1e-6)) / 2e-6;
            assert!((fd - gelu_grad(x)).abs() < 1e-8);
        }
    }

    #[test]
    fn softmax_sums_to_one() {
        let mut v = [1000.0f64, 1001.0, 999.0];
        softmax_in_place(&mut v);
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(v[1] > v[0] && v[0] > v[2]);
    }
}
