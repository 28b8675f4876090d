//! Small dense-vector helpers. All transcendental functions go through `libm`
//! so results do not depend on the platform's C library.

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// `ln(sigmoid(x))`, evaluated without overflow for large `|x|`.
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -libm::log1p(libm::exp(-x))
    } else {
        x - libm::log1p(libm::exp(x))
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `out += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], out: &mut [f64]) {
    for (o, v) in out.iter_mut().zip(x) {
        *o += alpha * v;
    }
}

/// `out += M x` for a row-major `rows x cols` matrix.
#[inline]
pub fn matvec_acc(m: &[f64], cols: usize, x: &[f64], out: &mut [f64]) {
    for (row, o) in m.chunks_exact(cols).zip(out.iter_mut()) {
        *o += dot(row, x);
    }
}

/// `out += M^T y` for a row-major `rows x cols` matrix.
#[inline]
pub fn matvec_t_acc(m: &[f64], cols: usize, y: &[f64], out: &mut [f64]) {
    for (row, &yi) in m.chunks_exact(cols).zip(y) {
        axpy(yi, row, out);
    }
}

/// `g += y x^T` for a row-major `len(y) x len(x)` matrix.
#[inline]
pub fn outer_acc(y: &[f64], x: &[f64], g: &mut [f64]) {
    for (row, &yi) in g.chunks_exact_mut(x.len()).zip(y) {
        axpy(yi, x, row);
    }
}

/// In-place softmax with max subtraction.
pub fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = libm::exp(*x - max);
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

pub fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sigmoid_matches_naive_in_safe_range() {
        for &x in &[-5.0, -0.3, 0.0, 0.7, 4.0] {
            let naive = libm::log(sigmoid(x));
            assert!((log_sigmoid(x) - naive).abs() < 1e-12);
        }
        assert!(log_sigmoid(-800.0).is_finite());
        assert!(log_sigmoid(800.0) <= 0.0);
    }

    #[test]
    fn softmax_handles_large_inputs() {
        let mut v = [1000.0, 1000.0];
        softmax_in_place(&mut v);
        assert_eq!(v, [0.5, 0.5]);
    }
}
