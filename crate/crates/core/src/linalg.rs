//! Small dense complex helpers shared by the precoding and estimation paths.

use ndarray::{Array2, ArrayView1, ArrayView2};
use num_complex::Complex64;

pub(crate) fn hermitian(a: ArrayView2<Complex64>) -> Array2<Complex64> {
    a.t().mapv(|z| z.conj())
}

pub(crate) fn frobenius(a: ArrayView2<Complex64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg_attr(not(test), allow(dead_code))]
pub(crate) fn vector_norm(v: ArrayView1<Complex64>) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Column dot without conjugation: `a^T b`.
pub(crate) fn dot_unconjugated(a: ArrayView1<Complex64>, b: ArrayView1<Complex64>) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Gauss-Jordan inverse with partial pivoting. Returns `None` when a pivot
/// collapses; callers only invert regularized Gram matrices where that
/// cannot happen for finite inputs.
pub(crate) fn invert(a: &Array2<Complex64>) -> Option<Array2<Complex64>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "inverse of a non-square matrix");
    let mut work = a.clone();
    let mut inv = Array2::eye(n);

    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_mag = work[(col, col)].norm();
        for row in (col + 1)..n {
            let mag = work[(row, col)].norm();
            if mag > pivot_mag {
                pivot_mag = mag;
                pivot_row = row;
            }
        }
        if pivot_mag < 1e-300 || !pivot_mag.is_finite() {
            return None;
        }
        if pivot_row != col {
            for j in 0..n {
                work.swap((col, j), (pivot_row, j));
                inv.swap((col, j), (pivot_row, j));
            }
        }
        let pivot = work[(col, col)];
        for j in 0..n {
            work[(col, j)] /= pivot;
            inv[(col, j)] /= pivot;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = work[(row, col)];
            if factor.norm() == 0.0 {
                continue;
            }
            for j in 0..n {
                let w = work[(col, j)] * factor;
                work[(row, j)] -= w;
                let v = inv[(col, j)] * factor;
                inv[(row, j)] -= v;
            }
        }
    }
    Some(inv)
}
