//! Beam/angle-domain machinery: the unitary DFT basis, zero-padded
//! oversampling, beam rotations, compact channel decomposition, and the
//! closed-form steering inner product.
//!
//! Conventions fixed here and relied on by every other module:
//!
//! * `dft_matrix(m)` has entry `(n, i) = exp(-j 2 pi n i / m) / sqrt(m)`.
//! * A spatial tone `h_i = exp(-j 2 pi i f)` with `f = k0/m` on the grid
//!   peaks at beam index `(m - k0) mod m`.
//! * `rotation_matrix(m, psi)` has diagonal `exp(-j 2 pi i psi)`. With this
//!   sign the stride-V offset-v slice of the zero-padded transform equals
//!   `F O(v/(V m)) h` exactly, which is the identity the refinement search
//!   builds on.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView1};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Twiddle factor `exp(-j 2 pi (n i mod m) / m)` with exact integer phase
/// reduction; `n * i` stays well below 2^53 for every supported size.
#[inline]
fn twiddle(n: usize, i: usize, m: usize) -> Complex64 {
    Complex64::cis(-2.0 * PI * ((n * i) % m) as f64 / m as f64)
}

/// Unitary DFT matrix of size `m`.
pub fn dft_matrix(m: usize) -> Array2<Complex64> {
    assert!(m >= 1);
    let scale = 1.0 / (m as f64).sqrt();
    Array2::from_shape_fn((m, m), |(n, i)| twiddle(n, i, m) * scale)
}

/// Unitary DFT of `x` zero-padded to `n` points (`x.len() <= n`).
pub(crate) fn unitary_dft_padded(x: ArrayView1<Complex64>, n: usize) -> Array1<Complex64> {
    assert!(x.len() <= n && n >= 1);
    let scale = 1.0 / (n as f64).sqrt();
    Array1::from_iter((0..n).map(|u| {
        let mut acc = Complex64::ZERO;
        for (i, &v) in x.iter().enumerate() {
            acc += twiddle(u, i, n) * v;
        }
        acc * scale
    }))
}

/// A channel seen through the beam-domain transform.
#[derive(Debug, Clone)]
pub struct BeamDomainChannel {
    /// Transform output, length `V * M`.
    pub response: Array1<Complex64>,
    /// Oversampling factor V (1 = plain DFT).
    pub oversampling: usize,
    /// Index of the user this came from, when relevant.
    pub source_user: Option<usize>,
}

impl BeamDomainChannel {
    /// Base transform size M.
    pub fn base_len(&self) -> usize {
        self.response.len() / self.oversampling
    }

    /// The stride-V slice at offset `v`: entries `v, v + V, v + 2V, ...`.
    ///
    /// Equals `F O(v/(V M)) h` of the source vector.
    pub fn slice_offset(&self, v: usize) -> Array1<Complex64> {
        assert!(v < self.oversampling);
        let step = self.oversampling;
        Array1::from_iter((0..self.base_len()).map(|i| self.response[v + i * step]))
    }
}

/// Beam-domain channel `g = F h`.
pub fn beam_transform(h: ArrayView1<Complex64>) -> BeamDomainChannel {
    oversampled_transform(h, 1)
}

/// Zero-padded transform `sqrt(V) * F_{VM} [h; 0]`, resolution `1/(V M)`.
pub fn oversampled_transform(h: ArrayView1<Complex64>, oversampling: usize) -> BeamDomainChannel {
    assert!(oversampling >= 1);
    let n = h.len() * oversampling;
    let response = unitary_dft_padded(h, n) * Complex64::new((oversampling as f64).sqrt(), 0.0);
    BeamDomainChannel {
        response,
        oversampling,
        source_user: None,
    }
}

/// Diagonal beam-rotation matrix with entries `exp(-j 2 pi i psi)`.
///
/// For refinement use `|psi| <= 1/(2 M)`; any real value is accepted.
pub fn rotation_matrix(m: usize, psi: f64) -> Array2<Complex64> {
    Array2::from_diag(&rotation_diag(m, psi))
}

pub(crate) fn rotation_diag(m: usize, psi: f64) -> Array1<Complex64> {
    Array1::from_iter((0..m).map(|i| Complex64::cis(-2.0 * PI * i as f64 * psi)))
}

/// Geometric sum `sum_{i=0}^{m-1} exp(j 2 pi i phi)` in closed form.
///
/// Near-integer `phi` takes the limit `m * exp(j pi (m-1) r)` with `r` the
/// fractional remainder, avoiding the 0/0 quotient.
pub fn steering_inner_product(m: usize, phi: f64) -> Complex64 {
    let r = phi - phi.round();
    if r.abs() < 1e-9 {
        Complex64::from_polar(m as f64, PI * (m as f64 - 1.0) * r)
    } else {
        let num = Complex64::new(1.0, 0.0) - Complex64::cis(2.0 * PI * m as f64 * phi);
        let den = Complex64::new(1.0, 0.0) - Complex64::cis(2.0 * PI * phi);
        num / den
    }
}

fn norm(v: ArrayView1<Complex64>) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Correlation of two channel directions: the inner product of the
/// unit-normalized vectors. `|result| <= 1` up to rounding.
pub fn correlation(a: ArrayView1<Complex64>, b: ArrayView1<Complex64>) -> Result<Complex64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    let dot: Complex64 = a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum();
    Ok(dot / (na * nb))
}

/// A channel re-expanded over a contiguous window of on-grid beams.
#[derive(Debug, Clone)]
pub struct CompactDecomposition {
    /// Inclusive window `(k1, k2)`; indices are taken modulo M, so `k2` may
    /// exceed `M - 1` to express wrap around beam 0.
    pub window: (usize, usize),
    /// M x (k2 - k1 + 1) matrix of on-grid steering columns.
    pub basis: Array2<Complex64>,
    /// Window coefficients, the matching entries of `F h / sqrt(M)`.
    pub coefficients: Array1<Complex64>,
    /// Relative reconstruction error `|h - basis * coefficients| / |h|`.
    pub reconstruction_error: f64,
}

impl CompactDecomposition {
    pub fn reconstruct(&self) -> Array1<Complex64> {
        self.basis.dot(&self.coefficients)
    }
}

/// Re-expands `h` over the beam window `[k1, k2]` (inclusive, modulo M).
///
/// The basis column for beam `i` is the on-grid steering vector
/// `[exp(j 2 pi n i / M)]_n`, and its coefficient is `g_i / sqrt(M)`, the
/// orthogonal projection of `h` onto that column.
pub fn compact_decompose(
    h: ArrayView1<Complex64>,
    k1: usize,
    k2: usize,
) -> Result<CompactDecomposition> {
    if k2 < k1 {
        return Err(Error::EmptyWindow);
    }
    let m = h.len();
    let width = k2 - k1 + 1;
    if width > m {
        return Err(Error::WindowTooLong {
            len: width,
            size: m,
        });
    }
    let g = beam_transform(h).response;
    let scale = 1.0 / (m as f64).sqrt();
    let basis = Array2::from_shape_fn((m, width), |(n, j)| {
        let beam = (k1 + j) % m;
        twiddle(n, beam, m).conj()
    });
    let coefficients = Array1::from_iter((0..width).map(|j| g[(k1 + j) % m] * scale));
    let residual = &h.to_owned() - &basis.dot(&coefficients);
    let h_norm = norm(h);
    let reconstruction_error = if h_norm == 0.0 {
        0.0
    } else {
        norm(residual.view()) / h_norm
    };
    Ok(CompactDecomposition {
        window: (k1, k2),
        basis,
        coefficients,
        reconstruction_error,
    })
}

/// Indices where `|g_i|` exceeds `threshold * |g| / sqrt(M)` (strictly).
pub fn significant_indices(g: ArrayView1<Complex64>, threshold: f64) -> Vec<usize> {
    assert!(threshold > 0.0);
    let cut = threshold * norm(g) / (g.len() as f64).sqrt();
    g.iter()
        .enumerate()
        .filter(|(_, z)| z.norm() > cut)
        .map(|(i, _)| i)
        .collect()
}

/// Per-user significant beams and their union.
#[derive(Debug, Clone)]
pub struct SignificantBeams {
    /// One sorted index set per user.
    pub per_user: Vec<Vec<usize>>,
    /// Sorted union of all users' sets.
    pub union: Vec<usize>,
}

impl SignificantBeams {
    /// Builds the sets from a K x M matrix of beam-domain rows.
    pub fn from_beam_rows(beam_rows: &Array2<Complex64>, threshold: f64) -> Self {
        let per_user: Vec<Vec<usize>> = beam_rows
            .rows()
            .into_iter()
            .map(|row| significant_indices(row, threshold))
            .collect();
        let mut union: Vec<usize> = per_user.iter().flatten().copied().collect();
        union.sort_unstable();
        union.dedup();
        Self { per_user, union }
    }

    /// Number of occupied beams Q.
    pub fn q(&self) -> usize {
        self.union.len()
    }
}
