//! Downlink precoding: orthogonal and rotated (non-orthogonal) analog beam
//! matrices, the regularized-inverse digital stage, full-digital baselines,
//! beam refinement, and the sum-rate metric.
//!
//! The downlink channel of user k is the transpose `h_k^T` of the uplink
//! vector, so every effective-channel product here is unconjugated.

use std::f64::consts::PI;

use ndarray::{Array2, ArrayView1};
use num_complex::Complex64;

use crate::angle::{oversampled_transform, steering_inner_product};
use crate::channel::{ArrayConfig, UserChannel};
use crate::error::{Error, Result};
use crate::linalg;

/// Analog beam matrix B (M x Q, constant-modulus entries) cascaded with a
/// digital stage P (Q x K); the composite transmit matrix is `B P`.
#[derive(Debug, Clone)]
pub struct HybridPrecoder {
    pub analog: Array2<Complex64>,
    pub digital: Array2<Complex64>,
}

impl HybridPrecoder {
    /// Builds the precoder and rescales the digital stage so the composite
    /// satisfies `trace(P_dl^H P_dl) = power`.
    pub fn normalized(analog: Array2<Complex64>, digital: Array2<Complex64>, power: f64) -> Self {
        let mut precoder = Self { analog, digital };
        let trace = linalg::frobenius(precoder.composite().view()).powi(2);
        if trace > 0.0 {
            let scale = (power / trace).sqrt();
            precoder.digital.mapv_inplace(|z| z * scale);
        }
        precoder
    }

    pub fn composite(&self) -> Array2<Complex64> {
        self.analog.dot(&self.digital)
    }

    /// Composite transmit power `trace(P_dl^H P_dl)`.
    pub fn power(&self) -> f64 {
        linalg::frobenius(self.composite().view()).powi(2)
    }
}

/// A beam picked on the oversampled grid: base index, sub-grid refining
/// offset in [-1/(2M), 1/(2M)], and the captured gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinedBeam {
    pub index: usize,
    pub offset: f64,
    pub gain: Complex64,
}

/// Orthogonal analog matrix: column q is the transposed DFT row at
/// `indices[q]`, entries `exp(-j 2 pi i idx / M) / sqrt(M)`.
pub fn orthogonal_analog(m: usize, indices: &[usize]) -> Array2<Complex64> {
    debug_assert!(indices.iter().all(|&i| i < m));
    let scale = 1.0 / (m as f64).sqrt();
    Array2::from_shape_fn((m, indices.len()), |(i, q)| {
        Complex64::cis(-2.0 * PI * ((i * indices[q]) % m) as f64 / m as f64) * scale
    })
}

/// Rotated analog matrix: column k is the DFT column at `beams[k].index`
/// rotated by the refining offset. Columns are generally non-orthogonal.
pub fn rotated_analog(m: usize, beams: &[RefinedBeam]) -> Array2<Complex64> {
    let scale = 1.0 / (m as f64).sqrt();
    Array2::from_shape_fn((m, beams.len()), |(i, k)| {
        let beam = &beams[k];
        let grid = -2.0 * PI * ((i * beam.index) % m) as f64 / m as f64;
        Complex64::cis(grid - 2.0 * PI * i as f64 * beam.offset) * scale
    })
}

/// Maps the global peak of an oversampled beam response (length `V M`,
/// oversampling `V`) to a base beam index plus refining offset. Ties break
/// toward the lower raw position.
pub fn refined_peak(response: ArrayView1<Complex64>, oversampling: usize) -> RefinedBeam {
    let vm = response.len();
    let v = oversampling;
    assert!(v >= 1 && vm.is_multiple_of(v));
    let m = vm / v;

    let mut peak = 0;
    let mut best = f64::NEG_INFINITY;
    for (u, z) in response.iter().enumerate() {
        let mag = z.norm_sqr();
        if mag > best {
            best = mag;
            peak = u;
        }
    }

    // Split the raw position into the nearest base beam and the signed
    // sub-grid remainder in [-V/2, V/2).
    let nearest = (peak + v / 2) / v;
    let remainder = peak as i64 - (nearest * v) as i64;
    RefinedBeam {
        index: nearest % m,
        offset: remainder as f64 / vm as f64,
        gain: response[peak],
    }
}

/// One-shot refinement: evaluates the rotated transforms for every offset
/// `v/(V M)` via a single zero-padded transform and returns the global peak.
pub fn refine_angle(h: ArrayView1<Complex64>, oversampling: usize) -> RefinedBeam {
    let bd = oversampled_transform(h, oversampling);
    refined_peak(bd.response.view(), oversampling)
}

/// Regularized-inverse digital precoder for the effective downlink channel
/// `G_eff` (K x Q): `P = G_eff^H (G_eff G_eff^H + (K / power) I)^-1`, scaled
/// so `trace(P^H P) = power`.
pub fn mmse_digital(
    effective: &Array2<Complex64>,
    power: f64,
    users: usize,
) -> Result<Array2<Complex64>> {
    if power.is_nan() || power <= 0.0 {
        return Err(Error::NonPositive {
            name: "power",
            value: power,
        });
    }
    if effective
        .iter()
        .any(|z| !z.re.is_finite() || !z.im.is_finite())
    {
        return Err(Error::NonFinite("effective channel"));
    }
    let k = effective.nrows();
    let eff_h = linalg::hermitian(effective.view());
    let mut gram = effective.dot(&eff_h);
    let reg = Complex64::new(users as f64 / power, 0.0);
    for i in 0..k {
        gram[(i, i)] += reg;
    }
    let inv = linalg::invert(&gram).ok_or(Error::Singular)?;
    let mut p = eff_h.dot(&inv);
    let trace = linalg::frobenius(p.view()).powi(2);
    if trace > 0.0 {
        let scale = (power / trace).sqrt();
        p.mapv_inplace(|z| z * scale);
    }
    Ok(p)
}

/// Effective downlink channel through the analog stage: `H^T B` (K x Q).
pub fn effective_channel(
    channels: &Array2<Complex64>,
    analog: &Array2<Complex64>,
) -> Array2<Complex64> {
    channels.t().dot(analog)
}

/// Closed-form effective channel for multipath users and rotated beams.
///
/// Entry (n, q) is `h_n^T (O(psi_q) f_q^T)` expanded path by path with the
/// geometric-sum identity, avoiding the dense M-length products.
pub fn effective_channel_from_paths(
    cfg: &ArrayConfig,
    users: &[UserChannel],
    beams: &[RefinedBeam],
) -> Array2<Complex64> {
    let m = cfg.num_antennas;
    let scale = 1.0 / (m as f64).sqrt();
    Array2::from_shape_fn((users.len(), beams.len()), |(n, q)| {
        let user = &users[n];
        let beam = &beams[q];
        let path_scale = scale / (user.aoas.len() as f64).sqrt();
        let mut acc = Complex64::ZERO;
        for (theta, gain) in user.aoas.iter().zip(&user.gains) {
            let phi = -(cfg.spatial_frequency(*theta) + beam.offset + beam.index as f64 / m as f64);
            acc += gain * steering_inner_product(m, phi);
        }
        acc * path_scale
    })
}

/// Matched-filter (conjugate) transmission, power-normalized.
pub fn mrt_precoder(channels: &Array2<Complex64>, power: f64) -> Array2<Complex64> {
    let mut p = channels.mapv(|z| z.conj());
    let trace = linalg::frobenius(p.view()).powi(2);
    if trace > 0.0 {
        let scale = (power / trace).sqrt();
        p.mapv_inplace(|z| z * scale);
    }
    p
}

/// Full-digital regularized-inverse precoder: the digital stage applied with
/// an identity analog stage.
pub fn fd_mmse_precoder(
    channels: &Array2<Complex64>,
    power: f64,
    users: usize,
) -> Result<Array2<Complex64>> {
    let effective = channels.t().to_owned();
    mmse_digital(&effective, power, users)
}

/// Downlink sum rate in bps/Hz, treating interference as noise:
/// `sum_k log2(1 + |h_k^T p_k|^2 / (sum_{n != k} |h_k^T p_n|^2 + noise_k))`.
pub fn sum_rate(channels: &Array2<Complex64>, composite: &Array2<Complex64>, noise: &[f64]) -> f64 {
    let k = channels.ncols();
    assert_eq!(noise.len(), k, "one noise power per user");
    assert!(
        noise.iter().all(|&n| n > 0.0),
        "noise powers must be positive"
    );
    let streams = composite.ncols();
    let mut rate = 0.0;
    for (user, &noise_power) in noise.iter().enumerate() {
        let h = channels.column(user);
        let mut signal = 0.0;
        let mut interference = 0.0;
        for s in 0..streams {
            let rx = linalg::dot_unconjugated(h, composite.column(s)).norm_sqr();
            if s == user {
                signal = rx;
            } else {
                interference += rx;
            }
        }
        rate += (1.0 + signal / (interference + noise_power)).log2();
    }
    rate
}

/// Extracts the rotated-beam gain seen by one user, `(F O(psi) h)[index]`,
/// without computing the whole transform.
pub fn beam_gain(h: ArrayView1<Complex64>, beam: &RefinedBeam) -> Complex64 {
    let m = h.len();
    let scale = 1.0 / (m as f64).sqrt();
    let mut acc = Complex64::ZERO;
    for (i, &z) in h.iter().enumerate() {
        let grid = -2.0 * PI * ((i * beam.index) % m) as f64 / m as f64;
        acc += z * Complex64::cis(grid - 2.0 * PI * i as f64 * beam.offset);
    }
    acc * scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angle::dft_matrix;
    use crate::channel::{draw_user, steering_vector};
    use crate::seeding::derive_rng;
    use ndarray::Array1;
    use rand::Rng;

    fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Array2<Complex64> {
        Array2::from_shape_fn((rows, cols), |_| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    fn gram_distance_from_identity(b: &Array2<Complex64>) -> f64 {
        let gram = linalg::hermitian(b.view()).dot(b);
        let eye: Array2<Complex64> = Array2::eye(b.ncols());
        linalg::frobenius((&gram - &eye).view())
    }

    #[test]
    fn orthogonal_analog_single_column_is_unit_norm() {
        let b = orthogonal_analog(8, &[3]);
        let col = b.column(0);
        assert!((linalg::vector_norm(col) - 1.0).abs() < 1e-12);
        for i in 0..8 {
            assert!((b[(i, 0)].norm() - 1.0 / 8f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn orthogonal_analog_columns_are_orthonormal() {
        let b = orthogonal_analog(16, &[0, 3, 7, 12]);
        assert!(gram_distance_from_identity(&b) < 1e-10);
        let full: Vec<usize> = (0..16).collect();
        let b = orthogonal_analog(16, &full);
        assert!(gram_distance_from_identity(&b) < 1e-10);
    }

    #[test]
    fn on_grid_path_needs_no_refinement() {
        let m = 32;
        let k0 = 6;
        let cfg = ArrayConfig::half_wavelength(m);
        let theta = (k0 as f64 / m as f64 / cfg.spacing_ratio).acos();
        let alpha = Complex64::new(0.8, -0.3);
        let h = steering_vector(&cfg, theta).unwrap() * alpha;
        let refined = refine_angle(h.view(), 4);
        assert_eq!(refined.index, (m - k0) % m);
        assert_eq!(refined.offset, 0.0);
        assert!((refined.gain.norm() - (m as f64).sqrt() * alpha.norm()).abs() < 1e-10);
    }

    #[test]
    fn half_grid_path_is_caught_exactly_with_two_fold_oversampling() {
        let m = 16;
        let k0 = 5;
        let f = (k0 as f64 + 0.5) / m as f64;
        let alpha = Complex64::new(-0.4, 0.9);
        let h = Array1::from_iter((0..m).map(|i| Complex64::cis(-2.0 * PI * i as f64 * f) * alpha));
        let refined = refine_angle(h.view(), 2);
        let captured = refined.gain.norm_sqr();
        let expected = m as f64 * alpha.norm_sqr();
        assert!(
            (captured - expected).abs() < 1e-8,
            "captured {captured} vs {expected}"
        );
        assert!(refined.offset.abs() <= 1.0 / (2.0 * m as f64) + 1e-15);

        // Dense grid-search oracle at resolution 1/(64 V M): nothing on the
        // continuum beats the refined grid point by more than rounding.
        let v = 2;
        let fm = dft_matrix(m);
        let mut best = 0.0f64;
        let steps = 64 * v * m;
        for s in 0..=steps {
            let psi = -1.0 / (2.0 * m as f64) + s as f64 / steps as f64 / m as f64;
            let rotated = Array1::from_iter(
                h.iter()
                    .enumerate()
                    .map(|(i, z)| z * Complex64::cis(-2.0 * PI * i as f64 * psi)),
            );
            let g = fm.dot(&rotated);
            best = best.max(g.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max));
        }
        assert!(captured >= best - 1e-8);
    }

    #[test]
    fn captured_gain_grows_with_nested_oversampling() {
        let mut rng = derive_rng(8, &[1]);
        let cfg = ArrayConfig::half_wavelength(32);
        for _ in 0..20 {
            let center = rng.random::<f64>() * PI;
            let user = draw_user(&mut rng, &cfg, 1, center, 0.0, 1.0);
            let g1 = refine_angle(user.response.view(), 1).gain.norm();
            let g2 = refine_angle(user.response.view(), 2).gain.norm();
            let g4 = refine_angle(user.response.view(), 4).gain.norm();
            assert!(g2 >= g1 - 1e-12);
            assert!(g4 >= g2 - 1e-12);
        }
    }

    #[test]
    fn zero_rotation_reduces_to_orthogonal_matrix() {
        let beams: Vec<RefinedBeam> = [2usize, 9, 14]
            .iter()
            .map(|&index| RefinedBeam {
                index,
                offset: 0.0,
                gain: Complex64::ZERO,
            })
            .collect();
        let b_rot = rotated_analog(16, &beams);
        let b_obs = orthogonal_analog(16, &[2, 9, 14]);
        assert!(linalg::frobenius((&b_rot - &b_obs).view()) < 1e-14);
    }

    #[test]
    fn shared_index_column_coupling_matches_closed_form() {
        let m = 64;
        let beams = [
            RefinedBeam {
                index: 10,
                offset: 1.0 / 256.0,
                gain: Complex64::ZERO,
            },
            RefinedBeam {
                index: 10,
                offset: -1.0 / 512.0,
                gain: Complex64::ZERO,
            },
        ];
        let b = rotated_analog(m, &beams);
        let dot: Complex64 = (0..m).map(|i| b[(i, 0)].conj() * b[(i, 1)]).sum();
        let expected = steering_inner_product(m, beams[0].offset - beams[1].offset)
            / Complex64::new(m as f64, 0.0);
        assert!((dot - expected).norm() < 1e-12);
        for i in 0..m {
            assert!((b[(i, 1)].norm() - 1.0 / (m as f64).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn single_user_mmse_is_a_matched_filter() {
        let mut rng = derive_rng(8, &[2]);
        let effective = random_matrix(&mut rng, 1, 6);
        let power = 4.0;
        let p = mmse_digital(&effective, power, 1).unwrap();
        // Direction equals the conjugate of the effective row.
        let matched = effective.row(0).mapv(|z| z.conj());
        let dot: Complex64 = matched
            .iter()
            .zip(p.column(0).iter())
            .map(|(a, b)| a.conj() * b)
            .sum();
        let cosine =
            dot.norm() / (linalg::vector_norm(matched.view()) * linalg::vector_norm(p.column(0)));
        assert!((cosine - 1.0).abs() < 1e-10);
        assert!((linalg::frobenius(p.view()).powi(2) - power).abs() / power < 1e-10);
    }

    #[test]
    fn high_power_mmse_approaches_the_pseudo_inverse() {
        // Orthogonal equal-norm rows: the pseudo-inverse is G^H / |row|^2.
        let m = 16;
        let rows = orthogonal_analog(m, &[1, 5, 9]).t().to_owned() * Complex64::new(2.0, 0.0);
        let p = mmse_digital(&rows, 1e9, 3).unwrap();
        let product = rows.dot(&p);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    let ratio = product[(i, j)].norm() / product[(i, i)].norm();
                    assert!(ratio < 1e-2, "off-diagonal leakage {ratio}");
                }
            }
        }
    }

    #[test]
    fn mmse_power_is_exact_for_random_instances() {
        let mut rng = derive_rng(8, &[3]);
        for _ in 0..100 {
            let k = 1 + (rng.random::<u64>() % 6) as usize;
            let q = k + (rng.random::<u64>() % 4) as usize;
            let effective = random_matrix(&mut rng, k, q);
            let power = 0.5 + rng.random::<f64>() * 100.0;
            let p = mmse_digital(&effective, power, k).unwrap();
            let trace = linalg::frobenius(p.view()).powi(2);
            assert!((trace - power).abs() / power < 1e-8);
        }
    }

    #[test]
    fn mmse_rejects_non_finite_input() {
        let mut effective = Array2::from_elem((2, 2), Complex64::new(1.0, 0.0));
        effective[(0, 0)] = Complex64::new(f64::NAN, 0.0);
        assert!(matches!(
            mmse_digital(&effective, 1.0, 2),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn unitary_analog_preserves_frobenius_norm() {
        let mut rng = derive_rng(8, &[4]);
        let m = 16;
        let channels = random_matrix(&mut rng, m, 3);
        let full: Vec<usize> = (0..m).collect();
        let b = orthogonal_analog(m, &full);
        let eff = effective_channel(&channels, &b);
        assert!((linalg::frobenius(eff.view()) - linalg::frobenius(channels.view())).abs() < 1e-10);
    }

    #[test]
    fn on_grid_users_through_matching_beams_are_decoupled() {
        let m = 32;
        let cfg = ArrayConfig::half_wavelength(m);
        let k0s = [3usize, 11];
        let mut channels = Array2::from_elem((m, 2), Complex64::ZERO);
        for (k, &k0) in k0s.iter().enumerate() {
            let theta = (k0 as f64 / m as f64 / cfg.spacing_ratio).acos();
            let h = steering_vector(&cfg, theta).unwrap();
            channels.column_mut(k).assign(&h);
        }
        let indices: Vec<usize> = k0s.iter().map(|&k0| (m - k0) % m).collect();
        let b = orthogonal_analog(m, &indices);
        let eff = effective_channel(&channels, &b);
        for i in 0..2 {
            for j in 0..2 {
                if i != j {
                    assert!(eff[(i, j)].norm() < 1e-10);
                } else {
                    assert!((eff[(i, j)].norm() - (m as f64).sqrt()).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn closed_form_effective_channel_matches_dense_product() {
        let m = 64;
        let cfg = ArrayConfig::half_wavelength(m);
        let mut rng = derive_rng(8, &[5]);
        let users: Vec<UserChannel> = (0..4)
            .map(|_| {
                let center = 0.3 + rng.random::<f64>() * 2.4;
                draw_user(&mut rng, &cfg, 20, center, 1f64.to_radians(), 1.0)
            })
            .collect();
        let beams: Vec<RefinedBeam> = users
            .iter()
            .map(|u| refine_angle(u.response.view(), 4))
            .collect();
        let mut channels = Array2::from_elem((m, users.len()), Complex64::ZERO);
        for (k, u) in users.iter().enumerate() {
            channels.column_mut(k).assign(&u.response);
        }
        let dense = effective_channel(&channels, &rotated_analog(m, &beams));
        let fast = effective_channel_from_paths(&cfg, &users, &beams);
        assert!(linalg::frobenius((&dense - &fast).view()) < 1e-9);
    }

    #[test]
    fn mrt_matches_single_user_mmse_direction() {
        let mut rng = derive_rng(8, &[6]);
        let channels = random_matrix(&mut rng, 12, 1);
        let power = 2.0;
        let mrt = mrt_precoder(&channels, power);
        let fd = fd_mmse_precoder(&channels, power, 1).unwrap();
        let dot: Complex64 = mrt
            .column(0)
            .iter()
            .zip(fd.column(0).iter())
            .map(|(a, b)| a.conj() * b)
            .sum();
        let cosine =
            dot.norm() / (linalg::vector_norm(mrt.column(0)) * linalg::vector_norm(fd.column(0)));
        assert!((cosine - 1.0).abs() < 1e-10);
        assert!((linalg::frobenius(mrt.view()).powi(2) - power).abs() / power < 1e-10);
    }

    #[test]
    fn mrt_on_orthogonal_channels_has_no_cross_talk() {
        let m = 16;
        let b = orthogonal_analog(m, &[2, 7]); // orthonormal columns as channels
        let channels = b.mapv(|z| z.conj() * 3.0);
        let p = mrt_precoder(&channels, 10.0);
        let g = channels.t().dot(&p);
        assert!(g[(0, 1)].norm() < 1e-10);
        assert!(g[(1, 0)].norm() < 1e-10);
    }

    #[test]
    fn fd_mmse_is_the_digital_stage_with_identity_analog() {
        let mut rng = derive_rng(8, &[7]);
        let channels = random_matrix(&mut rng, 10, 3);
        let direct = fd_mmse_precoder(&channels, 5.0, 3).unwrap();
        let via_digital = mmse_digital(&channels.t().to_owned(), 5.0, 3).unwrap();
        assert!(linalg::frobenius((&direct - &via_digital).view()) < 1e-12);
    }

    #[test]
    fn zero_precoder_gives_zero_rate() {
        let mut rng = derive_rng(8, &[8]);
        let channels = random_matrix(&mut rng, 8, 2);
        let composite = Array2::from_elem((8, 2), Complex64::ZERO);
        assert_eq!(sum_rate(&channels, &composite, &[1.0, 1.0]), 0.0);
    }

    #[test]
    fn single_user_matched_rate_is_the_scalar_formula() {
        let mut rng = derive_rng(8, &[9]);
        let channels = random_matrix(&mut rng, 8, 1);
        let power = 3.7;
        let noise = 0.2;
        let composite = mrt_precoder(&channels, power);
        let rate = sum_rate(&channels, &composite, &[noise]);
        let h_norm_sq = linalg::vector_norm(channels.column(0)).powi(2);
        let expected = (1.0 + power * h_norm_sq / noise).log2();
        assert!((rate - expected).abs() < 1e-10);
    }

    #[test]
    fn orthogonal_channels_decompose_into_single_user_rates() {
        let m = 16;
        let base = orthogonal_analog(m, &[1, 6, 11]);
        let channels = base.mapv(|z| z.conj() * 2.0);
        let power = 9.0;
        let noise = [0.5, 0.5, 0.5];
        // Matched transmission is interference-free here.
        let composite = mrt_precoder(&channels, power);
        let total = sum_rate(&channels, &composite, &noise);
        let mut expected = 0.0;
        for (k, &noise_power) in noise.iter().enumerate() {
            let h = channels.column(k);
            let p = composite.column(k);
            let sig = linalg::dot_unconjugated(h, p).norm_sqr();
            expected += (1.0 + sig / noise_power).log2();
        }
        assert!((total - expected).abs() < 1e-10);
    }

    #[test]
    fn beam_gain_matches_transform_entry() {
        let mut rng = derive_rng(8, &[10]);
        let m = 32;
        let h = Array1::from_iter(
            (0..m).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)),
        );
        let beam = RefinedBeam {
            index: 7,
            offset: 1.0 / 128.0,
            gain: Complex64::ZERO,
        };
        let direct = beam_gain(h.view(), &beam);
        let over = oversampled_transform(h.view(), 4);
        // offset 1/128 = 1/(V M) with V = 4: raw position 7*4 + 1.
        assert!((direct - over.response[29]).norm() < 1e-10);
    }
}
