//! Two-step uplink channel estimation with K RF chains.
//!
//! Round 1 connects the RF chains to the first K antennas and locates each
//! user's strongest beam from the zero-padded transform of those K samples.
//! Round 2 points the combiner rows at the located beams and reads the
//! beam-domain gains directly. Two pilot blocks replace the M/K blocks a
//! beam-cycling sweep would need.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::angle::unitary_dft_padded;
use crate::error::{Error, Result};
use crate::linalg;
use crate::precoding::{refined_peak, rotated_analog, RefinedBeam};

/// Unitary K x K pilot matrix (the size-K DFT).
pub fn unitary_pilot(k: usize) -> Array2<Complex64> {
    crate::angle::dft_matrix(k)
}

/// Stage-1 combiner `[I | 0]`: the K RF chains tap the first K antennas.
pub fn stage1_combiner(users: usize, antennas: usize) -> Array2<Complex64> {
    assert!(users <= antennas);
    Array2::from_shape_fn((users, antennas), |(i, j)| {
        if i == j {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::ZERO
        }
    })
}

/// Stage-2 combiner: row k is the DFT row at `beams[k].index`, rotated by the
/// refining offset. This is the receive-side counterpart of the rotated
/// analog transmit matrix.
pub fn stage2_combiner(antennas: usize, beams: &[RefinedBeam]) -> Array2<Complex64> {
    rotated_analog(antennas, beams).t().to_owned()
}

/// One uplink pilot round.
#[derive(Debug, Clone)]
pub struct TrainingObservation {
    /// K x K unitary pilot.
    pub pilot: Array2<Complex64>,
    /// Analog combiner in effect during the round, one row per RF chain.
    pub combiner: Array2<Complex64>,
    /// Per-entry noise variance at the antennas, linear.
    pub noise_variance: f64,
    /// `E (H X + N) X^H`; column k estimates `E h_k`. K x K when the
    /// combiner has one row per user.
    pub observed: Array2<Complex64>,
}

/// Runs one pilot round: `E (H X + N) X^H` with i.i.d. complex Gaussian
/// antenna noise. The SNR is defined per receive antenna against the average
/// received pilot power; pass `f64::INFINITY` for a noiseless round.
pub fn uplink_observation<R: Rng + ?Sized>(
    rng: &mut R,
    channels: &Array2<Complex64>,
    pilot: &Array2<Complex64>,
    combiner: &Array2<Complex64>,
    ul_snr_db: f64,
) -> Result<TrainingObservation> {
    let (m, k) = channels.dim();
    if pilot.dim() != (k, k) {
        return Err(Error::Shape(format!(
            "pilot {:?} for {k} users",
            pilot.dim()
        )));
    }
    if combiner.ncols() != m {
        return Err(Error::Shape(format!(
            "combiner {:?} for {m} antennas",
            combiner.dim()
        )));
    }
    let gram = pilot.dot(&linalg::hermitian(pilot.view()));
    let eye: Array2<Complex64> = Array2::eye(k);
    if linalg::frobenius((&gram - &eye).view()) > 1e-9 {
        return Err(Error::NonUnitaryPilot);
    }

    let signal_power = linalg::frobenius(channels.view()).powi(2) / (m * k) as f64;
    let noise_variance = if ul_snr_db.is_finite() {
        signal_power / 10f64.powf(ul_snr_db / 10.0)
    } else {
        0.0
    };

    let mut received = channels.dot(pilot);
    if noise_variance > 0.0 {
        let sigma = (noise_variance / 2.0).sqrt();
        let normal = Normal::new(0.0, sigma).expect("valid std");
        received.mapv_inplace(|z| z + Complex64::new(normal.sample(rng), normal.sample(rng)));
    }
    let observed = combiner
        .dot(&received)
        .dot(&linalg::hermitian(pilot.view()));
    Ok(TrainingObservation {
        pilot: pilot.clone(),
        combiner: combiner.clone(),
        noise_variance,
        observed,
    })
}

/// Stage-1 beam estimate from K antenna samples: zero-pads to `V M` points,
/// transforms, and returns the global peak. The short record makes a fatter
/// main lobe, but its peak sits where the full transform peaks.
pub fn stage1_beam_estimate(
    partial: &Array1<Complex64>,
    antennas: usize,
    oversampling: usize,
) -> RefinedBeam {
    assert!(partial.len() <= antennas);
    assert!(oversampling >= 1);
    let n = antennas * oversampling;
    let scale = Complex64::new((oversampling as f64).sqrt(), 0.0);
    let padded = unitary_dft_padded(partial.view(), n) * scale;
    refined_peak(padded.view(), oversampling)
}

/// Per-user one-beam channel model fitted by the two training rounds.
#[derive(Debug, Clone)]
pub struct ChannelEstimate {
    /// Estimated beam (index, offset) with the stage-2 gain.
    pub beams: Vec<RefinedBeam>,
    /// Reconstructed M x K channel; column k is the conjugated combiner row
    /// scaled by the estimated gain.
    pub channel: Array2<Complex64>,
}

/// Reads the per-user gains off the stage-2 observation diagonal and
/// reconstructs the one-beam channels.
pub fn stage2_estimate(
    observed: &Array2<Complex64>,
    beams: &[RefinedBeam],
    antennas: usize,
) -> ChannelEstimate {
    let k = beams.len();
    assert_eq!(observed.dim(), (k, k));
    let combiner = stage2_combiner(antennas, beams);
    let mut channel = Array2::from_elem((antennas, k), Complex64::ZERO);
    let mut fitted = Vec::with_capacity(k);
    for (user, beam) in beams.iter().enumerate() {
        let gain = observed[(user, user)];
        for i in 0..antennas {
            channel[(i, user)] = combiner[(user, i)].conj() * gain;
        }
        fitted.push(RefinedBeam { gain, ..*beam });
    }
    ChannelEstimate {
        beams: fitted,
        channel,
    }
}

/// Per-user and mean normalized squared error.
#[derive(Debug, Clone)]
pub struct NmseReport {
    pub per_user: Vec<f64>,
    pub mean: f64,
}

/// `|est_k - true_k|^2 / |true_k|^2` per user, plus the mean over users.
pub fn nmse(estimate: &Array2<Complex64>, truth: &Array2<Complex64>) -> Result<NmseReport> {
    if estimate.dim() != truth.dim() {
        return Err(Error::Shape(format!(
            "{:?} vs {:?}",
            estimate.dim(),
            truth.dim()
        )));
    }
    let k = truth.ncols();
    let mut per_user = Vec::with_capacity(k);
    for user in 0..k {
        let t = truth.column(user);
        let denom = t.iter().map(|z| z.norm_sqr()).sum::<f64>();
        if denom == 0.0 {
            return Err(Error::ZeroVector);
        }
        let num = estimate
            .column(user)
            .iter()
            .zip(t.iter())
            .map(|(e, h)| (e - h).norm_sqr())
            .sum::<f64>();
        per_user.push(num / denom);
    }
    let mean = per_user.iter().sum::<f64>() / k as f64;
    Ok(NmseReport { per_user, mean })
}

/// Result of the full two-round protocol.
#[derive(Debug, Clone)]
pub struct TwoStepOutcome {
    pub estimate: ChannelEstimate,
    /// Raw stage-2 observation `E1 H + noise` (K x K). Its transpose is the
    /// effective downlink channel through the matching analog beams, so the
    /// digital precoder can be computed from it directly.
    pub observed_effective: Array2<Complex64>,
    /// Pilot rounds consumed; always 2.
    pub pilot_rounds: usize,
}

/// Runs both training rounds against the same unitary pilot.
pub fn two_step_estimate<R: Rng + ?Sized>(
    rng: &mut R,
    channels: &Array2<Complex64>,
    oversampling: usize,
    ul_snr_db: f64,
) -> Result<TwoStepOutcome> {
    let (m, k) = channels.dim();
    assert!(k <= m, "more users than antennas");
    let pilot = unitary_pilot(k);
    let mut pilot_rounds = 0;

    let e0 = stage1_combiner(k, m);
    let round1 = uplink_observation(rng, channels, &pilot, &e0, ul_snr_db)?;
    pilot_rounds += 1;
    let beams: Vec<RefinedBeam> = (0..k)
        .map(|user| stage1_beam_estimate(&round1.observed.column(user).to_owned(), m, oversampling))
        .collect();

    let e1 = stage2_combiner(m, &beams);
    let round2 = uplink_observation(rng, channels, &pilot, &e1, ul_snr_db)?;
    pilot_rounds += 1;
    let estimate = stage2_estimate(&round2.observed, &beams, m);

    Ok(TwoStepOutcome {
        estimate,
        observed_effective: round2.observed,
        pilot_rounds,
    })
}
