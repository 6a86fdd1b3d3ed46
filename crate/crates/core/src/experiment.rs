//! Monte-Carlo experiment runners and CSV emission.
//!
//! Trials parallelize over a rayon pool; every random draw comes from a
//! stream keyed by (seed, experiment, trial, purpose, user), so the output
//! is bit-identical regardless of thread count. Downlink channels are
//! normalized by the user noise amplitude before precoding, which makes the
//! `K / power` regularizer of the digital stage the standard MMSE loading
//! and leaves unit noise power in the rate metric.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::channel::{apply_link_budget, draw_cell_position, draw_user, ArrayConfig, LinkBudget};
use crate::config::{ExperimentConfig, Method, Scenario};
use crate::error::Result;
use crate::estimation::{nmse, two_step_estimate};
use crate::precoding::{
    fd_mmse_precoder, mmse_digital, mrt_precoder, orthogonal_analog, rotated_analog, sum_rate,
    HybridPrecoder,
};
use crate::seeding::derive_rng;

pub const SUMRATE_EXPERIMENT: &str = "sumrate-cdf";
pub const NMSE_EXPERIMENT: &str = "nmse-sweep";
pub const ORTHOGONALITY_EXPERIMENT: &str = "lemma1";

/// Stream labels; the exact values are frozen so result files stay stable.
mod label {
    pub const SUMRATE: u64 = 1;
    pub const NMSE: u64 = 2;
    pub const ORTHOGONALITY: u64 = 3;
    pub const GEOMETRY: u64 = 10;
    pub const FADING: u64 = 11;
    pub const SHADOWING: u64 = 12;
    pub const TRAINING: u64 = 13;
}

/// One measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub trial: u64,
    pub method: String,
    pub metric: String,
    pub value: f64,
}

/// Percentile summary of one (method, metric) series.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub metric: String,
    pub percentile: u8,
    pub value: f64,
}

/// All rows of one experiment run plus percentile summaries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
    pub summaries: Vec<SummaryRow>,
}

impl ResultTable {
    /// Values of a (method, metric) series in row order.
    pub fn values(&self, method: &str, metric: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.method == method && r.metric == metric)
            .map(|r| r.value)
            .collect()
    }

    /// Median of a (method, metric) series.
    pub fn median(&self, method: &str, metric: &str) -> Option<f64> {
        let mut values = self.values(method, metric);
        if values.is_empty() {
            return None;
        }
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Some(percentile_of_sorted(&values, 50.0))
    }

    /// Summary value recorded for a (method, metric, percentile).
    pub fn summary(&self, method: &str, metric: &str, percentile: u8) -> Option<f64> {
        self.summaries
            .iter()
            .find(|s| s.method == method && s.metric == metric && s.percentile == percentile)
            .map(|s| s.value)
    }
}

fn percentile_of_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let rank = (p / 100.0) * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let w = rank - lo as f64;
        sorted[lo] * (1.0 - w) + sorted[hi] * w
    }
}

fn push_summaries(table: &mut ResultTable, method: &str, metric: &str) {
    let mut values = table.values(method, metric);
    if values.is_empty() {
        return;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for p in [5u8, 25, 50, 75, 95] {
        table.summaries.push(SummaryRow {
            method: method.to_string(),
            metric: metric.to_string(),
            percentile: p,
            value: percentile_of_sorted(&values, p as f64),
        });
    }
}

/// Per-trial downlink channels, scaled by the link budget and normalized by
/// the user noise amplitude.
fn draw_sumrate_channels(scn: &Scenario, trial: u64) -> Result<Array2<Complex64>> {
    let cfg = ArrayConfig::half_wavelength(scn.num_antennas);
    let noise_amp = scn.user_noise_mw.sqrt();
    let mut channels = Array2::from_elem((scn.num_antennas, scn.num_users), Complex64::ZERO);
    for user in 0..scn.num_users {
        let mut geometry = derive_rng(
            scn.seed,
            &[label::SUMRATE, trial, label::GEOMETRY, user as u64],
        );
        let (distance, center) =
            draw_cell_position(&mut geometry, scn.cell_radius_m, scn.min_distance_m);
        let mut fading = derive_rng(
            scn.seed,
            &[label::SUMRATE, trial, label::FADING, user as u64],
        );
        let drawn = draw_user(
            &mut fading,
            &cfg,
            scn.paths_per_user,
            center,
            scn.spread_rad,
            1.0,
        );
        let mut shadowing = derive_rng(
            scn.seed,
            &[label::SUMRATE, trial, label::SHADOWING, user as u64],
        );
        let budget = LinkBudget {
            carrier_freq_mhz: scn.carrier_freq_mhz,
            distance_m: distance,
            shadowing_sigma_db: scn.shadowing_sigma_db,
            dl_power_dbm: scn.dl_power_dbm,
            ul_snr_db: scn.ul_snr_db[0],
            user_noise_dbm: scn.user_noise_dbm,
        };
        let scaled = apply_link_budget(&mut shadowing, &drawn.response, &budget)?;
        channels
            .column_mut(user)
            .assign(&scaled.mapv(|z| z / noise_amp));
    }
    Ok(channels)
}

/// Builds the composite hybrid precoder from a fresh two-round estimation
/// pass. `oversampling == 1` is the orthogonal variant (duplicate beam picks
/// collapse into one column); larger values rotate the beams.
fn hybrid_composite(
    scn: &Scenario,
    trial: u64,
    channels: &Array2<Complex64>,
    oversampling: usize,
) -> Result<Array2<Complex64>> {
    let (m, k) = channels.dim();
    let mut rng = derive_rng(
        scn.seed,
        &[label::SUMRATE, trial, label::TRAINING, oversampling as u64],
    );
    let (train, norms) = power_controlled(channels);
    let outcome = two_step_estimate(&mut rng, &train, oversampling, scn.ul_snr_db[0])?;
    // Undo the pilot power control: column n of the stage-2 observation is
    // user n seen through the combiner rows.
    let mut observed = outcome.observed_effective;
    for (user, &norm) in norms.iter().enumerate() {
        observed.column_mut(user).mapv_inplace(|z| z * norm);
    }
    let power = scn.dl_power_mw;

    let (analog, effective) = if oversampling == 1 {
        let mut beams: Vec<usize> = outcome.estimate.beams.iter().map(|b| b.index).collect();
        beams.sort_unstable();
        beams.dedup();
        let analog = orthogonal_analog(m, &beams);
        // The RF chain of any user that picked this beam observed its row.
        let mut effective = Array2::from_elem((k, beams.len()), Complex64::ZERO);
        for (q, &idx) in beams.iter().enumerate() {
            let rep = outcome
                .estimate
                .beams
                .iter()
                .position(|b| b.index == idx)
                .expect("beam came from a user");
            for n in 0..k {
                effective[(n, q)] = observed[(rep, n)];
            }
        }
        (analog, effective)
    } else {
        let analog = rotated_analog(m, &outcome.estimate.beams);
        (analog, observed.t().to_owned())
    };

    let digital = mmse_digital(&effective, power, k)?;
    Ok(HybridPrecoder::normalized(analog, digital, power).composite())
}

/// Uplink pilots are power-controlled: every user's pilot arrives at the
/// configured SNR. Training therefore runs on column-normalized channels and
/// the BS, which set the control factors, scales the estimates back.
fn power_controlled(channels: &Array2<Complex64>) -> (Array2<Complex64>, Vec<f64>) {
    let (m, k) = channels.dim();
    let norms: Vec<f64> = (0..k)
        .map(|user| {
            channels
                .column(user)
                .iter()
                .map(|z| z.norm_sqr())
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let mut train = Array2::from_elem((m, k), Complex64::ZERO);
    for (user, &recorded) in norms.iter().enumerate() {
        let norm = if recorded > 0.0 { recorded } else { 1.0 };
        train
            .column_mut(user)
            .assign(&channels.column(user).mapv(|z| z / norm));
    }
    (train, norms)
}

/// Full-digital channel estimate: one power-controlled pilot round observed
/// on all M antennas, `H_hat = (H X + N) X^H`, rescaled per user.
fn full_digital_estimate(
    scn: &Scenario,
    trial: u64,
    channels: &Array2<Complex64>,
) -> Result<Array2<Complex64>> {
    let (m, k) = channels.dim();
    let mut rng = derive_rng(scn.seed, &[label::SUMRATE, trial, label::TRAINING, 0]);
    let pilot = crate::estimation::unitary_pilot(k);
    let identity = Array2::from_shape_fn((m, m), |(i, j)| {
        if i == j {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::ZERO
        }
    });
    let (train, norms) = power_controlled(channels);
    let obs = crate::estimation::uplink_observation(
        &mut rng,
        &train,
        &pilot,
        &identity,
        scn.ul_snr_db[0],
    )?;
    let mut estimate = obs.observed;
    for (user, &norm) in norms.iter().enumerate() {
        estimate.column_mut(user).mapv_inplace(|z| z * norm);
    }
    Ok(estimate)
}

fn sumrate_trial(scn: &Scenario, trial: u64) -> Result<Vec<ResultRow>> {
    let channels = draw_sumrate_channels(scn, trial)?;
    let unit_noise = vec![1.0; scn.num_users];
    let power = scn.dl_power_mw;
    // Every method works from trained CSI: the full-digital baselines from a
    // one-round all-antenna estimate, the hybrids from the two-round
    // limited-RF protocol.
    let full_csi_needed = scn
        .methods
        .iter()
        .any(|m| matches!(m, Method::Mrt | Method::FdMmse));
    let estimated = if full_csi_needed {
        Some(full_digital_estimate(scn, trial, &channels)?)
    } else {
        None
    };
    let mut rows = Vec::with_capacity(scn.methods.len());
    for method in &scn.methods {
        let composite = match method {
            Method::Mrt => mrt_precoder(estimated.as_ref().unwrap(), power),
            Method::FdMmse => fd_mmse_precoder(estimated.as_ref().unwrap(), power, scn.num_users)?,
            Method::ObsHp => hybrid_composite(scn, trial, &channels, 1)?,
            Method::NoasHp => hybrid_composite(scn, trial, &channels, scn.oversampling)?,
        };
        let rate = sum_rate(&channels, &composite, &unit_noise);
        rows.push(ResultRow {
            experiment: SUMRATE_EXPERIMENT.to_string(),
            trial,
            method: method.name().to_string(),
            metric: "sum_rate".to_string(),
            value: rate,
        });
    }
    Ok(rows)
}

/// Sum-rate CDF experiment: per-trial rates for every enabled method, the
/// empirical CDF grid (percentiles 1..=99, trial column 0), and percentile
/// summaries.
pub fn run_sumrate_cdf(cfg: &ExperimentConfig) -> Result<ResultTable> {
    cfg.validate()?;
    let scn = cfg.resolve();
    let nested: Result<Vec<Vec<ResultRow>>> = (0..scn.trials as u64)
        .into_par_iter()
        .map(|trial| sumrate_trial(&scn, trial))
        .collect();
    let mut table = ResultTable {
        rows: nested?.into_iter().flatten().collect(),
        summaries: vec![],
    };

    for method in &scn.methods {
        let mut values = table.values(method.name(), "sum_rate");
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for p in 1u8..=99 {
            table.rows.push(ResultRow {
                experiment: SUMRATE_EXPERIMENT.to_string(),
                trial: 0,
                method: method.name().to_string(),
                metric: format!("cdf_p{p:02}"),
                value: percentile_of_sorted(&values, p as f64),
            });
        }
        push_summaries(&mut table, method.name(), "sum_rate");
    }
    Ok(table)
}

fn nmse_trial(scn: &Scenario, snr_index: usize, snr_db: f64, trial: u64) -> Result<Vec<ResultRow>> {
    let cfg = ArrayConfig::half_wavelength(scn.num_antennas);
    // Unit-variance channels without the link budget: the training SNR is
    // the controlled variable here.
    let mut channels = Array2::from_elem((scn.num_antennas, scn.num_users), Complex64::ZERO);
    for user in 0..scn.num_users {
        let mut geometry = derive_rng(
            scn.seed,
            &[
                label::NMSE,
                snr_index as u64,
                trial,
                label::GEOMETRY,
                user as u64,
            ],
        );
        let center = geometry.random::<f64>() * PI;
        let mut fading = derive_rng(
            scn.seed,
            &[
                label::NMSE,
                snr_index as u64,
                trial,
                label::FADING,
                user as u64,
            ],
        );
        let drawn = draw_user(
            &mut fading,
            &cfg,
            scn.paths_per_user,
            center,
            scn.spread_rad,
            1.0,
        );
        channels.column_mut(user).assign(&drawn.response);
    }

    let metric = format!("nmse_{snr_db}dB");
    let mut rows = Vec::with_capacity(2);
    for (tag, v) in [("OBS", 1usize), ("NOAS", scn.oversampling)] {
        let mut rng = derive_rng(
            scn.seed,
            &[
                label::NMSE,
                snr_index as u64,
                trial,
                label::TRAINING,
                v as u64,
            ],
        );
        let outcome = two_step_estimate(&mut rng, &channels, v, snr_db)?;
        let report = nmse(&outcome.estimate.channel, &channels)?;
        rows.push(ResultRow {
            experiment: NMSE_EXPERIMENT.to_string(),
            trial,
            method: tag.to_string(),
            metric: metric.clone(),
            value: report.mean,
        });
    }
    Ok(rows)
}

/// Channel-estimation NMSE versus uplink SNR for the orthogonal (V = 1) and
/// rotated (V = config oversampling) estimators.
pub fn run_nmse_sweep(cfg: &ExperimentConfig) -> Result<ResultTable> {
    cfg.validate()?;
    let scn = cfg.resolve();
    let mut table = ResultTable::default();
    for (snr_index, &snr_db) in scn.ul_snr_db.iter().enumerate() {
        let nested: Result<Vec<Vec<ResultRow>>> = (0..scn.trials as u64)
            .into_par_iter()
            .map(|trial| nmse_trial(&scn, snr_index, snr_db, trial))
            .collect();
        table.rows.extend(nested?.into_iter().flatten());
        let metric = format!("nmse_{snr_db}dB");
        for method in ["OBS", "NOAS"] {
            push_summaries(&mut table, method, &metric);
        }
    }
    Ok(table)
}

fn orthogonality_pair(scn: &Scenario, antennas: usize, pair: u64) -> Result<ResultRow> {
    let cfg = ArrayConfig::half_wavelength(antennas);
    let mut rng = derive_rng(
        scn.seed,
        &[label::ORTHOGONALITY, antennas as u64, pair, label::FADING],
    );
    // Disjoint spread intervals guarantee the two users share no path angle.
    let (c1, c2) = loop {
        let a = rng.random::<f64>() * PI;
        let b = rng.random::<f64>() * PI;
        if (a - b).abs() > scn.spread_rad + 1e-9 {
            break (a, b);
        }
    };
    let u1 = draw_user(&mut rng, &cfg, scn.paths_per_user, c1, scn.spread_rad, 1.0);
    let u2 = draw_user(&mut rng, &cfg, scn.paths_per_user, c2, scn.spread_rad, 1.0);
    let gamma = crate::angle::correlation(u1.response.view(), u2.response.view())?;
    Ok(ResultRow {
        experiment: ORTHOGONALITY_EXPERIMENT.to_string(),
        trial: pair,
        method: "correlation".to_string(),
        metric: format!("abs_corr_m{antennas}"),
        value: gamma.norm(),
    })
}

/// Channel-orthogonality study: |correlation| of disjoint-angle user pairs
/// for each array size in the sweep.
pub fn run_orthogonality_study(cfg: &ExperimentConfig) -> Result<ResultTable> {
    cfg.validate()?;
    let scn = cfg.resolve();
    let mut table = ResultTable::default();
    for &antennas in &scn.antenna_sweep {
        let rows: Result<Vec<ResultRow>> = (0..scn.trials as u64)
            .into_par_iter()
            .map(|pair| orthogonality_pair(&scn, antennas, pair))
            .collect();
        table.rows.extend(rows?);
        push_summaries(&mut table, "correlation", &format!("abs_corr_m{antennas}"));
    }
    Ok(table)
}

/// Writes the rows as CSV with the fixed header
/// `experiment,trial,method,metric,value`.
pub fn write_csv<P: AsRef<Path>>(table: &ResultTable, path: P) -> Result<()> {
    let mut out = String::with_capacity(32 * (table.rows.len() + 1));
    out.push_str("experiment,trial,method,metric,value\n");
    for row in &table.rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            row.experiment, row.trial, row.method, row.metric, row.value
        )
        .expect("string write");
    }
    std::fs::write(path, out)?;
    Ok(())
}
