//! ULA channel synthesis: steering vectors, multipath user channels, user
//! geometry, and the large-scale link budget (path loss plus log-normal
//! shadowing).

use std::f64::consts::PI;

use ndarray::Array1;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Uniform linear array geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayConfig {
    /// Number of antenna elements.
    pub num_antennas: usize,
    /// Element spacing over carrier wavelength, in (0, 0.5].
    pub spacing_ratio: f64,
}

impl ArrayConfig {
    pub fn new(num_antennas: usize, spacing_ratio: f64) -> Result<Self> {
        if num_antennas == 0 {
            return Err(Error::NonPositive {
                name: "num_antennas",
                value: 0.0,
            });
        }
        if !(spacing_ratio > 0.0 && spacing_ratio <= 0.5) {
            return Err(Error::NonPositive {
                name: "spacing_ratio",
                value: spacing_ratio,
            });
        }
        Ok(Self {
            num_antennas,
            spacing_ratio,
        })
    }

    /// Half-wavelength spacing, the usual choice.
    pub fn half_wavelength(num_antennas: usize) -> Self {
        Self {
            num_antennas,
            spacing_ratio: 0.5,
        }
    }

    /// Spatial frequency seen by the array for an incidence angle, i.e.
    /// `(d/lambda) * cos(theta)`.
    pub fn spatial_frequency(&self, theta: f64) -> f64 {
        self.spacing_ratio * theta.cos()
    }
}

/// Array phase response to a plane wave from incidence angle `theta` (rad).
///
/// Element `i` is `exp(-j 2 pi i (d/lambda) cos(theta))`; element 0 is 1.
pub fn steering_vector(cfg: &ArrayConfig, theta: f64) -> Result<Array1<Complex64>> {
    if !(0.0..=PI).contains(&theta) {
        return Err(Error::AngleOutOfRange(theta));
    }
    let f = cfg.spatial_frequency(theta);
    Ok(Array1::from_iter(
        (0..cfg.num_antennas).map(|i| Complex64::cis(-2.0 * PI * i as f64 * f)),
    ))
}

/// One user's multipath channel.
#[derive(Debug, Clone)]
pub struct UserChannel {
    /// Per-path angles of arrival, radians in [0, pi].
    pub aoas: Vec<f64>,
    /// Per-path complex gains, i.i.d. CN(0, gain variance).
    pub gains: Vec<Complex64>,
    /// Center of the angular spread interval.
    pub center_angle: f64,
    /// Width of the angular spread interval, radians.
    pub angular_spread: f64,
    /// Assembled channel vector: sum of steering vectors weighted by
    /// `gain / sqrt(P)`.
    pub response: Array1<Complex64>,
}

/// Draws one user: `paths` AOAs uniform in the spread interval around
/// `center` (clipped to [0, pi]) and circularly-symmetric Gaussian gains.
pub fn draw_user<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &ArrayConfig,
    paths: usize,
    center: f64,
    spread: f64,
    gain_variance: f64,
) -> UserChannel {
    assert!(paths >= 1, "need at least one path");
    assert!(spread >= 0.0, "angular spread must be non-negative");
    assert!(gain_variance > 0.0, "gain variance must be positive");

    let aoas: Vec<f64> = (0..paths)
        .map(|_| {
            if spread == 0.0 {
                center
            } else {
                (center + spread * (rng.random::<f64>() - 0.5)).clamp(0.0, PI)
            }
        })
        .collect();

    let sigma = (gain_variance / 2.0).sqrt();
    let normal = Normal::new(0.0, sigma).expect("valid std");
    let gains: Vec<Complex64> = (0..paths)
        .map(|_| Complex64::new(normal.sample(rng), normal.sample(rng)))
        .collect();

    let scale = 1.0 / (paths as f64).sqrt();
    let mut response = Array1::zeros(cfg.num_antennas);
    for (theta, gain) in aoas.iter().zip(&gains) {
        let a = steering_vector(cfg, *theta).expect("aoa clipped into range");
        response = response + a * (*gain * scale);
    }

    UserChannel {
        aoas,
        gains,
        center_angle: center,
        angular_spread: spread,
        response,
    }
}

/// Large-scale link parameters for one user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub carrier_freq_mhz: f64,
    pub distance_m: f64,
    pub shadowing_sigma_db: f64,
    pub dl_power_dbm: f64,
    pub ul_snr_db: f64,
    pub user_noise_dbm: f64,
}

impl LinkBudget {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("carrier_freq_mhz", self.carrier_freq_mhz),
            ("distance_m", self.distance_m),
        ] {
            if value.is_nan() || value <= 0.0 {
                return Err(Error::NonPositive { name, value });
            }
        }
        if self.shadowing_sigma_db < 0.0 {
            return Err(Error::NonPositive {
                name: "shadowing_sigma_db",
                value: self.shadowing_sigma_db,
            });
        }
        Ok(())
    }
}

/// Path loss in dB: `-35.4 + 26 log10(d) + 20 log10(fc)` with `d` in meters
/// and `fc` in MHz.
pub fn path_loss_db(distance_m: f64, carrier_freq_mhz: f64) -> Result<f64> {
    if distance_m.is_nan() || distance_m <= 0.0 {
        return Err(Error::NonPositive {
            name: "distance_m",
            value: distance_m,
        });
    }
    if carrier_freq_mhz.is_nan() || carrier_freq_mhz <= 0.0 {
        return Err(Error::NonPositive {
            name: "carrier_freq_mhz",
            value: carrier_freq_mhz,
        });
    }
    Ok(-35.4 + 26.0 * distance_m.log10() + 20.0 * carrier_freq_mhz.log10())
}

/// Scales a channel by the path loss plus one bulk log-normal shadowing draw.
///
/// The amplitude factor is `10^(-(PL + X)/20)` with `X ~ N(0, sigma^2)` in dB;
/// the single draw applies to all paths of the user.
pub fn apply_link_budget<R: Rng + ?Sized>(
    rng: &mut R,
    response: &Array1<Complex64>,
    budget: &LinkBudget,
) -> Result<Array1<Complex64>> {
    budget.validate()?;
    let pl = path_loss_db(budget.distance_m, budget.carrier_freq_mhz)?;
    let shadow = if budget.shadowing_sigma_db > 0.0 {
        Normal::new(0.0, budget.shadowing_sigma_db)
            .expect("valid std")
            .sample(rng)
    } else {
        0.0
    };
    let amplitude = 10f64.powf(-(pl + shadow) / 20.0);
    Ok(response * Complex64::new(amplitude, 0.0))
}

/// Draws a user position in a semicircular cell: distance uniform over the
/// annular area between `min_distance` and `radius`, bearing uniform in
/// (0, pi). Returns `(distance, center_angle)`.
pub fn draw_cell_position<R: Rng + ?Sized>(
    rng: &mut R,
    radius: f64,
    min_distance: f64,
) -> (f64, f64) {
    assert!(radius > min_distance && min_distance >= 0.0);
    let u: f64 = rng.random();
    let distance =
        (min_distance * min_distance + u * (radius * radius - min_distance * min_distance)).sqrt();
    let center_angle = rng.random::<f64>() * PI;
    (distance, center_angle)
}
