//! Random deployments, channel realizations and unit conversions.
//!
//! Solver code works in linear units (mW, Hz, dimensionless gains); dB and dBm
//! only appear in [`SystemConfig`] and at reporting boundaries.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::{Matrix, Tensor3};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{0} must be at least 1")]
    ZeroCount(&'static str),
    #[error("{field} must be positive and finite, got {value}")]
    NonPositive { field: &'static str, value: f64 },
    #[error("{field} must be finite, got {value}")]
    NonFinite { field: &'static str, value: f64 },
    #[error("user_budgets has {got} entries, expected {expected}")]
    BudgetLength { expected: usize, got: usize },
    #[error("{0}")]
    Invalid(String),
}

/// Network geometry, radio constants and budgets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SystemConfig {
    pub num_bs: usize,
    pub num_users: usize,
    /// Side of the square deployment area, meters.
    pub side_length: f64,
    pub num_bands: usize,
    /// Bandwidth of every band, Hz.
    pub band_width: f64,
    /// Noise power spectral density, dBm/Hz.
    pub noise_psd: f64,
    /// Per-user power budget, dBm.
    pub user_budget: f64,
    /// Optional per-user budgets in dBm, overriding `user_budget`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_budgets: Option<Vec<f64>>,
    /// Path-loss slope, dB per decade of distance.
    pub pathloss_a: f64,
    /// Path-loss intercept, dB.
    pub pathloss_b: f64,
    /// Log-normal shadowing standard deviation, dB.
    pub shadowing_sigma: f64,
    /// Distances below this are clamped before evaluating path loss, meters.
    pub min_distance: f64,
}

impl Default for SystemConfig {
    /// 10 BSs and 80 users on a 1 km square, 8 bands of 20 kHz, −174 dBm/Hz
    /// noise, 23 dBm budgets, PL(d) = 35 log10(d) + 34 and 8 dB shadowing.
    fn default() -> Self {
        SystemConfig {
            num_bs: 10,
            num_users: 80,
            side_length: 1000.0,
            num_bands: 8,
            band_width: 20e3,
            noise_psd: -174.0,
            user_budget: 23.0,
            user_budgets: None,
            pathloss_a: 35.0,
            pathloss_b: 34.0,
            shadowing_sigma: 8.0,
            min_distance: 1.0,
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.num_bs == 0 {
            return Err(ConfigError::ZeroCount("num_bs"));
        }
        if self.num_users == 0 {
            return Err(ConfigError::ZeroCount("num_users"));
        }
        if self.num_bands == 0 {
            return Err(ConfigError::ZeroCount("num_bands"));
        }
        for (field, value) in [
            ("side_length", self.side_length),
            ("band_width", self.band_width),
            ("min_distance", self.min_distance),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ConfigError::NonPositive { field, value });
            }
        }
        for (field, value) in [
            ("noise_psd", self.noise_psd),
            ("user_budget", self.user_budget),
            ("pathloss_a", self.pathloss_a),
            ("pathloss_b", self.pathloss_b),
        ] {
            if !value.is_finite() {
                return Err(ConfigError::NonFinite { field, value });
            }
        }
        if !(self.shadowing_sigma.is_finite() && self.shadowing_sigma >= 0.0) {
            return Err(ConfigError::Invalid(format!(
                "shadowing_sigma must be a finite non-negative number, got {}",
                self.shadowing_sigma
            )));
        }
        if let Some(budgets) = &self.user_budgets {
            if budgets.len() != self.num_users {
                return Err(ConfigError::BudgetLength {
                    expected: self.num_users,
                    got: budgets.len(),
                });
            }
            if let Some(&value) = budgets.iter().find(|b| !b.is_finite()) {
                return Err(ConfigError::NonFinite {
                    field: "user_budgets",
                    value,
                });
            }
        }
        Ok(())
    }

    /// Budget of user `u` in mW.
    pub fn budget_mw(&self, u: usize) -> f64 {
        let dbm = self
            .user_budgets
            .as_ref()
            .map_or(self.user_budget, |b| b[u]);
        db_to_linear(dbm)
    }

    pub fn budgets_mw(&self) -> Vec<f64> {
        (0..self.num_users).map(|u| self.budget_mw(u)).collect()
    }

    /// Noise power of one band, mW.
    pub fn band_noise_mw(&self) -> f64 {
        db_to_linear(self.noise_psd + 10.0 * self.band_width.log10())
    }

    pub fn band_widths(&self) -> Vec<f64> {
        vec![self.band_width; self.num_bands]
    }

    pub fn path_loss_db(&self, d: f64) -> f64 {
        path_loss_db(d, self.pathloss_a, self.pathloss_b, self.min_distance)
    }
}

pub fn db_to_linear(x: f64) -> f64 {
    10f64.powf(x / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// `a·log10(max(d, min_distance)) + b`.
pub fn path_loss_db(d: f64, a: f64, b: f64, min_distance: f64) -> f64 {
    a * d.max(min_distance).log10() + b
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deployment {
    pub bs_positions: Vec<Point>,
    pub user_positions: Vec<Point>,
}

impl Deployment {
    pub fn num_bs(&self) -> usize {
        self.bs_positions.len()
    }

    pub fn num_users(&self) -> usize {
        self.user_positions.len()
    }
}

/// Gains `|h_{u,b,k}|²` and noise powers `σ²_{b,k}` of one realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    /// Indexed `(user, bs, band)`, linear.
    pub gain: Tensor3<f64>,
    /// Indexed `(bs, band)`, mW.
    pub noise: Matrix,
}

impl ChannelRealization {
    pub fn num_users(&self) -> usize {
        self.gain.dims()[0]
    }

    pub fn num_bs(&self) -> usize {
        self.gain.dims()[1]
    }

    pub fn num_bands(&self) -> usize {
        self.gain.dims()[2]
    }
}

/// Small-scale fading model applied on top of path loss and shadowing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fading {
    /// Exponential(1) power factor per (user, bs, band).
    #[default]
    Rayleigh,
    /// No small-scale fading.
    Unit,
}

/// Places BSs then users i.i.d. uniformly on the square.
pub fn generate_deployment<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Deployment {
    let side = cfg.side_length;
    let mut draw = |n: usize| -> Vec<Point> {
        (0..n)
            .map(|_| {
                let x = rng.random::<f64>() * side;
                let y = rng.random::<f64>() * side;
                Point::new(x, y)
            })
            .collect()
    };
    let bs_positions = draw(cfg.num_bs);
    let user_positions = draw(cfg.num_users);
    Deployment {
        bs_positions,
        user_positions,
    }
}

pub fn generate_channels<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    dep: &Deployment,
    rng: &mut R,
) -> ChannelRealization {
    generate_channels_with(cfg, dep, rng, Fading::Rayleigh)
}

/// Shadowing is drawn once per (user, bs) link and shared by all bands;
/// fading is drawn independently per (user, bs, band).
pub fn generate_channels_with<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    dep: &Deployment,
    rng: &mut R,
    fading: Fading,
) -> ChannelRealization {
    let (nu, nb, nk) = (dep.num_users(), dep.num_bs(), cfg.num_bands);
    let shadowing =
        Normal::new(0.0, cfg.shadowing_sigma).expect("shadowing_sigma validated as finite and >= 0");
    let mut gain = Tensor3::filled([nu, nb, nk], 0.0);
    for (u, up) in dep.user_positions.iter().enumerate() {
        for (b, bp) in dep.bs_positions.iter().enumerate() {
            let shadow_db: f64 = shadowing.sample(rng);
            let large_scale = db_to_linear(-cfg.path_loss_db(up.distance(bp)) - shadow_db);
            for k in 0..nk {
                let factor = match fading {
                    Fading::Rayleigh => {
                        let f: f64 = Exp1.sample(rng);
                        // Exp1 can return exactly 0 with negligible probability.
                        f.max(f64::MIN_POSITIVE)
                    }
                    Fading::Unit => 1.0,
                };
                gain.set(u, b, k, large_scale * factor);
            }
        }
    }
    let noise = Matrix::from_fn(nb, nk, |_, _| cfg.band_noise_mw());
    ChannelRealization { gain, noise }
}
