//! System parameters and the constants derived from them.
//!
//! Powers are stored as linear ratios. The only dB-valued field is the
//! shadowing standard deviation, which is a property of the dB-domain
//! Gaussian and has no natural linear form.

use std::f64::consts::{LN_10, PI};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// `10 / ln 10`: converts a dB-domain standard deviation to natural-log units.
pub const XI: f64 = 10.0 / LN_10;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid `{field}`: {reason}")]
pub struct ConfigError {
    pub field: &'static str,
    pub reason: String,
}

impl ConfigError {
    fn new(field: &'static str, reason: impl Into<String>) -> Self {
        Self {
            field,
            reason: reason.into(),
        }
    }
}

/// Physical and simulation parameters.
///
/// Serialized keys use the conventional symbols (`R`, `d0`, `A0`, ...) so a
/// config file reads like the parameter table it was copied from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// Cell radius in meters.
    #[serde(rename = "R")]
    pub cell_radius: f64,
    /// Close-in reference distance in meters.
    #[serde(rename = "d0")]
    pub ref_distance: f64,
    /// Path loss inside the reference distance (linear).
    #[serde(rename = "A0")]
    pub ref_path_loss: f64,
    #[serde(rename = "gamma")]
    pub path_loss_exponent: f64,
    /// Shadowing standard deviation in dB.
    #[serde(rename = "sigma_dB")]
    pub shadowing_db: f64,
    #[serde(rename = "M")]
    pub antennas: usize,
    #[serde(rename = "K")]
    pub pilots: usize,
    /// Training transmit power (linear, noise-normalized).
    pub rho_p: f64,
    /// Data transmit power (linear, noise-normalized).
    pub rho_r: f64,
    /// Forces `1/rho_p` and `1/rho_r` to zero everywhere.
    pub interference_limited: bool,
    /// Outer radius of the simulated PPP window, in multiples of `R`.
    pub trunc_factor: f64,
    pub n_spatial_trials: usize,
    pub n_fading_trials: usize,
    pub seed: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        table2_default()
    }
}

/// The reference scenario: 500 m cells, 100 m close-in distance, -30 dB close-in
/// loss, exponent 3.76, 128 antennas, 30 pilots, 0 dB training power.
pub fn table2_default() -> SystemConfig {
    SystemConfig {
        cell_radius: 500.0,
        ref_distance: 100.0,
        ref_path_loss: 1e-3,
        path_loss_exponent: 3.76,
        shadowing_db: 0.0,
        antennas: 128,
        pilots: 30,
        rho_p: 1.0,
        rho_r: 1.0,
        interference_limited: true,
        trunc_factor: 51.0,
        n_spatial_trials: 10_000,
        n_fading_trials: 100_000,
        seed: 2015,
    }
}

/// Constants every module needs, computed once from a valid config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    /// PPP intensity in 1/m^2, pinned so that one cell area holds one UE.
    pub lambda: f64,
    /// `d0 / R`.
    pub l: f64,
    pub xi: f64,
    /// `exp(sigma^2 / xi^2)`.
    pub mu: f64,
}

impl DerivedConstants {
    fn compute(config: &SystemConfig) -> Self {
        let r = config.cell_radius;
        Self {
            lambda: 1.0 / (PI * r * r),
            l: config.ref_distance / r,
            xi: XI,
            mu: shadowing_mu(config.shadowing_db),
        }
    }
}

/// `exp(sigma_dB^2 / xi^2)`.
pub fn shadowing_mu(sigma_db: f64) -> f64 {
    (sigma_db * sigma_db / (XI * XI)).exp()
}

impl SystemConfig {
    pub fn validate(&self) -> Result<DerivedConstants, ConfigError> {
        let finite_positive = |field, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(ConfigError::new(
                    field,
                    format!("must be finite and > 0, got {v}"),
                ))
            }
        };
        finite_positive("R", self.cell_radius)?;
        finite_positive("d0", self.ref_distance)?;
        if self.ref_distance >= self.cell_radius {
            return Err(ConfigError::new(
                "d0",
                format!(
                    "must be below R = {}, got {}",
                    self.cell_radius, self.ref_distance
                ),
            ));
        }
        finite_positive("A0", self.ref_path_loss)?;
        if !(self.path_loss_exponent.is_finite() && self.path_loss_exponent > 2.0) {
            return Err(ConfigError::new(
                "gamma",
                format!("must exceed 2, got {}", self.path_loss_exponent),
            ));
        }
        if !(self.shadowing_db.is_finite() && self.shadowing_db >= 0.0) {
            return Err(ConfigError::new(
                "sigma_dB",
                format!("must be finite and >= 0, got {}", self.shadowing_db),
            ));
        }
        if self.pilots == 0 {
            return Err(ConfigError::new("K", "must be at least 1"));
        }
        if self.antennas <= self.pilots {
            return Err(ConfigError::new(
                "M",
                format!("must exceed K = {}, got {}", self.pilots, self.antennas),
            ));
        }
        if !self.interference_limited {
            finite_positive("rho_p", self.rho_p)?;
            finite_positive("rho_r", self.rho_r)?;
        }
        if !(self.trunc_factor.is_finite() && self.trunc_factor > 1.0) {
            return Err(ConfigError::new(
                "trunc_factor",
                format!("must be finite and > 1, got {}", self.trunc_factor),
            ));
        }
        Ok(DerivedConstants::compute(self))
    }

    /// Derived constants without validation, for pure formula evaluation.
    pub fn derived(&self) -> DerivedConstants {
        DerivedConstants::compute(self)
    }

    /// `1/rho_p`, or zero in the interference-limited regime.
    pub fn training_noise(&self) -> f64 {
        if self.interference_limited {
            0.0
        } else {
            1.0 / self.rho_p
        }
    }

    /// `1/rho_r`, or zero in the interference-limited regime.
    pub fn data_noise(&self) -> f64 {
        if self.interference_limited {
            0.0
        } else {
            1.0 / self.rho_r
        }
    }

    pub fn window_outer_radius(&self) -> f64 {
        self.trunc_factor * self.cell_radius
    }

    pub fn with_sigma_db(&self, sigma_db: f64) -> Self {
        Self {
            shadowing_db: sigma_db,
            ..self.clone()
        }
    }

    pub fn from_json_str(text: &str) -> crate::Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: impl AsRef<Path>) -> crate::Result<Self> {
        Self::from_json_str(&fs::read_to_string(path)?)
    }

    /// Short stable fingerprint of every field, stamped on all outputs.
    pub fn hash_hex(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table2_values() {
        let c = table2_default();
        assert_eq!(c.path_loss_exponent, 3.76);
        assert_eq!((c.antennas, c.pilots), (128, 30));
        assert_eq!(c.ref_path_loss, 1e-3);
        assert_eq!(c.rho_p, 1.0);
        assert!(c.interference_limited);
    }

    #[test]
    fn derived_l_and_mu() {
        let d = table2_default().validate().unwrap();
        assert!((d.l - 0.2).abs() < 1e-15);
        assert_eq!(d.mu, 1.0);
        let d8 = table2_default().with_sigma_db(8.0).validate().unwrap();
        // exp(64 (ln 10 / 10)^2) evaluated independently: 29.761475559...
        assert!((d8.mu - 29.761_475_559_44).abs() < 1e-8);
        let r = 500.0_f64;
        assert!((d.lambda * PI * r * r - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_fields() {
        let base = table2_default();
        let cases: Vec<(SystemConfig, &str)> = vec![
            (
                SystemConfig {
                    ref_distance: 600.0,
                    ..base.clone()
                },
                "d0",
            ),
            (
                SystemConfig {
                    ref_distance: 0.0,
                    ..base.clone()
                },
                "d0",
            ),
            (
                SystemConfig {
                    path_loss_exponent: 2.0,
                    ..base.clone()
                },
                "gamma",
            ),
            (
                SystemConfig {
                    shadowing_db: -1.0,
                    ..base.clone()
                },
                "sigma_dB",
            ),
            (
                SystemConfig {
                    antennas: 30,
                    ..base.clone()
                },
                "M",
            ),
            (
                SystemConfig {
                    pilots: 0,
                    ..base.clone()
                },
                "K",
            ),
            (
                SystemConfig {
                    trunc_factor: 1.0,
                    ..base.clone()
                },
                "trunc_factor",
            ),
            (
                SystemConfig {
                    ref_path_loss: -1.0,
                    ..base.clone()
                },
                "A0",
            ),
            (
                SystemConfig {
                    interference_limited: false,
                    rho_p: 0.0,
                    ..base.clone()
                },
                "rho_p",
            ),
        ];
        for (cfg, field) in cases {
            assert_eq!(cfg.validate().unwrap_err().field, field);
        }
    }

    #[test]
    fn noise_terms_follow_flag() {
        let mut c = table2_default();
        c.rho_p = 4.0;
        c.rho_r = 2.0;
        assert_eq!(c.training_noise(), 0.0);
        c.interference_limited = false;
        assert_eq!(c.training_noise(), 0.25);
        assert_eq!(c.data_noise(), 0.5);
    }

    #[test]
    fn json_keys_mirror_symbols() {
        let c = SystemConfig::from_json_str(r#"{"R": 1000, "sigma_dB": 3, "K": 10}"#).unwrap();
        assert_eq!(c.cell_radius, 1000.0);
        assert_eq!(c.shadowing_db, 3.0);
        assert_eq!(c.pilots, 10);
        assert_eq!(c.antennas, 128);
        assert!(SystemConfig::from_json_str(r#"{"radius": 1}"#).is_err());
        let text = serde_json::to_string(&c).unwrap();
        assert!(text.contains("\"gamma\"") && text.contains("\"A0\""));
    }

    #[test]
    fn hash_tracks_content() {
        let a = table2_default();
        assert_eq!(a.hash_hex(), table2_default().hash_hex());
        assert_ne!(a.hash_hex(), a.with_sigma_db(1.0).hash_hex());
        assert_eq!(a.hash_hex().len(), 16);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn mu_monotone(s1 in 0.0f64..12.0, ds in 1e-3f64..4.0) {
                prop_assert!(shadowing_mu(s1) < shadowing_mu(s1 + ds));
                prop_assert!(shadowing_mu(s1) >= 1.0);
            }

            #[test]
            fn lambda_normalization(r in 10.0f64..1e5, frac in 0.01f64..0.99) {
                let c = SystemConfig { cell_radius: r, ref_distance: frac * r, ..table2_default() };
                let d = c.validate().unwrap();
                prop_assert!((d.lambda * PI * r * r - 1.0).abs() < 1e-14);
                prop_assert!(d.l > 0.0 && d.l <= 1.0);
                prop_assert_eq!(c.validate().unwrap(), d);
            }
        }
    }
}
