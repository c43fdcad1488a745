//! Body-channel model: log-distance path loss with lognormal shadowing.
//!
//! Every link is described by a [`ChannelParams`] set (the propagation law)
//! and a [`LinkGeometry`] (which law applies and how far apart the nodes
//! are). Gains are drawn independently per slot (block fading) from a
//! caller-owned random stream.

use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::QualityMode;

/// Propagation environment of a link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkKind {
    /// Implant to on-body device (source to relay, source to destination).
    InBodyToOnBody,
    /// Between two on-body devices (relay to destination).
    OnBodyToOnBody,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    kind: LinkKind,
    distance_mm: f64,
}

impl LinkGeometry {
    pub fn new(kind: LinkKind, distance_mm: f64) -> Result<Self> {
        if !(distance_mm > 0.0 && distance_mm.is_finite()) {
            return Err(Error::invalid(
                "distance_mm",
                format!("must be positive and finite, got {distance_mm}"),
            ));
        }
        Ok(Self { kind, distance_mm })
    }

    pub fn kind(&self) -> LinkKind {
        self.kind
    }

    pub fn distance_mm(&self) -> f64 {
        self.distance_mm
    }
}

/// Log-distance path loss parameters plus shadowing spread.
///
/// The shipped defaults are calibration constants for a stomach implant
/// and can be replaced from the configuration file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub pl0_db: f64,
    pub d0_mm: f64,
    pub exponent: f64,
    pub sigma_db: f64,
}

impl ChannelParams {
    pub fn new(pl0_db: f64, d0_mm: f64, exponent: f64, sigma_db: f64) -> Result<Self> {
        let params = Self {
            pl0_db,
            d0_mm,
            exponent,
            sigma_db,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn in_body_default() -> Self {
        Self {
            pl0_db: 47.14,
            d0_mm: 50.0,
            exponent: 4.26,
            sigma_db: 7.85,
        }
    }

    pub fn on_body_default() -> Self {
        Self {
            pl0_db: 35.2,
            d0_mm: 100.0,
            exponent: 3.11,
            sigma_db: 6.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.pl0_db.is_finite() {
            return Err(Error::invalid("pl0_db", "must be finite"));
        }
        if !(self.d0_mm > 0.0 && self.d0_mm.is_finite()) {
            return Err(Error::invalid("d0_mm", "must be positive and finite"));
        }
        if !(self.exponent >= 0.0 && self.exponent.is_finite()) {
            return Err(Error::invalid("exponent", "must be non-negative"));
        }
        if !(self.sigma_db >= 0.0 && self.sigma_db.is_finite()) {
            return Err(Error::invalid("sigma_db", "must be non-negative"));
        }
        Ok(())
    }
}

/// Linear power gain of one link for one slot, with its dB twin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelGain {
    pub power_gain: f64,
    pub gain_db: f64,
}

impl ChannelGain {
    pub fn from_db(gain_db: f64) -> Self {
        Self {
            power_gain: db_to_linear(gain_db),
            gain_db,
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Mean path loss in dB: `pl0 + 10 n log10(d / d0)`.
pub fn path_loss_db(params: &ChannelParams, geometry: &LinkGeometry) -> Result<f64> {
    if !(geometry.distance_mm > 0.0) {
        return Err(Error::invalid(
            "distance_mm",
            format!("must be positive, got {}", geometry.distance_mm),
        ));
    }
    Ok(params.pl0_db + 10.0 * params.exponent * (geometry.distance_mm / params.d0_mm).log10())
}

/// Draws one slot's gain: `gain_db = -(path_loss + S)`, `S ~ N(0, sigma_db^2)`.
///
/// Exactly one standard-normal variate is consumed per call, whatever the
/// shadowing spread, so streams stay aligned across configurations.
pub fn draw_gain<R: Rng + ?Sized>(
    params: &ChannelParams,
    geometry: &LinkGeometry,
    rng: &mut R,
) -> ChannelGain {
    let pl = params.pl0_db
        + 10.0 * params.exponent * (geometry.distance_mm / params.d0_mm).log10();
    let z: f64 = rand_distr::StandardNormal.sample(rng);
    ChannelGain::from_db(-(pl + params.sigma_db * z))
}

/// A fully specified link: propagation law bound to a geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    params: ChannelParams,
    geometry: LinkGeometry,
    path_loss_db: f64,
}

impl Link {
    pub fn new(params: ChannelParams, geometry: LinkGeometry) -> Result<Self> {
        params.validate()?;
        let path_loss_db = path_loss_db(&params, &geometry)?;
        Ok(Self {
            params,
            geometry,
            path_loss_db,
        })
    }

    pub fn params(&self) -> &ChannelParams {
        &self.params
    }

    pub fn geometry(&self) -> &LinkGeometry {
        &self.geometry
    }

    pub fn path_loss_db(&self) -> f64 {
        self.path_loss_db
    }

    pub fn sigma_db(&self) -> f64 {
        self.params.sigma_db
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelGain {
        let z: f64 = rand_distr::StandardNormal.sample(rng);
        ChannelGain::from_db(-(self.path_loss_db + self.params.sigma_db * z))
    }

    /// Linear quality the selection rules compare for a drawn gain.
    pub fn quality(&self, gain: &ChannelGain, mode: QualityMode) -> f64 {
        match mode {
            QualityMode::Absolute => gain.power_gain,
            QualityMode::Fading => db_to_linear(gain.gain_db + self.path_loss_db),
        }
    }

    /// Mean of the quality in dB under `mode`.
    pub fn mean_quality_db(&self, mode: QualityMode) -> f64 {
        match mode {
            QualityMode::Absolute => -self.path_loss_db,
            QualityMode::Fading => 0.0,
        }
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Closed-form `P(q_sr >= beta * q_rd)` for lognormal link qualities.
///
/// Both qualities are Gaussian in dB, so the comparison reduces to the sign
/// of a Gaussian difference. With no shadowing on either link the outcome is
/// deterministic and the function returns 0 or 1 (ties count as a win for
/// the source-to-relay link, matching the protocol tie rule).
pub fn selection_probability(sr: &Link, rd: &Link, beta: f64, mode: QualityMode) -> Result<f64> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::invalid("beta", format!("must be positive, got {beta}")));
    }
    let margin = sr.mean_quality_db(mode) - rd.mean_quality_db(mode) - linear_to_db(beta);
    let spread = sr.sigma_db().hypot(rd.sigma_db());
    if spread == 0.0 {
        return Ok(if margin >= 0.0 { 1.0 } else { 0.0 });
    }
    Ok(normal_cdf(margin / spread))
}
