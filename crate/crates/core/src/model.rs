//! Value types shared by every other module: distributions, scenarios,
//! power policies, rate results and trajectory summaries.
//!
//! All types are immutable after construction. A [`DiscreteDist`] can only be
//! built through [`DiscreteDist::new`], so holding one means its invariants
//! have been checked.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Tolerance on the total probability mass of a [`DiscreteDist`].
pub const PROB_SUM_TOL: f64 = 1e-12;

/// Finite-support distribution with nonnegative, strictly increasing support.
///
/// Models the per-channel-use harvested energy `Y`, the fade amplitude `H`
/// and the processing energy `Z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDist", into = "RawDist")]
pub struct DiscreteDist {
    support: Vec<f64>,
    probs: Vec<f64>,
    cdf: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDist {
    support: Vec<f64>,
    probs: Vec<f64>,
}

impl TryFrom<RawDist> for DiscreteDist {
    type Error = Error;

    fn try_from(raw: RawDist) -> Result<Self> {
        DiscreteDist::new(raw.support, raw.probs)
    }
}

impl From<DiscreteDist> for RawDist {
    fn from(d: DiscreteDist) -> Self {
        RawDist {
            support: d.support,
            probs: d.probs,
        }
    }
}

impl DiscreteDist {
    /// Builds a distribution, rejecting anything that is not already a
    /// normalized probability vector. Nothing is renormalized.
    pub fn new(support: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        if support.len() != probs.len() {
            return Err(Error::InvalidDistribution(format!(
                "support has {} values but probs has {}",
                support.len(),
                probs.len()
            )));
        }
        if let Some(v) = support.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "support value {v} is negative or not finite"
            )));
        }
        if support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidDistribution(
                "support values must be strictly increasing".into(),
            ));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p <= 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "probability {p} is not strictly positive"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}, not 1 (non-normalized)"
            )));
        }
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        // The last bucket absorbs rounding so every uniform draw lands somewhere.
        *cdf.last_mut().unwrap() = f64::INFINITY;
        Ok(Self {
            support,
            probs,
            cdf,
        })
    }

    /// Point mass at `value`.
    pub fn point(value: f64) -> Result<Self> {
        Self::new(vec![value], vec![1.0])
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// `(value, probability)` pairs in increasing value order.
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.support.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn mean(&self) -> f64 {
        self.expect(|v| v)
    }

    /// `Σ pᵢ·f(vᵢ)`.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.iter().map(|(v, p)| p * f(v)).sum()
    }

    pub fn max_value(&self) -> f64 {
        *self.support.last().unwrap()
    }

    /// Same probabilities with every support value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(invalid("scale", format!("{factor} must be positive")));
        }
        Self::new(
            self.support.iter().map(|v| v * factor).collect(),
            self.probs.clone(),
        )
    }

    /// Index of the support value drawn by inverse-CDF sampling.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cdf
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.len() - 1)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.support[self.sample_index(rng)]
    }
}

/// Where harvested energy goes before it reaches the transmitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Architecture {
    /// Harvest-use: no buffer, each slot spends exactly what it harvests.
    #[serde(rename = "HU")]
    HarvestUse,
    /// Harvest-store-use: everything passes through the (lossy) buffer.
    #[serde(rename = "HSU")]
    HarvestStoreUse,
    /// Harvest-use-store: fresh energy is spent first, only the surplus is stored.
    #[serde(rename = "HUS")]
    HarvestUseStore,
}

impl Architecture {
    pub fn tag(self) -> &'static str {
        match self {
            Architecture::HarvestUse => "HU",
            Architecture::HarvestStoreUse => "HSU",
            Architecture::HarvestUseStore => "HUS",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Channel state information available at the transmitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Csit {
    Perfect,
    None,
}

impl Csit {
    pub fn tag(self) -> &'static str {
        match self {
            Csit::Perfect => "perfect",
            Csit::None => "none",
        }
    }
}

impl fmt::Display for Csit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Csit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "perfect" => Ok(Csit::Perfect),
            "none" => Ok(Csit::None),
            other => Err(invalid("csit", format!("unknown mode `{other}`"))),
        }
    }
}

/// Full description of one energy-harvesting link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Harvested energy per channel use.
    pub harvest: DiscreteDist,
    /// Fade amplitude gain.
    pub fade: DiscreteDist,
    pub noise_var: f64,
    /// Fraction of harvested energy that survives storage.
    pub beta1: f64,
    /// Energy leaked from the buffer per slot.
    pub beta2: f64,
    /// Mean processing/sensing energy per awake slot.
    pub alpha: f64,
    pub arch: Architecture,
    pub csit: Csit,
    pub sleep_enabled: bool,
}

impl Scenario {
    /// Ideal storage, no processing cost, HSU with perfect CSIT.
    pub fn ideal(harvest: DiscreteDist, fade: DiscreteDist, noise_var: f64) -> Self {
        Self {
            harvest,
            fade,
            noise_var,
            beta1: 1.0,
            beta2: 0.0,
            alpha: 0.0,
            arch: Architecture::HarvestStoreUse,
            csit: Csit::Perfect,
            sleep_enabled: false,
        }
    }

    pub fn validate(self) -> Result<Self> {
        self.check()?;
        Ok(self)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.noise_var > 0.0 && self.noise_var.is_finite()) {
            return Err(invalid(
                "noise_var",
                format!("{} must be > 0", self.noise_var),
            ));
        }
        if !(0.0..=1.0).contains(&self.beta1) {
            return Err(invalid("beta1", format!("{} outside [0, 1]", self.beta1)));
        }
        if !(self.beta2 >= 0.0 && self.beta2.is_finite()) {
            return Err(invalid("beta2", format!("{} must be >= 0", self.beta2)));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(invalid("alpha", format!("{} must be >= 0", self.alpha)));
        }
        Ok(())
    }

    pub fn mean_harvest(&self) -> f64 {
        self.harvest.mean()
    }

    /// No storage loss and no processing cost.
    pub fn is_ideal(&self) -> bool {
        self.beta1 == 1.0 && self.beta2 == 0.0 && self.alpha == 0.0
    }

    pub fn with_arch(&self, arch: Architecture, csit: Csit) -> Self {
        Self {
            arch,
            csit,
            ..self.clone()
        }
    }
}

/// Per-fade-state energy allocation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StateAllocation {
    pub gain: f64,
    pub prob: f64,
    pub energy: f64,
}

/// Map from fade state to transmit energy per channel use, with the
/// multiplier that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerPolicy {
    pub per_state: Vec<StateAllocation>,
    /// Water level `ν` (equivalently `1/(2λ)` for the Lagrange multiplier `λ`).
    pub multiplier: f64,
    /// Target for `E[T(H)]`.
    pub budget: f64,
}

impl PowerPolicy {
    pub fn mean_energy(&self) -> f64 {
        self.per_state.iter().map(|s| s.prob * s.energy).sum()
    }

    pub fn energy_for(&self, gain: f64) -> Option<f64> {
        self.per_state
            .iter()
            .find(|s| s.gain == gain)
            .map(|s| s.energy)
    }

    pub fn energies(&self) -> Vec<f64> {
        self.per_state.iter().map(|s| s.energy).collect()
    }

    /// Fade gains that receive strictly positive energy.
    pub fn active_gains(&self) -> Vec<f64> {
        self.per_state
            .iter()
            .filter(|s| s.energy > 0.0)
            .map(|s| s.gain)
            .collect()
    }
}

/// Solver bookkeeping attached to a rate.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub quad_error: f64,
    pub active_states: Vec<f64>,
}

/// An achievable rate in nats per channel use.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateResult {
    pub rate_nats: f64,
    pub policy: Option<PowerPolicy>,
    pub diagnostics: Diagnostics,
}

impl RateResult {
    pub fn new(rate_nats: f64) -> Self {
        Self {
            rate_nats: rate_nats.max(0.0),
            policy: None,
            diagnostics: Diagnostics::default(),
        }
    }

    pub fn rate_bits(&self) -> f64 {
        nats_to_bits(self.rate_nats)
    }
}

pub fn nats_to_bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}

/// Empirical summary of one simulated buffer path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryStats {
    pub n_steps: usize,
    /// Mean per-step rate over the second half of the path.
    pub empirical_rate_nats: f64,
    /// Mean per-step rate over the whole path, transient included.
    pub full_path_rate_nats: f64,
    pub mean_used_energy: f64,
    /// Fraction of second-half steps where the transmitter got less than it asked for.
    pub truncation_fraction: f64,
    pub full_path_truncation_fraction: f64,
    /// Fraction of second-half steps whose codeword amplitude was clipped at `√E_k`.
    pub clip_fraction: f64,
    pub final_buffer: f64,
    /// Least-squares slope of `E_k` over the second half of the path.
    pub buffer_slope: f64,
}
