//! The architecture rate engine: one function per combination of storage
//! architecture, CSIT availability and processing/sleep feature.
//!
//! Analytic rates are reported at zero slack (the supremum). The simulator
//! adds its own slack when it turns these allocations into policies.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::allocator::{
    allocate_lagrangian, hus_threshold, illinois_root, waterfill, waterfill_lossy, StateObjective,
};
use crate::error::{invalid, Error, Result};
use crate::infocalc::{
    binary_mi_est, mixture_mi_dv_unchecked, mixture_mi_unchecked, peak_rate, PeakRate,
};
use crate::model::{Architecture, Csit, Diagnostics, DiscreteDist, RateResult, Scenario};
use crate::quadrature::DEFAULT_ABS_TOL;

/// Which rate expression produced a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum FormulaId {
    /// Ideal buffer, water-filling on `E[Y]`.
    IdealCsit,
    /// Ideal buffer, constant power `E[Y]`.
    IdealNcsit,
    /// Lossy store-then-use buffer, constant power `β1·E[Y] − β2`.
    HsuNcsit,
    /// Lossy store-then-use buffer, lossy water-filling.
    HsuCsit,
    /// No buffer, peak-power capacity per slot with the fade known.
    HuCsit,
    /// No buffer, binary signaling per slot (lower bound).
    HuNcsit,
    /// Use-then-store buffer, constant power `c`.
    HusNcsit,
    /// Use-then-store buffer, water-filling on `c`.
    HusCsit,
    /// Processing cost, water-filling on `E[Y] − α`.
    ProcessingCsit,
    /// Processing cost, constant power `E[Y] − α`.
    ProcessingNcsit,
    /// Randomized sleep with per-state power allocation.
    SleepCsit,
    /// Randomized sleep at constant power.
    SleepNcsit,
}

impl FormulaId {
    pub const ALL: [FormulaId; 12] = [
        FormulaId::IdealCsit,
        FormulaId::IdealNcsit,
        FormulaId::HsuNcsit,
        FormulaId::HsuCsit,
        FormulaId::HuCsit,
        FormulaId::HuNcsit,
        FormulaId::HusNcsit,
        FormulaId::HusCsit,
        FormulaId::ProcessingCsit,
        FormulaId::ProcessingNcsit,
        FormulaId::SleepCsit,
        FormulaId::SleepNcsit,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            FormulaId::IdealCsit => "IDEAL_CSIT",
            FormulaId::IdealNcsit => "IDEAL_NCSIT",
            FormulaId::HsuNcsit => "HSU_NCSIT",
            FormulaId::HsuCsit => "HSU_CSIT",
            FormulaId::HuCsit => "HU_CSIT",
            FormulaId::HuNcsit => "HU_NCSIT",
            FormulaId::HusNcsit => "HUS_NCSIT",
            FormulaId::HusCsit => "HUS_CSIT",
            FormulaId::ProcessingCsit => "PROC_CSIT",
            FormulaId::ProcessingNcsit => "PROC_NCSIT",
            FormulaId::SleepCsit => "SLEEP_CSIT",
            FormulaId::SleepNcsit => "SLEEP_NCSIT",
        }
    }

    pub fn csit(self) -> Csit {
        match self {
            FormulaId::IdealCsit
            | FormulaId::HsuCsit
            | FormulaId::HuCsit
            | FormulaId::HusCsit
            | FormulaId::ProcessingCsit
            | FormulaId::SleepCsit => Csit::Perfect,
            _ => Csit::None,
        }
    }

    /// The scenario this cell is evaluated on, derived from `base`.
    pub fn scenario_for(self, base: &Scenario) -> Scenario {
        let csit = self.csit();
        let mut s = base.clone();
        s.csit = csit;
        match self {
            FormulaId::IdealCsit | FormulaId::IdealNcsit => {
                s.arch = Architecture::HarvestStoreUse;
                s.beta1 = 1.0;
                s.beta2 = 0.0;
                s.alpha = 0.0;
                s.sleep_enabled = false;
            }
            FormulaId::HsuCsit | FormulaId::HsuNcsit => s.arch = Architecture::HarvestStoreUse,
            FormulaId::HuCsit | FormulaId::HuNcsit => s.arch = Architecture::HarvestUse,
            FormulaId::HusCsit | FormulaId::HusNcsit => s.arch = Architecture::HarvestUseStore,
            FormulaId::ProcessingCsit | FormulaId::ProcessingNcsit => s.sleep_enabled = false,
            FormulaId::SleepCsit | FormulaId::SleepNcsit => s.sleep_enabled = true,
        }
        s
    }

    /// Evaluates this cell on `base`.
    pub fn evaluate(self, base: &Scenario) -> Result<ArchRateReport> {
        let s = self.scenario_for(base);
        match self {
            FormulaId::IdealCsit => rate_ideal_csit(&s),
            FormulaId::IdealNcsit => rate_ideal_ncsit(&s),
            FormulaId::HsuCsit | FormulaId::HsuNcsit => rate_hsu_lossy(&s),
            FormulaId::HuCsit | FormulaId::HuNcsit => rate_hu(&s),
            FormulaId::HusCsit | FormulaId::HusNcsit => rate_hus(&s),
            FormulaId::ProcessingCsit | FormulaId::ProcessingNcsit => rate_processing(&s),
            FormulaId::SleepCsit | FormulaId::SleepNcsit => sleep_optimize(&s, DEFAULT_P_GRID_STEP),
        }
    }
}

impl fmt::Display for FormulaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for FormulaId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FormulaId::ALL
            .into_iter()
            .find(|id| id.tag().eq_ignore_ascii_case(s))
            .ok_or_else(|| invalid("formula", format!("unknown formula cell `{s}`")))
    }
}

/// Optimal randomized-sleep operating point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SleepSolution {
    pub p_sleep: f64,
    /// Awake-symbol variance per fade state; 0 where the state always sleeps.
    pub awake_var: Vec<f64>,
    /// Mean energy `P(h) = (1 − p)(v(h) + α)` per fade state.
    pub cost: Vec<f64>,
    pub p_evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArchRateReport {
    pub scenario: Scenario,
    pub formula: FormulaId,
    pub rate: RateResult,
    /// The value is an achievable lower bound rather than the capacity.
    pub lower_bound: bool,
    pub sleep: Option<SleepSolution>,
}

impl ArchRateReport {
    fn new(scenario: &Scenario, formula: FormulaId, rate: RateResult) -> Self {
        Self {
            scenario: scenario.clone(),
            formula,
            rate,
            lower_bound: false,
            sleep: None,
        }
    }

    pub fn rate_nats(&self) -> f64 {
        self.rate.rate_nats
    }
}

fn require(cond: bool, what: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Precondition(what.to_string()))
    }
}

/// `Σ p(h)·0.5·ln(1 + h²·power/σ²)`.
pub fn fixed_power_rate(fade: &DiscreteDist, power: f64, noise_var: f64) -> f64 {
    if power <= 0.0 {
        return 0.0;
    }
    fade.expect(|h| 0.5 * (h * h * power / noise_var).ln_1p())
}

/// Water-filling rate at `budget`, zero for an empty budget.
fn waterfill_rate(fade: &DiscreteDist, budget: f64, noise_var: f64) -> Result<RateResult> {
    if budget <= 0.0 || fade.max_value() == 0.0 {
        return Ok(RateResult::new(0.0));
    }
    let sol = waterfill(fade, budget, noise_var)?;
    Ok(RateResult {
        rate_nats: sol.rate_nats,
        diagnostics: Diagnostics {
            iterations: sol.iterations,
            quad_error: 0.0,
            active_states: sol.policy.active_gains(),
        },
        policy: Some(sol.policy),
    })
}

fn fixed_power_result(fade: &DiscreteDist, power: f64, noise_var: f64) -> RateResult {
    let mut r = RateResult::new(fixed_power_rate(fade, power, noise_var));
    if power > 0.0 {
        r.diagnostics.active_states = fade
            .support()
            .iter()
            .copied()
            .filter(|h| *h > 0.0)
            .collect();
    }
    r
}

/// Capacity with an ideal infinite buffer and perfect CSIT: water-filling
/// with average budget `E[Y]`.
pub fn rate_ideal_csit(s: &Scenario) -> Result<ArchRateReport> {
    s.check()?;
    require(
        s.arch == Architecture::HarvestStoreUse
            && s.csit == Csit::Perfect
            && s.is_ideal()
            && !s.sleep_enabled,
        "ideal CSIT rate needs HSU, perfect CSIT, β1=1, β2=0, α=0, no sleep",
    )?;
    let rate = waterfill_rate(&s.fade, s.mean_harvest(), s.noise_var)?;
    Ok(ArchRateReport::new(s, FormulaId::IdealCsit, rate))
}

/// Capacity with an ideal infinite buffer and no CSIT: constant power `E[Y]`.
pub fn rate_ideal_ncsit(s: &Scenario) -> Result<ArchRateReport> {
    s.check()?;
    require(
        s.arch == Architecture::HarvestStoreUse
            && s.csit == Csit::None
            && s.is_ideal()
            && !s.sleep_enabled,
        "ideal no-CSIT rate needs HSU, no CSIT, β1=1, β2=0, α=0, no sleep",
    )?;
    let rate = fixed_power_result(&s.fade, s.mean_harvest(), s.noise_var);
    Ok(ArchRateReport::new(s, FormulaId::IdealNcsit, rate))
}

/// Store-then-use through a lossy buffer.
pub fn rate_hsu_lossy(s: &Scenario) -> Result<ArchRateReport> {
    s.check()?;
    require(
        s.arch == Architecture::HarvestStoreUse && s.alpha == 0.0 && !s.sleep_enabled,
        "lossy HSU rate needs arch=HSU, α=0, no sleep",
    )?;
    let mean = s.mean_harvest();
    match s.csit {
        Csit::None => {
            let power = (s.beta1 * mean - s.beta2).max(0.0);
            let rate = fixed_power_result(&s.fade, power, s.noise_var);
            Ok(ArchRateReport::new(s, FormulaId::HsuNcsit, rate))
        }
        Csit::Perfect => {
            if mean <= 0.0 || s.beta1 == 0.0 || s.fade.max_value() == 0.0 {
                return Ok(ArchRateReport::new(
                    s,
                    FormulaId::HsuCsit,
                    RateResult::new(0.0),
                ));
            }
            let sol = waterfill_lossy(&s.fade, mean, s.noise_var, s.beta1, s.beta2)?;
            let rate = RateResult {
                rate_nats: sol.rate_nats,
                diagnostics: Diagnostics {
                    iterations: sol.iterations,
                    quad_error: 0.0,
                    active_states: sol.policy.active_gains(),
                },
                policy: Some(sol.policy),
            };
            Ok(ArchRateReport::new(s, FormulaId::HsuCsit, rate))
        }
    }
}

/// Harvest-use without a buffer: every slot is peak-limited by its own harvest.
///
/// With CSIT the per-slot capacity-achieving input is used through the
/// closed form (binary signaling where it is exact), falling back to the
/// binary lower bound outside its range. Without CSIT the binary input is
/// reported as a lower bound.
pub fn rate_hu(s: &Scenario) -> Result<ArchRateReport> {
    s.check()?;
    require(
        s.arch == Architecture::HarvestUse && s.alpha == 0.0 && !s.sleep_enabled,
        "HU rate needs arch=HU, α=0, no sleep",
    )?;
    let mut total = 0.0;
    let mut quad_error = 0.0;
    let mut lower_bound = false;
    for (y, py) in s.harvest.iter() {
        for (h, ph) in s.fade.iter() {
            let r = hu_slot_rate(y, h, s.noise_var, s.csit)?;
            lower_bound |= r.lower_bound;
            total += py * ph * r.nats;
            quad_error += py * ph * r.abs_err;
        }
    }
    let formula = match s.csit {
        Csit::Perfect => FormulaId::HuCsit,
        Csit::None => FormulaId::HuNcsit,
    };
    let mut rate = RateResult::new(total);
    rate.diagnostics.quad_error = quad_error;
    let mut report = ArchRateReport::new(s, formula, rate);
    report.lower_bound = lower_bound;
    Ok(report)
}

/// Per-slot harvest-use rate for harvest `y` and fade `h`: the peak-power
/// closed form with CSIT, the binary-input lower bound without.
pub fn hu_slot_rate(y: f64, h: f64, noise_var: f64, csit: Csit) -> Result<PeakRate> {
    match csit {
        Csit::Perfect => peak_rate(y, h, noise_var),
        Csit::None => {
            // binary_mi(√y, σ²/h²) written as a unit-noise amplitude.
            let amp = (y * h * h / noise_var).sqrt();
            let e = binary_mi_est(amp, 1.0, DEFAULT_ABS_TOL)?;
            Ok(PeakRate {
                nats: e.value,
                abs_err: e.abs_err,
                lower_bound: true,
            })
        }
    }
}

/// Use-then-store: spend fresh harvest first, store the surplus, and run at
/// the largest sustainable constant spend `c`.
pub fn rate_hus(s: &Scenario) -> Result<ArchRateReport> {
    s.check()?;
    require(
        s.arch == Architecture::HarvestUseStore && s.alpha == 0.0 && !s.sleep_enabled,
        "HUS rate needs arch=HUS, α=0, no sleep",
    )?;
    let c = hus_threshold(&s.harvest, s.beta1, s.beta2)?;
    let (formula, rate) = match s.csit {
        Csit::None => (
            FormulaId::HusNcsit,
            fixed_power_result(&s.fade, c, s.noise_var),
        ),
        Csit::Perfect => (FormulaId::HusCsit, waterfill_rate(&s.fade, c, s.noise_var)?),
    };
    Ok(ArchRateReport::new(s, formula, rate))
}

/// Processing energy `α` paid in every slot, no sleep mode: the transmitter
/// works with the leftover budget `E[Y] − α`.
pub fn rate_processing(s: &Scenario) -> Result<ArchRateReport> {
    s.check()?;
    require(
        !s.sleep_enabled && s.beta1 == 1.0 && s.beta2 == 0.0,
        "processing rate needs sleep disabled and lossless storage (β1=1, β2=0)",
    )?;
    let budget = (s.mean_harvest() - s.alpha).max(0.0);
    let (formula, rate) = match s.csit {
        Csit::None => (
            FormulaId::ProcessingNcsit,
            fixed_power_result(&s.fade, budget, s.noise_var),
        ),
        Csit::Perfect => (
            FormulaId::ProcessingCsit,
            waterfill_rate(&s.fade, budget, s.noise_var)?,
        ),
    };
    Ok(ArchRateReport::new(s, formula, rate))
}

/// Default spacing of the sleep-probability grid.
pub const DEFAULT_P_GRID_STEP: f64 = 0.01;
/// Golden-section tolerance on the sleep probability.
pub const P_REFINE_TOL: f64 = 1e-5;

/// A fade state under randomized sleep at fixed `p`: spending `P` buys an
/// awake variance `v = P/(1 − p) − α`.
struct SleepState {
    prob: f64,
    h: f64,
    noise_var: f64,
    p: f64,
    alpha: f64,
}

impl SleepState {
    fn awake_var(&self, energy: f64) -> f64 {
        (energy / (1.0 - self.p) - self.alpha).max(0.0)
    }
}

impl StateObjective for SleepState {
    fn prob(&self) -> f64 {
        self.prob
    }

    fn threshold(&self) -> f64 {
        (1.0 - self.p) * self.alpha
    }

    fn value(&self, energy: f64) -> f64 {
        if energy <= self.threshold() {
            return 0.0;
        }
        mixture_mi_unchecked(self.p, self.awake_var(energy), self.h, self.noise_var)
    }

    fn interior(&self, lambda: f64) -> f64 {
        // dMI/dP = (dMI/dv)/(1 − p); at v = 0 it equals h²/(2σ²(1 − p))·(1 − p).
        let target = lambda * (1.0 - self.p);
        let slope0 = self.h * self.h / (2.0 * self.noise_var);
        if self.h == 0.0 || slope0 <= target {
            return self.threshold();
        }
        let dv = |v: f64| mixture_mi_dv_unchecked(self.p, v, self.h, self.noise_var) - target;
        // The Gaussian-input solution seeds the bracket: sleeping only
        // flattens the slope, so the root sits at or above it.
        let gain = self.h * self.h / self.noise_var;
        let mut lo = (0.5 / target - 1.0 / gain).max(0.0);
        if lo > 0.0 && dv(lo) < 0.0 {
            lo = 0.0;
        }
        let mut hi = (2.0 * lo).max(1.0);
        while dv(hi) > 0.0 && hi < 1e12 {
            lo = hi;
            hi *= 4.0;
        }
        let v = illinois_root(dv, lo, hi, 1e-11 * hi.max(1.0), 1e-13);
        (1.0 - self.p) * (v + self.alpha)
    }
}

struct SleepPoint {
    rate: f64,
    cost: Vec<f64>,
}

/// Rate and per-state cost of randomized sleep at a fixed sleep
/// probability `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct SleepAllocation {
    pub rate_nats: f64,
    /// Expected energy per slot in each fade state, `(1 − p)(v + α)`.
    pub cost: Vec<f64>,
    /// Awake input variance in each fade state (0 when it never transmits).
    pub awake_var: Vec<f64>,
}

/// Best allocation of `budget` across fade states at a fixed sleep
/// probability; without CSIT every state gets the same awake variance.
pub fn sleep_allocation(s: &Scenario, p: f64, budget: f64) -> Result<SleepAllocation> {
    s.check()?;
    if !(0.0..1.0).contains(&p) {
        return Err(invalid("p_sleep", format!("{p} outside [0, 1)")));
    }
    if !(budget >= 0.0) {
        return Err(invalid("budget", format!("{budget} must be ≥ 0")));
    }
    let pt = if budget == 0.0 || s.fade.max_value() == 0.0 {
        SleepPoint {
            rate: 0.0,
            cost: vec![0.0; s.fade.len()],
        }
    } else {
        sleep_point(s, p, budget)
    };
    let awake_var = awake_variances(&pt.cost, p, s.alpha);
    Ok(SleepAllocation {
        rate_nats: pt.rate,
        cost: pt.cost,
        awake_var,
    })
}

fn awake_variances(cost: &[f64], p: f64, alpha: f64) -> Vec<f64> {
    cost.iter()
        .map(|&c| {
            if c > 0.0 {
                (c / (1.0 - p) - alpha).max(0.0)
            } else {
                0.0
            }
        })
        .collect()
}

fn sleep_point(s: &Scenario, p: f64, mean: f64) -> SleepPoint {
    let n = s.fade.len();
    match s.csit {
        Csit::None => {
            let v = mean / (1.0 - p) - s.alpha;
            if v <= 0.0 {
                return SleepPoint {
                    rate: 0.0,
                    cost: vec![0.0; n],
                };
            }
            let rate = s
                .fade
                .expect(|h| mixture_mi_unchecked(p, v, h, s.noise_var));
            SleepPoint {
                rate,
                cost: vec![mean; n],
            }
        }
        Csit::Perfect => {
            let states: Vec<SleepState> = s
                .fade
                .iter()
                .map(|(h, prob)| SleepState {
                    prob,
                    h,
                    noise_var: s.noise_var,
                    p,
                    alpha: s.alpha,
                })
                .collect();
            let alloc = allocate_lagrangian(&states, mean);
            SleepPoint {
                rate: alloc.value,
                cost: alloc.energy,
            }
        }
    }
}

/// Optimizes the global sleep probability `p` (grid plus golden-section
/// refinement) and, with CSIT, the per-state energy allocation at each `p`.
pub fn sleep_optimize(s: &Scenario, p_grid_step: f64) -> Result<ArchRateReport> {
    s.check()?;
    require(s.sleep_enabled, "sleep optimization needs sleep_enabled")?;
    require(
        s.beta1 == 1.0 && s.beta2 == 0.0,
        "sleep optimization assumes lossless storage (β1=1, β2=0)",
    )?;
    if !(p_grid_step > 0.0 && p_grid_step < 1.0) {
        return Err(invalid(
            "p_grid_step",
            format!("{p_grid_step} outside (0, 1)"),
        ));
    }
    let formula = match s.csit {
        Csit::Perfect => FormulaId::SleepCsit,
        Csit::None => FormulaId::SleepNcsit,
    };
    if s.mean_harvest() <= 0.0 || s.fade.max_value() == 0.0 {
        let mut report = ArchRateReport::new(s, formula, RateResult::new(0.0));
        report.sleep = Some(SleepSolution {
            p_sleep: 0.0,
            awake_var: vec![0.0; s.fade.len()],
            cost: vec![0.0; s.fade.len()],
            p_evaluations: 0,
        });
        return Ok(report);
    }

    let mean = s.mean_harvest();
    let steps = (1.0 / p_grid_step).round() as usize;
    let grid: Vec<f64> = (0..steps)
        .map(|i| i as f64 * p_grid_step)
        .filter(|p| *p < 1.0)
        .collect();
    let points: Vec<SleepPoint> = grid.par_iter().map(|&p| sleep_point(s, p, mean)).collect();
    let mut evaluations = grid.len();
    let (best_idx, _) =
        points
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, pt)| {
                if pt.rate > bv {
                    (i, pt.rate)
                } else {
                    (bi, bv)
                }
            });
    let mut best_p = grid[best_idx];
    let mut best = points.into_iter().nth(best_idx).unwrap();

    // Golden-section refinement over the neighbouring grid cells.
    let mut a = if best_idx == 0 {
        0.0
    } else {
        grid[best_idx - 1]
    };
    let mut b = (best_p + p_grid_step).min(1.0 - 1e-9);
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = sleep_point(s, x1, mean);
    let mut f2 = sleep_point(s, x2, mean);
    evaluations += 2;
    while b - a > P_REFINE_TOL {
        if f1.rate >= f2.rate {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = sleep_point(s, x1, mean);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = sleep_point(s, x2, mean);
        }
        evaluations += 1;
        for (x, f) in [(x1, &f1), (x2, &f2)] {
            if f.rate > best.rate {
                best_p = x;
                best = SleepPoint {
                    rate: f.rate,
                    cost: f.cost.clone(),
                };
            }
        }
    }

    let awake_var = awake_variances(&best.cost, best_p, s.alpha);
    let mut rate = RateResult::new(best.rate);
    rate.diagnostics = Diagnostics {
        iterations: evaluations,
        quad_error: DEFAULT_ABS_TOL * s.fade.len() as f64,
        active_states: s
            .fade
            .support()
            .iter()
            .zip(&awake_var)
            .filter(|(_, v)| **v > 0.0)
            .map(|(h, _)| *h)
            .collect(),
    };
    let mut report = ArchRateReport::new(s, formula, rate);
    report.sleep = Some(SleepSolution {
        p_sleep: best_p,
        awake_var,
        cost: best.cost,
        p_evaluations: evaluations,
    });
    Ok(report)
}

/// Picks the rate expression that matches the scenario's own fields.
pub fn evaluate(s: &Scenario) -> Result<ArchRateReport> {
    s.check()?;
    if s.sleep_enabled {
        return sleep_optimize(s, DEFAULT_P_GRID_STEP);
    }
    if s.alpha > 0.0 {
        return rate_processing(s);
    }
    match s.arch {
        Architecture::HarvestUse => rate_hu(s),
        Architecture::HarvestUseStore => rate_hus(s),
        Architecture::HarvestStoreUse if s.is_ideal() => match s.csit {
            Csit::Perfect => rate_ideal_csit(s),
            Csit::None => rate_ideal_ncsit(s),
        },
        Architecture::HarvestStoreUse => rate_hsu_lossy(s),
    }
}

/// Formula cells that apply to a scenario, in table order.
pub fn applicable_cells(s: &Scenario) -> Vec<FormulaId> {
    let mut cells = vec![FormulaId::IdealCsit, FormulaId::IdealNcsit];
    if s.alpha == 0.0 {
        cells.extend([
            FormulaId::HsuCsit,
            FormulaId::HsuNcsit,
            FormulaId::HuCsit,
            FormulaId::HuNcsit,
            FormulaId::HusCsit,
            FormulaId::HusNcsit,
        ]);
    } else {
        cells.extend([FormulaId::ProcessingCsit, FormulaId::ProcessingNcsit]);
        if s.sleep_enabled {
            cells.extend([FormulaId::SleepCsit, FormulaId::SleepNcsit]);
        }
    }
    cells
}

/// Every applicable cell evaluated on `s`.
pub fn rate_table(s: &Scenario) -> Result<Vec<ArchRateReport>> {
    s.check()?;
    applicable_cells(s)
        .into_iter()
        .map(|cell| cell.evaluate(s))
        .collect()
}
