//! Power allocation across fade states.
//!
//! Three solvers live here:
//!
//! * [`waterfill`]: classical water-filling, `T(h) = (ν − σ²/h²)⁺` with the
//!   water level `ν` found by bisection and then polished in closed form on
//!   the active set.
//! * [`waterfill_lossy`]: allocation through a lossy buffer, where a state's
//!   rate is `0.5·ln(1 + h²(β1·T − β2)⁺/σ²)`. That objective is flat on
//!   `[0, β2/β1]` and concave afterwards, so each state picks the better of
//!   "off" and its interior stationary point at a common multiplier.
//! * [`hus_threshold`]: the largest constant spend `c` a harvest-use-store
//!   buffer can sustain.
//!
//! The flat-then-concave machinery is generic over [`StateObjective`] so the
//! sleep optimizer in [`crate::rates`] can reuse it with a numerically
//! evaluated objective.

use crate::error::{invalid, Error, Result};
use crate::model::{DiscreteDist, PowerPolicy, StateAllocation};

/// Iteration cap for every bisection in this module.
pub const MAX_BISECTION_ITERS: usize = 200;
/// Absolute tolerance on the water level / multiplier.
pub const MULTIPLIER_TOL: f64 = 1e-12;
/// Tolerance on `|E[T] − budget|`.
pub const BUDGET_TOL: f64 = 1e-10;
/// Up to this many fade states every active set is tried explicitly.
pub const EXHAUSTIVE_STATE_LIMIT: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct WaterfillSolution {
    pub policy: PowerPolicy,
    /// `ν`, or `1/(2λ)` for the Lagrangian solvers.
    pub water_level: f64,
    pub achieved_budget: f64,
    /// Objective value at the returned policy, in nats.
    pub rate_nats: f64,
    pub iterations: usize,
}

impl WaterfillSolution {
    fn zero(fade: &DiscreteDist, budget: f64) -> Self {
        Self {
            policy: policy_from(fade, &vec![0.0; fade.len()], 0.0, budget),
            water_level: 0.0,
            achieved_budget: 0.0,
            rate_nats: 0.0,
            iterations: 0,
        }
    }
}

fn policy_from(fade: &DiscreteDist, energy: &[f64], multiplier: f64, budget: f64) -> PowerPolicy {
    PowerPolicy {
        per_state: fade
            .iter()
            .zip(energy)
            .map(|((gain, prob), &energy)| StateAllocation { gain, prob, energy })
            .collect(),
        multiplier,
        budget,
    }
}

fn check_budget(budget: f64) -> Result<()> {
    if budget > 0.0 && budget.is_finite() {
        Ok(())
    } else {
        Err(invalid("budget", format!("{budget} must be > 0")))
    }
}

fn check_noise(noise_var: f64) -> Result<()> {
    if noise_var > 0.0 && noise_var.is_finite() {
        Ok(())
    } else {
        Err(invalid("noise_var", format!("{noise_var} must be > 0")))
    }
}

/// `Σ p(h)·0.5·ln(1 + h²T(h)/σ²)`.
pub fn gaussian_objective(fade: &DiscreteDist, energy: &[f64], noise_var: f64) -> f64 {
    fade.iter()
        .zip(energy)
        .map(|((h, p), &t)| p * 0.5 * (h * h * t / noise_var).ln_1p())
        .sum()
}

/// Classical water-filling over the fade distribution.
pub fn waterfill(fade: &DiscreteDist, budget: f64, noise_var: f64) -> Result<WaterfillSolution> {
    check_budget(budget)?;
    check_noise(noise_var)?;
    // Inverse SNR per unit energy; zero-gain states never switch on.
    let floor: Vec<f64> = fade
        .support()
        .iter()
        .map(|&h| {
            if h > 0.0 {
                noise_var / (h * h)
            } else {
                f64::INFINITY
            }
        })
        .collect();
    if floor.iter().all(|f| f.is_infinite()) {
        return Err(invalid("fade", "all fade gains are zero"));
    }
    let probs = fade.probs();
    let spend = |nu: f64| -> f64 {
        floor
            .iter()
            .zip(probs)
            .map(|(f, p)| p * (nu - f).max(0.0))
            .sum()
    };

    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut iterations = 0;
    while spend(hi) < budget && iterations < MAX_BISECTION_ITERS {
        lo = hi;
        hi *= 2.0;
        iterations += 1;
    }
    while hi - lo > MULTIPLIER_TOL && iterations < MAX_BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        if spend(mid) < budget {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }

    // Closed-form level on the active set removes the residual bisection error.
    let bisected = 0.5 * (lo + hi);
    let (mass, inv_sum) = floor
        .iter()
        .zip(probs)
        .filter(|(f, _)| **f < bisected)
        .fold((0.0, 0.0), |(m, s), (f, p)| (m + p, s + p * f));
    let polished = (budget + inv_sum) / mass;
    let consistent = floor
        .iter()
        .all(|&f| (f < bisected) == (f < polished) || (f - polished).abs() < MULTIPLIER_TOL);
    let nu = if consistent { polished } else { bisected };

    let energy: Vec<f64> = floor.iter().map(|f| (nu - f).max(0.0)).collect();
    let achieved: f64 = energy.iter().zip(probs).map(|(t, p)| p * t).sum();
    Ok(WaterfillSolution {
        rate_nats: gaussian_objective(fade, &energy, noise_var),
        policy: policy_from(fade, &energy, nu, budget),
        water_level: nu,
        achieved_budget: achieved,
        iterations,
    })
}

/// One fade state's contribution to a separable allocation problem whose
/// per-state value is zero below [`threshold`](Self::threshold) and concave
/// above it.
pub trait StateObjective {
    fn prob(&self) -> f64;
    /// Energy below which the state is worth nothing.
    fn threshold(&self) -> f64;
    fn value(&self, energy: f64) -> f64;
    /// Maximizer of `value(e) − λ·e` over `e ≥ threshold`.
    fn interior(&self, lambda: f64) -> f64;
}

/// Result of [`allocate_lagrangian`].
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianAllocation {
    pub energy: Vec<f64>,
    pub lambda: f64,
    pub value: f64,
    pub spent: f64,
    pub iterations: usize,
}

fn two_candidate<S: StateObjective>(states: &[S], lambda: f64) -> Vec<f64> {
    states
        .iter()
        .map(|s| {
            let e = s.interior(lambda);
            if s.value(e) - lambda * e > 0.0 {
                e
            } else {
                0.0
            }
        })
        .collect()
}

fn spent<S: StateObjective>(states: &[S], energy: &[f64]) -> f64 {
    states.iter().zip(energy).map(|(s, e)| s.prob() * e).sum()
}

fn total_value<S: StateObjective>(states: &[S], energy: &[f64]) -> f64 {
    states
        .iter()
        .zip(energy)
        .map(|(s, &e)| if e > 0.0 { s.prob() * s.value(e) } else { 0.0 })
        .sum()
}

/// Bisection on `λ` in log space for a nonincreasing `spend(λ)`; returns
/// `(λ_lo, λ_hi, iterations)` with `spend(λ_lo) ≥ budget ≥ spend(λ_hi)`, or
/// `None` when no multiplier reaches the budget.
fn bracket_lambda(spend: impl Fn(f64) -> f64, budget: f64) -> Option<(f64, f64, usize)> {
    let mut iterations = 0;
    let mut hi = 1.0;
    while spend(hi) > budget {
        hi *= 2.0;
        iterations += 1;
        if iterations > MAX_BISECTION_ITERS {
            return None;
        }
    }
    let mut lo = hi;
    while spend(lo) < budget {
        lo *= 0.5;
        iterations += 1;
        if iterations > 2 * MAX_BISECTION_ITERS || lo == 0.0 {
            // Even an infinitesimal price cannot use the whole budget.
            return Some((lo, hi, iterations));
        }
    }
    if lo == hi {
        return Some((lo, hi, iterations));
    }
    for _ in 0..MAX_BISECTION_ITERS {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi || hi - lo <= MULTIPLIER_TOL * hi {
            break;
        }
        if spend(mid) >= budget {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    Some((lo, hi, iterations))
}

/// Root of `f` on `[a, b]` where `f(a)` and `f(b)` differ in sign, by the
/// Illinois variant of regula falsi. Stops once the bracket is narrower than
/// `xtol` or `|f| ≤ ftol`.
pub fn illinois_root(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, xtol: f64, ftol: f64) -> f64 {
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return a;
    }
    if fb == 0.0 || fa.signum() == fb.signum() {
        return b;
    }
    let mut side = 0i8;
    for _ in 0..MAX_BISECTION_ITERS {
        let mut x = (a * fb - b * fa) / (fb - fa);
        if !(x > a.min(b) && x < a.max(b)) {
            x = 0.5 * (a + b);
        }
        let fx = f(x);
        if fx.abs() <= ftol {
            return x;
        }
        if fx.signum() == fb.signum() {
            b = x;
            fb = fx;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = x;
            fa = fx;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
        if (b - a).abs() <= xtol {
            break;
        }
    }
    if fa.abs() < fb.abs() {
        a
    } else {
        b
    }
}

/// Solves the problem with the active set fixed: every state in `active`
/// spends at least its threshold, all others spend nothing.
fn fixed_set<S: StateObjective>(
    states: &[S],
    active: &[bool],
    budget: f64,
) -> Option<(Vec<f64>, f64)> {
    let floor: f64 = states
        .iter()
        .zip(active)
        .filter(|(_, a)| **a)
        .map(|(s, _)| s.prob() * s.threshold())
        .sum();
    if floor > budget || !active.iter().any(|a| *a) {
        return None;
    }
    let alloc = |lambda: f64| -> Vec<f64> {
        states
            .iter()
            .zip(active)
            .map(|(s, &a)| {
                if a {
                    s.interior(lambda).max(s.threshold())
                } else {
                    0.0
                }
            })
            .collect()
    };
    // Spend is continuous in λ once the set is fixed; find the root in ln λ.
    let mut hi = 1.0;
    let mut guard = 0;
    while spent(states, &alloc(hi)) > budget {
        hi *= 4.0;
        guard += 1;
        if guard > MAX_BISECTION_ITERS {
            return None;
        }
    }
    let mut lo = hi;
    while spent(states, &alloc(lo)) < budget {
        lo *= 0.25;
        guard += 1;
        if guard > MAX_BISECTION_ITERS || lo == 0.0 {
            // The set cannot absorb the budget; spend what it can.
            return Some((alloc(lo), lo));
        }
    }
    let excess = |ln_l: f64| spent(states, &alloc(ln_l.exp())) - budget;
    let ln_l = illinois_root(excess, lo.ln(), hi.ln(), 1e-12, 0.1 * BUDGET_TOL);
    let mut lambda = ln_l.exp();
    let mut energy = alloc(lambda);
    // Land on the feasible side of the budget.
    let mut step = 1e-12;
    while spent(states, &energy) > budget + BUDGET_TOL && lambda < hi {
        lambda = (lambda * (1.0 + step)).min(hi);
        energy = alloc(lambda);
        step *= 2.0;
    }
    Some((energy, lambda))
}

/// Maximizes `Σ p·value(e)` subject to `Σ p·e ≤ budget` over states whose
/// value is flat-then-concave.
///
/// Each state takes the better of zero and its interior point at a common
/// `λ`. Because the budget curve can jump in `λ`, the active sets on both
/// sides of the final bracket are re-solved with the set held fixed. The
/// multiplier only reaches active sets on the concave hull, and a cheap
/// low-probability state can beat them when activation costs energy, so with
/// at most [`EXHAUSTIVE_STATE_LIMIT`] states every active set is re-solved
/// too. The best feasible allocation wins.
pub fn allocate_lagrangian<S: StateObjective>(states: &[S], budget: f64) -> LagrangianAllocation {
    let none = LagrangianAllocation {
        energy: vec![0.0; states.len()],
        lambda: f64::INFINITY,
        value: 0.0,
        spent: 0.0,
        iterations: 0,
    };
    if !(budget > 0.0) || states.is_empty() {
        return none;
    }
    let exhaustive = states.len() <= EXHAUSTIVE_STATE_LIMIT;
    // Every Lagrangian candidate's active set is among the enumerated ones,
    // so the multiplier search is only needed when enumeration is off.
    let bracket = if exhaustive {
        None
    } else {
        match bracket_lambda(|l| spent(states, &two_candidate(states, l)), budget) {
            Some(b) => Some(b),
            None => return none,
        }
    };
    let iterations = bracket.map_or(0, |b| b.2);

    let mut best = LagrangianAllocation { iterations, ..none };
    let mut consider = |energy: Vec<f64>, lambda: f64| {
        let used = spent(states, &energy);
        if used > budget + BUDGET_TOL {
            return;
        }
        let value = total_value(states, &energy);
        if value > best.value {
            best = LagrangianAllocation {
                energy,
                lambda,
                value,
                spent: used,
                iterations,
            };
        }
    };

    if let Some((lo, hi, _)) = bracket {
        for lambda in [lo, hi] {
            let energy = two_candidate(states, lambda);
            let active: Vec<bool> = energy.iter().map(|e| *e > 0.0).collect();
            consider(energy, lambda);
            if let Some((energy, lambda)) = fixed_set(states, &active, budget) {
                consider(energy, lambda);
            }
        }
    }
    if exhaustive {
        for mask in 1usize..(1 << states.len()) {
            let active: Vec<bool> = (0..states.len()).map(|i| mask & (1 << i) != 0).collect();
            if let Some((energy, lambda)) = fixed_set(states, &active, budget) {
                consider(energy, lambda);
            }
        }
    }
    best
}

/// Per-state objective `0.5·ln(1 + g·(β1·e − β2)⁺)` with `g = h²/σ²`.
#[derive(Debug, Clone, Copy)]
struct LossyState {
    prob: f64,
    snr_gain: f64,
    beta1: f64,
    beta2: f64,
}

impl StateObjective for LossyState {
    fn prob(&self) -> f64 {
        self.prob
    }

    fn threshold(&self) -> f64 {
        self.beta2 / self.beta1
    }

    fn value(&self, energy: f64) -> f64 {
        let eff = (self.beta1 * energy - self.beta2).max(0.0);
        0.5 * (self.snr_gain * eff).ln_1p()
    }

    fn interior(&self, lambda: f64) -> f64 {
        if self.snr_gain <= 0.0 {
            return self.threshold();
        }
        // d/de 0.5·ln(1 + g(β1e − β2)) = λ  ⇒  e = β2/β1 + 1/(2λ) − 1/(β1 g)
        self.threshold() + (0.5 / lambda - 1.0 / (self.beta1 * self.snr_gain)).max(0.0)
    }
}

/// Water-filling through a lossy buffer: maximizes
/// `Σ p(h)·0.5·ln(1 + h²(β1T(h) − β2)⁺/σ²)` subject to `Σ p(h)T(h) ≤ budget`.
pub fn waterfill_lossy(
    fade: &DiscreteDist,
    budget: f64,
    noise_var: f64,
    beta1: f64,
    beta2: f64,
) -> Result<WaterfillSolution> {
    check_budget(budget)?;
    check_noise(noise_var)?;
    if !(beta1 > 0.0 && beta1 <= 1.0) {
        return Err(invalid("beta1", format!("{beta1} must lie in (0, 1]")));
    }
    if !(beta2 >= 0.0 && beta2.is_finite()) {
        return Err(invalid("beta2", format!("{beta2} must be >= 0")));
    }
    if beta2 == 0.0 {
        // No flat region: plain water-filling at noise σ²/β1.
        let mut sol = waterfill(fade, budget, noise_var / beta1)?;
        sol.policy.budget = budget;
        return Ok(sol);
    }
    let states: Vec<LossyState> = fade
        .iter()
        .map(|(h, prob)| LossyState {
            prob,
            snr_gain: h * h / noise_var,
            beta1,
            beta2,
        })
        .collect();
    let alloc = allocate_lagrangian(&states, budget);
    if alloc.value <= 0.0 {
        return Ok(WaterfillSolution::zero(fade, budget));
    }
    let water_level = 0.5 / alloc.lambda;
    Ok(WaterfillSolution {
        policy: policy_from(fade, &alloc.energy, water_level, budget),
        water_level,
        achieved_budget: alloc.spent,
        rate_nats: alloc.value,
        iterations: alloc.iterations,
    })
}

/// `β1·E[(Y − c)⁺] − E[(c − Y)⁺] − β2`, nonincreasing in `c`.
pub fn hus_surplus(harvest: &DiscreteDist, beta1: f64, beta2: f64, c: f64) -> f64 {
    harvest.expect(|y| beta1 * (y - c).max(0.0) - (c - y).max(0.0)) - beta2
}

/// Largest constant per-slot spend `c ≥ 0` with nonnegative buffer drift
/// under harvest-use-store, i.e. `β1·E[(Y − c)⁺] ≥ E[(c − Y)⁺] + β2`.
/// Returns 0 when no positive `c` qualifies.
pub fn hus_threshold(harvest: &DiscreteDist, beta1: f64, beta2: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&beta1) {
        return Err(invalid("beta1", format!("{beta1} outside [0, 1]")));
    }
    if !(beta2 >= 0.0 && beta2.is_finite()) {
        return Err(invalid("beta2", format!("{beta2} must be >= 0")));
    }
    let surplus = |c: f64| hus_surplus(harvest, beta1, beta2, c);
    if surplus(0.0) < 0.0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, harvest.max_value());
    if surplus(hi) >= 0.0 {
        return Ok(hi);
    }
    for _ in 0..MAX_BISECTION_ITERS {
        if hi - lo <= 1e-15 * hi.max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if surplus(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Returns an error unless the fade distribution has a positive gain.
pub fn require_positive_gain(fade: &DiscreteDist) -> Result<()> {
    if fade.max_value() > 0.0 {
        Ok(())
    } else {
        Err(Error::Precondition("all fade gains are zero".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example1_fade() -> DiscreteDist {
        DiscreteDist::new(vec![0.4, 0.8, 1.0], vec![0.4, 0.5, 0.1]).unwrap()
    }

    fn example1_harvest() -> DiscreteDist {
        DiscreteDist::new(vec![0.5, 1.0], vec![0.6, 0.4]).unwrap()
    }

    #[test]
    fn single_state_takes_whole_budget() {
        let fade = DiscreteDist::point(1.0).unwrap();
        let sol = waterfill(&fade, 0.7, 1.0).unwrap();
        assert!((sol.policy.energies()[0] - 0.7).abs() < 1e-12);
        assert!((sol.rate_nats - 0.5 * 1.7f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn tiny_budget_activates_only_best_state() {
        let sol = waterfill(&example1_fade(), 1e-6, 1.0).unwrap();
        assert_eq!(sol.policy.active_gains(), vec![1.0]);
        assert!(sol.rate_nats < 1e-6);
    }

    #[test]
    fn kkt_holds_on_example1() {
        let sol = waterfill(&example1_fade(), 0.7, 1.0).unwrap();
        assert!((sol.achieved_budget - 0.7).abs() < 1e-12);
        for s in &sol.policy.per_state {
            let g = s.gain * s.gain;
            let marginal = g / (1.0 + g * s.energy);
            if s.energy > 0.0 {
                assert!((marginal - 1.0 / sol.water_level).abs() < 1e-10);
            } else {
                assert!(marginal <= 1.0 / sol.water_level + 1e-12);
            }
        }
    }

    #[test]
    fn zero_gain_states_get_nothing() {
        let fade = DiscreteDist::new(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        let sol = waterfill(&fade, 1.0, 1.0).unwrap();
        assert_eq!(sol.policy.energies(), vec![0.0, 2.0]);
        assert!(waterfill(&DiscreteDist::point(0.0).unwrap(), 1.0, 1.0).is_err());
    }

    #[test]
    fn rejects_nonpositive_budget() {
        assert!(waterfill(&example1_fade(), 0.0, 1.0).is_err());
        assert!(waterfill_lossy(&example1_fade(), -1.0, 1.0, 0.5, 0.0).is_err());
    }

    #[test]
    fn lossless_lossy_matches_waterfill_exactly() {
        let a = waterfill(&example1_fade(), 0.7, 1.0).unwrap();
        let b = waterfill_lossy(&example1_fade(), 0.7, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_leak_is_waterfill_at_scaled_noise() {
        let a = waterfill_lossy(&example1_fade(), 0.7, 1.0, 0.7, 0.0).unwrap();
        let b = waterfill(&example1_fade(), 0.7, 1.0 / 0.7).unwrap();
        assert_eq!(a.policy.energies(), b.policy.energies());
        // Substitution identity: 0.5 ln(1 + h²·0.7·T) evaluated directly.
        let direct: f64 = example1_fade()
            .iter()
            .zip(a.policy.energies())
            .map(|((h, p), t)| p * 0.5 * (1.0 + h * h * 0.7 * t).ln())
            .sum();
        assert!((a.rate_nats - direct).abs() < 1e-14);
    }

    #[test]
    fn huge_leak_gives_zero_policy() {
        let sol = waterfill_lossy(&example1_fade(), 0.7, 1.0, 0.7, 5.0).unwrap();
        assert_eq!(sol.rate_nats, 0.0);
        assert!(sol.policy.energies().iter().all(|e| *e == 0.0));
    }

    #[test]
    fn leaky_policy_respects_budget_and_threshold() {
        let sol = waterfill_lossy(&example1_fade(), 0.7, 1.0, 0.8, 0.1).unwrap();
        assert!(sol.achieved_budget <= 0.7 + 1e-9);
        for e in sol.policy.energies() {
            assert!(e == 0.0 || e > 0.1 / 0.8);
        }
        assert!(sol.rate_nats > 0.0);
    }

    #[test]
    fn hus_threshold_lossless_is_mean() {
        let c = hus_threshold(&example1_harvest(), 1.0, 0.0).unwrap();
        assert!((c - 0.7).abs() < 1e-12);
    }

    #[test]
    fn hus_threshold_example1() {
        let c = hus_threshold(&example1_harvest(), 0.7, 0.0).unwrap();
        // 0.28(1 − c) = 0.6(c − 0.5) on (0.5, 1)
        assert!((c - 0.58 / 0.88).abs() < 1e-12, "{c}");
        assert!((c - 0.659090909).abs() < 1e-9);
    }

    #[test]
    fn hus_threshold_zero_when_leak_dominates() {
        let y = DiscreteDist::point(0.7).unwrap();
        assert_eq!(hus_threshold(&y, 0.9, 0.9 * 0.7 + 0.01).unwrap(), 0.0);
    }
}
