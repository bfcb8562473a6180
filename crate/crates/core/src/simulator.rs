//! Monte Carlo simulation of the energy buffer under each transmission
//! policy, used to check that the analytic rates are actually reachable.
//!
//! Every step draws the fade `H_k` and the harvest `Y_k` (in that order),
//! picks the policy's requested energy `T'_k`, truncates it to what the
//! buffer can give, credits the per-slot rate and updates the buffer with the
//! architecture's recursion. Statistics are reported over the second half of
//! the path; full-path values are kept for transient studies.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::allocator::{hus_threshold, waterfill, waterfill_lossy};
use crate::error::{invalid, Error, Result};
use crate::infocalc::mixture_mi;
use crate::model::{Csit, DiscreteDist, Scenario, TrajectoryStats};
use crate::rates::{hu_slot_rate, sleep_allocation};

/// Default slack between the harvest rate and the policy's mean spend.
pub const DEFAULT_DELTA: f64 = 1e-3;
/// Shortest path `simulate` accepts.
pub const MIN_STEPS: usize = 1000;
/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Transmission policy driven through the buffer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum PolicyKind {
    /// Water-filling on `E[Y] − δ` through an ideal buffer.
    IdealCsit,
    /// Constant `E[Y] − δ` through an ideal buffer.
    IdealNcsit,
    /// Lossy water-filling through a lossy store-then-use buffer.
    HsuLossyCsit,
    /// Constant `β1·E[Y] − β2 − δ` through a lossy store-then-use buffer.
    HsuLossyNcsit,
    /// Water-filling on `c − δ` through a use-then-store buffer.
    HusCsit,
    /// Constant `c − δ` through a use-then-store buffer.
    HusNcsit,
    /// Spend each harvest immediately; no buffer.
    Hu,
    /// Processing cost `α` each slot, transmit on `E[Y] − α − δ`.
    Processing,
    /// Randomized sleep with the given sleep probability.
    Sleep(f64),
}

impl PolicyKind {
    pub fn name(&self) -> String {
        match self {
            PolicyKind::IdealCsit => "IDEAL_CSIT".into(),
            PolicyKind::IdealNcsit => "IDEAL_NCSIT".into(),
            PolicyKind::HsuLossyCsit => "HSU_LOSSY_CSIT".into(),
            PolicyKind::HsuLossyNcsit => "HSU_LOSSY_NCSIT".into(),
            PolicyKind::HusCsit => "HUS_CSIT".into(),
            PolicyKind::HusNcsit => "HUS_NCSIT".into(),
            PolicyKind::Hu => "HU".into(),
            PolicyKind::Processing => "PROCESSING".into(),
            PolicyKind::Sleep(p) => format!("SLEEP({p})"),
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    /// Accepts the names printed by [`PolicyKind::name`], case-insensitively;
    /// `HUS` alone means the constant-spend variant.
    fn from_str(s: &str) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase();
        let kind = match upper.as_str() {
            "IDEAL_CSIT" => PolicyKind::IdealCsit,
            "IDEAL_NCSIT" => PolicyKind::IdealNcsit,
            "HSU_LOSSY_CSIT" => PolicyKind::HsuLossyCsit,
            "HSU_LOSSY_NCSIT" => PolicyKind::HsuLossyNcsit,
            "HUS_CSIT" => PolicyKind::HusCsit,
            "HUS" | "HUS_NCSIT" => PolicyKind::HusNcsit,
            "HU" => PolicyKind::Hu,
            "PROCESSING" => PolicyKind::Processing,
            _ => {
                let p = upper
                    .strip_prefix("SLEEP(")
                    .and_then(|rest| rest.strip_suffix(')'))
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| invalid("policy", format!("unknown policy '{s}'")))?;
                PolicyKind::Sleep(p)
            }
        };
        Ok(kind)
    }
}

/// Knobs shared by every simulation entry point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub policy: PolicyKind,
    /// Slack `δ` subtracted from the sustainable spend.
    pub delta: f64,
    /// Buffer content before the first step.
    pub initial_energy: f64,
}

impl SimConfig {
    pub fn new(policy: PolicyKind) -> Self {
        Self {
            policy,
            delta: DEFAULT_DELTA,
            initial_energy: 0.0,
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_initial_energy(mut self, energy: f64) -> Self {
        self.initial_energy = energy;
        self
    }
}

/// One simulated slot, for trace dumps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepRecord {
    pub k: usize,
    pub harvest: f64,
    pub fade: f64,
    /// Buffer content at the start of the slot.
    pub energy: f64,
    /// Energy the policy actually used for transmission.
    pub used: f64,
    pub truncated: bool,
    pub clipped: bool,
}

/// `E_{k+1} = (E_k − T_k) + Y_k`.
pub fn ideal_step(energy: f64, used: f64, harvest: f64) -> f64 {
    (energy - used) + harvest
}

/// `E_{k+1} = ((E_k − T_k) − β2)⁺ + β1·Y_k`.
pub fn hsu_step(energy: f64, used: f64, harvest: f64, beta1: f64, beta2: f64) -> f64 {
    ((energy - used) - beta2).max(0.0) + beta1 * harvest
}

/// `E_{k+1} = ((E_k + β1(Y_k − T_k)⁺ − (T_k − Y_k)⁺)⁺ − β2)⁺`: the surplus
/// harvest is stored at efficiency `β1`, a deficit is drawn from the buffer,
/// the sum is clamped at zero and only then does the leak apply.
pub fn hus_step(energy: f64, used: f64, harvest: f64, beta1: f64, beta2: f64) -> f64 {
    let stored = (harvest - used).max(0.0);
    let drawn = (used - harvest).max(0.0);
    ((energy + beta1 * stored - drawn).max(0.0) - beta2).max(0.0)
}

/// How a policy moves energy through the buffer.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Recursion {
    Ideal,
    Hsu { beta1: f64, beta2: f64 },
    Hus { beta1: f64, beta2: f64 },
    Bufferless,
    Processing { cost: f64 },
    Sleep { p: f64, cost: f64 },
}

/// A policy compiled against a scenario: requested energy and per-slot rate
/// for every fade state, plus the recursion that carries the buffer.
#[derive(Debug, Clone)]
struct Plan {
    recursion: Recursion,
    /// Requested transmit energy per fade state.
    request: Vec<f64>,
    /// Rate credited for a slot that receives its full request, per fade
    /// state (or per `(harvest, fade)` pair for the bufferless policy).
    full_rate: Vec<f64>,
    noise_var: f64,
    fade: DiscreteDist,
    /// Rate the plan targets when nothing is ever truncated.
    target_rate: f64,
}

impl Plan {
    fn gaussian(s: &Scenario, recursion: Recursion, request: Vec<f64>) -> Self {
        let full_rate: Vec<f64> = s
            .fade
            .support()
            .iter()
            .zip(&request)
            .map(|(h, t)| slot_rate(*h, *t, s.noise_var))
            .collect();
        let target_rate = s
            .fade
            .probs()
            .iter()
            .zip(&full_rate)
            .map(|(p, r)| p * r)
            .sum();
        Self {
            recursion,
            request,
            full_rate,
            noise_var: s.noise_var,
            fade: s.fade.clone(),
            target_rate,
        }
    }

    fn build(s: &Scenario, cfg: &SimConfig) -> Result<Self> {
        s.check()?;
        if !(cfg.delta >= 0.0 && cfg.delta.is_finite()) {
            return Err(invalid("delta", format!("{} must be ≥ 0", cfg.delta)));
        }
        if !(cfg.initial_energy >= 0.0 && cfg.initial_energy.is_finite()) {
            return Err(invalid(
                "initial_energy",
                format!("{} must be ≥ 0", cfg.initial_energy),
            ));
        }
        let mean = s.mean_harvest();
        let n = s.fade.len();
        let (b1, b2) = (s.beta1, s.beta2);
        let need_lossless = |what: &str| -> Result<()> {
            if s.beta1 == 1.0 && s.beta2 == 0.0 {
                Ok(())
            } else {
                Err(Error::Precondition(format!(
                    "{what} simulation assumes lossless storage (β1=1, β2=0)"
                )))
            }
        };
        let constant = |power: f64| vec![power.max(0.0); n];
        let plan = match cfg.policy {
            PolicyKind::IdealCsit => {
                need_lossless("ideal")?;
                Self::gaussian(
                    s,
                    Recursion::Ideal,
                    waterfill_request(&s.fade, mean - cfg.delta, s.noise_var)?,
                )
            }
            PolicyKind::IdealNcsit => {
                need_lossless("ideal")?;
                Self::gaussian(s, Recursion::Ideal, constant(mean - cfg.delta))
            }
            PolicyKind::HsuLossyNcsit => Self::gaussian(
                s,
                Recursion::Hsu {
                    beta1: b1,
                    beta2: b2,
                },
                constant(b1 * mean - b2 - cfg.delta),
            ),
            PolicyKind::HsuLossyCsit => {
                // Harvest-side allocation T(h) becomes transmit energy β1·T(h) − β2.
                let budget = mean - cfg.delta;
                let request = if budget > 0.0 && b1 > 0.0 && s.fade.max_value() > 0.0 {
                    let sol = waterfill_lossy(&s.fade, budget, s.noise_var, b1, b2)?;
                    sol.policy
                        .energies()
                        .iter()
                        .map(|t| {
                            if *t > 0.0 {
                                (b1 * t - b2).max(0.0)
                            } else {
                                0.0
                            }
                        })
                        .collect()
                } else {
                    vec![0.0; n]
                };
                Self::gaussian(
                    s,
                    Recursion::Hsu {
                        beta1: b1,
                        beta2: b2,
                    },
                    request,
                )
            }
            PolicyKind::HusNcsit => {
                let c = hus_threshold(&s.harvest, b1, b2)?;
                Self::gaussian(
                    s,
                    Recursion::Hus {
                        beta1: b1,
                        beta2: b2,
                    },
                    constant(c - cfg.delta),
                )
            }
            PolicyKind::HusCsit => {
                let c = hus_threshold(&s.harvest, b1, b2)?;
                Self::gaussian(
                    s,
                    Recursion::Hus {
                        beta1: b1,
                        beta2: b2,
                    },
                    waterfill_request(&s.fade, c - cfg.delta, s.noise_var)?,
                )
            }
            PolicyKind::Processing => {
                need_lossless("processing")?;
                let budget = mean - s.alpha - cfg.delta;
                let request = match s.csit {
                    Csit::Perfect => waterfill_request(&s.fade, budget, s.noise_var)?,
                    Csit::None => constant(budget),
                };
                Self::gaussian(s, Recursion::Processing { cost: s.alpha }, request)
            }
            PolicyKind::Hu => {
                let mut full_rate = Vec::with_capacity(s.harvest.len() * n);
                let mut target_rate = 0.0;
                for (y, py) in s.harvest.iter() {
                    for (h, ph) in s.fade.iter() {
                        let r = hu_slot_rate(y, h, s.noise_var, s.csit)?.nats;
                        target_rate += py * ph * r;
                        full_rate.push(r);
                    }
                }
                Self {
                    recursion: Recursion::Bufferless,
                    request: vec![0.0; n],
                    full_rate,
                    noise_var: s.noise_var,
                    fade: s.fade.clone(),
                    target_rate,
                }
            }
            PolicyKind::Sleep(p) => {
                need_lossless("sleep")?;
                if !(0.0..1.0).contains(&p) {
                    return Err(invalid("p_sleep", format!("{p} outside [0, 1)")));
                }
                let alloc = sleep_allocation(s, p, (mean - cfg.delta).max(0.0))?;
                let mut full_rate = Vec::with_capacity(n);
                for (h, v) in s.fade.support().iter().zip(&alloc.awake_var) {
                    full_rate.push(mixture_mi(p, *v, *h, s.noise_var)?);
                }
                let target_rate = s
                    .fade
                    .probs()
                    .iter()
                    .zip(&full_rate)
                    .map(|(q, r)| q * r)
                    .sum();
                Self {
                    recursion: Recursion::Sleep { p, cost: s.alpha },
                    request: alloc.awake_var,
                    full_rate,
                    noise_var: s.noise_var,
                    fade: s.fade.clone(),
                    target_rate,
                }
            }
        };
        Ok(plan)
    }
}

fn slot_rate(h: f64, energy: f64, noise_var: f64) -> f64 {
    if energy <= 0.0 {
        0.0
    } else {
        0.5 * (h * h * energy / noise_var).ln_1p()
    }
}

fn waterfill_request(fade: &DiscreteDist, budget: f64, noise_var: f64) -> Result<Vec<f64>> {
    if budget <= 0.0 || fade.max_value() == 0.0 {
        return Ok(vec![0.0; fade.len()]);
    }
    Ok(waterfill(fade, budget, noise_var)?.policy.energies())
}

/// The rate a policy targets on this scenario, including its `δ` slack: the
/// value a long simulation should converge to when truncation vanishes.
pub fn analytic_rate(s: &Scenario, cfg: &SimConfig) -> Result<f64> {
    Ok(Plan::build(s, cfg)?.target_rate)
}

/// Running sums over one half of the path.
#[derive(Debug, Default, Clone, Copy)]
struct Tally {
    steps: usize,
    rate: f64,
    used: f64,
    truncated: usize,
    clipped: usize,
    // Least-squares sums for E_k against k.
    sk: f64,
    se: f64,
    skk: f64,
    ske: f64,
}

impl Tally {
    fn add(&mut self, k: usize, energy: f64, rate: f64, used: f64, truncated: bool, clipped: bool) {
        self.steps += 1;
        self.rate += rate;
        self.used += used;
        self.truncated += usize::from(truncated);
        self.clipped += usize::from(clipped);
        let kf = k as f64;
        self.sk += kf;
        self.se += energy;
        self.skk += kf * kf;
        self.ske += kf * energy;
    }

    fn slope(&self) -> f64 {
        let n = self.steps as f64;
        let denom = n * self.skk - self.sk * self.sk;
        if denom <= 0.0 {
            0.0
        } else {
            (n * self.ske - self.sk * self.se) / denom
        }
    }

    fn merge(&self, other: &Tally) -> Tally {
        Tally {
            steps: self.steps + other.steps,
            rate: self.rate + other.rate,
            used: self.used + other.used,
            truncated: self.truncated + other.truncated,
            clipped: self.clipped + other.clipped,
            sk: self.sk + other.sk,
            se: self.se + other.se,
            skk: self.skk + other.skk,
            ske: self.ske + other.ske,
        }
    }
}

fn frac(count: usize, steps: usize) -> f64 {
    if steps == 0 {
        0.0
    } else {
        count as f64 / steps as f64
    }
}

fn run(
    s: &Scenario,
    cfg: &SimConfig,
    n_steps: usize,
    rng: &mut ChaCha8Rng,
    signaling: bool,
    mut trace: Option<&mut dyn FnMut(&StepRecord)>,
) -> Result<TrajectoryStats> {
    if n_steps < MIN_STEPS {
        return Err(invalid(
            "n_steps",
            format!("{n_steps} is below {MIN_STEPS}"),
        ));
    }
    let plan = Plan::build(s, cfg)?;
    if signaling
        && matches!(
            plan.recursion,
            Recursion::Bufferless | Recursion::Sleep { .. }
        )
    {
        return Err(Error::Precondition(format!(
            "policy {} has no clipped Gaussian codeword to simulate",
            cfg.policy
        )));
    }
    let fade_support = plan.fade.support();
    let n_fade = fade_support.len();
    let half = n_steps / 2;
    let (mut first, mut second) = (Tally::default(), Tally::default());
    let mut energy = cfg.initial_energy;

    for k in 0..n_steps {
        let hi = plan.fade.sample_index(rng);
        let yi = s.harvest.sample_index(rng);
        let h = fade_support[hi];
        let y = s.harvest.support()[yi];
        let start = energy;
        let mut clipped = false;

        let (used, rate, truncated) = match plan.recursion {
            Recursion::Bufferless => (y, plan.full_rate[yi * n_fade + hi], false),
            Recursion::Sleep { p, cost } => {
                let want = plan.request[hi];
                if want <= 0.0 {
                    // Nothing to send in this state: the slot is asleep by design.
                    (0.0, plan.full_rate[hi], false)
                } else if energy < cost + want {
                    // Forced asleep; the slot carries no information.
                    (0.0, 0.0, true)
                } else if rng.random::<f64>() < p {
                    (0.0, plan.full_rate[hi], false)
                } else {
                    energy -= cost;
                    (want, plan.full_rate[hi], false)
                }
            }
            Recursion::Processing { cost } => {
                let spent = cost.min(energy);
                energy -= spent;
                let want = plan.request[hi];
                let t = want.min(energy);
                let truncated = t < want || spent < cost;
                let rate = if truncated {
                    slot_rate(h, t, plan.noise_var)
                } else {
                    plan.full_rate[hi]
                };
                (t, rate, truncated)
            }
            Recursion::Ideal | Recursion::Hsu { .. } | Recursion::Hus { .. } => {
                let want = plan.request[hi];
                let t = want.min(energy);
                let truncated = t < want;
                let rate = if truncated {
                    slot_rate(h, t, plan.noise_var)
                } else {
                    plan.full_rate[hi]
                };
                (t, rate, truncated)
            }
        };

        // With signaling the buffer pays for the actual symbol, clipped at √E_k.
        let debit = if signaling {
            let x: f64 = rng.sample(StandardNormal);
            let symbol = used * x * x;
            if symbol > energy {
                clipped = true;
                energy
            } else {
                symbol
            }
        } else {
            used
        };

        energy = match plan.recursion {
            Recursion::Ideal | Recursion::Processing { .. } | Recursion::Sleep { .. } => {
                ideal_step(energy, debit, y)
            }
            Recursion::Hsu { beta1, beta2 } => hsu_step(energy, debit, y, beta1, beta2),
            Recursion::Hus { beta1, beta2 } => hus_step(energy, debit, y, beta1, beta2),
            Recursion::Bufferless => 0.0,
        }
        .max(0.0);

        let tally = if k < half { &mut first } else { &mut second };
        tally.add(k, start, rate, used, truncated || clipped, clipped);
        if let Some(sink) = trace.as_deref_mut() {
            sink(&StepRecord {
                k,
                harvest: y,
                fade: h,
                energy: start,
                used,
                truncated,
                clipped,
            });
        }
    }

    let all = first.merge(&second);
    Ok(TrajectoryStats {
        n_steps,
        empirical_rate_nats: second.rate / second.steps as f64,
        full_path_rate_nats: all.rate / all.steps as f64,
        mean_used_energy: second.used / second.steps as f64,
        truncation_fraction: frac(second.truncated, second.steps),
        full_path_truncation_fraction: frac(all.truncated, all.steps),
        clip_fraction: frac(second.clipped, second.steps),
        final_buffer: energy,
        buffer_slope: second.slope(),
    })
}

/// Generator for one replication: stream `index` of the ChaCha8 generator
/// seeded with `seed`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Steps the buffer for `n_steps` slots, debiting the requested energy.
pub fn simulate(
    s: &Scenario,
    cfg: &SimConfig,
    n_steps: usize,
    seed: u64,
) -> Result<TrajectoryStats> {
    run(s, cfg, n_steps, &mut stream_rng(seed, 0), false, None)
}

/// [`simulate`], or [`simulate_signaling`] when `signaling` is set, with a
/// callback receiving every slot.
pub fn simulate_traced(
    s: &Scenario,
    cfg: &SimConfig,
    n_steps: usize,
    seed: u64,
    signaling: bool,
    sink: &mut dyn FnMut(&StepRecord),
) -> Result<TrajectoryStats> {
    run(
        s,
        cfg,
        n_steps,
        &mut stream_rng(seed, 0),
        signaling,
        Some(sink),
    )
}

/// Like [`simulate`], but each slot sends `sgn(X')·min(√T|X'|, √E_k)` for a
/// fresh unit Gaussian `X'` and the buffer pays the symbol's actual energy.
/// Clipped slots count as truncated.
pub fn simulate_signaling(
    s: &Scenario,
    cfg: &SimConfig,
    n_steps: usize,
    seed: u64,
) -> Result<TrajectoryStats> {
    run(s, cfg, n_steps, &mut stream_rng(seed, 0), true, None)
}

/// Independent replications aggregated into a normal-approximation 95%
/// confidence interval for the empirical rate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Replicated {
    pub n_reps: usize,
    pub mean_rate_nats: f64,
    pub std_err: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub mean_truncation_fraction: f64,
    pub mean_clip_fraction: f64,
    pub mean_buffer_slope: f64,
    pub runs: Vec<TrajectoryStats>,
}

impl Replicated {
    pub fn contains(&self, value: f64) -> bool {
        self.ci_low <= value && value <= self.ci_high
    }

    pub fn ci_half_width(&self) -> f64 {
        0.5 * (self.ci_high - self.ci_low)
    }
}

/// Runs `n_reps` replications, replicate `i` on stream `i` of `base_seed`.
/// Replications run in parallel; the result does not depend on scheduling.
pub fn replicate(
    s: &Scenario,
    cfg: &SimConfig,
    n_steps: usize,
    n_reps: usize,
    base_seed: u64,
    signaling: bool,
) -> Result<Replicated> {
    if n_reps < 2 {
        return Err(invalid("n_reps", format!("{n_reps} must be at least 2")));
    }
    // Fail fast on bad inputs before spawning work.
    Plan::build(s, cfg)?;
    let runs: Vec<TrajectoryStats> = (0..n_reps as u64)
        .into_par_iter()
        .map(|i| {
            run(
                s,
                cfg,
                n_steps,
                &mut stream_rng(base_seed, i),
                signaling,
                None,
            )
        })
        .collect::<Result<_>>()?;
    let n = n_reps as f64;
    let mean_of = |f: fn(&TrajectoryStats) -> f64| runs.iter().map(f).sum::<f64>() / n;
    let mean = mean_of(|r| r.empirical_rate_nats);
    let var = runs
        .iter()
        .map(|r| (r.empirical_rate_nats - mean).powi(2))
        .sum::<f64>()
        / (n - 1.0);
    let std_err = (var / n).sqrt();
    Ok(Replicated {
        n_reps,
        mean_rate_nats: mean,
        std_err,
        ci_low: mean - Z95 * std_err,
        ci_high: mean + Z95 * std_err,
        mean_truncation_fraction: mean_of(|r| r.truncation_fraction),
        mean_clip_fraction: mean_of(|r| r.clip_fraction),
        mean_buffer_slope: mean_of(|r| r.buffer_slope),
        runs,
    })
}
