//! Mutual information of non-Gaussian inputs on the real AWGN channel.
//!
//! Everything is in nats. Output entropies `h(W)` are computed numerically
//! and the noise entropy `0.5·ln(2πeσ²)` is subtracted.

use std::f64::consts::{LN_2, PI};

use crate::error::{invalid, Error, Result};
use crate::quadrature::{integrate, Estimate, GaussHermite, DEFAULT_ABS_TOL};

/// Largest peak amplitude `√y` for which equiprobable binary signaling is
/// capacity achieving under a peak constraint.
pub const PEAK_AMPLITUDE_LIMIT: f64 = 1.05;
/// `PEAK_AMPLITUDE_LIMIT²`, the largest accepted peak power.
pub const PEAK_POWER_LIMIT: f64 = 1.1025;
/// Integration half-width in combined standard deviations.
pub const CUTOFF_SIGMAS: f64 = 12.0;

fn check_noise(noise_var: f64) -> Result<()> {
    if noise_var > 0.0 && noise_var.is_finite() {
        Ok(())
    } else {
        Err(invalid("noise_var", format!("{noise_var} must be > 0")))
    }
}

fn check_nonneg(name: &'static str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("{v} must be finite and >= 0")))
    }
}

/// `ln cosh x` without overflow.
pub fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - LN_2
}

fn noise_entropy(noise_var: f64) -> f64 {
    0.5 * (2.0 * PI * std::f64::consts::E * noise_var).ln()
}

/// `0.5·ln(1 + h²·power/σ²)`.
pub fn gaussian_rate(h: f64, power: f64, noise_var: f64) -> Result<f64> {
    check_noise(noise_var)?;
    check_nonneg("h", h)?;
    check_nonneg("power", power)?;
    Ok(0.5 * (h * h * power / noise_var).ln_1p())
}

/// Capacity of the unit-noise AWGN channel under peak power `y`, valid for
/// `√y ≤ 1.05`:
///
/// `C(y) = y − E[ln cosh(y − √y·X)]`, `X ~ N(0, 1)`.
pub fn peak_capacity_closed(y: f64) -> Result<f64> {
    peak_capacity_closed_est(y).map(|e| e.value)
}

/// [`peak_capacity_closed`] with the difference between the 96- and
/// 48-node Gauss–Hermite evaluations as error estimate.
pub fn peak_capacity_closed_est(y: f64) -> Result<Estimate> {
    check_nonneg("y", y)?;
    if y > PEAK_POWER_LIMIT * (1.0 + 1e-12) {
        return Err(Error::OutOfValidity {
            amplitude: y.sqrt(),
            limit: PEAK_AMPLITUDE_LIMIT,
        });
    }
    if y == 0.0 {
        return Ok(Estimate {
            value: 0.0,
            abs_err: 0.0,
        });
    }
    let amp = y.sqrt();
    let eval = |rule: &GaussHermite| y - rule.normal_expectation(1.0, |x| ln_cosh(y - amp * x));
    let fine = eval(GaussHermite::default_rule());
    let coarse = eval(GaussHermite::coarse_rule());
    Ok(Estimate {
        value: fine.max(0.0),
        abs_err: (fine - coarse).abs(),
    })
}

/// `I(X; W)` for `X` uniform on `{−a, +a}` and `W = X + N(0, σ²)`.
pub fn binary_mi(amplitude: f64, noise_var: f64) -> Result<f64> {
    binary_mi_est(amplitude, noise_var, DEFAULT_ABS_TOL).map(|e| e.value)
}

/// [`binary_mi`] with the adaptive-quadrature error bound.
pub fn binary_mi_est(amplitude: f64, noise_var: f64, abs_tol: f64) -> Result<Estimate> {
    check_nonneg("amplitude", amplitude)?;
    check_noise(noise_var)?;
    if amplitude == 0.0 {
        return Ok(Estimate {
            value: 0.0,
            abs_err: 0.0,
        });
    }
    let sigma = noise_var.sqrt();
    let a = amplitude;
    let log_norm = -0.5 * (2.0 * PI * noise_var).ln();
    // ln g(w) for the two-Gaussian output mixture, in a cancellation-free form.
    let ln_density =
        |w: f64| log_norm - (w * w + a * a) / (2.0 * noise_var) + ln_cosh(a * w / noise_var);
    let integrand = |w: f64| {
        let lg = ln_density(w);
        -lg.exp() * lg
    };
    let half = a + CUTOFF_SIGMAS * sigma;
    // Integrate each half separately; the integrand is even.
    let est = integrate(integrand, 0.0, half, 0.05 * abs_tol);
    let entropy = 2.0 * est.value;
    Ok(Estimate {
        value: (entropy - noise_entropy(noise_var)).clamp(0.0, LN_2),
        abs_err: 2.0 * est.abs_err,
    })
}

/// Peak-power-limited rate for peak energy `y` at fade `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakRate {
    pub nats: f64,
    pub abs_err: f64,
    /// Set when the closed form was out of range and binary signaling was
    /// used as an achievable lower bound.
    pub lower_bound: bool,
}

/// Capacity with peak energy `y` at fade `h` and noise `σ²`, mapped to the
/// unit-noise closed form through `y·h²/σ²`; falls back to [`binary_mi`]
/// above the validity limit.
pub fn peak_rate(y: f64, h: f64, noise_var: f64) -> Result<PeakRate> {
    check_nonneg("y", y)?;
    check_nonneg("h", h)?;
    check_noise(noise_var)?;
    let y_eff = y * h * h / noise_var;
    match peak_capacity_closed_est(y_eff) {
        Ok(est) => Ok(PeakRate {
            nats: est.value,
            abs_err: est.abs_err,
            lower_bound: false,
        }),
        Err(Error::OutOfValidity { .. }) => {
            let est = binary_mi_est(y_eff.sqrt(), 1.0, DEFAULT_ABS_TOL)?;
            Ok(PeakRate {
                nats: est.value,
                abs_err: est.abs_err,
                lower_bound: true,
            })
        }
        Err(e) => Err(e),
    }
}

fn check_sleep(p_sleep: f64) -> Result<()> {
    if (0.0..1.0).contains(&p_sleep) {
        Ok(())
    } else {
        Err(invalid("p_sleep", format!("{p_sleep} outside [0, 1)")))
    }
}

/// `ln g(w)` for `g = p·N(0, σ²) + (1 − p)·N(0, s²)`.
fn ln_mixture_density(p: f64, noise_var: f64, awake_out_var: f64, w: f64) -> f64 {
    let comp =
        |weight: f64, var: f64| weight.ln() - 0.5 * (2.0 * PI * var).ln() - w * w / (2.0 * var);
    let awake = comp(1.0 - p, awake_out_var);
    if p == 0.0 {
        return awake;
    }
    let asleep = comp(p, noise_var);
    let m = awake.max(asleep);
    m + ((awake - m).exp() + (asleep - m).exp()).ln()
}

/// `h(W)` of the output mixture by adaptive quadrature on the half-line
/// (the density is even). Gauss–Hermite is not used here: when `s² ≫ σ²`,
/// `ln g` bends sharply where the two components cross.
fn mixture_entropy(p: f64, noise_var: f64, awake_out_var: f64, abs_tol: f64) -> Estimate {
    let integrand = |w: f64| {
        let lg = ln_mixture_density(p, noise_var, awake_out_var, w);
        -lg.exp() * lg
    };
    let half = CUTOFF_SIGMAS * awake_out_var.max(noise_var).sqrt();
    let est = integrate(integrand, 0.0, half, 0.25 * abs_tol);
    Estimate {
        value: 2.0 * est.value,
        abs_err: 2.0 * est.abs_err,
    }
}

/// `I(X; W)` for `X = 0` with probability `p_sleep` and `X ~ N(0, v)`
/// otherwise, over `W = hX + N(0, σ²)`.
pub fn mixture_mi(p_sleep: f64, awake_var: f64, h: f64, noise_var: f64) -> Result<f64> {
    mixture_mi_est(p_sleep, awake_var, h, noise_var, DEFAULT_ABS_TOL).map(|e| e.value)
}

/// [`mixture_mi`] at an explicit tolerance, with its error bound.
pub fn mixture_mi_est(
    p_sleep: f64,
    awake_var: f64,
    h: f64,
    noise_var: f64,
    abs_tol: f64,
) -> Result<Estimate> {
    check_sleep(p_sleep)?;
    check_nonneg("awake_var", awake_var)?;
    check_nonneg("h", h)?;
    check_noise(noise_var)?;
    let awake_out_var = h * h * awake_var + noise_var;
    if awake_out_var == noise_var {
        return Ok(Estimate {
            value: 0.0,
            abs_err: 0.0,
        });
    }
    if p_sleep == 0.0 {
        return Ok(Estimate {
            value: 0.5 * (h * h * awake_var / noise_var).ln_1p(),
            abs_err: 0.0,
        });
    }
    let ent = mixture_entropy(p_sleep, noise_var, awake_out_var, abs_tol);
    Ok(Estimate {
        value: (ent.value - noise_entropy(noise_var)).max(0.0),
        abs_err: ent.abs_err,
    })
}

/// `∂/∂v` of [`mixture_mi`]. With `s² = h²v + σ²`,
/// `∂h(W)/∂v = −(1 − p)·h²/(2s⁴)·∫ N(w; 0, s²)(w² − s²)·ln g(w) dw`.
pub fn mixture_mi_dv(p_sleep: f64, awake_var: f64, h: f64, noise_var: f64) -> Result<f64> {
    check_sleep(p_sleep)?;
    check_nonneg("awake_var", awake_var)?;
    check_nonneg("h", h)?;
    check_noise(noise_var)?;
    let s2 = h * h * awake_var + noise_var;
    if p_sleep == 0.0 {
        return Ok(h * h / (2.0 * s2));
    }
    let integrand = |w: f64| {
        let dens = (-w * w / (2.0 * s2)).exp() / (2.0 * PI * s2).sqrt();
        dens * (w * w - s2) * ln_mixture_density(p_sleep, noise_var, s2, w)
    };
    let half = CUTOFF_SIGMAS * s2.sqrt();
    // The moment scales like s⁴, so the tolerance is relative to it.
    let moment = 2.0 * integrate(integrand, 0.0, half, 1e-12 * s2 * s2).value;
    Ok(-(1.0 - p_sleep) * h * h / (2.0 * s2 * s2) * moment)
}

/// Unchecked [`mixture_mi`] for inner optimization loops.
pub(crate) fn mixture_mi_unchecked(p: f64, awake_var: f64, h: f64, noise_var: f64) -> f64 {
    let s2 = h * h * awake_var + noise_var;
    if s2 == noise_var || awake_var <= 0.0 {
        return 0.0;
    }
    if p == 0.0 {
        return 0.5 * (h * h * awake_var / noise_var).ln_1p();
    }
    let ent = mixture_entropy(p, noise_var, s2, DEFAULT_ABS_TOL);
    (ent.value - noise_entropy(noise_var)).max(0.0)
}

/// Unchecked [`mixture_mi_dv`].
pub(crate) fn mixture_mi_dv_unchecked(p: f64, awake_var: f64, h: f64, noise_var: f64) -> f64 {
    mixture_mi_dv(p, awake_var.max(0.0), h, noise_var).unwrap_or(0.0)
}

/// Distance of a sleep/Gaussian input from the optimality form of the
/// cost-constrained channel, where the awake output density must read
/// `g(a) = k₁e^{−k₂a²} − p/(1 − p)·N(a; 0, σ²)` with the positive part inactive.
///
/// `k₁, k₂` are fitted by matching the zeroth and second moments of the awake
/// output component `N(0, h²v + σ²)`. Returns the larger of the sup-norm gap
/// on a fixed grid and the cost-constraint slack `|(1 − p)(v + α) − P|`
/// (the cost term is ignored when `v = 0`).
pub fn kkt_residual(
    p_sleep: f64,
    awake_var: f64,
    cost_budget: f64,
    alpha: f64,
    h: f64,
    noise_var: f64,
) -> Result<f64> {
    check_sleep(p_sleep)?;
    check_nonneg("awake_var", awake_var)?;
    check_nonneg("cost_budget", cost_budget)?;
    check_nonneg("alpha", alpha)?;
    check_nonneg("h", h)?;
    check_noise(noise_var)?;
    let p = p_sleep;
    let s2 = h * h * awake_var + noise_var;
    // Mass 1/(1 − p) and second moment (s² + pσ²/(1 − p)) fix a Gaussian of
    // variance τ² = (1 − p)s² + pσ².
    let tau2 = (1.0 - p) * s2 + p * noise_var;
    let normal = |var: f64, a: f64| (-a * a / (2.0 * var)).exp() / (2.0 * PI * var).sqrt();
    let half = CUTOFF_SIGMAS * s2.max(tau2).sqrt();
    const GRID: usize = 4001;
    let shape = (0..GRID)
        .map(|i| -half + 2.0 * half * i as f64 / (GRID - 1) as f64)
        .map(|a| {
            let fitted = (normal(tau2, a) - p * normal(noise_var, a)) / (1.0 - p);
            (fitted.max(0.0) - normal(s2, a)).abs()
        })
        .fold(0.0, f64::max);
    let cost = if awake_var > 0.0 {
        ((1.0 - p) * (awake_var + alpha) - cost_budget).abs()
    } else {
        0.0
    };
    Ok(shape.max(cost))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_rate_examples() {
        assert_eq!(gaussian_rate(1.0, 0.0, 1.0).unwrap(), 0.0);
        assert!((gaussian_rate(1.0, 1.0, 1.0).unwrap() - 0.5 * LN_2).abs() < 1e-15);
        let r = gaussian_rate(0.8, 0.7, 1.0).unwrap();
        assert!((r - 0.5 * 1.448f64.ln()).abs() < 1e-15);
        assert!((r - 0.185092).abs() < 1e-6);
        assert!(gaussian_rate(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn peak_capacity_boundaries() {
        assert_eq!(peak_capacity_closed(0.0).unwrap(), 0.0);
        assert!(peak_capacity_closed(1.1025).is_ok());
        assert!(matches!(
            peak_capacity_closed(1.21),
            Err(Error::OutOfValidity { .. })
        ));
    }

    #[test]
    fn peak_capacity_error_estimate_is_small() {
        for y in [0.01, 0.3, 1.0, 1.1025] {
            let est = peak_capacity_closed_est(y).unwrap();
            assert!(est.abs_err < DEFAULT_ABS_TOL, "y={y}: {est:?}");
        }
    }

    #[test]
    fn binary_mi_limits() {
        assert_eq!(binary_mi(0.0, 1.0).unwrap(), 0.0);
        let big = binary_mi(12.0, 1.0).unwrap();
        assert!((big - LN_2).abs() < 1e-9, "{big}");
        assert!(binary_mi(1.0, -1.0).is_err());
    }

    #[test]
    fn peak_rate_falls_back_to_lower_bound() {
        let inside = peak_rate(1.0, 1.0, 1.0).unwrap();
        assert!(!inside.lower_bound);
        let outside = peak_rate(4.0, 1.0, 1.0).unwrap();
        assert!(outside.lower_bound);
        assert!((outside.nats - binary_mi(2.0, 1.0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn mixture_reduces_to_gaussian_without_sleep() {
        for (v, h) in [(0.3, 0.5), (1.0, 1.0), (4.0, 1.2)] {
            let m = mixture_mi(0.0, v, h, 1.0).unwrap();
            let g = gaussian_rate(h, v, 1.0).unwrap();
            assert!((m - g).abs() < 1e-9, "{m} vs {g}");
        }
    }

    #[test]
    fn mixture_with_no_awake_power_is_zero() {
        for p in [0.0, 0.3, 0.9] {
            assert_eq!(mixture_mi(p, 0.0, 1.0, 1.0).unwrap(), 0.0);
        }
        assert!(mixture_mi(1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn mixture_derivative_matches_finite_difference() {
        for (p, v, h) in [
            (0.0, 1.0, 1.0),
            (0.4, 0.7, 0.8),
            (0.8, 3.0, 1.2),
            (0.2, 0.01, 0.5),
        ] {
            let d = mixture_mi_dv(p, v, h, 1.0).unwrap();
            let e = 1e-5;
            let fd = (mixture_mi(p, v + e, h, 1.0).unwrap()
                - mixture_mi(p, v - e, h, 1.0).unwrap())
                / (2.0 * e);
            assert!((d - fd).abs() < 1e-6, "p={p} v={v}: {d} vs {fd}");
        }
    }

    #[test]
    fn kkt_residual_vanishes_without_sleep() {
        let r = kkt_residual(0.0, 0.8, 1.3, 0.5, 1.0, 1.0).unwrap();
        assert!(r < 1e-9, "{r}");
    }
}
