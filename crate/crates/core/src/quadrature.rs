//! Quadrature rules: Gauss–Hermite for Gaussian expectations and adaptive
//! Gauss–Kronrod (G7/K15) for finite intervals.

use std::sync::OnceLock;

use crate::error::{invalid, Result};

/// Default Gauss–Hermite node count.
pub const DEFAULT_NODES: usize = 96;
/// Default absolute tolerance for quadrature-backed values.
pub const DEFAULT_ABS_TOL: f64 = 1e-9;

/// Node count and tolerance for a quadrature-backed evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub node_count: usize,
    pub abs_tol: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            node_count: DEFAULT_NODES,
            abs_tol: DEFAULT_ABS_TOL,
        }
    }
}

impl QuadratureSpec {
    pub fn new(node_count: usize, abs_tol: f64) -> Result<Self> {
        if node_count < 16 || !node_count.is_multiple_of(2) {
            return Err(invalid(
                "node_count",
                format!("{node_count} must be even and at least 16"),
            ));
        }
        if !(abs_tol > 0.0) {
            return Err(invalid("abs_tol", format!("{abs_tol} must be > 0")));
        }
        Ok(Self {
            node_count,
            abs_tol,
        })
    }
}

/// A quadrature value with an estimate of its absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub abs_err: f64,
}

/// Gauss–Hermite rule for the weight `e^{−t²}`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Nodes by Newton iteration on orthonormal Hermite polynomials, which
    /// stays free of overflow for several hundred nodes.
    pub fn new(n: usize) -> Self {
        assert!(n >= 2, "need at least two nodes");
        const PIM4: f64 = 0.751_125_544_464_942_5; // π^{-1/4}
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        let mut z = 0.0f64;
        for i in 0..n.div_ceil(2) {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.16667),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * nodes[0],
                3 => 1.91 * z - 0.91 * nodes[1],
                _ => 2.0 * z - nodes[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let (mut p1, mut p2) = (PIM4, 0.0);
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let step = p1 / pp;
                z -= step;
                if step.abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
            weights[i] = 2.0 / (pp * pp);
            weights[n - 1 - i] = weights[i];
        }
        Self { nodes, weights }
    }

    /// Shared 96-node rule.
    pub fn default_rule() -> &'static GaussHermite {
        static RULE: OnceLock<GaussHermite> = OnceLock::new();
        RULE.get_or_init(|| GaussHermite::new(DEFAULT_NODES))
    }

    /// Shared 48-node rule, used as the coarse half of error estimates.
    pub fn coarse_rule() -> &'static GaussHermite {
        static RULE: OnceLock<GaussHermite> = OnceLock::new();
        RULE.get_or_init(|| GaussHermite::new(DEFAULT_NODES / 2))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E[f(X)]` for `X ~ N(0, var)`.
    pub fn normal_expectation(&self, var: f64, f: impl Fn(f64) -> f64) -> f64 {
        let scale = (2.0 * var).sqrt();
        let sum: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(t, w)| w * f(scale * t))
            .sum();
        sum / std::f64::consts::PI.sqrt()
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for (j, (&x, &wk)) in XGK.iter().zip(&WGK).take(7).enumerate() {
        let dx = half * x;
        let s = f(center - dx) + f(center + dx);
        kronrod += wk * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Adaptive G7/K15 integration of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Estimate {
    let mut pending = vec![(a, b, tol)];
    let (mut value, mut abs_err) = (0.0, 0.0);
    let min_width = (b - a).abs() * 1e-12;
    while let Some((lo, hi, local_tol)) = pending.pop() {
        let (v, e) = gk15(&f, lo, hi);
        if e <= local_tol || (hi - lo).abs() < min_width {
            value += v;
            abs_err += e;
        } else {
            let mid = 0.5 * (lo + hi);
            pending.push((mid, hi, 0.5 * local_tol));
            pending.push((lo, mid, 0.5 * local_tol));
        }
    }
    Estimate { value, abs_err }
}

/// Composite trapezoid rule with `n` panels. Test oracle for the smarter rules.
pub fn trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| f(a + i as f64 * h)).sum();
    h * (0.5 * (f(a) + f(b)) + inner)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_weights_sum_to_sqrt_pi() {
        for n in [16, 48, 96, 192] {
            let rule = GaussHermite::new(n);
            let total: f64 = rule.weights().iter().sum();
            assert!((total - std::f64::consts::PI.sqrt()).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn hermite_reproduces_gaussian_moments() {
        let rule = GaussHermite::default_rule();
        let var = 2.5;
        assert!((rule.normal_expectation(var, |x| x * x) - var).abs() < 1e-12);
        assert!((rule.normal_expectation(var, |x| x.powi(4)) - 3.0 * var * var).abs() < 1e-10);
        assert!(rule.normal_expectation(var, |x| x.powi(3)).abs() < 1e-12);
    }

    #[test]
    fn kronrod_integrates_smooth_functions() {
        let est = integrate(|x| (-x * x).exp(), -10.0, 10.0, 1e-13);
        assert!((est.value - std::f64::consts::PI.sqrt()).abs() < 1e-12);
        let est = integrate(f64::sin, 0.0, std::f64::consts::PI, 1e-13);
        assert!((est.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn trapezoid_converges() {
        let v = trapezoid(|x| x * x, 0.0, 1.0, 10_000);
        assert!((v - 1.0 / 3.0).abs() < 1e-8);
    }

    #[test]
    fn spec_rejects_odd_or_small_node_counts() {
        assert!(QuadratureSpec::new(15, 1e-9).is_err());
        assert!(QuadratureSpec::new(8, 1e-9).is_err());
        assert!(QuadratureSpec::new(96, 1e-9).is_ok());
    }
}
