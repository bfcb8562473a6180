//! Parameter sweeps over a base scenario, and the built-in presets that
//! reproduce the two worked examples.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::model::{DiscreteDist, Scenario};
use crate::rates::{applicable_cells, FormulaId};

/// Scenario field a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweepParameter {
    Beta1,
    Beta2,
    /// Multiplies every harvest support value; with a unit harvest the
    /// sweep value is `E[Y]` itself.
    MeanHarvestScale,
    Alpha,
}

impl SweepParameter {
    pub fn tag(self) -> &'static str {
        match self {
            SweepParameter::Beta1 => "beta1",
            SweepParameter::Beta2 => "beta2",
            SweepParameter::MeanHarvestScale => "mean_harvest_scale",
            SweepParameter::Alpha => "alpha",
        }
    }

    fn check(self, value: f64) -> Result<()> {
        let ok = value.is_finite()
            && match self {
                SweepParameter::Beta1 => (0.0..=1.0).contains(&value),
                SweepParameter::Beta2 | SweepParameter::Alpha => value >= 0.0,
                SweepParameter::MeanHarvestScale => value > 0.0,
            };
        if ok {
            Ok(())
        } else {
            Err(invalid(
                "sweep value",
                format!("{value} is not a valid {}", self.tag()),
            ))
        }
    }

    /// `base` with this parameter set to `value`.
    pub fn apply(self, base: &Scenario, value: f64) -> Result<Scenario> {
        self.check(value)?;
        let mut s = base.clone();
        match self {
            SweepParameter::Beta1 => s.beta1 = value,
            SweepParameter::Beta2 => s.beta2 = value,
            SweepParameter::Alpha => s.alpha = value,
            SweepParameter::MeanHarvestScale => s.harvest = base.harvest.scaled(value)?,
        }
        Ok(s)
    }
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "beta1" => Ok(SweepParameter::Beta1),
            "beta2" => Ok(SweepParameter::Beta2),
            "mean_harvest_scale" => Ok(SweepParameter::MeanHarvestScale),
            "alpha" => Ok(SweepParameter::Alpha),
            other => Err(invalid(
                "parameter",
                format!("unknown sweep parameter `{other}`"),
            )),
        }
    }
}

/// What to sweep and which formula cells to evaluate at each value.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    /// Cells to evaluate; empty means every cell applicable to each point.
    pub cells: Vec<FormulaId>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(invalid("values", "a sweep needs at least one value"));
        }
        self.values
            .iter()
            .try_for_each(|v| self.parameter.check(*v))
    }
}

/// One `(parameter value, formula cell)` result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub param_value: f64,
    pub formula_id: FormulaId,
    pub rate_nats: f64,
    pub lower_bound: bool,
}

/// Evaluates every requested cell at every sweep value. Points run in
/// parallel; rows come back in value order, then cell order.
pub fn run_sweep(base: &Scenario, spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    base.check()?;
    spec.validate()?;
    let blocks: Vec<Vec<SweepRow>> = spec
        .values
        .par_iter()
        .map(|&value| {
            let s = spec.parameter.apply(base, value)?;
            let cells = if spec.cells.is_empty() {
                applicable_cells(&s)
            } else {
                spec.cells.clone()
            };
            cells
                .into_iter()
                .map(|cell| {
                    let report = cell.evaluate(&s)?;
                    Ok(SweepRow {
                        param_value: value,
                        formula_id: cell,
                        rate_nats: report.rate_nats(),
                        lower_bound: report.lower_bound,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(blocks.into_iter().flatten().collect())
}

/// Built-in scenarios and sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Lossy storage example: `Y ∈ {0.5, 1}` w.p. `{0.6, 0.4}`, fades
    /// `{0.4, 0.8, 1.0}` w.p. `{0.4, 0.5, 0.1}`, `σ² = 1`, `β1 = 0.7`, `β2 = 0`.
    Example1,
    /// Processing/sleep example, fades `{0.5, 1, 1.2}` w.p. `{0.1, 0.8, 0.1}`.
    Example2a,
    /// Processing/sleep example, fades `{0.5, 1, 1.2}` w.p. `{1/9, 7/9, 1/9}`.
    Example2b,
}

/// The processing/sleep example states its fade probabilities as
/// `{0.1, 0.7, 0.1}`, which sum to 0.9. Instead of normalizing silently the
/// two obvious repairs ship as separate presets: move the missing mass to the
/// middle state (`a`), or rescale all three (`b`).
const EXAMPLE2_FADE: [f64; 3] = [0.5, 1.0, 1.2];

/// `E[Y]` values for the processing/sleep sweep.
pub const EXAMPLE2_MEAN_HARVEST: [f64; 12] =
    [0.1, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 5.0, 7.5, 10.0];

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Example1, Preset::Example2a, Preset::Example2b];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Example1 => "example1",
            Preset::Example2a => "example2a",
            Preset::Example2b => "example2b",
        }
    }

    pub fn scenario(self) -> Scenario {
        match self {
            Preset::Example1 => {
                let mut s = Scenario::ideal(
                    DiscreteDist::new(vec![0.5, 1.0], vec![0.6, 0.4]).expect("valid preset"),
                    DiscreteDist::new(vec![0.4, 0.8, 1.0], vec![0.4, 0.5, 0.1])
                        .expect("valid preset"),
                    1.0,
                );
                s.beta1 = 0.7;
                s
            }
            Preset::Example2a | Preset::Example2b => {
                let probs = if self == Preset::Example2a {
                    vec![0.1, 0.8, 0.1]
                } else {
                    vec![1.0 / 9.0, 7.0 / 9.0, 1.0 / 9.0]
                };
                let mut s = Scenario::ideal(
                    DiscreteDist::point(1.0).expect("valid preset"),
                    DiscreteDist::new(EXAMPLE2_FADE.to_vec(), probs).expect("valid preset"),
                    1.0,
                );
                s.alpha = 0.5;
                s.sleep_enabled = true;
                s
            }
        }
    }

    /// The parameter sweep that goes with this preset.
    pub fn sweep(self) -> SweepSpec {
        match self {
            Preset::Example1 => SweepSpec {
                parameter: SweepParameter::Beta1,
                values: (10..=20).map(|k| k as f64 / 20.0).collect(),
                cells: vec![
                    FormulaId::IdealCsit,
                    FormulaId::IdealNcsit,
                    FormulaId::HsuCsit,
                    FormulaId::HsuNcsit,
                    FormulaId::HuCsit,
                    FormulaId::HuNcsit,
                    FormulaId::HusCsit,
                    FormulaId::HusNcsit,
                ],
            },
            Preset::Example2a | Preset::Example2b => SweepSpec {
                parameter: SweepParameter::MeanHarvestScale,
                values: EXAMPLE2_MEAN_HARVEST.to_vec(),
                cells: vec![
                    FormulaId::ProcessingCsit,
                    FormulaId::ProcessingNcsit,
                    FormulaId::SleepCsit,
                    FormulaId::SleepNcsit,
                ],
            },
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| invalid("preset", format!("unknown preset `{s}`")))
    }
}
