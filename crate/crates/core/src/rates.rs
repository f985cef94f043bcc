//! Time-dependent transition rates.
//!
//! Every family has a closed-form cumulative hazard, so `integrate` is exact
//! up to rounding. `Tabulated` is the linear interpolant of its samples and
//! is integrated by the trapezoid rule on its own grid, which is exact for
//! the interpolant.

use std::f64::consts::{FRAC_PI_2, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack for comparing query times against grid endpoints.
const TIME_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateFunction {
    Constant {
        value: f64,
    },
    /// `values[k]` holds on `[breakpoints[k], breakpoints[k + 1])`; the last
    /// value extends to the horizon. `breakpoints[0]` must be 0.
    PiecewiseConstant {
        breakpoints: Vec<f64>,
        values: Vec<f64>,
    },
    /// Linear between knots, constant after the last knot. `knots[0]` must be 0.
    PiecewiseLinear {
        knots: Vec<f64>,
        values: Vec<f64>,
    },
    /// `offset + amplitude * sin(omega * s + phase)` with `offset >= |amplitude|`.
    Sinusoid {
        offset: f64,
        amplitude: f64,
        omega: f64,
        phase: f64,
    },
    /// Samples on the uniform grid `k * horizon / (len - 1)`, linearly interpolated.
    Tabulated {
        horizon: f64,
        values: Vec<f64>,
    },
}

impl RateFunction {
    pub fn constant(value: f64) -> Self {
        RateFunction::Constant { value }
    }

    pub fn sinusoid(offset: f64, amplitude: f64, omega: f64, phase: f64) -> Self {
        RateFunction::Sinusoid {
            offset,
            amplitude,
            omega,
            phase,
        }
    }

    /// Checks the family's structural invariants and nonnegativity.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidRate(msg));
        let check_values = |values: &[f64]| -> Result<()> {
            if values.is_empty() {
                return bad("no values".into());
            }
            for (k, v) in values.iter().enumerate() {
                if !v.is_finite() || *v < 0.0 {
                    return bad(format!("value[{k}] = {v} is not a finite nonnegative rate"));
                }
            }
            Ok(())
        };
        let check_knots = |knots: &[f64], values: &[f64], what: &str| -> Result<()> {
            if knots.len() != values.len() {
                return bad(format!(
                    "{} {what} but {} values",
                    knots.len(),
                    values.len()
                ));
            }
            if knots.first() != Some(&0.0) {
                return bad(format!("first {what} entry must be 0"));
            }
            for w in knots.windows(2) {
                if !w[1].is_finite() || w[1] <= w[0] {
                    return bad(format!("{what} must be finite and strictly increasing"));
                }
            }
            Ok(())
        };
        match self {
            RateFunction::Constant { value } => check_values(&[*value]),
            RateFunction::PiecewiseConstant {
                breakpoints,
                values,
            } => {
                check_values(values)?;
                check_knots(breakpoints, values, "breakpoints")
            }
            RateFunction::PiecewiseLinear { knots, values } => {
                check_values(values)?;
                check_knots(knots, values, "knots")
            }
            RateFunction::Sinusoid {
                offset,
                amplitude,
                omega,
                phase,
            } => {
                if ![offset, amplitude, omega, phase].iter().all(|x| x.is_finite()) {
                    return bad("sinusoid parameters must be finite".into());
                }
                if *offset < amplitude.abs() {
                    return bad(format!(
                        "sinusoid offset {offset} below |amplitude| {}",
                        amplitude.abs()
                    ));
                }
                Ok(())
            }
            RateFunction::Tabulated { horizon, values } => {
                check_values(values)?;
                if !(horizon.is_finite() && *horizon > 0.0) {
                    return bad(format!("tabulated horizon {horizon} must be positive"));
                }
                if values.len() < 2 {
                    return bad("tabulated rate needs at least two samples".into());
                }
                Ok(())
            }
        }
    }

    /// Checks that every breakpoint lies in `[0, horizon]` and that tabulated
    /// data covers the horizon.
    pub fn check_horizon(&self, horizon: f64) -> Result<()> {
        match self {
            RateFunction::PiecewiseConstant { breakpoints: k, .. }
            | RateFunction::PiecewiseLinear { knots: k, .. } => {
                if let Some(last) = k.last() {
                    if *last > horizon {
                        return Err(Error::InvalidRate(format!(
                            "breakpoint {last} beyond horizon {horizon}"
                        )));
                    }
                }
                Ok(())
            }
            RateFunction::Tabulated { horizon: h, .. } if *h + TIME_SLACK < horizon => {
                Err(Error::InvalidRate(format!(
                    "tabulated data ends at {h}, before horizon {horizon}"
                )))
            }
            _ => Ok(()),
        }
    }

    /// `Some(c)` when the rate is the constant `c`.
    pub fn constant_value(&self) -> Option<f64> {
        match self {
            RateFunction::Constant { value } => Some(*value),
            _ => None,
        }
    }

    pub fn is_tabulated(&self) -> bool {
        matches!(self, RateFunction::Tabulated { .. })
    }

    /// Largest time the rate is defined at, if bounded.
    pub fn domain_end(&self) -> f64 {
        match self {
            RateFunction::Tabulated { horizon, .. } => *horizon,
            _ => f64::INFINITY,
        }
    }

    /// Times in `(0, t)` where the rate or its derivative may jump.
    pub fn breakpoints(&self, t: f64) -> Vec<f64> {
        let inside = |xs: &[f64]| xs.iter().copied().filter(|&x| x > 0.0 && x < t).collect();
        match self {
            RateFunction::PiecewiseConstant { breakpoints, .. } => inside(breakpoints),
            RateFunction::PiecewiseLinear { knots, .. } => inside(knots),
            RateFunction::Tabulated { horizon, values } => {
                let step = horizon / (values.len() - 1) as f64;
                let nodes: Vec<f64> = (1..values.len() - 1).map(|k| k as f64 * step).collect();
                inside(&nodes)
            }
            RateFunction::Constant { .. } | RateFunction::Sinusoid { .. } => Vec::new(),
        }
    }

    fn check_time(&self, s: f64) -> Result<()> {
        let end = self.domain_end();
        if s.is_finite() && s >= 0.0 && s <= end + TIME_SLACK {
            Ok(())
        } else {
            Err(Error::OutOfHorizon { time: s, horizon: end })
        }
    }

    pub fn evaluate(&self, s: f64) -> Result<f64> {
        self.check_time(s)?;
        Ok(self.at(s))
    }

    /// Evaluation without domain checks; `s` must lie in the domain.
    pub(crate) fn at(&self, s: f64) -> f64 {
        match self {
            RateFunction::Constant { value } => *value,
            RateFunction::PiecewiseConstant {
                breakpoints,
                values,
            } => values[segment(breakpoints, s)],
            RateFunction::PiecewiseLinear { knots, values } => linear_at(knots, values, s),
            RateFunction::Sinusoid {
                offset,
                amplitude,
                omega,
                phase,
            } => (offset + amplitude * (omega * s + phase).sin()).max(0.0),
            RateFunction::Tabulated { horizon, values } => {
                let h = horizon / (values.len() - 1) as f64;
                let x = (s / h).max(0.0);
                let k = (x.floor() as usize).min(values.len() - 2);
                let frac = (x - k as f64).clamp(0.0, 1.0);
                values[k] + frac * (values[k + 1] - values[k])
            }
        }
    }

    /// Left limit `k(s-)`; differs from [`Self::at`] only at a jump.
    pub(crate) fn at_left(&self, s: f64) -> f64 {
        match self {
            RateFunction::PiecewiseConstant { breakpoints, values } if s > 0.0 => {
                values[breakpoints.partition_point(|&k| k < s).saturating_sub(1)]
            }
            _ => self.at(s),
        }
    }

    /// Cumulative hazard `∫_a^b k(s) ds`.
    pub fn integrate(&self, a: f64, b: f64) -> Result<f64> {
        if a > b {
            return Err(Error::ReversedInterval { a, b });
        }
        self.check_time(a)?;
        self.check_time(b)?;
        Ok(self.integral(a, b))
    }

    /// `∫_a^b k`, unchecked, `a <= b`.
    pub(crate) fn integral(&self, a: f64, b: f64) -> f64 {
        let v = match self {
            RateFunction::Constant { value } => value * (b - a),
            RateFunction::PiecewiseConstant {
                breakpoints,
                values,
            } => {
                let (ka, kb) = (segment(breakpoints, a), segment(breakpoints, b));
                if ka == kb {
                    values[ka] * (b - a)
                } else {
                    let mut acc = values[ka] * (breakpoints[ka + 1] - a);
                    for k in ka + 1..kb {
                        acc += values[k] * (breakpoints[k + 1] - breakpoints[k]);
                    }
                    acc + values[kb] * (b - breakpoints[kb])
                }
            }
            RateFunction::PiecewiseLinear { knots, values } => linear_integral(knots, values, a, b),
            RateFunction::Sinusoid {
                offset,
                amplitude,
                omega,
                phase,
            } => {
                if *omega == 0.0 {
                    (offset + amplitude * phase.sin()) * (b - a)
                } else {
                    offset * (b - a)
                        - amplitude / omega * ((omega * b + phase).cos() - (omega * a + phase).cos())
                }
            }
            RateFunction::Tabulated { horizon, values } => {
                let h = horizon / (values.len() - 1) as f64;
                let knots: Vec<f64> = (0..values.len()).map(|k| k as f64 * h).collect();
                linear_integral(&knots, values, a, b)
            }
        };
        v.max(0.0)
    }

    /// Supremum of the rate over `[0, t]`.
    pub fn rate_bound(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        match self {
            RateFunction::Constant { value } => *value,
            RateFunction::PiecewiseConstant {
                breakpoints,
                values,
            } => breakpoints
                .iter()
                .zip(values)
                .filter(|(b, _)| **b <= t)
                .map(|(_, v)| *v)
                .fold(0.0, f64::max),
            RateFunction::PiecewiseLinear { knots, values } => knots
                .iter()
                .zip(values)
                .filter(|(k, _)| **k <= t)
                .map(|(_, v)| *v)
                .fold(linear_at(knots, values, t), f64::max),
            RateFunction::Sinusoid {
                offset,
                amplitude,
                omega,
                phase,
            } => {
                let (t0, t1) = (*phase, omega * t + phase);
                let (lo, hi) = (t0.min(t1), t0.max(t1));
                // The maximum of b*sin over [lo, hi] is attained at an
                // endpoint unless the interval contains a crest of b*sin.
                let crest = if *amplitude >= 0.0 { FRAC_PI_2 } else { 3.0 * FRAC_PI_2 };
                let k = ((lo - crest) / TAU).ceil();
                if crest + k * TAU <= hi {
                    offset + amplitude.abs()
                } else {
                    (offset + amplitude * lo.sin()).max(offset + amplitude * hi.sin())
                }
            }
            RateFunction::Tabulated { horizon, values } => {
                let h = horizon / (values.len() - 1) as f64;
                let t = t.min(*horizon);
                values
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k as f64 * h <= t)
                    .map(|(_, v)| *v)
                    .fold(self.at(t), f64::max)
            }
        }
    }
}

/// Index of the segment `[knots[k], knots[k+1])` containing `s`.
fn segment(knots: &[f64], s: f64) -> usize {
    knots.partition_point(|&k| k <= s).saturating_sub(1)
}

fn linear_at(knots: &[f64], values: &[f64], s: f64) -> f64 {
    let k = segment(knots, s);
    if k + 1 >= knots.len() {
        return values[values.len() - 1];
    }
    let frac = ((s - knots[k]) / (knots[k + 1] - knots[k])).clamp(0.0, 1.0);
    values[k] + frac * (values[k + 1] - values[k])
}

fn linear_integral(knots: &[f64], values: &[f64], a: f64, b: f64) -> f64 {
    let piece = |x: f64, y: f64| 0.5 * (linear_at(knots, values, x) + linear_at(knots, values, y)) * (y - x);
    let (ka, kb) = (segment(knots, a), segment(knots, b));
    if ka == kb {
        return piece(a, b);
    }
    let mut acc = piece(a, knots[ka + 1]);
    for k in ka + 1..kb {
        acc += 0.5 * (values[k] + values[k + 1]) * (knots[k + 1] - knots[k]);
    }
    acc + piece(knots[kb], b)
}
