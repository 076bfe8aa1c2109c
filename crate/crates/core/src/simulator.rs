//! Explicit Euler integration of the closed-loop delay equation.
//!
//! The state is `Y = (y, y', ..., y^(n-1))` and the step is
//! `h = tau / steps_per_delay`, so every delayed value `y^(k)(t - tau)` is
//! either a stored state or, before time zero, an exact derivative of the
//! history function.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quasipoly::Quasipolynomial;

/// Default number of Euler steps per delay interval.
pub const DEFAULT_STEPS_PER_DELAY: usize = 1000;

/// Trajectories longer than this are thinned before serialization.
pub const MAX_SERIALIZED_POINTS: usize = 100_000;

const OVERFLOW_LIMIT: f64 = 1e300;

/// History on `[-tau, 0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    /// `x(t) = c`
    Constant { c: f64 },
    /// `x(t) = sum_k c_k t^k`
    Polynomial { coefficients: Vec<f64> },
    /// `x(t) = A exp(rate t)`
    Exponential { amplitude: f64, rate: f64 },
    /// `x(t) = A sin(omega t + phase)`
    Trigonometric { amplitude: f64, omega: f64, phase: f64 },
}

impl InitialCondition {
    pub fn validate(&self) -> Result<()> {
        let params: Vec<f64> = match self {
            InitialCondition::Constant { c } => vec![*c],
            InitialCondition::Polynomial { coefficients } => {
                if coefficients.is_empty() {
                    return Err(Error::invalid("polynomial history needs at least one coefficient"));
                }
                coefficients.clone()
            }
            InitialCondition::Exponential { amplitude, rate } => vec![*amplitude, *rate],
            InitialCondition::Trigonometric { amplitude, omega, phase } => vec![*amplitude, *omega, *phase],
        };
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("history parameters must be finite"));
        }
        Ok(())
    }

    /// The history scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        match self {
            InitialCondition::Constant { c } => InitialCondition::Constant { c: c * factor },
            InitialCondition::Polynomial { coefficients } => InitialCondition::Polynomial {
                coefficients: coefficients.iter().map(|c| c * factor).collect(),
            },
            InitialCondition::Exponential { amplitude, rate } => InitialCondition::Exponential {
                amplitude: amplitude * factor,
                rate: *rate,
            },
            InitialCondition::Trigonometric { amplitude, omega, phase } => InitialCondition::Trigonometric {
                amplitude: amplitude * factor,
                omega: *omega,
                phase: *phase,
            },
        }
    }
}

/// Parses `constant:c`, `poly:c0,c1,...`, `exp:A,rate` or
/// `trig:A,omega,phase`.
impl FromStr for InitialCondition {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let (kind, rest) = text
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("expected <kind>:<params>, got {text:?}")))?;
        let values = rest
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::invalid(format!("bad history parameter in {text:?}: {e}")))?;
        let arity = |expected: usize| {
            if values.len() == expected {
                Ok(())
            } else {
                Err(Error::invalid(format!(
                    "{kind} history takes {expected} parameter(s), got {}",
                    values.len()
                )))
            }
        };
        let ic = match kind.trim().to_ascii_lowercase().as_str() {
            "constant" | "const" => {
                arity(1)?;
                InitialCondition::Constant { c: values[0] }
            }
            "poly" | "polynomial" => InitialCondition::Polynomial { coefficients: values },
            "exp" | "exponential" => {
                arity(2)?;
                InitialCondition::Exponential {
                    amplitude: values[0],
                    rate: values[1],
                }
            }
            "trig" | "trigonometric" => {
                arity(3)?;
                InitialCondition::Trigonometric {
                    amplitude: values[0],
                    omega: values[1],
                    phase: values[2],
                }
            }
            other => return Err(Error::invalid(format!("unknown history kind {other:?}"))),
        };
        ic.validate()?;
        Ok(ic)
    }
}

/// `order`-th derivative of the history function at `t`.
pub fn ic_eval(ic: &InitialCondition, t: f64, order: usize) -> f64 {
    match ic {
        InitialCondition::Constant { c } => {
            if order == 0 {
                *c
            } else {
                0.0
            }
        }
        InitialCondition::Polynomial { coefficients } => {
            if order >= coefficients.len() {
                return 0.0;
            }
            coefficients[order..]
                .iter()
                .enumerate()
                .rev()
                .fold(0.0, |acc, (j, c)| {
                    let falling: f64 = (0..order).map(|i| (j + order - i) as f64).product();
                    acc * t + c * falling
                })
        }
        InitialCondition::Exponential { amplitude, rate } => {
            rate.powi(order as i32) * amplitude * (rate * t).exp()
        }
        InitialCondition::Trigonometric { amplitude, omega, phase } => {
            let arg = omega * t + phase;
            let factor = amplitude * omega.powi(order as i32);
            match order % 4 {
                0 => factor * arg.sin(),
                1 => factor * arg.cos(),
                2 => -factor * arg.sin(),
                _ => -factor * arg.cos(),
            }
        }
    }
}

/// Sampled solution on `[-tau, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    #[serde(skip)]
    pub state_dim: usize,
}

impl Trajectory {
    /// Keeps every k-th sample (and the last one) so that at most
    /// `max_points` remain.
    pub fn decimated(&self, max_points: usize) -> Trajectory {
        let len = self.t.len();
        if len <= max_points || max_points < 2 {
            return self.clone();
        }
        let stride = (len - 1).div_ceil(max_points - 1);
        let mut indices: Vec<usize> = (0..len).step_by(stride).collect();
        if indices.last() != Some(&(len - 1)) {
            indices.push(len - 1);
        }
        Trajectory {
            t: indices.iter().map(|&i| self.t[i]).collect(),
            y: indices.iter().map(|&i| self.y[i]).collect(),
            state_dim: self.state_dim,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,y\n");
        for (t, y) in self.t.iter().zip(&self.y) {
            let _ = writeln!(out, "{t:?},{y:?}");
        }
        out
    }

    pub fn last(&self) -> (f64, f64) {
        (*self.t.last().expect("non-empty"), *self.y.last().expect("non-empty"))
    }

    /// Value at the grid point closest to `t`.
    pub fn value_near(&self, t: f64) -> f64 {
        let idx = self
            .t
            .iter()
            .enumerate()
            .min_by(|(_, x), (_, y)| (*x - t).abs().total_cmp(&(*y - t).abs()))
            .map(|(i, _)| i)
            .expect("non-empty");
        self.y[idx]
    }
}

/// Integrates the delay equation with characteristic function `qp` from
/// history `ic` up to time `horizon`.
pub fn simulate(
    qp: &Quasipolynomial,
    ic: &InitialCondition,
    horizon: f64,
    steps_per_delay: usize,
) -> Result<Trajectory> {
    ic.validate()?;
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::invalid(format!("simulation time must be positive, got {horizon}")));
    }
    if steps_per_delay < 10 {
        return Err(Error::invalid(format!(
            "steps_per_delay must be at least 10, got {steps_per_delay}"
        )));
    }
    let n = qp.n();
    let m = qp.m();
    let (a, b) = (qp.a(), qp.b());
    let lag = steps_per_delay;
    let h = qp.tau() / lag as f64;
    let steps = ((horizon / h) - 1e-9).ceil().max(1.0) as usize;
    let time = |j: usize| (j as f64 - lag as f64) * h;

    let mut t = Vec::with_capacity(lag + steps + 1);
    let mut y = Vec::with_capacity(lag + steps + 1);
    for j in 0..lag {
        let tj = time(j);
        t.push(tj);
        y.push(ic_eval(ic, tj, 0));
    }

    // states[i * n .. (i + 1) * n] holds Y at t = i h, i >= 0.
    let mut states: Vec<f64> = Vec::with_capacity((steps + 1) * n);
    states.extend((0..n).map(|k| ic_eval(ic, 0.0, k)));
    t.push(0.0);
    y.push(states[0]);

    let mut delayed = vec![0.0; m + 1];
    for i in 0..steps {
        if i <= lag {
            let td = time(i);
            for (k, d) in delayed.iter_mut().enumerate() {
                *d = ic_eval(ic, td, k);
            }
        } else {
            let base = (i - lag) * n;
            delayed.copy_from_slice(&states[base..base + m + 1]);
        }
        let current = &states[i * n..(i + 1) * n];
        let top: f64 = -a.iter().zip(current).map(|(ak, yk)| ak * yk).sum::<f64>()
            - b.iter().zip(&delayed).map(|(bk, dk)| bk * dk).sum::<f64>();
        let next: Vec<f64> = (0..n)
            .map(|k| {
                let slope = if k + 1 < n { current[k + 1] } else { top };
                current[k] + h * slope
            })
            .collect();
        let tj = time(lag + i + 1);
        if !next[0].is_finite() || next[0].abs() > OVERFLOW_LIMIT {
            return Err(Error::Overflow { t: tj });
        }
        t.push(tj);
        y.push(next[0]);
        states.extend(next);
    }

    Ok(Trajectory { t, y, state_dim: n })
}
