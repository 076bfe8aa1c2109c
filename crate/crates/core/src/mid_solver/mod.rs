//! Coefficient synthesis placing a real root of prescribed multiplicity.
//!
//! Two modes are supported:
//!
//! * [`classic_mid`]: every coefficient is free. The root `s0` is given
//!   together with the delay and receives the maximal multiplicity
//!   `n + m + 1`.
//! * [`control_oriented_mid`]: the undelayed coefficients `a` are known,
//!   only the delayed gains `b` are free. Either `s0` or `tau` is fixed and
//!   the other one is obtained from the compatibility equation; the root
//!   receives multiplicity `m + 2`.
//!
//! Both modes work with the Taylor data of the two polynomial parts at
//! `s0`. Writing `E = exp(-s0 tau)` and `p_i = P_b^(i)(s0)`, the condition
//! `delta^(k)(s0) = 0` reads
//!
//! ```text
//! P_a^(k)(s0) + E sum_{i <= min(k, m)} C(k, i) (-tau)^(k-i) p_i = 0
//! ```
//!
//! where `P_a` includes the leading `s^n`. The monomial coefficients are
//! recovered from the Taylor data by expanding `(s - s0)^i` binomially.

mod compat;

pub use compat::{
    compatibility_equation, compatibility_function, default_window, solve_compatibility,
    CompatibilityPolynomial,
};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quasipoly::{
    binomial, check_orders, check_tau, factorial, monic_derivative, ComplexPoint,
    Quasipolynomial,
};

/// Condition-number ceiling for the dense multiplicity subsystem.
pub const MAX_CONDITION: f64 = 1e12;

/// Relative tolerance of the multiplicity certificate.
pub const TOL_MULT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MidMode {
    Classic,
    ControlOriented,
}

/// Result of a synthesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MidDesign {
    pub qp: Quasipolynomial,
    pub s0: f64,
    pub multiplicity: usize,
    pub mode: MidMode,
    /// Every admissible value of the solved-for variable (`s0` when `tau`
    /// is fixed, `tau` when `s0` is fixed). Empty in classic mode.
    pub candidates: Vec<f64>,
}

/// Which of `s0` and `tau` the user prescribes in control-oriented mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedVariable {
    S0,
    Tau,
}

impl FixedVariable {
    pub fn free(self) -> FixedVariable {
        match self {
            FixedVariable::S0 => FixedVariable::Tau,
            FixedVariable::Tau => FixedVariable::S0,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            FixedVariable::S0 => "s0",
            FixedVariable::Tau => "tau",
        }
    }
}

/// Input of the control-oriented synthesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSpec {
    pub n: usize,
    pub m: usize,
    /// Known undelayed coefficients `a_0 .. a_{n-1}`.
    pub a: Vec<f64>,
    pub fixed_variable: FixedVariable,
    pub fixed_value: f64,
    /// Search interval for the free variable; see [`default_window`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<(f64, f64)>,
    /// Index into the sorted candidate list overriding the default choice.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate: Option<usize>,
}

impl ControlSpec {
    pub fn new(a: Vec<f64>, m: usize, fixed_variable: FixedVariable, fixed_value: f64) -> Self {
        ControlSpec {
            n: a.len(),
            m,
            a,
            fixed_variable,
            fixed_value,
            window: None,
            candidate: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_orders(self.n, self.m)?;
        if self.a.len() != self.n {
            return Err(Error::invalid(format!(
                "a has {} coefficients but n = {}",
                self.a.len(),
                self.n
            )));
        }
        if self.a.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("coefficients must be finite"));
        }
        match self.fixed_variable {
            FixedVariable::Tau => check_tau(self.fixed_value)?,
            FixedVariable::S0 if !self.fixed_value.is_finite() => {
                return Err(Error::invalid("s0 must be finite"));
            }
            FixedVariable::S0 => {}
        }
        if let Some((lo, hi)) = self.window {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::invalid(format!("degenerate search window [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

/// Assigns `s0` as a root of multiplicity `n + m + 1`, all coefficients free.
pub fn classic_mid(n: usize, m: usize, s0: f64, tau: f64) -> Result<MidDesign> {
    check_orders(n, m)?;
    check_tau(tau)?;
    if !s0.is_finite() {
        return Err(Error::invalid("s0 must be finite"));
    }

    // Equations k = n..=n+m only see P_b: P_a^(k) is n! at k = n and zero
    // beyond. With u_i = E tau^{-i} p_i the subsystem no longer depends on
    // (s0, tau):
    //   sum_i C(n+r, i) (-1)^{n+r-i} u_i = -[r == 0] n! / tau^n.
    let size = m + 1;
    let matrix = DMatrix::from_fn(size, size, |r, i| {
        let k = n + r;
        let sign = if (k - i) % 2 == 0 { 1.0 } else { -1.0 };
        sign * binomial(k, i)
    });
    let mut rhs = DVector::zeros(size);
    rhs[0] = -factorial(n) / tau.powi(n as i32);
    let u = solve_guarded(matrix, rhs)?;

    // w_i = E p_i
    let w: Vec<f64> = (0..size).map(|i| u[i] * tau.powi(i as i32)).collect();

    // P_a^(k)(s0) for k < n from the remaining equations; P_a^(n) = n!.
    let mut taylor_a: Vec<f64> = (0..n)
        .map(|k| -delayed_taylor_sum(&w, k, tau))
        .collect();
    taylor_a.push(factorial(n));

    let growth = (s0 * tau).exp();
    let taylor_b: Vec<f64> = w.iter().map(|wi| wi * growth).collect();

    let mut a = taylor_to_monomial(&taylor_a, s0);
    a.truncate(n);
    let b = taylor_to_monomial(&taylor_b, s0);
    if a.iter().chain(b.iter()).any(|c| !c.is_finite()) {
        return Err(Error::SingularSystem {
            condition: f64::INFINITY,
        });
    }

    Ok(MidDesign {
        qp: Quasipolynomial::new(a, b, tau)?,
        s0,
        multiplicity: n + m + 1,
        mode: MidMode::Classic,
        candidates: Vec::new(),
    })
}

/// Assigns a root of multiplicity `m + 2` with the undelayed coefficients
/// fixed, solving the compatibility equation for the free variable.
pub fn control_oriented_mid(spec: &ControlSpec) -> Result<MidDesign> {
    spec.validate()?;
    let window = spec
        .window
        .unwrap_or_else(|| default_window(spec.fixed_variable, spec.fixed_value));
    let candidates = solve_compatibility(
        spec.n,
        spec.m,
        &spec.a,
        spec.fixed_variable,
        spec.fixed_value,
        window,
    )?;
    if candidates.is_empty() {
        return Err(Error::NoAdmissibleRoot {
            equation: compatibility_equation(
                spec.n,
                spec.m,
                &spec.a,
                Some((spec.fixed_variable, spec.fixed_value)),
            )?,
        });
    }

    let chosen = match spec.candidate {
        Some(index) => *candidates.get(index).ok_or_else(|| {
            Error::invalid(format!(
                "candidate index {index} out of range ({} candidates)",
                candidates.len()
            ))
        })?,
        None => default_candidate(spec, &candidates)?,
    };
    let (s0, tau) = match spec.fixed_variable {
        FixedVariable::Tau => (chosen, spec.fixed_value),
        FixedVariable::S0 => (spec.fixed_value, chosen),
    };

    let b = eliminate_delayed(&spec.a, spec.m, s0, tau)?;
    Ok(MidDesign {
        qp: Quasipolynomial::new(spec.a.clone(), b, tau)?,
        s0,
        multiplicity: spec.m + 2,
        mode: MidMode::ControlOriented,
        candidates,
    })
}

/// Picks the candidate on the rightmost branch of the compatibility curve:
/// `s0` must be the largest real zero of `F(., tau)` in its window.
///
/// With `tau` fixed this is simply the largest candidate. With `s0` fixed,
/// the first `tau` (ascending) passing the test wins, falling back to the
/// smallest `tau`.
fn default_candidate(spec: &ControlSpec, candidates: &[f64]) -> Result<f64> {
    match spec.fixed_variable {
        FixedVariable::Tau => Ok(*candidates.last().expect("non-empty candidates")),
        FixedVariable::S0 => {
            let s0 = spec.fixed_value;
            for &tau in candidates {
                let zeros = solve_compatibility(
                    spec.n,
                    spec.m,
                    &spec.a,
                    FixedVariable::Tau,
                    tau,
                    default_window(FixedVariable::Tau, tau),
                )?;
                let slack = 1e-6 * s0.abs().max(1.0);
                if zeros.iter().all(|&z| z <= s0 + slack) {
                    return Ok(tau);
                }
            }
            Ok(candidates[0])
        }
    }
}

/// Gains `b` making `s0` a root of multiplicity `m + 1` for the given
/// undelayed part. Equations `k = 0..=m` are triangular in `p_i`.
pub(crate) fn eliminate_delayed(a: &[f64], m: usize, s0: f64, tau: f64) -> Result<Vec<f64>> {
    let w = eliminated_taylor(a, m, s0, tau);
    let growth = (s0 * tau).exp();
    let taylor_b: Vec<f64> = w.iter().map(|wi| wi * growth).collect();
    let b = taylor_to_monomial(&taylor_b, s0);
    if b.iter().any(|c| !c.is_finite()) {
        return Err(Error::SingularSystem {
            condition: f64::INFINITY,
        });
    }
    Ok(b)
}

/// `w_i = exp(-s0 tau) P_b^(i)(s0)` for `i = 0..=m` solving equations
/// `k = 0..=m` by forward substitution.
pub(crate) fn eliminated_taylor(a: &[f64], m: usize, s0: f64, tau: f64) -> Vec<f64> {
    let s = Complex64::new(s0, 0.0);
    let mut w: Vec<f64> = Vec::with_capacity(m + 1);
    for k in 0..=m {
        let wk = -monic_derivative(a, s, k).re - delayed_taylor_sum(&w, k, tau);
        w.push(wk);
    }
    w
}

/// `sum_{i < len, i <= k} C(k, i) (-tau)^(k-i) w_i`.
fn delayed_taylor_sum(w: &[f64], k: usize, tau: f64) -> f64 {
    w.iter()
        .enumerate()
        .take(k + 1)
        .map(|(i, wi)| binomial(k, i) * (-tau).powi((k - i) as i32) * wi)
        .sum()
}

/// Monomial coefficients of `sum_i d_i (s - center)^i / i!`.
fn taylor_to_monomial(derivatives: &[f64], center: f64) -> Vec<f64> {
    let len = derivatives.len();
    (0..len)
        .map(|j| {
            (j..len)
                .map(|i| {
                    derivatives[i] / factorial(i) * binomial(i, j) * (-center).powi((i - j) as i32)
                })
                .sum()
        })
        .collect()
}

/// LU with partial pivoting, refusing systems whose 1-norm condition number
/// exceeds [`MAX_CONDITION`].
fn solve_guarded(matrix: DMatrix<f64>, rhs: DVector<f64>) -> Result<DVector<f64>> {
    let norm = one_norm(&matrix);
    let lu = matrix.lu();
    let inverse = lu.try_inverse().ok_or(Error::SingularSystem {
        condition: f64::INFINITY,
    })?;
    let condition = norm * one_norm(&inverse);
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(Error::SingularSystem { condition });
    }
    lu.solve(&rhs).ok_or(Error::SingularSystem { condition })
}

fn one_norm(matrix: &DMatrix<f64>) -> f64 {
    matrix
        .column_iter()
        .map(|col| col.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `|delta^(k)(s0)|` for `k = 0..=multiplicity`, together with the scale
/// `max(1, |s0|^n)` used to judge them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiplicityCertificate {
    pub residuals: Vec<f64>,
    /// `|delta^(multiplicity)(s0)|`.
    pub leading: f64,
    pub scale: f64,
}

impl MultiplicityCertificate {
    pub fn max_scaled_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |acc, r| acc.max(r / self.scale))
    }

    /// All residuals below `TOL_MULT * scale` and a nonzero next derivative.
    pub fn holds(&self) -> bool {
        self.max_scaled_residual() <= TOL_MULT && self.leading > 0.0
    }
}

impl MidDesign {
    /// Re-evaluates the multiplicity conditions through [`Quasipolynomial`].
    pub fn certificate(&self) -> MultiplicityCertificate {
        let s = ComplexPoint::new(self.s0, 0.0);
        let residuals = (0..self.multiplicity)
            .map(|k| self.qp.evaluate_derivative(s, k).norm())
            .collect();
        MultiplicityCertificate {
            residuals,
            leading: self.qp.evaluate_derivative(s, self.multiplicity).norm(),
            scale: self.s0.abs().powi(self.qp.n() as i32).max(1.0),
        }
    }
}
