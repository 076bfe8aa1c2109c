//! The scalar relation between `s0` and `tau` in control-oriented mode.
//!
//! Eliminating the delayed gains with the first `m + 1` multiplicity
//! conditions leaves `F(s0, tau) = delta^(m+1)(s0)`. After the elimination
//! the exponential factor cancels, so `F` is a polynomial in `s0` and `tau`;
//! [`CompatibilityPolynomial`] keeps it in symbolic form for display.

use std::collections::BTreeMap;

use num_complex::Complex64;

use super::{delayed_taylor_sum, eliminated_taylor, FixedVariable};
use crate::error::{Error, Result};
use crate::quasipoly::{binomial, check_orders, check_tau, falling_factorial, monic_derivative};

/// Number of grid intervals used to bracket sign changes.
pub const GRID_INTERVALS: usize = 10_000;

const BISECTION_TOL: f64 = 1e-12;

/// `F(s0, tau)`: the `(m+1)`-th derivative of `delta` at `s0` once `b` has
/// been chosen so that `s0` is a root of multiplicity `m + 1`.
pub fn compatibility_function(n: usize, m: usize, a: &[f64], s0: f64, tau: f64) -> Result<f64> {
    check_orders(n, m)?;
    check_tau(tau)?;
    if a.len() != n {
        return Err(Error::invalid(format!("a has {} coefficients but n = {n}", a.len())));
    }
    compat_unchecked(a, m, s0, tau)
}

fn compat_unchecked(a: &[f64], m: usize, s0: f64, tau: f64) -> Result<f64> {
    let w = eliminated_taylor(a, m, s0, tau);
    let s = Complex64::new(s0, 0.0);
    let value = monic_derivative(a, s, m + 1).re + delayed_taylor_sum(&w, m + 1, tau);
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::SingularSystem {
            condition: f64::INFINITY,
        })
    }
}

/// Default search interval for the free variable: `s0 in [-50/tau, 0]` when
/// `tau` is fixed, `tau in (0, 100]` when `s0` is fixed.
pub fn default_window(fixed: FixedVariable, fixed_value: f64) -> (f64, f64) {
    match fixed {
        FixedVariable::Tau => (-50.0 / fixed_value, 0.0),
        FixedVariable::S0 => (0.0, 100.0),
    }
}

/// All isolated real zeros of `F` in the free variable over `window`,
/// sorted ascending.
///
/// Zeros are bracketed by sign changes on a uniform grid of
/// [`GRID_INTERVALS`] cells, bisected to `1e-12` and polished by one Newton
/// step. Tangential zeros without a sign change are not reported.
pub fn solve_compatibility(
    n: usize,
    m: usize,
    a: &[f64],
    fixed: FixedVariable,
    fixed_value: f64,
    window: (f64, f64),
) -> Result<Vec<f64>> {
    check_orders(n, m)?;
    if a.len() != n {
        return Err(Error::invalid(format!("a has {} coefficients but n = {n}", a.len())));
    }
    let (mut lo, hi) = window;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::invalid(format!("degenerate search window [{lo}, {hi}]")));
    }
    let mut open_lower = false;
    match fixed {
        FixedVariable::Tau => check_tau(fixed_value)?,
        FixedVariable::S0 => {
            if !fixed_value.is_finite() {
                return Err(Error::invalid("s0 must be finite"));
            }
            if hi <= 0.0 {
                return Ok(Vec::new());
            }
            if lo <= 0.0 {
                lo = 0.0;
                open_lower = true;
            }
        }
    }

    let f = |x: f64| -> Option<f64> {
        let value = match fixed {
            FixedVariable::Tau => compat_unchecked(a, m, x, fixed_value),
            FixedVariable::S0 => compat_unchecked(a, m, fixed_value, x),
        };
        value.ok()
    };

    let width = hi - lo;
    let start = usize::from(open_lower);
    let samples: Vec<(f64, Option<f64>)> = (start..=GRID_INTERVALS)
        .map(|i| {
            let x = if i == GRID_INTERVALS {
                hi
            } else {
                lo + width * i as f64 / GRID_INTERVALS as f64
            };
            (x, f(x))
        })
        .collect();

    let mut zeros = Vec::new();
    for (x, fx) in &samples {
        if *fx == Some(0.0) {
            zeros.push(*x);
        }
    }
    for pair in samples.windows(2) {
        let ((x0, Some(f0)), (x1, Some(f1))) = (pair[0], pair[1]) else {
            continue;
        };
        if f0 * f1 < 0.0 {
            zeros.push(refine_bracket(&f, x0, f0, x1));
        }
    }

    zeros.sort_by(f64::total_cmp);
    zeros.dedup_by(|x, y| (*x - *y).abs() <= 1e-10 * x.abs().max(1.0));
    Ok(zeros)
}

fn refine_bracket(f: &impl Fn(f64) -> Option<f64>, mut lo: f64, mut f_lo: f64, mut hi: f64) -> f64 {
    let (bracket_lo, bracket_hi) = (lo, hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= BISECTION_TOL * mid.abs().max(1.0) {
            break;
        }
        let Some(f_mid) = f(mid) else { break };
        if f_mid == 0.0 {
            return mid;
        }
        if f_lo * f_mid < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            f_lo = f_mid;
        }
    }
    let x = 0.5 * (lo + hi);

    // One Newton polish with a central-difference slope, kept only when it
    // improves the residual inside the original bracket.
    let h = 1e-6 * x.abs().max(1.0);
    let (Some(fx), Some(fp), Some(fm)) = (f(x), f(x + h), f(x - h)) else {
        return x;
    };
    let slope = (fp - fm) / (2.0 * h);
    if slope == 0.0 || !slope.is_finite() {
        return x;
    }
    let polished = x - fx / slope;
    match f(polished) {
        Some(fy) if fy.abs() <= fx.abs() && (bracket_lo..=bracket_hi).contains(&polished) => polished,
        _ => x,
    }
}

/// `F` as a polynomial in `(s0, tau)`, keyed by `(s0 power, tau power)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CompatibilityPolynomial {
    terms: BTreeMap<(usize, usize), f64>,
}

impl CompatibilityPolynomial {
    pub fn new(n: usize, m: usize, a: &[f64]) -> Result<Self> {
        check_orders(n, m)?;
        if a.len() != n {
            return Err(Error::invalid(format!("a has {} coefficients but n = {n}", a.len())));
        }
        let mut w: Vec<CompatibilityPolynomial> = Vec::with_capacity(m + 1);
        for k in 0..=m {
            let mut wk = monic_derivative_poly(a, k).scaled(-1.0);
            for (i, wi) in w.iter().enumerate() {
                wk.add_assign(&wi.times_tau_power(k - i).scaled(-delay_weight(k, i)));
            }
            w.push(wk);
        }
        let mut f = monic_derivative_poly(a, m + 1);
        for (i, wi) in w.iter().enumerate() {
            f.add_assign(&wi.times_tau_power(m + 1 - i).scaled(delay_weight(m + 1, i)));
        }
        f.prune();
        Ok(f)
    }

    pub fn evaluate(&self, s0: f64, tau: f64) -> f64 {
        self.terms
            .iter()
            .map(|(&(ps, pt), c)| c * s0.powi(ps as i32) * tau.powi(pt as i32))
            .sum()
    }

    /// Coefficients (ascending powers) of the univariate polynomial left in
    /// the free variable after substituting the fixed one.
    pub fn specialize(&self, fixed: FixedVariable, value: f64) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for (&(ps, pt), c) in &self.terms {
            let (free_power, fixed_power) = match fixed {
                FixedVariable::Tau => (ps, pt),
                FixedVariable::S0 => (pt, ps),
            };
            if out.len() <= free_power {
                out.resize(free_power + 1, 0.0);
            }
            out[free_power] += c * value.powi(fixed_power as i32);
        }
        out
    }

    /// Human-readable form, highest total degree first.
    pub fn render(&self) -> String {
        let mut terms: Vec<(&(usize, usize), &f64)> = self.terms.iter().collect();
        terms.sort_by(|(x, _), (y, _)| (y.0 + y.1, y.0).cmp(&(x.0 + x.1, x.0)));
        render_terms(terms.into_iter().map(|(&(ps, pt), &c)| {
            (c, vec![("s0", ps), ("tau", pt)])
        }))
    }

    fn prune(&mut self) {
        let largest = self.terms.values().fold(0.0f64, |acc, c| acc.max(c.abs()));
        self.terms.retain(|_, c| c.abs() > 1e-13 * largest);
    }

    fn scaled(mut self, factor: f64) -> Self {
        self.terms.values_mut().for_each(|c| *c *= factor);
        self
    }

    fn times_tau_power(&self, power: usize) -> Self {
        CompatibilityPolynomial {
            terms: self.terms.iter().map(|(&(ps, pt), &c)| ((ps, pt + power), c)).collect(),
        }
    }

    fn add_assign(&mut self, other: &Self) {
        for (key, c) in &other.terms {
            *self.terms.entry(*key).or_insert(0.0) += c;
        }
    }
}

/// `C(k, i) (-1)^(k-i)`; the `tau^(k-i)` part is carried symbolically.
fn delay_weight(k: usize, i: usize) -> f64 {
    let sign = if (k - i) % 2 == 0 { 1.0 } else { -1.0 };
    sign * binomial(k, i)
}

/// k-th derivative of `s^n + sum a_j s^j` as a polynomial in `s0`.
fn monic_derivative_poly(a: &[f64], k: usize) -> CompatibilityPolynomial {
    let n = a.len();
    let mut terms = BTreeMap::new();
    for (j, &c) in a.iter().chain(std::iter::once(&1.0)).enumerate() {
        if j >= k && c != 0.0 {
            terms.insert((j - k, 0), c * falling_factorial(j, k));
        }
    }
    debug_assert!(k > n || !terms.is_empty());
    CompatibilityPolynomial { terms }
}

fn render_terms<'a>(terms: impl Iterator<Item = (f64, Vec<(&'a str, usize)>)>) -> String {
    let mut out = String::new();
    for (c, powers) in terms {
        if c == 0.0 {
            continue;
        }
        let factors: Vec<String> = powers
            .iter()
            .filter(|(_, p)| *p > 0)
            .map(|(name, p)| if *p == 1 { name.to_string() } else { format!("{name}^{p}") })
            .collect();
        let magnitude = c.abs();
        let body = match (factors.is_empty(), magnitude == 1.0) {
            (true, _) => format_coefficient(magnitude),
            (false, true) => factors.join("*"),
            (false, false) => format!("{}*{}", format_coefficient(magnitude), factors.join("*")),
        };
        if out.is_empty() {
            if c < 0.0 {
                out.push('-');
            }
        } else {
            out.push_str(if c < 0.0 { " - " } else { " + " });
        }
        out.push_str(&body);
    }
    if out.is_empty() {
        out.push('0');
    }
    out
}

fn format_coefficient(c: f64) -> String {
    if (c - c.round()).abs() <= 1e-9 * c.abs().max(1.0) && c.abs() < 1e15 {
        return format!("{}", c.round());
    }
    let magnitude = c.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).clamp(0, 15) as usize;
    let text = format!("{c:.decimals$}");
    let text = text.trim_end_matches('0').trim_end_matches('.');
    text.to_string()
}

/// Text of the compatibility equation, optionally specialized to the fixed
/// variable, e.g. `F(s0, tau) = tau^2*s0^2 + 4*tau*s0 + 2 = 0; with tau = 1:
/// s0^2 + 4*s0 + 2 = 0`.
pub fn compatibility_equation(
    n: usize,
    m: usize,
    a: &[f64],
    fixed: Option<(FixedVariable, f64)>,
) -> Result<String> {
    let poly = CompatibilityPolynomial::new(n, m, a)?;
    let mut text = format!("F(s0, tau) = {} = 0", poly.render());
    if let Some((variable, value)) = fixed {
        let coeffs = poly.specialize(variable, value);
        let free = variable.free().symbol();
        let largest = coeffs.iter().fold(0.0f64, |acc, c| acc.max(c.abs()));
        let univariate = render_terms(coeffs.iter().enumerate().rev().map(|(p, &c)| {
            let c = if c.abs() <= 1e-13 * largest { 0.0 } else { c };
            (c, vec![(free, p)])
        }));
        text.push_str(&format!(
            "; with {} = {}: {} = 0",
            variable.symbol(),
            format_signed(value),
            univariate
        ));
    }
    Ok(text)
}

fn format_signed(value: f64) -> String {
    let body = format_coefficient(value.abs());
    if value < 0.0 {
        format!("-{body}")
    } else {
        body
    }
}
