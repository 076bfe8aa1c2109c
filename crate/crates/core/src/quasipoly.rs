//! Characteristic quasipolynomials of retarded single-delay equations.
//!
//! The equation
//!
//! ```text
//! y^(n)(t) + a_{n-1} y^(n-1)(t) + ... + a_0 y(t) + b_m y^(m)(t - tau) + ... + b_0 y(t - tau) = 0
//! ```
//!
//! has characteristic function
//!
//! ```text
//! delta(s) = s^n + sum_k a_k s^k + exp(-s tau) sum_k b_k s^k.
//! ```
//!
//! Coefficients are stored densely in ascending powers. The leading `s^n`
//! is implicit.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the complex plane.
pub type ComplexPoint = Complex64;

/// `delta(s) = s^n + P_a(s) + exp(-s tau) P_b(s)` with `n > m >= 0`, `tau > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawQuasipolynomial", into = "RawQuasipolynomial")]
pub struct Quasipolynomial {
    a: Vec<f64>,
    b: Vec<f64>,
    tau: f64,
}

#[derive(Serialize, Deserialize)]
struct RawQuasipolynomial {
    n: usize,
    m: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    tau: f64,
}

impl TryFrom<RawQuasipolynomial> for Quasipolynomial {
    type Error = Error;

    fn try_from(raw: RawQuasipolynomial) -> Result<Self> {
        if raw.a.len() != raw.n {
            return Err(Error::invalid(format!(
                "a has {} coefficients but n = {}",
                raw.a.len(),
                raw.n
            )));
        }
        if raw.b.len() != raw.m + 1 {
            return Err(Error::invalid(format!(
                "b has {} coefficients but m + 1 = {}",
                raw.b.len(),
                raw.m + 1
            )));
        }
        Quasipolynomial::new(raw.a, raw.b, raw.tau)
    }
}

impl From<Quasipolynomial> for RawQuasipolynomial {
    fn from(qp: Quasipolynomial) -> Self {
        RawQuasipolynomial {
            n: qp.n(),
            m: qp.m(),
            a: qp.a,
            b: qp.b,
            tau: qp.tau,
        }
    }
}

/// Checks the order constraint shared by every entry point.
pub(crate) fn check_orders(n: usize, m: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("n must be positive"));
    }
    if m >= n {
        return Err(Error::invalid(format!(
            "retarded type requires n > m, got n = {n}, m = {m}"
        )));
    }
    Ok(())
}

pub(crate) fn check_tau(tau: f64) -> Result<()> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::invalid(format!("tau must be a positive finite real, got {tau}")));
    }
    Ok(())
}

impl Quasipolynomial {
    /// Builds `s^n + sum a_k s^k + exp(-s tau) sum b_k s^k` with
    /// `n = a.len()` and `m = b.len() - 1`.
    pub fn new(a: Vec<f64>, b: Vec<f64>, tau: f64) -> Result<Self> {
        if b.is_empty() {
            return Err(Error::invalid("b needs at least one coefficient"));
        }
        check_orders(a.len(), b.len() - 1)?;
        check_tau(tau)?;
        if a.iter().chain(b.iter()).any(|c| !c.is_finite()) {
            return Err(Error::invalid("coefficients must be finite"));
        }
        Ok(Self { a, b, tau })
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn m(&self) -> usize {
        self.b.len() - 1
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Same coefficients, different delay.
    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        check_tau(tau)?;
        Ok(Self { tau, ..self.clone() })
    }

    /// `delta(s)`.
    pub fn evaluate(&self, s: ComplexPoint) -> ComplexPoint {
        let pa = horner_monic(&self.a, s);
        let pb = horner(&self.b, s);
        pa + (-s * self.tau).exp() * pb
    }

    /// `delta^(k)(s)`, using the Leibniz expansion of the delayed term:
    /// `d^k [e^{-s tau} P_b] = e^{-s tau} sum_i C(k,i) (-tau)^{k-i} P_b^(i)`.
    pub fn evaluate_derivative(&self, s: ComplexPoint, k: usize) -> ComplexPoint {
        if k == 0 {
            return self.evaluate(s);
        }
        let pa = monic_derivative(&self.a, s, k);
        let mut delayed = Complex64::new(0.0, 0.0);
        for i in 0..=k.min(self.m()) {
            let weight = binomial(k, i) * (-self.tau).powi((k - i) as i32);
            delayed += weight * poly_derivative(&self.b, s, i);
        }
        pa + (-s * self.tau).exp() * delayed
    }

    /// `(delta(s), delta'(s))` in one pass.
    pub fn evaluate_with_derivative(&self, s: ComplexPoint) -> (ComplexPoint, ComplexPoint) {
        let e = (-s * self.tau).exp();
        let (pa, dpa) = horner_monic_with_derivative(&self.a, s);
        let (pb, dpb) = horner_with_derivative(&self.b, s);
        (pa + e * pb, dpa + e * (dpb - self.tau * pb))
    }

    /// Sum of the absolute values of the individual terms of `delta(s)`.
    ///
    /// Rounding errors in `evaluate` are bounded by a small multiple of
    /// machine epsilon times this quantity.
    pub fn term_magnitude(&self, s: ComplexPoint) -> f64 {
        let r = s.norm();
        let lead = r.powi(self.n() as i32);
        let undelayed: f64 = self.a.iter().rev().fold(0.0, |acc, c| acc * r + c.abs());
        let delayed: f64 = self.b.iter().rev().fold(0.0, |acc, c| acc * r + c.abs());
        lead + undelayed + (-s.re * self.tau).exp() * delayed
    }
}

pub(crate) fn horner(coeffs: &[f64], s: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
}

/// `s^n + sum_{k<n} a_k s^k`.
pub(crate) fn horner_monic(a: &[f64], s: Complex64) -> Complex64 {
    a.iter().rev().fold(Complex64::new(1.0, 0.0), |acc, &c| acc * s + c)
}

fn horner_with_derivative(coeffs: &[f64], s: Complex64) -> (Complex64, Complex64) {
    let zero = Complex64::new(0.0, 0.0);
    coeffs.iter().rev().fold((zero, zero), |(p, dp), &c| (p * s + c, dp * s + p))
}

fn horner_monic_with_derivative(a: &[f64], s: Complex64) -> (Complex64, Complex64) {
    let start = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
    a.iter().rev().fold(start, |(p, dp), &c| (p * s + c, dp * s + p))
}

/// k-th derivative of `sum_j c_j s^j` at `s`.
pub(crate) fn poly_derivative(coeffs: &[f64], s: Complex64, k: usize) -> Complex64 {
    if k >= coeffs.len() {
        return Complex64::new(0.0, 0.0);
    }
    coeffs[k..]
        .iter()
        .enumerate()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, (j, &c)| {
            acc * s + c * falling_factorial(j + k, k)
        })
}

/// k-th derivative of `s^n + sum_{j<n} a_j s^j` at `s`.
pub(crate) fn monic_derivative(a: &[f64], s: Complex64, k: usize) -> Complex64 {
    let n = a.len();
    if k > n {
        return Complex64::new(0.0, 0.0);
    }
    let lead = falling_factorial(n, k) * s.powi((n - k) as i32);
    lead + poly_derivative(a, s, k)
}

/// `C(n, k)` as a float.
pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `n (n-1) ... (n-k+1)`.
pub(crate) fn falling_factorial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64)
}

pub(crate) fn factorial(n: usize) -> f64 {
    falling_factorial(n, n)
}
