//! Argument-principle integrals over rectangle boundaries.
//!
//! For a positively oriented contour `C` the integrals
//!
//! ```text
//! (1 / 2 pi i) oint_C (s - c)^p delta'(s) / delta(s) ds,   p = 0, 1, 2
//! ```
//!
//! give the number of enclosed roots and the first two power sums of the
//! enclosed roots about `c`. Each edge is integrated with composite
//! Gauss-Legendre panels, halving any panel whose value disagrees with the
//! sum over its two halves.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;

use super::Rectangle;
use crate::quasipoly::Quasipolynomial;

const GAUSS_ORDER: usize = 16;
const MAX_PANEL_DEPTH: usize = 48;
const MAX_EVALUATIONS: usize = 4_000_000;
const ROUNDING_GUARD: f64 = 1e-12;

/// Nodes and weights on `[-1, 1]`.
fn gauss_legendre() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GAUSS_ORDER;
        (0..n)
            .map(|i| {
                let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
                let mut derivative = 0.0;
                for _ in 0..100 {
                    // Legendre recurrence for P_n(x) and P_n'(x).
                    let (mut p0, mut p1) = (1.0, x);
                    for k in 2..=n {
                        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                        p0 = p1;
                        p1 = p2;
                    }
                    derivative = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                    let step = p1 / derivative;
                    x -= step;
                    if step.abs() < 1e-16 {
                        break;
                    }
                }
                (x, 2.0 / ((1.0 - x * x) * derivative * derivative))
            })
            .collect()
    })
}

/// Normalized contour integrals plus the closest approach to a root seen
/// while sampling the boundary.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ContourIntegral {
    /// `(1 / 2 pi i) oint (s - c)^p delta'/delta ds` for `p = 0, 1, 2`.
    pub moments: [Complex64; 3],
    pub center: Complex64,
    /// Smallest `|delta(s)| / term_magnitude(s)` over the sampled nodes.
    pub min_relative: f64,
    /// Smallest `|delta(s)|` over the sampled nodes.
    pub min_abs: f64,
    /// Smallest Newton step `|delta(s) / delta'(s)|` over the sampled nodes,
    /// a distance estimate to the nearest root that stays meaningful next
    /// to multiple roots.
    pub min_step: f64,
}

impl ContourIntegral {
    /// The boundary keeps clear of roots: at least `eps * diameter` away by
    /// the Newton estimate, and `delta` well above its rounding error.
    pub fn clear(&self, eps: f64, diameter: f64) -> bool {
        self.min_step >= eps * diameter && self.min_relative >= ROUNDING_GUARD
    }

    pub fn winding(&self) -> f64 {
        self.moments[0].re
    }

    /// Nearest integer when the winding value is within 0.25 of it.
    pub fn count(&self) -> Option<usize> {
        let w = self.winding();
        let rounded = w.round();
        let ok = (w - rounded).abs() < 0.25 && self.moments[0].im.abs() < 0.25 && rounded >= 0.0;
        ok.then_some(rounded as usize)
    }

    /// Mean of the enclosed roots.
    pub fn centroid(&self) -> Option<Complex64> {
        let n = self.count()?;
        (n > 0).then(|| self.center + self.moments[1] / n as f64)
    }

    /// Root-mean-square distance of the enclosed roots from their mean,
    /// from `sum (r - mean)^2 = S2 - S1^2 / N`.
    pub fn spread(&self) -> Option<f64> {
        let n = self.count()? as f64;
        if n == 0.0 {
            return None;
        }
        let centered = self.moments[2] - self.moments[1] * self.moments[1] / n;
        Some((centered.norm() / n).sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum ContourFailure {
    /// A node landed on (or numerically at) a root.
    HitRoot { min_abs: f64 },
    /// Panel refinement exhausted its depth or evaluation budget.
    NotConverged { winding: f64 },
}

struct Accumulator<'a> {
    qp: &'a Quasipolynomial,
    center: Complex64,
    radius: f64,
    tol: f64,
    sums: [Complex64; 3],
    min_relative: f64,
    min_abs: f64,
    min_step: f64,
    evaluations: usize,
    failed: bool,
}

impl Accumulator<'_> {
    /// Gauss-Legendre estimate over the segment `from -> to`.
    ///
    /// The fourth entry (real) bounds the rounding noise of the estimate:
    /// `delta` carries an absolute error of order `eps * term_magnitude`.
    fn panel(&mut self, from: Complex64, to: Complex64) -> Option<([Complex64; 3], f64)> {
        let half = (to - from) * 0.5;
        let mid = (to + from) * 0.5;
        let mut out = [Complex64::new(0.0, 0.0); 3];
        let mut noise = 0.0;
        for &(x, w) in gauss_legendre() {
            let s = mid + half * x;
            let (value, slope) = self.qp.evaluate_with_derivative(s);
            self.evaluations += 1;
            let magnitude = value.norm();
            self.min_abs = self.min_abs.min(magnitude);
            let scale = self.qp.term_magnitude(s);
            self.min_relative = self.min_relative.min(magnitude / scale);
            self.min_step = self.min_step.min(magnitude / slope.norm());
            if magnitude == 0.0 || !magnitude.is_finite() || !slope.is_finite() {
                return None;
            }
            let ratio = slope / value * half * w;
            noise += ratio.norm() * (1.0 + scale / magnitude) * 16.0 * f64::EPSILON;
            let offset = s - self.center;
            out[0] += ratio;
            out[1] += ratio * offset;
            out[2] += ratio * offset * offset;
        }
        Some((out, noise))
    }

    fn integrate_segment(&mut self, from: Complex64, to: Complex64, share: f64) {
        let Some(whole) = self.panel(from, to) else {
            self.failed = true;
            return;
        };
        // Explicit stack of (from, to, estimate, share, depth).
        let mut stack = vec![(from, to, whole, share, 0usize)];
        while let Some((a, b, estimate, share, depth)) = stack.pop() {
            if self.failed {
                return;
            }
            let mid = (a + b) * 0.5;
            let (Some((left, left_noise)), Some((right, right_noise))) =
                (self.panel(a, mid), self.panel(mid, b))
            else {
                self.failed = true;
                return;
            };
            let refined = [left[0] + right[0], left[1] + right[1], left[2] + right[2]];
            // Never ask for more than the evaluation noise allows.
            let allowed = (self.tol * share).max(estimate.1 + left_noise + right_noise);
            let converged = (0..3).all(|p| {
                (refined[p] - estimate.0[p]).norm() <= allowed * self.radius.powi(p as i32)
            });
            if converged {
                for p in 0..3 {
                    self.sums[p] += refined[p];
                }
            } else if depth >= MAX_PANEL_DEPTH || self.evaluations > MAX_EVALUATIONS {
                self.failed = true;
                return;
            } else {
                stack.push((mid, b, (right, right_noise), share * 0.5, depth + 1));
                stack.push((a, mid, (left, left_noise), share * 0.5, depth + 1));
            }
        }
    }
}

/// Integrates over the boundary of `rect`, counterclockwise.
pub(crate) fn rectangle_integral(
    qp: &Quasipolynomial,
    rect: &Rectangle,
    tol: f64,
) -> Result<ContourIntegral, ContourFailure> {
    let corners = [
        Complex64::new(rect.x_min, rect.y_min),
        Complex64::new(rect.x_max, rect.y_min),
        Complex64::new(rect.x_max, rect.y_max),
        Complex64::new(rect.x_min, rect.y_max),
    ];
    let center = rect.center();
    let mut acc = Accumulator {
        qp,
        center,
        radius: (0.5 * rect.diameter()).max(f64::MIN_POSITIVE),
        tol: tol * 2.0 * PI,
        sums: [Complex64::new(0.0, 0.0); 3],
        min_relative: f64::INFINITY,
        min_abs: f64::INFINITY,
        min_step: f64::INFINITY,
        evaluations: 0,
        failed: false,
    };
    for edge in 0..4 {
        let from = corners[edge];
        let to = corners[(edge + 1) % 4];
        let length = (to - from).norm();
        // Panels no longer than about a third of the exp(-i y tau) period.
        let panels = ((length * qp.tau().max(1e-3) / 2.0).ceil() as usize).clamp(2, 4096);
        let share = 0.25 / panels as f64;
        for j in 0..panels {
            let a = from + (to - from) * (j as f64 / panels as f64);
            let b = from + (to - from) * ((j + 1) as f64 / panels as f64);
            acc.integrate_segment(a, b, share);
            if acc.failed {
                break;
            }
        }
        if acc.failed {
            break;
        }
    }
    let scale = Complex64::new(0.0, 2.0 * PI);
    let moments = acc.sums.map(|v| v / scale);
    if acc.failed {
        if acc.min_abs == 0.0 || !acc.min_abs.is_finite() {
            return Err(ContourFailure::HitRoot { min_abs: acc.min_abs });
        }
        return Err(ContourFailure::NotConverged { winding: moments[0].re });
    }
    Ok(ContourIntegral {
        moments,
        center,
        min_relative: acc.min_relative,
        min_abs: acc.min_abs,
        min_step: acc.min_step,
    })
}
