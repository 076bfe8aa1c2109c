//! Roots of a quasipolynomial inside a rectangle of the complex plane.
//!
//! Counting uses the argument principle on the rectangle boundary
//! ([`count_roots`]). [`find_roots`] bisects the rectangle until every cell
//! holds a single cluster of roots: simple roots are located from the
//! contour moments and polished by Newton iterations on `delta / delta'`,
//! multiple roots keep the contour centroid and receive the winding count
//! of a tight square around them as multiplicity.

mod contour;

use std::fmt::Write as _;
use std::time::Instant;

use log::debug;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quasipoly::{ComplexPoint, Quasipolynomial};
use contour::{rectangle_integral, ContourFailure, ContourIntegral};

/// `[x_min, x_max] x [y_min, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRectangle")]
pub struct Rectangle {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

#[derive(Deserialize)]
struct RawRectangle {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl TryFrom<RawRectangle> for Rectangle {
    type Error = Error;

    fn try_from(raw: RawRectangle) -> Result<Self> {
        Rectangle::new(raw.x_min, raw.x_max, raw.y_min, raw.y_max)
    }
}

impl Rectangle {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let finite = [x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite());
        if !finite || x_min >= x_max || y_min >= y_max {
            return Err(Error::invalid(format!(
                "rectangle needs x_min < x_max and y_min < y_max, got [{x_min}, {x_max}] x [{y_min}, {y_max}]"
            )));
        }
        Ok(Rectangle { x_min, x_max, y_min, y_max })
    }

    /// Axis-aligned square of half-width `half` centred at `center`.
    pub fn square(center: ComplexPoint, half: f64) -> Result<Self> {
        Rectangle::new(center.re - half, center.re + half, center.im - half, center.im + half)
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn center(&self) -> ComplexPoint {
        Complex64::new(0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))
    }

    pub fn contains(&self, s: ComplexPoint) -> bool {
        (self.x_min..=self.x_max).contains(&s.re) && (self.y_min..=self.y_max).contains(&s.im)
    }

    fn inflated(&self, by: f64) -> Rectangle {
        Rectangle {
            x_min: self.x_min - by,
            x_max: self.x_max + by,
            y_min: self.y_min - by,
            y_max: self.y_max + by,
        }
    }

    /// Splits along the longer edge at `fraction` of its length.
    fn split(&self, fraction: f64) -> (Rectangle, Rectangle) {
        if self.width() >= self.height() {
            let x = self.x_min + fraction * self.width();
            (Rectangle { x_max: x, ..*self }, Rectangle { x_min: x, ..*self })
        } else {
            let y = self.y_min + fraction * self.height();
            (Rectangle { y_max: y, ..*self }, Rectangle { y_min: y, ..*self })
        }
    }
}

/// A located root.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Root {
    pub re: f64,
    pub im: f64,
    pub multiplicity: usize,
    /// `|delta|` at the reported location.
    pub residual: f64,
    /// Set when several roots were resolved only as one cluster.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub merged: bool,
}

impl Root {
    pub fn location(&self) -> ComplexPoint {
        Complex64::new(self.re, self.im)
    }
}

/// All roots found in a rectangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootSet {
    pub rectangle: Rectangle,
    /// Winding count of the (possibly nudged) search rectangle.
    pub total_count: usize,
    /// Sorted by decreasing real part, then increasing imaginary part.
    pub roots: Vec<Root>,
}

impl RootSet {
    /// Largest real part among the roots, if any.
    pub fn abscissa(&self) -> Option<f64> {
        self.roots.iter().map(|r| r.re).reduce(f64::max)
    }

    /// One `re,im,multiplicity,residual` line per root, with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("re,im,multiplicity,residual\n");
        for r in &self.roots {
            let _ = writeln!(out, "{:?},{:?},{},{:?}", r.re, r.im, r.multiplicity, r.residual);
        }
        out
    }
}

/// Tuning knobs of the search.
#[derive(Debug, Clone, Copy)]
pub struct FinderConfig {
    /// Cells holding at most this many roots may be resolved directly.
    pub cluster_max: usize,
    /// Cells are resolved only once their diameter is below this fraction
    /// of the search rectangle diameter.
    pub refine_fraction: f64,
    /// Smallest half-width of the square used to certify a cluster,
    /// relative to `max(1, |z|)`.
    pub cluster_radius: f64,
    pub max_newton: usize,
    /// A boundary whose estimated distance `|delta / delta'|` to a root
    /// drops below this fraction of the rectangle diameter counts as
    /// passing through it.
    pub boundary_eps: f64,
    pub max_nudges: usize,
    /// Inflation per nudge, relative to the rectangle diameter.
    pub nudge_fraction: f64,
    /// Absolute quadrature tolerance on the winding value.
    pub quadrature_tol: f64,
    pub deadline: Option<Instant>,
}

impl Default for FinderConfig {
    fn default() -> Self {
        FinderConfig {
            cluster_max: 8,
            refine_fraction: 1e-2,
            cluster_radius: 1e-6,
            max_newton: 50,
            boundary_eps: 1e-8,
            max_nudges: 5,
            nudge_fraction: 1e-6,
            quadrature_tol: 1e-9,
            deadline: None,
        }
    }
}

impl FinderConfig {
    fn check_deadline(&self) -> Result<()> {
        match self.deadline {
            Some(deadline) if Instant::now() >= deadline => Err(Error::BudgetExceeded),
            _ => Ok(()),
        }
    }
}

/// Number of roots inside `rect`, counted with multiplicity.
pub fn count_roots(qp: &Quasipolynomial, rect: &Rectangle) -> Result<usize> {
    count_roots_with(qp, rect, &FinderConfig::default())
}

pub fn count_roots_with(qp: &Quasipolynomial, rect: &Rectangle, config: &FinderConfig) -> Result<usize> {
    let (_, integral) = nudged_integral(qp, rect, config)?;
    Ok(integral.count().expect("nudged_integral checks the count"))
}

/// Integrates over `rect`, inflating it slightly while the boundary passes
/// too close to a root.
fn nudged_integral(
    qp: &Quasipolynomial,
    rect: &Rectangle,
    config: &FinderConfig,
) -> Result<(Rectangle, ContourIntegral)> {
    let step = config.nudge_fraction * rect.diameter();
    let mut current = *rect;
    let mut min_abs = 0.0;
    for nudges in 0..=config.max_nudges {
        config.check_deadline()?;
        match rectangle_integral(qp, &current, config.quadrature_tol) {
            Ok(ci) if ci.clear(config.boundary_eps, current.diameter()) => {
                return match ci.count() {
                    Some(_) => Ok((current, ci)),
                    None => Err(Error::QuadratureNotConverged { value: ci.winding() }),
                };
            }
            Ok(ci) => min_abs = ci.min_abs,
            Err(ContourFailure::HitRoot { min_abs: hit }) => min_abs = hit,
            Err(ContourFailure::NotConverged { winding }) => {
                if nudges == config.max_nudges {
                    return Err(Error::QuadratureNotConverged { value: winding });
                }
            }
        }
        debug!("nudging contour {current:?} (min |delta| = {min_abs:e})");
        current = current.inflated(step);
    }
    Err(Error::ContourTooClose {
        min_abs,
        nudges: config.max_nudges,
    })
}

/// Every root of `qp` inside `rect`, with multiplicities.
pub fn find_roots(qp: &Quasipolynomial, rect: &Rectangle) -> Result<RootSet> {
    find_roots_with(qp, rect, &FinderConfig::default())
}

struct Cell {
    rect: Rectangle,
    integral: ContourIntegral,
    depth: usize,
    retried: bool,
}

enum Leaf {
    Resolved(Root),
    Split,
    NewtonFailed(Complex64),
}

/// Off-centre split positions. The first one avoids the real axis of
/// rectangles symmetric about it, where real roots live.
const SPLIT_FRACTIONS: [f64; 6] = [0.5137, 0.4749, 0.5419, 0.4387, 0.5877, 0.4003];
const MAX_DEPTH: usize = 80;

pub fn find_roots_with(qp: &Quasipolynomial, rect: &Rectangle, config: &FinderConfig) -> Result<RootSet> {
    let (search, top) = nudged_integral(qp, rect, config)?;
    let total_count = top.count().expect("checked");
    let refine_diam = config.refine_fraction * search.diameter();

    let mut roots: Vec<Root> = Vec::new();
    let mut stack = vec![Cell {
        rect: search,
        integral: top,
        depth: 0,
        retried: false,
    }];
    while let Some(cell) = stack.pop() {
        config.check_deadline()?;
        let count = cell.integral.count().expect("cells carry valid counts");
        if count == 0 {
            continue;
        }
        let mut newton_failed = false;
        // Tightly clustered roots are resolved early: splitting next to a
        // multiple root leaves edges where |delta| is at rounding level.
        let clustered = count > 1
            && cell
                .integral
                .spread()
                .is_some_and(|spread| spread < 1e-2 * cell.rect.diameter());
        if count <= config.cluster_max && (cell.rect.diameter() < refine_diam || clustered) {
            match resolve_leaf(qp, &cell, count, config) {
                Leaf::Resolved(root) => {
                    roots.push(root);
                    continue;
                }
                // A failed refinement gets one more subdivision.
                Leaf::NewtonFailed(at) if cell.retried => {
                    return Err(Error::NewtonDiverged { re: at.re, im: at.im });
                }
                Leaf::NewtonFailed(_) => newton_failed = true,
                Leaf::Split => {}
            }
        }
        if cell.depth >= MAX_DEPTH {
            return Err(Error::QuadratureNotConverged {
                value: cell.integral.winding(),
            });
        }
        let retried = cell.retried || newton_failed;
        let (left, right) = match split_cell(qp, &cell, count, config) {
            Ok(halves) => halves,
            Err(e) if count > 1 && count <= config.cluster_max => match resolve_leaf(qp, &cell, count, config) {
                Leaf::Resolved(root) => {
                    roots.push(root);
                    continue;
                }
                _ => return Err(e),
            },
            Err(e) => return Err(e),
        };
        for child in [right, left] {
            stack.push(Cell {
                rect: child.0,
                integral: child.1,
                depth: cell.depth + 1,
                retried,
            });
        }
    }

    let roots = merge_duplicates(roots, config);
    Ok(RootSet {
        rectangle: search,
        total_count,
        roots,
    })
}

fn split_cell(
    qp: &Quasipolynomial,
    cell: &Cell,
    count: usize,
    config: &FinderConfig,
) -> Result<((Rectangle, ContourIntegral), (Rectangle, ContourIntegral))> {
    let mut last_error = Error::ContourTooClose {
        min_abs: 0.0,
        nudges: SPLIT_FRACTIONS.len(),
    };
    for fraction in SPLIT_FRACTIONS {
        let (a, b) = cell.rect.split(fraction);
        let halves = (
            rectangle_integral(qp, &a, config.quadrature_tol),
            rectangle_integral(qp, &b, config.quadrature_tol),
        );
        match halves {
            (Ok(ia), Ok(ib)) => {
                let diameter = cell.rect.diameter();
                let clear = ia.clear(config.boundary_eps, diameter) && ib.clear(config.boundary_eps, diameter);
                match (ia.count(), ib.count()) {
                    (Some(ca), Some(cb)) if clear && ca + cb == count => return Ok(((a, ia), (b, ib))),
                    _ => {
                        last_error = Error::QuadratureNotConverged {
                            value: ia.winding() + ib.winding(),
                        }
                    }
                }
            }
            (Err(ContourFailure::NotConverged { winding }), _) | (_, Err(ContourFailure::NotConverged { winding })) => {
                last_error = Error::QuadratureNotConverged { value: winding };
            }
            (Err(ContourFailure::HitRoot { min_abs }), _) | (_, Err(ContourFailure::HitRoot { min_abs })) => {
                last_error = Error::ContourTooClose {
                    min_abs,
                    nudges: SPLIT_FRACTIONS.len(),
                };
            }
        }
        debug!("split of {:?} at {fraction} rejected", cell.rect);
    }
    Err(last_error)
}

fn resolve_leaf(qp: &Quasipolynomial, cell: &Cell, count: usize, config: &FinderConfig) -> Leaf {
    let Some(centroid) = cell.integral.centroid().map(snap_real) else {
        return Leaf::Split;
    };
    if count == 1 {
        return match newton(qp, centroid, config.max_newton).map(snap_real) {
            Some(z) if cell.rect.contains(z) => Leaf::Resolved(Root {
                re: z.re,
                im: z.im,
                multiplicity: 1,
                residual: qp.evaluate(z).norm(),
                merged: false,
            }),
            _ => Leaf::NewtonFailed(centroid),
        };
    }

    // Several roots: they form one cluster iff a tight square around the
    // centroid already winds `count` times. The square grows from
    // `cluster_radius` until the boundary values rise clear of rounding.
    let scale = centroid.norm().max(1.0);
    let max_half = 0.25 * cell.rect.width().min(cell.rect.height());
    let mut half = config.cluster_radius * scale;
    while half <= max_half {
        let Ok(square) = Rectangle::square(centroid, half) else {
            return Leaf::Split;
        };
        match rectangle_integral(qp, &square, config.quadrature_tol) {
            Ok(ci) if ci.min_relative >= 1e-11 => {
                if ci.count() != Some(count) {
                    return Leaf::Split;
                }
                let spread = cell.integral.spread().unwrap_or(0.0);
                return Leaf::Resolved(Root {
                    re: centroid.re,
                    im: centroid.im,
                    multiplicity: count,
                    residual: qp.evaluate(centroid).norm(),
                    merged: spread > 0.1 * half,
                });
            }
            _ => half *= 2.0,
        }
    }
    Leaf::Split
}

/// Drops an imaginary part at rounding level; real roots reached from a
/// complex start otherwise keep one.
fn snap_real(z: Complex64) -> Complex64 {
    if z.im.abs() <= 1e-14 * z.norm().max(1.0) {
        Complex64::new(z.re, 0.0)
    } else {
        z
    }
}

/// Newton's method on `u = delta / delta'`, whose roots are all simple:
/// `z <- z - delta delta' / (delta'^2 - delta delta'')`.
fn newton(qp: &Quasipolynomial, start: Complex64, max_iter: usize) -> Option<Complex64> {
    let mut z = start;
    for _ in 0..max_iter {
        let (f, df) = qp.evaluate_with_derivative(z);
        if f.norm() == 0.0 {
            return Some(z);
        }
        let ddf = qp.evaluate_derivative(z, 2);
        let denominator = df * df - f * ddf;
        if denominator.norm() == 0.0 || !denominator.is_finite() {
            return None;
        }
        let step = f * df / denominator;
        if !step.is_finite() {
            return None;
        }
        z -= step;
        if step.norm() <= 4.0 * f64::EPSILON * z.norm().max(1.0) {
            return Some(z);
        }
    }
    // Accept a final iterate whose residual is at rounding level.
    let residual = qp.evaluate(z).norm();
    (residual <= 1e3 * f64::EPSILON * qp.term_magnitude(z)).then_some(z)
}

fn merge_duplicates(mut roots: Vec<Root>, config: &FinderConfig) -> Vec<Root> {
    sort_roots(&mut roots);
    let mut out: Vec<Root> = Vec::with_capacity(roots.len());
    for root in roots {
        let radius = config.cluster_radius * root.location().norm().max(1.0);
        if let Some(existing) = out
            .iter_mut()
            .find(|r| (r.location() - root.location()).norm() <= radius)
        {
            existing.multiplicity += root.multiplicity;
            existing.merged = true;
        } else {
            out.push(root);
        }
    }
    out
}

fn sort_roots(roots: &mut [Root]) {
    roots.sort_by(|x, y| y.re.total_cmp(&x.re).then(x.im.total_cmp(&y.im)));
}

/// Outcome of [`check_dominance`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceReport {
    pub pass: bool,
    /// `min (s0 - Re r)` over the roots other than the assigned cluster;
    /// `None` when there are none.
    pub margin: Option<f64>,
    /// The root matched to `s0`, if one was found.
    pub assigned: Option<Root>,
    /// Roots other than the assigned one lying right of `s0 + tol`.
    pub violations: Vec<Root>,
}

/// Checks that no root other than the one at `s0` lies right of `s0 + tol`.
pub fn check_dominance(rs: &RootSet, s0: f64, tol: f64) -> DominanceReport {
    let target = Complex64::new(s0, 0.0);
    let match_radius = 1e-4 * s0.abs().max(1.0);
    let assigned_index = rs
        .roots
        .iter()
        .enumerate()
        .map(|(i, r)| (i, (r.location() - target).norm()))
        .filter(|(_, d)| *d <= match_radius)
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .map(|(i, _)| i);
    let others = rs
        .roots
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != assigned_index)
        .map(|(_, r)| *r);
    let margin = others.clone().map(|r| s0 - r.re).reduce(f64::min);
    let violations: Vec<Root> = others.filter(|r| r.re > s0 + tol).collect();
    DominanceReport {
        pass: violations.is_empty(),
        margin,
        assigned: assigned_index.map(|i| rs.roots[i]),
        violations,
    }
}
