//! Optimal facility location under the maximum-cost objective (the 1-center)
//! and the prediction error measured against it.
//!
//! The plane solver minimizes the convex function `f(y) = max_i d_p(x_i, y)`
//! by nested golden-section searches: the outer search runs over the first
//! coordinate of `g(a) = min_b f(a, b)`, the inner one over `b`. Both operate
//! on the profile's bounding box, which always contains a minimizer because
//! clamping a point into the box never increases any coordinate gap.

use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{FacError, Result};
use crate::metric::{coord_bounds, max_cost_points, Instance, MetricSpec, Point, Profile, EPS};

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 200;
pub const DEFAULT_CELL_BUDGET: u64 = 200_000_000;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    ClosedForm,
    ConvexMinimax,
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub location: Point,
    pub cost: f64,
    pub method: Method,
    /// Bound on `cost - true optimum`.
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// Midpoint of the extreme agents.
pub fn optimal_line(profile: &Profile) -> Result<OracleResult> {
    if profile.dim() != 1 {
        return Err(FacError::DimensionMismatch {
            expected: 1,
            got: profile.dim(),
        });
    }
    let (lo, hi) = profile.bounds()[0];
    Ok(OracleResult {
        location: Point::Line((lo + hi) / 2.0),
        cost: (hi - lo) / 2.0,
        method: Method::ClosedForm,
        tolerance: 0.0,
    })
}

struct Search {
    x: f64,
    fx: f64,
    width: f64,
    converged: bool,
}

/// Golden-section search for a convex `f` on `[lo, hi]`. Returns the best
/// evaluated point, not the bracket midpoint.
fn golden_section(
    mut f: impl FnMut(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    max_iter: usize,
) -> Search {
    let mut best = (lo, f(lo));
    let consider = |x: f64, fx: f64, best: &mut (f64, f64)| {
        if fx < best.1 {
            *best = (x, fx);
        }
    };
    let fhi = f(hi);
    consider(hi, fhi, &mut best);
    if hi - lo <= tol {
        return Search {
            x: best.0,
            fx: best.1,
            width: hi - lo,
            converged: true,
        };
    }
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    consider(c, fc, &mut best);
    consider(d, fd, &mut best);
    let mut iter = 0;
    while hi - lo > tol && iter < max_iter {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = f(c);
            consider(c, fc, &mut best);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = f(d);
            consider(d, fd, &mut best);
        }
        iter += 1;
    }
    Search {
        x: best.0,
        fx: best.1,
        width: hi - lo,
        converged: hi - lo <= tol,
    }
}

/// Smallest enclosing l_p ball of a planar profile.
pub fn optimal_lp_ball(
    profile: &Profile,
    metric: &MetricSpec,
    opts: SolverOptions,
) -> Result<OracleResult> {
    let p = match metric {
        MetricSpec::Plane { p } => *p,
        MetricSpec::Line => return Err(FacError::input("optimal_lp_ball needs a plane metric")),
    };
    metric.check(&profile.points()[0])?;
    if !(opts.tol > 0.0) {
        return Err(FacError::input("solver tolerance must be positive"));
    }
    let pts = profile.points();
    if profile.is_coincident() {
        return Ok(OracleResult {
            location: pts[0],
            cost: 0.0,
            method: Method::ConvexMinimax,
            tolerance: 0.0,
        });
    }
    let b = profile.bounds();
    let (a_lo, a_hi) = b[0];
    let (b_lo, b_hi) = b[1];
    let f = |a: f64, bb: f64| max_cost_points(metric, pts, &Point::Plane([a, bb]));

    let mut inner_ok = true;
    let mut inner_width: f64 = 0.0;
    let outer = golden_section(
        |a| {
            let s = golden_section(|bb| f(a, bb), b_lo, b_hi, opts.tol, opts.max_iter);
            inner_ok &= s.converged;
            inner_width = inner_width.max(s.width);
            s.fx
        },
        a_lo,
        a_hi,
        opts.tol,
        opts.max_iter,
    );
    let inner = golden_section(|bb| f(outer.x, bb), b_lo, b_hi, opts.tol, opts.max_iter);
    let location = Point::Plane([outer.x, inner.x]);
    let cost = inner.fx;
    let tolerance = crate::metric::lp_norm(outer.width, inner_width.max(inner.width), p);
    let result = OracleResult {
        location,
        cost,
        method: Method::ConvexMinimax,
        tolerance,
    };
    if !(outer.converged && inner.converged && inner_ok) {
        return Err(FacError::Solver {
            message: format!(
                "bracket width {:e} after {} iterations exceeds tol {:e}",
                outer.width.max(inner_width),
                opts.max_iter,
                opts.tol
            ),
            best: Box::new(result),
        });
    }
    Ok(result)
}

/// Axis-aligned search region, one `(lo, hi)` per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds(pub Vec<(f64, f64)>);

impl Bounds {
    /// The profile's bounding box inflated by its diameter on every side.
    pub fn inflated(metric: &MetricSpec, profile: &Profile) -> Bounds {
        let b = profile.bounds();
        let diam = diameter(metric, profile.points());
        Bounds(
            b.into_iter()
                .map(|(lo, hi)| (lo - diam, hi + diam))
                .collect(),
        )
    }

    fn contains_box(&self, other: &[(f64, f64)]) -> bool {
        self.0.len() == other.len()
            && self
                .0
                .iter()
                .zip(other)
                .all(|((lo, hi), (a, b))| *lo <= *a && *b <= *hi)
    }
}

pub(crate) fn diameter(metric: &MetricSpec, pts: &[Point]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, a) in pts.iter().enumerate() {
        for b in &pts[i + 1..] {
            d = d.max(metric.dist(a, b));
        }
    }
    d
}

fn axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let cells = ((hi - lo) / step).ceil() as usize;
    (0..=cells)
        .map(|k| (lo + k as f64 * step).min(hi))
        .collect()
}

/// Exhaustive grid minimizer of the maximum cost; an independent check on
/// the other solvers.
pub fn brute_force_center(
    profile: &Profile,
    metric: &MetricSpec,
    bounds: &Bounds,
    step: f64,
    cell_budget: u64,
) -> Result<OracleResult> {
    metric.check(&profile.points()[0])?;
    if !(step > 0.0) {
        return Err(FacError::input("grid step must be positive"));
    }
    if bounds.0.len() != metric.dim() {
        return Err(FacError::input(
            "grid bounds dimension does not match metric",
        ));
    }
    if !bounds.contains_box(&coord_bounds(profile.points())) {
        return Err(FacError::input(
            "grid bounds must contain the profile's bounding box",
        ));
    }
    let axes: Vec<Vec<f64>> = bounds
        .0
        .iter()
        .map(|&(lo, hi)| axis(lo, hi, step))
        .collect();
    let cells: u64 = axes.iter().map(|a| a.len() as u64).product();
    if cells > cell_budget {
        return Err(FacError::input(format!(
            "grid has {cells} cells, budget is {cell_budget}"
        )));
    }
    let pts = profile.points();
    let tolerance = step * metric.cell_diameter_factor();
    let (location, cost) = match metric {
        MetricSpec::Line => axes[0]
            .iter()
            .map(|&x| {
                let y = Point::Line(x);
                (y, max_cost_points(metric, pts, &y))
            })
            .fold((Point::Line(f64::NAN), f64::INFINITY), |best, c| {
                if c.1 < best.1 {
                    c
                } else {
                    best
                }
            }),
        MetricSpec::Plane { p } => {
            let p = *p;
            let coords: Vec<[f64; 2]> = pts.iter().map(|q| [q.coord(0), q.coord(1)]).collect();
            let bs = &axes[1];
            // Rows are reduced in order so ties resolve identically on any schedule.
            let rows: Vec<(f64, f64, f64)> = axes[0]
                .par_iter()
                .map(|&a| {
                    let mut best = (f64::NAN, f64::INFINITY);
                    for &b in bs {
                        let v = powered_max(&coords, a, b, p);
                        if v < best.1 {
                            best = (b, v);
                        }
                    }
                    (a, best.0, best.1)
                })
                .collect();
            let (a, b, v) =
                rows.into_iter()
                    .fold((f64::NAN, f64::NAN, f64::INFINITY), |best, r| {
                        if r.2 < best.2 {
                            r
                        } else {
                            best
                        }
                    });
            let y = Point::Plane([a, b]);
            debug_assert!(v.is_finite());
            (y, max_cost_points(metric, pts, &y))
        }
    };
    Ok(OracleResult {
        location,
        cost,
        method: Method::Grid,
        tolerance,
    })
}

/// `max_i (|da|^p + |db|^p)`, monotone in the true maximum distance.
fn powered_max(coords: &[[f64; 2]], a: f64, b: f64, p: f64) -> f64 {
    let pw: fn(f64, f64) -> f64 = if p == 1.0 {
        |d, _| d
    } else if p == 2.0 {
        |d, _| d * d
    } else if p.fract() == 0.0 && p <= 16.0 {
        |d, p| d.powi(p as i32)
    } else {
        f64::powf
    };
    coords
        .iter()
        .map(|c| pw((c[0] - a).abs(), p) + pw((c[1] - b).abs(), p))
        .fold(0.0, f64::max)
}

/// Optimal location for any metric; the solver is picked from the metric kind.
pub fn optimal(
    metric: &MetricSpec,
    profile: &Profile,
    opts: SolverOptions,
) -> Result<OracleResult> {
    match metric {
        MetricSpec::Line => {
            metric.check(&profile.points()[0])?;
            optimal_line(profile)
        }
        MetricSpec::Plane { .. } => optimal_lp_ball(profile, metric, opts),
    }
}

/// Prediction error `d(o(x), pi) / MC(x, o(x))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorValue {
    Finite(f64),
    Infinite,
}

impl ErrorValue {
    pub fn value(&self) -> f64 {
        match self {
            ErrorValue::Finite(v) => *v,
            ErrorValue::Infinite => f64::INFINITY,
        }
    }

    pub fn from_f64(v: f64) -> Self {
        if v.is_finite() {
            ErrorValue::Finite(v)
        } else {
            ErrorValue::Infinite
        }
    }
}

impl std::fmt::Display for ErrorValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ErrorValue::Finite(v) => write!(f, "{v}"),
            ErrorValue::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for ErrorValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        crate::report::serialize_extended(&self.value(), s)
    }
}

/// Error of the instance's prediction; uses `oracle` when already computed.
pub fn error_against(instance: &Instance, oracle: &OracleResult, tol: f64) -> ErrorValue {
    let d = instance
        .metric()
        .dist(&oracle.location, instance.prediction());
    if oracle.cost <= 0.0 {
        if d <= tol.max(EPS) {
            ErrorValue::Finite(0.0)
        } else {
            ErrorValue::Infinite
        }
    } else {
        ErrorValue::Finite(d / oracle.cost)
    }
}

pub fn prediction_error(instance: &Instance, opts: SolverOptions) -> Result<ErrorValue> {
    let o = optimal(instance.metric(), instance.profile(), opts)?;
    Ok(error_against(instance, &o, opts.tol))
}
