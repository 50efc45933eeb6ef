//! Facility location mechanisms as pure maps from reports and a prediction
//! to a finite distribution over locations.
//!
//! Randomized mechanisms return the distribution itself, never a sample.
//! Every line mechanism checks for coincident extremes first, which is both
//! unanimity and the guard against dividing by `x_n - x_1 = 0`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{FacError, Result};
use crate::metric::{coord_bounds, Instance, MetricSpec, Outcome, Point, Profile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MechanismId {
    MinMaxP,
    Median,
    #[serde(rename = "LRM")]
    Lrm,
    MixedLine,
    RandLine1C2R,
    BoundingBox,
    CoordMedian,
    Mixed2D,
}

impl MechanismId {
    pub const ALL: [MechanismId; 8] = [
        MechanismId::MinMaxP,
        MechanismId::Median,
        MechanismId::Lrm,
        MechanismId::MixedLine,
        MechanismId::RandLine1C2R,
        MechanismId::BoundingBox,
        MechanismId::CoordMedian,
        MechanismId::Mixed2D,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MechanismId::MinMaxP => "MinMaxP",
            MechanismId::Median => "Median",
            MechanismId::Lrm => "LRM",
            MechanismId::MixedLine => "MixedLine",
            MechanismId::RandLine1C2R => "RandLine1C2R",
            MechanismId::BoundingBox => "BoundingBox",
            MechanismId::CoordMedian => "CoordMedian",
            MechanismId::Mixed2D => "Mixed2D",
        }
    }

    pub fn is_mixture(&self) -> bool {
        matches!(self, MechanismId::MixedLine | MechanismId::Mixed2D)
    }

    pub fn is_line(&self) -> bool {
        !matches!(
            self,
            MechanismId::BoundingBox | MechanismId::CoordMedian | MechanismId::Mixed2D
        )
    }

    pub fn uses_prediction(&self) -> bool {
        !matches!(
            self,
            MechanismId::Median | MechanismId::Lrm | MechanismId::CoordMedian
        )
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(
            self,
            MechanismId::MinMaxP
                | MechanismId::Median
                | MechanismId::BoundingBox
                | MechanismId::CoordMedian
        )
    }
}

impl fmt::Display for MechanismId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MechanismId {
    type Err = FacError;

    fn from_str(s: &str) -> Result<Self> {
        MechanismId::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| FacError::input(format!("unknown mechanism {s:?}")))
    }
}

/// A mechanism id plus its mixing probability when it is a mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec")]
pub struct MechanismSpec {
    pub id: MechanismId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    id: MechanismId,
    #[serde(default)]
    q: Option<f64>,
}

impl TryFrom<RawSpec> for MechanismSpec {
    type Error = FacError;

    fn try_from(raw: RawSpec) -> Result<Self> {
        MechanismSpec::new(raw.id, raw.q)
    }
}

impl MechanismSpec {
    pub fn new(id: MechanismId, q: Option<f64>) -> Result<Self> {
        match (id.is_mixture(), q) {
            (true, Some(q)) if (0.0..=1.0).contains(&q) => Ok(MechanismSpec { id, q: Some(q) }),
            (true, Some(q)) => Err(FacError::input(format!("q must lie in [0, 1], got {q}"))),
            (true, None) => Err(FacError::input(format!(
                "{id} needs a mixing probability q"
            ))),
            (false, Some(_)) => Err(FacError::input(format!("{id} takes no q"))),
            (false, None) => Ok(MechanismSpec { id, q: None }),
        }
    }

    pub fn simple(id: MechanismId) -> Self {
        MechanismSpec::new(id, None).expect("non-mixture id")
    }

    pub fn mixed(id: MechanismId, q: f64) -> Result<Self> {
        MechanismSpec::new(id, Some(q))
    }

    pub fn check_metric(&self, metric: &MetricSpec) -> Result<()> {
        if self.id.is_line() != metric.is_line() {
            return Err(FacError::input(format!(
                "{} is not defined on the {} metric",
                self.id, metric
            )));
        }
        Ok(())
    }
}

impl fmt::Display for MechanismSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.q {
            Some(q) => write!(f, "{}(q={q})", self.id),
            None => write!(f, "{}", self.id),
        }
    }
}

/// Anything the auditor and analysis code can evaluate.
pub trait Mechanism: Sync {
    fn name(&self) -> String;

    /// Outcome on raw reports; `reports` is non-empty and matches `metric`.
    fn evaluate(
        &self,
        metric: &MetricSpec,
        reports: &[Point],
        prediction: &Point,
    ) -> Result<Outcome>;

    fn is_deterministic(&self) -> bool;

    fn outcome(&self, instance: &Instance) -> Result<Outcome> {
        self.evaluate(
            instance.metric(),
            instance.profile().points(),
            instance.prediction(),
        )
    }
}

impl Mechanism for MechanismSpec {
    fn name(&self) -> String {
        self.to_string()
    }

    fn evaluate(
        &self,
        metric: &MetricSpec,
        reports: &[Point],
        prediction: &Point,
    ) -> Result<Outcome> {
        self.check_metric(metric)?;
        let q = self.q.unwrap_or(0.0);
        match self.id {
            MechanismId::MinMaxP => Ok(minmaxp_points(reports, prediction)),
            MechanismId::Median => Ok(median_points(reports)),
            MechanismId::Lrm => lrm_points(reports),
            MechanismId::MixedLine => mixed_line_points(reports, prediction, q),
            MechanismId::RandLine1C2R => rand_line_1c2r_points(reports, prediction),
            MechanismId::BoundingBox => Ok(bounding_box_points(reports, prediction)),
            MechanismId::CoordMedian => Ok(coord_median_points(reports)),
            MechanismId::Mixed2D => mixed_2d_points(reports, prediction, q),
        }
    }

    fn is_deterministic(&self) -> bool {
        self.id.is_deterministic()
    }
}

/// Dispatches `spec` on `instance`.
pub fn run(spec: &MechanismSpec, instance: &Instance) -> Result<Outcome> {
    spec.outcome(instance)
}

/// Negative control: places the facility at the mean report. Not
/// strategyproof, so an incentive audit must flag it.
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanOfReports;

impl Mechanism for MeanOfReports {
    fn name(&self) -> String {
        "MeanOfReports".into()
    }

    fn evaluate(
        &self,
        _metric: &MetricSpec,
        reports: &[Point],
        _prediction: &Point,
    ) -> Result<Outcome> {
        let n = reports.len() as f64;
        let first = reports[0];
        Ok(Outcome::point(first.map(|k, _| {
            reports.iter().map(|q| q.coord(k)).sum::<f64>() / n
        })))
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}

fn extremes(reports: &[Point]) -> (f64, f64) {
    coord_bounds(reports)[0]
}

fn clamp(v: f64, lo: f64, hi: f64) -> f64 {
    lo.max(hi.min(v))
}

/// `ceil(n/2)`-th smallest value.
fn left_median(mut vals: Vec<f64>) -> f64 {
    let k = vals.len().div_ceil(2) - 1;
    let (_, m, _) = vals.select_nth_unstable_by(k, f64::total_cmp);
    *m
}

fn minmaxp_points(reports: &[Point], prediction: &Point) -> Outcome {
    let (lo, hi) = extremes(reports);
    Outcome::point(Point::Line(clamp(prediction.coord(0), lo, hi)))
}

fn median_points(reports: &[Point]) -> Outcome {
    Outcome::point(Point::Line(left_median(
        reports.iter().map(|q| q.coord(0)).collect(),
    )))
}

fn lrm_points(reports: &[Point]) -> Result<Outcome> {
    let (lo, hi) = extremes(reports);
    if lo == hi {
        return Ok(Outcome::point(Point::Line(lo)));
    }
    Outcome::from_weighted([
        (Point::Line(lo), 0.25),
        (Point::Line(hi), 0.25),
        (Point::Line((lo + hi) / 2.0), 0.5),
    ])
}

fn rand_line_1c2r_points(reports: &[Point], prediction: &Point) -> Result<Outcome> {
    let (lo, hi) = extremes(reports);
    if lo == hi {
        return Ok(Outcome::point(Point::Line(lo)));
    }
    let pi = prediction.coord(0);
    let span = hi - lo;
    // (near extreme, far extreme, normalized overshoot)
    let (near, far, t) = if pi < lo {
        (lo, hi, (lo - pi) / span)
    } else if pi > hi {
        (hi, lo, (pi - hi) / span)
    } else {
        return Ok(Outcome::point(Point::Line(pi)));
    };
    Outcome::from_weighted([
        (Point::Line(near), (1.0 - t).max(0.5)),
        (Point::Line(far), t.min(0.5)),
    ])
}

fn mixed_line_points(reports: &[Point], prediction: &Point, q: f64) -> Result<Outcome> {
    let det = minmaxp_points(reports, prediction);
    let rnd = lrm_points(reports)?;
    Outcome::mix(&[(1.0 - q, &det), (q, &rnd)])
}

fn bounding_box_points(reports: &[Point], prediction: &Point) -> Outcome {
    let b = coord_bounds(reports);
    Outcome::point(prediction.map(|k, v| clamp(v, b[k].0, b[k].1)))
}

fn coord_median_points(reports: &[Point]) -> Outcome {
    Outcome::point(reports[0].map(|k, _| left_median(reports.iter().map(|q| q.coord(k)).collect())))
}

fn mixed_2d_points(reports: &[Point], prediction: &Point, q: f64) -> Result<Outcome> {
    let bb = bounding_box_points(reports, prediction);
    let cm = coord_median_points(reports);
    Outcome::mix(&[(1.0 - q, &bb), (q, &cm)])
}

fn require(metric: MetricSpec, profile: &Profile) -> Result<()> {
    metric.check(&profile.points()[0])
}

/// `pi` clamped into `[x_1, x_n]`.
pub fn minmaxp(profile: &Profile, prediction: f64) -> Result<Outcome> {
    require(MetricSpec::Line, profile)?;
    Ok(minmaxp_points(profile.points(), &Point::Line(prediction)))
}

/// Left median (the `ceil(n/2)`-th order statistic).
pub fn median_line(profile: &Profile) -> Result<Outcome> {
    require(MetricSpec::Line, profile)?;
    Ok(median_points(profile.points()))
}

/// `x_1`, `x_n`, midpoint with probabilities 1/4, 1/4, 1/2.
pub fn lrm(profile: &Profile) -> Result<Outcome> {
    require(MetricSpec::Line, profile)?;
    lrm_points(profile.points())
}

/// Returns `pi` when it lies between the extremes; otherwise randomizes
/// between the near and far extreme with the far weight `min(1/2, t)`,
/// `t` being the overshoot divided by `x_n - x_1`.
pub fn rand_line_1c2r(profile: &Profile, prediction: f64) -> Result<Outcome> {
    require(MetricSpec::Line, profile)?;
    rand_line_1c2r_points(profile.points(), &Point::Line(prediction))
}

pub fn mixed_line(profile: &Profile, prediction: f64, q: f64) -> Result<Outcome> {
    require(MetricSpec::Line, profile)?;
    MechanismSpec::mixed(MechanismId::MixedLine, q)?;
    mixed_line_points(profile.points(), &Point::Line(prediction), q)
}

/// `pi` clamped coordinate-wise into the agents' bounding box.
pub fn bounding_box(profile: &Profile, prediction: [f64; 2]) -> Result<Outcome> {
    if profile.dim() != 2 {
        return Err(FacError::DimensionMismatch {
            expected: 2,
            got: profile.dim(),
        });
    }
    Ok(bounding_box_points(
        profile.points(),
        &Point::Plane(prediction),
    ))
}

pub fn coord_median(profile: &Profile) -> Result<Outcome> {
    if profile.dim() != 2 {
        return Err(FacError::DimensionMismatch {
            expected: 2,
            got: profile.dim(),
        });
    }
    Ok(coord_median_points(profile.points()))
}

pub fn mixed_2d(profile: &Profile, prediction: [f64; 2], q: f64) -> Result<Outcome> {
    if profile.dim() != 2 {
        return Err(FacError::DimensionMismatch {
            expected: 2,
            got: profile.dim(),
        });
    }
    MechanismSpec::mixed(MechanismId::Mixed2D, q)?;
    mixed_2d_points(profile.points(), &Point::Plane(prediction), q)
}
