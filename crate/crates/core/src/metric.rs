//! Points, profiles and the maximum-cost objective.
//!
//! Two spaces are supported: the real line and the plane under an l_p norm
//! with finite `p >= 1`. The line is its own kind rather than a plane with a
//! pinned second coordinate, so interval checks on the line stay exact.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{FacError, Result};

/// Absolute tolerance used for equality checks throughout the crate.
pub const EPS: f64 = 1e-9;

/// Tolerance on the total weight of an [`Outcome`].
pub const WEIGHT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMetric", into = "RawMetric")]
pub enum MetricSpec {
    Line,
    /// Plane with distance `(|da|^p + |db|^p)^(1/p)`.
    Plane {
        p: f64,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum RawMetric {
    Line,
    L2p { p: f64 },
}

impl TryFrom<RawMetric> for MetricSpec {
    type Error = FacError;

    fn try_from(raw: RawMetric) -> Result<Self> {
        match raw {
            RawMetric::Line => Ok(MetricSpec::Line),
            RawMetric::L2p { p } => MetricSpec::plane(p),
        }
    }
}

impl From<MetricSpec> for RawMetric {
    fn from(m: MetricSpec) -> Self {
        match m {
            MetricSpec::Line => RawMetric::Line,
            MetricSpec::Plane { p } => RawMetric::L2p { p },
        }
    }
}

impl MetricSpec {
    /// Plane metric with exponent `p`; rejects `p < 1`, infinity and NaN.
    pub fn plane(p: f64) -> Result<Self> {
        if !p.is_finite() || p < 1.0 {
            return Err(FacError::input(format!(
                "l_p exponent must be finite and >= 1, got {p}"
            )));
        }
        Ok(MetricSpec::Plane { p })
    }

    pub fn dim(&self) -> usize {
        match self {
            MetricSpec::Line => 1,
            MetricSpec::Plane { .. } => 2,
        }
    }

    pub fn p(&self) -> Option<f64> {
        match self {
            MetricSpec::Line => None,
            MetricSpec::Plane { p } => Some(*p),
        }
    }

    pub fn is_line(&self) -> bool {
        matches!(self, MetricSpec::Line)
    }

    /// Diameter of a unit coordinate cell, `2^(1/p)` in the plane and 1 on the line.
    pub fn cell_diameter_factor(&self) -> f64 {
        match self {
            MetricSpec::Line => 1.0,
            MetricSpec::Plane { p } => 2f64.powf(1.0 / p),
        }
    }

    pub fn check(&self, point: &Point) -> Result<()> {
        if point.dim() != self.dim() {
            return Err(FacError::DimensionMismatch {
                expected: self.dim(),
                got: point.dim(),
            });
        }
        Ok(())
    }

    /// Distance between two points of this space.
    pub fn distance(&self, a: &Point, b: &Point) -> Result<f64> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.dist(a, b))
    }

    /// Unchecked distance; callers guarantee both points match the metric.
    pub(crate) fn dist(&self, a: &Point, b: &Point) -> f64 {
        match (self, a, b) {
            (MetricSpec::Line, Point::Line(x), Point::Line(y)) => (x - y).abs(),
            (MetricSpec::Plane { p }, Point::Plane(u), Point::Plane(v)) => {
                lp_norm(u[0] - v[0], u[1] - v[1], *p)
            }
            _ => f64::NAN,
        }
    }
}

impl fmt::Display for MetricSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricSpec::Line => write!(f, "line"),
            MetricSpec::Plane { p } => write!(f, "l2p(p={p})"),
        }
    }
}

/// `(|da|^p + |db|^p)^(1/p)`, scaled by the larger component to avoid overflow.
pub fn lp_norm(da: f64, db: f64, p: f64) -> f64 {
    let (da, db) = (da.abs(), db.abs());
    if p == 1.0 {
        return da + db;
    }
    if p == 2.0 {
        return (da * da + db * db).sqrt();
    }
    let m = da.max(db);
    if m == 0.0 {
        return 0.0;
    }
    let (s, t) = (da / m, db / m);
    m * (s.powf(p) + t.powf(p)).powf(1.0 / p)
}

/// A location on the line or in the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Point {
    Line(f64),
    Plane([f64; 2]),
}

impl Point {
    pub fn dim(&self) -> usize {
        match self {
            Point::Line(_) => 1,
            Point::Plane(_) => 2,
        }
    }

    pub fn coords(&self) -> &[f64] {
        match self {
            Point::Line(x) => std::slice::from_ref(x),
            Point::Plane(c) => c,
        }
    }

    pub fn coord(&self, k: usize) -> f64 {
        self.coords()[k]
    }

    /// Builds a point from a coordinate slice of length 1 or 2.
    pub fn from_coords(c: &[f64]) -> Result<Self> {
        if c.iter().any(|v| !v.is_finite()) {
            return Err(FacError::input("coordinates must be finite"));
        }
        match c {
            [x] => Ok(Point::Line(*x)),
            [a, b] => Ok(Point::Plane([*a, *b])),
            _ => Err(FacError::input(format!(
                "points have 1 or 2 coordinates, got {}",
                c.len()
            ))),
        }
    }

    /// Same-kind point with every coordinate replaced by `f(k, coord)`.
    pub fn map(&self, f: impl Fn(usize, f64) -> f64) -> Point {
        match self {
            Point::Line(x) => Point::Line(f(0, *x)),
            Point::Plane(c) => Point::Plane([f(0, c[0]), f(1, c[1])]),
        }
    }

    pub fn approx_eq(&self, other: &Point, tol: f64) -> bool {
        self.dim() == other.dim()
            && self
                .coords()
                .iter()
                .zip(other.coords())
                .all(|(a, b)| (a - b).abs() <= tol)
    }

    /// Lexicographic total order on coordinates.
    pub fn total_cmp(&self, other: &Point) -> Ordering {
        self.dim().cmp(&other.dim()).then_with(|| {
            self.coords()
                .iter()
                .zip(other.coords())
                .map(|(a, b)| a.total_cmp(b))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Point::Line(x) => write!(f, "{x}"),
            Point::Plane([a, b]) => write!(f, "({a}, {b})"),
        }
    }
}

impl Serialize for Point {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.coords().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let c = Vec::<f64>::deserialize(d)?;
        Point::from_coords(&c).map_err(serde::de::Error::custom)
    }
}

/// Reported agent locations. Order is agent identity and is never changed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point>", into = "Vec<Point>")]
pub struct Profile {
    points: Vec<Point>,
}

impl TryFrom<Vec<Point>> for Profile {
    type Error = FacError;

    fn try_from(points: Vec<Point>) -> Result<Self> {
        Profile::new(points)
    }
}

impl From<Profile> for Vec<Point> {
    fn from(p: Profile) -> Self {
        p.points
    }
}

impl Profile {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        let first = points.first().ok_or(FacError::EmptyProfile)?;
        let dim = first.dim();
        if let Some(bad) = points.iter().find(|q| q.dim() != dim) {
            return Err(FacError::DimensionMismatch {
                expected: dim,
                got: bad.dim(),
            });
        }
        Ok(Profile { points })
    }

    pub fn line(xs: &[f64]) -> Result<Self> {
        Profile::new(xs.iter().map(|&x| Point::Line(x)).collect())
    }

    pub fn plane(xs: &[[f64; 2]]) -> Result<Self> {
        Profile::new(xs.iter().map(|&c| Point::Plane(c)).collect())
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    /// Line locations in nondecreasing order; agent order is left untouched.
    pub fn sorted_line(&self) -> Vec<f64> {
        let mut xs: Vec<f64> = self.points.iter().map(|q| q.coord(0)).collect();
        xs.sort_by(f64::total_cmp);
        xs
    }

    /// Per-coordinate `(min, max)` of the profile.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        coord_bounds(&self.points)
    }

    /// True when all agents report the same location.
    pub fn is_coincident(&self) -> bool {
        let first = self.points[0];
        self.points.iter().all(|q| *q == first)
    }
}

pub(crate) fn coord_bounds(points: &[Point]) -> Vec<(f64, f64)> {
    let dim = points[0].dim();
    (0..dim)
        .map(|k| {
            points
                .iter()
                .map(|q| q.coord(k))
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    (lo.min(v), hi.max(v))
                })
        })
        .collect()
}

/// A profile together with a prediction of the optimal facility location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInstance", into = "RawInstance")]
pub struct Instance {
    metric: MetricSpec,
    profile: Profile,
    prediction: Point,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInstance {
    metric: MetricSpec,
    agents: Profile,
    prediction: Point,
}

impl TryFrom<RawInstance> for Instance {
    type Error = FacError;

    fn try_from(raw: RawInstance) -> Result<Self> {
        Instance::new(raw.metric, raw.agents, raw.prediction)
    }
}

impl From<Instance> for RawInstance {
    fn from(i: Instance) -> Self {
        RawInstance {
            metric: i.metric,
            agents: i.profile,
            prediction: i.prediction,
        }
    }
}

impl Instance {
    pub fn new(metric: MetricSpec, profile: Profile, prediction: Point) -> Result<Self> {
        metric.check(&profile.points[0])?;
        metric.check(&prediction)?;
        Ok(Instance {
            metric,
            profile,
            prediction,
        })
    }

    pub fn line(xs: &[f64], prediction: f64) -> Result<Self> {
        Instance::new(
            MetricSpec::Line,
            Profile::line(xs)?,
            Point::Line(prediction),
        )
    }

    pub fn plane(p: f64, xs: &[[f64; 2]], prediction: [f64; 2]) -> Result<Self> {
        Instance::new(
            MetricSpec::plane(p)?,
            Profile::plane(xs)?,
            Point::Plane(prediction),
        )
    }

    pub fn metric(&self) -> &MetricSpec {
        &self.metric
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn prediction(&self) -> &Point {
        &self.prediction
    }

    pub fn with_prediction(&self, prediction: Point) -> Result<Self> {
        Instance::new(self.metric, self.profile.clone(), prediction)
    }

    /// Canonical JSON encoding: compact, fixed key order, trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("instance serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Finite probability distribution over facility locations.
///
/// Support points are kept sorted and pairwise distinct; inserting the same
/// point twice merges its weight.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    support: Vec<(Point, f64)>,
}

impl Outcome {
    pub fn point(y: Point) -> Self {
        Outcome {
            support: vec![(y, 1.0)],
        }
    }

    /// Builds a distribution, dropping zero weights and merging duplicates.
    pub fn from_weighted(items: impl IntoIterator<Item = (Point, f64)>) -> Result<Self> {
        let mut support: Vec<(Point, f64)> = Vec::with_capacity(4);
        for (y, w) in items {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(FacError::input(format!("invalid probability weight {w}")));
            }
            if w == 0.0 {
                continue;
            }
            match support.iter_mut().find(|(z, _)| *z == y) {
                Some((_, acc)) => *acc += w,
                None => support.push((y, w)),
            }
        }
        if support.is_empty() {
            return Err(FacError::input("outcome has empty support"));
        }
        if let Some((a, _)) = support.first() {
            if support.iter().any(|(b, _)| b.dim() != a.dim()) {
                return Err(FacError::input("outcome mixes point dimensions"));
            }
        }
        let total: f64 = support.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > WEIGHT_EPS {
            return Err(FacError::input(format!(
                "outcome weights sum to {total}, expected 1"
            )));
        }
        support.sort_by(|(a, _), (b, _)| a.total_cmp(b));
        Ok(Outcome { support })
    }

    /// Mixture `sum_k w_k * outcome_k`.
    pub fn mix(parts: &[(f64, &Outcome)]) -> Result<Self> {
        Outcome::from_weighted(
            parts
                .iter()
                .flat_map(|(w, o)| o.support.iter().map(move |(y, v)| (*y, w * v))),
        )
    }

    pub fn support(&self) -> &[(Point, f64)] {
        &self.support
    }

    pub fn is_deterministic(&self) -> bool {
        self.support.len() == 1
    }

    /// The single support point of a deterministic outcome.
    pub fn as_point(&self) -> Option<Point> {
        self.is_deterministic().then(|| self.support[0].0)
    }

    pub fn weight_of(&self, y: &Point) -> f64 {
        self.support
            .iter()
            .find(|(z, _)| z == y)
            .map_or(0.0, |(_, w)| *w)
    }

    /// Expected distance from `x` to the facility.
    pub fn expected_distance(&self, metric: &MetricSpec, x: &Point) -> f64 {
        self.support
            .iter()
            .map(|(y, w)| w * metric.dist(x, y))
            .sum()
    }

    pub fn approx_eq(&self, other: &Outcome, tol: f64) -> bool {
        self.support.len() == other.support.len()
            && self
                .support
                .iter()
                .zip(&other.support)
                .all(|((a, v), (b, w))| a.approx_eq(b, tol) && (v - w).abs() <= tol)
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, (y, w)) in self.support.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{y}: {w}")?;
        }
        write!(f, "}}")
    }
}

/// How a randomized outcome's cost is aggregated over agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObjectiveMode {
    /// `E_y[max_i d(x_i, y)]`.
    ExpectedMax,
    /// `max_i E_y[d(x_i, y)]`.
    MaxOfExpected,
}

impl std::str::FromStr for ObjectiveMode {
    type Err = FacError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ExpectedMax" | "expected-max" => Ok(ObjectiveMode::ExpectedMax),
            "MaxOfExpected" | "max-of-expected" => Ok(ObjectiveMode::MaxOfExpected),
            _ => Err(FacError::input(format!("unknown objective mode {s:?}"))),
        }
    }
}

impl fmt::Display for ObjectiveMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObjectiveMode::ExpectedMax => write!(f, "ExpectedMax"),
            ObjectiveMode::MaxOfExpected => write!(f, "MaxOfExpected"),
        }
    }
}

/// Maximum distance from any agent to `y`.
pub fn max_cost(metric: &MetricSpec, profile: &Profile, y: &Point) -> Result<f64> {
    metric.check(y)?;
    metric.check(&profile.points[0])?;
    Ok(max_cost_points(metric, profile.points(), y))
}

pub(crate) fn max_cost_points(metric: &MetricSpec, points: &[Point], y: &Point) -> f64 {
    points.iter().map(|x| metric.dist(x, y)).fold(0.0, f64::max)
}

pub fn expected_objective(
    metric: &MetricSpec,
    profile: &Profile,
    outcome: &Outcome,
    mode: ObjectiveMode,
) -> Result<f64> {
    metric.check(&profile.points[0])?;
    metric.check(&outcome.support[0].0)?;
    Ok(objective_points(metric, profile.points(), outcome, mode))
}

pub(crate) fn objective_points(
    metric: &MetricSpec,
    points: &[Point],
    outcome: &Outcome,
    mode: ObjectiveMode,
) -> f64 {
    match mode {
        ObjectiveMode::ExpectedMax => outcome
            .support
            .iter()
            .map(|(y, w)| w * max_cost_points(metric, points, y))
            .sum(),
        ObjectiveMode::MaxOfExpected => points
            .iter()
            .map(|x| outcome.expected_distance(metric, x))
            .fold(0.0, f64::max),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn l(x: f64) -> Point {
        Point::Line(x)
    }

    fn pl(a: f64, b: f64) -> Point {
        Point::Plane([a, b])
    }

    #[test]
    fn distance_examples() {
        assert_eq!(MetricSpec::Line.distance(&l(0.0), &l(2.0)).unwrap(), 2.0);
        let m2 = MetricSpec::plane(2.0).unwrap();
        assert_eq!(m2.distance(&pl(0.0, 0.0), &pl(3.0, 4.0)).unwrap(), 5.0);
        let m3 = MetricSpec::plane(3.0).unwrap();
        let d = m3.distance(&pl(0.0, 0.0), &pl(1.0, 1.0)).unwrap();
        assert!((d - 2f64.powf(1.0 / 3.0)).abs() < 1e-15);
        assert!((d - 1.259921).abs() < 1e-6);
    }

    #[test]
    fn distance_rejects_dimension_mismatch() {
        let err = MetricSpec::Line
            .distance(&l(0.0), &pl(1.0, 1.0))
            .unwrap_err();
        assert!(matches!(err, FacError::DimensionMismatch { .. }));
    }

    #[test]
    fn plane_rejects_bad_exponents() {
        assert!(MetricSpec::plane(0.5).is_err());
        assert!(MetricSpec::plane(f64::INFINITY).is_err());
        assert!(MetricSpec::plane(f64::NAN).is_err());
        assert!(MetricSpec::plane(1.0).is_ok());
    }

    #[test]
    fn max_cost_examples() {
        let prof = Profile::line(&[0.0, 2.0]).unwrap();
        assert_eq!(max_cost(&MetricSpec::Line, &prof, &l(1.0)).unwrap(), 1.0);
        assert_eq!(max_cost(&MetricSpec::Line, &prof, &l(2.0)).unwrap(), 2.0);
        let tri = Profile::plane(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        let m2 = MetricSpec::plane(2.0).unwrap();
        assert_eq!(max_cost(&m2, &tri, &pl(0.0, 0.0)).unwrap(), 1.0);
    }

    #[test]
    fn empty_profile_is_an_error() {
        assert!(matches!(Profile::line(&[]), Err(FacError::EmptyProfile)));
    }

    #[test]
    fn expected_objective_examples() {
        let prof = Profile::line(&[0.0, 2.0]).unwrap();
        let out = Outcome::from_weighted([(l(0.0), 0.25), (l(2.0), 0.25), (l(1.0), 0.5)]).unwrap();
        let em =
            expected_objective(&MetricSpec::Line, &prof, &out, ObjectiveMode::ExpectedMax).unwrap();
        let me = expected_objective(&MetricSpec::Line, &prof, &out, ObjectiveMode::MaxOfExpected)
            .unwrap();
        assert_eq!(em, 1.5);
        assert_eq!(me, 1.0);

        let single = Outcome::point(l(0.5));
        for mode in [ObjectiveMode::ExpectedMax, ObjectiveMode::MaxOfExpected] {
            let v = expected_objective(&MetricSpec::Line, &prof, &single, mode).unwrap();
            assert_eq!(v, max_cost(&MetricSpec::Line, &prof, &l(0.5)).unwrap());
        }
    }

    #[test]
    fn outcome_merges_duplicates_and_drops_zero_weights() {
        let o = Outcome::from_weighted([(l(2.0), 0.5), (l(0.0), 0.0), (l(2.0), 0.5)]).unwrap();
        assert_eq!(o.support(), &[(l(2.0), 1.0)]);
        assert!(Outcome::from_weighted([(l(1.0), 0.4)]).is_err());
        assert!(Outcome::from_weighted([(l(1.0), -0.5), (l(2.0), 1.5)]).is_err());
        assert!(Outcome::from_weighted(Vec::new()).is_err());
    }

    #[test]
    fn instance_json_round_trip() {
        let inst = Instance::plane(2.0, &[[0.0, 0.0], [2.0, 2.0]], [1.0, 3.0]).unwrap();
        let s = inst.to_json();
        assert_eq!(
            s,
            "{\"metric\":{\"kind\":\"l2p\",\"p\":2.0},\"agents\":[[0.0,0.0],[2.0,2.0]],\"prediction\":[1.0,3.0]}\n"
        );
        assert_eq!(Instance::from_json(&s).unwrap(), inst);
        let line = Instance::line(&[0.0, 2.0], 1.0).unwrap();
        assert_eq!(
            line.to_json(),
            "{\"metric\":{\"kind\":\"line\"},\"agents\":[[0.0],[2.0]],\"prediction\":[1.0]}\n"
        );
    }

    #[test]
    fn instance_rejects_mixed_spaces() {
        let bad = r#"{"metric":{"kind":"line"},"agents":[[0.0,1.0]],"prediction":[1.0,1.0]}"#;
        assert!(Instance::from_json(bad).is_err());
        let bad_p =
            r#"{"metric":{"kind":"l2p","p":0.5},"agents":[[0.0,1.0]],"prediction":[1.0,1.0]}"#;
        assert!(Instance::from_json(bad_p).is_err());
    }

    fn random_point(rng: &mut ChaCha8Rng, metric: &MetricSpec) -> Point {
        match metric {
            MetricSpec::Line => l(rng.gen_range(-10.0..10.0)),
            MetricSpec::Plane { .. } => pl(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)),
        }
    }

    #[test]
    fn distance_is_a_metric_on_random_triples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut metrics = vec![MetricSpec::Line];
        metrics.extend([1.0, 2.0, 3.0, 7.0].map(|p| MetricSpec::plane(p).unwrap()));
        for m in metrics {
            for _ in 0..10_000 {
                let (a, b, c) = (
                    random_point(&mut rng, &m),
                    random_point(&mut rng, &m),
                    random_point(&mut rng, &m),
                );
                let ab = m.dist(&a, &b);
                assert_eq!(ab, m.dist(&b, &a));
                assert_eq!(m.dist(&a, &a), 0.0);
                assert!(ab > 0.0);
                assert!(m.dist(&a, &c) <= ab + m.dist(&b, &c) + 1e-12);
            }
        }
    }

    #[test]
    fn max_cost_dominates_every_agent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = MetricSpec::plane(3.0).unwrap();
        for _ in 0..500 {
            let n = rng.gen_range(1..8);
            let pts: Vec<Point> = (0..n).map(|_| random_point(&mut rng, &m)).collect();
            let prof = Profile::new(pts.clone()).unwrap();
            let y = random_point(&mut rng, &m);
            let mc = max_cost(&m, &prof, &y).unwrap();
            assert!(pts.iter().all(|x| m.dist(x, &y) <= mc));
            assert!(pts.iter().any(|x| m.dist(x, &y) == mc));
        }
    }

    #[test]
    fn expected_max_dominates_max_of_expected() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for m in [MetricSpec::Line, MetricSpec::plane(2.0).unwrap()] {
            for _ in 0..500 {
                let n = rng.gen_range(1..6);
                let prof =
                    Profile::new((0..n).map(|_| random_point(&mut rng, &m)).collect()).unwrap();
                let k = rng.gen_range(1..4);
                let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..1.0)).collect();
                let total: f64 = raw.iter().sum();
                let mut items: Vec<(Point, f64)> = raw
                    .iter()
                    .map(|w| (random_point(&mut rng, &m), w / total))
                    .collect();
                // absorb rounding into the last weight
                let head: f64 = items[..k - 1].iter().map(|(_, w)| w).sum();
                items[k - 1].1 = 1.0 - head;
                let out = Outcome::from_weighted(items).unwrap();
                let em = expected_objective(&m, &prof, &out, ObjectiveMode::ExpectedMax).unwrap();
                let me = expected_objective(&m, &prof, &out, ObjectiveMode::MaxOfExpected).unwrap();
                assert!(em >= me - 1e-12);
            }
        }
    }
}
