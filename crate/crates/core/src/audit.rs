//! Incentive and structural audits by exhaustive search over a misreport grid.
//!
//! Costs are per-agent expected distances. A member strictly gains when its
//! cost drops by more than [`EPS`]; "no worse" means it rises by at most `EPS`.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{FacError, Result};
use crate::mechanism::Mechanism;
use crate::metric::{Instance, MetricSpec, Outcome, Point, EPS};
use crate::oracle::{diameter, optimal, SolverOptions};

pub const DEFAULT_DIVISIONS: u32 = 40;
pub const DEFAULT_COARSE_DIVISIONS: u32 = 8;
pub const DEFAULT_CELL_CAP: u64 = 10_000_000;
pub const DEFAULT_MAX_WITNESSES: usize = 32;

const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Property {
    SP,
    GSP,
    SGSP,
    Uncompromising,
    Unanimity,
    Range,
}

impl FromStr for Property {
    type Err = FacError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sp" => Ok(Property::SP),
            "gsp" => Ok(Property::GSP),
            "sgsp" => Ok(Property::SGSP),
            "uncompromising" => Ok(Property::Uncompromising),
            "unanimity" => Ok(Property::Unanimity),
            "range" => Ok(Property::Range),
            _ => Err(FacError::input(format!("unknown property {s:?}"))),
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// A coalition's joint misreport and what each member gains from it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Deviation {
    pub coalition: Vec<usize>,
    pub misreports: Vec<Point>,
    /// Per member: truthful cost minus cost after the deviation.
    pub cost_deltas: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// Search settings. `step` overrides the default `diameter / divisions`.
#[derive(Debug, Clone, Copy)]
pub struct AuditGrid {
    pub step: Option<f64>,
    pub divisions: u32,
    /// Grid resolution for coalitions of two or more agents.
    pub coarse_divisions: u32,
    pub cell_cap: u64,
    pub max_witnesses: usize,
    pub solver: SolverOptions,
}

impl Default for AuditGrid {
    fn default() -> Self {
        AuditGrid {
            step: None,
            divisions: DEFAULT_DIVISIONS,
            coarse_divisions: DEFAULT_COARSE_DIVISIONS,
            cell_cap: DEFAULT_CELL_CAP,
            max_witnesses: DEFAULT_MAX_WITNESSES,
            solver: SolverOptions::default(),
        }
    }
}

impl AuditGrid {
    pub fn with_step(step: f64) -> Self {
        AuditGrid {
            step: Some(step),
            ..AuditGrid::default()
        }
    }
}

/// The grid actually searched, as recorded in a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    pub step: f64,
    pub coarse_step: f64,
    pub region: Vec<(f64, f64)>,
    pub special_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub property: Property,
    pub mechanism: String,
    /// The first `max_witnesses` violations in search order.
    pub violations: Vec<Deviation>,
    pub violation_count: u64,
    pub cells_searched: u64,
    /// False when the cell cap cut the search short.
    pub complete: bool,
    pub grid: GridSpec,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.violation_count == 0
    }
}

/// Candidate misreports around an instance.
struct Candidates {
    full: Vec<Point>,
    coarse: Vec<Point>,
    spec: GridSpec,
}

fn axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let cells = ((hi - lo) / step).round().max(1.0) as usize;
    (0..=cells)
        .map(|k| lo + (hi - lo) * k as f64 / cells as f64)
        .collect()
}

fn merge_sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn product(metric: &MetricSpec, axes: &[Vec<f64>]) -> Vec<Point> {
    match metric {
        MetricSpec::Line => axes[0].iter().map(|&x| Point::Line(x)).collect(),
        MetricSpec::Plane { .. } => axes[0]
            .iter()
            .flat_map(|&a| axes[1].iter().map(move |&b| Point::Plane([a, b])))
            .collect(),
    }
}

fn candidates(instance: &Instance, grid: &AuditGrid) -> Result<Candidates> {
    let metric = instance.metric();
    let pts = instance.profile().points();
    let pi = instance.prediction();
    let mut diam = diameter(metric, pts);
    if diam <= 0.0 {
        diam = metric.dist(&pts[0], pi).max(1.0);
    }
    let step = grid.step.unwrap_or(diam / grid.divisions.max(1) as f64);
    if !(step > 0.0) {
        return Err(FacError::input("audit grid step must be positive"));
    }
    let coarse_step = diam / grid.coarse_divisions.max(1) as f64;
    let o = optimal(metric, instance.profile(), grid.solver)?.location;
    let mut specials: Vec<Point> = pts.to_vec();
    specials.push(*pi);
    specials.push(o);
    let region: Vec<(f64, f64)> = instance
        .profile()
        .bounds()
        .into_iter()
        .map(|(lo, hi)| (lo - diam, hi + diam))
        .collect();
    let mk = |s: f64| -> Vec<Vec<f64>> {
        region
            .iter()
            .enumerate()
            .map(|(k, &(lo, hi))| {
                let mut v = axis(lo, hi, s);
                v.extend(specials.iter().map(|q| q.coord(k)));
                merge_sorted(v)
            })
            .collect()
    };
    let full = product(metric, &mk(step));
    let coarse = product(metric, &mk(coarse_step));
    Ok(Candidates {
        full,
        coarse,
        spec: GridSpec {
            step,
            coarse_step,
            region,
            special_points: specials.len(),
        },
    })
}

fn agent_costs(metric: &MetricSpec, truth: &[Point], out: &Outcome) -> Vec<f64> {
    truth
        .iter()
        .map(|x| out.expected_distance(metric, x))
        .collect()
}

/// Recomputes a deviation's cost deltas from scratch.
pub fn replay(mech: &dyn Mechanism, instance: &Instance, dev: &Deviation) -> Result<Vec<f64>> {
    let metric = instance.metric();
    let truth = instance.profile().points();
    if dev.coalition.is_empty() || dev.coalition.len() != dev.misreports.len() {
        return Err(FacError::input(
            "deviation needs one misreport per coalition member",
        ));
    }
    let mut reports = truth.to_vec();
    for (&i, m) in dev.coalition.iter().zip(&dev.misreports) {
        metric.check(m)?;
        *reports
            .get_mut(i)
            .ok_or_else(|| FacError::input(format!("agent {i} out of range")))? = *m;
    }
    let before = mech.outcome(instance)?;
    let after = mech.evaluate(metric, &reports, instance.prediction())?;
    Ok(dev
        .coalition
        .iter()
        .map(|&i| {
            before.expected_distance(metric, &truth[i]) - after.expected_distance(metric, &truth[i])
        })
        .collect())
}

#[derive(Clone, Copy)]
enum Rule {
    /// Every member strictly gains.
    AllGain,
    /// Someone strictly gains and nobody strictly loses.
    SomeGainNoneLose,
}

impl Rule {
    fn violated(self, deltas: &[f64]) -> bool {
        match self {
            Rule::AllGain => deltas.iter().all(|&d| d > EPS),
            Rule::SomeGainNoneLose => {
                deltas.iter().all(|&d| d >= -EPS) && deltas.iter().any(|&d| d > EPS)
            }
        }
    }
}

struct Tally {
    violations: Vec<Deviation>,
    count: u64,
    cells: u64,
    max_witnesses: usize,
}

impl Tally {
    fn new(max_witnesses: usize) -> Self {
        Tally {
            violations: Vec::new(),
            count: 0,
            cells: 0,
            max_witnesses,
        }
    }

    fn push(&mut self, d: Deviation) {
        self.count += 1;
        if self.violations.len() < self.max_witnesses {
            self.violations.push(d);
        }
    }
}

/// Enumerates every joint misreport of `coalition` drawn from `cands`.
fn search_coalition(
    mech: &dyn Mechanism,
    instance: &Instance,
    truthful: &[f64],
    coalition: &[usize],
    cands: &[Point],
    rule: Rule,
    tally: &mut Tally,
) -> Result<()> {
    let metric = instance.metric();
    let truth = instance.profile().points();
    let pi = instance.prediction();
    let m = cands.len();
    let k = coalition.len();
    let total = (m as u64).pow(k as u32) as usize;
    let mut start = 0;
    while start < total {
        let end = (start + CHUNK).min(total);
        let found: Vec<Deviation> = (start..end)
            .into_par_iter()
            .map_init(
                || truth.to_vec(),
                |reports, idx| -> Result<Option<Deviation>> {
                    let mut rest = idx;
                    let mut mis = Vec::with_capacity(k);
                    for &i in coalition.iter().rev() {
                        let c = cands[rest % m];
                        rest /= m;
                        reports[i] = c;
                        mis.push(c);
                    }
                    mis.reverse();
                    let out = mech.evaluate(metric, reports, pi)?;
                    let deltas: Vec<f64> = coalition
                        .iter()
                        .map(|&i| truthful[i] - out.expected_distance(metric, &truth[i]))
                        .collect();
                    for &i in coalition {
                        reports[i] = truth[i];
                    }
                    Ok(rule.violated(&deltas).then(|| Deviation {
                        coalition: coalition.to_vec(),
                        misreports: mis,
                        cost_deltas: deltas,
                        detail: None,
                    }))
                },
            )
            .filter_map(|r| r.transpose())
            .collect::<Result<_>>()?;
        for d in found {
            tally.push(d);
        }
        tally.cells += (end - start) as u64;
        start = end;
    }
    Ok(())
}

fn coalitions_of(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

fn finish(
    property: Property,
    mech: &dyn Mechanism,
    tally: Tally,
    complete: bool,
    grid: GridSpec,
) -> AuditReport {
    AuditReport {
        property,
        mechanism: mech.name(),
        violations: tally.violations,
        violation_count: tally.count,
        cells_searched: tally.cells,
        complete,
        grid,
    }
}

/// Single-agent misreports over the full grid.
pub fn audit_sp(
    mech: &dyn Mechanism,
    instance: &Instance,
    grid: &AuditGrid,
) -> Result<AuditReport> {
    let c = candidates(instance, grid)?;
    let truth = instance.profile().points();
    let truthful = agent_costs(instance.metric(), truth, &mech.outcome(instance)?);
    let mut tally = Tally::new(grid.max_witnesses);
    for i in 0..truth.len() {
        search_coalition(
            mech,
            instance,
            &truthful,
            &[i],
            &c.full,
            Rule::AllGain,
            &mut tally,
        )?;
    }
    Ok(finish(Property::SP, mech, tally, true, c.spec))
}

fn audit_groups(
    property: Property,
    rule: Rule,
    mech: &dyn Mechanism,
    instance: &Instance,
    max_coalition: usize,
    grid: &AuditGrid,
) -> Result<AuditReport> {
    let n = instance.profile().len();
    if max_coalition == 0 || max_coalition > n {
        return Err(FacError::input(format!(
            "coalition size must lie in 1..={n}, got {max_coalition}"
        )));
    }
    let c = candidates(instance, grid)?;
    let truthful = agent_costs(
        instance.metric(),
        instance.profile().points(),
        &mech.outcome(instance)?,
    );
    let mut tally = Tally::new(grid.max_witnesses);
    let mut complete = true;
    'sizes: for k in 1..=max_coalition {
        let cands = if k == 1 { &c.full } else { &c.coarse };
        let cells = (cands.len() as u64).saturating_pow(k as u32);
        for coalition in coalitions_of(n, k) {
            if tally.cells.saturating_add(cells) > grid.cell_cap {
                complete = false;
                break 'sizes;
            }
            search_coalition(
                mech, instance, &truthful, &coalition, cands, rule, &mut tally,
            )?;
        }
    }
    Ok(finish(property, mech, tally, complete, c.spec))
}

/// Coalitions in which every member strictly gains.
pub fn audit_gsp(
    mech: &dyn Mechanism,
    instance: &Instance,
    max_coalition: usize,
    grid: &AuditGrid,
) -> Result<AuditReport> {
    audit_groups(
        Property::GSP,
        Rule::AllGain,
        mech,
        instance,
        max_coalition,
        grid,
    )
}

/// Coalitions in which someone strictly gains and nobody strictly loses.
pub fn audit_sgsp(
    mech: &dyn Mechanism,
    instance: &Instance,
    max_coalition: usize,
    grid: &AuditGrid,
) -> Result<AuditReport> {
    audit_groups(
        Property::SGSP,
        Rule::SomeGainNoneLose,
        mech,
        instance,
        max_coalition,
        grid,
    )
}

fn within_bounds(y: &Point, bounds: &[(f64, f64)]) -> bool {
    y.coords()
        .iter()
        .zip(bounds)
        .all(|(v, (lo, hi))| *v >= lo - EPS && *v <= hi + EPS)
}

/// Range, unanimity and (for deterministic line mechanisms) uncompromising
/// behavior; one report per property checked.
pub fn audit_structure(
    mech: &dyn Mechanism,
    instance: &Instance,
    grid: &AuditGrid,
) -> Result<Vec<AuditReport>> {
    let metric = instance.metric();
    let truth = instance.profile().points();
    let n = truth.len();
    let pi = instance.prediction();
    let c = candidates(instance, grid)?;
    let out = mech.outcome(instance)?;
    let truthful = agent_costs(metric, truth, &out);
    let everyone: Vec<usize> = (0..n).collect();
    let mut reports = Vec::new();

    // range
    let bounds = instance.profile().bounds();
    let mut tally = Tally::new(grid.max_witnesses);
    tally.cells = out.support().len() as u64;
    for (y, w) in out.support() {
        if !within_bounds(y, &bounds) {
            tally.push(Deviation {
                coalition: everyone.clone(),
                misreports: truth.to_vec(),
                cost_deltas: vec![0.0; n],
                detail: Some(format!(
                    "support point {y} (weight {w}) outside the agents' extent"
                )),
            });
        }
    }
    reports.push(finish(Property::Range, mech, tally, true, c.spec.clone()));

    // unanimity at every distinct reported location
    let mut tally = Tally::new(grid.max_witnesses);
    let mut seen: Vec<Point> = Vec::new();
    for x in truth {
        if seen.contains(x) {
            continue;
        }
        seen.push(*x);
        let same = vec![*x; n];
        let o = mech.evaluate(metric, &same, pi)?;
        tally.cells += 1;
        if o != Outcome::point(*x) {
            let after = agent_costs(metric, truth, &o);
            tally.push(Deviation {
                coalition: everyone.clone(),
                misreports: same,
                cost_deltas: truthful.iter().zip(&after).map(|(a, b)| a - b).collect(),
                detail: Some(format!("coincident reports at {x} gave {o}")),
            });
        }
    }
    reports.push(finish(
        Property::Unanimity,
        mech,
        tally,
        true,
        c.spec.clone(),
    ));

    if metric.is_line() && mech.is_deterministic() {
        let y = out.as_point().expect("deterministic outcome").coord(0);
        let mut tally = Tally::new(grid.max_witnesses);
        let mut reports_buf = truth.to_vec();
        for i in 0..n {
            let xi = truth[i].coord(0);
            let side = if xi > y + EPS {
                1.0
            } else if xi < y - EPS {
                -1.0
            } else {
                continue;
            };
            for cand in &c.full {
                let v = cand.coord(0);
                if side * (v - y) < 0.0 {
                    continue;
                }
                reports_buf[i] = *cand;
                let o = mech.evaluate(metric, &reports_buf, pi)?;
                tally.cells += 1;
                let moved = o.as_point().is_none_or(|z| (z.coord(0) - y).abs() > EPS);
                if moved {
                    let after = o.expected_distance(metric, &truth[i]);
                    tally.push(Deviation {
                        coalition: vec![i],
                        misreports: vec![*cand],
                        cost_deltas: vec![truthful[i] - after],
                        detail: Some(format!("output moved from {y} to {o}")),
                    });
                }
            }
            reports_buf[i] = truth[i];
        }
        reports.push(finish(Property::Uncompromising, mech, tally, true, c.spec));
    }
    Ok(reports)
}
