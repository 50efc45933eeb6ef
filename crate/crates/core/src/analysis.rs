//! Approximation ratios, closed-form guarantee curves and probes of the
//! worst case over predictions.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{FacError, Result};
use crate::instances::InstanceFamily;
use crate::mechanism::{Mechanism, MechanismId, MechanismSpec};
use crate::metric::{objective_points, Instance, MetricSpec, ObjectiveMode, Point, Profile, EPS};
use crate::oracle::{error_against, optimal, ErrorValue, OracleResult, SolverOptions};
use crate::report::{fmt_f64, fmt_opt, serialize_extended, serialize_opt_extended};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioReport {
    pub mechanism_cost: f64,
    pub optimal_cost: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub ratio: f64,
    pub eta: ErrorValue,
    pub mode: ObjectiveMode,
}

/// `cost / optimum`, with a zero optimum giving 1 when the mechanism also
/// pays nothing and infinity otherwise.
pub fn ratio_of(cost: f64, optimum: f64) -> f64 {
    if optimum > 0.0 {
        cost / optimum
    } else if cost <= EPS {
        1.0
    } else {
        f64::INFINITY
    }
}

fn report_against(
    mech: &dyn Mechanism,
    instance: &Instance,
    oracle: &OracleResult,
    mode: ObjectiveMode,
    tol: f64,
) -> Result<RatioReport> {
    let out = mech.outcome(instance)?;
    let cost = objective_points(instance.metric(), instance.profile().points(), &out, mode);
    Ok(RatioReport {
        mechanism_cost: cost,
        optimal_cost: oracle.cost,
        ratio: ratio_of(cost, oracle.cost),
        eta: error_against(instance, oracle, tol),
        mode,
    })
}

pub fn approx_ratio(
    mech: &dyn Mechanism,
    instance: &Instance,
    mode: ObjectiveMode,
    opts: SolverOptions,
) -> Result<RatioReport> {
    let oracle = optimal(instance.metric(), instance.profile(), opts)?;
    report_against(mech, instance, &oracle, mode, opts.tol)
}

/// Proven worst-case ratio of `spec` at prediction error `eta`; `p` is the
/// plane exponent and is ignored on the line. `eta` may be infinite.
pub fn closed_form_bound(spec: &MechanismSpec, eta: f64, p: Option<f64>) -> Result<f64> {
    if !(eta >= 0.0) {
        return Err(FacError::input(format!("eta must be >= 0, got {eta}")));
    }
    let q = spec.q.unwrap_or(0.0);
    let plane_cap = || -> Result<f64> {
        let p = p.ok_or_else(|| FacError::input(format!("{spec} bound needs the exponent p")))?;
        MetricSpec::plane(p)?;
        Ok(2f64.powf(1.0 / p))
    };
    Ok(match spec.id {
        // RandLine1C2R pays 2r whenever the prediction leaves [x_1, x_n]
        MechanismId::MinMaxP | MechanismId::RandLine1C2R => 1.0 + eta.min(1.0),
        MechanismId::Median => 2.0,
        MechanismId::Lrm => 1.5,
        MechanismId::MixedLine => 1.0 + q / 2.0 + (1.0 - q) * eta.min(1.0),
        MechanismId::BoundingBox => 1.0 + eta.min(plane_cap()?),
        MechanismId::CoordMedian => {
            plane_cap()?;
            2.0
        }
        MechanismId::Mixed2D => 1.0 + q + (1.0 - q) * eta.min(plane_cap()?),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub eta: f64,
    #[serde(serialize_with = "serialize_opt_extended")]
    pub worst_ratio: Option<f64>,
    #[serde(serialize_with = "serialize_opt_extended")]
    pub mean_ratio: Option<f64>,
    pub bound: f64,
    pub trials: u64,
}

/// One mechanism's guarantee curve with the settings that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sweep {
    pub mechanism: MechanismId,
    pub q: Option<f64>,
    pub p: Option<f64>,
    pub seed: u64,
    pub mode: ObjectiveMode,
    pub points: Vec<CurvePoint>,
}

pub const SWEEP_CSV_HEADER: &str = "mechanism,q,p,eta,worst_ratio,mean_ratio,bound,trials,seed";

impl Sweep {
    /// CSV rows without the header, LF terminated.
    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for c in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                self.mechanism,
                fmt_opt(self.q),
                fmt_opt(self.p),
                fmt_f64(c.eta),
                fmt_opt(c.worst_ratio),
                fmt_opt(c.mean_ratio),
                fmt_f64(c.bound),
                c.trials,
                self.seed
            ));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        format!("{SWEEP_CSV_HEADER}\n{}", self.csv_rows())
    }
}

/// Worst and mean ratio per target error over `trials` instances of `family`.
pub fn gamma_sweep(
    spec: &MechanismSpec,
    family: &InstanceFamily,
    eta_grid: &[f64],
    trials: u64,
    seed: u64,
    mode: ObjectiveMode,
    opts: SolverOptions,
) -> Result<Sweep> {
    let metric = family.metric()?;
    spec.check_metric(&metric)?;
    let p = metric.p();
    let mut points = Vec::with_capacity(eta_grid.len());
    for &eta in eta_grid {
        let bound = closed_form_bound(spec, eta, p)?;
        let ratios: Vec<f64> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let inst = family.instance(eta, t, seed, opts)?;
                Ok(approx_ratio(spec, &inst, mode, opts)?.ratio)
            })
            .collect::<Result<_>>()?;
        // sequential reduction keeps the output independent of the schedule
        let worst = ratios.iter().copied().reduce(f64::max);
        let mean = (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64);
        points.push(CurvePoint {
            eta,
            worst_ratio: worst,
            mean_ratio: mean,
            bound,
            trials,
        });
    }
    Ok(Sweep {
        mechanism: spec.id,
        q: spec.q,
        p,
        seed,
        mode,
        points,
    })
}

/// Prediction grid for [`robustness_probe`]: the profile's extent widened by
/// `margin` on every side (the diameter when `None`), sampled at `step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeGrid {
    pub step: f64,
    pub margin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub worst: RatioReport,
    pub worst_prediction: Point,
    pub cells: u64,
    pub grid: ProbeGrid,
    /// The searched region, one `(lo, hi)` per coordinate.
    pub region: Vec<(f64, f64)>,
}

/// Supremum of the ratio over a grid of predictions. This is a probe of the
/// robustness, not a certified supremum.
pub fn robustness_probe(
    mech: &dyn Mechanism,
    metric: &MetricSpec,
    profile: &Profile,
    grid: ProbeGrid,
    mode: ObjectiveMode,
    opts: SolverOptions,
) -> Result<ProbeReport> {
    if !(grid.step > 0.0) {
        return Err(FacError::input("probe step must be positive"));
    }
    let oracle = optimal(metric, profile, opts)?;
    let diam = crate::oracle::diameter(metric, profile.points());
    let margin = grid.margin.unwrap_or(diam).max(diam);
    let region: Vec<(f64, f64)> = profile
        .bounds()
        .into_iter()
        .map(|(lo, hi)| (lo - margin, hi + margin))
        .collect();
    let axes: Vec<Vec<f64>> = region
        .iter()
        .map(|&(lo, hi)| {
            let cells = ((hi - lo) / grid.step).ceil() as usize;
            (0..=cells)
                .map(|k| (lo + k as f64 * grid.step).min(hi))
                .collect()
        })
        .collect();
    let preds: Vec<Point> = match metric {
        MetricSpec::Line => axes[0].iter().map(|&x| Point::Line(x)).collect(),
        MetricSpec::Plane { .. } => axes[0]
            .iter()
            .flat_map(|&a| axes[1].iter().map(move |&b| Point::Plane([a, b])))
            .collect(),
    };
    let reports: Vec<(Point, RatioReport)> = preds
        .par_iter()
        .map(|pi| {
            let inst = Instance::new(*metric, profile.clone(), *pi)?;
            Ok((*pi, report_against(mech, &inst, &oracle, mode, opts.tol)?))
        })
        .collect::<Result<_>>()?;
    let cells = reports.len() as u64;
    let (worst_prediction, worst) = reports
        .into_iter()
        .reduce(|a, b| if b.1.ratio > a.1.ratio { b } else { a })
        .expect("grid is non-empty");
    Ok(ProbeReport {
        worst,
        worst_prediction,
        cells,
        grid: ProbeGrid {
            step: grid.step,
            margin: Some(margin),
        },
        region,
    })
}
