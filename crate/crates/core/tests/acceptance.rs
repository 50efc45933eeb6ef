//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed. Built without the libtest harness so the
//! lines are always shown.

use std::time::{Duration, Instant};

use facloc::analysis::{approx_ratio, closed_form_bound, gamma_sweep};
use facloc::audit::{audit_sgsp, audit_sp, replay, AuditGrid};
use facloc::harness::{execute, FamilyConfig, RunConfig};
use facloc::instances::{
    derive_seed, fixture_bbox_tight, fixture_cm_tight, fixture_lrm_sgsp, fixture_minmaxp_tight,
    gen_random, FamilySpec, InstanceFamily,
};
use facloc::mechanism::MeanOfReports;
use facloc::oracle::{
    brute_force_center, optimal_lp_ball, Bounds, SolverOptions, DEFAULT_CELL_BUDGET, DEFAULT_TOL,
};
use facloc::{Instance, MechanismId, MechanismSpec, MetricSpec, ObjectiveMode, Point};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const ETA_GRID: [f64; 5] = [0.0, 0.25, 0.5, 1.0, 2.0];
const Q_GRID: [f64; 4] = [0.0, 0.25, 0.5, 1.0];
const PLANE_PS: [f64; 3] = [2.0, 3.0, 4.0];

fn opts() -> SolverOptions {
    SolverOptions::default()
}

fn line_family() -> InstanceFamily {
    InstanceFamily::Random {
        metric: MetricSpec::Line,
        n_range: (2, 8),
        coord_box: (0.0, 1.0),
    }
}

fn plane_family(p: f64) -> InstanceFamily {
    InstanceFamily::Random {
        metric: MetricSpec::plane(p).unwrap(),
        n_range: (2, 8),
        coord_box: (0.0, 1.0),
    }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(start: Instant, budget: Duration) -> Result<Duration, String> {
    let took = start.elapsed();
    check(took < budget, || {
        format!("took {took:.2?}, budget {budget:?}")
    })?;
    Ok(took)
}

/// Worst excess of any sweep point over its bound, per mechanism and family.
fn sweep_excess(
    spec: &MechanismSpec,
    family: &InstanceFamily,
    etas: &[f64],
    trials: u64,
    seed: u64,
) -> Result<f64, String> {
    let sweep = gamma_sweep(
        spec,
        family,
        etas,
        trials,
        seed,
        ObjectiveMode::ExpectedMax,
        opts(),
    )
    .map_err(|e| e.to_string())?;
    Ok(sweep
        .points
        .iter()
        .map(|c| c.worst_ratio.unwrap() - c.bound)
        .fold(f64::NEG_INFINITY, f64::max))
}

fn fixture_gap(spec: &MechanismSpec, inst: &Instance, eta: f64) -> Result<f64, String> {
    let r =
        approx_ratio(spec, inst, ObjectiveMode::ExpectedMax, opts()).map_err(|e| e.to_string())?;
    let b = closed_form_bound(spec, eta, inst.metric().p()).map_err(|e| e.to_string())?;
    Ok((r.ratio - b).abs())
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let spec = MechanismSpec::simple(MechanismId::MinMaxP);
    let excess = sweep_excess(&spec, &line_family(), &ETA_GRID, 1000, 1)?;
    check(excess <= 1e-9, || {
        format!("random ratio exceeds bound by {excess:e}")
    })?;
    for eta in ETA_GRID {
        let inst = fixture_minmaxp_tight(eta).map_err(|e| e.to_string())?;
        let r = approx_ratio(&spec, &inst, ObjectiveMode::ExpectedMax, opts())
            .map_err(|e| e.to_string())?;
        let want = 1.0 + eta.min(1.0);
        check(r.ratio >= want - 1e-9, || {
            format!("tight fixture at eta={eta}: {} < {want}", r.ratio)
        })?;
    }
    let took = within_budget(start, Duration::from_secs(5))?;
    Ok(format!(
        "5000 random instances, max excess {excess:e}; fixtures tight; {took:.2?}"
    ))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let spec = MechanismSpec::simple(MechanismId::Lrm);
    let inst = Instance::line(&[0.0, 2.0], 1.0).unwrap();
    let r = approx_ratio(&spec, &inst, ObjectiveMode::ExpectedMax, opts())
        .map_err(|e| e.to_string())?;
    check(r.ratio == 1.5, || format!("ratio on (0,2) is {}", r.ratio))?;
    let excess = sweep_excess(&spec, &line_family(), &[0.0], 1000, 2)?;
    check(excess <= 1e-9, || {
        format!("random ratio exceeds 1.5 by {excess:e}")
    })?;
    let took = within_budget(start, Duration::from_secs(2))?;
    Ok(format!(
        "(0,2) ratio exactly 1.5; 1000 random, max excess {excess:e}; {took:.2?}"
    ))
}

fn criterion_3() -> Outcome {
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_gap: f64 = 0.0;
    for (k, q) in Q_GRID.into_iter().enumerate() {
        let spec = MechanismSpec::mixed(MechanismId::MixedLine, q).unwrap();
        worst_excess = worst_excess.max(sweep_excess(
            &spec,
            &line_family(),
            &ETA_GRID,
            1000,
            30 + k as u64,
        )?);
        for eta in ETA_GRID {
            let inst = fixture_minmaxp_tight(eta).map_err(|e| e.to_string())?;
            worst_gap = worst_gap.max(fixture_gap(&spec, &inst, eta)?);
        }
    }
    check(worst_excess <= 1e-9, || {
        format!("random ratio exceeds bound by {worst_excess:e}")
    })?;
    check(worst_gap <= 1e-6, || {
        format!("fixture misses bound by {worst_gap:e}")
    })?;
    Ok(format!(
        "max excess {worst_excess:e}, max fixture gap {worst_gap:e}"
    ))
}

/// Ratio slack for plane sweeps. The oracle's radius carries an absolute
/// error of about `tol`; relative to radii of at least ~1e-2 in the unit box
/// this stays far below 1e-6.
const PLANE_SLACK: f64 = 1e-6;

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let spec = MechanismSpec::simple(MechanismId::BoundingBox);
    let mut worst_gap: f64 = 0.0;
    let mut worst_excess = f64::NEG_INFINITY;
    for (k, p) in PLANE_PS.into_iter().enumerate() {
        let cap = 2f64.powf(1.0 / p);
        for eta in [0.0, 1.0, cap, 3.0] {
            let inst = fixture_bbox_tight(p, eta).map_err(|e| e.to_string())?;
            worst_gap = worst_gap.max(fixture_gap(&spec, &inst, eta)?);
        }
        let etas = [0.0, 0.25, 0.5, 1.0, cap, 2.0, 3.0];
        worst_excess = worst_excess.max(sweep_excess(
            &spec,
            &plane_family(p),
            &etas,
            200,
            40 + k as u64,
        )?);
    }
    check(worst_gap <= 1e-6, || {
        format!("fixture misses 1+min(eta,2^(1/p)) by {worst_gap:e}")
    })?;
    check(worst_excess <= PLANE_SLACK, || {
        format!("random ratio exceeds bound by {worst_excess:e}")
    })?;
    let took = within_budget(start, Duration::from_secs(30))?;
    Ok(format!(
        "max fixture gap {worst_gap:e}, max random excess {worst_excess:e}; {took:.2?}"
    ))
}

fn criterion_5() -> Outcome {
    let spec = MechanismSpec::simple(MechanismId::CoordMedian);
    let mut worst: f64 = 0.0;
    let mut worst_gap: f64 = 0.0;
    for (k, p) in [1.0, 2.0, 3.0].into_iter().enumerate() {
        let metric = MetricSpec::plane(p).unwrap();
        for t in 0..500u64 {
            let inst = gen_random(
                &FamilySpec {
                    metric,
                    n: 2 + (t % 7) as usize,
                    coord_box: (0.0, 1.0),
                    eta_target: None,
                    seed: derive_seed(50 + k as u64, "cm", &[t]),
                },
                opts(),
            )
            .map_err(|e| e.to_string())?;
            let r = approx_ratio(&spec, &inst, ObjectiveMode::ExpectedMax, opts())
                .map_err(|e| e.to_string())?;
            worst = worst.max(r.ratio);
        }
        let inst = fixture_cm_tight(p).map_err(|e| e.to_string())?;
        let r = approx_ratio(&spec, &inst, ObjectiveMode::ExpectedMax, opts())
            .map_err(|e| e.to_string())?;
        worst_gap = worst_gap.max((r.ratio - 2.0).abs());
    }
    check(worst <= 2.0 + 2.0 * DEFAULT_TOL, || {
        format!("worst random ratio {worst}")
    })?;
    check(worst_gap <= 1e-6, || {
        format!("tight fixture off by {worst_gap:e}")
    })?;
    Ok(format!(
        "worst random ratio {worst:.6}, fixture gap {worst_gap:e}"
    ))
}

fn criterion_6() -> Outcome {
    let mut worst_excess = f64::NEG_INFINITY;
    for (i, q) in Q_GRID.into_iter().enumerate() {
        let spec = MechanismSpec::mixed(MechanismId::Mixed2D, q).unwrap();
        for (j, p) in PLANE_PS.into_iter().enumerate() {
            let cap = 2f64.powf(1.0 / p);
            for eta in [0.0, 1.0, cap, 3.0] {
                let inst = fixture_bbox_tight(p, eta).map_err(|e| e.to_string())?;
                let r = approx_ratio(&spec, &inst, ObjectiveMode::ExpectedMax, opts())
                    .map_err(|e| e.to_string())?;
                let b = closed_form_bound(&spec, eta, Some(p)).unwrap();
                worst_excess = worst_excess.max(r.ratio - b);
            }
            let seed = 60 + (i * 3 + j) as u64;
            worst_excess =
                worst_excess.max(sweep_excess(&spec, &plane_family(p), &ETA_GRID, 100, seed)?);
        }
    }
    check(worst_excess <= PLANE_SLACK, || {
        format!("ratio exceeds bound by {worst_excess:e}")
    })?;
    Ok(format!("max excess {worst_excess:e} over q x eta x p"))
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let step = 0.005;
    let mut worst_slack = f64::INFINITY;
    for (k, p) in [1.0, 2.0, 3.0, 4.0].into_iter().enumerate() {
        let metric = MetricSpec::plane(p).unwrap();
        let tol = step * 2f64.powf(1.0 / p) + 1e-6;
        for t in 0..200u64 {
            let inst = gen_random(
                &FamilySpec {
                    metric,
                    n: 2 + (t % 7) as usize,
                    coord_box: (0.0, 1.0),
                    eta_target: None,
                    seed: derive_seed(70 + k as u64, "oracle", &[t]),
                },
                opts(),
            )
            .map_err(|e| e.to_string())?;
            let exact =
                optimal_lp_ball(inst.profile(), &metric, opts()).map_err(|e| e.to_string())?;
            let bounds = Bounds(inst.profile().bounds());
            let grid =
                brute_force_center(inst.profile(), &metric, &bounds, step, DEFAULT_CELL_BUDGET)
                    .map_err(|e| e.to_string())?;
            let diff = (exact.cost - grid.cost).abs();
            check(diff <= tol, || {
                format!("p={p} trial {t}: costs differ by {diff:e} > {tol:e}")
            })?;
            worst_slack = worst_slack.min(tol - diff);
        }
    }
    let took = within_budget(start, Duration::from_secs(60))?;
    Ok(format!(
        "800 instances agree, min slack {worst_slack:e}; {took:.2?}"
    ))
}

fn audit_instance(metric: MetricSpec, root: u64, t: u64) -> Result<Instance, String> {
    gen_random(
        &FamilySpec {
            metric,
            n: 2 + (t % 4) as usize,
            coord_box: (0.0, 1.0),
            eta_target: None,
            seed: derive_seed(root, "audit", &[t]),
        },
        opts(),
    )
    .map_err(|e| e.to_string())
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let grid = AuditGrid::default();
    let specs = [
        MechanismSpec::simple(MechanismId::MinMaxP),
        MechanismSpec::simple(MechanismId::Lrm),
        MechanismSpec::mixed(MechanismId::MixedLine, 0.5).unwrap(),
        MechanismSpec::simple(MechanismId::BoundingBox),
        MechanismSpec::mixed(MechanismId::Mixed2D, 0.5).unwrap(),
        MechanismSpec::simple(MechanismId::Median),
        MechanismSpec::simple(MechanismId::CoordMedian),
    ];
    let mut audits = 0;
    for (k, spec) in specs.iter().enumerate() {
        for t in 0..500u64 {
            let metric = if spec.id.is_line() {
                MetricSpec::Line
            } else {
                MetricSpec::plane([1.0, 2.0, 3.0][(t % 3) as usize]).unwrap()
            };
            let inst = audit_instance(metric, 80 + k as u64, t)?;
            let r = audit_sp(spec, &inst, &grid).map_err(|e| e.to_string())?;
            check(r.is_clean() && r.complete, || {
                format!(
                    "{spec} flagged on {}: {:?}",
                    inst.to_json().trim(),
                    r.violations.first()
                )
            })?;
            audits += 1;
        }
    }

    let mean = audit_sp(
        &MeanOfReports,
        &Instance::line(&[0.0, 2.0], 1.0).unwrap(),
        &grid,
    )
    .map_err(|e| e.to_string())?;
    check(!mean.is_clean(), || {
        "mean-of-reports control not flagged on (0,2)".into()
    })?;

    let minmaxp = MechanismSpec::simple(MechanismId::MinMaxP);
    for t in 0..200u64 {
        let inst = audit_instance(MetricSpec::Line, 90, t)?;
        let k = inst.profile().len().min(3);
        let r = audit_sgsp(&minmaxp, &inst, k, &grid).map_err(|e| e.to_string())?;
        check(r.is_clean() && r.complete, || {
            format!(
                "MinMaxP SGSP flagged on {}: {:?}",
                inst.to_json().trim(),
                r.violations.first()
            )
        })?;
    }

    let (inst, witness) = fixture_lrm_sgsp();
    let lrm = MechanismSpec::simple(MechanismId::Lrm);
    let deltas = replay(&lrm, &inst, &witness).map_err(|e| e.to_string())?;
    check(deltas == [0.0, 0.5, 0.0], || {
        format!("witness replays to {deltas:?}")
    })?;
    let wide = AuditGrid {
        max_witnesses: usize::MAX,
        ..AuditGrid::default()
    };
    let r = audit_sgsp(&lrm, &inst, 3, &wide).map_err(|e| e.to_string())?;
    let found = r.violations.iter().any(|v| {
        v.coalition == [0, 1, 2]
            && v.misreports == [Point::Line(1.0); 3]
            && v.cost_deltas == [0.0, 0.5, 0.0]
    });
    check(found, || {
        format!(
            "{} violations, none is the known witness",
            r.violation_count
        )
    })?;

    let took = within_budget(start, Duration::from_secs(120))?;
    Ok(format!(
        "{audits} SP audits clean, mean control flagged, 200 SGSP clean, LRM witness found; {took:.2?}"
    ))
}

fn sweep_suite(dir: &std::path::Path) -> Vec<RunConfig> {
    let line = FamilyConfig::Random {
        metric: MetricSpec::Line,
        n_min: 2,
        n_max: 8,
        coord_box: (0.0, 1.0),
    };
    let mut out = Vec::new();
    for spec in [
        MechanismSpec::simple(MechanismId::MinMaxP),
        MechanismSpec::simple(MechanismId::Median),
        MechanismSpec::simple(MechanismId::Lrm),
        MechanismSpec::simple(MechanismId::RandLine1C2R),
        MechanismSpec::mixed(MechanismId::MixedLine, 0.5).unwrap(),
    ] {
        out.push((spec, line.clone()));
    }
    for p in [1.0, 2.0, 3.0] {
        let plane = FamilyConfig::Random {
            metric: MetricSpec::plane(p).unwrap(),
            n_min: 2,
            n_max: 8,
            coord_box: (0.0, 1.0),
        };
        for spec in [
            MechanismSpec::simple(MechanismId::BoundingBox),
            MechanismSpec::simple(MechanismId::CoordMedian),
            MechanismSpec::mixed(MechanismId::Mixed2D, 0.5).unwrap(),
        ] {
            out.push((spec, plane.clone()));
        }
    }
    out.push((
        MechanismSpec::simple(MechanismId::MinMaxP),
        FamilyConfig::MinmaxpTight,
    ));
    out.push((
        MechanismSpec::simple(MechanismId::BoundingBox),
        FamilyConfig::BboxTight { p: 2.0 },
    ));
    out.into_iter()
        .enumerate()
        .map(|(k, (mechanism, family))| RunConfig::Sweep {
            mechanism,
            family,
            eta_grid: ETA_GRID.to_vec(),
            trials: 50,
            seed: 900 + k as u64,
            mode: ObjectiveMode::ExpectedMax,
            tol: DEFAULT_TOL,
            csv_out: Some(dir.join(format!("sweep_{k:02}.csv"))),
            json_out: None,
        })
        .collect()
}

fn run_suite(dir: &std::path::Path, threads: usize) -> Result<Vec<Vec<u8>>, String> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| e.to_string())?;
    let mut files = Vec::new();
    for cfg in sweep_suite(dir) {
        let RunConfig::Sweep {
            csv_out: Some(path),
            ..
        } = &cfg
        else {
            unreachable!("suite sweeps always write CSV")
        };
        pool.install(|| execute(&cfg, &mut std::io::sink()))
            .map_err(|e| e.to_string())?;
        files.push(std::fs::read(path).map_err(|e| e.to_string())?);
    }
    Ok(files)
}

fn criterion_9() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let first = run_suite(a.path(), 1)?;
    let second = run_suite(b.path(), 4)?;
    check(first == second, || "CSV outputs differ between runs".into())?;
    let bytes: usize = first.iter().map(Vec::len).sum();
    Ok(format!(
        "{} sweep CSVs ({bytes} bytes) byte-identical across runs and thread counts",
        first.len()
    ))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("1 MinMaxP guarantee and tightness", criterion_1),
        ("2 LRM ratio 1.5", criterion_2),
        ("3 mixed line curve", criterion_3),
        ("4 bounding box", criterion_4),
        ("5 coordinate median", criterion_5),
        ("6 mixed plane curve", criterion_6),
        ("7 oracle cross-validation", criterion_7),
        ("8 incentive audits", criterion_8),
        ("9 reproducibility", criterion_9),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        match f() {
            Ok(detail) => println!("PASS  criterion {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  criterion {name}: {why}");
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
