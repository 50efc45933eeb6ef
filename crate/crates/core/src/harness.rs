//! Command-line front end. Every run is described by a [`RunConfig`], which
//! can be built from flags or loaded from JSON, and fully determines the
//! bytes written.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::analysis::{
    approx_ratio, closed_form_bound, gamma_sweep, robustness_probe, ProbeGrid, Sweep,
};
use crate::audit::{audit_gsp, audit_sgsp, audit_sp, audit_structure, AuditGrid, AuditReport};
use crate::error::{FacError, Result};
use crate::instances::{fixture_by_name, gen_random, FamilySpec, InstanceFamily};
use crate::mechanism::{Mechanism, MechanismId, MechanismSpec};
use crate::metric::{Instance, MetricSpec, ObjectiveMode};
use crate::oracle::{
    brute_force_center, optimal, Bounds, SolverOptions, DEFAULT_CELL_BUDGET, DEFAULT_TOL,
};
use crate::report::{fmt_f64, fmt_opt};

/// Overrides the directory that relative output paths resolve against.
pub const OUT_DIR_ENV: &str = "FACLOC_OUT_DIR";

pub const EXIT_OK: u8 = 0;
pub const EXIT_VIOLATIONS: u8 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceSource {
    File(PathBuf),
    Fixture(String),
    Generated(FamilySpec),
}

impl InstanceSource {
    pub fn load(&self, opts: SolverOptions) -> Result<Instance> {
        match self {
            InstanceSource::File(path) => {
                let text = std::fs::read_to_string(path)?;
                Instance::from_json(&text)
            }
            InstanceSource::Fixture(name) => fixture_by_name(name),
            InstanceSource::Generated(spec) => gen_random(spec, opts),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum AuditKind {
    Sp,
    Gsp,
    Sgsp,
    Structure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilyConfig {
    Random {
        metric: MetricSpec,
        n_min: usize,
        n_max: usize,
        coord_box: (f64, f64),
    },
    MinmaxpTight,
    BboxTight {
        p: f64,
    },
}

impl FamilyConfig {
    fn family(&self) -> Result<InstanceFamily> {
        Ok(match self {
            FamilyConfig::Random {
                metric,
                n_min,
                n_max,
                coord_box,
            } => {
                if *n_min == 0 || n_min > n_max {
                    return Err(FacError::input(format!(
                        "bad agent range {n_min}..={n_max}"
                    )));
                }
                InstanceFamily::Random {
                    metric: *metric,
                    n_range: (*n_min, *n_max),
                    coord_box: *coord_box,
                }
            }
            FamilyConfig::MinmaxpTight => InstanceFamily::MinMaxPTight,
            FamilyConfig::BboxTight { p } => InstanceFamily::BoundingBoxTight { p: *p },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum RunConfig {
    Eval {
        mechanism: MechanismSpec,
        source: InstanceSource,
        mode: ObjectiveMode,
        tol: f64,
        json_out: Option<PathBuf>,
    },
    Sweep {
        mechanism: MechanismSpec,
        family: FamilyConfig,
        eta_grid: Vec<f64>,
        trials: u64,
        seed: u64,
        mode: ObjectiveMode,
        tol: f64,
        csv_out: Option<PathBuf>,
        json_out: Option<PathBuf>,
    },
    Audit {
        mechanism: MechanismSpec,
        source: InstanceSource,
        property: AuditKind,
        coalition: usize,
        grid_step: Option<f64>,
        cell_cap: u64,
        json_out: Option<PathBuf>,
    },
    Adversary {
        mechanism: MechanismSpec,
        source: InstanceSource,
        step: f64,
        margin: Option<f64>,
        mode: ObjectiveMode,
        json_out: Option<PathBuf>,
    },
    Oracle {
        source: InstanceSource,
        p: Option<f64>,
        tol: f64,
        grid_step: Option<f64>,
        json_out: Option<PathBuf>,
    },
    Gen {
        family: FamilySpec,
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Parser)]
#[command(
    name = "facloc",
    version,
    about = "Facility location mechanisms with predictions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate one mechanism on one instance.
    Eval(EvalArgs),
    /// Worst-case ratio per prediction error, as CSV.
    Sweep(SweepArgs),
    /// Search for incentive or structural violations.
    Audit(AuditArgs),
    /// Probe the worst ratio over a grid of predictions.
    Adversary(AdversaryArgs),
    /// Solve for the optimal location.
    Oracle(OracleArgs),
    /// Generate a random instance.
    Gen(GenArgs),
    /// Execute a JSON run configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct MechanismArgs {
    #[arg(long)]
    pub mechanism: String,
    #[arg(long)]
    pub q: Option<f64>,
}

impl MechanismArgs {
    fn spec(&self) -> Result<MechanismSpec> {
        MechanismSpec::new(self.mechanism.parse::<MechanismId>()?, self.q)
    }
}

#[derive(Debug, Args)]
pub struct SourceArgs {
    /// Instance JSON file.
    #[arg(long, conflicts_with = "fixture")]
    pub instance: Option<PathBuf>,
    /// Named fixture, e.g. `minmaxp_tight:0.5` or `bbox_tight:2:1`.
    #[arg(long)]
    pub fixture: Option<String>,
}

impl SourceArgs {
    fn source(&self) -> Result<InstanceSource> {
        match (&self.instance, &self.fixture) {
            (Some(p), None) => Ok(InstanceSource::File(p.clone())),
            (None, Some(f)) => Ok(InstanceSource::Fixture(f.clone())),
            _ => Err(FacError::input(
                "give exactly one of --instance or --fixture",
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    ExpectedMax,
    MaxOfExpected,
}

impl From<ModeArg> for ObjectiveMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::ExpectedMax => ObjectiveMode::ExpectedMax,
            ModeArg::MaxOfExpected => ObjectiveMode::MaxOfExpected,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MetricArg {
    Line,
    L2p,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FamilyArg {
    Random,
    MinmaxpTight,
    BboxTight,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub mechanism: MechanismArgs,
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long, value_enum, default_value = "expected-max")]
    pub mode: ModeArg,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub mechanism: MechanismArgs,
    #[arg(long, value_enum, default_value = "random")]
    pub family: FamilyArg,
    #[arg(long, value_enum, default_value = "line")]
    pub metric: MetricArg,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long, default_value_t = 2)]
    pub n_min: usize,
    #[arg(long, default_value_t = 8)]
    pub n_max: usize,
    /// Coordinate range as `lo,hi`.
    #[arg(long = "box", default_value = "0,1")]
    pub coord_box: String,
    /// Comma-separated prediction errors.
    #[arg(long, default_value = "0,0.25,0.5,1,2")]
    pub eta_grid: String,
    #[arg(long, default_value_t = 200)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "expected-max")]
    pub mode: ModeArg,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    /// CSV output path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[command(flatten)]
    pub mechanism: MechanismArgs,
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long, value_enum, default_value = "sp")]
    pub property: AuditKind,
    /// Largest coalition searched (gsp and sgsp).
    #[arg(long, default_value_t = 2)]
    pub coalition: usize,
    /// Misreport grid step; defaults to diameter / 40.
    #[arg(long)]
    pub grid_step: Option<f64>,
    #[arg(long, default_value_t = crate::audit::DEFAULT_CELL_CAP)]
    pub cell_cap: u64,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AdversaryArgs {
    #[command(flatten)]
    pub mechanism: MechanismArgs,
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long, default_value_t = 0.01)]
    pub step: f64,
    /// Distance the prediction grid extends past the agents; at least the diameter.
    #[arg(long)]
    pub margin: Option<f64>,
    #[arg(long, value_enum, default_value = "expected-max")]
    pub mode: ModeArg,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Re-read the agents under the l_p plane metric with this exponent.
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    /// Also run the exhaustive grid oracle at this step.
    #[arg(long)]
    pub grid_step: Option<f64>,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum, default_value = "line")]
    pub metric: MetricArg,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long, default_value_t = 5)]
    pub n: usize,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "box", default_value = "0,1")]
    pub coord_box: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| FacError::input(format!("bad number {t:?}: {e}")))
        })
        .collect()
}

fn parse_box(s: &str) -> Result<(f64, f64)> {
    match parse_list(s)?.as_slice() {
        [lo, hi] => Ok((*lo, *hi)),
        _ => Err(FacError::input(format!("--box takes lo,hi, got {s:?}"))),
    }
}

fn metric_of(m: MetricArg, p: f64) -> Result<MetricSpec> {
    match m {
        MetricArg::Line => Ok(MetricSpec::Line),
        MetricArg::L2p => MetricSpec::plane(p),
    }
}

impl Command {
    /// Translates parsed flags into a run configuration.
    pub fn to_config(&self) -> Result<RunConfig> {
        Ok(match self {
            Command::Eval(a) => RunConfig::Eval {
                mechanism: a.mechanism.spec()?,
                source: a.source.source()?,
                mode: a.mode.into(),
                tol: a.tol,
                json_out: a.json.clone(),
            },
            Command::Sweep(a) => {
                let family = match a.family {
                    FamilyArg::Random => FamilyConfig::Random {
                        metric: metric_of(a.metric, a.p)?,
                        n_min: a.n_min,
                        n_max: a.n_max,
                        coord_box: parse_box(&a.coord_box)?,
                    },
                    FamilyArg::MinmaxpTight => FamilyConfig::MinmaxpTight,
                    FamilyArg::BboxTight => FamilyConfig::BboxTight { p: a.p },
                };
                RunConfig::Sweep {
                    mechanism: a.mechanism.spec()?,
                    family,
                    eta_grid: parse_list(&a.eta_grid)?,
                    trials: a.trials,
                    seed: a.seed,
                    mode: a.mode.into(),
                    tol: a.tol,
                    csv_out: a.out.clone(),
                    json_out: a.json.clone(),
                }
            }
            Command::Audit(a) => RunConfig::Audit {
                mechanism: a.mechanism.spec()?,
                source: a.source.source()?,
                property: a.property,
                coalition: a.coalition,
                grid_step: a.grid_step,
                cell_cap: a.cell_cap,
                json_out: a.json.clone(),
            },
            Command::Adversary(a) => RunConfig::Adversary {
                mechanism: a.mechanism.spec()?,
                source: a.source.source()?,
                step: a.step,
                margin: a.margin,
                mode: a.mode.into(),
                json_out: a.json.clone(),
            },
            Command::Oracle(a) => RunConfig::Oracle {
                source: a.source.source()?,
                p: a.p,
                tol: a.tol,
                grid_step: a.grid_step,
                json_out: a.json.clone(),
            },
            Command::Gen(a) => RunConfig::Gen {
                family: FamilySpec {
                    metric: metric_of(a.metric, a.p)?,
                    n: a.n,
                    coord_box: parse_box(&a.coord_box)?,
                    eta_target: a.eta,
                    seed: a.seed,
                },
                out: a.out.clone(),
            },
            Command::Run { config } => {
                let text = std::fs::read_to_string(config)?;
                serde_json::from_str(&text)?
            }
        })
    }
}

/// Resolves a relative output path against `$FACLOC_OUT_DIR` when set.
pub fn resolve_output(path: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if path.is_relative() => PathBuf::from(dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let path = resolve_output(path);
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, contents)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Option<PathBuf>, value: &T) -> Result<()> {
    if let Some(path) = path {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        write_file(path, &s)?;
    }
    Ok(())
}

fn solver(tol: f64) -> SolverOptions {
    SolverOptions {
        tol,
        ..SolverOptions::default()
    }
}

#[derive(Serialize)]
struct EvalOutput<'a> {
    mechanism: &'a MechanismSpec,
    instance: &'a Instance,
    outcome: &'a crate::metric::Outcome,
    report: &'a crate::analysis::RatioReport,
    bound: Option<f64>,
    pass: Option<bool>,
}

/// Executes a configuration, writing human-readable output to `out`.
/// Returns the process exit code.
pub fn execute(config: &RunConfig, out: &mut dyn Write) -> Result<u8> {
    match config {
        RunConfig::Eval {
            mechanism,
            source,
            mode,
            tol,
            json_out,
        } => {
            let opts = solver(*tol);
            let inst = source.load(opts)?;
            mechanism.check_metric(inst.metric())?;
            let outcome = mechanism.outcome(&inst)?;
            let report = approx_ratio(mechanism, &inst, *mode, opts)?;
            let bound = closed_form_bound(mechanism, report.eta.value(), inst.metric().p()).ok();
            let pass = bound.map(|b| report.ratio <= b + 1e-6);
            writeln!(out, "mechanism       {mechanism}")?;
            writeln!(out, "metric          {}", inst.metric())?;
            writeln!(out, "outcome         {outcome}")?;
            writeln!(out, "mode            {mode}")?;
            writeln!(out, "mechanism cost  {}", fmt_f64(report.mechanism_cost))?;
            writeln!(out, "optimal cost    {}", fmt_f64(report.optimal_cost))?;
            writeln!(out, "eta             {}", report.eta)?;
            writeln!(out, "ratio           {}", fmt_f64(report.ratio))?;
            writeln!(out, "bound           {}", fmt_opt(bound))?;
            writeln!(
                out,
                "status          {}",
                match pass {
                    Some(true) => "PASS",
                    Some(false) => "FAIL",
                    None => "n/a",
                }
            )?;
            write_json(
                json_out,
                &EvalOutput {
                    mechanism,
                    instance: &inst,
                    outcome: &outcome,
                    report: &report,
                    bound,
                    pass,
                },
            )?;
            Ok(EXIT_OK)
        }
        RunConfig::Sweep {
            mechanism,
            family,
            eta_grid,
            trials,
            seed,
            mode,
            tol,
            csv_out,
            json_out,
        } => {
            let sweep: Sweep = gamma_sweep(
                mechanism,
                &family.family()?,
                eta_grid,
                *trials,
                *seed,
                *mode,
                solver(*tol),
            )?;
            let csv = sweep.to_csv();
            match csv_out {
                Some(path) => write_file(path, &csv)?,
                None => out.write_all(csv.as_bytes())?,
            }
            write_json(json_out, &sweep)?;
            Ok(EXIT_OK)
        }
        RunConfig::Audit {
            mechanism,
            source,
            property,
            coalition,
            grid_step,
            cell_cap,
            json_out,
        } => {
            let grid = AuditGrid {
                step: *grid_step,
                cell_cap: *cell_cap,
                ..AuditGrid::default()
            };
            let inst = source.load(grid.solver)?;
            mechanism.check_metric(inst.metric())?;
            let reports: Vec<AuditReport> = match property {
                AuditKind::Sp => vec![audit_sp(mechanism, &inst, &grid)?],
                AuditKind::Gsp => vec![audit_gsp(mechanism, &inst, *coalition, &grid)?],
                AuditKind::Sgsp => vec![audit_sgsp(mechanism, &inst, *coalition, &grid)?],
                AuditKind::Structure => audit_structure(mechanism, &inst, &grid)?,
            };
            for r in &reports {
                writeln!(
                    out,
                    "{:<15} {:<14} violations={} cells={} complete={}",
                    r.property.to_string(),
                    r.mechanism,
                    r.violation_count,
                    r.cells_searched,
                    r.complete
                )?;
                if let Some(w) = r.violations.first() {
                    let mis: Vec<String> = w.misreports.iter().map(|p| p.to_string()).collect();
                    let deltas: Vec<String> = w.cost_deltas.iter().map(|d| fmt_f64(*d)).collect();
                    writeln!(
                        out,
                        "  witness: coalition={:?} misreports=[{}] deltas=[{}]",
                        w.coalition,
                        mis.join(", "),
                        deltas.join(", ")
                    )?;
                }
            }
            write_json(json_out, &reports)?;
            Ok(if reports.iter().all(AuditReport::is_clean) {
                EXIT_OK
            } else {
                EXIT_VIOLATIONS
            })
        }
        RunConfig::Adversary {
            mechanism,
            source,
            step,
            margin,
            mode,
            json_out,
        } => {
            let opts = SolverOptions::default();
            let inst = source.load(opts)?;
            mechanism.check_metric(inst.metric())?;
            let r = robustness_probe(
                mechanism,
                inst.metric(),
                inst.profile(),
                ProbeGrid {
                    step: *step,
                    margin: *margin,
                },
                *mode,
                opts,
            )?;
            writeln!(out, "mechanism        {mechanism}")?;
            writeln!(out, "cells            {}", r.cells)?;
            writeln!(out, "worst ratio      {}", fmt_f64(r.worst.ratio))?;
            writeln!(out, "worst prediction {}", r.worst_prediction)?;
            writeln!(out, "eta at worst     {}", r.worst.eta)?;
            write_json(json_out, &r)?;
            Ok(EXIT_OK)
        }
        RunConfig::Oracle {
            source,
            p,
            tol,
            grid_step,
            json_out,
        } => {
            let opts = solver(*tol);
            let mut inst = source.load(opts)?;
            if let Some(p) = p {
                inst = Instance::new(
                    MetricSpec::plane(*p)?,
                    inst.profile().clone(),
                    *inst.prediction(),
                )?;
            }
            let exact = optimal(inst.metric(), inst.profile(), opts)?;
            let mut results = vec![exact];
            if let Some(step) = grid_step {
                let bounds = Bounds::inflated(inst.metric(), inst.profile());
                results.push(brute_force_center(
                    inst.profile(),
                    inst.metric(),
                    &bounds,
                    *step,
                    DEFAULT_CELL_BUDGET,
                )?);
            }
            for r in &results {
                writeln!(
                    out,
                    "{:<14} center={} cost={} tolerance={}",
                    format!("{:?}", r.method),
                    r.location,
                    fmt_f64(r.cost),
                    fmt_f64(r.tolerance)
                )?;
            }
            write_json(json_out, &results)?;
            Ok(EXIT_OK)
        }
        RunConfig::Gen { family, out: path } => {
            let inst = gen_random(family, SolverOptions::default())?;
            let json = inst.to_json();
            match path {
                Some(p) => write_file(p, &json)?,
                None => out.write_all(json.as_bytes())?,
            }
            Ok(EXIT_OK)
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Errors are reported on `err` and mapped to their exit codes.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = write!(err, "{e}");
            return code;
        }
    };
    match cli.command.to_config().and_then(|c| execute(&c, out)) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error[{}]: {e}", e.code());
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (u8, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let mut full = vec!["facloc"];
        full.extend_from_slice(args);
        let code = main_with(full, &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn parses_lists_and_boxes() {
        assert_eq!(parse_list("0, 0.5,1").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_box("-1,2").unwrap(), (-1.0, 2.0));
        assert!(parse_box("1").is_err());
        assert!(parse_list("a").is_err());
    }

    #[test]
    fn unknown_mechanism_is_an_input_error() {
        let (code, _, err) = run(&["eval", "--mechanism", "Nope", "--fixture", "lrm_sgsp"]);
        assert_eq!(code, 2);
        assert!(err.contains("invalid_input"));
    }

    #[test]
    fn incompatible_metric_is_an_input_error() {
        let (code, _, _) = run(&[
            "eval",
            "--mechanism",
            "BoundingBox",
            "--fixture",
            "lrm_sgsp",
        ]);
        assert_eq!(code, 2);
    }

    #[test]
    fn config_round_trips_through_json() {
        let cli = Cli::try_parse_from([
            "facloc",
            "sweep",
            "--mechanism",
            "MixedLine",
            "--q",
            "0.5",
            "--eta-grid",
            "0,1",
            "--trials",
            "3",
        ])
        .unwrap();
        let cfg = cli.command.to_config().unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }
}
