//! Command-line front end. `run` parses arguments, dispatches a subcommand and
//! maps errors to exit codes; the `svykit` binary is a thin wrapper.

use crate::allocation::{self, AllocationProblem, Budget, OptimalTarget, StratumSpec};
use crate::calibration::{solve_entropy, CalibrationProblem, Entropy, Family, SolverOptions};
use crate::designs::{compute_pips, draw, Design, PpsMethod, SrsMethod};
use crate::diagnostics;
use crate::error::{input, Error, Result};
use crate::estimators::{regression_fit, Estimate};
use crate::frame::{Frame, Sample, Selection};
use crate::nonresponse::{fit_propensity, ps_variance, ResponseData};
use crate::simulate::{exact_expectation, monte_carlo};
use crate::smallarea::{bootstrap_mse, fit_fay_herriot, AreaData};
use crate::variance::{
    brr_replicates, engine_variance, hadamard_for_strata, jackknife_replicates, linearized_variance, Engine,
    JackknifeStructure, Residuals,
};
use crate::RngStream;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Input(_) => EXIT_USAGE,
        Error::Data(_) | Error::ZeroInclusion(_) | Error::NotEnumerable(_) | Error::SupportTooLarge { .. } => EXIT_DATA,
        Error::Singular(_) | Error::NoConvergence { .. } | Error::Numerical(_) => EXIT_NUMERICAL,
    }
}

#[derive(Parser, Debug)]
#[command(name = "svykit", version, about = "Finite-population survey sampling toolkit")]
struct Cli {
    /// Input CSV: the population frame, or the sample/area/strata file for
    /// the analysis subcommands.
    #[arg(long, global = true)]
    frame: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = OutFormat::Json)]
    out: OutFormat,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutFormat {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw one sample from the frame.
    Draw(DrawArgs),
    /// Allocate a sample across strata.
    Allocate(AllocateArgs),
    /// Point estimate with linearization variance.
    Estimate(EstimateArgs),
    /// Variance by linearization or replication.
    Variance(VarianceArgs),
    /// Calibrate base weights to known totals.
    Calibrate(CalibrateArgs),
    /// Cluster ANOVA, design effects and sample sizes.
    Diagnose(DiagnoseArgs),
    /// Propensity-score estimation under unit nonresponse.
    Nonresponse(NonresponseArgs),
    /// Fay-Herriot EBLUPs and their MSEs.
    Smallarea(SmallareaArgs),
    /// Exact or Monte Carlo design expectation of an estimator.
    Simulate(SimulateArgs),
}

#[derive(Args, Debug, Clone)]
struct DesignArgs {
    /// Design name (srs, srswr, bernoulli, poisson, systematic,
    /// systematic-pips, pps-wr, brewer2, durbin2, chao, rejective) or a
    /// path to a JSON/TOML design document.
    #[arg(long)]
    design: String,
    #[arg(long)]
    n: Option<usize>,
    /// Bernoulli selection probability.
    #[arg(long)]
    pi: Option<f64>,
}

#[derive(Args, Debug)]
struct DrawArgs {
    #[command(flatten)]
    design: DesignArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AllocMethod {
    Proportional,
    Neyman,
    Optimal,
    Power,
}

#[derive(Args, Debug)]
struct AllocateArgs {
    /// Strata CSV with columns N_h, S_h and optionally c_h (defaults to --frame).
    #[arg(long)]
    strata: Option<PathBuf>,
    #[arg(long, value_enum)]
    method: AllocMethod,
    #[arg(long)]
    n: Option<u64>,
    /// Total cost budget for the optimal allocation.
    #[arg(long)]
    budget: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    fixed_cost: f64,
    /// Exponent for the power allocation.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = TargetArg::Total)]
    target: TargetArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TargetArg {
    Total,
    MeanDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EstimatorKind {
    /// HT total, or the ratio of HT totals Ŷ/X̂ when --x is given without totals.
    Ht,
    Hajek,
    Ratio,
    Greg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CModel {
    Const,
    X,
    Custom,
}

#[derive(Args, Debug, Clone)]
struct EstimateArgs {
    #[arg(long, value_enum)]
    estimator: EstimatorKind,
    #[arg(long, default_value = "y")]
    y: String,
    /// Auxiliary columns, comma separated.
    #[arg(long, value_delimiter = ',')]
    x: Vec<String>,
    /// One-row CSV of population totals, headed by the auxiliary column names.
    #[arg(long)]
    totals: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = CModel::Const)]
    c_model: CModel,
    /// Column holding c_i when --c-model custom.
    #[arg(long)]
    c_col: Option<String>,
    /// Weight column; `pi` is used instead when present.
    #[arg(long, default_value = "weight")]
    weight: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VarMethod {
    Linearization,
    Jackknife,
    Brr,
}

#[derive(Args, Debug)]
struct VarianceArgs {
    #[command(flatten)]
    est: EstimateArgs,
    #[arg(long, value_enum, default_value_t = VarMethod::Linearization)]
    method: VarMethod,
    /// Report the replicate estimates.
    #[arg(long)]
    replicates: bool,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    #[arg(long, default_value = "squared")]
    entropy: String,
    /// Unit-level CSV with the base weight and constraint columns.
    #[arg(long)]
    constraints: Option<PathBuf>,
    /// One-row CSV of control totals; its header names the constraint columns.
    #[arg(long)]
    targets: PathBuf,
    /// Append the debiasing column g(d)c; its total is the `debias` column of the targets.
    #[arg(long)]
    debias: bool,
    #[arg(long)]
    entropy_family: bool,
    #[arg(long)]
    c_col: Option<String>,
    #[arg(long, default_value = "weight")]
    weight: String,
    /// Also write the calibrated weights to this CSV.
    #[arg(long)]
    weights_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DiagnoseArgs {
    #[arg(long, default_value = "y")]
    y: String,
    #[arg(long, default_value = "cluster")]
    cluster: String,
    #[arg(long)]
    rho: Option<f64>,
    /// Cluster (or subsample) size for the design effect.
    #[arg(long)]
    m: Option<f64>,
    #[arg(long)]
    deff: Option<f64>,
    /// Margin of error for a proportion; gives n = d⁻² and the cluster count.
    #[arg(long)]
    margin: Option<f64>,
}

#[derive(Args, Debug)]
struct NonresponseArgs {
    #[arg(long, default_value = "y")]
    y: String,
    #[arg(long, default_value = "delta")]
    delta: String,
    /// Response-model covariates; an intercept is prepended.
    #[arg(long, value_delimiter = ',')]
    x: Vec<String>,
    #[arg(long)]
    no_intercept: bool,
    #[arg(long, default_value = "weight")]
    weight: String,
}

#[derive(Args, Debug)]
struct SmallareaArgs {
    #[arg(long, default_value = "ghat")]
    direct: String,
    #[arg(long, default_value = "vg")]
    v: String,
    #[arg(long)]
    no_intercept: bool,
    /// Parametric bootstrap replicates for the MSE (0 = none).
    #[arg(long, default_value_t = 0)]
    bootstrap: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SimEstimator {
    Ht,
    Hh,
    Hajek,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    design: DesignArgs,
    #[arg(long, value_enum, default_value_t = SimEstimator::Ht)]
    estimator: SimEstimator,
    #[arg(long, default_value_t = 100_000)]
    replicates: usize,
    /// Enumerate the design instead of sampling.
    #[arg(long)]
    exact: bool,
}

/// Parse `argv` (program name first), run, and return the exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(&cli).and_then(|o| emit(&o, cli.out, out)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "svykit: {e}");
            exit_code(&e)
        }
    }
}

/// What a subcommand produced: a JSON document and its tabular form.
struct Output {
    json: Value,
    table: (Vec<String>, Vec<Vec<String>>),
}

fn emit(o: &Output, fmt: OutFormat, out: &mut dyn Write) -> Result<()> {
    let io = |e: std::io::Error| Error::Data(format!("write failed: {e}"));
    match fmt {
        OutFormat::Json => {
            let mut doc = o.json.clone();
            doc["schema"] = json!(SCHEMA_VERSION);
            let s = serde_json::to_string_pretty(&doc).map_err(|e| Error::Numerical(e.to_string()))?;
            writeln!(out, "{s}").map_err(io)
        }
        OutFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let csv_err = |e: csv::Error| Error::Data(e.to_string());
            w.write_record(&o.table.0).map_err(csv_err)?;
            for r in &o.table.1 {
                w.write_record(r).map_err(csv_err)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
            out.write_all(&bytes).map_err(io)
        }
    }
}

fn fmt_f(v: f64) -> String {
    // shortest round-trip representation
    format!("{v}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f).unwrap_or_default()
}

fn dispatch(cli: &Cli) -> Result<Output> {
    match &cli.command {
        Command::Draw(a) => cmd_draw(cli, a),
        Command::Allocate(a) => cmd_allocate(cli, a),
        Command::Estimate(a) => cmd_estimate(cli, a),
        Command::Variance(a) => cmd_variance(cli, a),
        Command::Calibrate(a) => cmd_calibrate(cli, a),
        Command::Diagnose(a) => cmd_diagnose(cli, a),
        Command::Nonresponse(a) => cmd_nonresponse(cli, a),
        Command::Smallarea(a) => cmd_smallarea(cli, a),
        Command::Simulate(a) => cmd_simulate(cli, a),
    }
}

fn need_frame(cli: &Cli) -> Result<&Path> {
    cli.frame.as_deref().ok_or_else(|| Error::Input("this subcommand needs --frame <csv>".into()))
}

// ---------------------------------------------------------------- designs

/// Read a design document. `.toml` files are TOML; anything else is tried
/// as JSON first and then TOML. The result is checked for valid nesting.
pub fn load_design(path: impl AsRef<Path>) -> Result<Design> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    if is_toml {
        parse_design_toml(&text)
    } else {
        parse_design_json(&text).or_else(|json_err| parse_design_toml(&text).map_err(|_| json_err))
    }
}

pub fn parse_design_json(text: &str) -> Result<Design> {
    let d: Design = serde_json::from_str(text).map_err(|e| Error::Input(format!("design schema: {e}")))?;
    d.validate()?;
    Ok(d)
}

pub fn parse_design_toml(text: &str) -> Result<Design> {
    let d: Design = toml::from_str(text).map_err(|e| Error::Input(format!("design schema: {e}")))?;
    d.validate()?;
    Ok(d)
}

pub fn design_to_json(d: &Design) -> String {
    serde_json::to_string_pretty(d).expect("designs serialize")
}

pub fn design_to_toml(d: &Design) -> Result<String> {
    toml::to_string(d).map_err(|e| Error::Input(format!("design cannot be written as TOML: {e}")))
}

fn build_design(a: &DesignArgs, frame: &Frame) -> Result<Design> {
    let p = Path::new(&a.design);
    if p.is_file() {
        return load_design(p);
    }
    let n = || a.n.ok_or_else(|| Error::Input(format!("design '{}' needs --n", a.design)));
    let d = match a.design.to_ascii_lowercase().replace('_', "-").as_str() {
        "srs" => Design::Srs { n: n()?, method: SrsMethod::default() },
        "srswr" => Design::Srswr { n: n()? },
        "bernoulli" => Design::Bernoulli {
            pi: a.pi.ok_or_else(|| Error::Input("bernoulli needs --pi".into()))?,
        },
        "poisson" => Design::Poisson { pi: compute_pips(&frame.mos(), n()?)? },
        "systematic" => Design::Systematic { n: n()? },
        "systematic-pips" => Design::SystematicPips { n: n()? },
        "pps-wr" => Design::PpsWr { n: n()?, method: PpsMethod::default(), bound: None },
        "brewer2" => Design::Brewer2 {},
        "durbin2" => Design::Durbin2 {},
        "chao" => Design::Chao { n: n()? },
        "rejective" | "rejective-poisson" => Design::RejectivePoisson { n: n()?, working: None },
        other => {
            if other.ends_with(".json") || other.ends_with(".toml") {
                return input(format!("design file {} not found", a.design));
            }
            return input(format!("unknown design '{}'", a.design));
        }
    };
    d.validate()?;
    Ok(d)
}

fn cmd_draw(cli: &Cli, a: &DrawArgs) -> Result<Output> {
    let frame = Frame::from_csv_path(need_frame(cli)?)?;
    let design = build_design(&a.design, &frame)?;
    let mut rng = RngStream::new(cli.seed, 0).rng();
    let s = draw(&design, &frame, &mut rng)?;
    let units: Vec<Value> = s
        .selections
        .iter()
        .map(|sel| {
            json!({
                "id": frame.unit(sel.unit).id,
                "index": sel.unit,
                "multiplicity": sel.multiplicity,
                "pi": sel.pi,
                "weight": sel.weight(),
            })
        })
        .collect();
    let rows = s
        .selections
        .iter()
        .map(|sel| {
            vec![
                frame.unit(sel.unit).id.clone(),
                sel.unit.to_string(),
                sel.multiplicity.to_string(),
                fmt_f(sel.pi),
                fmt_f(sel.weight()),
            ]
        })
        .collect();
    Ok(Output {
        json: json!({
            "command": "draw",
            "design": design,
            "seed": cli.seed,
            "size": s.len(),
            "with_replacement": s.with_replacement,
            "units": units,
        }),
        table: (cols(&["id", "index", "multiplicity", "pi", "weight"]), rows),
    })
}

fn cols(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

// ---------------------------------------------------------------- tables

/// A CSV held as strings with header lookup and row-aware number parsing.
struct Table {
    path: String,
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn read(path: &Path) -> Result<Table> {
        let name = path.display().to_string();
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::Data(format!("{name}: {e}")))?;
        let headers: Vec<String> =
            rdr.headers().map_err(|e| Error::Data(format!("{name}: {e}")))?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Data(format!("{name}: row {}: {e}", i + 2)))?;
            rows.push(rec.iter().map(str::to_string).collect());
        }
        Ok(Table { path: name, headers, rows })
    }

    fn col(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    fn require(&self, name: &str) -> Result<usize> {
        self.col(name).ok_or_else(|| Error::Data(format!("{}: missing column `{name}`", self.path)))
    }

    fn parse(&self, row: usize, c: usize) -> Result<f64> {
        let s = &self.rows[row][c];
        s.parse::<f64>().map_err(|_| {
            Error::Data(format!("{}: row {}, column `{}`: {s:?} is not a number", self.path, row + 2, self.headers[c]))
        })
    }

    fn numbers(&self, name: &str) -> Result<Vec<f64>> {
        let c = self.require(name)?;
        (0..self.rows.len()).map(|r| self.parse(r, c)).collect()
    }

    /// Blank cells become `None`.
    fn optional_numbers(&self, name: &str) -> Result<Vec<Option<f64>>> {
        let c = self.require(name)?;
        (0..self.rows.len())
            .map(|r| if self.rows[r][c].is_empty() { Ok(None) } else { self.parse(r, c).map(Some) })
            .collect()
    }

    fn first_present(&self, names: &[&str]) -> Result<Vec<f64>> {
        for n in names {
            if self.col(n).is_some() {
                return self.numbers(n);
            }
        }
        Err(Error::Data(format!("{}: needs one of the columns {}", self.path, names.join(", "))))
    }

    /// Label column mapped to indices in order of first appearance.
    fn labels(&self, name: &str) -> Option<Vec<usize>> {
        let c = self.col(name)?;
        let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
        Some(
            self.rows
                .iter()
                .map(|r| {
                    let k = seen.len();
                    *seen.entry(r[c].as_str()).or_insert(k)
                })
                .collect(),
        )
    }

    fn ids(&self) -> Vec<String> {
        match self.col("id") {
            Some(c) => self.rows.iter().map(|r| r[c].clone()).collect(),
            None => (1..=self.rows.len()).map(|i| i.to_string()).collect(),
        }
    }

    /// Columns named `prefix1`, `prefix2`, ... in numeric order.
    fn numbered(&self, prefix: &str) -> Vec<String> {
        let mut v: Vec<(usize, String)> = self
            .headers
            .iter()
            .filter_map(|h| h.strip_prefix(prefix).and_then(|s| s.parse().ok()).map(|k| (k, h.clone())))
            .collect();
        v.sort();
        v.into_iter().map(|(_, h)| h).collect()
    }

    /// Rows of the named columns.
    fn matrix(&self, names: &[String]) -> Result<Vec<Vec<f64>>> {
        let cs: Vec<Vec<f64>> = names.iter().map(|n| self.numbers(n)).collect::<Result<_>>()?;
        Ok((0..self.rows.len()).map(|r| cs.iter().map(|c| c[r]).collect()).collect())
    }

    /// Values of a one-row table by column name.
    fn single_row(&self) -> Result<BTreeMap<String, f64>> {
        if self.rows.len() != 1 {
            return Err(Error::Data(format!("{}: expected exactly one data row, found {}", self.path, self.rows.len())));
        }
        (0..self.headers.len()).map(|c| Ok((self.headers[c].clone(), self.parse(0, c)?))).collect()
    }
}

/// Sample from a unit-level table: `pi` column, else the weight column as
/// 1/π. `stratum` and `cluster` columns label strata and PSUs.
fn table_sample(t: &Table, weight: &str) -> Result<Sample> {
    let pi: Vec<f64> = if t.col("pi").is_some() {
        t.numbers("pi")?
    } else {
        t.numbers(weight)?.into_iter().map(|w| 1.0 / w).collect()
    };
    if let Some(k) = pi.iter().position(|p| !(*p > 0.0 && p.is_finite())) {
        return Err(Error::Data(format!("{}: row {}: inclusion probability must be positive", t.path, k + 2)));
    }
    let strata = t.labels("stratum");
    let psus = t.labels("cluster");
    let sel = (0..pi.len())
        .map(|k| {
            let mut s = Selection::new(k, pi[k]);
            s.stratum = strata.as_ref().map(|v| v[k]);
            s.psu = psus.as_ref().map(|v| v[k]);
            s
        })
        .collect();
    let s = Sample::new("table", sel);
    s.check()?;
    Ok(s)
}

// ---------------------------------------------------------------- allocate

fn cmd_allocate(cli: &Cli, a: &AllocateArgs) -> Result<Output> {
    let path = a.strata.as_deref().or(cli.frame.as_deref()).ok_or_else(|| Error::Input("allocate needs --strata <csv>".into()))?;
    let t = Table::read(path)?;
    let size = t.first_present(&["N_h", "N", "size"])?;
    let sd = t.first_present(&["S_h", "S", "sd"])?;
    let cost = if ["c_h", "c", "cost"].iter().any(|c| t.col(c).is_some()) {
        t.first_present(&["c_h", "c", "cost"])?
    } else {
        vec![1.0; size.len()]
    };
    let mut strata = Vec::with_capacity(size.len());
    for h in 0..size.len() {
        if !(size[h] >= 0.0 && size[h].fract() == 0.0) {
            return Err(Error::Data(format!("{}: row {}: N_h must be a whole number", t.path, h + 2)));
        }
        strata.push(StratumSpec { size: size[h] as u64, sd: sd[h], cost: cost[h] });
    }
    let need_n = || a.n.ok_or_else(|| Error::Input("this method needs --n".into()));
    let target = match a.target {
        TargetArg::Total => OptimalTarget::Total,
        TargetArg::MeanDifference => OptimalTarget::MeanDifference,
    };
    let alloc = match a.method {
        AllocMethod::Proportional => {
            let n = need_n()?;
            allocation::proportional_allocation(&AllocationProblem::with_n(strata, n), n)?
        }
        AllocMethod::Neyman => {
            let unit: Vec<StratumSpec> = strata.into_iter().map(|s| StratumSpec { cost: 1.0, ..s }).collect();
            allocation::optimal_allocation(&AllocationProblem::with_n(unit, need_n()?), target)?
        }
        AllocMethod::Optimal => {
            let budget = match (a.budget, a.n) {
                (Some(total), _) => Budget::Cost { total, fixed: a.fixed_cost },
                (None, Some(n)) => Budget::SampleSize(n),
                (None, None) => return input("optimal allocation needs --budget or --n"),
            };
            allocation::optimal_allocation(&AllocationProblem { strata, budget }, target)?
        }
        AllocMethod::Power => {
            let n = need_n()?;
            allocation::power_allocation(&AllocationProblem::with_n(strata, n), a.alpha, n)?
        }
    };
    let method = format!("{:?}", a.method).to_lowercase();
    let rows = alloc
        .n_h
        .iter()
        .enumerate()
        .map(|(h, n)| vec![h.to_string(), n.to_string(), fmt_f(alloc.continuous[h])])
        .collect();
    Ok(Output {
        json: json!({
            "command": "allocate",
            "method": method,
            "n": alloc.n_h.iter().sum::<u64>(),
            "n_h": alloc.n_h,
            "variance": alloc.variance,
            "capped": alloc.capped,
            "floored": alloc.floored,
            "continuous": alloc.continuous,
        }),
        table: (cols(&["stratum", "n_h", "continuous"]), rows),
    })
}

// ---------------------------------------------------------------- estimate

/// Everything an estimator needs, read once from the sample table.
struct EstInput {
    sample: Sample,
    y: Vec<f64>,
    x: Vec<Vec<f64>>,
    totals: Option<Vec<f64>>,
    c: Option<Vec<f64>>,
    kind: EstimatorKind,
}

fn estimate_input(cli: &Cli, a: &EstimateArgs) -> Result<EstInput> {
    let t = Table::read(need_frame(cli)?)?;
    let sample = table_sample(&t, &a.weight)?;
    let y = t.numbers(&a.y)?;
    let x = if a.x.is_empty() { Vec::new() } else { t.matrix(&a.x)? };
    let totals = match &a.totals {
        Some(p) => {
            let row = Table::read(p)?.single_row()?;
            Some(
                a.x.iter()
                    .map(|n| row.get(n).copied().ok_or_else(|| Error::Data(format!("totals have no column `{n}`"))))
                    .collect::<Result<Vec<_>>>()?,
            )
        }
        None => None,
    };
    let c = match a.c_model {
        CModel::Const => None,
        CModel::X => {
            if a.x.is_empty() {
                return input("--c-model x needs --x");
            }
            Some(x.iter().map(|r| r[0]).collect())
        }
        CModel::Custom => {
            let col = a.c_col.as_deref().ok_or_else(|| Error::Input("--c-model custom needs --c-col".into()))?;
            Some(t.numbers(col)?)
        }
    };
    let inp = EstInput { sample, y, x, totals, c, kind: a.estimator };
    match inp.kind {
        EstimatorKind::Ratio if inp.x.first().is_none_or(|r| r.len() != 1) || inp.totals.is_none() => {
            input("ratio estimator needs one --x column and --totals")
        }
        EstimatorKind::Greg if inp.x.is_empty() || inp.totals.is_none() => input("GREG needs --x and --totals"),
        EstimatorKind::Ht if !inp.x.is_empty() && inp.x[0].len() != 1 => input("ht takes at most one --x column"),
        _ => Ok(inp),
    }
}

impl EstInput {
    fn x_col(&self) -> Vec<f64> {
        self.x.iter().map(|r| r[0]).collect()
    }

    /// Point estimate as a function of the weights, for replication.
    fn point(&self, w: &[f64]) -> f64 {
        let ws = |v: &[f64]| -> f64 { w.iter().zip(v).map(|(a, b)| a * b).sum() };
        match self.kind {
            EstimatorKind::Ht if self.x.is_empty() => ws(&self.y),
            EstimatorKind::Ht => ws(&self.y) / ws(&self.x_col()),
            EstimatorKind::Hajek => ws(&self.y) / w.iter().sum::<f64>(),
            EstimatorKind::Ratio => self.totals.as_ref().unwrap()[0] * ws(&self.y) / ws(&self.x_col()),
            EstimatorKind::Greg => {
                let ones = vec![1.0; w.len()];
                let c = self.c.as_deref().unwrap_or(&ones);
                // zero replicate weights drop out of the fit
                let keep: Vec<usize> = (0..w.len()).filter(|&k| w[k] > 0.0).collect();
                let pick = |v: &[f64]| keep.iter().map(|&k| v[k]).collect::<Vec<_>>();
                let xs: Vec<Vec<f64>> = keep.iter().map(|&k| self.x[k].clone()).collect();
                match regression_fit(&pick(w), &pick(&self.y), &xs, self.totals.as_ref().unwrap(), &pick(c), true) {
                    Ok(f) => f.weights.iter().zip(pick(&self.y)).map(|(a, b)| a * b).sum(),
                    Err(_) => f64::NAN,
                }
            }
        }
    }

    /// Linearization with the with-replacement PSU engine.
    fn linearized(&self) -> Result<Estimate> {
        let engine = Engine::Simplified;
        let s = &self.sample;
        match self.kind {
            EstimatorKind::Ht if self.x.is_empty() => {
                let e = Estimate::point(self.point(&s.weights()), "ht_total");
                Ok(e.with_variance(engine_variance(s, &self.y, &engine)?))
            }
            EstimatorKind::Ht => {
                let w = s.weights();
                let x = self.x_col();
                let xh: f64 = w.iter().zip(&x).map(|(a, b)| a * b).sum();
                if xh == 0.0 {
                    return Err(Error::Numerical("HT estimate of the x total is zero".into()));
                }
                let r = self.point(&w);
                let z: Vec<f64> = self.y.iter().zip(&x).map(|(y, x)| (y - r * x) / xh).collect();
                let e = Estimate::point(r, "ht_ratio").diag("x_hat", xh);
                Ok(e.with_variance(engine_variance(s, &z, &engine)?))
            }
            EstimatorKind::Hajek => linearized_variance(s, &self.y, &Residuals::Hajek, &engine),
            EstimatorKind::Ratio => {
                let spec = Residuals::Ratio { x: self.x_col(), x_total: self.totals.as_ref().unwrap()[0] };
                linearized_variance(s, &self.y, &spec, &engine)
            }
            EstimatorKind::Greg => {
                let spec = Residuals::Regression {
                    x: self.x.clone(),
                    x_totals: self.totals.clone().unwrap(),
                    c: self.c.clone(),
                };
                linearized_variance(s, &self.y, &spec, &engine)
            }
        }
    }
}

fn estimate_output(command: &str, e: &Estimate, extra: Option<(&str, Value)>) -> Output {
    let mut j = json!({
        "command": command,
        "value": e.value,
        "variance": e.variance,
        "se": e.se,
        "ci95": e.ci95,
        "method": e.method,
        "flags": e.flags,
        "diagnostics": e.diagnostics,
    });
    if let Some((k, v)) = extra {
        j[k] = v;
    }
    let (lo, hi) = e.ci95.map_or((None, None), |c| (Some(c[0]), Some(c[1])));
    Output {
        json: j,
        table: (
            cols(&["method", "value", "variance", "se", "ci_low", "ci_high"]),
            vec![vec![e.method.clone(), fmt_f(e.value), fmt_opt(e.variance), fmt_opt(e.se), fmt_opt(lo), fmt_opt(hi)]],
        ),
    }
}

fn cmd_estimate(cli: &Cli, a: &EstimateArgs) -> Result<Output> {
    let inp = estimate_input(cli, a)?;
    let e = inp.linearized()?;
    Ok(estimate_output("estimate", &e, None))
}

fn cmd_variance(cli: &Cli, a: &VarianceArgs) -> Result<Output> {
    let inp = estimate_input(cli, &a.est)?;
    let theta = inp.point(&inp.sample.weights());
    let (e, reps) = match a.method {
        VarMethod::Linearization => (inp.linearized()?, None),
        VarMethod::Jackknife => {
            let labelled = inp.sample.selections.iter().any(|s| s.psu.is_some() || s.stratum.is_some());
            let structure = if labelled { JackknifeStructure::StratifiedPsu } else { JackknifeStructure::Iid };
            let (reps, factors) = jackknife_replicates(&inp.sample, structure)?;
            let vals: Vec<f64> = reps.iter().map(|r| inp.point(&r.weights)).collect();
            let mut by: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
            for (r, v) in reps.iter().zip(&vals) {
                by.entry(r.stratum).or_default().push(*v);
            }
            let v: f64 = by
                .iter()
                .map(|(h, xs)| {
                    let m = xs.iter().sum::<f64>() / xs.len() as f64;
                    factors[h] * xs.iter().map(|x| (x - m).powi(2)).sum::<f64>()
                })
                .sum();
            (Estimate::point(theta, "jackknife").with_variance(v), Some(vals))
        }
        VarMethod::Brr => {
            let h = inp.sample.selections.iter().filter_map(|s| s.stratum).max().map_or(1, |m| m + 1);
            let reps = brr_replicates(&inp.sample, &hadamard_for_strata(h)?)?;
            let vals: Vec<f64> = reps.iter().map(|w| inp.point(w)).collect();
            let v = vals.iter().map(|t| (t - theta).powi(2)).sum::<f64>() / vals.len() as f64;
            (Estimate::point(theta, "brr").with_variance(v), Some(vals))
        }
    };
    if let Some(k) = reps.as_ref().and_then(|r| r.iter().position(|v| !v.is_finite())) {
        return Err(Error::Numerical(format!("replicate {k} estimate is not finite")));
    }
    let e = match &reps {
        Some(r) => e.diag("replicates", r.len() as f64),
        None => e,
    };
    let extra = if a.replicates { reps.map(|r| ("replicate_estimates", json!(r))) } else { None };
    Ok(estimate_output("variance", &e, extra))
}

// ---------------------------------------------------------------- calibrate

fn cmd_calibrate(cli: &Cli, a: &CalibrateArgs) -> Result<Output> {
    let path = a.constraints.as_deref().or(cli.frame.as_deref()).ok_or_else(|| Error::Input("calibrate needs --constraints <csv>".into()))?;
    let t = Table::read(path)?;
    let entropy = Entropy::parse(&a.entropy)?;
    let trow = Table::read(&a.targets)?.single_row()?;
    let names: Vec<String> = trow.keys().filter(|k| k.as_str() != "debias").cloned().collect();
    // keep the column order of the targets file
    let order = Table::read(&a.targets)?.headers;
    let names: Vec<String> = order.into_iter().filter(|h| names.contains(h)).collect();
    let targets: Vec<f64> = names.iter().map(|n| trow[n]).collect();
    let z = t.matrix(&names)?;
    let sample = table_sample(&t, &a.weight)?;
    let v = match &a.c_col {
        Some(c) => Some(t.numbers(c)?),
        None => None,
    };
    let debias_target = if a.debias {
        Some(*trow.get("debias").ok_or_else(|| Error::Input("--debias needs a `debias` column in the targets".into()))?)
    } else {
        None
    };
    let p = CalibrationProblem {
        d: sample.weights(),
        z,
        targets,
        entropy,
        family: if a.entropy_family { Family::Entropy } else { Family::Divergence },
        v,
        debias_target,
    };
    let r = solve_entropy(&p, &SolverOptions::default())?;
    let ids = t.ids();
    let rows: Vec<Vec<String>> =
        (0..ids.len()).map(|k| vec![ids[k].clone(), fmt_f(p.d[k]), fmt_f(r.weights[k])]).collect();
    let header = cols(&["id", "base_weight", "weight"]);
    if let Some(path) = &a.weights_out {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let err = |e: csv::Error| Error::Data(e.to_string());
        w.write_record(&header).map_err(err)?;
        for row in &rows {
            w.write_record(row).map_err(err)?;
        }
        w.flush().map_err(|e| Error::Data(e.to_string()))?;
    }
    Ok(Output {
        json: json!({
            "command": "calibrate",
            "entropy": entropy,
            "constraints": names,
            "lambda": r.lambda,
            "residual": r.residual,
            "iterations": r.iterations,
            "pseudo_inverse": r.pseudo_inverse,
            "weights": r.weights,
        }),
        table: (header, rows),
    })
}

// ---------------------------------------------------------------- diagnose

fn cmd_diagnose(cli: &Cli, a: &DiagnoseArgs) -> Result<Output> {
    let mut j = json!({ "command": "diagnose" });
    let mut rows = Vec::new();
    let mut rho = a.rho;
    let mut m = a.m;
    let mut deff = a.deff;
    if let Some(path) = &cli.frame {
        let t = Table::read(path)?;
        let y = t.numbers(&a.y)?;
        let lab = t.labels(&a.cluster).ok_or_else(|| Error::Data(format!("{}: missing column `{}`", t.path, a.cluster)))?;
        let k = lab.iter().max().map_or(0, |m| m + 1);
        let mut clusters = vec![Vec::new(); k];
        for (v, c) in y.iter().zip(&lab) {
            clusters[*c].push(*v);
        }
        let an = diagnostics::anova(&clusters)?;
        rho = rho.or(Some(an.rho));
        m = m.or(Some(an.m_bar));
        let d = an.deff();
        deff = deff.or(Some(d));
        for (k, v) in [("sst", an.sst), ("ssb", an.ssb), ("ssw", an.ssw), ("rho", an.rho), ("delta", an.delta), ("deff", d)] {
            rows.push(vec![k.to_string(), fmt_f(v)]);
        }
        j["anova"] = json!(an);
    }
    if deff.is_none() {
        if let (Some(r), Some(m)) = (rho, m) {
            deff = Some(diagnostics::design_effect(m, r)?);
        }
    }
    if let Some(d) = deff {
        j["deff"] = json!(d);
        if cli.frame.is_none() {
            rows.push(vec!["deff".into(), fmt_f(d)]);
        }
    }
    if let Some(margin) = a.margin {
        let n = diagnostics::proportion_size_rule(margin)?;
        j["n_srs"] = json!(n);
        rows.push(vec!["n_srs".into(), fmt_f(n)]);
        if let (Some(d), Some(m)) = (deff, m) {
            let c = diagnostics::required_clusters(n, d, m)?;
            j["clusters"] = json!(c);
            rows.push(vec!["clusters".into(), fmt_f(c)]);
        }
    }
    if rows.is_empty() {
        return input("diagnose needs --frame, --rho with --m, --deff or --margin");
    }
    Ok(Output { json: j, table: (cols(&["quantity", "value"]), rows) })
}

// ---------------------------------------------------------------- nonresponse

fn cmd_nonresponse(cli: &Cli, a: &NonresponseArgs) -> Result<Output> {
    let t = Table::read(need_frame(cli)?)?;
    let sample = table_sample(&t, &a.weight)?;
    let delta: Vec<bool> = t
        .numbers(&a.delta)?
        .iter()
        .enumerate()
        .map(|(k, &d)| match d {
            1.0 => Ok(true),
            0.0 => Ok(false),
            _ => Err(Error::Data(format!("{}: row {}: `{}` must be 0 or 1", t.path, k + 2, a.delta))),
        })
        .collect::<Result<_>>()?;
    let y = t.optional_numbers(&a.y)?;
    let cov = if a.x.is_empty() { Vec::new() } else { t.matrix(&a.x)? };
    let x: Vec<Vec<f64>> = (0..delta.len())
        .map(|k| {
            let mut r = if a.no_intercept { Vec::new() } else { vec![1.0] };
            if let Some(c) = cov.get(k) {
                r.extend(c);
            }
            r
        })
        .collect();
    let data = ResponseData::new(sample, delta, x, y)?;
    let fit = fit_propensity(&data, None)?;
    let v = ps_variance(&data, &fit.p_hat, &fit.h, None, &Engine::Simplified)?;
    let extra = json!({ "phi": fit.phi, "iterations": fit.iterations, "v1": v.v1, "v2": v.v2 });
    Ok(estimate_output("nonresponse", &v.estimate, Some(("propensity", extra))))
}

// ---------------------------------------------------------------- smallarea

fn cmd_smallarea(cli: &Cli, a: &SmallareaArgs) -> Result<Output> {
    let t = Table::read(need_frame(cli)?)?;
    let direct = t.numbers(&a.direct)?;
    let v = t.numbers(&a.v)?;
    let names = t.numbered("x");
    let xs = if names.is_empty() { vec![Vec::new(); direct.len()] } else { t.matrix(&names)? };
    let x: Vec<Vec<f64>> = xs
        .into_iter()
        .map(|r| if a.no_intercept { r } else { std::iter::once(1.0).chain(r).collect() })
        .collect();
    let model = fit_fay_herriot(&AreaData::new(direct, v, x)?)?;
    let boot = if a.bootstrap > 0 { Some(bootstrap_mse(&model, a.bootstrap, cli.seed)?) } else { None };
    let ids = t.ids();
    let mut areas = Vec::new();
    let mut rows = Vec::new();
    for g in 0..model.data.len() {
        let e = model.eblup(g)?;
        let pr = model.prasad_rao_mse(g);
        let b = boot.as_ref().map(|b| b[g]);
        areas.push(json!({
            "area": ids[g],
            "direct": model.data.direct[g],
            "synthetic": model.synthetic(g),
            "eblup": e.value,
            "mse_prasad_rao": pr,
            "mse_bootstrap": b,
        }));
        rows.push(vec![ids[g].clone(), fmt_f(model.data.direct[g]), fmt_f(e.value), fmt_f(pr), fmt_opt(b)]);
    }
    Ok(Output {
        json: json!({
            "command": "smallarea",
            "beta": model.beta,
            "sigma2_u": model.sigma2_u,
            "boundary": model.boundary,
            "iterations": model.iterations,
            "areas": areas,
        }),
        table: (cols(&["area", "direct", "eblup", "mse_prasad_rao", "mse_bootstrap"]), rows),
    })
}

// ---------------------------------------------------------------- simulate

fn cmd_simulate(cli: &Cli, a: &SimulateArgs) -> Result<Output> {
    let frame = Frame::from_csv_path(need_frame(cli)?)?;
    let design = build_design(&a.design, &frame)?;
    let y = frame.y(0)?;
    let total: f64 = y.iter().sum();
    let (truth, kind) = match a.estimator {
        SimEstimator::Ht => (total, "ht_total"),
        SimEstimator::Hh => (total, "hh_total"),
        SimEstimator::Hajek => (total / frame.len() as f64, "hajek_mean"),
    };
    let est = |s: &Sample| -> Result<f64> {
        let ys = s.gather(&y);
        Ok(match a.estimator {
            SimEstimator::Ht => crate::estimators::ht_total(s, &ys)?.value,
            SimEstimator::Hh => crate::estimators::hh_total(s, &ys)?.value,
            SimEstimator::Hajek => crate::estimators::hajek_mean(s, &ys)?.value,
        })
    };
    let j = if a.exact {
        let failed = std::cell::RefCell::new(None);
        let mom = exact_expectation(&design, &frame, |s| {
            est(s).unwrap_or_else(|e| {
                failed.borrow_mut().get_or_insert(e);
                f64::NAN
            })
        })?;
        if let Some(e) = failed.into_inner() {
            return Err(e);
        }
        json!({
            "command": "simulate",
            "estimator": kind,
            "exact": true,
            "mean": mom.mean,
            "var": mom.variance,
            "support_size": mom.support_size,
            "truth": truth,
            "bias": mom.mean - truth,
        })
    } else {
        let mc = monte_carlo(&design, &frame, est, a.replicates, cli.seed)?;
        json!({
            "command": "simulate",
            "estimator": kind,
            "exact": false,
            "mean": mc.mean,
            "var": mc.var,
            "se_of_mean": mc.se_of_mean,
            "replicates": mc.replicates,
            "seed": mc.seed,
            "truth": truth,
            "z_score": mc.z_score(truth),
        })
    };
    let keys = ["mean", "var", "truth", "z_score"];
    let row = keys.iter().map(|k| j.get(*k).and_then(Value::as_f64).map(fmt_f).unwrap_or_default()).collect();
    Ok(Output { json: j, table: (cols(&keys), vec![row]) })
}
