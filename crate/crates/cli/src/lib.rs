//! Subcommands of the `poptlab` executable.
//!
//! Every command reads one JSON document, runs a library pipeline and renders
//! a single report. [`run`] never touches standard output so that the binary
//! and the tests share one code path.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use poptlab_core::bell::{chsh_from_table, optimize_chsh, ChshOptimum};
use poptlab_core::dilation::{naimark_dilate, stinespring_dilate, Dilation, Povm, PovmJson, COMPRESSION_TOL};
use poptlab_core::fixtures::{generate, Generated, GeneratorKind, GeneratorSpec};
use poptlab_core::jordan::{classify, map_from_state, ClassificationReport, ClassifyConfig, Verdict};
use poptlab_core::measures::{
    check_no_disturbance, check_no_signalling, check_popt, ConstraintReport, OperatorMeasure, PoptCertificate,
    PoptOptions, ProductMeasure, Reconstruction, ReconstructionOptions, SamplePlan, TabulatedJson, TabulatedMeasure,
};
use poptlab_core::operator::{ComplexMatrix, HermitianOperator, EIG_TOL, HERM_TOL};
use poptlab_core::Error;
use serde::Serialize;
use serde_json::Value;

pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const VIOLATED: i32 = 2;
    pub const POPT_ONLY: i32 = 10;
    pub const NOT_POPT: i32 = 20;
    pub const INVALID: i32 = 30;
    pub const INCONSISTENT: i32 = 40;
    pub const INCOMPLETE: i32 = 41;
}

#[derive(Debug, Parser)]
#[command(
    name = "poptlab",
    version,
    about = "Product measures, POPT states and their dilations"
)]
pub struct Cli {
    #[command(flatten)]
    pub config: RunConfig,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    /// Hermiticity tolerance.
    #[arg(long, global = true, env = "POPTLAB_TOL_HERM", default_value_t = HERM_TOL)]
    pub tol_herm: f64,
    /// Eigenvalue tolerance for positivity.
    #[arg(long, global = true, env = "POPTLAB_TOL_EIG", default_value_t = EIG_TOL)]
    pub tol_eig: f64,
    /// Tolerance of the product-state minimum.
    #[arg(long, global = true, env = "POPTLAB_TOL_POPT", default_value_t = 1e-8)]
    pub tol_popt: f64,
    /// Tolerance of the orientation defects.
    #[arg(long, global = true, env = "POPTLAB_TOL_ORIENTATION", default_value_t = 1e-8)]
    pub tol_orientation: f64,
    /// Tolerance of the constraint checkers.
    #[arg(long, global = true, env = "POPTLAB_TOL_CHECK", default_value_t = 1e-9)]
    pub tol_check: f64,
    /// Largest accepted reconstruction residual.
    #[arg(long, global = true, env = "POPTLAB_TOL_RESIDUAL", default_value_t = 1e-8)]
    pub tol_residual: f64,
    #[arg(long, global = true, env = "POPTLAB_RESTARTS", default_value_t = 64)]
    pub restarts: usize,
    /// Random operator pairs for the orientation and Jordan probes.
    #[arg(long, global = true, env = "POPTLAB_SAMPLES", default_value_t = 50)]
    pub samples: usize,
    /// Random context pairs for the constraint checkers.
    #[arg(long, global = true, env = "POPTLAB_CONTEXTS", default_value_t = 200)]
    pub contexts: usize,
    #[arg(long, global = true, env = "POPTLAB_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, env = "POPTLAB_FORMAT", value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write the report here instead of standard output.
    #[arg(short, long, global = true, env = "POPTLAB_OUTPUT")]
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            tol_herm: HERM_TOL,
            tol_eig: EIG_TOL,
            tol_popt: 1e-8,
            tol_orientation: 1e-8,
            tol_check: 1e-9,
            tol_residual: 1e-8,
            restarts: 64,
            samples: 50,
            contexts: 200,
            seed: 0,
            format: Format::Json,
            output: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), Failure> {
        let tols = [
            ("--tol-herm", self.tol_herm),
            ("--tol-eig", self.tol_eig),
            ("--tol-popt", self.tol_popt),
            ("--tol-orientation", self.tol_orientation),
            ("--tol-check", self.tol_check),
            ("--tol-residual", self.tol_residual),
        ];
        for (name, t) in tols {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Failure::new(
                    exit::FAILURE,
                    format!("{name} must be a positive number, got {t}"),
                ));
            }
        }
        if self.restarts == 0 || self.samples == 0 {
            return Err(Failure::new(exit::FAILURE, "--restarts and --samples must be positive"));
        }
        Ok(())
    }

    pub fn classify_config(&self) -> ClassifyConfig {
        ClassifyConfig {
            herm_tol: self.tol_herm,
            eig_tol: self.tol_eig,
            popt: self.popt_options(),
            orientation_tol: self.tol_orientation,
            samples: self.samples,
            seed: self.seed,
            ..ClassifyConfig::default()
        }
    }

    fn popt_options(&self) -> PoptOptions {
        PoptOptions {
            restarts: self.restarts,
            tol: self.tol_popt,
            seed: self.seed,
            ..PoptOptions::default()
        }
    }

    fn sample_plan(&self) -> SamplePlan {
        SamplePlan {
            contexts: self.contexts,
            seed: self.seed,
            structured: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Constraint {
    NoSignalling,
    NoDisturbance,
    Popt,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify a bipartite operator: quantum state, POPT only, or not POPT.
    Classify {
        /// State JSON, or `-` for standard input.
        path: PathBuf,
        /// Subsystem dimensions as `d1,d2` when the input does not carry them.
        #[arg(long, value_parser = parse_dims)]
        dims: Option<(usize, usize)>,
    },
    /// Reconstruct the operator behind a tabulated or operator-backed measure.
    Extend {
        path: PathBuf,
        #[arg(long, value_parser = parse_dims)]
        dims: Option<(usize, usize)>,
        /// Accept local dimension 2.
        #[arg(long)]
        allow_qubit: bool,
    },
    /// Naimark dilation of a POVM, or Stinespring lift of the map of a state.
    Dilate {
        path: PathBuf,
        #[arg(long, value_parser = parse_dims)]
        dims: Option<(usize, usize)>,
    },
    /// CHSH value: optimized for a state, evaluated for a two-setting table.
    Chsh {
        path: PathBuf,
        #[arg(long, value_parser = parse_dims)]
        dims: Option<(usize, usize)>,
    },
    /// Check one constraint on a measure.
    Check {
        #[arg(value_enum)]
        constraint: Constraint,
        path: PathBuf,
        #[arg(long, value_parser = parse_dims)]
        dims: Option<(usize, usize)>,
    },
    /// Generate a fixture, e.g. `generate swap_popt 3` or `generate "werner(0.2)" 3 3`.
    Generate {
        kind: String,
        d1: usize,
        /// Defaults to `d1`.
        d2: Option<usize>,
    },
}

fn parse_dims(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once([',', 'x'])
        .ok_or_else(|| format!("expected d1,d2, got {s:?}"))?;
    let p = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
    Ok((p(a)?, p(b)?))
}

/// A command that could not produce a report.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InconsistentOracle { .. } | Error::Reconstruction(_) => exit::INCONSISTENT,
            Error::UnsupportedQuery(_) => exit::INCOMPLETE,
            Error::NotCompletelyPositive { .. } => exit::VIOLATED,
            _ => exit::INVALID,
        };
        Failure::new(code, e.to_string())
    }
}

/// A rendered report with its exit code and optional diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub body: String,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChshTableReport {
    pub value: f64,
    pub no_signalling: ConstraintReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ChshReport {
    Optimized(ChshOptimum),
    Table(ChshTableReport),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum CheckReport {
    Constraint(ConstraintReport),
    Popt(PoptCertificate),
}

pub fn run(cli: &Cli) -> Result<Outcome, Failure> {
    let cfg = &cli.config;
    cfg.validate()?;
    match &cli.command {
        Command::Classify { path, dims } => {
            let doc = read_json(path)?;
            let report = cmd_classify(&doc, *dims, cfg)?;
            let code = match report.verdict {
                Verdict::QuantumState => exit::OK,
                Verdict::PoptOnly => exit::POPT_ONLY,
                Verdict::NotPopt => exit::NOT_POPT,
                Verdict::Invalid => exit::INVALID,
            };
            let diagnostics = report.reasons.clone();
            render(cfg, &report, code, diagnostics, text_classify)
        }
        Command::Extend {
            path,
            dims,
            allow_qubit,
        } => {
            let doc = read_json(path)?;
            let rec = cmd_extend(&doc, *dims, *allow_qubit, cfg)?;
            render(cfg, &rec, exit::OK, vec![], text_extend)
        }
        Command::Dilate { path, dims } => {
            let doc = read_json(path)?;
            let d = cmd_dilate(&doc, *dims, cfg)?;
            let (code, diag) = if d.residual <= COMPRESSION_TOL {
                (exit::OK, vec![])
            } else {
                (
                    exit::VIOLATED,
                    vec![format!(
                        "compression residual {:e} exceeds {COMPRESSION_TOL:e}",
                        d.residual
                    )],
                )
            };
            render(cfg, &d, code, diag, text_dilate)
        }
        Command::Chsh { path, dims } => {
            let doc = read_json(path)?;
            let r = cmd_chsh(&doc, *dims, cfg)?;
            render(cfg, &r, exit::OK, vec![], text_chsh)
        }
        Command::Check { constraint, path, dims } => {
            let doc = read_json(path)?;
            let r = cmd_check(&doc, *constraint, *dims, cfg)?;
            let (ok, witness) = match &r {
                CheckReport::Constraint(c) => (c.satisfied, c.witness.clone()),
                CheckReport::Popt(p) => (p.is_popt, Some(format!("product state with value {:e}", p.min_value))),
            };
            let (code, diag) = if ok {
                (exit::OK, vec![])
            } else {
                (
                    exit::VIOLATED,
                    vec![format!("violated at {}", witness.unwrap_or_default())],
                )
            };
            render(cfg, &r, code, diag, text_check)
        }
        Command::Generate { kind, d1, d2 } => {
            let g = cmd_generate(kind, (*d1, d2.unwrap_or(*d1)), cfg.seed)?;
            render(cfg, &g, exit::OK, vec![], text_generate)
        }
    }
}

fn render<T: Serialize>(
    cfg: &RunConfig,
    report: &T,
    code: i32,
    diagnostics: Vec<String>,
    text: fn(&T) -> String,
) -> Result<Outcome, Failure> {
    let body = match cfg.format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(report).map_err(|e| Failure::new(exit::FAILURE, e.to_string()))?;
            s.push('\n');
            s
        }
        Format::Text => text(report),
    };
    Ok(Outcome {
        code,
        body,
        diagnostics,
    })
}

/// Reads and parses a JSON document; `-` reads standard input.
pub fn read_json(path: &Path) -> Result<Value, Failure> {
    let (src, text) = if path == Path::new("-") {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| Failure::new(exit::FAILURE, format!("<stdin>: {e}")))?;
        ("<stdin>".to_string(), s)
    } else {
        let s = std::fs::read_to_string(path)
            .map_err(|e| Failure::new(exit::FAILURE, format!("{}: {e}", path.display())))?;
        (path.display().to_string(), s)
    };
    serde_json::from_str(&text).map_err(|e| Failure::new(exit::FAILURE, format!("{src}: {e}")))
}

fn schema<T: serde::de::DeserializeOwned>(v: &Value, what: &str) -> Result<T, Failure> {
    T::deserialize(v).map_err(|e| Failure::new(exit::FAILURE, format!("not a valid {what}: {e}")))
}

/// A raw operator with its subsystem dimensions. Accepts a state document
/// (`{"subsystems": [d1, d2], "rho": <matrix>}`, generated fixtures included)
/// or a bare matrix, whose dimensions default to `√n × √n`.
pub fn read_operator(doc: &Value, dims: Option<(usize, usize)>) -> Result<(ComplexMatrix, (usize, usize)), Failure> {
    let (m, declared) = match doc.get("rho") {
        Some(rho) => {
            let m: ComplexMatrix = schema(rho, "matrix")?;
            let declared = match doc.get("subsystems") {
                Some(s) => {
                    let [a, b]: [usize; 2] = schema(s, "subsystems pair")?;
                    Some((a, b))
                }
                None => None,
            };
            (m, declared)
        }
        None => (schema::<ComplexMatrix>(doc, "state document or matrix")?, None),
    };
    let dims = match (dims, declared) {
        (Some(d), _) | (None, Some(d)) => d,
        (None, None) => {
            let n = m.nrows();
            let d = (n as f64).sqrt().round() as usize;
            if d * d != n {
                return Err(Failure::new(
                    exit::INVALID,
                    format!("cannot split dimension {n} into two equal factors; pass --dims"),
                ));
            }
            (d, d)
        }
    };
    Ok((m, dims))
}

fn read_state(doc: &Value, dims: Option<(usize, usize)>, cfg: &RunConfig) -> Result<OperatorMeasure, Failure> {
    let (m, dims) = read_operator(doc, dims)?;
    let rho = HermitianOperator::new(m, cfg.tol_herm)?;
    Ok(OperatorMeasure::new(rho, dims)?)
}

fn is_table(doc: &Value) -> bool {
    doc.get("table").is_some()
}

fn read_table(doc: &Value) -> Result<TabulatedMeasure, Failure> {
    let raw: TabulatedJson = schema(doc, "table document")?;
    Ok(TabulatedMeasure::try_from(raw)?)
}

fn read_measure(doc: &Value, dims: Option<(usize, usize)>, cfg: &RunConfig) -> Result<ProductMeasure, Failure> {
    if is_table(doc) {
        Ok(ProductMeasure::Tabulated(read_table(doc)?))
    } else {
        Ok(ProductMeasure::OperatorBacked(read_state(doc, dims, cfg)?))
    }
}

pub fn cmd_classify(
    doc: &Value,
    dims: Option<(usize, usize)>,
    cfg: &RunConfig,
) -> Result<ClassificationReport, Failure> {
    let (m, dims) = read_operator(doc, dims)?;
    Ok(classify(&m, dims, &cfg.classify_config())?)
}

pub fn cmd_extend(
    doc: &Value,
    dims: Option<(usize, usize)>,
    allow_qubit: bool,
    cfg: &RunConfig,
) -> Result<Reconstruction, Failure> {
    let mu = read_measure(doc, dims, cfg)?;
    let opts = ReconstructionOptions {
        allow_qubit,
        residual_threshold: cfg.tol_residual,
        ..ReconstructionOptions::default()
    };
    Ok(mu.gleason_extend(&opts)?)
}

pub fn cmd_dilate(doc: &Value, dims: Option<(usize, usize)>, cfg: &RunConfig) -> Result<Dilation, Failure> {
    if doc.get("elements").is_some() {
        let raw: PovmJson = schema(doc, "POVM document")?;
        let povm = Povm::try_from(raw)?;
        return Ok(naimark_dilate(&povm)?);
    }
    let mu = read_state(doc, dims, cfg)?;
    let phi = map_from_state(mu.rho(), mu.dims())?;
    Ok(stinespring_dilate(&phi.compose_transpose(), true)?)
}

pub fn cmd_chsh(doc: &Value, dims: Option<(usize, usize)>, cfg: &RunConfig) -> Result<ChshReport, Failure> {
    if is_table(doc) {
        let t = read_table(doc)?;
        let value = chsh_from_table(&t)?;
        let mu = ProductMeasure::Tabulated(t);
        let no_signalling = check_no_signalling(&mu, &cfg.sample_plan(), cfg.tol_check)?;
        return Ok(ChshReport::Table(ChshTableReport { value, no_signalling }));
    }
    let mu = read_state(doc, dims, cfg)?;
    Ok(ChshReport::Optimized(optimize_chsh(
        mu.rho(),
        mu.dims(),
        cfg.restarts,
        cfg.seed,
    )?))
}

pub fn cmd_check(
    doc: &Value,
    constraint: Constraint,
    dims: Option<(usize, usize)>,
    cfg: &RunConfig,
) -> Result<CheckReport, Failure> {
    let mu = read_measure(doc, dims, cfg)?;
    let plan = cfg.sample_plan();
    Ok(match constraint {
        Constraint::NoSignalling => CheckReport::Constraint(check_no_signalling(&mu, &plan, cfg.tol_check)?),
        Constraint::NoDisturbance => CheckReport::Constraint(check_no_disturbance(&mu, &plan, cfg.tol_check)?),
        Constraint::Popt => match &mu {
            ProductMeasure::OperatorBacked(m) => CheckReport::Popt(check_popt(m.rho(), m.dims(), &cfg.popt_options())?),
            ProductMeasure::Tabulated(_) => {
                return Err(Failure::new(
                    exit::INVALID,
                    "the POPT check needs an operator, not a table",
                ))
            }
        },
    })
}

pub fn cmd_generate(kind: &str, dims: (usize, usize), seed: u64) -> Result<Generated, Failure> {
    let kind: GeneratorKind = kind.parse()?;
    Ok(generate(&GeneratorSpec::new(kind, dims, seed))?)
}

/// Writes `body` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, body: &str) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(body.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "n/a".into(), |x| x.to_string())
}

fn text_classify(r: &ClassificationReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "verdict: {}", r.verdict.as_str());
    let _ = writeln!(s, "subsystems: {} x {}", r.subsystems[0], r.subsystems[1]);
    if let Some(w) = &r.psd_witness {
        let _ = writeln!(s, "min eigenvalue: {:.12}", w.min_eigenvalue);
    }
    if let Some(p) = &r.popt_certificate {
        let _ = writeln!(
            s,
            "min product value: {:.12} ({} restarts)",
            p.min_value, p.restarts_used
        );
    }
    if let Some(w) = &r.ppt_witness {
        let _ = writeln!(s, "min partial-transpose eigenvalue: {:.12}", w.min_eigenvalue);
    }
    if let Some(l) = &r.lift {
        let _ = writeln!(s, "lift: {:?}, multiplicity {}", l.kind, l.multiplicity);
    }
    let _ = writeln!(s, "jordan defect: {}", opt(&r.jordan_defect));
    if let Some(o) = &r.orientation {
        let _ = writeln!(s, "orientation: {:?}", o.tag);
    }
    for reason in &r.reasons {
        let _ = writeln!(s, "reason: {reason}");
    }
    s
}

fn text_extend(r: &Reconstruction) -> String {
    format!(
        "reconstructed operator on {} x {}\nresidual: {:e}\ncondition number: {:e}\n",
        r.subsystems[0], r.subsystems[1], r.residual, r.condition_number
    )
}

fn text_dilate(d: &Dilation) -> String {
    let kind = if d.pvm().is_some() { "naimark" } else { "stinespring" };
    format!(
        "{kind} dilation into dimension {}\nresidual: {:e}\n",
        d.dim_k, d.residual
    )
}

fn text_chsh(r: &ChshReport) -> String {
    match r {
        ChshReport::Optimized(o) => format!("chsh: {:.10}\nrestarts: {}\n", o.value, o.restarts),
        ChshReport::Table(t) => format!(
            "chsh: {:.10}\nno-signalling: {}\n",
            t.value,
            if t.no_signalling.satisfied {
                "satisfied"
            } else {
                "violated"
            }
        ),
    }
}

fn text_check(r: &CheckReport) -> String {
    match r {
        CheckReport::Constraint(c) => format!(
            "{}\nmax violation: {:e} (tolerance {:e}, {} checks)\nwitness: {}\n",
            if c.satisfied { "satisfied" } else { "violated" },
            c.max_violation,
            c.tolerance,
            c.checks,
            opt(&c.witness)
        ),
        CheckReport::Popt(p) => format!(
            "{}\nmin product value: {:.12} (tolerance {:e}, {} restarts)\n",
            if p.is_popt { "popt" } else { "not popt" },
            p.min_value,
            p.tolerance,
            p.restarts_used
        ),
    }
}

fn text_generate(g: &Generated) -> String {
    match g {
        Generated::State {
            kind,
            subsystems,
            certificate,
            ..
        } => format!(
            "{kind} on {} x {}\nexpected class: {}\nmin eigenvalue: {:.12}\n",
            subsystems[0],
            subsystems[1],
            certificate.expected_class.as_str(),
            certificate.min_eigenvalue
        ),
        Generated::Table { kind, certificate, .. } => format!(
            "{kind}\nplanted magnitude: {}\nno-signalling violation: {:e}\nno-disturbance violation: {:e}\n",
            certificate.planted_magnitude,
            certificate.no_signalling.max_violation,
            certificate.no_disturbance.max_violation
        ),
    }
}
