//! Configuration and command execution for the `vaisman` binary.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use vaisman_core::chart::{ChartError, ChartSpec, Interval};
use vaisman_core::deformation::{verify_theorem, DeformError, DeformationSpec, Generator};
use vaisman_core::expr::Expr;
use vaisman_core::form::KForm;
use vaisman_core::grid::{Execution, GridSpec, SampleGrid};
use vaisman_core::hopf::{HopfScenario, PositivityRow, SCENARIO_NAME};
use vaisman_core::parse::ParseError;
use vaisman_core::report::{Tolerances, VerificationReport};
use vaisman_core::vaisman::{
    build_from_potential, check_transverse_frame, check_vaisman, FoliatedPotentialChart,
    VaismanError, VaismanStructure,
};

pub const SCENARIOS: &[&str] = &[SCENARIO_NAME];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("unknown scenario `{0}` (known: {known})", known = SCENARIOS.join(", "))]
    UnknownScenario(String),
    #[error(transparent)]
    Structure(#[from] VaismanError),
    #[error(transparent)]
    Deformation(#[from] DeformError),
    #[error("{fraction:.4} of the grid points are singular (limit {limit})")]
    SingularPoints { fraction: f64, limit: f64 },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Parse(_) | CliError::Io { .. } => 1,
            CliError::Deformation(DeformError::NonFiniteT(_) | DeformError::Degree(_)) => 1,
            _ => 2,
        }
    }
}

impl From<ChartError> for CliError {
    fn from(e: ChartError) -> Self {
        CliError::Config(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartConfig {
    pub coordinates: Vec<String>,
    pub domain: Vec<[f64; 2]>,
    pub leaf: Option<[String; 2]>,
    pub transverse_radius: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub potential: Option<String>,
    pub form: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lattice: Option<usize>,
    pub random: Option<usize>,
    pub seed: Option<u64>,
    pub margin: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
pub struct ToleranceConfig {
    pub default: Option<f64>,
    #[serde(flatten)]
    pub checks: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub report: Option<PathBuf>,
    pub format: Option<Format>,
    pub plot_data: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HopfConfig {
    pub radius: Option<f64>,
    pub potential_coefficient: Option<f64>,
    pub generator_coefficient: Option<f64>,
    pub t_window: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub scenario: Option<String>,
    pub chart: Option<ChartConfig>,
    pub potential: Option<String>,
    pub generator: Option<GeneratorConfig>,
    pub t_values: Vec<f64>,
    pub grid: GridConfig,
    pub tolerances: ToleranceConfig,
    pub output: OutputConfig,
    pub hopf: HopfConfig,
    pub execution: Execution,
    pub force: bool,
    pub max_singular_fraction: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario: None,
            chart: None,
            potential: None,
            generator: None,
            t_values: Vec::new(),
            grid: GridConfig::default(),
            tolerances: ToleranceConfig::default(),
            output: OutputConfig::default(),
            hopf: HopfConfig::default(),
            execution: Execution::default(),
            force: false,
            max_singular_fraction: 0.01,
        }
    }
}

impl RunConfig {
    pub fn from_toml(src: &str) -> Result<Self, CliError> {
        toml::from_str(src).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let src = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        RunConfig::from_toml(&src)
    }

    pub fn tolerances(&self) -> Tolerances {
        let mut t = Tolerances::default();
        if let Some(d) = self.tolerances.default {
            t.default = d;
        }
        t.overrides = self.tolerances.checks.clone();
        t
    }

    fn grid_spec(&self, base: GridSpec) -> GridSpec {
        GridSpec {
            lattice: self.grid.lattice.unwrap_or(base.lattice),
            random: self.grid.random.unwrap_or(base.random),
            seed: self.grid.seed.unwrap_or(base.seed),
            margin: self.grid.margin.unwrap_or(base.margin),
        }
    }

    fn hopf_scenario(&self) -> HopfScenario {
        let d = HopfScenario::default();
        HopfScenario {
            radius: self.hopf.radius.unwrap_or(d.radius),
            potential_coefficient: self.hopf.potential_coefficient.unwrap_or(d.potential_coefficient),
            generator_coefficient: self.hopf.generator_coefficient.unwrap_or(d.generator_coefficient),
            t_window: self.hopf.t_window.map(|[a, b]| (a, b)).unwrap_or(d.t_window),
            grid: self.grid_spec(d.grid),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Run the Vaisman suite on the source structure.
    Verify,
    /// Deform the structure and verify each deformed member.
    Deform,
    /// Positivity and determinant sweep over a range of t.
    Sweep,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Options {
    /// Built-in scenario name.
    #[arg(long, global = true)]
    pub scenario: Option<String>,
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Deformation parameter; may be repeated.
    #[arg(long = "t", global = true, allow_negative_numbers = true)]
    pub t: Vec<f64>,
    /// `a:b:n`, n evenly spaced values from a to b inclusive.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub t_range: Option<String>,
    /// Lattice points per coordinate.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Continue past failed admissibility certificates.
    #[arg(long, global = true)]
    pub force: bool,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Write the sweep table as CSV next to the report.
    #[arg(long, global = true)]
    pub emit_plot_data: bool,
}

#[derive(Debug, Parser)]
#[command(name = "vaisman", version, about = "Verify Vaisman structures and their transverse deformations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub options: Options,
}

pub fn parse_t_range(s: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Config(format!("--t-range expects a:b:n, got `{s}`"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if n == 0 {
        return Err(bad());
    }
    Ok(linspace(a, b, n))
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n)
        .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
        .collect()
}

impl Options {
    /// Loads the config file (if any) and applies the flags on top.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = &self.scenario {
            c.scenario = Some(s.clone());
        }
        if let Some(r) = &self.t_range {
            c.t_values = parse_t_range(r)?;
        }
        if !self.t.is_empty() {
            c.t_values = self.t.clone();
        }
        if let Some(k) = self.grid {
            c.grid.lattice = Some(k);
        }
        if let Some(s) = self.seed {
            c.grid.seed = Some(s);
        }
        if self.force {
            c.force = true;
        }
        if let Some(o) = &self.out {
            c.output.report = Some(o.clone());
        }
        if let Some(f) = self.format {
            c.output.format = Some(f);
        }
        if self.emit_plot_data {
            c.output.plot_data = Some(true);
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOutput {
    pub command: Command,
    pub scenario: String,
    pub seed: u64,
    pub execution: Execution,
    pub reports: Vec<VerificationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Vec<PositivityRow>>,
}

impl RunOutput {
    pub fn all_pass(&self) -> bool {
        self.reports.iter().all(|r| r.all_pass())
    }

    pub fn exit_code(&self) -> i32 {
        if self.all_pass() {
            0
        } else {
            3
        }
    }
}

enum Source {
    Hopf(HopfScenario),
    Inline { chart: ChartSpec, h: Expr },
}

fn source(c: &RunConfig) -> Result<Source, CliError> {
    match (&c.scenario, &c.chart) {
        (Some(_), Some(_)) => Err(CliError::Config(
            "give either `scenario` or an inline `chart`, not both".into(),
        )),
        (Some(name), None) if name == SCENARIO_NAME => Ok(Source::Hopf(c.hopf_scenario())),
        (Some(name), None) => Err(CliError::UnknownScenario(name.clone())),
        (None, Some(cc)) => {
            let domain = cc.domain.iter().map(|[a, b]| Interval::new(*a, *b)).collect();
            let n = cc.coordinates.len();
            let leaf = match &cc.leaf {
                Some([x, y]) => {
                    let find = |name: &String| {
                        cc.coordinates
                            .iter()
                            .position(|c| c == name)
                            .ok_or_else(|| CliError::Config(format!("unknown leaf coordinate `{name}`")))
                    };
                    [find(x)?, find(y)?]
                }
                None if n >= 2 => [n - 2, n - 1],
                None => return Err(CliError::Config("chart needs coordinates".into())),
            };
            let mut chart = ChartSpec::new(cc.coordinates.clone(), domain, leaf)?;
            if let Some(r) = cc.transverse_radius {
                chart = chart.with_transverse_radius(r);
            }
            let src = c
                .potential
                .as_deref()
                .ok_or_else(|| CliError::Config("inline chart needs a `potential`".into()))?;
            let h = chart.parse(src)?;
            Ok(Source::Inline { chart, h })
        }
        (None, None) => Err(CliError::Config(
            "no scenario given (use --scenario or a config with `scenario` or `chart`)".into(),
        )),
    }
}

struct Prepared {
    name: String,
    grid: SampleGrid,
    fc: FoliatedPotentialChart,
    hopf: Option<HopfScenario>,
}

fn prepare(c: &RunConfig) -> Result<Prepared, CliError> {
    Ok(match source(c)? {
        Source::Hopf(sc) => Prepared {
            name: SCENARIO_NAME.to_string(),
            grid: sc.grid().with_execution(c.execution),
            fc: sc.foliated_chart(),
            hopf: Some(sc),
        },
        Source::Inline { chart, h } => {
            let grid = SampleGrid::new(&chart, &c.grid_spec(GridSpec::default())).with_execution(c.execution);
            Prepared {
                name: "inline".to_string(),
                grid,
                fc: FoliatedPotentialChart::new(chart, h)?,
                hopf: None,
            }
        }
    })
}

fn generator(c: &RunConfig, p: &Prepared) -> Result<Generator, CliError> {
    let chart = p.fc.chart();
    match &c.generator {
        Some(GeneratorConfig {
            potential: Some(src),
            form: None,
        }) => Ok(Generator::Potential(chart.parse(src)?)),
        Some(GeneratorConfig {
            potential: None,
            form: Some(comps),
        }) => {
            if comps.len() != chart.dim() {
                return Err(CliError::Config(format!(
                    "generator form needs {} components, got {}",
                    chart.dim(),
                    comps.len()
                )));
            }
            let es = comps.iter().map(|s| chart.parse(s)).collect::<Result<Vec<_>, _>>()?;
            Ok(Generator::Form(KForm::from_covector(es)))
        }
        Some(_) => Err(CliError::Config(
            "generator needs exactly one of `potential` or `form`".into(),
        )),
        None => match &p.hopf {
            Some(sc) => Ok(Generator::Potential(sc.generator())),
            None => Err(CliError::Config("inline chart needs a `generator`".into())),
        },
    }
}

fn check_singular(reports: &[VerificationReport], limit: f64) -> Result<(), CliError> {
    let fraction = reports.iter().map(|r| r.skipped_fraction()).fold(0.0, f64::max);
    if fraction > limit {
        return Err(CliError::SingularPoints { fraction, limit });
    }
    Ok(())
}

fn source_report(p: &Prepared, tol: &Tolerances) -> Result<(VaismanStructure, VerificationReport), CliError> {
    let s = build_from_potential(&p.fc, &p.grid)?;
    let report = match &p.hopf {
        Some(sc) => sc.verify(&p.grid, tol)?,
        None => {
            let mut r = check_vaisman(&s, &p.grid, tol);
            r.subject = p.name.clone();
            r.extend(check_transverse_frame(&p.fc, &s, &p.grid, tol));
            r
        }
    };
    Ok((s, report))
}

pub fn cmd_verify(c: &RunConfig) -> Result<RunOutput, CliError> {
    let p = prepare(c)?;
    let (_, report) = source_report(&p, &c.tolerances())?;
    finish(c, Command::Verify, &p, vec![report], None)
}

pub fn cmd_deform(c: &RunConfig) -> Result<RunOutput, CliError> {
    let p = prepare(c)?;
    if c.t_values.is_empty() {
        return Err(CliError::Config("deform needs t values (--t, --t-range or `t_values`)".into()));
    }
    let tol = c.tolerances();
    let gen = generator(c, &p)?;
    let (s, base) = source_report(&p, &tol)?;
    let spec = DeformationSpec::new(s, gen, c.t_values.clone(), tol, p.grid.clone())?;
    let mut reports = vec![base];
    for &t in &c.t_values {
        let mut r = verify_theorem(&spec, t, c.force)?;
        r.subject = format!("deformation t={t}");
        reports.push(r);
    }
    finish(c, Command::Deform, &p, reports, None)
}

pub fn cmd_sweep(c: &RunConfig) -> Result<RunOutput, CliError> {
    let p = prepare(c)?;
    let sc = p
        .hopf
        .clone()
        .ok_or_else(|| CliError::Config("sweep needs a scenario with a determinant oracle".into()))?;
    let ts = if c.t_values.is_empty() {
        linspace(-0.45, 0.45, 21)
    } else {
        c.t_values.clone()
    };
    let tol = c.tolerances();
    let sweep = sc.positivity_sweep(&ts, &p.grid, &tol)?;
    let radial = sc.radial_points(200).with_execution(c.execution);
    let det = sc.check_det_matches(&ts, &radial, &tol)?;
    finish(c, Command::Sweep, &p, vec![sweep.report, det], Some(sweep.rows))
}

fn finish(
    c: &RunConfig,
    command: Command,
    p: &Prepared,
    reports: Vec<VerificationReport>,
    sweep: Option<Vec<PositivityRow>>,
) -> Result<RunOutput, CliError> {
    check_singular(&reports, c.max_singular_fraction)?;
    Ok(RunOutput {
        command,
        scenario: p.name.clone(),
        seed: p.grid.spec().seed,
        execution: c.execution,
        reports,
        sweep,
    })
}

pub fn execute(command: Command, c: &RunConfig) -> Result<RunOutput, CliError> {
    match command {
        Command::Verify => cmd_verify(c),
        Command::Deform => cmd_deform(c),
        Command::Sweep => cmd_sweep(c),
    }
}

pub fn to_json(out: &RunOutput) -> String {
    let mut s = serde_json::to_string_pretty(out).expect("report serializes");
    s.push('\n');
    s
}

/// Sweep rows as `t,min_eigenvalue,max_det_error`.
pub fn sweep_csv(rows: &[PositivityRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "min_eigenvalue", "max_det_error"])
        .expect("in-memory write");
    for r in rows {
        w.write_record([
            format!("{:?}", r.t),
            format!("{:?}", r.min_eigenvalue),
            format!("{:?}", r.max_det_error),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

pub fn render(out: &RunOutput, format: Format) -> Result<String, CliError> {
    match (format, &out.sweep) {
        (Format::Json, _) => Ok(to_json(out)),
        (Format::Csv, Some(rows)) => Ok(sweep_csv(rows)),
        (Format::Csv, None) => Err(CliError::Config("csv output is only available for sweep".into())),
    }
}

/// `report.json` → `report.plot.csv`.
pub fn plot_path(report: &Path) -> PathBuf {
    report.with_extension("plot.csv")
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Runs a parsed command line, writes its outputs and returns the exit code.
pub fn run(cli: &Cli) -> Result<i32, CliError> {
    let c = cli.options.resolve()?;
    let format = c.output.format.unwrap_or_default();
    if format == Format::Csv && cli.command != Command::Sweep {
        return Err(CliError::Config("csv output is only available for sweep".into()));
    }
    let plot = c.output.plot_data.unwrap_or(false);
    if plot && c.output.report.is_none() {
        return Err(CliError::Config("plot data needs a report path (--out)".into()));
    }
    let out = execute(cli.command, &c)?;
    let text = render(&out, format)?;
    match &c.output.report {
        Some(path) => {
            write(path, &text)?;
            if plot {
                if let Some(rows) = &out.sweep {
                    write(&plot_path(path), &sweep_csv(rows))?;
                }
            }
        }
        None => print!("{text}"),
    }
    for r in &out.reports {
        for f in r.failing() {
            eprintln!("FAIL {}: {f}", r.subject);
        }
        if let Some(cert) = &r.certificate {
            for f in cert.failing() {
                eprintln!("FAIL {} certificate: {f}", r.subject);
            }
        }
    }
    Ok(out.exit_code())
}
