//! `heisen` command line: subcommands, flat config files and the JSON output envelope.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::generators::GeneratorSpec;
use crate::grid::{GridSpec, SampledField};
use crate::perturbation::{decay_report, remainder};
use crate::semigroups::{
    abelian_semigroup, contour_semigroup_theta, heisenberg_slope, semigroup_expm, ContourSpec, Route,
    SemigroupResult,
};
use crate::specfun::{asymptotic_classify, gamma_variance_density, near_origin_asymptote};
use crate::symbols::{composition_remainder, ClosedSymbol, DEFAULT_MATRIX_CAP};
use crate::verify;
use crate::C64;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "heisen", version, about = "Convolution semigroups on the Heisenberg group")]
struct Cli {
    /// Flat `key = value` file; keys mirror the long flag names.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for the parallel kernels.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute nu_t or mu_t by the fourier, expm or contour route.
    Semigroup(SemigroupArgs),
    /// Remainder decay report for the first-order correction.
    Perturb(PerturbArgs),
    /// Gamma-variance densities and near-origin asymptotics.
    Gamma(GammaArgs),
    /// Symbol composition and representation suites.
    Symbols(SymbolsArgs),
    /// Run named invariant suites and print a pass/fail table.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
struct GeneratorArgs {
    /// Built-in generator name, or the name given to `--composition`.
    #[arg(long)]
    generator: Option<String>,
    /// Custom symbol such as `1*log1p + 0.5*pow(0.5)`.
    #[arg(long)]
    composition: Option<String>,
}

#[derive(Args, Debug)]
struct SemigroupArgs {
    #[command(flatten)]
    gen: GeneratorArgs,
    /// Comma-separated times.
    #[arg(long)]
    t: Option<String>,
    #[arg(long)]
    theta: Option<f64>,
    /// fourier, expm, contour or all.
    #[arg(long)]
    route: Option<String>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    extent: Option<f64>,
    /// Output path ending in `.csv` or `.json`.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PerturbArgs {
    #[command(flatten)]
    gen: GeneratorArgs,
    #[arg(long = "t-list")]
    t_list: Option<String>,
    /// Decay exponent in `|r_t(x)| |x|^p`.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    extent: Option<f64>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GammaArgs {
    #[command(flatten)]
    gen: GeneratorArgs,
    #[arg(long)]
    t: Option<String>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    radii: Option<String>,
    /// Fit the near-origin slope of mu_t on a Heisenberg grid instead.
    #[arg(long)]
    heisenberg: bool,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    extent: Option<f64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SymbolsArgs {
    /// Dilation of the Gaussian composition fixture.
    #[arg(long)]
    scale: Option<f64>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    extent: Option<f64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Suite name or module prefix; all suites when omitted.
    #[arg(long)]
    suite: Option<String>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Fully resolved and validated run configuration, embedded in every envelope.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub subcommand: String,
    pub generator: Option<String>,
    pub composition: Option<String>,
    pub n: usize,
    pub grid: Option<usize>,
    pub extent: Option<f64>,
    pub t: Vec<f64>,
    pub theta: Option<f64>,
    pub route: Option<String>,
    pub p: Option<f64>,
    pub d: Option<usize>,
    pub radii: Vec<f64>,
    pub heisenberg: bool,
    pub scale: Option<f64>,
    pub suite: Option<String>,
    pub tolerances: BTreeMap<String, f64>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    pub seed: u64,
    pub threads: usize,
}

const KEYS: &[&str] = &[
    "generator", "composition", "t", "t-list", "theta", "route", "grid", "extent", "output", "report", "p", "d",
    "radii", "heisenberg", "scale", "suite", "seed", "threads",
];

/// Parses a flat `key = value` config; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("config line {}: expected key = value", no + 1)))?;
        let k = k.trim().trim_start_matches("--").replace('_', "-");
        if !KEYS.contains(&k.as_str()) {
            return Err(Error::Parse(format!("config line {}: unknown key {k:?}", no + 1)));
        }
        map.insert(k, v.trim().to_string());
    }
    Ok(map)
}

struct Layer {
    file: BTreeMap<String, String>,
}

impl Layer {
    fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.get(key) {
            Some(v) => v.parse().map(Some).map_err(|_| Error::Parse(format!("bad value {v:?} for {key}"))),
            None => Ok(None),
        }
    }

    fn list(&self, flag: Option<String>, key: &str) -> Result<Option<Vec<f64>>> {
        self.pick(flag, key)?.map(|s: String| parse_list(&s)).transpose()
    }
}

pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad number {v:?} in list {s:?}"))))
        .collect()
}

fn format_of(path: &Path) -> Result<Format> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => Ok(Format::Csv),
        Some("json") => Ok(Format::Json),
        _ => Err(Error::InvalidArgument(format!("output {} must end in .csv or .json", path.display()))),
    }
}

fn positive_times(ts: &[f64]) -> Result<()> {
    if ts.is_empty() || ts.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::InvalidArgument(format!("times must be positive and finite, got {ts:?}")));
    }
    Ok(())
}

impl RunConfig {
    fn base(subcommand: &str, layer: &Layer, cli: &Cli) -> Result<Self> {
        let threads = layer.pick(cli.threads, "threads")?.unwrap_or(1);
        if threads == 0 {
            return Err(Error::InvalidArgument("threads must be at least 1".into()));
        }
        Ok(RunConfig {
            subcommand: subcommand.into(),
            generator: None,
            composition: None,
            n: 1,
            grid: None,
            extent: None,
            t: Vec::new(),
            theta: None,
            route: None,
            p: None,
            d: None,
            radii: Vec::new(),
            heisenberg: false,
            scale: None,
            suite: None,
            tolerances: BTreeMap::new(),
            output: None,
            format: None,
            seed: layer.pick(cli.seed, "seed")?.unwrap_or(2024),
            threads,
        })
    }

    fn with_generator(mut self, g: &GeneratorArgs, layer: &Layer) -> Result<Self> {
        self.generator = Some(layer.pick(g.generator.clone(), "generator")?.unwrap_or_else(|| "gamma_variance".into()));
        self.composition = layer.pick(g.composition.clone(), "composition")?;
        self.generator_spec()?;
        Ok(self)
    }

    fn with_grid(mut self, grid: Option<usize>, extent: Option<f64>, layer: &Layer, dn: usize, dl: f64) -> Result<Self> {
        self.grid = Some(layer.pick(grid, "grid")?.unwrap_or(dn));
        self.extent = Some(layer.pick(extent, "extent")?.unwrap_or(dl));
        self.grid_spec()?;
        Ok(self)
    }

    fn with_output(mut self, output: Option<PathBuf>, key: &str, layer: &Layer) -> Result<Self> {
        self.output = layer.pick(output.map(|p| p.display().to_string()), key)?.map(PathBuf::from);
        self.format = self.output.as_deref().map(format_of).transpose()?;
        Ok(self)
    }

    pub fn generator_spec(&self) -> Result<GeneratorSpec> {
        let name = self.generator.as_deref().unwrap_or("gamma_variance");
        match &self.composition {
            Some(expr) => GeneratorSpec::from_composition(name, expr),
            None => GeneratorSpec::by_name(name),
        }
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        let n = self.grid.ok_or_else(|| Error::InvalidArgument("grid size missing".into()))?;
        let l = self.extent.ok_or_else(|| Error::InvalidArgument("extent missing".into()))?;
        if n < 4 || n % 2 != 0 {
            return Err(Error::InvalidArgument(format!("grid must be even and at least 4, got {n}")));
        }
        GridSpec::cubic(self.n, n, l)
    }

    fn from_cli(cli: &Cli) -> Result<Self> {
        let file = match &cli.config {
            Some(p) => parse_config(&fs::read_to_string(p)?)?,
            None => BTreeMap::new(),
        };
        let layer = Layer { file };
        match &cli.command {
            Command::Semigroup(a) => {
                let mut c = RunConfig::base("semigroup", &layer, cli)?
                    .with_generator(&a.gen, &layer)?
                    .with_grid(a.grid, a.extent, &layer, 12, 6.0)?
                    .with_output(a.output.clone(), "output", &layer)?;
                c.t = layer.list(a.t.clone(), "t")?.unwrap_or_else(|| vec![1.0]);
                positive_times(&c.t)?;
                let theta = layer.pick(a.theta, "theta")?.unwrap_or(1.0);
                if !(0.0..=1.0).contains(&theta) {
                    return Err(Error::InvalidArgument(format!("theta must lie in [0, 1], got {theta}")));
                }
                let route = layer.pick(a.route.clone(), "route")?.unwrap_or_else(|| "expm".into());
                if route != "all" {
                    let r: Route = route.parse()?;
                    if r == Route::Fourier && theta != 0.0 {
                        return Err(Error::InvalidArgument("the fourier route computes nu_t; pass --theta 0".into()));
                    }
                }
                c.theta = Some(theta);
                c.route = Some(route);
                c.tolerances.insert("fourier_vs_expm_theta0".into(), 1e-8);
                c.tolerances.insert("contour_vs_expm".into(), 1e-4);
                Ok(c)
            }
            Command::Perturb(a) => {
                let mut c = RunConfig::base("perturb", &layer, cli)?
                    .with_generator(&a.gen, &layer)?
                    .with_grid(a.grid, a.extent, &layer, 16, 8.0)?
                    .with_output(a.report.clone(), "report", &layer)?;
                if c.format == Some(Format::Csv) {
                    return Err(Error::InvalidArgument("the decay report is written as JSON".into()));
                }
                c.t = layer.list(a.t_list.clone(), "t-list")?.unwrap_or_else(|| vec![0.25, 0.5, 1.0, 2.0, 4.0]);
                positive_times(&c.t)?;
                let p = layer.pick(a.p, "p")?.unwrap_or(5.0);
                if !p.is_finite() {
                    return Err(Error::InvalidArgument("p must be finite".into()));
                }
                c.p = Some(p);
                c.tolerances.insert("ratio".into(), 3.0);
                Ok(c)
            }
            Command::Gamma(a) => {
                let mut c = RunConfig::base("gamma", &layer, cli)?.with_output(a.output.clone(), "output", &layer)?;
                c.heisenberg = a.heisenberg || layer.pick(None, "heisenberg")?.unwrap_or(false);
                c.t = layer.list(a.t.clone(), "t")?.unwrap_or_else(|| vec![0.5]);
                positive_times(&c.t)?;
                if c.heisenberg {
                    c = c.with_generator(&a.gen, &layer)?.with_grid(a.grid, a.extent, &layer, 16, 2.0)?;
                    let h = c.grid_spec()?.spacing(0);
                    c.radii = layer.list(a.radii.clone(), "radii")?.unwrap_or_else(|| vec![2.0 * h, 6.0 * h]);
                    if c.radii.len() != 2 {
                        return Err(Error::InvalidArgument("--heisenberg takes --radii lo,hi".into()));
                    }
                    c.d = Some(3);
                    c.tolerances.insert("slope_agreement".into(), 0.05);
                } else {
                    let d = layer.pick(a.d, "d")?.unwrap_or(3);
                    if d == 0 {
                        return Err(Error::InvalidArgument("d must be at least 1".into()));
                    }
                    c.d = Some(d);
                    c.radii = layer
                        .list(a.radii.clone(), "radii")?
                        .unwrap_or_else(|| (0..10).map(|i| 0.01 * 2f64.powi(i)).collect());
                    if c.radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
                        return Err(Error::InvalidArgument("radii must be positive".into()));
                    }
                }
                Ok(c)
            }
            Command::Symbols(a) => {
                let mut c = RunConfig::base("symbols", &layer, cli)?.with_output(a.output.clone(), "output", &layer)?;
                c.n = 0;
                c.scale = Some(layer.pick(a.scale, "scale")?.unwrap_or(2.0));
                c.grid = Some(layer.pick(a.grid, "grid")?.unwrap_or(192));
                c.extent = Some(layer.pick(a.extent, "extent")?.unwrap_or(16.0));
                if !(c.scale.unwrap() > 0.0) {
                    return Err(Error::InvalidArgument("scale must be positive".into()));
                }
                GridSpec::euclidean(&[c.grid.unwrap()], &[c.extent.unwrap()])?;
                Ok(c)
            }
            Command::Verify(a) => {
                let mut c = RunConfig::base("verify", &layer, cli)?.with_output(a.output.clone(), "output", &layer)?;
                c.suite = layer.pick(a.suite.clone(), "suite")?;
                if c.format == Some(Format::Csv) {
                    return Err(Error::InvalidArgument("verify writes JSON".into()));
                }
                verify::run_names(c.suite.as_deref())?;
                Ok(c)
            }
        }
    }
}

/// Output envelope; everything except `timestamp` is a function of the config.
#[derive(Serialize)]
pub struct Envelope<'a> {
    pub config: &'a RunConfig,
    pub results: Value,
    pub diagnostics: Value,
    pub version: &'static str,
    pub timestamp: u64,
}

fn envelope(config: &RunConfig, results: Value, diagnostics: Value) -> Result<String> {
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let env = Envelope { config, results, diagnostics, version: env!("CARGO_PKG_VERSION"), timestamp };
    Ok(serde_json::to_string_pretty(&env)? + "\n")
}

fn is_invalid_input(e: &Error) -> bool {
    matches!(
        e,
        Error::InvalidArgument(_)
            | Error::Parse(_)
            | Error::InvalidDimension(_)
            | Error::NonPositiveExtent { .. }
            | Error::Domain(_)
            | Error::CapExceeded { .. }
            | Error::MultiindexLength { .. }
            | Error::UnsupportedMultiindex(_)
    )
}

/// Entry point; `args[0]` is the program name.
pub fn run(args: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    let config = match RunConfig::from_cli(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(config.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_FAILURE;
        }
    };
    match pool.install(|| execute(&config)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if is_invalid_input(&e) {
                EXIT_INVALID
            } else {
                EXIT_FAILURE
            }
        }
    }
}

fn execute(c: &RunConfig) -> Result<i32> {
    match c.subcommand.as_str() {
        "semigroup" => run_semigroup(c),
        "perturb" => run_perturb(c),
        "gamma" if c.heisenberg => run_gamma_heisenberg(c),
        "gamma" => run_gamma(c),
        "symbols" => run_symbols(c),
        "verify" => run_verify(c),
        other => Err(Error::InvalidArgument(format!("unknown subcommand {other}"))),
    }
}

/// `base.json` with `tag` inserted before the extension, as in `base.expm.json`.
pub fn tagged_path(base: &Path, tag: &str) -> PathBuf {
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let ext = base.extension().and_then(|s| s.to_str()).unwrap_or("json");
    base.with_file_name(format!("{stem}.{tag}.{ext}"))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

fn emit(c: &RunConfig, path: Option<&Path>, results: Value, diagnostics: Value) -> Result<()> {
    let text = envelope(c, results, diagnostics)?;
    match path {
        Some(p) => write_file(p, &text),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn compute_route(route: Route, spec: &GeneratorSpec, t: f64, theta: f64, grid: &GridSpec) -> Result<SemigroupResult> {
    match route {
        Route::Fourier => abelian_semigroup(spec, t, grid),
        Route::Expm => semigroup_expm(spec, t, grid, theta),
        Route::Contour => contour_semigroup_theta(spec, grid, theta, &ContourSpec::new(t)?),
    }
}

fn result_json(r: &SemigroupResult) -> Result<Value> {
    let mut v = serde_json::to_value(r)?;
    v["field"] = r.field.to_json_value();
    Ok(v)
}

fn rel(a: &SampledField, b: &SampledField) -> Result<f64> {
    Ok(a.sub(b)?.sup_norm() / b.sup_norm())
}

fn write_route(c: &RunConfig, path: Option<&Path>, results: &[SemigroupResult]) -> Result<()> {
    let diagnostics: Vec<Value> = results
        .iter()
        .map(|r| {
            json!({
                "t": r.t,
                "route": r.route,
                "subprobabilistic": r.diagnostics.subprobabilistic(),
                "positive": r.diagnostics.positive(),
            })
        })
        .collect();
    match (path, c.format) {
        (Some(p), Some(Format::Csv)) => {
            for r in results {
                let file = if results.len() == 1 { p.to_path_buf() } else { tagged_path(p, &format!("t{}", r.t)) };
                let mut buf = Vec::new();
                r.field.write_csv(&mut buf)?;
                write_file(&file, std::str::from_utf8(&buf).expect("csv is utf-8"))?;
            }
            Ok(())
        }
        _ => {
            let results = results.iter().map(result_json).collect::<Result<Vec<_>>>()?;
            emit(c, path, Value::Array(results), Value::Array(diagnostics))
        }
    }
}

fn run_semigroup(c: &RunConfig) -> Result<i32> {
    let spec = c.generator_spec()?;
    let grid = c.grid_spec()?;
    let theta = c.theta.unwrap_or(1.0);
    let route = c.route.as_deref().unwrap_or("expm");
    let mut all_ok = true;
    if route != "all" {
        let r: Route = route.parse()?;
        let results = c.t.iter().map(|&t| compute_route(r, &spec, t, theta, &grid)).collect::<Result<Vec<_>>>()?;
        for res in &results {
            print_diagnostics(res);
            all_ok &= res.diagnostics.subprobabilistic() && res.diagnostics.positive();
        }
        write_route(c, c.output.as_deref(), &results)?;
        return Ok(if all_ok { EXIT_OK } else { EXIT_FAILURE });
    }
    let routes = [(Route::Fourier, 0.0), (Route::Expm, theta), (Route::Contour, theta)];
    let mut per_route: Vec<Vec<SemigroupResult>> = vec![Vec::new(); 3];
    let mut diffs = Vec::new();
    for &t in &c.t {
        let got = routes
            .iter()
            .map(|&(r, th)| compute_route(r, &spec, t, th, &grid))
            .collect::<Result<Vec<_>>>()?;
        let expm0 = if theta == 0.0 { got[1].field.clone() } else { semigroup_expm(&spec, t, &grid, 0.0)?.field };
        let f_e0 = rel(&got[0].field, &expm0)?;
        let c_e = rel(&got[2].field, &got[1].field)?;
        let f_e = rel(&got[0].field, &got[1].field)?;
        let ok = f_e0 < c.tolerances["fourier_vs_expm_theta0"] && c_e < c.tolerances["contour_vs_expm"];
        all_ok &= ok;
        println!("t={t}: fourier vs expm(theta=0) {f_e0:.3e}, contour vs expm {c_e:.3e}, fourier vs expm {f_e:.3e}");
        diffs.push(json!({
            "t": t,
            "theta": theta,
            "fourier_vs_expm_theta0": f_e0,
            "contour_vs_expm": c_e,
            "fourier_vs_expm": f_e,
            "passed": ok,
        }));
        for (slot, res) in per_route.iter_mut().zip(got) {
            print_diagnostics(&res);
            all_ok &= res.diagnostics.subprobabilistic() && res.diagnostics.positive();
            slot.push(res);
        }
    }
    for ((route, _), results) in routes.iter().zip(&per_route) {
        let path = c.output.as_deref().map(|p| tagged_path(p, &route.to_string()));
        write_route(c, path.as_deref(), results)?;
    }
    let summary_path = c.output.as_deref().map(|p| tagged_path(&p.with_extension("json"), "diff"));
    emit(c, summary_path.as_deref(), Value::Array(diffs), json!({ "all_passed": all_ok }))?;
    Ok(if all_ok { EXIT_OK } else { EXIT_FAILURE })
}

fn print_diagnostics(r: &SemigroupResult) {
    let d = &r.diagnostics;
    eprintln!(
        "{} t={} theta={}: mass {:.6} min {:.3e} sup {:.3e} boundary {:.3e}",
        r.route, r.t, r.theta, d.mass, d.min_value, d.sup, d.boundary_mass
    );
}

fn run_perturb(c: &RunConfig) -> Result<i32> {
    let spec = c.generator_spec()?;
    let grid = c.grid_spec()?;
    let fields = c.t.iter().map(|&t| Ok((t, remainder(&spec, t, &grid)?))).collect::<Result<Vec<_>>>()?;
    let report = decay_report(&fields, c.p.unwrap_or(5.0))?;
    for e in &report.entries {
        eprintln!("t={}: C = {:.4e}", e.t, e.c);
    }
    eprintln!("ratio max/min = {:.3}", report.ratio);
    let sup: Vec<Value> = fields.iter().map(|(t, f)| json!({ "t": t, "remainder_sup": f.sup_norm() })).collect();
    emit(c, c.output.as_deref(), serde_json::to_value(&report)?, Value::Array(sup))?;
    Ok(EXIT_OK)
}

fn run_gamma(c: &RunConfig) -> Result<i32> {
    let d = c.d.unwrap_or(3);
    let mut csv = String::from("t,r,density,predicted_asymptote\n");
    let mut regimes = Vec::new();
    for &t in &c.t {
        regimes.push(json!({ "t": t, "d": d, "asymptotic": asymptotic_classify(t, d) }));
        for &r in &c.radii {
            let v = gamma_variance_density(t, d, r)?;
            let a = near_origin_asymptote(t, d, r)?;
            csv.push_str(&format!("{t},{r:e},{v:e},{a:e}\n"));
        }
    }
    match (c.output.as_deref(), c.format) {
        (Some(p), Some(Format::Json)) => {
            let rows: Vec<Value> = csv
                .lines()
                .skip(1)
                .map(|l| {
                    let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap_or(f64::NAN)).collect();
                    json!({ "t": v[0], "r": v[1], "density": v[2], "predicted_asymptote": v[3] })
                })
                .collect();
            emit(c, Some(p), Value::Array(rows), Value::Array(regimes))?;
        }
        (Some(p), _) => write_file(p, &csv)?,
        (None, _) => print!("{csv}"),
    }
    Ok(EXIT_OK)
}

fn run_gamma_heisenberg(c: &RunConfig) -> Result<i32> {
    let spec = c.generator_spec()?;
    let grid = c.grid_spec()?;
    let window = [c.radii[0], c.radii[1]];
    let reports = c.t.iter().map(|&t| heisenberg_slope(&spec, t, &grid, window)).collect::<Result<Vec<_>>>()?;
    for r in &reports {
        println!(
            "t={}: mu_t slope {:.4}, nu_t slope {:.4}, continuum {}, predicted {:.4} ({} samples in [{:.3}, {:.3}])",
            r.t,
            r.heisenberg_slope,
            r.abelian_slope,
            r.continuum_slope.map_or("n/a".into(), |s| format!("{s:.4}")),
            r.predicted,
            r.samples,
            r.window[0],
            r.window[1]
        );
    }
    let agree: Vec<Value> = reports
        .iter()
        .map(|r| {
            let gap = (r.heisenberg_slope - r.abelian_slope).abs();
            json!({ "t": r.t, "heisenberg_vs_abelian": gap, "agrees": gap <= c.tolerances["slope_agreement"] })
        })
        .collect();
    let ok = agree.iter().all(|a| a["agrees"].as_bool() == Some(true));
    emit(c, c.output.as_deref(), serde_json::to_value(&reports)?, Value::Array(agree))?;
    Ok(if ok { EXIT_OK } else { EXIT_FAILURE })
}

fn run_symbols(c: &RunConfig) -> Result<i32> {
    let s = c.scale.unwrap_or(2.0);
    let grid = GridSpec::euclidean(&[c.grid.unwrap_or(192)], &[c.extent.unwrap_or(16.0)])?;
    let a = ClosedSymbol::new(1, move |x, xi| {
        C64::new((-((x[0] - 0.5).powi(2) + xi[0].powi(2)) / (2.0 * s * s)).exp(), 0.0)
    });
    let b = ClosedSymbol::new(1, move |x, xi| {
        C64::new((-(x[0].powi(2) + (xi[0] - 0.5).powi(2)) / (2.0 * s * s)).exp(), 0.0)
    });
    let remainders = (1..=3)
        .map(|n| composition_remainder(&a, &b, n, &grid, DEFAULT_MATRIX_CAP))
        .collect::<Result<Vec<_>>>()?;
    for r in &remainders {
        println!("expansion order {}: remainder sup {:.3e}", r.terms, r.sup);
    }
    let outcomes = verify::run(Some("symbols"))?;
    print!("{}", verify::table(&outcomes));
    let ok = outcomes.iter().all(|o| o.passed);
    let results = json!({ "remainders": remainders, "suites": outcomes });
    emit(c, c.output.as_deref(), results, json!({ "all_passed": ok }))?;
    Ok(if ok { EXIT_OK } else { EXIT_FAILURE })
}

fn run_verify(c: &RunConfig) -> Result<i32> {
    let outcomes = verify::run(c.suite.as_deref())?;
    print!("{}", verify::table(&outcomes));
    let ok = outcomes.iter().all(|o| o.passed);
    if let Some(p) = c.output.as_deref() {
        emit(c, Some(p), serde_json::to_value(&outcomes)?, json!({ "all_passed": ok }))?;
    }
    Ok(if ok { EXIT_OK } else { EXIT_FAILURE })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parsing() {
        let m = parse_config("# run\ngenerator = gamma_full\n--grid=8  # inline\nt_list = 1,2\n").unwrap();
        assert_eq!(m["generator"], "gamma_full");
        assert_eq!(m["grid"], "8");
        assert_eq!(m["t-list"], "1,2");
        assert!(parse_config("bogus = 1").is_err());
        assert!(parse_config("grid 8").is_err());
    }

    #[test]
    fn lists_and_paths() {
        assert_eq!(parse_list("0.25, 1,4").unwrap(), vec![0.25, 1.0, 4.0]);
        assert!(parse_list("1,x").is_err());
        assert_eq!(tagged_path(Path::new("out/mu.json"), "expm"), PathBuf::from("out/mu.expm.json"));
        assert!(format_of(Path::new("a.txt")).is_err());
    }
}
