//! Command-line front end. Every subcommand reads an optional config file,
//! applies flag overrides, writes its outputs and a manifest next to the
//! main output.
//!
//! Exit codes: 0 ok, 1 usage, 2 config, 3 runtime.

use std::collections::{HashMap, VecDeque};
use std::ffi::OsString;
use std::io::Write;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::cutpoints::detect_cutpoints;
use crate::estimators::{
    self, EventKind, EventPoint, JGrid, MuParams, RateParams, RateSurface, SlabPairParams, UpperTailParams,
};
use crate::geometry::Rect;
use crate::harness::config::{parse_list, parse_point, parse_point_list, Config, ConfigError};
use crate::harness::csv;
use crate::harness::lemma_check::{run_lemma_check, Lemma, ALL_LEMMAS};
use crate::harness::manifest::{manifest_path, now_unix_ms, FileEntry, Manifest};
use crate::lattice::{sample_configuration, BoxSpec, PercolationSample};
use crate::metric::{grow_ball, write_distance_map};
use crate::renorm::{self, classify_boxes, ClassifyOptions, ScaledL1, SlabParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Sigma multiple used for the rate-surface property checks.
const PROPERTY_SIGMAS: f64 = 3.0;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn invalid(field: &'static str, message: impl Into<String>) -> CliError {
    CliError::Config(ConfigError::Invalid { field, message: message.into() })
}

#[derive(Parser)]
#[command(name = "cutlab", version, about = "Supercritical bond percolation laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a bond configuration and store it in binary form.
    Sample(Flags),
    /// Chemical-distance map from a source vertex.
    Ball(Flags),
    /// Space-time cut-points of the ball around a source.
    CutpointScan(Flags),
    /// Good/bad classification of macroscopic boxes.
    Classify(Flags),
    /// Route between two vertices through good boxes.
    Route(Flags),
    /// Paired slab versus point-to-point upper-tail replicates.
    Slab(Flags),
    /// Random instances of the combinatorial lemmas with their bounds.
    LemmaCheck(Flags),
    /// Time constant estimate along a direction.
    EstimateMu(Flags),
    /// Cut-point or upper-tail event frequencies and rates.
    EstimateRate(Flags),
    /// Upper-tail rate from a cut-point rate surface.
    EstimateJ(Flags),
    /// Joint upper-tail and late cut-point tallies.
    UpperTail(Flags),
    /// Re-run a manifest and compare output hashes.
    Replay(ReplayArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Sample(_) => "sample",
            Command::Ball(_) => "ball",
            Command::CutpointScan(_) => "cutpoint-scan",
            Command::Classify(_) => "classify",
            Command::Route(_) => "route",
            Command::Slab(_) => "slab",
            Command::LemmaCheck(_) => "lemma-check",
            Command::EstimateMu(_) => "estimate-mu",
            Command::EstimateRate(_) => "estimate-rate",
            Command::EstimateJ(_) => "estimate-j",
            Command::UpperTail(_) => "upper-tail",
            Command::Replay(_) => "replay",
        }
    }
}

#[derive(Args, Debug, Default)]
struct Flags {
    /// TOML config file; flags override its fields.
    #[arg(long)]
    config: Option<String>,
    #[arg(long)]
    out: Option<String>,
    /// Binary sample file.
    #[arg(long)]
    sample: Option<String>,
    /// Integer point, e.g. `0,0`.
    #[arg(long, allow_hyphen_values = true)]
    source: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    target: Option<String>,
    #[arg(long)]
    d: Option<usize>,
    /// Box radius.
    #[arg(long = "L")]
    radius: Option<u32>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// cutpoint, free-cutpoint or upper-tail.
    #[arg(long)]
    event: Option<String>,
    /// Comma-separated list.
    #[arg(long, allow_hyphen_values = true)]
    s: Option<String>,
    /// Point list separated by `;`, e.g. `0,0;1,0`.
    #[arg(long, allow_hyphen_values = true)]
    x: Option<String>,
    #[arg(long)]
    xi: Option<String>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long = "n-grid")]
    n_grid: Option<String>,
    #[arg(long)]
    replicates: Option<u64>,
    #[arg(long = "box-factor")]
    box_factor: Option<f64>,
    /// Worker threads; defaults to $CUTLAB_WORKERS or the core count.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    z: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Macroscopic box side.
    #[arg(long = "N")]
    big_n: Option<u32>,
    #[arg(long)]
    ds: Option<f64>,
    #[arg(long)]
    dy: Option<f64>,
    #[arg(long = "j-radius")]
    j_radius: Option<f64>,
    /// Lemma name or `all`.
    #[arg(long)]
    lemma: Option<String>,
    #[arg(long)]
    instances: Option<u64>,
    #[arg(long = "t-min")]
    t_min: Option<u32>,
    #[arg(long = "t-max")]
    t_max: Option<u32>,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    /// Manifest written by an earlier run.
    #[arg(long)]
    manifest: String,
    #[arg(long)]
    workers: Option<usize>,
}

fn list<T: std::str::FromStr>(field: &'static str, text: &Option<String>) -> Result<Option<Vec<T>>, CliError> {
    text.as_deref().map(|t| parse_list(t).map_err(|m| invalid(field, m))).transpose()
}

impl Flags {
    fn overrides(&self) -> Result<Config, CliError> {
        let point = |field: &'static str, t: &Option<String>| -> Result<Option<Vec<i64>>, CliError> {
            t.as_deref().map(|t| parse_point(t).map_err(|m| invalid(field, m))).transpose()
        };
        Ok(Config {
            d: self.d,
            radius: self.radius,
            p: self.p,
            seed: self.seed,
            event: self.event.clone(),
            s: list("s", &self.s)?,
            x: self.x.as_deref().map(|t| parse_point_list(t).map_err(|m| invalid("x", m))).transpose()?,
            xi: list("xi", &self.xi)?,
            mu: self.mu,
            alpha: self.alpha,
            n_grid: list("n_grid", &self.n_grid)?,
            replicates: self.replicates,
            box_factor: self.box_factor,
            workers: self.workers,
            z: self.z,
            epsilon: self.epsilon,
            big_n: self.big_n,
            ds: self.ds,
            dy: self.dy,
            j_radius: self.j_radius,
            lemma: self.lemma.clone(),
            instances: self.instances,
            source: point("source", &self.source)?,
            target: point("target", &self.target)?,
            t_min: self.t_min,
            t_max: self.t_max,
            sample: self.sample.clone(),
            out: self.out.clone(),
        })
    }

    fn resolve(&self) -> Result<Config, CliError> {
        let base = match &self.config {
            Some(path) => {
                let bytes = std::fs::read(path)
                    .map_err(|e| ConfigError::Parse(format!("cannot read {path}: {e}")))?;
                Config::from_bytes(&bytes)?
            }
            None => Config::default(),
        };
        Ok(base.merged(&self.overrides()?))
    }
}

/// Everything a subcommand produced, before it touches the disk.
pub struct RunOutput {
    pub inputs: Vec<FileEntry>,
    /// `(path, bytes)`; the first entry is the main output.
    pub files: Vec<(String, Vec<u8>)>,
    pub partial: Option<String>,
}

macro_rules! need {
    ($cfg:expr, $field:ident) => {
        $cfg.$field.clone().ok_or(CliError::Config(ConfigError::Missing(stringify!($field))))
    };
    ($cfg:expr, $field:ident, $name:literal) => {
        $cfg.$field.clone().ok_or(CliError::Config(ConfigError::Missing($name)))
    };
}

fn load_sample(cfg: &Config) -> Result<(PercolationSample, FileEntry), CliError> {
    let path = need!(cfg, sample)?;
    let bytes = std::fs::read(&path).map_err(|e| runtime(format!("cannot read {path}: {e}")))?;
    let sample = PercolationSample::from_bytes(&bytes).map_err(|e| runtime(format!("{path}: {e}")))?;
    Ok((sample, FileEntry::of_bytes(&path, &bytes)))
}

fn vertex(spec: &BoxSpec, field: &'static str, point: Option<&Vec<i64>>) -> Result<usize, CliError> {
    let origin = vec![0; spec.dim()];
    let x = point.unwrap_or(&origin);
    if x.len() != spec.dim() {
        return Err(invalid(field, format!("expected {} coordinates", spec.dim())));
    }
    spec.index_of(x).ok_or_else(|| invalid(field, "point lies outside the sample box"))
}

fn first_point(cfg: &Config, dim: usize) -> Result<Vec<f64>, CliError> {
    let x = need!(cfg, x)?.into_iter().next().ok_or(ConfigError::Missing("x"))?;
    if x.len() != dim {
        return Err(invalid("x", format!("expected {dim} coordinates")));
    }
    Ok(x)
}

fn first_n(cfg: &Config) -> Result<u32, CliError> {
    need!(cfg, n_grid)?.first().copied().ok_or(CliError::Config(ConfigError::Missing("n_grid")))
}

fn emit(write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    write(&mut buf).map_err(runtime)?;
    Ok(buf)
}

fn config_err(field: &'static str) -> impl Fn(estimators::EstimatorError) -> CliError {
    move |e| match e {
        estimators::EstimatorError::Parameter(m) => invalid(field, m),
        other => runtime(other),
    }
}

/// Runs one subcommand without touching the disk except to read inputs.
pub fn execute(command: &str, cfg: &Config) -> Result<RunOutput, CliError> {
    let out = need!(cfg, out)?;
    let workers = cfg.workers.unwrap_or(0);
    let z = cfg.z.unwrap_or(estimators::DEFAULT_Z);
    let box_factor = cfg.box_factor.unwrap_or(estimators::DEFAULT_BOX_FACTOR);
    let mut inputs = Vec::new();
    let mut partial = None;
    let mut files = Vec::new();
    match command {
        "sample" => {
            let d = need!(cfg, d)?;
            let spec = BoxSpec::new(d, need!(cfg, radius, "L")?).map_err(|e| invalid("d, L", e.to_string()))?;
            let p = need!(cfg, p)?;
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid("p", "must lie in [0, 1]"));
            }
            let sample = sample_configuration(&spec, p, need!(cfg, seed)?).map_err(runtime)?;
            files.push((out, sample.to_bytes()));
        }
        "ball" | "cutpoint-scan" => {
            let (sample, entry) = load_sample(cfg)?;
            inputs.push(entry);
            let spec = sample.spec();
            let source = vertex(spec, "source", cfg.source.as_ref())?;
            // Cut-points are only certain up to the first face contact.
            let cap = match (command, cfg.t_max) {
                ("cutpoint-scan", None) => spec.face_distance(&spec.coords_of(source)),
                (_, t) => t,
            };
            let ball = grow_ball(&sample, source, cap).map_err(runtime)?;
            let bytes = if command == "ball" {
                emit(|b| {
                    csv::schema_line(b, "ball")?;
                    write_distance_map(spec, &ball, b)
                })?
            } else {
                let records = detect_cutpoints(&ball, cfg.t_min.unwrap_or(0)).map_err(runtime)?;
                emit(|b| csv::write_cutpoints(spec, &records, b))?
            };
            files.push((out, bytes));
        }
        "classify" | "route" => {
            let (sample, entry) = load_sample(cfg)?;
            inputs.push(entry);
            let mu = ScaledL1(need!(cfg, mu)?);
            let options = ClassifyOptions { seed: cfg.seed.unwrap_or(0), ..ClassifyOptions::default() };
            let classification = classify_boxes(&sample, need!(cfg, big_n, "N")?, need!(cfg, epsilon)?, &mu, options)
                .map_err(|e| match e {
                    renorm::RenormError::Parameter(m) => invalid("epsilon", m),
                    other => runtime(other),
                })?;
            if command == "classify" {
                files.push((
                    out,
                    emit(|b| {
                        csv::schema_line(b, "classify")?;
                        renorm::write_classification(&classification, b)
                    })?,
                ));
            } else {
                let spec = sample.spec();
                let x = vertex(spec, "source", cfg.source.as_ref())?;
                let y = vertex(spec, "target", Some(&need!(cfg, target)?))?;
                let lattice = &classification.lattice;
                let from = lattice.site_of(&spec.coords_of(x));
                let to = lattice.site_of(&spec.coords_of(y));
                let macro_path = good_site_path(&classification, &from, &to)
                    .ok_or_else(|| runtime("no path of good boxes joins the source and target boxes"))?;
                let path = renorm::route_through_good(&sample, &classification, &macro_path, x, y).map_err(runtime)?;
                files.push((out, emit(|b| csv::write_path(spec, &path, b))?));
            }
        }
        "slab" => {
            let d = need!(cfg, d)?;
            let slab = SlabParams {
                epsilon: need!(cfg, epsilon)?,
                xi: need!(cfg, xi)?.first().copied().ok_or(ConfigError::Missing("xi"))?,
                big_n: need!(cfg, big_n, "N")?,
                n: first_n(cfg)?,
                mu_e1: need!(cfg, mu)?,
            };
            let params = SlabPairParams {
                dim: d,
                p: need!(cfg, p)?,
                slab,
                replicates: need!(cfg, replicates)?,
                seed: need!(cfg, seed)?,
                margin: cfg.radius.unwrap_or(0),
                workers,
            };
            let n = params.slab.n;
            let (pairs, failure) = estimators::slab_pairs(&params).map_err(config_err("slab"))?;
            let freq = estimators::paired_frequencies(&pairs);
            partial = failure.as_ref().map(|f| f.message.clone());
            let bytes = emit(|b| {
                csv::write_slab_pairs(n, &pairs, failure.as_ref(), &mut *b)?;
                writeln!(
                    b,
                    "# decided={} box_freq={} point_freq={} sigma={} verdict={}",
                    freq.decided,
                    freq.box_freq,
                    freq.point_freq,
                    freq.sigma,
                    freq.verdict.describe()
                )
            })?;
            files.push((out, bytes));
        }
        "lemma-check" => {
            let name = need!(cfg, lemma)?;
            let lemmas: Vec<Lemma> = if name == "all" {
                ALL_LEMMAS.to_vec()
            } else {
                vec![name.parse().map_err(|m: String| invalid("lemma", m))?]
            };
            let instances = need!(cfg, instances)?;
            let seed = cfg.seed.unwrap_or(0);
            let rows: Vec<_> = lemmas.iter().flat_map(|&l| run_lemma_check(l, instances, seed, cfg.d)).collect();
            files.push((out, emit(|b| csv::write_lemma_rows(&rows, b))?));
        }
        "estimate-mu" => {
            let d = need!(cfg, d)?;
            let mut params = MuParams::new(
                d,
                need!(cfg, p)?,
                first_point(cfg, d)?,
                need!(cfg, n_grid)?,
                need!(cfg, replicates)?,
                need!(cfg, seed)?,
            );
            params.box_factor = box_factor;
            params.workers = workers;
            params.z = z;
            let est = estimators::estimate_mu(&params).map_err(config_err("estimate-mu"))?;
            partial = est.partial.as_ref().map(|f| f.message.clone());
            files.push((out, emit(|b| csv::write_mu(&est, b))?));
        }
        "estimate-rate" => {
            let params = rate_params(cfg, need!(cfg, x)?, need!(cfg, s)?, need!(cfg, n_grid)?)?;
            let report = estimators::estimate_event_rate(&params).map_err(config_err("estimate-rate"))?;
            partial = report.partial.as_ref().map(|f| f.message.clone());
            let per_n: Vec<_> = params
                .n_grid
                .iter()
                .map(|&n| {
                    let surface = RateSurface::from_estimates(&report.estimates, n);
                    (n, estimators::check_rate_properties(&surface, PROPERTY_SIGMAS))
                })
                .collect();
            files.push((out.clone(), emit(|b| csv::write_rates(&report, b))?));
            files.push((format!("{out}.diagnostics.csv"), emit(|b| csv::write_diagnostics(&report, &per_n, b))?));
        }
        "estimate-j" => {
            let d = need!(cfg, d)?;
            let x = first_point(cfg, d)?;
            let mu = need!(cfg, mu)?;
            let xis = need!(cfg, xi)?;
            let n = first_n(cfg)?;
            let ds = cfg.ds.unwrap_or(0.25);
            let dy = cfg.dy.unwrap_or(1.0);
            if !(ds > 0.0 && dy > 0.0) {
                return Err(invalid("ds", "grid spacings must be positive"));
            }
            let l1: f64 = x.iter().map(|v| v.abs()).sum();
            let xi_max = xis.iter().copied().fold(0.0, f64::max);
            let radius = cfg.j_radius.unwrap_or_else(|| ((xi_max * mu * l1 / ds).ceil() * ds).max(ds));
            // Same grid formulas as the J search so lookups hit exactly.
            let ks = (radius / ds + 1e-9).floor() as i64;
            let ky = (radius / dy + 1e-9).floor() as i64;
            let ys: Vec<Vec<f64>> = Rect::cube(&vec![0; d], ky)
                .points()
                .map(|yi| yi.iter().map(|&v| v as f64 * dy).collect())
                .collect();
            let mut ss = Vec::new();
            for si in 0..=ks {
                ss.push(si as f64 * ds);
            }
            let mut sub = cfg.clone();
            if sub.event.as_deref() == Some("upper-tail") {
                return Err(invalid("event", "J is built from a cut-point rate surface"));
            }
            sub.n_grid = Some(vec![n]);
            let params = rate_params(&sub, ys, ss, vec![n])?;
            let report = estimators::estimate_event_rate(&params).map_err(config_err("estimate-j"))?;
            partial = report.partial.as_ref().map(|f| f.message.clone());
            let mu_fn = |v: &[f64]| mu * v.iter().map(|c| c.abs()).sum::<f64>();
            let rate_fn = |s: f64, y: &[f64]| report.at(n, &EventPoint::new(s, y.to_vec())).and_then(|e| e.rate);
            let grid = JGrid { ds, dy, radius: Some(radius) };
            let points = estimators::estimate_j(&x, &xis, &mu_fn, &rate_fn, grid).map_err(config_err("estimate-j"))?;
            files.push((out.clone(), emit(|b| csv::write_j(&points, b))?));
            files.push((format!("{out}.rates.csv"), emit(|b| csv::write_rates(&report, b))?));
        }
        "upper-tail" => {
            let d = need!(cfg, d)?;
            let params = UpperTailParams {
                dim: d,
                p: need!(cfg, p)?,
                x: first_point(cfg, d)?,
                xi: need!(cfg, xi)?.first().copied().ok_or(ConfigError::Missing("xi"))?,
                mu: need!(cfg, mu)?,
                s: need!(cfg, s)?.first().copied().ok_or(ConfigError::Missing("s"))?,
                n_grid: need!(cfg, n_grid)?,
                replicates: need!(cfg, replicates)?,
                seed: need!(cfg, seed)?,
                box_factor,
                workers,
                z,
            };
            let report = estimators::upper_tail_vs_cutpoint(&params).map_err(config_err("upper-tail"))?;
            partial = report.partial.as_ref().map(|f| f.message.clone());
            files.push((out, emit(|b| csv::write_joint(&report, z, b))?));
        }
        other => return Err(CliError::Usage(format!("unknown subcommand {other:?}"))),
    }
    Ok(RunOutput { inputs, files, partial })
}

fn rate_params(cfg: &Config, xs: Vec<Vec<f64>>, ss: Vec<f64>, n_grid: Vec<u32>) -> Result<RateParams, CliError> {
    let d = need!(cfg, d)?;
    let kind: EventKind = cfg.event.as_deref().unwrap_or("cutpoint").parse().map_err(|e| invalid("event", format!("{e}")))?;
    if xs.iter().any(|x| x.len() != d) {
        return Err(invalid("x", format!("expected {d} coordinates")));
    }
    let points = ss.iter().flat_map(|&s| xs.iter().map(move |x| EventPoint::new(s, x.clone()))).collect();
    let mut params = RateParams::new(d, need!(cfg, p)?, kind, points, n_grid, need!(cfg, replicates)?, need!(cfg, seed)?);
    params.xi = cfg.xi.as_ref().and_then(|v| v.first().copied()).unwrap_or(0.0);
    params.mu = cfg.mu;
    params.alpha = cfg.alpha;
    params.box_factor = cfg.box_factor.unwrap_or(estimators::DEFAULT_BOX_FACTOR);
    params.workers = cfg.workers.unwrap_or(0);
    params.z = cfg.z.unwrap_or(estimators::DEFAULT_Z);
    Ok(params)
}

/// Shortest `*`-adjacent chain of good sites from `from` to `to`.
fn good_site_path(c: &renorm::MacroClassification, from: &[i64], to: &[i64]) -> Option<Vec<Vec<i64>>> {
    let good = |s: &[i64]| c.verdict(s).is_some_and(|v| v.is_good());
    if !good(from) || !good(to) {
        return None;
    }
    let d = from.len();
    let offsets: Vec<Vec<i64>> = Rect::cube(&vec![0; d], 1).points().filter(|o| o.iter().any(|&v| v != 0)).collect();
    let mut prev: HashMap<Vec<i64>, Vec<i64>> = HashMap::new();
    prev.insert(from.to_vec(), from.to_vec());
    let mut queue = VecDeque::from([from.to_vec()]);
    while let Some(s) = queue.pop_front() {
        if s == to {
            let mut path = vec![s.clone()];
            let mut cur = s;
            while cur != from {
                cur = prev[&cur].clone();
                path.push(cur.clone());
            }
            path.reverse();
            return Some(path);
        }
        for o in &offsets {
            let t: Vec<i64> = s.iter().zip(o).map(|(a, b)| a + b).collect();
            if good(&t) && !prev.contains_key(&t) {
                prev.insert(t.clone(), s.clone());
                queue.push_back(t);
            }
        }
    }
    None
}

fn write_run(command: &str, cfg: &Config, started: u64) -> Result<Manifest, CliError> {
    // Fail before the run if the snapshot cannot be recorded.
    cfg.to_toml()?;
    let run = execute(command, cfg)?;
    let mut manifest = Manifest::new(command, cfg.result_inputs().to_toml()?, run.inputs, started);
    for (path, bytes) in &run.files {
        std::fs::write(path, bytes).map_err(|e| runtime(format!("cannot write {path}: {e}")))?;
        manifest.outputs.push(FileEntry::of_bytes(path, bytes));
    }
    manifest.partial = run.partial;
    manifest.finished_unix_ms = now_unix_ms();
    let main = &run.files[0].0;
    manifest.write(std::path::Path::new(&manifest_path(main))).map_err(runtime)?;
    Ok(manifest)
}

fn replay(args: &ReplayArgs) -> Result<String, CliError> {
    let manifest = Manifest::read(std::path::Path::new(&args.manifest)).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let mut cfg = Config::parse(&manifest.config)?;
    cfg.workers = args.workers;
    for input in &manifest.inputs {
        let now = FileEntry::of_file(&input.path).map_err(|e| runtime(format!("{}: {e}", input.path)))?;
        if now.sha256 != input.sha256 {
            return Err(runtime(format!("input {} changed since the recorded run", input.path)));
        }
    }
    let run = execute(&manifest.command, &cfg)?;
    if run.files.len() != manifest.outputs.len() {
        return Err(runtime("replay produced a different set of outputs"));
    }
    for ((path, bytes), recorded) in run.files.iter().zip(&manifest.outputs) {
        if FileEntry::of_bytes(path, bytes).sha256 != recorded.sha256 {
            return Err(runtime(format!("output {path} differs from the recorded run")));
        }
    }
    Ok(format!("replay {}: {} output(s) identical", manifest.id, run.files.len()))
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// exit status. Diagnostics go to standard error.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let name = cli.command.name();
    let result = match &cli.command {
        Command::Replay(args) => replay(args).map(|msg| println!("{msg}")),
        Command::Sample(f)
        | Command::Ball(f)
        | Command::CutpointScan(f)
        | Command::Classify(f)
        | Command::Route(f)
        | Command::Slab(f)
        | Command::LemmaCheck(f)
        | Command::EstimateMu(f)
        | Command::EstimateRate(f)
        | Command::EstimateJ(f)
        | Command::UpperTail(f) => {
            let started = now_unix_ms();
            f.resolve().and_then(|cfg| write_run(name, &cfg, started)).map(|m| {
                if let Some(p) = &m.partial {
                    eprintln!("cutlab {name}: partial run: {p}");
                }
            })
        }
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("cutlab {name}: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_and_config_errors_have_distinct_codes() {
        assert_eq!(dispatch(["cutlab", "frobnicate"]), EXIT_USAGE);
        assert_eq!(dispatch(["cutlab", "sample", "--p", "abc"]), EXIT_USAGE);
        assert_eq!(dispatch(["cutlab", "sample", "--d", "2"]), EXIT_CONFIG);
        assert_eq!(dispatch(["cutlab", "estimate-rate", "--x", "0,0;1", "--out", "x"]), EXIT_CONFIG);
    }

    #[test]
    fn flags_override_config_fields() {
        let f = Flags { p: Some(0.8), x: Some("1,2;-3,4".into()), n_grid: Some("4,8".into()), ..Flags::default() };
        let c = f.overrides().unwrap();
        assert_eq!(c.x, Some(vec![vec![1.0, 2.0], vec![-3.0, 4.0]]));
        assert_eq!(c.n_grid, Some(vec![4, 8]));
    }
}
