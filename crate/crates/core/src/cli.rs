//! Command-line front end: `plan`, `simulate`, `bench` and `validate`.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | I/O or internal failure |
//! | 2 | usage error (bad flag, bad config file, empty suite) |
//! | 3 | scenario validation failure |
//! | 4 | planner found no route |
//! | 5 | a vehicle was stranded (simulate without `--allow-stranded`) |

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::eval::{compare_algorithms, prepare_suite, with_jobs, DEFAULT_RHO};
use crate::graph::apply_event;
use crate::heuristics::{adapt_weights, HeuristicWeights, DEFAULT_ALPHA};
use crate::planners::{dijkstra_ucs, dyn_a_star, greedy_best_first, rrt_plan, static_a_star, SearchParams};
use crate::scenario::{load_scenario_file, Scenario, ScenarioError};
use crate::sim::{run_simulation, Algorithm, SimConfig, VehicleStatus, DEFAULT_EPOCH_S};
use crate::suite::suite_files;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_UNREACHABLE: i32 = 4;
pub const EXIT_STRANDED: i32 = 5;

#[derive(Debug, Parser)]
#[command(
    name = "dynroute",
    version,
    about = "Dynamic multi-heuristic routing and fleet simulation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Plan one query on the scenario's state at its departure time.
    Plan(Common),
    /// Run the fleet simulation and write trace.json and vehicles.csv.
    Simulate(Common),
    /// Score every algorithm over a suite directory.
    Bench(Common),
    /// Parse and validate scenario files without running anything.
    Validate(Common),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Scenario file (repeatable for validate)
    #[arg(long)]
    pub scenario: Vec<PathBuf>,
    /// Directory of *.scn files
    #[arg(long)]
    pub suite: Option<PathBuf>,
    /// Planner: ucs, greedy, astar, rrt, dyn_astar [default: dyn_astar]
    #[arg(long, value_parser = parse_algo)]
    pub algo: Option<Algorithm>,
    /// Weights wg,w1,w2,w3; wg > 0, others >= 0 [default: the query's own]
    #[arg(long, value_parser = parse_weights)]
    pub weights: Option<HeuristicWeights>,
    /// Score tolerance on the oracle cost, >= 1 [default: 1.15]
    #[arg(long, value_parser = parse_rho)]
    pub rho: Option<f64>,
    /// Replanning epoch in seconds, > 0 [default: 30]
    #[arg(long = "epoch-s", value_parser = parse_epoch)]
    pub epoch_s: Option<f64>,
    /// Observation smoothing factor, in (0, 1] [default: 0.3]
    #[arg(long, value_parser = parse_alpha)]
    pub alpha: Option<f64>,
    /// Random seed, 0..=2^64-1 [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; files appear only after a complete run
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for bench, 0 = all cores, 0..=1024 [default: 0]
    #[arg(long, value_parser = parse_jobs)]
    pub jobs: Option<usize>,
    /// Exit 0 from simulate even if a vehicle is stranded
    #[arg(long)]
    pub allow_stranded: bool,
    /// Query index or vehicle id for plan [default: 0]
    #[arg(long)]
    pub query: Option<String>,
    /// Disable observation sharing between vehicles
    #[arg(long)]
    pub no_sharing: bool,
    /// Relative noise on reported travel times, 0..=1 [default: 0]
    #[arg(long = "noise-sigma", value_parser = parse_noise)]
    pub noise_sigma: Option<f64>,
    /// JSON file supplying any of the flags above; flags win
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Flag values as they may appear in a `--config` file.
#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub scenario: Option<Vec<PathBuf>>,
    pub suite: Option<PathBuf>,
    pub algo: Option<String>,
    pub weights: Option<String>,
    pub rho: Option<f64>,
    pub epoch_s: Option<f64>,
    pub alpha: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub allow_stranded: Option<bool>,
    pub query: Option<String>,
    pub no_sharing: Option<bool>,
    pub noise_sigma: Option<f64>,
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenarios: Vec<PathBuf>,
    pub suite: Option<PathBuf>,
    pub algorithm: Algorithm,
    pub weights: Option<HeuristicWeights>,
    pub rho: f64,
    pub epoch_s: f64,
    pub alpha: f64,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub jobs: usize,
    pub allow_stranded: bool,
    pub query: Option<String>,
    pub sharing: bool,
    pub noise_sigma: f64,
}

fn parse_algo(s: &str) -> Result<Algorithm, String> {
    match s.parse::<Algorithm>()? {
        Algorithm::OracleReplay => Err("`oracle` is not a selectable planner".into()),
        a => Ok(a),
    }
}

fn parse_weights(s: &str) -> Result<HeuristicWeights, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err(format!("expected four comma-separated numbers wg,w1,w2,w3, got `{s}`"));
    }
    let mut v = [0.0; 4];
    for (slot, p) in v.iter_mut().zip(&parts) {
        *slot = p.parse::<f64>().map_err(|_| format!("`{p}` is not a number"))?;
    }
    HeuristicWeights::new(v[0], v[1], v[2], v[3]).map_err(|e| e.to_string())
}

fn number(s: &str) -> Result<f64, String> {
    s.parse::<f64>().map_err(|_| format!("`{s}` is not a number"))
}

fn check_rho(v: f64) -> Result<f64, String> {
    if v.is_finite() && v >= 1.0 {
        Ok(v)
    } else {
        Err(format!("rho must be >= 1 (got {v})"))
    }
}

fn check_epoch(v: f64) -> Result<f64, String> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(format!("epoch-s must be > 0 (got {v})"))
    }
}

fn check_alpha(v: f64) -> Result<f64, String> {
    if v.is_finite() && v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err(format!("alpha must lie in (0, 1] (got {v})"))
    }
}

fn check_noise(v: f64) -> Result<f64, String> {
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("noise-sigma must lie in [0, 1] (got {v})"))
    }
}

fn check_jobs(v: usize) -> Result<usize, String> {
    if v <= 1024 {
        Ok(v)
    } else {
        Err(format!("jobs must lie in 0..=1024 (got {v})"))
    }
}

fn parse_rho(s: &str) -> Result<f64, String> {
    check_rho(number(s)?)
}

fn parse_epoch(s: &str) -> Result<f64, String> {
    check_epoch(number(s)?)
}

fn parse_alpha(s: &str) -> Result<f64, String> {
    check_alpha(number(s)?)
}

fn parse_noise(s: &str) -> Result<f64, String> {
    check_noise(number(s)?)
}

fn parse_jobs(s: &str) -> Result<usize, String> {
    check_jobs(
        s.parse::<usize>()
            .map_err(|_| format!("`{s}` is not a non-negative integer"))?,
    )
}

/// Merges flags over the optional config file, then applies defaults.
pub fn resolve(c: &Common) -> Result<RunConfig, String> {
    let file: ConfigFile = match &c.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| format!("cannot read config {}: {e}", p.display()))?;
            serde_json::from_str(&text).map_err(|e| format!("bad config {}: {e}", p.display()))?
        }
        None => ConfigFile::default(),
    };
    let algorithm = match (c.algo, &file.algo) {
        (Some(a), _) => a,
        (None, Some(s)) => parse_algo(s)?,
        (None, None) => Algorithm::DynAStar,
    };
    let weights = match (c.weights, &file.weights) {
        (Some(w), _) => Some(w),
        (None, Some(s)) => Some(parse_weights(s)?),
        (None, None) => None,
    };
    Ok(RunConfig {
        scenarios: if c.scenario.is_empty() {
            file.scenario.unwrap_or_default()
        } else {
            c.scenario.clone()
        },
        suite: c.suite.clone().or(file.suite),
        algorithm,
        weights,
        rho: check_rho(c.rho.or(file.rho).unwrap_or(DEFAULT_RHO))?,
        epoch_s: check_epoch(c.epoch_s.or(file.epoch_s).unwrap_or(DEFAULT_EPOCH_S))?,
        alpha: check_alpha(c.alpha.or(file.alpha).unwrap_or(DEFAULT_ALPHA))?,
        seed: c.seed.or(file.seed).unwrap_or(0),
        out: c.out.clone().or(file.out),
        jobs: check_jobs(c.jobs.or(file.jobs).unwrap_or(0))?,
        allow_stranded: c.allow_stranded || file.allow_stranded.unwrap_or(false),
        query: c.query.clone().or(file.query),
        sharing: !(c.no_sharing || file.no_sharing.unwrap_or(false)),
        noise_sigma: check_noise(c.noise_sigma.or(file.noise_sigma).unwrap_or(0.0))?,
    })
}

impl RunConfig {
    fn sim_config(&self) -> SimConfig {
        SimConfig {
            epoch_s: self.epoch_s,
            alpha: self.alpha,
            sharing: self.sharing,
            noise_sigma: self.noise_sigma,
            seed: self.seed,
            algorithm: self.algorithm,
            weights_override: self.weights,
            ..SimConfig::default()
        }
    }
}

/// Failure carrying its exit code.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn io(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_IO,
            message: message.into(),
        }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        let code = if matches!(e, ScenarioError::Io { .. }) {
            EXIT_IO
        } else {
            EXIT_VALIDATION
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

/// Writes every file to a temporary name first, then renames them into place.
fn write_outputs(dir: &Path, files: &[(&str, String)]) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::io(format!("cannot create {}: {e}", dir.display())))?;
    let mut staged = Vec::new();
    for (name, body) in files {
        let tmp = dir.join(format!(".{name}.tmp"));
        fs::write(&tmp, body).map_err(|e| Failure::io(format!("cannot write {}: {e}", tmp.display())))?;
        staged.push((tmp, dir.join(name)));
    }
    for (tmp, dest) in staged {
        fs::rename(&tmp, &dest).map_err(|e| Failure::io(format!("cannot write {}: {e}", dest.display())))?;
    }
    Ok(())
}

fn single_scenario(cfg: &RunConfig) -> Result<Scenario, Failure> {
    match cfg.scenarios.as_slice() {
        [one] => Ok(load_scenario_file(one)?),
        [] => Err(Failure::usage("--scenario is required")),
        _ => Err(Failure::usage("exactly one --scenario is expected")),
    }
}

#[derive(Serialize)]
struct PlanDocument<'a> {
    scenario: &'a str,
    vehicle: &'a str,
    algorithm: &'a str,
    status: &'a str,
    path: Vec<&'a str>,
    g_cost: f64,
    f_cost: f64,
    expanded: usize,
    weights: HeuristicWeights,
}

fn cmd_plan(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32, Failure> {
    let s = single_scenario(cfg)?;
    let qi = match cfg.query.as_deref() {
        None => 0,
        Some(q) => match q.parse::<usize>() {
            Ok(i) => i,
            Err(_) => s
                .queries
                .iter()
                .position(|x| x.vehicle == q)
                .ok_or_else(|| Failure::usage(format!("no vehicle `{q}` in {}", s.name)))?,
        },
    };
    let q = s
        .queries
        .get(qi)
        .ok_or_else(|| Failure::usage(format!("query {qi} out of range ({} queries)", s.queries.len())))?;

    // The planner sees every broadcast event up to departure.
    let mut graph = s.graph.clone();
    let mut field = s.initial_field.clone();
    for ev in s.events.iter().filter(|e| !e.latent && e.at_time_s <= q.depart_s) {
        apply_event(&mut graph, &mut field, ev).map_err(|e| Failure::io(e.to_string()))?;
    }
    let snap = graph.snapshot(&field, q.depart_s);
    let weights = adapt_weights(&cfg.weights.unwrap_or(q.weights), &q.context);
    let params = SearchParams {
        weights,
        rng_seed: cfg.seed,
        ..SearchParams::default()
    };
    let result = match cfg.algorithm {
        Algorithm::Ucs => dijkstra_ucs(&snap, q.start, q.goal),
        Algorithm::Greedy => greedy_best_first(&snap, q.start, q.goal),
        Algorithm::AStar => static_a_star(&snap, q.start, q.goal),
        Algorithm::Rrt => rrt_plan(&snap, q.start, q.goal, &params),
        Algorithm::DynAStar | Algorithm::OracleReplay => dyn_a_star(&snap, q.start, q.goal, &params),
    }
    .map_err(|e| Failure::usage(e.to_string()))?;

    let names: Vec<&str> = result.path.iter().map(|&n| s.graph.node_name(n)).collect();
    let status = if result.is_found() { "Found" } else { "Unreachable" };
    let _ = writeln!(out, "vehicle: {}", q.vehicle);
    let _ = writeln!(out, "algorithm: {}", cfg.algorithm);
    let _ = writeln!(out, "status: {status}");
    if result.is_found() {
        let _ = writeln!(out, "path: {}", names.join(" "));
        let _ = writeln!(out, "g_cost: {}", result.g_cost);
        let _ = writeln!(out, "f_cost: {}", result.f_cost_at_goal);
    }
    let _ = writeln!(out, "expanded: {}", result.expanded);

    if let Some(dir) = &cfg.out {
        let doc = PlanDocument {
            scenario: &s.name,
            vehicle: &q.vehicle,
            algorithm: cfg.algorithm.name(),
            status,
            path: names,
            g_cost: result.g_cost,
            f_cost: result.f_cost_at_goal,
            expanded: result.expanded,
            weights,
        };
        let value = serde_json::to_value(&doc).map_err(|e| Failure::io(e.to_string()))?;
        let mut body = serde_json::to_string_pretty(&value).map_err(|e| Failure::io(e.to_string()))?;
        body.push('\n');
        write_outputs(dir, &[("plan.json", body)])?;
    }
    Ok(if result.is_found() { EXIT_OK } else { EXIT_UNREACHABLE })
}

fn cmd_simulate(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32, Failure> {
    let s = single_scenario(cfg)?;
    let trace = run_simulation(&s, cfg.sim_config()).map_err(|e| Failure::usage(e.to_string()))?;
    let csv = trace.to_csv();
    let _ = out.write_all(csv.as_bytes());
    if let Some(dir) = &cfg.out {
        write_outputs(dir, &[("trace.json", trace.to_json()), ("vehicles.csv", csv)])?;
    }
    let stranded = trace
        .vehicles
        .iter()
        .filter(|v| v.status == VehicleStatus::Stranded)
        .count();
    Ok(if stranded > 0 && !cfg.allow_stranded {
        EXIT_STRANDED
    } else {
        EXIT_OK
    })
}

fn cmd_bench(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32, Failure> {
    let dir = cfg
        .suite
        .as_ref()
        .ok_or_else(|| Failure::usage("--suite is required"))?;
    let files = suite_files(dir).map_err(|e| Failure::usage(format!("cannot read suite {}: {e}", dir.display())))?;
    if files.is_empty() {
        return Err(Failure::usage(format!(
            "suite {} contains no .scn files",
            dir.display()
        )));
    }
    let scenarios = files
        .iter()
        .map(|p| load_scenario_file(p))
        .collect::<Result<Vec<_>, _>>()?;
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string());
    let report = with_jobs(cfg.jobs, || {
        let suite = prepare_suite(&name, &scenarios, cfg.epoch_s)?;
        compare_algorithms(&suite, cfg.sim_config(), cfg.rho)
    })
    .map_err(|e| Failure::usage(e.to_string()))?;
    let table = report.to_table();
    let _ = out.write_all(table.as_bytes());
    if let Some(dir) = &cfg.out {
        write_outputs(
            dir,
            &[
                ("scores.csv", report.to_csv()),
                ("scores.txt", table),
                ("cells.csv", report.cells_csv()),
            ],
        )?;
    }
    Ok(EXIT_OK)
}

fn cmd_validate(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32, Failure> {
    let mut files = cfg.scenarios.clone();
    if let Some(dir) = &cfg.suite {
        files
            .extend(suite_files(dir).map_err(|e| Failure::usage(format!("cannot read suite {}: {e}", dir.display())))?);
    }
    if files.is_empty() {
        return Err(Failure::usage("nothing to validate: pass --scenario or --suite"));
    }
    let mut worst = EXIT_OK;
    for path in &files {
        match load_scenario_file(path) {
            Ok(_) => {
                let _ = writeln!(out, "OK {}", path.display());
            }
            Err(e) => {
                let line = e.line().map(|l| l.to_string()).unwrap_or_default();
                let _ = writeln!(out, "ERROR {}:{}:{}: {}", path.display(), line, e.code(), e);
                let code = Failure::from(e).code;
                if worst == EXIT_OK || code == EXIT_VALIDATION {
                    worst = code;
                }
            }
        }
    }
    Ok(worst)
}

type CommandFn = fn(&RunConfig, &mut dyn Write) -> Result<i32, Failure>;

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let (common, cmd): (&Common, CommandFn) = match &cli.command {
        Command::Plan(c) => (c, cmd_plan),
        Command::Simulate(c) => (c, cmd_simulate),
        Command::Bench(c) => (c, cmd_bench),
        Command::Validate(c) => (c, cmd_validate),
    };
    let cfg = match resolve(common) {
        Ok(c) => c,
        Err(m) => {
            let _ = writeln!(err, "error: {m}");
            return EXIT_USAGE;
        }
    };
    match cmd(&cfg, out) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_flag_parses_and_checks() {
        let w = parse_weights("1,0,0.5,2").unwrap();
        assert_eq!((w.w_g, w.w1, w.w2, w.w3), (1.0, 0.0, 0.5, 2.0));
        assert!(parse_weights("0,1,1,1").is_err());
        assert!(parse_weights("1,1,1").is_err());
        assert!(parse_weights("1,-1,0,0").is_err());
    }

    #[test]
    fn ranges_enforced() {
        assert!(parse_rho("0.99").is_err());
        assert!(parse_epoch("0").is_err());
        assert!(parse_alpha("1.5").is_err());
        assert!(parse_jobs("-1").is_err());
        assert!(parse_algo("oracle").is_err());
    }

    #[test]
    fn flags_win_over_config() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        fs::write(&cfg, r#"{"rho": 2.0, "epoch_s": 10, "algo": "ucs"}"#).unwrap();
        let common = Common {
            config: Some(cfg),
            rho: Some(1.5),
            ..Common::default()
        };
        let r = resolve(&common).unwrap();
        assert_eq!(r.rho, 1.5);
        assert_eq!(r.epoch_s, 10.0);
        assert_eq!(r.algorithm, Algorithm::Ucs);
    }

    #[test]
    fn unknown_config_key_is_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        fs::write(&cfg, r#"{"rhoo": 2.0}"#).unwrap();
        let common = Common {
            config: Some(cfg),
            ..Common::default()
        };
        assert!(resolve(&common).is_err());
    }
}
