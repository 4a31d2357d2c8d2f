//! Command-line front end: one subcommand per scenario, each writing `results.csv`,
//! `plot.svg` and `run.json` into an output directory.

pub mod output;
pub mod scenarios;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Arg, ArgAction, ArgMatches, Command};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::lattice::LATTICE_PRESETS;
use crate::Error;
use output::write_atomic;
use scenarios::{Context, Outcome};

/// Config schema version understood by this build.
pub const CONFIG_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
/// Bad flags, unreadable or invalid config, bad parameters.
pub const EXIT_CONFIG: i32 = 1;
/// The computation failed or a validation check did not pass.
pub const EXIT_COMPUTE: i32 = 2;

/// Top level of a scenario config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub params: Value,
}

pub struct ScenarioInfo {
    pub name: &'static str,
    pub about: &'static str,
    pub columns: &'static str,
    /// Default lattice preset, for scenarios that build a lattice.
    pub preset: Option<&'static str>,
}

pub const SCENARIOS: &[ScenarioInfo] = &[
    ScenarioInfo { name: "hom", about: "Two-photon coincidences at a balanced beamsplitter versus delay", columns: "tau, P11_boson, P11_fermion, P11_classical", preset: None },
    ScenarioInfo { name: "w-shape", about: "Threefold tritter coincidences for identical photons versus delay", columns: "tau, P111", preset: None },
    ScenarioInfo { name: "mercedes", about: "Threefold tritter coincidences for Mercedes-star polarizations", columns: "tau, P111", preset: None },
    ScenarioInfo { name: "triad-sweep", about: "Triad-phase sweep with flat twofold coincidences", columns: "theta, triad_phase, P111, P011, P101, P110", preset: None },
    ScenarioInfo { name: "circle-dance", about: "Fourfold fringe driven by the collective four-photon phase", columns: "theta, P1111_engine, P1111_formula", preset: None },
    ScenarioInfo { name: "locking", about: "Twofold quitter signal used to lock the interferometer phase", columns: "chi, P_formula, P_engine", preset: None },
    ScenarioInfo { name: "ghz", about: "n-fold detection probabilities in the GHZ interferometer", columns: "phase, P_A{j}_B{n-j} for j = 0..n", preset: None },
    ScenarioInfo { name: "noise-model", about: "Heralded-count visibilities with multi-pair emission and noise", columns: "scenario, rate, reference_rate, conditional_rate, conditional_reference_rate, visibility", preset: None },
    ScenarioInfo { name: "lattice-spectrum", about: "Eigenvalues and density of states of a honeycomb lattice", columns: "index, energy (dos.csv: energy, count)", preset: Some("vortex-1267") },
    ScenarioInfo { name: "zero-mode", about: "Zero mode bound to a Kekulé vortex", columns: "site, x, y, sublattice, amplitude_re, amplitude_im, intensity, analytic_intensity (eigenvalues.csv: index, energy)", preset: Some("thesis-1192") },
    ScenarioInfo { name: "translate", about: "Adiabatic transport of a vortex-bound mode", columns: "length_mm, steps, fidelity, change, converged", preset: Some("translate-940") },
    ScenarioInfo { name: "disorder-sweep", about: "Zero-mode sublattice ratio under positional disorder", columns: "r_d, mean_gamma, min_gamma, seeds", preset: Some("disorder-700") },
    ScenarioInfo { name: "braid", about: "Exchange of two vortex-bound modes and a static control", columns: "case, mode, phase, fidelity, change, converged", preset: Some("thesis-1192") },
    ScenarioInfo { name: "winding", about: "SSH winding number versus hopping ratio, plus a domain-wall mode", columns: "t_r, winding", preset: None },
    ScenarioInfo { name: "chern", about: "Chern number of a two-band lattice model versus mass", columns: "m, chern", preset: None },
    ScenarioInfo { name: "characterize", about: "Reconstruct random unitaries from synthetic fringe data", columns: "trial, noise, fidelity", preset: None },
    ScenarioInfo { name: "validate", about: "Engine-versus-oracle equivalence and invariant checks", columns: "check, value, tolerance, passed", preset: None },
];

pub fn scenario_info(name: &str) -> Option<&'static ScenarioInfo> {
    SCENARIOS.iter().find(|s| s.name == name)
}

fn common_args(cmd: Command) -> Command {
    cmd.arg(Arg::new("config").long("config").value_name("FILE").value_parser(clap::value_parser!(PathBuf)).help("JSON scenario config"))
        .arg(Arg::new("out").long("out").value_name("DIR").value_parser(clap::value_parser!(PathBuf)).help("Output directory [default: photonweave-out/<scenario>]"))
        .arg(Arg::new("seed").long("seed").value_name("N").value_parser(clap::value_parser!(u64)).help("RNG seed for stochastic scenarios"))
        .arg(Arg::new("threads").long("threads").value_name("N").value_parser(clap::value_parser!(usize)).help("Worker threads"))
        .arg(Arg::new("preset").long("preset").value_name("NAME").help("Lattice preset"))
        .arg(Arg::new("print-config").long("print-config").action(ArgAction::SetTrue).help("Print the resolved config as JSON and exit"))
}

pub fn command() -> Command {
    let presets: Vec<&str> = LATTICE_PRESETS.iter().map(|p| p.0).collect();
    let mut cmd = Command::new("photonweave")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Multi-photon interference and topological photonic lattices")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .after_help(format!(
            "Every subcommand writes results.csv, plot.svg and run.json to its output directory.\n\
             Exit status: 0 success, 1 usage or config error, 2 computation or validation failure.\n\
             Lattice presets: {}",
            presets.join(", ")
        ));
    for s in SCENARIOS {
        let mut help = format!("results.csv columns: {}", s.columns);
        if let Some(p) = s.preset {
            help.push_str(&format!("\ndefault preset: {p}"));
        }
        cmd = cmd.subcommand(common_args(Command::new(s.name).about(s.about).after_help(help)));
    }
    cmd
}

/// Failure with its exit status.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        Self { code: EXIT_CONFIG, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parameter(_) | Error::Dimension(_) | Error::Constraint(_) => EXIT_CONFIG,
            _ => EXIT_COMPUTE,
        };
        Self { code, message: e.to_string() }
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_CONFIG,
            };
        }
    };
    let Some((name, sub)) = matches.subcommand() else {
        return EXIT_CONFIG;
    };
    match run_subcommand(name, sub) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn main() -> i32 {
    run(std::env::args_os())
}

fn load_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let cfg: ScenarioConfig =
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("invalid config {}: {e}", path.display())))?;
    if cfg.version != CONFIG_VERSION {
        return Err(CliError::config(format!(
            "config version {} is not supported (expected {CONFIG_VERSION})",
            cfg.version
        )));
    }
    Ok(cfg)
}

fn run_subcommand(name: &str, m: &ArgMatches) -> Result<i32, CliError> {
    let info = scenario_info(name).ok_or_else(|| CliError::config(format!("unknown scenario {name}")))?;
    let mut cfg = match m.get_one::<PathBuf>("config") {
        Some(path) => load_config(path)?,
        None => ScenarioConfig { version: CONFIG_VERSION, scenario: None, seed: None, preset: None, out: None, params: Value::Null },
    };
    if let Some(s) = &cfg.scenario {
        if s != name {
            return Err(CliError::config(format!("config is for scenario '{s}', not '{name}'")));
        }
    }
    cfg.scenario = Some(name.to_string());
    if let Some(seed) = m.get_one::<u64>("seed") {
        cfg.seed = Some(*seed);
    }
    if let Some(p) = m.get_one::<String>("preset") {
        cfg.preset = Some(p.clone());
    }
    if let Some(o) = m.get_one::<PathBuf>("out") {
        cfg.out = Some(o.clone());
    }
    match (&cfg.preset, info.preset) {
        (Some(p), None) => return Err(CliError::config(format!("scenario {name} takes no lattice preset (got '{p}')"))),
        (Some(p), Some(_)) if !LATTICE_PRESETS.iter().any(|q| q.0 == p) => {
            let known: Vec<&str> = LATTICE_PRESETS.iter().map(|q| q.0).collect();
            return Err(CliError::config(format!("unknown preset '{p}' (known: {})", known.join(", "))));
        }
        (None, Some(d)) => cfg.preset = Some(d.to_string()),
        _ => {}
    }
    if let Some(n) = m.get_one::<usize>("threads") {
        set_threads(*n)?;
    }
    let ctx = Context { seed: cfg.seed, preset: cfg.preset.clone() };

    if m.get_flag("print-config") {
        let (params, _) = dispatch(name, &cfg.params, &ctx, false)?;
        cfg.params = params;
        println!("{}", serde_json::to_string_pretty(&cfg).expect("config serializes"));
        return Ok(EXIT_OK);
    }

    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("photonweave-out").join(name));
    let start = Instant::now();
    let (params, outcome) = dispatch(name, &cfg.params, &ctx, true)?;
    let outcome = outcome.expect("dispatch ran the scenario");
    let wall = start.elapsed().as_secs_f64();
    cfg.params = params;
    write_artifacts(&out, &cfg, info, &outcome, wall)?;

    println!("{name}: wrote {}", out.display());
    if let Value::Object(map) = &outcome.summary {
        for (k, v) in map {
            println!("  {k} = {v}");
        }
    }
    if !outcome.failures.is_empty() {
        eprintln!("failed checks: {}", outcome.failures.join(", "));
        return Ok(EXIT_COMPUTE);
    }
    Ok(EXIT_OK)
}

fn set_threads(n: usize) -> Result<(), CliError> {
    if n == 0 {
        return Err(CliError::config("--threads must be at least 1"));
    }
    #[cfg(feature = "parallel")]
    {
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn parse_params<P: DeserializeOwned + Default>(raw: &Value) -> Result<P, CliError> {
    if raw.is_null() {
        return Ok(P::default());
    }
    serde_json::from_value(raw.clone()).map_err(|e| CliError::config(format!("invalid params: {e}")))
}

fn exec<P, F>(raw: &Value, ctx: &Context, run: bool, f: F) -> Result<(Value, Option<Outcome>), CliError>
where
    P: Serialize + DeserializeOwned + Default,
    F: FnOnce(&P, &Context) -> crate::Result<Outcome>,
{
    let p: P = parse_params(raw)?;
    let resolved = serde_json::to_value(&p).expect("params serialize");
    let outcome = if run { Some(f(&p, ctx)?) } else { None };
    Ok((resolved, outcome))
}

/// Parses the params for `name`, fills defaults, and runs the scenario when `run` is set.
pub fn dispatch(name: &str, raw: &Value, ctx: &Context, run: bool) -> Result<(Value, Option<Outcome>), CliError> {
    use scenarios as s;
    match name {
        "hom" => exec(raw, ctx, run, s::hom),
        "w-shape" => exec(raw, ctx, run, s::w_shape),
        "mercedes" => exec(raw, ctx, run, s::mercedes),
        "triad-sweep" => exec(raw, ctx, run, s::triad),
        "circle-dance" => exec(raw, ctx, run, s::circle_dance),
        "locking" => exec(raw, ctx, run, s::locking),
        "ghz" => exec(raw, ctx, run, s::ghz),
        "noise-model" => exec(raw, ctx, run, s::noise_model),
        "lattice-spectrum" => exec(raw, ctx, run, s::lattice_spectrum),
        "zero-mode" => exec(raw, ctx, run, s::zero_mode),
        "translate" => exec(raw, ctx, run, s::translate),
        "disorder-sweep" => exec(raw, ctx, run, s::disorder),
        "braid" => exec(raw, ctx, run, s::braid_run),
        "winding" => exec(raw, ctx, run, s::winding),
        "chern" => exec(raw, ctx, run, s::chern),
        "characterize" => exec(raw, ctx, run, s::characterize),
        "validate" => exec(raw, ctx, run, s::validate),
        other => Err(CliError::config(format!("unknown scenario {other}"))),
    }
}

fn write_artifacts(dir: &Path, cfg: &ScenarioConfig, info: &ScenarioInfo, o: &Outcome, wall: f64) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::config(format!("cannot write to {}: {e}", dir.display()));
    let mut artifacts = vec!["results.csv".to_string(), "plot.svg".to_string()];
    write_atomic(&dir.join("results.csv"), o.table.to_csv().as_bytes()).map_err(io)?;
    write_atomic(&dir.join("plot.svg"), o.plot.to_svg().as_bytes()).map_err(io)?;
    for (file, table) in &o.extra {
        write_atomic(&dir.join(file), table.to_csv().as_bytes()).map_err(io)?;
        artifacts.push(file.clone());
    }
    artifacts.push("run.json".into());
    let run = json!({
        "toolkit": "photonweave",
        "version": env!("CARGO_PKG_VERSION"),
        "scenario": info.name,
        "config": cfg,
        "columns": o.table.columns,
        "rows": o.table.rows.len(),
        "summary": o.summary,
        "failed_checks": o.failures,
        "artifacts": artifacts,
        "wall_time_s": wall,
    });
    let text = serde_json::to_string_pretty(&run).expect("run record serializes") + "\n";
    write_atomic(&dir.join("run.json"), text.as_bytes()).map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_scenario_has_a_subcommand_and_default_params() {
        let cmd = command();
        for s in SCENARIOS {
            assert!(cmd.find_subcommand(s.name).is_some(), "{}", s.name);
            let (params, outcome) = dispatch(s.name, &Value::Null, &Context::default(), false).unwrap();
            assert!(outcome.is_none());
            // Defaults round-trip through the params schema.
            let again = dispatch(s.name, &params, &Context::default(), false).unwrap().0;
            assert_eq!(params, again, "{}", s.name);
        }
    }

    #[test]
    fn unknown_param_keys_are_config_errors() {
        let err = dispatch("hom", &json!({ "sigmaa": 1.0 }), &Context::default(), false).unwrap_err();
        assert_eq!(err.code, EXIT_CONFIG);
    }

    #[test]
    fn error_codes() {
        assert_eq!(CliError::from(Error::Parameter("x".into())).code, EXIT_CONFIG);
        assert_eq!(CliError::from(Error::NoMode("x".into())).code, EXIT_COMPUTE);
    }
}
