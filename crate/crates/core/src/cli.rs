//! The `flea-lab` command line: config resolution, dispatch and artifact layout.
//!
//! Every run writes into `<output>/<run-id>/` a `manifest.json` holding the resolved
//! configuration, plus the CSV, JSON and SVG files of the chosen subcommand.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::classical::{self, ClassicalState, LangevinConfig};
use crate::config::{self, ConfigError, ConfigErrors, InitialState, Noise, RunConfig};
use crate::dynamics::{self, PropagationConfig, Side};
use crate::error::Error;
use crate::output::{self, Series};
use crate::phase_space::{self, HusimiField};
use crate::potential::{self, PotentialKind, DEFAULT_RATIO_THRESHOLD};
use crate::spectral::{self, Spectrum, WaveFunction};
use crate::two_level::{self, TwoLevelModel, TwoLevelPath, TwoLevelState};
use crate::wkb;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "flea-lab", version, about = "Flea perturbations of double-well ground states")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Overrides applied on top of the config file.
#[derive(Args, Debug, Clone, Default)]
pub struct CommonArgs {
    /// JSON config document.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub hbar: Option<f64>,
    #[arg(long, global = true)]
    pub omega: Option<f64>,
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    /// double_well, harmonic or anharmonic.
    #[arg(long, global = true)]
    pub kind: Option<String>,
    /// Interior grid points.
    #[arg(long, global = true)]
    pub points: Option<usize>,
    /// Flea center, half-width and height.
    #[arg(long, global = true, value_name = "B,C,D", allow_hyphen_values = true)]
    pub flea: Option<String>,
    /// Ramp duration T.
    #[arg(long, global = true, value_name = "T")]
    pub ramp: Option<f64>,
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    #[arg(long, global = true)]
    pub t_end: Option<f64>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub snapshots: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output root directory.
    #[arg(long, global = true)]
    pub output: Option<String>,
    #[arg(long, global = true)]
    pub run_id: Option<String>,
    /// Arbitrary override such as `two_level.noise=\"brownian\"` (value parsed as JSON).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Lowest two levels and the splitting.
    Spectrum,
    /// Husimi density of the ground state and its classical-limit summary.
    Husimi,
    /// Static flea: classification, size check and ground-state localization.
    CollapseStatic,
    /// Time evolution under the ramped flea, with snapshots.
    Evolve,
    /// Symmetric flea family and the outcome tally.
    Born,
    /// Two-level quench or noisy paths.
    TwoLevel,
    /// Semiclassical level pair.
    Wkb,
    /// Hamiltonian flow and Langevin transition times.
    Classical,
    /// Run a subcommand for several values of one parameter.
    Sweep(SweepArgs),
}

#[derive(Args, Debug, Clone)]
pub struct SweepArgs {
    /// Dotted config key, e.g. `hbar` or `flea.d`.
    #[arg(long)]
    pub param: String,
    #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
    pub values: Vec<f64>,
    pub target: Target,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Spectrum,
    Husimi,
    CollapseStatic,
    Evolve,
    Born,
    TwoLevel,
    Wkb,
    Classical,
}

impl Target {
    fn name(self) -> &'static str {
        match self {
            Target::Spectrum => "spectrum",
            Target::Husimi => "husimi",
            Target::CollapseStatic => "collapse-static",
            Target::Evolve => "evolve",
            Target::Born => "born",
            Target::TwoLevel => "two-level",
            Target::Wkb => "wkb",
            Target::Classical => "classical",
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Config(ConfigErrors),
    Model(Error),
    Io(io::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "invalid configuration:\n{e}"),
            CliError::Model(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Model(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Model(e) if e.is_numerical() => EXIT_NUMERICAL,
            CliError::Model(_) => EXIT_CONFIG,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

fn config_error(pointer: &str, message: impl Into<String>) -> CliError {
    CliError::Config(ConfigErrors(vec![ConfigError { pointer: pointer.into(), message: message.into() }]))
}

/// Parses `argv`, runs, prints the run directory and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match run_in(argv) {
        Ok(dir) => {
            println!("{}", dir.display());
            EXIT_OK
        }
        Err(code) => code,
    }
}

/// Like [`run`] but returns the run directory instead of printing it.
///
/// Failures are reported on stderr and come back as the exit code.
pub fn run_in<I, T>(argv: I) -> std::result::Result<PathBuf, i32>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| {
        let _ = e.print();
        e.exit_code()
    })?;
    execute(&cli).map_err(|e| {
        eprintln!("error: {e}");
        e.exit_code()
    })
}

/// Config document from file, environment fallbacks and flags, in increasing priority.
pub fn build_document(args: &CommonArgs) -> Result<Value, CliError> {
    let mut doc = match &args.config {
        Some(p) => {
            let text = fs::read_to_string(p)?;
            serde_json::from_str(&text).map_err(|e| config_error("", format!("{}: {e}", p.display())))?
        }
        None => Value::Object(Map::new()),
    };
    if !doc.is_object() {
        return Err(config_error("", "config document must be a JSON object"));
    }
    for (var, key) in [("FLEA_LAB_SEED", "seed"), ("FLEA_LAB_THREADS", "threads")] {
        if doc.get(key).is_none() {
            if let Ok(s) = std::env::var(var) {
                let v: u64 = s.trim().parse().map_err(|_| config_error(&format!("/{key}"), format!("{var}={s:?} is not an integer")))?;
                config::set_path(&mut doc, key, json!(v)).map_err(|e| CliError::Config(ConfigErrors(vec![e])))?;
            }
        }
    }
    let mut overrides: Vec<(String, Value)> = Vec::new();
    let mut num = |k: &str, v: Option<f64>| {
        if let Some(x) = v {
            overrides.push((k.into(), json!(x)));
        }
    };
    num("hbar", args.hbar);
    num("omega", args.omega);
    num("lambda", args.lambda);
    num("ramp.T", args.ramp);
    num("dynamics.dt", args.dt);
    num("dynamics.t_end", args.t_end);
    if let Some(k) = &args.kind {
        overrides.push(("kind".into(), json!(k)));
    }
    if let Some(n) = args.points {
        overrides.push(("grid.n".into(), json!(n)));
    }
    if let Some(f) = &args.flea {
        let parts: Vec<Result<f64, _>> = f.split(',').map(|s| s.trim().parse::<f64>()).collect();
        match parts.as_slice() {
            [Ok(b), Ok(c), Ok(d)] => overrides.push(("flea".into(), json!({"b": b, "c": c, "d": d}))),
            _ => return Err(config_error("/flea", format!("--flea expects B,C,D, got {f:?}"))),
        }
    }
    if let Some(s) = &args.snapshots {
        overrides.push(("dynamics.snapshots".into(), json!(s)));
    }
    if let Some(s) = args.seed {
        overrides.push(("seed".into(), json!(s)));
    }
    if let Some(t) = args.threads {
        overrides.push(("threads".into(), json!(t)));
    }
    if let Some(o) = &args.output {
        overrides.push(("output".into(), json!(o)));
    }
    if let Some(r) = &args.run_id {
        overrides.push(("run_id".into(), json!(r)));
    }
    for kv in &args.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| config_error("", format!("--set expects KEY=VALUE, got {kv:?}")))?;
        let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
        overrides.push((k.trim().to_string(), value));
    }
    for (k, v) in overrides {
        config::set_path(&mut doc, &k, v).map_err(|e| CliError::Config(ConfigErrors(vec![e])))?;
    }
    Ok(doc)
}

/// FNV-1a, stable across platforms and toolchains.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

/// `<subcommand>-<hash of the resolved config>` unless a run id was given.
pub fn run_id(subcommand: &str, cfg: &RunConfig) -> String {
    if let Some(id) = &cfg.run_id {
        return id.clone();
    }
    let mut c = cfg.clone();
    c.run_id = None;
    c.output = String::new();
    c.threads = None;
    let text = serde_json::to_string(&c.to_document()).expect("config serializes");
    format!("{subcommand}-{:016x}", fnv1a(format!("{subcommand}\n{text}").as_bytes()))
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Spectrum => "spectrum",
        Command::Husimi => "husimi",
        Command::CollapseStatic => "collapse-static",
        Command::Evolve => "evolve",
        Command::Born => "born",
        Command::TwoLevel => "two-level",
        Command::Wkb => "wkb",
        Command::Classical => "classical",
        Command::Sweep(_) => "sweep",
    }
}

fn target_of(cmd: &Command) -> Option<Target> {
    Some(match cmd {
        Command::Spectrum => Target::Spectrum,
        Command::Husimi => Target::Husimi,
        Command::CollapseStatic => Target::CollapseStatic,
        Command::Evolve => Target::Evolve,
        Command::Born => Target::Born,
        Command::TwoLevel => Target::TwoLevel,
        Command::Wkb => Target::Wkb,
        Command::Classical => Target::Classical,
        Command::Sweep(_) => return None,
    })
}

/// Runs the parsed command line and returns the run directory.
pub fn execute(cli: &Cli) -> Result<PathBuf, CliError> {
    let doc = build_document(&cli.common)?;
    let cfg = config::validate_config(&doc).map_err(CliError::Config)?;
    let name = command_name(&cli.command);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| io::Error::other(e.to_string()))?;
    let dir = Path::new(&cfg.output).join(run_id(name, &cfg));
    pool.install(|| {
        fs::create_dir_all(&dir)?;
        let mut art = Artifacts::new(&dir);
        let summary = match (&cli.command, target_of(&cli.command)) {
            (Command::Sweep(s), _) => sweep(&doc, s, &mut art)?,
            (_, Some(t)) => run_target(t, &cfg, &mut art)?,
            _ => unreachable!(),
        };
        art.json("summary.json", &summary)?;
        let mut outputs = art.files.clone();
        outputs.push("manifest.json".into());
        outputs.sort();
        let manifest = json!({
            "tool": "flea-lab",
            "version": env!("CARGO_PKG_VERSION"),
            "subcommand": name,
            "run_id": dir.file_name().map(|s| s.to_string_lossy().into_owned()),
            "config": cfg.to_document(),
            "seeds": {"seed": cfg.seed},
            "outputs": outputs,
        });
        output::write_json(&dir.join("manifest.json"), &manifest)?;
        Ok::<_, CliError>(())
    })?;
    Ok(dir)
}

/// Files written into one run directory.
pub struct Artifacts {
    dir: PathBuf,
    files: Vec<String>,
}

impl Artifacts {
    fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf(), files: Vec::new() }
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> io::Result<()> {
        output::write_csv(&self.dir.join(name), header, rows)?;
        self.files.push(name.into());
        Ok(())
    }

    fn json(&mut self, name: &str, v: &Value) -> io::Result<()> {
        output::write_json(&self.dir.join(name), v)?;
        self.files.push(name.into());
        Ok(())
    }

    fn svg(&mut self, name: &str, body: String) -> io::Result<()> {
        fs::write(self.dir.join(name), body)?;
        self.files.push(name.into());
        Ok(())
    }

    fn child(&self, name: &str) -> io::Result<Artifacts> {
        let dir = self.dir.join(name);
        fs::create_dir_all(&dir)?;
        Ok(Artifacts::new(&dir))
    }
}

fn run_target(t: Target, cfg: &RunConfig, art: &mut Artifacts) -> Result<Value, CliError> {
    match t {
        Target::Spectrum => spectrum(cfg, art),
        Target::Husimi => husimi(cfg, art),
        Target::CollapseStatic => collapse_static(cfg, art),
        Target::Evolve => evolve(cfg, art),
        Target::Born => born(cfg, art),
        Target::TwoLevel => two_level_cmd(cfg, art),
        Target::Wkb => wkb_cmd(cfg, art),
        Target::Classical => classical_cmd(cfg, art),
    }
}

fn state_rows(psi: &WaveFunction) -> Vec<Vec<f64>> {
    (0..psi.grid.n)
        .map(|i| {
            let z = psi.amplitudes[i];
            vec![psi.grid.point(i), z.re, z.im, z.norm_sqr()]
        })
        .collect()
}

const STATE_HEADER: &[&str] = &["x", "re_psi", "im_psi", "density"];

fn density_series(psi: &WaveFunction) -> Vec<(f64, f64)> {
    (0..psi.grid.n).map(|i| (psi.grid.point(i), psi.amplitudes[i].norm_sqr())).collect()
}

fn real_series(psi: &WaveFunction) -> Vec<(f64, f64)> {
    (0..psi.grid.n).map(|i| (psi.grid.point(i), psi.amplitudes[i].re)).collect()
}

fn husimi_rows(f: &HusimiField) -> Vec<Vec<f64>> {
    let g = &f.grid;
    let mut rows = Vec::with_capacity(g.n_p * g.n_q);
    for i in 0..g.n_p {
        for j in 0..g.n_q {
            rows.push(vec![g.p(i), g.q(j), f.at(i, j)]);
        }
    }
    rows
}

fn require<T: Copy>(v: Option<T>, pointer: &str, what: &str) -> Result<T, CliError> {
    v.ok_or_else(|| config_error(pointer, format!("this subcommand needs {what}")))
}

fn spectrum(cfg: &RunConfig, art: &mut Artifacts) -> Result<Value, CliError> {
    let spec = cfg.potential();
    let grid = cfg.spatial_grid()?;
    let s = spectral::solve(&spec, cfg.flea.as_ref(), cfg.hbar, &grid, 2)?;
    write_states(&s, art, "")?;
    art.csv("potential.csv", &["x", "V"], (0..grid.n).map(|i| {
        let x = grid.point(i);
        vec![x, potential::eval_potential(&spec, cfg.flea.as_ref(), None, x, 0.0)]
    }))?;
    let (ml, mr) = s.ground().mass_split();
    let mut out = json!({
        "hbar": cfg.hbar,
        "E0": s.eigenvalues[0],
        "E1": s.eigenvalues[1],
        "Delta": s.eigenvalues[1] - s.eigenvalues[0],
        "mass_left": ml,
        "mass_right": mr,
        "points": grid.n,
    });
    if spec.kind == PotentialKind::DoubleWell {
        let a = spec.minimum();
        out["d_V"] = json!(potential::agmon_distance(&spec, -a, a)?);
        out["ratio"] = json!(spectral::localization_ratio(s.ground(), &spec)?.ratio);
    }
    art.svg(
        "states.svg",
        output::line_plot(
            &format!("lowest states, hbar = {}", cfg.hbar),
            "x",
            "psi",
            &[
                Series { label: "ground", points: real_series(&s.eigenfunctions[0]) },
                Series { label: "first excited", points: real_series(&s.eigenfunctions[1]) },
            ],
        ),
    )?;
    art.json("spectrum.json", &out)?;
    Ok(out)
}

fn write_states(s: &Spectrum, art: &mut Artifacts, prefix: &str) -> io::Result<()> {
    art.csv(&format!("{prefix}ground.csv"), STATE_HEADER, state_rows(&s.eigenfunctions[0]))?;
    if s.eigenfunctions.len() > 1 {
        art.csv(&format!("{prefix}excited.csv"), STATE_HEADER, state_rows(&s.eigenfunctions[1]))?;
    }
    Ok(())
}

fn husimi(cfg: &RunConfig, art: &mut Artifacts) -> Result<Value, CliError> {
    let spec = cfg.potential();
    let grid = cfg.spatial_grid()?;
    let s = spectral::solve(&spec, cfg.flea.as_ref(), cfg.hbar, &grid, 1)?;
    let phase = cfg.phase_grid()?;
    let field = phase_space::husimi(s.ground(), &phase)?;
    art.csv("husimi.csv", &["p", "q", "chi"], husimi_rows(&field))?;
    art.svg("husimi.svg", output::heat_map(&format!("Husimi density, hbar = {}", cfg.hbar), &field))?;
    let (cp, cq) = field.centroid();
    let mut out = json!({
        "hbar": cfg.hbar,
        "total_mass": field.total_mass(),
        "min_value": field.min_value(),
        "centroid_p": cp,
        "centroid_q": cq,
    });
    if spec.kind == PotentialKind::DoubleWell {
        let m = phase_space::classical_limit_summary(&field, spec.minimum(), cfg.phase.radius)?;
        out["disk_plus"] = json!(m.plus);
        out["disk_minus"] = json!(m.minus);
        out["remainder"] = json!(m.remainder);
    }
    Ok(out)
}

fn collapse_static(cfg: &RunConfig, art: &mut Artifacts) -> Result<Value, CliError> {
    let spec = cfg.potential();
    let flea = require(cfg.flea, "/flea", "a flea")?;
    let class = potential::classify_flea(&spec, &flea)?;
    let size = potential::flea_size_check(&spec, &flea, cfg.hbar, DEFAULT_RATIO_THRESHOLD)?;
    let grid = cfg.spatial_grid()?;
    let bare = spectral::solve(&spec, None, cfg.hbar, &grid, 2)?;
    let pert = spectral::solve(&spec, Some(&flea), cfg.hbar, &grid, 2)?;
    write_states(&pert, art, "perturbed_")?;
    write_states(&bare, art, "unperturbed_")?;
    let loc = spectral::localization_ratio(pert.ground(), &spec)?;
    art.svg(
        "ground_states.svg",
        output::line_plot(
            &format!("ground state with and without the flea, hbar = {}", cfg.hbar),
            "x",
            "psi",
            &[
                Series { label: "unperturbed", points: real_series(bare.ground()) },
                Series { label: "with flea", points: real_series(pert.ground()) },
            ],
        ),
    )?;
    Ok(json!({
        "hbar": cfg.hbar,
        "case": class.case,
        "d_V": class.d_v,
        "d_V_prime": class.d_v_prime,
        "d_V_doubleprime": class.d_v_doubleprime,
        "size_condition": size.satisfied,
        "log_ratio": size.log_ratio,
        "E0": pert.eigenvalues[0],
        "E1": pert.eigenvalues[1],
        "E0_unperturbed": bare.eigenvalues[0],
        "Delta_unperturbed": bare.eigenvalues[1] - bare.eigenvalues[0],
        "mass_left": loc.mass_left,
        "mass_right": loc.mass_right,
        "ratio": loc.ratio,
    }))
}

fn fmt_time(t: f64) -> String {
    let s = format!("{t}");
    s.replace('.', "p")
}

fn evolve(cfg: &RunConfig, art: &mut Artifacts) -> Result<Value, CliError> {
    let spec = cfg.potential();
    let grid = cfg.spatial_grid()?;
    let psi0 = match cfg.dynamics.initial {
        InitialState::Ground => spectral::solve(&spec, None, cfg.hbar, &grid, 1)?.ground().clone(),
        InitialState::Coherent => phase_space::coherent_state(cfg.hbar, cfg.dynamics.p0, cfg.dynamics.q0, &grid)?,
    };
    let pc = PropagationConfig::new(cfg.dynamics.dt, cfg.dynamics.t_end, cfg.dynamics.snapshots.clone())?;
    let traj = dynamics::propagate(&psi0, &spec, cfg.flea.as_ref(), cfg.ramp.as_ref(), &pc)?;
    art.csv(
        "series.csv",
        &["t", "p_left", "p_right", "norm", "energy"],
        traj.series.iter().map(|o| vec![o.t, o.p_left, o.p_right, o.norm, o.energy]),
    )?;
    let phase = cfg.phase_grid()?;
    let mut snaps = Vec::new();
    for s in &traj.snapshots {
        let tag = fmt_time(s.observables.t);
        art.csv(&format!("snapshot_t{tag}.csv"), STATE_HEADER, state_rows(&s.psi))?;
        let field = phase_space::husimi(&s.psi, &phase)?;
        art.csv(&format!("husimi_t{tag}.csv"), &["p", "q", "chi"], husimi_rows(&field))?;
        art.svg(
            &format!("density_t{tag}.svg"),
            output::line_plot(&format!("|psi|^2 at t = {}", s.observables.t), "x", "density", &[Series {
                label: "|psi|^2",
                points: density_series(&s.psi),
            }]),
        )?;
        art.svg(&format!("husimi_t{tag}.svg"), output::heat_map(&format!("Husimi density at t = {}", s.observables.t), &field))?;
        let (cp, cq) = field.centroid();
        snaps.push(json!({
            "t": s.observables.t,
            "p_left": s.observables.p_left,
            "p_right": s.observables.p_right,
            "norm": s.observables.norm,
            "energy": s.observables.energy,
            "husimi_mass": field.total_mass(),
            "husimi_min": field.min_value(),
            "centroid_p": cp,
            "centroid_q": cq,
        }));
    }
    let (pl, pr) = traj.final_state.mass_split();
    let mut out = json!({
        "hbar": cfg.hbar,
        "t_end": cfg.dynamics.t_end,
        "steps": traj.steps,
        "p_left": pl,
        "p_right": pr,
        "norm_drift": traj.norm_drift,
        "max_step_drift": traj.max_step_drift,
        "snapshots": snaps,
    });
    if let Some(f) = &cfg.flea {
        let target = spectral::solve(&spec, Some(f), cfg.hbar, &grid, 1)?;
        out["fidelity"] = json!(dynamics::adiabatic_fidelity(&traj, target.ground())?);
    }
    if cfg.dynamics.initial == InitialState::Coherent {
        let s0 = ClassicalState::new(cfg.dynamics.q0, cfg.dynamics.p0)?;
        let s = classical::hamiltonian_flow(s0, &spec, cfg.dynamics.t_end, cfg.classical.flow_dt)?;
        out["classical_q"] = json!(s.q);
        out["classical_p"] = json!(s.p);
    }
    Ok(out)
}

fn born(cfg: &RunConfig, art: &mut Artifacts) -> Result<Value, CliError> {
    let spec = cfg.potential();
    let flea = require(cfg.flea, "/flea", "a flea")?;
    let ramp = require(cfg.ramp, "/ramp", "a ramp")?;
    let grid = cfg.spatial_grid()?;
    let pc = PropagationConfig::new(cfg.dynamics.dt, cfg.dynamics.t_end, Vec::new())?;
    let family = dynamics::symmetric_family(&flea);
    let tally = dynamics::born_ensemble(&spec, &family, &ramp, &pc, cfg.hbar, &grid)?;
    let code = |s: Side| match s {
        Side::Left => -1.0,
        Side::Right => 1.0,
        Side::Unclassified => 0.0,
    };
    art.csv(
        "members.csv",
        &["b", "c", "d", "p_left", "p_right", "fidelity", "side"],
        tally.members.iter().map(|m| vec![m.flea.b, m.flea.c, m.flea.d, m.p_left, m.p_right, m.fidelity, code(m.side)]),
    )?;
    let total = tally.members.len() as f64;
    Ok(json!({
        "hbar": cfg.hbar,
        "left": tally.left,
        "right": tally.right,
        "unclassified": tally.unclassified,
        "fraction_left": tally.left as f64 / total,
        "unclassified_outcome": tally.require_classified().is_err(),
        "members": tally.members,
    }))
}

const PATH_HEADER: &[&str] = &["t", "re_c_minus", "im_c_minus", "re_c_plus", "im_c_plus", "p_left"];

/// Rows written per time series; longer runs are thinned to every `stride`-th sample.
const MAX_SERIES_ROWS: usize = 4000;

fn stride(samples: usize) -> usize {
    samples.div_ceil(MAX_SERIES_ROWS).max(1)
}

fn path_rows(p: &TwoLevelPath) -> Vec<Vec<f64>> {
    p.times
        .iter()
        .zip(&p.states)
        .step_by(stride(p.times.len()))
        .map(|(&t, s)| vec![t, s.c_minus.re, s.c_minus.im, s.c_plus.re, s.c_plus.im, s.p_left()])
        .collect()
}

fn two_level_cmd(cfg: &RunConfig, art: &mut Artifacts) -> Result<Value, CliError> {
    let tl = &cfg.two_level;
    let hbar = cfg.hbar;
    let model = TwoLevelModel::new(tl.splitting, tl.delta, tl.side)?;
    let eig = model.eigensystem();
    let mut out = json!({
        "hbar": hbar,
        "Delta": tl.splitting,
        "delta": tl.delta,
        "E_minus": eig.e_minus,
        "E_plus": eig.e_plus,
        "amplitude": two_level::freezing_amplitude(tl.delta, tl.splitting),
    });
    // Noise runs drive the bare tunnel term and start in the left well.
    let bare = TwoLevelModel::new(tl.splitting, 0.0, tl.side)?;
    let left = TwoLevelState::left();
    let n = (tl.t_end / tl.dt).round() as usize;
    let paths: Vec<TwoLevelPath> = match tl.noise {
        Noise::None => {
            let psi0 = TwoLevelState::symmetric();
            let mut p = TwoLevelPath::default();
            for k in 0..=n {
                let t = k as f64 * tl.dt;
                let s = two_level::quench_evolution(&model, &psi0, t, hbar)?.state;
                p.times.push(t);
                p.states.push(s);
            }
            vec![p]
        }
        Noise::Brownian => (0..tl.paths as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = two_level::path_rng(cfg.seed, i);
                two_level::sde_brownian(&bare, &left, hbar, tl.dt, tl.t_end, tl.kappa, &mut rng)
            })
            .collect::<Result<_, _>>()?,
        Noise::Poisson => (0..tl.paths as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = two_level::path_rng(cfg.seed, i);
                two_level::sde_poisson(&bare, &left, hbar, tl.dt, tl.t_end, tl.rate, &mut rng)
            })
            .collect::<Result<_, _>>()?,
    };
    art.csv("path.csv", PATH_HEADER, path_rows(&paths[0]))?;
    let m = paths.len() as f64;
    let mean: Vec<f64> = (0..=n).map(|k| paths.iter().map(|p| p.states[k].p_left()).sum::<f64>() / m).collect();
    if paths.len() > 1 {
        art.csv("ensemble.csv", &["t", "mean_p_left"], (0..=n).step_by(stride(n + 1)).map(|k| vec![k as f64 * tl.dt, mean[k]]))?;
    }
    let p0 = mean[0];
    out["mean_p_left"] = json!(mean.iter().sum::<f64>() / mean.len() as f64);
    out["max_deviation"] = json!(mean.iter().map(|p| (p - p0).abs()).fold(0.0, f64::max));
    out["paths"] = json!(paths.len());
    art.svg(
        "p_left.svg",
        output::line_plot("P_L(t)", "t", "P_L", &[Series {
            label: "P_L",
            points: (0..=n).step_by(stride(n + 1)).map(|k| (k as f64 * tl.dt, mean[k])).collect(),
        }]),
    )?;
    Ok(out)
}

fn wkb_cmd(cfg: &RunConfig, art: &mut Artifacts) -> Result<Value, CliError> {
    let spec = cfg.potential();
    let n = cfg.wkb.n;
    let levels = wkb::solve_levels(&spec, cfg.flea.as_ref(), cfg.hbar, n)?;
    let grid = cfg.spatial_grid()?;
    let s = spectral::solve(&spec, cfg.flea.as_ref(), cfg.hbar, &grid, 2 * n + 2)?;
    let mut out = serde_json::to_value(&levels).expect("levels serialize");
    out["hbar"] = json!(cfg.hbar);
    out["spectral_E_minus"] = json!(s.eigenvalues[2 * n]);
    out["spectral_E_plus"] = json!(s.eigenvalues[2 * n + 1]);
    art.json("levels.json", &out)?;
    Ok(out)
}

fn classical_cmd(cfg: &RunConfig, art: &mut Artifacts) -> Result<Value, CliError> {
    let spec = cfg.potential();
    let c = &cfg.classical;
    let s0 = ClassicalState::new(c.q0, c.p0)?;
    let every = ((c.t_flow / c.flow_dt) / 1000.0).ceil().max(1.0) as usize;
    let flow = classical::flow_trajectory(s0, &spec, c.t_flow, c.flow_dt, every)?;
    art.csv("flow.csv", &["t", "q", "p", "energy"], flow.iter().map(|(t, s)| vec![*t, s.q, s.p, s.energy(&spec)]))?;
    let mut out = json!({"q_final": flow.last().map(|f| f.1.q), "p_final": flow.last().map(|f| f.1.p)});
    if spec.kind != PotentialKind::DoubleWell {
        return Ok(out);
    }
    let lc = LangevinConfig::new(c.epsilon, c.dt, c.t_max, cfg.seed)?;
    let bare = classical::langevin_transition_time(&spec, &lc, None, c.paths)?;
    let with = match &cfg.flea {
        Some(f) => Some(classical::langevin_transition_time(&spec, &lc, Some(f), c.paths)?),
        None => None,
    };
    let nan = |t: Option<f64>| t.unwrap_or(f64::NAN);
    art.csv(
        "passage.csv",
        &["path", "time", "time_with_flea"],
        (0..c.paths).map(|i| vec![i as f64, nan(bare.times[i]), with.as_ref().map_or(f64::NAN, |w| nan(w.times[i]))]),
    )?;
    for (k, v) in [
        ("epsilon", bare.epsilon),
        ("mean", bare.mean),
        ("stderr", bare.stderr),
        ("ek_prediction", bare.ek_prediction),
        ("ratio", bare.ratio),
    ] {
        out[k] = json!(v);
    }
    out["transitioned"] = json!(bare.transitioned);
    if let (Some(w), Some(f)) = (&with, &cfg.flea) {
        out["with_flea"] = json!({
            "mean": w.mean,
            "stderr": w.stderr,
            "ek_prediction": w.ek_prediction,
            "transitioned": w.transitioned,
        });
        out["kramers_inputs_unchanged"] = json!(classical::kramers_inputs(&spec, None) == classical::kramers_inputs(&spec, Some(f)));
    }
    Ok(out)
}

fn member_dir(param: &str, value: f64) -> String {
    format!("{}_{}", param.replace('.', "_"), fmt_time(value))
}

/// Least-squares slope of `ln y` against `x`.
pub fn log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn sweep(doc: &Value, args: &SweepArgs, art: &mut Artifacts) -> Result<Value, CliError> {
    let members: Vec<(f64, RunConfig)> = args
        .values
        .iter()
        .map(|&v| {
            let mut d = doc.clone();
            config::set_path(&mut d, &args.param, json!(v)).map_err(|e| CliError::Config(ConfigErrors(vec![e])))?;
            Ok((v, config::validate_config(&d).map_err(CliError::Config)?))
        })
        .collect::<Result<_, CliError>>()?;
    let children = members.iter().map(|(v, _)| art.child(&member_dir(&args.param, *v))).collect::<io::Result<Vec<_>>>()?;
    let results: Vec<(Value, Vec<String>)> = members
        .par_iter()
        .zip(children.into_par_iter())
        .map(|((_, cfg), mut child)| {
            let s = run_target(args.target, cfg, &mut child)?;
            child.json("summary.json", &s)?;
            Ok((s, child.files))
        })
        .collect::<Result<_, CliError>>()?;
    for ((v, _), (_, files)) in members.iter().zip(&results) {
        let d = member_dir(&args.param, *v);
        art.files.extend(files.iter().map(|f| format!("{d}/{f}")));
    }
    let keys: Vec<String> = match results.first() {
        Some((Value::Object(m), _)) => m.iter().filter(|(_, v)| v.is_number()).map(|(k, _)| k.clone()).collect(),
        _ => Vec::new(),
    };
    let mut header = vec![args.param.as_str()];
    header.extend(keys.iter().map(String::as_str));
    art.csv(
        "sweep.csv",
        &header,
        members.iter().zip(&results).map(|((v, _), (s, _))| {
            std::iter::once(*v).chain(keys.iter().map(|k| s.get(k).and_then(Value::as_f64).unwrap_or(f64::NAN))).collect()
        }),
    )?;
    let mut out = json!({"param": args.param, "values": args.values, "target": args.target.name()});
    if args.param == "hbar" && keys.iter().any(|k| k == "Delta") && args.values.len() >= 2 {
        let xs: Vec<f64> = args.values.iter().map(|h| 1.0 / h).collect();
        let ys: Vec<f64> = results.iter().map(|(s, _)| s["Delta"].as_f64().unwrap_or(f64::NAN)).collect();
        out["slope"] = json!(log_slope(&xs, &ys));
        if let Some(d) = results[0].0.get("d_V") {
            out["d_V"] = d.clone();
        }
    }
    Ok(out)
}
