//! Run configuration: a JSON document validated into typed settings.
//!
//! Validation never stops at the first problem; every error carries the JSON pointer of
//! the offending value.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::phase_space::{default_radius, PhaseGrid};
use crate::potential::{FleaSpec, PotentialKind, PotentialSpec, RampSpec};
use crate::spectral::{self, Grid};
use crate::two_level::{FleaSide, MAX_KAPPA2_DT};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub pointer: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = if self.pointer.is_empty() { "/" } else { &self.pointer };
        write!(f, "{p}: {}", self.message)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    Ground,
    Coherent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Noise {
    None,
    Brownian,
    Poisson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub n: usize,
    /// Box half-width; derived from the potential and flea when absent.
    pub half_width: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicsConfig {
    pub dt: f64,
    pub t_end: f64,
    pub snapshots: Vec<f64>,
    pub initial: InitialState,
    pub p0: f64,
    pub q0: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseConfig {
    pub p_min: f64,
    pub p_max: f64,
    pub n_p: usize,
    pub q_min: f64,
    pub q_max: f64,
    pub n_q: usize,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelConfig {
    #[serde(rename = "Delta")]
    pub splitting: f64,
    pub delta: f64,
    pub side: FleaSide,
    pub dt: f64,
    pub t_end: f64,
    pub noise: Noise,
    pub kappa: f64,
    pub rate: f64,
    pub paths: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WkbConfig {
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalConfig {
    pub epsilon: f64,
    pub dt: f64,
    pub t_max: f64,
    pub paths: usize,
    pub q0: f64,
    pub p0: f64,
    pub t_flow: f64,
    pub flow_dt: f64,
}

/// Fully resolved settings; serializing and re-validating gives the same value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub omega: f64,
    pub lambda: f64,
    pub kind: PotentialKind,
    pub hbar: f64,
    pub flea: Option<FleaSpec>,
    pub ramp: Option<RampSpec>,
    pub grid: GridConfig,
    pub dynamics: DynamicsConfig,
    pub phase: PhaseConfig,
    pub two_level: TwoLevelConfig,
    pub wkb: WkbConfig,
    pub classical: ClassicalConfig,
    pub seed: u64,
    pub threads: Option<usize>,
    pub output: String,
    pub run_id: Option<String>,
}

impl RunConfig {
    pub fn potential(&self) -> PotentialSpec {
        PotentialSpec { omega: self.omega, lambda: self.lambda, kind: self.kind }
    }

    pub fn spatial_grid(&self) -> crate::Result<Grid> {
        match self.grid.half_width {
            Some(l) => Grid::new(-l, l, self.grid.n),
            None => Grid::for_potential(&self.potential(), self.flea.as_ref(), self.grid.n),
        }
    }

    pub fn phase_grid(&self) -> crate::Result<PhaseGrid> {
        let p = &self.phase;
        PhaseGrid::new(p.p_min, p.p_max, p.n_p, p.q_min, p.q_max, p.n_q)
    }

    pub fn to_document(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

const TOP_KEYS: &[&str] = &[
    "omega", "lambda", "kind", "hbar", "flea", "ramp", "grid", "dynamics", "phase", "two_level", "wkb",
    "classical", "seed", "threads", "output", "run_id",
];

struct Reader {
    errors: Vec<ConfigError>,
}

impl Reader {
    fn err(&mut self, pointer: impl Into<String>, message: impl Into<String>) {
        self.errors.push(ConfigError { pointer: pointer.into(), message: message.into() });
    }

    /// The object at `ptr` (absent or null gives an empty map), with unknown keys reported.
    fn object<'v>(&mut self, v: Option<&'v Value>, ptr: &str, allowed: &[&str]) -> Option<&'v Map<String, Value>> {
        match v {
            None | Some(Value::Null) => None,
            Some(Value::Object(m)) => {
                for k in m.keys() {
                    if !allowed.contains(&k.as_str()) {
                        self.err(format!("{ptr}/{k}"), "unknown key");
                    }
                }
                Some(m)
            }
            Some(_) => {
                self.err(ptr, "expected an object");
                None
            }
        }
    }

    fn opt_f64(&mut self, m: Option<&Map<String, Value>>, key: &str, ptr: &str) -> Option<f64> {
        match m.and_then(|m| m.get(key)) {
            None | Some(Value::Null) => None,
            Some(v) => match v.as_f64() {
                Some(x) if x.is_finite() => Some(x),
                _ => {
                    self.err(format!("{ptr}/{key}"), "expected a finite number");
                    None
                }
            },
        }
    }

    fn f64_or(&mut self, m: Option<&Map<String, Value>>, key: &str, ptr: &str, default: f64) -> f64 {
        self.opt_f64(m, key, ptr).unwrap_or(default)
    }

    fn positive(&mut self, m: Option<&Map<String, Value>>, key: &str, ptr: &str, default: f64) -> f64 {
        let x = self.f64_or(m, key, ptr, default);
        if !(x > 0.0) {
            self.err(format!("{ptr}/{key}"), format!("must be positive, got {x}"));
        }
        x
    }

    fn opt_u64(&mut self, m: Option<&Map<String, Value>>, key: &str, ptr: &str) -> Option<u64> {
        match m.and_then(|m| m.get(key)) {
            None | Some(Value::Null) => None,
            Some(v) => match v.as_u64() {
                Some(x) => Some(x),
                None => {
                    self.err(format!("{ptr}/{key}"), "expected a nonnegative integer");
                    None
                }
            },
        }
    }

    fn usize_at_least(&mut self, m: Option<&Map<String, Value>>, key: &str, ptr: &str, default: usize, min: usize) -> usize {
        let x = self.opt_u64(m, key, ptr).map_or(default, |x| x as usize);
        if x < min {
            self.err(format!("{ptr}/{key}"), format!("must be at least {min}, got {x}"));
        }
        x
    }

    fn opt_str<'v>(&mut self, m: Option<&'v Map<String, Value>>, key: &str, ptr: &str) -> Option<&'v str> {
        match m.and_then(|m| m.get(key)) {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(s),
            Some(_) => {
                self.err(format!("{ptr}/{key}"), "expected a string");
                None
            }
        }
    }

    fn choice<T: Copy>(&mut self, m: Option<&Map<String, Value>>, key: &str, ptr: &str, options: &[(&str, T)], default: T) -> T {
        match self.opt_str(m, key, ptr) {
            None => default,
            Some(s) => match options.iter().find(|(name, _)| *name == s) {
                Some(&(_, v)) => v,
                None => {
                    let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                    self.err(format!("{ptr}/{key}"), format!("unknown value {s:?}, expected one of {}", names.join(", ")));
                    default
                }
            },
        }
    }

    fn f64_list(&mut self, m: Option<&Map<String, Value>>, key: &str, ptr: &str) -> Vec<f64> {
        match m.and_then(|m| m.get(key)) {
            None | Some(Value::Null) => Vec::new(),
            Some(Value::Array(xs)) => xs
                .iter()
                .enumerate()
                .filter_map(|(i, v)| match v.as_f64() {
                    Some(x) if x.is_finite() => Some(x),
                    _ => {
                        self.err(format!("{ptr}/{key}/{i}"), "expected a finite number");
                        None
                    }
                })
                .collect(),
            Some(_) => {
                self.err(format!("{ptr}/{key}"), "expected an array of numbers");
                Vec::new()
            }
        }
    }
}

/// Fills defaults and applies the cross-field checks.
pub fn validate_config(doc: &Value) -> Result<RunConfig, ConfigErrors> {
    let mut r = Reader { errors: Vec::new() };
    let empty = Map::new();
    let top = match doc {
        Value::Null => Some(&empty),
        v => r.object(Some(v), "", TOP_KEYS),
    };
    let top = top.or(Some(&empty));

    let omega = r.positive(top, "omega", "", 1.0);
    let kind = r.choice(
        top,
        "kind",
        "",
        &[
            ("double_well", PotentialKind::DoubleWell),
            ("harmonic", PotentialKind::Harmonic),
            ("anharmonic", PotentialKind::Anharmonic),
        ],
        PotentialKind::DoubleWell,
    );
    let lambda = r.f64_or(top, "lambda", "", 1.0);
    if kind == PotentialKind::Harmonic && lambda < 0.0 || kind != PotentialKind::Harmonic && !(lambda > 0.0) {
        r.err("/lambda", format!("must be positive for this potential, got {lambda}"));
    }
    let spec = PotentialSpec { omega, lambda, kind };
    let a = spec.minimum();
    let hbar = r.positive(top, "hbar", "", 0.5);

    let flea = match r.object(top.and_then(|m| m.get("flea")), "/flea", &["b", "c", "d"]) {
        None => None,
        Some(m) => {
            let b = r.f64_or(Some(m), "b", "/flea", 0.0);
            let c = r.positive(Some(m), "c", "/flea", 0.5);
            let d = r.f64_or(Some(m), "d", "/flea", 0.0);
            if !m.contains_key("b") {
                r.err("/flea/b", "flea center is required");
            }
            if !m.contains_key("d") {
                r.err("/flea/d", "flea height is required");
            }
            let f = FleaSpec { b, c, d };
            if kind == PotentialKind::DoubleWell && c > 0.0 {
                let (lo, hi) = f.support();
                for mnm in [-a, a] {
                    if mnm > lo && mnm < hi {
                        r.err("/flea", format!("flea support ({lo}, {hi}) covers the minimum x = {mnm}"));
                    }
                }
            }
            Some(f)
        }
    };

    let ramp = r.object(top.and_then(|m| m.get("ramp")), "/ramp", &["T"]).map(|m| {
        if !m.contains_key("T") {
            r.err("/ramp/T", "ramp duration is required");
        }
        RampSpec { duration: r.positive(Some(m), "T", "/ramp", 1.0) }
    });

    let g = r.object(top.and_then(|m| m.get("grid")), "/grid", &["n", "half_width"]);
    let grid = GridConfig {
        n: r.usize_at_least(g, "n", "/grid", spectral::DEFAULT_POINTS, 3),
        half_width: r.opt_f64(g, "half_width", "/grid"),
    };
    if let Some(l) = grid.half_width {
        if !(l > 0.0) {
            r.err("/grid/half_width", format!("must be positive, got {l}"));
        } else if let Some(f) = &flea {
            let (lo, hi) = f.support();
            if lo <= -l || hi >= l {
                r.err("/flea", format!("flea support ({lo}, {hi}) leaves the box [-{l}, {l}]"));
            }
        }
    }

    let d = r.object(
        top.and_then(|m| m.get("dynamics")),
        "/dynamics",
        &["dt", "t_end", "snapshots", "initial", "p0", "q0"],
    );
    let default_dt = ramp.as_ref().map_or(0.01, crate::dynamics::PropagationConfig::default_dt);
    let default_end = ramp.as_ref().map_or(10.0, |r| r.duration);
    let dynamics = DynamicsConfig {
        dt: r.positive(d, "dt", "/dynamics", default_dt),
        t_end: r.positive(d, "t_end", "/dynamics", default_end),
        snapshots: r.f64_list(d, "snapshots", "/dynamics"),
        initial: r.choice(
            d,
            "initial",
            "/dynamics",
            &[("ground", InitialState::Ground), ("coherent", InitialState::Coherent)],
            InitialState::Ground,
        ),
        p0: r.f64_or(d, "p0", "/dynamics", 0.0),
        q0: r.f64_or(d, "q0", "/dynamics", -1.3 * a.max(1.0)),
    };
    if let Some(rp) = &ramp {
        if dynamics.dt > rp.duration / 1000.0 {
            r.err("/dynamics/dt", format!("dt must be <= T/1000 = {}, got {}", rp.duration / 1000.0, dynamics.dt));
        }
    }
    for (i, &t) in dynamics.snapshots.iter().enumerate() {
        if !(0.0..=dynamics.t_end).contains(&t) {
            r.err(format!("/dynamics/snapshots/{i}"), format!("snapshot time {t} lies outside [0, {}]", dynamics.t_end));
        }
    }

    let p = r.object(
        top.and_then(|m| m.get("phase")),
        "/phase",
        &["p_min", "p_max", "n_p", "q_min", "q_max", "n_q", "radius"],
    );
    let pd = PhaseGrid::default_for(a);
    let phase = PhaseConfig {
        p_min: r.f64_or(p, "p_min", "/phase", pd.p_min),
        p_max: r.f64_or(p, "p_max", "/phase", pd.p_max),
        n_p: r.usize_at_least(p, "n_p", "/phase", pd.n_p, 2),
        q_min: r.f64_or(p, "q_min", "/phase", pd.q_min),
        q_max: r.f64_or(p, "q_max", "/phase", pd.q_max),
        n_q: r.usize_at_least(p, "n_q", "/phase", pd.n_q, 2),
        radius: r.positive(p, "radius", "/phase", default_radius(if a > 0.0 { a } else { 1.0 })),
    };
    if phase.p_min >= phase.p_max {
        r.err("/phase/p_max", "p range must be increasing");
    }
    if phase.q_min >= phase.q_max {
        r.err("/phase/q_max", "q range must be increasing");
    }
    if kind == PotentialKind::DoubleWell && phase.radius >= a {
        r.err("/phase/radius", format!("disks of radius {} around +-{a} overlap", phase.radius));
    }

    let t = r.object(
        top.and_then(|m| m.get("two_level")),
        "/two_level",
        &["Delta", "delta", "side", "dt", "t_end", "noise", "kappa", "rate", "paths"],
    );
    let noise = r.choice(
        t,
        "noise",
        "/two_level",
        &[("none", Noise::None), ("brownian", Noise::Brownian), ("poisson", Noise::Poisson)],
        Noise::None,
    );
    let kappa = r.f64_or(t, "kappa", "/two_level", 0.5);
    let dt_default = match noise {
        Noise::Brownian if kappa != 0.0 => (MAX_KAPPA2_DT / (kappa * kappa)).min(0.01),
        _ => 0.01,
    };
    let two_level = TwoLevelConfig {
        splitting: r.positive(t, "Delta", "/two_level", 0.1),
        delta: r.f64_or(t, "delta", "/two_level", 0.3),
        side: r.choice(t, "side", "/two_level", &[("left", FleaSide::Left), ("right", FleaSide::Right)], FleaSide::Left),
        dt: r.positive(t, "dt", "/two_level", dt_default),
        t_end: r.positive(t, "t_end", "/two_level", 100.0),
        noise,
        kappa,
        rate: r.f64_or(t, "rate", "/two_level", 1.0),
        paths: r.usize_at_least(t, "paths", "/two_level", 1, 1),
    };
    if two_level.rate < 0.0 {
        r.err("/two_level/rate", "jump rate must be nonnegative");
    }
    if noise == Noise::Brownian && kappa * kappa * two_level.dt > MAX_KAPPA2_DT {
        r.err("/two_level/dt", format!("dt too coarse for the noise amplitude (need kappa^2 dt <= {MAX_KAPPA2_DT:e})"));
    }

    let w = r.object(top.and_then(|m| m.get("wkb")), "/wkb", &["n"]);
    let wkb = WkbConfig { n: r.usize_at_least(w, "n", "/wkb", 0, 0) };

    let c = r.object(
        top.and_then(|m| m.get("classical")),
        "/classical",
        &["epsilon", "dt", "t_max", "paths", "q0", "p0", "t_flow", "flow_dt"],
    );
    let classical = ClassicalConfig {
        epsilon: r.positive(c, "epsilon", "/classical", spec.barrier_height().max(1e-3) / 8.0),
        dt: r.positive(c, "dt", "/classical", 0.01),
        t_max: r.positive(c, "t_max", "/classical", 1e5),
        paths: r.usize_at_least(c, "paths", "/classical", 200, 2),
        q0: r.f64_or(c, "q0", "/classical", -1.3 * a.max(1.0)),
        p0: r.f64_or(c, "p0", "/classical", 0.0),
        t_flow: r.positive(c, "t_flow", "/classical", 1.0),
        flow_dt: r.positive(c, "flow_dt", "/classical", 1e-3),
    };

    let seed = r.opt_u64(top, "seed", "").unwrap_or(1);
    let threads = r.opt_u64(top, "threads", "").map(|x| x as usize);
    if threads == Some(0) {
        r.err("/threads", "must be at least 1");
    }
    let output = r.opt_str(top, "output", "").unwrap_or("out").to_string();
    let run_id = r.opt_str(top, "run_id", "").map(str::to_string);
    if let Some(id) = &run_id {
        if id.is_empty() || id.contains(['/', '\\']) || id == "." || id == ".." {
            r.err("/run_id", "must be a plain directory name");
        }
    }

    if !r.errors.is_empty() {
        return Err(ConfigErrors(r.errors));
    }
    Ok(RunConfig {
        omega,
        lambda,
        kind,
        hbar,
        flea,
        ramp,
        grid,
        dynamics,
        phase,
        two_level,
        wkb,
        classical,
        seed,
        threads,
        output,
        run_id,
    })
}

/// Sets the value at a dotted path such as `flea.d`, creating objects on the way.
pub fn set_path(doc: &mut Value, path: &str, value: Value) -> Result<(), ConfigError> {
    let pointer = format!("/{}", path.replace('.', "/"));
    if !doc.is_object() {
        *doc = Value::Object(Map::new());
    }
    let mut cur = doc;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(ConfigError { pointer, message: "empty path segment".into() });
        }
        let map = match cur {
            Value::Object(m) => m,
            _ => return Err(ConfigError { pointer, message: "path runs through a non-object".into() }),
        };
        if i + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        cur = map.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
        if cur.is_null() {
            *cur = Value::Object(Map::new());
        }
    }
    unreachable!("split yields at least one segment")
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn empty_document_is_the_standard_well() {
        let c = validate_config(&json!({})).unwrap();
        assert_eq!(c.potential(), PotentialSpec::standard());
        assert_eq!(c.grid.n, 4000);
        assert!(c.flea.is_none());
        assert_eq!(validate_config(&Value::Null).unwrap(), c);
    }

    #[test]
    fn errors_are_aggregated() {
        let e = validate_config(&json!({"omega": -1, "hbar": "x", "bogus": 1, "grid": {"n": 1}})).unwrap_err();
        let ptrs: Vec<&str> = e.0.iter().map(|e| e.pointer.as_str()).collect();
        for p in ["/omega", "/hbar", "/bogus", "/grid/n"] {
            assert!(ptrs.contains(&p), "{ptrs:?}");
        }
    }

    #[test]
    fn covering_flea_names_the_block() {
        let e = validate_config(&json!({"flea": {"b": 1.0, "c": 0.2, "d": 0.1}})).unwrap_err();
        assert_eq!(e.0[0].pointer, "/flea");
    }

    #[test]
    fn ramp_resolution() {
        let e = validate_config(&json!({"ramp": {"T": 800}, "dynamics": {"dt": 10}})).unwrap_err();
        assert!(e.0.iter().any(|e| e.pointer == "/dynamics/dt" && e.message.contains("dt must be <= T/1000")));
    }

    #[test]
    fn round_trip() {
        let c = validate_config(&json!({"flea": {"b": 0.4, "c": 0.45, "d": 0.3}, "seed": 7})).unwrap();
        assert_eq!(validate_config(&c.to_document()).unwrap(), c);
    }

    #[test]
    fn dotted_paths() {
        let mut d = json!({});
        set_path(&mut d, "flea.d", json!(0.2)).unwrap();
        set_path(&mut d, "hbar", json!(0.1)).unwrap();
        assert_eq!(d, json!({"flea": {"d": 0.2}, "hbar": 0.1}));
    }
}
