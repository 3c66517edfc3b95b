//! Line-oriented `key = value` experiment configuration.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::hilbert::{cat_state, coherent_state, fock_state, squeezed_state, SqueezedParams, StateVector, C64};
use crate::models::KickedOscillatorParams;
use crate::sde::CorrelationPolicy;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5a,
    Fig5b,
    HermitianRates,
    SqueezingDecay,
    OracleCheck,
}

impl Preset {
    pub const ALL: [Preset; 9] = [
        Preset::Fig1,
        Preset::Fig2,
        Preset::Fig3,
        Preset::Fig4,
        Preset::Fig5a,
        Preset::Fig5b,
        Preset::HermitianRates,
        Preset::SqueezingDecay,
        Preset::OracleCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig1 => "fig1",
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
            Preset::Fig5a => "fig5a",
            Preset::Fig5b => "fig5b",
            Preset::HermitianRates => "hermitian_rates",
            Preset::SqueezingDecay => "squeezing_decay",
            Preset::OracleCheck => "oracle_check",
        }
    }

    /// Driven Kerr oscillator presets, averaged in the stationary regime.
    pub fn is_kicked(self) -> bool {
        matches!(self, Preset::Fig5a | Preset::Fig5b)
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown preset '{s}'"))
    }
}

/// Initial state description, e.g. `fock:8`, `fock_pair:7,9`, `cat:2.5`, `coherent:1,0.5`, `squeezed:0.5`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialState {
    Fock(usize),
    /// (|m> + |n>) / sqrt(2)
    FockPair(usize, usize),
    Coherent(C64),
    /// (|alpha> + |-alpha>), normalized
    Cat(C64),
    Squeezed { gamma: f64, alpha: f64 },
}

impl InitialState {
    pub fn build(&self, dim: usize) -> Result<StateVector> {
        match *self {
            InitialState::Fock(n) => fock_state(dim, n),
            InitialState::FockPair(m, n) => {
                let one = C64::new(1.0, 0.0);
                StateVector::superposition(&[(one, &fock_state(dim, m)?), (one, &fock_state(dim, n)?)])
            }
            InitialState::Coherent(alpha) => coherent_state(dim, alpha),
            InitialState::Cat(alpha) => cat_state(dim, alpha),
            InitialState::Squeezed { gamma, alpha } => squeezed_state(
                dim,
                SqueezedParams::new(C64::new(gamma, 0.0), C64::new(alpha, 0.0))?,
            ),
        }
    }
}

fn fmt_complex(z: C64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else {
        format!("{},{}", z.re, z.im)
    }
}

impl fmt::Display for InitialState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialState::Fock(n) => write!(f, "fock:{n}"),
            InitialState::FockPair(m, n) => write!(f, "fock_pair:{m},{n}"),
            InitialState::Coherent(a) => write!(f, "coherent:{}", fmt_complex(*a)),
            InitialState::Cat(a) => write!(f, "cat:{}", fmt_complex(*a)),
            InitialState::Squeezed { gamma, alpha } => {
                if *alpha == 0.0 {
                    write!(f, "squeezed:{gamma}")
                } else {
                    write!(f, "squeezed:{gamma},{alpha}")
                }
            }
        }
    }
}

impl FromStr for InitialState {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let bad = || format!("cannot parse initial state '{s}'");
        let (kind, args) = s.split_once(':').ok_or_else(bad)?;
        let nums: Vec<&str> = args.split(',').map(str::trim).collect();
        let float = |x: &str| x.parse::<f64>().map_err(|_| bad());
        let int = |x: &str| x.parse::<usize>().map_err(|_| bad());
        let complex = |nums: &[&str]| -> std::result::Result<C64, String> {
            match nums {
                [re] => Ok(C64::new(float(re)?, 0.0)),
                [re, im] => Ok(C64::new(float(re)?, float(im)?)),
                _ => Err(bad()),
            }
        };
        match (kind.trim(), nums.as_slice()) {
            ("fock", [n]) => Ok(InitialState::Fock(int(n)?)),
            ("fock_pair", [m, n]) => Ok(InitialState::FockPair(int(m)?, int(n)?)),
            ("coherent", rest) => Ok(InitialState::Coherent(complex(rest)?)),
            ("cat", rest) => Ok(InitialState::Cat(complex(rest)?)),
            ("squeezed", [g]) => Ok(InitialState::Squeezed { gamma: float(g)?, alpha: 0.0 }),
            ("squeezed", [g, a]) => Ok(InitialState::Squeezed {
                gamma: float(g)?,
                alpha: float(a)?,
            }),
            _ => Err(bad()),
        }
    }
}

/// How the stationary statistics of the driven oscillator are formed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Averaging {
    /// Time average over the stationary window of one long trajectory.
    Time,
    /// Average over `n_traj` trajectories and the stationary window.
    Ensemble,
}

impl fmt::Display for Averaging {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Averaging::Time => "time",
            Averaging::Ensemble => "ensemble",
        })
    }
}

impl FromStr for Averaging {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "time" => Ok(Averaging::Time),
            "ensemble" => Ok(Averaging::Ensemble),
            _ => Err(format!("averaging must be 'time' or 'ensemble', got '{s}'")),
        }
    }
}

/// Settings of the driven Kerr oscillator presets.
#[derive(Clone, Debug, PartialEq)]
pub struct KickedSettings {
    pub beta0: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub chi: f64,
    pub lambdas: Vec<f64>,
    pub periods: usize,
    /// Leading periods excluded from the stationary averages.
    pub discard_periods: usize,
    pub averaging: Averaging,
}

impl KickedSettings {
    pub fn params(&self, kappa: f64) -> Result<KickedOscillatorParams> {
        KickedOscillatorParams::new(self.beta0, self.tau1, self.tau2, self.chi, kappa)
    }
}

/// A fully resolved experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub paper_scale: bool,
    /// Basis size; for the driven oscillator, the size at lambda = 1.
    pub dim: usize,
    pub n_traj: usize,
    pub dt: f64,
    /// Integration time; derived from `periods` for the driven oscillator.
    pub t_final: f64,
    pub seed: u64,
    pub policies: Vec<CorrelationPolicy>,
    pub kappa: f64,
    pub initial: InitialState,
    pub output_stride: f64,
    pub output_path: String,
    pub kicked: Option<KickedSettings>,
}

const COMMON_KEYS: [&str; 10] = [
    "preset",
    "paper_scale",
    "dim",
    "n_traj",
    "dt",
    "seed",
    "policies",
    "kappa",
    "initial",
    "output_stride",
];
const PLAIN_KEYS: [&str; 2] = ["t_final", "output_path"];
const KICKED_KEYS: [&str; 9] = [
    "beta0",
    "tau1",
    "tau2",
    "chi",
    "lambdas",
    "periods",
    "discard_periods",
    "averaging",
    "output_path",
];

fn is_known(key: &str) -> bool {
    COMMON_KEYS.contains(&key) || PLAIN_KEYS.contains(&key) || KICKED_KEYS.contains(&key)
}

fn applies(preset: Preset, key: &str) -> bool {
    COMMON_KEYS.contains(&key)
        || if preset.is_kicked() {
            KICKED_KEYS.contains(&key)
        } else {
            PLAIN_KEYS.contains(&key)
        }
}

fn policies(list: &str) -> Vec<CorrelationPolicy> {
    list.split_whitespace().map(|p| p.parse().expect("preset policy")).collect()
}

impl ExperimentConfig {
    /// Preset defaults: reduced desk scale, or the published setup when `paper_scale` is set.
    pub fn defaults(preset: Preset, paper_scale: bool) -> Self {
        let mut cfg = Self {
            preset,
            paper_scale,
            dim: 24,
            n_traj: 200,
            dt: 1e-3,
            t_final: 2.0,
            seed: 1,
            policies: policies("cov:1 fixed:0 fixed:1"),
            kappa: 1.0,
            initial: InitialState::Fock(8),
            output_stride: 0.01,
            output_path: format!("out/{}", preset.name()),
            kicked: None,
        };
        match preset {
            Preset::Fig1 => {
                if paper_scale {
                    cfg.dim = 32;
                    cfg.initial = InitialState::Fock(24);
                    cfg.n_traj = 1000;
                }
            }
            Preset::Fig2 | Preset::Fig4 => {
                cfg.initial = InitialState::FockPair(7, 9);
                if paper_scale {
                    cfg.dim = 32;
                    cfg.initial = InitialState::FockPair(23, 25);
                    cfg.n_traj = 1000;
                }
                if preset == Preset::Fig4 {
                    cfg.t_final = 6.0;
                    cfg.output_stride = 0.02;
                }
            }
            Preset::Fig3 => {
                cfg.dim = 40;
                cfg.initial = InitialState::Cat(C64::new(2.5, 0.0));
                if paper_scale {
                    cfg.dim = 50;
                    cfg.initial = InitialState::Cat(C64::new(4.0, 0.0));
                    cfg.n_traj = 1000;
                }
            }
            Preset::Fig5a | Preset::Fig5b => {
                cfg.dim = 40;
                cfg.n_traj = 1;
                cfg.dt = 0.01;
                cfg.kappa = 0.5;
                cfg.initial = InitialState::Fock(0);
                cfg.policies = policies("fixed:0 cov:1");
                cfg.output_stride = 0.1;
                let (periods, discard) = if paper_scale { (2500, 500) } else { (200, 100) };
                cfg.kicked = Some(KickedSettings {
                    beta0: 2.0,
                    tau1: 0.98,
                    tau2: 1.0,
                    chi: 1.0,
                    lambdas: vec![1.0, 2.0, 4.0],
                    periods,
                    discard_periods: discard,
                    averaging: Averaging::Time,
                });
                cfg.sync_kicked_time();
            }
            Preset::HermitianRates => {
                cfg.dim = 8;
                cfg.initial = InitialState::FockPair(0, 1);
                cfg.n_traj = 5000;
                cfg.t_final = 0.05;
                cfg.dt = 1e-4;
                cfg.output_stride = 1e-3;
                cfg.policies = policies("fixed:1 fixed:0 fixed:-1");
            }
            Preset::SqueezingDecay => {
                cfg.dim = 30;
                cfg.initial = InitialState::Squeezed { gamma: 0.5, alpha: 0.0 };
                cfg.policies = policies("sq:1 cov:1 fixed:0");
            }
            Preset::OracleCheck => {
                cfg.dim = 2;
                cfg.initial = InitialState::Fock(1);
                cfg.n_traj = 2000;
                cfg.t_final = 1.0;
                cfg.policies = policies("fixed:0 fixed:1 fixed:-1 fixed:0,1 cov:1");
            }
        }
        cfg
    }

    fn sync_kicked_time(&mut self) {
        if let Some(k) = &self.kicked {
            self.t_final = k.periods as f64 * (k.tau1 + k.tau2);
        }
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
            value
                .parse::<T>()
                .map_err(|_| format!("cannot parse value '{value}' for key '{key}'"))
        }
        let kicked = self.kicked.as_mut();
        match (key, kicked) {
            ("preset" | "paper_scale", _) => {}
            ("dim", _) => self.dim = num(key, value)?,
            ("n_traj", _) => self.n_traj = num(key, value)?,
            ("dt", _) => self.dt = num(key, value)?,
            ("t_final", _) => self.t_final = num(key, value)?,
            ("seed", _) => self.seed = num(key, value)?,
            ("kappa", _) => self.kappa = num(key, value)?,
            ("output_stride", _) => self.output_stride = num(key, value)?,
            ("output_path", _) => self.output_path = value.to_string(),
            ("initial", _) => self.initial = value.parse()?,
            ("policies", _) => {
                self.policies = value
                    .split(|c: char| c.is_whitespace() || c == ';')
                    .filter(|s| !s.is_empty())
                    .map(|p| p.parse::<CorrelationPolicy>().map_err(|e| e.to_string()))
                    .collect::<std::result::Result<_, _>>()?
            }
            ("beta0", Some(k)) => k.beta0 = num(key, value)?,
            ("tau1", Some(k)) => k.tau1 = num(key, value)?,
            ("tau2", Some(k)) => k.tau2 = num(key, value)?,
            ("chi", Some(k)) => k.chi = num(key, value)?,
            ("periods", Some(k)) => k.periods = num(key, value)?,
            ("discard_periods", Some(k)) => k.discard_periods = num(key, value)?,
            ("averaging", Some(k)) => k.averaging = value.parse()?,
            ("lambdas", Some(k)) => {
                k.lambdas = value
                    .split(|c: char| c.is_whitespace() || c == ',')
                    .filter(|s| !s.is_empty())
                    .map(|x| num::<f64>(key, x))
                    .collect::<std::result::Result<_, _>>()?
            }
            _ => return Err(format!("key '{key}' does not apply to preset {}", self.preset)),
        }
        Ok(())
    }

    /// Checks ranges; returns the offending key with the message.
    fn check(&self) -> std::result::Result<(), (&'static str, String)> {
        let positive = |key: &'static str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err((key, format!("{key} must be positive, got {x}")))
            }
        };
        if self.dim < 2 {
            return Err(("dim", format!("dim must be at least 2, got {}", self.dim)));
        }
        positive("dt", self.dt)?;
        positive("kappa", self.kappa)?;
        positive("output_stride", self.output_stride)?;
        if self.policies.is_empty() {
            return Err(("policies", "at least one policy is required".into()));
        }
        let stride = (self.output_stride / self.dt).round();
        if stride < 1.0 || (stride * self.dt - self.output_stride).abs() > 1e-9 * self.output_stride {
            return Err((
                "output_stride",
                format!("output_stride {} is not a multiple of dt {}", self.output_stride, self.dt),
            ));
        }
        match &self.kicked {
            None => {
                if self.n_traj < 2 {
                    return Err(("n_traj", format!("n_traj must be at least 2, got {}", self.n_traj)));
                }
                positive("t_final", self.t_final)?;
                crate::sde::step_count(self.t_final, self.dt).map_err(|e| ("t_final", e.to_string()))?;
            }
            Some(k) => {
                positive("beta0", k.beta0)?;
                positive("tau1", k.tau1)?;
                positive("tau2", k.tau2)?;
                positive("chi", k.chi)?;
                if k.lambdas.is_empty() || k.lambdas.iter().any(|l| !(*l >= 1.0)) {
                    return Err(("lambdas", "lambdas must be a non-empty list of values >= 1".into()));
                }
                if k.periods == 0 {
                    return Err(("periods", "periods must be positive".into()));
                }
                if k.discard_periods + 2 > k.periods {
                    return Err((
                        "discard_periods",
                        format!("discard_periods must leave at least 2 periods out of {}", k.periods),
                    ));
                }
                let min_traj = if k.averaging == Averaging::Ensemble { 2 } else { 1 };
                if self.n_traj < min_traj {
                    return Err(("n_traj", format!("n_traj must be at least {min_traj}, got {}", self.n_traj)));
                }
                for (key, tau) in [("tau1", k.tau1), ("tau2", k.tau2)] {
                    let n = (tau / self.dt).round();
                    if n < 1.0 || (n * self.dt - tau).abs() > 1e-9 * tau {
                        return Err((key, format!("{key} = {tau} is not a multiple of dt = {}", self.dt)));
                    }
                }
            }
        }
        Ok(())
    }

    /// Record stride in integration steps.
    pub fn record_every(&self) -> usize {
        (self.output_stride / self.dt).round() as usize
    }

    /// The configuration in the same `key = value` format it is parsed from.
    pub fn to_config_text(&self) -> String {
        let mut lines = vec![
            format!("preset = {}", self.preset),
            format!("paper_scale = {}", self.paper_scale),
            format!("dim = {}", self.dim),
            format!("n_traj = {}", self.n_traj),
            format!("dt = {}", self.dt),
        ];
        if self.kicked.is_none() {
            lines.push(format!("t_final = {}", self.t_final));
        }
        lines.push(format!("seed = {}", self.seed));
        let pols: Vec<String> = self.policies.iter().map(|p| p.to_string()).collect();
        lines.push(format!("policies = {}", pols.join(" ")));
        lines.push(format!("kappa = {}", self.kappa));
        lines.push(format!("initial = {}", self.initial));
        lines.push(format!("output_stride = {}", self.output_stride));
        lines.push(format!("output_path = {}", self.output_path));
        if let Some(k) = &self.kicked {
            lines.push(format!("beta0 = {}", k.beta0));
            lines.push(format!("tau1 = {}", k.tau1));
            lines.push(format!("tau2 = {}", k.tau2));
            lines.push(format!("chi = {}", k.chi));
            let l: Vec<String> = k.lambdas.iter().map(|x| x.to_string()).collect();
            lines.push(format!("lambdas = {}", l.join(" ")));
            lines.push(format!("periods = {}", k.periods));
            lines.push(format!("discard_periods = {}", k.discard_periods));
            lines.push(format!("averaging = {}", k.averaging));
        }
        let mut out = lines.join("\n");
        out.push('\n');
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
struct RawEntry {
    line: Option<usize>,
    key: String,
    value: String,
}

/// Unresolved `key = value` pairs, with the line each came from.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawConfig {
    entries: Vec<RawEntry>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut raw = RawConfig::default();
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let err = |message: String| Error::Config {
                line: Some(lineno),
                message,
            };
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(format!("expected 'key = value', got '{content}'")))?;
            let (key, value) = (key.trim(), value.trim());
            if key.starts_with("run_") {
                continue;
            }
            if !is_known(key) {
                return Err(err(format!("unknown key '{key}'")));
            }
            if value.is_empty() {
                return Err(err(format!("missing value for key '{key}'")));
            }
            if let Some(prev) = raw.entries.iter().find(|e| e.key == key) {
                return Err(err(format!(
                    "duplicate key '{key}' (first set on line {})",
                    prev.line.unwrap_or(0)
                )));
            }
            raw.entries.push(RawEntry {
                line: Some(lineno),
                key: key.to_string(),
                value: value.to_string(),
            });
        }
        Ok(raw)
    }

    /// Sets or replaces a key, e.g. from a command-line override.
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        if !is_known(key) {
            return Err(Error::Config {
                line: None,
                message: format!("unknown key '{key}'"),
            });
        }
        let value = value.into();
        match self.entries.iter_mut().find(|e| e.key == key) {
            Some(e) => {
                e.value = value;
                e.line = None;
            }
            None => self.entries.push(RawEntry {
                line: None,
                key: key.to_string(),
                value,
            }),
        }
        Ok(())
    }

    fn get(&self, key: &str) -> Option<&RawEntry> {
        self.entries.iter().find(|e| e.key == key)
    }

    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let preset_entry = self.get("preset").ok_or(Error::Config {
            line: None,
            message: "missing required key 'preset'".into(),
        })?;
        let preset: Preset = preset_entry.value.parse().map_err(|message| Error::Config {
            line: preset_entry.line,
            message,
        })?;
        let paper_scale = match self.get("paper_scale") {
            None => false,
            Some(e) => e.value.parse::<bool>().map_err(|_| Error::Config {
                line: e.line,
                message: format!("paper_scale must be true or false, got '{}'", e.value),
            })?,
        };
        let mut cfg = ExperimentConfig::defaults(preset, paper_scale);
        for e in &self.entries {
            if !applies(preset, &e.key) {
                return Err(Error::Config {
                    line: e.line,
                    message: format!("key '{}' does not apply to preset {preset}", e.key),
                });
            }
            cfg.set(&e.key, &e.value).map_err(|message| Error::Config { line: e.line, message })?;
        }
        cfg.sync_kicked_time();
        cfg.check().map_err(|(key, message)| Error::Config {
            line: self.get(key).and_then(|e| e.line),
            message,
        })?;
        Ok(cfg)
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    RawConfig::parse(text)?.resolve()
}
