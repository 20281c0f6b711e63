//! Flat `key = value` run configuration.
//!
//! One pair per line; `#` starts a comment. Unknown and repeated keys are
//! errors. Overrides given as `key=value` strings replace file values before
//! validation.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::mild::heat_semigroup_apply;
use crate::model::ModelParams;
use crate::stepper::{FaceReconstruction, StepperConfig};

/// Smoothing time applied to random initial data.
pub const RANDOM_IC_SMOOTHING: f64 = 1e-3;

const KEYS: &[&str] = &[
    "case",
    "delta",
    "epsilon",
    "r",
    "a",
    "n",
    "dt",
    "theta",
    "cfl_safety",
    "reconstruction",
    "predictor_corrector",
    "t_final",
    "sample_every",
    "snapshot_times",
    "snapshot_every",
    "ic",
    "seed",
    "format",
    "output_dir",
    "epsilon_list",
    "picard_samples",
    "picard_tol",
    "picard_max_iter",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Case {
    Bistable,
    Monostable,
    Limit,
    ChemorepulsionCheck,
    EpsilonSweep,
    SteadyState,
    PicardCheck,
}

impl Case {
    pub fn name(&self) -> &'static str {
        match self {
            Case::Bistable => "bistable",
            Case::Monostable => "monostable",
            Case::Limit => "limit",
            Case::ChemorepulsionCheck => "chemorepulsion-check",
            Case::EpsilonSweep => "epsilon-sweep",
            Case::SteadyState => "steady-state",
            Case::PicardCheck => "picard-check",
        }
    }
}

impl FromStr for Case {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [
            Case::Bistable,
            Case::Monostable,
            Case::Limit,
            Case::ChemorepulsionCheck,
            Case::EpsilonSweep,
            Case::SteadyState,
            Case::PicardCheck,
        ]
        .into_iter()
        .find(|c| c.name() == s)
        .ok_or_else(|| format!("unknown case '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(format!("format must be csv or json, got '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialCondition {
    Constant(f64),
    /// `mean + amp cos(mode pi x)`.
    Cosine {
        mean: f64,
        amp: f64,
        mode: u32,
    },
    /// Seeded uniform noise in `[mean - amp, mean + amp]`, then heat-smoothed.
    Random {
        mean: f64,
        amp: f64,
    },
}

impl fmt::Display for InitialCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialCondition::Constant(c) => write!(f, "constant:{c}"),
            InitialCondition::Cosine { mean, amp, mode } => write!(f, "cosine:{mean},{amp},{mode}"),
            InitialCondition::Random { mean, amp } => write!(f, "random:{mean},{amp}"),
        }
    }
}

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("'{}' is not a number", s.trim()))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("'{}' is not finite", s.trim()))
    }
}

fn parse_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(parse_f64)
        .collect()
}

impl FromStr for InitialCondition {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (kind, args) = s
            .split_once(':')
            .ok_or_else(|| format!("initial condition '{s}' must look like kind:args"))?;
        let nums: Vec<&str> = args.split(',').map(str::trim).collect();
        let arity = |k: usize| {
            if nums.len() == k {
                Ok(())
            } else {
                Err(format!("{kind} takes {k} argument(s), got {}", nums.len()))
            }
        };
        let ic = match kind.trim() {
            "constant" => {
                arity(1)?;
                InitialCondition::Constant(parse_f64(nums[0])?)
            }
            "cosine" => {
                arity(3)?;
                let mode = nums[2].parse::<u32>().map_err(|_| {
                    format!(
                        "cosine mode must be a nonnegative integer, got '{}'",
                        nums[2]
                    )
                })?;
                InitialCondition::Cosine {
                    mean: parse_f64(nums[0])?,
                    amp: parse_f64(nums[1])?,
                    mode,
                }
            }
            "random" => {
                arity(2)?;
                InitialCondition::Random {
                    mean: parse_f64(nums[0])?,
                    amp: parse_f64(nums[1])?,
                }
            }
            other => return Err(format!("unknown initial condition kind '{other}'")),
        };
        ic.check()?;
        Ok(ic)
    }
}

impl InitialCondition {
    fn check(&self) -> std::result::Result<(), String> {
        let ok = match *self {
            InitialCondition::Constant(c) => c >= 0.0,
            InitialCondition::Cosine { mean, amp, .. } => mean >= amp.abs(),
            InitialCondition::Random { mean, amp } => amp >= 0.0 && mean >= amp,
        };
        if ok {
            Ok(())
        } else {
            Err(format!("initial condition {self} can take negative values"))
        }
    }

    pub fn build(&self, grid: &Arc<Grid>, seed: u64) -> Result<Field> {
        match *self {
            InitialCondition::Constant(c) => Ok(Field::constant(grid.clone(), c)),
            InitialCondition::Cosine { mean, amp, mode } => {
                Field::cosine(grid.clone(), mean, amp, mode)
            }
            InitialCondition::Random { mean, amp } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let noisy: Vec<f64> = (0..grid.n())
                    .map(|_| mean + amp * rng.random_range(-1.0..=1.0))
                    .collect();
                let smooth = heat_semigroup_apply(
                    &Field::new(grid.clone(), noisy)?,
                    RANDOM_IC_SMOOTHING,
                    1.0,
                )?;
                // The spectral smoother can undershoot by round-off near zero.
                Ok(smooth.map(|v| v.max(0.0)))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardSettings {
    pub samples: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PicardSettings {
    fn default() -> Self {
        PicardSettings {
            samples: 8,
            tol: 1e-10,
            max_iter: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub case: Case,
    pub params: ModelParams,
    pub n: usize,
    pub stepper: StepperConfig,
    pub t_final: f64,
    pub sample_every: usize,
    pub snapshot_times: Vec<f64>,
    pub snapshot_every: Option<usize>,
    pub ic: InitialCondition,
    pub seed: u64,
    pub format: OutputFormat,
    pub output_dir: Option<PathBuf>,
    /// Only used by the epsilon sweep.
    pub epsilon_list: Vec<f64>,
    pub picard: PicardSettings,
}

impl RunConfig {
    pub fn grid(&self) -> Result<Arc<Grid>> {
        Grid::new(self.n)
    }

    pub fn initial_field(&self) -> Result<Field> {
        self.ic.build(&self.grid()?, self.seed)
    }
}

/// Raw values with their source line (`None` for overrides).
struct Entries(BTreeMap<String, (String, Option<usize>)>);

impl Entries {
    fn get<T>(
        &self,
        key: &str,
        parse: impl Fn(&str) -> std::result::Result<T, String>,
    ) -> Result<Option<T>> {
        match self.0.get(key) {
            None => Ok(None),
            Some((raw, line)) => parse(raw)
                .map(Some)
                .map_err(|m| Error::config(*line, format!("{key}: {m}"))),
        }
    }

    fn require<T>(
        &self,
        key: &str,
        parse: impl Fn(&str) -> std::result::Result<T, String>,
    ) -> Result<T> {
        self.get(key, parse)?
            .ok_or_else(|| Error::config(None, format!("missing required key '{key}'")))
    }

    fn line(&self, key: &str) -> Option<usize> {
        self.0.get(key).and_then(|(_, l)| *l)
    }
}

fn positive(s: &str) -> std::result::Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("must be positive, got {v}"))
    }
}

fn nonnegative(s: &str) -> std::result::Result<f64, String> {
    let v = parse_f64(s)?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("must be nonnegative, got {v}"))
    }
}

fn count(s: &str) -> std::result::Result<usize, String> {
    s.trim()
        .parse::<usize>()
        .map_err(|_| format!("'{}' is not a nonnegative integer", s.trim()))
}

fn positive_count(s: &str) -> std::result::Result<usize, String> {
    match count(s)? {
        0 => Err("must be at least 1".into()),
        v => Ok(v),
    }
}

fn boolean(s: &str) -> std::result::Result<bool, String> {
    match s.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(format!("expected true or false, got '{other}'")),
    }
}

fn reconstruction(s: &str) -> std::result::Result<FaceReconstruction, String> {
    match s.trim() {
        "upwind" => Ok(FaceReconstruction::Upwind),
        "minmod" => Ok(FaceReconstruction::Minmod),
        other => Err(format!("expected upwind or minmod, got '{other}'")),
    }
}

fn tokenize(text: &str) -> Result<Entries> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| {
            Error::config(
                Some(line),
                format!("expected 'key = value', got '{content}'"),
            )
        })?;
        insert(&mut map, key.trim(), value.trim(), Some(line))?;
    }
    Ok(Entries(map))
}

fn insert(
    map: &mut BTreeMap<String, (String, Option<usize>)>,
    key: &str,
    value: &str,
    line: Option<usize>,
) -> Result<()> {
    if !KEYS.contains(&key) {
        return Err(Error::config(line, format!("unknown key '{key}'")));
    }
    if value.is_empty() {
        return Err(Error::config(line, format!("{key}: empty value")));
    }
    if line.is_some() {
        if let Some((_, Some(first))) = map.get(key) {
            return Err(Error::config(
                line,
                format!("{key}: already set at line {first}"),
            ));
        }
    }
    map.insert(key.to_string(), (value.to_string(), line));
    Ok(())
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_with_overrides(text, &[])
}

/// Parses `text`, then applies `key=value` overrides in order.
pub fn parse_config_with_overrides(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut entries = tokenize(text)?;
    for o in overrides {
        let (key, value) = o.split_once('=').ok_or_else(|| {
            Error::config(None, format!("override '{o}' must look like key=value"))
        })?;
        insert(&mut entries.0, key.trim(), value.trim(), None)?;
    }
    build(&entries)
}

fn build(e: &Entries) -> Result<RunConfig> {
    // Validate every present value first so the first bad line is reported.
    let mut present: Vec<(&String, Option<usize>)> =
        e.0.iter().map(|(k, (_, l))| (k, *l)).collect();
    present.sort_by_key(|(_, l)| l.unwrap_or(usize::MAX));
    for (key, _) in &present {
        check_value(e, key)?;
    }

    let case = e.require("case", |s| s.trim().parse::<Case>())?;
    let a = e.get("a", parse_f64)?;
    if case == Case::Bistable && a.is_none() {
        return Err(Error::config(None, "a required for bistable"));
    }
    if case != Case::Bistable && a.is_some() {
        return Err(Error::config(
            e.line("a"),
            format!("a only applies to bistable, case is {}", case.name()),
        ));
    }

    let delta = e.require("delta", positive)?;
    let r = e.require("r", nonnegative)?;
    let epsilon_list = e.get("epsilon_list", parse_list)?.unwrap_or_default();
    let epsilon = match (case, e.get("epsilon", positive)?) {
        (_, Some(eps)) => eps,
        (Case::EpsilonSweep, None) => *epsilon_list
            .first()
            .ok_or_else(|| Error::config(None, "epsilon_list required for epsilon-sweep"))?,
        (_, None) => return Err(Error::config(None, "missing required key 'epsilon'")),
    };
    if case == Case::EpsilonSweep && epsilon_list.is_empty() {
        return Err(Error::config(
            None,
            "epsilon_list required for epsilon-sweep",
        ));
    }
    let n = e.require("n", count)?;
    let dt = e.require("dt", positive)?;
    let t_final = e.require("t_final", positive)?;
    let ic = e.require("ic", |s| s.trim().parse::<InitialCondition>())?;

    let params = match a {
        Some(a) => ModelParams::bistable(delta, epsilon, r, a),
        None => ModelParams::monostable(delta, epsilon, r),
    }
    .map_err(as_config)?;
    if n < 3 {
        return Err(Error::config(
            e.line("n"),
            format!("n: need at least 3 nodes, got {n}"),
        ));
    }

    let mut stepper = StepperConfig::new(dt);
    if let Some(theta) = e.get("theta", parse_f64)? {
        stepper.theta = theta;
    }
    if let Some(c) = e.get("cfl_safety", parse_f64)? {
        stepper.cfl_safety = c;
    }
    if let Some(rc) = e.get("reconstruction", reconstruction)? {
        stepper.reconstruction = rc;
    }
    if let Some(pc) = e.get("predictor_corrector", boolean)? {
        stepper.predictor_corrector = pc;
    }
    stepper.validate().map_err(as_config)?;

    let mut picard = PicardSettings::default();
    if let Some(m) = e.get("picard_samples", count)? {
        if m < 2 {
            return Err(Error::config(
                e.line("picard_samples"),
                "picard_samples: need at least 2",
            ));
        }
        picard.samples = m;
    }
    if let Some(t) = e.get("picard_tol", positive)? {
        picard.tol = t;
    }
    if let Some(k) = e.get("picard_max_iter", positive_count)? {
        picard.max_iter = k;
    }

    Ok(RunConfig {
        case,
        params,
        n,
        stepper,
        t_final,
        sample_every: e.get("sample_every", positive_count)?.unwrap_or(100),
        snapshot_times: e.get("snapshot_times", parse_list)?.unwrap_or_default(),
        snapshot_every: e.get("snapshot_every", positive_count)?,
        ic,
        seed: e
            .get("seed", |s| {
                s.trim()
                    .parse::<u64>()
                    .map_err(|_| format!("'{s}' is not a valid seed"))
            })?
            .unwrap_or(0),
        format: e
            .get("format", |s| s.trim().parse::<OutputFormat>())?
            .unwrap_or_default(),
        output_dir: e.get("output_dir", |s| Ok(PathBuf::from(s.trim())))?,
        epsilon_list,
        picard,
    })
}

/// Key-local range checks, so errors carry the offending line.
fn check_value(e: &Entries, key: &str) -> Result<()> {
    match key {
        "delta" | "epsilon" | "dt" | "t_final" | "picard_tol" => e.get(key, positive).map(drop),
        "r" => e.get(key, nonnegative).map(drop),
        "a" => e
            .get(key, |s| {
                let a = parse_f64(s)?;
                if a > 0.0 && a < 1.0 {
                    Ok(a)
                } else {
                    Err(format!("must lie in (0,1), got {a}"))
                }
            })
            .map(drop),
        "theta" => e
            .get(key, |s| {
                let t = parse_f64(s)?;
                if (0.5..=1.0).contains(&t) {
                    Ok(t)
                } else {
                    Err(format!("must lie in [0.5, 1], got {t}"))
                }
            })
            .map(drop),
        "cfl_safety" => e
            .get(key, |s| {
                let c = parse_f64(s)?;
                if c > 0.0 && c <= 1.0 {
                    Ok(c)
                } else {
                    Err(format!("must lie in (0, 1], got {c}"))
                }
            })
            .map(drop),
        "n" | "picard_samples" => e.get(key, count).map(drop),
        "sample_every" | "snapshot_every" | "picard_max_iter" => {
            e.get(key, positive_count).map(drop)
        }
        "snapshot_times" => e
            .get(key, |s| {
                let v = parse_list(s)?;
                if v.iter().all(|t| *t >= 0.0) {
                    Ok(v)
                } else {
                    Err("times must be nonnegative".into())
                }
            })
            .map(drop),
        "epsilon_list" => e
            .get(key, |s| {
                let v = parse_list(s)?;
                if v.is_empty() || v.iter().any(|x| *x <= 0.0) {
                    Err("need positive values".into())
                } else if v.windows(2).any(|w| w[1] >= w[0]) {
                    Err("must be strictly decreasing".into())
                } else {
                    Ok(v)
                }
            })
            .map(drop),
        "case" => e.get(key, |s| s.trim().parse::<Case>()).map(drop),
        "ic" => e
            .get(key, |s| s.trim().parse::<InitialCondition>())
            .map(drop),
        "format" => e.get(key, |s| s.trim().parse::<OutputFormat>()).map(drop),
        "reconstruction" => e.get(key, reconstruction).map(drop),
        "predictor_corrector" => e.get(key, boolean).map(drop),
        _ => Ok(()),
    }
}

fn as_config(err: Error) -> Error {
    match err {
        Error::InvalidParameter(m) => Error::config(None, m),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCHEMA_EXAMPLE: &str = "case = monostable\ndelta = 0.1\nepsilon = 0.01\nr = 0\nn = 401\ndt = 1e-4\nt_final = 50\nic = cosine:1.0,0.3,1";

    fn message(err: Error) -> (Option<usize>, String) {
        match err {
            Error::Config { line, message } => (line, message),
            other => panic!("expected a config error, got {other}"),
        }
    }

    #[test]
    fn schema_example_parses() {
        let c = parse_config(SCHEMA_EXAMPLE).unwrap();
        assert_eq!(c.case, Case::Monostable);
        assert_eq!(c.n, 401);
        assert_eq!(c.stepper.dt, 1e-4);
        assert_eq!(c.t_final, 50.0);
        assert_eq!(c.params.delta, 0.1);
        assert_eq!(c.params.r, 0.0);
        assert!(c.params.law.is_monostable());
        assert_eq!(
            c.ic,
            InitialCondition::Cosine {
                mean: 1.0,
                amp: 0.3,
                mode: 1
            }
        );
        assert_eq!(c.format, OutputFormat::Csv);
    }

    #[test]
    fn negative_delta_names_key() {
        let (line, msg) = message(parse_config("delta = -1").unwrap_err());
        assert_eq!(line, Some(1));
        assert!(msg.contains("delta"), "{msg}");
    }

    #[test]
    fn bistable_needs_a() {
        let (_, msg) = message(parse_config("case = bistable").unwrap_err());
        assert_eq!(msg, "a required for bistable");
        let text = format!(
            "{}\na = 0.3",
            SCHEMA_EXAMPLE.replace("monostable", "bistable")
        );
        let c = parse_config(&text).unwrap();
        assert!(!c.params.law.is_monostable());
    }

    #[test]
    fn first_bad_line_is_reported() {
        let text = "# header\ncase = monostable\n\ndelta = 0.1\nthetaa = 1\nr = x\n";
        let (line, msg) = message(parse_config(text).unwrap_err());
        assert_eq!(line, Some(5));
        assert!(msg.contains("thetaa"));
        let text = "case = monostable\nr = x\ndelta = -2\n";
        let (line, msg) = message(parse_config(text).unwrap_err());
        assert_eq!((line, msg.starts_with("r:")), (Some(2), true));
    }

    #[test]
    fn missing_key_is_named() {
        let text = SCHEMA_EXAMPLE.replace("dt = 1e-4\n", "");
        let (_, msg) = message(parse_config(&text).unwrap_err());
        assert!(msg.contains("'dt'"), "{msg}");
    }

    #[test]
    fn duplicates_and_syntax() {
        let (line, _) = message(parse_config("delta = 1\ndelta = 2").unwrap_err());
        assert_eq!(line, Some(2));
        let (line, _) = message(parse_config("delta 1").unwrap_err());
        assert_eq!(line, Some(1));
    }

    #[test]
    fn overrides_apply_after_file() {
        let c = parse_config_with_overrides(SCHEMA_EXAMPLE, &["r=1".into(), "dt = 2e-4".into()])
            .unwrap();
        assert_eq!(c.params.r, 1.0);
        assert_eq!(c.stepper.dt, 2e-4);
        let (line, msg) =
            message(parse_config_with_overrides(SCHEMA_EXAMPLE, &["bogus=1".into()]).unwrap_err());
        assert_eq!(line, None);
        assert!(msg.contains("bogus"));
    }

    #[test]
    fn ic_grammar() {
        assert_eq!(
            "constant:0.5".parse::<InitialCondition>(),
            Ok(InitialCondition::Constant(0.5))
        );
        assert_eq!(
            "random:1,0.5".parse::<InitialCondition>(),
            Ok(InitialCondition::Random {
                mean: 1.0,
                amp: 0.5
            })
        );
        for bad in [
            "constant:-1",
            "cosine:0.1,0.3,1",
            "cosine:1,0.3",
            "wave:1",
            "cosine:1,0.3,1.5",
            "constant",
        ] {
            assert!(bad.parse::<InitialCondition>().is_err(), "{bad}");
        }
    }

    #[test]
    fn random_ic_is_seeded_and_smooth() {
        let g = Grid::new(201).unwrap();
        let ic = InitialCondition::Random {
            mean: 1.0,
            amp: 0.5,
        };
        let a = ic.build(&g, 7).unwrap();
        let b = ic.build(&g, 7).unwrap();
        let c = ic.build(&g, 8).unwrap();
        assert_eq!(a.values(), b.values());
        assert_ne!(a.values(), c.values());
        assert!(a.min() >= 0.0);
        assert!(a.max() <= 1.5);
        // Smoothing removes most of the nodal noise.
        let rough: f64 = a
            .values()
            .windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .sum::<f64>()
            / 200.0;
        assert!(rough < 0.1, "{rough}");
    }

    #[test]
    fn sweep_takes_epsilon_from_list() {
        let text = SCHEMA_EXAMPLE
            .replace("case = monostable", "case = epsilon-sweep")
            .replace("epsilon = 0.01\n", "epsilon_list = 0.1, 0.05\n");
        let c = parse_config(&text).unwrap();
        assert_eq!(c.params.epsilon, 0.1);
        assert_eq!(c.epsilon_list, vec![0.1, 0.05]);
        let bad = text.replace("0.1, 0.05", "0.05, 0.1");
        assert!(parse_config(&bad).is_err());
    }

    #[test]
    fn optional_keys() {
        let text = format!(
            "{SCHEMA_EXAMPLE}\ntheta = 0.5\npredictor_corrector = true\nreconstruction = minmod\nformat = json\n\
             snapshot_times = 1, 2.5\nseed = 42\noutput_dir = out/run1  # trailing comment"
        );
        let c = parse_config(&text).unwrap();
        assert_eq!(c.stepper.theta, 0.5);
        assert!(c.stepper.predictor_corrector);
        assert_eq!(c.stepper.reconstruction, FaceReconstruction::Minmod);
        assert_eq!(c.format, OutputFormat::Json);
        assert_eq!(c.snapshot_times, vec![1.0, 2.5]);
        assert_eq!(c.seed, 42);
        assert_eq!(c.output_dir, Some(PathBuf::from("out/run1")));
        assert!(parse_config(&format!("{SCHEMA_EXAMPLE}\ntheta = 0.2")).is_err());
    }
}
