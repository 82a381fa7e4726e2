//! Scenario files: TOML-style `key = value` lines grouped in sections.
//!
//! ```toml
//! [network]
//! synthetic_n = 56
//! synthetic_seed = 42
//! overload_factor = 1.3
//!
//! [model]
//! target_error = 0.5
//! seed = 7
//!
//! [controller]
//! x_bar_percent = 5
//! ```
//!
//! Every key is optional except the network source. Paths are resolved
//! relative to the scenario file.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::baselines::PrimalDualConfig;
use crate::controller::{BarrierConfig, DEFAULT_BETA, DEFAULT_KAPPA};
use crate::error::{Error, Result};
use crate::plant::PerturbationKind;

/// Environment variable that replaces every seed in a scenario.
pub const SEED_ENV: &str = "GRIDBARRIER_SEED";

#[derive(Clone, Debug, PartialEq)]
pub enum NetworkSource {
    File(PathBuf),
    Synthetic { n: usize, seed: u64, overload_factor: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelSpec {
    Exact,
    /// Fixed noise magnitude with the transposition count implied by `kind`,
    /// or an explicit `swaps` count.
    Perturbed { kind: PerturbationKind, magnitude: f64, swaps: Option<usize>, seed: u64 },
    /// Search for a realized relative error `||B - B_hat|| / ||B||`.
    Target { relative_error: f64, seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControllerSpec {
    pub beta: f64,
    pub kappa: f64,
    pub c_p: f64,
    pub c_q: f64,
    pub x_bar_percent: f64,
    pub max_iters: usize,
    pub eta: Option<f64>,
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Methods {
    pub no_control: bool,
    pub lcqp: bool,
    pub barrier: bool,
    pub primal_dual: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub network: NetworkSource,
    pub nominal_kv: f64,
    pub model: ModelSpec,
    pub controller: ControllerSpec,
    pub reactive_fraction: f64,
    /// Pins every upper action bound at zero.
    pub upper_zero: bool,
    pub primal_dual: PrimalDualConfig,
    pub methods: Methods,
}

impl Scenario {
    /// Synthetic feeder with every other setting at its default.
    pub fn synthetic(n: usize, seed: u64, overload_factor: f64) -> Self {
        Scenario {
            name: "scenario".into(),
            network: NetworkSource::Synthetic { n, seed, overload_factor },
            nominal_kv: 12.0,
            model: ModelSpec::Exact,
            controller: ControllerSpec {
                beta: DEFAULT_BETA,
                kappa: DEFAULT_KAPPA,
                c_p: 3.0,
                c_q: 1.0,
                x_bar_percent: 5.0,
                max_iters: 50_000,
                eta: None,
                tolerance: 1e-8,
            },
            reactive_fraction: 0.4,
            upper_zero: false,
            primal_dual: PrimalDualConfig { max_iters: 50_000, ..Default::default() },
            methods: Methods { no_control: true, lcqp: true, barrier: true, primal_dual: true },
        }
    }

    pub fn x_bar(&self) -> f64 {
        self.controller.x_bar_percent / 100.0
    }

    pub fn barrier_config(&self, n: usize) -> BarrierConfig {
        let c = &self.controller;
        let mut cfg = BarrierConfig::new(n, c.c_p, c.c_q, self.x_bar());
        cfg.beta = vec![c.beta; n];
        cfg.kappa = c.kappa;
        cfg.max_iters = c.max_iters;
        cfg.eta_override = c.eta;
        cfg.tolerance = c.tolerance;
        cfg
    }

    /// Replaces the network and model seeds.
    pub fn override_seed(&mut self, seed: u64) {
        if let NetworkSource::Synthetic { seed: s, .. } = &mut self.network {
            *s = seed;
        }
        match &mut self.model {
            ModelSpec::Exact => {}
            ModelSpec::Perturbed { seed: s, .. } | ModelSpec::Target { seed: s, .. } => *s = seed,
        }
    }

    /// Applies [`SEED_ENV`] if it is set.
    pub fn apply_seed_env(&mut self) -> Result<()> {
        if let Ok(raw) = std::env::var(SEED_ENV) {
            let seed = raw.trim().parse::<u64>().map_err(|_| Error::Validation {
                path: PathBuf::from(SEED_ENV),
                line: 0,
                message: format!("`{raw}` is not an unsigned integer seed"),
            })?;
            self.override_seed(seed);
        }
        Ok(())
    }
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    #[serde(default)]
    network: RawNetwork,
    #[serde(default)]
    model: RawModel,
    #[serde(default)]
    controller: RawController,
    #[serde(default)]
    limits: RawLimits,
    #[serde(default)]
    primal_dual: RawPrimalDual,
    #[serde(default)]
    methods: RawMethods,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawNetwork {
    file: Option<PathBuf>,
    synthetic_n: Option<usize>,
    synthetic_seed: Option<u64>,
    overload_factor: Option<f64>,
    nominal_kv: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawModel {
    kind: Option<PerturbationKind>,
    magnitude: Option<f64>,
    swaps: Option<usize>,
    target_error: Option<f64>,
    seed: Option<u64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawController {
    beta: Option<f64>,
    kappa: Option<f64>,
    c_p: Option<f64>,
    c_q: Option<f64>,
    x_bar_percent: Option<f64>,
    max_iters: Option<usize>,
    eta: Option<f64>,
    tolerance: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawLimits {
    reactive_fraction: Option<f64>,
    upper_zero: Option<bool>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawPrimalDual {
    eta_p: Option<f64>,
    eta_d: Option<f64>,
    epsilon_reg: Option<f64>,
    max_iters: Option<usize>,
    tolerance: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawMethods {
    no_control: Option<bool>,
    lcqp: Option<bool>,
    barrier: Option<bool>,
    primal_dual: Option<bool>,
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scenario(&text, path)
}

/// Parses and validates scenario text. `path` is used for error messages
/// and to resolve a relative network file.
pub fn parse_scenario(text: &str, path: &Path) -> Result<Scenario> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.span().map(|s| line_at(text, s.start)).unwrap_or(0),
        message: e.message().trim().to_string(),
    })?;
    let invalid = |section: &str, key: &str, message: String| Error::Validation {
        path: path.to_path_buf(),
        line: line_of_key(text, section, key),
        message,
    };

    let mut sc = Scenario::synthetic(1, 0, 1.0);
    sc.name = raw.name.unwrap_or_else(|| {
        path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "scenario".into())
    });

    let net = raw.network;
    sc.network = match (&net.file, net.synthetic_n) {
        (Some(_), Some(_)) => {
            return Err(invalid("network", "synthetic_n", "give either `file` or `synthetic_n`, not both".into()))
        }
        (None, None) => {
            return Err(Error::Validation {
                path: path.to_path_buf(),
                line: line_of_section(text, "network"),
                message: "network source missing: set `file` or `synthetic_n`".into(),
            })
        }
        (Some(f), None) => {
            if net.synthetic_seed.is_some() || net.overload_factor.is_some() {
                let key = if net.synthetic_seed.is_some() { "synthetic_seed" } else { "overload_factor" };
                return Err(invalid("network", key, format!("`{key}` only applies to synthetic feeders")));
            }
            let base = path.parent().unwrap_or(Path::new(""));
            NetworkSource::File(if f.is_absolute() { f.clone() } else { base.join(f) })
        }
        (None, Some(n)) => {
            if n == 0 {
                return Err(invalid("network", "synthetic_n", "synthetic feeder needs at least one bus".into()));
            }
            let overload_factor = net.overload_factor.unwrap_or(1.3);
            if !(overload_factor > 0.0) {
                return Err(invalid("network", "overload_factor", "overload_factor must be positive".into()));
            }
            NetworkSource::Synthetic { n, seed: net.synthetic_seed.unwrap_or(42), overload_factor }
        }
    };
    if let Some(kv) = net.nominal_kv {
        if !(kv > 0.0) {
            return Err(invalid("network", "nominal_kv", format!("nominal_kv must be positive, got {kv}")));
        }
        sc.nominal_kv = kv;
    }

    let m = raw.model;
    let seed = m.seed.unwrap_or(7);
    sc.model = match (m.target_error, m.magnitude.or(m.swaps.map(|_| 0.0)), m.kind) {
        (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
            return Err(invalid(
                "model",
                "target_error",
                "`target_error` cannot be combined with `kind`, `magnitude` or `swaps`".into(),
            ))
        }
        (Some(t), None, None) => {
            if !(0.0..=2.0).contains(&t) {
                return Err(invalid("model", "target_error", format!("target_error {t} outside [0, 2]")));
            }
            if t == 0.0 {
                ModelSpec::Exact
            } else {
                ModelSpec::Target { relative_error: t, seed }
            }
        }
        (None, None, None) => ModelSpec::Exact,
        (None, mag, kind) => {
            let magnitude = mag.unwrap_or(0.0);
            if !(0.0..1.0).contains(&magnitude) {
                return Err(invalid("model", "magnitude", format!("magnitude {magnitude} outside [0, 1)")));
            }
            ModelSpec::Perturbed { kind: kind.unwrap_or(PerturbationKind::Both), magnitude, swaps: m.swaps, seed }
        }
    };

    let c = raw.controller;
    let ctl = &mut sc.controller;
    let positive = |v: Option<f64>, key: &str, slot: &mut f64| -> Result<()> {
        if let Some(v) = v {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid("controller", key, format!("{key} must be positive, got {v}")));
            }
            *slot = v;
        }
        Ok(())
    };
    positive(c.beta, "beta", &mut ctl.beta)?;
    positive(c.c_p, "c_p", &mut ctl.c_p)?;
    positive(c.c_q, "c_q", &mut ctl.c_q)?;
    positive(c.tolerance, "tolerance", &mut ctl.tolerance)?;
    if let Some(k) = c.kappa {
        if !(k > 0.0 && k <= 1.0) {
            return Err(invalid("controller", "kappa", format!("kappa {k} outside (0, 1]")));
        }
        ctl.kappa = k;
    }
    if let Some(p) = c.x_bar_percent {
        if !(p > 0.0 && p <= 20.0) {
            return Err(invalid("controller", "x_bar_percent", format!("x_bar_percent {p} outside (0, 20]")));
        }
        ctl.x_bar_percent = p;
    }
    if let Some(k) = c.max_iters {
        ctl.max_iters = k;
    }
    if let Some(eta) = c.eta {
        if !(eta > 0.0) {
            return Err(invalid("controller", "eta", format!("eta must be positive, got {eta}")));
        }
        ctl.eta = Some(eta);
    }

    if let Some(f) = raw.limits.reactive_fraction {
        if !(0.0..=1.0).contains(&f) {
            return Err(invalid("limits", "reactive_fraction", format!("reactive_fraction {f} outside [0, 1]")));
        }
        sc.reactive_fraction = f;
    }
    sc.upper_zero = raw.limits.upper_zero.unwrap_or(false);

    let pd = raw.primal_dual;
    let cfg = &mut sc.primal_dual;
    for (v, key, slot) in [
        (pd.eta_p, "eta_p", &mut cfg.eta_p),
        (pd.eta_d, "eta_d", &mut cfg.eta_d),
        (pd.tolerance, "tolerance", &mut cfg.tolerance),
    ] {
        if let Some(v) = v {
            if !(v > 0.0) {
                return Err(invalid("primal_dual", key, format!("{key} must be positive, got {v}")));
            }
            *slot = v;
        }
    }
    if let Some(eps) = pd.epsilon_reg {
        if !(eps >= 0.0) {
            return Err(invalid("primal_dual", "epsilon_reg", format!("epsilon_reg must be nonnegative, got {eps}")));
        }
        cfg.epsilon_reg = eps;
    }
    if let Some(k) = pd.max_iters {
        cfg.max_iters = k;
    }

    let mt = raw.methods;
    sc.methods = Methods {
        no_control: mt.no_control.unwrap_or(true),
        lcqp: mt.lcqp.unwrap_or(true),
        barrier: mt.barrier.unwrap_or(true),
        primal_dual: mt.primal_dual.unwrap_or(true),
    };
    Ok(sc)
}

fn line_at(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn section_of(line: &str) -> Option<&str> {
    let t = line.trim();
    t.strip_prefix('[')?.strip_suffix(']').map(str::trim)
}

fn line_of_section(text: &str, section: &str) -> usize {
    text.lines().position(|l| section_of(l) == Some(section)).map(|i| i + 1).unwrap_or(0)
}

/// Line of `key` inside `[section]`, or 0 when absent.
fn line_of_key(text: &str, section: &str, key: &str) -> usize {
    let mut current = "";
    for (i, line) in text.lines().enumerate() {
        if let Some(s) = section_of(line) {
            current = s;
            continue;
        }
        let lhs = line.split('=').next().unwrap_or("").trim();
        if current == section && lhs == key {
            return i + 1;
        }
    }
    0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Scenario> {
        parse_scenario(text, Path::new("dir/s.toml"))
    }

    #[test]
    fn minimal_file_gets_defaults() {
        let sc = parse("[network]\nsynthetic_n = 10\n").unwrap();
        assert_eq!(sc.network, NetworkSource::Synthetic { n: 10, seed: 42, overload_factor: 1.3 });
        assert_eq!(sc.controller.beta, 200.0);
        assert_eq!(sc.controller.kappa, 0.6);
        assert_eq!((sc.controller.c_p, sc.controller.c_q), (3.0, 1.0));
        assert_eq!(sc.x_bar(), 0.05);
        assert_eq!(sc.nominal_kv, 12.0);
        assert_eq!(sc.model, ModelSpec::Exact);
        assert_eq!(sc.name, "s");
        let cfg = sc.barrier_config(10);
        assert_eq!(cfg.q_diag[0], 6.0);
        assert_eq!(cfg.q_diag[10], 2.0);
    }

    #[test]
    fn full_file() {
        let text = "name = \"demo\"\n[network]\nfile = \"feeder.csv\"\nnominal_kv = 4.16\n\
                    [model]\nkind = \"parametric\"\nmagnitude = 0.2\nseed = 3\n\
                    [controller]\neta = 0.01\nmax_iters = 100\n[limits]\nupper_zero = true\n\
                    [primal_dual]\neta_d = 2.0\n[methods]\nlcqp = false\n";
        let sc = parse(text).unwrap();
        assert_eq!(sc.name, "demo");
        assert_eq!(sc.network, NetworkSource::File(PathBuf::from("dir/feeder.csv")));
        assert_eq!(
            sc.model,
            ModelSpec::Perturbed { kind: PerturbationKind::Parametric, magnitude: 0.2, swaps: None, seed: 3 }
        );
        assert_eq!(sc.controller.eta, Some(0.01));
        assert!(sc.upper_zero);
        assert_eq!(sc.primal_dual.eta_d, 2.0);
        assert!(!sc.methods.lcqp && sc.methods.barrier);
    }

    #[test]
    fn zero_limit_is_rejected_with_line() {
        let err = parse("[network]\nsynthetic_n = 10\n[controller]\nx_bar_percent = 0\n").unwrap_err();
        match err {
            Error::Validation { line, message, .. } => {
                assert_eq!(line, 4);
                assert!(message.contains("x_bar_percent"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_key_is_a_parse_error() {
        let err = parse("[network]\nsynthetic_n = 10\n[controller]\nbeat = 3\n").unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 4);
                assert!(message.contains("beat"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err_is_parse(parse("[network\nsynthetic_n = 1\n")));
    }

    fn err_is_parse(r: Result<Scenario>) -> bool {
        matches!(r, Err(Error::Parse { .. }))
    }

    #[test]
    fn network_source_must_be_unique() {
        assert!(matches!(parse("[controller]\nkappa = 0.5\n"), Err(Error::Validation { .. })));
        assert!(matches!(
            parse("[network]\nfile = \"a.csv\"\nsynthetic_n = 3\n"),
            Err(Error::Validation { line: 3, .. })
        ));
    }

    #[test]
    fn target_excludes_magnitude() {
        let r = parse("[network]\nsynthetic_n = 3\n[model]\ntarget_error = 0.5\nmagnitude = 0.1\n");
        assert!(matches!(r, Err(Error::Validation { line: 4, .. })));
        let sc = parse("[network]\nsynthetic_n = 3\n[model]\ntarget_error = 0.5\n").unwrap();
        assert_eq!(sc.model, ModelSpec::Target { relative_error: 0.5, seed: 7 });
    }

    #[test]
    fn seed_override_touches_every_seed() {
        let mut sc = parse("[network]\nsynthetic_n = 3\n[model]\ntarget_error = 0.5\nseed = 1\n").unwrap();
        sc.override_seed(99);
        assert_eq!(sc.network, NetworkSource::Synthetic { n: 3, seed: 99, overload_factor: 1.3 });
        assert_eq!(sc.model, ModelSpec::Target { relative_error: 0.5, seed: 99 });
    }
}
