//! Run configuration: a TOML file with one table per stage, resolved against
//! per-plant defaults that reproduce the two benchmark experiments.

use std::fmt;
use std::path::{Path, PathBuf};

use invlearn::{
    ArdMatern52Kernel, BoundSet, Delay, EtaMode, FallbackPolicy, GammaMode, IsotropicKernel, Kernel,
    KernelFamily, KernelSearch, NoiseSpec, Pendulum,
};
use serde::Deserialize;

/// Invalid or unreadable configuration. Maps to exit code 2.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlantId {
    Numerical,
    Pendulum,
}

impl PlantId {
    pub fn name(self) -> &'static str {
        match self {
            PlantId::Numerical => "numerical",
            PlantId::Pendulum => "pendulum",
        }
    }

    pub fn from_name(name: &str) -> Result<Self, ConfigError> {
        match name {
            "numerical" => Ok(PlantId::Numerical),
            "pendulum" => Ok(PlantId::Pendulum),
            other => Err(bad(format!("unknown plant `{other}` (expected numerical or pendulum)"))),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    plant: Option<String>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    #[serde(default)]
    data: RawData,
    #[serde(default)]
    noise: RawNoise,
    #[serde(default)]
    kernel: RawKernel,
    #[serde(default)]
    bounds: RawBounds,
    #[serde(default)]
    levels: RawLevels,
    #[serde(default)]
    controller: RawController,
    #[serde(default)]
    simulate: RawSimulate,
    #[serde(default)]
    verify: RawVerify,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawData {
    order: Option<usize>,
    delay: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNoise {
    noisy: Option<bool>,
    dataset_std: Option<f64>,
    online_std: Option<f64>,
    noisy_dataset_std: Option<f64>,
    noisy_online_std: Option<f64>,
    noisy_regularization: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKernel {
    family: Option<String>,
    signal_scale: Option<f64>,
    length_scales: Option<Vec<f64>>,
    regularization: Option<f64>,
    search_signal_scales: Option<Vec<f64>>,
    search_length_scales: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBounds {
    #[serde(rename = "L_f")]
    l_f: Option<f64>,
    #[serde(rename = "L_c")]
    l_c: Option<f64>,
    #[serde(rename = "Gamma")]
    gamma_rkhs: Option<f64>,
    eta_mode: Option<String>,
    eta_slope: Option<f64>,
    eta_length_scale: Option<f64>,
    gamma_mode: Option<String>,
    gamma_slope: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLevels {
    deltas: Option<Vec<f64>>,
    max_level: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawController {
    fallback: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimulate {
    horizon: Option<usize>,
    initial_conditions: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVerify {
    bound_samples: Option<usize>,
    level_samples_per_entry: Option<usize>,
    oracle_grid_per_axis: Option<usize>,
    geometry_configs: Option<usize>,
    inverse_points: Option<usize>,
}

/// How the inverse-model kernel is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    Fixed(Kernel),
    Search(KernelSearch),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaSpec {
    /// Profile-derived from the fitted kernel's radial minorant.
    Profile,
    ClosedForm { length_scale: f64 },
    Linear { slope: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundSpec {
    pub lipschitz_f: f64,
    pub lipschitz_c: f64,
    pub rkhs_bound: f64,
    pub eta: EtaSpec,
    pub gamma: GammaMode,
}

impl BoundSpec {
    /// Resolve against the fitted kernel (needed by the profile-derived `eta`).
    pub fn resolve(&self, kernel: &Kernel, delay: Delay) -> invlearn::Result<BoundSet> {
        self.resolve_with_gamma(kernel, delay, self.gamma)
    }

    pub fn resolve_with_gamma(&self, kernel: &Kernel, delay: Delay, gamma: GammaMode) -> invlearn::Result<BoundSet> {
        let eta = match self.eta {
            EtaSpec::Profile => EtaMode::ProfileDerived(kernel.radial_minorant()),
            EtaSpec::ClosedForm { length_scale } => EtaMode::SquaredExponentialClosedForm { length_scale },
            EtaSpec::Linear { slope } => EtaMode::Linear { slope },
        };
        BoundSet::new(self.lipschitz_f, self.lipschitz_c, self.rkhs_bound, delay, eta, gamma)
    }
}

/// Sample counts of the `verify` suites.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifySettings {
    pub bound_samples: usize,
    pub level_samples_per_entry: usize,
    pub oracle_grid_per_axis: usize,
    pub geometry_configs: usize,
    pub inverse_points: usize,
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub plant: PlantId,
    pub seed: u64,
    pub out: PathBuf,
    pub order: usize,
    pub delay: Delay,
    pub kernel: KernelSpec,
    pub regularization: f64,
    pub bounds: BoundSpec,
    pub deltas: Vec<f64>,
    pub max_level: usize,
    pub fallback: FallbackPolicy,
    pub horizon: usize,
    pub initial_conditions: Vec<Vec<f64>>,
    pub noisy: bool,
    pub dataset_std: f64,
    pub online_std: f64,
    pub verify: VerifySettings,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub plant: Option<PlantId>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub noisy: bool,
}

impl RunConfig {
    /// Defaults of the given plant, no file.
    pub fn defaults(plant: PlantId) -> Self {
        Self::resolve(RawConfig::default(), plant, &Overrides::default()).expect("defaults are valid")
    }

    pub fn from_toml(text: &str, overrides: &Overrides) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        let file_plant = raw.plant.as_deref().map(PlantId::from_name).transpose()?;
        let plant = match (file_plant, overrides.plant) {
            (Some(a), Some(b)) if a != b => {
                return Err(bad(format!("--plant {} contradicts plant = \"{}\"", b.name(), a.name())))
            }
            (Some(p), _) | (None, Some(p)) => p,
            (None, None) => PlantId::Numerical,
        };
        Self::resolve(raw, plant, overrides)
    }

    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, ConfigError> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| bad(format!("{}: {e}", p.display())))?;
                Self::from_toml(&text, overrides)
            }
            None => Self::from_toml("", overrides),
        }
    }

    fn resolve(raw: RawConfig, plant: PlantId, ov: &Overrides) -> Result<Self, ConfigError> {
        let numerical = plant == PlantId::Numerical;
        let seed = ov.seed.or(raw.seed).unwrap_or(0);
        let out = ov
            .out
            .clone()
            .or(raw.out)
            .unwrap_or_else(|| PathBuf::from("runs").join(plant.name()));

        let order = raw.data.order.unwrap_or(2);
        let delay_steps = raw.data.delay.unwrap_or(if numerical { 1 } else { 2 });
        let delay = Delay::from_steps(delay_steps).ok_or_else(|| bad(format!("delay must be 1 or 2, got {delay_steps}")))?;
        if order != 2 {
            return Err(bad(format!("both benchmark plants have order 2, got {order}")));
        }
        let native = if numerical { Delay::One } else { Delay::Two };
        if delay != native {
            return Err(bad(format!("the {} plant has delay {}", plant.name(), native.steps())));
        }

        let noisy = ov.noisy || raw.noise.noisy.unwrap_or(false);
        let n = &raw.noise;
        let (dataset_std, online_std) = if noisy {
            (n.noisy_dataset_std.unwrap_or(0.01), n.noisy_online_std.unwrap_or(0.01))
        } else {
            (n.dataset_std.unwrap_or(0.0), n.online_std.unwrap_or(0.0))
        };
        NoiseSpec {
            dataset_std,
            online_std,
            seed,
        }
        .validate()
        .map_err(|e| bad(e.to_string()))?;

        let kernel = resolve_kernel(&raw.kernel, numerical, 2 * order)?;
        let regularization = if noisy {
            n.noisy_regularization
                .or(raw.kernel.regularization)
                .unwrap_or(if numerical { 0.0 } else { 1e-2 })
        } else {
            raw.kernel.regularization.unwrap_or(0.0)
        };
        if !(regularization >= 0.0 && regularization.is_finite()) {
            return Err(bad(format!("regularization must be >= 0, got {regularization}")));
        }

        let bounds = resolve_bounds(&raw.bounds, numerical)?;

        let deltas = raw.levels.deltas.unwrap_or_else(|| {
            if numerical {
                vec![0.1, 0.2, 0.3, 0.4, 0.5, 1.0, 1.5, 2.0, 3.0]
            } else {
                vec![0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.08, 0.1, 0.3, 0.6]
            }
        });
        if deltas.is_empty() || deltas.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return Err(bad("deltas must be a non-empty list of positive numbers"));
        }
        if deltas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(bad("deltas must be strictly ascending"));
        }
        let max_level = raw.levels.max_level.unwrap_or(if numerical { 20 } else { 100 });
        if max_level < 1 {
            return Err(bad("max_level must be >= 1"));
        }

        let fallback = match raw.controller.fallback.as_deref() {
            None => FallbackPolicy::BestSlack,
            Some(name) => FallbackPolicy::from_name(name)
                .ok_or_else(|| bad(format!("unknown fallback `{name}` (nearest_neighbor or best_slack)")))?,
        };

        let horizon = raw.simulate.horizon.unwrap_or(if numerical { 10 } else { 500 });
        if horizon < 1 {
            return Err(bad("horizon must be >= 1"));
        }
        let initial_conditions = raw.simulate.initial_conditions.unwrap_or_else(|| {
            let levels: &[f64] = if numerical {
                &[-1.0, -0.5, 0.0, 0.5, 1.0]
            } else {
                &[0.1, -0.1, 0.05, -0.05]
            };
            levels.iter().map(|&a| vec![a, a, 0.0]).collect()
        });
        if let Some(bad_ic) = initial_conditions.iter().find(|z| z.len() != 2 * order - 1) {
            return Err(bad(format!("initial condition {bad_ic:?} must have {} entries", 2 * order - 1)));
        }

        let v = &raw.verify;
        let verify = VerifySettings {
            bound_samples: v.bound_samples.unwrap_or(1000),
            level_samples_per_entry: v.level_samples_per_entry.unwrap_or(if numerical { 200 } else { 2 }),
            oracle_grid_per_axis: v.oracle_grid_per_axis.unwrap_or(10),
            geometry_configs: v.geometry_configs.unwrap_or(100),
            inverse_points: v.inverse_points.unwrap_or(100),
        };

        Ok(Self {
            plant,
            seed,
            out,
            order,
            delay,
            kernel,
            regularization,
            bounds,
            deltas,
            max_level,
            fallback,
            horizon,
            initial_conditions,
            noisy,
            dataset_std,
            online_std,
            verify,
        })
    }

    pub fn noise(&self) -> NoiseSpec {
        NoiseSpec {
            dataset_std: self.dataset_std,
            online_std: self.online_std,
            seed: self.seed,
        }
    }
}

fn resolve_kernel(raw: &RawKernel, numerical: bool, dim: usize) -> Result<KernelSpec, ConfigError> {
    let family = raw
        .family
        .clone()
        .unwrap_or_else(|| if numerical { "squared_exponential" } else { "matern52_ard" }.to_string());
    let ard = family == "matern52_ard";
    let iso_family = if ard {
        None
    } else {
        Some(KernelFamily::from_name(&family).ok_or_else(|| bad(format!("unknown kernel family `{family}`")))?)
    };
    let err = |e: invlearn::Error| bad(e.to_string());

    if raw.search_signal_scales.is_some() || raw.search_length_scales.is_some() {
        let signal_scales = raw.search_signal_scales.clone().unwrap_or_else(|| vec![raw.signal_scale.unwrap_or(1.0)]);
        let lengths = raw
            .search_length_scales
            .clone()
            .ok_or_else(|| bad("search_length_scales is required when searching"))?;
        let search = match iso_family {
            None => KernelSearch::ArdMatern52 {
                signal_scales,
                length_scales: lengths,
            },
            Some(family) => {
                let flat = lengths
                    .iter()
                    .map(|l| match l.as_slice() {
                        [v] => Ok(*v),
                        _ => Err(bad("isotropic search length scales must be one-element lists")),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                KernelSearch::Isotropic {
                    family,
                    signal_scales,
                    length_scales: flat,
                }
            }
        };
        search.candidates().map_err(err)?;
        return Ok(KernelSpec::Search(search));
    }

    let (default_sf, default_ls) = if numerical {
        (1.0, vec![2.0 * std::f64::consts::SQRT_2])
    } else {
        (10.0, vec![0.1, 0.1, 0.1, 3.0])
    };
    let sf = raw.signal_scale.unwrap_or(default_sf);
    let ls = raw.length_scales.clone().unwrap_or(default_ls);
    let kernel: Kernel = match iso_family {
        None => {
            if ls.len() != dim {
                return Err(bad(format!("matern52_ard needs {dim} length scales, got {}", ls.len())));
            }
            ArdMatern52Kernel::new(sf, ls).map_err(err)?.into()
        }
        Some(family) => match ls.as_slice() {
            [l] => IsotropicKernel::new(family, sf, *l).map_err(err)?.into(),
            _ => return Err(bad("isotropic kernels take exactly one length scale")),
        },
    };
    Ok(KernelSpec::Fixed(kernel))
}

fn resolve_bounds(raw: &RawBounds, numerical: bool) -> Result<BoundSpec, ConfigError> {
    let (l_f, l_c) = if numerical {
        (6.5, 0.22)
    } else {
        Pendulum::default().lipschitz_constants()
    };
    let eta = match raw.eta_mode.as_deref().unwrap_or(if numerical { "closed_form" } else { "profile" }) {
        "profile" => EtaSpec::Profile,
        "closed_form" => EtaSpec::ClosedForm {
            length_scale: raw.eta_length_scale.unwrap_or(2.0 * std::f64::consts::SQRT_2),
        },
        "linear" => EtaSpec::Linear {
            slope: raw.eta_slope.ok_or_else(|| bad("eta_mode = linear requires eta_slope"))?,
        },
        other => return Err(bad(format!("unknown eta_mode `{other}`"))),
    };
    let gamma = match raw.gamma_mode.as_deref().unwrap_or(if numerical { "composed" } else { "linear" }) {
        "composed" => GammaMode::Composed,
        "linear" => GammaMode::Linear {
            slope: raw.gamma_slope.unwrap_or(1.005),
        },
        other => return Err(bad(format!("unknown gamma_mode `{other}`"))),
    };
    let spec = BoundSpec {
        lipschitz_f: raw.l_f.unwrap_or(l_f),
        lipschitz_c: raw.l_c.unwrap_or(l_c),
        rkhs_bound: raw.gamma_rkhs.unwrap_or(1.0),
        eta,
        gamma,
    };
    // validate constants once with a throwaway kernel
    let probe: Kernel = IsotropicKernel::squared_exponential(1.0, 1.0).expect("valid").into();
    spec.resolve(&probe, Delay::One).map_err(|e| bad(e.to_string()))?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bare_config_reproduces_defaults() {
        let c = RunConfig::from_toml("", &Overrides::default()).unwrap();
        assert_eq!(c.plant, PlantId::Numerical);
        assert_eq!(c.deltas.len(), 9);
        assert_eq!(c.max_level, 20);
        assert_eq!(c.initial_conditions.len(), 5);
        assert_eq!(c.regularization, 0.0);
        let p = RunConfig::defaults(PlantId::Pendulum);
        assert_eq!(p.deltas.len(), 10);
        assert_eq!(p.max_level, 100);
        assert_eq!(p.delay, Delay::Two);
        assert_eq!(p.bounds.gamma, GammaMode::Linear { slope: 1.005 });
    }

    #[test]
    fn noisy_switches_noise_and_ridge() {
        let ov = Overrides {
            plant: Some(PlantId::Pendulum),
            noisy: true,
            ..Default::default()
        };
        let c = RunConfig::from_toml("", &ov).unwrap();
        assert_eq!((c.dataset_std, c.online_std), (0.01, 0.01));
        assert!(c.regularization > 0.0);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let ov = Overrides::default();
        assert!(RunConfig::from_toml("bogus = 1", &ov).is_err());
        assert!(RunConfig::from_toml("[levels]\nwidth = 1", &ov).is_err());
        assert!(RunConfig::from_toml("[levels]\ndeltas = [0.2, 0.1]", &ov).is_err());
        assert!(RunConfig::from_toml("[simulate]\nhorizon = 0", &ov).is_err());
        assert!(RunConfig::from_toml("[bounds]\nL_f = -1.0", &ov).is_err());
        assert!(RunConfig::from_toml("plant = \"cartpole\"", &ov).is_err());
        let contradiction = Overrides {
            plant: Some(PlantId::Pendulum),
            ..Default::default()
        };
        assert!(RunConfig::from_toml("plant = \"numerical\"", &contradiction).is_err());
    }

    #[test]
    fn overrides_win() {
        let ov = Overrides {
            seed: Some(9),
            out: Some(PathBuf::from("/tmp/x")),
            ..Default::default()
        };
        let c = RunConfig::from_toml("seed = 3\nout = \"a\"", &ov).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.out, PathBuf::from("/tmp/x"));
    }

    #[test]
    fn search_grid_parses() {
        let text = "[kernel]\nsearch_signal_scales = [1.0]\nsearch_length_scales = [[1.0], [2.0]]";
        let c = RunConfig::from_toml(text, &Overrides::default()).unwrap();
        assert!(matches!(c.kernel, KernelSpec::Search(KernelSearch::Isotropic { .. })));
    }

    #[test]
    fn shipped_configs_match_defaults() {
        let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
        for plant in [PlantId::Numerical, PlantId::Pendulum] {
            let path = root.join(format!("{}.toml", plant.name()));
            let loaded = RunConfig::load(Some(&path), &Overrides::default()).unwrap();
            let mut expected = RunConfig::defaults(plant);
            expected.out = loaded.out.clone();
            assert_eq!(loaded, expected, "{}", path.display());
        }
    }
}
