use std::path::{Path, PathBuf};

use eit_core::experiments::{Phantom, Scenario, TankSpec};
use eit_core::io::{read_to_string, KeyValues};
use eit_core::priors::PriorSpec;
use eit_core::reconstruction::{GnOptions, KappaMode};
use eit_core::{Error, Result, Variant};

const KNOWN_KEYS: &[&str] = &[
    "mesh",
    "electrodes",
    "data",
    "truth",
    "kappa",
    "contact",
    "out",
    "variant",
    "kappa_mode",
    "seed",
    "amplitude",
    "sigma",
    "net_conductance",
    "max_iter",
    "tol",
    "wolfe",
    "prior.gamma_kappa",
    "prior.lambda_kappa",
    "prior.gamma_theta",
    "prior.lambda_theta",
    "prior.gamma_h",
    "prior.gamma_l",
    "prior.gamma_w",
    "prior.kappa_mean",
    "tank.perimeter",
    "tank.boundary_nodes",
    "tank.center_spacing",
    "tank.electrodes",
    "tank.electrode_width",
    "scenario.extension",
    "scenario.noise_std",
    "scenario.phantom",
    "scenario.background",
    "scenario.fine_levels",
    "scenario.contact_log_mean",
    "scenario.contact_log_std",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhantomKind {
    Homogeneous,
    Inclusions,
}

#[derive(Clone, Debug)]
pub struct ScenarioConfig {
    pub extension: f64,
    pub noise_std: f64,
    pub phantom: PhantomKind,
    pub background: f64,
    pub fine_levels: usize,
    pub contact_log_mean: f64,
    pub contact_log_std: f64,
}

/// Everything a subcommand may need. Missing files fall back to the
/// generated tank mesh and its equally spaced electrodes.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub mesh: Option<PathBuf>,
    pub electrodes: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub kappa: Option<PathBuf>,
    pub contact: Option<PathBuf>,
    pub out: PathBuf,
    pub variant: Variant,
    pub kappa_mode: KappaMode,
    pub seed: u64,
    pub amplitude: f64,
    pub sigma: f64,
    pub net_conductance: f64,
    pub prior: PriorSpec,
    pub kappa_mean: f64,
    pub options: GnOptions,
    pub tank: TankSpec,
    pub scenario: ScenarioConfig,
}

#[derive(Default)]
pub struct Overrides {
    pub variant: Option<Variant>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

impl RunConfig {
    pub fn load(path: Option<&Path>, ov: Overrides) -> Result<Self> {
        let (kv, base) = match path {
            Some(p) => (KeyValues::parse(&read_to_string(p)?)?, p.parent().map(Path::to_path_buf).unwrap_or_default()),
            None => (KeyValues::default(), PathBuf::new()),
        };
        Self::from_kv(&kv, &base, ov)
    }

    pub fn from_kv(kv: &KeyValues, base: &Path, ov: Overrides) -> Result<Self> {
        if let Some(k) = kv.keys().find(|k| !KNOWN_KEYS.contains(k)) {
            return Err(cfg_err(format!("unknown config key {k:?}")));
        }
        let file = |key: &str| -> Result<Option<PathBuf>> {
            let Some(v) = kv.get(key) else { return Ok(None) };
            let p = base.join(v);
            if !p.is_file() {
                return Err(cfg_err(format!("{key}: file {} does not exist", p.display())));
            }
            Ok(Some(p))
        };
        let variant = match ov.variant {
            Some(v) => v,
            None => kv.get("variant").map_or(Ok(Variant::Ph), str::parse)?,
        };
        let kappa_mode = match kv.get("kappa_mode").unwrap_or("nodal") {
            "nodal" => KappaMode::Nodal,
            "scalar" => KappaMode::Scalar,
            other => return Err(cfg_err(format!("kappa_mode must be nodal or scalar, got {other:?}"))),
        };
        let d = PriorSpec::default();
        let prior = PriorSpec {
            gamma_kappa: kv.parse_key("prior.gamma_kappa")?.unwrap_or(d.gamma_kappa),
            lambda_kappa: kv.parse_key("prior.lambda_kappa")?.unwrap_or(d.lambda_kappa),
            gamma_theta: kv.parse_key("prior.gamma_theta")?.unwrap_or(d.gamma_theta),
            lambda_theta: kv.parse_key("prior.lambda_theta")?.unwrap_or(d.lambda_theta),
            gamma_h: kv.parse_key("prior.gamma_h")?.unwrap_or(d.gamma_h),
            gamma_l: kv.parse_key("prior.gamma_l")?.unwrap_or(d.gamma_l),
            gamma_w: kv.parse_key("prior.gamma_w")?.unwrap_or(d.gamma_w),
        };
        prior.validate()?;
        let go = GnOptions::default();
        let options = GnOptions {
            max_iter: kv.parse_key("max_iter")?.unwrap_or(go.max_iter),
            tol: kv.parse_key("tol")?.unwrap_or(go.tol),
            wolfe: kv.parse_key("wolfe")?.unwrap_or(go.wolfe),
            ..go
        };
        if !(options.tol >= 0.0) {
            return Err(cfg_err("tol must be nonnegative"));
        }
        let td = TankSpec::default();
        let tank = TankSpec {
            perimeter: kv.parse_key("tank.perimeter")?.unwrap_or(td.perimeter),
            boundary_nodes: kv.parse_key("tank.boundary_nodes")?.unwrap_or(td.boundary_nodes),
            center_spacing: kv.parse_key("tank.center_spacing")?.unwrap_or(td.center_spacing),
            electrodes: kv.parse_key("tank.electrodes")?.unwrap_or(td.electrodes),
            electrode_width: kv.parse_key("tank.electrode_width")?.unwrap_or(td.electrode_width),
        };
        if tank.electrodes < 2 || !(tank.electrode_width > 0.0) {
            return Err(cfg_err("tank needs at least 2 electrodes of positive width"));
        }
        let sd = Scenario::new(Vec::new(), Phantom::homogeneous(0.02));
        let scenario = ScenarioConfig {
            extension: kv.parse_key("scenario.extension")?.unwrap_or(0.0),
            noise_std: kv.parse_key("scenario.noise_std")?.unwrap_or(0.0),
            phantom: match kv.get("scenario.phantom").unwrap_or("homogeneous") {
                "homogeneous" => PhantomKind::Homogeneous,
                "inclusions" => PhantomKind::Inclusions,
                other => return Err(cfg_err(format!("scenario.phantom must be homogeneous or inclusions, got {other:?}"))),
            },
            background: kv.parse_key("scenario.background")?.unwrap_or(0.02),
            fine_levels: kv.parse_key("scenario.fine_levels")?.unwrap_or(1),
            contact_log_mean: kv.parse_key("scenario.contact_log_mean")?.unwrap_or(sd.contact_log_mean),
            contact_log_std: kv.parse_key("scenario.contact_log_std")?.unwrap_or(sd.contact_log_std),
        };
        if !(scenario.noise_std >= 0.0) || !(scenario.background > 0.0) || !(scenario.contact_log_std >= 0.0) {
            return Err(cfg_err("scenario: noise_std and contact_log_std must be nonnegative, background positive"));
        }
        let amplitude: f64 = kv.parse_key("amplitude")?.unwrap_or(1e-3);
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return Err(cfg_err(format!("amplitude must be positive, got {amplitude}")));
        }
        let sigma: f64 = kv.parse_key("sigma")?.unwrap_or(0.02);
        let net_conductance: f64 = kv.parse_key("net_conductance")?.unwrap_or(1e-3);
        if !(sigma > 0.0) || !(net_conductance > 0.0) {
            return Err(cfg_err("sigma and net_conductance must be positive"));
        }
        let kappa_mean = match kv.parse_key::<f64>("prior.kappa_mean")? {
            Some(k) => k,
            None => 0.02f64.ln(),
        };
        Ok(RunConfig {
            mesh: file("mesh")?,
            electrodes: file("electrodes")?,
            data: file("data")?,
            truth: file("truth")?,
            kappa: file("kappa")?,
            contact: file("contact")?,
            out: ov.out.unwrap_or_else(|| base.join(kv.get("out").unwrap_or("out"))),
            variant,
            kappa_mode,
            seed: match ov.seed {
                Some(s) => s,
                None => kv.parse_key("seed")?.unwrap_or(0),
            },
            amplitude,
            sigma,
            net_conductance,
            prior,
            kappa_mean,
            options,
            tank,
            scenario,
        })
    }
}
