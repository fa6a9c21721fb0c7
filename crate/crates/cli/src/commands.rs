use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde_json::{json, Map, Value};

use eit_core::experiments::{
    center_error, check_inverse_crime, model_intervals, residual_norm, sigma_mean, synth_data, Phantom, Scenario, TruthRecord,
};
use eit_core::io::{self, read_to_string};
use eit_core::reconstruction::{eit_problem, homogeneous_guess, initial_tau, KappaMode, ReconstructionSetup};
use eit_core::sensitivity::{fd_jacobian, full_jacobian, max_relative_column_error};
use eit_core::{
    initial_contact, locate_electrodes, ContactParams, CurrentPatterns, DomainConductivity, Error, ForwardModel, Result, TriMesh, Variant,
};

use crate::config::{PhantomKind, RunConfig};

const ZETA_SAMPLES: usize = 256;
const FD_STEP: f64 = 1e-6;

fn load_mesh(cfg: &RunConfig) -> Result<Arc<TriMesh>> {
    let mesh = match &cfg.mesh {
        Some(p) => io::parse_mesh(&read_to_string(p)?)?,
        None => cfg.tank.mesh()?,
    };
    Ok(Arc::new(mesh))
}

fn load_intervals(cfg: &RunConfig) -> Result<Vec<(f64, f64)>> {
    match &cfg.electrodes {
        Some(p) => io::parse_intervals(&read_to_string(p)?),
        None => Ok(cfg.tank.layout()),
    }
}

fn load_truth(path: &Path) -> Result<TruthRecord> {
    serde_json::from_str(&read_to_string(path)?).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let p = dir.join(name);
    fs::write(&p, contents)?;
    Ok(p)
}

fn to_json(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn default_contact(cfg: &RunConfig, model: &ForwardModel, widths: &[f64]) -> ContactParams {
    initial_contact(cfg.variant, model.electrodes(), cfg.net_conductance, Some(widths))
}

fn load_contact(cfg: &RunConfig, model: &ForwardModel, widths: &[f64]) -> Result<ContactParams> {
    let Some(p) = &cfg.contact else {
        return Ok(default_contact(cfg, model, widths));
    };
    let c = io::parse_contact(&read_to_string(p)?, model.electrodes())?;
    if c.variant != cfg.variant {
        return Err(Error::InvalidArgument(format!("contact file holds {} parameters, variant is {}", c.variant, cfg.variant)));
    }
    Ok(c)
}

fn load_kappa(cfg: &RunConfig, mesh: &TriMesh) -> Result<DomainConductivity> {
    let k = match &cfg.kappa {
        Some(p) => io::parse_kappa(&read_to_string(p)?)?,
        None => DomainConductivity::Scalar(cfg.sigma.ln()),
    };
    if let DomainConductivity::Nodal(v) = &k {
        if v.len() != mesh.node_count() {
            return Err(Error::DimensionMismatch {
                what: "kappa values".into(),
                expected: mesh.node_count(),
                actual: v.len(),
            });
        }
    }
    Ok(k)
}

fn build_model(mesh: Arc<TriMesh>, intervals: &[(f64, f64)], amplitude: f64) -> Result<ForwardModel> {
    let els = locate_electrodes(&mesh, intervals)?;
    let patterns = CurrentPatterns::new(els.len(), amplitude)?;
    ForwardModel::new(mesh, els, patterns)
}

/// Voltages for the configured conductivity and contacts.
pub fn forward(cfg: &RunConfig) -> Result<()> {
    let mesh = load_mesh(cfg)?;
    let intervals = load_intervals(cfg)?;
    let widths: Vec<f64> = intervals.iter().map(|_| cfg.tank.electrode_width).collect();
    let kappa = load_kappa(cfg, &mesh)?;
    let model = build_model(mesh, &intervals, cfg.amplitude)?;
    let contact = load_contact(cfg, &model, &widths)?;
    let sol = model.solve(&kappa, &contact)?;
    let p = write(&cfg.out, "measurements.csv", &io::format_measurements(&sol.measurements(), intervals.len()))?;
    eprintln!("wrote {}", p.display());
    Ok(())
}

/// Synthetic measurements from a refined mesh, plus the truth record and the
/// coarse mesh and electrode files for reconstruction.
pub fn synth(cfg: &RunConfig) -> Result<()> {
    let mesh = load_mesh(cfg)?;
    let true_intervals = load_intervals(cfg)?;
    let sc = &cfg.scenario;
    let phantom = match sc.phantom {
        PhantomKind::Homogeneous => Phantom::homogeneous(sc.background),
        PhantomKind::Inclusions => {
            let r = mesh.perimeter() / (2.0 * std::f64::consts::PI);
            Phantom {
                background: sc.background,
                ..Phantom::inclusion_pair(r)
            }
        }
    };
    let scenario = Scenario {
        extension: sc.extension,
        seed: cfg.seed,
        noise_std: sc.noise_std,
        contact_log_mean: sc.contact_log_mean,
        contact_log_std: sc.contact_log_std,
        amplitude: cfg.amplitude,
        ..Scenario::new(true_intervals.clone(), phantom)
    };
    let s = synth_data(&scenario, &mesh, sc.fine_levels)?;
    let m = true_intervals.len();
    write(&cfg.out, "measurements.csv", &io::format_measurements(&s.data, m))?;
    write(&cfg.out, "truth.json", &to_json(&s.truth))?;
    write(&cfg.out, "mesh.txt", &io::format_mesh(&mesh))?;
    write(&cfg.out, "electrodes_true.txt", &io::format_intervals(&true_intervals))?;
    write(&cfg.out, "electrodes_extended.txt", &io::format_intervals(&s.truth.extended_intervals))?;
    write(&cfg.out, "electrodes_cem.txt", &io::format_intervals(&s.truth.cem_intervals))?;
    eprintln!("wrote synthetic data to {}", cfg.out.display());
    Ok(())
}

/// Only the penalized terms of the objective.
fn objective_terms_json(setup: &ReconstructionSetup, terms: &eit_core::reconstruction::ObjectiveTerms) -> Value {
    let mut m = Map::new();
    m.insert("data".into(), json!(terms.data));
    if setup.kappa_mode == KappaMode::Nodal {
        m.insert("kappa".into(), json!(terms.kappa));
    }
    if setup.variant != Variant::Cem {
        m.insert("theta".into(), json!(terms.theta));
    }
    Value::Object(m)
}

pub fn reconstruct(cfg: &RunConfig) -> Result<()> {
    let data_path = cfg
        .data
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("reconstruct needs `data` in the config".into()))?;
    let mesh = load_mesh(cfg)?;
    let truth = cfg.truth.as_deref().map(load_truth).transpose()?;
    let (intervals, widths, amplitude) = match &truth {
        Some(t) => {
            check_inverse_crime(t, &mesh)?;
            (model_intervals(t, cfg.variant), t.scenario.true_widths(), t.scenario.amplitude)
        }
        None => {
            let ints = load_intervals(cfg)?;
            let w = vec![cfg.tank.electrode_width; ints.len()];
            (ints, w, cfg.amplitude)
        }
    };
    let data = io::parse_measurements(&read_to_string(data_path)?, intervals.len())?;
    let model = build_model(Arc::clone(&mesh), &intervals, amplitude)?;
    let setup = ReconstructionSetup {
        prior: cfg.prior,
        kappa_mean: cfg.kappa_mean,
        initial_net_conductance: cfg.net_conductance,
        options: cfg.options.clone(),
        ..ReconstructionSetup::new(cfg.variant, cfg.kappa_mode, widths)
    };
    let problem = eit_problem(&model, data.clone(), &setup)?;
    let k0 = match setup.kappa_mode {
        KappaMode::Scalar => homogeneous_guess(&model, &setup, &data)?,
        KappaMode::Nodal => setup.kappa_mean,
    };
    fs::create_dir_all(&cfg.out)?;
    let mut log = fs::File::create(cfg.out.join("iterations.jsonl"))?;
    let mut log_err = None;
    let out = problem.run_with(&initial_tau(&model, &setup, k0), |rec| {
        if log_err.is_none() {
            if let Err(e) = writeln!(log, "{}", serde_json::to_string(rec).expect("serializable")) {
                log_err = Some(e);
            }
        }
    })?;
    if let Some(e) = log_err {
        return Err(e.into());
    }
    let (kappa, contact) = problem.map.split(&out.state.tau);
    let summary_c = contact.summarize(model.electrodes())?;
    let center = match &truth {
        Some(t) => match center_error(&summary_c, &t.scenario.true_intervals, mesh.perimeter()) {
            Ok(e) => Some(1e3 * e),
            Err(Error::UndefinedCenter(_)) => None,
            Err(e) => return Err(e),
        },
        None => None,
    };
    let summary = json!({
        "variant": cfg.variant,
        "kappa_mode": cfg.kappa_mode,
        "residual": residual_norm(&out.last.prediction, &data)?,
        "sigma_mean": sigma_mean(&model, &kappa),
        "objective_terms": objective_terms_json(&setup, &out.state.terms),
        "log_conductance_mean": summary_c.log_mean,
        "log_conductance_std": summary_c.log_std,
        "center_error_mm": center,
        "iterations": out.state.iteration,
        "convergence_reason": out.state.reason,
    });
    write(&cfg.out, "kappa.csv", &io::format_kappa(&kappa))?;
    write(&cfg.out, "theta.csv", &io::format_contact(&contact, model.electrodes())?)?;
    write(&cfg.out, "summary.json", &to_json(&summary))?;
    let mut z = String::from("electrode,arclength,zeta\n");
    for (m, samples) in contact.sample(model.electrodes(), ZETA_SAMPLES).iter().enumerate() {
        for &(s, v) in samples {
            let _ = writeln!(z, "{},{},{}", m + 1, io::fmt_f64(s.rem_euclid(mesh.perimeter())), io::fmt_f64(v));
        }
    }
    write(&cfg.out, "zeta_samples.csv", &z)?;
    eprintln!(
        "{} after {} iterations; results in {}",
        serde_json::to_string(&out.state.reason).expect("serializable"),
        out.state.iteration,
        cfg.out.display()
    );
    Ok(())
}

/// Analytic vs central-difference Jacobian at the configured point.
pub fn jacobian_errors(cfg: &RunConfig) -> Result<Value> {
    let mesh = load_mesh(cfg)?;
    if mesh.node_count() > 1000 {
        eprintln!("warning: {} nodes; the difference check solves two problems per parameter", mesh.node_count());
    }
    let intervals = load_intervals(cfg)?;
    let widths = vec![cfg.tank.electrode_width; intervals.len()];
    let model = build_model(Arc::clone(&mesh), &intervals, cfg.amplitude)?;
    let k0 = cfg.sigma.ln();
    // Nodal mode uses a smooth non-constant field so every column is exercised.
    let kappa = match cfg.kappa_mode {
        KappaMode::Scalar => DomainConductivity::Scalar(k0),
        KappaMode::Nodal => {
            let r = mesh.perimeter() / (2.0 * std::f64::consts::PI);
            DomainConductivity::Nodal(mesh.nodes().iter().map(|p| k0 + 0.3 * (3.0 * p[0] / r).sin() * (2.0 * p[1] / r).cos()).collect())
        }
    };
    let contact = load_contact(cfg, &model, &widths)?;
    let sol = model.solve(&kappa, &contact)?;
    let analytic = full_jacobian(&model, &sol)?;
    let nk = kappa.len();
    let mut tau = kappa.values().to_vec();
    tau.extend_from_slice(&contact.theta);
    let fd = fd_jacobian(
        |t: &[f64]| {
            let c = ContactParams {
                variant: contact.variant,
                theta: t[nk..].to_vec(),
            };
            Ok(model.solve(&kappa.with_values(&t[..nk]), &c)?.measurements())
        },
        &tau,
        FD_STEP,
    )?;
    let nt = tau.len() - nk;
    let ka = analytic.columns(0, nk).into_owned();
    let kf = fd.columns(0, nk).into_owned();
    let ta = analytic.columns(nk, nt).into_owned();
    let tf = fd.columns(nk, nt).into_owned();
    Ok(json!({
        "variant": cfg.variant,
        "kappa_mode": cfg.kappa_mode,
        "kappa": max_relative_column_error(&ka, &kf),
        "theta": if nt > 0 { json!(max_relative_column_error(&ta, &tf)) } else { Value::Null },
        "kappa_columns": nk,
        "theta_columns": nt,
    }))
}

pub fn check_jacobian(cfg: &RunConfig) -> Result<()> {
    let v = jacobian_errors(cfg)?;
    print!("{}", to_json(&v));
    Ok(())
}

fn cell(v: &Value) -> String {
    match v {
        Value::Number(n) => match n.as_f64() {
            Some(x) if n.is_f64() => format!("{x:.4e}"),
            _ => n.to_string(),
        },
        Value::String(s) => s.clone(),
        Value::Null => "-".into(),
        other => other.to_string(),
    }
}

/// Markdown table over the `summary.json` files found in `dirs`.
pub fn report(dirs: &[PathBuf]) -> Result<String> {
    let cols = [
        "variant",
        "residual",
        "sigma_mean",
        "log_conductance_mean",
        "log_conductance_std",
        "center_error_mm",
        "iterations",
        "convergence_reason",
    ];
    let mut s = format!("| run | {} |\n|---|{}\n", cols.join(" | "), "---|".repeat(cols.len()));
    for d in dirs {
        let p = d.join("summary.json");
        let v: Value = serde_json::from_str(&read_to_string(&p)?).map_err(|e| Error::InvalidArgument(format!("{}: {e}", p.display())))?;
        let row: Vec<String> = cols.iter().map(|c| cell(v.get(*c).unwrap_or(&Value::Null))).collect();
        let _ = writeln!(s, "| {} | {} |", d.display(), row.join(" | "));
    }
    Ok(s)
}
