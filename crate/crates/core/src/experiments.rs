//! Synthetic tank experiments: disk meshes, electrode layouts with randomly
//! extended electrodes, phantom data from a refined mesh, and the evaluation
//! metrics.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::contact::{ContactParams, ContactSummary, Variant};
use crate::error::{Error, Result};
use crate::fem::{CurrentPatterns, DomainConductivity, ForwardModel};
use crate::mesh::{build_boundary, locate_electrodes, refine_uniform, Point, TriMesh};
use crate::reconstruction::{eit_problem, initial_tau, homogeneous_guess, GnState, KappaMode, ObjectiveTerms, ReconstructionSetup};

const STREAM_EXTENSION: u64 = 0;
const STREAM_CONTACT: u64 = 1;
const STREAM_NOISE: u64 = 2;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Disk triangulated by concentric rings, with spacing growing linearly from
/// `boundary_nodes` equal chords on the boundary to `center_spacing` at the
/// center. Boundary node 0 sits at angle 0. The radius is chosen so that the
/// boundary polygon has length `perimeter`.
pub fn disk_mesh(perimeter: f64, boundary_nodes: usize, center_spacing: f64) -> Result<TriMesh> {
    if boundary_nodes < 6 || !(perimeter > 0.0) || !(center_spacing > 0.0) {
        return Err(Error::InvalidArgument("disk mesh needs positive sizes and at least 6 boundary nodes".into()));
    }
    let nb = boundary_nodes;
    let radius = perimeter / (2.0 * nb as f64 * (PI / nb as f64).sin());
    let hb = perimeter / nb as f64;
    let spacing = |r: f64| hb + (center_spacing - hb) * (1.0 - r / radius);
    let mut rings: Vec<(f64, usize, f64)> = vec![(radius, nb, 0.0)];
    loop {
        let &(r, _, _) = rings.last().unwrap();
        let next = r - 0.5 * 3f64.sqrt() * spacing(r);
        let h = spacing(next.max(0.0));
        if next < 0.75 * h {
            break;
        }
        let n = ((2.0 * PI * next / h).round() as usize).max(5);
        let offset = if rings.len() % 2 == 1 { PI / n as f64 } else { 0.0 };
        rings.push((next, n, offset));
    }
    let mut nodes: Vec<Point> = Vec::new();
    let mut starts = Vec::new();
    for &(r, n, off) in &rings {
        starts.push(nodes.len());
        for k in 0..n {
            let a = off + 2.0 * PI * k as f64 / n as f64;
            nodes.push([r * a.cos(), r * a.sin()]);
        }
    }
    let center = nodes.len();
    nodes.push([0.0, 0.0]);
    let mut tris = Vec::new();
    for w in 0..rings.len() - 1 {
        let (_, no, offo) = rings[w];
        let (_, ni, offi) = rings[w + 1];
        let (so, si) = (starts[w], starts[w + 1]);
        let a = |i: usize| offo + 2.0 * PI * i as f64 / no as f64;
        let b = |j: isize| offi + 2.0 * PI * j as f64 / ni as f64;
        let j0 = ((a(0) - offi) * ni as f64 / (2.0 * PI)).round() as isize;
        let o_id = |i: usize| so + i % no;
        let i_id = |j: isize| si + j.rem_euclid(ni as isize) as usize;
        let (mut i, mut j) = (0usize, j0);
        let jend = j0 + ni as isize;
        while i < no || j < jend {
            let outer = if i == no {
                false
            } else if j == jend {
                true
            } else {
                a(i + 1) <= b(j + 1)
            };
            if outer {
                tris.push([o_id(i), o_id(i + 1), i_id(j)]);
                i += 1;
            } else {
                tris.push([o_id(i), i_id(j + 1), i_id(j)]);
                j += 1;
            }
        }
    }
    let (_, nl, _) = *rings.last().unwrap();
    let sl = *starts.last().unwrap();
    for k in 0..nl {
        tris.push([sl + k, sl + (k + 1) % nl, center]);
    }
    build_boundary(nodes, tris)
}

/// Circular tank with equally spaced electrodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TankSpec {
    pub perimeter: f64,
    pub boundary_nodes: usize,
    pub center_spacing: f64,
    pub electrodes: usize,
    pub electrode_width: f64,
}

impl Default for TankSpec {
    fn default() -> Self {
        TankSpec {
            perimeter: 1.06,
            boundary_nodes: 530,
            center_spacing: 0.041,
            electrodes: 16,
            electrode_width: 0.02,
        }
    }
}

impl TankSpec {
    pub fn mesh(&self) -> Result<TriMesh> {
        disk_mesh(self.perimeter, self.boundary_nodes, self.center_spacing)
    }

    pub fn layout(&self) -> Vec<(f64, f64)> {
        electrode_layout(self.perimeter, self.electrodes, self.electrode_width)
    }

    pub fn radius(&self) -> f64 {
        let nb = self.boundary_nodes as f64;
        self.perimeter / (2.0 * nb * (PI / nb).sin())
    }
}

/// `count` electrodes of width `width` with equal spacing; electrode `m` is
/// centered at arclength `(m + 1/2) P / count`.
pub fn electrode_layout(perimeter: f64, count: usize, width: f64) -> Vec<(f64, f64)> {
    let pitch = perimeter / count as f64;
    (0..count)
        .map(|m| {
            let c = (m as f64 + 0.5) * pitch;
            (c - 0.5 * width, c + 0.5 * width)
        })
        .collect()
}

/// Extends every interval by `extension`, split at a uniformly random ratio
/// between its two ends.
pub fn randomize_extensions(true_intervals: &[(f64, f64)], extension: f64, seed: u64, perimeter: f64) -> Result<Vec<(f64, f64)>> {
    if !(extension >= 0.0) {
        return Err(Error::InvalidArgument(format!("negative extension {extension}")));
    }
    let mut r = rng(seed, STREAM_EXTENSION);
    let out: Vec<(f64, f64)> = true_intervals
        .iter()
        .map(|&(a, b)| {
            let alpha: f64 = r.random();
            (a - alpha * extension, b + (1.0 - alpha) * extension)
        })
        .collect();
    let m = out.len();
    let mut bad = Vec::new();
    for k in 0..m {
        let (_, end) = out[k];
        let (next_start, _) = out[(k + 1) % m];
        let next_start = if k + 1 == m { next_start + perimeter } else { next_start };
        if end >= next_start {
            bad.push((k + 1, (k + 1) % m + 1));
        }
    }
    if !bad.is_empty() {
        return Err(Error::ExtensionOverlap(bad));
    }
    Ok(out)
}

/// Standard-CEM electrodes of the true widths centered on the extended ones.
pub fn cem_midpoint_intervals(extended: &[(f64, f64)], widths: &[f64]) -> Vec<(f64, f64)> {
    extended
        .iter()
        .zip(widths)
        .map(|(&(a, b), w)| {
            let c = 0.5 * (a + b);
            (c - 0.5 * w, c + 0.5 * w)
        })
        .collect()
}

fn circular_distance(a: f64, b: f64, perimeter: f64) -> f64 {
    let d = (a - b).rem_euclid(perimeter);
    d.min(perimeter - d)
}

/// Distance between the midpoints of corresponding intervals.
pub fn midpoint_displacement(a: &[(f64, f64)], b: &[(f64, f64)], perimeter: f64) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(x, y)| circular_distance(0.5 * (x.0 + x.1), 0.5 * (y.0 + y.1), perimeter))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    Disk { center: Point, radius: f64 },
    Polygon { vertices: Vec<Point> },
}

impl Shape {
    pub fn contains(&self, p: Point) -> bool {
        match self {
            Shape::Disk { center, radius } => (p[0] - center[0]).hypot(p[1] - center[1]) <= *radius,
            Shape::Polygon { vertices } => {
                let n = vertices.len();
                let mut inside = false;
                for k in 0..n {
                    let (a, b) = (vertices[k], vertices[(k + 1) % n]);
                    if (a[1] > p[1]) != (b[1] > p[1]) {
                        let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                        if p[0] < x {
                            inside = !inside;
                        }
                    }
                }
                inside
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Inclusion {
    pub shape: Shape,
    pub sigma: f64,
}

/// Piecewise constant conductivity; later inclusions take precedence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Phantom {
    pub background: f64,
    pub inclusions: Vec<Inclusion>,
}

impl Phantom {
    pub fn homogeneous(sigma: f64) -> Self {
        Phantom {
            background: sigma,
            inclusions: Vec::new(),
        }
    }

    /// An insulating and a conducting disk on a 0.02 S/m background, placed
    /// relative to the tank radius.
    pub fn inclusion_pair(radius: f64) -> Self {
        Phantom {
            background: 0.02,
            inclusions: vec![
                Inclusion {
                    shape: Shape::Disk {
                        center: [-0.4 * radius, 0.3 * radius],
                        radius: 0.25 * radius,
                    },
                    sigma: 1e-5,
                },
                Inclusion {
                    shape: Shape::Disk {
                        center: [0.35 * radius, -0.35 * radius],
                        radius: 0.2 * radius,
                    },
                    sigma: 10.0,
                },
            ],
        }
    }

    pub fn sigma_at(&self, p: Point) -> f64 {
        self.inclusions
            .iter()
            .rev()
            .find(|inc| inc.shape.contains(p))
            .map_or(self.background, |inc| inc.sigma)
    }

    pub fn nodal_kappa(&self, mesh: &TriMesh) -> DomainConductivity {
        DomainConductivity::Nodal(mesh.nodes().iter().map(|&p| self.sigma_at(p).ln()).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub true_intervals: Vec<(f64, f64)>,
    pub extension: f64,
    pub seed: u64,
    /// Standard deviation of the additive noise (V).
    pub noise_std: f64,
    pub phantom: Phantom,
    /// Log-normal distribution of the true net contact conductances.
    pub contact_log_mean: f64,
    pub contact_log_std: f64,
    /// Current amplitude (A).
    pub amplitude: f64,
}

impl Scenario {
    /// Noiseless scenario with exact electrodes and the default contact spread.
    pub fn new(true_intervals: Vec<(f64, f64)>, phantom: Phantom) -> Self {
        Scenario {
            true_intervals,
            extension: 0.0,
            seed: 0,
            noise_std: 0.0,
            phantom,
            contact_log_mean: -3.65,
            contact_log_std: 0.3,
            amplitude: 1e-3,
        }
    }

    pub fn true_widths(&self) -> Vec<f64> {
        self.true_intervals.iter().map(|(a, b)| b - a).collect()
    }

    pub fn extended_intervals(&self, perimeter: f64) -> Result<Vec<(f64, f64)>> {
        randomize_extensions(&self.true_intervals, self.extension, self.seed, perimeter)
    }

    pub fn true_net_conductance(&self) -> Result<Vec<f64>> {
        let mut r = rng(self.seed, STREAM_CONTACT);
        let dist = Normal::new(self.contact_log_mean, self.contact_log_std)
            .map_err(|e| Error::InvalidArgument(format!("contact distribution: {e}")))?;
        Ok(self.true_intervals.iter().map(|_| dist.sample(&mut r).exp()).collect())
    }
}

/// Everything about the data generation needed to score a reconstruction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub scenario: Scenario,
    pub extended_intervals: Vec<(f64, f64)>,
    pub cem_intervals: Vec<(f64, f64)>,
    pub true_net_conductance: Vec<f64>,
    pub fine_levels: usize,
    pub fine_node_count: usize,
    pub perimeter: f64,
}

#[derive(Clone, Debug)]
pub struct SynthData {
    pub data: Vec<f64>,
    pub noiseless: Vec<f64>,
    pub truth: TruthRecord,
}

/// Simulates measurements on `levels` uniform refinements of `mesh`, with CEM
/// contacts on the true electrodes, then adds noise.
pub fn synth_data(scenario: &Scenario, mesh: &TriMesh, levels: usize) -> Result<SynthData> {
    if levels == 0 {
        return Err(Error::InvalidArgument("data must come from a refined mesh (levels >= 1)".into()));
    }
    let extended = scenario.extended_intervals(mesh.perimeter())?;
    let mut fine = refine_uniform(mesh);
    for _ in 1..levels {
        fine = refine_uniform(&fine);
    }
    let fine = Arc::new(fine);
    let els = locate_electrodes(&fine, &scenario.true_intervals)?;
    let net = scenario.true_net_conductance()?;
    let theta = els.iter().zip(&net).map(|(e, g)| (g / e.length).sqrt()).collect();
    let contact = ContactParams::new(Variant::Cem, theta, &els)?;
    let patterns = CurrentPatterns::new(els.len(), scenario.amplitude)?;
    let model = ForwardModel::new(Arc::clone(&fine), els, patterns)?;
    let noiseless = model.solve(&scenario.phantom.nodal_kappa(&fine), &contact)?.measurements();
    let mut data = noiseless.clone();
    if scenario.noise_std > 0.0 {
        let mut r = rng(scenario.seed, STREAM_NOISE);
        let dist = Normal::new(0.0, scenario.noise_std).map_err(|e| Error::InvalidArgument(format!("noise: {e}")))?;
        data.iter_mut().for_each(|v| *v += dist.sample(&mut r));
    }
    Ok(SynthData {
        data,
        noiseless,
        truth: TruthRecord {
            cem_intervals: cem_midpoint_intervals(&extended, &scenario.true_widths()),
            extended_intervals: extended,
            scenario: scenario.clone(),
            true_net_conductance: net,
            fine_levels: levels,
            fine_node_count: fine.node_count(),
            perimeter: fine.perimeter(),
        },
    })
}

/// Refuses a reconstruction mesh that coincides with the data mesh.
pub fn check_inverse_crime(truth: &TruthRecord, model_mesh: &TriMesh) -> Result<()> {
    if truth.fine_levels == 0 || truth.fine_node_count == model_mesh.node_count() {
        return Err(Error::InvalidArgument("reconstruction mesh must differ from the data mesh".into()));
    }
    Ok(())
}

/// `|u - v|₂`
pub fn residual_norm(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::dims("measurement vector", v.len(), u.len()));
    }
    Ok(u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
}

/// Mean arclength distance between contact centers and true electrode midpoints.
pub fn center_error(summary: &ContactSummary, true_intervals: &[(f64, f64)], perimeter: f64) -> Result<f64> {
    if summary.center.len() != true_intervals.len() {
        return Err(Error::dims("electrode count", true_intervals.len(), summary.center.len()));
    }
    let mut total = 0.0;
    for (m, (c, &(a, b))) in summary.center.iter().zip(true_intervals).enumerate() {
        let c = c.ok_or(Error::UndefinedCenter(m + 1))?;
        total += circular_distance(c, 0.5 * (a + b), perimeter);
    }
    Ok(total / true_intervals.len() as f64)
}

/// Mean and sample standard deviation of the log net conductances.
pub fn conductance_stats(summary: &ContactSummary) -> Result<(f64, f64)> {
    if let Some(m) = summary.net_conductance.iter().position(|&g| !(g > 0.0)) {
        return Err(Error::ZeroConductance(m + 1));
    }
    match (summary.log_mean, summary.log_std) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(Error::InvalidArgument("need at least two electrodes for statistics".into())),
    }
}

/// The numbers reported for one reconstruction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub variant: Variant,
    pub residual: f64,
    /// Area-weighted mean conductivity.
    pub sigma_mean: f64,
    pub objective_terms: ObjectiveTerms,
    pub log_conductance_mean: Option<f64>,
    pub log_conductance_std: Option<f64>,
    pub center_error_mm: Option<f64>,
    pub iterations: usize,
    pub convergence_reason: crate::reconstruction::StopReason,
}

pub struct VariantRun {
    pub model: ForwardModel,
    pub kappa: DomainConductivity,
    pub contact: ContactParams,
    pub summary: RunSummary,
    pub state: GnState,
    pub prediction: Vec<f64>,
}

/// Electrode intervals the reconstruction model uses for `variant`.
pub fn model_intervals(truth: &TruthRecord, variant: Variant) -> Vec<(f64, f64)> {
    match variant {
        Variant::Cem => truth.cem_intervals.clone(),
        Variant::Pl | Variant::Ph => truth.extended_intervals.clone(),
    }
}

/// Area-weighted mean of `exp(kappa)`.
pub fn sigma_mean(model: &ForwardModel, kappa: &DomainConductivity) -> f64 {
    let n = model.mesh().triangles().len();
    let total: f64 = (0..n).map(|t| model.triangle_sigma(kappa, t).0).sum();
    total / model.mesh().total_area()
}

/// Reconstructs with `setup` on `mesh` against synthetic `data` and scores
/// the result against the truth. The start is the homogeneous `kappa_mean`
/// (or the least-squares homogeneous level in scalar mode).
pub fn run_variant(mesh: Arc<TriMesh>, synth: &SynthData, setup: &ReconstructionSetup, observer: impl FnMut(&crate::reconstruction::IterationRecord)) -> Result<VariantRun> {
    let truth = &synth.truth;
    check_inverse_crime(truth, &mesh)?;
    let els = locate_electrodes(&mesh, &model_intervals(truth, setup.variant))?;
    let patterns = CurrentPatterns::new(els.len(), truth.scenario.amplitude)?;
    let model = ForwardModel::new(Arc::clone(&mesh), els, patterns)?;
    let problem = eit_problem(&model, synth.data.clone(), setup)?;
    let k0 = match setup.kappa_mode {
        KappaMode::Scalar => homogeneous_guess(&model, setup, &synth.data)?,
        KappaMode::Nodal => setup.kappa_mean,
    };
    let out = problem.run_with(&initial_tau(&model, setup, k0), observer)?;
    let (kappa, contact) = problem.map.split(&out.state.tau);
    let prediction = out.last.prediction.clone();
    let summary_c = contact.summarize(model.electrodes())?;
    let center = match center_error(&summary_c, &truth.scenario.true_intervals, mesh.perimeter()) {
        Ok(e) => Some(1e3 * e),
        Err(Error::UndefinedCenter(_)) => None,
        Err(e) => return Err(e),
    };
    let summary = RunSummary {
        variant: setup.variant,
        residual: residual_norm(&prediction, &synth.data)?,
        sigma_mean: sigma_mean(&model, &kappa),
        objective_terms: out.state.terms,
        log_conductance_mean: summary_c.log_mean,
        log_conductance_std: summary_c.log_std,
        center_error_mm: center,
        iterations: out.state.iteration,
        convergence_reason: out.state.reason,
    };
    drop(problem);
    Ok(VariantRun {
        model,
        kappa,
        contact,
        summary,
        state: out.state,
        prediction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use crate::contact::initial_contact;

    #[test]
    fn disk_mesh_is_valid_and_graded() {
        let m = TankSpec::default().mesh().unwrap();
        assert_eq!(m.boundary_loop().len(), 530);
        assert_eq!(m.boundary_loop()[0], 0);
        assert_relative_eq!(m.perimeter(), 1.06, max_relative = 1e-12);
        assert_relative_eq!(m.total_area(), m.boundary_polygon_area(), max_relative = 1e-12);
        let n = m.node_count();
        assert!((2650..2800).contains(&n), "{n} nodes");
    }

    #[test]
    fn layout_and_zero_extension() {
        let ints = electrode_layout(1.06, 16, 0.02);
        assert_relative_eq!(ints[1].0 - ints[0].0, 0.06625, max_relative = 1e-12);
        assert!(ints[0].0 > 0.0);
        let ext = randomize_extensions(&ints, 0.0, 7, 1.06).unwrap();
        assert_eq!(ext, ints);
    }

    #[test]
    fn extensions_contain_true_and_are_reproducible() {
        let ints = electrode_layout(1.06, 16, 0.02);
        let a = randomize_extensions(&ints, 0.022, 3, 1.06).unwrap();
        let b = randomize_extensions(&ints, 0.022, 3, 1.06).unwrap();
        assert_eq!(a, b);
        for (e, t) in a.iter().zip(&ints) {
            assert!(e.0 <= t.0 && e.1 >= t.1);
            assert_relative_eq!((e.1 - e.0) - (t.1 - t.0), 0.022, max_relative = 1e-12);
        }
        let d = midpoint_displacement(&ints, &a, 1.06);
        assert!(d.iter().all(|&x| x <= 0.011 + 1e-15));
    }

    #[test]
    fn mean_displacement_is_quarter_extension() {
        let ints = electrode_layout(1.06, 16, 0.02);
        let mut total = 0.0;
        let mut count = 0;
        for seed in 0..400 {
            let e = randomize_extensions(&ints, 0.022, seed, 1.06).unwrap();
            for d in midpoint_displacement(&ints, &e, 1.06) {
                total += d;
                count += 1;
            }
        }
        let mean = total / count as f64;
        assert!((mean - 0.0055).abs() < 2.5e-4, "{mean}");
    }

    #[test]
    fn overlapping_extensions_rejected() {
        let ints = vec![(0.1, 0.2), (0.25, 0.3)];
        assert!(matches!(randomize_extensions(&ints, 0.2, 1, 1.0), Err(Error::ExtensionOverlap(_))));
    }

    #[test]
    fn phantom_lookup() {
        let p = Phantom::inclusion_pair(1.0);
        assert_eq!(p.sigma_at([-0.4, 0.3]), 1e-5);
        assert_eq!(p.sigma_at([0.35, -0.35]), 10.0);
        assert_eq!(p.sigma_at([0.9, 0.0]), 0.02);
        let sq = Shape::Polygon {
            vertices: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
        };
        assert!(sq.contains([0.5, 0.5]));
        assert!(!sq.contains([1.5, 0.5]));
    }

    #[test]
    fn metrics() {
        assert_eq!(residual_norm(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(residual_norm(&[1.0, 0.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert!(residual_norm(&[1.0], &[0.0, 0.0]).is_err());
        let s = ContactSummary {
            net_conductance: vec![0.01, 0.01 * 2f64.exp()],
            center: vec![Some(0.99), Some(0.5)],
            log_mean: crate::contact::log_stats(&[0.01, 0.01 * 2f64.exp()]).0,
            log_std: crate::contact::log_stats(&[0.01, 0.01 * 2f64.exp()]).1,
        };
        // first center wraps around the origin: distance 0.02 from 0.01
        let e = center_error(&s, &[(0.0, 0.02), (0.4, 0.6)], 1.0).unwrap();
        assert_relative_eq!(e, 0.01, max_relative = 1e-12);
        let (mu, sd) = conductance_stats(&s).unwrap();
        assert_relative_eq!(mu, 0.01f64.ln() + 1.0, max_relative = 1e-12);
        assert_relative_eq!(sd, 2f64.sqrt(), max_relative = 1e-12);
        let undefined = ContactSummary {
            center: vec![Some(0.0), None],
            ..s
        };
        assert!(matches!(center_error(&undefined, &[(0.0, 0.02), (0.4, 0.6)], 1.0), Err(Error::UndefinedCenter(2))));
    }

    #[test]
    fn center_error_translation_invariant() {
        let s = ContactSummary {
            net_conductance: vec![1.0, 1.0],
            center: vec![Some(0.11), Some(0.52)],
            log_mean: None,
            log_std: None,
        };
        let e0 = center_error(&s, &[(0.0, 0.2), (0.4, 0.6)], 1.0).unwrap();
        let shift = 0.37;
        let s2 = ContactSummary {
            center: s.center.iter().map(|c| c.map(|x| x + shift)).collect(),
            ..s.clone()
        };
        let e1 = center_error(&s2, &[(shift, 0.2 + shift), (0.4 + shift, 0.6 + shift)], 1.0).unwrap();
        assert_relative_eq!(e0, e1, max_relative = 1e-12);
    }

    #[test]
    fn synth_is_deterministic_and_guarded() {
        let mesh = disk_mesh(1.0, 64, 0.06).unwrap();
        let ints = electrode_layout(mesh.perimeter(), 4, 0.08);
        let mut sc = Scenario::new(ints, Phantom::homogeneous(0.02));
        sc.noise_std = 1e-4;
        sc.seed = 11;
        let a = synth_data(&sc, &mesh, 1).unwrap();
        let b = synth_data(&sc, &mesh, 1).unwrap();
        assert_eq!(a.data, b.data);
        assert_eq!(a.data.len(), 12);
        assert!(check_inverse_crime(&a.truth, &mesh).is_ok());
        let fine = refine_uniform(&mesh);
        assert!(check_inverse_crime(&a.truth, &fine).is_err());
        assert!(synth_data(&sc, &mesh, 0).is_err());
    }

    #[test]
    fn sigma_mean_of_homogeneous() {
        let mesh = Arc::new(disk_mesh(1.0, 48, 0.08).unwrap());
        let els = locate_electrodes(&mesh, &electrode_layout(1.0, 4, 0.1)).unwrap();
        let model = ForwardModel::new(mesh, els, CurrentPatterns::new(4, 1.0).unwrap()).unwrap();
        let _ = initial_contact(Variant::Cem, model.electrodes(), 1e-3, None);
        assert_relative_eq!(sigma_mean(&model, &DomainConductivity::from_sigma(0.02)), 0.02, max_relative = 1e-12);
    }
}
