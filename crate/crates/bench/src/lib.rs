//! Shared fixtures for the benchmarks.

use std::sync::Arc;

use eit_core::experiments::{disk_mesh, synth_data, Phantom, Scenario, SynthData, TankSpec};
use eit_core::{initial_contact, locate_electrodes, ContactParams, CurrentPatterns, ForwardModel, TriMesh, Variant};

/// The 16-electrode tank at full resolution.
pub fn tank() -> (TankSpec, Arc<TriMesh>) {
    let spec = TankSpec::default();
    let mesh = Arc::new(spec.mesh().expect("tank mesh"));
    (spec, mesh)
}

/// Small disk with 8 electrodes, a few hundred nodes.
pub fn small_disk() -> (Arc<TriMesh>, Vec<(f64, f64)>) {
    let mesh = Arc::new(disk_mesh(1.0, 80, 0.055).expect("disk mesh"));
    let ints = (0..8).map(|m| (m as f64 / 8.0 + 0.02, m as f64 / 8.0 + 0.08)).collect();
    (mesh, ints)
}

pub fn model(mesh: &Arc<TriMesh>, intervals: &[(f64, f64)]) -> ForwardModel {
    let els = locate_electrodes(mesh, intervals).expect("electrodes");
    let patterns = CurrentPatterns::new(els.len(), 1e-3).expect("patterns");
    ForwardModel::new(Arc::clone(mesh), els, patterns).expect("model")
}

pub fn contact(model: &ForwardModel, variant: Variant, width: f64) -> ContactParams {
    let widths = vec![width; model.electrodes().len()];
    initial_contact(variant, model.electrodes(), 1e-3, Some(&widths))
}

/// Homogeneous tank data with 22 mm extensions.
pub fn tank_data(spec: &TankSpec, mesh: &TriMesh, seed: u64) -> SynthData {
    let scenario = Scenario {
        extension: 0.022,
        seed,
        noise_std: 1e-4,
        ..Scenario::new(spec.layout(), Phantom::homogeneous(0.02))
    };
    synth_data(&scenario, mesh, 1).expect("synthetic data")
}
