use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;
use proptest::prelude::*;

use eit_core::contact::PH_FLOOR;
use eit_core::experiments::{center_error, disk_mesh, randomize_extensions, residual_norm};
use eit_core::priors::{cov_kappa, cov_pl};
use eit_core::reconstruction::{eit_problem, initial_tau, ForwardMap, KappaMode, ReconstructionSetup, TikhonovProblem};
use eit_core::sensitivity::full_jacobian;
use eit_core::{
    locate_electrodes, refine_uniform, ContactParams, ContactSummary, CurrentPatterns, DomainConductivity, ForwardModel, TriMesh, Variant,
};

fn small() -> (Arc<TriMesh>, Vec<(f64, f64)>) {
    let mesh = Arc::new(disk_mesh(1.0, 48, 0.09).unwrap());
    let ints = (0..6).map(|m| (m as f64 / 6.0 + 0.03, m as f64 / 6.0 + 0.12)).collect();
    (mesh, ints)
}

fn model(amplitude: f64) -> ForwardModel {
    let (mesh, ints) = small();
    let els = locate_electrodes(&mesh, &ints).unwrap();
    let pats = CurrentPatterns::new(els.len(), amplitude).unwrap();
    ForwardModel::new(mesh, els, pats).unwrap()
}

/// Admissible contact parameters for `variant` from unit-interval draws.
fn contact_from(variant: Variant, model: &ForwardModel, u: &[f64]) -> ContactParams {
    let els = model.electrodes();
    let m = els.len();
    let n = eit_core::contact::param_count(variant, els);
    let theta = (0..n)
        .map(|k| {
            let x = u[k % u.len()];
            match variant {
                Variant::Cem | Variant::Pl => 0.05 + 0.5 * x,
                Variant::Ph if k < m => 1e-3 + 0.1 * x,
                Variant::Ph if k < 2 * m => 0.3 + 0.4 * x,
                Variant::Ph => 0.2 + 0.4 * x,
            }
        })
        .collect();
    ContactParams { variant, theta }
}

fn variant_strategy() -> impl Strategy<Value = Variant> {
    prop_oneof![Just(Variant::Cem), Just(Variant::Pl), Just(Variant::Ph)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mesh_area_and_refined_perimeter(nb in 12usize..60, spacing in 0.08f64..0.3) {
        let mesh = disk_mesh(1.0, nb, spacing).unwrap();
        let rel = (mesh.total_area() - mesh.boundary_polygon_area()).abs() / mesh.total_area();
        prop_assert!(rel <= 1e-12);
        let fine = refine_uniform(&mesh);
        prop_assert!((fine.perimeter() - mesh.perimeter()).abs() <= 1e-12 * mesh.perimeter());
        let rel = (fine.total_area() - fine.boundary_polygon_area()).abs() / fine.total_area();
        prop_assert!(rel <= 1e-12);
    }

    #[test]
    fn locate_is_idempotent(shift in 0.0f64..1.0, width in 0.05f64..0.12) {
        let (mesh, _) = small();
        let ints: Vec<(f64, f64)> = (0..4).map(|m| {
            let a = shift + m as f64 * 0.25;
            (a, a + width)
        }).collect();
        let a = locate_electrodes(&mesh, &ints).unwrap();
        let b = locate_electrodes(&mesh, &ints).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(&x.node_ids, &y.node_ids);
        }
    }

    #[test]
    fn clamped_zeta_is_nonnegative_and_idempotent(raw in proptest::collection::vec(-2.0f64..2.0, 18)) {
        let m = model(1e-3);
        let c = ContactParams { variant: Variant::Ph, theta: raw }.clamp_ph();
        prop_assert_eq!(c.clamp_ph(), c.clone());
        for e in 0..6 {
            let (h, l, w) = c.hat(e);
            prop_assert!(h >= PH_FLOOR && w >= PH_FLOOR && l - 0.5 * w >= -1e-15 && l + 0.5 * w <= 1.0 + 1e-15);
            for i in 0..=50 {
                prop_assert!(c.eval_zeta(m.electrodes(), e, i as f64 / 50.0) >= 0.0);
            }
            // Hat area is h up to the rounding of the support ends l ± w/2.
            let (m0, _) = c.density(m.electrodes(), e).moments_01();
            prop_assert!((m0 - h).abs() <= h * (1e-12 + 1e-15 / w), "area {} vs h {} (w {})", m0, h, w);
        }
    }

    #[test]
    fn zeta_vanishes_on_gaps(variant in variant_strategy(), u in proptest::collection::vec(0.0f64..1.0, 7)) {
        let m = model(1e-3);
        let c = contact_from(variant, &m, &u);
        let moments = c.edge_zeta_integrals(m.mesh(), m.electrodes()).unwrap();
        let mut on_electrode = vec![false; moments.len()];
        for e in m.electrodes() {
            for &p in &e.positions {
                on_electrode[p] = true;
            }
        }
        for (mo, &on) in moments.iter().zip(&on_electrode) {
            if !on {
                prop_assert!(mo.is_zero());
            }
        }
    }

    #[test]
    fn reciprocity_grounding_and_linearity(
        variant in variant_strategy(),
        u in proptest::collection::vec(0.0f64..1.0, 11),
        kappa_amp in 0.0f64..1.5,
    ) {
        let m1 = model(1e-3);
        let m2 = model(2e-3);
        let c = contact_from(variant, &m1, &u);
        let kappa = DomainConductivity::Nodal(
            m1.mesh().nodes().iter().map(|p| -4.0 + kappa_amp * (5.0 * p[0] + 3.0 * p[1]).sin()).collect(),
        );
        let s1 = m1.solve(&kappa, &c).unwrap();
        let r = s1.transfer_matrix(m1.patterns());
        prop_assert!((&r - r.transpose()).abs().max() <= 1e-10 * r.abs().max());
        for eu in &s1.electrode_u {
            let scale = eu.iter().map(|v| v.abs()).fold(0.0, f64::max);
            prop_assert!(eu.iter().sum::<f64>().abs() <= 1e-12 * scale);
        }
        let s2 = m2.solve(&kappa, &c).unwrap();
        for (a, b) in s1.measurements().iter().zip(s2.measurements()) {
            prop_assert!((2.0 * a - b).abs() <= 1e-12 * b.abs().max(1e-300));
        }
    }

    #[test]
    fn jacobian_needs_no_factorization_and_is_adjoint_consistent(variant in variant_strategy(), u in proptest::collection::vec(0.0f64..1.0, 5)) {
        let m = model(1e-3);
        let c = contact_from(variant, &m, &u);
        let kappa = DomainConductivity::Nodal(vec![-3.9; m.mesh().node_count()]);
        let sol = m.solve(&kappa, &c).unwrap();
        let before = (m.factorization_count(), m.solve_count());
        let j = full_jacobian(&m, &sol).unwrap();
        prop_assert_eq!((m.factorization_count(), m.solve_count()), before);
        // Each column, seen as (pattern i, electrode) potentials, gives a
        // symmetric matrix against the patterns.
        let ne = m.electrodes().len();
        let np = m.patterns().count();
        let p = m.patterns().matrix();
        for k in 0..j.ncols() {
            let du = DMatrix::from_fn(np, ne, |i, e| j[(i * ne + e, k)]);
            let b = &du * &p;
            let scale = b.abs().max();
            prop_assert!((&b - b.transpose()).abs().max() <= 1e-10 * scale.max(1e-300));
        }
    }

    #[test]
    fn covariances_are_deterministic(lambda in 0.01f64..0.2) {
        let m = model(1e-3);
        prop_assert_eq!(cov_kappa(m.mesh(), 10.0, lambda).unwrap(), cov_kappa(m.mesh(), 10.0, lambda).unwrap());
        prop_assert_eq!(
            cov_pl(m.mesh(), m.electrodes(), 500.0, lambda).unwrap(),
            cov_pl(m.mesh(), m.electrodes(), 500.0, lambda).unwrap()
        );
    }

    #[test]
    fn scenario_is_pure_in_its_inputs(seed in 0u64..10_000, ext in 0.0f64..0.03) {
        let ints: Vec<(f64, f64)> = (0..8).map(|m| (m as f64 * 0.125 + 0.04, m as f64 * 0.125 + 0.06)).collect();
        prop_assert_eq!(randomize_extensions(&ints, ext, seed, 1.0).unwrap(), randomize_extensions(&ints, ext, seed, 1.0).unwrap());
    }

    #[test]
    fn metrics_are_translation_invariant(shift in -2.0f64..2.0, offs in proptest::collection::vec(-0.01f64..0.01, 4)) {
        let p = 1.0;
        let ints: Vec<(f64, f64)> = (0..4).map(|m| (m as f64 * 0.25 + 0.05, m as f64 * 0.25 + 0.1)).collect();
        let centers: Vec<f64> = ints.iter().zip(&offs).map(|(&(a, b), o)| 0.5 * (a + b) + o).collect();
        let summary = |shift: f64| ContactSummary {
            net_conductance: vec![1e-3; 4],
            center: centers.iter().map(|c| Some(c + shift)).collect(),
            log_mean: None,
            log_std: None,
        };
        let moved: Vec<(f64, f64)> = ints.iter().map(|&(a, b)| (a + shift, b + shift)).collect();
        let e0 = center_error(&summary(0.0), &ints, p).unwrap();
        let e1 = center_error(&summary(shift), &moved, p).unwrap();
        prop_assert!((e0 - e1).abs() <= 1e-12);
        let u = [0.1, -0.3, 0.25];
        let v = [0.0, 0.2, -0.1];
        let r0 = residual_norm(&u, &v).unwrap();
        let us: Vec<f64> = u.iter().map(|x| x + shift).collect();
        let vs: Vec<f64> = v.iter().map(|x| x + shift).collect();
        prop_assert!((r0 - residual_norm(&us, &vs).unwrap()).abs() <= 1e-12);
    }
}

/// Records every parameter vector the optimizer evaluates.
struct Recording<'a, F: ForwardMap> {
    inner: &'a F,
    seen: Mutex<Vec<Vec<f64>>>,
}

impl<F: ForwardMap> ForwardMap for Recording<'_, F> {
    type State = F::State;
    fn param_count(&self) -> usize {
        self.inner.param_count()
    }
    fn evaluate(&self, tau: &[f64]) -> eit_core::Result<(Vec<f64>, F::State)> {
        self.seen.lock().unwrap().push(tau.to_vec());
        self.inner.evaluate(tau)
    }
    fn jacobian(&self, tau: &[f64], state: &F::State) -> eit_core::Result<DMatrix<f64>> {
        self.inner.jacobian(tau, state)
    }
    fn project(&self, tau: &mut [f64]) {
        self.inner.project(tau)
    }
}

#[test]
fn every_evaluated_ph_iterate_is_admissible() {
    let m = model(1e-3);
    let ne = m.electrodes().len();
    let truth = contact_from(Variant::Ph, &m, &[0.1, 0.9, 0.4, 0.7]);
    let data = m.solve(&DomainConductivity::Scalar(-3.5), &truth).unwrap().measurements();
    let mut setup = ReconstructionSetup::new(Variant::Ph, KappaMode::Scalar, vec![0.05; ne]);
    setup.options.max_iter = 15;
    let base = eit_problem(&m, data.clone(), &setup).unwrap();
    let rec = Recording {
        inner: &base.map,
        seen: Mutex::new(Vec::new()),
    };
    let problem = TikhonovProblem::new(rec, data, base.mean.clone(), base.whitener.clone(), base.penalties.clone(), base.options.clone()).unwrap();
    let out = problem.run(&initial_tau(&m, &setup, -3.9)).unwrap();
    let seen = problem.map.seen.lock().unwrap();
    assert!(seen.len() > out.state.iteration);
    for tau in seen.iter() {
        let c = ContactParams {
            variant: Variant::Ph,
            theta: tau[1..].to_vec(),
        };
        assert_eq!(c.clamp_ph(), c, "unclamped PH iterate evaluated");
    }
    assert!(out.state.history.windows(2).all(|w| w[1].objective <= w[0].objective));
}

#[test]
fn reconstruction_is_bit_reproducible() {
    let m = model(1e-3);
    let truth = contact_from(Variant::Cem, &m, &[0.3, 0.6]);
    let data = m.solve(&DomainConductivity::Scalar(-3.7), &truth).unwrap().measurements();
    let setup = ReconstructionSetup::new(Variant::Pl, KappaMode::Nodal, vec![0.09; 6]);
    let run = || {
        let p = eit_problem(&m, data.clone(), &setup).unwrap();
        let mut tau = initial_tau(&m, &setup, setup.kappa_mean);
        p.map.project(&mut tau);
        p.run(&tau).unwrap().state
    };
    let (a, b) = (run(), run());
    assert_eq!(a.history, b.history);
    assert_eq!(a.tau.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.tau.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
}

#[test]
fn sign_flipped_jacobian_reports_error_near_two() {
    let m = model(1e-3);
    let c = contact_from(Variant::Ph, &m, &[0.5, 0.2]);
    let kappa = DomainConductivity::Scalar(-3.9);
    let sol = m.solve(&kappa, &c).unwrap();
    let j = full_jacobian(&m, &sol).unwrap();
    let mut tau = vec![-3.9];
    tau.extend_from_slice(&c.theta);
    let fd = eit_core::sensitivity::fd_jacobian(
        |t: &[f64]| {
            let cc = ContactParams {
                variant: Variant::Ph,
                theta: t[1..].to_vec(),
            };
            Ok(m.solve(&DomainConductivity::Scalar(t[0]), &cc)?.measurements())
        },
        &tau,
        1e-6,
    )
    .unwrap();
    let healthy = eit_core::sensitivity::max_relative_column_error(&j, &fd);
    assert!(healthy <= 1e-4, "{healthy}");
    let mut broken = j.clone();
    let col = -broken.column(3);
    broken.set_column(3, &col);
    let e = eit_core::sensitivity::max_relative_column_error(&broken, &fd);
    assert!((e - 2.0).abs() < 1e-3, "{e}");
}
