//! Contact conductance `zeta` on the extended electrodes: the CEM, piecewise
//! linear (PL) and parametric hat (PH) parametrizations.
//!
//! Every density handled here, `zeta` itself and each parameter derivative, is
//! piecewise linear in the normalized electrode coordinate `t`. Integrals of
//! such a density against products of two linear boundary basis functions are
//! cubic polynomials per piece, so two-point Gauss rules on each piece/edge
//! overlap integrate them exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{ExtendedElectrode, TriMesh};

/// Lower bound for PH heights and widths after clamping.
pub const PH_FLOOR: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Cem,
    Pl,
    Ph,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Cem => "cem",
            Variant::Pl => "pl",
            Variant::Ph => "ph",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cem" => Ok(Variant::Cem),
            "pl" => Ok(Variant::Pl),
            "ph" => Ok(Variant::Ph),
            other => Err(Error::InvalidArgument(format!("unknown variant {other:?}"))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Linear segment of a density on `[t0, t1]`, with end values `v0`, `v1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearPiece {
    pub t0: f64,
    pub t1: f64,
    pub v0: f64,
    pub v1: f64,
}

impl LinearPiece {
    fn at(&self, t: f64) -> f64 {
        if self.t1 == self.t0 {
            return 0.5 * (self.v0 + self.v1);
        }
        self.v0 + (self.v1 - self.v0) * (t - self.t0) / (self.t1 - self.t0)
    }
}

/// A density on one electrode in the normalized coordinate; zero off its pieces.
///
/// Pieces are half-open `[t0, t1)` for point evaluation and must not overlap.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Density {
    pub pieces: Vec<LinearPiece>,
}

/// Integrals over one boundary edge of a density against the two linear
/// basis functions of the edge (index 0 = first node in loop order).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EdgeMoments {
    /// `∫ ρ φ_a φ_b ds`
    pub mass: [[f64; 2]; 2],
    /// `∫ ρ φ_a ds`
    pub load: [f64; 2],
    /// `∫ ρ ds`
    pub total: f64,
}

impl EdgeMoments {
    /// `∫ ρ (U_i - u_i)(U_j - u_j) ds` with `u` linear through the nodal values.
    pub fn gap_product(&self, ui: [f64; 2], big_ui: f64, uj: [f64; 2], big_uj: f64) -> f64 {
        let mut quad = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                quad += ui[a] * self.mass[a][b] * uj[b];
            }
        }
        big_ui * big_uj * self.total
            - big_ui * (self.load[0] * uj[0] + self.load[1] * uj[1])
            - big_uj * (self.load[0] * ui[0] + self.load[1] * ui[1])
            + quad
    }

    pub fn is_zero(&self) -> bool {
        self.total == 0.0 && self.load == [0.0; 2] && self.mass == [[0.0; 2]; 2]
    }
}

const GAUSS_2: f64 = 0.577_350_269_189_625_8; // 1/sqrt(3)

impl Density {
    pub fn constant(value: f64) -> Self {
        Density {
            pieces: vec![LinearPiece {
                t0: 0.0,
                t1: 1.0,
                v0: value,
                v1: value,
            }],
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        for p in &self.pieces {
            if t >= p.t0 && t < p.t1 {
                return p.at(t);
            }
        }
        0.0
    }

    /// Moments over the edge spanning `[ta, tb]` in `t`, of physical length `len`.
    pub fn edge_moments(&self, ta: f64, tb: f64, len: f64) -> EdgeMoments {
        let mut m = EdgeMoments::default();
        let span = tb - ta;
        if span <= 0.0 {
            return m;
        }
        let ds_dt = len / span;
        for p in &self.pieces {
            let lo = p.t0.max(ta);
            let hi = p.t1.min(tb);
            if hi <= lo {
                continue;
            }
            let mid = 0.5 * (lo + hi);
            let half = 0.5 * (hi - lo);
            for g in [-GAUSS_2, GAUSS_2] {
                let t = mid + g * half;
                let w = half * ds_dt * p.at(t);
                let phi = [(tb - t) / span, (t - ta) / span];
                m.total += w;
                for a in 0..2 {
                    m.load[a] += w * phi[a];
                    for b in 0..2 {
                        m.mass[a][b] += w * phi[a] * phi[b];
                    }
                }
            }
        }
        m
    }

    /// `(∫ ρ dt, ∫ t ρ dt)` over `[0, 1]`.
    pub fn moments_01(&self) -> (f64, f64) {
        let mut m0 = 0.0;
        let mut m1 = 0.0;
        for p in &self.pieces {
            let (a, b) = (p.t0.max(0.0), p.t1.min(1.0));
            if b <= a {
                continue;
            }
            let (va, vb) = (p.at(a), p.at(b));
            m0 += 0.5 * (b - a) * (va + vb);
            m1 += (b - a) / 6.0 * (2.0 * a * va + a * vb + b * va + 2.0 * b * vb);
        }
        (m0, m1)
    }
}

/// Parameter vector of one parametrization.
///
/// Layouts: CEM `theta[m]` with `zeta = theta[m]^2` on electrode `m`;
/// PL one value per interior electrode node (electrode-major, loop order) with
/// nodal `zeta = theta^2` and zero at electrode endpoints; PH `(h_1..h_M,
/// l_1..l_M, w_1..w_M)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactParams {
    pub variant: Variant,
    pub theta: Vec<f64>,
}

/// Number of parameters of `variant` on the given electrodes.
pub fn param_count(variant: Variant, electrodes: &[ExtendedElectrode]) -> usize {
    match variant {
        Variant::Cem => electrodes.len(),
        Variant::Pl => electrodes.iter().map(|e| e.node_ids.len() - 2).sum(),
        Variant::Ph => 3 * electrodes.len(),
    }
}

/// Offset of each electrode's first PL parameter.
pub fn pl_offsets(electrodes: &[ExtendedElectrode]) -> Vec<usize> {
    let mut off = Vec::with_capacity(electrodes.len() + 1);
    let mut acc = 0;
    for e in electrodes {
        off.push(acc);
        acc += e.node_ids.len() - 2;
    }
    off.push(acc);
    off
}

fn hat_pieces(h: f64, l: f64, w: f64) -> Density {
    if w <= 0.0 {
        return Density::default();
    }
    let peak = 2.0 * h / w;
    Density {
        pieces: vec![
            LinearPiece {
                t0: l - 0.5 * w,
                t1: l,
                v0: 0.0,
                v1: peak,
            },
            LinearPiece {
                t0: l,
                t1: l + 0.5 * w,
                v0: peak,
                v1: 0.0,
            },
        ],
    }
}

fn nodal_pieces(node_t: &[f64], values: &[f64]) -> Density {
    Density {
        pieces: node_t
            .windows(2)
            .zip(values.windows(2))
            .map(|(t, v)| LinearPiece {
                t0: t[0],
                t1: t[1],
                v0: v[0],
                v1: v[1],
            })
            .collect(),
    }
}

impl ContactParams {
    pub fn new(variant: Variant, theta: Vec<f64>, electrodes: &[ExtendedElectrode]) -> Result<Self> {
        let expected = param_count(variant, electrodes);
        if theta.len() != expected {
            return Err(Error::dims(
                format!("{variant} contact parameters"),
                expected,
                theta.len(),
            ));
        }
        Ok(ContactParams { variant, theta })
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn check(&self, electrodes: &[ExtendedElectrode]) -> Result<()> {
        let expected = param_count(self.variant, electrodes);
        if self.theta.len() != expected {
            return Err(Error::dims(
                format!("{} contact parameters", self.variant),
                expected,
                self.theta.len(),
            ));
        }
        Ok(())
    }

    /// PH triplet `(h, l, w)` of electrode `m`.
    pub fn hat(&self, m: usize) -> (f64, f64, f64) {
        let mm = self.theta.len() / 3;
        (self.theta[m], self.theta[mm + m], self.theta[2 * mm + m])
    }

    /// The contact density `zeta` on electrode `m`.
    pub fn density(&self, electrodes: &[ExtendedElectrode], m: usize) -> Density {
        match self.variant {
            Variant::Cem => Density::constant(self.theta[m] * self.theta[m]),
            Variant::Pl => {
                let off = pl_offsets(electrodes)[m];
                let e = &electrodes[m];
                let n_int = e.node_ids.len() - 2;
                let mut values = Vec::with_capacity(n_int + 2);
                values.push(0.0);
                values.extend(self.theta[off..off + n_int].iter().map(|x| x * x));
                values.push(0.0);
                nodal_pieces(&e.node_t, &values)
            }
            Variant::Ph => {
                let (h, l, w) = self.hat(m);
                hat_pieces(h, l, w)
            }
        }
    }

    /// Pointwise contact conductance on electrode `m` at normalized position `t`.
    pub fn eval_zeta(&self, electrodes: &[ExtendedElectrode], m: usize, t: f64) -> f64 {
        self.density(electrodes, m).eval(t)
    }

    /// Derivative of `zeta` with respect to parameter `k`, as `(electrode, density)`.
    pub fn dzeta_dtheta(&self, electrodes: &[ExtendedElectrode], k: usize) -> Result<(usize, Density)> {
        if k >= self.theta.len() {
            return Err(Error::IndexOutOfRange {
                index: k,
                count: self.theta.len(),
            });
        }
        match self.variant {
            Variant::Cem => Ok((k, Density::constant(2.0 * self.theta[k]))),
            Variant::Pl => {
                let offs = pl_offsets(electrodes);
                let m = offs.partition_point(|&o| o <= k) - 1;
                let j = k - offs[m] + 1;
                let t = &electrodes[m].node_t;
                let d = 2.0 * self.theta[k];
                Ok((
                    m,
                    Density {
                        pieces: vec![
                            LinearPiece {
                                t0: t[j - 1],
                                t1: t[j],
                                v0: 0.0,
                                v1: d,
                            },
                            LinearPiece {
                                t0: t[j],
                                t1: t[j + 1],
                                v0: d,
                                v1: 0.0,
                            },
                        ],
                    },
                ))
            }
            Variant::Ph => {
                let mm = self.theta.len() / 3;
                let (family, m) = (k / mm, k % mm);
                let (h, l, w) = self.hat(m);
                let (lo, hi) = (l - 0.5 * w, l + 0.5 * w);
                let (rise, fall) = match family {
                    // d/dh: the unit-height hat
                    0 => ((0.0, 2.0 / w), (2.0 / w, 0.0)),
                    // d/dl: shifts mass from the rising to the falling flank
                    1 => {
                        let s = 4.0 * h / (w * w);
                        ((-s, -s), (s, s))
                    }
                    // d/dw
                    _ => {
                        let s = 2.0 * h / (w * w);
                        ((s, -s), (-s, s))
                    }
                };
                Ok((
                    m,
                    Density {
                        pieces: vec![
                            LinearPiece {
                                t0: lo,
                                t1: l,
                                v0: rise.0,
                                v1: rise.1,
                            },
                            LinearPiece {
                                t0: l,
                                t1: hi,
                                v0: fall.0,
                                v1: fall.1,
                            },
                        ],
                    },
                ))
            }
        }
    }

    /// Projects PH parameters into the admissible set: `w <= 1`, then `l`
    /// moved so that the hat support lies in `[0, 1]`. Heights and widths are
    /// floored at [`PH_FLOOR`]. Other variants are returned unchanged.
    pub fn clamp_ph(&self) -> ContactParams {
        if self.variant != Variant::Ph {
            return self.clone();
        }
        let mm = self.theta.len() / 3;
        let mut theta = self.theta.clone();
        for m in 0..mm {
            let h = theta[m].max(PH_FLOOR);
            let mut l = theta[mm + m];
            let mut w = theta[2 * mm + m].max(PH_FLOOR);
            if w > 1.0 {
                w = 1.0;
            }
            if l - 0.5 * w < 0.0 {
                l = 0.5 * w;
            }
            if l + 0.5 * w > 1.0 {
                l = 1.0 - 0.5 * w;
            }
            theta[m] = h;
            theta[mm + m] = l;
            theta[2 * mm + m] = w;
        }
        ContactParams {
            variant: Variant::Ph,
            theta,
        }
    }

    /// Exact per-boundary-edge integrals of `zeta`, indexed by boundary-loop
    /// position; zero away from the electrodes.
    pub fn edge_zeta_integrals(&self, mesh: &TriMesh, electrodes: &[ExtendedElectrode]) -> Result<Vec<EdgeMoments>> {
        self.check(electrodes)?;
        let mut out = vec![EdgeMoments::default(); mesh.boundary_edge_count()];
        for (m, e) in electrodes.iter().enumerate() {
            let d = self.density(electrodes, m);
            for (k, &len) in e.edge_lengths.iter().enumerate() {
                out[e.positions[k]] = d.edge_moments(e.node_t[k], e.node_t[k + 1], len);
            }
        }
        Ok(out)
    }

    /// Net conductances, contact centers and log-conductance statistics.
    pub fn summarize(&self, electrodes: &[ExtendedElectrode]) -> Result<ContactSummary> {
        self.check(electrodes)?;
        let mut net = Vec::with_capacity(electrodes.len());
        let mut center = Vec::with_capacity(electrodes.len());
        for (m, e) in electrodes.iter().enumerate() {
            let (m0, m1) = self.density(electrodes, m).moments_01();
            let g = m0 * e.length;
            net.push(g);
            center.push(if g > 0.0 {
                Some(e.arclength_at(m1 / m0))
            } else {
                None
            });
        }
        let (log_mean, log_std) = log_stats(&net);
        Ok(ContactSummary {
            net_conductance: net,
            center,
            log_mean,
            log_std,
        })
    }

    /// `n` samples `(arclength, zeta)` per electrode at cell midpoints.
    pub fn sample(&self, electrodes: &[ExtendedElectrode], n: usize) -> Vec<Vec<(f64, f64)>> {
        electrodes
            .iter()
            .enumerate()
            .map(|(m, e)| {
                let d = self.density(electrodes, m);
                (0..n)
                    .map(|i| {
                        let t = (i as f64 + 0.5) / n as f64;
                        (e.arclength_at(t), d.eval(t))
                    })
                    .collect()
            })
            .collect()
    }
}

/// Sample mean and (n-1) standard deviation of the natural logs; `None` if
/// any value is nonpositive or fewer than two values are given.
pub fn log_stats(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.len() < 2 || values.iter().any(|&g| g <= 0.0) {
        return (None, None);
    }
    let n = values.len() as f64;
    let logs: Vec<f64> = values.iter().map(|g| g.ln()).collect();
    let mean = logs.iter().sum::<f64>() / n;
    let var = logs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some(var.sqrt()))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContactSummary {
    /// `∫_{E_m} zeta ds` per electrode (S).
    pub net_conductance: Vec<f64>,
    /// Contact center of mass in arclength (m), unwrapped from the electrode start.
    pub center: Vec<Option<f64>>,
    pub log_mean: Option<f64>,
    pub log_std: Option<f64>,
}

/// Starting contact with net conductance `net` on every electrode.
///
/// PH hats are centered with relative width `widths[m] / |E_m|` (full width
/// when `widths` is `None`).
pub fn initial_contact(variant: Variant, electrodes: &[ExtendedElectrode], net: f64, widths: Option<&[f64]>) -> ContactParams {
    let theta = match variant {
        Variant::Cem => electrodes.iter().map(|e| (net / e.length).sqrt()).collect(),
        Variant::Pl => electrodes
            .iter()
            .flat_map(|e| {
                let ne = e.edge_lengths.len();
                let eff = e.length - 0.5 * (e.edge_lengths[0] + e.edge_lengths[ne - 1]);
                let v = (net / eff).sqrt();
                std::iter::repeat_n(v, e.node_ids.len() - 2)
            })
            .collect(),
        Variant::Ph => {
            let mut h = Vec::new();
            let mut l = Vec::new();
            let mut w = Vec::new();
            for (m, e) in electrodes.iter().enumerate() {
                h.push(net / e.length);
                l.push(0.5);
                w.push(widths.map_or(1.0, |ws| (ws[m] / e.length).min(1.0)));
            }
            h.into_iter().chain(l).chain(w).collect()
        }
    };
    ContactParams { variant, theta }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_boundary, locate_electrodes};
    use approx::assert_relative_eq;

    fn disk(nb: usize) -> TriMesh {
        let mut nodes = vec![[0.0, 0.0]];
        for k in 0..nb {
            let a = 2.0 * std::f64::consts::PI * k as f64 / nb as f64;
            nodes.push([a.cos(), a.sin()]);
        }
        let tris = (0..nb).map(|k| [0, 1 + k, 1 + (k + 1) % nb]).collect();
        build_boundary(nodes, tris).unwrap()
    }

    fn two_electrodes(mesh: &TriMesh) -> Vec<ExtendedElectrode> {
        let h = mesh.perimeter() / mesh.boundary_edge_count() as f64;
        locate_electrodes(mesh, &[(1.0 * h, 7.0 * h), (20.0 * h, 24.0 * h)]).unwrap()
    }

    fn ph(h: f64, l: f64, w: f64) -> ContactParams {
        ContactParams {
            variant: Variant::Ph,
            theta: vec![h, 1.0, l, 0.5, w, 0.5],
        }
    }

    #[test]
    fn hat_peak_and_support() {
        let mesh = disk(48);
        let els = two_electrodes(&mesh);
        let p = ph(1.0, 0.5, 0.5);
        assert_relative_eq!(p.eval_zeta(&els, 0, 0.5), 4.0);
        assert_eq!(p.eval_zeta(&els, 0, 0.25), 0.0);
        assert_eq!(p.eval_zeta(&els, 0, 0.1), 0.0);
        let q = ph(0.7, 0.4, 0.3);
        assert_eq!(q.eval_zeta(&els, 0, 0.4 - 0.15), 0.0);
    }

    #[test]
    fn pl_node_value() {
        let mesh = disk(48);
        // 3-node electrode: one interior node
        let h = mesh.perimeter() / 48.0;
        let els = locate_electrodes(&mesh, &[(1.0 * h, 3.0 * h), (20.0 * h, 24.0 * h)]).unwrap();
        let p = ContactParams::new(Variant::Pl, vec![1.7, 0.0, 0.0, 0.0], &els).unwrap();
        assert_relative_eq!(p.eval_zeta(&els, 0, els[0].node_t[1]), 1.7 * 1.7, max_relative = 1e-14);
        assert_eq!(p.eval_zeta(&els, 0, 0.0), 0.0);
    }

    #[test]
    fn clamp_examples() {
        let c = ph(1.0, 0.5, 1.4).clamp_ph();
        assert_eq!(c.hat(0), (1.0, 0.5, 1.0));
        let c = ph(1.0, 0.1, 0.5).clamp_ph();
        assert_eq!(c.hat(0), (1.0, 0.25, 0.5));
        let c = ph(1.0, 0.9, 0.5).clamp_ph();
        assert_eq!(c.hat(0), (1.0, 0.75, 0.5));
        let feasible = ph(0.3, 0.4, 0.6);
        assert_eq!(feasible.clamp_ph(), feasible);
        let floored = ph(-1.0, 0.5, -0.2).clamp_ph();
        assert_eq!(floored.hat(0), (PH_FLOOR, 0.5, PH_FLOOR));
    }

    #[test]
    fn constant_edge_moments() {
        let d = Density::constant(2.5 * 2.5);
        let z = 2.5 * 2.5;
        let m = d.edge_moments(0.2, 0.4, 0.3);
        assert_relative_eq!(m.total, z * 0.3, max_relative = 1e-14);
        assert_relative_eq!(m.load[0], z * 0.15, max_relative = 1e-14);
        assert_relative_eq!(m.load[1], z * 0.15, max_relative = 1e-14);
        assert_relative_eq!(m.mass[0][1], z * 0.3 / 6.0, max_relative = 1e-14);
        assert_relative_eq!(m.mass[0][0], z * 0.3 / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn hat_area_over_electrode() {
        let mesh = disk(48);
        let els = two_electrodes(&mesh);
        // hat narrower than one edge, and a wide one spanning many edges
        for (h, l, w) in [(0.8, 0.41, 0.05), (1.3, 0.5, 0.9), (0.2, 0.2, 0.4)] {
            let p = ph(h, l, w);
            let integ = p.edge_zeta_integrals(&mesh, &els).unwrap();
            let tot: f64 = els[0].positions[..els[0].edge_count()]
                .iter()
                .map(|&k| integ[k].total)
                .sum();
            assert_relative_eq!(tot, h * els[0].length, max_relative = 1e-13);
        }
    }

    #[test]
    fn gap_edges_are_zero() {
        let mesh = disk(48);
        let els = two_electrodes(&mesh);
        let p = ph(1.0, 0.5, 0.5);
        let integ = p.edge_zeta_integrals(&mesh, &els).unwrap();
        assert!(integ[10].is_zero());
        assert!(integ[40].is_zero());
    }

    /// Midpoint-rule quadrature with many points as an independent check of
    /// the exact piecewise integrator.
    #[test]
    fn edge_moments_against_fine_quadrature() {
        let d = hat_pieces(0.9, 0.37, 0.22);
        let (ta, tb, len) = (0.3, 0.42, 0.05);
        let m = d.edge_moments(ta, tb, len);
        let n = 200_000;
        let mut acc = EdgeMoments::default();
        for i in 0..n {
            let t = ta + (tb - ta) * (i as f64 + 0.5) / n as f64;
            let w = d.eval(t) * len / n as f64;
            let phi = [(tb - t) / (tb - ta), (t - ta) / (tb - ta)];
            acc.total += w;
            for a in 0..2 {
                acc.load[a] += w * phi[a];
                for b in 0..2 {
                    acc.mass[a][b] += w * phi[a] * phi[b];
                }
            }
        }
        assert_relative_eq!(m.total, acc.total, max_relative = 1e-7);
        assert_relative_eq!(m.load[1], acc.load[1], max_relative = 1e-7);
        assert_relative_eq!(m.mass[0][1], acc.mass[0][1], max_relative = 1e-7);
    }

    #[test]
    fn derivative_densities_match_finite_differences() {
        let mesh = disk(48);
        let els = two_electrodes(&mesh);
        let p = ph(0.9, 0.45, 0.5);
        for k in 0..p.len() {
            let (m, d) = p.dzeta_dtheta(&els, k).unwrap();
            let step = 1e-6 * p.theta[k].abs().max(1.0);
            let mut plus = p.clone();
            plus.theta[k] += step;
            let mut minus = p.clone();
            minus.theta[k] -= step;
            for i in 0..20 {
                let t = 0.013 + 0.049 * i as f64;
                let (h, l, w) = p.hat(m);
                // stay clear of the hat breakpoints
                if [l - w / 2.0, l, l + w / 2.0].iter().any(|b| (t - b).abs() < 1e-3) {
                    continue;
                }
                let fd = (plus.eval_zeta(&els, m, t) - minus.eval_zeta(&els, m, t)) / (2.0 * step);
                let an = d.eval(t);
                let scale = fd.abs().max(h);
                assert!((fd - an).abs() <= 1e-6 * scale, "k={k} t={t} fd={fd} an={an}");
            }
        }
    }

    #[test]
    fn pl_and_cem_derivatives() {
        let mesh = disk(48);
        let els = two_electrodes(&mesh);
        let n = param_count(Variant::Pl, &els);
        let mut theta = vec![0.5; n];
        theta[2] = 3.0;
        let p = ContactParams::new(Variant::Pl, theta, &els).unwrap();
        let (m, d) = p.dzeta_dtheta(&els, 2).unwrap();
        assert_eq!(m, 0);
        assert_relative_eq!(d.eval(els[0].node_t[3]), 6.0, max_relative = 1e-14);
        let (m, _) = p.dzeta_dtheta(&els, n - 1).unwrap();
        assert_eq!(m, 1);
        assert!(p.dzeta_dtheta(&els, n).is_err());

        let c = ContactParams::new(Variant::Cem, vec![1.5, 2.0], &els).unwrap();
        let (m, d) = c.dzeta_dtheta(&els, 1).unwrap();
        assert_eq!(m, 1);
        assert_relative_eq!(d.eval(0.3), 4.0);
    }

    #[test]
    fn ph_dh_at_peak() {
        let mesh = disk(48);
        let els = two_electrodes(&mesh);
        let p = ph(5.0, 0.5, 0.4);
        let (_, d) = p.dzeta_dtheta(&els, 0).unwrap();
        assert_relative_eq!(d.eval(0.5), 2.0 / 0.4);
    }

    #[test]
    fn summaries() {
        let mesh = disk(48);
        let els = two_electrodes(&mesh);
        let p = ph(0.8, 0.3, 0.4);
        let s = p.summarize(&els).unwrap();
        assert_relative_eq!(s.net_conductance[0], 0.8 * els[0].length, max_relative = 1e-14);
        assert_relative_eq!(s.center[0].unwrap(), els[0].arclength_at(0.3), max_relative = 1e-14);

        let c = ContactParams::new(Variant::Cem, vec![1.0, 2.0], &els).unwrap();
        let s = c.summarize(&els).unwrap();
        assert_relative_eq!(s.center[1].unwrap(), els[1].midpoint(), max_relative = 1e-14);

        let n = param_count(Variant::Pl, &els);
        let pl = ContactParams::new(Variant::Pl, vec![0.7; n], &els).unwrap();
        let s = pl.summarize(&els).unwrap();
        for (c, e) in s.center.iter().zip(&els) {
            assert!((c.unwrap() - e.midpoint()).abs() <= 1e-12 * e.midpoint().max(1.0));
        }
    }

    #[test]
    fn log_statistics() {
        let (m, s) = log_stats(&[0.5, 0.5, 0.5]);
        assert_relative_eq!(m.unwrap(), 0.5f64.ln());
        assert_eq!(s.unwrap(), 0.0);
        let g = 0.3;
        let (m, s) = log_stats(&[g, g * 2f64.exp()]);
        assert_relative_eq!(m.unwrap(), g.ln() + 1.0, max_relative = 1e-14);
        assert_relative_eq!(s.unwrap(), 2f64.sqrt(), max_relative = 1e-14);
        assert_eq!(log_stats(&[1.0, 0.0]), (None, None));
    }

    #[test]
    fn zero_contact_has_no_center() {
        let mesh = disk(48);
        let els = two_electrodes(&mesh);
        let c = ContactParams::new(Variant::Cem, vec![0.0, 2.0], &els).unwrap();
        let s = c.summarize(&els).unwrap();
        assert_eq!(s.center[0], None);
        assert_eq!(s.log_mean, None);
    }

    #[test]
    fn initial_contacts_have_requested_net() {
        let mesh = disk(48);
        let els = two_electrodes(&mesh);
        for v in [Variant::Cem, Variant::Pl, Variant::Ph] {
            let p = initial_contact(v, &els, 0.001, None);
            let s = p.summarize(&els).unwrap();
            for g in s.net_conductance {
                assert_relative_eq!(g, 0.001, max_relative = 1e-12);
            }
        }
    }
}
