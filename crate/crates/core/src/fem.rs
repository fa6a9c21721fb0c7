//! P1 finite element discretization of the smoothened complete electrode model.
//!
//! Unknowns are the nodal potentials `u` and the electrode potentials `U`. The
//! latter are grounded by writing `U = Q y` with `Q` an orthonormal basis of the
//! zero-mean subspace, which gives a symmetric positive definite system
//!
//! ```text
//! [ K   C ] [u]   [  0   ]
//! [ Cᵀ  D ] [y] = [ Qᵀ I ]
//! ```
//!
//! solved by a sparse Cholesky of `K` plus a dense Schur complement on `y`.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::contact::ContactParams;
use crate::error::{Error, Result};
use crate::mesh::{ExtendedElectrode, TriMesh};
use crate::sparse::{ProfileCholesky, ProfileMatrix};

/// Barycentric coordinates of the interior three-point rule (weights `A/3`).
const QUAD: [[f64; 3]; 3] = [
    [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
    [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
    [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
];

static MODEL_IDS: AtomicUsize = AtomicUsize::new(0);

/// Log-conductivity `kappa`, with `sigma = exp(kappa)`.
#[derive(Clone, Debug, PartialEq)]
pub enum DomainConductivity {
    Scalar(f64),
    /// One value per mesh node, interpolated linearly on each triangle.
    Nodal(Vec<f64>),
}

impl DomainConductivity {
    pub fn from_sigma(sigma: f64) -> Self {
        DomainConductivity::Scalar(sigma.ln())
    }

    pub fn len(&self) -> usize {
        match self {
            DomainConductivity::Scalar(_) => 1,
            DomainConductivity::Nodal(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn values(&self) -> &[f64] {
        match self {
            DomainConductivity::Scalar(k) => std::slice::from_ref(k),
            DomainConductivity::Nodal(v) => v,
        }
    }

    /// Same kind of parametrization with new values.
    pub fn with_values(&self, values: &[f64]) -> Self {
        match self {
            DomainConductivity::Scalar(_) => DomainConductivity::Scalar(values[0]),
            DomainConductivity::Nodal(_) => DomainConductivity::Nodal(values.to_vec()),
        }
    }

    fn check(&self, mesh: &TriMesh) -> Result<()> {
        if let DomainConductivity::Nodal(v) = self {
            if v.len() != mesh.node_count() {
                return Err(Error::dims("nodal log-conductivity", mesh.node_count(), v.len()));
            }
        }
        Ok(())
    }
}

/// Adjacent-to-first current patterns `I_i = c (e_1 - e_{i+1})`, `i = 1..M-1`.
#[derive(Clone, Debug, PartialEq)]
pub struct CurrentPatterns {
    electrodes: usize,
    amplitude: f64,
}

impl CurrentPatterns {
    pub fn new(electrodes: usize, amplitude: f64) -> Result<Self> {
        if electrodes < 2 {
            return Err(Error::InvalidArgument("at least two electrodes are needed".into()));
        }
        if !(amplitude != 0.0 && amplitude.is_finite()) {
            return Err(Error::InvalidArgument(format!("bad current amplitude {amplitude}")));
        }
        Ok(CurrentPatterns { electrodes, amplitude })
    }

    pub fn electrodes(&self) -> usize {
        self.electrodes
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn count(&self) -> usize {
        self.electrodes - 1
    }

    /// Pattern `i` (0-based, so it drives electrode `i + 1` against electrode 0).
    pub fn pattern(&self, i: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.electrodes];
        p[0] = self.amplitude;
        p[i + 1] = -self.amplitude;
        p
    }

    /// `M x (M-1)` matrix whose columns are the patterns.
    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.electrodes, self.count(), |m, i| {
            if m == 0 {
                self.amplitude
            } else if m == i + 1 {
                -self.amplitude
            } else {
                0.0
            }
        })
    }
}

/// Orthonormal basis (`M x (M-1)`) of the vectors in `R^M` summing to zero.
pub fn helmert_basis(m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, m - 1, |j, q| {
        let a = (q + 1) as f64;
        let s = 1.0 / (a * (a + 1.0)).sqrt();
        if j <= q {
            s
        } else if j == q + 1 {
            -a * s
        } else {
            0.0
        }
    })
}

#[derive(Clone, Debug)]
pub(crate) struct TriGeom {
    pub area: f64,
    /// Constant gradients of the three hat functions.
    pub grad: [[f64; 2]; 3],
}

/// Assembled grounded system.
#[derive(Clone, Debug)]
pub struct GroundedSystem {
    pub k: ProfileMatrix,
    /// `n x (M-1)`
    pub c: DMatrix<f64>,
    /// `(M-1) x (M-1)`
    pub d: DMatrix<f64>,
}

impl GroundedSystem {
    /// Block product `A [u; y]`.
    pub fn apply(&self, u: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut top = self.k.mul_vec(u);
        let n = u.len();
        let r = y.len();
        for q in 0..r {
            let col = self.c.column(q);
            for a in 0..n {
                top[a] += col[a] * y[q];
            }
        }
        let mut bottom = vec![0.0; r];
        for q in 0..r {
            let col = self.c.column(q);
            let mut s: f64 = col.iter().zip(u).map(|(c, u)| c * u).sum();
            for p in 0..r {
                s += self.d[(q, p)] * y[p];
            }
            bottom[q] = s;
        }
        (top, bottom)
    }
}

/// Factored grounded system; reusable for any number of current patterns.
pub struct Factorization {
    chol: ProfileCholesky,
    /// `K^{-1} C`
    w: DMatrix<f64>,
    schur: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl Factorization {
    /// Solves for the grounded right-hand side `g = Qᵀ I`, returning `(u, y)`.
    pub fn solve_grounded(&self, g: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let y = self.schur.solve(&nalgebra::DVector::from_column_slice(g));
        let u = (&self.w * &y).iter().map(|v| -v).collect();
        (u, y.as_slice().to_vec())
    }

    /// Solves `A x = b` for a general right-hand side `(b_u, b_y)`.
    pub fn solve_full(&self, bu: &[f64], by: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let z = self.chol.solve(bu);
        let mut rhs = nalgebra::DVector::from_column_slice(by);
        rhs -= self.w.tr_mul(&nalgebra::DVector::from_column_slice(&z));
        let y = self.schur.solve(&rhs);
        let wy = &self.w * &y;
        let u = z.iter().zip(wy.iter()).map(|(a, b)| a - b).collect();
        (u, y.as_slice().to_vec())
    }
}

/// Potentials for every current pattern.
#[derive(Clone, Debug)]
pub struct ForwardSolution {
    pub kappa: DomainConductivity,
    pub contact: ContactParams,
    /// Nodal potentials per pattern.
    pub u: Vec<Vec<f64>>,
    /// Electrode potentials per pattern (zero mean).
    pub electrode_u: Vec<Vec<f64>>,
    pub fingerprint: u64,
}

impl ForwardSolution {
    /// Stacked electrode potentials; row `i * M + m` is electrode `m` under pattern `i`.
    pub fn measurements(&self) -> Vec<f64> {
        self.electrode_u.iter().flatten().copied().collect()
    }

    /// Transfer matrix `R_ij = U^(i) · I^(j)`.
    pub fn transfer_matrix(&self, patterns: &CurrentPatterns) -> DMatrix<f64> {
        let p = patterns.matrix();
        let n = self.electrode_u.len();
        DMatrix::from_fn(n, n, |i, j| {
            self.electrode_u[i].iter().zip(p.column(j).iter()).map(|(a, b)| a * b).sum()
        })
    }
}

/// Mesh, electrodes and current patterns with everything that does not depend
/// on the conductivities precomputed.
pub struct ForwardModel {
    id: usize,
    mesh: Arc<TriMesh>,
    electrodes: Vec<ExtendedElectrode>,
    patterns: CurrentPatterns,
    geom: Vec<TriGeom>,
    template: ProfileMatrix,
    q: DMatrix<f64>,
    recovery: DMatrix<f64>,
    factorizations: AtomicUsize,
    solves: AtomicUsize,
}

impl std::fmt::Debug for ForwardModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ForwardModel")
            .field("nodes", &self.mesh.node_count())
            .field("electrodes", &self.electrodes.len())
            .finish()
    }
}

impl ForwardModel {
    pub fn new(mesh: Arc<TriMesh>, electrodes: Vec<ExtendedElectrode>, patterns: CurrentPatterns) -> Result<Self> {
        if patterns.electrodes() != electrodes.len() {
            return Err(Error::dims("current pattern length", electrodes.len(), patterns.electrodes()));
        }
        let nodes = mesh.nodes();
        let geom = mesh
            .triangles()
            .iter()
            .map(|t| {
                let p = [nodes[t[0]], nodes[t[1]], nodes[t[2]]];
                let two_a = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
                let mut grad = [[0.0; 2]; 3];
                for i in 0..3 {
                    let (j, k) = ((i + 1) % 3, (i + 2) % 3);
                    grad[i] = [(p[j][1] - p[k][1]) / two_a, (p[k][0] - p[j][0]) / two_a];
                }
                TriGeom { area: 0.5 * two_a, grad }
            })
            .collect();
        let mut adjacency = vec![Vec::new(); mesh.node_count()];
        for t in mesh.triangles() {
            for i in 0..3 {
                for j in 0..3 {
                    if i != j && !adjacency[t[i]].contains(&t[j]) {
                        adjacency[t[i]].push(t[j]);
                    }
                }
            }
        }
        let template = ProfileMatrix::from_graph(&adjacency);
        let m = electrodes.len();
        let q = helmert_basis(m);
        let pq = patterns.matrix().tr_mul(&q);
        let pq_inv = pq
            .try_inverse()
            .ok_or_else(|| Error::Numerical("current patterns do not span the zero-mean space".into()))?;
        let recovery = &q * pq_inv;
        Ok(ForwardModel {
            id: MODEL_IDS.fetch_add(1, Ordering::Relaxed),
            mesh,
            electrodes,
            patterns,
            geom,
            template,
            q,
            recovery,
            factorizations: AtomicUsize::new(0),
            solves: AtomicUsize::new(0),
        })
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> Arc<TriMesh> {
        Arc::clone(&self.mesh)
    }

    pub fn electrodes(&self) -> &[ExtendedElectrode] {
        &self.electrodes
    }

    pub fn patterns(&self) -> &CurrentPatterns {
        &self.patterns
    }

    pub fn helmert(&self) -> &DMatrix<f64> {
        &self.q
    }

    /// `Q (Pᵀ Q)^{-1}`: maps `Pᵀ U` back to the zero-mean `U`.
    pub fn recovery(&self) -> &DMatrix<f64> {
        &self.recovery
    }

    pub(crate) fn geometry(&self) -> &[TriGeom] {
        &self.geom
    }

    pub fn measurement_count(&self) -> usize {
        self.electrodes.len() * self.patterns.count()
    }

    pub fn factorization_count(&self) -> usize {
        self.factorizations.load(Ordering::Relaxed)
    }

    pub fn solve_count(&self) -> usize {
        self.solves.load(Ordering::Relaxed)
    }

    /// `∫_T sigma` over triangle `t` and its derivatives with respect to the
    /// three vertex values of `kappa` (for scalar `kappa` only entry 0 is set).
    pub fn triangle_sigma(&self, kappa: &DomainConductivity, t: usize) -> (f64, [f64; 3]) {
        let area = self.geom[t].area;
        match kappa {
            DomainConductivity::Scalar(k) => {
                let s = area * k.exp();
                (s, [s, 0.0, 0.0])
            }
            DomainConductivity::Nodal(v) => {
                let tri = self.mesh.triangles()[t];
                let kv = [v[tri[0]], v[tri[1]], v[tri[2]]];
                let mut total = 0.0;
                let mut d = [0.0; 3];
                for l in &QUAD {
                    let e = area / 3.0 * (l[0] * kv[0] + l[1] * kv[1] + l[2] * kv[2]).exp();
                    total += e;
                    for a in 0..3 {
                        d[a] += e * l[a];
                    }
                }
                (total, d)
            }
        }
    }

    pub fn assemble(&self, kappa: &DomainConductivity, contact: &ContactParams) -> Result<GroundedSystem> {
        kappa.check(&self.mesh)?;
        contact.check(&self.electrodes)?;
        if let Some(x) = kappa.values().iter().chain(&contact.theta).find(|x| !x.is_finite()) {
            return Err(Error::Numerical(format!("non-finite parameter {x}")));
        }
        let mut k = self.template.clone();
        k.clear();
        for (t, tri) in self.mesh.triangles().iter().enumerate() {
            let (s, _) = self.triangle_sigma(kappa, t);
            let g = &self.geom[t].grad;
            for a in 0..3 {
                for b in 0..=a {
                    k.add(tri[a], tri[b], s * (g[a][0] * g[b][0] + g[a][1] * g[b][1]));
                }
            }
        }
        let n = self.mesh.node_count();
        let m = self.electrodes.len();
        let mut c = DMatrix::zeros(n, m - 1);
        let mut net = vec![0.0; m];
        for (e_idx, e) in self.electrodes.iter().enumerate() {
            let dens = contact.density(&self.electrodes, e_idx);
            for (j, &len) in e.edge_lengths.iter().enumerate() {
                let mom = dens.edge_moments(e.node_t[j], e.node_t[j + 1], len);
                if mom.is_zero() {
                    continue;
                }
                let (na, nb) = (e.node_ids[j], e.node_ids[j + 1]);
                k.add(na, na, mom.mass[0][0]);
                k.add(nb, nb, mom.mass[1][1]);
                k.add(na, nb, mom.mass[0][1]);
                for q in 0..m - 1 {
                    let qm = self.q[(e_idx, q)];
                    c[(na, q)] -= qm * mom.load[0];
                    c[(nb, q)] -= qm * mom.load[1];
                }
                net[e_idx] += mom.total;
            }
        }
        if let Some(bad) = net.iter().position(|&g| !(g > 0.0)) {
            return Err(Error::ZeroContact(bad + 1));
        }
        let d = self.q.tr_mul(&DMatrix::from_diagonal(&nalgebra::DVector::from_vec(net))) * &self.q;
        Ok(GroundedSystem { k, c, d })
    }

    pub fn factor(&self, sys: &GroundedSystem) -> Result<Factorization> {
        let chol = sys.k.clone().factor()?;
        let n = sys.c.nrows();
        let r = sys.c.ncols();
        let mut w = DMatrix::zeros(n, r);
        for q in 0..r {
            let mut col: Vec<f64> = sys.c.column(q).iter().copied().collect();
            chol.solve_in_place(&mut col);
            w.column_mut(q).copy_from_slice(&col);
        }
        let mut s = &sys.d - sys.c.tr_mul(&w);
        s = (&s + s.transpose()) * 0.5;
        let schur = nalgebra::Cholesky::new(s.clone()).ok_or_else(|| {
            let (pivot, value) = s
                .diagonal()
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
            Error::NotPositiveDefinite { pivot, value }
        })?;
        self.factorizations.fetch_add(1, Ordering::Relaxed);
        Ok(Factorization { chol, w, schur })
    }

    /// Assemble, factor once and solve every current pattern.
    pub fn solve(&self, kappa: &DomainConductivity, contact: &ContactParams) -> Result<ForwardSolution> {
        let sys = self.assemble(kappa, contact)?;
        let fac = self.factor(&sys)?;
        let np = self.patterns.count();
        let mut u = Vec::with_capacity(np);
        let mut electrode_u = Vec::with_capacity(np);
        for i in 0..np {
            let g = self.q.tr_mul(&nalgebra::DVector::from_vec(self.patterns.pattern(i)));
            let (ui, y) = fac.solve_grounded(g.as_slice());
            let big_u = &self.q * nalgebra::DVector::from_vec(y);
            if ui.iter().chain(big_u.iter()).any(|v| !v.is_finite()) {
                return Err(Error::Numerical("non-finite potential".into()));
            }
            u.push(ui);
            electrode_u.push(big_u.as_slice().to_vec());
        }
        self.solves.fetch_add(np, Ordering::Relaxed);
        Ok(ForwardSolution {
            fingerprint: self.fingerprint(kappa, contact),
            kappa: kappa.clone(),
            contact: contact.clone(),
            u,
            electrode_u,
        })
    }

    /// Hash identifying this model together with the parameters.
    pub fn fingerprint(&self, kappa: &DomainConductivity, contact: &ContactParams) -> u64 {
        let mut h = DefaultHasher::new();
        self.id.hash(&mut h);
        matches!(kappa, DomainConductivity::Nodal(_)).hash(&mut h);
        for v in kappa.values() {
            v.to_bits().hash(&mut h);
        }
        contact.variant.hash(&mut h);
        for v in &contact.theta {
            v.to_bits().hash(&mut h);
        }
        h.finish()
    }

    /// Relative residual `|A x - b| / |b|` of a solution for pattern `i`.
    pub fn relative_residual(&self, sys: &GroundedSystem, sol: &ForwardSolution, i: usize) -> f64 {
        let y = self.q.tr_mul(&nalgebra::DVector::from_column_slice(&sol.electrode_u[i]));
        let (top, bottom) = sys.apply(&sol.u[i], y.as_slice());
        let g = self.q.tr_mul(&nalgebra::DVector::from_vec(self.patterns.pattern(i)));
        let num: f64 = top.iter().map(|v| v * v).sum::<f64>()
            + bottom.iter().zip(g.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        num.sqrt() / g.norm()
    }
}
