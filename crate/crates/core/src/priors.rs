//! Gaussian priors for the log-conductivity and the contact parameters, and the
//! block whitening operator `L` with `LᵀL = blockdiag(Γ_noise⁻¹, Γ_κ⁻¹, Γ_θ⁻¹)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::contact::Variant;
use crate::error::{Error, Result};
use crate::mesh::{ExtendedElectrode, TriMesh};

const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-6;

/// Prior standard deviations and correlation lengths.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub gamma_kappa: f64,
    pub lambda_kappa: f64,
    pub gamma_theta: f64,
    pub lambda_theta: f64,
    pub gamma_h: f64,
    pub gamma_l: f64,
    pub gamma_w: f64,
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec {
            gamma_kappa: 10.0,
            lambda_kappa: 0.03,
            gamma_theta: 500.0,
            lambda_theta: 0.003,
            gamma_h: 1e3,
            gamma_l: 10f64.powf(1.5),
            gamma_w: 1e2,
        }
    }
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("gamma_kappa", self.gamma_kappa),
            ("lambda_kappa", self.lambda_kappa),
            ("gamma_theta", self.gamma_theta),
            ("lambda_theta", self.lambda_theta),
            ("gamma_h", self.gamma_h),
            ("gamma_l", self.gamma_l),
            ("gamma_w", self.gamma_w),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

fn check_positive(what: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{what} must be positive, got {v}")))
    }
}

/// Squared-exponential covariance over the mesh nodes.
pub fn cov_kappa(mesh: &TriMesh, gamma: f64, lambda: f64) -> Result<DMatrix<f64>> {
    check_positive("gamma_kappa", gamma)?;
    check_positive("lambda_kappa", lambda)?;
    let x = mesh.nodes();
    let g2 = gamma * gamma;
    let c = -0.5 / (lambda * lambda);
    let n = x.len();
    let mut cov = DMatrix::zeros(n, n);
    for j in 0..n {
        cov[(j, j)] = g2;
        for i in j + 1..n {
            let d2 = (x[i][0] - x[j][0]).powi(2) + (x[i][1] - x[j][1]).powi(2);
            let v = g2 * (c * d2).exp();
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    Ok(cov)
}

/// PL covariance over the interior electrode nodes (electrode-major), each
/// electrode conditioned on zero contact at its two end nodes. Distances are
/// measured along the boundary (shorter arc).
pub fn cov_pl(mesh: &TriMesh, electrodes: &[ExtendedElectrode], gamma: f64, lambda: f64) -> Result<DMatrix<f64>> {
    check_positive("gamma_theta", gamma)?;
    check_positive("lambda_theta", lambda)?;
    let p = mesh.perimeter();
    let sizes: Vec<usize> = electrodes.iter().map(|e| e.node_ids.len() - 2).collect();
    if let Some(m) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::NoInteriorNode(m + 1));
    }
    let total: usize = sizes.iter().sum();
    let mut out = DMatrix::zeros(total, total);
    let g2 = gamma * gamma;
    let c = -0.5 / (lambda * lambda);
    let mut off = 0;
    for (m, e) in electrodes.iter().enumerate() {
        let s: Vec<f64> = e.node_t.iter().map(|&t| t * e.length).collect();
        let k = |i: usize, j: usize| {
            let d = (s[i] - s[j]).abs();
            let d = d.min(p - d);
            g2 * (c * d * d).exp()
        };
        let nn = s.len();
        let last = nn - 1;
        let bb = DMatrix::from_fn(2, 2, |i, j| k(i * last, j * last));
        let bb_chol = nalgebra::Cholesky::new(bb)
            .ok_or_else(|| Error::Numerical(format!("electrode {}: singular endpoint covariance", m + 1)))?;
        let ni = nn - 2;
        let ib = DMatrix::from_fn(ni, 2, |i, j| k(i + 1, j * last));
        let x = bb_chol.solve(&ib.transpose());
        let cond = DMatrix::from_fn(ni, ni, |i, j| k(i + 1, j + 1)) - &ib * x;
        let cond = (&cond + cond.transpose()) * 0.5;
        out.view_mut((off, off), (ni, ni)).copy_from(&cond);
        off += ni;
    }
    Ok(out)
}

/// Diagonal PH covariance in `(h.., l.., w..)` order.
pub fn cov_ph(m: usize, gamma_h: f64, gamma_l: f64, gamma_w: f64) -> Result<DMatrix<f64>> {
    if m < 2 {
        return Err(Error::InvalidArgument("at least two electrodes are needed".into()));
    }
    for (n, g) in [("gamma_h", gamma_h), ("gamma_l", gamma_l), ("gamma_w", gamma_w)] {
        check_positive(n, g)?;
    }
    let d: Vec<f64> = [gamma_h, gamma_l, gamma_w]
        .iter()
        .flat_map(|g| std::iter::repeat_n(g * g, m))
        .collect();
    Ok(DMatrix::from_diagonal(&DVector::from_vec(d)))
}

/// Prior mean of the contact parameters.
///
/// PL: zero. PH: zero height, centered, relative width `widths[m] / |E_m|`.
/// CEM has no contact prior and gets an empty vector.
pub fn contact_prior_mean(variant: Variant, electrodes: &[ExtendedElectrode], widths: &[f64]) -> Result<Vec<f64>> {
    match variant {
        Variant::Cem => Ok(Vec::new()),
        Variant::Pl => Ok(vec![0.0; crate::contact::param_count(variant, electrodes)]),
        Variant::Ph => {
            if widths.len() != electrodes.len() {
                return Err(Error::dims("electrode widths", electrodes.len(), widths.len()));
            }
            let m = electrodes.len();
            let mut mu = vec![0.0; 3 * m];
            for (k, e) in electrodes.iter().enumerate() {
                mu[m + k] = 0.5;
                mu[2 * m + k] = widths[k] / e.length;
            }
            Ok(mu)
        }
    }
}

/// Cholesky `Γ + εI = C Cᵀ` with the smallest jitter `ε = 10^k · 1e-10 · max diag`
/// (up to `1e-6 · max diag`) that succeeds. Returns `(C, Γ + εI, ε)`.
pub fn jittered_cholesky(cov: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>, f64)> {
    let n = cov.nrows();
    if cov.ncols() != n {
        return Err(Error::dims("covariance columns", n, cov.ncols()));
    }
    let diag = cov.diagonal();
    let max_diag = diag.max();
    let min_diag = diag.min();
    if !(min_diag > 0.0) {
        return Err(Error::CovarianceFactorization {
            jitter: 0.0,
            min_diag,
            max_diag,
        });
    }
    let mut rel = JITTER_START;
    loop {
        let eps = rel * max_diag;
        let mut c = cov.clone();
        for i in 0..n {
            c[(i, i)] += eps;
        }
        if let Some(ch) = nalgebra::Cholesky::new(c.clone()) {
            return Ok((ch.unpack(), c, eps));
        }
        if rel >= JITTER_MAX * (1.0 - 1e-9) {
            return Err(Error::CovarianceFactorization {
                jitter: eps,
                min_diag,
                max_diag,
            });
        }
        rel *= 10.0;
    }
}

/// A covariance block before factorization.
#[derive(Clone, Debug)]
pub enum Covariance {
    Identity(usize),
    /// Variances.
    Diagonal(Vec<f64>),
    Dense(DMatrix<f64>),
}

impl Covariance {
    /// Dense input with zero off-diagonal entries becomes `Diagonal`.
    pub fn from_matrix(m: DMatrix<f64>) -> Self {
        let n = m.nrows();
        let off_zero = (0..n).all(|j| (0..n).all(|i| i == j || m[(i, j)] == 0.0));
        if off_zero {
            Covariance::Diagonal(m.diagonal().as_slice().to_vec())
        } else {
            Covariance::Dense(m)
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Covariance::Identity(n) => *n,
            Covariance::Diagonal(v) => v.len(),
            Covariance::Dense(m) => m.nrows(),
        }
    }
}

/// One factored block: `L = C⁻¹` where `Γ = C Cᵀ`, so `LᵀL = Γ⁻¹`.
#[derive(Clone, Debug)]
pub enum WhitenerBlock {
    Identity(usize),
    Diagonal {
        variance: Vec<f64>,
    },
    Dense {
        /// Lower Cholesky factor `C` of the (jittered) covariance.
        chol: DMatrix<f64>,
        /// The jittered covariance actually factored.
        cov: DMatrix<f64>,
        jitter: f64,
    },
}

impl WhitenerBlock {
    pub fn new(cov: Covariance) -> Result<Self> {
        match cov {
            Covariance::Identity(n) => Ok(WhitenerBlock::Identity(n)),
            Covariance::Diagonal(v) => {
                if let Some(i) = v.iter().position(|&x| !(x > 0.0 && x.is_finite())) {
                    return Err(Error::NotPositiveDefinite { pivot: i, value: v[i] });
                }
                Ok(WhitenerBlock::Diagonal { variance: v })
            }
            Covariance::Dense(m) => {
                let (chol, cov, jitter) = jittered_cholesky(&m)?;
                Ok(WhitenerBlock::Dense { chol, cov, jitter })
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            WhitenerBlock::Identity(n) => *n,
            WhitenerBlock::Diagonal { variance } => variance.len(),
            WhitenerBlock::Dense { chol, .. } => chol.nrows(),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, WhitenerBlock::Identity(_))
    }

    /// `L x`.
    pub fn whiten(&self, x: &[f64]) -> Vec<f64> {
        match self {
            WhitenerBlock::Identity(_) => x.to_vec(),
            WhitenerBlock::Diagonal { variance } => x.iter().zip(variance).map(|(a, v)| a / v.sqrt()).collect(),
            WhitenerBlock::Dense { chol, .. } => {
                let mut b = DVector::from_column_slice(x);
                chol.solve_lower_triangular_mut(&mut b);
                b.as_slice().to_vec()
            }
        }
    }

    /// `L X`.
    pub fn whiten_matrix(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            WhitenerBlock::Identity(_) => x.clone(),
            WhitenerBlock::Diagonal { variance } => {
                let mut y = x.clone();
                for (i, v) in variance.iter().enumerate() {
                    y.row_mut(i).scale_mut(1.0 / v.sqrt());
                }
                y
            }
            WhitenerBlock::Dense { chol, .. } => {
                let mut y = x.clone();
                chol.solve_lower_triangular_mut(&mut y);
                y
            }
        }
    }

    /// `Γ X`.
    pub fn apply_cov(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            WhitenerBlock::Identity(_) => x.clone(),
            WhitenerBlock::Diagonal { variance } => {
                let mut y = x.clone();
                for (i, v) in variance.iter().enumerate() {
                    y.row_mut(i).scale_mut(*v);
                }
                y
            }
            WhitenerBlock::Dense { cov, .. } => cov * x,
        }
    }

    /// `Γ⁻¹` as a dense matrix, `LᵀL`.
    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.dim();
        let l = self.matrix();
        match self {
            WhitenerBlock::Dense { .. } => l.tr_mul(&l),
            _ => DMatrix::from_diagonal(&DVector::from_iterator(n, (0..n).map(|i| l[(i, i)] * l[(i, i)]))),
        }
    }

    /// Dense `L`.
    pub fn matrix(&self) -> DMatrix<f64> {
        self.whiten_matrix(&DMatrix::identity(self.dim(), self.dim()))
    }

    /// `xᵀ Γ⁻¹ x = |L x|²`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.whiten(x).iter().map(|v| v * v).sum()
    }
}

/// Block-diagonal whitener over a stacked vector.
#[derive(Clone, Debug)]
pub struct StackedWhitener {
    blocks: Vec<WhitenerBlock>,
    offsets: Vec<usize>,
}

impl StackedWhitener {
    pub fn new(blocks: Vec<WhitenerBlock>) -> Self {
        let mut offsets = vec![0];
        for b in &blocks {
            offsets.push(offsets.last().unwrap() + b.dim());
        }
        StackedWhitener { blocks, offsets }
    }

    pub fn blocks(&self) -> &[WhitenerBlock] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &WhitenerBlock {
        &self.blocks[i]
    }

    /// Start of block `i`; `offset(len)` is the total dimension.
    pub fn offset(&self, i: usize) -> usize {
        self.offsets[i]
    }

    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn whiten(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::dims("stacked vector", self.dim(), x.len()));
        }
        let mut out = Vec::with_capacity(x.len());
        for (i, b) in self.blocks.iter().enumerate() {
            out.extend(b.whiten(&x[self.offsets[i]..self.offsets[i + 1]]));
        }
        Ok(out)
    }

    pub fn quad_form(&self, x: &[f64]) -> Result<f64> {
        Ok(self.whiten(x)?.iter().map(|v| v * v).sum())
    }
}

/// Stacks the noise block with the optional `kappa` and `theta` blocks.
pub fn build_whitener(noise: Covariance, kappa: Option<Covariance>, theta: Option<Covariance>) -> Result<StackedWhitener> {
    let mut blocks = vec![WhitenerBlock::new(noise)?];
    for c in [kappa, theta].into_iter().flatten() {
        blocks.push(WhitenerBlock::new(c)?);
    }
    Ok(StackedWhitener::new(blocks))
}
