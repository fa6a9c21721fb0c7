//! Gauss–Newton minimization of the Tikhonov functional
//!
//! ```text
//! F(τ) = |U(τ) - V|²_{Γ_noise⁻¹} + Σ_b |τ_b - μ_b|²_{Γ_b⁻¹}
//! ```
//!
//! where the sum runs over the penalized parameter blocks (`kappa` and/or
//! `theta`); the remaining parameters are unregularized.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::contact::{initial_contact, ContactParams, Variant};
use crate::error::{Error, Result};
use crate::fem::{DomainConductivity, ForwardModel, ForwardSolution};
use crate::priors::{build_whitener, contact_prior_mean, cov_kappa, cov_ph, cov_pl, Covariance, PriorSpec, StackedWhitener, WhitenerBlock};
use crate::sensitivity::full_jacobian;

/// Condition number estimate above which the normal equations are abandoned.
const COND_LIMIT: f64 = 1e12;

/// A differentiable parameter-to-data map.
pub trait ForwardMap {
    /// Whatever the Jacobian needs from a forward evaluation.
    type State;

    fn param_count(&self) -> usize;

    fn evaluate(&self, tau: &[f64]) -> Result<(Vec<f64>, Self::State)>;

    fn jacobian(&self, tau: &[f64], state: &Self::State) -> Result<DMatrix<f64>>;

    /// Maps a candidate into the admissible set.
    fn project(&self, _tau: &mut [f64]) {}
}

/// Which prior a penalized block belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorTerm {
    Kappa,
    Theta,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Penalty {
    pub range: Range<usize>,
    pub term: PriorTerm,
}

/// How the Gauss–Newton system is solved.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    /// Normal equations when the penalized parameters do not outnumber the
    /// data, data-space form otherwise.
    #[default]
    Auto,
    Normal,
    DataSpace,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GnOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub c1: f64,
    pub max_halvings: usize,
    /// Also enforce the curvature condition with constant `c2`.
    pub wolfe: bool,
    pub c2: f64,
    pub route: Route,
}

impl Default for GnOptions {
    fn default() -> Self {
        GnOptions {
            max_iter: 50,
            tol: 1e-8,
            c1: 1e-4,
            max_halvings: 30,
            wolfe: false,
            c2: 0.9,
            route: Route::Auto,
        }
    }
}

/// The functional, split into its terms (squared whitened norms).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveTerms {
    pub data: f64,
    pub kappa: f64,
    pub theta: f64,
}

impl ObjectiveTerms {
    pub fn total(&self) -> f64 {
        self.data + self.kappa + self.theta
    }
}

pub struct TikhonovProblem<F: ForwardMap> {
    pub map: F,
    pub data: Vec<f64>,
    /// Prior mean for every parameter (ignored outside the penalized blocks).
    pub mean: Vec<f64>,
    /// Noise block first, then one block per penalty.
    pub whitener: StackedWhitener,
    pub penalties: Vec<Penalty>,
    pub options: GnOptions,
}

/// Objective value at a point together with the forward state.
pub struct Evaluation<S> {
    pub tau: Vec<f64>,
    pub prediction: Vec<f64>,
    /// `U - V`
    pub residual: Vec<f64>,
    pub terms: ObjectiveTerms,
    pub objective: f64,
    pub state: S,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIterations,
    ObjectiveStagnation,
    SmallStep,
    Stationary,
    ZeroObjective,
    LineSearchFailed,
}

impl StopReason {
    pub fn is_converged(self) -> bool {
        !matches!(self, StopReason::MaxIterations | StopReason::LineSearchFailed)
    }
}

/// One accepted iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    pub data: f64,
    pub kappa: f64,
    pub theta: f64,
    pub step_length: f64,
    pub direction_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GnState {
    pub tau: Vec<f64>,
    pub objective: f64,
    pub terms: ObjectiveTerms,
    pub step_length: f64,
    pub direction_norm: f64,
    pub iteration: usize,
    pub converged: bool,
    pub reason: StopReason,
    /// Entry 0 is the starting point.
    pub history: Vec<IterationRecord>,
}

pub struct GnOutcome<S> {
    pub state: GnState,
    pub last: Evaluation<S>,
}

impl<F: ForwardMap> TikhonovProblem<F> {
    pub fn new(map: F, data: Vec<f64>, mean: Vec<f64>, whitener: StackedWhitener, penalties: Vec<Penalty>, options: GnOptions) -> Result<Self> {
        let p = map.param_count();
        if mean.len() != p {
            return Err(Error::dims("prior mean", p, mean.len()));
        }
        if whitener.blocks().len() != penalties.len() + 1 {
            return Err(Error::dims("whitener blocks", penalties.len() + 1, whitener.blocks().len()));
        }
        if whitener.block(0).dim() != data.len() {
            return Err(Error::dims("noise covariance", data.len(), whitener.block(0).dim()));
        }
        for (i, pen) in penalties.iter().enumerate() {
            if pen.range.end > p {
                return Err(Error::IndexOutOfRange {
                    index: pen.range.end,
                    count: p,
                });
            }
            if whitener.block(i + 1).dim() != pen.range.len() {
                return Err(Error::dims("prior block", pen.range.len(), whitener.block(i + 1).dim()));
            }
        }
        Ok(TikhonovProblem {
            map,
            data,
            mean,
            whitener,
            penalties,
            options,
        })
    }

    fn noise(&self) -> &WhitenerBlock {
        self.whitener.block(0)
    }

    fn prior(&self, i: usize) -> &WhitenerBlock {
        self.whitener.block(i + 1)
    }

    /// Indices not covered by any penalty.
    pub fn free_indices(&self) -> Vec<usize> {
        let mut covered = vec![false; self.map.param_count()];
        for pen in &self.penalties {
            covered[pen.range.clone()].iter_mut().for_each(|c| *c = true);
        }
        (0..covered.len()).filter(|&i| !covered[i]).collect()
    }

    /// Evaluates `F` at `tau` as given (no projection).
    pub fn objective(&self, tau: &[f64]) -> Result<Evaluation<F::State>> {
        if tau.len() != self.map.param_count() {
            return Err(Error::dims("parameter vector", self.map.param_count(), tau.len()));
        }
        let (prediction, state) = self.map.evaluate(tau)?;
        if prediction.len() != self.data.len() {
            return Err(Error::dims("predicted data", self.data.len(), prediction.len()));
        }
        let residual: Vec<f64> = prediction.iter().zip(&self.data).map(|(u, v)| u - v).collect();
        let mut terms = ObjectiveTerms {
            data: self.noise().quad_form(&residual),
            ..Default::default()
        };
        for (i, pen) in self.penalties.iter().enumerate() {
            let s: Vec<f64> = pen.range.clone().map(|k| tau[k] - self.mean[k]).collect();
            let q = self.prior(i).quad_form(&s);
            match pen.term {
                PriorTerm::Kappa => terms.kappa += q,
                PriorTerm::Theta => terms.theta += q,
            }
        }
        let objective = terms.total();
        if !objective.is_finite() {
            return Err(Error::Numerical("objective is not finite".into()));
        }
        Ok(Evaluation {
            tau: tau.to_vec(),
            prediction,
            residual,
            terms,
            objective,
            state,
        })
    }

    /// Directional derivative `F'(τ) · d`.
    pub fn slope(&self, eval: &Evaluation<F::State>, jac: &DMatrix<f64>, d: &DVector<f64>) -> f64 {
        let jd = jac * d;
        let a: f64 = self
            .noise()
            .whiten(jd.as_slice())
            .iter()
            .zip(self.noise().whiten(&eval.residual))
            .map(|(x, y)| x * y)
            .sum();
        let mut b = 0.0;
        for (i, pen) in self.penalties.iter().enumerate() {
            let s: Vec<f64> = pen.range.clone().map(|k| eval.tau[k] - self.mean[k]).collect();
            let db: Vec<f64> = pen.range.clone().map(|k| d[k]).collect();
            let ls = self.prior(i).whiten(&s);
            let ld = self.prior(i).whiten(&db);
            b += ls.iter().zip(&ld).map(|(x, y)| x * y).sum::<f64>();
        }
        2.0 * (a + b)
    }

    /// Gauss–Newton direction: `τ + d` minimizes the linearized functional.
    pub fn gn_direction(&self, eval: &Evaluation<F::State>, jac: &DMatrix<f64>) -> Result<DVector<f64>> {
        let p = self.map.param_count();
        if jac.nrows() != self.data.len() || jac.ncols() != p {
            return Err(Error::dims("Jacobian columns", p, jac.ncols()));
        }
        let penalized: usize = self.penalties.iter().map(|pen| pen.range.len()).sum();
        let route = match self.options.route {
            Route::Auto if penalized > self.data.len() => Route::DataSpace,
            Route::Auto => Route::Normal,
            r => r,
        };
        let d = match route {
            Route::DataSpace => self.direction_data_space(eval, jac)?,
            _ => self.direction_normal(eval, jac)?,
        };
        if d.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite Gauss-Newton direction".into()));
        }
        Ok(d)
    }

    fn direction_normal(&self, eval: &Evaluation<F::State>, jac: &DMatrix<f64>) -> Result<DVector<f64>> {
        let p = jac.ncols();
        let jw = self.noise().whiten_matrix(jac);
        let rw = DVector::from_vec(self.noise().whiten(&eval.residual));
        let mut h = jw.tr_mul(&jw);
        let mut g = jw.tr_mul(&rw);
        let mut priors = Vec::new();
        for (i, pen) in self.penalties.iter().enumerate() {
            let o = pen.range.start;
            let nb = pen.range.len();
            let s = DVector::from_iterator(nb, pen.range.clone().map(|k| eval.tau[k] - self.mean[k]));
            let l = self.prior(i).matrix();
            let ls = &l * &s;
            let inv = l.tr_mul(&l);
            let mut hb = h.view_mut((o, o), (nb, nb));
            hb += &inv;
            let mut gb = g.rows_mut(o, nb);
            gb += l.tr_mul(&ls);
            priors.push((o, l, ls));
        }
        if let Some(ch) = nalgebra::Cholesky::new(h.clone()) {
            let diag = ch.l_dirty().diagonal();
            let cond = (diag.max() / diag.min()).powi(2);
            if cond.is_finite() && cond <= COND_LIMIT {
                return Ok(-ch.solve(&g));
            }
        }
        // orthogonal solve of the stacked whitened system
        let rows = jw.nrows() + priors.iter().map(|(_, l, _)| l.nrows()).sum::<usize>();
        let mut a = DMatrix::zeros(rows, p);
        let mut b = DVector::zeros(rows);
        a.view_mut((0, 0), (jw.nrows(), p)).copy_from(&jw);
        b.rows_mut(0, jw.nrows()).copy_from(&(-&rw));
        let mut r0 = jw.nrows();
        for (o, l, ls) in &priors {
            let nb = l.nrows();
            a.view_mut((r0, *o), (nb, nb)).copy_from(l);
            b.rows_mut(r0, nb).copy_from(&(-ls));
            r0 += nb;
        }
        a.svd(true, true)
            .solve(&b, 1e-14)
            .map_err(|e| Error::Numerical(format!("least-squares solve failed: {e}")))
    }

    fn direction_data_space(&self, eval: &Evaluation<F::State>, jac: &DMatrix<f64>) -> Result<DVector<f64>> {
        let n = jac.nrows();
        let p = jac.ncols();
        let mut s_mat = self.noise().apply_cov(&DMatrix::identity(n, n));
        let mut g0 = DVector::from_column_slice(&eval.residual);
        let mut gj = Vec::with_capacity(self.penalties.len());
        for (i, pen) in self.penalties.iter().enumerate() {
            let jb = jac.columns(pen.range.start, pen.range.len());
            let s = DVector::from_iterator(pen.range.len(), pen.range.clone().map(|k| eval.tau[k] - self.mean[k]));
            g0 -= jb * s;
            let gjb = self.prior(i).apply_cov(&jb.transpose());
            s_mat += jb * &gjb;
            gj.push(gjb);
        }
        let s_mat = (&s_mat + s_mat.transpose()) * 0.5;
        let s_ch = nalgebra::Cholesky::new(s_mat)
            .ok_or_else(|| Error::Numerical("data-space matrix is not positive definite".into()))?;
        let free = self.free_indices();
        let mut d = DVector::zeros(p);
        let mut rhs = g0.clone();
        if !free.is_empty() {
            let jf = DMatrix::from_fn(n, free.len(), |r, c| jac[(r, free[c])]);
            let sjf = s_ch.solve(&jf);
            let m = jf.tr_mul(&sjf);
            let b = -sjf.tr_mul(&g0);
            let df = match nalgebra::Cholesky::new(m.clone()) {
                Some(ch) => ch.solve(&b),
                None => m
                    .svd(true, true)
                    .solve(&b, 1e-14)
                    .map_err(|e| Error::Numerical(format!("least-squares solve failed: {e}")))?,
            };
            rhs += &jf * &df;
            for (c, &k) in free.iter().enumerate() {
                d[k] = df[c];
            }
        }
        let z = s_ch.solve(&rhs);
        for (pen, gjb) in self.penalties.iter().zip(&gj) {
            let e = -(gjb * &z);
            for (c, k) in pen.range.clone().enumerate() {
                d[k] = e[c] - (eval.tau[k] - self.mean[k]);
            }
        }
        Ok(d)
    }

    fn candidate(&self, tau: &[f64], d: &DVector<f64>, t: f64) -> Vec<f64> {
        let mut c: Vec<f64> = tau.iter().zip(d.iter()).map(|(x, dx)| x + t * dx).collect();
        self.map.project(&mut c);
        c
    }

    /// Backtracking from `t = 1` by halving until sufficient decrease. With
    /// `wolfe` set, a step that is too short for the curvature condition is
    /// refined by bisection. Returns `None` if no step is accepted.
    #[allow(clippy::type_complexity)]
    pub fn line_search(
        &self,
        eval: &Evaluation<F::State>,
        d: &DVector<f64>,
        slope: f64,
    ) -> Result<Option<(f64, Evaluation<F::State>, Option<DMatrix<f64>>)>> {
        let o = &self.options;
        let armijo = |t: f64| -> Result<Option<Evaluation<F::State>>> {
            let cand = self.candidate(&eval.tau, d, t);
            match self.objective(&cand) {
                Ok(e) if e.objective <= eval.objective + o.c1 * t * slope => Ok(Some(e)),
                Ok(_) => Ok(None),
                // a candidate outside the domain of the forward map counts as a failed trial
                Err(err) if err.is_numerical() => Ok(None),
                Err(err) => Err(err),
            }
        };
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=o.max_halvings {
            if let Some(e) = armijo(t)? {
                accepted = Some(e);
                break;
            }
            t *= 0.5;
        }
        let Some(mut e) = accepted else { return Ok(None) };
        if !o.wolfe {
            return Ok(Some((t, e, None)));
        }
        let curvature = |e: &Evaluation<F::State>| -> Result<(bool, DMatrix<f64>)> {
            let j = self.map.jacobian(&e.tau, &e.state)?;
            Ok((self.slope(e, &j, d) >= o.c2 * slope, j))
        };
        let (ok, mut j) = curvature(&e)?;
        if ok || t >= 1.0 {
            return Ok(Some((t, e, Some(j))));
        }
        let (mut lo, mut hi) = (t, (2.0 * t).min(1.0));
        for _ in 0..20 {
            let mid = 0.5 * (lo + hi);
            match armijo(mid)? {
                None => hi = mid,
                Some(em) => {
                    let (ok, jm) = curvature(&em)?;
                    lo = mid;
                    e = em;
                    j = jm;
                    if ok {
                        break;
                    }
                }
            }
        }
        Ok(Some((lo, e, Some(j))))
    }

    pub fn run(&self, tau0: &[f64]) -> Result<GnOutcome<F::State>> {
        self.run_with(tau0, |_| {})
    }

    /// Gauss–Newton loop; `observer` sees every record including the start.
    pub fn run_with(&self, tau0: &[f64], mut observer: impl FnMut(&IterationRecord)) -> Result<GnOutcome<F::State>> {
        let o = &self.options;
        let mut tau = tau0.to_vec();
        self.map.project(&mut tau);
        let mut eval = self.objective(&tau)?;
        let record = |it: usize, e: &Evaluation<F::State>, t: f64, dn: f64| IterationRecord {
            iteration: it,
            objective: e.objective,
            data: e.terms.data,
            kappa: e.terms.kappa,
            theta: e.terms.theta,
            step_length: t,
            direction_norm: dn,
        };
        let first = record(0, &eval, 0.0, 0.0);
        observer(&first);
        let mut history = vec![first];
        let mut jac_cache: Option<DMatrix<f64>> = None;
        let mut stagnant = 0;
        let (mut last_t, mut last_dn) = (0.0, 0.0);
        let mut reason = StopReason::MaxIterations;
        for it in 1..=o.max_iter {
            if eval.objective == 0.0 {
                reason = StopReason::ZeroObjective;
                break;
            }
            let jac = match jac_cache.take() {
                Some(j) => j,
                None => self.map.jacobian(&eval.tau, &eval.state)?,
            };
            let d = self.gn_direction(&eval, &jac)?;
            let dn = d.norm();
            let slope = self.slope(&eval, &jac, &d);
            if dn == 0.0 || !(slope < 0.0) {
                reason = StopReason::Stationary;
                break;
            }
            let Some((t, next, j_next)) = self.line_search(&eval, &d, slope)? else {
                reason = StopReason::LineSearchFailed;
                break;
            };
            let step: f64 = next.tau.iter().zip(&eval.tau).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let rel = (eval.objective - next.objective) / eval.objective;
            eval = next;
            jac_cache = j_next;
            last_t = t;
            last_dn = dn;
            let rec = record(it, &eval, t, dn);
            observer(&rec);
            history.push(rec);
            stagnant = if rel < o.tol { stagnant + 1 } else { 0 };
            if stagnant >= 3 {
                reason = StopReason::ObjectiveStagnation;
                break;
            }
            if step < o.tol {
                reason = StopReason::SmallStep;
                break;
            }
            if eval.objective == 0.0 {
                reason = StopReason::ZeroObjective;
                break;
            }
        }
        let state = GnState {
            tau: eval.tau.clone(),
            objective: eval.objective,
            terms: eval.terms,
            step_length: last_t,
            direction_norm: last_dn,
            iteration: history.len() - 1,
            converged: reason.is_converged(),
            reason,
            history,
        };
        Ok(GnOutcome { state, last: eval })
    }
}

/// How the log-conductivity is parametrized in a reconstruction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KappaMode {
    Scalar,
    Nodal,
}

/// `τ = (κ, θ)` evaluated through the finite element model.
pub struct EitMap<'a> {
    pub model: &'a ForwardModel,
    pub kappa_mode: KappaMode,
    pub variant: Variant,
}

impl EitMap<'_> {
    pub fn kappa_len(&self) -> usize {
        match self.kappa_mode {
            KappaMode::Scalar => 1,
            KappaMode::Nodal => self.model.mesh().node_count(),
        }
    }

    pub fn split(&self, tau: &[f64]) -> (DomainConductivity, ContactParams) {
        let nk = self.kappa_len();
        let kappa = match self.kappa_mode {
            KappaMode::Scalar => DomainConductivity::Scalar(tau[0]),
            KappaMode::Nodal => DomainConductivity::Nodal(tau[..nk].to_vec()),
        };
        let contact = ContactParams {
            variant: self.variant,
            theta: tau[nk..].to_vec(),
        };
        (kappa, contact)
    }
}

impl ForwardMap for EitMap<'_> {
    type State = ForwardSolution;

    fn param_count(&self) -> usize {
        self.kappa_len() + crate::contact::param_count(self.variant, self.model.electrodes())
    }

    fn evaluate(&self, tau: &[f64]) -> Result<(Vec<f64>, ForwardSolution)> {
        let (kappa, contact) = self.split(tau);
        let sol = self.model.solve(&kappa, &contact)?;
        Ok((sol.measurements(), sol))
    }

    fn jacobian(&self, _tau: &[f64], state: &ForwardSolution) -> Result<DMatrix<f64>> {
        full_jacobian(self.model, state)
    }

    fn project(&self, tau: &mut [f64]) {
        if self.variant == Variant::Ph {
            let nk = self.kappa_len();
            let c = ContactParams {
                variant: Variant::Ph,
                theta: tau[nk..].to_vec(),
            }
            .clamp_ph();
            tau[nk..].copy_from_slice(&c.theta);
        }
    }
}

/// Everything besides the model and data that defines a reconstruction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionSetup {
    pub variant: Variant,
    pub kappa_mode: KappaMode,
    pub prior: PriorSpec,
    /// Prior mean of `kappa` (same value at every node).
    pub kappa_mean: f64,
    /// True electrode widths, used for the PH prior mean and start.
    pub electrode_widths: Vec<f64>,
    /// Initial net contact conductance per electrode (S).
    pub initial_net_conductance: f64,
    pub options: GnOptions,
}

impl ReconstructionSetup {
    pub fn new(variant: Variant, kappa_mode: KappaMode, electrode_widths: Vec<f64>) -> Self {
        ReconstructionSetup {
            variant,
            kappa_mode,
            prior: PriorSpec::default(),
            kappa_mean: 0.02f64.ln(),
            electrode_widths,
            initial_net_conductance: 1e-3,
            options: GnOptions::default(),
        }
    }
}

/// Builds the Tikhonov problem (noise covariance identity). `kappa` is
/// penalized in nodal mode only, `theta` for PL and PH only.
pub fn eit_problem<'a>(model: &'a ForwardModel, data: Vec<f64>, setup: &ReconstructionSetup) -> Result<TikhonovProblem<EitMap<'a>>> {
    setup.prior.validate()?;
    let map = EitMap {
        model,
        kappa_mode: setup.kappa_mode,
        variant: setup.variant,
    };
    let nk = map.kappa_len();
    let p = map.param_count();
    let els = model.electrodes();
    let mut mean = vec![setup.kappa_mean; nk];
    let theta_mean = contact_prior_mean(setup.variant, els, &setup.electrode_widths)?;
    if theta_mean.is_empty() {
        mean.extend(std::iter::repeat_n(0.0, p - nk));
    } else {
        mean.extend(theta_mean);
    }
    let pr = &setup.prior;
    let mut penalties = Vec::new();
    let kappa_cov = match setup.kappa_mode {
        KappaMode::Nodal => {
            penalties.push(Penalty {
                range: 0..nk,
                term: PriorTerm::Kappa,
            });
            Some(Covariance::Dense(cov_kappa(model.mesh(), pr.gamma_kappa, pr.lambda_kappa)?))
        }
        KappaMode::Scalar => None,
    };
    let theta_cov = match setup.variant {
        Variant::Cem => None,
        Variant::Pl => Some(Covariance::Dense(cov_pl(model.mesh(), els, pr.gamma_theta, pr.lambda_theta)?)),
        Variant::Ph => Some(Covariance::from_matrix(cov_ph(els.len(), pr.gamma_h, pr.gamma_l, pr.gamma_w)?)),
    };
    if theta_cov.is_some() {
        penalties.push(Penalty {
            range: nk..p,
            term: PriorTerm::Theta,
        });
    }
    let whitener = build_whitener(Covariance::Identity(data.len()), kappa_cov, theta_cov)?;
    TikhonovProblem::new(map, data, mean, whitener, penalties, setup.options.clone())
}

/// Starting point: homogeneous `kappa0` and the default contact start.
pub fn initial_tau(model: &ForwardModel, setup: &ReconstructionSetup, kappa0: f64) -> Vec<f64> {
    let nk = match setup.kappa_mode {
        KappaMode::Scalar => 1,
        KappaMode::Nodal => model.mesh().node_count(),
    };
    let widths = (setup.variant == Variant::Ph).then_some(setup.electrode_widths.as_slice());
    let contact = initial_contact(setup.variant, model.electrodes(), setup.initial_net_conductance, widths);
    let mut tau = vec![kappa0; nk];
    tau.extend(contact.theta);
    tau
}

/// Least-squares homogeneous conductivity for the start contacts, using that
/// potentials scale like `1/sigma` when all conductances scale together.
pub fn homogeneous_guess(model: &ForwardModel, setup: &ReconstructionSetup, data: &[f64]) -> Result<f64> {
    let widths = (setup.variant == Variant::Ph).then_some(setup.electrode_widths.as_slice());
    let contact = initial_contact(setup.variant, model.electrodes(), setup.initial_net_conductance, widths);
    let u1 = model.solve(&DomainConductivity::Scalar(0.0), &contact)?.measurements();
    let uu: f64 = u1.iter().map(|u| u * u).sum();
    let uv: f64 = u1.iter().zip(data).map(|(u, v)| u * v).sum();
    Ok(if uv > 0.0 { (uu / uv).ln() } else { 0.0 })
}

/// Result of the single-parameter conductivity fit.
#[derive(Clone, Debug, Serialize)]
pub struct ScalarFit {
    pub kappa: f64,
    pub sigma: f64,
    pub contact: ContactParams,
    /// `|U - V|₂`
    pub residual: f64,
    pub state: GnState,
}

/// Fits one log-conductivity value (unregularized) and the contacts.
pub fn scalar_fit(model: &ForwardModel, data: &[f64], setup: &ReconstructionSetup) -> Result<ScalarFit> {
    let setup = ReconstructionSetup {
        kappa_mode: KappaMode::Scalar,
        ..setup.clone()
    };
    let problem = eit_problem(model, data.to_vec(), &setup)?;
    let k0 = homogeneous_guess(model, &setup, data)?;
    let out = problem.run(&initial_tau(model, &setup, k0))?;
    let (kappa, contact) = problem.map.split(&out.state.tau);
    let DomainConductivity::Scalar(k) = kappa else { unreachable!() };
    let residual = out.last.residual.iter().map(|r| r * r).sum::<f64>().sqrt();
    Ok(ScalarFit {
        kappa: k,
        sigma: k.exp(),
        contact,
        residual,
        state: out.state,
    })
}
