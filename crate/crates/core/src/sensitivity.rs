//! Jacobians of the electrode potentials with respect to the log-conductivity
//! and the contact parameters.
//!
//! For a parameter `p`, the derivative `U'_i` of the electrode potentials under
//! pattern `i` satisfies `I_j · U'_i = -∂_p B((u_i, U_i), (u_j, U_j))` for every
//! pattern `j`, where `B` is the bilinear form of the forward problem. The
//! right-hand side is computed from the stored potentials, so no extra solves
//! are needed, and `U'_i` is recovered from its pattern projections.
//!
//! Rows follow [`ForwardSolution::measurements`]: row `i * M + m` is electrode
//! `m` under pattern `i`.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::contact::ContactParams;
use crate::error::{Error, Result};
use crate::fem::{DomainConductivity, ForwardModel, ForwardSolution};

fn check_fingerprint(model: &ForwardModel, sol: &ForwardSolution, kappa: &DomainConductivity, contact: &ContactParams) -> Result<()> {
    if model.fingerprint(kappa, contact) != sol.fingerprint {
        return Err(Error::FingerprintMismatch);
    }
    Ok(())
}

/// Writes the derivative column for the symmetric pattern matrix `b`.
fn column_from_bilinear(model: &ForwardModel, b: &DMatrix<f64>) -> Vec<f64> {
    let d = model.recovery() * b;
    d.as_slice().to_vec()
}

fn assemble_columns(model: &ForwardModel, blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let rows = model.measurement_count();
    let cols: Vec<Vec<f64>> = blocks.par_iter().map(|b| column_from_bilinear(model, b)).collect();
    let mut j = DMatrix::zeros(rows, cols.len());
    for (k, c) in cols.iter().enumerate() {
        j.column_mut(k).copy_from_slice(c);
    }
    j
}

/// Per-triangle Gram matrices `G(i, j) = ∇u_i · ∇u_j`, stored row-major in `out`.
fn gradient_gram(model: &ForwardModel, sol: &ForwardSolution, t: usize, grads: &mut [[f64; 2]], out: &mut [f64]) {
    let tri = model.mesh().triangles()[t];
    let g = &model.geometry()[t].grad;
    let r = sol.u.len();
    for (i, gi) in grads.iter_mut().enumerate().take(r) {
        let u = &sol.u[i];
        *gi = [0.0, 0.0];
        for a in 0..3 {
            gi[0] += u[tri[a]] * g[a][0];
            gi[1] += u[tri[a]] * g[a][1];
        }
    }
    for i in 0..r {
        for j in 0..=i {
            let v = grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1];
            out[i * r + j] = v;
            out[j * r + i] = v;
        }
    }
}

/// Derivative of the measurements with respect to `kappa` (one column for a
/// scalar, one per node for a nodal field).
pub fn jacobian_kappa(model: &ForwardModel, sol: &ForwardSolution, kappa: &DomainConductivity) -> Result<DMatrix<f64>> {
    check_fingerprint(model, sol, kappa, &sol.contact)?;
    let r = sol.u.len();
    let ntri = model.mesh().triangles().len();
    let mut grads = vec![[0.0; 2]; r];
    let mut gram = vec![0.0; r * r];
    match kappa {
        DomainConductivity::Scalar(_) => {
            let mut b = DMatrix::zeros(r, r);
            for t in 0..ntri {
                let (s, _) = model.triangle_sigma(kappa, t);
                gradient_gram(model, sol, t, &mut grads, &mut gram);
                for (bv, g) in b.iter_mut().zip(&gram) {
                    *bv -= s * g;
                }
            }
            Ok(assemble_columns(model, &[b]))
        }
        DomainConductivity::Nodal(_) => {
            let n = model.mesh().node_count();
            let mut acc = vec![0.0; n * r * r];
            for t in 0..ntri {
                let tri = model.mesh().triangles()[t];
                let (_, dw) = model.triangle_sigma(kappa, t);
                gradient_gram(model, sol, t, &mut grads, &mut gram);
                for a in 0..3 {
                    let blk = &mut acc[tri[a] * r * r..(tri[a] + 1) * r * r];
                    for (bv, g) in blk.iter_mut().zip(&gram) {
                        *bv -= dw[a] * g;
                    }
                }
            }
            let blocks: Vec<DMatrix<f64>> = acc.chunks(r * r).map(|c| DMatrix::from_column_slice(r, r, c)).collect();
            Ok(assemble_columns(model, &blocks))
        }
    }
}

/// Derivative of the measurements with respect to the contact parameters.
pub fn jacobian_contact(model: &ForwardModel, sol: &ForwardSolution, contact: &ContactParams) -> Result<DMatrix<f64>> {
    check_fingerprint(model, sol, &sol.kappa, contact)?;
    let r = sol.u.len();
    let electrodes = model.electrodes();
    let blocks: Vec<DMatrix<f64>> = (0..contact.len())
        .into_par_iter()
        .map(|k| -> Result<DMatrix<f64>> {
            let (m, dens) = contact.dzeta_dtheta(electrodes, k)?;
            let e = &electrodes[m];
            let mut b = DMatrix::zeros(r, r);
            for (q, &len) in e.edge_lengths.iter().enumerate() {
                let mom = dens.edge_moments(e.node_t[q], e.node_t[q + 1], len);
                if mom.is_zero() {
                    continue;
                }
                let (na, nb) = (e.node_ids[q], e.node_ids[q + 1]);
                for i in 0..r {
                    let ui = [sol.u[i][na], sol.u[i][nb]];
                    let big_ui = sol.electrode_u[i][m];
                    for j in 0..=i {
                        let uj = [sol.u[j][na], sol.u[j][nb]];
                        let v = mom.gap_product(ui, big_ui, uj, sol.electrode_u[j][m]);
                        b[(i, j)] -= v;
                        if i != j {
                            b[(j, i)] -= v;
                        }
                    }
                }
            }
            Ok(b)
        })
        .collect::<Result<_>>()?;
    Ok(assemble_columns(model, &blocks))
}

/// `[J_kappa | J_theta]` at the parameters stored in the solution.
pub fn full_jacobian(model: &ForwardModel, sol: &ForwardSolution) -> Result<DMatrix<f64>> {
    let jk = jacobian_kappa(model, sol, &sol.kappa)?;
    let jt = jacobian_contact(model, sol, &sol.contact)?;
    let mut j = DMatrix::zeros(jk.nrows(), jk.ncols() + jt.ncols());
    j.columns_mut(0, jk.ncols()).copy_from(&jk);
    j.columns_mut(jk.ncols(), jt.ncols()).copy_from(&jt);
    Ok(j)
}

/// Central-difference derivative of `f` along coordinate `k` with step `h`.
pub fn fd_column<F>(f: &mut F, x0: &[f64], k: usize, h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let mut x = x0.to_vec();
    x[k] = x0[k] + h;
    let fp = f(&x)?;
    x[k] = x0[k] - h;
    let fm = f(&x)?;
    Ok(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect())
}

/// Central-difference Jacobian with step `rel_step * max(1, |x_k|)`.
pub fn fd_jacobian<F>(mut f: F, x0: &[f64], rel_step: f64) -> Result<DMatrix<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let mut cols = Vec::with_capacity(x0.len());
    for k in 0..x0.len() {
        let h = rel_step * x0[k].abs().max(1.0);
        cols.push(fd_column(&mut f, x0, k, h)?);
    }
    let rows = cols.first().map_or(0, Vec::len);
    let mut j = DMatrix::zeros(rows, cols.len());
    for (k, c) in cols.iter().enumerate() {
        j.column_mut(k).copy_from_slice(c);
    }
    Ok(j)
}

/// `max_k |a_k - b_k| / |b_k|` over columns (absolute error where `b_k = 0`).
pub fn max_relative_column_error(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .zip(b.column_iter())
        .map(|(ca, cb)| {
            let diff = (ca - cb).norm();
            let scale = cb.norm();
            if scale > 0.0 {
                diff / scale
            } else {
                diff
            }
        })
        .fold(0.0, f64::max)
}
