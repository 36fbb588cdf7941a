//! Rank-constrained Tucker approximation: HOSVD initialization plus HOOI
//! sweeps. This is the X-subproblem solver inside the restoration loop.
//!
//! The truncated SVD building block goes through a symmetric
//! eigendecomposition of the smaller Gram matrix (the unfoldings here are
//! always short-fat or tall-thin). Eigenpairs are ordered by descending
//! eigenvalue with stable index tie-breaks, and each kept vector has its
//! largest-magnitude entry made positive, so repeated runs produce
//! identical factors.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::cube::{mode_mul, unfold, Cube, TuckerFactors};
use crate::error::{CoreError, CoreResult};
use crate::math;

/// Relative eigenvalue floor below which a singular triplet is treated as
/// numerically zero and its left vector is filled by orthonormal completion.
const SIGMA_REL_TOL: f64 = 1e-12;

/// Leading `rank` left singular vectors of `mat`, as an orthonormal-column
/// matrix.
pub fn truncated_svd_factors(mat: &DMatrix<f64>, rank: usize) -> CoreResult<DMatrix<f64>> {
    let (rows, cols) = mat.shape();
    if rank == 0 || rank > rows.min(cols) {
        return Err(CoreError::Value(format!(
            "rank {rank} out of range for a {rows}x{cols} matrix"
        )));
    }
    let basis = if rows <= cols {
        // Eigenvectors of A A^T are the left singular vectors directly.
        let gram = mat * mat.transpose();
        let (_, vectors) = sym_eig_desc(gram);
        vectors.columns(0, rank).into_owned()
    } else {
        // Go through A^T A; map right vectors to the left side and complete
        // any numerically null directions.
        let gram = mat.transpose() * mat;
        let (values, vectors) = sym_eig_desc(gram);
        let sigma_max = math::sqrt(values.first().copied().unwrap_or(0.0).max(0.0));
        let floor = sigma_max * SIGMA_REL_TOL;
        let mut u = DMatrix::<f64>::zeros(rows, rank);
        let mut filled = 0;
        for c in 0..rank {
            let sigma = math::sqrt(values[c].max(0.0));
            if sigma > floor && sigma > 0.0 {
                let mut uc = mat * vectors.column(c);
                uc /= sigma;
                let norm = uc.norm();
                if norm > 0.0 {
                    uc /= norm;
                }
                u.set_column(c, &uc);
                filled = c + 1;
            } else {
                break;
            }
        }
        complete_orthonormal(&mut u, filled);
        reorthonormalize(&mut u);
        u
    };
    let mut basis = basis;
    fix_signs(&mut basis);
    Ok(basis)
}

/// Symmetric eigendecomposition with eigenvalues sorted descending
/// (stable in the original index on ties).
fn sym_eig_desc(gram: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = gram.nrows();
    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::<f64>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Fill columns `filled..` with standard basis vectors orthogonalized
/// against everything already present.
fn complete_orthonormal(u: &mut DMatrix<f64>, filled: usize) {
    let (rows, cols) = u.shape();
    let mut next = filled;
    let mut candidate = 0;
    while next < cols && candidate < rows {
        let mut v = DVector::<f64>::zeros(rows);
        v[candidate] = 1.0;
        for c in 0..next {
            let proj = u.column(c).dot(&v);
            v -= proj * u.column(c).into_owned();
        }
        let norm = v.norm();
        if norm > 0.5 {
            v /= norm;
            u.set_column(next, &v);
            next += 1;
        }
        candidate += 1;
    }
    debug_assert_eq!(next, cols, "orthonormal completion exhausted basis");
}

/// One modified Gram-Schmidt pass; near-orthonormal inputs come out
/// orthonormal to machine precision.
fn reorthonormalize(u: &mut DMatrix<f64>) {
    let cols = u.ncols();
    for c in 0..cols {
        let mut v = u.column(c).into_owned();
        for p in 0..c {
            let proj = u.column(p).dot(&v);
            v -= proj * u.column(p).into_owned();
        }
        let norm = v.norm();
        if norm > 0.0 {
            v /= norm;
        }
        u.set_column(c, &v);
    }
}

/// Make the largest-magnitude entry of each column positive (first such
/// entry on ties), for reproducible factor signs.
fn fix_signs(u: &mut DMatrix<f64>) {
    for mut col in u.column_iter_mut() {
        let mut best = 0usize;
        let mut best_abs = 0.0f64;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > best_abs {
                best_abs = v.abs();
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

/// Higher-order orthogonal iteration toward a rank-`(r1, r2, r3)` Tucker
/// approximation of `target`.
///
/// Starts from `warm` factors when given (shapes must match), otherwise from
/// the HOSVD of `target`. Each sweep refreshes the mode-1, mode-2, mode-3
/// factors in order from the projected unfoldings, then the core. Stops
/// after `sweeps` sweeps or as soon as the relative reconstruction error
/// changes by less than `tol` between sweeps.
pub fn hooi(
    target: &Cube,
    ranks: (usize, usize, usize),
    warm: Option<&TuckerFactors>,
    sweeps: usize,
    tol: f64,
) -> CoreResult<TuckerFactors> {
    let (h, w, b) = target.shape();
    let dims = [h, w, b];
    let ranks_arr = [ranks.0, ranks.1, ranks.2];
    for (mode0, (&r, &d)) in ranks_arr.iter().zip(dims.iter()).enumerate() {
        if r == 0 || r > d {
            return Err(CoreError::Value(format!(
                "rank {} out of range 1..={} for mode {}",
                r,
                d,
                mode0 + 1
            )));
        }
    }
    if sweeps == 0 {
        return Err(CoreError::Value("hooi needs at least one sweep".into()));
    }

    let mut factors: [DMatrix<f64>; 3] = match warm {
        Some(tf) => {
            if tf.output_shape() != target.shape() || tf.ranks() != ranks {
                return Err(CoreError::Shape(format!(
                    "warm factors are {:?} rank {:?}, target needs {:?} rank {:?}",
                    tf.output_shape(),
                    tf.ranks(),
                    target.shape(),
                    ranks
                )));
            }
            tf.factors().clone()
        }
        None => {
            let mut init: Vec<DMatrix<f64>> = Vec::with_capacity(3);
            for mode in 1..=3 {
                init.push(truncated_svd_factors(
                    &unfold(target, mode)?,
                    ranks_arr[mode - 1],
                )?);
            }
            [init.remove(0), init.remove(0), init.remove(0)]
        }
    };

    let target_norm = target.frob_norm();
    let mut core = Cube::zeros(ranks.0, ranks.1, ranks.2)?;
    let mut prev_rel = f64::INFINITY;
    for _ in 0..sweeps {
        let mut projected_12 = None;
        for mode in 1..=3usize {
            // Project by the other two factors, then refresh this mode.
            let mut g = target.clone();
            for other in 1..=3usize {
                if other != mode {
                    g = mode_mul(&g, &factors[other - 1].transpose(), other)?;
                }
            }
            factors[mode - 1] = truncated_svd_factors(&unfold(&g, mode)?, ranks_arr[mode - 1])?;
            if mode == 3 {
                projected_12 = Some(g);
            }
        }
        // The mode-3 projection already carries U1^T and U2^T.
        core = mode_mul(
            &projected_12.expect("mode 3 always projects"),
            &factors[2].transpose(),
            3,
        )?;
        let captured = core.frob_norm();
        let err_sq = (target_norm * target_norm - captured * captured).max(0.0);
        let rel = if target_norm > 0.0 {
            math::sqrt(err_sq) / target_norm
        } else {
            0.0
        };
        if (prev_rel - rel).abs() < tol {
            prev_rel = rel;
            break;
        }
        prev_rel = rel;
    }
    let _ = prev_rel;
    TuckerFactors::new(core, factors)
}
