//! Augmented-Lagrangian solver for mixed-noise cube restoration.
//!
//! The observation `Y` is split as `Y = X + S + N` with `X` a low-multilinear-
//! rank, TV-smooth cube, `S` sparse noise, and `N` dense Gaussian noise.
//! A splitting variable `Z` (with `X = Z`) and a gradient variable
//! `F = D_w(Z)` decouple the subproblems; each outer iteration performs
//! closed-form updates X -> Z -> F -> S -> (N) -> multipliers and grows the
//! penalty by `rho` up to `mu_max`.
//!
//! Two model variants are supported: the general model keeps the Frobenius
//! noise term (weight `beta`) and the `N` estimate; the approximate variant
//! drops both and leaves TV to absorb moderate Gaussian noise.

use alloc::format;
use alloc::vec::Vec;

use crate::cube::{inner, tucker_reconstruct, Cube, TuckerFactors};
use crate::diff::{dw_adjoint, dw_forward, tz_spectrum, StackedGrad, TVWeights};
use crate::error::{CoreError, CoreResult};
use crate::fft::{fftn, ifftn};
use crate::math;
use crate::tucker::hooi;

/// Early-exit tolerance for HOOI sweeps inside one outer iteration.
const HOOI_TOL: f64 = 1e-8;

/// Relative feasibility bound `|Y - X - S - N|_F / |Y|_F` that must hold
/// alongside the relative-change criterion before the loop stops. The
/// rel-change statistic alone can dip below `eps` during the penalty ramp
/// while the iterate is still far from satisfying the constraints.
const FEASIBILITY_RTOL: f64 = 1e-3;

/// Which objective the solver minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Keeps the Frobenius noise term and the dense-noise estimate `N`.
    General,
    /// Drops the Frobenius term; `N` stays zero.
    Approximate,
}

/// All model and algorithm parameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolverConfig {
    pub model: ModelKind,
    /// TV regularization weight (the sparsity threshold on `F`).
    pub tau: f64,
    /// Sparsity tuning constant; the actual `l1` weight is
    /// `lambda = 100 * lambda_c / sqrt(height * width)`.
    pub lambda_c: f64,
    /// Frobenius noise weight; only used by the general model. A natural
    /// choice is the reciprocal of the Gaussian noise variance.
    pub beta: f64,
    pub weights: TVWeights,
    /// Multilinear rank `(r1, r2, r3)` of the low-rank component.
    pub ranks: (usize, usize, usize),
    /// Initial penalty parameter.
    pub mu0: f64,
    /// Penalty growth factor per iteration.
    pub rho: f64,
    /// Penalty ceiling.
    pub mu_max: f64,
    /// Stop once `|X_prev - X|_F^2 / |Y|_F^2` drops to this level.
    pub eps: f64,
    pub max_iter: usize,
    /// HOOI sweeps per outer iteration (warm-started across iterations).
    pub hooi_sweeps: usize,
}

impl SolverConfig {
    /// Defaults with an explicit rank triple.
    pub fn new(ranks: (usize, usize, usize)) -> Self {
        Self {
            model: ModelKind::Approximate,
            tau: 1.0,
            lambda_c: 10.0,
            beta: 100.0,
            weights: TVWeights {
                w1: 1.0,
                w2: 1.0,
                w3: 1.0,
            },
            ranks,
            mu0: 1e-2,
            rho: 1.5,
            mu_max: 1e6,
            eps: 1e-6,
            max_iter: 100,
            hooi_sweeps: 1,
        }
    }

    /// Defaults with ranks chosen from the cube shape via [`auto_ranks`].
    pub fn for_shape(shape: (usize, usize, usize)) -> Self {
        Self::new(auto_ranks(shape))
    }

    /// Sparsity weight for a given spatial size.
    pub fn lambda(&self, height: usize, width: usize) -> f64 {
        100.0 * self.lambda_c / math::sqrt((height * width) as f64)
    }

    pub fn validate(&self, shape: (usize, usize, usize)) -> CoreResult<()> {
        let (h, w, b) = shape;
        if !(self.rho > 1.0) {
            return Err(CoreError::Value(format!("rho must exceed 1, got {}", self.rho)));
        }
        if !(self.mu0 > 0.0 && self.mu0 <= self.mu_max) {
            return Err(CoreError::Value(format!(
                "need 0 < mu0 <= mu_max, got mu0 = {}, mu_max = {}",
                self.mu0, self.mu_max
            )));
        }
        if !(self.eps > 0.0) {
            return Err(CoreError::Value(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.tau >= 0.0) {
            return Err(CoreError::Value(format!("tau must be nonnegative, got {}", self.tau)));
        }
        if !(self.lambda_c > 0.0) {
            return Err(CoreError::Value(format!(
                "lambda_c must be positive, got {}",
                self.lambda_c
            )));
        }
        if !(self.beta >= 0.0) {
            return Err(CoreError::Value(format!("beta must be nonnegative, got {}", self.beta)));
        }
        if self.max_iter == 0 || self.hooi_sweeps == 0 {
            return Err(CoreError::Value(
                "max_iter and hooi_sweeps must be at least 1".into(),
            ));
        }
        TVWeights::new(self.weights.w1, self.weights.w2, self.weights.w3)?;
        let (r1, r2, r3) = self.ranks;
        for (r, d, name) in [(r1, h, "r1"), (r2, w, "r2"), (r3, b, "r3")] {
            if r == 0 || r > d {
                return Err(CoreError::Value(format!(
                    "{name} = {r} out of range 1..={d} for shape {h}x{w}x{b}"
                )));
            }
        }
        Ok(())
    }
}

/// Default rank heuristic: 80% of each spatial extent, spectral rank 10
/// (clamped to the band count).
pub fn auto_ranks(shape: (usize, usize, usize)) -> (usize, usize, usize) {
    let (h, w, b) = shape;
    let spatial = |n: usize| (math::round(0.8 * n as f64) as usize).clamp(1, n);
    (spatial(h), spatial(w), 10.min(b))
}

/// Scalar shrinkage: `x - delta` above `delta`, `x + delta` below `-delta`,
/// zero in between. `delta` must be nonnegative.
#[inline]
pub fn soft_threshold(x: f64, delta: f64) -> f64 {
    debug_assert!(delta >= 0.0, "soft threshold needs delta >= 0");
    if x > delta {
        x - delta
    } else if x < -delta {
        x + delta
    } else {
        0.0
    }
}

/// Elementwise shrinkage over a cube.
pub fn soft_threshold_cube(c: &Cube, delta: f64) -> CoreResult<Cube> {
    if !(delta >= 0.0) {
        return Err(CoreError::Value(format!(
            "soft threshold needs delta >= 0, got {delta}"
        )));
    }
    Ok(c.map(|v| soft_threshold(v, delta)))
}

/// Channelwise shrinkage over a stacked gradient.
pub fn soft_threshold_grad(g: &StackedGrad, delta: f64) -> CoreResult<StackedGrad> {
    if !(delta >= 0.0) {
        return Err(CoreError::Value(format!(
            "soft threshold needs delta >= 0, got {delta}"
        )));
    }
    Ok(g.map(|v| soft_threshold(v, delta)))
}

/// All iterates of the augmented-Lagrangian loop.
#[derive(Debug, Clone)]
pub struct SolverState {
    /// Low-rank estimate.
    pub x: Cube,
    /// TV splitting variable (`X = Z` at convergence).
    pub z: Cube,
    /// Sparse noise estimate.
    pub s: Cube,
    /// Dense noise estimate (stays zero under the approximate model).
    pub n: Cube,
    /// Gradient splitting variable (`F = D_w(Z)` at convergence).
    pub f: StackedGrad,
    /// Multiplier for `Y = X + S + N`.
    pub gamma1: Cube,
    /// Multiplier for `X = Z`.
    pub gamma2: Cube,
    /// Multiplier for `D_w(Z) = F`.
    pub gamma3: StackedGrad,
    /// Warm-start factors carried between outer iterations.
    pub factors: Option<TuckerFactors>,
    /// Current penalty parameter.
    pub mu: f64,
    /// Completed outer iterations.
    pub iter: usize,
}

impl SolverState {
    /// Everything-zero state at penalty `mu0`.
    pub fn init(shape: (usize, usize, usize), mu0: f64) -> CoreResult<Self> {
        let (h, w, b) = shape;
        Ok(Self {
            x: Cube::zeros(h, w, b)?,
            z: Cube::zeros(h, w, b)?,
            s: Cube::zeros(h, w, b)?,
            n: Cube::zeros(h, w, b)?,
            f: StackedGrad::zeros(shape)?,
            gamma1: Cube::zeros(h, w, b)?,
            gamma2: Cube::zeros(h, w, b)?,
            gamma3: StackedGrad::zeros(shape)?,
            factors: None,
            mu: mu0,
            iter: 0,
        })
    }
}

/// The HOOI target of the X step:
/// `(Y - S - N + Z + (gamma1 - gamma2)/mu) / 2`, without the `N` term under
/// the approximate model.
pub fn x_target(state: &SolverState, y: &Cube, cfg: &SolverConfig) -> Cube {
    let mu = state.mu;
    let mut t = y.sub(&state.s);
    if cfg.model == ModelKind::General {
        t.axpy(-1.0, &state.n);
    }
    t.axpy(1.0, &state.z);
    t.axpy(1.0 / mu, &state.gamma1);
    t.axpy(-1.0 / mu, &state.gamma2);
    t.scale(0.5)
}

/// X step: rank-constrained Tucker approximation of [`x_target`], warm-
/// started from the previous iteration's factors.
pub fn update_x(state: &mut SolverState, y: &Cube, cfg: &SolverConfig) -> CoreResult<()> {
    let target = x_target(state, y, cfg);
    let tf = hooi(
        &target,
        cfg.ranks,
        state.factors.as_ref(),
        cfg.hooi_sweeps,
        HOOI_TOL,
    )?;
    state.x = tucker_reconstruct(&tf)?;
    state.factors = Some(tf);
    Ok(())
}

/// Z step: solve `(mu I + mu D*_w D_w) Z = H` spectrally, where
/// `H = mu X + mu D*_w(F) + gamma2 - D*_w(gamma3)`.
pub fn update_z(state: &mut SolverState, cfg: &SolverConfig) -> CoreResult<()> {
    let mu = state.mu;
    if !(mu > 0.0) {
        return Err(CoreError::State(format!("penalty mu must be positive, got {mu}")));
    }
    let w = &cfg.weights;
    let mut h = state.x.scale(mu);
    h.axpy(mu, &dw_adjoint(&state.f, w));
    h.axpy(1.0, &state.gamma2);
    h.axpy(-1.0, &dw_adjoint(&state.gamma3, w));

    let tz = tz_spectrum(h.shape(), w);
    let mut spec = fftn(&h);
    for (z, t) in spec.data_mut().iter_mut().zip(tz.data()) {
        *z /= mu * (1.0 + t);
    }
    let back = ifftn(&spec);
    debug_assert!(
        back.max_abs_imag() <= 1e-9,
        "imaginary residue {} after spectral solve",
        back.max_abs_imag()
    );
    state.z = back.real_part();
    Ok(())
}

/// F step: shrink `D_w(Z) + gamma3/mu` by `tau/mu`.
pub fn update_f(state: &mut SolverState, cfg: &SolverConfig) -> CoreResult<()> {
    let mu = state.mu;
    let mut g = dw_forward(&state.z, &cfg.weights);
    g.axpy(1.0 / mu, &state.gamma3);
    state.f = soft_threshold_grad(&g, cfg.tau / mu)?;
    Ok(())
}

/// S step: shrink `Y - X - N + gamma1/mu` by `lambda/mu` (no `N` term under
/// the approximate model).
pub fn update_s(state: &mut SolverState, y: &Cube, cfg: &SolverConfig) -> CoreResult<()> {
    let mu = state.mu;
    let lambda = cfg.lambda(y.height(), y.width());
    let mut r = y.sub(&state.x);
    if cfg.model == ModelKind::General {
        r.axpy(-1.0, &state.n);
    }
    r.axpy(1.0 / mu, &state.gamma1);
    state.s = soft_threshold_cube(&r, lambda / mu)?;
    Ok(())
}

/// N step (general model only): `N = (mu (Y - X - S) + gamma1) / (mu + 2 beta)`.
pub fn update_n(state: &mut SolverState, y: &Cube, cfg: &SolverConfig) -> CoreResult<()> {
    if cfg.model != ModelKind::General {
        return Err(CoreError::State(
            "the approximate model has no dense-noise update".into(),
        ));
    }
    let mu = state.mu;
    let mut num = y.sub(&state.x);
    num.axpy(-1.0, &state.s);
    let mut num = num.scale(mu);
    num.axpy(1.0, &state.gamma1);
    state.n = num.scale(1.0 / (mu + 2.0 * cfg.beta));
    Ok(())
}

/// Multiplier ascent on all three constraints, then the penalty step
/// `mu <- min(rho mu, mu_max)`.
pub fn update_multipliers(state: &mut SolverState, y: &Cube, cfg: &SolverConfig) {
    let mu = state.mu;
    let mut resid = y.sub(&state.x);
    resid.axpy(-1.0, &state.s);
    if cfg.model == ModelKind::General {
        resid.axpy(-1.0, &state.n);
    }
    state.gamma1.axpy(mu, &resid);

    let xz = state.x.sub(&state.z);
    state.gamma2.axpy(mu, &xz);

    let mut grad_resid = dw_forward(&state.z, &cfg.weights);
    grad_resid.axpy(-1.0, &state.f);
    state.gamma3.axpy(mu, &grad_resid);

    state.mu = (cfg.rho * mu).min(cfg.mu_max);
}

/// Final estimates plus per-iteration diagnostics.
#[derive(Debug, Clone)]
pub struct RestoreReport {
    /// Restored cube (the low-rank, TV-smooth component).
    pub restored: Cube,
    /// Sparse noise estimate.
    pub sparse: Cube,
    /// Dense noise estimate; all zeros under the approximate model.
    pub gaussian: Cube,
    /// Outer iterations performed.
    pub iterations: usize,
    /// `|X_prev - X|_F^2 / |Y|_F^2` after each iteration.
    pub rel_change_history: Vec<f64>,
    /// Whether the stopping criterion was met before `max_iter`.
    pub converged: bool,
}

/// Run the full alternating loop on an observation until the relative-change
/// criterion or the iteration cap. Deterministic for fixed inputs.
pub fn restore(y: &Cube, cfg: &SolverConfig) -> CoreResult<RestoreReport> {
    if !y.all_finite() {
        return Err(CoreError::Value(
            "observation contains non-finite samples".into(),
        ));
    }
    cfg.validate(y.shape())?;

    let y_norm_sq = inner(y, y)?;
    let denom = if y_norm_sq > 0.0 { y_norm_sq } else { 1.0 };

    let mut state = SolverState::init(y.shape(), cfg.mu0)?;
    let mut history = Vec::new();
    let mut converged = false;
    for it in 0..cfg.max_iter {
        let x_prev = state.x.clone();
        update_x(&mut state, y, cfg)?;
        update_z(&mut state, cfg)?;
        update_f(&mut state, cfg)?;
        update_s(&mut state, y, cfg)?;
        if cfg.model == ModelKind::General {
            update_n(&mut state, y, cfg)?;
        }
        update_multipliers(&mut state, y, cfg);
        state.iter = it + 1;

        let diff = state.x.sub(&x_prev);
        let rel = inner(&diff, &diff)? / denom;
        history.push(rel);
        if rel <= cfg.eps {
            let mut resid = y.sub(&state.x);
            resid.axpy(-1.0, &state.s);
            if cfg.model == ModelKind::General {
                resid.axpy(-1.0, &state.n);
            }
            let feas_sq = inner(&resid, &resid)? / denom;
            if feas_sq <= FEASIBILITY_RTOL * FEASIBILITY_RTOL {
                converged = true;
                break;
            }
        }
    }
    Ok(RestoreReport {
        restored: state.x,
        sparse: state.s,
        gaussian: state.n,
        iterations: history.len(),
        rel_change_history: history,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cube::unfold;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_cube(h: usize, w: usize, b: usize, seed: u64) -> Cube {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        Cube::from_fn(h, w, b, |_, _, _| rng.random_range(-1.0..1.0)).unwrap()
    }

    fn random_grad(h: usize, w: usize, b: usize, seed: u64) -> StackedGrad {
        StackedGrad::new(
            random_cube(h, w, b, seed),
            random_cube(h, w, b, seed + 1),
            random_cube(h, w, b, seed + 2),
        )
        .unwrap()
    }

    fn frozen_state(shape: (usize, usize, usize), seed: u64, mu: f64) -> SolverState {
        let (h, w, b) = shape;
        SolverState {
            x: random_cube(h, w, b, seed),
            z: random_cube(h, w, b, seed + 10),
            s: random_cube(h, w, b, seed + 20),
            n: random_cube(h, w, b, seed + 30),
            f: random_grad(h, w, b, seed + 40),
            gamma1: random_cube(h, w, b, seed + 50),
            gamma2: random_cube(h, w, b, seed + 60),
            gamma3: random_grad(h, w, b, seed + 70),
            factors: None,
            mu,
            iter: 0,
        }
    }

    fn general_config(ranks: (usize, usize, usize)) -> SolverConfig {
        let mut cfg = SolverConfig::new(ranks);
        cfg.model = ModelKind::General;
        cfg
    }

    #[test]
    fn soft_threshold_printed_definition() {
        assert_eq!(soft_threshold(2.0, 1.0), 1.0);
        assert_eq!(soft_threshold(-0.5, 1.0), 0.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(0.7, 0.0), 0.7);
        let c = Cube::constant(2, 2, 2, 1.0).unwrap();
        assert!(soft_threshold_cube(&c, -0.1).is_err());
    }

    #[test]
    fn soft_threshold_is_the_l1_prox() {
        // min over u of delta*|u| + (u - x)^2/2, by grid search.
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..200 {
            let x: f64 = rng.random_range(-4.0..4.0);
            let delta: f64 = rng.random_range(0.0..2.0);
            let got = soft_threshold(x, delta);
            let mut best_u = -5.0f64;
            let mut best_val = f64::INFINITY;
            let mut u = -5.0f64;
            while u <= 5.0 {
                let val = delta * u.abs() + 0.5 * (u - x) * (u - x);
                if val < best_val {
                    best_val = val;
                    best_u = u;
                }
                u += 1e-4;
            }
            assert!(
                (got - best_u).abs() < 2e-4,
                "x = {x}, delta = {delta}: prox {got} vs grid {best_u}"
            );
        }
    }

    #[test]
    fn x_target_formula_oracle() {
        let shape = (4, 3, 2);
        let cfg = general_config((2, 2, 2));
        let state = frozen_state(shape, 7, 0.37);
        let y = random_cube(4, 3, 2, 99);
        let t = x_target(&state, &y, &cfg);
        for idx in 0..y.len() {
            let want = 0.5
                * (y.data()[idx] - state.s.data()[idx] - state.n.data()[idx]
                    + state.z.data()[idx]
                    + (state.gamma1.data()[idx] - state.gamma2.data()[idx]) / state.mu);
            assert_relative_eq!(t.data()[idx], want, max_relative = 1e-12);
        }
        // Approximate model drops the N term.
        let mut acfg = cfg.clone();
        acfg.model = ModelKind::Approximate;
        let t2 = x_target(&state, &y, &acfg);
        for idx in 0..y.len() {
            let want = 0.5
                * (y.data()[idx] - state.s.data()[idx] + state.z.data()[idx]
                    + (state.gamma1.data()[idx] - state.gamma2.data()[idx]) / state.mu);
            assert_relative_eq!(t2.data()[idx], want, max_relative = 1e-12);
        }
    }

    #[test]
    fn update_x_reproduces_exactly_representable_target() {
        // S = N = multipliers = 0 and Z = Y makes the target Y itself; a Y of
        // exact rank (2,2,2) is then reproduced.
        let y = {
            let g = random_cube(2, 2, 2, 11);
            let u1 = unfold(&random_cube(6, 2, 1, 12), 1).unwrap();
            let q1 = crate::tucker::truncated_svd_factors(&u1, 2).unwrap();
            let u2 = unfold(&random_cube(5, 2, 1, 13), 1).unwrap();
            let q2 = crate::tucker::truncated_svd_factors(&u2, 2).unwrap();
            let u3 = unfold(&random_cube(4, 2, 1, 14), 1).unwrap();
            let q3 = crate::tucker::truncated_svd_factors(&u3, 2).unwrap();
            let tf = TuckerFactors::new(g, [q1, q2, q3]).unwrap();
            tucker_reconstruct(&tf).unwrap()
        };
        let cfg = general_config((2, 2, 2));
        let mut state = SolverState::init(y.shape(), 1.0).unwrap();
        state.z = y.clone();
        update_x(&mut state, &y, &cfg).unwrap();
        let rel = state.x.sub(&y).frob_norm() / y.frob_norm();
        assert!(rel < 1e-8, "relative error {rel}");
    }

    #[test]
    fn update_x_zero_everything_gives_zero() {
        let y = Cube::zeros(4, 4, 3).unwrap();
        let cfg = general_config((2, 2, 2));
        let mut state = SolverState::init(y.shape(), 1.0).unwrap();
        update_x(&mut state, &y, &cfg).unwrap();
        assert_eq!(state.x.frob_norm(), 0.0);
    }

    #[test]
    fn update_z_reduces_to_x_when_weights_vanish_in_system() {
        // All-zero F and multipliers, with zero-weight axes removed from the
        // system: constant X lies in the difference operator's null space.
        let mut cfg = general_config((2, 2, 2));
        cfg.weights = TVWeights::new(0.8, 1.0, 1.0).unwrap();
        let mut state = SolverState::init((5, 4, 3), 0.9).unwrap();
        state.x = Cube::constant(5, 4, 3, 1.37).unwrap();
        update_z(&mut state, &cfg).unwrap();
        let rel = state.z.sub(&state.x).frob_norm() / state.x.frob_norm();
        assert!(rel < 1e-12);
    }

    #[test]
    fn update_z_matches_dense_direct_solve() {
        // Assemble the (hwb)x(hwb) system matrix explicitly by acting on unit
        // vectors with mu(I + D*D) and solve densely.
        let shape = (6, 5, 4);
        let npts = 6 * 5 * 4;
        let mut cfg = general_config((2, 2, 2));
        cfg.weights = TVWeights::new(0.5, 1.0, 1.3).unwrap();
        let mut state = frozen_state(shape, 21, 0.73);
        let mu = state.mu;

        let w = cfg.weights;
        let mut h_cube = state.x.scale(mu);
        h_cube.axpy(mu, &dw_adjoint(&state.f, &w));
        h_cube.axpy(1.0, &state.gamma2);
        h_cube.axpy(-1.0, &dw_adjoint(&state.gamma3, &w));

        let mut a = DMatrix::<f64>::zeros(npts, npts);
        for col in 0..npts {
            let mut e = Cube::zeros(6, 5, 4).unwrap();
            e.data_mut()[col] = 1.0;
            let mut out = dw_adjoint(&dw_forward(&e, &w), &w).scale(mu);
            out.axpy(mu, &e);
            for row in 0..npts {
                a[(row, col)] = out.data()[row];
            }
        }
        let rhs = nalgebra::DVector::from_column_slice(h_cube.data());
        let dense = a.lu().solve(&rhs).expect("system is positive definite");

        update_z(&mut state, &cfg).unwrap();
        let mut err = 0.0f64;
        let mut norm = 0.0f64;
        for idx in 0..npts {
            err += (state.z.data()[idx] - dense[idx]).powi(2);
            norm += dense[idx].powi(2);
        }
        assert!((err / norm).sqrt() < 1e-8, "rel err {}", (err / norm).sqrt());
    }

    #[test]
    fn update_f_threshold_extremes_and_composition() {
        let shape = (4, 3, 3);
        let mut cfg = general_config((2, 2, 2));
        let mut state = frozen_state(shape, 33, 1.2);

        // Huge tau wipes F out.
        cfg.tau = 1e9;
        update_f(&mut state, &cfg).unwrap();
        assert_eq!(state.f.frob_norm(), 0.0);

        // tau = 0 keeps D_w(Z) + gamma3/mu exactly.
        cfg.tau = 0.0;
        let mut want = dw_forward(&state.z, &cfg.weights);
        want.axpy(1.0 / state.mu, &state.gamma3);
        update_f(&mut state, &cfg).unwrap();
        assert!(state.f.zip_map(&want, |a, b| a - b).frob_norm() < 1e-12);

        // Generic tau matches the composition oracle.
        cfg.tau = 0.8;
        let oracle = soft_threshold_grad(&want, cfg.tau / state.mu).unwrap();
        update_f(&mut state, &cfg).unwrap();
        assert!(state.f.zip_map(&oracle, |a, b| a - b).frob_norm() < 1e-12);
    }

    #[test]
    fn update_s_zero_residual_and_composition() {
        let shape = (6, 6, 2);
        let cfg = general_config((2, 2, 2));
        let mut state = frozen_state(shape, 44, 2.0);
        let y = state.x.clone();
        state.n = Cube::zeros(6, 6, 2).unwrap();
        state.gamma1 = Cube::zeros(6, 6, 2).unwrap();
        update_s(&mut state, &y, &cfg).unwrap();
        assert_eq!(state.s.frob_norm(), 0.0);

        let mut state = frozen_state(shape, 45, 2.0);
        let y = random_cube(6, 6, 2, 46);
        let mut resid = y.sub(&state.x);
        resid.axpy(-1.0, &state.n);
        resid.axpy(1.0 / state.mu, &state.gamma1);
        let lambda = cfg.lambda(6, 6);
        let want = soft_threshold_cube(&resid, lambda / state.mu).unwrap();
        update_s(&mut state, &y, &cfg).unwrap();
        assert!(state.s.sub(&want).frob_norm() < 1e-12);
    }

    #[test]
    fn update_n_closed_form() {
        let shape = (5, 4, 3);
        let mut cfg = general_config((2, 2, 2));
        cfg.beta = 10.0;
        let mut state = frozen_state(shape, 55, 0.61);
        let y = random_cube(5, 4, 3, 56);
        update_n(&mut state, &y, &cfg).unwrap();
        for idx in 0..y.len() {
            let want = (state.mu * (y.data()[idx] - state.x.data()[idx] - state.s.data()[idx])
                + state.gamma1.data()[idx])
                / (state.mu + 2.0 * cfg.beta);
            assert_relative_eq!(state.n.data()[idx], want, max_relative = 1e-12);
        }

        // beta = 0 and gamma1 = 0 reduce to the plain residual.
        cfg.beta = 0.0;
        state.gamma1 = Cube::zeros(5, 4, 3).unwrap();
        update_n(&mut state, &y, &cfg).unwrap();
        let mut want = y.sub(&state.x);
        want.axpy(-1.0, &state.s);
        assert!(state.n.sub(&want).frob_norm() < 1e-12);

        // Y = X + S gives N = 0.
        let y2 = state.x.add(&state.s);
        update_n(&mut state, &y2, &cfg).unwrap();
        assert!(state.n.frob_norm() < 1e-12);
    }

    #[test]
    fn update_n_rejected_under_approximate_model() {
        let cfg = SolverConfig::new((2, 2, 2));
        assert_eq!(cfg.model, ModelKind::Approximate);
        let mut state = SolverState::init((4, 4, 4), cfg.mu0).unwrap();
        let y = random_cube(4, 4, 4, 57);
        assert!(matches!(
            update_n(&mut state, &y, &cfg),
            Err(CoreError::State(_))
        ));
    }

    #[test]
    fn multipliers_formula_and_mu_schedule() {
        let shape = (4, 4, 2);
        let cfg = general_config((2, 2, 2));
        let mut state = frozen_state(shape, 66, 0.5);
        let y = random_cube(4, 4, 2, 67);
        let before = state.clone();
        update_multipliers(&mut state, &y, &cfg);

        for idx in 0..y.len() {
            let r1 = y.data()[idx]
                - before.x.data()[idx]
                - before.s.data()[idx]
                - before.n.data()[idx];
            assert_relative_eq!(
                state.gamma1.data()[idx],
                before.gamma1.data()[idx] + before.mu * r1,
                max_relative = 1e-12
            );
            let r2 = before.x.data()[idx] - before.z.data()[idx];
            assert_relative_eq!(
                state.gamma2.data()[idx],
                before.gamma2.data()[idx] + before.mu * r2,
                max_relative = 1e-12
            );
        }
        let mut g3_want = dw_forward(&before.z, &cfg.weights);
        g3_want.axpy(-1.0, &before.f);
        let mut expect = before.gamma3.clone();
        expect.axpy(before.mu, &g3_want);
        assert!(state.gamma3.zip_map(&expect, |a, b| a - b).frob_norm() < 1e-12);
        assert_relative_eq!(state.mu, cfg.rho * before.mu, max_relative = 1e-15);

        // Exact feasibility leaves the multipliers alone.
        let mut state = frozen_state(shape, 68, 0.5);
        state.z = state.x.clone();
        state.f = dw_forward(&state.z, &cfg.weights);
        let y_feasible = {
            let mut t = state.x.add(&state.s);
            t.axpy(1.0, &state.n);
            t
        };
        let before = state.clone();
        update_multipliers(&mut state, &y_feasible, &cfg);
        assert!(state.gamma1.sub(&before.gamma1).frob_norm() < 1e-12);
        assert!(state.gamma2.sub(&before.gamma2).frob_norm() < 1e-12);
        assert!(state
            .gamma3
            .zip_map(&before.gamma3, |a, b| a - b)
            .frob_norm()
            < 1e-12);

        // mu saturates at mu_max.
        let mut state = frozen_state(shape, 69, 0.9e6);
        update_multipliers(&mut state, &y, &cfg);
        assert_eq!(state.mu, cfg.mu_max);
    }

    #[test]
    fn restore_zero_observation_converges_immediately() {
        let y = Cube::zeros(6, 6, 4).unwrap();
        let cfg = SolverConfig::new((2, 2, 2));
        let report = restore(&y, &cfg).unwrap();
        assert_eq!(report.iterations, 1);
        assert!(report.converged);
        assert_eq!(report.restored.frob_norm(), 0.0);
        assert_eq!(report.sparse.frob_norm(), 0.0);
    }

    #[test]
    fn restore_rejects_non_finite_input() {
        let mut y = Cube::zeros(4, 4, 4).unwrap();
        y.data_mut()[5] = f64::NAN;
        let cfg = SolverConfig::new((2, 2, 2));
        assert!(restore(&y, &cfg).is_err());
    }

    #[test]
    fn restore_rejects_bad_config() {
        let y = random_cube(4, 4, 4, 70);
        let mut cfg = SolverConfig::new((2, 2, 2));
        cfg.rho = 1.0;
        assert!(restore(&y, &cfg).is_err());
        let mut cfg = SolverConfig::new((5, 2, 2));
        cfg.model = ModelKind::General;
        assert!(restore(&y, &cfg).is_err());
    }

    #[test]
    fn approximate_equals_general_with_beta_to_infinity_at_iteration_one() {
        let y = random_cube(6, 6, 4, 80);
        let mut general = SolverConfig::new((3, 3, 2));
        general.model = ModelKind::General;
        general.beta = 1e30;
        general.max_iter = 1;
        let mut approx = general.clone();
        approx.model = ModelKind::Approximate;

        let rg = restore(&y, &general).unwrap();
        let ra = restore(&y, &approx).unwrap();
        let dx = rg.restored.sub(&ra.restored).frob_norm();
        let ds = rg.sparse.sub(&ra.sparse).frob_norm();
        assert!(dx < 1e-10, "X paths diverge: {dx}");
        assert!(ds < 1e-10, "S paths diverge: {ds}");
        assert!(rg.gaussian.frob_norm() < 1e-10);
    }

    #[test]
    fn restore_is_deterministic() {
        let y = random_cube(8, 8, 5, 90);
        let mut cfg = SolverConfig::new((4, 4, 3));
        cfg.max_iter = 8;
        let a = restore(&y, &cfg).unwrap();
        let b = restore(&y, &cfg).unwrap();
        assert_eq!(a.restored.data(), b.restored.data());
        assert_eq!(a.sparse.data(), b.sparse.data());
        assert_eq!(a.rel_change_history, b.rel_change_history);
    }

    #[test]
    fn mu_stays_in_range_and_orthonormal_factors_every_iteration() {
        let y = random_cube(8, 8, 5, 91);
        let cfg = SolverConfig::new((4, 4, 3));
        let mut state = SolverState::init(y.shape(), cfg.mu0).unwrap();
        let mut prev_mu = 0.0;
        for _ in 0..12 {
            update_x(&mut state, &y, &cfg).unwrap();
            update_z(&mut state, &cfg).unwrap();
            update_f(&mut state, &cfg).unwrap();
            update_s(&mut state, &y, &cfg).unwrap();
            update_multipliers(&mut state, &y, &cfg);
            let tf = state.factors.as_ref().unwrap();
            assert!(tf.orthonormality_defect() < 1e-10);
            assert!(state.mu >= cfg.mu0 && state.mu <= cfg.mu_max);
            assert!(state.mu >= prev_mu);
            prev_mu = state.mu;
        }
    }

    #[test]
    fn clean_low_rank_piecewise_cube_is_kept() {
        // A piecewise-constant rank-(2,2,2) cube run through the approximate
        // model should survive nearly unchanged.
        let step = |t: usize, n: usize| if t < n / 2 { 0.2 } else { 0.8 };
        let y = Cube::from_fn(12, 12, 6, |i, j, k| {
            step(i, 12) * step(j, 12) + 0.1 * step(k, 6)
        })
        .unwrap();
        let mut cfg = SolverConfig::new((3, 3, 2));
        cfg.max_iter = 60;
        let report = restore(&y, &cfg).unwrap();
        let mse = {
            let d = report.restored.sub(&y);
            inner(&d, &d).unwrap() / y.len() as f64
        };
        let psnr = 10.0 * (1.0 / mse).log10();
        assert!(psnr >= 60.0, "PSNR {psnr} dB");
    }

    #[test]
    fn feasibility_residual_shrinks() {
        let y = random_cube(8, 8, 4, 92).map(|v| 0.5 + 0.2 * v);
        let mut cfg = SolverConfig::new((4, 4, 2));
        cfg.max_iter = 60;
        let report = restore(&y, &cfg).unwrap();
        let mut recon = report.restored.add(&report.sparse);
        recon.axpy(1.0, &report.gaussian);
        let resid = y.sub(&recon).frob_norm() / y.frob_norm();
        assert!(resid <= 1e-3, "feasibility residual {resid}");
    }

    #[test]
    fn auto_ranks_formula() {
        assert_eq!(auto_ranks((40, 40, 20)), (32, 32, 10));
        assert_eq!(auto_ranks((145, 145, 224)), (116, 116, 10));
        assert_eq!(auto_ranks((5, 5, 4)), (4, 4, 4));
    }
}
