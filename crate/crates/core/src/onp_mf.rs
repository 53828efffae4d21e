//! Orthogonal nonnegatively penalized matrix factorization.
//!
//! Augmented Lagrangian on the nonnegativity of `V`:
//!
//! ```text
//! L_rho(U, V, Lambda) = 1/2 ||M - UV||_F^2 - <Lambda, V> + rho/2 ||min(V, 0)||_F^2
//! ```
//!
//! Each iteration solves the `U` subproblem exactly by NNLS, takes one
//! projected gradient step in `V` that lands back on the Stiefel manifold
//! (so `V V^T = I` holds at every iterate), moves the multipliers along
//! `-V` with a `1/t` step, and grows the penalty geometrically. Nonnegativity
//! of `V` is reached only in the limit; the run stops once the relative
//! negative mass `||min(V,0)||_F / ||V||_F` drops below a threshold.

use std::time::Instant;

use log::warn;
use ndarray::{Array2, ArrayView2, Zip};

use crate::error::{OnmfError, Result};
use crate::linalg::{
    gram_residual, nnls_solve, project_stiefel, symmetric_eigen, top_k_right_singular_vectors, DataMatrix, OrthonormalRows,
};
use crate::metrics::{negativity_residual, reconstruction_error};
use crate::partition::{partition_from_rows, Factorization, Partition};
use crate::trace::{RunTrace, TraceRow};

#[derive(Debug, Clone, PartialEq)]
pub struct OnpMfConfig {
    /// Multiplier step scale; the step at iteration `t` is `alpha0 / t`.
    pub alpha0: f64,
    /// Initial penalty.
    pub rho0: f64,
    /// Penalty growth factor per iteration.
    pub growth: f64,
    pub beta0: f64,
    pub beta_up: f64,
    pub beta_down: f64,
    /// Trial steps never exceed `beta_cap / lambda_max(U^T U)`, a multiple of
    /// the inverse curvature of the fit term. Unbounded growth lets the
    /// projected step degenerate to `polar(-grad)`, which oscillates.
    /// `f64::INFINITY` disables the cap.
    pub beta_cap: f64,
    /// Line-search trials per iteration before giving up on the step.
    pub max_trials: usize,
    pub max_iter: usize,
    /// Stop once `||min(V,0)||_F / ||V||_F < neg_tol`.
    pub neg_tol: f64,
    /// The penalty is frozen once it reaches this value.
    pub rho_cap: f64,
    /// Consecutive failed line searches that end the run.
    pub stall_limit: usize,
}

impl Default for OnpMfConfig {
    fn default() -> Self {
        Self {
            alpha0: 100.0,
            rho0: 0.01,
            growth: 1.01,
            beta0: 1.0,
            beta_up: 2.0,
            beta_down: 0.5,
            beta_cap: 1.0,
            max_trials: 20,
            max_iter: 20_000,
            neg_tol: 1e-3,
            rho_cap: 1e12,
            stall_limit: 50,
        }
    }
}

impl OnpMfConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(OnmfError::InvalidConfig(what.to_string()));
        if !(self.alpha0 > 0.0) {
            return bad("alpha0 must be > 0");
        }
        if !(self.rho0 > 0.0) {
            return bad("rho0 must be > 0");
        }
        if !(self.growth > 1.0) {
            return bad("growth must be > 1");
        }
        if !(self.beta0 > 0.0) {
            return bad("beta0 must be > 0");
        }
        if !(self.beta_up > 1.0) {
            return bad("beta_up must be > 1");
        }
        if !(self.beta_down > 0.0 && self.beta_down < 1.0) {
            return bad("beta_down must lie in (0, 1)");
        }
        if !(self.beta_cap > 0.0) {
            return bad("beta_cap must be > 0");
        }
        if self.max_trials == 0 {
            return bad("max_trials must be >= 1");
        }
        if !(self.neg_tol >= 0.0) {
            return bad("neg_tol must be >= 0");
        }
        if !(self.rho_cap >= self.rho0) {
            return bad("rho_cap must be >= rho0");
        }
        Ok(())
    }
}

/// Iterate bundle of the augmented Lagrangian loop.
#[derive(Debug, Clone)]
pub struct OnpMfState {
    /// `m x k`, nonnegative.
    pub u: Array2<f64>,
    pub v: OrthonormalRows,
    /// `k x n`, nonnegative multipliers.
    pub lambda: Array2<f64>,
    pub rho: f64,
    pub t: usize,
    /// Step length the next line search starts from.
    pub beta: f64,
}

/// Flips a row when the l2 norm of its negative entries exceeds that of its
/// positive entries. Ties are left alone.
pub fn flip_row_signs(v: &mut Array2<f64>) {
    for mut row in v.rows_mut() {
        let (mut neg, mut pos) = (0.0, 0.0);
        for &x in row.iter() {
            if x < 0.0 {
                neg += x * x;
            } else {
                pos += x * x;
            }
        }
        if neg > pos {
            row.mapv_inplace(|x| -x);
        }
    }
}

/// Leading `k` right singular vectors of `M` as rows, sign-corrected.
pub fn init_v_svd(m: &DataMatrix, k: usize) -> Result<OrthonormalRows> {
    Ok(init_v_svd_flagged(m, k)?.0)
}

fn init_v_svd_flagged(m: &DataMatrix, k: usize) -> Result<(OrthonormalRows, bool)> {
    let basis = top_k_right_singular_vectors(m, k)?;
    if !basis.converged {
        warn!("subspace iteration hit its sweep cap after {} sweeps", basis.sweeps);
    }
    let mut v = basis.vectors;
    flip_row_signs(&mut v);
    let v = OrthonormalRows::try_new(v, 1e-10).ok_or(OnmfError::RankDeficient { sigma_min: 0.0 })?;
    Ok((v, basis.converged))
}

fn neg_part_sq(v: ArrayView2<f64>) -> f64 {
    v.iter().map(|&x| if x < 0.0 { x * x } else { 0.0 }).sum()
}

/// Direct evaluation of the augmented Lagrangian.
pub fn lagrangian_value(
    m: &DataMatrix,
    u: ArrayView2<f64>,
    v: ArrayView2<f64>,
    lambda: ArrayView2<f64>,
    rho: f64,
) -> f64 {
    let fit = reconstruction_error(m, u, v).powi(2);
    0.5 * fit - (&lambda * &v).sum() + 0.5 * rho * neg_part_sq(v)
}

/// `U^T (U V - M) - Lambda + rho * min(V, 0)`.
pub fn lagrangian_grad_v(
    m: &DataMatrix,
    u: ArrayView2<f64>,
    v: ArrayView2<f64>,
    lambda: ArrayView2<f64>,
    rho: f64,
) -> Array2<f64> {
    LagrangianModel::new(m, u, lambda, rho).gradient(v)
}

/// `max(0, Lambda - (alpha0 / t) V)`
pub fn update_multipliers(lambda: ArrayView2<f64>, v: ArrayView2<f64>, alpha0: f64, t: usize) -> Array2<f64> {
    assert!(t >= 1, "iteration counter starts at 1");
    let step = alpha0 / t as f64;
    let mut out = lambda.to_owned();
    Zip::from(&mut out).and(v).for_each(|l, &x| *l = (*l - step * x).max(0.0));
    out
}

/// `L_rho(U, ., Lambda)` with `U`, `Lambda` and `rho` frozen. Uses
/// `||M - UV||^2 = ||M||^2 - 2 <U^T M, V> + <U^T U, V V^T>`, so evaluating a
/// trial `V` costs `O(k^2 n)` instead of a pass over `M`.
pub(crate) struct LagrangianModel<'a> {
    utm: Array2<f64>,
    utu: Array2<f64>,
    curvature: f64,
    m_sq: f64,
    lambda: ArrayView2<'a, f64>,
    rho: f64,
}

impl<'a> LagrangianModel<'a> {
    pub(crate) fn new(m: &DataMatrix, u: ArrayView2<f64>, lambda: ArrayView2<'a, f64>, rho: f64) -> Self {
        let utu = u.t().dot(&u);
        let curvature = symmetric_eigen(&utu).0.first().copied().unwrap_or(0.0);
        Self {
            utm: m.left_mul_transposed(u),
            utu,
            curvature,
            m_sq: m.frobenius_sq(),
            lambda,
            rho,
        }
    }

    /// Lagrangian minus the constant `||M||^2 / 2`; differences between
    /// trial points keep full precision.
    pub(crate) fn shifted_value(&self, v: ArrayView2<f64>) -> f64 {
        let cross = (&self.utm * &v).sum();
        let quad = (&self.utu * &v.dot(&v.t())).sum();
        0.5 * (quad - 2.0 * cross) - (&self.lambda * &v).sum() + 0.5 * self.rho * neg_part_sq(v)
    }

    #[cfg(test)]
    pub(crate) fn value(&self, v: ArrayView2<f64>) -> f64 {
        0.5 * self.m_sq + self.shifted_value(v)
    }

    pub(crate) fn fit_error(&self, v: ArrayView2<f64>) -> f64 {
        let cross = (&self.utm * &v).sum();
        let quad = (&self.utu * &v.dot(&v.t())).sum();
        (self.m_sq - 2.0 * cross + quad).max(0.0).sqrt()
    }

    pub(crate) fn gradient(&self, v: ArrayView2<f64>) -> Array2<f64> {
        let mut g = self.utu.dot(&v) - &self.utm - &self.lambda;
        let rho = self.rho;
        Zip::from(&mut g).and(v).for_each(|gi, &x| {
            if x < 0.0 {
                *gi += rho * x;
            }
        });
        g
    }
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub v: OrthonormalRows,
    /// Accepted step, or 0 when every trial failed (stall).
    pub beta_used: f64,
    /// Where the next line search starts.
    pub next_beta: f64,
}

/// One projected gradient step on `V` with the increase/decrease line
/// search: start at the stored step (clipped to `beta_cap`), accept the
/// first trial that lowers the Lagrangian and double the stored step,
/// otherwise halve and retry.
pub fn projected_gradient_step(m: &DataMatrix, state: &OnpMfState, cfg: &OnpMfConfig) -> Result<StepOutcome> {
    let model = LagrangianModel::new(m, state.u.view(), state.lambda.view(), state.rho);
    step_with_model(&model, state.v.view(), state.beta, cfg)
}

fn step_with_model(model: &LagrangianModel<'_>, v: ArrayView2<f64>, beta: f64, cfg: &OnpMfConfig) -> Result<StepOutcome> {
    let grad = model.gradient(v);
    let current = model.shifted_value(v);
    let mut beta = if model.curvature > 0.0 {
        beta.min(cfg.beta_cap / model.curvature)
    } else {
        beta
    };
    if grad.iter().all(|&g| g == 0.0) {
        return Ok(StepOutcome {
            v: project_stiefel(v)?,
            beta_used: 0.0,
            next_beta: beta,
        });
    }
    for _ in 0..cfg.max_trials {
        let trial = &v - &(&grad * beta);
        let projected = match project_stiefel(trial.view()) {
            Ok(x) => x,
            Err(OnmfError::RankDeficient { .. }) => project_stiefel(jitter(&trial).view())?,
            Err(e) => return Err(e),
        };
        if model.shifted_value(projected.view()) < current {
            return Ok(StepOutcome {
                v: projected,
                beta_used: beta,
                next_beta: beta * cfg.beta_up,
            });
        }
        beta *= cfg.beta_down;
    }
    Ok(StepOutcome {
        v: OrthonormalRows::try_new(v.to_owned(), f64::INFINITY).expect("infinite tolerance"),
        beta_used: 0.0,
        next_beta: beta,
    })
}

/// Deterministic perturbation of relative size 1e-12.
fn jitter(a: &Array2<f64>) -> Array2<f64> {
    let scale = 1e-12 * a.iter().fold(1.0f64, |acc, x| acc.max(x.abs()));
    let mut out = a.clone();
    for (idx, x) in out.iter_mut().enumerate() {
        let h = (idx as f64 * 0.618_033_988_749_895).fract() - 0.5;
        *x += scale * h;
    }
    out
}

#[derive(Debug, Clone)]
pub struct OnpMfOutput {
    /// Nonnegative pair after clamping `V` and re-solving `U`.
    pub factorization: Factorization,
    /// `||M - UV||_F^2` of the last iterate, before the clamp.
    pub objective_before_clamp: f64,
    /// Last iterate of `V` (orthonormal rows, possibly slightly negative).
    pub v_unclamped: Array2<f64>,
    /// Column `j` goes to `argmax_i v_ij`.
    pub partition: Partition,
    pub trace: RunTrace,
    pub iterations: usize,
    /// The negativity residual fell below `neg_tol`.
    pub converged: bool,
    pub stalled: bool,
    pub init_converged: bool,
    pub nnls_degenerate: bool,
}

pub fn onp_mf(m: &DataMatrix, k: usize, cfg: &OnpMfConfig) -> Result<OnpMfOutput> {
    cfg.validate()?;
    let (rows, n) = m.dim();
    if k == 0 || k > rows.min(n) {
        return Err(OnmfError::DimensionMismatch(format!(
            "k = {k} must lie in 1..={}",
            rows.min(n)
        )));
    }
    let start = Instant::now();
    let (v0, init_converged) = init_v_svd_flagged(m, k)?;
    let mut state = OnpMfState {
        u: Array2::zeros((rows, k)),
        v: v0,
        lambda: Array2::zeros((k, n)),
        rho: cfg.rho0,
        t: 0,
        beta: cfg.beta0,
    };
    let mut trace = RunTrace::default();
    let mut converged = negativity_residual(state.v.view()) < cfg.neg_tol;
    let mut stalled = false;
    let mut nnls_degenerate = false;
    let mut failed_steps = 0;

    while !converged && state.t < cfg.max_iter {
        state.t += 1;
        let sol = nnls_solve(m, state.v.view())?;
        nnls_degenerate |= sol.degenerate;
        state.u = sol.u;

        let model = LagrangianModel::new(m, state.u.view(), state.lambda.view(), state.rho);
        let step = step_with_model(&model, state.v.view(), state.beta, cfg)?;
        state.v = step.v;
        state.beta = step.next_beta;
        let error = model.fit_error(state.v.view());
        drop(model);

        state.lambda = update_multipliers(state.lambda.view(), state.v.view(), cfg.alpha0, state.t);
        let rho_used = state.rho;
        state.rho = (state.rho * cfg.growth).min(cfg.rho_cap);

        let neg = negativity_residual(state.v.view());
        trace.push(TraceRow {
            iteration: state.t,
            error,
            neg_residual: neg,
            orth_residual: gram_residual(state.v.view()),
            beta: Some(step.beta_used),
            rho: Some(rho_used),
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        });

        converged = neg < cfg.neg_tol;
        if step.beta_used == 0.0 {
            failed_steps += 1;
            if failed_steps >= cfg.stall_limit {
                stalled = true;
                warn!("line search failed {failed_steps} times in a row; stopping at t = {}", state.t);
                break;
            }
        } else {
            failed_steps = 0;
        }
    }

    let v_last = state.v.into_inner();
    let u_last = if state.t == 0 {
        let sol = nnls_solve(m, v_last.view())?;
        nnls_degenerate |= sol.degenerate;
        sol.u
    } else {
        state.u
    };
    let objective_before_clamp = reconstruction_error(m, u_last.view(), v_last.view()).powi(2);
    let v_clamped = v_last.mapv(|x| x.max(0.0));
    let sol = nnls_solve(m, v_clamped.view())?;
    nnls_degenerate |= sol.degenerate;
    let objective = reconstruction_error(m, sol.u.view(), v_clamped.view()).powi(2);
    let partition = partition_from_rows(&v_clamped);
    Ok(OnpMfOutput {
        factorization: Factorization {
            u: sol.u,
            v: v_clamped,
            objective,
        },
        objective_before_clamp,
        v_unclamped: v_last,
        partition,
        trace,
        iterations: state.t,
        converged,
        stalled,
        init_converged,
        nnls_degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn scalar(x: f64) -> Array2<f64> {
        array![[x]]
    }

    #[test]
    fn flip_when_negative_mass_dominates() {
        let mut v = array![[-0.8, 0.6]];
        flip_row_signs(&mut v);
        assert_eq!(v, array![[0.8, -0.6]]);
    }

    #[test]
    fn no_flip_on_tie() {
        let s = 0.5f64.sqrt();
        let mut v = array![[-s, s]];
        flip_row_signs(&mut v);
        assert_eq!(v, array![[-s, s]]);
    }

    #[test]
    fn scalar_lagrangian_and_gradient() {
        let m = DataMatrix::dense(scalar(2.0)).unwrap();
        let (u, v, l) = (scalar(1.0), scalar(-1.0), scalar(3.0));
        let val = lagrangian_value(&m, u.view(), v.view(), l.view(), 4.0);
        assert!((val - 9.5).abs() < 1e-14);
        let g = lagrangian_grad_v(&m, u.view(), v.view(), l.view(), 4.0);
        assert!((g[[0, 0]] + 10.0).abs() < 1e-14);
    }

    #[test]
    fn penalty_terms_vanish_for_nonnegative_v() {
        let m = DataMatrix::dense(array![[1.0, 2.0], [0.5, 0.0]]).unwrap();
        let u = array![[1.0], [0.2]];
        let v = array![[0.6, 0.8]];
        let val = lagrangian_value(&m, u.view(), v.view(), Array2::zeros((1, 2)).view(), 7.0);
        let fit = reconstruction_error(&m, u.view(), v.view()).powi(2);
        assert!((val - 0.5 * fit).abs() < 1e-14);
    }

    #[test]
    fn exact_fit_leaves_minus_inner_product() {
        let u = array![[2.0], [1.0]];
        let v = array![[0.6, 0.8]];
        let m = DataMatrix::dense(u.dot(&v)).unwrap();
        let lambda = array![[1.5, 0.25]];
        let val = lagrangian_value(&m, u.view(), v.view(), lambda.view(), 3.0);
        assert!((val + (0.9 + 0.2)).abs() < 1e-14);
    }

    #[test]
    fn stationary_point_has_zero_gradient() {
        let u = array![[2.0], [1.0]];
        let v = array![[0.6, 0.8]];
        let m = DataMatrix::dense(u.dot(&v)).unwrap();
        let g = lagrangian_grad_v(&m, u.view(), v.view(), Array2::zeros((1, 2)).view(), 1.0);
        assert!(g.iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn multiplier_updates() {
        let l = update_multipliers(Array2::zeros((1, 2)).view(), array![[1.0, 0.0]].view(), 100.0, 3);
        assert_eq!(l, Array2::<f64>::zeros((1, 2)));
        let l = update_multipliers(scalar(0.0).view(), scalar(-2.0).view(), 100.0, 10);
        assert!((l[[0, 0]] - 20.0).abs() < 1e-14);
        let l = update_multipliers(scalar(5.0).view(), scalar(1.0).view(), 100.0, 100);
        assert!((l[[0, 0]] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn model_matches_direct_evaluation() {
        let m = DataMatrix::dense(array![[1.0, 2.0, 0.0], [0.5, 0.0, 3.0]]).unwrap();
        let u = array![[1.0, 0.3], [0.2, 2.0]];
        let v = array![[0.6, -0.8, 0.0], [0.0, 0.0, 1.0]];
        let lambda = array![[0.1, 0.2, 0.3], [0.0, 1.0, 0.0]];
        let model = LagrangianModel::new(&m, u.view(), lambda.view(), 2.5);
        let direct = lagrangian_value(&m, u.view(), v.view(), lambda.view(), 2.5);
        assert!((model.value(v.view()) - direct).abs() < 1e-12);
    }

    #[test]
    fn zero_gradient_keeps_v() {
        let u = array![[2.0], [1.0]];
        let v = array![[0.6, 0.8]];
        let m = DataMatrix::dense(u.dot(&v)).unwrap();
        let state = OnpMfState {
            u,
            v: OrthonormalRows::try_new(v.clone(), 1e-12).unwrap(),
            lambda: Array2::zeros((1, 2)),
            rho: 1.0,
            t: 1,
            beta: 1.0,
        };
        let out = projected_gradient_step(&m, &state, &OnpMfConfig::default()).unwrap();
        for (a, b) in out.v.as_array().iter().zip(v.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn config_validation() {
        assert!(OnpMfConfig::default().validate().is_ok());
        let bad = OnpMfConfig { growth: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = OnpMfConfig { beta_down: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = OnpMfConfig { alpha0: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
