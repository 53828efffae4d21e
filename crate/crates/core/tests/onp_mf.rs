use ndarray::{Array2, Axis};
use onmfkit::linalg::{gram_residual, kkt_residual, nnls_solve, project_stiefel};
use onmfkit::metrics::accuracy;
use onmfkit::onp_mf::{
    init_v_svd, lagrangian_grad_v, lagrangian_value, onp_mf, projected_gradient_step, update_multipliers, OnpMfConfig,
    OnpMfState,
};
use onmfkit::DataMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(rng: &mut ChaCha8Rng, r: usize, c: usize, lo: f64) -> Array2<f64> {
    Array2::from_shape_fn((r, c), |_| lo + (1.0 - lo) * rng.random::<f64>())
}

/// Three well separated column groups with a little noise.
fn blocks(seed: u64) -> (DataMatrix, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (k, per) = (3, 8);
    let mut a = Array2::zeros((12, k * per));
    let mut labels = vec![];
    for c in 0..k * per {
        let g = c % k;
        labels.push(g);
        let scale = 1.0 + g as f64;
        for r in 0..12 {
            a[[r, c]] = if r / 4 == g { scale * (0.5 + rng.random::<f64>()) } else { 0.01 * rng.random::<f64>() };
        }
    }
    (DataMatrix::dense(a).unwrap(), labels)
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10 {
        let m = DataMatrix::dense(random(&mut rng, 6, 9, 0.0)).unwrap();
        let u = random(&mut rng, 6, 3, 0.0);
        let v = random(&mut rng, 3, 9, -1.0);
        let lambda = random(&mut rng, 3, 9, 0.0);
        let rho = 0.7;
        let g = lagrangian_grad_v(&m, u.view(), v.view(), lambda.view(), rho);
        let h = 1e-6;
        let mut fd = Array2::zeros(v.dim());
        for idx in ndarray::indices(v.dim()) {
            let (mut p, mut q) = (v.clone(), v.clone());
            p[idx] += h;
            q[idx] -= h;
            fd[idx] = (lagrangian_value(&m, u.view(), p.view(), lambda.view(), rho)
                - lagrangian_value(&m, u.view(), q.view(), lambda.view(), rho))
                / (2.0 * h);
        }
        let err = (&g - &fd).iter().map(|x| x * x).sum::<f64>().sqrt();
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(err <= 1e-5 * norm.max(1.0), "{err} vs {norm}");
    }
}

#[test]
fn accepted_step_lowers_the_lagrangian_and_stays_orthonormal() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cfg = OnpMfConfig::default();
    for _ in 0..20 {
        let m = DataMatrix::dense(random(&mut rng, 8, 15, 0.0)).unwrap();
        let v = project_stiefel(random(&mut rng, 3, 15, -1.0).view()).unwrap();
        let u = nnls_solve(&m, v.view()).unwrap().u;
        let state = OnpMfState {
            u: u.clone(),
            v: v.clone(),
            lambda: random(&mut rng, 3, 15, 0.0),
            rho: 0.5,
            t: 1,
            beta: cfg.beta0,
        };
        let step = projected_gradient_step(&m, &state, &cfg).unwrap();
        let before = lagrangian_value(&m, u.view(), v.view(), state.lambda.view(), state.rho);
        let after = lagrangian_value(&m, u.view(), step.v.view(), state.lambda.view(), state.rho);
        if step.beta_used > 0.0 {
            assert!(after < before);
        } else {
            assert_eq!(step.v.as_array(), v.as_array());
        }
        assert!(gram_residual(step.v.view()) < 1e-10);
    }
}

#[test]
fn multipliers_stay_nonnegative() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let lambda = random(&mut rng, 3, 10, 0.0);
    let v = random(&mut rng, 3, 10, -1.0);
    for t in 1..5 {
        let next = update_multipliers(lambda.view(), v.view(), 100.0, t);
        assert!(next.iter().all(|&x| x >= 0.0));
    }
}

#[test]
fn svd_start_is_orthonormal_with_positive_mass() {
    let (m, _) = blocks(4);
    let v = init_v_svd(&m, 3).unwrap();
    assert!(gram_residual(v.view()) < 1e-10);
    for row in v.as_array().axis_iter(Axis(0)) {
        let pos: f64 = row.iter().filter(|&&x| x > 0.0).map(|x| x * x).sum();
        let neg: f64 = row.iter().filter(|&&x| x < 0.0).map(|x| x * x).sum();
        assert!(pos >= neg);
    }
}

#[test]
fn recovers_separated_blocks() {
    let (m, labels) = blocks(5);
    let out = onp_mf(&m, 3, &OnpMfConfig::default()).unwrap();
    assert!(out.converged);
    assert_eq!(accuracy(&out.partition, &labels).unwrap(), 1.0);
    let f = &out.factorization;
    assert!(f.u.iter().all(|&x| x >= 0.0) && f.v.iter().all(|&x| x >= 0.0));
    for row in out.trace.rows.iter() {
        assert!(row.orth_residual < 1e-8, "iteration {}: {}", row.iteration, row.orth_residual);
    }
}

#[test]
fn runs_are_bitwise_repeatable() {
    let (m, _) = blocks(6);
    let cfg = OnpMfConfig::default();
    let x = onp_mf(&m, 3, &cfg).unwrap();
    let y = onp_mf(&m, 3, &cfg).unwrap();
    assert_eq!(x.v_unclamped, y.v_unclamped);
    assert_eq!(x.factorization.u, y.factorization.u);
    assert!(x.trace.same_numerics(&y.trace));
}

#[test]
fn final_u_satisfies_nnls_kkt() {
    let (m, _) = blocks(7);
    let out = onp_mf(&m, 3, &OnpMfConfig::default()).unwrap();
    let v = &out.factorization.v;
    let g = v.dot(&v.t());
    let rhs = m.mul_transposed(v.view());
    for (r, urow) in out.factorization.u.axis_iter(Axis(0)).enumerate() {
        let b: Vec<f64> = rhs.row(r).to_vec();
        assert!(kkt_residual(&g, &b, &urow.to_vec()) < 1e-8);
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let (m, _) = blocks(8);
    for cfg in [
        OnpMfConfig { growth: 1.0, ..Default::default() },
        OnpMfConfig { rho0: 0.0, ..Default::default() },
        OnpMfConfig { beta_down: 1.5, ..Default::default() },
        OnpMfConfig { beta_cap: 0.0, ..Default::default() },
    ] {
        assert!(onp_mf(&m, 3, &cfg).is_err());
    }
    assert!(onp_mf(&m, 13, &OnpMfConfig::default()).is_err());
}
