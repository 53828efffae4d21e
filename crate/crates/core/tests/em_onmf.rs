use nalgebra::DMatrix;
use ndarray::{array, Array2};
use onmfkit::em_onmf::{
    assign_clusters, em_onmf, onmf_objective, optimal_coefficients, update_centroids, EmInit, EmOnmfOptions,
};
use onmfkit::{CscMatrix, DataMatrix, Partition};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sigma1_sq(m: &Array2<f64>, cols: &[usize]) -> f64 {
    if cols.is_empty() {
        return 0.0;
    }
    let sub = DMatrix::from_fn(m.nrows(), cols.len(), |i, j| m[[i, cols[j]]]);
    sub.singular_values().max().powi(2)
}

/// `||M||^2 - sum_i sigma_1(M_i)^2` with nalgebra singular values.
fn reference_objective(m: &Array2<f64>, assignment: &[usize], k: usize) -> f64 {
    let total: f64 = m.iter().map(|x| x * x).sum();
    (0..k)
        .map(|c| {
            let cols: Vec<usize> = (0..assignment.len()).filter(|&j| assignment[j] == c).collect();
            sigma1_sq(m, &cols)
        })
        .fold(total, |acc, s| acc - s)
}

fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
    Array2::from_shape_fn((r, c), |_| rng.random::<f64>())
}

#[test]
fn objective_never_increases() {
    for seed in 0..40 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = DataMatrix::dense(random(&mut rng, 10, 40)).unwrap();
        let opts = EmOnmfOptions { max_iter: 500, seed };
        let out = em_onmf(&m, 4, EmInit::RandomColumns, &opts).unwrap();
        for w in out.objectives.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12, "seed {seed}: {} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn closed_form_objective_matches_reference_and_factors() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..30 {
        let a = random(&mut rng, 5, 9);
        let assignment: Vec<usize> = (0..9).map(|j| if j < 3 { j } else { rng.random_range(0..3) }).collect();
        let m = DataMatrix::dense(a.clone()).unwrap();
        let p = Partition::new(assignment.clone(), 3).unwrap();
        let closed = onmf_objective(&m, &p).unwrap();
        assert!((closed - reference_objective(&a, &assignment, 3)).abs() < 1e-10);

        let c = update_centroids(&m, &p).unwrap().centroids;
        let v = optimal_coefficients(&m, &c, &p);
        let fit: f64 = (&a - &c.as_array().dot(&v)).iter().map(|x| x * x).sum();
        assert!((fit - closed).abs() < 1e-10);
    }
}

#[test]
fn converged_partition_is_assignment_stable() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let m = DataMatrix::dense(random(&mut rng, 6, 30)).unwrap();
        let out = em_onmf(&m, 3, EmInit::RandomColumns, &EmOnmfOptions { max_iter: 500, seed }).unwrap();
        assert!(out.converged);
        let again = assign_clusters(&m, &update_centroids(&m, &out.partition).unwrap().centroids);
        assert_eq!(again.assignment(), out.partition.assignment());
    }
}

#[test]
fn global_optimum_is_a_fixed_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..15 {
        let n = rng.random_range(3..=9);
        let a = random(&mut rng, 4, n);
        let m = DataMatrix::dense(a.clone()).unwrap();
        let mut best = (f64::INFINITY, vec![]);
        for mask in 1u32..(1 << (n - 1)) {
            let asg: Vec<usize> = (0..n).map(|j| (mask >> j & 1) as usize).collect();
            let o = reference_objective(&a, &asg, 2);
            if o < best.0 {
                best = (o, asg);
            }
        }
        let init = Partition::new(best.1.clone(), 2).unwrap();
        let out = em_onmf(&m, 2, EmInit::Partition(init), &EmOnmfOptions::default()).unwrap();
        let reached = onmf_objective(&m, &out.partition).unwrap();
        assert!((reached - best.0).abs() < 1e-9);
    }
}

/// A fixed point of the alternation need not survive a single-column move:
/// moving column 2 re-fits both centroids and lowers the objective, although
/// column 2 still prefers its own centroid.
#[test]
fn fixed_point_need_not_be_single_move_optimal() {
    let a = array![[3.0, 0.0, 1.0], [5.0, 3.0, 3.0]];
    let m = DataMatrix::dense(a.clone()).unwrap();
    let init = Partition::new(vec![0, 1, 1], 2).unwrap();
    let out = em_onmf(&m, 2, EmInit::Partition(init), &EmOnmfOptions::default()).unwrap();
    assert!(out.converged);
    assert_eq!(out.partition.assignment(), &[0, 1, 1]);
    let stuck = reference_objective(&a, &[0, 1, 1], 2);
    let moved = reference_objective(&a, &[0, 1, 0], 2);
    assert!((stuck - 0.4861).abs() < 1e-3 && (moved - 0.3667).abs() < 1e-3);
}

#[test]
fn scaling_columns_keeps_directions_and_scales_objective() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = random(&mut rng, 5, 20);
    let m = DataMatrix::dense(a.clone()).unwrap();
    let m3 = DataMatrix::dense(&a * 3.0).unwrap();
    let opts = EmOnmfOptions { max_iter: 500, seed: 9 };
    let x = em_onmf(&m, 3, EmInit::RandomColumns, &opts).unwrap();
    let y = em_onmf(&m3, 3, EmInit::RandomColumns, &opts).unwrap();
    assert_eq!(x.partition.assignment(), y.partition.assignment());
    let (ox, oy) = (x.objectives.last().unwrap(), y.objectives.last().unwrap());
    assert!((oy - 9.0 * ox).abs() < 1e-9 * (1.0 + oy));
}

#[test]
fn sparse_and_dense_inputs_give_the_same_run() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a = Array2::from_shape_fn((8, 25), |_| if rng.random::<f64>() < 0.4 { rng.random() } else { 0.0 });
    let dense = DataMatrix::dense(a.clone()).unwrap();
    let sparse = DataMatrix::sparse(CscMatrix::from_dense(a.view())).unwrap();
    let opts = EmOnmfOptions { max_iter: 500, seed: 5 };
    let x = em_onmf(&dense, 3, EmInit::RandomColumns, &opts).unwrap();
    let y = em_onmf(&sparse, 3, EmInit::RandomColumns, &opts).unwrap();
    assert_eq!(x.partition.assignment(), y.partition.assignment());
    assert!((x.objectives.last().unwrap() - y.objectives.last().unwrap()).abs() < 1e-10);
}

#[test]
fn factors_satisfy_the_constraints() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let m = DataMatrix::dense(random(&mut rng, 7, 30)).unwrap();
    let out = em_onmf(&m, 4, EmInit::RandomColumns, &EmOnmfOptions::default()).unwrap();
    let f = &out.factorization;
    assert!(f.u.iter().all(|&x| x >= 0.0) && f.v.iter().all(|&x| x >= 0.0));
    for col in f.u.columns() {
        assert!((col.dot(&col) - 1.0).abs() < 1e-12);
    }
    for col in f.v.columns() {
        assert!(col.iter().filter(|&&x| x > 0.0).count() <= 1);
    }
    let fit = (&m.to_dense() - &f.u.dot(&f.v)).iter().map(|x| x * x).sum::<f64>();
    assert!((fit - f.objective).abs() < 1e-9);
}

#[test]
fn bad_inputs_are_rejected() {
    let m = DataMatrix::dense(array![[1.0, 2.0], [0.0, 1.0]]).unwrap();
    assert!(em_onmf(&m, 0, EmInit::RandomColumns, &EmOnmfOptions::default()).is_err());
    assert!(em_onmf(&m, 3, EmInit::RandomColumns, &EmOnmfOptions::default()).is_err());
    assert!(update_centroids(&m, &Partition::new(vec![0, 1, 0], 2).unwrap()).is_err());
}
