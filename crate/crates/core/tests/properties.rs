//! Property tests: estimator identities and invariances over randomized
//! fixtures, and the variance-dominance sweep.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use randx_core::{
    ate_diff_means, ate_post_stratified, ate_regression, ate_regression_interacted, pool_center,
    reweight, stratum_indicator_dataset, var_diff, variance_gap, Dataset, PopulationParams,
    PropensitySpec, StratifiedDataset,
};

/// Random dataset with heterogeneous slopes and mild noise.
fn random_dataset(seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = rng.gen_range(1..=3usize);
    let n_t = rng.gen_range(p + 2..=20usize);
    let n_c = rng.gen_range(p + 2..=20usize);
    let n = n_t + n_c;
    let beta_t: Vec<f64> = (0..p).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let beta_c: Vec<f64> = (0..p).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let mut xs = Vec::with_capacity(n * p);
    let mut y = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    for i in 0..n {
        let treated = i < n_t;
        let mut lin = if treated { 1.0 } else { -0.5 };
        for j in 0..p {
            let x: f64 = rng.gen_range(-3.0..3.0);
            lin += x * if treated { beta_t[j] } else { beta_c[j] };
            xs.push(x);
        }
        y.push(lin + rng.gen_range(-0.8..0.8));
        w.push(f64::from(u8::from(treated)));
    }
    Dataset::new(y, w, DMatrix::from_row_slice(n, p, &xs)).unwrap()
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn interacted_regression_equals_intercept_difference(seed in 0u64..10_000) {
        let d = random_dataset(seed);
        let a = ate_regression(&d).unwrap();
        let b = ate_regression_interacted(&d).unwrap();
        prop_assert!(rel_close(a.point, b.point, 1e-10), "{} vs {}", a.point, b.point);
    }

    #[test]
    fn regression_point_is_location_invariant(seed in 0u64..10_000, shift in -50.0f64..50.0) {
        let d = random_dataset(seed);
        let base = ate_regression(&d).unwrap();
        let mut x = d.x().clone();
        for j in 0..x.ncols() {
            for v in x.column_mut(j).iter_mut() {
                *v += shift * (j as f64 + 1.0);
            }
        }
        let shifted = Dataset::new(
            d.y().iter().copied().collect(),
            d.treated_flags().iter().map(|&t| f64::from(t)).collect(),
            x,
        ).unwrap();
        let moved = ate_regression(&shifted).unwrap();
        prop_assert!((base.point - moved.point).abs() < 1e-10);
        prop_assert!((base.se.unwrap() - moved.se.unwrap()).abs() < 1e-10);
    }

    #[test]
    fn centering_leaves_pooled_mean_zero(seed in 0u64..10_000) {
        let d = random_dataset(seed);
        let centered = pool_center(&d);
        let mean = centered.dataset.pooled_covariate_mean();
        for j in 0..mean.len() {
            prop_assert!(mean[j].abs() < 1e-10);
        }
    }
}

#[test]
fn variance_gap_nonnegative_over_random_populations() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xD1CE);
    for _ in 0..1000 {
        let p = rng.gen_range(1..=4usize);
        // PSD Σ via AᵀA
        let a = DMatrix::from_fn(p, p, |_, _| rng.gen_range(-1.5..1.5));
        let sigma = a.transpose() * &a;
        let params = PopulationParams {
            beta0_t: rng.gen_range(-2.0..2.0),
            beta0_c: rng.gen_range(-2.0..2.0),
            beta_t: (0..p).map(|_| rng.gen_range(-3.0..3.0)).collect(),
            beta_c: (0..p).map(|_| rng.gen_range(-3.0..3.0)).collect(),
            sigma2_t: rng.gen_range(0.0..4.0),
            sigma2_c: rng.gen_range(0.0..4.0),
            varf_t: rng.gen_range(0.0..1.0),
            varf_c: rng.gen_range(0.0..1.0),
            sigma_x: (0..p)
                .map(|i| (0..p).map(|j| sigma[(i, j)]).collect())
                .collect(),
            n_t: rng.gen_range(5..400usize),
            n_c: rng.gen_range(5..400usize),
            mu_x: None,
        };
        let gap = variance_gap(&params).unwrap();
        assert!(gap >= -1e-12, "gap {gap} for {params:?}");
    }
}

#[test]
fn variance_gap_equality_certificate_both_directions() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xBEEF);
    for _ in 0..50 {
        let p = rng.gen_range(1..=3usize);
        let a = DMatrix::from_fn(p, p, |_, _| rng.gen_range(-1.0..1.0));
        // strictly PD so that a nonzero quadratic form cannot vanish
        let sigma = a.transpose() * &a + DMatrix::identity(p, p) * 0.05;
        let n_t = rng.gen_range(5..200usize);
        let n_c = rng.gen_range(5..200usize);
        let beta_t: Vec<f64> = (0..p).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let ratio = n_c as f64 / n_t as f64;
        let exact: Vec<f64> = beta_t.iter().map(|b| -ratio * b).collect();
        let mut params = PopulationParams {
            beta0_t: 0.0,
            beta0_c: 0.0,
            beta_t: beta_t.clone(),
            beta_c: exact,
            sigma2_t: 1.0,
            sigma2_c: 1.0,
            varf_t: 0.0,
            varf_c: 0.0,
            sigma_x: (0..p)
                .map(|i| (0..p).map(|j| sigma[(i, j)]).collect())
                .collect(),
            n_t,
            n_c,
            mu_x: None,
        };
        let gap = variance_gap(&params).unwrap();
        assert!(
            gap.abs() <= 1e-12 * var_diff(&params).unwrap(),
            "equality case violated: {gap}"
        );

        // perturb away from the equality direction → strictly positive gap
        params.beta_c[0] += 0.25;
        let gap = variance_gap(&params).unwrap();
        assert!(gap > 1e-9, "perturbed case should have positive gap: {gap}");
    }
}

#[test]
fn reweight_round_trip_is_bit_exact_on_dyadic_probabilities() {
    // Exact scaling needs power-of-two weights, so treated units get
    // π ∈ {1/2, 1/4, …} and control units π ∈ {1/2, 3/4, …}.
    let mut rng = ChaCha8Rng::seed_from_u64(0xF00D);
    for seed in 0..20u64 {
        let d = random_dataset(seed);
        let pis: Vec<f64> = d
            .treated_flags()
            .iter()
            .map(|&t| {
                let denom = f64::from(2u32.pow(rng.gen_range(1..5)));
                if t {
                    1.0 / denom
                } else {
                    1.0 - 1.0 / denom
                }
            })
            .collect();
        let rw = reweight(&d, &PropensitySpec::PerUnit(pis)).unwrap();
        let mut y = rw.dataset.y().clone();
        for (i, w) in rw.weights.iter().enumerate() {
            y[i] /= w;
        }
        assert_eq!(&y, d.y(), "seed {seed}");
    }
}

#[test]
fn post_stratified_equals_regression_on_indicator_designs() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5735);
    for case in 0..25 {
        let strata = rng.gen_range(2..=4usize);
        let mut y = Vec::new();
        let mut w = Vec::new();
        let mut labels = Vec::new();
        for s in 0..strata {
            let treated = rng.gen_range(1..=4usize);
            let control = rng.gen_range(1..=4usize);
            for _ in 0..treated {
                y.push(rng.gen_range(-5.0..5.0) + s as f64);
                w.push(1.0);
                labels.push(s);
            }
            for _ in 0..control {
                y.push(rng.gen_range(-5.0..5.0));
                w.push(0.0);
                labels.push(s);
            }
        }
        let sd = StratifiedDataset::new(y, w, labels, None).unwrap();
        let ps = ate_post_stratified(&sd).unwrap();
        let reg = ate_regression(&stratum_indicator_dataset(&sd).unwrap()).unwrap();
        assert!(
            rel_close(ps.point, reg.point, 1e-10),
            "case {case}: {} vs {}",
            ps.point,
            reg.point
        );
    }
}

#[test]
fn predictions_at_arm_means_reproduce_diff_means() {
    use randx_core::{fit_ols, predict_at};
    for seed in 100..120u64 {
        let d = random_dataset(seed);
        let flags = d.treated_flags().to_vec();
        let split = |treated: bool| {
            let rows: Vec<usize> = (0..d.n()).filter(|&i| flags[i] == treated).collect();
            let y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| d.y()[i]));
            let x = DMatrix::from_fn(rows.len(), d.p(), |r, c| d.x()[(rows[r], c)]);
            (y, x)
        };
        let (yt, xt) = split(true);
        let (yc, xc) = split(false);
        let fit_t = fit_ols(&xt, &yt).unwrap();
        let fit_c = fit_ols(&xc, &yc).unwrap();
        let mt = DVector::from_iterator(d.p(), xt.column_iter().map(|c| c.mean()));
        let mc = DVector::from_iterator(d.p(), xc.column_iter().map(|c| c.mean()));
        let lhs = predict_at(&fit_t, &mt).unwrap() - predict_at(&fit_c, &mc).unwrap();
        let rhs = ate_diff_means(&d).unwrap().point;
        assert!(rel_close(lhs, rhs, 1e-10), "seed {seed}: {lhs} vs {rhs}");
    }
}
