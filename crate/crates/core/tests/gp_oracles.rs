use std::f64::consts::PI;

use catbox_core::bench::{mixed_wrap, FnKind};
use catbox_core::gp::{mll_training, optimize_training, spectral_init, TrainingSet};
use catbox_core::kernels::{gram, gram_noiseless, k_composite, GsmComponent, NOISE_FLOOR};
use catbox_core::{CategoricalVar, ContinuousVar, GpModel, HyperBudget, KernelParams, NormalizedPoint, SearchSpace};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mixed_space() -> SearchSpace {
    SearchSpace::new(
        vec![CategoricalVar::indexed("a", 3), CategoricalVar::indexed("b", 4)],
        vec![ContinuousVar::new("x", 0.0, 1.0), ContinuousVar::new("z", -2.0, 2.0)],
    )
    .unwrap()
}

fn short_scale(n_cat: usize, n_con: usize, ls: f64, noise: f64) -> KernelParams {
    let mut p = KernelParams::default_for(n_cat, n_con, 1, 1);
    p.gsm[0].var = vec![1.0 / (4.0 * PI * PI * ls * ls); n_con];
    p.csm[0].gamma = vec![1.0 / (2.0 * PI * ls); n_con];
    p.noise_var = noise;
    p
}

/// Inverse of a 3x3 matrix by cofactors.
fn inverse3(m: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let c = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let cof = [
        [c(1, 2, 1, 2), -c(1, 2, 0, 2), c(1, 2, 0, 1)],
        [-c(0, 2, 1, 2), c(0, 2, 0, 2), -c(0, 2, 0, 1)],
        [c(0, 1, 1, 2), -c(0, 1, 0, 2), c(0, 1, 0, 1)],
    ];
    let det = m[0][0] * cof[0][0] + m[0][1] * cof[0][1] + m[0][2] * cof[0][2];
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            inv[i][j] = cof[j][i] / det;
        }
    }
    inv
}

#[test]
fn three_point_posterior_matches_explicit_inverse() {
    let pts = vec![
        NormalizedPoint::new(vec![0, 1], vec![0.1, 0.8]),
        NormalizedPoint::new(vec![2, 1], vec![0.4, 0.3]),
        NormalizedPoint::new(vec![0, 3], vec![0.9, 0.5]),
    ];
    let mut params = short_scale(2, 2, 0.3, 0.05);
    params.lambda = 0.3;
    let model = GpModel::fit_training(TrainingSet::from_normalized(pts.clone(), &[1.0, -0.5, 2.5]), params.clone()).unwrap();
    let diag = params.noise_var + model.jitter();
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = k_composite(&params, &pts[i], &pts[j]) + if i == j { diag } else { 0.0 };
        }
    }
    let inv = inverse3(k);
    let y = &model.train.y;
    let x = NormalizedPoint::new(vec![1, 1], vec![0.35, 0.45]);
    let ks: Vec<f64> = pts.iter().map(|p| k_composite(&params, p, &x)).collect();
    let (mut mean, mut quad) = (0.0, 0.0);
    for i in 0..3 {
        for j in 0..3 {
            mean += ks[i] * inv[i][j] * y[j];
            quad += ks[i] * inv[i][j] * ks[j];
        }
    }
    let var = k_composite(&params, &x, &x) - quad;
    let post = model.predict_normalized(&x);
    assert!((post.mean - mean).abs() < 1e-10, "{} vs {mean}", post.mean);
    assert!((post.var - var).abs() < 1e-10, "{} vs {var}", post.var);
}

#[test]
fn mll_matches_dense_gaussian_log_density() {
    let space = mixed_space();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let pts: Vec<NormalizedPoint> = (0..5).map(|_| space.sample_normalized(&mut rng)).collect();
    let raw: Vec<f64> = (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let params = short_scale(2, 2, 0.25, 0.01);
    let model = GpModel::fit_training(TrainingSet::from_normalized(pts.clone(), &raw), params.clone()).unwrap();
    let k = gram_noiseless(&params, &pts).unwrap() + DMatrix::identity(5, 5) * (params.noise_var + model.jitter());
    let y = DVector::from_column_slice(&model.train.y);
    let det = k.clone().lu().determinant();
    let quad = (y.transpose() * k.try_inverse().unwrap() * &y)[0];
    let oracle = -0.5 * quad - 0.5 * det.ln() - 2.5 * (2.0 * PI).ln();
    assert!((model.log_marginal_likelihood() - oracle).abs() < 1e-8);
}

#[test]
fn ackley_training_points_are_interpolated() {
    let obj = mixed_wrap(FnKind::Ackley, 0, 2, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let pts: Vec<NormalizedPoint> = (0..30).map(|_| obj.space.sample_normalized(&mut rng)).collect();
    let y: Vec<f64> = pts.iter().map(|p| obj.value(&obj.space.denormalize(p)).unwrap()).collect();
    let model = GpModel::fit_training(TrainingSet::from_normalized(pts.clone(), &y), short_scale(0, 2, 0.1, 1e-8)).unwrap();
    for (p, ys) in pts.iter().zip(&model.train.y) {
        assert!((model.predict_normalized(p).mean - ys).abs() < 1e-4);
    }
}

#[test]
fn fifty_point_jittered_gram_is_nonnegative() {
    let space = mixed_space();
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    for _ in 0..5 {
        let pts: Vec<NormalizedPoint> = (0..50).map(|_| space.sample_normalized(&mut rng)).collect();
        let mut p = short_scale(2, 2, rng.gen_range(0.05..1.0), NOISE_FLOOR);
        p.lambda = rng.gen_range(0.0..1.0);
        p.hamming.lengthscales = vec![rng.gen_range(0.0..3.0), rng.gen_range(0.0..3.0)];
        let k = gram(&p, &pts, 1e-8).unwrap();
        assert!(SymmetricEigen::new(k).eigenvalues.min() >= 0.0);
    }
}

fn generated_training_set(seed: u64) -> (TrainingSet, KernelParams) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gen = KernelParams::default_for(0, 1, 1, 0);
    let ls = 0.15;
    gen.gsm[0] = GsmComponent { weight: 1.0, mean: vec![1.5], var: vec![1.0 / (4.0 * PI * PI * ls * ls)] };
    gen.noise_var = 0.01;
    let pts: Vec<NormalizedPoint> = (0..60).map(|_| NormalizedPoint::new(vec![], vec![rng.gen_range(0.0..1.0)])).collect();
    let k = gram(&gen, &pts, 0.0).unwrap();
    let l = k.cholesky().unwrap().l();
    let z = DVector::from_iterator(60, (0..60).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)));
    let y = l * z;
    (TrainingSet::from_normalized(pts, y.as_slice()), gen)
}

#[test]
fn refit_recovers_generating_likelihood() {
    for seed in 0..3 {
        let (train, gen) = generated_training_set(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let init = spectral_init(&train, 0, 1, 1, 0, &mut rng);
        let fit = optimize_training(&train, &init, &HyperBudget::default(), &mut rng);
        let at_gen = mll_training(&train, &gen).unwrap();
        assert!(fit.mll >= at_gen - 2.0, "seed {seed}: fitted {} vs generating {at_gen}", fit.mll);
    }
}

#[test]
fn single_restart_from_an_optimum_stays_put() {
    let (train, _) = generated_training_set(7);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let init = spectral_init(&train, 0, 1, 1, 0, &mut rng);
    let long = HyperBudget { restarts: 1, max_iters: 2000, ..HyperBudget::default() };
    let optimum = optimize_training(&train, &init, &long, &mut rng);
    let one = HyperBudget { restarts: 1, ..HyperBudget::default() };
    let again = optimize_training(&train, &optimum.params, &one, &mut rng);
    assert!((again.mll - optimum.mll).abs() < 1e-6, "{} vs {}", again.mll, optimum.mll);
    assert!((again.init_mll.unwrap() - optimum.mll).abs() < 1e-9);
}

