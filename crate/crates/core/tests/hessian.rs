//! Reduced-Hessian operator: algebraic identities, agreement between the
//! matrix-free pipeline and the densified operator, and gradient consistency
//! of the underlying tracking functional.

use rand::Rng;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};
use stokes_control::dense::Dense;
use stokes_control::hessian::{b_h_dense, compute_grams, ControlParams, HessianOp};
use stokes_control::hierarchy::Level;
use stokes_control::stokes::Strategy;
use stokes_control::targets::Targets;
use stokes_control::Error;

fn rand_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect()
}

#[test]
fn pure_regularization_is_exact_scaling() {
    let level = Level::build(2, Strategy::ZeroMeanAugmented).unwrap();
    let params = ControlParams::new(0.37, 0.0, 0.0).unwrap();
    let hop = HessianOp::new(&level, params).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let f = rand_vec(level.p_dim(), &mut rng);
    let out = hop.apply(&f).unwrap();
    for i in 0..f.len() {
        assert_eq!(out[i], 0.37 * f[i]);
    }
    assert_eq!(hop.apply_count(), 1);
}

#[test]
fn operator_is_self_adjoint_and_coercive() {
    let level = Level::build(3, Strategy::ZeroMeanAugmented).unwrap();
    let mf = &level.fe.mf;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (beta, gu, gp) in [(1e-4, 1.0, 0.0), (1e-3, 0.0, 1.0), (1e-5, 1.0, 1e-3)] {
        let params = ControlParams::new(beta, gu, gp).unwrap();
        let hop = HessianOp::new(&level, params).unwrap();
        for _ in 0..5 {
            let f = rand_vec(level.p_dim(), &mut rng);
            let g = rand_vec(level.p_dim(), &mut rng);
            let hf = hop.apply(&f).unwrap();
            let hg = hop.apply(&g).unwrap();
            let a = mf.inner(&hf, &g);
            let b = mf.inner(&f, &hg);
            assert!((a - b).abs() <= 1e-10 * a.abs().max(b.abs()));
            let rayleigh = mf.inner(&hf, &f) / mf.inner(&f, &f);
            assert!(rayleigh >= beta, "rayleigh {rayleigh} below {beta}");
        }
    }
}

#[test]
fn matrix_free_apply_matches_densified_operator() {
    for strategy in [Strategy::ZeroMeanAugmented, Strategy::PinnedNode] {
        let level = Level::build(2, strategy).unwrap();
        let grams = compute_grams(&level);
        let params = ControlParams::new(1e-4, 1.0, 1e-2).unwrap();
        let hop = HessianOp::new(&level, params).unwrap();
        let (bh, mf_dense) = hop.materialize_dense(&grams).unwrap();
        let p = level.p_dim();
        assert!(bh.symmetry_defect() <= 1e-13 * bh.max_abs());

        // Column j of B_H must equal M_f H e_j.
        let mut max_err: f64 = 0.0;
        for j in 0..p {
            let mut e = vec![0.0; p];
            e[j] = 1.0;
            let he = hop.apply(&e).unwrap();
            let col = mf_dense.matvec(&he);
            for i in 0..p {
                max_err = max_err.max((bh.at(i, j) - col[i]).abs());
            }
        }
        assert!(
            max_err <= 1e-11 * bh.max_abs(),
            "{strategy:?}: defect {max_err}"
        );
    }
}

#[test]
fn apply_is_linear() {
    let level = Level::build(2, Strategy::ZeroMeanAugmented).unwrap();
    let params = ControlParams::new(1e-4, 1.0, 1.0).unwrap();
    let hop = HessianOp::new(&level, params).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let f = rand_vec(level.p_dim(), &mut rng);
    let g = rand_vec(level.p_dim(), &mut rng);
    let alpha = -0.83;
    let fg: Vec<f64> = f.iter().zip(&g).map(|(a, b)| alpha * a + b).collect();
    let lhs = hop.apply(&fg).unwrap();
    let hf = hop.apply(&f).unwrap();
    let hg = hop.apply(&g).unwrap();
    let scale = lhs.iter().map(|x| x.abs()).fold(0.0, f64::max);
    for i in 0..f.len() {
        assert!((lhs[i] - alpha * hf[i] - hg[i]).abs() <= 1e-12 * scale);
    }
}

#[test]
fn rhs_is_independent_of_the_regularization_weight() {
    let level = Level::build(2, Strategy::ZeroMeanAugmented).unwrap();
    let targets = level.targets();
    let p1 = ControlParams::new(1e-3, 1.0, 1e-2).unwrap();
    let p2 = ControlParams::new(1e-8, 1.0, 1e-2).unwrap();
    let b1 = HessianOp::new(&level, p1).unwrap().build_rhs(targets).unwrap();
    let b2 = HessianOp::new(&level, p2).unwrap().build_rhs(targets).unwrap();
    assert_eq!(b1, b2);
}

#[test]
fn rhs_of_zero_targets_vanishes() {
    let level = Level::build(2, Strategy::ZeroMeanAugmented).unwrap();
    let params = ControlParams::new(1e-4, 1.0, 1.0).unwrap();
    let hop = HessianOp::new(&level, params).unwrap();
    let zero = Targets {
        udh: vec![0.0; level.mesh.n],
        pdh: vec![0.0; level.mesh.m],
    };
    let rhs = hop.build_rhs(&zero).unwrap();
    assert!(rhs.iter().all(|&x| x == 0.0));
}

// First-order check of the tracking functional the operator is the Hessian
// of: (J(f+t d) - J(f-t d)) / 2t ~ (H f - b, d) in the control mass product.
#[test]
fn gradient_matches_finite_differences_of_the_functional() {
    let level = Level::build(2, Strategy::ZeroMeanAugmented).unwrap();
    let params = ControlParams::new(1e-3, 1.0, 1e-2).unwrap();
    let hop = HessianOp::new(&level, params).unwrap();
    let targets = level.targets();
    let mf = &level.fe.mf;
    let mu = &level.fe.mu;
    let mp = &level.fe.mp;

    let j = |f: &[f64]| -> f64 {
        let du: Vec<f64> = level
            .apply_u(f)
            .iter()
            .zip(&targets.udh)
            .map(|(a, b)| a - b)
            .collect();
        let dp: Vec<f64> = level
            .apply_p(f)
            .iter()
            .zip(&targets.pdh)
            .map(|(a, b)| a - b)
            .collect();
        0.5 * params.gamma_u * mu.inner(&du, &du)
            + 0.5 * params.gamma_p * mp.inner(&dp, &dp)
            + 0.5 * params.beta * mf.inner(f, f)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let f = rand_vec(level.p_dim(), &mut rng);
    let d = rand_vec(level.p_dim(), &mut rng);
    let hf = hop.apply(&f).unwrap();
    let b = hop.build_rhs(targets).unwrap();
    let grad: Vec<f64> = hf.iter().zip(&b).map(|(a, c)| a - c).collect();
    let directional = mf.inner(&grad, &d);

    let t = 1e-5;
    let fp: Vec<f64> = f.iter().zip(&d).map(|(a, c)| a + t * c).collect();
    let fm: Vec<f64> = f.iter().zip(&d).map(|(a, c)| a - t * c).collect();
    let fd = (j(&fp) - j(&fm)) / (2.0 * t);
    assert!(
        (fd - directional).abs() <= 1e-6 * directional.abs(),
        "fd {fd} vs directional {directional}"
    );
}

#[test]
fn dimension_mismatch_is_reported() {
    let level = Level::build(2, Strategy::ZeroMeanAugmented).unwrap();
    let params = ControlParams::new(1e-4, 1.0, 0.0).unwrap();
    let hop = HessianOp::new(&level, params).unwrap();
    match hop.apply(&vec![0.0; 7]) {
        Err(Error::Dim { expected, got, .. }) => {
            assert_eq!(expected, level.p_dim());
            assert_eq!(got, 7);
        }
        other => panic!("expected dimension error, got {other:?}"),
    }
}

#[test]
fn densification_is_guarded_above_the_size_limit() {
    let level = Level::build(6, Strategy::ZeroMeanAugmented).unwrap();
    let params = ControlParams::new(1e-4, 1.0, 0.0).unwrap();
    let dummy = stokes_control::hierarchy::Grams {
        xu: Dense::zeros(1, 1),
        xp: Dense::zeros(1, 1),
    };
    match b_h_dense(&level, &dummy, params) {
        Err(Error::SizeGuard { size, guard }) => {
            assert_eq!(size, level.p_dim());
            assert_eq!(guard, stokes_control::DENSE_GUARD);
        }
        other => panic!("expected size guard, got {other:?}"),
    }
}

#[test]
fn parameter_validation_rejects_bad_values() {
    assert!(ControlParams::new(0.0, 1.0, 0.0).is_err());
    assert!(ControlParams::new(-1e-4, 1.0, 0.0).is_err());
    assert!(ControlParams::new(f64::NAN, 1.0, 0.0).is_err());
    assert!(ControlParams::new(1e-4, -1.0, 0.0).is_err());
    assert!(ControlParams::new(1e-4, 0.0, -1e-9).is_err());
    assert!(ControlParams::new(1e-4, 0.0, 0.0).is_ok());
}
