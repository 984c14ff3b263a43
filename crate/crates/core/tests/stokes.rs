//! Saddle-point solver contracts: residuals, gauge handling, agreement of the
//! two pressure strategies, and an analytic-solution convergence spot check.

use rand::Rng;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};
use stokes_control::assemble::assemble;
use stokes_control::dense::Dense;
use stokes_control::mesh::MeshLevel;
use stokes_control::recovery::{embed_interior, pressure_error_l2, velocity_error_l2};
use stokes_control::stokes::{SparseLu, StokesSystem, Strategy};
use stokes_control::targets::{mms_force, p_d, u_d, velocity_moments};

fn rand_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn residuals_are_tiny_for_random_loads() {
    let lv = MeshLevel::new(3);
    let fe = assemble(&lv);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for strategy in [Strategy::ZeroMeanAugmented, Strategy::PinnedNode] {
        let sys = StokesSystem::factorize(&lv, &fe, strategy).unwrap();
        for _ in 0..3 {
            let bu = rand_vec(lv.n, &mut rng);
            let bp = rand_vec(lv.m, &mut rng);
            let (u, p) = sys.solve(&bu, &bp);
            let r = sys.residual(&bu, &bp, &u, &p);
            assert!(r <= 1e-11, "{strategy:?}: residual {r}");
        }
    }
}

#[test]
fn pressure_gauges_hold_exactly() {
    let lv = MeshLevel::new(3);
    let fe = assemble(&lv);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let bu = rand_vec(lv.n, &mut rng);
    let bp = vec![0.0; lv.m];

    let zm = StokesSystem::factorize(&lv, &fe, Strategy::ZeroMeanAugmented).unwrap();
    let (_, p) = zm.solve(&bu, &bp);
    let mean: f64 = fe.mean_vector.iter().zip(&p).map(|(c, v)| c * v).sum();
    assert!(mean.abs() <= 1e-12 * norm(&p));

    let pn = StokesSystem::factorize(&lv, &fe, Strategy::PinnedNode).unwrap();
    let (_, p) = pn.solve(&bu, &bp);
    assert_eq!(p[0], 0.0);
}

#[test]
fn strategies_agree_up_to_the_pressure_gauge() {
    let lv = MeshLevel::new(3);
    let fe = assemble(&lv);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let bu = rand_vec(lv.n, &mut rng);
    let bp = vec![0.0; lv.m];

    let zm = StokesSystem::factorize(&lv, &fe, Strategy::ZeroMeanAugmented).unwrap();
    let pn = StokesSystem::factorize(&lv, &fe, Strategy::PinnedNode).unwrap();
    let (u1, p1) = zm.solve(&bu, &bp);
    let (u2, p2) = pn.solve(&bu, &bp);

    let du: f64 = u1.iter().zip(&u2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(du <= 1e-10 * norm(&u1), "velocities differ: {du}");

    // Shift the pinned pressure to zero weighted mean; it must then coincide
    // with the zero-mean solution.
    let mean: f64 = fe.mean_vector.iter().zip(&p2).map(|(c, v)| c * v).sum();
    let dp: f64 = p1
        .iter()
        .zip(&p2)
        .map(|(a, b)| (a - (b - mean)).abs())
        .fold(0.0, f64::max);
    assert!(dp <= 1e-9 * norm(&p1), "gauged pressures differ: {dp}");
}

#[test]
fn zero_load_gives_zero_solution() {
    let lv = MeshLevel::new(2);
    let fe = assemble(&lv);
    for strategy in [Strategy::ZeroMeanAugmented, Strategy::PinnedNode] {
        let sys = StokesSystem::factorize(&lv, &fe, strategy).unwrap();
        let (u, p) = sys.solve(&vec![0.0; lv.n], &vec![0.0; lv.m]);
        assert!(u.iter().all(|&x| x == 0.0));
        assert!(p.iter().all(|&x| x == 0.0));
    }
}

#[test]
fn velocity_solutions_are_discretely_divergence_free() {
    let lv = MeshLevel::new(3);
    let fe = assemble(&lv);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for strategy in [Strategy::ZeroMeanAugmented, Strategy::PinnedNode] {
        let sys = StokesSystem::factorize(&lv, &fe, strategy).unwrap();
        let bu = rand_vec(lv.n, &mut rng);
        let (u, _) = sys.solve(&bu, &vec![0.0; lv.m]);
        let div = fe.b.matvec(&u);
        assert!(norm(&div) <= 1e-11 * norm(&u), "{strategy:?}");
    }
}

#[test]
fn repeated_solves_are_bitwise_identical() {
    let lv = MeshLevel::new(2);
    let fe = assemble(&lv);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let bu = rand_vec(lv.n, &mut rng);
    let bp = rand_vec(lv.m, &mut rng);
    let sys = StokesSystem::factorize(&lv, &fe, Strategy::ZeroMeanAugmented).unwrap();
    let (u1, p1) = sys.solve(&bu, &bp);
    let (u2, p2) = sys.solve(&bu, &bp);
    assert_eq!(u1, u2);
    assert_eq!(p1, p2);
    // And across independent factorizations of the same matrix.
    let sys2 = StokesSystem::factorize(&lv, &fe, Strategy::ZeroMeanAugmented).unwrap();
    let (u3, p3) = sys2.solve(&bu, &bp);
    assert_eq!(u1, u3);
    assert_eq!(p1, p3);
}

#[test]
fn multi_rhs_matches_single_solves_and_counts() {
    let lv = MeshLevel::new(2);
    let fe = assemble(&lv);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let sys = StokesSystem::factorize(&lv, &fe, Strategy::ZeroMeanAugmented).unwrap();
    assert_eq!(sys.solve_count(), 0);

    let nred = lv.n + lv.m - 1;
    let k = 3;
    let mut b1 = Dense::zeros(nred, k);
    let mut singles = Vec::new();
    for j in 0..k {
        let bu = rand_vec(lv.n, &mut rng);
        let bp = rand_vec(lv.m, &mut rng);
        let col = b1.col_mut(j);
        col[..lv.n].copy_from_slice(&bu);
        col[lv.n..].copy_from_slice(&bp[1..]);
        singles.push((bu, bp));
    }
    let bp_pins: Vec<f64> = singles.iter().map(|(_, bp)| bp[0]).collect();
    let (z, p_pin) = sys.solve_multi(b1, &bp_pins);
    assert_eq!(sys.solve_count(), k as u64);

    for j in 0..k {
        let (bu, bp) = &singles[j];
        let (u, p) = sys.solve(bu, bp);
        let zc = z.col(j);
        let scale = norm(zc);
        for i in 0..lv.n {
            assert!((zc[i] - u[i]).abs() <= 1e-13 * scale);
        }
        for i in 1..lv.m {
            assert!((zc[lv.n + i - 1] - p[i]).abs() <= 1e-13 * scale);
        }
        assert!((p_pin[j] - p[0]).abs() <= 1e-13 * scale);
    }
    assert_eq!(sys.solve_count(), k as u64 + k as u64);
}

#[test]
fn sparse_lu_solves_mass_systems_accurately() {
    let lv = MeshLevel::new(3);
    let fe = assemble(&lv);
    let lu = SparseLu::new(&fe.mf).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let x = rand_vec(lv.p, &mut rng);
    let b = fe.mf.matvec(&x);
    let sol = lu.solve_vec(&b);
    let err: f64 = sol.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err <= 1e-12 * norm(&x));
    assert_eq!(lu.n, lv.p);
}

#[test]
fn strategy_names_round_trip() {
    assert_eq!("zeromean".parse::<Strategy>().unwrap(), Strategy::ZeroMeanAugmented);
    assert_eq!("pinned".parse::<Strategy>().unwrap(), Strategy::PinnedNode);
    assert_eq!(Strategy::ZeroMeanAugmented.to_string(), "zeromean");
    assert_eq!(Strategy::PinnedNode.to_string(), "pinned");
    assert!("augmented".parse::<Strategy>().is_err());
}

#[test]
fn forced_stokes_problem_converges_to_the_analytic_solution() {
    let lv = MeshLevel::new(3);
    let fe = assemble(&lv);
    let sys = StokesSystem::factorize(&lv, &fe, Strategy::ZeroMeanAugmented).unwrap();
    let moments = velocity_moments(&lv, 5, &mms_force);
    let bu: Vec<f64> = lv.int_vec.iter().map(|&i| moments[i]).collect();
    let (u, p) = sys.solve(&bu, &vec![0.0; lv.m]);
    let e_u = velocity_error_l2(&lv, &embed_interior(&lv, &u), &u_d, 4);
    let e_p = pressure_error_l2(&lv, &p, &p_d, 4);
    assert!(e_u <= 5e-3, "velocity error {e_u}");
    assert!(e_p <= 5e-2, "pressure error {e_p}");
}
