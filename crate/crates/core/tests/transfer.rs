//! Intergrid transfer: interpolation exactness on nested functions and the
//! algebraic identities of the mass-weighted projection.

use rand::Rng;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};
use stokes_control::hierarchy::Hierarchy;
use stokes_control::mesh::MeshLevel;
use stokes_control::stokes::Strategy;
use stokes_control::transfer::TransferPair;

fn rand_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn prolongation_reproduces_coarse_functions_pointwise() {
    let coarse = MeshLevel::new(2);
    let fine = MeshLevel::new(3);
    let t = TransferPair::new(&fine, &coarse);
    assert_eq!(t.fine_dofs, fine.p);
    assert_eq!(t.coarse_dofs, coarse.p);

    // Any biquadratic-per-component field is in both spaces; interpolating its
    // coarse nodal values must reproduce its fine nodal values.
    let f = |x: f64, y: f64| [x * x * y * y - 0.3 * x, 1.0 + y * (x - y)];
    let mut xc = vec![0.0; coarse.p];
    for node in 0..coarse.nodes2 {
        let (x, y) = coarse.q2_coord(node);
        let v = f(x, y);
        xc[2 * node] = v[0];
        xc[2 * node + 1] = v[1];
    }
    let xf = t.prolong(&xc);
    for node in 0..fine.nodes2 {
        let (x, y) = fine.q2_coord(node);
        let v = f(x, y);
        assert!((xf[2 * node] - v[0]).abs() <= 1e-14);
        assert!((xf[2 * node + 1] - v[1]).abs() <= 1e-14);
    }

    let ones = vec![1.0; coarse.p];
    let up = t.prolong(&ones);
    assert!(up.iter().all(|&v| (v - 1.0).abs() <= 1e-14));
}

#[test]
#[should_panic]
fn transfer_requires_adjacent_levels() {
    let coarse = MeshLevel::new(1);
    let fine = MeshLevel::new(3);
    TransferPair::new(&fine, &coarse);
}

#[test]
fn restriction_is_the_exact_transpose() {
    let coarse = MeshLevel::new(1);
    let fine = MeshLevel::new(2);
    let t = TransferPair::new(&fine, &coarse);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let xc = rand_vec(coarse.p, &mut rng);
    let yf = rand_vec(fine.p, &mut rng);
    let lhs: f64 = t.prolong(&xc).iter().zip(&yf).map(|(a, b)| a * b).sum();
    let rhs: f64 = t
        .restrict_transpose(&yf)
        .iter()
        .zip(&xc)
        .map(|(a, b)| a * b)
        .sum();
    assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()));
}

#[test]
fn nested_embedding_preserves_the_mass_norm() {
    let hier = Hierarchy::build(2, 3, Strategy::ZeroMeanAugmented).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let xc = rand_vec(hier.levels[0].p_dim(), &mut rng);
    let xf = hier.prolong(0, &xc);
    let nc = hier.levels[0].fe.mf.inner(&xc, &xc);
    let nf = hier.levels[1].fe.mf.inner(&xf, &xf);
    assert!((nc - nf).abs() <= 1e-12 * nc, "coarse {nc} vs fine {nf}");
}

#[test]
fn projection_is_a_left_inverse_of_prolongation() {
    let hier = Hierarchy::build(2, 3, Strategy::ZeroMeanAugmented).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let xc = rand_vec(hier.levels[0].p_dim(), &mut rng);
    let back = hier.project_to_coarse(0, &hier.prolong(0, &xc));
    assert!(max_abs_diff(&back, &xc) <= 1e-11);
}

#[test]
fn projector_is_idempotent_self_adjoint_and_annihilates_its_complement() {
    let hier = Hierarchy::build(2, 3, Strategy::ZeroMeanAugmented).unwrap();
    let mf = &hier.levels[1].fe.mf;
    let p = hier.levels[1].p_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..5 {
        let f = rand_vec(p, &mut rng);
        let g = rand_vec(p, &mut rng);
        let pf = hier.prolong(0, &hier.project_to_coarse(0, &f));
        let ppf = hier.prolong(0, &hier.project_to_coarse(0, &pf));
        assert!(max_abs_diff(&ppf, &pf) <= 1e-11 * mf.norm(&pf).max(1.0));

        let pg = hier.prolong(0, &hier.project_to_coarse(0, &g));
        let a = mf.inner(&pf, &g);
        let b = mf.inner(&f, &pg);
        assert!((a - b).abs() <= 1e-11 * a.abs().max(b.abs()));

        let w: Vec<f64> = f.iter().zip(&pf).map(|(x, y)| x - y).collect();
        let pw = hier.project_to_coarse(0, &w);
        assert!(hier.levels[0].fe.mf.norm(&pw) <= 1e-11 * mf.norm(&f));
    }
}

#[test]
fn projection_is_the_mass_best_approximation() {
    let hier = Hierarchy::build(2, 3, Strategy::ZeroMeanAugmented).unwrap();
    let mf = &hier.levels[1].fe.mf;
    let p = hier.levels[1].p_dim();
    let pc = hier.levels[0].p_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let f = rand_vec(p, &mut rng);
    let pf = hier.prolong(0, &hier.project_to_coarse(0, &f));
    let best: Vec<f64> = f.iter().zip(&pf).map(|(x, y)| x - y).collect();
    let best_norm = mf.norm(&best);
    for _ in 0..10 {
        let xc = rand_vec(pc, &mut rng);
        let cand = hier.prolong(0, &xc);
        let diff: Vec<f64> = f.iter().zip(&cand).map(|(x, y)| x - y).collect();
        assert!(mf.norm(&diff) >= best_norm * (1.0 - 1e-12));
    }
}

#[test]
fn hierarchy_level_lookup() {
    let hier = Hierarchy::build(2, 4, Strategy::ZeroMeanAugmented).unwrap();
    assert_eq!(hier.num_levels(), 3);
    assert_eq!(hier.idx(2).unwrap(), 0);
    assert_eq!(hier.idx(4).unwrap(), 2);
    assert!(hier.idx(1).is_err());
    assert!(hier.idx(5).is_err());
    assert!(!hier.grams_ready(0));
    let _ = hier.grams(0);
    assert!(hier.grams_ready(0));
}
