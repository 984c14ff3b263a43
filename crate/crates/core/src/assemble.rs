//! Assembly of the Taylor-Hood (biquadratic velocity, bilinear pressure)
//! matrices on a mesh level. Everything is built from 1D element integrals
//! evaluated with a Gauss rule, tensorized per element.
//!
//! Sign convention: `b` is the negative divergence form, so the saddle
//! system is `[a b'; b 0]` with `b u = 0` for discretely divergence-free u.

use crate::mesh::MeshLevel;
use crate::quad;
use crate::sparse::Csr;

#[derive(Debug)]
pub struct FeMatrices {
    /// Vector Laplacian, interior dofs (n x n).
    pub a: Csr,
    /// Negative divergence form, pressure rows by interior velocity columns (m x n).
    pub b: Csr,
    /// Full Q2 vector mass (p x p).
    pub mf: Csr,
    /// Rows of mf at interior dofs (n x p).
    pub muf: Csr,
    /// Principal interior submatrix of mf (n x n).
    pub mu: Csr,
    /// Q1 pressure mass (m x m).
    pub mp: Csr,
    /// Integrals of the pressure basis functions (length m); sums to 1.
    pub mean_vector: Vec<f64>,
}

/// 1D element integrals on a cell of width h, from an nq-point Gauss rule.
struct Element1d {
    /// Q2 mass, scaled by h.
    m: [[f64; 3]; 3],
    /// Q2 stiffness, scaled by 1/h.
    k: [[f64; 3]; 3],
    /// Q1 x dQ2, scale-free.
    e: [[f64; 3]; 2],
    /// Q1 x Q2 mass, scaled by h.
    f: [[f64; 3]; 2],
    /// Q1 mass, scaled by h.
    mq: [[f64; 2]; 2],
}

impl Element1d {
    fn new(h: f64, nq: usize) -> Self {
        let rule = quad::gauss(nq);
        let mut m = [[0.0; 3]; 3];
        let mut k = [[0.0; 3]; 3];
        let mut e = [[0.0; 3]; 2];
        let mut f = [[0.0; 3]; 2];
        let mut mq = [[0.0; 2]; 2];
        for &(x, w) in &rule {
            let l = quad::q2_shapes(x);
            let dl = quad::q2_dshapes(x);
            let psi = quad::q1_shapes(x);
            for i in 0..3 {
                for j in 0..3 {
                    m[i][j] += w * l[i] * l[j] * h;
                    k[i][j] += w * dl[i] * dl[j] / h;
                }
            }
            for i in 0..2 {
                for j in 0..3 {
                    e[i][j] += w * psi[i] * dl[j];
                    f[i][j] += w * psi[i] * l[j] * h;
                }
                for j in 0..2 {
                    mq[i][j] += w * psi[i] * psi[j] * h;
                }
            }
        }
        Self { m, k, e, f, mq }
    }
}

pub fn assemble(lv: &MeshLevel) -> FeMatrices {
    assemble_with_rule(lv, 3)
}

pub fn assemble_with_rule(lv: &MeshLevel, nq: usize) -> FeMatrices {
    let el = Element1d::new(lv.h, nq);
    let nel = lv.nc * lv.nc;

    let mut mf_t: Vec<(usize, usize, f64)> = Vec::with_capacity(nel * 162);
    let mut a_t: Vec<(usize, usize, f64)> = Vec::with_capacity(nel * 162);
    let mut b_t: Vec<(usize, usize, f64)> = Vec::with_capacity(nel * 72);
    let mut mp_t: Vec<(usize, usize, f64)> = Vec::with_capacity(nel * 16);

    for ey in 0..lv.nc {
        for ex in 0..lv.nc {
            let q2g: Vec<usize> = (0..3)
                .flat_map(|b| (0..3).map(move |a| (2 * ey + b) * lv.n2 + (2 * ex + a)))
                .collect();
            let q1g: Vec<usize> = (0..2)
                .flat_map(|b| (0..2).map(move |a| (ey + b) * lv.n1 + (ex + a)))
                .collect();

            for i in 0..9 {
                let (bi, ai) = (i / 3, i % 3);
                for j in 0..9 {
                    let (bj, aj) = (j / 3, j % 3);
                    let mel = el.m[ai][aj] * el.m[bi][bj];
                    let kel = el.k[ai][aj] * el.m[bi][bj] + el.m[ai][aj] * el.k[bi][bj];
                    for comp in 0..2 {
                        let gi = 2 * q2g[i] + comp;
                        let gj = 2 * q2g[j] + comp;
                        mf_t.push((gi, gj, mel));
                        let (ii, jj) = (lv.full_to_int[gi], lv.full_to_int[gj]);
                        if ii != usize::MAX && jj != usize::MAX {
                            a_t.push((ii, jj, kel));
                        }
                    }
                }
            }

            for pl in 0..4 {
                let (pb, pa) = (pl / 2, pl % 2);
                for vl in 0..9 {
                    let (vb, va) = (vl / 3, vl % 3);
                    let bel = [
                        -el.e[pa][va] * el.f[pb][vb],
                        -el.f[pa][va] * el.e[pb][vb],
                    ];
                    for comp in 0..2 {
                        let jj = lv.full_to_int[2 * q2g[vl] + comp];
                        if jj != usize::MAX {
                            b_t.push((q1g[pl], jj, bel[comp]));
                        }
                    }
                }
                for pl2 in 0..4 {
                    let (qb, qa) = (pl2 / 2, pl2 % 2);
                    mp_t.push((q1g[pl], q1g[pl2], el.mq[pa][qa] * el.mq[pb][qb]));
                }
            }
        }
    }

    let mf = Csr::from_triplets(lv.p, lv.p, &mf_t);
    let a = Csr::from_triplets(lv.n, lv.n, &a_t);
    let b = Csr::from_triplets(lv.m, lv.n, &b_t);
    let mp = Csr::from_triplets(lv.m, lv.m, &mp_t);

    // muf = interior rows of mf, mu = its interior columns.
    let mut muf_t = Vec::new();
    let mut mu_t = Vec::new();
    for (gi, &full_i) in lv.int_vec.iter().enumerate() {
        let (cols, vals) = mf.row(full_i);
        for (c, v) in cols.iter().zip(vals) {
            muf_t.push((gi, *c, *v));
            let jj = lv.full_to_int[*c];
            if jj != usize::MAX {
                mu_t.push((gi, jj, *v));
            }
        }
    }
    let muf = Csr::from_triplets(lv.n, lv.p, &muf_t);
    let mu = Csr::from_triplets(lv.n, lv.n, &mu_t);

    let mean_vector = (0..lv.m)
        .map(|r| {
            let (_, vals) = mp.row(r);
            vals.iter().sum()
        })
        .collect();

    FeMatrices {
        a,
        b,
        mf,
        muf,
        mu,
        mp,
        mean_vector,
    }
}

/// Matrix Market coordinate output with round-trippable decimal entries.
pub fn write_matrix_market(m: &Csr, out: &mut impl std::io::Write) -> std::io::Result<()> {
    writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(out, "{} {} {}", m.nrows, m.ncols, m.nnz())?;
    for r in 0..m.nrows {
        let (cols, vals) = m.row(r);
        for (c, v) in cols.iter().zip(vals) {
            writeln!(out, "{} {} {}", r + 1, c + 1, v)?;
        }
    }
    Ok(())
}
