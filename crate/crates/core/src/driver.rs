//! Experiment orchestration and report emission.

use crate::error::{Error, Result};
use crate::hessian::{ControlParams, HessianOp};
use crate::hierarchy::{Hierarchy, Level};
use crate::pcg::{pcg, SolveReport};
use crate::precond::Precond;
use crate::recovery::{pressure_error_l2, recovery_errors, velocity_error_l2, embed_interior};
use crate::spectral::{spectral_report, SpectralReport};
use crate::stokes::Strategy;
use crate::targets::{mms_force, p_d, u_d, velocity_moments};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::path::PathBuf;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Spectrum,
    Solve,
    Recovery,
    Timing,
    Validate,
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectrum" => Ok(Self::Spectrum),
            "solve" => Ok(Self::Solve),
            "recovery" => Ok(Self::Recovery),
            "timing" => Ok(Self::Timing),
            "validate" => Ok(Self::Validate),
            other => Err(Error::Config(format!("unknown experiment '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::Config(format!("unknown format '{other}'"))),
        }
    }
}

fn d_level() -> usize {
    5
}
fn d_level_min() -> usize {
    2
}
fn d_num_levels() -> Vec<usize> {
    vec![1, 2]
}
fn d_beta() -> Vec<f64> {
    vec![1e-4]
}
fn d_gamma_u() -> f64 {
    1.0
}
fn d_strategy() -> Strategy {
    Strategy::ZeroMeanAugmented
}
fn d_tol() -> f64 {
    crate::pcg::DEFAULT_TOL
}
fn d_max_iter() -> usize {
    crate::pcg::DEFAULT_MAX_ITER
}
fn d_format() -> OutputFormat {
    OutputFormat::Csv
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Finest grid exponent: h = 2^-level.
    #[serde(default = "d_level")]
    pub level: usize,
    /// Coarsest fine-grid exponent for spectrum sweeps.
    #[serde(default = "d_level_min")]
    pub level_min: usize,
    /// Grid counts for the preconditioner (1 = plain CG).
    #[serde(default = "d_num_levels")]
    pub num_levels: Vec<usize>,
    #[serde(default = "d_beta")]
    pub beta: Vec<f64>,
    #[serde(default = "d_gamma_u")]
    pub gamma_u: f64,
    #[serde(default)]
    pub gamma_p: f64,
    #[serde(default = "d_strategy")]
    pub strategy: Strategy,
    #[serde(default = "d_tol")]
    pub tol: f64,
    #[serde(default = "d_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default = "d_format")]
    pub format: OutputFormat,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub heavy: bool,
    /// Outlier count fed to the filtered spectral distance.
    #[serde(default)]
    pub filter_k: usize,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            level: d_level(),
            level_min: d_level_min(),
            num_levels: d_num_levels(),
            beta: d_beta(),
            gamma_u: d_gamma_u(),
            gamma_p: 0.0,
            strategy: d_strategy(),
            tol: d_tol(),
            max_iter: d_max_iter(),
            out: None,
            format: d_format(),
            seed: 0,
            heavy: false,
            filter_k: 0,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.level < 1 || self.level > 8 {
            return Err(Error::Config(format!(
                "level {} outside supported range 1..=8",
                self.level
            )));
        }
        if self.beta.is_empty() {
            return Err(Error::Config("at least one beta required".into()));
        }
        for b in &self.beta {
            if !(*b > 0.0) {
                return Err(Error::Config(format!("beta must be positive, got {b}")));
            }
        }
        if self.gamma_u < 0.0 || self.gamma_p < 0.0 {
            return Err(Error::Config("gamma weights must be nonnegative".into()));
        }
        let max_nl = self.num_levels.iter().copied().max().unwrap_or(1);
        if max_nl > self.level {
            return Err(Error::Config(format!(
                "num_levels {max_nl} needs a base below level 1 (finest level {})",
                self.level
            )));
        }
        if self.experiment == ExperimentKind::Spectrum && self.level_min < 2 {
            return Err(Error::Config(
                "spectrum needs level_min >= 2 (one coarse grid below)".into(),
            ));
        }
        if self.level_min > self.level {
            return Err(Error::Config("level_min exceeds level".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config("tol must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be positive".into()));
        }
        Ok(())
    }

    fn params(&self, beta: f64) -> Result<ControlParams> {
        ControlParams::new(beta, self.gamma_u, self.gamma_p)
    }
}

/// One grid cell of a solve-style experiment.
#[derive(Debug, Clone, Serialize)]
pub struct SolveRow {
    pub level: usize,
    pub h: f64,
    pub num_levels: usize,
    pub beta: f64,
    pub gamma_u: f64,
    pub gamma_p: f64,
    pub strategy: Strategy,
    pub iterations: usize,
    pub converged: bool,
    pub final_residual: f64,
    pub stokes_solves: u64,
    pub base_solves: u64,
    pub residual_history: Vec<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RecoveryRow {
    pub level: usize,
    pub h: f64,
    pub beta: f64,
    pub gamma_u: f64,
    pub gamma_p: f64,
    pub strategy: Strategy,
    pub iterations: usize,
    pub e_u: f64,
    pub e_p: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TimingRow {
    pub level: usize,
    pub h: f64,
    pub num_levels: usize,
    pub beta: f64,
    pub gamma_u: f64,
    pub gamma_p: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Stokes solves at the finest level including the right-hand side.
    pub stokes_solves: u64,
    pub base_solves: u64,
    pub setup_seconds: f64,
    pub solve_seconds: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub passed: bool,
}

impl Check {
    pub fn upper(name: &str, value: f64, bound: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            bound,
            passed: value.is_finite() && value <= bound,
        }
    }
    pub fn lower(name: &str, value: f64, bound: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            bound,
            passed: value.is_finite() && value >= bound,
        }
    }
}

pub enum Rows {
    Spectrum(Vec<SpectralReport>),
    Solve(Vec<SolveRow>),
    Recovery(Vec<RecoveryRow>),
    Timing(Vec<TimingRow>),
    Validate(Vec<Check>),
}

pub struct RunOutput {
    pub rows: Rows,
    pub all_ok: bool,
}

pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    match config.experiment {
        ExperimentKind::Spectrum => run_spectrum(config),
        ExperimentKind::Solve => run_solve(config),
        ExperimentKind::Recovery => run_recovery(config),
        ExperimentKind::Timing => run_timing(config),
        ExperimentKind::Validate => run_validate(config),
    }
}

/// Solve one cell: build preconditioner, run PCG, collect counters. The
/// right-hand side is passed in so callers can share it across beta values.
pub fn solve_cell(
    hier: &Hierarchy,
    finest_idx: usize,
    num_levels: usize,
    params: ControlParams,
    tol: f64,
    max_iter: usize,
    rhs: &[f64],
) -> Result<SolveReport> {
    let level = &hier.levels[finest_idx];
    let pc = Precond::new(hier, finest_idx, num_levels, params)?;
    let hop = HessianOp::new(level, params)?;
    let s0 = level.stokes.solve_count();
    let mut h = |v: &[f64]| hop.apply(v);
    let mut k = |v: &[f64]| pc.apply(v);
    let mut rep = pcg(&mut h, &mut k, &level.fe.mf, rhs, tol, max_iter)?;
    rep.stokes_solves = level.stokes.solve_count() - s0;
    let counts = pc.counts();
    rep.base_solves = counts.base_solves;
    rep.precond_hessian_applies = counts.hessian_applies;
    Ok(rep)
}

pub fn run_spectrum(config: &ExperimentConfig) -> Result<RunOutput> {
    let hier = Hierarchy::build(config.level_min - 1, config.level, config.strategy)?;
    let beta = config.beta[0];
    let params = config.params(beta)?;
    let mut rows = Vec::new();
    let mut prev: Option<f64> = None;
    for ell in config.level_min..=config.level {
        let fi = hier.idx(ell)?;
        let rep = spectral_report(&hier, fi, params, config.filter_k, prev)?;
        prev = Some(rep.d_h);
        rows.push(rep);
    }
    Ok(RunOutput {
        rows: Rows::Spectrum(rows),
        all_ok: true,
    })
}

pub fn run_solve(config: &ExperimentConfig) -> Result<RunOutput> {
    let max_nl = config.num_levels.iter().copied().max().unwrap_or(1);
    let coarsest = config.level + 1 - max_nl.max(1);
    let hier = Hierarchy::build(coarsest, config.level, config.strategy)?;
    let fi = hier.idx(config.level)?;
    let level = &hier.levels[fi];
    let rhs = {
        let hop = HessianOp::new(level, config.params(config.beta[0])?)?;
        hop.build_rhs(level.targets())?
    };
    let mut rows = Vec::new();
    let mut all_ok = true;
    for &beta in &config.beta {
        for &nl in &config.num_levels {
            let params = config.params(beta)?;
            let mut row = SolveRow {
                level: config.level,
                h: 0.5f64.powi(config.level as i32),
                num_levels: nl,
                beta,
                gamma_u: config.gamma_u,
                gamma_p: config.gamma_p,
                strategy: config.strategy,
                iterations: 0,
                converged: false,
                final_residual: f64::NAN,
                stokes_solves: 0,
                base_solves: 0,
                residual_history: Vec::new(),
                error: None,
            };
            match solve_cell(&hier, fi, nl, params, config.tol, config.max_iter, &rhs) {
                Ok(rep) => {
                    row.iterations = rep.iterations;
                    row.converged = rep.converged;
                    row.final_residual =
                        rep.residual_history.last().copied().unwrap_or(0.0);
                    row.stokes_solves = rep.stokes_solves;
                    row.base_solves = rep.base_solves;
                    row.residual_history = rep.residual_history;
                }
                Err(e) => {
                    all_ok = false;
                    row.error = Some(e.to_string());
                }
            }
            rows.push(row);
        }
    }
    Ok(RunOutput {
        rows: Rows::Solve(rows),
        all_ok,
    })
}

pub fn run_recovery(config: &ExperimentConfig) -> Result<RunOutput> {
    let nl = config.num_levels.iter().copied().max().unwrap_or(2).max(2);
    let coarsest = config.level + 1 - nl;
    let hier = Hierarchy::build(coarsest, config.level, config.strategy)?;
    let fi = hier.idx(config.level)?;
    let level = &hier.levels[fi];
    let rhs = {
        let hop = HessianOp::new(level, config.params(config.beta[0])?)?;
        hop.build_rhs(level.targets())?
    };
    let mut rows = Vec::new();
    let mut all_ok = true;
    for &beta in &config.beta {
        let params = config.params(beta)?;
        let mut row = RecoveryRow {
            level: config.level,
            h: 0.5f64.powi(config.level as i32),
            beta,
            gamma_u: config.gamma_u,
            gamma_p: config.gamma_p,
            strategy: config.strategy,
            iterations: 0,
            e_u: f64::NAN,
            e_p: f64::NAN,
            error: None,
        };
        match solve_cell(&hier, fi, nl, params, config.tol, config.max_iter, &rhs) {
            Ok(rep) => {
                let (e_u, e_p) = recovery_errors(level, &rep.f_min);
                row.iterations = rep.iterations;
                row.e_u = e_u;
                row.e_p = e_p;
            }
            Err(e) => {
                all_ok = false;
                row.error = Some(e.to_string());
            }
        }
        rows.push(row);
    }
    Ok(RunOutput {
        rows: Rows::Recovery(rows),
        all_ok,
    })
}

pub fn run_timing(config: &ExperimentConfig) -> Result<RunOutput> {
    let max_nl = config.num_levels.iter().copied().max().unwrap_or(1);
    let coarsest = config.level + 1 - max_nl.max(1);
    let hier = Hierarchy::build(coarsest, config.level, config.strategy)?;
    let fi = hier.idx(config.level)?;
    let level = &hier.levels[fi];
    let mut rows = Vec::new();
    let mut all_ok = true;
    for &beta in &config.beta {
        for &nl in &config.num_levels {
            let params = config.params(beta)?;
            let mut row = TimingRow {
                level: config.level,
                h: 0.5f64.powi(config.level as i32),
                num_levels: nl,
                beta,
                gamma_u: config.gamma_u,
                gamma_p: config.gamma_p,
                iterations: 0,
                converged: false,
                stokes_solves: 0,
                base_solves: 0,
                setup_seconds: 0.0,
                solve_seconds: 0.0,
                error: None,
            };
            let cell = (|| -> Result<()> {
                let t0 = std::time::Instant::now();
                let pc = Precond::new(&hier, fi, nl, params)?;
                row.setup_seconds = t0.elapsed().as_secs_f64();
                let hop = HessianOp::new(level, params)?;
                let s0 = level.stokes.solve_count();
                let t1 = std::time::Instant::now();
                let rhs = hop.build_rhs(level.targets())?;
                let mut h = |v: &[f64]| hop.apply(v);
                let mut k = |v: &[f64]| pc.apply(v);
                let rep = pcg(&mut h, &mut k, &level.fe.mf, &rhs, config.tol, config.max_iter)?;
                row.solve_seconds = t1.elapsed().as_secs_f64();
                row.iterations = rep.iterations;
                row.converged = rep.converged;
                row.stokes_solves = level.stokes.solve_count() - s0;
                row.base_solves = pc.counts().base_solves;
                Ok(())
            })();
            if let Err(e) = cell {
                all_ok = false;
                row.error = Some(e.to_string());
            }
            rows.push(row);
        }
    }
    Ok(RunOutput {
        rows: Rows::Timing(rows),
        all_ok,
    })
}

/// Manufactured-solution errors of the plain Stokes solve at one level.
pub fn mms_errors(level: &Level) -> (f64, f64) {
    let lv = &level.mesh;
    let mom = velocity_moments(lv, 5, &mms_force);
    let bu: Vec<f64> = lv.int_vec.iter().map(|&i| mom[i]).collect();
    let (u_int, p_raw) = level.stokes.solve(&bu, &vec![0.0; lv.m]);
    let u_full = embed_interior(lv, &u_int);
    let e_u = velocity_error_l2(lv, &u_full, &u_d, 4);
    let e_p = match level.stokes.strategy {
        Strategy::ZeroMeanAugmented => pressure_error_l2(lv, &p_raw, &p_d, 4),
        Strategy::PinnedNode => pressure_error_l2(lv, &p_raw, &|x, y| p_d(x, y) - 1.0, 4),
    };
    (e_u, e_p)
}

/// Control Richardson differences ||P f_coarse - f_fine||_{M_f} across the
/// level pairs of `hier`, solving each level with a two-grid preconditioner.
pub fn richardson_diffs(hier: &Hierarchy, params: ControlParams, tol: f64) -> Result<Vec<f64>> {
    let mut fs: Vec<Vec<f64>> = Vec::new();
    for fi in 1..hier.num_levels() {
        let level = &hier.levels[fi];
        let hop = HessianOp::new(level, params)?;
        let rhs = hop.build_rhs(level.targets())?;
        let rep = solve_cell(hier, fi, 2, params, tol, 400, &rhs)?;
        if !rep.converged {
            return Err(Error::Config(format!(
                "richardson solve at index {fi} did not converge"
            )));
        }
        fs.push(rep.f_min);
    }
    let mut diffs = Vec::new();
    for w in 1..fs.len() {
        let fine_idx = w + 1;
        let pf = hier.prolong(fine_idx - 1, &fs[w - 1]);
        let d: Vec<f64> = pf.iter().zip(&fs[w]).map(|(a, b)| a - b).collect();
        diffs.push(hier.levels[fine_idx].fe.mf.norm(&d));
    }
    Ok(diffs)
}

fn slope(es: &[f64]) -> Vec<f64> {
    es.windows(2).map(|w| (w[0] / w[1]).ln() / 2f64.ln()).collect()
}

/// The invariant families: self-adjointness and definiteness of H and K,
/// projector identities, adjoint identities, recursion collapse, base-level
/// exactness, and the dense spectral-radius bound. Shared by the validate
/// experiment and the test suite.
pub fn invariant_suite(strategy: Strategy, seed: u64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Mixed control with beta large enough that the two-grid distance at
    // these coarse pairs stays below ln 2; only then is the Newton-corrected
    // K positive definite, which the positivity checks below rely on.
    let hier = Hierarchy::build(2, 4, strategy)?;
    let params = ControlParams::new(1e-2, 1.0, 1.0)?;

    fn rand_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect()
    }

    // Self-adjointness and positivity of H and K in the M_f inner product,
    // with a two-grid K at the middle level and a three-grid K on top.
    for (fi, nl) in [(1usize, 2usize), (2, 3)] {
        let level = &hier.levels[fi];
        let ell = hier.coarsest_ell + fi;
        let p = level.p_dim();
        let mf = &level.fe.mf;
        let hop = HessianOp::new(level, params)?;
        let pc = Precond::new(&hier, fi, nl, params)?;
        let mut h_defect: f64 = 0.0;
        let mut k_defect: f64 = 0.0;
        let mut h_rayleigh = f64::INFINITY;
        let mut k_rayleigh = f64::INFINITY;
        for _ in 0..20 {
            let f1 = rand_vec(p, &mut rng);
            let f2 = rand_vec(p, &mut rng);
            let h1 = hop.apply(&f1)?;
            let h2 = hop.apply(&f2)?;
            let a = mf.inner(&h1, &f2);
            let b = mf.inner(&f1, &h2);
            h_defect = h_defect.max((a - b).abs() / a.abs().max(b.abs()));
            h_rayleigh = h_rayleigh.min(mf.inner(&h1, &f1) / mf.inner(&f1, &f1));
            let k1 = pc.apply(&f1)?;
            let k2 = pc.apply(&f2)?;
            let a = mf.inner(&k1, &f2);
            let b = mf.inner(&f1, &k2);
            k_defect = k_defect.max((a - b).abs() / a.abs().max(b.abs()));
            k_rayleigh = k_rayleigh.min(mf.inner(&k1, &f1) / mf.inner(&f1, &f1));
        }
        checks.push(Check::upper(
            &format!("hessian_self_adjoint_defect_l{ell}"),
            h_defect,
            1e-10,
        ));
        checks.push(Check::lower(
            &format!("hessian_rayleigh_min_l{ell}"),
            h_rayleigh,
            params.beta,
        ));
        checks.push(Check::upper(
            &format!("precond{nl}_self_adjoint_defect_l{ell}"),
            k_defect,
            1e-10,
        ));
        checks.push(Check::lower(
            &format!("precond{nl}_rayleigh_min_l{ell}"),
            k_rayleigh,
            1e-12,
        ));
    }

    // Hessian linearity.
    {
        let level = &hier.levels[1];
        let p = level.p_dim();
        let hop = HessianOp::new(level, params)?;
        let f = rand_vec(p, &mut rng);
        let g = rand_vec(p, &mut rng);
        let alpha = 0.37;
        let fg: Vec<f64> = f.iter().zip(&g).map(|(a, b)| alpha * a + b).collect();
        let lhs = hop.apply(&fg)?;
        let hf = hop.apply(&f)?;
        let hg = hop.apply(&g)?;
        let mut defect: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..p {
            defect = defect.max((lhs[i] - alpha * hf[i] - hg[i]).abs());
            scale = scale.max(lhs[i].abs());
        }
        checks.push(Check::upper("hessian_linearity", defect / scale, 1e-12));
    }

    // Projector identities for Pi = prolong of project, both pairs.
    for pair in 0..2 {
        let mf = &hier.levels[pair + 1].fe.mf;
        let p = hier.levels[pair + 1].p_dim();
        let mut proj_idem: f64 = 0.0;
        let mut proj_sym: f64 = 0.0;
        let mut proj_kernel: f64 = 0.0;
        for _ in 0..10 {
            let f = rand_vec(p, &mut rng);
            let g = rand_vec(p, &mut rng);
            let pf = hier.prolong(pair, &hier.project_to_coarse(pair, &f));
            let ppf = hier.prolong(pair, &hier.project_to_coarse(pair, &pf));
            let num: f64 = pf
                .iter()
                .zip(&ppf)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            proj_idem = proj_idem.max(num / mf.norm(&pf));
            let pg = hier.prolong(pair, &hier.project_to_coarse(pair, &g));
            let a = mf.inner(&pf, &g);
            let b = mf.inner(&f, &pg);
            proj_sym = proj_sym.max((a - b).abs() / a.abs().max(b.abs()));
            // (I - Pi) f has zero coarse projection.
            let w: Vec<f64> = f.iter().zip(&pf).map(|(a, b)| a - b).collect();
            let pw = hier.project_to_coarse(pair, &w);
            let pwn = hier.levels[pair].fe.mf.norm(&pw);
            proj_kernel = proj_kernel.max(pwn / mf.norm(&f));
        }
        let ell = hier.coarsest_ell + pair + 1;
        checks.push(Check::upper(
            &format!("projector_idempotent_l{ell}"),
            proj_idem,
            1e-11,
        ));
        checks.push(Check::upper(
            &format!("projector_self_adjoint_l{ell}"),
            proj_sym,
            1e-11,
        ));
        checks.push(Check::upper(
            &format!("projector_kernel_l{ell}"),
            proj_kernel,
            1e-11,
        ));
    }

    // Adjoint identities of the solution operators.
    {
        let level = &hier.levels[1];
        let p = level.p_dim();
        let mf = &level.fe.mf;
        let mut adj_u: f64 = 0.0;
        let mut adj_p: f64 = 0.0;
        for _ in 0..10 {
            let f = rand_vec(p, &mut rng);
            let g = rand_vec(level.mesh.n, &mut rng);
            let uf = level.apply_u(&f);
            let a = level.fe.mu.inner(&uf, &g);
            let b = mf.inner(&f, &level.apply_u_adjoint(&g));
            adj_u = adj_u.max((a - b).abs() / a.abs().max(b.abs()));
            let mut q = rand_vec(level.mesh.m, &mut rng);
            let mean: f64 = level
                .fe
                .mean_vector
                .iter()
                .zip(&q)
                .map(|(c, v)| c * v)
                .sum();
            for v in &mut q {
                *v -= mean;
            }
            let pf = level.apply_p(&f);
            let a = level.fe.mp.inner(&pf, &q);
            let b = mf.inner(&f, &level.apply_p_adjoint(&q));
            adj_p = adj_p.max((a - b).abs() / a.abs().max(b.abs()));
        }
        checks.push(Check::upper("adjoint_identity_u", adj_u, 1e-10));
        checks.push(Check::upper("adjoint_identity_p", adj_p, 1e-10));
    }

    // Two-level recursion collapses to the explicit two-grid formula.
    {
        let fi = 2;
        let p = hier.levels[fi].p_dim();
        let pc = Precond::new(&hier, fi, 2, params)?;
        let f = rand_vec(p, &mut rng);
        let a = pc.apply(&f)?;
        let b = pc.apply_two_grid(&f)?;
        let bitwise = a.iter().zip(&b).all(|(x, y)| x == y);
        checks.push(Check::lower(
            "two_level_bitwise_two_grid",
            if bitwise { 1.0 } else { 0.0 },
            1.0,
        ));
    }

    // Base-level exactness: K = H^{-1} makes PCG converge in one iteration.
    {
        let base_level = &hier.levels[0];
        let binv = crate::precond::BaseInverse::new(base_level, hier.grams(0), params)?;
        let hop_b = HessianOp::new(base_level, params)?;
        let rhs = hop_b.build_rhs(base_level.targets())?;
        let mut h = |v: &[f64]| hop_b.apply(v);
        let mut k = |v: &[f64]| Ok(binv.apply(&base_level.fe.mf, v));
        let rep = pcg(&mut h, &mut k, &base_level.fe.mf, &rhs, 1e-12, 10)?;
        checks.push(Check::upper(
            "base_exact_one_iteration",
            rep.iterations as f64,
            1.0,
        ));
    }

    // Dense spectral-radius bound for the two-grid error propagator. The
    // bound is attained by pressure-dominated modes, so allow rounding slack
    // from the two eigensolves.
    {
        let fi = 1;
        let rep = spectral_report(&hier, fi, params, 0, None)?;
        let rho = crate::spectral::iteration_matrix_radius(&hier, fi, params)?;
        let bound = rep.d_h.exp_m1() * (1.0 + 1e-8) + 1e-12;
        checks.push(Check::upper("two_grid_radius_vs_distance", rho, bound));
    }

    Ok(checks)
}

pub fn run_validate(config: &ExperimentConfig) -> Result<RunOutput> {
    let mut checks = Vec::new();

    // Manufactured-solution convergence of the Stokes solver.
    let top = if config.heavy { 6 } else { 5 };
    let mut eus = Vec::new();
    let mut eps = Vec::new();
    for ell in 3..=top {
        let level = Level::build(ell, config.strategy)?;
        let (eu, ep) = mms_errors(&level);
        eus.push(eu);
        eps.push(ep);
    }
    let vel_orders = slope(&eus);
    let prs_orders = slope(&eps);
    let vmin = vel_orders.iter().cloned().fold(f64::INFINITY, f64::min);
    let pmin = prs_orders.iter().cloned().fold(f64::INFINITY, f64::min);
    checks.push(Check::lower("mms_velocity_order", vmin, 2.0));
    checks.push(Check::lower("mms_pressure_order", pmin, 1.5));

    // Control Richardson decay for the two single-term tracking modes.
    let top = if config.heavy { 6 } else { 5 };
    let hier = Hierarchy::build(2, top, config.strategy)?;
    let du = richardson_diffs(&hier, ControlParams::new(1e-4, 1.0, 0.0)?, config.tol)?;
    let ou = slope(&du);
    checks.push(Check::lower(
        "richardson_velocity_order",
        ou.last().copied().unwrap_or(f64::NAN),
        1.95,
    ));
    let dp = richardson_diffs(&hier, ControlParams::new(1e-2, 0.0, 1.0)?, config.tol)?;
    let op = slope(&dp);
    checks.push(Check::lower(
        "richardson_pressure_order",
        op.last().copied().unwrap_or(f64::NAN),
        0.95,
    ));

    // Invariant families.
    checks.extend(invariant_suite(config.strategy, config.seed)?);

    let all_ok = checks.iter().all(|c| c.passed);
    Ok(RunOutput {
        rows: Rows::Validate(checks),
        all_ok,
    })
}

fn fmt(v: f64) -> String {
    format!("{v:.12e}")
}

/// CSV emission with one header row; numeric cells only, fixed formatting.
pub fn to_csv(out: &RunOutput) -> String {
    let mut s = String::new();
    match &out.rows {
        Rows::Spectrum(rows) => {
            s.push_str("level,h,beta,gamma_u,gamma_p,d_h,d_tilde,ratio\n");
            for r in rows {
                let h = 0.5f64.powi(r.level as i32);
                let ratio = r
                    .ratio_to_previous
                    .map(fmt)
                    .unwrap_or_default();
                s.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    r.level,
                    h,
                    r.params.beta,
                    r.params.gamma_u,
                    r.params.gamma_p,
                    fmt(r.d_h),
                    fmt(r.d_tilde),
                    ratio
                ));
            }
        }
        Rows::Solve(rows) => {
            s.push_str("level,h,num_levels,beta,gamma_u,gamma_p,strategy,iterations,converged,final_residual,stokes_solves,base_solves,error\n");
            for r in rows {
                s.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                    r.level,
                    r.h,
                    r.num_levels,
                    r.beta,
                    r.gamma_u,
                    r.gamma_p,
                    r.strategy,
                    r.iterations,
                    r.converged,
                    if r.final_residual.is_finite() {
                        fmt(r.final_residual)
                    } else {
                        String::new()
                    },
                    r.stokes_solves,
                    r.base_solves,
                    r.error.clone().unwrap_or_default()
                ));
            }
        }
        Rows::Recovery(rows) => {
            s.push_str("level,h,beta,gamma_u,gamma_p,strategy,iterations,e_u,e_p,error\n");
            for r in rows {
                s.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{}\n",
                    r.level,
                    r.h,
                    r.beta,
                    r.gamma_u,
                    r.gamma_p,
                    r.strategy,
                    r.iterations,
                    if r.e_u.is_finite() { fmt(r.e_u) } else { String::new() },
                    if r.e_p.is_finite() { fmt(r.e_p) } else { String::new() },
                    r.error.clone().unwrap_or_default()
                ));
            }
        }
        Rows::Timing(rows) => {
            s.push_str("level,h,num_levels,beta,gamma_u,gamma_p,iterations,converged,stokes_solves,base_solves,setup_seconds,solve_seconds,error\n");
            for r in rows {
                s.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{},{:.3},{:.3},{}\n",
                    r.level,
                    r.h,
                    r.num_levels,
                    r.beta,
                    r.gamma_u,
                    r.gamma_p,
                    r.iterations,
                    r.converged,
                    r.stokes_solves,
                    r.base_solves,
                    r.setup_seconds,
                    r.solve_seconds,
                    r.error.clone().unwrap_or_default()
                ));
            }
        }
        Rows::Validate(rows) => {
            s.push_str("name,value,bound,passed\n");
            for c in rows {
                s.push_str(&format!(
                    "{},{},{},{}\n",
                    c.name,
                    fmt(c.value),
                    fmt(c.bound),
                    c.passed
                ));
            }
        }
    }
    s
}

/// JSON emission; solve rows carry their residual histories.
pub fn to_json(config: &ExperimentConfig, out: &RunOutput) -> serde_json::Value {
    let rows = match &out.rows {
        Rows::Spectrum(r) => serde_json::to_value(r),
        Rows::Solve(r) => serde_json::to_value(r),
        Rows::Recovery(r) => serde_json::to_value(r),
        Rows::Timing(r) => serde_json::to_value(r),
        Rows::Validate(r) => serde_json::to_value(r),
    }
    .expect("row serialization cannot fail");
    json!({
        "schema_version": SCHEMA_VERSION,
        "experiment": config.experiment,
        "config": config,
        "all_ok": out.all_ok,
        "rows": rows,
    })
}
