//! Projected gradient ascent for the Horst scheme with Barzilai-Borwein steps.
//!
//! ```text
//! a^{s+1} = P_Omega(a^s + gamma_s grad h(a^s))
//! gamma_{s+1} = min(cap, gamma_max)            if b_s <= 0
//!             = min(cap, clamp(a_s / b_s))     otherwise
//! ```
//!
//! with `a_s = <s, s>`, `b_s = <s, y>`, `s = a^{s+1} - a^s`,
//! `y = grad h(a^{s+1}) - grad h(a^s)` and `cap = step_cap_factor / L_h`.
//! Steps below `1/L_h` make every iteration an ascent step, which the raw
//! BB ratio does not guarantee on its own.

use std::time::Instant;

use ndarray::{Array1, Array2};

use crate::bcd::random_feasible;
use crate::error::{Error, Result};
use crate::geometry::{project_omega, Variant};
use crate::model::{objective_from_scores, xt_dot, BlockSet, CoefState, DesignGraph, Scheme};
use crate::report::SolverReport;

#[derive(Debug, Clone, PartialEq)]
pub struct GpConfig {
    pub variant: Variant,
    /// Only [`Scheme::Horst`] is supported; kept so callers get a typed error.
    pub scheme: Scheme,
    pub sparsity: Vec<f64>,
    pub gamma_min: f64,
    pub gamma_max: f64,
    /// Steps never exceed `step_cap_factor / L_h`.
    pub step_cap_factor: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl GpConfig {
    pub fn new(variant: Variant, sparsity: Vec<f64>) -> Self {
        GpConfig {
            variant,
            scheme: Scheme::Horst,
            sparsity,
            gamma_min: 1e-6,
            gamma_max: 1e6,
            step_cap_factor: 0.99,
            tol: 1e-6,
            max_iters: 10_000,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scheme != Scheme::Horst {
            return Err(Error::UnsupportedScheme(self.scheme.to_string()));
        }
        if !(self.gamma_min > 0.0 && self.gamma_min <= self.gamma_max) {
            return Err(Error::invalid(format!(
                "need 0 < gamma_min <= gamma_max, got {} and {}",
                self.gamma_min, self.gamma_max
            )));
        }
        if !(self.step_cap_factor > 0.0 && self.step_cap_factor < 1.0) {
            return Err(Error::invalid(format!(
                "step_cap_factor must lie in (0, 1), got {}",
                self.step_cap_factor
            )));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::invalid(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        Ok(())
    }
}

/// Barzilai-Borwein quantities of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct BbState {
    pub s_vec: Vec<f64>,
    pub y_vec: Vec<f64>,
    pub a_s: f64,
    pub b_s: f64,
}

impl BbState {
    pub fn new(s_vec: Vec<f64>, y_vec: Vec<f64>) -> Self {
        let a_s = s_vec.iter().map(|x| x * x).sum();
        let b_s = s_vec.iter().zip(&y_vec).map(|(s, y)| s * y).sum();
        BbState {
            s_vec,
            y_vec,
            a_s,
            b_s,
        }
    }
}

/// Step size after a move described by `bb`, capped at `cap`.
pub fn next_step(bb: &BbState, cfg: &GpConfig, cap: f64) -> f64 {
    let raw = if bb.b_s <= 0.0 {
        cfg.gamma_max
    } else {
        (bb.a_s / bb.b_s).clamp(cfg.gamma_min, cfg.gamma_max)
    };
    raw.min(cap)
}

fn check_horst(scheme: Scheme) -> Result<()> {
    if scheme == Scheme::Horst {
        Ok(())
    } else {
        Err(Error::UnsupportedScheme(scheme.to_string()))
    }
}

fn gradient_from_scores(
    bs: &BlockSet,
    dg: &DesignGraph,
    scores: &[Array1<f64>],
) -> Vec<Array1<f64>> {
    let n = bs.n();
    (0..bs.len())
        .map(|l| {
            let mut acc = Array1::zeros(n);
            for k in dg.neighbors(l) {
                acc.scaled_add(dg.weight(l, k), &scores[k]);
            }
            xt_dot(bs.block(l), &acc) * (2.0 / n as f64)
        })
        .collect()
}

/// Block `l`: `(2/n) sum_{k != l} c_lk X_l' X_k a_k`.
pub fn gradient_h(
    bs: &BlockSet,
    dg: &DesignGraph,
    scheme: Scheme,
    coefs: &[Array1<f64>],
) -> Result<Vec<Array1<f64>>> {
    check_horst(scheme)?;
    dg.check_blocks(bs)?;
    let scores = bs.scores(coefs)?;
    Ok(gradient_from_scores(bs, dg, &scores))
}

/// Largest singular value of `X_j' X_k` by power iteration on its Gram
/// operator, never forming the `p_j x p_k` product.
pub fn cross_spectral_norm(xj: &Array2<f64>, xk: &Array2<f64>) -> f64 {
    let p = xk.ncols();
    // deterministic start with no exact symmetry
    let mut x = Array1::from_shape_fn(p, |i| 1.0 + (i as f64 * 0.618_033_988_749_895).fract());
    let norm = x.dot(&x).sqrt();
    x /= norm;
    let mut sigma = 0.0;
    for _ in 0..10_000 {
        let mx = xj.t().dot(&xk.dot(&x));
        let next_sigma = mx.dot(&mx).sqrt();
        if next_sigma == 0.0 {
            return 0.0;
        }
        let y = xk.t().dot(&xj.dot(&mx));
        let ny = y.dot(&y).sqrt();
        if ny == 0.0 {
            return next_sigma;
        }
        x = y / ny;
        if (next_sigma - sigma).abs() <= 1e-10 * next_sigma {
            // one more application to settle on the converged direction
            let mx = xj.t().dot(&xk.dot(&x));
            return mx.dot(&mx).sqrt().max(next_sigma);
        }
        sigma = next_sigma;
    }
    sigma
}

/// `L_h = (2/n) (J-1)^{3/2} sqrt(J) max_{j != k} c_jk |X_j' X_k|_2`.
pub fn lipschitz_bound(bs: &BlockSet, dg: &DesignGraph) -> Result<f64> {
    dg.check_blocks(bs)?;
    let j = bs.len() as f64;
    let mut c = 0.0f64;
    for a in 0..bs.len() {
        for b in dg.neighbors(a).filter(|&b| b > a) {
            c = c.max(dg.weight(a, b) * cross_spectral_norm(bs.block(a), bs.block(b)));
        }
    }
    Ok(2.0 / bs.n() as f64 * (j - 1.0).powf(1.5) * j.sqrt() * c)
}

/// Block-wise projection onto the product of constraint sets.
pub fn project_product(
    raw: &[Array1<f64>],
    sparsity: &[f64],
    variant: Variant,
) -> Result<CoefState> {
    if raw.len() != sparsity.len() {
        return Err(Error::dims(format!(
            "{} blocks but {} sparsity values",
            raw.len(),
            sparsity.len()
        )));
    }
    let coefs = raw
        .iter()
        .zip(sparsity)
        .map(|(a, &s)| {
            project_omega(a.as_slice().expect("contiguous"), s, variant).map(Array1::from)
        })
        .collect::<Result<Vec<_>>>()?;
    CoefState::new(coefs, variant, sparsity.to_vec())
}

fn gradient_step(a: &[Array1<f64>], grad: &[Array1<f64>], gamma: f64) -> Vec<Array1<f64>> {
    a.iter().zip(grad).map(|(x, g)| x + &(g * gamma)).collect()
}

fn distance(a: &[Array1<f64>], b: &[Array1<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).mapv(|d| d * d).sum())
        .sum::<f64>()
        .sqrt()
}

fn flat_diff(a: &[Array1<f64>], b: &[Array1<f64>]) -> Vec<f64> {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| (x - y).to_vec())
        .collect()
}

/// Runs projected gradient ascent from the seeded feasible start.
pub fn fit_gp(bs: &BlockSet, dg: &DesignGraph, cfg: &GpConfig) -> Result<SolverReport> {
    cfg.validate()?;
    dg.check_blocks(bs)?;
    let start = Instant::now();
    let init = random_feasible(&bs.dims(), cfg.variant, &cfg.sparsity, cfg.seed)?;
    fit_gp_from(bs, dg, cfg, init, start)
}

/// Same as [`fit_gp`] from a caller-supplied starting point.
pub fn fit_gp_from_state(
    bs: &BlockSet,
    dg: &DesignGraph,
    cfg: &GpConfig,
    init: CoefState,
) -> Result<SolverReport> {
    cfg.validate()?;
    dg.check_blocks(bs)?;
    if init.variant() != cfg.variant || init.sparsity() != cfg.sparsity.as_slice() {
        return Err(Error::invalid(
            "starting state does not match the configured constraint sets",
        ));
    }
    fit_gp_from(bs, dg, cfg, init, Instant::now())
}

fn fit_gp_from(
    bs: &BlockSet,
    dg: &DesignGraph,
    cfg: &GpConfig,
    init: CoefState,
    start: Instant,
) -> Result<SolverReport> {
    let lip = lipschitz_bound(bs, dg)?;
    let cap = if lip > 0.0 {
        cfg.step_cap_factor / lip
    } else {
        cfg.gamma_max
    };
    let n = bs.n();
    let mut a = init.into_coefs();
    let scores = bs.scores(&a)?;
    let mut grad = gradient_from_scores(bs, dg, &scores);
    let mut gamma = cap;
    let mut trace = vec![objective_from_scores(dg, Scheme::Horst, &scores, n)];
    let mut step_norms = Vec::new();
    let mut converged = false;
    let residual = loop {
        let cand = project_product(&gradient_step(&a, &grad, gamma), &cfg.sparsity, cfg.variant)?
            .into_coefs();
        let step = distance(&cand, &a);
        if step <= cfg.tol {
            converged = true;
            break step;
        }
        if step_norms.len() >= cfg.max_iters {
            break step;
        }
        let cand_scores = bs.scores(&cand)?;
        let cand_grad = gradient_from_scores(bs, dg, &cand_scores);
        let bb = BbState::new(flat_diff(&cand, &a), flat_diff(&cand_grad, &grad));
        gamma = next_step(&bb, cfg, cap);
        trace.push(objective_from_scores(dg, Scheme::Horst, &cand_scores, n));
        step_norms.push(step);
        a = cand;
        grad = cand_grad;
    };
    let wall_time = start.elapsed();
    Ok(SolverReport {
        state: CoefState::new(a, cfg.variant, cfg.sparsity.clone())?,
        objective_trace: trace,
        iterations: step_norms.len(),
        wall_time,
        converged,
        stationarity_residual: residual,
        step_norms,
        degenerate_updates: 0,
        search_failures: 0,
    })
}
