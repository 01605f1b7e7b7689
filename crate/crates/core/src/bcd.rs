//! Block-coordinate ascent (Gauss-Seidel over blocks `1..J`).
//!
//! Each sweep visits the blocks in order. Block `j` forms its inner component
//! `z_j` from the latest scores, sets `v = X_j' z_j` and replaces `a_j` by the
//! maximizer of `<v, a>` over its constraint set. [`fit_bcd`] uses the exact
//! linear maximizer; [`fit_baseline`] uses a normalized soft-threshold whose
//! level comes from a binary search on its l1 norm.

use std::time::Instant;

use ndarray::Array1;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::{l1_norm, l2_norm, project_l1_ball, project_omega, solve_lm, Variant};
use crate::model::{
    inner_from_scores, objective_from_scores, xt_dot, BlockSet, CoefState, DesignGraph, Scheme,
};
use crate::report::SolverReport;

/// Iterations allowed to the baseline's binary search.
pub const BASELINE_SEARCH_ITERS: usize = 100;
/// The baseline's l1 target is met when `| |x|_1 - s | <= BASELINE_L1_TOL`.
pub const BASELINE_L1_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct BcdConfig {
    pub variant: Variant,
    pub scheme: Scheme,
    /// l1 budget per block, `1 < s_j < sqrt(p_j)`.
    pub sparsity: Vec<f64>,
    /// Stop once a sweep improves `h` by at most `epsilon * max(1, |h|)`.
    pub epsilon: f64,
    pub max_sweeps: usize,
    pub seed: u64,
}

impl BcdConfig {
    pub fn new(variant: Variant, scheme: Scheme, sparsity: Vec<f64>) -> Self {
        BcdConfig {
            variant,
            scheme,
            sparsity,
            epsilon: 1e-8,
            max_sweeps: 1000,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::invalid(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.max_sweeps == 0 {
            return Err(Error::invalid("max_sweeps must be at least 1"));
        }
        Ok(())
    }
}

/// Seeded standard normal draws, each block projected onto its constraint set.
pub fn random_feasible(
    dims: &[usize],
    variant: Variant,
    sparsity: &[f64],
    seed: u64,
) -> Result<CoefState> {
    crate::model::check_sparsity(dims, sparsity)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coefs = dims
        .iter()
        .zip(sparsity)
        .map(|(&p, &s)| {
            let raw: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
            project_omega(&raw, s, variant).map(Array1::from)
        })
        .collect::<Result<Vec<_>>>()?;
    CoefState::new(coefs, variant, sparsity.to_vec())
}

/// Starting point of [`fit_bcd`]: deterministic in `cfg.seed`.
pub fn init_coefs(bs: &BlockSet, cfg: &BcdConfig) -> Result<CoefState> {
    random_feasible(&bs.dims(), cfg.variant, &cfg.sparsity, cfg.seed)
}

#[derive(Debug, Clone, Copy)]
enum Rule {
    Exact(Variant),
    Baseline,
}

/// Working state of one fit: coefficients with their cached scores.
struct Sweeper<'a> {
    bs: &'a BlockSet,
    dg: &'a DesignGraph,
    scheme: Scheme,
    sparsity: &'a [f64],
    rule: Rule,
    coefs: Vec<Array1<f64>>,
    scores: Vec<Array1<f64>>,
    degenerate: usize,
    search_failures: usize,
}

impl<'a> Sweeper<'a> {
    fn new(
        bs: &'a BlockSet,
        dg: &'a DesignGraph,
        scheme: Scheme,
        sparsity: &'a [f64],
        rule: Rule,
        coefs: Vec<Array1<f64>>,
    ) -> Result<Self> {
        let scores = bs.scores(&coefs)?;
        Ok(Sweeper {
            bs,
            dg,
            scheme,
            sparsity,
            rule,
            coefs,
            scores,
            degenerate: 0,
            search_failures: 0,
        })
    }

    fn objective(&self) -> f64 {
        objective_from_scores(self.dg, self.scheme, &self.scores, self.bs.n())
    }

    /// One pass over the blocks; returns the norm of the total change.
    fn sweep(&mut self) -> Result<f64> {
        let mut moved_sq = 0.0;
        for j in 0..self.bs.len() {
            let z = inner_from_scores(self.dg, self.scheme, &self.scores, j, self.bs.n());
            let x = self.bs.block(j);
            let v = xt_dot(x, &z);
            let v = v.as_slice().expect("contiguous");
            let s = self.sparsity[j];
            let next = match self.rule {
                Rule::Exact(Variant::P1) => solve_lm(v, s, Variant::P1)?.x,
                Rule::Exact(variant) => {
                    if v.iter().all(|&x| x == 0.0) {
                        self.degenerate += 1;
                        continue;
                    }
                    solve_lm(v, s, variant)?.x
                }
                Rule::Baseline => {
                    if v.iter().all(|&x| x == 0.0) {
                        self.degenerate += 1;
                        continue;
                    }
                    let out = baseline_update(v, s)?;
                    if !out.found {
                        self.search_failures += 1;
                    }
                    out.x
                }
            };
            let next = Array1::from(next);
            moved_sq += (&next - &self.coefs[j]).mapv(|d| d * d).sum();
            self.scores[j] = x.dot(&next);
            self.coefs[j] = next;
        }
        Ok(moved_sq.sqrt())
    }

    /// Largest per-block change that one more sweep would make; leaves `self` untouched.
    fn residual(&self) -> Result<f64> {
        let mut probe = Sweeper {
            coefs: self.coefs.clone(),
            scores: self.scores.clone(),
            ..*self
        };
        probe.sweep()?;
        Ok(probe
            .coefs
            .iter()
            .zip(&self.coefs)
            .map(|(a, b)| (a - b).mapv(|d| d * d).sum().sqrt())
            .fold(0.0, f64::max))
    }
}

/// One Gauss-Seidel sweep starting from `st`.
///
/// Returns the new state and the number of blocks left unchanged because
/// their inner target `X_j' z_j` vanished (P2/P3 only; any feasible point
/// is optimal then, and keeping the old one preserves monotonicity).
pub fn bcd_sweep(
    bs: &BlockSet,
    dg: &DesignGraph,
    cfg: &BcdConfig,
    st: &CoefState,
) -> Result<(CoefState, usize)> {
    dg.check_blocks(bs)?;
    let mut sw = Sweeper::new(
        bs,
        dg,
        cfg.scheme,
        st.sparsity(),
        Rule::Exact(st.variant()),
        st.coefs().to_vec(),
    )?;
    sw.sweep()?;
    let degenerate = sw.degenerate;
    Ok((
        CoefState::new(sw.coefs, st.variant(), st.sparsity().to_vec())?,
        degenerate,
    ))
}

fn run(
    bs: &BlockSet,
    dg: &DesignGraph,
    cfg: &BcdConfig,
    variant: Variant,
    rule: Rule,
) -> Result<SolverReport> {
    cfg.validate()?;
    dg.check_blocks(bs)?;
    let start = Instant::now();
    let init = random_feasible(&bs.dims(), variant, &cfg.sparsity, cfg.seed)?;
    let mut sw = Sweeper::new(bs, dg, cfg.scheme, &cfg.sparsity, rule, init.into_coefs())?;
    let mut h = sw.objective();
    let mut trace = vec![h];
    let mut step_norms = Vec::new();
    let mut converged = false;
    while step_norms.len() < cfg.max_sweeps {
        step_norms.push(sw.sweep()?);
        let next = sw.objective();
        trace.push(next);
        let gain = next - h;
        h = next;
        if gain <= cfg.epsilon * h.abs().max(1.0) {
            converged = true;
            break;
        }
    }
    let wall_time = start.elapsed();
    let residual = sw.residual()?;
    Ok(SolverReport {
        iterations: step_norms.len(),
        state: CoefState::new(sw.coefs, variant, cfg.sparsity.clone())?,
        objective_trace: trace,
        wall_time,
        converged,
        stationarity_residual: residual,
        step_norms,
        degenerate_updates: sw.degenerate,
        search_failures: sw.search_failures,
    })
}

/// Block-coordinate ascent with exact block updates on `cfg.variant`'s set.
pub fn fit_bcd(bs: &BlockSet, dg: &DesignGraph, cfg: &BcdConfig) -> Result<SolverReport> {
    run(bs, dg, cfg, cfg.variant, Rule::Exact(cfg.variant))
}

/// Block-coordinate ascent with the binary-search soft-threshold update.
///
/// Always works on P3 (`cfg.variant` is ignored). Starts from the same point
/// as [`fit_bcd`] with P3 and the same seed.
pub fn fit_baseline(bs: &BlockSet, dg: &DesignGraph, cfg: &BcdConfig) -> Result<SolverReport> {
    run(bs, dg, cfg, Variant::P3, Rule::Baseline)
}

/// Result of the baseline's block update.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineUpdate {
    pub x: Vec<f64>,
    pub lambda: f64,
    /// Whether the search met the l1 target (or none was needed).
    pub found: bool,
}

/// `S(v, lambda) / |S(v, lambda)|_2` with `lambda = 0` when that already
/// satisfies the budget, otherwise `lambda` from a binary search on
/// `|S|_1 / |S|_2 = s` over `[0, max |v_i|]`.
///
/// When more than `s^2` entries tie for the largest magnitude the ratio
/// never drops to `s` and the search fails. The update then falls back to
/// the unnormalized soft-threshold with `|S|_1 = s`, which is a maximizer over
/// the l1/l2 balls but not a unit vector.
pub fn baseline_update(v: &[f64], s: f64) -> Result<BaselineUpdate> {
    let norm = l2_norm(v);
    if norm == 0.0 {
        return Err(Error::DegenerateInput(
            "baseline update needs a nonzero target".into(),
        ));
    }
    if l1_norm(v) <= s * norm {
        return Ok(BaselineUpdate {
            x: v.iter().map(|x| x / norm).collect(),
            lambda: 0.0,
            found: true,
        });
    }
    let ratio = |lam: f64| {
        let (l1, sq) = v.iter().fold((0.0, 0.0), |(l1, sq), &x| {
            let d = (x.abs() - lam).max(0.0);
            (l1 + d, sq + d * d)
        });
        if sq == 0.0 {
            (f64::INFINITY, 0.0)
        } else {
            (l1 / sq.sqrt(), sq.sqrt())
        }
    };
    let (mut lo, mut hi) = (0.0, v.iter().fold(0.0f64, |m, x| m.max(x.abs())));
    let mut best: Option<(f64, f64)> = None;
    for _ in 0..BASELINE_SEARCH_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (r, n) = ratio(mid);
        if r > s {
            lo = mid;
        } else {
            hi = mid;
            best = Some((mid, n));
        }
        if (r - s).abs() <= BASELINE_L1_TOL && r <= s {
            break;
        }
    }
    match best {
        Some((lam, n)) if (ratio(lam).0 - s).abs() <= BASELINE_L1_TOL => Ok(BaselineUpdate {
            x: v.iter()
                .map(|&x| x.signum() * (x.abs() - lam).max(0.0) / n)
                .collect(),
            lambda: lam,
            found: true,
        }),
        _ => {
            let x = project_l1_ball(v, s)?;
            let lambda = v
                .iter()
                .zip(&x)
                .find(|(_, xi)| **xi != 0.0)
                .map(|(vi, xi)| vi.abs() - xi.abs())
                .unwrap_or(0.0);
            Ok(BaselineUpdate {
                x,
                lambda,
                found: false,
            })
        }
    }
}
