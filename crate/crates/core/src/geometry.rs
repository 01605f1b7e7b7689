//! Exact solvers on the l1/l2 constraint sets
//!
//! ```text
//! Omega1(t) = { x : |x|_1 <= t, |x|_2 <= 1 }
//! Omega2(t) = { x : |x|_1  = t, |x|_2  = 1 }
//! Omega3(t) = { x : |x|_1 <= t, |x|_2  = 1 }
//! ```
//!
//! Every maximizer of `<v, x>` over these sets agrees in sign with `v`, so the
//! solvers work on `|v|` in the nonnegative orthant and lift signs afterwards.
//! On the nonnegative orthant the maximizer is a normalized soft-threshold
//! `(v - lambda 1)^+ / |(v - lambda 1)^+|_2`, where `lambda` is the root of
//!
//! ```text
//! phi(lambda) = |(v - lambda 1)^+|_1^2 - t^2 |(v - lambda 1)^+|_2^2
//! ```
//!
//! except in the tied regime where more than `t^2` entries share the maximum.
//!
//! For P2 the root may be negative: when `|v|_1 <= t |v|_2` the l1 sphere can
//! only be reached by spreading mass onto the small entries, which a negative
//! threshold does. This extension is not stated in closed form anywhere we
//! know of; it follows from the sphere projection geometry.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Which l1/l2 constraint set a problem lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    /// l1 ball intersected with the unit l2 ball.
    P1,
    /// l1 sphere intersected with the unit l2 sphere.
    P2,
    /// l1 ball intersected with the unit l2 sphere.
    P3,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::P1, Variant::P2, Variant::P3];

    /// Whether `x` lies in the set with budget `t`, up to the module tolerances.
    pub fn is_feasible(self, x: &[f64], t: f64) -> bool {
        let l1 = l1_norm(x);
        let l2 = l2_norm(x);
        match self {
            Variant::P1 => l1 <= t + 1e-10 && l2 <= 1.0 + 1e-10,
            Variant::P2 => (l1 - t).abs() <= 1e-8 && (l2 - 1.0).abs() <= 1e-10,
            Variant::P3 => l1 <= t + 1e-8 && (l2 - 1.0).abs() <= 1e-10,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::P1 => "p1",
            Variant::P2 => "p2",
            Variant::P3 => "p3",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "p1" | "1" => Ok(Variant::P1),
            "p2" | "2" => Ok(Variant::P2),
            "p3" | "3" => Ok(Variant::P3),
            other => Err(Error::invalid(format!(
                "unknown variant `{other}` (expected p1, p2 or p3)"
            ))),
        }
    }
}

/// Closed-form case that produced an [`LmSolution`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// Normalized soft-threshold at the root of phi.
    UniqueRoot,
    /// `v / |v|_2`: the l1 budget is slack at zero threshold.
    Unnormalized,
    /// Exactly `t^2` entries tie at the maximum: the uniform vector on them.
    UniformFace,
    /// More than `t^2` entries tie at the maximum: `alpha e_I + beta e_i*`.
    TiedFace,
    /// `v = 0` on the ball variant: every feasible point is optimal, zero is returned.
    ZeroInput,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::UniqueRoot => "unique-root",
            Branch::Unnormalized => "unnormalized",
            Branch::UniformFace => "uniform-face",
            Branch::TiedFace => "tied-face",
            Branch::ZeroInput => "zero-input",
        })
    }
}

/// Entries of a nonnegative vector attaining its maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxLevelSet {
    pub v_max: f64,
    /// Sorted ascending.
    pub indices: Vec<usize>,
}

impl MaxLevelSet {
    pub fn of(v: &[f64]) -> Self {
        let v_max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let indices = v
            .iter()
            .enumerate()
            .filter(|(_, &x)| x == v_max)
            .map(|(i, _)| i)
            .collect();
        MaxLevelSet { v_max, indices }
    }

    pub fn count(&self) -> usize {
        self.indices.len()
    }

    /// Largest entry strictly below `v_max`, if any.
    fn second_level(&self, v: &[f64]) -> Option<f64> {
        v.iter()
            .copied()
            .filter(|&x| x < self.v_max)
            .fold(None, |acc: Option<f64>, x| {
                Some(acc.map_or(x, |a| a.max(x)))
            })
    }
}

/// Output of the linear-maximization solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct LmSolution {
    pub x: Vec<f64>,
    /// Active soft-threshold level.
    pub lambda_star: Option<f64>,
    /// Multiplier of the l2 constraint (the norm of the thresholded vector).
    pub mu_star: Option<f64>,
    pub branch: Branch,
}

impl LmSolution {
    pub fn objective(&self, v: &[f64]) -> f64 {
        dot(v, &self.x)
    }
}

/// Half-line on which the root of phi is sought.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootDomain {
    /// `[0, v_max)`
    NonNegative,
    /// `(-inf, v_max)`
    HalfLine,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn l1_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

pub(crate) fn l2_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Number of entries equal to the maximum, without collecting them.
fn max_count(v: &[f64]) -> usize {
    let mut best = f64::NEG_INFINITY;
    let mut count = 0;
    for &x in v {
        if x > best {
            best = x;
            count = 1;
        } else if x == best {
            count += 1;
        }
    }
    count
}

fn check_finite(v: &[f64], what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "{what} contains a non-finite entry"
        )))
    }
}

fn check_nonnegative(v: &[f64]) -> Result<()> {
    check_finite(v, "v")?;
    match v.iter().position(|&x| x < 0.0) {
        Some(i) => Err(Error::invalid(format!("v[{i}] = {} is negative", v[i]))),
        None => Ok(()),
    }
}

fn check_budget(t: f64, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("empty vector"));
    }
    if !t.is_finite() || t < 1.0 {
        return Err(Error::InfeasibleBudget { t, n });
    }
    Ok(())
}

/// Compares an integer count against `t^2`, absorbing the few ulps of error
/// that `t * t` picks up when `t` was entered as a square root.
fn compare_count(count: usize, t_sq: f64) -> Ordering {
    let c = count as f64;
    if (c - t_sq).abs() <= 4.0 * f64::EPSILON * c.max(t_sq) {
        Ordering::Equal
    } else if c < t_sq {
        Ordering::Less
    } else {
        Ordering::Greater
    }
}

/// Componentwise `sign(v_i) * max(0, |v_i| - lam)`.
pub fn soft_threshold(v: &[f64], lam: f64) -> Result<Vec<f64>> {
    if lam.is_nan() || lam < 0.0 {
        return Err(Error::invalid(format!(
            "threshold must be nonnegative, got {lam}"
        )));
    }
    Ok(v.iter()
        .map(|&x| x.signum() * (x.abs() - lam).max(0.0))
        .collect())
}

/// `|(v - lam 1)^+|_1^2 - t^2 |(v - lam 1)^+|_2^2`.
pub fn phi(v: &[f64], t: f64, lam: f64) -> f64 {
    let (l1, sq) = v.iter().fold((0.0, 0.0), |(l1, sq), &x| {
        let d = (x - lam).max(0.0);
        (l1 + d, sq + d * d)
    });
    l1 * l1 - t * t * sq
}

/// Running statistics of the `k` largest entries: mean and sum of squared deviations.
struct TopStats {
    sorted: Vec<f64>,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl TopStats {
    fn new(v: &[f64]) -> Self {
        let mut sorted = v.to_vec();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let mut mean = Vec::with_capacity(sorted.len() + 1);
        let mut m2 = Vec::with_capacity(sorted.len() + 1);
        mean.push(0.0);
        m2.push(0.0);
        let (mut mu, mut s) = (0.0, 0.0);
        for (i, &u) in sorted.iter().enumerate() {
            let k = (i + 1) as f64;
            let delta = u - mu;
            mu += delta / k;
            s += delta * (u - mu);
            mean.push(mu);
            m2.push(s.max(0.0));
        }
        TopStats { sorted, mean, m2 }
    }

    /// phi at `lam` assuming exactly the `k` largest entries exceed `lam`.
    fn phi_on_piece(&self, k: usize, t_sq: f64, lam: f64) -> f64 {
        let kf = k as f64;
        let d = self.mean[k] - lam;
        kf * (kf - t_sq) * d * d - t_sq * self.m2[k]
    }

    /// Left end of the piece where the `k` largest entries are active.
    fn piece_start(&self, k: usize, lower: f64) -> f64 {
        match self.sorted.get(k) {
            Some(&next) => next.max(lower),
            None => lower,
        }
    }
}

/// Root of phi on the requested domain.
///
/// phi is piecewise quadratic between consecutive sorted entries of `v`. The
/// piece holding the root is located by bisection over breakpoint indices and
/// the root is then solved in closed form on that piece.
pub fn find_phi_root(v: &[f64], t: f64, domain: RootDomain) -> Result<f64> {
    check_nonnegative(v)?;
    if v.is_empty() {
        return Err(Error::invalid("empty vector"));
    }
    let n = v.len();
    let t_sq = t * t;
    let top = MaxLevelSet::of(v);
    if top.v_max <= 0.0 {
        return Err(Error::BranchConditionViolated(
            "phi has no root for v = 0".into(),
        ));
    }
    if compare_count(top.count(), t_sq) != Ordering::Less {
        return Err(Error::BranchConditionViolated(format!(
            "{} entries tie at the maximum and t^2 = {t_sq}; phi is nonnegative near v_max",
            top.count()
        )));
    }
    let lower = match domain {
        RootDomain::NonNegative => {
            if phi(v, t, 0.0) <= 0.0 {
                return Err(Error::BranchConditionViolated(
                    "|v|_1 <= t |v|_2, so phi(0) <= 0 and there is no root in [0, v_max)".into(),
                ));
            }
            0.0
        }
        RootDomain::HalfLine => {
            if compare_count(n, t_sq) != Ordering::Greater {
                return Err(Error::BranchConditionViolated(format!(
                    "t^2 = {t_sq} >= n = {n}, phi stays nonpositive on the half-line"
                )));
            }
            f64::NEG_INFINITY
        }
    };

    Ok(active_set_root(v, t_sq, lower).unwrap_or_else(|| sorted_root(v, t_sq, lower)))
}

/// Sort-based search: locate the piece by bisection over breakpoint indices,
/// then solve that piece in closed form.
fn sorted_root(v: &[f64], t_sq: f64, lower: f64) -> f64 {
    let n = v.len();
    let stats = TopStats::new(v);
    // Last piece index: the first k whose left end reaches the domain bound.
    let last = (1..=n)
        .find(|&k| stats.piece_start(k, lower) <= lower)
        .unwrap_or(n);
    let sign_at_start = |k: usize| -> bool {
        let start = stats.piece_start(k, lower);
        if start == f64::NEG_INFINITY {
            true
        } else {
            // strict: phi also vanishes at v_max, where ties leave empty pieces
            stats.phi_on_piece(k, t_sq, start) > 0.0
        }
    };
    // phi is positive left of the root and negative right of it, so the sign
    // at piece starts flips exactly once as k grows.
    let (mut lo, mut hi) = (1usize, last);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if sign_at_start(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let k = lo;
    let start = stats.piece_start(k, lower);
    let end = stats.sorted[k - 1];
    let kf = k as f64;
    if start.is_finite() && stats.phi_on_piece(k, t_sq, start) == 0.0 {
        return start;
    }
    if kf <= t_sq {
        // phi <= 0 on this whole piece; the sign change sits on its left end.
        return start;
    }
    let root = stats.mean[k] - (t_sq * stats.m2[k] / (kf * (kf - t_sq))).sqrt();
    root.clamp(start, end)
}

/// Linear-time root search that avoids sorting.
///
/// Starting from every entry above `lower`, solve the quadratic of the
/// current set, drop the entries at or below its smaller root and repeat. While
/// the set contains the true active set the smaller root stays at or below
/// `lambda*` and does not decrease from one round to the next, so entries are
/// only ever dropped correctly and the loop stops on the exact piece. Returns
/// `None` in the degenerate cases (set size reaching `t^2`) that the
/// sort-based search handles.
fn active_set_root(v: &[f64], t_sq: f64, lower: f64) -> Option<f64> {
    let mut set = Vec::with_capacity(v.len());
    let mut dropped_max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for &x in v {
        if x > lower {
            set.push(x);
            sum += x;
        } else {
            dropped_max = dropped_max.max(x);
        }
    }
    if set.is_empty() {
        return None;
    }
    let k = set.len() as f64;
    let mut mean = sum / k;
    let mut m2: f64 = set.iter().map(|x| (x - mean) * (x - mean)).sum();
    for _ in 0..v.len() + 1 {
        if compare_count(set.len(), t_sq) != Ordering::Greater {
            return None;
        }
        let k = set.len() as f64;
        let root = (mean - (t_sq * m2 / (k * (k - t_sq))).sqrt()).max(lower);
        // statistics of the survivors, shifted by the root for accuracy
        let (mut s1, mut s2) = (0.0, 0.0);
        let before = set.len();
        set.retain(|&x| {
            if x > root {
                let d = x - root;
                s1 += d;
                s2 += d * d;
                true
            } else {
                dropped_max = dropped_max.max(x);
                false
            }
        });
        if set.len() == before {
            return (dropped_max <= root).then_some(root);
        }
        if set.is_empty() {
            return None;
        }
        let k = set.len() as f64;
        mean = root + s1 / k;
        m2 = (s2 - s1 * s1 / k).max(0.0);
    }
    None
}

fn normalized_threshold(v: &[f64], lam: f64) -> (Vec<f64>, f64) {
    let mut d: Vec<f64> = v.iter().map(|&x| (x - lam).max(0.0)).collect();
    let norm = l2_norm(&d);
    d.iter_mut().for_each(|x| *x /= norm);
    (d, norm)
}

fn tied_face(n: usize, top: &MaxLevelSet, t: f64) -> LmSolution {
    let count = top.count() as f64;
    let beta = ((count - t * t) / (count - 1.0)).max(0.0).sqrt();
    let alpha = (t - beta) / count;
    let mut x = vec![0.0; n];
    for &i in &top.indices {
        x[i] = alpha;
    }
    x[top.indices[0]] += beta;
    LmSolution {
        x,
        lambda_star: Some(top.v_max),
        mu_star: Some(0.0),
        branch: Branch::TiedFace,
    }
}

fn uniform_face(v: &[f64], top: &MaxLevelSet) -> LmSolution {
    let scale = 1.0 / (top.count() as f64).sqrt();
    let mut x = vec![0.0; v.len()];
    for &i in &top.indices {
        x[i] = scale;
    }
    let lambda = top.second_level(v).unwrap_or(0.0);
    LmSolution {
        x,
        lambda_star: Some(lambda),
        mu_star: Some((top.v_max - lambda) * (top.count() as f64).sqrt()),
        branch: Branch::UniformFace,
    }
}

fn normalized(v: &[f64]) -> LmSolution {
    let norm = l2_norm(v);
    LmSolution {
        x: v.iter().map(|x| x / norm).collect(),
        lambda_star: Some(0.0),
        mu_star: Some(norm),
        branch: Branch::Unnormalized,
    }
}

/// Callers have already checked the conditions [`find_phi_root`] validates.
fn root_solution(v: &[f64], t: f64, lower: f64) -> LmSolution {
    let t_sq = t * t;
    let lam = active_set_root(v, t_sq, lower).unwrap_or_else(|| sorted_root(v, t_sq, lower));
    let (x, mu) = normalized_threshold(v, lam);
    LmSolution {
        x,
        lambda_star: Some(lam),
        mu_star: Some(mu),
        branch: Branch::UniqueRoot,
    }
}

/// Shared by the P1 and P3 solvers, which agree whenever `v != 0`.
fn ball_budget_solution(v: &[f64], t: f64) -> Result<LmSolution> {
    let n = v.len();
    let t_sq = t * t;
    match compare_count(max_count(v), t_sq) {
        Ordering::Greater => return Ok(tied_face(n, &MaxLevelSet::of(v), t)),
        Ordering::Equal if l1_norm(v) > t * l2_norm(v) => {
            return Ok(uniform_face(v, &MaxLevelSet::of(v)))
        }
        _ => {}
    }
    // same test the root finder applies, so borderline rounding cannot split them
    if compare_count(n, t_sq) != Ordering::Greater || phi(v, t, 0.0) <= 0.0 {
        return Ok(normalized(v));
    }
    Ok(root_solution(v, t, 0.0))
}

/// Maximizes `<v, x>` over `x >= 0`, `|x|_1 <= t`, `|x|_2 <= 1`.
pub fn solve_lm_p1_plus(v: &[f64], t: f64) -> Result<LmSolution> {
    check_nonnegative(v)?;
    check_budget(t, v.len())?;
    lm_p1_plus(v, t)
}

fn lm_p1_plus(v: &[f64], t: f64) -> Result<LmSolution> {
    if v.iter().all(|&x| x == 0.0) {
        return Ok(LmSolution {
            x: vec![0.0; v.len()],
            lambda_star: None,
            mu_star: None,
            branch: Branch::ZeroInput,
        });
    }
    ball_budget_solution(v, t)
}

/// Maximizes `<v, x>` over `x >= 0`, `|x|_1 = t`, `|x|_2 = 1`.
pub fn solve_lm_p2_plus(v: &[f64], t: f64) -> Result<LmSolution> {
    check_nonnegative(v)?;
    check_budget(t, v.len())?;
    lm_p2_plus(v, t)
}

fn lm_p2_plus(v: &[f64], t: f64) -> Result<LmSolution> {
    let n = v.len();
    if v.iter().all(|&x| x == 0.0) {
        return Err(Error::DegenerateInput(
            "v = 0 on the l1/l2 sphere intersection has no preferred maximizer".into(),
        ));
    }
    let t_sq = t * t;
    match compare_count(n, t_sq) {
        Ordering::Less => return Err(Error::InfeasibleBudget { t, n }),
        Ordering::Equal => {
            let x = vec![1.0 / (n as f64).sqrt(); n];
            return Ok(LmSolution {
                x,
                lambda_star: None,
                mu_star: None,
                branch: Branch::UniformFace,
            });
        }
        Ordering::Greater => {}
    }
    let top = MaxLevelSet::of(v);
    match compare_count(top.count(), t_sq) {
        Ordering::Greater => Ok(tied_face(n, &top, t)),
        Ordering::Equal => Ok(uniform_face(v, &top)),
        Ordering::Less => Ok(root_solution(v, t, f64::NEG_INFINITY)),
    }
}

/// Maximizes `<v, x>` over `x >= 0`, `|x|_1 <= t`, `|x|_2 = 1`.
pub fn solve_lm_p3_plus(v: &[f64], t: f64) -> Result<LmSolution> {
    check_nonnegative(v)?;
    check_budget(t, v.len())?;
    lm_p3_plus(v, t)
}

fn lm_p3_plus(v: &[f64], t: f64) -> Result<LmSolution> {
    if v.iter().all(|&x| x == 0.0) {
        return Err(Error::DegenerateInput(
            "v = 0 on the unit l2 sphere has no preferred maximizer".into(),
        ));
    }
    ball_budget_solution(v, t)
}

/// Maximizes `<v, x>` over the chosen constraint set for arbitrary-sign `v`.
///
/// Zero entries of `v` are lifted with a positive sign: they contribute
/// nothing to the objective, and P2 can put mass on them.
pub fn solve_lm(v: &[f64], t: f64, variant: Variant) -> Result<LmSolution> {
    check_budget(t, v.len())?;
    let abs: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    if abs.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("v contains a non-finite entry"));
    }
    let mut sol = match variant {
        Variant::P1 => lm_p1_plus(&abs, t)?,
        Variant::P2 => lm_p2_plus(&abs, t)?,
        Variant::P3 => lm_p3_plus(&abs, t)?,
    };
    for (x, &vi) in sol.x.iter_mut().zip(v) {
        if vi < 0.0 {
            *x = -*x;
        }
    }
    Ok(sol)
}

/// Euclidean projection onto the l1 ball of radius `t`.
pub fn project_l1_ball(v: &[f64], t: f64) -> Result<Vec<f64>> {
    check_finite(v, "v")?;
    if t.is_nan() || t <= 0.0 {
        return Err(Error::invalid(format!(
            "l1 radius must be positive, got {t}"
        )));
    }
    if l1_norm(v) <= t {
        return Ok(v.to_vec());
    }
    let mut u: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let candidate = (cumsum - t) / (j + 1) as f64;
        if uj > candidate {
            theta = candidate;
        } else {
            break;
        }
    }
    soft_threshold(v, theta.max(0.0))
}

/// Euclidean projection onto `Omega_variant(t)`.
///
/// P2 and P3 coincide with the linear maximizer since `|x|_2` is fixed on
/// those sets. P1 is convex and dispatches on which constraints are active.
pub fn project_omega(v: &[f64], t: f64, variant: Variant) -> Result<Vec<f64>> {
    match variant {
        Variant::P2 | Variant::P3 => Ok(solve_lm(v, t, variant)?.x),
        Variant::P1 => project_omega1(v, t),
    }
}

fn project_omega1(v: &[f64], t: f64) -> Result<Vec<f64>> {
    check_finite(v, "v")?;
    check_budget(t, v.len())?;
    let l2 = l2_norm(v);
    if l1_norm(v) <= t && l2 <= 1.0 {
        return Ok(v.to_vec());
    }
    // only the l1 constraint active
    let w = project_l1_ball(v, t)?;
    if l2_norm(&w) <= 1.0 {
        return Ok(w);
    }
    // only the l2 constraint active
    if l1_norm(v) <= t * l2 {
        return Ok(v.iter().map(|x| x / l2).collect());
    }
    // both active: the normalized soft-threshold with l1/l2 ratio t
    Ok(solve_lm(v, t, Variant::P1)?.x)
}
