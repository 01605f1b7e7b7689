//! Test-only oracles and fixtures. Nothing here calls into the solvers it checks.
#![allow(dead_code)]

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sgcca::{BlockSet, DesignGraph, Variant};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| StandardNormal.sample(rng))
}

pub fn l1(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

pub fn l2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Budget strictly inside (1, sqrt(n)), away from the endpoints.
pub fn random_budget(rng: &mut ChaCha8Rng, n: usize) -> f64 {
    let hi = (n as f64).sqrt();
    1.0 + (hi - 1.0) * rng.random_range(0.02..0.98)
}

fn feasible_plus(x: &[f64], t: f64, variant: Variant) -> bool {
    const TOL: f64 = 1e-9;
    if x.iter().any(|&v| v < -1e-12) {
        return false;
    }
    let (a, b) = (l1(x), l2(x));
    match variant {
        Variant::P1 => a <= t + TOL && b <= 1.0 + TOL,
        Variant::P2 => (a - t).abs() <= TOL && (b - 1.0).abs() <= TOL,
        Variant::P3 => a <= t + TOL && (b - 1.0).abs() <= TOL,
    }
}

/// Every KKT candidate of the nonnegative problems, one support at a time.
///
/// On a support S with x_S > 0 stationarity reads `x_S = (u_S - lam) / c`
/// for multipliers `lam` (l1) and `c` (l2 plus the projection's identity
/// term). Enumerated activity patterns:
///   none active      x_S = u_S
///   l1 only          x_S = u_S - lam, lam fixed by |x|_1 = t
///   l2 only          x_S = +- u_S / |u_S|
///   both             (sum d)^2 = t^2 |d|^2 with d = u_S - lam, solved as a
///                    quadratic in lam, then x_S = +- d / |d|
fn candidates(u: &[f64], t: f64) -> Vec<Vec<f64>> {
    let n = u.len();
    let mut out = vec![vec![0.0; n]];
    for mask in 1u32..(1 << n) {
        let support: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let us: Vec<f64> = support.iter().map(|&i| u[i]).collect();
        let m = us.len() as f64;
        let embed = |vals: &[f64]| {
            let mut x = vec![0.0; n];
            for (&i, &v) in support.iter().zip(vals) {
                x[i] = v;
            }
            x
        };
        out.push(embed(&us));
        let lam = (us.iter().sum::<f64>() - t) / m;
        out.push(embed(&us.iter().map(|v| v - lam).collect::<Vec<_>>()));
        let nu = l2(&us);
        if nu > 0.0 {
            for sign in [1.0, -1.0] {
                out.push(embed(&us.iter().map(|v| sign * v / nu).collect::<Vec<_>>()));
            }
        }
        // quadratic in lam: A lam^2 + B lam + C = 0
        let s1: f64 = us.iter().sum();
        let s2: f64 = us.iter().map(|v| v * v).sum();
        let a = m * m - t * t * m;
        let b = -2.0 * m * s1 + 2.0 * t * t * s1;
        let c = s1 * s1 - t * t * s2;
        let mut roots = Vec::new();
        if a.abs() > 1e-12 {
            let disc = b * b - 4.0 * a * c;
            if disc >= 0.0 {
                roots.push((-b + disc.sqrt()) / (2.0 * a));
                roots.push((-b - disc.sqrt()) / (2.0 * a));
            }
        } else if b.abs() > 1e-12 {
            roots.push(-c / b);
        }
        for lam in roots {
            let d: Vec<f64> = us.iter().map(|v| v - lam).collect();
            let nd = l2(&d);
            if nd > 0.0 {
                for sign in [1.0, -1.0] {
                    out.push(embed(&d.iter().map(|v| sign * v / nd).collect::<Vec<_>>()));
                }
            }
        }
    }
    out
}

/// Optimal value of `max <v, x>` over the variant's set, by support enumeration.
pub fn lm_oracle(v: &[f64], t: f64, variant: Variant) -> f64 {
    let u: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    candidates(&u, t)
        .into_iter()
        .filter(|x| feasible_plus(x, t, variant))
        .map(|x| dot(&u, &x))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Euclidean projection onto the variant's set, by support enumeration on |v|
/// followed by sign restoration (positive sign on zero entries).
pub fn projection_oracle(v: &[f64], t: f64, variant: Variant) -> Vec<f64> {
    let u: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    let best = candidates(&u, t)
        .into_iter()
        .filter(|x| feasible_plus(x, t, variant))
        .min_by(|a, b| dist(a, &u).total_cmp(&dist(b, &u)))
        .expect("some feasible candidate");
    best.iter()
        .zip(v)
        .map(|(&x, &vi)| if vi < 0.0 { -x } else { x })
        .collect()
}

/// Random instance for the model-level checks.
pub struct Instance {
    pub bs: BlockSet,
    pub dg: DesignGraph,
    pub coefs: Vec<Array1<f64>>,
    pub sparsity: Vec<f64>,
}

pub fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let j = rng.random_range(2..=4);
    let n = rng.random_range(5..=12);
    let dims: Vec<usize> = (0..j).map(|_| rng.random_range(3..=8)).collect();
    let blocks: Vec<Array2<f64>> = dims.iter().map(|&p| normal_matrix(rng, n, p)).collect();
    let bs = BlockSet::new(blocks).unwrap();
    let dg = random_design(rng, j);
    let coefs = dims
        .iter()
        .map(|&p| Array1::from(normal_vec(rng, p)))
        .collect();
    let sparsity = dims.iter().map(|&p| random_budget(rng, p)).collect();
    Instance {
        bs,
        dg,
        coefs,
        sparsity,
    }
}

pub fn random_design(rng: &mut ChaCha8Rng, j: usize) -> DesignGraph {
    loop {
        let mut edges = Vec::new();
        for a in 0..j {
            for b in a + 1..j {
                if rng.random_bool(0.6) {
                    edges.push((a, b));
                }
            }
        }
        if let Ok(dg) = DesignGraph::from_edges(j, &edges) {
            return dg;
        }
    }
}
