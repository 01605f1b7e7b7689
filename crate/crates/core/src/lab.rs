//! Synthetic data, support-recovery metrics, design presets, sparsity grid
//! search and CSV block ingestion.
//!
//! The generator follows the latent-factor recipe `X_j = u_j w_j' + E_j`:
//! jointly normal scores `u` with unit variances and the given covariance,
//! sparse loadings `w_j` with magnitudes drawn uniformly from
//! `[lo, hi]` and a random sign on the first `support_size` entries, and
//! independent normal noise of variance `noise_var` (standard deviation
//! `sqrt(noise_var)`).

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::{array, Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{BlockSet, DesignGraph};

#[derive(Debug, Clone, PartialEq)]
pub struct GenSpec {
    pub n: usize,
    pub dims: Vec<usize>,
    /// Nonzero loadings per block, placed on the leading indices.
    pub support_size: usize,
    /// Magnitude interval `[lo, hi]` of the nonzero loadings.
    pub loading_range: (f64, f64),
    /// `J x J` covariance of the latent scores.
    pub u_cov: Array2<f64>,
    pub noise_var: f64,
    pub seed: u64,
}

impl GenSpec {
    /// Three blocks, `n = 50`, `p = (200, 500, 700)`, 75 nonzero loadings in
    /// `+-[0.2, 0.3]`, `cov(u_1, u_3) = cov(u_2, u_3) = 0.7`, `cov(u_1, u_2) = 0`,
    /// noise variance 0.2.
    pub fn standard(seed: u64) -> Self {
        GenSpec {
            n: 50,
            dims: vec![200, 500, 700],
            support_size: 75,
            loading_range: (0.2, 0.3),
            u_cov: array![[1.0, 0.0, 0.7], [0.0, 1.0, 0.7], [0.7, 0.7, 1.0]],
            noise_var: 0.2,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let j = self.dims.len();
        if j < 2 {
            return Err(Error::invalid(format!("need at least 2 blocks, got {j}")));
        }
        if self.n < 1 {
            return Err(Error::invalid("n must be positive"));
        }
        if let Some(p) = self.dims.iter().find(|&&p| p == 0) {
            return Err(Error::invalid(format!("block width {p} must be positive")));
        }
        let min_p = *self.dims.iter().min().expect("nonempty");
        if self.support_size == 0 || self.support_size > min_p {
            return Err(Error::invalid(format!(
                "support size {} must lie in [1, {min_p}]",
                self.support_size
            )));
        }
        let (lo, hi) = self.loading_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::invalid(format!(
                "loading range [{lo}, {hi}] must satisfy 0 < lo <= hi"
            )));
        }
        if !(self.noise_var >= 0.0 && self.noise_var.is_finite()) {
            return Err(Error::invalid(format!(
                "noise variance {} must be nonnegative",
                self.noise_var
            )));
        }
        if self.u_cov.dim() != (j, j) {
            return Err(Error::dims(format!(
                "latent covariance is {:?}, expected {j}x{j}",
                self.u_cov.dim()
            )));
        }
        psd_factor(&self.u_cov).map(|_| ())
    }
}

/// True loadings and the latent scores behind a generated data set.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub loadings: Vec<Array1<f64>>,
    pub supports: Vec<Vec<usize>>,
    /// `n x J`, column `j` is `u_j`.
    pub latent: Array2<f64>,
}

/// Lower-triangular `L` with `L L' = c`, allowing zero pivots for
/// semidefinite input.
fn psd_factor(c: &Array2<f64>) -> Result<Array2<f64>> {
    let j = c.nrows();
    let scale = c.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    let tol = 1e-12 * scale;
    for a in 0..j {
        for b in 0..a {
            if (c[[a, b]] - c[[b, a]]).abs() > tol {
                return Err(Error::invalid("latent covariance is not symmetric"));
            }
        }
    }
    let mut l = Array2::<f64>::zeros((j, j));
    for col in 0..j {
        let pivot = c[[col, col]] - (0..col).map(|k| l[[col, k]] * l[[col, k]]).sum::<f64>();
        if pivot < -tol {
            return Err(Error::invalid(
                "latent covariance is not positive semidefinite",
            ));
        }
        let d = pivot.max(0.0).sqrt();
        l[[col, col]] = d;
        for row in col + 1..j {
            let r = c[[row, col]] - (0..col).map(|k| l[[row, k]] * l[[col, k]]).sum::<f64>();
            if d <= tol.sqrt() {
                if r.abs() > tol.sqrt() {
                    return Err(Error::invalid(
                        "latent covariance is not positive semidefinite",
                    ));
                }
                l[[row, col]] = 0.0;
            } else {
                l[[row, col]] = r / d;
            }
        }
    }
    Ok(l)
}

/// Draws the blocks and their ground truth. Bit-identical per `spec.seed`.
pub fn generate(spec: &GenSpec) -> Result<(BlockSet, GroundTruth)> {
    spec.validate()?;
    let j = spec.dims.len();
    let factor = psd_factor(&spec.u_cov)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let z = Array2::from_shape_fn((spec.n, j), |_| StandardNormal.sample(&mut rng));
    let latent = z.dot(&factor.t());

    let (lo, hi) = spec.loading_range;
    let mut loadings = Vec::with_capacity(j);
    for &p in &spec.dims {
        let mut w = Array1::zeros(p);
        for i in 0..spec.support_size {
            let mag = rng.random_range(lo..=hi);
            w[i] = if rng.random_bool(0.5) { mag } else { -mag };
        }
        loadings.push(w);
    }

    let sd = spec.noise_var.sqrt();
    let mut blocks = Vec::with_capacity(j);
    for (b, w) in loadings.iter().enumerate() {
        let u = latent.column(b);
        let x = Array2::from_shape_fn((spec.n, w.len()), |(r, c)| {
            let e: f64 = StandardNormal.sample(&mut rng);
            u[r] * w[c] + sd * e
        });
        blocks.push(x);
    }

    let supports = vec![(0..spec.support_size).collect(); j];
    Ok((
        BlockSet::new(blocks)?,
        GroundTruth {
            loadings,
            supports,
            latent,
        },
    ))
}

fn check_same_len(a: &[f64], w: &[f64]) -> Result<()> {
    if a.len() == w.len() {
        Ok(())
    } else {
        Err(Error::dims(format!(
            "estimate has length {}, truth has {}",
            a.len(),
            w.len()
        )))
    }
}

/// Fraction of the true nonzeros that the estimate keeps nonzero.
pub fn sensitivity(a: &[f64], w: &[f64]) -> Result<f64> {
    check_same_len(a, w)?;
    let truth = w.iter().filter(|&&x| x != 0.0).count();
    if truth == 0 {
        return Err(Error::invalid(
            "sensitivity needs a truth vector with a nonzero entry",
        ));
    }
    let hit = a
        .iter()
        .zip(w)
        .filter(|(&ai, &wi)| ai != 0.0 && wi != 0.0)
        .count();
    Ok(hit as f64 / truth as f64)
}

/// Fraction of the true zeros that the estimate keeps at zero.
pub fn specificity(a: &[f64], w: &[f64]) -> Result<f64> {
    check_same_len(a, w)?;
    let truth = w.iter().filter(|&&x| x == 0.0).count();
    if truth == 0 {
        return Err(Error::invalid(
            "specificity needs a truth vector with a zero entry",
        ));
    }
    let hit = a
        .iter()
        .zip(w)
        .filter(|(&ai, &wi)| ai == 0.0 && wi == 0.0)
        .count();
    Ok(hit as f64 / truth as f64)
}

/// Three-block connection patterns: `complete`, `hierarchical` (blocks 1 and
/// 2 both linked to 3) and `cascade` (block 1 linked to 2 and 3).
pub fn design_preset(name: &str) -> Result<DesignGraph> {
    let edges: &[(usize, usize)] = match name {
        "complete" => &[(0, 1), (0, 2), (1, 2)],
        "hierarchical" => &[(0, 2), (1, 2)],
        "cascade" => &[(0, 1), (0, 2)],
        other => {
            return Err(Error::invalid(format!(
                "unknown design preset `{other}` (expected complete, hierarchical or cascade)"
            )))
        }
    };
    DesignGraph::from_edges(3, edges)
}

/// Above this many combinations [`grid_search`] switches to coordinate search.
pub const GRID_PRODUCT_CAP: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub best: Vec<f64>,
    pub score: f64,
    pub evaluations: usize,
    /// Whether the full product was scanned (otherwise coordinate search).
    pub exhaustive: bool,
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// Highest score, ties going to the lexicographically smallest tuple. NaN loses.
fn pick(scored: Vec<(Vec<f64>, f64)>) -> Option<(Vec<f64>, f64)> {
    scored.into_iter().reduce(|best, cand| {
        let (bs, cs) = (clean(best.1), clean(cand.1));
        if cs > bs || (cs == bs && lex_cmp(&cand.0, &best.0).is_lt()) {
            cand
        } else {
            best
        }
    })
}

fn clean(x: f64) -> f64 {
    if x.is_nan() {
        f64::NEG_INFINITY
    } else {
        x
    }
}

fn evaluate<F>(tuples: Vec<Vec<f64>>, score: &F) -> Result<Vec<(Vec<f64>, f64)>>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    tuples
        .into_par_iter()
        .map(|t| score(&t).map(|s| (t, s)))
        .collect()
}

/// Maximizes `score` over per-block sparsity candidates.
///
/// Scans the full Cartesian product when it has at most
/// [`GRID_PRODUCT_CAP`] tuples, otherwise runs cyclic coordinate search from
/// the tuple of smallest candidates until a full cycle changes nothing.
/// Candidates are evaluated in parallel; the result does not depend on the
/// evaluation order.
pub fn grid_search<F>(dims: &[usize], grids: &[Vec<f64>], score: F) -> Result<GridResult>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    if grids.len() != dims.len() {
        return Err(Error::dims(format!(
            "{} grids for {} blocks",
            grids.len(),
            dims.len()
        )));
    }
    let mut axes = Vec::with_capacity(grids.len());
    for (j, (g, &p)) in grids.iter().zip(dims).enumerate() {
        if g.is_empty() {
            return Err(Error::invalid(format!("grid for block {} is empty", j + 1)));
        }
        let upper = (p as f64).sqrt();
        if let Some(s) = g.iter().find(|&&s| !(s > 1.0 && s < upper)) {
            return Err(Error::invalid(format!(
                "candidate {s} for block {} is outside (1, {upper:.6})",
                j + 1
            )));
        }
        let mut axis = g.clone();
        axis.sort_by(f64::total_cmp);
        axis.dedup();
        axes.push(axis);
    }

    let total = axes
        .iter()
        .try_fold(1usize, |acc, a| acc.checked_mul(a.len()));
    if let Some(total) = total.filter(|&t| t <= GRID_PRODUCT_CAP) {
        let mut tuples = vec![Vec::new()];
        for axis in &axes {
            tuples = tuples
                .into_iter()
                .flat_map(|t| {
                    axis.iter().map(move |&s| {
                        let mut t = t.clone();
                        t.push(s);
                        t
                    })
                })
                .collect();
        }
        let (best, score) = pick(evaluate(tuples, &score)?).expect("nonempty product");
        return Ok(GridResult {
            best,
            score,
            evaluations: total,
            exhaustive: true,
        });
    }

    let mut current: Vec<f64> = axes.iter().map(|a| a[0]).collect();
    let mut current_score = clean(score(&current)?);
    let mut evaluations = 1;
    loop {
        let mut changed = false;
        for (j, axis) in axes.iter().enumerate() {
            let tuples = axis
                .iter()
                .map(|&s| {
                    let mut t = current.clone();
                    t[j] = s;
                    t
                })
                .collect();
            evaluations += axis.len();
            let (best, s) = pick(evaluate(tuples, &score)?).expect("nonempty axis");
            if clean(s) > current_score {
                current = best;
                current_score = clean(s);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(GridResult {
        best: current,
        score: current_score,
        evaluations,
        exhaustive: false,
    })
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Reads one comma-separated block with a header row of variable names.
pub fn read_block(path: &Path) -> Result<Array2<f64>> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let width = reader
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .len();
    let mut data = Vec::new();
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            parse_err(path, line, e.to_string())
        })?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(rows + 2);
        if record.len() != width {
            return Err(parse_err(
                path,
                line,
                format!("expected {width} fields, found {}", record.len()),
            ));
        }
        for (c, cell) in record.iter().enumerate() {
            let value: f64 = cell.trim().parse().map_err(|_| {
                parse_err(
                    path,
                    line,
                    format!("column {}: `{cell}` is not a number", c + 1),
                )
            })?;
            if !value.is_finite() {
                return Err(parse_err(
                    path,
                    line,
                    format!("column {}: non-finite value", c + 1),
                ));
            }
            data.push(value);
        }
        rows += 1;
    }
    if rows == 0 || width == 0 {
        return Err(parse_err(path, 1, "no data rows"));
    }
    Ok(Array2::from_shape_vec((rows, width), data).expect("rows checked"))
}

/// Loads one CSV per block; every file must have the same number of rows.
pub fn load_blocks<P: AsRef<Path>>(paths: &[P], standardize: bool) -> Result<BlockSet> {
    let mut blocks: Vec<Array2<f64>> = Vec::with_capacity(paths.len());
    for path in paths {
        let path = path.as_ref();
        let x = read_block(path)?;
        if let Some(first) = blocks.first() {
            if first.nrows() != x.nrows() {
                return Err(Error::dims(format!(
                    "{} has {} rows but {} has {}",
                    paths[0].as_ref().display(),
                    first.nrows(),
                    path.display(),
                    x.nrows()
                )));
            }
        }
        let x = if standardize {
            crate::model::standardize_columns(&x)?
        } else {
            x
        };
        blocks.push(x);
    }
    BlockSet::new(blocks)
}

/// Writes a matrix as CSV with header `prefix1,prefix2,...`. Values use
/// Rust's shortest round-trip formatting so a reload is exact.
pub fn write_block(path: &Path, x: &Array2<f64>, prefix: &str) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut writer = csv::Writer::from_writer(file);
    let header: Vec<String> = (1..=x.ncols()).map(|c| format!("{prefix}{c}")).collect();
    let wrap = |e: csv::Error| io_err(path, std::io::Error::other(e.to_string()));
    writer.write_record(&header).map_err(wrap)?;
    for row in x.rows() {
        writer
            .write_record(row.iter().map(|v| v.to_string()))
            .map_err(wrap)?;
    }
    writer.flush().map_err(|e| io_err(path, e))
}

/// Writes `text` to `path`, creating or truncating it.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut file = File::create(path).map_err(|e| io_err(path, e))?;
    file.write_all(text.as_bytes()).map_err(|e| io_err(path, e))
}

/// `dir/name`, as a `PathBuf`.
pub fn join(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}
