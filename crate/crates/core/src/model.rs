//! Blocks, design graph, schemes and the SGCCA objective.
//!
//! ```text
//! h(a_1..a_J) = sum_{j != k} c_jk g(cov(X_j a_j, X_k a_k)),   cov(y, z) = y.z / n
//! z_j         = sum_{k != j} c_jk w(cov(X_j a_j, X_k a_k)) X_k a_k
//! ```
//!
//! Covariances use `1/n`, never `1/(n-1)`, and [`standardize_columns`]
//! follows the same convention so a standardized column has `cov(x, x) = 1`.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::error::{Error, Result};
use crate::geometry::Variant;

/// `J >= 2` sample-aligned data blocks, block `j` being `n x p_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSet {
    blocks: Vec<Array2<f64>>,
    n: usize,
}

impl BlockSet {
    pub fn new(blocks: Vec<Array2<f64>>) -> Result<Self> {
        if blocks.len() < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 blocks, got {}",
                blocks.len()
            )));
        }
        let n = blocks[0].nrows();
        if n == 0 {
            return Err(Error::invalid("blocks have no rows"));
        }
        for (j, b) in blocks.iter().enumerate() {
            if b.nrows() != n {
                return Err(Error::dims(format!(
                    "block {} has {} rows, block 1 has {n}",
                    j + 1,
                    b.nrows()
                )));
            }
            if b.ncols() == 0 {
                return Err(Error::invalid(format!("block {} has no columns", j + 1)));
            }
            if b.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid(format!(
                    "block {} has a non-finite entry",
                    j + 1
                )));
            }
        }
        Ok(BlockSet { blocks, n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn block(&self, j: usize) -> &Array2<f64> {
        &self.blocks[j]
    }

    pub fn blocks(&self) -> &[Array2<f64>] {
        &self.blocks
    }

    pub fn dims(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.ncols()).collect()
    }

    pub fn standardized(&self) -> Result<BlockSet> {
        let blocks = self
            .blocks
            .iter()
            .map(standardize_columns)
            .collect::<Result<Vec<_>>>()?;
        BlockSet::new(blocks)
    }

    /// Checks that `coefs` has one vector of length `p_j` per block.
    pub fn check_coefs(&self, coefs: &[Array1<f64>]) -> Result<()> {
        if coefs.len() != self.len() {
            return Err(Error::dims(format!(
                "{} coefficient vectors for {} blocks",
                coefs.len(),
                self.len()
            )));
        }
        for (j, (a, x)) in coefs.iter().zip(&self.blocks).enumerate() {
            if a.len() != x.ncols() {
                return Err(Error::dims(format!(
                    "coefficient vector {} has length {}, block has {} columns",
                    j + 1,
                    a.len(),
                    x.ncols()
                )));
            }
        }
        Ok(())
    }

    /// Block scores `X_j a_j`.
    pub fn scores(&self, coefs: &[Array1<f64>]) -> Result<Vec<Array1<f64>>> {
        self.check_coefs(coefs)?;
        Ok(self
            .blocks
            .iter()
            .zip(coefs)
            .map(|(x, a)| x.dot(a))
            .collect())
    }
}

/// Symmetric 0/1 connection matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignGraph {
    c: Array2<f64>,
}

impl DesignGraph {
    pub fn new(c: Array2<f64>) -> Result<Self> {
        let (rows, cols) = c.dim();
        if rows != cols {
            return Err(Error::invalid(format!(
                "design matrix is {rows}x{cols}, not square"
            )));
        }
        let mut edges = 0;
        for j in 0..rows {
            if c[[j, j]] != 0.0 {
                return Err(Error::invalid(format!("design matrix has c[{j},{j}] != 0")));
            }
            for k in 0..rows {
                let v = c[[j, k]];
                if v != 0.0 && v != 1.0 {
                    return Err(Error::invalid(format!(
                        "design entry c[{j},{k}] = {v} is not 0 or 1"
                    )));
                }
                if v != c[[k, j]] {
                    return Err(Error::invalid(format!(
                        "design matrix is not symmetric at ({j},{k})"
                    )));
                }
                edges += (v == 1.0) as usize;
            }
        }
        if edges == 0 {
            return Err(Error::invalid("design matrix connects no blocks"));
        }
        Ok(DesignGraph { c })
    }

    /// Builds the graph on `size` blocks from undirected 0-based edges.
    pub fn from_edges(size: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut c = Array2::zeros((size, size));
        for &(j, k) in edges {
            if j >= size || k >= size {
                return Err(Error::invalid(format!(
                    "edge ({j},{k}) outside {size} blocks"
                )));
            }
            c[[j, k]] = 1.0;
            c[[k, j]] = 1.0;
        }
        DesignGraph::new(c)
    }

    pub fn size(&self) -> usize {
        self.c.nrows()
    }

    pub fn weight(&self, j: usize, k: usize) -> f64 {
        self.c[[j, k]]
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.c
    }

    /// Blocks connected to `j`.
    pub fn neighbors(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        self.c
            .row(j)
            .into_iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(k, _)| k)
    }

    pub(crate) fn check_blocks(&self, bs: &BlockSet) -> Result<()> {
        if self.size() != bs.len() {
            return Err(Error::dims(format!(
                "design matrix is {}x{} but there are {} blocks",
                self.size(),
                self.size(),
                bs.len()
            )));
        }
        Ok(())
    }
}

/// The function `g` applied to block covariances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// `g(x) = x`
    Horst,
    /// `g(x) = |x|`
    Centroid,
    /// `g(x) = x^2`
    Factorial,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Horst, Scheme::Centroid, Scheme::Factorial];

    pub fn g(self, x: f64) -> f64 {
        match self {
            Scheme::Horst => x,
            Scheme::Centroid => x.abs(),
            Scheme::Factorial => x * x,
        }
    }

    /// Inner-component weight `g'(x) / divisor`.
    pub fn w(self, x: f64) -> f64 {
        match self {
            Scheme::Horst => 1.0,
            Scheme::Centroid => {
                if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            Scheme::Factorial => x,
        }
    }

    pub fn divisor(self) -> f64 {
        match self {
            Scheme::Horst | Scheme::Centroid => 1.0,
            Scheme::Factorial => 2.0,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Horst => "horst",
            Scheme::Centroid => "centroid",
            Scheme::Factorial => "factorial",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "horst" => Ok(Scheme::Horst),
            "centroid" => Ok(Scheme::Centroid),
            "factorial" => Ok(Scheme::Factorial),
            other => Err(Error::invalid(format!(
                "unknown scheme `{other}` (expected horst, centroid or factorial)"
            ))),
        }
    }
}

/// Block coefficient vectors together with their constraint sets.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefState {
    coefs: Vec<Array1<f64>>,
    variant: Variant,
    sparsity: Vec<f64>,
}

impl CoefState {
    /// Validates shapes and `1 < s_j < sqrt(p_j)`. Feasibility of the vectors
    /// themselves is the solvers' job; see [`CoefState::is_feasible`].
    pub fn new(coefs: Vec<Array1<f64>>, variant: Variant, sparsity: Vec<f64>) -> Result<Self> {
        check_sparsity(
            &coefs.iter().map(|a| a.len()).collect::<Vec<_>>(),
            &sparsity,
        )?;
        Ok(CoefState {
            coefs,
            variant,
            sparsity,
        })
    }

    pub fn coefs(&self) -> &[Array1<f64>] {
        &self.coefs
    }

    pub fn into_coefs(self) -> Vec<Array1<f64>> {
        self.coefs
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn sparsity(&self) -> &[f64] {
        &self.sparsity
    }

    pub fn is_feasible(&self) -> bool {
        self.coefs.iter().zip(&self.sparsity).all(|(a, &s)| {
            self.variant
                .is_feasible(a.as_slice().expect("contiguous"), s)
        })
    }
}

/// `1 < s_j < sqrt(p_j)` for every block.
pub fn check_sparsity(dims: &[usize], sparsity: &[f64]) -> Result<()> {
    if dims.len() != sparsity.len() {
        return Err(Error::dims(format!(
            "{} sparsity values for {} blocks",
            sparsity.len(),
            dims.len()
        )));
    }
    for (j, (&p, &s)) in dims.iter().zip(sparsity).enumerate() {
        let upper = (p as f64).sqrt();
        if !(s > 1.0 && s < upper) {
            return Err(Error::invalid(format!(
                "sparsity s_{} = {s} must lie in (1, sqrt({p}) = {upper:.6})",
                j + 1
            )));
        }
    }
    Ok(())
}

/// `(1/n) a_j' X_j' X_k a_k`.
pub fn block_cov(
    xj: &Array2<f64>,
    aj: &Array1<f64>,
    xk: &Array2<f64>,
    ak: &Array1<f64>,
) -> Result<f64> {
    if xj.nrows() != xk.nrows() {
        return Err(Error::dims(format!(
            "blocks have {} and {} rows",
            xj.nrows(),
            xk.nrows()
        )));
    }
    if xj.ncols() != aj.len() || xk.ncols() != ak.len() {
        return Err(Error::dims("coefficient length does not match block width"));
    }
    Ok(xj.dot(aj).dot(&xk.dot(ak)) / xj.nrows() as f64)
}

/// `X' z`, accumulated row by row so every access is contiguous.
pub(crate) fn xt_dot(x: &Array2<f64>, z: &Array1<f64>) -> Array1<f64> {
    let mut out = Array1::zeros(x.ncols());
    for (row, &zi) in x.rows().into_iter().zip(z) {
        if zi != 0.0 {
            out.scaled_add(zi, &row);
        }
    }
    out
}

pub(crate) fn cov_of(y: ArrayView1<f64>, z: ArrayView1<f64>, n: usize) -> f64 {
    y.dot(&z) / n as f64
}

pub(crate) fn objective_from_scores(
    dg: &DesignGraph,
    scheme: Scheme,
    scores: &[Array1<f64>],
    n: usize,
) -> f64 {
    let mut h = 0.0;
    for j in 0..scores.len() {
        for k in dg.neighbors(j) {
            h += dg.weight(j, k) * scheme.g(cov_of(scores[j].view(), scores[k].view(), n));
        }
    }
    h
}

pub(crate) fn inner_from_scores(
    dg: &DesignGraph,
    scheme: Scheme,
    scores: &[Array1<f64>],
    j: usize,
    n: usize,
) -> Array1<f64> {
    let mut z = Array1::zeros(n);
    for k in dg.neighbors(j) {
        let weight = dg.weight(j, k) * scheme.w(cov_of(scores[j].view(), scores[k].view(), n));
        if weight != 0.0 {
            z.scaled_add(weight, &scores[k]);
        }
    }
    z
}

/// `h = sum_{j != k} c_jk g(cov(X_j a_j, X_k a_k))`, each unordered pair counted twice.
pub fn objective_h(
    bs: &BlockSet,
    dg: &DesignGraph,
    scheme: Scheme,
    coefs: &[Array1<f64>],
) -> Result<f64> {
    dg.check_blocks(bs)?;
    let scores = bs.scores(coefs)?;
    Ok(objective_from_scores(dg, scheme, &scores, bs.n()))
}

/// Inner component `z_j` for the current coefficient snapshot.
///
/// In a Gauss-Seidel sweep `coefs` already holds the updated vectors for
/// blocks before `j` and the previous ones from `j` on, so passing the
/// working state reproduces the sweep's prefix/suffix convention.
pub fn inner_component(
    bs: &BlockSet,
    dg: &DesignGraph,
    scheme: Scheme,
    coefs: &[Array1<f64>],
    j: usize,
) -> Result<Array1<f64>> {
    dg.check_blocks(bs)?;
    if j >= bs.len() {
        return Err(Error::invalid(format!("block index {j} out of range")));
    }
    let scores = bs.scores(coefs)?;
    Ok(inner_from_scores(dg, scheme, &scores, j, bs.n()))
}

/// Both sides of `sum_{j != k} c_jk g(cov_jk) = sum_j cov(X_j a_j, z_j)`.
///
/// The right side is the raw sum for every scheme. For the factorial scheme
/// `w(x) = x` already carries the halved derivative, so `w(x) x = g(x)` and
/// the two sides balance without further bookkeeping.
pub fn identity_check(
    bs: &BlockSet,
    dg: &DesignGraph,
    scheme: Scheme,
    coefs: &[Array1<f64>],
) -> Result<(f64, f64)> {
    dg.check_blocks(bs)?;
    let scores = bs.scores(coefs)?;
    let n = bs.n();
    let lhs = objective_from_scores(dg, scheme, &scores, n);
    let rhs = (0..bs.len())
        .map(|j| {
            cov_of(
                scores[j].view(),
                inner_from_scores(dg, scheme, &scores, j, n).view(),
                n,
            )
        })
        .sum();
    Ok((lhs, rhs))
}

/// Centers each column and scales it to unit `1/n` variance.
pub fn standardize_columns(x: &Array2<f64>) -> Result<Array2<f64>> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::invalid(format!(
            "standardization needs at least 2 rows, got {n}"
        )));
    }
    let mut out = x.clone();
    for (c, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
        let mean = col.sum() / n as f64;
        col.mapv_inplace(|v| v - mean);
        let var = col.dot(&col) / n as f64;
        let scale = col
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(mean.abs());
        if var <= 0.0 || var.sqrt() <= 1e-12 * scale {
            return Err(Error::DegenerateColumn { column: c });
        }
        let sd = var.sqrt();
        col.mapv_inplace(|v| v / sd);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};

    fn toy() -> (BlockSet, DesignGraph) {
        let bs = BlockSet::new(vec![array![[1.0]], array![[2.0]]]).unwrap();
        let dg = DesignGraph::from_edges(2, &[(0, 1)]).unwrap();
        (bs, dg)
    }

    #[test]
    fn block_cov_toy() {
        let (bs, _) = toy();
        let one = array![1.0];
        assert_eq!(
            block_cov(bs.block(0), &one, bs.block(1), &one).unwrap(),
            2.0
        );
        assert_eq!(
            block_cov(bs.block(0), &array![0.0], bs.block(1), &one).unwrap(),
            0.0
        );
    }

    #[test]
    fn block_cov_self_is_nonnegative() {
        let x = array![[1.0, -2.0], [0.5, 3.0], [-1.0, 0.0]];
        let a = array![0.3, -0.7];
        let c = block_cov(&x, &a, &x, &a).unwrap();
        assert_abs_diff_eq!(c, x.dot(&a).dot(&x.dot(&a)) / 3.0, epsilon = 1e-15);
        assert!(c >= 0.0);
    }

    #[test]
    fn block_cov_dimension_mismatch() {
        let x = Array2::<f64>::zeros((3, 2));
        let y = Array2::<f64>::zeros((4, 2));
        let a = array![1.0, 0.0];
        assert!(matches!(
            block_cov(&x, &a, &y, &a),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            block_cov(&x, &array![1.0], &x, &a),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn objective_toy_counts_both_orders() {
        let (bs, dg) = toy();
        let a = vec![array![1.0], array![1.0]];
        assert_eq!(objective_h(&bs, &dg, Scheme::Horst, &a).unwrap(), 4.0);
        let zero = vec![array![0.0], array![0.0]];
        for scheme in Scheme::ALL {
            assert_eq!(objective_h(&bs, &dg, scheme, &zero).unwrap(), 0.0);
        }
    }

    #[test]
    fn centroid_ignores_sign_flip() {
        let (bs, dg) = toy();
        let a = vec![array![1.0], array![1.0]];
        let flipped = vec![array![1.0], array![-1.0]];
        assert_eq!(
            objective_h(&bs, &dg, Scheme::Centroid, &a).unwrap(),
            objective_h(&bs, &dg, Scheme::Centroid, &flipped).unwrap()
        );
        assert_eq!(
            objective_h(&bs, &dg, Scheme::Horst, &flipped).unwrap(),
            -4.0
        );
    }

    #[test]
    fn inner_component_skips_unconnected_blocks() {
        let x1 = array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let x2 = array![[5.0], [-1.0], [2.0]];
        let x3 = array![[0.5, 1.0], [2.0, 0.0], [1.0, -1.0]];
        let bs = BlockSet::new(vec![x1, x2.clone(), x3.clone()]).unwrap();
        let dg = DesignGraph::from_edges(3, &[(0, 2), (1, 2)]).unwrap();
        let coefs = vec![array![0.6, 0.8], array![1.0], array![1.0, 0.0]];
        let z1 = inner_component(&bs, &dg, Scheme::Horst, &coefs, 0).unwrap();
        assert_eq!(z1, x3.dot(&coefs[2]));
        let z3 = inner_component(&bs, &dg, Scheme::Horst, &coefs, 2).unwrap();
        let expected = bs.block(0).dot(&coefs[0]) + x2.dot(&coefs[1]);
        for (a, b) in z3.iter().zip(expected.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn centroid_matches_horst_with_positive_covariances() {
        let (bs, dg) = toy();
        let a = vec![array![1.0], array![0.5]];
        for j in 0..2 {
            assert_eq!(
                inner_component(&bs, &dg, Scheme::Centroid, &a, j).unwrap(),
                inner_component(&bs, &dg, Scheme::Horst, &a, j).unwrap()
            );
        }
    }

    #[test]
    fn identity_zero_coefs() {
        let (bs, dg) = toy();
        let zero = vec![array![0.0], array![0.0]];
        for scheme in Scheme::ALL {
            assert_eq!(identity_check(&bs, &dg, scheme, &zero).unwrap(), (0.0, 0.0));
        }
    }

    #[test]
    fn scheme_weight_is_scaled_derivative() {
        for x in [-2.0, -0.3, 0.7, 4.0] {
            let eps = 1e-6;
            for scheme in Scheme::ALL {
                let deriv = (scheme.g(x + eps) - scheme.g(x - eps)) / (2.0 * eps);
                assert_abs_diff_eq!(scheme.w(x), deriv / scheme.divisor(), epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn standardize_examples() {
        let x = array![[1.0], [-1.0]];
        assert_eq!(standardize_columns(&x).unwrap(), x);
        let y = array![[1.0, 10.0], [2.0, 20.0], [6.0, 0.0]];
        let s = standardize_columns(&y).unwrap();
        for col in s.axis_iter(Axis(1)) {
            assert_abs_diff_eq!(col.sum(), 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(col.dot(&col) / 3.0, 1.0, epsilon = 1e-12);
        }
        let again = standardize_columns(&s).unwrap();
        for (a, b) in again.iter().zip(s.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        let bad = array![[1.0, 5.0], [2.0, 5.0]];
        assert!(matches!(
            standardize_columns(&bad),
            Err(Error::DegenerateColumn { column: 1 })
        ));
    }

    #[test]
    fn design_validation() {
        assert!(DesignGraph::new(array![[0.0, 1.0], [0.0, 0.0]]).is_err());
        assert!(DesignGraph::new(array![[1.0, 1.0], [1.0, 0.0]]).is_err());
        assert!(DesignGraph::new(array![[0.0, 0.0], [0.0, 0.0]]).is_err());
        assert!(DesignGraph::new(array![[0.0, 0.5], [0.5, 0.0]]).is_err());
        let dg = DesignGraph::from_edges(3, &[(0, 2)]).unwrap();
        assert_eq!(dg.neighbors(2).collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn blockset_validation() {
        assert!(BlockSet::new(vec![Array2::zeros((3, 2))]).is_err());
        assert!(matches!(
            BlockSet::new(vec![Array2::zeros((3, 2)), Array2::zeros((4, 2))]),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(BlockSet::new(vec![Array2::zeros((3, 2)), Array2::zeros((3, 0))]).is_err());
    }

    #[test]
    fn sparsity_bounds() {
        assert!(check_sparsity(&[4, 9], &[1.5, 2.9]).is_ok());
        assert!(check_sparsity(&[4, 9], &[1.0, 2.9]).is_err());
        assert!(check_sparsity(&[4, 9], &[1.5, 3.0]).is_err());
        assert!(check_sparsity(&[4, 9], &[1.5]).is_err());
    }
}
