use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use ndarray::{Array1, Array2};
use sgcca::{
    design_preset, fit_baseline, fit_bcd, fit_gp, generate, grid_search, load_blocks,
    project_omega, read_block, sensitivity, solve_lm, specificity, write_block, BcdConfig,
    BlockSet, DesignGraph, GenSpec, GpConfig, Scheme, SolverReport, Variant,
};

use crate::output::{num, num_list, write, write_vector, Report};
use crate::settings::{parse_list, parse_value, split_list, Settings};
use crate::CliError;

const DEFAULT_DESIGN: &str = "hierarchical";
const DEFAULT_ALGOS: &str = "baseline,bcd1,bcd2,bcd3";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    Bcd(Variant),
    Gp(Variant),
    Baseline,
}

impl FromStr for Algo {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let s = s.trim().to_ascii_lowercase();
        let variant = |d: &str| d.parse::<Variant>().ok();
        let algo = match s.as_str() {
            "baseline" => Some(Algo::Baseline),
            _ if s.starts_with("bcd") => variant(&s[3..]).map(Algo::Bcd),
            _ if s.starts_with("gp") => variant(&s[2..]).map(Algo::Gp),
            _ => None,
        };
        algo.ok_or_else(|| {
            CliError::new(
                "invalid-argument",
                format!(
                    "unknown algo `{s}` (expected bcd1, bcd2, bcd3, gp1, gp2, gp3 or baseline)"
                ),
            )
        })
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digit = |v: &Variant| v.to_string()[1..].to_string();
        match self {
            Algo::Bcd(v) => write!(f, "bcd{}", digit(v)),
            Algo::Gp(v) => write!(f, "gp{}", digit(v)),
            Algo::Baseline => f.write_str("baseline"),
        }
    }
}

impl Algo {
    fn default_tol(self) -> &'static str {
        match self {
            Algo::Gp(_) => "1e-6",
            _ => "1e-8",
        }
    }

    fn default_max_iters(self) -> &'static str {
        match self {
            Algo::Gp(_) => "10000",
            _ => "1000",
        }
    }
}

/// gp* only supports the Horst scheme; checked before any data is read.
fn check_compatible(algo: Algo, scheme: Scheme) -> Result<(), CliError> {
    if matches!(algo, Algo::Gp(_)) && scheme != Scheme::Horst {
        return Err(CliError::new(
            "unsupported-scheme",
            format!("{algo} requires the horst scheme, got {scheme}"),
        ));
    }
    Ok(())
}

/// Solver parameters shared by one run.
#[derive(Debug, Clone)]
struct Solver {
    scheme: Scheme,
    tol: Option<f64>,
    max_iters: Option<usize>,
}

impl Solver {
    fn from_settings(s: &Settings, algos: &[Algo]) -> Result<Self, CliError> {
        let scheme: Scheme = s.parsed("scheme", "horst")?;
        for &algo in algos {
            check_compatible(algo, scheme)?;
        }
        // a single algorithm reports its default; a mix keeps per-algorithm defaults
        let (tol, max_iters) = match algos {
            [one] => (
                Some(s.parsed("tol", one.default_tol())?),
                Some(s.parsed("max_iters", one.default_max_iters())?),
            ),
            _ => (
                s.text("tol", None)
                    .map(|v| parse_value("tol", &v))
                    .transpose()?,
                s.text("max_iters", None)
                    .map(|v| parse_value("max_iters", &v))
                    .transpose()?,
            ),
        };
        Ok(Solver {
            scheme,
            tol,
            max_iters,
        })
    }

    fn run(
        &self,
        algo: Algo,
        data: &Data,
        sparsity: &[f64],
        seed: u64,
    ) -> Result<SolverReport, CliError> {
        let bcd = |variant| {
            let mut cfg = BcdConfig::new(variant, self.scheme, sparsity.to_vec());
            cfg.seed = seed;
            if let Some(t) = self.tol {
                cfg.epsilon = t;
            }
            if let Some(m) = self.max_iters {
                cfg.max_sweeps = m;
            }
            cfg
        };
        let report = match algo {
            Algo::Bcd(v) => fit_bcd(&data.blocks, &data.design, &bcd(v))?,
            Algo::Baseline => fit_baseline(&data.blocks, &data.design, &bcd(Variant::P3))?,
            Algo::Gp(v) => {
                let mut cfg = GpConfig::new(v, sparsity.to_vec());
                cfg.scheme = self.scheme;
                cfg.seed = seed;
                if let Some(t) = self.tol {
                    cfg.tol = t;
                }
                if let Some(m) = self.max_iters {
                    cfg.max_iters = m;
                }
                fit_gp(&data.blocks, &data.design, &cfg)?
            }
        };
        Ok(report)
    }
}

struct Data {
    blocks: BlockSet,
    design: DesignGraph,
    truth: Option<Vec<Array1<f64>>>,
}

fn read_design(spec: &str) -> Result<DesignGraph, CliError> {
    let path = Path::new(spec);
    if path.is_file() {
        Ok(DesignGraph::new(read_block(path)?)?)
    } else {
        Ok(design_preset(spec)?)
    }
}

/// Reads a ground-truth table with columns `block, variable, loading` (1-based).
fn read_truth(path: &Path, dims: &[usize]) -> Result<Vec<Array1<f64>>, CliError> {
    let table = read_block(path)?;
    let bad = |msg: String| CliError::new("invalid-argument", format!("{}: {msg}", path.display()));
    if table.ncols() != 3 {
        return Err(bad(format!(
            "expected columns block,variable,loading, found {}",
            table.ncols()
        )));
    }
    let mut out: Vec<Array1<f64>> = dims.iter().map(|&p| Array1::zeros(p)).collect();
    for (r, row) in table.rows().into_iter().enumerate() {
        let (b, v) = (row[0], row[1]);
        let index = |x: f64, len: usize| {
            (x.fract() == 0.0 && x >= 1.0 && x <= len as f64).then(|| x as usize - 1)
        };
        let j = index(b, dims.len())
            .ok_or_else(|| bad(format!("row {}: block {b} out of range", r + 1)))?;
        let i = index(v, dims[j])
            .ok_or_else(|| bad(format!("row {}: variable {v} out of range", r + 1)))?;
        out[j][i] = row[2];
    }
    Ok(out)
}

fn truth_table(loadings: &[Array1<f64>]) -> String {
    let mut text = String::from("block,variable,loading\n");
    for (j, w) in loadings.iter().enumerate() {
        for (i, &x) in w.iter().enumerate() {
            text.push_str(&format!("{},{},{}\n", j + 1, i + 1, num(x)));
        }
    }
    text
}

/// Loads `--blocks`, or generates the default synthetic set when `generate_seed`
/// is given and no blocks are named.
fn load_data(s: &Settings, generate_seed: Option<u64>) -> Result<Data, CliError> {
    let standardize = s.flag("standardize")?;
    let (blocks, generated) = match (s.paths("blocks"), generate_seed) {
        (Some(paths), _) => (load_blocks(&paths, standardize)?, None),
        (None, Some(seed)) => {
            let (bs, gt) = generate(&GenSpec::standard(seed))?;
            let bs = if standardize { bs.standardized()? } else { bs };
            (bs, Some(gt.loadings))
        }
        (None, None) => return Err(s.required("blocks").unwrap_err()),
    };
    let design = read_design(
        &s.text("design", Some(DEFAULT_DESIGN))
            .expect("default given"),
    )?;
    let truth = match s.path("ground_truth") {
        Some(p) => Some(read_truth(&p, &blocks.dims())?),
        None => generated,
    };
    Ok(Data {
        blocks,
        design,
        truth,
    })
}

fn out_dir(s: &Settings) -> Result<Option<PathBuf>, CliError> {
    let Some(dir) = s.path("out") else {
        return Ok(None);
    };
    fs::create_dir_all(&dir)
        .map_err(|e| CliError::new("io-error", format!("{}: {e}", dir.display())))?;
    Ok(Some(dir))
}

fn recovery(
    coefs: &[Array1<f64>],
    truth: &[Array1<f64>],
) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    if coefs.len() != truth.len() {
        return Err(CliError::new(
            "dimension-mismatch",
            format!(
                "{} blocks but {} ground-truth blocks",
                coefs.len(),
                truth.len()
            ),
        ));
    }
    let mut sens = Vec::new();
    let mut spec = Vec::new();
    for (a, w) in coefs.iter().zip(truth) {
        let (a, w) = (a.to_vec(), w.to_vec());
        sens.push(sensitivity(&a, &w)?);
        spec.push(specificity(&a, &w)?);
    }
    Ok((sens, spec))
}

fn config_lines(report: &mut Report, s: &Settings) {
    for (k, v) in s.resolved() {
        report.line(&k, v);
    }
}

pub fn gen(s: &Settings) -> Result<(), CliError> {
    let seed: u64 = s.parsed("seed", "0")?;
    let mut spec = GenSpec::standard(seed);
    spec.n = s.parsed("n", &spec.n.to_string())?;
    if let Some(dims) = s.text("dims", None) {
        spec.dims = parse_list("dims", &dims)?;
    } else {
        s.text(
            "dims",
            Some(&num_list(
                &spec.dims.iter().map(|&p| p as f64).collect::<Vec<_>>(),
            )),
        );
    }
    spec.support_size = s.parsed("support", &spec.support_size.to_string())?;
    spec.noise_var = s.parsed("noise_var", &num(spec.noise_var))?;
    let dir = out_dir(s)?.ok_or_else(|| s.required("out").unwrap_err())?;
    // the default latent covariance is 3x3; other block counts get independent
    // latent blocks all linked to the last one at 0.7
    let j = spec.dims.len();
    if j != 3 && j >= 2 {
        spec.u_cov = Array2::from_shape_fn((j, j), |(a, b)| match (a, b) {
            _ if a == b => 1.0,
            _ if a == j - 1 || b == j - 1 => 0.7,
            _ => 0.0,
        });
    }
    let (bs, gt) = generate(&spec)?;
    let mut files = Vec::new();
    for (k, x) in bs.blocks().iter().enumerate() {
        let name = format!("block{}.csv", k + 1);
        write_block(&dir.join(&name), x, "x")?;
        files.push(name);
    }
    write(&dir.join("truth.csv"), &truth_table(&gt.loadings))?;
    let mut manifest = Report::default();
    config_lines(&mut manifest, s);
    manifest
        .line(
            "loading_range",
            num_list(&[spec.loading_range.0, spec.loading_range.1]),
        )
        .line(
            "u_cov",
            num_list(spec.u_cov.as_slice().expect("standard layout")),
        )
        .line("blocks", files.join(","))
        .line("ground_truth", "truth.csv");
    write(&dir.join("manifest.txt"), manifest.as_str())?;
    print!("{}", manifest.as_str());
    Ok(())
}

fn sparsity_for(s: &Settings) -> Result<Vec<f64>, CliError> {
    let raw = s.required("sparsity")?;
    parse_list("sparsity", &raw)
}

pub fn fit(s: &Settings) -> Result<(), CliError> {
    let algo: Algo = s.parsed("algo", "bcd3")?;
    let solver = Solver::from_settings(s, &[algo])?;
    let sparsity = sparsity_for(s)?;
    let seed: u64 = s.parsed("seed", "0")?;
    let data = load_data(s, None)?;
    let dir = out_dir(s)?;
    let rep = solver.run(algo, &data, &sparsity, seed)?;

    let mut report = Report::default();
    report.line("command", "fit");
    config_lines(&mut report, s);
    report
        .line("iterations", rep.iterations)
        .line("converged", rep.converged)
        .line("wall_time_secs", num(rep.wall_time.as_secs_f64()))
        .line("final_objective", num(rep.final_objective()))
        .line("stationarity_residual", num(rep.stationarity_residual))
        .line("path_length", num(rep.path_length()))
        .line("degenerate_updates", rep.degenerate_updates)
        .line("search_failures", rep.search_failures)
        .line("objective_trace", num_list(&rep.objective_trace));
    if let Some(truth) = &data.truth {
        let (sens, spec) = recovery(rep.state.coefs(), truth)?;
        report
            .line("sensitivity", num_list(&sens))
            .line("specificity", num_list(&spec));
    }
    for (j, a) in rep.state.coefs().iter().enumerate() {
        report.line(
            &format!("coef_{}", j + 1),
            num_list(a.as_slice().expect("contiguous")),
        );
        if let Some(dir) = &dir {
            write_vector(&dir.join(format!("coef_block{}.csv", j + 1)), "a", a)?;
        }
    }
    if let Some(dir) = &dir {
        write(&dir.join("report.txt"), report.as_str())?;
    }
    print!("{}", report.as_str());
    Ok(())
}

/// Aggregates of one algorithm over all repeats.
struct BenchRow {
    algo: Algo,
    sens: Vec<f64>,
    spec: Vec<f64>,
    total: Duration,
    runs: usize,
}

impl BenchRow {
    fn average_secs(&self) -> f64 {
        self.total.as_secs_f64() / self.runs as f64
    }
}

pub fn bench(s: &Settings) -> Result<(), CliError> {
    let algos: Vec<Algo> = split_list(&s.text("algo", Some(DEFAULT_ALGOS)).expect("default given"))
        .into_iter()
        .map(str::parse)
        .collect::<Result<_, _>>()?;
    let solver = Solver::from_settings(s, &algos)?;
    let repeats: usize = s.parsed("repeats", "10")?;
    if repeats == 0 {
        return Err(CliError::new(
            "invalid-argument",
            "repeats must be at least 1",
        ));
    }
    let sparsity = sparsity_for(s)?;
    let seed: u64 = s.parsed("seed", "0")?;
    let data = load_data(s, Some(seed))?;
    let dir = out_dir(s)?;
    let j = data.blocks.len();

    // sequential on purpose: concurrent runs would contend for the timer
    let mut rows = Vec::new();
    for &algo in &algos {
        let mut row = BenchRow {
            algo,
            sens: vec![0.0; j],
            spec: vec![0.0; j],
            total: Duration::ZERO,
            runs: repeats,
        };
        for r in 0..repeats {
            let rep = solver.run(algo, &data, &sparsity, seed.wrapping_add(r as u64))?;
            row.total += rep.wall_time;
            if let Some(truth) = &data.truth {
                let (sens, spec) = recovery(rep.state.coefs(), truth)?;
                for b in 0..j {
                    row.sens[b] += sens[b] / repeats as f64;
                    row.spec[b] += spec[b] / repeats as f64;
                }
            }
        }
        rows.push(row);
    }

    let baseline = rows
        .iter()
        .find(|r| r.algo == Algo::Baseline)
        .map(BenchRow::average_secs);
    let mut header = vec!["algo".to_string()];
    header.extend((1..=j).map(|b| format!("sensitivity_{b}")));
    header.extend((1..=j).map(|b| format!("specificity_{b}")));
    header.extend(["total_time_secs", "average_time_secs", "speedup_percent"].map(String::from));
    let mut table = header.join(",") + "\n";
    for row in &rows {
        let mut cells = vec![row.algo.to_string()];
        let quality = |xs: &[f64]| -> Vec<String> {
            xs.iter()
                .map(|&x| {
                    if data.truth.is_some() {
                        num(x)
                    } else {
                        String::new()
                    }
                })
                .collect()
        };
        cells.extend(quality(&row.sens));
        cells.extend(quality(&row.spec));
        cells.push(num(row.total.as_secs_f64()));
        cells.push(num(row.average_secs()));
        cells.push(match baseline {
            Some(base) if row.algo != Algo::Baseline => {
                num((1.0 - row.average_secs() / base) * 100.0)
            }
            _ => String::new(),
        });
        table.push_str(&cells.join(","));
        table.push('\n');
    }
    if let Some(dir) = &dir {
        write(&dir.join("bench.csv"), &table)?;
        let mut report = Report::default();
        report.line("command", "bench");
        config_lines(&mut report, s);
        write(&dir.join("report.txt"), report.as_str())?;
    }
    print!("{table}");
    Ok(())
}

pub fn project(s: &Settings, input: &Path) -> Result<(), CliError> {
    let t: f64 = parse_value("t", &s.required("t")?)?;
    let variant: Variant = s.parsed("variant", "p1")?;
    let text = fs::read_to_string(input)
        .map_err(|e| CliError::new("io-error", format!("{}: {e}", input.display())))?;
    let v: Vec<f64> = parse_list("input", &text).map_err(|_| {
        CliError::new(
            "parse-error",
            format!(
                "{}: expected numbers separated by commas or whitespace",
                input.display()
            ),
        )
    })?;
    if v.is_empty() {
        return Err(CliError::new(
            "parse-error",
            format!("{}: no values", input.display()),
        ));
    }
    let lm = solve_lm(&v, t, variant)?;
    let proj = project_omega(&v, t, variant)?;

    let mut report = Report::default();
    report.line("command", "project");
    report.line("input", input.display());
    config_lines(&mut report, s);
    report
        .line("branch", lm.branch)
        .line(
            "lambda_star",
            lm.lambda_star.map_or_else(|| "none".into(), num),
        )
        .line("mu_star", lm.mu_star.map_or_else(|| "none".into(), num))
        .line("lm_objective", num(lm.objective(&v)))
        .line("lm_solution", num_list(&lm.x))
        .line("projection", num_list(&proj));
    if let Some(path) = s.path("out") {
        write(&path, report.as_str())?;
    }
    print!("{}", report.as_str());
    Ok(())
}

/// `7,7.6;8.7;8,8.05` -> one candidate list per block.
fn parse_grid(raw: &str) -> Result<Vec<Vec<f64>>, CliError> {
    raw.split(';')
        .map(|axis| parse_list("grid", axis))
        .collect()
}

pub fn grid(s: &Settings) -> Result<(), CliError> {
    let algo: Algo = s.parsed("algo", "bcd3")?;
    let solver = Solver::from_settings(s, &[algo])?;
    let grids = parse_grid(&s.required("grid")?)?;
    let seed: u64 = s.parsed("seed", "0")?;
    let data = load_data(s, Some(seed))?;
    let Some(truth) = &data.truth else {
        return Err(CliError::new(
            "missing-argument",
            "grid scores support recovery and needs `ground-truth` when blocks are given",
        ));
    };
    let dir = out_dir(s)?;
    // mean over blocks of (sensitivity + specificity) / 2
    let score = |sparsity: &[f64]| -> sgcca::Result<f64> {
        let rep = solver
            .run(algo, &data, sparsity, seed)
            .map_err(|e| sgcca::Error::InvalidArgument(e.message))?;
        let mut total = 0.0;
        for (a, w) in rep.state.coefs().iter().zip(truth) {
            let (a, w) = (a.to_vec(), w.to_vec());
            total += (sensitivity(&a, &w)? + specificity(&a, &w)?) / 2.0;
        }
        Ok(total / truth.len() as f64)
    };
    let result = grid_search(&data.blocks.dims(), &grids, score)?;

    let mut report = Report::default();
    report.line("command", "grid");
    config_lines(&mut report, s);
    report
        .line("best_sparsity", num_list(&result.best))
        .line("best_score", num(result.score))
        .line("evaluations", result.evaluations)
        .line("exhaustive", result.exhaustive);
    if let Some(dir) = &dir {
        write(&dir.join("report.txt"), report.as_str())?;
    }
    print!("{}", report.as_str());
    Ok(())
}
