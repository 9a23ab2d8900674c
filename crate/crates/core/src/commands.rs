//! The pipelines behind the `ratbary` verbs, usable without the binary.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::aaa::{sv_aaa, AaaConfig, Solver};
use crate::barycentric::{evaluate_unchecked, BarycentricModel, SampleGrid};
use crate::error::{Error, Result};
use crate::io::{history_csv, write_atomic, HistoryRow, MatrixFile, Method, ModelFile, ModelMetadata};
use crate::linalg::{rrqr, CMatrix, PNorm, C64};
use crate::pqr::{pqr_aaa, Merge, PartitionPlan, PqrOptions, Strategy};
use crate::problems::{generate, GridSpec, ProblemName, ScalarFactor};
use crate::qr_aaa::{qr_aaa, scale_columns, ColumnScaling, QrAaaOptions, TolMode};

/// What `gen` records next to the matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub problem: ProblemName,
    pub n: usize,
    pub seed: u64,
    pub grid: GridSpec,
    pub tol_default: f64,
    pub scalar_factors: Vec<ScalarFactor>,
}

/// Grid fields that replace the generator's defaults.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GridOverrides {
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub count: Option<usize>,
}

/// Path of the manifest written beside `out`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Samples a generated problem.
pub fn gen_matrix(problem: ProblemName, n: usize, seed: u64, grid: GridOverrides) -> Result<(MatrixFile, Manifest)> {
    let mut p = generate(problem, n, seed)?;
    let spec = GridSpec {
        a: grid.a.unwrap_or(p.grid_spec.a),
        b: grid.b.unwrap_or(p.grid_spec.b),
        count: grid.count.unwrap_or(p.grid_spec.count),
        axis: p.grid_spec.axis,
    };
    p = p.with_grid(spec);
    let (g, f) = p.sample()?;
    let manifest = Manifest {
        problem,
        n: p.n,
        seed,
        grid: spec,
        tol_default: p.tol_default,
        scalar_factors: p.scalar_factors.clone(),
    };
    Ok((MatrixFile::new(g, f)?, manifest))
}

/// `gen`: writes the matrix file and its manifest.
pub fn cmd_gen(problem: ProblemName, n: usize, seed: u64, grid: GridOverrides, out: &Path) -> Result<Manifest> {
    let (file, manifest) = gen_matrix(problem, n, seed, grid)?;
    file.write(out)?;
    let mut json = serde_json::to_vec_pretty(&manifest)?;
    json.push(b'\n');
    write_atomic(&manifest_path(out), &json)?;
    Ok(manifest)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ApproxOptions {
    pub method: Method,
    pub tol: f64,
    pub p_norm: PNorm,
    pub tol_mode: TolMode,
    pub max_degree: usize,
    pub partitions: usize,
    pub extension: Option<Strategy>,
    pub merge: Merge,
    pub seed: u64,
    pub workers: Option<usize>,
    pub solver: Solver,
}

impl Default for ApproxOptions {
    fn default() -> Self {
        Self {
            method: Method::Qr,
            tol: 1e-8,
            p_norm: PNorm::Inf,
            tol_mode: TolMode::Practical,
            max_degree: AaaConfig::default().max_degree,
            partitions: 1,
            extension: None,
            merge: Merge::Flat,
            seed: 0,
            workers: None,
            solver: Solver::Incremental,
        }
    }
}

/// A finished `approx` run. `model.converged` is false when the run did
/// not meet its tolerance; the file is still complete.
#[derive(Clone, Debug)]
pub struct Approximation {
    pub file: ModelFile,
    pub model: BarycentricModel,
    pub check: Verification,
}

impl Approximation {
    pub fn converged(&self) -> bool {
        self.file.converged
    }
}

/// Runs the selected pipeline on `input`.
pub fn approximate(input: &MatrixFile, opts: &ApproxOptions) -> Result<Approximation> {
    let f = &input.matrix;
    let grid = &input.grid;
    let scaling = ColumnScaling::of(f);
    let mut meta = ModelMetadata {
        method: opts.method,
        tol: opts.tol,
        tol_mode: opts.tol_mode,
        p_norm: opts.p_norm,
        seed: opts.seed,
        partitions: if opts.method == Method::Pqr { opts.partitions } else { 1 },
        rank: None,
        merge: None,
        extension: None,
        history: Vec::new(),
        communication: None,
        diagnostics: None,
    };
    let mut model = match opts.method {
        Method::Sv => {
            let cfg = AaaConfig {
                tol: opts.tol,
                p_norm: opts.p_norm,
                max_degree: opts.max_degree,
                column_weights: Some(scaling.relative_weights()),
                monitor_node_polynomial: false,
                solver: opts.solver,
            };
            let m = sv_aaa(f, grid, &cfg)?;
            meta.history = HistoryRow::from_entries(&m.history, "sv");
            m
        }
        Method::Qr => {
            let q = qr_aaa(f, grid, &qr_options(opts))?;
            meta.rank = Some(q.rank);
            meta.history = HistoryRow::from_entries(&q.basis_model.history, "basis");
            q.model
        }
        Method::Pqr => {
            let plan = PartitionPlan::contiguous(f.cols(), opts.partitions, opts.seed)?;
            let popts = PqrOptions {
                tol: opts.tol,
                tol_mode: opts.tol_mode,
                p_norm: opts.p_norm,
                max_degree: opts.max_degree,
                strategy: opts.extension,
                merge: opts.merge,
                validate_full_grid: false,
                workers: opts.workers,
                solver: opts.solver,
                ..PqrOptions::default()
            };
            let out = pqr_aaa(f, grid, &plan, &popts)?;
            for (mu, p) in out.per_partition.iter().enumerate() {
                if let Some(l) = &p.local {
                    meta.history
                        .extend(HistoryRow::from_entries(&l.basis_model.history, &mu.to_string()));
                }
            }
            for s in &out.merges {
                meta.history.extend(HistoryRow::from_entries(&s.history, &s.label));
            }
            meta.rank = Some(out.per_partition.iter().map(|p| p.rank).sum());
            meta.merge = (plan.p > 1).then_some(opts.merge);
            meta.extension = out.extension.clone();
            meta.communication = Some(out.communication.clone());
            meta.diagnostics = Some(out.diagnostics.clone());
            out.final_model
        }
    };
    let check = verify_model(&model, acceptance_limit(opts.method, opts.tol), opts.p_norm, input)?;
    meta.history.push(HistoryRow {
        iteration: 0,
        m: model.m(),
        res_m: check.residual,
        argmax_index: Some(check.argmax_index),
        stage: "final".into(),
    });
    model.converged &= check.pass;
    let file = ModelFile::new(&model, scaling, meta)?;
    Ok(Approximation { file, model, check })
}

fn qr_options(opts: &ApproxOptions) -> QrAaaOptions {
    QrAaaOptions {
        tol: opts.tol,
        tol_mode: opts.tol_mode,
        p_norm: opts.p_norm,
        max_degree: opts.max_degree,
        rrqr_tol: None,
        monitor_node_polynomial: false,
        solver: opts.solver,
    }
}

/// Acceptance limit on the full-grid relative error: `tol`, or `10 tol`
/// for merged parallel models.
pub fn acceptance_limit(method: Method, tol: f64) -> f64 {
    if method == Method::Pqr {
        10.0 * tol
    } else {
        tol
    }
}

/// `approx`: writes the model (always) and the history CSV (if asked).
pub fn cmd_approx(input: &Path, opts: &ApproxOptions, out: &Path, history_out: Option<&Path>) -> Result<Approximation> {
    let file = MatrixFile::read(input)?;
    let a = approximate(&file, opts)?;
    a.file.write(out)?;
    if let Some(h) = history_out {
        write_atomic(h, &history_csv(&a.file.metadata.history)?)?;
    }
    Ok(a)
}

/// Error of one grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointError {
    pub index: usize,
    pub re: f64,
    pub im: f64,
    /// `max_j |F_ij - F̂_ij| / d_j`
    #[serde(with = "crate::io::float")]
    pub rel_error: f64,
    /// Row `p`-norm of `(F - F̂) D⁻¹` at this point.
    #[serde(with = "crate::io::float")]
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub pass: bool,
    pub method: Option<Method>,
    #[serde(with = "crate::io::float")]
    pub limit: f64,
    pub p_norm: PNorm,
    /// Largest per-column relative ∞-error.
    #[serde(with = "crate::io::float")]
    pub max_rel_error: f64,
    /// `‖(F - F̂) D⁻¹‖_{p,∞}` over the full grid.
    #[serde(with = "crate::io::float")]
    pub residual: f64,
    pub argmax_index: usize,
    pub pole_hits: usize,
    #[serde(with = "float_vec")]
    pub column_rel_errors: Vec<f64>,
    #[serde(skip)]
    pub points: Vec<PointError>,
}

mod float_vec {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct W(#[serde(with = "crate::io::float")] f64);

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|x| W(*x)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Ok(Vec::<W>::deserialize(d)?.into_iter().map(|w| w.0).collect())
    }
}

fn verify_model(model: &BarycentricModel, limit: f64, p: PNorm, input: &MatrixFile) -> Result<Verification> {
    let f = &input.matrix;
    let grid = &input.grid;
    if f.cols() != model.ncols() {
        return Err(Error::Parameter(format!(
            "model has {} columns but the input has {}",
            model.ncols(),
            f.cols()
        )));
    }
    check_grid(model, grid)?;
    let scaling = ColumnScaling::of(f);
    let w = scaling.relative_weights();
    let (vals, ok) = evaluate_unchecked(model, grid.points());
    let mut col_err = vec![0.0; f.cols()];
    let mut rows = vec![0.0; f.rows()];
    let mut rel_rows = vec![0.0f64; f.rows()];
    for j in 0..f.cols() {
        for (i, (a, b)) in f.col(j).iter().zip(vals.col(j)).enumerate() {
            let e = (a - b).norm() * w[j];
            let e = if e.is_nan() { f64::INFINITY } else { e };
            let rel = if scaling.d[j] > 0.0 || e == 0.0 {
                e
            } else {
                f64::INFINITY
            };
            col_err[j] = f64::max(col_err[j], rel);
            rel_rows[i] = rel_rows[i].max(rel);
            match p {
                PNorm::Two => rows[i] += e * e,
                PNorm::Inf => rows[i] = f64::max(rows[i], e),
            }
        }
    }
    if p == PNorm::Two {
        rows.iter_mut().for_each(|r| *r = r.sqrt());
    }
    let mut argmax = 0;
    for (i, r) in rows.iter().enumerate() {
        if *r > rows[argmax] {
            argmax = i;
        }
    }
    let max_rel = col_err.iter().copied().fold(0.0, f64::max);
    let points = grid
        .points()
        .iter()
        .enumerate()
        .map(|(i, z)| PointError {
            index: i,
            re: z.re,
            im: z.im,
            rel_error: rel_rows[i],
            residual: rows[i],
        })
        .collect();
    Ok(Verification {
        pass: max_rel < limit,
        method: None,
        limit: limit,
        p_norm: p,
        max_rel_error: max_rel,
        residual: rows[argmax],
        argmax_index: argmax,
        pole_hits: ok.iter().filter(|o| !**o).count(),
        column_rel_errors: col_err,
        points,
    })
}

/// The model's supports must be the input grid's points at the stored
/// indices.
fn check_grid(model: &BarycentricModel, grid: &SampleGrid) -> Result<()> {
    for (s, &i) in model.supports.iter().zip(&model.support_indices) {
        if grid.points().get(i) != Some(s) {
            return Err(Error::Parameter(format!(
                "support {s} (index {i}) is not a point of the input grid"
            )));
        }
    }
    Ok(())
}

/// Checks a stored model against samples.
pub fn verify(model: &ModelFile, input: &MatrixFile) -> Result<Verification> {
    let m = model.model()?;
    let meta = &model.metadata;
    let mut v = verify_model(&m, acceptance_limit(meta.method, meta.tol), meta.p_norm, input)?;
    v.method = Some(meta.method);
    Ok(v)
}

pub fn verification_csv(v: &Verification) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["index", "re", "im", "rel_error", "residual"])?;
    for p in &v.points {
        w.write_record([
            p.index.to_string(),
            format!("{:e}", p.re),
            format!("{:e}", p.im),
            format!("{:e}", p.rel_error),
            format!("{:e}", p.residual),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// `verify`: writes `<report>` (JSON) and `<report>.csv`.
pub fn cmd_verify(model: &Path, input: &Path, report: &Path) -> Result<Verification> {
    let v = verify(&ModelFile::read(model)?, &MatrixFile::read(input)?)?;
    let mut json = serde_json::to_vec_pretty(&v)?;
    json.push(b'\n');
    write_atomic(report, &json)?;
    let mut csv_path = report.as_os_str().to_owned();
    csv_path.push(".csv");
    write_atomic(Path::new(&csv_path), &verification_csv(&v)?)?;
    Ok(v)
}

/// Model values at one point, or `None` at a pole.
pub type EvalRow = (C64, Option<Vec<C64>>);

pub fn eval_points(model: &BarycentricModel, points: &[C64]) -> Vec<EvalRow> {
    let (vals, ok) = evaluate_unchecked(model, points);
    points
        .iter()
        .enumerate()
        .map(|(i, &z)| (z, ok[i].then(|| vals.row(i))))
        .collect()
}

pub fn eval_csv(ncols: usize, rows: &[EvalRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["index".to_owned(), "re".into(), "im".into(), "status".into()];
    for j in 0..ncols {
        header.push(format!("f{j}_re"));
        header.push(format!("f{j}_im"));
    }
    w.write_record(&header)?;
    for (i, (z, vals)) in rows.iter().enumerate() {
        let mut rec = vec![i.to_string(), format!("{:e}", z.re), format!("{:e}", z.im)];
        match vals {
            Some(v) => {
                rec.push("ok".into());
                for x in v {
                    rec.push(format!("{:e}", x.re));
                    rec.push(format!("{:e}", x.im));
                }
            }
            None => {
                rec.push("pole".into());
                rec.extend(std::iter::repeat_n(String::from("NaN"), 2 * ncols));
            }
        }
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Parses `re,im` (or a bare real number).
pub fn parse_point(s: &str) -> Result<C64> {
    let bad = || Error::Parameter(format!("cannot read point `{s}`, expected `re,im`"));
    let mut it = s.split(',').map(str::trim);
    let re = it.next().ok_or_else(bad)?.parse::<f64>().map_err(|_| bad())?;
    let im = match it.next() {
        Some(t) => t.parse::<f64>().map_err(|_| bad())?,
        None => 0.0,
    };
    if it.next().is_some() {
        return Err(bad());
    }
    Ok(C64::new(re, im))
}

/// `eval`: returns the number of pole hits.
pub fn cmd_eval(model: &Path, points: &[C64], out: &Path) -> Result<usize> {
    let m = ModelFile::read(model)?.model()?;
    let rows = eval_points(&m, points);
    write_atomic(out, &eval_csv(m.ncols(), &rows)?)?;
    Ok(rows.iter().filter(|r| r.1.is_none()).count())
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchOptions {
    pub problems: Vec<ProblemName>,
    /// Generated column counts.
    pub sizes: Vec<usize>,
    /// Each generated matrix is also timed with its columns repeated this
    /// many times.
    pub duplicates: Vec<usize>,
    pub repetitions: usize,
    /// `None` uses each problem's default tolerance.
    pub tol: Option<f64>,
    pub seed: u64,
    /// Skip direct SV-AAA above this many columns.
    pub direct_max_n: Option<usize>,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            problems: vec![ProblemName::Beam],
            sizes: vec![250],
            duplicates: vec![1, 2, 4, 8],
            repetitions: 10,
            tol: None,
            seed: 0,
            direct_max_n: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub problem: ProblemName,
    pub n: usize,
    pub rep: usize,
    pub t_qr: f64,
    pub t_aaa_q: f64,
    pub t_aaa_f: Option<f64>,
}

/// Times the QR stage, SV-AAA on `QΓ` and direct SV-AAA separately.
pub fn bench(opts: &BenchOptions) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &problem in &opts.problems {
        for &size in &opts.sizes {
            let (file, manifest) = gen_matrix(problem, size, opts.seed, GridOverrides::default())?;
            let tol = opts.tol.unwrap_or(manifest.tol_default);
            for &dup in &opts.duplicates {
                if dup == 0 {
                    return Err(Error::Parameter("duplication factor must be positive".into()));
                }
                let copies: Vec<&CMatrix> = std::iter::repeat_n(&file.matrix, dup).collect();
                let f = CMatrix::hcat(&copies)?;
                for rep in 0..opts.repetitions {
                    rows.push(time_once(problem, &f, &file.grid, tol, opts.direct_max_n, rep)?);
                }
            }
        }
    }
    Ok(rows)
}

fn time_once(
    problem: ProblemName,
    f: &CMatrix,
    grid: &SampleGrid,
    tol: f64,
    direct_max_n: Option<usize>,
    rep: usize,
) -> Result<BenchRow> {
    let t = Instant::now();
    let (g, scaling) = scale_columns(f)?;
    let qr = rrqr(&g, tol)?;
    let mut qg = qr.q.clone();
    qg.scale_cols(&qr.diag_abs());
    let t_qr = t.elapsed().as_secs_f64();

    let t = Instant::now();
    sv_aaa(&qg, grid, &AaaConfig::with_tol(tol))?;
    let t_aaa_q = t.elapsed().as_secs_f64();

    let t_aaa_f = if direct_max_n.is_none_or(|m| f.cols() <= m) {
        let cfg = AaaConfig {
            column_weights: Some(scaling.relative_weights()),
            ..AaaConfig::with_tol(tol)
        };
        let t = Instant::now();
        sv_aaa(f, grid, &cfg)?;
        Some(t.elapsed().as_secs_f64())
    } else {
        None
    };
    Ok(BenchRow {
        problem,
        n: f.cols(),
        rep,
        t_qr,
        t_aaa_q,
        t_aaa_f,
    })
}

pub fn bench_csv(rows: &[BenchRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["problem", "N", "rep", "t_QR", "t_AAA_Q", "t_AAA_F"])?;
    for r in rows {
        w.write_record([
            r.problem.label().to_owned(),
            r.n.to_string(),
            r.rep.to_string(),
            format!("{:e}", r.t_qr),
            format!("{:e}", r.t_aaa_q),
            r.t_aaa_f.map_or(String::new(), |t| format!("{t:e}")),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn cmd_bench(opts: &BenchOptions, out: &Path) -> Result<Vec<BenchRow>> {
    let rows = bench(opts)?;
    write_atomic(out, &bench_csv(&rows)?)?;
    Ok(rows)
}
