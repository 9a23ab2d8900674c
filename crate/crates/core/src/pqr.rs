//! Parallel QR-AAA over column partitions.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aaa::{sv_aaa, AaaConfig, Solver};
use crate::barycentric::{evaluate_grid, evaluate_unchecked, node_polynomial_max_on, BarycentricModel, SampleGrid};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, PNorm, C64};
use crate::qr_aaa::{qr_aaa, QrAaaModel, QrAaaOptions, TolMode};

/// Largest arccos gap of sorted points in `[-1, 1]`, endpoint gaps included.
///
/// ```
/// use ratbary::pqr::zeta;
/// let m = 16;
/// let x: Vec<f64> = (0..=m).rev().map(|j| (j as f64 * std::f64::consts::PI / m as f64).cos()).collect();
/// assert!((zeta(&x).unwrap() - std::f64::consts::PI / m as f64).abs() < 1e-14);
/// assert_eq!(zeta(&[-1.0, 1.0]).unwrap(), std::f64::consts::PI);
/// ```
pub fn zeta(points: &[f64]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::Parameter("zeta of an empty set".into()));
    }
    if points.iter().any(|x| !(x.abs() <= 1.0)) {
        return Err(Error::Parameter("zeta needs points in [-1, 1]".into()));
    }
    if points.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Parameter("zeta needs ascending points".into()));
    }
    let mut best = points[points.len() - 1].acos();
    best = best.max(PI - points[0].acos());
    for w in points.windows(2) {
        best = best.max(w[0].acos() - w[1].acos());
    }
    Ok(best)
}

/// Grid points nearest (in chart coordinates) to the `m_count` Chebyshev
/// roots; collisions move to the next-nearest unused point. Returned in
/// ascending index order.
pub fn mock_chebyshev(grid: &SampleGrid, m_count: usize) -> Result<Vec<usize>> {
    if grid.chart().is_none() {
        return Err(Error::Parameter("mock-Chebyshev points need a charted grid".into()));
    }
    if grid.len() < m_count {
        return Err(Error::Parameter(format!(
            "grid of {} points cannot supply {m_count} mock-Chebyshev points",
            grid.len()
        )));
    }
    let x = grid.chart_coords();
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
    let xs: Vec<f64> = order.iter().map(|&i| x[i]).collect();
    let mut used = vec![false; xs.len()];
    let mut out = Vec::with_capacity(m_count);
    for j in 0..m_count {
        let node = ((2 * j + 1) as f64 * PI / (2 * m_count) as f64).cos();
        let pos = xs.partition_point(|&v| v < node);
        // walk outwards from the insertion point until an unused point is found
        let (mut lo, mut hi) = (pos as isize - 1, pos);
        let pick = loop {
            let dl = if lo >= 0 { node - xs[lo as usize] } else { f64::INFINITY };
            let dh = if hi < xs.len() { xs[hi] - node } else { f64::INFINITY };
            if dl <= dh {
                if !used[lo as usize] {
                    break lo as usize;
                }
                lo -= 1;
            } else {
                if !used[hi] {
                    break hi;
                }
                hi += 1;
            }
        };
        used[pick] = true;
        out.push(order[pick]);
    }
    out.sort_unstable();
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    RandomUniform,
    MockChebyshev,
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" | "random-uniform" => Ok(Strategy::RandomUniform),
            "mock-cheb" | "mock-chebyshev" => Ok(Strategy::MockChebyshev),
            o => Err(Error::Parameter(format!("unknown extension strategy `{o}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtensionSet {
    pub points: Vec<usize>,
    pub strategy: Strategy,
    /// ζ of the extension points in chart coordinates (needs a chart).
    #[serde(with = "crate::io::float::opt")]
    pub zeta: Option<f64>,
    pub m_plus: usize,
    #[serde(with = "crate::io::float::opt")]
    pub gamma: Option<f64>,
    /// Set when the grid could not supply `⌈3π m⁺⌉` points and all
    /// available points were taken instead.
    pub clamped: bool,
}

impl ExtensionSet {
    /// `1 / (1 - γ)` when `γ < 1`.
    pub fn b_bound(&self) -> Option<f64> {
        self.gamma.filter(|g| *g < 1.0).map(|g| 1.0 / (1.0 - g))
    }
}

/// `m⁺ = 2|∪Z_μ| - 2`.
pub fn m_plus(union_len: usize) -> usize {
    (2 * union_len).saturating_sub(2)
}

/// `M = ⌈3π m⁺⌉`.
///
/// ```
/// use ratbary::pqr::{extension_count, m_plus};
/// assert_eq!(m_plus(10), 18);
/// assert_eq!(extension_count(18), 170);
/// ```
pub fn extension_count(m_plus: usize) -> usize {
    (3.0 * PI * m_plus as f64).ceil() as usize
}

/// Builds `Z^e` for the given union of local supports.
pub fn extension_set(
    grid: &SampleGrid,
    union_supports: &[usize],
    strategy: Strategy,
    seed: u64,
) -> Result<ExtensionSet> {
    build_extension(grid, union_supports, strategy, seed, false)
}

fn build_extension(
    grid: &SampleGrid,
    union_supports: &[usize],
    strategy: Strategy,
    seed: u64,
    clamp: bool,
) -> Result<ExtensionSet> {
    if union_supports.is_empty() {
        return Err(Error::Parameter("empty support union".into()));
    }
    let mp = m_plus(union_supports.len());
    let want = extension_count(mp);
    let mut in_union = vec![false; grid.len()];
    union_supports.iter().for_each(|&i| in_union[i] = true);
    let (points, clamped) = match strategy {
        Strategy::MockChebyshev => {
            let count = if want > grid.len() {
                if !clamp {
                    return Err(Error::Exhausted(format!(
                        "grid of {} points cannot supply {want} extension points",
                        grid.len()
                    )));
                }
                grid.len()
            } else {
                want
            };
            (mock_chebyshev(grid, count)?, count < want)
        }
        Strategy::RandomUniform => {
            let pool: Vec<usize> = (0..grid.len()).filter(|&i| !in_union[i]).collect();
            let count = if want > pool.len() {
                if !clamp {
                    return Err(Error::Exhausted(format!(
                        "only {} points remain for {want} extension points",
                        pool.len()
                    )));
                }
                pool.len()
            } else {
                want
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut pts: Vec<usize> = rand::seq::index::sample(&mut rng, pool.len(), count)
                .into_iter()
                .map(|k| pool[k])
                .collect();
            pts.sort_unstable();
            (pts, count < want)
        }
    };
    let z = match grid.chart() {
        Some(_) if !points.is_empty() => {
            let x = grid.chart_coords();
            let mut xs: Vec<f64> = points.iter().map(|&i| x[i].clamp(-1.0, 1.0)).collect();
            xs.sort_by(f64::total_cmp);
            Some(zeta(&xs)?)
        }
        _ => None,
    };
    Ok(ExtensionSet {
        points,
        strategy,
        zeta: z,
        m_plus: mp,
        gamma: z.map(|z| mp as f64 * z),
        clamped,
    })
}

/// `‖q‖ · ℓ · B · ε`, the reported linearized error bound.
///
/// ```
/// use ratbary::pqr::linearized_error_bound;
/// assert_eq!(linearized_error_bound(1.0, 0.5, 1.5, 0.0), 0.0);
/// assert_eq!(linearized_error_bound(1.0, 0.5, 1.5, 2.0), 1.5);
/// ```
pub fn linearized_error_bound(q_norm: f64, node_poly_max: f64, b_bound: f64, eps: f64) -> f64 {
    q_norm * node_poly_max * b_bound * eps
}

/// Assignment of columns to partitions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionPlan {
    pub p: usize,
    pub assignment: Vec<usize>,
    pub seed: u64,
}

impl PartitionPlan {
    /// `p` contiguous blocks whose sizes differ by at most one.
    pub fn contiguous(ncols: usize, p: usize, seed: u64) -> Result<Self> {
        if p == 0 || p > ncols {
            return Err(Error::Parameter(format!(
                "cannot split {ncols} columns into {p} nonempty partitions"
            )));
        }
        let base = ncols / p;
        let extra = ncols % p;
        let mut assignment = Vec::with_capacity(ncols);
        for mu in 0..p {
            let len = base + usize::from(mu < extra);
            assignment.extend(std::iter::repeat_n(mu, len));
        }
        Ok(Self { p, assignment, seed })
    }

    pub fn columns(&self, mu: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&j| self.assignment[j] == mu)
            .collect()
    }

    fn validate(&self, ncols: usize) -> Result<()> {
        if self.assignment.len() != ncols {
            return Err(Error::Parameter(format!(
                "plan covers {} columns, matrix has {ncols}",
                self.assignment.len()
            )));
        }
        let mut count = vec![0usize; self.p];
        for &mu in &self.assignment {
            if mu >= self.p {
                return Err(Error::Parameter(format!("partition id {mu} out of range")));
            }
            count[mu] += 1;
        }
        if count.contains(&0) {
            return Err(Error::Parameter("every partition must own at least one column".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Merge {
    #[default]
    Flat,
    Tree,
}

impl std::str::FromStr for Merge {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flat" => Ok(Merge::Flat),
            "tree" | "pairwise-tree" => Ok(Merge::Tree),
            o => Err(Error::Parameter(format!("unknown merge mode `{o}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PqrOptions {
    pub tol: f64,
    pub tol_mode: TolMode,
    pub p_norm: PNorm,
    pub max_degree: usize,
    /// `None` picks mock-Chebyshev when it reaches `γ < 1`, random otherwise.
    pub strategy: Option<Strategy>,
    pub merge: Merge,
    /// Feed `Q̂_μ Γ_μ` (true) or plain `Q̂_μ` to the merge.
    pub weighted: bool,
    pub monitor_node_polynomial: bool,
    /// Fail when the full-grid error exceeds `10 tol`.
    pub validate_full_grid: bool,
    pub workers: Option<usize>,
    pub solver: Solver,
}

impl Default for PqrOptions {
    fn default() -> Self {
        let q = QrAaaOptions::default();
        Self {
            tol: q.tol,
            tol_mode: q.tol_mode,
            p_norm: q.p_norm,
            max_degree: q.max_degree,
            strategy: None,
            merge: Merge::Flat,
            weighted: true,
            monitor_node_polynomial: true,
            validate_full_grid: true,
            workers: None,
            solver: q.solver,
        }
    }
}

impl PqrOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }

    fn local(&self) -> QrAaaOptions {
        QrAaaOptions {
            tol: self.tol,
            tol_mode: self.tol_mode,
            p_norm: self.p_norm,
            max_degree: self.max_degree,
            rrqr_tol: None,
            monitor_node_polynomial: false,
            solver: self.solver,
        }
    }
}

/// Output of one worker.
#[derive(Clone, Debug)]
pub struct PartitionResult {
    pub columns: Vec<usize>,
    pub support_indices: Vec<usize>,
    pub weights: Vec<C64>,
    pub gamma: Vec<f64>,
    pub rank: usize,
    /// `None` for a partition whose columns are all zero.
    pub local: Option<QrAaaModel>,
}

/// Values a run would have moved between processes.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Communication {
    /// Complex values sent to the accumulator(s), per merge level.
    pub merge_words_per_level: Vec<usize>,
    pub merge_words: usize,
    /// Indices exchanged to form `∪Z_μ`.
    pub index_words: usize,
    /// Complex values gathered for the final snapshots.
    pub snapshot_words: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StageTimings {
    pub partitions: Duration,
    pub merge: Duration,
    pub validation: Duration,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergeStage {
    pub label: String,
    pub history: Vec<crate::HistoryEntry>,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    #[serde(with = "crate::io::float")]
    pub node_polynomial_max: f64,
    #[serde(with = "crate::io::float::opt")]
    pub b_bound: Option<f64>,
    #[serde(with = "crate::io::float::opt")]
    pub linearized_bound: Option<f64>,
    /// `max_j ‖F(:,j) - F̂(:,j)‖_∞ / ‖F(:,j)‖_∞` over the full grid.
    #[serde(with = "crate::io::float")]
    pub full_grid_rel_error: f64,
    /// `‖F - F̂‖_{p,∞}` over the full grid.
    #[serde(with = "crate::io::float")]
    pub full_grid_residual: f64,
}

#[derive(Clone, Debug)]
pub struct AccumulationResult {
    pub final_model: BarycentricModel,
    pub per_partition: Vec<PartitionResult>,
    pub union: Vec<usize>,
    pub extension: Option<ExtensionSet>,
    pub z_plus: Vec<usize>,
    pub merges: Vec<MergeStage>,
    pub communication: Communication,
    pub diagnostics: Diagnostics,
    pub timings: StageTimings,
}

/// Worker count: `RATBARY_WORKERS` if set, else the available parallelism.
pub fn default_workers() -> usize {
    std::env::var("RATBARY_WORKERS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs QR-AAA per partition and glues the local models together.
pub fn pqr_aaa(f: &CMatrix, grid: &SampleGrid, plan: &PartitionPlan, opts: &PqrOptions) -> Result<AccumulationResult> {
    if f.rows() != grid.len() {
        return Err(Error::Parameter(format!(
            "matrix has {} rows but the grid has {} points",
            f.rows(),
            grid.len()
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::Parameter(format!(
            "tolerance must be positive, got {}",
            opts.tol
        )));
    }
    plan.validate(f.cols())?;
    f.ensure_finite("sample matrix")?;

    let t0 = Instant::now();
    let per_partition = run_partitions(f, grid, plan, opts)?;
    let t_part = t0.elapsed();

    let mut union: Vec<usize> = per_partition
        .iter()
        .flat_map(|p| p.support_indices.iter().copied())
        .collect();
    union.sort_unstable();
    union.dedup();
    if union.is_empty() {
        return Err(Error::Degenerate("every column is zero".into()));
    }

    let t1 = Instant::now();
    let (final_model, extension, z_plus, merges, mut communication) = if plan.p == 1 {
        let local = per_partition[0].local.as_ref().expect("nonzero input");
        (
            local.model.clone(),
            None,
            union.clone(),
            Vec::new(),
            Communication::default(),
        )
    } else {
        let ext = choose_extension(grid, &union, opts.strategy, plan.seed)?;
        let mut z_plus: Vec<usize> = union.iter().chain(&ext.points).copied().collect();
        z_plus.sort_unstable();
        z_plus.dedup();
        let (model, merges, comm) = merge(f, grid, &per_partition, &union, &z_plus, opts)?;
        (model, Some(ext), z_plus, merges, comm)
    };
    let t_merge = t1.elapsed();
    if plan.p > 1 {
        let total: usize = per_partition.iter().map(|p| p.support_indices.len()).sum();
        communication.index_words = (plan.p - 1) * total;
        communication.snapshot_words = final_model.m() * f.cols();
    }

    let t2 = Instant::now();
    let sub = grid.subset(&z_plus);
    let ell = node_polynomial_max_on(&final_model.supports, &sub);
    let b = extension.as_ref().and_then(ExtensionSet::b_bound);
    let (rel, res) = full_grid_errors(f, grid, &final_model, opts.p_norm);
    let diagnostics = Diagnostics {
        node_polynomial_max: ell,
        b_bound: b,
        linearized_bound: b.map(|b| linearized_error_bound(1.0, ell, b, opts.tol)),
        full_grid_rel_error: rel,
        full_grid_residual: res,
    };
    let t_val = t2.elapsed();
    if opts.validate_full_grid && !(rel <= 10.0 * opts.tol) {
        return Err(Error::FullGridValidation {
            residual: rel,
            limit: 10.0 * opts.tol,
        });
    }
    Ok(AccumulationResult {
        final_model,
        per_partition,
        union,
        extension,
        z_plus,
        merges,
        communication,
        diagnostics,
        timings: StageTimings {
            partitions: t_part,
            merge: t_merge,
            validation: t_val,
        },
    })
}

fn run_partitions(
    f: &CMatrix,
    grid: &SampleGrid,
    plan: &PartitionPlan,
    opts: &PqrOptions,
) -> Result<Vec<PartitionResult>> {
    let workers = opts.workers.unwrap_or_else(default_workers).clamp(1, plan.p);
    let local = opts.local();
    let job = |mu: usize| -> Result<PartitionResult> {
        let columns = plan.columns(mu);
        let fm = f.select_cols(&columns);
        if fm.max_abs() == 0.0 {
            return Ok(PartitionResult {
                columns,
                support_indices: Vec::new(),
                weights: Vec::new(),
                gamma: Vec::new(),
                rank: 0,
                local: None,
            });
        }
        let out = qr_aaa(&fm, grid, &local)?;
        Ok(PartitionResult {
            columns,
            support_indices: out.model.support_indices.clone(),
            weights: out.model.weights.clone(),
            gamma: out.gamma.clone(),
            rank: out.rank,
            local: Some(out),
        })
    };
    let results: Vec<Result<PartitionResult>> = if workers == 1 {
        (0..plan.p).map(job).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Parameter(format!("worker pool: {e}")))?;
        pool.install(|| (0..plan.p).into_par_iter().map(job).collect())
    };
    results.into_iter().collect()
}

fn choose_extension(grid: &SampleGrid, union: &[usize], strategy: Option<Strategy>, seed: u64) -> Result<ExtensionSet> {
    match strategy {
        Some(s) => build_extension(grid, union, s, seed, true),
        None if grid.chart().is_some() => {
            let e = build_extension(grid, union, Strategy::MockChebyshev, seed, true)?;
            if e.gamma.is_some_and(|g| g < 1.0) {
                Ok(e)
            } else {
                build_extension(grid, union, Strategy::RandomUniform, seed, true)
            }
        }
        None => build_extension(grid, union, Strategy::RandomUniform, seed, true),
    }
}

/// Local model values on `Z⁺`, one block per nonzero partition.
fn local_blocks(parts: &[PartitionResult], sub: &SampleGrid, weighted: bool) -> Result<Vec<CMatrix>> {
    let mut out = Vec::new();
    for p in parts {
        let Some(local) = &p.local else { continue };
        let mut v = evaluate_grid(&local.basis_model, sub)?;
        if !weighted {
            let inv: Vec<f64> = local.gamma.iter().map(|g| 1.0 / g).collect();
            v.scale_cols(&inv);
        }
        out.push(v);
    }
    Ok(out)
}

type MergeOutput = (BarycentricModel, Vec<MergeStage>, Communication);

fn merge(
    f: &CMatrix,
    grid: &SampleGrid,
    parts: &[PartitionResult],
    union: &[usize],
    z_plus: &[usize],
    opts: &PqrOptions,
) -> Result<MergeOutput> {
    let sub = grid.subset(z_plus);
    let blocks = local_blocks(parts, &sub, opts.weighted)?;
    let total_cols: usize = blocks.iter().map(CMatrix::cols).sum();
    let cfg = AaaConfig {
        tol: match opts.tol_mode {
            TolMode::Practical => opts.tol,
            TolMode::Theory => opts.tol / total_cols as f64,
        },
        p_norm: opts.p_norm,
        max_degree: opts.max_degree.min(union.len()),
        column_weights: None,
        monitor_node_polynomial: opts.monitor_node_polynomial,
        solver: opts.solver,
    };
    let zp = z_plus.len();
    let mut comm = Communication::default();
    let mut stages = Vec::new();

    let sub_model = match opts.merge {
        Merge::Flat => {
            let refs: Vec<&CMatrix> = blocks.iter().collect();
            let data = CMatrix::hcat(&refs)?;
            let words = total_cols * zp;
            comm.merge_words_per_level.push(words);
            let m = sv_aaa(&data, &sub, &cfg)?;
            stages.push(MergeStage {
                label: "merge".into(),
                history: m.history.clone(),
                converged: m.converged,
            });
            m
        }
        Merge::Tree => {
            let mut level: Vec<(CMatrix, Option<BarycentricModel>)> = blocks.into_iter().map(|b| (b, None)).collect();
            let mut depth = 0;
            let mut all_converged = true;
            while level.len() > 1 {
                depth += 1;
                let mut words = 0;
                let mut next = Vec::with_capacity(level.len().div_ceil(2));
                let mut it = level.into_iter().enumerate().peekable();
                while let Some((i, (a, am))) = it.next() {
                    let Some((_, (b, _))) = it.next() else {
                        next.push((a, am));
                        break;
                    };
                    words += b.cols() * zp;
                    let data = CMatrix::hcat(&[&a, &b])?;
                    let m = sv_aaa(&data, &sub, &cfg)?;
                    all_converged &= m.converged;
                    stages.push(MergeStage {
                        label: format!("merge-l{depth}-n{}", i / 2),
                        history: m.history.clone(),
                        converged: m.converged,
                    });
                    let vals = evaluate_grid(&m, &sub)?;
                    next.push((vals, Some(m)));
                }
                comm.merge_words_per_level.push(words);
                level = next;
            }
            let (_, m) = level.pop().expect("at least one block");
            let mut m = m.ok_or_else(|| Error::Degenerate("only one nonzero partition".into()))?;
            m.converged &= all_converged;
            m
        }
    };
    comm.merge_words = comm.merge_words_per_level.iter().sum();

    let global: Vec<usize> = sub_model.support_indices.iter().map(|&k| z_plus[k]).collect();
    let mut model = BarycentricModel::new(
        global.iter().map(|&i| grid.points()[i]).collect(),
        sub_model.weights.clone(),
        f.select_rows(&global),
        global,
    )?;
    model.history = sub_model.history.clone();
    model.exhausted = sub_model.exhausted;
    model.converged = sub_model.converged && parts.iter().all(|p| p.local.as_ref().is_none_or(|l| l.model.converged));
    Ok((model, stages, comm))
}

/// Full-grid per-column relative ∞-error and `‖F - F̂‖_{p,∞}`.
pub fn full_grid_errors(f: &CMatrix, grid: &SampleGrid, model: &BarycentricModel, p: PNorm) -> (f64, f64) {
    let (vals, ok) = evaluate_unchecked(model, grid.points());
    if ok.iter().any(|o| !o) {
        return (f64::INFINITY, f64::INFINITY);
    }
    let mut rel: f64 = 0.0;
    let mut rows = vec![0.0; f.rows()];
    for j in 0..f.cols() {
        let mut err: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for (i, (a, b)) in f.col(j).iter().zip(vals.col(j)).enumerate() {
            let e = (a - b).norm();
            err = err.max(e);
            scale = scale.max(a.norm());
            match p {
                PNorm::Two => rows[i] += e * e,
                PNorm::Inf => rows[i] = f64::max(rows[i], e),
            }
        }
        if scale > 0.0 {
            rel = rel.max(err / scale);
        } else if err > 0.0 {
            rel = f64::INFINITY;
        }
    }
    let res = rows
        .into_iter()
        .map(|r| if p == PNorm::Two { r.sqrt() } else { r })
        .fold(0.0, f64::max);
    (rel, res)
}
