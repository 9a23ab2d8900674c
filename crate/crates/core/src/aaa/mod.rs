//! Greedy set-valued AAA.

mod loewner;

pub use loewner::{loewner_assemble, LoewnerState};

use loewner::{FastSolver, ReferenceSolver, WeightSolver};
use serde::{Deserialize, Serialize};

use crate::barycentric::{node_polynomial_max_on, BarycentricModel, HistoryEntry, SampleGrid};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, PNorm, C64, ZERO};

/// Which weight solver the greedy loop uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    /// Incremental compressed factor ([`LoewnerState`]).
    #[default]
    Incremental,
    /// Assemble `L^{(m)}` and take its SVD every step.
    Reference,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AaaConfig {
    pub tol: f64,
    pub p_norm: PNorm,
    pub max_degree: usize,
    /// Factors `γ_j` applied to the columns in both the residual and the
    /// weight solve.
    pub column_weights: Option<Vec<f64>>,
    pub monitor_node_polynomial: bool,
    pub solver: Solver,
}

impl Default for AaaConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            p_norm: PNorm::Inf,
            max_degree: 150,
            column_weights: None,
            monitor_node_polynomial: false,
            solver: Solver::Incremental,
        }
    }
}

impl AaaConfig {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }

    fn validate(&self, ncols: usize) -> Result<()> {
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::Parameter(format!(
                "tolerance must be positive, got {}",
                self.tol
            )));
        }
        if self.max_degree == 0 {
            return Err(Error::Parameter("max_degree must be at least 1".into()));
        }
        if let Some(g) = &self.column_weights {
            if g.len() != ncols {
                return Err(Error::Parameter(format!(
                    "{} column weights for {ncols} columns",
                    g.len()
                )));
            }
            if g.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
                return Err(Error::Parameter("column weights must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Set-valued AAA: one support set and one weight vector for all columns.
///
/// ```
/// use ratbary::{aaa::{sv_aaa, AaaConfig}, linalg::CMatrix, Axis, SampleGrid};
/// let grid = SampleGrid::segment(-1.0, 1.0, 200, Axis::Real).unwrap();
/// let f = CMatrix::from_fn(200, 2, |i, j| {
///     let z = grid.points()[i];
///     if j == 0 { z.exp() } else { z.sin() }
/// });
/// let model = sv_aaa(&f, &grid, &AaaConfig::with_tol(1e-12)).unwrap();
/// assert!(model.converged);
/// assert!(model.m() < 15);
/// ```
pub fn sv_aaa(f: &CMatrix, grid: &SampleGrid, cfg: &AaaConfig) -> Result<BarycentricModel> {
    let n = grid.len();
    if f.rows() != n {
        return Err(Error::Parameter(format!(
            "matrix has {} rows but the grid has {n} points",
            f.rows()
        )));
    }
    if f.cols() == 0 || n == 0 {
        return Err(Error::Parameter("empty sample matrix".into()));
    }
    cfg.validate(f.cols())?;
    f.ensure_finite("sample matrix")?;
    if f.max_abs() == 0.0 {
        return Err(Error::Degenerate("sample matrix is identically zero".into()));
    }
    // weighted AAA is plain AAA on F diag(γ); only the snapshots stay unscaled
    let scaled;
    let data = match &cfg.column_weights {
        Some(g) => {
            let mut s = f.clone();
            s.scale_cols(g);
            scaled = s;
            &scaled
        }
        None => f,
    };
    match cfg.solver {
        Solver::Incremental => run(f, grid, cfg, FastSolver(LoewnerState::new(data, grid)?)),
        Solver::Reference => run(f, grid, cfg, ReferenceSolver::new(data, grid)),
    }
}

fn run<S: WeightSolver>(f: &CMatrix, grid: &SampleGrid, cfg: &AaaConfig, mut solver: S) -> Result<BarycentricModel> {
    let n = grid.len();
    let z = grid.points();
    let gamma = cfg.column_weights.as_deref();
    let max_m = cfg.max_degree.min(n);

    let mut excluded = vec![false; n];
    let mean: Vec<C64> = (0..f.cols()).map(|j| f.col(j).iter().sum::<C64>() / n as f64).collect();
    let mut norms = vec![0.0; n];
    accumulate_rows(&mut norms, f, |j, i| f[(i, j)] - mean[j], gamma, cfg.p_norm);
    let (mut next, res0) = argmax(&norms, &excluded).expect("grid is nonempty");
    let mut history = vec![HistoryEntry {
        m: 0,
        residual: res0,
        index: Some(next),
    }];

    let mut supports = Vec::new();
    loop {
        solver.push_support(next)?;
        excluded[next] = true;
        supports.push(next);
        let (_, weights) = solver.solve()?;
        let snapshots = f.select_rows(&supports);
        let mut model = BarycentricModel::new(
            supports.iter().map(|&i| z[i]).collect(),
            weights,
            snapshots,
            supports.clone(),
        )?;
        let m = supports.len();

        let norms = residual_row_norms(f, &model, grid, gamma, cfg.p_norm, &excluded);
        let best = argmax(&norms, &excluded);
        let res = best.map_or(0.0, |b| b.1);
        history.push(HistoryEntry {
            m,
            residual: res,
            index: best.map(|b| b.0),
        });

        let mut converged = res < cfg.tol;
        if converged && cfg.monitor_node_polynomial {
            let ell = node_polynomial_max_on(&model.supports, grid);
            converged = res * ell < cfg.tol;
        }
        let exhausted = best.is_none();
        if converged || exhausted || m >= max_m {
            model.converged = converged && !exhausted;
            model.exhausted = exhausted;
            model.history = history;
            return Ok(model);
        }
        next = best.expect("candidates remain").0;
    }
}

/// Worst weighted residual row of `model` outside `excluded`.
///
/// Ties go to the lowest index; an error is returned when every grid point
/// is excluded.
pub fn residual_argmax(
    f: &CMatrix,
    model: &BarycentricModel,
    grid: &SampleGrid,
    cfg: &AaaConfig,
    excluded: &[usize],
) -> Result<(usize, f64)> {
    if f.rows() != grid.len() {
        return Err(Error::Parameter("matrix and grid sizes differ".into()));
    }
    if f.cols() != model.ncols() {
        return Err(Error::Parameter("matrix and model column counts differ".into()));
    }
    cfg.validate(f.cols())?;
    let mut mask = vec![false; grid.len()];
    for &i in excluded {
        if i >= grid.len() {
            return Err(Error::Parameter(format!("excluded index {i} out of range")));
        }
        mask[i] = true;
    }
    let norms = residual_row_norms(f, model, grid, cfg.column_weights.as_deref(), cfg.p_norm, &mask);
    argmax(&norms, &mask).ok_or_else(|| Error::Exhausted("every grid point is excluded".into()))
}

fn argmax(norms: &[f64], excluded: &[bool]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in norms.iter().enumerate() {
        if excluded[i] {
            continue;
        }
        // NaN rows (poles on the grid) count as infinitely bad
        let v = if v.is_nan() { f64::INFINITY } else { v };
        if best.is_none_or(|b| v > b.1) {
            best = Some((i, v));
        }
    }
    best
}

fn accumulate_rows(
    norms: &mut [f64],
    f: &CMatrix,
    entry: impl Fn(usize, usize) -> C64,
    gamma: Option<&[f64]>,
    p: PNorm,
) {
    for j in 0..f.cols() {
        let g = gamma.map_or(1.0, |g| g[j]);
        for (i, s) in norms.iter_mut().enumerate() {
            let a = entry(j, i).norm() * g;
            match p {
                PNorm::Two => *s += a * a,
                PNorm::Inf => *s = s.max(a),
            }
        }
    }
    if p == PNorm::Two {
        norms.iter_mut().for_each(|s| *s = s.sqrt());
    }
}

/// Weighted row norms of `F - r(Z)`; rows with `skip` set are left at 0.
fn residual_row_norms(
    f: &CMatrix,
    model: &BarycentricModel,
    grid: &SampleGrid,
    gamma: Option<&[f64]>,
    p: PNorm,
    skip: &[bool],
) -> Vec<f64> {
    let z = grid.points();
    let rows: Vec<usize> = (0..z.len()).filter(|&i| !skip[i]).collect();
    let m = model.m();
    let mut cauchy = CMatrix::zeros(rows.len(), m);
    let mut inv_den = vec![ZERO; rows.len()];
    let mut bad = vec![false; rows.len()];
    let mut hit = vec![false; rows.len()];
    for (nu, (s, w)) in model.supports.iter().zip(&model.weights).enumerate() {
        let col = cauchy.col_mut(nu);
        for (t, &i) in rows.iter().enumerate() {
            if z[i] == *s {
                hit[t] = true;
                continue;
            }
            let c = w / (z[i] - s);
            col[t] = c;
            inv_den[t] += c;
        }
    }
    for (t, d) in inv_den.iter_mut().enumerate() {
        if hit[t] {
            continue;
        }
        if *d == ZERO || !d.re.is_finite() || !d.im.is_finite() {
            bad[t] = true;
        } else {
            *d = d.inv();
        }
    }
    let mut acc = vec![0.0; rows.len()];
    let mut tmp = vec![ZERO; rows.len()];
    for j in 0..f.cols() {
        let g = gamma.map_or(1.0, |g| g[j]);
        tmp.iter_mut().for_each(|x| *x = ZERO);
        for (nu, s) in model.snapshots.col(j).iter().enumerate() {
            if *s == ZERO {
                continue;
            }
            for (x, c) in tmp.iter_mut().zip(cauchy.col(nu)) {
                *x += c * s;
            }
        }
        let fj = f.col(j);
        for (t, &i) in rows.iter().enumerate() {
            if hit[t] {
                continue;
            }
            let a = (fj[i] - tmp[t] * inv_den[t]).norm() * g;
            match p {
                PNorm::Two => acc[t] += a * a,
                PNorm::Inf => acc[t] = acc[t].max(a),
            }
        }
    }
    let mut out = vec![0.0; z.len()];
    for (t, &i) in rows.iter().enumerate() {
        out[i] = if hit[t] {
            0.0
        } else if bad[t] {
            f64::INFINITY
        } else if p == PNorm::Two {
            acc[t].sqrt()
        } else {
            acc[t]
        };
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barycentric::{evaluate_grid, Axis};

    fn grid(n: usize) -> SampleGrid {
        SampleGrid::segment(-1.0, 1.0, n, Axis::Real).unwrap()
    }

    fn column(g: &SampleGrid, h: impl Fn(C64) -> C64) -> CMatrix {
        CMatrix::from_fn(g.len(), 1, |i, _| h(g.points()[i]))
    }

    #[test]
    fn linear_function_needs_two_supports() {
        let g = grid(50);
        let f = column(&g, |z| z);
        let model = sv_aaa(&f, &g, &AaaConfig::with_tol(1e-12)).unwrap();
        assert!(model.converged);
        assert_eq!(model.m(), 2);
        assert!(model.final_residual().unwrap() <= 1e-13);
    }

    #[test]
    fn pole_outside_interval_is_recovered() {
        let g = grid(100);
        let f = column(&g, |z| (z - 2.0).inv());
        let cfg = AaaConfig {
            max_degree: 2,
            ..AaaConfig::with_tol(1e-14)
        };
        let model = sv_aaa(&f, &g, &cfg).unwrap();
        let err = evaluate_grid(&model, &g).unwrap().sub(&f).unwrap().max_abs();
        assert!(err <= 1e-12, "{err}");
    }

    #[test]
    fn weights_have_unit_norm_and_supports_are_distinct() {
        let g = grid(300);
        let f = column(&g, |z| (3.0 * z).tanh());
        let model = sv_aaa(&f, &g, &AaaConfig::with_tol(1e-10)).unwrap();
        let nw: f64 = model.weights.iter().map(|w| w.norm_sqr()).sum::<f64>().sqrt();
        assert!((nw - 1.0).abs() < 1e-12);
        let mut idx = model.support_indices.clone();
        idx.sort_unstable();
        idx.dedup();
        assert_eq!(idx.len(), model.m());
    }

    #[test]
    fn max_degree_flags_non_convergence() {
        let g = grid(200);
        let f = column(&g, |z| C64::new(z.re.abs(), 0.0));
        let cfg = AaaConfig {
            max_degree: 3,
            ..AaaConfig::with_tol(1e-14)
        };
        let model = sv_aaa(&f, &g, &cfg).unwrap();
        assert!(!model.converged);
        assert_eq!(model.m(), 3);
    }

    #[test]
    fn tiny_grid_is_exhausted() {
        let g = grid(2);
        let f = column(&g, |z| z.exp());
        let model = sv_aaa(&f, &g, &AaaConfig::with_tol(1e-12)).unwrap();
        assert!(model.exhausted);
        assert!(!model.converged);
        assert_eq!(model.m(), 2);
    }

    #[test]
    fn zero_error_argmax_is_first_index() {
        let g = grid(10);
        let f = column(&g, |_| C64::new(2.0, 0.0));
        let model = sv_aaa(&f, &g, &AaaConfig::with_tol(1e-12)).unwrap();
        let (i, r) = residual_argmax(&f, &model, &g, &AaaConfig::default(), &[]).unwrap();
        assert_eq!((i, r), (0, 0.0));
        let all: Vec<usize> = (0..10).collect();
        assert!(matches!(
            residual_argmax(&f, &model, &g, &AaaConfig::default(), &all),
            Err(Error::Exhausted(_))
        ));
    }

    #[test]
    fn shape_mismatch_is_a_parameter_error() {
        let g = grid(10);
        let f = CMatrix::zeros(9, 1);
        assert!(matches!(
            sv_aaa(&f, &g, &AaaConfig::default()),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn solvers_agree_on_a_small_family() {
        let g = grid(120);
        let f = CMatrix::from_fn(120, 4, |i, j| {
            let z = g.points()[i];
            (z * (j as f64 + 0.5)).exp() + (z - C64::new(0.0, 0.2 + j as f64 * 0.1)).inv()
        });
        let fast = sv_aaa(&f, &g, &AaaConfig::with_tol(1e-10)).unwrap();
        let refr = sv_aaa(
            &f,
            &g,
            &AaaConfig {
                solver: Solver::Reference,
                ..AaaConfig::with_tol(1e-10)
            },
        )
        .unwrap();
        assert_eq!(fast.support_indices, refr.support_indices);
        for (a, b) in fast.weights.iter().zip(&refr.weights) {
            assert!((a - b).norm() < 1e-10, "{a} vs {b}");
        }
    }
}
