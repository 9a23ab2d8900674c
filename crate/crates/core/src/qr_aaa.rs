//! QR-AAA: pivoted QR of the scaled samples, then SV-AAA on `QΓ`.

use serde::{Deserialize, Serialize};

use crate::aaa::{sv_aaa, AaaConfig, Solver};
use crate::barycentric::{BarycentricModel, SampleGrid};
use crate::error::{Error, Result};
use crate::linalg::{rrqr, CMatrix, PNorm, RrqrFactorization, C64};

/// Per-column ∞-norms and the columns that were dropped for being zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnScaling {
    pub d: Vec<f64>,
    pub zero_columns: Vec<usize>,
}

impl ColumnScaling {
    /// Column ∞-norms of `f`.
    pub fn of(f: &CMatrix) -> Self {
        let d: Vec<f64> = (0..f.cols())
            .map(|j| f.col(j).iter().map(|z| z.norm()).fold(0.0, f64::max))
            .collect();
        let zero_columns = (0..f.cols()).filter(|&j| d[j] == 0.0).collect();
        Self { d, zero_columns }
    }

    /// `1 / d_j`, or 1 for a zero column: turns absolute row residuals
    /// into relative ones.
    pub fn relative_weights(&self) -> Vec<f64> {
        self.d.iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect()
    }

    pub fn ncols(&self) -> usize {
        self.d.len()
    }

    /// Original indices of the kept columns, in order.
    pub fn kept(&self) -> Vec<usize> {
        (0..self.d.len()).filter(|&j| self.d[j] > 0.0).collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TolMode {
    /// The inner SV-AAA runs at `tol`.
    #[default]
    Practical,
    /// The inner SV-AAA runs at `tol / k`.
    Theory,
}

impl std::str::FromStr for TolMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "practical" => Ok(TolMode::Practical),
            "theory" => Ok(TolMode::Theory),
            o => Err(Error::Parameter(format!("unknown tol mode `{o}`"))),
        }
    }
}

/// Scales every nonzero column to unit ∞-norm and drops zero columns.
///
/// ```
/// use ratbary::{qr_aaa::scale_columns, linalg::{CMatrix, C64}};
/// let f = CMatrix::from_rows(&[
///     vec![C64::new(0.0, 2.0), C64::new(0.0, 0.0)],
///     vec![C64::new(-4.0, 0.0), C64::new(0.0, 0.0)],
/// ]).unwrap();
/// let (g, s) = scale_columns(&f).unwrap();
/// assert_eq!(g.cols(), 1);
/// assert_eq!(g[(0, 0)], C64::new(0.0, 0.5));
/// assert_eq!(s.d, vec![4.0, 0.0]);
/// assert_eq!(s.zero_columns, vec![1]);
/// ```
pub fn scale_columns(f: &CMatrix) -> Result<(CMatrix, ColumnScaling)> {
    f.ensure_finite("sample matrix")?;
    let scaling = ColumnScaling::of(f);
    let kept = scaling.kept();
    if kept.is_empty() {
        return Err(Error::Degenerate("every column is zero".into()));
    }
    let mut g = f.select_cols(&kept);
    let inv: Vec<f64> = kept.iter().map(|&j| 1.0 / scaling.d[j]).collect();
    g.scale_cols(&inv);
    Ok((g, scaling))
}

#[derive(Clone, Debug, PartialEq)]
pub struct QrAaaOptions {
    pub tol: f64,
    pub tol_mode: TolMode,
    pub p_norm: PNorm,
    pub max_degree: usize,
    /// RRQR threshold; `None` means `tol`.
    pub rrqr_tol: Option<f64>,
    pub monitor_node_polynomial: bool,
    pub solver: Solver,
}

impl Default for QrAaaOptions {
    fn default() -> Self {
        let a = AaaConfig::default();
        Self {
            tol: a.tol,
            tol_mode: TolMode::Practical,
            p_norm: a.p_norm,
            max_degree: a.max_degree,
            rrqr_tol: None,
            monitor_node_polynomial: false,
            solver: a.solver,
        }
    }
}

impl QrAaaOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }

    pub(crate) fn inner_config(&self, k: usize) -> AaaConfig {
        let tol = match self.tol_mode {
            TolMode::Practical => self.tol,
            TolMode::Theory => self.tol / k as f64,
        };
        AaaConfig {
            tol,
            p_norm: self.p_norm,
            max_degree: self.max_degree,
            column_weights: None,
            monitor_node_polynomial: self.monitor_node_polynomial,
            solver: self.solver,
        }
    }
}

/// A QR-AAA result: the model for `F` plus what is needed to relate it to
/// the basis stage.
#[derive(Clone, Debug)]
pub struct QrAaaModel {
    /// Model over the original `F` (snapshots are rows of `F`).
    pub model: BarycentricModel,
    /// Model over `QΓ` with the same supports and weights.
    pub basis_model: BarycentricModel,
    pub scaling: ColumnScaling,
    pub rank: usize,
    pub gamma: Vec<f64>,
    pub tol_mode: TolMode,
    /// The basis `Q` (|Z| × k); dropped by the file format.
    pub q: CMatrix,
    /// `R` with columns in the order of the kept columns of `F`.
    pub r: CMatrix,
}

/// Runs the three QR-AAA stages on `f`.
///
/// ```
/// use ratbary::{qr_aaa::{qr_aaa, QrAaaOptions}, linalg::CMatrix, Axis, SampleGrid};
/// let grid = SampleGrid::segment(-1.0, 1.0, 300, Axis::Real).unwrap();
/// let f = CMatrix::from_fn(300, 40, |i, j| {
///     let z = grid.points()[i];
///     z.exp() * (j as f64) + (z * 2.0).cos()
/// });
/// let out = qr_aaa(&f, &grid, &QrAaaOptions::with_tol(1e-10)).unwrap();
/// assert_eq!(out.rank, 2);
/// assert!(out.model.converged);
/// ```
pub fn qr_aaa(f: &CMatrix, grid: &SampleGrid, opts: &QrAaaOptions) -> Result<QrAaaModel> {
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
    let (g, scaling) = scale_columns(f)?;
    let qr = rrqr(&g, opts.rrqr_tol.unwrap_or(opts.tol))?;
    if qr.rank == 0 {
        return Err(Error::Degenerate("numerical rank is zero".into()));
    }
    let gamma = qr.diag_abs();
    let mut qg = qr.q.clone();
    qg.scale_cols(&gamma);
    let basis_model = sv_aaa(&qg, grid, &opts.inner_config(qr.rank))?;
    let model = reconstruct(
        &basis_model,
        &scaling,
        &basis_model.support_indices,
        &f.select_rows(&basis_model.support_indices),
    )?;
    let RrqrFactorization { q, .. } = &qr;
    Ok(QrAaaModel {
        model,
        r: qr.r_unpermuted(),
        q: q.clone(),
        basis_model,
        scaling,
        rank: qr.rank,
        gamma,
        tol_mode: opts.tol_mode,
    })
}

/// Swaps the numerator data of a basis model for rows of `F`.
///
/// `f_rows` holds the rows of the original (unscaled) `F` at `supports`,
/// zero columns included, so `Q` and `R` are no longer needed afterwards.
pub fn reconstruct(
    basis_model: &BarycentricModel,
    scaling: &ColumnScaling,
    supports: &[usize],
    f_rows: &CMatrix,
) -> Result<BarycentricModel> {
    if supports != basis_model.support_indices.as_slice() {
        return Err(Error::Parameter("support indices do not match the basis model".into()));
    }
    if f_rows.rows() != basis_model.m() || f_rows.cols() != scaling.ncols() {
        return Err(Error::Parameter(format!(
            "expected {}x{} support rows, got {}x{}",
            basis_model.m(),
            scaling.ncols(),
            f_rows.rows(),
            f_rows.cols()
        )));
    }
    let mut snaps = f_rows.clone();
    for &j in &scaling.zero_columns {
        snaps.col_mut(j).iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
    }
    Ok(basis_model.with_snapshots(snaps))
}

/// `F̂ = Q̂ C` rescaled: the basis model evaluated on the grid times
/// `Γ^{-1} R`, with the column scaling undone and zero columns reinserted.
pub fn basis_reconstruction(out: &QrAaaModel, grid: &SampleGrid) -> Result<CMatrix> {
    let qhat = crate::barycentric::evaluate_grid(&out.basis_model, grid)?;
    let mut c = out.r.clone();
    for i in 0..out.rank {
        let g = 1.0 / out.gamma[i];
        for j in 0..c.cols() {
            c[(i, j)] *= g;
        }
    }
    let fk = qhat.matmul(&c)?;
    let kept = out.scaling.kept();
    let mut full = CMatrix::zeros(grid.len(), out.scaling.ncols());
    for (t, &j) in kept.iter().enumerate() {
        let d = out.scaling.d[j];
        for (o, v) in full.col_mut(j).iter_mut().zip(fk.col(t)) {
            *o = v * d;
        }
    }
    Ok(full)
}
