//! Sample grids and set-valued barycentric rational models.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64, ZERO};

/// Which axis a segment grid lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Real,
    Imag,
}

/// Affine map of the segment `[a, b]` (or `i[a, b]`) onto `[-1, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chart {
    pub a: f64,
    pub b: f64,
    pub axis: Axis,
}

impl Chart {
    pub fn new(a: f64, b: f64, axis: Axis) -> Result<Self> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::Parameter(format!("chart needs a < b, got [{a}, {b}]")));
        }
        Ok(Self { a, b, axis })
    }

    /// Chart coordinate of `z` (the component off the axis is ignored).
    #[inline]
    pub fn to_unit(&self, z: C64) -> f64 {
        let t = match self.axis {
            Axis::Real => z.re,
            Axis::Imag => z.im,
        };
        (2.0 * t - self.a - self.b) / (self.b - self.a)
    }

    #[inline]
    pub fn from_unit(&self, x: f64) -> C64 {
        let t = 0.5 * (self.a + self.b) + 0.5 * (self.b - self.a) * x;
        match self.axis {
            Axis::Real => C64::new(t, 0.0),
            Axis::Imag => C64::new(0.0, t),
        }
    }
}

/// Ordered set of distinct sample points, optionally tied to a segment.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleGrid {
    points: Vec<C64>,
    chart: Option<Chart>,
}

impl SampleGrid {
    /// A grid without chart. Points must be finite and pairwise distinct.
    pub fn new(points: Vec<C64>) -> Result<Self> {
        check_points(&points)?;
        Ok(Self { points, chart: None })
    }

    pub fn with_chart(points: Vec<C64>, chart: Chart) -> Result<Self> {
        check_points(&points)?;
        for z in &points {
            let x = chart.to_unit(*z);
            let off = match chart.axis {
                Axis::Real => z.im,
                Axis::Imag => z.re,
            };
            if x.abs() > 1.0 + 1e-12 || off.abs() > 1e-12 * (chart.a.abs() + chart.b.abs()).max(1.0) {
                return Err(Error::InvalidInput(format!("point {z} lies off the chart segment")));
            }
        }
        Ok(Self {
            points,
            chart: Some(chart),
        })
    }

    /// `n` equispaced points on `[a, b]` or `i[a, b]`, endpoints included.
    ///
    /// ```
    /// use ratbary::{Axis, SampleGrid};
    /// let g = SampleGrid::segment(-10.0, 10.0, 1000, Axis::Imag).unwrap();
    /// assert_eq!(g.len(), 1000);
    /// assert_eq!(g.points()[0].im, -10.0);
    /// assert_eq!(g.chart_coords()[999], 1.0);
    /// ```
    pub fn segment(a: f64, b: f64, n: usize, axis: Axis) -> Result<Self> {
        let chart = Chart::new(a, b, axis)?;
        if n < 2 {
            return Err(Error::Parameter("a segment grid needs at least two points".into()));
        }
        let points = (0..n)
            .map(|i| chart.from_unit(-1.0 + 2.0 * i as f64 / (n - 1) as f64))
            .collect();
        Self::with_chart(points, chart)
    }

    pub fn points(&self) -> &[C64] {
        &self.points
    }

    pub fn chart(&self) -> Option<Chart> {
        self.chart
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points in chart coordinates, or the real parts when there is no chart.
    pub fn chart_coords(&self) -> Vec<f64> {
        match self.chart {
            Some(c) => self.points.iter().map(|z| c.to_unit(*z)).collect(),
            None => self.points.iter().map(|z| z.re).collect(),
        }
    }

    /// Points mapped through the chart (as complex numbers); unchanged
    /// without a chart.
    pub(crate) fn unit_points(&self) -> Vec<C64> {
        match self.chart {
            Some(c) => self.points.iter().map(|z| C64::new(c.to_unit(*z), 0.0)).collect(),
            None => self.points.clone(),
        }
    }

    /// Sub-grid at the given indices, keeping the chart.
    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            points: idx.iter().map(|&i| self.points[i]).collect(),
            chart: self.chart,
        }
    }
}

fn check_points(points: &[C64]) -> Result<()> {
    if points.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidInput("grid contains non-finite points".into()));
    }
    let mut sorted: Vec<(f64, f64)> = points.iter().map(|z| (z.re, z.im)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidInput("grid points must be pairwise distinct".into()));
    }
    Ok(())
}

/// One greedy step: after `m` supports the worst remaining row had norm
/// `residual` at grid index `index`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub m: usize,
    #[serde(with = "crate::io::float")]
    pub residual: f64,
    pub index: Option<usize>,
}

/// Shared-support barycentric approximant of `N` functions.
///
/// `r(z) = Σ w_ν f(z_ν) / (z - z_ν)  /  Σ w_ν / (z - z_ν)`, with the row
/// `f(z_ν)` stored in `snapshots`.
#[derive(Clone, Debug, PartialEq)]
pub struct BarycentricModel {
    pub supports: Vec<C64>,
    pub weights: Vec<C64>,
    pub snapshots: CMatrix,
    pub support_indices: Vec<usize>,
    pub history: Vec<HistoryEntry>,
    pub converged: bool,
    pub exhausted: bool,
}

impl BarycentricModel {
    /// Builds a model and checks the structural invariants.
    pub fn new(supports: Vec<C64>, weights: Vec<C64>, snapshots: CMatrix, support_indices: Vec<usize>) -> Result<Self> {
        let m = supports.len();
        if m == 0 {
            return Err(Error::Parameter("a model needs at least one support".into()));
        }
        if weights.len() != m || snapshots.rows() != m || support_indices.len() != m {
            return Err(Error::Parameter(format!(
                "inconsistent model: {m} supports, {} weights, {} snapshot rows, {} indices",
                weights.len(),
                snapshots.rows(),
                support_indices.len()
            )));
        }
        check_points(&supports)?;
        Ok(Self {
            supports,
            weights,
            snapshots,
            support_indices,
            history: Vec::new(),
            converged: true,
            exhausted: false,
        })
    }

    pub fn m(&self) -> usize {
        self.supports.len()
    }

    pub fn degree(&self) -> usize {
        self.m() - 1
    }

    pub fn ncols(&self) -> usize {
        self.snapshots.cols()
    }

    /// Last recorded greedy residual.
    pub fn final_residual(&self) -> Option<f64> {
        self.history.last().map(|h| h.residual)
    }

    /// Same supports and weights with other numerator data.
    pub(crate) fn with_snapshots(&self, snapshots: CMatrix) -> Self {
        Self {
            snapshots,
            ..self.clone()
        }
    }
}

/// Evaluates every component of the model at `z`.
///
/// ```
/// use ratbary::{evaluate, BarycentricModel, linalg::{CMatrix, C64}};
/// let s = std::f64::consts::FRAC_1_SQRT_2;
/// let model = BarycentricModel::new(
///     vec![C64::new(-1.0, 0.0), C64::new(1.0, 0.0)],
///     vec![C64::new(s, 0.0), C64::new(-s, 0.0)],
///     CMatrix::from_rows(&[vec![C64::new(-1.0, 0.0)], vec![C64::new(1.0, 0.0)]]).unwrap(),
///     vec![0, 1],
/// ).unwrap();
/// assert!(evaluate(&model, C64::new(0.0, 0.0)).unwrap()[0].norm() < 1e-15);
/// assert!((evaluate(&model, C64::new(0.5, 0.0)).unwrap()[0].re - 0.5).abs() < 1e-15);
/// ```
pub fn evaluate(model: &BarycentricModel, z: C64) -> Result<Vec<C64>> {
    if let Some(k) = model.supports.iter().position(|s| *s == z) {
        return Ok(model.snapshots.row(k));
    }
    let mut den = ZERO;
    let mut c = Vec::with_capacity(model.m());
    for (s, w) in model.supports.iter().zip(&model.weights) {
        let t = w / (z - s);
        den += t;
        c.push(t);
    }
    if den == ZERO || !den.re.is_finite() || !den.im.is_finite() {
        return Err(Error::PoleHit(z));
    }
    let mut out = vec![ZERO; model.ncols()];
    for (j, o) in out.iter_mut().enumerate() {
        let col = model.snapshots.col(j);
        let mut num = ZERO;
        for (ci, fi) in c.iter().zip(col) {
            num += ci * fi;
        }
        *o = num / den;
    }
    if out.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::PoleHit(z));
    }
    Ok(out)
}

/// Evaluates the model on every grid point (rows of the result).
pub fn evaluate_grid(model: &BarycentricModel, grid: &SampleGrid) -> Result<CMatrix> {
    evaluate_points(model, grid.points())
}

pub(crate) fn evaluate_points(model: &BarycentricModel, points: &[C64]) -> Result<CMatrix> {
    let (vals, dens) = evaluate_unchecked(model, points);
    if let Some(i) = dens.iter().position(|d| !d) {
        return Err(Error::PoleHit(points[i]));
    }
    Ok(vals)
}

/// Evaluation on many points; the flag per row is false where the
/// denominator vanished (that row is then NaN).
pub(crate) fn evaluate_unchecked(model: &BarycentricModel, points: &[C64]) -> (CMatrix, Vec<bool>) {
    let n = points.len();
    let m = model.m();
    let mut cauchy = CMatrix::zeros(n, m);
    let mut den = vec![ZERO; n];
    let mut hit: Vec<Option<usize>> = vec![None; n];
    for (nu, (s, w)) in model.supports.iter().zip(&model.weights).enumerate() {
        let col = cauchy.col_mut(nu);
        for (i, z) in points.iter().enumerate() {
            let d = z - s;
            if d == ZERO {
                hit[i] = Some(nu);
                continue;
            }
            let t = w / d;
            col[i] = t;
            den[i] += t;
        }
    }
    let mut ok = vec![true; n];
    let mut inv = vec![ZERO; n];
    for i in 0..n {
        if hit[i].is_none() {
            let d = den[i];
            if d == ZERO || !d.re.is_finite() || !d.im.is_finite() {
                ok[i] = false;
            } else {
                inv[i] = d.inv();
            }
        }
    }
    let nan = C64::new(f64::NAN, f64::NAN);
    let mut out = CMatrix::zeros(n, model.ncols());
    for j in 0..model.ncols() {
        let snap = model.snapshots.col(j);
        let oc = out.col_mut(j);
        for (nu, s) in snap.iter().enumerate() {
            if *s == ZERO {
                continue;
            }
            for (o, c) in oc.iter_mut().zip(cauchy.col(nu)) {
                *o += c * s;
            }
        }
        for i in 0..n {
            oc[i] = match hit[i] {
                Some(nu) => snap[nu],
                None if ok[i] => oc[i] * inv[i],
                None => nan,
            };
            if !oc[i].re.is_finite() || !oc[i].im.is_finite() {
                ok[i] = false;
            }
        }
    }
    (out, ok)
}

/// `max_z |Π_ν (z - z_ν)|` over the given points.
///
/// ```
/// use ratbary::{node_polynomial_max, linalg::C64};
/// let r = |x: f64| C64::new(x, 0.0);
/// assert_eq!(node_polynomial_max(&[r(0.0)], &[r(-1.0), r(0.0), r(1.0)]), 1.0);
/// assert_eq!(node_polynomial_max(&[r(-1.0), r(1.0)], &[r(0.0)]), 1.0);
/// ```
pub fn node_polynomial_max(supports: &[C64], points: &[C64]) -> f64 {
    // log domain keeps large supports sets from overflowing in the middle
    let mut best = f64::NEG_INFINITY;
    for z in points {
        let mut acc = 0.0;
        for s in supports {
            let d = (z - s).norm();
            if d == 0.0 {
                acc = f64::NEG_INFINITY;
                break;
            }
            acc += d.ln();
        }
        best = best.max(acc);
    }
    if supports.is_empty() {
        return if points.is_empty() { 0.0 } else { 1.0 };
    }
    best.exp()
}

/// Node polynomial maximum in chart coordinates of `grid`.
pub fn node_polynomial_max_on(supports: &[C64], grid: &SampleGrid) -> f64 {
    match grid.chart() {
        Some(c) => {
            let s: Vec<C64> = supports.iter().map(|z| C64::new(c.to_unit(*z), 0.0)).collect();
            node_polynomial_max(&s, &grid.unit_points())
        }
        None => node_polynomial_max(supports, grid.points()),
    }
}
