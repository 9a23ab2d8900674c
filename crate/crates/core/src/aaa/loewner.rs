use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::linalg::{
    argmin, dotc, norm_sqr, recip, right_singular_system, triangular_factor, CAcc, CMatrix, Cdd, C64, ZERO,
};
use crate::SampleGrid;

/// Block Loewner matrix over the non-support points, rows ordered by
/// function first and candidate point second.
///
/// ```
/// use ratbary::{aaa::loewner_assemble, linalg::{CMatrix, C64}, SampleGrid};
/// let r = |x: f64| C64::new(x, 0.0);
/// let grid = SampleGrid::new(vec![r(0.0), r(1.0), r(2.0)]).unwrap();
/// let f = CMatrix::from_columns(&[grid.points().to_vec()]).unwrap();
/// let l = loewner_assemble(&f, &grid, &[0]).unwrap();
/// assert_eq!(l.col(0), &[r(1.0), r(1.0)]);
/// ```
pub fn loewner_assemble(f: &CMatrix, grid: &SampleGrid, supports: &[usize]) -> Result<CMatrix> {
    let n = grid.len();
    if f.rows() != n {
        return Err(Error::Parameter(format!(
            "matrix has {} rows but the grid has {n} points",
            f.rows()
        )));
    }
    if supports.is_empty() {
        return Err(Error::Parameter("no supports given".into()));
    }
    let mut is_support = vec![false; n];
    for &s in supports {
        if s >= n {
            return Err(Error::Parameter(format!("support index {s} out of range")));
        }
        if is_support[s] {
            return Err(Error::Parameter(format!("duplicate support index {s}")));
        }
        is_support[s] = true;
    }
    let cand: Vec<usize> = (0..n).filter(|&i| !is_support[i]).collect();
    let z = grid.points();
    let nc = cand.len();
    let mut l = CMatrix::zeros(f.cols() * nc, supports.len());
    for (nu, &s) in supports.iter().enumerate() {
        let col = l.col_mut(nu);
        for j in 0..f.cols() {
            let fj = f.col(j);
            for (t, &i) in cand.iter().enumerate() {
                col[j * nc + t] = entry(fj[i], fj[s], cauchy(z[i], z[s]));
            }
        }
    }
    Ok(l)
}

#[inline]
fn cauchy(zi: C64, zs: C64) -> C64 {
    (zi - zs).inv()
}

/// One Loewner entry. Both weight solvers build `L^{(m)}` through this, so
/// they work on bit-identical matrices.
#[inline]
fn entry(fi: C64, fs: C64, kappa: C64) -> C64 {
    (fi - fs) * kappa
}

/// How the weights of each greedy step are computed.
pub(crate) trait WeightSolver {
    fn push_support(&mut self, idx: usize) -> Result<()>;
    fn solve(&self) -> Result<(f64, Vec<C64>)>;
}

/// Explicit assembly and a dense SVD every step.
pub(crate) struct ReferenceSolver<'a> {
    f: &'a CMatrix,
    grid: &'a SampleGrid,
    supports: Vec<usize>,
}

impl<'a> ReferenceSolver<'a> {
    pub fn new(f: &'a CMatrix, grid: &'a SampleGrid) -> Self {
        Self {
            f,
            grid,
            supports: Vec::new(),
        }
    }
}

impl WeightSolver for ReferenceSolver<'_> {
    fn push_support(&mut self, idx: usize) -> Result<()> {
        self.supports.push(idx);
        Ok(())
    }

    fn solve(&self) -> Result<(f64, Vec<C64>)> {
        let l = loewner_assemble(self.f, self.grid, &self.supports)?;
        let m = self.supports.len();
        let r = if l.rows() >= m {
            triangular_factor(&l)
        } else {
            // fewer rows than supports: pad with zero rows
            let mut padded = CMatrix::zeros(m, m);
            for j in 0..m {
                padded.col_mut(j)[..l.rows()].copy_from_slice(l.col(j));
            }
            triangular_factor(&padded)
        };
        let (sigma, v) = right_singular_system(r);
        Ok(refine(&sigma, &v, |x| {
            let mut y = vec![CAcc::default(); l.rows()];
            for (a, xa) in x.iter().enumerate() {
                for (acc, la) in y.iter_mut().zip(l.col(a)) {
                    acc.add_mul_dd(*la, *xa);
                }
            }
            let y: Vec<Cdd> = y.into_iter().map(CAcc::finish).collect();
            (0..m)
                .map(|a| {
                    let mut acc = CAcc::default();
                    for (la, yr) in l.col(a).iter().zip(&y) {
                        acc.add_conj_mul_dd(*la, *yr);
                    }
                    acc.finish()
                })
                .collect()
        }))
    }
}

const MAX_REFINE: usize = 8;

fn normalize(x: &mut [Cdd]) {
    let n2 = x.iter().fold(TwoFloat::from(0.0), |a, z| a + z.norm_sqr());
    if n2.hi() > 0.0 {
        let inv = recip(n2.sqrt());
        x.iter_mut().for_each(|z| *z = z.scale(inv));
    }
}

/// Smallest right singular pair of `L`, polished in double-double.
///
/// `sigma` and `v` are a double-precision singular system of `L`; `gram`
/// applies `L^H L` with double-double accuracy. Newton steps project the
/// eigen-residual onto the other singular vectors.
fn refine(sigma: &[f64], v: &[Vec<C64>], gram: impl Fn(&[Cdd]) -> Vec<Cdd>) -> (f64, Vec<C64>) {
    let m = sigma.len();
    let k0 = argmin(sigma);
    let lam: Vec<f64> = sigma.iter().map(|s| s * s).collect();
    let top = lam.iter().fold(0.0, |a: f64, b| a.max(*b));
    let mut x: Vec<Cdd> = v[k0].iter().map(|&z| Cdd::from_c64(z)).collect();
    let mut rho = TwoFloat::from(lam[k0]);
    let mut settled = false;
    for it in 0..=MAX_REFINE {
        normalize(&mut x);
        let y = gram(&x);
        rho = x
            .iter()
            .zip(&y)
            .fold(TwoFloat::from(0.0), |a, (xi, yi)| a + (xi.conj() * *yi).re);
        let r: Vec<C64> = x
            .iter()
            .zip(&y)
            .map(|(xi, yi)| (*yi - xi.scale(rho)).to_c64())
            .collect();
        if settled || it == MAX_REFINE || norm_sqr(&r).sqrt() <= 1e-32 * top {
            break;
        }
        let mut delta = vec![ZERO; m];
        for k in (0..m).filter(|&k| k != k0) {
            let den = lam[k] - rho.hi();
            if den.abs() <= 1e-32 * top {
                continue;
            }
            let c = dotc(&v[k], &r) / den;
            for (d, vk) in delta.iter_mut().zip(&v[k]) {
                *d += c * vk;
            }
        }
        for (xi, d) in x.iter_mut().zip(&delta) {
            *xi = *xi - Cdd::from_c64(*d);
        }
        settled = norm_sqr(&delta).sqrt() <= 1e-26;
    }
    // phase convention, in double-double
    let mut k = 0;
    for (i, z) in x.iter().enumerate() {
        if z.abs_hi() > x[k].abs_hi() {
            k = i;
        }
    }
    let big = x[k].norm_sqr().sqrt();
    if big.hi() > 0.0 {
        let p = x[k].conj().scale(recip(big));
        x.iter_mut().for_each(|z| *z = *z * p);
        x[k].im = TwoFloat::from(0.0);
    }
    (rho.hi().max(0.0).sqrt(), x.into_iter().map(Cdd::to_c64).collect())
}

/// Incremental Loewner Gram matrix.
///
/// Holds `G = L^H L` for the current supports, accumulated with compensated
/// sums and stored in double-double. A new support costs one pass over the
/// candidate rows per existing support; leaving rows are subtracted. The
/// `m × m` reduced factor is the double-double Cholesky factor of `G`.
pub struct LoewnerState {
    z: Vec<C64>,
    f: CMatrix,
    active: Vec<bool>,
    supports: Vec<usize>,
    /// `1 / (z_i - z_ν)` for every support, indexed by grid point
    kappa: Vec<Vec<C64>>,
    gram: Vec<Vec<Cdd>>,
}

impl LoewnerState {
    pub fn new(f: &CMatrix, grid: &SampleGrid) -> Result<Self> {
        let n = grid.len();
        if f.rows() != n {
            return Err(Error::Parameter(format!(
                "matrix has {} rows but the grid has {n} points",
                f.rows()
            )));
        }
        Ok(Self {
            z: grid.points().to_vec(),
            f: f.clone(),
            active: vec![true; n],
            supports: Vec::new(),
            kappa: Vec::new(),
            gram: Vec::new(),
        })
    }

    pub fn supports(&self) -> &[usize] {
        &self.supports
    }

    /// Whether grid point `i` still contributes Loewner rows.
    pub fn is_active(&self, i: usize) -> bool {
        self.active.get(i).copied().unwrap_or(false)
    }

    /// Adds grid point `c` as the next support.
    pub fn push_support(&mut self, c: usize) -> Result<()> {
        if !self.is_active(c) {
            return Err(Error::Parameter(format!(
                "grid index {c} is not an available candidate"
            )));
        }
        let m = self.supports.len();
        let ncols = self.f.cols();

        // the rows of `c` leave the matrix
        let rows: Vec<Vec<C64>> = (0..m)
            .map(|a| {
                let s = self.supports[a];
                (0..ncols)
                    .map(|j| entry(self.f[(c, j)], self.f[(s, j)], self.kappa[a][c]))
                    .collect()
            })
            .collect();
        for a in 0..m {
            for b in a..m {
                let mut acc = CAcc::default();
                for (ra, rb) in rows[a].iter().zip(&rows[b]) {
                    acc.add_conj_mul(*ra, *rb);
                }
                let mut g = self.gram[a][b] - acc.finish();
                if a == b {
                    g.im = TwoFloat::from(0.0);
                }
                self.gram[a][b] = g;
                self.gram[b][a] = g.conj();
            }
        }
        self.active[c] = false;

        let zc = self.z[c];
        let cand: Vec<usize> = (0..self.z.len()).filter(|&i| self.active[i]).collect();
        let mut kc = vec![ZERO; self.z.len()];
        for &i in &cand {
            kc[i] = cauchy(self.z[i], zc);
        }
        let mut col = Vec::with_capacity(m + 1);
        for a in 0..=m {
            let (s, ka) = if a < m {
                (self.supports[a], &self.kappa[a])
            } else {
                (c, &kc)
            };
            let mut acc = CAcc::default();
            for j in 0..ncols {
                let fj = self.f.col(j);
                let (fs, fc) = (fj[s], fj[c]);
                for &i in &cand {
                    acc.add_conj_mul(entry(fj[i], fs, ka[i]), entry(fj[i], fc, kc[i]));
                }
            }
            col.push(acc.finish());
        }
        col[m].im = TwoFloat::from(0.0);
        for (a, g) in col.iter().take(m).enumerate() {
            self.gram[a].push(*g);
        }
        self.gram.push(col.iter().map(|g| g.conj()).collect());
        self.kappa.push(kc);
        self.supports.push(c);
        Ok(())
    }

    /// Upper-triangular `R` with `R^H R = L^H L`, columns in double-double.
    fn cholesky(&self) -> Vec<Vec<Cdd>> {
        let m = self.supports.len();
        let top = (0..m).fold(0.0, |a: f64, k| a.max(self.gram[k][k].re.hi()));
        let mut r = vec![vec![Cdd::ZERO; m]; m];
        for k in 0..m {
            let mut d = self.gram[k][k].re;
            for i in 0..k {
                d -= r[k][i].norm_sqr();
            }
            if !(d.hi() > 1e-31 * top) {
                continue;
            }
            let rkk = d.sqrt();
            let inv = recip(rkk);
            r[k][k] = Cdd {
                re: rkk,
                im: TwoFloat::from(0.0),
            };
            for j in k + 1..m {
                let mut s = self.gram[k][j];
                for i in 0..k {
                    s = s - r[k][i].conj() * r[j][i];
                }
                r[j][k] = s.scale(inv);
            }
        }
        r
    }

    /// The reduced factor `R` (rounded to double).
    pub fn reduced_factor(&self) -> CMatrix {
        let m = self.supports.len();
        let r = self.cholesky();
        CMatrix::from_fn(m, m, |i, j| r[j][i].to_c64())
    }

    pub fn min_singular_pair(&self) -> Result<(f64, Vec<C64>)> {
        let m = self.supports.len();
        if m == 0 {
            return Err(Error::Parameter("no supports yet".into()));
        }
        let cols = self
            .cholesky()
            .into_iter()
            .map(|c| c.into_iter().map(Cdd::to_c64).collect())
            .collect();
        let (sigma, v) = right_singular_system(cols);
        Ok(refine(&sigma, &v, |x| {
            self.gram
                .iter()
                .map(|row| row.iter().zip(x).fold(Cdd::ZERO, |a, (g, xi)| a + *g * *xi))
                .collect()
        }))
    }
}

/// The incremental state as a [`WeightSolver`].
pub(crate) struct FastSolver(pub LoewnerState);

impl WeightSolver for FastSolver {
    fn push_support(&mut self, idx: usize) -> Result<()> {
        self.0.push_support(idx)
    }

    fn solve(&self) -> Result<(f64, Vec<C64>)> {
        self.0.min_singular_pair()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::singular_values;

    fn sample(n: usize, ncols: usize) -> (CMatrix, SampleGrid) {
        let grid = SampleGrid::new(
            (0..n)
                .map(|i| C64::new(-1.0 + 2.0 * i as f64 / (n - 1) as f64, 0.0))
                .collect(),
        )
        .unwrap();
        let f = CMatrix::from_fn(n, ncols, |i, j| {
            let z = grid.points()[i];
            (z * (j as f64 + 1.0)).exp() / (z - C64::new(1.5, 0.3 * j as f64))
        });
        (f, grid)
    }

    #[test]
    fn constant_function_has_zero_loewner() {
        let grid = SampleGrid::new((0..5).map(|i| C64::new(i as f64, 0.0)).collect()).unwrap();
        let f = CMatrix::from_fn(5, 2, |_, j| C64::new(j as f64 + 2.0, -1.0));
        let l = loewner_assemble(&f, &grid, &[1, 3]).unwrap();
        assert_eq!(l.shape(), (6, 2));
        assert_eq!(l.max_abs(), 0.0);
    }

    #[test]
    fn duplicate_support_rejected() {
        let (f, grid) = sample(6, 1);
        assert!(loewner_assemble(&f, &grid, &[2, 2]).is_err());
    }

    #[test]
    fn reduced_factor_matches_assembly() {
        for ncols in [1, 3, 7] {
            let (f, grid) = sample(37, ncols);
            let mut st = LoewnerState::new(&f, &grid).unwrap();
            let order = [5, 30, 0, 17, 36, 11, 24, 2];
            for (k, &c) in order.iter().enumerate() {
                st.push_support(c).unwrap();
                let l = loewner_assemble(&f, &grid, &order[..=k]).unwrap();
                let a = singular_values(&l);
                let b = singular_values(&st.reduced_factor());
                for (x, y) in a.iter().zip(&b) {
                    assert!((x - y).abs() <= 1e-12 * a[0], "ncols {ncols} step {k}: {x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn solvers_agree_in_weights() {
        for ncols in [1, 4] {
            let (f, grid) = sample(60, ncols);
            let mut fast = FastSolver(LoewnerState::new(&f, &grid).unwrap());
            let mut slow = ReferenceSolver::new(&f, &grid);
            for c in [0, 59, 30, 12, 45, 6] {
                fast.push_support(c).unwrap();
                slow.push_support(c).unwrap();
                let (sa, wa) = fast.solve().unwrap();
                let (sb, wb) = slow.solve().unwrap();
                let d = wa.iter().zip(&wb).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
                assert!(
                    d <= 1e-12,
                    "ncols {ncols} support {c}: weights differ by {d:e} (sigma {sa:e} {sb:e})"
                );
            }
        }
    }

    #[test]
    fn supports_leave_the_active_set() {
        let (f, grid) = sample(9, 2);
        let mut st = LoewnerState::new(&f, &grid).unwrap();
        st.push_support(4).unwrap();
        assert!(!st.is_active(4));
        assert!(st.is_active(3));
        assert!(st.push_support(4).is_err());
    }
}
