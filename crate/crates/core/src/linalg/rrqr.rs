use super::householder::Reflector;
use super::matrix::{norm_sqr, CMatrix, C64, ZERO};
use crate::error::{Error, Result};

/// Truncated column-pivoted QR: `F[:, perm] ≈ Q R`.
///
/// `perm` is a full permutation of the columns of `F`; its first `rank`
/// entries are the selected (pivot) columns, and column `j` of `r` belongs
/// to original column `perm[j]`.
#[derive(Clone, Debug)]
pub struct RrqrFactorization {
    pub q: CMatrix,
    pub r: CMatrix,
    pub perm: Vec<usize>,
    pub rank: usize,
    /// Set when the input had no column above the threshold at all.
    pub degenerate: bool,
}

impl RrqrFactorization {
    pub fn selected(&self) -> &[usize] {
        &self.perm[..self.rank]
    }

    /// `|R(i,i)|` for `i < rank`.
    pub fn diag_abs(&self) -> Vec<f64> {
        (0..self.rank).map(|i| self.r[(i, i)].norm()).collect()
    }

    /// The factor `R` with columns put back in the original order.
    pub fn r_unpermuted(&self) -> CMatrix {
        let mut out = CMatrix::zeros(self.rank, self.r.cols());
        for (pj, &orig) in self.perm.iter().enumerate() {
            out.col_mut(orig).copy_from_slice(self.r.col(pj));
        }
        out
    }
}

/// Greedy pivoted Householder QR, stopped once every remaining residual
/// column has 2-norm below `tol`.
///
/// ```
/// use ratbary::linalg::{rrqr, CMatrix};
/// let f = CMatrix::identity(4);
/// let qr = rrqr(&f, 1e-10).unwrap();
/// assert_eq!(qr.rank, 4);
/// assert!(qr.diag_abs().iter().all(|d| (d - 1.0).abs() < 1e-15));
/// ```
pub fn rrqr(f: &CMatrix, tol: f64) -> Result<RrqrFactorization> {
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(Error::Parameter(format!("rrqr tolerance must be positive, got {tol}")));
    }
    let (nr, nc) = f.shape();
    if nr == 0 || nc == 0 {
        return Err(Error::Parameter("rrqr of an empty matrix".into()));
    }
    f.ensure_finite("rrqr input")?;

    let mut a = f.clone();
    let mut perm: Vec<usize> = (0..nc).collect();
    let mut r2: Vec<f64> = (0..nc).map(|j| norm_sqr(a.col(j))).collect();
    let mut reference = r2.clone();
    let guard = f64::EPSILON.sqrt();
    let thresh = tol * tol;
    let kmax = nr.min(nc);
    let mut reflectors: Vec<Reflector> = Vec::new();

    let mut k = 0;
    while k < kmax {
        let mut piv = k;
        for j in k + 1..nc {
            if r2[j] > r2[piv] || (r2[j] == r2[piv] && perm[j] < perm[piv]) {
                piv = j;
            }
        }
        if !(r2[piv] >= thresh) {
            break;
        }
        a.swap_cols(k, piv);
        perm.swap(k, piv);
        r2.swap(k, piv);
        reference.swap(k, piv);

        let (beta, h) = Reflector::annihilate(k, &a.col(k)[k..]);
        {
            let col = a.col_mut(k);
            col[k] = beta;
            col[k + 1..].iter_mut().for_each(|z| *z = ZERO);
        }
        for j in k + 1..nc {
            let col = a.col_mut(j);
            h.apply_adjoint(col);
            r2[j] -= col[k].norm_sqr();
            if r2[j] < guard * reference[j] {
                r2[j] = norm_sqr(&col[k + 1..]);
                reference[j] = r2[j];
            }
        }
        reflectors.push(h);
        k += 1;
    }

    let rank = k;
    let mut q = CMatrix::zeros(nr, rank);
    for i in 0..rank {
        q[(i, i)] = C64::new(1.0, 0.0);
    }
    for h in reflectors.iter().rev() {
        for j in 0..rank {
            h.apply(q.col_mut(j));
        }
    }
    let r = CMatrix::from_fn(rank, nc, |i, j| if i <= j { a[(i, j)] } else { ZERO });

    Ok(RrqrFactorization {
        q,
        r,
        perm,
        rank,
        degenerate: rank == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn rank_one_outer_product() {
        let u: Vec<C64> = (0..30).map(|i| cm((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
        let v: Vec<C64> = (0..50).map(|j| cm(1.0 + j as f64 * 0.01, -(j as f64).cos())).collect();
        let f = CMatrix::from_fn(30, 50, |i, j| u[i] * v[j]);
        let qr = rrqr(&f, 1e-10).unwrap();
        assert_eq!(qr.rank, 1);
    }

    #[test]
    fn zero_matrix_is_degenerate() {
        let qr = rrqr(&CMatrix::zeros(5, 3), 1e-8).unwrap();
        assert!(qr.degenerate);
        assert_eq!(qr.rank, 0);
        assert_eq!(qr.q.cols(), 0);
    }

    #[test]
    fn rejects_bad_tolerance() {
        assert!(rrqr(&CMatrix::identity(2), 0.0).is_err());
        assert!(rrqr(&CMatrix::identity(2), f64::NAN).is_err());
    }

    #[test]
    fn duplicate_columns_pivot_to_lowest_index() {
        let base = CMatrix::from_fn(6, 2, |i, j| cm((i + j) as f64, i as f64 * 0.5 - j as f64));
        let dup = CMatrix::hcat(&[&base, &base]).unwrap();
        let qr = rrqr(&dup, 1e-12).unwrap();
        assert_eq!(qr.rank, 2);
        assert!(qr.selected().iter().all(|&j| j < 2));
    }

    #[test]
    fn unpermuted_r_reconstructs() {
        let f = CMatrix::from_fn(8, 5, |i, j| {
            cm(((i * 7 + j * 3) % 5) as f64, (i as f64 - j as f64).sin())
        });
        let qr = rrqr(&f, 1e-14).unwrap();
        let back = qr.q.matmul(&qr.r_unpermuted()).unwrap();
        assert!(back.sub(&f).unwrap().norm_fro() < 1e-12 * f.norm_fro());
    }
}
