use super::householder::Reflector;
use super::matrix::{dotc, norm_sqr, CMatrix, C64, ONE, ZERO};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 60;

/// Right singular vector of a smallest singular value of `l`, unit 2-norm,
/// with its largest entry rotated to the positive real axis.
///
/// ```
/// use ratbary::linalg::{min_right_singular_vector, CMatrix, C64};
/// let mut d = CMatrix::zeros(3, 3);
/// d[(0, 0)] = C64::new(3.0, 0.0);
/// d[(1, 1)] = C64::new(2.0, 0.0);
/// d[(2, 2)] = C64::new(1.0, 0.0);
/// let w = min_right_singular_vector(&d).unwrap();
/// assert!((w[2] - C64::new(1.0, 0.0)).norm() < 1e-15);
/// ```
pub fn min_right_singular_vector(l: &CMatrix) -> Result<Vec<C64>> {
    Ok(min_singular_pair(l)?.1)
}

/// Smallest singular value of `l` together with its right singular vector.
pub fn min_singular_pair(l: &CMatrix) -> Result<(f64, Vec<C64>)> {
    let m = l.cols();
    if m == 0 {
        return Err(Error::Parameter("singular vector of a matrix with no columns".into()));
    }
    if l.rows() < m {
        return Err(Error::Parameter(format!(
            "expected at least as many rows as columns, got {}x{m}",
            l.rows()
        )));
    }
    let r = triangular_factor(l);
    Ok(min_pair_square(r))
}

/// All singular values of `a` in descending order.
pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    let sq = if a.rows() >= a.cols() { a.clone() } else { a.adjoint() };
    if sq.cols() == 0 {
        return Vec::new();
    }
    let (cols, _) = jacobi(triangular_factor(&sq));
    let mut s: Vec<f64> = cols.iter().map(|c| norm_sqr(c).sqrt()).collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Singular values (unsorted) and right singular vectors of a square
/// factor given column-wise.
pub(crate) fn right_singular_system(cols: Vec<Vec<C64>>) -> (Vec<f64>, Vec<Vec<C64>>) {
    let (a, mut v) = jacobi(cols);
    for c in &mut v {
        let s = norm_sqr(c).sqrt();
        c.iter_mut().for_each(|z| *z /= s);
    }
    (a.iter().map(|c| norm_sqr(c).sqrt()).collect(), v)
}

fn min_pair_square(cols: Vec<Vec<C64>>) -> (f64, Vec<C64>) {
    let (s, v) = right_singular_system(cols);
    let best = argmin(&s);
    let mut w = v[best].clone();
    apply_phase_convention(&mut w);
    (s[best], w)
}

/// Index of the smallest entry, lowest index on ties.
pub(crate) fn argmin(s: &[f64]) -> usize {
    let mut best = 0;
    for (j, x) in s.iter().enumerate() {
        if *x < s[best] {
            best = j;
        }
    }
    best
}

/// Rotates `w` so its largest-magnitude entry (lowest index on ties) is
/// real and positive.
pub fn apply_phase_convention(w: &mut [C64]) {
    let mut k = 0;
    let mut big = -1.0;
    for (i, z) in w.iter().enumerate() {
        let a = z.norm();
        if a > big {
            big = a;
            k = i;
        }
    }
    if big <= 0.0 {
        return;
    }
    let phase = w[k].conj() / big;
    w.iter_mut().for_each(|z| *z *= phase);
    w[k] = C64::new(w[k].re, 0.0);
}

/// Upper-triangular `R` (as columns of length `n`) from a Householder QR of
/// the tall matrix `a` (`rows >= cols = n`).
pub(crate) fn triangular_factor(a: &CMatrix) -> Vec<Vec<C64>> {
    let n = a.cols();
    let mut w = a.clone();
    for k in 0..n {
        let (beta, h) = Reflector::annihilate(k, &w.col(k)[k..]);
        w.col_mut(k)[k] = beta;
        for j in k + 1..n {
            h.apply_adjoint(w.col_mut(j));
        }
    }
    (0..n)
        .map(|j| (0..n).map(|i| if i <= j { w[(i, j)] } else { ZERO }).collect())
        .collect()
}

/// One-sided Hestenes Jacobi. Returns the orthogonalized columns `A V` and
/// the columns of `V`.
fn jacobi(mut a: Vec<Vec<C64>>) -> (Vec<Vec<C64>>, Vec<Vec<C64>>) {
    let n = a.len();
    let mut v: Vec<Vec<C64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { ONE } else { ZERO }).collect())
        .collect();
    let mut norms: Vec<f64> = a.iter().map(|c| norm_sqr(c)).collect();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = norms[p];
                let beta = norms[q];
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let g = dotc(&a[p], &a[q]);
                let ga = g.norm();
                if ga <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let e = g / ga;
                let zeta = (beta - alpha) / (2.0 * ga);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut a, p, q, c, s, e);
                rotate(&mut v, p, q, c, s, e);
                norms[p] = norm_sqr(&a[p]);
                norms[q] = norm_sqr(&a[q]);
            }
        }
        if !rotated {
            break;
        }
    }
    (a, v)
}

#[inline]
fn rotate(x: &mut [Vec<C64>], p: usize, q: usize, c: f64, s: f64, e: C64) {
    let ec = e.conj();
    let (lo, hi) = x.split_at_mut(q);
    let xp = &mut lo[p];
    let xq = &mut hi[0];
    for (ap, aq) in xp.iter_mut().zip(xq.iter_mut()) {
        let bq = *aq * ec;
        let np = *ap * c - bq * s;
        let nq = *ap * s + bq * c;
        *ap = np;
        *aq = nq;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_column_gives_one() {
        let l = CMatrix::from_fn(4, 1, |i, _| C64::new(i as f64 + 1.0, -1.0));
        let w = min_right_singular_vector(&l).unwrap();
        assert_eq!(w.len(), 1);
        assert!((w[0] - ONE).norm() < 1e-15);
    }

    #[test]
    fn zero_columns_rejected() {
        assert!(min_right_singular_vector(&CMatrix::zeros(3, 0)).is_err());
    }

    #[test]
    fn rank_deficient_gives_null_vector() {
        // columns 0 and 2 are equal, so (1, 0, -1)/sqrt2 spans the kernel
        let l = CMatrix::from_fn(5, 3, |i, j| {
            let k = if j == 2 { 0 } else { j };
            C64::new((i * (k + 1)) as f64, (i + k) as f64 * 0.25)
        });
        let (s, w) = min_singular_pair(&l).unwrap();
        assert!(s < 1e-13);
        assert!(w[1].norm() < 1e-12);
        assert!((w[0] + w[2]).norm() < 1e-12);
    }

    #[test]
    fn singular_values_of_diagonal() {
        let mut d = CMatrix::zeros(3, 3);
        d[(0, 0)] = C64::new(0.0, 2.0);
        d[(1, 1)] = C64::new(-5.0, 0.0);
        d[(2, 2)] = C64::new(1.0, 0.0);
        let s = singular_values(&d);
        assert!((s[0] - 5.0).abs() < 1e-14 && (s[1] - 2.0).abs() < 1e-14 && (s[2] - 1.0).abs() < 1e-14);
    }
}
