//! Dense complex kernels: norms, pivoted Householder QR and a one-sided
//! Jacobi SVD used for the Loewner weight solves.

mod householder;
mod matrix;
mod rrqr;
mod svd;
mod xprec;

use serde::{Deserialize, Serialize};

pub(crate) use matrix::{dotc, norm_sqr};
pub use matrix::{CMatrix, C64, ONE, ZERO};
pub use rrqr::{rrqr, RrqrFactorization};
pub use svd::{apply_phase_convention, min_right_singular_vector, min_singular_pair, singular_values};
pub(crate) use svd::{argmin, right_singular_system, triangular_factor};
pub(crate) use xprec::{recip, CAcc, Cdd};

use crate::error::{Error, Result};

/// Row norm used by the greedy selection and by `‖·‖_{p,∞}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PNorm {
    Two,
    #[default]
    Inf,
}

impl PNorm {
    #[inline]
    pub fn of(self, row: impl IntoIterator<Item = f64>) -> f64 {
        match self {
            PNorm::Two => row.into_iter().map(|a| a * a).sum::<f64>().sqrt(),
            PNorm::Inf => row.into_iter().fold(0.0, f64::max),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PNorm::Two => "2",
            PNorm::Inf => "inf",
        }
    }
}

impl std::str::FromStr for PNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "2" | "two" => Ok(PNorm::Two),
            "inf" | "infinity" => Ok(PNorm::Inf),
            other => Err(Error::Parameter(format!("unknown norm `{other}` (expected 2 or inf)"))),
        }
    }
}

/// Row-wise mixed norm: the largest row `p`-norm of `a`.
///
/// ```
/// use ratbary::linalg::{norm_p_inf, CMatrix, PNorm, C64};
/// let a = CMatrix::from_rows(&[
///     vec![C64::new(3.0, 0.0), C64::new(4.0, 0.0)],
///     vec![C64::new(0.0, 0.0), C64::new(0.0, 0.0)],
/// ]).unwrap();
/// assert_eq!(norm_p_inf(&a, PNorm::Two).unwrap(), 5.0);
/// assert_eq!(norm_p_inf(&a, PNorm::Inf).unwrap(), 4.0);
/// ```
pub fn norm_p_inf(a: &CMatrix, p: PNorm) -> Result<f64> {
    if a.rows() == 0 || a.cols() == 0 {
        return Err(Error::Parameter("norm of an empty matrix".into()));
    }
    a.ensure_finite("matrix")?;
    Ok(row_norms(a, p).into_iter().fold(0.0, f64::max))
}

/// The `p`-norm of every row of `a`.
pub fn row_norms(a: &CMatrix, p: PNorm) -> Vec<f64> {
    let mut acc = vec![0.0; a.rows()];
    for j in 0..a.cols() {
        for (s, z) in acc.iter_mut().zip(a.col(j)) {
            match p {
                PNorm::Two => *s += z.norm_sqr(),
                PNorm::Inf => *s = f64::max(*s, z.norm()),
            }
        }
    }
    if p == PNorm::Two {
        acc.iter_mut().for_each(|s| *s = s.sqrt());
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_inf_norm_is_one() {
        assert_eq!(norm_p_inf(&CMatrix::identity(3), PNorm::Inf).unwrap(), 1.0);
    }

    #[test]
    fn rejects_nan() {
        let mut a = CMatrix::identity(2);
        a[(1, 0)] = C64::new(f64::NAN, 0.0);
        assert!(matches!(norm_p_inf(&a, PNorm::Two), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn parses_norm_names() {
        assert_eq!("inf".parse::<PNorm>().unwrap(), PNorm::Inf);
        assert_eq!("2".parse::<PNorm>().unwrap(), PNorm::Two);
        assert!("1".parse::<PNorm>().is_err());
    }
}
