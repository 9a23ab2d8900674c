use super::matrix::{axpy, dotc, norm2, C64, ONE, ZERO};

/// Elementary reflector `H = I - tau v v^H` with `v[0] = 1`, acting on the
/// rows `start..start + v.len()` of whatever vector it is applied to.
#[derive(Clone, Debug)]
pub(crate) struct Reflector {
    pub start: usize,
    pub v: Vec<C64>,
    pub tau: C64,
}

impl Reflector {
    /// Builds the reflector annihilating `x[1..]` and overwrites `x[0]` with
    /// the resulting diagonal value (`H^H x = beta e_1`).
    ///
    /// When `x[1..]` is already zero the reflector is the identity, so the
    /// returned diagonal may be complex.
    pub fn annihilate(start: usize, x: &[C64]) -> (C64, Reflector) {
        let alpha = x[0];
        let xnorm = norm2(&x[1..]);
        if xnorm == 0.0 {
            return (
                alpha,
                Reflector {
                    start,
                    v: vec![ONE],
                    tau: ZERO,
                },
            );
        }
        let anorm = alpha.norm();
        let mut beta = anorm.hypot(xnorm);
        if alpha.re >= 0.0 {
            beta = -beta;
        }
        let tau = C64::new((beta - alpha.re) / beta, -alpha.im / beta);
        let scal = ONE / (alpha - beta);
        let mut v = Vec::with_capacity(x.len());
        v.push(ONE);
        v.extend(x[1..].iter().map(|z| z * scal));
        (C64::new(beta, 0.0), Reflector { start, v, tau })
    }

    #[cfg(test)]
    pub fn is_identity(&self) -> bool {
        self.tau == ZERO
    }

    /// `y <- H^H y` on the covered rows. Rows of `y` past its end are
    /// treated as zero and are not materialized.
    #[inline]
    pub fn apply_adjoint(&self, y: &mut [C64]) {
        self.apply_with(self.tau.conj(), y);
    }

    /// `y <- H y`.
    #[inline]
    pub fn apply(&self, y: &mut [C64]) {
        self.apply_with(self.tau, y);
    }

    #[inline]
    fn apply_with(&self, t: C64, y: &mut [C64]) {
        if self.tau == ZERO || self.start >= y.len() {
            return;
        }
        let end = (self.start + self.v.len()).min(y.len());
        let seg = &mut y[self.start..end];
        let v = &self.v[..seg.len()];
        let s = dotc(v, seg);
        if s == ZERO {
            return;
        }
        axpy(-t * s, v, seg);
    }
}
