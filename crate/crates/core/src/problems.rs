//! Seeded split-form test problems `F(z) = Σ g_ℓ(z) A_ℓ`.
//!
//! The coefficient matrices are random stand-ins with the right structure;
//! the scalar factors carry the difficulty. A `d × d` coefficient matrix is
//! flattened column-major and truncated to `N` entries, `d = ⌈√N⌉`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::barycentric::{Axis, SampleGrid};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};

/// A closed-form scalar function of the sample variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScalarFactor {
    One,
    Z,
    Z2,
    /// `(G₀ + (zτ)^p G∞) / (1 + (zτ)^p)`
    Shear {
        g0: f64,
        g_inf: f64,
        tau: f64,
        p: f64,
    },
    /// `z² λ_P² / (z² + γ z + λ₀²)`
    Lorentz {
        lambda_p: f64,
        lambda_0: f64,
        gamma: f64,
    },
    /// `exp(i √(m (z - a)))`, principal root
    Branch {
        a: f64,
        mass: f64,
    },
    /// `exp(-τ z)`
    Delay {
        tau: f64,
    },
    /// `1 / (z - p)`
    Pole {
        re: f64,
        im: f64,
    },
    Exp,
    /// `1 / (1 + 25 z²)`
    Runge,
}

impl ScalarFactor {
    pub fn eval(&self, z: C64) -> C64 {
        let one = C64::new(1.0, 0.0);
        match *self {
            ScalarFactor::One => one,
            ScalarFactor::Z => z,
            ScalarFactor::Z2 => z * z,
            ScalarFactor::Shear { g0, g_inf, tau, p } => {
                let q = (z * tau).powf(p);
                (q * g_inf + g0) / (q + 1.0)
            }
            ScalarFactor::Lorentz {
                lambda_p,
                lambda_0,
                gamma,
            } => z * z * (lambda_p * lambda_p) / (z * z + z * gamma + lambda_0 * lambda_0),
            ScalarFactor::Branch { a, mass } => (C64::i() * ((z - a) * mass).sqrt()).exp(),
            ScalarFactor::Delay { tau } => (-z * tau).exp(),
            ScalarFactor::Pole { re, im } => one / (z - C64::new(re, im)),
            ScalarFactor::Exp => z.exp(),
            ScalarFactor::Runge => one / (z * z * 25.0 + 1.0),
        }
    }
}

/// Segment grid parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub a: f64,
    pub b: f64,
    pub count: usize,
    pub axis: Axis,
}

impl GridSpec {
    pub fn build(&self) -> Result<SampleGrid> {
        SampleGrid::segment(self.a, self.b, self.count, self.axis)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemName {
    Beam,
    Photonic,
    Schrodinger,
    Delay,
    Exp,
    Runge,
    PlantedRational,
}

impl ProblemName {
    pub const SPLIT_FORM: [ProblemName; 4] = [
        ProblemName::Beam,
        ProblemName::Photonic,
        ProblemName::Schrodinger,
        ProblemName::Delay,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ProblemName::Beam => "beam",
            ProblemName::Photonic => "photonic",
            ProblemName::Schrodinger => "schrodinger",
            ProblemName::Delay => "delay",
            ProblemName::Exp => "exp",
            ProblemName::Runge => "runge",
            ProblemName::PlantedRational => "planted-rational",
        }
    }
}

impl std::str::FromStr for ProblemName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "beam" => ProblemName::Beam,
            "photonic" => ProblemName::Photonic,
            "schrodinger" => ProblemName::Schrodinger,
            "delay" => ProblemName::Delay,
            "exp" => ProblemName::Exp,
            "runge" => ProblemName::Runge,
            "planted-rational" | "planted" => ProblemName::PlantedRational,
            o => return Err(Error::Parameter(format!("unknown problem `{o}`"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitFormProblem {
    pub name: ProblemName,
    pub n: usize,
    pub seed: u64,
    pub scalar_factors: Vec<ScalarFactor>,
    /// One length-`n` vector per factor.
    pub coefficient_vectors: Vec<Vec<C64>>,
    pub grid_spec: GridSpec,
    pub tol_default: f64,
}

impl SplitFormProblem {
    pub fn terms(&self) -> usize {
        self.scalar_factors.len()
    }

    /// `F(z_i, j)` straight from the formula.
    pub fn entry(&self, z: C64, j: usize) -> C64 {
        self.scalar_factors
            .iter()
            .zip(&self.coefficient_vectors)
            .map(|(g, a)| g.eval(z) * a[j])
            .sum()
    }

    /// The grid and `|Z| × N` samples.
    pub fn sample(&self) -> Result<(SampleGrid, CMatrix)> {
        let grid = self.grid_spec.build()?;
        let g = CMatrix::from_fn(grid.len(), self.terms(), |i, l| {
            self.scalar_factors[l].eval(grid.points()[i])
        });
        let a = CMatrix::from_fn(self.terms(), self.n, |l, j| self.coefficient_vectors[l][j]);
        let f = g.matmul(&a)?;
        f.ensure_finite("generated samples")?;
        Ok((grid, f))
    }

    pub fn with_grid(mut self, spec: GridSpec) -> Self {
        self.grid_spec = spec;
        self
    }
}

/// Dispatches to the named generator with its default grid.
pub fn generate(name: ProblemName, n: usize, seed: u64) -> Result<SplitFormProblem> {
    match name {
        ProblemName::Beam => gen_beam(n, seed),
        ProblemName::Photonic => gen_photonic(n, seed),
        ProblemName::Schrodinger => gen_schrodinger(n, seed),
        ProblemName::Delay => gen_delay(n, seed),
        ProblemName::Exp | ProblemName::Runge | ProblemName::PlantedRational => gen_scalar(name, None, seed),
    }
}

fn rng(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn side(n: usize) -> usize {
    (n as f64).sqrt().ceil() as usize
}

fn check_n(n: usize, min: usize) -> Result<()> {
    if n < min {
        return Err(Error::Parameter(format!("dimension must be at least {min}, got {n}")));
    }
    Ok(())
}

/// Column-major flattening of a `d × d` matrix, truncated to `n` entries.
fn flatten(d: usize, n: usize, entry: impl Fn(usize, usize) -> f64) -> Vec<C64> {
    (0..n).map(|k| C64::new(entry(k % d, k / d), 0.0)).collect()
}

/// Symmetric diagonally dominant tridiagonal matrix (so positive semidefinite).
fn sym_tridiagonal(d: usize, n: usize, r: &mut ChaCha8Rng) -> Vec<C64> {
    let off: Vec<f64> = (0..d).map(|_| r.random_range(0.1..1.0)).collect();
    let diag: Vec<f64> = (0..d)
        .map(|i| {
            let left = if i > 0 { off[i - 1] } else { 0.0 };
            left + off[i] + r.random_range(0.0..1.0)
        })
        .collect();
    flatten(d, n, |i, j| match i.abs_diff(j) {
        0 => diag[i],
        1 => -off[i.min(j)],
        _ => 0.0,
    })
}

fn gaussian(r: &mut ChaCha8Rng) -> f64 {
    r.sample(StandardNormal)
}

/// Sandwich beam with a fractional-derivative shear modulus.
pub fn gen_beam(n: usize, seed: u64) -> Result<SplitFormProblem> {
    check_n(n, 2)?;
    let d = side(n);
    let mut r = rng(seed, 1);
    let k = sym_tridiagonal(d, n, &mut r);
    let dm = sym_tridiagonal(d, n, &mut r);
    let m = sym_tridiagonal(d, n, &mut r);
    Ok(SplitFormProblem {
        name: ProblemName::Beam,
        n,
        seed,
        scalar_factors: vec![
            ScalarFactor::One,
            ScalarFactor::Shear {
                g0: 350.4e3,
                g_inf: 3.062e6,
                tau: 8.230e-9,
                p: 0.675,
            },
            ScalarFactor::Z2,
        ],
        coefficient_vectors: vec![k, dm, m],
        grid_spec: GridSpec {
            a: 200.0,
            b: 30000.0,
            count: 1000,
            axis: Axis::Imag,
        },
        tol_default: 1e-8,
    })
}

/// Photonic crystal with an `L = 2` Lorentz permittivity model.
pub fn gen_photonic(n: usize, seed: u64) -> Result<SplitFormProblem> {
    check_n(n, 2)?;
    const L: usize = 2;
    const MARGIN: f64 = 1e-2;
    let d = side(n);
    let mut r = rng(seed, 2);
    let g = sym_tridiagonal(d, n, &mut r);
    let m0 = sym_tridiagonal(d, n, &mut r);
    let m1 = sym_tridiagonal(d, n, &mut r);
    let gamma = r.random_range(0.1..1.0);
    let c = r.random_range(1.0..3.0);
    let mut poles = Vec::with_capacity(L);
    for _ in 0..L {
        let mut tries = 0;
        let (lp, l0) = loop {
            let lp: f64 = r.random_range(1.0..10.0);
            let l0: f64 = r.random_range(1.0..10.0);
            // roots of z² + γz + λ₀² sit at real part -γ/2 when complex
            let disc = gamma * gamma - 4.0 * l0 * l0;
            let dist = if disc < 0.0 {
                gamma / 2.0
            } else {
                0.5 * (gamma - disc.sqrt())
            };
            if dist > MARGIN {
                break (lp, l0);
            }
            tries += 1;
            if tries == 32 {
                return Err(Error::Exhausted(
                    "could not place permittivity poles off the segment".into(),
                ));
            }
        };
        poles.push((lp, l0));
    }
    let mut factors = vec![ScalarFactor::One, ScalarFactor::Z2];
    let mut coeffs = vec![g, m0.iter().zip(&m1).map(|(a, b)| a + b * c).collect()];
    for (lp, l0) in poles {
        factors.push(ScalarFactor::Lorentz {
            lambda_p: lp,
            lambda_0: l0,
            gamma,
        });
        coeffs.push(m1.clone());
    }
    Ok(SplitFormProblem {
        name: ProblemName::Photonic,
        n,
        seed,
        scalar_factors: factors,
        coefficient_vectors: coeffs,
        grid_spec: GridSpec {
            a: 0.0,
            b: 10.0,
            count: 1000,
            axis: Axis::Imag,
        },
        tol_default: 1e-8,
    })
}

/// Branch points of the Schrödinger problem: 71 spread over `[-8, -1]`,
/// 10 crowding the left end of the grid segment `[0, 4]`.
pub fn schrodinger_branch_points() -> Vec<f64> {
    let far = (0..71).map(|k| -8.0 + 7.0 * k as f64 / 70.0);
    let near = (0..10).map(|k| -0.5 + 0.45 * k as f64 / 9.0);
    far.chain(near).collect()
}

/// Canyon-well Schrödinger problem with 81 rank-2 boundary terms.
pub fn gen_schrodinger(n: usize, seed: u64) -> Result<SplitFormProblem> {
    check_n(n, 2)?;
    const MASS: f64 = 0.2;
    let d = side(n);
    let mut r = rng(seed, 3);
    let h = sym_tridiagonal(d, n, &mut r);
    let ident = flatten(d, n, |i, j| if i == j { -1.0 } else { 0.0 });
    let mut factors = vec![ScalarFactor::One, ScalarFactor::Z];
    let mut coeffs = vec![h, ident];
    for a in schrodinger_branch_points() {
        let s = rank_two_sparse(d, &mut r);
        factors.push(ScalarFactor::Branch { a, mass: MASS });
        coeffs.push(flatten(d, n, |i, j| -s[i + j * d]));
    }
    Ok(SplitFormProblem {
        name: ProblemName::Schrodinger,
        n,
        seed,
        scalar_factors: factors,
        coefficient_vectors: coeffs,
        grid_spec: GridSpec {
            a: 0.0,
            b: 4.0,
            count: 1000,
            axis: Axis::Real,
        },
        tol_default: 1e-8,
    })
}

/// `u vᵀ + x yᵀ` with three nonzeros per vector (dense `d × d`, column-major).
pub fn rank_two_sparse(d: usize, r: &mut ChaCha8Rng) -> Vec<f64> {
    let sparse = |r: &mut ChaCha8Rng| {
        let mut v = vec![0.0; d];
        for _ in 0..3.min(d) {
            let i = r.random_range(0..d);
            v[i] += gaussian(r);
        }
        v
    };
    let (u, v, x, y) = (sparse(r), sparse(r), sparse(r), sparse(r));
    let mut s = vec![0.0; d * d];
    for j in 0..d {
        for i in 0..d {
            s[i + j * d] = u[i] * v[j] + x[i] * y[j];
        }
    }
    s
}

/// Largest absolute row sum.
pub fn inf_norm(d: usize, a: &[f64]) -> f64 {
    (0..d)
        .map(|i| (0..d).map(|j| a[i + j * d].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Delay system with `L = 20` dense terms, `‖A_ℓ‖_∞ = 10^{ℓ/2}`, `τ_ℓ = ℓ`.
pub fn gen_delay(n: usize, seed: u64) -> Result<SplitFormProblem> {
    check_n(n, 2)?;
    const L: usize = 20;
    let d = side(n);
    let mut r = rng(seed, 4);
    let mut factors = vec![ScalarFactor::Z];
    let mut coeffs = vec![flatten(d, n, |i, j| if i == j { 1.0 } else { 0.0 })];
    for l in 1..=L {
        let mut a: Vec<f64> = (0..d * d).map(|_| gaussian(&mut r)).collect();
        let s = 10f64.powf(l as f64 / 2.0) / inf_norm(d, &a);
        a.iter_mut().for_each(|v| *v *= -s);
        factors.push(ScalarFactor::Delay { tau: l as f64 });
        coeffs.push(flatten(d, n, |i, j| a[i + j * d]));
    }
    Ok(SplitFormProblem {
        name: ProblemName::Delay,
        n,
        seed,
        scalar_factors: factors,
        coefficient_vectors: coeffs,
        grid_spec: GridSpec {
            a: -10.0,
            b: 10.0,
            count: 1000,
            axis: Axis::Imag,
        },
        tol_default: 1e-4,
    })
}

/// Single-column baselines on `[-1, 1]` unless `grid` says otherwise.
///
/// The planted rational is `c₀ + Σ c_k / (z - p_k)` with three poles kept
/// at least 0.3 away from the real axis, so it has type (3, 3).
pub fn gen_scalar(name: ProblemName, grid: Option<GridSpec>, seed: u64) -> Result<SplitFormProblem> {
    let mut r = rng(seed, 5);
    let (factors, coeffs, tol) = match name {
        ProblemName::Exp => (vec![ScalarFactor::Exp], vec![vec![C64::new(1.0, 0.0)]], 1e-13),
        ProblemName::Runge => (vec![ScalarFactor::Runge], vec![vec![C64::new(1.0, 0.0)]], 1e-10),
        ProblemName::PlantedRational => {
            let mut f = vec![ScalarFactor::One];
            let mut c = vec![vec![C64::new(gaussian(&mut r), 0.0)]];
            for _ in 0..3 {
                let re = r.random_range(-1.0..1.0);
                let im = r.random_range(0.3..1.0) * if r.random::<bool>() { 1.0 } else { -1.0 };
                f.push(ScalarFactor::Pole { re, im });
                c.push(vec![C64::new(gaussian(&mut r), gaussian(&mut r))]);
            }
            (f, c, 1e-11)
        }
        other => {
            return Err(Error::Parameter(format!("`{}` is not a scalar problem", other.label())));
        }
    };
    Ok(SplitFormProblem {
        name,
        n: 1,
        seed,
        scalar_factors: factors,
        coefficient_vectors: coeffs,
        grid_spec: grid.unwrap_or(GridSpec {
            a: -1.0,
            b: 1.0,
            count: 1000,
            axis: Axis::Real,
        }),
        tol_default: tol,
    })
}
