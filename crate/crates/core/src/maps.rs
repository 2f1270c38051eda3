//! Holomorphic candidate maps with closed-form values and Jacobians.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{jacobian_determinant_squared, ComplexPoint, JacobianMatrix, VolumeDensity};
use crate::volumes::poincare_density;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// A holomorphic map `C^n → C^d` from a closed family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CandidateMap {
    /// `z ↦ A z + b` with `A` of size `d×n`.
    Affine {
        matrix: DMatrix<Complex64>,
        offset: DVector<Complex64>,
    },
    /// `z ↦ (s_1 z_1, …, s_n z_n)`.
    DiagonalScaling { factors: Vec<Complex64> },
    /// The unit-ball automorphism exchanging `a` and `0`.
    BallAutomorphism { a: ComplexPoint },
    /// Maps applied in list order: `maps[0]` first.
    Composition { maps: Vec<CandidateMap> },
    /// `z ↦ (z_1^{k_1}, …, z_n^{k_n})`.
    PowerMap { exponents: Vec<u32> },
    /// Block-diagonal product acting on consecutive coordinate blocks.
    Product { factors: Vec<CandidateMap> },
}

impl CandidateMap {
    pub fn identity(n: usize) -> Self {
        Self::DiagonalScaling {
            factors: vec![ONE; n],
        }
    }

    pub fn scaling(n: usize, s: f64) -> Self {
        Self::DiagonalScaling {
            factors: vec![Complex64::new(s, 0.0); n],
        }
    }

    pub fn affine(matrix: DMatrix<Complex64>, offset: DVector<Complex64>) -> Result<Self> {
        if matrix.nrows() != offset.len() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                found: offset.len(),
            });
        }
        Ok(Self::Affine { matrix, offset })
    }

    /// `z ↦ (z - c) / s`.
    pub fn recentre(c: &ComplexPoint, s: f64) -> Self {
        let n = c.dim();
        Self::Affine {
            matrix: DMatrix::identity(n, n) / Complex64::new(s, 0.0),
            offset: -c.to_dvector() / Complex64::new(s, 0.0),
        }
    }

    /// `z ↦ c + s z`.
    pub fn place(c: &ComplexPoint, s: f64) -> Self {
        let n = c.dim();
        Self::Affine {
            matrix: DMatrix::identity(n, n) * Complex64::new(s, 0.0),
            offset: c.to_dvector(),
        }
    }

    pub fn constant(value: &ComplexPoint, domain_dim: usize) -> Self {
        Self::Affine {
            matrix: DMatrix::zeros(value.dim(), domain_dim),
            offset: value.to_dvector(),
        }
    }

    pub fn ball_automorphism(a: ComplexPoint) -> Result<Self> {
        if !a.is_finite() || a.norm_sqr() >= 1.0 {
            return Err(Error::OutsideDomain(format!(
                "automorphism parameter must lie in the open unit ball (|a| = {})",
                a.norm()
            )));
        }
        Ok(Self::BallAutomorphism { a })
    }

    pub fn compose(maps: Vec<CandidateMap>) -> Result<Self> {
        for w in maps.windows(2) {
            if w[0].codomain_dim() != w[1].domain_dim() {
                return Err(Error::DimensionMismatch {
                    expected: w[1].domain_dim(),
                    found: w[0].codomain_dim(),
                });
            }
        }
        if maps.is_empty() {
            return Err(Error::InvalidCandidate("empty composition".into()));
        }
        Ok(Self::Composition { maps })
    }

    /// `z ↦ z^k` on `C^1`.
    pub fn power(k: u32) -> Self {
        Self::PowerMap { exponents: vec![k] }
    }

    pub fn domain_dim(&self) -> usize {
        match self {
            Self::Affine { matrix, .. } => matrix.ncols(),
            Self::DiagonalScaling { factors } => factors.len(),
            Self::BallAutomorphism { a } => a.dim(),
            Self::Composition { maps } => maps.first().map_or(0, CandidateMap::domain_dim),
            Self::PowerMap { exponents } => exponents.len(),
            Self::Product { factors } => factors.iter().map(CandidateMap::domain_dim).sum(),
        }
    }

    pub fn codomain_dim(&self) -> usize {
        match self {
            Self::Affine { matrix, .. } => matrix.nrows(),
            Self::Composition { maps } => maps.last().map_or(0, CandidateMap::codomain_dim),
            Self::Product { factors } => factors.iter().map(CandidateMap::codomain_dim).sum(),
            _ => self.domain_dim(),
        }
    }

    pub fn evaluate(&self, z: &ComplexPoint) -> Result<ComplexPoint> {
        z.check_dim(self.domain_dim())?;
        Ok(match self {
            Self::Affine { matrix, offset } => {
                ComplexPoint::from_dvector(&(matrix * z.to_dvector() + offset))
            }
            Self::DiagonalScaling { factors } => {
                ComplexPoint::new(factors.iter().zip(z.coords()).map(|(s, w)| s * w).collect())
            }
            Self::BallAutomorphism { a } => {
                let (l, denom) = automorphism_parts(a, z);
                if denom.norm() == 0.0 {
                    return Err(Error::OutsideDomain("automorphism pole".into()));
                }
                let num = l * z.to_dvector() - a.to_dvector();
                ComplexPoint::from_dvector(&(num / denom))
            }
            Self::Composition { maps } => {
                let mut w = z.clone();
                for m in maps {
                    w = m.evaluate(&w)?;
                }
                w
            }
            Self::PowerMap { exponents } => ComplexPoint::new(
                exponents
                    .iter()
                    .zip(z.coords())
                    .map(|(&k, w)| w.powu(k))
                    .collect(),
            ),
            Self::Product { factors } => {
                let mut start = 0;
                let mut parts = Vec::with_capacity(factors.len());
                for f in factors {
                    let len = f.domain_dim();
                    parts.push(f.evaluate(&z.block(start, len))?);
                    start += len;
                }
                ComplexPoint::concat(&parts)
            }
        })
    }

    pub fn jacobian(&self, z: &ComplexPoint) -> Result<JacobianMatrix> {
        z.check_dim(self.domain_dim())?;
        Ok(match self {
            Self::Affine { matrix, .. } => JacobianMatrix::new(matrix.clone()),
            Self::DiagonalScaling { factors } => {
                JacobianMatrix::new(DMatrix::from_diagonal(&DVector::from_column_slice(factors)))
            }
            Self::BallAutomorphism { a } => {
                // ψ = N/D with N = Lz - a, D = 1 - <z, a>; J = L/D + N a^*/D^2
                let (l, denom) = automorphism_parts(a, z);
                if denom.norm() == 0.0 {
                    return Err(Error::OutsideDomain("automorphism pole".into()));
                }
                let num = &l * z.to_dvector() - a.to_dvector();
                let a_adj = a.to_dvector().adjoint();
                JacobianMatrix::new(l / denom + num * a_adj / (denom * denom))
            }
            Self::Composition { maps } => {
                let mut w = z.clone();
                let mut acc = JacobianMatrix::identity(z.dim());
                for m in maps {
                    let jm = m.jacobian(&w)?;
                    acc = jm.compose(&acc)?;
                    w = m.evaluate(&w)?;
                }
                acc
            }
            Self::PowerMap { exponents } => {
                let diag: Vec<Complex64> = exponents
                    .iter()
                    .zip(z.coords())
                    .map(|(&k, w)| match k {
                        0 => ZERO,
                        _ => w.powu(k - 1) * k as f64,
                    })
                    .collect();
                JacobianMatrix::new(DMatrix::from_diagonal(&DVector::from_vec(diag)))
            }
            Self::Product { factors } => {
                let rows = self.codomain_dim();
                let cols = self.domain_dim();
                let mut m = DMatrix::zeros(rows, cols);
                let (mut r0, mut c0) = (0, 0);
                for f in factors {
                    let (d, n) = (f.codomain_dim(), f.domain_dim());
                    let jf = f.jacobian(&z.block(c0, n))?;
                    m.view_mut((r0, c0), (d, n)).copy_from(jf.matrix());
                    r0 += d;
                    c0 += n;
                }
                JacobianMatrix::new(m)
            }
        })
    }

    /// Draws a holomorphic self-map of the unit ball `B^n_1`: a composition of
    /// automorphisms, unitary rotations, contractions and coordinate powers.
    pub fn random_ball_self_map<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let steps = rng.random_range(1..=3);
        let mut maps = Vec::with_capacity(steps);
        for _ in 0..steps {
            let m = match rng.random_range(0..4) {
                0 => {
                    let a = random_ball_point(n, 0.9, rng);
                    CandidateMap::BallAutomorphism { a }
                }
                1 => CandidateMap::Affine {
                    matrix: random_unitary(n, rng),
                    offset: DVector::zeros(n),
                },
                2 => {
                    let s = rng.random_range(0.05..1.0);
                    let phase = rng.random_range(0.0..std::f64::consts::TAU);
                    CandidateMap::DiagonalScaling {
                        factors: vec![Complex64::from_polar(s, phase); n],
                    }
                }
                _ => CandidateMap::PowerMap {
                    exponents: (0..n).map(|_| rng.random_range(1..=4)).collect(),
                },
            };
            maps.push(m);
        }
        CandidateMap::Composition { maps }
    }
}

fn automorphism_parts(a: &ComplexPoint, z: &ComplexPoint) -> (DMatrix<Complex64>, Complex64) {
    let n = a.dim();
    let a2 = a.norm_sqr();
    let denom = ONE - z.inner(a);
    if a2 == 0.0 {
        return (DMatrix::identity(n, n), denom);
    }
    let s = (1.0 - a2).sqrt();
    let av = a.to_dvector();
    let l = DMatrix::identity(n, n) * Complex64::new(s, 0.0)
        + &av * av.adjoint() * Complex64::new((1.0 - s) / a2, 0.0);
    (l, denom)
}

/// Uniformly random point of `B^n_{radius}`.
pub fn random_ball_point<R: Rng + ?Sized>(n: usize, radius: f64, rng: &mut R) -> ComplexPoint {
    let dir = random_sphere_point(n, rng);
    let t = rng.random::<f64>().powf(1.0 / (2 * n) as f64) * radius;
    dir.scale(t)
}

/// Uniformly random point of the unit sphere in `C^n`.
pub fn random_sphere_point<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexPoint {
    loop {
        let xy: Vec<f64> = (0..2 * n).map(|_| StandardNormal.sample(rng)).collect();
        let p = ComplexPoint::from_real_parts(&xy);
        let norm = p.norm();
        if norm > 1e-12 {
            return p.scale(1.0 / norm);
        }
    }
}

/// Haar-ish random unitary from the QR factorization of a complex Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<Complex64> {
    let g = DMatrix::from_fn(n, n, |_, _| {
        Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
    });
    g.qr().q()
}

/// `μ^d_r(f(z)) · |det Jac f(z)|^2` for a map into `B^d_r`.
pub fn pullback_poincare(f: &CandidateMap, z: &ComplexPoint, r: f64) -> Result<VolumeDensity> {
    let jac = f.jacobian(z)?;
    if jac.rows() != jac.cols() {
        return Err(Error::NotSquare {
            rows: jac.rows(),
            cols: jac.cols(),
        });
    }
    let w = f.evaluate(z)?;
    let mu = poincare_density(w.dim(), r, &w)
        .map_err(|_| Error::InvalidCandidate(format!("image |f(z)| = {} is not inside B_{r}", w.norm())))?;
    Ok(mu.scaled(jacobian_determinant_squared(&jac)?.value()))
}
