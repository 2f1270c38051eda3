//! Points, densities and Jacobians.
//!
//! Every density in this crate is measured against Lebesgue measure on
//! `C^d = R^{2d}`, i.e. against `dx_1 dy_1 ... dx_d dy_d`. Under this
//! convention the Poincaré form of `B^d_r` has density `r^{-2d}` at the
//! origin. The alternative reading of `dz ∧ dz̄` as a plain wedge
//! (`|dz ∧ dz̄| = 2 dx dy`) multiplies every degree-`d` density by `2^d`;
//! [`DensityConvention`] exists so that the two readings can be compared.

mod quadrature;

use std::ops::Index;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use quadrature::{
    integrate_complex, integrate_density, Cubature, Integral, QuadratureConfig, Region, StarWedge,
};

/// A point of `C^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexPoint(Vec<Complex64>);

impl ComplexPoint {
    pub fn new(coords: Vec<Complex64>) -> Self {
        Self(coords)
    }

    pub fn origin(dim: usize) -> Self {
        Self(vec![Complex64::new(0.0, 0.0); dim])
    }

    /// Point with the given real coordinates and zero imaginary parts.
    pub fn real(coords: &[f64]) -> Self {
        Self(coords.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    /// Builds a point from `2n` real coordinates `(x_1, y_1, ..., x_n, y_n)`.
    pub fn from_real_parts(xy: &[f64]) -> Self {
        debug_assert!(xy.len() % 2 == 0);
        Self(xy.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect())
    }

    /// Interleaved real coordinates `(x_1, y_1, ..., x_n, y_n)`.
    pub fn to_real_parts(&self) -> Vec<f64> {
        self.0.iter().flat_map(|z| [z.re, z.im]).collect()
    }

    pub fn from_dvector(v: &DVector<Complex64>) -> Self {
        Self(v.iter().copied().collect())
    }

    pub fn to_dvector(&self) -> DVector<Complex64> {
        DVector::from_column_slice(&self.0)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[Complex64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<Complex64> {
        self.0
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.iter().map(|z| z * s).collect())
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.sub(other).norm()
    }

    /// Hermitian inner product `Σ a_i conj(b_i)`.
    pub fn inner(&self, other: &Self) -> Complex64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b.conj()).sum()
    }

    /// Coordinates `[start, start + len)` as a new point.
    pub fn block(&self, start: usize, len: usize) -> Self {
        Self(self.0[start..start + len].to_vec())
    }

    pub fn concat(parts: &[ComplexPoint]) -> Self {
        Self(parts.iter().flat_map(|p| p.0.iter().copied()).collect())
    }

    pub(crate) fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: self.dim(),
            });
        }
        Ok(())
    }
}

impl Index<usize> for ComplexPoint {
    type Output = Complex64;

    fn index(&self, i: usize) -> &Complex64 {
        &self.0[i]
    }
}

impl From<Vec<Complex64>> for ComplexPoint {
    fn from(v: Vec<Complex64>) -> Self {
        Self(v)
    }
}

/// Density of a degree-`dim` volume form against Lebesgue measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeDensity {
    value: f64,
    dim: usize,
}

impl VolumeDensity {
    /// Panics if `value` is negative or not finite; densities are
    /// nonnegative by construction everywhere in the crate.
    pub fn new(value: f64, dim: usize) -> Self {
        assert!(
            value.is_finite() && value >= 0.0,
            "volume density must be finite and nonnegative, got {value}"
        );
        Self { value, dim }
    }

    pub fn try_new(value: f64, dim: usize) -> Result<Self> {
        if value.is_finite() && value >= 0.0 {
            Ok(Self { value, dim })
        } else {
            Err(Error::InvalidCandidate(format!(
                "density {value} is not finite and nonnegative"
            )))
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self { value: 0.0, dim }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(self.value * factor, self.dim)
    }

    /// Product of densities; degrees add (wedge of forms on disjoint factors).
    pub fn wedge(&self, other: &Self) -> Self {
        Self::new(self.value * other.value, self.dim + other.dim)
    }

    /// The value this density takes under `convention`.
    pub fn in_convention(&self, convention: DensityConvention) -> f64 {
        self.value * convention.factor(self.dim)
    }
}

/// How `dz ∧ dz̄` wedges are turned into Lebesgue densities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityConvention {
    /// `(i/2) dz ∧ dz̄ = dx ∧ dy`; the convention used throughout the crate.
    Lebesgue,
    /// `|dz ∧ dz̄| = 2 dx ∧ dy`, so a degree-`d` density picks up `2^d`.
    WedgeScaled,
}

impl DensityConvention {
    pub fn factor(&self, dim: usize) -> f64 {
        match self {
            Self::Lebesgue => 1.0,
            Self::WedgeScaled => 2f64.powi(dim as i32),
        }
    }
}

/// Matrix of holomorphic partials `∂f_i/∂z_j` (rows index the components of `f`).
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianMatrix(DMatrix<Complex64>);

impl JacobianMatrix {
    pub fn new(entries: DMatrix<Complex64>) -> Self {
        Self(entries)
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        Self(DMatrix::from_fn(r, c, |i, j| Complex64::new(rows[i][j], 0.0)))
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.0
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Chain rule: `self` evaluated at `f(z)` times `inner` evaluated at `z`.
    pub fn compose(&self, inner: &JacobianMatrix) -> Result<JacobianMatrix> {
        if self.cols() != inner.rows() {
            return Err(Error::DimensionMismatch {
                expected: self.cols(),
                found: inner.rows(),
            });
        }
        Ok(Self(&self.0 * &inner.0))
    }
}

/// `|det J|^2` as a density of degree `d` for a square `d×d` Jacobian.
pub fn jacobian_determinant_squared(jac: &JacobianMatrix) -> Result<VolumeDensity> {
    if jac.rows() != jac.cols() {
        return Err(Error::NotSquare {
            rows: jac.rows(),
            cols: jac.cols(),
        });
    }
    let det = jac.matrix().clone().determinant();
    Ok(VolumeDensity::new(det.norm_sqr(), jac.rows()))
}

/// `det(J^* J)` for a `n×d` Jacobian; equals `|det J|^2` when `J` is square.
pub fn gram_determinant(jac: &DMatrix<Complex64>) -> f64 {
    let gram = jac.adjoint() * jac;
    gram.determinant().re.max(0.0)
}

/// Ratio `num / den` of two densities of the same degree.
pub fn density_ratio(num: &VolumeDensity, den: &VolumeDensity) -> Result<f64> {
    if num.dim != den.dim {
        return Err(Error::DegreeMismatch(num.dim, den.dim));
    }
    if den.value <= 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok(num.value / den.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identity_has_unit_density() {
        let d = jacobian_determinant_squared(&JacobianMatrix::identity(1)).unwrap();
        assert_eq!(d.value(), 1.0);
        assert_eq!(d.dim(), 1);
    }

    #[test]
    fn diagonal_scaling_density() {
        let b: f64 = 1.7;
        for n in 1..=4 {
            let m = DMatrix::from_diagonal_element(n, n, c(1.0 / b, 0.0));
            let d = jacobian_determinant_squared(&JacobianMatrix::new(m)).unwrap();
            assert_relative_eq!(d.value(), b.powi(-2 * n as i32), max_relative = 1e-14);
        }
    }

    #[test]
    fn unipotent_matrix_has_unit_density() {
        let j = JacobianMatrix::from_real_rows(&[&[1.0, 1.0], &[0.0, 1.0]]);
        assert_relative_eq!(
            jacobian_determinant_squared(&j).unwrap().value(),
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn non_square_is_rejected() {
        let j = JacobianMatrix::from_real_rows(&[&[1.0, 0.0]]);
        assert!(matches!(
            jacobian_determinant_squared(&j),
            Err(Error::NotSquare { rows: 1, cols: 2 })
        ));
    }

    #[test]
    fn ratio_examples() {
        let two = VolumeDensity::new(2.0, 1);
        let one = VolumeDensity::new(1.0, 1);
        assert_eq!(density_ratio(&two, &one).unwrap(), 2.0);
        assert_eq!(density_ratio(&one, &one).unwrap(), 1.0);
        assert_eq!(
            density_ratio(&one, &VolumeDensity::zero(1)),
            Err(Error::ZeroDenominator)
        );
        assert!(matches!(
            density_ratio(&one, &VolumeDensity::new(1.0, 2)),
            Err(Error::DegreeMismatch(1, 2))
        ));
    }

    #[test]
    fn pullback_ratio_of_square_map() {
        // f(z) = z^2 at z = 1/2: |f'|^2 μ(f(z)) / μ(z) = 4|z|^2 (1-|z|^2)^2 / (1-|z|^4)^2
        let z: f64 = 0.5;
        let mu = |t: f64| 1.0 / (1.0 - t * t).powi(2);
        let pulled = VolumeDensity::new(4.0 * z * z * mu(z * z), 1);
        let base = VolumeDensity::new(mu(z), 1);
        let expected = 4.0 * z * z / (1.0 + z * z).powi(2);
        assert_relative_eq!(
            density_ratio(&pulled, &base).unwrap(),
            expected,
            max_relative = 1e-14
        );
        assert_relative_eq!(expected, 0.64, epsilon = 1e-14);
    }

    #[test]
    fn gram_determinant_matches_square_case() {
        let m = DMatrix::from_row_slice(2, 2, &[c(1.0, 2.0), c(0.5, 0.0), c(0.0, -1.0), c(3.0, 0.5)]);
        let sq = jacobian_determinant_squared(&JacobianMatrix::new(m.clone()))
            .unwrap()
            .value();
        assert_relative_eq!(gram_determinant(&m), sq, max_relative = 1e-12);
    }

    #[test]
    fn convention_factor() {
        let d = VolumeDensity::new(3.0, 2);
        assert_eq!(d.in_convention(DensityConvention::Lebesgue), 3.0);
        assert_eq!(d.in_convention(DensityConvention::WedgeScaled), 12.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn entry() -> impl Strategy<Value = Complex64> {
            (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(a, b)| Complex64::new(a, b))
        }

        fn square(n: usize) -> impl Strategy<Value = DMatrix<Complex64>> {
            proptest::collection::vec(entry(), n * n)
                .prop_map(move |v| DMatrix::from_row_slice(n, n, &v))
        }

        proptest! {
            #[test]
            fn determinant_density_is_multiplicative(a in square(3), b in square(3)) {
                let da = jacobian_determinant_squared(&JacobianMatrix::new(a.clone())).unwrap().value();
                let db = jacobian_determinant_squared(&JacobianMatrix::new(b.clone())).unwrap().value();
                let dab = jacobian_determinant_squared(&JacobianMatrix::new(&a * &b)).unwrap().value();
                prop_assert!((dab - da * db).abs() <= 1e-9 * (1.0 + da * db));
            }

            #[test]
            fn ratios_chain(a in 1e-3..1e3f64, b in 1e-3..1e3f64, c in 1e-3..1e3f64) {
                let (a, b, c) = (VolumeDensity::new(a, 2), VolumeDensity::new(b, 2), VolumeDensity::new(c, 2));
                let lhs = density_ratio(&a, &b).unwrap() * density_ratio(&b, &c).unwrap();
                let rhs = density_ratio(&a, &c).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs);
            }
        }
    }
}
