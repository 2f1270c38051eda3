//! Volume densities: Poincaré, Bergman, Kähler–Einstein, and bounds for the
//! Carathéodory and Kobayashi pseudo-volume forms (full and restricted).

mod bergman;
mod extremal;
mod slice;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::domains::DomainModel;
use crate::error::{Error, Result};
use crate::forms::{ComplexPoint, VolumeDensity};
use crate::maps::CandidateMap;
use crate::metrics::ball_metric_matrix;

pub use bergman::{bergman_density_closed, bergman_density_numeric, default_bergman_degree, GRAM_CONDITION_LIMIT};
pub use extremal::{caratheodory_lower, kobayashi_upper};
pub use slice::{restricted_caratheodory_lower, restricted_kobayashi_upper, LinearSlice};

/// What an estimate certifies about the true quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Exact,
    Lower,
    Upper,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Family that produced the reported value.
    pub family: String,
    pub evaluations: usize,
    pub starts: usize,
    /// Error estimate where one is available (quadrature, truncation).
    pub error_estimate: Option<f64>,
    pub notes: Vec<String>,
}

impl Diagnostics {
    pub(crate) fn family(name: &str) -> Self {
        Self {
            family: name.to_string(),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeEstimate {
    pub value: VolumeDensity,
    pub bound_kind: BoundKind,
    pub witness: Option<CandidateMap>,
    pub diagnostics: Diagnostics,
}

impl VolumeEstimate {
    pub fn exact(value: VolumeDensity, family: &str) -> Self {
        Self {
            value,
            bound_kind: BoundKind::Exact,
            witness: None,
            diagnostics: Diagnostics::family(family),
        }
    }

    pub fn density(&self) -> f64 {
        self.value.value()
    }
}

/// Poincaré density `r^2 / (r^2 - |z|^2)^{d+1}` of `B^d_r`.
pub fn poincare_density(d: usize, r: f64, z: &ComplexPoint) -> Result<VolumeDensity> {
    z.check_dim(d)?;
    let gap = r * r - z.norm_sqr();
    if !(gap > 0.0) || !z.is_finite() {
        return Err(Error::OutsideDomain(format!("|z| = {} is not below r = {r}", z.norm())));
    }
    VolumeDensity::try_new(r * r / gap.powi(d as i32 + 1), d)
}

/// Which reading of the Kähler–Einstein volume normalization to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeNormalization {
    /// `v^KE = (n+1)^n μ^n`, from `(∂∂̄ log μ^n)^n = (n+1)^n n! μ^n`.
    Identity,
    /// `v^KE = μ^n`, the rescaling that makes `v^KE ≤ v^K / n!` tight on the disc.
    Rescaled,
}

impl KeNormalization {
    /// `v^KE / μ^n` on a ball of dimension `n`.
    pub fn factor(&self, n: usize) -> f64 {
        match self {
            Self::Identity => ((n + 1) as f64).powi(n as i32),
            Self::Rescaled => 1.0,
        }
    }
}

/// Kähler–Einstein density of `B^d_r`, `(d+1)^d μ^d_r(z)`.
pub fn ke_density_ball(d: usize, r: f64, z: &ComplexPoint) -> Result<VolumeEstimate> {
    ke_density_ball_with(d, r, z, KeNormalization::Identity)
}

pub fn ke_density_ball_with(d: usize, r: f64, z: &ComplexPoint, norm: KeNormalization) -> Result<VolumeEstimate> {
    let mu = poincare_density(d, r, z)?;
    Ok(VolumeEstimate::exact(mu.scaled(norm.factor(d)), "ball-ke"))
}

/// Kähler–Einstein density on a ball or an affine image of a ball.
pub fn ke_density(domain: &DomainModel, p: &ComplexPoint, norm: KeNormalization) -> Result<VolumeEstimate> {
    let (a, b, c, r) = domain
        .as_ball_image()
        .ok_or_else(|| Error::UnsupportedDomain("Kähler–Einstein density is explicit only on balls".into()))?;
    let q = pull_back_point(&a, &b, p)?;
    let base = ke_density_ball_with(domain.dim(), r, &q.sub(&c), norm)?;
    let det = a.determinant().norm_sqr();
    Ok(VolumeEstimate::exact(base.value.scaled(1.0 / det), "ball-ke"))
}

/// Kähler–Einstein metric matrix `g^KE_{ij̄}(p)` (identity reading: `(n+1)·g_ball`)
/// on a ball or an affine image of a ball.
pub fn ke_metric_matrix(domain: &DomainModel, p: &ComplexPoint, norm: KeNormalization) -> Result<DMatrix<Complex64>> {
    let (a, b, c, r) = domain
        .as_ball_image()
        .ok_or_else(|| Error::UnsupportedDomain("Kähler–Einstein metric is explicit only on balls".into()))?;
    let q = pull_back_point(&a, &b, p)?;
    let n = domain.dim();
    let g = ball_metric_matrix(r, &q.sub(&c))?;
    let inv = a.try_inverse().ok_or_else(|| Error::InvalidDomain("singular affine map".into()))?;
    let scale = match norm {
        KeNormalization::Identity => (n + 1) as f64,
        KeNormalization::Rescaled => 1.0,
    };
    // holomorphic pullback of a hermitian form: M^T g conj(M) with M = A^{-1}
    Ok(inv.transpose() * g * inv.conjugate() * Complex64::new(scale, 0.0))
}

fn pull_back_point(a: &DMatrix<Complex64>, b: &nalgebra::DVector<Complex64>, p: &ComplexPoint) -> Result<ComplexPoint> {
    let inv = a
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidDomain("singular affine map".into()))?;
    Ok(ComplexPoint::from_dvector(&(inv * (p.to_dvector() - b))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn poincare_examples() {
        assert_eq!(poincare_density(1, 1.0, &ComplexPoint::origin(1)).unwrap().value(), 1.0);
        assert_relative_eq!(poincare_density(2, 2.0, &ComplexPoint::origin(2)).unwrap().value(), 1.0 / 16.0);
        assert_relative_eq!(
            poincare_density(1, 1.0, &ComplexPoint::real(&[0.5])).unwrap().value(),
            1.0 / 0.5625,
            max_relative = 1e-15
        );
        assert!(poincare_density(1, 1.0, &ComplexPoint::real(&[1.0])).is_err());
        assert!(poincare_density(2, 1.0, &ComplexPoint::origin(1)).is_err());
    }

    #[test]
    fn ke_examples() {
        assert_eq!(ke_density_ball(1, 1.0, &ComplexPoint::origin(1)).unwrap().density(), 2.0);
        assert_eq!(ke_density_ball(2, 1.0, &ComplexPoint::origin(2)).unwrap().density(), 9.0);
        let ball = DomainModel::unit_ball(2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let z = ball.interior_point(0.9, &mut rng);
            let ke = ke_density_ball(2, 1.0, &z).unwrap().density();
            let mu = poincare_density(2, 1.0, &z).unwrap().value();
            assert_relative_eq!(ke / mu, 9.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn ke_on_affine_image_transforms_as_a_density() {
        let a = DMatrix::from_row_slice(1, 1, &[Complex64::new(0.0, 2.0)]);
        let d = DomainModel::affine_image(DomainModel::unit_ball(1), a, nalgebra::DVector::from_vec(vec![Complex64::new(1.0, 0.0)]))
            .unwrap();
        let v = ke_density(&d, &ComplexPoint::real(&[1.0]), KeNormalization::Identity).unwrap();
        assert_relative_eq!(v.density(), 2.0 / 4.0);
        let g = ke_metric_matrix(&d, &ComplexPoint::real(&[1.0]), KeNormalization::Rescaled).unwrap();
        assert_relative_eq!(g[(0, 0)].re, 0.25, max_relative = 1e-15);
    }
}
