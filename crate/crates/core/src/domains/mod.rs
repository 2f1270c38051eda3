//! Model bounded domains: balls, polydisks, products and affine images.

mod grammar;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{ComplexPoint, Region};
use crate::maps::{random_sphere_point, CandidateMap};

pub use grammar::{parse_complex, parse_domain, parse_point};

/// Default number of boundary samples per real boundary dimension for affine images.
pub const DEFAULT_BOUNDARY_RESOLUTION: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainKind {
    Ball { center: ComplexPoint, radius: f64 },
    /// Polydisk centred at the origin.
    Polydisk { radii: Vec<f64> },
    Product { factors: Vec<DomainModel> },
    /// `{ A y + b : y ∈ base }`.
    AffineImage {
        base: Box<DomainModel>,
        matrix: DMatrix<Complex64>,
        offset: DVector<Complex64>,
        inverse: DMatrix<Complex64>,
    },
}

/// A bounded domain in `C^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainModel {
    kind: DomainKind,
    dim: usize,
    boundary_resolution: usize,
}

/// Inner and outer boundary distances from an interior point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryExtremes {
    pub r_x: f64,
    pub big_r_x: f64,
    /// Number of boundary samples used, `None` when the values are exact.
    pub resolution: Option<usize>,
}

impl DomainModel {
    pub fn ball(center: ComplexPoint, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidDomain(format!("ball radius {radius} must be positive")));
        }
        if center.dim() == 0 || !center.is_finite() {
            return Err(Error::InvalidDomain("ball centre must be a finite point of C^n, n >= 1".into()));
        }
        let dim = center.dim();
        Ok(Self::from_kind(DomainKind::Ball { center, radius }, dim))
    }

    pub fn unit_ball(n: usize) -> Self {
        Self::ball(ComplexPoint::origin(n), 1.0).expect("unit ball")
    }

    pub fn polydisk(radii: Vec<f64>) -> Result<Self> {
        if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::InvalidDomain(format!("polydisk radii {radii:?} must be positive")));
        }
        let dim = radii.len();
        Ok(Self::from_kind(DomainKind::Polydisk { radii }, dim))
    }

    pub fn product(factors: Vec<DomainModel>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidDomain("product needs at least one factor".into()));
        }
        let dim = factors.iter().map(|f| f.dim).sum();
        Ok(Self::from_kind(DomainKind::Product { factors }, dim))
    }

    pub fn affine_image(base: DomainModel, matrix: DMatrix<Complex64>, offset: DVector<Complex64>) -> Result<Self> {
        let n = base.dim;
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::NotSquare {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
            });
        }
        if offset.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: offset.len(),
            });
        }
        let det = matrix.clone().determinant();
        let inverse = matrix
            .clone()
            .try_inverse()
            .filter(|_| det.norm() > 1e-300)
            .ok_or_else(|| Error::InvalidDomain("affine map is not invertible".into()))?;
        Ok(Self::from_kind(
            DomainKind::AffineImage {
                base: Box::new(base),
                matrix,
                offset,
                inverse,
            },
            n,
        ))
    }

    fn from_kind(kind: DomainKind, dim: usize) -> Self {
        Self {
            kind,
            dim,
            boundary_resolution: DEFAULT_BOUNDARY_RESOLUTION,
        }
    }

    /// Sets the boundary sampling resolution used by affine images.
    pub fn with_boundary_resolution(mut self, per_dimension: usize) -> Self {
        self.boundary_resolution = per_dimension.max(1);
        if let DomainKind::AffineImage { base, .. } = &mut self.kind {
            **base = base.as_ref().clone().with_boundary_resolution(per_dimension);
        }
        if let DomainKind::Product { factors } = &mut self.kind {
            for f in factors.iter_mut() {
                *f = f.clone().with_boundary_resolution(per_dimension);
            }
        }
        self
    }

    pub fn kind(&self) -> &DomainKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn boundary_resolution(&self) -> usize {
        self.boundary_resolution
    }

    /// Whether boundary distances are known in closed form.
    pub fn is_analytic(&self) -> bool {
        match &self.kind {
            DomainKind::Ball { .. } | DomainKind::Polydisk { .. } => true,
            DomainKind::Product { factors } => factors.iter().all(DomainModel::is_analytic),
            DomainKind::AffineImage { .. } => false,
        }
    }

    /// Centre and radius when the domain is a Euclidean ball.
    pub fn as_ball(&self) -> Option<(&ComplexPoint, f64)> {
        match &self.kind {
            DomainKind::Ball { center, radius } => Some((center, *radius)),
            _ => None,
        }
    }

    /// For a ball or an affine image of a ball: `(A, b, ball centre, ball radius)`
    /// with the domain equal to `A·B(c, r) + b`.
    pub fn as_ball_image(&self) -> Option<(DMatrix<Complex64>, DVector<Complex64>, ComplexPoint, f64)> {
        match &self.kind {
            DomainKind::Ball { center, radius } => Some((
                DMatrix::identity(self.dim, self.dim),
                DVector::zeros(self.dim),
                center.clone(),
                *radius,
            )),
            DomainKind::AffineImage {
                base, matrix, offset, ..
            } => {
                let (a, b, c, r) = base.as_ball_image()?;
                Some((matrix * a, matrix * b + offset, c, r))
            }
            _ => None,
        }
    }

    /// A distinguished interior point (centre of symmetry for the model kinds).
    pub fn center(&self) -> ComplexPoint {
        match &self.kind {
            DomainKind::Ball { center, .. } => center.clone(),
            DomainKind::Polydisk { radii } => ComplexPoint::origin(radii.len()),
            DomainKind::Product { factors } => {
                ComplexPoint::concat(&factors.iter().map(DomainModel::center).collect::<Vec<_>>())
            }
            DomainKind::AffineImage {
                base, matrix, offset, ..
            } => ComplexPoint::from_dvector(&(matrix * base.center().to_dvector() + offset)),
        }
    }

    pub fn contains(&self, p: &ComplexPoint) -> Result<bool> {
        p.check_dim(self.dim)?;
        Ok(self.contains_unchecked(p))
    }

    fn contains_unchecked(&self, p: &ComplexPoint) -> bool {
        if !p.is_finite() {
            return false;
        }
        match &self.kind {
            DomainKind::Ball { center, radius } => p.distance(center) < *radius,
            DomainKind::Polydisk { radii } => p.coords().iter().zip(radii).all(|(z, r)| z.norm() < *r),
            DomainKind::Product { factors } => {
                let mut start = 0;
                factors.iter().all(|f| {
                    let inside = f.contains_unchecked(&p.block(start, f.dim));
                    start += f.dim;
                    inside
                })
            }
            DomainKind::AffineImage {
                base, offset, inverse, ..
            } => base.contains_unchecked(&ComplexPoint::from_dvector(&(inverse * (p.to_dvector() - offset)))),
        }
    }

    /// Inradius `r_x` and circumradius `R_x` of the domain seen from `x`.
    pub fn boundary_extremes(&self, x: &ComplexPoint) -> Result<BoundaryExtremes> {
        if !self.contains(x)? {
            return Err(Error::OutsideDomain(format!("{x:?}")));
        }
        if self.is_analytic() {
            return Ok(BoundaryExtremes {
                r_x: self.inradius_analytic(x),
                big_r_x: self.max_distance(x),
                resolution: None,
            });
        }
        let samples = self.boundary_sample_count();
        let pts = self.boundary_samples(samples, 0xb0da);
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for y in &pts {
            let d = x.distance(y);
            lo = lo.min(d);
            hi = hi.max(d);
        }
        Ok(BoundaryExtremes {
            r_x: lo,
            big_r_x: hi,
            resolution: Some(samples),
        })
    }

    fn boundary_sample_count(&self) -> usize {
        self.boundary_resolution * (2 * self.dim - 1)
    }

    fn inradius_analytic(&self, x: &ComplexPoint) -> f64 {
        match &self.kind {
            DomainKind::Ball { center, radius } => radius - x.distance(center),
            DomainKind::Polydisk { radii } => x
                .coords()
                .iter()
                .zip(radii)
                .map(|(z, r)| r - z.norm())
                .fold(f64::INFINITY, f64::min),
            DomainKind::Product { factors } => {
                let mut start = 0;
                factors
                    .iter()
                    .map(|f| {
                        let v = f.inradius_analytic(&x.block(start, f.dim));
                        start += f.dim;
                        v
                    })
                    .fold(f64::INFINITY, f64::min)
            }
            DomainKind::AffineImage { .. } => unreachable!("affine images are not analytic"),
        }
    }

    /// Euclidean distance from `x` to the boundary for interior `x`, zero outside.
    /// Exact for analytic kinds, sampled for affine images.
    pub fn inradius(&self, x: &ComplexPoint) -> f64 {
        if !self.contains_unchecked(x) {
            return 0.0;
        }
        if self.is_analytic() {
            self.inradius_analytic(x)
        } else {
            self.boundary_extremes(x).map_or(0.0, |e| e.r_x)
        }
    }

    /// `sup_{y ∈ D} |x - y|` for any `x` in `C^n`. Exact for analytic kinds,
    /// sampled (hence possibly low) for affine images.
    pub fn max_distance(&self, x: &ComplexPoint) -> f64 {
        match &self.kind {
            DomainKind::Ball { center, radius } => radius + x.distance(center),
            DomainKind::Polydisk { radii } => x
                .coords()
                .iter()
                .zip(radii)
                .map(|(z, r)| (r + z.norm()).powi(2))
                .sum::<f64>()
                .sqrt(),
            DomainKind::Product { factors } => {
                let mut start = 0;
                factors
                    .iter()
                    .map(|f| {
                        let v = f.max_distance(&x.block(start, f.dim));
                        start += f.dim;
                        v * v
                    })
                    .sum::<f64>()
                    .sqrt()
            }
            DomainKind::AffineImage { .. } => self
                .boundary_samples(self.boundary_sample_count(), 0xb0da)
                .iter()
                .map(|y| x.distance(y))
                .fold(0.0, f64::max),
        }
    }

    /// Real bounding box `(lower, upper)` in interleaved coordinates.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match &self.kind {
            DomainKind::Ball { center, radius } => {
                let c = center.to_real_parts();
                (c.iter().map(|v| v - radius).collect(), c.iter().map(|v| v + radius).collect())
            }
            DomainKind::Polydisk { radii } => (
                radii.iter().flat_map(|r| [-r, -r]).collect(),
                radii.iter().flat_map(|r| [*r, *r]).collect(),
            ),
            DomainKind::Product { factors } => {
                let mut lo = Vec::new();
                let mut hi = Vec::new();
                for f in factors {
                    let (l, h) = f.bounding_box();
                    lo.extend(l);
                    hi.extend(h);
                }
                (lo, hi)
            }
            DomainKind::AffineImage { .. } => {
                let c = self.center().to_real_parts();
                let r = self.max_distance(&self.center()) * 1.01;
                (c.iter().map(|v| v - r).collect(), c.iter().map(|v| v + r).collect())
            }
        }
    }

    /// Integration region covering exactly the domain.
    pub fn region(&self) -> Region {
        match &self.kind {
            DomainKind::Ball { center, radius } => Region::Ball {
                center: center.clone(),
                radius: *radius,
            },
            DomainKind::Polydisk { radii } => Region::Polydisk {
                center: ComplexPoint::origin(radii.len()),
                radii: radii.clone(),
            },
            DomainKind::Product { factors } => Region::Product(factors.iter().map(DomainModel::region).collect()),
            DomainKind::AffineImage {
                base, matrix, offset, ..
            } => Region::Affine {
                base: Box::new(base.region()),
                matrix: matrix.clone(),
                offset: ComplexPoint::from_dvector(offset),
            },
        }
    }

    /// Deterministic boundary samples (pushed forward through affine maps).
    pub fn boundary_samples(&self, count: usize, seed: u64) -> Vec<ComplexPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| self.boundary_point(&mut rng)).collect()
    }

    fn boundary_point<R: Rng + ?Sized>(&self, rng: &mut R) -> ComplexPoint {
        match &self.kind {
            DomainKind::Ball { center, radius } => center.add(&random_sphere_point(self.dim, rng).scale(*radius)),
            DomainKind::Polydisk { radii } => {
                let k = rng.random_range(0..radii.len());
                ComplexPoint::new(
                    radii
                        .iter()
                        .enumerate()
                        .map(|(i, r)| {
                            let t = if i == k { *r } else { r * rng.random::<f64>().sqrt() };
                            Complex64::from_polar(t, rng.random_range(0.0..std::f64::consts::TAU))
                        })
                        .collect(),
                )
            }
            DomainKind::Product { factors } => {
                let k = rng.random_range(0..factors.len());
                let parts: Vec<ComplexPoint> = factors
                    .iter()
                    .enumerate()
                    .map(|(i, f)| {
                        if i == k {
                            f.boundary_point(rng)
                        } else {
                            f.interior_point(1.0, rng)
                        }
                    })
                    .collect();
                ComplexPoint::concat(&parts)
            }
            DomainKind::AffineImage {
                base, matrix, offset, ..
            } => ComplexPoint::from_dvector(&(matrix * base.boundary_point(rng).to_dvector() + offset)),
        }
    }

    /// Random interior point at relative depth at most `depth ∈ (0, 1]`
    /// (fraction of the way from the centre to the boundary).
    pub fn interior_point<R: Rng + ?Sized>(&self, depth: f64, rng: &mut R) -> ComplexPoint {
        let t = rng.random::<f64>();
        self.stratified_point(depth * t.powf(1.0 / (2 * self.dim) as f64), rng)
    }

    fn stratified_point<R: Rng + ?Sized>(&self, fraction: f64, rng: &mut R) -> ComplexPoint {
        match &self.kind {
            DomainKind::Ball { center, radius } => {
                center.add(&random_sphere_point(self.dim, rng).scale(radius * fraction))
            }
            DomainKind::Polydisk { radii } => ComplexPoint::new(
                radii
                    .iter()
                    .map(|r| {
                        let t = r * fraction * rng.random::<f64>().sqrt();
                        Complex64::from_polar(t, rng.random_range(0.0..std::f64::consts::TAU))
                    })
                    .collect(),
            ),
            DomainKind::Product { factors } => ComplexPoint::concat(
                &factors
                    .iter()
                    .map(|f| f.stratified_point(fraction * rng.random::<f64>().sqrt(), rng))
                    .collect::<Vec<_>>(),
            ),
            DomainKind::AffineImage {
                base, matrix, offset, ..
            } => ComplexPoint::from_dvector(&(matrix * base.stratified_point(fraction, rng).to_dvector() + offset)),
        }
    }

    /// `count` radius-stratified interior points with relative depth below `depth`.
    pub fn interior_samples(&self, count: usize, depth: f64, seed: u64) -> Vec<ComplexPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|k| {
                let u = (k as f64 + rng.random::<f64>()) / count.max(1) as f64;
                self.stratified_point(depth * u.powf(1.0 / (2 * self.dim) as f64), &mut rng)
            })
            .collect()
    }
}

/// The automorphism of the unit ball sending `a` to `0`.
pub fn ball_automorphism(a: ComplexPoint) -> Result<CandidateMap> {
    CandidateMap::ball_automorphism(a)
}

impl std::str::FromStr for DomainModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_domain(s, None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn membership_examples() {
        let ball = DomainModel::unit_ball(2);
        assert!(ball.contains(&ComplexPoint::origin(2)).unwrap());
        assert!(!ball.contains(&ComplexPoint::real(&[1.0, 0.0])).unwrap());
        let poly = DomainModel::polydisk(vec![1.0, 1.0]).unwrap();
        let p = ComplexPoint::real(&[0.9, 0.9]);
        assert!(p.norm() > 1.0);
        assert!(poly.contains(&p).unwrap());
        assert!(matches!(
            ball.contains(&ComplexPoint::origin(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn extremes_examples() {
        let ball = DomainModel::unit_ball(2);
        let e = ball.boundary_extremes(&ComplexPoint::origin(2)).unwrap();
        assert_eq!((e.r_x, e.big_r_x), (1.0, 1.0));
        let e = ball.boundary_extremes(&ComplexPoint::real(&[0.5, 0.0])).unwrap();
        assert_eq!((e.r_x, e.big_r_x), (0.5, 1.5));
        let poly = DomainModel::polydisk(vec![1.0, 1.0]).unwrap();
        let e = poly.boundary_extremes(&ComplexPoint::origin(2)).unwrap();
        assert_eq!(e.r_x, 1.0);
        assert_relative_eq!(e.big_r_x, 2f64.sqrt(), max_relative = 1e-15);
        assert!(ball.boundary_extremes(&ComplexPoint::real(&[1.0, 0.0])).is_err());
    }

    #[test]
    fn polydisk_extremes_match_boundary_sampling() {
        // independent oracle: brute-force over the distinguished and full boundary
        let poly = DomainModel::polydisk(vec![1.0, 1.0]).unwrap();
        let x = ComplexPoint::new(vec![c(0.2, -0.1), c(-0.3, 0.4)]);
        let pts = poly.boundary_samples(200_000, 11);
        let (lo, hi) = pts.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), y| {
            let d = x.distance(y);
            (lo.min(d), hi.max(d))
        });
        let e = poly.boundary_extremes(&x).unwrap();
        assert!(lo >= e.r_x - 1e-12 && lo - e.r_x < 1e-2);
        assert!(hi <= e.big_r_x + 1e-12 && e.big_r_x - hi < 1e-2);
    }

    #[test]
    fn affine_image_is_sampled() {
        let m = DMatrix::from_row_slice(1, 1, &[c(2.0, 0.0)]);
        let d = DomainModel::affine_image(DomainModel::unit_ball(1), m, DVector::from_vec(vec![c(1.0, 0.0)]))
            .unwrap()
            .with_boundary_resolution(2000);
        assert!(d.contains(&ComplexPoint::real(&[2.5])).unwrap());
        assert!(!d.contains(&ComplexPoint::real(&[3.5])).unwrap());
        let e = d.boundary_extremes(&ComplexPoint::real(&[1.0])).unwrap();
        assert_eq!(e.resolution, Some(2000));
        assert!((e.r_x - 2.0).abs() < 1e-4 && (e.big_r_x - 2.0).abs() < 1e-4);
    }

    #[test]
    fn singular_affine_map_rejected() {
        let m = DMatrix::zeros(2, 2);
        assert!(DomainModel::affine_image(DomainModel::unit_ball(2), m, DVector::zeros(2)).is_err());
    }

    #[test]
    fn automorphism_examples() {
        let id = ball_automorphism(ComplexPoint::origin(2)).unwrap();
        let z = ComplexPoint::new(vec![c(0.1, 0.2), c(-0.3, 0.0)]);
        assert!(id.evaluate(&z).unwrap().distance(&z) < 1e-16);
        let m = ball_automorphism(ComplexPoint::real(&[0.5])).unwrap();
        assert!(m.evaluate(&ComplexPoint::real(&[0.5])).unwrap().norm() < 1e-16);
        assert!(ball_automorphism(ComplexPoint::real(&[1.0])).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn inscribed_and_circumscribed_balls(seed in any::<u64>(), which in 0usize..4) {
            let domains = [
                DomainModel::unit_ball(2),
                DomainModel::ball(ComplexPoint::new(vec![c(0.5, -1.0)]), 2.0).unwrap(),
                DomainModel::polydisk(vec![1.0, 0.5]).unwrap(),
                DomainModel::product(vec![DomainModel::unit_ball(1), DomainModel::polydisk(vec![2.0]).unwrap()]).unwrap(),
            ];
            let d = &domains[which];
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = d.interior_point(0.95, &mut rng);
            let e = d.boundary_extremes(&x).unwrap();
            prop_assert!(0.0 < e.r_x && e.r_x <= e.big_r_x);
            let eps = 1e-9;
            for _ in 0..64 {
                let u = random_sphere_point(d.dim(), &mut rng);
                let t = rand::Rng::random::<f64>(&mut rng);
                let inner = x.add(&u.scale(e.r_x * (1.0 - eps) * t));
                prop_assert!(d.contains(&inner).unwrap());
                let y = d.interior_point(1.0, &mut rng);
                prop_assert!(x.distance(&y) <= e.big_r_x * (1.0 + eps));
            }
        }

        #[test]
        fn automorphism_preserves_the_ball_and_inverts(seed in any::<u64>(), n in 1usize..=3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ball = DomainModel::unit_ball(n);
            let a = ball.interior_point(0.95, &mut rng);
            let psi = ball_automorphism(a.clone()).unwrap();
            let inv = ball_automorphism(psi.evaluate(&ComplexPoint::origin(n)).unwrap()).unwrap();
            for _ in 0..32 {
                let z = ball.interior_point(0.999, &mut rng);
                let w = psi.evaluate(&z).unwrap();
                prop_assert!(w.norm() < 1.0);
                prop_assert!(inv.evaluate(&w).unwrap().distance(&z) < 1e-10);
            }
        }
    }
}
