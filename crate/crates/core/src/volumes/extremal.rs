//! Carathéodory lower bounds and Kobayashi upper bounds at a point.
//!
//! Carathéodory side (maps `D → B^n_1`, `p ↦ 0`):
//! * enclosing balls `F = ψ_w((z - c)/ρ(c))`, `ρ(c) = sup_D |z - c|`, searched over `c`;
//! * the exact automorphism witness on balls;
//! * products `(w_1 F_1, …, w_k F_k)` with `Σ w_j^2 = 1`, best at `w_j^2 = n_j / n`;
//! * transport through affine images.
//!
//! Kobayashi side (maps `B^n_1 → D`, `0 ↦ p`):
//! * inscribed balls `f = c + ρ(c) ψ_{-a}`, `ρ(c)` the inradius at `c`;
//! * the exact witness on balls, products of factor witnesses, affine transport.
//!
//! Every reported value is recomputed from its witness map.

use num_complex::Complex64;

use super::{BoundKind, Diagnostics, VolumeEstimate};
use crate::domains::{DomainKind, DomainModel};
use crate::error::{Error, Result};
use crate::forms::{jacobian_determinant_squared, ComplexPoint, VolumeDensity};
use crate::maps::{pullback_poincare, CandidateMap};
use crate::optimize::{multi_start_minimize, MapSearchConfig};

/// Factor domains of a polydisk or product, `None` otherwise.
pub(crate) fn product_factors(domain: &DomainModel) -> Option<Vec<DomainModel>> {
    match domain.kind() {
        DomainKind::Polydisk { radii } if radii.len() > 1 => Some(
            radii
                .iter()
                .map(|&r| DomainModel::ball(ComplexPoint::origin(1), r).expect("positive radius"))
                .collect(),
        ),
        DomainKind::Product { factors } => Some(factors.clone()),
        _ => None,
    }
}

/// Polydisks of dimension one are discs.
pub(crate) fn as_disc(domain: &DomainModel) -> Option<(ComplexPoint, f64)> {
    match domain.kind() {
        DomainKind::Ball { center, radius } => Some((center.clone(), *radius)),
        DomainKind::Polydisk { radii } if radii.len() == 1 => Some((ComplexPoint::origin(1), radii[0])),
        _ => None,
    }
}

pub(crate) fn split_point(p: &ComplexPoint, factors: &[DomainModel]) -> Vec<ComplexPoint> {
    let mut start = 0;
    factors
        .iter()
        .map(|f| {
            let b = p.block(start, f.dim());
            start += f.dim();
            b
        })
        .collect()
}

pub(crate) fn caratheodory_value(witness: &CandidateMap, p: &ComplexPoint) -> Result<f64> {
    Ok(pullback_poincare(witness, p, 1.0)?.value())
}

pub(crate) fn kobayashi_value(witness: &CandidateMap) -> Result<f64> {
    let n = witness.domain_dim();
    let det = jacobian_determinant_squared(&witness.jacobian(&ComplexPoint::origin(n))?)?.value();
    if det == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(1.0 / det)
}

/// `F(z) = ψ_w((z - c)/ρ)` with `w = (p - c)/ρ`.
pub(crate) fn enclosing_witness(c: &ComplexPoint, rho: f64, p: &ComplexPoint) -> Result<CandidateMap> {
    let w = p.sub(c).scale(1.0 / rho);
    CandidateMap::compose(vec![CandidateMap::recentre(c, rho), CandidateMap::ball_automorphism(w)?])
}

/// `f(w) = c + ρ ψ_{-a}(w)` with `a = (p - c)/ρ`, so `f(0) = p`.
pub(crate) fn inscribed_witness(c: &ComplexPoint, rho: f64, p: &ComplexPoint) -> Result<CandidateMap> {
    let a = p.sub(c).scale(1.0 / rho);
    CandidateMap::compose(vec![
        CandidateMap::ball_automorphism(a.scale(-1.0))?,
        CandidateMap::place(c, rho),
    ])
}

fn log_poincare(n: usize, rho: f64, x: &ComplexPoint) -> f64 {
    let gap = rho * rho - x.norm_sqr();
    if !(gap > 0.0) || !(rho > 0.0) {
        return f64::NAN;
    }
    2.0 * rho.ln() - (n as f64 + 1.0) * gap.ln()
}

struct Best {
    estimate: Option<VolumeEstimate>,
    maximize: bool,
    evaluations: usize,
    starts: usize,
    notes: Vec<String>,
}

impl Best {
    fn new(maximize: bool) -> Self {
        Self {
            estimate: None,
            maximize,
            evaluations: 0,
            starts: 0,
            notes: Vec::new(),
        }
    }

    fn offer(&mut self, candidate: VolumeEstimate) {
        let replace = match &self.estimate {
            None => true,
            Some(cur) => {
                let (a, b) = (candidate.density(), cur.density());
                let tie = (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
                if tie {
                    candidate.bound_kind == BoundKind::Exact && cur.bound_kind != BoundKind::Exact
                } else if self.maximize {
                    a > b
                } else {
                    a < b
                }
            }
        };
        if replace {
            self.estimate = Some(candidate);
        }
    }

    fn finish(self, dim: usize, empty: impl FnOnce() -> Result<VolumeEstimate>) -> Result<VolumeEstimate> {
        let mut est = match self.estimate {
            Some(e) => e,
            None => empty()?,
        };
        est.diagnostics.evaluations += self.evaluations;
        est.diagnostics.starts += self.starts;
        est.diagnostics.notes.extend(self.notes);
        debug_assert_eq!(est.value.dim(), dim);
        Ok(est)
    }
}

fn estimate(value: f64, dim: usize, kind: BoundKind, witness: CandidateMap, family: &str) -> Result<VolumeEstimate> {
    Ok(VolumeEstimate {
        value: VolumeDensity::try_new(value, dim)?,
        bound_kind: kind,
        witness: Some(witness),
        diagnostics: Diagnostics::family(family),
    })
}

/// Lower bound for the Carathéodory volume density `v^C_D(p)`.
pub fn caratheodory_lower(domain: &DomainModel, p: &ComplexPoint, cfg: &MapSearchConfig) -> Result<VolumeEstimate> {
    cfg.validate()?;
    if !domain.contains(p)? {
        return Err(Error::OutsideDomain(format!("{p:?}")));
    }
    let n = domain.dim();
    let mut best = Best::new(true);

    if let Some((center, radius)) = as_disc(domain).filter(|_| cfg.allows_closed_form()) {
        let w = enclosing_witness(&center, radius, p)?;
        let v = caratheodory_value(&w, p)?;
        best.offer(estimate(v, n, BoundKind::Exact, w, "ball-automorphism")?);
    }

    if let DomainKind::AffineImage {
        base, offset, inverse, matrix,
    } = domain.kind()
    {
        let q = ComplexPoint::from_dvector(&(inverse * (p.to_dvector() - offset)));
        let inner = caratheodory_lower(base, &q, cfg)?;
        best.evaluations += inner.diagnostics.evaluations;
        best.starts += inner.diagnostics.starts;
        if let Some(bw) = inner.witness {
            let pre = CandidateMap::affine(inverse.clone(), -(inverse * offset))?;
            let w = CandidateMap::compose(vec![pre, bw])?;
            let det = matrix.clone().determinant().norm_sqr();
            let v = caratheodory_value(&w, p)?;
            debug_assert!((v - inner.value.value() / det).abs() <= 1e-8 * v.max(1e-300));
            best.offer(estimate(v, n, inner.bound_kind, w, &format!("affine({})", inner.diagnostics.family))?);
        }
    }

    if let Some(factors) = product_factors(domain) {
        let parts = split_point(p, &factors);
        let mut witnesses = Vec::with_capacity(factors.len());
        let mut weights = Vec::with_capacity(n);
        for (f, q) in factors.iter().zip(&parts) {
            let e = caratheodory_lower(f, q, cfg)?;
            best.evaluations += e.diagnostics.evaluations;
            best.starts += e.diagnostics.starts;
            match e.witness {
                Some(w) => witnesses.push(w),
                None => break,
            }
            let weight = (f.dim() as f64 / n as f64).sqrt();
            weights.extend(std::iter::repeat_n(Complex64::new(weight, 0.0), f.dim()));
        }
        if witnesses.len() == factors.len() {
            let w = CandidateMap::compose(vec![
                CandidateMap::Product { factors: witnesses },
                CandidateMap::DiagonalScaling { factors: weights },
            ])?;
            let v = caratheodory_value(&w, p)?;
            best.offer(estimate(v, n, BoundKind::Lower, w, "product")?);
        }
    }

    if cfg.allows_search() && domain.is_analytic() {
        let objective = |x: &[f64]| {
            let c = ComplexPoint::from_real_parts(x);
            let rho = domain.max_distance(&c);
            -log_poincare(n, rho, &p.sub(&c))
        };
        let (lo, hi) = domain.bounding_box();
        let m = multi_start_minimize(&objective, &lo, &hi, &[p.to_real_parts()], cfg);
        best.evaluations += m.evaluations;
        best.starts += m.starts;
        let c = ComplexPoint::from_real_parts(&m.x);
        let rho = domain.max_distance(&c);
        if let Ok(w) = enclosing_witness(&c, rho, p) {
            let v = caratheodory_value(&w, p)?;
            best.offer(estimate(v, n, BoundKind::Lower, w, "enclosing-ball")?);
        }
    }

    best.finish(n, || {
        Ok(VolumeEstimate {
            value: VolumeDensity::zero(n),
            bound_kind: BoundKind::Lower,
            witness: None,
            diagnostics: Diagnostics {
                family: "none".into(),
                notes: vec!["no candidate family applies; reporting the trivial lower bound 0".into()],
                ..Default::default()
            },
        })
    })
}

/// Upper bound for the Kobayashi volume density `v^K_D(p)`.
pub fn kobayashi_upper(domain: &DomainModel, p: &ComplexPoint, cfg: &MapSearchConfig) -> Result<VolumeEstimate> {
    cfg.validate()?;
    if !domain.contains(p)? {
        return Err(Error::OutsideDomain(format!("{p:?}")));
    }
    let n = domain.dim();
    let mut best = Best::new(false);

    if let Some((center, radius)) = as_disc(domain).filter(|_| cfg.allows_closed_form()) {
        let w = inscribed_witness(&center, radius, p)?;
        let v = kobayashi_value(&w)?;
        best.offer(estimate(v, n, BoundKind::Exact, w, "ball-automorphism")?);
    }

    if let DomainKind::AffineImage {
        base, offset, inverse, matrix,
    } = domain.kind()
    {
        let q = ComplexPoint::from_dvector(&(inverse * (p.to_dvector() - offset)));
        let inner = kobayashi_upper(base, &q, cfg)?;
        best.evaluations += inner.diagnostics.evaluations;
        best.starts += inner.diagnostics.starts;
        if let Some(bw) = inner.witness {
            let post = CandidateMap::affine(matrix.clone(), offset.clone())?;
            let w = CandidateMap::compose(vec![bw, post])?;
            let v = kobayashi_value(&w)?;
            best.offer(estimate(v, n, inner.bound_kind, w, &format!("affine({})", inner.diagnostics.family))?);
        }
    }

    if let Some(factors) = product_factors(domain) {
        let parts = split_point(p, &factors);
        let mut witnesses = Vec::with_capacity(factors.len());
        for (f, q) in factors.iter().zip(&parts) {
            let e = kobayashi_upper(f, q, cfg)?;
            best.evaluations += e.diagnostics.evaluations;
            best.starts += e.diagnostics.starts;
            match e.witness {
                Some(w) => witnesses.push(w),
                None => break,
            }
        }
        if witnesses.len() == factors.len() {
            let w = CandidateMap::Product { factors: witnesses };
            let v = kobayashi_value(&w)?;
            best.offer(estimate(v, n, BoundKind::Upper, w, "product")?);
        }
    }

    if cfg.allows_search() && domain.is_analytic() {
        let objective = |x: &[f64]| {
            let c = ComplexPoint::from_real_parts(x);
            let rho = domain.inradius(&c);
            log_poincare(n, rho, &p.sub(&c))
        };
        let (lo, hi) = domain.bounding_box();
        let m = multi_start_minimize(&objective, &lo, &hi, &[p.to_real_parts()], cfg);
        best.evaluations += m.evaluations;
        best.starts += m.starts;
        let c = ComplexPoint::from_real_parts(&m.x);
        let rho = domain.inradius(&c);
        if rho > p.distance(&c) {
            let w = inscribed_witness(&c, rho, p)?;
            let v = kobayashi_value(&w)?;
            best.offer(estimate(v, n, BoundKind::Upper, w, "inscribed-ball")?);
        }
    }

    best.finish(n, || {
        Err(Error::UnsupportedDomain(
            "no analytic disc family reaches the point; the upper bound is infinite".into(),
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volumes::poincare_density;
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> MapSearchConfig {
        MapSearchConfig::default()
    }

    #[test]
    fn unit_ball_at_origin() {
        let b = DomainModel::unit_ball(2);
        let o = ComplexPoint::origin(2);
        let c = caratheodory_lower(&b, &o, &cfg()).unwrap();
        let k = kobayashi_upper(&b, &o, &cfg()).unwrap();
        assert_eq!(c.bound_kind, BoundKind::Exact);
        assert_relative_eq!(c.density(), 1.0, max_relative = 1e-14);
        assert_relative_eq!(k.density(), 1.0, max_relative = 1e-14);
        let w = c.witness.unwrap();
        assert!(w.evaluate(&o).unwrap().norm() < 1e-15);
    }

    #[test]
    fn scaling_witnesses_give_squeezing_bounds() {
        // any D ∋ 0 inside B_b: v^C ≥ b^{-2n}; B_a inside D: v^K ≤ a^{-2n}
        let d = DomainModel::polydisk(vec![1.0, 1.0]).unwrap();
        let o = ComplexPoint::origin(2);
        let c = caratheodory_lower(&d, &o, &cfg()).unwrap();
        let k = kobayashi_upper(&d, &o, &cfg()).unwrap();
        assert!(c.density() >= 0.25 * (1.0 - 1e-12), "{}", c.density());
        assert!(k.density() <= 1.0 * (1.0 + 1e-12));
        assert!(c.density() <= k.density());
    }

    #[test]
    fn polydisk_product_witness_is_one_quarter() {
        let d = DomainModel::polydisk(vec![1.0, 1.0]).unwrap();
        let c = caratheodory_lower(&d, &ComplexPoint::origin(2), &MapSearchConfig {
            family: crate::optimize::MapFamily::ClosedForm,
            ..cfg()
        })
        .unwrap();
        assert_relative_eq!(c.density(), 0.25, max_relative = 1e-14);
        assert_eq!(c.diagnostics.family, "product");
    }

    #[test]
    fn search_recovers_ball_values_without_closed_forms() {
        let b = DomainModel::ball(ComplexPoint::real(&[0.3, -0.2]), 1.5).unwrap();
        let p = ComplexPoint::new(vec![Complex64::new(0.9, 0.4), Complex64::new(-0.5, 0.2)]);
        let exact = poincare_density(2, 1.5, &p.sub(&ComplexPoint::real(&[0.3, -0.2]))).unwrap().value();
        let s = cfg().search_only();
        let c = caratheodory_lower(&b, &p, &s).unwrap();
        let k = kobayashi_upper(&b, &p, &s).unwrap();
        assert!(c.density() <= exact * (1.0 + 1e-12));
        assert!(k.density() >= exact * (1.0 - 1e-12));
        assert_relative_eq!(c.density(), exact, max_relative = 1e-3);
        assert_relative_eq!(k.density(), exact, max_relative = 1e-3);
    }

    #[test]
    fn affine_transport() {
        let a = DMatrix::from_row_slice(2, 2, &[
            Complex64::new(2.0, 0.0), Complex64::new(0.5, 0.0),
            Complex64::new(0.0, 0.0), Complex64::new(0.0, 1.0),
        ]);
        let d = DomainModel::affine_image(DomainModel::unit_ball(2), a.clone(), DVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]))
            .unwrap();
        let p = ComplexPoint::real(&[1.2, 0.1]);
        let q = ComplexPoint::from_dvector(&(a.clone().try_inverse().unwrap() * (p.to_dvector() - DVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]))));
        let exact = poincare_density(2, 1.0, &q).unwrap().value() / a.determinant().norm_sqr();
        let c = caratheodory_lower(&d, &p, &cfg()).unwrap();
        let k = kobayashi_upper(&d, &p, &cfg()).unwrap();
        assert_eq!(c.bound_kind, BoundKind::Exact);
        assert_relative_eq!(c.density(), exact, max_relative = 1e-12);
        assert_relative_eq!(k.density(), exact, max_relative = 1e-12);
    }

    #[test]
    fn outside_point_rejected() {
        let b = DomainModel::unit_ball(1);
        assert!(caratheodory_lower(&b, &ComplexPoint::real(&[1.0]), &cfg()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn sandwich_and_witness_validity(seed in any::<u64>(), which in 0usize..3) {
            let domains = [
                DomainModel::polydisk(vec![1.0, 0.7]).unwrap(),
                DomainModel::product(vec![DomainModel::unit_ball(2), DomainModel::unit_ball(1)]).unwrap(),
                DomainModel::ball(ComplexPoint::real(&[0.5]), 2.0).unwrap(),
            ];
            let d = &domains[which];
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = d.interior_point(0.9, &mut rng);
            let small = MapSearchConfig { starts: 3, local_steps: 400, ..cfg() };
            let c = caratheodory_lower(d, &p, &small).unwrap();
            let k = kobayashi_upper(d, &p, &small).unwrap();
            prop_assert!(c.density() <= k.density() * (1.0 + 1e-9));
            let fc = c.witness.unwrap();
            prop_assert!(fc.evaluate(&p).unwrap().norm() < 1e-9);
            for _ in 0..32 {
                let z = d.interior_point(1.0, &mut rng);
                prop_assert!(fc.evaluate(&z).unwrap().norm() < 1.0 + 1e-12);
            }
            let fk = k.witness.unwrap();
            prop_assert!(fk.evaluate(&ComplexPoint::origin(d.dim())).unwrap().distance(&p) < 1e-9);
            for _ in 0..32 {
                let w = crate::maps::random_ball_point(d.dim(), 0.999, &mut rng);
                prop_assert!(d.contains(&fk.evaluate(&w).unwrap()).unwrap());
            }
        }
    }
}
