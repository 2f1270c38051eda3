//! Infinitesimal invariant metrics at `(p, v)`, stored as squared norms.
//!
//! A hermitian matrix `G` with entries `g_{ij̄}` acts on a tangent vector by
//! `g(v) = Σ g_{ij̄} v_i v̄_j`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::domains::{DomainKind, DomainModel};
use crate::error::{Error, Result};
use crate::forms::ComplexPoint;
use crate::maps::CandidateMap;
use crate::optimize::{multi_start_minimize, MapSearchConfig};
use crate::volumes::{ke_metric_matrix, BoundKind, Diagnostics, KeNormalization};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    /// Squared norm `g(p, v)`.
    pub value: f64,
    pub bound_kind: BoundKind,
    pub witness: Option<CandidateMap>,
    pub diagnostics: Diagnostics,
}

impl MetricValue {
    fn exact(value: f64, family: &str) -> Self {
        Self {
            value,
            bound_kind: BoundKind::Exact,
            witness: None,
            diagnostics: Diagnostics::family(family),
        }
    }
}

/// `g(v) = v^T G v̄`.
pub fn hermitian_form(g: &DMatrix<Complex64>, v: &ComplexPoint) -> f64 {
    let v = v.to_dvector();
    (v.transpose() * g * v.map(|z| z.conj()))[(0, 0)].re
}

/// Matrix of `∂∂̄(-log(r^2 - |x|^2))`: `δ_ij/(r^2-|x|^2) + x̄_i x_j/(r^2-|x|^2)^2`.
pub fn ball_metric_matrix(r: f64, x: &ComplexPoint) -> Result<DMatrix<Complex64>> {
    let gap = r * r - x.norm_sqr();
    if !(gap > 0.0) || !x.is_finite() {
        return Err(Error::OutsideDomain(format!("|z| = {} is not below r = {r}", x.norm())));
    }
    let n = x.dim();
    let c = x.coords();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        let delta = if i == j { 1.0 / gap } else { 0.0 };
        Complex64::new(delta, 0.0) + c[i].conj() * c[j] / (gap * gap)
    }))
}

/// Poincaré metric of `B^n_r` (centred at the origin) at `z` in direction `v`.
pub fn poincare_metric_ball(r: f64, z: &ComplexPoint, v: &ComplexPoint) -> Result<MetricValue> {
    v.check_dim(z.dim())?;
    let g = ball_metric_matrix(r, z)?;
    Ok(MetricValue::exact(hermitian_form(&g, v), "ball-potential"))
}

fn check(domain: &DomainModel, p: &ComplexPoint, v: &ComplexPoint) -> Result<()> {
    v.check_dim(domain.dim())?;
    if v.norm_sqr() == 0.0 {
        return Err(Error::ZeroVector);
    }
    if !domain.contains(p)? {
        return Err(Error::OutsideDomain(format!("{p:?}")));
    }
    Ok(())
}

fn disc_of(domain: &DomainModel) -> Option<(ComplexPoint, f64)> {
    match domain.kind() {
        DomainKind::Ball { center, radius } => Some((center.clone(), *radius)),
        DomainKind::Polydisk { radii } if radii.len() == 1 => Some((ComplexPoint::origin(1), radii[0])),
        _ => None,
    }
}

fn factors_of(domain: &DomainModel) -> Option<Vec<DomainModel>> {
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

/// Largest factor value; products of invariant metrics take the maximum.
fn product_max<F>(
    factors: &[DomainModel],
    p: &ComplexPoint,
    v: &ComplexPoint,
    inexact: BoundKind,
    f: F,
) -> Result<MetricValue>
where
    F: Fn(&DomainModel, &ComplexPoint, &ComplexPoint) -> Result<MetricValue>,
{
    let mut start = 0;
    let mut best: Option<MetricValue> = None;
    let mut all_exact = true;
    let mut evaluations = 0;
    for fac in factors {
        let k = fac.dim();
        let (pf, vf) = (p.block(start, k), v.block(start, k));
        start += k;
        if vf.norm_sqr() == 0.0 {
            continue;
        }
        let m = f(fac, &pf, &vf)?;
        all_exact &= m.bound_kind == BoundKind::Exact;
        evaluations += m.diagnostics.evaluations;
        if best.as_ref().is_none_or(|b| m.value > b.value) {
            best = Some(m);
        }
    }
    let mut out = best.expect("nonzero vector has a nonzero block");
    if !all_exact && out.bound_kind == BoundKind::Exact {
        out.bound_kind = inexact;
    }
    out.witness = None;
    out.diagnostics.evaluations = evaluations;
    out.diagnostics.family = format!("product({})", out.diagnostics.family);
    Ok(out)
}

/// Carathéodory value of the map `ψ_w((z - c)/ρ)` followed by the projection
/// onto the direction of its differential: `|J v|^2`.
fn enclosing_metric(c: &ComplexPoint, rho: f64, p: &ComplexPoint, v: &ComplexPoint) -> Result<(f64, CandidateMap)> {
    let w = p.sub(c).scale(1.0 / rho);
    let f = CandidateMap::compose(vec![CandidateMap::recentre(c, rho), CandidateMap::ball_automorphism(w)?])?;
    let jv = f.jacobian(p)?.into_matrix() * v.to_dvector();
    let norm = jv.norm();
    let n = p.dim();
    let u = if norm > 0.0 { jv.map(|z| z.conj()) / Complex64::new(norm, 0.0) } else { DVector::zeros(n) };
    let proj = CandidateMap::affine(DMatrix::from_row_slice(1, n, u.as_slice()), DVector::zeros(1))?;
    let g = CandidateMap::compose(vec![f, proj])?;
    Ok((pullback_metric(&g, p, v)?, g))
}

/// `|f'(p) v|^2 / (1 - |f(p)|^2)^2` for a map into the unit disc.
fn pullback_metric(f: &CandidateMap, p: &ComplexPoint, v: &ComplexPoint) -> Result<f64> {
    let w = f.evaluate(p)?;
    let gap = 1.0 - w.norm_sqr();
    if !(gap > 0.0) {
        return Err(Error::InvalidCandidate("image leaves the unit disc".into()));
    }
    let jv = f.jacobian(p)?.into_matrix() * v.to_dvector();
    Ok(jv.norm_squared() / (gap * gap))
}

/// Lower bound for the squared Carathéodory metric `g^C_D(p, v)`.
pub fn caratheodory_metric_lower(
    domain: &DomainModel,
    p: &ComplexPoint,
    v: &ComplexPoint,
    cfg: &MapSearchConfig,
) -> Result<MetricValue> {
    cfg.validate()?;
    check(domain, p, v)?;
    if let DomainKind::AffineImage { base, offset, inverse, .. } = domain.kind() {
        let q = ComplexPoint::from_dvector(&(inverse * (p.to_dvector() - offset)));
        let u = ComplexPoint::from_dvector(&(inverse * v.to_dvector()));
        let mut m = caratheodory_metric_lower(base, &q, &u, cfg)?;
        if let Some(w) = m.witness.take() {
            let pre = CandidateMap::affine(inverse.clone(), -(inverse * offset))?;
            let w = CandidateMap::compose(vec![pre, w])?;
            m.value = pullback_metric(&w, p, v)?;
            m.witness = Some(w);
        }
        m.diagnostics.family = format!("affine({})", m.diagnostics.family);
        return Ok(m);
    }
    if let Some(factors) = factors_of(domain).filter(|_| cfg.allows_closed_form()) {
        return product_max(&factors, p, v, BoundKind::Lower, |d, q, u| caratheodory_metric_lower(d, q, u, cfg));
    }
    let mut best: Option<MetricValue> = None;
    if let Some((c, r)) = disc_of(domain).filter(|_| cfg.allows_closed_form()) {
        let (value, g) = enclosing_metric(&c, r, p, v)?;
        best = Some(MetricValue {
            value,
            bound_kind: BoundKind::Exact,
            witness: Some(g),
            diagnostics: Diagnostics::family("caratheodory-ball-automorphism"),
        });
    }
    if cfg.allows_search() && domain.is_analytic() {
        let objective = |x: &[f64]| {
            let c = ComplexPoint::from_real_parts(x);
            match enclosing_metric(&c, domain.max_distance(&c), p, v) {
                Ok((val, _)) if val > 0.0 => -val.ln(),
                _ => f64::INFINITY,
            }
        };
        let (lo, hi) = domain.bounding_box();
        let m = multi_start_minimize(&objective, &lo, &hi, &[p.to_real_parts()], cfg);
        let c = ComplexPoint::from_real_parts(&m.x);
        let (value, g) = enclosing_metric(&c, domain.max_distance(&c), p, v)?;
        if best.as_ref().is_none_or(|b| value > b.value * (1.0 + 1e-12)) {
            let mut d = Diagnostics::family("caratheodory-enclosing-ball");
            d.evaluations = m.evaluations;
            d.starts = m.starts;
            best = Some(MetricValue {
                value,
                bound_kind: BoundKind::Lower,
                witness: Some(g),
                diagnostics: d,
            });
        }
    }
    Ok(best.unwrap_or_else(|| MetricValue {
        value: 0.0,
        bound_kind: BoundKind::Lower,
        witness: None,
        diagnostics: Diagnostics {
            family: "none".into(),
            notes: vec!["no candidate family applies; reporting the trivial lower bound 0".into()],
            ..Default::default()
        },
    }))
}

/// `|J_f(0)^{-1} v|^2` for a map `f: B^n_1 → D` with `f(0) = p`.
fn disc_metric(f: &CandidateMap, v: &ComplexPoint) -> Result<f64> {
    let j = f.jacobian(&ComplexPoint::origin(f.domain_dim()))?.into_matrix();
    match j.lu().solve(&v.to_dvector()) {
        Some(u) => Ok(u.norm_squared()),
        None => Ok(f64::INFINITY),
    }
}

fn inscribed(c: &ComplexPoint, rho: f64, p: &ComplexPoint) -> Result<CandidateMap> {
    let a = p.sub(c).scale(1.0 / rho);
    CandidateMap::compose(vec![CandidateMap::ball_automorphism(a.scale(-1.0))?, CandidateMap::place(c, rho)])
}

/// Upper bound for the squared Kobayashi metric `g^K_D(p, v)`. The witness is
/// a ball map `f: B^n_1 → D`, `f(0) = p`; the extremal disc is its restriction
/// to the line through `J_f(0)^{-1} v`.
pub fn kobayashi_metric_upper(
    domain: &DomainModel,
    p: &ComplexPoint,
    v: &ComplexPoint,
    cfg: &MapSearchConfig,
) -> Result<MetricValue> {
    cfg.validate()?;
    check(domain, p, v)?;
    if let DomainKind::AffineImage {
        base, offset, inverse, matrix,
    } = domain.kind()
    {
        let q = ComplexPoint::from_dvector(&(inverse * (p.to_dvector() - offset)));
        let u = ComplexPoint::from_dvector(&(inverse * v.to_dvector()));
        let mut m = kobayashi_metric_upper(base, &q, &u, cfg)?;
        if let Some(w) = m.witness.take() {
            let w = CandidateMap::compose(vec![w, CandidateMap::affine(matrix.clone(), offset.clone())?])?;
            m.value = disc_metric(&w, v)?;
            m.witness = Some(w);
        }
        m.diagnostics.family = format!("affine({})", m.diagnostics.family);
        return Ok(m);
    }
    if let Some(factors) = factors_of(domain).filter(|_| cfg.allows_closed_form()) {
        return product_max(&factors, p, v, BoundKind::Upper, |d, q, u| kobayashi_metric_upper(d, q, u, cfg));
    }
    let mut best: Option<MetricValue> = None;
    if let Some((c, r)) = disc_of(domain).filter(|_| cfg.allows_closed_form()) {
        let f = inscribed(&c, r, p)?;
        best = Some(MetricValue {
            value: disc_metric(&f, v)?,
            bound_kind: BoundKind::Exact,
            witness: Some(f),
            diagnostics: Diagnostics::family("kobayashi-ball-automorphism"),
        });
    }
    if cfg.allows_search() && domain.is_analytic() {
        let objective = |x: &[f64]| {
            let c = ComplexPoint::from_real_parts(x);
            let rho = domain.inradius(&c);
            if !(rho > p.distance(&c)) {
                return f64::INFINITY;
            }
            match ball_metric_matrix(rho, &p.sub(&c)) {
                Ok(g) => hermitian_form(&g, v).ln(),
                Err(_) => f64::INFINITY,
            }
        };
        let reach = domain.max_distance(p);
        let centre = p.to_real_parts();
        let lo: Vec<f64> = centre.iter().map(|x| x - reach).collect();
        let hi: Vec<f64> = centre.iter().map(|x| x + reach).collect();
        let m = multi_start_minimize(&objective, &lo, &hi, &[centre.clone()], cfg);
        let c = ComplexPoint::from_real_parts(&m.x);
        let rho = domain.inradius(&c);
        if rho > p.distance(&c) {
            let f = inscribed(&c, rho, p)?;
            let value = disc_metric(&f, v)?;
            if best.as_ref().is_none_or(|b| value < b.value * (1.0 - 1e-12)) {
                let mut d = Diagnostics::family("kobayashi-inscribed-ball");
                d.evaluations = m.evaluations;
                d.starts = m.starts;
                best = Some(MetricValue {
                    value,
                    bound_kind: BoundKind::Upper,
                    witness: Some(f),
                    diagnostics: d,
                });
            }
        }
    }
    best.ok_or_else(|| Error::UnsupportedDomain("no disc family reaches the point; the upper bound is infinite".into()))
}

/// Matrix of `∂∂̄ log v^B` from the closed-form kernels.
pub fn bergman_metric_matrix(domain: &DomainModel, p: &ComplexPoint) -> Result<DMatrix<Complex64>> {
    if !domain.contains(p)? {
        return Err(Error::OutsideDomain(format!("{p:?}")));
    }
    let n = domain.dim();
    match domain.kind() {
        DomainKind::Ball { center, radius } => {
            Ok(ball_metric_matrix(*radius, &p.sub(center))? * Complex64::new((n + 1) as f64, 0.0))
        }
        DomainKind::Polydisk { radii } => Ok(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                let r2 = radii[i] * radii[i];
                Complex64::new(2.0 * r2 / (r2 - p[i].norm_sqr()).powi(2), 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })),
        DomainKind::Product { factors } => {
            let mut g = DMatrix::zeros(n, n);
            let mut start = 0;
            for f in factors {
                let k = f.dim();
                let block = bergman_metric_matrix(f, &p.block(start, k))?;
                g.view_mut((start, start), (k, k)).copy_from(&block);
                start += k;
            }
            Ok(g)
        }
        DomainKind::AffineImage { base, offset, inverse, .. } => {
            let q = ComplexPoint::from_dvector(&(inverse * (p.to_dvector() - offset)));
            let g = bergman_metric_matrix(base, &q)?;
            Ok(inverse.transpose() * g * inverse.conjugate())
        }
    }
}

/// Squared Bergman metric `g^B_D(p, v)`.
pub fn bergman_metric(domain: &DomainModel, p: &ComplexPoint, v: &ComplexPoint) -> Result<MetricValue> {
    check(domain, p, v)?;
    let g = bergman_metric_matrix(domain, p)?;
    Ok(MetricValue::exact(hermitian_form(&g, v), "bergman-kernel"))
}

/// Squared Kähler–Einstein metric on a ball or an affine image of a ball,
/// normalized to coincide with the ball potential metric.
pub fn ke_metric(domain: &DomainModel, p: &ComplexPoint, v: &ComplexPoint) -> Result<MetricValue> {
    check(domain, p, v)?;
    let g = ke_metric_matrix(domain, p, KeNormalization::Rescaled)?;
    Ok(MetricValue::exact(hermitian_form(&g, v), "ball-ke"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature::mixed_hessian;
    use crate::volumes::bergman_density_closed;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> MapSearchConfig {
        MapSearchConfig::default()
    }

    fn one() -> ComplexPoint {
        ComplexPoint::real(&[1.0])
    }

    #[test]
    fn disc_values() {
        let d = DomainModel::unit_ball(1);
        let o = ComplexPoint::origin(1);
        assert_relative_eq!(caratheodory_metric_lower(&d, &o, &one(), &cfg()).unwrap().value, 1.0, max_relative = 1e-12);
        assert_relative_eq!(kobayashi_metric_upper(&d, &o, &one(), &cfg()).unwrap().value, 1.0, max_relative = 1e-12);
        assert_relative_eq!(bergman_metric(&d, &o, &one()).unwrap().value, 2.0);
        assert_relative_eq!(ke_metric(&d, &o, &one()).unwrap().value, 1.0);
        let h = ComplexPoint::real(&[0.5]);
        assert_relative_eq!(caratheodory_metric_lower(&d, &h, &one(), &cfg()).unwrap().value, 1.0 / 0.5625, max_relative = 1e-12);
        assert_relative_eq!(poincare_metric_ball(1.0, &h, &one()).unwrap().value, 1.0 / 0.5625, max_relative = 1e-14);
    }

    #[test]
    fn poincare_examples() {
        let e1 = ComplexPoint::real(&[1.0, 0.0]);
        assert_eq!(poincare_metric_ball(1.0, &ComplexPoint::origin(2), &e1).unwrap().value, 1.0);
        assert_eq!(poincare_metric_ball(2.0, &ComplexPoint::origin(2), &e1).unwrap().value, 0.25);
        assert!(poincare_metric_ball(1.0, &ComplexPoint::real(&[1.0]), &one()).is_err());
    }

    #[test]
    fn ball_bergman_metric() {
        let b = DomainModel::unit_ball(2);
        let e1 = ComplexPoint::real(&[1.0, 0.0]);
        assert_relative_eq!(bergman_metric(&b, &ComplexPoint::origin(2), &e1).unwrap().value, 3.0);
    }

    #[test]
    fn quadratic_in_direction() {
        let d = DomainModel::polydisk(vec![1.0, 2.0]).unwrap();
        let p = ComplexPoint::real(&[0.3, -0.4]);
        let v = ComplexPoint::new(vec![Complex64::new(0.5, 0.2), Complex64::new(-0.1, 0.7)]);
        let v2 = v.scale(2.0);
        for f in [caratheodory_metric_lower, kobayashi_metric_upper] {
            let a = f(&d, &p, &v, &cfg()).unwrap().value;
            let b = f(&d, &p, &v2, &cfg()).unwrap().value;
            assert_relative_eq!(b, 4.0 * a, max_relative = 1e-12);
        }
    }

    #[test]
    fn polydisk_coordinate_disc() {
        let d = DomainModel::polydisk(vec![1.0, 1.0]).unwrap();
        let v = ComplexPoint::real(&[1.0, 0.0]);
        let k = kobayashi_metric_upper(&d, &ComplexPoint::origin(2), &v, &cfg()).unwrap();
        assert!(k.value <= 1.0 + 1e-12);
        assert_eq!(k.bound_kind, BoundKind::Exact);
    }

    #[test]
    fn bergman_matrix_matches_numeric_hessian() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let domains = [
            DomainModel::unit_ball(2),
            DomainModel::polydisk(vec![1.0, 1.5]).unwrap(),
            DomainModel::product(vec![DomainModel::unit_ball(1), DomainModel::ball(ComplexPoint::origin(1), 2.0).unwrap()]).unwrap(),
        ];
        for d in &domains {
            for _ in 0..5 {
                let p = d.interior_point(0.7, &mut rng);
                let exact = bergman_metric_matrix(d, &p).unwrap();
                let num = mixed_hessian(
                    &|z: &ComplexPoint| bergman_density_closed(d, z).map(|e| e.density().ln()).unwrap_or(f64::NAN),
                    &p,
                    1e-3,
                )
                .unwrap();
                assert!((&exact - &num).norm() < 1e-6 * (1.0 + num.norm()));
            }
        }
    }

    #[test]
    fn search_recovers_ball_metrics() {
        let b = DomainModel::ball(ComplexPoint::real(&[0.2, -0.1]), 1.5).unwrap();
        let p = ComplexPoint::real(&[0.5, 0.3]);
        let v = ComplexPoint::new(vec![Complex64::new(0.3, 0.4), Complex64::new(1.0, 0.0)]);
        let exact = poincare_metric_ball(1.5, &p.sub(&ComplexPoint::real(&[0.2, -0.1])), &v).unwrap().value;
        let c = caratheodory_metric_lower(&b, &p, &v, &cfg().search_only()).unwrap();
        let k = kobayashi_metric_upper(&b, &p, &v, &cfg().search_only()).unwrap();
        assert!(c.value <= exact * (1.0 + 1e-9) && c.value >= exact * (1.0 - 1e-3));
        assert!(k.value >= exact * (1.0 - 1e-9) && k.value <= exact * (1.0 + 1e-3));
    }

    #[test]
    fn affine_transport() {
        let a = DMatrix::from_row_slice(2, 2, &[
            Complex64::new(2.0, 0.0), Complex64::new(0.0, 0.0),
            Complex64::new(0.5, 0.0), Complex64::new(0.0, 1.0),
        ]);
        let d = DomainModel::affine_image(DomainModel::unit_ball(2), a, DVector::zeros(2)).unwrap();
        let p = ComplexPoint::real(&[0.4, 0.1]);
        let v = ComplexPoint::real(&[1.0, 1.0]);
        let c = caratheodory_metric_lower(&d, &p, &v, &cfg()).unwrap();
        let k = kobayashi_metric_upper(&d, &p, &v, &cfg()).unwrap();
        let ke = ke_metric(&d, &p, &v).unwrap();
        assert_relative_eq!(c.value, k.value, max_relative = 1e-10);
        assert_relative_eq!(c.value, ke.value, max_relative = 1e-10);
    }
}
