//! Restricted volume forms along linear slices `Z = D ∩ {P w + q}`.
//!
//! Densities are taken with respect to the slice coordinates `w ∈ C^d`.
//! Carathéodory candidates are maps `D → B^d_1` sending `p` to `0`; the
//! restricted density of `F` is `μ^d(F(p)) |det(J_F(p) P)|^2`. A full
//! witness `G: D → B^n_1` is turned into such a map by composing with the
//! co-isometry that is optimal for `K = J_G(p) P`, which yields `det(K^* K)`.
//! Kobayashi candidates are discs `B^d_1 → D` that land inside the slice.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::extremal::{as_disc, enclosing_witness, product_factors, split_point};
use super::{caratheodory_lower, kobayashi_upper, BoundKind, Diagnostics, VolumeEstimate};
use crate::domains::{DomainKind, DomainModel};
use crate::error::{Error, Result};
use crate::forms::{gram_determinant, ComplexPoint, VolumeDensity};
use crate::maps::CandidateMap;
use crate::optimize::{multi_start_minimize, nelder_mead, MapSearchConfig};
use crate::volumes::poincare_density;

/// An affine embedding `w ↦ P w + q` of `C^d` into `C^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSlice {
    embedding: DMatrix<Complex64>,
    offset: DVector<Complex64>,
}

impl LinearSlice {
    pub fn new(embedding: DMatrix<Complex64>, offset: DVector<Complex64>) -> Result<Self> {
        let (n, d) = embedding.shape();
        if offset.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: offset.len(),
            });
        }
        if d == 0 || d > n {
            return Err(Error::InvalidConfig(format!("slice dimension {d} must be in 1..={n}")));
        }
        let scale = embedding.norm().max(1e-300).powi(2 * d as i32);
        if gram_determinant(&embedding) <= 1e-12 * scale {
            return Err(Error::InvalidConfig("slice embedding is not injective".into()));
        }
        Ok(Self { embedding, offset })
    }

    /// The coordinate slice `{z_{d+1} = … = z_n = 0}`.
    pub fn coordinate(n: usize, d: usize) -> Result<Self> {
        Self::new(DMatrix::identity(n, d), DVector::zeros(n))
    }

    pub fn dim(&self) -> usize {
        self.embedding.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.embedding.nrows()
    }

    pub fn embedding(&self) -> &DMatrix<Complex64> {
        &self.embedding
    }

    pub fn offset(&self) -> &DVector<Complex64> {
        &self.offset
    }

    pub fn embed(&self, w: &ComplexPoint) -> Result<ComplexPoint> {
        w.check_dim(self.dim())?;
        Ok(ComplexPoint::from_dvector(&(&self.embedding * w.to_dvector() + &self.offset)))
    }

    /// Slice coordinates of an ambient point lying on the slice.
    pub fn coordinates_of(&self, p: &ComplexPoint) -> Result<ComplexPoint> {
        p.check_dim(self.ambient_dim())?;
        let rhs = p.to_dvector() - &self.offset;
        let normal = self.embedding.adjoint() * &self.embedding;
        let w = normal
            .lu()
            .solve(&(self.embedding.adjoint() * &rhs))
            .ok_or_else(|| Error::InvalidConfig("slice embedding is singular".into()))?;
        let residual = (&self.embedding * &w - rhs).norm();
        if residual > 1e-9 * (1.0 + p.norm()) {
            return Err(Error::OutsideDomain(format!("point is off the slice (residual {residual:.3e})")));
        }
        Ok(ComplexPoint::from_dvector(&w))
    }

    /// `det(P^* P)`, the factor relating slice densities to intrinsic ones.
    pub fn gram(&self) -> f64 {
        gram_determinant(&self.embedding)
    }

    /// Same slice seen in the coordinates `y = A^{-1}(z - b)`.
    pub fn pulled_back(&self, inverse: &DMatrix<Complex64>, b: &DVector<Complex64>) -> Self {
        Self {
            embedding: inverse * &self.embedding,
            offset: inverse * (&self.offset - b),
        }
    }

    /// Thin QR: `P = U R` with orthonormal columns `U`.
    fn orthonormal(&self) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
        let qr = self.embedding.clone().qr();
        (qr.q(), qr.r())
    }
}

/// Restricted Carathéodory density of a `d`-valued map at `p`.
fn restricted_value(f: &CandidateMap, p: &ComplexPoint, slice: &LinearSlice) -> Result<f64> {
    let w = f.evaluate(p)?;
    let mu = poincare_density(w.dim(), 1.0, &w)
        .map_err(|_| Error::InvalidCandidate("restricted witness leaves the unit ball".into()))?;
    let k = f.jacobian(p)?.into_matrix() * slice.embedding();
    Ok(mu.value() * gram_determinant(&k))
}

/// `Q G` with `Q` the co-isometry onto the column space of `J_G(p) P`.
fn project_witness(g: CandidateMap, p: &ComplexPoint, slice: &LinearSlice) -> Result<CandidateMap> {
    let k = g.jacobian(p)?.into_matrix() * slice.embedding();
    let q = k.qr().q();
    let d = slice.dim();
    CandidateMap::compose(vec![g, CandidateMap::affine(q.adjoint(), DVector::zeros(d))?])
}

fn estimate(value: f64, d: usize, kind: BoundKind, witness: CandidateMap, family: &str) -> Result<VolumeEstimate> {
    Ok(VolumeEstimate {
        value: VolumeDensity::try_new(value, d)?,
        bound_kind: kind,
        witness: Some(witness),
        diagnostics: Diagnostics::family(family),
    })
}

fn keep(best: &mut Option<VolumeEstimate>, cand: VolumeEstimate, maximize: bool) {
    let better = match best {
        None => true,
        Some(cur) => {
            if maximize {
                cand.density() > cur.density() * (1.0 + 1e-12)
            } else {
                cand.density() < cur.density() * (1.0 - 1e-12)
            }
        }
    };
    if better {
        *best = Some(cand);
    }
}

fn check_point(domain: &DomainModel, slice: &LinearSlice, p: &ComplexPoint) -> Result<ComplexPoint> {
    if slice.ambient_dim() != domain.dim() {
        return Err(Error::DimensionMismatch {
            expected: domain.dim(),
            found: slice.ambient_dim(),
        });
    }
    let w = slice.coordinates_of(p)?;
    if !domain.contains(p)? {
        return Err(Error::OutsideDomain(format!("{p:?}")));
    }
    Ok(w)
}

/// Lower bound for the restricted Carathéodory density `v^C_{D|Z}(p)`.
pub fn restricted_caratheodory_lower(
    domain: &DomainModel,
    slice: &LinearSlice,
    p: &ComplexPoint,
    cfg: &MapSearchConfig,
) -> Result<VolumeEstimate> {
    cfg.validate()?;
    check_point(domain, slice, p)?;
    let (n, d) = (domain.dim(), slice.dim());

    if d == n {
        let mut full = caratheodory_lower(domain, p, cfg)?;
        full.value = full.value.scaled(slice.gram());
        return Ok(full);
    }

    if let DomainKind::AffineImage { base, offset, inverse, .. } = domain.kind() {
        let q = ComplexPoint::from_dvector(&(inverse * (p.to_dvector() - offset)));
        let inner = restricted_caratheodory_lower(base, &slice.pulled_back(inverse, offset), &q, cfg)?;
        let Some(bw) = inner.witness else {
            return Ok(inner);
        };
        let pre = CandidateMap::affine(inverse.clone(), -(inverse * offset))?;
        let w = CandidateMap::compose(vec![pre, bw])?;
        let v = restricted_value(&w, p, slice)?;
        let mut out = estimate(v, d, inner.bound_kind, w, &format!("affine({})", inner.diagnostics.family))?;
        out.diagnostics.evaluations = inner.diagnostics.evaluations;
        out.diagnostics.starts = inner.diagnostics.starts;
        return Ok(out);
    }

    let mut best: Option<VolumeEstimate> = None;
    let (mut evaluations, mut starts) = (0, 0);

    if let Some((center, radius)) = as_disc(domain).filter(|_| cfg.allows_closed_form()) {
        let g = enclosing_witness(&center, radius, p)?;
        let f = project_witness(g, p, slice)?;
        let v = restricted_value(&f, p, slice)?;
        keep(&mut best, estimate(v, d, BoundKind::Lower, f, "ball-automorphism")?, true);
    }

    if let Some(factors) = product_factors(domain) {
        let parts = split_point(p, &factors);
        let mut witnesses = Vec::new();
        for (f, q) in factors.iter().zip(&parts) {
            let e = caratheodory_lower(f, q, cfg)?;
            evaluations += e.diagnostics.evaluations;
            starts += e.diagnostics.starts;
            if let Some(w) = e.witness {
                witnesses.push(w);
            }
        }
        if witnesses.len() == factors.len() {
            let g = CandidateMap::Product { factors: witnesses };
            let jg = g.jacobian(p)?.into_matrix();
            let dims: Vec<usize> = factors.iter().map(DomainModel::dim).collect();
            let weighted = |w2: &[f64]| -> DMatrix<Complex64> {
                let mut m = jg.clone();
                let mut row = 0;
                for (k, &nk) in dims.iter().enumerate() {
                    for _ in 0..nk {
                        m.row_mut(row).scale_mut(w2[k].max(0.0).sqrt());
                        row += 1;
                    }
                }
                m * slice.embedding()
            };
            let score = |w2: &[f64]| gram_determinant(&weighted(w2));
            // faces of the weight simplex, then a softmax search from the best face
            let k = factors.len();
            let mut candidates: Vec<Vec<f64>> = Vec::new();
            for mask in 1u32..(1 << k) {
                let total: usize = (0..k).filter(|j| mask & (1 << j) != 0).map(|j| dims[j]).sum();
                candidates.push(
                    (0..k)
                        .map(|j| if mask & (1 << j) != 0 { dims[j] as f64 / total as f64 } else { 0.0 })
                        .collect(),
                );
            }
            let softmax = |x: &[f64]| -> Vec<f64> {
                let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
                let s: f64 = e.iter().sum();
                e.into_iter().map(|v| v / s).collect()
            };
            let obj = |x: &[f64]| -score(&softmax(x));
            let m = nelder_mead(&obj, &vec![0.0; k], 1.0, cfg.local_steps, cfg.tolerance);
            evaluations += m.evaluations;
            candidates.push(softmax(&m.x));
            let w2 = candidates
                .into_iter()
                .max_by(|a, b| score(a).total_cmp(&score(b)))
                .expect("nonempty");
            let mut weights = Vec::with_capacity(n);
            for (j, &nk) in dims.iter().enumerate() {
                weights.extend(std::iter::repeat_n(Complex64::new(w2[j].sqrt(), 0.0), nk));
            }
            let g = CandidateMap::compose(vec![g, CandidateMap::DiagonalScaling { factors: weights }])?;
            let f = project_witness(g, p, slice)?;
            let v = restricted_value(&f, p, slice)?;
            keep(&mut best, estimate(v, d, BoundKind::Lower, f, "product")?, true);
        }
    }

    if cfg.allows_search() && domain.is_analytic() {
        let objective = |x: &[f64]| {
            let c = ComplexPoint::from_real_parts(x);
            let rho = domain.max_distance(&c);
            match enclosing_witness(&c, rho, p).and_then(|g| g.jacobian(p)) {
                Ok(j) => -gram_determinant(&(j.into_matrix() * slice.embedding())).ln(),
                Err(_) => f64::INFINITY,
            }
        };
        let (lo, hi) = domain.bounding_box();
        let m = multi_start_minimize(&objective, &lo, &hi, &[p.to_real_parts()], cfg);
        evaluations += m.evaluations;
        starts += m.starts;
        let c = ComplexPoint::from_real_parts(&m.x);
        if let Ok(g) = enclosing_witness(&c, domain.max_distance(&c), p) {
            let f = project_witness(g, p, slice)?;
            let v = restricted_value(&f, p, slice)?;
            keep(&mut best, estimate(v, d, BoundKind::Lower, f, "enclosing-ball")?, true);
        }
    }

    let mut out = best.unwrap_or_else(|| VolumeEstimate {
        value: VolumeDensity::zero(d),
        bound_kind: BoundKind::Lower,
        witness: None,
        diagnostics: Diagnostics {
            family: "none".into(),
            notes: vec!["no candidate family applies; reporting the trivial lower bound 0".into()],
            ..Default::default()
        },
    });
    out.diagnostics.evaluations += evaluations;
    out.diagnostics.starts += starts;
    Ok(out)
}

/// Restricted Kobayashi density of an ambient disc `f: B^d → Z ⊂ D`, in slice coordinates.
fn restricted_kobayashi_value(f: &CandidateMap, slice: &LinearSlice) -> Result<f64> {
    let j = f.jacobian(&ComplexPoint::origin(f.domain_dim()))?.into_matrix();
    let g = gram_determinant(&j);
    if g == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(slice.gram() / g)
}

/// Upper bound for the restricted Kobayashi density `v^K_{D|Z}(p)`, using
/// discs constrained to the slice.
pub fn restricted_kobayashi_upper(
    domain: &DomainModel,
    slice: &LinearSlice,
    p: &ComplexPoint,
    cfg: &MapSearchConfig,
) -> Result<VolumeEstimate> {
    cfg.validate()?;
    check_point(domain, slice, p)?;
    let (n, d) = (domain.dim(), slice.dim());

    if d == n {
        let mut full = kobayashi_upper(domain, p, cfg)?;
        full.value = full.value.scaled(slice.gram());
        return Ok(full);
    }

    if let DomainKind::AffineImage {
        base, offset, inverse, matrix,
    } = domain.kind()
    {
        let q = ComplexPoint::from_dvector(&(inverse * (p.to_dvector() - offset)));
        let inner = restricted_kobayashi_upper(base, &slice.pulled_back(inverse, offset), &q, cfg)?;
        let Some(bw) = inner.witness else {
            return Ok(inner);
        };
        let w = CandidateMap::compose(vec![bw, CandidateMap::affine(matrix.clone(), offset.clone())?])?;
        let v = restricted_kobayashi_value(&w, slice)?;
        let mut out = estimate(v, d, inner.bound_kind, w, &format!("affine({})", inner.diagnostics.family))?;
        out.diagnostics.evaluations = inner.diagnostics.evaluations;
        out.diagnostics.starts = inner.diagnostics.starts;
        return Ok(out);
    }

    let (u, r) = slice.orthonormal();
    let w_p = ComplexPoint::from_dvector(&(&r * slice.coordinates_of(p)?.to_dvector()));
    let embed_u = CandidateMap::affine(u.clone(), slice.offset().clone())?;
    let disc = |c: &ComplexPoint, rho: f64| -> Result<CandidateMap> {
        let a = w_p.sub(c).scale(1.0 / rho);
        CandidateMap::compose(vec![
            CandidateMap::ball_automorphism(a.scale(-1.0))?,
            CandidateMap::place(c, rho),
            embed_u.clone(),
        ])
    };
    let mut best: Option<VolumeEstimate> = None;
    let (mut evaluations, mut starts) = (0, 0);

    if let Some((center, radius)) = as_disc(domain).filter(|_| cfg.allows_closed_form()) {
        // the slice meets the ball in the d-ball B(w0, r') of the orthonormal coordinates
        let w0 = ComplexPoint::from_dvector(&(u.adjoint() * (center.to_dvector() - slice.offset())));
        let delta2 = (center.to_dvector() - slice.offset()).norm_squared() - w0.norm_sqr();
        let r_in = (radius * radius - delta2.max(0.0)).sqrt();
        if w_p.distance(&w0) < r_in {
            let f = disc(&w0, r_in)?;
            let v = restricted_kobayashi_value(&f, slice)?;
            keep(&mut best, estimate(v, d, BoundKind::Upper, f, "slice-ball")?, false);
        }
    }

    if cfg.allows_search() && domain.is_analytic() {
        let inradius = |c: &ComplexPoint| -> f64 {
            let z = ComplexPoint::from_dvector(&(&u * c.to_dvector() + slice.offset()));
            domain.inradius(&z)
        };
        let objective = |x: &[f64]| {
            let c = ComplexPoint::from_real_parts(x);
            let rho = inradius(&c);
            let gap = rho * rho - w_p.distance(&c).powi(2);
            if !(gap > 0.0) {
                return f64::INFINITY;
            }
            2.0 * rho.ln() - (d as f64 + 1.0) * gap.ln()
        };
        let reach = domain.max_distance(p);
        let centre = w_p.to_real_parts();
        let lo: Vec<f64> = centre.iter().map(|v| v - reach).collect();
        let hi: Vec<f64> = centre.iter().map(|v| v + reach).collect();
        let m = multi_start_minimize(&objective, &lo, &hi, &[centre.clone()], cfg);
        evaluations += m.evaluations;
        starts += m.starts;
        let c = ComplexPoint::from_real_parts(&m.x);
        let rho = inradius(&c);
        if rho > w_p.distance(&c) {
            let f = disc(&c, rho)?;
            let v = restricted_kobayashi_value(&f, slice)?;
            keep(&mut best, estimate(v, d, BoundKind::Upper, f, "inscribed-ball")?, false);
        }
    }

    let mut out = best.ok_or_else(|| {
        Error::UnsupportedDomain("no slice disc family reaches the point; the upper bound is infinite".into())
    })?;
    out.diagnostics.evaluations += evaluations;
    out.diagnostics.starts += starts;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> MapSearchConfig {
        MapSearchConfig::default()
    }

    #[test]
    fn ball_coordinate_slice_at_origin() {
        let b = DomainModel::unit_ball(2);
        let z = LinearSlice::coordinate(2, 1).unwrap();
        let o = ComplexPoint::origin(2);
        let c = restricted_caratheodory_lower(&b, &z, &o, &cfg()).unwrap();
        let k = restricted_kobayashi_upper(&b, &z, &o, &cfg()).unwrap();
        assert_relative_eq!(c.density(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(k.density(), 1.0, max_relative = 1e-12);
        // projection and inclusion witnesses
        let f = c.witness.unwrap();
        assert_eq!(f.codomain_dim(), 1);
        let g = k.witness.unwrap();
        let img = g.evaluate(&ComplexPoint::real(&[0.5])).unwrap();
        assert!(img[1].norm() < 1e-15);
    }

    #[test]
    fn whole_space_slice_matches_full_estimates() {
        let d = DomainModel::polydisk(vec![1.0, 2.0]).unwrap();
        let z = LinearSlice::coordinate(2, 2).unwrap();
        let p = ComplexPoint::real(&[0.3, -0.5]);
        let rc = restricted_caratheodory_lower(&d, &z, &p, &cfg()).unwrap();
        let fc = caratheodory_lower(&d, &p, &cfg()).unwrap();
        assert_relative_eq!(rc.density(), fc.density(), max_relative = 1e-12);
        let rk = restricted_kobayashi_upper(&d, &z, &p, &cfg()).unwrap();
        let fk = kobayashi_upper(&d, &p, &cfg()).unwrap();
        assert_relative_eq!(rk.density(), fk.density(), max_relative = 1e-12);
    }

    #[test]
    fn polydisk_slice_sandwich() {
        let d = DomainModel::polydisk(vec![1.0, 1.0]).unwrap();
        let z = LinearSlice::coordinate(2, 1).unwrap();
        let o = ComplexPoint::origin(2);
        let c = restricted_caratheodory_lower(&d, &z, &o, &cfg()).unwrap();
        let k = restricted_kobayashi_upper(&d, &z, &o, &cfg()).unwrap();
        // squeezing bounds with a = 1, b = √2, d = 1
        assert!(c.density() >= 0.5 * (1.0 - 1e-12));
        assert!(k.density() <= 1.0 + 1e-12);
        assert!(c.density() <= k.density() * (1.0 + 1e-9));
    }

    #[test]
    fn oblique_slices_are_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let b = DomainModel::unit_ball(3);
        let p_mat = DMatrix::from_fn(3, 2, |i, j| Complex64::new(((i + 2 * j) as f64).sin(), 0.3 * (i as f64 - j as f64)));
        let q = DVector::from_vec(vec![Complex64::new(0.1, 0.0), Complex64::new(0.0, -0.1), Complex64::new(0.05, 0.05)]);
        let z = LinearSlice::new(p_mat, q).unwrap();
        for _ in 0..4 {
            let w = crate::maps::random_ball_point(2, 0.2, &mut rng);
            let p = z.embed(&w).unwrap();
            let c = restricted_caratheodory_lower(&b, &z, &p, &cfg()).unwrap();
            let k = restricted_kobayashi_upper(&b, &z, &p, &cfg()).unwrap();
            assert!(c.density() > 0.0);
            assert!(c.density() <= k.density() * (1.0 + 1e-9), "{} > {}", c.density(), k.density());
        }
    }

    #[test]
    fn off_slice_point_rejected() {
        let b = DomainModel::unit_ball(2);
        let z = LinearSlice::coordinate(2, 1).unwrap();
        assert!(restricted_caratheodory_lower(&b, &z, &ComplexPoint::real(&[0.1, 0.1]), &cfg()).is_err());
    }

    #[test]
    fn degenerate_embedding_rejected() {
        let p = DMatrix::from_row_slice(2, 2, &[Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0), Complex64::new(2.0, 0.0), Complex64::new(4.0, 0.0)]);
        assert!(LinearSlice::new(p, DVector::zeros(2)).is_err());
    }

    #[test]
    fn witnesses_are_recomputed() {
        let d = DomainModel::product(vec![DomainModel::unit_ball(1), DomainModel::unit_ball(2)]).unwrap();
        let z = LinearSlice::coordinate(3, 2).unwrap();
        let p = ComplexPoint::real(&[0.2, -0.1, 0.0]);
        let c = restricted_caratheodory_lower(&d, &z, &p, &cfg()).unwrap();
        let f = c.witness.clone().unwrap();
        assert_relative_eq!(restricted_value(&f, &p, &z).unwrap(), c.density(), max_relative = 1e-12);
        assert!(f.evaluate(&p).unwrap().norm() < 1e-12);
    }
}
