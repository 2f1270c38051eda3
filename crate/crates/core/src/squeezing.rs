//! Uniform squeezing constants `B_a ⊂ D - x ⊂ B_b` over a sample of points and
//! the comparison constants derived from them.

use std::f64::consts::PI;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domains::{BoundaryExtremes, DomainModel};
use crate::error::{Error, Result};
use crate::forms::ComplexPoint;
use crate::maps::CandidateMap;
use crate::volumes::LinearSlice;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SqueezingConstants {
    pub a: f64,
    pub b: f64,
    pub sample: Vec<ComplexPoint>,
    pub extremes: Vec<BoundaryExtremes>,
}

impl SqueezingConstants {
    /// Whether every boundary distance came from a closed form.
    pub fn is_exact(&self) -> bool {
        self.extremes.iter().all(|e| e.resolution.is_none())
    }
}

/// `a = min r_x`, `b = max R_x` over the sample.
pub fn squeezing_constants(domain: &DomainModel, sample: &[ComplexPoint]) -> Result<SqueezingConstants> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let extremes = sample
        .par_iter()
        .map(|x| domain.boundary_extremes(x))
        .collect::<Result<Vec<_>>>()?;
    let a = extremes.iter().map(|e| e.r_x).fold(f64::INFINITY, f64::min);
    let b = extremes.iter().map(|e| e.big_r_x).fold(0.0, f64::max);
    Ok(SqueezingConstants {
        a,
        b,
        sample: sample.to_vec(),
        extremes,
    })
}

/// `(b/a)^{2m}`.
pub fn volume_comparison_constant(c: &SqueezingConstants, m: usize) -> f64 {
    (c.b / c.a).powi(2 * m as i32)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricComparisonConstants {
    /// `g^K ≤ (b^2/a^2) g^C`.
    pub kobayashi_caratheodory: f64,
    /// `g^B ≤ [(2π/a^3)(2b/a)^n]^2 g^K`.
    pub bergman_kobayashi: f64,
    /// `(a^2/(b^2 n)) g^K ≤ g^KE`.
    pub ke_lower: f64,
    /// `g^KE ≤ (b^{4n-2} n^{n-1} / a^{2n-2}) g^K`.
    pub ke_upper: f64,
}

pub fn metric_comparison_constants(c: &SqueezingConstants, n: usize) -> MetricComparisonConstants {
    let (a, b, nf) = (c.a, c.b, n as f64);
    let ni = n as i32;
    MetricComparisonConstants {
        kobayashi_caratheodory: (b * b) / (a * a),
        bergman_kobayashi: (2.0 * PI / a.powi(3) * (2.0 * b / a).powi(ni)).powi(2),
        ke_lower: a * a / (b * b * nf),
        ke_upper: b.powi(4 * ni - 2) * nf.powi(ni - 1) / a.powi(2 * ni - 2),
    }
}

/// `d^d (n+1)^d / (d+1)^d`, the restricted Carathéodory–Kähler–Einstein constant.
pub fn restricted_ke_constant(n: usize, d: usize) -> f64 {
    let (nf, df) = (n as f64, d as f64);
    (df * (nf + 1.0) / (df + 1.0)).powi(d as i32)
}

/// `z ↦ (z - p)/b`, a map `D → B^n_1` with Jacobian density `b^{-2n}`.
pub fn caratheodory_squeezing_witness(p: &ComplexPoint, b: f64) -> CandidateMap {
    CandidateMap::recentre(p, b)
}

/// `w ↦ p + a w`, a map `B^n_1 → D` with `|det J|^{-2} = a^{-2n}`.
pub fn kobayashi_squeezing_witness(p: &ComplexPoint, a: f64) -> CandidateMap {
    CandidateMap::place(p, a)
}

/// `z ↦ U^*(z - p)/b` with `U` an orthonormal frame of the slice.
pub fn restricted_caratheodory_squeezing_witness(slice: &LinearSlice, p: &ComplexPoint, b: f64) -> Result<CandidateMap> {
    let u = slice.embedding().clone().qr().q();
    let d = slice.dim();
    CandidateMap::compose(vec![
        CandidateMap::recentre(p, b),
        CandidateMap::affine(u.adjoint(), DVector::zeros(d))?,
    ])
}

/// `w ↦ p + a U w`, a disc family inside the slice.
pub fn restricted_kobayashi_squeezing_witness(slice: &LinearSlice, p: &ComplexPoint, a: f64) -> Result<CandidateMap> {
    let u = slice.embedding().clone().qr().q();
    CandidateMap::affine(u * num_complex::Complex64::new(a, 0.0), p.to_dvector())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::jacobian_determinant_squared;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        let ball = DomainModel::unit_ball(2);
        let c = squeezing_constants(&ball, &[ComplexPoint::origin(2)]).unwrap();
        assert_eq!((c.a, c.b), (1.0, 1.0));
        let c = squeezing_constants(&ball, &[ComplexPoint::origin(2), ComplexPoint::real(&[0.5, 0.0])]).unwrap();
        assert_relative_eq!(c.a, 0.5);
        assert_relative_eq!(c.b, 1.5);
        let poly = DomainModel::polydisk(vec![1.0, 1.0]).unwrap();
        let c = squeezing_constants(&poly, &[ComplexPoint::origin(2)]).unwrap();
        assert_eq!(c.a, 1.0);
        assert!((c.b - 2f64.sqrt()).abs() < 1e-15);
        assert!(c.is_exact());
        assert_eq!(squeezing_constants(&poly, &[]), Err(Error::EmptySample));
        assert!(squeezing_constants(&poly, &[ComplexPoint::real(&[1.0, 0.0])]).is_err());
    }

    #[test]
    fn comparison_constants() {
        let c = SqueezingConstants { a: 1.0, b: 2f64.sqrt(), sample: vec![], extremes: vec![] };
        assert_relative_eq!(volume_comparison_constant(&c, 2), 4.0, max_relative = 1e-15);
        assert_relative_eq!(volume_comparison_constant(&c, 1), 2.0, max_relative = 1e-15);
        assert_relative_eq!(metric_comparison_constants(&c, 1).kobayashi_caratheodory, 2.0, max_relative = 1e-15);
        let m = metric_comparison_constants(&c, 2);
        assert_relative_eq!(m.bergman_kobayashi, (2.0 * PI * 8.0).powi(2), max_relative = 1e-14);
        let unit = SqueezingConstants { a: 1.0, b: 1.0, sample: vec![], extremes: vec![] };
        let m = metric_comparison_constants(&unit, 1);
        assert_relative_eq!(m.bergman_kobayashi, (4.0 * PI).powi(2));
        assert_eq!((m.ke_lower, m.ke_upper), (1.0, 1.0));
        assert_eq!(volume_comparison_constant(&unit, 3), 1.0);
        assert_relative_eq!(restricted_ke_constant(2, 1), 1.5);
    }

    #[test]
    fn witness_densities() {
        let p = ComplexPoint::real(&[0.1, -0.2]);
        let f = caratheodory_squeezing_witness(&p, 2.0);
        let j = jacobian_determinant_squared(&f.jacobian(&p).unwrap()).unwrap();
        assert_relative_eq!(j.value(), 2f64.powi(-4), max_relative = 1e-15);
        let g = kobayashi_squeezing_witness(&p, 0.5);
        let j = jacobian_determinant_squared(&g.jacobian(&ComplexPoint::origin(2)).unwrap()).unwrap();
        assert_relative_eq!(1.0 / j.value(), 0.5f64.powi(-4), max_relative = 1e-15);
        let z = LinearSlice::coordinate(2, 1).unwrap();
        let o = ComplexPoint::origin(2);
        let f = restricted_caratheodory_squeezing_witness(&z, &o, 2f64.sqrt()).unwrap();
        let k = f.jacobian(&o).unwrap().into_matrix() * z.embedding();
        assert_relative_eq!(crate::forms::gram_determinant(&k), 0.5, max_relative = 1e-14);
        let g = restricted_kobayashi_squeezing_witness(&z, &o, 1.0).unwrap();
        assert!(g.evaluate(&ComplexPoint::real(&[0.7])).unwrap()[1].norm() == 0.0);
    }

    proptest! {
        #[test]
        fn enlarging_sample_is_monotone(xs in proptest::collection::vec((-0.6f64..0.6, -0.6f64..0.6), 1..6), extra in (-0.6f64..0.6, -0.6f64..0.6)) {
            let d = DomainModel::polydisk(vec![1.0, 1.0]).unwrap();
            let pts: Vec<ComplexPoint> = xs.iter().map(|&(a, b)| ComplexPoint::real(&[a, b])).collect();
            let c1 = squeezing_constants(&d, &pts).unwrap();
            let mut more = pts.clone();
            more.push(ComplexPoint::real(&[extra.0, extra.1]));
            let c2 = squeezing_constants(&d, &more).unwrap();
            prop_assert!(c2.a <= c1.a && c2.b >= c1.b);
            prop_assert!(c1.a <= c1.b);
        }
    }
}
