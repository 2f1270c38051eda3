//! Falsifiable numerical checks of the volume and metric inequalities.
//!
//! Every comparison reads `lhs ≤ rhs`. A check can only be decided when a
//! violation of the estimates implies a violation of the true quantities,
//! i.e. when `lhs` is exact or a lower bound and `rhs` is exact or an upper
//! bound. Other comparisons are recorded as informational.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curvature::{min_eigenvalue, ricci_of_volume_density};
use crate::domains::DomainModel;
use crate::error::{Error, Result};
use crate::forms::{gram_determinant, jacobian_determinant_squared, ComplexPoint};
use crate::maps::{pullback_poincare, random_ball_point, random_sphere_point, CandidateMap};
use crate::metrics::{
    bergman_metric, caratheodory_metric_lower, ke_metric, kobayashi_metric_upper, MetricValue,
};
use crate::optimize::MapSearchConfig;
use crate::squeezing::{
    caratheodory_squeezing_witness, kobayashi_squeezing_witness, metric_comparison_constants,
    restricted_caratheodory_squeezing_witness, restricted_ke_constant, restricted_kobayashi_squeezing_witness,
    squeezing_constants, volume_comparison_constant,
};
use crate::volumes::{
    bergman_density_closed, caratheodory_lower, ke_density, ke_metric_matrix, kobayashi_upper, poincare_density,
    restricted_caratheodory_lower, restricted_kobayashi_upper, BoundKind, KeNormalization, LinearSlice,
    VolumeEstimate,
};

/// Relative tolerance when both sides are closed-form values.
pub const CLOSED_FORM_TOL: f64 = 1e-9;
/// Relative tolerance when either side comes from a search or quadrature.
pub const OPTIMIZER_TOL: f64 = 1e-3;
/// Smallest eigenvalue accepted as strictly positive.
pub const STRICT_PSH_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// Counts toward pass/fail.
    Decisive,
    /// Reported only; the bound kinds cannot certify the inequality.
    Informational,
}

/// One side of a comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Side {
    pub value: f64,
    pub kind: BoundKind,
}

impl Side {
    pub fn exact(value: f64) -> Self {
        Self { value, kind: BoundKind::Exact }
    }

    pub fn lower(value: f64) -> Self {
        Self { value, kind: BoundKind::Lower }
    }

    pub fn upper(value: f64) -> Self {
        Self { value, kind: BoundKind::Upper }
    }

    pub fn scaled(self, factor: f64) -> Self {
        Self {
            value: self.value * factor,
            kind: self.kind,
        }
    }
}

impl From<&VolumeEstimate> for Side {
    fn from(e: &VolumeEstimate) -> Self {
        Self {
            value: e.density(),
            kind: e.bound_kind,
        }
    }
}

impl From<&MetricValue> for Side {
    fn from(m: &MetricValue) -> Self {
        Self {
            value: m.value,
            kind: m.bound_kind,
        }
    }
}

/// Whether `lhs ≤ rhs` on estimates of these kinds can be falsified soundly.
pub fn certifies(lhs: BoundKind, rhs: BoundKind) -> bool {
    matches!(lhs, BoundKind::Exact | BoundKind::Lower) && matches!(rhs, BoundKind::Exact | BoundKind::Upper)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub id: String,
    pub anchor: String,
    /// Point, map or domain the record refers to.
    pub meta: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`.
    pub margin: f64,
    /// `None` for informational records.
    pub pass: Option<bool>,
    pub kind: CheckKind,
    pub lhs_kind: BoundKind,
    pub rhs_kind: BoundKind,
    /// Relative tolerance; the absolute slack is `tolerance · max(|lhs|, |rhs|)`.
    pub tolerance: f64,
    /// Equality is expected, so `|margin|` must also be within tolerance.
    pub equality: bool,
    pub note: String,
}

impl CheckRecord {
    /// `lhs ≤ rhs`, decisive exactly when [`certifies`] holds.
    pub fn inequality(id: impl Into<String>, anchor: &str, lhs: Side, rhs: Side) -> Self {
        let exact = lhs.kind == BoundKind::Exact && rhs.kind == BoundKind::Exact;
        let mut rec = Self {
            id: id.into(),
            anchor: anchor.to_string(),
            meta: String::new(),
            lhs: lhs.value,
            rhs: rhs.value,
            margin: 0.0,
            pass: None,
            kind: CheckKind::Informational,
            lhs_kind: lhs.kind,
            rhs_kind: rhs.kind,
            tolerance: if exact { CLOSED_FORM_TOL } else { OPTIMIZER_TOL },
            equality: false,
            note: String::new(),
        };
        rec.kind = if certifies(lhs.kind, rhs.kind) {
            CheckKind::Decisive
        } else {
            CheckKind::Informational
        };
        rec.note = soundness_note(lhs.kind, rhs.kind);
        rec.refresh();
        rec
    }

    pub fn with_meta(mut self, meta: impl Into<String>) -> Self {
        self.meta = meta.into();
        self
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self.refresh();
        self
    }

    pub fn expect_equality(mut self) -> Self {
        self.equality = true;
        self.refresh();
        self
    }

    /// Forces the record to be informational regardless of bound kinds.
    pub fn informational(mut self, note: &str) -> Self {
        self.kind = CheckKind::Informational;
        self.note = format!("{}; {note}", self.note);
        self.refresh();
        self
    }

    pub fn with_note(mut self, note: &str) -> Self {
        self.note = format!("{}; {note}", self.note);
        self
    }

    pub fn slack(&self) -> f64 {
        self.tolerance * self.lhs.abs().max(self.rhs.abs())
    }

    /// Decisive and failed.
    pub fn failed(&self) -> bool {
        self.pass == Some(false)
    }

    fn refresh(&mut self) {
        self.margin = self.rhs - self.lhs;
        let ok = self.margin.is_finite()
            && self.margin >= -self.slack()
            && (!self.equality || self.margin.abs() <= self.slack());
        self.pass = match self.kind {
            CheckKind::Decisive => Some(ok),
            CheckKind::Informational => None,
        };
    }
}

fn soundness_note(lhs: BoundKind, rhs: BoundKind) -> String {
    let name = |k: BoundKind| match k {
        BoundKind::Exact => "exact",
        BoundKind::Lower => "lower bound",
        BoundKind::Upper => "upper bound",
    };
    if certifies(lhs, rhs) {
        format!("decisive: lhs {}, rhs {}", name(lhs), name(rhs))
    } else {
        format!("informational: lhs {}, rhs {} cannot certify lhs <= rhs", name(lhs), name(rhs))
    }
}

fn fmt_point(p: &ComplexPoint) -> String {
    let parts: Vec<String> = p.coords().iter().map(|c| format!("{:.6}{:+.6}i", c.re, c.im)).collect();
    format!("({})", parts.join(", "))
}

/// `φ^* v^C_D ≤ v^C_{D'}` and `φ^* v^K_D ≤ v^K_{D'}` for `φ: D' → D`.
pub fn check_volume_decreasing(
    phi: &CandidateMap,
    source: &DomainModel,
    target: &DomainModel,
    points: &[ComplexPoint],
    cfg: &MapSearchConfig,
) -> Result<Vec<CheckRecord>> {
    let per_point = points
        .par_iter()
        .enumerate()
        .map(|(k, p)| -> Result<Vec<CheckRecord>> {
            let q = phi.evaluate(p)?;
            if !target.contains(&q)? {
                return Err(Error::InvalidCandidate(format!("image {} leaves the target", fmt_point(&q))));
            }
            let jac = jacobian_determinant_squared(&phi.jacobian(p)?)?.value();
            let meta = format!("p={} phi(p)={}", fmt_point(p), fmt_point(&q));
            let c_target = caratheodory_lower(target, &q, cfg)?;
            let c_source = caratheodory_lower(source, p, cfg)?;
            // the composed witness is itself a candidate on D'
            let pulled = Side::from(&c_target).scaled(jac);
            let mut rhs = Side::from(&c_source);
            if rhs.kind == BoundKind::Lower && pulled.value > rhs.value {
                rhs.value = pulled.value;
            }
            let k_target = kobayashi_upper(target, &q, cfg)?;
            let k_source = kobayashi_upper(source, p, cfg)?;
            Ok(vec![
                CheckRecord::inequality(
                    format!("volume_decreasing/caratheodory/{k:04}"),
                    "phi^*(v^C_N) <= v^C_M",
                    pulled,
                    rhs,
                )
                .with_meta(meta.clone()),
                CheckRecord::inequality(
                    format!("volume_decreasing/kobayashi/{k:04}"),
                    "phi^*(v^K_N) <= v^K_M",
                    Side::from(&k_target).scaled(jac),
                    Side::from(&k_source),
                )
                .with_meta(meta),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_point.into_iter().flatten().collect())
}

/// `sqrt(n) 2^{2n+3} (n!)^2 / r^{2n+1}`.
pub fn lipschitz_constant(n: usize, r: f64) -> f64 {
    let fact: f64 = (1..=n).map(|k| k as f64).product();
    (n as f64).sqrt() * 2f64.powi(2 * n as i32 + 3) * fact * fact / r.powi(2 * n as i32 + 1)
}

/// Empirical Lipschitz quotient of the exact `v^C = μ^n_r` over pairs in `B^n_{r/2}`.
pub fn check_lipschitz(r: f64, n: usize, pairs: &[(ComplexPoint, ComplexPoint)]) -> Result<CheckRecord> {
    let mut worst: f64 = 0.0;
    for (p, q) in pairs {
        for z in [p, q] {
            if z.norm() >= 0.5 * r {
                return Err(Error::OutsideDomain(format!("{} is not inside B_{}", fmt_point(z), 0.5 * r)));
            }
        }
        let dist = p.distance(q);
        if dist == 0.0 {
            continue;
        }
        let dv = (poincare_density(n, r, p)?.value() - poincare_density(n, r, q)?.value()).abs();
        worst = worst.max(dv / dist);
    }
    let bound = lipschitz_constant(n, r);
    // the empirical maximum never exceeds the true Lipschitz constant
    Ok(CheckRecord::inequality("lipschitz", "|v^C(p) - v^C(q)| <= C |p - q|", Side::lower(worst), Side::exact(bound))
        .with_tolerance(CLOSED_FORM_TOL)
        .with_meta(format!("n={n} r={r} pairs={} empirical_max={worst:.6e}", pairs.len())))
}

/// `f^* μ^d ≤ μ^d` for a self-map of the unit ball.
pub fn check_ahlfors_schwarz(f: &CandidateMap, points: &[ComplexPoint]) -> Result<Vec<CheckRecord>> {
    let d = f.domain_dim();
    points
        .iter()
        .enumerate()
        .map(|(k, z)| {
            let lhs = pullback_poincare(f, z, 1.0)?.value();
            let rhs = poincare_density(d, 1.0, z)?.value();
            Ok(CheckRecord::inequality(
                format!("ahlfors_schwarz/{k:04}"),
                "(g o f)^* mu^n <= mu^n",
                Side::exact(lhs),
                Side::exact(rhs),
            )
            .with_meta(format!("z={} ratio={:.6e}", fmt_point(z), lhs / rhs)))
        })
        .collect()
}

/// `K_1^n / (n^n K_2)` with `K_1 = n(n+1)`, `K_2 = (n+1)^n n!`.
pub fn mok_yau_bound(n: usize) -> f64 {
    let nf = n as f64;
    let fact: f64 = (1..=n).map(|k| k as f64).product();
    let k1 = nf * (nf + 1.0);
    let k2 = (nf + 1.0).powi(n as i32) * fact;
    k1.powi(n as i32) / (nf.powi(n as i32) * k2)
}

/// `sup f^* V_N / V_M ≤ K_1^n/(n^n K_2)` for `f: B^n_r → B^n_1`, `V_M` the
/// Kähler–Einstein volume of the source and `V_N = μ^n`.
pub fn check_mok_yau(f: &CandidateMap, r: f64, grid: &[ComplexPoint]) -> Result<CheckRecord> {
    let n = f.domain_dim();
    let mut sup: f64 = 0.0;
    for z in grid {
        let num = pullback_poincare(f, z, 1.0)?.value();
        let den = crate::volumes::ke_density_ball_with(n, r, z, KeNormalization::Identity)?.density();
        sup = sup.max(num / den);
    }
    Ok(CheckRecord::inequality(
        "mok_yau",
        "sup f^*V_N/V_M <= K_1^n/(n^n K_2)",
        Side::lower(sup),
        Side::exact(mok_yau_bound(n)),
    )
    .with_tolerance(CLOSED_FORM_TOL)
    .with_meta(format!("n={n} r={r} grid={}", grid.len())))
}

/// Ricci lower bound of the source and holomorphic sectional curvature upper
/// bound of the target used in the Royden comparison.
pub fn royden_curvature_bounds(n: usize) -> (f64, f64) {
    (-2.0 * (n as f64 + 1.0), -2.0)
}

/// `(2ν/(ν+1))·(k/K)`.
pub fn royden_bound(rank: usize, n: usize) -> f64 {
    let (k, big_k) = royden_curvature_bounds(n);
    let nu = rank as f64;
    2.0 * nu / (nu + 1.0) * (k / big_k)
}

/// `Σ g^{αβ̄} f^i_α f̄^j_β h_{ij̄}` for `f: B^n_1 → B^m_1`, both with the ball metric.
pub fn royden_trace(f: &CandidateMap, z: &ComplexPoint) -> Result<(f64, usize)> {
    let jac = f.jacobian(z)?.into_matrix();
    let w = f.evaluate(z)?;
    let g = crate::metrics::ball_metric_matrix(1.0, z)?;
    let h = crate::metrics::ball_metric_matrix(1.0, &w)
        .map_err(|_| Error::InvalidCandidate(format!("image {} leaves the ball", fmt_point(&w))))?;
    let pulled = jac.transpose() * h * jac.conjugate();
    let g_inv = g.try_inverse().ok_or(Error::SingularMetric)?;
    let trace = (g_inv * pulled).trace().re;
    Ok((trace, numerical_rank(&jac)))
}

fn numerical_rank(m: &DMatrix<Complex64>) -> usize {
    let sv = m.clone().singular_values();
    let top = sv.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > 1e-10 * top.max(1.0)).count()
}

pub fn check_royden(f: &CandidateMap, grid: &[ComplexPoint]) -> Result<CheckRecord> {
    let n = f.domain_dim();
    let mut sup: f64 = 0.0;
    let mut nu = 0;
    for z in grid {
        let (t, rank) = royden_trace(f, z)?;
        sup = sup.max(t);
        nu = nu.max(rank);
    }
    let meta = format!("n={n} grid={} rank={nu}", grid.len());
    if nu == 0 {
        return Ok(CheckRecord::inequality("royden", ROYDEN_ANCHOR, Side::exact(sup), Side::exact(0.0))
            .informational("constant map, rank 0 skipped")
            .with_meta(meta));
    }
    Ok(
        CheckRecord::inequality("royden", ROYDEN_ANCHOR, Side::lower(sup), Side::exact(royden_bound(nu, n)))
            .with_tolerance(CLOSED_FORM_TOL)
            .with_meta(meta),
    )
}

const ROYDEN_ANCHOR: &str = "sum g^{ab} f^i_a conj(f^j_b) h_ij <= (2 nu/(nu+1)) (k/K)";

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Full-dimensional chain `v^C ≤ v^K`, `v^C ≤ v^KE/n!`, `v^KE ≤ v^K/n!`,
/// `v^K ≤ (b/a)^{2n} v^C`, plus the squeezing witnesses.
pub fn check_chain_full(domain: &DomainModel, sample: &[ComplexPoint], cfg: &MapSearchConfig) -> Result<Vec<CheckRecord>> {
    let n = domain.dim();
    let sq = squeezing_constants(domain, sample)?;
    let constant = volume_comparison_constant(&sq, n);
    let nf = factorial(n);
    let ke_available = domain.as_ball_image().is_some();
    let per_point = sample
        .par_iter()
        .enumerate()
        .map(|(k, p)| -> Result<Vec<CheckRecord>> {
            let meta = fmt_point(p);
            let vc = Side::from(&caratheodory_lower(domain, p, cfg)?);
            let vk = Side::from(&kobayashi_upper(domain, p, cfg)?);
            let mut out = vec![
                CheckRecord::inequality(format!("chain_full/a/{k:04}"), "v^C <= v^K", vc, vk).with_meta(meta.clone()),
                CheckRecord::inequality(format!("chain_full/c/{k:04}"), "v^K <= (b^{2n}/a^{2n}) v^C", vk, vc.scaled(constant))
                    .with_meta(format!("{meta} a={} b={}", sq.a, sq.b)),
            ];
            if ke_available {
                let ke = Side::from(&ke_density(domain, p, KeNormalization::Identity)?);
                out.push(
                    CheckRecord::inequality(format!("chain_full/b/{k:04}"), "v^C <= (1/n!) v^KE", vc, ke.scaled(1.0 / nf))
                        .with_meta(meta.clone()),
                );
                for (tag, norm) in [("identity", KeNormalization::Identity), ("rescaled", KeNormalization::Rescaled)] {
                    let ke = Side::from(&ke_density(domain, p, norm)?);
                    out.push(
                        CheckRecord::inequality(
                            format!("chain_full/b2_{tag}/{k:04}"),
                            "v^KE <= (1/n!) v^K",
                            ke,
                            vk.scaled(1.0 / nf),
                        )
                        .informational("normalization of v^KE is convention-sensitive; both readings reported")
                        .with_meta(meta.clone()),
                    );
                }
            }
            // proof maps of the squeezing comparison
            let f = caratheodory_squeezing_witness(p, sq.b);
            let wc = pullback_poincare(&f, p, 1.0)?.value();
            out.push(
                CheckRecord::inequality(
                    format!("chain_full/witness_c/{k:04}"),
                    "v^C(p) >= 1/b^{2n}",
                    Side::exact(wc),
                    Side::exact(sq.b.powi(-2 * n as i32)),
                )
                .expect_equality()
                .with_meta(meta.clone()),
            );
            let g = kobayashi_squeezing_witness(p, sq.a);
            let wk = 1.0 / jacobian_determinant_squared(&g.jacobian(&ComplexPoint::origin(n))?)?.value();
            out.push(
                CheckRecord::inequality(
                    format!("chain_full/witness_k/{k:04}"),
                    "v^K(p) <= 1/a^{2n}",
                    Side::exact(wk),
                    Side::exact(sq.a.powi(-2 * n as i32)),
                )
                .expect_equality()
                .with_meta(meta.clone()),
            );
            out.push(
                CheckRecord::inequality(format!("chain_full/witness_vc/{k:04}"), "v^C(p) >= 1/b^{2n}", Side::exact(wc), vc)
                    .with_meta(meta.clone()),
            );
            out.push(
                CheckRecord::inequality(format!("chain_full/witness_vk/{k:04}"), "v^K(p) <= 1/a^{2n}", vk, Side::exact(wk))
                    .with_meta(meta),
            );
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_point.into_iter().flatten().collect())
}

/// Empirical range of `v^B / v^C` over `sample`, using the certified lower
/// bound for `v^C`. The comparison constants themselves are not constructive.
pub fn check_bergman_ratio_range(
    domain: &DomainModel,
    sample: &[ComplexPoint],
    cfg: &MapSearchConfig,
) -> Result<Option<CheckRecord>> {
    if sample.is_empty() || bergman_density_closed(domain, &sample[0]).is_err() {
        return Ok(None);
    }
    let ratios = sample
        .par_iter()
        .map(|p| -> Result<f64> {
            let b = bergman_density_closed(domain, p)?.density();
            Ok(b / caratheodory_lower(domain, p, cfg)?.density())
        })
        .collect::<Result<Vec<_>>>()?;
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    Ok(Some(
        CheckRecord::inequality("bergman_ratio", "a1 v^C <= v^B <= a2 v^C", Side::exact(lo), Side::exact(hi))
            .informational("empirical min and max of v^B / v^C-lower on the sample")
            .with_meta(format!("points={}", sample.len())),
    ))
}

/// Restricted Kähler–Einstein density `det(P^T g^KE conj P)` in the slice coordinates.
pub fn restricted_ke_density(domain: &DomainModel, slice: &LinearSlice, p: &ComplexPoint) -> Result<f64> {
    let g = ke_metric_matrix(domain, p, KeNormalization::Rescaled)?;
    let q = slice.embedding();
    Ok((q.transpose() * g * q.conjugate()).determinant().re)
}

/// Restricted chain on a linear slice; `sample` holds slice coordinates.
pub fn check_chain_restricted(
    domain: &DomainModel,
    slice: &LinearSlice,
    sample: &[ComplexPoint],
    cfg: &MapSearchConfig,
) -> Result<Vec<CheckRecord>> {
    let (n, d) = (domain.dim(), slice.dim());
    let points = sample.iter().map(|w| slice.embed(w)).collect::<Result<Vec<_>>>()?;
    let sq = squeezing_constants(domain, &points)?;
    let constant = (sq.b / sq.a).powi(2 * d as i32);
    let ke_constant = restricted_ke_constant(n, d);
    let ke_available = domain.as_ball_image().is_some();
    let gram = slice.gram();
    let per_point = points
        .par_iter()
        .enumerate()
        .map(|(k, p)| -> Result<Vec<CheckRecord>> {
            let meta = fmt_point(p);
            let vc = Side::from(&restricted_caratheodory_lower(domain, slice, p, cfg)?);
            let vk = Side::from(&restricted_kobayashi_upper(domain, slice, p, cfg)?);
            let mut out = vec![
                CheckRecord::inequality(format!("chain_restricted/a/{k:04}"), "v^C_{X|Z} <= v^K_{X|Z}", vc, vk)
                    .with_meta(meta.clone()),
                CheckRecord::inequality(
                    format!("chain_restricted/c/{k:04}"),
                    "v^K_{X|Z} <= (b^{2d}/a^{2d}) v^C_{X|Z}",
                    vk,
                    vc.scaled(constant),
                )
                .with_meta(format!("{meta} a={} b={}", sq.a, sq.b)),
            ];
            if ke_available {
                let ke = restricted_ke_density(domain, slice, p)?;
                out.push(
                    CheckRecord::inequality(
                        format!("chain_restricted/b/{k:04}"),
                        "v^C_{X|Z} <= (d^d (n+1)^d/(d+1)^d) v^KE_{X|Z}",
                        vc,
                        Side::exact(ke_constant * ke),
                    )
                    .with_meta(meta.clone()),
                );
            }
            let f = restricted_caratheodory_squeezing_witness(slice, p, sq.b)?;
            let wc = gram_determinant(&(f.jacobian(p)?.into_matrix() * slice.embedding()));
            out.push(
                CheckRecord::inequality(
                    format!("chain_restricted/witness_c/{k:04}"),
                    "v^C_{X|Z}(p) >= 1/b^{2d}",
                    Side::exact(wc),
                    Side::exact(gram * sq.b.powi(-2 * d as i32)),
                )
                .expect_equality()
                .with_meta(meta.clone()),
            );
            let g = restricted_kobayashi_squeezing_witness(slice, p, sq.a)?;
            let wk = gram / gram_determinant(g.jacobian(&ComplexPoint::origin(d))?.matrix());
            out.push(
                CheckRecord::inequality(
                    format!("chain_restricted/witness_k/{k:04}"),
                    "v^K_{X|Z}(p) <= 1/a^{2d}",
                    Side::exact(wk),
                    Side::exact(gram * sq.a.powi(-2 * d as i32)),
                )
                .expect_equality()
                .with_meta(meta.clone()),
            );
            out.push(
                CheckRecord::inequality(format!("chain_restricted/witness_vc/{k:04}"), "v^C_{X|Z}(p) >= 1/b^{2d}", Side::exact(wc), vc)
                    .with_meta(meta.clone()),
            );
            out.push(
                CheckRecord::inequality(format!("chain_restricted/witness_vk/{k:04}"), "v^K_{X|Z}(p) <= 1/a^{2d}", vk, Side::exact(wk))
                    .with_meta(meta),
            );
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_point.into_iter().flatten().collect())
}

/// Metric comparisons at each `(p, v)`.
pub fn check_metric_chain(
    domain: &DomainModel,
    samples: &[(ComplexPoint, ComplexPoint)],
    cfg: &MapSearchConfig,
) -> Result<Vec<CheckRecord>> {
    let n = domain.dim();
    let points: Vec<ComplexPoint> = samples.iter().map(|(p, _)| p.clone()).collect();
    let sq = squeezing_constants(domain, &points)?;
    let consts = metric_comparison_constants(&sq, n);
    let ke_available = domain.as_ball_image().is_some();
    let per_sample = samples
        .par_iter()
        .enumerate()
        .map(|(k, (p, v))| -> Result<Vec<CheckRecord>> {
            let meta = format!("p={} v={}", fmt_point(p), fmt_point(v));
            let gc = Side::from(&caratheodory_metric_lower(domain, p, v, cfg)?);
            let gk = Side::from(&kobayashi_metric_upper(domain, p, v, cfg)?);
            let gb = Side::from(&bergman_metric(domain, p, v)?);
            let scale_note = "squeezing constants are not scale invariant";
            let mut out = vec![
                CheckRecord::inequality(format!("metric_chain/a/{k:04}"), "g^C <= g^K", gc, gk).with_meta(meta.clone()),
                CheckRecord::inequality(format!("metric_chain/a_bergman/{k:04}"), "g^C <= g^B", gc, gb).with_meta(meta.clone()),
                CheckRecord::inequality(
                    format!("metric_chain/c/{k:04}"),
                    "g^K <= (b^2/a^2) g^C",
                    gk,
                    gc.scaled(consts.kobayashi_caratheodory),
                )
                .with_meta(meta.clone()),
                CheckRecord::inequality(
                    format!("metric_chain/c_bergman/{k:04}"),
                    "g^B <= [(2 pi/a^3)(2b/a)^n]^2 g^K",
                    gb,
                    gk.scaled(consts.bergman_kobayashi),
                )
                .informational(scale_note)
                .with_meta(meta.clone()),
            ];
            if ke_available {
                let gke = Side::from(&ke_metric(domain, p, v)?);
                out.push(
                    CheckRecord::inequality(format!("metric_chain/b/{k:04}"), "g^C <= (n+1) g^KE", gc, gke.scaled((n + 1) as f64))
                        .with_meta(meta.clone()),
                );
                out.push(
                    CheckRecord::inequality(
                        format!("metric_chain/c_ke_lower/{k:04}"),
                        "(a^2/(b^2 n)) g^K <= g^KE",
                        gk.scaled(consts.ke_lower),
                        gke,
                    )
                    .informational(scale_note)
                    .with_meta(meta.clone()),
                );
                out.push(
                    CheckRecord::inequality(
                        format!("metric_chain/c_ke_upper/{k:04}"),
                        "g^KE <= (b^{4n-2} n^{n-1}/a^{2n-2}) g^K",
                        gke,
                        gk.scaled(consts.ke_upper),
                    )
                    .informational(scale_note)
                    .with_meta(meta),
                );
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_sample.into_iter().flatten().collect())
}

/// Strict plurisubharmonicity of `log V` at every point: the smallest
/// eigenvalue of `∂∂̄ log V` over the points must exceed [`STRICT_PSH_FLOOR`].
pub fn check_strict_psh<F>(id: &str, anchor: &str, v: &F, points: &[ComplexPoint]) -> Result<CheckRecord>
where
    F: Fn(&ComplexPoint) -> Result<f64>,
{
    let mut lowest = f64::INFINITY;
    for z in points {
        let h = ricci_of_volume_density(v, z, None)?;
        lowest = lowest.min(min_eigenvalue(&h));
    }
    let mut rec = CheckRecord::inequality(id, anchor, Side::exact(STRICT_PSH_FLOOR), Side::exact(lowest))
        .with_meta(format!("points={} min_eigenvalue={lowest:.6e}", points.len()));
    // strictness: the floor is a hard threshold, not a relative comparison
    rec.tolerance = 0.0;
    rec.refresh();
    Ok(rec)
}

/// `log v^C` strictly plurisubharmonic on a ball, where `v^C = μ^n_r(z - c)`.
pub fn check_psh_log_caratheodory(domain: &DomainModel, points: &[ComplexPoint]) -> Result<CheckRecord> {
    let (c, r) = domain
        .as_ball()
        .ok_or_else(|| Error::UnsupportedDomain("exact Carathéodory density needs a ball".into()))?;
    let n = domain.dim();
    let c = c.clone();
    check_strict_psh(
        "psh_log_caratheodory",
        "log(v^C) is strictly plurisubharmonic",
        &|z: &ComplexPoint| Ok(poincare_density(n, r, &z.sub(&c))?.value()),
        points,
    )
}

/// Which checks a suite runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    All,
    Volumes,
    Restricted,
    Metrics,
    Schwarz,
    Lipschitz,
    Psh,
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "all" => Self::All,
            "volumes" => Self::Volumes,
            "restricted" => Self::Restricted,
            "metrics" => Self::Metrics,
            "schwarz" => Self::Schwarz,
            "lipschitz" => Self::Lipschitz,
            "psh" => Self::Psh,
            other => return Err(Error::Parse(format!("unknown suite '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    /// Points for closed-form checks.
    pub grid_points: usize,
    /// Points for checks that run the extremal searches.
    pub search_points: usize,
    /// Random self-maps in the Schwarz suite.
    pub maps: usize,
    /// Relative depth of interior samples.
    pub depth: f64,
    pub seed: u64,
    pub search: MapSearchConfig,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            grid_points: 1000,
            search_points: 24,
            maps: 20,
            depth: 0.9,
            seed: 7,
            search: MapSearchConfig::default(),
        }
    }
}

/// Random unit tangent vectors paired with the points.
pub fn tangent_samples(points: &[ComplexPoint], seed: u64) -> Vec<(ComplexPoint, ComplexPoint)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    points
        .iter()
        .map(|p| (p.clone(), random_sphere_point(p.dim(), &mut rng)))
        .collect()
}

/// Runs a suite on `domain`; records are ordered by id.
pub fn run_suite(domain: &DomainModel, suite: Suite, cfg: &SuiteConfig) -> Result<Vec<CheckRecord>> {
    let n = domain.dim();
    let wants = |s: Suite| suite == Suite::All || suite == s;
    let mut records = Vec::new();
    let search_sample = domain.interior_samples(cfg.search_points, cfg.depth, cfg.seed);
    if wants(Suite::Volumes) {
        records.extend(check_chain_full(domain, &search_sample, &cfg.search)?);
        records.extend(check_bergman_ratio_range(domain, &search_sample, &cfg.search)?);
        let identity = CandidateMap::identity(n);
        records.extend(prefixed("identity", check_volume_decreasing(&identity, domain, domain, &search_sample, &cfg.search)?));
        // inclusion of the largest ball about the centre
        let c = domain.center();
        let r = domain.inradius(&c);
        let inner = DomainModel::ball(c.clone(), r)?;
        let inner_sample = inner.interior_samples(cfg.search_points, cfg.depth, cfg.seed ^ 1);
        records.extend(prefixed(
            "inclusion",
            check_volume_decreasing(&identity, &inner, domain, &inner_sample, &cfg.search)?,
        ));
    }
    if wants(Suite::Restricted) {
        let slice = LinearSlice::coordinate(n, n.saturating_sub(1).max(1))?;
        let base = domain.center();
        let slice = LinearSlice::new(slice.embedding().clone(), base.to_dvector())?;
        let through = domain_slice_sample(domain, &slice, cfg)?;
        records.extend(check_chain_restricted(domain, &slice, &through, &cfg.search)?);
    }
    if wants(Suite::Metrics) {
        records.extend(check_metric_chain(domain, &tangent_samples(&search_sample, cfg.seed ^ 2), &cfg.search)?);
    }
    if wants(Suite::Schwarz) {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 3);
        let ball = DomainModel::unit_ball(n);
        let grid = ball.interior_samples(cfg.grid_points.min(100), cfg.depth, cfg.seed ^ 4);
        for m in 0..cfg.maps {
            let f = CandidateMap::random_ball_self_map(n, &mut rng);
            records.extend(prefixed(&format!("map{m:03}"), check_ahlfors_schwarz(&f, &grid)?));
            let mut rec = check_mok_yau(&f, 1.0, &grid)?;
            rec.id = format!("mok_yau/map{m:03}");
            records.push(rec);
            let mut rec = check_royden(&f, &grid)?;
            rec.id = format!("royden/map{m:03}");
            records.push(rec);
        }
    }
    if wants(Suite::Lipschitz) {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 5);
        let pairs: Vec<_> = (0..cfg.grid_points)
            .map(|_| (random_ball_point(n, 0.5 * 0.999, &mut rng), random_ball_point(n, 0.5 * 0.999, &mut rng)))
            .collect();
        records.push(check_lipschitz(1.0, n, &pairs)?);
    }
    if wants(Suite::Psh) {
        let ball = DomainModel::unit_ball(n);
        let pts = ball.interior_samples(cfg.grid_points.min(100), cfg.depth, cfg.seed ^ 6);
        records.push(check_psh_log_caratheodory(&ball, &pts)?);
    }
    records.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(records)
}

fn prefixed(tag: &str, records: Vec<CheckRecord>) -> Vec<CheckRecord> {
    records
        .into_iter()
        .map(|mut r| {
            let (head, tail) = r.id.split_once('/').unwrap_or((r.id.as_str(), ""));
            r.id = format!("{head}/{tag}/{tail}");
            r
        })
        .collect()
}

/// Slice-coordinate samples whose embeddings lie well inside the domain.
fn domain_slice_sample(domain: &DomainModel, slice: &LinearSlice, cfg: &SuiteConfig) -> Result<Vec<ComplexPoint>> {
    let c = domain.center();
    let r = domain.inradius(&c) / slice.gram().powf(0.5 / slice.dim() as f64).max(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 7);
    let d = slice.dim();
    Ok((0..cfg.search_points)
        .map(|_| {
            let t = rng.random::<f64>().powf(1.0 / (2 * d) as f64);
            random_sphere_point(d, &mut rng).scale(cfg.depth * r * t)
        })
        .collect())
}

/// Number of decisive records that failed.
pub fn failures(records: &[CheckRecord]) -> usize {
    records.iter().filter(|r| r.failed()).count()
}

/// `(n!)^2 (n+1)^n / π^n`.
pub fn corollary_constant(n: usize) -> f64 {
    let f = factorial(n);
    f * f * ((n + 1) as f64).powi(n as i32) / PI.powi(n as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const KINDS: [BoundKind; 3] = [BoundKind::Exact, BoundKind::Lower, BoundKind::Upper];

    #[test]
    fn every_kind_pair_is_classified() {
        for lhs in KINDS {
            for rhs in KINDS {
                let expect = matches!(lhs, BoundKind::Exact | BoundKind::Lower)
                    && matches!(rhs, BoundKind::Exact | BoundKind::Upper);
                // a violated inequality must never be reported as a failure unless sound
                let rec = CheckRecord::inequality("x", "", Side { value: 2.0, kind: lhs }, Side { value: 1.0, kind: rhs });
                assert_eq!(certifies(lhs, rhs), expect);
                assert_eq!(rec.kind == CheckKind::Decisive, expect, "{lhs:?} {rhs:?}");
                assert_eq!(rec.pass, if expect { Some(false) } else { None });
                let rec = CheckRecord::inequality("x", "", Side { value: 1.0, kind: lhs }, Side { value: 2.0, kind: rhs });
                assert_eq!(rec.pass, if expect { Some(true) } else { None });
            }
        }
    }

    #[test]
    fn tolerances_and_equality() {
        let r = CheckRecord::inequality("x", "", Side::exact(1.0 + 1e-12), Side::exact(1.0));
        assert_eq!(r.pass, Some(true));
        assert_eq!(r.tolerance, CLOSED_FORM_TOL);
        let r = CheckRecord::inequality("x", "", Side::lower(1.0005), Side::exact(1.0));
        assert_eq!((r.pass, r.tolerance), (Some(true), OPTIMIZER_TOL));
        let r = CheckRecord::inequality("x", "", Side::exact(0.5), Side::exact(1.0)).expect_equality();
        assert_eq!(r.pass, Some(false));
        assert_relative_eq!(r.margin, 0.5);
    }

    #[test]
    fn volume_decreasing_examples() {
        let cfg = MapSearchConfig::default();
        let small = DomainModel::ball(ComplexPoint::origin(1), 0.5).unwrap();
        let disc = DomainModel::unit_ball(1);
        let recs = check_volume_decreasing(&CandidateMap::identity(1), &small, &disc, &[ComplexPoint::origin(1)], &cfg).unwrap();
        assert_relative_eq!(recs[0].lhs, 1.0, max_relative = 1e-12);
        assert_relative_eq!(recs[0].rhs, 4.0, max_relative = 1e-12);
        assert!(recs.iter().all(|r| r.pass == Some(true)));
        let recs = check_volume_decreasing(&CandidateMap::power(2), &disc, &disc, &[ComplexPoint::real(&[0.5])], &cfg).unwrap();
        assert_relative_eq!(recs[0].lhs, 1.0 / (1.0 - 1.0 / 16.0f64).powi(2), max_relative = 1e-12);
        assert_relative_eq!(recs[0].rhs, 16.0 / 9.0, max_relative = 1e-12);
        assert!(recs.iter().all(|r| r.pass == Some(true)));
        let id = check_volume_decreasing(&CandidateMap::identity(1), &disc, &disc, &[ComplexPoint::real(&[0.3])], &cfg).unwrap();
        assert!(id.iter().all(|r| r.margin.abs() < 1e-12));
    }

    #[test]
    fn lipschitz_constants() {
        assert_relative_eq!(lipschitz_constant(1, 1.0), 32.0);
        assert_relative_eq!(lipschitz_constant(2, 1.0), 512.0 * 2f64.sqrt(), max_relative = 1e-15);
        let p = ComplexPoint::real(&[0.1]);
        let rec = check_lipschitz(1.0, 1, &[(p.clone(), p)]).unwrap();
        assert_eq!((rec.lhs, rec.pass), (0.0, Some(true)));
        assert!(check_lipschitz(1.0, 1, &[(ComplexPoint::real(&[0.6]), ComplexPoint::origin(1))]).is_err());
    }

    #[test]
    fn schwarz_examples() {
        let z = ComplexPoint::real(&[0.5]);
        let rec = &check_ahlfors_schwarz(&CandidateMap::power(2), &[z.clone()]).unwrap()[0];
        assert_relative_eq!(rec.lhs / rec.rhs, 0.64, max_relative = 1e-12);
        let a = CandidateMap::ball_automorphism(ComplexPoint::real(&[0.3])).unwrap();
        let rec = &check_ahlfors_schwarz(&a, &[z.clone()]).unwrap()[0];
        assert_relative_eq!(rec.lhs, rec.rhs, max_relative = 1e-12);
        let k = CandidateMap::constant(&ComplexPoint::real(&[0.2]), 1);
        assert_eq!(check_ahlfors_schwarz(&k, &[z.clone()]).unwrap()[0].lhs, 0.0);
        let out = CandidateMap::scaling(1, 3.0);
        assert!(check_ahlfors_schwarz(&out, &[z]).is_err());
    }

    #[test]
    fn mok_yau_and_royden() {
        assert_relative_eq!(mok_yau_bound(1), 1.0);
        let grid = DomainModel::unit_ball(1).interior_samples(50, 0.95, 1);
        let rec = check_mok_yau(&CandidateMap::identity(1), 1.0, &grid).unwrap();
        assert_relative_eq!(rec.lhs, 0.5, max_relative = 1e-12);
        assert_eq!(rec.pass, Some(true));
        assert!(check_mok_yau(&CandidateMap::power(2), 1.0, &grid).unwrap().lhs <= 1.0);
        let k = CandidateMap::constant(&ComplexPoint::origin(1), 1);
        assert_eq!(check_mok_yau(&k, 1.0, &grid).unwrap().lhs, 0.0);

        assert_relative_eq!(royden_bound(1, 1), 2.0);
        let rec = check_royden(&CandidateMap::identity(1), &grid).unwrap();
        assert_relative_eq!(rec.lhs, 1.0, max_relative = 1e-12);
        assert_eq!(rec.pass, Some(true));
        let rec = check_royden(&CandidateMap::power(2), &grid).unwrap();
        let z = 0.5f64;
        let (t, _) = royden_trace(&CandidateMap::power(2), &ComplexPoint::real(&[z])).unwrap();
        assert_relative_eq!(t, 4.0 * z * z / (1.0 + z * z).powi(2), max_relative = 1e-12);
        assert!(rec.lhs <= 1.0 + 1e-12 && rec.pass == Some(true));
        let rec = check_royden(&k, &grid).unwrap();
        assert_eq!((rec.kind, rec.pass), (CheckKind::Informational, None));
    }

    #[test]
    fn chain_full_on_disc_and_polydisk() {
        let cfg = MapSearchConfig::default();
        let disc = DomainModel::unit_ball(1);
        let recs = check_chain_full(&disc, &[ComplexPoint::origin(1)], &cfg).unwrap();
        let get = |id: &str| recs.iter().find(|r| r.id.starts_with(id)).unwrap();
        let b = get("chain_full/b/");
        assert_relative_eq!(b.lhs, 1.0, max_relative = 1e-12);
        assert_relative_eq!(b.rhs, 2.0, max_relative = 1e-12);
        let identity = get("chain_full/b2_identity/");
        assert!(identity.margin < 0.0 && identity.pass.is_none());
        assert!(get("chain_full/b2_rescaled/").margin.abs() < 1e-12);
        assert_eq!(failures(&recs), 0);
        let c = get("chain_full/c/");
        assert!(c.margin.abs() < 1e-3);

        let poly = DomainModel::polydisk(vec![1.0, 1.0]).unwrap();
        let recs = check_chain_full(&poly, &[ComplexPoint::origin(2)], &cfg).unwrap();
        assert_eq!(failures(&recs), 0);
        let a = recs.iter().find(|r| r.id.starts_with("chain_full/a/")).unwrap();
        assert!(a.lhs >= 0.25 - 1e-12 && a.rhs <= 1.0 + 1e-12);
        let wc = recs.iter().find(|r| r.id.starts_with("chain_full/witness_c/")).unwrap();
        assert_relative_eq!(wc.lhs, 0.25, max_relative = 1e-12);
    }

    #[test]
    fn bergman_ratio_constant_on_homogeneous_domains() {
        let cfg = MapSearchConfig::default();
        for n in [1, 2] {
            let ball = DomainModel::unit_ball(n);
            let sample = ball.interior_samples(6, 0.8, 3);
            let rec = check_bergman_ratio_range(&ball, &sample, &cfg).unwrap().unwrap();
            assert!(rec.pass.is_none());
            assert!(rec.lhs > 0.0 && (rec.rhs / rec.lhs - 1.0).abs() < 1e-6, "{rec:?}");
        }
        let poly = DomainModel::polydisk(vec![1.0, 2.0]).unwrap();
        let rec = check_bergman_ratio_range(&poly, &poly.interior_samples(4, 0.8, 3), &cfg).unwrap().unwrap();
        assert!((rec.rhs / rec.lhs - 1.0).abs() < 1e-6, "{rec:?}");
    }

    #[test]
    fn chain_restricted_examples() {
        let cfg = MapSearchConfig::default();
        let ball = DomainModel::unit_ball(2);
        let z = LinearSlice::coordinate(2, 1).unwrap();
        let recs = check_chain_restricted(&ball, &z, &[ComplexPoint::origin(1)], &cfg).unwrap();
        let a = recs.iter().find(|r| r.id.starts_with("chain_restricted/a/")).unwrap();
        assert!((a.lhs - 1.0).abs() < 1e-3 && (a.rhs - 1.0).abs() < 1e-3);
        let b = recs.iter().find(|r| r.id.starts_with("chain_restricted/b/")).unwrap();
        assert_relative_eq!(b.rhs, 1.5, max_relative = 1e-12);
        assert_eq!(failures(&recs), 0);
        let poly = DomainModel::polydisk(vec![1.0, 1.0]).unwrap();
        let sample = vec![ComplexPoint::origin(1), ComplexPoint::real(&[0.3])];
        let recs = check_chain_restricted(&poly, &z, &sample, &cfg).unwrap();
        assert_eq!(failures(&recs), 0);
    }

    #[test]
    fn metric_chain_disc() {
        let cfg = MapSearchConfig::default();
        let disc = DomainModel::unit_ball(1);
        let recs = check_metric_chain(&disc, &[(ComplexPoint::origin(1), ComplexPoint::real(&[1.0]))], &cfg).unwrap();
        let get = |id: &str| recs.iter().find(|r| r.id.starts_with(id)).unwrap();
        assert_relative_eq!(get("metric_chain/a_bergman/").rhs, 2.0, max_relative = 1e-12);
        let b = get("metric_chain/b/");
        assert_relative_eq!(b.lhs, 1.0, max_relative = 1e-9);
        assert_relative_eq!(b.rhs, 2.0, max_relative = 1e-12);
        assert_eq!(failures(&recs), 0);
        let ball = DomainModel::unit_ball(2);
        let recs = check_metric_chain(&ball, &[(ComplexPoint::origin(2), ComplexPoint::real(&[1.0, 0.0]))], &cfg).unwrap();
        assert_relative_eq!(recs[1].rhs, 3.0, max_relative = 1e-12);
    }

    #[test]
    fn psh_examples() {
        let disc = DomainModel::unit_ball(1);
        let rec = check_psh_log_caratheodory(&disc, &[ComplexPoint::origin(1)]).unwrap();
        assert!((rec.rhs - 2.0).abs() < 1e-5 && rec.pass == Some(true));
        let ball = DomainModel::unit_ball(2);
        let rec = check_psh_log_caratheodory(&ball, &[ComplexPoint::origin(2)]).unwrap();
        assert!((rec.rhs - 3.0).abs() < 1e-5);
        let flat = check_strict_psh("flat", "", &|_: &ComplexPoint| Ok(1.0), &[ComplexPoint::origin(2)]).unwrap();
        assert_eq!(flat.pass, Some(false));
    }

    #[test]
    fn suite_is_deterministic_and_sorted() {
        let poly = DomainModel::polydisk(vec![1.0, 1.0]).unwrap();
        let cfg = SuiteConfig {
            grid_points: 40,
            search_points: 3,
            maps: 3,
            ..SuiteConfig::default()
        };
        let a = run_suite(&poly, Suite::All, &cfg).unwrap();
        let b = run_suite(&poly, Suite::All, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0].id <= w[1].id));
        assert_eq!(failures(&a), 0, "{:#?}", a.iter().filter(|r| r.failed()).collect::<Vec<_>>());
    }
}
