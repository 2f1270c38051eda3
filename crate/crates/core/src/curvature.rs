//! Kähler geometry of a potential by finite differences.
//!
//! With `∂_i = (∂_{x_i} - i∂_{y_i})/2` and `∂̄_j = (∂_{x_j} + i∂_{y_j})/2`,
//! the metric is `g_{ij̄} = ∂_i∂̄_j φ = (φ_{x_i x_j} + φ_{y_i y_j} + i(φ_{x_i y_j} - φ_{y_i x_j}))/4`
//! and the curvature tensor is
//! `R_{ij̄kl̄} = -∂_k∂̄_l g_{ij̄} + g^{pq̄} (∂_k g_{iq̄})(∂̄_l g_{pj̄})`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::ComplexPoint;

/// Smallest eigenvalue treated as nonnegative.
pub const PSD_TOLERANCE: f64 = 1e-8;

/// Outer step for derivatives of the metric, relative to the validity radius.
const OUTER_STEP: f64 = 5e-2;
const OUTER_LEVELS: usize = 2;
/// Step for the metric field that the outer differences act on.
const FIELD_STEP: f64 = 1e-2;

type Potential = Arc<dyn Fn(&ComplexPoint) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct KahlerPotential {
    evaluator: Potential,
    dim: usize,
    /// Radius of a ball about the origin on which the potential is smooth.
    validity_radius: f64,
}

impl fmt::Debug for KahlerPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KahlerPotential")
            .field("dim", &self.dim)
            .field("validity_radius", &self.validity_radius)
            .finish_non_exhaustive()
    }
}

impl KahlerPotential {
    pub fn from_fn<F>(dim: usize, validity_radius: f64, f: F) -> Result<Self>
    where
        F: Fn(&ComplexPoint) -> f64 + Send + Sync + 'static,
    {
        if dim == 0 || !(validity_radius > 0.0) {
            return Err(Error::InvalidConfig("potential needs dim >= 1 and a positive validity radius".into()));
        }
        Ok(Self {
            evaluator: Arc::new(f),
            dim,
            validity_radius,
        })
    }

    /// `-log(r^2 - |z|^2)` on `B^n_r`.
    pub fn ball(n: usize, r: f64) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::InvalidDomain(format!("ball radius {r} must be positive")));
        }
        Self::from_fn(n, r, move |z| -(r * r - z.norm_sqr()).ln())
    }

    /// `|z|^2`.
    pub fn flat(n: usize) -> Self {
        Self::from_fn(n, 1.0, |z| z.norm_sqr()).expect("valid flat potential")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn validity_radius(&self) -> f64 {
        self.validity_radius
    }

    pub fn evaluate(&self, z: &ComplexPoint) -> f64 {
        (self.evaluator)(z)
    }

    /// Inner finite-difference step `max(1e-3·radius, 1e-5)`.
    pub fn step(&self) -> f64 {
        (1e-3 * self.validity_radius).max(1e-5)
    }
}

fn shifted(x: &[f64], moves: &[(usize, f64)]) -> ComplexPoint {
    let mut y = x.to_vec();
    for &(a, d) in moves {
        y[a] += d;
    }
    ComplexPoint::from_real_parts(&y)
}

/// Richardson extrapolation of an `O(h^2)` rule evaluated at `h, h/2, …`.
fn richardson<G>(rule: G, h: f64, levels: usize) -> Vec<Complex64>
where
    G: Fn(f64) -> Vec<Complex64>,
{
    let mut table: Vec<Vec<Complex64>> = (0..=levels).map(|k| rule(h / 2f64.powi(k as i32))).collect();
    for order in 1..=levels {
        let factor = 4f64.powi(order as i32);
        table = table
            .windows(2)
            .map(|w| w[1].iter().zip(&w[0]).map(|(f, c)| (factor * f - c) / (factor - 1.0)).collect())
            .collect();
    }
    table.swap_remove(0)
}

/// Second real partial `∂_a ∂_b` of a vector-valued function by central
/// differences with `levels` Richardson steps.
fn second_partial<F>(f: &F, x: &[f64], a: usize, b: usize, h: f64, levels: usize) -> Vec<Complex64>
where
    F: Fn(&ComplexPoint) -> Vec<Complex64>,
{
    let at = |h: f64| -> Vec<Complex64> {
        if a == b {
            let (p, o, m) = (f(&shifted(x, &[(a, h)])), f(&shifted(x, &[])), f(&shifted(x, &[(a, -h)])));
            p.iter()
                .zip(&o)
                .zip(&m)
                .map(|((p, o), m)| (p - 2.0 * o + m) / (h * h))
                .collect()
        } else {
            let pp = f(&shifted(x, &[(a, h), (b, h)]));
            let pm = f(&shifted(x, &[(a, h), (b, -h)]));
            let mp = f(&shifted(x, &[(a, -h), (b, h)]));
            let mm = f(&shifted(x, &[(a, -h), (b, -h)]));
            (0..pp.len())
                .map(|i| (pp[i] - pm[i] - mp[i] + mm[i]) / (4.0 * h * h))
                .collect()
        }
    };
    richardson(at, h, levels)
}

/// First real partial `∂_a` with `levels` Richardson steps.
fn first_partial<F>(f: &F, x: &[f64], a: usize, h: f64, levels: usize) -> Vec<Complex64>
where
    F: Fn(&ComplexPoint) -> Vec<Complex64>,
{
    let at = |h: f64| -> Vec<Complex64> {
        let p = f(&shifted(x, &[(a, h)]));
        let m = f(&shifted(x, &[(a, -h)]));
        p.iter().zip(&m).map(|(p, m)| (p - m) / (2.0 * h)).collect()
    };
    richardson(at, h, levels)
}

/// `∂_k∂̄_l F` for every `k, l`, entry-wise over the components of `F`.
/// Result index: `[k][l][component]`.
fn mixed_wirtinger<F>(f: &F, z: &ComplexPoint, h: f64, levels: usize) -> Vec<Vec<Vec<Complex64>>>
where
    F: Fn(&ComplexPoint) -> Vec<Complex64>,
{
    let n = z.dim();
    let x = z.to_real_parts();
    let m = 2 * n;
    let mut real: Vec<Vec<Option<Vec<Complex64>>>> = vec![vec![None; m]; m];
    for a in 0..m {
        for b in a..m {
            let d = second_partial(f, &x, a, b, h, levels);
            real[b][a] = Some(d.clone());
            real[a][b] = Some(d);
        }
    }
    let get = |a: usize, b: usize| real[a][b].as_ref().expect("filled");
    let i = Complex64::new(0.0, 1.0);
    (0..n)
        .map(|k| {
            (0..n)
                .map(|l| {
                    let (xk, yk, xl, yl) = (2 * k, 2 * k + 1, 2 * l, 2 * l + 1);
                    (0..get(0, 0).len())
                        .map(|c| 0.25 * (get(xk, xl)[c] + get(yk, yl)[c] + i * (get(xk, yl)[c] - get(yk, xl)[c])))
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// Mixed complex Hessian `∂_i∂̄_j f` of a real function.
pub fn mixed_hessian<F>(f: &F, z: &ComplexPoint, h: f64) -> Result<DMatrix<Complex64>>
where
    F: Fn(&ComplexPoint) -> f64,
{
    let wrapped = |p: &ComplexPoint| vec![Complex64::new(f(p), 0.0)];
    let d = mixed_wirtinger(&wrapped, z, h, 1);
    let n = z.dim();
    let g = DMatrix::from_fn(n, n, |i, j| d[i][j][0]);
    if g.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::StepSizeFailure(h));
    }
    Ok(hermitize(g))
}

fn hermitize(g: DMatrix<Complex64>) -> DMatrix<Complex64> {
    (&g + g.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Kähler metric `g_{ij̄}(z)` of the potential.
pub fn metric_at(phi: &KahlerPotential, z: &ComplexPoint) -> Result<DMatrix<Complex64>> {
    z.check_dim(phi.dim)?;
    mixed_hessian(&|p: &ComplexPoint| phi.evaluate(p), z, phi.step())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureReport {
    pub point: ComplexPoint,
    pub metric: DMatrix<Complex64>,
    /// `R_{ij̄kl̄}` stored at index `((i·n + j)·n + k)·n + l`.
    pub curvature: Vec<Complex64>,
    /// Holomorphic sectional curvature along the first coordinate direction.
    pub hsc: f64,
    pub ricci: DMatrix<Complex64>,
    pub scalar: f64,
    pub positive_definite: bool,
    pub fd_step: f64,
    pub outer_step: f64,
    /// Largest violation of the Kähler symmetries of `R`.
    pub symmetry_defect: f64,
    /// Change of the metric between the two outer step sizes.
    pub error_estimate: f64,
}

impl CurvatureReport {
    pub fn dim(&self) -> usize {
        self.metric.nrows()
    }

    pub fn r(&self, i: usize, j: usize, k: usize, l: usize) -> Complex64 {
        let n = self.dim();
        self.curvature[((i * n + j) * n + k) * n + l]
    }
}

fn inverse(g: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    if min_eigenvalue(g) <= 0.0 {
        return Err(Error::SingularMetric);
    }
    g.clone().try_inverse().ok_or(Error::SingularMetric)
}

/// Smallest eigenvalue of a hermitian matrix.
pub fn min_eigenvalue(g: &DMatrix<Complex64>) -> f64 {
    hermitize(g.clone())
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn is_positive_semidefinite(g: &DMatrix<Complex64>) -> bool {
    min_eigenvalue(g) >= -PSD_TOLERANCE
}

/// Full curvature report of the potential at `z`.
pub fn curvature_at(phi: &KahlerPotential, z: &ComplexPoint) -> Result<CurvatureReport> {
    let n = phi.dim;
    z.check_dim(n)?;
    let h = phi.step();
    let outer = OUTER_STEP * phi.validity_radius;
    let field = h.max(FIELD_STEP * phi.validity_radius);
    let g = metric_at(phi, z)?;
    let g_inv = inverse(&g)?;
    let flat = |p: &ComplexPoint| -> Vec<Complex64> {
        match mixed_hessian(&|q: &ComplexPoint| phi.evaluate(q), p, field) {
            Ok(m) => m.iter().copied().collect(),
            Err(_) => vec![Complex64::new(f64::NAN, 0.0); n * n],
        }
    };
    // column-major flattening: entry (i, j) sits at i + j·n
    let idx = |i: usize, j: usize| i + j * n;

    let second = mixed_wirtinger(&flat, z, outer, OUTER_LEVELS);
    let x = z.to_real_parts();
    let ii = Complex64::new(0.0, 1.0);
    let partial_x: Vec<Vec<Complex64>> = (0..2 * n).map(|a| first_partial(&flat, &x, a, outer, OUTER_LEVELS)).collect();
    // ∂_k g and ∂̄_l g
    let dk: Vec<Vec<Complex64>> = (0..n)
        .map(|k| {
            partial_x[2 * k]
                .iter()
                .zip(&partial_x[2 * k + 1])
                .map(|(dx, dy)| 0.5 * (dx - ii * dy))
                .collect()
        })
        .collect();
    let dl_bar: Vec<Vec<Complex64>> = (0..n)
        .map(|l| {
            partial_x[2 * l]
                .iter()
                .zip(&partial_x[2 * l + 1])
                .map(|(dx, dy)| 0.5 * (dx + ii * dy))
                .collect()
        })
        .collect();

    let mut r = vec![Complex64::new(0.0, 0.0); n * n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut v = -second[k][l][idx(i, j)];
                    for p in 0..n {
                        for q in 0..n {
                            v += g_inv[(q, p)] * dk[k][idx(i, q)] * dl_bar[l][idx(p, j)];
                        }
                    }
                    r[((i * n + j) * n + k) * n + l] = v;
                }
            }
        }
    }
    if r.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::StepSizeFailure(outer));
    }
    let at = |i: usize, j: usize, k: usize, l: usize| r[((i * n + j) * n + k) * n + l];
    let mut defect: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    defect = defect
                        .max((at(i, j, k, l) - at(k, j, i, l)).norm())
                        .max((at(i, j, k, l) - at(i, l, k, j)).norm());
                }
            }
        }
    }

    let mut ricci = DMatrix::from_fn(n, n, |k, l| {
        let mut s = Complex64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                s += g_inv[(j, i)] * at(i, j, k, l);
            }
        }
        s
    });
    ricci = hermitize(ricci);
    let scalar = trace_with(&g_inv, &ricci);
    let e1 = ComplexPoint::new((0..n).map(|i| Complex64::new(if i == 0 { 1.0 } else { 0.0 }, 0.0)).collect());
    let g_fine = metric_at(
        &KahlerPotential {
            evaluator: phi.evaluator.clone(),
            dim: n,
            validity_radius: phi.validity_radius * 0.5,
        },
        z,
    )?;
    let mut report = CurvatureReport {
        point: z.clone(),
        positive_definite: min_eigenvalue(&g) > 0.0,
        metric: g.clone(),
        curvature: r,
        hsc: 0.0,
        ricci,
        scalar,
        fd_step: h,
        outer_step: outer,
        symmetry_defect: defect,
        error_estimate: (&g - g_fine).norm(),
    };
    report.hsc = holomorphic_sectional_curvature(&report, &e1)?;
    Ok(report)
}

/// `Σ (G^{-1})_{lk} A_{kl}`.
fn trace_with(g_inv: &DMatrix<Complex64>, a: &DMatrix<Complex64>) -> f64 {
    let n = a.nrows();
    let mut s = Complex64::new(0.0, 0.0);
    for k in 0..n {
        for l in 0..n {
            s += g_inv[(l, k)] * a[(k, l)];
        }
    }
    s.re
}

/// `R(v, v̄, v, v̄) / g(v, v̄)^2`.
pub fn holomorphic_sectional_curvature(report: &CurvatureReport, v: &ComplexPoint) -> Result<f64> {
    let n = report.dim();
    v.check_dim(n)?;
    if v.norm_sqr() == 0.0 {
        return Err(Error::ZeroVector);
    }
    let c = v.coords();
    let mut num = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    num += report.r(i, j, k, l) * c[i] * c[j].conj() * c[k] * c[l].conj();
                }
            }
        }
    }
    let norm = crate::metrics::hermitian_form(&report.metric, v);
    Ok(num.re / (norm * norm))
}

/// Ricci form `Ric_{kl̄} = g^{ij̄} R_{ij̄kl̄}` and scalar curvature `S = g^{kl̄} Ric_{kl̄}`.
pub fn ricci_and_scalar(report: &CurvatureReport) -> Result<(DMatrix<Complex64>, f64)> {
    let g_inv = inverse(&report.metric)?;
    let n = report.dim();
    let ricci = hermitize(DMatrix::from_fn(n, n, |k, l| {
        let mut s = Complex64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                s += g_inv[(j, i)] * report.r(i, j, k, l);
            }
        }
        s
    }));
    let scalar = trace_with(&g_inv, &ricci);
    Ok((ricci, scalar))
}

/// Mixed Hessian `∂_i∂̄_j log V` of a positive volume density. `step` defaults
/// to `1e-3` when `None`.
pub fn ricci_of_volume_density<F>(v: &F, z: &ComplexPoint, step: Option<f64>) -> Result<DMatrix<Complex64>>
where
    F: Fn(&ComplexPoint) -> Result<f64>,
{
    let here = v(z)?;
    if !(here > 0.0) {
        return Err(Error::VanishingDensity);
    }
    let log_v = |p: &ComplexPoint| match v(p) {
        Ok(x) if x > 0.0 => x.ln(),
        _ => f64::NAN,
    };
    mixed_hessian(&log_v, z, step.unwrap_or(1e-3))
}

/// `det(∂∂̄ log V) / V`, the ratio `(√−1/2 ∂∂̄ log V)^n / (n! V)` in Lebesgue normalization.
pub fn monge_ampere_ratio<F>(v: &F, z: &ComplexPoint, step: Option<f64>) -> Result<f64>
where
    F: Fn(&ComplexPoint) -> Result<f64>,
{
    let h = ricci_of_volume_density(v, z, step)?;
    Ok(h.determinant().re / v(z)?)
}
