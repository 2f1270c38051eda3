//! Cubature over regions of `C^n`.
//!
//! Balls use "torus" coordinates: `z_i = c_i + R sqrt(x_i) e^{iθ_i}` with
//! `x` in the standard simplex, reached from the unit cube by the collapsed
//! (Duffy) map. In these coordinates Lebesgue measure is
//! `2^{-n} R^{2n} J(u) du dθ`. Radial and box directions use Gauss–Legendre;
//! full angular periods use the equispaced trapezoid rule, which is exact
//! for `e^{ikθ}` with `|k|` below the node count. Each refinement level
//! doubles every node count; the error estimate is the difference between
//! the last two levels.

use std::fmt;
use std::sync::Arc;

use gauss_quad::legendre::GaussLegendre;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ComplexPoint, VolumeDensity};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Gauss–Legendre nodes per radial or box direction at level 0.
    pub radial_nodes: usize,
    /// Nodes per angular direction at level 0.
    pub angular_nodes: usize,
    /// Maximum number of node doublings after the first level.
    pub max_refinements: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Samples for Monte Carlo regions at level 0.
    pub mc_samples: usize,
    /// Relative standard-error target for Monte Carlo regions.
    pub mc_rel_tol: f64,
    pub seed: u64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            radial_nodes: 16,
            angular_nodes: 32,
            max_refinements: 4,
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            mc_samples: 20_000,
            mc_rel_tol: 1e-2,
            seed: 0x5eed,
        }
    }
}

impl QuadratureConfig {
    pub fn with_tolerance(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }
}

/// One angular sector of a star-shaped planar region, `{ c + t e^{iφ} : start ≤ φ ≤ end, 0 ≤ t < radius(φ) }`.
#[derive(Clone)]
pub struct StarWedge {
    pub start: f64,
    pub end: f64,
    pub radius: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for StarWedge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StarWedge")
            .field("start", &self.start)
            .field("end", &self.end)
            .finish_non_exhaustive()
    }
}

/// Integration region.
#[derive(Clone)]
pub enum Region {
    /// Planar box `[re.0, re.1] × [im.0, im.1]` in `C^1`.
    Rect { re: (f64, f64), im: (f64, f64) },
    /// Euclidean ball in `C^n`.
    Ball { center: ComplexPoint, radius: f64 },
    /// Product of discs in `C^n`.
    Polydisk { center: ComplexPoint, radii: Vec<f64> },
    /// Cartesian product; coordinates are concatenated in order.
    Product(Vec<Region>),
    /// Image `{ A y + b : y in base }` of a complex-affine map.
    Affine {
        base: Box<Region>,
        matrix: DMatrix<Complex64>,
        offset: ComplexPoint,
    },
    /// Planar region star-shaped about `center`, split into wedges.
    Star { center: Complex64, wedges: Vec<StarWedge> },
    /// Irregular region given by an indicator inside a real bounding box of
    /// `R^{2n}` (interleaved `x, y` coordinates); integrated by Monte Carlo.
    Sampled {
        lower: Vec<f64>,
        upper: Vec<f64>,
        indicator: Arc<dyn Fn(&ComplexPoint) -> bool + Send + Sync>,
    },
}

impl fmt::Debug for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Rect { re, im } => f.debug_struct("Rect").field("re", re).field("im", im).finish(),
            Self::Ball { center, radius } => f
                .debug_struct("Ball")
                .field("center", center)
                .field("radius", radius)
                .finish(),
            Self::Polydisk { center, radii } => f
                .debug_struct("Polydisk")
                .field("center", center)
                .field("radii", radii)
                .finish(),
            Self::Product(parts) => f.debug_tuple("Product").field(parts).finish(),
            Self::Affine { base, matrix, offset } => f
                .debug_struct("Affine")
                .field("base", base)
                .field("matrix", matrix)
                .field("offset", offset)
                .finish(),
            Self::Star { center, wedges } => f
                .debug_struct("Star")
                .field("center", center)
                .field("wedges", wedges)
                .finish(),
            Self::Sampled { lower, upper, .. } => f
                .debug_struct("Sampled")
                .field("lower", lower)
                .field("upper", upper)
                .finish_non_exhaustive(),
        }
    }
}

/// Nodes and weights of a cubature rule.
#[derive(Debug, Clone, Default)]
pub struct Cubature {
    pub points: Vec<ComplexPoint>,
    pub weights: Vec<f64>,
}

impl Cubature {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    fn tensor(&self, other: &Cubature) -> Cubature {
        let mut out = Cubature::default();
        for (p, w) in self.points.iter().zip(&self.weights) {
            for (q, v) in other.points.iter().zip(&other.weights) {
                out.points.push(ComplexPoint::concat(&[p.clone(), q.clone()]));
                out.weights.push(w * v);
            }
        }
        out
    }
}

/// Result of a numerical integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
    pub level: usize,
}

fn gauss_legendre_unit(nodes: usize) -> Vec<(f64, f64)> {
    // mapped from [-1, 1] to [0, 1]
    GaussLegendre::new(nodes.max(2))
        .expect("at least two nodes")
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
        .collect()
}

fn trapezoid_period(nodes: usize) -> Vec<(f64, f64)> {
    let n = nodes.max(1);
    let h = std::f64::consts::TAU / n as f64;
    (0..n).map(|k| (k as f64 * h, h)).collect()
}

/// Collapsed map from `[0,1]^n` to the simplex, returning the simplex point and Jacobian.
fn duffy(u: &[f64]) -> (Vec<f64>, f64) {
    let mut x = Vec::with_capacity(u.len());
    let mut remaining = 1.0;
    let mut jac = 1.0;
    for (k, &uk) in u.iter().enumerate() {
        x.push(remaining * uk);
        if k > 0 {
            jac *= remaining;
        }
        remaining *= 1.0 - uk;
    }
    (x, jac)
}

fn multi_index(counts: usize, dims: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = counts.pow(dims as u32);
    (0..total).map(move |mut idx| {
        let mut out = vec![0; dims];
        for slot in out.iter_mut() {
            *slot = idx % counts;
            idx /= counts;
        }
        out
    })
}

impl Region {
    /// Ambient complex dimension.
    pub fn dim(&self) -> usize {
        match self {
            Self::Rect { .. } | Self::Star { .. } => 1,
            Self::Ball { center, .. } | Self::Polydisk { center, .. } => center.dim(),
            Self::Product(parts) => parts.iter().map(Region::dim).sum(),
            Self::Affine { offset, .. } => offset.dim(),
            Self::Sampled { lower, .. } => lower.len() / 2,
        }
    }

    pub fn is_monte_carlo(&self) -> bool {
        match self {
            Self::Sampled { .. } => true,
            Self::Product(parts) => parts.iter().any(Region::is_monte_carlo),
            Self::Affine { base, .. } => base.is_monte_carlo(),
            _ => false,
        }
    }

    /// Deterministic cubature at refinement `level` (node counts scale by `2^level`).
    pub fn cubature(&self, level: usize, cfg: &QuadratureConfig) -> Result<Cubature> {
        let scale = 1usize << level;
        let m = cfg.radial_nodes * scale;
        let k = cfg.angular_nodes * scale;
        match self {
            Self::Rect { re, im } => {
                let gl = gauss_legendre_unit(m);
                let (wx, wy) = (re.1 - re.0, im.1 - im.0);
                let mut out = Cubature::default();
                for &(u, a) in &gl {
                    for &(v, b) in &gl {
                        out.points.push(ComplexPoint::new(vec![Complex64::new(
                            re.0 + wx * u,
                            im.0 + wy * v,
                        )]));
                        out.weights.push(a * b * wx * wy);
                    }
                }
                Ok(out)
            }
            Self::Ball { center, radius } => {
                let n = center.dim();
                if n == 0 || *radius <= 0.0 {
                    return Err(Error::InvalidDomain(format!(
                        "ball needs dim >= 1 and radius > 0 (dim {n}, radius {radius})"
                    )));
                }
                let gl = gauss_legendre_unit(m);
                let tr = trapezoid_period(k);
                let r2 = radius * radius;
                let prefactor = r2.powi(n as i32) / 2f64.powi(n as i32);
                let mut out = Cubature::default();
                for ui in multi_index(gl.len(), n) {
                    let u: Vec<f64> = ui.iter().map(|&i| gl[i].0).collect();
                    let wu: f64 = ui.iter().map(|&i| gl[i].1).product();
                    let (x, jac) = duffy(&u);
                    let moduli: Vec<f64> = x.iter().map(|xi| radius * xi.sqrt()).collect();
                    for ti in multi_index(tr.len(), n) {
                        let coords = (0..n)
                            .map(|i| center[i] + Complex64::from_polar(moduli[i], tr[ti[i]].0))
                            .collect();
                        let wt: f64 = ti.iter().map(|&i| tr[i].1).product();
                        out.points.push(ComplexPoint::new(coords));
                        out.weights.push(prefactor * jac * wu * wt);
                    }
                }
                Ok(out)
            }
            Self::Polydisk { center, radii } => {
                if radii.len() != center.dim() || radii.iter().any(|&r| r <= 0.0) {
                    return Err(Error::InvalidDomain("polydisk radii".into()));
                }
                let mut acc: Option<Cubature> = None;
                for (i, &r) in radii.iter().enumerate() {
                    let disc = Region::Ball {
                        center: ComplexPoint::new(vec![center[i]]),
                        radius: r,
                    }
                    .cubature(level, cfg)?;
                    acc = Some(match acc {
                        None => disc,
                        Some(a) => a.tensor(&disc),
                    });
                }
                acc.ok_or_else(|| Error::InvalidDomain("empty polydisk".into()))
            }
            Self::Product(parts) => {
                let mut acc: Option<Cubature> = None;
                for part in parts {
                    let c = part.cubature(level, cfg)?;
                    acc = Some(match acc {
                        None => c,
                        Some(a) => a.tensor(&c),
                    });
                }
                acc.ok_or_else(|| Error::InvalidDomain("empty product".into()))
            }
            Self::Affine { base, matrix, offset } => {
                let det = matrix.clone().determinant().norm_sqr();
                if det == 0.0 {
                    return Err(Error::InvalidDomain("affine map is singular".into()));
                }
                let mut c = base.cubature(level, cfg)?;
                for (p, w) in c.points.iter_mut().zip(c.weights.iter_mut()) {
                    let y = matrix * p.to_dvector() + offset.to_dvector();
                    *p = ComplexPoint::from_dvector(&y);
                    *w *= det;
                }
                Ok(c)
            }
            Self::Star { center, wedges } => {
                let gl_r = gauss_legendre_unit(m);
                let gl_a = gauss_legendre_unit(k);
                let mut out = Cubature::default();
                for wedge in wedges {
                    let span = wedge.end - wedge.start;
                    for &(a, wa) in &gl_a {
                        let phi = wedge.start + span * a;
                        let rmax = (wedge.radius)(phi);
                        for &(t, wt) in &gl_r {
                            let rho = rmax * t;
                            out.points
                                .push(ComplexPoint::new(vec![center + Complex64::from_polar(rho, phi)]));
                            out.weights.push(span * wa * rmax * wt * rho);
                        }
                    }
                }
                Ok(out)
            }
            Self::Sampled { .. } => Err(Error::InvalidConfig(
                "sampled regions have no deterministic cubature".into(),
            )),
        }
    }

    fn monte_carlo<F>(&self, f: &F, samples: usize, seed: u64) -> Result<(f64, f64)>
    where
        F: Fn(&ComplexPoint) -> f64 + Sync,
    {
        let Self::Sampled { lower, upper, indicator } = self else {
            return Err(Error::InvalidConfig("not a sampled region".into()));
        };
        if lower.len() != upper.len() || lower.len() % 2 != 0 {
            return Err(Error::InvalidDomain("sampled bounding box".into()));
        }
        let volume: f64 = lower.iter().zip(upper).map(|(a, b)| b - a).product();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Vec<f64>> = (0..samples)
            .map(|_| {
                lower
                    .iter()
                    .zip(upper)
                    .map(|(a, b)| rng.random_range(*a..*b))
                    .collect()
            })
            .collect();
        let values: Vec<f64> = pts
            .par_iter()
            .map(|xy| {
                let p = ComplexPoint::from_real_parts(xy);
                if indicator(&p) {
                    f(&p)
                } else {
                    0.0
                }
            })
            .collect();
        let mean = values.iter().sum::<f64>() / samples as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (samples.max(2) - 1) as f64;
        Ok((volume * mean, volume * (var / samples as f64).sqrt()))
    }
}

fn weighted_sum<F>(c: &Cubature, f: &F) -> f64
where
    F: Fn(&ComplexPoint) -> f64 + Sync,
{
    let vals: Vec<f64> = c
        .points
        .par_iter()
        .zip(c.weights.par_iter())
        .map(|(p, w)| w * f(p))
        .collect();
    // sequential reduction keeps the result independent of thread scheduling
    vals.iter().sum()
}

fn integrate_real<F>(f: &F, region: &Region, cfg: &QuadratureConfig) -> Result<Integral>
where
    F: Fn(&ComplexPoint) -> f64 + Sync,
{
    if let Region::Sampled { .. } = region {
        let mut samples = cfg.mc_samples.max(16);
        let mut best = (0.0, f64::INFINITY);
        for level in 0..=cfg.max_refinements {
            best = region.monte_carlo(f, samples, cfg.seed.wrapping_add(level as u64))?;
            if best.1 <= cfg.mc_rel_tol * best.0.abs() || best.1 <= cfg.abs_tol {
                return Ok(Integral {
                    value: best.0,
                    error: best.1,
                    evaluations: samples,
                    level,
                });
            }
            samples *= 2;
        }
        return Err(Error::AccuracyNotReached {
            best: best.0,
            error: best.1,
        });
    }
    if region.is_monte_carlo() {
        return Err(Error::InvalidConfig(
            "Monte Carlo regions cannot be nested in products or affine images".into(),
        ));
    }
    let mut evaluations = 0;
    let c0 = region.cubature(0, cfg)?;
    evaluations += c0.len();
    let mut prev = weighted_sum(&c0, f);
    let mut last_err = f64::INFINITY;
    for level in 1..=cfg.max_refinements.max(1) {
        let c = region.cubature(level, cfg)?;
        evaluations += c.len();
        let cur = weighted_sum(&c, f);
        if !cur.is_finite() {
            return Err(Error::AccuracyNotReached {
                best: prev,
                error: f64::INFINITY,
            });
        }
        let err = (cur - prev).abs();
        if err <= cfg.abs_tol.max(cfg.rel_tol * cur.abs()) {
            return Ok(Integral {
                value: cur,
                error: err,
                evaluations,
                level,
            });
        }
        prev = cur;
        last_err = err;
    }
    Err(Error::AccuracyNotReached {
        best: prev,
        error: last_err,
    })
}

/// Integrates a density over `region` with respect to Lebesgue measure.
pub fn integrate_density<F>(f: F, region: &Region, cfg: &QuadratureConfig) -> Result<Integral>
where
    F: Fn(&ComplexPoint) -> VolumeDensity + Sync,
{
    integrate_real(&|p: &ComplexPoint| f(p).value(), region, cfg)
}

/// Integrates a complex-valued function; the error is the larger of the
/// real and imaginary error estimates.
pub fn integrate_complex<F>(f: F, region: &Region, cfg: &QuadratureConfig) -> Result<(Complex64, f64)>
where
    F: Fn(&ComplexPoint) -> Complex64 + Sync,
{
    let re = integrate_real(&|p: &ComplexPoint| f(p).re, region, cfg)?;
    let im = match integrate_real(&|p: &ComplexPoint| f(p).im, region, cfg) {
        Ok(i) => i,
        // an identically vanishing imaginary part converges trivially
        Err(Error::AccuracyNotReached { best, error }) if best.abs() < cfg.abs_tol.max(1e-12) => Integral {
            value: best,
            error,
            evaluations: 0,
            level: 0,
        },
        Err(e) => return Err(e),
    };
    Ok((Complex64::new(re.value, im.value), re.error.max(im.error)))
}
