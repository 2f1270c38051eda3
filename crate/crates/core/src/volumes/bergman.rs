//! Bergman densities: closed-form kernels on the model domains and a
//! monomial-Gram approximation for any domain with a deterministic cubature.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use super::{BoundKind, Diagnostics, VolumeEstimate};
use crate::domains::{DomainKind, DomainModel};
use crate::error::{Error, Result};
use crate::forms::{ComplexPoint, QuadratureConfig, VolumeDensity};

/// Gram matrices whose (equilibrated) condition number exceeds this trigger degree reduction.
pub const GRAM_CONDITION_LIMIT: f64 = 1e10;

const CHUNK: usize = 4096;

/// Default total degree of the monomial basis in dimension `n`.
pub fn default_bergman_degree(n: usize) -> usize {
    match n {
        0 | 1 => 12,
        2 => 8,
        3 => 6,
        _ => 4,
    }
}

fn closed_value(domain: &DomainModel, p: &ComplexPoint) -> Result<f64> {
    match domain.kind() {
        DomainKind::Ball { center, radius } => {
            let n = domain.dim();
            let gap = radius * radius - p.distance(center).powi(2);
            let fact: f64 = (1..=n).map(|k| k as f64).product();
            Ok(fact / std::f64::consts::PI.powi(n as i32) * radius * radius / gap.powi(n as i32 + 1))
        }
        DomainKind::Polydisk { radii } => Ok(p
            .coords()
            .iter()
            .zip(radii)
            .map(|(z, r)| r * r / (std::f64::consts::PI * (r * r - z.norm_sqr()).powi(2)))
            .product()),
        DomainKind::Product { factors } => {
            let mut start = 0;
            let mut v = 1.0;
            for f in factors {
                v *= closed_value(f, &p.block(start, f.dim()))?;
                start += f.dim();
            }
            Ok(v)
        }
        DomainKind::AffineImage {
            base, matrix, offset, inverse,
        } => {
            let q = ComplexPoint::from_dvector(&(inverse * (p.to_dvector() - offset)));
            let det = matrix.clone().determinant().norm_sqr();
            Ok(closed_value(base, &q)? / det)
        }
    }
}

/// Exact Bergman density on balls, polydisks, products and their affine images.
pub fn bergman_density_closed(domain: &DomainModel, p: &ComplexPoint) -> Result<VolumeEstimate> {
    if !domain.contains(p)? {
        return Err(Error::OutsideDomain(format!("{p:?}")));
    }
    let v = closed_value(domain, p)?;
    Ok(VolumeEstimate::exact(VolumeDensity::try_new(v, domain.dim())?, "closed-form-kernel"))
}

/// Exponents `α` with `|α| ≤ degree`, ordered by total degree.
fn graded_exponents(n: usize, degree: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for total in 0..=degree {
        let mut current = vec![0; n];
        fill(&mut out, &mut current, 0, total);
    }
    out
}

fn fill(out: &mut Vec<Vec<usize>>, current: &mut Vec<usize>, slot: usize, left: usize) {
    if slot + 1 == current.len() {
        current[slot] = left;
        out.push(current.clone());
        return;
    }
    for k in (0..=left).rev() {
        current[slot] = k;
        fill(out, current, slot + 1, left - k);
    }
}

fn basis_values(w: &ComplexPoint, exponents: &[Vec<usize>], degree: usize) -> Vec<Complex64> {
    let powers: Vec<Vec<Complex64>> = w
        .coords()
        .iter()
        .map(|&z| {
            let mut pw = Vec::with_capacity(degree + 1);
            let mut acc = Complex64::new(1.0, 0.0);
            for _ in 0..=degree {
                pw.push(acc);
                acc *= z;
            }
            pw
        })
        .collect();
    exponents
        .iter()
        .map(|a| a.iter().enumerate().map(|(j, &k)| powers[j][k]).product())
        .collect()
}

struct Gram {
    matrix: DMatrix<Complex64>,
    points: usize,
}

fn gram(
    domain: &DomainModel,
    centre: &ComplexPoint,
    scale: f64,
    exponents: &[Vec<usize>],
    degree: usize,
    extra_nodes: usize,
    quad: &QuadratureConfig,
) -> Result<Gram> {
    let n = domain.dim();
    // node counts that integrate every Gram entry exactly on the analytic kinds
    let cfg = QuadratureConfig {
        radial_nodes: (degree + n + 1).div_ceil(2) + 1 + extra_nodes,
        angular_nodes: degree + 2 + extra_nodes,
        ..*quad
    };
    let cub = domain.region().cubature(0, &cfg)?;
    let b = exponents.len();
    let partial: Vec<(DMatrix<f64>, DMatrix<f64>)> = cub
        .points
        .par_chunks(CHUNK)
        .zip(cub.weights.par_chunks(CHUNK))
        .map(|(pts, wts)| {
            let mut x = DMatrix::<f64>::zeros(pts.len(), b);
            let mut y = DMatrix::<f64>::zeros(pts.len(), b);
            for (q, p) in pts.iter().enumerate() {
                let vals = basis_values(&p.sub(centre).scale(1.0 / scale), exponents, degree);
                for (i, v) in vals.iter().enumerate() {
                    x[(q, i)] = v.re;
                    y[(q, i)] = v.im;
                }
            }
            let mut wx = x.clone();
            let mut wy = y.clone();
            for (q, &w) in wts.iter().enumerate() {
                wx.row_mut(q).scale_mut(w);
                wy.row_mut(q).scale_mut(w);
            }
            let re = x.transpose() * &wx + y.transpose() * &wy;
            let im = x.transpose() * &wy - y.transpose() * &wx;
            (re, im)
        })
        .collect();
    let mut re = DMatrix::<f64>::zeros(b, b);
    let mut im = DMatrix::<f64>::zeros(b, b);
    for (r, i) in &partial {
        re += r;
        im += i;
    }
    Ok(Gram {
        matrix: DMatrix::from_fn(b, b, |i, j| Complex64::new(re[(i, j)], im[(i, j)])),
        points: cub.len(),
    })
}

fn equilibrated_condition(g: &DMatrix<Complex64>) -> f64 {
    let d: Vec<f64> = (0..g.nrows()).map(|i| g[(i, i)].re.max(1e-300).sqrt().recip()).collect();
    let scaled = DMatrix::from_fn(g.nrows(), g.ncols(), |i, j| g[(i, j)] * d[i] * d[j]);
    let eig = scaled.symmetric_eigen();
    let max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// `v^* G^{-1} v` for the leading `size × size` block.
fn kernel_value(g: &DMatrix<Complex64>, v: &DVector<Complex64>, size: usize) -> Result<f64> {
    let block = g.view((0, 0), (size, size)).into_owned();
    let rhs = v.rows(0, size).into_owned();
    let chol = block
        .cholesky()
        .ok_or(Error::SingularMetric)?;
    let x = chol.solve(&rhs);
    Ok(rhs.dotc(&x).re)
}

/// Rough size of the domain about `centre`, used to scale the monomials.
fn extent(domain: &DomainModel, centre: &ComplexPoint, quad: &QuadratureConfig) -> Result<f64> {
    let cfg = QuadratureConfig {
        radial_nodes: 3,
        angular_nodes: 4,
        ..*quad
    };
    let cub = domain.region().cubature(0, &cfg)?;
    Ok(cub.points.iter().map(|p| p.distance(centre)).fold(0.0, f64::max).max(1e-12))
}

fn count_up_to(exponents: &[Vec<usize>], degree: usize) -> usize {
    exponents.iter().filter(|a| a.iter().sum::<usize>() <= degree).count()
}

/// Bergman density from the monomial forms `(z - c)^α dz`, `|α| ≤ degree`,
/// orthonormalized with a numerically integrated Gram matrix. The result is a
/// lower bound, nondecreasing in `degree`.
pub fn bergman_density_numeric(
    domain: &DomainModel,
    p: &ComplexPoint,
    degree: usize,
    quad: &QuadratureConfig,
) -> Result<VolumeEstimate> {
    if !domain.contains(p)? {
        return Err(Error::OutsideDomain(format!("{p:?}")));
    }
    let n = domain.dim();
    let centre = domain.center();
    let scale = extent(domain, &centre, quad)?;
    let exponents = graded_exponents(n, degree);
    let g = gram(domain, &centre, scale, &exponents, degree, 0, quad)?;
    let mut notes = Vec::new();

    let mut used = degree;
    loop {
        let size = count_up_to(&exponents, used);
        let block = g.matrix.view((0, 0), (size, size)).into_owned();
        let cond = equilibrated_condition(&block);
        if cond <= GRAM_CONDITION_LIMIT || used == 0 {
            if used < degree {
                notes.push(format!(
                    "Gram matrix ill-conditioned; degree reduced from {degree} to {used} (condition {cond:.3e})"
                ));
            }
            break;
        }
        used -= 1;
    }

    let v = DVector::from_vec(basis_values(&p.sub(&centre).scale(1.0 / scale), &exponents, degree))
        .map(|z| z.conj());
    let size = count_up_to(&exponents, used);
    let value = kernel_value(&g.matrix, &v, size)?;
    let truncation = if used > 0 {
        value - kernel_value(&g.matrix, &v, count_up_to(&exponents, used - 1))?
    } else {
        value
    };
    let mut error = truncation.abs();
    let mut evaluations = g.points;
    if quad.max_refinements > 0 {
        let finer = gram(domain, &centre, scale, &exponents, degree, 2, quad)?;
        evaluations += finer.points;
        let check = kernel_value(&finer.matrix, &v, size)?;
        error = error.max((check - value).abs());
    }
    Ok(VolumeEstimate {
        value: VolumeDensity::try_new(value.max(0.0), n)?,
        bound_kind: BoundKind::Lower,
        witness: None,
        diagnostics: Diagnostics {
            family: format!("monomial-gram(degree {used}, basis {size})"),
            evaluations,
            starts: 0,
            error_estimate: Some(error),
            notes,
        },
    })
}
