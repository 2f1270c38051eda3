//! Multi-start Nelder–Mead minimization with Latin-hypercube seeds.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which map families the extremal searches may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapFamily {
    /// Every family applicable to the domain.
    All,
    /// Only closed-form witnesses (automorphisms, product and affine transport).
    ClosedForm,
    /// Only the optimizer-driven ball families.
    Search,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapSearchConfig {
    pub family: MapFamily,
    /// Half-width of the centre search box relative to the domain's bounding box.
    pub box_scale: f64,
    pub starts: usize,
    /// Maximum Nelder–Mead iterations per start.
    pub local_steps: usize,
    pub tolerance: f64,
    pub seed: u64,
    /// Offer the exact ball witness (centre of symmetry) as a candidate.
    pub use_closed_form_witnesses: bool,
}

impl Default for MapSearchConfig {
    fn default() -> Self {
        Self {
            family: MapFamily::All,
            box_scale: 1.0,
            starts: 8,
            local_steps: 2000,
            tolerance: 1e-12,
            seed: 7,
            use_closed_form_witnesses: true,
        }
    }
}

impl MapSearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.starts == 0 {
            return Err(Error::InvalidConfig("multi-start count must be at least 1".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidConfig("tolerance must be positive".into()));
        }
        if !(self.box_scale > 0.0) {
            return Err(Error::InvalidConfig("box scale must be positive".into()));
        }
        Ok(())
    }

    pub fn search_only(mut self) -> Self {
        self.family = MapFamily::Search;
        self.use_closed_form_witnesses = false;
        self
    }

    pub(crate) fn allows_search(&self) -> bool {
        self.family != MapFamily::ClosedForm
    }

    pub(crate) fn allows_closed_form(&self) -> bool {
        self.family != MapFamily::Search && self.use_closed_form_witnesses
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub starts: usize,
}

/// Nelder–Mead from a single start. Non-finite objective values are treated as `+∞`.
pub fn nelder_mead<F>(f: &F, x0: &[f64], step: f64, max_iter: usize, tol: f64) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    let k = x0.len();
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut evaluations = 0;
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(k + 1);
    simplex.push((x0.to_vec(), eval(x0)));
    for i in 0..k {
        let mut x = x0.to_vec();
        x[i] += step;
        let v = eval(&x);
        simplex.push((x, v));
    }
    evaluations += k + 1;
    if k == 0 {
        return Minimum {
            x: x0.to_vec(),
            value: simplex[0].1,
            evaluations,
            starts: 1,
        };
    }
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[k].1;
        let spread = simplex
            .iter()
            .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if best.is_finite() && (worst - best).abs() <= tol * (best.abs() + tol) && spread <= tol.sqrt() {
            break;
        }
        let centroid: Vec<f64> = (0..k)
            .map(|j| simplex[..k].iter().map(|(x, _)| x[j]).sum::<f64>() / k as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[k].0)
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };
        let xr = along(-1.0);
        let fr = eval(&xr);
        evaluations += 1;
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = eval(&xe);
            evaluations += 1;
            simplex[k] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[k - 1].1 {
            simplex[k] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[k].1 {
                let x = along(-0.5);
                let v = eval(&x);
                (x, v)
            } else {
                let x = along(0.5);
                let v = eval(&x);
                (x, v)
            };
            evaluations += 1;
            if fc < simplex[k].1.min(fr) {
                simplex[k] = (xc, fc);
            } else {
                let x_best = simplex[0].0.clone();
                for item in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = item.0.iter().zip(&x_best).map(|(a, b)| b + 0.5 * (a - b)).collect();
                    let v = eval(&x);
                    *item = (x, v);
                }
                evaluations += k;
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    Minimum {
        x,
        value,
        evaluations,
        starts: 1,
    }
}

/// Latin-hypercube sample of `count` points in the box `[lo, hi]`.
pub fn latin_hypercube(lo: &[f64], hi: &[f64], count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = lo.len();
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(k);
    for j in 0..k {
        let mut strata: Vec<usize> = (0..count).collect();
        strata.shuffle(&mut rng);
        columns.push(
            strata
                .into_iter()
                .map(|s| lo[j] + (hi[j] - lo[j]) * (s as f64 + rng.random::<f64>()) / count as f64)
                .collect(),
        );
    }
    (0..count).map(|i| (0..k).map(|j| columns[j][i]).collect()).collect()
}

fn lexicographic(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            other => return other,
        }
    }
    std::cmp::Ordering::Equal
}

/// Minimizes `f` from the explicit `starts` plus `cfg.starts` Latin-hypercube
/// seeds in `[lo, hi]` (scaled by `cfg.box_scale` about the box centre). Starts
/// run in parallel; the reduction picks the smallest value, ties broken by the
/// lexicographically smallest parameter vector, so the result does not depend
/// on scheduling. Each start is polished by one restart from its optimum.
pub fn multi_start_minimize<F>(f: &F, lo: &[f64], hi: &[f64], starts: &[Vec<f64>], cfg: &MapSearchConfig) -> Minimum
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let mid: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let half: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (b - a) * cfg.box_scale).collect();
    let blo: Vec<f64> = mid.iter().zip(&half).map(|(m, h)| m - h).collect();
    let bhi: Vec<f64> = mid.iter().zip(&half).map(|(m, h)| m + h).collect();
    let mut seeds: Vec<Vec<f64>> = starts.to_vec();
    seeds.extend(latin_hypercube(&blo, &bhi, cfg.starts, cfg.seed));
    let step = half.iter().copied().fold(0.0, f64::max).max(1e-3) * 0.1;
    let runs: Vec<Minimum> = seeds
        .par_iter()
        .map(|x0| {
            let first = nelder_mead(f, x0, step, cfg.local_steps, cfg.tolerance);
            let polish = nelder_mead(f, &first.x, step * 1e-2, cfg.local_steps, cfg.tolerance);
            let evaluations = first.evaluations + polish.evaluations;
            let mut best = if polish.value <= first.value { polish } else { first };
            best.evaluations = evaluations;
            best
        })
        .collect();
    let total: usize = runs.iter().map(|m| m.evaluations).sum();
    let count = runs.len();
    let mut best = runs
        .into_iter()
        .min_by(|a, b| a.value.total_cmp(&b.value).then_with(|| lexicographic(&a.x, &b.x)))
        .expect("at least one start");
    best.evaluations = total;
    best.starts = count;
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn finds_rosenbrock_minimum() {
        let m = nelder_mead(&rosenbrock, &[-1.2, 1.0], 0.1, 5000, 1e-14);
        assert!((m.x[0] - 1.0).abs() < 1e-5 && (m.x[1] - 1.0).abs() < 1e-5, "{m:?}");
    }

    #[test]
    fn handles_infeasible_regions() {
        let f = |x: &[f64]| if x[0] < 0.0 { f64::INFINITY } else { (x[0] - 0.3).powi(2) };
        let m = nelder_mead(&f, &[0.5], 0.1, 1000, 1e-14);
        assert!((m.x[0] - 0.3).abs() < 1e-6);
    }

    #[test]
    fn latin_hypercube_strata() {
        let pts = latin_hypercube(&[0.0, -1.0], &[1.0, 1.0], 10, 3);
        for j in 0..2 {
            let mut strata: Vec<usize> = pts
                .iter()
                .map(|p| {
                    let (lo, hi) = if j == 0 { (0.0, 1.0) } else { (-1.0, 1.0) };
                    ((p[j] - lo) / (hi - lo) * 10.0) as usize
                })
                .collect();
            strata.sort_unstable();
            assert_eq!(strata, (0..10).collect::<Vec<_>>());
        }
    }

    #[test]
    fn multi_start_is_deterministic_and_global() {
        // two wells, the deeper one at x = 2
        let f = |x: &[f64]| ((x[0] + 1.0).powi(2) - 0.5).min((x[0] - 2.0).powi(2) - 1.0);
        let cfg = MapSearchConfig { starts: 6, ..Default::default() };
        let a = multi_start_minimize(&f, &[-3.0], &[3.0], &[vec![-1.0]], &cfg);
        let b = multi_start_minimize(&f, &[-3.0], &[3.0], &[vec![-1.0]], &cfg);
        assert_eq!(a, b);
        assert!((a.x[0] - 2.0).abs() < 1e-5);
        assert_eq!(a.starts, 7);
    }

    #[test]
    fn config_validation() {
        assert!(MapSearchConfig { starts: 0, ..Default::default() }.validate().is_err());
        assert!(MapSearchConfig { tolerance: 0.0, ..Default::default() }.validate().is_err());
        assert!(MapSearchConfig::default().validate().is_ok());
    }
}
