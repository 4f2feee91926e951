//! Stationary densities: empirical histograms, the four-step model of the
//! non-ideal map, and the Ulam discretization of the transfer operator.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dynamics::NoiseSource;
use crate::error::{invalid, Error, Result};
use crate::maps::PiecewiseAffineMap;

/// Samples dropped from the front of an orbit before histogramming.
pub const EMPIRICAL_WARMUP: usize = 100;

pub const DEFAULT_FP_BINS: usize = 512;
pub const DEFAULT_FP_TOL: f64 = 1e-10;
pub const FP_MAX_ITERATIONS: usize = 100_000;

/// Piecewise-constant probability density over sorted bin edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityHistogram {
    edges: Vec<f64>,
    density: Vec<f64>,
}

impl DensityHistogram {
    pub fn new(edges: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 || density.len() + 1 != edges.len() {
            return invalid("a histogram needs n + 1 edges for n bins");
        }
        if edges.windows(2).any(|w| !(w[0] < w[1])) {
            return invalid("histogram edges must be strictly increasing");
        }
        if density.iter().any(|d| !(*d >= 0.0)) {
            return invalid("densities must be non-negative");
        }
        Ok(Self { edges, density })
    }

    fn uniform_edges(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        let h = (hi - lo) / n as f64;
        let mut edges: Vec<f64> = (0..=n).map(|i| lo + i as f64 * h).collect();
        edges[n] = hi;
        edges
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn n_bins(&self) -> usize {
        self.density.len()
    }

    pub fn bin_centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn integral(&self) -> f64 {
        self.integrate(self.edges[0], *self.edges.last().unwrap())
    }

    /// Exact integral of the step function over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64) -> f64 {
        self.edges
            .windows(2)
            .zip(&self.density)
            .map(|(w, d)| {
                let overlap = b.min(w[1]) - a.max(w[0]);
                if overlap > 0.0 {
                    overlap * d
                } else {
                    0.0
                }
            })
            .sum()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.integral() - 1.0).abs() <= tol
    }

    /// `bin_center,density` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_center,density\n");
        for (c, d) in self.bin_centers().iter().zip(&self.density) {
            let _ = writeln!(out, "{c},{d}");
        }
        out
    }
}

/// Normalized histogram of an orbit over `domain`, skipping the first
/// [`EMPIRICAL_WARMUP`] samples. Samples in the guard band are counted in the
/// nearest boundary bin.
pub fn empirical_density(orbit: &[f64], n_bins: usize, domain: (f64, f64)) -> Result<DensityHistogram> {
    if n_bins == 0 {
        return invalid("n_bins must be positive");
    }
    if orbit.len() < 10 * n_bins || orbit.len() <= EMPIRICAL_WARMUP {
        return Err(Error::InsufficientData(format!(
            "{} samples is too few for {n_bins} bins",
            orbit.len()
        )));
    }
    let mut acc = HistogramAccumulator::new(domain, n_bins)?;
    for &x in &orbit[EMPIRICAL_WARMUP..] {
        acc.add(x);
    }
    acc.finish()
}

/// Streams a noisy orbit of `map` straight into a histogram without storing it.
pub fn empirical_density_of_map(
    map: &PiecewiseAffineMap,
    x0: f64,
    n_samples: usize,
    n_bins: usize,
    noise_std: f64,
    seed: u64,
) -> Result<DensityHistogram> {
    if n_samples < 10 * n_bins {
        return Err(Error::InsufficientData(format!(
            "{n_samples} samples is too few for {n_bins} bins"
        )));
    }
    let mut noise = NoiseSource::new(noise_std, seed)?;
    let mut acc = HistogramAccumulator::new(map.domain(), n_bins)?;
    let mut x = x0;
    for step in 0..n_samples + EMPIRICAL_WARMUP {
        if step >= EMPIRICAL_WARMUP {
            acc.add(x);
        }
        x = crate::dynamics::advance(map, x, &mut noise).map_err(|x| Error::OrbitEscape {
            step,
            x,
            stage: None,
            clock: None,
        })?;
    }
    acc.finish()
}

struct HistogramAccumulator {
    lo: f64,
    hi: f64,
    counts: Vec<u64>,
    total: u64,
}

impl HistogramAccumulator {
    fn new(domain: (f64, f64), n_bins: usize) -> Result<Self> {
        if !(domain.0 < domain.1) {
            return invalid("empty domain");
        }
        Ok(Self {
            lo: domain.0,
            hi: domain.1,
            counts: vec![0; n_bins],
            total: 0,
        })
    }

    #[inline]
    fn add(&mut self, x: f64) {
        let n = self.counts.len();
        let t = (x - self.lo) / (self.hi - self.lo) * n as f64;
        let i = if t <= 0.0 { 0 } else { (t as usize).min(n - 1) };
        self.counts[i] += 1;
        self.total += 1;
    }

    fn finish(self) -> Result<DensityHistogram> {
        let n = self.counts.len();
        let h = (self.hi - self.lo) / n as f64;
        let density = self
            .counts
            .iter()
            .map(|&c| c as f64 / (self.total as f64 * h))
            .collect();
        DensityHistogram::new(DensityHistogram::uniform_edges(self.lo, self.hi, n), density)
    }
}

/// Largest `|delta_o|` for which the four regions stay inside `(0, x_t1)`.
pub const FOUR_STEP_MAX_DELTA_O: f64 = 1.0 / 16.0;

/// Four-level approximation of the non-ideal map's stationary density on
/// `(0, 1)`, with regions `(0, a)`, `(a, 2a)`, `(2a, 4a)`, `(4a, 1)` where
/// `a = |delta_o|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourStepDensity {
    pub delta_o: f64,
    pub f0: f64,
    pub f1: f64,
    pub f2: f64,
    pub f_u: f64,
    pub region_edges: [f64; 5],
}

impl FourStepDensity {
    pub fn heights(&self) -> [f64; 4] {
        [self.f0, self.f1, self.f2, self.f_u]
    }

    /// Index of the region containing `x` (regions own their upper edge).
    pub fn region_of(&self, x: f64) -> usize {
        self.region_edges[1..4].iter().take_while(|&&e| x > e).count()
    }

    pub fn density_at(&self, x: f64) -> f64 {
        self.heights()[self.region_of(x)]
    }

    pub fn integral(&self) -> f64 {
        let e = &self.region_edges;
        self.heights()
            .iter()
            .enumerate()
            .map(|(i, h)| h * (e[i + 1] - e[i]))
            .sum()
    }
}

/// The four-step density for end-point deviation `delta_o`.
///
/// For `delta_o > 0` the heights are `(0, f_u/2, 3f_u/4, f_u)` with
/// `f_u = 1/(1 - 2 delta_o)`; for `delta_o < 0` they are
/// `(2f_u, 3f_u/2, 5f_u/4, f_u)` with `f_u = 1/(1 + 2|delta_o|)`. Both follow
/// from requiring unit mass.
pub fn four_step_model(delta_o: f64) -> Result<FourStepDensity> {
    if delta_o == 0.0 {
        return invalid("delta_o = 0 has degenerate regions; the ideal density is uniform");
    }
    if !(delta_o.abs() <= FOUR_STEP_MAX_DELTA_O) {
        return invalid(format!(
            "|delta_o| = {} exceeds the model's range {FOUR_STEP_MAX_DELTA_O}",
            delta_o.abs()
        ));
    }
    let a = delta_o.abs();
    let region_edges = [0.0, a, 2.0 * a, 4.0 * a, 1.0];
    let (f0, f1, f2, f_u) = if delta_o > 0.0 {
        let f_u = 1.0 / (1.0 - 2.0 * a);
        (0.0, 0.5 * f_u, 0.75 * f_u, f_u)
    } else {
        let f_u = 1.0 / (1.0 + 2.0 * a);
        (2.0 * f_u, 1.5 * f_u, 1.25 * f_u, f_u)
    };
    Ok(FourStepDensity {
        delta_o,
        f0,
        f1,
        f2,
        f_u,
        region_edges,
    })
}

/// Ulam discretization of the transfer operator on uniform cells.
///
/// Mass in a cell is assumed uniform; the image of each affine piece is then
/// uniform on its image interval and is shared among the cells it overlaps in
/// proportion to overlap length. Mass mapped outside the domain is dropped.
#[derive(Debug, Clone)]
pub struct TransferOperator {
    lo: f64,
    hi: f64,
    /// For each source cell, `(target cell, fraction of the source mass)`.
    columns: Vec<Vec<(usize, f64)>>,
}

impl TransferOperator {
    pub fn new(map: &PiecewiseAffineMap, n_bins: usize) -> Result<Self> {
        if n_bins == 0 {
            return invalid("n_bins must be positive");
        }
        let (lo, hi) = map.domain();
        let h = (hi - lo) / n_bins as f64;
        let fold = map.folds_magnitude();
        let mut columns = Vec::with_capacity(n_bins);
        for j in 0..n_bins {
            let (a, b) = (lo + j as f64 * h, lo + (j + 1) as f64 * h);
            let mut targets: Vec<(usize, f64)> = Vec::new();
            for seg in map.segments() {
                let (u, v) = (a.max(seg.lower), b.min(seg.upper));
                if !(v > u) {
                    continue;
                }
                let share = (v - u) / h;
                let (y0, y1) = {
                    let (p, q) = (seg.apply(u), seg.apply(v));
                    (p.min(q), p.max(q))
                };
                let pieces: Vec<(f64, f64)> = if fold && y0 < 0.0 {
                    if y1 <= 0.0 {
                        vec![(-y1, -y0)]
                    } else {
                        vec![(0.0, -y0), (0.0, y1)]
                    }
                } else {
                    vec![(y0, y1)]
                };
                let image_len = y1 - y0;
                for (s0, s1) in pieces {
                    spread(&mut targets, lo, h, n_bins, s0, s1, share / image_len);
                }
            }
            targets.sort_by_key(|t| t.0);
            targets.dedup_by(|next, kept| {
                if next.0 == kept.0 {
                    kept.1 += next.1;
                    true
                } else {
                    false
                }
            });
            columns.push(targets);
        }
        Ok(Self { lo, hi, columns })
    }

    pub fn n_bins(&self) -> usize {
        self.columns.len()
    }

    /// Pushes a vector of cell masses forward one step.
    pub fn apply(&self, mass: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; mass.len()];
        for (col, &m) in self.columns.iter().zip(mass) {
            if m == 0.0 {
                continue;
            }
            for &(i, w) in col {
                out[i] += w * m;
            }
        }
        out
    }

    /// Pushes a density forward one step and renormalizes it.
    pub fn apply_density(&self, density: &DensityHistogram) -> Result<DensityHistogram> {
        let h = (self.hi - self.lo) / self.n_bins() as f64;
        let mass: Vec<f64> = density.density().iter().map(|d| d * h).collect();
        self.to_histogram(normalize(self.apply(&mass)))
    }

    fn to_histogram(&self, mass: Vec<f64>) -> Result<DensityHistogram> {
        let n = self.n_bins();
        let h = (self.hi - self.lo) / n as f64;
        DensityHistogram::new(
            DensityHistogram::uniform_edges(self.lo, self.hi, n),
            mass.into_iter().map(|m| m / h).collect(),
        )
    }

    /// Power iteration from the uniform density until successive iterates
    /// differ by less than `tol` in L1.
    pub fn stationary(&self, tol: f64) -> Result<DensityHistogram> {
        let n = self.n_bins();
        let mut mass = vec![1.0 / n as f64; n];
        let mut residual = f64::INFINITY;
        for _ in 0..FP_MAX_ITERATIONS {
            let next = normalize(self.apply(&mass));
            residual = next.iter().zip(&mass).map(|(a, b)| (a - b).abs()).sum();
            mass = next;
            if residual < tol {
                return self.to_histogram(mass);
            }
        }
        Err(Error::NoConvergence {
            iterations: FP_MAX_ITERATIONS,
            residual,
        })
    }
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        v.iter_mut().for_each(|x| *x /= total);
    }
    v
}

/// Adds `weight_per_length * overlap` to every cell that `[s0, s1]` touches.
fn spread(
    targets: &mut Vec<(usize, f64)>,
    lo: f64,
    h: f64,
    n: usize,
    s0: f64,
    s1: f64,
    weight_per_length: f64,
) {
    let hi = lo + n as f64 * h;
    let (s0, s1) = (s0.max(lo), s1.min(hi));
    if !(s1 > s0) {
        return;
    }
    let first = (((s0 - lo) / h).floor() as usize).min(n - 1);
    let last = (((s1 - lo) / h).ceil() as usize).clamp(first + 1, n);
    for i in first..last {
        let (c0, c1) = (lo + i as f64 * h, lo + (i + 1) as f64 * h);
        let overlap = s1.min(c1) - s0.max(c0);
        if overlap > 0.0 {
            targets.push((i, overlap * weight_per_length));
        }
    }
}

/// Stationary density of an expanding map via the Ulam transfer matrix.
pub fn fp_fixed_point(map: &PiecewiseAffineMap, n_bins: usize, tol: f64) -> Result<DensityHistogram> {
    if !map.is_expanding() {
        return invalid("the transfer-operator fixed point needs every |slope| > 1");
    }
    if n_bins < 64 {
        return invalid(format!("n_bins must be at least 64, got {n_bins}"));
    }
    if !(tol > 0.0) {
        return invalid("tol must be positive");
    }
    TransferOperator::new(map, n_bins)?.stationary(tol)
}
