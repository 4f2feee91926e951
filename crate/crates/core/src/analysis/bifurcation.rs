//! Steady states of the generalized zigzag family across its slope parameter.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::iterate_orbit;
use crate::error::{invalid, Error, Result};
use crate::maps::{GeneralizedZigzagParams, PiecewiseAffineMap};

/// Default starting point: just above zero.
pub const DEFAULT_X0: f64 = 1e-9;
pub const MIN_TRANSIENT: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationConfig {
    pub m_lo: f64,
    pub m_hi: f64,
    pub n_m: usize,
    pub n_transient: usize,
    pub n_keep: usize,
    pub x0: f64,
    /// Per-step noise; keep it well below the resolution of interest.
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for BifurcationConfig {
    fn default() -> Self {
        Self {
            m_lo: -3.0,
            m_hi: 3.0,
            n_m: 1200,
            n_transient: 1000,
            n_keep: 200,
            x0: DEFAULT_X0,
            noise_std: 1e-12,
            seed: 0,
        }
    }
}

impl BifurcationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.m_lo >= -3.0 && self.m_hi <= 3.0 && self.m_lo < self.m_hi) {
            return invalid(format!(
                "m range [{}, {}] must be a non-empty subrange of (-3, 3)",
                self.m_lo, self.m_hi
            ));
        }
        if self.n_m == 0 || self.n_keep == 0 {
            return invalid("n_m and n_keep must be positive");
        }
        if self.n_transient < MIN_TRANSIENT {
            return invalid(format!("n_transient must be at least {MIN_TRANSIENT}"));
        }
        if !(self.x0 > -1.0 && self.x0 <= 1.0) {
            return invalid(format!("x0 = {} is outside (-1, 1]", self.x0));
        }
        Ok(())
    }

    /// Cell-centred grid, so the open endpoints are never sampled.
    pub fn m_values(&self) -> Vec<f64> {
        let h = (self.m_hi - self.m_lo) / self.n_m as f64;
        (0..self.n_m)
            .map(|i| self.m_lo + (i as f64 + 0.5) * h)
            .filter(|m| *m != 0.0)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum BifurcationColumn {
    Steady { m: f64, states: Vec<f64> },
    /// The orbit left the guard band at `step`.
    Unstable { m: f64, step: usize },
}

impl BifurcationColumn {
    pub fn m(&self) -> f64 {
        match self {
            BifurcationColumn::Steady { m, .. } | BifurcationColumn::Unstable { m, .. } => *m,
        }
    }

    pub fn states(&self) -> &[f64] {
        match self {
            BifurcationColumn::Steady { states, .. } => states,
            BifurcationColumn::Unstable { .. } => &[],
        }
    }
}

/// Iterates the generalized zigzag for each `m`, discards the transient and
/// keeps `n_keep` states. Escaping orbits are marked rather than aborting the sweep.
pub fn bifurcation_diagram(cfg: &BifurcationConfig) -> Result<Vec<BifurcationColumn>> {
    cfg.validate()?;
    cfg.m_values()
        .into_par_iter()
        .enumerate()
        .map(|(i, m)| {
            let map = PiecewiseAffineMap::generalized_zigzag(GeneralizedZigzagParams::new(m)?);
            let n = cfg.n_transient + cfg.n_keep;
            match iterate_orbit(&map, cfg.x0, n, cfg.noise_std, cfg.seed.wrapping_add(i as u64)) {
                Ok(orbit) => Ok(BifurcationColumn::Steady {
                    m,
                    states: orbit[cfg.n_transient..].to_vec(),
                }),
                Err(Error::OrbitEscape { step, .. }) => Ok(BifurcationColumn::Unstable { m, step }),
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// Writes `m,x` rows; an escaped orbit gets a single `m,unstable` row.
pub fn write_bifurcation_csv<W: Write>(columns: &[BifurcationColumn], mut w: W) -> Result<()> {
    writeln!(w, "m,x")?;
    for col in columns {
        match col {
            BifurcationColumn::Steady { m, states } => {
                for x in states {
                    writeln!(w, "{m},{x}")?;
                }
            }
            BifurcationColumn::Unstable { m, .. } => writeln!(w, "{m},unstable")?,
        }
    }
    Ok(())
}
