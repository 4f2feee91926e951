//! Two-state Markov description of the output bits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::density::DensityHistogram;
use crate::bitstream::BitStream;
use crate::error::{invalid, Error, Result};
use crate::maps::NonIdealParams;

/// Transition probabilities `p = P(0|0)`, `q = P(1|1)` and derived quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkovModel {
    pub p: f64,
    pub q: f64,
    /// Stationary bias `|1/2 - P(1)|`.
    pub b: f64,
    /// Second eigenvalue `|p + q - 1|` of the transition matrix.
    pub lambda1: f64,
    /// Correlation exponent `-log2(lambda1)`; infinite for uncorrelated chains.
    #[serde(with = "infinite_as_null")]
    pub c: f64,
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl MarkovModel {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0 && q > 0.0 && q < 1.0) {
            return invalid(format!("transition probabilities must lie in (0, 1), got p = {p}, q = {q}"));
        }
        let lambda1 = (p + q - 1.0).abs();
        let c = if lambda1 > 0.0 {
            -lambda1.log2()
        } else {
            f64::INFINITY
        };
        Ok(Self {
            p,
            q,
            b: exact_bias(p, q),
            lambda1,
            c,
        })
    }

    /// Stationary probability of emitting a 1.
    pub fn stationary_one(&self) -> f64 {
        (1.0 - self.p) / (2.0 - self.p - self.q)
    }

    /// Correlation between bits `k` apart in the ±1 picture, `(p + q - 1)^k`.
    pub fn lag_correlation(&self, k: u32) -> f64 {
        (self.p + self.q - 1.0).powi(k as i32)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn exact_bias(p: f64, q: f64) -> f64 {
    (p - q).abs() / (2.0 * (2.0 - p - q))
}

/// Bias from the stationary distribution, alongside the closed form
/// `|p - q| / (2 - p - q)` that omits the factor 2 (kept for comparison).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub exact: f64,
    pub closed_form: f64,
}

pub fn bias_of(model: &MarkovModel) -> Result<BiasReport> {
    let denom = 2.0 - model.p - model.q;
    if denom == 0.0 {
        return invalid("p + q = 2 describes an absorbing chain");
    }
    Ok(BiasReport {
        exact: exact_bias(model.p, model.q),
        closed_form: (model.p - model.q).abs() / denom,
    })
}

/// Transition probabilities by integrating a stationary density over the
/// branch intervals `(0, x_t1)`, `(x_t1, x_b)`, `(x_b, x_t2)`, `(x_t2, 1)`.
pub fn transition_probs_numeric(params: &NonIdealParams, density: &DensityHistogram) -> Result<MarkovModel> {
    if !density.is_normalized(1e-6) {
        return invalid(format!("density integrates to {}, not 1", density.integral()));
    }
    let edges = density.edges();
    if (edges[0] - 0.0).abs() > 1e-12 || (edges[edges.len() - 1] - 1.0).abs() > 1e-12 {
        return invalid("density must be defined on (0, 1)");
    }
    let zero_mass = density.integrate(0.0, params.x_b);
    let one_mass = density.integrate(params.x_b, 1.0);
    if zero_mass <= 0.0 || one_mass <= 0.0 {
        return invalid("density puts no mass on one of the symbols");
    }
    let p = density.integrate(0.0, params.x_t1) / zero_mass;
    let q = density.integrate(params.x_b, params.x_t2) / one_mass;
    MarkovModel::new(p, q)
}

/// First-order closed form `p = 1/2 + 3/2 dg1 + 2 dg2`, `q = 1/2 - dg2/2`.
pub fn transition_probs_analytic(dg1: f64, dg2: f64) -> Result<MarkovModel> {
    let limit = crate::analysis::density::FOUR_STEP_MAX_DELTA_O;
    if !(dg1.abs() <= limit && dg2.abs() <= limit) {
        return invalid(format!("|dg1|, |dg2| must not exceed {limit}, got {dg1}, {dg2}"));
    }
    MarkovModel::new(0.5 + 1.5 * dg1 + 2.0 * dg2, 0.5 - 0.5 * dg2)
}

/// Counts of consecutive-bit transitions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionCounts {
    pub n00: u64,
    pub n01: u64,
    pub n10: u64,
    pub n11: u64,
}

impl TransitionCounts {
    pub fn from_bits(bits: &BitStream) -> Self {
        let mut counts = [0u64; 4];
        let mut prev = None;
        for b in bits.iter() {
            if let Some(a) = prev {
                counts[(a as usize) << 1 | b as usize] += 1;
            }
            prev = Some(b);
        }
        Self {
            n00: counts[0],
            n01: counts[1],
            n10: counts[2],
            n11: counts[3],
        }
    }

    pub fn p_hat(&self) -> f64 {
        self.n00 as f64 / (self.n00 + self.n01) as f64
    }

    pub fn q_hat(&self) -> f64 {
        self.n11 as f64 / (self.n10 + self.n11) as f64
    }

    pub fn to_model(&self) -> Result<MarkovModel> {
        if self.n00 + self.n01 == 0 || self.n10 + self.n11 == 0 {
            return Err(Error::InsufficientData(
                "both symbols must occur to estimate transitions".into(),
            ));
        }
        MarkovModel::new(self.p_hat(), self.q_hat())
    }
}

/// Simulates `n` bits of the two-state chain, starting from its stationary law.
pub fn simulate_markov(model: &MarkovModel, n: usize, seed: u64) -> BitStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = rng.random::<f64>() < model.stationary_one();
    let mut out = BitStream::with_capacity(n);
    for _ in 0..n {
        out.push(state);
        let stay = if state { model.q } else { model.p };
        if rng.random::<f64>() >= stay {
            state = !state;
        }
    }
    out
}
