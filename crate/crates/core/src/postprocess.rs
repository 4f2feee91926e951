//! Bias and correlation removal.
//!
//! The XOR debiaser feeds every input bit through `z_n = d_n XOR z_{n-l}` with
//! an `l`-stage shift register that starts at zero. The first `l` outputs are
//! copies of the input and are dropped, so only steady-state output is emitted.
//! `l` must be coprime to the number of pipelined map stages.

use num_integer::gcd;
use serde::{Deserialize, Serialize};

use crate::analysis::markov::{MarkovModel, TransitionCounts};
use crate::bitstream::{BitStream, PostprocessRecord};
use crate::error::{invalid, Error, Result};

pub const DEFAULT_EPSILON: f64 = 1e-6;
const MAX_REGISTER_LENGTH: usize = 1 << 20;

/// Pairs `01 -> 0`, `10 -> 1`; `00` and `11` are discarded.
pub fn von_neumann(bits: &BitStream) -> BitStream {
    let mut out = BitStream::with_capacity(bits.len() / 4);
    for i in (0..bits.len() / 2).map(|k| 2 * k) {
        match (bits.get(i), bits.get(i + 1)) {
            (0, 1) => out.push(false),
            (1, 0) => out.push(true),
            _ => {}
        }
    }
    let mut meta = bits.meta().clone();
    meta.postprocess.push(PostprocessRecord::VonNeumann);
    out.with_meta(meta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DebiasConfig {
    l: usize,
    stages: usize,
}

impl DebiasConfig {
    pub fn new(l: usize, stages: usize) -> Result<Self> {
        if l < 2 {
            return invalid(format!("shift register length must be at least 2, got {l}"));
        }
        if stages == 0 {
            return invalid("stages must be at least 1");
        }
        if gcd(l, stages) != 1 {
            return invalid(format!("register length {l} is not coprime to {stages} stages"));
        }
        Ok(Self { l, stages })
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn stages(&self) -> usize {
        self.stages
    }
}

/// The complete `z` sequence, including the `l` start-up outputs.
pub fn xor_debias_full(bits: &BitStream, l: usize) -> BitStream {
    let mut register = vec![false; l.max(1)];
    let mut out = BitStream::with_capacity(bits.len());
    for (n, d) in bits.iter().enumerate() {
        let slot = n % register.len();
        let z = (d == 1) ^ register[slot];
        register[slot] = z;
        out.push(z);
    }
    out
}

/// Undoes [`xor_debias_full`]: `d_n = z_n XOR z_{n-l}` with zeros before the start.
pub fn xor_recover(z: &BitStream, l: usize) -> BitStream {
    (0..z.len())
        .map(|n| {
            let prev = if n >= l { z.get(n - l) } else { 0 };
            (z.get(n) ^ prev) == 1
        })
        .collect()
}

/// Steady-state output of the XOR debiaser; `len - l` bits.
pub fn xor_debias(bits: &BitStream, config: &DebiasConfig) -> Result<BitStream> {
    let l = config.l;
    if bits.len() <= l {
        return Err(Error::InsufficientData(format!(
            "{} bits cannot feed a register of length {l}",
            bits.len()
        )));
    }
    let full = xor_debias_full(bits, l);
    let mut out = full.slice_from(l);
    let mut meta = bits.meta().clone();
    meta.postprocess.push(PostprocessRecord::XorDebias {
        l,
        stages: config.stages,
    });
    out = out.with_meta(meta);
    Ok(out)
}

/// Smallest register length `l >= 2` with `lambda1^l < epsilon` and `gcd(stages, l) = 1`.
pub fn choose_l(model: &MarkovModel, epsilon: f64, stages: usize) -> Result<usize> {
    if !(model.lambda1 < 1.0) {
        return invalid(format!("lambda1 = {} gives no decay", model.lambda1));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return invalid(format!("epsilon must lie in (0, 1), got {epsilon}"));
    }
    if stages == 0 {
        return invalid("stages must be at least 1");
    }
    (2..MAX_REGISTER_LENGTH)
        .find(|&l| model.lambda1.powi(l as i32) < epsilon && gcd(stages, l) == 1)
        .ok_or_else(|| Error::InvalidParameter("no register length below the search limit".into()))
}

/// Smallest length above `l` coprime to both `l` and `stages`.
pub fn next_coprime(l: usize, stages: usize) -> usize {
    (l + 1..)
        .find(|&k| gcd(k, stages) == 1 && gcd(k, l) == 1)
        .expect("coprime integers are unbounded")
}

/// A debiasing pass optionally followed by a decorrelating pass of a second,
/// distinct register length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostprocessPlan {
    pub l: usize,
    pub l2: Option<usize>,
    pub stages: usize,
}

impl PostprocessPlan {
    /// Two-pass plan with `l` from `choose_l` and `l2 = next_coprime(l)`.
    pub fn two_pass(model: &MarkovModel, epsilon: f64, stages: usize) -> Result<Self> {
        let l = choose_l(model, epsilon, stages)?;
        Ok(Self {
            l,
            l2: Some(next_coprime(l, stages)),
            stages,
        })
    }

    /// Two-pass plan driven by transition counts measured on the stream itself.
    pub fn auto(bits: &BitStream, epsilon: f64, stages: usize) -> Result<Self> {
        let model = TransitionCounts::from_bits(bits).to_model()?;
        Self::two_pass(&model, epsilon, stages)
    }

    pub fn apply(&self, bits: &BitStream) -> Result<BitStream> {
        let first = xor_debias(bits, &DebiasConfig::new(self.l, self.stages)?)?;
        match self.l2 {
            Some(l2) => xor_debias(&first, &DebiasConfig::new(l2, self.stages)?),
            None => Ok(first),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::markov::simulate_markov;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn biased(n: usize, p_one: f64, seed: u64) -> BitStream {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random::<f64>() < p_one).collect()
    }

    #[test]
    fn von_neumann_pairs() {
        let s = BitStream::from_bits(&[0, 0, 0, 1, 1, 0, 1, 1]);
        assert_eq!(von_neumann(&s).to_bits(), vec![0, 1]);
        let alt: BitStream = (0..20_000).map(|i| i % 2 == 1).collect();
        let out = von_neumann(&alt);
        assert_eq!(out.len(), 10_000);
        assert_eq!(out.count_ones(), 0);
        assert!(von_neumann(&BitStream::from_bits(&[1])).is_empty());
        assert_eq!(out.meta().postprocess, vec![PostprocessRecord::VonNeumann]);
    }

    #[test]
    fn von_neumann_rate_and_balance() {
        let input = biased(1_000_000, 0.6, 21);
        let out = von_neumann(&input);
        let rate = out.len() as f64 / (input.len() / 2) as f64;
        assert!((rate - 0.48).abs() < 0.005, "rate {rate}");
        let n = out.len() as f64;
        let bias = (out.count_ones() as f64 / n - 0.5).abs();
        assert!(bias < 3.0 * 0.5 / n.sqrt(), "bias {bias}");
    }

    #[test]
    fn xor_recurrence_examples() {
        let s = BitStream::from_bits(&[1, 0, 1, 1, 0, 0]);
        let cfg = DebiasConfig::new(3, 4).unwrap();
        assert_eq!(xor_debias_full(&s, 3).to_bits(), vec![1, 0, 1, 0, 0, 1]);
        assert_eq!(xor_debias(&s, &cfg).unwrap().to_bits(), vec![0, 0, 1]);

        let ones = BitStream::from_bits(&[1; 10]);
        assert_eq!(xor_debias_full(&ones, 2).to_bits(), vec![1, 1, 0, 0, 1, 1, 0, 0, 1, 1]);
        let out = xor_debias(&ones, &DebiasConfig::new(2, 3).unwrap()).unwrap();
        assert_eq!(out.to_bits(), vec![0, 0, 1, 1, 0, 0, 1, 1]);
        assert_eq!(out.len(), ones.len() - 2);
    }

    #[test]
    fn xor_errors() {
        assert!(DebiasConfig::new(4, 4).is_err());
        assert!(DebiasConfig::new(1, 3).is_err());
        let cfg = DebiasConfig::new(5, 4).unwrap();
        assert!(xor_debias(&BitStream::from_bits(&[1, 0, 1, 1, 0]), &cfg).is_err());
    }

    proptest! {
        #[test]
        fn xor_is_invertible(bits in proptest::collection::vec(0u8..2, 1..300), l in 2usize..12) {
            let d = BitStream::from_bits(&bits);
            let z = xor_debias_full(&d, l);
            prop_assert_eq!(xor_recover(&z, l).to_bits(), bits);
        }
    }

    #[test]
    fn xor_reduces_iid_bias() {
        for seed in 0..5 {
            let input = biased(200_000, 0.55, seed);
            let out = xor_debias(&input, &DebiasConfig::new(3, 4).unwrap()).unwrap();
            let bias_in = (input.count_ones() as f64 / input.len() as f64 - 0.5).abs();
            let bias_out = (out.count_ones() as f64 / out.len() as f64 - 0.5).abs();
            assert!(bias_out <= bias_in, "seed {seed}: {bias_out} > {bias_in}");
        }
    }

    /// Bias of the parity of `terms` chain bits spaced `l` apart, from the
    /// brute-force joint law built out of the l-step transition matrix. With
    /// two terms this is the bias of `d_n XOR d_{n-l}`.
    fn parity_bias(m: &MarkovModel, l: usize, terms: usize) -> f64 {
        // P^l by brute force
        let mut pl = [[1.0, 0.0], [0.0, 1.0]];
        let t = [[m.p, 1.0 - m.p], [1.0 - m.q, m.q]];
        for _ in 0..l {
            let mut next = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    next[i][j] = (0..2).map(|k| pl[i][k] * t[k][j]).sum();
                }
            }
            pl = next;
        }
        // E[prod of ±1 spins at distance l] via the transfer matrix with spin weights
        let spin = [1.0, -1.0];
        let pi1 = m.stationary_one();
        let mut v = [(1.0 - pi1) * spin[0], pi1 * spin[1]];
        for _ in 1..terms {
            let mut next = [0.0; 2];
            for j in 0..2 {
                next[j] = (0..2).map(|i| v[i] * pl[i][j]).sum::<f64>() * spin[j];
            }
            v = next;
        }
        (v[0] + v[1]).abs() / 2.0
    }

    #[test]
    fn markov_stream_debias() {
        let m = MarkovModel::new(0.53, 0.53).unwrap();
        let input = simulate_markov(&m, 1_000_000, 9);
        let l = 7;
        let out = xor_debias(&input, &DebiasConfig::new(l, 4).unwrap()).unwrap();
        let n = out.len() as f64;
        let bias = (out.count_ones() as f64 / n - 0.5).abs();
        let oracle = parity_bias(&m, l, 2);
        let bound = 10.0 * m.lambda1.powi(l as i32) + oracle + 3.0 * 0.5 / n.sqrt();
        assert!(bias < bound, "bias {bias} bound {bound}");
    }

    #[test]
    fn choose_l_examples() {
        let m = |lambda: f64| MarkovModel::new(0.5 + lambda / 2.0, 0.5 + lambda / 2.0).unwrap();
        assert_eq!(choose_l(&m(0.03), 1e-6, 4).unwrap(), 5);
        assert_eq!(choose_l(&m(0.0), 1e-6, 4).unwrap(), 3);
        assert_eq!(choose_l(&m(0.0), 0.5, 3).unwrap(), 2);
        assert_eq!(choose_l(&m(0.5), 1e-3, 4).unwrap(), 11);
        assert!(choose_l(&m(0.03), 0.0, 4).is_err());
        // independent: ceil(ln eps / ln lambda) then coprimality scan
        let base = (1e-6f64.ln() / 0.03f64.ln()).ceil() as usize;
        let scanned = (base..).find(|l| gcd(*l, 4) == 1).unwrap();
        assert_eq!(scanned, 5);
    }

    #[test]
    fn plan_applies_both_passes() {
        assert_eq!(next_coprime(5, 4), 7);
        assert_eq!(next_coprime(3, 4), 5);
        let m = MarkovModel::new(0.515, 0.515).unwrap();
        let plan = PostprocessPlan::two_pass(&m, 1e-6, 4).unwrap();
        assert_eq!((plan.l, plan.l2), (5, Some(7)));
        let input = simulate_markov(&m, 10_000, 2);
        let out = plan.apply(&input).unwrap();
        assert_eq!(out.len(), 10_000 - 12);
        assert_eq!(out.meta().postprocess.len(), 2);
    }
}
