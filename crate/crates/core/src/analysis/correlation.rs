//! Autocorrelation of bit sequences.

use std::fmt::Write as _;

use crate::bitstream::BitStream;
use crate::error::{invalid, Error, Result};

/// Pearson correlation between the ±1-mapped sequence and itself shifted by
/// each lag in `1..=max_lag`.
pub fn autocorrelation(bits: &BitStream, max_lag: usize) -> Result<Vec<f64>> {
    if max_lag == 0 {
        return invalid("max_lag must be at least 1");
    }
    let n = bits.len();
    if n < 100 * max_lag {
        return Err(Error::InsufficientData(format!(
            "{n} bits is too short for lags up to {max_lag} (need {})",
            100 * max_lag
        )));
    }
    let s: Vec<i8> = bits.iter().map(|b| if b == 1 { 1 } else { -1 }).collect();
    // prefix[i] = sum of s[..i]
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0i64);
    for &v in &s {
        prefix.push(prefix.last().unwrap() + v as i64);
    }
    (1..=max_lag)
        .map(|k| {
            let m = (n - k) as f64;
            let sx = prefix[n - k] as f64;
            let sy = (prefix[n] - prefix[k]) as f64;
            let sxy = s[..n - k]
                .iter()
                .zip(&s[k..])
                .map(|(a, b)| (a * b) as i64)
                .sum::<i64>() as f64;
            // every ±1 value squares to 1
            let vx = m * m - sx * sx;
            let vy = m * m - sy * sy;
            if vx <= 0.0 || vy <= 0.0 {
                return invalid("autocorrelation is undefined for a constant sequence");
            }
            Ok((m * sxy - sx * sy) / (vx * vy).sqrt())
        })
        .collect()
}

/// `lag,value` rows with a header line.
pub fn autocorrelation_csv(values: &[f64]) -> String {
    let mut out = String::from("lag,value\n");
    for (i, v) in values.iter().enumerate() {
        let _ = writeln!(out, "{},{v}", i + 1);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::markov::{simulate_markov, MarkovModel};
    use rand::{Rng, SeedableRng};

    #[test]
    fn alternating_is_anticorrelated() {
        let bits: BitStream = (0..1001).map(|i| i % 2 == 1).collect();
        let r = autocorrelation(&bits, 2).unwrap();
        assert!((r[0] + 1.0).abs() < 1e-12);
        assert!((r[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fair_coin_is_uncorrelated() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let bits: BitStream = (0..1_000_000).map(|_| rng.random::<bool>()).collect();
        // Four sigma keeps the family-wise false-alarm rate over 20 lags near 0.1%.
        let bound = 4.0 / (bits.len() as f64).sqrt();
        for (k, r) in autocorrelation(&bits, 20).unwrap().iter().enumerate() {
            assert!(r.abs() < bound, "lag {}: {r}", k + 1);
        }
    }

    #[test]
    fn markov_lags_follow_eigenvalue_powers() {
        let m = MarkovModel::new(0.53, 0.53).unwrap();
        let bits = simulate_markov(&m, 1_000_000, 5);
        let r = autocorrelation(&bits, 3).unwrap();
        let sigma = 1.0 / (bits.len() as f64).sqrt();
        for k in 1..=3u32 {
            let expected = 0.06f64.powi(k as i32);
            assert!((r[k as usize - 1] - expected).abs() < 3.0 * sigma, "lag {k}");
        }
    }

    #[test]
    fn short_or_constant_input() {
        let bits = BitStream::from_bits(&[0, 1, 0]);
        assert!(autocorrelation(&bits, 1).is_err());
        let zeros = BitStream::from_bits(&[0; 500]);
        assert!(autocorrelation(&zeros, 2).is_err());
    }

    #[test]
    fn csv_layout() {
        assert_eq!(autocorrelation_csv(&[0.5, -0.25]), "lag,value\n1,0.5\n2,-0.25\n");
    }
}
