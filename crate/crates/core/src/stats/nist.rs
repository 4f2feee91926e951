//! Individual tests from NIST SP 800-22 rev. 1a.
//!
//! Every function takes a slice of 0/1 bytes and returns p-values. They only
//! refuse inputs on which the statistic is undefined; the recommended minimum
//! lengths are enforced by the battery so that the short worked examples of
//! the standard stay checkable.

use rustfft::{num_complex::Complex, FftPlanner};
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma_ur;

use crate::error::{Error, Result};

use super::gf2;

fn igamc(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    gamma_ur(a, x).clamp(0.0, 1.0)
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn too_short(test: &str, need: &str) -> Error {
    Error::InsufficientData(format!("{test}: {need}"))
}

fn chi_square(observed: &[u64], probs: &[f64], n: f64) -> f64 {
    observed
        .iter()
        .zip(probs)
        .map(|(&o, &p)| (o as f64 - n * p).powi(2) / (n * p))
        .sum()
}

pub fn frequency(bits: &[u8]) -> Result<f64> {
    if bits.is_empty() {
        return Err(too_short("frequency", "empty input"));
    }
    let n = bits.len() as f64;
    let s: i64 = bits.iter().map(|&b| 2 * b as i64 - 1).sum();
    Ok(erfc(s.unsigned_abs() as f64 / (2.0 * n).sqrt()))
}

pub fn block_frequency(bits: &[u8], m: usize) -> Result<f64> {
    let blocks = bits.len() / m.max(1);
    if m == 0 || blocks == 0 {
        return Err(too_short("block frequency", "need at least one full block"));
    }
    let chi2: f64 = bits
        .chunks_exact(m)
        .map(|b| {
            let pi = b.iter().map(|&x| x as usize).sum::<usize>() as f64 / m as f64;
            (pi - 0.5).powi(2)
        })
        .sum::<f64>()
        * 4.0
        * m as f64;
    Ok(igamc(blocks as f64 / 2.0, chi2 / 2.0))
}

/// Cumulative sums test; `reverse` walks the sequence from its end.
pub fn cumulative_sums(bits: &[u8], reverse: bool) -> Result<f64> {
    if bits.is_empty() {
        return Err(too_short("cumulative sums", "empty input"));
    }
    let n = bits.len() as f64;
    let step = |b: &u8| 2 * *b as i64 - 1;
    let z = if reverse {
        max_excursion(bits.iter().rev().map(step))
    } else {
        max_excursion(bits.iter().map(step))
    } as f64;
    let sqrt_n = n.sqrt();
    // Summation limits follow the reference implementation, which truncates
    // the real-valued bounds toward zero.
    let mut sum1 = 0.0;
    let mut k = ((-n / z + 1.0) / 4.0).trunc();
    while k <= (n / z - 1.0) / 4.0 {
        sum1 += normal_cdf((4.0 * k + 1.0) * z / sqrt_n) - normal_cdf((4.0 * k - 1.0) * z / sqrt_n);
        k += 1.0;
    }
    let mut sum2 = 0.0;
    let mut k = ((-n / z - 3.0) / 4.0).trunc();
    while k <= (n / z - 1.0) / 4.0 {
        sum2 += normal_cdf((4.0 * k + 3.0) * z / sqrt_n) - normal_cdf((4.0 * k + 1.0) * z / sqrt_n);
        k += 1.0;
    }
    Ok((1.0 - sum1 + sum2).clamp(0.0, 1.0))
}

fn max_excursion(steps: impl Iterator<Item = i64>) -> u64 {
    let mut s = 0i64;
    let mut z = 0u64;
    for d in steps {
        s += d;
        z = z.max(s.unsigned_abs());
    }
    z
}

/// Discrete Fourier transform (spectral) test.
pub fn dft(bits: &[u8]) -> Result<f64> {
    let n = bits.len();
    if n < 2 {
        return Err(too_short("dft", "need at least two bits"));
    }
    let mut buf: Vec<Complex<f64>> = bits
        .iter()
        .map(|&b| Complex::new(2.0 * b as f64 - 1.0, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let nf = n as f64;
    let threshold = ((1.0f64 / 0.05).ln() * nf).sqrt();
    let n1 = buf[..n / 2].iter().filter(|c| c.norm() < threshold).count() as f64;
    let n0 = 0.95 * nf / 2.0;
    let d = (n1 - n0) / (nf * 0.95 * 0.05 / 4.0).sqrt();
    Ok(erfc(d.abs() / std::f64::consts::SQRT_2))
}

const LC_PROBS: [f64; 7] = [0.010417, 0.03125, 0.125, 0.5, 0.25, 0.0625, 0.020833];

pub fn linear_complexity(bits: &[u8], m: usize) -> Result<f64> {
    let blocks = bits.len() / m.max(1);
    if m < 2 || blocks == 0 {
        return Err(too_short("linear complexity", "need at least one full block"));
    }
    let mf = m as f64;
    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
    let mu = mf / 2.0 + (9.0 - sign) / 36.0 - (mf / 3.0 + 2.0 / 9.0) / 2f64.powf(mf);
    let mut nu = [0u64; 7];
    for block in bits.chunks_exact(m) {
        let l = gf2::linear_complexity(block) as f64;
        let t = sign * (l - mu) + 2.0 / 9.0;
        let class = if t <= -2.5 {
            0
        } else if t <= -1.5 {
            1
        } else if t <= -0.5 {
            2
        } else if t <= 0.5 {
            3
        } else if t <= 1.5 {
            4
        } else if t <= 2.5 {
            5
        } else {
            6
        };
        nu[class] += 1;
    }
    Ok(igamc(3.0, chi_square(&nu, &LC_PROBS, blocks as f64) / 2.0))
}

/// Longest run of ones in a block, with the block size chosen from `n`.
pub fn longest_run(bits: &[u8]) -> Result<f64> {
    let n = bits.len();
    let (m, lo, probs): (usize, usize, &[f64]) = if n >= 750_000 {
        (10_000, 10, &[0.0882, 0.2092, 0.2483, 0.1933, 0.1208, 0.0675, 0.0727])
    } else if n >= 6272 {
        (128, 4, &[0.1174, 0.2430, 0.2493, 0.1752, 0.1027, 0.1124])
    } else if n >= 128 {
        (8, 1, &[0.2148, 0.3672, 0.2305, 0.1875])
    } else {
        return Err(too_short("longest run", "need at least 128 bits"));
    };
    let k = probs.len() - 1;
    let mut nu = vec![0u64; probs.len()];
    for block in bits.chunks_exact(m) {
        let (mut run, mut best) = (0usize, 0usize);
        for &b in block {
            run = if b == 1 { run + 1 } else { 0 };
            best = best.max(run);
        }
        nu[best.clamp(lo, lo + k) - lo] += 1;
    }
    let blocks = (n / m) as f64;
    Ok(igamc(k as f64 / 2.0, chi_square(&nu, probs, blocks) / 2.0))
}

/// All aperiodic templates of length `m`, in increasing numeric order.
///
/// A template is aperiodic when no proper prefix equals the suffix of the
/// same length, so occurrences can never overlap.
pub fn aperiodic_templates(m: usize) -> Vec<u32> {
    (0u32..1 << m)
        .filter(|&t| {
            (1..m).all(|shift| {
                let k = m - shift;
                let prefix = t >> shift;
                let suffix = t & ((1 << k) - 1);
                prefix != suffix
            })
        })
        .collect()
}

fn window_values(bits: &[u8], m: usize) -> Vec<u32> {
    if bits.len() < m {
        return Vec::new();
    }
    let mask = (1u32 << m) - 1;
    let mut w = bits[..m - 1].iter().fold(0u32, |a, &b| (a << 1) | b as u32);
    bits[m - 1..]
        .iter()
        .map(|&b| {
            w = ((w << 1) | b as u32) & mask;
            w
        })
        .collect()
}

/// Non-overlapping template matching for every aperiodic template of length
/// `m` over `blocks` blocks; one p-value per template.
pub fn non_overlapping_templates(bits: &[u8], m: usize, blocks: usize) -> Result<Vec<f64>> {
    let block_len = bits.len() / blocks.max(1);
    if blocks == 0 || block_len < m || !(2..=16).contains(&m) {
        return Err(too_short("non-overlapping templates", "blocks shorter than the template"));
    }
    let mf = m as f64;
    let mu = (block_len - m + 1) as f64 / 2f64.powf(mf);
    let var = block_len as f64 * (1.0 / 2f64.powf(mf) - (2.0 * mf - 1.0) / 2f64.powf(2.0 * mf));

    // Bucket window start positions by pattern so each template walks only
    // its own occurrences.
    let used = blocks * block_len;
    let windows = window_values(&bits[..used], m);
    let mut offsets = vec![0usize; (1 << m) + 1];
    for &w in &windows {
        offsets[w as usize + 1] += 1;
    }
    for i in 1..offsets.len() {
        offsets[i] += offsets[i - 1];
    }
    let mut fill = offsets.clone();
    let mut positions = vec![0u32; windows.len()];
    for (i, &w) in windows.iter().enumerate() {
        positions[fill[w as usize]] = i as u32;
        fill[w as usize] += 1;
    }

    let p_values = aperiodic_templates(m)
        .into_iter()
        .map(|t| {
            let mut counts = vec![0u64; blocks];
            let mut next_free = 0usize;
            for &p in &positions[offsets[t as usize]..offsets[t as usize + 1]] {
                let p = p as usize;
                let j = p / block_len;
                if p < next_free || p + m > (j + 1) * block_len {
                    continue;
                }
                counts[j] += 1;
                next_free = p + m;
            }
            let chi2: f64 = counts.iter().map(|&w| (w as f64 - mu).powi(2) / var).sum();
            igamc(blocks as f64 / 2.0, chi2 / 2.0)
        })
        .collect();
    Ok(p_values)
}

/// Class probabilities for 0..=4 and ≥5 overlapping runs of nine ones in
/// a block of 1032 bits.
const OVERLAPPING_PROBS: [f64; 6] = [0.364091, 0.185659, 0.139381, 0.100571, 0.0704323, 0.139865];
pub const OVERLAPPING_BLOCK: usize = 1032;

/// Overlapping template matching with the all-ones template of length 9.
pub fn overlapping_template(bits: &[u8]) -> Result<f64> {
    const M: usize = 9;
    let blocks = bits.len() / OVERLAPPING_BLOCK;
    if blocks == 0 {
        return Err(too_short("overlapping template", "need at least one 1032-bit block"));
    }
    let mut nu = [0u64; 6];
    for block in bits.chunks_exact(OVERLAPPING_BLOCK) {
        let mut run = 0usize;
        let mut hits = 0usize;
        for &b in block {
            run = if b == 1 { run + 1 } else { 0 };
            if run >= M {
                hits += 1;
            }
        }
        nu[hits.min(5)] += 1;
    }
    Ok(igamc(2.5, chi_square(&nu, &OVERLAPPING_PROBS, blocks as f64) / 2.0))
}

/// Binary matrix rank test on 32×32 matrices.
pub fn rank(bits: &[u8]) -> Result<f64> {
    const Q: usize = 32;
    let blocks = bits.len() / (Q * Q);
    if blocks == 0 {
        return Err(too_short("rank", "need at least one 1024-bit matrix"));
    }
    let full = gf2::rank_probability(Q, Q, Q);
    let minus_one = gf2::rank_probability(Q, Q, Q - 1);
    let probs = [full, minus_one, 1.0 - full - minus_one];
    let mut nu = [0u64; 3];
    for chunk in bits.chunks_exact(Q * Q) {
        let rows: Vec<u32> = chunk
            .chunks_exact(Q)
            .map(|r| r.iter().fold(0u32, |a, &b| (a << 1) | b as u32))
            .collect();
        match gf2::rank32(rows) {
            32 => nu[0] += 1,
            31 => nu[1] += 1,
            _ => nu[2] += 1,
        }
    }
    Ok((-chi_square(&nu, &probs, blocks as f64) / 2.0).exp())
}

pub fn runs(bits: &[u8]) -> Result<f64> {
    let n = bits.len();
    if n < 2 {
        return Err(too_short("runs", "need at least two bits"));
    }
    let nf = n as f64;
    let pi = bits.iter().map(|&b| b as usize).sum::<usize>() as f64 / nf;
    // Frequency prerequisite: a badly unbalanced sequence fails outright.
    if (pi - 0.5).abs() >= 2.0 / nf.sqrt() {
        return Ok(0.0);
    }
    let v = 1 + bits.windows(2).filter(|w| w[0] != w[1]).count();
    let num = (v as f64 - 2.0 * nf * pi * (1.0 - pi)).abs();
    let den = 2.0 * (2.0 * nf).sqrt() * pi * (1.0 - pi);
    Ok(erfc(num / den))
}

/// Counts of every cyclic `m`-bit pattern (the sequence wraps around).
fn cyclic_counts(bits: &[u8], m: usize) -> Vec<u64> {
    let mut counts = vec![0u64; 1 << m];
    if m == 0 {
        counts[0] = bits.len() as u64;
        return counts;
    }
    let mask = (1usize << m) - 1;
    let mut w = bits[..m - 1].iter().fold(0usize, |a, &b| (a << 1) | b as usize);
    for &b in bits[m - 1..].iter().chain(&bits[..m - 1]) {
        w = ((w << 1) | b as usize) & mask;
        counts[w] += 1;
    }
    counts
}

fn psi_sq(bits: &[u8], m: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let n = bits.len() as f64;
    let sum_sq: f64 = cyclic_counts(bits, m).iter().map(|&c| (c as f64).powi(2)).sum();
    sum_sq * 2f64.powi(m as i32) / n - n
}

/// Serial test; returns the two p-values from the first and second
/// differences of the pattern statistics.
pub fn serial(bits: &[u8], m: usize) -> Result<[f64; 2]> {
    if m < 2 || bits.len() < m {
        return Err(too_short("serial", "need m >= 2 and at least m bits"));
    }
    let (a, b, c) = (psi_sq(bits, m), psi_sq(bits, m - 1), psi_sq(bits, m - 2));
    let d1 = a - b;
    let d2 = a - 2.0 * b + c;
    Ok([
        igamc(2f64.powi(m as i32 - 2), d1 / 2.0),
        igamc(2f64.powi(m as i32 - 3), d2 / 2.0),
    ])
}

fn phi(bits: &[u8], m: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let n = bits.len() as f64;
    cyclic_counts(bits, m)
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum()
}

pub fn approximate_entropy(bits: &[u8], m: usize) -> Result<f64> {
    if m == 0 || bits.len() <= m {
        return Err(too_short("approximate entropy", "need m >= 1 and more than m + 1 bits"));
    }
    let n = bits.len() as f64;
    let apen = phi(bits, m) - phi(bits, m + 1);
    let chi2 = 2.0 * n * (std::f64::consts::LN_2 - apen);
    Ok(igamc(2f64.powi(m as i32 - 1), chi2 / 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Vec<u8> {
        s.bytes().filter(|c| !c.is_ascii_whitespace()).map(|c| c - b'0').collect()
    }

    // First 100 binary digits of e, as used throughout the standard's examples.
    const E100: &str = "11001001000011111101101010100010001000010110100011\
                        00001000110100110001001100011001100010100010111000";

    const LONGEST_RUN_128: &str = "11001100000101010110110001001100111000000000001001\
                                   00110101010001000100111101011010000000110101111100\
                                   1100111001101101100010110010";

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-4
    }

    #[test]
    fn frequency_examples() {
        assert!(close(frequency(&parse("1011010101")).unwrap(), 0.527089));
        assert!(close(frequency(&parse(E100)).unwrap(), 0.109599));
    }

    #[test]
    fn block_frequency_examples() {
        assert!(close(block_frequency(&parse("0110011010"), 3).unwrap(), 0.801252));
        assert!(close(block_frequency(&parse(E100), 10).unwrap(), 0.706438));
    }

    #[test]
    fn runs_examples() {
        assert!(close(runs(&parse("1001101011")).unwrap(), 0.147232));
        assert!(close(runs(&parse(E100)).unwrap(), 0.500798));
    }

    #[test]
    fn cusum_examples() {
        assert!(close(cumulative_sums(&parse("1011010111"), false).unwrap(), 0.4116588));
        assert!(close(cumulative_sums(&parse(E100), false).unwrap(), 0.219194));
        assert!(close(cumulative_sums(&parse(E100), true).unwrap(), 0.114866));
    }

    #[test]
    fn longest_run_example() {
        assert_eq!(parse(LONGEST_RUN_128).len(), 128);
        assert!(close(longest_run(&parse(LONGEST_RUN_128)).unwrap(), 0.180609));
    }

    #[test]
    fn serial_example() {
        let [p1, p2] = serial(&parse("0011011101"), 3).unwrap();
        assert!(close(p1, 0.808792) && close(p2, 0.670320), "{p1} {p2}");
    }

    #[test]
    fn apen_example() {
        assert!(close(approximate_entropy(&parse("0100110101"), 3).unwrap(), 0.261961));
        assert!(close(approximate_entropy(&parse(E100), 2).unwrap(), 0.235301));
    }

    #[test]
    fn non_overlapping_example() {
        // Template 001 over two blocks of ten bits.
        let bits = parse("10100100101110010110");
        let p = non_overlapping_templates(&bits, 3, 2).unwrap();
        let idx = aperiodic_templates(3).iter().position(|&t| t == 0b001).unwrap();
        assert!(close(p[idx], 0.344154), "{}", p[idx]);
    }

    #[test]
    fn igamc_against_scipy_at_large_shape() {
        for (a, x, want) in [
            (16384.0, 16384.0, 0.4989610874592239),
            (16384.0, 16700.0, 0.007031413712700217),
            (8192.0, 8000.0, 0.9835963397974947),
            (512.0, 560.0, 0.019083627716396465),
            (2.5, 3.1, 0.28724168342556083),
            (3.0, 10.0, 0.0027693957155115775),
        ] {
            let got = igamc(a, x);
            assert!((got - want).abs() < 1e-9, "igamc({a}, {x}) = {got}");
        }
    }

    #[test]
    fn aperiodic_template_counts() {
        assert_eq!(aperiodic_templates(2), vec![0b01, 0b10]);
        assert_eq!(aperiodic_templates(9).len(), 148);
    }

    #[test]
    fn dft_small_case_against_direct_transform() {
        // Moduli 0, 2, 4.47, 2, 4.47 all fall below T = 5.47, so N1 = 5 and
        // d = 0.725476; p computed independently with numpy/scipy.
        assert!(close(dft(&parse("1001010011")).unwrap(), 0.468160));
    }

    #[test]
    fn degenerate_inputs() {
        assert!(frequency(&[]).is_err());
        assert!(longest_run(&[1; 100]).is_err());
        assert!(frequency(&vec![0; 1000]).unwrap() < 1e-100);
        assert_eq!(runs(&vec![1; 1000]).unwrap(), 0.0);
    }
}
