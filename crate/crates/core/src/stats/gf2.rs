//! Linear algebra over GF(2) for the rank and linear-complexity tests.

/// Rank of a square bit matrix given as up to 32 rows of 32 bits.
pub fn rank32(mut rows: Vec<u32>) -> usize {
    let mut rank = 0;
    for bit in (0..32).rev() {
        let mask = 1u32 << bit;
        let Some(pivot) = (rank..rows.len()).find(|&r| rows[r] & mask != 0) else {
            continue;
        };
        rows.swap(rank, pivot);
        let p = rows[rank];
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank && *row & mask != 0 {
                *row ^= p;
            }
        }
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    rank
}

/// Probability that a uniformly random `m`×`q` binary matrix has rank `r`.
pub fn rank_probability(m: usize, q: usize, r: usize) -> f64 {
    let (mf, qf, rf) = (m as f64, q as f64, r as f64);
    let mut p = 2f64.powf(rf * (qf + mf - rf) - mf * qf);
    for i in 0..r {
        let i = i as f64;
        p *= (1.0 - 2f64.powf(i - qf)) * (1.0 - 2f64.powf(i - mf)) / (1.0 - 2f64.powf(i - rf));
    }
    p
}

/// Length of the shortest LFSR generating `s` (Berlekamp–Massey).
pub fn linear_complexity(s: &[u8]) -> usize {
    let n = s.len();
    let mut c = vec![0u8; n + 1];
    let mut b = vec![0u8; n + 1];
    c[0] = 1;
    b[0] = 1;
    let mut l = 0usize;
    let mut m: isize = -1;
    for i in 0..n {
        let mut d = s[i];
        for j in 1..=l {
            d ^= c[j] & s[i - j];
        }
        if d == 1 {
            let t = c.clone();
            let shift = (i as isize - m) as usize;
            for j in 0..=n - shift {
                c[j + shift] ^= b[j];
            }
            if 2 * l <= i {
                l = i + 1 - l;
                m = i as isize;
                b = t;
            }
        }
    }
    l
}
