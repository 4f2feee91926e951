//! Orbit iteration with injected noise and the pipelined bit generator.
//!
//! Noise comes from a seeded ChaCha generator, so every run is reproducible.
//! This is a simulator: the noise source is pseudo-random.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::bitstream::{BitStream, StreamMeta};
use crate::error::{invalid, Error, Result};
use crate::maps::{MapKind, PiecewiseAffineMap};

pub const DEFAULT_NOISE_STD: f64 = 1e-6;
pub const DEFAULT_STAGES: usize = 4;
pub const MAX_DISCARD: usize = 1_000_000;

/// Additive zero-mean Gaussian noise from a seeded generator.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    rng: ChaCha8Rng,
    normal: Option<Normal<f64>>,
}

impl NoiseSource {
    pub fn new(std: f64, seed: u64) -> Result<Self> {
        if !(std >= 0.0 && std.is_finite()) {
            return invalid(format!("noise standard deviation must be finite and >= 0, got {std}"));
        }
        let normal = if std > 0.0 {
            Some(Normal::new(0.0, std).expect("std validated above"))
        } else {
            None
        };
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            normal,
        })
    }

    /// Zero without touching the generator when the noise is switched off.
    #[inline]
    pub fn sample(&mut self) -> f64 {
        match &self.normal {
            Some(n) => n.sample(&mut self.rng),
            None => 0.0,
        }
    }
}

fn check_in_domain(map: &PiecewiseAffineMap, x: f64) -> Result<()> {
    if map.segment_index(x).is_none() {
        let (lo, hi) = map.domain();
        return invalid(format!("initial state {x} is outside the map domain [{lo}, {hi}]"));
    }
    Ok(())
}

/// Iterates `x_{k+1} = step(x_k) + noise`, returning `n` states starting with `x0`.
///
/// An orbit that leaves the guard band stops with [`Error::OrbitEscape`],
/// carrying the index of the step that failed.
pub fn iterate_orbit(
    map: &PiecewiseAffineMap,
    x0: f64,
    n: usize,
    noise_std: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    if n == 0 {
        return invalid("orbit length must be at least 1");
    }
    check_in_domain(map, x0)?;
    let mut noise = NoiseSource::new(noise_std, seed)?;
    let mut out = Vec::with_capacity(n);
    let mut x = x0;
    out.push(x);
    for step in 1..n {
        x = advance(map, x, &mut noise).map_err(|x| Error::OrbitEscape {
            step,
            x,
            stage: None,
            clock: None,
        })?;
        out.push(x);
    }
    Ok(out)
}

/// One noisy step; on escape returns the offending state.
#[inline]
pub(crate) fn advance(map: &PiecewiseAffineMap, x: f64, noise: &mut NoiseSource) -> std::result::Result<f64, f64> {
    match map.step(x) {
        Ok(y) => Ok(y + noise.sample()),
        Err(_) => Err(x),
    }
}

/// Output bit for state `x` under the map's extraction rule.
pub fn extract_bit(map: &PiecewiseAffineMap, x: f64) -> u8 {
    map.bit_rule().bit(x)
}

/// Initial state of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialState {
    /// Start from zero plus one noise sample.
    Auto,
    Fixed(f64),
}

impl Serialize for InitialState {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            InitialState::Auto => s.serialize_str("auto"),
            InitialState::Fixed(x) => s.serialize_f64(*x),
        }
    }
}

impl<'de> Deserialize<'de> for InitialState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Value(f64),
            Word(String),
        }
        match Repr::deserialize(d)? {
            Repr::Value(x) => Ok(InitialState::Fixed(x)),
            Repr::Word(w) if w == "auto" => Ok(InitialState::Auto),
            Repr::Word(w) => Err(serde::de::Error::custom(format!(
                "x0 must be a number or \"auto\", got {w:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub noise_std: f64,
    pub seed: u64,
    pub stages: usize,
    pub n_bits: usize,
    pub discard: usize,
    pub x0: InitialState,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            noise_std: DEFAULT_NOISE_STD,
            seed: 0,
            stages: DEFAULT_STAGES,
            n_bits: 1_000_000,
            discard: 0,
            x0: InitialState::Auto,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return invalid(format!("noise_std must be finite and >= 0, got {}", self.noise_std));
        }
        if self.stages == 0 {
            return invalid("stages must be at least 1");
        }
        if self.n_bits == 0 {
            return invalid("n_bits must be at least 1");
        }
        if self.discard > MAX_DISCARD {
            return invalid(format!("discard {} exceeds {MAX_DISCARD}", self.discard));
        }
        Ok(())
    }
}

/// Runs `stages` maps in a ring: the state visits stage 0, 1, ..., S-1, 0, ...
///
/// Each stage evaluation first emits a bit from the incoming state (using that
/// stage's extraction rule), then applies the stage map plus fresh noise. The
/// S bits of one clock fill an S-bit register that is read out in ascending
/// stage order, which is the evaluation order. The first `discard` bits are
/// dropped and exactly `n_bits` are returned.
pub fn run_pipeline(stage_maps: &[PiecewiseAffineMap], config: &SimConfig) -> Result<BitStream> {
    config.validate()?;
    if stage_maps.len() != config.stages {
        return invalid(format!(
            "{} stage maps supplied for a {}-stage pipeline",
            stage_maps.len(),
            config.stages
        ));
    }
    let domain = stage_maps[0].domain();
    if stage_maps.iter().any(|m| m.domain() != domain) {
        return invalid("all stage maps must share a domain");
    }

    let mut noise = NoiseSource::new(config.noise_std, config.seed)?;
    let mut x = match config.x0 {
        InitialState::Fixed(x0) => {
            check_in_domain(&stage_maps[0], x0)?;
            x0
        }
        InitialState::Auto => {
            let x = noise.sample();
            // reflect into one-sided domains such as (0, 1)
            if x < domain.0 {
                2.0 * domain.0 - x
            } else {
                x
            }
        }
    };

    let rules: Vec<_> = stage_maps.iter().map(|m| m.bit_rule()).collect();
    let total = config.discard + config.n_bits;
    let s = config.stages;
    let mut out = BitStream::with_capacity(config.n_bits);
    for k in 0..total {
        let stage = k % s;
        if k >= config.discard {
            out.push(rules[stage].bit(x) == 1);
        }
        if k + 1 == total {
            break;
        }
        x = advance(&stage_maps[stage], x, &mut noise).map_err(|x| Error::OrbitEscape {
            step: k,
            x,
            stage: Some(stage),
            clock: Some(k / s),
        })?;
    }

    let kind = stage_maps[0].kind();
    let deltas = if kind == MapKind::NonIdealSymmetric {
        stage_maps.iter().map(nonideal_deltas).collect()
    } else {
        Vec::new()
    };
    Ok(out.with_meta(StreamMeta {
        map_kind: Some(kind),
        deltas,
        seed: Some(config.seed),
        stages: Some(s),
        discard: Some(config.discard),
        noise_std: Some(config.noise_std),
        postprocess: Vec::new(),
    }))
}

/// Recovers `(dg1, dg2)` from a non-ideal map's branch slopes.
fn nonideal_deltas(map: &PiecewiseAffineMap) -> (f64, f64) {
    let segs = map.segments();
    (segs[0].slope / 2.0 - 1.0, -segs[1].slope / 2.0 - 1.0)
}

/// Number of leading bits to drop while a loop of gain `gain` amplifies the
/// noise floor up to detectable power: `ceil(log_gain(pd_over_n))`.
pub fn warmup_discard(gain: f64, pd_over_n: f64) -> Result<usize> {
    if !(gain > 1.0 && gain.is_finite()) {
        return invalid(format!("open-loop gain must exceed 1, got {gain}"));
    }
    if !(pd_over_n > 1.0 && pd_over_n.is_finite()) {
        return invalid(format!("detect-to-noise power ratio must exceed 1, got {pd_over_n}"));
    }
    let exact = pd_over_n.ln() / gain.ln();
    // exact powers of the gain should not round up on log error
    let nearest = exact.round();
    let m = if (exact - nearest).abs() < 1e-9 * nearest.max(1.0) {
        nearest
    } else {
        exact.ceil()
    };
    Ok(m as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_orbits() {
        let t = PiecewiseAffineMap::tent();
        let o = iterate_orbit(&t, 0.3, 3, 0.0, 0).unwrap();
        assert_eq!(o.len(), 3);
        assert!((o[1] - 0.6).abs() < 1e-15 && (o[2] - 0.8).abs() < 1e-15);
        let z = PiecewiseAffineMap::zigzag();
        let o = iterate_orbit(&z, 0.3, 3, 0.0, 0).unwrap();
        assert!((o[1] + 0.6).abs() < 1e-15 && (o[2] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn zigzag_leaves_zero_and_stays_confined() {
        let z = PiecewiseAffineMap::zigzag();
        let o = iterate_orbit(&z, 0.0, 100_000, 1e-6, 11).unwrap();
        let first = o.iter().position(|x| x.abs() >= 1e-3).unwrap();
        assert!(first <= 40, "left the noise floor after {first} steps");
        let g = z.guard_band();
        assert!(o.iter().all(|x| x.abs() < 1.0 + g));
    }

    #[test]
    fn orbit_escape_reports_step() {
        // a noisy tent orbit eventually slips below zero and runs away
        let t = PiecewiseAffineMap::tent();
        let err = iterate_orbit(&t, 0.3, 1_000_000, 1e-3, 3).unwrap_err();
        match err {
            Error::OrbitEscape { step, x, stage, .. } => {
                assert!(step > 0 && stage.is_none());
                assert!(x < -t.guard_band() / 2.0 || x > 1.0);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let t = PiecewiseAffineMap::tent();
        assert!(iterate_orbit(&t, 0.3, 0, 0.0, 0).is_err());
        assert!(iterate_orbit(&t, 1.5, 3, 0.0, 0).is_err());
        assert!(iterate_orbit(&t, 0.3, 3, -1.0, 0).is_err());
    }

    #[test]
    fn single_stage_tent_pipeline() {
        let cfg = SimConfig {
            noise_std: 0.0,
            stages: 1,
            n_bits: 3,
            discard: 0,
            x0: InitialState::Fixed(0.3),
            ..SimConfig::default()
        };
        let s = run_pipeline(&[PiecewiseAffineMap::tent()], &cfg).unwrap();
        assert_eq!(s.to_bits(), vec![0, 1, 1]);
        assert_eq!(s.meta().stages, Some(1));
    }

    #[test]
    fn pipeline_rejects_mismatched_stages() {
        let cfg = SimConfig::default();
        assert!(run_pipeline(&[PiecewiseAffineMap::tent()], &cfg).is_err());
        let maps = vec![
            PiecewiseAffineMap::tent(),
            PiecewiseAffineMap::zigzag(),
            PiecewiseAffineMap::tent(),
            PiecewiseAffineMap::tent(),
        ];
        assert!(run_pipeline(&maps, &cfg).is_err());
    }

    #[test]
    fn pipeline_escape_carries_stage_and_clock() {
        let cfg = SimConfig {
            noise_std: 0.0,
            stages: 2,
            n_bits: 100,
            x0: InitialState::Fixed(1.0),
            ..SimConfig::default()
        };
        // 1.0 -> 0.0 under tent; the second stage is a Bernoulli-like map that
        // pushes 0 to -1 and beyond
        let push = PiecewiseAffineMap::new(
            MapKind::Custom,
            (0.0, 1.0),
            vec![crate::maps::Segment::new(0.0, 1.0, 3.0, -0.5)],
        )
        .unwrap();
        let err = run_pipeline(&[PiecewiseAffineMap::tent(), push], &cfg).unwrap_err();
        match err {
            Error::OrbitEscape { stage, clock, .. } => {
                assert!(stage.is_some() && clock.is_some());
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn warmup_values() {
        assert_eq!(warmup_discard(2.0, 2f64.powi(20)).unwrap(), 20);
        assert_eq!(warmup_discard(16.0, 16f64.powi(20)).unwrap(), 20);
        assert_eq!(warmup_discard(16.0, 1e6).unwrap(), 5);
        assert!(warmup_discard(1.0, 10.0).is_err());
        assert!(warmup_discard(2.0, 0.5).is_err());
    }

    #[test]
    fn sim_config_json() {
        let cfg = SimConfig::default();
        let s = serde_json::to_string(&cfg).unwrap();
        assert!(s.contains("\"x0\":\"auto\""));
        let back: SimConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, cfg);
        let fixed: SimConfig =
            serde_json::from_str(&s.replace("\"auto\"", "0.25")).unwrap();
        assert_eq!(fixed.x0, InitialState::Fixed(0.25));
        assert!(serde_json::from_str::<SimConfig>(&s.replace("\"auto\"", "\"zero\"")).is_err());
    }
}
