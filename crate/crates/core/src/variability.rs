//! Device mismatch to map-slope deviations, and Monte-Carlo scenarios.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::maps::{NonIdealParams, PiecewiseAffineMap, MAX_SLOPE_DELTA};

/// Relative device-parameter variations of a current mirror.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DeviceVariation {
    /// |ΔW| relative width variation.
    pub d_w: f64,
    /// |ΔL| relative length variation.
    pub d_l: f64,
    /// |ΔVth| / (Vgs - Vth).
    pub d_vth_over_vov: f64,
    /// λ|ΔVds| / (1 + λVds).
    pub lambda_dvds: f64,
}

impl DeviceVariation {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("dW", self.d_w),
            ("dL", self.d_l),
            ("dVth/Vov", self.d_vth_over_vov),
            ("lambda dVds term", self.lambda_dvds),
        ] {
            if !(0.0..0.2).contains(&v) {
                return invalid(format!("{name} = {v} is outside [0, 0.2)"));
            }
        }
        Ok(())
    }
}

/// First-order worst-case multiplicative deviation of a mirror's gain from
/// its nominal width ratio.
pub fn mirror_gain_factor(v: &DeviceVariation) -> Result<f64> {
    v.validate()?;
    Ok(1.0 + 2.0 * v.d_w + 2.0 * v.d_l + 4.0 * v.d_vth_over_vov + 2.0 * v.lambda_dvds)
}

/// Per-piece spread of the slope deviations relative to `sigma_device`, for
/// the first, second and third linear pieces of the three-piece characteristic.
pub const PIECE_SCALES: [f64; 3] = [1.0, 2.0, 0.5];

/// Draws beyond this many standard deviations are rejected and redrawn.
pub const TRUNCATION_SIGMAS: f64 = 5.0;

pub const MAX_SIGMA_DEVICE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeDeltas {
    pub dg1: f64,
    pub dg2: f64,
}

/// Slope deviations for every stage of a pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationScenario {
    pub stages: Vec<SlopeDeltas>,
    pub sigma_device: f64,
    pub seed: u64,
}

impl VariationScenario {
    /// The tent-form non-ideal map of each stage.
    pub fn stage_maps(&self) -> Result<Vec<PiecewiseAffineMap>> {
        self.stages
            .iter()
            .map(|d| PiecewiseAffineMap::nonideal(d.dg1, d.dg2).map(|(m, _)| m))
            .collect()
    }

    pub fn stage_params(&self) -> Result<Vec<NonIdealParams>> {
        self.stages
            .iter()
            .map(|d| NonIdealParams::new(d.dg1, d.dg2))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn truncated_draw(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    let normal = Normal::new(0.0, sigma).expect("sigma is finite and positive");
    loop {
        let d = normal.sample(rng);
        if d.abs() <= TRUNCATION_SIGMAS * sigma && d.abs() < MAX_SLOPE_DELTA {
            return d;
        }
    }
}

/// Draws zero-mean Gaussian slope deviations for each stage.
///
/// Each stage gets one draw per linear piece with standard deviation
/// `PIECE_SCALES[i] * sigma_device`. The tent-form reduction has only two
/// slopes: `dg2` is the second (steepest-spread) piece, while the first and
/// third pieces are mirror images under the map's odd symmetry and are
/// averaged into `dg1`.
pub fn sample_slope_deltas(sigma_device: f64, stages: usize, seed: u64) -> Result<VariationScenario> {
    if !(0.0..=MAX_SIGMA_DEVICE).contains(&sigma_device) {
        return invalid(format!(
            "sigma_device must lie in [0, {MAX_SIGMA_DEVICE}], got {sigma_device}"
        ));
    }
    if stages == 0 {
        return invalid("stages must be at least 1");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stages = (0..stages)
        .map(|_| {
            let [a, b, c] = PIECE_SCALES.map(|s| truncated_draw(&mut rng, s * sigma_device));
            SlopeDeltas {
                dg1: 0.5 * (a + c),
                dg2: b,
            }
        })
        .collect();
    Ok(VariationScenario {
        stages,
        sigma_device,
        seed,
    })
}
