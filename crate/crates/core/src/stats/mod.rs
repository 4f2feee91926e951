//! Randomness battery: a subset of NIST SP 800-22 plus a direct bias estimate.

mod gf2;
pub mod nist;

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bitstream::{BitStream, StreamMeta};
use crate::error::{invalid, Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.01;
pub const MIN_BIAS_BITS: usize = 10_000;

/// Test parameters; defaults are the standard's recommendations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatteryConfig {
    pub block_frequency_m: usize,
    pub linear_complexity_m: usize,
    pub template_m: usize,
    pub template_blocks: usize,
    pub serial_m: usize,
    pub apen_m: usize,
    /// Minimum fraction of non-overlapping templates that must pass. `None`
    /// uses the standard's proportion interval `(1-α) - 3√(α(1-α)/k)` for
    /// `k` templates.
    pub template_pass_fraction: Option<f64>,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        Self {
            block_frequency_m: 128,
            linear_complexity_m: 500,
            template_m: 9,
            template_blocks: 8,
            serial_m: 16,
            apen_m: 10,
            template_pass_fraction: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestStatus {
    Pass,
    Fail,
    /// Stream shorter than the test's recommended minimum.
    InsufficientData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub name: String,
    pub p_values: Vec<f64>,
    pub status: TestStatus,
    /// Fraction of sub-tests passing, for tests made of many sub-tests.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pass_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

impl TestResult {
    pub fn passed(&self) -> bool {
        self.status == TestStatus::Pass
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasEstimate {
    /// `|#ones/n - 1/2|`.
    pub fraction: f64,
    pub percent: f64,
}

pub fn bias_estimate(bits: &BitStream) -> Result<BiasEstimate> {
    if bits.len() < MIN_BIAS_BITS {
        return Err(Error::InsufficientData(format!(
            "bias estimate needs at least {MIN_BIAS_BITS} bits, got {}",
            bits.len()
        )));
    }
    let fraction = (bits.count_ones() as f64 / bits.len() as f64 - 0.5).abs();
    Ok(BiasEstimate {
        fraction,
        percent: 100.0 * fraction,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub alpha: f64,
    pub n_bits: usize,
    pub tests: Vec<TestResult>,
    pub passed: usize,
    /// Tests that ran (not skipped for length).
    pub executed: usize,
    /// `2 |#ones/n - 1/2|` in percent, i.e. `|P(1) - P(0)|`.
    pub bias_percent: f64,
    /// `|#ones/n - 1/2|` in percent, the same quantity as [`bias_estimate`].
    pub ones_deviation_percent: f64,
    pub config: BatteryConfig,
    pub meta: StreamMeta,
}

impl TestReport {
    /// True when every executed test passed and none was skipped.
    pub fn all_passed(&self) -> bool {
        self.executed == self.tests.len() && self.passed == self.executed
    }

    pub fn failures(&self) -> impl Iterator<Item = &TestResult> {
        self.tests.iter().filter(|t| t.status == TestStatus::Fail)
    }

    pub fn get(&self, name: &str) -> Option<&TestResult> {
        self.tests.iter().find(|t| t.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Plain-text table: test, p-value(s), result, with the bias as last row.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<26} {:<22} {}", "Test", "P-value", "Result");
        let _ = writeln!(out, "{}", "-".repeat(60));
        for t in &self.tests {
            let (p, result) = match (t.status, t.pass_fraction) {
                (TestStatus::InsufficientData, _) => ("-".to_string(), "Insufficient data".to_string()),
                (s, Some(frac)) => (
                    format!("{:.6}", t.p_values.iter().copied().fold(f64::INFINITY, f64::min)),
                    format!("{:.2}% {}", 100.0 * frac, if s == TestStatus::Pass { "Success" } else { "Failure" }),
                ),
                (s, None) => (
                    t.p_values.iter().map(|p| format!("{p:.6}")).collect::<Vec<_>>().join(", "),
                    if s == TestStatus::Pass { "Success" } else { "Failure" }.to_string(),
                ),
            };
            let _ = writeln!(out, "{:<26} {:<22} {}", t.name, p, result);
        }
        let _ = writeln!(out, "{}", "-".repeat(60));
        let _ = writeln!(
            out,
            "{:<26} {:<22} {:.3}% (|P(1)-1/2| = {:.3}%)",
            "bias", "", self.bias_percent, self.ones_deviation_percent
        );
        let _ = writeln!(
            out,
            "passed {}/{} (alpha = {}, n = {})",
            self.passed,
            self.tests.len(),
            self.alpha,
            self.n_bits
        );
        out
    }
}

enum Outcome {
    Single(Vec<f64>),
    Fraction { p_values: Vec<f64>, fraction: f64, pass: bool },
}

struct Spec {
    name: &'static str,
    min_bits: usize,
    run: Box<dyn Fn(&[u8]) -> Result<Outcome> + Sync + Send>,
}

fn specs(cfg: &BatteryConfig, alpha: f64) -> Vec<Spec> {
    let single = |r: Result<f64>| r.map(|p| Outcome::Single(vec![p]));
    let c = cfg.clone();
    let template_threshold = cfg.template_pass_fraction;
    let mut v: Vec<Spec> = Vec::new();
    v.push(Spec {
        name: "approximate_entropy",
        // m < floor(log2 n) - 5
        min_bits: 1 << (cfg.apen_m + 6),
        run: Box::new(move |b| single(nist::approximate_entropy(b, c.apen_m))),
    });
    let m = cfg.block_frequency_m;
    v.push(Spec {
        name: "block_frequency",
        min_bits: 100.max(m),
        run: Box::new(move |b| single(nist::block_frequency(b, m))),
    });
    v.push(Spec {
        name: "cumulative_sums_forward",
        min_bits: 100,
        run: Box::new(move |b| single(nist::cumulative_sums(b, false))),
    });
    v.push(Spec {
        name: "cumulative_sums_reverse",
        min_bits: 100,
        run: Box::new(move |b| single(nist::cumulative_sums(b, true))),
    });
    v.push(Spec {
        name: "fft",
        min_bits: 1000,
        run: Box::new(move |b| single(nist::dft(b))),
    });
    v.push(Spec {
        name: "frequency",
        min_bits: 100,
        run: Box::new(move |b| single(nist::frequency(b))),
    });
    let m = cfg.linear_complexity_m;
    v.push(Spec {
        name: "linear_complexity",
        // At least 200 blocks.
        min_bits: 200 * m,
        run: Box::new(move |b| single(nist::linear_complexity(b, m))),
    });
    v.push(Spec {
        name: "longest_run",
        min_bits: 128,
        run: Box::new(move |b| single(nist::longest_run(b))),
    });
    let (tm, tb) = (cfg.template_m, cfg.template_blocks);
    v.push(Spec {
        name: "non_overlapping_templates",
        // Expected matches per block of at least ten.
        min_bits: tb * 10 * (1 << tm),
        run: Box::new(move |b| {
            let ps = nist::non_overlapping_templates(b, tm, tb)?;
            let k = ps.len() as f64;
            let frac = ps.iter().filter(|&&p| p >= alpha).count() as f64 / k;
            let threshold = template_threshold
                .unwrap_or_else(|| (1.0 - alpha) - 3.0 * (alpha * (1.0 - alpha) / k).sqrt());
            Ok(Outcome::Fraction {
                p_values: ps,
                fraction: frac,
                pass: frac >= threshold,
            })
        }),
    });
    v.push(Spec {
        name: "overlapping_templates",
        // Smallest class must expect at least five blocks.
        min_bits: 72 * nist::OVERLAPPING_BLOCK,
        run: Box::new(move |b| single(nist::overlapping_template(b))),
    });
    v.push(Spec {
        name: "rank",
        min_bits: 38 * 1024,
        run: Box::new(move |b| single(nist::rank(b))),
    });
    v.push(Spec {
        name: "runs",
        min_bits: 100,
        run: Box::new(move |b| single(nist::runs(b))),
    });
    let m = cfg.serial_m;
    v.push(Spec {
        name: "serial",
        // m < floor(log2 n) - 2
        min_bits: 1 << (m + 3),
        run: Box::new(move |b| nist::serial(b, m).map(|p| Outcome::Single(p.to_vec()))),
    });
    v
}

/// Runs every test of the battery on `bits`.
///
/// A test passes when all of its p-values are at least `alpha`; the template
/// test passes on its pass fraction instead. Tests below their minimum
/// length are reported as insufficient data rather than failed.
pub fn run_battery(bits: &BitStream, alpha: f64, config: &BatteryConfig) -> Result<TestReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return invalid(format!("alpha must lie in (0, 1), got {alpha}"));
    }
    if config.template_m < 2 || config.template_m > 16 || config.serial_m < 3 || config.serial_m > 24 || config.apen_m < 1 || config.apen_m > 20 {
        return invalid("template, serial and approximate-entropy lengths are out of range");
    }
    if let Some(f) = config.template_pass_fraction {
        if !(0.0..=1.0).contains(&f) {
            return invalid(format!("template pass fraction must lie in [0, 1], got {f}"));
        }
    }
    let raw = bits.to_bits();
    let n = raw.len();
    let tests: Vec<TestResult> = specs(config, alpha)
        .into_par_iter()
        .map(|spec| {
            let skipped = |note: String| TestResult {
                name: spec.name.to_string(),
                p_values: Vec::new(),
                status: TestStatus::InsufficientData,
                pass_fraction: None,
                note: Some(note),
            };
            if n < spec.min_bits {
                return Ok(skipped(format!("needs at least {} bits", spec.min_bits)));
            }
            match (spec.run)(&raw) {
                Ok(Outcome::Single(p_values)) => {
                    let ok = p_values.iter().all(|&p| p >= alpha);
                    Ok(TestResult {
                        name: spec.name.to_string(),
                        p_values,
                        status: if ok { TestStatus::Pass } else { TestStatus::Fail },
                        pass_fraction: None,
                        note: None,
                    })
                }
                Ok(Outcome::Fraction { p_values, fraction, pass }) => Ok(TestResult {
                    name: spec.name.to_string(),
                    p_values,
                    status: if pass { TestStatus::Pass } else { TestStatus::Fail },
                    pass_fraction: Some(fraction),
                    note: None,
                }),
                Err(Error::InsufficientData(msg)) => Ok(skipped(msg)),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let executed = tests.iter().filter(|t| t.status != TestStatus::InsufficientData).count();
    let passed = tests.iter().filter(|t| t.passed()).count();
    let ones = bits.count_ones() as f64;
    let frac = if n == 0 { 0.5 } else { ones / n as f64 };
    Ok(TestReport {
        alpha,
        n_bits: n,
        tests,
        passed,
        executed,
        bias_percent: 200.0 * (frac - 0.5).abs(),
        ones_deviation_percent: 100.0 * (frac - 0.5).abs(),
        config: config.clone(),
        meta: bits.meta().clone(),
    })
}

/// Reads a stream (packed with sidecar, or ASCII) and runs the battery.
pub fn run_battery_on_file(path: &Path, alpha: f64, config: &BatteryConfig) -> Result<TestReport> {
    let bits = BitStream::read_any(path)?;
    run_battery(&bits, alpha, config)
}
