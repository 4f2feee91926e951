use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use zigzag_trng::InitialState;

/// Directory for outputs whose path is not given explicitly.
pub const OUT_DIR_ENV: &str = "TRNGSIM_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "trngsim", version, about = "Chaotic-map TRNG simulator and randomness test bench")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "command", content = "args")]
pub enum Command {
    /// Sweep the generalized zigzag parameter and write steady states as CSV.
    Bifurcate(BifurcateArgs),
    /// Run the pipelined map loop and write a bit stream.
    Generate(GenerateArgs),
    /// Density, Markov and correlation analyses.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Apply the XOR shift-register or von Neumann post-processor.
    Postprocess(PostprocessArgs),
    /// Run the randomness test battery on a stream.
    Test(TestArgs),
    /// Rerun a command from its manifest.
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Bifurcate(_) => "bifurcate",
            Command::Generate(_) => "generate",
            Command::Analyze(AnalyzeCommand::Density(_)) => "analyze density",
            Command::Analyze(AnalyzeCommand::Markov(_)) => "analyze markov",
            Command::Analyze(AnalyzeCommand::Autocorr(_)) => "analyze autocorr",
            Command::Postprocess(_) => "postprocess",
            Command::Test(_) => "test",
            Command::Replay(_) => "replay",
        }
    }

    /// Points every output path into `dir`, keeping file names.
    pub fn redirect_outputs(&mut self, dir: &Path) {
        let move_into = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                *path = dir.join(path.file_name().expect("resolved outputs name a file"));
            }
        };
        match self {
            Command::Bifurcate(a) => move_into(&mut a.out),
            Command::Generate(a) => move_into(&mut a.out),
            Command::Analyze(AnalyzeCommand::Density(a)) => move_into(&mut a.out),
            Command::Analyze(AnalyzeCommand::Markov(a)) => move_into(&mut a.out),
            Command::Analyze(AnalyzeCommand::Autocorr(a)) => move_into(&mut a.out),
            Command::Postprocess(a) => move_into(&mut a.out),
            Command::Test(a) => move_into(&mut a.out),
            Command::Replay(_) => {}
        }
    }
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "analysis", content = "args")]
pub enum AnalyzeCommand {
    /// Four-step model vs Ulam fixed point vs sampled histogram.
    Density(DensityArgs),
    /// Transition probabilities, bias and correlation of a non-ideal map.
    Markov(MarkovArgs),
    /// Lagged autocorrelation of a stream.
    Autocorr(AutocorrArgs),
}

/// `auto` or an explicit value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoOr<T> {
    Auto,
    #[serde(untagged)]
    Value(T),
}

impl<T: FromStr> FromStr for AutoOr<T>
where
    T::Err: std::fmt::Display,
{
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            Ok(AutoOr::Auto)
        } else {
            s.parse().map(AutoOr::Value).map_err(|e| format!("expected 'auto' or a value: {e}"))
        }
    }
}

/// Second register length: `auto`, `none`, or explicit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SecondPass {
    Auto,
    None,
    #[serde(untagged)]
    Length(usize),
}

impl FromStr for SecondPass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "auto" => Ok(SecondPass::Auto),
            "none" => Ok(SecondPass::None),
            n => n.parse().map(SecondPass::Length).map_err(|e| format!("expected auto, none or a length: {e}")),
        }
    }
}

pub fn parse_x0(s: &str) -> Result<InitialState, String> {
    if s.eq_ignore_ascii_case("auto") {
        Ok(InitialState::Auto)
    } else {
        s.parse::<f64>()
            .map(InitialState::Fixed)
            .map_err(|e| format!("expected 'auto' or a number: {e}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapChoice {
    Zigzag,
    Tent,
    Bernoulli,
    Nonideal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Xor,
    VonNeumann,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BifurcateArgs {
    #[arg(long, default_value_t = -3.0, allow_negative_numbers = true)]
    pub m_lo: f64,
    #[arg(long, default_value_t = 3.0, allow_negative_numbers = true)]
    pub m_hi: f64,
    #[arg(long, default_value_t = 1200)]
    pub n_m: usize,
    #[arg(long, default_value_t = 1000)]
    pub n_transient: usize,
    #[arg(long, default_value_t = 200)]
    pub n_keep: usize,
    #[arg(long, default_value_t = 1e-9, allow_negative_numbers = true)]
    pub x0: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub noise_std: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV (default: bifurcation.csv in the output directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value_t = MapChoice::Zigzag)]
    pub map: MapChoice,
    /// Generalized zigzag parameter in (-3, 3); zigzag map only.
    #[arg(long, allow_negative_numbers = true)]
    pub m: Option<f64>,
    /// Rising-slope deviation of the non-ideal map, shared by all stages.
    #[arg(long, allow_negative_numbers = true)]
    pub dg1: Option<f64>,
    /// Falling-slope deviation of the non-ideal map, shared by all stages.
    #[arg(long, allow_negative_numbers = true)]
    pub dg2: Option<f64>,
    /// Draw per-stage deviations with this device spread instead of --dg1/--dg2.
    #[arg(long, conflicts_with_all = ["dg1", "dg2"])]
    pub sigma_device: Option<f64>,
    #[arg(long, default_value_t = 4)]
    pub stages: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub n_bits: usize,
    /// Leading bits to drop, or `auto` for the noise amplification time.
    #[arg(long, default_value = "auto")]
    pub discard: AutoOr<usize>,
    #[arg(long, default_value_t = 1e-6)]
    pub noise_std: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Initial state, or `auto` to start from one noise sample.
    #[arg(long, default_value = "auto", value_parser = parse_x0, allow_negative_numbers = true)]
    pub x0: InitialState,
    /// Output stream (default: stream.bin in the output directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write an ASCII "01" copy next to the packed stream.
    #[arg(long)]
    pub ascii: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DensityArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub delta_o: f64,
    #[arg(long, default_value_t = 512)]
    pub bins: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub noise_std: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MarkovArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub dg1: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub dg2: f64,
    /// Cells of the transfer-operator discretization.
    #[arg(long, default_value_t = 4096)]
    pub bins: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct AutocorrArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub max_lag: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PostprocessArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::Xor)]
    pub method: Method,
    /// Register length, or `auto` to size it from the stream's own statistics.
    #[arg(long, default_value = "auto")]
    pub l: AutoOr<usize>,
    /// Second (decorrelating) register: `auto`, `none`, or a length.
    #[arg(long, default_value = "auto")]
    pub l2: SecondPass,
    /// Pipeline stage count for the coprimality rule (default: from the stream).
    #[arg(long)]
    pub stages: Option<usize>,
    #[arg(long, default_value_t = zigzag_trng::postprocess::DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TestArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = zigzag_trng::stats::DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Exit with status 4 when any test fails.
    #[arg(long)]
    pub strict: bool,
    /// JSON report (default: <input>.report.json).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Write outputs here instead of the original locations.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}
