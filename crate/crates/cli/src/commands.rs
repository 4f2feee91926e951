use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde_json::json;
use zigzag_trng::analysis::bifurcation::{bifurcation_diagram, write_bifurcation_csv, BifurcationColumn, BifurcationConfig};
use zigzag_trng::analysis::correlation::{autocorrelation, autocorrelation_csv};
use zigzag_trng::analysis::density::{empirical_density_of_map, fp_fixed_point, four_step_model, DEFAULT_FP_TOL};
use zigzag_trng::analysis::markov::{bias_of, transition_probs_analytic, transition_probs_numeric, TransitionCounts};
use zigzag_trng::dynamics::DEFAULT_STAGES;
use zigzag_trng::postprocess::{choose_l, next_coprime, von_neumann, PostprocessPlan};
use zigzag_trng::stats::{run_battery_on_file, BatteryConfig};
use zigzag_trng::{
    run_pipeline, sample_slope_deltas, warmup_discard, BitStream, Error, GeneralizedZigzagParams, InitialState,
    PiecewiseAffineMap, SimConfig,
};

use crate::args::*;
use crate::manifest::RunManifest;

/// Exit status for `test --strict` when a test failed.
pub const EXIT_TEST_FAILURE: i32 = 4;

/// Outcome of a successful command: the exit status to report.
pub struct Outcome {
    pub status: i32,
}

impl Outcome {
    fn ok() -> Self {
        Self { status: 0 }
    }
}

/// Default output directory: `$TRNGSIM_OUT_DIR` or the working directory.
pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn resolve(out: &mut Option<PathBuf>, default_name: impl AsRef<Path>) {
    if out.is_none() {
        *out = Some(default_out_dir().join(default_name));
    }
}

fn ensure_parent(path: &Path) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

/// Fills in every defaulted output path so the stored invocation is self-contained.
pub fn resolve_outputs(cmd: &mut Command) {
    match cmd {
        Command::Bifurcate(a) => resolve(&mut a.out, "bifurcation.csv"),
        Command::Generate(a) => resolve(&mut a.out, "stream.bin"),
        Command::Analyze(AnalyzeCommand::Density(a)) => resolve(&mut a.out, "density.csv"),
        Command::Analyze(AnalyzeCommand::Markov(a)) => resolve(&mut a.out, "markov.json"),
        Command::Analyze(AnalyzeCommand::Autocorr(a)) => resolve(&mut a.out, "autocorr.csv"),
        Command::Postprocess(a) => {
            let stem = a.input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            resolve(&mut a.out, format!("{stem}.post.bin"));
        }
        Command::Test(a) => {
            if a.out.is_none() {
                let mut s = a.input.as_os_str().to_owned();
                s.push(".report.json");
                a.out = Some(PathBuf::from(s));
            }
        }
        Command::Replay(_) => {}
    }
}

pub fn run(mut cmd: Command) -> anyhow::Result<Outcome> {
    resolve_outputs(&mut cmd);
    let mut manifest = RunManifest::new(&cmd);
    let outcome = match &cmd {
        Command::Bifurcate(a) => bifurcate(a, &mut manifest)?,
        Command::Generate(a) => generate(a, &mut manifest)?,
        Command::Analyze(AnalyzeCommand::Density(a)) => density(a, &mut manifest)?,
        Command::Analyze(AnalyzeCommand::Markov(a)) => markov(a, &mut manifest)?,
        Command::Analyze(AnalyzeCommand::Autocorr(a)) => autocorr(a, &mut manifest)?,
        Command::Postprocess(a) => postprocess(a, &mut manifest)?,
        Command::Test(a) => test(a, &mut manifest)?,
        Command::Replay(a) => return replay(a),
    };
    let primary = manifest.outputs.first().cloned().expect("every command writes an output");
    manifest.write_beside(&primary)?;
    Ok(outcome)
}

fn replay(args: &ReplayArgs) -> anyhow::Result<Outcome> {
    let manifest = RunManifest::read(&args.manifest)
        .with_context(|| format!("reading manifest {}", args.manifest.display()))?;
    let mut cmd = manifest.invocation;
    if matches!(cmd, Command::Replay(_)) {
        bail!(Error::InvalidParameter("a manifest cannot record a replay".into()));
    }
    if let Some(dir) = &args.out_dir {
        fs::create_dir_all(dir)?;
        cmd.redirect_outputs(dir);
    }
    run(cmd)
}

fn out_path(out: &Option<PathBuf>) -> anyhow::Result<&Path> {
    let p = out.as_deref().expect("outputs are resolved before dispatch");
    ensure_parent(p)?;
    Ok(p)
}

fn bifurcate(a: &BifurcateArgs, manifest: &mut RunManifest) -> anyhow::Result<Outcome> {
    let cfg = BifurcationConfig {
        m_lo: a.m_lo,
        m_hi: a.m_hi,
        n_m: a.n_m,
        n_transient: a.n_transient,
        n_keep: a.n_keep,
        x0: a.x0,
        noise_std: a.noise_std,
        seed: a.seed,
    };
    let columns = bifurcation_diagram(&cfg)?;
    let out = out_path(&a.out)?;
    write_bifurcation_csv(&columns, BufWriter::new(File::create(out)?))?;
    let unstable = columns
        .iter()
        .filter(|c| matches!(c, BifurcationColumn::Unstable { .. }))
        .count();
    manifest.outputs.push(out.to_path_buf());
    manifest.derived = json!({ "columns": columns.len(), "unstable_columns": unstable });
    eprintln!("wrote {} columns ({unstable} unstable) to {}", columns.len(), out.display());
    Ok(Outcome::ok())
}

fn stage_maps(a: &GenerateArgs, manifest: &mut RunManifest) -> anyhow::Result<Vec<PiecewiseAffineMap>> {
    let reject = |flag: &str| -> anyhow::Result<Vec<PiecewiseAffineMap>> {
        Err(Error::InvalidParameter(format!("{flag} does not apply to --map {:?}", a.map).to_lowercase()).into())
    };
    if a.map != MapChoice::Zigzag && a.m.is_some() {
        return reject("--m");
    }
    if a.map != MapChoice::Nonideal && (a.dg1.is_some() || a.dg2.is_some() || a.sigma_device.is_some()) {
        return reject("--dg1/--dg2/--sigma-device");
    }
    let single = match a.map {
        MapChoice::Zigzag => match a.m {
            Some(m) => PiecewiseAffineMap::generalized_zigzag(GeneralizedZigzagParams::new(m)?),
            None => PiecewiseAffineMap::zigzag(),
        },
        MapChoice::Tent => PiecewiseAffineMap::tent(),
        MapChoice::Bernoulli => PiecewiseAffineMap::bernoulli(),
        MapChoice::Nonideal => {
            if let Some(sigma) = a.sigma_device {
                // the device draw shares the run seed so one number pins the whole experiment
                let scenario = sample_slope_deltas(sigma, a.stages, a.seed)?;
                manifest.derived["scenario"] = serde_json::to_value(&scenario)?;
                return Ok(scenario.stage_maps()?);
            }
            PiecewiseAffineMap::nonideal(a.dg1.unwrap_or(0.0), a.dg2.unwrap_or(0.0))?.0
        }
    };
    Ok(vec![single; a.stages])
}

fn generate(a: &GenerateArgs, manifest: &mut RunManifest) -> anyhow::Result<Outcome> {
    if a.stages == 0 {
        bail!(Error::InvalidParameter("stages must be at least 1".into()));
    }
    manifest.derived = json!({});
    let maps = stage_maps(a, manifest)?;
    let discard = match a.discard {
        AutoOr::Value(n) => n,
        // no noise to amplify: nothing to wait for
        AutoOr::Auto if a.noise_std == 0.0 => 0,
        AutoOr::Auto => {
            let gain = 2f64.powi(i32::try_from(a.stages).unwrap_or(i32::MAX));
            warmup_discard(gain, a.noise_std.powi(-2))?
        }
    };
    if a.noise_std == 0.0 && a.x0 == InitialState::Auto {
        eprintln!("warning: zero noise with x0 = auto starts on a fixed point; the stream is deterministic");
    }
    let cfg = SimConfig {
        noise_std: a.noise_std,
        seed: a.seed,
        stages: a.stages,
        n_bits: a.n_bits,
        discard,
        x0: a.x0,
    };
    let bits = run_pipeline(&maps, &cfg)?;
    let out = out_path(&a.out)?;
    bits.write(out)?;
    manifest.outputs.push(out.to_path_buf());
    manifest.outputs.push(BitStream::sidecar_path(out));
    if a.ascii {
        let txt = out.with_extension("txt");
        bits.write_ascii(&txt)?;
        manifest.outputs.push(txt);
    }
    manifest.derived["discard"] = json!(discard);
    manifest.derived["ones_fraction"] = json!(bits.count_ones() as f64 / bits.len() as f64);
    eprintln!("wrote {} bits to {}", bits.len(), out.display());
    Ok(Outcome::ok())
}

fn density(a: &DensityArgs, manifest: &mut RunManifest) -> anyhow::Result<Outcome> {
    let model = four_step_model(a.delta_o)?;
    // symmetric slope error: both end points move by delta_o
    let (map, _) = PiecewiseAffineMap::nonideal(-a.delta_o / 2.0, -a.delta_o / 2.0)?;
    let fp = fp_fixed_point(&map, a.bins, DEFAULT_FP_TOL)?;
    let emp = empirical_density_of_map(&map, 0.3, a.samples, a.bins, a.noise_std, a.seed)?;
    let mut csv = String::from("x,model,fp,empirical\n");
    for ((x, f), e) in fp.bin_centers().iter().zip(fp.density()).zip(emp.density()) {
        csv.push_str(&format!("{x},{},{f},{e}\n", model.density_at(*x)));
    }
    let out = out_path(&a.out)?;
    fs::write(out, csv)?;
    manifest.outputs.push(out.to_path_buf());
    manifest.derived = serde_json::to_value(model)?;
    Ok(Outcome::ok())
}

fn markov(a: &MarkovArgs, manifest: &mut RunManifest) -> anyhow::Result<Outcome> {
    let (map, params) = PiecewiseAffineMap::nonideal(a.dg1, a.dg2)?;
    let analytic = transition_probs_analytic(a.dg1, a.dg2)?;
    let numeric = transition_probs_numeric(&params, &fp_fixed_point(&map, a.bins, DEFAULT_FP_TOL)?)?;
    let report = json!({
        "dg1": a.dg1,
        "dg2": a.dg2,
        "analytic": { "model": analytic, "bias": bias_of(&analytic)? },
        "numeric": { "model": numeric, "bias": bias_of(&numeric)? },
    });
    let text = serde_json::to_string_pretty(&report)?;
    let out = out_path(&a.out)?;
    fs::write(out, &text)?;
    println!("{text}");
    manifest.outputs.push(out.to_path_buf());
    Ok(Outcome::ok())
}

fn autocorr(a: &AutocorrArgs, manifest: &mut RunManifest) -> anyhow::Result<Outcome> {
    let bits = BitStream::read_any(&a.input)?;
    let values = autocorrelation(&bits, a.max_lag)?;
    let out = out_path(&a.out)?;
    fs::write(out, autocorrelation_csv(&values))?;
    manifest.inputs.push(a.input.clone());
    manifest.outputs.push(out.to_path_buf());
    Ok(Outcome::ok())
}

fn postprocess(a: &PostprocessArgs, manifest: &mut RunManifest) -> anyhow::Result<Outcome> {
    let bits = BitStream::read_any(&a.input)?;
    manifest.inputs.push(a.input.clone());
    let processed = match a.method {
        Method::VonNeumann => von_neumann(&bits),
        Method::Xor => {
            let stages = a.stages.or(bits.meta().stages).unwrap_or(DEFAULT_STAGES);
            let l = match a.l {
                AutoOr::Value(l) => l,
                AutoOr::Auto => {
                    let model = TransitionCounts::from_bits(&bits).to_model()?;
                    manifest.derived["measured"] = serde_json::to_value(model)?;
                    choose_l(&model, a.epsilon, stages)?
                }
            };
            let l2 = match a.l2 {
                SecondPass::Auto => Some(next_coprime(l, stages)),
                SecondPass::None => None,
                SecondPass::Length(n) => Some(n),
            };
            let plan = PostprocessPlan { l, l2, stages };
            manifest.derived["plan"] = serde_json::to_value(plan)?;
            eprintln!("xor register lengths: l = {l}, l2 = {l2:?}, stages = {stages}");
            plan.apply(&bits)?
        }
    };
    let out = out_path(&a.out)?;
    processed.write(out)?;
    manifest.outputs.push(out.to_path_buf());
    manifest.outputs.push(BitStream::sidecar_path(out));
    manifest.derived["n_in"] = json!(bits.len());
    manifest.derived["n_out"] = json!(processed.len());
    Ok(Outcome::ok())
}

fn test(a: &TestArgs, manifest: &mut RunManifest) -> anyhow::Result<Outcome> {
    let report = run_battery_on_file(&a.input, a.alpha, &BatteryConfig::default())?;
    print!("{}", report.to_table());
    let out = out_path(&a.out)?;
    fs::write(out, report.to_json()?)?;
    manifest.inputs.push(a.input.clone());
    manifest.outputs.push(out.to_path_buf());
    let failed: Vec<&str> = report.failures().map(|t| t.name.as_str()).collect();
    manifest.derived = json!({ "passed": report.passed, "executed": report.executed, "failed": failed });
    let status = if a.strict && !failed.is_empty() { EXIT_TEST_FAILURE } else { 0 };
    Ok(Outcome { status })
}

/// Maps an error to the process exit status.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(
            Error::InvalidParameter(_)
            | Error::InvalidMap(_)
            | Error::OutOfDomain { .. }
            | Error::InsufficientData(_)
            | Error::CorruptStream(_),
        ) => 2,
        Some(Error::OrbitEscape { .. }) => 3,
        _ => 1,
    }
}
