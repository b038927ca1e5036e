use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sparsenet::encoding::{check_denoising, DenoisingReport, EncoderSpec, NoiseSpec};
use sparsenet::graphprops::{check_degree_band, check_unique_neighbor, PropertyReport, EPS_ENCODER};
use sparsenet::graphrecovery::{verify_recovery_properties, DEFAULT_PROPERTY_BUDGET};
use sparsenet::netmodel::{format_sample, generate_network, generate_samples, read_net, sample_subset, write_net};
use sparsenet::separation::{run_separation, AdversaryConfig, GadgetInstance, InfeasibilityCertificate};
use sparsenet::weightlearning::{
    align_net, compare_nets, estimate_statistical_distance, evaluate_learned, learn_layerwise, DistanceEstimate,
    LayerMetrics, LayerwiseConfig, SignScores,
};
use sparsenet::{rng, DeepNet, DeepNetParams, Error, Observed, OutputMode, SparseBinaryVector};

use crate::config::{ExperimentConfig, Learner};
use crate::{Cli, Command};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Lib(#[from] Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    /// 1 input/output, 2 invalid parameters, 3 regime, 4 layer failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } | CliError::Lib(Error::Io(_)) | CliError::Lib(Error::Format { .. }) => 1,
            CliError::Lib(Error::RegimeViolation(_)) => 3,
            CliError::Lib(Error::LayerFailed { .. }) => 4,
            _ => 2,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_out(target: &str, text: &str) -> Result<()> {
    if target == "-" {
        print!("{text}");
        Ok(())
    } else {
        fs::write(target, text).map_err(|source| CliError::Io {
            path: target.into(),
            source,
        })
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes") + "\n"
}

fn load_config(cli: &Cli) -> Result<Option<ExperimentConfig>> {
    let Some(path) = &cli.config else { return Ok(None) };
    let cfg = ExperimentConfig::from_text(&read(path)?)?;
    Ok(Some(match cli.seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    }))
}

fn require_config(cli: &Cli) -> Result<ExperimentConfig> {
    load_config(cli)?.ok_or_else(|| CliError::Usage("this command needs --config".into()))
}

fn load_net(path: &Path) -> Result<DeepNet> {
    Ok(read_net(&read(path)?)?)
}

/// Config describing an existing net, for commands run without --config.
fn config_for_net(net: &DeepNet, seed: Option<u64>) -> Result<ExperimentConfig> {
    let p = &net.params;
    let mut raw = BTreeMap::new();
    raw.insert("num_layers".into(), p.num_layers.to_string());
    raw.insert("layer_size".into(), p.layer_size.to_string());
    raw.insert("expected_degree".into(), p.expected_degree.to_string());
    raw.insert("top_density".into(), p.top_density.to_string());
    raw.insert(
        "output_mode".into(),
        if p.output_mode == OutputMode::RealValued { "real" } else { "thresholded" }.into(),
    );
    raw.insert("seed".into(), seed.unwrap_or(p.rng_seed).to_string());
    let mut c = ExperimentConfig::from_map(raw)?;
    c.params.weight_mode = p.weight_mode;
    Ok(c)
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Generate {
            samples,
            samples_out,
            hidden,
        } => cmd_generate(cli, *samples, samples_out.as_deref(), *hidden),
        Command::Learn { net, samples, net_out } => cmd_learn(cli, net.as_deref(), samples.as_deref(), net_out.as_deref()),
        Command::Evaluate {
            truth,
            learned,
            samples,
            trials,
        } => cmd_evaluate(cli, truth, learned, *samples, *trials),
        Command::Bench => cmd_bench(cli),
        Command::CheckProps { net, layer } => cmd_check_props(cli, net, *layer),
        Command::Separation {
            net,
            train_samples,
            eval_samples,
            epochs,
            max_outputs,
            list,
        } => cmd_separation(cli, net.as_deref(), *train_samples, *eval_samples, *epochs, *max_outputs, *list),
    }
}

fn cmd_generate(cli: &Cli, samples: usize, samples_out: Option<&Path>, hidden: bool) -> Result<()> {
    let cfg = require_config(cli)?;
    let net = generate_network(&cfg.params)?;
    write_out(&cli.out, &write_net(&net))?;
    if let Some(path) = samples_out {
        let mut text = String::new();
        for s in generate_samples(&net, samples, cfg.params.rng_seed, hidden) {
            let _ = writeln!(text, "{}", format_sample(&s));
        }
        fs::write(path, text).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    }
    Ok(())
}

fn parse_observed(line: &str, n: usize, mode: OutputMode, lineno: usize) -> Result<Observed> {
    let last = line.rsplit('|').next().unwrap_or("").trim();
    let fmt = |msg: &str| {
        CliError::Lib(Error::Format {
            line: lineno,
            msg: msg.to_string(),
        })
    };
    Ok(match mode {
        OutputMode::Thresholded => {
            let idx = last
                .split_whitespace()
                .map(|t| t.parse::<u32>().map_err(|_| fmt("bad index")))
                .collect::<Result<Vec<_>>>()?;
            Observed::Binary(SparseBinaryVector::new(n, idx)?)
        }
        OutputMode::RealValued => {
            let y = last
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| fmt("bad real")))
                .collect::<Result<Vec<_>>>()?;
            if y.len() != n {
                return Err(fmt("wrong number of outputs"));
            }
            Observed::Real(y)
        }
    })
}

#[derive(Debug, Serialize)]
struct RunReport {
    version: &'static str,
    command: &'static str,
    config: BTreeMap<String, String>,
    params: DeepNetParams,
    learner: Learner,
    seed: u64,
    samples: usize,
    layers: Vec<LayerMetrics>,
    /// Whether every layer matches the truth exactly; absent without a truth net.
    recovered: Option<bool>,
    top_density: f64,
    sampling_seconds: f64,
    learning_seconds: f64,
}

fn layerwise_config(cfg: &ExperimentConfig, seed: u64) -> LayerwiseConfig {
    LayerwiseConfig {
        single_layer_mode: cfg.learn_mode(),
        enforce_regime: cfg.enforce_regime,
        seed,
        ..LayerwiseConfig::default()
    }
}

fn check_regime(cfg: &ExperimentConfig) -> Result<()> {
    let problems = cfg.regime_report();
    if cfg.enforce_regime && !problems.is_empty() {
        return Err(Error::RegimeViolation(problems.join("; ")).into());
    }
    Ok(())
}

fn cmd_learn(cli: &Cli, net: Option<&Path>, samples: Option<&Path>, net_out: Option<&Path>) -> Result<()> {
    let truth = net.map(load_net).transpose()?;
    let cfg = match (load_config(cli)?, &truth) {
        (Some(c), _) => c,
        (None, Some(t)) => config_for_net(t, cli.seed)?,
        (None, None) => return Err(CliError::Usage("learn needs --config or --net".into())),
    };
    let params = match &truth {
        Some(t) => t.params.clone(),
        None => cfg.params.clone(),
    };
    check_regime(&cfg)?;
    let seed = cfg.seeds.first().copied().unwrap_or(params.rng_seed);
    let start = Instant::now();
    let obs: Vec<Observed> = match (&truth, samples) {
        (Some(t), _) => generate_samples(t, cfg.sample_count(), seed, false).map(|s| s.observed).collect(),
        (None, Some(path)) => read(path)?
            .lines()
            .enumerate()
            // A blank line is an all-zero sample.
            .map(|(i, l)| parse_observed(l, params.layer_size, params.output_mode, i + 1))
            .collect::<Result<_>>()?,
        (None, None) => return Err(CliError::Usage("learn needs --net or --samples".into())),
    };
    let sampling_seconds = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let mut learned = learn_layerwise(&params, &obs, &layerwise_config(&cfg, seed))?;
    let learning_seconds = start.elapsed().as_secs_f64();
    let recovered = match &truth {
        Some(t) => Some(evaluate_learned(t, &mut learned)?.iter().all(SignScores::exact)),
        None => None,
    };
    if let Some(path) = net_out {
        let net = learned.to_deep_net(&params)?;
        fs::write(path, write_net(&net)).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    }
    let report = RunReport {
        version: env!("CARGO_PKG_VERSION"),
        command: "learn",
        config: cfg.raw.clone(),
        params,
        learner: cfg.learner,
        seed,
        samples: obs.len(),
        layers: learned.metrics,
        recovered,
        top_density: learned.top_density,
        sampling_seconds,
        learning_seconds,
    };
    write_out(&cli.out, &to_json(&report))
}

#[derive(Debug, Serialize)]
struct EvalReport {
    layers: Vec<SignScores>,
    exact: bool,
    distance: DistanceEstimate,
    denoising_truth: Option<DenoisingReport>,
    denoising_learned: Option<DenoisingReport>,
}

/// Bottom-layer denoising rate: tied encoder with 10% bit flips, or the
/// real encoder with Gaussian noise of variance d / (4 log^2 n).
fn denoising(net: &DeepNet, trials: usize, seed: u64) -> Result<Option<DenoisingReport>> {
    let p = &net.params;
    let g = net.graph(0);
    let k = (p.density_schedule().rho[1] * g.n_upper() as f64).round() as usize;
    if k == 0 || trials == 0 {
        return Ok(None);
    }
    let d = p.expected_degree;
    let (spec, noise) = match p.output_mode {
        OutputMode::Thresholded => (EncoderSpec::tied(g, d)?, NoiseSpec::BitFlip(0.1)),
        OutputMode::RealValued => {
            let ln = (g.n_lower() as f64).ln();
            (EncoderSpec::last_layer(g, d)?, NoiseSpec::AdditiveGaussian(d / (4.0 * ln * ln)))
        }
    };
    Ok(Some(check_denoising(&spec, g, k, noise, trials, seed)?))
}

fn cmd_evaluate(cli: &Cli, truth: &Path, learned: &Path, samples: usize, trials: usize) -> Result<()> {
    let truth = load_net(truth)?;
    let learned = load_net(learned)?;
    let seed = cli.seed.unwrap_or(truth.params.rng_seed);
    let layers = compare_nets(&truth, &learned)?;
    let aligned = align_net(&truth, &learned)?;
    let report = EvalReport {
        exact: layers.iter().all(SignScores::exact),
        layers,
        distance: estimate_statistical_distance(&truth, &aligned, samples, seed)?,
        denoising_truth: denoising(&truth, trials, seed)?,
        denoising_learned: denoising(&learned, trials, seed)?,
    };
    write_out(&cli.out, &to_json(&report))
}

fn cmd_bench(cli: &Cli) -> Result<()> {
    let cfg = require_config(cli)?;
    let mut csv = String::from("n,d,rho,samples,seed,seconds,recovered,status\n");
    for &n in &cfg.sweep_n {
        for &d in &cfg.sweep_d {
            for &rho in &cfg.sweep_rho {
                for &seed in &cfg.seeds {
                    let mut point = cfg.clone();
                    point.params.layer_size = n;
                    point.params.expected_degree = d;
                    point.params.top_density = rho;
                    point.params.rng_seed = seed;
                    let (samples, seconds, recovered, status) = bench_point(&point, seed)?;
                    let _ = writeln!(csv, "{n},{d},{rho},{samples},{seed},{seconds:.6},{recovered},{status}");
                }
            }
        }
    }
    write_out(&cli.out, &csv)
}

/// One sweep point; library failures become a status, not an error.
fn bench_point(cfg: &ExperimentConfig, seed: u64) -> Result<(usize, f64, bool, &'static str)> {
    if let Err(e) = cfg.params.validate() {
        return Err(e.into());
    }
    let n_samples = cfg.sample_count();
    if cfg.enforce_regime && !cfg.regime_report().is_empty() {
        return Ok((n_samples, 0.0, false, "regime"));
    }
    let net = generate_network(&cfg.params)?;
    let obs: Vec<Observed> = generate_samples(&net, n_samples, seed, false).map(|s| s.observed).collect();
    let start = Instant::now();
    let out = learn_layerwise(&cfg.params, &obs, &layerwise_config(cfg, seed));
    let seconds = start.elapsed().as_secs_f64();
    Ok(match out {
        Ok(mut learned) => {
            let exact = evaluate_learned(&net, &mut learned)?.iter().all(SignScores::exact);
            (n_samples, seconds, exact, "ok")
        }
        Err(_) => (n_samples, seconds, false, "failed"),
    })
}

fn cmd_check_props(cli: &Cli, net: &Path, layer: usize) -> Result<()> {
    let net = load_net(net)?;
    if layer >= net.num_layers() {
        return Err(Error::InvalidParams(format!("layer {layer} out of range for {} layers", net.num_layers())).into());
    }
    let p = &net.params;
    let g = net.graph(layer);
    let d = p.expected_degree;
    let mut reports: Vec<PropertyReport> = vec![check_degree_band(g, d, 0.8, 1.2)];
    reports.extend(verify_recovery_properties(&g.positive_part(), d / 2.0, DEFAULT_PROPERTY_BUDGET)?.reports);
    let k = (p.density_schedule().rho[layer + 1] * g.n_upper() as f64).round() as usize;
    let mut r = rng::stream(cli.seed.unwrap_or(p.rng_seed), rng::DOMAIN_AUX, layer as u64);
    let s = sample_subset(g.n_upper(), k.min(g.n_upper()), &mut r);
    reports.push(check_unique_neighbor(g, s.support(), EPS_ENCODER));
    write_out(&cli.out, &to_json(&reports))
}

#[derive(Debug, Serialize)]
struct SeparationSummary {
    gadgets_found: usize,
    gadget_outputs: usize,
    all_certified: bool,
    gadgets: Vec<GadgetInstance>,
    certificates: Vec<InfeasibilityCertificate>,
    disagreement_rate: f64,
    disagreements: usize,
    samples: usize,
    no_certificate: bool,
    rho_top_squared: f64,
}

fn cmd_separation(
    cli: &Cli,
    net: Option<&Path>,
    train_samples: usize,
    eval_samples: usize,
    epochs: usize,
    max_outputs: usize,
    list: usize,
) -> Result<()> {
    let net = match net {
        Some(p) => load_net(p)?,
        None => generate_network(&require_config(cli)?.params)?,
    };
    let adv = AdversaryConfig {
        train_samples,
        epochs,
        seed: cli.seed.unwrap_or(net.params.rng_seed),
    };
    let r = run_separation(&net, &adv, eval_samples, max_outputs)?;
    let summary = SeparationSummary {
        gadgets_found: r.gadgets.len(),
        gadget_outputs: r.disagreement.gadget_outputs,
        all_certified: r.all_certified,
        gadgets: r.gadgets.into_iter().take(list).collect(),
        certificates: r.certificates.into_iter().take(list).collect(),
        disagreement_rate: r.disagreement.rate,
        disagreements: r.disagreement.disagreements,
        samples: r.disagreement.samples,
        no_certificate: r.disagreement.no_certificate,
        rho_top_squared: r.rho_top_squared,
    };
    write_out(&cli.out, &to_json(&summary))
}
