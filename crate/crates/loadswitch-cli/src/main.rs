//! Command-line front end: `sweep` runs configured studies, `estimate` runs
//! one estimator over a statistics file, `bound` prints error floors, and
//! `gen` writes a training file. Exit codes: 0 success, 2 configuration or
//! usage error, 3 numerical failure, 4 I/O failure.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;

use loadswitch::bounds::hcrb;
use loadswitch::estimators::{
    estimate_consistent, estimate_iid_quadratic, estimate_low_noise, estimate_single_packet,
    estimate_slow_fading, joint_map_ml_general, HybridEstimate, SolverSettings,
};
use loadswitch::model::{f_from_impedance, impedance_from_f, zadoff_chu};
use loadswitch::montecarlo::{
    bias_study, correlation_study, sweep, write_records_csv, MetricRecord,
};
use loadswitch::stats::read_stats_csv;
use loadswitch_cli::config::{
    build_prior, complex_flag, ComplexSpec, RunConfig, Study, TrainingFile,
};

#[derive(Parser)]
#[command(
    name = "loadswitch",
    version,
    about = "Channel and load-switch ratio estimation"
)]
struct Cli {
    /// Worker threads for Monte Carlo runs; defaults to the logical CPU count.
    /// Results are byte-identical regardless of this value.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the study described by a config file and write its records as CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write a JSON run manifest here.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Overrides the seed from the config file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Estimate the channel block and load ratio from a statistics file.
    Estimate {
        /// Statistics CSV as produced by the reduction layer.
        #[arg(long)]
        stats: PathBuf,
        /// general, iid_quadratic, low_noise, single_packet, slow_fading, or
        /// consistent.
        #[arg(long, default_value = "general")]
        method: String,
        /// Prior kind for the general method: iid, slow_fading, exponential.
        #[arg(long, default_value = "iid")]
        prior: String,
        /// Prior per-packet power.
        #[arg(long, default_value_t = 1.0)]
        sigma_h2: f64,
        /// Packet-lag correlation for the exponential prior.
        #[arg(long)]
        corr: Option<f64>,
        /// Load during the first training segment, as re+imj ohms.
        #[arg(long, value_parser = complex_flag, default_value = "50")]
        load1: Complex64,
        /// Load during the second training segment.
        #[arg(long, value_parser = complex_flag, default_value = "50+20j")]
        load2: Complex64,
        /// Emit one JSON object instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Print the channel and ratio error floors for a scenario and prior.
    Bound {
        /// Packets per block.
        #[arg(long, default_value_t = 10)]
        l: usize,
        #[arg(long, default_value_t = 1.0)]
        sigma_h2: f64,
        #[arg(long, default_value_t = 1.0)]
        noise_var: f64,
        /// Prior kind: iid, slow_fading, exponential.
        #[arg(long, default_value = "iid")]
        prior: String,
        /// Packet-lag correlation for the exponential prior.
        #[arg(long)]
        corr: Option<f64>,
        /// Training length and split; energies follow from the symbols.
        #[arg(long, default_value_t = 64)]
        t: usize,
        #[arg(long, default_value_t = 32)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        root: u64,
        #[arg(long, value_parser = complex_flag, default_value = "73+42.5j")]
        antenna: Complex64,
        #[arg(long, value_parser = complex_flag, default_value = "50")]
        load1: Complex64,
        #[arg(long, value_parser = complex_flag, default_value = "50+20j")]
        load2: Complex64,
    },
    /// Write a training sequence with a scenario skeleton.
    Gen {
        #[arg(long, default_value_t = 64)]
        t: usize,
        #[arg(long, default_value_t = 32)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        root: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_parser = complex_flag, default_value = "73+42.5j")]
        antenna: Complex64,
        #[arg(long, value_parser = complex_flag, default_value = "50")]
        load1: Complex64,
        #[arg(long, value_parser = complex_flag, default_value = "50+20j")]
        load2: Complex64,
    },
}

/// Failure with its process exit code.
struct Fail {
    code: u8,
    message: String,
}

impl Fail {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    fn io(message: impl Into<String>) -> Self {
        Self {
            code: 4,
            message: message.into(),
        }
    }
}

impl From<loadswitch::Error> for Fail {
    fn from(e: loadswitch::Error) -> Self {
        use loadswitch::Error as E;
        let code = match &e {
            E::NonFiniteImpedance { .. }
            | E::NegativeResistance { .. }
            | E::DegeneratePlan
            | E::BadSplit { .. }
            | E::ZeroSegmentEnergy { .. }
            | E::OddLength { .. }
            | E::BadRoot { .. }
            | E::InvalidParameter { .. }
            | E::LengthMismatch { .. }
            | E::EmptyInput { .. }
            | E::Parse { .. } => 2,
            E::SingularMap { .. }
            | E::UnboundedImpedance { .. }
            | E::NotPsd { .. }
            | E::SingularCovariance
            | E::Unidentifiable { .. }
            | E::SolverFailure { .. }
            | E::NoInformation
            | E::ZeroTrace
            | E::ExcessiveFailures { .. } => 3,
            E::Io(_) => 4,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot size the worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> Result<(), Fail> {
    match command {
        Command::Sweep {
            config,
            out,
            manifest,
            seed,
        } => cmd_sweep(&config, &out, manifest.as_deref(), seed),
        Command::Estimate {
            stats,
            method,
            prior,
            sigma_h2,
            corr,
            load1,
            load2,
            json,
        } => cmd_estimate(&stats, &method, &prior, sigma_h2, corr, load1, load2, json),
        Command::Bound {
            l,
            sigma_h2,
            noise_var,
            prior,
            corr,
            t,
            k,
            root,
            antenna,
            load1,
            load2,
        } => cmd_bound(
            l, sigma_h2, noise_var, &prior, corr, t, k, root, antenna, load1, load2,
        ),
        Command::Gen {
            t,
            k,
            root,
            out,
            antenna,
            load1,
            load2,
        } => cmd_gen(t, k, root, &out, antenna, load1, load2),
    }
}

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'static str,
    config_path: String,
    config: &'a RunConfig,
    seed: u64,
    records: usize,
    version: &'static str,
    started_unix_s: u64,
    finished_unix_s: u64,
    wall_ms: u128,
    outputs: Vec<String>,
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn cmd_sweep(
    config_path: &Path,
    out: &Path,
    manifest: Option<&Path>,
    seed_override: Option<u64>,
) -> Result<(), Fail> {
    let started = unix_now();
    let clock = Instant::now();
    let text = fs::read_to_string(config_path)
        .map_err(|e| Fail::io(format!("cannot read {}: {e}", config_path.display())))?;
    let mut config: RunConfig =
        toml::from_str(&text).map_err(|e| Fail::config(format!("bad config: {e}")))?;
    if let Some(seed) = seed_override {
        config.seed = seed;
    }
    let records: Vec<MetricRecord> = match config.study().map_err(Fail::config)? {
        Study::Sweep(c) => sweep(&c)?,
        Study::Bias(c, f_values) => bias_study(&c, &f_values)?,
        Study::Correlation(c, l_values) => correlation_study(&c, &l_values)?,
    };
    let file = fs::File::create(out)
        .map_err(|e| Fail::io(format!("cannot create {}: {e}", out.display())))?;
    let mut w = BufWriter::new(file);
    write_records_csv(&records, &mut w)?;
    w.flush().map_err(|e| Fail::io(e.to_string()))?;
    println!("wrote {} records to {}", records.len(), out.display());
    if let Some(path) = manifest {
        let doc = RunManifest {
            command: "sweep",
            config_path: config_path.display().to_string(),
            config: &config,
            seed: config.seed,
            records: records.len(),
            version: env!("CARGO_PKG_VERSION"),
            started_unix_s: started,
            finished_unix_s: unix_now(),
            wall_ms: clock.elapsed().as_millis(),
            outputs: vec![out.display().to_string()],
        };
        let body = serde_json::to_string_pretty(&doc)
            .map_err(|e| Fail::config(format!("cannot encode manifest: {e}")))?;
        fs::write(path, body + "\n")
            .map_err(|e| Fail::io(format!("cannot write {}: {e}", path.display())))?;
        println!("manifest at {}", path.display());
    }
    Ok(())
}

fn fmt_complex(c: Complex64) -> String {
    format!("{}{:+}j", c.re, c.im)
}

#[derive(Serialize)]
struct EstimateOut {
    method: String,
    packets: usize,
    f_hat: [f64; 2],
    z_a_hat: Option<[f64; 2]>,
    /// Absent when the objective sits at an exact-fit infinity.
    loglik: Option<f64>,
    h_hat: Vec<[f64; 2]>,
    candidates: Vec<[f64; 2]>,
}

fn pair(c: Complex64) -> [f64; 2] {
    [c.re, c.im]
}

#[allow(clippy::too_many_arguments)]
fn cmd_estimate(
    stats_path: &Path,
    method: &str,
    prior_kind: &str,
    sigma_h2: f64,
    corr: Option<f64>,
    load1: Complex64,
    load2: Complex64,
    json: bool,
) -> Result<(), Fail> {
    let file = fs::File::open(stats_path)
        .map_err(|e| Fail::io(format!("cannot read {}: {e}", stats_path.display())))?;
    let stats = read_stats_csv(BufReader::new(file))?;
    if prior_kind == "slow_fading" && stats.len() > 1 && method != "slow_fading" {
        return Err(Fail::config(format!(
            "a block-constant prior over {} packets makes the stacked covariance singular; \
             use --method slow_fading",
            stats.len()
        )));
    }
    let mut est: HybridEstimate = match method {
        "general" | "map_ml_general" => {
            let prior =
                build_prior(prior_kind, stats.len(), sigma_h2, corr).map_err(Fail::config)?;
            joint_map_ml_general(&stats, &prior, &SolverSettings::default())?
        }
        "iid_quadratic" => estimate_iid_quadratic(&stats, sigma_h2)?,
        "low_noise" => estimate_low_noise(&stats, sigma_h2)?,
        "single_packet" => estimate_single_packet(&stats, sigma_h2)?,
        "slow_fading" => estimate_slow_fading(&stats, sigma_h2)?,
        "consistent" => estimate_consistent(&stats, sigma_h2)?,
        other => {
            return Err(Fail::config(format!(
                "unknown method {other:?}; expected general, iid_quadratic, low_noise, \
                 single_packet, slow_fading, or consistent"
            )))
        }
    };
    est.z_a_hat = impedance_from_f(est.f_hat, load1, load2).ok();
    if json {
        let out = EstimateOut {
            method: est.method.to_string(),
            packets: stats.len(),
            f_hat: pair(est.f_hat),
            z_a_hat: est.z_a_hat.map(pair),
            loglik: est.loglik.is_finite().then_some(est.loglik),
            h_hat: est.h_hat.iter().copied().map(pair).collect(),
            candidates: est.candidates.iter().copied().map(pair).collect(),
        };
        println!(
            "{}",
            serde_json::to_string(&out).map_err(|e| Fail::config(e.to_string()))?
        );
        return Ok(());
    }
    println!("method     {}", est.method);
    println!("packets    {}", stats.len());
    println!("F_hat      {}", fmt_complex(est.f_hat));
    match est.z_a_hat {
        Some(za) => println!("Z_A_hat    {} ohms", fmt_complex(za)),
        None => println!("Z_A_hat    unbounded (ratio at the z2/z1 pole)"),
    }
    match est.loglik.is_finite() {
        true => println!("loglik     {}", est.loglik),
        false if est.loglik > 0.0 => println!("loglik     +inf (exact fit)"),
        false => println!("loglik     -inf"),
    }
    for (i, h) in est.h_hat.iter().enumerate() {
        println!("H_hat[{i}]   {}", fmt_complex(*h));
    }
    for c in &est.candidates {
        println!("candidate  {}", fmt_complex(*c));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_bound(
    l: usize,
    sigma_h2: f64,
    noise_var: f64,
    prior_kind: &str,
    corr: Option<f64>,
    t: usize,
    k: usize,
    root: u64,
    antenna: Complex64,
    load1: Complex64,
    load2: Complex64,
) -> Result<(), Fail> {
    let training = zadoff_chu(t, k, root)?;
    let f = f_from_impedance(antenna, load1, load2)?;
    let prior = build_prior(prior_kind, l, sigma_h2, corr).map_err(Fail::config)?;
    let report = hcrb(&prior, f, training.s1(), training.s2(), noise_var)?;
    let cov = prior.covariance();
    println!("packets       {l}");
    println!("prior         {prior_kind}");
    println!("sigma_h2      {sigma_h2}");
    println!("noise_var     {noise_var}");
    println!("s1            {}", training.s1());
    println!("s2            {}", training.s2());
    println!("f_true        {}", fmt_complex(f));
    let diag: Vec<String> = (0..l.min(32))
        .map(|i| {
            let c_ii = cov[(i, i)].re;
            let rel = if c_ii > 0.0 {
                report.h_block[(i, i)].re / c_ii
            } else {
                f64::NAN
            };
            rel.to_string()
        })
        .collect();
    let ellipsis = if l > 32 { " ..." } else { "" };
    println!("h_diag_rel    {}{}", diag.join(" "), ellipsis);
    let trace: f64 = (0..l).map(|i| cov[(i, i)].re).sum();
    let h_trace: f64 = (0..l).map(|i| report.h_block[(i, i)].re).sum();
    println!("rel_h_bound   {}", h_trace / trace);
    println!("f_bound       {}", report.f_bound);
    println!("rel_f_bound   {}", report.f_bound / f.norm_sqr());
    Ok(())
}

fn cmd_gen(
    t: usize,
    k: usize,
    root: u64,
    out: &Path,
    antenna: Complex64,
    load1: Complex64,
    load2: Complex64,
) -> Result<(), Fail> {
    let training = zadoff_chu(t, k, root)?;
    let doc = TrainingFile {
        antenna: ComplexSpec(antenna),
        load1: ComplexSpec(load1),
        load2: ComplexSpec(load2),
        t,
        k,
        root,
        symbols: training.symbols().iter().map(|&x| pair(x)).collect(),
    };
    let body = toml::to_string(&doc).map_err(|e| Fail::config(e.to_string()))?;
    fs::write(out, body).map_err(|e| Fail::io(format!("cannot write {}: {e}", out.display())))?;
    println!("wrote {t}-symbol training to {}", out.display());
    Ok(())
}
