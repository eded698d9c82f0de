use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use mi_bci::chance::{metric_values, significance_table, ChanceReport, SignificanceRow};
use mi_bci::config::ExperimentConfig;
use mi_bci::error::ErrorClass;
use mi_bci::experiment;
use mi_bci::model::PipelineModel;
use mi_bci::protocol::transport::DecisionSender;
use mi_bci::protocol::{compute_metrics, Decision, SessionLog, SessionMetrics, SessionStatus};
use mi_bci::EegRecording;

#[derive(Parser)]
#[command(name = "mi-bci", version, about = "Motor-imagery BCI engine and session simulator")]
struct Cli {
    /// Base seed for every random stream (ignored when --config is given).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Experiment config (JSON). Takes precedence over all other flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Online,
    Sham,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write two synthetic sham-run calibration recordings plus ground truth.
    Synth,
    /// Fit the pipeline on calibration recordings; writes the model and CV report.
    Calibrate {
        /// Recordings to use instead of the two written by `synth`.
        #[arg(long, num_args = 1..)]
        recordings: Vec<PathBuf>,
    },
    /// Run the maze with the synthetic subject; writes the session log.
    Session {
        #[arg(long, value_enum, default_value = "online")]
        mode: Mode,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Also send every decision as a datagram to this address.
        #[arg(long)]
        udp: Option<String>,
    },
    /// Monte Carlo chance levels for both dummy classifiers.
    Benchmark {
        /// Model whose calibration class counts set the stratified priors.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Number of simulated sessions per null model.
        #[arg(long)]
        runs: Option<u64>,
    },
    /// Significance table of a session against the chance report.
    Report {
        #[arg(long)]
        session: Option<PathBuf>,
        #[arg(long)]
        chance: Option<PathBuf>,
    },
    /// Print the effective config as JSON.
    Config,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<mi_bci::Error>().map(mi_bci::Error::class) {
        Some(ErrorClass::Config) => 2,
        Some(ErrorClass::Infeasible) => 4,
        Some(ErrorClass::Data) | None => 3,
    }
}

fn load_config(cli: &Cli, runs: Option<u64>) -> anyhow::Result<ExperimentConfig> {
    let cfg = match &cli.config {
        Some(path) => {
            if cli.seed.is_some() || runs.is_some() {
                eprintln!("note: --config given; --seed/--runs flags are ignored");
            }
            ExperimentConfig::load(path)?
        }
        None => {
            let mut cfg = ExperimentConfig::with_seed(cli.seed.unwrap_or(0));
            if let Some(r) = runs {
                cfg.benchmark_runs = r;
            }
            cfg.validate()?;
            cfg
        }
    };
    Ok(cfg)
}

fn out_path(cli: &Cli, name: &str) -> PathBuf {
    cli.out.join(name)
}

fn ensure_out(cli: &Cli) -> anyhow::Result<()> {
    fs::create_dir_all(&cli.out)
        .map_err(mi_bci::Error::from)
        .with_context(|| format!("cannot create output directory {}", cli.out.display()))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
    fs::write(path, contents)
        .map_err(mi_bci::Error::from)
        .with_context(|| format!("cannot write {}", path.display()))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match &cli.cmd {
        Cmd::Synth => cmd_synth(&cli),
        Cmd::Calibrate { recordings } => cmd_calibrate(&cli, recordings),
        Cmd::Session { mode, model, udp } => cmd_session(&cli, *mode, model.as_deref(), udp.as_deref()),
        Cmd::Benchmark { model, runs } => cmd_benchmark(&cli, model.as_deref(), *runs),
        Cmd::Report { session, chance } => cmd_report(&cli, session.as_deref(), chance.as_deref()),
        Cmd::Config => {
            let cfg = load_config(&cli, None)?;
            println!("{}", serde_json::to_string_pretty(&cfg)?);
            Ok(())
        }
    }
}

fn cmd_synth(cli: &Cli) -> anyhow::Result<()> {
    let cfg = load_config(cli, None)?;
    ensure_out(cli)?;
    let outputs = experiment::synth_calibration(&cfg)?;
    for (i, out) in outputs.iter().enumerate() {
        let rec_path = out_path(cli, &cfg.paths.recordings[i]);
        write(&rec_path, out.recording.to_bytes())?;
        write(&out_path(cli, &cfg.paths.ground_truth[i]), out.truth.to_json()?)?;
        let trials = mi_bci::dsp::trial_spans(&out.recording)?.len();
        println!(
            "wrote {} ({} samples, {trials} trials, sham p = {})",
            rec_path.display(),
            out.recording.n_samples(),
            cfg.sham_p[i]
        );
    }
    cfg.save(out_path(cli, "config.json"))?;
    println!("config_hash={}", cfg.hash());
    Ok(())
}

fn cmd_calibrate(cli: &Cli, recordings: &[PathBuf]) -> anyhow::Result<()> {
    let cfg = load_config(cli, None)?;
    let paths: Vec<PathBuf> = if recordings.is_empty() {
        cfg.paths.recordings.iter().map(|r| out_path(cli, r)).collect()
    } else {
        recordings.to_vec()
    };
    let recs = paths
        .iter()
        .map(|p| EegRecording::load(p).with_context(|| format!("loading {}", p.display())))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let (model, report) = experiment::calibrate_model(&recs, &cfg)?;
    ensure_out(cli)?;
    let model_path = out_path(cli, &cfg.paths.model);
    model.save(&model_path).with_context(|| format!("cannot write {}", model_path.display()))?;
    write(&out_path(cli, &cfg.paths.cv_report), report.to_text(&cfg.hash()))?;
    println!(
        "segments={} best_k={} best_c={} mean_kappa={:.4}",
        report.n_segments, report.cv.best_k, report.cv.best_c, report.cv.mean_kappa
    );
    println!("verdict: {}", report.verdict());
    println!("wrote {}", model_path.display());
    Ok(())
}

fn print_metrics(m: &SessionMetrics) {
    let v = metric_values(m);
    println!("overall: {}/{} = {:.2}%", m.successes, m.trials, v[0].unwrap_or(f64::NAN));
    for (i, name) in ["LEFT_HAND", "RIGHT_HAND", "FEET"].iter().enumerate() {
        let (s, n) = m.per_task[i];
        println!("{name}: {s}/{n}");
    }
    println!("duration_s: {}", m.duration_s);
}

fn cmd_session(cli: &Cli, mode: Mode, model: Option<&Path>, udp: Option<&str>) -> anyhow::Result<()> {
    let cfg = load_config(cli, None)?;
    let log = match mode {
        Mode::Sham => experiment::sham_session(&cfg)?,
        Mode::Online => {
            let path = model.map(Path::to_path_buf).unwrap_or_else(|| out_path(cli, &cfg.paths.model));
            let model = PipelineModel::load(&path).with_context(|| format!("loading {}", path.display()))?;
            let sink: Option<Box<dyn FnMut(u64, Decision)>> = match udp {
                Some(addr) => {
                    let mut tx = DecisionSender::connect(addr)?;
                    Some(Box::new(move |ts, d: Decision| {
                        if let Err(e) = tx.send(d.class(), ts) {
                            eprintln!("warning: decision not sent: {e}");
                        }
                    }))
                }
                None => None,
            };
            experiment::online_session(&model, &cfg, sink)?
        }
    };
    ensure_out(cli)?;
    let path = out_path(cli, &cfg.paths.session_log);
    log.save(&path).with_context(|| format!("cannot write {}", path.display()))?;
    if let SessionStatus::Incomplete { trials_finished } = log.status {
        bail!(mi_bci::Error::InvalidInput(format!(
            "decision stream ended after {trials_finished} trials"
        )));
    }
    print_metrics(&compute_metrics(&log.outcomes)?);
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_benchmark(cli: &Cli, model: Option<&Path>, runs: Option<u64>) -> anyhow::Result<()> {
    let cfg = load_config(cli, runs)?;
    let default_model = out_path(cli, &cfg.paths.model);
    let model_path = model.map(Path::to_path_buf).or_else(|| default_model.exists().then_some(default_model));
    let counts = match model_path {
        Some(p) => {
            let m = PipelineModel::load(&p).with_context(|| format!("loading {}", p.display()))?;
            println!("stratified priors from calibration class counts in {}", p.display());
            m.class_counts
        }
        None => {
            println!("stratified priors from the maze trial mix (no model found)");
            experiment::maze_priors(&experiment::maze(&cfg))
        }
    };
    let report = experiment::benchmark(&cfg, counts)?;
    ensure_out(cli)?;
    let path = out_path(cli, &cfg.paths.chance_report);
    report.save(&path).with_context(|| format!("cannot write {}", path.display()))?;
    for d in &report.distributions {
        println!("{},{},mean={:.4},std={:.4}", d.null_model.name(), d.metric, d.mean, d.std);
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_report(cli: &Cli, session: Option<&Path>, chance: Option<&Path>) -> anyhow::Result<()> {
    let cfg = load_config(cli, None)?;
    let sp = session.map(Path::to_path_buf).unwrap_or_else(|| out_path(cli, &cfg.paths.session_log));
    let cp = chance.map(Path::to_path_buf).unwrap_or_else(|| out_path(cli, &cfg.paths.chance_report));
    let log = SessionLog::load(&sp).with_context(|| format!("loading {}", sp.display()))?;
    let chance = ChanceReport::load(&cp).with_context(|| format!("loading {}", cp.display()))?;
    let metrics = compute_metrics(&log.outcomes)?;
    let rows = significance_table(&metrics, log.maze_seed, &chance)?;
    let mut text = String::new();
    text.push_str("# mi-bci significance report v1\n");
    text.push_str(&format!("# session_config_hash={}\n", log.config_hash));
    text.push_str(&format!("# chance_config_hash={}\n", chance.config_hash));
    text.push_str(&format!("# maze_seed={}\n", log.maze_seed));
    text.push_str(SignificanceRow::HEADER);
    text.push('\n');
    for r in &rows {
        text.push_str(&r.to_line());
        text.push('\n');
    }
    print!("{text}");
    ensure_out(cli)?;
    write(&out_path(cli, &cfg.paths.report), text)?;
    Ok(())
}
