//! `sirec`: sweep generation, RIR estimation, dataset synthesis, training,
//! evaluation, search, code export and ingestion.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;

use sirec_core::dsp::{generate_stepped_sweep, RirPipeline};
use sirec_core::evaluation::{evaluate_model, f1_macro, run_repeated_eval};
use sirec_core::ingest::{ingest_mqtt, ingest_ndjson, IngestStats, Ingestor, MqttClient, MqttOptions};
use sirec_core::search::{results_csv, stochastic_search};
use sirec_core::signal_file::{read_signal_csv, read_wav_pcm16, write_signal_csv, write_wav_pcm16};
use sirec_core::sirec::{deserialize, export_portable_source, serialize};
use sirec_core::synth::generate_split;
use sirec_core::{
    Error, EvalReport, IntervalBounds, LabeledDataset, Result, SampledSignal, SceneConfig, SearchSpace, SirecModel,
    SweepConfig, TrainConfig, WindowKind,
};

const EXIT_USAGE: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

#[derive(Parser)]
#[command(
    name = "sirec",
    version,
    about = "Acoustic fill-level sensing with random-interval tree ensembles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the stepped excitation sweep.
    SweepGen {
        /// Sweep configuration (JSON); defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = SignalFormat::Csv)]
        format: SignalFormat,
    },
    /// Denoise a recording and estimate its room impulse response.
    Rir {
        /// Recording frame, CSV or WAV (by extension).
        recording: PathBuf,
        /// Sweep configuration (JSON).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Spectral subtraction strength.
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, value_enum, default_value_t = Window::Hann)]
        window: Window,
        /// Keep the response at the sweep position instead of rotating it to index 0.
        #[arg(long)]
        no_align: bool,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = SignalFormat::Csv)]
        format: SignalFormat,
    },
    /// Generate a synthetic train/test dataset pair.
    Synth {
        /// Scene configuration (JSON).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory; receives train.csv and test.csv.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        train_rows: usize,
        #[arg(long, default_value_t = 10)]
        test_rows: usize,
    },
    /// Fit an ensemble and write the model file.
    Train {
        dataset: PathBuf,
        /// Training configuration (JSON); flags below override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: TrainOverrides,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a model on a dataset, or run repeated fits with --train.
    Eval {
        dataset: PathBuf,
        /// Stored model to score.
        #[arg(long, conflicts_with = "train", required_unless_present = "train")]
        model: Option<PathBuf>,
        /// Training set for repeated fit-and-score runs.
        #[arg(long)]
        train: Option<PathBuf>,
        /// Training configuration (JSON) for repeated runs.
        #[arg(long, requires = "train")]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: TrainOverrides,
        #[arg(long, default_value_t = 20, requires = "train")]
        iterations: usize,
        #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
        format: ReportFormat,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Random hyperparameter search.
    Search {
        train: PathBuf,
        test: PathBuf,
        /// Search space (JSON).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export a model as a standalone C++ source file.
    Codegen {
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Turn incoming recordings into dataset rows.
    Ingest {
        /// Dataset file to append to; created when missing.
        #[arg(long)]
        out: PathBuf,
        /// Scene configuration (JSON) supplying sweep and pipeline settings.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Newline-delimited JSON messages; "-" reads stdin.
        #[arg(long, conflicts_with = "broker", required_unless_present = "broker")]
        input: Option<PathBuf>,
        /// MQTT broker, host:port.
        #[arg(long, env = "SIREC_BROKER")]
        broker: Option<String>,
        #[arg(long, default_value = "sirec/#")]
        topic: String,
        /// Stop after this many broker messages.
        #[arg(long)]
        max_messages: Option<usize>,
    },
}

#[derive(clap::Args, Default)]
struct TrainOverrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_estimators: Option<usize>,
    #[arg(long)]
    segment_length: Option<usize>,
    #[arg(long)]
    min_len: Option<usize>,
    #[arg(long)]
    max_len: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SignalFormat {
    Csv,
    Wav,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Json,
    Csv,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum Window {
    Hann,
    Rectangular,
}

impl From<Window> for WindowKind {
    fn from(w: Window) -> Self {
        match w {
            Window::Hann => WindowKind::Hann,
            Window::Rectangular => WindowKind::Rectangular,
        }
    }
}

fn with_path(path: &Path, e: io::Error) -> Error {
    Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| with_path(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| with_path(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| with_path(path, e))
}

fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => serde_json::from_reader(open(p)?).map_err(|e| Error::Config(format!("{}: {e}", p.display()))),
    }
}

fn read_dataset(path: &Path) -> Result<LabeledDataset> {
    LabeledDataset::read_csv(open(path)?)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_file(p, text.as_bytes()),
        None => Ok(io::stdout().lock().write_all(text.as_bytes())?),
    }
}

fn write_signal(signal: &SampledSignal, out: &Path, format: SignalFormat) -> Result<()> {
    let mut w = create(out)?;
    match format {
        SignalFormat::Csv => write_signal_csv(signal, &mut w)?,
        SignalFormat::Wav => write_wav_pcm16(signal, &mut w)?,
    }
    w.flush().map_err(|e| with_path(out, e))
}

fn read_signal(path: &Path, rate: f64) -> Result<SampledSignal> {
    let is_wav = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav"));
    if is_wav {
        read_wav_pcm16(open(path)?)
    } else {
        read_signal_csv(open(path)?, Some(rate))
    }
}

/// Model defaults: segment 300, 100 trees, intervals of 17 to 153 samples.
fn default_train_config() -> TrainConfig {
    TrainConfig::new(100, 300, IntervalBounds::new(17, 153), 0)
}

fn train_config(path: Option<&Path>, o: &TrainOverrides) -> Result<TrainConfig> {
    let mut cfg = match path {
        None => default_train_config(),
        Some(p) => serde_json::from_reader(open(p)?).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
    };
    if let Some(v) = o.seed {
        cfg.random_state = v;
    }
    if let Some(v) = o.n_estimators {
        cfg.n_estimators = v;
    }
    if let Some(v) = o.segment_length {
        cfg.segment_length = v;
    }
    if let Some(v) = o.min_len {
        cfg.min_len = v;
    }
    if let Some(v) = o.max_len {
        cfg.max_len = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn report_text(report: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => report.to_json() + "\n",
        ReportFormat::Csv => report.scores_csv(),
        ReportFormat::Text => report.to_text(),
    }
}

fn print_ingest(stats: IngestStats) {
    eprintln!(
        "appended {}, unlabeled {}, rejected {}",
        stats.appended, stats.unlabeled, stats.rejected
    );
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::SweepGen { config, out, format } => {
            let sweep: SweepConfig = load_config(config.as_deref())?;
            write_signal(&generate_stepped_sweep(&sweep)?, &out, format)
        }
        Command::Rir {
            recording,
            config,
            alpha,
            window,
            no_align,
            out,
            format,
        } => {
            let sweep: SweepConfig = load_config(config.as_deref())?;
            let rec = read_signal(&recording, sweep.sample_rate_hz)?;
            let pipeline = RirPipeline::new(&sweep, alpha, window.into(), !no_align)?;
            let rir = SampledSignal::new(pipeline.measure(&rec)?, sweep.sample_rate_hz)?;
            write_signal(&rir, &out, format)
        }
        Command::Synth {
            config,
            seed,
            out,
            train_rows,
            test_rows,
        } => {
            let scene: SceneConfig = load_config(config.as_deref())?;
            let (train, test) = generate_split(&scene, train_rows, test_rows, seed)?;
            std::fs::create_dir_all(&out).map_err(|e| with_path(&out, e))?;
            for (name, data) in [("train.csv", &train), ("test.csv", &test)] {
                let path = out.join(name);
                let mut w = create(&path)?;
                data.write_csv(&mut w)?;
                w.flush().map_err(|e| with_path(&path, e))?;
            }
            eprintln!(
                "wrote {} train and {} test rows to {}",
                train.len(),
                test.len(),
                out.display()
            );
            Ok(())
        }
        Command::Train {
            dataset,
            config,
            overrides,
            out,
        } => {
            let cfg = train_config(config.as_deref(), &overrides)?;
            let data = read_dataset(&dataset)?;
            let model = SirecModel::fit(&data, &cfg)?;
            write_file(&out, &serialize(&model))?;
            let rirs: Vec<&[f64]> = data.rows().iter().map(|r| r.rir.as_slice()).collect();
            let f1 = f1_macro(&data.labels(), &model.predict_batch(&rirs)?)?;
            println!("training macro F1 {f1:.4}");
            Ok(())
        }
        Command::Eval {
            dataset,
            model,
            train,
            config,
            overrides,
            iterations,
            format,
            out,
        } => {
            let test = read_dataset(&dataset)?;
            let report = match (model, train) {
                (Some(m), _) => {
                    let bytes = std::fs::read(&m).map_err(|e| with_path(&m, e))?;
                    evaluate_model(&deserialize(&bytes)?, &test)?
                }
                (None, Some(t)) => {
                    let cfg = train_config(config.as_deref(), &overrides)?;
                    run_repeated_eval(&read_dataset(&t)?, &test, &cfg, iterations, cfg.random_state)?
                }
                (None, None) => unreachable!("clap requires --model or --train"),
            };
            emit(out.as_deref(), &report_text(&report, format))
        }
        Command::Search {
            train,
            test,
            config,
            budget,
            seed,
            out,
        } => {
            let space: SearchSpace = load_config(config.as_deref())?;
            let results = stochastic_search(&read_dataset(&train)?, &read_dataset(&test)?, &space, budget, seed)?;
            emit(out.as_deref(), &results_csv(&results))
        }
        Command::Codegen { model, out } => {
            let bytes = std::fs::read(&model).map_err(|e| with_path(&model, e))?;
            write_file(&out, export_portable_source(&deserialize(&bytes)?).as_bytes())
        }
        Command::Ingest {
            out,
            config,
            input,
            broker,
            topic,
            max_messages,
        } => {
            let scene: SceneConfig = load_config(config.as_deref())?;
            let mut ingestor = Ingestor::open(&out, &scene)?;
            let stats = match (input, broker) {
                (Some(p), _) if p.as_os_str() == "-" => ingest_ndjson(io::stdin().lock(), &mut ingestor)?,
                (Some(p), _) => ingest_ndjson(open(&p)?, &mut ingestor)?,
                (None, Some(addr)) => {
                    let mut client = MqttClient::connect(addr.as_str(), &MqttOptions::default())?;
                    client.subscribe(&topic)?;
                    let stats = ingest_mqtt(&mut client, &mut ingestor, max_messages)?;
                    client.disconnect()?;
                    stats
                }
                (None, None) => unreachable!("clap requires --input or --broker"),
            };
            print_ingest(stats);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error[usage]: {first}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.kind());
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
