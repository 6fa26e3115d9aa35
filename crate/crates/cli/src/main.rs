//! `emgctl`: synthesise datasets, train, evaluate, stream and benchmark.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use emg_hand::config::KeyValues;
use emg_hand::gesture::{evaluate, train_with, variant_network, ArchVariant, TrainingConfig};
use emg_hand::nn::{load_params, parameter_count, save_params, NetworkSpec, ParameterStore};
use emg_hand::pipeline::{
    bench_inference, run_live, run_stream, FrameOutput, NetworkClassifier, PipelineConfig,
};
use emg_hand::postprocess::sweep;
use emg_hand::signal::{
    load_record, save_record, split_paper, synth_dataset, DatasetIndex, RecordStreamReader,
    SplitConfig, SynthSpec, WindowSet,
};

#[derive(Parser)]
#[command(name = "emgctl", version, about = "Raw-EMG prosthetic hand control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Network width options shared by commands that load weights.
#[derive(clap::Args, Clone, Copy)]
struct ArchArgs {
    /// Filters per convolution layer.
    #[arg(long, default_value_t = 512)]
    filters: usize,
    /// Units of the hidden dense layer.
    #[arg(long, default_value_t = 64)]
    dense: usize,
    /// Number of output classes.
    #[arg(long, default_value_t = 15)]
    classes: usize,
    /// Dropout rate the weights were trained with.
    #[arg(long, default_value_t = 0.5)]
    dropout: f32,
}

impl ArchArgs {
    fn spec(&self) -> NetworkSpec {
        variant_network(ArchVariant {
            conv_filters: self.filters,
            dense_units: self.dense,
            classes: self.classes,
            dropout_rate: self.dropout,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset of EMG1 records.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the network and write EMGW weights.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Report accuracy and the confusion matrix on every window of a dataset.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long, default_value_t = 20)]
        stride: usize,
        #[command(flatten)]
        arch: ArchArgs,
    },
    /// Run the control loop and emit command frames.
    Stream {
        #[arg(long)]
        weights: PathBuf,
        /// EMG1/emgcsv record, or `-` for a live EMG1 stream on stdin.
        #[arg(long = "in")]
        input: String,
        /// Binary frame file, or `-` for hex lines on stdout.
        #[arg(long, default_value = "-")]
        out: String,
        #[arg(long, default_value_t = 5)]
        fifo: usize,
        #[arg(long, default_value_t = 10)]
        rate: u32,
        /// Pipeline config file (key=value).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Replay a record file at its real sample rate through the live path.
        #[arg(long)]
        realtime: bool,
        #[command(flatten)]
        arch: ArchArgs,
    },
    /// Measure single-window inference latency.
    Bench {
        /// Weights file; random weights are used when omitted.
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        iters: usize,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[command(flatten)]
        arch: ArchArgs,
    },
    /// Print the post-processing error model for odd FIFO sizes up to nmax.
    SweepError {
        #[arg(long)]
        rho: f64,
        #[arg(long)]
        nmax: usize,
        #[arg(long, default_value_t = 1_000_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn read_kv(path: Option<&Path>) -> Result<KeyValues> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(KeyValues::parse(&text)?)
        }
        None => Ok(KeyValues::default()),
    }
}

fn load_dataset(dir: &Path) -> Result<DatasetIndex> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "emg1"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no .emg1 records in {}", dir.display());
    }
    let mut index = DatasetIndex::new();
    for p in paths {
        let bytes = fs::read(&p).with_context(|| format!("reading {}", p.display()))?;
        index.insert(load_record(&bytes).with_context(|| format!("parsing {}", p.display()))?)?;
    }
    Ok(index)
}

fn load_weights(path: &Path, spec: &NetworkSpec) -> Result<ParameterStore<f32>> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    load_params(&bytes, spec).with_context(|| format!("loading {}", path.display()))
}

fn synth(spec_path: &Path, out: &Path) -> Result<()> {
    let spec = SynthSpec::from_key_values(read_kv(Some(spec_path))?)?;
    let dataset = synth_dataset(&spec)?;
    fs::create_dir_all(out)?;
    for r in dataset.records() {
        let m = r.meta;
        let name = format!(
            "s{:02}_g{:02}_r{}.emg1",
            m.subject_id,
            m.gesture.index(),
            m.repetition
        );
        fs::write(out.join(name), save_record(r))?;
    }
    println!("wrote {} records to {}", dataset.len(), out.display());
    Ok(())
}

fn train_cmd(data: &Path, config: Option<&Path>, out: &Path) -> Result<()> {
    let mut kv = read_kv(config)?;
    let cfg = TrainingConfig::take_from(&mut kv)?;
    let mut variant = ArchVariant {
        dropout_rate: cfg.dropout_rate,
        ..Default::default()
    };
    kv.set("conv_filters", &mut variant.conv_filters)?;
    kv.set("dense_units", &mut variant.dense_units)?;
    kv.set("classes", &mut variant.classes)?;
    let split = SplitConfig::take_from(&mut kv)?;
    kv.finish()?;

    let spec = variant_network(variant);
    let dataset = Arc::new(load_dataset(data)?);
    let splits = split_paper(dataset, &split)?;
    eprintln!(
        "windows: train {} / validation {} / test {}; {} trainable parameters",
        splits.train.len(),
        splits.validation.len(),
        splits.test.len(),
        parameter_count(&spec)?.total
    );
    let stdout = io::stdout();
    let (params, metrics) = train_with(&spec, &splits.train, &splits.validation, &cfg, |r| {
        let _ = writeln!(stdout.lock(), "{r}");
    })?;
    fs::write(out, save_params(&spec, &params))?;
    if let Some(best) = metrics.best_epoch() {
        eprintln!(
            "best validation accuracy {:.4} at epoch {}",
            best.val_acc, best.epoch
        );
    }
    if !splits.test.is_empty() {
        let test = evaluate(&spec, &params, &splits.test)?;
        println!("test_acc,{:.6}", test.accuracy);
    }
    Ok(())
}

fn eval_cmd(data: &Path, weights: &Path, stride: usize, arch: ArchArgs) -> Result<()> {
    let spec = arch.spec();
    let params = load_weights(weights, &spec)?;
    let dataset = Arc::new(load_dataset(data)?);
    let all = emg_hand::signal::WindowSplit::all(dataset, spec.input.0, stride);
    let m = evaluate(&spec, &params, &all)?;
    println!("accuracy,{:.6},windows,{}", m.accuracy, all.len());
    print!("{}", m.confusion);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn stream_cmd(
    weights: &Path,
    input: &str,
    out: &str,
    fifo: usize,
    rate: u32,
    config: Option<&Path>,
    realtime: bool,
    arch: ArchArgs,
) -> Result<()> {
    let mut pcfg = match config {
        Some(_) => PipelineConfig::from_key_values(read_kv(config)?)?,
        None => PipelineConfig {
            fifo,
            rate,
            ..Default::default()
        },
    };
    if config.is_none() {
        pcfg.weights = Some(weights.to_path_buf());
    }
    let spec = arch.spec();
    let params = load_weights(pcfg.weights.as_deref().unwrap_or(weights), &spec)?;
    let mut classifier = NetworkClassifier::new(spec, params)?;

    let mut sink: Box<dyn Write> = if out == "-" {
        Box::new(BufWriter::new(io::stdout()))
    } else {
        Box::new(BufWriter::new(fs::File::create(out)?))
    };
    let hex = out == "-";
    let mut emit = |f: &FrameOutput| -> io::Result<()> {
        if hex {
            writeln!(sink, "{}", emg_hand::command::frame_hex(&f.frame))
        } else {
            sink.write_all(&f.frame)
        }
    };
    let (_, stats) = if input == "-" {
        let reader = RecordStreamReader::new(io::BufReader::new(io::stdin()))?;
        run_live(reader, &pcfg, &mut classifier, false, &mut emit)?
    } else if realtime {
        let file = io::BufReader::new(fs::File::open(input)?);
        run_live(
            RecordStreamReader::new(file)?,
            &pcfg,
            &mut classifier,
            true,
            &mut emit,
        )?
    } else {
        let bytes = fs::read(input).with_context(|| format!("reading {input}"))?;
        let record = load_record(&bytes)?;
        run_stream(&record, &pcfg, &mut classifier, &mut emit)?
    };
    if hex {
        writeln!(sink, "{stats}")?;
    } else {
        eprintln!("{stats}");
    }
    sink.flush()?;
    Ok(())
}

fn bench_cmd(weights: Option<&Path>, iters: usize, threads: usize, arch: ArchArgs) -> Result<()> {
    let spec = arch.spec();
    let params = match weights {
        Some(w) => load_weights(w, &spec)?,
        None => ParameterStore::init(&spec, 0)?,
    };
    let stats = bench_inference(&spec, &params, iters, threads)?;
    println!("{stats}");
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Synth { spec, out } => synth(&spec, &out),
        Command::Train { data, config, out } => train_cmd(&data, config.as_deref(), &out),
        Command::Eval {
            data,
            weights,
            stride,
            arch,
        } => eval_cmd(&data, &weights, stride, arch),
        Command::Stream {
            weights,
            input,
            out,
            fifo,
            rate,
            config,
            realtime,
            arch,
        } => stream_cmd(
            &weights,
            &input,
            &out,
            fifo,
            rate,
            config.as_deref(),
            realtime,
            arch,
        ),
        Command::Bench {
            weights,
            iters,
            threads,
            arch,
        } => bench_cmd(weights.as_deref(), iters, threads, arch),
        Command::SweepError {
            rho,
            nmax,
            trials,
            seed,
        } => {
            for row in sweep(rho, nmax, trials, seed)? {
                println!("{row}");
            }
            Ok(())
        }
    }
}
