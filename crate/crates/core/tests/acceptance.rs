//! Acceptance criteria. Each one runs in turn and prints a single
//! `PASS` / `FAIL` line; the process exits non-zero if any failed.

use std::collections::HashSet;
use std::panic::{self, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use emg_hand::command::{decode_command_frame, encode_command_frame, FrameError};
use emg_hand::gesture::{
    build_paper_network, evaluate, train, variant_network, ArchVariant, TrainingConfig,
};
use emg_hand::nn::{
    gradient_check, load_params, parameter_count, save_params, LayerSpec, NetworkSpec, NnError,
    ParameterStore, Shape,
};
use emg_hand::pipeline::{bench_inference, run_stream, Classifier, PipelineConfig, PipelineError};
use emg_hand::postprocess::{
    exact_majority_error, paper_error_bound, simulate_stream_error, ErrorModelParams,
};
use emg_hand::signal::{
    load_record, save_record, split_paper, synth_dataset, window_count, DatasetIndex, RecordMeta,
    SignalError, SplitConfig, SynthSpec, WindowSet, WindowSplit,
};
use emg_hand::{class_to_command, EmgRecord, FifoMemory, FingerCommand, GestureClass};

type Check = fn() -> Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($msg)+));
        }
    };
}

fn g(i: usize) -> GestureClass {
    GestureClass::new(i).unwrap()
}

fn architecture() -> Result<String, String> {
    let spec = build_paper_network();
    let shapes = spec.shapes().map_err(|e| e.to_string())?;
    let seq = |len, channels| Shape::Seq { len, channels };
    let mut expected = Vec::new();
    for len in [100, 50, 25, 13, 7, 4] {
        expected.push(seq(len, 512));
        expected.push(seq(len, 512));
    }
    expected.extend([
        Shape::Flat(2048),
        Shape::Flat(2048),
        Shape::Flat(64),
        Shape::Flat(64),
        Shape::Flat(64),
        Shape::Flat(15),
        Shape::Flat(15),
    ]);
    ensure!(shapes == expected, "shapes {shapes:?}");
    let counts = parameter_count(&spec).map_err(|e| e.to_string())?;
    let trainable: Vec<usize> = counts
        .per_layer
        .iter()
        .copied()
        .filter(|&c| c > 0)
        .collect();
    let table = [
        262656, 8389120, 4194816, 2097664, 1049088, 524800, 131136, 975,
    ];
    ensure!(trainable == table, "per-layer counts {trainable:?}");
    ensure!(counts.total == 16_650_255, "total {}", counts.total);
    Ok(format!(
        "{} layers, {} parameters",
        spec.layers.len(),
        counts.total
    ))
}

fn window_accounting() -> Result<String, String> {
    let dataset = synth_dataset(&SynthSpec::full_size(11)).map_err(|e| e.to_string())?;
    ensure!(dataset.len() == 360, "{} records", dataset.len());
    for r in dataset.records() {
        ensure!(
            r.num_samples() == 40_000,
            "record {:?} has {} samples",
            r.meta,
            r.num_samples()
        );
        ensure!(
            window_count(r.num_samples(), 200, 20) == 1991,
            "per-record count"
        );
    }
    let split =
        split_paper(Arc::new(dataset), &SplitConfig::default()).map_err(|e| e.to_string())?;
    let sizes = (split.train.len(), split.validation.len(), split.test.len());
    ensure!(sizes == (358_380, 179_190, 179_190), "sizes {sizes:?}");
    Ok(format!(
        "1991 windows per record; train {} / validation {} / test {}",
        sizes.0, sizes.1, sizes.2
    ))
}

fn random_small_network(rng: &mut ChaCha8Rng) -> NetworkSpec {
    loop {
        let len = rng.random_range(6..=20);
        let channels = rng.random_range(1..=3);
        let mut layers = Vec::new();
        for _ in 0..rng.random_range(1..=3) {
            layers.push(LayerSpec::Conv1d {
                filters: rng.random_range(1..=4),
                kernel: rng.random_range(1..=5),
                stride: rng.random_range(1..=2),
            });
            layers.push(LayerSpec::Relu);
        }
        layers.push(LayerSpec::Flatten);
        layers.push(LayerSpec::Dropout { rate: 0.5 });
        layers.push(LayerSpec::Dense {
            units: rng.random_range(2..=8),
        });
        layers.push(LayerSpec::Relu);
        layers.push(LayerSpec::Dropout { rate: 0.5 });
        layers.push(LayerSpec::Dense {
            units: rng.random_range(2..=6),
        });
        layers.push(LayerSpec::Softmax);
        let Ok(spec) = NetworkSpec::new((len, channels), layers) else {
            continue;
        };
        if parameter_count(&spec).is_ok_and(|c| c.total <= 10_000) {
            return spec;
        }
    }
}

fn gradients() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let networks = 24;
    for trial in 0..networks {
        let spec = random_small_network(&mut rng);
        let mut params = ParameterStore::<f32>::init(&spec, trial)
            .map_err(|e| e.to_string())?
            .cast::<f64>();
        for layer in &mut params.layers {
            for b in &mut layer.biases {
                *b = rng.random_range(-0.3..0.3);
            }
        }
        let input: Vec<f64> = (0..spec.input.0 * spec.input.1)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let classes = spec.num_outputs().map_err(|e| e.to_string())?;
        let label = rng.random_range(0..classes);
        let err = gradient_check(&spec, &params, &input, label, 1e-5).map_err(|e| e.to_string())?;
        ensure!(
            err < 1e-4,
            "network {trial} ({:?}): relative error {err:e}",
            spec.canonical_string()
        );
        worst = worst.max(err);
    }
    Ok(format!(
        "{networks} networks, worst relative error {worst:.2e}"
    ))
}

/// Count-and-compare over the present entries, newest last.
fn oracle(entries: &[usize]) -> usize {
    for &c in entries {
        if 2 * entries.iter().filter(|&&e| e == c).count() > entries.len() {
            return c;
        }
    }
    *entries.last().unwrap()
}

fn push_all(n: usize, items: &[usize]) -> Result<(), String> {
    let mut fifo = FifoMemory::new(n).unwrap();
    for (k, &c) in items.iter().enumerate() {
        let out = fifo.push_and_aggregate(g(c)).index();
        let window = &items[(k + 1).saturating_sub(n)..=k];
        ensure!(
            out == oracle(window),
            "n={n}, stream {items:?}: step {k} gave {out}"
        );
    }
    Ok(())
}

fn aggregation() -> Result<String, String> {
    let mut checked = 0;
    for a in 0..15 {
        for b in 0..15 {
            for c in 0..15 {
                push_all(3, &[a, b, c])?;
                checked += 1;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100_000 {
        let alphabet = rng.random_range(1..=15);
        let items: Vec<usize> = (0..5).map(|_| rng.random_range(0..alphabet)).collect();
        push_all(5, &items)?;
        checked += 1;
    }
    let long: Vec<usize> = (0..20_000).map(|_| rng.random_range(0..3)).collect();
    push_all(5, &long)?;

    let mut f = FifoMemory::new(5).unwrap();
    let outs: Vec<usize> = [3, 3, 3, 7, 7]
        .iter()
        .map(|&c| f.push_and_aggregate(g(c)).index())
        .collect();
    ensure!(outs[4] == 3, "[3,3,3,7,7] -> {}", outs[4]);
    let mut f = FifoMemory::new(5).unwrap();
    for c in [0, 1, 2, 3, 4] {
        f.push_and_aggregate(g(c));
    }
    ensure!(f.push_and_aggregate(g(5)) == g(5), "no-majority fallback");
    let contents: Vec<usize> = f.entries().map(|c| c.index()).collect();
    ensure!(contents == [1, 2, 3, 4, 5], "contents {contents:?}");
    ensure!(
        FifoMemory::new(5).unwrap().push_and_aggregate(g(8)) == g(8),
        "first push"
    );
    Ok(format!(
        "{checked} contents and a 20000-frame stream agree with the oracle"
    ))
}

fn binomial_tail(rho: f64, n: usize) -> f64 {
    let choose = |k: usize| (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64);
    (n.div_ceil(2)..=n)
        .map(|k| choose(k) * rho.powi(k as i32) * (1.0 - rho).powi((n - k) as i32))
        .sum()
}

fn error_model() -> Result<String, String> {
    for (n, want) in [(1, 0.1), (3, 0.01), (5, 0.001)] {
        let got = paper_error_bound(0.1, n).map_err(|e| e.to_string())?;
        // rho^k of the binary double nearest 0.1 is within a few ulp of the
        // decimal value
        ensure!(
            (got - want).abs() <= 4.0 * f64::EPSILON * want,
            "bound n={n}: {got}"
        );
    }
    let exact = exact_majority_error(0.1, 5).map_err(|e| e.to_string())?;
    ensure!((exact - 0.00856).abs() <= 1e-5, "exact {exact}");
    ensure!(
        (exact - binomial_tail(0.1, 5)).abs() <= 1e-15,
        "oracle mismatch"
    );
    let sim = simulate_stream_error(ErrorModelParams {
        rho: 0.1,
        n: 5,
        trials: 1_000_000,
        seed: 5,
    })
    .map_err(|e| e.to_string())?;
    let z = (sim.rate - exact).abs() / sim.stderr;
    ensure!(
        z <= 3.0,
        "monte carlo {} +- {} vs {exact} ({z:.2} SE)",
        sim.rate,
        sim.stderr
    );
    for rho in [0.05, 0.1, 0.2, 0.5] {
        for n in [3, 5, 7] {
            let bound = paper_error_bound(rho, n).map_err(|e| e.to_string())?;
            let tail = exact_majority_error(rho, n).map_err(|e| e.to_string())?;
            ensure!(
                (tail - binomial_tail(rho, n)).abs() <= 1e-12,
                "tail rho={rho} n={n}"
            );
            ensure!(
                bound <= tail,
                "rho={rho} n={n}: bound {bound} > exact {tail}"
            );
        }
    }
    Ok(format!(
        "exact {exact:.6}; monte carlo {:.6} +- {:.6} ({z:.2} SE)",
        sim.rate, sim.stderr
    ))
}

fn lookup() -> Result<String, String> {
    let table: [(&str, [u8; 5]); 15] = [
        ("Thumb", [1, 0, 0, 0, 0]),
        ("Index", [0, 1, 0, 0, 0]),
        ("Middle", [0, 0, 1, 0, 0]),
        ("Ring", [0, 0, 0, 1, 0]),
        ("Little", [0, 0, 0, 0, 1]),
        ("Thumb-Index", [1, 1, 0, 0, 0]),
        ("Thumb-Middle", [1, 0, 1, 0, 0]),
        ("Thumb-Ring", [1, 0, 0, 1, 0]),
        ("Thumb-Little", [1, 0, 0, 0, 1]),
        ("Hand Close", [0, 0, 0, 0, 0]),
        ("Index-Middle", [0, 1, 1, 0, 0]),
        ("Middle-Ring", [0, 0, 1, 1, 0]),
        ("Ring-Little", [0, 0, 0, 1, 1]),
        ("Index-Middle-Ring", [0, 1, 1, 1, 0]),
        ("Middle-Ring-Little", [0, 0, 1, 1, 1]),
    ];
    let mut seen = HashSet::new();
    for (i, (name, row)) in table.iter().enumerate() {
        let class = GestureClass::from_name(name).ok_or(format!("unknown gesture {name}"))?;
        ensure!(class == g(i), "{name} is class {}", class.index());
        ensure!(
            class_to_command(class) == FingerCommand(*row),
            "{name}: {}",
            class_to_command(class)
        );
        seen.insert(class_to_command(class));
    }
    ensure!(
        seen.len() == 15,
        "mapping is not injective: {} distinct commands",
        seen.len()
    );
    Ok("15 rows verbatim, 15 distinct commands".into())
}

fn toy_dataset(subject: u16, full: &DatasetIndex) -> DatasetIndex {
    let mut d = DatasetIndex::new();
    for r in full
        .records()
        .iter()
        .filter(|r| r.meta.subject_id == subject)
    {
        d.insert(r.clone()).unwrap();
    }
    d
}

fn toy_learning() -> Result<String, String> {
    let synth = SynthSpec::with_default_recipes(2, 3, 2, 2.5, 2000, 0.5, 0.05, 21);
    let full = synth_dataset(&synth).map_err(|e| e.to_string())?;
    let train_set = WindowSplit::all(Arc::new(toy_dataset(0, &full)), 200, 40);
    let held_out = WindowSplit::all(Arc::new(toy_dataset(1, &full)), 200, 40);
    ensure!(
        train_set.len() >= 600 && held_out.len() >= 300,
        "{} / {}",
        train_set.len(),
        held_out.len()
    );
    let spec = variant_network(ArchVariant {
        conv_filters: 8,
        dense_units: 16,
        classes: 3,
        dropout_rate: 0.5,
    });
    let config = TrainingConfig {
        learning_rate: 1e-3,
        batch_size: 32,
        epochs: 50,
        seed: 7,
        ..TrainingConfig::default()
    };
    let (params, metrics) =
        train(&spec, &train_set, &held_out, &config).map_err(|e| e.to_string())?;
    let (again, _) = train(&spec, &train_set, &held_out, &config).map_err(|e| e.to_string())?;
    ensure!(
        save_params(&spec, &params) == save_params(&spec, &again),
        "two runs differ"
    );
    let held = evaluate(&spec, &params, &held_out).map_err(|e| e.to_string())?;
    let first = metrics
        .history
        .iter()
        .find(|r| r.val_acc >= 0.95)
        .map(|r| r.epoch);
    ensure!(
        held.accuracy >= 0.95,
        "held-out accuracy {:.4}",
        held.accuracy
    );
    Ok(format!(
        "held-out accuracy {:.4} on {} windows ({} train), first >= 95% at epoch {:?}; reruns bit-identical",
        held.accuracy,
        held_out.len(),
        train_set.len(),
        first
    ))
}

/// Knows the label of the record it is fed.
struct Oracle(GestureClass);

impl Classifier for Oracle {
    fn input_shape(&self) -> (usize, usize) {
        (200, 8)
    }

    fn classify(&mut self, _: &[f32]) -> Result<GestureClass, PipelineError> {
        Ok(self.0)
    }
}

fn end_to_end() -> Result<String, String> {
    let synth = SynthSpec::with_default_recipes(1, 15, 1, 60.0, 2000, 0.5, 0.05, 8);
    let dataset = synth_dataset(&synth).map_err(|e| e.to_string())?;
    let config = PipelineConfig::default();
    let mut total = 0;
    for record in dataset.records() {
        let label = record.meta.gesture;
        let run = || {
            let mut bytes = Vec::new();
            let (outs, _) = run_stream(record, &config, &mut Oracle(label), |o| {
                bytes.extend_from_slice(&o.frame);
                Ok(())
            })
            .map_err(|e| e.to_string())?;
            Ok::<_, String>((outs, bytes))
        };
        let (outs, bytes) = run()?;
        let (_, again) = run()?;
        ensure!(bytes == again, "{}: file-mode runs differ", label.name());
        let expect = window_count(record.num_samples(), 200, 200);
        ensure!(
            outs.len() == expect && expect == 600,
            "{}: {} commands",
            label.name(),
            outs.len()
        );
        for (k, o) in outs.iter().enumerate().skip(1) {
            ensure!(
                o.command == class_to_command(label),
                "{} frame {k}",
                label.name()
            );
            let (cmd, seq) = decode_command_frame(&o.frame).map_err(|e| e.to_string())?;
            ensure!(
                cmd == class_to_command(label) && seq == k as u16,
                "frame {k} decode"
            );
        }
        total += outs.len();
    }
    Ok(format!(
        "15 records x 60 s -> {total} commands, 600 each, all match the label"
    ))
}

fn real_time() -> Result<String, String> {
    let narrow = variant_network(ArchVariant {
        conv_filters: 128,
        ..ArchVariant::default()
    });
    let params = ParameterStore::init(&narrow, 1).map_err(|e| e.to_string())?;
    let stats = bench_inference(&narrow, &params, 50, 1).map_err(|e| e.to_string())?;
    let full = build_paper_network();
    let full_params = ParameterStore::init(&full, 1).map_err(|e| e.to_string())?;
    let full_stats = bench_inference(&full, &full_params, 5, 1).map_err(|e| e.to_string())?;
    println!("    full 512-filter network, 1 worker: {full_stats}");
    ensure!(stats.p95_us < 100_000, "width-128 p95 {} us", stats.p95_us);
    Ok(format!(
        "width-128 p95 {:.1} ms (max {:.1} ms)",
        stats.p95_us as f64 / 1e3,
        stats.max_us as f64 / 1e3
    ))
}

fn round_trips() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..50 {
        let channels = rng.random_range(1..=8);
        let n = rng.random_range(0..300);
        let samples: Vec<f32> = (0..n * channels)
            .map(|_| rng.random_range(-5.0f32..5.0))
            .collect();
        let meta = RecordMeta {
            subject_id: rng.random(),
            gesture: g(rng.random_range(0..15)),
            repetition: rng.random(),
        };
        let record = EmgRecord::new(channels, rng.random_range(1..100_000), samples, meta).unwrap();
        let bytes = save_record(&record);
        let back = load_record(&bytes).map_err(|e| e.to_string())?;
        ensure!(
            back == record && save_record(&back) == bytes,
            "record round trip"
        );
        let mut bad = bytes.clone();
        bad[0] ^= 0xFF;
        ensure!(
            matches!(
                load_record(&bad),
                Err(SignalError::BadMagic | SignalError::Csv { .. })
            ),
            "record magic"
        );
        if !bytes.is_empty() {
            let cut = rng.random_range(8..bytes.len());
            ensure!(
                matches!(
                    load_record(&bytes[..cut]),
                    Err(SignalError::Truncated { .. })
                ),
                "record truncated at {cut}: {:?}",
                load_record(&bytes[..cut]).err()
            );
        }
    }
    for seed in 0..20 {
        let spec = random_small_network(&mut rng);
        let params = ParameterStore::<f32>::init(&spec, seed).map_err(|e| e.to_string())?;
        let bytes = save_params(&spec, &params);
        let back = load_params(&bytes, &spec).map_err(|e| e.to_string())?;
        let same = params
            .values()
            .zip(back.values())
            .all(|(a, b)| a.to_bits() == b.to_bits());
        ensure!(
            same && back.num_params() == params.num_params(),
            "weights round trip"
        );
        let mut bad = bytes.clone();
        bad[1] ^= 0x40;
        ensure!(
            matches!(load_params(&bad, &spec), Err(NnError::BadMagic)),
            "weights magic"
        );
        let cut = rng.random_range(0..bytes.len());
        ensure!(
            matches!(
                load_params(&bytes[..cut], &spec),
                Err(NnError::Truncated(_))
            ),
            "weights truncated at {cut}"
        );
    }
    for _ in 0..10_000 {
        let cmd = FingerCommand(std::array::from_fn(|_| rng.random_range(0..=1)));
        let seq = rng.random();
        let frame = encode_command_frame(cmd, seq);
        ensure!(
            decode_command_frame(&frame) == Ok((cmd, seq)),
            "frame round trip"
        );
        let mut bad = frame;
        bad[rng.random_range(1..9)] ^= 1 << rng.random_range(0..8);
        ensure!(
            matches!(
                decode_command_frame(&bad),
                Err(FrameError::Checksum { .. } | FrameError::FingerValue { .. })
            ),
            "frame corruption undetected"
        );
        let mut bad = frame;
        bad[0] = 0x5A;
        ensure!(
            matches!(decode_command_frame(&bad), Err(FrameError::BadSync(0x5A))),
            "frame sync"
        );
        ensure!(
            matches!(
                decode_command_frame(&frame[..8]),
                Err(FrameError::Length(8))
            ),
            "frame length"
        );
    }
    Ok("50 records, 20 weight files, 10000 frames".into())
}

fn main() {
    let criteria: [(&str, Check); 10] = [
        ("architecture conformance", architecture),
        ("window accounting", window_accounting),
        ("gradient correctness", gradients),
        ("aggregation oracle", aggregation),
        ("error-model consistency", error_model),
        ("lookup fidelity", lookup),
        ("toy-scale learning", toy_learning),
        ("end-to-end integrity", end_to_end),
        ("real-time budget", real_time),
        ("format round-trips", round_trips),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or(p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {:>2} PASS {name} ({secs:.1} s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name} ({secs:.1} s): {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
