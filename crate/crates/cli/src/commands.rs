use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use polygmdh::rng::derive_seed;
use polygmdh::signal::{extract_features, Recording, SpectralConfig, Window};
use polygmdh::synth::{recordings_dataset, write_recordings};
use polygmdh::{
    feature_report, generate_poly_task, generate_recordings, read_table, render_rules, BandSet, CsvTable, Error,
    FitConfig, Fitter, FnnTrainConfig, GrowthConfig, LabelColumn, LabelMap, NoiseKind, SelectionCriterion,
    SynthSpec,
};

use crate::error::{CliError, CliResult};
use crate::pipeline::{self, Method, TrainSettings, TrainedModel};
use crate::{
    CriterionArg, FeaturesArgs, FitterArg, MethodArg, NoiseArg, PredictArgs, RulesArgs, SynthEegArgs,
    SynthPolyArgs, TrainArgs, WindowArg,
};

fn open(path: &Path) -> CliResult<File> {
    File::open(path).map_err(|source| {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
        .into()
    })
}

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|source| {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
        .into()
    })
}

fn write_file(path: &Path, contents: &[u8]) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|source| CliError::Output {
        path: path.to_path_buf(),
        source,
    })
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| CliError::Output {
            path: path.to_path_buf(),
            source,
        })
}

fn report_io(source: std::io::Error) -> CliError {
    CliError::Output {
        path: "<stdout>".into(),
        source,
    }
}

pub fn load_table(path: &Path, label: &str) -> CliResult<CsvTable> {
    Ok(read_table(open(path)?, &LabelColumn::from(label))?)
}

pub fn features(args: &FeaturesArgs, out: &mut dyn Write) -> CliResult<()> {
    let bands = match BandSet::preset(&args.bands) {
        Some(b) => b,
        None => BandSet::parse_custom(&args.bands)?,
    };
    let rec = Recording::read_csv(open(&args.input)?, args.rate)?;
    let cfg = SpectralConfig {
        window: match args.window_fn {
            WindowArg::Hann => Window::Hann,
            WindowArg::Rectangular => Window::Rectangular,
        },
        remove_mean: args.remove_mean,
    };
    let table = extract_features(&rec, &bands, args.window, args.hop.unwrap_or(args.window), &cfg)?;
    log::info!("{} segments, {} features", table.rows.nrows(), table.names.len());
    match &args.out {
        Some(p) => table.write_csv(create(p)?)?,
        None => table.write_csv(out)?,
    }
    Ok(())
}

fn parse_class_names(s: &str) -> CliResult<LabelMap> {
    match s.split(',').map(str::trim).collect::<Vec<_>>()[..] {
        [a, b] if !a.is_empty() && !b.is_empty() && !a.contains(char::is_whitespace) && !b.contains(char::is_whitespace) => {
            Ok(LabelMap([a.to_string(), b.to_string()]))
        }
        _ => Err(CliError::Usage(format!(
            "--class-names expects two names without spaces separated by a comma, got {s:?}"
        ))),
    }
}

pub fn settings(args: &TrainArgs, seed: u64) -> CliResult<TrainSettings> {
    let fitter = match args.fitter {
        FitterArg::Lsm => Fitter::Lsm,
        FitterArg::Proj => {
            let cfg = FitConfig {
                chi: args.chi,
                delta: args.delta,
                epsilon: args.epsilon,
                max_steps: args.max_steps,
                seed,
                ..FitConfig::default()
            };
            cfg.validate()?;
            Fitter::Projection(cfg)
        }
    };
    if !(args.split > 0.0 && args.split < 1.0) {
        return Err(CliError::Usage(format!("--split {} is not in (0, 1)", args.split)));
    }
    let method = match args.method {
        MethodArg::Gmdh => Method::Gmdh,
        MethodArg::Chain => Method::Chain,
        MethodArg::Fnn => Method::Fnn,
    };
    let growth = GrowthConfig {
        width: args.width,
        max_layers: args.max_layers,
        fitter,
        criterion: match args.criterion {
            CriterionArg::Exterior => SelectionCriterion::Exterior,
            CriterionArg::Training => SelectionCriterion::Training,
        },
        seed,
        ..GrowthConfig::default()
    };
    let fnn = FnnTrainConfig {
        hidden: args.hidden,
        restarts: args.restarts,
        max_epochs: args.max_epochs,
        patience: args.patience,
        seed,
        ..FnnTrainConfig::default()
    };
    fnn.validate()?;
    let labels = match &args.class_names {
        Some(s) => parse_class_names(s)?,
        None => LabelMap::default(),
    };
    Ok(TrainSettings {
        method,
        growth,
        fnn,
        split: args.split,
        pca: args.pca,
        labels,
        seed,
    })
}

/// Error-count table: rows Train and Test, one column per method.
pub fn error_table(method: &str, train: usize, test: Option<usize>) -> String {
    let test = test.map_or_else(|| "-".to_string(), |t| t.to_string());
    let width = method.len().max(5);
    format!(
        "The number of errors\n{:<6} {:>width$}\n{:<6} {:>width$}\n{:<6} {:>width$}\n",
        "", method, "Train", train, "Test", test
    )
}

pub fn train(args: &TrainArgs, seed: u64, out: &mut dyn Write) -> CliResult<()> {
    let settings = settings(args, seed)?;
    let table = load_table(&args.input, &args.label)?;
    if table.labels.is_none() {
        return Err(Error::MissingLabelColumn(args.label.clone()).into());
    }
    let outcome = pipeline::train(&table, &settings)?;
    let train_eval = pipeline::evaluate(&outcome.model, &table, 0.5)?;
    let test_errors = match &args.test {
        Some(p) => {
            let t = load_table(p, &args.label)?;
            if t.labels.is_none() {
                return Err(Error::MissingLabelColumn(args.label.clone()).into());
            }
            pipeline::evaluate(&outcome.model, &t, 0.5)?.errors
        }
        None => None,
    };
    write_file(&args.out, outcome.model.to_text().as_bytes())?;
    if let Some(p) = &args.trace {
        write_file(p, outcome.trace_csv().as_bytes())?;
    }

    let mut report = String::new();
    if let Some(q) = outcome.components {
        let threshold = args.pca.unwrap_or(1.0);
        report.push_str(&format!(
            "PCA retained {q} components ({:.0}% variance threshold)\n",
            threshold * 100.0
        ));
    }
    if let (Some(t), TrainedModel::Poly(net)) = (&outcome.trace, &outcome.model) {
        report.push_str(&format!(
            "Network depth {} ({} neurons, {} features)\n",
            t.kept,
            net.neurons().len(),
            feature_report(net).count()
        ));
    }
    report.push_str(&error_table(
        settings.method.as_str(),
        train_eval.errors.unwrap_or(0),
        test_errors,
    ));
    out.write_all(report.as_bytes()).map_err(report_io)
}

pub fn predict(args: &PredictArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    if !args.threshold.is_finite() {
        return Err(CliError::Usage(format!("--threshold {} is not finite", args.threshold)));
    }
    let model = TrainedModel::from_text(&read_text(&args.model)?)?;
    let table = load_table(&args.input, &args.label)?;
    let eval = pipeline::evaluate(&model, &table, args.threshold)?;
    let mut text = String::from("row,score,class,name\n");
    for (i, (s, c)) in eval.scores.iter().zip(&eval.classes).enumerate() {
        text.push_str(&format!("{},{},{},{}\n", i + 1, s, c, model.labels().name(*c)));
    }
    match &args.out {
        Some(p) => write_file(p, text.as_bytes())?,
        None => out.write_all(text.as_bytes()).map_err(report_io)?,
    }
    if let (Some(e), Some(acc)) = (eval.errors, eval.accuracy()) {
        writeln!(err, "accuracy {:.4} ({} errors in {} rows)", acc, e, eval.scores.len()).map_err(report_io)?;
    }
    Ok(())
}

pub fn rules(args: &RulesArgs, out: &mut dyn Write) -> CliResult<()> {
    let net = match TrainedModel::from_text(&read_text(&args.model)?)? {
        TrainedModel::Poly(n) => n,
        TrainedModel::Fnn(_) => {
            return Err(CliError::Usage(
                "rules are only defined for polynomial models; this is a feed-forward network".into(),
            ))
        }
    };
    let report = feature_report(&net);
    let mut text = render_rules(&net);
    text.push_str(&format!("features used: {}\n", report.count()));
    for f in &report.features {
        text.push_str(&format!("  {} ({} neurons)\n", f.name, f.uses));
    }
    out.write_all(text.as_bytes()).map_err(report_io)
}

pub fn synth_eeg(args: &SynthEegArgs, seed: u64, out: &mut dyn Write) -> CliResult<()> {
    let spec = SynthSpec {
        channels: args.channels,
        rate: args.rate,
        duration: args.duration,
        noise: match args.noise {
            NoiseArg::None => NoiseKind::None,
            NoiseArg::Gaussian => NoiseKind::Gaussian,
            NoiseArg::Lognormal => NoiseKind::LogNormal,
        },
        noise_scale: args.noise_scale,
        overlap: args.overlap,
        recordings_per_class: args.per_class,
        seed,
        ..SynthSpec::default()
    };
    spec.validate()?;
    let recordings = generate_recordings(&spec)?;
    write_recordings(&args.out, &recordings)?;
    let data = recordings_dataset(&recordings, &spec.bands, args.window, args.window, &SpectralConfig::default())?;
    polygmdh::data::write_csv(&data, "label", create(&args.out.join("features.csv"))?)?;
    writeln!(
        out,
        "wrote {} recordings and {} feature rows to {}",
        recordings.len(),
        data.n(),
        args.out.display()
    )
    .map_err(report_io)
}

pub fn synth_poly(args: &SynthPolyArgs, seed: u64, out: &mut dyn Write) -> CliResult<()> {
    let task = generate_poly_task(args.depth, args.m, args.n, args.noise, seed)?;
    std::fs::create_dir_all(&args.out).map_err(|source| CliError::Output {
        path: args.out.clone(),
        source,
    })?;
    polygmdh::data::write_csv(&task.data, "label", create(&args.out.join("data.csv"))?)?;
    if args.test_n > 0 {
        let test = task.sample(args.test_n, derive_seed(seed, &[0x7E57]))?;
        polygmdh::data::write_csv(&test, "label", create(&args.out.join("test.csv"))?)?;
    }
    write_file(&args.out.join("truth.model"), task.truth.to_text().as_bytes())?;
    writeln!(out, "wrote depth-{} task with {} rows to {}", args.depth, args.n, args.out.display()).map_err(report_io)
}
