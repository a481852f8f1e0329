use std::io::Write;
use std::path::{Path, PathBuf};

use gdr_ae::analysis::{
    bler_sweep, capacity_table, db_grid, snr_moments_mc, trained_snr_study, LinearReceiverMap,
    SweepConfig,
};
use gdr_ae::autoencoder::{
    load_model, save_model, train, Autoencoder, ParamCounts, TrainingConfig,
};
use gdr_ae::channel::{streams, RngStream};
use gdr_ae::codec::GdrCodec;
use gdr_ae::report;

use crate::plot;
use crate::{
    BlerArgs, CapacityArgs, CliError, CodecArgs, Command, GridArgs, MomentsArgs, ParamsArgs,
    SnrStudyArgs, TrainArgs, TrainingArgs,
};

type Result<T> = std::result::Result<T, CliError>;

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn invalid(e: gdr_ae::Error) -> CliError {
    match e {
        gdr_ae::Error::Domain(msg) | gdr_ae::Error::InvalidInput(msg) => CliError::Usage(msg),
        other => CliError::Usage(other.to_string()),
    }
}

fn codec(args: &CodecArgs) -> Result<GdrCodec> {
    if args.vector_size < 2 {
        return Err(usage(format!(
            "vector size M must be at least 2, got {}",
            args.vector_size
        )));
    }
    GdrCodec::new(args.vector_size, args.order, args.channel_uses).map_err(invalid)
}

fn grid(args: &GridArgs) -> Result<Vec<f64>> {
    db_grid(args.min, args.max, args.step).map_err(invalid)
}

fn training_config(args: &TrainingArgs, trained_ebn0_db: f64) -> Result<TrainingConfig> {
    let config = TrainingConfig {
        epochs: args.epochs,
        batch_size: args.batch_size,
        train_samples: args.train_samples,
        trained_ebn0_db,
        learning_rate: args.learning_rate,
        seed: args.seed,
        ..TrainingConfig::default()
    };
    config.validate().map_err(invalid)?;
    Ok(config)
}

fn check_out_dir(dir: &Path) -> Result<()> {
    if dir.is_dir() {
        Ok(())
    } else {
        Err(CliError::Io {
            path: dir.to_path_buf(),
            source: std::io::Error::new(
                std::io::ErrorKind::NotFound,
                "output directory does not exist",
            ),
        })
    }
}

fn write_output(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    report::write_atomic(&path, contents.as_bytes()).map_err(|e| match e {
        gdr_ae::Error::Io(source) => CliError::Io {
            path: path.clone(),
            source,
        },
        other => CliError::Runtime(other),
    })?;
    Ok(path)
}

pub fn run(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Train(args) => cmd_train(&args, out),
        Command::Bler(args) => cmd_bler(&args, out),
        Command::Capacity(args) => cmd_capacity(&args, out),
        Command::SnrStudy(args) => cmd_snr_study(&args, out),
        Command::Params(args) => cmd_params(&args, out),
        Command::SnrMoments(args) => cmd_snr_moments(&args, out),
    }
    .or_else(|e| match e {
        // a closed stdout is not worth failing over
        CliError::Io { ref source, .. } if source.kind() == std::io::ErrorKind::BrokenPipe => {
            Ok(())
        }
        e => Err(e),
    })
}

fn say(out: &mut dyn Write, line: String) -> Result<()> {
    writeln!(out, "{line}").map_err(|source| CliError::Io {
        path: PathBuf::from("<stdout>"),
        source,
    })
}

fn cmd_train(args: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    let codec = codec(&args.codec)?;
    let config = training_config(&args.training, args.trained_ebn0_db)?;
    check_out_dir(&args.out_dir)?;
    let model_path = args
        .model
        .clone()
        .unwrap_or_else(|| args.out_dir.join("model.txt"));
    if let Some(parent) = model_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        check_out_dir(parent)?;
    }

    let mut model = Autoencoder::build(codec.vector_size(), codec.channel_uses(), config.seed)?;
    model.strict_power = args.training.strict_power;
    let history = train(&mut model, &codec, &config)?;

    save_model(&model, &model_path).map_err(|e| match e {
        gdr_ae::Error::Io(source) => CliError::Io {
            path: model_path.clone(),
            source,
        },
        other => CliError::Runtime(other),
    })?;
    write_output(&args.out_dir, "loss.csv", &report::loss_csv(&history))?;
    write_output(&args.out_dir, "loss.gp", &plot::loss("loss.csv"))?;

    let power = model.power_per_dimension(&codec)?;
    say(out, format!("model: {}", model_path.display()))?;
    say(
        out,
        format!("final loss: {}", history.final_loss().unwrap_or(f64::NAN)),
    )?;
    say(
        out,
        format!("noiseless accuracy: {}", model.noiseless_accuracy(&codec)?),
    )?;
    say(
        out,
        format!(
            "mean square per dimension: {}",
            power
                .iter()
                .map(|p| report::format_significant(*p, 4))
                .collect::<Vec<_>>()
                .join(" ")
        ),
    )
}

fn cmd_bler(args: &BlerArgs, out: &mut dyn Write) -> Result<()> {
    let grid = grid(&args.grid)?;
    if args.blocks < gdr_ae::analysis::MIN_BLOCKS_PER_POINT {
        return Err(usage(format!(
            "--blocks must be at least {}",
            gdr_ae::analysis::MIN_BLOCKS_PER_POINT
        )));
    }
    if let Some(s) = args.sigma2 {
        if !(s.is_finite() && s >= 0.0) {
            return Err(usage(format!("--sigma2 must be finite and >= 0, got {s}")));
        }
    }
    if args.jobs == 0 {
        return Err(usage("--jobs must be at least 1"));
    }
    check_out_dir(&args.out_dir)?;
    let model = load_model(&args.model)?;
    let (mm, mn) = (model.vector_size(), model.channel_uses());
    let (want_m, want_n) = (
        args.vector_size.unwrap_or(mm),
        args.channel_uses.unwrap_or(mn),
    );
    if (want_m, want_n) != (mm, mn) {
        return Err(CliError::Usage(format!(
            "model {} has shape (M={mm}, n={mn}) but the codec asks for (M={want_m}, n={want_n})",
            args.model.display()
        )));
    }
    let codec = codec(&CodecArgs {
        vector_size: mm,
        order: args.order.unwrap_or(model.meta.order),
        channel_uses: mn,
    })?;
    let records = bler_sweep(
        &model,
        &codec,
        &SweepConfig {
            grid_db: grid,
            blocks_per_point: args.blocks,
            seed: args.seed,
            sigma2_override: args.sigma2,
            jobs: args.jobs,
        },
    )?;
    let path = write_output(&args.out_dir, "bler.csv", &report::bler_csv(&records))?;
    write_output(&args.out_dir, "bler.gp", &plot::bler("bler.csv"))?;
    say(out, format!("wrote {}", path.display()))
}

fn cmd_capacity(args: &CapacityArgs, out: &mut dyn Write) -> Result<()> {
    let codec = codec(&args.codec)?;
    let grid = grid(&args.grid)?;
    check_out_dir(&args.out_dir)?;
    let table = capacity_table(&codec, &grid)?;
    let path = write_output(&args.out_dir, "capacity.csv", &report::capacity_csv(&table))?;
    write_output(
        &args.out_dir,
        "capacity.gp",
        &plot::capacity("capacity.csv"),
    )?;
    say(out, format!("wrote {}", path.display()))
}

/// File name for one trained Eb/N0 of the study, e.g. `loss_-20dB.csv`.
pub fn study_file_name(snr: f64) -> String {
    format!("loss_{snr}dB.csv")
}

fn cmd_snr_study(args: &SnrStudyArgs, out: &mut dyn Write) -> Result<()> {
    let codec = codec(&args.codec)?;
    if args.trained_ebn0_db.iter().any(|v| !v.is_finite()) {
        return Err(usage("--trained-ebn0-db values must be finite"));
    }
    let config = training_config(&args.training, args.trained_ebn0_db[0])?;
    if args.training.strict_power {
        return Err(usage("--strict-power is not supported by snr-study"));
    }
    if args.jobs == 0 {
        return Err(usage("--jobs must be at least 1"));
    }
    check_out_dir(&args.out_dir)?;
    let results = trained_snr_study(&codec, &args.trained_ebn0_db, &config, args.jobs)?;

    let mut summary = Vec::with_capacity(results.len());
    let mut files = Vec::with_capacity(results.len());
    for (snr, history) in &results {
        let name = study_file_name(*snr);
        write_output(&args.out_dir, &name, &report::loss_csv(history))?;
        summary.push((*snr, history.final_loss().unwrap_or(f64::NAN)));
        files.push((*snr, name));
    }
    let path = write_output(
        &args.out_dir,
        "summary.csv",
        &report::snr_summary_csv(&summary),
    )?;
    write_output(&args.out_dir, "snr_study.gp", &plot::snr_study(&files))?;
    say(out, format!("wrote {}", path.display()))
}

fn cmd_params(args: &ParamsArgs, out: &mut dyn Write) -> Result<()> {
    if args.vector_size < 2 || args.channel_uses < 1 {
        return Err(usage("params needs M >= 2 and n >= 1"));
    }
    let counts = ParamCounts::for_dimensions(args.vector_size, args.channel_uses);
    say(
        out,
        "dense_block,normalization,relu_layer,softmax_layer,total".into(),
    )?;
    say(
        out,
        counts
            .as_array()
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(","),
    )
}

fn cmd_snr_moments(args: &MomentsArgs, out: &mut dyn Write) -> Result<()> {
    if !(args.sigma2.is_finite() && args.sigma2 >= 0.0) {
        return Err(usage(format!(
            "--sigma2 must be finite and >= 0, got {}",
            args.sigma2
        )));
    }
    if args.samples < gdr_ae::analysis::MIN_MC_SAMPLES {
        return Err(usage(format!(
            "--samples must be at least {}",
            gdr_ae::analysis::MIN_MC_SAMPLES
        )));
    }
    check_out_dir(&args.out_dir)?;
    let map = match &args.model {
        Some(path) => LinearReceiverMap::from_dense(&load_model(path)?.rx_dense),
        None if args.channel_uses == 0 => return Err(usage("--channel-uses must be at least 1")),
        None => LinearReceiverMap::identity(args.channel_uses),
    };
    let n = map.inputs();
    let x = match args.x.len() {
        1 => vec![args.x[0]; n],
        len if len == n => args.x.clone(),
        len => {
            return Err(usage(format!(
                "--x has {len} values, expected n={n} (or a single value)"
            )))
        }
    };
    let mut rng = RngStream::new(args.seed, streams::MOMENTS);
    let report_data = snr_moments_mc(&map, &x, args.sigma2, args.samples, &mut rng)?;
    for (i, e) in report_data.elements.iter().enumerate() {
        if e.overflowed > 0 {
            say(
                out,
                format!(
                    "element {i}: {} draws of exp(u) overflowed and were skipped",
                    e.overflowed
                ),
            )?;
        }
    }
    let path = write_output(
        &args.out_dir,
        "moments.csv",
        &report::moments_csv(&report_data),
    )?;
    write_output(&args.out_dir, "moments.gp", &plot::moments("moments.csv"))?;
    say(out, format!("wrote {}", path.display()))
}
