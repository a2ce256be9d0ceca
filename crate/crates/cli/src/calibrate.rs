use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use bcsoftmax::calib::{
    ece, fit, mean_loss, CalibKind, CalibModel, FitConfig, Flags, LabeledLogitSet, DEFAULT_BINS,
};
use clap::{Args, ValueEnum};

use crate::error::{CliError, CliResult};
use crate::io;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Ablate {
    /// Learn both bounds.
    #[default]
    Both,
    /// Learn only the lower bound; the upper one stays disabled.
    Lower,
    /// Learn only the upper bound; the lower one stays disabled.
    Upper,
}

impl Ablate {
    pub fn flags(self) -> Flags {
        match self {
            Ablate::Both => Flags::default(),
            Ablate::Lower => Flags {
                use_lower: true,
                use_upper: false,
            },
            Ablate::Upper => Flags {
                use_lower: false,
                use_upper: true,
            },
        }
    }
}

fn parse_method(s: &str) -> Result<CalibKind, String> {
    s.parse::<CalibKind>().map_err(|e| e.to_string())
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// ts, pb-c, pb-l, lb-c or lb-l.
    #[arg(long, value_parser = parse_method)]
    pub method: CalibKind,
    #[arg(long, value_enum, default_value_t = Ablate::Both)]
    pub ablate: Ablate,
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,
    #[arg(long, default_value_t = 128)]
    pub batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
    #[arg(long)]
    pub model_out: Option<PathBuf>,
}

/// Held-out metrics of one model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub ece: f64,
    pub accuracy: f64,
    pub nll: f64,
}

#[derive(Debug, Clone)]
pub struct CalibrationReport {
    pub kind: CalibKind,
    pub flags: Flags,
    /// Softmax of the raw logits.
    pub uncalibrated: Metrics,
    /// The model before any training step.
    pub initialized: Metrics,
    pub calibrated: Metrics,
    pub model: CalibModel,
}

pub fn metrics(model: &CalibModel, data: &LabeledLogitSet, bins: usize) -> CliResult<Metrics> {
    let report = ece(model, data, bins)?;
    Ok(Metrics {
        ece: report.ece,
        accuracy: report.accuracy,
        nll: mean_loss(model, data)?,
    })
}

pub fn calibrate(
    kind: CalibKind,
    train: &LabeledLogitSet,
    test: &LabeledLogitSet,
    config: &FitConfig,
    bins: usize,
) -> CliResult<CalibrationReport> {
    if train.num_classes() != test.num_classes() {
        return Err(CliError::Data(format!(
            "train has {} classes, test has {}",
            train.num_classes(),
            test.num_classes()
        )));
    }
    if kind.needs_features() && train.feature_dim() != test.feature_dim() {
        return Err(CliError::Data(format!(
            "{kind} needs the same feature columns in train and test"
        )));
    }
    let identity = CalibModel::temperature(1.0)?;
    let init = CalibModel::init(kind, train.feature_dim(), config.flags)?;
    let model = fit(kind, train, config)?;
    Ok(CalibrationReport {
        kind,
        flags: config.flags,
        uncalibrated: metrics(&identity, test, bins)?,
        initialized: metrics(&init, test, bins)?,
        calibrated: metrics(&model, test, bins)?,
        model,
    })
}

fn load(path: &Path) -> CliResult<LabeledLogitSet> {
    let table = io::read_logits(path)?;
    if table.is_empty() {
        return Err(CliError::Data(format!("{}: no rows", path.display())));
    }
    table.into_dataset().map_err(|e| e.context(path.display()))
}

pub fn run(args: &CalibrateArgs, out: &mut dyn Write) -> CliResult<()> {
    if args.bins == 0 {
        return Err(CliError::Usage("bins must be positive".into()));
    }
    let train = load(&args.train)?;
    let test = load(&args.test)?;
    let config = FitConfig {
        epochs: args.epochs,
        batch_size: args.batch,
        learning_rate: args.lr,
        seed: args.seed,
        flags: args.ablate.flags(),
        ..FitConfig::default()
    };
    let report = calibrate(args.method, &train, &test, &config, args.bins)?;

    writeln!(
        out,
        "method {}  ablate {:?}  epochs {}  train {}  test {}",
        report.kind,
        args.ablate,
        args.epochs,
        train.len(),
        test.len()
    )?;
    writeln!(
        out,
        "{:<14}{:>10}{:>10}{:>10}",
        "model", "ECE", "acc", "NLL"
    )?;
    for (name, m) in [
        ("uncalibrated", report.uncalibrated),
        ("initialized", report.initialized),
        ("calibrated", report.calibrated),
    ] {
        writeln!(
            out,
            "{name:<14}{:>10.4}{:>10.4}{:>10.4}",
            m.ece, m.accuracy, m.nll
        )?;
    }
    let tau = report.model.tau()?.get();
    writeln!(out, "tau {tau:.6}")?;

    if let Some(path) = &args.model_out {
        fs::write(path, report.model.to_json())
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use bcsoftmax::calib::gen_synthetic;

    #[test]
    fn ablation_flags() {
        assert_eq!(Ablate::Both.flags(), Flags::default());
        assert!(!Ablate::Lower.flags().use_upper);
        assert!(!Ablate::Upper.flags().use_lower);
    }

    #[test]
    fn zero_epochs_keep_the_initial_model() {
        let data = gen_synthetic(200, 4, 2.0, 1).unwrap();
        let (train, test) = data.split_at(100).unwrap();
        let config = FitConfig {
            epochs: 0,
            ..FitConfig::default()
        };
        let report = calibrate(CalibKind::Ts, &train, &test, &config, 15).unwrap();
        assert_eq!(report.initialized, report.calibrated);
        assert!((report.model.tau().unwrap().get() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn method_names() {
        assert_eq!(parse_method("pb-c"), Ok(CalibKind::PbC));
        assert_eq!(parse_method("LB-L"), Ok(CalibKind::LbL));
        assert!(parse_method("dir").is_err());
    }
}
