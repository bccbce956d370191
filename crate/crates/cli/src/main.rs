//! `dummyscan`: generate corpora, train detectors, attack, defend, analyse
//! and report, all from one master seed.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dummyscan::detect::Arch;
use dummyscan::{ClassLabel, Error, VariantKind};

#[derive(Parser)]
#[command(name = "dummyscan", version, about = "Power side-channel malware detection and dummy-code evasion experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Experiment config (JSON); defaults to <data>/experiment.json, then built-in defaults.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the labeled corpus.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long, value_name = "N")]
        runs_per_class: Option<usize>,
    },
    /// Train one detector on the training split.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        arch: ArchArg,
        #[arg(long, value_name = "DIR")]
        data: PathBuf,
        #[arg(long, value_name = "MODEL")]
        out: PathBuf,
        /// Also cross-validate on the training split; the table goes to <out>.cv.tsv.
        #[arg(long, value_name = "K")]
        folds: Option<usize>,
    },
    /// Clean test-split metrics of a model.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "MODEL")]
        model: PathBuf,
        #[arg(long, value_name = "DIR")]
        data: PathBuf,
        #[arg(long, value_name = "REPORT")]
        out: PathBuf,
    },
    /// Attack success rate of one dummy-code variant.
    Attack {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "MODEL")]
        model: PathBuf,
        #[arg(long, value_enum)]
        variant: VariantArg,
        #[arg(long, value_name = "N")]
        runs: Option<usize>,
        #[arg(long, value_name = "DIR")]
        data: Option<PathBuf>,
        #[arg(long, value_name = "REPORT")]
        out: PathBuf,
    },
    /// Adversarial retraining (writes a model) or noise injection (writes ASR rows).
    Defend {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        method: MethodArg,
        #[arg(long, value_name = "MODEL")]
        model: PathBuf,
        #[arg(long, value_name = "DIR")]
        data: PathBuf,
        /// Restrict to these variants (repeatable); defaults to every configured variant.
        #[arg(long, value_enum)]
        variant: Vec<VariantArg>,
        /// Attack runs per variant for noise injection.
        #[arg(long, value_name = "N")]
        runs: Option<usize>,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Perturbation statistics battery.
    Stats {
        #[command(flatten)]
        common: Common,
        #[arg(long, required = true)]
        battery: bool,
        #[arg(long, value_name = "DIR")]
        data: Option<PathBuf>,
        #[arg(long, value_name = "N")]
        runs: Option<usize>,
        #[arg(long, value_name = "TABLE")]
        out: PathBuf,
    },
    /// Aggregate Shapley attribution over test windows of one class.
    Explain {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "MODEL")]
        model: PathBuf,
        #[arg(long, value_name = "DIR")]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "mirai")]
        class: ClassArg,
        #[arg(long, value_name = "N")]
        windows: Option<usize>,
        #[arg(long, value_name = "TABLE")]
        out: PathBuf,
    },
    /// Merge long-format results into the consolidated tables.
    Report {
        #[arg(long = "in", value_name = "DIR")]
        input: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Every stage end to end.
    Pipeline {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ArchArg {
    Lstm,
    Bilstm,
    Tcn,
    #[value(name = "ae_mlp")]
    AeMlp,
}

impl From<ArchArg> for Arch {
    fn from(a: ArchArg) -> Arch {
        match a {
            ArchArg::Lstm => Arch::Lstm,
            ArchArg::Bilstm => Arch::BiLstm,
            ArchArg::Tcn => Arch::Tcn,
            ArchArg::AeMlp => Arch::AeMlp,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum VariantArg {
    SingleFunction,
    OneForLoop,
    TwoNestedLoops,
    IfStatement,
}

impl From<VariantArg> for VariantKind {
    fn from(v: VariantArg) -> VariantKind {
        match v {
            VariantArg::SingleFunction => VariantKind::SingleFunction,
            VariantArg::OneForLoop => VariantKind::OneForLoop,
            VariantArg::TwoNestedLoops => VariantKind::TwoNestedLoops,
            VariantArg::IfStatement => VariantKind::IfStatement,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum ClassArg {
    Idle,
    IotService,
    Mirai,
}

impl From<ClassArg> for ClassLabel {
    fn from(c: ClassArg) -> ClassLabel {
        match c {
            ClassArg::Idle => ClassLabel::Idle,
            ClassArg::IotService => ClassLabel::IoTService,
            ClassArg::Mirai => ClassLabel::Mirai,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
enum MethodArg {
    AdvTrain,
    NoiseInject,
}

const EXIT_USAGE: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

fn exit_code(e: &Error) -> u8 {
    match e {
        _ if e.is_io_or_format() => EXIT_IO,
        Error::Config(_) => EXIT_USAGE,
        _ => EXIT_NUMERIC,
    }
}

fn run(cli: Cli) -> dummyscan::Result<()> {
    use commands::*;
    match cli.command {
        Command::Generate { common, out, runs_per_class } => generate(&common, &out, runs_per_class),
        Command::Train { common, arch, data, out, folds } => train(&common, arch.into(), &data, &out, folds),
        Command::Eval { common, model, data, out } => eval(&common, &model, &data, &out),
        Command::Attack { common, model, variant, runs, data, out } => {
            attack(&common, &model, variant.into(), runs, data.as_deref(), &out)
        }
        Command::Defend { common, method, model, data, variant, runs, out } => {
            let kinds: Vec<VariantKind> = variant.into_iter().map(Into::into).collect();
            match method {
                MethodArg::AdvTrain => defend_adv(&common, &model, &data, &kinds, &out),
                MethodArg::NoiseInject => defend_noise(&common, &model, &data, &kinds, runs, &out),
            }
        }
        Command::Stats { common, battery: _, data, runs, out } => stats(&common, data.as_deref(), runs, &out),
        Command::Explain { common, model, data, class, windows, out } => {
            explain(&common, &model, &data, class.into(), windows, &out)
        }
        Command::Report { input, out } => report(&input, &out),
        Command::Pipeline { common, out } => pipeline(&common, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
