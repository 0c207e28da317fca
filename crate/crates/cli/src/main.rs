//! `tlink`: corpus statistics, TLINK classification experiments and the
//! signalled-accuracy bound.
//!
//! Exit status is 0 on success, 1 for bad input (flags, files, data too small
//! for the requested split) and 2 for anything else.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use tlink_core::classifier::{ClassifierError, TrainConfig};
use tlink_core::eval::{
    run_experiment, run_subset_experiment, signalled_accuracy_bound, BoundInputs, EvalError, EvalReport, SplitSpec,
    Subset,
};
use tlink_core::features::{build_dataset, FeatureSet, LinkInstance};
use tlink_core::stats::{
    link_counts_text, link_counts_tsv, phrase_stats_text, phrase_stats_tsv, signal_phrase_stats, tlink_counts,
};
use tlink_core::synth::{write_corpus, SynthError, SynthSpec};
use tlink_core::timeml::{load_corpus, Corpus, Dialect, Document, TimeMlError};

#[derive(Parser)]
#[command(name = "tlink", version, about = "TimeML TLINK classification with signal features")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    /// Write the report here instead of standard output.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Tsv,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Parse every file and report the ones that fail.
    Validate(CorpusArgs),
    /// Corpus statistics.
    #[command(subcommand)]
    Stats(StatsCommand),
    /// Train and evaluate the classifier.
    #[command(subcommand)]
    Run(RunCommand),
    /// Implied accuracy on signalled links from P = Pn (1 - s) + a s.
    Bound {
        /// Accuracy with signal features.
        #[arg(long)]
        p: f64,
        /// Accuracy without signal features.
        #[arg(long)]
        pn: f64,
        /// Proportion of signalled links.
        #[arg(long)]
        s: f64,
    },
    /// Write a synthetic inline-TimeML corpus.
    Synth {
        #[arg(long, default_value_t = 100)]
        docs: usize,
        #[arg(long, default_value_t = 10)]
        links_per_doc: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0.5)]
        signal_fraction: f64,
        /// Probability that a signalled link ignores its signal.
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct CorpusArgs {
    /// Files or directories; directories are searched for .tml and .xml files.
    /// Defaults to $TLINK_CORPUS_ROOT.
    paths: Vec<PathBuf>,

    /// Attribute dialect: auto, timebank or inline.
    #[arg(long, default_value = "auto")]
    dialect: Dialect,
}

#[derive(Subcommand)]
enum StatsCommand {
    /// How often each SIGNAL phrase occurs as a SIGNAL versus in running text.
    Signals {
        #[arg(long, default_value_t = 1)]
        min_freq: usize,
        #[command(flatten)]
        corpus: CorpusArgs,
    },
    /// TLINK and SIGNAL counts, one row per path plus a combined row.
    Links(CorpusArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// Feature sets to compare, comma separated: base, base+signal, base+signal+hint.
    #[arg(long, value_delimiter = ',', default_value = "base,base+signal")]
    features: Vec<FeatureSet>,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// L2 penalty.
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,

    #[arg(long, default_value_t = 500)]
    max_iters: usize,

    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
}

#[derive(Subcommand)]
enum RunCommand {
    /// k-fold cross-validation over all event-event links.
    Xv {
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        corpus: CorpusArgs,
    },
    /// Single train/evaluation split.
    Split {
        #[arg(long, default_value_t = 0.3333)]
        eval_fraction: f64,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        corpus: CorpusArgs,
    },
    /// Train and evaluate inside the signalled or unsignalled links only.
    Subset {
        /// Subsets, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "unsignalled,signalled")]
        which: Vec<Subset>,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        /// Use a single split with this evaluation fraction instead of cross-validation.
        #[arg(long)]
        eval_fraction: Option<f64>,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        corpus: CorpusArgs,
    },
}

/// Errors caused by what the user supplied.
#[derive(Debug)]
struct InputError(String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

fn input_error(msg: impl Into<String>) -> anyhow::Error {
    InputError(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<InputError>() || cause.is::<TimeMlError>() || cause.is::<std::io::Error>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<EvalError>() {
            return match e {
                EvalError::Classifier(ClassifierError::EmptyData) => 1,
                EvalError::Classifier(_) => 2,
                _ => 1,
            };
        }
        if let Some(SynthError::InvalidSpec(_)) = cause.downcast_ref::<SynthError>() {
            return 1;
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let mut status = ExitCode::SUCCESS;
    let report = match cli.command {
        Command::Validate(args) => {
            let corpus = load(&args)?;
            if !corpus.issues.is_empty() {
                status = ExitCode::from(1);
            }
            render_validation(&corpus, cli.format)
        }
        Command::Stats(StatsCommand::Signals { min_freq, corpus }) => {
            let corpus = load(&corpus)?;
            let rows = signal_phrase_stats(&corpus.documents, min_freq);
            match cli.format {
                Format::Json => json(&rows),
                Format::Tsv => phrase_stats_tsv(&rows),
                Format::Text => phrase_stats_text(&rows),
            }
        }
        Command::Stats(StatsCommand::Links(args)) => {
            let mut groups: Vec<(String, Vec<Document>)> = Vec::new();
            for path in resolve_paths(&args.paths)? {
                let corpus = load_corpus(&[&path], args.dialect)?;
                warn_issues(&corpus);
                let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into());
                groups.push((name, corpus.documents));
            }
            let rows = tlink_counts(&groups);
            match cli.format {
                Format::Json => json(&rows),
                Format::Tsv => link_counts_tsv(&rows),
                Format::Text => link_counts_text(&rows),
            }
        }
        Command::Run(cmd) => run_command(cmd, cli.format)?,
        Command::Bound { p, pn, s } => {
            let bound = signalled_accuracy_bound(BoundInputs { p, p_n: pn, s })?;
            if bound.out_of_range {
                eprintln!("warning: a = {} lies outside [0, 1]", bound.a);
            }
            #[derive(Serialize)]
            struct Out {
                p: f64,
                p_n: f64,
                s: f64,
                a: f64,
                out_of_range: bool,
            }
            let out = Out { p, p_n: pn, s, a: bound.a, out_of_range: bound.out_of_range };
            match cli.format {
                Format::Json => json(&out),
                Format::Tsv => format!("p\tp_n\ts\ta\n{p}\t{pn}\t{s}\t{:.6}\n", bound.a),
                Format::Text => format!("a = {:.4}\n", bound.a),
            }
        }
        Command::Synth { docs, links_per_doc, seed, signal_fraction, noise, out } => {
            let spec = SynthSpec { n_docs: docs, links_per_doc, seed, signal_fraction, noise, ..SynthSpec::default() };
            let files = write_corpus(&spec, &out)?;
            #[derive(Serialize)]
            struct Out {
                dir: String,
                files: usize,
                links: usize,
            }
            let out = Out { dir: out.display().to_string(), files: files.len(), links: docs * (links_per_doc + 1) };
            match cli.format {
                Format::Json => json(&out),
                Format::Tsv => format!("dir\tfiles\tlinks\n{}\t{}\t{}\n", out.dir, out.files, out.links),
                Format::Text => format!("wrote {} files ({} links) to {}\n", out.files, out.links, out.dir),
            }
        }
    };
    emit(&report, cli.output.as_ref())?;
    Ok(status)
}

fn json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn emit(report: &str, output: Option<&PathBuf>) -> Result<()> {
    match output {
        Some(path) => fs::write(path, report).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().lock().write_all(report.as_bytes())?,
    }
    Ok(())
}

fn resolve_paths(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    if !paths.is_empty() {
        return Ok(paths.to_vec());
    }
    match std::env::var_os("TLINK_CORPUS_ROOT") {
        Some(root) => Ok(vec![PathBuf::from(root)]),
        None => Err(input_error("no corpus paths given and TLINK_CORPUS_ROOT is not set")),
    }
}

fn warn_issues(corpus: &Corpus) {
    for issue in &corpus.issues {
        eprintln!("warning: skipping {}: {}", issue.path.display(), issue.error);
    }
}

fn load(args: &CorpusArgs) -> Result<Corpus> {
    let paths = resolve_paths(&args.paths)?;
    Ok(load_corpus(&paths, args.dialect)?)
}

fn render_validation(corpus: &Corpus, format: Format) -> String {
    let tlinks: usize = corpus.documents.iter().map(|d| d.tlinks().len()).sum();
    #[derive(Serialize)]
    struct Issue {
        path: String,
        error: String,
    }
    #[derive(Serialize)]
    struct Out {
        documents: usize,
        tlinks: usize,
        issues: Vec<Issue>,
    }
    let out = Out {
        documents: corpus.documents.len(),
        tlinks,
        issues: corpus
            .issues
            .iter()
            .map(|i| Issue { path: i.path.display().to_string(), error: i.error.to_string() })
            .collect(),
    };
    match format {
        Format::Json => json(&out),
        Format::Tsv => {
            let mut s = String::from("path\terror\n");
            for i in &out.issues {
                let _ = writeln!(s, "{}\t{}", i.path, i.error);
            }
            s
        }
        Format::Text => {
            let mut s = String::new();
            for i in &out.issues {
                let _ = writeln!(s, "{}: {}", i.path, i.error);
            }
            let _ = writeln!(s, "{} documents, {} TLINKs, {} files with errors", out.documents, out.tlinks, out.issues.len());
            s
        }
    }
}

fn dataset(args: &CorpusArgs) -> Result<Vec<LinkInstance>> {
    let corpus = load(args)?;
    warn_issues(&corpus);
    if corpus.documents.is_empty() {
        bail!(input_error("no documents could be loaded"));
    }
    Ok(build_dataset(&corpus.documents)?)
}

fn train_config(m: &ModelArgs) -> Result<TrainConfig> {
    if m.lambda.is_nan() || m.tol.is_nan() || m.lambda < 0.0 || m.tol < 0.0 {
        bail!(input_error("--lambda and --tol must be non-negative"));
    }
    if m.features.is_empty() {
        bail!(input_error("--features needs at least one feature set"));
    }
    Ok(TrainConfig { l2_lambda: m.lambda, max_iters: m.max_iters, tol: m.tol, seed: m.seed })
}

fn run_command(cmd: RunCommand, format: Format) -> Result<String> {
    match cmd {
        RunCommand::Xv { folds, model, corpus } => {
            let spec = SplitSpec::xv(folds, model.seed);
            overall(&dataset(&corpus)?, &spec, &model, format)
        }
        RunCommand::Split { eval_fraction, model, corpus } => {
            let spec = SplitSpec::holdout(eval_fraction, model.seed);
            overall(&dataset(&corpus)?, &spec, &model, format)
        }
        RunCommand::Subset { which, folds, eval_fraction, model, corpus } => {
            let spec = match eval_fraction {
                Some(f) => SplitSpec::holdout(f, model.seed),
                None => SplitSpec::xv(folds, model.seed),
            };
            if which.is_empty() || which.contains(&Subset::All) {
                bail!(input_error("--which takes signalled and/or unsignalled"));
            }
            let data = dataset(&corpus)?;
            let cfg = train_config(&model)?;
            let mut reports = Vec::new();
            for &subset in &which {
                for &fs in &model.features {
                    reports.push(run_subset_experiment(&data, &spec, fs, cfg, subset)?);
                }
            }
            Ok(match format {
                Format::Json => json(&reports),
                Format::Tsv => reports_tsv(&reports),
                Format::Text => subset_table(&which, &model.features, &reports),
            })
        }
    }
}

fn overall(data: &[LinkInstance], spec: &SplitSpec, model: &ModelArgs, format: Format) -> Result<String> {
    let cfg = train_config(model)?;
    let reports = model
        .features
        .iter()
        .map(|&fs| run_experiment(data, spec, fs, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(match format {
        Format::Json => json(&reports),
        Format::Tsv => reports_tsv(&reports),
        Format::Text => overall_table(&reports),
    })
}

fn pct(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".into(), |x| format!("{:.2}%", 100.0 * x))
}

fn reports_tsv(reports: &[EvalReport]) -> String {
    let mut s = String::from(
        "feature_set\tmode\tseed\ttrained_on\tn_train\tn_eval\tbaseline\taccuracy\t\
         unsignalled_n\tunsignalled_baseline\tunsignalled_accuracy\t\
         signalled_n\tsignalled_baseline\tsignalled_accuracy\n",
    );
    let num = |x: Option<f64>| x.map_or_else(|| "NA".into(), |x| format!("{x:.6}"));
    for r in reports {
        let sub = r.subset.as_ref().expect("reports carry a subset breakdown");
        let trained_on = serde_json::to_value(sub.trained_on).expect("serializable");
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.feature_set,
            r.mode,
            r.seed,
            trained_on.as_str().unwrap_or_default(),
            r.n_train,
            r.n_eval,
            r.baseline,
            r.accuracy,
            sub.unsignalled.n,
            num(sub.unsignalled.baseline),
            num(sub.unsignalled.accuracy),
            sub.signalled.n,
            num(sub.signalled.baseline),
            num(sub.signalled.accuracy),
        );
    }
    s
}

/// Rows per feature set, columns for all, unsignalled and signalled links.
fn overall_table(reports: &[EvalReport]) -> String {
    let mut s = String::new();
    let Some(first) = reports.first() else {
        return s;
    };
    let _ = writeln!(s, "mode {}, seed {}, {} evaluated ({} training)", first.mode, first.seed, first.n_eval, first.n_train);
    let sub = first.subset.as_ref().expect("breakdown");
    let _ = writeln!(s, "{:<28} {:>10} {:>12} {:>12}", "Predictive accuracy", "All", "Unsignalled", "Signalled");
    let _ = writeln!(
        s,
        "{:<28} {:>10} {:>12} {:>12}",
        "Baseline (most common class)",
        pct(Some(first.baseline)),
        pct(sub.unsignalled.baseline),
        pct(sub.signalled.baseline)
    );
    for r in reports {
        let sub = r.subset.as_ref().expect("breakdown");
        let _ = writeln!(
            s,
            "{:<28} {:>10} {:>12} {:>12}",
            r.feature_set,
            pct(Some(r.accuracy)),
            pct(sub.unsignalled.accuracy),
            pct(sub.signalled.accuracy)
        );
    }
    s
}

/// Rows per subset, columns for the baseline and each feature set.
fn subset_table(which: &[Subset], features: &[FeatureSet], reports: &[EvalReport]) -> String {
    let mut s = format!("{:<22} {:>10}", "Predictive accuracy", "Baseline");
    for fs in features {
        let _ = write!(s, " {:>17}", fs.name());
    }
    s.push('\n');
    for (subset, row) in which.iter().zip(reports.chunks(features.len())) {
        let label = match subset {
            Subset::Signalled => "Only signalled links",
            _ => "Unsignalled links",
        };
        let _ = write!(s, "{:<22} {:>10}", label, pct(Some(row[0].baseline)));
        for r in row {
            let _ = write!(s, " {:>17}", pct(Some(r.accuracy)));
        }
        let _ = writeln!(s, "   (n = {})", row[0].n_eval);
    }
    s
}
