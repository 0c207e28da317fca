//! Experiment harness: seeded splits, k-fold cross-validation, held-out
//! evaluation, signalled/unsignalled subsets and the signalled-accuracy
//! bound.
//!
//! Everything that is learned from data (feature index, hint table, model,
//! most-common-class baseline) is computed from the training side of each
//! partition only.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::classifier::{most_common_class, train, ClassifierError, MaxEntModel, TrainConfig};
use crate::features::{compute_hint_table, featurize, FeatureSet, HintTable, LinkInstance};
use crate::relations::FoldedClass;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("too few instances: {n} available, {needed} needed")]
    TooFewInstances { n: usize, needed: usize },
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("signalled proportion s must be positive")]
    DivisionByZero,
    #[error("bound input {name} = {value} is outside [0, 1]")]
    InvalidBoundInput { name: &'static str, value: f64 },
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitMode {
    CrossValidation { folds: usize },
    Holdout { eval_fraction: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub mode: SplitMode,
    pub seed: u64,
}

impl SplitSpec {
    pub fn xv(folds: usize, seed: u64) -> Self {
        Self {
            mode: SplitMode::CrossValidation { folds },
            seed,
        }
    }

    pub fn holdout(eval_fraction: f64, seed: u64) -> Self {
        Self {
            mode: SplitMode::Holdout { eval_fraction },
            seed,
        }
    }

    fn mode_name(&self) -> &'static str {
        match self.mode {
            SplitMode::CrossValidation { .. } => "xv",
            SplitMode::Holdout { .. } => "holdout",
        }
    }
}

/// Indices into the dataset for one train/eval pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub eval: Vec<usize>,
}

/// Partition `data` according to `spec`. Instances are put in canonical
/// `(doc_id, lid)` order, shuffled with the seed, and cut into contiguous
/// pieces. Cross-validation yields `k` folds; holdout yields one.
pub fn split_dataset(data: &[LinkInstance], spec: &SplitSpec) -> Result<Vec<Fold>, EvalError> {
    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| data[a].key().cmp(&data[b].key()));
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    order.shuffle(&mut rng);

    match spec.mode {
        SplitMode::CrossValidation { folds: k } => {
            if k < 2 {
                return Err(EvalError::InvalidSplit(format!("need at least 2 folds, got {k}")));
            }
            if n < k {
                return Err(EvalError::TooFewInstances { n, needed: k });
            }
            let (base, extra) = (n / k, n % k);
            let mut pieces = Vec::with_capacity(k);
            let mut start = 0;
            for i in 0..k {
                let len = base + usize::from(i < extra);
                pieces.push(start..start + len);
                start += len;
            }
            Ok(pieces
                .iter()
                .map(|r| Fold {
                    eval: order[r.clone()].to_vec(),
                    train: order[..r.start].iter().chain(&order[r.end..]).copied().collect(),
                })
                .collect())
        }
        SplitMode::Holdout { eval_fraction } => {
            if !(eval_fraction > 0.0 && eval_fraction < 1.0) {
                return Err(EvalError::InvalidSplit(format!(
                    "eval fraction must be in (0, 1), got {eval_fraction}"
                )));
            }
            let n_eval = (eval_fraction * n as f64).round() as usize;
            if n_eval == 0 || n_eval >= n {
                return Err(EvalError::TooFewInstances { n, needed: 2 });
            }
            Ok(vec![Fold {
                eval: order[..n_eval].to_vec(),
                train: order[n_eval..].to_vec(),
            }])
        }
    }
}

/// Everything learned and predicted for one fold.
#[derive(Debug, Clone)]
pub struct FoldRun {
    pub fold: Fold,
    pub hints: Option<HintTable>,
    pub model: MaxEntModel,
    pub baseline_label: FoldedClass,
    /// Predictions for `fold.eval`, in the same order.
    pub predictions: Vec<FoldedClass>,
}

fn gather(data: &[LinkInstance], idx: &[usize]) -> Vec<LinkInstance> {
    idx.iter().map(|&i| data[i].clone()).collect()
}

fn run_fold(
    data: &[LinkInstance],
    fold: Fold,
    feature_set: FeatureSet,
    cfg: TrainConfig,
) -> Result<FoldRun, EvalError> {
    let mut train_set = gather(data, &fold.train);
    let mut eval_set = gather(data, &fold.eval);
    let hints = feature_set.uses_hint().then(|| compute_hint_table(&train_set));
    featurize(&mut train_set, feature_set, hints.as_ref());
    featurize(&mut eval_set, feature_set, hints.as_ref());
    let (baseline_label, _) = most_common_class(&train_set)?;
    let model = train(&train_set, feature_set, cfg)?;
    let predictions = eval_set.iter().map(|i| model.predict(&i.features).label).collect();
    Ok(FoldRun {
        fold,
        hints,
        model,
        baseline_label,
        predictions,
    })
}

/// Train and predict every fold of `spec`. Folds are independent and may run
/// in parallel; results are returned in fold order.
pub fn fold_runs(
    data: &[LinkInstance],
    spec: &SplitSpec,
    feature_set: FeatureSet,
    cfg: TrainConfig,
) -> Result<Vec<FoldRun>, EvalError> {
    let folds = split_dataset(data, spec)?;
    run_all(data, folds, feature_set, cfg)
}

#[cfg(not(target_arch = "wasm32"))]
fn run_all(
    data: &[LinkInstance],
    folds: Vec<Fold>,
    feature_set: FeatureSet,
    cfg: TrainConfig,
) -> Result<Vec<FoldRun>, EvalError> {
    if folds.len() == 1 {
        return folds.into_iter().map(|f| run_fold(data, f, feature_set, cfg)).collect();
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = folds
            .into_iter()
            .map(|f| scope.spawn(move || run_fold(data, f, feature_set, cfg)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("fold worker panicked"))
            .collect()
    })
}

#[cfg(target_arch = "wasm32")]
fn run_all(
    data: &[LinkInstance],
    folds: Vec<Fold>,
    feature_set: FeatureSet,
    cfg: TrainConfig,
) -> Result<Vec<FoldRun>, EvalError> {
    folds.into_iter().map(|f| run_fold(data, f, feature_set, cfg)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum HintScope {
    None,
    Holdout,
    PerFold,
}

/// Which instances an experiment trains and evaluates on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    All,
    Signalled,
    Unsignalled,
}

impl std::str::FromStr for Subset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all" => Ok(Subset::All),
            "signalled" => Ok(Subset::Signalled),
            "unsignalled" => Ok(Subset::Unsignalled),
            other => Err(format!("unknown subset `{other}` (expected signalled or unsignalled)")),
        }
    }
}

impl Subset {
    fn admits(self, inst: &LinkInstance) -> bool {
        match self {
            Subset::All => true,
            Subset::Signalled => inst.has_signal(),
            Subset::Unsignalled => !inst.has_signal(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubsetScore {
    pub n: usize,
    /// `None` when the subset is empty.
    pub accuracy: Option<f64>,
    pub baseline: Option<f64>,
}

/// Accuracy of one run's held-out predictions split by signal presence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubsetBreakdown {
    /// Instances the models were trained on.
    pub trained_on: Subset,
    pub signalled: SubsetScore,
    pub unsignalled: SubsetScore,
}

pub type Confusion = BTreeMap<FoldedClass, BTreeMap<FoldedClass, usize>>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub feature_set: String,
    pub mode: String,
    pub seed: u64,
    /// Training-set size; for cross-validation the mean over folds, rounded.
    pub n_train: usize,
    pub n_eval: usize,
    pub baseline: f64,
    pub accuracy: f64,
    /// gold label -> predicted label -> count
    pub confusion: Confusion,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subset: Option<SubsetBreakdown>,
    pub hint_scope: HintScope,
}

#[derive(Default, Clone, Copy)]
struct Tally {
    n: usize,
    correct: usize,
    baseline_correct: usize,
}

impl Tally {
    fn score(self) -> SubsetScore {
        let ratio = |c: usize| (self.n > 0).then(|| c as f64 / self.n as f64);
        SubsetScore {
            n: self.n,
            accuracy: ratio(self.correct),
            baseline: ratio(self.baseline_correct),
        }
    }
}

/// Pool fold results into a report.
pub fn pool_report(
    data: &[LinkInstance],
    spec: &SplitSpec,
    feature_set: FeatureSet,
    runs: &[FoldRun],
    trained_on: Subset,
) -> EvalReport {
    let mut confusion = Confusion::new();
    let mut signalled = Tally::default();
    let mut unsignalled = Tally::default();
    let mut total = Tally::default();
    let mut train_sizes = 0usize;
    for run in runs {
        train_sizes += run.fold.train.len();
        for (&i, &pred) in run.fold.eval.iter().zip(&run.predictions) {
            let gold = data[i].label;
            *confusion.entry(gold).or_default().entry(pred).or_default() += 1;
            let t = if data[i].has_signal() { &mut signalled } else { &mut unsignalled };
            for t in [t, &mut total] {
                t.n += 1;
                t.correct += usize::from(gold == pred);
                t.baseline_correct += usize::from(gold == run.baseline_label);
            }
        }
    }
    // Fill in zero cells so every row lists every label that occurs.
    let labels: Vec<FoldedClass> = {
        let mut l: Vec<_> = confusion
            .iter()
            .flat_map(|(g, row)| std::iter::once(*g).chain(row.keys().copied()))
            .collect();
        l.sort();
        l.dedup();
        l
    };
    for g in &labels {
        let row = confusion.entry(*g).or_default();
        for p in &labels {
            row.entry(*p).or_default();
        }
    }

    let hint_scope = match (feature_set.uses_hint(), spec.mode) {
        (false, _) => HintScope::None,
        (true, SplitMode::Holdout { .. }) => HintScope::Holdout,
        (true, SplitMode::CrossValidation { .. }) => HintScope::PerFold,
    };
    let n_train = if runs.is_empty() {
        0
    } else {
        (train_sizes as f64 / runs.len() as f64).round() as usize
    };
    let frac = |c: usize| if total.n == 0 { 0.0 } else { c as f64 / total.n as f64 };
    EvalReport {
        feature_set: feature_set.name().to_string(),
        mode: spec.mode_name().to_string(),
        seed: spec.seed,
        n_train,
        n_eval: total.n,
        baseline: frac(total.baseline_correct),
        accuracy: frac(total.correct),
        confusion,
        subset: Some(SubsetBreakdown {
            trained_on,
            signalled: signalled.score(),
            unsignalled: unsignalled.score(),
        }),
        hint_scope,
    }
}

/// Train and evaluate on all of `data`. The report's subset breakdown gives
/// signalled/unsignalled accuracy of the jointly trained model.
pub fn run_experiment(
    data: &[LinkInstance],
    spec: &SplitSpec,
    feature_set: FeatureSet,
    cfg: TrainConfig,
) -> Result<EvalReport, EvalError> {
    let runs = fold_runs(data, spec, feature_set, cfg)?;
    Ok(pool_report(data, spec, feature_set, &runs, Subset::All))
}

/// Restrict `data` to `subset` and run the whole experiment inside it, with
/// its own baseline, folds and hint tables.
pub fn run_subset_experiment(
    data: &[LinkInstance],
    spec: &SplitSpec,
    feature_set: FeatureSet,
    cfg: TrainConfig,
    subset: Subset,
) -> Result<EvalReport, EvalError> {
    let filtered: Vec<LinkInstance> = data.iter().filter(|i| subset.admits(i)).cloned().collect();
    let runs = fold_runs(&filtered, spec, feature_set, cfg)?;
    Ok(pool_report(&filtered, spec, feature_set, &runs, subset))
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned-column text rendering.
    pub fn to_text(&self) -> String {
        let pct = |x: f64| format!("{:.2}%", 100.0 * x);
        let opt = |x: Option<f64>| x.map_or_else(|| "n/a".to_string(), pct);
        let mut s = String::new();
        let _ = writeln!(s, "{:<14} {}", "feature set", self.feature_set);
        let _ = writeln!(s, "{:<14} {} (seed {})", "mode", self.mode, self.seed);
        let _ = writeln!(s, "{:<14} {:?}", "hint scope", self.hint_scope);
        let _ = writeln!(s, "{:<14} {}", "n_train", self.n_train);
        let _ = writeln!(s, "{:<14} {}", "n_eval", self.n_eval);
        let _ = writeln!(s, "{:<14} {}", "baseline", pct(self.baseline));
        let _ = writeln!(s, "{:<14} {}", "accuracy", pct(self.accuracy));
        if let Some(sub) = &self.subset {
            let _ = writeln!(s, "\n{:<24} {:>12} {:>12}", format!("trained on {:?}", sub.trained_on).to_lowercase(), "Unsignalled", "Signalled");
            let _ = writeln!(s, "{:<24} {:>12} {:>12}", "n", sub.unsignalled.n, sub.signalled.n);
            let _ = writeln!(s, "{:<24} {:>12} {:>12}", "baseline", opt(sub.unsignalled.baseline), opt(sub.signalled.baseline));
            let _ = writeln!(s, "{:<24} {:>12} {:>12}", "accuracy", opt(sub.unsignalled.accuracy), opt(sub.signalled.accuracy));
        }
        let labels: Vec<_> = self.confusion.keys().collect();
        let _ = write!(s, "\n{:<14}", "gold \\ pred");
        for l in &labels {
            let _ = write!(s, " {:>12}", l.as_str());
        }
        s.push('\n');
        for (g, row) in &self.confusion {
            let _ = write!(s, "{:<14}", g.as_str());
            for l in &labels {
                let _ = write!(s, " {:>12}", row.get(l).copied().unwrap_or(0));
            }
            s.push('\n');
        }
        s
    }

    /// Correct predictions over all predictions, from the confusion matrix.
    pub fn confusion_accuracy(&self) -> f64 {
        let total: usize = self.confusion.values().flat_map(|r| r.values()).sum();
        let diag: usize = self
            .confusion
            .iter()
            .map(|(g, row)| row.get(g).copied().unwrap_or(0))
            .sum();
        if total == 0 {
            0.0
        } else {
            diag as f64 / total as f64
        }
    }
}

/// Inputs to the signalled-accuracy bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundInputs {
    /// Overall accuracy with signal features.
    pub p: f64,
    /// Accuracy without signal features.
    pub p_n: f64,
    /// Proportion of signalled links.
    pub s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bound {
    pub a: f64,
    /// Set when `a` falls outside [0, 1]; the value is returned unclamped.
    pub out_of_range: bool,
}

/// Accuracy `a` on signalled links implied by `P = P_n (1 − s) + a s`, given
/// that signal features leave unsignalled accuracy at `P_n`.
pub fn signalled_accuracy_bound(b: BoundInputs) -> Result<Bound, EvalError> {
    for (name, value) in [("P", b.p), ("P_n", b.p_n), ("s", b.s)] {
        if !(0.0..=1.0).contains(&value) {
            return Err(EvalError::InvalidBoundInput { name, value });
        }
    }
    if b.s == 0.0 {
        return Err(EvalError::DivisionByZero);
    }
    let a = (b.p - b.p_n * (1.0 - b.s)) / b.s;
    Ok(Bound {
        a,
        out_of_range: !(0.0..=1.0).contains(&a),
    })
}
