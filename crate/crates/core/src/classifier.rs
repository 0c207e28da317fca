//! Multiclass maximum-entropy classifier over categorical indicator features.
//!
//! `p(y|x) ∝ exp(Σ_{f∈x} w[y,f])`, trained by full-batch gradient ascent on
//! the L2-penalized conditional log-likelihood with a backtracking line
//! search. Training starts from zero weights, visits instances in canonical
//! `(doc_id, lid)` order and is reproducible bit for bit.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use serde::Serialize;

use crate::features::{modal_label, FeatureSet, FeatureVector, LinkInstance};
use crate::relations::FoldedClass;

#[derive(Debug, thiserror::Error)]
pub enum ClassifierError {
    #[error("no training instances")]
    EmptyData,
    #[error("label {0} is not known to the model")]
    UnknownLabel(FoldedClass),
    #[error("invalid model file, line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrainConfig {
    pub l2_lambda: f64,
    pub max_iters: usize,
    /// Stop once the relative objective change of an accepted step falls
    /// below this.
    pub tol: f64,
    /// Reserved; default training is deterministic and ignores it.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            l2_lambda: 0.1,
            max_iters: 500,
            tol: 1e-7,
            seed: 0,
        }
    }
}

/// Dense ids for `name=value` feature strings seen in training.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeatureIndex {
    names: Vec<String>,
    ids: HashMap<String, usize>,
}

impl FeatureIndex {
    /// Ids are assigned by first occurrence over `data` in canonical
    /// `(doc_id, lid)` order. Only features belonging to `set` are indexed.
    pub fn build(data: &[LinkInstance], set: FeatureSet) -> Self {
        let mut index = FeatureIndex::default();
        let allowed = set.features();
        for inst in canonical_order(data) {
            for (f, v) in inst.features.iter() {
                if allowed.contains(&f) {
                    index.insert(format!("{}={}", f.name(), v));
                }
            }
        }
        index
    }

    fn insert(&mut self, key: String) -> usize {
        if let Some(&id) = self.ids.get(&key) {
            return id;
        }
        let id = self.names.len();
        self.ids.insert(key.clone(), id);
        self.names.push(key);
        id
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, key: &str) -> Option<usize> {
        self.ids.get(key).copied()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    /// Known feature ids of `fv`, ascending. Unseen features are dropped.
    pub fn encode(&self, fv: &FeatureVector) -> Vec<usize> {
        let mut ids: Vec<usize> = fv.keys().filter_map(|k| self.id(&k)).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

fn canonical_order(data: &[LinkInstance]) -> Vec<&LinkInstance> {
    let mut refs: Vec<&LinkInstance> = data.iter().collect();
    refs.sort_by(|a, b| {
        a.key()
            .cmp(&b.key())
            .then(a.label.cmp(&b.label))
            .then_with(|| a.features.keys().cmp(b.features.keys()))
    });
    refs
}

/// Training diagnostics; not part of the serialized model.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainStats {
    pub iterations: usize,
    pub converged: bool,
    /// Objective after initialization and after every accepted step.
    pub objective_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxEntModel {
    labels: Vec<FoldedClass>,
    feature_set: FeatureSet,
    index: FeatureIndex,
    /// Row-major, `labels.len() × index.len()`.
    weights: Vec<f64>,
    config: TrainConfig,
    degenerate: bool,
    stats: TrainStats,
}

/// Predicted label and the full distribution, in model label order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub label: FoldedClass,
    pub dist: Vec<(FoldedClass, f64)>,
}

/// Encoded training problem: feature ids and label index per row.
struct Problem {
    n_labels: usize,
    n_features: usize,
    rows: Vec<(Vec<usize>, usize)>,
    lambda: f64,
}

impl Problem {
    fn scores(&self, w: &[f64], feats: &[usize], out: &mut [f64]) {
        for (y, s) in out.iter_mut().enumerate() {
            let row = &w[y * self.n_features..(y + 1) * self.n_features];
            *s = feats.iter().map(|&f| row[f]).sum();
        }
    }

    fn value(&self, w: &[f64]) -> f64 {
        let mut scores = vec![0.0; self.n_labels];
        let mut ll = 0.0;
        for (feats, y) in &self.rows {
            self.scores(w, feats, &mut scores);
            ll += scores[*y] - log_sum_exp(&scores);
        }
        ll - self.lambda * w.iter().map(|x| x * x).sum::<f64>()
    }

    fn value_and_gradient(&self, w: &[f64]) -> (f64, Vec<f64>) {
        let nf = self.n_features;
        let mut grad: Vec<f64> = w.iter().map(|x| -2.0 * self.lambda * x).collect();
        let mut scores = vec![0.0; self.n_labels];
        let mut ll = 0.0;
        for (feats, y) in &self.rows {
            self.scores(w, feats, &mut scores);
            let lse = log_sum_exp(&scores);
            ll += scores[*y] - lse;
            for (label, s) in scores.iter().enumerate() {
                let p = (s - lse).exp();
                let observed = if label == *y { 1.0 } else { 0.0 };
                let row = &mut grad[label * nf..(label + 1) * nf];
                for &f in feats {
                    row[f] += observed - p;
                }
            }
        }
        let value = ll - self.lambda * w.iter().map(|x| x * x).sum::<f64>();
        (value, grad)
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-20;

/// Train on `data`, whose features must already be extracted for
/// `feature_set`.
pub fn train(
    data: &[LinkInstance],
    feature_set: FeatureSet,
    cfg: TrainConfig,
) -> Result<MaxEntModel, ClassifierError> {
    if data.is_empty() {
        return Err(ClassifierError::EmptyData);
    }
    let ordered = canonical_order(data);
    let mut labels: Vec<FoldedClass> = data.iter().map(|i| i.label).collect();
    labels.sort();
    labels.dedup();
    let index = FeatureIndex::build(data, feature_set);

    let label_pos: HashMap<FoldedClass, usize> = labels.iter().enumerate().map(|(i, l)| (*l, i)).collect();
    let problem = Problem {
        n_labels: labels.len(),
        n_features: index.len(),
        rows: ordered
            .iter()
            .map(|inst| (index.encode(&inst.features), label_pos[&inst.label]))
            .collect(),
        lambda: cfg.l2_lambda,
    };
    let mut w = vec![0.0; labels.len() * index.len()];
    let degenerate = labels.len() == 1;
    let stats = if degenerate {
        TrainStats {
            converged: true,
            ..Default::default()
        }
    } else {
        ascend(&problem, &mut w, &cfg)
    };
    Ok(MaxEntModel {
        labels,
        feature_set,
        index,
        weights: w,
        config: cfg,
        degenerate,
        stats,
    })
}

fn ascend(problem: &Problem, w: &mut Vec<f64>, cfg: &TrainConfig) -> TrainStats {
    let mut stats = TrainStats::default();
    let (mut f, mut g) = problem.value_and_gradient(w);
    stats.objective_trace.push(f);
    let mut step = 1.0;
    let mut candidate = vec![0.0; w.len()];

    while stats.iterations < cfg.max_iters {
        let gnorm2: f64 = g.iter().map(|x| x * x).sum();
        if gnorm2 == 0.0 {
            stats.converged = true;
            break;
        }
        // Backtrack until the Armijo condition holds.
        let accepted = loop {
            for ((c, wi), gi) in candidate.iter_mut().zip(w.iter()).zip(&g) {
                *c = wi + step * gi;
            }
            let fc = problem.value(&candidate);
            if fc.is_finite() && fc >= f + ARMIJO * step * gnorm2 {
                break Some(fc);
            }
            step *= 0.5;
            if step < MIN_STEP {
                break None;
            }
        };
        let Some(fc) = accepted else {
            stats.converged = true;
            break;
        };
        std::mem::swap(w, &mut candidate);
        stats.iterations += 1;
        let (fv, gv) = problem.value_and_gradient(w);
        debug_assert_eq!(fv.to_bits(), fc.to_bits());
        let rel = (fv - f).abs() / f.abs().max(1.0);
        f = fv;
        g = gv;
        stats.objective_trace.push(f);
        step *= 2.0;
        if rel < cfg.tol {
            stats.converged = true;
            break;
        }
    }
    stats
}

impl MaxEntModel {
    pub fn labels(&self) -> &[FoldedClass] {
        &self.labels
    }

    pub fn feature_set(&self) -> FeatureSet {
        self.feature_set
    }

    pub fn feature_index(&self) -> &FeatureIndex {
        &self.index
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, label: usize, feature: usize) -> f64 {
        self.weights[label * self.index.len() + feature]
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// True when training saw a single label; such a model always predicts it.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn stats(&self) -> &TrainStats {
        &self.stats
    }

    /// A model with the given weights; `weights` is row-major labels × features.
    pub fn from_parts(
        labels: Vec<FoldedClass>,
        feature_set: FeatureSet,
        index: FeatureIndex,
        weights: Vec<f64>,
        config: TrainConfig,
    ) -> Self {
        assert_eq!(weights.len(), labels.len() * index.len());
        Self {
            degenerate: labels.len() == 1,
            labels,
            feature_set,
            index,
            weights,
            config,
            stats: TrainStats::default(),
        }
    }

    pub fn predict(&self, fv: &FeatureVector) -> Prediction {
        let feats = self.index.encode(fv);
        let nf = self.index.len();
        let scores: Vec<f64> = (0..self.labels.len())
            .map(|y| feats.iter().map(|&f| self.weights[y * nf + f]).sum())
            .collect();
        let lse = log_sum_exp(&scores);
        let dist: Vec<(FoldedClass, f64)> = self
            .labels
            .iter()
            .zip(&scores)
            .map(|(l, s)| (*l, (s - lse).exp()))
            .collect();
        // Labels are sorted, so the first maximum is the lexicographic tie-break.
        let mut best = 0;
        for (i, (_, p)) in dist.iter().enumerate() {
            if *p > dist[best].1 {
                best = i;
            }
        }
        Prediction {
            label: self.labels[best],
            dist,
        }
    }

    fn problem(&self, data: &[LinkInstance]) -> Result<Problem, ClassifierError> {
        let rows = canonical_order(data)
            .into_iter()
            .map(|inst| {
                let y = self
                    .labels
                    .binary_search(&inst.label)
                    .map_err(|_| ClassifierError::UnknownLabel(inst.label))?;
                Ok((self.index.encode(&inst.features), y))
            })
            .collect::<Result<_, ClassifierError>>()?;
        Ok(Problem {
            n_labels: self.labels.len(),
            n_features: self.index.len(),
            rows,
            lambda: self.config.l2_lambda,
        })
    }

    /// Penalized log-likelihood of `data` at `weights` and its gradient.
    pub fn objective_at(&self, data: &[LinkInstance], weights: &[f64]) -> Result<(f64, Vec<f64>), ClassifierError> {
        assert_eq!(weights.len(), self.weights.len());
        Ok(self.problem(data)?.value_and_gradient(weights))
    }

    /// Write the versioned text format.
    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "tlink-maxent 1")?;
        let labels: Vec<_> = self.labels.iter().map(|l| l.as_str()).collect();
        writeln!(out, "labels\t{}", labels.join("\t"))?;
        writeln!(out, "feature_set\t{}", self.feature_set)?;
        writeln!(out, "features\t{}", self.index.len())?;
        let c = &self.config;
        writeln!(
            out,
            "config\tl2_lambda={}\tmax_iters={}\ttol={}\tseed={}",
            c.l2_lambda, c.max_iters, c.tol, c.seed
        )?;
        for (y, label) in self.labels.iter().enumerate() {
            for f in 0..self.index.len() {
                writeln!(out, "{}\t{}\t{}", label, self.index.name(f), self.weight(y, f))?;
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("model text is UTF-8")
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self, ClassifierError> {
        let mut lines = input.lines().enumerate();
        let mut next = |what: &str| -> Result<(usize, String), ClassifierError> {
            match lines.next() {
                Some((i, line)) => Ok((i + 1, line?)),
                None => Err(ClassifierError::Format {
                    line: 0,
                    reason: format!("unexpected end of file, expected {what}"),
                }),
            }
        };
        let bad = |line: usize, reason: String| ClassifierError::Format { line, reason };

        let (n, header) = next("header")?;
        if header != "tlink-maxent 1" {
            return Err(bad(n, format!("unsupported header `{header}`")));
        }
        let (n, line) = next("labels")?;
        let mut parts = line.split('\t');
        if parts.next() != Some("labels") {
            return Err(bad(n, "expected labels".into()));
        }
        let labels = parts
            .map(|s| s.parse::<FoldedClass>().map_err(|e| bad(n, e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        if labels.is_empty() || labels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(bad(n, "labels must be non-empty and sorted".into()));
        }
        let (n, line) = next("feature set")?;
        let feature_set: FeatureSet = line
            .strip_prefix("feature_set\t")
            .ok_or_else(|| bad(n, "expected feature set".into()))?
            .parse()
            .map_err(|e: String| bad(n, e))?;
        let (n, line) = next("feature count")?;
        let n_features: usize = line
            .strip_prefix("features\t")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(n, "expected feature count".into()))?;
        let (n, line) = next("config")?;
        let mut cfg = TrainConfig::default();
        let mut fields = line.split('\t');
        if fields.next() != Some("config") {
            return Err(bad(n, "expected config".into()));
        }
        for kv in fields {
            let (k, v) = kv.split_once('=').ok_or_else(|| bad(n, format!("bad config entry `{kv}`")))?;
            let err = |_| bad(n, format!("bad value for {k}"));
            match k {
                "l2_lambda" => cfg.l2_lambda = v.parse().map_err(|e: std::num::ParseFloatError| err(e.to_string()))?,
                "max_iters" => cfg.max_iters = v.parse().map_err(|e: std::num::ParseIntError| err(e.to_string()))?,
                "tol" => cfg.tol = v.parse().map_err(|e: std::num::ParseFloatError| err(e.to_string()))?,
                "seed" => cfg.seed = v.parse().map_err(|e: std::num::ParseIntError| err(e.to_string()))?,
                _ => return Err(bad(n, format!("unknown config key `{k}`"))),
            }
        }

        let mut index = FeatureIndex::default();
        let mut weights = Vec::with_capacity(labels.len() * n_features);
        for (y, label) in labels.iter().enumerate() {
            for f in 0..n_features {
                let (n, line) = next("weight")?;
                let mut t = line.splitn(3, '\t');
                let (Some(l), Some(name), Some(w)) = (t.next(), t.next(), t.next()) else {
                    return Err(bad(n, "expected label, feature, weight".into()));
                };
                if l != label.as_str() {
                    return Err(bad(n, format!("expected label {label}, found {l}")));
                }
                if y == 0 {
                    if index.insert(name.to_string()) != f {
                        return Err(bad(n, format!("duplicate feature `{name}`")));
                    }
                } else if index.name(f) != name {
                    return Err(bad(n, format!("feature order differs at `{name}`")));
                }
                let w: f64 = w.parse().map_err(|_| bad(n, format!("bad weight `{w}`")))?;
                if !w.is_finite() {
                    return Err(bad(n, "non-finite weight".into()));
                }
                weights.push(w);
            }
        }
        Ok(MaxEntModel::from_parts(labels, feature_set, index, weights, cfg))
    }
}

pub fn predict(model: &MaxEntModel, fv: &FeatureVector) -> Prediction {
    model.predict(fv)
}

/// Objective value and gradient at the model's current weights.
pub fn objective_and_gradient(
    model: &MaxEntModel,
    data: &[LinkInstance],
) -> Result<(f64, Vec<f64>), ClassifierError> {
    model.objective_at(data, &model.weights)
}

/// Modal label of `data` and its relative frequency.
pub fn most_common_class(data: &[LinkInstance]) -> Result<(FoldedClass, f64), ClassifierError> {
    let mut counts: BTreeMap<FoldedClass, usize> = BTreeMap::new();
    for inst in data {
        *counts.entry(inst.label).or_default() += 1;
    }
    let (label, n) = modal_label(&counts).ok_or(ClassifierError::EmptyData)?;
    Ok((label, n as f64 / data.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{Feature, LinkArg};
    use crate::timeml::TokenSpan;
    use FoldedClass::*;

    fn arg() -> LinkArg {
        LinkArg {
            eiid: "ei".into(),
            eid: "e".into(),
            class: "OCCURRENCE".into(),
            tense: "PAST".into(),
            aspect: "NONE".into(),
            polarity: "POS".into(),
            modality: "NONE".into(),
            text: "x".into(),
            span: TokenSpan::new(0, 0),
            sentence: 0,
        }
    }

    pub(crate) fn inst(i: usize, label: FoldedClass, feats: &[(Feature, &str)]) -> LinkInstance {
        let mut fv = FeatureVector::new();
        for (f, v) in feats {
            fv.set(*f, *v);
        }
        LinkInstance {
            doc_id: format!("d{:04}", i / 10),
            lid: format!("l{i}"),
            label,
            e1: arg(),
            e2: arg(),
            signal: None,
            features: fv,
        }
    }

    fn separable() -> Vec<LinkInstance> {
        (0..40)
            .map(|i| {
                let (label, phrase) = if i % 2 == 0 { (Before, "after") } else { (Ends, "until") };
                let tense = if i % 3 == 0 { "PAST" } else { "PRESENT" };
                inst(i, label, &[(Feature::SigPhrase, phrase), (Feature::E1Tense, tense)])
            })
            .collect()
    }

    #[test]
    fn separable_data_is_fit() {
        let data = separable();
        let model = train(&data, FeatureSet::BaseSignal, TrainConfig::default()).unwrap();
        for d in &data {
            assert_eq!(model.predict(&d.features).label, d.label);
        }
        let mut fv = FeatureVector::new();
        fv.set(Feature::SigPhrase, "after");
        let p = model.predict(&fv);
        assert_eq!(p.label, Before);
        assert!(p.dist[0].1 > 0.9, "{:?}", p.dist);
    }

    #[test]
    fn single_label_is_degenerate() {
        let data: Vec<_> = (0..5).map(|i| inst(i, Includes, &[(Feature::E1Class, "STATE")])).collect();
        let model = train(&data, FeatureSet::Base, TrainConfig::default()).unwrap();
        assert!(model.is_degenerate());
        assert!(data.iter().all(|d| model.predict(&d.features).label == Includes));
    }

    #[test]
    fn zero_iterations_is_uniform() {
        let cfg = TrainConfig {
            max_iters: 0,
            ..Default::default()
        };
        let model = train(&separable(), FeatureSet::BaseSignal, cfg).unwrap();
        let p = model.predict(&separable()[1].features);
        assert_eq!(p.label, Before);
        for (_, q) in &p.dist {
            assert!((q - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn unseen_features_give_uniform() {
        let model = train(&separable(), FeatureSet::BaseSignal, TrainConfig::default()).unwrap();
        let mut fv = FeatureVector::new();
        fv.set(Feature::SigPhrase, "meanwhile");
        let p = model.predict(&fv);
        assert_eq!(p.label, Before);
        assert!(p.dist.iter().all(|(_, q)| (q - 0.5).abs() < 1e-15));
    }

    #[test]
    fn empty_data() {
        assert!(matches!(
            train(&[], FeatureSet::Base, TrainConfig::default()),
            Err(ClassifierError::EmptyData)
        ));
        assert!(matches!(most_common_class(&[]), Err(ClassifierError::EmptyData)));
    }

    #[test]
    fn hand_computed_gradient_at_zero() {
        // Two labels, one shared feature, labels 3:1. At uniform p the
        // gradient for feature f under label y is count(y) - n/2.
        let f = [(Feature::E1Class, "OCCURRENCE")];
        let data = vec![inst(0, Before, &f), inst(1, Before, &f), inst(2, Before, &f), inst(3, Ends, &f)];
        let cfg = TrainConfig {
            max_iters: 0,
            ..Default::default()
        };
        let model = train(&data, FeatureSet::Base, cfg).unwrap();
        let (value, grad) = objective_and_gradient(&model, &data).unwrap();
        assert!((value - 4.0 * 0.5f64.ln()).abs() < 1e-12);
        assert_eq!(grad, vec![1.0, -1.0]);
    }

    #[test]
    fn empty_problem_is_zero() {
        let model = MaxEntModel::from_parts(
            vec![Before, Ends],
            FeatureSet::Base,
            FeatureIndex::default(),
            vec![],
            TrainConfig {
                l2_lambda: 0.0,
                ..Default::default()
            },
        );
        let (v, g) = objective_and_gradient(&model, &[]).unwrap();
        assert_eq!(v, 0.0);
        assert!(g.is_empty());
    }

    #[test]
    fn baseline_examples() {
        let f: &[(Feature, &str)] = &[];
        let data = vec![inst(0, Before, f), inst(1, Includes, f), inst(2, Before, f), inst(3, Before, f)];
        assert_eq!(most_common_class(&data).unwrap(), (Before, 0.75));
        let data = vec![inst(0, Ends, f), inst(1, Before, f), inst(2, Ends, f), inst(3, Before, f)];
        assert_eq!(most_common_class(&data).unwrap(), (Before, 0.5));
    }

    #[test]
    fn training_is_monotone_and_reproducible() {
        let data = separable();
        let a = train(&data, FeatureSet::BaseSignal, TrainConfig::default()).unwrap();
        let b = train(&data, FeatureSet::BaseSignal, TrainConfig::default()).unwrap();
        assert_eq!(a, b);
        let trace = &a.stats().objective_trace;
        assert!(trace.len() > 1);
        assert!(trace.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn model_text_round_trip() {
        let model = train(&separable(), FeatureSet::BaseSignal, TrainConfig::default()).unwrap();
        let text = model.to_text();
        let back = MaxEntModel::read_from(text.as_bytes()).unwrap();
        assert_eq!(back.labels(), model.labels());
        assert_eq!(back.feature_index(), model.feature_index());
        assert_eq!(back.config(), model.config());
        assert!(back.weights().iter().zip(model.weights()).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn model_text_rejects_garbage() {
        assert!(MaxEntModel::read_from("nope".as_bytes()).is_err());
        let text = train(&separable(), FeatureSet::BaseSignal, TrainConfig::default()).unwrap().to_text();
        let truncated: String = text.lines().take(7).collect::<Vec<_>>().join("\n");
        assert!(matches!(
            MaxEntModel::read_from(truncated.as_bytes()),
            Err(ClassifierError::Format { .. })
        ));
    }
}
