//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export returns JSON text; the page renders it. The plain functions
//! are usable natively for testing.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use tlink_core::classifier::TrainConfig;
use tlink_core::eval::{run_subset_experiment, signalled_accuracy_bound, BoundInputs, SplitSpec, Subset};
use tlink_core::features::{build_dataset, extract_features, FeatureSet};
use tlink_core::synth::{generate, SynthSpec};
use tlink_core::timeml::{parse_document, Dialect};

#[derive(Serialize)]
struct ParsedLink {
    lid: String,
    label: String,
    e1: String,
    e2: String,
    signal: Option<String>,
    features: Vec<String>,
}

#[derive(Serialize)]
struct Parsed {
    tokens: Vec<String>,
    events: usize,
    signals: usize,
    timexes: usize,
    tlinks: usize,
    instances: Vec<ParsedLink>,
}

/// Parse a TimeML snippet and list the event-event instances with their
/// base+signal features.
pub fn parse_snippet_json(xml: &str) -> Result<String, String> {
    let doc = parse_document(xml, Dialect::Auto).map_err(|e| e.to_string())?;
    let data = build_dataset(std::slice::from_ref(&doc)).map_err(|e| e.to_string())?;
    let instances = data
        .iter()
        .map(|inst| ParsedLink {
            lid: inst.lid.clone(),
            label: inst.label.to_string(),
            e1: inst.e1.text.clone(),
            e2: inst.e2.text.clone(),
            signal: inst.signal.as_ref().map(|s| s.phrase.clone()),
            features: extract_features(inst, FeatureSet::BaseSignal, None).keys().collect(),
        })
        .collect();
    let out = Parsed {
        tokens: doc.tokens().iter().map(|t| t.text.clone()).collect(),
        events: doc.events().len(),
        signals: doc.signals().len(),
        timexes: doc.timexes().len(),
        tlinks: doc.tlinks().len(),
        instances,
    };
    Ok(serde_json::to_string(&out).expect("serializable"))
}

pub fn bound_value(p: f64, pn: f64, s: f64) -> Result<f64, String> {
    signalled_accuracy_bound(BoundInputs { p, p_n: pn, s })
        .map(|b| b.a)
        .map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct ExperimentRow {
    subset: &'static str,
    n: usize,
    baseline: f64,
    base: f64,
    base_signal: f64,
}

/// Generate a synthetic corpus and cross-validate both feature sets inside
/// the unsignalled and signalled links.
pub fn synth_experiment_json(
    docs: usize,
    links_per_doc: usize,
    signal_fraction: f64,
    noise: f64,
    folds: usize,
    seed: u64,
) -> Result<String, String> {
    let spec = SynthSpec { n_docs: docs, links_per_doc, seed, signal_fraction, noise, ..SynthSpec::default() };
    let files = generate(&spec).map_err(|e| e.to_string())?;
    let parsed = files
        .iter()
        .map(|f| parse_document(&f.xml, Dialect::Inline))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let data = build_dataset(&parsed).map_err(|e| e.to_string())?;
    let split = SplitSpec::xv(folds, seed);
    let cfg = TrainConfig { max_iters: 200, ..TrainConfig::default() };
    let mut rows = Vec::new();
    for (subset, name) in [(Subset::Unsignalled, "unsignalled"), (Subset::Signalled, "signalled")] {
        let run = |fs| run_subset_experiment(&data, &split, fs, cfg, subset).map_err(|e| e.to_string());
        let base = run(FeatureSet::Base)?;
        let signal = run(FeatureSet::BaseSignal)?;
        rows.push(ExperimentRow {
            subset: name,
            n: base.n_eval,
            baseline: base.baseline,
            base: base.accuracy,
            base_signal: signal.accuracy,
        });
    }
    Ok(serde_json::to_string(&rows).expect("serializable"))
}

#[wasm_bindgen(js_name = parseSnippet)]
pub fn parse_snippet(xml: &str) -> Result<String, JsError> {
    parse_snippet_json(xml).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn bound(p: f64, pn: f64, s: f64) -> Result<f64, JsError> {
    bound_value(p, pn, s).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = synthExperiment)]
pub fn synth_experiment(
    docs: usize,
    links_per_doc: usize,
    signal_fraction: f64,
    noise: f64,
    folds: usize,
    seed: u64,
) -> Result<String, JsError> {
    synth_experiment_json(docs, links_per_doc, signal_fraction, noise, folds, seed).map_err(|e| JsError::new(&e))
}
