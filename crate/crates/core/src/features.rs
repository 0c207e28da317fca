//! Link instances and their categorical features.
//!
//! Features are computed on the post-fold argument order: `e1` and `e2` are the
//! arguments for which the folded label holds, which may be the reverse of the
//! order written in the TLINK.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::relations::FoldedClass;
use crate::timeml::{Document, Interval, TLinkAnn, TimeMlError, TokenSpan, NONE};

/// The feature registry, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Feature {
    E1Class,
    E1Tense,
    E1Aspect,
    E1Modality,
    E1Negation,
    E1String,
    E2Class,
    E2Tense,
    E2Aspect,
    E2Modality,
    E2Negation,
    E2String,
    SameTense,
    SameAspect,
    SigPhrase,
    OrderE1E2,
    OrderSigE1,
    OrderSigE2,
    DistTokE1E2,
    DistSentE1E2,
    DistTokSigE1,
    DistTokSigE2,
    Hint,
}

impl Feature {
    pub const ALL: [Feature; 23] = [
        Feature::E1Class,
        Feature::E1Tense,
        Feature::E1Aspect,
        Feature::E1Modality,
        Feature::E1Negation,
        Feature::E1String,
        Feature::E2Class,
        Feature::E2Tense,
        Feature::E2Aspect,
        Feature::E2Modality,
        Feature::E2Negation,
        Feature::E2String,
        Feature::SameTense,
        Feature::SameAspect,
        Feature::SigPhrase,
        Feature::OrderE1E2,
        Feature::OrderSigE1,
        Feature::OrderSigE2,
        Feature::DistTokE1E2,
        Feature::DistSentE1E2,
        Feature::DistTokSigE1,
        Feature::DistTokSigE2,
        Feature::Hint,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::E1Class => "e1.class",
            Feature::E1Tense => "e1.tense",
            Feature::E1Aspect => "e1.aspect",
            Feature::E1Modality => "e1.modality",
            Feature::E1Negation => "e1.negation",
            Feature::E1String => "e1.string",
            Feature::E2Class => "e2.class",
            Feature::E2Tense => "e2.tense",
            Feature::E2Aspect => "e2.aspect",
            Feature::E2Modality => "e2.modality",
            Feature::E2Negation => "e2.negation",
            Feature::E2String => "e2.string",
            Feature::SameTense => "sameTense",
            Feature::SameAspect => "sameAspect",
            Feature::SigPhrase => "sig.phrase",
            Feature::OrderE1E2 => "order.e1e2",
            Feature::OrderSigE1 => "order.sig_e1",
            Feature::OrderSigE2 => "order.sig_e2",
            Feature::DistTokE1E2 => "dist.tok.e1e2",
            Feature::DistSentE1E2 => "dist.sent.e1e2",
            Feature::DistTokSigE1 => "dist.tok.sig_e1",
            Feature::DistTokSigE2 => "dist.tok.sig_e2",
            Feature::Hint => "hint",
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for Feature {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

/// Which registry prefix a model sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureSet {
    Base,
    BaseSignal,
    BaseSignalHint,
}

impl FeatureSet {
    pub fn features(self) -> &'static [Feature] {
        match self {
            FeatureSet::Base => &Feature::ALL[..14],
            FeatureSet::BaseSignal => &Feature::ALL[..22],
            FeatureSet::BaseSignalHint => &Feature::ALL[..],
        }
    }

    pub fn uses_hint(self) -> bool {
        self == FeatureSet::BaseSignalHint
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureSet::Base => "base",
            FeatureSet::BaseSignal => "base+signal",
            FeatureSet::BaseSignalHint => "base+signal+hint",
        }
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "base" => Ok(FeatureSet::Base),
            "base+signal" => Ok(FeatureSet::BaseSignal),
            "base+signal+hint" => Ok(FeatureSet::BaseSignalHint),
            other => Err(format!(
                "unknown feature set `{other}` (expected base, base+signal or base+signal+hint)"
            )),
        }
    }
}

/// Categorical features, one value per registered name.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize)]
pub struct FeatureVector(BTreeMap<Feature, String>);

impl FeatureVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, f: Feature, value: impl Into<String>) {
        self.0.insert(f, value.into());
    }

    pub fn get(&self, f: Feature) -> Option<&str> {
        self.0.get(&f).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Feature, &str)> {
        self.0.iter().map(|(f, v)| (*f, v.as_str()))
    }

    /// `name=value` strings in registry order.
    pub fn keys(&self) -> impl Iterator<Item = String> + '_ {
        self.iter().map(|(f, v)| format!("{}={}", f.name(), v))
    }

    pub fn extend(&mut self, other: FeatureVector) {
        self.0.extend(other.0);
    }
}

/// One event argument of a link.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct LinkArg {
    pub eiid: String,
    pub eid: String,
    pub class: String,
    pub tense: String,
    pub aspect: String,
    pub polarity: String,
    pub modality: String,
    /// Lowercased surface text.
    pub text: String,
    pub span: TokenSpan,
    pub sentence: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct LinkSignal {
    pub sid: String,
    pub phrase: String,
    pub span: TokenSpan,
}

/// One classification example.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct LinkInstance {
    pub doc_id: String,
    pub lid: String,
    pub label: FoldedClass,
    pub e1: LinkArg,
    pub e2: LinkArg,
    pub signal: Option<LinkSignal>,
    pub features: FeatureVector,
}

impl LinkInstance {
    pub fn has_signal(&self) -> bool {
        self.signal.is_some()
    }

    pub fn key(&self) -> (&str, &str) {
        (&self.doc_id, &self.lid)
    }
}

fn link_arg(doc: &Document, iv: Interval<'_>) -> Option<LinkArg> {
    match iv {
        Interval::Event { event, instance } => Some(LinkArg {
            eiid: instance.eiid.clone(),
            eid: event.eid.clone(),
            class: event.class.clone(),
            tense: instance.tense.clone(),
            aspect: instance.aspect.clone(),
            polarity: instance.polarity.clone(),
            modality: instance.modality.clone(),
            text: doc.surface(event.span).to_lowercase(),
            span: event.span,
            sentence: doc.sentence_of(event.span.first),
        }),
        Interval::Timex(_) => None,
    }
}

/// Build the (unfeaturized) instance for `link`, or `None` when it is not an
/// event-event link.
pub fn build_instance(doc: &Document, link: &TLinkAnn) -> Result<Option<LinkInstance>, TimeMlError> {
    let resolved = doc.resolve_tlink(link)?;
    if !resolved.is_event_event {
        return Ok(None);
    }
    let (Some(a), Some(b)) = (link_arg(doc, resolved.arg1), link_arg(doc, resolved.arg2)) else {
        return Ok(None);
    };
    let folded = link.rel_type.fold();
    let (e1, e2) = if folded.swap_args { (b, a) } else { (a, b) };
    Ok(Some(LinkInstance {
        doc_id: doc.doc_id().to_string(),
        lid: link.lid.clone(),
        label: folded.label,
        e1,
        e2,
        signal: resolved.signal.map(|s| LinkSignal {
            sid: s.sid.clone(),
            phrase: s.phrase.clone(),
            span: s.span,
        }),
        features: FeatureVector::new(),
    }))
}

/// All event-event instances of `docs`, in canonical `(doc_id, lid)` order.
pub fn build_dataset(docs: &[Document]) -> Result<Vec<LinkInstance>, TimeMlError> {
    let mut out = Vec::new();
    for doc in docs {
        for link in doc.tlinks() {
            if let Some(inst) = build_instance(doc, link)? {
                out.push(inst);
            }
        }
    }
    out.sort_by(|a, b| a.key().cmp(&b.key()));
    Ok(out)
}

fn flag(b: bool) -> &'static str {
    if b {
        "true"
    } else {
        "false"
    }
}

pub fn extract_base_features(inst: &LinkInstance) -> FeatureVector {
    let mut fv = FeatureVector::new();
    let per_arg = [
        (&inst.e1, [Feature::E1Class, Feature::E1Tense, Feature::E1Aspect, Feature::E1Modality, Feature::E1Negation, Feature::E1String]),
        (&inst.e2, [Feature::E2Class, Feature::E2Tense, Feature::E2Aspect, Feature::E2Modality, Feature::E2Negation, Feature::E2String]),
    ];
    for (arg, [class, tense, aspect, modality, negation, string]) in per_arg {
        fv.set(class, arg.class.as_str());
        fv.set(tense, arg.tense.as_str());
        fv.set(aspect, arg.aspect.as_str());
        fv.set(modality, arg.modality.as_str());
        fv.set(negation, flag(arg.polarity == "NEG"));
        fv.set(string, arg.text.as_str());
    }
    fv.set(Feature::SameTense, flag(inst.e1.tense == inst.e2.tense));
    fv.set(Feature::SameAspect, flag(inst.e1.aspect == inst.e2.aspect));
    fv
}

/// Edge-to-edge token distance between two spans.
pub fn token_distance(a: TokenSpan, b: TokenSpan) -> usize {
    let (earlier, later) = if (a.first, a.last) <= (b.first, b.last) { (a, b) } else { (b, a) };
    later.first.abs_diff(earlier.last)
}

pub fn token_bucket(d: usize) -> &'static str {
    match d {
        0 => "0",
        1 => "1",
        2 => "2",
        3 => "3",
        4 => "4",
        5..=9 => "5-9",
        10..=19 => "10-19",
        _ => "20+",
    }
}

pub fn sentence_bucket(d: usize) -> &'static str {
    match d {
        0 => "0",
        1 => "1",
        2 => "2",
        _ => "3+",
    }
}

fn sig_order(sig: TokenSpan, ev: TokenSpan) -> &'static str {
    if sig.first < ev.first {
        "sig-first"
    } else {
        "sig-second"
    }
}

/// Signal and textual-layout features. `hints` adds the `hint` feature.
pub fn extract_signal_features(inst: &LinkInstance, hints: Option<&HintTable>) -> FeatureVector {
    let mut fv = FeatureVector::new();
    let (s1, s2) = (inst.e1.span, inst.e2.span);
    fv.set(
        Feature::OrderE1E2,
        if s2.first < s1.first { "e2-e1" } else { "e1-e2" },
    );
    fv.set(Feature::DistTokE1E2, token_bucket(token_distance(s1, s2)));
    fv.set(
        Feature::DistSentE1E2,
        sentence_bucket(inst.e1.sentence.abs_diff(inst.e2.sentence)),
    );
    match &inst.signal {
        Some(sig) => {
            fv.set(Feature::SigPhrase, sig.phrase.as_str());
            fv.set(Feature::OrderSigE1, sig_order(sig.span, s1));
            fv.set(Feature::OrderSigE2, sig_order(sig.span, s2));
            fv.set(Feature::DistTokSigE1, token_bucket(token_distance(sig.span, s1)));
            fv.set(Feature::DistTokSigE2, token_bucket(token_distance(sig.span, s2)));
        }
        None => {
            fv.set(Feature::SigPhrase, NONE);
            fv.set(Feature::OrderSigE1, "none");
            fv.set(Feature::OrderSigE2, "none");
            fv.set(Feature::DistTokSigE1, NONE);
            fv.set(Feature::DistTokSigE2, NONE);
        }
    }
    if let Some(h) = hints {
        let v = inst
            .signal
            .as_ref()
            .and_then(|s| h.get(&s.phrase))
            .map_or(NONE, FoldedClass::as_str);
        fv.set(Feature::Hint, v);
    }
    fv
}

/// The full vector for `set`. `hints` is required for the hint feature set and
/// ignored otherwise.
pub fn extract_features(inst: &LinkInstance, set: FeatureSet, hints: Option<&HintTable>) -> FeatureVector {
    let mut fv = extract_base_features(inst);
    if set != FeatureSet::Base {
        let empty = HintTable::default();
        let hints = set.uses_hint().then(|| hints.unwrap_or(&empty));
        fv.extend(extract_signal_features(inst, hints));
    }
    fv
}

/// Featurize a whole dataset in place.
pub fn featurize(data: &mut [LinkInstance], set: FeatureSet, hints: Option<&HintTable>) {
    for inst in data {
        inst.features = extract_features(inst, set, hints);
    }
}

/// Most likely folded label per signal phrase, learned from training data.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct HintTable(BTreeMap<String, FoldedClass>);

impl HintTable {
    pub fn get(&self, phrase: &str) -> Option<FoldedClass> {
        self.0.get(phrase).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, FoldedClass)> {
        self.0.iter().map(|(p, c)| (p.as_str(), *c))
    }
}

impl FromIterator<(String, FoldedClass)> for HintTable {
    fn from_iter<I: IntoIterator<Item = (String, FoldedClass)>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

/// Modal label of `counts`, ties to the lexicographically smallest label.
pub(crate) fn modal_label(counts: &BTreeMap<FoldedClass, usize>) -> Option<(FoldedClass, usize)> {
    let mut best: Option<(FoldedClass, usize)> = None;
    for (&label, &n) in counts {
        if best.is_none_or(|(_, m)| n > m) {
            best = Some((label, n));
        }
    }
    best
}

pub fn compute_hint_table(training: &[LinkInstance]) -> HintTable {
    let mut counts: BTreeMap<&str, BTreeMap<FoldedClass, usize>> = BTreeMap::new();
    for inst in training {
        if let Some(sig) = &inst.signal {
            *counts.entry(&sig.phrase).or_default().entry(inst.label).or_default() += 1;
        }
    }
    counts
        .into_iter()
        .filter_map(|(phrase, c)| modal_label(&c).map(|(label, _)| (phrase.to_string(), label)))
        .collect()
}
