//! TimeML documents: tokenization, parsing of inline annotations, corpus
//! loading and TLINK argument resolution.
//!
//! Both the TimeBank/AQUAINT dialect (`eid`/`eiid`, `eventInstanceID`,
//! `relatedToEventInstance`, ...) and the short inline dialect (`id`,
//! `eventID`, `relatedToEvent`) are accepted. Events that never receive a
//! `MAKEINSTANCE` get a synthesized instance so that every event can take
//! part in a link.

mod corpus;
mod parse;
mod tokenize;

use std::collections::HashMap;

use serde::Serialize;

use crate::relations::RelationType;

pub use corpus::{load_corpus, Corpus, CorpusIssue};
pub use parse::{parse_document, parse_document_with, Dialect, ParseOptions};
pub use tokenize::{tokenize, Token};

/// Attribute value stored when an attribute is missing or empty.
pub const NONE: &str = "NONE";

#[derive(Debug, thiserror::Error)]
pub enum TimeMlError {
    #[error("malformed XML: {0}")]
    MalformedXml(String),
    #[error("dangling reference: {kind} `{id}` is not defined")]
    DanglingReference { kind: &'static str, id: String },
    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String },
    #[error("invalid {tag}: {reason}")]
    InvalidAnnotation { tag: &'static str, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Inclusive range of token indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct TokenSpan {
    pub first: usize,
    pub last: usize,
}

impl TokenSpan {
    pub fn new(first: usize, last: usize) -> Self {
        debug_assert!(first <= last);
        Self { first, last }
    }

    pub fn len(&self) -> usize {
        self.last - self.first + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EventAnn {
    pub eid: String,
    pub class: String,
    pub span: TokenSpan,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EventInstance {
    pub eiid: String,
    pub eid: String,
    pub tense: String,
    pub aspect: String,
    pub polarity: String,
    pub modality: String,
    /// Created by the parser rather than read from a `MAKEINSTANCE` tag.
    pub synthesized: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TimexAnn {
    pub tid: String,
    /// `None` for empty TIMEX3 elements (anchors without text).
    pub span: Option<TokenSpan>,
    pub value: String,
    pub timex_type: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SignalAnn {
    pub sid: String,
    pub span: TokenSpan,
    /// Lowercased, single-space joined token texts.
    pub phrase: String,
}

/// A TLINK argument as written in the markup.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum IntervalRef {
    EventInstance(String),
    Event(String),
    Timex(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TLinkAnn {
    pub lid: String,
    pub source: IntervalRef,
    pub target: IntervalRef,
    pub rel_type: RelationType,
    pub signal: Option<String>,
}

/// A parsed TimeML document. Immutable once built; all cross references are
/// validated by the parser.
#[derive(Debug, Clone, Serialize)]
pub struct Document {
    doc_id: String,
    source_path: String,
    text: String,
    tokens: Vec<Token>,
    events: Vec<EventAnn>,
    instances: Vec<EventInstance>,
    timexes: Vec<TimexAnn>,
    signals: Vec<SignalAnn>,
    tlinks: Vec<TLinkAnn>,
    #[serde(skip)]
    index: Lookup,
}

#[derive(Debug, Clone, Default)]
struct Lookup {
    events: HashMap<String, usize>,
    instances: HashMap<String, usize>,
    /// eid -> first instance of that event
    event_instance: HashMap<String, usize>,
    timexes: HashMap<String, usize>,
    signals: HashMap<String, usize>,
}

impl PartialEq for Document {
    fn eq(&self, other: &Self) -> bool {
        self.doc_id == other.doc_id
            && self.source_path == other.source_path
            && self.text == other.text
            && self.tokens == other.tokens
            && self.events == other.events
            && self.instances == other.instances
            && self.timexes == other.timexes
            && self.signals == other.signals
            && self.tlinks == other.tlinks
    }
}

impl Document {
    pub fn doc_id(&self) -> &str {
        &self.doc_id
    }

    pub fn source_path(&self) -> &str {
        &self.source_path
    }

    /// Unescaped character data of the document with markup removed. Token
    /// spans index into this string.
    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn events(&self) -> &[EventAnn] {
        &self.events
    }

    pub fn instances(&self) -> &[EventInstance] {
        &self.instances
    }

    pub fn timexes(&self) -> &[TimexAnn] {
        &self.timexes
    }

    pub fn signals(&self) -> &[SignalAnn] {
        &self.signals
    }

    pub fn tlinks(&self) -> &[TLinkAnn] {
        &self.tlinks
    }

    pub fn event(&self, eid: &str) -> Option<&EventAnn> {
        self.index.events.get(eid).map(|&i| &self.events[i])
    }

    pub fn instance(&self, eiid: &str) -> Option<&EventInstance> {
        self.index.instances.get(eiid).map(|&i| &self.instances[i])
    }

    /// First instance (declared or synthesized) of event `eid`.
    pub fn instance_of_event(&self, eid: &str) -> Option<&EventInstance> {
        self.index.event_instance.get(eid).map(|&i| &self.instances[i])
    }

    pub fn timex(&self, tid: &str) -> Option<&TimexAnn> {
        self.index.timexes.get(tid).map(|&i| &self.timexes[i])
    }

    pub fn signal(&self, sid: &str) -> Option<&SignalAnn> {
        self.index.signals.get(sid).map(|&i| &self.signals[i])
    }

    /// Space-joined token texts of `span`.
    pub fn surface(&self, span: TokenSpan) -> String {
        self.tokens[span.first..=span.last]
            .iter()
            .map(|t| t.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn sentence_of(&self, token: usize) -> usize {
        self.tokens[token].sentence_index
    }

    /// Resolve the arguments and signal of `link`.
    pub fn resolve_tlink<'a>(&'a self, link: &TLinkAnn) -> Result<ResolvedLink<'a>, TimeMlError> {
        let arg1 = self.resolve_interval(&link.source)?;
        let arg2 = self.resolve_interval(&link.target)?;
        let signal = match &link.signal {
            Some(sid) => Some(self.signal(sid).ok_or_else(|| TimeMlError::DanglingReference {
                kind: "signal",
                id: sid.clone(),
            })?),
            None => None,
        };
        let is_event_event = matches!(
            (&arg1, &arg2),
            (Interval::Event { .. }, Interval::Event { .. })
        );
        Ok(ResolvedLink {
            arg1,
            arg2,
            signal,
            is_event_event,
        })
    }

    fn resolve_interval<'a>(&'a self, r: &IntervalRef) -> Result<Interval<'a>, TimeMlError> {
        let dangling = |kind, id: &String| TimeMlError::DanglingReference { kind, id: id.clone() };
        match r {
            IntervalRef::EventInstance(eiid) => {
                let instance = self.instance(eiid).ok_or_else(|| dangling("event instance", eiid))?;
                let event = self.event(&instance.eid).ok_or_else(|| dangling("event", &instance.eid))?;
                Ok(Interval::Event { event, instance })
            }
            IntervalRef::Event(eid) => {
                let event = self.event(eid).ok_or_else(|| dangling("event", eid))?;
                let instance = self.instance_of_event(eid).ok_or_else(|| dangling("event instance", eid))?;
                Ok(Interval::Event { event, instance })
            }
            IntervalRef::Timex(tid) => {
                let timex = self.timex(tid).ok_or_else(|| dangling("timex", tid))?;
                Ok(Interval::Timex(timex))
            }
        }
    }
}

/// A resolved TLINK argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Interval<'a> {
    Event {
        event: &'a EventAnn,
        instance: &'a EventInstance,
    },
    Timex(&'a TimexAnn),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedLink<'a> {
    pub arg1: Interval<'a>,
    pub arg2: Interval<'a>,
    pub signal: Option<&'a SignalAnn>,
    pub is_event_event: bool,
}

pub fn resolve_tlink<'a>(doc: &'a Document, link: &TLinkAnn) -> Result<ResolvedLink<'a>, TimeMlError> {
    doc.resolve_tlink(link)
}

/// Lowercase and single-space join.
pub fn normalize_phrase<'a>(words: impl IntoIterator<Item = &'a str>) -> String {
    words
        .into_iter()
        .flat_map(str::split_whitespace)
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}
