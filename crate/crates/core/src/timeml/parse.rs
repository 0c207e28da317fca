use std::collections::HashMap;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use super::tokenize::{assign_sentences, split_segment};
use super::{
    normalize_phrase, Document, EventAnn, EventInstance, IntervalRef, Lookup, SignalAnn, TLinkAnn,
    TimeMlError, TimexAnn, Token, TokenSpan, NONE,
};
use crate::relations::RelationType;

/// Which id attribute names to accept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Dialect {
    /// Accept both the corpus and the inline naming, per tag.
    #[default]
    Auto,
    /// `eid`, `eiid`, `tid`, `sid`, `lid`.
    TimeBank,
    /// A plain `id` attribute on every tag.
    Inline,
}

impl std::str::FromStr for Dialect {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(Dialect::Auto),
            "timebank" => Ok(Dialect::TimeBank),
            "inline" => Ok(Dialect::Inline),
            other => Err(format!("unknown dialect `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    pub dialect: Dialect,
    /// Used when the document carries no `DOCID` element.
    pub doc_id: Option<String>,
    pub source_path: String,
}

pub fn parse_document(xml: &str, dialect: Dialect) -> Result<Document, TimeMlError> {
    parse_document_with(
        xml,
        &ParseOptions {
            dialect,
            ..Default::default()
        },
    )
}

pub fn parse_document_with(xml: &str, opts: &ParseOptions) -> Result<Document, TimeMlError> {
    let mut b = Builder::new(opts.dialect);
    let mut reader = Reader::from_str(xml);
    reader.config_mut().check_end_names = true;

    loop {
        let ev = reader
            .read_event()
            .map_err(|e| TimeMlError::MalformedXml(format!("at byte {}: {e}", reader.buffer_position())))?;
        match ev {
            Event::Start(e) => b.open(&e)?,
            Event::Empty(e) => {
                b.open(&e)?;
                b.close()?;
            }
            Event::End(_) => b.close()?,
            Event::Text(t) => {
                let s = t.unescape().map_err(|e| TimeMlError::MalformedXml(e.to_string()))?;
                b.text(&s);
            }
            Event::CData(c) => {
                let raw = c.into_inner();
                b.text(&String::from_utf8_lossy(&raw));
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if let Some(open) = b.open.last() {
        return Err(TimeMlError::MalformedXml(format!("unclosed element <{}>", open.tag)));
    }
    b.finish(opts)
}

enum Kind {
    Event { eid: String, class: String, attrs: InstanceAttrs },
    Timex { tid: String, value: String, timex_type: String },
    Signal { sid: String },
    DocId,
    Other,
}

#[derive(Default)]
struct InstanceAttrs {
    tense: String,
    aspect: String,
    polarity: String,
    modality: String,
}

struct Open {
    tag: String,
    kind: Kind,
    first_token: usize,
    text_start: usize,
}

struct Builder {
    dialect: Dialect,
    text: String,
    tokens: Vec<Token>,
    open: Vec<Open>,
    doc_id: Option<String>,
    events: Vec<EventAnn>,
    event_attrs: Vec<InstanceAttrs>,
    instances: Vec<EventInstance>,
    timexes: Vec<TimexAnn>,
    signals: Vec<SignalAnn>,
    tlinks: Vec<TLinkAnn>,
}

fn attrs(e: &BytesStart<'_>) -> Result<HashMap<String, String>, TimeMlError> {
    let mut out = HashMap::new();
    for a in e.attributes() {
        let a = a.map_err(|err| TimeMlError::MalformedXml(err.to_string()))?;
        let key = String::from_utf8_lossy(a.key.as_ref()).into_owned();
        let value = a
            .unescape_value()
            .map_err(|err| TimeMlError::MalformedXml(err.to_string()))?;
        out.insert(key, value.trim().to_string());
    }
    Ok(out)
}

fn or_none(v: Option<&String>) -> String {
    match v {
        Some(s) if !s.is_empty() => s.clone(),
        _ => NONE.to_string(),
    }
}

impl Builder {
    fn new(dialect: Dialect) -> Self {
        Self {
            dialect,
            text: String::new(),
            tokens: Vec::new(),
            open: Vec::new(),
            doc_id: None,
            events: Vec::new(),
            event_attrs: Vec::new(),
            instances: Vec::new(),
            timexes: Vec::new(),
            signals: Vec::new(),
            tlinks: Vec::new(),
        }
    }

    fn id_of(
        &self,
        tag: &'static str,
        a: &HashMap<String, String>,
        corpus_name: &str,
    ) -> Result<Option<String>, TimeMlError> {
        let pick = |k: &str| a.get(k).filter(|v| !v.is_empty()).cloned();
        let id = match self.dialect {
            Dialect::TimeBank => pick(corpus_name),
            Dialect::Inline => pick("id"),
            Dialect::Auto => pick(corpus_name).or_else(|| pick("id")),
        };
        if id.is_none() && tag != "TLINK" {
            return Err(TimeMlError::InvalidAnnotation {
                tag,
                reason: format!("missing id attribute (`{corpus_name}` or `id`)"),
            });
        }
        Ok(id)
    }

    fn open(&mut self, e: &BytesStart<'_>) -> Result<(), TimeMlError> {
        let tag = String::from_utf8_lossy(e.name().as_ref()).into_owned();
        let kind = match tag.to_ascii_uppercase().as_str() {
            "EVENT" => {
                let a = attrs(e)?;
                Kind::Event {
                    eid: self.id_of("EVENT", &a, "eid")?.unwrap_or_default(),
                    class: or_none(a.get("class")),
                    attrs: InstanceAttrs {
                        tense: or_none(a.get("tense")),
                        aspect: or_none(a.get("aspect")),
                        polarity: or_none(a.get("polarity")),
                        modality: or_none(a.get("modality")),
                    },
                }
            }
            "TIMEX3" => {
                let a = attrs(e)?;
                Kind::Timex {
                    tid: self.id_of("TIMEX3", &a, "tid")?.unwrap_or_default(),
                    value: or_none(a.get("value")),
                    timex_type: or_none(a.get("type")),
                }
            }
            "SIGNAL" => {
                let a = attrs(e)?;
                Kind::Signal {
                    sid: self.id_of("SIGNAL", &a, "sid")?.unwrap_or_default(),
                }
            }
            "MAKEINSTANCE" => {
                let a = attrs(e)?;
                self.make_instance(&a)?;
                Kind::Other
            }
            "TLINK" => {
                let a = attrs(e)?;
                self.tlink(&a)?;
                Kind::Other
            }
            "DOCID" => Kind::DocId,
            _ => Kind::Other,
        };
        self.open.push(Open {
            tag,
            kind,
            first_token: self.tokens.len(),
            text_start: self.text.len(),
        });
        Ok(())
    }

    fn close(&mut self) -> Result<(), TimeMlError> {
        let Some(open) = self.open.pop() else {
            return Err(TimeMlError::MalformedXml("unbalanced closing tag".into()));
        };
        let span = (self.tokens.len() > open.first_token)
            .then(|| TokenSpan::new(open.first_token, self.tokens.len() - 1));
        match open.kind {
            Kind::Event { eid, class, attrs } => {
                let span = span.ok_or_else(|| TimeMlError::InvalidAnnotation {
                    tag: "EVENT",
                    reason: format!("event `{eid}` has no text"),
                })?;
                self.events.push(EventAnn { eid, class, span });
                self.event_attrs.push(attrs);
            }
            Kind::Timex { tid, value, timex_type } => self.timexes.push(TimexAnn {
                tid,
                span,
                value,
                timex_type,
            }),
            Kind::Signal { sid } => {
                let span = span.ok_or_else(|| TimeMlError::InvalidAnnotation {
                    tag: "SIGNAL",
                    reason: format!("signal `{sid}` has no text"),
                })?;
                let phrase =
                    normalize_phrase(self.tokens[span.first..=span.last].iter().map(|t| t.text.as_str()));
                self.signals.push(SignalAnn { sid, span, phrase });
            }
            Kind::DocId => {
                let id = self.text[open.text_start..].trim();
                if !id.is_empty() {
                    self.doc_id = Some(id.to_string());
                }
            }
            Kind::Other => {}
        }
        Ok(())
    }

    fn text(&mut self, s: &str) {
        let base = self.text.len();
        self.text.push_str(s);
        split_segment(s, base, &mut self.tokens);
    }

    fn make_instance(&mut self, a: &HashMap<String, String>) -> Result<(), TimeMlError> {
        let eiid = self.id_of("MAKEINSTANCE", a, "eiid")?.unwrap_or_default();
        let eid = a
            .get("eventID")
            .filter(|v| !v.is_empty())
            .cloned()
            .ok_or_else(|| TimeMlError::InvalidAnnotation {
                tag: "MAKEINSTANCE",
                reason: format!("instance `{eiid}` lacks eventID"),
            })?;
        self.instances.push(EventInstance {
            eiid,
            eid,
            tense: or_none(a.get("tense")),
            aspect: or_none(a.get("aspect")),
            polarity: or_none(a.get("polarity")),
            modality: or_none(a.get("modality")),
            synthesized: false,
        });
        Ok(())
    }

    fn tlink(&mut self, a: &HashMap<String, String>) -> Result<(), TimeMlError> {
        let lid = self
            .id_of("TLINK", a, "lid")?
            .unwrap_or_else(|| format!("_l{}", self.tlinks.len() + 1));
        let get = |k: &str| a.get(k).filter(|v| !v.is_empty()).cloned();
        let arg = |inst: &str, ev: &str, time: &str, role: &str| {
            get(inst)
                .map(IntervalRef::EventInstance)
                .or_else(|| get(ev).map(IntervalRef::Event))
                .or_else(|| get(time).map(IntervalRef::Timex))
                .ok_or_else(|| TimeMlError::InvalidAnnotation {
                    tag: "TLINK",
                    reason: format!("link `{lid}` has no {role} argument"),
                })
        };
        let source = arg("eventInstanceID", "eventID", "timeID", "source")?;
        let target = arg("relatedToEventInstance", "relatedToEvent", "relatedToTime", "target")?;
        let rel = get("relType").ok_or_else(|| TimeMlError::InvalidAnnotation {
            tag: "TLINK",
            reason: format!("link `{lid}` has no relType"),
        })?;
        let rel_type = rel.parse::<RelationType>().map_err(|e| TimeMlError::InvalidAnnotation {
            tag: "TLINK",
            reason: e.to_string(),
        })?;
        self.tlinks.push(TLinkAnn {
            lid,
            source,
            target,
            rel_type,
            signal: get("signalID"),
        });
        Ok(())
    }

    fn finish(mut self, opts: &ParseOptions) -> Result<Document, TimeMlError> {
        assign_sentences(&mut self.tokens);
        let mut index = Lookup::default();

        fn insert(
            map: &mut HashMap<String, usize>,
            kind: &'static str,
            id: &str,
            i: usize,
        ) -> Result<(), TimeMlError> {
            if map.insert(id.to_string(), i).is_some() {
                return Err(TimeMlError::DuplicateId {
                    kind,
                    id: id.to_string(),
                });
            }
            Ok(())
        }

        for (i, e) in self.events.iter().enumerate() {
            insert(&mut index.events, "event", &e.eid, i)?;
        }
        for (i, t) in self.timexes.iter().enumerate() {
            insert(&mut index.timexes, "timex", &t.tid, i)?;
        }
        for (i, s) in self.signals.iter().enumerate() {
            insert(&mut index.signals, "signal", &s.sid, i)?;
        }
        for (i, inst) in self.instances.iter().enumerate() {
            insert(&mut index.instances, "event instance", &inst.eiid, i)?;
            if !index.events.contains_key(&inst.eid) {
                return Err(TimeMlError::DanglingReference {
                    kind: "event",
                    id: inst.eid.clone(),
                });
            }
            index.event_instance.entry(inst.eid.clone()).or_insert(i);
        }

        // Events never instantiated get a default instance carrying whatever
        // attributes the EVENT tag itself had.
        for (event, attrs) in self.events.iter().zip(&self.event_attrs) {
            if index.event_instance.contains_key(&event.eid) {
                continue;
            }
            let mut eiid = format!("{}.i", event.eid);
            while index.instances.contains_key(&eiid) {
                eiid.push('_');
            }
            let i = self.instances.len();
            index.instances.insert(eiid.clone(), i);
            index.event_instance.insert(event.eid.clone(), i);
            self.instances.push(EventInstance {
                eiid,
                eid: event.eid.clone(),
                tense: attrs.tense.clone(),
                aspect: attrs.aspect.clone(),
                polarity: attrs.polarity.clone(),
                modality: attrs.modality.clone(),
                synthesized: true,
            });
        }

        let mut lids = HashMap::new();
        for (i, link) in self.tlinks.iter().enumerate() {
            insert(&mut lids, "tlink", &link.lid, i)?;
            for r in [&link.source, &link.target] {
                let ok = match r {
                    IntervalRef::EventInstance(id) => index.instances.contains_key(id),
                    IntervalRef::Event(id) => index.events.contains_key(id),
                    IntervalRef::Timex(id) => index.timexes.contains_key(id),
                };
                if !ok {
                    let (kind, id) = match r {
                        IntervalRef::EventInstance(id) => ("event instance", id),
                        IntervalRef::Event(id) => ("event", id),
                        IntervalRef::Timex(id) => ("timex", id),
                    };
                    return Err(TimeMlError::DanglingReference { kind, id: id.clone() });
                }
            }
            if let Some(sid) = &link.signal {
                if !index.signals.contains_key(sid) {
                    return Err(TimeMlError::DanglingReference {
                        kind: "signal",
                        id: sid.clone(),
                    });
                }
            }
        }

        let doc_id = self
            .doc_id
            .or_else(|| opts.doc_id.clone())
            .unwrap_or_else(|| "doc".to_string());
        Ok(Document {
            doc_id,
            source_path: opts.source_path.clone(),
            text: self.text,
            tokens: self.tokens,
            events: self.events,
            instances: self.instances,
            timexes: self.timexes,
            signals: self.signals,
            tlinks: self.tlinks,
            index,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeml::{resolve_tlink, Interval};

    pub(crate) const SMILED_AFTER_ATE: &str = r#"John <EVENT id="e1"> smiled </EVENT> <SIGNAL id="s1"> after </SIGNAL>
he <EVENT id="e2"> ate </EVENT> .
<TLINK id="l1" eventID="e1" relatedToEvent="e2"
  relType="AFTER" signalID="s1" />"#;

    #[test]
    fn inline_example() {
        let doc = parse_document(SMILED_AFTER_ATE, Dialect::Auto).unwrap();
        let words: Vec<_> = doc.tokens().iter().map(|t| t.text.as_str()).collect();
        assert_eq!(words, ["John", "smiled", "after", "he", "ate", "."]);
        assert_eq!(doc.events().len(), 2);
        assert_eq!(doc.events()[0].eid, "e1");
        assert_eq!(doc.surface(doc.events()[0].span), "smiled");
        assert_eq!(doc.surface(doc.events()[1].span), "ate");
        assert_eq!(doc.signals().len(), 1);
        assert_eq!(doc.signals()[0].phrase, "after");
        assert_eq!(doc.tlinks().len(), 1);
        let l = &doc.tlinks()[0];
        assert_eq!(l.lid, "l1");
        assert_eq!(l.rel_type, RelationType::After);
        assert_eq!(l.signal.as_deref(), Some("s1"));
        assert_eq!(doc.instances().len(), 2);
        assert!(doc.instances().iter().all(|i| i.synthesized && i.tense == NONE));
    }

    #[test]
    fn inline_example_resolves() {
        let doc = parse_document(SMILED_AFTER_ATE, Dialect::Inline).unwrap();
        let r = resolve_tlink(&doc, &doc.tlinks()[0]).unwrap();
        assert!(r.is_event_event);
        assert_eq!(r.signal.unwrap().sid, "s1");
        match (r.arg1, r.arg2) {
            (Interval::Event { event: a, instance: ia }, Interval::Event { event: b, .. }) => {
                assert_eq!(a.eid, "e1");
                assert_eq!(ia.eid, "e1");
                assert_eq!(b.eid, "e2");
            }
            _ => panic!("expected event arguments"),
        }
    }

    #[test]
    fn timebank_dialect_rejects_plain_id() {
        let err = parse_document(SMILED_AFTER_ATE, Dialect::TimeBank).unwrap_err();
        assert!(matches!(err, TimeMlError::InvalidAnnotation { tag: "EVENT", .. }));
    }

    #[test]
    fn dangling_signal() {
        let xml = r#"<EVENT id="e1">ran</EVENT> <EVENT id="e2">slept</EVENT>
            <TLINK id="l1" eventID="e1" relatedToEvent="e2" relType="BEFORE" signalID="s9"/>"#;
        let err = parse_document(xml, Dialect::Auto).unwrap_err();
        assert!(matches!(err, TimeMlError::DanglingReference { kind: "signal", ref id } if id == "s9"));
    }

    #[test]
    fn dangling_instance_event() {
        let xml = r#"<EVENT eid="e1">ran</EVENT><MAKEINSTANCE eiid="ei1" eventID="e7"/>"#;
        assert!(matches!(
            parse_document(xml, Dialect::Auto),
            Err(TimeMlError::DanglingReference { kind: "event", .. })
        ));
    }

    #[test]
    fn duplicate_ids() {
        let xml = r#"<EVENT eid="e1">ran</EVENT> <EVENT eid="e1">slept</EVENT>"#;
        assert!(matches!(
            parse_document(xml, Dialect::Auto),
            Err(TimeMlError::DuplicateId { kind: "event", .. })
        ));
    }

    #[test]
    fn malformed() {
        for xml in [
            "<EVENT eid=\"e1\">ran</SIGNAL>",
            "<EVENT eid=\"e1\">ran",
            "<EVENT eid=\"e1>ran</EVENT>",
            "ran</EVENT>",
        ] {
            assert!(
                matches!(parse_document(xml, Dialect::Auto), Err(TimeMlError::MalformedXml(_))),
                "{xml}"
            );
        }
    }

    #[test]
    fn unknown_rel_type() {
        let xml = r#"<EVENT eid="e1">ran</EVENT> <EVENT eid="e2">slept</EVENT>
            <TLINK lid="l1" eventID="e1" relatedToEvent="e2" relType="OVERLAP"/>"#;
        assert!(matches!(
            parse_document(xml, Dialect::Auto),
            Err(TimeMlError::InvalidAnnotation { tag: "TLINK", .. })
        ));
    }

    #[test]
    fn timebank_document() {
        let xml = r#"<?xml version="1.0" ?>
<TimeML>
<DOCID>wsj_0001</DOCID>
<DCT><TIMEX3 tid="t0" type="DATE" value="1989-10-30" functionInDocument="CREATION_TIME">10/30/89</TIMEX3></DCT>
<TEXT>
Profits <EVENT eid="e1" class="OCCURRENCE">fell</EVENT> <SIGNAL sid="s1">before</SIGNAL> IBM's
chairman <EVENT eid="e2" class="REPORTING">said</EVENT> so &amp; more. Then it
<EVENT eid="e3" class="OCCURRENCE">rose</EVENT> <TIMEX3 tid="t1" type="DATE" value="1989-10-31">Tuesday</TIMEX3>.
</TEXT>
<MAKEINSTANCE eventID="e1" eiid="ei1" tense="PAST" aspect="NONE" polarity="POS" pos="VERB"/>
<MAKEINSTANCE eventID="e2" eiid="ei2" tense="PAST" aspect="PERFECTIVE" polarity="NEG" modality="would" pos="VERB"/>
<TLINK lid="l1" relType="BEFORE" eventInstanceID="ei1" relatedToEventInstance="ei2" signalID="s1"/>
<TLINK lid="l2" relType="IS_INCLUDED" eventInstanceID="ei1" relatedToTime="t0"/>
<TLINK lid="l3" relType="AFTER" timeID="t1" relatedToEventInstance="ei2"/>
<TLINK lid="l4" relType="BEFORE" eventID="e3" relatedToEventInstance="ei1"/>
</TimeML>"#;
        let doc = parse_document(xml, Dialect::TimeBank).unwrap();
        assert_eq!(doc.doc_id(), "wsj_0001");
        assert_eq!(doc.events().len(), 3);
        assert_eq!(doc.instances().len(), 3);
        let ei1 = doc.instance("ei1").unwrap();
        assert_eq!((ei1.tense.as_str(), ei1.modality.as_str()), ("PAST", NONE));
        let ei2 = doc.instance("ei2").unwrap();
        assert_eq!((ei2.polarity.as_str(), ei2.modality.as_str()), ("NEG", "would"));
        assert!(doc.instance_of_event("e3").unwrap().synthesized);
        assert_eq!(doc.timexes().len(), 2);
        assert_eq!(doc.surface(doc.timexes()[0].span.unwrap()), "10/30/89");
        assert!(doc.tokens().iter().any(|t| t.text == "&"));
        assert!(doc.tokens().iter().any(|t| t.text == "'s"));

        let s: Vec<_> = doc.tlinks().iter().map(|l| resolve_tlink(&doc, l).unwrap()).collect();
        assert!(s[0].is_event_event && s[0].signal.is_some());
        assert!(!s[1].is_event_event && s[1].signal.is_none());
        assert!(!s[2].is_event_event);
        assert!(s[3].is_event_event);

        // "said so & more ." ends a sentence, "Then" starts the next.
        let fell = doc.events()[0].span.first;
        let rose = doc.events()[2].span.first;
        assert_eq!(doc.sentence_of(rose), doc.sentence_of(fell) + 1);
        for t in doc.tokens() {
            assert_eq!(&doc.text()[t.char_span.0..t.char_span.1], t.text);
        }
    }

    #[test]
    fn two_sentence_fixture_keeps_tense() {
        let xml = r#"<TimeML><TEXT>The market <EVENT eid="e1" class="OCCURRENCE">crashed</EVENT>.
Investors <EVENT eid="e2" class="STATE">panicked</EVENT> <SIGNAL sid="s1">soon after</SIGNAL>.</TEXT>
<MAKEINSTANCE eiid="ei1" eventID="e1" tense="PAST" aspect="NONE" polarity="POS"/>
<MAKEINSTANCE eiid="ei2" eventID="e2" tense="PAST" aspect="NONE" polarity="POS"/>
<TLINK lid="l1" relType="AFTER" eventInstanceID="ei2" relatedToEventInstance="ei1" signalID="s1"/>
</TimeML>"#;
        let doc = parse_document(xml, Dialect::Auto).unwrap();
        assert_eq!(doc.instance("ei1").unwrap().tense, "PAST");
        assert_eq!(doc.signals()[0].phrase, "soon after");
        assert_eq!(doc.sentence_of(doc.events()[1].span.first), 1);
        assert_eq!(doc.instances().len(), 2);
    }

    #[test]
    fn parse_is_deterministic() {
        let a = parse_document(SMILED_AFTER_ATE, Dialect::Auto).unwrap();
        let b = parse_document(SMILED_AFTER_ATE, Dialect::Auto).unwrap();
        assert_eq!(a, b);
    }
}
