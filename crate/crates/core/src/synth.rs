//! Deterministic synthetic TimeML corpora.
//!
//! Each link gets its own pair of templated clauses. Signalled links take
//! their folded class from the signal lexicon (replaced by a draw from the
//! class distribution with probability `noise`); unsignalled links draw their
//! class from the class distribution. Event attributes, words, textual order
//! and TLINK orientation are drawn independently of the class, so only the
//! signal phrase carries information about the label.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::relations::FoldedClass;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid synthesis spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_docs: usize,
    pub links_per_doc: usize,
    pub seed: u64,
    /// Probability that a link is signalled.
    pub signal_fraction: f64,
    /// Folded-class weights for unsignalled links and for noise; sums to 1.
    pub class_distribution: Vec<(FoldedClass, f64)>,
    pub signal_lexicon: Vec<(String, FoldedClass)>,
    /// Probability that a signalled link ignores the lexicon.
    pub noise: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        use FoldedClass::*;
        Self {
            n_docs: 100,
            links_per_doc: 10,
            seed: 1,
            signal_fraction: 0.5,
            class_distribution: vec![
                (Before, 0.53),
                (Includes, 0.188),
                (Simultaneous, 0.094),
                (Ibefore, 0.047),
                (Begins, 0.0705),
                (Ends, 0.0705),
            ],
            signal_lexicon: [
                ("before", Before),
                ("after", Before),
                ("as soon as", Ibefore),
                ("since", Begins),
                ("until", Ends),
                ("during", Includes),
                ("while", Simultaneous),
                ("meanwhile", Simultaneous),
            ]
            .into_iter()
            .map(|(p, c)| (p.to_string(), c))
            .collect(),
            noise: 0.1,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        for (name, v) in [("signal_fraction", self.signal_fraction), ("noise", self.noise)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} = {v} is outside [0, 1]"));
            }
        }
        if self.class_distribution.is_empty() {
            return bad("class distribution is empty".into());
        }
        if self.class_distribution.iter().any(|(_, w)| !(0.0..=1.0).contains(w)) {
            return bad("class weights must lie in [0, 1]".into());
        }
        let total: f64 = self.class_distribution.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("class weights sum to {total}, not 1"));
        }
        if self.signal_fraction > 0.0 && self.signal_lexicon.is_empty() {
            return bad("signalled links requested but the lexicon is empty".into());
        }
        if self.signal_lexicon.iter().any(|(p, _)| p.split_whitespace().next().is_none()) {
            return bad("lexicon phrases must be non-empty".into());
        }
        Ok(())
    }
}

/// One generated document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthDoc {
    /// File name, e.g. `synth_0003.tml`.
    pub name: String,
    pub xml: String,
}

const SUBJECTS: &[&str] = &["the company", "officials", "the board", "investors", "the agency", "analysts", "the bank", "workers"];
const VERBS: &[&str] = &[
    "announced", "rose", "fell", "said", "met", "signed", "closed", "opened", "reported", "sold", "bought", "agreed",
    "warned", "expanded", "hired", "delayed",
];
const OBJECTS: &[&str] = &["the plan", "the deal", "its results", "the offer", "new rules", "the merger"];
const CLASSES: &[&str] = &["OCCURRENCE", "STATE", "REPORTING", "I_ACTION", "ASPECTUAL"];
const TENSES: &[&str] = &["PAST", "PRESENT", "FUTURE", "NONE"];
const ASPECTS: &[&str] = &["NONE", "PROGRESSIVE", "PERFECTIVE"];
const MODALITIES: &[&str] = &["NONE", "NONE", "NONE", "would", "could"];

struct Gen<'a> {
    spec: &'a SynthSpec,
    rng: ChaCha8Rng,
    classes: WeightedIndex<f64>,
}

struct Ids {
    event: usize,
    signal: usize,
    link: usize,
}

impl Gen<'_> {
    fn pick<'s>(&mut self, xs: &'s [&'s str]) -> &'s str {
        xs.choose(&mut self.rng).expect("non-empty")
    }

    fn draw_class(&mut self) -> FoldedClass {
        self.spec.class_distribution[self.classes.sample(&mut self.rng)].0
    }

    fn event(&mut self, ids: &mut Ids) -> (String, String) {
        ids.event += 1;
        let id = format!("e{}", ids.event);
        let polarity = if self.rng.gen_bool(0.1) { "NEG" } else { "POS" };
        let tag = format!(
            r#"<EVENT id="{id}" class="{}" tense="{}" aspect="{}" polarity="{polarity}" modality="{}">{}</EVENT>"#,
            self.pick(CLASSES),
            self.pick(TENSES),
            self.pick(ASPECTS),
            self.pick(MODALITIES),
            self.pick(VERBS),
        );
        (id, tag)
    }

    fn clause(&mut self, ids: &mut Ids, capital: bool) -> (String, String) {
        let subject = self.pick(SUBJECTS);
        let subject = if capital { capitalize(subject) } else { subject.to_string() };
        let (id, ev) = self.event(ids);
        let object = self.pick(OBJECTS);
        (id, format!("{subject} {ev} {object}"))
    }

    /// Text for one link and its TLINK tag.
    fn link(&mut self, ids: &mut Ids, text: &mut String, links: &mut String) {
        let signalled = self.rng.gen_bool(self.spec.signal_fraction);
        // `a` and `b` are the arguments the folded label holds for.
        let (label, a, b, signal) = if signalled {
            let (phrase, lex_label) = self.spec.signal_lexicon.choose(&mut self.rng).expect("lexicon").clone();
            let label = if self.rng.gen_bool(self.spec.noise) { self.draw_class() } else { lex_label };
            ids.signal += 1;
            let sid = format!("s{}", ids.signal);
            let fronted = self.rng.gen_bool(0.5);
            let sig_text = if fronted { capitalize(&phrase) } else { phrase.clone() };
            let sig = format!(r#"<SIGNAL id="{sid}">{sig_text}</SIGNAL>"#);
            if fronted {
                // "Since B, A."
                let (b, cb) = self.clause(ids, false);
                let (a, ca) = self.clause(ids, false);
                let _ = writeln!(text, "{sig} {cb} , {ca} .");
                (label, a, b, Some(sid))
            } else {
                // "A since B."
                let (a, ca) = self.clause(ids, true);
                let (b, cb) = self.clause(ids, false);
                let _ = writeln!(text, "{ca} {sig} {cb} .");
                (label, a, b, Some(sid))
            }
        } else {
            let label = self.draw_class();
            let (x, cx) = self.clause(ids, true);
            let same_sentence = self.rng.gen_bool(0.5);
            let (y, cy) = self.clause(ids, !same_sentence);
            if same_sentence {
                let _ = writeln!(text, "{cx} and {cy} .");
            } else {
                let _ = writeln!(text, "{cx} . {cy} .");
            }
            let (a, b) = if self.rng.gen_bool(0.5) { (x, y) } else { (y, x) };
            (label, a, b, None)
        };

        let rel = label.relation();
        let (rel, src, dst) = if self.rng.gen_bool(0.5) { (rel, a, b) } else { (rel.invert(), b, a) };
        ids.link += 1;
        let signal_attr = signal.map(|s| format!(r#" signalID="{s}""#)).unwrap_or_default();
        let _ = writeln!(
            links,
            r#"<TLINK id="l{}" eventID="{src}" relatedToEvent="{dst}" relType="{rel}"{signal_attr} />"#,
            ids.link
        );
    }

    fn document(&mut self, index: usize) -> SynthDoc {
        let name = format!("synth_{index:04}");
        let mut ids = Ids {
            event: 0,
            signal: 0,
            link: 0,
        };
        let mut text = String::new();
        let mut links = String::new();
        for _ in 0..self.spec.links_per_doc {
            self.link(&mut ids, &mut text, &mut links);
        }
        // One event-time link per document; not part of the event-event data.
        if ids.event > 0 {
            let _ = writeln!(
                text,
                r#"It happened on <TIMEX3 id="t1" type="DATE" value="2001-0{}-1{}">a weekday</TIMEX3> ."#,
                1 + index % 9,
                index % 10
            );
            ids.link += 1;
            let _ = writeln!(
                links,
                r#"<TLINK id="l{}" eventID="e1" relatedToTime="t1" relType="IS_INCLUDED" />"#,
                ids.link
            );
        }
        let xml = format!("<TimeML>\n<DOCID>{name}</DOCID>\n<TEXT>\n{text}</TEXT>\n{links}</TimeML>\n");
        SynthDoc {
            name: format!("{name}.tml"),
            xml,
        }
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Generate the corpus described by `spec`. A pure function of `spec`.
pub fn generate(spec: &SynthSpec) -> Result<Vec<SynthDoc>, SynthError> {
    spec.validate()?;
    let weights: Vec<f64> = spec.class_distribution.iter().map(|(_, w)| *w).collect();
    let classes = WeightedIndex::new(weights).map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
    let mut gen = Gen {
        spec,
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
        classes,
    };
    Ok((0..spec.n_docs).map(|i| gen.document(i)).collect())
}

/// Generate and write `.tml` files into `dir`, creating it if needed.
pub fn write_corpus(spec: &SynthSpec, dir: &Path) -> Result<Vec<PathBuf>, SynthError> {
    let docs = generate(spec)?;
    fs::create_dir_all(dir)?;
    docs.iter()
        .map(|d| {
            let path = dir.join(&d.name);
            fs::write(&path, &d.xml)?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::build_dataset;
    use crate::timeml::{parse_document, Dialect, Document};

    fn parse_all(docs: &[SynthDoc]) -> Vec<Document> {
        docs.iter().map(|d| parse_document(&d.xml, Dialect::Inline).unwrap()).collect()
    }

    #[test]
    fn deterministic() {
        let spec = SynthSpec {
            n_docs: 5,
            ..Default::default()
        };
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        let other = SynthSpec { seed: 2, ..spec.clone() };
        assert_ne!(generate(&spec).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn parses_cleanly() {
        let docs = generate(&SynthSpec {
            n_docs: 20,
            ..Default::default()
        })
        .unwrap();
        let parsed = parse_all(&docs);
        assert!(parsed.iter().all(|d| d.tlinks().len() == 11 && d.timexes().len() == 1));
        let data = build_dataset(&parsed).unwrap();
        assert_eq!(data.len(), 200);
    }

    #[test]
    fn signalled_fraction_within_three_sigma() {
        // 1000 links, p = 0.5: sigma = sqrt(1000 * 0.25) ≈ 15.81, 3 sigma ≈ 47.4
        let spec = SynthSpec {
            n_docs: 100,
            links_per_doc: 10,
            seed: 9,
            ..Default::default()
        };
        let data = build_dataset(&parse_all(&generate(&spec).unwrap())).unwrap();
        assert_eq!(data.len(), 1000);
        let signalled = data.iter().filter(|i| i.has_signal()).count() as f64;
        assert!((signalled - 500.0).abs() <= 47.4, "{signalled}");
    }

    #[test]
    fn zero_noise_follows_lexicon() {
        let spec = SynthSpec {
            n_docs: 30,
            noise: 0.0,
            ..Default::default()
        };
        let data = build_dataset(&parse_all(&generate(&spec).unwrap())).unwrap();
        let mut seen = 0;
        for inst in data.iter().filter(|i| i.has_signal()) {
            let phrase = &inst.signal.as_ref().unwrap().phrase;
            let expected = spec.signal_lexicon.iter().find(|(p, _)| p == phrase).unwrap().1;
            assert_eq!(inst.label, expected, "{phrase}");
            seen += 1;
        }
        assert!(seen > 100);
    }

    #[test]
    fn invalid_specs() {
        let bad = [
            SynthSpec { signal_fraction: 1.5, ..Default::default() },
            SynthSpec { noise: -0.1, ..Default::default() },
            SynthSpec { class_distribution: vec![(FoldedClass::Before, 0.5)], ..Default::default() },
            SynthSpec { signal_lexicon: vec![], ..Default::default() },
        ];
        for spec in bad {
            assert!(matches!(generate(&spec), Err(SynthError::InvalidSpec(_))));
        }
    }

    #[test]
    fn writes_files() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SynthSpec { n_docs: 3, ..Default::default() };
        let paths = write_corpus(&spec, dir.path()).unwrap();
        assert_eq!(paths.len(), 3);
        assert!(paths[0].ends_with("synth_0000.tml"));
    }
}
