//! Corpus tables: how often each signal phrase is annotated as a SIGNAL, and
//! TLINK/SIGNAL counts per sub-corpus.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::Serialize;

use crate::timeml::Document;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhraseStat {
    pub phrase: String,
    /// Case-insensitive token-sequence matches over all document tokens.
    pub corpus_freq: usize,
    /// SIGNAL tags whose normalized text is this phrase.
    pub signal_freq: usize,
    pub likelihood: f64,
}

pub fn signal_phrase_stats(docs: &[Document], min_freq: usize) -> Vec<PhraseStat> {
    let mut signal_freq: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in docs {
        for s in doc.signals() {
            *signal_freq.entry(s.phrase.as_str()).or_default() += 1;
        }
    }
    let phrases: Vec<(&str, Vec<&str>)> = signal_freq
        .keys()
        .map(|p| (*p, p.split(' ').collect::<Vec<_>>()))
        .filter(|(_, words)| !words.is_empty())
        .collect();
    let mut by_first: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, (_, words)) in phrases.iter().enumerate() {
        by_first.entry(words[0]).or_default().push(i);
    }

    let mut corpus_freq = vec![0usize; phrases.len()];
    for doc in docs {
        let lower: Vec<String> = doc.tokens().iter().map(|t| t.text.to_lowercase()).collect();
        for start in 0..lower.len() {
            let Some(cands) = by_first.get(lower[start].as_str()) else {
                continue;
            };
            for &c in cands {
                let words = &phrases[c].1;
                let end = start + words.len();
                if end <= lower.len() && lower[start..end].iter().zip(words).all(|(t, w)| t == w) {
                    corpus_freq[c] += 1;
                }
            }
        }
    }

    let mut rows: Vec<PhraseStat> = phrases
        .iter()
        .zip(corpus_freq)
        .filter(|(_, cf)| *cf >= min_freq)
        .map(|((phrase, _), cf)| {
            let sf = signal_freq[phrase];
            PhraseStat {
                phrase: phrase.to_string(),
                corpus_freq: cf,
                signal_freq: sf,
                likelihood: if cf == 0 { 0.0 } else { sf as f64 / cf as f64 },
            }
        })
        .collect();
    rows.sort_by(|a, b| b.likelihood.total_cmp(&a.likelihood).then_with(|| a.phrase.cmp(&b.phrase)));
    rows
}

pub fn phrase_stats_tsv(rows: &[PhraseStat]) -> String {
    let mut s = String::from("phrase\tcorpus_freq\tsignal_freq\tlikelihood_pct\n");
    for r in rows {
        let _ = writeln!(s, "{}\t{}\t{}\t{:.0}", r.phrase, r.corpus_freq, r.signal_freq, 100.0 * r.likelihood);
    }
    s
}

pub fn phrase_stats_text(rows: &[PhraseStat]) -> String {
    let width = rows.iter().map(|r| r.phrase.len()).max().unwrap_or(0).max("Phrase".len());
    let mut s = format!("{:<width$} {:>10} {:>10} {:>10}\n", "Phrase", "Corpus", "Signal", "Likelihood");
    for r in rows {
        let _ = writeln!(
            s,
            "{:<width$} {:>10} {:>10} {:>9.0}%",
            r.phrase,
            r.corpus_freq,
            r.signal_freq,
            100.0 * r.likelihood
        );
    }
    s
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LinkCounts {
    pub corpus: String,
    pub total_tlinks: usize,
    pub with_signal: usize,
    pub without_signal: usize,
    pub event_event_total: usize,
    pub event_event_with_signal: usize,
}

impl LinkCounts {
    fn add(&mut self, other: &LinkCounts) {
        self.total_tlinks += other.total_tlinks;
        self.with_signal += other.with_signal;
        self.without_signal += other.without_signal;
        self.event_event_total += other.event_event_total;
        self.event_event_with_signal += other.event_event_with_signal;
    }
}

/// Counts for one group of documents. Links whose arguments do not resolve
/// are counted in the totals but not as event-event links.
pub fn count_links(corpus: &str, docs: &[Document]) -> LinkCounts {
    let mut c = LinkCounts {
        corpus: corpus.to_string(),
        ..Default::default()
    };
    for doc in docs {
        for link in doc.tlinks() {
            let signalled = link.signal.is_some();
            c.total_tlinks += 1;
            if signalled {
                c.with_signal += 1;
            } else {
                c.without_signal += 1;
            }
            if doc.resolve_tlink(link).is_ok_and(|r| r.is_event_event) {
                c.event_event_total += 1;
                c.event_event_with_signal += usize::from(signalled);
            }
        }
    }
    c
}

/// One row per group followed by a `combined` row summing them.
pub fn tlink_counts(groups: &[(String, Vec<Document>)]) -> Vec<LinkCounts> {
    let mut rows: Vec<LinkCounts> = groups.iter().map(|(name, docs)| count_links(name, docs)).collect();
    let mut combined = LinkCounts {
        corpus: "combined".to_string(),
        ..Default::default()
    };
    for r in &rows {
        combined.add(r);
    }
    rows.push(combined);
    rows
}

fn pct(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        100.0 * n as f64 / d as f64
    }
}

pub fn link_counts_tsv(rows: &[LinkCounts]) -> String {
    let mut s = String::from(
        "corpus\ttotal_tlinks\twith_signal\twith_signal_pct\twithout_signal\tevent_event_total\tevent_event_with_signal\n",
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{:.1}\t{}\t{}\t{}",
            r.corpus,
            r.total_tlinks,
            r.with_signal,
            pct(r.with_signal, r.total_tlinks),
            r.without_signal,
            r.event_event_total,
            r.event_event_with_signal
        );
    }
    s
}

/// Layout of the usual "TLINKs and signals" table: one line per corpus plus
/// an event-event line for the combined data.
pub fn link_counts_text(rows: &[LinkCounts]) -> String {
    let width = rows.iter().map(|r| r.corpus.len() + 12).max().unwrap_or(0).max(6);
    let mut s = format!(
        "{:<width$} {:>12} {:>18} {:>15}\n",
        "Corpus", "Total TLINKs", "With SIGNAL", "Without SIGNAL"
    );
    let mut line = |name: &str, total: usize, with: usize| {
        let _ = writeln!(
            s,
            "{:<width$} {:>12} {:>18} {:>15}",
            name,
            total,
            format!("{} ({:.1}%)", with, pct(with, total)),
            total - with
        );
    };
    for r in rows {
        line(&r.corpus, r.total_tlinks, r.with_signal);
    }
    if let Some(last) = rows.last() {
        line(
            &format!("{} event-event", last.corpus),
            last.event_event_total,
            last.event_event_with_signal,
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeml::{parse_document, Dialect};

    fn doc(xml: &str) -> Document {
        parse_document(xml, Dialect::Auto).unwrap()
    }

    #[test]
    fn single_signal() {
        let d = doc(r#"<EVENT id="e1">run</EVENT> <SIGNAL id="s1">before</SIGNAL> <EVENT id="e2">sleeping</EVENT>"#);
        let rows = signal_phrase_stats(&[d], 1);
        assert_eq!(
            rows,
            vec![PhraseStat {
                phrase: "before".into(),
                corpus_freq: 1,
                signal_freq: 1,
                likelihood: 1.0
            }]
        );
    }

    #[test]
    fn ratio_and_multiword() {
        let d = doc(
            r#"<SIGNAL id="s1">As soon as</SIGNAL> it ended, after lunch, they left <SIGNAL id="s2">after</SIGNAL> dinner.
            After that, as soon as possible, after all, <SIGNAL id="s3">after</SIGNAL> hours."#,
        );
        let rows = signal_phrase_stats(std::slice::from_ref(&d), 1);
        let after = rows.iter().find(|r| r.phrase == "after").unwrap();
        assert_eq!((after.corpus_freq, after.signal_freq, after.likelihood), (5, 2, 0.4));
        let asap = rows.iter().find(|r| r.phrase == "as soon as").unwrap();
        assert_eq!((asap.corpus_freq, asap.signal_freq), (2, 1));
        assert_eq!(rows[0].phrase, "as soon as");
        assert!(signal_phrase_stats(&[d], 3).iter().all(|r| r.phrase == "after"));
    }

    #[test]
    fn twice_of_four() {
        let d = doc(r#"<SIGNAL id="s1">until</SIGNAL> x until y <SIGNAL id="s2">until</SIGNAL> z until"#);
        let rows = signal_phrase_stats(&[d], 2);
        assert_eq!(rows[0].likelihood, 0.5);
    }

    #[test]
    fn counts_and_combined() {
        let a = doc(
            r#"<EVENT id="e1">ran</EVENT> <SIGNAL id="s1">before</SIGNAL> <EVENT id="e2">slept</EVENT> on <TIMEX3 id="t1">Monday</TIMEX3>
            <TLINK id="l1" eventID="e1" relatedToEvent="e2" relType="BEFORE" signalID="s1"/>
            <TLINK id="l2" eventID="e2" relatedToTime="t1" relType="IS_INCLUDED"/>
            <TLINK id="l3" eventID="e2" relatedToTime="t1" relType="IS_INCLUDED" signalID="s1"/>"#,
        );
        let b = doc(
            r#"<EVENT id="e1">ran</EVENT> <EVENT id="e2">slept</EVENT>
            <TLINK id="l1" eventID="e1" relatedToEvent="e2" relType="AFTER"/>"#,
        );
        let rows = tlink_counts(&[("A".into(), vec![a]), ("B".into(), vec![b])]);
        assert_eq!(rows.len(), 3);
        assert_eq!(
            (rows[0].total_tlinks, rows[0].with_signal, rows[0].event_event_total, rows[0].event_event_with_signal),
            (3, 2, 1, 1)
        );
        let c = &rows[2];
        assert_eq!(c.corpus, "combined");
        assert_eq!((c.total_tlinks, c.with_signal, c.without_signal), (4, 2, 2));
        assert_eq!((c.event_event_total, c.event_event_with_signal), (2, 1));
        assert!(link_counts_text(&rows).contains("2 (50.0%)"));
        assert!(link_counts_tsv(&rows).lines().nth(3).unwrap().starts_with("combined\t4\t2\t50.0"));
    }

    #[test]
    fn empty_corpus() {
        let rows = tlink_counts(&[]);
        assert_eq!(rows, vec![LinkCounts { corpus: "combined".into(), ..Default::default() }]);
        assert!(signal_phrase_stats(&[], 1).is_empty());
    }
}
