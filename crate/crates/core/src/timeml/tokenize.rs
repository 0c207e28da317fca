use serde::Serialize;

/// One token of document text.
///
/// `char_span` holds byte offsets into the text the tokenizer was given; for
/// parsed documents that is [`Document::text`](super::Document::text).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Token {
    pub text: String,
    pub index: usize,
    pub sentence_index: usize,
    pub char_span: (usize, usize),
}

const PUNCT: &[char] = &['.', ',', ';', ':', '!', '?', '"', '(', ')'];
const SENTENCE_END: &[&str] = &[".", "!", "?"];

/// Split `raw` into tokens and assign sentence indices.
pub fn tokenize(raw: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    split_segment(raw, 0, &mut tokens);
    assign_sentences(&mut tokens);
    tokens
}

/// Append the tokens of `segment` to `out`, offsetting spans by `base`.
///
/// Only `text` and `char_span` are meaningful afterwards; `index` is set to the
/// position in `out` and sentences are assigned separately.
pub(crate) fn split_segment(segment: &str, base: usize, out: &mut Vec<Token>) {
    let mut word_start: Option<usize> = None;
    for (i, c) in segment.char_indices() {
        if c.is_whitespace() || PUNCT.contains(&c) {
            if let Some(s) = word_start.take() {
                push_word(segment, s, i, base, out);
            }
            if !c.is_whitespace() {
                push(out, &segment[i..i + c.len_utf8()], base + i);
            }
        } else if word_start.is_none() {
            word_start = Some(i);
        }
    }
    if let Some(s) = word_start {
        push_word(segment, s, segment.len(), base, out);
    }
}

fn push_word(segment: &str, start: usize, end: usize, base: usize, out: &mut Vec<Token>) {
    let word = &segment[start..end];
    if word.len() > 2 && (word.ends_with("'s") || word.ends_with("'S")) {
        let cut = word.len() - 2;
        push(out, &word[..cut], base + start);
        push(out, &word[cut..], base + start + cut);
    } else {
        push(out, word, base + start);
    }
}

fn push(out: &mut Vec<Token>, text: &str, offset: usize) {
    out.push(Token {
        text: text.to_string(),
        index: out.len(),
        sentence_index: 0,
        char_span: (offset, offset + text.len()),
    });
}

/// A sentence ends after `.`, `!` or `?` unless the next token starts with a
/// lowercase letter.
pub(crate) fn assign_sentences(tokens: &mut [Token]) {
    let mut sentence = 0;
    for i in 0..tokens.len() {
        tokens[i].sentence_index = sentence;
        if SENTENCE_END.contains(&tokens[i].text.as_str()) {
            let continues = tokens
                .get(i + 1)
                .and_then(|t| t.text.chars().next())
                .is_some_and(char::is_lowercase);
            if !continues {
                sentence += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(toks: &[Token]) -> Vec<&str> {
        toks.iter().map(|t| t.text.as_str()).collect()
    }

    #[test]
    fn example_sentence() {
        let toks = tokenize("John smiled after he ate.");
        assert_eq!(texts(&toks), ["John", "smiled", "after", "he", "ate", "."]);
        assert!(toks.iter().all(|t| t.sentence_index == 0));
    }

    #[test]
    fn empty_input() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("  \n\t ").is_empty());
    }

    #[test]
    fn clitic() {
        assert_eq!(texts(&tokenize("IBM's profit")), ["IBM", "'s", "profit"]);
        assert_eq!(texts(&tokenize("'s")), ["'s"]);
        assert_eq!(texts(&tokenize("IBM's.")), ["IBM", "'s", "."]);
    }

    #[test]
    fn punctuation_splits() {
        let toks = tokenize("(Yes,\"no\"): fine; ok!");
        assert_eq!(
            texts(&toks),
            ["(", "Yes", ",", "\"", "no", "\"", ")", ":", "fine", ";", "ok", "!"]
        );
    }

    #[test]
    fn sentence_boundaries() {
        let toks = tokenize("He left. She stayed! it was e.g. late? Yes");
        let sent: Vec<_> = toks.iter().map(|t| t.sentence_index).collect();
        // He left . | She stayed ! it was e . g . late ? | Yes
        assert_eq!(sent, [0, 0, 0, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 2]);
    }

    #[test]
    fn spans_slice_source() {
        let src = "Prices rose 3.5% in Smith's shop.";
        let toks = tokenize(src);
        for (i, t) in toks.iter().enumerate() {
            assert_eq!(t.index, i);
            assert_eq!(&src[t.char_span.0..t.char_span.1], t.text);
        }
        for w in toks.windows(2) {
            assert!(w[0].char_span.1 <= w[1].char_span.0);
        }
    }
}
