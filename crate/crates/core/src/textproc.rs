//! Tokenization and n-gram extraction shared by every metric.
//!
//! Three granularities are supported: words (mteval-13a-style punctuation
//! splitting after NFC normalization), characters (whitespace removed), and
//! subwords (greedy longest match against a piece vocabulary with a `▁`
//! word-boundary marker).

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// Word-boundary marker prefixed to the first piece of every word.
pub const WORD_MARKER: char = '▁';

pub const DEFAULT_UNK: &str = "<unk>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Word,
    Char,
    Subword,
}

/// Tokenized text. Never contains empty tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    tokens: Vec<String>,
    granularity: Granularity,
}

impl TokenSequence {
    /// Builds a sequence from arbitrary tokens, dropping empty strings.
    pub fn new<I, S>(tokens: I, granularity: Granularity) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tokens = tokens
            .into_iter()
            .map(Into::into)
            .filter(|t: &String| !t.is_empty())
            .collect();
        TokenSequence {
            tokens,
            granularity,
        }
    }

    /// Word-level sequence from text that is already tokenized (split on whitespace only).
    pub fn pretokenized(text: &str) -> Self {
        TokenSequence::new(text.split_whitespace(), Granularity::Word)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }
}

impl AsRef<[String]> for TokenSequence {
    fn as_ref(&self) -> &[String] {
        &self.tokens
    }
}

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(c,
            '\u{00A1}'..='\u{00BF}'
            | '\u{2010}'..='\u{2027}'
            | '\u{2030}'..='\u{205E}'
            | '\u{3001}'..='\u{3003}'
            | '\u{3008}'..='\u{3011}'
            | '\u{3014}'..='\u{301F}'
            | '\u{FF01}'..='\u{FF0F}'
            | '\u{FF1A}'..='\u{FF20}'
            | '\u{FF3B}'..='\u{FF40}'
            | '\u{FF5B}'..='\u{FF65}')
}

/// Splits on whitespace after NFC normalization, then peels leading and
/// trailing punctuation characters off each chunk as standalone tokens.
/// Word-internal punctuation (`don't`, `3.5`) is kept.
pub fn tokenize_words(text: &str) -> TokenSequence {
    let normalized: String = text.nfc().collect();
    let mut out = Vec::new();
    for chunk in normalized.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let lead = chars.iter().take_while(|c| is_punct(**c)).count();
        if lead == chars.len() {
            out.extend(chars.iter().map(|c| c.to_string()));
            continue;
        }
        let trail = chars.iter().rev().take_while(|c| is_punct(**c)).count();
        out.extend(chars[..lead].iter().map(|c| c.to_string()));
        out.push(chars[lead..chars.len() - trail].iter().collect());
        out.extend(chars[chars.len() - trail..].iter().map(|c| c.to_string()));
    }
    TokenSequence::new(out, Granularity::Word)
}

/// One token per Unicode scalar value, whitespace removed.
pub fn tokenize_chars(text: &str) -> TokenSequence {
    TokenSequence::new(
        text.chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| c.to_string()),
        Granularity::Char,
    )
}

/// Piece inventory for the greedy subword tokenizer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubwordVocab {
    entries: HashSet<String>,
    unk_piece: String,
    max_piece_chars: usize,
}

impl SubwordVocab {
    pub fn new<I, S>(entries: I, unk_piece: impl Into<String>) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let entries: HashSet<String> = entries
            .into_iter()
            .map(Into::into)
            .filter(|e: &String| !e.is_empty())
            .collect();
        if entries.is_empty() {
            return Err(Error::invalid("subword vocabulary has no entries"));
        }
        let unk_piece = unk_piece.into();
        if unk_piece.is_empty() {
            return Err(Error::invalid("unk piece must not be empty"));
        }
        let max_piece_chars = entries.iter().map(|e| e.chars().count()).max().unwrap_or(1);
        Ok(SubwordVocab {
            entries,
            unk_piece,
            max_piece_chars,
        })
    }

    /// Parses the vocabulary file format: one piece per line, with an
    /// optional `#unk=<piece>` header on the first line. Blank lines are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut unk = DEFAULT_UNK.to_string();
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if i == 0 {
                if let Some(piece) = line.strip_prefix("#unk=") {
                    unk = piece.to_string();
                    continue;
                }
            }
            if !line.trim().is_empty() {
                entries.push(line.to_string());
            }
        }
        SubwordVocab::new(entries, unk)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SubwordVocab::parse(&text)
    }

    pub fn contains(&self, piece: &str) -> bool {
        self.entries.contains(piece)
    }

    pub fn unk_piece(&self) -> &str {
        &self.unk_piece
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Greedy longest-match segmentation.
///
/// At the start of each word the marked form (`▁` + prefix) is tried first,
/// longest prefix wins. If no marked piece matches, a bare `▁` piece is
/// emitted when the vocabulary has one; otherwise the marker is dropped.
/// The remainder of the word is matched against unmarked pieces, and any
/// character with no matching piece becomes `unk_piece`.
pub fn tokenize_subwords(text: &str, vocab: &SubwordVocab) -> TokenSequence {
    let marker = WORD_MARKER.to_string();
    let mut out = Vec::new();
    let mut buf = String::new();
    for word in text.split_whitespace() {
        let chars: Vec<char> = word.chars().collect();
        let mut pos = 0;
        let mut at_start = true;
        while pos < chars.len() {
            let longest = (chars.len() - pos).min(vocab.max_piece_chars);
            if at_start {
                at_start = false;
                let marked = (1..=longest.min(vocab.max_piece_chars.saturating_sub(1)))
                    .rev()
                    .find_map(|len| {
                        buf.clear();
                        buf.push(WORD_MARKER);
                        buf.extend(&chars[pos..pos + len]);
                        vocab.contains(&buf).then(|| (buf.clone(), len))
                    });
                if let Some((piece, len)) = marked {
                    out.push(piece);
                    pos += len;
                    continue;
                }
                if vocab.contains(&marker) {
                    out.push(marker.clone());
                }
            }
            let unmarked = (1..=longest).rev().find_map(|len| {
                buf.clear();
                buf.extend(&chars[pos..pos + len]);
                vocab.contains(&buf).then(|| (buf.clone(), len))
            });
            match unmarked {
                Some((piece, len)) => {
                    out.push(piece);
                    pos += len;
                }
                None => {
                    out.push(vocab.unk_piece.clone());
                    pos += 1;
                }
            }
        }
    }
    TokenSequence::new(out, Granularity::Subword)
}

/// Multiset of n-grams of a single order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NgramCounts {
    order: usize,
    counts: HashMap<Vec<String>, usize>,
}

impl NgramCounts {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, ngram: &[String]) -> usize {
        self.counts.get(ngram).copied().unwrap_or(0)
    }

    /// Number of n-gram occurrences.
    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    /// Number of distinct n-grams.
    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[String], usize)> {
        self.counts.iter().map(|(k, v)| (k.as_slice(), *v))
    }
}

pub fn extract_ngrams(seq: &TokenSequence, n: usize) -> Result<NgramCounts> {
    if n == 0 {
        return Err(Error::invalid("n-gram order must be at least 1"));
    }
    let counts = count_ngrams(seq.tokens(), n)
        .into_iter()
        .map(|(k, v)| (k.to_vec(), v))
        .collect();
    Ok(NgramCounts { order: n, counts })
}

/// Borrowing n-gram counter used on metric hot paths. `n` must be ≥ 1.
pub(crate) fn count_ngrams(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for w in tokens.windows(n) {
        *counts.entry(w).or_insert(0) += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(seq: &TokenSequence) -> Vec<&str> {
        seq.iter().collect()
    }

    #[test]
    fn words_split_edge_punctuation() {
        assert_eq!(
            toks(&tokenize_words("Hello, world!")),
            ["Hello", ",", "world", "!"]
        );
        assert_eq!(toks(&tokenize_words("a b")), ["a", "b"]);
        assert!(tokenize_words("").is_empty());
        assert_eq!(
            toks(&tokenize_words("(don't) stop... 3.5")),
            ["(", "don't", ")", "stop", ".", ".", ".", "3.5"]
        );
        assert_eq!(toks(&tokenize_words("你好，世界。")), ["你好，世界", "。"]);
    }

    #[test]
    fn words_apply_nfc() {
        // e + combining acute composes to é
        let seq = tokenize_words("cafe\u{0301}");
        assert_eq!(toks(&seq), ["caf\u{00e9}"]);
    }

    #[test]
    fn case_is_preserved() {
        assert_eq!(toks(&tokenize_words("The CAT")), ["The", "CAT"]);
    }

    #[test]
    fn chars_drop_whitespace() {
        assert_eq!(toks(&tokenize_chars("ab c")), ["a", "b", "c"]);
        assert_eq!(toks(&tokenize_chars("猫")), ["猫"]);
        assert_eq!(toks(&tokenize_chars("a  b")), ["a", "b"]);
        assert_eq!(toks(&tokenize_chars("a\u{3000}\tb\n")), ["a", "b"]);
    }

    #[test]
    fn subwords_longest_marked_match() {
        let vocab = SubwordVocab::new(["un", "happy", "▁un", "▁happy", "▁unhappy"], "<unk>").unwrap();
        assert_eq!(toks(&tokenize_subwords("unhappy", &vocab)), ["▁unhappy"]);
        assert_eq!(
            toks(&tokenize_subwords("unhappy happy", &vocab)),
            ["▁unhappy", "▁happy"]
        );
    }

    #[test]
    fn subwords_drop_marker_without_marked_pieces() {
        let vocab = SubwordVocab::new(["a", "b"], "<unk>").unwrap();
        assert_eq!(toks(&tokenize_subwords("ab", &vocab)), ["a", "b"]);
        assert!(tokenize_subwords("", &vocab).is_empty());
    }

    #[test]
    fn subwords_bare_marker_and_unk() {
        let vocab = SubwordVocab::new(["▁", "ab"], "<unk>").unwrap();
        assert_eq!(toks(&tokenize_subwords("abz", &vocab)), ["▁", "ab", "<unk>"]);
    }

    #[test]
    fn vocab_file_header() {
        let vocab = SubwordVocab::parse("#unk=<?>\n▁a\nb\n\n").unwrap();
        assert_eq!(vocab.unk_piece(), "<?>");
        assert_eq!(vocab.len(), 2);
        assert!(SubwordVocab::parse("#unk=x\n").is_err());
        let plain = SubwordVocab::parse("a\n").unwrap();
        assert_eq!(plain.unk_piece(), DEFAULT_UNK);
    }

    #[test]
    fn ngram_examples() {
        let seq = TokenSequence::new(["a", "b", "a"], Granularity::Word);
        let uni = extract_ngrams(&seq, 1).unwrap();
        assert_eq!(uni.get(&["a".into()]), 2);
        assert_eq!(uni.get(&["b".into()]), 1);
        assert_eq!(uni.distinct(), 2);
        let bi = extract_ngrams(&seq, 2).unwrap();
        assert_eq!(bi.get(&["a".into(), "b".into()]), 1);
        assert_eq!(bi.get(&["b".into(), "a".into()]), 1);
        assert_eq!(bi.total(), 2);
        let short = TokenSequence::new(["a"], Granularity::Word);
        assert!(extract_ngrams(&short, 2).unwrap().is_empty());
        assert!(matches!(extract_ngrams(&seq, 0), Err(Error::InvalidArgument(_))));
    }

    proptest! {
        #[test]
        fn ngram_total_matches_length(tokens in prop::collection::vec("[a-e]", 0..15), n in 1usize..6) {
            let seq = TokenSequence::new(tokens, Granularity::Word);
            let counts = extract_ngrams(&seq, n).unwrap();
            prop_assert_eq!(counts.total(), (seq.len() + 1).saturating_sub(n));
        }

        #[test]
        fn chars_never_whitespace(text in "\\PC{0,40}") {
            let seq = tokenize_chars(&text);
            prop_assert!(seq.iter().all(|t| !t.chars().any(char::is_whitespace)));
            prop_assert!(seq.iter().all(|t| !t.is_empty()));
        }

        #[test]
        fn words_never_empty_or_whitespace(text in "\\PC{0,40}") {
            let seq = tokenize_words(&text);
            prop_assert!(seq.iter().all(|t| !t.is_empty() && !t.chars().any(char::is_whitespace)));
            prop_assert_eq!(seq, tokenize_words(&text));
        }

        #[test]
        fn subwords_reassemble_input(text in "[abc ]{0,30}") {
            let vocab = SubwordVocab::new(["a", "b", "c", "▁a", "ab", "▁bc", "cab"], "<unk>").unwrap();
            let seq = tokenize_subwords(&text, &vocab);
            let joined: String = seq.iter().collect::<String>().replace(WORD_MARKER, "");
            let expected: String = text.split_whitespace().collect();
            prop_assert_eq!(joined, expected);
            prop_assert_eq!(seq, tokenize_subwords(&text, &vocab));
        }
    }
}
