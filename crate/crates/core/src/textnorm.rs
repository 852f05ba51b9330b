//! Text cleaning, sentence segmentation, lemmatization and syllable counting.

use std::collections::HashMap;
use std::fs;
use std::ops::Range;
use std::path::Path;
use std::sync::OnceLock;

use crate::postag::{LexiconError, PosTag, UnknownTag};

const EXCEPTIONS: &str = include_str!("../data/lemma_exceptions.tsv");

/// Token stream of one document with sentence boundaries.
///
/// `sentences` holds half-open token index ranges that are disjoint, ordered
/// and together cover every token.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenizedDocument {
    pub doc_id: String,
    pub sentences: Vec<Range<usize>>,
    pub tokens: Vec<String>,
    pub lemmas: Vec<String>,
    /// Letters and digits across all tokens.
    pub char_count: usize,
    pub syllable_count: usize,
}

impl TokenizedDocument {
    pub fn word_count(&self) -> usize {
        self.tokens.len()
    }

    pub fn sentence_count(&self) -> usize {
        self.sentences.len()
    }

    /// Fills `lemmas` from one tag per token.
    pub fn lemmatize_with(&mut self, tags: &[PosTag], lemmatizer: &Lemmatizer) {
        assert_eq!(tags.len(), self.tokens.len());
        self.lemmas = self
            .tokens
            .iter()
            .zip(tags)
            .map(|(tok, &tag)| lemmatizer.lemmatize(tok, tag))
            .collect();
    }
}

fn is_sentence_end(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

/// Strips markup tags, digits and every character other than ASCII letters,
/// apostrophes, `.`, `!`, `?` and whitespace, then collapses whitespace.
///
/// Removed characters become spaces, so `well-known` turns into two words.
pub fn clean(raw_text: &str) -> String {
    let chars: Vec<char> = raw_text.chars().collect();
    let mut out = String::with_capacity(raw_text.len());
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '<' {
            if let Some(close) = chars[i + 1..].iter().position(|&d| d == '>') {
                out.push(' ');
                i += close + 2;
                continue;
            }
        }
        let mapped = match c {
            '\u{2018}' | '\u{2019}' | '\u{02bc}' => '\'',
            c if c.is_ascii_alphabetic() || c == '\'' || is_sentence_end(c) => c,
            _ => ' ',
        };
        out.push(mapped);
        i += 1;
    }
    out.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Splits cleaned text into lowercase tokens and sentences.
///
/// Every `.`, `!` or `?` closes a sentence; sentences without tokens are
/// dropped. Leading and trailing apostrophes are trimmed from tokens.
pub fn segment(cleaned: &str) -> TokenizedDocument {
    let mut doc = TokenizedDocument::default();
    let mut sentence_start = 0;
    let mut word = String::new();

    let flush_word = |word: &mut String, doc: &mut TokenizedDocument| {
        let trimmed = word.trim_matches('\'');
        if !trimmed.is_empty() {
            let token = trimmed.to_ascii_lowercase();
            doc.char_count += token.chars().filter(|c| c.is_ascii_alphanumeric()).count();
            doc.syllable_count += count_syllables(&token);
            doc.tokens.push(token);
        }
        word.clear();
    };

    for c in cleaned.chars() {
        if c.is_ascii_alphabetic() || c == '\'' {
            word.push(c);
            continue;
        }
        flush_word(&mut word, &mut doc);
        if is_sentence_end(c) && doc.tokens.len() > sentence_start {
            doc.sentences.push(sentence_start..doc.tokens.len());
            sentence_start = doc.tokens.len();
        }
    }
    flush_word(&mut word, &mut doc);
    if doc.tokens.len() > sentence_start {
        doc.sentences.push(sentence_start..doc.tokens.len());
    }
    doc
}

fn is_vowel(c: u8) -> bool {
    matches!(c, b'a' | b'e' | b'i' | b'o' | b'u')
}

fn is_vowel_y(c: u8) -> bool {
    is_vowel(c) || c == b'y'
}

fn is_consonant(c: u8) -> bool {
    c.is_ascii_lowercase() && !is_vowel(c)
}

/// Vowel-group syllable estimate, at least 1.
///
/// A final `e` after a consonant is treated as silent (unless it closes a
/// consonant + `le` ending, as in "table") when more than one group exists.
pub fn count_syllables(word: &str) -> usize {
    let b = word.as_bytes();
    let mut groups = 0;
    let mut prev_vowel = false;
    for &c in b {
        let v = is_vowel_y(c);
        if v && !prev_vowel {
            groups += 1;
        }
        prev_vowel = v;
    }
    let n = b.len();
    if groups > 1 && n >= 2 && b[n - 1] == b'e' && is_consonant(b[n - 2]) {
        let consonant_le = b[n - 2] == b'l' && n >= 3 && is_consonant(b[n - 3]);
        if !consonant_le {
            groups -= 1;
        }
    }
    groups.max(1)
}

/// Rule-based lemmatizer with an exception table for irregular forms.
#[derive(Debug, Clone, Default)]
pub struct Lemmatizer {
    exceptions: HashMap<(String, PosTag), String>,
}

impl Lemmatizer {
    /// Parses `inflected<TAB>lemma<TAB>tag` lines; `#` starts a comment line.
    pub fn from_table(text: &str) -> Result<Self, LexiconError> {
        let mut exceptions = HashMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |message: String| LexiconError::Parse {
                source_name: "lemma exceptions".into(),
                line: idx + 1,
                message,
            };
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            let [form, lemma, tag] = fields[..] else {
                return Err(parse_err("expected `inflected<TAB>lemma<TAB>tag`".into()));
            };
            if form.is_empty() || lemma.is_empty() {
                return Err(parse_err("empty form or lemma".into()));
            }
            let tag: PosTag = tag.parse().map_err(|e: UnknownTag| parse_err(e.to_string()))?;
            exceptions.insert((form.to_string(), tag), lemma.to_string());
        }
        Ok(Lemmatizer { exceptions })
    }

    pub fn from_file(path: &Path) -> Result<Self, LexiconError> {
        let text = fs::read_to_string(path).map_err(|source| LexiconError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_table(&text)
    }

    pub fn builtin() -> &'static Lemmatizer {
        static BUILTIN: OnceLock<Lemmatizer> = OnceLock::new();
        BUILTIN.get_or_init(|| Lemmatizer::from_table(EXCEPTIONS).expect("bundled table is well formed"))
    }

    pub fn len(&self) -> usize {
        self.exceptions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exceptions.is_empty()
    }

    pub fn lemmatize(&self, token: &str, tag: PosTag) -> String {
        if !matches!(tag, PosTag::Noun | PosTag::Verb) {
            return token.to_string();
        }
        if let Some(lemma) = self.exceptions.get(&(token.to_string(), tag)) {
            return lemma.clone();
        }
        let lemma = match tag {
            PosTag::Noun => noun_lemma(token),
            _ => verb_lemma(token),
        };
        if lemma.is_empty() {
            token.to_string()
        } else {
            lemma
        }
    }
}

/// Lemmatizes with the bundled exception table.
pub fn lemmatize(token: &str, tag: PosTag) -> String {
    Lemmatizer::builtin().lemmatize(token, tag)
}

fn strip<'a>(word: &'a str, suffix: &str) -> &'a str {
    &word[..word.len() - suffix.len()]
}

fn noun_lemma(w: &str) -> String {
    if w.len() <= 3 || w.contains('\'') {
        return w.to_string();
    }
    if w.ends_with("ies") && w.len() > 4 {
        return format!("{}y", strip(w, "ies"));
    }
    if w.ends_with("sses") || w.ends_with("xes") || w.ends_with("ches") || w.ends_with("shes") {
        return strip(w, "es").to_string();
    }
    if let Some(stem) = w.strip_suffix("ses") {
        // bus-es, bonus-es, but house-s, cause-s, case-s, purpose-s
        let b = stem.as_bytes();
        let latin_us = b.last() == Some(&b'u') && !matches!(b.iter().rev().nth(1), Some(b'o' | b'a'));
        return if latin_us {
            strip(w, "es").to_string()
        } else {
            strip(w, "s").to_string()
        };
    }
    if w.ends_with('s') && !(w.ends_with("ss") || w.ends_with("us") || w.ends_with("is")) {
        return strip(w, "s").to_string();
    }
    w.to_string()
}

fn verb_lemma(w: &str) -> String {
    if w.len() <= 3 || w.contains('\'') {
        return w.to_string();
    }
    if w.len() > 4 && (w.ends_with("ies") || w.ends_with("ied")) {
        return format!("{}y", &w[..w.len() - 3]);
    }
    if let Some(stem) = w.strip_suffix("ing") {
        if has_vowel(stem) {
            return restore_stem(stem);
        }
        return w.to_string();
    }
    if w.ends_with("eed") {
        return strip(w, "d").to_string();
    }
    if let Some(stem) = w.strip_suffix("ed") {
        if has_vowel(stem) {
            return restore_stem(stem);
        }
        return w.to_string();
    }
    if ["sses", "zzes", "xes", "ches", "shes", "oes"].iter().any(|s| w.ends_with(s)) {
        return strip(w, "es").to_string();
    }
    if w.ends_with('s') && !(w.ends_with("ss") || w.ends_with("us") || w.ends_with("is")) {
        return strip(w, "s").to_string();
    }
    w.to_string()
}

fn has_vowel(s: &str) -> bool {
    s.bytes().any(is_vowel_y)
}

fn vowel_groups(s: &[u8]) -> usize {
    let mut groups = 0;
    let mut prev = false;
    for &c in s {
        let v = is_vowel(c);
        if v && !prev {
            groups += 1;
        }
        prev = v;
    }
    groups
}

/// Undoes consonant doubling or restores a dropped silent `e` on a stem left
/// by removing `-ing` / `-ed`.
fn restore_stem(stem: &str) -> String {
    let b = stem.as_bytes();
    let n = b.len();
    if n >= 2 && b[n - 1] == b[n - 2] && is_consonant(b[n - 1]) {
        return if matches!(b[n - 1], b'l' | b's' | b'z' | b'f') {
            stem.to_string()
        } else {
            stem[..n - 1].to_string()
        };
    }
    if needs_silent_e(b) {
        format!("{stem}e")
    } else {
        stem.to_string()
    }
}

fn needs_silent_e(b: &[u8]) -> bool {
    let n = b.len();
    if n <= 2 {
        return true;
    }
    let last = b[n - 1];
    let prev = b[n - 2];
    let ends = |s: &str| b.ends_with(s.as_bytes());
    match last {
        b'v' | b'c' | b'u' | b'z' => return true,
        b's' => return true,
        b'g' if matches!(prev, b'r' | b'd') || ends("ang") || ends("eng") => return true,
        b'l' if is_consonant(prev) => return !matches!(prev, b'l' | b'r' | b'w'),
        _ => {}
    }
    if ends("iat") || ends("uat") {
        return true;
    }
    let cvc = is_consonant(b[n - 3]) && is_vowel(prev) && is_consonant(last) && !matches!(last, b'w' | b'x' | b'y');
    if !cvc {
        return false;
    }
    if vowel_groups(b) == 1 {
        return true;
    }
    matches!(
        &b[n - 2..],
        b"at"
            | b"ut"
            | b"ir"
            | b"ur"
            | b"ar"
            | b"id"
            | b"ud"
            | b"ib"
            | b"ok"
            | b"ap"
            | b"ot"
            | b"in"
            | b"ag"
            | b"um"
            | b"ak"
            | b"om"
            | b"ad"
    )
}
