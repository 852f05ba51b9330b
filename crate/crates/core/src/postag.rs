//! Coarse part-of-speech tagging from a word lexicon plus ordered suffix
//! rules.
//!
//! Lookup order for a token: closed pronoun list, lexicon entry, first
//! matching suffix rule, then `NOUN`. The tagger is context free, so the
//! same token always receives the same tag.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use thiserror::Error;

const LEXICON: &str = include_str!("../data/lexicon.tsv");
const SUFFIX_RULES: &str = include_str!("../data/suffix_rules.tsv");
const PRONOUNS: &str = include_str!("../data/pronouns.txt");
const STOPWORDS: &str = include_str!("../data/stopwords.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PosTag {
    Noun,
    Verb,
    Pron,
    Adv,
    Adj,
    Other,
}

impl PosTag {
    pub const ALL: [PosTag; 6] = [
        PosTag::Noun,
        PosTag::Verb,
        PosTag::Pron,
        PosTag::Adv,
        PosTag::Adj,
        PosTag::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PosTag::Noun => "NOUN",
            PosTag::Verb => "VERB",
            PosTag::Pron => "PRON",
            PosTag::Adv => "ADV",
            PosTag::Adj => "ADJ",
            PosTag::Other => "OTHER",
        }
    }
}

impl fmt::Display for PosTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown part-of-speech tag `{0}`")]
pub struct UnknownTag(pub String);

impl FromStr for PosTag {
    type Err = UnknownTag;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PosTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| UnknownTag(s.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("{source_name} line {line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },
    #[error("pronoun `{word}` is listed in the lexicon as {tag}")]
    PronounConflict { word: String, tag: PosTag },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Anything that can assign one coarse tag per token.
pub trait Tagger {
    fn tag_tokens(&self, tokens: &[String]) -> Vec<PosTag>;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedDocument {
    pub doc_id: String,
    pub tags: Vec<PosTag>,
}

/// Word lists and rules behind the default tagger.
#[derive(Debug, Clone)]
pub struct PosLexicon {
    entries: HashMap<String, PosTag>,
    suffix_rules: Vec<(String, PosTag)>,
    pronouns: HashSet<String>,
    stopwords: HashSet<String>,
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

fn parse_pairs(text: &str, source_name: &str) -> Result<Vec<(String, PosTag)>, LexiconError> {
    content_lines(text)
        .map(|(line, l)| {
            let mut parts = l.split('\t');
            let (Some(word), Some(tag), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(LexiconError::Parse {
                    source_name: source_name.into(),
                    line,
                    message: "expected `word<TAB>tag`".into(),
                });
            };
            let tag = tag.trim().parse().map_err(|e: UnknownTag| LexiconError::Parse {
                source_name: source_name.into(),
                line,
                message: e.to_string(),
            })?;
            Ok((word.trim().to_lowercase(), tag))
        })
        .collect()
}

fn parse_words(text: &str) -> HashSet<String> {
    content_lines(text)
        .map(|(_, l)| l.trim().to_lowercase())
        .collect()
}

impl PosLexicon {
    /// Builds a lexicon from the four plain-text sources.
    pub fn from_sources(
        lexicon: &str,
        suffix_rules: &str,
        pronouns: &str,
        stopwords: &str,
    ) -> Result<Self, LexiconError> {
        let pronouns = parse_words(pronouns);
        let mut entries = HashMap::new();
        for (word, tag) in parse_pairs(lexicon, "lexicon")? {
            if pronouns.contains(&word) && tag != PosTag::Pron {
                return Err(LexiconError::PronounConflict { word, tag });
            }
            entries.insert(word, tag);
        }
        Ok(PosLexicon {
            entries,
            suffix_rules: parse_pairs(suffix_rules, "suffix rules")?,
            pronouns,
            stopwords: parse_words(stopwords),
        })
    }

    pub fn from_files(
        lexicon: &Path,
        suffix_rules: &Path,
        pronouns: &Path,
        stopwords: &Path,
    ) -> Result<Self, LexiconError> {
        let read = |p: &Path| {
            fs::read_to_string(p).map_err(|source| LexiconError::Io {
                path: p.display().to_string(),
                source,
            })
        };
        Self::from_sources(
            &read(lexicon)?,
            &read(suffix_rules)?,
            &read(pronouns)?,
            &read(stopwords)?,
        )
    }

    /// The bundled English lexicon, parsed on first use.
    pub fn builtin() -> &'static PosLexicon {
        static BUILTIN: OnceLock<PosLexicon> = OnceLock::new();
        BUILTIN.get_or_init(|| {
            PosLexicon::from_sources(LEXICON, SUFFIX_RULES, PRONOUNS, STOPWORDS)
                .expect("bundled lexicon is well formed")
        })
    }

    pub fn tag_word(&self, word: &str) -> PosTag {
        if self.pronouns.contains(word) {
            return PosTag::Pron;
        }
        if let Some(&tag) = self.entries.get(word) {
            return tag;
        }
        self.suffix_rules
            .iter()
            .find(|(suffix, _)| word.len() > suffix.len() && word.ends_with(suffix.as_str()))
            .map(|&(_, tag)| tag)
            .unwrap_or(PosTag::Noun)
    }

    pub fn is_pronoun(&self, word: &str) -> bool {
        self.pronouns.contains(word)
    }

    pub fn is_stopword(&self, word: &str) -> bool {
        self.stopwords.contains(word)
    }

    pub fn pronouns(&self) -> impl Iterator<Item = &str> {
        self.pronouns.iter().map(String::as_str)
    }

    pub fn stopwords(&self) -> &HashSet<String> {
        &self.stopwords
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, PosTag)> {
        self.entries.iter().map(|(w, &t)| (w.as_str(), t))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl Tagger for PosLexicon {
    fn tag_tokens(&self, tokens: &[String]) -> Vec<PosTag> {
        tokens.iter().map(|t| self.tag_word(t)).collect()
    }
}

pub fn tag(doc_id: &str, tokens: &[String], tagger: &dyn Tagger) -> TaggedDocument {
    let tags = tagger.tag_tokens(tokens);
    assert_eq!(tags.len(), tokens.len(), "tagger must emit one tag per token");
    TaggedDocument {
        doc_id: doc_id.to_string(),
        tags,
    }
}

/// Counts per tag; tags that never occur are absent.
pub fn tag_histogram(tagged: &TaggedDocument) -> BTreeMap<PosTag, usize> {
    let mut hist = BTreeMap::new();
    for &t in &tagged.tags {
        *hist.entry(t).or_insert(0) += 1;
    }
    hist
}
