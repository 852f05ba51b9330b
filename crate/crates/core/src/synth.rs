//! Synthetic longitudinal corpora with a planted linguistic decline.
//!
//! Documents are sampled word by word from the bundled lexicon. From
//! `decline_start_index` onward, pronouns are drawn `pronoun_factor` times
//! as often relative to nouns, and the open-class vocabulary each document
//! draws from shrinks by `vocab_shrink`.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Days, NaiveDate};
use rand::distr::weighted::WeightedIndex;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};
use thiserror::Error;

use crate::postag::{PosLexicon, PosTag};
use crate::textnorm::Lemmatizer;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic corpus configuration: {0}")]
    Config(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_docs: usize,
    /// Zero-based index of the first declined document.
    pub decline_start_index: usize,
    pub pronoun_factor: f64,
    /// Fraction of the open-class vocabulary removed in declined documents.
    pub vocab_shrink: f64,
    pub tokens_per_doc: usize,
    pub seed: u64,
    pub start_date: NaiveDate,
    pub days_between: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_docs: 60,
            decline_start_index: 44,
            pronoun_factor: 2.0,
            vocab_shrink: 0.4,
            tokens_per_doc: 900,
            seed: 0,
            start_date: NaiveDate::from_ymd_opt(1981, 1, 20).expect("valid date"),
            days_between: 48,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDocument {
    pub date: NaiveDate,
    pub title: String,
    pub text: String,
    pub declined: bool,
}

// healthy share of each tag among tokens
const MIX: [(PosTag, f64); 6] = [
    (PosTag::Pron, 0.08),
    (PosTag::Noun, 0.25),
    (PosTag::Verb, 0.17),
    (PosTag::Adv, 0.06),
    (PosTag::Adj, 0.08),
    (PosTag::Other, 0.36),
];

// open-class vocabulary available to a healthy document
const VOCAB: [(PosTag, usize); 4] = [(PosTag::Noun, 600), (PosTag::Verb, 350), (PosTag::Adj, 200), (PosTag::Adv, 60)];

const ZIPF_EXPONENT: f64 = 0.8;

struct WordPools {
    pools: Vec<(PosTag, Vec<String>)>,
}

impl WordPools {
    fn build(rng: &mut ChaCha8Rng) -> WordPools {
        let lexicon = PosLexicon::builtin();
        let lemmatizer = Lemmatizer::builtin();
        let pools = PosTag::ALL
            .iter()
            .map(|&tag| {
                let mut words: Vec<String> = match tag {
                    PosTag::Pron => lexicon.pronouns().filter(|w| !w.contains('\'')).map(str::to_string).collect(),
                    PosTag::Other => lexicon
                        .entries()
                        .filter(|&(w, t)| t == PosTag::Other && lexicon.is_stopword(w) && !w.contains('\''))
                        .map(|(w, _)| w.to_string())
                        .collect(),
                    _ => lexicon
                        .entries()
                        .filter(|&(w, t)| {
                            t == tag
                                && w.len() >= 3
                                && w.bytes().all(|b| b.is_ascii_lowercase())
                                && !lexicon.is_stopword(w)
                                && lemmatizer.lemmatize(w, tag) == w
                        })
                        .map(|(w, _)| w.to_string())
                        .collect(),
                };
                // lexicon iteration order is unspecified
                words.sort();
                words.shuffle(rng);
                (tag, words)
            })
            .collect();
        WordPools { pools }
    }

    fn words(&self, tag: PosTag) -> &[String] {
        &self.pools.iter().find(|(t, _)| *t == tag).expect("every tag has a pool").1
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |m: &str| Err(SynthError::Config(m.to_string()));
        if self.n_docs == 0 {
            return fail("n_docs must be positive");
        }
        if self.decline_start_index > self.n_docs {
            return fail("decline_start_index is past the last document");
        }
        if !(self.pronoun_factor > 0.0 && self.pronoun_factor.is_finite()) {
            return fail("pronoun_factor must be positive");
        }
        if !(0.0..1.0).contains(&self.vocab_shrink) {
            return fail("vocab_shrink must lie in [0, 1)");
        }
        if self.tokens_per_doc < 20 {
            return fail("tokens_per_doc must be at least 20");
        }
        Ok(())
    }
}

fn document_text(
    pools: &WordPools,
    declined: bool,
    config: &SynthConfig,
    rng: &mut ChaCha8Rng,
) -> String {
    let weights: Vec<f64> = MIX
        .iter()
        .map(|&(tag, w)| if declined && tag == PosTag::Pron { w * config.pronoun_factor } else { w })
        .collect();
    let pick_tag = WeightedIndex::new(&weights).expect("positive weights");
    let keep = if declined { 1.0 - config.vocab_shrink } else { 1.0 };
    let samplers: Vec<(PosTag, &[String], Zipf<f64>)> = MIX
        .iter()
        .map(|&(tag, _)| {
            let all = pools.words(tag);
            let size = VOCAB
                .iter()
                .find(|(t, _)| *t == tag)
                .map_or(all.len(), |&(_, v)| ((v as f64 * keep).round() as usize).clamp(1, all.len()));
            let words = &all[..size];
            (tag, words, Zipf::new(size as f64, ZIPF_EXPONENT).expect("valid zipf"))
        })
        .collect();

    let mut text = String::new();
    let mut produced = 0;
    while produced < config.tokens_per_doc {
        let len = rng.random_range(10..=22).min(config.tokens_per_doc - produced);
        for k in 0..len {
            let (_, words, zipf) = &samplers[pick_tag.sample(rng)];
            let word = &words[zipf.sample(rng) as usize - 1];
            if k == 0 {
                let mut chars = word.chars();
                let first = chars.next().expect("non-empty word");
                text.extend(first.to_uppercase());
                text.push_str(chars.as_str());
            } else {
                text.push(' ');
                text.push_str(word);
            }
        }
        text.push_str(".\n");
        produced += len;
    }
    text
}

/// Generates the corpus in date order.
pub fn generate(config: &SynthConfig) -> Result<Vec<SynthDocument>, SynthError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let pools = WordPools::build(&mut rng);
    Ok((0..config.n_docs)
        .map(|i| {
            let declined = i >= config.decline_start_index;
            SynthDocument {
                date: config.start_date + Days::new(i as u64 * config.days_between),
                title: format!("Synthetic address {}", i + 1),
                text: document_text(&pools, declined, config, &mut rng),
                declined,
            }
        })
        .collect())
}

/// Writes one text file per document plus `manifest.csv` into `dir` and
/// returns the manifest path.
pub fn write_corpus(docs: &[SynthDocument], dir: &Path) -> Result<PathBuf, SynthError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| SynthError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let mut manifest = String::from("path,date,title\n");
    for (i, doc) in docs.iter().enumerate() {
        let name = format!("doc_{:03}.txt", i + 1);
        let path = dir.join(&name);
        fs::write(&path, &doc.text).map_err(io(&path))?;
        manifest.push_str(&format!("{name},{},{}\n", doc.date.format("%Y-%m-%d"), doc.title));
    }
    let path = dir.join("manifest.csv");
    fs::write(&path, manifest).map_err(io(&path))?;
    Ok(path)
}
