//! Per-document linguistic features, the feature correlation matrix, and
//! the pruned, standardized matrix used by the embedding and detectors.
//!
//! Sixteen raw features are computed for every document:
//!
//! | feature | definition |
//! |---|---|
//! | `n_pronouns`, `n_adverbs`, `n_nouns`, `n_verbs` | tag counts |
//! | `pronoun_noun_ratio` | pronouns / max(nouns, 1) |
//! | `*_freq_rate` | 100 * count / N, or 0 when the tag occurs fewer than 10 times |
//! | `word_freq_rate` | % of non-stop-word tokens whose lemma occurs at least 10 times |
//! | `word_freq_rate_with_stop` | same, stop words included |
//! | `honore` | 100 ln N / (1 - V1/V), with V1/V capped at 0.999 |
//! | `sichel` | V2 / V |
//! | `brunet` | N ^ (V ^ -0.165) |
//! | `ari` | 4.71 chars/words + 0.5 words/sentences - 21.43 |
//! | `flesch` | 206.835 - 1.015 words/sentences - 84.6 syllables/words |
//!
//! Frequency and richness features use lemmas; the two readability scores
//! use surface tokens.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use thiserror::Error;

use crate::postag::{self, PosLexicon, PosTag, TaggedDocument, Tagger};
use crate::textnorm::{self, Lemmatizer, TokenizedDocument};

/// Tags (and word types) occurring fewer times than this get a zero rate.
pub const MIN_OCCURRENCES: usize = 10;

/// Upper bound on the hapax ratio inside Honoré's statistic.
pub const HAPAX_RATIO_CAP: f64 = 1.0 - 1e-3;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("document `{0}` has no tokens")]
    EmptyDocument(String),
    #[error("document `{0}` has no sentences")]
    NoSentences(String),
    #[error("need at least 2 documents, got {0}")]
    TooFewRows(usize),
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("feature matrix csv line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Feature {
    NPronouns,
    PronounNounRatio,
    NAdverbs,
    NNouns,
    NVerbs,
    PronounFreqRate,
    NounFreqRate,
    VerbFreqRate,
    AdverbFreqRate,
    WordFreqRate,
    WordFreqRateWithStop,
    Honore,
    Sichel,
    Brunet,
    Ari,
    Flesch,
}

impl Feature {
    pub const ALL: [Feature; 16] = [
        Feature::NPronouns,
        Feature::PronounNounRatio,
        Feature::NAdverbs,
        Feature::NNouns,
        Feature::NVerbs,
        Feature::PronounFreqRate,
        Feature::NounFreqRate,
        Feature::VerbFreqRate,
        Feature::AdverbFreqRate,
        Feature::WordFreqRate,
        Feature::WordFreqRateWithStop,
        Feature::Honore,
        Feature::Sichel,
        Feature::Brunet,
        Feature::Ari,
        Feature::Flesch,
    ];

    /// The nine weakly correlated biomarkers kept for analysis, in order.
    pub const PRUNED: [Feature; 9] = [
        Feature::PronounNounRatio,
        Feature::WordFreqRate,
        Feature::VerbFreqRate,
        Feature::PronounFreqRate,
        Feature::AdverbFreqRate,
        Feature::Honore,
        Feature::Brunet,
        Feature::Sichel,
        Feature::Ari,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::NPronouns => "n_pronouns",
            Feature::PronounNounRatio => "pronoun_noun_ratio",
            Feature::NAdverbs => "n_adverbs",
            Feature::NNouns => "n_nouns",
            Feature::NVerbs => "n_verbs",
            Feature::PronounFreqRate => "pronoun_freq_rate",
            Feature::NounFreqRate => "noun_freq_rate",
            Feature::VerbFreqRate => "verb_freq_rate",
            Feature::AdverbFreqRate => "adverb_freq_rate",
            Feature::WordFreqRate => "word_freq_rate",
            Feature::WordFreqRateWithStop => "word_freq_rate_with_stop",
            Feature::Honore => "honore",
            Feature::Sichel => "sichel",
            Feature::Brunet => "brunet",
            Feature::Ari => "ari",
            Feature::Flesch => "flesch",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Feature::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| FeatureError::UnknownFeature(s.to_string()))
    }
}

/// Features 1 to 11: counts and rates derived from tags.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PosFeatures {
    pub n_pronouns: f64,
    pub pronoun_noun_ratio: f64,
    pub n_adverbs: f64,
    pub n_nouns: f64,
    pub n_verbs: f64,
    pub pronoun_freq_rate: f64,
    pub noun_freq_rate: f64,
    pub verb_freq_rate: f64,
    pub adverb_freq_rate: f64,
    pub word_freq_rate: f64,
    pub word_freq_rate_with_stop: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub doc_id: String,
    values: [f64; 16],
}

impl FeatureVector {
    pub fn new(doc_id: impl Into<String>, pos: PosFeatures, richness: [f64; 3], readability: [f64; 2]) -> Self {
        let values = [
            pos.n_pronouns,
            pos.pronoun_noun_ratio,
            pos.n_adverbs,
            pos.n_nouns,
            pos.n_verbs,
            pos.pronoun_freq_rate,
            pos.noun_freq_rate,
            pos.verb_freq_rate,
            pos.adverb_freq_rate,
            pos.word_freq_rate,
            pos.word_freq_rate_with_stop,
            richness[0],
            richness[1],
            richness[2],
            readability[0],
            readability[1],
        ];
        FeatureVector {
            doc_id: doc_id.into(),
            values,
        }
    }

    pub fn get(&self, feature: Feature) -> f64 {
        self.values[feature.index()]
    }

    pub fn values(&self) -> &[f64; 16] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (Feature, f64)> + '_ {
        Feature::ALL.into_iter().zip(self.values.iter().copied())
    }
}

fn rate(count: usize, total: usize) -> f64 {
    if count < MIN_OCCURRENCES || total == 0 {
        0.0
    } else {
        100.0 * count as f64 / total as f64
    }
}

fn percent_frequent<'a>(tokens: impl Iterator<Item = &'a str> + Clone) -> f64 {
    let mut freq: HashMap<&str, usize> = HashMap::new();
    for t in tokens.clone() {
        *freq.entry(t).or_insert(0) += 1;
    }
    let total: usize = freq.values().sum();
    if total == 0 {
        return 0.0;
    }
    let frequent: usize = freq.values().filter(|&&c| c >= MIN_OCCURRENCES).sum();
    100.0 * frequent as f64 / total as f64
}

/// Tag-derived features over `lemmas` (aligned with `tagged.tags`).
pub fn pos_features(
    tagged: &TaggedDocument,
    lemmas: &[String],
    stopwords: &HashSet<String>,
) -> Result<PosFeatures, FeatureError> {
    assert_eq!(tagged.tags.len(), lemmas.len(), "tags and lemmas must align");
    let n = lemmas.len();
    if n == 0 {
        return Err(FeatureError::EmptyDocument(tagged.doc_id.clone()));
    }
    let hist = postag::tag_histogram(tagged);
    let count = |t: PosTag| hist.get(&t).copied().unwrap_or(0);
    let (pron, noun, verb, adv) = (
        count(PosTag::Pron),
        count(PosTag::Noun),
        count(PosTag::Verb),
        count(PosTag::Adv),
    );

    let all = lemmas.iter().map(String::as_str);
    let content = all.clone().filter(|l| !stopwords.contains(*l));

    Ok(PosFeatures {
        n_pronouns: pron as f64,
        pronoun_noun_ratio: pron as f64 / noun.max(1) as f64,
        n_adverbs: adv as f64,
        n_nouns: noun as f64,
        n_verbs: verb as f64,
        pronoun_freq_rate: rate(pron, n),
        noun_freq_rate: rate(noun, n),
        verb_freq_rate: rate(verb, n),
        adverb_freq_rate: rate(adv, n),
        word_freq_rate: percent_frequent(content),
        word_freq_rate_with_stop: percent_frequent(all),
    })
}

/// Token count N, type count V, and the number of types seen once (V1)
/// and exactly twice (V2).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TypeCounts {
    pub tokens: usize,
    pub types: usize,
    pub hapax: usize,
    pub dis: usize,
}

impl TypeCounts {
    pub fn of<S: AsRef<str>>(tokens: &[S]) -> Self {
        let mut freq: HashMap<&str, usize> = HashMap::new();
        for t in tokens {
            *freq.entry(t.as_ref()).or_insert(0) += 1;
        }
        TypeCounts {
            tokens: tokens.len(),
            types: freq.len(),
            hapax: freq.values().filter(|&&c| c == 1).count(),
            dis: freq.values().filter(|&&c| c == 2).count(),
        }
    }
}

/// Honoré's statistic; 0 for an empty token list.
pub fn honore<S: AsRef<str>>(tokens: &[S]) -> f64 {
    let c = TypeCounts::of(tokens);
    if c.tokens == 0 {
        return 0.0;
    }
    let ratio = (c.hapax as f64 / c.types as f64).min(HAPAX_RATIO_CAP);
    100.0 * (c.tokens as f64).ln() / (1.0 - ratio)
}

/// Sichel's measure, the share of types that occur exactly twice.
pub fn sichel<S: AsRef<str>>(tokens: &[S]) -> f64 {
    let c = TypeCounts::of(tokens);
    if c.types == 0 {
        return 0.0;
    }
    c.dis as f64 / c.types as f64
}

/// Brunet's W. Larger values mean a poorer vocabulary.
pub fn brunet<S: AsRef<str>>(tokens: &[S]) -> f64 {
    let c = TypeCounts::of(tokens);
    if c.tokens == 0 {
        return 0.0;
    }
    (c.tokens as f64).powf((c.types as f64).powf(-0.165))
}

fn readability_counts(doc: &TokenizedDocument) -> Result<(f64, f64), FeatureError> {
    if doc.word_count() == 0 {
        return Err(FeatureError::EmptyDocument(doc.doc_id.clone()));
    }
    if doc.sentence_count() == 0 {
        return Err(FeatureError::NoSentences(doc.doc_id.clone()));
    }
    Ok((doc.word_count() as f64, doc.sentence_count() as f64))
}

/// Automated Readability Index.
pub fn ari(doc: &TokenizedDocument) -> Result<f64, FeatureError> {
    let (words, sentences) = readability_counts(doc)?;
    Ok(4.71 * (doc.char_count as f64 / words) + 0.5 * (words / sentences) - 21.43)
}

/// Flesch Reading Ease.
pub fn flesch(doc: &TokenizedDocument) -> Result<f64, FeatureError> {
    let (words, sentences) = readability_counts(doc)?;
    Ok(206.835 - 1.015 * (words / sentences) - 84.6 * (doc.syllable_count as f64 / words))
}

/// All sixteen features for an already tokenized, tagged and lemmatized
/// document.
pub fn extract_all(
    doc: &TokenizedDocument,
    tagged: &TaggedDocument,
    stopwords: &HashSet<String>,
) -> Result<FeatureVector, FeatureError> {
    assert_eq!(doc.lemmas.len(), doc.tokens.len(), "document must be lemmatized");
    let pos = pos_features(tagged, &doc.lemmas, stopwords)?;
    let richness = [honore(&doc.lemmas), sichel(&doc.lemmas), brunet(&doc.lemmas)];
    let readability = [ari(doc)?, flesch(doc)?];
    Ok(FeatureVector::new(doc.doc_id.clone(), pos, richness, readability))
}

/// Runs clean, segment, tag, lemmatize and feature extraction with a fixed
/// lexicon and lemmatizer.
#[derive(Debug, Clone, Copy)]
pub struct FeatureExtractor<'a> {
    pub lexicon: &'a PosLexicon,
    pub lemmatizer: &'a Lemmatizer,
}

impl Default for FeatureExtractor<'static> {
    fn default() -> Self {
        FeatureExtractor {
            lexicon: PosLexicon::builtin(),
            lemmatizer: Lemmatizer::builtin(),
        }
    }
}

impl FeatureExtractor<'_> {
    pub fn prepare(&self, doc_id: &str, raw_text: &str) -> (TokenizedDocument, TaggedDocument) {
        let mut doc = textnorm::segment(&textnorm::clean(raw_text));
        doc.doc_id = doc_id.to_string();
        let tagged = postag::tag(doc_id, &doc.tokens, self.lexicon as &dyn Tagger);
        doc.lemmatize_with(&tagged.tags, self.lemmatizer);
        (doc, tagged)
    }

    pub fn extract(&self, doc_id: &str, raw_text: &str) -> Result<FeatureVector, FeatureError> {
        let (doc, tagged) = self.prepare(doc_id, raw_text);
        extract_all(&doc, &tagged, self.lexicon.stopwords())
    }
}

/// Documents by features, rows in date order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub doc_ids: Vec<String>,
    pub feature_names: Vec<String>,
    pub values: Array2<f64>,
    pub standardized: bool,
}

impl FeatureMatrix {
    pub fn new(doc_ids: Vec<String>, feature_names: Vec<String>, values: Array2<f64>) -> Self {
        assert_eq!(values.nrows(), doc_ids.len());
        assert_eq!(values.ncols(), feature_names.len());
        FeatureMatrix {
            doc_ids,
            feature_names,
            values,
            standardized: false,
        }
    }

    /// The raw sixteen-column matrix.
    pub fn from_vectors(vectors: &[FeatureVector]) -> Self {
        let mut values = Array2::zeros((vectors.len(), Feature::ALL.len()));
        for (mut row, v) in values.rows_mut().into_iter().zip(vectors) {
            row.assign(&ArrayView1::from(&v.values[..]));
        }
        FeatureMatrix::new(
            vectors.iter().map(|v| v.doc_id.clone()).collect(),
            Feature::ALL.iter().map(|f| f.name().to_string()).collect(),
            values,
        )
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Result<ArrayView1<'_, f64>, FeatureError> {
        self.column_index(name)
            .map(|i| self.values.column(i))
            .ok_or_else(|| FeatureError::UnknownFeature(name.to_string()))
    }

    /// Copies the named columns, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<FeatureMatrix, FeatureError> {
        let idx = names
            .iter()
            .map(|n| self.column_index(n).ok_or_else(|| FeatureError::UnknownFeature(n.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(FeatureMatrix {
            doc_ids: self.doc_ids.clone(),
            feature_names: names.iter().map(|s| s.to_string()).collect(),
            values: self.values.select(Axis(1), &idx),
            standardized: self.standardized,
        })
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("doc_id");
        for name in &self.feature_names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (id, row) in self.doc_ids.iter().zip(self.values.rows()) {
            out.push_str(&csv_field(id));
            for v in row {
                out.push(',');
                out.push_str(&format_real(*v));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), FeatureError> {
        fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    pub fn from_csv_str(text: &str) -> Result<FeatureMatrix, FeatureError> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header = reader.headers()?.clone();
        if header.get(0) != Some("doc_id") {
            return Err(FeatureError::Parse {
                line: 1,
                message: "first column must be `doc_id`".into(),
            });
        }
        let feature_names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut doc_ids = Vec::new();
        let mut flat = Vec::new();
        for record in reader.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() != feature_names.len() + 1 {
                return Err(FeatureError::Parse {
                    line,
                    message: format!("expected {} fields, found {}", feature_names.len() + 1, record.len()),
                });
            }
            doc_ids.push(record[0].to_string());
            for field in record.iter().skip(1) {
                let v: f64 = field.trim().parse().map_err(|_| FeatureError::Parse {
                    line,
                    message: format!("not a number: `{field}`"),
                })?;
                flat.push(v);
            }
        }
        let values = Array2::from_shape_vec((doc_ids.len(), feature_names.len()), flat)
            .expect("row lengths were checked");
        Ok(FeatureMatrix::new(doc_ids, feature_names, values))
    }

    pub fn read_csv(path: &Path) -> Result<FeatureMatrix, FeatureError> {
        Self::from_csv_str(&fs::read_to_string(path)?)
    }
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Pearson correlation between columns.
///
/// A constant column correlates 0 with every other column and 1 with itself.
pub fn correlation_matrix(m: &FeatureMatrix) -> Result<Array2<f64>, FeatureError> {
    let n = m.nrows();
    if n < 2 {
        return Err(FeatureError::TooFewRows(n));
    }
    let d = m.ncols();
    let mean = m.values.mean_axis(Axis(0)).expect("non-empty");
    let centered = &m.values - &mean;
    let norms: Array1<f64> = centered
        .columns()
        .into_iter()
        .map(|c| c.dot(&c).sqrt())
        .collect();
    let mut corr = Array2::zeros((d, d));
    for i in 0..d {
        corr[[i, i]] = 1.0;
        for j in (i + 1)..d {
            let denom = norms[i] * norms[j];
            let r = if denom > 0.0 {
                (centered.column(i).dot(&centered.column(j)) / denom).clamp(-1.0, 1.0)
            } else {
                0.0
            };
            corr[[i, j]] = r;
            corr[[j, i]] = r;
        }
    }
    Ok(corr)
}

/// z-scores every column with the population standard deviation; constant
/// columns become all zeros.
pub fn standardize(m: &FeatureMatrix) -> FeatureMatrix {
    let mut values = m.values.clone();
    for mut col in values.columns_mut() {
        let n = col.len() as f64;
        if n == 0.0 {
            continue;
        }
        let mean = col.sum() / n;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        if std > 1e-12 * mean.abs().max(1.0) {
            col.mapv_inplace(|v| (v - mean) / std);
        } else {
            col.fill(0.0);
        }
    }
    FeatureMatrix {
        doc_ids: m.doc_ids.clone(),
        feature_names: m.feature_names.clone(),
        values,
        standardized: true,
    }
}

/// Keeps the nine analysis features in their canonical order and
/// standardizes them.
pub fn prune_and_standardize(m: &FeatureMatrix) -> Result<FeatureMatrix, FeatureError> {
    let names: Vec<&str> = Feature::PRUNED.iter().map(|f| f.name()).collect();
    Ok(standardize(&m.select(&names)?))
}

/// Writes a square matrix with feature names as both header and first column.
pub fn correlation_csv(names: &[String], corr: &Array2<f64>) -> String {
    let mut out = String::from("feature");
    for n in names {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    for (name, row) in names.iter().zip(corr.rows()) {
        out.push_str(name);
        for v in row {
            out.push(',');
            out.push_str(&format_real(*v));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    fn tagged(tags: Vec<PosTag>) -> TaggedDocument {
        TaggedDocument {
            doc_id: "t".into(),
            tags,
        }
    }

    #[test]
    fn honore_values() {
        assert_abs_diff_eq!(honore(&toks("a b a c")), 100.0 * 4f64.ln() * 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(honore(&toks("a b a c")), 415.888, epsilon = 1e-3);
        assert_abs_diff_eq!(honore(&toks("a b c")), 109_861.2, epsilon = 0.1);
        assert_abs_diff_eq!(honore(&toks("a a a a")), 138.629, epsilon = 1e-3);
    }

    #[test]
    fn sichel_values() {
        assert_abs_diff_eq!(sichel(&toks("a a b c c c")), 1.0 / 3.0, epsilon = 1e-12);
        assert_eq!(sichel(&toks("a b c")), 0.0);
        assert_eq!(sichel(&toks("a a b b")), 1.0);
    }

    #[test]
    fn brunet_values() {
        assert_abs_diff_eq!(brunet(&toks("a b a c")), 3.1786, epsilon = 1e-3);
        assert_eq!(brunet(&toks("a")), 1.0);
        let hundred: Vec<String> = (0..100).map(|i| format!("w{i}")).collect();
        assert_abs_diff_eq!(brunet(&hundred), 100f64.powf(100f64.powf(-0.165)), epsilon = 1e-12);
        assert_abs_diff_eq!(brunet(&hundred), 8.6193, epsilon = 1e-4);
    }

    fn tokenized(text: &str) -> TokenizedDocument {
        textnorm::segment(&textnorm::clean(text))
    }

    #[test]
    fn readability_values() {
        let d = tokenized("The cat sat on the mat.");
        assert_abs_diff_eq!(ari(&d).unwrap(), 4.71 * 17.0 / 6.0 + 3.0 - 21.43, epsilon = 1e-12);
        assert_abs_diff_eq!(ari(&d).unwrap(), -5.085, epsilon = 1e-3);
        assert_abs_diff_eq!(flesch(&d).unwrap(), 116.145, epsilon = 1e-9);

        // 20 five-letter words per sentence: chars/words = 5, words/sentences = 20
        let sentence = format!("{} .", vec!["abcde"; 20].join(" "));
        let d = tokenized(&sentence.repeat(3));
        assert_abs_diff_eq!(ari(&d).unwrap(), 12.12, epsilon = 1e-9);

        // 20 words per sentence alternating one and two syllables: 1.5 per word
        let sentence = format!("{} .", ["cat", "table"].repeat(10).join(" "));
        let d = tokenized(&sentence.repeat(2));
        assert_abs_diff_eq!(flesch(&d).unwrap(), 59.635, epsilon = 1e-9);

        let empty = tokenized("");
        assert!(matches!(ari(&empty), Err(FeatureError::EmptyDocument(_))));
        assert!(flesch(&empty).is_err());
    }

    #[test]
    fn pos_features_constructed_fixture() {
        // 20 pronouns, 40 nouns, 40 other, all distinct lemmas except as noted
        let mut tags = vec![PosTag::Pron; 20];
        tags.extend(vec![PosTag::Noun; 40]);
        tags.extend(vec![PosTag::Other; 40]);
        let lemmas: Vec<String> = (0..100).map(|i| format!("w{i}")).collect();
        let f = pos_features(&tagged(tags), &lemmas, &HashSet::new()).unwrap();
        assert_eq!(f.pronoun_noun_ratio, 0.5);
        assert_eq!(f.pronoun_freq_rate, 20.0);
        assert_eq!(f.noun_freq_rate, 40.0);
        assert_eq!(f.verb_freq_rate, 0.0);
        assert_eq!(f.n_pronouns, 20.0);
        assert_eq!(f.word_freq_rate, 0.0);
    }

    #[test]
    fn pos_rate_threshold_and_degenerate_ratio() {
        let mut tags = vec![PosTag::Pron; 5];
        tags.extend(vec![PosTag::Noun; 30]);
        let lemmas = vec!["x".to_string(); 35];
        let f = pos_features(&tagged(tags), &lemmas, &HashSet::new()).unwrap();
        assert_eq!(f.n_pronouns, 5.0);
        assert_eq!(f.pronoun_freq_rate, 0.0);
        // every token is the single frequent type
        assert_eq!(f.word_freq_rate, 100.0);

        let f = pos_features(&tagged(vec![PosTag::Pron; 3]), &toks("he she it"), &HashSet::new()).unwrap();
        assert_eq!(f.pronoun_noun_ratio, 3.0);

        let err = pos_features(&tagged(vec![]), &[], &HashSet::new()).unwrap_err();
        assert!(matches!(err, FeatureError::EmptyDocument(_)));
    }

    #[test]
    fn word_freq_rate_excludes_stop_words() {
        // "the" x12 (stop), "nation" x10, "peace" x3 -> 25 tokens
        let mut lemmas = vec!["the".to_string(); 12];
        lemmas.extend(vec!["nation".to_string(); 10]);
        lemmas.extend(vec!["peace".to_string(); 3]);
        let stop: HashSet<String> = ["the".to_string()].into();
        let f = pos_features(&tagged(vec![PosTag::Other; 25]), &lemmas, &stop).unwrap();
        assert_abs_diff_eq!(f.word_freq_rate, 100.0 * 10.0 / 13.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.word_freq_rate_with_stop, 100.0 * 22.0 / 25.0, epsilon = 1e-12);
    }

    #[test]
    fn duplicated_tokens_scale_as_formulas_predict() {
        // every tag count >= 10 and no type frequency in [5, 10), so doubling
        // moves no threshold
        let mut tags = Vec::new();
        let mut lemmas = Vec::new();
        for (tag, word, n) in [
            (PosTag::Pron, "he", 12),
            (PosTag::Noun, "nation", 15),
            (PosTag::Noun, "budget", 1),
            (PosTag::Noun, "tax", 2),
            (PosTag::Verb, "say", 11),
            (PosTag::Adv, "now", 10),
            (PosTag::Other, "the", 3),
        ] {
            tags.extend(vec![tag; n]);
            lemmas.extend(vec![word.to_string(); n]);
        }
        let stop: HashSet<String> = ["the".to_string()].into();
        let base = pos_features(&tagged(tags.clone()), &lemmas, &stop).unwrap();
        let doubled_tags: Vec<PosTag> = tags.iter().flat_map(|&t| [t, t]).collect();
        let doubled: Vec<String> = lemmas.iter().flat_map(|l| [l.clone(), l.clone()]).collect();
        let twice = pos_features(&tagged(doubled_tags), &doubled, &stop).unwrap();

        assert_eq!(twice.n_pronouns, 2.0 * base.n_pronouns);
        assert_eq!(twice.n_nouns, 2.0 * base.n_nouns);
        assert_eq!(twice.pronoun_noun_ratio, base.pronoun_noun_ratio);
        assert_abs_diff_eq!(twice.pronoun_freq_rate, base.pronoun_freq_rate, epsilon = 1e-12);
        assert_abs_diff_eq!(twice.noun_freq_rate, base.noun_freq_rate, epsilon = 1e-12);
        assert_abs_diff_eq!(twice.verb_freq_rate, base.verb_freq_rate, epsilon = 1e-12);
        assert_abs_diff_eq!(twice.adverb_freq_rate, base.adverb_freq_rate, epsilon = 1e-12);
        assert_abs_diff_eq!(twice.word_freq_rate, base.word_freq_rate, epsilon = 1e-12);

        // richness moves exactly as the closed forms say: V unchanged, V1 -> 0,
        // types seen twice after doubling are the former hapaxes
        let c = TypeCounts::of(&lemmas);
        let n2 = 2.0 * c.tokens as f64;
        assert_abs_diff_eq!(honore(&doubled), 100.0 * n2.ln(), epsilon = 1e-9);
        assert_abs_diff_eq!(sichel(&doubled), c.hapax as f64 / c.types as f64, epsilon = 1e-12);
        assert_abs_diff_eq!(brunet(&doubled), n2.powf((c.types as f64).powf(-0.165)), epsilon = 1e-9);
    }

    #[test]
    fn one_token_document() {
        let fv = FeatureExtractor::default().extract("h", "hello.").unwrap();
        assert_eq!(fv.get(Feature::NNouns) + fv.get(Feature::NVerbs) + fv.get(Feature::NPronouns) + fv.get(Feature::NAdverbs), 0.0);
        assert_eq!(fv.get(Feature::PronounNounRatio), 0.0);
        assert_eq!(fv.get(Feature::Honore), 0.0);
        assert_eq!(fv.get(Feature::Sichel), 0.0);
        assert_eq!(fv.get(Feature::Brunet), 1.0);
        assert!(fv.values().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn identical_documents_identical_vectors() {
        let text = "We will never forget them. They gave their lives so that we may live free!";
        let ex = FeatureExtractor::default();
        let a = ex.extract("x", text).unwrap();
        let b = ex.extract("x", text).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn correlation_examples() {
        let m = FeatureMatrix::new(
            (0..4).map(|i| i.to_string()).collect(),
            vec!["a".into(), "b".into(), "c".into(), "k".into()],
            array![[1., 2., -1., 7.], [2., 4., -2., 7.], [3., 6., -3., 7.], [4., 8., -4., 7.]],
        );
        let c = correlation_matrix(&m).unwrap();
        assert_abs_diff_eq!(c[[0, 1]], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c[[0, 2]], -1.0, epsilon = 1e-12);
        assert_eq!(c[[0, 3]], 0.0);
        assert_eq!(c[[3, 3]], 1.0);
        for i in 0..4 {
            assert_eq!(c[[i, i]], 1.0);
            for j in 0..4 {
                assert_eq!(c[[i, j]], c[[j, i]]);
            }
        }
        let one = m.select(&["a"]).unwrap();
        let single_row = FeatureMatrix::new(vec!["r".into()], vec!["a".into()], array![[1.0]]);
        assert!(matches!(correlation_matrix(&single_row), Err(FeatureError::TooFewRows(1))));
        assert_eq!(one.ncols(), 1);
    }

    #[test]
    fn standardize_examples() {
        let m = FeatureMatrix::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec!["k".into(), "x".into()],
            array![[2., 1.], [2., 2.], [2., 3.]],
        );
        let s = standardize(&m);
        assert!(s.standardized);
        assert_eq!(s.values.column(0).to_vec(), vec![0.0, 0.0, 0.0]);
        let z = 1.5f64.sqrt(); // 1 / population std of [1, 2, 3]
        assert_abs_diff_eq!(s.values[[0, 1]], -z, epsilon = 1e-12);
        assert_abs_diff_eq!(s.values[[1, 1]], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.values[[2, 1]], 1.2247, epsilon = 1e-4);
    }

    #[test]
    fn prune_keeps_nine_in_order() {
        let ex = FeatureExtractor::default();
        let vs = vec![
            ex.extract("a", "I said it. We went home now.").unwrap(),
            ex.extract("b", "The nation stands strong. Freedom grows.").unwrap(),
            ex.extract("c", "They told me they would come back soon.").unwrap(),
        ];
        let raw = FeatureMatrix::from_vectors(&vs);
        assert_eq!(raw.ncols(), 16);
        let p = prune_and_standardize(&raw).unwrap();
        let names: Vec<&str> = p.feature_names.iter().map(String::as_str).collect();
        assert_eq!(
            names,
            [
                "pronoun_noun_ratio",
                "word_freq_rate",
                "verb_freq_rate",
                "pronoun_freq_rate",
                "adverb_freq_rate",
                "honore",
                "brunet",
                "sichel",
                "ari"
            ]
        );
        assert!(matches!(
            prune_and_standardize(&p.select(&["ari"]).unwrap()),
            Err(FeatureError::UnknownFeature(_))
        ));
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let m = FeatureMatrix::new(
            vec!["1980-01-01_a".into(), "x,y".into()],
            vec!["f".into(), "g".into()],
            array![[0.1, -1.0 / 3.0], [1e-300, 12345.678901234567]],
        );
        let text = m.to_csv_string();
        assert!(text.starts_with("doc_id,f,g\n"));
        let back = FeatureMatrix::from_csv_str(&text).unwrap();
        assert_eq!(back, m);
        assert!(FeatureMatrix::from_csv_str("id,f\na,1\n").is_err());
        let err = FeatureMatrix::from_csv_str("doc_id,f\na,1\nb,zz\n").unwrap_err();
        assert!(matches!(err, FeatureError::Parse { line: 3, .. }), "{err}");
        assert_eq!("honore".parse::<Feature>().unwrap(), Feature::Honore);
        assert!("nope".parse::<Feature>().is_err());
    }

    proptest! {
        #[test]
        fn pearson_is_affine_invariant(
            rows in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 3), 3..12),
            a in 0.1f64..10.0,
            b in -100.0f64..100.0,
        ) {
            let n = rows.len();
            let flat: Vec<f64> = rows.into_iter().flatten().collect();
            let m = FeatureMatrix::new(
                (0..n).map(|i| i.to_string()).collect(),
                vec!["a".into(), "b".into(), "c".into()],
                Array2::from_shape_vec((n, 3), flat).unwrap(),
            );
            let mut shifted = m.clone();
            shifted.values.mapv_inplace(|v| a * v + b);
            let c1 = correlation_matrix(&m).unwrap();
            let c2 = correlation_matrix(&shifted).unwrap();
            for (x, y) in c1.iter().zip(c2.iter()) {
                prop_assert!((x - y).abs() < 1e-9);
                prop_assert!((-1.0..=1.0).contains(x));
            }
        }

        #[test]
        fn standardized_columns_have_unit_variance(
            rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 4), 2..20),
        ) {
            let n = rows.len();
            let flat: Vec<f64> = rows.into_iter().flatten().collect();
            let m = FeatureMatrix::new(
                (0..n).map(|i| i.to_string()).collect(),
                (0..4).map(|i| i.to_string()).collect(),
                Array2::from_shape_vec((n, 4), flat).unwrap(),
            );
            let s = standardize(&m);
            for col in s.values.columns() {
                let mean = col.sum() / n as f64;
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
                prop_assert!(mean.abs() < 1e-9);
                prop_assert!(var.abs() < 1e-9 || (var - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn rates_stay_in_range(text in "[a-zA-Z .!?']{1,300}") {
            let ex = FeatureExtractor::default();
            if let Ok(fv) = ex.extract("p", &text) {
                for (f, v) in fv.iter() {
                    prop_assert!(v.is_finite(), "{f}");
                    if f.name().ends_with("_rate") {
                        prop_assert!((0.0..=100.0).contains(&v), "{f} = {v}");
                    }
                    if f.name().starts_with("n_") {
                        prop_assert!(v >= 0.0);
                    }
                }
            }
        }
    }
}
