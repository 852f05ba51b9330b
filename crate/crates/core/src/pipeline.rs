//! End-to-end runs: corpus, features, correlation, embedding, both
//! detectors and figures, driven by a flat `key = value` configuration.
//!
//! Every artifact is first written as `<name>.partial` and renamed only
//! once the whole run (or standalone stage) succeeds, so a failed run
//! leaves its partial outputs behind under the `.partial` suffix.

use std::collections::BTreeSet;
use std::error::Error as StdError;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use crate::anomaly::{self, AnomalyReport};
use crate::corpus::{self, Document};
use crate::features::{self, FeatureExtractor, FeatureMatrix, FeatureVector};
use crate::plot::{self, ColorBy, ScatterSpec};
use crate::synth::{self, SynthConfig};
use crate::tsne::{self, Embedding, TsneConfig};

pub const DOCUMENTS_CSV: &str = "documents.csv";
pub const CORPUS_STATS_CSV: &str = "corpus_stats.csv";
pub const FEATURES_CSV: &str = "features.csv";
pub const PRUNED_CSV: &str = "features_pruned.csv";
pub const CORRELATION_CSV: &str = "correlation.csv";
pub const EMBEDDING_CSV: &str = "embedding.csv";
pub const KL_TRACE_CSV: &str = "kl_trace.csv";
pub const OCSVM_REPORT_CSV: &str = "report_ocsvm.csv";
pub const IFOREST_REPORT_CSV: &str = "report_iforest.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Ingest,
    Extract,
    Correlate,
    Embed,
    DetectSvm,
    DetectIforest,
    Plot,
    Synth,
    Write,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Extract => "extract",
            Stage::Correlate => "correlate",
            Stage::Embed => "embed (tsne)",
            Stage::DetectSvm => "detect-svm",
            Stage::DetectIforest => "detect-iforest",
            Stage::Plot => "plot",
            Stage::Synth => "synth",
            Stage::Write => "write",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug)]
pub struct PipelineError {
    pub stage: Stage,
    pub source: Box<dyn StdError + Send + Sync>,
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage {} failed: {}", self.stage, self.source)
    }
}

impl StdError for PipelineError {
    fn source(&self) -> Option<&(dyn StdError + 'static)> {
        Some(self.source.as_ref())
    }
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, PipelineError>;
}

impl<T, E: Into<Box<dyn StdError + Send + Sync>>> AtStage<T> for Result<T, E> {
    fn at(self, stage: Stage) -> Result<T, PipelineError> {
        self.map_err(|e| PipelineError {
            stage,
            source: e.into(),
        })
    }
}

fn config_error(message: String) -> PipelineError {
    PipelineError {
        stage: Stage::Config,
        source: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub manifest: Option<PathBuf>,
    pub out: PathBuf,
    pub tsne: TsneConfig,
    pub ocsvm_nu: f64,
    /// `None` derives gamma from the data.
    pub ocsvm_gamma: Option<f64>,
    pub iforest_n_trees: usize,
    /// `None` uses `min(256, N)`.
    pub iforest_psi: Option<usize>,
    pub iforest_contamination: f64,
    pub iforest_seed: u64,
    pub radius_features: Vec<String>,
    pub synth: SynthConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            manifest: None,
            out: PathBuf::from("out"),
            tsne: TsneConfig::default(),
            ocsvm_nu: 0.5,
            ocsvm_gamma: None,
            iforest_n_trees: 100,
            iforest_psi: None,
            iforest_contamination: 0.1,
            iforest_seed: 0,
            radius_features: ["pronoun_noun_ratio", "pronoun_freq_rate", "ari", "word_freq_rate"]
                .map(String::from)
                .to_vec(),
            synth: SynthConfig::default(),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("invalid value `{value}` for `{key}`"))
}

fn parse_auto<T: std::str::FromStr>(key: &str, value: &str) -> Result<Option<T>, String> {
    if value.eq_ignore_ascii_case("auto") {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

impl PipelineConfig {
    /// Every key accepted by [`PipelineConfig::set`], which is also the
    /// set of `--key value` command-line overrides.
    pub const KEYS: [&'static str; 27] = [
        "manifest",
        "out",
        "seed",
        "tsne.perplexity",
        "tsne.learning_rate",
        "tsne.n_iters",
        "tsne.exaggeration_factor",
        "tsne.exaggeration_iters",
        "tsne.initial_momentum",
        "tsne.final_momentum",
        "tsne.momentum_switch_iter",
        "tsne.seed",
        "tsne.sigma_tolerance",
        "tsne.adaptive_gains",
        "tsne.plain_descent",
        "ocsvm.nu",
        "ocsvm.gamma",
        "iforest.n_trees",
        "iforest.psi",
        "iforest.contamination",
        "iforest.seed",
        "plot.radius_features",
        "synth.n_docs",
        "synth.decline_start_index",
        "synth.pronoun_factor",
        "synth.vocab_shrink",
        "synth.tokens_per_doc",
    ];

    /// Applies one setting. `seed` sets the t-SNE, isolation-forest and
    /// synthetic-corpus seeds together.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let value = value.trim();
        match key {
            "manifest" => self.manifest = Some(PathBuf::from(value)),
            "out" => self.out = PathBuf::from(value),
            "seed" => {
                let seed = parse(key, value)?;
                self.tsne.seed = seed;
                self.iforest_seed = seed;
                self.synth.seed = seed;
            }
            "tsne.perplexity" => self.tsne.perplexity = parse(key, value)?,
            "tsne.learning_rate" => self.tsne.learning_rate = parse(key, value)?,
            "tsne.n_iters" => self.tsne.n_iters = parse(key, value)?,
            "tsne.exaggeration_factor" => self.tsne.exaggeration_factor = parse(key, value)?,
            "tsne.exaggeration_iters" => self.tsne.exaggeration_iters = parse(key, value)?,
            "tsne.initial_momentum" => self.tsne.initial_momentum = parse(key, value)?,
            "tsne.final_momentum" => self.tsne.final_momentum = parse(key, value)?,
            "tsne.momentum_switch_iter" => self.tsne.momentum_switch_iter = parse(key, value)?,
            "tsne.seed" => self.tsne.seed = parse(key, value)?,
            "tsne.sigma_tolerance" => self.tsne.sigma_tolerance = parse(key, value)?,
            "tsne.adaptive_gains" => self.tsne.adaptive_gains = parse(key, value)?,
            "tsne.plain_descent" => self.tsne.plain_descent = parse(key, value)?,
            "ocsvm.nu" => self.ocsvm_nu = parse(key, value)?,
            "ocsvm.gamma" => self.ocsvm_gamma = parse_auto(key, value)?,
            "iforest.n_trees" => self.iforest_n_trees = parse(key, value)?,
            "iforest.psi" => self.iforest_psi = parse_auto(key, value)?,
            "iforest.contamination" => self.iforest_contamination = parse(key, value)?,
            "iforest.seed" => self.iforest_seed = parse(key, value)?,
            "plot.radius_features" => {
                self.radius_features = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect()
            }
            "synth.n_docs" => self.synth.n_docs = parse(key, value)?,
            "synth.decline_start_index" => self.synth.decline_start_index = parse(key, value)?,
            "synth.pronoun_factor" => self.synth.pronoun_factor = parse(key, value)?,
            "synth.vocab_shrink" => self.synth.vocab_shrink = parse(key, value)?,
            "synth.tokens_per_doc" => self.synth.tokens_per_doc = parse(key, value)?,
            other => return Err(format!("unknown configuration key `{other}`")),
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment line. Relative
    /// `manifest` and `out` paths are taken relative to `base`.
    pub fn from_str_with_base(text: &str, base: &Path) -> Result<Self, String> {
        let mut config = PipelineConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected `key = value`", n + 1))?;
            let key = key.trim();
            config.set(key, value).map_err(|e| format!("line {}: {e}", n + 1))?;
            if key == "manifest" || key == "out" {
                let slot = if key == "manifest" {
                    config.manifest.as_mut().expect("just set")
                } else {
                    &mut config.out
                };
                if slot.is_relative() {
                    *slot = base.join(&*slot);
                }
            }
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        Self::from_str_with_base(&text, base).map_err(|e| config_error(format!("{}: {e}", path.display())))
    }

    fn manifest_path(&self) -> Result<&Path, PipelineError> {
        self.manifest
            .as_deref()
            .ok_or_else(|| config_error("no manifest configured (set `manifest` or pass --manifest)".into()))
    }
}

/// Collects artifacts as `.partial` files and renames them all at the end.
#[derive(Debug)]
pub struct ArtifactWriter {
    dir: PathBuf,
    pending: Vec<String>,
}

impl ArtifactWriter {
    pub fn new(dir: &Path) -> Result<Self, PipelineError> {
        fs::create_dir_all(dir).at(Stage::Write)?;
        Ok(ArtifactWriter {
            dir: dir.to_path_buf(),
            pending: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), PipelineError> {
        fs::write(self.dir.join(format!("{name}.partial")), contents).at(Stage::Write)?;
        self.pending.push(name.to_string());
        Ok(())
    }

    pub fn commit(self) -> Result<Vec<PathBuf>, PipelineError> {
        self.pending
            .iter()
            .map(|name| {
                let done = self.dir.join(name);
                fs::rename(self.dir.join(format!("{name}.partial")), &done).at(Stage::Write)?;
                Ok(done)
            })
            .collect()
    }
}

pub fn ingest(manifest: &Path) -> Result<Vec<Document>, PipelineError> {
    let manifest = corpus::load_manifest(manifest).at(Stage::Ingest)?;
    corpus::load_corpus(&manifest).at(Stage::Ingest)
}

pub fn documents_csv(docs: &[Document]) -> String {
    let mut out = String::from("doc_id,date,title,tokens\n");
    let ex = FeatureExtractor::default();
    for d in docs {
        let (tokens, _) = ex.prepare(&d.id, &d.raw_text);
        out.push_str(&format!(
            "{},{},{},{}\n",
            features::csv_field(&d.id),
            d.date.format("%Y-%m-%d"),
            features::csv_field(&d.title),
            tokens.word_count()
        ));
    }
    out
}

pub fn corpus_stats_csv(docs: &[Document]) -> String {
    let mut out = String::from("year,documents\n");
    for (year, count) in corpus::corpus_stats(docs) {
        out.push_str(&format!("{year},{count}\n"));
    }
    out
}

/// The raw sixteen-feature matrix, one row per document in corpus order.
pub fn extract(docs: &[Document]) -> Result<FeatureMatrix, PipelineError> {
    let ex = FeatureExtractor::default();
    let vectors = docs
        .iter()
        .map(|d| ex.extract(&d.id, &d.raw_text))
        .collect::<Result<Vec<FeatureVector>, _>>()
        .at(Stage::Extract)?;
    Ok(FeatureMatrix::from_vectors(&vectors))
}

/// Correlation of the raw features and the pruned, standardized matrix.
pub fn correlate(raw: &FeatureMatrix) -> Result<(Array2<f64>, FeatureMatrix), PipelineError> {
    let corr = features::correlation_matrix(raw).at(Stage::Correlate)?;
    let pruned = features::prune_and_standardize(raw).at(Stage::Correlate)?;
    Ok((corr, pruned))
}

pub fn embed(pruned: &FeatureMatrix, config: &TsneConfig) -> Result<Embedding, PipelineError> {
    tsne::run(pruned, config).at(Stage::Embed)
}

pub fn detect_svm(pruned: &FeatureMatrix, config: &PipelineConfig) -> Result<AnomalyReport, PipelineError> {
    anomaly::detect_ocsvm(pruned, config.ocsvm_nu, config.ocsvm_gamma).at(Stage::DetectSvm)
}

pub fn detect_iforest(pruned: &FeatureMatrix, config: &PipelineConfig) -> Result<AnomalyReport, PipelineError> {
    anomaly::detect_iforest(
        pruned,
        config.iforest_n_trees,
        config.iforest_psi,
        config.iforest_contamination,
        config.iforest_seed,
    )
    .at(Stage::DetectIforest)
}

/// Renders every figure as `(file name, svg)`: one scatter per radius
/// feature, one flag-colored scatter and one timeline per report.
pub fn plots(
    embedding: &Embedding,
    raw: &FeatureMatrix,
    reports: &[&AnomalyReport],
    radius_features: &[String],
) -> Result<Vec<(String, String)>, PipelineError> {
    let mut out = Vec::new();
    for feature in radius_features {
        let spec = ScatterSpec {
            title: Some(format!("circle size: {feature}")),
            ..ScatterSpec::new(feature.clone())
        };
        out.push((
            format!("scatter_{feature}.svg"),
            plot::render_scatter(embedding, raw, &spec).at(Stage::Plot)?,
        ));
    }
    let flag_radius = radius_features.first().map_or("pronoun_noun_ratio", String::as_str);
    for report in reports {
        let flagged: BTreeSet<String> = report
            .doc_ids
            .iter()
            .zip(&report.flags)
            .filter(|(_, &f)| f)
            .map(|(id, _)| id.clone())
            .collect();
        let spec = ScatterSpec {
            color_by: ColorBy::Flags(flagged),
            title: Some(format!("{} anomalies", report.method)),
            ..ScatterSpec::new(flag_radius)
        };
        out.push((
            format!("scatter_{}.svg", report.method),
            plot::render_scatter(embedding, raw, &spec).at(Stage::Plot)?,
        ));
        out.push((
            format!("timeline_{}.svg", report.method),
            plot::render_timeline(report).at(Stage::Plot)?,
        ));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct PipelineSummary {
    pub n_docs: usize,
    pub artifacts: Vec<PathBuf>,
    pub ocsvm: AnomalyReport,
    pub iforest: AnomalyReport,
    pub embedding: Embedding,
}

/// Runs every stage from the manifest to the figures.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineSummary, PipelineError> {
    let docs = ingest(config.manifest_path()?)?;
    let mut w = ArtifactWriter::new(&config.out)?;
    w.write(DOCUMENTS_CSV, &documents_csv(&docs))?;
    w.write(CORPUS_STATS_CSV, &corpus_stats_csv(&docs))?;

    let raw = extract(&docs)?;
    w.write(FEATURES_CSV, &raw.to_csv_string())?;

    let (corr, pruned) = correlate(&raw)?;
    w.write(CORRELATION_CSV, &features::correlation_csv(&raw.feature_names, &corr))?;
    w.write(PRUNED_CSV, &pruned.to_csv_string())?;

    let embedding = embed(&pruned, &config.tsne)?;
    w.write(EMBEDDING_CSV, &embedding.to_csv_string())?;
    w.write(KL_TRACE_CSV, &embedding.kl_trace_csv())?;

    let ocsvm = detect_svm(&pruned, config)?;
    w.write(OCSVM_REPORT_CSV, &ocsvm.to_csv_string())?;
    let iforest = detect_iforest(&pruned, config)?;
    w.write(IFOREST_REPORT_CSV, &iforest.to_csv_string())?;

    for (name, svg) in plots(&embedding, &raw, &[&ocsvm, &iforest], &config.radius_features)? {
        w.write(&name, &svg)?;
    }
    Ok(PipelineSummary {
        n_docs: docs.len(),
        artifacts: w.commit()?,
        ocsvm,
        iforest,
        embedding,
    })
}

fn read_features(path: &Path, stage: Stage) -> Result<FeatureMatrix, PipelineError> {
    FeatureMatrix::read_csv(path).at(stage)
}

/// The standardized analysis matrix from a features CSV: raw sixteen
/// columns are pruned and standardized, anything else is used as is.
fn analysis_matrix(path: &Path, stage: Stage) -> Result<FeatureMatrix, PipelineError> {
    let m = read_features(path, stage)?;
    if m.ncols() == features::Feature::ALL.len() {
        features::prune_and_standardize(&m).at(stage)
    } else {
        Ok(m)
    }
}

/// Runs one stage on its own, reading the previous stage's CSV from
/// `input` (or the default file in the output directory).
pub fn run_stage(stage: Stage, config: &PipelineConfig, input: Option<&Path>) -> Result<Vec<PathBuf>, PipelineError> {
    let out = &config.out;
    let input_or = |name: &str| input.map_or_else(|| out.join(name), Path::to_path_buf);
    let mut w = ArtifactWriter::new(out)?;
    match stage {
        Stage::Ingest => {
            let docs = ingest(config.manifest_path()?)?;
            w.write(DOCUMENTS_CSV, &documents_csv(&docs))?;
            w.write(CORPUS_STATS_CSV, &corpus_stats_csv(&docs))?;
        }
        Stage::Extract => {
            let manifest = input.map_or_else(|| config.manifest_path().map(Path::to_path_buf), |p| Ok(p.to_path_buf()))?;
            let raw = extract(&ingest(&manifest)?)?;
            w.write(FEATURES_CSV, &raw.to_csv_string())?;
        }
        Stage::Correlate => {
            let raw = read_features(&input_or(FEATURES_CSV), stage)?;
            let (corr, pruned) = correlate(&raw)?;
            w.write(CORRELATION_CSV, &features::correlation_csv(&raw.feature_names, &corr))?;
            w.write(PRUNED_CSV, &pruned.to_csv_string())?;
        }
        Stage::Embed => {
            let pruned = analysis_matrix(&input_or(PRUNED_CSV), stage)?;
            let e = embed(&pruned, &config.tsne)?;
            w.write(EMBEDDING_CSV, &e.to_csv_string())?;
            w.write(KL_TRACE_CSV, &e.kl_trace_csv())?;
        }
        Stage::DetectSvm => {
            let pruned = analysis_matrix(&input_or(PRUNED_CSV), stage)?;
            w.write(OCSVM_REPORT_CSV, &detect_svm(&pruned, config)?.to_csv_string())?;
        }
        Stage::DetectIforest => {
            let pruned = analysis_matrix(&input_or(PRUNED_CSV), stage)?;
            w.write(IFOREST_REPORT_CSV, &detect_iforest(&pruned, config)?.to_csv_string())?;
        }
        Stage::Plot => {
            let embedding = Embedding::read_csv(&input_or(EMBEDDING_CSV)).at(stage)?;
            let raw = read_features(&out.join(FEATURES_CSV), stage)?;
            let mut reports = Vec::new();
            for name in [OCSVM_REPORT_CSV, IFOREST_REPORT_CSV] {
                let path = out.join(name);
                if path.exists() {
                    reports.push(AnomalyReport::read_csv(&path).at(stage)?);
                }
            }
            let refs: Vec<&AnomalyReport> = reports.iter().collect();
            for (name, svg) in plots(&embedding, &raw, &refs, &config.radius_features)? {
                w.write(&name, &svg)?;
            }
        }
        Stage::Synth => {
            let docs = synth::generate(&config.synth).at(stage)?;
            let manifest = synth::write_corpus(&docs, out).at(stage)?;
            return Ok(vec![manifest]);
        }
        Stage::Config | Stage::Write => {
            return Err(config_error(format!("`{stage}` is not a runnable stage")));
        }
    }
    w.commit()
}
