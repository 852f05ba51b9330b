//! Extracts features from a small synthetic corpus and prints the
//! correlation of each analysis feature with the others, then the pruned,
//! standardized matrix shape.
//!
//! cargo run --release --example correlate_features

use lingdrift::corpus::{load_corpus, load_manifest};
use lingdrift::features::{correlation_matrix, prune_and_standardize, Feature, FeatureExtractor, FeatureMatrix};
use lingdrift::synth::{generate, write_corpus, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("lingdrift-correlate");
    let cfg = SynthConfig { n_docs: 30, decline_start_index: 20, ..SynthConfig::default() };
    let manifest = write_corpus(&generate(&cfg)?, &dir)?;
    let docs = load_corpus(&load_manifest(&manifest)?)?;

    let extractor = FeatureExtractor::default();
    let vectors = docs
        .iter()
        .map(|d| extractor.extract(&d.id, &d.raw_text))
        .collect::<Result<Vec<_>, _>>()?;
    let raw = FeatureMatrix::from_vectors(&vectors);
    let corr = correlation_matrix(&raw)?;

    let kept: Vec<usize> = Feature::PRUNED.iter().map(|f| raw.column_index(f.name()).unwrap()).collect();
    print!("{:24}", "");
    for &j in &kept {
        print!("{:>7}", &raw.feature_names[j][..raw.feature_names[j].len().min(6)]);
    }
    println!();
    for &i in &kept {
        print!("{:24}", raw.feature_names[i]);
        for &j in &kept {
            print!("{:>7.2}", corr[[i, j]]);
        }
        println!();
    }
    let pruned = prune_and_standardize(&raw)?;
    println!("analysis matrix: {} documents x {} features", pruned.nrows(), pruned.ncols());
    Ok(())
}
