//! Generates a 60-document corpus whose last 16 documents carry a planted
//! decline, runs the full pipeline and reports how well each detector and
//! the embedding pick the declined documents out.
//!
//! cargo run --release --example synthetic_decline [out_dir]

use std::path::PathBuf;

use lingdrift::pipeline::{run_pipeline, PipelineConfig};
use lingdrift::synth::{generate, write_corpus, SynthConfig};
use lingdrift::tsne::silhouette;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("lingdrift-decline"), PathBuf::from);
    let synth = SynthConfig::default();
    let docs = generate(&synth)?;
    let manifest = write_corpus(&docs, &out.join("corpus"))?;

    let mut config = PipelineConfig {
        manifest: Some(manifest),
        out: out.join("results"),
        ..PipelineConfig::default()
    };
    config.set("iforest.contamination", "0.25")?;
    let summary = run_pipeline(&config)?;

    let declined: Vec<bool> = docs.iter().map(|d| d.declined).collect();
    let n_declined = declined.iter().filter(|&&d| d).count();
    let n_healthy = declined.len() - n_declined;
    for report in [&summary.ocsvm, &summary.iforest] {
        let hit = report.flags.iter().zip(&declined).filter(|(&f, &d)| f && d).count();
        let false_alarm = report.flags.iter().zip(&declined).filter(|(&f, &d)| f && !d).count();
        println!(
            "{:8} flagged {:2}: {:5.1}% of declined, {:5.1}% of healthy",
            report.method.as_str(),
            report.n_flagged(),
            100.0 * hit as f64 / n_declined as f64,
            100.0 * false_alarm as f64 / n_healthy as f64
        );
    }
    let labels: Vec<usize> = declined.iter().map(|&d| usize::from(d)).collect();
    println!("embedding silhouette {:.3}", silhouette(summary.embedding.y.view(), &labels));
    println!("{} artifacts in {}", summary.artifacts.len(), config.out.display());
    Ok(())
}
