//! Runs the pipeline on a synthetic corpus, then renders a custom scatter
//! plot sized by Honore's statistic and the isolation forest timeline.
//!
//! cargo run --release --example plot_figures [out_dir]

use std::path::PathBuf;

use lingdrift::pipeline::{run_pipeline, PipelineConfig, FEATURES_CSV};
use lingdrift::features::FeatureMatrix;
use lingdrift::plot::{scatter_svg, timeline_svg, ScatterSpec};
use lingdrift::synth::{generate, write_corpus, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("lingdrift-plots"), PathBuf::from);
    let manifest = write_corpus(&generate(&SynthConfig::default())?, &out.join("corpus"))?;
    let config = PipelineConfig {
        manifest: Some(manifest),
        out: out.join("results"),
        ..PipelineConfig::default()
    };
    let summary = run_pipeline(&config)?;
    let raw = FeatureMatrix::read_csv(&config.out.join(FEATURES_CSV))?;

    let spec = ScatterSpec {
        radius_range: (2.0, 14.0),
        title: Some("vocabulary richness (Honore)".into()),
        ..ScatterSpec::new("honore")
    };
    let scatter = out.join("honore.svg");
    scatter_svg(&summary.embedding, &raw, &spec, &scatter)?;
    let timeline = out.join("iforest_timeline.svg");
    timeline_svg(&summary.iforest, &timeline)?;
    println!("wrote {} and {}", scatter.display(), timeline.display());
    Ok(())
}
