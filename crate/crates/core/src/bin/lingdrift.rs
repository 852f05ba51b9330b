use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgMatches, Command};
use lingdrift::pipeline::{run_pipeline, run_stage, PipelineConfig, PipelineError, Stage};

const STAGES: [(&str, Stage, &str); 9] = [
    ("ingest", Stage::Ingest, "Load the manifest and write documents.csv and corpus_stats.csv"),
    ("extract", Stage::Extract, "Compute the sixteen features per document (features.csv)"),
    ("correlate", Stage::Correlate, "Correlation matrix and pruned, standardized features"),
    ("embed", Stage::Embed, "t-SNE embedding of the pruned features"),
    ("detect-svm", Stage::DetectSvm, "One-class SVM anomaly report"),
    ("detect-iforest", Stage::DetectIforest, "Isolation forest anomaly report"),
    ("plot", Stage::Plot, "Scatter and timeline SVGs from earlier outputs"),
    ("pipeline", Stage::Config, "Run every stage from the manifest to the figures"),
    ("synth", Stage::Synth, "Write a synthetic corpus with a planted decline"),
];

fn stage_command(name: &'static str, about: &'static str) -> Command {
    let mut cmd = Command::new(name)
        .about(about)
        .arg(Arg::new("config").long("config").value_name("PATH").help("key = value configuration file"))
        .arg(
            Arg::new("input")
                .long("input")
                .value_name("PATH")
                .help("Stage input instead of the default file in --out"),
        );
    for key in PipelineConfig::KEYS {
        cmd = cmd.arg(Arg::new(key).long(key).value_name("VALUE").help(key_help(key)));
    }
    cmd
}

fn key_help(key: &str) -> &'static str {
    match key {
        "manifest" => "Corpus manifest CSV (path,date,title)",
        "out" => "Output directory [default: out]",
        "seed" => "Seed for t-SNE, isolation forest and synth",
        "tsne.perplexity" => "Effective neighbor count [default: 4]",
        "tsne.learning_rate" => "[default: 100]",
        "tsne.n_iters" => "[default: 1000]",
        "tsne.exaggeration_factor" => "[default: 4]",
        "tsne.exaggeration_iters" => "[default: 100]",
        "tsne.initial_momentum" => "[default: 0.5]",
        "tsne.final_momentum" => "[default: 0.8]",
        "tsne.momentum_switch_iter" => "[default: 250]",
        "tsne.seed" => "",
        "tsne.sigma_tolerance" => "Relative perplexity tolerance [default: 1e-5]",
        "tsne.adaptive_gains" => "Per-coordinate adaptive step sizes (true/false) [default: true]",
        "tsne.plain_descent" => "Disable momentum, exaggeration and gains (true/false)",
        "ocsvm.nu" => "[default: 0.5]",
        "ocsvm.gamma" => "RBF coefficient or `auto` [default: auto]",
        "iforest.n_trees" => "[default: 100]",
        "iforest.psi" => "Subsample size or `auto` = min(256, N)",
        "iforest.contamination" => "Fraction of documents flagged [default: 0.1]",
        "iforest.seed" => "",
        "plot.radius_features" => "Comma-separated features sizing the scatter circles",
        "synth.n_docs" => "[default: 60]",
        "synth.decline_start_index" => "Zero-based first declined document [default: 44]",
        "synth.pronoun_factor" => "Pronoun-to-noun inflation [default: 2]",
        "synth.vocab_shrink" => "Vocabulary fraction removed [default: 0.4]",
        "synth.tokens_per_doc" => "[default: 900]",
        _ => "",
    }
}

fn cli() -> Command {
    STAGES.iter().fold(
        Command::new("lingdrift")
            .about("Linguistic feature drift and anomaly detection for dated transcripts")
            .subcommand_required(true)
            .arg_required_else_help(true),
        |cmd, &(name, _, about)| cmd.subcommand(stage_command(name, about)),
    )
}

fn load_config(args: &ArgMatches) -> Result<PipelineConfig, PipelineError> {
    let mut config = match args.get_one::<String>("config") {
        Some(path) => PipelineConfig::load(&PathBuf::from(path))?,
        None => PipelineConfig::default(),
    };
    for key in PipelineConfig::KEYS {
        if let Some(value) = args.get_one::<String>(key) {
            config.set(key, value).map_err(|e| PipelineError {
                stage: Stage::Config,
                source: e.into(),
            })?;
        }
    }
    Ok(config)
}

fn run(name: &str, args: &ArgMatches) -> Result<Vec<PathBuf>, PipelineError> {
    let config = load_config(args)?;
    let input = args.get_one::<String>("input").map(PathBuf::from);
    if name == "pipeline" {
        let summary = run_pipeline(&config)?;
        println!(
            "{} documents; one-class SVM flagged {}, isolation forest flagged {}",
            summary.n_docs,
            summary.ocsvm.n_flagged(),
            summary.iforest.n_flagged()
        );
        return Ok(summary.artifacts);
    }
    let stage = STAGES.iter().find(|(n, ..)| *n == name).expect("known subcommand").1;
    run_stage(stage, &config, input.as_deref())
}

fn main() -> ExitCode {
    let matches = cli().get_matches();
    let (name, args) = matches.subcommand().expect("subcommand required");
    match run(name, args) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("lingdrift: {e}");
            ExitCode::FAILURE
        }
    }
}
