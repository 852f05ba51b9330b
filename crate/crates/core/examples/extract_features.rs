//! Prints the sixteen linguistic features of one text file, or of a short
//! built-in passage when no path is given.
//!
//! cargo run --example extract_features [file.txt]

use lingdrift::features::{Feature, FeatureExtractor};

const SAMPLE: &str = "We have come a long way together. I think we can be proud of what we built, \
and I know that you will carry it forward. Our country is stronger today because people like you \
worked hard every single day. Thank you, and God bless you all.";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(path)?,
        None => SAMPLE.to_string(),
    };
    let extractor = FeatureExtractor::default();
    let (doc, tagged) = extractor.prepare("sample", &text);
    println!("{} sentences, {} tokens", doc.sentences.len(), doc.word_count());
    println!("{:?}", lingdrift::postag::tag_histogram(&tagged));

    let vector = extractor.extract("sample", &text)?;
    for feature in Feature::ALL {
        let marker = if Feature::PRUNED.contains(&feature) { "*" } else { " " };
        println!("{marker} {:26} {:>12.4}", feature.name(), vector.get(feature));
    }
    println!("(* = kept in the nine-feature analysis set)");
    Ok(())
}
