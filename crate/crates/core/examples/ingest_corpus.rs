//! Loads a corpus manifest (`path,date,title`) and prints document ids and
//! per-year counts.
//!
//! cargo run --example ingest_corpus <manifest.csv>

use lingdrift::corpus::{corpus_stats, load_corpus, load_manifest};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args().nth(1).ok_or("usage: ingest_corpus <manifest.csv>")?;
    let docs = load_corpus(&load_manifest(&path)?)?;
    for doc in &docs {
        println!("{:48} {:>7} bytes  {}", doc.id, doc.raw_text.len(), doc.title);
    }
    println!();
    for (year, count) in corpus_stats(&docs) {
        println!("{year}: {count}");
    }
    println!("total: {}", docs.len());
    Ok(())
}
