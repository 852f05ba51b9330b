//! Embeds three Gaussian clusters in nine dimensions with t-SNE and prints
//! the KL divergence over time and the cluster silhouette.
//!
//! cargo run --release --example tsne_embedding

use lingdrift::tsne::{run_array, silhouette, TsneConfig};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let normal = Normal::new(0.0, 1.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 45;
    let labels: Vec<usize> = (0..n).map(|i| i / 15).collect();
    let x = Array2::from_shape_fn((n, 9), |(i, k)| {
        let center = if k == labels[i] { 12.0 } else { 0.0 };
        center + normal.sample(&mut rng)
    });
    let ids: Vec<String> = (0..n).map(|i| format!("point-{i:02}")).collect();

    let config = TsneConfig { perplexity: 8.0, ..TsneConfig::default() };
    let embedding = run_array(&ids, x.view(), &config)?;
    for iter in [0, 99, 100, 250, 500, config.n_iters - 1] {
        println!("iter {iter:4}: KL {:.4}", embedding.kl_trace[iter]);
    }
    println!("final KL {:.4}", embedding.final_kl);
    println!("silhouette {:.3}", silhouette(embedding.y.view(), &labels));
    print!("{}", &embedding.to_csv_string()[..200]);
    println!("...");
    Ok(())
}
