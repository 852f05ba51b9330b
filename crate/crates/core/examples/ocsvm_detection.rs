//! Fits a one-class SVM to Gaussian data with a few far-away points and
//! shows the support-vector and outlier fractions next to nu.
//!
//! cargo run --release --example ocsvm_detection [nu]

use lingdrift::anomaly::{default_gamma, fit_ocsvm, ocsvm_decision};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let nu: f64 = std::env::args().nth(1).map_or(Ok(0.1), |s| s.parse())?;
    let normal = Normal::new(0.0, 1.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 120;
    let mut x = Array2::from_shape_fn((n, 9), |_| normal.sample(&mut rng));
    for i in n - 4..n {
        x.row_mut(i).mapv_inplace(|v| v + 10.0);
    }

    let gamma = default_gamma(x.view())?;
    let model = fit_ocsvm(x.view(), nu, gamma)?;
    let decisions: Vec<f64> = x.rows().into_iter().map(|r| ocsvm_decision(&model, r)).collect();
    let outliers: Vec<usize> = (0..n).filter(|&i| decisions[i] < 0.0).collect();
    println!("nu {nu}, gamma {gamma:.4}, rho {:.4}, {} SMO updates", model.rho, model.updates);
    println!("support vectors: {} ({:.1}%)", model.n_support(), 100.0 * model.n_support() as f64 / n as f64);
    println!("outliers: {} ({:.1}%)", outliers.len(), 100.0 * outliers.len() as f64 / n as f64);
    println!("planted rows {:?} decisions {:?}", (n - 4..n).collect::<Vec<_>>(), &decisions[n - 4..]);
    Ok(())
}
