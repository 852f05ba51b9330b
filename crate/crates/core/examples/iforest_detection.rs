//! Builds an isolation forest over dated feature rows, flags the top 10%
//! and writes an anomaly report CSV to stdout.
//!
//! cargo run --release --example iforest_detection

use chrono::{Days, NaiveDate};
use lingdrift::anomaly::{average_path_length, detect_iforest};
use lingdrift::features::FeatureMatrix;
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let normal = Normal::new(0.0, 1.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 40;
    let start = NaiveDate::from_ymd_opt(1984, 1, 1).ok_or("bad date")?;
    let ids: Vec<String> = (0..n).map(|i| format!("{}_week-{i:02}", start + Days::new(7 * i as u64))).collect();
    let mut values = Array2::from_shape_fn((n, 3), |_| normal.sample(&mut rng));
    values[[17, 0]] = 7.0;
    values[[31, 2]] = -6.5;
    let names = vec!["a".to_string(), "b".to_string(), "c".to_string()];
    let matrix = FeatureMatrix::new(ids, names, values);

    let report = detect_iforest(&matrix, 100, None, 0.1, 0)?;
    println!("c({n}) = {:.4}", average_path_length(n));
    print!("{}", report.to_csv_string());
    Ok(())
}
