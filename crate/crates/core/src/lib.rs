//! Linguistic feature drift and unsupervised anomaly detection over dated
//! text corpora.
//!
//! A corpus is a manifest of dated documents. Each document is reduced to
//! sixteen lexical, richness and readability features ([`features`]); a
//! nine-feature standardized subset is embedded with exact t-SNE ([`tsne`])
//! and scored by a one-class SVM and an isolation forest ([`anomaly`]).
//! [`pipeline`] ties the stages together and [`plot`] renders SVG figures.

pub mod anomaly;
pub mod corpus;
pub mod features;
pub mod pipeline;
pub mod plot;
pub mod postag;
pub mod synth;
pub mod textnorm;
pub mod tsne;
