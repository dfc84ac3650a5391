pub mod divergence;
pub mod kmeans;
pub mod linalg;
pub mod markov;
pub mod metrics;
pub mod recovery;
pub mod sbm;
pub mod spectral;
pub mod tsbm;
