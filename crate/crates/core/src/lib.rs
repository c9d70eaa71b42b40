pub mod cloud;
pub mod detector;
pub mod embedding;
pub mod eval;
pub mod mst;
pub mod phd;
pub mod rng;
