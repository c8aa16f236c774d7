pub mod analyze;
pub mod explain;
pub mod preprocess;
pub mod render;
pub mod robustness;
