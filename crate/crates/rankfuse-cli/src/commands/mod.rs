pub mod baseline;
pub mod elo;
pub mod eval;
pub mod fit;
pub mod merge;
pub mod simfilter;
pub mod synth;
pub mod tokenize;
