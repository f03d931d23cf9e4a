pub mod basis;
pub mod cli;
pub mod dpalign;
pub mod error;
pub mod estimator;
pub mod gridfn;
pub mod inference;
pub mod synthgen;
pub mod warping;
