pub mod autodiff;
pub mod chem;
pub mod cli;
pub mod dynamics;
pub mod graphs;
pub mod metrics;
pub mod potential;
pub mod scanner;
pub mod trainer;
pub mod util;
