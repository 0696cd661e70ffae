pub mod baseline;
pub mod config;
pub mod decluster;
pub mod error;
pub mod gpd;
pub mod io;
pub mod joint;
pub mod logistic;
pub mod optim;
pub mod pipeline;
pub mod poisson;
pub mod quadrature;
pub mod report;
pub mod series;
pub mod stats;
pub mod synth;
pub mod threshold;
pub mod transforms;
pub mod ugpd;
pub mod validation;

pub use error::{Error, Result};
