//! A sequential-decision workbench for a periodic 1-D foraging track: a
//! receding-horizon planner with learned reward and return models, time-aware
//! reinforcement-learning baselines, an exact dynamic-programming oracle, and
//! an experiment harness that measures prospective regret against it.

pub mod baselines;
pub mod embed;
pub mod env;
pub mod error;
pub mod harness;
pub mod learners;
pub mod oracle;
pub mod planner;

pub use error::{Error, Result};
