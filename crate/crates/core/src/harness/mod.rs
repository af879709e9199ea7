//! Experiment orchestration, CSV emission, and plotting.
