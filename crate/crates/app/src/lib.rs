//! Deployment surface for the circularity models: building-file ingestion,
//! the `/v1` HTTP service and the `democirc` command line.

pub mod api;
pub mod building;
pub mod cli;
pub mod service;
