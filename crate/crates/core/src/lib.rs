//! Core library for language-guided multi-point navigation: world maps,
//! model backends, prompting, the teacher-student iteration loop, grid
//! navigation, metrics and dataset curation.

pub mod backend;
pub mod dataset;
pub mod extract;
pub mod iteration;
pub mod metrics;
pub mod navsim;
pub mod output;
pub mod prompting;
pub mod task;
pub mod world;
