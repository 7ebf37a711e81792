//! Experiment driver for pose-conditioned adversarial patches: presets,
//! pipeline stages, CSV/SVG outputs and table reports.

pub mod config;
pub mod csvio;
pub mod pipeline;
pub mod report;
pub mod svg;
