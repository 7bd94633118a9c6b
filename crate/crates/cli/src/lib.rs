//! IO, file formats, and the experiment harness around `fsn-core`.

pub mod commands;
pub mod datagen;
pub mod dataset;
pub mod formats;
pub mod pipeline;
pub mod specdoc;
pub mod sweep;
