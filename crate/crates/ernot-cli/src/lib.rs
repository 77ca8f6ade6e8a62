//! Standard-library companion to `ernot`: benchmark definitions, file
//! formats, checkpoints, the scaling study, and the command-line
//! interface.

pub mod bench;
pub mod checkpoint;
pub mod config;
pub mod report;
pub mod scaling;
