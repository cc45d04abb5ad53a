pub mod attr;
pub mod eval;
pub mod forecast;
pub mod hopfield;
pub mod prepare;
pub mod synth;
pub mod train;

use std::path::PathBuf;

use crate::config::Settings;

/// Resolved settings plus the base output directory.
pub struct Ctx {
    pub settings: Settings,
    pub out: PathBuf,
}
