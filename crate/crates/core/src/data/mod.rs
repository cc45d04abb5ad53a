//! Load panels, per-document text embeddings, masked daily text memories,
//! sliding windows and date-based splits.

mod covariates;
mod io;
mod panel;
mod split;
pub mod synth;
mod text;
mod window;

pub use covariates::{read_covariates_csv, write_covariates_csv, Covariates};
pub use io::{file_digest, Manifest, ManifestEntry};
pub use split::ZScore;
pub use panel::{read_load_csv, write_load_csv, LoadPanel, SLOTS_PER_DAY};
pub use split::{fit_norm, split_by_forecast_end, NormStats, SplitBoundaries, Splits};
pub use text::{
    aggregate_daily, aggregate_policy, broadcast_to_halfhour, build_memory_store,
    encode_document_fallback, evenly_slice, map_region, read_embeddings_csv, read_memory_csv,
    write_embeddings_csv, write_memory_csv, DailyEntry, DocumentRecord, MemoryStore,
    PolicyDecay, RegionTag, Source,
};
pub use window::{make_windows, DayText, WindowConfig, WindowSample};
