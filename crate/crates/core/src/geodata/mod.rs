//! Georeferenced grid ingestion, harmonization and sample fusion.

mod format;
mod greenness;
mod grid;
mod normalize;
mod resample;
mod store;
mod temporal;
pub mod utm;
mod variable;

pub use format::{
    load_region, parse_grid_text, read_grid, write_grid, write_grid_text, AxisSpec, GridEntry, GridFile, Manifest,
    RegionSpec, SyntheticInfo,
};
pub use greenness::greenness_index;
pub use grid::{GeoGrid, Hemisphere, UtmGrid};
pub use normalize::{MinMax, NormalizationStats, ZScore};
pub use resample::{reproject_utm, resample_bilinear};
pub use store::{fuse_sample, normalize_window, raw_window, ChannelStack, FusedSample, GridStore, RegionAxes};
pub use temporal::{select_daily_reading, trend_diff};
pub use utm::{decimal_to_utm, utm_to_decimal};
pub use variable::{
    channel_fingerprint, channel_names, Group, VariableId, VariableSpec, CHANNEL_ORDER, DAILY_HOURS, LABEL_NAMES,
    NUM_CHANNELS, NUM_LABELS,
};
