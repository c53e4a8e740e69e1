//! Weather4cast-shaped samples: channel catalog, feature selection, sample
//! assembly, a synthetic region generator and the on-disk format.

pub mod blob;
mod channels;
mod features;
mod io;
mod region;
mod samples;
mod synth;

pub use channels::{Channel, ChannelCatalog, ChannelInfo, FillPolicy, StaticChannel, CT_CLASSES};
pub use features::{CtEncoding, Feature, FeaturePreset, FeatureSpec, INPUT_FRAMES};
pub use io::{
    read_dataset, read_manifest, write_dataset, ChannelEntry, DatasetManifest, DayEntry, FileEntry, StaticEntry,
    DATASET_FORMAT_VERSION, DATASET_MANIFEST,
};
pub use region::{ChannelSeries, DayRecord, FrameView, RegionDataset, MAX_FRAMES_PER_DAY};
pub use samples::{
    assemble_input, build_window, denormalize_targets, extract_targets, interpolate_temporal, window_split,
    window_starts, zero_fill, PreparedDay, Provenance, SampleWindow, WINDOW_FRAMES,
};
pub use synth::{synth_generate, synth_regions, SynthConfig};
