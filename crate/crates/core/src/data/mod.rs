//! Video containers, frame-level labels, dataset loading and clip windowing.

mod dataset;
mod labels;
pub mod raw;
mod resize;
mod synth;
mod video;
mod window;

pub use dataset::{
    load_dataset, load_video_dir, write_video_dir, DatasetManifest, PreprocessConfig, Split, LABELS_FILE,
};
pub use labels::{labels_to_csv, parse_labels, parse_labels_str, write_labels, LABELS_HEADER};
pub use resize::resize_bilinear;
pub use synth::{complement_spans, parse_spans, synth_moving_dot, SynthConfig};
pub use video::{LabelSeries, VideoSequence, DEFAULT_FPS};
pub use window::{window_clips, window_starts, ClipWindow};
