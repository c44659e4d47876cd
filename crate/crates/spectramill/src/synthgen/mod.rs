//! Seeded synthetic-spectrum generation.
//!
//! Every sample is a pure function of (config, index): the generator keys an
//! independent ChaCha stream per sample index, so datasets are reproducible
//! bit for bit, order-independent, and safe to generate from any number of
//! workers. The draw order inside a sample is part of the format and is
//! documented in `gen_sample`.

mod augment;
mod baseline;
mod config;
mod dataset;
mod noise;
mod peaks;
mod sample;

pub use augment::{peak_shadow, spectral_tweak};
pub use baseline::{
    apply_baseline_shift, gen_baseline, BaselinePlan, ChunkKind, ChunkPlan, RegionPlan,
    DRIFT_PER_SLOPE,
};
pub use config::{BetaNoise, GenConfig, ShiftProbs, Task};
pub use dataset::{
    file_digest, gen_dataset, read_dataset, write_dataset, DatasetFormat, DatasetHeader,
};
pub use noise::{add_noise, beta_layer, gaussian_layer};
pub use peaks::gen_peaks;
pub use sample::{gen_sample, raman_like, SampleRecord};
