//! Multi-stage training: base decoder on random frames, later stages on the
//! words the earlier stages leave uncorrected.

pub mod config;
pub mod dataset;
pub mod schedule;
pub mod training;

pub use config::{run_pipeline, PipelineConfig, PipelineOutcome, SourceConfig, StageConfig};
pub use dataset::{collect_uncorrected, draw_frame, split_dataset, CollectConfig, Dataset, DatasetHeader, Sample};
pub use schedule::substage_windows;
pub use training::{
    evaluate_test_fer, train_stage, Arithmetic, EpochLog, SampleSource, Schedule, StageReport, SubstageResult,
    TrainerConfig,
};
