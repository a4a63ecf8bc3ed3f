pub mod audio;
pub mod preprocess;
pub mod resample;
pub mod rttm;
pub mod spectrum;
pub mod augment;
pub mod corpus;
pub mod vad;
pub mod embed;
pub mod cluster;
pub mod metrics;
pub mod losses;
pub mod pipeline;
