//! Twofold video hashing.
//!
//! A reference video is summarized twice: by a time series of per-frame DCT
//! hashes, used to undo temporal desynchronization with dynamic time warping,
//! and by a flow hash built from optical flow between temporally averaged
//! frames. A query is first aligned to the reference, then hashed, and the two
//! resulting distances can be fused with weights learned from labeled pairs.
//!
//! | module | role |
//! |---|---|
//! | [`video`] | ingestion (raw, Y4M, PGM sequences) and normalization |
//! | [`frame_hash`] | per-frame DCT hashes |
//! | [`dtw`] | alignment, matching intervals and resynchronization |
//! | [`flow`] | TIRI averaging, Horn-Schunck flow, orientation histograms |
//! | [`boost`] | flow-hash distance and fused-distance training |
//! | [`attacks`] | spatial, temporal and combined attacks |
//! | [`eval`] | error rates, ROC, histograms and the experiment driver |
//! | [`store`] | on-disk hash records |
//! | [`pipeline`] | configuration and query comparison |
//! | [`cli`] | the `tvh` command line |
//!
//! Runnable walkthroughs live in the crate's `examples/` directory.

pub mod attacks;
pub mod boost;
pub mod cli;
pub mod dtw;
pub mod error;
pub mod eval;
pub mod flow;
pub mod frame;
pub mod frame_hash;
pub mod pipeline;
pub mod store;
pub mod synthetic;
pub mod video;

pub use error::{Error, Result};
pub use frame::Frame;
pub use video::{Fps, IngestConfig, VideoTensor};
