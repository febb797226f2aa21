//! End-to-end composition: hash a reference, then align, re-hash and score a query.

use std::path::{Path, PathBuf};

use crate::boost::{self, BoostModel};
use crate::dtw::{self, DtwOptions, MatchTable};
use crate::error::{Error, Result};
use crate::flow::{flow_hash_or_zero, FlowHashConfig};
use crate::frame_hash::extract_frame_hashes;
use crate::store::{Fingerprint, HashRecord};
use crate::video::{Fps, IngestConfig, VideoTensor};

#[derive(Clone, Debug, PartialEq)]
#[derive(Default)]
pub struct PipelineConfig {
    pub ingest: IngestConfig,
    pub flow: FlowHashConfig,
    pub dtw: DtwOptions,
    pub boost_model: Option<PathBuf>,
    pub seed: u64,
}


impl PipelineConfig {
    /// Canonical description of every setting that changes hash values.
    pub fn hash_settings(&self) -> String {
        let i = &self.ingest;
        let f = &self.flow;
        format!(
            "tvh-hash v1; size={}x{}; fps={}/{}; bins={}; segments={}; overlap={}; hs_lambda={:?}; hs_iters={}",
            i.target_height,
            i.target_width,
            i.target_fps.num,
            i.target_fps.den,
            f.bins,
            f.segments,
            f.overlap,
            f.flow.lambda,
            f.flow.iterations
        )
    }

    pub fn fingerprint(&self) -> Fingerprint {
        Fingerprint::of(&self.hash_settings())
    }

    /// Applies one `key = value` setting, as found in config files.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = || Error::InvalidConfig(format!("bad value {value:?} for {key}"));
        fn num<T: std::str::FromStr>(v: &str, bad: impl Fn() -> Error) -> Result<T> {
            v.parse().map_err(|_| bad())
        }
        match key {
            "height" => self.ingest.target_height = num(value, bad)?,
            "width" => self.ingest.target_width = num(value, bad)?,
            "fps" => self.ingest.target_fps = value.parse::<Fps>()?,
            "sequence_fps" => self.ingest.sequence_fps = value.parse::<Fps>()?,
            "bins" => self.flow.bins = num(value, bad)?,
            "segments" => self.flow.segments = num(value, bad)?,
            "overlap" => self.flow.overlap = num(value, bad)?,
            "hs_lambda" => self.flow.flow.lambda = num(value, bad)?,
            "hs_iters" => self.flow.flow.iterations = num(value, bad)?,
            "dtw_band" => self.dtw.band = if value == "none" { None } else { Some(num(value, bad)?) },
            "model" => self.boost_model = Some(PathBuf::from(value)),
            "seed" => self.seed = num(value, bad)?,
            _ => return Err(Error::InvalidConfig(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn apply_config_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("config line {} is not key=value", n + 1)))?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn load_config(&mut self, path: impl AsRef<Path>) -> Result<()> {
        self.apply_config_text(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.ingest.validate()?;
        self.flow.validate()
    }
}

/// Frame hashes and flow hash of a normalized video.
pub fn hash_video(v: &VideoTensor, cfg: &PipelineConfig) -> Result<HashRecord> {
    Ok(HashRecord {
        source_id: v.source_id().to_owned(),
        frame_hashes: extract_frame_hashes(v)?,
        flow_hash: flow_hash_or_zero(v, &cfg.flow)?,
        config_fingerprint: cfg.fingerprint(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub d_dtw: f64,
    pub d_fh: f64,
    pub d_boost: Option<f64>,
    pub table: Option<MatchTable>,
}

impl Comparison {
    /// The fused distance when a model was given, otherwise the flow-hash distance.
    pub fn decision_distance(&self) -> f64 {
        self.d_boost.unwrap_or(self.d_fh)
    }

    pub fn is_match(&self, tau: f64) -> bool {
        self.decision_distance() < tau
    }
}

/// Aligns `query` to the reference, hashes the aligned query, and reports
/// all distances. With `sync == false` the query is hashed as is.
pub fn compare(
    reference: &HashRecord,
    query: &VideoTensor,
    cfg: &PipelineConfig,
    model: Option<&BoostModel>,
    sync: bool,
) -> Result<Comparison> {
    reference.ensure_fingerprint(&cfg.fingerprint(), query.source_id())?;
    let query_hashes = extract_frame_hashes(query)?;
    let (d_dtw, aligned, table) = if sync {
        let synced = dtw::align_and_synchronize(query, &query_hashes, &reference.frame_hashes, cfg.dtw)?;
        (synced.path.total_cost, synced.video, Some(synced.table))
    } else {
        (dtw::sync_distance(&query_hashes, &reference.frame_hashes)?, query.clone(), None)
    };
    let d_fh = boost::d_fh(&reference.flow_hash, &flow_hash_or_zero(&aligned, &cfg.flow)?)?;
    Ok(Comparison { d_dtw, d_fh, d_boost: model.map(|m| m.score(d_dtw, d_fh)), table })
}
