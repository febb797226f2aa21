//! Detection error rates, ROC curves and distance histograms, plus the
//! experiment driver that attacks a corpus and scores every pair.
//!
//! A pair is declared a match when its distance falls below the threshold
//! `tau`. Over a labeled set of pairs:
//!
//! * miss rate `P_M(tau)`: fraction of matching pairs with distance `>= tau`,
//! * false-alarm rate `P_FA(tau)`: fraction of nonmatching pairs with distance `< tau`.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::attacks::{self, AttackSpec, AttackedVideo};
use crate::boost::{self, BoostModel, DistancePair, Label, TripletSet};
use crate::dtw::{self, MatchTable};
use crate::error::{Error, Result};
use crate::frame_hash::{extract_frame_hashes, FrameHashSeries};
use crate::flow::{flow_hash_or_zero, FlowHash};
use crate::pipeline::PipelineConfig;
use crate::video::VideoTensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Dtw,
    Fh,
    Boost,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Dtw => "dtw",
            Metric::Fh => "fh",
            Metric::Boost => "boost",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dtw" => Ok(Metric::Dtw),
            "fh" => Ok(Metric::Fh),
            "boost" => Ok(Metric::Boost),
            _ => Err(Error::InvalidConfig(format!("unknown metric {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoredPair {
    pub distance: f64,
    pub label: Label,
}

impl ScoredPair {
    pub fn new(distance: f64, label: Label) -> Self {
        ScoredPair { distance, label }
    }
}

fn class_counts(pairs: &[ScoredPair]) -> Result<(usize, usize)> {
    let matching = pairs.iter().filter(|p| p.label == Label::Matching).count();
    let nonmatching = pairs.len() - matching;
    if matching == 0 {
        return Err(Error::MissingLabelClass("matching"));
    }
    if nonmatching == 0 {
        return Err(Error::MissingLabelClass("nonmatching"));
    }
    if pairs.iter().any(|p| !p.distance.is_finite()) {
        return Err(Error::InvalidConfig("scored distances must be finite".into()));
    }
    Ok((matching, nonmatching))
}

/// `(P_M, P_FA)` at threshold `tau`.
pub fn error_rates(pairs: &[ScoredPair], tau: f64) -> Result<(f64, f64)> {
    let (n_match, n_non) = class_counts(pairs)?;
    let misses = pairs.iter().filter(|p| p.label == Label::Matching && p.distance >= tau).count();
    let alarms = pairs.iter().filter(|p| p.label == Label::Nonmatching && p.distance < tau).count();
    Ok((misses as f64 / n_match as f64, alarms as f64 / n_non as f64))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RocPoint {
    pub tau: f64,
    pub p_fa: f64,
    pub p_m: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RocCurve {
    /// Sorted by ascending `tau`, from `-inf` to `+inf`.
    pub points: Vec<RocPoint>,
    /// Trapezoidal area under `1 - P_M` against `P_FA`.
    pub auc: f64,
}

impl RocCurve {
    /// `tau,p_fa,p_m` with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau,p_fa,p_m\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{},{}", p.tau, p.p_fa, p.p_m);
        }
        out
    }
}

/// Sweeps `tau` over every distinct observed distance plus `-inf` and `+inf`.
pub fn roc(pairs: &[ScoredPair]) -> Result<RocCurve> {
    let (n_match, n_non) = class_counts(pairs)?;
    let mut sorted: Vec<ScoredPair> = pairs.to_vec();
    sorted.sort_by(|a, b| a.distance.total_cmp(&b.distance));

    let mut points = vec![RocPoint { tau: f64::NEG_INFINITY, p_fa: 0.0, p_m: 1.0 }];
    // running counts of pairs with distance strictly below the current tau
    let (mut below_match, mut below_non) = (0usize, 0usize);
    let mut k = 0;
    while k < sorted.len() {
        let tau = sorted[k].distance;
        points.push(RocPoint {
            tau,
            p_fa: below_non as f64 / n_non as f64,
            p_m: (n_match - below_match) as f64 / n_match as f64,
        });
        while k < sorted.len() && sorted[k].distance == tau {
            match sorted[k].label {
                Label::Matching => below_match += 1,
                Label::Nonmatching => below_non += 1,
            }
            k += 1;
        }
    }
    points.push(RocPoint { tau: f64::INFINITY, p_fa: 1.0, p_m: 0.0 });

    let auc = points
        .windows(2)
        .map(|w| (w[1].p_fa - w[0].p_fa) * ((1.0 - w[0].p_m) + (1.0 - w[1].p_m)) / 2.0)
        .sum();
    Ok(RocCurve { points, auc })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    /// `bins + 1` ascending edges.
    pub edges: Vec<f64>,
    pub matching: Vec<usize>,
    pub nonmatching: Vec<usize>,
}

impl Histogram {
    /// `bin_low,bin_high,count_matching,count_nonmatching` with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_low,bin_high,count_matching,count_nonmatching\n");
        for b in 0..self.matching.len() {
            let _ = writeln!(out, "{},{},{},{}", self.edges[b], self.edges[b + 1], self.matching[b], self.nonmatching[b]);
        }
        out
    }
}

/// Equal-width per-label histogram over the pooled range of distances.
/// With `normalize`, distances are first divided by the largest one.
pub fn histogram(pairs: &[ScoredPair], bins: usize, normalize: bool) -> Result<Histogram> {
    if bins < 2 {
        return Err(Error::InvalidConfig(format!("histogram needs at least 2 bins, got {bins}")));
    }
    let mut matching = vec![0; bins];
    let mut nonmatching = vec![0; bins];
    if pairs.is_empty() {
        let edges = (0..=bins).map(|b| b as f64 / bins as f64).collect();
        return Ok(Histogram { edges, matching, nonmatching });
    }
    let max = pairs.iter().map(|p| p.distance).fold(f64::NEG_INFINITY, f64::max);
    let scale = if normalize && max > 0.0 { max } else { 1.0 };
    let values: Vec<f64> = pairs.iter().map(|p| p.distance / scale).collect();
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    let edges = (0..=bins).map(|b| if b == bins { hi } else { lo + b as f64 * width }).collect();
    for (p, &x) in pairs.iter().zip(&values) {
        let bin = if width > 0.0 { (((x - lo) / width) as usize).min(bins - 1) } else { 0 };
        match p.label {
            Label::Matching => matching[bin] += 1,
            Label::Nonmatching => nonmatching[bin] += 1,
        }
    }
    Ok(Histogram { edges, matching, nonmatching })
}

/// How the query is realigned before its flow hash is taken.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SyncCase {
    /// DTW alignment against the reference of each pair.
    Dtw,
    /// Ground-truth realignment from the known dropped frames.
    Oracle,
    /// No realignment.
    None,
}

impl SyncCase {
    pub fn as_str(self) -> &'static str {
        match self {
            SyncCase::Dtw => "dtw",
            SyncCase::Oracle => "oracle",
            SyncCase::None => "none",
        }
    }
}

impl fmt::Display for SyncCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SyncCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dtw" => Ok(SyncCase::Dtw),
            "oracle" => Ok(SyncCase::Oracle),
            "none" | "random" => Ok(SyncCase::None),
            _ => Err(Error::InvalidConfig(format!("unknown sync case {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOptions {
    pub cases: Vec<SyncCase>,
    pub metrics: Vec<Metric>,
    pub histogram_bins: usize,
    pub boost_eps: f64,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        ExperimentOptions {
            cases: vec![SyncCase::Dtw, SyncCase::Oracle, SyncCase::None],
            metrics: vec![Metric::Dtw, Metric::Fh, Metric::Boost],
            histogram_bins: 20,
            boost_eps: boost::DEFAULT_EPS,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// One scored (reference, query) pair of an experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct PairRecord {
    pub pair: DistancePair,
    pub split: Split,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub metric: Metric,
    /// ROC over every pair; boosted distances use the test split only.
    pub roc: RocCurve,
    /// AUC restricted to the test split.
    pub auc_test: f64,
    pub histogram: Histogram,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CaseReport {
    pub case: SyncCase,
    pub pairs: Vec<PairRecord>,
    pub model: Option<BoostModel>,
    pub metrics: Vec<MetricReport>,
}

impl CaseReport {
    pub fn metric(&self, metric: Metric) -> Option<&MetricReport> {
        self.metrics.iter().find(|m| m.metric == metric)
    }

    pub fn auc(&self, metric: Metric) -> Option<f64> {
        self.metric(metric).map(|m| m.roc.auc)
    }

    /// `ref_id,query_id,label,split,d_dtw,d_fh`, readable by [`read_pairs_csv`].
    pub fn pairs_csv(&self) -> String {
        let mut out = String::from(PAIRS_HEADER);
        out.push('\n');
        for r in &self.pairs {
            let p = &r.pair;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                p.reference_id,
                p.query_id,
                p.label.as_str(),
                r.split.as_str(),
                p.d_dtw,
                p.d_fh
            );
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub attack: AttackSpec,
    pub cases: Vec<CaseReport>,
}

impl ExperimentReport {
    pub fn case(&self, case: SyncCase) -> Option<&CaseReport> {
        self.cases.iter().find(|c| c.case == case)
    }

    /// `key=value` summary lines.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "attack={}", self.attack.kind);
        let _ = writeln!(out, "seed={}", self.attack.seed);
        for c in &self.cases {
            let _ = writeln!(out, "{}.pairs={}", c.case, c.pairs.len());
            for m in &c.metrics {
                let _ = writeln!(out, "{}.{}.auc={}", c.case, m.metric, m.roc.auc);
                let _ = writeln!(out, "{}.{}.auc_test={}", c.case, m.metric, m.auc_test);
            }
            if let Some(model) = &c.model {
                let _ = writeln!(out, "{}.boost.alpha1={}", c.case, model.alpha1);
                let _ = writeln!(out, "{}.boost.alpha2={}", c.case, model.alpha2);
                let _ = writeln!(out, "{}.boost.train_loss={}", c.case, model.train_loss);
            }
        }
        out
    }

    /// Writes `summary.txt` and per-case `pairs_*.csv`, `roc_*_*.csv`,
    /// `hist_*_*.csv` and `model_*.txt` files into `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        fs::write(dir.join("summary.txt"), self.summary())?;
        for c in &self.cases {
            fs::write(dir.join(format!("pairs_{}.csv", c.case)), c.pairs_csv())?;
            if let Some(model) = &c.model {
                model.save(dir.join(format!("model_{}.txt", c.case)))?;
            }
            for m in &c.metrics {
                fs::write(dir.join(format!("roc_{}_{}.csv", c.case, m.metric)), m.roc.to_csv())?;
                fs::write(dir.join(format!("hist_{}_{}.csv", c.case, m.metric)), m.histogram.to_csv())?;
            }
        }
        Ok(())
    }
}

pub const PAIRS_HEADER: &str = "ref_id,query_id,label,split,d_dtw,d_fh";

/// Parses a pairs file; returns each pair with its split column, if present.
pub fn read_pairs_csv(text: &str) -> Result<Vec<(DistancePair, Option<String>)>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines.next().ok_or_else(|| Error::CorruptStream("empty pairs file".into()))?.split(',').collect();
    let col = |name: &str| header.iter().position(|h| h.trim() == name);
    let (Some(r), Some(q), Some(l), Some(dd), Some(df)) = (col("ref_id"), col("query_id"), col("label"), col("d_dtw"), col("d_fh")) else {
        return Err(Error::CorruptStream(format!("pairs header must name ref_id, query_id, label, d_dtw, d_fh; got {header:?}")));
    };
    let split = col("split");
    lines
        .enumerate()
        .map(|(i, line)| {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != header.len() {
                return Err(Error::CorruptStream(format!("pairs line {} has {} fields", i + 2, fields.len())));
            }
            let num = |k: usize| {
                fields[k].parse::<f64>().map_err(|_| Error::CorruptStream(format!("bad number {:?} on line {}", fields[k], i + 2)))
            };
            let pair = DistancePair {
                reference_id: fields[r].to_owned(),
                query_id: fields[q].to_owned(),
                label: fields[l].parse()?,
                d_dtw: num(dd)?,
                d_fh: num(df)?,
            };
            Ok((pair, split.map(|s| fields[s].to_owned())))
        })
        .collect()
}

struct ReferenceHashes {
    frames: FrameHashSeries,
    flow: FlowHash,
}

struct Query {
    attacked: AttackedVideo,
    hashes: FrameHashSeries,
    source_len: usize,
}

/// Ground-truth match table: every surviving frame goes back to its source position.
pub fn oracle_table(attacked: &AttackedVideo, source_len: usize) -> MatchTable {
    MatchTable { rows: attacked.survivors(source_len).into_iter().enumerate().collect() }
}

/// Per-video attack seed derived from the experiment seed.
pub fn video_seed(seed: u64, index: usize) -> u64 {
    // splitmix64 finalizer
    let mut z = seed.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Attacks every video of `corpus`, pairs each attacked query with its own
/// reference (matching) and with the next reference in cyclic order
/// (nonmatching), and scores all pairs under each requested sync case.
///
/// Pairs anchored at even-indexed references form the training split for
/// distance boosting; odd-indexed references form the test split.
pub fn run_experiment(
    corpus: &[VideoTensor],
    spec: &AttackSpec,
    pipeline: &PipelineConfig,
    opts: &ExperimentOptions,
) -> Result<ExperimentReport> {
    let n = corpus.len();
    if n < 2 {
        return Err(Error::CorpusTooSmall(n));
    }
    spec.validate()?;
    pipeline.flow.validate()?;

    let references: Vec<ReferenceHashes> = corpus
        .par_iter()
        .map(|v| Ok(ReferenceHashes { frames: extract_frame_hashes(v)?, flow: flow_hash_or_zero(v, &pipeline.flow)? }))
        .collect::<Result<_>>()?;
    let queries: Vec<Query> = corpus
        .par_iter()
        .enumerate()
        .map(|(i, v)| {
            let attacked = attacks::apply(v, &spec.clone().with_seed(video_seed(spec.seed, i)))?;
            let hashes = extract_frame_hashes(&attacked.video)?;
            Ok(Query { attacked, hashes, source_len: v.len() })
        })
        .collect::<Result<_>>()?;

    // (reference index, query index, label)
    let mut layout = Vec::with_capacity(2 * n);
    for i in 0..n {
        layout.push((i, i, Label::Matching));
        layout.push(((i + 1) % n, i, Label::Nonmatching));
    }
    let d_dtw: Vec<f64> = layout
        .par_iter()
        .map(|&(r, q, _)| dtw::sync_distance(&queries[q].hashes, &references[r].frames))
        .collect::<Result<_>>()?;

    let mut cases = Vec::new();
    for &case in &opts.cases {
        let oracle_flows: Vec<Option<FlowHash>> = if case == SyncCase::Oracle {
            queries
                .par_iter()
                .map(|q| {
                    let table = oracle_table(&q.attacked, q.source_len);
                    let video = dtw::synchronize(&q.attacked.video, &table, q.source_len)?;
                    flow_hash_or_zero(&video, &pipeline.flow).map(Some)
                })
                .collect::<Result<_>>()?
        } else if case == SyncCase::None {
            queries.par_iter().map(|q| flow_hash_or_zero(&q.attacked.video, &pipeline.flow).map(Some)).collect::<Result<_>>()?
        } else {
            vec![None; n]
        };

        let d_fh: Vec<f64> = layout
            .par_iter()
            .map(|&(r, q, _)| {
                let reference = &references[r];
                let flow = match &oracle_flows[q] {
                    Some(f) => f.clone(),
                    None => {
                        let query = &queries[q];
                        let synced = dtw::align_and_synchronize(
                            &query.attacked.video,
                            &query.hashes,
                            &reference.frames,
                            pipeline.dtw,
                        )?;
                        flow_hash_or_zero(&synced.video, &pipeline.flow)?
                    }
                };
                boost::d_fh(&reference.flow, &flow)
            })
            .collect::<Result<_>>()?;

        let pairs: Vec<PairRecord> = layout
            .iter()
            .enumerate()
            .map(|(k, &(r, q, label))| PairRecord {
                pair: DistancePair {
                    reference_id: corpus[r].source_id().to_owned(),
                    query_id: format!("{}~{}", corpus[q].source_id(), spec.kind),
                    d_dtw: d_dtw[k],
                    d_fh: d_fh[k],
                    label,
                },
                split: if r % 2 == 0 { Split::Train } else { Split::Test },
            })
            .collect();
        cases.push(score_case(case, pairs, opts, spec.seed)?);
    }
    Ok(ExperimentReport { attack: spec.clone(), cases })
}

fn score_case(case: SyncCase, pairs: Vec<PairRecord>, opts: &ExperimentOptions, seed: u64) -> Result<CaseReport> {
    let model = if opts.metrics.contains(&Metric::Boost) {
        let train: Vec<DistancePair> =
            pairs.iter().filter(|p| p.split == Split::Train).map(|p| p.pair.clone()).collect();
        let triplets = TripletSet::from_pairs(&train, seed);
        Some(boost::train(&train, &triplets, opts.boost_eps)?)
    } else {
        None
    };

    let scored = |metric: Metric, split: Option<Split>| -> Vec<ScoredPair> {
        pairs
            .iter()
            .filter(|p| split.is_none_or(|s| p.split == s))
            .map(|p| {
                let d = match metric {
                    Metric::Dtw => p.pair.d_dtw,
                    Metric::Fh => p.pair.d_fh,
                    Metric::Boost => boost::d_boost(&p.pair, model.as_ref().expect("model trained for boost")),
                };
                ScoredPair::new(d, p.pair.label)
            })
            .collect()
    };

    let mut metrics = Vec::new();
    for &metric in &opts.metrics {
        let test = scored(metric, Some(Split::Test));
        let all = if metric == Metric::Boost { test.clone() } else { scored(metric, None) };
        metrics.push(MetricReport {
            metric,
            roc: roc(&all)?,
            auc_test: roc(&test)?.auc,
            histogram: histogram(&all, opts.histogram_bins, true)?,
        });
    }
    Ok(CaseReport { case, pairs, model, metrics })
}

/// Groups pairs by split name, preserving file order.
pub fn group_by_split(rows: Vec<(DistancePair, Option<String>)>) -> BTreeMap<String, Vec<DistancePair>> {
    let mut groups: BTreeMap<String, Vec<DistancePair>> = BTreeMap::new();
    for (pair, split) in rows {
        groups.entry(split.unwrap_or_else(|| "all".into())).or_default().push(pair);
    }
    groups
}
