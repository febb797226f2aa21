//! The `tvh` command line.
//!
//! Results go to stdout as `key=value` lines; diagnostics go to stderr.
//! Exit codes: 0 success, 2 usage, 3 bad input data, 4 computation failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::attacks::{self, AttackKind, AttackSpec};
use crate::boost::{self, BoostModel, TripletSet};
use crate::dtw;
use crate::error::{Error, Result};
use crate::eval::{self, ExperimentOptions, Metric, SyncCase};
use crate::frame_hash::extract_frame_hashes;
use crate::pipeline::{self, PipelineConfig};
use crate::store::{self, HashRecord};
use crate::synthetic::{self, SyntheticSpec};
use crate::video::{self, Fps, VideoTensor};

#[derive(Parser, Debug)]
#[command(name = "tvh", version, about = "Twofold video hashing: DTW resynchronization plus flow hashes")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Settings shared by every subcommand. Precedence: flag, then config file,
/// then `TVH_SEED` for the seed.
#[derive(Args, Debug, Default)]
pub struct GlobalArgs {
    /// `key=value` configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub height: Option<usize>,
    #[arg(long, global = true)]
    pub width: Option<usize>,
    /// Target frame rate, `n` or `n/d`.
    #[arg(long, global = true)]
    pub fps: Option<Fps>,
    /// Orientation bins per flow histogram.
    #[arg(long, global = true)]
    pub bins: Option<usize>,
    /// Temporal segments (TIRIs) per video.
    #[arg(long, global = true)]
    pub segments: Option<usize>,
    /// Frames shared by consecutive segments.
    #[arg(long, global = true)]
    pub overlap: Option<usize>,
    #[arg(long = "hs-lambda", global = true)]
    pub hs_lambda: Option<f64>,
    #[arg(long = "hs-iters", global = true)]
    pub hs_iters: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Decode and normalize a video, writing the raw container.
    Ingest {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Hash a video and add the record to a store.
    Hash {
        #[arg(long)]
        video: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Record identifier; defaults to the file stem.
        #[arg(long)]
        id: Option<String>,
    },
    /// Align a query to a reference and write the synchronized query.
    Sync {
        #[command(flatten)]
        reference: RefArgs,
        #[arg(long)]
        query: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Print the match table as `query_idx<TAB>ref_idx` lines.
        #[arg(long = "dump-match")]
        dump_match: bool,
    },
    /// Score a query against a reference.
    Compare {
        #[command(flatten)]
        reference: RefArgs,
        #[arg(long)]
        query: PathBuf,
        /// Boost model file; enables `d_boost`.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Decision threshold on the fused distance (or `d_fh` without a model).
        #[arg(long)]
        tau: Option<f64>,
        /// Hash the query without resynchronizing it.
        #[arg(long = "no-sync")]
        no_sync: bool,
    },
    /// Apply a seeded spatial, temporal or combined attack.
    Attack {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "spatio-temporal")]
        kind: AttackKind,
        #[arg(long)]
        out: PathBuf,
        /// Write dropped source indices, one per line.
        #[arg(long = "dump-dropped")]
        dump_dropped: Option<PathBuf>,
    },
    /// Fit boost weights from a labeled pairs file.
    Train {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = boost::DEFAULT_EPS)]
        eps: f64,
        /// Use only rows whose split column equals this value.
        #[arg(long)]
        split: Option<String>,
    },
    /// Run the attack-and-detect experiment over a corpus.
    Eval {
        /// Directory of videos (files or PGM sequence directories).
        #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
        corpus: Option<PathBuf>,
        /// Generate this many synthetic videos instead of reading a corpus.
        #[arg(long)]
        synthetic: Option<usize>,
        #[arg(long, default_value = "temporal")]
        attack: AttackKind,
        #[arg(long, value_delimiter = ',', default_value = "dtw,oracle,none")]
        cases: Vec<SyncCase>,
        #[arg(long, value_delimiter = ',', default_value = "dtw,fh,boost")]
        metrics: Vec<Metric>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
pub struct RefArgs {
    /// Reference video, or a hash store.
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Record to use when `--ref` is a store holding several.
    #[arg(long = "ref-id")]
    pub ref_id: Option<String>,
}

impl GlobalArgs {
    /// Resolves defaults, `TVH_SEED`, the config file and flags, in that order.
    pub fn pipeline_config(&self) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::default();
        if let Ok(seed) = std::env::var("TVH_SEED") {
            cfg.set("seed", seed.trim())?;
        }
        if let Some(path) = &self.config {
            cfg.load_config(path)?;
        }
        let i = &mut cfg.ingest;
        let f = &mut cfg.flow;
        if let Some(v) = self.height {
            i.target_height = v;
        }
        if let Some(v) = self.width {
            i.target_width = v;
        }
        if let Some(v) = self.fps {
            i.target_fps = v;
        }
        if let Some(v) = self.bins {
            f.bins = v;
        }
        if let Some(v) = self.segments {
            f.segments = v;
        }
        if let Some(v) = self.overlap {
            f.overlap = v;
        }
        if let Some(v) = self.hs_lambda {
            f.flow.lambda = v;
        }
        if let Some(v) = self.hs_iters {
            f.flow.iterations = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses `args` (including the program name) and runs the command,
/// writing results to `out`.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    execute(cli, out)
}

pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let cfg = cli.global.pipeline_config()?;
    match cli.command {
        Command::Ingest { input, out: path } => {
            let v = video::ingest(&input, &cfg.ingest)?;
            video::write_raw(&v, &path)?;
            writeln!(out, "frames={}", v.len())?;
            writeln!(out, "height={}", v.height())?;
            writeln!(out, "width={}", v.width())?;
            writeln!(out, "fps={}", v.fps())?;
        }
        Command::Hash { video: input, out: path, id } => {
            let mut v = video::ingest(&input, &cfg.ingest)?;
            if let Some(id) = id {
                v = v.with_source_id(id);
            }
            let record = pipeline::hash_video(&v, &cfg)?;
            store::put(&record, &path)?;
            writeln!(out, "id={}", record.source_id)?;
            writeln!(out, "frames={}", record.frame_hashes.frame_count())?;
            writeln!(out, "flow_hash_len={}", record.flow_hash.len())?;
            writeln!(out, "flow_hash_zero={}", record.flow_hash.is_zero())?;
            writeln!(out, "fingerprint={}", record.config_fingerprint)?;
        }
        Command::Sync { reference, query, out: path, dump_match } => {
            let reference = load_reference(&reference, &cfg)?;
            let query = video::ingest(&query, &cfg.ingest)?;
            reference.ensure_fingerprint(&cfg.fingerprint(), query.source_id())?;
            let hashes = extract_frame_hashes(&query)?;
            let synced = dtw::align_and_synchronize(&query, &hashes, &reference.frame_hashes, cfg.dtw)?;
            video::write_raw(&synced.video, &path)?;
            writeln!(out, "d_dtw={}", synced.path.total_cost)?;
            writeln!(out, "intervals={}", synced.table.interval_count())?;
            writeln!(out, "frames={}", synced.video.len())?;
            if dump_match {
                write!(out, "{}", synced.table.to_tsv())?;
            }
        }
        Command::Compare { reference, query, model, tau, no_sync } => {
            let reference = load_reference(&reference, &cfg)?;
            let query = video::ingest(&query, &cfg.ingest)?;
            let model = match model.or_else(|| cfg.boost_model.clone()) {
                Some(p) => Some(BoostModel::load(p)?),
                None => None,
            };
            let c = pipeline::compare(&reference, &query, &cfg, model.as_ref(), !no_sync)?;
            writeln!(out, "d_dtw={}", c.d_dtw)?;
            writeln!(out, "d_fh={}", c.d_fh)?;
            if let Some(d) = c.d_boost {
                writeln!(out, "d_boost={d}")?;
            }
            if let Some(tau) = tau {
                writeln!(out, "tau={tau}")?;
                writeln!(out, "decision={}", if c.is_match(tau) { "match" } else { "nonmatch" })?;
            }
        }
        Command::Attack { input, kind, out: path, dump_dropped } => {
            let v = video::ingest(&input, &cfg.ingest)?;
            let spec = AttackSpec::new(kind).with_seed(cfg.seed);
            let attacked = attacks::apply(&v, &spec)?;
            video::write_raw(&attacked.video, &path)?;
            if let Some(p) = dump_dropped {
                let text: String = attacked.dropped.iter().map(|i| format!("{i}\n")).collect();
                fs::write(p, text)?;
            }
            writeln!(out, "kind={kind}")?;
            writeln!(out, "seed={}", cfg.seed)?;
            writeln!(out, "frames_in={}", v.len())?;
            writeln!(out, "frames_out={}", attacked.video.len())?;
            writeln!(out, "dropped={}", attacked.dropped.len())?;
        }
        Command::Train { pairs, out: path, eps, split } => {
            let rows = eval::read_pairs_csv(&fs::read_to_string(&pairs)?)?;
            let pairs: Vec<_> = rows
                .into_iter()
                .filter(|(_, s)| split.as_ref().is_none_or(|want| s.as_deref() == Some(want.as_str())))
                .map(|(p, _)| p)
                .collect();
            let triplets = TripletSet::from_pairs(&pairs, cfg.seed);
            let model = boost::train(&pairs, &triplets, eps)?;
            model.save(&path)?;
            if model.degenerate {
                eprintln!("warning: every triplet has zero distance differences; weights are zero");
            }
            writeln!(out, "pairs={}", pairs.len())?;
            writeln!(out, "triplets={}", triplets.len())?;
            writeln!(out, "alpha1={}", model.alpha1)?;
            writeln!(out, "alpha2={}", model.alpha2)?;
            writeln!(out, "loss={}", model.train_loss)?;
        }
        Command::Eval { corpus, synthetic: count, attack, cases, metrics, out: dir } => {
            let videos = match (corpus, count) {
                (Some(dir), _) => read_corpus(&dir, &cfg)?,
                (None, Some(n)) => synthetic::corpus(&SyntheticSpec::default(), n, cfg.seed)?
                    .into_iter()
                    .map(|v| video::normalize(v, &cfg.ingest))
                    .collect::<Result<_>>()?,
                (None, None) => return Err(Error::InvalidConfig("eval needs --corpus or --synthetic".into())),
            };
            eprintln!("evaluating {} videos under {attack} attack", videos.len());
            let spec = AttackSpec::new(attack).with_seed(cfg.seed);
            let opts = ExperimentOptions { cases, metrics, ..ExperimentOptions::default() };
            let report = eval::run_experiment(&videos, &spec, &cfg, &opts)?;
            if let Some(dir) = dir {
                report.write_to(&dir)?;
            }
            write!(out, "{}", report.summary())?;
        }
    }
    Ok(())
}

fn load_reference(args: &RefArgs, cfg: &PipelineConfig) -> Result<HashRecord> {
    if store::is_store(&args.reference) {
        let id = match &args.ref_id {
            Some(id) => id.clone(),
            None => {
                let ids = store::list(&args.reference)?;
                match ids.as_slice() {
                    [only] => only.clone(),
                    _ => {
                        return Err(Error::InvalidConfig(format!(
                            "store holds {} records; pick one with --ref-id",
                            ids.len()
                        )))
                    }
                }
            }
        };
        store::get(&id, &args.reference)
    } else {
        pipeline::hash_video(&video::ingest(&args.reference, &cfg.ingest)?, cfg)
    }
}

/// Every regular file or subdirectory of `dir`, in name order.
fn read_corpus(dir: &Path, cfg: &PipelineConfig) -> Result<Vec<VideoTensor>> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<_>>()?;
    entries.retain(|p| !p.file_name().is_some_and(|n| n.to_string_lossy().starts_with('.')));
    entries.sort();
    entries.iter().map(|p| video::ingest(p, &cfg.ingest)).collect()
}

/// Entry point for the binary.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match execute(cli, &mut lock) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tvh: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
