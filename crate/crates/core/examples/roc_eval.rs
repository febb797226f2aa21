//! A small attack-and-detect experiment with ROC summaries.
//!
//! Usage: `cargo run --release --example roc_eval -- [videos] [temporal|spatial|spatio-temporal]`

use tvh::attacks::{AttackKind, AttackSpec};
use tvh::eval::{run_experiment, ExperimentOptions};
use tvh::pipeline::PipelineConfig;
use tvh::synthetic::{corpus, SyntheticSpec};

fn main() -> tvh::Result<()> {
    let mut args = std::env::args().skip(1);
    let count: usize = args.next().map(|a| a.parse().expect("video count")).unwrap_or(10);
    let kind: AttackKind = args.next().map(|a| a.parse()).transpose()?.unwrap_or(AttackKind::Temporal);

    let spec = SyntheticSpec { family_jitter: Some(1.0), ..SyntheticSpec::default() };
    let videos = corpus(&spec, count, 1)?;
    let report = run_experiment(&videos, &AttackSpec::new(kind).with_seed(1), &PipelineConfig::default(), &ExperimentOptions::default())?;
    print!("{}", report.summary());

    let dir = std::env::temp_dir().join("tvh-roc-example");
    report.write_to(&dir)?;
    println!("curves and histograms written to {}", dir.display());
    Ok(())
}
