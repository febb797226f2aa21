//! Hash references into a store, then match a query against every record.

use tvh::attacks::{self, AttackKind, AttackSpec};
use tvh::pipeline::{compare, hash_video, PipelineConfig};
use tvh::store;
use tvh::synthetic::{corpus, SyntheticSpec};

fn main() -> tvh::Result<()> {
    let path = std::env::temp_dir().join("tvh-store-example.tvhs");
    let _ = std::fs::remove_file(&path);
    let cfg = PipelineConfig::default();

    let references = corpus(&SyntheticSpec::default(), 4, 3)?;
    for v in &references {
        store::put(&hash_video(v, &cfg)?, &path)?;
    }
    println!("store holds {:?}", store::list(&path)?);

    let query = attacks::apply(&references[2], &AttackSpec::new(AttackKind::Temporal).with_seed(5))?.video;
    for id in store::list(&path)? {
        let c = compare(&store::get(&id, &path)?, &query, &cfg, None, true)?;
        println!("{id}: d_dtw {:>8.4}  d_fh {:.4}", c.d_dtw, c.d_fh);
    }
    Ok(())
}
