//! Drop frames from a clip, then recover the original timeline with DTW.

use tvh::attacks::{self, AttackKind, AttackSpec};
use tvh::dtw;
use tvh::frame_hash::extract_frame_hashes;
use tvh::synthetic::{moving_texture, SyntheticSpec};

fn main() -> tvh::Result<()> {
    let reference = moving_texture(&SyntheticSpec { frames: 20, ..SyntheticSpec::default() }, 3, "ref")?;
    let attacked = attacks::apply(&reference, &AttackSpec::new(AttackKind::Temporal).with_seed(4))?;
    println!("dropped source frames {:?}", attacked.dropped);

    let query_hashes = extract_frame_hashes(&attacked.video)?;
    let reference_hashes = extract_frame_hashes(&reference)?;
    let synced = dtw::align_and_synchronize(&attacked.video, &query_hashes, &reference_hashes, Default::default())?;

    println!("alignment cost {:.4}", synced.path.total_cost);
    print!("query\tref\n{}", synced.table.to_tsv());
    let exact = (0..reference.len()).filter(|&k| synced.video.frame(k) == reference.frame(k)).count();
    println!("{exact} of {} synchronized frames equal the original", reference.len());
    Ok(())
}
