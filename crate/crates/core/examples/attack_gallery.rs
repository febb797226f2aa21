//! The three attacks, with frames written as PGM images for inspection.

use tvh::attacks::{self, AttackKind, AttackSpec};
use tvh::synthetic::{moving_texture, SyntheticSpec};
use tvh::video::encode_pgm;

fn main() -> tvh::Result<()> {
    let dir = std::env::temp_dir().join("tvh-attack-example");
    std::fs::create_dir_all(&dir)?;
    let clip = moving_texture(&SyntheticSpec { frames: 10, ..SyntheticSpec::default() }, 6, "clip")?;
    std::fs::write(dir.join("original.pgm"), encode_pgm(clip.frame(0)))?;

    for kind in [AttackKind::Spatial, AttackKind::Temporal, AttackKind::SpatioTemporal] {
        let out = attacks::apply(&clip, &AttackSpec::new(kind).with_seed(8))?;
        std::fs::write(dir.join(format!("{kind}.pgm")), encode_pgm(out.video.frame(0)))?;
        println!("{:<16} {} -> {} frames, dropped {:?}", kind.as_str(), clip.len(), out.video.len(), out.dropped);
    }
    println!("first frames written to {}", dir.display());
    Ok(())
}
