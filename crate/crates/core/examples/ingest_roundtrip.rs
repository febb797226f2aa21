//! Write a video in the raw container, read it back, and resample it.

use tvh::synthetic::{moving_texture, SyntheticSpec};
use tvh::video::{self, Fps, IngestConfig};

fn main() -> tvh::Result<()> {
    let dir = std::env::temp_dir().join("tvh-ingest-example");
    std::fs::create_dir_all(&dir)?;

    let spec = SyntheticSpec { height: 48, width: 80, frames: 24, ..SyntheticSpec::default() };
    let clip = moving_texture(&spec, 1, "clip")?;
    let path = dir.join("clip.tvh");
    video::write_raw(&clip, &path)?;

    // Already 2 fps, so only the frame size changes.
    let normalized = video::ingest(&path, &IngestConfig::default())?;
    println!("source     {}x{} {} frames @ {}", clip.height(), clip.width(), clip.len(), clip.fps());
    println!("normalized {}x{} {} frames @ {}", normalized.height(), normalized.width(), normalized.len(), normalized.fps());

    let native = IngestConfig { target_height: 48, target_width: 80, ..IngestConfig::default() };
    assert_eq!(video::ingest(&path, &native)?, clip);
    println!("round trip at native size is exact");

    let indices = video::nearest_frame_indices(60, Fps::new(30000, 1001), Fps::new(2, 1));
    println!("60 frames at 29.97 fps keep source frames {indices:?}");
    Ok(())
}
