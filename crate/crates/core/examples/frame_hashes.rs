//! Per-frame DCT hashes and how they react to simple edits.

use tvh::frame_hash::{extract_frame_hashes, frame_hash};
use tvh::synthetic::{moving_texture, SyntheticSpec};
use tvh::Frame;

fn main() -> tvh::Result<()> {
    let ramp = Frame::from_fn(64, 64, |_, c| c as f64 / 63.0);
    let brighter = ramp.map(|p| p + 0.1);
    let mirrored = Frame::from_fn(64, 64, |r, c| ramp.get(r, 63 - c));
    println!("ramp      {:?}", frame_hash(&ramp)?);
    println!("brighter  {:?}", frame_hash(&brighter)?);
    println!("mirrored  {:?}", frame_hash(&mirrored)?);

    let clip = moving_texture(&SyntheticSpec { frames: 8, ..SyntheticSpec::default() }, 2, "clip")?;
    for (k, h) in extract_frame_hashes(&clip)?.coeffs().iter().enumerate() {
        println!("frame {k}: horizontal {:+.4} vertical {:+.4}", h[0], h[1]);
    }
    Ok(())
}
