//! Flow hashes: frame averaging, Horn-Schunck flow, orientation histograms.

use tvh::boost::d_fh;
use tvh::flow::{self, FlowHashConfig};
use tvh::synthetic::{moving_texture, SyntheticSpec};
use tvh::Frame;

fn main() -> tvh::Result<()> {
    let cfg = FlowHashConfig::default();

    let shifted = |dx: f64| Frame::from_fn(64, 64, |r, c| 0.5 + 0.3 * ((c as f64 - dx) / 5.0).sin() * (r as f64 / 9.0).cos());
    let field = flow::optical_flow(&shifted(0.0), &shifted(1.0), &cfg.flow)?;
    let mean_u = field.u.data().iter().sum::<f64>() / field.u.data().len() as f64;
    println!("one-pixel shift to the right: mean u = {mean_u:.3}");
    println!("histogram {:?}", flow::hoof(&field, cfg.bins)?.iter().map(|x| x.round()).collect::<Vec<_>>());

    let clip = moving_texture(&SyntheticSpec::default(), 5, "clip")?;
    let forward = flow::flow_hash(&clip, &cfg)?;
    let backward = flow::flow_hash(&clip.reversed(), &cfg)?;
    println!("hash length {} norm {:.12}", forward.len(), forward.norm());
    println!("distance to the reversed clip {:.4}", d_fh(&forward, &backward)?);

    let still = tvh::VideoTensor::new(vec![Frame::filled(64, 64, 0.5); 18], tvh::Fps::new(2, 1), "still")?;
    match flow::flow_hash(&still, &cfg) {
        Err(e) => println!("static clip: {e}; sentinel is {:?}", flow::flow_hash_or_zero(&still, &cfg)?.is_zero()),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
