//! Fit the fusion weights on labeled distance pairs and score new pairs.

use tvh::boost::{self, DistancePair, Label, TripletSet};

fn pair(r: &str, q: &str, d_dtw: f64, d_fh: f64, label: Label) -> DistancePair {
    DistancePair { reference_id: r.into(), query_id: q.into(), d_dtw, d_fh, label }
}

fn main() -> tvh::Result<()> {
    use Label::*;
    // Neither distance alone orders every triplet; their sum does.
    let pairs = vec![
        pair("a", "a'", 1.0, 0.9, Matching),
        pair("a", "b'", 2.5, 0.6, Nonmatching),
        pair("b", "b'", 3.0, 0.2, Matching),
        pair("b", "c'", 1.5, 1.4, Nonmatching),
        pair("c", "c'", 0.5, 0.5, Matching),
        pair("c", "a'", 1.0, 1.3, Nonmatching),
    ];
    let triplets = TripletSet::from_pairs(&pairs, 0);
    let model = boost::train(&pairs, &triplets, boost::DEFAULT_EPS)?;
    println!("{model}");
    for p in &pairs {
        println!("{} vs {:<3} {:<11} d_boost {:.4}", p.reference_id, p.query_id, p.label.as_str(), boost::d_boost(p, &model));
    }
    Ok(())
}
