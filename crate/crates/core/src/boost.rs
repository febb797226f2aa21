//! Distance boosting: a learned non-negative combination of the DTW alignment
//! cost and the flow-hash distance.
//!
//! Training minimizes the triplet hinge objective
//!
//! ```text
//! sum_t max(0, 1 + a1 (dtw_pos_t - dtw_neg_t) + a2 (fh_pos_t - fh_neg_t)) + eps (a1 + a2)
//! ```
//!
//! over `a1, a2 >= 0`. The objective is convex and piecewise linear in two
//! variables, so its minimum is attained at a vertex of the arrangement formed
//! by the hinge lines and the two axes; [`train`] enumerates those vertices.
//! The small `eps` term selects the smallest-weight optimum when the hinge
//! loss alone has a flat optimal face.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::flow::FlowHash;

/// Euclidean distance between flow hashes.
pub fn d_fh(a: &FlowHash, b: &FlowHash) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    Ok(a.values().iter().zip(b.values()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Matching,
    Nonmatching,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Matching => "matching",
            Label::Nonmatching => "nonmatching",
        }
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "matching" => Ok(Label::Matching),
            "nonmatching" => Ok(Label::Nonmatching),
            _ => Err(Error::InvalidConfig(format!("unknown label {s:?}"))),
        }
    }
}

/// Both distances for one (reference, query) pair.
#[derive(Clone, Debug, PartialEq)]
pub struct DistancePair {
    pub reference_id: String,
    pub query_id: String,
    pub d_dtw: f64,
    pub d_fh: f64,
    pub label: Label,
}

/// Training triplets as `(matching, nonmatching)` indices into a pair list.
/// Both pairs of a triplet normally share their reference video.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TripletSet {
    pub triplets: Vec<(usize, usize)>,
}

impl TripletSet {
    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    /// Pairs every matching pair with every nonmatching pair that shares its
    /// reference. Matching pairs whose reference has no nonmatching partner
    /// are paired with one nonmatching pair chosen by a seeded generator.
    pub fn from_pairs(pairs: &[DistancePair], seed: u64) -> TripletSet {
        use rand::{Rng, SeedableRng};

        let negatives: Vec<usize> = (0..pairs.len()).filter(|&i| pairs[i].label == Label::Nonmatching).collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut triplets = Vec::new();
        for (i, p) in pairs.iter().enumerate().filter(|(_, p)| p.label == Label::Matching) {
            let shared: Vec<usize> =
                negatives.iter().copied().filter(|&k| pairs[k].reference_id == p.reference_id).collect();
            if !shared.is_empty() {
                triplets.extend(shared.into_iter().map(|k| (i, k)));
            } else if !negatives.is_empty() {
                triplets.push((i, negatives[rng.gen_range(0..negatives.len())]));
            }
        }
        TripletSet { triplets }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoostModel {
    pub alpha1: f64,
    pub alpha2: f64,
    /// Hinge loss at the optimum, without the regularization term.
    pub train_loss: f64,
    pub regularization_eps: f64,
    /// Set when every triplet had identical matching and nonmatching distances.
    pub degenerate: bool,
}

impl BoostModel {
    pub fn new(alpha1: f64, alpha2: f64) -> Self {
        BoostModel { alpha1, alpha2, train_loss: 0.0, regularization_eps: 0.0, degenerate: false }
    }

    pub fn score(&self, d_dtw: f64, d_fh: f64) -> f64 {
        self.alpha1 * d_dtw + self.alpha2 * d_fh
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, format!("{self}\n"))?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        std::fs::read_to_string(path)?.parse()
    }
}

/// `alpha1 <f> alpha2 <f> eps <f> loss <f>` with shortest round-trip floats.
impl fmt::Display for BoostModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "alpha1 {} alpha2 {} eps {} loss {}",
            self.alpha1, self.alpha2, self.regularization_eps, self.train_loss
        )
    }
}

impl FromStr for BoostModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: &str| Error::CorruptStream(format!("model file: {msg}"));
        let tokens: Vec<&str> = s.split_whitespace().collect();
        if tokens.len() != 8 {
            return Err(bad("expected 4 key/value pairs"));
        }
        let mut values = [0.0; 4];
        for (slot, (key, chunk)) in values.iter_mut().zip(["alpha1", "alpha2", "eps", "loss"].iter().zip(tokens.chunks(2))) {
            if chunk[0] != *key {
                return Err(bad(&format!("expected key {key}, found {}", chunk[0])));
            }
            *slot = chunk[1].parse().map_err(|_| bad(&format!("bad number {:?}", chunk[1])))?;
        }
        let [alpha1, alpha2, eps, loss] = values;
        if !(alpha1 >= 0.0 && alpha2 >= 0.0) {
            return Err(bad("weights must be non-negative"));
        }
        Ok(BoostModel { alpha1, alpha2, train_loss: loss, regularization_eps: eps, degenerate: false })
    }
}

pub fn d_boost(pair: &DistancePair, model: &BoostModel) -> f64 {
    model.score(pair.d_dtw, pair.d_fh)
}

/// Hinge loss of a weight vector on difference vectors `pos - neg`.
pub fn hinge_loss(diffs: &[[f64; 2]], alpha: [f64; 2]) -> f64 {
    diffs.iter().map(|d| (1.0 + d[0] * alpha[0] + d[1] * alpha[1]).max(0.0)).sum()
}

/// Full training objective: hinge loss plus `eps * (a1 + a2)`.
pub fn objective(diffs: &[[f64; 2]], alpha: [f64; 2], eps: f64) -> f64 {
    hinge_loss(diffs, alpha) + eps * (alpha[0] + alpha[1])
}

/// Line `a . x = b` in the weight plane.
#[derive(Clone, Copy)]
struct Line {
    a: [f64; 2],
    b: f64,
}

fn intersect(p: Line, q: Line) -> Option<[f64; 2]> {
    let det = p.a[0] * q.a[1] - p.a[1] * q.a[0];
    let scale = p.a[0].abs().max(p.a[1].abs()) * q.a[0].abs().max(q.a[1].abs());
    if det.abs() <= 1e-14 * scale {
        return None;
    }
    let x = (p.b * q.a[1] - p.a[1] * q.b) / det;
    let y = (p.a[0] * q.b - p.b * q.a[0]) / det;
    Some([x, y])
}

/// Minimizes the regularized triplet hinge objective over non-negative weights.
///
/// `diffs[t] = [dtw_pos - dtw_neg, fh_pos - fh_neg]` for triplet `t`.
pub fn train_on_differences(diffs: &[[f64; 2]], eps: f64) -> Result<BoostModel> {
    if diffs.is_empty() {
        return Err(Error::EmptyTripletSet);
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidConfig(format!("regularization eps must be positive, got {eps}")));
    }
    if diffs.iter().flatten().any(|d| !d.is_finite()) {
        return Err(Error::InvalidConfig("distances must be finite".into()));
    }
    if diffs.iter().all(|d| d[0] == 0.0 && d[1] == 0.0) {
        return Ok(BoostModel {
            alpha1: 0.0,
            alpha2: 0.0,
            train_loss: diffs.len() as f64,
            regularization_eps: eps,
            degenerate: true,
        });
    }

    let mut lines = vec![Line { a: [1.0, 0.0], b: 0.0 }, Line { a: [0.0, 1.0], b: 0.0 }];
    lines.extend(diffs.iter().filter(|d| d[0] != 0.0 || d[1] != 0.0).map(|d| Line { a: *d, b: -1.0 }));

    let mut best = [0.0, 0.0];
    let mut best_obj = objective(diffs, best, eps);
    for (i, &p) in lines.iter().enumerate() {
        for &q in &lines[i + 1..] {
            let Some(mut x) = intersect(p, q) else { continue };
            // vertices on an axis are snapped so feasibility is exact
            for c in &mut x {
                if *c <= 0.0 && *c > -1e-12 {
                    *c = 0.0;
                }
            }
            if x[0] < 0.0 || x[1] < 0.0 {
                continue;
            }
            let obj = objective(diffs, x, eps);
            let better = obj < best_obj
                || (obj == best_obj && (x[0] + x[1], x[0]) < (best[0] + best[1], best[0]));
            if better {
                best = x;
                best_obj = obj;
            }
        }
    }
    Ok(BoostModel {
        alpha1: best[0],
        alpha2: best[1],
        train_loss: hinge_loss(diffs, best),
        regularization_eps: eps,
        degenerate: false,
    })
}

pub fn train(pairs: &[DistancePair], triplets: &TripletSet, eps: f64) -> Result<BoostModel> {
    if triplets.is_empty() {
        return Err(Error::EmptyTripletSet);
    }
    let mut diffs = Vec::with_capacity(triplets.len());
    for &(pos, neg) in &triplets.triplets {
        let (p, n) = match (pairs.get(pos), pairs.get(neg)) {
            (Some(p), Some(n)) => (p, n),
            _ => return Err(Error::InvalidConfig(format!("triplet ({pos}, {neg}) indexes past {} pairs", pairs.len()))),
        };
        if p.label != Label::Matching || n.label != Label::Nonmatching {
            return Err(Error::InvalidConfig(format!("triplet ({pos}, {neg}) has the wrong labels")));
        }
        diffs.push([p.d_dtw - n.d_dtw, p.d_fh - n.d_fh]);
    }
    train_on_differences(&diffs, eps)
}

pub const DEFAULT_EPS: f64 = 1e-6;
