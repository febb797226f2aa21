//! Dynamic time warping of frame-hash series and query resynchronization.
//!
//! The pipeline is
//!
//! 1. [`cost_matrix`]: Euclidean distance between every query and reference
//!    frame hash,
//! 2. [`dtw`]: cumulative cost `g(i,j) = D(i,j) + min(g(i-1,j), g(i-1,j-1), g(i,j-1))`
//!    and a backtracked warping path,
//! 3. [`matching_intervals`]: the path is cut at every diagonal step; each
//!    piece contributes its cheapest cell as a `(query, reference)` match,
//! 4. [`synchronize`]: query frames are placed at their matched reference
//!    positions and the holes are filled by interpolation (interior) or by
//!    replicating the nearest placed frame (leading and trailing holes).
//!
//! All indices are zero-based.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::{lerp, Frame};
use crate::frame_hash::FrameHashSeries;
use crate::video::VideoTensor;

/// Pairwise frame-hash distances: rows are query frames, columns reference frames.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl CostMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if n == 0 || m == 0 {
            return Err(Error::EmptySeries);
        }
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::DimensionMismatch("ragged cost matrix".into()));
        }
        if rows.iter().flatten().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidConfig("cost entries must be finite and non-negative".into()));
        }
        Ok(CostMatrix { rows: n, cols: m, values: rows.into_iter().flatten().collect() })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    /// Number of query frames.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of reference frames.
    pub fn cols(&self) -> usize {
        self.cols
    }
}

pub fn cost_matrix(query: &FrameHashSeries, reference: &FrameHashSeries) -> Result<CostMatrix> {
    if query.is_empty() || reference.is_empty() {
        return Err(Error::EmptySeries);
    }
    let cols = reference.frame_count();
    let values = query
        .coeffs()
        .par_iter()
        .flat_map_iter(|q| {
            reference.coeffs().iter().map(move |r| (q[0] - r[0]).hypot(q[1] - r[1]))
        })
        .collect();
    Ok(CostMatrix { rows: query.frame_count(), cols, values })
}

/// An alignment path from `(0, 0)` to `(n-1, m-1)` and its accumulated cost.
#[derive(Clone, Debug, PartialEq)]
pub struct WarpingPath {
    pub points: Vec<(usize, usize)>,
    pub total_cost: f64,
}

impl WarpingPath {
    /// Checks boundary, monotonicity and step-size conditions against a `rows x cols` grid.
    pub fn is_legal(&self, rows: usize, cols: usize) -> bool {
        let (Some(&first), Some(&last)) = (self.points.first(), self.points.last()) else {
            return false;
        };
        first == (0, 0)
            && last == (rows - 1, cols - 1)
            && self.points.windows(2).all(|w| {
                let (di, dj) = (w[1].0.wrapping_sub(w[0].0), w[1].1.wrapping_sub(w[0].1));
                matches!((di, dj), (1, 0) | (0, 1) | (1, 1))
            })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DtwOptions {
    /// Sakoe-Chiba style band around the straight line joining the two
    /// corners, in reference frames. `None` searches the full grid.
    pub band: Option<usize>,
}

impl DtwOptions {
    fn allows(&self, i: usize, j: usize, rows: usize, cols: usize) -> bool {
        match self.band {
            None => true,
            Some(radius) => {
                let center = if rows == 1 { j as f64 } else { i as f64 * (cols - 1) as f64 / (rows - 1) as f64 };
                (j as f64 - center).abs() <= radius as f64 + 1e-9
            }
        }
    }
}

pub fn dtw(cost: &CostMatrix) -> WarpingPath {
    dtw_with(cost, DtwOptions::default()).expect("an unconstrained grid always has a path")
}

/// DTW with options. Ties during backtracking prefer the diagonal
/// predecessor, then `(i-1, j)`, then `(i, j-1)`.
pub fn dtw_with(cost: &CostMatrix, opts: DtwOptions) -> Result<WarpingPath> {
    let (n, m) = (cost.rows, cost.cols);
    let mut acc = vec![f64::INFINITY; n * m];
    let at = |acc: &[f64], i: usize, j: usize| acc[i * m + j];
    for i in 0..n {
        for j in 0..m {
            if !opts.allows(i, j, n, m) {
                continue;
            }
            let best = if i == 0 && j == 0 {
                0.0
            } else {
                let diag = if i > 0 && j > 0 { at(&acc, i - 1, j - 1) } else { f64::INFINITY };
                let up = if i > 0 { at(&acc, i - 1, j) } else { f64::INFINITY };
                let left = if j > 0 { at(&acc, i, j - 1) } else { f64::INFINITY };
                diag.min(up).min(left)
            };
            acc[i * m + j] = cost.get(i, j) + best;
        }
    }
    let total_cost = acc[n * m - 1];
    if !total_cost.is_finite() {
        return Err(Error::InfeasibleBand(opts.band.unwrap_or(0)));
    }

    let mut points = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n - 1, m - 1);
    points.push((i, j));
    while (i, j) != (0, 0) {
        (i, j) = if i == 0 {
            (0, j - 1)
        } else if j == 0 {
            (i - 1, 0)
        } else {
            let diag = at(&acc, i - 1, j - 1);
            let up = at(&acc, i - 1, j);
            let left = at(&acc, i, j - 1);
            if diag <= up && diag <= left {
                (i - 1, j - 1)
            } else if up <= left {
                (i - 1, j)
            } else {
                (i, j - 1)
            }
        };
        points.push((i, j));
    }
    points.reverse();
    Ok(WarpingPath { points, total_cost })
}

/// One `(query frame, reference frame)` correspondence per matching interval.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatchTable {
    pub rows: Vec<(usize, usize)>,
}

impl MatchTable {
    pub fn identity(len: usize) -> Self {
        MatchTable { rows: (0..len).map(|i| (i, i)).collect() }
    }

    /// Number of matching intervals.
    pub fn interval_count(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Tab-separated `query<TAB>reference` lines.
    pub fn to_tsv(&self) -> String {
        self.rows.iter().map(|(q, r)| format!("{q}\t{r}\n")).collect()
    }
}

/// Splits the path at diagonal steps and keeps the cheapest cell of each piece.
///
/// The first path point always opens an interval. Within an interval the
/// earliest cell wins ties.
pub fn matching_intervals(path: &WarpingPath, cost: &CostMatrix) -> MatchTable {
    let mut rows = Vec::new();
    let mut best: Option<((usize, usize), f64)> = None;
    for (k, &(i, j)) in path.points.iter().enumerate() {
        let opens = k == 0 || {
            let (pi, pj) = path.points[k - 1];
            i == pi + 1 && j == pj + 1
        };
        if opens {
            if let Some((cell, _)) = best.take() {
                rows.push(cell);
            }
        }
        let d = cost.get(i, j);
        match best {
            Some((_, bd)) if bd <= d => {}
            _ => best = Some(((i, j), d)),
        }
    }
    if let Some((cell, _)) = best {
        rows.push(cell);
    }
    MatchTable { rows }
}

/// Rebuilds the query at reference length from a match table.
pub fn synchronize(query: &VideoTensor, table: &MatchTable, reference_length: usize) -> Result<VideoTensor> {
    if table.is_empty() {
        return Err(Error::EmptyMatchTable);
    }
    let mut slots: Vec<Option<&Frame>> = vec![None; reference_length];
    for &(q, r) in &table.rows {
        if r >= reference_length {
            return Err(Error::InvalidMatchTable(format!(
                "reference index {r} is outside a length of {reference_length}"
            )));
        }
        if q >= query.len() {
            return Err(Error::InvalidMatchTable(format!(
                "query index {q} is outside a video of {} frames",
                query.len()
            )));
        }
        slots[r] = Some(query.frame(q));
    }
    let assigned: Vec<usize> = (0..reference_length).filter(|&r| slots[r].is_some()).collect();
    let first = assigned[0];
    let last = *assigned.last().unwrap();

    let mut frames = Vec::with_capacity(reference_length);
    let mut next = 0; // index into `assigned` of the first slot >= r
    for r in 0..reference_length {
        while next < assigned.len() && assigned[next] < r {
            next += 1;
        }
        let frame = match slots[r] {
            Some(f) => f.clone(),
            None if r < first => slots[first].unwrap().clone(),
            None if r > last => slots[last].unwrap().clone(),
            None => {
                let (lo, hi) = (assigned[next - 1], assigned[next]);
                let t = (r - lo) as f64 / (hi - lo) as f64;
                let (a, b) = (slots[lo].unwrap(), slots[hi].unwrap());
                let data = a.data().iter().zip(b.data()).map(|(&x, &y)| lerp(x, y, t).clamp(0.0, 1.0)).collect();
                Frame::new(a.height(), a.width(), data)
            }
        };
        frames.push(frame);
    }
    VideoTensor::new(frames, query.fps(), query.source_id().to_owned())
}

/// `d_DTW`: the accumulated cost of the optimal alignment.
pub fn sync_distance(query: &FrameHashSeries, reference: &FrameHashSeries) -> Result<f64> {
    Ok(dtw(&cost_matrix(query, reference)?).total_cost)
}

/// Output of the full alignment: the path, the match table and the rebuilt query.
#[derive(Clone, Debug)]
pub struct SyncResult {
    pub path: WarpingPath,
    pub table: MatchTable,
    pub video: VideoTensor,
}

/// Aligns `query` (with precomputed hashes) to a reference hash series and
/// rebuilds it at reference length.
pub fn align_and_synchronize(
    query: &VideoTensor,
    query_hashes: &FrameHashSeries,
    reference_hashes: &FrameHashSeries,
    opts: DtwOptions,
) -> Result<SyncResult> {
    let cost = cost_matrix(query_hashes, reference_hashes)?;
    let path = dtw_with(&cost, opts)?;
    let table = matching_intervals(&path, &cost);
    let video = synchronize(query, &table, reference_hashes.frame_count())?;
    Ok(SyncResult { path, table, video })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::video::Fps;

    fn cm(rows: &[&[f64]]) -> CostMatrix {
        CostMatrix::from_rows(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    fn series(v: &[[f64; 2]]) -> FrameHashSeries {
        FrameHashSeries::new(v.to_vec())
    }

    fn constant_video(values: &[f64]) -> VideoTensor {
        let frames = values.iter().map(|&v| Frame::filled(4, 4, v)).collect();
        VideoTensor::new(frames, Fps::default(), "v").unwrap()
    }

    #[test]
    fn cost_matrix_entries() {
        let c = cost_matrix(&series(&[[0.0, 0.0]]), &series(&[[3.0, 4.0]])).unwrap();
        assert_eq!(c.get(0, 0), 5.0);

        let q = series(&[[1.0, 0.0], [0.0, 2.0]]);
        let r = series(&[[1.0, 1.0], [3.0, 2.0]]);
        let c = cost_matrix(&q, &r).unwrap();
        // hand computed: |(0,-1)|, |(-2,-2)|, |(-1,1)|, |(-3,0)|
        assert_eq!(c.get(0, 0), 1.0);
        assert_eq!(c.get(0, 1), 8f64.sqrt());
        assert_eq!(c.get(1, 0), 2f64.sqrt());
        assert_eq!(c.get(1, 1), 3.0);

        let same = cost_matrix(&q, &q).unwrap();
        assert_eq!((same.get(0, 0), same.get(1, 1)), (0.0, 0.0));
        assert!(matches!(cost_matrix(&series(&[]), &q), Err(Error::EmptySeries)));
    }

    #[test]
    fn diagonal_path_for_identical_series() {
        let s = series(&[[0.0, 1.0], [2.0, 0.5], [1.0, 1.0], [3.0, 3.0]]);
        let w = dtw(&cost_matrix(&s, &s).unwrap());
        assert_eq!(w.points, vec![(0, 0), (1, 1), (2, 2), (3, 3)]);
        assert_eq!(w.total_cost, 0.0);
    }

    #[test]
    fn single_row_visits_every_column() {
        let c = cm(&[&[1.0, 2.0, 3.5, 0.25]]);
        let w = dtw(&c);
        assert_eq!(w.points, vec![(0, 0), (0, 1), (0, 2), (0, 3)]);
        assert_eq!(w.total_cost, 6.75);
    }

    #[test]
    fn ties_prefer_diagonal_then_up() {
        let zeros = cm(&[&[0.0, 0.0, 0.0], &[0.0, 0.0, 0.0]]);
        assert_eq!(dtw(&zeros).points, vec![(0, 0), (0, 1), (1, 2)]);
        let tall = cm(&[&[0.0, 0.0], &[0.0, 0.0], &[0.0, 0.0]]);
        assert_eq!(dtw(&tall).points, vec![(0, 0), (1, 0), (2, 1)]);
    }

    #[test]
    fn sync_distance_sums_both_cells() {
        let d = sync_distance(&series(&[[0.0, 0.0]]), &series(&[[3.0, 4.0], [0.0, 0.0]])).unwrap();
        assert_eq!(d, 5.0);
    }

    #[test]
    fn hand_traced_intervals() {
        let c = cm(&[&[0.5, 9.0], &[0.1, 9.0], &[9.0, 0.9]]);
        let path = WarpingPath { points: vec![(0, 0), (1, 0), (2, 1)], total_cost: 1.5 };
        assert!(path.is_legal(3, 2));
        assert_eq!(matching_intervals(&path, &c).rows, vec![(1, 0), (2, 1)]);
    }

    #[test]
    fn diagonal_path_gives_identity_table() {
        let c = cm(&[&[0.0, 1.0, 1.0], &[1.0, 0.0, 1.0], &[1.0, 1.0, 0.0]]);
        let path = dtw(&c);
        assert_eq!(matching_intervals(&path, &c), MatchTable::identity(3));
    }

    #[test]
    fn single_interval_picks_global_minimum() {
        let c = cm(&[&[0.7, 0.2, 0.2, 0.9]]);
        let path = dtw(&c);
        assert_eq!(matching_intervals(&path, &c).rows, vec![(0, 1)]);
    }

    #[test]
    fn synchronize_identity_is_exact() {
        let v = constant_video(&[0.1, 0.2, 0.3]);
        assert_eq!(synchronize(&v, &MatchTable::identity(3), 3).unwrap(), v);
    }

    #[test]
    fn synchronize_extrapolates_single_frame() {
        let v = constant_video(&[0.5]);
        let out = synchronize(&v, &MatchTable { rows: vec![(0, 1)] }, 3).unwrap();
        assert_eq!(out.len(), 3);
        assert!(out.frames().iter().all(|f| f.data().iter().all(|&p| p == 0.5)));
    }

    #[test]
    fn synchronize_interpolates_midpoint() {
        let v = constant_video(&[0.0, 1.0]);
        let out = synchronize(&v, &MatchTable { rows: vec![(0, 0), (1, 2)] }, 3).unwrap();
        assert!(out.frame(1).data().iter().all(|&p| p == 0.5));
        assert!(out.frame(2).data().iter().all(|&p| p == 1.0));
    }

    #[test]
    fn synchronize_rejects_bad_tables() {
        let v = constant_video(&[0.0, 1.0]);
        assert!(matches!(synchronize(&v, &MatchTable { rows: vec![] }, 3), Err(Error::EmptyMatchTable)));
        assert!(matches!(
            synchronize(&v, &MatchTable { rows: vec![(0, 3)] }, 3),
            Err(Error::InvalidMatchTable(_))
        ));
        assert!(matches!(
            synchronize(&v, &MatchTable { rows: vec![(2, 0)] }, 3),
            Err(Error::InvalidMatchTable(_))
        ));
    }

    #[test]
    fn band_restricts_search() {
        let c = cm(&[&[0.0, 5.0, 5.0], &[0.0, 5.0, 5.0], &[5.0, 0.0, 0.0]]);
        let free = dtw(&c);
        let banded = dtw_with(&c, DtwOptions { band: Some(0) }).unwrap();
        assert_eq!(banded.points, vec![(0, 0), (1, 1), (2, 2)]);
        assert!(banded.total_cost >= free.total_cost);

        let wide = CostMatrix::from_rows(vec![vec![0.0; 9], vec![0.0; 9]]).unwrap();
        assert!(dtw_with(&wide, DtwOptions { band: Some(1) }).is_err());
    }
}
