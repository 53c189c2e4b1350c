//! Exact split search over presorted feature columns.
//!
//! Each node keeps, for every feature, its rows sorted by that feature's
//! value. Splitting a node stable-partitions those lists, so sorting happens
//! once per training run instead of once per node.

use crate::data::NUM_FEATURES;

pub(crate) type Row = [f64; NUM_FEATURES];

/// Global per-feature row order, ties broken by row index.
pub(crate) struct Presorted {
    order: Vec<Vec<u32>>,
}

impl Presorted {
    pub(crate) fn new(x: &[Row]) -> Self {
        let order = (0..NUM_FEATURES)
            .map(|f| {
                let mut rows: Vec<u32> = (0..x.len() as u32).collect();
                rows.sort_by(|&a, &b| x[a as usize][f].total_cmp(&x[b as usize][f]).then(a.cmp(&b)));
                rows
            })
            .collect();
        Presorted { order }
    }

    /// Sorted lists for a row multiset; row `i` appears `multiplicity[i]` times.
    pub(crate) fn lists(&self, multiplicity: &[u32]) -> NodeRows {
        let lists = self
            .order
            .iter()
            .map(|rows| {
                let mut out = Vec::new();
                for &r in rows {
                    for _ in 0..multiplicity[r as usize] {
                        out.push(r);
                    }
                }
                out
            })
            .collect();
        NodeRows { lists }
    }
}

/// The rows reaching one node, sorted per feature.
pub(crate) struct NodeRows {
    lists: Vec<Vec<u32>>,
}

impl NodeRows {
    pub(crate) fn len(&self) -> usize {
        self.lists[0].len()
    }

    /// Rows in feature-0 order (any fixed order would do).
    pub(crate) fn rows(&self) -> &[u32] {
        &self.lists[0]
    }

    pub(crate) fn partition(self, x: &[Row], feature: usize, threshold: f64) -> (NodeRows, NodeRows) {
        let (left, right) = self
            .lists
            .into_iter()
            .map(|list| {
                list.into_iter()
                    .partition::<Vec<u32>, _>(|&r| x[r as usize][feature] <= threshold)
            })
            .unzip();
        (NodeRows { lists: left }, NodeRows { lists: right })
    }
}

/// Sufficient statistics and gain rule of a split criterion.
pub(crate) trait Criterion {
    type Acc: Copy;

    fn empty(&self) -> Self::Acc;
    fn add(&self, acc: &mut Self::Acc, row: usize);
    fn remainder(&self, parent: &Self::Acc, left: &Self::Acc) -> Self::Acc;
    fn admissible(&self, left: &Self::Acc, right: &Self::Acc) -> bool;
    /// Improvement from splitting `parent` into `left` and `right`; larger is better.
    fn gain(&self, parent: &Self::Acc, left: &Self::Acc, right: &Self::Acc) -> f64;

    fn total(&self, rows: &[u32]) -> Self::Acc {
        let mut acc = self.empty();
        for &r in rows {
            self.add(&mut acc, r as usize);
        }
        acc
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Threshold strictly separating `lo < hi`: their midpoint, unless rounding
/// lands it on `hi`.
pub(crate) fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid < hi {
        mid
    } else {
        lo
    }
}

/// Best positive-gain split over `features` (ascending). Candidates are
/// midpoints between consecutive distinct values; ties keep the lowest
/// feature, then the lowest threshold.
pub(crate) fn best_split<C: Criterion>(
    criterion: &C,
    node: &NodeRows,
    x: &[Row],
    features: &[usize],
) -> Option<Split> {
    let parent = criterion.total(node.rows());
    let mut best: Option<Split> = None;
    for &f in features {
        let list = &node.lists[f];
        let mut left = criterion.empty();
        for w in list.windows(2) {
            let (r, next) = (w[0] as usize, w[1] as usize);
            criterion.add(&mut left, r);
            let (v, v_next) = (x[r][f], x[next][f]);
            if v == v_next {
                continue;
            }
            let right = criterion.remainder(&parent, &left);
            if !criterion.admissible(&left, &right) {
                continue;
            }
            let gain = criterion.gain(&parent, &left, &right);
            if gain > 0.0 && best.is_none_or(|b| gain > b.gain) {
                best = Some(Split {
                    feature: f,
                    threshold: midpoint(v, v_next),
                    gain,
                });
            }
        }
    }
    best
}

pub(crate) const ALL_FEATURES: [usize; NUM_FEATURES] = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13];
