//! The three-region test and its r-region generalization.
//!
//! The unit interval of the PIT variable is split into contiguous regions
//! and the statistic is the supremum over splits of Σ_k w_k (n_k − n p_k)².
//! Cuts are drawn from a finite candidate set: the endpoints 0 and 1, and
//! each distinct data value taken once with its points counted in the upper
//! region and once with them counted in the lower region. Between data
//! values the counts are constant, so the objective is extremal at these
//! cuts. The search is a dynamic program over the sorted candidate list,
//! O(r K²) for K candidates.

use crate::edf::check_sorted_unit;
use crate::error::{GofError, Result};

pub const MAX_REGIONS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegionWeights {
    /// w_k = 1.
    Unit,
    /// w_k = 1 / (n p_k); regions with p_k = 0 are not admissible.
    InverseExpectation,
}

/// A cut at `position` with `below` points assigned to the regions on its
/// left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cut {
    pub position: f64,
    pub below: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionPartition {
    /// Interior cuts, non-decreasing.
    pub cuts: Vec<Cut>,
    pub counts: Vec<usize>,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionSplit {
    pub cut_lo: f64,
    pub cut_hi: f64,
    pub counts: [usize; 3],
    pub probs: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionResult {
    pub value: f64,
    pub partition: RegionPartition,
}

/// Sorted candidate cuts for a sorted PIT sample, including the two
/// endpoint cuts `(0, 0)` first and `(1, n)` last.
pub fn candidate_cuts(z: &[f64]) -> Vec<Cut> {
    let n = z.len();
    let mut cuts = Vec::with_capacity(2 * n + 2);
    cuts.push(Cut { position: 0.0, below: 0 });
    let mut i = 0;
    while i < n {
        let v = z[i];
        let mut j = i;
        while j < n && z[j] == v {
            j += 1;
        }
        cuts.push(Cut { position: v, below: i });
        cuts.push(Cut { position: v, below: j });
        i = j;
    }
    cuts.push(Cut { position: 1.0, below: n });
    cuts
}

/// Weighted squared deviation of one region, or `None` when the region is
/// not admissible under the weights.
#[inline]
pub fn region_term(count: usize, prob: f64, n: usize, weights: RegionWeights) -> Option<f64> {
    let expect = n as f64 * prob;
    let dev = count as f64 - expect;
    match weights {
        RegionWeights::Unit => Some(dev * dev),
        RegionWeights::InverseExpectation => {
            if expect > 0.0 {
                Some(dev * dev / expect)
            } else {
                None
            }
        }
    }
}

#[inline]
fn between(a: &Cut, b: &Cut, n: usize, weights: RegionWeights) -> Option<f64> {
    region_term(b.below - a.below, b.position - a.position, n, weights)
}

pub fn region_statistic(z: &[f64], weights: RegionWeights, regions: usize) -> Result<RegionResult> {
    check_sorted_unit(z)?;
    if !(2..=MAX_REGIONS).contains(&regions) {
        return Err(GofError::pre(format!("region count {regions} outside 2..={MAX_REGIONS}")));
    }
    let n = z.len();
    let cuts = candidate_cuts(z);
    let k = cuts.len();
    let start = cuts[0];
    let end = cuts[k - 1];
    let layers = regions - 1;

    let mut best = vec![f64::NEG_INFINITY; layers * k];
    let mut parent = vec![usize::MAX; layers * k];
    for c in 0..k {
        if let Some(t) = between(&start, &cuts[c], n, weights) {
            best[c] = t;
        }
    }
    for layer in 1..layers {
        let (prev, cur) = best.split_at_mut(layer * k);
        let prev = &prev[(layer - 1) * k..];
        let cur = &mut cur[..k];
        let par = &mut parent[layer * k..(layer + 1) * k];
        for c in 0..k {
            for i in 0..=c {
                if prev[i] == f64::NEG_INFINITY {
                    continue;
                }
                if let Some(t) = between(&cuts[i], &cuts[c], n, weights) {
                    let v = prev[i] + t;
                    if v > cur[c] {
                        cur[c] = v;
                        par[c] = i;
                    }
                }
            }
        }
    }
    let last = &best[(layers - 1) * k..];
    let mut value = f64::NEG_INFINITY;
    let mut arg = usize::MAX;
    for c in 0..k {
        if last[c] == f64::NEG_INFINITY {
            continue;
        }
        if let Some(t) = between(&cuts[c], &end, n, weights) {
            let v = last[c] + t;
            if v > value {
                value = v;
                arg = c;
            }
        }
    }
    if arg == usize::MAX {
        return Err(GofError::Numeric("no admissible region partition".into()));
    }

    let mut chosen = vec![arg];
    for layer in (1..layers).rev() {
        let c = parent[layer * k + chosen[chosen.len() - 1]];
        chosen.push(c);
    }
    chosen.reverse();
    let chosen: Vec<Cut> = chosen.into_iter().map(|c| cuts[c]).collect();
    let mut bounds = Vec::with_capacity(regions + 1);
    bounds.push(start);
    bounds.extend_from_slice(&chosen);
    bounds.push(end);
    let counts = bounds.windows(2).map(|w| w[1].below - w[0].below).collect();
    let probs = bounds.windows(2).map(|w| w[1].position - w[0].position).collect();
    Ok(RegionResult {
        value,
        partition: RegionPartition {
            cuts: chosen,
            counts,
            probs,
        },
    })
}

/// O and the maximizing split for three regions.
pub fn three_region_statistic(z: &[f64], weights: RegionWeights) -> Result<(f64, RegionSplit)> {
    let r = region_statistic(z, weights, 3)?;
    let p = &r.partition;
    Ok((
        r.value,
        RegionSplit {
            cut_lo: p.cuts[0].position,
            cut_hi: p.cuts[1].position,
            counts: [p.counts[0], p.counts[1], p.counts[2]],
            probs: [p.probs[0], p.probs[1], p.probs[2]],
        },
    ))
}
