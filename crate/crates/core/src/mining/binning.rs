use serde::{Deserialize, Serialize};

use super::MiningError;
use crate::scalar::Scalar;

pub const DEFAULT_BINS: usize = 10;

/// Equal-width bins over `[edges[0], edges[n_bins]]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinningSpec<F> {
    pub n_bins: usize,
    pub edges: Vec<F>,
}

pub fn fit_binning<F: Scalar>(values: &[F], n_bins: usize) -> Result<BinningSpec<F>, MiningError> {
    if n_bins == 0 {
        return Err(MiningError::Fit("binning needs at least one bin".into()));
    }
    let mut it = values.iter().copied();
    let first = it.next().ok_or_else(|| MiningError::Fit("cannot bin an empty column".into()))?;
    let (lo, hi) = it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() || !hi.is_finite() {
        return Err(MiningError::Fit("cannot bin non-finite values".into()));
    }
    if lo == hi {
        return Ok(BinningSpec { n_bins: 1, edges: vec![lo, hi] });
    }
    let width = (hi - lo) / F::of_usize(n_bins);
    let mut edges: Vec<F> = (0..n_bins).map(|i| lo + width * F::of_usize(i)).collect();
    edges.push(hi);
    Ok(BinningSpec { n_bins, edges })
}

impl<F: Scalar> BinningSpec<F> {
    pub fn is_degenerate(&self) -> bool {
        self.n_bins == 1 && self.edges[0] == self.edges[1]
    }

    /// Bin index of `x`; values outside the fitted range clamp to the end bins
    /// and the upper edge belongs to the last bin.
    pub fn bin_of(&self, x: F) -> usize {
        let inner = &self.edges[1..self.n_bins];
        inner.partition_point(|e| *e <= x)
    }

    /// Inner edges, the candidate thresholds for binary splits.
    pub fn thresholds(&self) -> &[F] {
        &self.edges[1..self.n_bins]
    }

    /// Display label `[lo, hi)` of bin `i` (closed on the right for the last bin).
    pub fn label(&self, i: usize) -> String {
        let close = if i + 1 == self.n_bins { ']' } else { ')' };
        format!("[{}, {}{}", self.edges[i], self.edges[i + 1], close)
    }
}
