//! The partially ordered sample space of (process subset, time bin) states.
//!
//! A state `(J, τ)` pairs a nonempty set of process indices `J ⊆ {1..D}` with
//! a bin index `τ ∈ {1..M}`, ordered by `J ⊆ J'` and `τ ≤ τ'`. A single bottom
//! element `⊥` (stored as the empty subset in bin 1) sits below every state.
//!
//! States are kept in a fixed order: by subset size, then lexicographically by
//! the sorted index list, then by bin. Serialized models and matrices depend on
//! this order being stable.
//!
//! Internally most sums over up-sets and down-sets run on a dense
//! `2^D × M` grid (row = subset bitmask, column = bin), where they reduce to
//! superset/subset zeta transforms along the mask axis and suffix/prefix sums
//! along the bin axis.

use std::fmt;

use crate::error::{Error, Result};

/// Largest number of processes a sample space may hold.
pub const MAX_DIMS: usize = 20;

/// A set of process indices, stored as a bitmask (bit `j - 1` is process `j`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Subset(u32);

impl Subset {
    pub const EMPTY: Subset = Subset(0);

    pub fn from_mask(mask: u32) -> Self {
        Subset(mask)
    }

    /// Builds a subset from 1-based process indices.
    pub fn from_indices(indices: &[usize]) -> Result<Self> {
        let mut mask = 0u32;
        for &j in indices {
            if j == 0 || j > MAX_DIMS {
                return Err(Error::InvalidArgument(format!(
                    "process index {j} outside 1..={MAX_DIMS}"
                )));
            }
            mask |= 1 << (j - 1);
        }
        Ok(Subset(mask))
    }

    pub fn singleton(j: usize) -> Self {
        Subset(1 << (j - 1))
    }

    /// The full set `{1..dims}`.
    pub fn full(dims: usize) -> Self {
        Subset(((1u64 << dims) - 1) as u32)
    }

    pub fn mask(self) -> u32 {
        self.0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset_of(self, other: Subset) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn union(self, other: Subset) -> Subset {
        Subset(self.0 | other.0)
    }

    pub fn contains(self, j: usize) -> bool {
        j >= 1 && self.0 & (1 << (j - 1)) != 0
    }

    /// Sorted 1-based indices.
    pub fn indices(self) -> Vec<usize> {
        (0..32).filter(|b| self.0 & (1 << b) != 0).map(|b| b + 1).collect()
    }

    /// Highest process index contained, or 0 for the empty set.
    pub fn max_index(self) -> usize {
        32 - self.0.leading_zeros() as usize
    }

    /// Canonical text key: sorted indices joined by commas, e.g. `"1,3"`.
    pub fn key(self) -> String {
        self.indices()
            .iter()
            .map(|j| j.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Parses the canonical key produced by [`Subset::key`].
    pub fn parse_key(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::Format("empty subset key".into()));
        }
        let idx = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Format(format!("bad subset key {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_indices(&idx)
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.key())
    }
}

/// One element `ω = (J, τ)` of the sample space. Bins are 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PosetState {
    subset: Subset,
    bin: u32,
}

impl PosetState {
    pub const BOTTOM: PosetState = PosetState {
        subset: Subset::EMPTY,
        bin: 1,
    };

    /// A non-bottom state. Use [`PosetState::BOTTOM`] for `⊥`.
    pub fn new(subset: Subset, bin: usize) -> Result<Self> {
        if subset.is_empty() {
            return Err(Error::InvalidArgument(
                "a non-bottom state needs a nonempty subset".into(),
            ));
        }
        if bin == 0 {
            return Err(Error::InvalidArgument("bins are 1-based".into()));
        }
        Ok(PosetState {
            subset,
            bin: bin as u32,
        })
    }

    pub fn subset(&self) -> Subset {
        self.subset
    }

    pub fn bin(&self) -> usize {
        self.bin as usize
    }

    pub fn is_bottom(&self) -> bool {
        self.subset.is_empty()
    }

    /// Canonical key `"J:τ"`, e.g. `"1,3:7"`; `⊥` is `"bottom"`.
    pub fn key(&self) -> String {
        if self.is_bottom() {
            "bottom".to_string()
        } else {
            format!("{}:{}", self.subset.key(), self.bin)
        }
    }

    pub fn parse_key(s: &str) -> Result<Self> {
        if s == "bottom" {
            return Ok(Self::BOTTOM);
        }
        let (j, t) = s
            .rsplit_once(':')
            .ok_or_else(|| Error::Format(format!("bad state key {s:?}")))?;
        let bin = t
            .parse::<usize>()
            .map_err(|_| Error::Format(format!("bad bin in state key {s:?}")))?;
        Self::new(Subset::parse_key(j)?, bin)
    }
}

impl fmt::Display for PosetState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_bottom() {
            write!(f, "⊥")
        } else {
            write!(f, "({}, {})", self.subset, self.bin)
        }
    }
}

/// `a ≤ b` in the product order with `⊥` as least element.
pub fn leq(a: &PosetState, b: &PosetState) -> bool {
    if a.is_bottom() {
        return true;
    }
    !b.is_bottom() && a.subset.is_subset_of(b.subset) && a.bin <= b.bin
}

/// Least upper bound of two non-bottom states.
pub fn join(a: &PosetState, b: &PosetState) -> Result<PosetState> {
    if a.is_bottom() || b.is_bottom() {
        return Err(Error::InvalidArgument("join is defined on non-bottom states".into()));
    }
    Ok(PosetState {
        subset: a.subset.union(b.subset),
        bin: a.bin.max(b.bin),
    })
}

/// The sample space for `D` processes over `M` bins of a window `[0, T]`.
#[derive(Clone, Debug)]
pub struct SampleSpace {
    dims: usize,
    bins: usize,
    duration: f64,
    states: Vec<PosetState>,
    /// Nonempty subsets in canonical order.
    subsets: Vec<Subset>,
    /// Position of each mask in `subsets`; `usize::MAX` for the empty mask.
    subset_rank: Vec<usize>,
}

impl SampleSpace {
    pub fn new(dims: usize, bins: usize, duration: f64) -> Result<Self> {
        if dims == 0 || dims > MAX_DIMS {
            return Err(Error::InvalidArgument(format!(
                "number of processes must be in 1..={MAX_DIMS}, got {dims}"
            )));
        }
        if bins == 0 {
            return Err(Error::InvalidArgument("number of bins must be positive".into()));
        }
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "duration must be positive and finite, got {duration}"
            )));
        }
        let mut subsets: Vec<Subset> = (1..(1u32 << dims)).map(Subset).collect();
        subsets.sort_by_cached_key(|s| (s.len(), s.indices()));
        let mut subset_rank = vec![usize::MAX; 1 << dims];
        for (r, s) in subsets.iter().enumerate() {
            subset_rank[s.mask() as usize] = r;
        }
        let mut states = Vec::with_capacity(subsets.len() * bins + 1);
        states.push(PosetState::BOTTOM);
        for &s in &subsets {
            for bin in 1..=bins as u32 {
                states.push(PosetState { subset: s, bin });
            }
        }
        Ok(SampleSpace {
            dims,
            bins,
            duration,
            states,
            subsets,
            subset_rank,
        })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn bin_width(&self) -> f64 {
        self.duration / self.bins as f64
    }

    /// Center of bin `τ` in seconds: `(τ - 0.5)·T/M`.
    pub fn bin_center(&self, bin: usize) -> f64 {
        (bin as f64 - 0.5) * self.bin_width()
    }

    /// The 1-based bin holding time `t`; times at `T` fall in the last bin.
    pub fn bin_of(&self, t: f64) -> usize {
        let b = (t / self.bin_width()).floor();
        if b < 0.0 {
            1
        } else {
            (b as usize + 1).min(self.bins)
        }
    }

    pub fn states(&self) -> &[PosetState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Nonempty subsets in canonical order.
    pub fn subsets(&self) -> &[Subset] {
        &self.subsets
    }

    pub fn contains(&self, s: &PosetState) -> bool {
        s.is_bottom()
            || (s.subset.max_index() <= self.dims && s.bin() >= 1 && s.bin() <= self.bins)
    }

    /// Position of `s` in [`SampleSpace::states`].
    pub fn index_of(&self, s: &PosetState) -> Result<usize> {
        if !self.contains(s) {
            return Err(Error::InvalidArgument(format!("{s} is not in the sample space")));
        }
        Ok(self.index_unchecked(s))
    }

    pub(crate) fn index_unchecked(&self, s: &PosetState) -> usize {
        if s.is_bottom() {
            0
        } else {
            1 + self.subset_rank[s.subset.mask() as usize] * self.bins + (s.bin() - 1)
        }
    }

    /// All states `ω ≥ s`, as indices in canonical order.
    pub fn upset_indices(&self, s: &PosetState) -> Vec<usize> {
        if s.is_bottom() {
            return (0..self.len()).collect();
        }
        let base = s.subset.mask();
        let free = Subset::full(self.dims).mask() & !base;
        let mut out = Vec::new();
        // enumerate every sub-mask of the free bits
        let mut extra = free;
        loop {
            let r = self.subset_rank[(base | extra) as usize];
            for bin in s.bin()..=self.bins {
                out.push(1 + r * self.bins + bin - 1);
            }
            if extra == 0 {
                break;
            }
            extra = (extra - 1) & free;
        }
        out.sort_unstable();
        out
    }

    // ---- dense grid helpers -------------------------------------------------

    pub(crate) fn grid_len(&self) -> usize {
        (1usize << self.dims) * self.bins
    }

    pub(crate) fn grid_index(&self, s: &PosetState) -> usize {
        s.subset.mask() as usize * self.bins + (s.bin() - 1)
    }

    /// Scatters a per-state vector onto the grid (unused cells are zero).
    pub(crate) fn scatter(&self, values: &[f64]) -> Vec<f64> {
        let mut grid = vec![0.0; self.grid_len()];
        for (s, v) in self.states.iter().zip(values) {
            grid[self.grid_index(s)] = *v;
        }
        grid
    }

    pub(crate) fn gather(&self, grid: &[f64]) -> Vec<f64> {
        self.states.iter().map(|s| grid[self.grid_index(s)]).collect()
    }

    /// In place: `g(J, τ) ← Σ_{J' ⊇ J, τ' ≥ τ} g(J', τ')`.
    pub(crate) fn upset_transform(&self, grid: &mut [f64]) {
        let m = self.bins;
        let n_masks = 1usize << self.dims;
        for bit in 0..self.dims {
            let b = 1usize << bit;
            for mask in 0..n_masks {
                if mask & b == 0 {
                    let (lo, hi) = (mask * m, (mask | b) * m);
                    for t in 0..m {
                        grid[lo + t] += grid[hi + t];
                    }
                }
            }
        }
        for row in grid.chunks_exact_mut(m) {
            for t in (0..m.saturating_sub(1)).rev() {
                row[t] += row[t + 1];
            }
        }
    }

    /// In place: `g(J, τ) ← Σ_{J' ⊆ J, τ' ≤ τ} g(J', τ')`.
    pub(crate) fn downset_transform(&self, grid: &mut [f64]) {
        let m = self.bins;
        let n_masks = 1usize << self.dims;
        for bit in 0..self.dims {
            let b = 1usize << bit;
            for mask in 0..n_masks {
                if mask & b != 0 {
                    let (hi, lo) = (mask * m, (mask ^ b) * m);
                    for t in 0..m {
                        grid[hi + t] += grid[lo + t];
                    }
                }
            }
        }
        for row in grid.chunks_exact_mut(m) {
            for t in 1..m {
                row[t] += row[t - 1];
            }
        }
    }

    /// In place subset-sum along the mask axis only: `g(J, τ) ← Σ_{J' ⊆ J} g(J', τ)`.
    pub(crate) fn subset_sum_masks(&self, grid: &mut [f64]) {
        let m = self.bins;
        let n_masks = 1usize << self.dims;
        for bit in 0..self.dims {
            let b = 1usize << bit;
            for mask in 0..n_masks {
                if mask & b != 0 {
                    let (hi, lo) = (mask * m, (mask ^ b) * m);
                    for t in 0..m {
                        grid[hi + t] += grid[lo + t];
                    }
                }
            }
        }
    }
}

/// The parameter domain `S`: states with `1 ≤ |J| ≤ k`, minus pruned members.
#[derive(Clone, Debug)]
pub struct ParamDomain {
    order: usize,
    members: Vec<PosetState>,
    /// Index of each member in the sample space.
    space_index: Vec<usize>,
    /// Member position for each sample-space index.
    position: Vec<Option<usize>>,
    pruned: Vec<PosetState>,
}

impl ParamDomain {
    pub fn new(space: &SampleSpace, order: usize) -> Result<Self> {
        if order == 0 || order > space.dims() {
            return Err(Error::InvalidArgument(format!(
                "interaction order must be in 1..={}, got {order}",
                space.dims()
            )));
        }
        let members: Vec<PosetState> = space
            .states()
            .iter()
            .filter(|s| !s.is_bottom() && s.subset().len() <= order)
            .copied()
            .collect();
        Ok(Self::from_members(space, order, members, Vec::new()))
    }

    fn from_members(
        space: &SampleSpace,
        order: usize,
        members: Vec<PosetState>,
        pruned: Vec<PosetState>,
    ) -> Self {
        let space_index: Vec<usize> = members.iter().map(|s| space.index_unchecked(s)).collect();
        let mut position = vec![None; space.len()];
        for (i, &idx) in space_index.iter().enumerate() {
            position[idx] = Some(i);
        }
        ParamDomain {
            order,
            members,
            space_index,
            position,
            pruned,
        }
    }

    /// Keeps members whose flag is true; dropped ones are appended to the pruned list.
    pub fn restrict(&self, space: &SampleSpace, keep: &[bool]) -> Result<Self> {
        if keep.len() != self.members.len() {
            return Err(Error::DimensionMismatch(format!(
                "mask has {} entries for {} members",
                keep.len(),
                self.members.len()
            )));
        }
        let mut members = Vec::new();
        let mut pruned = self.pruned.clone();
        for (s, &k) in self.members.iter().zip(keep) {
            if k {
                members.push(*s);
            } else {
                pruned.push(*s);
            }
        }
        Ok(Self::from_members(space, self.order, members, pruned))
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn members(&self) -> &[PosetState] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn pruned(&self) -> &[PosetState] {
        &self.pruned
    }

    pub fn space_indices(&self) -> &[usize] {
        &self.space_index
    }

    /// Position of a sample-space state in this domain, if it is a member.
    pub fn index_of(&self, space: &SampleSpace, s: &PosetState) -> Option<usize> {
        space
            .index_of(s)
            .ok()
            .and_then(|i| self.position.get(i).copied().flatten())
    }
}

/// `Σ_{c=1}^{k} C(D, c)`: the number of parameters per bin.
pub fn subsets_up_to(dims: usize, order: usize) -> usize {
    let mut total = 0usize;
    let mut binom = 1usize;
    for c in 1..=order.min(dims) {
        binom = binom * (dims - c + 1) / c;
        total += binom;
    }
    total
}
