//! Entry enumeration in conditioning order.
//!
//! The diagonal entry (k,k) is conditioned on every entry (i,j) with
//! min(i,j) < k. Listing entries by increasing min(i,j), row-major within
//! each group, turns each conditioning set into a prefix of the list: the
//! entries strictly before the position of (k,k) are exactly those with
//! min(i,j) < k.

use crate::error::{Error, Result};

/// 1-based position of one matrix entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EntryIndex {
    pub row: usize,
    pub col: usize,
}

impl EntryIndex {
    pub fn new(row: usize, col: usize) -> Self {
        debug_assert!(row >= 1 && col >= 1);
        EntryIndex { row, col }
    }

    /// max(row, col).
    pub fn level(&self) -> usize {
        self.row.max(self.col)
    }

    /// min(row, col); entries with `group() < k` form the conditioning set
    /// of the diagonal entry (k,k).
    pub fn group(&self) -> usize {
        self.row.min(self.col)
    }

    pub fn is_diagonal(&self) -> bool {
        self.row == self.col
    }
}

impl std::fmt::Display for EntryIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.row, self.col)
    }
}

/// Canonical enumeration of the entries of an n×m matrix, m ≥ n.
#[derive(Debug, Clone)]
pub struct EntryOrdering {
    n: usize,
    m: usize,
    entries: Vec<EntryIndex>,
    // position[(row-1)*m + (col-1)] = index into `entries`
    position: Vec<usize>,
}

impl EntryOrdering {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Total entry count n·m.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[EntryIndex] {
        &self.entries
    }

    /// Position of an entry in the enumeration.
    pub fn position(&self, entry: EntryIndex) -> Option<usize> {
        if entry.row >= 1 && entry.row <= self.n && entry.col >= 1 && entry.col <= self.m {
            Some(self.position[(entry.row - 1) * self.m + (entry.col - 1)])
        } else {
            None
        }
    }

    /// Position of the diagonal entry (k,k), 1 ≤ k ≤ n.
    pub fn diagonal_position(&self, k: usize) -> usize {
        self.position[(k - 1) * self.m + (k - 1)]
    }

    /// Length of the prefix holding the conditioning set of (k,k),
    /// i.e. every entry with min(i,j) < k.
    pub fn conditioning_prefix_len(&self, k: usize) -> usize {
        self.diagonal_position(k)
    }
}

/// Enumerate the entries of an n×m matrix so that for every k ≤ n all
/// entries with min(i,j) < k precede the diagonal entry (k,k).
///
/// Deterministic for fixed (n, m): groups ordered by min(i,j), row-major
/// within a group, which puts (k,k) first in group k.
pub fn build_ordering(n: usize, m: usize) -> Result<EntryOrdering> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidArgument(format!(
            "matrix dimensions must be positive, got n={n}, m={m}"
        )));
    }
    if n > m {
        return Err(Error::DimensionMismatch(format!(
            "ordering requires n <= m, got n={n}, m={m}"
        )));
    }

    let mut entries = Vec::with_capacity(n * m);
    for group in 1..=n {
        // row-major within the group: row `group` first (starting at the
        // diagonal), then the remaining column below it
        for col in group..=m {
            entries.push(EntryIndex::new(group, col));
        }
        for row in group + 1..=n {
            entries.push(EntryIndex::new(row, group));
        }
    }
    debug_assert_eq!(entries.len(), n * m);

    let mut position = vec![usize::MAX; n * m];
    for (idx, e) in entries.iter().enumerate() {
        position[(e.row - 1) * m + (e.col - 1)] = idx;
    }
    debug_assert!(position.iter().all(|&p| p != usize::MAX));

    Ok(EntryOrdering {
        n,
        m,
        entries,
        position,
    })
}
