//! Truncated functions `ω → ω`, the regions below their graphs, and the
//! tuple/sign utilities shared by every alternating construction.
//!
//! Every function carries a column bound `J`; all quantifiers over `ω × ω`
//! become quantifiers over columns `< J`.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Label of an indexed function (stands for the `α`-th generic real).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Index(pub u32);

impl fmt::Display for Index {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A grid point `(j, k)`: column `j`, row `k`. Ordered column-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GridPoint {
    pub j: u32,
    pub k: u32,
}

impl GridPoint {
    pub const fn new(j: u32, k: u32) -> Self {
        GridPoint { j, k }
    }
}

/// An element of `ω^ω` truncated to its first `J` columns.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TruncFn {
    values: Vec<u32>,
}

impl TruncFn {
    pub fn new(values: Vec<u32>) -> Result<Self> {
        if values.is_empty() {
            return domain("a truncated function needs at least one column");
        }
        Ok(TruncFn { values })
    }

    pub fn constant(columns: usize, value: u32) -> Result<Self> {
        TruncFn::new(vec![value; columns])
    }

    pub fn columns(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn at(&self, j: usize) -> u32 {
        self.values[j]
    }

    /// The region `I(f) = {(j, k) : k ≤ f(j)}`.
    pub fn region(&self) -> Region {
        Region {
            heights: self.values.iter().map(|&v| Some(v)).collect(),
        }
    }

    pub fn contains(&self, p: GridPoint) -> bool {
        (p.j as usize) < self.values.len() && p.k <= self.values[p.j as usize]
    }

    fn check_columns(&self, other: &TruncFn) -> Result<()> {
        if self.columns() != other.columns() {
            return domain(format!("column bounds differ: {} vs {}", self.columns(), other.columns()));
        }
        Ok(())
    }

    /// Pointwise `f(j) ≤ g(j)` for every column.
    pub fn leq(&self, other: &TruncFn) -> Result<bool> {
        self.check_columns(other)?;
        Ok(self.values.iter().zip(&other.values).all(|(a, b)| a <= b))
    }

    /// Pointwise maximum; its region is the union of the two regions.
    pub fn join(&self, other: &TruncFn) -> Result<TruncFn> {
        self.check_columns(other)?;
        Ok(TruncFn {
            values: self.values.iter().zip(&other.values).map(|(a, b)| *a.max(b)).collect(),
        })
    }
}

impl fmt::Display for TruncFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.values)
    }
}

/// Greatest lower bound of a nonempty list of functions.
pub fn meet<'a, I>(fs: I) -> Result<TruncFn>
where
    I: IntoIterator<Item = &'a TruncFn>,
{
    let mut it = fs.into_iter();
    let Some(first) = it.next() else {
        return domain("meet of an empty list");
    };
    let mut values = first.values.clone();
    for f in it {
        first.check_columns(f)?;
        for (v, w) in values.iter_mut().zip(&f.values) {
            *v = (*v).min(*w);
        }
    }
    Ok(TruncFn { values })
}

/// Free-function form of [`TruncFn::region`].
pub fn region(f: &TruncFn) -> Region {
    f.region()
}

/// Free-function form of [`TruncFn::leq`].
pub fn leq(f: &TruncFn, g: &TruncFn) -> Result<bool> {
    f.leq(g)
}

/// A finite set of grid points, downward closed in `k` within each column.
///
/// Stored as one optional height per column: `Some(h)` holds rows `0..=h`,
/// `None` holds nothing.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Region {
    heights: Vec<Option<u32>>,
}

impl Region {
    pub fn empty(columns: usize) -> Self {
        Region {
            heights: vec![None; columns],
        }
    }

    /// Builds a region from an explicit point set; fails unless the set is
    /// downward closed within each column.
    pub fn from_points(columns: usize, points: &BTreeSet<GridPoint>) -> Result<Self> {
        let mut heights: Vec<Option<u32>> = vec![None; columns];
        let mut counts = vec![0u32; columns];
        for p in points {
            let j = p.j as usize;
            if j >= columns {
                return domain(format!("point ({}, {}) outside {} columns", p.j, p.k, columns));
            }
            heights[j] = Some(heights[j].map_or(p.k, |h| h.max(p.k)));
            counts[j] += 1;
        }
        for j in 0..columns {
            if let Some(h) = heights[j] {
                if counts[j] != h + 1 {
                    return domain(format!("column {j} is not downward closed"));
                }
            }
        }
        Ok(Region { heights })
    }

    pub fn columns(&self) -> usize {
        self.heights.len()
    }

    pub fn height(&self, j: usize) -> Option<u32> {
        self.heights.get(j).copied().flatten()
    }

    pub fn contains(&self, p: GridPoint) -> bool {
        matches!(self.heights.get(p.j as usize), Some(Some(h)) if p.k <= *h)
    }

    pub fn len(&self) -> usize {
        self.heights.iter().map(|h| h.map_or(0, |h| h as usize + 1)).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.heights.iter().all(Option::is_none)
    }

    pub fn intersect(&self, other: &Region) -> Region {
        let columns = self.columns().min(other.columns());
        Region {
            heights: (0..columns)
                .map(|j| match (self.heights[j], other.heights[j]) {
                    (Some(a), Some(b)) => Some(a.min(b)),
                    _ => None,
                })
                .collect(),
        }
    }

    pub fn is_subset(&self, other: &Region) -> bool {
        self.points().all(|p| other.contains(p))
    }

    /// Points in column-major order.
    pub fn points(&self) -> impl Iterator<Item = GridPoint> + '_ {
        self.heights.iter().enumerate().flat_map(|(j, h)| {
            let rows = h.map_or(0, |h| h + 1);
            (0..rows).map(move |k| GridPoint::new(j as u32, k))
        })
    }

    pub fn to_set(&self) -> BTreeSet<GridPoint> {
        self.points().collect()
    }
}

/// A finite sequence of indices. Strictness is enforced by callers that need it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IndexTuple(pub Vec<Index>);

impl IndexTuple {
    pub fn new(entries: Vec<Index>) -> Self {
        IndexTuple(entries)
    }

    pub fn from_ids(ids: &[u32]) -> Self {
        IndexTuple(ids.iter().map(|&i| Index(i)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entries(&self) -> &[Index] {
        &self.0
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.0.windows(2).all(|w| w[0] < w[1])
    }

    /// `t^i`: the tuple with its `i`-th entry removed.
    pub fn remove_entry(&self, i: usize) -> Result<IndexTuple> {
        if i >= self.0.len() {
            return domain(format!("position {i} out of range for length {}", self.0.len()));
        }
        let mut v = self.0.clone();
        v.remove(i);
        Ok(IndexTuple(v))
    }

    /// Sorts increasingly and reports the parity of the sorting permutation;
    /// sign 0 when an entry repeats.
    pub fn sort_with_sign(&self) -> (IndexTuple, i8) {
        let mut v = self.0.clone();
        let mut sign: i8 = 1;
        // insertion sort, counting transpositions
        for i in 1..v.len() {
            let mut m = i;
            while m > 0 && v[m - 1] > v[m] {
                v.swap(m - 1, m);
                sign = -sign;
                m -= 1;
            }
        }
        if v.windows(2).any(|w| w[0] == w[1]) {
            sign = 0;
        }
        (IndexTuple(v), sign)
    }

    pub fn push(&self, x: Index) -> IndexTuple {
        let mut v = self.0.clone();
        v.push(x);
        IndexTuple(v)
    }

    pub fn concat(&self, other: &IndexTuple) -> IndexTuple {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        IndexTuple(v)
    }

    pub fn contains(&self, x: Index) -> bool {
        self.0.contains(&x)
    }
}

impl fmt::Display for IndexTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, ")")
    }
}

impl From<Vec<Index>> for IndexTuple {
    fn from(v: Vec<Index>) -> Self {
        IndexTuple(v)
    }
}

/// Free-function form of [`IndexTuple::remove_entry`].
pub fn remove_entry(t: &IndexTuple, i: usize) -> Result<IndexTuple> {
    t.remove_entry(i)
}

/// Free-function form of [`IndexTuple::sort_with_sign`].
pub fn sort_with_sign(t: &IndexTuple) -> (IndexTuple, i8) {
    t.sort_with_sign()
}

/// All strictly increasing `r`-subsets of `items` (assumed increasing), in
/// lexicographic order.
pub fn increasing_tuples<T: Copy>(items: &[T], r: usize) -> Vec<Vec<T>> {
    let n = items.len();
    let mut out = Vec::new();
    if r > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..r).collect();
    loop {
        out.push(idx.iter().map(|&i| items[i]).collect());
        let mut i = r;
        while i > 0 && idx[i - 1] == i - 1 + n - r {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        idx[i - 1] += 1;
        for m in i..r {
            idx[m] = idx[m - 1] + 1;
        }
    }
}

pub fn binomial(n: usize, r: usize) -> u128 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}
