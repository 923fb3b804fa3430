//! Alternating families of finitely supported `ℤ`-valued functions over the
//! regions `I(∧t)`, with the thresholded "equal mod finite" checkers.
//!
//! "Mod finite" is replaced throughout by "equal at every column `j > ℓ`" for
//! an explicit threshold `ℓ`. Families store one function per strictly
//! increasing tuple; evaluation at any other tuple is sign-extended, and a
//! tuple with a repeated entry evaluates to the zero function.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::grid::{increasing_tuples, meet, GridPoint, Index, IndexTuple, Region, TruncFn};

/// A column threshold `ℓ`: comparisons only look at columns `j > ℓ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Threshold(pub u32);

impl Threshold {
    pub fn admits(self, p: GridPoint) -> bool {
        p.j > self.0
    }
}

/// The indexed functions `α ↦ f_α` of one instance, all sharing a column bound.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionSet {
    columns: usize,
    fns: BTreeMap<Index, TruncFn>,
}

impl FunctionSet {
    pub fn new(fns: BTreeMap<Index, TruncFn>) -> Result<Self> {
        let Some(first) = fns.values().next() else {
            return domain("an instance needs at least one indexed function");
        };
        let columns = first.columns();
        if let Some((i, f)) = fns.iter().find(|(_, f)| f.columns() != columns) {
            return domain(format!("function {i} has {} columns, expected {columns}", f.columns()));
        }
        Ok(FunctionSet { columns, fns })
    }

    pub fn from_values(values: &[(u32, Vec<u32>)]) -> Result<Self> {
        let mut fns = BTreeMap::new();
        for (id, v) in values {
            if fns.insert(Index(*id), TruncFn::new(v.clone())?).is_some() {
                return domain(format!("duplicate index {id}"));
            }
        }
        FunctionSet::new(fns)
    }

    pub fn columns(&self) -> usize {
        self.columns
    }

    pub fn len(&self) -> usize {
        self.fns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fns.is_empty()
    }

    pub fn indices(&self) -> Vec<Index> {
        self.fns.keys().copied().collect()
    }

    pub fn contains(&self, i: Index) -> bool {
        self.fns.contains_key(&i)
    }

    pub fn get(&self, i: Index) -> Result<&TruncFn> {
        self.fns.get(&i).ok_or_else(|| Error::Domain(format!("unknown index {i}")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Index, &TruncFn)> {
        self.fns.iter().map(|(i, f)| (*i, f))
    }

    /// `∧t`, further capped by `cap` when given.
    pub fn meet_of(&self, t: &IndexTuple, cap: Option<&TruncFn>) -> Result<TruncFn> {
        let mut fs = Vec::with_capacity(t.len() + 1);
        for &i in t.entries() {
            fs.push(self.get(i)?);
        }
        if let Some(g) = cap {
            fs.push(g);
        }
        meet(fs)
    }

    pub fn region_of(&self, t: &IndexTuple, cap: Option<&TruncFn>) -> Result<Region> {
        Ok(self.meet_of(t, cap)?.region())
    }

    /// Pointwise maximum of all functions: its region is the union of all regions.
    pub fn join_all(&self) -> TruncFn {
        let mut it = self.fns.values();
        let mut acc = it.next().expect("nonempty").clone();
        for f in it {
            acc = acc.join(f).expect("shared column bound");
        }
        acc
    }

    pub fn restrict(&self, keep: &BTreeSet<Index>) -> Result<FunctionSet> {
        let mut fns = BTreeMap::new();
        for &i in keep {
            fns.insert(i, self.get(i)?.clone());
        }
        FunctionSet::new(fns)
    }

    /// All strictly increasing `r`-tuples of indices, lexicographically.
    pub fn tuples(&self, r: usize) -> Vec<IndexTuple> {
        increasing_tuples(&self.indices(), r).into_iter().map(IndexTuple).collect()
    }

    /// Indices whose region contains `p`.
    pub fn covering(&self, p: GridPoint) -> Vec<Index> {
        self.fns.iter().filter(|(_, f)| f.contains(p)).map(|(i, _)| *i).collect()
    }
}

/// A finitely supported partial function `ω × ω → ℤ` with an explicit domain.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SparseZFn {
    domain: Region,
    entries: BTreeMap<GridPoint, i64>,
}

impl SparseZFn {
    pub fn zero(domain: Region) -> Self {
        SparseZFn {
            domain,
            entries: BTreeMap::new(),
        }
    }

    pub fn from_entries<I>(domain: Region, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (GridPoint, i64)>,
    {
        let mut f = SparseZFn::zero(domain);
        for (p, v) in entries {
            f.set(p, v)?;
        }
        Ok(f)
    }

    pub fn domain(&self) -> &Region {
        &self.domain
    }

    /// Value at `p`; `None` outside the domain.
    pub fn get(&self, p: GridPoint) -> Option<i64> {
        if self.domain.contains(p) {
            Some(self.entries.get(&p).copied().unwrap_or(0))
        } else {
            None
        }
    }

    pub fn at(&self, p: GridPoint) -> i64 {
        self.entries.get(&p).copied().unwrap_or(0)
    }

    pub fn set(&mut self, p: GridPoint, v: i64) -> Result<()> {
        if !self.domain.contains(p) {
            return domain(format!("point ({}, {}) outside the domain", p.j, p.k));
        }
        if v == 0 {
            self.entries.remove(&p);
        } else {
            self.entries.insert(p, v);
        }
        Ok(())
    }

    /// Nonzero entries in column-major order.
    pub fn nonzero(&self) -> impl Iterator<Item = (GridPoint, i64)> + '_ {
        self.entries.iter().map(|(p, v)| (*p, *v))
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn restrict(&self, region: &Region) -> SparseZFn {
        let domain = self.domain.intersect(region);
        let entries = self
            .entries
            .iter()
            .filter(|(p, _)| domain.contains(**p))
            .map(|(p, v)| (*p, *v))
            .collect();
        SparseZFn { domain, entries }
    }

    pub fn scale(&self, c: i64) -> SparseZFn {
        if c == 0 {
            return SparseZFn::zero(self.domain.clone());
        }
        SparseZFn {
            domain: self.domain.clone(),
            entries: self.entries.iter().map(|(p, v)| (*p, v * c)).collect(),
        }
    }

    /// `self + c·other` on the intersection of the two domains.
    pub fn add_scaled(&self, other: &SparseZFn, c: i64) -> SparseZFn {
        let mut out = self.restrict(&other.domain);
        if c != 0 {
            for (p, v) in &other.entries {
                if out.domain.contains(*p) {
                    let e = out.entries.entry(*p).or_insert(0);
                    *e += c * v;
                    if *e == 0 {
                        out.entries.remove(p);
                    }
                }
            }
        }
        out
    }

    /// Zero at every column `j ≤ ℓ`, unchanged above.
    pub fn zero_below(&self, l: Threshold) -> SparseZFn {
        SparseZFn {
            domain: self.domain.clone(),
            entries: self.entries.iter().filter(|(p, _)| l.admits(**p)).map(|(p, v)| (*p, *v)).collect(),
        }
    }

    /// Largest column carrying a nonzero value.
    pub fn support_column_max(&self) -> Option<u32> {
        self.entries.keys().map(|p| p.j).max()
    }
}

/// Thresholded "=*": agreement at every shared point with `j > ℓ`.
pub fn eq_above(phi: &SparseZFn, psi: &SparseZFn, l: Threshold) -> bool {
    phi.domain
        .intersect(&psi.domain)
        .points()
        .filter(|p| l.admits(*p))
        .all(|p| phi.at(p) == psi.at(p))
}

/// An alternating family `⟨φ_t | t ∈ X^n⟩`, optionally capped below a function `g`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Family {
    arity: usize,
    fset: Arc<FunctionSet>,
    cap: Option<TruncFn>,
    table: BTreeMap<IndexTuple, SparseZFn>,
}

impl Family {
    /// Validates that `table` is defined exactly on the increasing
    /// `arity`-tuples with the meet-region domains.
    pub fn new(arity: usize, fset: Arc<FunctionSet>, cap: Option<TruncFn>, table: BTreeMap<IndexTuple, SparseZFn>) -> Result<Self> {
        if arity == 0 {
            return domain("family arity must be at least 1");
        }
        if let Some(g) = &cap {
            if g.columns() != fset.columns() {
                return domain("cap has the wrong column bound");
            }
        }
        let expected = fset.tuples(arity);
        if expected.len() != table.len() {
            return domain(format!("table has {} entries, expected {}", table.len(), expected.len()));
        }
        for t in &expected {
            let Some(f) = table.get(t) else {
                return domain(format!("missing tuple {t}"));
            };
            if *f.domain() != fset.region_of(t, cap.as_ref())? {
                return domain(format!("domain of {t} is not the meet region"));
            }
        }
        Ok(Family { arity, fset, cap, table })
    }

    /// Builds the family tuple by tuple: `make(t, domain)` gives `φ_t`.
    pub fn from_fn<F>(arity: usize, fset: Arc<FunctionSet>, cap: Option<TruncFn>, mut make: F) -> Result<Self>
    where
        F: FnMut(&IndexTuple, &Region) -> Result<SparseZFn>,
    {
        let mut table = BTreeMap::new();
        for t in fset.tuples(arity) {
            let dom = fset.region_of(&t, cap.as_ref())?;
            let f = make(&t, &dom)?.restrict(&dom);
            if f.domain() != &dom {
                return domain(format!("function for {t} does not cover its region"));
            }
            table.insert(t, f);
        }
        Family::new(arity, fset, cap, table)
    }

    pub fn zero(arity: usize, fset: Arc<FunctionSet>, cap: Option<TruncFn>) -> Result<Self> {
        Family::from_fn(arity, fset, cap, |_, d| Ok(SparseZFn::zero(d.clone())))
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn functions(&self) -> &Arc<FunctionSet> {
        &self.fset
    }

    pub fn cap(&self) -> Option<&TruncFn> {
        self.cap.as_ref()
    }

    pub fn columns(&self) -> usize {
        self.fset.columns()
    }

    pub fn table(&self) -> &BTreeMap<IndexTuple, SparseZFn> {
        &self.table
    }

    pub fn stored(&self, t: &IndexTuple) -> Option<&SparseZFn> {
        self.table.get(t)
    }

    pub fn stored_mut(&mut self, t: &IndexTuple) -> Option<&mut SparseZFn> {
        self.table.get_mut(t)
    }

    pub fn domain_of(&self, t: &IndexTuple) -> Result<Region> {
        self.fset.region_of(t, self.cap.as_ref())
    }

    fn check_arity(&self, t: &IndexTuple, expected: usize) -> Result<()> {
        if t.len() != expected {
            return Err(Error::Arity { expected, found: t.len() });
        }
        Ok(())
    }

    /// Sign-extended lookup `φ_{π(t)} = sgn(π)·φ_t`.
    pub fn eval(&self, t: &IndexTuple) -> Result<SparseZFn> {
        self.check_arity(t, self.arity)?;
        let (sorted, sign) = t.sort_with_sign();
        if sign == 0 {
            return Ok(SparseZFn::zero(self.domain_of(t)?));
        }
        let f = self
            .table
            .get(&sorted)
            .ok_or_else(|| Error::Domain(format!("unknown index in {t}")))?;
        Ok(if sign > 0 { f.clone() } else { f.scale(-1) })
    }

    /// `φ_t(p)`, sign-extended; 0 for repeated entries. `p` must lie in the
    /// domain.
    pub fn value(&self, t: &IndexTuple, p: GridPoint) -> Result<i64> {
        self.check_arity(t, self.arity)?;
        let (sorted, sign) = t.sort_with_sign();
        if sign == 0 {
            for &i in t.entries() {
                self.fset.get(i)?;
            }
            return Ok(0);
        }
        let f = self
            .table
            .get(&sorted)
            .ok_or_else(|| Error::Domain(format!("unknown index in {t}")))?;
        match f.get(p) {
            Some(v) => Ok(v * sign as i64),
            None => domain(format!("point ({}, {}) outside the domain of {t}", p.j, p.k)),
        }
    }

    /// `e(t) = Σ_i (−1)^i φ_{t^i}` on the region of `∧t`.
    pub fn boundary(&self, t: &IndexTuple) -> Result<SparseZFn> {
        self.check_arity(t, self.arity + 1)?;
        let dom = self.domain_of(t)?;
        let mut acc = SparseZFn::zero(dom);
        for i in 0..t.len() {
            let face = self.eval(&t.remove_entry(i)?)?;
            acc = acc.add_scaled(&face, if i % 2 == 0 { 1 } else { -1 });
        }
        Ok(acc)
    }

    /// `e(t)(p)`; `p` must lie in the region of `∧t`.
    pub fn boundary_at(&self, t: &IndexTuple, p: GridPoint) -> Result<i64> {
        self.check_arity(t, self.arity + 1)?;
        let mut acc = 0i64;
        for i in 0..t.len() {
            let v = self.value(&t.remove_entry(i)?, p)?;
            acc += if i % 2 == 0 { v } else { -v };
        }
        Ok(acc)
    }

    /// The coboundary family `t ↦ Σ_i (−1)^i φ_{t^i}` of arity `n + 1`.
    pub fn coboundary(&self) -> Result<Family> {
        Family::from_fn(self.arity + 1, self.fset.clone(), self.cap.clone(), |t, _| self.boundary(t))
    }

    /// Boundaries vanish at every point with `j > ℓ`, for every increasing
    /// `(n+1)`-tuple.
    pub fn is_coherent(&self, l: Threshold) -> bool {
        self.first_incoherence(l).is_none()
    }

    /// First `(t, p)` where a boundary is nonzero above `ℓ`.
    pub fn first_incoherence(&self, l: Threshold) -> Option<(IndexTuple, GridPoint)> {
        for t in self.fset.tuples(self.arity + 1) {
            let e = self.boundary(&t).expect("tuples come from the index set");
            let hit = e.nonzero().find(|(p, _)| l.admits(*p));
            if let Some((p, _)) = hit {
                return Some((t, p));
            }
        }
        None
    }

    /// Every stored function zeroed at columns `j ≤ ℓ`.
    pub fn zero_below(&self, l: Threshold) -> Family {
        Family {
            arity: self.arity,
            fset: self.fset.clone(),
            cap: self.cap.clone(),
            table: self.table.iter().map(|(t, f)| (t.clone(), f.zero_below(l))).collect(),
        }
    }

    /// `Φ↾A`.
    pub fn restrict(&self, keep: &BTreeSet<Index>) -> Result<Family> {
        if keep.len() < self.arity {
            return domain(format!("restriction to {} indices cannot carry arity {}", keep.len(), self.arity));
        }
        let fset = Arc::new(self.fset.restrict(keep)?);
        let table = self
            .table
            .iter()
            .filter(|(t, _)| t.entries().iter().all(|i| keep.contains(i)))
            .map(|(t, f)| (t.clone(), f.clone()))
            .collect();
        Family::new(self.arity, fset, self.cap.clone(), table)
    }

    /// Replaces the cap, restricting every domain to the new one.
    pub fn with_cap(&self, cap: Option<TruncFn>) -> Result<Family> {
        Family::from_fn(self.arity, self.fset.clone(), cap, |t, d| Ok(self.table[t].restrict(d)))
    }

    /// `self + c·other`, tuple by tuple (same index set and cap required).
    pub fn add_scaled(&self, other: &Family, c: i64) -> Result<Family> {
        self.check_compatible(other)?;
        if self.arity != other.arity {
            return Err(Error::Arity {
                expected: self.arity,
                found: other.arity,
            });
        }
        Ok(Family {
            arity: self.arity,
            fset: self.fset.clone(),
            cap: self.cap.clone(),
            table: self
                .table
                .iter()
                .map(|(t, f)| (t.clone(), f.add_scaled(&other.table[t], c)))
                .collect(),
        })
    }

    fn check_compatible(&self, other: &Family) -> Result<()> {
        if self.fset.indices() != other.fset.indices() {
            return domain("families are indexed by different index sets");
        }
        if self.cap != other.cap {
            return domain("families carry different caps");
        }
        Ok(())
    }

    /// Largest column carrying a nonzero value anywhere in the family.
    pub fn support_column_max(&self) -> Option<u32> {
        self.table.values().filter_map(SparseZFn::support_column_max).max()
    }
}

/// JSON table: `"(i,j,...)" → [[j, k, v], ...]`, nonzero cells only.
pub type TableJson = BTreeMap<String, Vec<[i64; 3]>>;

/// Parses `"(1,5,7)"` into a strictly increasing tuple.
pub fn parse_tuple_key(s: &str) -> Result<IndexTuple> {
    let inner = s
        .trim()
        .strip_prefix('(')
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| Error::Schema(format!("tuple key {s:?} is not parenthesized")))?;
    let ids = if inner.trim().is_empty() {
        Vec::new()
    } else {
        inner
            .split(',')
            .map(|x| {
                x.trim()
                    .parse::<u32>()
                    .map_err(|_| Error::Schema(format!("bad index {x:?} in {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?
    };
    let t = IndexTuple::from_ids(&ids);
    if !t.is_strictly_increasing() {
        return Err(Error::Schema(format!("tuple key {s:?} is not strictly increasing")));
    }
    Ok(t)
}

impl SparseZFn {
    pub fn to_cells(&self) -> Vec<[i64; 3]> {
        self.nonzero().map(|(p, v)| [p.j as i64, p.k as i64, v]).collect()
    }

    pub fn from_cells(domain: Region, cells: &[[i64; 3]]) -> Result<SparseZFn> {
        let mut out = SparseZFn::zero(domain);
        for &[j, k, v] in cells {
            let (Ok(j), Ok(k)) = (u32::try_from(j), u32::try_from(k)) else {
                return Err(Error::Schema(format!("negative coordinate in [{j}, {k}, {v}]")));
            };
            out.set(GridPoint::new(j, k), v)
                .map_err(|_| Error::Schema(format!("cell ({j}, {k}) is outside its domain")))?;
        }
        Ok(out)
    }
}

impl Family {
    pub fn to_table_json(&self) -> TableJson {
        self.table.iter().map(|(t, f)| (t.to_string(), f.to_cells())).collect()
    }

    /// Missing tuples are zero; unknown tuples and cells outside their domain
    /// are schema errors.
    pub fn from_table_json(arity: usize, fset: Arc<FunctionSet>, cap: Option<TruncFn>, table: &TableJson) -> Result<Family> {
        let mut parsed = BTreeMap::new();
        for (key, cells) in table {
            let t = parse_tuple_key(key)?;
            if t.len() != arity {
                return Err(Error::Schema(format!("tuple {key} does not have arity {arity}")));
            }
            if let Some(i) = t.entries().iter().find(|i| !fset.contains(**i)) {
                return Err(Error::Schema(format!("tuple {key} references unknown index {i}")));
            }
            parsed.insert(t, cells);
        }
        Family::from_fn(arity, fset.clone(), cap, |t, d| match parsed.get(t) {
            Some(cells) => SparseZFn::from_cells(d.clone(), cells),
            None => Ok(SparseZFn::zero(d.clone())),
        })
    }
}

/// A type-I trivialization: a single function when `n = 1`, an alternating
/// family of arity `n − 1` otherwise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TypeIWitness {
    Single(SparseZFn),
    Family(Family),
}

impl TypeIWitness {
    /// Witness arity: 0 for a single function.
    pub fn arity(&self) -> usize {
        match self {
            TypeIWitness::Single(_) => 0,
            TypeIWitness::Family(f) => f.arity(),
        }
    }

    pub fn as_family(&self) -> Option<&Family> {
        match self {
            TypeIWitness::Family(f) => Some(f),
            TypeIWitness::Single(_) => None,
        }
    }
}

/// Domain convention for the `n = 1` witness: the union of every region of
/// the index set, capped when the family is.
pub fn single_witness_domain(fset: &FunctionSet, cap: Option<&TruncFn>) -> Region {
    let u = fset.join_all().region();
    match cap {
        Some(g) => u.intersect(&g.region()),
        None => u,
    }
}

/// `ψ` (or `Ψ`) trivializes `Φ` above `ℓ`.
pub fn is_trivialization_type_i(phi: &Family, w: &TypeIWitness, l: Threshold) -> Result<bool> {
    match w {
        TypeIWitness::Single(psi) => {
            if phi.arity != 1 {
                return Err(Error::Arity {
                    expected: phi.arity - 1,
                    found: 0,
                });
            }
            for f in phi.table.values() {
                for p in f.domain().points().filter(|p| l.admits(*p)) {
                    match psi.get(p) {
                        Some(v) if v == f.at(p) => {}
                        _ => return Ok(false),
                    }
                }
            }
            Ok(true)
        }
        TypeIWitness::Family(psi) => {
            if phi.arity < 2 || psi.arity != phi.arity - 1 {
                return Err(Error::Arity {
                    expected: phi.arity.saturating_sub(1),
                    found: psi.arity,
                });
            }
            phi.check_compatible(psi)?;
            for (t, f) in &phi.table {
                for p in f.domain().points().filter(|p| l.admits(*p)) {
                    if psi.boundary_at(t, p)? != f.at(p) {
                        return Ok(false);
                    }
                }
            }
            Ok(true)
        }
    }
}

/// `Φ` and `Ψ` (same arity) have equal boundaries at every point above `ℓ`.
pub fn is_trivialization_type_ii(phi: &Family, psi: &Family, l: Threshold) -> Result<bool> {
    if psi.arity != phi.arity {
        return Err(Error::Arity {
            expected: phi.arity,
            found: psi.arity,
        });
    }
    phi.check_compatible(psi)?;
    for t in phi.fset.tuples(phi.arity + 1) {
        for p in phi.domain_of(&t)?.points().filter(|p| l.admits(*p)) {
            if phi.boundary_at(&t, p)? != psi.boundary_at(&t, p)? {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
