//! Symbolic subdivision engine: subset-final segments, ε-assignments, formal
//! combinations of boundary terms, the witness/verification recursion, the
//! structural and cancellation checks, and assembly of same-arity witnesses.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::delta::OrdSet;
use crate::error::{domain, Error, Result};
use crate::family::{Family, FunctionSet, SparseZFn, Threshold};
use crate::grid::{GridPoint, Index, IndexTuple};
use crate::par::Exec;

/// `a₁ ⊆ ⋯ ⊆ a_m = b`, each set one larger than the last.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubsetFinalSegment {
    chain: Vec<OrdSet>,
}

impl SubsetFinalSegment {
    pub fn new(chain: Vec<OrdSet>) -> Result<Self> {
        let (Some(first), Some(last)) = (chain.first(), chain.last()) else {
            return domain("a segment needs at least one set");
        };
        if first.is_empty() {
            return domain("segment sets must be nonempty");
        }
        if chain.len() > last.len() {
            return domain("segment is longer than its final set");
        }
        for w in chain.windows(2) {
            if !w[0].is_subset(&w[1]) || w[1].len() != w[0].len() + 1 {
                return domain(format!("{} to {} is not a one-element step", w[0], w[1]));
            }
        }
        Ok(SubsetFinalSegment { chain })
    }

    pub fn chain(&self) -> &[OrdSet] {
        &self.chain
    }

    pub fn first(&self) -> &OrdSet {
        &self.chain[0]
    }

    pub fn last(&self) -> &OrdSet {
        self.chain.last().expect("nonempty chain")
    }

    pub fn len(&self) -> usize {
        self.chain.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Starts at a singleton.
    pub fn is_long(&self) -> bool {
        self.chain[0].len() == 1
    }
}

/// Every subset-final segment of `b`, from `⟨b⟩` down to the long strings.
pub fn segments(b: &OrdSet) -> Result<Vec<SubsetFinalSegment>> {
    if b.is_empty() {
        return domain("segments of the empty set are undefined");
    }
    let mut out = Vec::new();
    for s in (1..=b.len()).rev() {
        for a1 in b.subsets(s) {
            let rest: Vec<u32> = b.as_slice().iter().copied().filter(|x| !a1.contains(*x)).collect();
            grow(vec![a1], &rest, &mut out);
        }
    }
    Ok(out)
}

fn grow(chain: Vec<OrdSet>, rest: &[u32], out: &mut Vec<SubsetFinalSegment>) {
    if rest.is_empty() {
        out.push(SubsetFinalSegment { chain });
        return;
    }
    for (i, &x) in rest.iter().enumerate() {
        let mut next = chain.clone();
        next.push(chain.last().expect("nonempty").insert(x));
        let mut r = rest.to_vec();
        r.remove(i);
        grow(next, &r, out);
    }
}

pub fn long_strings(b: &OrdSet) -> Result<Vec<SubsetFinalSegment>> {
    Ok(segments(b)?.into_iter().filter(|s| s.is_long()).collect())
}

/// `a ↦ ε_a` on sets of size at least two; singletons map to themselves.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EpsilonAssignment {
    map: BTreeMap<OrdSet, u32>,
}

impl EpsilonAssignment {
    /// Checks the singleton rule and strict monotonicity along `⊊`.
    pub fn new(map: BTreeMap<OrdSet, u32>) -> Result<Self> {
        let mut kept = BTreeMap::new();
        for (a, e) in map {
            match a.len() {
                0 => return domain("ε is undefined on the empty set"),
                1 if a.at(0) != e => return domain(format!("ε{a} must be {}", a.at(0))),
                1 => {}
                _ => {
                    kept.insert(a, e);
                }
            }
        }
        for (b, &eb) in &kept {
            if let Some(&x) = b.as_slice().iter().find(|&&x| x >= eb) {
                return domain(format!("ε{{{x}}} = {x} is not below ε{b} = {eb}"));
            }
            for (a, &ea) in &kept {
                if a.len() < b.len() && a.is_subset(b) && ea >= eb {
                    return domain(format!("ε{a} = {ea} is not below ε{b} = {eb}"));
                }
            }
        }
        Ok(EpsilonAssignment { map: kept })
    }

    /// Sizes occupy consecutive blocks above `ground`, lexicographic within a
    /// block.
    pub fn by_size_blocks(ground: &OrdSet, max_size: usize) -> Self {
        let mut next = ground.top().map_or(0, |t| t + 1);
        let mut map = BTreeMap::new();
        for s in 2..=max_size.min(ground.len()) {
            for a in ground.subsets(s) {
                map.insert(a, next);
                next += 1;
            }
        }
        EpsilonAssignment { map }
    }

    pub fn get(&self, a: &OrdSet) -> Option<u32> {
        match a.len() {
            0 => None,
            1 => Some(a.at(0)),
            _ => self.map.get(a).copied(),
        }
    }

    pub fn require(&self, a: &OrdSet) -> Result<u32> {
        self.get(a).ok_or_else(|| Error::Domain(format!("no ε assigned to {a}")))
    }

    pub fn entries(&self) -> &BTreeMap<OrdSet, u32> {
        &self.map
    }

    pub fn without(&self, a: &OrdSet) -> EpsilonAssignment {
        let mut map = self.map.clone();
        map.remove(a);
        EpsilonAssignment { map }
    }
}

/// One ε-assignment per grid point above a threshold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoordEpsilonAssignment {
    pub threshold: Threshold,
    pub cells: BTreeMap<GridPoint, EpsilonAssignment>,
}

impl CoordEpsilonAssignment {
    pub fn at(&self, p: GridPoint) -> Option<&EpsilonAssignment> {
        self.cells.get(&p)
    }

    /// Pool membership by size, the singleton rule, and `(j,k) ∈ I(f_{ε_a})`
    /// for every nonempty `a ⊆ A` with `|a| ≤ n+1` covering an admissible
    /// point.
    pub fn check_requirements(&self, fset: &FunctionSet, a_set: &BTreeSet<Index>, pools: &[Vec<u32>], n: usize) -> Result<()> {
        if pools.len() != n + 1 {
            return domain(format!("expected {} pools, found {}", n + 1, pools.len()));
        }
        for p in admissible_points(fset, a_set, self.threshold)? {
            let cover = cover_within(fset, a_set, p)?;
            let Some(eps) = self.at(p) else {
                if cover.len() >= 2 {
                    return Err(Error::Precondition(format!("no ε at ({}, {})", p.j, p.k)));
                }
                continue;
            };
            for s in 1..=(n + 1).min(cover.len()) {
                for a in cover.subsets(s) {
                    let Some(e) = eps.get(&a) else {
                        return Err(Error::Precondition(format!("ε{a} missing at ({}, {})", p.j, p.k)));
                    };
                    if !pools[s - 1].contains(&e) {
                        return Err(Error::Precondition(format!("ε{a} = {e} is outside pool {}", s - 1)));
                    }
                    if !fset.get(Index(e))?.contains(p) {
                        return Err(Error::Precondition(format!(
                            "({}, {}) is outside the region of ε{a} = {e}",
                            p.j, p.k
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn admissible_points(fset: &FunctionSet, a_set: &BTreeSet<Index>, l: Threshold) -> Result<Vec<GridPoint>> {
    let mut pts = BTreeSet::new();
    for &i in a_set {
        pts.extend(fset.get(i)?.region().points().filter(|p| l.admits(*p)));
    }
    Ok(pts.into_iter().collect())
}

fn cover_within(fset: &FunctionSet, a_set: &BTreeSet<Index>, p: GridPoint) -> Result<OrdSet> {
    let mut ids = Vec::new();
    for &i in a_set {
        if fset.get(i)?.contains(p) {
            ids.push(i.0);
        }
    }
    Ok(OrdSet::from_unsorted(ids))
}

/// `Σ cᵢ e(tᵢ)`, normalized: increasing tuples, no zero coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(into = "Vec<ComboTerm>", try_from = "Vec<ComboTerm>")]
pub struct SymbolicCombo {
    terms: BTreeMap<IndexTuple, i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComboTerm {
    pub tuple: Vec<u32>,
    pub coeff: i64,
}

impl From<SymbolicCombo> for Vec<ComboTerm> {
    fn from(c: SymbolicCombo) -> Self {
        c.terms
            .into_iter()
            .map(|(t, coeff)| ComboTerm {
                tuple: t.entries().iter().map(|i| i.0).collect(),
                coeff,
            })
            .collect()
    }
}

impl TryFrom<Vec<ComboTerm>> for SymbolicCombo {
    type Error = Error;
    fn try_from(v: Vec<ComboTerm>) -> Result<Self> {
        let mut c = SymbolicCombo::zero();
        for t in v {
            if t.tuple.len() < 2 {
                return Err(Error::Schema("combo tuples need at least two entries".into()));
            }
            c.add_term(&IndexTuple::from_ids(&t.tuple), t.coeff);
        }
        Ok(c)
    }
}

impl SymbolicCombo {
    pub fn zero() -> Self {
        SymbolicCombo::default()
    }

    /// The single term `e(t)`.
    pub fn e(t: &IndexTuple) -> Self {
        let mut c = SymbolicCombo::zero();
        c.add_term(t, 1);
        c
    }

    pub fn e_set(a: &OrdSet) -> Self {
        SymbolicCombo::e(&IndexTuple::from_ids(a.as_slice()))
    }

    /// Adds `c·e(t)`; `e` alternates, so the tuple is sorted with its sign and
    /// repeated entries contribute nothing.
    pub fn add_term(&mut self, t: &IndexTuple, c: i64) {
        let (sorted, sign) = t.sort_with_sign();
        if sign == 0 || c == 0 {
            return;
        }
        let slot = self.terms.entry(sorted).or_insert(0);
        *slot += c * sign as i64;
        if *slot == 0 {
            let key = t.sort_with_sign().0;
            self.terms.remove(&key);
        }
    }

    pub fn plus_scaled(&self, other: &SymbolicCombo, c: i64) -> SymbolicCombo {
        let mut out = self.clone();
        for (t, v) in &other.terms {
            out.add_term(t, v * c);
        }
        out
    }

    pub fn scaled(&self, c: i64) -> SymbolicCombo {
        SymbolicCombo::zero().plus_scaled(self, c)
    }

    pub fn terms(&self) -> &BTreeMap<IndexTuple, i64> {
        &self.terms
    }

    pub fn coeff(&self, t: &IndexTuple) -> i64 {
        let (sorted, sign) = t.sort_with_sign();
        self.terms.get(&sorted).map_or(0, |v| v * sign as i64)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Expansion into the underlying family: `e(t) = Σ (−1)^i φ_{t^i}`.
    pub fn faces(&self) -> BTreeMap<IndexTuple, i64> {
        let mut out: BTreeMap<IndexTuple, i64> = BTreeMap::new();
        for (t, &c) in &self.terms {
            for i in 0..t.len() {
                let face = t.remove_entry(i).expect("index in range");
                *out.entry(face).or_insert(0) += if i % 2 == 0 { c } else { -c };
            }
        }
        out.retain(|_, v| *v != 0);
        out
    }
}

/// `L ∗ ε`: appends `ε` to every tuple.
pub fn star(l: &SymbolicCombo, eps: u32) -> SymbolicCombo {
    let mut out = SymbolicCombo::zero();
    for (t, &c) in &l.terms {
        out.add_term(&t.push(Index(eps)), c);
    }
    out
}

/// `{ε_{a_k}}` for a long string, `a₁ ∪ {ε_{a_k}}` otherwise.
pub fn d_of(seg: &SubsetFinalSegment, eps: &EpsilonAssignment) -> Result<OrdSet> {
    let mut ids = Vec::with_capacity(seg.last().len() + 1);
    if !seg.is_long() {
        ids.extend_from_slice(seg.first().as_slice());
    }
    for a in seg.chain() {
        ids.push(eps.require(a)?);
    }
    let d = OrdSet::from_unsorted(ids.iter().copied());
    if d.len() != ids.len() {
        return domain(format!("ε collides with an element of {}", seg.first()));
    }
    Ok(d)
}

/// Candidate witness expression for `a`, `|a| ≥ 2`: `e(a⌢ε_a)` for pairs,
/// `(−1)^{|a|}·(verification_combo(a) ∗ ε_a)` above.
pub fn witness_combo(a: &OrdSet, eps: &EpsilonAssignment) -> Result<SymbolicCombo> {
    let ea = eps.require(a)?;
    match a.len() {
        0 | 1 => domain(format!("witness expressions need at least two indices, got {a}")),
        2 => Ok(SymbolicCombo::e(&IndexTuple::from_ids(&[a.at(0), a.at(1), ea]))),
        m => {
            let sign = if m % 2 == 0 { 1 } else { -1 };
            Ok(star(&verification_combo(a, eps)?, ea).scaled(sign))
        }
    }
}

/// Verification sum for `b`, `|b| ≥ 3`: `e(b) − Σ_i (−1)^i witness_combo(b^i)`.
pub fn verification_combo(b: &OrdSet, eps: &EpsilonAssignment) -> Result<SymbolicCombo> {
    if b.len() < 3 {
        return domain(format!("verification sums need at least three indices, got {b}"));
    }
    let mut out = SymbolicCombo::e_set(b);
    for i in 0..b.len() {
        let face = remove_at(b, i);
        let sign = if i % 2 == 0 { -1 } else { 1 };
        out = out.plus_scaled(&witness_combo(&face, eps)?, sign);
    }
    Ok(out)
}

fn remove_at(b: &OrdSet, i: usize) -> OrdSet {
    let mut v = b.as_slice().to_vec();
    v.remove(i);
    OrdSet::from_unsorted(v)
}

/// The tuples `d_ā` over short segments `ā` of `b`.
pub fn short_segment_sets(b: &OrdSet, eps: &EpsilonAssignment) -> Result<BTreeSet<IndexTuple>> {
    segments(b)?
        .iter()
        .filter(|s| !s.is_long())
        .map(|s| Ok(IndexTuple::from_ids(d_of(s, eps)?.as_slice())))
        .collect()
}

/// Every term of `combo` is one of the `allowed` tuples.
pub fn combo_has_shape(combo: &SymbolicCombo, allowed: &BTreeSet<IndexTuple>) -> bool {
    combo.terms.keys().all(|t| allowed.contains(t))
}

/// Structural form of the recursion at `b ∈ [X]^{n+1}`: pairs expand to a
/// single `e(d_⟨a⟩)`; the verification sum minus `e(b)` uses only `d_ā` for
/// short segments of the `n`-subsets; the next witness uses only `d_ā` for
/// short segments of `b`.
pub fn check_a_c_form(n: usize, b: &OrdSet, eps: &EpsilonAssignment) -> Result<bool> {
    if n < 2 || b.len() != n + 1 {
        return domain(format!("need n ≥ 2 and |b| = n + 1, got n = {n}, b = {b}"));
    }
    for pair in b.subsets(2) {
        let seg = SubsetFinalSegment::new(vec![pair.clone()])?;
        if witness_combo(&pair, eps)? != SymbolicCombo::e_set(&d_of(&seg, eps)?) {
            return Ok(false);
        }
    }
    let rest = verification_combo(b, eps)?.plus_scaled(&SymbolicCombo::e_set(b), -1);
    let mut allowed_c = BTreeSet::new();
    for i in 0..b.len() {
        allowed_c.extend(short_segment_sets(&remove_at(b, i), eps)?);
    }
    if !combo_has_shape(&rest, &allowed_c) {
        return Ok(false);
    }
    Ok(combo_has_shape(&witness_combo(b, eps)?, &short_segment_sets(b, eps)?))
}

/// `Σ cᵢ·e(tᵢ)` on the intersection of the term domains.
pub fn evaluate(l: &SymbolicCombo, phi: &Family) -> Result<SparseZFn> {
    let mut terms = l.terms.iter();
    let Some((t0, &c0)) = terms.next() else {
        return Ok(SparseZFn::zero(crate::family::single_witness_domain(phi.functions(), phi.cap())));
    };
    let mut acc = phi.boundary(t0)?.scale(c0);
    for (t, &c) in terms {
        acc = acc.add_scaled(&phi.boundary(t)?, c);
    }
    Ok(acc)
}

pub fn evaluate_at(l: &SymbolicCombo, phi: &Family, p: GridPoint) -> Result<i64> {
    let mut acc = 0i64;
    for (t, &c) in &l.terms {
        acc = phi
            .boundary_at(t, p)?
            .checked_mul(c)
            .and_then(|v| v.checked_add(acc))
            .ok_or(Error::Overflow("combo evaluation"))?;
    }
    Ok(acc)
}

/// `e(d_ā)(p)` for each long string of `b`.
pub fn long_string_values(b: &OrdSet, eps: &EpsilonAssignment, phi: &Family, p: GridPoint) -> Result<Vec<(SubsetFinalSegment, i64)>> {
    long_strings(b)?
        .into_iter()
        .map(|s| {
            let d = IndexTuple::from_ids(d_of(&s, eps)?.as_slice());
            let v = phi.boundary_at(&d, p)?;
            Ok((s, v))
        })
        .collect()
}

/// Verifies that every long string of `b` evaluates to `w` at `p` and that
/// `p` lies in the region of every `ε_a`, then reports whether the
/// verification sum vanishes at `p`.
pub fn check_cancellation(b: &OrdSet, eps: &EpsilonAssignment, phi: &Family, p: GridPoint, w: i64) -> Result<bool> {
    let n = phi.arity();
    if n < 2 || b.len() != n + 1 {
        return Err(Error::Arity {
            expected: n + 1,
            found: b.len(),
        });
    }
    for s in 1..=b.len() {
        for a in b.subsets(s) {
            let e = eps.get(&a).ok_or_else(|| Error::Precondition(format!("no ε assigned to {a}")))?;
            if !phi.functions().get(Index(e))?.contains(p) {
                return Err(Error::Precondition(format!(
                    "({}, {}) is outside the region of ε{a} = {e}",
                    p.j, p.k
                )));
            }
        }
    }
    for (s, v) in long_string_values(b, eps, phi, p)? {
        if v != w {
            let chain: Vec<String> = s.chain().iter().map(|a| a.to_string()).collect();
            return Err(Error::Precondition(format!(
                "long string {} evaluates to {v}, not {w}",
                chain.join(" ⊆ ")
            )));
        }
    }
    Ok(evaluate_at(&verification_combo(b, eps)?, phi, p)? == 0)
}

/// `ψ_a(p)` is the witness expression of `a` evaluated at `p` with the
/// assignment at `p`, for `p` above the threshold, and 0 below it.
pub fn build_psi(phi: &Family, ceps: &CoordEpsilonAssignment, a_set: &BTreeSet<Index>) -> Result<Family> {
    let n = phi.arity();
    if n < 2 {
        return domain("witness expressions need arity at least 2");
    }
    let fs = Arc::new(phi.functions().restrict(a_set)?);
    Family::from_fn(n, fs, phi.cap().cloned(), |t, dom| {
        let a = OrdSet::from_unsorted(t.entries().iter().map(|i| i.0));
        let mut entries = Vec::new();
        for p in dom.points().filter(|p| ceps.threshold.admits(*p)) {
            let eps = ceps
                .at(p)
                .ok_or_else(|| Error::Precondition(format!("no ε at ({}, {})", p.j, p.k)))?;
            let combo = witness_combo(&a, eps).map_err(|e| Error::Precondition(format!("at ({}, {}): {e}", p.j, p.k)))?;
            entries.push((p, evaluate_at(&combo, phi, p)?));
        }
        SparseZFn::from_entries(dom.clone(), entries)
    })
}

/// Backtracking search for a per-point assignment with `ε_a` drawn from pool
/// `|a|−1`, `p ∈ I(f_{ε_a})`, and every long string of every `(n+1)`-set
/// covering `p` evaluating to one common value. `budget` bounds the search
/// nodes at each point.
pub fn search_coord_epsilon(
    phi: &Family,
    a_set: &BTreeSet<Index>,
    pools: &[Vec<u32>],
    threshold: Threshold,
    budget: u64,
    exec: Exec,
) -> Result<Option<CoordEpsilonAssignment>> {
    let n = phi.arity();
    if pools.len() != n + 1 {
        return domain(format!("expected {} pools, found {}", n + 1, pools.len()));
    }
    for w in pools.windows(2) {
        if let (Some(hi), Some(lo)) = (w[0].iter().max(), w[1].iter().min()) {
            if hi >= lo {
                return domain("pools must be increasing disjoint blocks");
            }
        }
    }
    if let Some(i) = a_set.iter().find(|i| !pools[0].contains(&i.0)) {
        return domain(format!("index {i} is not in pool 0"));
    }
    let fset = phi.functions();
    let points = admissible_points(fset, a_set, threshold)?;
    let found = exec.try_map(&points, |&p| -> Result<Option<(GridPoint, EpsilonAssignment)>> {
        let cover = cover_within(fset, a_set, p)?;
        Ok(search_point(phi, p, &cover, pools, budget)?.map(|e| (p, e)))
    })?;
    let mut cells = BTreeMap::new();
    for r in found {
        match r {
            Some((p, e)) => {
                cells.insert(p, e);
            }
            None => return Ok(None),
        }
    }
    Ok(Some(CoordEpsilonAssignment { threshold, cells }))
}

struct PointSearch<'a> {
    phi: &'a Family,
    p: GridPoint,
    vars: Vec<OrdSet>,
    candidates: Vec<Vec<u32>>,
    tops: Vec<(OrdSet, Vec<SubsetFinalSegment>)>,
    checks: Vec<Vec<usize>>,
    nodes: u64,
    budget: u64,
}

fn search_point(phi: &Family, p: GridPoint, cover: &OrdSet, pools: &[Vec<u32>], budget: u64) -> Result<Option<EpsilonAssignment>> {
    let n = phi.arity();
    let fset = phi.functions();
    let mut candidates = vec![Vec::new()];
    for pool in &pools[1..] {
        let mut c = Vec::new();
        for &g in pool {
            if fset.get(Index(g))?.contains(p) {
                c.push(g);
            }
        }
        candidates.push(c);
    }
    let vars: Vec<OrdSet> = (2..=n.min(cover.len())).flat_map(|s| cover.subsets(s)).collect();
    if vars.iter().any(|a| candidates[a.len() - 1].is_empty()) {
        return Ok(None);
    }
    let top_sets = if cover.len() > n { cover.subsets(n + 1) } else { Vec::new() };
    let mut tops = Vec::new();
    let mut checks = vec![Vec::new(); vars.len() + 1];
    for b in top_sets {
        let last = vars.iter().rposition(|a| a.is_subset(&b)).map_or(0, |v| v + 1);
        checks[last].push(tops.len());
        tops.push((b.clone(), long_strings(&b)?));
    }
    let mut s = PointSearch {
        phi,
        p,
        vars,
        candidates,
        tops,
        checks,
        nodes: 0,
        budget,
    };
    let mut partial = BTreeMap::new();
    if !s.close_tops(0, &mut partial)? {
        return Ok(None);
    }
    if !s.descend(0, &mut partial)? {
        return Ok(None);
    }
    EpsilonAssignment::new(partial).map(Some)
}

impl PointSearch<'_> {
    fn descend(&mut self, v: usize, partial: &mut BTreeMap<OrdSet, u32>) -> Result<bool> {
        if v == self.vars.len() {
            return Ok(true);
        }
        let a = self.vars[v].clone();
        for c in self.candidates[a.len() - 1].clone() {
            self.nodes += 1;
            if self.nodes > self.budget {
                return Err(Error::Budget(format!(
                    "ε search at ({}, {}) exceeded {} nodes",
                    self.p.j, self.p.k, self.budget
                )));
            }
            partial.insert(a.clone(), c);
            if self.close_tops(v + 1, partial)? && self.descend(v + 1, partial)? {
                return Ok(true);
            }
            for &ti in &self.checks[v + 1] {
                partial.remove(&self.tops[ti].0);
            }
        }
        partial.remove(&a);
        Ok(false)
    }

    /// Picks `ε_b` for the top sets whose proper subsets are now assigned.
    fn close_tops(&mut self, slot: usize, partial: &mut BTreeMap<OrdSet, u32>) -> Result<bool> {
        let n = self.phi.arity();
        for &ti in &self.checks[slot].clone() {
            let (b, strings) = &self.tops[ti];
            let mut chosen = None;
            for &g in &self.candidates[n] {
                partial.insert(b.clone(), g);
                let eps = EpsilonAssignment { map: partial.clone() };
                let mut common = None;
                let mut ok = true;
                for s in strings {
                    let d = IndexTuple::from_ids(d_of(s, &eps)?.as_slice());
                    let v = self.phi.boundary_at(&d, self.p)?;
                    if *common.get_or_insert(v) != v {
                        ok = false;
                        break;
                    }
                }
                partial.remove(b);
                if ok {
                    chosen = Some(g);
                    break;
                }
            }
            match chosen {
                Some(g) => {
                    partial.insert(b.clone(), g);
                }
                None => return Ok(false),
            }
        }
        Ok(true)
    }
}

/// A verification instance at one point: every long string of `b` evaluates
/// to `w` and every `ε_a` region contains `point`.
#[derive(Debug, Clone)]
pub struct CancellationInstance {
    pub phi: Family,
    pub b: OrdSet,
    pub eps: EpsilonAssignment,
    pub point: GridPoint,
    pub w: i64,
}

/// `b = {0..n}`, `ε` a random injection of each size class into its own
/// block, random `Φ`, then the face of each long string's `d` that omits
/// `ε_b` is adjusted so the string evaluates to `w`.
pub fn plant_cancellation_instance(seed: u64, n: usize, w: i64) -> Result<CancellationInstance> {
    if n < 2 {
        return domain("cancellation instances need n ≥ 2");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = OrdSet::from_unsorted(0..=n as u32);
    let mut next = n as u32 + 1;
    let mut map = BTreeMap::new();
    for s in 2..=n + 1 {
        let sets = b.subsets(s);
        let mut ids: Vec<u32> = (next..next + sets.len() as u32).collect();
        ids.shuffle(&mut rng);
        next += sets.len() as u32;
        map.extend(sets.into_iter().zip(ids));
    }
    let eps = EpsilonAssignment::new(map)?;
    let columns = rng.gen_range(1..=3usize);
    let values: Vec<(u32, Vec<u32>)> = (0..next)
        .map(|i| (i, (0..columns).map(|_| rng.gen_range(0..=2)).collect()))
        .collect();
    let fs = Arc::new(FunctionSet::from_values(&values)?);
    let point = GridPoint::new(rng.gen_range(0..columns as u32), 0);
    let mut phi = Family::from_fn(n, fs, None, |_, d| {
        SparseZFn::from_entries(d.clone(), d.points().map(|p| (p, rng.gen_range(-4..=4))))
    })?;
    for s in long_strings(&b)? {
        let d = IndexTuple::from_ids(d_of(&s, &eps)?.as_slice());
        let current = phi.boundary_at(&d, point)?;
        let top = d.remove_entry(n)?;
        let sign = if n.is_multiple_of(2) { 1 } else { -1 };
        let cell = phi.stored_mut(&top).expect("increasing face");
        let old = cell.at(point);
        cell.set(point, old + sign * (w - current))?;
    }
    Ok(CancellationInstance { phi, b, eps, point, w })
}

/// A search instance: `A` is pool 0; later pools hold dominating functions,
/// the first `decoys` of each carrying noise above the threshold.
#[derive(Debug, Clone)]
pub struct PlantedSearch {
    pub phi: Family,
    pub a_set: BTreeSet<Index>,
    pub pools: Vec<Vec<u32>>,
    pub threshold: Threshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchShape {
    pub arity: usize,
    pub a_size: usize,
    pub good: usize,
    pub decoys: usize,
    pub columns: usize,
    pub max_value: u32,
    pub threshold: u32,
    /// Adds the family equal to `w` on every increasing tuple, whose boundary
    /// is `w` on every `(n+1)`-tuple; needs even arity when nonzero.
    pub offset: i64,
}

/// `Φ = δΨ + N_low + N_decoy + w·K`: `N_low` lives in columns `≤ ℓ`,
/// `N_decoy` on tuples meeting a decoy, `K` is constant 1.
pub fn plant_search_instance(seed: u64, shape: SearchShape) -> Result<PlantedSearch> {
    let SearchShape {
        arity: n,
        a_size,
        good,
        decoys,
        columns,
        max_value,
        threshold,
        offset,
    } = shape;
    if n == 0 || a_size == 0 || good == 0 || columns == 0 {
        return domain("search instances need positive arity, |A|, pool size and columns");
    }
    if offset != 0 && n % 2 == 1 {
        return domain("a constant boundary offset needs even arity");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pools = vec![(0..a_size as u32).collect::<Vec<_>>()];
    let mut next = a_size as u32;
    let mut decoy_ids = BTreeSet::new();
    for _ in 1..=n {
        let block: Vec<u32> = (next..next + (good + decoys) as u32).collect();
        decoy_ids.extend(block[..decoys].iter().map(|&i| Index(i)));
        next += block.len() as u32;
        pools.push(block);
    }
    let mut values: Vec<(u32, Vec<u32>)> = pools[0]
        .iter()
        .map(|&i| (i, (0..columns).map(|_| rng.gen_range(0..=max_value)).collect()))
        .collect();
    values.extend((a_size as u32..next).map(|i| (i, vec![max_value; columns])));
    let fs = Arc::new(FunctionSet::from_values(&values)?);
    let l = Threshold(threshold);
    let base = if n == 1 {
        let global: BTreeMap<GridPoint, i64> = fs.join_all().region().points().map(|p| (p, rng.gen_range(-3..=3))).collect();
        Family::from_fn(1, fs.clone(), None, |_, d| {
            SparseZFn::from_entries(d.clone(), d.points().map(|p| (p, global[&p])))
        })?
    } else {
        Family::from_fn(n - 1, fs.clone(), None, |_, d| {
            SparseZFn::from_entries(d.clone(), d.points().map(|p| (p, rng.gen_range(-3..=3))))
        })?
        .coboundary()?
    };
    let noise = Family::from_fn(n, fs.clone(), None, |t, d| {
        let hits_decoy = t.entries().iter().any(|i| decoy_ids.contains(i));
        let mut entries = Vec::new();
        for p in d.points() {
            if !l.admits(p) || hits_decoy {
                entries.push((p, rng.gen_range(-2..=2)));
            }
        }
        SparseZFn::from_entries(d.clone(), entries)
    })?;
    let constant = Family::from_fn(n, fs.clone(), None, |_, d| {
        SparseZFn::from_entries(d.clone(), d.points().map(|p| (p, offset)))
    })?;
    Ok(PlantedSearch {
        phi: base.add_scaled(&noise, 1)?.add_scaled(&constant, 1)?,
        a_set: pools[0].iter().map(|&i| Index(i)).collect(),
        pools,
        threshold: l,
    })
}
