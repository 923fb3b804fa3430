//! Alternating cochain complexes of the truncated systems `A`, `B` and
//! `B/A`, their cohomology, the contracting homotopy for `B`, the connecting
//! map, and the type-I / type-II trivialization solvers.
//!
//! Truncation makes direct sums and products coincide, so the ideal of
//! finitely supported functions is modeled by a column split `ℓ`: `A` lives
//! on columns `≤ ℓ`, `B/A` on columns `> ℓ`, `B` on every column. Bases list
//! tuples lexicographically and grid points column-major within a tuple.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::family::{single_witness_domain, Family, FunctionSet, SparseZFn, Threshold, TypeIWitness};
use crate::grid::{increasing_tuples, GridPoint, Index, IndexTuple, TruncFn};
use crate::linalg::{invariant_factors, smith_normal_form, IntMatrix, LinearSolution, Snf};
use crate::par::Exec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SystemTag {
    A,
    B,
    BmodA,
}

impl SystemTag {
    pub fn admits(self, split: Threshold, p: GridPoint) -> bool {
        match self {
            SystemTag::A => p.j <= split.0,
            SystemTag::B => true,
            SystemTag::BmodA => p.j > split.0,
        }
    }
}

impl fmt::Display for SystemTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SystemTag::A => "A",
            SystemTag::B => "B",
            SystemTag::BmodA => "BmodA",
        })
    }
}

impl FromStr for SystemTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" => Ok(SystemTag::A),
            "B" => Ok(SystemTag::B),
            "BmodA" | "B/A" => Ok(SystemTag::BmodA),
            other => domain(format!("unknown system {other:?}")),
        }
    }
}

/// Degree-`n` cochains: one integer per `(t, x)` with `t` an increasing
/// `(n+1)`-tuple and `x ∈ I(∧t)` admitted by the split.
#[derive(Debug, Clone)]
pub struct CochainSpace {
    tag: SystemTag,
    degree: usize,
    split: Threshold,
    fset: Arc<FunctionSet>,
    basis: Vec<(IndexTuple, GridPoint)>,
    lookup: HashMap<(IndexTuple, GridPoint), usize>,
}

impl PartialEq for CochainSpace {
    fn eq(&self, other: &Self) -> bool {
        self.tag == other.tag && self.degree == other.degree && self.split == other.split && self.basis == other.basis
    }
}

impl CochainSpace {
    pub fn new(tag: SystemTag, fset: Arc<FunctionSet>, split: Threshold, degree: usize) -> Result<Self> {
        if split.0 as usize > fset.columns() {
            return domain(format!("split {} exceeds the column bound {}", split.0, fset.columns()));
        }
        let mut basis = Vec::new();
        for t in fset.tuples(degree + 1) {
            for p in fset.region_of(&t, None)?.points() {
                if tag.admits(split, p) {
                    basis.push((t.clone(), p));
                }
            }
        }
        let lookup = basis.iter().cloned().enumerate().map(|(i, k)| (k, i)).collect();
        Ok(CochainSpace {
            tag,
            degree,
            split,
            fset,
            basis,
            lookup,
        })
    }

    pub fn tag(&self) -> SystemTag {
        self.tag
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn split(&self) -> Threshold {
        self.split
    }

    pub fn functions(&self) -> &Arc<FunctionSet> {
        &self.fset
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[(IndexTuple, GridPoint)] {
        &self.basis
    }

    pub fn position(&self, t: &IndexTuple, p: GridPoint) -> Option<usize> {
        self.lookup.get(&(t.clone(), p)).copied()
    }

    /// The same system one degree up.
    pub fn next(&self) -> Result<CochainSpace> {
        CochainSpace::new(self.tag, self.fset.clone(), self.split, self.degree + 1)
    }

    pub fn prev(&self) -> Result<CochainSpace> {
        if self.degree == 0 {
            return domain("no cochains below degree 0");
        }
        CochainSpace::new(self.tag, self.fset.clone(), self.split, self.degree - 1)
    }
}

/// A cochain: one value per basis element of its space.
#[derive(Debug, Clone, PartialEq)]
pub struct Cochain {
    space: Arc<CochainSpace>,
    values: Vec<i64>,
}

impl Cochain {
    pub fn zero(space: Arc<CochainSpace>) -> Self {
        let values = vec![0; space.dim()];
        Cochain { space, values }
    }

    pub fn new(space: Arc<CochainSpace>, values: Vec<i64>) -> Result<Self> {
        if values.len() != space.dim() {
            return domain("cochain length does not match the basis");
        }
        Ok(Cochain { space, values })
    }

    pub fn from_fn<F>(space: Arc<CochainSpace>, mut f: F) -> Self
    where
        F: FnMut(&IndexTuple, GridPoint) -> i64,
    {
        let values = space.basis.iter().map(|(t, p)| f(t, *p)).collect();
        Cochain { space, values }
    }

    pub fn space(&self) -> &Arc<CochainSpace> {
        &self.space
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0)
    }

    /// Sign-extended value at any tuple of the right length; `None` when the
    /// point is not in the space for that tuple.
    pub fn value(&self, t: &IndexTuple, p: GridPoint) -> Option<i64> {
        let (sorted, sign) = t.sort_with_sign();
        if sign == 0 {
            let inside = self.space.tag.admits(self.space.split, p)
                && t.entries().iter().all(|&i| self.space.fset.get(i).is_ok_and(|f| f.contains(p)));
            return inside.then_some(0);
        }
        self.space.position(&sorted, p).map(|i| self.values[i] * sign as i64)
    }
}

/// The matrix of `d^n` together with its source and target spaces.
#[derive(Debug, Clone)]
pub struct Differential {
    pub source: Arc<CochainSpace>,
    pub target: Arc<CochainSpace>,
    pub matrix: IntMatrix,
}

impl Differential {
    pub fn apply(&self, c: &Cochain) -> Result<Cochain> {
        if *c.space != *self.source {
            return domain("cochain is not in the source space");
        }
        Cochain::new(self.target.clone(), self.matrix.mul_vec(&c.values)?)
    }
}

/// `d^n c(t) = Σ_i (−1)^i c(t^i)↾I(∧t)`, assembled per target basis element.
pub fn differential(space: &CochainSpace) -> Result<Differential> {
    differential_with(space, Exec::default())
}

pub fn differential_with(space: &CochainSpace, exec: Exec) -> Result<Differential> {
    let source = Arc::new(space.clone());
    let target = Arc::new(space.next()?);
    let rows: Vec<Vec<(usize, i64)>> = exec.try_map(&target.basis, |(t, p)| {
        (0..t.len())
            .map(|i| {
                let face = t.remove_entry(i)?;
                let col = source
                    .position(&face, *p)
                    .ok_or_else(|| Error::Domain(format!("face {face} missing from the source basis")))?;
                Ok((col, if i % 2 == 0 { 1 } else { -1 }))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut matrix = IntMatrix::zeros(target.dim(), source.dim());
    for (r, entries) in rows.iter().enumerate() {
        for &(c, s) in entries {
            matrix.set(r, c, matrix.get(r, c) + s);
        }
    }
    Ok(Differential { source, target, matrix })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohomologyReport {
    pub degree: usize,
    pub rank: usize,
    pub torsion: Vec<i64>,
}

impl CohomologyReport {
    pub fn vanishes(&self) -> bool {
        self.rank == 0 && self.torsion.is_empty()
    }
}

/// `H^n = ker d^n / im d^{n−1}` from the invariant factors of both maps.
pub fn cohomology(tag: SystemTag, fset: Arc<FunctionSet>, split: Threshold, n: usize) -> Result<CohomologyReport> {
    let space = CochainSpace::new(tag, fset, split, n)?;
    let out = invariant_factors(&differential(&space)?.matrix)?;
    let inc = if n == 0 {
        Vec::new()
    } else {
        invariant_factors(&differential(&space.prev()?)?.matrix)?
    };
    Ok(CohomologyReport {
        degree: n,
        rank: space.dim() - out.len() - inc.len(),
        torsion: inc.into_iter().filter(|&d| d > 1).collect(),
    })
}

/// `b(t)(x) = (−1)^n c(t ⌢ f_x)(x)` for a degree-`n` cocycle `c`, where
/// `choice(x) = f_x` must satisfy `x ∈ I(f_x)`. The split only filters
/// points, so the formula contracts every tag.
pub fn contracting_homotopy(c: &Cochain, choice: &dyn Fn(GridPoint) -> Index) -> Result<Cochain> {
    let n = c.space.degree;
    if n == 0 {
        return domain("the homotopy needs degree at least 1");
    }
    let d = differential(&c.space)?;
    if !d.apply(c)?.is_zero() {
        return Err(Error::Precondition("input is not a cocycle".into()));
    }
    let lower = Arc::new(c.space.prev()?);
    let sign = if n.is_multiple_of(2) { 1 } else { -1 };
    let mut values = Vec::with_capacity(lower.dim());
    for (t, p) in &lower.basis {
        let fx = checked_choice(&c.space.fset, None, choice, *p)?;
        let v = c
            .value(&t.push(fx), *p)
            .ok_or_else(|| Error::Domain("cocycle undefined at an extended tuple".into()))?;
        values.push(sign * v);
    }
    Cochain::new(lower, values)
}

fn checked_choice(fset: &FunctionSet, cap: Option<&TruncFn>, choice: &dyn Fn(GridPoint) -> Index, p: GridPoint) -> Result<Index> {
    let fx = choice(p);
    let ok = fset.get(fx)?.contains(p) && cap.is_none_or(|g| g.contains(p));
    if ok {
        Ok(fx)
    } else {
        Err(Error::Precondition(format!(
            "choice maps ({}, {}) to {fx}, whose region misses it",
            p.j, p.k
        )))
    }
}

/// Choice function picking the smallest index whose region covers a point.
pub fn lowest_cover(fset: &FunctionSet) -> impl Fn(GridPoint) -> Index + '_ {
    move |p| fset.covering(p).first().copied().unwrap_or(Index(u32::MAX))
}

/// Choice function picking the largest covering index.
pub fn highest_cover(fset: &FunctionSet) -> impl Fn(GridPoint) -> Index + '_ {
    move |p| fset.covering(p).last().copied().unwrap_or(Index(u32::MAX))
}

/// The homotopy on an exactly coherent family of arity `m ≥ 2`, producing an
/// arity `m − 1` family whose coboundary is the input.
pub fn contracting_homotopy_family(c: &Family, choice: &dyn Fn(GridPoint) -> Index) -> Result<Family> {
    let m = c.arity();
    if m < 2 {
        return domain("the homotopy needs arity at least 2");
    }
    if c.first_incoherence_anywhere().is_some() {
        return Err(Error::Precondition("input is not exactly coherent".into()));
    }
    let sign = if (m - 1).is_multiple_of(2) { 1 } else { -1 };
    Family::from_fn(m - 1, c.functions().clone(), c.cap().cloned(), |t, dom| {
        let mut entries = Vec::new();
        for p in dom.points() {
            let fx = checked_choice(c.functions(), c.cap(), choice, p)?;
            entries.push((p, sign * c.value(&t.push(fx), p)?));
        }
        SparseZFn::from_entries(dom.clone(), entries)
    })
}

/// The degree-`(n+1)` `A`-cocycle `t ↦ Σ_i (−1)^i φ_{t^i}` of an arity-`(n+1)`
/// family coherent above `ℓ`.
pub fn connecting_map(phi: &Family, l: Threshold) -> Result<Cochain> {
    if phi.cap().is_some() {
        return domain("the connecting map is defined for uncapped families");
    }
    if let Some((t, p)) = phi.first_incoherence(l) {
        return Err(Error::Precondition(format!(
            "boundary at {t} is nonzero at ({}, {}), outside the A-split",
            p.j, p.k
        )));
    }
    let space = Arc::new(CochainSpace::new(SystemTag::A, phi.functions().clone(), l, phi.arity())?);
    let mut values = Vec::with_capacity(space.dim());
    for (t, p) in space.basis() {
        values.push(phi.boundary_at(t, *p)?);
    }
    let c = Cochain::new(space.clone(), values)?;
    if !differential(&space)?.apply(&c)?.is_zero() {
        return Err(Error::Precondition("connecting cocycle failed d∘d = 0".into()));
    }
    Ok(c)
}

/// Either a witness or a certificate that none exists.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome<W, C> {
    Found(W),
    Infeasible(C),
}

impl<W, C> Outcome<W, C> {
    pub fn found(self) -> Option<W> {
        match self {
            Outcome::Found(w) => Some(w),
            Outcome::Infeasible(_) => None,
        }
    }

    pub fn is_found(&self) -> bool {
        matches!(self, Outcome::Found(_))
    }
}

/// A global obstruction: `u·M ≡ 0` and `u·c ≢ 0 (mod modulus)` for the full
/// coboundary matrix `M` into the cochain's space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoboundaryObstruction {
    pub multiplier: Vec<i64>,
    pub modulus: i64,
}

/// Coboundary membership for a cochain of degree `n` via the full matrix of
/// `d^{n−1}`; returns a preimage when one exists.
pub fn coboundary_preimage(c: &Cochain) -> Result<Outcome<Cochain, CoboundaryObstruction>> {
    if c.space.degree == 0 {
        return Ok(if c.is_zero() {
            Outcome::Found(Cochain::zero(c.space.clone()))
        } else {
            let i = c.values.iter().position(|&v| v != 0).expect("nonzero");
            let mut multiplier = vec![0; c.values.len()];
            multiplier[i] = 1;
            Outcome::Infeasible(CoboundaryObstruction { multiplier, modulus: 0 })
        });
    }
    let d = differential(&c.space.prev()?)?;
    let snf = smith_normal_form(&d.matrix)?;
    Ok(match snf.solve(&c.values)? {
        LinearSolution::Solution(x) => Outcome::Found(Cochain::new(d.source, x)?),
        LinearSolution::Infeasible(cert) => Outcome::Infeasible(CoboundaryObstruction {
            multiplier: cert.multiplier,
            modulus: cert.modulus,
        }),
    })
}

/// The local integer system at one grid point: rows are the `r`-tuples of
/// the covering indices, columns the `(r−1)`-tuples, entries the signs of
/// the coboundary.
struct LocalSystem {
    rows: Vec<IndexTuple>,
    cols: Vec<IndexTuple>,
    matrix: IntMatrix,
    snf: Snf,
}

impl LocalSystem {
    fn build(cover: &[Index], r: usize, with_vars: bool) -> Result<LocalSystem> {
        let rows: Vec<IndexTuple> = increasing_tuples(cover, r).into_iter().map(IndexTuple).collect();
        let cols: Vec<IndexTuple> = if with_vars {
            increasing_tuples(cover, r - 1).into_iter().map(IndexTuple).collect()
        } else {
            Vec::new()
        };
        let pos: HashMap<&IndexTuple, usize> = cols.iter().enumerate().map(|(i, t)| (t, i)).collect();
        let mut matrix = IntMatrix::zeros(rows.len(), cols.len());
        if with_vars {
            for (ri, t) in rows.iter().enumerate() {
                for i in 0..t.len() {
                    let c = pos[&t.remove_entry(i)?];
                    matrix.set(ri, c, if i % 2 == 0 { 1 } else { -1 });
                }
            }
        }
        let snf = smith_normal_form(&matrix)?;
        Ok(LocalSystem { rows, cols, matrix, snf })
    }
}

/// An obstruction at a single grid point: the multiplier is indexed by the
/// equation tuples, listed in `rows`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalCertificate {
    pub point: GridPoint,
    pub rows: Vec<IndexTuple>,
    pub multiplier: Vec<i64>,
    pub modulus: i64,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    TypeI,
    TypeII,
}

fn cover_at(phi: &Family, p: GridPoint) -> Vec<Index> {
    if phi.cap().is_some_and(|g| !g.contains(p)) {
        return Vec::new();
    }
    phi.functions().covering(p)
}

fn local_rhs(phi: &Family, kind: Kind, rows: &[IndexTuple], p: GridPoint) -> Result<Vec<i64>> {
    rows.iter()
        .map(|t| match kind {
            Kind::TypeI => phi.value(t, p),
            Kind::TypeII => phi.boundary_at(t, p),
        })
        .collect()
}

/// Length of the equation tuples.
fn equation_len(phi: &Family, kind: Kind) -> usize {
    match kind {
        Kind::TypeI => phi.arity(),
        Kind::TypeII => phi.arity() + 1,
    }
}

/// Whether the unknowns may be nonzero at `p`.
fn has_vars(kind: Kind, l: Threshold, p: GridPoint) -> bool {
    match kind {
        Kind::TypeI => l.admits(p),
        Kind::TypeII => !l.admits(p),
    }
}

type LocalSolve = std::result::Result<(GridPoint, Vec<IndexTuple>, Vec<i64>), LocalCertificate>;

/// Solves every local system the problem needs, sharing one Smith form per
/// distinct covering set.
fn solve_pointwise(phi: &Family, kind: Kind, l: Threshold, exec: Exec) -> Result<Vec<LocalSolve>> {
    let r = equation_len(phi, kind);
    let dom = single_witness_domain(phi.functions(), phi.cap());
    let points: Vec<(GridPoint, Vec<Index>)> = dom
        .points()
        .map(|p| (p, cover_at(phi, p)))
        .filter(|(p, c)| c.len() >= r && (kind == Kind::TypeII || l.admits(*p)))
        .collect();
    let mut keys: Vec<(Vec<Index>, bool)> = points.iter().map(|(p, c)| (c.clone(), has_vars(kind, l, *p))).collect();
    keys.sort();
    keys.dedup();
    let systems = exec.try_map(&keys, |(c, vars)| LocalSystem::build(c, r, *vars))?;
    let systems: HashMap<(Vec<Index>, bool), LocalSystem> = keys.into_iter().zip(systems).collect();
    exec.try_map(&points, |(p, c)| {
        let sys = &systems[&(c.clone(), has_vars(kind, l, *p))];
        let rhs = local_rhs(phi, kind, &sys.rows, *p)?;
        Ok(match sys.snf.solve(&rhs)? {
            LinearSolution::Solution(x) => Ok((*p, sys.cols.clone(), x)),
            LinearSolution::Infeasible(cert) => Err(LocalCertificate {
                point: *p,
                rows: sys.rows.clone(),
                multiplier: cert.multiplier,
                modulus: cert.modulus,
            }),
        })
    })
}

fn verify_local(phi: &Family, kind: Kind, l: Threshold, cert: &LocalCertificate) -> Result<bool> {
    let p = cert.point;
    let (r, vars) = (equation_len(phi, kind), has_vars(kind, l, p));
    if kind == Kind::TypeI && !vars {
        return Ok(false);
    }
    let cover = cover_at(phi, p);
    if cover.len() < r {
        return Ok(false);
    }
    let sys = LocalSystem::build(&cover, r, vars)?;
    if sys.rows != cert.rows || cert.multiplier.len() != sys.rows.len() {
        return Ok(false);
    }
    let rhs = local_rhs(phi, kind, &sys.rows, p)?;
    crate::linalg::Infeasibility {
        multiplier: cert.multiplier.clone(),
        modulus: cert.modulus,
    }
    .verify(&sys.matrix, &rhs)
}

/// Re-derives the local system at the certificate's point and checks it.
pub fn verify_type_i_certificate(phi: &Family, l: Threshold, cert: &LocalCertificate) -> Result<bool> {
    verify_local(phi, Kind::TypeI, l, cert)
}

pub fn verify_type_ii_certificate(phi: &Family, l: Threshold, cert: &LocalCertificate) -> Result<bool> {
    verify_local(phi, Kind::TypeII, l, cert)
}

/// A type-I witness at `ℓ`, or the first point (column-major) whose local
/// system has no integer solution.
pub fn solve_type_i(phi: &Family, l: Threshold) -> Result<Outcome<TypeIWitness, LocalCertificate>> {
    solve_type_i_with(phi, l, Exec::Sequential)
}

pub fn solve_type_i_with(phi: &Family, l: Threshold, exec: Exec) -> Result<Outcome<TypeIWitness, LocalCertificate>> {
    let solved = solve_pointwise(phi, Kind::TypeI, l, exec)?;
    let mut vals: BTreeMap<(IndexTuple, GridPoint), i64> = BTreeMap::new();
    for s in solved {
        match s {
            Err(cert) => return Ok(Outcome::Infeasible(cert)),
            Ok((p, cols, x)) => {
                for (t, v) in cols.into_iter().zip(x) {
                    if v != 0 {
                        vals.insert((t, p), v);
                    }
                }
            }
        }
    }
    let n = phi.arity();
    let w = if n == 1 {
        let dom = single_witness_domain(phi.functions(), phi.cap());
        let entries = vals.into_iter().map(|((_, p), v)| (p, v));
        TypeIWitness::Single(SparseZFn::from_entries(dom, entries)?)
    } else {
        TypeIWitness::Family(family_from_values(n - 1, phi, &vals)?)
    };
    Ok(Outcome::Found(w))
}

fn family_from_values(arity: usize, like: &Family, vals: &BTreeMap<(IndexTuple, GridPoint), i64>) -> Result<Family> {
    Family::from_fn(arity, like.functions().clone(), like.cap().cloned(), |t, dom| {
        SparseZFn::from_entries(dom.clone(), dom.points().filter_map(|p| vals.get(&(t.clone(), p)).map(|v| (p, *v))))
    })
}

/// A type-II witness at `ℓ`: an alternating family supported in columns
/// `≤ ℓ` whose coboundary equals the boundary of `Φ` at every point.
pub fn solve_type_ii_at(phi: &Family, l: Threshold) -> Result<Outcome<Family, LocalCertificate>> {
    solve_type_ii_at_with(phi, l, Exec::Sequential)
}

pub fn solve_type_ii_at_with(phi: &Family, l: Threshold, exec: Exec) -> Result<Outcome<Family, LocalCertificate>> {
    let solved = solve_pointwise(phi, Kind::TypeII, l, exec)?;
    let mut vals = BTreeMap::new();
    for s in solved {
        match s {
            Err(cert) => return Ok(Outcome::Infeasible(cert)),
            Ok((p, cols, x)) => {
                for (t, v) in cols.into_iter().zip(x) {
                    if v != 0 {
                        vals.insert((t, p), v);
                    }
                }
            }
        }
    }
    Ok(Outcome::Found(family_from_values(phi.arity(), phi, &vals)?))
}

/// Smallest `ℓ ∈ 0..=J` admitting a type-II witness.
pub fn solve_type_ii(phi: &Family) -> Result<Option<(Threshold, Family)>> {
    for l in 0..=phi.columns() as u32 {
        if let Outcome::Found(psi) = solve_type_ii_at(phi, Threshold(l))? {
            return Ok(Some((Threshold(l), psi)));
        }
    }
    Ok(None)
}

/// Smallest `ℓ ∈ 0..=J` admitting a type-I witness.
pub fn solve_type_i_min(phi: &Family) -> Result<Option<(Threshold, TypeIWitness)>> {
    for l in 0..=phi.columns() as u32 {
        if let Outcome::Found(w) = solve_type_i(phi, Threshold(l))? {
            return Ok(Some((Threshold(l), w)));
        }
    }
    Ok(None)
}

/// `F = Φ − δΨ′`: same boundaries as `Φ` everywhere, and zero above `ℓ`
/// whenever `Ψ′` trivializes `Φ` there.
pub fn type_i_to_type_ii(phi: &Family, w: &TypeIWitness) -> Result<Family> {
    match w {
        TypeIWitness::Single(psi) => {
            if phi.arity() != 1 {
                return Err(Error::Arity {
                    expected: phi.arity() - 1,
                    found: 0,
                });
            }
            Family::from_fn(1, phi.functions().clone(), phi.cap().cloned(), |t, dom| {
                let f = phi.stored(t).expect("increasing tuple");
                let g = psi.restrict(dom);
                if g.domain() != dom {
                    return domain("witness does not cover every region");
                }
                Ok(f.add_scaled(&g, -1))
            })
        }
        TypeIWitness::Family(psi) => {
            if psi.arity() + 1 != phi.arity() {
                return Err(Error::Arity {
                    expected: phi.arity() - 1,
                    found: psi.arity(),
                });
            }
            phi.add_scaled(&psi.coboundary()?, -1)
        }
    }
}

/// From a type-II witness `Ψ` at `ℓ`: `c = zero_below(Φ − Ψ, ℓ)` is exactly
/// coherent, and contracting (or, for `n = 1`, gluing) it gives a type-I
/// witness valid above `max(ℓ, last column of supp Ψ)`.
pub fn type_ii_to_type_i(phi: &Family, psi: &Family, l: Threshold) -> Result<(Threshold, TypeIWitness)> {
    let c = phi.add_scaled(psi, -1)?.zero_below(l);
    let lifted = Threshold(l.0.max(psi.support_column_max().unwrap_or(0)));
    let fset = phi.functions();
    let choose = lowest_cover(fset);
    if phi.arity() == 1 {
        if let Some((t, p)) = c.first_incoherence_anywhere() {
            return Err(Error::Precondition(format!(
                "difference is not coherent at {t}, ({}, {})",
                p.j, p.k
            )));
        }
        let dom = single_witness_domain(fset, phi.cap());
        let mut entries = Vec::new();
        for p in dom.points() {
            let fx = checked_choice(fset, phi.cap(), &choose, p)?;
            entries.push((p, c.value(&IndexTuple::new(vec![fx]), p)?));
        }
        return Ok((lifted, TypeIWitness::Single(SparseZFn::from_entries(dom, entries)?)));
    }
    Ok((lifted, TypeIWitness::Family(contracting_homotopy_family(&c, &choose)?)))
}

impl Family {
    /// First `(t, p)` with a nonzero boundary at any column.
    pub fn first_incoherence_anywhere(&self) -> Option<(IndexTuple, GridPoint)> {
        for t in self.functions().tuples(self.arity() + 1) {
            let e = self.boundary(&t).expect("tuples come from the index set");
            let hit = e.nonzero().next();
            if let Some((p, _)) = hit {
                return Some((t, p));
            }
        }
        None
    }
}
