//! Aligned sets and uniform `n`-dimensional Δ-systems over finite grounds:
//! verification, roots derived from end-extensions, roots of addable
//! families, a seeded generator, and a budgeted monochromatic search.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::grid::{binomial, increasing_tuples};
use crate::par::Exec;

/// A finite strictly increasing set of ordinals.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct OrdSet(Vec<u32>);

impl TryFrom<Vec<u32>> for OrdSet {
    type Error = Error;
    fn try_from(v: Vec<u32>) -> Result<Self> {
        OrdSet::new(v)
    }
}

impl From<OrdSet> for Vec<u32> {
    fn from(s: OrdSet) -> Vec<u32> {
        s.0
    }
}

impl OrdSet {
    pub fn new(v: Vec<u32>) -> Result<Self> {
        if v.windows(2).any(|w| w[0] >= w[1]) {
            return domain(format!("{v:?} is not strictly increasing"));
        }
        Ok(OrdSet(v))
    }

    pub fn from_unsorted<I: IntoIterator<Item = u32>>(it: I) -> Self {
        let s: BTreeSet<u32> = it.into_iter().collect();
        OrdSet(s.into_iter().collect())
    }

    pub fn empty() -> Self {
        OrdSet(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `a(i)`.
    pub fn at(&self, i: usize) -> u32 {
        self.0[i]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn top(&self) -> Option<u32> {
        self.0.last().copied()
    }

    pub fn bottom(&self) -> Option<u32> {
        self.0.first().copied()
    }

    pub fn contains(&self, x: u32) -> bool {
        self.0.binary_search(&x).is_ok()
    }

    pub fn position(&self, x: u32) -> Option<usize> {
        self.0.binary_search(&x).ok()
    }

    /// `a[𝐦] = {a(i) | i ∈ 𝐦}`.
    pub fn select(&self, positions: &[usize]) -> OrdSet {
        OrdSet::from_unsorted(positions.iter().map(|&i| self.0[i]))
    }

    /// `|a ∩ α|`: how many elements lie below `x`.
    pub fn count_below(&self, x: u32) -> usize {
        self.0.partition_point(|&y| y < x)
    }

    pub fn insert(&self, x: u32) -> OrdSet {
        OrdSet::from_unsorted(self.0.iter().copied().chain([x]))
    }

    pub fn union(&self, other: &OrdSet) -> OrdSet {
        OrdSet::from_unsorted(self.0.iter().chain(&other.0).copied())
    }

    pub fn intersection(&self, other: &OrdSet) -> OrdSet {
        OrdSet(self.0.iter().copied().filter(|&x| other.contains(x)).collect())
    }

    pub fn is_subset(&self, other: &OrdSet) -> bool {
        self.0.iter().all(|&x| other.contains(x))
    }

    /// Prefix `a[m]`.
    pub fn prefix(&self, m: usize) -> OrdSet {
        OrdSet(self.0[..m].to_vec())
    }

    /// All `r`-element subsets, lexicographically.
    pub fn subsets(&self, r: usize) -> Vec<OrdSet> {
        increasing_tuples(&self.0, r).into_iter().map(OrdSet).collect()
    }
}

impl fmt::Display for OrdSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, "}}")
    }
}

/// `𝐫(a, b)` when `a` and `b` are aligned.
pub fn aligned(a: &OrdSet, b: &OrdSet) -> Option<Vec<usize>> {
    if a.len() != b.len() {
        return None;
    }
    let mut r = Vec::new();
    for (i, &x) in a.0.iter().enumerate() {
        if let Some(j) = b.position(x) {
            if j != i {
                return None;
            }
            r.push(i);
        }
    }
    Some(r)
}

fn mask_of(positions: &[usize]) -> usize {
    positions.iter().fold(0, |m, &i| m | (1 << i))
}

fn positions_of(mask: usize, n: usize) -> Vec<usize> {
    (0..n).filter(|i| mask & (1 << i) != 0).collect()
}

/// A verified uniform `n`-dimensional Δ-system with its `ρ` and roots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UniformDeltaSystem {
    dim: usize,
    ground: OrdSet,
    family: BTreeMap<OrdSet, OrdSet>,
    rho: usize,
    /// `roots[mask(𝐦)] = 𝐫_𝐦` as a set of positions below `ρ`.
    roots: Vec<Vec<usize>>,
}

impl UniformDeltaSystem {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ground(&self) -> &OrdSet {
        &self.ground
    }

    pub fn family(&self) -> &BTreeMap<OrdSet, OrdSet> {
        &self.family
    }

    pub fn rho(&self) -> usize {
        self.rho
    }

    /// `𝐫_𝐦` for `𝐦 ⊆ {0..n−1}`.
    pub fn root(&self, m: &[usize]) -> &[usize] {
        &self.roots[mask_of(m)]
    }

    pub fn u(&self, b: &OrdSet) -> Option<&OrdSet> {
        self.family.get(b)
    }

    /// Sorted `(𝐦, 𝐫_𝐦)` pairs.
    pub fn roots(&self) -> Vec<(Vec<usize>, Vec<usize>)> {
        let mut v: Vec<_> = (0..self.roots.len())
            .map(|m| (positions_of(m, self.dim), self.roots[m].clone()))
            .collect();
        v.sort();
        v
    }

    /// The set `u_a` for `|a| ≤ n`: the family value when `|a| = n`,
    /// otherwise `u_b[𝐫_{|a|}]` for an end-extension `b`, required to be
    /// independent of `b`.
    pub fn derive_root(&self, a: &OrdSet) -> Result<OrdSet> {
        let m = a.len();
        if m > self.dim {
            return domain(format!("{a} has more than {} elements", self.dim));
        }
        if !a.is_subset(&self.ground) {
            return domain(format!("{a} is not a subset of the ground"));
        }
        if m == self.dim {
            return Ok(self.family[a].clone());
        }
        let above: Vec<u32> = self
            .ground
            .0
            .iter()
            .copied()
            .filter(|&x| a.top().is_none_or(|top| x > top))
            .collect();
        let tails = increasing_tuples(&above, self.dim - m);
        if tails.is_empty() {
            return domain(format!("no end-extension of {a} inside the ground"));
        }
        let r = self.root(&(0..m).collect::<Vec<_>>());
        let mut out: Option<OrdSet> = None;
        for tail in tails {
            let b = a.union(&OrdSet(tail));
            let cand = self.family[&b].select(r);
            match &out {
                None => out = Some(cand),
                Some(prev) if *prev != cand => {
                    return Err(Error::Precondition(format!(
                        "root of {a} depends on the end-extension ({prev} vs {cand})"
                    )))
                }
                Some(_) => {}
            }
        }
        Ok(out.expect("at least one tail"))
    }

    /// Checks, for every `a` with `|a| < n` and every `β < β′` above `a`
    /// whose extensions have derived roots, that
    /// `u_{a∪{β}} ∩ u_{a∪{β′}} = u_a`. Returns the number of pairs checked.
    pub fn verify_extension_roots(&self) -> Result<usize> {
        let mut checked = 0;
        for m in 0..self.dim {
            for a in self.ground.subsets(m) {
                let Ok(ua) = self.derive_root(&a) else { continue };
                let next: Vec<(u32, OrdSet)> = self
                    .ground
                    .0
                    .iter()
                    .filter(|&&x| a.top().is_none_or(|top| x > top))
                    .filter_map(|&x| self.derive_root(&a.insert(x)).ok().map(|u| (x, u)))
                    .collect();
                for (i, (x, ux)) in next.iter().enumerate() {
                    for (y, uy) in &next[i + 1..] {
                        if ux.intersection(uy) != ua {
                            return Err(Error::Precondition(format!("u of {a}+{x} and {a}+{y} do not meet in u of {a}")));
                        }
                        checked += 1;
                    }
                }
            }
        }
        Ok(checked)
    }

    /// `v_{a,k} = u_b[𝐫_{(|a|+1)∖{k}}]` for `b` end-extending `a ∪ {α}` with
    /// `α` `k`-addable for `a`. Re-checks independence of `(α, b)` and that
    /// the derived sets `u_{a∪{α}}` over all `k`-addable `α` form a Δ-system
    /// with this root.
    pub fn addable_root(&self, a: &OrdSet, k: usize) -> Result<OrdSet> {
        let s = a.len();
        if s + 1 > self.dim {
            return domain(format!("{a} leaves no room in dimension {}", self.dim));
        }
        if k > s {
            return domain(format!("position {k} exceeds |a| = {s}"));
        }
        let addable: Vec<u32> = self
            .ground
            .0
            .iter()
            .copied()
            .filter(|&x| !a.contains(x) && a.count_below(x) == k)
            .collect();
        let r: Vec<usize> = self.root(&(0..=s).filter(|&i| i != k).collect::<Vec<_>>()).to_vec();
        let mut root: Option<OrdSet> = None;
        let mut members = Vec::new();
        for &x in &addable {
            let ax = a.insert(x);
            let above: Vec<u32> = self.ground.0.iter().copied().filter(|&y| y > ax.top().unwrap()).collect();
            for tail in increasing_tuples(&above, self.dim - s - 1) {
                let cand = self.family[&ax.union(&OrdSet(tail))].select(&r);
                match &root {
                    None => root = Some(cand),
                    Some(prev) if *prev != cand => {
                        return Err(Error::Precondition(format!("addable root of {a} at {k} depends on the extension")))
                    }
                    Some(_) => {}
                }
            }
            if let Ok(u) = self.derive_root(&ax) {
                members.push(u);
            }
        }
        let Some(root) = root else {
            return domain(format!("no {k}-addable element for {a} with room above it"));
        };
        for (i, x) in members.iter().enumerate() {
            for y in &members[i + 1..] {
                if x.intersection(y) != root {
                    return Err(Error::Precondition(format!(
                        "sets over {k}-addable elements for {a} do not meet in the addable root"
                    )));
                }
            }
        }
        Ok(root)
    }
}

/// Checks clauses (1)–(3) of uniformity for `⟨u_b | b ∈ [H]^n⟩`.
///
/// Patterns `𝐦` not realized by any aligned pair inside the finite ground
/// get `𝐫_𝐦 = ⋂ {𝐫_𝐦′ | 𝐦′ ⊇ 𝐦 realized}`; the lattice clause is then
/// checked on all patterns.
pub fn verify_uniform(n: usize, ground: &OrdSet, family: &BTreeMap<OrdSet, OrdSet>) -> Result<Option<UniformDeltaSystem>> {
    if n == 0 || n > 16 {
        return domain("dimension must lie in 1..=16");
    }
    let index = ground.subsets(n);
    if index.is_empty() {
        return domain(format!("ground {ground} has fewer than {n} elements"));
    }
    for b in &index {
        if !family.contains_key(b) {
            return domain(format!("family undefined at {b}"));
        }
    }
    let family: BTreeMap<OrdSet, OrdSet> = index.iter().map(|b| (b.clone(), family[b].clone())).collect();
    let rho = family[&index[0]].len();
    if family.values().any(|u| u.len() != rho) {
        return Ok(None);
    }
    let full = (1usize << n) - 1;
    let mut roots: Vec<Option<Vec<usize>>> = vec![None; 1 << n];
    for (i, a) in index.iter().enumerate() {
        for b in &index[i..] {
            let Some(m) = aligned(a, b) else { continue };
            let Some(r) = aligned(&family[a], &family[b]) else {
                return Ok(None);
            };
            let slot = &mut roots[mask_of(&m)];
            match slot {
                None => *slot = Some(r),
                Some(prev) if *prev != r => return Ok(None),
                Some(_) => {}
            }
        }
    }
    let determined = roots.clone();
    for (m, slot) in roots.iter_mut().enumerate() {
        if slot.is_none() {
            let mut acc: BTreeSet<usize> = (0..rho).collect();
            for (m2, r) in determined.iter().enumerate() {
                if let Some(r) = r {
                    if m2 & m == m {
                        acc = acc.intersection(&r.iter().copied().collect()).copied().collect();
                    }
                }
            }
            *slot = Some(acc.into_iter().collect());
        }
    }
    let roots: Vec<Vec<usize>> = roots.into_iter().map(Option::unwrap).collect();
    for m0 in 0..=full {
        for m1 in m0..=full {
            let meet: Vec<usize> = roots[m0].iter().copied().filter(|p| roots[m1].contains(p)).collect();
            if roots[m0 & m1] != meet {
                return Ok(None);
            }
        }
    }
    Ok(Some(UniformDeltaSystem {
        dim: n,
        ground: ground.clone(),
        family,
        rho,
        roots,
    }))
}

/// How the roots of a generated system are specified.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum RootSpec {
    /// Each position `p < ρ` depends on the coordinates `m_p`;
    /// then `𝐫_𝐦 = {p | m_p ⊆ 𝐦}`.
    Dependencies(Vec<Vec<usize>>),
    /// Explicit `𝐦 ↦ 𝐫_𝐦`, which must satisfy the lattice clause and
    /// `𝐫_n = ρ`.
    Roots(BTreeMap<Vec<usize>, Vec<usize>>),
    /// Dependencies drawn from the seed.
    Random,
}

fn dependencies_from_roots(n: usize, rho: usize, roots: &BTreeMap<Vec<usize>, Vec<usize>>) -> Result<Vec<Vec<usize>>> {
    let full = (1usize << n) - 1;
    let mut table = vec![None; 1 << n];
    for (m, r) in roots {
        if m.iter().any(|&i| i >= n) || r.iter().any(|&p| p >= rho) {
            return domain("root spec mentions positions out of range");
        }
        table[mask_of(m)] = Some(r.clone());
    }
    let table: Vec<Vec<usize>> = table
        .into_iter()
        .map(|r| r.ok_or_else(|| Error::Domain("root spec must list every pattern".into())))
        .collect::<Result<_>>()?;
    if table[full] != (0..rho).collect::<Vec<_>>() {
        return domain("the root of the full pattern must be all of ρ");
    }
    let deps: Vec<usize> = (0..rho)
        .map(|p| (0..=full).filter(|&m| table[m].contains(&p)).fold(full, |a, m| a & m))
        .collect();
    for (m, r) in table.iter().enumerate() {
        let expect: Vec<usize> = (0..rho).filter(|&p| deps[p] & m == deps[p]).collect();
        if *r != expect {
            return domain("inconsistent root spec: the lattice clause fails");
        }
    }
    Ok(deps.into_iter().map(|d| positions_of(d, n)).collect())
}

/// Seeded uniform system on a ground of `h` elements:
/// `u_b(p) = p·M + code(b[m_p])` with an injective code below `M`.
pub fn generate_uniform(seed: u64, n: usize, h: usize, rho: usize, spec: &RootSpec) -> Result<UniformDeltaSystem> {
    if n == 0 || n > 16 {
        return domain("dimension must lie in 1..=16");
    }
    if h < n {
        return domain(format!("ground of {h} elements has no {n}-subsets"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let deps: Vec<Vec<usize>> = match spec {
        RootSpec::Dependencies(d) => {
            if d.len() != rho || d.iter().flatten().any(|&i| i >= n) {
                return domain("dependency spec does not match (n, ρ)");
            }
            d.iter()
                .map(|m| {
                    OrdSet::from_unsorted(m.iter().map(|&i| i as u32))
                        .0
                        .into_iter()
                        .map(|i| i as usize)
                        .collect()
                })
                .collect()
        }
        RootSpec::Roots(r) => dependencies_from_roots(n, rho, r)?,
        RootSpec::Random => (0..rho).map(|_| (0..n).filter(|_| rng.gen_bool(0.5)).collect()).collect(),
    };
    let span = (2 * h).max(h + 3) as u32;
    let mut g: Vec<u32> = sample(&mut rng, span as usize, h).into_iter().map(|x| x as u32).collect();
    g.sort_unstable();
    let ground = OrdSet(g);
    let base = u64::from(span);
    let width = deps.iter().map(Vec::len).max().unwrap_or(0) as u32;
    let m = base.checked_pow(width).ok_or(Error::Overflow("generator code width"))?;
    if (rho as u64).saturating_mul(m) > u64::from(u32::MAX) {
        return Err(Error::Overflow("generator code width"));
    }
    let mut family = BTreeMap::new();
    for b in ground.subsets(n) {
        let u: Vec<u32> = deps
            .iter()
            .enumerate()
            .map(|(p, mp)| {
                let code = mp.iter().rev().fold(0u64, |acc, &i| acc * base + u64::from(b.at(i)));
                (p as u64 * m + code) as u32
            })
            .collect();
        family.insert(b, OrdSet(u));
    }
    let full = (1usize << n) - 1;
    let roots: Vec<Vec<usize>> = (0..=full)
        .map(|mask| (0..rho).filter(|&p| mask_of(&deps[p]) & mask == mask_of(&deps[p])).collect())
        .collect();
    let sys = UniformDeltaSystem {
        dim: n,
        ground,
        family,
        rho,
        roots,
    };
    match verify_uniform(n, &sys.ground, &sys.family)? {
        Some(v) if v.family == sys.family => Ok(sys),
        _ => Err(Error::Precondition("generated system failed verification".into())),
    }
}

/// A colored family on `[μ]^n` for the monochromatic search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColoredFamily {
    pub dim: usize,
    pub mu: u32,
    pub colors: BTreeMap<OrdSet, u32>,
    pub family: BTreeMap<OrdSet, OrdSet>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeltaFound {
    pub ground: OrdSet,
    pub color: u32,
    pub system: UniformDeltaSystem,
}

/// First `H ∈ [μ]^h` (lexicographic) on which the coloring is constant and
/// the family is a verified uniform Δ-system. Fails with a budget error when
/// `C(μ, h)` exceeds `budget` candidates.
pub fn search_delta(cf: &ColoredFamily, h: usize, budget: u64, exec: Exec) -> Result<Option<DeltaFound>> {
    let total = binomial(cf.mu as usize, h);
    if total > u128::from(budget) {
        return Err(Error::Budget(format!("{total} candidate grounds exceed the budget of {budget}")));
    }
    let universe: Vec<u32> = (0..cf.mu).collect();
    let candidates = increasing_tuples(&universe, h);
    let found = exec.find_map_first(&candidates, |g| {
        let ground = OrdSet(g.clone());
        let subsets = ground.subsets(cf.dim);
        let first = *cf.colors.get(subsets.first()?)?;
        if subsets.iter().any(|b| cf.colors.get(b) != Some(&first)) {
            return None;
        }
        let system = verify_uniform(cf.dim, &ground, &cf.family).ok()??;
        Some(DeltaFound {
            ground,
            color: first,
            system,
        })
    });
    Ok(found)
}

/// JSON form of a certificate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeltaCertificate {
    pub dimension: usize,
    pub ground: Vec<u32>,
    pub rho: usize,
    pub roots: Vec<RootEntry>,
    pub family: BTreeMap<String, Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootEntry {
    pub pattern: Vec<usize>,
    pub root: Vec<usize>,
}

fn key_of(b: &OrdSet) -> String {
    let parts: Vec<String> = b.0.iter().map(u32::to_string).collect();
    format!("({})", parts.join(","))
}

impl From<&UniformDeltaSystem> for DeltaCertificate {
    fn from(s: &UniformDeltaSystem) -> Self {
        DeltaCertificate {
            dimension: s.dim,
            ground: s.ground.0.clone(),
            rho: s.rho,
            roots: s.roots().into_iter().map(|(pattern, root)| RootEntry { pattern, root }).collect(),
            family: s.family.iter().map(|(b, u)| (key_of(b), u.0.clone())).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn os(v: &[u32]) -> OrdSet {
        OrdSet::new(v.to_vec()).unwrap()
    }

    #[test]
    fn aligned_examples() {
        assert_eq!(aligned(&os(&[1, 5]), &os(&[1, 9])), Some(vec![0]));
        assert_eq!(aligned(&os(&[1, 5]), &os(&[5, 9])), None);
        assert_eq!(aligned(&os(&[1, 5, 7]), &os(&[1, 5, 7])), Some(vec![0, 1, 2]));
        assert_eq!(aligned(&os(&[1]), &os(&[1, 2])), None);
    }

    #[test]
    fn degenerate_systems() {
        let ground = os(&[0, 1, 2, 3]);
        let u = os(&[10, 20]);
        let constant: BTreeMap<_, _> = ground.subsets(2).into_iter().map(|b| (b, u.clone())).collect();
        let s = verify_uniform(2, &ground, &constant).unwrap().unwrap();
        for (_, r) in s.roots() {
            assert_eq!(r, vec![0, 1]);
        }
        assert_eq!(s.derive_root(&os(&[0])).unwrap(), u);
        assert_eq!(s.derive_root(&OrdSet::empty()).unwrap(), u);

        let identity: BTreeMap<_, _> = ground.subsets(1).into_iter().map(|b| (b.clone(), b)).collect();
        let s = verify_uniform(1, &ground, &identity).unwrap().unwrap();
        assert!(s.root(&[]).is_empty());
        assert_eq!(s.root(&[0]), &[0]);
    }

    #[test]
    fn non_aligned_family_is_rejected() {
        let ground = os(&[0, 1, 2]);
        let fam: BTreeMap<_, _> = [(os(&[0]), os(&[0, 1])), (os(&[1]), os(&[1, 2])), (os(&[2]), os(&[2, 3]))].into();
        assert!(verify_uniform(1, &ground, &fam).unwrap().is_none());
    }

    #[test]
    fn generated_systems_round_trip() {
        for seed in 0..3 {
            let s = generate_uniform(seed, 2, 4, 3, &RootSpec::Random).unwrap();
            assert_eq!(s.rho(), 3);
            assert!(verify_uniform(2, s.ground(), s.family()).unwrap().is_some());
            s.verify_extension_roots().unwrap();
        }
        let empty = generate_uniform(0, 2, 4, 0, &RootSpec::Random).unwrap();
        assert!(empty.family().values().all(OrdSet::is_empty));
        let sunflower = generate_uniform(1, 1, 5, 3, &RootSpec::Dependencies(vec![vec![], vec![0], vec![]])).unwrap();
        let us: Vec<&OrdSet> = sunflower.family().values().collect();
        let core = us[0].intersection(us[1]);
        assert_eq!(core.len(), 2);
        for (i, x) in us.iter().enumerate() {
            for y in &us[i + 1..] {
                assert_eq!(x.intersection(y), core);
            }
        }
    }

    #[test]
    fn explicit_roots_spec() {
        let roots: BTreeMap<Vec<usize>, Vec<usize>> =
            [(vec![], vec![]), (vec![0], vec![0]), (vec![1], vec![]), (vec![0, 1], vec![0, 1])].into();
        let s = generate_uniform(4, 2, 5, 2, &RootSpec::Roots(roots.clone())).unwrap();
        assert_eq!(s.root(&[0]), &[0]);
        let mut bad = roots;
        bad.insert(vec![1], vec![1]);
        bad.insert(vec![0], vec![1]);
        assert!(generate_uniform(4, 2, 5, 2, &RootSpec::Roots(bad)).is_err());
    }

    #[test]
    fn addable_roots_on_a_higher_system() {
        // n = 1 context inside a 3-dimensional system
        let s = generate_uniform(9, 3, 7, 4, &RootSpec::Random).unwrap();
        let g = s.ground().clone();
        let a = OrdSet(vec![g.at(2)]);
        for k in 0..=1 {
            s.addable_root(&a, k).unwrap();
        }
        let top = OrdSet(vec![g.at(6)]);
        assert!(s.addable_root(&top, 1).is_err());
    }

    #[test]
    fn constant_family_addable_root() {
        let ground = os(&[0, 1, 2, 3, 4]);
        let u = os(&[3, 8]);
        let fam: BTreeMap<_, _> = ground.subsets(3).into_iter().map(|b| (b, u.clone())).collect();
        let s = verify_uniform(3, &ground, &fam).unwrap().unwrap();
        assert_eq!(s.addable_root(&os(&[1]), 0).unwrap(), u);
    }

    #[test]
    fn search_examples() {
        let mu = 5;
        let universe = OrdSet((0..mu).collect());
        let fam: BTreeMap<_, _> = universe.subsets(2).into_iter().map(|b| (b, os(&[1, 2]))).collect();
        let colors = fam.keys().map(|b| (b.clone(), 0)).collect();
        let cf = ColoredFamily {
            dim: 2,
            mu,
            colors,
            family: fam,
        };
        let f = search_delta(&cf, 4, 1000, Exec::Sequential).unwrap().unwrap();
        assert_eq!(f.ground, os(&[0, 1, 2, 3]));
        assert!(matches!(search_delta(&cf, 4, 2, Exec::Sequential), Err(Error::Budget(_))));

        let fam1: BTreeMap<_, _> = [(os(&[0]), os(&[0, 1])), (os(&[1]), os(&[1, 2])), (os(&[2]), os(&[2, 3]))].into();
        let cf1 = ColoredFamily {
            dim: 1,
            mu: 3,
            colors: fam1.keys().map(|b| (b.clone(), 0)).collect(),
            family: fam1,
        };
        assert!(search_delta(&cf1, 3, 100, Exec::Parallel).unwrap().is_none());
    }

    #[test]
    fn certificate_json_shape() {
        let s = generate_uniform(0, 1, 3, 2, &RootSpec::Dependencies(vec![vec![], vec![0]])).unwrap();
        let c = DeltaCertificate::from(&s);
        let v = serde_json::to_value(&c).unwrap();
        assert_eq!(v["rho"], 2);
        assert_eq!(v["roots"][0]["pattern"], serde_json::json!([]));
        assert_eq!(c.family.len(), 3);
    }

    proptest! {
        #[test]
        fn aligned_is_symmetric(a in prop::collection::btree_set(0u32..12, 0..5), b in prop::collection::btree_set(0u32..12, 0..5)) {
            let a = OrdSet::from_unsorted(a);
            let b = OrdSet::from_unsorted(b);
            let ab = aligned(&a, &b);
            prop_assert_eq!(ab.clone(), aligned(&b, &a));
            if let Some(r) = ab {
                prop_assert_eq!(a.select(&r), a.intersection(&b));
                prop_assert_eq!(b.select(&r), a.intersection(&b));
            }
        }

        #[test]
        fn generator_round_trip(seed in 0u64..500, n in 1usize..4, extra in 0usize..3, rho in 0usize..5) {
            let s = generate_uniform(seed, n, n + extra, rho, &RootSpec::Random).unwrap();
            prop_assert!(verify_uniform(n, s.ground(), s.family()).unwrap().is_some());
        }
    }
}
