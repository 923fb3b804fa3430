//! Finite Cohen conditions: partial maps `(index, column) → value`, their
//! supports and collapses, compatibility, the Δ-system compatibility check,
//! index replacement, and seeded instance sampling.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::delta::{aligned, verify_uniform, OrdSet, UniformDeltaSystem};
use crate::error::{domain, Error, Result};
use crate::family::{Family, FunctionSet, SparseZFn, Threshold};
use crate::grid::{GridPoint, Index};

/// A finite partial function from `index × column` to values.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<[u32; 3]>", into = "Vec<[u32; 3]>")]
pub struct Condition {
    cells: BTreeMap<(u32, u32), u32>,
}

impl TryFrom<Vec<[u32; 3]>> for Condition {
    type Error = Error;
    fn try_from(v: Vec<[u32; 3]>) -> Result<Self> {
        let mut cells = BTreeMap::new();
        for [i, j, x] in v {
            if cells.insert((i, j), x).is_some() {
                return Err(Error::Schema(format!("duplicate cell ({i}, {j})")));
            }
        }
        Ok(Condition { cells })
    }
}

impl From<Condition> for Vec<[u32; 3]> {
    fn from(c: Condition) -> Self {
        c.cells.into_iter().map(|((i, j), x)| [i, j, x]).collect()
    }
}

impl Condition {
    pub fn new() -> Self {
        Condition::default()
    }

    pub fn from_cells<I: IntoIterator<Item = ((u32, u32), u32)>>(it: I) -> Self {
        Condition {
            cells: it.into_iter().collect(),
        }
    }

    pub fn cells(&self) -> &BTreeMap<(u32, u32), u32> {
        &self.cells
    }

    pub fn get(&self, index: u32, j: u32) -> Option<u32> {
        self.cells.get(&(index, j)).copied()
    }

    pub fn set(&mut self, index: u32, j: u32, v: u32) {
        self.cells.insert((index, j), v);
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Spreads a collapsed condition over an explicit support.
    pub fn decollapse(c: &CollapsedCondition, support: &OrdSet) -> Result<Condition> {
        let mut cells = BTreeMap::new();
        for (&(i, j), &v) in &c.cells {
            if i >= support.len() {
                return domain(format!("position {i} exceeds a support of size {}", support.len()));
            }
            cells.insert((support.at(i), j), v);
        }
        Ok(Condition { cells })
    }
}

/// `p̄`: cells keyed by position within `u(p)` instead of by index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct CollapsedCondition {
    pub cells: BTreeMap<(usize, u32), u32>,
}

/// `u(p)`.
pub fn support(p: &Condition) -> OrdSet {
    OrdSet::from_unsorted(p.cells.keys().map(|(i, _)| *i))
}

/// `p̄(i, j) = p(u(p)(i), j)`.
pub fn collapse(p: &Condition) -> CollapsedCondition {
    let u = support(p);
    CollapsedCondition {
        cells: p
            .cells
            .iter()
            .map(|(&(i, j), &v)| ((u.position(i).expect("index in support"), j), v))
            .collect(),
    }
}

/// Agreement on every common cell.
pub fn compatible(p: &Condition, q: &Condition) -> bool {
    let (small, large) = if p.len() <= q.len() { (p, q) } else { (q, p) };
    small.cells.iter().all(|(k, v)| large.cells.get(k).is_none_or(|w| w == v))
}

/// `p ∪ q` when compatible.
pub fn common_extension(p: &Condition, q: &Condition) -> Option<Condition> {
    compatible(p, q).then(|| Condition {
        cells: p.cells.iter().chain(&q.cells).map(|(k, v)| (*k, *v)).collect(),
    })
}

/// The cells on which `p` and `q` agree.
pub fn intersection(p: &Condition, q: &Condition) -> Condition {
    Condition {
        cells: p
            .cells
            .iter()
            .filter(|(k, v)| q.cells.get(k) == Some(v))
            .map(|(k, v)| (*k, *v))
            .collect(),
    }
}

/// Outcome of the exhaustive pairwise check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompatibilityReport {
    pub pairs_checked: usize,
    pub counterexample: Option<(OrdSet, OrdSet)>,
    pub system: UniformDeltaSystem,
}

impl CompatibilityReport {
    pub fn holds(&self) -> bool {
        self.counterexample.is_none()
    }
}

/// Verifies the hypotheses (one shared collapse, supports forming a uniform
/// Δ-system), then checks every aligned pair for compatibility.
pub fn check_compatibility_lemma(n: usize, ground: &OrdSet, family: &BTreeMap<OrdSet, Condition>) -> Result<CompatibilityReport> {
    let index = ground.subsets(n);
    let mut shared: Option<CollapsedCondition> = None;
    for b in &index {
        let p = family.get(b).ok_or_else(|| Error::Domain(format!("no condition at {b}")))?;
        let c = collapse(p);
        match &shared {
            None => shared = Some(c),
            Some(s) if *s != c => {
                return Err(Error::Precondition(format!("collapse is not constant: it changes at {b}")));
            }
            Some(_) => {}
        }
    }
    let supports: BTreeMap<OrdSet, OrdSet> = index.iter().map(|b| (b.clone(), support(&family[b]))).collect();
    let Some(system) = verify_uniform(n, ground, &supports)? else {
        return Err(Error::Precondition("supports do not form a uniform Δ-system".into()));
    };
    let mut pairs_checked = 0;
    for (i, a) in index.iter().enumerate() {
        for b in &index[i + 1..] {
            if aligned(a, b).is_some() {
                pairs_checked += 1;
                if !compatible(&family[a], &family[b]) {
                    return Ok(CompatibilityReport {
                        pairs_checked,
                        counterexample: Some((a.clone(), b.clone())),
                        system,
                    });
                }
            }
        }
    }
    Ok(CompatibilityReport {
        pairs_checked,
        counterexample: None,
        system,
    })
}

/// Conditions `p_b` spread from one collapsed pattern over the system's sets.
pub fn family_over_system(sys: &UniformDeltaSystem, pattern: &CollapsedCondition) -> Result<BTreeMap<OrdSet, Condition>> {
    sys.family()
        .iter()
        .map(|(b, u)| Ok((b.clone(), Condition::decollapse(pattern, u)?)))
        .collect()
}

/// `α` can replace `c(i)` without moving any other element.
pub fn i_possible(c: &OrdSet, i: usize, alpha: u32) -> bool {
    i < c.len() && (i == 0 || alpha > c.at(i - 1)) && (i + 1 == c.len() || alpha < c.at(i + 1))
}

/// `c[i ↦ α]`.
pub fn replace_index(c: &OrdSet, i: usize, alpha: u32) -> Result<OrdSet> {
    if !i_possible(c, i, alpha) {
        return domain(format!("{alpha} is not {i}-possible for {c}"));
    }
    let mut v = c.as_slice().to_vec();
    v[i] = alpha;
    OrdSet::new(v)
}

/// A coherent family to plant: `δΨ` plus noise supported in columns `≤ ℓ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantSpec {
    pub arity: usize,
    pub threshold: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledInstance {
    pub functions: Arc<FunctionSet>,
    pub family: Option<Family>,
}

/// Seeded truncated functions with values in `0..=max_value`, and optionally
/// a planted family coherent above the requested threshold.
pub fn sample_instance(seed: u64, num_indices: usize, columns: usize, max_value: u32, plant: Option<PlantSpec>) -> Result<SampledInstance> {
    if num_indices == 0 || columns == 0 {
        return domain("an instance needs at least one index and one column");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<(u32, Vec<u32>)> = (0..num_indices)
        .map(|i| (i as u32, (0..columns).map(|_| rng.gen_range(0..=max_value)).collect()))
        .collect();
    let functions = Arc::new(FunctionSet::from_values(&values)?);
    let family = match plant {
        None => None,
        Some(spec) => Some(plant_family(&mut rng, &functions, spec)?),
    };
    Ok(SampledInstance { functions, family })
}

/// `δΨ + N` for random `Ψ` and random `N` supported in columns `≤ ℓ`.
pub fn plant_family(rng: &mut ChaCha8Rng, fs: &Arc<FunctionSet>, spec: PlantSpec) -> Result<Family> {
    let PlantSpec { arity, threshold } = spec;
    if arity == 0 || arity > fs.len() {
        return domain(format!("cannot plant arity {arity} on {} indices", fs.len()));
    }
    let base = if arity == 1 {
        let global: BTreeMap<GridPoint, i64> = fs.join_all().region().points().map(|p| (p, rng.gen_range(-3..=3))).collect();
        Family::from_fn(1, fs.clone(), None, |_, d| {
            SparseZFn::from_entries(d.clone(), d.points().map(|p| (p, global[&p])))
        })?
    } else {
        let psi = Family::from_fn(arity - 1, fs.clone(), None, |_, d| {
            SparseZFn::from_entries(d.clone(), d.points().map(|p| (p, rng.gen_range(-3..=3))))
        })?;
        psi.coboundary()?
    };
    let noise = Family::from_fn(arity, fs.clone(), None, |_, d| {
        SparseZFn::from_entries(
            d.clone(),
            d.points()
                .filter(|p| !Threshold(threshold).admits(*p))
                .map(|p| (p, rng.gen_range(-2..=2))),
        )
    })?;
    base.add_scaled(&noise, 1)
}

/// Index labels of a function set as an ordinal set.
pub fn index_set(fs: &FunctionSet) -> OrdSet {
    OrdSet::from_unsorted(fs.indices().into_iter().map(|Index(i)| i))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delta::{generate_uniform, RootSpec};
    use proptest::prelude::*;

    fn os(v: &[u32]) -> OrdSet {
        OrdSet::new(v.to_vec()).unwrap()
    }

    #[test]
    fn support_and_collapse_examples() {
        assert!(support(&Condition::new()).is_empty());
        assert!(collapse(&Condition::new()).cells.is_empty());
        let p = Condition::from_cells([((7, 0), 1), ((2, 3), 4), ((7, 1), 0)]);
        assert_eq!(support(&p), os(&[2, 7]));
        assert!(support(&p).len() <= p.len());
        let single = Condition::from_cells([((9, 3), 5)]);
        assert_eq!(collapse(&single).cells, [((0, 3), 5)].into());
    }

    #[test]
    fn compatibility_examples() {
        let p = Condition::from_cells([((0, 0), 1)]);
        let q = Condition::from_cells([((1, 0), 1)]);
        assert!(compatible(&p, &q));
        assert!(compatible(&p, &p));
        let r = Condition::from_cells([((0, 0), 0)]);
        assert!(!compatible(&p, &r));
        assert_eq!(common_extension(&p, &q).unwrap().len(), 2);
        assert!(intersection(&p, &r).is_empty());
    }

    #[test]
    fn replace_examples() {
        assert_eq!(replace_index(&os(&[1, 5, 9]), 1, 6).unwrap(), os(&[1, 6, 9]));
        assert_eq!(replace_index(&os(&[1, 5, 9]), 1, 5).unwrap(), os(&[1, 5, 9]));
        assert!(replace_index(&os(&[1, 5]), 1, 0).is_err());
    }

    #[test]
    fn constant_family_is_compatible() {
        let ground = os(&[0, 1, 2, 3, 4]);
        let p = Condition::from_cells([((10, 0), 1), ((11, 2), 3)]);
        let fam: BTreeMap<_, _> = ground.subsets(2).into_iter().map(|b| (b, p.clone())).collect();
        let rep = check_compatibility_lemma(2, &ground, &fam).unwrap();
        assert!(rep.holds());
        assert!(rep.pairs_checked > 0);
    }

    #[test]
    fn generated_families_and_tampering() {
        let sys = generate_uniform(2, 2, 5, 3, &RootSpec::Random).unwrap();
        let pattern = CollapsedCondition {
            cells: [((0, 0), 1), ((1, 1), 2), ((2, 0), 0), ((2, 2), 7)].into(),
        };
        let mut fam = family_over_system(&sys, &pattern).unwrap();
        assert!(check_compatibility_lemma(2, sys.ground(), &fam).unwrap().holds());
        let b = fam.keys().next().unwrap().clone();
        let p = fam.get_mut(&b).unwrap();
        let (&(i, j), &v) = p.cells().iter().next().unwrap();
        p.set(i, j, v + 1);
        match check_compatibility_lemma(2, sys.ground(), &fam) {
            Err(Error::Precondition(msg)) => assert!(msg.contains("collapse")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_uniform_supports_are_rejected() {
        let ground = os(&[0, 1, 2]);
        let fam: BTreeMap<_, _> = [
            (os(&[0]), Condition::from_cells([((0, 0), 1), ((1, 0), 1)])),
            (os(&[1]), Condition::from_cells([((1, 0), 1), ((2, 0), 1)])),
            (os(&[2]), Condition::from_cells([((2, 0), 1), ((3, 0), 1)])),
        ]
        .into();
        match check_compatibility_lemma(1, &ground, &fam) {
            Err(Error::Precondition(msg)) => assert!(msg.contains("uniform")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sampling() {
        let a = sample_instance(5, 4, 3, 2, Some(PlantSpec { arity: 2, threshold: 1 })).unwrap();
        let b = sample_instance(5, 4, 3, 2, Some(PlantSpec { arity: 2, threshold: 1 })).unwrap();
        assert_eq!(a, b);
        assert!(a.family.as_ref().unwrap().is_coherent(Threshold(1)));
        let z = sample_instance(1, 3, 2, 0, None).unwrap();
        assert!(z.functions.iter().all(|(_, f)| f.values().iter().all(|&v| v == 0)));
        // snapshot of the seeded stream
        let s = sample_instance(0, 3, 3, 3, None).unwrap();
        let got: Vec<Vec<u32>> = s.functions.iter().map(|(_, f)| f.values().to_vec()).collect();
        assert_eq!(got, SNAPSHOT_SEED0.iter().map(|r| r.to_vec()).collect::<Vec<_>>());
    }

    const SNAPSHOT_SEED0: [[u32; 3]; 3] = [[2, 2, 0], [2, 2, 3], [3, 3, 3]];

    #[test]
    fn condition_json() {
        let p = Condition::from_cells([((2, 0), 1), ((7, 3), 4)]);
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, "[[2,0,1],[7,3,4]]");
        assert_eq!(serde_json::from_str::<Condition>(&s).unwrap(), p);
        assert!(serde_json::from_str::<Condition>("[[1,1,1],[1,1,2]]").is_err());
    }

    fn condition() -> impl Strategy<Value = Condition> {
        prop::collection::btree_map((0u32..4, 0u32..3), 0u32..2, 0..5).prop_map(|cells| Condition { cells })
    }

    proptest! {
        #[test]
        fn compatible_iff_union_is_a_function(p in condition(), q in condition()) {
            let union_ok = p.cells.iter().all(|(k, v)| q.cells.get(k).is_none_or(|w| w == v));
            prop_assert_eq!(compatible(&p, &q), union_ok);
            prop_assert_eq!(compatible(&p, &q), compatible(&q, &p));
        }

        #[test]
        fn collapse_ignores_order_preserving_relabeling(p in condition(), shift in 1u32..5, scale in 1u32..4) {
            let relabeled = Condition::from_cells(p.cells.iter().map(|(&(i, j), &v)| ((i * scale + shift, j), v)));
            prop_assert_eq!(collapse(&p), collapse(&relabeled));
        }

        #[test]
        fn replacement_keeps_alignment(v in prop::collection::btree_set(0u32..30, 1..6), i in 0usize..6, alpha in 0u32..30) {
            let c = OrdSet::from_unsorted(v);
            if i_possible(&c, i, alpha) {
                let d = replace_index(&c, i, alpha).unwrap();
                prop_assert_eq!(d.len(), c.len());
                let r = aligned(&c, &d).unwrap();
                let others: Vec<usize> = (0..c.len()).filter(|&k| k != i).collect();
                prop_assert!(others.iter().all(|k| r.contains(k)));
            }
        }
    }
}
