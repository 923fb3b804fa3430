//! Propagating a trivialization of `Φ↾A` to all of `Φ`: families below a cap,
//! the stagewise correction sums `ς`, and the ladder of lower-dimensional
//! trivializations `τ` that ends in a witness for `Φ`.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::complex::{solve_type_i, Outcome};
use crate::error::{domain, Error, Result};
use crate::family::{
    is_trivialization_type_i, parse_tuple_key, single_witness_domain, Family, FunctionSet, SparseZFn, TableJson, Threshold, TypeIWitness,
};
use crate::forcing::{plant_family, PlantSpec};
use crate::grid::{meet, GridPoint, Index, IndexTuple, TruncFn};
use crate::par::Exec;

/// A family whose domains are cut down to `I(g)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BelowFamily {
    family: Family,
}

impl BelowFamily {
    pub fn new(family: Family) -> Result<Self> {
        if family.cap().is_none() {
            return domain("a below-cap family needs a cap");
        }
        Ok(BelowFamily { family })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn cap(&self) -> &TruncFn {
        self.family.cap().expect("checked at construction")
    }

    pub fn into_family(self) -> Family {
        self.family
    }
}

/// Restricts every domain to `I(g)` (on top of any existing cap).
pub fn cap(phi: &Family, g: &TruncFn) -> Result<BelowFamily> {
    let g = match phi.cap() {
        Some(old) => meet([old, g])?,
        None => g.clone(),
    };
    BelowFamily::new(phi.with_cap(Some(g))?)
}

/// The uncapped family that agrees inside `I(g)` and is 0 outside it.
pub fn extend_by_zero(b: &BelowFamily) -> Result<Family> {
    let fam = b.family();
    Family::from_fn(fam.arity(), fam.functions().clone(), None, |t, d| {
        SparseZFn::from_entries(d.clone(), fam.table()[t].nonzero())
    })
}

/// Cuts a witness for the zero-extended family back down to the cap.
pub fn cap_witness(w: &TypeIWitness, fset: &FunctionSet, g: &TruncFn) -> Result<TypeIWitness> {
    Ok(match w {
        TypeIWitness::Single(psi) => TypeIWitness::Single(psi.restrict(&single_witness_domain(fset, Some(g)))),
        TypeIWitness::Family(psi) => TypeIWitness::Family(psi.with_cap(Some(g.clone()))?),
    })
}

/// `(family below ∧f⃗, threshold hint) → (threshold, witness)` or `None`.
pub type LowerSolver<'a> = dyn Fn(&BelowFamily, Threshold) -> Result<Option<(Threshold, TypeIWitness)>> + Sync + 'a;

/// Solves the zero-extended family by the per-point local systems and caps
/// the answer.
pub fn default_lower_solver(c: &BelowFamily, l: Threshold) -> Result<Option<(Threshold, TypeIWitness)>> {
    let star = extend_by_zero(c)?;
    match solve_type_i(&star, l)? {
        Outcome::Found(w) => Ok(Some((l, cap_witness(&w, c.family().functions(), c.cap())?))),
        Outcome::Infeasible(_) => Ok(None),
    }
}

/// Stage `k` holds `τ^{f⃗}_{α⃗}` for `f⃗ ∈ X^{k−1}`, `α⃗ ∈ A^{n−k}`, and, once
/// built, `ς^{f⃗}_{α⃗}` for `f⃗ ∈ X^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrivializationLadder {
    n: usize,
    a_set: BTreeSet<Index>,
    a_fs: Arc<FunctionSet>,
    x_fs: Arc<FunctionSet>,
    base_cap: Option<TruncFn>,
    tau: Vec<BTreeMap<IndexTuple, TypeIWitness>>,
    sigma: Vec<BTreeMap<IndexTuple, Family>>,
    thresholds: Vec<Threshold>,
}

/// Arities and index lengths at one stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageShape {
    pub k: usize,
    pub tau_outer: usize,
    pub tau_arity: usize,
    pub tau_count: usize,
    pub sigma_outer: Option<usize>,
    pub sigma_arity: Option<usize>,
    pub sigma_count: usize,
}

impl TrivializationLadder {
    /// Stage 1 from a witness `T1` for `Φ↾A` above `ℓ`.
    pub fn start(phi: &Family, a_set: &BTreeSet<Index>, t1: &TypeIWitness, l: Threshold) -> Result<Self> {
        let n = phi.arity();
        if n < 2 {
            return domain("propagation needs arity at least 2");
        }
        let restricted = phi.restrict(a_set)?;
        let t1_ok = t1.arity() == n - 1 && is_trivialization_type_i(&restricted, t1, l).unwrap_or(false);
        if !t1_ok {
            return Err(Error::Precondition(format!(
                "the supplied witness does not trivialize Φ↾A above {}",
                l.0
            )));
        }
        Ok(TrivializationLadder {
            n,
            a_set: a_set.clone(),
            a_fs: restricted.functions().clone(),
            x_fs: phi.functions().clone(),
            base_cap: phi.cap().cloned(),
            tau: vec![[(IndexTuple::default(), t1.clone())].into()],
            sigma: Vec::new(),
            thresholds: vec![l],
        })
    }

    pub fn arity(&self) -> usize {
        self.n
    }

    pub fn a_set(&self) -> &BTreeSet<Index> {
        &self.a_set
    }

    /// Number of `τ` stages present.
    pub fn stage(&self) -> usize {
        self.tau.len()
    }

    pub fn tau(&self, k: usize) -> Option<&BTreeMap<IndexTuple, TypeIWitness>> {
        self.tau.get(k.checked_sub(1)?)
    }

    pub fn sigma(&self, k: usize) -> Option<&BTreeMap<IndexTuple, Family>> {
        self.sigma.get(k.checked_sub(1)?)
    }

    pub fn threshold(&self) -> Threshold {
        *self.thresholds.last().expect("stage 1 exists")
    }

    pub fn thresholds(&self) -> &[Threshold] {
        &self.thresholds
    }

    /// `∧f⃗`, met with the cap of `Φ` when there is one.
    pub fn cap_for(&self, f: &IndexTuple) -> Result<Option<TruncFn>> {
        let mut fns: Vec<&TruncFn> = Vec::with_capacity(f.len() + 1);
        for &i in f.entries() {
            fns.push(self.x_fs.get(i)?);
        }
        fns.extend(self.base_cap.as_ref());
        if fns.is_empty() {
            Ok(None)
        } else {
            meet(fns).map(Some)
        }
    }

    /// `τ^{f⃗}_{α⃗}(p)` at stage `k`, alternating in the `f⃗` block.
    fn tau_value(&self, k: usize, f: &IndexTuple, alpha: &IndexTuple, p: GridPoint) -> Result<i64> {
        let (sorted, sign) = f.sort_with_sign();
        if sign == 0 {
            return Ok(0);
        }
        let stage = self
            .tau(k)
            .ok_or_else(|| Error::Precondition(format!("stage {k} τ data missing")))?;
        match stage.get(&sorted) {
            Some(TypeIWitness::Family(fam)) => Ok(sign as i64 * fam.value(alpha, p)?),
            Some(TypeIWitness::Single(_)) => domain("stage-n τ has no inner index"),
            None => Err(Error::Precondition(format!("τ at stage {k} missing for {sorted}"))),
        }
    }

    pub fn shapes(&self) -> Vec<StageShape> {
        (1..=self.stage())
            .map(|k| {
                let tau = &self.tau[k - 1];
                let sigma = self.sigma.get(k - 1);
                StageShape {
                    k,
                    tau_outer: tau.keys().map(IndexTuple::len).max().unwrap_or(k - 1),
                    tau_arity: tau.values().next().map_or(self.n - k, TypeIWitness::arity),
                    tau_count: tau.len(),
                    sigma_outer: sigma.and_then(|s| s.keys().map(IndexTuple::len).max()),
                    sigma_arity: sigma.and_then(|s| s.values().next().map(Family::arity)),
                    sigma_count: sigma.map_or(0, BTreeMap::len),
                }
            })
            .collect()
    }
}

/// `ς^{f⃗}_{α⃗} = φ_{α⃗f⃗} + (−1)^{n−k+1} Σ_{i<k} (−1)^i τ^{f⃗^i}_{α⃗}` on
/// `I(∧α⃗) ∩ I(∧f⃗)`.
pub fn sigma_step(phi: &Family, ladder: &TrivializationLadder, k: usize, f: &IndexTuple, alpha: &IndexTuple) -> Result<SparseZFn> {
    let n = ladder.n;
    if k == 0 || k >= n || f.len() != k || alpha.len() != n - k {
        return domain(format!("stage {k} needs |f⃗| = {k} and |α⃗| = {}", n.saturating_sub(k)));
    }
    let joint = alpha.concat(f);
    let dom = ladder.x_fs.region_of(&joint, ladder.base_cap.as_ref())?;
    let outer = if (n - k + 1).is_multiple_of(2) { 1 } else { -1 };
    let mut entries = Vec::new();
    for p in dom.points() {
        let mut v = phi.value(&joint, p)?;
        for i in 0..k {
            let t = ladder.tau_value(k, &f.remove_entry(i)?, alpha, p)?;
            v += outer * if i % 2 == 0 { t } else { -t };
        }
        entries.push((p, v));
    }
    SparseZFn::from_entries(dom, entries)
}

/// `C^{f⃗} = ⟨ς^{f⃗}_{α⃗} | α⃗ ∈ A^{n−k}⟩`, below `∧f⃗`.
pub fn sigma_family(phi: &Family, ladder: &TrivializationLadder, k: usize, f: &IndexTuple) -> Result<BelowFamily> {
    let g = ladder.cap_for(f)?.ok_or_else(|| Error::Domain("empty f⃗ has no cap".into()))?;
    let fam = Family::from_fn(ladder.n - k, ladder.a_fs.clone(), Some(g), |alpha, _| {
        sigma_step(phi, ladder, k, f, alpha)
    })?;
    BelowFamily::new(fam)
}

/// `Σ_i (−1)^i ς^{f⃗}_{α⃗^i}` vanishes above `ℓ` for every `α⃗ ∈ A^{n−k+1}`.
/// Stage `n` carries no inner index and holds vacuously.
pub fn verify_sigma_coherent(ladder: &TrivializationLadder, k: usize, f: &IndexTuple, l: Threshold) -> Result<bool> {
    if k >= ladder.n {
        return Ok(true);
    }
    let stage = ladder
        .sigma(k)
        .ok_or_else(|| Error::Precondition(format!("stage {k} ς data missing")))?;
    let (sorted, sign) = f.sort_with_sign();
    if sign == 0 {
        return Ok(true);
    }
    let fam = stage
        .get(&sorted)
        .ok_or_else(|| Error::Precondition(format!("ς at stage {k} missing for {sorted}")))?;
    Ok(fam.is_coherent(l))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Incoherent,
    NoWitness,
    InvalidWitness,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PropagationOutcome {
    Trivialized {
        witness: Family,
        threshold: Threshold,
        ladder: TrivializationLadder,
    },
    StageFailed {
        stage: usize,
        index: IndexTuple,
        kind: FailureKind,
        ladder: TrivializationLadder,
    },
    FinalCheckFailed {
        threshold: Threshold,
        ladder: TrivializationLadder,
    },
}

impl PropagationOutcome {
    pub fn witness(&self) -> Option<(&Family, Threshold)> {
        match self {
            PropagationOutcome::Trivialized { witness, threshold, .. } => Some((witness, *threshold)),
            _ => None,
        }
    }

    pub fn ladder(&self) -> &TrivializationLadder {
        match self {
            PropagationOutcome::Trivialized { ladder, .. }
            | PropagationOutcome::StageFailed { ladder, .. }
            | PropagationOutcome::FinalCheckFailed { ladder, .. } => ladder,
        }
    }
}

/// Runs the ladder from `T1` to a witness of arity `n − 1` over all of `X`,
/// self-checked against `Φ` at the largest threshold any stage needed.
pub fn propagate(
    phi: &Family,
    a_set: &BTreeSet<Index>,
    t1: &TypeIWitness,
    l: Threshold,
    solver: &LowerSolver<'_>,
    exec: Exec,
) -> Result<PropagationOutcome> {
    resume(phi, TrivializationLadder::start(phi, a_set, t1, l)?, solver, exec)
}

/// Continues a ladder (fresh or restored from a checkpoint) to the end.
pub fn resume(phi: &Family, mut ladder: TrivializationLadder, solver: &LowerSolver<'_>, exec: Exec) -> Result<PropagationOutcome> {
    let n = ladder.n;
    while ladder.stage() < n {
        let k = ladder.stage();
        let l = ladder.threshold();
        let outer = ladder.x_fs.tuples(k);
        let sigmas = exec.try_map(&outer, |f| sigma_family(phi, &ladder, k, f))?;
        ladder.sigma.truncate(k - 1);
        ladder
            .sigma
            .push(outer.iter().cloned().zip(sigmas.iter().map(|b| b.family().clone())).collect());
        if let Some(i) = exec.find_map_first(&outer, |f| {
            (!verify_sigma_coherent(&ladder, k, f, l).unwrap_or(false)).then(|| f.clone())
        }) {
            return Ok(PropagationOutcome::StageFailed {
                stage: k,
                index: i,
                kind: FailureKind::Incoherent,
                ladder,
            });
        }
        let solved = exec.try_map(
            &sigmas,
            |c| -> Result<std::result::Result<(Threshold, TypeIWitness), FailureKind>> {
                Ok(match solver(c, l)? {
                    None => Err(FailureKind::NoWitness),
                    Some((lf, w)) if is_trivialization_type_i(c.family(), &w, lf).unwrap_or(false) => Ok((lf.max(l), w)),
                    Some(_) => Err(FailureKind::InvalidWitness),
                })
            },
        )?;
        let mut next = BTreeMap::new();
        let mut stage_l = l;
        for (f, r) in outer.into_iter().zip(solved) {
            match r {
                Ok((lf, w)) => {
                    stage_l = stage_l.max(lf);
                    next.insert(f, w);
                }
                Err(kind) => {
                    return Ok(PropagationOutcome::StageFailed {
                        stage: k,
                        index: f,
                        kind,
                        ladder,
                    })
                }
            }
        }
        ladder.tau.push(next);
        ladder.thresholds.push(stage_l);
    }
    let top = &ladder.tau[n - 1];
    let witness = Family::from_fn(n - 1, ladder.x_fs.clone(), ladder.base_cap.clone(), |f, d| {
        let Some(TypeIWitness::Single(psi)) = top.get(f) else {
            return domain(format!("final stage lacks a function for {f}"));
        };
        SparseZFn::from_entries(d.clone(), d.points().filter_map(|p| psi.get(p).map(|v| (p, v))))
    })?;
    let threshold = ladder.threshold();
    if is_trivialization_type_i(phi, &TypeIWitness::Family(witness.clone()), threshold)? {
        Ok(PropagationOutcome::Trivialized {
            witness,
            threshold,
            ladder,
        })
    } else {
        Ok(PropagationOutcome::FinalCheckFailed { threshold, ladder })
    }
}

/// One `τ` entry in a checkpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessJson {
    Single(Vec<[i64; 3]>),
    Family(TableJson),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCheckpoint {
    pub k: usize,
    pub threshold: u32,
    pub tau: BTreeMap<String, WitnessJson>,
}

/// The `τ` stages of a ladder; `ς` is recomputed on restore.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LadderCheckpoint {
    pub arity: usize,
    pub a: Vec<u32>,
    pub stages: Vec<StageCheckpoint>,
}

impl TrivializationLadder {
    pub fn to_checkpoint(&self) -> LadderCheckpoint {
        LadderCheckpoint {
            arity: self.n,
            a: self.a_set.iter().map(|i| i.0).collect(),
            stages: self
                .tau
                .iter()
                .zip(&self.thresholds)
                .enumerate()
                .map(|(i, (tau, l))| StageCheckpoint {
                    k: i + 1,
                    threshold: l.0,
                    tau: tau
                        .iter()
                        .map(|(f, w)| {
                            let j = match w {
                                TypeIWitness::Single(psi) => WitnessJson::Single(psi.to_cells()),
                                TypeIWitness::Family(fam) => WitnessJson::Family(fam.to_table_json()),
                            };
                            (f.to_string(), j)
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    /// Rebuilds the ladder against `Φ`, re-validating stage 1 and recomputing
    /// every `ς` stage below the last `τ` stage.
    pub fn from_checkpoint(phi: &Family, cp: &LadderCheckpoint) -> Result<Self> {
        if cp.arity != phi.arity() {
            return Err(Error::Schema(format!("checkpoint arity {} does not match Φ", cp.arity)));
        }
        let a_set: BTreeSet<Index> = cp.a.iter().map(|&i| Index(i)).collect();
        let Some(first) = cp.stages.first() else {
            return Err(Error::Schema("checkpoint has no stages".into()));
        };
        let a_fs = Arc::new(phi.functions().restrict(&a_set)?);
        let mut ladder: Option<TrivializationLadder> = None;
        for (i, st) in cp.stages.iter().enumerate() {
            if st.k != i + 1 || st.k > cp.arity {
                return Err(Error::Schema(format!("stage {} out of order", st.k)));
            }
            let mut tau = BTreeMap::new();
            for (key, w) in &st.tau {
                let f = parse_tuple_key(key)?;
                let g = match &ladder {
                    Some(lad) => lad.cap_for(&f)?,
                    None => phi.cap().cloned(),
                };
                let arity = cp.arity - st.k;
                let wit = match (w, arity) {
                    (WitnessJson::Single(cells), 0) => {
                        TypeIWitness::Single(SparseZFn::from_cells(single_witness_domain(&a_fs, g.as_ref()), cells)?)
                    }
                    (WitnessJson::Family(t), a) if a > 0 => TypeIWitness::Family(Family::from_table_json(a, a_fs.clone(), g, t)?),
                    _ => return Err(Error::Schema(format!("stage {} entry {key} has the wrong shape", st.k))),
                };
                tau.insert(f, wit);
            }
            match &mut ladder {
                None => {
                    let t1 = tau
                        .remove(&IndexTuple::default())
                        .ok_or_else(|| Error::Schema("stage 1 must be keyed by \"()\"".into()))?;
                    ladder = Some(TrivializationLadder::start(phi, &a_set, &t1, Threshold(first.threshold))?);
                }
                Some(lad) => {
                    let k = lad.stage();
                    let outer = lad.x_fs.tuples(k);
                    let sig = outer
                        .iter()
                        .map(|f| Ok((f.clone(), sigma_family(phi, lad, k, f)?.into_family())))
                        .collect::<Result<BTreeMap<_, _>>>()?;
                    lad.sigma.push(sig);
                    lad.tau.push(tau);
                    lad.thresholds.push(Threshold(st.threshold));
                }
            }
        }
        Ok(ladder.expect("at least one stage"))
    }
}

/// A propagation instance: `Φ = δΨ + N` with `N` in columns `≤ ℓ`, index 0 of
/// `A` dominating every other function, and `T1` solved on `Φ↾A`.
#[derive(Debug, Clone)]
pub struct PlantedPropagation {
    pub phi: Family,
    pub a_set: BTreeSet<Index>,
    pub t1: TypeIWitness,
    pub threshold: Threshold,
}

pub fn plant_propagation_instance(
    seed: u64,
    n: usize,
    x_size: usize,
    a_size: usize,
    columns: usize,
    max_value: u32,
    threshold: u32,
) -> Result<PlantedPropagation> {
    if a_size < n || x_size < a_size || columns == 0 {
        return domain(format!(
            "need n ≤ |A| ≤ |X| and columns > 0, got n = {n}, |A| = {a_size}, |X| = {x_size}"
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<(u32, Vec<u32>)> = (0..x_size as u32)
        .map(|i| {
            let f = if i == 0 {
                vec![max_value; columns]
            } else {
                (0..columns).map(|_| rng.gen_range(0..=max_value)).collect()
            };
            (i, f)
        })
        .collect();
    let fs = Arc::new(FunctionSet::from_values(&values)?);
    let phi = plant_family(&mut rng, &fs, PlantSpec { arity: n, threshold })?;
    let a_set: BTreeSet<Index> = (0..a_size as u32).map(Index).collect();
    let l = Threshold(threshold);
    let t1 = match solve_type_i(&phi.restrict(&a_set)?, l)? {
        Outcome::Found(w) => w,
        Outcome::Infeasible(_) => return domain("planted restriction has no trivialization"),
    };
    Ok(PlantedPropagation {
        phi,
        a_set,
        t1,
        threshold: l,
    })
}
