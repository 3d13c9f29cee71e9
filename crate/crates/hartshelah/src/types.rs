//! Galois-type instances over a base model, their equality, and canonical
//! existential fingerprints.
//!
//! Equality of `gtp(ā/M; N₁)` and `gtp(b̄/M; N₂)` is decided by a bounded
//! amalgam search: look for a common finite model and two embeddings that
//! agree over `M` and identify the tuples. Restricting any equalizing
//! amalgam to the span of the two images and standardizing it shows the
//! search may range over standard models on `I(M)` plus at most
//! `|I(N₁)| + |I(N₂)| - 2|I(M)|` fresh atoms, so the bound loses nothing.
//!
//! The fast path standardizes an instance with canonical solutions and
//! compares canonical fingerprints; it covers atoms, blocks, `Z_2` and
//! group elements, and stalk points over base blocks, and punts to the
//! search elsewhere.

use std::collections::{BTreeMap, BTreeSet};

use itertools::Itertools;

use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::group::GroupElem;
use crate::index::{fresh_token, AtomId, Block};
use crate::linsys::{LinSystem, Outcome, VarMap};
use crate::model::{Element, Model, StalkPoint};
use crate::solution::{extend_solution, solve_solution, Solution, SolutionPins};

/// Largest number of fresh closure atoms the fingerprint canonicalizer will
/// permute before falling back to search.
const FINGERPRINT_FRESH_CAP: usize = 7;

/// A tuple of elements in an ambient model, considered over a base that is
/// a zero-offset induced submodel of the ambient.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypeInstance {
    base: Model,
    ambient: Model,
    tuple: Vec<Element>,
}

impl TypeInstance {
    pub fn new(base: Model, ambient: Model, tuple: Vec<Element>) -> Result<Self> {
        if !ambient.has_induced(&base) {
            return Err(Error::NotInduced {
                sub: format!("{base:?}"),
                sup: format!("{ambient:?}"),
            });
        }
        for e in &tuple {
            if !ambient.contains_element(e) {
                return Err(Error::NotInModel { what: "tuple element" });
            }
        }
        Ok(TypeInstance {
            base,
            ambient,
            tuple,
        })
    }

    pub fn base(&self) -> &Model {
        &self.base
    }

    pub fn ambient(&self) -> &Model {
        &self.ambient
    }

    pub fn tuple(&self) -> &[Element] {
        &self.tuple
    }

    /// The same tuple considered over a smaller base.
    pub fn restrict_base(&self, smaller: &Model) -> Result<TypeInstance> {
        if !self.base.has_induced(smaller) {
            return Err(Error::NotInduced {
                sub: format!("{smaller:?}"),
                sup: format!("{:?}", self.base),
            });
        }
        TypeInstance::new(smaller.clone(), self.ambient.clone(), self.tuple.clone())
    }
}

/// Whether a length-1 instance is a basic type: an index atom of the
/// ambient model that is not in the base.
pub fn is_basic_type(t: &TypeInstance) -> bool {
    match t.tuple() {
        [Element::Atom(a)] => t.ambient.contains_atom(a) && !t.base.contains_atom(a),
        _ => false,
    }
}

/// An amalgam witnessing equality of two type instances: embeddings of the
/// two ambients into a common model, agreeing over the base and matching
/// the tuples.
#[derive(Clone, Debug)]
pub struct EqualityWitness {
    pub amalgam: Model,
    pub left: Embedding,
    pub right: Embedding,
}

/// The verdict of [`galois_type_equal`].
#[derive(Clone, Debug)]
pub struct TypeEq {
    pub equal: bool,
    pub witness: Option<EqualityWitness>,
}

fn ensure_same_base(t1: &TypeInstance, t2: &TypeInstance) -> Result<()> {
    if t1.base != t2.base {
        return Err(Error::MismatchedBases);
    }
    Ok(())
}

/// Replaces base and ambient by standard models via canonical solutions,
/// transporting the tuple along the standardizing isomorphism.
///
/// The solution for the base is solved first and extended into the
/// ambient, so for a fixed base every instance is standardized through the
/// same base isomorphism; fingerprints of instances over a common base are
/// therefore comparable.
pub fn standardize_instance(t: &TypeInstance) -> Result<TypeInstance> {
    let h_base = solve_solution(&t.base, &t.base.block_set(), &SolutionPins::default())?
        .solution()
        .ok_or_else(|| Error::Internal("a finite model always has a solution".to_string()))?;
    let h_ambient = extend_solution(
        &t.ambient,
        &h_base.in_ambient(&t.ambient)?,
        &t.ambient.block_set(),
    )?
    .solution()
    .ok_or_else(|| {
        Error::Internal("extension of solutions cannot fail over a finite index set".to_string())
    })?;
    let ambient_star = Model::standard(t.ambient.atoms().to_vec(), t.ambient.arity())?;
    let identity: BTreeMap<AtomId, AtomId> = t
        .ambient
        .atoms()
        .iter()
        .map(|a| (a.clone(), a.clone()))
        .collect();
    let f = crate::solution::iso_from_solutions(&h_ambient, &Solution::zero_full(&ambient_star), &identity)?;
    let base_star = Model::standard(t.base.atoms().to_vec(), t.base.arity())?;
    let tuple = t
        .tuple
        .iter()
        .map(|e| f.map_element(e))
        .collect::<Result<Vec<_>>>()?;
    TypeInstance::new(base_star, ambient_star, tuple)
}

/// A canonical invariant of a type instance on the supported fragment.
///
/// Equal fingerprints imply equal Galois types, and on the supported
/// catalog the converse holds as well. Only comparable between instances
/// over the same base.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fingerprint(String);

impl Fingerprint {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

/// Computes the canonical fingerprint, or reports
/// [`Error::FingerprintIncomplete`] for configurations outside the
/// supported catalog (stalk points over non-base blocks, or too many fresh
/// closure atoms).
pub fn existential_fingerprint(t: &TypeInstance) -> Result<Fingerprint> {
    if t.tuple.is_empty() {
        return Err(Error::BadConfiguration(
            "fingerprints require a tuple of length at least 1".to_string(),
        ));
    }
    let std = standardize_instance(t)?;
    let base = &std.base;

    // Supported catalog: after standardization, stalk points must sit over
    // base blocks; their offsets are then rigid and behave like group
    // elements.
    for e in &std.tuple {
        if let Element::Point(p) = e {
            if !base.is_block(p.block()) {
                return Err(Error::FingerprintIncomplete);
            }
        }
    }

    // Closure atoms outside the base, in ambient declaration order.
    let mut fresh: Vec<AtomId> = Vec::new();
    let mut seen: BTreeSet<AtomId> = BTreeSet::new();
    {
        let mut visit = |a: &AtomId| {
            if !base.contains_atom(a) && seen.insert(a.clone()) {
                fresh.push(a.clone());
            }
        };
        for e in &std.tuple {
            match e {
                Element::Atom(a) => visit(a),
                Element::Block(b) => b.atoms().iter().for_each(&mut visit),
                Element::Bit(_) => {}
                Element::Group(g) => {
                    for b in g.support() {
                        b.atoms().iter().for_each(&mut visit);
                    }
                }
                Element::Point(p) => {
                    p.block().atoms().iter().for_each(&mut visit);
                    if let StalkPoint::GStar { offset, .. } = p {
                        for b in offset.support() {
                            b.atoms().iter().for_each(&mut visit);
                        }
                    }
                }
            }
        }
    }
    fresh.sort_by_key(|a| std.ambient.atom_position(a));
    if fresh.len() > FINGERPRINT_FRESH_CAP {
        return Err(Error::FingerprintIncomplete);
    }

    // Canonical form: the minimum encoding over relabelings of the fresh
    // atoms. Base atoms are encoded by their declaration position.
    let encode_atom = |a: &AtomId, labels: &BTreeMap<AtomId, usize>| -> String {
        match base.atom_position(a) {
            Some(i) => format!("m{i}"),
            None => format!("f{}", labels[a]),
        }
    };
    let encode_block = |b: &Block, labels: &BTreeMap<AtomId, usize>| -> String {
        let mut parts: Vec<String> = b.atoms().iter().map(|a| encode_atom(a, labels)).collect();
        parts.sort();
        format!("[{}]", parts.join(","))
    };
    let encode_support = |g: &GroupElem, labels: &BTreeMap<AtomId, usize>| -> String {
        let mut parts: Vec<String> = g.support().iter().map(|b| encode_block(b, labels)).collect();
        parts.sort();
        format!("{{{}}}", parts.join(","))
    };

    let mut best: Option<String> = None;
    let k = fresh.len();
    for perm in (0..k).permutations(k) {
        let labels: BTreeMap<AtomId, usize> = fresh
            .iter()
            .cloned()
            .zip(perm.iter().copied())
            .collect();
        let encoded = std
            .tuple
            .iter()
            .map(|e| match e {
                Element::Atom(a) => format!("A:{}", encode_atom(a, &labels)),
                Element::Block(b) => format!("B:{}", encode_block(b, &labels)),
                Element::Bit(b) => format!("H:{}", u8::from(*b)),
                Element::Group(g) => format!("G:{}", encode_support(g, &labels)),
                Element::Point(StalkPoint::GStar { block, offset }) => format!(
                    "GS:{}+{}",
                    encode_block(block, &labels),
                    encode_support(offset, &labels)
                ),
                Element::Point(StalkPoint::HStar { block, bit }) => {
                    format!("HS:{}+{}", encode_block(block, &labels), u8::from(*bit))
                }
            })
            .join(";");
        if best.as_ref().is_none_or(|b| encoded < *b) {
            best = Some(encoded);
        }
    }
    let body = best.expect("k! ≥ 1 permutations");
    Ok(Fingerprint(format!(
        "n={};|M|={};{}",
        base.arity(),
        base.atoms().len(),
        body
    )))
}

/// Fingerprint comparison; `None` when either instance falls outside the
/// supported catalog.
pub fn type_equal_fast(t1: &TypeInstance, t2: &TypeInstance) -> Result<Option<bool>> {
    ensure_same_base(t1, t2)?;
    if t1.tuple.len() != t2.tuple.len() {
        return Ok(Some(false));
    }
    let f1 = match existential_fingerprint(t1) {
        Ok(f) => f,
        Err(Error::FingerprintIncomplete) => return Ok(None),
        Err(e) => return Err(e),
    };
    let f2 = match existential_fingerprint(t2) {
        Ok(f) => f,
        Err(Error::FingerprintIncomplete) => return Ok(None),
        Err(e) => return Err(e),
    };
    Ok(Some(f1 == f2))
}

/// Variables of the amalgam search: offset coordinates per side. Side 0 is
/// the shared data over base blocks, forced equal for the two embeddings by
/// commutation over the base.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum SearchVar {
    Delta(u8, Block, Block),
    Eps(u8, Block),
}

/// The bounded brute-force amalgam search. Returns a verified witness when
/// the types are equal and `None` otherwise.
pub fn type_equal_search(t1: &TypeInstance, t2: &TypeInstance) -> Result<Option<EqualityWitness>> {
    ensure_same_base(t1, t2)?;
    if t1.tuple.len() != t2.tuple.len() {
        return Ok(None);
    }
    if t1 == t2 {
        let id = Embedding::identity(&t1.ambient);
        return Ok(Some(EqualityWitness {
            amalgam: t1.ambient.clone(),
            left: id.clone(),
            right: id,
        }));
    }

    let base = &t1.base;
    let fresh1: Vec<AtomId> = t1
        .ambient
        .atoms()
        .iter()
        .filter(|a| !base.contains_atom(a))
        .cloned()
        .collect();
    let fresh2: Vec<AtomId> = t2
        .ambient
        .atoms()
        .iter()
        .filter(|a| !base.contains_atom(a))
        .cloned()
        .collect();

    let max_matched = fresh1.len().min(fresh2.len());
    for k in 0..=max_matched {
        for chosen1 in fresh1.iter().combinations(k) {
            for arranged2 in fresh2.iter().permutations(k) {
                let matching: BTreeMap<AtomId, AtomId> = arranged2
                    .iter()
                    .map(|a| (*a).clone())
                    .zip(chosen1.iter().map(|a| (*a).clone()))
                    .collect();
                if let Some(witness) = try_amalgam(t1, t2, &matching)? {
                    return Ok(Some(witness));
                }
            }
        }
    }
    Ok(None)
}

/// Attempts one atom identification pattern: `matching` sends matched fresh
/// atoms of the second ambient to their partners in the first.
fn try_amalgam(
    t1: &TypeInstance,
    t2: &TypeInstance,
    matching: &BTreeMap<AtomId, AtomId>,
) -> Result<Option<EqualityWitness>> {
    let base = &t1.base;
    let n1 = &t1.ambient;
    let n2 = &t2.ambient;

    // Atom maps into the union model: the first ambient keeps its tokens;
    // unmatched fresh atoms of the second are renamed clear of them.
    let pi1: BTreeMap<AtomId, AtomId> =
        n1.atoms().iter().map(|a| (a.clone(), a.clone())).collect();
    let mut used: BTreeSet<AtomId> = n1.atoms().iter().cloned().collect();
    let mut pi2: BTreeMap<AtomId, AtomId> = BTreeMap::new();
    let mut extra_atoms: Vec<AtomId> = Vec::new();
    for a in n2.atoms() {
        let image = if base.contains_atom(a) {
            a.clone()
        } else if let Some(partner) = matching.get(a) {
            partner.clone()
        } else {
            let fresh = fresh_token(a.token(), &used);
            used.insert(fresh.clone());
            extra_atoms.push(fresh.clone());
            fresh
        };
        pi2.insert(a.clone(), image);
    }
    let mut union_atoms: Vec<AtomId> = n1.atoms().to_vec();
    union_atoms.extend(extra_atoms);
    let amalgam = Model::standard(union_atoms, base.arity())?;

    let push1 = crate::embedding::extend_index_map(n1, &amalgam, &pi1)?;
    let push2 = crate::embedding::extend_index_map(n2, &amalgam, &pi2)?;

    // Structural tuple matching; collect the linear matching constraints.
    #[derive(Debug)]
    enum OffsetConstraint {
        GStar {
            u1: Block,
            u2: Block,
            rhs: GroupElem, // π1₊γ1 + π2₊γ2 over the amalgam
        },
        HStar {
            v1: Block,
            v2: Block,
            rhs: bool,
        },
    }
    let mut constraints: Vec<OffsetConstraint> = Vec::new();
    for (e1, e2) in t1.tuple.iter().zip(t2.tuple.iter()) {
        match (e1, e2) {
            (Element::Atom(a1), Element::Atom(a2)) => {
                if push1.map_atom(a1)? != push2.map_atom(a2)? {
                    return Ok(None);
                }
            }
            (Element::Block(b1), Element::Block(b2)) => {
                if push1.map_block(b1)? != push2.map_block(b2)? {
                    return Ok(None);
                }
            }
            (Element::Bit(b1), Element::Bit(b2)) => {
                if b1 != b2 {
                    return Ok(None);
                }
            }
            (Element::Group(g1), Element::Group(g2)) => {
                if push1.map_group(g1)? != push2.map_group(g2)? {
                    return Ok(None);
                }
            }
            (
                Element::Point(StalkPoint::GStar { block: u1, offset: g1 }),
                Element::Point(StalkPoint::GStar { block: u2, offset: g2 }),
            ) => {
                if push1.map_block(u1)? != push2.map_block(u2)? {
                    return Ok(None);
                }
                constraints.push(OffsetConstraint::GStar {
                    u1: u1.clone(),
                    u2: u2.clone(),
                    rhs: push1.map_group(g1)?.add(&push2.map_group(g2)?),
                });
            }
            (
                Element::Point(StalkPoint::HStar { block: v1, bit: b1 }),
                Element::Point(StalkPoint::HStar { block: v2, bit: b2 }),
            ) => {
                if push1.map_block(v1)? != push2.map_block(v2)? {
                    return Ok(None);
                }
                constraints.push(OffsetConstraint::HStar {
                    v1: v1.clone(),
                    v2: v2.clone(),
                    rhs: b1 ^ b2,
                });
            }
            _ => return Ok(None), // sort mismatch
        }
    }

    // Offset data: one group element per source block per side, one bit per
    // source block per side, with base blocks shared between the sides.
    let side_of = |u: &Block, side: u8| -> u8 {
        if base.is_block(u) {
            0
        } else {
            side
        }
    };
    let amalgam_blocks = amalgam.blocks();

    let mut keys: BTreeSet<SearchVar> = BTreeSet::new();
    let mut q_rows: Vec<(Vec<SearchVar>, bool)> = Vec::new();
    for (side, instance, push) in [(1u8, t1, &push1), (2u8, t2, &push2)] {
        for t in instance.ambient.compatible_tuples() {
            let coord = push.map_block(t.v())?;
            let mut row = Vec::new();
            for u in t.others() {
                row.push(SearchVar::Delta(side_of(&u, side), u, coord.clone()));
            }
            row.push(SearchVar::Eps(side_of(t.v(), side), t.v().clone()));
            keys.extend(row.iter().cloned());
            q_rows.push((row, instance.ambient.twist(&t)));
        }
    }
    let mut match_rows: Vec<(Vec<SearchVar>, bool)> = Vec::new();
    for c in &constraints {
        match c {
            OffsetConstraint::GStar { u1, u2, rhs } => {
                for x in &amalgam_blocks {
                    let row = vec![
                        SearchVar::Delta(side_of(u1, 1), u1.clone(), x.clone()),
                        SearchVar::Delta(side_of(u2, 2), u2.clone(), x.clone()),
                    ];
                    keys.extend(row.iter().cloned());
                    match_rows.push((row, rhs.eval(x)));
                }
            }
            OffsetConstraint::HStar { v1, v2, rhs } => {
                let row = vec![
                    SearchVar::Eps(side_of(v1, 1), v1.clone()),
                    SearchVar::Eps(side_of(v2, 2), v2.clone()),
                ];
                keys.extend(row.iter().cloned());
                match_rows.push((row, *rhs));
            }
        }
    }

    let vars: VarMap<SearchVar> = VarMap::from_keys(keys);
    let mut sys = LinSystem::new(vars.len());
    for (row, rhs) in q_rows.iter().chain(match_rows.iter()) {
        let idx: Vec<usize> = row.iter().map(|k| vars.get(k).expect("registered")).collect();
        sys.add_equation(&idx, *rhs);
    }
    let Outcome::Sat(assignment) = sys.solve() else {
        return Ok(None);
    };

    // Materialize the two embeddings from the assignment.
    let mut deltas: [BTreeMap<Block, GroupElem>; 2] = [BTreeMap::new(), BTreeMap::new()];
    let mut epss: [BTreeSet<Block>; 2] = [BTreeSet::new(), BTreeSet::new()];
    for (key, idx) in vars.iter() {
        if !assignment[idx] {
            continue;
        }
        match key {
            SearchVar::Delta(side, u, x) => {
                for target in match side {
                    0 => [Some(0usize), Some(1)],
                    1 => [Some(0), None],
                    _ => [None, Some(1)],
                }
                .into_iter()
                .flatten()
                {
                    deltas[target].entry(u.clone()).or_default().flip(x.clone());
                }
            }
            SearchVar::Eps(side, v) => {
                for target in match side {
                    0 => [Some(0usize), Some(1)],
                    1 => [Some(0), None],
                    _ => [None, Some(1)],
                }
                .into_iter()
                .flatten()
                {
                    if !epss[target].remove(v) {
                        epss[target].insert(v.clone());
                    }
                }
            }
        }
    }
    let [delta1, delta2] = deltas;
    let [eps1, eps2] = epss;
    let g1 = Embedding::new(n1.clone(), amalgam.clone(), pi1, delta1, eps1)?;
    let g2 = Embedding::new(n2.clone(), amalgam.clone(), pi2, delta2, eps2)?;

    // Verify everything the witness claims before returning it.
    if !g1.is_valid() || !g2.is_valid() {
        return Err(Error::Internal(
            "amalgam search produced an invalid embedding".to_string(),
        ));
    }
    let incl1 = Embedding::inclusion(base, n1)?;
    let incl2 = Embedding::inclusion(base, n2)?;
    if incl1.compose(&g1)? != incl2.compose(&g2)? {
        return Err(Error::Internal(
            "amalgam search broke commutation over the base".to_string(),
        ));
    }
    for (e1, e2) in t1.tuple.iter().zip(t2.tuple.iter()) {
        if g1.map_element(e1)? != g2.map_element(e2)? {
            return Err(Error::Internal(
                "amalgam search failed to identify the tuples".to_string(),
            ));
        }
    }
    Ok(Some(EqualityWitness {
        amalgam,
        left: g1,
        right: g2,
    }))
}

/// Decides Galois-type equality: the fingerprint fast path short-circuits
/// inequality; equality verdicts always come with a search witness.
pub fn galois_type_equal(t1: &TypeInstance, t2: &TypeInstance) -> Result<TypeEq> {
    if let Some(false) = type_equal_fast(t1, t2)? {
        return Ok(TypeEq {
            equal: false,
            witness: None,
        });
    }
    let witness = type_equal_search(t1, t2)?;
    Ok(TypeEq {
        equal: witness.is_some(),
        witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::atoms;

    fn standard(ts: &[&str], n: usize) -> Model {
        Model::standard_from_tokens(ts, n).unwrap()
    }

    fn block(ts: &[&str]) -> Block {
        Block::from_tokens(ts).unwrap()
    }

    fn atom(t: &str) -> AtomId {
        AtomId::new(t).unwrap()
    }

    #[test]
    fn fresh_atoms_over_the_same_base_are_equal() {
        let m = standard(&["a", "b"], 2);
        let n1 = standard(&["a", "b", "c"], 2);
        let n2 = standard(&["a", "b", "d"], 2);
        let t1 = TypeInstance::new(m.clone(), n1, vec![Element::Atom(atom("c"))]).unwrap();
        let t2 = TypeInstance::new(m.clone(), n2, vec![Element::Atom(atom("d"))]).unwrap();

        let verdict = galois_type_equal(&t1, &t2).unwrap();
        assert!(verdict.equal);
        let w = verdict.witness.unwrap();
        assert!(w.left.is_valid() && w.right.is_valid());

        // Reflexivity with an identity witness.
        let same = galois_type_equal(&t1, &t1).unwrap();
        assert!(same.equal);
        assert_eq!(same.witness.unwrap().amalgam, *t1.ambient());
    }

    #[test]
    fn algebraic_vs_fresh_atoms_differ() {
        let m = standard(&["a", "b"], 2);
        let n = standard(&["a", "b", "c"], 2);
        let algebraic =
            TypeInstance::new(m.clone(), n.clone(), vec![Element::Atom(atom("a"))]).unwrap();
        let fresh = TypeInstance::new(m.clone(), n, vec![Element::Atom(atom("c"))]).unwrap();
        assert!(!galois_type_equal(&algebraic, &fresh).unwrap().equal);
        assert_eq!(type_equal_fast(&algebraic, &fresh).unwrap(), Some(false));
    }

    #[test]
    fn basic_type_examples() {
        let m = standard(&["a", "b"], 2);
        let n = standard(&["a", "b", "c"], 2);
        let fresh = TypeInstance::new(m.clone(), n.clone(), vec![Element::Atom(atom("c"))]).unwrap();
        assert!(is_basic_type(&fresh));
        let algebraic = TypeInstance::new(m.clone(), n.clone(), vec![Element::Atom(atom("a"))]).unwrap();
        assert!(!is_basic_type(&algebraic));
        let group = TypeInstance::new(
            m,
            n,
            vec![Element::Group(GroupElem::singleton(block(&["a", "c"])))],
        )
        .unwrap();
        assert!(!is_basic_type(&group));
    }

    #[test]
    fn fingerprint_distinguishes_base_support() {
        // A group element whose support meets the base differs from one
        // whose support avoids it.
        let m = standard(&["a", "b"], 2);
        let n = standard(&["a", "b", "c", "d"], 2);
        let meets = TypeInstance::new(
            m.clone(),
            n.clone(),
            vec![Element::Group(GroupElem::singleton(block(&["a", "c"])))],
        )
        .unwrap();
        let avoids = TypeInstance::new(
            m.clone(),
            n.clone(),
            vec![Element::Group(GroupElem::singleton(block(&["c", "d"])))],
        )
        .unwrap();
        let f1 = existential_fingerprint(&meets).unwrap();
        let f2 = existential_fingerprint(&avoids).unwrap();
        assert_ne!(f1, f2);
        assert!(!galois_type_equal(&meets, &avoids).unwrap().equal);

        // Two supports meeting the base in the same pattern are equal.
        let meets_other = TypeInstance::new(
            m,
            n,
            vec![Element::Group(GroupElem::singleton(block(&["a", "d"])))],
        )
        .unwrap();
        assert_eq!(existential_fingerprint(&meets_other).unwrap(), f1);
        assert!(galois_type_equal(&meets, &meets_other).unwrap().equal);
    }

    #[test]
    fn stalk_points_off_the_base_fall_back_to_search() {
        let m = standard(&["a", "b"], 2);
        let n = standard(&["a", "b", "c"], 2);
        let point = TypeInstance::new(
            m,
            n,
            vec![Element::Point(StalkPoint::g_star(
                block(&["a", "c"]),
                GroupElem::zero(),
            ))],
        )
        .unwrap();
        assert!(matches!(
            existential_fingerprint(&point),
            Err(Error::FingerprintIncomplete)
        ));
        assert_eq!(type_equal_fast(&point, &point).unwrap(), None);
        // The search still decides.
        assert!(galois_type_equal(&point, &point).unwrap().equal);
    }

    #[test]
    fn twisted_ambients_standardize_before_comparison() {
        // The same fresh-atom type realized in a twisted extension and in
        // the standard one.
        let m = standard(&["a", "b", "x"], 2);
        let twisted = {
            let t = crate::index::CompTuple::new(
                block(&["b", "c"]),
                atoms(&["a", "b", "c"]).unwrap(),
            )
            .unwrap();
            Model::new(
                atoms(&["a", "b", "x", "c"]).unwrap(),
                2,
                [t].into_iter().collect(),
            )
            .unwrap()
        };
        let plain = standard(&["a", "b", "x", "d"], 2);
        let t1 = TypeInstance::new(m.clone(), twisted, vec![Element::Atom(atom("c"))]).unwrap();
        let t2 = TypeInstance::new(m, plain, vec![Element::Atom(atom("d"))]).unwrap();
        assert_eq!(
            existential_fingerprint(&t1).unwrap(),
            existential_fingerprint(&t2).unwrap()
        );
        let verdict = galois_type_equal(&t1, &t2).unwrap();
        assert!(verdict.equal);
    }

    #[test]
    fn gstar_points_over_base_blocks_compare_rigidly() {
        // Over a base block the offset difference must be matched exactly,
        // so distinct offsets over the same stalk give distinct types when
        // the difference meets the base.
        let m = standard(&["a", "b", "c"], 2);
        let n = standard(&["a", "b", "c", "d"], 2);
        let zero = TypeInstance::new(
            m.clone(),
            n.clone(),
            vec![Element::Point(StalkPoint::g_star(
                block(&["a", "b"]),
                GroupElem::zero(),
            ))],
        )
        .unwrap();
        let shifted_in_base = TypeInstance::new(
            m.clone(),
            n.clone(),
            vec![Element::Point(StalkPoint::g_star(
                block(&["a", "b"]),
                GroupElem::singleton(block(&["b", "c"])),
            ))],
        )
        .unwrap();
        assert!(!galois_type_equal(&zero, &shifted_in_base).unwrap().equal);

        // A difference supported outside the base can be renamed away:
        // offsets {bd} and {bd} over different fresh atoms... compare the
        // zero offset with an offset supported on a fresh block.
        let shifted_fresh = TypeInstance::new(
            m.clone(),
            n.clone(),
            vec![Element::Point(StalkPoint::g_star(
                block(&["a", "b"]),
                GroupElem::singleton(block(&["b", "d"])),
            ))],
        )
        .unwrap();
        // These differ as well: the support pattern relative to the base is
        // empty vs nonempty on the shared stalk.
        assert!(!galois_type_equal(&zero, &shifted_fresh).unwrap().equal);

        // But two fresh-supported shifts in different extensions agree.
        let n2 = standard(&["a", "b", "c", "e"], 2);
        let shifted_fresh2 = TypeInstance::new(
            m.clone(),
            n2,
            vec![Element::Point(StalkPoint::g_star(
                block(&["a", "b"]),
                GroupElem::singleton(block(&["b", "e"])),
            ))],
        )
        .unwrap();
        assert!(galois_type_equal(&shifted_fresh, &shifted_fresh2).unwrap().equal);
    }

    #[test]
    fn fast_path_agrees_with_search_on_mixed_micro_instances() {
        let m = standard(&["a", "b"], 2);
        let n1 = standard(&["a", "b", "c"], 2);
        let n2 = standard(&["a", "b", "d"], 2);
        let elements = |model: &Model, fresh: &str| -> Vec<Vec<Element>> {
            vec![
                vec![Element::Atom(atom("a"))],
                vec![Element::Atom(atom(fresh))],
                vec![Element::Block(block(&["a", "b"]))],
                vec![Element::Block(block(&["a", fresh]))],
                vec![Element::Bit(true)],
                vec![Element::Group(GroupElem::singleton(block(&["a", fresh])))],
                vec![Element::Point(StalkPoint::g_star(
                    block(&["a", "b"]),
                    GroupElem::singleton(block(&[fresh, "b"])),
                ))],
                vec![Element::Point(StalkPoint::h_star(block(&["a", "b"]), true))],
                vec![
                    Element::Atom(atom(fresh)),
                    Element::Group(GroupElem::singleton(block(&["a", fresh]))),
                ],
                vec![Element::Group({
                    let _ = model;
                    GroupElem::from_blocks(vec![block(&["a", "b"]), block(&["a", fresh])])
                })],
            ]
        };
        let left: Vec<TypeInstance> = elements(&n1, "c")
            .into_iter()
            .map(|tuple| TypeInstance::new(m.clone(), n1.clone(), tuple).unwrap())
            .collect();
        let right: Vec<TypeInstance> = elements(&n2, "d")
            .into_iter()
            .map(|tuple| TypeInstance::new(m.clone(), n2.clone(), tuple).unwrap())
            .collect();
        for t1 in &left {
            for t2 in &right {
                let fast = type_equal_fast(t1, t2).unwrap();
                let search = type_equal_search(t1, t2).unwrap().is_some();
                if let Some(f) = fast {
                    assert_eq!(f, search, "fast/search disagree on {t1:?} vs {t2:?}");
                }
            }
        }
        // Same-position pairs are equal via the fresh-atom renaming.
        for (t1, t2) in left.iter().zip(right.iter()) {
            assert!(galois_type_equal(t1, t2).unwrap().equal);
        }
    }

    #[test]
    fn mismatched_bases_are_rejected() {
        let m1 = standard(&["a", "b"], 2);
        let m2 = standard(&["a", "x"], 2);
        let n1 = standard(&["a", "b", "c"], 2);
        let n2 = standard(&["a", "x", "c"], 2);
        let t1 = TypeInstance::new(m1, n1, vec![Element::Atom(atom("c"))]).unwrap();
        let t2 = TypeInstance::new(m2, n2, vec![Element::Atom(atom("c"))]).unwrap();
        assert!(matches!(
            galois_type_equal(&t1, &t2),
            Err(Error::MismatchedBases)
        ));
    }
}
