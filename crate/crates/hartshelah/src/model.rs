//! Finite parity structures: the index set, its blocks, the affine stalk
//! sorts, and the `(n+1)`-ary parity relation.
//!
//! A model is encoded as `(I, n, q)` where `q` marks the compatible tuples
//! on which the parity relation holds with all-zero offsets. The even-action
//! axiom makes this twist the complete isomorphism-relevant content of the
//! relation, and the standard model is exactly `q ≡ 0`.

use std::collections::BTreeSet;
use std::fmt;

use itertools::Itertools;

use crate::error::{Error, Result};
use crate::group::GroupElem;
use crate::index::{AtomId, Block, CompTuple};

/// A finite model: ordered index atoms, block arity, and the parity twist.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Model {
    atoms: Vec<AtomId>,
    n: usize,
    twists: BTreeSet<CompTuple>,
}

/// A point of one of the two affine stalk sorts. Offsets are measured from
/// the representation's zero section; the standard model is the one where
/// that section is an actual solution.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StalkPoint {
    GStar { block: Block, offset: GroupElem },
    HStar { block: Block, bit: bool },
}

/// An element of the Z_2-module acting on a stalk: a group element for
/// `G*` stalks, a bit for `H*` stalks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StalkAction {
    Group(GroupElem),
    Bit(bool),
}

/// An element of any sort, as used in tuples of type instances.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Element {
    Atom(AtomId),
    Block(Block),
    /// An element of the copy of `Z_2` present in every model.
    Bit(bool),
    Group(GroupElem),
    Point(StalkPoint),
}

/// A defect found by [`Model::validate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    DuplicateAtom(AtomId),
    ArityTooSmall(usize),
    InvalidTupleKey { tuple: CompTuple, reason: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateAtom(a) => write!(f, "duplicate atom {a}"),
            Violation::ArityTooSmall(n) => write!(f, "arity {n} is below 2"),
            Violation::InvalidTupleKey { tuple, reason } => {
                write!(f, "invalid compatible tuple {tuple:?}: {reason}")
            }
        }
    }
}

impl StalkPoint {
    pub fn g_star(block: Block, offset: GroupElem) -> Self {
        StalkPoint::GStar { block, offset }
    }

    pub fn h_star(block: Block, bit: bool) -> Self {
        StalkPoint::HStar { block, bit }
    }

    /// The projection onto the block sort.
    pub fn block(&self) -> &Block {
        match self {
            StalkPoint::GStar { block, .. } | StalkPoint::HStar { block, .. } => block,
        }
    }

    pub fn is_g_star(&self) -> bool {
        matches!(self, StalkPoint::GStar { .. })
    }

    /// The free transitive action on the stalk.
    pub fn act(&self, action: &StalkAction) -> Result<StalkPoint> {
        match (self, action) {
            (StalkPoint::GStar { block, offset }, StalkAction::Group(g)) => {
                Ok(StalkPoint::GStar {
                    block: block.clone(),
                    offset: offset.add(g),
                })
            }
            (StalkPoint::HStar { block, bit }, StalkAction::Bit(b)) => Ok(StalkPoint::HStar {
                block: block.clone(),
                bit: bit ^ b,
            }),
            _ => Err(Error::SortMismatch(
                "group elements act on G* stalks, bits on H* stalks",
            )),
        }
    }

    /// The unique action element sending `self` to `other`.
    pub fn diff(&self, other: &StalkPoint) -> Result<StalkAction> {
        if self.block() != other.block() {
            return Err(Error::BlockMismatch);
        }
        match (self, other) {
            (StalkPoint::GStar { offset: a, .. }, StalkPoint::GStar { offset: b, .. }) => {
                Ok(StalkAction::Group(a.add(b)))
            }
            (StalkPoint::HStar { bit: a, .. }, StalkPoint::HStar { bit: b, .. }) => {
                Ok(StalkAction::Bit(a ^ b))
            }
            _ => Err(Error::SortMismatch("points lie in different stalk sorts")),
        }
    }
}

impl Model {
    /// The standard model: the given index set with `q ≡ 0`.
    pub fn standard(atoms: Vec<AtomId>, n: usize) -> Result<Self> {
        Model::new(atoms, n, BTreeSet::new())
    }

    /// Convenience constructor from string tokens.
    pub fn standard_from_tokens(tokens: &[&str], n: usize) -> Result<Self> {
        Model::standard(crate::index::atoms(tokens)?, n)
    }

    pub fn new(atoms: Vec<AtomId>, n: usize, twists: BTreeSet<CompTuple>) -> Result<Self> {
        let m = Model { atoms, n, twists };
        let violations = m.validate();
        if violations.is_empty() {
            Ok(m)
        } else {
            Err(Error::ModelViolations(violations))
        }
    }

    /// Builds without validation; pair with [`Model::validate`].
    pub fn from_raw_parts(atoms: Vec<AtomId>, n: usize, twists: BTreeSet<CompTuple>) -> Self {
        Model { atoms, n, twists }
    }

    /// Checks atom uniqueness, arity, and twist-key validity, returning all
    /// violations found.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.n < 2 {
            out.push(Violation::ArityTooSmall(self.n));
        }
        let mut seen = BTreeSet::new();
        for a in &self.atoms {
            if !seen.insert(a.clone()) {
                out.push(Violation::DuplicateAtom(a.clone()));
            }
        }
        for t in &self.twists {
            if t.v().arity() != self.n {
                out.push(Violation::InvalidTupleKey {
                    tuple: t.clone(),
                    reason: format!("block arity {} differs from n = {}", t.v().arity(), self.n),
                });
            } else if !t.w().iter().all(|a| seen.contains(a)) {
                out.push(Violation::InvalidTupleKey {
                    tuple: t.clone(),
                    reason: "tuple mentions an atom outside the index set".to_string(),
                });
            }
        }
        out
    }

    pub fn atoms(&self) -> &[AtomId] {
        &self.atoms
    }

    pub fn atom_set(&self) -> BTreeSet<AtomId> {
        self.atoms.iter().cloned().collect()
    }

    pub fn arity(&self) -> usize {
        self.n
    }

    pub fn contains_atom(&self, a: &AtomId) -> bool {
        self.atoms.contains(a)
    }

    /// Position in declaration order.
    pub fn atom_position(&self, a: &AtomId) -> Option<usize> {
        self.atoms.iter().position(|x| x == a)
    }

    /// Sorts atoms by declaration order; atoms outside the model go last.
    pub fn order_atoms(&self, set: impl IntoIterator<Item = AtomId>) -> Vec<AtomId> {
        let mut v: Vec<AtomId> = set.into_iter().collect();
        v.sort_by_key(|a| (self.atom_position(a).unwrap_or(usize::MAX), a.clone()));
        v
    }

    /// All blocks `[I]^n` in declaration-lexicographic order.
    pub fn blocks(&self) -> Vec<Block> {
        self.atoms
            .iter()
            .cloned()
            .combinations(self.n)
            .map(|c| Block::new(c).expect("atoms are distinct"))
            .collect()
    }

    pub fn block_set(&self) -> BTreeSet<Block> {
        self.blocks().into_iter().collect()
    }

    pub fn is_block(&self, b: &Block) -> bool {
        b.arity() == self.n && b.atoms().iter().all(|a| self.contains_atom(a))
    }

    /// All compatible tuples in declaration-lexicographic order: by `w`,
    /// then by `v` within each `w`.
    pub fn compatible_tuples(&self) -> Vec<CompTuple> {
        let mut out = Vec::new();
        for w in self.atoms.iter().cloned().combinations(self.n + 1) {
            for v in w.iter().cloned().combinations(self.n) {
                let v = Block::new(v).expect("atoms are distinct");
                out.push(CompTuple::new(v, w.iter().cloned()).expect("v is a subset of w"));
            }
        }
        out
    }

    /// The twist `q` at a tuple; absent keys are 0.
    pub fn twist(&self, t: &CompTuple) -> bool {
        self.twists.contains(t)
    }

    /// The set of tuples with `q = 1`.
    pub fn twisted_tuples(&self) -> &BTreeSet<CompTuple> {
        &self.twists
    }

    pub fn is_standard(&self) -> bool {
        self.twists.is_empty()
    }

    /// Checks that a group element lives in this model.
    pub fn check_group_elem(&self, g: &GroupElem) -> Result<()> {
        for b in g.support() {
            if !self.is_block(b) {
                return Err(Error::InvalidBlock {
                    block: b.to_string(),
                    reason: "support block is not an n-subset of the index set".to_string(),
                });
            }
        }
        Ok(())
    }

    pub fn check_point(&self, p: &StalkPoint) -> Result<()> {
        if !self.is_block(p.block()) {
            return Err(Error::InvalidBlock {
                block: p.block().to_string(),
                reason: "stalk block is not an n-subset of the index set".to_string(),
            });
        }
        if let StalkPoint::GStar { offset, .. } = p {
            self.check_group_elem(offset)?;
        }
        Ok(())
    }

    /// Membership of an element in this model. Because substructures are
    /// index-induced, applying this to a submodel decides membership in the
    /// corresponding carrier.
    pub fn contains_element(&self, e: &Element) -> bool {
        match e {
            Element::Atom(a) => self.contains_atom(a),
            Element::Block(b) => self.is_block(b),
            Element::Bit(_) => true,
            Element::Group(g) => self.check_group_elem(g).is_ok(),
            Element::Point(p) => self.check_point(p).is_ok(),
        }
    }

    /// The atom support of a group element of this model.
    pub fn atom_support(&self, g: &GroupElem) -> Result<BTreeSet<AtomId>> {
        self.check_group_elem(g)?;
        Ok(g.atom_support())
    }

    /// Evaluates the parity relation on `n` points of the `G*` sort and one
    /// point of the `H*` sort.
    ///
    /// True exactly when the blocks are compatible (pairwise distinct, with
    /// an `(n+1)`-atom union they all sit inside) and the offsets sum to the
    /// twist of `(y.block, union)` mod 2.
    pub fn eval_q(&self, xs: &[StalkPoint], y: &StalkPoint) -> Result<bool> {
        if xs.len() != self.n {
            return Err(Error::BadConfiguration(format!(
                "expected {} G* points, got {}",
                self.n,
                xs.len()
            )));
        }
        for x in xs {
            if !x.is_g_star() {
                return Err(Error::SortMismatch("the first n arguments must be G* points"));
            }
            self.check_point(x)?;
        }
        let StalkPoint::HStar { block: v, bit } = y else {
            return Err(Error::SortMismatch("the last argument must be an H* point"));
        };
        self.check_point(y)?;

        // Compatibility: n+1 pairwise distinct blocks whose union has n+1
        // atoms, i.e. exactly all n-subsets of that union.
        let mut blocks: Vec<&Block> = xs.iter().map(|x| x.block()).collect();
        blocks.push(v);
        let mut union: BTreeSet<AtomId> = BTreeSet::new();
        for b in &blocks {
            union.extend(b.atoms().iter().cloned());
        }
        if union.len() != self.n + 1 {
            return Ok(false);
        }
        let distinct: BTreeSet<&Block> = blocks.iter().copied().collect();
        if distinct.len() != self.n + 1 {
            return Ok(false);
        }

        let tuple = CompTuple::new(v.clone(), union)?;
        let mut parity = self.twist(&tuple);
        for x in xs {
            if let StalkPoint::GStar { offset, .. } = x {
                parity ^= offset.eval(v);
            }
        }
        parity ^= bit;
        Ok(!parity)
    }

    /// The induced submodel on a subset of the index set, together with the
    /// canonical zero-offset inclusion.
    ///
    /// The submodel keeps this model's declaration order and restricts the
    /// twist to tuples over the kept atoms. Its group elements are exactly
    /// those of this model with atom support inside the kept set.
    pub fn induced_submodel(&self, keep: &BTreeSet<AtomId>) -> Result<(Model, crate::embedding::Embedding)> {
        let sub = self.induced(keep)?;
        let inclusion = crate::embedding::Embedding::inclusion(&sub, self)?;
        Ok((sub, inclusion))
    }

    /// The induced submodel without the inclusion.
    pub fn induced(&self, keep: &BTreeSet<AtomId>) -> Result<Model> {
        if !keep.iter().all(|a| self.contains_atom(a)) {
            return Err(Error::NotSubset);
        }
        let atoms: Vec<AtomId> = self.atoms.iter().filter(|a| keep.contains(a)).cloned().collect();
        let twists = self
            .twists
            .iter()
            .filter(|t| t.w().iter().all(|a| keep.contains(a)))
            .cloned()
            .collect();
        Ok(Model {
            atoms,
            n: self.n,
            twists,
        })
    }

    /// Whether `sub` is the zero-offset induced submodel of this model.
    pub fn has_induced(&self, sub: &Model) -> bool {
        let keep: BTreeSet<AtomId> = sub.atoms.iter().cloned().collect();
        match self.induced(&keep) {
            Ok(m) => m == *sub,
            Err(_) => false,
        }
    }
}

impl fmt::Debug for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Model(n={}, I={:?}, twists={:?})",
            self.n, self.atoms, self.twists
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::atoms;

    fn block(ts: &[&str]) -> Block {
        Block::from_tokens(ts).unwrap()
    }

    fn g_point(ts: &[&str], offset: GroupElem) -> StalkPoint {
        StalkPoint::g_star(block(ts), offset)
    }

    fn h_point(ts: &[&str], bit: bool) -> StalkPoint {
        StalkPoint::h_star(block(ts), bit)
    }

    #[test]
    fn standard_model_examples() {
        let m = Model::standard_from_tokens(&["a", "b", "c"], 2).unwrap();
        assert_eq!(m.blocks().len(), 3);
        assert!(m.is_standard());

        let empty_k = Model::standard_from_tokens(&["a", "b"], 3).unwrap();
        assert!(empty_k.blocks().is_empty());
        assert!(empty_k.compatible_tuples().is_empty());

        let m4 = Model::standard_from_tokens(&["a", "b", "c", "d"], 2).unwrap();
        assert_eq!(m4.blocks().len(), 6);
        assert_eq!(m4.compatible_tuples().len(), 12);

        assert!(Model::standard_from_tokens(&["a", "a"], 2).is_err());
        assert!(Model::standard_from_tokens(&["a", "b"], 1).is_err());
    }

    #[test]
    fn compatible_tuple_counts() {
        let m = Model::standard_from_tokens(&["a", "b", "c"], 2).unwrap();
        assert_eq!(m.compatible_tuples().len(), 3);
        let m = Model::standard_from_tokens(&["a", "b", "c", "d"], 3).unwrap();
        assert_eq!(m.compatible_tuples().len(), 4);
        let m = Model::standard_from_tokens(&["a", "b"], 2).unwrap();
        assert!(m.compatible_tuples().is_empty());
    }

    #[test]
    fn eval_q_standard_examples() {
        let m = Model::standard_from_tokens(&["a", "b", "c"], 2).unwrap();
        let xs = [
            g_point(&["a", "b"], GroupElem::zero()),
            g_point(&["a", "c"], GroupElem::zero()),
        ];
        let y = h_point(&["b", "c"], false);
        assert!(m.eval_q(&xs, &y).unwrap());

        // Shifting the first point by an element hitting the H* block flips
        // the parity.
        let xs_shifted = [
            g_point(&["a", "b"], GroupElem::singleton(block(&["b", "c"]))),
            g_point(&["a", "c"], GroupElem::zero()),
        ];
        assert!(!m.eval_q(&xs_shifted, &y).unwrap());

        // Repeated blocks are incompatible.
        let xs_dup = [
            g_point(&["a", "b"], GroupElem::zero()),
            g_point(&["a", "b"], GroupElem::zero()),
        ];
        assert!(!m.eval_q(&xs_dup, &y).unwrap());

        // A point outside the model is an error, not `false`.
        let stray = [
            g_point(&["a", "d"], GroupElem::zero()),
            g_point(&["a", "c"], GroupElem::zero()),
        ];
        assert!(m.eval_q(&stray, &y).is_err());
    }

    #[test]
    fn eval_q_respects_the_twist() {
        let v = block(&["b", "c"]);
        let t = CompTuple::new(v.clone(), atoms(&["a", "b", "c"]).unwrap()).unwrap();
        let m = Model::new(
            atoms(&["a", "b", "c"]).unwrap(),
            2,
            [t].into_iter().collect(),
        )
        .unwrap();
        let xs = [
            g_point(&["a", "b"], GroupElem::zero()),
            g_point(&["a", "c"], GroupElem::zero()),
        ];
        assert!(!m.eval_q(&xs, &h_point(&["b", "c"], false)).unwrap());
        assert!(m.eval_q(&xs, &h_point(&["b", "c"], true)).unwrap());
        // The untwisted tuples still evaluate as in the standard model.
        assert!(m
            .eval_q(
                &[
                    g_point(&["a", "b"], GroupElem::zero()),
                    g_point(&["b", "c"], GroupElem::zero()),
                ],
                &h_point(&["a", "c"], false),
            )
            .unwrap());
    }

    #[test]
    fn eval_q_permutation_invariance() {
        let m = Model::standard_from_tokens(&["a", "b", "c", "d"], 3).unwrap();
        let xs = [
            g_point(&["a", "b", "c"], GroupElem::singleton(block(&["a", "b", "d"]))),
            g_point(&["a", "b", "d"], GroupElem::zero()),
            g_point(&["a", "c", "d"], GroupElem::singleton(block(&["b", "c", "d"]))),
        ];
        let y = h_point(&["b", "c", "d"], true);
        let base = m.eval_q(&xs, &y).unwrap();
        for perm in (0..3).permutations(3) {
            let permuted: Vec<StalkPoint> = perm.iter().map(|&i| xs[i].clone()).collect();
            assert_eq!(m.eval_q(&permuted, &y).unwrap(), base);
        }
    }

    #[test]
    fn torsor_action_examples() {
        let ab = block(&["a", "b"]);
        let gamma = GroupElem::singleton(ab.clone());
        let p = StalkPoint::g_star(ab.clone(), GroupElem::zero());
        let acted = p.act(&StalkAction::Group(gamma.clone())).unwrap();
        assert_eq!(acted, StalkPoint::g_star(ab.clone(), gamma.clone()));

        // diff of equal points is the identity of the action.
        let q = StalkPoint::g_star(ab.clone(), GroupElem::singleton(block(&["a", "c"])));
        assert_eq!(q.diff(&q).unwrap(), StalkAction::Group(GroupElem::zero()));

        // acting twice by the same element is the identity.
        let twice = acted.act(&StalkAction::Group(gamma)).unwrap();
        assert_eq!(twice, p);

        // act(p, diff(p, q)) = q.
        let d = p.diff(&q).unwrap();
        assert_eq!(p.act(&d).unwrap(), q);

        // Sort and block mismatches are errors.
        let h = StalkPoint::h_star(ab, false);
        assert!(h.act(&StalkAction::Group(GroupElem::zero())).is_err());
        assert!(p.diff(&StalkPoint::g_star(block(&["a", "c"]), GroupElem::zero())).is_err());
    }

    #[test]
    fn induced_submodel_examples() {
        let m = Model::standard_from_tokens(&["a", "b", "c", "d"], 2).unwrap();
        let keep: BTreeSet<AtomId> = atoms(&["a", "b", "c"]).unwrap().into_iter().collect();
        let (sub, inc) = m.induced_submodel(&keep).unwrap();
        assert_eq!(sub, Model::standard_from_tokens(&["a", "b", "c"], 2).unwrap());
        assert!(inc.is_valid());

        let all: BTreeSet<AtomId> = m.atom_set();
        assert_eq!(m.induced(&all).unwrap(), m);

        let tiny: BTreeSet<AtomId> = atoms(&["a", "b"]).unwrap().into_iter().collect();
        let small = m.induced(&tiny).unwrap();
        assert_eq!(small.compatible_tuples().len(), 0);

        let stray: BTreeSet<AtomId> = atoms(&["a", "z"]).unwrap().into_iter().collect();
        assert!(m.induced(&stray).is_err());
    }

    #[test]
    fn induced_submodel_is_functorial() {
        let v = block(&["b", "c"]);
        let t = CompTuple::new(v, atoms(&["b", "c", "d"]).unwrap()).unwrap();
        let m = Model::new(
            atoms(&["a", "b", "c", "d"]).unwrap(),
            2,
            [t].into_iter().collect(),
        )
        .unwrap();
        let keep1: BTreeSet<AtomId> = atoms(&["a", "b", "c"]).unwrap().into_iter().collect();
        let keep2: BTreeSet<AtomId> = atoms(&["b", "c"]).unwrap().into_iter().collect();
        let once = m.induced(&keep2).unwrap();
        let twice = m.induced(&keep1).unwrap().induced(&keep2).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn validate_reports_violations() {
        let ok = Model::standard_from_tokens(&["a", "b", "c"], 2).unwrap();
        assert!(ok.validate().is_empty());

        let bad_tuple = CompTuple::new(
            block(&["a", "z"]),
            atoms(&["a", "z", "q"]).unwrap(),
        )
        .unwrap();
        let m = Model::from_raw_parts(
            atoms(&["a", "b", "c"]).unwrap(),
            2,
            [bad_tuple].into_iter().collect(),
        );
        let violations = m.validate();
        assert_eq!(violations.len(), 1);
        assert!(matches!(violations[0], Violation::InvalidTupleKey { .. }));

        let dup = Model::from_raw_parts(
            vec![
                AtomId::new("a").unwrap(),
                AtomId::new("a").unwrap(),
            ],
            1,
            BTreeSet::new(),
        );
        let violations = dup.validate();
        assert!(violations.iter().any(|v| matches!(v, Violation::DuplicateAtom(_))));
        assert!(violations.iter().any(|v| matches!(v, Violation::ArityTooSmall(1))));
    }

    #[test]
    fn even_action_law() {
        // Shifting each point changes the parity by the sum of the shifts
        // evaluated at the H* block.
        let m = Model::standard_from_tokens(&["a", "b", "c", "d"], 2).unwrap();
        let v = block(&["b", "c"]);
        let xs = [
            g_point(&["a", "b"], GroupElem::zero()),
            g_point(&["a", "c"], GroupElem::singleton(block(&["c", "d"]))),
        ];
        let y = h_point(&["b", "c"], false);
        let base = m.eval_q(&xs, &y).unwrap();

        let shifts = [
            GroupElem::singleton(block(&["b", "c"])),
            GroupElem::singleton(block(&["a", "b"])).add(&GroupElem::singleton(block(&["b", "c"]))),
        ];
        let ell = true;
        let shifted: Vec<StalkPoint> = xs
            .iter()
            .zip(shifts.iter())
            .map(|(x, s)| x.act(&StalkAction::Group(s.clone())).unwrap())
            .collect();
        let y_shifted = y.act(&StalkAction::Bit(ell)).unwrap();
        let change = shifts.iter().fold(ell, |acc, s| acc ^ s.eval(&v));
        assert_eq!(
            m.eval_q(&shifted, &y_shifted).unwrap(),
            base ^ change
        );
    }
}
