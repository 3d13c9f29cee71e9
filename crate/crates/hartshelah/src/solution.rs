//! Solutions: per-stalk point choices trivializing the parity relation, the
//! GF(2) solver behind existence/extension/amalgamation, conjugation along
//! isomorphisms, and the solution ↔ isomorphism correspondence.
//!
//! A solution over a block domain `W` picks `(u, γ_u)` in each `G*` stalk
//! and `(v, ℓ_v)` in each `H*` stalk over `W` so that the parity relation
//! holds on every tuple all of whose blocks lie in `W`. The choices are
//! full group elements of the ambient model: coordinates at blocks outside
//! the current index closure are genuine variables of extension problems,
//! which is exactly what makes `k = n` amalgamation fail at finite size.

use std::collections::{BTreeMap, BTreeSet};

use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::group::GroupElem;
use crate::index::{k_subsets, AtomId, Block, CompTuple};
use crate::linsys::{LinSystem, Outcome, VarMap};
use crate::model::{Model, StalkPoint};

/// A partial trivialization over a block domain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Solution {
    model: Model,
    domain: BTreeSet<Block>,
    gamma: BTreeMap<Block, GroupElem>, // sparse: absent domain blocks carry 0
    ell: BTreeSet<Block>,              // domain blocks with ℓ = 1
}

/// A partial assignment used to pin stalk choices during a solve. Pinned
/// group values are full elements of the ambient model.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SolutionPins {
    pub gamma: BTreeMap<Block, GroupElem>,
    pub ell: BTreeMap<Block, bool>,
}

/// An inconsistency witness: covered tuples whose parity equations sum to
/// `0 = 1` under the pins.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnsatCertificate {
    pub tuples: Vec<CompTuple>,
}

/// The outcome of a solve.
#[derive(Clone, Debug)]
pub enum SolveResult {
    Solved(Solution),
    Unsat(UnsatCertificate),
}

impl SolveResult {
    pub fn is_sat(&self) -> bool {
        matches!(self, SolveResult::Solved(_))
    }

    pub fn solution(self) -> Option<Solution> {
        match self {
            SolveResult::Solved(s) => Some(s),
            SolveResult::Unsat(_) => None,
        }
    }

    pub fn certificate(self) -> Option<UnsatCertificate> {
        match self {
            SolveResult::Solved(_) => None,
            SolveResult::Unsat(c) => Some(c),
        }
    }
}

/// Variables of a solution solve, in canonical order: all γ coordinates
/// `(u, v)` first, then all ℓ bits, each sorted.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum VarKey {
    Gamma(Block, Block),
    Ell(Block),
}

impl Solution {
    pub fn new(
        model: Model,
        domain: BTreeSet<Block>,
        gamma: BTreeMap<Block, GroupElem>,
        ell: BTreeSet<Block>,
    ) -> Result<Self> {
        for b in &domain {
            if !model.is_block(b) {
                return Err(Error::InvalidBlock {
                    block: b.to_string(),
                    reason: "domain block is not a block of the model".to_string(),
                });
            }
        }
        let mut gamma_norm = BTreeMap::new();
        for (u, g) in gamma {
            if !domain.contains(&u) {
                return Err(Error::DomainMismatch(format!(
                    "γ assigns a block outside the domain: {u}"
                )));
            }
            model.check_group_elem(&g)?;
            if !g.is_zero() {
                gamma_norm.insert(u, g);
            }
        }
        for v in &ell {
            if !domain.contains(v) {
                return Err(Error::DomainMismatch(format!(
                    "ℓ assigns a block outside the domain: {v}"
                )));
            }
        }
        Ok(Solution {
            model,
            domain,
            gamma: gamma_norm,
            ell,
        })
    }

    /// The all-zero choice over a domain.
    pub fn zero(model: Model, domain: BTreeSet<Block>) -> Result<Self> {
        Solution::new(model, domain, BTreeMap::new(), BTreeSet::new())
    }

    /// The all-zero choice over the full block set.
    pub fn zero_full(model: &Model) -> Solution {
        Solution {
            domain: model.block_set(),
            model: model.clone(),
            gamma: BTreeMap::new(),
            ell: BTreeSet::new(),
        }
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn domain(&self) -> &BTreeSet<Block> {
        &self.domain
    }

    pub fn is_full(&self) -> bool {
        self.domain == self.model.block_set()
    }

    pub fn gamma_at(&self, u: &Block) -> GroupElem {
        self.gamma.get(u).cloned().unwrap_or_default()
    }

    pub fn ell_at(&self, v: &Block) -> bool {
        self.ell.contains(v)
    }

    /// The chosen `G*` point over a domain block.
    pub fn g_point(&self, u: &Block) -> StalkPoint {
        StalkPoint::g_star(u.clone(), self.gamma_at(u))
    }

    /// The chosen `H*` point over a domain block.
    pub fn h_point(&self, v: &Block) -> StalkPoint {
        StalkPoint::h_star(v.clone(), self.ell_at(v))
    }

    /// The tuples of the model all of whose blocks lie in the domain.
    pub fn covered_tuples(&self) -> Vec<CompTuple> {
        covered_tuples(&self.model, &self.domain)
    }

    /// Whether the parity relation holds on every covered tuple, i.e. for
    /// each covered `(v, w)`:
    /// `Σ_{u ∈ [w]^n \ {v}} γ_u(v) + ℓ_v ≡ q(v, w) (mod 2)`.
    pub fn is_valid(&self) -> bool {
        self.covered_tuples().iter().all(|t| {
            let mut parity = self.model.twist(t);
            for u in t.others() {
                parity ^= self.gamma_at(&u).eval(t.v());
            }
            parity ^= self.ell_at(t.v());
            !parity
        })
    }

    pub fn restrict(&self, domain: &BTreeSet<Block>) -> Result<Solution> {
        if !domain.is_subset(&self.domain) {
            return Err(Error::DomainMismatch(
                "restriction target is not a subset of the domain".to_string(),
            ));
        }
        Ok(Solution {
            model: self.model.clone(),
            domain: domain.clone(),
            gamma: self
                .gamma
                .iter()
                .filter(|(u, _)| domain.contains(*u))
                .map(|(u, g)| (u.clone(), g.clone()))
                .collect(),
            ell: self.ell.iter().filter(|v| domain.contains(*v)).cloned().collect(),
        })
    }

    /// Whether this solution extends `other`: same model, larger domain,
    /// identical stalk choices on the smaller domain.
    pub fn extends(&self, other: &Solution) -> bool {
        self.model == other.model
            && other.domain.is_subset(&self.domain)
            && other
                .domain
                .iter()
                .all(|u| self.gamma_at(u) == other.gamma_at(u) && self.ell_at(u) == other.ell_at(u))
    }

    /// Reinterprets this solution inside a larger ambient model that has
    /// this one as an induced submodel.
    pub fn in_ambient(&self, ambient: &Model) -> Result<Solution> {
        if !ambient.has_induced(&self.model) {
            return Err(Error::NotInduced {
                sub: format!("{:?}", self.model),
                sup: format!("{ambient:?}"),
            });
        }
        Solution::new(
            ambient.clone(),
            self.domain.clone(),
            self.gamma.clone(),
            self.ell.clone(),
        )
    }

    /// Pins carrying exactly this solution's choices.
    pub fn as_pins(&self) -> SolutionPins {
        SolutionPins {
            gamma: self.domain.iter().map(|u| (u.clone(), self.gamma_at(u))).collect(),
            ell: self.domain.iter().map(|v| (v.clone(), self.ell_at(v))).collect(),
        }
    }

    /// Pointwise sum with a per-block shift; the shift maps domain blocks to
    /// group elements of the model (for γ) and bits (for ℓ).
    pub fn shifted(
        &self,
        delta: &BTreeMap<Block, GroupElem>,
        eps: &BTreeSet<Block>,
    ) -> Result<Solution> {
        let mut gamma = BTreeMap::new();
        for u in &self.domain {
            let shift = delta.get(u).cloned().unwrap_or_default();
            let g = self.gamma_at(u).add(&shift);
            if !g.is_zero() {
                gamma.insert(u.clone(), g);
            }
        }
        let ell = self
            .domain
            .iter()
            .filter(|v| self.ell_at(v) ^ eps.contains(*v))
            .cloned()
            .collect();
        Solution::new(self.model.clone(), self.domain.clone(), gamma, ell)
    }
}

/// The block set `[A]^n` inside a model.
pub fn blocks_over(model: &Model, atoms: &BTreeSet<AtomId>) -> Result<BTreeSet<Block>> {
    if !atoms.iter().all(|a| model.contains_atom(a)) {
        return Err(Error::NotSubset);
    }
    let list: Vec<AtomId> = atoms.iter().cloned().collect();
    Ok(k_subsets(&list, model.arity())
        .into_iter()
        .map(|c| Block::new(c).expect("atoms are distinct"))
        .collect())
}

fn covered_tuples(model: &Model, domain: &BTreeSet<Block>) -> Vec<CompTuple> {
    model
        .compatible_tuples()
        .into_iter()
        .filter(|t| domain.contains(t.v()) && t.others().iter().all(|u| domain.contains(u)))
        .collect()
}

/// Solves for a solution over `domain` extending the pins, or returns a
/// minimal conflicting set of parity equations.
///
/// Deterministic: variables are eliminated in canonical order and free
/// variables are set to 0, so the standard model with no pins yields the
/// all-zero solution.
pub fn solve_solution(
    model: &Model,
    domain: &BTreeSet<Block>,
    pins: &SolutionPins,
) -> Result<SolveResult> {
    solve_solution_with(model, domain, pins, |_| false)
}

/// As [`solve_solution`], with a caller-supplied choice of free variables
/// (used by the seeded generators).
pub fn solve_solution_with(
    model: &Model,
    domain: &BTreeSet<Block>,
    pins: &SolutionPins,
    mut free_value: impl FnMut(usize) -> bool,
) -> Result<SolveResult> {
    for b in domain {
        if !model.is_block(b) {
            return Err(Error::InvalidBlock {
                block: b.to_string(),
                reason: "domain block is not a block of the model".to_string(),
            });
        }
    }
    for (u, g) in &pins.gamma {
        if !domain.contains(u) {
            return Err(Error::DomainMismatch(format!("pin outside the domain: {u}")));
        }
        model.check_group_elem(g)?;
    }
    for v in pins.ell.keys() {
        if !domain.contains(v) {
            return Err(Error::DomainMismatch(format!("pin outside the domain: {v}")));
        }
    }

    let covered = covered_tuples(model, domain);

    // Collect variables: one bit per unpinned γ coordinate that actually
    // occurs in a covered equation, one per unpinned ℓ.
    let mut keys: BTreeSet<VarKey> = BTreeSet::new();
    for t in &covered {
        for u in t.others() {
            if !pins.gamma.contains_key(&u) {
                keys.insert(VarKey::Gamma(u, t.v().clone()));
            }
        }
        if !pins.ell.contains_key(t.v()) {
            keys.insert(VarKey::Ell(t.v().clone()));
        }
    }
    let vars: VarMap<VarKey> = VarMap::from_keys(keys);

    let mut sys = LinSystem::new(vars.len());
    for t in &covered {
        let mut rhs = model.twist(t);
        let mut eq_vars = Vec::new();
        for u in t.others() {
            match pins.gamma.get(&u) {
                Some(g) => rhs ^= g.eval(t.v()),
                None => eq_vars.push(
                    vars.get(&VarKey::Gamma(u, t.v().clone())).expect("registered"),
                ),
            }
        }
        match pins.ell.get(t.v()) {
            Some(b) => rhs ^= b,
            None => eq_vars.push(vars.get(&VarKey::Ell(t.v().clone())).expect("registered")),
        }
        sys.add_equation(&eq_vars, rhs);
    }

    match sys.solve_with(&mut free_value) {
        Outcome::Unsat(rows) => {
            let cert = UnsatCertificate {
                tuples: rows.into_iter().map(|i| covered[i].clone()).collect(),
            };
            debug_assert!(cert.verify(model, domain, pins));
            Ok(SolveResult::Unsat(cert))
        }
        Outcome::Sat(assignment) => {
            let mut gamma: BTreeMap<Block, GroupElem> = pins
                .gamma
                .iter()
                .filter(|(_, g)| !g.is_zero())
                .map(|(u, g)| (u.clone(), g.clone()))
                .collect();
            let mut ell: BTreeSet<Block> = pins
                .ell
                .iter()
                .filter_map(|(v, &b)| b.then(|| v.clone()))
                .collect();
            for (key, idx) in vars.iter() {
                if !assignment[idx] {
                    continue;
                }
                match key {
                    VarKey::Gamma(u, v) => {
                        gamma.entry(u.clone()).or_default().flip(v.clone());
                    }
                    VarKey::Ell(v) => {
                        ell.insert(v.clone());
                    }
                }
            }
            gamma.retain(|_, g| !g.is_zero());
            let sol = Solution {
                model: model.clone(),
                domain: domain.clone(),
                gamma,
                ell,
            };
            debug_assert!(sol.is_valid());
            Ok(SolveResult::Solved(sol))
        }
    }
}

impl UnsatCertificate {
    /// Re-derives the cited parity equations and checks that they sum to
    /// the contradiction `0 = 1`.
    pub fn verify(&self, model: &Model, domain: &BTreeSet<Block>, pins: &SolutionPins) -> bool {
        // Each equation contributes its unpinned variables and its constant;
        // the sum must cancel all variables and leave constant 1.
        let mut vars: BTreeMap<VarKey, bool> = BTreeMap::new();
        let mut constant = false;
        for t in &self.tuples {
            if !domain.contains(t.v()) || !t.others().iter().all(|u| domain.contains(u)) {
                return false;
            }
            constant ^= model.twist(t);
            for u in t.others() {
                match pins.gamma.get(&u) {
                    Some(g) => constant ^= g.eval(t.v()),
                    None => {
                        let e = vars.entry(VarKey::Gamma(u, t.v().clone())).or_default();
                        *e = !*e;
                    }
                }
            }
            match pins.ell.get(t.v()) {
                Some(b) => constant ^= b,
                None => {
                    let e = vars.entry(VarKey::Ell(t.v().clone())).or_default();
                    *e = !*e;
                }
            }
        }
        vars.values().all(|v| !v) && constant
    }
}

/// Extends a valid solution to a larger domain.
pub fn extend_solution(
    model: &Model,
    solution: &Solution,
    target_domain: &BTreeSet<Block>,
) -> Result<SolveResult> {
    if solution.model() != model {
        return Err(Error::ModelMismatch("solution belongs to a different model"));
    }
    if !solution.is_valid() {
        return Err(Error::InvalidSolution(
            "cannot extend an invalid solution".to_string(),
        ));
    }
    if !solution.domain().is_subset(target_domain) {
        return Err(Error::DomainMismatch(
            "extension target must contain the current domain".to_string(),
        ));
    }
    let result = solve_solution(model, target_domain, &solution.as_pins())?;
    if let SolveResult::Solved(s) = &result {
        debug_assert!(s.extends(solution));
    }
    Ok(result)
}

/// Merges a family of solutions over `A ∪ w`, for `w` ranging over the
/// `(k-1)`-subsets of `bs` in combination order, into one solution over
/// `A ∪ bs`.
///
/// Disagreement of the family on a shared block is a precondition violation
/// and reported as an error, distinct from an UNSAT outcome of the merged
/// system.
pub fn amalgamate_solutions(
    model: &Model,
    base_atoms: &BTreeSet<AtomId>,
    bs: &[AtomId],
    family: &[Solution],
) -> Result<SolveResult> {
    let k = bs.len();
    for b in bs {
        if !model.contains_atom(b) {
            return Err(Error::UnknownAtom(b.token().to_string()));
        }
        if base_atoms.contains(b) {
            return Err(Error::BadConfiguration(format!(
                "new atom {b} already belongs to the base set"
            )));
        }
    }
    let subsets: Vec<Vec<AtomId>> = if k == 0 {
        Vec::new()
    } else {
        k_subsets(bs, k - 1)
    };
    if family.len() != subsets.len() {
        return Err(Error::BadConfiguration(format!(
            "expected {} solutions (one per (k-1)-subset), got {}",
            subsets.len(),
            family.len()
        )));
    }

    let mut pins = SolutionPins::default();
    for (w, h) in subsets.iter().zip(family.iter()) {
        if h.model() != model {
            return Err(Error::ModelMismatch("family member belongs to a different model"));
        }
        let mut atoms = base_atoms.clone();
        atoms.extend(w.iter().cloned());
        let expected = blocks_over(model, &atoms)?;
        if *h.domain() != expected {
            return Err(Error::DomainMismatch(format!(
                "family member for {w:?} must be a solution over exactly [A ∪ w]^n"
            )));
        }
        if !h.is_valid() {
            return Err(Error::InvalidSolution(
                "family member fails the parity condition".to_string(),
            ));
        }
        for u in h.domain() {
            let g = h.gamma_at(u);
            let l = h.ell_at(u);
            if let Some(prev) = pins.gamma.get(u) {
                if *prev != g || pins.ell.get(u) != Some(&l) {
                    return Err(Error::FamilyDisagreement(u.to_string()));
                }
            } else {
                pins.gamma.insert(u.clone(), g);
                pins.ell.insert(u.clone(), l);
            }
        }
    }

    let mut full_atoms = base_atoms.clone();
    full_atoms.extend(bs.iter().cloned());
    let target = blocks_over(model, &full_atoms)?;
    let result = solve_solution(model, &target, &pins)?;
    if let SolveResult::Solved(s) = &result {
        debug_assert!(family.iter().all(|h| s.extends(h)));
    }
    Ok(result)
}

/// Transports a solution along an atom-bijective embedding:
/// `γ'_{πu} = π₊(γ_u) + δ_u` and `ℓ'_{πv} = ℓ_v ⊕ ε_v`.
pub fn conjugate_solution(f: &Embedding, h: &Solution) -> Result<Solution> {
    if !f.is_bijective_on_atoms() {
        return Err(Error::NotBijective);
    }
    if h.model() != f.source() {
        return Err(Error::ModelMismatch("solution belongs to a different model"));
    }
    let mut domain = BTreeSet::new();
    let mut gamma = BTreeMap::new();
    let mut ell = BTreeSet::new();
    for u in h.domain() {
        let image = f.map_block(u)?;
        let g = f.map_group(&h.gamma_at(u))?.add(&f.delta_at(u));
        if !g.is_zero() {
            gamma.insert(image.clone(), g);
        }
        if h.ell_at(u) ^ f.eps_at(u) {
            ell.insert(image.clone());
        }
        domain.insert(image);
    }
    Solution::new(f.target().clone(), domain, gamma, ell)
}

/// The unique isomorphism extending an index bijection and conjugating one
/// full solution to another: `δ_u = γ^N_{π(u)} + π₊(γ^M_u)` and
/// `ε_v = ℓ^N_{π(v)} ⊕ ℓ^M_v`.
pub fn iso_from_solutions(
    h_m: &Solution,
    h_n: &Solution,
    atom_map: &BTreeMap<AtomId, AtomId>,
) -> Result<Embedding> {
    if !h_m.is_full() || !h_n.is_full() {
        return Err(Error::InvalidSolution(
            "the correspondence requires full solutions on both sides".to_string(),
        ));
    }
    if !h_m.is_valid() || !h_n.is_valid() {
        return Err(Error::InvalidSolution(
            "the correspondence requires valid solutions".to_string(),
        ));
    }
    let m = h_m.model();
    let n = h_n.model();
    if m.atoms().len() != n.atoms().len() {
        return Err(Error::BadConfiguration(
            "index sets must have equal size".to_string(),
        ));
    }
    let probe = crate::embedding::extend_index_map(m, n, atom_map)?;
    let mut delta = BTreeMap::new();
    let mut eps = BTreeSet::new();
    for u in m.blocks() {
        let image = probe.map_block(&u)?;
        let d = h_n.gamma_at(&image).add(&probe.map_group(&h_m.gamma_at(&u))?);
        if !d.is_zero() {
            delta.insert(u.clone(), d);
        }
        if h_m.ell_at(&u) ^ h_n.ell_at(&image) {
            eps.insert(u);
        }
    }
    let f = Embedding::new(
        m.clone(),
        n.clone(),
        atom_map.clone(),
        delta,
        eps,
    )?;
    debug_assert!(f.is_valid());
    debug_assert_eq!(&conjugate_solution(&f, h_m)?, h_n);
    Ok(f)
}

/// The result of standardizing a nested pair `M ≤ N`.
#[derive(Clone, Debug)]
pub struct StandardizedPair {
    pub m_star: Model,
    pub n_star: Model,
    /// `M ≅ M*`, identity on atoms.
    pub f_m: Embedding,
    /// `N ≅ N*`, identity on atoms, restricting to `f_m`.
    pub f_n: Embedding,
}

/// Replaces a nested pair by standard models via a solution for `M`
/// extended to `N`; the square with the two inclusions commutes.
pub fn standardize_pair(m: &Model, n: &Model) -> Result<StandardizedPair> {
    if !n.has_induced(m) {
        return Err(Error::NotInduced {
            sub: format!("{m:?}"),
            sup: format!("{n:?}"),
        });
    }
    let h_m = solve_solution(m, &m.block_set(), &SolutionPins::default())?
        .solution()
        .ok_or_else(|| Error::Internal("a finite model always has a solution".to_string()))?;
    let h_n = extend_solution(n, &h_m.in_ambient(n)?, &n.block_set())?
        .solution()
        .ok_or_else(|| {
            Error::Internal("extension of solutions cannot fail over a finite index set".to_string())
        })?;
    let m_star = Model::standard(m.atoms().to_vec(), m.arity())?;
    let n_star = Model::standard(n.atoms().to_vec(), n.arity())?;
    let identity_m: BTreeMap<AtomId, AtomId> =
        m.atoms().iter().map(|a| (a.clone(), a.clone())).collect();
    let identity_n: BTreeMap<AtomId, AtomId> =
        n.atoms().iter().map(|a| (a.clone(), a.clone())).collect();
    let f_m = iso_from_solutions(&h_m, &Solution::zero_full(&m_star), &identity_m)?;
    let f_n = iso_from_solutions(&h_n, &Solution::zero_full(&n_star), &identity_n)?;
    debug_assert_eq!(
        f_m.compose(&Embedding::inclusion(&m_star, &n_star)?)?,
        Embedding::inclusion(m, n)?.compose(&f_n)?
    );
    Ok(StandardizedPair {
        m_star,
        n_star,
        f_m,
        f_n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::atoms;

    fn block(ts: &[&str]) -> Block {
        Block::from_tokens(ts).unwrap()
    }

    fn standard(ts: &[&str], n: usize) -> Model {
        Model::standard_from_tokens(ts, n).unwrap()
    }

    fn atom_set(ts: &[&str]) -> BTreeSet<AtomId> {
        atoms(ts).unwrap().into_iter().collect()
    }

    fn twisted_abc() -> Model {
        // q = 1 exactly on the tuple (bc | abc).
        let t = CompTuple::new(block(&["b", "c"]), atoms(&["a", "b", "c"]).unwrap()).unwrap();
        Model::new(atoms(&["a", "b", "c"]).unwrap(), 2, [t].into_iter().collect()).unwrap()
    }

    /// Independent check: validity via direct evaluation of the relation on
    /// the chosen stalk points.
    fn is_valid_by_eval_q(h: &Solution) -> bool {
        h.covered_tuples().iter().all(|t| {
            let xs: Vec<StalkPoint> = t.others().iter().map(|u| h.g_point(u)).collect();
            h.model().eval_q(&xs, &h.h_point(t.v())).unwrap()
        })
    }

    #[test]
    fn zero_solution_solves_the_standard_model() {
        let m = standard(&["a", "b", "c"], 2);
        let h = Solution::zero_full(&m);
        assert!(h.is_valid());
        assert!(is_valid_by_eval_q(&h));

        let solved = solve_solution(&m, &m.block_set(), &SolutionPins::default())
            .unwrap()
            .solution()
            .unwrap();
        assert_eq!(solved, h);
    }

    #[test]
    fn check_solution_on_the_twisted_model() {
        let m = twisted_abc();
        // ℓ_{bc} = 1 absorbs the twist.
        let good = Solution::new(
            m.clone(),
            m.block_set(),
            BTreeMap::new(),
            [block(&["b", "c"])].into_iter().collect(),
        )
        .unwrap();
        assert!(good.is_valid());
        assert!(is_valid_by_eval_q(&good));

        let bad = Solution::zero_full(&m);
        assert!(!bad.is_valid());
        assert!(!is_valid_by_eval_q(&bad));
    }

    #[test]
    fn solution_construction_rejects_stray_blocks() {
        let m = standard(&["a", "b", "c"], 2);
        let mut gamma = BTreeMap::new();
        gamma.insert(block(&["a", "b"]), GroupElem::zero());
        let err = Solution::new(
            m,
            [block(&["a", "c"])].into_iter().collect(),
            gamma,
            BTreeSet::new(),
        );
        assert!(err.is_err());
    }

    #[test]
    fn greedy_oracle_agrees_with_the_solver() {
        // Independent existence oracle: ℓ ≡ 0 and, per tuple (v, w), satisfy
        // the equation with the γ coordinate of its largest non-v block;
        // each such coordinate (u, v) determines w = u ∪ v, so it appears in
        // exactly one equation and the assignment never clashes.
        let models = [
            standard(&["a", "b", "c", "d"], 2),
            twisted_abc(),
            standard(&["a", "b", "c", "d", "e"], 3),
        ];
        for m in models {
            let mut gamma: BTreeMap<Block, GroupElem> = BTreeMap::new();
            for t in m.compatible_tuples() {
                let mut parity = m.twist(&t);
                let others = t.others();
                for u in &others {
                    parity ^= gamma.get(u).map(|g| g.eval(t.v())).unwrap_or(false);
                }
                if parity {
                    let u = others.last().expect("n ≥ 2 gives n non-v blocks").clone();
                    gamma.entry(u).or_default().flip(t.v().clone());
                }
            }
            gamma.retain(|_, g| !g.is_zero());
            let greedy = Solution::new(m.clone(), m.block_set(), gamma, BTreeSet::new()).unwrap();
            assert!(greedy.is_valid(), "greedy oracle failed on {m:?}");
            assert!(is_valid_by_eval_q(&greedy));

            // The solver also succeeds.
            let solved = solve_solution(&m, &m.block_set(), &SolutionPins::default()).unwrap();
            assert!(solved.is_sat());
        }
    }

    /// The two-new-atom pinned family whose merged system is inconsistent.
    fn conflicting_pins() -> (Model, BTreeSet<Block>, SolutionPins) {
        let m = standard(&["a1", "a2", "b1", "b2"], 2);
        let domain = m.block_set();
        let mut pins = SolutionPins::default();
        for u in blocks_over(&m, &atom_set(&["a1", "a2", "b1"])).unwrap() {
            pins.gamma.insert(u.clone(), GroupElem::zero());
            pins.ell.insert(u, false);
        }
        for u in blocks_over(&m, &atom_set(&["a1", "a2", "b2"])).unwrap() {
            pins.gamma.entry(u.clone()).or_default();
            pins.ell.entry(u).or_insert(false);
        }
        // The distinguishing pin: γ_{a1b1} evaluates to 1 at b1b2.
        pins.gamma.insert(
            block(&["a1", "b1"]),
            GroupElem::singleton(block(&["b1", "b2"])),
        );
        (m, domain, pins)
    }

    #[test]
    fn pinned_conflict_is_unsat_with_verified_certificate() {
        let (m, domain, pins) = conflicting_pins();
        let result = solve_solution(&m, &domain, &pins).unwrap();
        let cert = result.certificate().expect("expected UNSAT");
        assert!(cert.verify(&m, &domain, &pins));
        // The conflict is exactly the two rows forcing ℓ_{b1b2} both ways.
        assert_eq!(cert.tuples.len(), 2);
        for t in &cert.tuples {
            assert_eq!(t.v(), &block(&["b1", "b2"]));
        }

        // Exhaustive confirmation over the free bits: no assignment of the
        // unpinned coordinates satisfies all covered equations.
        let covered = covered_tuples(&m, &domain);
        let mut keys: BTreeSet<VarKey> = BTreeSet::new();
        for t in &covered {
            for u in t.others() {
                if !pins.gamma.contains_key(&u) {
                    keys.insert(VarKey::Gamma(u, t.v().clone()));
                }
            }
            if !pins.ell.contains_key(t.v()) {
                keys.insert(VarKey::Ell(t.v().clone()));
            }
        }
        let keys: Vec<VarKey> = keys.into_iter().collect();
        assert!(keys.len() <= 16, "exhaustive check expects a small system");
        let satisfiable = (0u32..(1 << keys.len())).any(|mask| {
            let value = |key: &VarKey| -> bool {
                keys.iter().position(|k| k == key).map(|i| mask >> i & 1 == 1).unwrap()
            };
            covered.iter().all(|t| {
                let mut parity = m.twist(t);
                for u in t.others() {
                    parity ^= match pins.gamma.get(&u) {
                        Some(g) => g.eval(t.v()),
                        None => value(&VarKey::Gamma(u, t.v().clone())),
                    };
                }
                parity ^= match pins.ell.get(t.v()) {
                    Some(b) => *b,
                    None => value(&VarKey::Ell(t.v().clone())),
                };
                !parity
            })
        });
        assert!(!satisfiable);
    }

    #[test]
    fn extension_examples() {
        let m = standard(&["a", "b", "c", "d"], 2);
        let small = blocks_over(&m, &atom_set(&["a", "b", "c"])).unwrap();
        let h = Solution::zero(m.clone(), small.clone()).unwrap();

        // Zero extends to zero in the standard model.
        let full = extend_solution(&m, &h, &m.block_set()).unwrap().solution().unwrap();
        assert_eq!(full, Solution::zero_full(&m));

        // W' = W returns the same solution.
        let same = extend_solution(&m, &h, &small).unwrap().solution().unwrap();
        assert_eq!(same, h);

        // Extension in a twisted model stays an extension.
        let tm = twisted_abc();
        let base = blocks_over(&tm, &atom_set(&["a", "b"])).unwrap();
        let h0 = Solution::zero(tm.clone(), base).unwrap();
        let ext = extend_solution(&tm, &h0, &tm.block_set()).unwrap().solution().unwrap();
        assert!(ext.is_valid());
        assert!(ext.extends(&h0));
    }

    #[test]
    fn amalgamation_k1_reduces_to_extension() {
        let m = standard(&["a", "b", "c", "d"], 2);
        let base = atom_set(&["a", "b", "c"]);
        let h = Solution::zero(m.clone(), blocks_over(&m, &base).unwrap()).unwrap();
        let result = amalgamate_solutions(&m, &base, &[AtomId::new("d").unwrap()], &[h.clone()])
            .unwrap()
            .solution()
            .unwrap();
        let extended = extend_solution(&m, &h, &m.block_set()).unwrap().solution().unwrap();
        assert_eq!(result, extended);
    }

    #[test]
    fn amalgamation_unsat_family() {
        // The k = n = 2 failure: two solutions over three-atom sets whose
        // union forces ℓ_{b1b2} both ways.
        let m = standard(&["a1", "a2", "b1", "b2"], 2);
        let base = atom_set(&["a1", "a2"]);
        let mut gamma = BTreeMap::new();
        gamma.insert(
            block(&["a1", "b1"]),
            GroupElem::singleton(block(&["b1", "b2"])),
        );
        let h_b1 = Solution::new(
            m.clone(),
            blocks_over(&m, &atom_set(&["a1", "a2", "b1"])).unwrap(),
            gamma,
            BTreeSet::new(),
        )
        .unwrap();
        assert!(h_b1.is_valid());
        let h_b2 = Solution::zero(
            m.clone(),
            blocks_over(&m, &atom_set(&["a1", "a2", "b2"])).unwrap(),
        )
        .unwrap();

        let bs = [AtomId::new("b1").unwrap(), AtomId::new("b2").unwrap()];
        let result = amalgamate_solutions(&m, &base, &bs, &[h_b1.clone(), h_b2.clone()]).unwrap();
        let cert = result.certificate().expect("expected UNSAT");
        let pins = {
            let mut p = SolutionPins::default();
            for h in [&h_b1, &h_b2] {
                for u in h.domain() {
                    p.gamma.insert(u.clone(), h.gamma_at(u));
                    p.ell.insert(u.clone(), h.ell_at(u));
                }
            }
            p
        };
        assert!(cert.verify(&m, &m.block_set(), &pins));
    }

    #[test]
    fn family_disagreement_is_an_error_not_unsat() {
        let m = standard(&["a1", "a2", "b1", "b2"], 2);
        let base = atom_set(&["a1", "a2"]);
        // The two members disagree on the shared block a1a2: the first sets
        // γ_{a1a2} = {a1a2}, which no covered equation of its own domain
        // evaluates, so both members are valid.
        let mut gamma = BTreeMap::new();
        gamma.insert(block(&["a1", "a2"]), GroupElem::singleton(block(&["a1", "a2"])));
        let h_b1 = Solution::new(
            m.clone(),
            blocks_over(&m, &atom_set(&["a1", "a2", "b1"])).unwrap(),
            gamma,
            BTreeSet::new(),
        )
        .unwrap();
        assert!(h_b1.is_valid());
        let h_b2 = Solution::zero(
            m.clone(),
            blocks_over(&m, &atom_set(&["a1", "a2", "b2"])).unwrap(),
        )
        .unwrap();
        let bs = [AtomId::new("b1").unwrap(), AtomId::new("b2").unwrap()];
        let err = amalgamate_solutions(&m, &base, &bs, &[h_b1, h_b2]);
        assert!(matches!(err, Err(Error::FamilyDisagreement(_))));
    }

    #[test]
    fn conjugation_examples() {
        let m = twisted_abc();
        let h = solve_solution(&m, &m.block_set(), &SolutionPins::default())
            .unwrap()
            .solution()
            .unwrap();

        // Identity leaves the solution unchanged.
        let id = Embedding::identity(&m);
        assert_eq!(conjugate_solution(&id, &h).unwrap(), h);

        // Conjugating the zero solution by an isomorphism with offsets
        // produces exactly the (δ, ε) pattern.
        let std3 = standard(&["a", "b", "c"], 2);
        let f = iso_from_solutions(
            &Solution::zero_full(&std3),
            &h,
            &std3.atoms().iter().map(|a| (a.clone(), a.clone())).collect(),
        )
        .unwrap();
        let pushed = conjugate_solution(&f, &Solution::zero_full(&std3)).unwrap();
        for u in std3.blocks() {
            assert_eq!(pushed.gamma_at(&u), f.delta_at(&u));
            assert_eq!(pushed.ell_at(&u), f.eps_at(&u));
        }
        assert!(pushed.is_valid());
    }

    #[test]
    fn correspondence_round_trips() {
        // iso → conjugate → iso recovers the isomorphism, and
        // solutions → iso → conjugate recovers the second solution.
        let m = twisted_abc();
        let n = standard(&["x", "y", "z"], 2);
        let h_m = solve_solution(&m, &m.block_set(), &SolutionPins::default())
            .unwrap()
            .solution()
            .unwrap();
        let h_n = Solution::zero_full(&n);
        let atom_map: BTreeMap<AtomId, AtomId> = m
            .atoms()
            .iter()
            .zip(n.atoms().iter())
            .map(|(a, b)| (a.clone(), b.clone()))
            .collect();
        let f = iso_from_solutions(&h_m, &h_n, &atom_map).unwrap();
        assert!(f.is_valid());
        assert_eq!(conjugate_solution(&f, &h_m).unwrap(), h_n);

        let recovered = iso_from_solutions(&h_m, &conjugate_solution(&f, &h_m).unwrap(), &atom_map).unwrap();
        assert_eq!(recovered, f);
    }

    #[test]
    fn conjugation_of_extensions_extends_the_conjugate() {
        // Nested models, nested solutions: the conjugate of the larger
        // solution extends the conjugate of the smaller one.
        let n = standard(&["a", "b", "c", "d"], 2);
        let keep = atom_set(&["a", "b", "c"]);
        let m = n.induced(&keep).unwrap();

        let h_m_small = solve_solution(&m, &m.block_set(), &SolutionPins::default())
            .unwrap()
            .solution()
            .unwrap();
        let h_n_large = extend_solution(&n, &h_m_small.in_ambient(&n).unwrap(), &n.block_set())
            .unwrap()
            .solution()
            .unwrap();

        // One isomorphism of N extending one of M: standardize.
        let pair = standardize_pair(&m, &n).unwrap();
        let small = conjugate_solution(&pair.f_m, &h_m_small).unwrap();
        let large = conjugate_solution(&pair.f_n, &h_n_large).unwrap();
        assert!(large.extends(&small.in_ambient(pair.f_n.target()).unwrap()));
    }

    #[test]
    fn standardize_pair_examples() {
        // Already standard: the canonical solutions are zero and the maps
        // are identities.
        let n = standard(&["a", "b", "c"], 2);
        let m = n.induced(&atom_set(&["a", "b"])).unwrap();
        let pair = standardize_pair(&m, &n).unwrap();
        assert_eq!(pair.f_n, Embedding::identity(&n));
        assert_eq!(pair.f_m, Embedding::identity(&m));

        // A twisted pair standardizes with commuting isomorphisms.
        let tn = twisted_abc();
        let tm = tn.induced(&atom_set(&["a", "b"])).unwrap();
        let pair = standardize_pair(&tm, &tn).unwrap();
        assert!(pair.n_star.is_standard());
        assert!(pair.m_star.is_standard());
        assert!(pair.f_m.is_valid() && pair.f_n.is_valid());
        let left = pair
            .f_m
            .compose(&Embedding::inclusion(&pair.m_star, &pair.n_star).unwrap())
            .unwrap();
        let right = Embedding::inclusion(&tm, &tn)
            .unwrap()
            .compose(&pair.f_n)
            .unwrap();
        assert_eq!(left, right);

        // Degenerate base: an empty-index submodel.
        let empty = tn.induced(&BTreeSet::new()).unwrap();
        assert!(standardize_pair(&empty, &tn).is_ok());
    }
}
