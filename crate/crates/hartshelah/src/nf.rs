//! Model-level nonforking as disjoint amalgamation, and the witness chains
//! behind it.
//!
//! For a chain configuration `M0 ≤ M1, M2 ≤ M3` of induced submodels, the
//! relation holds exactly when `I(M1) ∩ I(M2) = I(M0)`. The witness is a
//! chain: enumerate the new atoms of `M1` over `M0` and climb one atom at a
//! time, pairing each one-point step on the first coordinate with the
//! span-generated step on the second. Each step is a uniqueness triple
//! (a one-point index extension with a basic step type) whose type over the
//! second coordinate does not fork.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::forking::{nonforking_decide, ForkingQuery, NonforkCase};
use crate::index::AtomId;
use crate::model::{Element, Model};
use crate::types::{is_basic_type, TypeInstance};

/// A witness chain: two parallel towers of induced submodels and the atoms
/// added at each step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NfChain {
    /// The atoms `d_i`, in the base model's declaration order.
    pub d: Vec<AtomId>,
    /// `N_{1,i}` for `i = 0..=α*`: from `M0` up to `M1`.
    pub first: Vec<Model>,
    /// `N_{2,i}` for `i = 0..=α*`: from `M2` up to the span of `M1 ∪ M2`.
    pub second: Vec<Model>,
}

impl NfChain {
    pub fn steps(&self) -> usize {
        self.d.len()
    }

    /// Checks every chain condition against the configuration: endpoints,
    /// nesting, freshness of each `d_i`, the uniqueness-triple shape of
    /// each first-coordinate step, and nonforking of each step type over
    /// the first coordinate.
    pub fn validate(&self, m0: &Model, m1: &Model, m2: &Model, m3: &Model) -> Result<()> {
        let steps = self.d.len();
        if self.first.len() != steps + 1 || self.second.len() != steps + 1 {
            return Err(Error::BadConfiguration(
                "chain towers must have one more level than steps".to_string(),
            ));
        }
        if &self.first[0] != m0 {
            return Err(Error::BadConfiguration("first tower must start at M0".to_string()));
        }
        if &self.first[steps] != m1 {
            return Err(Error::BadConfiguration("first tower must end at M1".to_string()));
        }
        if &self.second[0] != m2 {
            return Err(Error::BadConfiguration("second tower must start at M2".to_string()));
        }
        let span: BTreeSet<AtomId> = m2.atom_set().union(&m1.atom_set()).cloned().collect();
        if self.second[steps] != m3.induced(&span)? {
            return Err(Error::BadConfiguration(
                "second tower must end at the span of M1 and M2 inside M3".to_string(),
            ));
        }
        for i in 0..=steps {
            if !self.second[i].has_induced(&self.first[i]) {
                return Err(Error::BadChain(format!(
                    "level {i}: the first tower must sit inside the second"
                )));
            }
            if !m3.has_induced(&self.second[i]) {
                return Err(Error::BadChain(format!(
                    "level {i}: the second tower must sit inside M3"
                )));
            }
        }
        for (i, d) in self.d.iter().enumerate() {
            let mut expected = self.first[i].atom_set();
            expected.insert(d.clone());
            if self.first[i + 1].atom_set() != expected {
                return Err(Error::BadChain(format!(
                    "step {i}: the first tower must grow by exactly {d}"
                )));
            }
            // The step is a uniqueness triple in shape: a one-point index
            // extension whose step type is basic.
            let step_type = TypeInstance::new(
                self.first[i].clone(),
                self.first[i + 1].clone(),
                vec![Element::Atom(d.clone())],
            )?;
            if !is_basic_type(&step_type) {
                return Err(Error::BadChain(format!(
                    "step {i}: the added atom must realize a basic type"
                )));
            }
            // And the type over the second tower does not fork over the
            // first.
            let verdict = nonforking_decide(&ForkingQuery {
                m0: self.first[i].clone(),
                m: self.second[i].clone(),
                n: self.second[i + 1].clone(),
                element: Element::Atom(d.clone()),
            })?;
            if !verdict.nonforking || verdict.case != NonforkCase::Case1 {
                return Err(Error::BadChain(format!(
                    "step {i}: the step type must not fork over the first tower"
                )));
            }
        }
        Ok(())
    }
}

fn validate_configuration(m0: &Model, m1: &Model, m2: &Model, m3: &Model) -> Result<()> {
    if !m1.has_induced(m0) || !m2.has_induced(m0) {
        return Err(Error::BadChain(
            "M0 must be a zero-offset induced submodel of M1 and M2".to_string(),
        ));
    }
    if !m3.has_induced(m1) || !m3.has_induced(m2) {
        return Err(Error::BadChain(
            "M1 and M2 must be zero-offset induced submodels of M3".to_string(),
        ));
    }
    Ok(())
}

/// Decides the model-level nonforking relation: true exactly when the two
/// sides intersect in the base, `I(M1) ∩ I(M2) = I(M0)`.
pub fn nf_decide(m0: &Model, m1: &Model, m2: &Model, m3: &Model) -> Result<bool> {
    validate_configuration(m0, m1, m2, m3)?;
    let meet: BTreeSet<AtomId> = m1
        .atom_set()
        .intersection(&m2.atom_set())
        .cloned()
        .collect();
    Ok(meet == m0.atom_set())
}

/// Builds and validates the witness chain for a configuration on which
/// [`nf_decide`] holds.
pub fn build_nf_witness(m0: &Model, m1: &Model, m2: &Model, m3: &Model) -> Result<NfChain> {
    if !nf_decide(m0, m1, m2, m3)? {
        return Err(Error::BadConfiguration(
            "the sides do not intersect in the base; no witness chain exists".to_string(),
        ));
    }
    let d: Vec<AtomId> = m1
        .atoms()
        .iter()
        .filter(|a| !m0.contains_atom(a))
        .cloned()
        .collect();
    let mut first = Vec::with_capacity(d.len() + 1);
    let mut second = Vec::with_capacity(d.len() + 1);
    for i in 0..=d.len() {
        let mut first_atoms = m0.atom_set();
        first_atoms.extend(d.iter().take(i).cloned());
        first.push(m1.induced(&first_atoms)?);
        let mut second_atoms = m2.atom_set();
        second_atoms.extend(d.iter().take(i).cloned());
        second.push(m3.induced(&second_atoms)?);
    }
    let chain = NfChain { d, first, second };
    chain.validate(m0, m1, m2, m3)?;
    Ok(chain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amalgam::disjoint_amalgam;
    use crate::index::atoms;

    fn standard(ts: &[&str], n: usize) -> Model {
        Model::standard_from_tokens(ts, n).unwrap()
    }

    fn atom_set(ts: &[&str]) -> BTreeSet<AtomId> {
        atoms(ts).unwrap().into_iter().collect()
    }

    #[test]
    fn nf_decide_examples() {
        let m3 = standard(&["a", "b", "c", "d"], 2);
        let m0 = m3.induced(&atom_set(&["a"])).unwrap();
        let m2 = m3.induced(&atom_set(&["a", "d"])).unwrap();

        // M1 = M0: the intersection is M0.
        assert!(nf_decide(&m0, &m0, &m2, &m3).unwrap());

        // Disjoint new atoms on both sides.
        let m1 = m3.induced(&atom_set(&["a", "b", "c"])).unwrap();
        assert!(nf_decide(&m0, &m1, &m2, &m3).unwrap());

        // Overlapping sides fail.
        let m2_overlap = m3.induced(&atom_set(&["a", "b", "d"])).unwrap();
        assert!(!nf_decide(&m0, &m1, &m2_overlap, &m3).unwrap());

        // Non-chain input is an error.
        let stray = standard(&["a", "z"], 2);
        assert!(nf_decide(&m0, &stray, &m2, &m3).is_err());
    }

    #[test]
    fn witness_chain_examples() {
        let m3 = standard(&["a", "b", "c", "d"], 2);
        let m0 = m3.induced(&atom_set(&["a"])).unwrap();
        let m1 = m3.induced(&atom_set(&["a", "b", "c"])).unwrap();
        let m2 = m3.induced(&atom_set(&["a", "d"])).unwrap();

        // Two new atoms yield a two-step chain.
        let chain = build_nf_witness(&m0, &m1, &m2, &m3).unwrap();
        assert_eq!(chain.steps(), 2);
        assert!(chain.validate(&m0, &m1, &m2, &m3).is_ok());

        // Degenerate: M1 = M0 gives the empty chain.
        let chain = build_nf_witness(&m0, &m0, &m2, &m3).unwrap();
        assert_eq!(chain.steps(), 0);

        // Degenerate second side: M2 = M0 makes the towers coincide.
        let chain = build_nf_witness(&m0, &m1, &m0, &m1).unwrap();
        assert_eq!(chain.first, chain.second);

        // The false side refuses to build.
        let m2_overlap = m3.induced(&atom_set(&["a", "b", "d"])).unwrap();
        assert!(build_nf_witness(&m0, &m1, &m2_overlap, &m3).is_err());
    }

    #[test]
    fn disjoint_amalgam_output_satisfies_nf() {
        // Twisted sides as well: the amalgam's embeddings are inclusions
        // after renaming, so the configuration is a chain.
        let m0 = standard(&["a", "b"], 2);
        let t = crate::index::CompTuple::new(
            crate::index::Block::from_tokens(&["b", "c"]).unwrap(),
            atoms(&["a", "b", "c"]).unwrap(),
        )
        .unwrap();
        let m1 = Model::new(
            atoms(&["a", "b", "c"]).unwrap(),
            2,
            [t].into_iter().collect(),
        )
        .unwrap();
        let m2 = standard(&["a", "b", "c"], 2); // c collides, gets renamed
        let am = disjoint_amalgam(&m0, &m1, &m2).unwrap();
        let renamed_right = am.result.induced(&{
            let mut s = m0.atom_set();
            s.insert(AtomId::new("c'").unwrap());
            s
        })
        .unwrap();
        assert!(nf_decide(&m0, &m1, &renamed_right, &am.result).unwrap());
        let chain = build_nf_witness(&m0, &m1, &renamed_right, &am.result).unwrap();
        assert_eq!(chain.steps(), 1);
    }
}
