//! Elements of the group `G = ⊕_{u ∈ K} Z_2`.
//!
//! An element is the finite set of blocks it maps to 1; addition is
//! symmetric difference and evaluation is membership.

use std::collections::BTreeSet;
use std::fmt;

use crate::index::{AtomId, Block};

/// A finitely supported map from blocks to `Z_2`, stored as its support.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupElem(BTreeSet<Block>);

impl GroupElem {
    pub fn zero() -> Self {
        GroupElem(BTreeSet::new())
    }

    /// Builds an element from an iterator of blocks; repeated blocks cancel.
    pub fn from_blocks(blocks: impl IntoIterator<Item = Block>) -> Self {
        let mut support = BTreeSet::new();
        for b in blocks {
            if !support.remove(&b) {
                support.insert(b);
            }
        }
        GroupElem(support)
    }

    pub fn singleton(block: Block) -> Self {
        let mut s = BTreeSet::new();
        s.insert(block);
        GroupElem(s)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    /// The evaluation `γ(k)`.
    pub fn eval(&self, block: &Block) -> bool {
        self.0.contains(block)
    }

    pub fn support(&self) -> &BTreeSet<Block> {
        &self.0
    }

    /// Symmetric difference of supports.
    pub fn add(&self, other: &GroupElem) -> GroupElem {
        GroupElem(self.0.symmetric_difference(&other.0).cloned().collect())
    }

    /// Toggles a single coordinate.
    pub fn flip(&mut self, block: Block) {
        if !self.0.remove(&block) {
            self.0.insert(block);
        }
    }

    /// The union of all blocks in the support.
    pub fn atom_support(&self) -> BTreeSet<AtomId> {
        self.0.iter().flat_map(|b| b.atoms().iter().cloned()).collect()
    }
}

impl fmt::Debug for GroupElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, b) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{b}")?;
        }
        write!(f, "}}")
    }
}
