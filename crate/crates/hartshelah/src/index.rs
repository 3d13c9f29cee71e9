//! Index-sort primitives: atoms, blocks, and compatible tuples.
//!
//! A block is an `n`-element subset of the index set and a compatible tuple
//! is a pair `(v, w)` where `w` has `n + 1` atoms and `v` is one of its
//! `n`-subsets. The `n + 1` blocks inside `w` are exactly the places where
//! the parity relation can hold.

use std::collections::BTreeSet;
use std::fmt;

use itertools::Itertools;

use crate::error::{Error, Result};

/// Characters that would break the line-oriented text formats.
const FORBIDDEN_CHARS: &[char] = &['{', '}', ',', '|', '#', '='];

/// An atom of the index sort, identified by its token.
///
/// Tokens are free-form identifiers minus the characters used by the file
/// formats. The global `Ord` is lexicographic by token; enumeration order
/// inside a model follows the model's declaration order instead.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AtomId(String);

impl AtomId {
    pub fn new(token: impl Into<String>) -> Result<Self> {
        let token = token.into();
        if token.is_empty() {
            return Err(Error::BadToken {
                token,
                reason: "empty",
            });
        }
        if token.chars().any(|c| c.is_whitespace()) {
            return Err(Error::BadToken {
                token,
                reason: "contains whitespace",
            });
        }
        if token.chars().any(|c| FORBIDDEN_CHARS.contains(&c)) {
            return Err(Error::BadToken {
                token,
                reason: "contains a reserved character ({},|#=)",
            });
        }
        if token.contains("->") {
            return Err(Error::BadToken {
                token,
                reason: "contains the arrow sequence ->",
            });
        }
        Ok(AtomId(token))
    }

    pub fn token(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for AtomId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for AtomId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Parses a list of atoms, requiring pairwise distinct tokens.
pub fn atoms(tokens: &[&str]) -> Result<Vec<AtomId>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(tokens.len());
    for t in tokens {
        let a = AtomId::new(*t)?;
        if !seen.insert(a.clone()) {
            return Err(Error::DuplicateAtom(t.to_string()));
        }
        out.push(a);
    }
    Ok(out)
}

/// Picks a token equal to `base` or `base` plus enough primes to avoid `used`.
pub fn fresh_token(base: &str, used: &BTreeSet<AtomId>) -> AtomId {
    let mut candidate = base.to_string();
    loop {
        let atom = AtomId::new(candidate.clone()).unwrap_or_else(|_| {
            // Fall back to a safe stem if the base itself is malformed.
            AtomId::new(format!("x{}", used.len())).expect("generated token is valid")
        });
        if !used.contains(&atom) {
            return atom;
        }
        candidate.push('\'');
    }
}

/// A block: a set of atoms, stored sorted by token.
///
/// Arity against a particular model (exactly `n` atoms drawn from its index
/// set) is checked where blocks meet a model.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Block(Vec<AtomId>);

impl Block {
    pub fn new(atoms: impl IntoIterator<Item = AtomId>) -> Result<Self> {
        let mut v: Vec<AtomId> = atoms.into_iter().collect();
        v.sort();
        for pair in v.windows(2) {
            if pair[0] == pair[1] {
                return Err(Error::DuplicateAtom(pair[0].token().to_string()));
            }
        }
        if v.is_empty() {
            return Err(Error::InvalidBlock {
                block: "{}".to_string(),
                reason: "a block must contain at least one atom".to_string(),
            });
        }
        Ok(Block(v))
    }

    /// Convenience constructor from string tokens.
    pub fn from_tokens(tokens: &[&str]) -> Result<Self> {
        Block::new(tokens.iter().map(|t| AtomId::new(*t)).collect::<Result<Vec<_>>>()?)
    }

    pub fn arity(&self) -> usize {
        self.0.len()
    }

    pub fn atoms(&self) -> &[AtomId] {
        &self.0
    }

    pub fn contains(&self, a: &AtomId) -> bool {
        self.0.binary_search(a).is_ok()
    }

    pub fn atom_set(&self) -> BTreeSet<AtomId> {
        self.0.iter().cloned().collect()
    }

    pub fn is_subset_of(&self, atoms: &BTreeSet<AtomId>) -> bool {
        self.0.iter().all(|a| atoms.contains(a))
    }

    pub fn union(&self, other: &Block) -> BTreeSet<AtomId> {
        self.0.iter().chain(other.0.iter()).cloned().collect()
    }
}

impl fmt::Debug for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, "}}")
    }
}

/// A compatible tuple `(v, w)`: `w` is an `(n + 1)`-set of atoms and `v` one
/// of its `n`-subsets. The remaining `n` blocks of `w` are recovered with
/// [`CompTuple::others`].
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CompTuple {
    v: Block,
    w: Vec<AtomId>, // sorted by token, |w| = |v| + 1, v ⊂ w
}

impl CompTuple {
    pub fn new(v: Block, w: impl IntoIterator<Item = AtomId>) -> Result<Self> {
        let mut w: Vec<AtomId> = w.into_iter().collect();
        w.sort();
        w.dedup();
        if w.len() != v.arity() + 1 {
            return Err(Error::InvalidTuple {
                tuple: format!("({v}, {w:?})"),
                reason: "w must have exactly one atom more than v".to_string(),
            });
        }
        if !v.atoms().iter().all(|a| w.binary_search(a).is_ok()) {
            return Err(Error::InvalidTuple {
                tuple: format!("({v}, {w:?})"),
                reason: "v must be a subset of w".to_string(),
            });
        }
        Ok(CompTuple { v, w })
    }

    pub fn v(&self) -> &Block {
        &self.v
    }

    pub fn w(&self) -> &[AtomId] {
        &self.w
    }

    pub fn w_set(&self) -> BTreeSet<AtomId> {
        self.w.iter().cloned().collect()
    }

    /// The blocks `[w]^n \ {v}`, i.e. `w` minus each atom of `v`.
    pub fn others(&self) -> Vec<Block> {
        self.w
            .iter()
            .filter_map(|drop| {
                let block =
                    Block::new(self.w.iter().filter(|a| *a != drop).cloned()).expect("valid block");
                if block == self.v {
                    None
                } else {
                    Some(block)
                }
            })
            .collect()
    }
}

impl fmt::Debug for CompTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} | ", self.v)?;
        for (i, a) in self.w.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// All `k`-subsets of `items`, in the lexicographic order induced by the
/// slice order.
pub fn k_subsets<T: Clone>(items: &[T], k: usize) -> Vec<Vec<T>> {
    if k > items.len() {
        return Vec::new();
    }
    items.iter().cloned().combinations(k).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn token_rules() {
        assert!(AtomId::new("a").is_ok());
        assert!(AtomId::new("x_1'").is_ok());
        assert!(AtomId::new("").is_err());
        assert!(AtomId::new("a b").is_err());
        assert!(AtomId::new("a,b").is_err());
        assert!(AtomId::new("{a}").is_err());
        assert!(AtomId::new("a|b").is_err());
        assert!(AtomId::new("a->b").is_err());
    }

    #[test]
    fn block_dedups_and_sorts() {
        let b = Block::from_tokens(&["c", "a"]).unwrap();
        assert_eq!(b.atoms()[0].token(), "a");
        assert!(Block::from_tokens(&["a", "a"]).is_err());
    }

    #[test]
    fn comp_tuple_requires_subset() {
        let v = Block::from_tokens(&["a", "b"]).unwrap();
        let w = atoms(&["a", "b", "c"]).unwrap();
        let t = CompTuple::new(v.clone(), w).unwrap();
        let others = t.others();
        assert_eq!(others.len(), 2);
        assert!(!others.contains(&v));

        let bad_w = atoms(&["a", "c", "d"]).unwrap();
        assert!(CompTuple::new(v, bad_w).is_err());
    }

    #[test]
    fn fresh_token_appends_primes() {
        let used: BTreeSet<AtomId> = atoms(&["p", "p'"]).unwrap().into_iter().collect();
        assert_eq!(fresh_token("p", &used).token(), "p''");
        assert_eq!(fresh_token("q", &used).token(), "q");
    }
}
