//! Embeddings between models.
//!
//! An embedding is determined by an injective atom map `π`, one group offset
//! `δ_u` per source block, and one bit `ε_v` per source block: the atom map
//! forces the block, group, and `Z_2` sorts (the definable closure of the
//! index sort), and per-stalk transitivity forces the affine sorts from one
//! offset each. Validity is the parity-preservation identity
//! `q_target(πv, πw) = q_source(v, w) + Σ_u δ_u(πv) + ε_v` over all source
//! tuples.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::group::GroupElem;
use crate::index::{AtomId, Block};
use crate::model::{Element, Model, StalkPoint};

/// A structure map between two models.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Embedding {
    source: Model,
    target: Model,
    atom_map: BTreeMap<AtomId, AtomId>,
    delta: BTreeMap<Block, GroupElem>, // sparse: absent blocks carry 0
    eps: BTreeSet<Block>,              // blocks with ε = 1
}

impl Embedding {
    /// Builds an embedding after structural checks: the atom map is a total
    /// injection on the source index set into the target's, and the offset
    /// data lives on source blocks with values in the target. Parity
    /// preservation is checked separately by [`Embedding::is_valid`].
    pub fn new(
        source: Model,
        target: Model,
        atom_map: BTreeMap<AtomId, AtomId>,
        delta: BTreeMap<Block, GroupElem>,
        eps: BTreeSet<Block>,
    ) -> Result<Self> {
        if atom_map.len() != source.atoms().len()
            || !source.atoms().iter().all(|a| atom_map.contains_key(a))
        {
            return Err(Error::InvalidEmbedding(
                "atom map must be defined on exactly the source index set".to_string(),
            ));
        }
        let mut images = BTreeSet::new();
        for (a, b) in &atom_map {
            if !source.contains_atom(a) {
                return Err(Error::UnknownAtom(a.token().to_string()));
            }
            if !target.contains_atom(b) {
                return Err(Error::UnknownAtom(b.token().to_string()));
            }
            if !images.insert(b.clone()) {
                return Err(Error::NotInjective);
            }
        }
        let mut delta_norm = BTreeMap::new();
        for (u, g) in delta {
            if !source.is_block(&u) {
                return Err(Error::InvalidBlock {
                    block: u.to_string(),
                    reason: "offset key is not a source block".to_string(),
                });
            }
            target.check_group_elem(&g)?;
            if !g.is_zero() {
                delta_norm.insert(u, g);
            }
        }
        for v in &eps {
            if !source.is_block(v) {
                return Err(Error::InvalidBlock {
                    block: v.to_string(),
                    reason: "epsilon key is not a source block".to_string(),
                });
            }
        }
        Ok(Embedding {
            source,
            target,
            atom_map,
            delta: delta_norm,
            eps,
        })
    }

    pub fn identity(m: &Model) -> Embedding {
        Embedding {
            source: m.clone(),
            target: m.clone(),
            atom_map: m.atoms().iter().map(|a| (a.clone(), a.clone())).collect(),
            delta: BTreeMap::new(),
            eps: BTreeSet::new(),
        }
    }

    /// The zero-offset inclusion of an induced submodel.
    pub fn inclusion(sub: &Model, sup: &Model) -> Result<Embedding> {
        if !sup.has_induced(sub) {
            return Err(Error::NotInduced {
                sub: format!("{sub:?}"),
                sup: format!("{sup:?}"),
            });
        }
        Ok(Embedding {
            source: sub.clone(),
            target: sup.clone(),
            atom_map: sub.atoms().iter().map(|a| (a.clone(), a.clone())).collect(),
            delta: BTreeMap::new(),
            eps: BTreeSet::new(),
        })
    }

    pub fn source(&self) -> &Model {
        &self.source
    }

    pub fn target(&self) -> &Model {
        &self.target
    }

    pub fn atom_map(&self) -> &BTreeMap<AtomId, AtomId> {
        &self.atom_map
    }

    pub fn delta(&self) -> &BTreeMap<Block, GroupElem> {
        &self.delta
    }

    pub fn eps(&self) -> &BTreeSet<Block> {
        &self.eps
    }

    pub fn delta_at(&self, u: &Block) -> GroupElem {
        self.delta.get(u).cloned().unwrap_or_default()
    }

    pub fn eps_at(&self, v: &Block) -> bool {
        self.eps.contains(v)
    }

    pub fn map_atom(&self, a: &AtomId) -> Result<AtomId> {
        self.atom_map
            .get(a)
            .cloned()
            .ok_or_else(|| Error::UnknownAtom(a.token().to_string()))
    }

    pub fn map_block(&self, u: &Block) -> Result<Block> {
        Block::new(
            u.atoms()
                .iter()
                .map(|a| self.map_atom(a))
                .collect::<Result<Vec<_>>>()?,
        )
    }

    /// Push-forward on the group sort: supports map blockwise.
    pub fn map_group(&self, g: &GroupElem) -> Result<GroupElem> {
        Ok(GroupElem::from_blocks(
            g.support()
                .iter()
                .map(|b| self.map_block(b))
                .collect::<Result<Vec<_>>>()?,
        ))
    }

    pub fn map_point(&self, p: &StalkPoint) -> Result<StalkPoint> {
        match p {
            StalkPoint::GStar { block, offset } => Ok(StalkPoint::GStar {
                block: self.map_block(block)?,
                offset: self.map_group(offset)?.add(&self.delta_at(block)),
            }),
            StalkPoint::HStar { block, bit } => Ok(StalkPoint::HStar {
                block: self.map_block(block)?,
                bit: bit ^ self.eps_at(block),
            }),
        }
    }

    pub fn map_element(&self, e: &Element) -> Result<Element> {
        Ok(match e {
            Element::Atom(a) => Element::Atom(self.map_atom(a)?),
            Element::Block(b) => Element::Block(self.map_block(b)?),
            Element::Bit(b) => Element::Bit(*b),
            Element::Group(g) => Element::Group(self.map_group(g)?),
            Element::Point(p) => Element::Point(self.map_point(p)?),
        })
    }

    /// Whether the parity-preservation identity holds on every source tuple.
    /// The atom map is injective by construction, so this decides whether
    /// the triple is a genuine embedding.
    pub fn is_valid(&self) -> bool {
        self.source.compatible_tuples().iter().all(|t| {
            let image_v = self.map_block(t.v()).expect("source block maps");
            let image_w: Vec<AtomId> = t
                .w()
                .iter()
                .map(|a| self.map_atom(a).expect("source atom maps"))
                .collect();
            let image_tuple = crate::index::CompTuple::new(image_v.clone(), image_w)
                .expect("injective image of a tuple");
            let mut parity = self.source.twist(t) ^ self.target.twist(&image_tuple);
            for u in t.others() {
                parity ^= self.delta_at(&u).eval(&image_v);
            }
            parity ^= self.eps_at(t.v());
            !parity
        })
    }

    pub fn is_bijective_on_atoms(&self) -> bool {
        self.atom_map.len() == self.target.atoms().len()
    }

    /// Composition `g ∘ self` (first `self`, then `g`).
    pub fn compose(&self, g: &Embedding) -> Result<Embedding> {
        if self.target != g.source {
            return Err(Error::ModelMismatch(
                "composition requires the first target to equal the second source",
            ));
        }
        let atom_map = self
            .atom_map
            .iter()
            .map(|(a, b)| Ok((a.clone(), g.map_atom(b)?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        let mut delta = BTreeMap::new();
        let mut eps = BTreeSet::new();
        for u in self.source.blocks() {
            let image = self.map_block(&u)?;
            let d = g.map_group(&self.delta_at(&u))?.add(&g.delta_at(&image));
            if !d.is_zero() {
                delta.insert(u.clone(), d);
            }
            if self.eps_at(&u) ^ g.eps_at(&image) {
                eps.insert(u);
            }
        }
        Embedding::new(self.source.clone(), g.target.clone(), atom_map, delta, eps)
    }

    /// The inverse of an atom-bijective embedding.
    pub fn invert(&self) -> Result<Embedding> {
        if !self.is_bijective_on_atoms() {
            return Err(Error::NotBijective);
        }
        let atom_map: BTreeMap<AtomId, AtomId> = self
            .atom_map
            .iter()
            .map(|(a, b)| (b.clone(), a.clone()))
            .collect();
        let inverse_block = |u: &Block| -> Result<Block> {
            Block::new(
                u.atoms()
                    .iter()
                    .map(|a| {
                        atom_map
                            .get(a)
                            .cloned()
                            .ok_or_else(|| Error::UnknownAtom(a.token().to_string()))
                    })
                    .collect::<Result<Vec<_>>>()?,
            )
        };
        let mut delta = BTreeMap::new();
        let mut eps = BTreeSet::new();
        for u_target in self.target.blocks() {
            let u_source = inverse_block(&u_target)?;
            let d = self.delta_at(&u_source);
            let pulled = GroupElem::from_blocks(
                d.support()
                    .iter()
                    .map(|b| inverse_block(b))
                    .collect::<Result<Vec<_>>>()?,
            );
            if !pulled.is_zero() {
                delta.insert(u_target.clone(), pulled);
            }
            if self.eps_at(&u_source) {
                eps.insert(u_target);
            }
        }
        Embedding::new(self.target.clone(), self.source.clone(), atom_map, delta, eps)
    }

    /// Whether this embedding fixes the given induced submodel pointwise:
    /// identity on its atoms and zero offsets on its blocks.
    pub fn fixes_pointwise(&self, m: &Model) -> bool {
        m.atoms().iter().all(|a| self.atom_map.get(a) == Some(a))
            && m.blocks()
                .iter()
                .all(|u| self.delta_at(u).is_zero() && !self.eps_at(u))
    }
}

/// The unique extension of an injective index map to the block, group, and
/// `Z_2` sorts. Images of affine stalk points are not determined by the
/// index map and are not provided.
#[derive(Clone, Debug)]
pub struct IndexMapExtension {
    source: Model,
    target: Model,
    pi: BTreeMap<AtomId, AtomId>,
}

/// Computes the forced part of any embedding extending `pi`.
pub fn extend_index_map(
    source: &Model,
    target: &Model,
    pi: &BTreeMap<AtomId, AtomId>,
) -> Result<IndexMapExtension> {
    let mut images = BTreeSet::new();
    for (a, b) in pi {
        if !source.contains_atom(a) {
            return Err(Error::UnknownAtom(a.token().to_string()));
        }
        if !target.contains_atom(b) {
            return Err(Error::UnknownAtom(b.token().to_string()));
        }
        if !images.insert(b.clone()) {
            return Err(Error::NotInjective);
        }
    }
    if pi.len() != source.atoms().len() {
        return Err(Error::InvalidEmbedding(
            "index map must be defined on the whole source index set".to_string(),
        ));
    }
    Ok(IndexMapExtension {
        source: source.clone(),
        target: target.clone(),
        pi: pi.clone(),
    })
}

impl IndexMapExtension {
    pub fn map_atom(&self, a: &AtomId) -> Result<AtomId> {
        self.pi
            .get(a)
            .cloned()
            .ok_or_else(|| Error::UnknownAtom(a.token().to_string()))
    }

    pub fn map_block(&self, u: &Block) -> Result<Block> {
        Block::new(
            u.atoms()
                .iter()
                .map(|a| self.map_atom(a))
                .collect::<Result<Vec<_>>>()?,
        )
    }

    pub fn map_group(&self, g: &GroupElem) -> Result<GroupElem> {
        Ok(GroupElem::from_blocks(
            g.support()
                .iter()
                .map(|b| self.map_block(b))
                .collect::<Result<Vec<_>>>()?,
        ))
    }

    /// The forced image of an element, or `None` for affine stalk points.
    pub fn map_element(&self, e: &Element) -> Result<Option<Element>> {
        Ok(match e {
            Element::Atom(a) => Some(Element::Atom(self.map_atom(a)?)),
            Element::Block(b) => Some(Element::Block(self.map_block(b)?)),
            Element::Bit(b) => Some(Element::Bit(*b)),
            Element::Group(g) => Some(Element::Group(self.map_group(g)?)),
            Element::Point(_) => None,
        })
    }

    pub fn source(&self) -> &Model {
        &self.source
    }

    pub fn target(&self) -> &Model {
        &self.target
    }
}
