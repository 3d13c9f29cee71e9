//! Seeded, reproducible instance generation.
//!
//! One counter-based generator family (ChaCha8) drives every randomized
//! suite and test: a `(seed, stream)` pair fully determines the draw
//! sequence on every platform, and suites report the seed they ran with.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::embedding::Embedding;
use crate::error::Result;
use crate::group::GroupElem;
use crate::index::{fresh_token, AtomId, Block, CompTuple};
use crate::model::Model;
use crate::solution::{solve_solution_with, Solution, SolutionPins, SolveResult};

/// The generator for a seed and stream index; deterministic across
/// platforms.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Atoms named `a1..ak`.
pub fn default_atoms(count: usize) -> Vec<AtomId> {
    (1..=count)
        .map(|i| AtomId::new(format!("a{i}")).expect("generated token is valid"))
        .collect()
}

/// A random model: each compatible tuple is twisted independently with the
/// given density. Deterministic for a fixed seed.
pub fn gen_random_model(n: usize, atom_count: usize, density: f64, seed: u64) -> Result<Model> {
    random_model_with(&mut rng_for(seed, 0), n, atom_count, density)
}

/// As [`gen_random_model`], drawing from a caller-provided generator.
pub fn random_model_with(
    rng: &mut ChaCha8Rng,
    n: usize,
    atom_count: usize,
    density: f64,
) -> Result<Model> {
    let atoms = default_atoms(atom_count);
    let probe = Model::standard(atoms.clone(), n)?;
    let twists: BTreeSet<CompTuple> = probe
        .compatible_tuples()
        .into_iter()
        .filter(|_| rng.random_bool(density.clamp(0.0, 1.0)))
        .collect();
    Model::new(atoms, n, twists)
}

/// A solution over the domain with uniformly random free coordinates.
pub fn random_solution(
    model: &Model,
    domain: &BTreeSet<Block>,
    pins: &SolutionPins,
    rng: &mut ChaCha8Rng,
) -> Result<SolveResult> {
    solve_solution_with(model, domain, pins, |_| rng.random_bool(0.5))
}

/// A random full solution; always exists over a finite index set.
pub fn random_full_solution(model: &Model, rng: &mut ChaCha8Rng) -> Result<Solution> {
    let result = random_solution(model, &model.block_set(), &SolutionPins::default(), rng)?;
    result.solution().ok_or_else(|| {
        crate::error::Error::Internal("a finite model always has a solution".to_string())
    })
}

/// A random isomorphism out of `model`: atoms are renamed (optionally) and
/// permuted, offsets are drawn at random, and the target's twist is the one
/// forced by the parity-preservation identity. Returns the target and the
/// isomorphism onto it.
pub fn random_twisted_iso(
    model: &Model,
    rename: bool,
    rng: &mut ChaCha8Rng,
) -> Result<(Model, Embedding)> {
    let mut source_atoms: Vec<AtomId> = model.atoms().to_vec();
    source_atoms.shuffle(rng);
    let mut used: BTreeSet<AtomId> = BTreeSet::new();
    let mut atom_map: BTreeMap<AtomId, AtomId> = BTreeMap::new();
    for a in &source_atoms {
        let image = if rename {
            fresh_token(&format!("x{}", used.len() + 1), &used)
        } else {
            fresh_token(a.token(), &used)
        };
        used.insert(image.clone());
        atom_map.insert(a.clone(), image);
    }
    let target_atoms: Vec<AtomId> = source_atoms.iter().map(|a| atom_map[a].clone()).collect();

    // Random offsets over the target's blocks.
    let target_probe = Model::standard(target_atoms.clone(), model.arity())?;
    let target_blocks: Vec<Block> = target_probe.blocks();
    let mut delta: BTreeMap<Block, GroupElem> = BTreeMap::new();
    let mut eps: BTreeSet<Block> = BTreeSet::new();
    for u in model.blocks() {
        let support: Vec<Block> = target_blocks
            .iter()
            .filter(|_| rng.random_bool(0.25))
            .cloned()
            .collect();
        let g = GroupElem::from_blocks(support);
        if !g.is_zero() {
            delta.insert(u.clone(), g);
        }
        if rng.random_bool(0.5) {
            eps.insert(u);
        }
    }

    // The target twist is forced: q_N(πv, πw) = q_M(v,w) + Σ δ_u(πv) + ε_v.
    let map_block = |b: &Block| -> Block {
        Block::new(b.atoms().iter().map(|a| atom_map[a].clone())).expect("injective rename")
    };
    let mut twists = BTreeSet::new();
    for t in model.compatible_tuples() {
        let image_v = map_block(t.v());
        let image_w: Vec<AtomId> = t.w().iter().map(|a| atom_map[a].clone()).collect();
        let mut parity = model.twist(&t);
        for u in t.others() {
            if let Some(d) = delta.get(&u) {
                parity ^= d.eval(&image_v);
            }
        }
        parity ^= eps.contains(t.v());
        if parity {
            twists.insert(CompTuple::new(image_v, image_w).expect("image tuple is valid"));
        }
    }
    let target = Model::new(target_atoms, model.arity(), twists)?;
    let f = Embedding::new(model.clone(), target.clone(), atom_map, delta, eps)?;
    debug_assert!(f.is_valid());
    Ok((target, f))
}

/// A random group element of the model with support drawn from its blocks.
pub fn random_group_elem(model: &Model, max_support: usize, rng: &mut ChaCha8Rng) -> GroupElem {
    let mut blocks = model.blocks();
    blocks.shuffle(rng);
    let take = rng.random_range(0..=max_support.min(blocks.len()));
    GroupElem::from_blocks(blocks.into_iter().take(take))
}

/// A random isomorphism of a whole chain `M0 ≤ M1 ≤ N` (given by the two
/// index subsets): atoms are permuted and renamed, offsets are random but
/// constrained so that each chain member maps onto the induced submodel of
/// the image index set, and the target twist is forced. Returns the target
/// and the isomorphism; the image chain is
/// `induced(N', π I0) ≤ induced(N', π I1) ≤ N'`.
pub fn random_chain_iso(
    n_model: &Model,
    i0: &BTreeSet<AtomId>,
    i1: &BTreeSet<AtomId>,
    rng: &mut ChaCha8Rng,
) -> Result<(Model, Embedding)> {
    let mut source_atoms: Vec<AtomId> = n_model.atoms().to_vec();
    source_atoms.shuffle(rng);
    let mut used: BTreeSet<AtomId> = BTreeSet::new();
    let mut atom_map: BTreeMap<AtomId, AtomId> = BTreeMap::new();
    for a in &source_atoms {
        let image = fresh_token(&format!("y{}", used.len() + 1), &used);
        used.insert(image.clone());
        atom_map.insert(a.clone(), image);
    }
    let target_atoms: Vec<AtomId> = source_atoms.iter().map(|a| atom_map[a].clone()).collect();
    let target_probe = Model::standard(target_atoms.clone(), n_model.arity())?;

    // Offsets: supports stay inside the image of the smallest chain member
    // containing the block, so induced submodels map onto induced
    // submodels.
    let image_of = |set: &BTreeSet<AtomId>| -> BTreeSet<AtomId> {
        set.iter().map(|a| atom_map[a].clone()).collect()
    };
    let image_i0 = image_of(i0);
    let image_i1 = image_of(i1);
    let mut delta: BTreeMap<Block, GroupElem> = BTreeMap::new();
    let mut eps: BTreeSet<Block> = BTreeSet::new();
    for u in n_model.blocks() {
        let allowed: Vec<Block> = if u.is_subset_of(i0) {
            target_probe
                .blocks()
                .into_iter()
                .filter(|b| b.is_subset_of(&image_i0))
                .collect()
        } else if u.is_subset_of(i1) {
            target_probe
                .blocks()
                .into_iter()
                .filter(|b| b.is_subset_of(&image_i1))
                .collect()
        } else {
            target_probe.blocks()
        };
        let support: Vec<Block> = allowed.into_iter().filter(|_| rng.random_bool(0.25)).collect();
        let g = GroupElem::from_blocks(support);
        if !g.is_zero() {
            delta.insert(u.clone(), g);
        }
        if rng.random_bool(0.5) {
            eps.insert(u);
        }
    }

    let map_block = |b: &Block| -> Block {
        Block::new(b.atoms().iter().map(|a| atom_map[a].clone())).expect("injective rename")
    };
    let mut twists = BTreeSet::new();
    for t in n_model.compatible_tuples() {
        let image_v = map_block(t.v());
        let image_w: Vec<AtomId> = t.w().iter().map(|a| atom_map[a].clone()).collect();
        let mut parity = n_model.twist(&t);
        for u in t.others() {
            if let Some(d) = delta.get(&u) {
                parity ^= d.eval(&image_v);
            }
        }
        parity ^= eps.contains(t.v());
        if parity {
            twists.insert(CompTuple::new(image_v, image_w).expect("image tuple is valid"));
        }
    }
    let target = Model::new(target_atoms, n_model.arity(), twists)?;
    let f = Embedding::new(n_model.clone(), target.clone(), atom_map, delta, eps)?;
    debug_assert!(f.is_valid());
    Ok((target, f))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_seed_reproduces_the_model() {
        let a = gen_random_model(2, 5, 0.5, 42).unwrap();
        let b = gen_random_model(2, 5, 0.5, 42).unwrap();
        assert_eq!(a, b);
        let c = gen_random_model(2, 5, 0.5, 43).unwrap();
        // Overwhelmingly likely to differ; the contract is only determinism
        // for equal seeds, so merely record the draw happened.
        let _ = c;
    }

    #[test]
    fn density_extremes() {
        let standard = gen_random_model(2, 5, 0.0, 7).unwrap();
        assert!(standard.is_standard());
        let full = gen_random_model(2, 5, 1.0, 7).unwrap();
        assert_eq!(
            full.twisted_tuples().len(),
            full.compatible_tuples().len()
        );
    }

    #[test]
    fn random_iso_is_valid_and_random_solutions_solve() {
        let mut rng = rng_for(9, 0);
        for _ in 0..10 {
            let m = random_model_with(&mut rng, 2, 4, 0.4).unwrap();
            let (target, f) = random_twisted_iso(&m, true, &mut rng).unwrap();
            assert!(f.is_valid());
            assert!(f.is_bijective_on_atoms());
            assert_eq!(target.atoms().len(), m.atoms().len());

            let h = random_full_solution(&m, &mut rng).unwrap();
            assert!(h.is_valid());
        }
    }
}
