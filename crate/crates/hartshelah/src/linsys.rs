//! Exact GF(2) linear systems: bit-packed rows, Gaussian elimination with a
//! deterministic pivot order, UNSAT certificates, and nullspace bases.
//!
//! Certificates are subsets of the original equations whose GF(2) sum is the
//! contradiction `0 = 1`; they are greedily minimized so no member can be
//! dropped.

use std::collections::BTreeMap;

/// A packed bit row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitRow {
    limbs: Vec<u64>,
}

impl BitRow {
    pub fn zero(width: usize) -> Self {
        BitRow {
            limbs: vec![0; width.div_ceil(64)],
        }
    }

    pub fn get(&self, i: usize) -> bool {
        (self.limbs[i >> 6] >> (i & 63)) & 1 == 1
    }

    pub fn set(&mut self, i: usize) {
        self.limbs[i >> 6] |= 1 << (i & 63);
    }

    pub fn xor_assign(&mut self, other: &BitRow) {
        for (a, b) in self.limbs.iter_mut().zip(other.limbs.iter()) {
            *a ^= *b;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.limbs.iter().all(|l| *l == 0)
    }

    /// Lowest set bit index, if any.
    pub fn first_set(&self) -> Option<usize> {
        for (i, l) in self.limbs.iter().enumerate() {
            if *l != 0 {
                return Some((i << 6) + l.trailing_zeros() as usize);
            }
        }
        None
    }

    pub fn ones(&self, width: usize) -> Vec<usize> {
        (0..width).filter(|&i| self.get(i)).collect()
    }
}

/// One equation: a coefficient row plus a right-hand side bit.
#[derive(Clone, Debug)]
struct Equation {
    coeffs: BitRow,
    rhs: bool,
}

/// The outcome of a solve: a particular solution (free variables 0 unless a
/// free-value hook was supplied) or a minimal conflicting equation subset.
#[derive(Clone, Debug)]
pub enum Outcome {
    Sat(Vec<bool>),
    Unsat(Vec<usize>),
}

impl Outcome {
    pub fn is_sat(&self) -> bool {
        matches!(self, Outcome::Sat(_))
    }
}

/// A GF(2) linear system over indexed variables.
#[derive(Clone, Debug)]
pub struct LinSystem {
    n_vars: usize,
    rows: Vec<Equation>,
}

impl LinSystem {
    pub fn new(n_vars: usize) -> Self {
        LinSystem {
            n_vars,
            rows: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn n_equations(&self) -> usize {
        self.rows.len()
    }

    /// Adds `Σ vars = rhs`; repeated variables cancel.
    pub fn add_equation(&mut self, vars: &[usize], rhs: bool) {
        let mut coeffs = BitRow::zero(self.n_vars);
        for &v in vars {
            debug_assert!(v < self.n_vars);
            if coeffs.get(v) {
                // toggling twice: clear
                coeffs.limbs[v >> 6] ^= 1 << (v & 63);
            } else {
                coeffs.set(v);
            }
        }
        self.rows.push(Equation { coeffs, rhs });
    }

    pub fn is_satisfied_by(&self, assignment: &[bool]) -> bool {
        self.rows.iter().all(|eq| {
            let mut acc = false;
            for i in 0..self.n_vars {
                if eq.coeffs.get(i) && assignment[i] {
                    acc = !acc;
                }
            }
            acc == eq.rhs
        })
    }

    /// Solves with free variables set to 0.
    pub fn solve(&self) -> Outcome {
        self.solve_with(|_| false)
    }

    /// Solves with the given choice function for free variables.
    ///
    /// The pivot order is the variable order, so the result is deterministic
    /// for a fixed system and choice function.
    pub fn solve_with(&self, mut free_value: impl FnMut(usize) -> bool) -> Outcome {
        // Work rows carry a history of which original equations were
        // combined into them, for certificate extraction.
        let mut work: Vec<(BitRow, bool, BitRow)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, eq)| {
                let mut hist = BitRow::zero(self.rows.len());
                hist.set(i);
                (eq.coeffs.clone(), eq.rhs, hist)
            })
            .collect();

        let mut pivot_of_col: BTreeMap<usize, usize> = BTreeMap::new();
        let mut next_row = 0usize;
        for col in 0..self.n_vars {
            let Some(r) = (next_row..work.len()).find(|&r| work[r].0.get(col)) else {
                continue;
            };
            work.swap(next_row, r);
            let (pivot_coeffs, pivot_rhs, pivot_hist) = work[next_row].clone();
            for (i, row) in work.iter_mut().enumerate() {
                if i != next_row && row.0.get(col) {
                    row.0.xor_assign(&pivot_coeffs);
                    row.1 ^= pivot_rhs;
                    row.2.xor_assign(&pivot_hist);
                }
            }
            pivot_of_col.insert(col, next_row);
            next_row += 1;
        }

        // Any all-zero row with rhs = 1 witnesses inconsistency.
        for row in &work {
            if row.0.is_zero() && row.1 {
                let cert = row.2.ones(self.rows.len());
                return Outcome::Unsat(self.minimize_certificate(&cert));
            }
        }

        let mut assignment = vec![false; self.n_vars];
        for col in 0..self.n_vars {
            if !pivot_of_col.contains_key(&col) {
                assignment[col] = free_value(col);
            }
        }
        // The matrix is in reduced echelon form: each pivot row determines
        // its pivot variable from free variables alone.
        for (&col, &r) in &pivot_of_col {
            let row = &work[r];
            let mut acc = row.1;
            for i in (col + 1)..self.n_vars {
                if row.0.get(i) && assignment[i] {
                    acc = !acc;
                }
            }
            assignment[col] = acc;
        }
        debug_assert!(self.is_satisfied_by(&assignment));
        Outcome::Sat(assignment)
    }

    /// Shrinks a conflicting subset until no equation can be removed.
    fn minimize_certificate(&self, initial: &[usize]) -> Vec<usize> {
        let mut current: Vec<usize> = initial.to_vec();
        'outer: loop {
            for drop_pos in 0..current.len() {
                let candidate: Vec<usize> = current
                    .iter()
                    .enumerate()
                    .filter_map(|(i, &e)| (i != drop_pos).then_some(e))
                    .collect();
                if let Some(conflict) = self.subsystem_conflict(&candidate) {
                    current = conflict;
                    continue 'outer;
                }
            }
            return current;
        }
    }

    /// Finds a conflicting combination inside the given equations, if any,
    /// returned in terms of the original indices.
    fn subsystem_conflict(&self, indices: &[usize]) -> Option<Vec<usize>> {
        let mut work: Vec<(BitRow, bool, BitRow)> = indices
            .iter()
            .enumerate()
            .map(|(local, &orig)| {
                let mut hist = BitRow::zero(indices.len());
                hist.set(local);
                (
                    self.rows[orig].coeffs.clone(),
                    self.rows[orig].rhs,
                    hist,
                )
            })
            .collect();
        let mut next_row = 0usize;
        for col in 0..self.n_vars {
            let Some(r) = (next_row..work.len()).find(|&r| work[r].0.get(col)) else {
                continue;
            };
            work.swap(next_row, r);
            let (c, rhs, h) = work[next_row].clone();
            for (i, row) in work.iter_mut().enumerate() {
                if i != next_row && row.0.get(col) {
                    row.0.xor_assign(&c);
                    row.1 ^= rhs;
                    row.2.xor_assign(&h);
                }
            }
            next_row += 1;
        }
        work.iter()
            .find(|row| row.0.is_zero() && row.1)
            .map(|row| row.2.ones(indices.len()).into_iter().map(|l| indices[l]).collect())
    }

    /// Checks that the cited equations sum to `0 = 1`.
    pub fn verify_certificate(&self, cert: &[usize]) -> bool {
        let mut coeffs = BitRow::zero(self.n_vars);
        let mut rhs = false;
        for &i in cert {
            if i >= self.rows.len() {
                return false;
            }
            coeffs.xor_assign(&self.rows[i].coeffs);
            rhs ^= self.rows[i].rhs;
        }
        coeffs.is_zero() && rhs
    }

    /// A basis of the homogeneous solution space, each vector given as a
    /// full assignment. Deterministic: one vector per free column, in
    /// column order.
    pub fn nullspace_basis(&self) -> Vec<Vec<bool>> {
        let mut work: Vec<BitRow> = self.rows.iter().map(|eq| eq.coeffs.clone()).collect();
        let mut pivot_of_col: BTreeMap<usize, usize> = BTreeMap::new();
        let mut next_row = 0usize;
        for col in 0..self.n_vars {
            let Some(r) = (next_row..work.len()).find(|&r| work[r].get(col)) else {
                continue;
            };
            work.swap(next_row, r);
            let pivot = work[next_row].clone();
            for (i, row) in work.iter_mut().enumerate() {
                if i != next_row && row.get(col) {
                    row.xor_assign(&pivot);
                }
            }
            pivot_of_col.insert(col, next_row);
            next_row += 1;
        }
        let mut basis = Vec::new();
        for free_col in 0..self.n_vars {
            if pivot_of_col.contains_key(&free_col) {
                continue;
            }
            let mut vec = vec![false; self.n_vars];
            vec[free_col] = true;
            for (&col, &r) in &pivot_of_col {
                if work[r].get(free_col) {
                    vec[col] = true;
                }
            }
            basis.push(vec);
        }
        basis
    }
}

/// Assigns consecutive indices to keys in their `Ord` order, fixing the
/// canonical variable order of a solve.
#[derive(Clone, Debug)]
pub struct VarMap<K: Ord + Clone> {
    index: BTreeMap<K, usize>,
}

impl<K: Ord + Clone> VarMap<K> {
    pub fn from_keys(keys: impl IntoIterator<Item = K>) -> Self {
        let sorted: std::collections::BTreeSet<K> = keys.into_iter().collect();
        let index = sorted.into_iter().enumerate().map(|(i, k)| (k, i)).collect();
        VarMap { index }
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn get(&self, key: &K) -> Option<usize> {
        self.index.get(key).copied()
    }

    pub fn keys(&self) -> impl Iterator<Item = &K> {
        self.index.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, usize)> {
        self.index.iter().map(|(k, &i)| (k, i))
    }
}
