use std::collections::BTreeSet;
use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{BsdeError, Result};

/// Largest multi-index weight the enumerators accept.
pub const MAX_WEIGHT: usize = 8;
/// Largest driving dimension the enumerators accept.
pub const MAX_DIM: usize = 2;

/// A word over `{0, 1, ..., d}`; letter 0 stands for time.
///
/// The first letter is the innermost integral: `J_(a,b) = ∫ J_(a) dω^b`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct MultiIndex(Vec<u8>);

impl MultiIndex {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn new(letters: impl Into<Vec<u8>>) -> Self {
        Self(letters.into())
    }

    pub fn letters(&self) -> &[u8] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `|α|`
    pub fn length(&self) -> usize {
        self.0.len()
    }

    /// `‖α‖`: length plus number of zero letters.
    pub fn weight(&self) -> usize {
        self.0.len() + self.zeros()
    }

    pub fn norms(&self) -> (usize, usize) {
        (self.length(), self.weight())
    }

    pub fn zeros(&self) -> usize {
        self.0.iter().filter(|&&l| l == 0).count()
    }

    pub fn max_letter(&self) -> Option<u8> {
        self.0.iter().copied().max()
    }

    /// `-α`: drop the first letter.
    pub fn left_remove(&self) -> Option<Self> {
        (!self.0.is_empty()).then(|| Self(self.0[1..].to_vec()))
    }

    /// `α-`: drop the last letter.
    pub fn right_remove(&self) -> Option<Self> {
        (!self.0.is_empty()).then(|| Self(self.0[..self.0.len() - 1].to_vec()))
    }

    /// `α * β`
    pub fn concat(&self, other: &Self) -> Self {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Self(v)
    }

    pub fn prepend(&self, letter: u8) -> Self {
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.push(letter);
        v.extend_from_slice(&self.0);
        Self(v)
    }

    /// Word with `letter` inserted before position `slot` (`slot == len` appends).
    pub fn insert(&self, slot: usize, letter: u8) -> Self {
        let mut v = self.0.clone();
        v.insert(slot, letter);
        Self(v)
    }

    /// Splits into blocks `(0)` and `(j,j)`, if possible.
    fn block_count(&self) -> Option<usize> {
        let mut blocks = 0;
        let mut i = 0;
        while i < self.0.len() {
            match self.0[i] {
                0 => i += 1,
                j => {
                    if self.0.get(i + 1) != Some(&j) {
                        return None;
                    }
                    i += 2;
                }
            }
            blocks += 1;
        }
        Some(blocks)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "∅");
        }
        write!(f, "(")?;
        for (k, l) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{l}")?;
        }
        write!(f, ")")
    }
}

impl From<&[u8]> for MultiIndex {
    fn from(v: &[u8]) -> Self {
        Self(v.to_vec())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IndexSet {
    members: BTreeSet<MultiIndex>,
}

impl IndexSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, alpha: MultiIndex) -> bool {
        self.members.insert(alpha)
    }

    pub fn contains(&self, alpha: &MultiIndex) -> bool {
        self.members.contains(alpha)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &MultiIndex> {
        self.members.iter()
    }

    /// Non-empty and closed under removal of the first letter.
    pub fn is_hierarchical(&self) -> bool {
        !self.members.is_empty()
            && self
                .members
                .iter()
                .filter_map(MultiIndex::left_remove)
                .all(|tail| self.members.contains(&tail))
    }

    /// `B(G) = { β ∉ G : -β ∈ G }`, with letters in `{0, ..., d}`.
    pub fn remainder(&self, d: usize) -> IndexSet {
        let mut out = IndexSet::new();
        for gamma in &self.members {
            for j in 0..=d as u8 {
                let beta = gamma.prepend(j);
                if !self.members.contains(&beta) {
                    out.insert(beta);
                }
            }
        }
        out
    }
}

impl FromIterator<MultiIndex> for IndexSet {
    fn from_iter<I: IntoIterator<Item = MultiIndex>>(iter: I) -> Self {
        Self { members: iter.into_iter().collect() }
    }
}

fn check_caps(m: usize, d: usize) -> Result<()> {
    if d == 0 || d > MAX_DIM {
        return Err(BsdeError::InvalidArgument(format!("dimension must be in 1..={MAX_DIM}, got {d}")));
    }
    if m > MAX_WEIGHT {
        return Err(BsdeError::InvalidArgument(format!("weight must be <= {MAX_WEIGHT}, got {m}")));
    }
    Ok(())
}

/// Every word over `{0..d}` with `‖α‖ <= m`, shortest first.
pub fn words_up_to_weight(m: usize, d: usize) -> Result<Vec<MultiIndex>> {
    check_caps(m, d)?;
    let mut out = vec![MultiIndex::empty()];
    let mut frontier = vec![MultiIndex::empty()];
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for w in &frontier {
            for j in 0..=d as u8 {
                let cand = w.insert(w.length(), j);
                if cand.weight() <= m {
                    next.push(cand);
                }
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    Ok(out)
}

/// `A_m = { α : ‖α‖ <= m }`.
pub fn hierarchical_set(m: usize, d: usize) -> Result<IndexSet> {
    Ok(words_up_to_weight(m, d)?.into_iter().collect())
}

pub fn remainder_set(set: &IndexSet, d: usize) -> IndexSet {
    set.remainder(d)
}

/// `E[J_α[1]_{0,t}] = coefficient * t^power` for Brownian motion with time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IteratedMoment {
    pub coefficient: Ratio<u64>,
    pub power: u32,
}

impl IteratedMoment {
    pub fn eval(&self, t: f64) -> f64 {
        let c = *self.coefficient.numer() as f64 / *self.coefficient.denom() as f64;
        c * t.powi(self.power as i32)
    }
}

/// Expectation of an iterated Stratonovich integral: zero unless `α`
/// splits into blocks `(0)` and `(j,j)`; then `t^{m/2} / (2^{r-m/2} (m/2)!)`
/// with `m = ‖α‖`, `r = |α|`.
pub fn iterated_moment(alpha: &MultiIndex) -> IteratedMoment {
    let zero = IteratedMoment { coefficient: Ratio::from_integer(0), power: 0 };
    let m = alpha.weight();
    if m % 2 == 1 {
        return zero;
    }
    let Some(blocks) = alpha.block_count() else {
        return zero;
    };
    debug_assert_eq!(blocks, m / 2);
    let pair_blocks = alpha.length() - m / 2;
    let factorial: u64 = (1..=(m / 2) as u64).product();
    IteratedMoment {
        coefficient: Ratio::new(1, (1u64 << pair_blocks) * factorial),
        power: (m / 2) as u32,
    }
}

pub fn expected_iterated_integral(alpha: &MultiIndex, t: f64) -> f64 {
    iterated_moment(alpha).eval(t)
}
