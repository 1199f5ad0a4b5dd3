//! Lattice states and finitely supported (signed) measures on the integer lattice.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// A point of the integer lattice `Z^N`.
///
/// Coordinates are molecule counts; they may be negative, which is how the
/// tau-leap solution records that it has left the non-negative orthant.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatticeState(Vec<i64>);

impl LatticeState {
    pub fn new(coords: Vec<i64>) -> Self {
        Self(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<i64> {
        self.0
    }

    /// `true` when every coordinate is `>= 0`.
    pub fn is_nonnegative(&self) -> bool {
        self.0.iter().all(|&c| c >= 0)
    }

    /// `self + scale * delta`.
    pub fn shifted(&self, delta: &[i64], scale: i64) -> Self {
        debug_assert_eq!(delta.len(), self.0.len());
        Self(
            self.0
                .iter()
                .zip(delta)
                .map(|(&x, &d)| x + scale * d)
                .collect(),
        )
    }

    pub fn shift_in_place(&mut self, delta: &[i64], scale: i64) {
        for (x, &d) in self.0.iter_mut().zip(delta) {
            *x += scale * d;
        }
    }
}

impl From<Vec<i64>> for LatticeState {
    fn from(v: Vec<i64>) -> Self {
        Self(v)
    }
}

impl From<&[i64]> for LatticeState {
    fn from(v: &[i64]) -> Self {
        Self(v.to_vec())
    }
}

impl<const N: usize> From<[i64; N]> for LatticeState {
    fn from(v: [i64; N]) -> Self {
        Self(v.to_vec())
    }
}

impl fmt::Display for LatticeState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// A finitely supported measure on `Z^N`.
///
/// Entries live in a `BTreeMap` so that every iteration, and therefore every
/// floating-point reduction over the support, happens in a fixed order.
/// `signed` is `false` for probability vectors and `true` for differences
/// and derivative vectors.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct SparsePmf {
    entries: BTreeMap<LatticeState, f64>,
    signed: bool,
}

impl SparsePmf {
    /// The zero measure.
    pub fn zero(signed: bool) -> Self {
        Self {
            entries: BTreeMap::new(),
            signed,
        }
    }

    /// Unit mass at `x`.
    pub fn delta(x: LatticeState) -> Self {
        let mut entries = BTreeMap::new();
        entries.insert(x, 1.0);
        Self {
            entries,
            signed: false,
        }
    }

    /// Builds a measure from `(state, weight)` pairs; repeated states are summed.
    pub fn from_entries<I>(entries: I, signed: bool) -> Self
    where
        I: IntoIterator<Item = (LatticeState, f64)>,
    {
        let mut pmf = Self::zero(signed);
        for (x, w) in entries {
            pmf.add(x, w);
        }
        pmf
    }

    pub fn is_signed(&self) -> bool {
        self.signed
    }

    pub fn set_signed(&mut self, signed: bool) {
        self.signed = signed;
    }

    pub fn get(&self, x: &LatticeState) -> f64 {
        self.entries.get(x).copied().unwrap_or(0.0)
    }

    /// Adds `w` to the weight at `x`.
    pub fn add(&mut self, x: LatticeState, w: f64) {
        *self.entries.entry(x).or_insert(0.0) += w;
    }

    pub fn add_ref(&mut self, x: &LatticeState, w: f64) {
        if let Some(v) = self.entries.get_mut(x) {
            *v += w;
        } else {
            self.entries.insert(x.clone(), w);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&LatticeState, f64)> + '_ {
        self.entries.iter().map(|(x, &w)| (x, w))
    }

    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Dimension of the states in the support, if any.
    pub fn dim(&self) -> Option<usize> {
        self.entries.keys().next().map(LatticeState::dim)
    }

    /// Sum of all weights.
    pub fn total_mass(&self) -> f64 {
        self.entries.values().sum()
    }

    /// Sum of absolute weights (the `l1` norm).
    pub fn abs_mass(&self) -> f64 {
        self.entries.values().map(|w| w.abs()).sum()
    }

    /// Drops exact zeros from the support.
    pub fn prune_zeros(&mut self) {
        self.entries.retain(|_, w| *w != 0.0);
    }

    /// `self * factor`. Negative factors make the result signed.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            entries: self.entries.iter().map(|(x, &w)| (x.clone(), w * factor)).collect(),
            signed: self.signed || factor < 0.0,
        }
    }

    /// `self + factor * other`, aligning supports by union with implicit zeros.
    pub fn add_scaled(&mut self, other: &SparsePmf, factor: f64) {
        for (x, w) in other.iter() {
            self.add_ref(x, factor * w);
        }
        self.signed = self.signed || other.signed || factor < 0.0;
    }

    /// The signed difference `self - other` over the union of the supports.
    pub fn difference(&self, other: &SparsePmf) -> SparsePmf {
        let mut out = self.clone();
        out.signed = true;
        for (x, w) in other.iter() {
            out.add_ref(x, -w);
        }
        out
    }

    /// Checks the probability-vector invariant: non-negative weights with total
    /// mass in `[1 - loss, 1]` (up to a small rounding slack).
    pub fn is_probability(&self, loss: f64) -> bool {
        const SLACK: f64 = 1e-12;
        let total = self.total_mass();
        !self.signed
            && self.entries.values().all(|&w| w >= 0.0)
            && total <= 1.0 + SLACK
            && total >= 1.0 - loss - SLACK
    }

    /// Expectation of `f` under this measure.
    pub fn expect<F: Fn(&LatticeState) -> f64>(&self, f: F) -> f64 {
        self.entries.iter().map(|(x, &w)| f(x) * w).sum()
    }

    pub fn into_entries(self) -> BTreeMap<LatticeState, f64> {
        self.entries
    }
}

impl FromIterator<(LatticeState, f64)> for SparsePmf {
    fn from_iter<T: IntoIterator<Item = (LatticeState, f64)>>(iter: T) -> Self {
        Self::from_entries(iter, false)
    }
}
