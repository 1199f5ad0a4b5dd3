//! Reaction networks: stoichiometry, propensities and the generator.

mod generator;
pub mod library;
mod parse;

use std::collections::HashSet;
use std::fmt::{self, Write as _};

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::pmf::LatticeState;

pub use generator::GeneratorRow;
pub use parse::{parse_network, ParseError, ParseErrorKind};

/// Structural problems in a network assembled through the API.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("network declares no species")]
    NoSpecies,
    #[error("duplicate species `{0}`")]
    DuplicateSpecies(String),
    #[error("duplicate reaction id `{0}`")]
    DuplicateReaction(String),
    #[error("reaction `{0}` does not change the state")]
    NoStateChange(String),
    #[error("reaction `{reaction}` refers to species index {index} but the network has {n_species} species")]
    SpeciesOutOfRange {
        reaction: String,
        index: usize,
        n_species: usize,
    },
    #[error("reaction `{reaction}` has invalid rate constant {rate}")]
    InvalidRate { reaction: String, rate: f64 },
    #[error("reaction `{0}` has a non-finite polynomial coefficient")]
    InvalidCoefficient(String),
    #[error("stoichiometric coefficient overflow in reaction `{0}`")]
    StoichiometryOverflow(String),
}

/// One term `coeff * x_{i1}^{e1} * ...` of a polynomial propensity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Monomial {
    pub coeff: f64,
    /// `(species index, exponent)`, exponents `>= 1`, species sorted and unique.
    pub powers: Vec<(usize, u32)>,
}

impl Monomial {
    pub fn new(coeff: f64, powers: Vec<(usize, u32)>) -> Self {
        Self {
            coeff,
            powers: normalize_multiset(powers),
        }
    }

    pub fn degree(&self) -> u32 {
        self.powers.iter().map(|&(_, e)| e).sum()
    }

    fn eval(&self, x: &[i64]) -> f64 {
        self.powers
            .iter()
            .fold(self.coeff, |acc, &(i, e)| acc * (x[i] as f64).powi(e as i32))
    }
}

/// Functional form of a propensity `a_j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PropensitySpec {
    /// `rate * prod_i C(x_i, m_i)` over the reactant multiset `{(i, m_i)}`.
    MassAction {
        rate: f64,
        reactants: Vec<(usize, u32)>,
    },
    /// Sum of monomials, clamped below at zero.
    Polynomial { terms: Vec<Monomial> },
}

impl PropensitySpec {
    pub fn mass_action(rate: f64, reactants: Vec<(usize, u32)>) -> Self {
        Self::MassAction {
            rate,
            reactants: normalize_multiset(reactants),
        }
    }

    pub fn polynomial(terms: Vec<Monomial>) -> Self {
        Self::Polynomial { terms }
    }

    /// Evaluates the propensity; always finite for finite inputs and never negative.
    pub fn eval(&self, x: &[i64]) -> f64 {
        match self {
            Self::MassAction { rate, reactants } => {
                let mut value = *rate;
                for &(i, m) in reactants {
                    let xi = x[i];
                    if xi < m as i64 {
                        return 0.0;
                    }
                    value *= binomial_coefficient(xi, m);
                }
                value
            }
            Self::Polynomial { terms } => {
                let v: f64 = terms.iter().map(|t| t.eval(x)).sum();
                if v > 0.0 {
                    v
                } else {
                    0.0
                }
            }
        }
    }

    /// Total polynomial degree of the propensity in the state.
    pub fn degree(&self) -> u32 {
        match self {
            Self::MassAction { reactants, .. } => reactants.iter().map(|&(_, m)| m).sum(),
            Self::Polynomial { terms } => terms
                .iter()
                .filter(|t| t.coeff != 0.0)
                .map(Monomial::degree)
                .max()
                .unwrap_or(0),
        }
    }

    /// Bound `C` with `a(x) <= C * prod_i max(1, |x_i|)^{e_i}`, used for growth-class checks.
    pub fn coefficient_bound(&self) -> f64 {
        match self {
            Self::MassAction { rate, .. } => *rate,
            Self::Polynomial { terms } => terms.iter().map(|t| t.coeff.abs()).sum(),
        }
    }

    pub fn rate_constant(&self) -> Option<f64> {
        match self {
            Self::MassAction { rate, .. } => Some(*rate),
            Self::Polynomial { .. } => None,
        }
    }
}

fn binomial_coefficient(n: i64, k: u32) -> f64 {
    let mut acc = 1.0;
    for i in 0..k as i64 {
        acc *= (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

fn normalize_multiset(mut items: Vec<(usize, u32)>) -> Vec<(usize, u32)> {
    items.sort_by_key(|&(i, _)| i);
    let mut out: Vec<(usize, u32)> = Vec::with_capacity(items.len());
    for (i, m) in items {
        if m == 0 {
            continue;
        }
        match out.last_mut() {
            Some((j, acc)) if *j == i => *acc = acc.saturating_add(m),
            _ => out.push((i, m)),
        }
    }
    out
}

/// A single reaction channel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reaction {
    pub id: String,
    /// Reactant complex as `(species index, multiplicity)`.
    pub reactants: Vec<(usize, u32)>,
    /// Product complex as `(species index, multiplicity)`.
    pub products: Vec<(usize, u32)>,
    pub propensity: PropensitySpec,
}

impl Reaction {
    pub fn new(
        id: impl Into<String>,
        reactants: Vec<(usize, u32)>,
        products: Vec<(usize, u32)>,
        propensity: PropensitySpec,
    ) -> Self {
        Self {
            id: id.into(),
            reactants: normalize_multiset(reactants),
            products: normalize_multiset(products),
            propensity,
        }
    }

    /// A mass-action reaction whose propensity uses the reactant complex.
    pub fn mass_action(
        id: impl Into<String>,
        reactants: Vec<(usize, u32)>,
        products: Vec<(usize, u32)>,
        rate: f64,
    ) -> Self {
        let reactants = normalize_multiset(reactants);
        let propensity = PropensitySpec::mass_action(rate, reactants.clone());
        Self::new(id, reactants, products, propensity)
    }
}

/// A chemical reaction network on `Z^N` with `M` channels.
///
/// Immutable once built, so it can be shared freely between worker threads.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReactionNetwork {
    species: Vec<String>,
    reactions: Vec<Reaction>,
    /// Column `j` is the stoichiometric vector of reaction `j`.
    #[serde(skip)]
    nu: Vec<Vec<i64>>,
}

impl ReactionNetwork {
    pub fn new(species: Vec<String>, reactions: Vec<Reaction>) -> Result<Self, ModelError> {
        if species.is_empty() {
            return Err(ModelError::NoSpecies);
        }
        let mut seen = HashSet::new();
        for s in &species {
            if !seen.insert(s.as_str()) {
                return Err(ModelError::DuplicateSpecies(s.clone()));
            }
        }
        let mut ids = HashSet::new();
        let n = species.len();
        let mut nu = Vec::with_capacity(reactions.len());
        for r in &reactions {
            if !ids.insert(r.id.as_str()) {
                return Err(ModelError::DuplicateReaction(r.id.clone()));
            }
            let check_index = |index: usize| {
                if index >= n {
                    Err(ModelError::SpeciesOutOfRange {
                        reaction: r.id.clone(),
                        index,
                        n_species: n,
                    })
                } else {
                    Ok(())
                }
            };
            let mut column = vec![0i64; n];
            for &(i, m) in &r.reactants {
                check_index(i)?;
                column[i] = column[i]
                    .checked_sub(m as i64)
                    .ok_or_else(|| ModelError::StoichiometryOverflow(r.id.clone()))?;
            }
            for &(i, m) in &r.products {
                check_index(i)?;
                column[i] = column[i]
                    .checked_add(m as i64)
                    .ok_or_else(|| ModelError::StoichiometryOverflow(r.id.clone()))?;
            }
            if column.iter().all(|&c| c == 0) {
                return Err(ModelError::NoStateChange(r.id.clone()));
            }
            match &r.propensity {
                PropensitySpec::MassAction { rate, reactants } => {
                    if !rate.is_finite() || *rate < 0.0 {
                        return Err(ModelError::InvalidRate {
                            reaction: r.id.clone(),
                            rate: *rate,
                        });
                    }
                    for &(i, _) in reactants {
                        check_index(i)?;
                    }
                }
                PropensitySpec::Polynomial { terms } => {
                    for t in terms {
                        if !t.coeff.is_finite() {
                            return Err(ModelError::InvalidCoefficient(r.id.clone()));
                        }
                        for &(i, _) in &t.powers {
                            check_index(i)?;
                        }
                    }
                }
            }
            nu.push(column);
        }
        Ok(Self {
            species,
            reactions,
            nu,
        })
    }

    /// `N`, the number of species.
    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    /// `M`, the number of reaction channels.
    pub fn n_reactions(&self) -> usize {
        self.reactions.len()
    }

    pub fn species(&self) -> &[String] {
        &self.species
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s == name)
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    pub fn reaction(&self, j: usize) -> &Reaction {
        &self.reactions[j]
    }

    /// Stoichiometric vector of reaction `j` (0-based).
    pub fn nu(&self, j: usize) -> &[i64] {
        &self.nu[j]
    }

    /// Propensity `a_j(x)` of reaction `j` (0-based). Panics if `j >= M`.
    pub fn propensity(&self, j: usize, x: &LatticeState) -> f64 {
        self.reactions[j].propensity.eval(x.coords())
    }

    pub fn propensities(&self, x: &LatticeState) -> Vec<f64> {
        (0..self.n_reactions()).map(|j| self.propensity(j, x)).collect()
    }

    /// `a_0(x) = sum_j a_j(x)`.
    pub fn total_propensity(&self, x: &LatticeState) -> f64 {
        (0..self.n_reactions()).map(|j| self.propensity(j, x)).sum()
    }

    /// `x + nu k` for a reaction-count vector `k`.
    pub fn apply_counts(&self, x: &LatticeState, k: &[u64]) -> LatticeState {
        let mut y = x.clone();
        for (j, &kj) in k.iter().enumerate() {
            if kj > 0 {
                y.shift_in_place(&self.nu[j], kj as i64);
            }
        }
        y
    }

    /// Canonical text form in the model DSL; `parse_network` reads it back.
    pub fn to_dsl(&self) -> String {
        let mut out = String::new();
        out.push_str("species");
        for s in &self.species {
            out.push(' ');
            out.push_str(s);
        }
        out.push('\n');
        for r in &self.reactions {
            let _ = write!(
                out,
                "reaction {}: {} -> {} @ ",
                r.id,
                self.complex_to_string(&r.reactants),
                self.complex_to_string(&r.products)
            );
            match &r.propensity {
                PropensitySpec::MassAction { rate, .. } => {
                    let _ = write!(out, "mass_action {}", fmt_real(*rate));
                }
                PropensitySpec::Polynomial { terms } => {
                    out.push_str("polynomial ");
                    if terms.is_empty() {
                        out.push('0');
                    }
                    for (i, t) in terms.iter().enumerate() {
                        let c = if i == 0 {
                            fmt_real(t.coeff)
                        } else if t.coeff.is_sign_negative() {
                            out.push_str(" - ");
                            fmt_real(-t.coeff)
                        } else {
                            out.push_str(" + ");
                            fmt_real(t.coeff)
                        };
                        out.push_str(&c);
                        for &(s, e) in &t.powers {
                            let _ = write!(out, "*{}", self.species[s]);
                            if e != 1 {
                                let _ = write!(out, "^{e}");
                            }
                        }
                    }
                }
            }
            out.push('\n');
        }
        out
    }

    fn complex_to_string(&self, complex: &[(usize, u32)]) -> String {
        if complex.is_empty() {
            return "0".to_owned();
        }
        complex
            .iter()
            .map(|&(i, m)| {
                if m == 1 {
                    self.species[i].clone()
                } else {
                    format!("{m}*{}", self.species[i])
                }
            })
            .collect::<Vec<_>>()
            .join(" + ")
    }

    /// SHA-256 of the canonical DSL text, hex encoded.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_dsl().as_bytes());
        digest.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

// Debug formatting keeps a decimal point or exponent and round-trips exactly.
fn fmt_real(v: f64) -> String {
    format!("{v:?}")
}

impl fmt::Display for ReactionNetwork {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_dsl())
    }
}
