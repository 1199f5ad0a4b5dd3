//! Search for `alpha > 0` in `Z^N` with `alpha . nu_j <= 0` on superlinear reactions.

use num_rational::Ratio;
use serde::Serialize;

use super::classify_growth;
use crate::model::ReactionNetwork;

pub const DEFAULT_ALPHA_BOUND: u64 = 20;

/// Bounded lexicographic search stops being attempted above this many candidates.
const MAX_ENUMERATION: u128 = 10_000_000;

type Q = Ratio<i128>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaMethod {
    Lexicographic,
    Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AlphaCertificate {
    pub alpha: Vec<u64>,
    /// `(j, alpha . nu_j)` for every superlinear reaction `j`.
    pub inner_products: Vec<(usize, i64)>,
    pub method: AlphaMethod,
}

impl AlphaCertificate {
    /// Re-checks positivity and the inner-product signs against `net`.
    pub fn verify(&self, net: &ReactionNetwork) -> bool {
        let sup = classify_growth(net).superlinear;
        self.alpha.len() == net.n_species()
            && self.alpha.iter().all(|&a| a > 0)
            && sup.iter().all(|&j| dot(&self.alpha, net.nu(j)) <= 0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum AlphaSearch {
    Found(AlphaCertificate),
    /// No positive real solution exists, so no integer one either.
    Infeasible { superlinear: Vec<usize> },
}

impl AlphaSearch {
    pub fn certificate(&self) -> Option<&AlphaCertificate> {
        match self {
            AlphaSearch::Found(c) => Some(c),
            AlphaSearch::Infeasible { .. } => None,
        }
    }
}

fn dot(alpha: &[u64], nu: &[i64]) -> i64 {
    alpha.iter().zip(nu).map(|(&a, &v)| a as i64 * v).sum()
}

/// Lexicographically smallest `alpha` in `{1..=bound}^N`, falling back to
/// exact rational elimination when that box has no solution or is too large.
pub fn find_alpha(net: &ReactionNetwork, bound: u64) -> AlphaSearch {
    let superlinear = classify_growth(net).superlinear;
    let rows: Vec<&[i64]> = superlinear.iter().map(|&j| net.nu(j)).collect();
    let n = net.n_species();
    let certify = |alpha: Vec<u64>, method| {
        AlphaSearch::Found(AlphaCertificate {
            inner_products: superlinear.iter().map(|&j| (j, dot(&alpha, net.nu(j)))).collect(),
            alpha,
            method,
        })
    };
    if bound >= 1 && (bound as u128).checked_pow(n as u32).is_some_and(|c| c <= MAX_ENUMERATION) {
        let mut alpha = vec![1u64; n];
        loop {
            if rows.iter().all(|nu| dot(&alpha, nu) <= 0) {
                return certify(alpha, AlphaMethod::Lexicographic);
            }
            // Last coordinate varies fastest, so candidates come in lexicographic order.
            let mut i = n;
            loop {
                if i == 0 {
                    break;
                }
                i -= 1;
                if alpha[i] < bound {
                    alpha[i] += 1;
                    break;
                }
                alpha[i] = 1;
            }
            if alpha.iter().all(|&a| a == 1) {
                break;
            }
        }
    }
    match rational_alpha(&rows, n) {
        Some(alpha) => certify(alpha, AlphaMethod::Rational),
        None => AlphaSearch::Infeasible { superlinear },
    }
}

/// A constraint `coeffs . alpha <= rhs`.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Constraint {
    coeffs: Vec<Q>,
    rhs: Q,
}

/// Solves `nu . alpha <= 0`, `alpha_i >= 1` by Fourier-Motzkin elimination,
/// then scales the rational solution to integers.
fn rational_alpha(rows: &[&[i64]], n: usize) -> Option<Vec<u64>> {
    let zero = Q::from_integer(0);
    let mut system: Vec<Constraint> = rows
        .iter()
        .map(|nu| Constraint {
            coeffs: nu.iter().map(|&v| Q::from_integer(v as i128)).collect(),
            rhs: zero,
        })
        .collect();
    for i in 0..n {
        let mut coeffs = vec![zero; n];
        coeffs[i] = Q::from_integer(-1);
        system.push(Constraint {
            coeffs,
            rhs: Q::from_integer(-1),
        });
    }
    // stages[v] holds the system over variables 0..=v.
    let mut stages: Vec<Vec<Constraint>> = vec![Vec::new(); n];
    for v in (0..n).rev() {
        stages[v] = system.clone();
        let (mut upper, mut lower, mut rest) = (Vec::new(), Vec::new(), Vec::new());
        for c in system {
            if c.coeffs[v] > zero {
                upper.push(c);
            } else if c.coeffs[v] < zero {
                lower.push(c);
            } else {
                rest.push(c);
            }
        }
        for u in &upper {
            for l in &lower {
                let (su, sl) = (-l.coeffs[v], u.coeffs[v]);
                let combined = Constraint {
                    coeffs: u.coeffs.iter().zip(&l.coeffs).map(|(&a, &b)| a * su + b * sl).collect(),
                    rhs: u.rhs * su + l.rhs * sl,
                };
                if !rest.contains(&combined) {
                    rest.push(combined);
                }
            }
        }
        system = rest;
    }
    if system.iter().any(|c| c.rhs < zero) {
        return None;
    }
    let mut alpha: Vec<Q> = vec![zero; n];
    for v in 0..n {
        let mut lo = Q::from_integer(1);
        let mut hi: Option<Q> = None;
        for c in &stages[v] {
            let a = c.coeffs[v];
            if a == zero {
                continue;
            }
            let known: Q = (0..v).map(|i| c.coeffs[i] * alpha[i]).fold(zero, |s, t| s + t);
            let bound = (c.rhs - known) / a;
            if a > zero {
                hi = Some(hi.map_or(bound, |h: Q| h.min(bound)));
            } else {
                lo = lo.max(bound);
            }
        }
        if hi.is_some_and(|h| h < lo) {
            return None;
        }
        alpha[v] = lo;
    }
    let lcm = alpha.iter().fold(1i128, |acc, a| {
        let d = *a.denom();
        acc / gcd(acc, d) * d
    });
    alpha
        .iter()
        .map(|a| u64::try_from((*a * lcm).to_integer()).ok())
        .collect()
}

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}
