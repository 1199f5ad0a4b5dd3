//! Tau-leap update rules.
//!
//! Every kernel draws the reaction counts `K_j` independently given the
//! current state, each from a Poisson or binomial law (or the point mass at
//! zero), and updates `x' = x + sum_j nu_j K_j`. Once a state has a negative
//! coordinate all counts are zero, so the process freezes there.

use std::str::FromStr;

use serde::Serialize;

use super::count::{CountDistribution, CountParam};
use super::KernelError;
use crate::model::{PropensitySpec, ReactionNetwork};
use crate::pmf::LatticeState;

/// Kernel names accepted on the command line and in configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelName {
    Explicit,
    Midpoint,
    Remm,
}

impl FromStr for KernelName {
    type Err = KernelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "explicit" => Ok(Self::Explicit),
            "midpoint" => Ok(Self::Midpoint),
            "remm" => Ok(Self::Remm),
            other => Err(KernelError::UnknownKernel(other.to_owned())),
        }
    }
}

impl KernelName {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Explicit => "explicit",
            Self::Midpoint => "midpoint",
            Self::Remm => "remm",
        }
    }
}

/// Channel roles for the REMM update: `A + B -> C`, `C -> A + B`,
/// `S -> 2 S` and `S -> 0` with `S` one of `A`, `B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RemmRoles {
    pub forward: usize,
    pub reverse: usize,
    pub birth: usize,
    pub death: usize,
    pub species_a: usize,
    pub species_b: usize,
    pub species_c: usize,
    /// The species that is born and dies (`S`).
    pub species_s: usize,
}

/// Optional explicit role assignment for [`TauLeapKernel::remm`]; unset roles
/// are detected from the reaction shapes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RemmOverrides {
    pub forward: Option<usize>,
    pub reverse: Option<usize>,
    pub birth: Option<usize>,
    pub death: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
enum Rule {
    /// `K_j ~ Poisson(scale * a_j(x) tau)`; `scale != 1` is only useful as a
    /// deliberately inconsistent control.
    Explicit { rate_scale: f64 },
    Midpoint,
    Remm {
        roles: RemmRoles,
        rates: [f64; 4],
    },
}

/// A tau-leap method, characterised by its per-reaction count laws.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TauLeapKernel {
    name: String,
    rule: Rule,
}

impl TauLeapKernel {
    /// Explicit tau: `K_j ~ Poisson(a_j(x) tau)`.
    pub fn explicit() -> Self {
        Self {
            name: "explicit".into(),
            rule: Rule::Explicit { rate_scale: 1.0 },
        }
    }

    /// Explicit tau with every Poisson mean multiplied by `rate_scale`.
    pub fn explicit_scaled(rate_scale: f64) -> Self {
        Self {
            name: format!("explicit[x{rate_scale}]"),
            rule: Rule::Explicit { rate_scale },
        }
    }

    /// Midpoint tau: `K_j ~ Poisson(a_j(x*) tau)` with
    /// `x* = round(x + tau/2 * nu a(x))`, ties rounded toward `x`.
    pub fn midpoint() -> Self {
        Self {
            name: "midpoint".into(),
            rule: Rule::Midpoint,
        }
    }

    /// REMM tau for a reversible binding pair plus birth and death of one of
    /// the binding partners.
    pub fn remm(net: &ReactionNetwork, overrides: &RemmOverrides) -> Result<Self, KernelError> {
        let roles = detect_remm_roles(net, overrides)?;
        let rate = |j: usize| {
            net.reaction(j)
                .propensity
                .rate_constant()
                .expect("roles checked to be mass action")
        };
        Ok(Self {
            name: "remm".into(),
            rule: Rule::Remm {
                roles,
                rates: [
                    rate(roles.forward),
                    rate(roles.reverse),
                    rate(roles.birth),
                    rate(roles.death),
                ],
            },
        })
    }

    /// Builds a kernel by name; `remm` needs a network to bind channel roles.
    pub fn by_name(name: KernelName, net: &ReactionNetwork) -> Result<Self, KernelError> {
        match name {
            KernelName::Explicit => Ok(Self::explicit()),
            KernelName::Midpoint => Ok(Self::midpoint()),
            KernelName::Remm => Self::remm(net, &RemmOverrides::default()),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn remm_roles(&self) -> Option<&RemmRoles> {
        match &self.rule {
            Rule::Remm { roles, .. } => Some(roles),
            _ => None,
        }
    }

    /// Per-reaction count laws at state `x` for step `tau`.
    ///
    /// The laws returned at `tau = 0` describe the germ of the kernel at zero
    /// and are what derivative computations use.
    pub fn count_distributions(
        &self,
        net: &ReactionNetwork,
        x: &LatticeState,
        tau: f64,
    ) -> Result<Vec<CountDistribution>, KernelError> {
        if x.dim() != net.n_species() {
            return Err(KernelError::DimensionMismatch {
                expected: net.n_species(),
                found: x.dim(),
            });
        }
        let m = net.n_reactions();
        if !x.is_nonnegative() {
            return Ok(vec![CountDistribution::DeterministicZero; m]);
        }
        match &self.rule {
            Rule::Explicit { rate_scale } => Ok((0..m)
                .map(|j| CountDistribution::Poisson {
                    lambda: CountParam::Linear {
                        slope: rate_scale * net.propensity(j, x),
                    },
                })
                .collect()),
            Rule::Midpoint => {
                let x_mid = midpoint_state(net, x, tau);
                Ok((0..m)
                    .map(|j| CountDistribution::Poisson {
                        lambda: CountParam::Linear {
                            slope: net.propensity(j, &x_mid),
                        },
                    })
                    .collect())
            }
            Rule::Remm { roles, rates } => Ok(remm_laws(m, roles, *rates, x)),
        }
    }
}

/// `round(x + tau/2 * sum_j nu_j a_j(x))`, ties toward `x`.
pub fn midpoint_state(net: &ReactionNetwork, x: &LatticeState, tau: f64) -> LatticeState {
    let mut drift = vec![0.0; net.n_species()];
    for j in 0..net.n_reactions() {
        let a = net.propensity(j, x);
        if a == 0.0 {
            continue;
        }
        for (d, &v) in drift.iter_mut().zip(net.nu(j)) {
            *d += v as f64 * a;
        }
    }
    let coords = x
        .coords()
        .iter()
        .zip(&drift)
        .map(|(&xi, &d)| xi + round_toward_zero_on_tie(0.5 * tau * d))
        .collect();
    LatticeState::new(coords)
}

fn round_toward_zero_on_tie(d: f64) -> i64 {
    let mag = d.abs();
    let floor = mag.floor();
    let r = if mag - floor > 0.5 { floor + 1.0 } else { floor };
    (r as i64) * if d < 0.0 { -1 } else { 1 }
}

fn remm_laws(m: usize, roles: &RemmRoles, rates: [f64; 4], x: &LatticeState) -> Vec<CountDistribution> {
    let [c1, c2, c3, c4] = rates;
    let xa = x.coords()[roles.species_a];
    let xb = x.coords()[roles.species_b];
    let xc = x.coords()[roles.species_c];
    let xs = x.coords()[roles.species_s];
    let lo = xa.min(xb);
    let hi = xa.max(xb);
    let c1_mod = if lo == 0 {
        (hi + 1) as f64 * c1
    } else {
        hi as f64 * c1
    };
    let total = c1_mod + c2;
    let (p1, p2) = if total > 0.0 {
        (
            CountParam::Saturating {
                amplitude: c1_mod / total,
                rate: total,
            },
            CountParam::Saturating {
                amplitude: c2 / total,
                rate: total,
            },
        )
    } else {
        (CountParam::ZERO, CountParam::ZERO)
    };
    let (lambda3, p4) = if c4 > 0.0 {
        (
            CountParam::Saturating {
                amplitude: c3 * xs as f64 / c4,
                rate: c4,
            },
            CountParam::Saturating {
                amplitude: 1.0,
                rate: c4,
            },
        )
    } else {
        // c4 -> 0 limit of the same formulas.
        (
            CountParam::Linear {
                slope: c3 * xs as f64,
            },
            CountParam::ZERO,
        )
    };
    let mut laws = vec![CountDistribution::DeterministicZero; m];
    laws[roles.forward] = CountDistribution::Binomial {
        trials: lo as u64,
        p: p1,
    };
    laws[roles.reverse] = CountDistribution::Binomial {
        trials: xc as u64,
        p: p2,
    };
    laws[roles.birth] = CountDistribution::Poisson { lambda: lambda3 };
    laws[roles.death] = CountDistribution::Binomial {
        trials: xs as u64,
        p: p4,
    };
    laws
}

fn detect_remm_roles(
    net: &ReactionNetwork,
    overrides: &RemmOverrides,
) -> Result<RemmRoles, KernelError> {
    let not_coverable = |msg: String| KernelError::NotCoverable(msg);
    if net.n_reactions() != 4 {
        return Err(not_coverable(format!(
            "REMM needs exactly 4 reactions, network has {}",
            net.n_reactions()
        )));
    }
    for (j, r) in net.reactions().iter().enumerate() {
        match &r.propensity {
            PropensitySpec::MassAction { reactants, .. } if *reactants == r.reactants => {}
            _ => {
                return Err(not_coverable(format!(
                    "reaction {j} (`{}`) is not mass action on its reactant complex",
                    r.id
                )))
            }
        }
    }
    let is_forward = |j: usize| {
        let r = net.reaction(j);
        r.reactants.len() == 2
            && r.reactants.iter().all(|&(_, m)| m == 1)
            && r.products.len() == 1
            && r.products[0].1 == 1
            && r.reactants.iter().all(|&(i, _)| i != r.products[0].0)
    };
    let pick = |given: Option<usize>, pred: &dyn Fn(usize) -> bool, role: &str| {
        match given {
            Some(j) if j < 4 && pred(j) => Ok(j),
            Some(j) => Err(not_coverable(format!("reaction {j} cannot play the {role} role"))),
            None => {
                let found: Vec<usize> = (0..4).filter(|&j| pred(j)).collect();
                match found.as_slice() {
                    [j] => Ok(*j),
                    [] => Err(not_coverable(format!("no reaction fits the {role} role"))),
                    _ => Err(not_coverable(format!(
                        "reactions {found:?} all fit the {role} role; pass an override"
                    ))),
                }
            }
        }
    };
    let forward = pick(overrides.forward, &is_forward, "forward binding")?;
    let f = net.reaction(forward);
    let (a, b, c) = (f.reactants[0].0, f.reactants[1].0, f.products[0].0);
    let is_reverse = |j: usize| {
        let r = net.reaction(j);
        j != forward && r.reactants == vec![(c, 1)] && r.products == f.reactants
    };
    let reverse = pick(overrides.reverse, &is_reverse, "reverse unbinding")?;
    let is_birth = |j: usize| {
        let r = net.reaction(j);
        r.reactants.len() == 1
            && r.reactants[0].1 == 1
            && (r.reactants[0].0 == a || r.reactants[0].0 == b)
            && r.products == vec![(r.reactants[0].0, 2)]
    };
    let birth = pick(overrides.birth, &is_birth, "birth")?;
    let s = net.reaction(birth).reactants[0].0;
    let is_death = |j: usize| {
        let r = net.reaction(j);
        r.reactants == vec![(s, 1)] && r.products.is_empty()
    };
    let death = pick(overrides.death, &is_death, "death")?;
    Ok(RemmRoles {
        forward,
        reverse,
        birth,
        death,
        species_a: a,
        species_b: b,
        species_c: c,
        species_s: s,
    })
}
