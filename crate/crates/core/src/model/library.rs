//! Small networks used throughout the tests, examples and CLI defaults.

use super::{Monomial, PropensitySpec, Reaction, ReactionNetwork};

/// `S1 + S2 -> S3`, `S3 -> S1 + S2`, `S2 -> 2 S2`, `S2 -> 0` with mass-action
/// rates `c`. Species `S1` and `S3` are bounded (`x1 + x3` is conserved) while
/// `S2` is not.
pub fn binding_birth_death(c: [f64; 4]) -> ReactionNetwork {
    ReactionNetwork::new(
        vec!["S1".into(), "S2".into(), "S3".into()],
        vec![
            Reaction::mass_action("bind", vec![(0, 1), (1, 1)], vec![(2, 1)], c[0]),
            Reaction::mass_action("unbind", vec![(2, 1)], vec![(0, 1), (1, 1)], c[1]),
            Reaction::mass_action("birth", vec![(1, 1)], vec![(1, 2)], c[2]),
            Reaction::mass_action("death", vec![(1, 1)], vec![], c[3]),
        ],
    )
    .expect("built-in network is valid")
}

/// `A -> 0` at rate `c`.
pub fn decay(c: f64) -> ReactionNetwork {
    ReactionNetwork::new(
        vec!["A".into()],
        vec![Reaction::mass_action("decay", vec![(0, 1)], vec![], c)],
    )
    .expect("built-in network is valid")
}

/// `0 -> A` at constant rate `c`.
pub fn pure_birth(c: f64) -> ReactionNetwork {
    ReactionNetwork::new(
        vec!["A".into()],
        vec![Reaction::mass_action("birth", vec![], vec![(0, 1)], c)],
    )
    .expect("built-in network is valid")
}

/// `A -> 0` with a state-independent propensity `c`; it leaves `Z_+` from `x = 0`.
pub fn constant_rate_decay(c: f64) -> ReactionNetwork {
    ReactionNetwork::new(
        vec!["A".into()],
        vec![Reaction::new(
            "leak",
            vec![(0, 1)],
            vec![],
            PropensitySpec::polynomial(vec![Monomial::new(c, vec![])]),
        )],
    )
    .expect("built-in network is valid")
}

/// `0 -> A` with propensity `c x^2`, a superlinear birth that explodes under
/// explicit tau-leaping moment growth.
pub fn superlinear_birth(c: f64) -> ReactionNetwork {
    ReactionNetwork::new(
        vec!["A".into()],
        vec![Reaction::new(
            "autocatalysis",
            vec![],
            vec![(0, 1)],
            PropensitySpec::polynomial(vec![Monomial::new(c, vec![(0, 2)])]),
        )],
    )
    .expect("built-in network is valid")
}
