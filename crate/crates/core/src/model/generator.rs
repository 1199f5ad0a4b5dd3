use serde::Serialize;

use super::ReactionNetwork;
use crate::pmf::{LatticeState, SparsePmf};

/// Row `Q(x, .)` of the generator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorRow {
    /// `-a_0(x)`.
    pub diagonal: f64,
    /// `(x + nu_j, a_j(x))` for every channel with `a_j(x) > 0`, in channel order.
    pub off_diagonal: Vec<(LatticeState, f64)>,
}

impl ReactionNetwork {
    /// The generator row at `x`; channels with zero propensity are omitted.
    pub fn generator_row(&self, x: &LatticeState) -> GeneratorRow {
        let mut off_diagonal = Vec::with_capacity(self.n_reactions());
        let mut a0 = 0.0;
        for j in 0..self.n_reactions() {
            let a = self.propensity(j, x);
            a0 += a;
            if a > 0.0 {
                off_diagonal.push((x.shifted(self.nu(j), 1), a));
            }
        }
        GeneratorRow {
            diagonal: -a0,
            off_diagonal,
        }
    }

    /// `(Q g)(y) = sum_x Q(x, y) g(x)`: the forward-equation action on a
    /// finitely supported measure. The result is always signed.
    pub fn apply_generator(&self, g: &SparsePmf) -> SparsePmf {
        let mut out = SparsePmf::zero(true);
        for (x, w) in g.iter() {
            if w == 0.0 {
                continue;
            }
            let row = self.generator_row(x);
            out.add_ref(x, row.diagonal * w);
            for (y, rate) in row.off_diagonal {
                out.add(y, rate * w);
            }
        }
        out
    }
}
