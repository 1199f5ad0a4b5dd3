use std::collections::BTreeMap;

use serde::Serialize;

use crate::model::ReactionNetwork;
use crate::pmf::LatticeState;
use crate::tauleap::{KernelError, TauLeapKernel};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyResidual {
    pub order: u32,
    pub counts: Vec<u64>,
    /// `d^i/dtau^i phi~(0, x; k)` of the kernel.
    pub method: f64,
    /// `Q~^i(x; 0, k)` of the exact count process.
    pub exact: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub kernel: String,
    pub state: LatticeState,
    pub q: u32,
    pub residuals: Vec<ConsistencyResidual>,
    pub max_residual: f64,
    pub tolerance: f64,
    /// `tolerance * (1 + a_0(x)^q)`.
    pub threshold: f64,
    pub pass: bool,
}

/// Compares `tau`-derivatives of the count law at 0 with powers of the count
/// generator `Q~`, for orders `1..=q` and all count vectors with `|k| <= q + 1`.
pub fn consistency_check(
    kernel: &TauLeapKernel,
    net: &ReactionNetwork,
    x: &LatticeState,
    q: u32,
    tolerance: f64,
) -> Result<ConsistencyReport, KernelError> {
    if x.dim() != net.n_species() {
        return Err(KernelError::DimensionMismatch {
            expected: net.n_species(),
            found: x.dim(),
        });
    }
    let m = net.n_reactions();
    let counts = count_vectors(m, q as u64 + 1);
    let mut residuals = Vec::new();
    // Row `0` of `Q~^i`, starting from `i = 0`.
    let mut row: BTreeMap<Vec<u64>, f64> = BTreeMap::from([(vec![0; m], 1.0)]);
    for order in 1..=q {
        row = apply_count_generator(net, x, &row);
        for k in &counts {
            let method = kernel.count_pmf_derivative(net, x, order, k)?;
            let exact = row.get(k).copied().unwrap_or(0.0);
            residuals.push(ConsistencyResidual {
                order,
                counts: k.clone(),
                method,
                exact,
                residual: (method - exact).abs(),
            });
        }
    }
    let max_residual = residuals.iter().map(|r| r.residual).fold(0.0, f64::max);
    let threshold = tolerance * (1.0 + net.total_propensity(x).powi(q as i32));
    Ok(ConsistencyReport {
        kernel: kernel.name().to_owned(),
        state: x.clone(),
        q,
        residuals,
        max_residual,
        tolerance,
        threshold,
        pass: max_residual <= threshold,
    })
}

/// `v Q~`, where `Q~(k, k + e_j) = a_j(x + nu k)` and `Q~(k, k) = -a_0(x + nu k)`.
fn apply_count_generator(
    net: &ReactionNetwork,
    x: &LatticeState,
    v: &BTreeMap<Vec<u64>, f64>,
) -> BTreeMap<Vec<u64>, f64> {
    let mut out = BTreeMap::new();
    for (k, &w) in v {
        let y = net.apply_counts(x, k);
        let a = net.propensities(&y);
        let a0: f64 = a.iter().sum();
        *out.entry(k.clone()).or_insert(0.0) -= w * a0;
        for (j, &aj) in a.iter().enumerate() {
            if aj != 0.0 {
                let mut next = k.clone();
                next[j] += 1;
                *out.entry(next).or_insert(0.0) += w * aj;
            }
        }
    }
    out
}

/// All `k` in `Z_+^m` with `sum k <= total`, in lexicographic order.
fn count_vectors(m: usize, total: u64) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    let mut k = vec![0u64; m];
    fn rec(k: &mut Vec<u64>, i: usize, left: u64, out: &mut Vec<Vec<u64>>) {
        if i == k.len() {
            out.push(k.clone());
            return;
        }
        for v in 0..=left {
            k[i] = v;
            rec(k, i + 1, left - v, out);
        }
        k[i] = 0;
    }
    rec(&mut k, 0, total, &mut out);
    out
}
