use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::model::ReactionNetwork;
use crate::pmf::{LatticeState, SparsePmf};
use crate::rng::{stream_rng, SimRng};

/// Jumps allowed per path before the process is treated as exploding.
pub const DEFAULT_MAX_JUMPS: u64 = 100_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SsaError {
    #[error("more than {max_jumps} jumps before t = {time}; the process may be explosive")]
    ExplosionSuspected { max_jumps: u64, time: f64 },
    #[error("invalid final time {0}")]
    InvalidTime(f64),
    #[error("initial state has dimension {found}, network has {expected} species")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite total propensity {a0} at state {state}")]
    NonFinitePropensity { a0: f64, state: LatticeState },
}

/// A sample path on `[0, T]`, right-continuous with left limits.
///
/// `states[0]` is the initial state and `states[k + 1]` is entered at
/// `jump_times[k]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SsaPath {
    pub t_final: f64,
    pub jump_times: Vec<f64>,
    pub states: Vec<LatticeState>,
    /// Per-channel firing counts `R(T)`.
    pub reaction_counts: Vec<u64>,
}

impl SsaPath {
    /// State at time `t` (the last state entered at or before `t`).
    pub fn state_at(&self, t: f64) -> &LatticeState {
        let k = self.jump_times.partition_point(|&s| s <= t);
        &self.states[k]
    }

    pub fn final_state(&self) -> &LatticeState {
        self.states.last().expect("path has an initial state")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsaOptions {
    pub max_jumps: u64,
}

impl Default for SsaOptions {
    fn default() -> Self {
        Self {
            max_jumps: DEFAULT_MAX_JUMPS,
        }
    }
}

fn validate(net: &ReactionNetwork, x0: &LatticeState, t_final: f64) -> Result<(), SsaError> {
    if !t_final.is_finite() || t_final < 0.0 {
        return Err(SsaError::InvalidTime(t_final));
    }
    if x0.dim() != net.n_species() {
        return Err(SsaError::DimensionMismatch {
            expected: net.n_species(),
            found: x0.dim(),
        });
    }
    Ok(())
}

/// Direct-method driver; `on_jump(time, channel, new_state)` sees every jump.
fn run<R, F>(
    net: &ReactionNetwork,
    x0: &LatticeState,
    t_final: f64,
    rng: &mut R,
    opts: SsaOptions,
    mut on_jump: F,
) -> Result<(LatticeState, Vec<u64>), SsaError>
where
    R: Rng + ?Sized,
    F: FnMut(f64, usize, &LatticeState),
{
    validate(net, x0, t_final)?;
    let m = net.n_reactions();
    let mut x = x0.clone();
    let mut t = 0.0;
    let mut counts = vec![0u64; m];
    let mut rates = vec![0.0; m];
    let mut jumps = 0u64;
    loop {
        let mut a0 = 0.0;
        for (j, r) in rates.iter_mut().enumerate() {
            *r = net.propensity(j, &x);
            a0 += *r;
        }
        if a0 <= 0.0 {
            break;
        }
        if !a0.is_finite() {
            return Err(SsaError::NonFinitePropensity { a0, state: x });
        }
        let e: f64 = Exp1.sample(rng);
        t += e / a0;
        if t > t_final {
            break;
        }
        if jumps >= opts.max_jumps {
            return Err(SsaError::ExplosionSuspected {
                max_jumps: opts.max_jumps,
                time: t,
            });
        }
        let target = rng.random::<f64>() * a0;
        let mut acc = 0.0;
        // Fall back to the last channel with positive rate if rounding leaves
        // `target` just above the cumulative sum.
        let mut channel = rates.iter().rposition(|&r| r > 0.0).unwrap_or(0);
        for (j, &r) in rates.iter().enumerate() {
            acc += r;
            if target < acc && r > 0.0 {
                channel = j;
                break;
            }
        }
        x.shift_in_place(net.nu(channel), 1);
        counts[channel] += 1;
        jumps += 1;
        on_jump(t, channel, &x);
    }
    Ok((x, counts))
}

/// Samples one exact path of the chemical process on `[0, t_final]`.
pub fn ssa_simulate_with_rng<R: Rng + ?Sized>(
    net: &ReactionNetwork,
    x0: &LatticeState,
    t_final: f64,
    rng: &mut R,
    opts: SsaOptions,
) -> Result<SsaPath, SsaError> {
    let mut jump_times = Vec::new();
    let mut states = vec![x0.clone()];
    let (_, reaction_counts) = run(net, x0, t_final, rng, opts, |t, _, x| {
        jump_times.push(t);
        states.push(x.clone());
    })?;
    Ok(SsaPath {
        t_final,
        jump_times,
        states,
        reaction_counts,
    })
}

/// [`ssa_simulate_with_rng`] on stream 0 of `seed`.
pub fn ssa_simulate(
    net: &ReactionNetwork,
    x0: &LatticeState,
    t_final: f64,
    seed: u64,
) -> Result<SsaPath, SsaError> {
    ssa_simulate_with_rng(net, x0, t_final, &mut stream_rng(seed, 0), SsaOptions::default())
}

/// End state and reaction counts of one path, without recording the path.
pub fn ssa_endpoint<R: Rng + ?Sized>(
    net: &ReactionNetwork,
    x0: &LatticeState,
    t_final: f64,
    rng: &mut R,
    opts: SsaOptions,
) -> Result<(LatticeState, Vec<u64>), SsaError> {
    run(net, x0, t_final, rng, opts, |_, _, _| {})
}

/// `n` independent end states; sample `i` uses stream `i` of `root_seed`.
pub fn ssa_ensemble(
    net: &ReactionNetwork,
    x0: &LatticeState,
    t_final: f64,
    n: usize,
    root_seed: u64,
    opts: SsaOptions,
) -> Result<Vec<LatticeState>, SsaError> {
    validate(net, x0, t_final)?;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng: SimRng = stream_rng(root_seed, i as u64);
            ssa_endpoint(net, x0, t_final, &mut rng, opts).map(|(x, _)| x)
        })
        .collect()
}

/// Empirical distribution of a sample.
pub fn empirical_pmf(samples: &[LatticeState]) -> SparsePmf {
    let mut pmf = SparsePmf::zero(false);
    if samples.is_empty() {
        return pmf;
    }
    let w = 1.0 / samples.len() as f64;
    for x in samples {
        pmf.add_ref(x, w);
    }
    pmf
}
