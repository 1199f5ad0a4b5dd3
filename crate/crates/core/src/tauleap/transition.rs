//! Sampling and exact distributional propagation through a kernel.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::count::ConcreteCount;
use super::{KernelError, Mesh, TauLeapKernel};
use crate::model::ReactionNetwork;
use crate::pmf::{LatticeState, SparsePmf};

/// Highest `tau`-derivative order served by [`TauLeapKernel::count_pmf_derivative`].
pub const MAX_DERIVATIVE_ORDER: u32 = 8;

/// Limits for enumerating count vectors and propagated supports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnumerationOptions {
    /// Mass each enumeration may leave out, split evenly over the reactions.
    pub mass_tolerance: f64,
    /// Cap on the number of count vectors in one product box.
    pub max_box: usize,
    /// Cap on the support size of a propagated pmf.
    pub max_support: usize,
}

impl EnumerationOptions {
    pub fn with_tolerance(mass_tolerance: f64) -> Self {
        Self {
            mass_tolerance,
            ..Self::default()
        }
    }
}

impl Default for EnumerationOptions {
    fn default() -> Self {
        Self {
            mass_tolerance: 1e-12,
            max_box: 20_000_000,
            max_support: 5_000_000,
        }
    }
}

/// `phi(tau, x, .)` restricted to the enumerated count box.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionPmf {
    pub pmf: SparsePmf,
    /// Probability of the enumerated count box, `>= 1 - mass_tolerance`.
    pub captured_mass: f64,
}

/// Result of propagating a measure through a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct PushForward {
    pub pmf: SparsePmf,
    /// Sum over steps and source states of `|weight| * (1 - captured mass)`.
    pub mass_loss: f64,
}

/// Tau-leap sample path: `states[i]` is held on `[t_i, t_{i+1})`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TauLeapPath {
    pub times: Vec<f64>,
    pub states: Vec<LatticeState>,
}

impl TauLeapPath {
    pub fn state_at(&self, t: f64) -> &LatticeState {
        let k = self.times.partition_point(|&s| s <= t);
        &self.states[k.saturating_sub(1)]
    }

    pub fn final_state(&self) -> &LatticeState {
        self.states.last().expect("path has an initial state")
    }
}

fn check_tau(tau: f64) -> Result<(), KernelError> {
    if tau >= 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(KernelError::InvalidTau(tau))
    }
}

impl TauLeapKernel {
    fn concrete_laws(
        &self,
        net: &ReactionNetwork,
        x: &LatticeState,
        tau: f64,
    ) -> Result<Vec<ConcreteCount>, KernelError> {
        self.count_distributions(net, x, tau)?
            .iter()
            .enumerate()
            .map(|(j, d)| d.at(tau, j))
            .collect()
    }

    /// One tau-leap update from `x`.
    pub fn step<R: Rng + ?Sized>(
        &self,
        net: &ReactionNetwork,
        x: &LatticeState,
        tau: f64,
        rng: &mut R,
    ) -> Result<LatticeState, KernelError> {
        check_tau(tau)?;
        if tau == 0.0 || !x.is_nonnegative() {
            if x.dim() != net.n_species() {
                return Err(KernelError::DimensionMismatch {
                    expected: net.n_species(),
                    found: x.dim(),
                });
            }
            return Ok(x.clone());
        }
        let laws = self.concrete_laws(net, x, tau)?;
        let mut y = x.clone();
        for (j, law) in laws.iter().enumerate() {
            let k = law.sample(rng);
            if k > 0 {
                y.shift_in_place(net.nu(j), k as i64);
            }
        }
        Ok(y)
    }

    /// Tau-leap solution on `mesh` started from `x0`.
    pub fn simulate_mesh<R: Rng + ?Sized>(
        &self,
        net: &ReactionNetwork,
        x0: &LatticeState,
        mesh: &Mesh,
        rng: &mut R,
    ) -> Result<TauLeapPath, KernelError> {
        let mut states = Vec::with_capacity(mesh.n_steps() + 1);
        states.push(x0.clone());
        let mut x = x0.clone();
        for tau in mesh.steps() {
            x = self.step(net, &x, tau, rng)?;
            states.push(x.clone());
        }
        Ok(TauLeapPath {
            times: mesh.points().to_vec(),
            states,
        })
    }

    /// `phi~(tau, x; k) = prod_j P(K_j = k_j)`.
    pub fn count_pmf(
        &self,
        net: &ReactionNetwork,
        x: &LatticeState,
        tau: f64,
        k: &[u64],
    ) -> Result<f64, KernelError> {
        check_tau(tau)?;
        check_counts(net, k)?;
        let laws = self.concrete_laws(net, x, tau)?;
        Ok(laws.iter().zip(k).map(|(law, &kj)| law.pmf(kj)).product())
    }

    /// `d^i/dtau^i phi~(tau, x; k)` at `tau = 0`, exact via truncated Taylor
    /// series of the product of marginal laws.
    pub fn count_pmf_derivative(
        &self,
        net: &ReactionNetwork,
        x: &LatticeState,
        order: u32,
        k: &[u64],
    ) -> Result<f64, KernelError> {
        if order > MAX_DERIVATIVE_ORDER {
            return Err(KernelError::UnsupportedOrder {
                order,
                max: MAX_DERIVATIVE_ORDER,
            });
        }
        check_counts(net, k)?;
        let laws = self.count_distributions(net, x, 0.0)?;
        let n = order as usize;
        let mut acc = vec![0.0; n + 1];
        acc[0] = 1.0;
        for (law, &kj) in laws.iter().zip(k) {
            // A count k_j contributes O(tau^k_j); beyond the order it vanishes.
            if kj > order as u64 && !matches!(law, super::CountDistribution::DeterministicZero) {
                return Ok(0.0);
            }
            acc = super::series::mul(&acc, &law.pmf_taylor(kj, n));
        }
        let fact: f64 = (1..=n).map(|i| i as f64).product();
        Ok(acc[n] * fact)
    }

    /// `phi(tau, x, .)`: counts enumerated over a product box holding at
    /// least `1 - mass_tolerance` of the count law, aggregated by `x + nu k`.
    pub fn state_transition_pmf(
        &self,
        net: &ReactionNetwork,
        x: &LatticeState,
        tau: f64,
        opts: &EnumerationOptions,
    ) -> Result<TransitionPmf, KernelError> {
        let (entries, captured_mass) = self.transition_entries(net, x, tau, opts)?;
        Ok(TransitionPmf {
            pmf: SparsePmf::from_entries(entries, false),
            captured_mass,
        })
    }

    fn transition_entries(
        &self,
        net: &ReactionNetwork,
        x: &LatticeState,
        tau: f64,
        opts: &EnumerationOptions,
    ) -> Result<(Vec<(LatticeState, f64)>, f64), KernelError> {
        check_tau(tau)?;
        if !(opts.mass_tolerance > 0.0 && opts.mass_tolerance < 1.0) {
            return Err(KernelError::InvalidTolerance(opts.mass_tolerance));
        }
        if x.dim() != net.n_species() {
            return Err(KernelError::DimensionMismatch {
                expected: net.n_species(),
                found: x.dim(),
            });
        }
        if tau == 0.0 || !x.is_nonnegative() {
            return Ok((vec![(x.clone(), 1.0)], 1.0));
        }
        let laws = self.concrete_laws(net, x, tau)?;
        let m = laws.len();
        let per_reaction = opts.mass_tolerance / (2.0 * m.max(1) as f64);
        let tables: Vec<Vec<f64>> = laws.iter().map(|l| l.truncated_table(per_reaction)).collect();
        let captured_mass: f64 = tables.iter().map(|t| t.iter().sum::<f64>()).product();
        let box_size = tables
            .iter()
            .try_fold(1usize, |acc, t| acc.checked_mul(t.len()))
            .unwrap_or(usize::MAX);
        if box_size > opts.max_box {
            return Err(KernelError::EnumerationTooLarge {
                size: box_size,
                cap: opts.max_box,
            });
        }
        // Reactions that cannot fire are dropped from the enumeration.
        let active: Vec<usize> = (0..m).filter(|&j| tables[j].len() > 1).collect();
        let dim = x.dim();
        let mut lo = x.coords().to_vec();
        let mut hi = x.coords().to_vec();
        for &j in &active {
            let kmax = (tables[j].len() - 1) as i64;
            for (i, &v) in net.nu(j).iter().enumerate() {
                if v < 0 {
                    lo[i] += v * kmax;
                } else {
                    hi[i] += v * kmax;
                }
            }
        }
        let widths: Vec<usize> = (0..dim).map(|i| (hi[i] - lo[i] + 1) as usize).collect();
        let dense_len = widths.iter().try_fold(1usize, |acc, &w| acc.checked_mul(w));
        let base_weight: f64 = (0..m)
            .filter(|j| !active.contains(j))
            .map(|j| tables[j][0])
            .product();
        // Index offset of one firing of each active reaction in the dense layout.
        let strides: Vec<i64> = {
            let mut s = vec![1i64; dim];
            for i in (0..dim.saturating_sub(1)).rev() {
                s[i] = s[i + 1] * widths[i + 1] as i64;
            }
            s
        };
        let shift_of = |j: usize| -> i64 {
            net.nu(j)
                .iter()
                .zip(&strides)
                .map(|(&v, &s)| v * s)
                .sum()
        };
        let shifts: Vec<i64> = active.iter().map(|&j| shift_of(j)).collect();
        let origin: i64 = (0..dim).map(|i| (x.coords()[i] - lo[i]) * strides[i]).sum();

        let decode = |mut idx: usize| -> LatticeState {
            let mut coords = vec![0i64; dim];
            for i in (0..dim).rev() {
                coords[i] = lo[i] + (idx % widths[i]) as i64;
                idx /= widths[i];
            }
            LatticeState::new(coords)
        };

        let mut entries = Vec::new();
        match dense_len {
            Some(len) if len <= 4 * box_size.max(1024) => {
                let mut dense = vec![0.0; len];
                enumerate(&active, &tables, &shifts, 0, origin, base_weight, &mut |idx, w| {
                    dense[idx as usize] += w
                });
                for (idx, &w) in dense.iter().enumerate() {
                    if w != 0.0 {
                        entries.push((decode(idx), w));
                    }
                }
            }
            _ => {
                // Sparse accumulation keyed by the dense index; sorted afterwards.
                let mut acc: HashMap<i64, f64> = HashMap::new();
                enumerate(&active, &tables, &shifts, 0, origin, base_weight, &mut |idx, w| {
                    *acc.entry(idx).or_insert(0.0) += w
                });
                let mut keys: Vec<(i64, f64)> = acc.into_iter().filter(|&(_, w)| w != 0.0).collect();
                keys.sort_by_key(|&(k, _)| k);
                entries.extend(keys.into_iter().map(|(k, w)| (decode(k as usize), w)));
            }
        }
        Ok((entries, captured_mass))
    }

    /// `phi(tau_n) ... phi(tau_1) p`, exact up to the enumeration cut.
    ///
    /// Source states are expanded in parallel and merged in support order, so
    /// the result does not depend on the thread schedule.
    pub fn push_forward(
        &self,
        net: &ReactionNetwork,
        p: &SparsePmf,
        mesh: &Mesh,
        opts: &EnumerationOptions,
    ) -> Result<PushForward, KernelError> {
        let mut current = p.clone();
        let mut mass_loss = 0.0;
        for tau in mesh.steps() {
            let sources: Vec<(&LatticeState, f64)> =
                current.iter().filter(|&(_, w)| w != 0.0).collect();
            let expanded: Vec<(Vec<(LatticeState, f64)>, f64)> = sources
                .par_iter()
                .map(|&(x, _)| self.transition_entries(net, x, tau, opts))
                .collect::<Result<_, _>>()?;
            let mut next = SparsePmf::zero(current.is_signed());
            for ((_, w), (entries, captured)) in sources.iter().zip(expanded) {
                mass_loss += w.abs() * (1.0 - captured).max(0.0);
                for (y, q) in entries {
                    next.add(y, w * q);
                }
            }
            if next.support_len() > opts.max_support {
                return Err(KernelError::SupportTooLarge {
                    size: next.support_len(),
                    cap: opts.max_support,
                });
            }
            current = next;
        }
        Ok(PushForward {
            pmf: current,
            mass_loss,
        })
    }
}

fn enumerate<F: FnMut(i64, f64)>(
    active: &[usize],
    tables: &[Vec<f64>],
    shifts: &[i64],
    depth: usize,
    idx: i64,
    weight: f64,
    sink: &mut F,
) {
    if depth == active.len() {
        sink(idx, weight);
        return;
    }
    let table = &tables[active[depth]];
    for (k, &q) in table.iter().enumerate() {
        let w = weight * q;
        if w == 0.0 {
            continue;
        }
        enumerate(active, tables, shifts, depth + 1, idx + shifts[depth] * k as i64, w, sink);
    }
}

fn check_counts(net: &ReactionNetwork, k: &[u64]) -> Result<(), KernelError> {
    if k.len() != net.n_reactions() {
        return Err(KernelError::CountLengthMismatch {
            expected: net.n_reactions(),
            found: k.len(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::library;
    use crate::rng::stream_rng;
    use crate::tauleap::RemmOverrides;

    fn all_kernels(net: &ReactionNetwork) -> Vec<TauLeapKernel> {
        vec![
            TauLeapKernel::explicit(),
            TauLeapKernel::midpoint(),
            TauLeapKernel::remm(net, &RemmOverrides::default()).unwrap(),
        ]
    }

    fn poisson_pmf(lambda: f64, k: u64) -> f64 {
        let mut p = (-lambda).exp();
        for i in 1..=k {
            p *= lambda / i as f64;
        }
        p
    }

    #[test]
    fn zero_step_is_identity() {
        let net = library::binding_birth_death([0.1, 0.5, 0.3, 0.4]);
        let x = LatticeState::from([5, 5, 5]);
        let opts = EnumerationOptions::default();
        for k in all_kernels(&net) {
            let t = k.state_transition_pmf(&net, &x, 0.0, &opts).unwrap();
            assert_eq!(t.pmf, SparsePmf::delta(x.clone()));
            assert_eq!(k.step(&net, &x, 0.0, &mut stream_rng(1, 0)).unwrap(), x);
            assert_eq!(k.count_pmf(&net, &x, 0.0, &[0; 4]).unwrap(), 1.0);
            assert_eq!(k.count_pmf(&net, &x, 0.0, &[0, 1, 0, 0]).unwrap(), 0.0);
        }
    }

    #[test]
    fn frozen_state_stays_put() {
        let net = library::binding_birth_death([0.1, 0.5, 0.3, 0.4]);
        let x = LatticeState::from([2, -1, 4]);
        let mesh = Mesh::uniform(1.0, 5).unwrap();
        for k in all_kernels(&net) {
            assert_eq!(k.step(&net, &x, 0.3, &mut stream_rng(2, 0)).unwrap(), x);
            let pf = k
                .push_forward(&net, &SparsePmf::delta(x.clone()), &mesh, &EnumerationOptions::default())
                .unwrap();
            assert_eq!(pf.pmf, SparsePmf::delta(x.clone()));
            assert_eq!(pf.mass_loss, 0.0);
        }
    }

    #[test]
    fn explicit_decay_count_pmf() {
        let net = library::decay(1.0);
        let k = TauLeapKernel::explicit();
        let p = k.count_pmf(&net, &LatticeState::from([10]), 0.1, &[1]).unwrap();
        assert!((p - (-1.0f64).exp()).abs() < 1e-15);
        assert!((p - 0.3679).abs() < 1e-4);
    }

    #[test]
    fn explicit_decay_transition_is_shifted_poisson() {
        let net = library::decay(1.0);
        let x = LatticeState::from([10]);
        let t = TauLeapKernel::explicit()
            .state_transition_pmf(&net, &x, 0.1, &EnumerationOptions::with_tolerance(1e-12))
            .unwrap();
        assert!(t.captured_mass >= 1.0 - 1e-12);
        for k in 0..12u64 {
            let want = poisson_pmf(1.0, k);
            let got = t.pmf.get(&LatticeState::from([10 - k as i64]));
            assert!((got - want).abs() < 1e-15, "k = {k}");
        }
        // Overshoot below zero is kept, not clipped.
        assert!(t.pmf.get(&LatticeState::from([-1])) > 0.0);
    }

    #[test]
    fn remm_transition_captures_mass() {
        let net = library::binding_birth_death([1.0; 4]);
        let kernel = TauLeapKernel::remm(&net, &RemmOverrides::default()).unwrap();
        for tol in [1e-3, 1e-8, 1e-12] {
            let t = kernel
                .state_transition_pmf(&net, &LatticeState::from([1, 1, 1]), 0.2, &EnumerationOptions::with_tolerance(tol))
                .unwrap();
            assert!(t.pmf.total_mass() >= 1.0 - tol);
            assert!((t.pmf.total_mass() - t.captured_mass).abs() < 1e-14);
        }
    }

    #[test]
    fn count_pmf_sums_to_one_over_box() {
        let net = library::binding_birth_death([0.1, 0.5, 0.3, 0.4]);
        let x = LatticeState::from([3, 4, 2]);
        for kernel in all_kernels(&net) {
            let mut total = 0.0;
            for k0 in 0..12 {
                for k1 in 0..12 {
                    for k2 in 0..12 {
                        for k3 in 0..12 {
                            total += kernel.count_pmf(&net, &x, 0.25, &[k0, k1, k2, k3]).unwrap();
                        }
                    }
                }
            }
            assert!((total - 1.0).abs() < 1e-9, "{}: {total}", kernel.name());
        }
    }

    #[test]
    fn explicit_first_derivatives() {
        let net = library::binding_birth_death([0.1, 0.5, 0.3, 0.4]);
        let x = LatticeState::from([3, 4, 2]);
        let kernel = TauLeapKernel::explicit();
        let a = net.propensities(&x);
        assert_eq!(kernel.count_pmf_derivative(&net, &x, 0, &[0; 4]).unwrap(), 1.0);
        assert_eq!(kernel.count_pmf_derivative(&net, &x, 0, &[1, 0, 0, 0]).unwrap(), 0.0);
        let d0 = kernel.count_pmf_derivative(&net, &x, 1, &[0; 4]).unwrap();
        assert!((d0 + net.total_propensity(&x)).abs() < 1e-12);
        for j in 0..4 {
            let mut k = [0u64; 4];
            k[j] = 1;
            let d = kernel.count_pmf_derivative(&net, &x, 1, &k).unwrap();
            assert!((d - a[j]).abs() < 1e-12);
        }
        assert_eq!(kernel.count_pmf_derivative(&net, &x, 1, &[1, 1, 0, 0]).unwrap(), 0.0);
        assert_eq!(kernel.count_pmf_derivative(&net, &x, 1, &[0, 2, 0, 0]).unwrap(), 0.0);
        assert!(matches!(
            kernel.count_pmf_derivative(&net, &x, MAX_DERIVATIVE_ORDER + 1, &[0; 4]),
            Err(KernelError::UnsupportedOrder { .. })
        ));
    }

    #[test]
    fn derivative_matches_richardson_finite_differences() {
        let net = library::binding_birth_death([0.1, 0.5, 0.3, 0.4]);
        let x = LatticeState::from([4, 6, 3]);
        for kernel in all_kernels(&net) {
            for k in [[0u64, 0, 0, 0], [1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1], [1, 1, 0, 0]] {
                let analytic = kernel.count_pmf_derivative(&net, &x, 1, &k).unwrap();
                let f = |t: f64| kernel.count_pmf(&net, &x, t, &k).unwrap();
                // One-sided differences (tau >= 0), extrapolated twice.
                let d = |h: f64| (-3.0 * f(0.0) + 4.0 * f(h) - f(2.0 * h)) / (2.0 * h);
                let (h1, h2, h3) = (1e-3, 5e-4, 2.5e-4);
                let r1 = (4.0 * d(h2) - d(h1)) / 3.0;
                let r2 = (4.0 * d(h3) - d(h2)) / 3.0;
                let r = (8.0 * r2 - r1) / 7.0;
                let scale = 1.0 + analytic.abs();
                assert!(
                    (r - analytic).abs() <= 1e-6 * scale,
                    "{} k={k:?} analytic={analytic} fd={r}",
                    kernel.name()
                );
            }
        }
    }

    #[test]
    fn explicit_decay_sample_mean() {
        // 10 - x' ~ Poisson(1) unless the step overshoots zero (negligible here).
        let net = library::decay(1.0);
        let kernel = TauLeapKernel::explicit();
        let x = LatticeState::from([10]);
        let n = 100_000;
        let mut rng = stream_rng(11, 0);
        let sum: f64 = (0..n)
            .map(|_| (10 - kernel.step(&net, &x, 0.1, &mut rng).unwrap().coords()[0]) as f64)
            .sum();
        let mean = sum / n as f64;
        assert!((mean - 1.0).abs() < 3.0 * (1.0 / n as f64).sqrt(), "{mean}");
    }

    #[test]
    fn single_step_mesh_equals_step() {
        let net = library::binding_birth_death([0.1, 0.5, 0.3, 0.4]);
        let kernel = TauLeapKernel::remm(&net, &RemmOverrides::default()).unwrap();
        let x = LatticeState::from([5, 5, 5]);
        let mesh = Mesh::new(vec![0.0, 0.4]).unwrap();
        let path = kernel.simulate_mesh(&net, &x, &mesh, &mut stream_rng(5, 0)).unwrap();
        let direct = kernel.step(&net, &x, 0.4, &mut stream_rng(5, 0)).unwrap();
        assert_eq!(path.final_state(), &direct);
        assert_eq!(path.state_at(0.2), &x);
        assert_eq!(path.states.len(), 2);
    }

    #[test]
    fn absorbing_state_gives_constant_path() {
        let net = library::binding_birth_death([0.1, 0.5, 0.3, 0.4]);
        let x = LatticeState::zeros(3);
        let mesh = Mesh::uniform(2.0, 8).unwrap();
        for kernel in all_kernels(&net) {
            let path = kernel.simulate_mesh(&net, &x, &mesh, &mut stream_rng(3, 0)).unwrap();
            assert!(path.states.iter().all(|s| *s == x));
        }
    }

    #[test]
    fn push_forward_identity_and_one_step() {
        let net = library::binding_birth_death([0.1, 0.5, 0.3, 0.4]);
        let kernel = TauLeapKernel::explicit();
        let opts = EnumerationOptions::default();
        let p = SparsePmf::from_entries(
            [(LatticeState::from([5, 5, 5]), 0.5), (LatticeState::from([2, 3, 1]), 0.5)],
            false,
        );
        let same = kernel.push_forward(&net, &p, &Mesh::new(vec![0.0]).unwrap(), &opts).unwrap();
        assert_eq!(same.pmf, p);

        let one = kernel.push_forward(&net, &p, &Mesh::new(vec![0.0, 0.2]).unwrap(), &opts).unwrap();
        let mut mix = SparsePmf::zero(false);
        for (x, w) in p.iter() {
            let t = kernel.state_transition_pmf(&net, x, 0.2, &opts).unwrap();
            mix.add_scaled(&t.pmf, w);
        }
        let diff = one.pmf.difference(&mix);
        assert!(diff.abs_mass() < 1e-14);
    }

    #[test]
    fn push_forward_is_deterministic() {
        let net = library::binding_birth_death([0.1, 0.5, 0.3, 0.4]);
        let kernel = TauLeapKernel::remm(&net, &RemmOverrides::default()).unwrap();
        let mesh = Mesh::uniform(1.0, 8).unwrap();
        let p = SparsePmf::delta(LatticeState::from([5, 5, 5]));
        let a = kernel.push_forward(&net, &p, &mesh, &EnumerationOptions::default()).unwrap();
        let b = kernel.push_forward(&net, &p, &mesh, &EnumerationOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn enumeration_cap() {
        let net = library::binding_birth_death([0.1, 0.5, 0.3, 0.4]);
        let opts = EnumerationOptions {
            max_box: 10,
            ..Default::default()
        };
        let err = TauLeapKernel::explicit()
            .state_transition_pmf(&net, &LatticeState::from([50, 50, 50]), 0.5, &opts)
            .unwrap_err();
        assert!(matches!(err, KernelError::EnumerationTooLarge { .. }));
    }
}
