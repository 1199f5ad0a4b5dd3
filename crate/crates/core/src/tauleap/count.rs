//! Per-reaction count laws `K_j` and their dependence on the step size.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::Serialize;

use super::series;
use super::KernelError;

/// A step-size dependent parameter `theta(tau)` of a count law, with `theta(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum CountParam {
    /// `slope * tau`.
    Linear { slope: f64 },
    /// `amplitude * (1 - exp(-rate * tau))`.
    Saturating { amplitude: f64, rate: f64 },
}

impl CountParam {
    pub const ZERO: CountParam = CountParam::Linear { slope: 0.0 };

    pub fn value_at(&self, tau: f64) -> f64 {
        match *self {
            CountParam::Linear { slope } => slope * tau,
            CountParam::Saturating { amplitude, rate } => {
                if amplitude == 0.0 {
                    0.0
                } else {
                    -amplitude * (-rate * tau).exp_m1()
                }
            }
        }
    }

    /// `d^i theta / d tau^i` at `tau = 0`.
    pub fn derivative_at_zero(&self, order: u32) -> f64 {
        if order == 0 {
            return 0.0;
        }
        match *self {
            CountParam::Linear { slope } => {
                if order == 1 {
                    slope
                } else {
                    0.0
                }
            }
            CountParam::Saturating { amplitude, rate } => {
                // -(amplitude) * (-rate)^i
                let sign = if order % 2 == 1 { 1.0 } else { -1.0 };
                sign * amplitude * rate.powi(order as i32)
            }
        }
    }

    /// Taylor coefficients `theta^(i)(0) / i!` for `i = 0..=order`.
    pub(crate) fn taylor(&self, order: usize) -> Vec<f64> {
        let mut fact = 1.0;
        (0..=order)
            .map(|i| {
                if i > 0 {
                    fact *= i as f64;
                }
                self.derivative_at_zero(i as u32) / fact
            })
            .collect()
    }
}

/// Law of a single reaction count over one step, as a function of `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum CountDistribution {
    Poisson { lambda: CountParam },
    Binomial { trials: u64, p: CountParam },
    /// `K = 0` almost surely.
    DeterministicZero,
}

impl CountDistribution {
    /// The law at a concrete step size, with parameters range-checked.
    pub fn at(&self, tau: f64, reaction: usize) -> Result<ConcreteCount, KernelError> {
        match *self {
            CountDistribution::DeterministicZero => Ok(ConcreteCount::Zero),
            CountDistribution::Poisson { lambda } => {
                let value = lambda.value_at(tau);
                if !value.is_finite() || value < 0.0 {
                    return Err(KernelError::ParameterOutOfRange {
                        reaction,
                        parameter: "lambda",
                        value,
                    });
                }
                Ok(if value == 0.0 {
                    ConcreteCount::Zero
                } else {
                    ConcreteCount::Poisson { lambda: value }
                })
            }
            CountDistribution::Binomial { trials, p } => {
                let value = p.value_at(tau);
                if !(0.0..=1.0).contains(&value) {
                    return Err(KernelError::ParameterOutOfRange {
                        reaction,
                        parameter: "p",
                        value,
                    });
                }
                Ok(if value == 0.0 || trials == 0 {
                    ConcreteCount::Zero
                } else {
                    ConcreteCount::Binomial { trials, p: value }
                })
            }
        }
    }

    /// Taylor coefficients in `tau` at 0 of `P(K = k)`, up to `order`.
    pub(crate) fn pmf_taylor(&self, k: u64, order: usize) -> Vec<f64> {
        let mut out = vec![0.0; order + 1];
        match *self {
            CountDistribution::DeterministicZero => {
                if k == 0 {
                    out[0] = 1.0;
                }
            }
            CountDistribution::Poisson { lambda } => {
                // exp(-L) L^k / k!
                let l = lambda.taylor(order);
                let neg: Vec<f64> = l.iter().map(|v| -v).collect();
                let mut s = series::exp(&neg);
                let pow = series::pow(&l, k);
                s = series::mul(&s, &pow);
                let kfact: f64 = (1..=k).map(|i| i as f64).product();
                for (o, v) in out.iter_mut().zip(s) {
                    *o = v / kfact;
                }
            }
            CountDistribution::Binomial { trials, p } => {
                if k > trials {
                    return out;
                }
                // C(n, k) P^k (1 - P)^(n - k)
                let pt = p.taylor(order);
                let mut q: Vec<f64> = pt.iter().map(|v| -v).collect();
                q[0] += 1.0;
                let s = series::mul(&series::pow(&pt, k), &series::pow(&q, trials - k));
                let c = binomial_coefficient(trials, k);
                for (o, v) in out.iter_mut().zip(s) {
                    *o = v * c;
                }
            }
        }
        out
    }
}

pub(crate) fn binomial_coefficient(n: u64, k: u64) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// A count law with numeric parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum ConcreteCount {
    Zero,
    Poisson { lambda: f64 },
    Binomial { trials: u64, p: f64 },
}

impl ConcreteCount {
    pub fn pmf(&self, k: u64) -> f64 {
        match *self {
            ConcreteCount::Zero => {
                if k == 0 {
                    1.0
                } else {
                    0.0
                }
            }
            ConcreteCount::Poisson { lambda } => {
                (-lambda + k as f64 * lambda.ln() - ln_factorial(k)).exp()
            }
            ConcreteCount::Binomial { trials, p } => {
                if k > trials {
                    return 0.0;
                }
                if p == 1.0 {
                    return if k == trials { 1.0 } else { 0.0 };
                }
                (ln_factorial(trials) - ln_factorial(k) - ln_factorial(trials - k)
                    + k as f64 * p.ln()
                    + (trials - k) as f64 * (-p).ln_1p())
                .exp()
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            ConcreteCount::Zero => 0.0,
            ConcreteCount::Poisson { lambda } => lambda,
            ConcreteCount::Binomial { trials, p } => trials as f64 * p,
        }
    }

    /// Largest count with positive probability, if finite.
    pub fn support_max(&self) -> Option<u64> {
        match *self {
            ConcreteCount::Zero => Some(0),
            ConcreteCount::Poisson { .. } => None,
            ConcreteCount::Binomial { trials, p } => Some(if p > 0.0 { trials } else { 0 }),
        }
    }

    /// `P(K = 0), ..., P(K = hi)` where `hi` is the smallest cut whose upper
    /// tail is provably at most `tail_tolerance`.
    pub fn truncated_table(&self, tail_tolerance: f64) -> Vec<f64> {
        match *self {
            ConcreteCount::Zero => vec![1.0],
            ConcreteCount::Poisson { lambda } => poisson_table(lambda, tail_tolerance),
            ConcreteCount::Binomial { trials, p } => binomial_table(trials, p, tail_tolerance),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match *self {
            ConcreteCount::Zero => 0,
            ConcreteCount::Poisson { lambda } => {
                let d = Poisson::new(lambda).expect("lambda validated positive and finite");
                d.sample(rng) as u64
            }
            ConcreteCount::Binomial { trials, p } => {
                let d = Binomial::new(trials, p).expect("p validated in [0, 1]");
                d.sample(rng)
            }
        }
    }
}

fn ln_factorial(n: u64) -> f64 {
    // Exact summation for small n, Stirling series beyond.
    if n < 256 {
        (2..=n).map(|i| (i as f64).ln()).sum()
    } else {
        let x = n as f64;
        x * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI * x).ln() + 1.0 / (12.0 * x)
            - 1.0 / (360.0 * x.powi(3))
            + 1.0 / (1260.0 * x.powi(5))
    }
}

fn poisson_table(lambda: f64, tail_tolerance: f64) -> Vec<f64> {
    let mut table = Vec::new();
    let mut k = 0u64;
    loop {
        let p = if lambda < 500.0 {
            match table.last() {
                None => (-lambda).exp(),
                Some(&prev) => prev * lambda / k as f64,
            }
        } else {
            ConcreteCount::Poisson { lambda }.pmf(k)
        };
        table.push(p);
        // Tail beyond k: sum_{m > k} p_m <= p_{k+1} / (1 - lambda / (k + 2)).
        let next = p * lambda / (k + 1) as f64;
        if ((k + 2) as f64) > lambda && next / (1.0 - lambda / (k + 2) as f64) <= tail_tolerance
        {
            break;
        }
        k += 1;
    }
    table
}

fn binomial_table(trials: u64, p: f64, tail_tolerance: f64) -> Vec<f64> {
    let law = ConcreteCount::Binomial { trials, p };
    let full: Vec<f64> = (0..=trials).map(|k| law.pmf(k)).collect();
    let mut tail = 0.0;
    let mut hi = trials as usize;
    while hi > 0 && tail + full[hi] <= tail_tolerance {
        tail += full[hi];
        hi -= 1;
    }
    full[..=hi].to_vec()
}
