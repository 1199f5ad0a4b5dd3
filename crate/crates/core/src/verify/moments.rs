//! Raw moments of Poisson and binomial counts by their standard recursions.

use crate::tauleap::{binomial_coefficient, ConcreteCount};

/// `E K^i` for `i = 0..=r` from `E K^r = lambda E (K + 1)^(r - 1)`.
fn poisson_moments(lambda: f64, r: u32) -> Vec<f64> {
    let r = r as usize;
    let mut m = vec![0.0; r + 1];
    m[0] = 1.0;
    for s in 1..=r {
        let inner: f64 = (0..s)
            .map(|i| binomial_coefficient((s - 1) as u64, i as u64) * m[i])
            .sum();
        m[s] = lambda * inner;
    }
    m
}

/// `E K^r` for `K ~ Poisson(lambda)`.
pub fn poisson_moment(lambda: f64, r: u32) -> f64 {
    poisson_moments(lambda, r)[r as usize]
}

/// `E K_N^i` for `i = 0..=r` from `E K_N^r = N p E (1 + K_{N-1})^(r - 1)`.
fn binomial_moments(n: u64, p: f64, r: u32) -> Vec<f64> {
    let r = r as usize;
    // prev[i] = E K_{N-1}^i, starting from K_0 = 0.
    let mut prev = vec![0.0; r + 1];
    prev[0] = 1.0;
    for trials in 1..=n {
        let mut cur = vec![0.0; r + 1];
        cur[0] = 1.0;
        for (s, slot) in cur.iter_mut().enumerate().skip(1) {
            let inner: f64 = (0..s)
                .map(|i| binomial_coefficient((s - 1) as u64, i as u64) * prev[i])
                .sum();
            *slot = trials as f64 * p * inner;
        }
        prev = cur;
    }
    prev
}

/// `E K^r` for `K ~ Binomial(n, p)`.
pub fn binomial_moment(n: u64, p: f64, r: u32) -> f64 {
    binomial_moments(n, p, r)[r as usize]
}

/// `E K^i`, `i = 0..=r`, of a concrete count law.
pub(crate) fn count_moments(law: &ConcreteCount, r: u32) -> Vec<f64> {
    match *law {
        ConcreteCount::Zero => {
            let mut m = vec![0.0; r as usize + 1];
            m[0] = 1.0;
            m
        }
        ConcreteCount::Poisson { lambda } => poisson_moments(lambda, r),
        ConcreteCount::Binomial { trials, p } => binomial_moments(trials, p, r),
    }
}

/// Moments of `A + B` for independent `A`, `B` from their moment vectors.
pub(crate) fn sum_moments(a: &[f64], b: &[f64]) -> Vec<f64> {
    (0..a.len())
        .map(|l| {
            (0..=l)
                .map(|m| binomial_coefficient(l as u64, m as u64) * a[m] * b[l - m])
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        let l = 1.7;
        assert!((poisson_moment(l, 1) - l).abs() < 1e-15);
        assert!((poisson_moment(l, 2) - (l + l * l)).abs() < 1e-14);
        assert!((poisson_moment(l, 3) - (l + 3.0 * l * l + l * l * l)).abs() < 1e-13);
        assert_eq!(poisson_moment(l, 0), 1.0);
        assert!((binomial_moment(12, 0.3, 1) - 3.6).abs() < 1e-14);
        let var = 12.0 * 0.3 * 0.7;
        assert!((binomial_moment(12, 0.3, 2) - (var + 3.6 * 3.6)).abs() < 1e-13);
        assert_eq!(binomial_moment(0, 0.3, 0), 1.0);
        assert_eq!(binomial_moment(0, 0.3, 3), 0.0);
    }

    #[test]
    fn sum_of_independent_poissons() {
        // Poisson(a) + Poisson(b) = Poisson(a + b).
        let s = sum_moments(&poisson_moments(0.4, 5), &poisson_moments(1.1, 5));
        let want = poisson_moments(1.5, 5);
        for (x, y) in s.iter().zip(&want) {
            assert!((x - y).abs() < 1e-12 * y.max(1.0));
        }
    }
}
