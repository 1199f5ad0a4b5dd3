//! Truncated power series in `tau`; all inputs share one length (order + 1).

pub(crate) fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().min(b.len());
    let mut out = vec![0.0; n];
    for i in 0..n {
        if a[i] == 0.0 {
            continue;
        }
        for j in 0..n - i {
            out[i + j] += a[i] * b[j];
        }
    }
    out
}

/// `a^k` by repeated squaring.
pub(crate) fn pow(a: &[f64], mut k: u64) -> Vec<f64> {
    let mut result = vec![0.0; a.len()];
    result[0] = 1.0;
    let mut base = a.to_vec();
    while k > 0 {
        if k & 1 == 1 {
            result = mul(&result, &base);
        }
        k >>= 1;
        if k > 0 {
            base = mul(&base, &base);
        }
    }
    result
}

/// `exp(s)` via `n E_n = sum_{m=1}^n m s_m E_{n-m}`.
pub(crate) fn exp(s: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; s.len()];
    e[0] = s[0].exp();
    for n in 1..s.len() {
        let acc: f64 = (1..=n).map(|m| m as f64 * s[m] * e[n - m]).sum();
        e[n] = acc / n as f64;
    }
    e
}
