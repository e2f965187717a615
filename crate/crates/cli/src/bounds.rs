// SPDX-License-Identifier: Apache-2.0

//! Space lower bound for `F_p` estimation next to the earlier bound's terms.
//!
//! New bound: `p^2 n^(1-2/p) / (eps^2 log2 n)`. Earlier bound, term by term:
//! `n^(1-2/p) eps^(-2/p)`, `n^(1-2/p) eps^(-4/p) / log2 n` (the polylog taken
//! as a single `log2 n`), and `eps^(-2) + log2 n`.

use fpdisj_core::Epsilon;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundTableRow {
    pub n: u64,
    pub p: f64,
    pub eps: f64,
    pub lower_bound: f64,
    pub prior_root_term: f64,
    pub prior_polylog_term: f64,
    pub prior_eps_term: f64,
    pub prior_log_term: f64,
    /// `lower_bound / max(root, polylog, eps + log)`.
    pub ratio: f64,
    /// Largest `eps` in `(0, 1]` at which `ratio >= 1`; 0 when there is none.
    pub crossover_eps: f64,
}

/// `n^(1-2/p)` through `log2` so powers of two stay exact.
fn root_factor(n: f64, p: f64) -> f64 {
    (n.log2() * (1.0 - 2.0 / p)).exp2()
}

pub fn lower_bound(n: u64, p: f64, eps: Epsilon) -> f64 {
    let n = n as f64;
    let den = eps.den() as f64;
    let num = eps.num() as f64;
    p * p * root_factor(n, p) * den * den / (num * num * n.log2())
}

fn lower_bound_real(n: f64, p: f64, eps: f64) -> f64 {
    p * p * root_factor(n, p) / (eps * eps * n.log2())
}

fn prior_terms(n: f64, p: f64, eps: f64) -> [f64; 4] {
    let r = root_factor(n, p);
    let log = n.log2();
    [
        r * eps.powf(-2.0 / p),
        r * eps.powf(-4.0 / p) / log,
        eps.powi(-2),
        log,
    ]
}

fn ratio_at(n: f64, p: f64, eps: f64) -> f64 {
    let [a, b, c, d] = prior_terms(n, p, eps);
    lower_bound_real(n, p, eps) / a.max(b).max(c + d)
}

/// The ratio is non-increasing in `eps` (each term grows at most like
/// `eps^-2`), so bisection finds where it crosses 1.
pub fn crossover(n: u64, p: f64) -> f64 {
    let n = n as f64;
    if ratio_at(n, p, 1.0) >= 1.0 {
        return 1.0;
    }
    let mut lo = 1e-12;
    if ratio_at(n, p, lo) < 1.0 {
        return 0.0;
    }
    let mut hi = 1.0;
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if ratio_at(n, p, mid) >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-14 {
            break;
        }
    }
    lo
}

pub fn bound_row(n: u64, p: f64, eps: Epsilon) -> BoundTableRow {
    let e = eps.value();
    let nf = n as f64;
    let [a, b, _, d] = prior_terms(nf, p, e);
    let inv = eps.den() as f64 / eps.num() as f64;
    let c = inv * inv;
    let lb = lower_bound(n, p, eps);
    BoundTableRow {
        n,
        p,
        eps: e,
        lower_bound: lb,
        prior_root_term: a,
        prior_polylog_term: b,
        prior_eps_term: c,
        prior_log_term: d,
        ratio: lb / a.max(b).max(c + d),
        crossover_eps: crossover(n, p),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eps(s: &str) -> Epsilon {
        s.parse().unwrap()
    }

    #[test]
    fn spot_values() {
        let row = bound_row(1 << 20, 4.0, eps("1/10"));
        assert_eq!(row.lower_bound, 81920.0);
        assert!((row.prior_root_term / (1024.0 * 10f64.sqrt()) - 1.0).abs() < 1e-12);
        let unit = bound_row(1 << 20, 4.0, eps("1"));
        assert_eq!(unit.prior_eps_term, 1.0);
        assert_eq!(unit.prior_log_term, 20.0);
    }

    #[test]
    fn crossover_separates_the_ratio() {
        for (n, p) in [(1u64 << 20, 4.0), (1 << 30, 3.0), (1 << 12, 6.0)] {
            let c = crossover(n, p);
            let nf = n as f64;
            if c > 0.0 && c < 1.0 {
                assert!(ratio_at(nf, p, c * 0.999) >= 1.0);
                assert!(ratio_at(nf, p, c * 1.001) < 1.0);
            }
            for e in [0.001, 0.01, 0.1, 0.5, 1.0] {
                assert_eq!(ratio_at(nf, p, e) >= 1.0, e <= c, "n={n} p={p} eps={e} c={c}");
            }
        }
    }
}
