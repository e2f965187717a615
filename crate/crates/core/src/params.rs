// SPDX-License-Identifier: Apache-2.0

//! Parameter tuple `(n, p, eps)` with the derived party count and the
//! regime checks under which the reduction's inequalities are claimed.
//!
//! `eps` is carried as an exact rational so the party count
//! `t = ceil(eps * n^(1/p) / (2p))` never depends on float dust. When `p` is
//! integral and `n` is a perfect `p`-th power the integer root is used as the
//! probe weight, which keeps every regime comparison exact.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::ceil_snapped;

/// Accuracy parameter as a reduced fraction `num/den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Epsilon {
    num: u64,
    den: u64,
}

impl Epsilon {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if den == 0 {
            return Err(Error::invalid("eps denominator is zero"));
        }
        let g = gcd(num, den);
        Ok(Epsilon {
            num: num / g,
            den: den / g,
        })
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Epsilon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for Epsilon {
    type Err = Error;

    /// Accepts `num/den` or a plain decimal such as `0.25` (converted exactly).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((a, b)) = s.split_once('/') {
            let num = a
                .trim()
                .parse::<u64>()
                .map_err(|_| Error::invalid(format!("bad eps numerator in {s:?}")))?;
            let den = b
                .trim()
                .parse::<u64>()
                .map_err(|_| Error::invalid(format!("bad eps denominator in {s:?}")))?;
            return Epsilon::new(num, den);
        }
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if int.is_empty() && frac.is_empty()
            || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit())
            || frac.len() > 18
        {
            return Err(Error::invalid(format!("cannot parse eps {s:?}")));
        }
        let den = 10u64.pow(frac.len() as u32);
        let int_part: u64 = if int.is_empty() {
            0
        } else {
            int.parse()
                .map_err(|_| Error::invalid(format!("cannot parse eps {s:?}")))?
        };
        let frac_part: u64 = if frac.is_empty() { 0 } else { frac.parse().unwrap_or(0) };
        let num = int_part
            .checked_mul(den)
            .and_then(|v| v.checked_add(frac_part))
            .ok_or_else(|| Error::invalid(format!("eps {s:?} overflows")))?;
        Epsilon::new(num, den)
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeMode {
    /// Every inequality of the theorem regime must hold.
    Strict,
    /// Only the basic ranges are enforced; regime failures are recorded.
    Relaxed,
}

impl FromStr for RegimeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "strict" => Ok(RegimeMode::Strict),
            "relaxed" => Ok(RegimeMode::Relaxed),
            other => Err(Error::invalid(format!("unknown mode {other:?}"))),
        }
    }
}

impl fmt::Display for RegimeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegimeMode::Strict => "strict",
            RegimeMode::Relaxed => "relaxed",
        })
    }
}

/// One failed inequality of the theorem regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegimeViolation {
    /// `p < n^(1/p) / 3` fails.
    OrderTooLarge { p: f64, limit: f64 },
    /// `eps >= 80p / n^(1/p)` fails.
    EpsBelowRootTerm { eps: f64, min: f64 },
    /// `eps >= 3 / sqrt(n)` fails.
    EpsBelowSqrtTerm { eps: f64, min: f64 },
    /// `eps <= 1/4` fails.
    EpsAboveQuarter { eps: f64 },
    /// The party count was forced instead of derived.
    PartiesOverridden { derived: u64, forced: u64 },
}

impl fmt::Display for RegimeViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegimeViolation::OrderTooLarge { p, limit } => {
                write!(f, "p = {p} is not below n^(1/p)/3 = {limit}")
            }
            RegimeViolation::EpsBelowRootTerm { eps, min } => {
                write!(f, "eps = {eps} is below 80p/n^(1/p) = {min}")
            }
            RegimeViolation::EpsBelowSqrtTerm { eps, min } => {
                write!(f, "eps = {eps} is below 3/sqrt(n) = {min}")
            }
            RegimeViolation::EpsAboveQuarter { eps } => write!(f, "eps = {eps} exceeds 1/4"),
            RegimeViolation::PartiesOverridden { derived, forced } => {
                write!(f, "t forced to {forced} (derived value {derived})")
            }
        }
    }
}

/// The validated `(n, p, eps)` tuple with derived `t` and probe weight.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Parameters {
    n: u64,
    p: f64,
    eps: Epsilon,
    t: u64,
    boost: f64,
    root: Option<u64>,
    mode: RegimeMode,
    violations: Vec<RegimeViolation>,
}

/// Builds parameters for domain size `n`, moment order `p` and accuracy `eps`.
///
/// In [`RegimeMode::Strict`] any failed regime inequality is an error; in
/// [`RegimeMode::Relaxed`] the failures are attached to the result.
pub fn make_parameters(n: u64, p: f64, eps: Epsilon, mode: RegimeMode) -> Result<Parameters> {
    if n < 4 {
        return Err(Error::invalid(format!("n = {n} must be at least 4")));
    }
    let root = integral_root(n, p);
    build(n, p, eps, mode, root, None)
}

impl Parameters {
    /// Perfect-power construction: `n = m^p`, so the probe weight is exactly `m`.
    pub fn from_root(m: u64, p: u32, eps: Epsilon, mode: RegimeMode) -> Result<Parameters> {
        let n = m
            .checked_pow(p)
            .ok_or_else(|| Error::invalid(format!("{m}^{p} overflows u64")))?;
        if n < 4 {
            return Err(Error::invalid(format!("n = {m}^{p} must be at least 4")));
        }
        build(n, p as f64, eps, mode, Some(m), None)
    }

    /// Relaxed-mode parameters with a forced party count `t`. The derived
    /// value is kept as a regime note; this is how tiny domains (where the
    /// derived `t` is 1) get exercised.
    pub fn with_forced_parties(n: u64, p: f64, eps: Epsilon, t: u64) -> Result<Parameters> {
        if n < 4 {
            return Err(Error::invalid(format!("n = {n} must be at least 4")));
        }
        if t < 2 {
            return Err(Error::invalid(format!("t = {t} must be at least 2")));
        }
        build(n, p, eps, RegimeMode::Relaxed, integral_root(n, p), Some(t))
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn eps(&self) -> Epsilon {
        self.eps
    }

    pub fn eps_value(&self) -> f64 {
        self.eps.value()
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    /// The probe weight `n^(1/p)`.
    pub fn boost(&self) -> f64 {
        self.boost
    }

    /// Exact integer `p`-th root of `n`, when one exists.
    pub fn root(&self) -> Option<u64> {
        self.root
    }

    pub fn mode(&self) -> RegimeMode {
        self.mode
    }

    pub fn violations(&self) -> &[RegimeViolation] {
        &self.violations
    }

    /// True when no regime inequality fails and `t` was derived.
    pub fn in_regime(&self) -> bool {
        self.violations.is_empty()
    }

    /// `p` as an integer exponent, when it is one.
    pub fn integral_order(&self) -> Option<u32> {
        integral_exponent(self.p)
    }
}

impl fmt::Display for Parameters {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n={} p={} eps={} t={} boost={} mode={}",
            self.n, self.p, self.eps, self.t, self.boost, self.mode
        )
    }
}

fn build(
    n: u64,
    p: f64,
    eps: Epsilon,
    mode: RegimeMode,
    root: Option<u64>,
    forced: Option<u64>,
) -> Result<Parameters> {
    if !p.is_finite() || p <= 2.0 {
        return Err(Error::invalid(format!("p = {p} must be a finite real above 2")));
    }
    if eps.num == 0 || eps.num >= eps.den {
        return Err(Error::invalid(format!("eps = {eps} must lie in (0, 1)")));
    }
    let boost = match root {
        Some(m) => m as f64,
        None => ((n as f64).ln() / p).exp(),
    };
    let derived = derive_parties(eps, p, boost, root);
    let mut violations = regime_violations(n, p, eps, boost, root);
    let t = match forced {
        Some(forced) if forced != derived => {
            violations.push(RegimeViolation::PartiesOverridden { derived, forced });
            forced
        }
        _ => derived,
    };

    match mode {
        RegimeMode::Strict if !violations.is_empty() => {
            return Err(Error::RegimeViolation(violations));
        }
        _ => {}
    }
    if t < 2 {
        return Err(Error::invalid(format!(
            "derived party count t = {t} is below 2 (eps = {eps}, n^(1/p) = {boost})"
        )));
    }
    Ok(Parameters {
        n,
        p,
        eps,
        t,
        boost,
        root,
        mode,
        violations,
    })
}

fn integral_exponent(p: f64) -> Option<u32> {
    (p.fract() == 0.0 && (1.0..=64.0).contains(&p)).then_some(p as u32)
}

fn integral_root(n: u64, p: f64) -> Option<u64> {
    let e = integral_exponent(p)?;
    let guess = (n as f64).powf(1.0 / p).round() as u64;
    (guess.saturating_sub(1)..=guess + 1).find(|m| m.checked_pow(e) == Some(n))
}

fn derive_parties(eps: Epsilon, p: f64, boost: f64, root: Option<u64>) -> u64 {
    if let (Some(m), Some(e)) = (root, integral_exponent(p)) {
        let a = eps.num as u128 * m as u128;
        let b = eps.den as u128 * 2 * e as u128;
        return a.div_ceil(b) as u64;
    }
    ceil_snapped(eps.value() * boost / (2.0 * p))
}

fn regime_violations(
    n: u64,
    p: f64,
    eps: Epsilon,
    boost: f64,
    root: Option<u64>,
) -> Vec<RegimeViolation> {
    let exact = root.zip(integral_exponent(p));
    let (num, den) = (eps.num as u128, eps.den as u128);
    let eps_v = eps.value();
    let mut out = Vec::new();

    // p < n^(1/p)/3
    let order_ok = match exact {
        Some((m, e)) => 3 * (e as u128) < m as u128,
        None => p < boost / 3.0,
    };
    if !order_ok {
        out.push(RegimeViolation::OrderTooLarge {
            p,
            limit: boost / 3.0,
        });
    }

    // eps >= 80p / n^(1/p)
    let root_ok = match exact {
        Some((m, e)) => num * m as u128 >= 80 * e as u128 * den,
        None => eps_v >= 80.0 * p / boost,
    };
    if !root_ok {
        out.push(RegimeViolation::EpsBelowRootTerm {
            eps: eps_v,
            min: 80.0 * p / boost,
        });
    }

    // eps >= 3 / sqrt(n)  <=>  9 den^2 <= num^2 n
    let sqrt_ok = match (num * num).checked_mul(n as u128) {
        Some(rhs) => 9 * den * den <= rhs,
        None => true,
    };
    if !sqrt_ok {
        out.push(RegimeViolation::EpsBelowSqrtTerm {
            eps: eps_v,
            min: 3.0 / (n as f64).sqrt(),
        });
    }

    if 4 * num > den {
        out.push(RegimeViolation::EpsAboveQuarter { eps: eps_v });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn eps(s: &str) -> Epsilon {
        s.parse().unwrap()
    }

    #[test]
    fn parses_rational_and_decimal_eps() {
        assert_eq!(eps("1/4"), Epsilon::new(1, 4).unwrap());
        assert_eq!(eps("0.25"), Epsilon::new(1, 4).unwrap());
        assert_eq!(eps("9/10"), eps(".9"));
        assert!("1/0".parse::<Epsilon>().is_err());
        assert!("abc".parse::<Epsilon>().is_err());
        assert!("0.2.5".parse::<Epsilon>().is_err());
    }

    #[test]
    fn strict_regime_at_m960() {
        let params = make_parameters(884_736_000, 3.0, eps("1/4"), RegimeMode::Strict).unwrap();
        assert_eq!(params.root(), Some(960));
        assert_eq!(params.boost(), 960.0);
        assert_eq!(params.t(), 40);
        assert!(params.in_regime());
    }

    #[test]
    fn strict_rejects_small_n() {
        let err = make_parameters(4096, 3.0, eps("1/4"), RegimeMode::Strict).unwrap_err();
        match err {
            Error::RegimeViolation(v) => {
                assert!(v.iter().any(|r| matches!(
                    r,
                    RegimeViolation::EpsBelowRootTerm { min, .. } if (*min - 15.0).abs() < 1e-12
                )));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn relaxed_rejects_single_party() {
        let err = make_parameters(4096, 3.0, eps("1/4"), RegimeMode::Relaxed).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn relaxed_keeps_violations() {
        let params = make_parameters(4096, 3.0, eps("9/10"), RegimeMode::Relaxed).unwrap();
        assert_eq!(params.t(), 3);
        assert!(!params.in_regime());
        assert!(params
            .violations()
            .iter()
            .any(|v| matches!(v, RegimeViolation::EpsAboveQuarter { .. })));
    }

    #[test]
    fn basic_ranges() {
        assert!(make_parameters(3, 3.0, eps("1/4"), RegimeMode::Relaxed).is_err());
        assert!(make_parameters(4096, 2.0, eps("1/4"), RegimeMode::Relaxed).is_err());
        assert!(make_parameters(4096, 3.0, eps("1/1"), RegimeMode::Relaxed).is_err());
        assert!(make_parameters(4096, 3.0, eps("0/5"), RegimeMode::Relaxed).is_err());
    }

    #[test]
    fn boundary_root_term_is_exact_for_p4() {
        // 80 * 4 / 1280 == 1/4 exactly
        let params = Parameters::from_root(1280, 4, eps("1/4"), RegimeMode::Strict).unwrap();
        assert_eq!(params.t(), 40);
    }

    #[test]
    fn boost_reproduces_n() {
        for &(n, p) in &[(4096u64, 3.0), (1_000_003, 3.5), (884_736_000, 3.0), (99_999, 2.5)] {
            let params = make_parameters(n, p, eps("99/100"), RegimeMode::Relaxed).unwrap();
            let back = params.boost().powf(p);
            assert!(((back - n as f64) / n as f64).abs() < 1e-12, "n={n} p={p}");
        }
    }

    #[test]
    fn forced_parties() {
        assert!(Parameters::from_root(4, 3, eps("1/4"), RegimeMode::Relaxed).is_err());
        let params = Parameters::with_forced_parties(64, 3.0, eps("1/4"), 2).unwrap();
        assert_eq!(params.t(), 2);
        assert_eq!(params.root(), Some(4));
        assert_eq!(params.mode(), RegimeMode::Relaxed);
        assert!(params.violations().contains(&RegimeViolation::PartiesOverridden {
            derived: 1,
            forced: 2
        }));
        assert!(Parameters::with_forced_parties(64, 3.0, eps("1/4"), 1).is_err());
    }

    proptest! {
        #[test]
        fn parties_match_integer_ceiling(m in 2u64..5000, p in 3u32..5, num in 1u64..1000, den_extra in 1u64..1000) {
            let den = num + den_extra;
            let e = Epsilon::new(num, den).unwrap();
            let Some(n) = m.checked_pow(p) else { return Ok(()) };
            prop_assume!(n >= 4);
            if let Ok(params) = make_parameters(n, p as f64, e, RegimeMode::Relaxed) {
                let a = e.num() as u128 * m as u128;
                let b = e.den() as u128 * 2 * p as u128;
                prop_assert_eq!(params.t() as u128, a.div_ceil(b));
            }
        }

        #[test]
        fn strict_acceptance_monotone_in_n(m in 900u64..3000, bump in 1u64..2000, p in 3u32..5) {
            let e = Epsilon::new(1, 4).unwrap();
            if let Ok(a) = Parameters::from_root(m, p, e, RegimeMode::Strict) {
                prop_assert!(a.in_regime());
                prop_assert!(Parameters::from_root(m + bump, p, e, RegimeMode::Strict).is_ok());
            }
        }
    }
}
