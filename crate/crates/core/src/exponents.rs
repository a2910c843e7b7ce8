//! Parameter admissibility and critical exponents for `(p, q, delta)`
//! settings, generic over `f64` and exact rationals.

use std::fmt::Display;

use num_rational::Ratio;
use num_traits::{Num, Signed};

use crate::error::{Error, Result};

/// Arithmetic needed by the calculators.
pub trait Scalar: Num + Signed + PartialOrd + Copy + Display {
    fn from_i64(n: i64) -> Self;

    fn frac(n: i64, d: i64) -> Self {
        Self::from_i64(n) / Self::from_i64(d)
    }
}

impl Scalar for f64 {
    fn from_i64(n: i64) -> Self {
        n as f64
    }
}

impl Scalar for Ratio<i64> {
    fn from_i64(n: i64) -> Self {
        Ratio::from_integer(n)
    }
}

pub type Rational = Ratio<i64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamSet<T> {
    pub p: T,
    pub q: T,
    pub delta: T,
    pub gamma: T,
    /// Temperature regularity loss.
    pub delta1: Option<T>,
    /// Temperature coefficient Hölder exponent.
    pub gamma1: Option<T>,
}

impl<T: Scalar> ParamSet<T> {
    pub fn new(p: T, q: T, delta: T, gamma: T) -> Self {
        Self {
            p,
            q,
            delta,
            gamma,
            delta1: None,
            gamma1: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentReport<T> {
    pub admissible: bool,
    pub reasons: Vec<String>,
    /// Critical time weight `p (1 - 1/q - delta/2) - 1`.
    pub alpha_c: T,
    /// Nonlinearity exponent.
    pub beta: T,
    /// Trace index `2 - delta - 2 (1 + alpha_c) / p`.
    pub trace_smoothness: T,
    /// `2/q0 + 2/p0` when a monitor pair is supplied.
    pub serrin_mu0: Option<T>,
}

/// Violated clauses of the local well-posedness region for `(p, q, delta)`:
/// `[p = q = 2, delta = 0]` or
/// `[delta in (0, 1/2), q in (2/(2-delta), 2/(1-delta)), 1/p + 1/q + delta/2 <= 1]`.
pub fn region_violations<T: Scalar>(p: T, q: T, delta: T) -> Vec<String> {
    let zero = T::zero();
    let one = T::one();
    let two = T::from_i64(2);
    let half = T::frac(1, 2);
    if p == two && q == two && delta == zero {
        return Vec::new();
    }
    let mut out = Vec::new();
    if !(delta > zero && delta < half) {
        out.push(format!(
            "delta = {delta} is not in (0, 1/2) (and (p, q, delta) is not (2, 2, 0))"
        ));
    }
    if delta < one && delta > zero - one {
        let lo = two / (two - delta);
        let hi = two / (one - delta);
        if !(q > lo && q < hi) {
            out.push(format!("q = {q} is not in ({lo}, {hi})"));
        }
    }
    let sum = one / p + one / q + delta / two;
    if sum > one {
        out.push(format!("1/p + 1/q + delta/2 = {sum} exceeds 1"));
    }
    out
}

pub fn check_admissibility<T: Scalar>(params: &ParamSet<T>) -> (bool, Vec<String>) {
    let zero = T::zero();
    let one = T::one();
    let two = T::from_i64(2);
    let ParamSet {
        p,
        q,
        delta,
        gamma,
        delta1,
        gamma1,
    } = *params;
    let mut reasons = Vec::new();
    if p < two {
        reasons.push(format!("p = {p} is below 2"));
    }
    if q < two {
        reasons.push(format!("q = {q} is below 2"));
    }
    if !(delta >= zero && delta < one) {
        reasons.push(format!("delta = {delta} is not in [0, 1)"));
    }
    if gamma <= zero {
        reasons.push(format!("gamma = {gamma} is not positive"));
    }
    reasons.extend(region_violations(p, q, delta));
    if gamma <= one - delta {
        reasons.push(format!(
            "gamma = {gamma} does not exceed 1 - delta = {}",
            one - delta
        ));
    }
    if let Some(d1) = delta1 {
        if !(d1 >= zero && d1 < two) {
            reasons.push(format!("delta1 = {d1} is not in [0, 2)"));
        }
        if !(d1 >= delta && d1 <= one + delta) {
            reasons.push(format!("delta1 = {d1} is not in [delta, 1 + delta]"));
        }
        match gamma1 {
            Some(g1) if g1 > (one - d1).abs() => {}
            Some(g1) => reasons.push(format!(
                "gamma1 = {g1} does not exceed |1 - delta1| = {}",
                (one - d1).abs()
            )),
            None => reasons.push("gamma1 is required when delta1 is given".into()),
        }
    } else if gamma1.is_some() {
        reasons.push("delta1 is required when gamma1 is given".into());
    }
    (reasons.is_empty(), reasons)
}

pub fn alpha_c<T: Scalar>(p: T, q: T, delta: T) -> T {
    p * (T::one() - T::one() / q - delta / T::from_i64(2)) - T::one()
}

pub fn beta<T: Scalar>(q: T, delta: T) -> T {
    let half = T::frac(1, 2);
    if delta > T::zero() && q >= T::from_i64(2) / delta {
        half + delta / T::from_i64(2)
    } else {
        half + delta / T::from_i64(4) + T::one() / (T::from_i64(2) * q)
    }
}

pub fn trace_smoothness<T: Scalar>(p: T, delta: T, a: T) -> T {
    T::from_i64(2) - delta - T::from_i64(2) * (T::one() + a) / p
}

pub fn serrin_mu0<T: Scalar>(p0: T, q0: T) -> T {
    T::from_i64(2) / q0 + T::from_i64(2) / p0
}

/// Validates a Serrin monitor triple against the same region as the data.
pub fn check_monitor<T: Scalar>(p0: T, q0: T, delta0: T) -> Result<T> {
    let v = region_violations(p0, q0, delta0);
    if !v.is_empty() {
        return Err(Error::NotAdmissible(v));
    }
    Ok(serrin_mu0(p0, q0))
}

/// All exponents for admissible parameters; `monitor` is an optional `(p0, q0)`.
pub fn critical_exponents<T: Scalar>(
    params: &ParamSet<T>,
    monitor: Option<(T, T)>,
) -> Result<ExponentReport<T>> {
    let (admissible, reasons) = check_admissibility(params);
    if !admissible {
        return Err(Error::NotAdmissible(reasons));
    }
    let ParamSet { p, q, delta, .. } = *params;
    let a = alpha_c(p, q, delta);
    let trace = trace_smoothness(p, delta, a);
    let identity = trace - T::from_i64(2) / q;
    if identity.abs() > T::frac(1, 1_000_000_000) {
        return Err(Error::Parameter(format!(
            "trace identity violated by {identity}"
        )));
    }
    Ok(ExponentReport {
        admissible,
        reasons,
        alpha_c: a,
        beta: beta(q, delta),
        trace_smoothness: trace,
        serrin_mu0: monitor.map(|(p0, q0)| serrin_mu0(p0, q0)),
    })
}

/// Parses `8/3`, `0.375` or `2`; decimals become exact rationals.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parameter(format!("cannot read {s:?} as a number"));
    if let Some((n, d)) = s.split_once('/') {
        let n: i64 = n.trim().parse().map_err(|_| bad())?;
        let d: i64 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        return Ok(Ratio::new(n, d));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, s),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() || frac.len() > 15 {
        return Err(bad());
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let den = 10i64.pow(frac.len() as u32);
    let digits = format!("{int}{frac}");
    let digits = digits.trim_start_matches('0');
    let num: i64 = if digits.is_empty() {
        0
    } else {
        digits.parse().map_err(|_| bad())?
    };
    let r = Ratio::new(num, den);
    Ok(if neg { -r } else { r })
}

pub fn to_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}
