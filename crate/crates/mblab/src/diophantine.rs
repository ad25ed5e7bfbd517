//! Resonance arithmetic for the dispersion ratio alpha.
//!
//! The coupled dispersion relations k^3 and alpha k^3 interact through the
//! denominators k^3 - alpha k1^3 - alpha k2^3 (with k = k1 + k2) and
//! alpha k^3 - k1^3 - alpha k2^3. These factor as
//!
//! ```text
//!   k^3 - alpha k1^3 - alpha k2^3      = -3 alpha k (k1 - c1 k)(k1 - c2 k)
//!   alpha k^3 - k1^3 - alpha k2^3      = -(1 - alpha) k1 (k1 - d1 k)(k1 - d2 k)
//! ```
//!
//! where c1, c2 are the roots of 3 alpha x^2 - 3 alpha x + alpha - 1 and
//! d_i = 1/c_i. A denominator can vanish at nonzero integers exactly when a
//! root is rational, which happens for the one-parameter family
//! alpha = q^2 / (3p(p-q) + q^2) with integers p > q >= 1. This module decides
//! membership exactly, recovers (p, q), enumerates the resonant integer pairs,
//! and measures how well irrational roots are approximated by rationals.

use serde::Serialize;

use crate::error::{Error, Result};

/// Default denominator ceiling for approximability scans.
pub const DEFAULT_QMAX: u64 = 1_000_000;

/// Largest numerator/denominator accepted for an exact rational alpha.
const MAX_RATIONAL_PART: i64 = 1_000_000_000_000;

/// Search radius in p for nearest-special-rational diagnostics.
const NEAREST_SPECIAL_PMAX: i64 = 200;

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// The dispersion ratio as given: an exact fraction or a floating value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaValue {
    Rational { num: i64, den: i64 },
    Numeric(f64),
}

impl AlphaValue {
    /// Exact rational in (0, 1); reduced on construction.
    pub fn rational(num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(Error::domain("alpha denominator is zero"));
        }
        let sign = if (num < 0) != (den < 0) { -1 } else { 1 };
        let (mut a, mut b) = (num.abs(), den.abs());
        let g = gcd(a, b);
        if g > 0 {
            a /= g;
            b /= g;
        }
        if sign < 0 || a == 0 {
            return Err(Error::domain(format!(
                "alpha = {num}/{den} is not in (0, 1)"
            )));
        }
        if a >= b {
            return Err(Error::domain(format!(
                "alpha = {num}/{den} must be strictly below 1 (alpha = 1 is degenerate: \
                 the two dispersion relations coincide)"
            )));
        }
        if b > MAX_RATIONAL_PART {
            return Err(Error::domain(format!(
                "alpha denominator {b} too large for exact arithmetic"
            )));
        }
        Ok(AlphaValue::Rational { num: a, den: b })
    }

    pub fn numeric(x: f64) -> Result<Self> {
        if !x.is_finite() || x <= 0.0 || x >= 1.0 {
            return Err(Error::domain(format!("alpha = {x} is not in (0, 1)")));
        }
        Ok(AlphaValue::Numeric(x))
    }

    /// Parse "a/b" as an exact rational, anything else as a decimal.
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        if let Some((a, b)) = t.split_once('/') {
            let num: i64 = a
                .trim()
                .parse()
                .map_err(|_| Error::domain(format!("bad rational alpha `{t}`")))?;
            let den: i64 = b
                .trim()
                .parse()
                .map_err(|_| Error::domain(format!("bad rational alpha `{t}`")))?;
            AlphaValue::rational(num, den)
        } else {
            let x: f64 = t
                .parse()
                .map_err(|_| Error::domain(format!("bad numeric alpha `{t}`")))?;
            AlphaValue::numeric(x)
        }
    }

    pub fn as_f64(&self) -> f64 {
        match *self {
            AlphaValue::Rational { num, den } => num as f64 / den as f64,
            AlphaValue::Numeric(x) => x,
        }
    }
}

impl std::fmt::Display for AlphaValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            AlphaValue::Rational { num, den } => write!(f, "{num}/{den}"),
            AlphaValue::Numeric(x) => write!(f, "{x}"),
        }
    }
}

impl Serialize for AlphaValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Roots of the two resonance polynomials, as floats.
/// Always c1 > 1 > d1 > 0 > c2, d2 and d_i = 1/c_i.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ResonanceRoots {
    pub c1: f64,
    pub c2: f64,
    pub d1: f64,
    pub d2: f64,
}

/// Roots of 3 alpha x^2 - 3 alpha x + (alpha - 1) and their reciprocals.
/// Requires 0 < alpha < 1.
pub fn resonance_roots(alpha: f64) -> Result<ResonanceRoots> {
    if !alpha.is_finite() || alpha <= 0.0 || alpha >= 1.0 {
        return Err(Error::domain(format!(
            "resonance roots need 0 < alpha < 1, got {alpha}"
        )));
    }
    let s = (12.0 / alpha - 3.0).sqrt();
    let c1 = 0.5 + s / 6.0;
    let c2 = 0.5 - s / 6.0;
    Ok(ResonanceRoots {
        c1,
        c2,
        d1: 1.0 / c1,
        d2: 1.0 / c2,
    })
}

/// Exact rational roots, present when alpha is special.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExactRoots {
    pub c1: (i64, i64),
    pub c2: (i64, i64),
    pub d1: (i64, i64),
    pub d2: (i64, i64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlphaKind {
    /// alpha = q^2 / (3p(p-q) + q^2): the c-roots are p/q and (q-p)/q and
    /// resonant integer pairs exist.
    SpecialRational { p: i64, q: i64 },
    /// Exact fraction whose resonance roots are quadratic irrationals.
    RationalNonspecial,
    /// Floating alpha; treated as irrational.
    IrrationalNumeric,
}

/// Closest member of the special family to a numeric alpha.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NearestSpecial {
    pub p: i64,
    pub q: i64,
    pub alpha: f64,
    pub distance: f64,
}

/// Rational-approximability estimate for a single real number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TypeIndexEstimate {
    /// The number is rational within the scanned window.
    Infinite,
    Finite(f64),
}

impl TypeIndexEstimate {
    pub fn is_infinite(&self) -> bool {
        matches!(self, TypeIndexEstimate::Infinite)
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            TypeIndexEstimate::Finite(x) => Some(x),
            TypeIndexEstimate::Infinite => None,
        }
    }

    fn max(self, other: Self) -> Self {
        match (self, other) {
            (TypeIndexEstimate::Finite(a), TypeIndexEstimate::Finite(b)) => {
                TypeIndexEstimate::Finite(a.max(b))
            }
            _ => TypeIndexEstimate::Infinite,
        }
    }
}

impl std::fmt::Display for TypeIndexEstimate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TypeIndexEstimate::Infinite => write!(f, "infinite"),
            TypeIndexEstimate::Finite(x) => write!(f, "{x}"),
        }
    }
}

impl Serialize for TypeIndexEstimate {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            TypeIndexEstimate::Infinite => s.serialize_str("infinite"),
            TypeIndexEstimate::Finite(x) => s.serialize_f64(*x),
        }
    }
}

/// Approximability estimates for all four resonance roots.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RootTypeEstimates {
    pub c1: TypeIndexEstimate,
    pub c2: TypeIndexEstimate,
    pub d1: TypeIndexEstimate,
    pub d2: TypeIndexEstimate,
}

impl RootTypeEstimates {
    /// Worst of the two c-root estimates.
    pub fn nu_c(&self) -> TypeIndexEstimate {
        self.c1.max(self.c2)
    }

    /// Worst of the two d-root estimates.
    pub fn nu_d(&self) -> TypeIndexEstimate {
        self.d1.max(self.d2)
    }
}

/// Full decision record for one dispersion ratio.
#[derive(Debug, Clone, Serialize)]
pub struct AlphaClassification {
    pub value: AlphaValue,
    pub alpha: f64,
    pub kind: AlphaKind,
    pub roots: ResonanceRoots,
    pub exact_roots: Option<ExactRoots>,
    pub nu: RootTypeEstimates,
    pub nearest_special: Option<NearestSpecial>,
}

impl AlphaClassification {
    pub fn is_special(&self) -> bool {
        matches!(self.kind, AlphaKind::SpecialRational { .. })
    }

    pub fn pq(&self) -> Option<(i64, i64)> {
        match self.kind {
            AlphaKind::SpecialRational { p, q } => Some((p, q)),
            _ => None,
        }
    }

    /// The exact fraction when alpha was given as one.
    pub fn rational_ab(&self) -> Option<(i64, i64)> {
        match self.value {
            AlphaValue::Rational { num, den } => Some((num, den)),
            AlphaValue::Numeric(_) => None,
        }
    }
}

/// alpha for a given special-family witness (p, q), p > q >= 1, coprime.
pub fn special_alpha_from_pq(p: i64, q: i64) -> Result<AlphaValue> {
    if q < 1 || p <= q {
        return Err(Error::domain(format!(
            "special family needs p > q >= 1, got p = {p}, q = {q}"
        )));
    }
    if gcd(p, q) != 1 {
        return Err(Error::domain(format!("p = {p}, q = {q} are not coprime")));
    }
    AlphaValue::rational(q * q, 3 * p * (p - q) + q * q)
}

/// Decide whether any resonance root is rational, exactly.
///
/// For a fraction a/b the c-roots are rational iff 12/alpha - 3 = (12b - 3a)/a
/// is the square of a rational, tested by integer square roots on the reduced
/// fraction. On success the witness (p, q) with c1 = p/q is recovered and
/// verified against the closed-form family. Numeric alphas are classified as
/// irrational and annotated with the nearest special rational.
pub fn classify_alpha(value: AlphaValue) -> Result<AlphaClassification> {
    match value {
        AlphaValue::Rational { num: a, den: b } => {
            let alpha = a as f64 / b as f64;
            if let Some((p, q)) = special_witness(a, b) {
                let c1 = (p as f64) / (q as f64);
                let c2 = ((q - p) as f64) / (q as f64);
                let roots = ResonanceRoots {
                    c1,
                    c2,
                    d1: 1.0 / c1,
                    d2: 1.0 / c2,
                };
                let inf = TypeIndexEstimate::Infinite;
                Ok(AlphaClassification {
                    value,
                    alpha,
                    kind: AlphaKind::SpecialRational { p, q },
                    roots,
                    exact_roots: Some(ExactRoots {
                        c1: (p, q),
                        c2: (q - p, q),
                        d1: (q, p),
                        d2: (-q, p - q),
                    }),
                    nu: RootTypeEstimates {
                        c1: inf,
                        c2: inf,
                        d1: inf,
                        d2: inf,
                    },
                    nearest_special: None,
                })
            } else {
                let roots = resonance_roots(alpha)?;
                Ok(AlphaClassification {
                    value,
                    alpha,
                    kind: AlphaKind::RationalNonspecial,
                    roots,
                    exact_roots: None,
                    nu: estimate_all_roots(&roots),
                    nearest_special: None,
                })
            }
        }
        AlphaValue::Numeric(alpha) => {
            let roots = resonance_roots(alpha)?;
            Ok(AlphaClassification {
                value,
                alpha,
                kind: AlphaKind::IrrationalNumeric,
                roots,
                exact_roots: None,
                nu: estimate_all_roots(&roots),
                nearest_special: Some(nearest_special(alpha)),
            })
        }
    }
}

fn estimate_all_roots(roots: &ResonanceRoots) -> RootTypeEstimates {
    let est = |x: f64| type_index_estimate(x, DEFAULT_QMAX).unwrap_or(TypeIndexEstimate::Infinite);
    RootTypeEstimates {
        c1: est(roots.c1),
        c2: est(roots.c2),
        d1: est(roots.d1),
        d2: est(roots.d2),
    }
}

/// (p, q) with c1 = p/q if the reduced fraction a/b is special.
fn special_witness(a: i64, b: i64) -> Option<(i64, i64)> {
    // 12/alpha - 3 = (12b - 3a)/a, reduced, must have square numerator and
    // denominator; then c1 = 1/2 + sqrt(.)/6 = (3 sy + sx)/(6 sy).
    let x = 12 * b - 3 * a;
    let y = a;
    let g = gcd(x, y);
    let (x, y) = (x / g, y / g);
    let sx = (x as i128).isqrt();
    let sy = (y as i128).isqrt();
    if sx * sx != x as i128 || sy * sy != y as i128 {
        return None;
    }
    let (sx, sy) = (sx as i64, sy as i64);
    let mut p = 3 * sy + sx;
    let mut q = 6 * sy;
    let g = gcd(p, q);
    p /= g;
    q /= g;
    // Confirm against the closed form q^2 / (3p(p-q) + q^2).
    let lhs = (q as i128) * (q as i128) * (b as i128);
    let rhs = ((3 * p as i128 * (p - q) as i128) + (q as i128 * q as i128)) * a as i128;
    if lhs == rhs && p > q && q >= 1 {
        Some((p, q))
    } else {
        None
    }
}

fn nearest_special(alpha: f64) -> NearestSpecial {
    let mut best = NearestSpecial {
        p: 2,
        q: 1,
        alpha: 1.0 / 7.0,
        distance: (alpha - 1.0 / 7.0).abs(),
    };
    for p in 2..=NEAREST_SPECIAL_PMAX {
        for q in 1..p {
            if gcd(p, q) != 1 {
                continue;
            }
            let val = (q * q) as f64 / ((3 * p * (p - q)) + q * q) as f64;
            let d = (alpha - val).abs();
            if d < best.distance {
                best = NearestSpecial {
                    p,
                    q,
                    alpha: val,
                    distance: d,
                };
            }
        }
    }
    best
}

/// Simple continued fraction of a float, with convergents.
#[derive(Debug, Clone, Serialize)]
pub struct ContinuedFraction {
    pub value: f64,
    pub quotients: Vec<i128>,
    /// (p_n, q_n) aligned with `quotients`; q_n > 0.
    pub convergents: Vec<(i128, i128)>,
    /// True when the expansion hit an (effectively) integer tail, i.e. the
    /// value is rational at working precision.
    pub terminated: bool,
}

/// Expand rho = [a0; a1, a2, ...] up to `max_terms` quotients. Stops early
/// when the fractional tail drops below 1e-14 (rational at float precision)
/// or when a convergent would overflow 128-bit integers.
pub fn continued_fraction_expand(rho: f64, max_terms: usize) -> ContinuedFraction {
    let mut quotients = Vec::new();
    let mut convergents = Vec::new();
    let mut terminated = false;
    // h_{-2} = 0, h_{-1} = 1 / k_{-2} = 1, k_{-1} = 0.
    let (mut h2, mut h1): (i128, i128) = (0, 1);
    let (mut k2, mut k1): (i128, i128) = (1, 0);
    let mut x = rho;
    for _ in 0..max_terms {
        if !x.is_finite() || x.abs() >= 1e17 {
            break;
        }
        let a = x.floor() as i128;
        let (h, k) = match (
            a.checked_mul(h1).and_then(|t| t.checked_add(h2)),
            a.checked_mul(k1).and_then(|t| t.checked_add(k2)),
        ) {
            (Some(h), Some(k)) => (h, k),
            _ => break,
        };
        quotients.push(a);
        convergents.push((h, k));
        h2 = h1;
        h1 = h;
        k2 = k1;
        k1 = k;
        let frac = x - a as f64;
        if frac.abs() < 1e-14 {
            terminated = true;
            break;
        }
        x = 1.0 / frac;
    }
    ContinuedFraction {
        value: rho,
        quotients,
        convergents,
        terminated,
    }
}

/// Measured approximability exponent of rho over denominators q <= q_max.
///
/// Scans the continued-fraction convergents p/q with 2 <= q <= q_max and
/// returns the smallest nu for which |rho - p/q| >= 1 / (sqrt(5) q^{2 + nu})
/// holds across the window. The Hurwitz bound |rho - p/q| < 1/(sqrt(5) q^2),
/// attained along golden-ratio tails, is the normalization: numbers that are
/// as badly approximable as possible measure near zero, while admitting
/// abnormally close rational approximations pushes the estimate up. Values
/// that are rational at float precision inside the window report `Infinite`.
/// The estimate is monotone nondecreasing in q_max.
pub fn type_index_estimate(rho: f64, q_max: u64) -> Result<TypeIndexEstimate> {
    if q_max < 2 {
        return Err(Error::domain("type index scan needs q_max >= 2"));
    }
    let cf = continued_fraction_expand(rho, 128);
    if cf.terminated {
        if let Some(&(_, q)) = cf.convergents.last() {
            if q <= q_max as i128 {
                return Ok(TypeIndexEstimate::Infinite);
            }
        }
    }
    let sqrt5 = 5.0f64.sqrt();
    let mut best = 0.0f64;
    for &(p, q) in &cf.convergents {
        if q < 2 || q > q_max as i128 {
            continue;
        }
        let qf = q as f64;
        let delta = (rho - p as f64 / qf).abs();
        if delta == 0.0 {
            return Ok(TypeIndexEstimate::Infinite);
        }
        let est = -(sqrt5 * qf * qf * delta).ln() / qf.ln();
        best = best.max(est);
    }
    Ok(TypeIndexEstimate::Finite(best))
}

/// One resonant integer pair: k1 + k2 = k with the first factor sitting
/// exactly on a root line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ModeTriple {
    pub k: i64,
    pub k1: i64,
    pub k2: i64,
}

/// All exactly-resonant pairs with |k| <= k_max for a special alpha.
#[derive(Debug, Clone, Serialize)]
pub struct ResonantModeSet {
    /// k1 = c1 k (and then k2 = c2 k); exists when q | k.
    pub c: Vec<ModeTriple>,
    /// k1 = d1 k; exists when p | k.
    pub d1: Vec<ModeTriple>,
    /// k1 = d2 k; exists when (p - q) | k.
    pub d2: Vec<ModeTriple>,
}

/// Enumerate the integer pairs on the resonance lines. Errors unless alpha is
/// special: for other ratios the lines carry no nonzero integer points.
pub fn resonant_modes(class: &AlphaClassification, k_max: i64) -> Result<ResonantModeSet> {
    let (p, q) = class.pq().ok_or_else(|| {
        Error::domain("resonant mode enumeration needs a special rational alpha")
    })?;
    let mut set = ResonantModeSet {
        c: Vec::new(),
        d1: Vec::new(),
        d2: Vec::new(),
    };
    for k in -k_max..=k_max {
        if k == 0 {
            continue;
        }
        if k % q == 0 {
            let k1 = p * (k / q);
            set.c.push(ModeTriple { k, k1, k2: k - k1 });
        }
        if k % p == 0 {
            let k1 = q * (k / p);
            set.d1.push(ModeTriple { k, k1, k2: k - k1 });
        }
        if k % (p - q) == 0 {
            let k1 = -q * (k / (p - q));
            set.d2.push(ModeTriple { k, k1, k2: k - k1 });
        }
    }
    Ok(set)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RootLabel {
    C1,
    C2,
    D1,
    D2,
}

/// An integer point n close to root * k.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NearResonanceEntry {
    pub k: i64,
    pub n: i64,
    pub root: RootLabel,
    pub distance: f64,
}

/// All integer pairs (k, n), 0 < |k| <= k_max, with |n - root * k| <= eps for
/// any of the four roots. Exact resonances (special alpha) are reported with
/// distance exactly 0. Sorted by distance, then |k|.
pub fn near_resonance_scan(
    class: &AlphaClassification,
    k_max: i64,
    eps: f64,
) -> Vec<NearResonanceEntry> {
    let roots = [
        (RootLabel::C1, class.roots.c1),
        (RootLabel::C2, class.roots.c2),
        (RootLabel::D1, class.roots.d1),
        (RootLabel::D2, class.roots.d2),
    ];
    let mut out = Vec::new();
    for k in -k_max..=k_max {
        if k == 0 {
            continue;
        }
        for &(label, r) in &roots {
            let exact_n = exact_partner(class, label, k);
            if let Some(n) = exact_n {
                out.push(NearResonanceEntry {
                    k,
                    n,
                    root: label,
                    distance: 0.0,
                });
            }
            let target = r * k as f64;
            let lo = (target - eps).ceil() as i64;
            let hi = (target + eps).floor() as i64;
            for n in lo..=hi {
                if Some(n) == exact_n {
                    continue;
                }
                out.push(NearResonanceEntry {
                    k,
                    n,
                    root: label,
                    distance: (n as f64 - target).abs(),
                });
            }
        }
    }
    out.sort_by(|a, b| {
        a.distance
            .total_cmp(&b.distance)
            .then(a.k.abs().cmp(&b.k.abs()))
            .then(a.k.cmp(&b.k))
            .then(a.n.cmp(&b.n))
    });
    out
}

/// The integer exactly on the root line at this k, when alpha is special.
fn exact_partner(class: &AlphaClassification, label: RootLabel, k: i64) -> Option<i64> {
    let (p, q) = class.pq()?;
    match label {
        RootLabel::C1 => (k % q == 0).then(|| p * (k / q)),
        RootLabel::C2 => (k % q == 0).then(|| (q - p) * (k / q)),
        RootLabel::D1 => (k % p == 0).then(|| q * (k / p)),
        RootLabel::D2 => (k % (p - q) == 0).then(|| -q * (k / (p - q))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn roots_of_one_seventh_are_exact_integers() {
        let class = classify_alpha(AlphaValue::rational(1, 7).unwrap()).unwrap();
        assert_eq!(class.kind, AlphaKind::SpecialRational { p: 2, q: 1 });
        assert_eq!(class.roots.c1, 2.0);
        assert_eq!(class.roots.c2, -1.0);
        assert_eq!(class.roots.d1, 0.5);
        assert_eq!(class.roots.d2, -1.0);
        let exact = class.exact_roots.unwrap();
        assert_eq!(exact.c1, (2, 1));
        assert_eq!(exact.d2, (-1, 1));
        assert!(class.nu.nu_c().is_infinite());
    }

    #[test]
    fn roots_of_one_half_match_the_quadratic_formula() {
        let class = classify_alpha(AlphaValue::rational(1, 2).unwrap()).unwrap();
        assert_eq!(class.kind, AlphaKind::RationalNonspecial);
        // c1 = 1/2 + sqrt(21)/6.
        assert!((class.roots.c1 - 1.2637626158259734).abs() < 1e-12);
        assert!((class.roots.c2 + 0.2637626158259734).abs() < 1e-12);
        // Root identities: sum 1, product (alpha-1)/(3 alpha), reciprocals.
        let r = &class.roots;
        assert!((r.c1 + r.c2 - 1.0).abs() < 1e-12);
        assert!((r.c1 * r.c2 - (0.5 - 1.0) / 1.5).abs() < 1e-12);
        assert!((r.c1 * r.d1 - 1.0).abs() < 1e-14);
        assert!((r.c2 * r.d2 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn root_identities_hold_across_the_interval() {
        for i in 1..40 {
            let alpha = i as f64 / 40.0;
            let r = resonance_roots(alpha).unwrap();
            assert!((r.c1 + r.c2 - 1.0).abs() < 1e-12, "sum at alpha = {alpha}");
            let want = (alpha - 1.0) / (3.0 * alpha);
            assert!(
                (r.c1 * r.c2 - want).abs() < 1e-12,
                "product at alpha = {alpha}"
            );
            let dsum = -3.0 * alpha / (1.0 - alpha);
            assert!(
                (r.d1 + r.d2 - dsum).abs() < 1e-10 * (1.0 + dsum.abs()),
                "d-sum at alpha = {alpha}"
            );
            assert!(
                (r.d1 * r.d2 - dsum).abs() < 1e-10 * (1.0 + dsum.abs()),
                "d-product at alpha = {alpha}"
            );
            assert!(r.c1 > 1.0 && r.d1 > 0.0 && r.d1 < 1.0 && r.c2 < 0.0 && r.d2 < 0.0);
        }
    }

    #[test]
    fn out_of_range_ratios_are_rejected() {
        assert!(AlphaValue::rational(1, 1).is_err());
        assert!(AlphaValue::rational(7, 7).is_err());
        assert!(AlphaValue::rational(3, 2).is_err());
        assert!(AlphaValue::rational(-1, 3).is_err());
        assert!(AlphaValue::rational(0, 5).is_err());
        assert!(AlphaValue::numeric(0.0).is_err());
        assert!(AlphaValue::numeric(1.0).is_err());
        assert!(AlphaValue::numeric(1.5).is_err());
        assert!(AlphaValue::numeric(-0.2).is_err());
        assert!(resonance_roots(1.0).is_err());
        // Parsing reduces: 2/14 = 1/7.
        let v = AlphaValue::parse("2/14").unwrap();
        assert_eq!(v, AlphaValue::Rational { num: 1, den: 7 });
    }

    #[test]
    fn hand_classified_ratios() {
        for (a, b, special) in [
            (1i64, 7i64, Some((2i64, 1i64))),
            (4, 13, Some((3, 2))),
            (1, 3, None),
            (2, 3, None),
            (1, 2, None),
            (1, 13, None),
        ] {
            let class = classify_alpha(AlphaValue::rational(a, b).unwrap()).unwrap();
            assert_eq!(class.pq(), special, "alpha = {a}/{b}");
        }
    }

    #[test]
    fn witness_round_trips_through_the_closed_form() {
        for (p, q) in [(2i64, 1i64), (3, 1), (3, 2), (5, 2), (7, 3), (12, 7), (25, 4)] {
            let alpha = special_alpha_from_pq(p, q).unwrap();
            let class = classify_alpha(alpha).unwrap();
            assert_eq!(class.pq(), Some((p, q)), "alpha = {alpha}");
        }
        assert!(special_alpha_from_pq(2, 2).is_err());
        assert!(special_alpha_from_pq(4, 2).is_err());
    }

    #[test]
    fn classification_matches_family_enumeration_up_to_denominator_200() {
        // Independent truth set: every reduced alpha with denominator <= 200
        // reachable from witnesses p <= 500.
        let mut family: HashSet<(i64, i64)> = HashSet::new();
        for p in 2i64..=500 {
            for q in 1..p {
                if gcd(p, q) != 1 {
                    continue;
                }
                let num = q * q;
                let den = 3 * p * (p - q) + q * q;
                let g = gcd(num, den);
                if den / g <= 200 {
                    family.insert((num / g, den / g));
                }
            }
        }
        let mut checked = 0;
        for b in 2i64..=200 {
            for a in 1..b {
                if gcd(a, b) != 1 {
                    continue;
                }
                let class = classify_alpha(AlphaValue::rational(a, b).unwrap()).unwrap();
                assert_eq!(
                    class.is_special(),
                    family.contains(&(a, b)),
                    "disagreement at alpha = {a}/{b}"
                );
                checked += 1;
            }
        }
        assert!(checked > 12000, "enumeration looks truncated: {checked}");
    }

    #[test]
    fn golden_ratio_expansion_is_all_ones() {
        let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
        let cf = continued_fraction_expand(phi, 30);
        assert!(!cf.terminated);
        assert!(cf.quotients.iter().all(|&a| a == 1));
        // Denominators are Fibonacci numbers.
        let (mut f1, mut f2) = (0i128, 1i128);
        for &(_, q) in &cf.convergents {
            let f = f1 + f2;
            assert_eq!(q, f2, "denominator sequence");
            f1 = f2;
            f2 = f;
        }
    }

    #[test]
    fn rational_expansion_terminates() {
        let cf = continued_fraction_expand(1.0 / 7.0, 30);
        assert!(cf.terminated);
        assert_eq!(cf.quotients, vec![0, 7]);
        assert_eq!(cf.convergents.last(), Some(&(1, 7)));
    }

    #[test]
    fn sqrt2_expansion_and_convergent_gaps() {
        let r = 2.0f64.sqrt();
        let cf = continued_fraction_expand(r, 20);
        assert_eq!(cf.quotients[0], 1);
        for &a in &cf.quotients[1..] {
            assert_eq!(a, 2, "sqrt(2) = [1; 2, 2, 2, ...]");
        }
        for w in cf.convergents.windows(2) {
            let (p, q) = w[0];
            let (_, q_next) = w[1];
            let delta = (r - p as f64 / q as f64).abs();
            assert!(
                delta < 1.0 / (q as f64 * q_next as f64) * (1.0 + 1e-12),
                "|rho - p/q| < 1/(q q') violated at q = {q}"
            );
        }
    }

    #[test]
    fn negative_values_expand_consistently() {
        // c2 at alpha = 1/2 is about -0.2638.
        let x = -0.2637626158259734;
        let cf = continued_fraction_expand(x, 20);
        assert_eq!(cf.quotients[0], -1);
        for &(p, q) in &cf.convergents {
            assert!(q >= 0);
            assert!((x - p as f64 / q as f64).abs() < 1.0 || q == 0);
        }
    }

    #[test]
    fn approximability_of_golden_tail_is_tiny() {
        let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
        let est = type_index_estimate(phi, DEFAULT_QMAX).unwrap();
        let v = est.finite().expect("phi is not rational");
        assert!(v < 0.05, "golden ratio should measure near zero, got {v}");
    }

    #[test]
    fn approximability_of_truncated_liouville_is_large() {
        // sum_{n=1..4} 2^{-n!} is exactly representable in f64; the partial
        // sum 49/64 approximates it to 2^{-24}, far beyond the Hurwitz rate.
        let rho = 0.5 + 0.25 + (2.0f64).powi(-6) + (2.0f64).powi(-24);
        let est = type_index_estimate(rho, DEFAULT_QMAX).unwrap();
        let v = est.finite().expect("termination lies beyond q_max");
        assert!(v > 1.0, "Liouville-style constructions must stand out, got {v}");
    }

    #[test]
    fn approximability_of_rationals_is_flagged_infinite() {
        for rho in [1.0 / 7.0, 0.5, 2.0, -1.0, 0.110001] {
            let est = type_index_estimate(rho, DEFAULT_QMAX).unwrap();
            assert!(est.is_infinite(), "rho = {rho} is rational");
        }
    }

    #[test]
    fn approximability_is_monotone_in_the_window() {
        for rho in [(1.0 + 5.0f64.sqrt()) / 2.0, 2.0f64.sqrt(), std::f64::consts::PI] {
            let mut prev = -1.0;
            for q_max in [10u64, 100, 1000, 10_000, 100_000, 1_000_000] {
                let est = type_index_estimate(rho, q_max).unwrap();
                let v = est.finite().unwrap_or(f64::INFINITY);
                assert!(v >= prev, "estimate dropped at q_max = {q_max} for rho = {rho}");
                prev = v;
            }
        }
        assert!(type_index_estimate(0.5, 1).is_err());
    }

    #[test]
    fn resonant_mode_families_at_one_seventh() {
        let class = classify_alpha(AlphaValue::rational(1, 7).unwrap()).unwrap();
        let set = resonant_modes(&class, 10).unwrap();
        // q = 1: every k carries a c-pair with k1 = 2k, k2 = -k.
        assert_eq!(set.c.len(), 20);
        assert!(set.c.contains(&ModeTriple { k: 3, k1: 6, k2: -3 }));
        // p = 2: even k only, split in half.
        assert_eq!(set.d1.len(), 10);
        assert!(set.d1.contains(&ModeTriple { k: 4, k1: 2, k2: 2 }));
        assert!(!set.d1.iter().any(|t| t.k % 2 != 0));
        // p - q = 1: every k, k1 = -k, k2 = 2k.
        assert_eq!(set.d2.len(), 20);
        assert!(set.d2.contains(&ModeTriple { k: 5, k1: -5, k2: 10 }));
        for t in set.c.iter().chain(&set.d1).chain(&set.d2) {
            assert_eq!(t.k1 + t.k2, t.k, "pairs must sum to k");
        }
    }

    #[test]
    fn resonant_modes_need_a_special_ratio() {
        let class = classify_alpha(AlphaValue::rational(1, 2).unwrap()).unwrap();
        assert!(resonant_modes(&class, 10).is_err());
    }

    #[test]
    fn near_resonance_scan_sees_exact_zeros_at_special_alpha() {
        let class = classify_alpha(AlphaValue::rational(1, 7).unwrap()).unwrap();
        let entries = near_resonance_scan(&class, 10, 1e-9);
        assert!(!entries.is_empty());
        assert!(entries.iter().all(|e| e.distance == 0.0));
        // c1, c2, d2 fire at every k; d1 only at even k.
        assert_eq!(entries.len(), 20 * 3 + 10);
    }

    #[test]
    fn near_resonance_scan_with_wide_eps_is_complete() {
        let class = classify_alpha(AlphaValue::rational(1, 2).unwrap()).unwrap();
        let eps = 10.0;
        let entries = near_resonance_scan(&class, 3, eps);
        let mut want = 0usize;
        for k in [-3i64, -2, -1, 1, 2, 3] {
            for r in [
                class.roots.c1,
                class.roots.c2,
                class.roots.d1,
                class.roots.d2,
            ] {
                let target = r * k as f64;
                want += ((target + eps).floor() as i64 - (target - eps).ceil() as i64 + 1) as usize;
            }
        }
        assert_eq!(entries.len(), want);
        // Distances come out sorted.
        for w in entries.windows(2) {
            assert!(w[0].distance <= w[1].distance);
        }
    }

    #[test]
    fn numeric_alpha_reports_nearest_special_member() {
        let class = classify_alpha(AlphaValue::numeric(0.14285714).unwrap()).unwrap();
        assert_eq!(class.kind, AlphaKind::IrrationalNumeric);
        let near = class.nearest_special.unwrap();
        assert_eq!((near.p, near.q), (2, 1));
        assert!(near.distance < 1e-6);

        let class = classify_alpha(AlphaValue::numeric(0.38).unwrap()).unwrap();
        assert!(class.nearest_special.is_some());
        assert!(!class.is_special());
    }
}
