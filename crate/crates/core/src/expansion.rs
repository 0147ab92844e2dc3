//! Exact algebra of log-polyhomogeneous terms on the punctured unit disc.
//!
//! A term is `c · t^p · t̄^q · L^ell` with `L = log|t|²`, rational exponents
//! `p`, `q` satisfying `p - q ∈ ℤ`, and a double-precision complex
//! coefficient. An [`Expansion`] is a finite sum of such terms together with
//! a truncation [`Order`]: the sum is asserted valid modulo terms whose
//! weight `p + q` is at least the order, with arbitrary log powers.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Rational = num_rational::BigRational;

/// Shorthand for the exact rational `num / den`.
pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn parse_rational(s: &str) -> Result<Rational> {
    let trimmed = s.trim();
    let value = Rational::from_str(trimmed)
        .map_err(|_| Error::Parse(format!("not an exact rational: {s:?}")))?;
    Ok(value)
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    match (r.numer().to_i64(), r.denom().to_i64()) {
        (Some(n), Some(d)) if n.unsigned_abs() < 1 << 53 && d < 1 << 53 => n as f64 / d as f64,
        _ => r.to_f64().unwrap_or(f64::NAN),
    }
}

/// Truncation order of an expansion.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Order {
    Finite(Rational),
    Infinite,
}

impl Order {
    pub fn finite(r: Rational) -> Self {
        Order::Finite(r)
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Order::Infinite)
    }

    pub fn shift(&self, by: &Rational) -> Order {
        match self {
            Order::Finite(w) => Order::Finite(w + by),
            Order::Infinite => Order::Infinite,
        }
    }

    pub fn scale(&self, by: &Rational) -> Order {
        match self {
            Order::Finite(w) => Order::Finite(w * by),
            Order::Infinite => Order::Infinite,
        }
    }

    /// Whether a term of the given weight lies strictly below this order.
    pub fn admits(&self, weight: &Rational) -> bool {
        match self {
            Order::Finite(w) => weight < w,
            Order::Infinite => true,
        }
    }
}

impl PartialOrd for Order {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Order {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Order::Infinite, Order::Infinite) => Ordering::Equal,
            (Order::Infinite, _) => Ordering::Greater,
            (_, Order::Infinite) => Ordering::Less,
            (Order::Finite(a), Order::Finite(b)) => a.cmp(b),
        }
    }
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Order::Finite(w) => write!(f, "{w}"),
            Order::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Order {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinity" | "exact" => Ok(Order::Infinite),
            other => parse_rational(other).map(Order::Finite),
        }
    }
}

/// Exponent data of a term: `t^p t̄^q L^ell`.
///
/// Ordered canonically by `(p + q, p, ell)`, which determines `q`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TermKey {
    p: Rational,
    q: Rational,
    ell: u32,
}

impl TermKey {
    pub fn new(p: Rational, q: Rational, ell: u32) -> Result<Self> {
        if !(&p - &q).is_integer() {
            return Err(Error::InvalidTerm(format!(
                "p - q must be an integer (p = {p}, q = {q})"
            )));
        }
        Ok(TermKey { p, q, ell })
    }

    pub fn p(&self) -> &Rational {
        &self.p
    }

    pub fn q(&self) -> &Rational {
        &self.q
    }

    pub fn ell(&self) -> u32 {
        self.ell
    }

    pub fn weight(&self) -> Rational {
        &self.p + &self.q
    }

    /// Integer winding `p - q`.
    pub fn winding(&self) -> i64 {
        (&self.p - &self.q).to_integer().to_i64().unwrap_or(0)
    }

    pub fn is_radial(&self) -> bool {
        self.p == self.q
    }

    /// Both exponents are non-negative integers: a jet term of a smooth function.
    pub fn is_smooth_jet(&self) -> bool {
        self.p.is_integer() && self.q.is_integer() && !self.p.is_negative() && !self.q.is_negative()
    }

    pub fn mirror(&self) -> TermKey {
        TermKey { p: self.q.clone(), q: self.p.clone(), ell: self.ell }
    }
}

impl PartialOrd for TermKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for TermKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.weight()
            .cmp(&other.weight())
            .then_with(|| self.p.cmp(&other.p))
            .then_with(|| self.ell.cmp(&other.ell))
    }
}

impl fmt::Display for TermKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t^({}) tbar^({}) L^{}", self.p, self.q, self.ell)
    }
}

/// A single term `coeff · t^p t̄^q L^ell`.
#[derive(Clone, Debug, PartialEq)]
pub struct LogMonomial {
    pub key: TermKey,
    pub coeff: Complex64,
}

impl LogMonomial {
    pub fn new(p: Rational, q: Rational, ell: u32, coeff: Complex64) -> Result<Self> {
        if !coeff.re.is_finite() || !coeff.im.is_finite() {
            return Err(Error::InvalidTerm(format!("non-finite coefficient {coeff}")));
        }
        Ok(LogMonomial { key: TermKey::new(p, q, ell)?, coeff })
    }

    pub fn p(&self) -> &Rational {
        self.key.p()
    }

    pub fn q(&self) -> &Rational {
        self.key.q()
    }

    pub fn ell(&self) -> u32 {
        self.key.ell()
    }
}

/// An expansion flattened to `(weight, winding, ell, coeff)` rows.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CompiledExpansion {
    terms: Vec<(f64, f64, i32, Complex64)>,
}

impl CompiledExpansion {
    pub fn eval(&self, t: Complex64) -> Result<Complex64> {
        let r = t.norm();
        if !(r > 0.0 && r < 1.0) || !r.is_finite() {
            return Err(Error::OutsideDisc(t));
        }
        Ok(self.eval_unchecked(t))
    }

    fn eval_unchecked(&self, t: Complex64) -> Complex64 {
        let ln_r = t.norm().ln();
        let log_sq = 2.0 * ln_r;
        let theta = t.arg();
        self.terms
            .iter()
            .map(|&(w, winding, ell, c)| {
                let phase = Complex64::from_polar(1.0, winding * theta);
                c * phase * ((w * ln_r).exp() * log_sq.powi(ell))
            })
            .sum()
    }
}

/// Finite sum of log-monomials with a tracked truncation order.
///
/// Immutable after construction; every operation returns a new value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ExpansionJson", into = "ExpansionJson")]
pub struct Expansion {
    terms: BTreeMap<TermKey, Complex64>,
    order: Order,
}

impl Default for Expansion {
    fn default() -> Self {
        Expansion::zero()
    }
}

impl Expansion {
    /// The exact zero.
    pub fn zero() -> Self {
        Expansion { terms: BTreeMap::new(), order: Order::Infinite }
    }

    /// An empty expansion asserting only `O(weight ≥ order)`.
    pub fn remainder(order: Order) -> Self {
        Expansion { terms: BTreeMap::new(), order }
    }

    /// Builds an expansion from terms, merging repeated keys.
    ///
    /// Rejects terms at or above the truncation order.
    pub fn from_terms<I>(terms: I, order: Order) -> Result<Self>
    where
        I: IntoIterator<Item = LogMonomial>,
    {
        let mut out = Expansion::remainder(order);
        for m in terms {
            if !m.coeff.re.is_finite() || !m.coeff.im.is_finite() {
                return Err(Error::InvalidTerm(format!("non-finite coefficient {}", m.coeff)));
            }
            if !out.order.admits(&m.key.weight()) {
                return Err(Error::InvalidTerm(format!(
                    "term {} has weight at or above the order {}",
                    m.key, out.order
                )));
            }
            out.accumulate(m.key, m.coeff);
        }
        Ok(out)
    }

    /// Single exact term `coeff · t^p t̄^q L^ell`.
    pub fn term(p: Rational, q: Rational, ell: u32, coeff: Complex64) -> Result<Self> {
        Expansion::from_terms([LogMonomial::new(p, q, ell, coeff)?], Order::Infinite)
    }

    pub fn constant(c: f64) -> Self {
        Expansion::log_power(0, c)
    }

    /// `c · L^ell`.
    pub fn log_power(ell: u32, c: f64) -> Self {
        Expansion::radial(Rational::zero(), ell, c)
    }

    /// `c · |t|^{2r} L^ell`.
    pub fn radial(r: Rational, ell: u32, c: f64) -> Self {
        Expansion::term(r.clone(), r, ell, Complex64::new(c, 0.0)).expect("radial terms are single-valued")
    }

    /// `c · t^a t̄^b` with integer exponents.
    pub fn jet(a: i64, b: i64, c: Complex64) -> Self {
        Expansion::term(int(a), int(b), 0, c).expect("integer exponents are single-valued")
    }

    fn accumulate(&mut self, key: TermKey, coeff: Complex64) {
        use std::collections::btree_map::Entry;
        match self.terms.entry(key) {
            Entry::Occupied(mut e) => {
                let sum = *e.get() + coeff;
                if sum == Complex64::zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
            Entry::Vacant(e) => {
                if coeff != Complex64::zero() {
                    e.insert(coeff);
                }
            }
        }
    }

    fn collect_with_order<I>(pairs: I, order: Order) -> Self
    where
        I: IntoIterator<Item = (TermKey, Complex64)>,
    {
        let mut out = Expansion::remainder(order);
        for (key, c) in pairs {
            if out.order.admits(&key.weight()) {
                out.accumulate(key, c);
            }
        }
        out
    }

    pub fn order(&self) -> &Order {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in canonical `(p + q, p, ell)` order.
    pub fn iter(&self) -> impl Iterator<Item = (&TermKey, &Complex64)> {
        self.terms.iter()
    }

    pub fn monomials(&self) -> impl Iterator<Item = LogMonomial> + '_ {
        self.terms.iter().map(|(k, c)| LogMonomial { key: k.clone(), coeff: *c })
    }

    pub fn coeff(&self, key: &TermKey) -> Complex64 {
        self.terms.get(key).copied().unwrap_or_else(Complex64::zero)
    }

    /// Copy with the order lowered to `order` (never raised); drops terms at or above it.
    pub fn truncated(&self, order: Order) -> Self {
        let order = order.min(self.order.clone());
        Expansion::collect_with_order(self.terms.iter().map(|(k, c)| (k.clone(), *c)), order)
    }

    /// Minimal weight `p + q` over the terms.
    pub fn weight(&self) -> Option<Rational> {
        self.terms.keys().next().map(TermKey::weight)
    }

    pub fn max_ell(&self) -> Option<u32> {
        self.terms.keys().map(TermKey::ell).max()
    }

    /// Leading weight and the largest log power among minimal-weight terms.
    pub fn weight_and_logorder(&self) -> Result<(Rational, u32)> {
        let w = self.weight().ok_or(Error::EmptyExpansion)?;
        let ell = self
            .terms
            .keys()
            .take_while(|k| k.weight() == w)
            .map(TermKey::ell)
            .max()
            .unwrap_or(0);
        Ok((w, ell))
    }

    pub fn add(&self, other: &Expansion) -> Expansion {
        let order = self.order.clone().min(other.order.clone());
        let pairs = self
            .terms
            .iter()
            .chain(other.terms.iter())
            .map(|(k, c)| (k.clone(), *c));
        Expansion::collect_with_order(pairs, order)
    }

    pub fn neg(&self) -> Expansion {
        self.scale(Complex64::new(-1.0, 0.0))
    }

    pub fn sub(&self, other: &Expansion) -> Expansion {
        self.add(&other.neg())
    }

    pub fn scale(&self, k: Complex64) -> Expansion {
        if k == Complex64::zero() {
            return Expansion::remainder(self.order.clone());
        }
        Expansion {
            terms: self
                .terms
                .iter()
                .map(|(key, c)| (key.clone(), c * k))
                .filter(|(_, c)| *c != Complex64::zero())
                .collect(),
            order: self.order.clone(),
        }
    }

    /// Termwise product with the conservative order `min(o_a + w_b, o_b + w_a)`.
    pub fn mul(&self, other: &Expansion) -> Expansion {
        let order = match (self.weight(), other.weight()) {
            (Some(wa), Some(wb)) => self.order.shift(&wb).min(other.order.shift(&wa)),
            _ => self.order.clone().min(other.order.clone()),
        };
        let mut out = Expansion::remainder(order);
        for (ka, ca) in &self.terms {
            for (kb, cb) in &other.terms {
                let key = TermKey {
                    p: &ka.p + &kb.p,
                    q: &ka.q + &kb.q,
                    ell: ka.ell + kb.ell,
                };
                if out.order.admits(&key.weight()) {
                    out.accumulate(key, ca * cb);
                }
            }
        }
        out
    }

    /// Wirtinger derivative `∂_t`, using `∂_t L = 1/t`.
    pub fn d_dt(&self) -> Expansion {
        self.wirtinger(true)
    }

    /// Wirtinger derivative `∂_t̄`, using `∂_t̄ L = 1/t̄`.
    pub fn d_dtbar(&self) -> Expansion {
        self.wirtinger(false)
    }

    fn wirtinger(&self, holomorphic: bool) -> Expansion {
        let one = Rational::one();
        let order = self.order.shift(&-one.clone());
        let mut out = Expansion::remainder(order);
        for (k, c) in &self.terms {
            let (exp, p, q) = if holomorphic {
                (&k.p, &k.p - &one, k.q.clone())
            } else {
                (&k.q, k.p.clone(), &k.q - &one)
            };
            if !exp.is_zero() {
                let factor = rational_to_f64(exp);
                out.accumulate(TermKey { p: p.clone(), q: q.clone(), ell: k.ell }, c * factor);
            }
            if k.ell > 0 {
                out.accumulate(TermKey { p, q, ell: k.ell - 1 }, c * f64::from(k.ell));
            }
        }
        out
    }

    /// Complex conjugation: swaps `(p, q)` and conjugates each coefficient.
    pub fn conj(&self) -> Expansion {
        Expansion {
            terms: self.terms.iter().map(|(k, c)| (k.mirror(), c.conj())).collect(),
            order: self.order.clone(),
        }
    }

    /// Evaluates at `t` with `0 < |t| < 1`.
    pub fn eval(&self, t: Complex64) -> Result<Complex64> {
        let r = t.norm();
        if !(r > 0.0 && r < 1.0) || !r.is_finite() {
            return Err(Error::OutsideDisc(t));
        }
        Ok(self.eval_unchecked(t))
    }

    /// Evaluation without the disc check; `t` must be nonzero.
    pub(crate) fn eval_unchecked(&self, t: Complex64) -> Complex64 {
        self.compile().eval_unchecked(t)
    }

    /// Floating-point form for repeated evaluation.
    pub fn compile(&self) -> CompiledExpansion {
        CompiledExpansion {
            terms: self
                .terms
                .iter()
                .map(|(k, c)| (rational_to_f64(&k.weight()), k.winding() as f64, k.ell as i32, *c))
                .collect(),
        }
    }

    /// `Σ |c| |t|^{p+q} |L|^ell`: the size of the sum before any cancellation.
    pub fn magnitude_at(&self, t: Complex64) -> Result<f64> {
        self.eval(t)?;
        let ln_r = t.norm().ln();
        let log_sq = (2.0 * ln_r).abs();
        Ok(self
            .terms
            .iter()
            .map(|(k, c)| c.norm() * (rational_to_f64(&k.weight()) * ln_r).exp() * log_sq.powi(k.ell as i32))
            .sum())
    }

    /// Pullback along `t ↦ t^nu`: `(p, q, ell, c) ↦ (nu p, nu q, ell, c nu^ell)`.
    pub fn pullback_power(&self, nu: i64) -> Result<Expansion> {
        if nu <= 0 {
            return Err(Error::InvalidPower(nu));
        }
        let k = int(nu);
        let nu_f = nu as f64;
        Ok(Expansion {
            terms: self
                .terms
                .iter()
                .map(|(key, c)| {
                    let key = TermKey { p: &key.p * &k, q: &key.q * &k, ell: key.ell };
                    let factor = nu_f.powi(key.ell as i32);
                    (key, c * factor)
                })
                .collect(),
            order: self.order.scale(&k),
        })
    }

    /// Multiplies by `t^a t̄^b` (exact, integer or rational shift with `a - b ∈ ℤ`).
    pub fn shift_exponents(&self, a: &Rational, b: &Rational) -> Result<Expansion> {
        if !(a - b).is_integer() {
            return Err(Error::InvalidTerm(format!("shift t^({a}) tbar^({b}) is multivalued")));
        }
        Ok(Expansion {
            terms: self
                .terms
                .iter()
                .map(|(k, c)| (TermKey { p: &k.p + a, q: &k.q + b, ell: k.ell }, *c))
                .collect(),
            order: self.order.shift(&(a + b)),
        })
    }

    /// Largest mismatch `|c(q,p,ell) - conj(c(p,q,ell))|` relative to the largest coefficient.
    pub fn reality_defect(&self) -> f64 {
        let scale = self.max_coeff_norm();
        if scale == 0.0 {
            return 0.0;
        }
        self.terms
            .iter()
            .map(|(k, c)| (self.coeff(&k.mirror()) - c.conj()).norm() / scale)
            .fold(0.0, f64::max)
    }

    /// Mirror invariant of a real-valued expansion, key by key, within `rel_tol`.
    pub fn is_real(&self, rel_tol: f64) -> bool {
        self.reality_defect() <= rel_tol
    }

    pub fn max_coeff_norm(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Explicit pruning of coefficients below `rel · max|coeff|`.
    pub fn clean(&self, rel: f64) -> Expansion {
        let cutoff = rel * self.max_coeff_norm();
        Expansion {
            terms: self
                .terms
                .iter()
                .filter(|(_, c)| c.norm() > cutoff)
                .map(|(k, c)| (k.clone(), *c))
                .collect(),
            order: self.order.clone(),
        }
    }
}

impl<'a> Add<&'a Expansion> for &'a Expansion {
    type Output = Expansion;
    fn add(self, rhs: &'a Expansion) -> Expansion {
        Expansion::add(self, rhs)
    }
}

impl<'a> Sub<&'a Expansion> for &'a Expansion {
    type Output = Expansion;
    fn sub(self, rhs: &'a Expansion) -> Expansion {
        Expansion::sub(self, rhs)
    }
}

impl<'a> Mul<&'a Expansion> for &'a Expansion {
    type Output = Expansion;
    fn mul(self, rhs: &'a Expansion) -> Expansion {
        Expansion::mul(self, rhs)
    }
}

impl Neg for &Expansion {
    type Output = Expansion;
    fn neg(self) -> Expansion {
        Expansion::neg(self)
    }
}

impl fmt::Display for Expansion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            f.write_str("0")?;
        }
        for (i, (k, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "({:.9e}{:+.9e}i)", c.re, c.im)?;
            if !k.p.is_zero() {
                write!(f, "·t^({})", k.p)?;
            }
            if !k.q.is_zero() {
                write!(f, "·tbar^({})", k.q)?;
            }
            if k.ell > 0 {
                write!(f, "·L^{}", k.ell)?;
            }
        }
        if let Order::Finite(w) = &self.order {
            write!(f, " + O(weight ≥ {w})")?;
        }
        Ok(())
    }
}

/// Wire form of a term.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TermJson {
    pub p: String,
    pub q: String,
    pub ell: u32,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

/// Wire form of an expansion: `{"order": "7/2" | "inf", "terms": [...]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExpansionJson {
    #[serde(default = "default_order")]
    pub order: String,
    #[serde(default)]
    pub terms: Vec<TermJson>,
}

fn default_order() -> String {
    "inf".to_string()
}

impl From<Expansion> for ExpansionJson {
    fn from(e: Expansion) -> Self {
        ExpansionJson {
            order: e.order.to_string(),
            terms: e
                .terms
                .iter()
                .map(|(k, c)| TermJson {
                    p: k.p.to_string(),
                    q: k.q.to_string(),
                    ell: k.ell,
                    re: c.re,
                    im: c.im,
                })
                .collect(),
        }
    }
}

impl TryFrom<ExpansionJson> for Expansion {
    type Error = Error;

    fn try_from(json: ExpansionJson) -> Result<Self> {
        let order: Order = json.order.parse()?;
        let terms = json
            .terms
            .into_iter()
            .map(|t| {
                LogMonomial::new(
                    parse_rational(&t.p)?,
                    parse_rational(&t.q)?,
                    t.ell,
                    Complex64::new(t.re, t.im),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Expansion::from_terms(terms, order)
    }
}
