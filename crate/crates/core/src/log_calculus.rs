//! Log-derivatives and log-Hessians as exact ratio forms, the pure-log
//! class profile, Poincaré-growth verification and leading asymptotics.
//!
//! Normalization: every Poincaré-type scale is expressed through
//! `λ = -log|t|²`. The model function `g = λ` satisfies
//! `∂∂̄ log g = -1/(|t|² λ²)` exactly, and a pure-log-class `g` with profile
//! `ℓ` satisfies `|∂∂̄ log g + ℓ/(|t|² λ²)| ≤ C/(|t|² λ³)`.

use std::sync::OnceLock;

use num_complex::Complex64;
use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expansion::{int, rational_to_f64, CompiledExpansion, Expansion, Rational};
use crate::sweep::{
    all_ok, max_with_witness, poincare_scale, trend_test, Sample, Sweep, Tolerances,
    TrendVerdict, Witness,
};

/// Exact quotient `num / den` of two expansions, divided only at evaluation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RatioForm {
    pub num: Expansion,
    pub den: Expansion,
    #[serde(skip)]
    compiled: OnceLock<(CompiledExpansion, CompiledExpansion)>,
}

impl PartialEq for RatioForm {
    fn eq(&self, other: &Self) -> bool {
        self.num == other.num && self.den == other.den
    }
}

impl RatioForm {
    pub fn new(num: Expansion, den: Expansion) -> Self {
        RatioForm { num, den, compiled: OnceLock::new() }
    }

    pub fn eval(&self, t: Complex64) -> Result<Complex64> {
        let (num, den) = self.compiled.get_or_init(|| (self.num.compile(), self.den.compile()));
        let d = den.eval(t)?;
        if d == Complex64::zero() || !d.is_finite() {
            return Err(Error::ZeroDenominator(t));
        }
        Ok(num.eval(t)? / d)
    }
}

/// `∂_t log g = ∂_t g / g`.
pub fn grad_log(g: &Expansion) -> Result<RatioForm> {
    if g.is_empty() {
        return Err(Error::EmptyExpansion);
    }
    Ok(RatioForm::new(g.d_dt(), g.clone()))
}

/// `∂_t∂_t̄ log g = (g ∂_t∂_t̄ g - ∂_t g · conj(∂_t g)) / g²`.
pub fn hess_log(g: &Expansion) -> Result<RatioForm> {
    if g.is_empty() {
        return Err(Error::EmptyExpansion);
    }
    let dg = g.d_dt();
    let num = g.mul(&dg.d_dtbar()).sub(&dg.mul(&dg.conj()));
    Ok(RatioForm::new(num, g.mul(g)))
}

/// Evaluates `∂∂̄ log g` at `t`, returning the real part.
pub fn hess_log_at(g: &Expansion, t: Complex64) -> Result<f64> {
    Ok(hess_log(g)?.eval(t)?.re)
}

/// Profile `ℓ` of `g = Σ_i L^i φ_i(t)`: the largest `i` with `φ_i(0) ≠ 0`.
pub fn log_class_profile(g: &Expansion) -> Result<u32> {
    if let Some((key, _)) = g.iter().find(|(k, _)| !k.is_smooth_jet()) {
        return Err(Error::NotPureLogClass(format!("term {key} is not a smooth jet times a log power")));
    }
    g.iter()
        .filter(|(k, _)| k.p().is_zero() && k.q().is_zero())
        .map(|(k, _)| k.ell())
        .max()
        .ok_or(Error::LeadingOrderUndetermined)
}

/// Per-sample values gathered by [`verify_poincare`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoincareSample {
    pub sample: Sample,
    pub g: f64,
    /// `|∂ log g| · |t| λ`.
    pub grad_scaled: f64,
    /// `|∂∂̄ log g + ℓ/(|t|²λ²)| · |t|² λ³`.
    pub hess_remainder: f64,
}

/// Empirical constants of the two Poincaré-growth bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoincareProfile {
    pub ell: u32,
    pub c_grad: f64,
    pub c_hess: f64,
    pub grad_witness: Witness,
    pub hess_witness: Witness,
    pub grad_trend_ok: bool,
    pub hess_trend_ok: bool,
    pub grad_trend: Vec<TrendVerdict>,
    pub hess_trend: Vec<TrendVerdict>,
    pub rays: Vec<f64>,
    pub radii: Vec<f64>,
    #[serde(skip)]
    pub samples: Vec<PoincareSample>,
}

/// Evaluates `g` at every sample and fails on the first non-positive value.
pub(crate) fn require_positive(g: &Expansion, samples: &[Sample]) -> Result<Vec<f64>> {
    let values: Vec<Result<f64>> = samples
        .par_iter()
        .map(|s| {
            let t = s.point();
            let v = g.eval(t)?;
            if v.re > 0.0 && v.re.is_finite() {
                Ok(v.re)
            } else {
                Err(Error::NotPositive { t, value: v.re })
            }
        })
        .collect();
    values.into_iter().collect()
}

/// Samples the gradient and Hessian bounds for a positive pure-log-class `g`.
pub fn verify_poincare(g: &Expansion, sweep: &Sweep, tol: &Tolerances) -> Result<PoincareProfile> {
    let ell = log_class_profile(g)?;
    let samples = sweep.samples()?;
    let values = require_positive(g, &samples)?;
    let grad = grad_log(g)?;
    let hess = hess_log(g)?;
    let ell_f = f64::from(ell);
    let rows: Vec<PoincareSample> = samples
        .par_iter()
        .zip(values.par_iter())
        .map(|(s, &gv)| {
            let t = s.point();
            let lam = poincare_scale(t);
            let r = t.norm();
            let dg = grad.eval(t)?;
            let h = hess.eval(t)?.re;
            Ok(PoincareSample {
                sample: *s,
                g: gv,
                grad_scaled: dg.norm() * r * lam,
                hess_remainder: (h * r * r * lam.powi(3) + ell_f * lam).abs(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let grad_vals: Vec<f64> = rows.iter().map(|r| r.grad_scaled).collect();
    let hess_vals: Vec<f64> = rows.iter().map(|r| r.hess_remainder).collect();
    let grad_witness = max_with_witness(&samples, &grad_vals).ok_or(Error::EmptyGrid)?;
    let hess_witness = max_with_witness(&samples, &hess_vals).ok_or(Error::EmptyGrid)?;
    let grad_trend = trend_test(&samples, &grad_vals, tol.trend_pct);
    let hess_trend = trend_test(&samples, &hess_vals, tol.trend_pct);
    Ok(PoincareProfile {
        ell,
        c_grad: grad_witness.value,
        c_hess: hess_witness.value,
        grad_witness,
        hess_witness,
        grad_trend_ok: all_ok(&grad_trend),
        hess_trend_ok: all_ok(&hess_trend),
        grad_trend,
        hess_trend,
        rays: sweep.angles.clone(),
        radii: sweep.radii(),
        samples: rows,
    })
}

/// `log g = a log|s|² + ℓ log(-log|s|²) + c + O(1/log|s|)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeadingAsymptotics {
    #[serde(with = "rational_string")]
    pub a: Rational,
    pub ell: u32,
    pub c: f64,
}

impl LeadingAsymptotics {
    /// `log g(t) - [a log|t|² + ℓ log λ + c]`.
    pub fn residual(&self, g: &Expansion, t: Complex64) -> Result<f64> {
        let v = g.eval(t)?.re;
        if v <= 0.0 {
            return Err(Error::NotPositive { t, value: v });
        }
        let log_sq = 2.0 * t.norm().ln();
        let model = rational_to_f64(&self.a) * log_sq + f64::from(self.ell) * (-log_sq).ln() + self.c;
        Ok(v.ln() - model)
    }
}

/// Extracts `(a, ℓ, c)` from the leading term of a squared norm `g`.
pub fn leading_asymptotics(g: &Expansion) -> Result<LeadingAsymptotics> {
    let (w, ell) = g.weight_and_logorder()?;
    let a = &w / int(2);
    let leading: Vec<_> = g.iter().filter(|(k, _)| k.weight() == w && k.ell() == ell).collect();
    let radial = leading.iter().find(|(k, _)| k.is_radial());
    let (key, coeff) = match (radial, leading.len()) {
        (Some(found), 1) => *found,
        _ => {
            return Err(Error::NonPositiveLeading(format!(
                "leading weight {w} with log power {ell} is not a single radial term"
            )))
        }
    };
    // The leading value is coeff · L^ℓ = coeff · (-1)^ℓ λ^ℓ.
    let sign = if ell % 2 == 0 { 1.0 } else { -1.0 };
    let value = coeff * sign;
    if value.im.abs() > 1e-12 * value.norm() || value.re <= 0.0 {
        return Err(Error::NonPositiveLeading(format!(
            "coefficient {coeff} on {key} gives leading value {value}·λ^{ell}"
        )));
    }
    Ok(LeadingAsymptotics { a, ell, c: value.re.ln() })
}

/// One summand `|t|^{2r} L^ℓ φ(t)` of a split sum, with `φ` a real smooth jet.
#[derive(Clone, Debug, PartialEq)]
pub struct LogPart {
    pub r: Rational,
    pub ell: u32,
    pub phi: Expansion,
}

impl LogPart {
    pub fn new(r: Rational, ell: u32, phi: Expansion) -> Result<Self> {
        if let Some((key, _)) = phi.iter().find(|(k, _)| !k.is_smooth_jet() || k.ell() > 0) {
            return Err(Error::NotPureLogClass(format!("φ term {key} is not a smooth jet")));
        }
        Ok(LogPart { r, ell, phi })
    }

    pub fn expansion(&self) -> Expansion {
        Expansion::radial(self.r.clone(), self.ell, 1.0).mul(&self.phi)
    }
}

pub fn split_sum(parts: &[LogPart]) -> Expansion {
    parts.iter().fold(Expansion::zero(), |acc, p| acc.add(&p.expansion()))
}

struct PartData {
    g: f64,
    r: f64,
    ell: f64,
    psi: Complex64,
    big_phi: f64,
}

fn part_data(parts: &[LogPart], t: Complex64) -> Result<Vec<PartData>> {
    let log_sq = 2.0 * t.norm().ln();
    parts
        .iter()
        .map(|p| {
            let phi = p.phi.eval(t)?.re;
            if phi == 0.0 {
                return Err(Error::ZeroDenominator(t));
            }
            let dphi = p.phi.d_dt().eval(t)?;
            let ddphi = p.phi.d_dt().d_dtbar().eval(t)?.re;
            let r = rational_to_f64(&p.r);
            Ok(PartData {
                g: t.norm().powf(2.0 * r) * log_sq.powi(p.ell as i32) * phi,
                r,
                ell: f64::from(p.ell),
                psi: dphi / phi,
                big_phi: ddphi / phi,
            })
        })
        .collect()
}

/// `∂_t log g = Σ_i (r_i/t + ℓ_i/(tL) + ∂φ_i/φ_i) g_i/g` for `g = Σ_i g_i`.
pub fn grad_log_split(parts: &[LogPart], t: Complex64) -> Result<Complex64> {
    let data = part_data(parts, t)?;
    let log_sq = 2.0 * t.norm().ln();
    let g: f64 = data.iter().map(|d| d.g).sum();
    Ok(data
        .iter()
        .map(|d| (d.r / t + d.ell / (t * log_sq) + d.psi) * (d.g / g))
        .sum())
}

/// Double-sum form of `∂∂̄ log g` for `g = Σ_i g_i`:
///
/// `½ Σ_{i,j} [-(ℓ_i+ℓ_j)/(|t|²L²) + Φ_i + Φ_j - |ψ_i|² - |ψ_j|² + |A_i - A_j|²] g_i g_j / g²`
///
/// with `ψ = ∂φ/φ`, `Φ = ∂∂̄φ/φ` and `A_i = r_i/t + ℓ_i/(tL) + ψ_i`.
pub fn hess_log_split(parts: &[LogPart], t: Complex64) -> Result<f64> {
    let data = part_data(parts, t)?;
    let log_sq = 2.0 * t.norm().ln();
    let abs2 = t.norm_sqr();
    let g: f64 = data.iter().map(|d| d.g).sum();
    let a: Vec<Complex64> =
        data.iter().map(|d| d.r / t + d.ell / (t * log_sq) + d.psi).collect();
    let mut total = 0.0;
    for (i, di) in data.iter().enumerate() {
        for (j, dj) in data.iter().enumerate() {
            let bracket = -(di.ell + dj.ell) / (abs2 * log_sq * log_sq) + di.big_phi + dj.big_phi
                - di.psi.norm_sqr()
                - dj.psi.norm_sqr()
                + (a[i] - a[j]).norm_sqr();
            total += 0.5 * bracket * di.g * dj.g;
        }
    }
    Ok(total / (g * g))
}

pub(crate) mod rational_string {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::expansion::{parse_rational, Rational};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&r.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(serde::de::Error::custom)
    }
}
