//! Hermitian metric families `G(t^ν) = D(t) H(t) D(t)^*` with
//! `D(t) = diag(t^{-e_α})`, their determinants, first Chern form
//! asymptotics, curvature endomorphisms and growth checks.
//!
//! Curvature convention: `Θ = ∂_t̄(∂_t G · G⁻¹)`, and the curvature
//! endomorphism reported everywhere is `R = -Θ`, the coefficient of
//! `i dt∧dt̄`. With this sign the Poincaré model `G = -log|t|²` has
//! `R = 1/(|t|² λ²) > 0` and `tr R = -∂∂̄ log det G`.
//!
//! `G⁻¹` is never formed symbolically: matrix quantities are evaluated
//! pointwise from exact entrywise derivatives.

use nalgebra::{Cholesky, DMatrix};
use num_complex::Complex64;
use num_traits::{Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expansion::{int, rational_to_f64, Expansion, Rational};
use crate::log_calculus::{
    grad_log, hess_log, log_class_profile, require_positive, verify_poincare, PoincareProfile,
    RatioForm,
};
use crate::sweep::{
    all_ok, max_with_witness, min_with_witness, poincare_scale, trend_test, Sample, Sweep,
    Tolerances, TrendVerdict, Witness, NOISE_FLOOR,
};

/// Largest dimension accepted by the permutation determinant.
pub const MAX_DET_DIM: usize = 6;

/// Samples whose equilibrated metric has a larger condition number are rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Relative tolerance of the curvature trace identity.
pub const TRACE_REL_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Variable {
    S,
    #[default]
    T,
}

/// Square matrix of expansions in one variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricExpansion {
    pub entries: Vec<Vec<Expansion>>,
    #[serde(default)]
    pub variable: Variable,
}

impl MetricExpansion {
    pub fn new(entries: Vec<Vec<Expansion>>, variable: Variable) -> Result<Self> {
        let m = MetricExpansion { entries, variable };
        m.validate()?;
        Ok(m)
    }

    pub fn diagonal(diag: Vec<Expansion>, variable: Variable) -> Result<Self> {
        let n = diag.len();
        let entries = diag
            .into_iter()
            .enumerate()
            .map(|(i, d)| {
                (0..n).map(|j| if i == j { d.clone() } else { Expansion::zero() }).collect()
            })
            .collect();
        MetricExpansion::new(entries, variable)
    }

    pub fn scalar(g: Expansion, variable: Variable) -> Result<Self> {
        MetricExpansion::new(vec![vec![g]], variable)
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    /// Checks squareness, Hermitian symmetry and reality of the diagonal.
    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if n == 0 {
            return Err(Error::Invariant("metric has dimension 0".into()));
        }
        if self.entries.iter().any(|row| row.len() != n) {
            return Err(Error::Invariant("metric matrix is not square".into()));
        }
        for a in 0..n {
            if !self.entries[a][a].is_real(1e-12) {
                return Err(Error::Invariant(format!("diagonal entry ({a}, {a}) is not real-valued")));
            }
            for b in (a + 1)..n {
                let mirror = self.entries[a][b].conj();
                let diff = mirror.sub(&self.entries[b][a]);
                let scale = self.entries[a][b].max_coeff_norm().max(self.entries[b][a].max_coeff_norm());
                if diff.max_coeff_norm() > 1e-12 * scale {
                    return Err(Error::Invariant(format!(
                        "entry ({b}, {a}) is not the conjugate of entry ({a}, {b})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn map_entries<F>(&self, f: F) -> Result<MetricExpansion>
    where
        F: Fn(usize, usize, &Expansion) -> Result<Expansion>,
    {
        let entries = self
            .entries
            .iter()
            .enumerate()
            .map(|(a, row)| row.iter().enumerate().map(|(b, x)| f(a, b, x)).collect())
            .collect::<Result<Vec<Vec<_>>>>()?;
        Ok(MetricExpansion { entries, variable: self.variable })
    }

    pub fn pullback_power(&self, nu: i64) -> Result<MetricExpansion> {
        let mut out = self.map_entries(|_, _, x| x.pullback_power(nu))?;
        out.variable = Variable::T;
        Ok(out)
    }

    pub fn max_ell(&self) -> u32 {
        self.entries.iter().flatten().filter_map(Expansion::max_ell).max().unwrap_or(0)
    }

    fn eval_with<F>(&self, t: Complex64, f: F) -> Result<DMatrix<Complex64>>
    where
        F: Fn(&Expansion) -> Expansion,
    {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for a in 0..n {
            for b in 0..n {
                m[(a, b)] = f(&self.entries[a][b]).eval(t)?;
            }
        }
        Ok(m)
    }

    pub fn eval(&self, t: Complex64) -> Result<DMatrix<Complex64>> {
        self.eval_with(t, Expansion::clone)
    }
}

/// Determinant by permutation expansion, exact in the expansion algebra.
pub fn det_expansion(m: &MetricExpansion) -> Result<Expansion> {
    let n = m.dim();
    if n > MAX_DET_DIM {
        return Err(Error::DimensionTooLarge(n));
    }
    let mut total = Expansion::zero();
    for (perm, sign) in permutations(n) {
        let product = perm
            .iter()
            .enumerate()
            .fold(Expansion::constant(1.0), |acc, (row, &col)| acc.mul(&m.entries[row][col]));
        total = if sign > 0 { total.add(&product) } else { total.sub(&product) };
    }
    Ok(total)
}

/// All permutations of `0..n` with their signs, in lexicographic order.
fn permutations(n: usize) -> Vec<(Vec<usize>, i32)> {
    fn extend(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<(Vec<usize>, i32)>) {
        let n = used.len();
        if prefix.len() == n {
            let inversions = (0..n)
                .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                .filter(|&(i, j)| prefix[i] > prefix[j])
                .count();
            out.push((prefix.clone(), if inversions % 2 == 0 { 1 } else { -1 }));
            return;
        }
        for k in 0..n {
            if !used[k] {
                used[k] = true;
                prefix.push(k);
                extend(prefix, used, out);
                prefix.pop();
                used[k] = false;
            }
        }
    }
    let mut out = Vec::new();
    extend(&mut Vec::with_capacity(n), &mut vec![false; n], &mut out);
    out
}

/// Data of a semistable model: base change `s = t^ν`, exponents `e_α`,
/// the matrix `H(t)` and the fiber dimension `n` bounding log powers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemistableModel {
    pub nu: i64,
    pub e: Vec<u32>,
    #[serde(rename = "H", with = "matrix_json")]
    pub h: MetricExpansion,
    pub n: u32,
}

impl SemistableModel {
    pub fn new(nu: i64, e: Vec<u32>, h: MetricExpansion, n: u32) -> Result<Self> {
        let model = SemistableModel { nu, e, h, n };
        model.validate()?;
        Ok(model)
    }

    /// `ν = 1`, `e = 0`: the metric is given directly in its own variable.
    pub fn direct(h: MetricExpansion, n: u32) -> Result<Self> {
        let rho = h.dim();
        SemistableModel::new(1, vec![0; rho], h, n)
    }

    pub fn rank(&self) -> usize {
        self.h.dim()
    }

    /// `N = n ρ`, the bound on log powers in `det H`.
    pub fn log_bound(&self) -> u32 {
        self.n * self.rank() as u32
    }

    pub fn validate(&self) -> Result<()> {
        if self.nu <= 0 {
            return Err(Error::InvalidPower(self.nu));
        }
        self.h.validate()?;
        if self.e.len() != self.h.dim() {
            return Err(Error::Invariant(format!(
                "exponent vector has length {} but H has rank {}",
                self.e.len(),
                self.h.dim()
            )));
        }
        let found = self.h.max_ell();
        if found > self.n {
            return Err(Error::LogDegreeBound { found, bound: self.n });
        }
        Ok(())
    }

    /// `det H`, asserting the log-degree bound `nρ` for pure-log-class input.
    pub fn det_h(&self) -> Result<Expansion> {
        let det = det_expansion(&self.h)?;
        let pure = self.h.entries.iter().flatten().all(|x| x.iter().all(|(k, _)| k.is_smooth_jet()));
        let found = det.max_ell().unwrap_or(0);
        if pure && found > self.log_bound() {
            return Err(Error::LogDegreeBound { found, bound: self.log_bound() });
        }
        Ok(det)
    }

    /// Pulls the model back along `t = t'^k`, for passing to a common cover.
    pub fn pullback(&self, k: i64) -> Result<SemistableModel> {
        if k <= 0 {
            return Err(Error::InvalidPower(k));
        }
        let scale = u32::try_from(k).map_err(|_| Error::InvalidPower(k))?;
        Ok(SemistableModel {
            nu: self.nu * k,
            e: self.e.iter().map(|e| e * scale).collect(),
            h: self.h.pullback_power(k)?,
            n: self.n,
        })
    }
}

/// `G_{αβ} = t^{-e_α} t̄^{-e_β} H_{αβ}`.
pub fn assemble_g(model: &SemistableModel) -> Result<MetricExpansion> {
    model.validate()?;
    let e: Vec<Rational> = model.e.iter().map(|&x| -int(i64::from(x))).collect();
    let mut g = model.h.map_entries(|a, b, x| x.shift_exponents(&e[a], &e[b]))?;
    g.variable = Variable::T;
    Ok(g)
}

/// Moves an empirical constant of a `(1,1)`-form bound with Poincaré weight
/// `λ^m` from the `t` variable to `s = t^ν`.
///
/// Pulling back `i ds∧ds̄ / (|s|²(-log|s|²)^m)` gives `ν^{2-m}` times the
/// same form in `t`, so a `t`-constant `C_t` corresponds to `C_s = ν^{m-2} C_t`.
pub fn transport_to_s(constant_t: f64, m: i32, nu: i64) -> f64 {
    constant_t * (nu as f64).powi(m - 2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChernAsymptotics {
    pub ell_q: u32,
    pub nu: i64,
    /// Maximum over samples of `-∂∂̄ log det H · |t|² λ²`.
    pub coefficient_max: f64,
    /// Per-ray value of the scaled coefficient at the smallest radius.
    pub coefficient_deep: Vec<f64>,
    /// Largest `|coefficient - ℓ_q| / max(ℓ_q, 1)` at the smallest radius.
    pub deep_rel_error: f64,
    /// Remainder constant of the `λ^3` bound in `t`.
    pub remainder_constant_t: f64,
    /// The same constant transported to `s`.
    pub remainder_constant_s: f64,
    pub remainder_trend_ok: bool,
    pub profile: PoincareProfile,
}

/// Scaled Chern coefficient `-∂∂̄ log g · |t|² λ²`.
pub fn chern_coefficient(hess: &RatioForm, t: Complex64) -> Result<f64> {
    let lam = poincare_scale(t);
    Ok(-hess.eval(t)?.re * t.norm_sqr() * lam * lam)
}

pub fn chern_asymptotics(model: &SemistableModel, sweep: &Sweep, tol: &Tolerances) -> Result<ChernAsymptotics> {
    let det = model.det_h()?;
    let ell_q = log_class_profile(&det)?;
    let profile = verify_poincare(&det, sweep, tol)?;
    let hess = hess_log(&det)?;
    let samples = sweep.samples()?;
    let coeffs = samples
        .par_iter()
        .map(|s| chern_coefficient(&hess, s.point()))
        .collect::<Result<Vec<_>>>()?;
    let coefficient_max = coeffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let rho_min = sweep.rho_min;
    let coefficient_deep: Vec<f64> = samples
        .iter()
        .zip(&coeffs)
        .filter(|(s, _)| s.rho == rho_min)
        .map(|(_, &c)| c)
        .collect();
    let ell = f64::from(ell_q);
    let deep_rel_error = coefficient_deep
        .iter()
        .map(|c| (c - ell).abs() / ell.max(1.0))
        .fold(0.0, f64::max);
    Ok(ChernAsymptotics {
        ell_q,
        nu: model.nu,
        coefficient_max,
        coefficient_deep,
        deep_rel_error,
        remainder_constant_t: profile.c_hess,
        remainder_constant_s: transport_to_s(profile.c_hess, 3, model.nu),
        remainder_trend_ok: profile.hess_trend_ok,
        profile,
    })
}

/// Eigenvalues of the curvature endomorphism at one point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureSample {
    pub t: [f64; 2],
    /// Ascending eigenvalues of `R = -Θ`, w.r.t. `i dt∧dt̄`.
    pub eigenvalues: Vec<f64>,
    pub trace: f64,
    /// `-∂∂̄ log det G` at the same point.
    pub trace_reference: f64,
    pub trace_rel_error: f64,
    /// Condition number of the Jacobi-equilibrated metric.
    pub condition: f64,
}

impl CurvatureSample {
    pub fn point(&self) -> Complex64 {
        Complex64::new(self.t[0], self.t[1])
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }
}

/// Precomputed derivative matrices of `G` for pointwise curvature.
#[derive(Clone, Debug)]
pub struct MetricCurvature {
    g: MetricExpansion,
    dg: MetricExpansion,
    dbar_g: MetricExpansion,
    ddbar_g: MetricExpansion,
    det_hess: RatioForm,
}

impl MetricCurvature {
    pub fn new(model: &SemistableModel) -> Result<Self> {
        MetricCurvature::from_metric(assemble_g(model)?)
    }

    pub fn from_metric(g: MetricExpansion) -> Result<Self> {
        g.validate()?;
        let dg = g.map_entries(|_, _, x| Ok(x.d_dt()))?;
        let dbar_g = g.map_entries(|_, _, x| Ok(x.d_dtbar()))?;
        let ddbar_g = dg.map_entries(|_, _, x| Ok(x.d_dtbar()))?;
        let det = det_expansion(&g)?;
        let det_hess = hess_log(&det)?;
        Ok(MetricCurvature { g, dg, dbar_g, ddbar_g, det_hess })
    }

    pub fn metric(&self) -> &MetricExpansion {
        &self.g
    }

    /// Curvature eigenvalues at `t`, rejecting numerically singular or indefinite metrics.
    pub fn at(&self, t: Complex64) -> Result<CurvatureSample> {
        let g = self.g.eval(t)?;
        let condition = equilibrated_condition(&g);
        if !(condition.is_finite() && condition <= MAX_CONDITION) {
            return Err(Error::SingularMetric { t, condition });
        }
        let chol = Cholesky::new(g.clone()).ok_or(Error::SingularMetric { t, condition })?;
        let g_inv = chol.inverse();
        let dg = self.dg.eval(t)?;
        let dbar_g = self.dbar_g.eval(t)?;
        let ddbar_g = self.ddbar_g.eval(t)?;
        let connection_term = &dg * &g_inv * &dbar_g;
        // Θ = K G⁻¹ with K Hermitian; R = -Θ is similar to -L⁻¹ K L^{-*}.
        let k = &ddbar_g - &connection_term;
        let l = chol.l();
        let y = l
            .solve_lower_triangular(&k)
            .ok_or(Error::SingularMetric { t, condition })?;
        let m = l
            .solve_lower_triangular(&y.adjoint())
            .ok_or(Error::SingularMetric { t, condition })?
            .adjoint();
        let r = -m;
        let mut eigenvalues: Vec<f64> = r.symmetric_eigen().eigenvalues.iter().copied().collect();
        eigenvalues.sort_by(f64::total_cmp);
        let trace: f64 = eigenvalues.iter().sum();
        let trace_reference = -self.det_hess.eval(t)?.re;
        // Scale of the two terms that cancel inside K, after the congruence.
        let term_scale = congruence_norm(&l, &ddbar_g) + congruence_norm(&l, &connection_term);
        let denom = trace.abs().max(trace_reference.abs()).max(1e-6 * term_scale);
        let trace_rel_error = if denom == 0.0 { 0.0 } else { (trace - trace_reference).abs() / denom };
        Ok(CurvatureSample {
            t: [t.re, t.im],
            eigenvalues,
            trace,
            trace_reference,
            trace_rel_error,
            condition,
        })
    }
}

fn congruence_norm(l: &DMatrix<Complex64>, a: &DMatrix<Complex64>) -> f64 {
    l.solve_lower_triangular(a)
        .and_then(|y| l.solve_lower_triangular(&y.adjoint()))
        .map(|m| m.norm())
        .unwrap_or(f64::INFINITY)
}

/// Condition number of `D^{-1/2} G D^{-1/2}` with `D = diag G`; infinite when
/// `G` is not positive definite.
fn equilibrated_condition(g: &DMatrix<Complex64>) -> f64 {
    let n = g.nrows();
    let diag: Vec<f64> = (0..n).map(|i| g[(i, i)].re).collect();
    if diag.iter().any(|d| *d <= 0.0 || !d.is_finite()) {
        return f64::INFINITY;
    }
    let scaled = DMatrix::from_fn(n, n, |i, j| g[(i, j)] / (diag[i] * diag[j]).sqrt());
    let eig = scaled.symmetric_eigen().eigenvalues;
    let (lo, hi) = eig.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

pub fn curvature_at(model: &SemistableModel, t: Complex64) -> Result<CurvatureSample> {
    MetricCurvature::new(model)?.at(t)
}

/// A sample rejected by [`MetricCurvature::at`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RejectedSample {
    pub rho: f64,
    pub theta: f64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Report {
    pub nu: i64,
    pub accepted: usize,
    pub rejected: Vec<RejectedSample>,
    pub min_eigenvalue: Option<Witness>,
    /// Recorded only: synthetic inputs need not be semi-positive.
    pub negativity_flagged: bool,
    /// Maximum of `max eigenvalue · |s|² λ_s²`.
    pub c_upper: f64,
    pub c_upper_witness: Option<Witness>,
    pub c_upper_trend: Vec<TrendVerdict>,
    pub c_upper_trend_ok: bool,
    pub max_trace_rel_error: f64,
    pub trace_identity_ok: bool,
    /// Largest relative gap between `∂∂̄ log det G` and `∂∂̄ log det H`.
    pub cancellation_rel_error: f64,
    pub cancellation_ok: bool,
    #[serde(skip)]
    pub samples: Vec<(Sample, CurvatureSample)>,
}

impl Theorem1Report {
    /// Checks that are asserted rather than recorded.
    pub fn passed(&self) -> bool {
        self.accepted > 0 && self.c_upper_trend_ok && self.trace_identity_ok && self.cancellation_ok
    }
}

/// Relative gap of two `∂∂̄ log` evaluations.
fn rel_gap(a: f64, b: f64) -> f64 {
    let denom = a.abs().max(b.abs());
    if denom == 0.0 {
        0.0
    } else {
        (a - b).abs() / denom
    }
}

pub fn verify_theorem1(model: &SemistableModel, sweep: &Sweep, tol: &Tolerances) -> Result<Theorem1Report> {
    let curvature = MetricCurvature::new(model)?;
    let samples = sweep.samples()?;
    let det_g = det_expansion(curvature.metric())?;
    let hess_g = hess_log(&det_g)?;
    let hess_h = hess_log(&model.det_h()?)?;
    let outcomes: Vec<(Sample, Result<CurvatureSample>, Result<f64>)> = samples
        .par_iter()
        .map(|s| {
            let t = s.point();
            let gap = hess_g
                .eval(t)
                .and_then(|a| hess_h.eval(t).map(|b| rel_gap(a.re, b.re)));
            (*s, curvature.at(t), gap)
        })
        .collect();

    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    let mut cancellation_rel_error: f64 = 0.0;
    for (s, outcome, gap) in outcomes {
        cancellation_rel_error = cancellation_rel_error.max(gap?);
        match outcome {
            Ok(c) => accepted.push((s, c)),
            Err(Error::SingularMetric { condition, .. }) => rejected.push(RejectedSample {
                rho: s.rho,
                theta: s.theta,
                reason: format!("equilibrated condition number {condition:e} exceeds {MAX_CONDITION:e}"),
            }),
            Err(e) => return Err(e),
        }
    }
    let kept: Vec<Sample> = accepted.iter().map(|(s, _)| *s).collect();
    let mins: Vec<f64> = accepted.iter().map(|(_, c)| c.min_eigenvalue()).collect();
    let scaled: Vec<f64> = accepted
        .iter()
        .map(|(s, c)| {
            let t = s.point();
            let lam = poincare_scale(t);
            transport_to_s(c.max_eigenvalue() * t.norm_sqr() * lam * lam, 2, model.nu)
        })
        .collect();
    let min_eigenvalue = min_with_witness(&kept, &mins);
    let c_upper_witness = max_with_witness(&kept, &scaled);
    let c_upper_trend = trend_test(&kept, &scaled, tol.trend_pct);
    let max_trace_rel_error = accepted.iter().map(|(_, c)| c.trace_rel_error).fold(0.0, f64::max);
    Ok(Theorem1Report {
        nu: model.nu,
        accepted: accepted.len(),
        rejected,
        negativity_flagged: min_eigenvalue.map(|w| w.value < -NOISE_FLOOR).unwrap_or(false),
        min_eigenvalue,
        c_upper: c_upper_witness.map(|w| w.value).unwrap_or(0.0),
        c_upper_witness,
        c_upper_trend_ok: all_ok(&c_upper_trend),
        c_upper_trend,
        max_trace_rel_error,
        trace_identity_ok: max_trace_rel_error <= TRACE_REL_TOL,
        cancellation_rel_error,
        cancellation_ok: cancellation_rel_error <= tol.exact_rel,
        samples: accepted,
    })
}

/// Empirical constant of one bound with its witness and trend verdict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub constant: f64,
    pub witness: Witness,
    pub trend_ok: bool,
    /// Largest per-ray growth exponent of the unscaled quantity against `λ`
    /// over the last two decades.
    pub growth_exponent: f64,
}

fn bound_check(samples: &[Sample], scaled: &[f64], raw: &[f64], tol: &Tolerances) -> Result<BoundCheck> {
    let witness = max_with_witness(samples, scaled).ok_or(Error::EmptyGrid)?;
    Ok(BoundCheck {
        constant: witness.value,
        witness,
        trend_ok: all_ok(&trend_test(samples, scaled, tol.trend_pct)),
        growth_exponent: growth_exponent(samples, raw),
    })
}

/// Slope of `log |v|` against `log λ` between the start of the last two
/// decades and the innermost radius, maximized over rays.
fn growth_exponent(samples: &[Sample], values: &[f64]) -> f64 {
    let mut best = f64::NEG_INFINITY;
    let rays: std::collections::BTreeSet<usize> = samples.iter().map(|s| s.ray).collect();
    for ray in rays {
        let on_ray: Vec<(f64, f64)> = samples
            .iter()
            .zip(values)
            .filter(|(s, _)| s.ray == ray)
            .map(|(s, &v)| (s.rho, v.abs()))
            .collect();
        let rho_min = on_ray.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let start = on_ray
            .iter()
            .filter(|p| p.0 >= rho_min * 100.0 * (1.0 - 1e-9))
            .min_by(|a, b| a.0.total_cmp(&b.0));
        let end = on_ray.iter().find(|p| p.0 == rho_min);
        if let (Some(&(r1, v1)), Some(&(r2, v2))) = (start, end) {
            if v1 > 0.0 && v2 > 0.0 && r1 != r2 {
                let (l1, l2) = (-2.0 * r1.ln(), -2.0 * r2.ln());
                best = best.max((v2 / v1).ln() / (l2 / l1).ln());
            }
        }
    }
    if best.is_finite() {
        best
    } else {
        0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoodnessReport {
    pub ell: u32,
    /// `det H ≤ C λ^ℓ`.
    pub det_upper: BoundCheck,
    /// `(det H)^{-1} ≤ C λ^ℓ`.
    pub det_inverse: BoundCheck,
    /// `|∂ log det H| ≤ C/(|t| λ)`.
    pub grad: BoundCheck,
    /// `|∂∂̄ log det H| ≤ C/(|t|² λ²)`.
    pub hess: BoundCheck,
    /// `‖∂H·H⁻¹‖ ≤ C λ^ℓ/|t|` (weak) and `≤ C/(|t| λ)` (strong).
    pub connection_weak: BoundCheck,
    pub connection_strong: BoundCheck,
    /// `‖∂̄(∂H·H⁻¹)‖ ≤ C λ^ℓ/|t|²` (weak) and `≤ C/(|t|² λ²)` (strong).
    pub curvature_weak: BoundCheck,
    pub curvature_strong: BoundCheck,
    pub scalar_bounds_ok: bool,
    pub weak_matrix_bounds_ok: bool,
    /// Recorded only.
    pub strong_matrix_bounds_hold: bool,
}

impl GoodnessReport {
    pub fn passed(&self) -> bool {
        self.scalar_bounds_ok && self.weak_matrix_bounds_ok
    }
}

/// `‖A‖ = Σ_{ij} |a_ij|`.
fn entry_sum_norm(a: &DMatrix<Complex64>) -> f64 {
    a.iter().map(|z| z.norm()).sum()
}

pub fn mumford_goodness(h: &MetricExpansion, sweep: &Sweep, tol: &Tolerances) -> Result<GoodnessReport> {
    h.validate()?;
    let det = det_expansion(h)?;
    let ell = log_class_profile(&det)?;
    let samples = sweep.samples()?;
    let det_values = require_positive(&det, &samples)?;
    let grad = grad_log(&det)?;
    let hess = hess_log(&det)?;
    let dh = h.map_entries(|_, _, x| Ok(x.d_dt()))?;
    let dbar_h = h.map_entries(|_, _, x| Ok(x.d_dtbar()))?;
    let ddbar_h = dh.map_entries(|_, _, x| Ok(x.d_dtbar()))?;
    let ell_f = f64::from(ell);

    struct Row {
        det_upper: f64,
        det_inverse: f64,
        grad: f64,
        hess: f64,
        conn: f64,
        curv: f64,
    }
    let rows: Vec<Row> = samples
        .par_iter()
        .zip(det_values.par_iter())
        .map(|(s, &d)| {
            let t = s.point();
            let hm = h.eval(t)?;
            let h_inv = hm.clone().try_inverse().ok_or(Error::SingularMetric { t, condition: f64::INFINITY })?;
            let dhm = dh.eval(t)?;
            let conn = &dhm * &h_inv;
            let curv = (ddbar_h.eval(t)? - &conn * dbar_h.eval(t)?) * &h_inv;
            Ok(Row {
                det_upper: d,
                det_inverse: 1.0 / d,
                grad: grad.eval(t)?.norm(),
                hess: hess.eval(t)?.re.abs(),
                conn: entry_sum_norm(&conn),
                curv: entry_sum_norm(&curv),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let lam: Vec<f64> = samples.iter().map(|s| poincare_scale(s.point())).collect();
    let r: Vec<f64> = samples.iter().map(|s| s.rho).collect();
    let scaled = |f: &dyn Fn(usize, &Row) -> f64| -> Vec<f64> {
        rows.iter().enumerate().map(|(i, row)| f(i, row)).collect()
    };
    let raw_det = scaled(&|_, x| x.det_upper);
    let raw_inv = scaled(&|_, x| x.det_inverse);
    let raw_grad = scaled(&|i, x| x.grad * r[i]);
    let raw_hess = scaled(&|i, x| x.hess * r[i] * r[i]);
    let raw_conn = scaled(&|i, x| x.conn * r[i]);
    let raw_curv = scaled(&|i, x| x.curv * r[i] * r[i]);

    let det_upper = bound_check(&samples, &scaled(&|i, x| x.det_upper / lam[i].powf(ell_f)), &raw_det, tol)?;
    let det_inverse = bound_check(&samples, &scaled(&|i, x| x.det_inverse / lam[i].powf(ell_f)), &raw_inv, tol)?;
    let grad_c = bound_check(&samples, &scaled(&|i, x| x.grad * r[i] * lam[i]), &raw_grad, tol)?;
    let hess_c = bound_check(&samples, &scaled(&|i, x| x.hess * r[i] * r[i] * lam[i] * lam[i]), &raw_hess, tol)?;
    let connection_weak =
        bound_check(&samples, &scaled(&|i, x| x.conn * r[i] / lam[i].powf(ell_f)), &raw_conn, tol)?;
    let connection_strong = bound_check(&samples, &scaled(&|i, x| x.conn * r[i] * lam[i]), &raw_conn, tol)?;
    let curvature_weak =
        bound_check(&samples, &scaled(&|i, x| x.curv * r[i] * r[i] / lam[i].powf(ell_f)), &raw_curv, tol)?;
    let curvature_strong =
        bound_check(&samples, &scaled(&|i, x| x.curv * r[i] * r[i] * lam[i] * lam[i]), &raw_curv, tol)?;

    let scalar_bounds_ok = det_upper.trend_ok && det_inverse.trend_ok && grad_c.trend_ok && hess_c.trend_ok;
    let weak_matrix_bounds_ok = connection_weak.trend_ok && curvature_weak.trend_ok;
    let strong_matrix_bounds_hold = connection_strong.trend_ok && curvature_strong.trend_ok;
    Ok(GoodnessReport {
        ell,
        det_upper,
        det_inverse,
        grad: grad_c,
        hess: hess_c,
        connection_weak,
        connection_strong,
        curvature_weak,
        curvature_strong,
        scalar_bounds_ok,
        weak_matrix_bounds_ok,
        strong_matrix_bounds_hold,
    })
}

/// Classification of one term against the canonical-singularity class
/// `C^∞ ⊕ ⊕_{r∈(0,1]} ⊕_{k≤n} |s|^{2r} (log|s|)^k C^∞`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum TermClass {
    Smooth,
    Singular {
        #[serde(with = "crate::log_calculus::rational_string")]
        r: Rational,
        k: u32,
    },
    Outside {
        reason: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BClassReport {
    pub member: bool,
    pub terms: Vec<(String, TermClass)>,
    pub offending: Option<String>,
}

fn classify_term(p: &Rational, q: &Rational, ell: u32, n: u32) -> TermClass {
    if ell == 0 && p.is_integer() && q.is_integer() && !p.is_negative() && !q.is_negative() {
        return TermClass::Smooth;
    }
    if ell > n {
        return TermClass::Outside { reason: format!("log power {ell} exceeds n = {n}") };
    }
    let low = p.clone().min(q.clone());
    if !low.is_positive() {
        return TermClass::Outside {
            reason: "no factor |s|^{2r} with r ∈ (0, 1] splits off a smooth jet".into(),
        };
    }
    // r ≡ p (mod 1), r ∈ (0, 1], and p - r, q - r ≥ 0.
    let frac = p - p.floor();
    let r = if frac.is_zero() { int(1) } else { frac };
    if r > low {
        return TermClass::Outside {
            reason: "no factor |s|^{2r} with r ∈ (0, 1] splits off a smooth jet".into(),
        };
    }
    TermClass::Singular { r, k: ell }
}

pub fn bclass_check(g: &Expansion, n: u32) -> BClassReport {
    let terms: Vec<(String, TermClass)> = g
        .iter()
        .map(|(k, _)| (k.to_string(), classify_term(k.p(), k.q(), k.ell(), n)))
        .collect();
    let offending = terms
        .iter()
        .find(|(_, c)| matches!(c, TermClass::Outside { .. }))
        .map(|(k, c)| match c {
            TermClass::Outside { reason } => format!("{k}: {reason}"),
            _ => unreachable!(),
        });
    BClassReport { member: offending.is_none(), terms, offending }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prop51Report {
    pub entries_member: Vec<Vec<bool>>,
    pub det: BClassReport,
    /// Whether the constant jets of `G` form the identity at `s = 0`.
    pub normalized_at_origin: bool,
    /// Minimal positive weight of `det G` halved; `None` when `det G` has no
    /// positive-weight terms.
    #[serde(with = "optional_rational")]
    pub r: Option<Rational>,
    /// Minimum of `-∂∂̄ log det G` over samples (recorded).
    pub c1_min: Witness,
    pub c1_nonnegative: bool,
    /// `-∂∂̄ log det G ≤ C |s|^{2r} / (|s|² λ²)`.
    pub c1_bound: BoundCheck,
    /// `max eigenvalue ≤ C |s|^{2r} / (|s|² λ²)` over accepted samples.
    pub endomorphism_constant: f64,
    pub endomorphism_trend_ok: bool,
    pub rejected: usize,
}

impl Prop51Report {
    pub fn passed(&self) -> bool {
        self.det.member
            && self.entries_member.iter().flatten().all(|&m| m)
            && self.c1_bound.trend_ok
            && self.endomorphism_trend_ok
    }
}

pub fn prop51_verify(g: &MetricExpansion, n: u32, sweep: &Sweep, tol: &Tolerances) -> Result<Prop51Report> {
    g.validate()?;
    let dim = g.dim();
    let entries_member: Vec<Vec<bool>> =
        g.entries.iter().map(|row| row.iter().map(|x| bclass_check(x, n).member).collect()).collect();
    let det = det_expansion(g)?;
    let det_report = bclass_check(&det, n);
    let origin = crate::expansion::TermKey::new(int(0), int(0), 0)?;
    let normalized_at_origin = (0..dim).all(|a| {
        (0..dim).all(|b| {
            let target = if a == b { 1.0 } else { 0.0 };
            let x = &g.entries[a][b];
            let constant_ok = (x.coeff(&origin) - Complex64::new(target, 0.0)).norm() <= 1e-12;
            let rest_positive = x.iter().all(|(k, _)| *k == origin || k.weight().is_positive());
            constant_ok && rest_positive
        })
    });
    let r = det
        .iter()
        .map(|(k, _)| k.weight())
        .filter(|w| w.is_positive())
        .min()
        .map(|w| w / int(2));
    let r_f = r.as_ref().map(rational_to_f64).unwrap_or(0.0);

    let samples = sweep.samples()?;
    require_positive(&det, &samples)?;
    let hess = hess_log(&det)?;
    let c1: Vec<f64> = samples
        .par_iter()
        .map(|s| hess.eval(s.point()).map(|h| -h.re))
        .collect::<Result<Vec<_>>>()?;
    let weight = |s: &Sample| {
        let lam = poincare_scale(s.point());
        s.rho.powf(2.0 - 2.0 * r_f) * lam * lam
    };
    let scaled: Vec<f64> = samples.iter().zip(&c1).map(|(s, v)| v.abs() * weight(s)).collect();
    let raw: Vec<f64> = samples.iter().zip(&c1).map(|(s, v)| v.abs() * s.rho.powf(2.0 - 2.0 * r_f)).collect();
    let c1_bound = bound_check(&samples, &scaled, &raw, tol)?;
    let c1_min = min_with_witness(&samples, &c1).ok_or(Error::EmptyGrid)?;

    let curvature = MetricCurvature::from_metric(g.clone())?;
    let mut kept = Vec::new();
    let mut endo = Vec::new();
    let mut rejected = 0;
    for s in &samples {
        match curvature.at(s.point()) {
            Ok(c) => {
                kept.push(*s);
                endo.push(c.max_eigenvalue().max(0.0) * weight(s));
            }
            Err(Error::SingularMetric { .. }) => rejected += 1,
            Err(e) => return Err(e),
        }
    }
    let endomorphism_constant = endo.iter().copied().fold(0.0, f64::max);
    Ok(Prop51Report {
        entries_member,
        det: det_report,
        normalized_at_origin,
        r,
        c1_nonnegative: c1_min.value >= -NOISE_FLOOR,
        c1_min,
        c1_bound,
        endomorphism_constant,
        endomorphism_trend_ok: !kept.is_empty() && all_ok(&trend_test(&kept, &endo, tol.trend_pct)),
        rejected,
    })
}

mod optional_rational {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::expansion::{parse_rational, Rational};

    pub fn serialize<S: Serializer>(r: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
        match r {
            Some(r) => s.serialize_some(&r.to_string()),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|s| parse_rational(&s).map_err(serde::de::Error::custom))
            .transpose()
    }
}

/// `"H": [[expansion, ...], ...]` on the wire.
pub(crate) mod matrix_json {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::{MetricExpansion, Variable};
    use crate::expansion::Expansion;

    pub fn serialize<S: Serializer>(m: &MetricExpansion, s: S) -> Result<S::Ok, S::Error> {
        m.entries.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<MetricExpansion, D::Error> {
        let entries = Vec::<Vec<Expansion>>::deserialize(d)?;
        MetricExpansion::new(entries, Variable::T).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expansion::rat;
    use crate::log_calculus::hess_log_at;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn minus_l() -> Expansion {
        Expansion::log_power(1, -1.0)
    }

    fn one() -> Expansion {
        Expansion::constant(1.0)
    }

    fn pts() -> Vec<Complex64> {
        vec![
            Complex64::from_polar(0.3, 0.7),
            Complex64::from_polar(1e-3, -2.0),
            Complex64::from_polar(1e-6, 2.5),
        ]
    }

    fn small_sweep() -> Sweep {
        Sweep::with_rays(4)
    }

    #[test]
    fn assemble_examples() {
        let m = SemistableModel::direct(MetricExpansion::scalar(minus_l(), Variable::T).unwrap(), 1).unwrap();
        assert_eq!(assemble_g(&m).unwrap().entries[0][0], minus_l());

        let m = SemistableModel::new(1, vec![1], MetricExpansion::scalar(one(), Variable::T).unwrap(), 0).unwrap();
        assert_eq!(assemble_g(&m).unwrap().entries[0][0], Expansion::radial(int(-1), 0, 1.0));

        let h = MetricExpansion::diagonal(vec![one(), one()], Variable::T).unwrap();
        let g = assemble_g(&SemistableModel::new(1, vec![0, 1], h, 0).unwrap()).unwrap();
        assert!(g.entries[0][1].is_empty() && g.entries[1][0].is_empty());
        assert_eq!(g.entries[1][1], Expansion::radial(int(-1), 0, 1.0));
        assert_eq!(g.entries[0][0], one());
        g.validate().unwrap();
    }

    #[test]
    fn model_validation() {
        let h = MetricExpansion::scalar(Expansion::log_power(2, 1.0), Variable::T).unwrap();
        assert!(matches!(SemistableModel::direct(h, 1), Err(Error::LogDegreeBound { .. })));
        let h = MetricExpansion::scalar(one(), Variable::T).unwrap();
        assert!(SemistableModel::new(0, vec![0], h.clone(), 0).is_err());
        assert!(SemistableModel::new(1, vec![0, 0], h, 0).is_err());
        let not_hermitian = vec![vec![one(), Expansion::jet(1, 0, c(1.0, 0.0))], vec![Expansion::zero(), one()]];
        assert!(MetricExpansion::new(not_hermitian, Variable::T).is_err());
    }

    #[test]
    fn det_examples() {
        let m = MetricExpansion::diagonal(vec![minus_l(), minus_l()], Variable::T).unwrap();
        assert_eq!(det_expansion(&m).unwrap(), Expansion::log_power(2, 1.0));

        let m = MetricExpansion::new(
            vec![vec![one(), Expansion::jet(1, 0, c(1.0, 0.0))], vec![Expansion::jet(0, 1, c(1.0, 0.0)), one()]],
            Variable::T,
        )
        .unwrap();
        assert_eq!(det_expansion(&m).unwrap(), one().sub(&Expansion::radial(int(1), 0, 1.0)));

        let model = SemistableModel::new(1, vec![1], MetricExpansion::scalar(one(), Variable::T).unwrap(), 0).unwrap();
        assert_eq!(det_expansion(&assemble_g(&model).unwrap()).unwrap(), Expansion::radial(int(-1), 0, 1.0));

        let big = MetricExpansion::diagonal(vec![one(); 7], Variable::T).unwrap();
        assert!(matches!(det_expansion(&big), Err(Error::DimensionTooLarge(7))));
    }

    #[test]
    fn det_matches_numeric_determinant() {
        let h01 = Expansion::jet(1, 0, c(0.2, 0.1)).add(&Expansion::radial(int(1), 1, 0.05));
        let h10 = h01.conj();
        let h = MetricExpansion::new(
            vec![
                vec![minus_l().add(&one()), h01, Expansion::jet(0, 1, c(0.1, 0.0))],
                vec![h10, Expansion::constant(2.0), Expansion::zero()],
                vec![Expansion::jet(1, 0, c(0.1, 0.0)), Expansion::zero(), one().add(&minus_l())],
            ],
            Variable::T,
        )
        .unwrap();
        let det = det_expansion(&h).unwrap();
        for t in pts() {
            let numeric = h.eval(t).unwrap().determinant();
            let symbolic = det.eval(t).unwrap();
            assert!((numeric - symbolic).norm() <= 1e-12 * symbolic.norm());
        }
    }

    #[test]
    fn det_commutes_with_pullback() {
        let h01 = Expansion::jet(1, 0, c(0.2, 0.1));
        let h = MetricExpansion::new(
            vec![vec![minus_l(), h01.clone()], vec![h01.conj(), Expansion::log_power(1, -2.0).add(&one())]],
            Variable::T,
        )
        .unwrap();
        for nu in [2, 3] {
            let lhs = det_expansion(&h.pullback_power(nu).unwrap()).unwrap();
            let rhs = det_expansion(&h).unwrap().pullback_power(nu).unwrap();
            let lhs_keys: Vec<_> = lhs.iter().map(|(k, _)| k.clone()).collect();
            let rhs_keys: Vec<_> = rhs.iter().map(|(k, _)| k.clone()).collect();
            assert_eq!(lhs_keys, rhs_keys);
            assert!(lhs.sub(&rhs).max_coeff_norm() <= 1e-13 * rhs.max_coeff_norm());
        }
    }

    #[test]
    fn chern_examples() {
        let m = SemistableModel::direct(MetricExpansion::scalar(minus_l(), Variable::T).unwrap(), 1).unwrap();
        let ch = chern_asymptotics(&m, &small_sweep(), &Tolerances::default()).unwrap();
        assert_eq!(ch.ell_q, 1);
        assert!(ch.deep_rel_error < 1e-12);
        assert!((ch.coefficient_max - 1.0).abs() < 1e-12);

        let m = SemistableModel::direct(MetricExpansion::scalar(one(), Variable::T).unwrap(), 0).unwrap();
        let ch = chern_asymptotics(&m, &small_sweep(), &Tolerances::default()).unwrap();
        assert_eq!(ch.ell_q, 0);
        assert_eq!(ch.coefficient_max, 0.0);

        let h = MetricExpansion::diagonal(vec![minus_l(), minus_l()], Variable::T).unwrap();
        let ch = chern_asymptotics(&SemistableModel::direct(h, 1).unwrap(), &small_sweep(), &Tolerances::default())
            .unwrap();
        assert_eq!(ch.ell_q, 2);
    }

    #[test]
    fn transport_scales_by_nu() {
        assert_eq!(transport_to_s(1.5, 2, 3), 1.5);
        assert_eq!(transport_to_s(1.5, 3, 3), 4.5);
        assert_eq!(transport_to_s(1.5, 0, 2), 0.375);
    }

    #[test]
    fn curvature_examples() {
        let poincare = SemistableModel::direct(MetricExpansion::scalar(minus_l(), Variable::T).unwrap(), 1).unwrap();
        let flat = SemistableModel::direct(MetricExpansion::scalar(one(), Variable::T).unwrap(), 0).unwrap();
        for t in pts() {
            let s = curvature_at(&poincare, t).unwrap();
            let l = 2.0 * t.norm().ln();
            let expected = 1.0 / (t.norm_sqr() * l * l);
            assert_eq!(s.eigenvalues.len(), 1);
            assert!((s.eigenvalues[0] - expected).abs() <= 1e-12 * expected);
            // 1×1 reduction to the scalar log-Hessian
            let scalar = -hess_log_at(&minus_l(), t).unwrap();
            assert!((s.eigenvalues[0] - scalar).abs() <= 1e-12 * expected);
            assert!(s.trace_rel_error <= TRACE_REL_TOL);

            let f = curvature_at(&flat, t).unwrap();
            assert_eq!(f.eigenvalues, vec![0.0]);
        }
    }

    #[test]
    fn block_diagonal_eigenvalues_are_the_union() {
        let g1 = minus_l().add(&Expansion::constant(0.5));
        let g2 = Expansion::log_power(2, 1.0).add(&Expansion::radial(int(1), 0, 0.3)).add(&one());
        let block = SemistableModel::direct(
            MetricExpansion::diagonal(vec![g1.clone(), g2.clone()], Variable::T).unwrap(),
            2,
        )
        .unwrap();
        for t in pts() {
            let s = curvature_at(&block, t).unwrap();
            let mut expected = vec![-hess_log_at(&g1, t).unwrap(), -hess_log_at(&g2, t).unwrap()];
            expected.sort_by(f64::total_cmp);
            for (a, b) in s.eigenvalues.iter().zip(&expected) {
                assert!((a - b).abs() <= 1e-10 * b.abs(), "{a} vs {b}");
            }
            assert!(s.trace_rel_error <= TRACE_REL_TOL);
        }
    }

    #[test]
    fn curvature_is_invariant_under_the_diagonal_frame_change() {
        let h01 = Expansion::jet(1, 0, c(0.2, 0.1));
        let h = MetricExpansion::new(
            vec![vec![minus_l().add(&one()), h01.clone()], vec![h01.conj(), Expansion::constant(2.0)]],
            Variable::T,
        )
        .unwrap();
        let plain = SemistableModel::direct(h.clone(), 1).unwrap();
        let twisted = SemistableModel::new(1, vec![1, 2], h, 1).unwrap();
        for t in [Complex64::from_polar(0.3, 0.7), Complex64::from_polar(1e-3, -2.0)] {
            let a = curvature_at(&plain, t).unwrap();
            let b = curvature_at(&twisted, t).unwrap();
            let scale = a.eigenvalues.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
            for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
                assert!((x - y).abs() <= 1e-8 * scale, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn theorem1_reports() {
        let tol = Tolerances::default();
        let poincare = SemistableModel::direct(MetricExpansion::scalar(minus_l(), Variable::T).unwrap(), 1).unwrap();
        let rep = verify_theorem1(&poincare, &small_sweep(), &tol).unwrap();
        assert!(!rep.negativity_flagged);
        assert!((rep.c_upper - 1.0).abs() < 1e-9);
        assert!(rep.passed());

        let flat = SemistableModel::direct(MetricExpansion::scalar(one(), Variable::T).unwrap(), 0).unwrap();
        let rep = verify_theorem1(&flat, &small_sweep(), &tol).unwrap();
        assert_eq!(rep.c_upper, 0.0);
        assert!(rep.passed());
    }

    #[test]
    fn indefinite_curvature_is_flagged_not_fatal() {
        // h = 1 - 2λ|t|² has ∂∂̄ log h > 0 for |t| near 1/2, so R < 0 there.
        let h = one().sub(&minus_l().mul(&Expansion::radial(int(1), 0, 2.0)));
        let model = SemistableModel::direct(MetricExpansion::scalar(h, Variable::T).unwrap(), 1).unwrap();
        let sweep = Sweep::with_rays(2).radial(1e-6, 0.5, 8);
        let rep = verify_theorem1(&model, &sweep, &Tolerances::default()).unwrap();
        assert!(rep.negativity_flagged);
        assert!(rep.accepted > 0);
    }

    #[test]
    fn goodness_reports() {
        let tol = Tolerances::default();
        let h = MetricExpansion::scalar(minus_l(), Variable::T).unwrap();
        let rep = mumford_goodness(&h, &small_sweep(), &tol).unwrap();
        assert!(rep.passed());
        assert!(rep.strong_matrix_bounds_hold);
        assert!((rep.connection_strong.constant - 1.0).abs() < 1e-9);

        let h = MetricExpansion::scalar(one(), Variable::T).unwrap();
        let rep = mumford_goodness(&h, &small_sweep(), &tol).unwrap();
        assert!(rep.passed());
        assert_eq!(rep.grad.constant, 0.0);
        assert!((rep.det_upper.constant - 1.0).abs() < 1e-15);

        let t = Expansion::jet(1, 0, c(1.0, 0.0));
        let h = MetricExpansion::new(vec![vec![minus_l(), t.clone()], vec![t.conj(), one()]], Variable::T).unwrap();
        let rep = mumford_goodness(&h, &small_sweep(), &tol).unwrap();
        assert!(rep.weak_matrix_bounds_ok);
        assert!(rep.scalar_bounds_ok);
    }

    #[test]
    fn bclass_examples() {
        let g = one().add(&Expansion::radial(rat(1, 2), 1, 0.3));
        let rep = bclass_check(&g, 1);
        assert!(rep.member);
        assert!(matches!(&rep.terms[1].1, TermClass::Singular { r, k: 1 } if *r == rat(1, 2)));

        let rep = bclass_check(&minus_l(), 1);
        assert!(!rep.member);
        assert!(rep.offending.unwrap().contains("L^1"));

        assert!(bclass_check(&one(), 0).member);
        assert!(bclass_check(&Expansion::radial(int(1), 1, 1.0), 1).member);
        assert!(!bclass_check(&Expansion::radial(int(1), 2, 1.0), 1).member);
        assert!(bclass_check(&Expansion::term(rat(3, 2), rat(1, 2), 0, c(1.0, 0.0)).unwrap(), 0).member);
        assert!(!bclass_check(&Expansion::radial(rat(-1, 2), 0, 1.0), 0).member);
    }

    #[test]
    fn prop51_flat_metric() {
        let g = MetricExpansion::scalar(one(), Variable::S).unwrap();
        let rep = prop51_verify(&g, 1, &small_sweep(), &Tolerances::default()).unwrap();
        assert!(rep.det.member && rep.normalized_at_origin);
        assert!(rep.r.is_none());
        assert_eq!(rep.c1_bound.constant, 0.0);
        assert!(rep.passed());
    }

    #[test]
    fn model_json_round_trip() {
        let json = r#"{"nu":2,"e":[0,1],"n":1,
            "H":[[{"order":"inf","terms":[{"p":"0","q":"0","ell":1,"re":-1.0,"im":0.0}]},{"terms":[]}],
                 [{"terms":[]},{"terms":[{"p":"0","q":"0","ell":0,"re":1.0}]}]]}"#;
        let m: SemistableModel = serde_json::from_str(json).unwrap();
        assert_eq!(m.nu, 2);
        assert_eq!(m.h.entries[0][0], minus_l());
        let back: SemistableModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
