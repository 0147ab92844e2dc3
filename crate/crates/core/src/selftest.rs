//! The built-in invariant suite behind the `selftest` command.
//!
//! Each check returns a [`CheckOutcome`] with the numbers it judged, so the
//! same functions back the CLI report and the acceptance tests.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::Result;
use crate::expansion::{int, rat, Expansion};
use crate::log_calculus::{hess_log, leading_asymptotics, log_class_profile, verify_poincare};
use crate::metrics::{
    bclass_check, chern_asymptotics, chern_coefficient, prop51_verify, verify_theorem1, MetricExpansion,
    SemistableModel, Variable,
};
use crate::orbit::{fiber_integral_expansion, l2_metric, MonodromyData, SectionCoeffs};
use crate::random::{random_expansion, random_pure_log, rng};
use crate::sweep::{poincare_scale, Sweep, Tolerances};
use crate::torsion::{torsion_hessian_profile, DegreeModel, TorsionInput};
use crate::Error;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub details: Value,
}

impl CheckOutcome {
    fn new(id: u32, name: &str, passed: bool, details: Value) -> Self {
        CheckOutcome { id, name: name.to_string(), passed, details }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelftestReport {
    pub seed: u64,
    pub checks: Vec<CheckOutcome>,
    pub passed: bool,
}

/// Coefficient-wise agreement of two expansions with the same order.
pub fn terms_agree(a: &Expansion, b: &Expansion, rel: f64) -> bool {
    let scale = a.max_coeff_norm().max(b.max_coeff_norm());
    a.order() == b.order() && a.sub(b).max_coeff_norm() <= rel * scale
}

/// Central-difference Wirtinger derivatives `(∂_t f, ∂_t̄ f)` with step `h`.
pub fn wirtinger_fd(f: &Expansion, t: Complex64, h: f64) -> Result<(Complex64, Complex64)> {
    let i = Complex64::i();
    let fx = (f.eval(t + h)? - f.eval(t - h)?) / (2.0 * h);
    let fy = (f.eval(t + i * h)? - f.eval(t - i * h)?) / (2.0 * h);
    Ok(((fx - i * fy) * 0.5, (fx + i * fy) * 0.5))
}

/// 20 deterministic points with `|t|` log-spaced in `[0.05, 0.5]` and spread angles.
pub fn derivative_points() -> Vec<Complex64> {
    (0..20)
        .map(|k| {
            let rho = (0.05f64.ln() + (0.5f64.ln() - 0.05f64.ln()) * k as f64 / 19.0).exp();
            Complex64::from_polar(rho, 0.3 + 2.399_963 * k as f64)
        })
        .collect()
}

/// Symbolic derivatives against finite differences, plus exact Leibniz,
/// mixed-partial and conjugation identities, on 200 random expansions.
pub fn derivative_identities(seed: u64, tol: &Tolerances, fd_step_scale: f64) -> Result<CheckOutcome> {
    let mut r = rng(seed);
    let family: Vec<Expansion> = (0..200).map(|_| random_expansion(&mut r)).collect();
    let points = derivative_points();
    let errors = family
        .par_iter()
        .map(|f| {
            let (d, dbar) = (f.d_dt(), f.d_dtbar());
            points.iter().try_fold(0.0f64, |worst, &t| {
                let h = 1e-5 * fd_step_scale * t.norm();
                let (fd, fd_bar) = wirtinger_fd(f, t, h)?;
                // A vanishing derivative is compared against the size of f itself.
                let fallback = f.magnitude_at(t)? / t.norm();
                let scale = |m: f64| if m > 0.0 { m } else { fallback };
                let e1 = (d.eval(t)? - fd).norm() / scale(d.magnitude_at(t)?);
                let e2 = (dbar.eval(t)? - fd_bar).norm() / scale(dbar.magnitude_at(t)?);
                Ok(worst.max(e1).max(e2))
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    let max_fd_rel_error = errors.iter().copied().fold(0.0, f64::max);

    let identity_failures = family
        .par_iter()
        .enumerate()
        .filter(|(k, f)| {
            let g = &family[(k + 1) % family.len()];
            let leibniz = terms_agree(&f.mul(g).d_dt(), &f.d_dt().mul(g).add(&f.mul(&g.d_dt())), 1e-12)
                && terms_agree(&f.mul(g).d_dtbar(), &f.d_dtbar().mul(g).add(&f.mul(&g.d_dtbar())), 1e-12);
            let mixed = terms_agree(&f.d_dt().d_dtbar(), &f.d_dtbar().d_dt(), 1e-12);
            let conjugate = terms_agree(&f.d_dt().conj(), &f.conj().d_dtbar(), 1e-15);
            !(leibniz && mixed && conjugate)
        })
        .count();
    let passed = max_fd_rel_error <= tol.fd_rel && identity_failures == 0;
    Ok(CheckOutcome::new(
        1,
        "derivative identities",
        passed,
        json!({
            "expansions": family.len(),
            "points": points.len(),
            "max_fd_rel_error": max_fd_rel_error,
            "fd_rel_tolerance": tol.fd_rel,
            "identity_failures": identity_failures,
        }),
    ))
}

/// `g = -log|t|²` has `∂∂̄ log g = -1/(|t|² L²)` exactly.
pub fn poincare_exact(sweep: &Sweep, tol: &Tolerances) -> Result<CheckOutcome> {
    let g = Expansion::log_power(1, -1.0);
    let hess = hess_log(&g)?;
    let samples = sweep.samples()?;
    let worst = samples
        .par_iter()
        .map(|s| {
            let t = s.point();
            let l = 2.0 * t.norm().ln();
            let h = hess.eval(t)?.re;
            Ok((h * t.norm_sqr() * l * l + 1.0).abs())
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let profile = verify_poincare(&g, sweep, tol)?;
    Ok(CheckOutcome::new(
        2,
        "exact Poincare case",
        worst <= tol.exact_rel,
        json!({
            "max_scaled_defect": worst,
            "c_grad": profile.c_grad,
            "c_hess": profile.c_hess,
            "samples": samples.len(),
        }),
    ))
}

/// Boundedness of the `λ³`-scaled log-Hessian remainder on 50 random
/// positive pure-log-class functions.
pub fn poincare_random(seed: u64, sweep: &Sweep, tol: &Tolerances) -> Result<CheckOutcome> {
    let mut r = rng(seed ^ 0x9e37_79b9_7f4a_7c15);
    let family: Vec<Expansion> = (0..50).map(|_| random_pure_log(&mut r)).collect();
    let profiles = family.iter().map(|g| verify_poincare(g, sweep, tol)).collect::<Result<Vec<_>>>()?;
    let failing: Vec<usize> = profiles
        .iter()
        .enumerate()
        .filter(|(_, p)| !p.hess_trend_ok)
        .map(|(k, _)| k)
        .collect();
    let worst_growth = profiles
        .iter()
        .flat_map(|p| p.hess_trend.iter().map(|v| v.growth))
        .fold(0.0, f64::max);
    let max_c_hess = profiles.iter().map(|p| p.c_hess).fold(0.0, f64::max);
    let profiles_by_ell: Vec<u32> = profiles.iter().map(|p| p.ell).collect();
    Ok(CheckOutcome::new(
        3,
        "Poincare growth of random pure-log functions",
        failing.is_empty(),
        json!({
            "functions": family.len(),
            "ell": profiles_by_ell,
            "failing": failing,
            "worst_growth": worst_growth,
            "max_c_hess": max_c_hess,
            "trend_pct": tol.trend_pct,
        }),
    ))
}

fn minus_l() -> Expansion {
    Expansion::log_power(1, -1.0)
}

fn jet(a: i64, b: i64, re: f64, im: f64) -> Expansion {
    Expansion::jet(a, b, Complex64::new(re, im))
}

/// Scaled Chern coefficients at a fixed radius on every ray of the sweep.
fn coefficient_at_radius(model: &SemistableModel, sweep: &Sweep, rho: f64) -> Result<Vec<f64>> {
    let hess = hess_log(&model.det_h()?)?;
    sweep
        .angles
        .iter()
        .map(|&theta| chern_coefficient(&hess, Complex64::from_polar(rho, theta)))
        .collect()
}

/// Pointwise transport of the `λ²` and `λ³` coefficients from `t` to `s = t^ν`.
fn transport_error(f: &Expansion, nu: i64, sweep: &Sweep) -> Result<(f64, f64, f64)> {
    let big = f.pullback_power(nu)?;
    let ell = f64::from(log_class_profile(f)?);
    let (hess_s, hess_t) = (hess_log(f)?, hess_log(&big)?);
    let samples = sweep.samples()?;
    let rows = samples
        .par_iter()
        .map(|smp| {
            let t = smp.point();
            let s = t.powu(nu as u32);
            let (lt, ls) = (poincare_scale(t), poincare_scale(s));
            let ht = hess_t.eval(t)?.re;
            let hs = hess_s.eval(s)?.re;
            let lead_t = -ht * t.norm_sqr() * lt * lt;
            let lead_s = -hs * s.norm_sqr() * ls * ls;
            let rem_t = (ht * t.norm_sqr() * lt.powi(3) + ell * lt).abs();
            let rem_s = (hs * s.norm_sqr() * ls.powi(3) + ell * ls).abs();
            Ok((lead_t, lead_s, rem_t, rem_s))
        })
        .collect::<Result<Vec<_>>>()?;
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-300);
    let lead = rows.iter().map(|r| rel(r.0, r.1)).fold(0.0, f64::max);
    let c_t = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    let c_s = rows.iter().map(|r| r.3).fold(0.0, f64::max);
    let remainder = rows
        .iter()
        .map(|r| rel(crate::metrics::transport_to_s(r.2, 3, nu), r.3))
        .fold(0.0, f64::max);
    Ok((lead, remainder, rel(crate::metrics::transport_to_s(c_t, 3, nu), c_s)))
}

/// Chern-form asymptotics of models with known `det H`, and `ν`-transport.
pub fn chern_models(sweep: &Sweep, tol: &Tolerances) -> Result<CheckOutcome> {
    let mut rows = Vec::new();
    let mut passed = true;
    let mut models: Vec<(String, SemistableModel, u32)> = (1..=3)
        .map(|k| {
            let h = MetricExpansion::diagonal(vec![minus_l(); k], Variable::T)?;
            Ok((format!("diag(-L) x{k}"), SemistableModel::direct(h, 1)?, k as u32))
        })
        .collect::<Result<Vec<_>>>()?;
    let coupled = MetricExpansion::new(
        vec![vec![minus_l(), jet(1, 0, 0.5, 0.0)], vec![jet(0, 1, 0.5, 0.0), minus_l()]],
        Variable::T,
    )?;
    models.push(("coupled rank 2".into(), SemistableModel::direct(coupled.clone(), 1)?, 2));
    models.push(("coupled rank 2, nu = 2, e = (0, 1)".into(), SemistableModel::new(2, vec![0, 1], coupled, 1)?, 2));
    for (name, model, expected) in &models {
        let ch = chern_asymptotics(model, sweep, tol)?;
        let k = f64::from(*expected);
        let at6 = coefficient_at_radius(model, sweep, 1e-6)?;
        let at8 = coefficient_at_radius(model, sweep, 1e-8)?;
        let err6 = at6.iter().map(|c| (c - k).abs() / k).fold(0.0, f64::max);
        let err8 = at8.iter().map(|c| (c - k).abs() / k).fold(0.0, f64::max);
        let ok = ch.ell_q == *expected && err6 <= 0.10 && err8 <= 0.02;
        passed &= ok;
        rows.push(json!({
            "model": name,
            "ell_q": ch.ell_q,
            "expected": expected,
            "rel_error_1e-6": err6,
            "rel_error_1e-8": err8,
            "remainder_constant_t": ch.remainder_constant_t,
            "remainder_constant_s": ch.remainder_constant_s,
            "ok": ok,
        }));
    }
    let f = minus_l().add(&Expansion::constant(0.5)).add(&Expansion::radial(int(1), 1, 0.2));
    let mut transport = Vec::new();
    for nu in [2i64, 3] {
        let (lead, remainder, constant) = transport_error(&f, nu, sweep)?;
        let ok = lead <= 1e-6 && remainder <= 1e-6 && constant <= 1e-6;
        passed &= ok;
        transport.push(json!({
            "nu": nu,
            "leading_rel_error": lead,
            "remainder_rel_error": remainder,
            "constant_rel_error": constant,
            "ok": ok,
        }));
    }
    Ok(CheckOutcome::new(4, "Chern form asymptotics", passed, json!({ "models": rows, "transport": transport })))
}

/// Curvature eigenvalue bound, flat model, trace identity and frame cancellation.
pub fn theorem1_bound(sweep: &Sweep, tol: &Tolerances) -> Result<CheckOutcome> {
    let poincare = SemistableModel::direct(MetricExpansion::scalar(minus_l(), Variable::T)?, 1)?;
    let flat = SemistableModel::direct(MetricExpansion::scalar(Expansion::constant(1.0), Variable::T)?, 0)?;
    let h = MetricExpansion::new(
        vec![
            vec![minus_l().add(&Expansion::constant(1.0)), jet(1, 0, 0.2, 0.0)],
            vec![jet(0, 1, 0.2, 0.0), Expansion::constant(1.0)],
        ],
        Variable::T,
    )?;
    let twisted = SemistableModel::new(1, vec![0, 1], h, 1)?;

    let p = verify_theorem1(&poincare, sweep, tol)?;
    let f = verify_theorem1(&flat, sweep, tol)?;
    let w = verify_theorem1(&twisted, sweep, tol)?;
    let flat_max = f
        .samples
        .iter()
        .flat_map(|(_, c)| c.eigenvalues.iter().map(|x| x.abs()))
        .fold(0.0, f64::max);
    let trace_error = [&p, &f, &w].iter().map(|r| r.max_trace_rel_error).fold(0.0, f64::max);
    let cancellation = [&p, &f, &w].iter().map(|r| r.cancellation_rel_error).fold(0.0, f64::max);
    let every_sample_accepted = [&p, &f, &w].iter().all(|r| r.accepted > 0);
    let passed = (0.9..=1.1).contains(&p.c_upper)
        && flat_max <= 1e-12
        && trace_error <= 1e-8
        && cancellation <= 1e-10
        && every_sample_accepted
        && p.c_upper_trend_ok;
    Ok(CheckOutcome::new(
        5,
        "curvature eigenvalue bound",
        passed,
        json!({
            "c_upper_poincare": p.c_upper,
            "c_upper_twisted": w.c_upper,
            "flat_max_abs_eigenvalue": flat_max,
            "max_trace_rel_error": trace_error,
            "max_cancellation_rel_error": cancellation,
            "rejected": [p.rejected.len(), f.rejected.len(), w.rejected.len()],
            "negativity_flagged": [p.negativity_flagged, f.negativity_flagged, w.negativity_flagged],
        }),
    ))
}

/// The degenerating elliptic curve: `N = [[0,1],[0,0]]`, `Q = [[0,1],[-1,0]]`.
pub fn elliptic_model(eps: f64) -> Result<MonodromyData> {
    let c = |re: f64| Complex64::new(re, 0.0);
    MonodromyData::new(
        vec![vec![int(0), int(1)], vec![int(0), int(0)]],
        vec![vec![c(0.0), c(1.0)], vec![c(-1.0 + eps), c(0.0)]],
        1,
    )
}

pub fn orbit_pipeline() -> Result<CheckOutcome> {
    let coeffs = SectionCoeffs::constant(&[0.0, 1.0], &[0.0, 1.0]);
    let data = elliptic_model(0.0)?;
    let raw = fiber_integral_expansion(&data, &coeffs)?;
    let l2 = l2_metric(&data, &coeffs)?;
    let la = leading_asymptotics(&l2)?;
    let leading_ok = la.a == int(0) && la.ell == 1;
    let witness = match fiber_integral_expansion(&elliptic_model(1e-3)?, &coeffs) {
        Err(Error::NotSingleValued { j, k, m, a }) => Some((j, k, m, a)),
        _ => None,
    };
    let witness_ok = matches!(witness, Some((2, 2, 1, _)));
    Ok(CheckOutcome::new(
        6,
        "nilpotent orbit pipeline",
        leading_ok && witness_ok && l2.is_real(1e-14),
        json!({
            "raw": raw,
            "l2_metric": l2,
            "leading": la,
            "perturbed_witness": witness.map(|(j, k, m, a)| json!({"j": j, "k": k, "m": m, "a": a})),
        }),
    ))
}

/// Sharpened bound for a canonical-singularity metric, and a non-member.
pub fn canonical_singularities(sweep: &Sweep, tol: &Tolerances) -> Result<CheckOutcome> {
    let g = Expansion::constant(1.0)
        .add(&Expansion::radial(rat(1, 2), 1, 0.3))
        .add(&Expansion::radial(int(1), 0, 0.2));
    let report = prop51_verify(&MetricExpansion::scalar(g, Variable::S)?, 1, sweep, tol)?;
    let outsider = bclass_check(&minus_l(), 1);
    let passed = report.det.member && report.c1_bound.trend_ok && !outsider.member;
    Ok(CheckOutcome::new(
        7,
        "canonical singularity bound",
        passed,
        json!({
            "r": report.r.as_ref().map(|r| r.to_string()),
            "member": report.det.member,
            "scaled_constant": report.c1_bound.constant,
            "witness_rho": report.c1_bound.witness.rho,
            "trend_ok": report.c1_bound.trend_ok,
            "unscaled_growth_exponent": report.c1_bound.growth_exponent,
            "c1_min": report.c1_min.value,
            "minus_log_member": outsider.member,
            "minus_log_offending": outsider.offending,
        }),
    ))
}

/// Two identical degrees cancel, and so do a model and its rescaling.
pub fn torsion_aggregation(sweep: &Sweep, tol: &Tolerances) -> Result<CheckOutcome> {
    let h = MetricExpansion::new(
        vec![
            vec![minus_l().add(&Expansion::constant(0.5)), jet(1, 0, 0.3, 0.1)],
            vec![jet(0, 1, 0.3, -0.1), minus_l()],
        ],
        Variable::T,
    )?;
    let model = SemistableModel::new(2, vec![0, 1], h.clone(), 1)?;
    let rescaled = SemistableModel::new(2, vec![0, 1], h.map_entries(|_, _, x| Ok(x.scale(Complex64::new(3.0, 0.0))))?, 1)?;
    let mut passed = true;
    let mut rows = Vec::new();
    for (name, second) in [("identical", model.clone()), ("rescaled", rescaled)] {
        let input = TorsionInput {
            anomaly_r: rat(1, 2),
            degrees: vec![DegreeModel { q: 0, model: model.clone() }, DegreeModel { q: 1, model: second }],
        };
        let rep = torsion_hessian_profile(&input, sweep, tol)?;
        let decay = rep.cancellation.clone();
        let ok = rep.asymptotics.ell_alt == 0 && decay.as_ref().map(|d| d.ok).unwrap_or(false);
        passed &= ok;
        rows.push(json!({
            "pair": name,
            "ell_alt": rep.asymptotics.ell_alt,
            "per_degree": rep.asymptotics.per_degree,
            "decay": decay,
            "ok": ok,
        }));
    }
    Ok(CheckOutcome::new(8, "torsion aggregation", passed, json!({ "pairs": rows })))
}

pub fn run_selftest(seed: u64, sweep: &Sweep, tol: &Tolerances, fd_step_scale: f64) -> Result<SelftestReport> {
    let checks = vec![
        derivative_identities(seed, tol, fd_step_scale)?,
        poincare_exact(sweep, tol)?,
        poincare_random(seed, sweep, tol)?,
        chern_models(sweep, tol)?,
        theorem1_bound(sweep, tol)?,
        orbit_pipeline()?,
        canonical_singularities(sweep, tol)?,
        torsion_aggregation(sweep, tol)?,
    ];
    let passed = checks.iter().all(|c| c.passed);
    Ok(SelftestReport { seed, checks, passed })
}
