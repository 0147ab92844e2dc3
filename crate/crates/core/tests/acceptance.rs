//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#![allow(clippy::needless_range_loop)]

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::process::{Command, ExitCode};
use std::time::Instant;

use asymptote::orbit::{fiber_integral_expansion, l2_metric, MonodromyData, SectionCoeffs};
use asymptote::random::{rng, seed_from_env};
use asymptote::selftest::{self, elliptic_model, CheckOutcome};
use asymptote::sweep::{Sweep, Tolerances};
use asymptote::{int, Error, Expansion};
use num_complex::Complex64;
use rand::Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn report(id: u32, passed: bool, detail: String) -> bool {
    println!("criterion {id}: {} {detail}", if passed { "PASS" } else { "FAIL" });
    passed
}

fn from_check(outcome: asymptote::Result<CheckOutcome>, extra: &[&str]) -> (bool, String) {
    match outcome {
        Ok(o) => {
            let picked: Vec<String> = extra
                .iter()
                .filter_map(|k| o.details.get(*k).map(|v| format!("{k}={v}")))
                .collect();
            (o.passed, format!("({}) {}", o.name, picked.join(" ")))
        }
        Err(e) => (false, format!("error: {e}")),
    }
}

// Polynomial in (z, z̄) keyed by (deg z, deg z̄).
type Poly = BTreeMap<(usize, usize), Complex64>;

fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = a.len();
    (0..m)
        .map(|i| (0..m).map(|j| (0..m).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

/// Expands `Q(u_j, conj u_k)` with `u_j = exp(-zN) e_j` as a polynomial in
/// `z, z̄`, checks each bidegree is `P_{m,0} (z - z̄)^m`, and returns the
/// coefficient of `L^m` for each `(j, k)`, or the first bad `(j, k, m)`.
#[allow(clippy::type_complexity)]
fn orbit_oracle(
    n_mat: &[Vec<f64>],
    q: &[Vec<Complex64>],
) -> Result<Vec<Vec<BTreeMap<usize, Complex64>>>, (usize, usize, usize)> {
    let m = n_mat.len();
    let mut powers = vec![(0..m).map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect::<Vec<_>>()).collect::<Vec<_>>()];
    loop {
        let next = mat_mul(powers.last().unwrap(), n_mat);
        if next.iter().flatten().all(|x| *x == 0.0) {
            break;
        }
        powers.push(next);
    }
    let fact = |a: usize| (1..=a).map(|k| k as f64).product::<f64>();
    // u_j[p] as a polynomial in z: coefficient of z^a is (-1)^a (N^a)_{pj} / a!.
    let u = |j: usize, p: usize| -> Vec<f64> {
        powers.iter().enumerate().map(|(a, na)| (-1f64).powi(a as i32) * na[p][j] / fact(a)).collect()
    };
    let mut out = vec![vec![BTreeMap::new(); m]; m];
    for j in 0..m {
        for k in 0..m {
            let mut poly = Poly::new();
            for p in 0..m {
                for r in 0..m {
                    for (a, x) in u(j, p).iter().enumerate() {
                        for (b, y) in u(k, r).iter().enumerate() {
                            *poly.entry((a, b)).or_default() += q[p][r] * (x * y);
                        }
                    }
                }
            }
            let top = 2 * (powers.len() - 1);
            for deg in 0..=top {
                let lead = poly.get(&(deg, 0)).copied().unwrap_or_default();
                for a in 0..=deg {
                    let binom = fact(deg) / (fact(a) * fact(deg - a));
                    let sign = if (deg - a) % 2 == 0 { 1.0 } else { -1.0 };
                    let want = lead * binom * sign;
                    let got = poly.get(&(a, deg - a)).copied().unwrap_or_default();
                    if (got - want).norm() > 1e-12 * want.norm().max(1.0) {
                        return Err((j + 1, k + 1, deg));
                    }
                }
                // z - z̄ = L / (2πi)
                if lead != Complex64::default() {
                    out[j][k].insert(deg, lead / c(0.0, 2.0 * PI).powu(deg as u32));
                }
            }
        }
    }
    Ok(out)
}

fn oracle_expansion(n_mat: &[Vec<f64>], q: &[Vec<Complex64>], b: &[Complex64], cc: &[Complex64]) -> Result<BTreeMap<usize, Complex64>, (usize, usize, usize)> {
    let table = orbit_oracle(n_mat, q)?;
    let mut total = BTreeMap::new();
    for (j, row) in table.iter().enumerate() {
        for (k, coeffs) in row.iter().enumerate() {
            for (deg, v) in coeffs {
                *total.entry(*deg).or_insert(Complex64::default()) += v * b[j] * cc[k].conj();
            }
        }
    }
    Ok(total)
}

fn constant_vec(v: &[Complex64]) -> Vec<Expansion> {
    v.iter().map(|x| Expansion::constant(1.0).scale(*x)).collect()
}

fn agrees(production: &Expansion, oracle: &BTreeMap<usize, Complex64>) -> bool {
    let scale = oracle.values().map(|v| v.norm()).fold(1e-300, f64::max);
    let mut seen = BTreeMap::new();
    for (key, coeff) in production.iter() {
        if key.p() != &int(0) || key.q() != &int(0) {
            return false;
        }
        seen.insert(key.ell() as usize, *coeff);
    }
    let degrees: std::collections::BTreeSet<usize> = seen.keys().chain(oracle.keys()).copied().collect();
    degrees.into_iter().all(|d| {
        let a = seen.get(&d).copied().unwrap_or_default();
        let b = oracle.get(&d).copied().unwrap_or_default();
        (a - b).norm() <= 1e-12 * scale
    })
}

fn criterion6(seed: u64) -> (bool, String) {
    let (pipeline_ok, pipeline) = from_check(selftest::orbit_pipeline(), &["leading", "perturbed_witness"]);
    let elliptic_n = vec![vec![0.0, 1.0], vec![0.0, 0.0]];
    let elliptic_q = |eps: f64| vec![vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(-1.0 + eps, 0.0), c(0.0, 0.0)]];
    let weight_two_n = vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 0.0]];
    let z = c(0.0, 0.0);
    let weight_two_q = vec![vec![z, z, c(-1.0, 0.0)], vec![z, c(1.0, 0.0), z], vec![c(-1.0, 0.0), z, z]];
    let weight_two = MonodromyData::new(
        weight_two_n.iter().map(|r| r.iter().map(|x| int(*x as i64)).collect()).collect(),
        weight_two_q.clone(),
        2,
    )
    .expect("weight-two model");
    let elliptic = elliptic_model(0.0).expect("elliptic model");

    let mut cases = vec![(
        "elliptic",
        &elliptic,
        &elliptic_n,
        elliptic_q(0.0),
        vec![c(0.0, 0.0), c(1.0, 0.0)],
        vec![c(0.0, 0.0), c(1.0, 0.0)],
    )];
    let mut r = rng(seed ^ 0x006f_7262_6974);
    let mut random = |m: usize| -> Vec<Complex64> { (0..m).map(|_| c(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))).collect() };
    for _ in 0..10 {
        cases.push(("elliptic random b,c", &elliptic, &elliptic_n, elliptic_q(0.0), random(2), random(2)));
        cases.push(("weight two random b,c", &weight_two, &weight_two_n, weight_two_q.clone(), random(3), random(3)));
    }
    let mut mismatches = Vec::new();
    for (name, data, n_mat, q, b, cc) in &cases {
        let coeffs = SectionCoeffs::new(constant_vec(b), constant_vec(cc)).expect("constant coefficients");
        let production = fiber_integral_expansion(data, &coeffs);
        match (production, oracle_expansion(n_mat, q, b, cc)) {
            (Ok(p), Ok(o)) if agrees(&p, &o) => {}
            _ => mismatches.push(*name),
        }
    }

    let coeffs = SectionCoeffs::constant(&[0.0, 1.0], &[0.0, 1.0]);
    let l2 = l2_metric(&elliptic, &coeffs).expect("elliptic L2");
    let expected_l2 = -1.0 / (2.0 * PI);
    let l2_ok = l2.len() == 1 && l2.iter().all(|(k, v)| k.ell() == 1 && (v - c(expected_l2, 0.0)).norm() < 1e-15);

    let oracle_witness = oracle_expansion(&elliptic_n, &elliptic_q(1e-3), &[z, c(1.0, 0.0)], &[z, c(1.0, 0.0)]).err();
    let production_witness = match fiber_integral_expansion(&elliptic_model(1e-3).expect("perturbed"), &coeffs) {
        Err(Error::NotSingleValued { j, k, m, .. }) => Some((j, k, m)),
        _ => None,
    };
    let witness_ok = oracle_witness == Some((2, 2, 1)) && production_witness == Some((2, 2, 1));
    let passed = pipeline_ok && mismatches.is_empty() && l2_ok && witness_ok;
    (
        passed,
        format!(
            "{pipeline} oracle_cases={} mismatches={mismatches:?} l2=-L/(2pi):{l2_ok} witness(production={production_witness:?}, oracle={oracle_witness:?})",
            cases.len()
        ),
    )
}

fn criterion9(seed: u64) -> (bool, String) {
    let bin = env!("CARGO_BIN_EXE_asymptote");
    let run = || -> std::io::Result<(Vec<u8>, Vec<u8>, Vec<u8>)> {
        let dir = tempfile::tempdir()?;
        let out = Command::new(bin)
            .args(["selftest", "--out"])
            .arg(dir.path())
            .env("ASYMPTOTE_SEED", seed.to_string())
            .output()?;
        Ok((out.stdout, std::fs::read(dir.path().join("selftest.json"))?, std::fs::read(dir.path().join("selftest.txt"))?))
    };
    match (run(), run()) {
        (Ok(a), Ok(b)) => {
            let same = a == b && !a.1.is_empty();
            (same, format!("json_bytes={} txt_bytes={} identical={same}", a.1.len(), a.2.len()))
        }
        (Err(e), _) | (_, Err(e)) => (false, format!("error: {e}")),
    }
}

fn main() -> ExitCode {
    let seed = seed_from_env();
    let sweep = Sweep::default();
    let tol = Tolerances::default();
    println!("acceptance run, seed {seed}");
    let mut all = true;

    let start = Instant::now();
    let (ok, detail) = from_check(selftest::derivative_identities(seed, &tol, 1.0), &["max_fd_rel_error"]);
    let secs = start.elapsed().as_secs_f64();
    all &= report(1, ok && secs <= 30.0, format!("{detail} runtime={secs:.2}s"));

    let (ok, detail) = from_check(selftest::poincare_exact(&sweep, &tol), &["max_scaled_defect"]);
    all &= report(2, ok, detail);

    let (ok, detail) = from_check(selftest::poincare_random(seed, &sweep, &tol), &["worst_growth"]);
    all &= report(3, ok, detail);

    let (ok, detail) = from_check(selftest::chern_models(&sweep, &tol), &[]);
    all &= report(4, ok, detail);

    let (ok, detail) = from_check(selftest::theorem1_bound(&sweep, &tol), &["c_upper_poincare", "flat_max_abs_eigenvalue"]);
    all &= report(5, ok, detail);

    let (ok, detail) = criterion6(seed);
    all &= report(6, ok, detail);

    let (ok, detail) = from_check(
        selftest::canonical_singularities(&sweep, &tol),
        &["scaled_constant", "trend_ok", "unscaled_growth_exponent", "minus_log_member"],
    );
    all &= report(7, ok, detail);

    let (ok, detail) = from_check(selftest::torsion_aggregation(&sweep, &tol), &["decay"]);
    all &= report(8, ok, detail);

    let (ok, detail) = criterion9(seed);
    all &= report(9, ok, detail);

    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
