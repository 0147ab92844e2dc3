//! Fiber-integral expansions from unipotent monodromy data.
//!
//! With `γ = exp(N)`, `z = log s / (2πi)` and flat sections twisted by
//! `exp(-zN)`, the pairing of two sections is
//! `Σ_{a,b} (-1)^{a+b}/(a! b!) z^a z̄^b C_{a,b}` with
//! `C_{a,b}^{j,k} = Q(N^a v_j, conj(N^b v_k))`. Single-valuedness forces each
//! bidegree `m' = a + b` to be a multiple of `(log|s|²)^{m'} = (2πi)^{m'} (z - z̄)^{m'}`.

use std::f64::consts::PI;

use num_complex::Complex64;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expansion::{parse_rational, rational_to_f64, Expansion, Rational};

/// Agreement tolerance of the single-valuedness test.
pub const PAIRING_TOL: f64 = 1e-12;

pub type ComplexMatrix = Vec<Vec<Complex64>>;
type RationalMatrix = Vec<Vec<Rational>>;

/// `N` (exact, nilpotent), the reference pairing `Q` and the weight bound `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MonodromyJson", into = "MonodromyJson")]
pub struct MonodromyData {
    nilpotent: RationalMatrix,
    pairing: ComplexMatrix,
    n: u32,
}

impl MonodromyData {
    pub fn new(nilpotent: RationalMatrix, pairing: ComplexMatrix, n: u32) -> Result<Self> {
        let m = nilpotent.len();
        if m == 0 {
            return Err(Error::Invariant("monodromy data has dimension 0".into()));
        }
        let square = |rows: &[Vec<_>]| rows.len() == m && rows.iter().all(|r| r.len() == m);
        if !square(&nilpotent) || !(pairing.len() == m && pairing.iter().all(|r| r.len() == m)) {
            return Err(Error::Invariant(format!("N and Q must both be {m}×{m}")));
        }
        if pairing.iter().flatten().any(|q| !q.is_finite()) {
            return Err(Error::Invariant("Q has non-finite entries".into()));
        }
        let data = MonodromyData { nilpotent, pairing, n };
        let top = data.power(n as usize + 1);
        if top.iter().flatten().any(|x| !x.is_zero()) {
            return Err(Error::NotNilpotent(n as usize + 1));
        }
        Ok(data)
    }

    pub fn dim(&self) -> usize {
        self.nilpotent.len()
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn nilpotent(&self) -> &RationalMatrix {
        &self.nilpotent
    }

    pub fn pairing(&self) -> &ComplexMatrix {
        &self.pairing
    }

    /// `N^a`, exactly.
    pub fn power(&self, a: usize) -> RationalMatrix {
        let m = self.dim();
        let mut out: RationalMatrix =
            (0..m).map(|i| (0..m).map(|j| if i == j { Rational::one() } else { Rational::zero() }).collect()).collect();
        for _ in 0..a {
            out = (0..m)
                .map(|i| {
                    (0..m)
                        .map(|j| (0..m).fold(Rational::zero(), |acc, k| acc + &out[i][k] * &self.nilpotent[k][j]))
                        .collect()
                })
                .collect();
        }
        out
    }
}

/// Holomorphic coefficient jets `b_k(s)`, `c_k(s)` of the two sections.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectionCoeffs {
    pub b: Vec<Expansion>,
    pub c: Vec<Expansion>,
}

impl SectionCoeffs {
    pub fn new(b: Vec<Expansion>, c: Vec<Expansion>) -> Result<Self> {
        let coeffs = SectionCoeffs { b, c };
        coeffs.validate(None)?;
        Ok(coeffs)
    }

    /// Constant sections.
    pub fn constant(b: &[f64], c: &[f64]) -> Self {
        let lift = |v: &[f64]| v.iter().map(|&x| Expansion::constant(x)).collect();
        SectionCoeffs { b: lift(b), c: lift(c) }
    }

    pub fn validate(&self, dim: Option<usize>) -> Result<()> {
        if self.b.len() != self.c.len() {
            return Err(Error::Invariant(format!(
                "b has {} components but c has {}",
                self.b.len(),
                self.c.len()
            )));
        }
        if let Some(m) = dim {
            if self.b.len() != m {
                return Err(Error::Invariant(format!("sections need {m} components, got {}", self.b.len())));
            }
        }
        for (name, list) in [("b", &self.b), ("c", &self.c)] {
            for (k, series) in list.iter().enumerate() {
                if let Some((key, _)) = series
                    .iter()
                    .find(|(key, _)| !(key.is_smooth_jet() && key.q().is_zero() && key.ell() == 0))
                {
                    return Err(Error::Invariant(format!(
                        "{name}[{}] is not holomorphic: term {key}",
                        k + 1
                    )));
                }
            }
        }
        Ok(())
    }
}

/// The constants `C_{a,b}` for `0 ≤ a, b ≤ n`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairConstants {
    n: u32,
    table: Vec<Vec<ComplexMatrix>>,
}

impl PairConstants {
    pub fn n(&self) -> u32 {
        self.n
    }

    /// `C_{a,b}`; zero when either index exceeds `n`.
    pub fn get(&self, a: usize, b: usize) -> Option<&ComplexMatrix> {
        self.table.get(a).and_then(|row| row.get(b))
    }

    /// `C_{a,b}^{j,k}` with 0-based `j`, `k`.
    pub fn entry(&self, a: usize, b: usize, j: usize, k: usize) -> Complex64 {
        self.get(a, b).map(|c| c[j][k]).unwrap_or_else(Complex64::zero)
    }

    fn dim(&self) -> usize {
        self.table[0][0].len()
    }
}

/// `C_{a,b}^{j,k} = Σ_{p,q} (N^a)_{pj} conj((N^b)_{qk}) Q_{pq}`.
pub fn pair_constants(data: &MonodromyData) -> PairConstants {
    let m = data.dim();
    let n = data.n as usize;
    let powers: Vec<Vec<Vec<f64>>> = (0..=n)
        .map(|a| data.power(a).iter().map(|row| row.iter().map(rational_to_f64).collect()).collect())
        .collect();
    let q = &data.pairing;
    let table = (0..=n)
        .map(|a| {
            (0..=n)
                .map(|b| {
                    (0..m)
                        .map(|j| {
                            (0..m)
                                .map(|k| {
                                    let mut sum = Complex64::zero();
                                    for p in 0..m {
                                        let x = powers[a][p][j];
                                        if x == 0.0 {
                                            continue;
                                        }
                                        for r in 0..m {
                                            let y = powers[b][r][k];
                                            if y != 0.0 {
                                                sum += q[p][r] * (x * y);
                                            }
                                        }
                                    }
                                    sum
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    PairConstants { n: data.n, table }
}

/// Coefficient matrices of `(log|s|²)^{m'}` for `0 ≤ m' ≤ n`.
///
/// Stored as `reduced = (-1)^a C_{a,m'-a} / m'!`; the power `(2πi)^{-m'}`
/// is applied only by [`LogConstants::value`].
#[derive(Clone, Debug, PartialEq)]
pub struct LogConstants {
    reduced: Vec<ComplexMatrix>,
}

impl LogConstants {
    pub fn degree(&self) -> usize {
        self.reduced.len() - 1
    }

    pub fn reduced(&self, m: usize) -> &ComplexMatrix {
        &self.reduced[m]
    }

    /// `C_{m'}^{j,k}` including the factor `(2πi)^{-m'}`.
    pub fn value(&self, m: usize) -> ComplexMatrix {
        let scale = two_pi_i_power(m).inv();
        self.reduced[m].iter().map(|row| row.iter().map(|x| x * scale).collect()).collect()
    }
}

/// `(2πi)^m`.
pub fn two_pi_i_power(m: usize) -> Complex64 {
    Complex64::new(0.0, 2.0 * PI).powu(m as u32)
}

/// `i^{n²}`, the orientation factor identifying the pairing with the L² norm.
pub fn orientation_factor(n: u32) -> Complex64 {
    match (u64::from(n) * u64::from(n)) % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

fn close(x: Complex64, y: Complex64) -> bool {
    (x - y).norm() <= PAIRING_TOL * 1f64.max(x.norm()).max(y.norm())
}

fn factorial(m: usize) -> f64 {
    (1..=m).map(|k| k as f64).product()
}

/// Checks that every bidegree `m' ≤ 2n` is a multiple of `(z - z̄)^{m'}`,
/// i.e. that `(-1)^a C_{a,m'-a}` does not depend on `a`.
///
/// Errors name the first offending `(j, k, m')` (1-based `j`, `k`) and the
/// first `a` disagreeing with `a = 0`.
#[allow(clippy::needless_range_loop)]
pub fn single_valuedness(c: &PairConstants) -> Result<LogConstants> {
    let n = c.n() as usize;
    let m = c.dim();
    let mut reduced = Vec::with_capacity(n + 1);
    for total in 0..=2 * n {
        let mut block = vec![vec![Complex64::zero(); m]; m];
        for j in 0..m {
            for k in 0..m {
                let reference = c.entry(0, total, j, k);
                for a in 1..=total {
                    let sign = if a % 2 == 0 { 1.0 } else { -1.0 };
                    if !close(c.entry(a, total - a, j, k) * sign, reference) {
                        return Err(Error::NotSingleValued { j: j + 1, k: k + 1, m: total, a });
                    }
                }
                block[j][k] = reference / factorial(total);
            }
        }
        if total <= n {
            reduced.push(block);
        }
    }
    Ok(LogConstants { reduced })
}

/// `Σ_{m'} (log|s|²)^{m'} Σ_{j,k} C_{m'}^{j,k} b_j(s) conj(c_k(s))`.
pub fn fiber_integral_expansion(data: &MonodromyData, coeffs: &SectionCoeffs) -> Result<Expansion> {
    coeffs.validate(Some(data.dim()))?;
    let constants = single_valuedness(&pair_constants(data))?;
    let conj_c: Vec<Expansion> = coeffs.c.iter().map(Expansion::conj).collect();
    let mut total = Expansion::zero();
    for deg in 0..=constants.degree() {
        let cm = constants.value(deg);
        let mut a_m = Expansion::zero();
        for (j, b) in coeffs.b.iter().enumerate() {
            for (k, cbar) in conj_c.iter().enumerate() {
                if cm[j][k] != Complex64::zero() {
                    a_m = a_m.add(&b.mul(cbar).scale(cm[j][k]));
                }
            }
        }
        total = total.add(&a_m.mul(&Expansion::log_power(deg as u32, 1.0)));
    }
    let found = total.max_ell().unwrap_or(0);
    if found > data.n {
        return Err(Error::LogDegreeBound { found, bound: data.n });
    }
    Ok(total)
}

/// `i^{n²}` times the fiber integral: the squared L² norm of the section.
pub fn l2_metric(data: &MonodromyData, coeffs: &SectionCoeffs) -> Result<Expansion> {
    Ok(fiber_integral_expansion(data, coeffs)?.scale(orientation_factor(data.n)))
}

/// Scenario payload: monodromy data plus the two sections.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitInput {
    #[serde(flatten)]
    pub data: MonodromyData,
    #[serde(flatten)]
    pub coeffs: SectionCoeffs,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexJson {
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl From<Complex64> for ComplexJson {
    fn from(z: Complex64) -> Self {
        ComplexJson { re: z.re, im: z.im }
    }
}

impl From<ComplexJson> for Complex64 {
    fn from(z: ComplexJson) -> Self {
        Complex64::new(z.re, z.im)
    }
}

pub fn matrix_to_json(m: &ComplexMatrix) -> Vec<Vec<ComplexJson>> {
    m.iter().map(|row| row.iter().map(|&z| z.into()).collect()).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct MonodromyJson {
    n: u32,
    #[serde(rename = "N")]
    nilpotent: Vec<Vec<String>>,
    #[serde(rename = "Q")]
    pairing: Vec<Vec<ComplexJson>>,
}

impl From<MonodromyData> for MonodromyJson {
    fn from(d: MonodromyData) -> Self {
        MonodromyJson {
            n: d.n,
            nilpotent: d.nilpotent.iter().map(|row| row.iter().map(|x| x.to_string()).collect()).collect(),
            pairing: matrix_to_json(&d.pairing),
        }
    }
}

impl TryFrom<MonodromyJson> for MonodromyData {
    type Error = Error;

    fn try_from(j: MonodromyJson) -> Result<Self> {
        let nilpotent = j
            .nilpotent
            .iter()
            .map(|row| row.iter().map(|s| parse_rational(s)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let pairing = j.pairing.into_iter().map(|row| row.into_iter().map(Complex64::from).collect()).collect();
        MonodromyData::new(nilpotent, pairing, j.n)
    }
}
