//! Seeded generators of random expansions for property sweeps.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::expansion::{int, rat, Expansion, LogMonomial, Order};

pub const SEED_ENV: &str = "ASYMPTOTE_SEED";
pub const DEFAULT_SEED: u64 = 20_240_611;

/// Seed from `ASYMPTOTE_SEED`, or the fixed default.
pub fn seed_from_env() -> u64 {
    std::env::var(SEED_ENV)
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(DEFAULT_SEED)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn unit_complex<R: Rng>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

/// Up to 12 terms `c t^p t̄^q L^ell` with `p, q ∈ {0, 1/2, …, 3}`,
/// `p - q ∈ ℤ`, `ell ≤ 3` and `|Re c|, |Im c| < 1`.
pub fn random_expansion<R: Rng>(rng: &mut R) -> Expansion {
    let count = rng.gen_range(1..=12);
    let terms: Vec<LogMonomial> = (0..count)
        .map(|_| {
            let i = rng.gen_range(0..=6i64);
            let j = loop {
                let j = rng.gen_range(0..=6i64);
                if (i - j) % 2 == 0 {
                    break j;
                }
            };
            let ell = rng.gen_range(0..=3);
            LogMonomial::new(rat(i, 2), rat(j, 2), ell, unit_complex(rng)).expect("half-integer exponents of equal parity")
        })
        .collect();
    Expansion::from_terms(terms, Order::Infinite).expect("exact expansions admit every term")
}

/// A positive real `g = Σ_{i ≤ ℓ} a_i λ^i + (small real jets)` with `ℓ ≤ 3`.
///
/// The leading `a_ℓ` lies in `[0.5, 2]` and lower coefficients in
/// `[0, a_ℓ]`; jet terms have total weight at least 1 and coefficients
/// below 0.03 so that `g > 0` on `0 < |t| ≤ 1/2`.
pub fn random_pure_log<R: Rng>(rng: &mut R) -> Expansion {
    let ell: u32 = rng.gen_range(0..=3);
    let lead = rng.gen_range(0.5..2.0);
    let mut g = Expansion::zero();
    for i in 0..=ell {
        let a = if i == ell { lead } else { lead * rng.gen_range(0.0..1.0) };
        // a λ^i = a (-1)^i L^i
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        g = g.add(&Expansion::log_power(i, a * sign));
    }
    for _ in 0..rng.gen_range(0..=4) {
        let a = rng.gen_range(0..=2i64);
        let b = rng.gen_range(0..=2i64);
        if a + b == 0 {
            continue;
        }
        let ell = rng.gen_range(0..=ell);
        let c = unit_complex(rng) * 0.03;
        let term = Expansion::term(int(a), int(b), ell, c).expect("integer exponents");
        let mirror = term.conj();
        g = g.add(&term.scale(Complex64::new(0.5, 0.0))).add(&mirror.scale(Complex64::new(0.5, 0.0)));
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::log_calculus::log_class_profile;

    #[test]
    fn generators_are_reproducible() {
        let a: Vec<Expansion> = (0..5).map({
            let mut r = rng(7);
            move |_| random_expansion(&mut r)
        })
        .collect();
        let mut r = rng(7);
        let b: Vec<Expansion> = (0..5).map(|_| random_expansion(&mut r)).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn random_expansions_respect_the_shape() {
        let mut r = rng(11);
        for _ in 0..100 {
            let e = random_expansion(&mut r);
            assert!(e.len() <= 12 && !e.is_empty());
            assert!(e.iter().all(|(k, _)| k.ell() <= 3 && k.p() <= &int(3) && k.q() <= &int(3)));
        }
    }

    #[test]
    fn random_pure_log_is_positive_and_real() {
        let mut r = rng(3);
        for _ in 0..50 {
            let g = random_pure_log(&mut r);
            assert!(g.is_real(1e-15));
            let ell = log_class_profile(&g).unwrap();
            assert!(ell <= 3);
            for rho in [0.5, 0.1, 1e-4, 1e-8] {
                for k in 0..8 {
                    let t = Complex64::from_polar(rho, k as f64 * 0.8);
                    assert!(g.eval(t).unwrap().re > 0.0);
                }
            }
        }
    }
}
