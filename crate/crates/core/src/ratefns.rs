//! Limiting log-moment generating functions and Cramér rate functions for
//! the Poisson-plus-geometric-sums family.
//!
//! Everything here works on per-monomer (scaled) quantities. The Poisson
//! part has mean `kbar1`; each geometric class contributes `fbar` geometric
//! variables per monomer with ratio `varrho`. Only left tails (`theta >= 0`)
//! are covered.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::model::ScaledParams;

/// Bisection iteration cap for [`solve_theta`].
const MAX_BISECTIONS: usize = 200;

/// Target absolute accuracy for `theta_x`.
pub const THETA_TOLERANCE: f64 = 1e-12;

/// Scaled representation family: Poisson mean `kbar1` plus one geometric
/// block per non-bottleneck class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFamily {
    kbar1: f64,
    class_terms: Vec<(f64, f64)>,
    mean: f64,
}

impl RateFamily {
    /// `class_terms` holds `(fbar, varrho)` with `fbar >= 0` and
    /// `0 < varrho < 1`.
    pub fn new(kbar1: f64, class_terms: Vec<(f64, f64)>) -> Result<Self> {
        if !(kbar1.is_finite() && kbar1 >= 0.0) {
            return Err(Error::domain(format!(
                "kbar1 must be nonnegative, got {kbar1}"
            )));
        }
        for &(fbar, varrho) in &class_terms {
            if !(fbar.is_finite() && fbar >= 0.0) {
                return Err(Error::domain(format!(
                    "fbar must be nonnegative, got {fbar}"
                )));
            }
            check_varrho(varrho)?;
        }
        let mean = kbar1
            + class_terms
                .iter()
                .map(|&(f, r)| f * r / (1.0 - r))
                .sum::<f64>();
        Ok(Self {
            kbar1,
            class_terms,
            mean,
        })
    }

    /// Family of the non-bottleneck classes of `params`.
    pub fn from_params(params: &ScaledParams) -> Self {
        let class_terms = params
            .fbar
            .iter()
            .zip(&params.varrho)
            .skip(1)
            .map(|(&f, &r)| (f, r))
            .collect();
        Self::new(params.kbar1, class_terms).expect("ScaledParams are validated on construction")
    }

    pub fn kbar1(&self) -> f64 {
        self.kbar1
    }

    pub fn class_terms(&self) -> &[(f64, f64)] {
        &self.class_terms
    }

    /// `kbar1 + sum fbar * varrho / (1 - varrho)`.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Log-MGF of the whole sum at `theta >= 0`.
    pub fn lambda(&self, theta: f64) -> f64 {
        let m = self.kbar1 * (-theta).exp_m1();
        let s: f64 = self
            .class_terms
            .iter()
            .map(|&(f, r)| lambda_s_unchecked(theta, f, r))
            .sum();
        m + s
    }

    /// Derivative of [`Self::lambda`]; equals `-mean` at zero and increases
    /// to zero.
    pub fn lambda_prime(&self, theta: f64) -> f64 {
        -self.neg_lambda_prime_at(-theta)
    }

    /// `-lambda'(theta)` written in terms of `z = exp(-theta)` (passed as
    /// `ln z` for accuracy).
    fn neg_lambda_prime_at(&self, ln_z: f64) -> f64 {
        let z = ln_z.exp();
        self.kbar1 * z
            + self
                .class_terms
                .iter()
                .map(|&(f, r)| f * r * z / (1.0 - r * z))
                .sum::<f64>()
    }
}

fn check_varrho(varrho: f64) -> Result<()> {
    if varrho > 0.0 && varrho < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "varrho must lie in (0, 1), got {varrho}"
        )))
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "theta must be nonnegative, got {theta}"
        )))
    }
}

/// Log-MGF of the scaled Poisson part, `-kbar1 (1 - e^{-theta})`.
pub fn lambda_m(theta: f64, kbar1: f64) -> Result<f64> {
    check_theta(theta)?;
    Ok(kbar1 * (-theta).exp_m1())
}

/// Log-MGF of one geometric class, `fbar log((1 - r) / (1 - r e^{-theta}))`.
pub fn lambda_s_class(theta: f64, fbar: f64, varrho: f64) -> Result<f64> {
    check_theta(theta)?;
    check_varrho(varrho)?;
    Ok(lambda_s_unchecked(theta, fbar, varrho))
}

fn lambda_s_unchecked(theta: f64, fbar: f64, varrho: f64) -> f64 {
    if fbar == 0.0 {
        return 0.0;
    }
    fbar * ((-varrho).ln_1p() - (-varrho * (-theta).exp()).ln_1p())
}

/// Rate function of the scaled Poisson part; zero at and beyond `kbar1`.
pub fn ell_m(x: f64, kbar1: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::domain(format!("x must be nonnegative, got {x}")));
    }
    if kbar1 == 0.0 || x >= kbar1 {
        return Ok(0.0);
    }
    let x_log_x = if x == 0.0 { 0.0 } else { x * (x / kbar1).ln() };
    Ok(kbar1 - x + x_log_x)
}

/// Rate function of one geometric class; zero at and beyond its mean
/// `fbar varrho / (1 - varrho)`.
pub fn ell_s_class(x: f64, fbar: f64, varrho: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::domain(format!("x must be nonnegative, got {x}")));
    }
    check_varrho(varrho)?;
    if !(fbar >= 0.0) {
        return Err(Error::domain(format!(
            "fbar must be nonnegative, got {fbar}"
        )));
    }
    if fbar == 0.0 {
        return if x == 0.0 {
            Ok(0.0)
        } else {
            Err(Error::domain("empty class cannot produce a positive sum"))
        };
    }
    if x >= fbar * varrho / (1.0 - varrho) {
        return Ok(0.0);
    }
    let first = if x == 0.0 {
        0.0
    } else {
        x * (x / (varrho * (fbar + x))).ln()
    };
    let second = fbar * (fbar / ((1.0 - varrho) * (fbar + x))).ln();
    Ok(first + second)
}

/// Solves `x + lambda'(theta) = 0` for the unique `theta > 0`.
///
/// Works on `u = ln(e^{-theta}) = -theta`: `-lambda'` is increasing in `u`,
/// equal to the mean at `u = 0`.
pub fn solve_theta(family: &RateFamily, x: f64) -> Result<f64> {
    let mean = family.mean();
    if !(x > 0.0 && x < mean) {
        return Err(Error::domain(format!(
            "x = {x} must lie strictly between 0 and the mean {mean}"
        )));
    }
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    while family.neg_lambda_prime_at(-hi) > x {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Internal(format!("cannot bracket theta for x = {x}")));
        }
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if family.neg_lambda_prime_at(-mid) > x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if hi - lo > THETA_TOLERANCE.max(4.0 * f64::EPSILON * hi) {
        return Err(Error::Internal(format!(
            "theta bisection did not converge: [{lo}, {hi}]"
        )));
    }
    Ok(0.5 * (lo + hi))
}

/// Value and derivative of the rate function of the whole sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllValue {
    pub value: f64,
    /// `-theta_x`; `-inf` at `x = 0`.
    pub derivative: f64,
}

/// Rate function of the representation sum via its Legendre transform.
pub fn ell_sum(family: &RateFamily, x: f64) -> Result<EllValue> {
    if !(x >= 0.0) {
        return Err(Error::domain(format!("x must be nonnegative, got {x}")));
    }
    if x >= family.mean() {
        return Ok(EllValue {
            value: 0.0,
            derivative: 0.0,
        });
    }
    if x == 0.0 {
        let value = family.kbar1()
            + family
                .class_terms()
                .iter()
                .map(|&(f, r)| -f * (-r).ln_1p())
                .sum::<f64>();
        return Ok(EllValue {
            value,
            derivative: f64::NEG_INFINITY,
        });
    }
    let theta = solve_theta(family, x)?;
    Ok(EllValue {
        value: -theta * x - family.lambda(theta),
        derivative: -theta,
    })
}

/// `log((n)_k)` for `n >= k`, with `(n)_0 = 1`.
pub fn log_falling_factorial(n: u64, k: u64) -> Result<f64> {
    if k > n {
        return Err(Error::domain(format!(
            "falling factorial needs k <= n, got n={n}, k={k}"
        )));
    }
    Ok(log_falling_factorial_unchecked(n, k))
}

pub(crate) fn log_falling_factorial_unchecked(n: u64, k: u64) -> f64 {
    if k == 0 {
        0.0
    } else {
        ln_gamma(n as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::LN_2;

    #[test]
    fn lambda_m_values() {
        assert_eq!(lambda_m(0.0, 3.0).unwrap(), 0.0);
        assert_relative_eq!(lambda_m(LN_2, 1.0).unwrap(), -0.5, epsilon = 1e-15);
        assert_relative_eq!(lambda_m(60.0, 1.0).unwrap(), -1.0, epsilon = 1e-15);
        assert!(lambda_m(-1.0, 1.0).is_err());
    }

    #[test]
    fn lambda_s_values() {
        assert_eq!(lambda_s_class(0.0, 1.0, 0.5).unwrap(), 0.0);
        assert_relative_eq!(
            lambda_s_class(LN_2, 1.0, 0.5).unwrap(),
            -(1.5f64).ln(),
            epsilon = 1e-15
        );
        assert_eq!(lambda_s_class(2.0, 0.0, 0.3).unwrap(), 0.0);
        assert!(lambda_s_class(1.0, 1.0, 1.0).is_err());
        assert!(lambda_s_class(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn ell_m_values() {
        assert_eq!(ell_m(1.0, 1.0).unwrap(), 0.0);
        assert_relative_eq!(
            ell_m(0.5, 1.0).unwrap(),
            0.5 + 0.5 * 0.5f64.ln(),
            epsilon = 1e-15
        );
        assert_relative_eq!(ell_m(0.5, 1.0).unwrap(), 0.153426, epsilon = 1e-6);
        assert_eq!(ell_m(0.0, 1.0).unwrap(), 1.0);
        assert_eq!(ell_m(0.3, 0.0).unwrap(), 0.0);
        assert_eq!(ell_m(2.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn ell_s_values() {
        assert_eq!(ell_s_class(1.0, 1.0, 0.5).unwrap(), 0.0);
        assert_relative_eq!(ell_s_class(0.0, 1.0, 0.5).unwrap(), LN_2, epsilon = 1e-15);
        assert_eq!(ell_s_class(5.0, 1.0, 0.5).unwrap(), 0.0);
        assert!(ell_s_class(0.5, 0.0, 0.5).is_err());
        assert_eq!(ell_s_class(0.0, 0.0, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn theta_pure_poisson() {
        let fam = RateFamily::new(1.0, vec![]).unwrap();
        assert_relative_eq!(solve_theta(&fam, 0.5).unwrap(), LN_2, epsilon = 1e-12);
    }

    #[test]
    fn theta_single_geometric() {
        let fam = RateFamily::new(0.0, vec![(1.0, 0.5)]).unwrap();
        assert_relative_eq!(
            solve_theta(&fam, 0.5).unwrap(),
            1.5f64.ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn theta_near_mean_goes_to_zero() {
        let fam = RateFamily::new(1.0, vec![(0.5, 0.3)]).unwrap();
        let theta = solve_theta(&fam, fam.mean() * (1.0 - 1e-9)).unwrap();
        assert!(theta > 0.0 && theta < 1e-8);
    }

    #[test]
    fn theta_domain_errors() {
        let fam = RateFamily::new(1.0, vec![]).unwrap();
        assert!(solve_theta(&fam, 0.0).is_err());
        assert!(solve_theta(&fam, 1.0).is_err());
        assert!(solve_theta(&fam, 2.0).is_err());
        let empty = RateFamily::new(0.0, vec![]).unwrap();
        assert!(solve_theta(&empty, 0.1).is_err());
    }

    #[test]
    fn ell_sum_matches_closed_forms() {
        let pois = RateFamily::new(1.0, vec![]).unwrap();
        let v = ell_sum(&pois, 0.5).unwrap();
        assert_relative_eq!(v.value, ell_m(0.5, 1.0).unwrap(), epsilon = 1e-12);
        assert_relative_eq!(v.derivative, -LN_2, epsilon = 1e-12);

        let geo = RateFamily::new(0.0, vec![(1.0, 0.5)]).unwrap();
        let v = ell_sum(&geo, 0.5).unwrap();
        assert_relative_eq!(
            v.value,
            ell_s_class(0.5, 1.0, 0.5).unwrap(),
            epsilon = 1e-12
        );
        assert_relative_eq!(v.derivative, -(1.5f64).ln(), epsilon = 1e-12);
    }

    #[test]
    fn ell_sum_endpoints() {
        let fam = RateFamily::new(0.7, vec![(0.4, 0.5)]).unwrap();
        assert_eq!(
            ell_sum(&fam, fam.mean()).unwrap(),
            EllValue {
                value: 0.0,
                derivative: 0.0
            }
        );
        let zero = ell_sum(&fam, 0.0).unwrap();
        assert_eq!(zero.derivative, f64::NEG_INFINITY);
        assert_relative_eq!(zero.value, 0.7 + 0.4 * LN_2, epsilon = 1e-15);
        // The x = 0 value is the limit of interior values.
        let near = ell_sum(&fam, 1e-9).unwrap();
        assert!((near.value - zero.value).abs() < 1e-6);
    }

    #[test]
    fn falling_factorials() {
        assert_relative_eq!(
            log_falling_factorial(5, 2).unwrap(),
            20f64.ln(),
            epsilon = 1e-14
        );
        assert_eq!(log_falling_factorial(7, 0).unwrap(), 0.0);
        let fact12: f64 = (1..=12).map(|i| i as f64).product();
        assert_relative_eq!(
            log_falling_factorial(12, 12).unwrap(),
            fact12.ln(),
            epsilon = 1e-13
        );
        assert!(log_falling_factorial(2, 3).is_err());
    }
}
