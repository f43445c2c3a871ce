//! Large-`m` limit laws of the filament lengths and the free pool.
//!
//! * Linear regime (`f1 / m -> fbar1 > 0`): every class is geometric with
//!   parameter `varrho_i (1 - psi) / (fbar1 + 1 - psi)`, where `psi` is the
//!   limiting fraction of monomers outside the bottleneck class.
//! * Overloaded sub-linear regime (`kbar1 + sbar > 1`): every class is
//!   geometric with parameter `varrho_i exp(ell'(1))`.
//! * Underloaded sub-linear regime (`kbar1 + sbar < 1`, `1 << f1 << m`):
//!   bottleneck lengths scaled by `f1 / (m - E[sum])` are unit exponential;
//!   the other classes keep their open-network geometric law.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{classify_regime, NetworkModel, Regime, RegimeThresholds, ScaledParams};
use crate::ratefns::{ell_sum, solve_theta, RateFamily};

/// Inset from the ends of the `psi` bracket.
const PSI_BRACKET_INSET: f64 = 1e-14;

/// Limit law of one filament class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum FilamentLaw {
    /// `P[L >= l] = q^l`.
    Geometric { q: f64 },
    /// `P[L >= x * scale] -> e^{-x}`; `scale` is the mean length.
    ScaledExponential { scale: f64 },
}

impl FilamentLaw {
    /// `P[L >= l]`.
    pub fn survival(&self, l: f64) -> f64 {
        match *self {
            FilamentLaw::Geometric { q } => {
                if l <= 0.0 {
                    1.0
                } else {
                    q.powf(l)
                }
            }
            FilamentLaw::ScaledExponential { scale } => (-l.max(0.0) / scale).exp(),
        }
    }

    /// `P[L = l]`; the exponential law is discretized to integer lengths.
    pub fn pmf(&self, l: usize) -> f64 {
        match *self {
            FilamentLaw::Geometric { q } => (1.0 - q) * q.powi(l as i32),
            FilamentLaw::ScaledExponential { scale } => {
                let a = -(l as f64) / scale;
                a.exp() * -(-1.0 / scale).exp_m1()
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            FilamentLaw::Geometric { q } => q / (1.0 - q),
            FilamentLaw::ScaledExponential { scale } => scale,
        }
    }

    /// Total-variation distance between a pmf on `{0, ..., n}` and this law,
    /// counting the law's mass beyond `n`.
    pub fn tv_distance(&self, pmf: &[f64]) -> f64 {
        let body: f64 = pmf
            .iter()
            .enumerate()
            .map(|(l, p)| (p - self.pmf(l)).abs())
            .sum();
        0.5 * (body + self.survival(pmf.len() as f64))
    }
}

/// Limiting split of the monomers between the free pool, the bottleneck
/// class, and the other classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub pool: f64,
    pub class1: f64,
    pub rest: f64,
}

/// Residuals of the two equivalent `psi` equations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiResiduals {
    /// `psi + lambda'(-log q(psi))`.
    pub lambda_form: f64,
    /// `log q(psi) - ell'(psi)`; zero when `psi = 0`.
    pub ell_form: f64,
}

/// Limit laws for one regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeResult {
    pub regime: Regime,
    /// Concentration point; only set in the linear regime.
    pub psi: Option<f64>,
    /// The rate-function slope that fixes the geometric parameters:
    /// `ell'(psi)` (linear) or `ell'(1)` (overloaded).
    pub ell_prime: Option<f64>,
    pub psi_residuals: Option<PsiResiduals>,
    /// One law per class.
    pub per_class_law: Vec<FilamentLaw>,
    /// Limit of `M / m`.
    pub pool_fraction: f64,
    pub allocation: Allocation,
    /// Soft-precondition warnings.
    pub warnings: Vec<String>,
}

/// `(1 - psi) / (fbar1 + 1 - psi)`.
fn bottleneck_ratio(psi: f64, fbar1: f64) -> f64 {
    (1.0 - psi) / (fbar1 + 1.0 - psi)
}

/// Residual of `psi + lambda'(-log q(psi)) = 0`, increasing in `psi`.
fn psi_equation(family: &RateFamily, fbar1: f64, psi: f64) -> f64 {
    let theta = -bottleneck_ratio(psi, fbar1).ln();
    psi + family.lambda_prime(theta)
}

/// Solves for the linear-regime concentration point.
pub fn solve_psi_linear(params: &ScaledParams) -> Result<f64> {
    let fbar1 = params.fbar1();
    if !(fbar1 > 0.0) {
        return Err(Error::regime(format!(
            "linear regime needs a positive bottleneck fraction, got {fbar1}"
        )));
    }
    let family = RateFamily::from_params(params);
    let mean = family.mean();
    if mean == 0.0 {
        return Ok(0.0);
    }
    let upper = mean.min(1.0);
    let mut lo = PSI_BRACKET_INSET;
    let mut hi = upper - PSI_BRACKET_INSET;
    let (g_lo, g_hi) = (
        psi_equation(&family, fbar1, lo),
        psi_equation(&family, fbar1, hi),
    );
    if g_lo > 0.0 {
        // Root below the inset; only possible when the mean is tiny.
        return Ok(lo);
    }
    if g_hi < 0.0 {
        return Err(Error::Internal(format!(
            "psi equation does not change sign on (0, {upper})"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if psi_equation(&family, fbar1, mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Both residuals of the `psi` equations at `psi`.
pub fn psi_residuals(params: &ScaledParams, psi: f64) -> Result<PsiResiduals> {
    let family = RateFamily::from_params(params);
    let fbar1 = params.fbar1();
    let lambda_form = if family.mean() == 0.0 {
        psi
    } else {
        psi_equation(&family, fbar1, psi)
    };
    let ell_form = if psi > 0.0 {
        bottleneck_ratio(psi, fbar1).ln() - ell_sum(&family, psi)?.derivative
    } else {
        0.0
    };
    Ok(PsiResiduals {
        lambda_form,
        ell_form,
    })
}

/// Geometric laws and allocation of the linear regime at a given `psi`.
pub fn marginals_linear(params: &ScaledParams, psi: f64) -> Result<RegimeResult> {
    let fbar1 = params.fbar1();
    let q = bottleneck_ratio(psi, fbar1);
    let per_class_law = params
        .varrho
        .iter()
        .map(|r| FilamentLaw::Geometric { q: r * q })
        .collect();
    let pool_fraction = params.kbar1 * q;
    let family = RateFamily::from_params(params);
    let ell_prime = if psi > 0.0 && psi < family.mean() {
        Some(ell_sum(&family, psi)?.derivative)
    } else {
        None
    };
    let pool = match ell_prime {
        Some(d) => params.kbar1 * d.exp(),
        None => pool_fraction,
    };
    Ok(RegimeResult {
        regime: Regime::LinearBottleneck,
        psi: Some(psi),
        ell_prime,
        psi_residuals: Some(psi_residuals(params, psi)?),
        per_class_law,
        pool_fraction,
        allocation: Allocation {
            pool,
            class1: 1.0 - psi,
            rest: psi - pool,
        },
        warnings: Vec::new(),
    })
}

/// Limit laws when few bottlenecks share fewer monomers than the
/// representation mean.
pub fn solve_overloaded(params: &ScaledParams) -> Result<RegimeResult> {
    let family = RateFamily::from_params(params);
    let mean = family.mean();
    if !(mean > 1.0) {
        return Err(Error::regime(format!(
            "overloaded regime needs kbar1 + sbar > 1, got {mean}"
        )));
    }
    let slope = -solve_theta(&family, 1.0)?;
    let z = slope.exp();
    let per_class_law = params
        .varrho
        .iter()
        .map(|r| FilamentLaw::Geometric { q: r * z })
        .collect();
    let pool = params.kbar1 * z;
    let mut warnings = Vec::new();
    if params.fbar1() > 0.05 {
        warnings.push(format!(
            "bottleneck fraction {} is not small; the linear-regime law is more accurate",
            params.fbar1()
        ));
    }
    Ok(RegimeResult {
        regime: Regime::SublinearOverloaded,
        psi: None,
        ell_prime: Some(slope),
        psi_residuals: None,
        per_class_law,
        pool_fraction: pool,
        allocation: Allocation {
            pool,
            class1: 0.0,
            rest: 1.0 - pool,
        },
        warnings,
    })
}

/// Soft limits for the underloaded law: `f1 >= min_count` and
/// `f1 / m <= max_fraction`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UnderloadedLimits {
    pub min_count: u64,
    pub max_fraction: f64,
}

impl Default for UnderloadedLimits {
    fn default() -> Self {
        Self {
            min_count: 10,
            max_fraction: 0.05,
        }
    }
}

/// Limit laws when many (sub-linearly many) bottlenecks share a monomer
/// surplus. `representation_mean` is the finite-`m` mean of the
/// representation sum, which sets the exponential scale.
pub fn solve_underloaded(
    params: &ScaledParams,
    m: u64,
    f1: u64,
    representation_mean: f64,
    limits: &UnderloadedLimits,
) -> Result<RegimeResult> {
    let mean = params.mean();
    if !(mean < 1.0) {
        return Err(Error::regime(format!(
            "underloaded regime needs kbar1 + sbar < 1, got {mean}"
        )));
    }
    let surplus = m as f64 - representation_mean;
    if !(surplus > 0.0) || f1 == 0 {
        return Err(Error::regime(format!(
            "underloaded regime needs m above the representation mean, got m = {m}, mean = {representation_mean}"
        )));
    }
    let mut warnings = Vec::new();
    if f1 < limits.min_count {
        warnings.push(format!(
            "only {f1} bottleneck filaments; the exponential law needs many"
        ));
    }
    let fraction = f1 as f64 / m as f64;
    if fraction > limits.max_fraction {
        warnings.push(format!(
            "bottleneck fraction {fraction} is not small; the linear-regime law is more accurate"
        ));
    }
    let mut per_class_law = vec![FilamentLaw::ScaledExponential {
        scale: surplus / f1 as f64,
    }];
    per_class_law.extend(
        params
            .varrho
            .iter()
            .skip(1)
            .map(|&r| FilamentLaw::Geometric { q: r }),
    );
    Ok(RegimeResult {
        regime: Regime::SublinearUnderloaded,
        psi: None,
        ell_prime: None,
        psi_residuals: None,
        per_class_law,
        pool_fraction: params.kbar1,
        allocation: Allocation {
            pool: params.kbar1,
            class1: 1.0 - mean,
            rest: params.sbar,
        },
        warnings,
    })
}

/// Smaller root of `psi^2 - b psi + c = 0`, computed without cancellation.
fn small_root(b: f64, c: f64) -> f64 {
    if c == 0.0 {
        return 0.0;
    }
    2.0 * c / (b + (b * b - 4.0 * c).max(0.0).sqrt())
}

/// Closed-form `psi` for identical filaments: the root of
/// `psi^2 - psi (1 + fbar + kbar) + kbar = 0` in `(0, min(kbar, 1))`.
pub fn homogeneous_psi(kbar: f64, fbar: f64) -> Result<f64> {
    if !(fbar > 0.0) || !(kbar >= 0.0) {
        return Err(Error::domain(format!(
            "homogeneous psi needs fbar > 0 and kbar >= 0, got fbar = {fbar}, kbar = {kbar}"
        )));
    }
    Ok(small_root(1.0 + fbar + kbar, kbar))
}

/// Closed-form `psi` for two classes with `kbar1 = 0` and ratio `rho_f`.
pub fn two_type_psi(fbar1: f64, fbar2: f64, rho_f: f64) -> Result<f64> {
    if !(fbar1 > 0.0 && fbar2 > 0.0) {
        return Err(Error::domain("two-type psi needs positive class fractions"));
    }
    if !(rho_f > 0.0 && rho_f < 1.0) {
        return Err(Error::domain(format!(
            "rho_f must lie in (0, 1), got {rho_f}"
        )));
    }
    let c = rho_f / (1.0 - rho_f) * fbar2;
    let b = 1.0 + fbar1 / (1.0 - rho_f) + c;
    Ok(small_root(b, c))
}

/// How the CLI picks a regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeChoice {
    #[default]
    Auto,
    Linear,
    Overloaded,
    Underloaded,
}

/// Resolves `choice` for `model` and evaluates the matching limit laws.
pub fn asymptotic_for_model(
    model: &NetworkModel,
    choice: RegimeChoice,
    thresholds: &RegimeThresholds,
) -> Result<RegimeResult> {
    let params = model.scale();
    let regime = match choice {
        RegimeChoice::Auto => classify_regime(&params, model.f1(), thresholds),
        RegimeChoice::Linear => Regime::LinearBottleneck,
        RegimeChoice::Overloaded => Regime::SublinearOverloaded,
        RegimeChoice::Underloaded => Regime::SublinearUnderloaded,
    };
    match regime {
        Regime::LinearBottleneck => {
            let psi = solve_psi_linear(&params)?;
            let mut result = marginals_linear(&params, psi)?;
            if params.mean() == 1.0 {
                result
                    .warnings
                    .push("kbar1 + sbar = 1 is the critical boundary".to_string());
            }
            Ok(result)
        }
        Regime::SublinearOverloaded => solve_overloaded(&params),
        Regime::SublinearUnderloaded => solve_underloaded(
            &params,
            model.m(),
            model.f1(),
            model.representation_mean(),
            &UnderloadedLimits {
                min_count: thresholds.underloaded_count,
                max_fraction: thresholds.linear_fraction,
            },
        ),
        Regime::Exact => Err(Error::regime(format!(
            "no limit law applies (fbar1 = {}, kbar1 + sbar = {}, f1 = {}); use the exact engine",
            params.fbar1(),
            params.mean(),
            model.f1()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn param(law: FilamentLaw) -> f64 {
        match law {
            FilamentLaw::Geometric { q } => q,
            FilamentLaw::ScaledExponential { scale } => scale,
        }
    }

    fn homogeneous(kbar: f64, fbar: f64) -> ScaledParams {
        ScaledParams::new(kbar, vec![fbar], vec![1.0]).unwrap()
    }

    #[test]
    fn psi_zero_when_mean_zero() {
        assert_eq!(solve_psi_linear(&homogeneous(0.0, 0.7)).unwrap(), 0.0);
        let r = marginals_linear(&homogeneous(0.0, 0.7), 0.0).unwrap();
        assert_relative_eq!(param(r.per_class_law[0]), 1.0 / 1.7,);
        assert_eq!(r.allocation.class1, 1.0);
        assert_eq!(r.allocation.pool, 0.0);
    }

    #[test]
    fn psi_homogeneous_golden() {
        let psi = solve_psi_linear(&homogeneous(1.0, 1.0)).unwrap();
        assert_relative_eq!(psi, (3.0 - 5f64.sqrt()) / 2.0, epsilon = 1e-12);
        let r = marginals_linear(&homogeneous(1.0, 1.0), psi).unwrap();
        let FilamentLaw::Geometric { q } = r.per_class_law[0] else {
            panic!()
        };
        assert_relative_eq!(q, psi, epsilon = 1e-12);
        assert_relative_eq!(r.pool_fraction, psi, epsilon = 1e-12);
    }

    #[test]
    fn psi_two_types_limit() {
        let params = ScaledParams::new(0.0, vec![0.5, 0.5], vec![1.0, 0.5]).unwrap();
        let psi = solve_psi_linear(&params).unwrap();
        assert_relative_eq!(psi, (2.5 - 4.25f64.sqrt()) / 2.0, epsilon = 1e-12);
        let r = marginals_linear(&params, psi).unwrap();
        let a = r.allocation;
        assert_relative_eq!(a.pool + a.class1 + a.rest, 1.0, epsilon = 1e-10);
        assert!(a.pool >= 0.0 && a.class1 >= 0.0 && a.rest >= 0.0);
    }

    #[test]
    fn linear_requires_bottleneck_fraction() {
        let params = ScaledParams::new(0.5, vec![0.0], vec![1.0]).unwrap();
        assert!(matches!(solve_psi_linear(&params), Err(Error::Regime(_))));
    }

    #[test]
    fn overloaded_homogeneous() {
        let r = solve_overloaded(&homogeneous(2.0, 0.0)).unwrap();
        assert_relative_eq!(param(r.per_class_law[0]), 0.5, epsilon = 1e-12);
        assert_relative_eq!(r.pool_fraction, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn overloaded_two_types() {
        // kbar1 = 0, fbar = 1, rho_f = 0.6: q_i = rho_i / ((1 + fbar) rho_f)
        let params = ScaledParams::new(0.0, vec![0.0, 1.0], vec![1.0, 0.6]).unwrap();
        let r = solve_overloaded(&params).unwrap();
        assert_relative_eq!(
            param(r.per_class_law[0]),
            1.0 / (2.0 * 0.6),
            epsilon = 1e-12
        );
        assert_relative_eq!(param(r.per_class_law[1]), 0.5, epsilon = 1e-12);
        assert_relative_eq!(r.pool_fraction, 0.0);
        assert!(matches!(
            solve_overloaded(&homogeneous(0.5, 0.0)),
            Err(Error::Regime(_))
        ));
    }

    #[test]
    fn underloaded_scale_and_laws() {
        // m = 5000, kappa1 = 500, one class with E[S] = 500, f1 = 50.
        let model = NetworkModel::new(5000, &[(500.0, 50), (1000.0, 500)]).unwrap();
        assert_relative_eq!(model.representation_mean(), 1000.0, epsilon = 1e-9);
        let params = model.scale();
        let r = solve_underloaded(
            &params,
            5000,
            50,
            model.representation_mean(),
            &UnderloadedLimits::default(),
        )
        .unwrap();
        let law = r.per_class_law[0];
        assert_relative_eq!(param(law), 80.0, epsilon = 1e-9);
        assert_eq!(law.survival(0.0), 1.0);
        assert_eq!(r.per_class_law[1], FilamentLaw::Geometric { q: 0.5 });
        assert_relative_eq!(r.pool_fraction, 0.1);
        assert!(r.warnings.is_empty());
        let over = ScaledParams::new(1.2, vec![0.001], vec![1.0]).unwrap();
        assert!(matches!(
            solve_underloaded(&over, 1000, 1, 1200.0, &UnderloadedLimits::default()),
            Err(Error::Regime(_))
        ));
    }

    #[test]
    fn underloaded_soft_limits_warn() {
        let params = ScaledParams::new(0.1, vec![0.002], vec![1.0]).unwrap();
        let r = solve_underloaded(&params, 1000, 2, 100.0, &UnderloadedLimits::default()).unwrap();
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn quadratic_paths() {
        assert_relative_eq!(
            homogeneous_psi(1.0, 1.0).unwrap(),
            (3.0 - 5f64.sqrt()) / 2.0,
            epsilon = 1e-15
        );
        assert_eq!(homogeneous_psi(0.0, 1.0).unwrap(), 0.0);
        assert_relative_eq!(
            homogeneous_psi(4.0, 1.0).unwrap(),
            3.0 - 5f64.sqrt(),
            epsilon = 1e-14
        );
        assert_relative_eq!(
            two_type_psi(0.5, 0.5, 0.5).unwrap(),
            (2.5 - 4.25f64.sqrt()) / 2.0,
            epsilon = 1e-15
        );
        assert!(two_type_psi(0.5, 0.5, 1e-12).unwrap() < 1e-11);
        assert!(two_type_psi(0.5, 0.5, 1.0).is_err());
        assert!(homogeneous_psi(1.0, 0.0).is_err());
    }

    #[test]
    fn geometric_law_helpers() {
        let g = FilamentLaw::Geometric { q: 0.25 };
        assert_relative_eq!(g.pmf(0), 0.75);
        assert_relative_eq!(g.survival(2.0), 0.0625);
        assert_relative_eq!(g.mean(), 1.0 / 3.0);
        let exact: Vec<f64> = (0..60).map(|l| g.pmf(l)).collect();
        assert!(g.tv_distance(&exact) < 1e-15);
        let e = FilamentLaw::ScaledExponential { scale: 10.0 };
        let total: f64 = (0..2000).map(|l| e.pmf(l)).sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn model_dispatch() {
        let t = RegimeThresholds::default();
        let linear = NetworkModel::new(1000, &[(1000.0, 1000)]).unwrap();
        let r = asymptotic_for_model(&linear, RegimeChoice::Auto, &t).unwrap();
        assert_eq!(r.regime, Regime::LinearBottleneck);
        assert_relative_eq!(r.psi.unwrap(), (3.0 - 5f64.sqrt()) / 2.0, epsilon = 1e-12);

        let small = NetworkModel::new(1000, &[(500.0, 3)]).unwrap();
        assert!(matches!(
            asymptotic_for_model(&small, RegimeChoice::Auto, &t),
            Err(Error::Regime(_))
        ));
        let r = asymptotic_for_model(&small, RegimeChoice::Underloaded, &t).unwrap();
        assert!(!r.warnings.is_empty());
    }
}
