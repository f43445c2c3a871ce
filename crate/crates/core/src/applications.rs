//! Fleet dimensioning for vehicle sharing and the single-bottleneck
//! marginal.
//!
//! In the fleet model cars are customers, rental locations are single-server
//! queues and routes are infinite-server queues. With balanced locations a
//! location's queue length has the same law as a filament in a homogeneous
//! network whose dissociation constant is the total route load.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{log_sum_exp, ExactConfig, LogPmf, Representation};
use crate::model::NetworkModel;

/// Service level above which the surplus-monomer estimate is also computed.
pub const HEAVY_SERVICE_LEVEL: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FleetProblem {
    /// Expected number of cars in transit, summed over routes.
    pub route_load: f64,
    /// Number of rental locations.
    pub locations: u64,
    /// Required probability that a location has a car.
    pub target_alpha: f64,
}

impl FleetProblem {
    pub fn new(route_load: f64, locations: u64, target_alpha: f64) -> Result<Self> {
        if !(route_load.is_finite() && route_load >= 0.0) {
            return Err(Error::validation(format!(
                "route load must be nonnegative, got {route_load}"
            )));
        }
        if locations == 0 {
            return Err(Error::validation("at least one location is required"));
        }
        if !(target_alpha > 0.0 && target_alpha < 1.0) {
            return Err(Error::domain(format!(
                "service level must lie in (0, 1), got {target_alpha}"
            )));
        }
        Ok(Self {
            route_load,
            locations,
            target_alpha,
        })
    }
}

/// Fleet size recommendation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FleetSizing {
    /// Recommended number of cars.
    pub customers: u64,
    /// `alpha * load + alpha / (1 - alpha) * f`.
    pub high_m_estimate: f64,
    /// `load + f / (1 - alpha)`, computed for service levels of at least
    /// [`HEAVY_SERVICE_LEVEL`].
    pub surplus_estimate: Option<f64>,
    /// Set when the recommendation took the larger of the two estimates.
    pub took_max_of_estimates: bool,
}

/// Ceiling that ignores floating-point noise just above an integer.
fn tolerant_ceil(x: f64) -> u64 {
    let nudged = x - 1e-9 * x.abs().max(1.0);
    nudged.ceil().max(0.0) as u64
}

/// Smallest fleet meeting the service level.
pub fn fleet_min_customers(problem: &FleetProblem) -> Result<FleetSizing> {
    let FleetProblem {
        route_load,
        locations,
        target_alpha: alpha,
    } = *problem;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!(
            "service level must lie in (0, 1), got {alpha}"
        )));
    }
    let f = locations as f64;
    let high_m = alpha * route_load + alpha / (1.0 - alpha) * f;
    let surplus = (alpha >= HEAVY_SERVICE_LEVEL).then(|| route_load + f / (1.0 - alpha));
    let chosen = surplus.map_or(high_m, |s| s.max(high_m));
    Ok(FleetSizing {
        customers: tolerant_ceil(chosen).max(1),
        high_m_estimate: high_m,
        surplus_estimate: surplus,
        took_max_of_estimates: surplus.is_some_and(|s| s > high_m),
    })
}

/// Approximate service level of a fleet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServiceLevel {
    pub alpha: f64,
    /// Root of `m psi^2 - (m + f + load) psi + load = 0`; absent when
    /// `load = 0`.
    pub psi: Option<f64>,
    /// Set when `load = 0`: no car is ever in transit, so `alpha = 1`.
    pub no_transit_load: bool,
}

/// Service level `m psi / load` from the finite-`m` quadratic.
pub fn fleet_service_level(m: u64, route_load: f64, locations: u64) -> Result<ServiceLevel> {
    if m == 0 || locations == 0 {
        return Err(Error::validation(
            "fleet and location counts must be positive",
        ));
    }
    if !(route_load.is_finite() && route_load >= 0.0) {
        return Err(Error::validation(format!(
            "route load must be nonnegative, got {route_load}"
        )));
    }
    if route_load == 0.0 {
        return Ok(ServiceLevel {
            alpha: 1.0,
            psi: None,
            no_transit_load: true,
        });
    }
    let (mf, f) = (m as f64, locations as f64);
    let b = mf + f + route_load;
    let disc = (b * b - 4.0 * mf * route_load).max(0.0);
    let psi = 2.0 * route_load / (b + disc.sqrt());
    Ok(ServiceLevel {
        alpha: (mf * psi / route_load).clamp(0.0, 1.0),
        psi: Some(psi),
        no_transit_load: false,
    })
}

/// Residual of the service-level quadratic, `m psi^2 - (m + f + load) psi + load`.
pub fn service_quadratic_residual(m: u64, route_load: f64, locations: u64, psi: f64) -> f64 {
    let (mf, f) = (m as f64, locations as f64);
    mf * psi * psi - (mf + f + route_load) * psi + route_load
}

/// A closed network with one bottleneck single-server queue, `h`
/// infinite-server queues, and further single-server queues with
/// utilization below one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BottleneckSystem {
    pub m: u64,
    /// Loads of the infinite-server queues.
    pub poisson_means: Vec<f64>,
    /// Utilizations of the non-bottleneck single-server queues.
    pub geo_utilizations: Vec<f64>,
}

impl BottleneckSystem {
    pub fn new(m: u64, poisson_means: Vec<f64>, geo_utilizations: Vec<f64>) -> Result<Self> {
        if poisson_means.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::validation(
                "infinite-server loads must be nonnegative",
            ));
        }
        if geo_utilizations.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
            return Err(Error::validation("utilizations must lie in (0, 1)"));
        }
        Ok(Self {
            m,
            poisson_means,
            geo_utilizations,
        })
    }

    fn representation(&self) -> Representation {
        Representation {
            poisson_mean: self.poisson_means.iter().sum(),
            geometric: self.geo_utilizations.iter().map(|&r| (1, r)).collect(),
        }
    }

    /// Mean of the representation sum (total load plus geometric means).
    pub fn representation_mean(&self) -> f64 {
        self.representation().mean()
    }

    /// The same system as a growth network: the bottleneck is a one-filament
    /// class with dissociation constant equal to the total load. Returns the
    /// model and the class holding geometric node `node`.
    pub fn translated_model(&self, node: usize) -> Result<(NetworkModel, usize)> {
        let load: f64 = self.poisson_means.iter().sum();
        if !(load > 0.0) {
            return Err(Error::validation(
                "translation needs a positive total infinite-server load",
            ));
        }
        let rho = *self
            .geo_utilizations
            .get(node)
            .ok_or_else(|| Error::domain(format!("no geometric node {node}")))?;
        let mut specs = vec![(load, 1)];
        specs.extend(self.geo_utilizations.iter().map(|&r| (load / r, 1)));
        let model = NetworkModel::new(self.m, &specs)?;
        let target = load / rho;
        let class = model
            .classes()
            .iter()
            .position(|c| c.kappa == target)
            .ok_or_else(|| Error::Internal("translated class not found".into()))?;
        Ok((model, class))
    }
}

/// Log-cdf running sums of a log-pmf.
fn log_cdf(pmf: &LogPmf) -> Vec<f64> {
    let mut out = Vec::with_capacity(pmf.len());
    let mut acc = f64::NEG_INFINITY;
    for &lp in pmf.log_probs() {
        acc = log_sum_exp([acc, lp]);
        out.push(acc);
    }
    out
}

/// Exact law of geometric node `node` (zero-based into
/// `geo_utilizations`) on `{0, ..., m}`.
pub fn bottleneck_marginal(
    system: &BottleneckSystem,
    node: usize,
    config: &ExactConfig,
) -> Result<LogPmf> {
    let rho = *system
        .geo_utilizations
        .get(node)
        .ok_or_else(|| Error::domain(format!("no geometric node {node}")))?;
    let m = usize::try_from(system.m).map_err(|_| Error::validation("m too large"))?;
    let rep = system.representation();
    let full = log_cdf(&rep.pmf(m, config.cell_cap)?);
    let reduced = log_cdf(&rep.without_one(node).pmf(m, config.cell_cap)?);
    let (log_rho, log_1mr) = (rho.ln(), (-rho).ln_1p());
    let log_p = (0..=m)
        .map(|l| l as f64 * log_rho + log_1mr + reduced[m - l] - full[m])
        .collect();
    Ok(LogPmf::from_log_probs(log_p).normalized())
}
