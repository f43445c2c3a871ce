//! Result documents and their JSON/CSV encodings.

use growthnet::applications::{FleetSizing, ServiceLevel};
use growthnet::asymptotic::{Allocation, FilamentLaw, PsiResiduals, RegimeResult};
use growthnet::exact::LogPmf;
use growthnet::Regime;
use serde::Serialize;

use crate::config::RunConfig;

pub const SCHEMA_VERSION: &str = "1";

/// A pmf with linear and log probabilities; zero probabilities have a null
/// log.
#[derive(Debug, Clone, Serialize)]
pub struct PmfTable {
    pub support_max: usize,
    pub mean: f64,
    pub probability: Vec<f64>,
    pub log_probability: Vec<Option<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalization_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncated_tail_bound: Option<f64>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl PmfTable {
    pub fn from_log_pmf(p: &LogPmf) -> Self {
        Self {
            support_max: p.support_max(),
            mean: p.mean(),
            probability: p.probs(),
            log_probability: p.log_probs().iter().map(|&x| finite(x)).collect(),
            normalization_residual: Some(p.residual()),
            truncated_tail_bound: p.is_truncated().then(|| p.tail_bound()),
        }
    }

    pub fn from_probs(p: &[f64]) -> Self {
        Self {
            support_max: p.len().saturating_sub(1),
            mean: p.iter().enumerate().map(|(j, q)| j as f64 * q).sum(),
            probability: p.to_vec(),
            log_probability: p.iter().map(|&q| finite(q.ln())).collect(),
            normalization_residual: None,
            truncated_tail_bound: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassPmf {
    pub class: usize,
    pub kappa: f64,
    pub count: u64,
    pub pmf: PmfTable,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExactReport {
    pub log_partition: f64,
    pub max_residual: f64,
    pub free_pool: PmfTable,
    pub classes: Vec<ClassPmf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub psi: Option<f64>,
    pub ell_prime: Option<f64>,
    pub psi_residuals: Option<PsiResiduals>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticReport {
    pub regime: Regime,
    pub per_class_law: Vec<FilamentLaw>,
    pub pool_fraction: f64,
    pub allocation: Allocation,
    pub diagnostics: Diagnostics,
    pub warnings: Vec<String>,
    /// Each class law evaluated on `{0, ..., m}`, for plotting.
    #[serde(skip)]
    pub tabulated: Vec<Vec<f64>>,
}

impl AsymptoticReport {
    pub fn new(r: RegimeResult, m: u64) -> Self {
        let tabulated = r
            .per_class_law
            .iter()
            .map(|law| (0..=m as usize).map(|l| law.pmf(l)).collect())
            .collect();
        Self {
            regime: r.regime,
            per_class_law: r.per_class_law,
            pool_fraction: r.pool_fraction,
            allocation: r.allocation,
            diagnostics: Diagnostics {
                psi: r.psi,
                ell_prime: r.ell_prime,
                psi_residuals: r.psi_residuals,
            },
            warnings: r.warnings,
            tabulated,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateReport {
    pub seed: u64,
    pub rng_algorithm: String,
    pub events_used: u64,
    pub total_sim_time: f64,
    pub free_pool: PmfTable,
    pub classes: Vec<ClassPmf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareRow {
    pub method: String,
    pub class: usize,
    pub kappa: f64,
    pub count: u64,
    /// Distance to the reference method's pmf of the same class.
    pub tv_distance: f64,
    pub mean: f64,
    pub reference_mean: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Skipped {
    pub method: String,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub reference: String,
    pub rows: Vec<CompareRow>,
    pub skipped: Vec<Skipped>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FleetEvaluation {
    pub customers: u64,
    pub service_level: ServiceLevel,
}

#[derive(Debug, Clone, Serialize)]
pub struct FleetReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sizing: Option<FleetSizing>,
    pub evaluations: Vec<FleetEvaluation>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NodePmf {
    pub node: usize,
    pub utilization: f64,
    pub pmf: PmfTable,
}

#[derive(Debug, Clone, Serialize)]
pub struct BottleneckReport {
    pub representation_mean: f64,
    pub nodes: Vec<NodePmf>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum Payload {
    Exact(ExactReport),
    Asymptotic(AsymptoticReport),
    Simulate(SimulateReport),
    Compare(CompareReport),
    Fleet(FleetReport),
    Bottleneck(BottleneckReport),
}

#[derive(Serialize)]
struct Envelope<'a> {
    schema_version: &'static str,
    library_version: &'static str,
    method: &'static str,
    config: &'a RunConfig,
    result: &'a Payload,
}

pub fn to_json(config: &RunConfig, payload: &Payload) -> String {
    let env = Envelope {
        schema_version: SCHEMA_VERSION,
        library_version: growthnet::VERSION,
        method: config.method.name(),
        config,
        result: payload,
    };
    let mut s = serde_json::to_string_pretty(&env).expect("report serializes");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    exit_code: i32,
    message: &'a str,
}

#[derive(Serialize)]
struct ErrorEnvelope<'a> {
    schema_version: &'static str,
    library_version: &'static str,
    error: ErrorBody<'a>,
}

pub fn error_json(kind: &str, exit_code: i32, message: &str) -> String {
    let env = ErrorEnvelope {
        schema_version: SCHEMA_VERSION,
        library_version: growthnet::VERSION,
        error: ErrorBody {
            kind,
            exit_code,
            message,
        },
    };
    let mut s = serde_json::to_string_pretty(&env).expect("error serializes");
    s.push('\n');
    s
}

fn pmf_rows(out: &mut String, label: &str, p: &PmfTable) {
    for (j, (q, lq)) in p.probability.iter().zip(&p.log_probability).enumerate() {
        let lq = lq.map(|x| x.to_string()).unwrap_or_default();
        out.push_str(&format!("{label},{j},{q},{lq}\n"));
    }
}

const PMF_HEADER: &str = "distribution,value,probability,log_probability\n";

pub fn to_csv(payload: &Payload) -> String {
    let mut out = String::new();
    match payload {
        Payload::Exact(r) => {
            out.push_str(PMF_HEADER);
            pmf_rows(&mut out, "free_pool", &r.free_pool);
            for c in &r.classes {
                pmf_rows(&mut out, &format!("class_{}", c.class), &c.pmf);
            }
        }
        Payload::Simulate(r) => {
            out.push_str(PMF_HEADER);
            pmf_rows(&mut out, "free_pool", &r.free_pool);
            for c in &r.classes {
                pmf_rows(&mut out, &format!("class_{}", c.class), &c.pmf);
            }
        }
        Payload::Asymptotic(r) => {
            out.push_str(PMF_HEADER);
            for (i, t) in r.tabulated.iter().enumerate() {
                pmf_rows(&mut out, &format!("class_{i}"), &PmfTable::from_probs(t));
            }
        }
        Payload::Bottleneck(r) => {
            out.push_str(PMF_HEADER);
            for n in &r.nodes {
                pmf_rows(&mut out, &format!("node_{}", n.node), &n.pmf);
            }
        }
        Payload::Compare(r) => {
            out.push_str("method,class,kappa,count,tv_distance,mean,reference_mean\n");
            for row in &r.rows {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    row.method,
                    row.class,
                    row.kappa,
                    row.count,
                    row.tv_distance,
                    row.mean,
                    row.reference_mean
                ));
            }
        }
        Payload::Fleet(r) => {
            out.push_str("customers,alpha,psi,no_transit_load\n");
            for e in &r.evaluations {
                let psi = e
                    .service_level
                    .psi
                    .map(|x| x.to_string())
                    .unwrap_or_default();
                out.push_str(&format!(
                    "{},{},{psi},{}\n",
                    e.customers, e.service_level.alpha, e.service_level.no_transit_load
                ));
            }
        }
    }
    out
}
