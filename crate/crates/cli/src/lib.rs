//! Command-line front end for `growthnet`.
//!
//! Every verb reads an optional TOML config, applies flag overrides, runs
//! one method and writes a JSON or CSV report to `--out` (or stdout).

pub mod config;
pub mod report;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use growthnet::applications::{
    bottleneck_marginal, fleet_min_customers, fleet_service_level, BottleneckSystem, FleetProblem,
};
use growthnet::asymptotic::{asymptotic_for_model, RegimeChoice};
use growthnet::exact::exact_marginals;
use growthnet::simulate::{compare_distributions, gillespie_run, SimConfig};
use growthnet::{Error, FilamentClass, NetworkModel};

use config::{
    parse_class, parse_regime, read_file_config, BottleneckSpec, FileConfig, FleetSpec, Format,
    Method, ModelSpec, RunConfig,
};
use report::{
    AsymptoticReport, BottleneckReport, ClassPmf, CompareReport, CompareRow, ExactReport,
    FleetEvaluation, FleetReport, NodePmf, Payload, PmfTable, SimulateReport, Skipped,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_CAPACITY: i32 = 3;
pub const EXIT_REGIME: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "growthnet",
    version,
    about = "Stationary laws of closed growth networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Report destination; stdout when absent.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Simulation seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// auto, linear, overloaded or underloaded.
    #[arg(long, global = true, value_parser = parse_regime)]
    pub regime: Option<RegimeChoice>,
    /// Number of monomers.
    #[arg(long, global = true)]
    pub m: Option<u64>,
    /// Filament class as kappa:count; repeat for several classes.
    #[arg(long = "class", global = true, value_parser = parse_class, value_name = "KAPPA:COUNT")]
    pub classes: Vec<FilamentClass>,
}

#[derive(Debug, Args, Default)]
pub struct SimArgs {
    /// Events recorded after burn-in.
    #[arg(long)]
    pub events: Option<u64>,
    #[arg(long)]
    pub burnin: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact finite-m marginals.
    Exact,
    /// Large-m limit laws.
    Asymptotic,
    /// Gillespie simulation.
    Simulate(SimArgs),
    /// Every applicable method side by side.
    Compare(SimArgs),
    /// Fleet dimensioning.
    Fleet {
        /// Expected number of cars in transit.
        #[arg(long)]
        route_load: Option<f64>,
        /// Number of rental locations.
        #[arg(long)]
        locations: Option<u64>,
        /// Target service level.
        #[arg(long)]
        alpha: Option<f64>,
        /// Fleet size to evaluate.
        #[arg(long)]
        customers: Option<u64>,
    },
    /// Marginal of a non-bottleneck node next to one bottleneck queue.
    Bottleneck {
        /// Infinite-server load; repeatable.
        #[arg(long = "poisson-mean")]
        poisson_means: Vec<f64>,
        /// Single-server utilization; repeatable.
        #[arg(long = "utilization")]
        utilizations: Vec<f64>,
        /// Zero-based node; all nodes when absent.
        #[arg(long)]
        node: Option<usize>,
    },
}

impl Command {
    fn method(&self) -> Method {
        match self {
            Command::Exact => Method::Exact,
            Command::Asymptotic => Method::Asymptotic,
            Command::Simulate(_) => Method::Simulate,
            Command::Compare(_) => Method::Compare,
            Command::Fleet { .. } => Method::Fleet,
            Command::Bottleneck { .. } => Method::Bottleneck,
        }
    }
}

/// Failure of one invocation, with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub kind: &'static str,
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn config(message: String) -> Self {
        Self {
            kind: "config",
            code: EXIT_VALIDATION,
            message,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (kind, code) = match e {
            Error::Validation(_) => ("validation", EXIT_VALIDATION),
            Error::Domain(_) => ("domain", EXIT_VALIDATION),
            Error::Capacity { .. } => ("capacity", EXIT_CAPACITY),
            Error::Regime(_) => ("regime", EXIT_REGIME),
            Error::Internal(_) => ("internal", EXIT_INTERNAL),
        };
        Self {
            kind,
            code,
            message: e.to_string(),
        }
    }
}

/// Merges the config file and flags into one [`RunConfig`].
pub fn resolve(cli: &Cli) -> Result<RunConfig, Failure> {
    let file = match &cli.common.config {
        Some(p) => read_file_config(p).map_err(Failure::config)?,
        None => FileConfig::default(),
    };
    let method = cli.command.method();
    if let Some(m) = file.method {
        if m != method {
            return Err(Failure::config(format!(
                "config names method {:?} but the verb is {}",
                m.name(),
                method.name()
            )));
        }
    }
    let c = &cli.common;

    let mut model = file.model.unwrap_or_default();
    if let Some(m) = c.m {
        model.m = Some(m);
    }
    if !c.classes.is_empty() {
        model.classes = c.classes.clone();
    }
    let needs_model = matches!(
        method,
        Method::Exact | Method::Asymptotic | Method::Simulate | Method::Compare
    );
    let model = match (model.m, model.classes.is_empty()) {
        (Some(m), false) => Some(ModelSpec {
            m,
            classes: model.classes,
        }),
        _ if needs_model => {
            return Err(Failure::config(
                "a model needs m and at least one class (--m, --class or [model])".into(),
            ))
        }
        _ => None,
    };

    let mut asymptotic = file.asymptotic.unwrap_or_default();
    if let Some(r) = c.regime {
        asymptotic.regime = r;
    }

    let mut simulation = file.simulation;
    if matches!(method, Method::Simulate | Method::Compare) {
        let sim = simulation.get_or_insert_with(SimConfig::default);
        if let Command::Simulate(a) | Command::Compare(a) = &cli.command {
            if let Some(e) = a.events {
                sim.events = e;
            }
            if let Some(b) = a.burnin {
                sim.burnin_events = b;
            }
        }
    }
    if let (Some(seed), Some(sim)) = (c.seed, simulation.as_mut()) {
        sim.seed = seed;
    }

    let fleet = match &cli.command {
        Command::Fleet {
            route_load,
            locations,
            alpha,
            customers,
        } => {
            let f = file.fleet.unwrap_or_default();
            let route_load = route_load
                .or(f.route_load)
                .ok_or_else(|| Failure::config("fleet needs route_load".into()))?;
            let locations = locations
                .or(f.locations)
                .ok_or_else(|| Failure::config("fleet needs locations".into()))?;
            let spec = FleetSpec {
                route_load,
                locations,
                target_alpha: alpha.or(f.target_alpha),
                customers: customers.or(f.customers),
            };
            if spec.target_alpha.is_none() && spec.customers.is_none() {
                return Err(Failure::config(
                    "fleet needs target_alpha, customers, or both".into(),
                ));
            }
            Some(spec)
        }
        _ => None,
    };

    let bottleneck = match &cli.command {
        Command::Bottleneck {
            poisson_means,
            utilizations,
            node,
        } => {
            let b = file.bottleneck.unwrap_or_default();
            let m =
                c.m.or(b.m)
                    .ok_or_else(|| Failure::config("bottleneck needs m".into()))?;
            let poisson_means = if poisson_means.is_empty() {
                b.poisson_means
            } else {
                poisson_means.clone()
            };
            let geo_utilizations = if utilizations.is_empty() {
                b.geo_utilizations
            } else {
                utilizations.clone()
            };
            if geo_utilizations.is_empty() {
                return Err(Failure::config(
                    "bottleneck needs at least one utilization".into(),
                ));
            }
            Some(BottleneckSpec {
                m,
                poisson_means,
                geo_utilizations,
                node: node.or(b.node),
            })
        }
        _ => None,
    };

    let mut output = file.output.unwrap_or_default();
    if let Some(p) = &c.out {
        output.path = Some(p.clone());
    }
    if let Some(f) = c.format {
        output.format = f;
    }

    Ok(RunConfig {
        method,
        model,
        asymptotic,
        simulation,
        exact: file.exact.unwrap_or_default(),
        fleet,
        bottleneck,
        output,
    })
}

fn class_pmfs(model: &NetworkModel, tables: Vec<PmfTable>) -> Vec<ClassPmf> {
    model
        .classes()
        .iter()
        .zip(tables)
        .enumerate()
        .map(|(class, (c, pmf))| ClassPmf {
            class,
            kappa: c.kappa,
            count: c.count,
            pmf,
        })
        .collect()
}

fn run_exact(cfg: &RunConfig, model: &NetworkModel) -> Result<ExactReport, Error> {
    let ex = exact_marginals(model, &cfg.exact)?;
    Ok(ExactReport {
        log_partition: ex.log_partition,
        max_residual: ex.max_residual(),
        free_pool: PmfTable::from_log_pmf(&ex.free_pool),
        classes: class_pmfs(
            model,
            ex.filament.iter().map(PmfTable::from_log_pmf).collect(),
        ),
    })
}

fn run_simulate(cfg: &RunConfig, model: &NetworkModel) -> Result<SimulateReport, Error> {
    let sim = cfg.simulation.clone().unwrap_or_default();
    let est = gillespie_run(model, &sim)?;
    Ok(SimulateReport {
        seed: est.seed,
        rng_algorithm: est.rng_algorithm,
        events_used: est.events_used,
        total_sim_time: est.total_sim_time,
        free_pool: PmfTable::from_probs(&est.free_pool_pmf),
        classes: class_pmfs(
            model,
            est.filament_pmf
                .iter()
                .map(|p| PmfTable::from_probs(p))
                .collect(),
        ),
    })
}

fn run_asymptotic(cfg: &RunConfig, model: &NetworkModel) -> Result<AsymptoticReport, Error> {
    let r = asymptotic_for_model(model, cfg.asymptotic.regime, &cfg.asymptotic.thresholds)?;
    Ok(AsymptoticReport::new(r, model.m()))
}

fn run_compare(cfg: &RunConfig, model: &NetworkModel) -> Result<CompareReport, Error> {
    let (exact, (simulated, asymptotic)) = std::thread::scope(|s| {
        let sim = s.spawn(|| run_simulate(cfg, model));
        let asy = s.spawn(|| run_asymptotic(cfg, model));
        let exact = run_exact(cfg, model);
        (exact, (sim.join().unwrap(), asy.join().unwrap()))
    });
    let mut skipped = Vec::new();
    let mut note = |method: &str, e: &Error| {
        skipped.push(Skipped {
            method: method.to_string(),
            reason: e.to_string(),
        })
    };
    let exact = exact.map_err(|e| note("exact", &e)).ok();
    let simulated = match simulated {
        Ok(s) => Some(s),
        Err(e @ (Error::Validation(_) | Error::Domain(_) | Error::Internal(_))) => return Err(e),
        Err(e) => {
            note("simulate", &e);
            None
        }
    };
    let asymptotic = asymptotic.map_err(|e| note("asymptotic", &e)).ok();

    let (reference, reference_pmfs): (&str, Vec<Vec<f64>>) = match (&exact, &simulated) {
        (Some(e), _) => (
            "exact",
            e.classes
                .iter()
                .map(|c| c.pmf.probability.clone())
                .collect(),
        ),
        (None, Some(s)) => (
            "simulate",
            s.classes
                .iter()
                .map(|c| c.pmf.probability.clone())
                .collect(),
        ),
        (None, None) => {
            return Err(Error::Internal(
                "neither the exact engine nor the simulation produced a reference".into(),
            ))
        }
    };
    let ref_means: Vec<f64> = reference_pmfs
        .iter()
        .map(|p| p.iter().enumerate().map(|(j, q)| j as f64 * q).sum())
        .collect();

    let mut rows = Vec::new();
    let classes = model.classes();
    let mut push = |method: &str, class: usize, tv: f64, mean: f64| {
        rows.push(CompareRow {
            method: method.to_string(),
            class,
            kappa: classes[class].kappa,
            count: classes[class].count,
            tv_distance: tv,
            mean,
            reference_mean: ref_means[class],
        })
    };
    for (method, tables) in [
        ("exact", exact.as_ref().map(|e| &e.classes)),
        ("simulate", simulated.as_ref().map(|s| &s.classes)),
    ] {
        let Some(tables) = tables else { continue };
        for (i, c) in tables.iter().enumerate() {
            let tv = compare_distributions(&c.pmf.probability, &reference_pmfs[i])?.tv_distance;
            push(method, i, tv, c.pmf.mean);
        }
    }
    if let Some(a) = &asymptotic {
        for (i, law) in a.per_class_law.iter().enumerate() {
            push(
                "asymptotic",
                i,
                law.tv_distance(&reference_pmfs[i]),
                law.mean(),
            );
        }
    }
    Ok(CompareReport {
        reference: reference.to_string(),
        rows,
        skipped,
    })
}

fn run_fleet(spec: &FleetSpec) -> Result<FleetReport, Error> {
    let sizing = spec
        .target_alpha
        .map(|alpha| {
            let problem = FleetProblem::new(spec.route_load, spec.locations, alpha)?;
            fleet_min_customers(&problem)
        })
        .transpose()?;
    let mut evaluations = Vec::new();
    for m in sizing.iter().map(|s| s.customers).chain(spec.customers) {
        evaluations.push(FleetEvaluation {
            customers: m,
            service_level: fleet_service_level(m, spec.route_load, spec.locations)?,
        });
    }
    Ok(FleetReport {
        sizing,
        evaluations,
    })
}

fn run_bottleneck(cfg: &RunConfig, spec: &BottleneckSpec) -> Result<BottleneckReport, Error> {
    let sys = BottleneckSystem::new(
        spec.m,
        spec.poisson_means.clone(),
        spec.geo_utilizations.clone(),
    )?;
    let nodes: Vec<usize> = match spec.node {
        Some(j) => vec![j],
        None => (0..spec.geo_utilizations.len()).collect(),
    };
    let mut out = Vec::new();
    for j in nodes {
        let pmf = bottleneck_marginal(&sys, j, &cfg.exact)?;
        out.push(NodePmf {
            node: j,
            utilization: spec.geo_utilizations[j],
            pmf: PmfTable::from_log_pmf(&pmf),
        });
    }
    Ok(BottleneckReport {
        representation_mean: sys.representation_mean(),
        nodes: out,
    })
}

/// Runs the configured method.
pub fn execute(cfg: &RunConfig) -> Result<Payload, Failure> {
    let model = cfg.model.as_ref().map(ModelSpec::build).transpose()?;
    let need_model = || {
        model
            .as_ref()
            .ok_or_else(|| Failure::config("this method needs a model".into()))
    };
    Ok(match cfg.method {
        Method::Exact => Payload::Exact(run_exact(cfg, need_model()?)?),
        Method::Asymptotic => Payload::Asymptotic(run_asymptotic(cfg, need_model()?)?),
        Method::Simulate => Payload::Simulate(run_simulate(cfg, need_model()?)?),
        Method::Compare => Payload::Compare(run_compare(cfg, need_model()?)?),
        Method::Fleet => {
            let spec = cfg
                .fleet
                .as_ref()
                .ok_or_else(|| Failure::config("missing [fleet]".into()))?;
            Payload::Fleet(run_fleet(spec)?)
        }
        Method::Bottleneck => {
            let spec = cfg
                .bottleneck
                .as_ref()
                .ok_or_else(|| Failure::config("missing [bottleneck]".into()))?;
            Payload::Bottleneck(run_bottleneck(cfg, spec)?)
        }
    })
}

fn emit(path: Option<&PathBuf>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure {
            kind: "io",
            code: EXIT_VALIDATION,
            message: format!("cannot write {}: {e}", p.display()),
        }),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure {
                kind: "io",
                code: EXIT_INTERNAL,
                message: format!("cannot write to stdout: {e}"),
            }),
    }
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let cfg = match resolve(&cli) {
        Ok(c) => c,
        Err(f) => {
            eprintln!("error: {}", f.message);
            return f.code;
        }
    };
    let result = execute(&cfg).and_then(|payload| {
        let text = match cfg.output.format {
            Format::Json => report::to_json(&cfg, &payload),
            Format::Csv => report::to_csv(&payload),
        };
        emit(cfg.output.path.as_ref(), &text)
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            if let Some(p) = &cfg.output.path {
                let _ = fs::write(p, report::error_json(f.kind, f.code, &f.message));
            }
            f.code
        }
    }
}
