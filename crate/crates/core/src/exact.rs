//! Exact finite-`m` stationary marginals.
//!
//! The product-form law is never normalized directly. Instead the free-pool
//! and filament marginals are written as ratios of truncated expectations
//! over independent variables: a Poisson variable with mean `kappa1` plus
//! one geometric variable per non-bottleneck filament (ratio
//! `kappa1 / kappa_i`). Each expectation is weighted by a falling factorial
//! that grows exponentially in linear regimes, so all arithmetic is done on
//! logarithms.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::model::NetworkModel;
use crate::ratefns::log_falling_factorial_unchecked;

/// Resource limits for the exact engine and the brute-force oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExactConfig {
    /// Maximum `(upto + 1) * factors` for one representation pmf.
    pub cell_cap: u64,
    /// Maximum number of states the brute-force enumeration may visit.
    pub state_cap: u64,
}

impl Default for ExactConfig {
    fn default() -> Self {
        Self {
            cell_cap: 10_000_000,
            state_cap: 2_000_000,
        }
    }
}

/// Running log-sum-exp accumulator.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogSumExp {
    max: f64,
    sum: f64,
}

impl LogSumExp {
    pub(crate) fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    #[inline]
    pub(crate) fn push(&mut self, t: f64) {
        if t == f64::NEG_INFINITY {
            return;
        }
        if t <= self.max {
            self.sum += (t - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - t).exp() + 1.0;
            self.max = t;
        }
    }

    pub(crate) fn value(&self) -> f64 {
        if self.sum == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

pub(crate) fn log_sum_exp(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = LogSumExp::new();
    for v in values {
        acc.push(v);
    }
    acc.value()
}

/// A pmf on `{0, ..., n}` stored as natural logarithms.
///
/// A truncated pmf carries an upper bound on the mass beyond `n`.
/// `residual` records how far the pmf was from summing to one before it was
/// renormalized (zero when no renormalization happened).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogPmf {
    log_p: Vec<f64>,
    truncated: bool,
    tail_bound: f64,
    residual: f64,
}

impl LogPmf {
    /// A complete pmf from log-probabilities (not checked for normalization).
    pub fn from_log_probs(log_p: Vec<f64>) -> Self {
        Self {
            log_p,
            truncated: false,
            tail_bound: 0.0,
            residual: 0.0,
        }
    }

    pub fn from_probs(p: &[f64]) -> Self {
        Self::from_log_probs(p.iter().map(|x| x.ln()).collect())
    }

    fn truncated(log_p: Vec<f64>, tail_bound: f64) -> Self {
        Self {
            log_p,
            truncated: true,
            tail_bound,
            residual: 0.0,
        }
    }

    /// Divides by the total mass and records `|total - 1|` as the residual.
    pub fn normalized(mut self) -> Self {
        let total = self.log_total();
        self.residual = total.exp_m1().abs();
        for v in &mut self.log_p {
            *v -= total;
        }
        self
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_p
    }

    /// Largest represented value `n`.
    pub fn support_max(&self) -> usize {
        self.log_p.len() - 1
    }

    pub fn len(&self) -> usize {
        self.log_p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_p.is_empty()
    }

    pub fn log_prob(&self, j: usize) -> f64 {
        self.log_p.get(j).copied().unwrap_or(f64::NEG_INFINITY)
    }

    pub fn prob(&self, j: usize) -> f64 {
        self.log_prob(j).exp()
    }

    pub fn probs(&self) -> Vec<f64> {
        self.log_p.iter().map(|v| v.exp()).collect()
    }

    /// Log of the total represented mass.
    pub fn log_total(&self) -> f64 {
        log_sum_exp(self.log_p.iter().copied())
    }

    pub fn mean(&self) -> f64 {
        self.log_p
            .iter()
            .enumerate()
            .map(|(j, v)| j as f64 * v.exp())
            .sum()
    }

    pub fn is_truncated(&self) -> bool {
        self.truncated
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    /// Pre-normalization residual `|total - 1|`.
    pub fn residual(&self) -> f64 {
        self.residual
    }
}

fn finite_range(v: &[f64]) -> Option<(usize, usize)> {
    let first = v.iter().position(|x| *x > f64::NEG_INFINITY)?;
    let last = v.iter().rposition(|x| *x > f64::NEG_INFINITY)?;
    Some((first, last))
}

/// `out[s] = log sum_j exp(a[s - j] + b[j])` for `s = 0..=upto`.
pub(crate) fn log_convolve(a: &[f64], b: &[f64], upto: usize) -> Vec<f64> {
    let mut out = vec![f64::NEG_INFINITY; upto + 1];
    let (Some((a0, a1)), Some((b0, b1))) = (finite_range(a), finite_range(b)) else {
        return out;
    };
    let top = upto.min(a1 + b1);
    for s in (a0 + b0)..=top {
        let j_lo = b0.max(s.saturating_sub(a1));
        let j_hi = b1.min(s - a0);
        let mut acc = LogSumExp::new();
        for j in j_lo..=j_hi {
            acc.push(a[s - j] + b[j]);
        }
        out[s] = acc.value();
    }
    out
}

/// Poisson log-pmf on `{0, ..., upto}` via the ratio recurrence.
pub(crate) fn poisson_log_pmf(mean: f64, upto: usize) -> Vec<f64> {
    let mut out = vec![f64::NEG_INFINITY; upto + 1];
    out[0] = -mean;
    if mean == 0.0 {
        return out;
    }
    let log_mean = mean.ln();
    for j in 1..=upto {
        out[j] = out[j - 1] + log_mean - (j as f64).ln();
    }
    out
}

/// Log-pmf of a sum of `count` geometric variables with `P[X >= l] = r^l`
/// (negative binomial), via the ratio recurrence.
pub(crate) fn negbin_log_pmf(count: u64, varrho: f64, upto: usize) -> Vec<f64> {
    let mut out = vec![f64::NEG_INFINITY; upto + 1];
    out[0] = count as f64 * (-varrho).ln_1p();
    if count == 0 {
        return out;
    }
    let log_r = varrho.ln();
    let c = count as f64;
    for j in 1..=upto {
        out[j] = out[j - 1] + log_r + (c + (j - 1) as f64).ln() - (j as f64).ln();
    }
    out
}

/// `w[t] = log((t + k)_k)` for `t = 0..=len - 1`.
pub(crate) fn log_ff_table(k: u64, len: usize) -> Vec<f64> {
    if k == 0 {
        return vec![0.0; len];
    }
    let lg_k = k as f64;
    (0..len)
        .map(|t| ln_gamma(t as f64 + lg_k + 1.0) - ln_gamma(t as f64 + 1.0))
        .collect()
}

/// The independent variables behind the representation: a Poisson variable
/// plus `count` geometric variables with ratio `varrho` per entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Representation {
    pub poisson_mean: f64,
    /// `(count, varrho)` with `0 < varrho < 1`.
    pub geometric: Vec<(u64, f64)>,
}

impl Representation {
    /// `kappa1`-mean Poisson plus the geometric variables of classes `2..K`.
    pub fn of_model(model: &NetworkModel) -> Self {
        let geometric = (1..model.num_classes())
            .map(|i| (model.classes()[i].count, model.varrho(i)))
            .collect();
        Self {
            poisson_mean: model.kappa1(),
            geometric,
        }
    }

    /// Same variables with one geometric variable of block `block` removed.
    pub fn without_one(&self, block: usize) -> Self {
        let mut out = self.clone();
        out.geometric[block].0 -= 1;
        out.geometric.retain(|(count, _)| *count > 0);
        out
    }

    /// Geometric part only.
    pub fn geometric_only(&self) -> Self {
        Self {
            poisson_mean: 0.0,
            geometric: self.geometric.clone(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.poisson_mean
            + self
                .geometric
                .iter()
                .map(|&(c, r)| c as f64 * r / (1.0 - r))
                .sum::<f64>()
    }

    /// Exact law of the sum on `{0, ..., upto}`.
    pub fn pmf(&self, upto: usize, cell_cap: u64) -> Result<LogPmf> {
        let factors = 1 + self.geometric.len() as u64;
        let required = (upto as u64 + 1).saturating_mul(factors);
        if required > cell_cap {
            return Err(Error::Capacity {
                what: "representation pmf cells",
                required,
                cap: cell_cap,
            });
        }
        let mut acc = poisson_log_pmf(self.poisson_mean, upto);
        for &(count, varrho) in &self.geometric {
            let nb = negbin_log_pmf(count, varrho, upto);
            acc = log_convolve(&acc, &nb, upto);
        }
        Ok(LogPmf::truncated(acc, self.chernoff_tail(upto)))
    }

    fn log_mgf(&self, t: f64) -> f64 {
        self.poisson_mean * t.exp_m1()
            + self
                .geometric
                .iter()
                .map(|&(c, r)| c as f64 * ((-r).ln_1p() - (-r * t.exp()).ln_1p()))
                .sum::<f64>()
    }

    /// Chernoff bound on `P[sum > upto]`.
    fn chernoff_tail(&self, upto: usize) -> f64 {
        let a = upto as f64 + 1.0;
        if self.poisson_mean == 0.0 && self.geometric.is_empty() {
            return 0.0;
        }
        if a <= self.mean() {
            return 1.0;
        }
        let hi = match self
            .geometric
            .iter()
            .map(|&(_, r)| r)
            .fold(None, |acc: Option<f64>, r| {
                Some(acc.map_or(r, |x| x.max(r)))
            }) {
            Some(r_max) => -r_max.ln() * (1.0 - 1e-9),
            None => (a / self.poisson_mean).ln().max(0.0) + 1.0,
        };
        let h = |t: f64| self.log_mgf(t) - t * a;
        let (mut lo, mut hi) = (0.0, hi);
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..200 {
            let x1 = hi - phi * (hi - lo);
            let x2 = lo + phi * (hi - lo);
            if h(x1) < h(x2) {
                hi = x2;
            } else {
                lo = x1;
            }
        }
        h(0.5 * (lo + hi)).exp().min(1.0)
    }
}

/// Law of the Poisson variable plus the non-bottleneck geometric variables
/// on `{0, ..., upto}`; with `exclude_one_of_class = Some(i)` one filament
/// of class `i >= 1` is left out.
pub fn pmf_m_plus_s(
    model: &NetworkModel,
    upto: usize,
    exclude_one_of_class: Option<usize>,
    config: &ExactConfig,
) -> Result<LogPmf> {
    let rep = Representation::of_model(model);
    let rep = match exclude_one_of_class {
        None => rep,
        Some(i) if i >= 1 && i < model.num_classes() => rep.without_one(i - 1),
        Some(i) => {
            return Err(Error::domain(format!(
                "can only exclude a filament of a non-bottleneck class, got class {i}"
            )))
        }
    };
    rep.pmf(upto, config.cell_cap)
}

/// `log E[(n + k - Z)_k 1{Z <= n}]` for `Z` distributed as `pmf`.
pub fn weighted_truncated_moment(n: usize, k: u64, pmf: &LogPmf) -> Result<f64> {
    if pmf.support_max() < n {
        return Err(Error::domain(format!(
            "pmf covers 0..={} but the moment needs 0..={n}",
            pmf.support_max()
        )));
    }
    Ok(log_sum_exp((0..=n).map(|j| {
        log_falling_factorial_unchecked((n - j) as u64 + k, k) + pmf.log_prob(j)
    })))
}

/// Exact marginals of one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactMarginals {
    /// Law of the free-pool size.
    pub free_pool: LogPmf,
    /// Law of one representative filament per class.
    pub filament: Vec<LogPmf>,
    /// Natural log of the normalization constant.
    pub log_partition: f64,
}

impl ExactMarginals {
    /// Largest pre-normalization residual among the marginals.
    pub fn max_residual(&self) -> f64 {
        self.filament
            .iter()
            .map(LogPmf::residual)
            .fold(self.free_pool.residual(), f64::max)
    }
}

/// Shared pieces of the representation for one model.
struct Prepared<'a> {
    model: &'a NetworkModel,
    rep: Representation,
    m: usize,
    /// Law of the full sum on `0..=m`.
    sum: LogPmf,
    /// `log E[(m + f1 - 1 - Z)_{f1 - 1} 1{Z <= m}]`.
    log_denominator: f64,
    cell_cap: u64,
}

impl<'a> Prepared<'a> {
    fn new(model: &'a NetworkModel, config: &ExactConfig) -> Result<Self> {
        let m = usize::try_from(model.m())
            .map_err(|_| Error::validation("monomer count does not fit in memory"))?;
        let rep = Representation::of_model(model);
        let sum = rep.pmf(m, config.cell_cap)?;
        let log_denominator = weighted_truncated_moment(m, model.f1() - 1, &sum)?;
        Ok(Self {
            model,
            rep,
            m,
            sum,
            log_denominator,
            cell_cap: config.cell_cap,
        })
    }

    fn log_partition(&self) -> f64 {
        let f1 = self.model.f1() as f64;
        let kappa1 = self.model.kappa1();
        let log_poisson_at_m =
            -kappa1 + self.m as f64 * kappa1.ln() - ln_gamma(self.m as f64 + 1.0);
        let log_s_zero: f64 = self
            .rep
            .geometric
            .iter()
            .map(|&(c, r)| c as f64 * (-r).ln_1p())
            .sum();
        self.log_denominator - ln_gamma(f1) - log_poisson_at_m - log_s_zero
    }

    fn free_pool(&self) -> Result<LogPmf> {
        let m = self.m;
        let geo = self.rep.geometric_only().pmf(m, self.cell_cap)?;
        let weights = log_convolve(
            &log_ff_table(self.model.f1() - 1, m + 1),
            geo.log_probs(),
            m,
        );
        let pois = poisson_log_pmf(self.model.kappa1(), m);
        let log_p = (0..=m)
            .map(|n| pois[n] + weights[m - n] - self.log_denominator)
            .collect();
        Ok(LogPmf::from_log_probs(log_p).normalized())
    }

    fn filament(&self, class_index: usize) -> Result<LogPmf> {
        let m = self.m;
        let f1 = self.model.f1();
        let log_p: Vec<f64> = if class_index == 0 {
            if f1 == 1 {
                (0..=m)
                    .map(|l| self.sum.log_prob(m - l) - self.log_denominator)
                    .collect()
            } else {
                let weights = log_convolve(&log_ff_table(f1 - 2, m + 1), self.sum.log_probs(), m);
                let log_prefactor = ((f1 - 1) as f64).ln();
                (0..=m)
                    .map(|l| log_prefactor + weights[m - l] - self.log_denominator)
                    .collect()
            }
        } else {
            let varrho = self.model.varrho(class_index);
            let reduced = self
                .rep
                .without_one(class_index - 1)
                .pmf(m, self.cell_cap)?;
            let weights = log_convolve(&log_ff_table(f1 - 1, m + 1), reduced.log_probs(), m);
            let (log_r, log_1mr) = (varrho.ln(), (-varrho).ln_1p());
            (0..=m)
                .map(|l| l as f64 * log_r + log_1mr + weights[m - l] - self.log_denominator)
                .collect()
        };
        Ok(LogPmf::from_log_probs(log_p).normalized())
    }
}

fn check_class(model: &NetworkModel, class_index: usize) -> Result<()> {
    if class_index < model.num_classes() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "class index {class_index} out of range for {} classes",
            model.num_classes()
        )))
    }
}

/// Natural log of the normalization constant of the product-form law.
pub fn partition_function(model: &NetworkModel, config: &ExactConfig) -> Result<f64> {
    Ok(Prepared::new(model, config)?.log_partition())
}

/// Law of the free-pool size on `{0, ..., m}`.
pub fn marginal_free_pool(model: &NetworkModel, config: &ExactConfig) -> Result<LogPmf> {
    Prepared::new(model, config)?.free_pool()
}

/// Law of the length of one filament of class `class_index` (zero-based) on
/// `{0, ..., m}`.
pub fn marginal_filament(
    model: &NetworkModel,
    class_index: usize,
    config: &ExactConfig,
) -> Result<LogPmf> {
    check_class(model, class_index)?;
    Prepared::new(model, config)?.filament(class_index)
}

/// All marginals, sharing the representation pmf across classes.
pub fn exact_marginals(model: &NetworkModel, config: &ExactConfig) -> Result<ExactMarginals> {
    let prepared = Prepared::new(model, config)?;
    let filament = (0..model.num_classes())
        .map(|i| prepared.filament(i))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExactMarginals {
        free_pool: prepared.free_pool()?,
        filament,
        log_partition: prepared.log_partition(),
    })
}

/// Every state of the product-form law, enumerated. Intended as a test
/// oracle for small networks.
#[derive(Debug, Clone)]
pub struct BruteForceJoint {
    m: u64,
    num_filaments: usize,
    /// Filament lengths, `num_filaments` entries per state.
    states: Vec<u32>,
    log_probs: Vec<f64>,
    log_partition: f64,
}

/// `C(m + f, f)` without overflow, saturating at `u64::MAX`.
fn count_states(m: u64, f: u64) -> u64 {
    let mut acc: u128 = 1;
    for i in 1..=f as u128 {
        acc = acc * (m as u128 + i) / i;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Enumerates all states `(l_1, ..., l_f)` with `sum l_i <= m`.
pub fn brute_force_joint(model: &NetworkModel, config: &ExactConfig) -> Result<BruteForceJoint> {
    let f = model.num_filaments();
    let m = model.m();
    let required = count_states(m, f);
    if required > config.state_cap {
        return Err(Error::Capacity {
            what: "brute-force states",
            required,
            cap: config.state_cap,
        });
    }
    let log_kappas: Vec<f64> = model
        .classes()
        .iter()
        .flat_map(|c| std::iter::repeat_n(c.kappa.ln(), c.count as usize))
        .collect();
    let f = f as usize;
    let lg_m = ln_gamma(m as f64 + 1.0);

    let mut states = Vec::with_capacity(required as usize * f);
    let mut log_weights = Vec::with_capacity(required as usize);
    let mut current = vec![0u32; f];
    enumerate(&mut current, 0, m, &mut |state: &[u32], used: u64| {
        let lw = lg_m
            - ln_gamma((m - used) as f64 + 1.0)
            - state
                .iter()
                .zip(&log_kappas)
                .map(|(&l, lk)| l as f64 * lk)
                .sum::<f64>();
        states.extend_from_slice(state);
        log_weights.push(lw);
    });
    let log_partition = log_sum_exp(log_weights.iter().copied());
    let log_probs = log_weights.iter().map(|w| w - log_partition).collect();
    Ok(BruteForceJoint {
        m,
        num_filaments: f,
        states,
        log_probs,
        log_partition,
    })
}

fn enumerate(current: &mut [u32], pos: usize, remaining: u64, visit: &mut impl FnMut(&[u32], u64)) {
    if pos == current.len() {
        let used: u64 = current.iter().map(|&l| l as u64).sum();
        visit(current, used);
        return;
    }
    for l in 0..=remaining {
        current[pos] = l as u32;
        enumerate(current, pos + 1, remaining - l, visit);
    }
    current[pos] = 0;
}

impl BruteForceJoint {
    pub fn num_states(&self) -> usize {
        self.log_probs.len()
    }

    /// Natural log of the normalization constant.
    pub fn log_partition(&self) -> f64 {
        self.log_partition
    }

    /// `(lengths, probability)` for every state.
    pub fn states(&self) -> impl Iterator<Item = (&[u32], f64)> + '_ {
        self.states
            .chunks(self.num_filaments.max(1))
            .zip(&self.log_probs)
            .map(|(s, lp)| (s, lp.exp()))
    }

    /// Probability of one state; zero when the lengths exceed `m`.
    pub fn probability(&self, lengths: &[u32]) -> f64 {
        self.states()
            .find(|(s, _)| *s == lengths)
            .map_or(0.0, |(_, p)| p)
    }

    /// Law of the free-pool size on `{0, ..., m}`.
    pub fn free_pool_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.m as usize + 1];
        for (s, p) in self.states() {
            let used: u64 = s.iter().map(|&l| l as u64).sum();
            out[(self.m - used) as usize] += p;
        }
        out
    }

    /// Law of filament `filament` (zero-based, ordered by class) on
    /// `{0, ..., m}`.
    pub fn filament_marginal(&self, filament: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.m as usize + 1];
        for (s, p) in self.states() {
            out[s[filament] as usize] += p;
        }
        out
    }
}
