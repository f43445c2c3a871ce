//! Gillespie simulation of the attach/detach chain.
//!
//! A monomer attaches to filament `i` at rate `M * lambda_i` (with `M` the
//! free-pool size) and a non-empty filament sheds one monomer at rate
//! `mu_i = lambda_i * kappa_i`. Occupancy is time-weighted after burn-in,
//! and filaments within a class are pooled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::NetworkModel;

/// Name of the generator behind every [`SimEstimate`].
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha), seeded with seed_from_u64";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub seed: u64,
    /// Events recorded after burn-in.
    pub events: u64,
    pub burnin_events: u64,
    /// Common attach rate; detach rates are `lambda_scale * kappa`.
    pub lambda_scale: f64,
    /// Per-class attach rates replacing `lambda_scale`.
    pub lambda_override: Option<Vec<f64>>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            events: 10_000_000,
            burnin_events: 100_000,
            lambda_scale: 1.0,
            lambda_override: None,
        }
    }
}

/// Time-averaged empirical laws of one simulated trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEstimate {
    /// Law of the free-pool size on `{0, ..., m}`.
    pub free_pool_pmf: Vec<f64>,
    /// Law of a filament length per class on `{0, ..., m}`.
    pub filament_pmf: Vec<Vec<f64>>,
    pub total_sim_time: f64,
    pub events_used: u64,
    pub seed: u64,
    pub rng_algorithm: String,
}

impl SimEstimate {
    /// Time-weighted average of two runs of the same model.
    pub fn merge(&self, other: &SimEstimate) -> Result<SimEstimate> {
        if self.free_pool_pmf.len() != other.free_pool_pmf.len()
            || self.filament_pmf.len() != other.filament_pmf.len()
        {
            return Err(Error::validation(
                "cannot merge estimates of different models",
            ));
        }
        let total = self.total_sim_time + other.total_sim_time;
        let (wa, wb) = (self.total_sim_time / total, other.total_sim_time / total);
        let mix = |a: &[f64], b: &[f64]| -> Vec<f64> {
            a.iter().zip(b).map(|(x, y)| wa * x + wb * y).collect()
        };
        Ok(SimEstimate {
            free_pool_pmf: mix(&self.free_pool_pmf, &other.free_pool_pmf),
            filament_pmf: self
                .filament_pmf
                .iter()
                .zip(&other.filament_pmf)
                .map(|(a, b)| mix(a, b))
                .collect(),
            total_sim_time: total,
            events_used: self.events_used + other.events_used,
            seed: self.seed,
            rng_algorithm: self.rng_algorithm.clone(),
        })
    }
}

/// Lazily integrated occupancy counts for one class: `count[l]` filaments
/// currently have length `l`.
struct ClassOccupancy {
    count: Vec<u64>,
    area: Vec<f64>,
    since: Vec<f64>,
}

impl ClassOccupancy {
    fn new(m: usize, filaments: u64) -> Self {
        let mut count = vec![0; m + 1];
        count[0] = filaments;
        Self {
            count,
            area: vec![0.0; m + 1],
            since: vec![0.0; m + 1],
        }
    }

    fn settle(&mut self, l: usize, now: f64) {
        self.area[l] += self.count[l] as f64 * (now - self.since[l]);
        self.since[l] = now;
    }

    fn shift(&mut self, from: usize, to: usize, now: f64, recording: bool) {
        if recording {
            self.settle(from, now);
            self.settle(to, now);
        }
        self.count[from] -= 1;
        self.count[to] += 1;
    }

    fn start_recording(&mut self) {
        self.area.iter_mut().for_each(|a| *a = 0.0);
        self.since.iter_mut().for_each(|s| *s = 0.0);
    }

    fn finish(mut self, now: f64) -> Vec<f64> {
        for l in 0..self.count.len() {
            self.settle(l, now);
        }
        normalize(self.area)
    }
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        v.iter_mut().for_each(|x| *x /= total);
    }
    v
}

/// Filaments of one class that currently hold at least one monomer, with
/// O(1) insert and remove.
struct NonEmptySet {
    members: Vec<usize>,
    slot: Vec<usize>,
}

impl NonEmptySet {
    const ABSENT: usize = usize::MAX;

    fn new(size: usize) -> Self {
        Self {
            members: Vec::with_capacity(size),
            slot: vec![Self::ABSENT; size],
        }
    }

    fn insert(&mut self, local: usize) {
        debug_assert_eq!(self.slot[local], Self::ABSENT);
        self.slot[local] = self.members.len();
        self.members.push(local);
    }

    fn remove(&mut self, local: usize) {
        let at = self.slot[local];
        let last = *self.members.last().expect("nonempty");
        self.members.swap_remove(at);
        if last != local {
            self.slot[last] = at;
        }
        self.slot[local] = Self::ABSENT;
    }
}

/// Simulates the chain for `config.burnin_events + config.events` events.
pub fn gillespie_run(model: &NetworkModel, config: &SimConfig) -> Result<SimEstimate> {
    if config.events == 0 {
        return Err(Error::validation("simulation needs at least one event"));
    }
    if model.m() == 0 {
        return Err(Error::validation("simulation needs at least one monomer"));
    }
    let lambdas: Vec<f64> = match &config.lambda_override {
        Some(v) if v.len() == model.num_classes() => v.clone(),
        Some(v) => {
            return Err(Error::validation(format!(
                "lambda_override has {} entries for {} classes",
                v.len(),
                model.num_classes()
            )))
        }
        None => vec![config.lambda_scale; model.num_classes()],
    };
    if lambdas.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
        return Err(Error::validation("attach rates must be positive"));
    }
    let m = usize::try_from(model.m()).map_err(|_| Error::validation("m too large"))?;
    let classes = model.classes();
    let mus: Vec<f64> = classes
        .iter()
        .zip(&lambdas)
        .map(|(c, l)| c.kappa * l)
        .collect();
    let attach_weight: Vec<f64> = classes
        .iter()
        .zip(&lambdas)
        .map(|(c, l)| c.count as f64 * l)
        .collect();
    let attach_total: f64 = attach_weight.iter().sum();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut lengths: Vec<Vec<u32>> = classes.iter().map(|c| vec![0; c.count as usize]).collect();
    let mut nonempty: Vec<NonEmptySet> = classes
        .iter()
        .map(|c| NonEmptySet::new(c.count as usize))
        .collect();
    let mut occupancy: Vec<ClassOccupancy> = classes
        .iter()
        .map(|c| ClassOccupancy::new(m, c.count))
        .collect();
    let mut detach_rates = vec![0.0; model.num_classes()];
    let mut pool_time = vec![0.0; m + 1];
    let mut free = m;
    let mut now = 0.0;
    let mut recording = config.burnin_events == 0;
    let total_events = config.burnin_events + config.events;

    for event in 0..total_events {
        if event == config.burnin_events && !recording {
            recording = true;
            now = 0.0;
            occupancy
                .iter_mut()
                .for_each(ClassOccupancy::start_recording);
        }
        let attach_rate = free as f64 * attach_total;
        for ((rate, set), mu) in detach_rates.iter_mut().zip(&nonempty).zip(&mus) {
            *rate = set.members.len() as f64 * mu;
        }
        let detach_rate: f64 = detach_rates.iter().sum();
        let total_rate = attach_rate + detach_rate;
        debug_assert!(total_rate > 0.0);

        let dt: f64 = Exp1.sample(&mut rng);
        let dt = dt / total_rate;
        if recording {
            pool_time[free] += dt;
        }
        now += dt;

        let mut pick = rng.random::<f64>() * total_rate;
        if pick < attach_rate {
            pick /= free as f64;
            let class = choose(&attach_weight, pick);
            let local = rng.random_range(0..lengths[class].len());
            let l = lengths[class][local] as usize;
            if l == 0 {
                nonempty[class].insert(local);
            }
            lengths[class][local] += 1;
            occupancy[class].shift(l, l + 1, now, recording);
            free -= 1;
        } else {
            let class = choose(&detach_rates, pick - attach_rate);
            let set = &nonempty[class];
            let local = set.members[rng.random_range(0..set.members.len())];
            let l = lengths[class][local] as usize;
            lengths[class][local] -= 1;
            if l == 1 {
                nonempty[class].remove(local);
            }
            occupancy[class].shift(l, l - 1, now, recording);
            free += 1;
        }
        if cfg!(debug_assertions) && event % (1 << 16) == 0 {
            let held: u64 = lengths.iter().flatten().map(|&l| l as u64).sum();
            assert_eq!(free as u64 + held, model.m(), "monomer count drifted");
        }
    }

    Ok(SimEstimate {
        free_pool_pmf: normalize(pool_time),
        filament_pmf: occupancy.into_iter().map(|o| o.finish(now)).collect(),
        total_sim_time: now,
        events_used: config.events,
        seed: config.seed,
        rng_algorithm: RNG_ALGORITHM.to_string(),
    })
}

/// Index `i` with `sum(weights[..i]) <= target < sum(weights[..=i])`,
/// skipping zero weights; falls back to the last positive weight on
/// rounding overshoot.
fn choose(weights: &[f64], mut target: f64) -> usize {
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            if target < w {
                return i;
            }
            last_positive = i;
        }
        target -= w;
    }
    last_positive
}

/// Distance between two normalized pmfs over the union of their supports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmfDistance {
    pub tv_distance: f64,
    pub max_abs: f64,
}

const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// Total-variation distance and largest pointwise gap.
pub fn compare_distributions(a: &[f64], b: &[f64]) -> Result<PmfDistance> {
    for (name, p) in [("first", a), ("second", b)] {
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE || p.iter().any(|x| *x < 0.0) {
            return Err(Error::domain(format!(
                "{name} pmf is not normalized (total {total})"
            )));
        }
    }
    let n = a.len().max(b.len());
    let (mut sum, mut max_abs) = (0.0, 0.0_f64);
    for j in 0..n {
        let gap = (a.get(j).unwrap_or(&0.0) - b.get(j).unwrap_or(&0.0)).abs();
        sum += gap;
        max_abs = max_abs.max(gap);
    }
    Ok(PmfDistance {
        tv_distance: 0.5 * sum,
        max_abs,
    })
}
