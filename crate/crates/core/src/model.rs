//! Network instances, their normalized parameters, and regime selection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Filaments sharing one dissociation constant (detach rate over attach rate).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilamentClass {
    pub kappa: f64,
    pub count: u64,
}

/// A closed network: `m` monomers and filament classes sorted by strictly
/// increasing dissociation constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel {
    m: u64,
    classes: Vec<FilamentClass>,
}

impl NetworkModel {
    /// Builds a model from `(kappa, count)` pairs in any order. Pairs with
    /// equal `kappa` are merged into one class.
    ///
    /// `m = 0` is accepted: the only state is the empty one.
    pub fn new(m: u64, class_specs: &[(f64, u64)]) -> Result<Self> {
        if class_specs.is_empty() {
            return Err(Error::validation("at least one filament class is required"));
        }
        for &(kappa, count) in class_specs {
            if !(kappa.is_finite() && kappa > 0.0) {
                return Err(Error::validation(format!(
                    "dissociation constant must be positive and finite, got {kappa}"
                )));
            }
            if count == 0 {
                return Err(Error::validation(format!(
                    "class with kappa {kappa} has zero filaments"
                )));
            }
        }
        let mut sorted: Vec<(f64, u64)> = class_specs.to_vec();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut classes: Vec<FilamentClass> = Vec::with_capacity(sorted.len());
        for (kappa, count) in sorted {
            match classes.last_mut() {
                Some(last) if last.kappa == kappa => last.count += count,
                _ => classes.push(FilamentClass { kappa, count }),
            }
        }
        Ok(Self { m, classes })
    }

    /// Monomer total.
    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn classes(&self) -> &[FilamentClass] {
        &self.classes
    }

    /// Number of classes `K`.
    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    /// Total filament count `f`.
    pub fn num_filaments(&self) -> u64 {
        self.classes.iter().map(|c| c.count).sum()
    }

    /// Smallest dissociation constant.
    pub fn kappa1(&self) -> f64 {
        self.classes[0].kappa
    }

    /// Number of bottleneck filaments `f1`.
    pub fn f1(&self) -> u64 {
        self.classes[0].count
    }

    /// `kappa1 / kappa_i` for class `i`.
    pub fn varrho(&self, class_index: usize) -> f64 {
        self.kappa1() / self.classes[class_index].kappa
    }

    /// Finite-`m` mean of the representation sum: the Poisson mean `kappa1`
    /// plus the means of the geometric variables of every non-bottleneck
    /// filament.
    pub fn representation_mean(&self) -> f64 {
        let geo: f64 = (1..self.classes.len())
            .map(|i| {
                let r = self.varrho(i);
                self.classes[i].count as f64 * r / (1.0 - r)
            })
            .sum();
        self.kappa1() + geo
    }

    /// Normalized parameters of this instance.
    pub fn scale(&self) -> ScaledParams {
        let m = self.m.max(1) as f64;
        let kbar1 = self.kappa1() / m;
        let fbar = self.classes.iter().map(|c| c.count as f64 / m).collect();
        let varrho = (0..self.classes.len())
            .map(|i| if i == 0 { 1.0 } else { self.varrho(i) })
            .collect();
        ScaledParams::from_parts(kbar1, fbar, varrho)
    }

    /// Regime suggested by the finite-`m` thresholds.
    pub fn classify(&self, thresholds: &RegimeThresholds) -> Regime {
        classify_regime(&self.scale(), self.f1(), thresholds)
    }
}

/// Per-monomer quantities that drive the limit laws.
///
/// `varrho[0]` is exactly one; the remaining entries are strictly
/// decreasing and below one. `sbar` is the per-monomer mean of the
/// geometric part of the representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledParams {
    pub kbar1: f64,
    pub fbar: Vec<f64>,
    pub varrho: Vec<f64>,
    pub sbar: f64,
}

impl ScaledParams {
    /// Validates limit parameters supplied directly rather than derived from a
    /// finite model (for instance `kbar1 = 0`).
    pub fn new(kbar1: f64, fbar: Vec<f64>, varrho: Vec<f64>) -> Result<Self> {
        if !(kbar1.is_finite() && kbar1 >= 0.0) {
            return Err(Error::validation(format!(
                "kbar1 must be nonnegative, got {kbar1}"
            )));
        }
        if fbar.is_empty() || fbar.len() != varrho.len() {
            return Err(Error::validation(
                "fbar and varrho must be nonempty and of equal length",
            ));
        }
        if fbar.iter().any(|f| !(f.is_finite() && *f >= 0.0)) {
            return Err(Error::validation("fbar entries must be nonnegative"));
        }
        if varrho[0] != 1.0 {
            return Err(Error::validation("varrho[0] must equal 1"));
        }
        for w in varrho.windows(2) {
            if !(w[1] < w[0] && w[1] > 0.0) {
                return Err(Error::validation(
                    "varrho must be strictly decreasing in (0, 1]",
                ));
            }
        }
        Ok(Self::from_parts(kbar1, fbar, varrho))
    }

    fn from_parts(kbar1: f64, fbar: Vec<f64>, varrho: Vec<f64>) -> Self {
        let sbar = fbar
            .iter()
            .zip(&varrho)
            .skip(1)
            .map(|(f, r)| f * r / (1.0 - r))
            .sum();
        Self {
            kbar1,
            fbar,
            varrho,
            sbar,
        }
    }

    /// `kbar1 + sbar`, the per-monomer mean of the representation sum.
    pub fn mean(&self) -> f64 {
        self.kbar1 + self.sbar
    }

    pub fn fbar1(&self) -> f64 {
        self.fbar[0]
    }
}

/// Which limit law to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// Bottleneck count proportional to `m`.
    LinearBottleneck,
    /// Few bottlenecks and fewer monomers than the representation mean.
    SublinearOverloaded,
    /// Many (but sub-linearly many) bottlenecks and surplus monomers.
    SublinearUnderloaded,
    /// No limit law is trustworthy; use the exact engine.
    Exact,
}

/// Finite-`m` cutoffs used when the regime is chosen automatically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegimeThresholds {
    /// Minimum `f1 / m` treated as linear.
    pub linear_fraction: f64,
    /// Minimum `f1` for the underloaded scaled-exponential law.
    pub underloaded_count: u64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        Self {
            linear_fraction: 0.05,
            underloaded_count: 10,
        }
    }
}

/// Picks a regime from the normalized parameters and the bottleneck count.
///
/// The boundary `kbar1 + sbar = 1` is critical and always maps to
/// [`Regime::Exact`] unless the linear rule fires first.
pub fn classify_regime(params: &ScaledParams, f1: u64, thresholds: &RegimeThresholds) -> Regime {
    let mean = params.mean();
    if params.fbar1() >= thresholds.linear_fraction {
        Regime::LinearBottleneck
    } else if mean > 1.0 {
        Regime::SublinearOverloaded
    } else if mean < 1.0 && f1 >= thresholds.underloaded_count {
        Regime::SublinearUnderloaded
    } else {
        Regime::Exact
    }
}
