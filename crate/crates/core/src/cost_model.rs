//! Consequence functions and Monte Carlo simulation of total repair cost.
//!
//! A consequence function gives the unit repair cost for a damage state as a
//! function of the repair quantity: the maximum unit cost applies at or below
//! `q_min`, the minimum unit cost at or above `q_max`, linear in between.
//!
//! Realization `r` of a simulation draws from its own ChaCha stream
//! `(seed, r)`, so results do not depend on how realizations are scheduled
//! across threads.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::DamageState;

pub const DEFAULT_REALIZATIONS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    Lognormal,
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DamageStateCost {
    pub ds: DamageState,
    pub cost_at_min_qty: f64,
    pub cost_at_max_qty: f64,
    pub dispersion: f64,
    pub distribution: Distribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FragilityEntry {
    pub component_id: String,
    pub q_min: f64,
    pub q_max: f64,
    pub states: Vec<DamageStateCost>,
}

impl FragilityEntry {
    pub fn validate(&self) -> Result<()> {
        let id = &self.component_id;
        if !(self.q_min.is_finite() && self.q_max.is_finite() && self.q_min < self.q_max) {
            return Err(Error::data(format!(
                "{id}: q_min ({}) must be below q_max ({})",
                self.q_min, self.q_max
            )));
        }
        let mut seen = [false; 4];
        for s in &self.states {
            if std::mem::replace(&mut seen[s.ds.index()], true) {
                return Err(Error::data(format!("{id}: duplicate record for {}", s.ds)));
            }
            if !(s.cost_at_max_qty >= 0.0 && s.cost_at_min_qty >= s.cost_at_max_qty && s.cost_at_min_qty.is_finite()) {
                return Err(Error::data(format!(
                    "{id} {}: need cost_at_min_qty >= cost_at_max_qty >= 0, got {} and {}",
                    s.ds, s.cost_at_min_qty, s.cost_at_max_qty
                )));
            }
            if !(s.dispersion.is_finite() && s.dispersion >= 0.0) {
                return Err(Error::data(format!("{id} {}: dispersion must be >= 0", s.ds)));
            }
            if s.ds == DamageState::DS0 && (s.cost_at_min_qty != 0.0 || s.cost_at_max_qty != 0.0 || s.dispersion != 0.0)
            {
                return Err(Error::data(format!(
                    "{id}: DS0 must carry zero cost and zero dispersion"
                )));
            }
        }
        Ok(())
    }

    pub fn state(&self, ds: DamageState) -> Result<&DamageStateCost> {
        self.states
            .iter()
            .find(|s| s.ds == ds)
            .ok_or_else(|| Error::data(format!("{}: no consequence data for {ds}", self.component_id)))
    }
}

/// Consequence data for reinforced-concrete columns (component
/// B1041.031a). The repair-quantity thresholds are not part of the published
/// cost table; the caller supplies them.
pub fn rc_column_entry(q_min: f64, q_max: f64) -> FragilityEntry {
    let rec = |ds, lo, hi, beta| DamageStateCost {
        ds,
        cost_at_min_qty: lo,
        cost_at_max_qty: hi,
        dispersion: beta,
        distribution: Distribution::Lognormal,
    };
    FragilityEntry {
        component_id: "B1041.031a".into(),
        q_min,
        q_max,
        states: vec![
            rec(DamageState::DS0, 0.0, 0.0, 0.0),
            rec(DamageState::DS1, 25704.0, 20910.0, 0.39),
            rec(DamageState::DS2, 38978.0, 25986.0, 0.32),
            rec(DamageState::DS3, 47978.0, 31986.0, 0.3),
        ],
    }
}

/// Fragility entries keyed by component id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FragilityDatabase {
    pub entries: BTreeMap<String, FragilityEntry>,
}

impl FragilityDatabase {
    pub fn new(entries: impl IntoIterator<Item = FragilityEntry>) -> Result<Self> {
        let mut db = FragilityDatabase::default();
        for e in entries {
            e.validate()?;
            if db.entries.contains_key(&e.component_id) {
                return Err(Error::data(format!("duplicate fragility entry {}", e.component_id)));
            }
            db.entries.insert(e.component_id.clone(), e);
        }
        Ok(db)
    }

    pub fn get(&self, id: &str) -> Result<&FragilityEntry> {
        self.entries
            .get(id)
            .ok_or_else(|| Error::data(format!("fragility id {id:?} not found in database")))
    }
}

/// Central unit cost for `ds` at `quantity`.
pub fn unit_cost(entry: &FragilityEntry, ds: DamageState, quantity: f64) -> Result<f64> {
    if !(quantity.is_finite() && quantity > 0.0) {
        return Err(Error::input(format!("quantity must be > 0, got {quantity}")));
    }
    let s = entry.state(ds)?;
    Ok(if quantity <= entry.q_min {
        s.cost_at_min_qty
    } else if quantity >= entry.q_max {
        s.cost_at_max_qty
    } else {
        let f = (quantity - entry.q_min) / (entry.q_max - entry.q_min);
        s.cost_at_min_qty + f * (s.cost_at_max_qty - s.cost_at_min_qty)
    })
}

/// Draw one cost around `central`.
///
/// Lognormal treats `central` as the median and `dispersion` as the log
/// standard deviation. Normal uses mean `central` and standard deviation
/// `dispersion * central`, resampling negative draws.
pub fn sample_cost<R: Rng + ?Sized>(
    central: f64,
    dispersion: f64,
    distribution: Distribution,
    rng: &mut R,
) -> Result<f64> {
    if !(central.is_finite() && central >= 0.0) {
        return Err(Error::input(format!("central cost must be >= 0, got {central}")));
    }
    if !(dispersion.is_finite() && dispersion >= 0.0) {
        return Err(Error::input(format!("dispersion must be >= 0, got {dispersion}")));
    }
    if dispersion == 0.0 || central == 0.0 {
        return Ok(central);
    }
    Ok(match distribution {
        Distribution::Lognormal => {
            let z: f64 = rng.sample(StandardNormal);
            central * (dispersion * z).exp()
        }
        Distribution::Normal => loop {
            let z: f64 = rng.sample(StandardNormal);
            let v = central * (1.0 + dispersion * z);
            if v >= 0.0 {
                break v;
            }
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceGroup {
    pub fragility_id: String,
    /// Repair quantity used to read the consequence function.
    pub quantity: f64,
    pub component_states: Vec<DamageState>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationOptions {
    pub realizations: usize,
    pub seed: u64,
    /// Read tabulated costs as lognormal means rather than medians.
    pub costs_are_means: bool,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        SimulationOptions {
            realizations: DEFAULT_REALIZATIONS,
            seed: 0,
            costs_are_means: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossCurve {
    /// Ascending.
    pub realizations: Vec<f64>,
    /// `exp(mean(ln x))`; `None` unless every realization is positive.
    pub fitted_median: Option<f64>,
    /// Sample standard deviation of `ln x`.
    pub fitted_dispersion: Option<f64>,
    pub seed: u64,
}

impl LossCurve {
    pub fn from_realizations(mut realizations: Vec<f64>, seed: u64) -> Self {
        realizations.sort_by(f64::total_cmp);
        let (fitted_median, fitted_dispersion) = fit_lognormal(&realizations).unzip();
        LossCurve {
            realizations,
            fitted_median,
            fitted_dispersion,
            seed,
        }
    }

    /// `(cost, cumulative probability)` with probability `(i + 1) / n`.
    pub fn cdf(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let n = self.realizations.len() as f64;
        self.realizations
            .iter()
            .enumerate()
            .map(move |(i, &c)| (c, (i + 1) as f64 / n))
    }

    /// Non-exceedance probability of `cost` under the fitted lognormal.
    pub fn fitted_cdf(&self, cost: f64) -> Option<f64> {
        let (m, b) = (self.fitted_median?, self.fitted_dispersion?);
        if cost <= 0.0 {
            return Some(0.0);
        }
        if b == 0.0 {
            return Some(if cost >= m { 1.0 } else { 0.0 });
        }
        Some(standard_normal_cdf((cost / m).ln() / b))
    }
}

fn fit_lognormal(sorted: &[f64]) -> Option<(f64, f64)> {
    if sorted.is_empty() || sorted[0] <= 0.0 {
        return None;
    }
    if sorted[0] == sorted[sorted.len() - 1] {
        return Some((sorted[0], 0.0));
    }
    let logs: Vec<f64> = sorted.iter().map(|x| x.ln()).collect();
    let n = logs.len() as f64;
    let mean = logs.iter().sum::<f64>() / n;
    let var = if logs.len() > 1 {
        logs.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Some((mean.exp(), var.sqrt()))
}

/// Abramowitz–Stegun 7.1.26 erf, good to ~1e-7.
fn standard_normal_cdf(z: f64) -> f64 {
    let x = z.abs() / std::f64::consts::SQRT_2;
    let t = 1.0 / (1.0 + 0.327_591_1 * x);
    let poly =
        t * (0.254_829_592 + t * (-0.284_496_736 + t * (1.421_413_741 + t * (-1.453_152_027 + t * 1.061_405_429))));
    let erf = 1.0 - poly * (-x * x).exp();
    if z >= 0.0 {
        0.5 * (1.0 + erf)
    } else {
        0.5 * (1.0 - erf)
    }
}

/// Random stream for realization `r`.
pub fn realization_rng(seed: u64, r: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r);
    rng
}

struct Draw {
    central: f64,
    dispersion: f64,
    distribution: Distribution,
}

/// Simulate the building's total repair cost. With `replacement` set (the
/// building collapsed) every realization is the replacement cost.
pub fn simulate_total(
    groups: &[PerformanceGroup],
    db: &FragilityDatabase,
    options: &SimulationOptions,
    replacement: Option<f64>,
) -> Result<LossCurve> {
    if options.realizations == 0 {
        return Err(Error::input("at least one realization is required"));
    }
    if let Some(cost) = replacement {
        if !(cost.is_finite() && cost >= 0.0) {
            return Err(Error::input(format!("replacement cost must be >= 0, got {cost}")));
        }
        return Ok(LossCurve::from_realizations(
            vec![cost; options.realizations],
            options.seed,
        ));
    }

    let mut draws = Vec::new();
    for g in groups {
        let entry = db.get(&g.fragility_id)?;
        for &ds in &g.component_states {
            let s = entry.state(ds)?;
            let mut central = unit_cost(entry, ds, g.quantity)?;
            if options.costs_are_means && s.distribution == Distribution::Lognormal {
                central /= (s.dispersion * s.dispersion / 2.0).exp();
            }
            draws.push(Draw {
                central,
                dispersion: s.dispersion,
                distribution: s.distribution,
            });
        }
    }

    let realizations = (0..options.realizations as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = realization_rng(options.seed, r);
            draws.iter().try_fold(0.0, |acc, d| {
                sample_cost(d.central, d.dispersion, d.distribution, &mut rng).map(|c| acc + c)
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(LossCurve::from_realizations(realizations, options.seed))
}

/// Empirical quantile, linear between order statistics at rank `(n-1)p`.
pub fn quantile(curve: &LossCurve, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::input(format!("quantile level must lie in (0,1), got {p}")));
    }
    let xs = &curve.realizations;
    if xs.is_empty() {
        return Err(Error::input("quantile of an empty loss curve"));
    }
    let h = (xs.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(xs.len() - 1);
    Ok(xs[lo] + (h - lo as f64) * (xs[hi] - xs[lo]))
}
