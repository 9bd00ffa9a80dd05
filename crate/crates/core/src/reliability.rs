//! Time-varying reliability indices and the end-to-end evaluation pipeline:
//! population, reserve distribution, multi-state reserve, per-state OPF, indices.

use std::collections::HashMap;
use std::sync::RwLock;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{aggregate_power, build_timeline, MigrationTimeline};
use crate::error::{Error, Result};
use crate::grid::{enumerate_system_states, Network, OpfSolver, EPS_LC};
use crate::multistate::{
    compose_all, discretize_reserve_states, ort_lz, ort_state_probabilities, ConventionalReserve,
    Lz, StateGrid, UnitModel,
};
use crate::population::{
    choose_cluster_count, cluster_by_cycle_times, sample_population, Cluster, Device,
    PopulationSpec,
};
use crate::stochastic::{PowerDistribution, StochasticModel, UncertaintySpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterPolicy {
    Fixed(usize),
    /// Pick Q in [2, q_max] by the Calinski-Harabasz index.
    Auto {
        q_max: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// No operating reserve of any kind.
    #[serde(rename = "woor")]
    WoOR,
    /// TCL reserve only.
    Ort,
    /// TCL reserve plus the conventional reserve commitments.
    Hybrid,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::WoOR => "woor",
            Variant::Ort => "ort",
            Variant::Hybrid => "hybrid",
        }
    }

    fn uses_ort(self) -> bool {
        !matches!(self, Variant::WoOR)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub name: String,
    /// Bus index (not id).
    pub bus: usize,
    pub model: UnitModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReserveUnit {
    pub name: String,
    pub bus: usize,
    pub unit: ConventionalReserve,
}

/// Pruning limits for the state enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    #[serde(default = "default_floor")]
    pub prob_floor: f64,
    #[serde(default = "default_cap")]
    pub state_cap: usize,
    #[serde(default = "default_bus_states")]
    pub bus_max_states: usize,
}

fn default_floor() -> f64 {
    1e-9
}

fn default_cap() -> usize {
    200_000
}

fn default_bus_states() -> usize {
    5000
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            prob_floor: default_floor(),
            state_cap: default_cap(),
            bus_max_states: default_bus_states(),
        }
    }
}

/// Settings of the Monte Carlo reliability oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McSettings {
    /// Devices simulated per replication; the pool is scaled to the fleet.
    #[serde(default = "default_mc_devices")]
    pub devices: usize,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_mc_dt")]
    pub dt_s: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_mc_devices() -> usize {
    5000
}

fn default_replications() -> usize {
    200
}

fn default_mc_dt() -> f64 {
    10.0
}

fn default_samples() -> usize {
    100_000
}

impl Default for McSettings {
    fn default() -> Self {
        Self {
            devices: default_mc_devices(),
            replications: default_replications(),
            dt_s: default_mc_dt(),
            samples: default_samples(),
            seed: 0,
        }
    }
}

/// Fully resolved scenario; all times in hours.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub population: PopulationSpec,
    pub clusters: ClusterPolicy,
    pub cluster_seed: u64,
    pub ambient: f64,
    pub t_s: f64,
    pub beta: f64,
    pub uncertainty: UncertaintySpec,
    /// Probability that deployed TCL reserve fails to respond.
    pub standby_failure: f64,
    /// Share of the TCL reserve located at each bus index.
    pub tcl_shares: Vec<f64>,
    pub generators: Vec<Generator>,
    pub reserves: Vec<ReserveUnit>,
    pub network: Network,
    pub horizon_h: f64,
    pub dt_h: f64,
    pub solver: SolverSettings,
    pub mc: McSettings,
    /// Times at which the full ORT state table is written out.
    pub snapshots_h: Vec<f64>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.dt_h > 0.0) {
            return bad(format!("time step must be positive, got {} h", self.dt_h));
        }
        if !(self.horizon_h > self.t_s) || !(self.t_s >= 0.0) {
            return bad(format!(
                "horizon {} h must exceed the deployment time {} h",
                self.horizon_h, self.t_s
            ));
        }
        let steps = self.horizon_h / self.dt_h;
        if (steps - steps.round()).abs() > 1e-6 {
            return bad(format!(
                "horizon {} h is not a multiple of the step {} h",
                self.horizon_h, self.dt_h
            ));
        }
        if !(self.beta > 0.0) {
            return bad(format!(
                "setpoint shift must be positive, got {}",
                self.beta
            ));
        }
        if !(0.0..=1.0).contains(&self.standby_failure) {
            return bad(format!(
                "standby failure probability {} outside [0, 1]",
                self.standby_failure
            ));
        }
        let n = self.network.bus_count();
        if self.tcl_shares.len() != n || self.tcl_shares.iter().any(|s| !(*s >= 0.0)) {
            return bad("TCL shares must be nonnegative, one per bus".into());
        }
        let total: f64 = self.tcl_shares.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return bad(format!("TCL shares sum to {total}"));
        }
        for g in &self.generators {
            if g.bus >= n {
                return bad(format!("generator {} sits on an unknown bus", g.name));
            }
            g.model
                .validate()
                .map_err(|e| Error::Config(format!("generator {}: {e}", g.name)))?;
        }
        for r in &self.reserves {
            if r.bus >= n || !(r.unit.capacity_mw >= 0.0) || !(r.unit.lead_h >= 0.0) {
                return bad(format!("reserve unit {} is invalid", r.name));
            }
        }
        self.uncertainty
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        self.population
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if let ClusterPolicy::Fixed(0) = self.clusters {
            return bad("cluster count must be positive".into());
        }
        Ok(())
    }

    pub fn step_count(&self) -> usize {
        (self.horizon_h / self.dt_h).round() as usize
    }

    /// Evaluation grid, both ends included.
    pub fn times(&self) -> Vec<f64> {
        (0..=self.step_count())
            .map(|k| k as f64 * self.dt_h)
            .collect()
    }
}

/// Per-time reliability indices. Inner vectors run over the time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSeries {
    pub times_h: Vec<f64>,
    pub bus_ids: Vec<usize>,
    pub lolp: Vec<Vec<f64>>,
    pub lolp_system: Vec<f64>,
    /// Expected curtailment (MW).
    pub expected_lc: Vec<Vec<f64>>,
    pub expected_lc_system: Vec<f64>,
    /// Cumulative, MWh.
    pub eens: Vec<Vec<f64>>,
    pub eens_system: Vec<f64>,
    /// Cumulative, hours.
    pub lole: Vec<Vec<f64>>,
    pub lole_system: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standard_errors: Option<StandardErrors>,
}

/// Sampling errors of the Monte Carlo indices (system level).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardErrors {
    pub lolp_system: Vec<f64>,
    pub expected_lc_system: Vec<f64>,
    pub eens_system: Vec<f64>,
    pub lole_system: Vec<f64>,
}

impl IndexSeries {
    /// Assemble from per-time LOLP and expected curtailment traces.
    pub fn from_traces(
        times_h: Vec<f64>,
        bus_ids: Vec<usize>,
        lolp: Vec<Vec<f64>>,
        lolp_system: Vec<f64>,
        expected_lc: Vec<Vec<f64>>,
        expected_lc_system: Vec<f64>,
        dt: f64,
    ) -> Self {
        Self {
            eens: expected_lc.iter().map(|tr| cumulative(tr, dt)).collect(),
            eens_system: cumulative(&expected_lc_system, dt),
            lole: lolp.iter().map(|tr| cumulative(tr, dt)).collect(),
            lole_system: cumulative(&lolp_system, dt),
            times_h,
            bus_ids,
            lolp,
            lolp_system,
            expected_lc,
            expected_lc_system,
            standard_errors: None,
        }
    }

    pub fn final_eens(&self) -> f64 {
        *self.eens_system.last().unwrap_or(&0.0)
    }

    pub fn final_lole(&self) -> f64 {
        *self.lole_system.last().unwrap_or(&0.0)
    }

    pub fn bus_position(&self, id: usize) -> Option<usize> {
        self.bus_ids.iter().position(|b| *b == id)
    }
}

/// One joint state after the OPF: probability and curtailment per bus.
#[derive(Debug, Clone, PartialEq)]
pub struct SolvedState {
    pub probability: f64,
    pub curtailment: Vec<f64>,
}

impl SolvedState {
    fn lc(&self, bus: Option<usize>) -> f64 {
        match bus {
            Some(i) => self.curtailment[i],
            None => self.curtailment.iter().sum(),
        }
    }
}

/// Probability that curtailment at `bus` (or anywhere, for `None`) exceeds `EPS_LC`.
pub fn lolp_at(states: &[SolvedState], bus: Option<usize>) -> f64 {
    states
        .iter()
        .filter(|s| s.lc(bus) > EPS_LC)
        .map(|s| s.probability)
        .sum::<f64>()
        .clamp(0.0, 1.0)
        + 0.0
}

pub fn expected_curtailment(states: &[SolvedState], bus: Option<usize>) -> f64 {
    // `+ 0.0` turns the empty sum's -0.0 into 0.0
    states
        .iter()
        .map(|s| s.probability * s.lc(bus))
        .sum::<f64>()
        + 0.0
}

/// Left-rectangle running integral; entry k covers `[0, k·dt]`.
pub fn cumulative(trace: &[f64], dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(trace.len());
    let mut acc = 0.0;
    for (k, v) in trace.iter().enumerate() {
        out.push(acc);
        if k + 1 < trace.len() {
            acc += v * dt;
        }
    }
    out
}

fn integrate_to(trace: &[f64], dt: f64, tau: f64) -> Result<f64> {
    if trace.is_empty() {
        return Err(Error::InvalidArgument("empty trace".into()));
    }
    let horizon = (trace.len() - 1) as f64 * dt;
    if !(tau >= 0.0) || tau > horizon * (1.0 + 1e-12) + 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "tau {tau} h outside [0, {horizon}] h"
        )));
    }
    let whole = ((tau / dt) + 1e-9).floor() as usize;
    let whole = whole.min(trace.len() - 1);
    let mut acc: f64 = trace[..whole].iter().map(|v| v * dt).sum();
    let rest = tau - whole as f64 * dt;
    if rest > 1e-12 {
        acc += trace[whole] * rest;
    }
    Ok(acc)
}

/// Expected energy not supplied (MWh) up to `tau` hours from an expected-curtailment trace.
pub fn eens(expected_lc: &[f64], dt: f64, tau: f64) -> Result<f64> {
    integrate_to(expected_lc, dt, tau)
}

/// Loss of load expectation (hours) up to `tau` from a LOLP trace.
pub fn lole(lolp: &[f64], dt: f64, tau: f64) -> Result<f64> {
    integrate_to(lolp, dt, tau)
}

/// Sampled fleet, its clusters and one migration timeline per cluster.
#[derive(Debug, Clone)]
pub struct ClusteredFleet {
    pub devices: Vec<Device>,
    pub clusters: Vec<Cluster>,
    pub timelines: Vec<MigrationTimeline>,
}

impl ClusteredFleet {
    pub fn build(s: &Scenario) -> Result<Self> {
        let devices = sample_population(&s.population).map_err(|e| e.at_stage("population"))?;
        let q = match s.clusters {
            ClusterPolicy::Fixed(q) => q.min(devices.len()),
            ClusterPolicy::Auto { q_max } => {
                choose_cluster_count(&devices, s.ambient, q_max, s.cluster_seed)
                    .map_err(|e| e.at_stage("clustering"))?
            }
        };
        let clusters = cluster_by_cycle_times(&devices, s.ambient, q, s.cluster_seed)
            .map_err(|e| e.at_stage("clustering"))?;
        let timelines = clusters
            .iter()
            .map(|c| build_timeline(c, s.beta, s.ambient, s.t_s))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.at_stage("dynamics"))?;
        Ok(Self {
            devices,
            clusters,
            timelines,
        })
    }

    /// Deterministic aggregate power (MW) at `t` hours.
    pub fn power(&self, t: f64) -> Result<f64> {
        aggregate_power(&self.clusters, &self.timelines, t)
    }
}

/// Reserve model of the fleet evaluated on the scenario grid.
#[derive(Debug, Clone)]
pub struct FleetReserve {
    pub devices: Vec<Device>,
    pub clusters: Vec<Cluster>,
    pub cluster_count: usize,
    pub times_h: Vec<f64>,
    pub distributions: Vec<PowerDistribution>,
    /// Mean power at t = 0, the reserve reference (MW).
    pub p0: f64,
    pub mean_reserve: Vec<f64>,
    pub max_rc: f64,
    pub grid: StateGrid,
    /// ORT state probabilities per time, before deployment masking.
    pub state_probabilities: Vec<Vec<f64>>,
}

impl FleetReserve {
    pub fn build(s: &Scenario) -> Result<Self> {
        let ClusteredFleet {
            devices,
            clusters,
            timelines,
        } = ClusteredFleet::build(s)?;
        let q = clusters.len();
        let model = StochasticModel::new(&clusters, &timelines, s.uncertainty.clone())
            .map_err(|e| e.at_stage("distribution"))?;
        let times_h = s.times();
        let distributions: Vec<PowerDistribution> =
            times_h.par_iter().map(|&t| model.distribution(t)).collect();
        let p0 = distributions[0].mean;
        let mean_reserve: Vec<f64> = distributions
            .iter()
            .map(|d| (p0 - d.mean).max(0.0))
            .collect();
        let max_rc = mean_reserve.iter().copied().fold(0.0, f64::max);
        let sigma_at = |level: f64| {
            let k = (0..mean_reserve.len())
                .min_by(|&a, &b| {
                    (mean_reserve[a] - level)
                        .abs()
                        .total_cmp(&(mean_reserve[b] - level).abs())
                        .then(a.cmp(&b))
                })
                .expect("nonempty grid");
            distributions[k].std_dev()
        };
        let grid =
            discretize_reserve_states(max_rc, sigma_at).map_err(|e| e.at_stage("multistate"))?;
        let state_probabilities = distributions
            .par_iter()
            .map(|d| ort_state_probabilities(&grid, p0, |x| d.cdf(x)))
            .collect();
        Ok(Self {
            devices,
            clusters,
            cluster_count: q,
            times_h,
            distributions,
            p0,
            mean_reserve,
            max_rc,
            grid,
            state_probabilities,
        })
    }

    /// ORT polynomial at grid index `k`.
    pub fn ort_lz(&self, k: usize, t_s: f64, standby_failure: f64) -> Lz {
        let deployed = self.times_h[k] >= t_s - 1e-12;
        ort_lz(
            &self.grid,
            &self.state_probabilities[k],
            deployed,
            standby_failure,
        )
    }
}

type CacheKey = (usize, usize, Vec<u64>);

/// Memoized minimum-curtailment solves keyed by exact inputs.
pub struct CurtailmentCache {
    map: RwLock<HashMap<CacheKey, Vec<f64>>>,
}

impl Default for CurtailmentCache {
    fn default() -> Self {
        Self {
            map: RwLock::new(HashMap::new()),
        }
    }
}

impl CurtailmentCache {
    pub fn len(&self) -> usize {
        self.map.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Shared machinery for the analytical and Monte Carlo evaluations.
pub struct Evaluator {
    pub scenario: Scenario,
    pub fleet: FleetReserve,
    pub solver: OpfSolver,
    /// Distinct load vectors and the profile index of every grid time.
    loads: Vec<Vec<f64>>,
    load_profile: Vec<usize>,
    cache: CurtailmentCache,
    pub timings: Vec<(String, f64)>,
}

/// Output of one analytical evaluation.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub variant: Variant,
    pub indices: IndexSeries,
    /// Joint states solved per time (after pruning).
    pub state_counts: Vec<usize>,
    pub seconds: f64,
}

impl Evaluator {
    pub fn new(scenario: Scenario) -> Result<Self> {
        scenario.validate()?;
        let start = Instant::now();
        let fleet = FleetReserve::build(&scenario)?;
        let fleet_s = start.elapsed().as_secs_f64();
        let start = Instant::now();
        let solver = OpfSolver::new(scenario.network.clone()).map_err(|e| e.at_stage("network"))?;
        let mut loads: Vec<Vec<f64>> = Vec::new();
        let mut load_profile = Vec::new();
        for &t in &fleet.times_h {
            let l = scenario.network.loads_at(t);
            let id = match loads.iter().position(|x| *x == l) {
                Some(i) => i,
                None => {
                    loads.push(l);
                    loads.len() - 1
                }
            };
            load_profile.push(id);
        }
        let timings = vec![
            ("fleet".to_string(), fleet_s),
            ("network".to_string(), start.elapsed().as_secs_f64()),
        ];
        Ok(Self {
            scenario,
            fleet,
            solver,
            loads,
            load_profile,
            cache: CurtailmentCache::default(),
            timings,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.fleet.times_h
    }

    pub fn cache_size(&self) -> usize {
        self.cache.len()
    }

    pub fn loads_at_index(&self, k: usize) -> &[f64] {
        &self.loads[self.load_profile[k]]
    }

    /// Per-bus curtailment for available generation `ag` at grid index `k`.
    pub fn curtailment(&self, ag: &[f64], k: usize, network_state: usize) -> Result<Vec<f64>> {
        let profile = self.load_profile[k];
        let key = (
            profile,
            network_state,
            ag.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        );
        if let Some(v) = self.cache.map.read().expect("cache lock").get(&key) {
            return Ok(v.clone());
        }
        let c = self
            .solver
            .min_total_curtailment(ag, &self.loads[profile], network_state)
            .map_err(|e| e.at_stage("opf"))?;
        self.cache
            .map
            .write()
            .expect("cache lock")
            .insert(key, c.per_bus.clone());
        Ok(c.per_bus)
    }

    /// Generation (and committed reserve) polynomial of every bus at time `t`.
    pub fn bus_polys(&self, t: f64, variant: Variant) -> Result<Vec<Lz>> {
        let s = &self.scenario;
        let n = s.network.bus_count();
        let mut per_bus: Vec<Vec<Lz>> = vec![Vec::new(); n];
        for g in &s.generators {
            per_bus[g.bus].push(g.model.lz_at(t)?);
        }
        if variant == Variant::Hybrid {
            for r in &s.reserves {
                per_bus[r.bus].push(r.unit.lz_at(t)?);
            }
        }
        Ok(per_bus
            .iter()
            .map(|polys| compose_all(polys, s.solver.prob_floor, s.solver.bus_max_states))
            .collect())
    }

    fn ort_at(&self, k: usize, variant: Variant) -> Lz {
        if variant.uses_ort() {
            self.fleet
                .ort_lz(k, self.scenario.t_s, self.scenario.standby_failure)
        } else {
            Lz::unit()
        }
    }

    /// All joint states at grid index `k` with their curtailments.
    pub fn solve_time(&self, k: usize, variant: Variant) -> Result<Vec<SolvedState>> {
        let s = &self.scenario;
        let t = self.fleet.times_h[k];
        let polys = self
            .bus_polys(t, variant)
            .map_err(|e| e.at_stage("multistate"))?;
        let base =
            enumerate_system_states(&polys, &s.network, s.solver.prob_floor, s.solver.state_cap)
                .map_err(|e| e.at_stage("states"))?;
        let ort = self.ort_at(k, variant);
        let mut out = Vec::with_capacity(base.len());
        let n = s.network.bus_count();
        for state in &base {
            let lc0 = self.curtailment(&state.ag, k, state.network_state)?;
            if lc0.iter().sum::<f64>() <= EPS_LC {
                out.push(SolvedState {
                    probability: state.probability,
                    curtailment: lc0,
                });
                continue;
            }
            // curtailment is nonincreasing in added capacity, so once it vanishes
            // every larger reserve level is curtailment-free as well
            let mut relieved = false;
            for (rc, q) in ort.iter() {
                let p = state.probability * q;
                if relieved || rc == 0.0 {
                    let lc = if relieved { vec![0.0; n] } else { lc0.clone() };
                    out.push(SolvedState {
                        probability: p,
                        curtailment: lc,
                    });
                    continue;
                }
                let ag: Vec<f64> = state
                    .ag
                    .iter()
                    .zip(&s.tcl_shares)
                    .map(|(a, sh)| a + sh * rc)
                    .collect();
                let lc = self.curtailment(&ag, k, state.network_state)?;
                relieved = lc.iter().sum::<f64>() <= EPS_LC;
                out.push(SolvedState {
                    probability: p,
                    curtailment: lc,
                });
            }
        }
        Ok(out)
    }

    /// Analytical indices for one variant.
    pub fn evaluate(&self, variant: Variant) -> Result<Evaluation> {
        let start = Instant::now();
        let n = self.scenario.network.bus_count();
        // per time: bus LOLP, system LOLP, bus expected LC, system expected LC, state count
        type PerTime = (Vec<f64>, f64, Vec<f64>, f64, usize);
        let per_time: Vec<PerTime> = (0..self.fleet.times_h.len())
            .into_par_iter()
            .map(|k| {
                let states = self.solve_time(k, variant)?;
                let lolp: Vec<f64> = (0..n).map(|i| lolp_at(&states, Some(i))).collect();
                let elc: Vec<f64> = (0..n)
                    .map(|i| expected_curtailment(&states, Some(i)))
                    .collect();
                Ok((
                    lolp,
                    lolp_at(&states, None),
                    elc,
                    expected_curtailment(&states, None),
                    states.len(),
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let times = self.fleet.times_h.clone();
        let mut lolp = vec![Vec::with_capacity(times.len()); n];
        let mut elc = vec![Vec::with_capacity(times.len()); n];
        let (mut lolp_sys, mut elc_sys, mut counts) = (Vec::new(), Vec::new(), Vec::new());
        for (l, ls, e, es, c) in per_time {
            for i in 0..n {
                lolp[i].push(l[i]);
                elc[i].push(e[i]);
            }
            lolp_sys.push(ls);
            elc_sys.push(es);
            counts.push(c);
        }
        let indices = IndexSeries::from_traces(
            times,
            self.scenario.network.bus_ids(),
            lolp,
            lolp_sys,
            elc,
            elc_sys,
            self.scenario.dt_h,
        );
        Ok(Evaluation {
            variant,
            indices,
            state_counts: counts,
            seconds: start.elapsed().as_secs_f64(),
        })
    }
}

/// Build the evaluator and run one variant.
pub fn evaluate_scenario(scenario: Scenario, variant: Variant) -> Result<(Evaluator, Evaluation)> {
    let ev = Evaluator::new(scenario)?;
    let out = ev.evaluate(variant)?;
    Ok((ev, out))
}

/// Two buses, two 60 MW units and a small fleet on the load bus.
#[cfg(test)]
pub(crate) fn tiny_scenario(load: f64, unit_mttf: Option<f64>) -> Scenario {
    use crate::grid::{BusSpec, LineSpec, NetworkSpec};
    use crate::population::ParamDist;
    let network = Network::new(NetworkSpec {
        buses: vec![
            BusSpec {
                id: 1,
                load_mw: 0.0,
                load_trace: None,
            },
            BusSpec {
                id: 2,
                load_mw: load,
                load_trace: None,
            },
        ],
        lines: vec![LineSpec {
            from: 1,
            to: 2,
            x_pu: 0.1,
            limit_mw: 500.0,
        }],
        reference_bus: 1,
        network_states: vec![],
    })
    .unwrap();
    let model = match unit_mttf {
        Some(mttf) => UnitModel::TwoState {
            capacity_mw: 60.0,
            lambda: 1.0 / mttf,
            mu: 0.02,
            initially_up: true,
        },
        None => UnitModel::Table {
            states: vec![(60.0, 1.0)],
        },
    };
    let mut population = PopulationSpec::table1(2000, 4);
    population.setpoint = ParamDist::Uniform(20.0, 26.0);
    Scenario {
        name: "tiny".into(),
        population,
        clusters: ClusterPolicy::Fixed(4),
        cluster_seed: 1,
        ambient: 32.0,
        t_s: 0.5,
        beta: 1.0,
        uncertainty: UncertaintySpec::default(),
        standby_failure: 0.0,
        tcl_shares: vec![0.0, 1.0],
        generators: vec![
            Generator {
                name: "g1".into(),
                bus: 0,
                model: model.clone(),
            },
            Generator {
                name: "g2".into(),
                bus: 0,
                model,
            },
        ],
        reserves: vec![],
        network,
        horizon_h: 2.0,
        dt_h: 1.0 / 12.0,
        solver: SolverSettings::default(),
        mc: McSettings::default(),
        snapshots_h: vec![],
    }
}
