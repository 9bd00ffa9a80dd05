//! Monte Carlo ground truth: device-by-device fleet simulation and empirical
//! distributions.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{duty_at, MigrationTimeline};
use crate::error::{Error, Result};
use crate::grid::EPS_LC;
use crate::multistate::Lz;
use crate::population::{Cluster, Device};
use crate::reliability::{cumulative, Evaluator, IndexSeries, StandardErrors, Variant};
use crate::stochastic::{StochasticModel, UncertaintySpec};
use crate::thermal::{steady_cycle_times, HysteresisBand};

/// Devices per parallel work item; fixed so the summation order never changes.
const CHUNK: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetConfig {
    pub ambient: f64,
    /// Common shift added to every setpoint (°C).
    #[serde(default)]
    pub setpoint_shift: f64,
    pub t_s: f64,
    pub beta: f64,
    pub dt_s: f64,
    pub horizon_h: f64,
    /// Spacing of the recorded power samples (hours).
    pub record_every_h: f64,
    pub seed: u64,
}

impl FleetConfig {
    fn validate(&self) -> Result<()> {
        if !(self.dt_s > 0.0 && self.dt_s <= 10.0) {
            return Err(Error::InvalidArgument(format!(
                "dt must be in (0, 10] s, got {}",
                self.dt_s
            )));
        }
        if !(self.horizon_h > 0.0) || !(self.record_every_h > 0.0) || !(self.beta >= 0.0) {
            return Err(Error::InvalidArgument(
                "horizon, record spacing and shift must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetTrace {
    pub times_h: Vec<f64>,
    pub power_mw: Vec<f64>,
    /// Power per group when groups were given.
    pub group_power_mw: Vec<Vec<f64>>,
    pub excluded: usize,
    pub seed: u64,
}

struct Sim {
    theta: f64,
    on: bool,
    decay: f64,
    on_target: f64,
    off_target: f64,
    lower: f64,
    upper: f64,
    migrated_lower: f64,
    migrated_upper: f64,
    awaiting_off: bool,
    power_kw: f64,
}

fn init_device(d: &Device, cfg: &FleetConfig, rng: &mut ChaCha8Rng) -> Option<Sim> {
    let band = HysteresisBand::new(d.band.setpoint + cfg.setpoint_shift, d.band.deadband).ok()?;
    let cycle = steady_cycle_times(&d.params, &band, cfg.ambient).ok()?;
    let tau = d.params.time_constant();
    let on_target = cfg.ambient - d.params.cooling_drop();
    let off_target = cfg.ambient;
    let u = rng.random::<f64>() * cycle.period();
    let (theta, on) = if u < cycle.on {
        (
            on_target + (band.upper - on_target) * (-u / tau).exp(),
            true,
        )
    } else {
        (
            off_target + (band.lower - off_target) * (-(u - cycle.on) / tau).exp(),
            false,
        )
    };
    let dt_h = cfg.dt_s / 3600.0;
    Some(Sim {
        theta,
        on,
        decay: (-dt_h / tau).exp(),
        on_target,
        off_target,
        lower: band.lower,
        upper: band.upper,
        migrated_lower: band.lower + cfg.beta,
        migrated_upper: band.upper + cfg.beta,
        awaiting_off: false,
        power_kw: d.params.power,
    })
}

impl Sim {
    /// Band shift: OFF devices adopt the new band, ON devices keep the old
    /// lower edge until they next switch off.
    fn deploy(&mut self) {
        self.upper = self.migrated_upper;
        if self.on {
            self.awaiting_off = true;
        } else {
            self.lower = self.migrated_lower;
        }
    }

    fn step(&mut self) {
        let target = if self.on {
            self.on_target
        } else {
            self.off_target
        };
        self.theta = target + (self.theta - target) * self.decay;
        if self.on && self.theta < self.lower {
            self.on = false;
            if self.awaiting_off {
                self.awaiting_off = false;
                self.lower = self.migrated_lower;
            }
        } else if !self.on && self.theta > self.upper {
            self.on = true;
        }
    }
}

/// Time-stepped simulation of every device with exact exponential steps.
pub fn simulate_fleet(
    devices: &[Device],
    cfg: &FleetConfig,
    groups: Option<(&[usize], usize)>,
) -> Result<FleetTrace> {
    cfg.validate()?;
    if let Some((labels, _)) = groups {
        if labels.len() != devices.len() {
            return Err(Error::InvalidArgument(
                "one group label per device required".into(),
            ));
        }
    }
    let dt_h = cfg.dt_s / 3600.0;
    let steps = (cfg.horizon_h / dt_h).round() as usize;
    let per_record = ((cfg.record_every_h / dt_h).round() as usize).max(1);
    let records = steps / per_record + 1;
    let deploy_step = if cfg.beta > 0.0 {
        Some((cfg.t_s / dt_h).round() as usize)
    } else {
        None
    };
    let n_groups = groups.map_or(0, |g| g.1);

    let chunks: Vec<(Vec<f64>, Vec<Vec<f64>>, usize)> = devices
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(c, chunk)| {
            let mut total = vec![0.0; records];
            let mut by_group = vec![vec![0.0; records]; n_groups];
            let mut excluded = 0;
            for (k, d) in chunk.iter().enumerate() {
                let idx = c * CHUNK + k;
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(idx as u64);
                let Some(mut sim) = init_device(d, cfg, &mut rng) else {
                    excluded += 1;
                    continue;
                };
                let group = groups.map(|(labels, _)| labels[idx]);
                for step in 0..=steps {
                    if Some(step) == deploy_step {
                        sim.deploy();
                    }
                    if step % per_record == 0 && sim.on {
                        let r = step / per_record;
                        total[r] += sim.power_kw;
                        if let Some(g) = group {
                            by_group[g][r] += sim.power_kw;
                        }
                    }
                    if step < steps {
                        sim.step();
                    }
                }
            }
            (total, by_group, excluded)
        })
        .collect();

    let mut power = vec![0.0; records];
    let mut group_power = vec![vec![0.0; records]; n_groups];
    let mut excluded = 0;
    for (t, g, e) in chunks {
        power.iter_mut().zip(&t).for_each(|(a, b)| *a += b / 1000.0);
        for (acc, part) in group_power.iter_mut().zip(&g) {
            acc.iter_mut().zip(part).for_each(|(a, b)| *a += b / 1000.0);
        }
        excluded += e;
    }
    if excluded > 0 {
        log::debug!("{excluded} devices excluded from the fleet simulation (no steady cycle)");
    }
    Ok(FleetTrace {
        times_h: (0..records)
            .map(|r| (r * per_record) as f64 * dt_h)
            .collect(),
        power_mw: power,
        group_power_mw: group_power,
        excluded,
        seed: cfg.seed,
    })
}

/// Average ON and OFF durations (hours) of one simulated device over `cycles`
/// full cycles after a warm-up cycle.
pub fn measure_cycle_times(
    device: &Device,
    ambient: f64,
    dt_s: f64,
    cycles: usize,
) -> Result<(f64, f64)> {
    let cfg = FleetConfig {
        ambient,
        setpoint_shift: 0.0,
        t_s: 0.0,
        beta: 0.0,
        dt_s,
        horizon_h: 1.0,
        record_every_h: 1.0,
        seed: 0,
    };
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut sim = init_device(device, &cfg, &mut rng)
        .ok_or_else(|| Error::Domain("device has no steady cycle at this ambient".into()))?;
    let dt_h = dt_s / 3600.0;
    let (mut on_steps, mut off_steps) = (Vec::new(), Vec::new());
    let mut run = 0usize;
    let mut prev = sim.on;
    let mut switches = 0usize;
    let limit = 10_000_000usize;
    for _ in 0..limit {
        sim.step();
        run += 1;
        if sim.on != prev {
            switches += 1;
            // the first run starts mid-phase and is discarded
            if switches > 2 {
                if prev {
                    on_steps.push(run)
                } else {
                    off_steps.push(run)
                }
            }
            run = 0;
            prev = sim.on;
            if on_steps.len() >= cycles && off_steps.len() >= cycles {
                break;
            }
        }
    }
    if on_steps.is_empty() || off_steps.is_empty() {
        return Err(Error::Numerical {
            state: 0,
            reason: "device never completed a cycle".into(),
        });
    }
    let mean = |v: &[usize]| v.iter().sum::<usize>() as f64 / v.len() as f64 * dt_h;
    Ok((mean(&on_steps), mean(&off_steps)))
}

/// Step CDF of a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() || samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("need finite samples".into()));
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self { sorted: samples })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|v| *v <= x) as f64 / self.sorted.len() as f64
    }

    /// Kolmogorov-Smirnov distance to a continuous or step CDF.
    pub fn ks_distance(&self, cdf: impl Fn(f64) -> f64) -> f64 {
        let n = self.sorted.len() as f64;
        let mut d: f64 = 0.0;
        let mut i = 0;
        while i < self.sorted.len() {
            let x = self.sorted[i];
            let mut j = i;
            while j < self.sorted.len() && self.sorted[j] == x {
                j += 1;
            }
            // left limits are compared with left limits so step references work
            let below = i as f64 / n;
            let at = j as f64 / n;
            d = d
                .max((cdf(x) - at).abs())
                .max((cdf(x.next_down()) - below).abs());
            i = j;
        }
        d
    }
}

pub fn empirical_distribution(samples: Vec<f64>) -> Result<EmpiricalCdf> {
    EmpiricalCdf::new(samples)
}

/// Aggregate power of the clustered model at sampled ambient and setpoint
/// deviations, one row per sample and one column per requested time. Each
/// sample rebuilds every cluster timeline at the perturbed inputs. A
/// representative that cannot cycle at the perturbed inputs contributes its
/// saturated duty (always on above the band, always off below it).
#[allow(clippy::too_many_arguments)]
pub fn sample_cluster_power(
    clusters: &[Cluster],
    uncertainty: &UncertaintySpec,
    ambient: f64,
    beta: f64,
    t_s: f64,
    times_h: &[f64],
    samples: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let amb = ambient + uncertainty.ambient.sample(&mut rng);
            let shared = uncertainty.setpoint.sample(&mut rng);
            let mut duty_fns = Vec::with_capacity(clusters.len());
            for c in clusters {
                let shift = if uncertainty.per_cluster_setpoint {
                    uncertainty.setpoint.sample(&mut rng)
                } else {
                    shared
                };
                let mut d = c.representative;
                d.band = HysteresisBand::new(d.band.setpoint + shift, d.band.deadband)?;
                duty_fns.push((d, MigrationTimeline::for_device(&d, beta, amb, t_s).ok()));
            }
            Ok(times_h
                .iter()
                .map(|&t| {
                    clusters
                        .iter()
                        .zip(&duty_fns)
                        .map(|(c, (d, tl))| {
                            let duty = match tl {
                                Some(tl) => duty_at(tl, t),
                                None => saturated_duty(d, amb, if t < t_s { 0.0 } else { beta }),
                            };
                            duty * c.member_power_sum
                        })
                        .sum::<f64>()
                        / 1000.0
                })
                .collect())
        })
        .collect()
}

fn saturated_duty(d: &Device, ambient: f64, beta: f64) -> f64 {
    let band = d.band.shifted(beta);
    match steady_cycle_times(&d.params, &band, ambient) {
        Ok(c) => c.duty(),
        Err(_) if ambient <= band.upper => 0.0,
        Err(_) => 1.0,
    }
}

/// Aggregate power `P̄(t) + ΔP` with ΔP drawn from the linearized deviation
/// model: sampled input deviations times the model's sensitivities.
pub fn sample_linearized_power(
    model: &StochasticModel,
    t: f64,
    samples: usize,
    seed: u64,
) -> Vec<f64> {
    let mean = model.mean_power(t);
    let sens = model.sensitivity(t);
    let u = &model.uncertainty;
    (0..samples)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let a = u.ambient.sample(&mut rng);
            mean + sens.ambient * a
                + sens
                    .setpoint
                    .iter()
                    .map(|b| b * u.setpoint.sample(&mut rng))
                    .sum::<f64>()
        })
        .collect()
}

/// Aggregate TCL power of replicated fleet simulations, each with its own
/// sampled ambient and setpoint deviations, scaled to the full fleet.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationPool {
    pub times_h: Vec<f64>,
    /// MW, indexed by replication then grid time.
    pub power_mw: Vec<Vec<f64>>,
    /// Ensemble mean power before deployment (MW).
    pub p0: f64,
    pub scale: f64,
    pub t_s: f64,
}

impl ReplicationPool {
    /// Reserve delivered by replication `rep` at grid index `k` (MW).
    pub fn reserve(&self, rep: usize, k: usize) -> f64 {
        if self.times_h[k] < self.t_s - 1e-12 {
            return 0.0;
        }
        (self.p0 - self.power_mw[rep][k]).max(0.0)
    }
}

const POOL_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn replication_pool(ev: &Evaluator) -> Result<ReplicationPool> {
    let s = &ev.scenario;
    let mc = &s.mc;
    if mc.replications == 0 || mc.devices == 0 {
        return Err(Error::InvalidArgument(
            "replication pool needs devices and replications".into(),
        ));
    }
    let all = &ev.fleet.devices;
    let n = mc.devices.min(all.len());
    let subset = &all[..n];
    let total_kw: f64 = all.iter().map(|d| d.params.power).sum();
    let subset_kw: f64 = subset.iter().map(|d| d.params.power).sum();
    let scale = total_kw / subset_kw;
    let mut labels = vec![0usize; all.len()];
    for (c, cluster) in ev.fleet.clusters.iter().enumerate() {
        for &m in &cluster.members {
            labels[m] = c;
        }
    }
    let clusters = ev.fleet.clusters.len();
    let times = ev.times().to_vec();
    let excluded = AtomicUsize::new(0);
    let power_mw = (0..mc.replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(mc.seed ^ POOL_SALT);
            rng.set_stream(r as u64);
            let d_amb = s.uncertainty.ambient.sample(&mut rng);
            let shifts: Vec<f64> = if s.uncertainty.per_cluster_setpoint {
                (0..clusters)
                    .map(|_| s.uncertainty.setpoint.sample(&mut rng))
                    .collect()
            } else {
                vec![s.uncertainty.setpoint.sample(&mut rng)]
            };
            let devices: Vec<Device> = subset
                .iter()
                .enumerate()
                .map(|(i, d)| {
                    let shift = if shifts.len() == 1 {
                        shifts[0]
                    } else {
                        shifts[labels[i]]
                    };
                    let mut d = *d;
                    d.band.setpoint += shift;
                    d.band.lower += shift;
                    d.band.upper += shift;
                    d
                })
                .collect();
            let cfg = FleetConfig {
                ambient: s.ambient + d_amb,
                setpoint_shift: 0.0,
                t_s: s.t_s,
                beta: s.beta,
                dt_s: mc.dt_s,
                horizon_h: s.horizon_h,
                record_every_h: s.dt_h,
                seed: mc.seed.wrapping_add(r as u64),
            };
            let trace = simulate_fleet(&devices, &cfg, None)?;
            excluded.fetch_add(trace.excluded, Ordering::Relaxed);
            if trace.power_mw.len() != times.len() {
                return Err(Error::InvalidArgument(format!(
                    "fleet records {} do not match the {} grid times",
                    trace.power_mw.len(),
                    times.len()
                )));
            }
            Ok(trace
                .power_mw
                .iter()
                .map(|p| p * scale)
                .collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let excluded = excluded.into_inner();
    if excluded > 0 {
        log::warn!(
            "{excluded} device runs excluded across {} replications (no steady cycle)",
            mc.replications
        );
    }
    let pre: Vec<usize> = (0..times.len())
        .filter(|&k| times[k] < s.t_s - 1e-12)
        .collect();
    let pre = if pre.is_empty() { vec![0] } else { pre };
    let p0 = power_mw
        .iter()
        .flat_map(|tr| pre.iter().map(move |&k| tr[k]))
        .sum::<f64>()
        / (power_mw.len() * pre.len()) as f64;
    Ok(ReplicationPool {
        times_h: times,
        power_mw,
        p0,
        scale,
        t_s: s.t_s,
    })
}

/// Inverse-CDF sampler over a polynomial's states.
struct StateSampler {
    values: Vec<f64>,
    cumulative: Vec<f64>,
}

impl StateSampler {
    fn new(values: Vec<f64>, probabilities: &[f64]) -> Self {
        let mut acc = 0.0;
        let cumulative = probabilities
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Self { values, cumulative }
    }

    fn from_lz(lz: &Lz) -> Self {
        Self::new(lz.capacities.clone(), &lz.probabilities)
    }

    fn index<R: Rng>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().unwrap_or(&1.0);
        let u = rng.random::<f64>() * total;
        self.cumulative
            .partition_point(|c| *c <= u)
            .min(self.values.len() - 1)
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        self.values[self.index(rng)]
    }
}

#[derive(Default)]
struct Tally {
    hits: Vec<u64>,
    lc: Vec<f64>,
    sys_hits: u64,
    sys_lc: f64,
    sys_lc2: f64,
}

/// Monte Carlo state sampling of the reliability indices. The TCL reserve
/// comes from `pool`, which is required unless the variant has no TCL reserve.
pub fn mc_reliability(
    ev: &Evaluator,
    pool: Option<&ReplicationPool>,
    variant: Variant,
    samples: usize,
    seed: u64,
) -> Result<IndexSeries> {
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    if samples < 10_000 {
        log::warn!("{samples} Monte Carlo samples per time; indices will be noisy");
    }
    let uses_ort = variant != Variant::WoOR;
    if uses_ort && pool.is_none() {
        return Err(Error::InvalidArgument(
            "the TCL reserve variants need a replication pool".into(),
        ));
    }
    let s = &ev.scenario;
    let n = s.network.bus_count();
    let times = ev.times().to_vec();
    let tallies = (0..times.len())
        .into_par_iter()
        .map(|k| {
            let t = times[k];
            let mut units: Vec<(usize, StateSampler)> = s
                .generators
                .iter()
                .map(|g| Ok((g.bus, StateSampler::from_lz(&g.model.lz_at(t)?))))
                .collect::<Result<_>>()?;
            if variant == Variant::Hybrid {
                for r in &s.reserves {
                    units.push((r.bus, StateSampler::from_lz(&r.unit.lz_at(t)?)));
                }
            }
            let net_probs: Vec<f64> = (0..s.network.state_count())
                .map(|j| s.network.state_probability(j))
                .collect();
            let net =
                StateSampler::new((0..net_probs.len()).map(|j| j as f64).collect(), &net_probs);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let mut base_cache: HashMap<(usize, Vec<u64>), bool> = HashMap::new();
            let mut tally = Tally {
                hits: vec![0; n],
                lc: vec![0.0; n],
                ..Default::default()
            };
            let mut ag = vec![0.0; n];
            for _ in 0..samples {
                ag.iter_mut().for_each(|a| *a = 0.0);
                for (bus, u) in &units {
                    ag[*bus] += u.draw(&mut rng);
                }
                let state = net.index(&mut rng);
                let mut rc = match pool {
                    Some(p) if uses_ort => p.reserve(rng.random_range(0..p.power_mw.len()), k),
                    _ => 0.0,
                };
                if rc > 0.0 && s.standby_failure > 0.0 && rng.random::<f64>() < s.standby_failure {
                    rc = 0.0;
                }
                let key = (state, ag.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
                let short = match base_cache.get(&key) {
                    Some(v) => *v,
                    None => {
                        let v = ev.curtailment(&ag, k, state)?.iter().sum::<f64>() > EPS_LC;
                        base_cache.insert(key, v);
                        v
                    }
                };
                if !short {
                    continue;
                }
                let lc = if rc > 0.0 {
                    let boosted: Vec<f64> = ag
                        .iter()
                        .zip(&s.tcl_shares)
                        .map(|(a, sh)| a + sh * rc)
                        .collect();
                    ev.curtailment(&boosted, k, state)?
                } else {
                    ev.curtailment(&ag, k, state)?
                };
                let total: f64 = lc.iter().sum();
                for ((hits, acc), &x) in tally.hits.iter_mut().zip(&mut tally.lc).zip(&lc) {
                    if x > EPS_LC {
                        *hits += 1;
                    }
                    *acc += x;
                }
                if total > EPS_LC {
                    tally.sys_hits += 1;
                }
                tally.sys_lc += total;
                tally.sys_lc2 += total * total;
            }
            Ok(tally)
        })
        .collect::<Result<Vec<_>>>()?;

    let m = samples as f64;
    let mut lolp = vec![Vec::with_capacity(times.len()); n];
    let mut elc = vec![Vec::with_capacity(times.len()); n];
    let (mut lolp_sys, mut elc_sys, mut lolp_se, mut elc_se) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for t in &tallies {
        for i in 0..n {
            lolp[i].push(t.hits[i] as f64 / m);
            elc[i].push(t.lc[i] / m);
        }
        let p = t.sys_hits as f64 / m;
        let mean = t.sys_lc / m;
        lolp_sys.push(p);
        elc_sys.push(mean);
        lolp_se.push((p * (1.0 - p) / m).sqrt());
        elc_se.push(((t.sys_lc2 / m - mean * mean).max(0.0) / m).sqrt());
    }
    let dt = s.dt_h;
    let running_se = |se: &[f64]| {
        let var: Vec<f64> = se.iter().map(|x| (x * dt).powi(2)).collect();
        cumulative(&var, 1.0)
            .into_iter()
            .map(f64::sqrt)
            .collect::<Vec<_>>()
    };
    let mut out =
        IndexSeries::from_traces(times, s.network.bus_ids(), lolp, lolp_sys, elc, elc_sys, dt);
    out.standard_errors = Some(StandardErrors {
        eens_system: running_se(&elc_se),
        lole_system: running_se(&lolp_se),
        lolp_system: lolp_se,
        expected_lc_system: elc_se,
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::{sample_population, PopulationSpec};
    use crate::reliability::tiny_scenario;
    use crate::thermal::DeviceParams;
    use rand_distr::{Distribution, StandardNormal};
    use statrs::function::erf::erf;

    fn reference() -> Device {
        Device {
            params: DeviceParams::new(2.0, 2.0, 5.0, 2.5).unwrap(),
            band: HysteresisBand::new(25.0, 1.0).unwrap(),
        }
    }

    fn cfg(beta: f64, seed: u64) -> FleetConfig {
        FleetConfig {
            ambient: 32.0,
            setpoint_shift: 0.0,
            t_s: 0.5,
            beta,
            dt_s: 1.0,
            horizon_h: 2.0,
            record_every_h: 1.0 / 60.0,
            seed,
        }
    }

    #[test]
    fn reference_fleet_steady_power() {
        let fleet = vec![reference(); 100_000];
        let tr = simulate_fleet(&fleet, &cfg(0.0, 3), None).unwrap();
        let mean = tr.power_mw.iter().sum::<f64>() / tr.power_mw.len() as f64;
        assert!((mean - 139.9).abs() < 0.02 * 139.9, "{mean}");
        for p in &tr.power_mw {
            assert!((p - mean).abs() < 0.02 * mean);
        }
    }

    #[test]
    fn seeds_are_deterministic() {
        let fleet = sample_population(&PopulationSpec::table1(3000, 5)).unwrap();
        let a = simulate_fleet(&fleet, &cfg(1.0, 11), None).unwrap();
        let b = simulate_fleet(&fleet, &cfg(1.0, 11), None).unwrap();
        assert_eq!(a, b);
        let c = simulate_fleet(&fleet, &cfg(1.0, 12), None).unwrap();
        assert_ne!(a.power_mw, c.power_mw);
    }

    #[test]
    fn groups_sum_to_total() {
        let fleet = sample_population(&PopulationSpec::table1(2000, 5)).unwrap();
        let labels: Vec<usize> = (0..fleet.len()).map(|i| i % 3).collect();
        let tr = simulate_fleet(&fleet, &cfg(1.0, 1), Some((&labels, 3))).unwrap();
        for r in 0..tr.times_h.len() {
            let s: f64 = tr.group_power_mw.iter().map(|g| g[r]).sum();
            assert!((s - tr.power_mw[r]).abs() < 1e-9);
        }
    }

    #[test]
    fn temperatures_stay_near_band() {
        let d = reference();
        let c = cfg(1.0, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut sim = init_device(&d, &c, &mut rng).unwrap();
        let drift = 0.01;
        for step in 0..7200 {
            if step == 1800 {
                sim.deploy();
            }
            sim.step();
            assert!(
                sim.theta > 24.5 - drift && sim.theta < 26.5 + drift,
                "{}",
                sim.theta
            );
        }
    }

    #[test]
    fn simulated_cycle_matches_closed_form() {
        let d = reference();
        let (on, off) = measure_cycle_times(&d, 32.0, 1.0, 5).unwrap();
        let c = steady_cycle_times(&d.params, &d.band, 32.0).unwrap();
        assert!((on - c.on).abs() < 0.01 * c.on && (off - c.off).abs() < 0.01 * c.off);
    }

    #[test]
    fn empirical_cdf_examples() {
        let step = EmpiricalCdf::new(vec![3.0; 200]).unwrap();
        assert_eq!(step.eval(2.999), 0.0);
        assert_eq!(step.eval(3.0), 1.0);
        assert_eq!(step.ks_distance(|x| if x >= 3.0 { 1.0 } else { 0.0 }), 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 5000;
        let xs: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let e = EmpiricalCdf::new(xs).unwrap();
        let ks = e.ks_distance(|x| 0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2)));
        assert!(ks < 1.36 / (n as f64).sqrt(), "{ks}");
        assert!(EmpiricalCdf::new(vec![]).is_err());
    }

    #[test]
    fn rejects_coarse_steps() {
        let mut c = cfg(1.0, 0);
        c.dt_s = 30.0;
        assert!(simulate_fleet(&[reference()], &c, None).is_err());
    }

    #[test]
    fn deterministic_system_matches_analytical_exactly() {
        let ev = Evaluator::new(tiny_scenario(130.0, None)).unwrap();
        let anl = ev.evaluate(Variant::WoOR).unwrap().indices;
        let mc = mc_reliability(&ev, None, Variant::WoOR, 500, 3).unwrap();
        assert_eq!(mc.lolp_system, anl.lolp_system);
        assert_eq!(mc.eens_system, anl.eens_system);
        assert!(mc
            .standard_errors
            .unwrap()
            .lolp_system
            .iter()
            .all(|s| *s == 0.0));
    }

    fn small_pool_scenario() -> crate::reliability::Scenario {
        let mut s = tiny_scenario(100.0, Some(5.0));
        s.mc.devices = 2000;
        s.mc.replications = 40;
        s
    }

    #[test]
    fn sampled_indices_track_analytical() {
        let ev = Evaluator::new(small_pool_scenario()).unwrap();
        let pool = replication_pool(&ev).unwrap();
        assert!(
            (pool.p0 - ev.fleet.p0).abs() < 0.05 * ev.fleet.p0,
            "{} vs {}",
            pool.p0,
            ev.fleet.p0
        );
        for variant in [Variant::WoOR, Variant::Ort] {
            let anl = ev.evaluate(variant).unwrap().indices;
            let mc = mc_reliability(&ev, Some(&pool), variant, 20_000, 9).unwrap();
            let se = mc.standard_errors.as_ref().unwrap();
            let last = anl.times_h.len() - 1;
            let diff = (mc.final_lole() - anl.final_lole()).abs();
            assert!(
                diff < 4.0 * se.lole_system[last] + 0.05 * anl.final_lole(),
                "{variant:?}: {diff}"
            );
        }
    }

    #[test]
    fn errors_shrink_with_samples() {
        let ev = Evaluator::new(small_pool_scenario()).unwrap();
        let a = mc_reliability(&ev, None, Variant::WoOR, 10_000, 1).unwrap();
        let b = mc_reliability(&ev, None, Variant::WoOR, 40_000, 1).unwrap();
        let k = a.times_h.len() - 1;
        let ratio =
            a.standard_errors.unwrap().lole_system[k] / b.standard_errors.unwrap().lole_system[k];
        assert!((ratio - 2.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn mc_is_deterministic_per_seed() {
        let ev = Evaluator::new(small_pool_scenario()).unwrap();
        let pool = replication_pool(&ev).unwrap();
        assert_eq!(pool, replication_pool(&ev).unwrap());
        let a = mc_reliability(&ev, Some(&pool), Variant::Ort, 2000, 5).unwrap();
        let b = mc_reliability(&ev, Some(&pool), Variant::Ort, 2000, 5).unwrap();
        assert_eq!(a, b);
        assert!(mc_reliability(&ev, None, Variant::Ort, 2000, 5).is_err());
    }
}
