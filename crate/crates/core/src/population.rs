//! Heterogeneous fleet synthesis and k-means clustering on steady cycle times.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::thermal::{steady_cycle_times, DeviceParams, HeatRateMode, HysteresisBand};

const MAX_RESAMPLE: usize = 100;
const KMEANS_MAX_ITER: usize = 300;
const KMEANS_TOL_MIN: f64 = 1e-6;
const KMEANS_RESTARTS: u64 = 3;

/// A scalar parameter law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamDist {
    Uniform(f64, f64),
    Normal(f64, f64),
    Constant(f64),
}

impl ParamDist {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ParamDist::Uniform(a, b) if !(a <= b) => Err(Error::InvalidArgument(format!(
                "uniform bounds out of order: ({a}, {b})"
            ))),
            ParamDist::Normal(_, s) if !(s >= 0.0) => Err(Error::InvalidArgument(format!(
                "normal standard deviation must be nonnegative, got {s}"
            ))),
            _ => Ok(()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ParamDist::Uniform(a, b) => {
                if a == b {
                    a
                } else {
                    rng.random_range(a..b)
                }
            }
            ParamDist::Normal(mu, s) => {
                if s == 0.0 {
                    mu
                } else {
                    Normal::new(mu, s).expect("validated sigma").sample(rng)
                }
            }
            ParamDist::Constant(v) => v,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            ParamDist::Uniform(a, b) => 0.5 * (a + b),
            ParamDist::Normal(mu, _) => mu,
            ParamDist::Constant(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub count: usize,
    /// kWh/°C
    pub capacitance: ParamDist,
    /// °C/kW
    pub resistance: ParamDist,
    /// kW
    pub power_kw: ParamDist,
    /// °C
    pub setpoint: ParamDist,
    pub cop: f64,
    /// °C
    pub deadband: f64,
    pub seed: u64,
    /// Ambient used to reject devices that cannot cycle.
    #[serde(default = "default_ambient")]
    pub nominal_ambient: f64,
    #[serde(default)]
    pub heat_rate_mode: HeatRateMode,
}

fn default_ambient() -> f64 {
    32.0
}

impl PopulationSpec {
    /// The fleet described in Table 1 of the reference study (1 °C deadband).
    pub fn table1(count: usize, seed: u64) -> Self {
        Self {
            count,
            capacitance: ParamDist::Uniform(1.5, 2.5),
            resistance: ParamDist::Uniform(1.5, 2.5),
            power_kw: ParamDist::Uniform(4.0, 7.2),
            setpoint: ParamDist::Uniform(18.0, 27.0),
            cop: 2.5,
            deadband: 1.0,
            seed,
            nominal_ambient: 32.0,
            heat_rate_mode: HeatRateMode::CopTimesP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for d in [
            &self.capacitance,
            &self.resistance,
            &self.power_kw,
            &self.setpoint,
        ] {
            d.validate()?;
        }
        if !(self.cop > 0.0) || !(self.deadband > 0.0) {
            return Err(Error::InvalidArgument(
                "cop and deadband must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Device {
    pub params: DeviceParams,
    pub band: HysteresisBand,
}

/// Draw `spec.count` devices. Fields are drawn in the order C, R, p, setpoint.
pub fn sample_population(spec: &PopulationSpec) -> Result<Vec<Device>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(spec.count);
    for index in 0..spec.count {
        let mut tries = 0;
        let device = loop {
            tries += 1;
            let drawn = draw_device(spec, &mut rng);
            match drawn {
                Ok(d) if steady_cycle_times(&d.params, &d.band, spec.nominal_ambient).is_ok() => {
                    break d
                }
                _ if tries >= MAX_RESAMPLE => return Err(Error::InvalidArgument(format!(
                    "device {index}: no feasible draw in {MAX_RESAMPLE} attempts at ambient {} °C",
                    spec.nominal_ambient
                ))),
                _ => continue,
            }
        };
        out.push(device);
    }
    Ok(out)
}

fn draw_device(spec: &PopulationSpec, rng: &mut ChaCha8Rng) -> Result<Device> {
    let c = spec.capacitance.sample(rng);
    let r = spec.resistance.sample(rng);
    let p = spec.power_kw.sample(rng);
    let sp = spec.setpoint.sample(rng);
    Ok(Device {
        params: DeviceParams::new(c, r, p, spec.cop)?.with_heat_rate_mode(spec.heat_rate_mode),
        band: HysteresisBand::new(sp, spec.deadband)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    /// Member closest to the centroid.
    pub representative: Device,
    pub representative_index: usize,
    /// Σ p over members, kW.
    pub member_power_sum: f64,
    pub member_count: usize,
    pub members: Vec<usize>,
    /// Centroid in (T_on, T_off) minutes.
    pub centroid: [f64; 2],
}

/// (T_on, T_off) in minutes for every device.
pub fn cycle_features(devices: &[Device], ambient: f64) -> Result<Vec<[f64; 2]>> {
    devices
        .par_iter()
        .enumerate()
        .map(|(i, d)| {
            steady_cycle_times(&d.params, &d.band, ambient)
                .map(|c| [c.on * 60.0, c.off * 60.0])
                .map_err(|e| match e {
                    Error::Domain(m) => Error::Domain(format!("device {i}: {m}")),
                    other => Error::InvalidArgument(format!("device {i}: {other}")),
                })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub centroids: Vec<[f64; 2]>,
    pub labels: Vec<usize>,
    pub inertia: f64,
    pub iterations: usize,
}

fn dist2(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

fn nearest(x: &[f64; 2], centroids: &[[f64; 2]]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = dist2(x, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

const CHUNK: usize = 4096;

/// Per-cluster coordinate sums and counts, reduced in fixed chunk order.
fn centroid_sums(points: &[[f64; 2]], labels: &[usize], k: usize) -> Vec<([f64; 2], usize)> {
    let partials: Vec<Vec<([f64; 2], usize)>> = points
        .par_chunks(CHUNK)
        .zip(labels.par_chunks(CHUNK))
        .map(|(pc, lc)| {
            let mut acc = vec![([0.0, 0.0], 0usize); k];
            for (x, &l) in pc.iter().zip(lc) {
                acc[l].0[0] += x[0];
                acc[l].0[1] += x[1];
                acc[l].1 += 1;
            }
            acc
        })
        .collect();
    let mut total = vec![([0.0, 0.0], 0usize); k];
    for part in partials {
        for (t, p) in total.iter_mut().zip(part) {
            t.0[0] += p.0[0];
            t.0[1] += p.0[1];
            t.1 += p.1;
        }
    }
    total
}

fn kmeans_pp_init(points: &[[f64; 2]], k: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    let n = points.len();
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..n)]);
    let mut d2: Vec<f64> = points.iter().map(|x| dist2(x, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            rng.random_range(0..n)
        } else {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        };
        let c = points[next];
        centroids.push(c);
        d2.par_iter_mut()
            .zip(points.par_iter())
            .for_each(|(d, x)| *d = d.min(dist2(x, &c)));
    }
    centroids
}

fn lloyd(points: &[[f64; 2]], mut centroids: Vec<[f64; 2]>) -> KMeansFit {
    let k = centroids.len();
    let mut labels = vec![0usize; points.len()];
    let mut iterations = 0;
    for it in 0..KMEANS_MAX_ITER {
        iterations = it + 1;
        labels
            .par_iter_mut()
            .zip(points.par_iter())
            .for_each(|(l, x)| *l = nearest(x, &centroids).0);
        let sums = centroid_sums(points, &labels, k);
        let mut shift: f64 = 0.0;
        for (j, (s, count)) in sums.iter().enumerate() {
            let updated = if *count > 0 {
                [s[0] / *count as f64, s[1] / *count as f64]
            } else {
                // empty cluster: reseed at the point farthest from its centroid
                let far = points
                    .iter()
                    .enumerate()
                    .map(|(i, x)| (i, dist2(x, &centroids[labels[i]])))
                    .fold((0, -1.0), |a, b| if b.1 > a.1 { b } else { a })
                    .0;
                points[far]
            };
            shift = shift.max(dist2(&updated, &centroids[j]).sqrt());
            centroids[j] = updated;
        }
        if shift <= KMEANS_TOL_MIN {
            break;
        }
    }
    labels
        .par_iter_mut()
        .zip(points.par_iter())
        .for_each(|(l, x)| *l = nearest(x, &centroids).0);
    let inertia = points
        .par_chunks(CHUNK)
        .zip(labels.par_chunks(CHUNK))
        .map(|(pc, lc)| {
            pc.iter()
                .zip(lc)
                .map(|(x, &l)| dist2(x, &centroids[l]))
                .sum::<f64>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    KMeansFit {
        centroids,
        labels,
        inertia,
        iterations,
    }
}

/// k-means with k-means++ seeding; the lowest-inertia fit over a few seeded restarts wins.
pub fn kmeans(points: &[[f64; 2]], k: usize, seed: u64) -> Result<KMeansFit> {
    if k == 0 || k > points.len() {
        return Err(Error::InvalidArgument(format!(
            "cluster count {k} must be in [1, {}]",
            points.len()
        )));
    }
    let mut best: Option<KMeansFit> = None;
    for restart in 0..KMEANS_RESTARTS {
        let mut rng =
            ChaCha8Rng::seed_from_u64(seed ^ (0x9E37_79B9_7F4A_7C15u64.wrapping_mul(restart + 1)));
        let fit = lloyd(points, kmeans_pp_init(points, k, &mut rng));
        if best.as_ref().is_none_or(|b| fit.inertia < b.inertia) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Calinski-Harabasz variance ratio of a labelling.
pub fn calinski_harabasz(points: &[[f64; 2]], fit: &KMeansFit) -> f64 {
    let n = points.len();
    let k = fit.centroids.len();
    if k < 2 || n <= k {
        return 0.0;
    }
    let sums = centroid_sums(points, &fit.labels, k);
    let mut mean = [0.0, 0.0];
    for (s, _) in &sums {
        mean[0] += s[0];
        mean[1] += s[1];
    }
    mean[0] /= n as f64;
    mean[1] /= n as f64;
    let between: f64 = sums
        .iter()
        .filter(|(_, c)| *c > 0)
        .map(|(s, c)| {
            let m = [s[0] / *c as f64, s[1] / *c as f64];
            *c as f64 * dist2(&m, &mean)
        })
        .sum();
    let within: f64 = points
        .iter()
        .zip(&fit.labels)
        .map(|(x, &l)| {
            let (s, c) = sums[l];
            dist2(x, &[s[0] / c as f64, s[1] / c as f64])
        })
        .sum();
    if within <= 0.0 {
        return f64::INFINITY;
    }
    (between / (k - 1) as f64) / (within / (n - k) as f64)
}

/// Partition the fleet into `q` clusters of similar (T_on, T_off).
pub fn cluster_by_cycle_times(
    devices: &[Device],
    ambient: f64,
    q: usize,
    seed: u64,
) -> Result<Vec<Cluster>> {
    if q == 0 || q > devices.len() {
        return Err(Error::InvalidArgument(format!(
            "cluster count {q} must be in [1, {}]",
            devices.len()
        )));
    }
    let features = cycle_features(devices, ambient)?;
    let fit = kmeans(&features, q, seed)?;
    Ok(clusters_from_fit(devices, &features, &fit))
}

pub fn clusters_from_fit(
    devices: &[Device],
    features: &[[f64; 2]],
    fit: &KMeansFit,
) -> Vec<Cluster> {
    let k = fit.centroids.len();
    let mut members = vec![Vec::new(); k];
    for (i, &l) in fit.labels.iter().enumerate() {
        members[l].push(i);
    }
    members
        .into_iter()
        .zip(&fit.centroids)
        .filter(|(m, _)| !m.is_empty())
        .map(|(m, c)| {
            let rep = *m
                .iter()
                .min_by(|&&a, &&b| {
                    dist2(&features[a], c)
                        .total_cmp(&dist2(&features[b], c))
                        .then(a.cmp(&b))
                })
                .expect("nonempty");
            Cluster {
                representative: devices[rep],
                representative_index: rep,
                member_power_sum: m.iter().map(|&i| devices[i].params.power).sum(),
                member_count: m.len(),
                members: m,
                centroid: *c,
            }
        })
        .collect()
}

/// Q in [2, min(q_max, n)] maximising the Calinski-Harabasz index.
pub fn choose_cluster_count(
    devices: &[Device],
    ambient: f64,
    q_max: usize,
    seed: u64,
) -> Result<usize> {
    if q_max < 2 {
        return Err(Error::InvalidArgument(format!(
            "q_max must be at least 2, got {q_max}"
        )));
    }
    if devices.len() < 2 {
        return Err(Error::InvalidArgument(
            "need at least two devices to choose a cluster count".into(),
        ));
    }
    let q_max = q_max.min(devices.len());
    let features = cycle_features(devices, ambient)?;
    let mut best = (2, f64::NEG_INFINITY);
    for q in 2..=q_max {
        let fit = kmeans(&features, q, seed)?;
        let score = calinski_harabasz(&features, &fit);
        log::debug!("cluster count {q}: CH = {score:.3}");
        if score > best.1 {
            best = (q, score);
        }
    }
    Ok(best.0)
}
