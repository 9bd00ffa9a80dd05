//! Aggregate power under ambient and setpoint uncertainty.
//!
//! The piece boundaries of each cluster's timeline move with the ambient and
//! setpoint deviations, so at a given time a cluster is in piece ξ only with
//! some probability. Those probabilities weight the piece duty cycles into a
//! mean, and a first-order expansion of the duty cycles in the two deviations
//! gives the cumulants of the power deviation, turned into a density with a
//! Gram-Charlier series.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::dynamics::{MigrationTimeline, PieceKind, TimelineTimes};
use crate::error::{Error, Result};
use crate::population::{Cluster, Device};
use crate::thermal::HysteresisBand;

/// Finite-difference step for all sensitivities (°C).
pub const SENSITIVITY_STEP: f64 = 0.01;
/// Largest supported cumulant order.
pub const MAX_ORDER: usize = 8;

/// Zero-mean deviation law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Deviation {
    Zero,
    Normal { sigma: f64 },
    Uniform { half_width: f64 },
}

impl Deviation {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Deviation::Zero => true,
            Deviation::Normal { sigma } => sigma.is_finite() && sigma >= 0.0,
            Deviation::Uniform { half_width } => half_width.is_finite() && half_width >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "bad deviation law {self:?}"
            )))
        }
    }

    pub fn variance(&self) -> f64 {
        self.cumulant(2)
    }

    /// Cumulant of order `v` (1-based).
    pub fn cumulant(&self, v: usize) -> f64 {
        match *self {
            Deviation::Zero => 0.0,
            Deviation::Normal { sigma } => {
                if v == 2 {
                    sigma * sigma
                } else {
                    0.0
                }
            }
            Deviation::Uniform { half_width: a } => match v {
                2 => a * a / 3.0,
                4 => -2.0 * a.powi(4) / 15.0,
                6 => 16.0 * a.powi(6) / 63.0,
                8 => -16.0 * a.powi(8) / 15.0,
                _ => 0.0,
            },
        }
    }

    /// Same law scaled by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        match *self {
            Deviation::Zero => Deviation::Zero,
            Deviation::Normal { sigma } => Deviation::Normal {
                sigma: sigma * s.abs(),
            },
            Deviation::Uniform { half_width } => Deviation::Uniform {
                half_width: half_width * s.abs(),
            },
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Deviation::Zero => 0.0,
            Deviation::Normal { sigma } => {
                if sigma == 0.0 {
                    0.0
                } else {
                    Normal::new(0.0, sigma)
                        .expect("validated sigma")
                        .sample(rng)
                }
            }
            Deviation::Uniform { half_width } => {
                if half_width == 0.0 {
                    0.0
                } else {
                    rng.random_range(-half_width..half_width)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintySpec {
    #[serde(default = "default_ambient")]
    pub ambient: Deviation,
    #[serde(default = "default_setpoint")]
    pub setpoint: Deviation,
    #[serde(default = "default_order")]
    pub cumulant_order: usize,
    /// Independent setpoint deviation per cluster instead of one shared one.
    #[serde(default)]
    pub per_cluster_setpoint: bool,
}

fn default_ambient() -> Deviation {
    Deviation::Normal { sigma: 1.0 }
}

fn default_setpoint() -> Deviation {
    Deviation::Normal { sigma: 0.5 }
}

fn default_order() -> usize {
    6
}

impl Default for UncertaintySpec {
    fn default() -> Self {
        Self {
            ambient: default_ambient(),
            setpoint: default_setpoint(),
            cumulant_order: default_order(),
            per_cluster_setpoint: false,
        }
    }
}

impl UncertaintySpec {
    pub fn deterministic() -> Self {
        Self {
            ambient: Deviation::Zero,
            setpoint: Deviation::Zero,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.ambient.validate()?;
        self.setpoint.validate()?;
        let n = self.cumulant_order;
        if !(2..=MAX_ORDER).contains(&n) || !n.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "cumulant order must be even and within [2, {MAX_ORDER}], got {n}"
            )));
        }
        Ok(())
    }
}

fn perturbed_times(
    device: &Device,
    ambient: f64,
    beta: f64,
    d_amb: f64,
    d_set: f64,
) -> Option<TimelineTimes> {
    let band = HysteresisBand::new(device.band.setpoint + d_set, device.band.deadband).ok()?;
    let dev = Device {
        params: device.params,
        band,
    };
    TimelineTimes::compute(&dev, ambient + d_amb, beta).ok()
}

fn finite_difference(f0: f64, plus: Option<f64>, minus: Option<f64>, h: f64) -> f64 {
    match (plus, minus) {
        (Some(p), Some(m)) => (p - m) / (2.0 * h),
        (Some(p), None) => (p - f0) / h,
        (None, Some(m)) => (f0 - m) / h,
        (None, None) => 0.0,
    }
}

/// Base times of one timeline at the forecast means and at ± one step in each input.
#[derive(Debug, Clone)]
pub struct PerturbedTimes {
    pub nominal: TimelineTimes,
    ambient: [Option<TimelineTimes>; 2],
    setpoint: [Option<TimelineTimes>; 2],
    step: f64,
}

impl PerturbedTimes {
    pub fn new(device: &Device, timeline: &MigrationTimeline, step: f64) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "finite-difference step must be positive, got {step}"
            )));
        }
        let (amb, beta) = (timeline.ambient, timeline.beta);
        let pt = |da, ds| perturbed_times(device, amb, beta, da, ds);
        let ambient = [pt(step, 0.0), pt(-step, 0.0)];
        let setpoint = [pt(0.0, step), pt(0.0, -step)];
        if ambient.iter().chain(&setpoint).any(Option::is_none) {
            log::debug!("one-sided differences used near an infeasible perturbation");
        }
        Ok(Self {
            nominal: timeline.times,
            ambient,
            setpoint,
            step,
        })
    }

    /// (∂f/∂θa, ∂f/∂θset) of a function of the base times.
    pub fn gradient(&self, f: impl Fn(&TimelineTimes) -> f64) -> (f64, f64) {
        let f0 = f(&self.nominal);
        let d = |pair: &[Option<TimelineTimes>; 2]| {
            finite_difference(
                f0,
                pair[0].as_ref().map(&f),
                pair[1].as_ref().map(&f),
                self.step,
            )
        };
        (d(&self.ambient), d(&self.setpoint))
    }
}

/// Sensitivities of a piece's clamped duty cycle at `t` (hours).
pub fn duty_sensitivities(
    device: &Device,
    timeline: &MigrationTimeline,
    kind: PieceKind,
    t: f64,
    step: f64,
) -> Result<(f64, f64)> {
    let p = PerturbedTimes::new(device, timeline, step)?;
    let s = t - timeline.t_s;
    Ok(p.gradient(|tt| kind.duty(tt, s)))
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Probability that `end <= s` for a Gaussian endpoint; a step for zero spread.
fn endpoint_cdf(s: f64, mean: f64, sd: f64) -> f64 {
    if mean == f64::NEG_INFINITY {
        1.0
    } else if mean == f64::INFINITY {
        0.0
    } else if sd > 0.0 {
        normal_cdf((s - mean) / sd)
    } else if s >= mean {
        1.0
    } else {
        0.0
    }
}

/// Mean and standard deviation of each piece's two endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndpointLaw {
    pub lower: (f64, f64),
    pub upper: (f64, f64),
}

pub fn endpoint_laws(
    timeline: &MigrationTimeline,
    perturbed: &PerturbedTimes,
    uncertainty: &UncertaintySpec,
) -> Vec<EndpointLaw> {
    let (va, vs) = (
        uncertainty.ambient.variance(),
        uncertainty.setpoint.variance(),
    );
    let gap = timeline.gap;
    let law = |mean: f64, f: &dyn Fn(&TimelineTimes) -> f64| {
        if !mean.is_finite() {
            return (mean, 0.0);
        }
        let (ga, gs) = perturbed.gradient(f);
        (mean, (ga * ga * va + gs * gs * vs).sqrt())
    };
    timeline
        .pieces
        .iter()
        .map(|p| EndpointLaw {
            lower: law(p.lower, &|tt| p.kind.bounds(tt, gap).0),
            upper: law(p.upper, &|tt| p.kind.bounds(tt, gap).1),
        })
        .collect()
}

/// Probability that `t` falls in each piece, normalized to sum to one.
pub fn interval_probabilities(
    timeline: &MigrationTimeline,
    endpoints: &[EndpointLaw],
    t: f64,
) -> Vec<f64> {
    let s = t - timeline.t_s;
    let mut rho: Vec<f64> = endpoints
        .iter()
        .map(|e| {
            (1.0 - endpoint_cdf(s, e.upper.0, e.upper.1)) * endpoint_cdf(s, e.lower.0, e.lower.1)
        })
        .collect();
    let total: f64 = rho.iter().sum();
    if total > 0.0 {
        rho.iter_mut().for_each(|r| *r /= total);
    } else {
        rho.iter_mut().for_each(|r| *r = 0.0);
        rho[timeline.piece_at(s)] = 1.0;
    }
    rho
}

/// Cumulants κ_1..κ_n (index 0 holds κ_1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulantSet(pub Vec<f64>);

impl CumulantSet {
    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, v: usize) -> f64 {
        if v == 0 || v > self.0.len() {
            0.0
        } else {
            self.0[v - 1]
        }
    }

    pub fn variance(&self) -> f64 {
        self.get(2)
    }
}

/// Linear coefficients of the power deviation (MW/°C).
#[derive(Debug, Clone, PartialEq)]
pub struct Sensitivity {
    pub ambient: f64,
    /// Shared setpoint coefficient, or one per cluster.
    pub setpoint: Vec<f64>,
}

/// Combine input cumulants through the linear map.
pub fn deviation_cumulants(
    sens: &Sensitivity,
    uncertainty: &UncertaintySpec,
    order: usize,
) -> CumulantSet {
    CumulantSet(
        (1..=order)
            .map(|v| {
                let a = sens.ambient.powi(v as i32) * uncertainty.ambient.cumulant(v);
                let b: f64 = sens
                    .setpoint
                    .iter()
                    .map(|b| b.powi(v as i32) * uncertainty.setpoint.cumulant(v))
                    .sum();
                a + b
            })
            .collect(),
    )
}

struct ClusterTerm {
    device: Device,
    timeline: MigrationTimeline,
    perturbed: PerturbedTimes,
    endpoints: Vec<EndpointLaw>,
    power_sum_mw: f64,
}

/// Reserve model of a cluster set under uncertainty.
pub struct StochasticModel {
    terms: Vec<ClusterTerm>,
    pub uncertainty: UncertaintySpec,
}

impl StochasticModel {
    pub fn new(
        clusters: &[Cluster],
        timelines: &[MigrationTimeline],
        uncertainty: UncertaintySpec,
    ) -> Result<Self> {
        uncertainty.validate()?;
        if clusters.len() != timelines.len() {
            return Err(Error::InvalidArgument(format!(
                "{} clusters but {} timelines",
                clusters.len(),
                timelines.len()
            )));
        }
        let terms = clusters
            .iter()
            .zip(timelines)
            .map(|(c, tl)| {
                let perturbed = PerturbedTimes::new(&c.representative, tl, SENSITIVITY_STEP)?;
                let endpoints = endpoint_laws(tl, &perturbed, &uncertainty);
                Ok(ClusterTerm {
                    device: c.representative,
                    timeline: tl.clone(),
                    perturbed,
                    endpoints,
                    power_sum_mw: c.member_power_sum,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { terms, uncertainty })
    }

    pub fn cluster_count(&self) -> usize {
        self.terms.len()
    }

    pub fn interval_probabilities(&self, cluster: usize, t: f64) -> Vec<f64> {
        let term = &self.terms[cluster];
        interval_probabilities(&term.timeline, &term.endpoints, t)
    }

    /// Mean aggregate power (MW).
    pub fn mean_power(&self, t: f64) -> f64 {
        self.terms
            .iter()
            .map(|term| {
                let s = t - term.timeline.t_s;
                let rho = interval_probabilities(&term.timeline, &term.endpoints, t);
                let eta: f64 = term
                    .timeline
                    .pieces
                    .iter()
                    .zip(&rho)
                    .filter(|(_, r)| **r > 0.0)
                    .map(|(p, r)| p.kind.duty(&term.timeline.times, s) * r)
                    .sum();
                eta * term.power_sum_mw
            })
            .sum::<f64>()
            / 1000.0
    }

    pub fn sensitivity(&self, t: f64) -> Sensitivity {
        let mut ambient = 0.0;
        let mut setpoint = Vec::with_capacity(self.terms.len());
        for term in &self.terms {
            let s = t - term.timeline.t_s;
            let rho = interval_probabilities(&term.timeline, &term.endpoints, t);
            let (mut a, mut b) = (0.0, 0.0);
            for (p, r) in term.timeline.pieces.iter().zip(&rho) {
                if *r == 0.0 {
                    continue;
                }
                let (ga, gs) = term.perturbed.gradient(|tt| p.kind.duty(tt, s));
                a += ga * r;
                b += gs * r;
            }
            ambient += a * term.power_sum_mw / 1000.0;
            setpoint.push(b * term.power_sum_mw / 1000.0);
        }
        if !self.uncertainty.per_cluster_setpoint {
            setpoint = vec![setpoint.iter().sum()];
        }
        Sensitivity { ambient, setpoint }
    }

    pub fn cumulants(&self, t: f64) -> CumulantSet {
        deviation_cumulants(
            &self.sensitivity(t),
            &self.uncertainty,
            self.uncertainty.cumulant_order,
        )
    }

    pub fn distribution(&self, t: f64) -> PowerDistribution {
        let mean = self.mean_power(t);
        PowerDistribution::new(mean, self.cumulants(t))
    }

    /// Representative device of a cluster (for diagnostics).
    pub fn device(&self, cluster: usize) -> &Device {
        &self.terms[cluster].device
    }
}

/// Probabilists' Hermite polynomials He_0..He_n at `z`.
pub fn hermite(n: usize, z: f64) -> Vec<f64> {
    let mut h = vec![1.0; n + 1];
    if n >= 1 {
        h[1] = z;
    }
    for k in 2..=n {
        h[k] = z * h[k - 1] - (k - 1) as f64 * h[k - 2];
    }
    h
}

/// Coefficients of He_0..He_n as polynomials in z (row k holds He_k).
fn hermite_coefficients(n: usize) -> Vec<Vec<f64>> {
    let mut c = vec![vec![0.0; n + 1]; n + 1];
    c[0][0] = 1.0;
    if n >= 1 {
        c[1][1] = 1.0;
    }
    for k in 2..=n {
        for j in 0..=k {
            let shifted = if j > 0 { c[k - 1][j - 1] } else { 0.0 };
            c[k][j] = shifted - (k - 1) as f64 * c[k - 2][j];
        }
    }
    c
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Raw moments 0..=n from cumulants (index v holds κ_v, index 0 unused).
fn moments_from_cumulants(kappa: &[f64], n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n + 1];
    m[0] = 1.0;
    for k in 1..=n {
        m[k] = (1..=k)
            .map(|j| binomial(k - 1, j - 1) * kappa.get(j).copied().unwrap_or(0.0) * m[k - j])
            .sum();
    }
    m
}

const TAIL: f64 = 12.0;
const PANEL: f64 = 0.01;
/// Five-point Gauss-Legendre nodes and weights on [-1, 1].
const GAUSS_5: [(f64, f64); 5] = [
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (-0.538_469_310_105_683, 0.478_628_670_499_366_5),
    (0.0, 0.568_888_888_888_888_9),
    (0.538_469_310_105_683, 0.478_628_670_499_366_5),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

#[allow(clippy::too_many_arguments)]
fn simpson(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let h = (b - a) / 12.0;
    let left = h * (fa + 4.0 * flm + fm);
    let right = h * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
}

/// Adaptive Simpson integral of `f` over `[a, b]`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    // split first so narrow features are not missed by the coarse estimate
    let pieces = 16;
    let w = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| {
            let (lo, hi) = (a + i as f64 * w, a + (i + 1) as f64 * w);
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
            simpson(f, lo, hi, fa, fm, fb, whole, tol / pieces as f64, 40)
        })
        .sum()
}

/// Gram-Charlier Type A density of a standardized variable, clipped at zero
/// and renormalized.
#[derive(Debug, Clone, PartialEq)]
pub struct GramCharlier {
    /// b_k = E[He_k(Z)] for k = 0..=n.
    pub coefficients: Vec<f64>,
    norm: f64,
    /// Normalized CDF at the panel nodes `-TAIL + i·PANEL`.
    table: Vec<f64>,
}

impl GramCharlier {
    /// From standardized cumulants (index v holds κ_v/σ^v; κ_1 and κ_2 ignored).
    pub fn from_standardized(std_cumulants: &[f64], order: usize) -> Self {
        let mut kappa = vec![0.0; order + 1];
        kappa[2] = 1.0;
        let top = order.min(std_cumulants.len().saturating_sub(1));
        if top >= 3 {
            kappa[3..=top].copy_from_slice(&std_cumulants[3..=top]);
        }
        let m = moments_from_cumulants(&kappa, order);
        let coefficients = hermite_coefficients(order)
            .iter()
            .map(|row| row.iter().zip(&m).map(|(c, m)| c * m).sum())
            .collect();
        let mut gc = Self {
            coefficients,
            norm: 1.0,
            table: Vec::new(),
        };
        let panels = (2.0 * TAIL / PANEL).round() as usize;
        let mut table = Vec::with_capacity(panels + 1);
        let mut acc = 0.0;
        table.push(0.0);
        for i in 0..panels {
            let mid = -TAIL + (i as f64 + 0.5) * PANEL;
            acc += GAUSS_5
                .iter()
                .map(|(x, w)| w * gc.raw(mid + 0.5 * PANEL * x))
                .sum::<f64>()
                * 0.5
                * PANEL;
            table.push(acc);
        }
        gc.norm = acc;
        table.iter_mut().for_each(|f| *f /= acc);
        gc.table = table;
        gc
    }

    fn raw(&self, z: f64) -> f64 {
        let n = self.coefficients.len() - 1;
        let h = hermite(n, z);
        let mut series = 0.0;
        let mut fact = 1.0;
        for (k, (b, he)) in self.coefficients.iter().zip(&h).enumerate() {
            if k > 1 {
                fact *= k as f64;
            }
            series += b / fact * he;
        }
        let phi = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        (series * phi).max(0.0)
    }

    pub fn density(&self, z: f64) -> f64 {
        self.raw(z) / self.norm
    }

    pub fn cdf(&self, z: f64) -> f64 {
        if z <= -TAIL {
            0.0
        } else if z >= TAIL {
            1.0
        } else {
            // cubic Hermite between tabulated nodes, slopes limited so the
            // interpolant stays monotone
            let x = (z + TAIL) / PANEL;
            let i = (x.floor() as usize).min(self.table.len() - 2);
            let t = x - i as f64;
            let (y0, y1) = (self.table[i], self.table[i + 1]);
            let delta = y1 - y0;
            if delta <= 0.0 {
                return y0;
            }
            let node = -TAIL + i as f64 * PANEL;
            let mut m0 = self.density(node) * PANEL;
            let mut m1 = self.density(node + PANEL) * PANEL;
            let r = (m0 * m0 + m1 * m1).sqrt() / delta;
            if r > 3.0 {
                m0 *= 3.0 / r;
                m1 *= 3.0 / r;
            }
            let (t2, t3) = (t * t, t * t * t);
            let f = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
                + (t3 - 2.0 * t2 + t) * m0
                + (3.0 * t2 - 2.0 * t3) * y1
                + (t3 - t2) * m1;
            f.clamp(y0, y1)
        }
    }
}

/// Density of the power deviation built from its cumulants.
pub fn gram_charlier_pdf(cumulants: &CumulantSet) -> DeviationDensity {
    let var = cumulants.variance();
    if !(var > 0.0) {
        return DeviationDensity::PointMass {
            at: cumulants.get(1),
        };
    }
    let sd = var.sqrt();
    let n = cumulants.order();
    let mut standardized = vec![0.0; n + 1];
    for (v, z) in standardized.iter_mut().enumerate().skip(3) {
        *z = cumulants.get(v) / sd.powi(v as i32);
    }
    DeviationDensity::Series {
        shift: cumulants.get(1),
        sd,
        series: GramCharlier::from_standardized(&standardized, n.max(2)),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DeviationDensity {
    PointMass {
        at: f64,
    },
    Series {
        shift: f64,
        sd: f64,
        series: GramCharlier,
    },
}

impl DeviationDensity {
    /// Density at a deviation `x` (MW); zero everywhere for a point mass.
    pub fn density(&self, x: f64) -> f64 {
        match self {
            DeviationDensity::PointMass { .. } => 0.0,
            DeviationDensity::Series { shift, sd, series } => series.density((x - shift) / sd) / sd,
        }
    }

    /// P(ΔP ≤ x).
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            DeviationDensity::PointMass { at } => {
                if x >= *at {
                    1.0
                } else {
                    0.0
                }
            }
            DeviationDensity::Series { shift, sd, series } => series.cdf((x - shift) / sd),
        }
    }
}

/// P(P ≤ x) for power with the given mean and deviation density.
pub fn aggregate_cdf(mean: f64, pdf: &DeviationDensity, x: f64) -> f64 {
    pdf.cdf(x - mean).clamp(0.0, 1.0)
}

/// Aggregate power distribution at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerDistribution {
    pub mean: f64,
    pub cumulants: CumulantSet,
    pub deviation: DeviationDensity,
}

impl PowerDistribution {
    pub fn new(mean: f64, cumulants: CumulantSet) -> Self {
        let deviation = gram_charlier_pdf(&cumulants);
        Self {
            mean,
            cumulants,
            deviation,
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.cumulants.variance().max(0.0).sqrt()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.deviation.density(x - self.mean)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        aggregate_cdf(self.mean, &self.deviation, x)
    }
}
