//! Capacity-state models and their composition.
//!
//! A unit is a discrete distribution over available capacity, written as a
//! polynomial `Σ ρ_j z^{c_j}`. Units in parallel compose by adding capacities
//! and multiplying probabilities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance under which two capacities are the same state.
const CAPACITY_TOL: f64 = 1e-9;

fn same_capacity(a: f64, b: f64) -> bool {
    (a - b).abs() <= CAPACITY_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Capacity distribution at one time. Capacities are ascending and distinct.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lz {
    pub capacities: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl Lz {
    /// `1·z^0`, the identity of parallel composition.
    pub fn unit() -> Self {
        Self::point(0.0)
    }

    pub fn point(capacity: f64) -> Self {
        Self {
            capacities: vec![capacity],
            probabilities: vec![1.0],
        }
    }

    /// Build from arbitrary (capacity, probability) pairs, merging equal capacities.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let mut pairs: Vec<(f64, f64)> = pairs.into_iter().collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut capacities: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut probabilities: Vec<f64> = Vec::with_capacity(pairs.len());
        for (c, p) in pairs {
            match capacities.last() {
                Some(&last) if same_capacity(last, c) => *probabilities.last_mut().unwrap() += p,
                _ => {
                    capacities.push(c);
                    probabilities.push(p);
                }
            }
        }
        Self {
            capacities,
            probabilities,
        }
    }

    /// Two-state unit: full capacity with probability `available`, else zero.
    pub fn two_state(capacity: f64, available: f64) -> Self {
        Self::from_pairs([(0.0, 1.0 - available), (capacity, available)])
    }

    pub fn len(&self) -> usize {
        self.capacities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.capacities.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.capacities
            .iter()
            .copied()
            .zip(self.probabilities.iter().copied())
    }

    pub fn total_probability(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    pub fn expectation(&self) -> f64 {
        self.iter().map(|(c, p)| c * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.expectation();
        self.iter().map(|(c, p)| p * (c - m).powi(2)).sum()
    }

    /// Probability of the state with exactly this capacity.
    pub fn probability_of(&self, capacity: f64) -> f64 {
        self.iter()
            .find(|(c, _)| same_capacity(*c, capacity))
            .map_or(0.0, |(_, p)| p)
    }

    pub fn max_capacity(&self) -> f64 {
        self.capacities.last().copied().unwrap_or(0.0)
    }

    fn normalized(mut self) -> Self {
        let total = self.total_probability();
        if total > 0.0 {
            self.probabilities.iter_mut().for_each(|p| *p /= total);
        }
        self
    }
}

/// Parallel composition: capacities add, probabilities multiply.
pub fn lz_parallel_compose(a: &Lz, b: &Lz) -> Lz {
    let out = Lz::from_pairs(
        a.iter()
            .flat_map(|(ca, pa)| b.iter().map(move |(cb, pb)| (ca + cb, pa * pb)))
            .filter(|(_, p)| *p > 0.0),
    );
    if out.is_empty() {
        Lz::from_pairs(
            a.iter()
                .flat_map(|(ca, _)| b.iter().map(move |(cb, _)| (ca + cb, 0.0))),
        )
    } else {
        out
    }
}

/// Compose any number of polynomials, pruning after every step.
pub fn compose_all<'a>(
    polys: impl IntoIterator<Item = &'a Lz>,
    prob_floor: f64,
    max_states: usize,
) -> Lz {
    polys.into_iter().fold(Lz::unit(), |acc, p| {
        lz_reduce(&lz_parallel_compose(&acc, p), prob_floor, max_states)
    })
}

/// Drop negligible states, renormalize and cap the state count by merging the
/// closest neighbours at their probability-weighted capacity.
pub fn lz_reduce(poly: &Lz, prob_floor: f64, max_states: usize) -> Lz {
    let merged = Lz::from_pairs(poly.iter());
    if merged.len() <= 1 {
        return merged;
    }
    let kept: Vec<(f64, f64)> = merged
        .iter()
        .filter(|(_, p)| *p > 0.0 && *p >= prob_floor)
        .collect();
    let mut out = if kept.is_empty() {
        // keep the likeliest state rather than returning nothing
        let best = merged
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty");
        Lz::point(best.0)
    } else {
        Lz::from_pairs(kept).normalized()
    };
    let max_states = max_states.max(1);
    while out.len() > max_states {
        let i = (0..out.len() - 1)
            .min_by(|&i, &j| {
                let gi = out.capacities[i + 1] - out.capacities[i];
                let gj = out.capacities[j + 1] - out.capacities[j];
                gi.total_cmp(&gj)
            })
            .expect("at least two states");
        let (c0, p0) = (out.capacities[i], out.probabilities[i]);
        let (c1, p1) = (out.capacities[i + 1], out.probabilities[i + 1]);
        let p = p0 + p1;
        out.capacities[i] = if p > 0.0 {
            (c0 * p0 + c1 * p1) / p
        } else {
            0.5 * (c0 + c1)
        };
        out.probabilities[i] = p;
        out.capacities.remove(i + 1);
        out.probabilities.remove(i + 1);
    }
    out
}

/// Reserve capacity levels and the spacing that produced each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateGrid {
    pub capacities: Vec<f64>,
    /// Spacing from each level to the next (the last entry repeats the final step).
    pub spacings: Vec<f64>,
}

impl StateGrid {
    pub fn len(&self) -> usize {
        self.capacities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.capacities.is_empty()
    }
}

/// Levels from zero up to `max_rc`, each step the local standard deviation of
/// the reserve at that level, floored at `max_rc / 50`.
pub fn discretize_reserve_states(max_rc: f64, sigma_at: impl Fn(f64) -> f64) -> Result<StateGrid> {
    if !(max_rc >= 0.0) || !max_rc.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "max reserve must be finite and nonnegative, got {max_rc}"
        )));
    }
    if max_rc == 0.0 {
        return Ok(StateGrid {
            capacities: vec![0.0],
            spacings: vec![0.0],
        });
    }
    let floor = max_rc / 50.0;
    let stop = max_rc * (1.0 - 1e-9);
    let mut capacities = vec![0.0];
    let mut spacings = Vec::new();
    let mut level = 0.0;
    while level < stop {
        let s = sigma_at(level);
        let step = if s.is_finite() { s.max(floor) } else { floor };
        level += step;
        capacities.push(level);
        spacings.push(step);
    }
    spacings.push(*spacings.last().expect("at least one step"));
    Ok(StateGrid {
        capacities,
        spacings,
    })
}

/// Probability of each reserve level given the CDF of aggregate power.
///
/// Level j collects the power values whose reserve `P0 - P` is closer to it
/// than to its neighbours; the outer levels absorb the tails.
pub fn ort_state_probabilities(grid: &StateGrid, p0: f64, cdf: impl Fn(f64) -> f64) -> Vec<f64> {
    let n = grid.len();
    let rc = &grid.capacities;
    // F at the power value of each inner edge, edges ordered by ascending reserve
    let edge_cdf: Vec<f64> = (0..n.saturating_sub(1))
        .map(|j| cdf(p0 - 0.5 * (rc[j] + rc[j + 1])).clamp(0.0, 1.0))
        .collect();
    let mut probs: Vec<f64> = (0..n)
        .map(|j| {
            let upper_p = if j == 0 { 1.0 } else { edge_cdf[j - 1] };
            let lower_p = if j + 1 == n { 0.0 } else { edge_cdf[j] };
            (upper_p - lower_p).max(0.0)
        })
        .collect();
    let total: f64 = probs.iter().sum();
    if total > 0.0 {
        probs.iter_mut().for_each(|p| *p /= total);
    } else {
        probs[0] = 1.0;
    }
    probs
}

/// ORT polynomial at one time. Before deployment all mass sits at zero reserve;
/// afterwards `standby_failure` of the nonzero-reserve mass is moved to zero.
pub fn ort_lz(grid: &StateGrid, probabilities: &[f64], deployed: bool, standby_failure: f64) -> Lz {
    if !deployed {
        return Lz::unit();
    }
    let keep = 1.0 - standby_failure.clamp(0.0, 1.0);
    let mut pairs: Vec<(f64, f64)> = grid
        .capacities
        .iter()
        .zip(probabilities)
        .map(|(c, p)| (*c, if *c == 0.0 { *p } else { p * keep }))
        .collect();
    let lost: f64 = 1.0 - pairs.iter().map(|(_, p)| p).sum::<f64>();
    pairs.push((0.0, lost.max(0.0)));
    Lz::from_pairs(pairs)
}

/// Probability that a two-state Markov unit is up after `t` hours.
pub fn unit_availability(lambda: f64, mu: f64, t: f64, initially_up: bool) -> Result<f64> {
    if !(lambda >= 0.0) || !(mu >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "transition rates must be nonnegative, got failure {lambda}, repair {mu}"
        )));
    }
    let total = lambda + mu;
    let start = if initially_up { 1.0 } else { 0.0 };
    if total == 0.0 {
        return Ok(start);
    }
    let steady = mu / total;
    Ok(steady + (start - steady) * (-total * t.max(0.0)).exp())
}

/// Wind turbine power curve as a fraction of rating.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    #[serde(default = "default_cut_in")]
    pub cut_in: f64,
    #[serde(default = "default_rated_speed")]
    pub rated_speed: f64,
    #[serde(default = "default_cut_out")]
    pub cut_out: f64,
}

fn default_cut_in() -> f64 {
    4.0
}

fn default_rated_speed() -> f64 {
    15.0
}

fn default_cut_out() -> f64 {
    25.0
}

impl Default for PowerCurve {
    fn default() -> Self {
        Self {
            cut_in: default_cut_in(),
            rated_speed: default_rated_speed(),
            cut_out: default_cut_out(),
        }
    }
}

impl PowerCurve {
    pub fn fraction(&self, speed: f64) -> f64 {
        if speed < self.cut_in || speed >= self.cut_out {
            0.0
        } else if speed >= self.rated_speed {
            1.0
        } else {
            let ci3 = self.cut_in.powi(3);
            (speed.powi(3) - ci3) / (self.rated_speed.powi(3) - ci3)
        }
    }
}

fn binomial_pmf(n: usize, k: usize, p: f64) -> f64 {
    let mut c = 1.0;
    for i in 0..k {
        c *= (n - i) as f64 / (i + 1) as f64;
    }
    c * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
}

/// How a unit's state distribution is obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitModel {
    /// Fixed (capacity, probability) table.
    Table { states: Vec<(f64, f64)> },
    /// Repairable unit with failure rate `lambda` and repair rate `mu` (1/h).
    TwoState {
        capacity_mw: f64,
        lambda: f64,
        mu: f64,
        #[serde(default = "yes")]
        initially_up: bool,
    },
    /// Wind farm driven by a static wind-speed distribution.
    Wind {
        turbines: usize,
        rated_mw: f64,
        #[serde(default)]
        curve: PowerCurve,
        /// (speed m/s, probability)
        speed_states: Vec<(f64, f64)>,
        #[serde(default = "one")]
        turbine_availability: f64,
    },
}

fn yes() -> bool {
    true
}

fn one() -> f64 {
    1.0
}

impl UnitModel {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        match self {
            UnitModel::Table { states } => {
                if states.is_empty() || states.iter().any(|(c, p)| !(*c >= 0.0) || !(*p >= 0.0)) {
                    return bad(format!(
                        "state table must be nonempty with nonnegative entries: {states:?}"
                    ));
                }
                let total: f64 = states.iter().map(|s| s.1).sum();
                if (total - 1.0).abs() > 1e-6 {
                    return bad(format!("state probabilities sum to {total}"));
                }
            }
            UnitModel::TwoState {
                capacity_mw,
                lambda,
                mu,
                ..
            } => {
                if !(*capacity_mw >= 0.0) {
                    return bad(format!("capacity must be nonnegative, got {capacity_mw}"));
                }
                unit_availability(*lambda, *mu, 0.0, true)
                    .map_err(|e| Error::Config(e.to_string()))?;
            }
            UnitModel::Wind {
                rated_mw,
                curve,
                speed_states,
                turbine_availability,
                ..
            } => {
                if !(*rated_mw >= 0.0) || !(0.0..=1.0).contains(turbine_availability) {
                    return bad("wind farm rating or availability out of range".into());
                }
                if !(curve.cut_in < curve.rated_speed && curve.rated_speed <= curve.cut_out) {
                    return bad(format!("power curve speeds out of order: {curve:?}"));
                }
                let total: f64 = speed_states.iter().map(|s| s.1).sum();
                if speed_states.is_empty() || (total - 1.0).abs() > 1e-6 {
                    return bad(format!("wind speed probabilities sum to {total}"));
                }
            }
        }
        Ok(())
    }

    /// State distribution `t` hours after the unit was put in service.
    pub fn lz_at(&self, t: f64) -> Result<Lz> {
        Ok(match self {
            UnitModel::Table { states } => Lz::from_pairs(states.iter().copied()),
            UnitModel::TwoState {
                capacity_mw,
                lambda,
                mu,
                initially_up,
            } => Lz::two_state(
                *capacity_mw,
                unit_availability(*lambda, *mu, t, *initially_up)?,
            ),
            UnitModel::Wind {
                turbines,
                rated_mw,
                curve,
                speed_states,
                turbine_availability,
            } => {
                let n = *turbines;
                Lz::from_pairs(speed_states.iter().flat_map(|&(v, pv)| {
                    let per_turbine = rated_mw * curve.fraction(v);
                    (0..=n).map(move |k| {
                        (
                            k as f64 * per_turbine,
                            pv * binomial_pmf(n, k, *turbine_availability),
                        )
                    })
                }))
            }
        })
    }
}

/// Conventional reserve unit: started at `commit_h` and available after `lead_h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConventionalReserve {
    pub capacity_mw: f64,
    pub lambda: f64,
    pub mu: f64,
    pub commit_h: f64,
    pub lead_h: f64,
}

impl ConventionalReserve {
    pub fn online_from(&self) -> f64 {
        self.commit_h + self.lead_h
    }

    pub fn lz_at(&self, t: f64) -> Result<Lz> {
        if t < self.online_from() {
            return Ok(Lz::unit());
        }
        Ok(Lz::two_state(
            self.capacity_mw,
            unit_availability(self.lambda, self.mu, t - self.online_from(), true)?,
        ))
    }
}

/// ORT combined with the conventional reserve units online at `t`.
pub fn hybrid_reserve_lz(ort: &Lz, conventional: &[ConventionalReserve], t: f64) -> Result<Lz> {
    let mut out = ort.clone();
    for unit in conventional {
        out = lz_parallel_compose(&out, &unit.lz_at(t)?);
    }
    Ok(out)
}

/// Generation and reserve of one bus as a single equivalent provider.
pub fn hybrid_generation_reserve_lz(generation: &Lz, reserve: &Lz) -> Lz {
    lz_parallel_compose(generation, reserve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use statrs::function::erf::erf;

    fn assert_lz_eq(a: &Lz, b: &Lz) {
        assert_eq!(a.len(), b.len(), "{a:?} vs {b:?}");
        for ((ca, pa), (cb, pb)) in a.iter().zip(b.iter()) {
            assert!(
                (ca - cb).abs() < 1e-9 && (pa - pb).abs() < 1e-12,
                "{a:?} vs {b:?}"
            );
        }
    }

    #[test]
    fn compose_examples() {
        let a = Lz::from_pairs([(0.0, 0.8), (10.0, 0.2)]);
        let b = Lz::from_pairs([(0.0, 0.5), (40.0, 0.5)]);
        assert_lz_eq(&lz_parallel_compose(&a, &Lz::unit()), &a);
        let ab = lz_parallel_compose(&a, &b);
        assert_lz_eq(
            &ab,
            &Lz::from_pairs([(0.0, 0.4), (10.0, 0.1), (40.0, 0.4), (50.0, 0.1)]),
        );
    }

    #[test]
    fn reduce_examples() {
        let merged = lz_reduce(&Lz::from_pairs([(5.0, 0.3), (5.0, 0.2)]), 0.0, 10);
        assert_lz_eq(&merged, &Lz::from_pairs([(5.0, 0.5)]));
        let single = Lz::point(7.0);
        assert_eq!(lz_reduce(&single, 1e-4, 1), single);

        let poly =
            Lz::from_pairs((0..200).map(|i| (i as f64, if i % 7 == 0 { 1e-9 } else { 1.0 })));
        let poly = poly.normalized();
        let reduced = lz_reduce(&poly, 1e-8, 5000);
        let rel = (reduced.expectation() - poly.expectation()).abs() / poly.expectation();
        assert!(rel < 1e-6, "{rel}");

        let capped = lz_reduce(&poly, 0.0, 20);
        assert_eq!(capped.len(), 20);
        assert!((capped.total_probability() - 1.0).abs() < 1e-12);
        assert!((capped.expectation() - poly.expectation()).abs() < 1e-9);
    }

    #[test]
    fn grid_examples() {
        let g = discretize_reserve_states(0.0, |_| 1.0).unwrap();
        assert_eq!(g.capacities, vec![0.0]);
        let g = discretize_reserve_states(180.0, |_| 12.0).unwrap();
        assert_eq!(g.len(), 16);
        assert!((g.capacities[15] - 180.0).abs() < 1e-9);
        let g = discretize_reserve_states(180.0, |_| 0.0).unwrap();
        assert_eq!(g.len(), 51);
        let g = discretize_reserve_states(100.0, |x| 5.0 + x / 10.0).unwrap();
        assert!(g.capacities.windows(2).all(|w| w[1] > w[0]));
        assert!(*g.capacities.last().unwrap() >= 100.0);
        assert!(discretize_reserve_states(-1.0, |_| 1.0).is_err());
    }

    fn normal_cdf(mean: f64, sd: f64) -> impl Fn(f64) -> f64 {
        move |x| 0.5 * (1.0 + erf((x - mean) / (sd * std::f64::consts::SQRT_2)))
    }

    #[test]
    fn ort_probabilities() {
        let grid = discretize_reserve_states(180.0, |_| 12.0).unwrap();
        let p0 = 200.0;
        let point = ort_state_probabilities(&grid, p0, |x| if x >= p0 { 1.0 } else { 0.0 });
        assert_eq!(point[0], 1.0);
        assert!(point[1..].iter().all(|p| *p == 0.0));

        let probs = ort_state_probabilities(&grid, p0, normal_cdf(p0 - 90.0, 12.0));
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // error-function oracle: mass of each bin of width 12 around RC_j
        let z = |x: f64| 0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2));
        for (j, rc) in grid.capacities.iter().enumerate() {
            let lo = if j == 0 {
                f64::NEG_INFINITY
            } else {
                (rc - 6.0 - 90.0) / 12.0
            };
            let hi = if j == 15 {
                f64::INFINITY
            } else {
                (rc + 6.0 - 90.0) / 12.0
            };
            let expected = z(hi) - z(lo);
            assert!((probs[j] - expected).abs() < 1e-12, "{j}");
        }
        assert!((probs[7] + probs[8]) > 0.6);
    }

    #[test]
    fn ort_polynomial_and_standby_failure() {
        let grid = discretize_reserve_states(36.0, |_| 12.0).unwrap();
        let probs = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(ort_lz(&grid, &probs, false, 0.0), Lz::unit());
        let lz = ort_lz(&grid, &probs, true, 0.0);
        assert_lz_eq(
            &lz,
            &Lz::from_pairs([(0.0, 0.1), (12.0, 0.2), (24.0, 0.3), (36.0, 0.4)]),
        );
        let failed = ort_lz(&grid, &probs, true, 0.1);
        assert!((failed.probability_of(0.0) - 0.19).abs() < 1e-12);
        assert!((failed.total_probability() - 1.0).abs() < 1e-12);
    }

    /// Forward-Euler integration of the two-state chain.
    fn ctmc(lambda: f64, mu: f64, t: f64) -> f64 {
        let n = 1_000_000;
        let h = t / n as f64;
        let mut up = 1.0;
        for _ in 0..n {
            up += h * (mu * (1.0 - up) - lambda * up);
        }
        up
    }

    #[test]
    fn availability_examples() {
        assert_eq!(unit_availability(0.0, 0.1, 5.0, true).unwrap(), 1.0);
        assert_eq!(unit_availability(0.0, 0.0, 5.0, false).unwrap(), 0.0);
        let long = unit_availability(0.01, 0.1, 1e4, true).unwrap();
        assert!((long - ctmc(0.01, 0.1, 500.0)).abs() < 1e-5);
        assert!((long - 0.90909).abs() < 1e-5);
        let one = unit_availability(0.01, 0.1, 1.0, true).unwrap();
        assert!((one - ctmc(0.01, 0.1, 1.0)).abs() < 1e-6);
        assert!((one - 0.99053).abs() < 1e-5);
        assert!(unit_availability(-0.1, 0.1, 1.0, true).is_err());
    }

    #[test]
    fn hybrid_reserve_examples() {
        let ort = Lz::from_pairs([(0.0, 0.3), (60.0, 0.7)]);
        assert_eq!(hybrid_reserve_lz(&ort, &[], 1.0).unwrap(), ort);
        let unit = ConventionalReserve {
            capacity_mw: 40.0,
            lambda: 0.02,
            mu: 0.2,
            commit_h: 0.5,
            lead_h: 0.5,
        };
        assert_eq!(
            hybrid_reserve_lz(&ort, std::slice::from_ref(&unit), 0.99).unwrap(),
            ort
        );
        let a = unit_availability(0.02, 0.2, 1.0, true).unwrap();
        let h = hybrid_reserve_lz(&ort, std::slice::from_ref(&unit), 2.0).unwrap();
        assert_lz_eq(
            &h,
            &Lz::from_pairs([
                (0.0, 0.3 * (1.0 - a)),
                (40.0, 0.3 * a),
                (60.0, 0.7 * (1.0 - a)),
                (100.0, 0.7 * a),
            ]),
        );
        let perfect = ConventionalReserve {
            lambda: 0.0,
            ..unit
        };
        let five = vec![perfect; 5];
        let shifted = hybrid_reserve_lz(&ort, &five, 2.0).unwrap();
        assert_lz_eq(&shifted, &Lz::from_pairs([(200.0, 0.3), (260.0, 0.7)]));
    }

    #[test]
    fn generation_reserve_examples() {
        let g = Lz::two_state(100.0, 0.9);
        assert_eq!(hybrid_generation_reserve_lz(&g, &Lz::unit()), g);
        let r = Lz::two_state(30.0, 0.8);
        let both = hybrid_generation_reserve_lz(&g, &r);
        assert_eq!(both.len(), 4);
        assert!((both.expectation() - (g.expectation() + r.expectation())).abs() < 1e-9);
    }

    #[test]
    fn wind_states() {
        let curve = PowerCurve::default();
        assert_eq!(curve.fraction(3.0), 0.0);
        assert_eq!(curve.fraction(15.0), 1.0);
        assert_eq!(curve.fraction(25.0), 0.0);
        let farm = UnitModel::Wind {
            turbines: 2,
            rated_mw: 5.0,
            curve,
            speed_states: vec![(2.0, 0.2), (10.0, 0.5), (20.0, 0.3)],
            turbine_availability: 0.9,
        };
        farm.validate().unwrap();
        let lz = farm.lz_at(0.0).unwrap();
        assert!((lz.total_probability() - 1.0).abs() < 1e-12);
        let f10 = curve.fraction(10.0);
        let expected = 2.0 * 0.9 * 5.0 * (0.5 * f10 + 0.3);
        assert!((lz.expectation() - expected).abs() < 1e-9);
    }

    fn joint_enumeration(units: &[Lz]) -> Lz {
        let mut pairs = vec![(0.0, 1.0)];
        for u in units {
            pairs = pairs
                .iter()
                .flat_map(|&(c, p)| u.iter().map(move |(cu, pu)| (c + cu, p * pu)))
                .collect();
        }
        Lz::from_pairs(pairs)
    }

    fn arb_lz() -> impl Strategy<Value = Lz> {
        prop::collection::vec((0u32..20, 0.01f64..1.0), 1..=5).prop_map(|states| {
            let total: f64 = states.iter().map(|s| s.1).sum();
            Lz::from_pairs(states.into_iter().map(|(c, p)| (c as f64 * 5.0, p / total)))
        })
    }

    proptest! {
        #[test]
        fn composition_matches_enumeration(units in prop::collection::vec(arb_lz(), 1..=4)) {
            let composed = units.iter().fold(Lz::unit(), |acc, u| lz_parallel_compose(&acc, u));
            let brute = joint_enumeration(&units);
            prop_assert_eq!(composed.len(), brute.len());
            for ((ca, pa), (cb, pb)) in composed.iter().zip(brute.iter()) {
                prop_assert!((ca - cb).abs() < 1e-9 && (pa - pb).abs() < 1e-12);
            }
            prop_assert!((composed.total_probability() - 1.0).abs() < 1e-9);
            let mean: f64 = units.iter().map(Lz::expectation).sum();
            let var: f64 = units.iter().map(Lz::variance).sum();
            prop_assert!((composed.expectation() - mean).abs() < 1e-9 * mean.max(1.0));
            prop_assert!((composed.variance() - var).abs() < 1e-7 * var.max(1.0));
        }

        #[test]
        fn composition_order_free(a in arb_lz(), b in arb_lz(), c in arb_lz()) {
            let left = lz_parallel_compose(&lz_parallel_compose(&a, &b), &c);
            let right = lz_parallel_compose(&c, &lz_parallel_compose(&b, &a));
            prop_assert_eq!(left.len(), right.len());
            for ((ca, pa), (cb, pb)) in left.iter().zip(right.iter()) {
                prop_assert!((ca - cb).abs() < 1e-9 && (pa - pb).abs() < 1e-12);
            }
        }

        #[test]
        fn ort_mass_conserved(mean in 0.0f64..250.0, sd in 0.1f64..40.0, sigma in 1.0f64..30.0) {
            let grid = discretize_reserve_states(180.0, |_| sigma).unwrap();
            let probs = ort_state_probabilities(&grid, 200.0, normal_cdf(mean, sd));
            prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(probs.iter().all(|p| *p >= 0.0));
        }
    }
}
