//! Network model and minimum load curtailment by DC optimal power flow.

use std::collections::{HashMap, VecDeque};

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multistate::Lz;

/// System MVA base for per-unit reactances.
pub const BASE_MVA: f64 = 100.0;
/// Curtailment below this (MW) counts as none.
pub const EPS_LC: f64 = 1e-6;
/// Tolerance of the post-solve balance and flow checks (MW).
const CHECK_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusSpec {
    pub id: usize,
    #[serde(default)]
    pub load_mw: f64,
    /// (minute, MW) points, linearly interpolated and held at the ends.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load_trace: Option<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineSpec {
    pub from: usize,
    pub to: usize,
    pub x_pu: f64,
    pub limit_mw: f64,
}

/// Line availability pattern with its probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkStateSpec {
    pub available: Vec<bool>,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub buses: Vec<BusSpec>,
    pub lines: Vec<LineSpec>,
    pub reference_bus: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub network_states: Vec<NetworkStateSpec>,
}

fn interpolate(points: &[(f64, f64)], x: f64) -> f64 {
    match points {
        [] => 0.0,
        [(_, y)] => *y,
        _ => {
            if x <= points[0].0 {
                return points[0].1;
            }
            for w in points.windows(2) {
                let ((x0, y0), (x1, y1)) = (w[0], w[1]);
                if x <= x1 {
                    return if x1 > x0 {
                        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
                    } else {
                        y1
                    };
                }
            }
            points[points.len() - 1].1
        }
    }
}

/// Validated network with buses indexed `0..n` in the order given.
#[derive(Debug, Clone)]
pub struct Network {
    pub spec: NetworkSpec,
    index: HashMap<usize, usize>,
    /// (from index, to index, x, limit)
    lines: Vec<(usize, usize, f64, f64)>,
    pub reference: usize,
    states: Vec<NetworkStateSpec>,
}

impl Network {
    pub fn new(spec: NetworkSpec) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, b) in spec.buses.iter().enumerate() {
            if index.insert(b.id, i).is_some() {
                return Err(Error::Config(format!("duplicate bus id {}", b.id)));
            }
            if !(b.load_mw >= 0.0) {
                return Err(Error::Config(format!("bus {} has negative load", b.id)));
            }
        }
        let lookup = |id: usize| {
            index
                .get(&id)
                .copied()
                .ok_or_else(|| Error::Config(format!("unknown bus id {id}")))
        };
        let reference = lookup(spec.reference_bus)?;
        let lines = spec
            .lines
            .iter()
            .map(|l| {
                if !(l.x_pu > 0.0) || !(l.limit_mw > 0.0) {
                    return Err(Error::Config(format!(
                        "line {}-{} needs positive reactance and limit",
                        l.from, l.to
                    )));
                }
                Ok((lookup(l.from)?, lookup(l.to)?, l.x_pu, l.limit_mw))
            })
            .collect::<Result<Vec<_>>>()?;
        let states = if spec.network_states.is_empty() {
            vec![NetworkStateSpec {
                available: vec![true; lines.len()],
                probability: 1.0,
            }]
        } else {
            spec.network_states.clone()
        };
        for s in &states {
            if s.available.len() != lines.len() {
                return Err(Error::Config(
                    "network state mask length differs from line count".into(),
                ));
            }
        }
        let total: f64 = states.iter().map(|s| s.probability).sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::Config(format!(
                "network state probabilities sum to {total}"
            )));
        }
        let net = Self {
            spec,
            index,
            lines,
            reference,
            states,
        };
        for (k, s) in net.states.iter().enumerate() {
            if s.probability > 0.0 {
                net.check_connected(k)?;
            }
        }
        Ok(net)
    }

    pub fn bus_count(&self) -> usize {
        self.spec.buses.len()
    }

    pub fn line_count(&self) -> usize {
        self.lines.len()
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn state_probability(&self, k: usize) -> f64 {
        self.states[k].probability
    }

    pub fn bus_index(&self, id: usize) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn bus_ids(&self) -> Vec<usize> {
        self.spec.buses.iter().map(|b| b.id).collect()
    }

    /// Bus loads (MW) at `t` hours.
    pub fn loads_at(&self, t: f64) -> Vec<f64> {
        self.spec
            .buses
            .iter()
            .map(|b| match &b.load_trace {
                Some(tr) => interpolate(tr, t * 60.0),
                None => b.load_mw,
            })
            .collect()
    }

    fn check_connected(&self, state: usize) -> Result<()> {
        let n = self.bus_count();
        let mut adj = vec![Vec::new(); n];
        for (l, &(f, t, _, _)) in self.lines.iter().enumerate() {
            if self.states[state].available[l] {
                adj[f].push(t);
                adj[t].push(f);
            }
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([self.reference]);
        seen[self.reference] = true;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        let isolated: Vec<usize> = (0..n)
            .filter(|&i| !seen[i])
            .map(|i| self.spec.buses[i].id)
            .collect();
        if isolated.is_empty() {
            Ok(())
        } else {
            Err(Error::Disconnected { isolated })
        }
    }
}

/// Full DC susceptance matrix (per unit) for a network state.
pub fn build_susceptance(network: &Network, state: usize) -> Result<DMatrix<f64>> {
    network.check_connected(state)?;
    let n = network.bus_count();
    let mut b = DMatrix::zeros(n, n);
    for (l, &(f, t, x, _)) in network.lines.iter().enumerate() {
        if !network.states[state].available[l] {
            continue;
        }
        let y = 1.0 / x;
        b[(f, f)] += y;
        b[(t, t)] += y;
        b[(f, t)] -= y;
        b[(t, f)] -= y;
    }
    Ok(b)
}

/// Line flow sensitivities to bus injections, with the reference bus as slack.
pub fn ptdf(network: &Network, state: usize) -> Result<DMatrix<f64>> {
    let b = build_susceptance(network, state)?;
    let n = network.bus_count();
    let r = network.reference;
    let keep: Vec<usize> = (0..n).filter(|&i| i != r).collect();
    let mut x = DMatrix::zeros(n, n);
    if !keep.is_empty() {
        let reduced = b.select_rows(&keep).select_columns(&keep);
        let inv = reduced.lu().try_inverse().ok_or_else(|| Error::Numerical {
            state,
            reason: "singular reduced susceptance matrix".into(),
        })?;
        for (a, &i) in keep.iter().enumerate() {
            for (c, &j) in keep.iter().enumerate() {
                x[(i, j)] = inv[(a, c)];
            }
        }
    }
    let m = network.line_count();
    let mut out = DMatrix::zeros(m, n);
    for (l, &(f, t, xl, _)) in network.lines.iter().enumerate() {
        if !network.states[state].available[l] {
            continue;
        }
        for i in 0..n {
            // per-unit angles times BASE_MVA, per-unit injection divided by it
            out[(l, i)] = (x[(f, i)] - x[(t, i)]) / xl;
        }
    }
    Ok(out)
}

/// Result of one curtailment solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curtailment {
    pub per_bus: Vec<f64>,
    pub total: f64,
    pub generation: Vec<f64>,
}

/// Minimum-curtailment DC-OPF for one network state.
#[derive(Debug, Clone)]
pub struct OpfSolver {
    network: Network,
    ptdfs: Vec<DMatrix<f64>>,
}

impl OpfSolver {
    pub fn new(network: Network) -> Result<Self> {
        let ptdfs = (0..network.state_count())
            .map(|k| ptdf(&network, k))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { network, ptdfs })
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    /// Minimize Σ w_i·LC_i with w_i = 1 + i·1e-6, subject to balance,
    /// generation limits `0 ≤ p ≤ ag` and line limits.
    pub fn min_total_curtailment(
        &self,
        ag: &[f64],
        loads: &[f64],
        state: usize,
    ) -> Result<Curtailment> {
        let n = self.network.bus_count();
        if ag.len() != n || loads.len() != n {
            return Err(Error::InvalidArgument(format!(
                "expected {n} bus values, got {} generation and {} load",
                ag.len(),
                loads.len()
            )));
        }
        if ag.iter().chain(loads).any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidArgument(
                "generation and load must be nonnegative".into(),
            ));
        }
        let total_load: f64 = loads.iter().sum();
        let mut lp = Problem::new(OptimizationDirection::Minimize);
        let p: Vec<_> = ag
            .iter()
            .map(|&a| (a > 0.0).then(|| lp.add_var(0.0, (0.0, a))))
            .collect();
        let lc: Vec<_> = loads
            .iter()
            .enumerate()
            .map(|(i, &d)| (d > 0.0).then(|| lp.add_var(1.0 + i as f64 * 1e-6, (0.0, d))))
            .collect();
        let mut balance = Vec::new();
        for i in 0..n {
            if let Some(v) = p[i] {
                balance.push((v, 1.0));
            }
            if let Some(v) = lc[i] {
                balance.push((v, 1.0));
            }
        }
        if balance.is_empty() {
            return Ok(Curtailment {
                per_bus: vec![0.0; n],
                total: 0.0,
                generation: vec![0.0; n],
            });
        }
        lp.add_constraint(balance.as_slice(), ComparisonOp::Eq, total_load);
        let h = &self.ptdfs[state];
        for (l, &(_, _, _, limit)) in self.network.lines.iter().enumerate() {
            if !self.network.states[state].available[l] {
                continue;
            }
            let mut expr = Vec::new();
            let mut offset = 0.0;
            for i in 0..n {
                let k = h[(l, i)];
                if k.abs() < 1e-12 {
                    continue;
                }
                offset += k * loads[i];
                if let Some(v) = p[i] {
                    expr.push((v, k));
                }
                if let Some(v) = lc[i] {
                    expr.push((v, k));
                }
            }
            if expr.is_empty() {
                continue;
            }
            lp.add_constraint(expr.as_slice(), ComparisonOp::Le, limit + offset);
            lp.add_constraint(expr.as_slice(), ComparisonOp::Ge, -limit + offset);
        }
        let solution = lp
            .solve()
            .map_err(|e| Error::Numerical {
                state,
                reason: format!("curtailment LP failed: {e}"),
            })?
            .into_solution()
            .map_err(|_| Error::Numerical {
                state,
                reason: "curtailment LP interrupted".into(),
            })?;
        let value = |v: Option<microlp::Variable>| v.map_or(0.0, |v| solution.var_value(v));
        let generation: Vec<f64> = p.iter().map(|v| value(*v).max(0.0)).collect();
        let per_bus: Vec<f64> = (0..n).map(|i| value(lc[i]).clamp(0.0, loads[i])).collect();
        let total = per_bus.iter().sum();
        let out = Curtailment {
            per_bus,
            total,
            generation,
        };
        self.verify(&out, ag, loads, state)?;
        Ok(out)
    }

    /// Line flows (MW) for a dispatch.
    pub fn flows(&self, c: &Curtailment, loads: &[f64], state: usize) -> Vec<f64> {
        let h = &self.ptdfs[state];
        let inj: Vec<f64> = (0..loads.len())
            .map(|i| c.generation[i] - (loads[i] - c.per_bus[i]))
            .collect();
        (0..self.network.line_count())
            .map(|l| (0..inj.len()).map(|i| h[(l, i)] * inj[i]).sum())
            .collect()
    }

    fn verify(&self, c: &Curtailment, ag: &[f64], loads: &[f64], state: usize) -> Result<()> {
        let served: f64 = loads.iter().sum::<f64>() - c.total;
        let generated: f64 = c.generation.iter().sum();
        let scale = served.abs().max(1.0);
        if (served - generated).abs() > CHECK_TOL * scale {
            return Err(Error::Numerical {
                state,
                reason: format!("power balance off by {} MW", served - generated),
            });
        }
        if c.generation
            .iter()
            .zip(ag)
            .any(|(p, a)| *p > a + CHECK_TOL * a.max(1.0))
        {
            return Err(Error::Numerical {
                state,
                reason: "generation above available capacity".into(),
            });
        }
        for (flow, &(_, _, _, limit)) in self.flows(c, loads, state).iter().zip(&self.network.lines)
        {
            if flow.abs() > limit + CHECK_TOL * limit.max(1.0) {
                return Err(Error::Numerical {
                    state,
                    reason: format!("flow {flow} MW exceeds limit {limit} MW"),
                });
            }
        }
        Ok(())
    }
}

/// One joint state: available generation per bus, network state and probability.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub ag: Vec<f64>,
    pub network_state: usize,
    pub probability: f64,
}

/// Cartesian product of independent bus polynomials and network states.
/// Partial products below `prob_floor` are dropped and the rest renormalized.
pub fn enumerate_system_states(
    bus_polys: &[Lz],
    network: &Network,
    prob_floor: f64,
    cap: usize,
) -> Result<Vec<SystemState>> {
    let n = network.bus_count();
    if bus_polys.len() != n {
        return Err(Error::InvalidArgument(format!(
            "{} bus polynomials for {n} buses",
            bus_polys.len()
        )));
    }
    let mut partial: Vec<(Vec<f64>, f64)> = vec![(Vec::with_capacity(n), 1.0)];
    for poly in bus_polys {
        let mut next = Vec::with_capacity(partial.len() * poly.len());
        for (ag, p) in &partial {
            for (c, q) in poly.iter() {
                let pq = p * q;
                if pq > 0.0 && pq >= prob_floor {
                    let mut v = ag.clone();
                    v.push(c);
                    next.push((v, pq));
                }
            }
        }
        if next.len() * network.state_count() > cap {
            return Err(Error::StateOverflow {
                count: next.len() * network.state_count(),
                cap,
            });
        }
        partial = next;
    }
    let mut states = Vec::with_capacity(partial.len() * network.state_count());
    for (ag, p) in partial {
        for k in 0..network.state_count() {
            let pk = p * network.state_probability(k);
            if pk > 0.0 && pk >= prob_floor {
                states.push(SystemState {
                    ag: ag.clone(),
                    network_state: k,
                    probability: pk,
                });
            }
        }
    }
    let total: f64 = states.iter().map(|s| s.probability).sum();
    if total > 0.0 {
        states.iter_mut().for_each(|s| s.probability /= total);
    }
    Ok(states)
}
