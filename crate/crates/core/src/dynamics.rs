//! Expected ON/OFF durations of a cluster while its temperatures migrate into a
//! raised hysteresis band, and the resulting aggregate power and reserve.
//!
//! After the setpoint is raised by β at `t_s`, devices that were ON keep
//! cooling to the old lower edge and devices that were OFF keep warming to the
//! new upper edge. With the cluster uniformly phased over its steady cycle, the
//! expected on/off times are affine in `s = t - t_s` on a handful of
//! intervals; which intervals occur depends on whether the ON population
//! empties before the first OFF device reaches the new edge, and whether the
//! new cycle is longer than the old one (a gap opens in the phase density).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::population::{Cluster, Device};
use crate::thermal::{migration_delay, shifted_cycle_times, steady_cycle_times};

/// Floor applied to the expected off time.
pub const MIN_OFF_TIME: f64 = 1e-9;
/// Cycle lengths closer than this count as equal (no gap).
pub const GAP_TOL: f64 = 1e-9;

/// Base quantities every interval formula is built from (hours).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimelineTimes {
    pub on0: f64,
    pub off0: f64,
    pub on_new: f64,
    pub off_new: f64,
    pub delay: f64,
}

impl TimelineTimes {
    pub fn compute(device: &Device, ambient: f64, beta: f64) -> Result<Self> {
        let base = steady_cycle_times(&device.params, &device.band, ambient)?;
        let new = shifted_cycle_times(&device.params, &device.band, ambient, beta)?;
        let delay = migration_delay(&device.params, &device.band, ambient, beta)?;
        Ok(Self {
            on0: base.on,
            off0: base.off,
            on_new: new.on,
            off_new: new.off,
            delay,
        })
    }

    pub fn old_cycle(&self) -> f64 {
        self.on0 + self.off0
    }

    pub fn new_cycle(&self) -> f64 {
        self.on_new + self.off_new
    }

    pub fn branch(&self) -> Branch {
        if self.on0 < self.delay {
            Branch::OnEmptiesFirst
        } else {
            Branch::OffArrivesFirst
        }
    }

    pub fn gap(&self) -> Gap {
        if self.old_cycle() < self.new_cycle() - GAP_TOL {
            Gap::Gap
        } else {
            Gap::NoGap
        }
    }
}

/// Which population runs out first after deployment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    /// All ON devices switch off before any OFF device reaches the new upper edge.
    OnEmptiesFirst,
    /// The first OFF device switches on while old ON devices are still running.
    OffArrivesFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Gap {
    /// Old cycle shorter than the new one.
    Gap,
    NoGap,
}

/// `constant + slope·s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub constant: f64,
    pub slope: f64,
}

impl Affine {
    fn constant(c: f64) -> Self {
        Self {
            constant: c,
            slope: 0.0,
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.constant + self.slope * s
    }
}

/// The interval formulas, named by the migration phase they describe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PieceKind {
    /// Before deployment.
    SteadyOld,
    /// ON devices drain towards the old lower edge, no device switches on.
    Draining,
    /// Every device is OFF.
    AllOff,
    /// OFF devices arrive at the new upper edge while old ON devices still run.
    EarlyArrival,
    /// Arrivals at the new upper edge fill the ON population.
    Refill,
    /// Gap case: ON time already new, stragglers of the old cycle still OFF.
    GapPlateau,
    /// Gap case: the phase gap passes through the OFF population.
    GapClosing,
    /// No-gap case: the last old OFF devices reach the new upper edge.
    Overlap,
    /// Settled in the new band.
    SteadyNew,
}

impl PieceKind {
    /// Expected (on, off) time formulas as affine functions of `s = t - t_s`.
    pub fn formulas(self, tt: &TimelineTimes) -> (Affine, Affine) {
        let c = Affine::constant;
        match self {
            PieceKind::SteadyOld => (c(tt.on0), c(tt.off0)),
            PieceKind::Draining => (
                Affine {
                    constant: tt.on0,
                    slope: -1.0,
                },
                Affine {
                    constant: tt.off0,
                    slope: 1.0,
                },
            ),
            PieceKind::AllOff => (c(0.0), c(tt.off0 + tt.on0)),
            PieceKind::EarlyArrival => (c(tt.on0 - tt.delay), c(tt.off0 + tt.delay)),
            PieceKind::Refill => (
                Affine {
                    constant: -tt.delay,
                    slope: 1.0,
                },
                Affine {
                    constant: tt.off0 + tt.on0 + tt.delay,
                    slope: -1.0,
                },
            ),
            PieceKind::GapPlateau => (c(tt.on_new), c(tt.off0 + tt.on0 - tt.on_new)),
            PieceKind::GapClosing => (
                c(tt.on_new),
                Affine {
                    constant: -tt.delay - tt.on_new,
                    slope: 1.0,
                },
            ),
            PieceKind::Overlap => (
                c(tt.on_new),
                Affine {
                    constant: tt.off0 + tt.on0 + tt.delay,
                    slope: -1.0,
                },
            ),
            PieceKind::SteadyNew => (c(tt.on_new), c(tt.off_new)),
        }
    }

    /// Clamped (on, off) at `s`.
    pub fn eval(self, tt: &TimelineTimes, s: f64) -> (f64, f64) {
        let (on, off) = self.formulas(tt);
        (on.eval(s).max(0.0), off.eval(s).max(MIN_OFF_TIME))
    }

    /// Clamped duty cycle at `s`.
    pub fn duty(self, tt: &TimelineTimes, s: f64) -> f64 {
        let (on, off) = self.eval(tt, s);
        cluster_duty(on, off).0
    }
}

impl PieceKind {
    /// Interval `[lower, upper)` of this piece relative to `t_s` (infinite ends as
    /// `±inf`). The settled piece starts where the path chosen by `gap` ends.
    pub fn bounds(self, tt: &TimelineTimes, gap: Gap) -> (f64, f64) {
        let d = tt.delay;
        let refill_end = d + tt.on_new;
        match self {
            PieceKind::SteadyOld => (f64::NEG_INFINITY, 0.0),
            PieceKind::Draining => (0.0, d.min(tt.on0)),
            PieceKind::AllOff => (tt.on0, d),
            PieceKind::EarlyArrival => (d, tt.on0),
            PieceKind::Refill => (d.max(tt.on0), refill_end),
            PieceKind::GapPlateau => (refill_end, tt.old_cycle() + d),
            PieceKind::GapClosing => (tt.old_cycle() + d, tt.new_cycle() + d),
            PieceKind::Overlap => (refill_end, tt.old_cycle() - tt.on_new + d),
            PieceKind::SteadyNew => match gap {
                Gap::Gap => (tt.new_cycle() + d, f64::INFINITY),
                Gap::NoGap => (tt.old_cycle() - tt.on_new + d, f64::INFINITY),
            },
        }
    }
}

/// Piece kinds on the path selected by the base times, in time order.
pub fn piece_sequence(tt: &TimelineTimes) -> Vec<PieceKind> {
    let mut seq = vec![PieceKind::SteadyOld, PieceKind::Draining];
    seq.push(match tt.branch() {
        Branch::OnEmptiesFirst => PieceKind::AllOff,
        Branch::OffArrivesFirst => PieceKind::EarlyArrival,
    });
    seq.push(PieceKind::Refill);
    match tt.gap() {
        Gap::Gap => seq.extend([PieceKind::GapPlateau, PieceKind::GapClosing]),
        Gap::NoGap => seq.push(PieceKind::Overlap),
    }
    seq.push(PieceKind::SteadyNew);
    seq
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalPiece {
    pub index: usize,
    pub kind: PieceKind,
    /// Lower end relative to `t_s` (hours); `-inf` for the pre-deployment piece.
    pub lower: f64,
    /// Upper end relative to `t_s`; `+inf` for the settled piece.
    pub upper: f64,
    pub on_time: Affine,
    pub off_time: Affine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MigrationTimeline {
    pub t_s: f64,
    pub beta: f64,
    pub ambient: f64,
    pub times: TimelineTimes,
    pub branch: Branch,
    pub gap: Gap,
    pub pieces: Vec<IntervalPiece>,
}

impl MigrationTimeline {
    pub fn for_device(device: &Device, beta: f64, ambient: f64, t_s: f64) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "beta must be positive, got {beta}"
            )));
        }
        let times = TimelineTimes::compute(device, ambient, beta)?;
        let mut pieces = Vec::new();
        let gap = times.gap();
        for kind in piece_sequence(&times) {
            let (mut lower, upper) = kind.bounds(&times, gap);
            // an overlap goes to the earlier piece, as in `piece_at`
            if let Some(prev) = pieces.last() {
                let prev: &IntervalPiece = prev;
                if lower < prev.upper - 1e-12 {
                    log::debug!(
                        "{kind:?} starts at {lower} h before the previous piece ends at {} h",
                        prev.upper
                    );
                    lower = prev.upper;
                }
            }
            // equal-length ties (e.g. delay == on0) produce empty pieces
            if !(upper > lower) {
                continue;
            }
            let (on_time, off_time) = kind.formulas(&times);
            pieces.push(IntervalPiece {
                index: pieces.len(),
                kind,
                lower,
                upper,
                on_time,
                off_time,
            });
        }
        let timeline = Self {
            t_s,
            beta,
            ambient,
            branch: times.branch(),
            gap,
            times,
            pieces,
        };
        let jump = timeline.settling_jump();
        if jump > 1e-9 {
            log::debug!("off-time jump of {jump:.3e} h entering the settled piece");
        }
        Ok(timeline)
    }

    /// Finite piece boundaries relative to `t_s`, ascending.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.pieces.iter().skip(1).map(|p| p.lower).collect()
    }

    /// Index of the piece containing `s = t - t_s`.
    pub fn piece_at(&self, s: f64) -> usize {
        self.pieces
            .iter()
            .position(|p| s < p.upper)
            .unwrap_or(self.pieces.len() - 1)
    }

    /// Jump in the off time entering the settled piece.
    pub fn settling_jump(&self) -> f64 {
        let n = self.pieces.len();
        if n < 2 {
            return 0.0;
        }
        let last = &self.pieces[n - 1];
        let prev = &self.pieces[n - 2];
        let s = last.lower;
        let (a_on, a_off) = prev.kind.eval(&self.times, s);
        let (b_on, b_off) = last.kind.eval(&self.times, s);
        (a_on - b_on).abs().max((a_off - b_off).abs())
    }
}

pub fn build_timeline(
    cluster: &Cluster,
    beta: f64,
    ambient: f64,
    t_s: f64,
) -> Result<MigrationTimeline> {
    MigrationTimeline::for_device(&cluster.representative, beta, ambient, t_s)
}

/// Expected (T_on, T_off) at absolute time `t` (hours).
pub fn expected_cycle_times(timeline: &MigrationTimeline, t: f64) -> (f64, f64) {
    let s = t - timeline.t_s;
    let piece = &timeline.pieces[timeline.piece_at(s)];
    piece.kind.eval(&timeline.times, s)
}

/// Duty cycle `on / (on + off)`; the flag is set when both inputs are zero.
pub fn cluster_duty(on: f64, off: f64) -> (f64, bool) {
    let period = on + off;
    if period <= 0.0 {
        (0.0, true)
    } else {
        ((on / period).clamp(0.0, 1.0), false)
    }
}

pub fn duty_at(timeline: &MigrationTimeline, t: f64) -> f64 {
    let (on, off) = expected_cycle_times(timeline, t);
    cluster_duty(on, off).0
}

/// Aggregate power of all clusters in MW.
pub fn aggregate_power(
    clusters: &[Cluster],
    timelines: &[MigrationTimeline],
    t: f64,
) -> Result<f64> {
    if clusters.len() != timelines.len() {
        return Err(Error::InvalidArgument(format!(
            "{} clusters but {} timelines",
            clusters.len(),
            timelines.len()
        )));
    }
    Ok(clusters
        .iter()
        .zip(timelines)
        .map(|(c, tl)| duty_at(tl, t) * c.member_power_sum)
        .sum::<f64>()
        / 1000.0)
}

/// Reserve delivered: drop of aggregate power from its pre-deployment level.
pub fn reserve_capacity(p0: f64, p_t: f64) -> f64 {
    p0 - p_t
}
