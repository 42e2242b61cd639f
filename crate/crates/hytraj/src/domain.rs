//! Hybrid time domains and average inter-jump time checks.
//!
//! A compact hybrid time domain is a union of intervals `[t_j, t_{j+1}] x {j}`
//! with `t_j <= t_{j+1}`; the jump counter `j` increases by one across the
//! list and jumps are instantaneous in `t`.

use crate::error::{Error, Result};

/// One interval `[t_start, t_end] x {j}` of a hybrid time domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainInterval {
    pub t_start: f64,
    pub t_end: f64,
    pub j: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct HybridTimeDomain {
    intervals: Vec<DomainInterval>,
}

impl HybridTimeDomain {
    pub fn new(intervals: Vec<DomainInterval>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::EmptyDomain);
        }
        for (idx, iv) in intervals.iter().enumerate() {
            if iv.t_end < iv.t_start {
                return Err(Error::InvalidSystem(format!(
                    "interval {idx} has t_end < t_start"
                )));
            }
            if iv.j != intervals[0].j + idx {
                return Err(Error::InvalidSystem(format!(
                    "jump counter not contiguous at interval {idx}"
                )));
            }
            if idx > 0 && (iv.t_start - intervals[idx - 1].t_end).abs() > 0.0 {
                return Err(Error::InvalidSystem(format!(
                    "interval {idx} does not start at the previous jump time"
                )));
            }
        }
        Ok(Self { intervals })
    }

    /// Builds a domain from the jump times of a run starting at `(t0, 0)`.
    pub fn from_jump_times(t0: f64, jump_times: &[f64], t_end: f64) -> Result<Self> {
        let mut intervals = Vec::with_capacity(jump_times.len() + 1);
        let mut t = t0;
        for (j, &tj) in jump_times.iter().enumerate() {
            intervals.push(DomainInterval {
                t_start: t,
                t_end: tj,
                j,
            });
            t = tj;
        }
        intervals.push(DomainInterval {
            t_start: t,
            t_end,
            j: jump_times.len(),
        });
        Self::new(intervals)
    }

    pub fn intervals(&self) -> &[DomainInterval] {
        &self.intervals
    }

    pub fn jump_count(&self) -> usize {
        self.intervals.len() - 1
    }

    pub fn t_start(&self) -> f64 {
        self.intervals[0].t_start
    }

    pub fn t_end(&self) -> f64 {
        self.intervals.last().unwrap().t_end
    }

    /// Hybrid endpoints `(t, j)` of every interval, in order.
    pub fn endpoints(&self) -> Vec<(f64, usize)> {
        let mut pts = Vec::with_capacity(2 * self.intervals.len());
        for iv in &self.intervals {
            pts.push((iv.t_start, iv.j));
            pts.push((iv.t_end, iv.j));
        }
        pts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DwellKind {
    /// `J - j <= N0 + (T - t)/tau`: jumps are sparse on average.
    MinimalAverage,
    /// `J - j >= (T - t)/tau - N0`: jumps recur at least every `tau` on average.
    MaximalAverage,
}

/// Average inter-jump time specification `(tau, N0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DwellTimeSpec {
    pub tau: f64,
    pub n0: f64,
    pub kind: DwellKind,
}

impl DwellTimeSpec {
    pub fn new(tau: f64, n0: f64, kind: DwellKind) -> Result<Self> {
        if !tau.is_finite() || tau <= 0.0 || !n0.is_finite() || n0 <= 0.0 {
            return Err(Error::InvalidSystem(format!(
                "dwell-time spec requires tau > 0 and N0 > 0, got tau = {tau}, N0 = {n0}"
            )));
        }
        Ok(Self { tau, n0, kind })
    }
}

/// Outcome of an exhaustive dwell-time check over a finite domain.
#[derive(Debug, Clone, PartialEq)]
pub struct DwellCheck {
    pub holds: bool,
    /// Pair `((t, j), (T, J))` attaining the tightest margin.
    pub worst_pair: ((f64, usize), (f64, usize)),
    /// Slack of the dwell inequality at the worst pair; nonnegative iff it holds.
    pub margin: f64,
}

/// Checks the dwell inequality over all ordered pairs of interval endpoints.
///
/// The inequality is affine in `t` and `T` over each interval, so the extremal
/// pairs occur at endpoints and the endpoint sweep is exhaustive.
pub fn check_inter_jump_time(
    domain: &HybridTimeDomain,
    spec: &DwellTimeSpec,
) -> Result<DwellCheck> {
    let pts = domain.endpoints();
    if pts.is_empty() {
        return Err(Error::EmptyDomain);
    }
    let mut worst: Option<DwellCheck> = None;
    for &(t, j) in &pts {
        for &(tt, jj) in &pts {
            if tt + (jj as f64) < t + j as f64 {
                continue;
            }
            let margin = dwell_margin(spec, t, j, tt, jj);
            if worst.as_ref().is_none_or(|w| margin < w.margin) {
                worst = Some(DwellCheck {
                    holds: margin >= 0.0,
                    worst_pair: ((t, j), (tt, jj)),
                    margin,
                });
            }
        }
    }
    Ok(worst.unwrap())
}

/// Slack of the dwell inequality for one ordered pair of hybrid times.
pub fn dwell_margin(spec: &DwellTimeSpec, t: f64, j: usize, tt: f64, jj: usize) -> f64 {
    let dj = jj as f64 - j as f64;
    let dt = tt - t;
    match spec.kind {
        DwellKind::MinimalAverage => spec.n0 + dt / spec.tau - dj,
        DwellKind::MaximalAverage => dj - dt / spec.tau + spec.n0,
    }
}

/// Smallest `tau` for which a MaximalAverage spec with offset `n0` holds on
/// the given finite domain (used to derive a dwell spec from a measured arc).
pub fn tightest_maximal_tau(domain: &HybridTimeDomain, n0: f64) -> f64 {
    let pts = domain.endpoints();
    let mut tau = 0.0f64;
    for &(t, j) in &pts {
        for &(tt, jj) in &pts {
            if tt + (jj as f64) < t + j as f64 || tt <= t {
                continue;
            }
            let denom = (jj as f64 - j as f64) + n0;
            if denom > 0.0 {
                tau = tau.max((tt - t) / denom);
            }
        }
    }
    tau
}
