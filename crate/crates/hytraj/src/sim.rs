//! Event-located simulation of a single hybrid trajectory.
//!
//! `simulate` alternates flow integration and jump application, producing a
//! [`HybridArc`]: a dense grid of samples per flow interval plus one record
//! per jump, on a hybrid time domain.

use nalgebra::DVector;

use crate::domain::HybridTimeDomain;
use crate::error::{Error, Result};
use crate::ode::{integrate_segment, AcceptedStep, EventSpec, OdeOptions, SegmentEnd};
use crate::system::{AffineHybridSystem, InputFn};

/// One dense-output sample: state and flow-map value at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: DVector<f64>,
    pub f: DVector<f64>,
}

/// Samples of one flow interval `[t_start, t_end] x {j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcInterval {
    pub j: usize,
    pub samples: Vec<Sample>,
}

impl ArcInterval {
    pub fn t_start(&self) -> f64 {
        self.samples.first().map(|s| s.t).unwrap_or(f64::NAN)
    }

    pub fn t_end(&self) -> f64 {
        self.samples.last().map(|s| s.t).unwrap_or(f64::NAN)
    }

    /// Cubic Hermite evaluation inside the interval. Times within a small
    /// band of the endpoints are clamped, so arcs whose event times differ at
    /// roundoff level stay comparable.
    pub fn eval(&self, t: f64) -> Option<DVector<f64>> {
        let s = &self.samples;
        let slack = 1e-9 * t.abs().max(1.0);
        if s.is_empty() || t < s[0].t - slack || t > s[s.len() - 1].t + slack {
            return None;
        }
        if s.len() == 1 {
            return Some(s[0].x.clone());
        }
        let t = t.clamp(s[0].t, s[s.len() - 1].t);
        let idx = match s.binary_search_by(|p| p.t.partial_cmp(&t).unwrap()) {
            Ok(i) => return Some(s[i].x.clone()),
            Err(0) => 0,
            Err(i) if i >= s.len() => s.len() - 2,
            Err(i) => i - 1,
        };
        let (p0, p1) = (&s[idx], &s[idx + 1]);
        let step = AcceptedStep {
            t0: p0.t,
            t1: p1.t,
            y0: p0.x.clone(),
            y1: p1.x.clone(),
            f0: p0.f.clone(),
            f1: p1.f.clone(),
        };
        Some(step.interpolate(t))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpRecord {
    pub t: f64,
    /// Jump counter before the jump; the post state lives at counter `j_pre + 1`.
    pub j_pre: usize,
    pub pre: DVector<f64>,
    pub post: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    HorizonReached,
    LeftFlowSet,
    ZenoLimit,
    EscapeDetected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridArc {
    pub intervals: Vec<ArcInterval>,
    pub jumps: Vec<JumpRecord>,
    pub termination: Termination,
}

impl HybridArc {
    pub fn domain(&self) -> Result<HybridTimeDomain> {
        let jump_times: Vec<f64> = self.jumps.iter().map(|jr| jr.t).collect();
        let t0 = self
            .intervals
            .first()
            .map(|iv| iv.t_start())
            .ok_or(Error::EmptyDomain)?;
        let t_end = self.intervals.last().map(|iv| iv.t_end()).unwrap();
        HybridTimeDomain::from_jump_times(t0, &jump_times, t_end)
    }

    pub fn t_start(&self) -> f64 {
        self.intervals.first().map(|iv| iv.t_start()).unwrap_or(0.0)
    }

    pub fn t_end(&self) -> f64 {
        self.intervals.last().map(|iv| iv.t_end()).unwrap_or(0.0)
    }

    pub fn jump_times(&self) -> Vec<f64> {
        self.jumps.iter().map(|jr| jr.t).collect()
    }

    /// State at hybrid time `(t, j)`, interpolated inside interval `j`.
    pub fn eval(&self, t: f64, j: usize) -> Option<DVector<f64>> {
        self.intervals
            .iter()
            .find(|iv| iv.j == j)
            .and_then(|iv| iv.eval(t))
    }
}

/// Simulation limits and tolerances.
#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    pub ode: OdeOptions,
    /// Dense output spacing.
    pub sample_dt: f64,
    /// Jump budget before a Zeno limit is declared.
    pub max_jumps: usize,
    /// Two successive jumps closer than this declare a Zeno limit.
    pub zeno_window: f64,
    /// Slack on the flow-set facets before the arc terminates as LeftFlowSet.
    pub leave_band: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            ode: OdeOptions::default(),
            sample_dt: 1e-3,
            max_jumps: 10_000,
            zeno_window: 1e-9,
            leave_band: 1e-7,
        }
    }
}

/// Lays dense-grid samples over accepted steps of one flow interval.
struct GridSampler<'a> {
    samples: Vec<Sample>,
    next_t: f64,
    dt: f64,
    sys: &'a AffineHybridSystem,
    u: &'a InputFn<'a>,
}

impl<'a> GridSampler<'a> {
    fn new(sys: &'a AffineHybridSystem, u: &'a InputFn<'a>, t0: f64, x0: &DVector<f64>, dt: f64) -> Self {
        let mut s = Self {
            samples: Vec::new(),
            next_t: t0,
            dt,
            sys,
            u,
        };
        s.push(t0, x0.clone());
        s.next_t = t0 + dt;
        s
    }

    fn push(&mut self, t: f64, x: DVector<f64>) {
        let f = self.sys.flow(&x, (self.u)(t, &x));
        self.samples.push(Sample { t, x, f });
    }

    fn absorb(&mut self, step: &AcceptedStep) {
        while self.next_t <= step.t1 + 1e-15 {
            let t = self.next_t;
            if t >= step.t0 - 1e-15 {
                self.push(t, step.interpolate(t));
            }
            self.next_t += self.dt;
        }
    }

    fn finish(mut self, t_end: f64, x_end: &DVector<f64>) -> Vec<Sample> {
        let last_t = self.samples.last().map(|s| s.t).unwrap_or(f64::NEG_INFINITY);
        if t_end - last_t > 1e-12 * t_end.abs().max(1.0) {
            self.push(t_end, x_end.clone());
        } else if let Some(last) = self.samples.last_mut() {
            // Snap the final grid point onto the located endpoint.
            let f = self.sys.flow(x_end, (self.u)(t_end, x_end));
            *last = Sample {
                t: t_end,
                x: x_end.clone(),
                f,
            };
        }
        self.samples
    }
}

/// Outcome of one flow leg.
#[derive(Debug, Clone)]
pub enum FlowEnd {
    Horizon,
    /// Guard reached inside D; the final sample is the located pre-jump state.
    Guard { t: f64 },
    LeftFlowSet { t: f64 },
    Escape { t: f64 },
}

#[derive(Debug, Clone)]
pub struct FlowSegment {
    pub samples: Vec<Sample>,
    pub end: FlowEnd,
}

fn flow_leg(
    sys: &AffineHybridSystem,
    x0: &DVector<f64>,
    t0: f64,
    t_max: f64,
    u: &InputFn,
    opts: &SimOptions,
) -> Result<FlowSegment> {
    let f = |t: f64, x: &DVector<f64>| sys.flow(x, u(t, x));
    let guard = |x: &DVector<f64>| (&sys.j * x)[0] + sys.k;
    let accept =
        |_t: f64, x: &DVector<f64>| (&sys.z1 * x)[0] + sys.z2 <= opts.ode.tol_event;
    let halt = |_t: f64, x: &DVector<f64>| !sys.in_flow_set(x, opts.leave_band);

    let mut sampler = GridSampler::new(sys, &u, t0, x0, opts.sample_dt);
    let mut last_state = x0.clone();
    let mut last_t = t0;
    let end = integrate_segment(
        &f,
        t0,
        x0,
        t_max,
        &[EventSpec {
            guard: &guard,
            accept: &accept,
        }],
        Some(&halt),
        &opts.ode,
        |step| {
            sampler.absorb(step);
            last_state = step.y1.clone();
            last_t = step.t1;
        },
    )?;
    let (end, t_end, x_end) = match end {
        SegmentEnd::Horizon => (FlowEnd::Horizon, last_t.max(t_max), last_state.clone()),
        SegmentEnd::Event { t, y, .. } => (FlowEnd::Guard { t }, t, y),
        SegmentEnd::Escape { t, .. } => (FlowEnd::Escape { t }, t, last_state.clone()),
        SegmentEnd::Halted { t, y } => (FlowEnd::LeftFlowSet { t }, t, y),
    };
    // Horizon legs end exactly at the last accepted step (== t_max up to roundoff).
    let t_end = if matches!(end, FlowEnd::Horizon) { last_t } else { t_end };
    Ok(FlowSegment {
        samples: sampler.finish(t_end, &x_end),
        end,
    })
}

/// Integrates one flow leg from `x0` at `t0` until `t_max` or a guard event.
///
/// Errors with `EscapeDetected` if the state norm exceeds the escape bound.
pub fn integrate_flow(
    sys: &AffineHybridSystem,
    x0: &DVector<f64>,
    t0: f64,
    t_max: f64,
    u: &InputFn,
    opts: &SimOptions,
) -> Result<FlowSegment> {
    let seg = flow_leg(sys, x0, t0, t_max, u, opts)?;
    if let FlowEnd::Escape { t } = seg.end {
        let norm = seg.samples.last().map(|s| s.x.norm()).unwrap_or(f64::NAN);
        return Err(Error::EscapeDetected {
            t,
            norm,
            bound: opts.ode.escape_bound,
        });
    }
    Ok(seg)
}

/// Simulates the hybrid system over `[t0, t0 + horizon]`.
///
/// A state inside D jumps before it flows. The arc records every jump and a
/// dense sample grid per interval; abnormal endings are recorded in
/// `termination` rather than raised, so partial runs stay inspectable.
pub fn simulate(
    sys: &AffineHybridSystem,
    x0: &DVector<f64>,
    t0: f64,
    horizon: f64,
    u: &InputFn,
    opts: &SimOptions,
) -> Result<HybridArc> {
    let tol = opts.ode.tol_event;
    if !sys.in_flow_set(x0, opts.leave_band) && !sys.in_jump_set(x0, tol) {
        let (g, h) = sys.guard_values(x0)?;
        return Err(Error::OutsideStateSpace {
            violation: g.max(h.min(0.0)).max(sys.c_gd(x0)),
        });
    }

    let t_max = t0 + horizon;
    let mut intervals = Vec::new();
    let mut jumps: Vec<JumpRecord> = Vec::new();
    let mut t = t0;
    let mut x = x0.clone();
    let mut j = 0usize;

    loop {
        // Jump-first priority for states already in D.
        if sys.in_jump_set(&x, tol) {
            // Zero-length interval when the run starts (or lands) inside D.
            if intervals.len() <= j {
                let f = sys.flow(&x, u(t, &x));
                intervals.push(ArcInterval {
                    j,
                    samples: vec![Sample {
                        t,
                        x: x.clone(),
                        f,
                    }],
                });
            }
            if jumps.len() >= opts.max_jumps {
                return Ok(HybridArc {
                    intervals,
                    jumps,
                    termination: Termination::ZenoLimit,
                });
            }
            let post = sys.apply_jump(&x, tol)?;
            let gap_zeno = jumps
                .last()
                .map(|last| t - last.t < opts.zeno_window)
                .unwrap_or(false);
            jumps.push(JumpRecord {
                t,
                j_pre: j,
                pre: x.clone(),
                post: post.clone(),
            });
            j += 1;
            x = post;
            if gap_zeno {
                let f = sys.flow(&x, u(t, &x));
                intervals.push(ArcInterval {
                    j,
                    samples: vec![Sample { t, x, f }],
                });
                return Ok(HybridArc {
                    intervals,
                    jumps,
                    termination: Termination::ZenoLimit,
                });
            }
            continue;
        }

        if t >= t_max {
            if intervals.len() <= j {
                let f = sys.flow(&x, u(t, &x));
                intervals.push(ArcInterval {
                    j,
                    samples: vec![Sample { t, x, f }],
                });
            }
            return Ok(HybridArc {
                intervals,
                jumps,
                termination: Termination::HorizonReached,
            });
        }

        let seg = flow_leg(sys, &x, t, t_max, u, opts)?;
        let last = seg.samples.last().expect("flow leg yields samples");
        let (t_end, x_end) = (last.t, last.x.clone());
        intervals.push(ArcInterval {
            j,
            samples: seg.samples,
        });
        match seg.end {
            FlowEnd::Horizon => {
                return Ok(HybridArc {
                    intervals,
                    jumps,
                    termination: Termination::HorizonReached,
                });
            }
            FlowEnd::Guard { .. } => {
                t = t_end;
                x = x_end;
                // The located state is in D; the next loop turn applies the jump.
            }
            FlowEnd::LeftFlowSet { .. } => {
                return Ok(HybridArc {
                    intervals,
                    jumps,
                    termination: Termination::LeftFlowSet,
                });
            }
            FlowEnd::Escape { .. } => {
                return Ok(HybridArc {
                    intervals,
                    jumps,
                    termination: Termination::EscapeDetected,
                });
            }
        }
    }
}

/// Largest scaled flow-ODE residual over interior grid points of an interval:
/// `||x_fd' - f(t, x)|| / (1 + ||x||)` with a second-order non-uniform stencil.
pub fn max_flow_residual(
    interval: &ArcInterval,
    sys: &AffineHybridSystem,
    u: &InputFn,
) -> f64 {
    let s = &interval.samples;
    let mut worst = 0.0f64;
    for i in 1..s.len().saturating_sub(1) {
        let hp = s[i + 1].t - s[i].t;
        let hm = s[i].t - s[i - 1].t;
        if hp <= 0.0 || hm <= 0.0 {
            continue;
        }
        let fd = &s[i + 1].x * (hm / (hp * (hp + hm)))
            + &s[i].x * ((hp - hm) / (hp * hm))
            - &s[i - 1].x * (hp / (hm * (hp + hm)));
        let f = sys.flow(&s[i].x, u(s[i].t, &s[i].x));
        let r = (fd - f).norm() / (1.0 + s[i].x.norm());
        worst = worst.max(r);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::zero_input;
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, dvector, DMatrix, RowDVector};

    fn ball() -> AffineHybridSystem {
        AffineHybridSystem::new(
            dmatrix![0.0, 1.0; 0.0, 0.0],
            dvector![0.0, 1.0],
            dvector![0.0, -9.81],
            DMatrix::identity(2, 2) * -1.0,
            dvector![0.0, 0.0],
            RowDVector::from_row_slice(&[-1.0, 0.0]),
            0.0,
            RowDVector::from_row_slice(&[0.0, 1.0]),
            0.0,
            -1.0,
        )
        .unwrap()
    }

    #[test]
    fn ballistic_impact_is_located() {
        let sys = ball();
        let seg = integrate_flow(
            &sys,
            &dvector![0.0, 10.0],
            0.0,
            10.0,
            &zero_input,
            &SimOptions::default(),
        )
        .unwrap();
        match seg.end {
            FlowEnd::Guard { t } => assert_relative_eq!(t, 20.0 / 9.81, epsilon = 1e-10),
            other => panic!("expected guard hit, got {other:?}"),
        }
        let pre = &seg.samples.last().unwrap().x;
        assert_relative_eq!(pre[1], -10.0, epsilon = 1e-9);
        assert!(pre[0].abs() <= 1e-9);
    }

    #[test]
    fn equilibrium_stays_put() {
        // A x + E = 0 at x = (1, 0) for A = -I, E = (1, 0).
        let sys = AffineHybridSystem::new(
            DMatrix::identity(2, 2) * -1.0,
            dvector![0.0, 0.0],
            dvector![1.0, 0.0],
            DMatrix::identity(2, 2) * -1.0,
            dvector![0.0, 0.0],
            RowDVector::from_row_slice(&[-1.0, 0.0]),
            0.0,
            RowDVector::from_row_slice(&[0.0, 1.0]),
            0.0,
            -1.0,
        )
        .unwrap();
        let seg = integrate_flow(
            &sys,
            &dvector![1.0, 0.0],
            0.0,
            5.0,
            &zero_input,
            &SimOptions::default(),
        )
        .unwrap();
        assert!(matches!(seg.end, FlowEnd::Horizon));
        for s in &seg.samples {
            assert_relative_eq!(s.x[0], 1.0, epsilon = 1e-9);
            assert_relative_eq!(s.x[1], 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn periodic_ball_jump_times_match_closed_form() {
        let sys = ball();
        let arc = simulate(
            &sys,
            &dvector![0.0, 10.0],
            0.0,
            15.0,
            &zero_input,
            &SimOptions::default(),
        )
        .unwrap();
        assert_eq!(arc.termination, Termination::HorizonReached);
        let period = 20.0 / 9.81;
        assert!(arc.jumps.len() >= 5);
        for (k, jr) in arc.jumps.iter().enumerate().take(5) {
            assert_relative_eq!(jr.t, period * (k + 1) as f64, epsilon = 1e-9);
            assert_relative_eq!(jr.post, -&jr.pre, epsilon = 1e-12);
        }
    }

    #[test]
    fn short_horizon_yields_single_interval() {
        let sys = ball();
        let arc = simulate(
            &sys,
            &dvector![0.0, 10.0],
            0.0,
            1.0,
            &zero_input,
            &SimOptions::default(),
        )
        .unwrap();
        assert_eq!(arc.jumps.len(), 0);
        assert_eq!(arc.intervals.len(), 1);
        assert_eq!(arc.termination, Termination::HorizonReached);
        let domain = arc.domain().unwrap();
        assert_eq!(domain.jump_count(), 0);
        assert_relative_eq!(domain.t_end(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn flow_residuals_stay_within_band() {
        let sys = ball();
        let arc = simulate(
            &sys,
            &dvector![0.0, 10.0],
            0.0,
            6.0,
            &zero_input,
            &SimOptions::default(),
        )
        .unwrap();
        for iv in &arc.intervals {
            assert!(max_flow_residual(iv, &sys, &zero_input) <= 1e-4);
        }
    }

    #[test]
    fn forced_oscillator_impact_agrees_with_tighter_tolerances() {
        let sys = AffineHybridSystem::new(
            dmatrix![0.0, 1.0; -1.0, -0.02],
            dvector![0.0, 1.0],
            dvector![0.0, 1.0],
            DMatrix::identity(2, 2) * -0.9,
            dvector![0.0, 0.0],
            RowDVector::from_row_slice(&[-1.0, 0.0]),
            0.0,
            RowDVector::from_row_slice(&[0.0, 1.0]),
            0.0,
            -1.0,
        )
        .unwrap();
        let u = |t: f64, _x: &DVector<f64>| 100.0 * (0.4 * t).cos();
        let opts = SimOptions::default();
        let mut tight = opts;
        tight.ode.rel_tol = opts.ode.rel_tol / 10.0;
        tight.ode.abs_tol = opts.ode.abs_tol / 10.0;
        let x0 = dvector![50.0, 0.0];
        let a = integrate_flow(&sys, &x0, 0.0, 20.0, &u, &opts).unwrap();
        let b = integrate_flow(&sys, &x0, 0.0, 20.0, &u, &tight).unwrap();
        match (&a.end, &b.end) {
            (FlowEnd::Guard { t: ta }, FlowEnd::Guard { t: tb }) => {
                assert!((ta - tb).abs() <= 1e-8, "impact times {ta} vs {tb}");
            }
            other => panic!("expected guard hits, got {other:?}"),
        }
        let pa = &a.samples.last().unwrap().x;
        let pb = &b.samples.last().unwrap().x;
        assert!((pa - pb).norm() <= 1e-7, "impact states differ: {pa} vs {pb}");
    }

    #[test]
    fn start_inside_jump_set_jumps_first() {
        let sys = ball();
        let arc = simulate(
            &sys,
            &dvector![0.0, -3.0],
            0.0,
            0.5,
            &zero_input,
            &SimOptions::default(),
        )
        .unwrap();
        assert_eq!(arc.jumps.len(), 1);
        assert_eq!(arc.jumps[0].t, 0.0);
        assert_relative_eq!(arc.jumps[0].post, dvector![0.0, 3.0]);
        // Zero-length interval at j = 0, flow at j = 1.
        assert_eq!(arc.intervals[0].samples.len(), 1);
        assert_eq!(arc.intervals[1].j, 1);
    }

    #[test]
    fn jump_budget_terminates_as_zeno_limit() {
        let sys = ball();
        let opts = SimOptions {
            max_jumps: 3,
            ..SimOptions::default()
        };
        let arc = simulate(&sys, &dvector![0.0, 10.0], 0.0, 15.0, &zero_input, &opts).unwrap();
        assert_eq!(arc.termination, Termination::ZenoLimit);
        assert_eq!(arc.jumps.len(), 3);
        let domain = arc.domain().unwrap();
        assert_eq!(domain.jump_count(), 3);
    }

    #[test]
    fn identity_jump_map_hits_the_zeno_window() {
        // An identity jump keeps the state inside D; the second jump happens
        // at the same instant and trips the window guard.
        let sys = AffineHybridSystem::new(
            dmatrix![0.0, 1.0; 0.0, 0.0],
            dvector![0.0, 1.0],
            dvector![0.0, -9.81],
            DMatrix::identity(2, 2),
            dvector![0.0, 0.0],
            RowDVector::from_row_slice(&[-1.0, 0.0]),
            0.0,
            RowDVector::from_row_slice(&[0.0, 1.0]),
            0.0,
            -1.0,
        )
        .unwrap();
        let arc = simulate(
            &sys,
            &dvector![0.0, -3.0],
            0.0,
            1.0,
            &zero_input,
            &SimOptions::default(),
        )
        .unwrap();
        assert_eq!(arc.termination, Termination::ZenoLimit);
        assert_eq!(arc.jumps.len(), 2);
        assert_eq!(arc.jumps[0].t, arc.jumps[1].t);
    }

    #[test]
    fn dense_grid_spacing_is_bounded() {
        let sys = ball();
        let opts = SimOptions::default();
        let arc = simulate(&sys, &dvector![0.0, 10.0], 0.0, 5.0, &zero_input, &opts).unwrap();
        for iv in &arc.intervals {
            for w in iv.samples.windows(2) {
                assert!(w[1].t - w[0].t <= opts.sample_dt + 1e-12);
            }
        }
    }
}
