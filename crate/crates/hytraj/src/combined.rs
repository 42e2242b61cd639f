//! Joint simulation of two trajectories of the same hybrid system on one
//! combined hybrid time domain.
//!
//! The extended state is `q = (x, y)`; both components flow simultaneously,
//! and at a guard event of either component only that component jumps while
//! the other is frozen (the shared counter `j` still increments). The
//! nondecreasing maps `jx`, `jy` recover each component's own jump counter,
//! with `jx(j) + jy(j) = j`.

use nalgebra::DVector;

use crate::domain::HybridTimeDomain;
use crate::error::{Error, Result};
use crate::ode::{integrate_segment, AcceptedStep, EventSpec, SegmentEnd};
use crate::sim::{ArcInterval, HybridArc, JumpRecord, Sample, SimOptions, Termination};
use crate::system::{AffineHybridSystem, InputFn};

/// Input of the controlled component; receives the live reference component.
pub type PairInputFn<'a> = dyn Fn(f64, &DVector<f64>, &DVector<f64>) -> f64 + 'a;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpAttribution {
    XJumped,
    YJumped,
    /// Both components were in D; this jump is one branch of the enumeration.
    BothEnumerated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinedJump {
    pub t: f64,
    pub j_pre: usize,
    pub kind: JumpAttribution,
    pub pre_x: DVector<f64>,
    pub post_x: DVector<f64>,
    pub pre_y: DVector<f64>,
    pub post_y: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinedSample {
    pub t: f64,
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub fx: DVector<f64>,
    pub fy: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinedInterval {
    pub j: usize,
    pub samples: Vec<CombinedSample>,
}

impl CombinedInterval {
    pub fn t_start(&self) -> f64 {
        self.samples.first().map(|s| s.t).unwrap_or(f64::NAN)
    }

    pub fn t_end(&self) -> f64 {
        self.samples.last().map(|s| s.t).unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinedArc {
    pub intervals: Vec<CombinedInterval>,
    pub jumps: Vec<CombinedJump>,
    /// `jx[j]`, `jy[j]`: original jump counters at combined counter `j`.
    pub jx: Vec<usize>,
    pub jy: Vec<usize>,
    pub termination: Termination,
}

impl CombinedArc {
    pub fn domain(&self) -> Result<HybridTimeDomain> {
        let t0 = self
            .intervals
            .first()
            .map(|iv| iv.t_start())
            .ok_or(Error::EmptyDomain)?;
        let t_end = self.intervals.last().map(|iv| iv.t_end()).unwrap();
        let jump_times: Vec<f64> = self.jumps.iter().map(|j| j.t).collect();
        HybridTimeDomain::from_jump_times(t0, &jump_times, t_end)
    }

    pub fn t_end(&self) -> f64 {
        self.intervals.last().map(|iv| iv.t_end()).unwrap_or(0.0)
    }

    /// Euclidean separation of the two components at every sample.
    pub fn euclidean_profile(&self) -> Vec<(f64, usize, f64)> {
        let mut out = Vec::new();
        for iv in &self.intervals {
            for s in &iv.samples {
                out.push((s.t, iv.j, (&s.x - &s.y).norm()));
            }
        }
        out
    }

    /// Jump times of the x component (in combined order), and of y.
    pub fn component_jump_times(&self) -> (Vec<f64>, Vec<f64>) {
        let mut tx = Vec::new();
        let mut ty = Vec::new();
        for j in &self.jumps {
            match j.kind {
                JumpAttribution::XJumped => tx.push(j.t),
                JumpAttribution::YJumped => ty.push(j.t),
                JumpAttribution::BothEnumerated => {
                    if j.post_x != j.pre_x {
                        tx.push(j.t)
                    } else {
                        ty.push(j.t)
                    }
                }
            }
        }
        (tx, ty)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimultaneousPolicy {
    /// Deterministic: x jumps at counter `j`, y at `j + 1`.
    XFirst,
    /// Error out when both components are in D within tolerance.
    Strict,
}

struct PairSampler<'a> {
    samples: Vec<CombinedSample>,
    next_t: f64,
    dt: f64,
    n: usize,
    sys: &'a AffineHybridSystem,
    u_x: &'a InputFn<'a>,
    u_y: &'a PairInputFn<'a>,
}

impl<'a> PairSampler<'a> {
    fn push(&mut self, t: f64, q: &DVector<f64>) {
        let x = DVector::from(q.rows(0, self.n).clone_owned());
        let y = DVector::from(q.rows(self.n, self.n).clone_owned());
        let fx = self.sys.flow(&x, (self.u_x)(t, &x));
        let fy = self.sys.flow(&y, (self.u_y)(t, &x, &y));
        self.samples.push(CombinedSample { t, x, y, fx, fy });
    }

    fn absorb(&mut self, step: &AcceptedStep) {
        while self.next_t <= step.t1 + 1e-15 {
            let t = self.next_t;
            if t >= step.t0 - 1e-15 {
                let q = step.interpolate(t);
                self.push(t, &q);
            }
            self.next_t += self.dt;
        }
    }

    fn finish(&mut self, t_end: f64, q_end: &DVector<f64>) {
        let last_t = self.samples.last().map(|s| s.t).unwrap_or(f64::NEG_INFINITY);
        if t_end - last_t > 1e-12 * t_end.abs().max(1.0) {
            self.push(t_end, q_end);
        } else {
            self.samples.pop();
            self.push(t_end, q_end);
        }
    }
}

/// Simulates the extended pair system from `(x0, y0)` over `[t0, t0 + horizon]`.
///
/// `u_x` drives the first component; `u_y` drives the second and sees the live
/// first component (for region-based feedback).
#[allow(clippy::too_many_arguments)]
pub fn simulate_combined(
    sys: &AffineHybridSystem,
    x0: &DVector<f64>,
    y0: &DVector<f64>,
    t0: f64,
    horizon: f64,
    u_x: &InputFn,
    u_y: &PairInputFn,
    opts: &SimOptions,
    policy: SimultaneousPolicy,
) -> Result<CombinedArc> {
    simulate_combined_with_choices(sys, x0, y0, t0, horizon, u_x, u_y, opts, policy, &[], None)
        .map(|(arc, _)| arc)
}

/// Core pair simulation. `choices` resolves simultaneous-jump instants in
/// order (`true` = x first); instants beyond the list follow `policy`.
/// Returns the arc and the number of simultaneous instants encountered.
#[allow(clippy::too_many_arguments)]
fn simulate_combined_with_choices(
    sys: &AffineHybridSystem,
    x0: &DVector<f64>,
    y0: &DVector<f64>,
    t0: f64,
    horizon: f64,
    u_x: &InputFn,
    u_y: &PairInputFn,
    opts: &SimOptions,
    policy: SimultaneousPolicy,
    choices: &[bool],
    mark_enumerated: Option<()>,
) -> Result<(CombinedArc, usize)> {
    let n = sys.dim();
    let tol = opts.ode.tol_event;
    for (z, name) in [(x0, "x0"), (y0, "y0")] {
        if !sys.in_flow_set(z, opts.leave_band) && !sys.in_jump_set(z, tol) {
            let (g, h) = sys.guard_values(z)?;
            let _ = name;
            return Err(Error::OutsideStateSpace {
                violation: g.max(h.min(0.0)).max(sys.c_gd(z)),
            });
        }
    }

    let t_max = t0 + horizon;
    let mut t = t0;
    let mut x = x0.clone();
    let mut y = y0.clone();
    let mut j = 0usize;
    let mut jx = vec![0usize];
    let mut jy = vec![0usize];
    let mut intervals: Vec<CombinedInterval> = Vec::new();
    let mut jumps: Vec<CombinedJump> = Vec::new();
    let mut last_jump_x = f64::NEG_INFINITY;
    let mut last_jump_y = f64::NEG_INFINITY;
    let mut n_simultaneous = 0usize;

    let push_point_interval =
        |intervals: &mut Vec<CombinedInterval>, j: usize, t: f64, x: &DVector<f64>, y: &DVector<f64>| {
            let fx = sys.flow(x, u_x(t, x));
            let fy = sys.flow(y, u_y(t, x, y));
            intervals.push(CombinedInterval {
                j,
                samples: vec![CombinedSample {
                    t,
                    x: x.clone(),
                    y: y.clone(),
                    fx,
                    fy,
                }],
            });
        };

    loop {
        let x_in_d = sys.in_jump_set(&x, tol);
        let y_in_d = sys.in_jump_set(&y, tol);
        if x_in_d || y_in_d {
            let jump_x = if x_in_d && y_in_d {
                match policy {
                    SimultaneousPolicy::Strict => {
                        return Err(Error::AttributionAmbiguous { t });
                    }
                    SimultaneousPolicy::XFirst => {
                        let choice = choices.get(n_simultaneous).copied().unwrap_or(true);
                        n_simultaneous += 1;
                        choice
                    }
                }
            } else {
                x_in_d
            };

            if intervals.len() <= j {
                push_point_interval(&mut intervals, j, t, &x, &y);
            }
            if jumps.len() >= opts.max_jumps {
                return Ok((
                    CombinedArc {
                        intervals,
                        jumps,
                        jx,
                        jy,
                        termination: Termination::ZenoLimit,
                    },
                    n_simultaneous,
                ));
            }
            let kind = if x_in_d && y_in_d && mark_enumerated.is_some() {
                JumpAttribution::BothEnumerated
            } else if jump_x {
                JumpAttribution::XJumped
            } else {
                JumpAttribution::YJumped
            };
            let zeno = if jump_x {
                let z = t - last_jump_x < opts.zeno_window;
                last_jump_x = t;
                z
            } else {
                let z = t - last_jump_y < opts.zeno_window;
                last_jump_y = t;
                z
            };
            let (pre_x, pre_y) = (x.clone(), y.clone());
            if jump_x {
                x = sys.apply_jump(&x, tol)?;
            } else {
                y = sys.apply_jump(&y, tol)?;
            }
            jumps.push(CombinedJump {
                t,
                j_pre: j,
                kind,
                pre_x,
                post_x: x.clone(),
                pre_y,
                post_y: y.clone(),
            });
            jx.push(jx[j] + usize::from(jump_x));
            jy.push(jy[j] + usize::from(!jump_x));
            j += 1;
            if zeno {
                push_point_interval(&mut intervals, j, t, &x, &y);
                return Ok((
                    CombinedArc {
                        intervals,
                        jumps,
                        jx,
                        jy,
                        termination: Termination::ZenoLimit,
                    },
                    n_simultaneous,
                ));
            }
            continue;
        }

        if t >= t_max {
            if intervals.len() <= j {
                push_point_interval(&mut intervals, j, t, &x, &y);
            }
            return Ok((
                CombinedArc {
                    intervals,
                    jumps,
                    jx,
                    jy,
                    termination: Termination::HorizonReached,
                },
                n_simultaneous,
            ));
        }

        // Flow both components until the earliest guard event.
        let f = |tt: f64, q: &DVector<f64>| {
            let xc = DVector::from(q.rows(0, n).clone_owned());
            let yc = DVector::from(q.rows(n, n).clone_owned());
            let fx = sys.flow(&xc, u_x(tt, &xc));
            let fy = sys.flow(&yc, u_y(tt, &xc, &yc));
            let mut out = DVector::zeros(2 * n);
            out.rows_mut(0, n).copy_from(&fx);
            out.rows_mut(n, n).copy_from(&fy);
            out
        };
        let guard_x = |q: &DVector<f64>| {
            let mut g = sys.k;
            for i in 0..n {
                g += sys.j[i] * q[i];
            }
            g
        };
        let guard_y = |q: &DVector<f64>| {
            let mut g = sys.k;
            for i in 0..n {
                g += sys.j[i] * q[n + i];
            }
            g
        };
        let accept_x = |_tt: f64, q: &DVector<f64>| {
            let mut h = sys.z2;
            for i in 0..n {
                h += sys.z1[i] * q[i];
            }
            h <= tol
        };
        let accept_y = |_tt: f64, q: &DVector<f64>| {
            let mut h = sys.z2;
            for i in 0..n {
                h += sys.z1[i] * q[n + i];
            }
            h <= tol
        };
        let halt = |_tt: f64, q: &DVector<f64>| {
            let xc = DVector::from(q.rows(0, n).clone_owned());
            let yc = DVector::from(q.rows(n, n).clone_owned());
            !sys.in_flow_set(&xc, opts.leave_band) || !sys.in_flow_set(&yc, opts.leave_band)
        };

        let mut q0 = DVector::zeros(2 * n);
        q0.rows_mut(0, n).copy_from(&x);
        q0.rows_mut(n, n).copy_from(&y);

        let mut sampler = PairSampler {
            samples: Vec::new(),
            next_t: t,
            dt: opts.sample_dt,
            n,
            sys,
            u_x,
            u_y,
        };
        sampler.push(t, &q0);
        sampler.next_t = t + opts.sample_dt;

        let mut last_t = t;
        let mut last_q = q0.clone();
        let end = integrate_segment(
            &f,
            t,
            &q0,
            t_max,
            &[
                EventSpec {
                    guard: &guard_x,
                    accept: &accept_x,
                },
                EventSpec {
                    guard: &guard_y,
                    accept: &accept_y,
                },
            ],
            Some(&halt),
            &opts.ode,
            |step| {
                sampler.absorb(step);
                last_t = step.t1;
                last_q = step.y1.clone();
            },
        )?;

        let (termination, t_end, q_end) = match end {
            SegmentEnd::Horizon => (Some(Termination::HorizonReached), last_t, last_q.clone()),
            SegmentEnd::Event { t: te, y: qe, .. } => (None, te, qe),
            SegmentEnd::Escape { t: te, .. } => {
                (Some(Termination::EscapeDetected), te, last_q.clone())
            }
            SegmentEnd::Halted { t: te, y: qe } => (Some(Termination::LeftFlowSet), te, qe),
        };
        sampler.finish(t_end, &q_end);
        intervals.push(CombinedInterval {
            j,
            samples: sampler.samples,
        });

        t = t_end;
        x = DVector::from(q_end.rows(0, n).clone_owned());
        y = DVector::from(q_end.rows(n, n).clone_owned());
        if let Some(term) = termination {
            return Ok((
                CombinedArc {
                    intervals,
                    jumps,
                    jx,
                    jy,
                    termination: term,
                },
                n_simultaneous,
            ));
        }
        // Guard event: the next loop turn attributes and applies the jump.
    }
}

/// Enumerates the branch tree over simultaneous-jump instants, up to
/// `max_branchings` branch points; later instants default to x-first.
#[allow(clippy::too_many_arguments)]
pub fn enumerate_simultaneous(
    sys: &AffineHybridSystem,
    x0: &DVector<f64>,
    y0: &DVector<f64>,
    t0: f64,
    horizon: f64,
    u_x: &InputFn,
    u_y: &PairInputFn,
    opts: &SimOptions,
    max_branchings: usize,
) -> Result<Vec<CombinedArc>> {
    let mut arcs = Vec::new();
    let mut stack: Vec<Vec<bool>> = vec![Vec::new()];
    while let Some(prefix) = stack.pop() {
        let (arc, n_sim) = simulate_combined_with_choices(
            sys,
            x0,
            y0,
            t0,
            horizon,
            u_x,
            u_y,
            opts,
            SimultaneousPolicy::XFirst,
            &prefix,
            Some(()),
        )?;
        // Sibling subtrees for every defaulted branch point within the cap.
        for p in prefix.len()..n_sim.min(max_branchings) {
            let mut alt = prefix.clone();
            alt.extend(std::iter::repeat_n(true, p - prefix.len()));
            alt.push(false);
            stack.push(alt);
        }
        arcs.push(arc);
    }
    Ok(arcs)
}

/// Splits a combined arc back into the two original arcs by collapsing the
/// combined counter through `jx`, `jy`.
pub fn reparameterize(arc: &CombinedArc) -> (HybridArc, HybridArc, Vec<usize>, Vec<usize>) {
    let extract = |pick_x: bool, own_counter: &[usize]| -> HybridArc {
        let mut intervals: Vec<ArcInterval> = Vec::new();
        for iv in &arc.intervals {
            let own_j = own_counter[iv.j];
            let to_sample = |s: &CombinedSample| Sample {
                t: s.t,
                x: if pick_x { s.x.clone() } else { s.y.clone() },
                f: if pick_x { s.fx.clone() } else { s.fy.clone() },
            };
            match intervals.last_mut() {
                Some(last) if last.j == own_j => {
                    // Continuation across the other component's jump; skip the
                    // duplicated boundary sample.
                    let mut it = iv.samples.iter();
                    if let (Some(first), Some(prev)) = (iv.samples.first(), last.samples.last()) {
                        if (first.t - prev.t).abs() <= 1e-15 * first.t.abs().max(1.0) {
                            it.next();
                        }
                    }
                    last.samples.extend(it.map(to_sample));
                }
                _ => {
                    intervals.push(ArcInterval {
                        j: own_j,
                        samples: iv.samples.iter().map(to_sample).collect(),
                    });
                }
            }
        }
        let jumps = arc
            .jumps
            .iter()
            .filter(|jr| {
                let x_side = match jr.kind {
                    JumpAttribution::XJumped => true,
                    JumpAttribution::YJumped => false,
                    JumpAttribution::BothEnumerated => jr.post_x != jr.pre_x,
                };
                x_side == pick_x
            })
            .map(|jr| JumpRecord {
                t: jr.t,
                j_pre: own_counter[jr.j_pre],
                pre: if pick_x { jr.pre_x.clone() } else { jr.pre_y.clone() },
                post: if pick_x { jr.post_x.clone() } else { jr.post_y.clone() },
            })
            .collect();
        HybridArc {
            intervals,
            jumps,
            termination: arc.termination,
        }
    };
    (
        extract(true, &arc.jx),
        extract(false, &arc.jy),
        arc.jx.clone(),
        arc.jy.clone(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::simulate;
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

    fn pair_zero(_t: f64, _x: &DVector<f64>, _y: &DVector<f64>) -> f64 {
        0.0
    }

    #[test]
    fn identical_pair_stays_identical() {
        let sys = ball();
        let arc = simulate_combined(
            &sys,
            &dvector![0.0, 10.0],
            &dvector![0.0, 10.0],
            0.0,
            10.0,
            &zero_input,
            &pair_zero,
            &SimOptions::default(),
            SimultaneousPolicy::XFirst,
        )
        .unwrap();
        assert_eq!(arc.termination, Termination::HorizonReached);
        // On every positive-duration interval the components coincide; the
        // zero-length interval between the paired jumps holds x+ against y-.
        for iv in &arc.intervals {
            if iv.samples.len() < 2 {
                continue;
            }
            for s in &iv.samples {
                assert_relative_eq!(s.x, s.y, epsilon = 1e-9);
            }
        }
        // Simultaneous guard hits: x and y alternate at the same instants.
        for pair in arc.jumps.chunks(2) {
            if pair.len() == 2 {
                assert_eq!(pair[0].t, pair[1].t);
                assert_eq!(pair[0].kind, JumpAttribution::XJumped);
                assert_eq!(pair[1].kind, JumpAttribution::YJumped);
            }
        }
        for (j, (a, b)) in arc.jx.iter().zip(&arc.jy).enumerate() {
            assert_eq!(a + b, j);
        }
    }

    #[test]
    fn strict_policy_rejects_simultaneous_jumps() {
        let sys = ball();
        let err = simulate_combined(
            &sys,
            &dvector![0.0, 10.0],
            &dvector![0.0, 10.0],
            0.0,
            10.0,
            &zero_input,
            &pair_zero,
            &SimOptions::default(),
            SimultaneousPolicy::Strict,
        );
        assert!(matches!(err, Err(Error::AttributionAmbiguous { .. })));
    }

    #[test]
    fn one_sided_jumps_freeze_the_other_component() {
        let sys = ball();
        // y falls from 100 m and first impacts after the horizon; x bounces
        // every 0.61 s.
        let arc = simulate_combined(
            &sys,
            &dvector![0.0, 3.0],
            &dvector![100.0, 0.0],
            0.0,
            4.0,
            &zero_input,
            &pair_zero,
            &SimOptions::default(),
            SimultaneousPolicy::XFirst,
        )
        .unwrap();
        assert!(arc.jumps.len() >= 2);
        for jr in &arc.jumps {
            assert_eq!(jr.kind, JumpAttribution::XJumped);
            assert_eq!(jr.post_y, jr.pre_y);
            assert!(sys.in_jump_set(&jr.pre_x, 1e-9));
        }
        let last = arc.jx.len() - 1;
        assert_eq!(arc.jy[last], 0);
        assert_eq!(arc.jx[last], arc.jumps.len());
    }

    #[test]
    fn reparameterization_recovers_single_runs() {
        let sys = ball();
        let opts = SimOptions::default();
        let arc = simulate_combined(
            &sys,
            &dvector![0.0, 10.0],
            &dvector![0.0, 7.0],
            0.0,
            8.0,
            &zero_input,
            &pair_zero,
            &opts,
            SimultaneousPolicy::XFirst,
        )
        .unwrap();
        let (ax, ay, jx, jy) = reparameterize(&arc);
        for (j, (a, b)) in jx.iter().zip(&jy).enumerate() {
            assert_eq!(a + b, j);
        }
        let solo_x = simulate(&sys, &dvector![0.0, 10.0], 0.0, 8.0, &zero_input, &opts).unwrap();
        let solo_y = simulate(&sys, &dvector![0.0, 7.0], 0.0, 8.0, &zero_input, &opts).unwrap();
        for (re, solo) in [(&ax, &solo_x), (&ay, &solo_y)] {
            assert_eq!(re.jumps.len(), solo.jumps.len());
            for (a, b) in re.jumps.iter().zip(&solo.jumps) {
                assert_relative_eq!(a.t, b.t, epsilon = 1e-9);
            }
            for iv in &re.intervals {
                for s in &iv.samples {
                    let other = solo.eval(s.t, iv.j).expect("hybrid time in solo domain");
                    assert_relative_eq!(s.x, other, epsilon = 1e-8);
                }
            }
        }
    }

    #[test]
    fn jump_free_pair_has_zero_counters() {
        let sys = ball();
        let arc = simulate_combined(
            &sys,
            &dvector![50.0, 0.0],
            &dvector![60.0, 0.0],
            0.0,
            1.0,
            &zero_input,
            &pair_zero,
            &SimOptions::default(),
            SimultaneousPolicy::XFirst,
        )
        .unwrap();
        assert!(arc.jumps.is_empty());
        assert_eq!(arc.jx, vec![0]);
        assert_eq!(arc.jy, vec![0]);
        let (ax, ay, _, _) = reparameterize(&arc);
        assert!(ax.jumps.is_empty() && ay.jumps.is_empty());
    }

    #[test]
    fn enumeration_branches_on_simultaneous_instants() {
        let sys = ball();
        let arcs = enumerate_simultaneous(
            &sys,
            &dvector![0.0, 10.0],
            &dvector![0.0, 10.0],
            0.0,
            7.0,
            &zero_input,
            &pair_zero,
            &SimOptions::default(),
            2,
        )
        .unwrap();
        // Two branch points within the cap: 4 leaves.
        assert_eq!(arcs.len(), 4);
        for arc in &arcs {
            for (j, (a, b)) in arc.jx.iter().zip(&arc.jy).enumerate() {
                assert_eq!(a + b, j);
            }
            // Jumps come in same-instant pairs; the branch point leads, the
            // complementary component follows as an ordinary jump.
            for pair in arc.jumps.chunks(2) {
                assert_eq!(pair.len(), 2);
                assert_eq!(pair[0].t, pair[1].t);
                assert_eq!(pair[0].kind, JumpAttribution::BothEnumerated);
                assert_ne!(pair[1].kind, JumpAttribution::BothEnumerated);
            }
        }
    }
}
