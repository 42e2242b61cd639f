//! Embedded Dormand-Prince 5(4) integration with event location.
//!
//! Guard crossings are located by root-finding on the one-step map itself
//! (an Illinois bracket on `tau -> g(step(tau))`), so event states carry the
//! integrator's accuracy rather than an interpolant's. Dense output between
//! accepted steps uses cubic Hermite interpolation.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Butcher tableau of the Dormand-Prince 5(4) pair.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
/// Difference between the 5th- and 4th-order weights (error estimate).
const E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

pub type OdeFn<'a> = dyn Fn(f64, &DVector<f64>) -> DVector<f64> + 'a;
pub type HaltFn<'a> = dyn Fn(f64, &DVector<f64>) -> bool + 'a;

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub h_max: f64,
    pub escape_bound: f64,
    /// Band on |J x + K| within which the state counts as on the guard.
    pub tol_event: f64,
    /// Step budget per flow leg; exhausting it reports a stall (e.g. a
    /// discontinuous right-hand side sliding along a switching surface).
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            h_max: 0.1,
            escape_bound: 1e9,
            tol_event: 1e-10,
            max_steps: 2_000_000,
        }
    }
}

/// One accepted integration step together with end-point derivatives.
#[derive(Debug, Clone)]
pub struct AcceptedStep {
    pub t0: f64,
    pub t1: f64,
    pub y0: DVector<f64>,
    pub y1: DVector<f64>,
    pub f0: DVector<f64>,
    pub f1: DVector<f64>,
}

impl AcceptedStep {
    /// Cubic Hermite interpolation at `t` in `[t0, t1]`.
    pub fn interpolate(&self, t: f64) -> DVector<f64> {
        let h = self.t1 - self.t0;
        if h == 0.0 {
            return self.y0.clone();
        }
        let th = (t - self.t0) / h;
        let th2 = th * th;
        let th3 = th2 * th;
        let h00 = 2.0 * th3 - 3.0 * th2 + 1.0;
        let h10 = th3 - 2.0 * th2 + th;
        let h01 = -2.0 * th3 + 3.0 * th2;
        let h11 = th3 - th2;
        &self.y0 * h00 + &self.f0 * (h10 * h) + &self.y1 * h01 + &self.f1 * (h11 * h)
    }
}

/// A scalar guard watched during integration.
pub struct EventSpec<'a> {
    /// Guard value; an event is a sign change from nonpositive to positive.
    pub guard: &'a dyn Fn(&DVector<f64>) -> f64,
    /// Decides at the located crossing whether it is a genuine event. A
    /// crossing that is declined (e.g. the half-hyperplane condition fails)
    /// disarms the guard until the state returns below the band.
    pub accept: &'a dyn Fn(f64, &DVector<f64>) -> bool,
}

#[derive(Debug, Clone)]
pub enum SegmentEnd {
    /// Reached `t_max`.
    Horizon,
    /// An accepted guard crossing; `y` is the located pre-event state.
    Event { index: usize, t: f64, y: DVector<f64> },
    /// State norm exceeded the escape bound (or became non-finite).
    Escape { t: f64, norm: f64 },
    /// The caller-supplied halt predicate fired.
    Halted { t: f64, y: DVector<f64> },
}

/// Single 5th-order step of length `h` from `(t, y)` with known `f0 = f(t, y)`.
/// Returns `(y1, err_weights)` where the error vector is the embedded estimate.
fn rk_step(f: &OdeFn, t: f64, y: &DVector<f64>, f0: &DVector<f64>, h: f64) -> (DVector<f64>, DVector<f64>) {
    let mut k: Vec<DVector<f64>> = Vec::with_capacity(7);
    k.push(f0.clone());
    for i in 0..6 {
        let mut ys = y.clone();
        for (j, kj) in k.iter().enumerate() {
            let aij = A[i][j];
            if aij != 0.0 {
                ys.axpy(aij * h, kj, 1.0);
            }
        }
        k.push(f(t + C[i] * h, &ys));
    }
    // k[6] is f(t + h, y1) because the last stage row equals the 5th-order weights.
    let y1 = {
        let mut ys = y.clone();
        for (j, kj) in k.iter().take(6).enumerate() {
            let bj = A[5][j];
            if bj != 0.0 {
                ys.axpy(bj * h, kj, 1.0);
            }
        }
        ys
    };
    let mut err = DVector::zeros(y.len());
    for (j, kj) in k.iter().enumerate() {
        if E[j] != 0.0 {
            err.axpy(E[j] * h, kj, 1.0);
        }
    }
    (y1, err)
}

/// 5th-order solution of a sub-step of length `tau` (no error control);
/// valid for `tau` up to the accepted step length.
fn rk_substep(f: &OdeFn, t: f64, y: &DVector<f64>, f0: &DVector<f64>, tau: f64) -> DVector<f64> {
    rk_step(f, t, y, f0, tau).0
}

fn error_norm(err: &DVector<f64>, y0: &DVector<f64>, y1: &DVector<f64>, opts: &OdeOptions) -> f64 {
    let mut acc = 0.0;
    for i in 0..err.len() {
        let scale = opts.abs_tol + opts.rel_tol * y0[i].abs().max(y1[i].abs());
        let r = err[i] / scale;
        acc += r * r;
    }
    (acc / err.len() as f64).sqrt()
}

fn initial_step(f0: &DVector<f64>, y0: &DVector<f64>, opts: &OdeOptions, span: f64) -> f64 {
    let scale = opts.abs_tol + opts.rel_tol * y0.norm();
    let d1 = f0.norm();
    let h = if d1 > 1e-12 { 0.01 * scale.max(1e-12) / d1 } else { 1e-4 };
    h.max(1e-10).min(opts.h_max).min(span)
}

/// Integrates `y' = f(t, y)` from `(t0, y0)` until `t_max`, an accepted event,
/// an escape, or a halt. Every accepted (possibly event-truncated) step is
/// handed to `on_step` in order.
#[allow(clippy::too_many_arguments)]
pub fn integrate_segment(
    f: &OdeFn,
    t0: f64,
    y0: &DVector<f64>,
    t_max: f64,
    events: &[EventSpec],
    halt: Option<&HaltFn>,
    opts: &OdeOptions,
    mut on_step: impl FnMut(&AcceptedStep),
) -> Result<SegmentEnd> {
    let mut t = t0;
    let mut y = y0.clone();
    let mut fy = f(t, &y);
    // A guard is armed once its value drops below the event band; crossings of
    // unarmed guards (e.g. straight after a jump placed the state on G(D)) are
    // ignored.
    let mut armed: Vec<bool> = events
        .iter()
        .map(|ev| (ev.guard)(&y) < -opts.tol_event)
        .collect();
    let mut g_prev: Vec<f64> = events.iter().map(|ev| (ev.guard)(&y)).collect();

    if t_max <= t0 {
        return Ok(SegmentEnd::Horizon);
    }
    let mut h = initial_step(&fy, &y, opts, t_max - t0);
    let mut steps = 0usize;

    loop {
        let h_min = 1e-14 * t.abs().max(1.0);
        if h < h_min {
            return Err(Error::IntegratorStall { t, h });
        }
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::IntegratorStall { t, h });
        }
        let h_trial = h.min(t_max - t);
        let (y1, err) = rk_step(f, t, &y, &fy, h_trial);
        let en = error_norm(&err, &y, &y1, opts);
        if !en.is_finite() {
            return Ok(SegmentEnd::Escape { t, norm: f64::NAN });
        }
        if en > 1.0 {
            // Reject; shrink and retry (classic I controller with safety 0.9).
            h = h_trial * (0.9 * en.powf(-0.2)).clamp(0.1, 1.0);
            continue;
        }

        let t1 = t + h_trial;
        let f1 = f(t1, &y1);

        // Event scan over this step: earliest accepted crossing wins.
        let mut hit: Option<(usize, f64, DVector<f64>)> = None;
        for (idx, ev) in events.iter().enumerate() {
            let g0 = g_prev[idx];
            let g1 = (ev.guard)(&y1);
            if armed[idx] && g0 <= 0.0 && g1 > 0.0 {
                let (tau, y_ev) = locate_crossing(f, t, &y, &fy, h_trial, ev.guard, g0, g1, opts);
                match &hit {
                    Some((_, tau_best, _)) if *tau_best <= tau => {}
                    _ => hit = Some((idx, tau, y_ev)),
                }
            }
        }

        if let Some((idx, tau, y_ev)) = hit {
            let t_ev = t + tau;
            if (events[idx].accept)(t_ev, &y_ev) {
                let f_ev = f(t_ev, &y_ev);
                on_step(&AcceptedStep {
                    t0: t,
                    t1: t_ev,
                    y0: y.clone(),
                    y1: y_ev.clone(),
                    f0: fy.clone(),
                    f1: f_ev,
                });
                return Ok(SegmentEnd::Event {
                    index: idx,
                    t: t_ev,
                    y: y_ev,
                });
            }
            // Declined crossing: pass through and disarm until re-entry.
            armed[idx] = false;
        }

        let step = AcceptedStep {
            t0: t,
            t1,
            y0: y.clone(),
            y1: y1.clone(),
            f0: fy.clone(),
            f1: f1.clone(),
        };
        on_step(&step);

        t = t1;
        y = y1;
        fy = f1;
        for (idx, ev) in events.iter().enumerate() {
            let g = (ev.guard)(&y);
            if g < -opts.tol_event {
                armed[idx] = true;
            }
            g_prev[idx] = g;
        }

        let norm = y.norm();
        if !norm.is_finite() || norm > opts.escape_bound {
            return Ok(SegmentEnd::Escape { t, norm });
        }
        if let Some(halt_fn) = halt {
            if halt_fn(t, &y) {
                return Ok(SegmentEnd::Halted { t, y });
            }
        }
        if t >= t_max - 1e-14 * t_max.abs().max(1.0) {
            return Ok(SegmentEnd::Horizon);
        }

        let scale = if en == 0.0 {
            5.0
        } else {
            (0.9 * en.powf(-0.2)).clamp(0.2, 5.0)
        };
        h = (h_trial * scale).min(opts.h_max);
    }
}

/// Illinois root search for the guard zero on the one-step map over `[0, h]`.
#[allow(clippy::too_many_arguments)]
fn locate_crossing(
    f: &OdeFn,
    t: f64,
    y: &DVector<f64>,
    fy: &DVector<f64>,
    h: f64,
    guard: &dyn Fn(&DVector<f64>) -> f64,
    g0: f64,
    g1: f64,
    opts: &OdeOptions,
) -> (f64, DVector<f64>) {
    let (mut a, mut ga) = (0.0f64, g0);
    let (mut b, mut gb) = (h, g1);
    let mut best = (b, rk_substep(f, t, y, fy, b));
    let mut side = 0i32;
    for _ in 0..80 {
        let m = if gb != ga { b - gb * (b - a) / (gb - ga) } else { 0.5 * (a + b) };
        let m = if m <= a || m >= b { 0.5 * (a + b) } else { m };
        let ym = rk_substep(f, t, y, fy, m);
        let gm = guard(&ym);
        best = (m, ym);
        if gm.abs() <= opts.tol_event || (b - a) < 1e-16 * t.abs().max(1.0) {
            return best;
        }
        if gm > 0.0 {
            b = m;
            gb = gm;
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        } else {
            a = m;
            ga = gm;
            if side == -1 {
                gb *= 0.5;
            }
            side = -1;
        }
    }
    best
}
