//! Switching tracking controller for the affine class.
//!
//! The plant input is `u = u_ff(t) + u_fb(t, y)` where `u_fb` switches on the
//! argmin region of the pair `(reference, plant)`:
//!
//! ```text
//!   S0: u_fb = -c0 (xd_bar(t) - y)
//!   S1: u_fb = -beta2^T beta1(t) / (beta2^T beta2) + c1 (xd_bar(t) - Gbar(y))
//!   S2: u_fb = -beta4^T beta3(t) / (beta4^T beta4) - c2 (Gbar(xd_bar(t)) - y)
//! ```
//!
//! with `beta2 = -(L+MJ) B`, `beta4 = -B`. The S1/S2 offsets cancel the
//! reference drive in mirrored coordinates; they require `beta1(t)` in
//! `span(beta2)` and `beta3(t)` in `span(beta4)`. The S0/S2 cases carry the
//! `-c` sign of the error convention; the S1 error `xd_bar - Gbar(y)` evolves
//! through `-(L+MJ) ydot`, which flips the effective gain sign, so `+c1`
//! closes that loop as `(L+MJ) A (L+MJ)^{-1} + beta2 c1`.

use nalgebra::DVector;

use crate::combined::{simulate_combined, CombinedArc, SimultaneousPolicy};
use crate::distance::{DistanceEvaluator, DistancePoint};
use crate::error::{Error, Result};
use crate::lyapunov::{
    classify, gbar, gbar_inverse, monitor_v_along_arc, LyapunovDesign, MonitorOptions,
    MonitorReport, Region,
};
use crate::sim::{HybridArc, SimOptions};
use crate::system::{AffineHybridSystem, Feedforward};

/// Hysteresis band on the V-branch comparison in the control law; prevents
/// case flicker near branch boundaries.
pub const CONTROL_REGION_BAND: f64 = 1e-9;

/// Controller data: feedback rows, feedforward and the precomputed reference.
#[derive(Debug, Clone)]
pub struct ControllerDesign {
    pub gains: crate::lyapunov::FeedbackGains,
    pub u_ff: Feedforward,
    pub reference: HybridArc,
}

impl ControllerDesign {
    pub fn new(
        sys: &AffineHybridSystem,
        design: &LyapunovDesign,
        gains: crate::lyapunov::FeedbackGains,
        u_ff: Feedforward,
        reference: HybridArc,
    ) -> Result<Self> {
        if sys.b.norm() == 0.0 {
            return Err(Error::InvalidSystem("B must be nonzero".into()));
        }
        let lmj = design.l_mj(sys);
        if lmj.clone().try_inverse().is_none() {
            return Err(Error::SingularDesign);
        }
        if (&lmj * &sys.b).norm() == 0.0 {
            return Err(Error::InvalidSystem("beta2 = -(L+MJ)B must be nonzero".into()));
        }
        Ok(Self {
            gains,
            u_ff,
            reference,
        })
    }
}

/// Pre-jump reference state at time `t`: the minimal-`j` interval covering `t`.
pub fn reference_selector(arc: &HybridArc, t: f64) -> Result<DVector<f64>> {
    let slack = 1e-9 * t.abs().max(1.0);
    for iv in &arc.intervals {
        if t >= iv.t_start() - slack && t <= iv.t_end() + slack {
            if let Some(x) = iv.eval(t) {
                return Ok(x);
            }
        }
    }
    Err(Error::OutOfHorizon {
        t,
        t0: arc.t_start(),
        t1: arc.t_end(),
    })
}

/// `beta2 = -(L+MJ) B`.
pub fn beta2(sys: &AffineHybridSystem, design: &LyapunovDesign) -> DVector<f64> {
    -(design.l_mj(sys) * &sys.b)
}

/// `beta4 = -B`.
pub fn beta4(sys: &AffineHybridSystem) -> DVector<f64> {
    -sys.b.clone()
}

/// Time-varying controller offsets:
///
/// ```text
///   beta1(t) = [I  -(L+MJ)] (f_ff(xd), f_ff(Gbar^o(xd)))
///   beta3(t) = [L+MJ  -I  ] (f_ff(xd), f_ff(Gbar(xd)))
/// ```
///
/// with `f_ff(z) = A z + B u_ff(t) + E` and `xd = xd_bar(t)`.
pub fn betas(
    sys: &AffineHybridSystem,
    design: &LyapunovDesign,
    controller: &ControllerDesign,
    t: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let xd = reference_selector(&controller.reference, t)?;
    let uff = controller.u_ff.eval(t);
    let f_ff = |z: &DVector<f64>| &sys.a * z + &sys.b * uff + &sys.e;
    let lmj = design.l_mj(sys);
    let beta1 = f_ff(&xd) - &lmj * f_ff(&gbar_inverse(sys, design, &xd)?);
    let beta3 = &lmj * f_ff(&xd) - f_ff(&gbar(sys, design, &xd));
    Ok((beta1, beta3))
}

/// Largest residual of the span conditions over a time grid:
/// `||(I - b b^T / b^T b) beta(t)||` for both offset/direction pairs.
pub fn span_condition_residual(
    sys: &AffineHybridSystem,
    design: &LyapunovDesign,
    controller: &ControllerDesign,
    t_grid: &[f64],
) -> Result<f64> {
    let b2 = beta2(sys, design);
    let b4 = beta4(sys);
    let mut worst = 0.0f64;
    for &t in t_grid {
        let (b1, b3) = betas(sys, design, controller, t)?;
        let r1 = (&b1 - &b2 * (b2.dot(&b1) / b2.norm_squared())).norm();
        let r3 = (&b3 - &b4 * (b4.dot(&b3) / b4.norm_squared())).norm();
        worst = worst.max(r1).max(r3);
    }
    Ok(worst)
}

/// Switching feedback with an explicit reference state (used in closed loop,
/// where the region is classified against the live combined sample).
pub fn feedback_with_reference(
    sys: &AffineHybridSystem,
    design: &LyapunovDesign,
    controller: &ControllerDesign,
    t: f64,
    x_ref: &DVector<f64>,
    y: &DVector<f64>,
) -> Result<(f64, Region)> {
    let (_, region) = classify(sys, design, x_ref, y, CONTROL_REGION_BAND);
    let xd = reference_selector(&controller.reference, t)?;
    let u = match region {
        Region::S0 => -(&controller.gains.c0 * (&xd - y))[0],
        Region::S1 => {
            let (b1, _) = betas(sys, design, controller, t)?;
            let b2 = beta2(sys, design);
            -b2.dot(&b1) / b2.norm_squared() + (&controller.gains.c1 * (&xd - gbar(sys, design, y)))[0]
        }
        Region::S2 => {
            let (_, b3) = betas(sys, design, controller, t)?;
            let b4 = beta4(sys);
            -b4.dot(&b3) / b4.norm_squared() - (&controller.gains.c2 * (gbar(sys, design, &xd) - y))[0]
        }
    };
    Ok((u, region))
}

/// Feedback at `(t, y)` with the region classified against the reference
/// selector state.
pub fn feedback(
    sys: &AffineHybridSystem,
    design: &LyapunovDesign,
    controller: &ControllerDesign,
    t: f64,
    y: &DVector<f64>,
) -> Result<f64> {
    let xd = reference_selector(&controller.reference, t)?;
    feedback_with_reference(sys, design, controller, t, &xd, y).map(|(u, _)| u)
}

/// A closed-loop run: the combined arc, the distance profile and the
/// Lyapunov monitor report.
#[derive(Debug, Clone)]
pub struct ClosedLoopRun {
    pub arc: CombinedArc,
    pub distance: Vec<DistancePoint>,
    pub monitor: MonitorReport,
}

/// Runs the pair (reference, plant) with `u_x = u_ff` and
/// `u_y = u_ff + u_fb`; evaluates the distance and V profiles along the arc.
#[allow(clippy::too_many_arguments)]
pub fn closed_loop_simulate(
    sys: &AffineHybridSystem,
    design: &LyapunovDesign,
    controller: &ControllerDesign,
    evaluator: &DistanceEvaluator,
    y0: &DVector<f64>,
    t0: f64,
    horizon: f64,
    opts: &SimOptions,
    monitor_opts: &MonitorOptions,
) -> Result<ClosedLoopRun> {
    let ref_arc = &controller.reference;
    let eps = 1e-9 * (t0.abs() + horizon).max(1.0);
    if t0 < ref_arc.t_start() - eps || t0 + horizon > ref_arc.t_end() + eps {
        return Err(Error::OutOfHorizon {
            t: t0 + horizon,
            t0: ref_arc.t_start(),
            t1: ref_arc.t_end(),
        });
    }
    let x0 = reference_selector(ref_arc, t0)?;
    let u_ff = controller.u_ff;
    let u_x = move |t: f64, _x: &DVector<f64>| u_ff.eval(t);
    let u_y = |t: f64, x: &DVector<f64>, y: &DVector<f64>| {
        let fb = feedback_with_reference(sys, design, controller, t, x, y)
            .map(|(u, _)| u)
            .expect("reference coverage was checked up front");
        u_ff.eval(t) + fb
    };
    let arc = simulate_combined(
        sys,
        &x0,
        y0,
        t0,
        horizon,
        &u_x,
        &u_y,
        opts,
        SimultaneousPolicy::XFirst,
    )?;
    let distance = evaluator.profile(&arc)?;
    let monitor = monitor_v_along_arc(&arc, sys, design, monitor_opts);
    Ok(ClosedLoopRun {
        arc,
        distance,
        monitor,
    })
}
