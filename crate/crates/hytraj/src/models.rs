//! The two bundled scenarios with published constants and certified designs:
//! a bouncing ball with lossless impacts and a periodically forced
//! dissipative oscillator with restitution 0.9.
//!
//! Both plants keep their physical flow set `x1 >= 0`, so the guard row is
//! oriented as `J = [-1, 0]` (the jump-set facet value `J x + K` must be
//! nonpositive on the flow set and the image normal `s (L^-1)^T J^T` must
//! point out of it). The jump set used by the distance function and the
//! certificates is truncated to `x2 <= -r`, and the flow set excludes a ball
//! of radius `3 r` around the origin, which fixes the separation constants:
//! `z3 = eps r`, `z4 = 0.99 sqrt((3r)^2 - (z3 + r)^2)`, `z5 = 0.99`.

use nalgebra::{dmatrix, dvector, DMatrix, DVector, RowDVector};

use crate::distance::DistanceEvaluator;
use crate::domain::{
    check_inter_jump_time, tightest_maximal_tau, DwellKind, DwellTimeSpec, HybridTimeDomain,
};
use crate::error::{Error, Result};
use crate::lyapunov::{
    check_flow_lmis, check_jump_conditions, estimate_sublevel, FeedbackGains, LyapunovDesign,
    SublevelEstimate, VerdictCase, TOL_PSD,
};
use crate::sim::{simulate, HybridArc, SimOptions};
use crate::system::{AffineHybridSystem, Feedforward, GuardGeometry};
use crate::tracking::ControllerDesign;

/// A ready-to-run scenario: plant, certified design, controller data and the
/// initial conditions of the published experiments.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    /// Restitution magnitude of the jump map (L = -eps I for both examples).
    pub eps: f64,
    pub system: AffineHybridSystem,
    pub design: LyapunovDesign,
    pub gains: FeedbackGains,
    pub u_ff: Feedforward,
    /// Jump-set truncation depth along `z1`.
    pub r: f64,
    pub geometry: GuardGeometry,
    pub x_d0: DVector<f64>,
    pub y0: DVector<f64>,
    /// Start of the open-loop divergence demonstration, when published.
    pub alt_y0: Option<DVector<f64>>,
    pub t0: f64,
    pub horizon: f64,
    pub dwell_kind: Option<DwellKind>,
    pub expected_case: VerdictCase,
    pub sim: SimOptions,
    pub kbar_max: usize,
}

fn derived_geometry(eps: f64, r: f64, exclusion: f64) -> Result<GuardGeometry> {
    let z3 = eps * r;
    let z4 = 0.99 * (exclusion * exclusion - (z3 + r) * (z3 + r)).sqrt();
    GuardGeometry::new(z3, z4, 0.99)
}

impl Scenario {
    /// System with the truncated jump set, as used by the distance function
    /// and the certificate geometry.
    pub fn truncated_system(&self) -> AffineHybridSystem {
        self.system.truncated(self.r)
    }

    pub fn distance_evaluator(&self) -> Result<DistanceEvaluator> {
        DistanceEvaluator::new(&self.truncated_system(), self.kbar_max)
    }

    /// Simulates the reference trajectory from `x_d0` under the feedforward.
    pub fn reference(&self) -> Result<HybridArc> {
        let u_ff = self.u_ff;
        let u = move |t: f64, _x: &DVector<f64>| u_ff.eval(t);
        simulate(
            &self.system,
            &self.x_d0,
            self.t0,
            self.horizon,
            &u,
            &self.sim,
        )
    }

    pub fn controller(&self) -> Result<ControllerDesign> {
        ControllerDesign::new(
            &self.system,
            &self.design,
            self.gains.clone(),
            self.u_ff,
            self.reference()?,
        )
    }

    pub fn sublevel(&self) -> Result<SublevelEstimate> {
        estimate_sublevel(&self.truncated_system(), &self.design, &self.geometry)
    }

    /// Dwell spec measured from a reference domain: `tau` set to 0.9 of the
    /// average inter-jump gap with `N0 = 2`, widened to the tightest feasible
    /// value when the exhaustive check rejects the heuristic.
    pub fn measured_dwell(&self, domain: &HybridTimeDomain) -> Result<Option<DwellTimeSpec>> {
        let kind = match self.dwell_kind {
            Some(k) => k,
            None => return Ok(None),
        };
        let jumps = domain.jump_count();
        if jumps == 0 {
            return Err(Error::InvalidGeometry(
                "reference produced no jumps; no dwell spec can be measured".into(),
            ));
        }
        let span = domain.t_end() - domain.t_start();
        let n0 = 2.0;
        let mut tau = 0.9 * span / jumps as f64;
        if kind == DwellKind::MaximalAverage {
            let spec = DwellTimeSpec::new(tau, n0, kind)?;
            if !check_inter_jump_time(domain, &spec)?.holds {
                tau = 1.01 * tightest_maximal_tau(domain, n0);
            }
        }
        let spec = DwellTimeSpec::new(tau, n0, kind)?;
        let check = check_inter_jump_time(domain, &spec)?;
        if !check.holds {
            return Err(Error::InvalidGeometry(format!(
                "measured dwell spec infeasible (margin {:.3e})",
                check.margin
            )));
        }
        Ok(Some(spec))
    }

    /// Structural self-check: design conditions, certificate constants and
    /// flow-set membership of the published initial conditions.
    pub fn validate(&self) -> Result<()> {
        let jump = check_jump_conditions(&self.system, &self.design, TOL_PSD);
        if !jump.ok {
            return Err(Error::InvalidSystem(format!(
                "jump conditions fail: margins {:?}",
                jump.eig_margins
            )));
        }
        let flow = check_flow_lmis(&self.system, &self.design, &self.gains, TOL_PSD)?;
        if !flow.ok {
            return Err(Error::InvalidSystem(format!(
                "flow conditions fail: margins {:?}",
                flow.eig_margins
            )));
        }
        self.sublevel()?;
        for x in [&self.x_d0, &self.y0]
            .into_iter()
            .chain(self.alt_y0.as_ref())
        {
            if !self.system.in_flow_set(x, 1e-9) {
                return Err(Error::OutsideStateSpace {
                    violation: (&self.system.j * x)[0] + self.system.k,
                });
            }
        }
        Ok(())
    }
}

/// Bouncing ball with lossless impacts under gravity 9.81, tracked from
/// `y0 = (0, 3)` against the reference dropped with `x_d(0) = (0, 10)`.
pub fn bouncing_ball() -> Scenario {
    let r = 0.01;
    let exclusion = 3.0 * r;
    let system = AffineHybridSystem::new(
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
    .expect("bouncing-ball data is valid")
    .with_exclusion_radius(exclusion);
    let p = dmatrix![2.25, 0.5; 0.5, 2.0];
    let design = LyapunovDesign::new(p.clone(), p, dvector![0.0, 0.0], -0.25, 0.0)
        .expect("bouncing-ball design is valid");
    let c = RowDVector::from_row_slice(&[-1.0, -0.5]);
    Scenario {
        name: "bouncing-ball".into(),
        eps: 1.0,
        system,
        design,
        gains: FeedbackGains {
            c0: c.clone(),
            c1: c.clone(),
            c2: c,
        },
        u_ff: Feedforward::Zero,
        r,
        geometry: derived_geometry(1.0, r, exclusion).expect("geometry constants positive"),
        x_d0: dvector![0.0, 10.0],
        y0: dvector![0.0, 3.0],
        alt_y0: None,
        t0: 0.0,
        horizon: 15.0,
        dwell_kind: None,
        expected_case: VerdictCase::Case1,
        sim: SimOptions::default(),
        kbar_max: 3,
    }
}

/// Forced mass-spring-damper impacting a wall with restitution 0.9
/// (`k = 1`, `c = 0.02`, unloaded position 1, forcing `100 cos(0.4 t)`).
/// The reference starts at `(50, 0)`; tracking starts at `(100, 0)` and the
/// open-loop divergence demonstration at `(51, 0)`.
pub fn dissipative_oscillator() -> Scenario {
    let r = 0.01;
    let exclusion = 3.0 * r;
    let eps = 0.9;
    let system = AffineHybridSystem::new(
        dmatrix![0.0, 1.0; -1.0, -0.02],
        dvector![0.0, 1.0],
        dvector![0.0, 1.0],
        DMatrix::identity(2, 2) * -eps,
        dvector![0.0, 0.0],
        RowDVector::from_row_slice(&[-1.0, 0.0]),
        0.0,
        RowDVector::from_row_slice(&[0.0, 1.0]),
        0.0,
        -1.0,
    )
    .expect("oscillator data is valid")
    .with_exclusion_radius(exclusion);
    let p0 = DMatrix::identity(2, 2);
    let design = LyapunovDesign::new(p0.clone(), p0 / eps, dvector![0.0, 0.0], 0.0, eps.ln())
        .expect("oscillator design is valid");
    Scenario {
        name: "dissipative-oscillator".into(),
        eps,
        system,
        design,
        gains: FeedbackGains {
            c0: RowDVector::zeros(2),
            c1: RowDVector::zeros(2),
            c2: RowDVector::zeros(2),
        },
        u_ff: Feedforward::Cosine {
            amplitude: 100.0,
            omega: 0.4,
        },
        r,
        geometry: derived_geometry(eps, r, exclusion).expect("geometry constants positive"),
        x_d0: dvector![50.0, 0.0],
        y0: dvector![100.0, 0.0],
        alt_y0: Some(dvector![51.0, 0.0]),
        t0: 0.0,
        horizon: 100.0,
        dwell_kind: Some(DwellKind::MaximalAverage),
        expected_case: VerdictCase::Case3,
        sim: SimOptions::default(),
        kbar_max: 3,
    }
}

/// The bundled scenarios in a fixed order.
pub fn all_scenarios() -> Vec<Scenario> {
    vec![bouncing_ball(), dissipative_oscillator()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Termination;
    use approx::assert_relative_eq;

    #[test]
    fn both_scenarios_validate() {
        for scenario in all_scenarios() {
            scenario.validate().unwrap();
            scenario.distance_evaluator().unwrap();
        }
    }

    #[test]
    fn ball_reference_first_impact_matches_closed_form() {
        let scenario = bouncing_ball();
        let arc = scenario.reference().unwrap();
        assert_eq!(arc.termination, Termination::HorizonReached);
        assert_relative_eq!(arc.jumps[0].t, 20.0 / 9.81, epsilon = 1e-9);
    }

    #[test]
    fn ball_jump_conditions_hold_exactly() {
        let scenario = bouncing_ball();
        let check = check_jump_conditions(&scenario.system, &scenario.design, TOL_PSD);
        assert!(check.ok);
        assert_eq!(scenario.expected_case, VerdictCase::Case1);
    }

    #[test]
    fn oscillator_reference_keeps_jumping() {
        let mut scenario = dissipative_oscillator();
        scenario.horizon = 40.0;
        let arc = scenario.reference().unwrap();
        assert_eq!(arc.termination, Termination::HorizonReached);
        assert!(
            arc.jumps.len() >= 2,
            "expected impacts within 40 s, got {}",
            arc.jumps.len()
        );
        let domain = arc.domain().unwrap();
        let dwell = scenario.measured_dwell(&domain).unwrap().unwrap();
        assert_eq!(dwell.kind, DwellKind::MaximalAverage);
        assert!(check_inter_jump_time(&domain, &dwell).unwrap().holds);
    }

    #[test]
    fn oscillator_neighbors_diverge_open_loop() {
        let mut scenario = dissipative_oscillator();
        scenario.horizon = 40.0;
        let u_ff = scenario.u_ff;
        let u = move |t: f64, _x: &DVector<f64>| u_ff.eval(t);
        let a = simulate(
            &scenario.system,
            &scenario.x_d0,
            0.0,
            scenario.horizon,
            &u,
            &scenario.sim,
        )
        .unwrap();
        let b = simulate(
            &scenario.system,
            scenario.alt_y0.as_ref().unwrap(),
            0.0,
            scenario.horizon,
            &u,
            &scenario.sim,
        )
        .unwrap();
        let ea = a.intervals.last().unwrap().samples.last().unwrap();
        let eb = b.intervals.last().unwrap().samples.last().unwrap();
        let final_err = (&ea.x - &eb.x).norm();
        assert!(
            final_err > 1.0,
            "neighbouring starts stayed close: {final_err}"
        );
    }
}
