//! Certificate and run reports, rendered as plain text and as JSON.

use hytraj::lyapunov::{
    Assumption3Report, ClassKBounds, FlowLmiCheck, JumpConditionCheck, StabilityVerdict,
    SublevelEstimate,
};
use serde::Serialize;

use crate::output::fmt;

#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    pub scenario: String,
    pub assumption3_margins: [f64; 3],
    pub assumption3_samples: usize,
    pub jump_margins: [f64; 2],
    pub flow_margins: [f64; 3],
    pub delta1: f64,
    pub v_l: f64,
    pub ell_g: f64,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub sigma: f64,
    pub l_v: f64,
    pub dwell: Option<DwellReport>,
    pub verdict: String,
    pub verdict_details: Vec<(String, f64)>,
    /// Basin inflation constant `exp(lambda_d N0)` of the dwell argument; the
    /// certified estimate is `v_l / kbar_factor`, with no claim beyond it.
    pub kbar_factor: f64,
    pub basin_estimate: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DwellReport {
    pub kind: String,
    pub tau: f64,
    pub n0: f64,
    /// Worst slack of the dwell inequality over the reference domain.
    pub margin: f64,
    pub reference_jumps: usize,
}

impl CertificateReport {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        scenario: String,
        assumption3: &Assumption3Report,
        jump: &JumpConditionCheck,
        flow: &FlowLmiCheck,
        sublevel: &SublevelEstimate,
        class_k: &ClassKBounds,
        dwell: Option<DwellReport>,
        verdict: &StabilityVerdict,
    ) -> Self {
        let n0 = dwell.as_ref().map(|d| d.n0).unwrap_or(0.0);
        let kbar_factor = (verdict_uses_dwell(verdict) as u8 as f64
            * sublevel_lambda_d_term(verdict, n0))
        .exp()
        .max(1.0);
        Self {
            scenario,
            assumption3_margins: assumption3.margins,
            assumption3_samples: assumption3.samples_per_bullet,
            jump_margins: jump.eig_margins,
            flow_margins: flow.eig_margins,
            delta1: sublevel.delta1,
            v_l: sublevel.v_l,
            ell_g: sublevel.ell_g,
            lambda_lo: sublevel.lambda_lo,
            lambda_hi: sublevel.lambda_hi,
            sigma: class_k.sigma,
            l_v: class_k.l_v,
            dwell,
            verdict: verdict.case.to_string(),
            verdict_details: verdict
                .details
                .iter()
                .map(|(k, v)| (k.to_string(), *v))
                .collect(),
            kbar_factor,
            basin_estimate: sublevel.v_l / kbar_factor,
            feasible: jump.ok && flow.ok,
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("certificate report: {}\n", self.scenario));
        s.push_str(&format!(
            "  assumption margins (z3, z4, z5): {} {} {}  [{} samples each]\n",
            fmt(self.assumption3_margins[0]),
            fmt(self.assumption3_margins[1]),
            fmt(self.assumption3_margins[2]),
            self.assumption3_samples,
        ));
        s.push_str(&format!(
            "  jump condition margins: {} {}\n",
            fmt(self.jump_margins[0]),
            fmt(self.jump_margins[1]),
        ));
        s.push_str(&format!(
            "  flow condition margins: {} {} {}\n",
            fmt(self.flow_margins[0]),
            fmt(self.flow_margins[1]),
            fmt(self.flow_margins[2]),
        ));
        s.push_str(&format!(
            "  delta1 = {}, v_L = {}, ell_g = {}\n",
            fmt(self.delta1),
            fmt(self.v_l),
            fmt(self.ell_g),
        ));
        s.push_str(&format!(
            "  lambda range [{}, {}], sigma = {}, L_V = {}\n",
            fmt(self.lambda_lo),
            fmt(self.lambda_hi),
            fmt(self.sigma),
            fmt(self.l_v),
        ));
        if let Some(d) = &self.dwell {
            s.push_str(&format!(
                "  dwell ({}): tau = {}, N0 = {}, margin = {} over {} reference jumps\n",
                d.kind,
                fmt(d.tau),
                fmt(d.n0),
                fmt(d.margin),
                d.reference_jumps,
            ));
        }
        s.push_str(&format!("  verdict: {}\n", self.verdict));
        for (k, v) in &self.verdict_details {
            s.push_str(&format!("    {k}: {}\n", fmt(*v)));
        }
        s.push_str(&format!(
            "  basin estimate: v_L / {} = {}\n",
            fmt(self.kbar_factor),
            fmt(self.basin_estimate),
        ));
        s.push_str(&format!("  feasible: {}\n", self.feasible));
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

fn verdict_uses_dwell(verdict: &StabilityVerdict) -> bool {
    matches!(
        verdict.case,
        hytraj::lyapunov::VerdictCase::Case2 | hytraj::lyapunov::VerdictCase::Case3
    )
}

fn sublevel_lambda_d_term(verdict: &StabilityVerdict, n0: f64) -> f64 {
    // Case 2 inflates by exp(lambda_d N0) when lambda_d >= 0; case 3 by
    // exp(lambda_c tau N0) when lambda_c >= 0. The details carry -lambda_d
    // and -(lambda_d + lambda_c tau); recover the relevant exponents.
    let get = |name: &str| {
        verdict
            .details
            .iter()
            .find(|(k, _)| *k == name)
            .map(|(_, v)| -v)
            .unwrap_or(0.0)
    };
    match verdict.case {
        hytraj::lyapunov::VerdictCase::Case2 => get("-lambda_d").max(0.0) * n0,
        hytraj::lyapunov::VerdictCase::Case3 => {
            let lc = get("-lambda_c");
            let combo = get("-(lambda_d + lambda_c tau)");
            let ld = get("-lambda_d");
            let tau_lc = combo - ld;
            if lc >= 0.0 {
                tau_lc.max(0.0) * n0
            } else {
                0.0
            }
        }
        _ => 0.0,
    }
}

/// Simulation section of a run report: jump table and termination.
#[derive(Debug, Clone, Serialize)]
pub struct SimulationReport {
    pub scenario: String,
    pub termination: String,
    pub jump_count: usize,
    pub jump_times: Vec<f64>,
    pub t_end: f64,
    pub files: Vec<String>,
}

impl SimulationReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("simulation report: {}\n", self.scenario));
        s.push_str(&format!("  termination: {}\n", self.termination));
        s.push_str(&format!("  jumps: {}\n", self.jump_count));
        for (k, t) in self.jump_times.iter().enumerate() {
            s.push_str(&format!("    jump {k}: t = {}\n", fmt(*t)));
        }
        s.push_str(&format!("  t_end: {}\n", fmt(self.t_end)));
        for f in &self.files {
            s.push_str(&format!("  wrote {f}\n"));
        }
        s
    }
}
