//! The four subcommands: simulate, certify, track, figures.
//!
//! All artefacts are plain CSV (17-significant-digit floats) plus a report in
//! text and JSON form; identical configs produce byte-identical outputs.

use std::path::{Path, PathBuf};

use hytraj::domain::check_inter_jump_time;
use hytraj::lyapunov::{
    check_flow_lmis, check_jump_conditions, class_k_bounds, estimate_sublevel, stability_verdict,
    verify_assumption3, MonitorOptions, SamplerOptions,
};
use hytraj::models::{all_scenarios, Scenario};
use hytraj::sim::{simulate, HybridArc, Termination};
use hytraj::system::Feedforward;
use hytraj::tracking::{closed_loop_simulate, feedback_with_reference, ClosedLoopRun};
use nalgebra::DVector;

use crate::config::{ConfigError, ScenarioConfig};
use crate::output::{write_atomic, Csv, CsvCell};
use crate::report::{CertificateReport, DwellReport, SimulationReport};

#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("certificate infeasible: {0}")]
    Infeasible(String),
    #[error("simulation ended abnormally: {0}")]
    Abnormal(String),
    #[error("{0}")]
    Runtime(#[from] hytraj::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CommandError {
    /// Process exit code: 2 config, 3 infeasible certificate, 4 abnormal run.
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Config(_) => 2,
            CommandError::Infeasible(_) => 3,
            CommandError::Abnormal(_) | CommandError::Runtime(_) | CommandError::Io(_) => 4,
        }
    }
}

fn termination_name(t: Termination) -> &'static str {
    match t {
        Termination::HorizonReached => "HorizonReached",
        Termination::LeftFlowSet => "LeftFlowSet",
        Termination::ZenoLimit => "ZenoLimit",
        Termination::EscapeDetected => "EscapeDetected",
    }
}

fn rel_name(path: &Path, root: &Path) -> String {
    path.strip_prefix(root)
        .unwrap_or(path)
        .display()
        .to_string()
}

fn arc_csv(arc: &HybridArc, n: usize) -> Csv {
    let state_cols: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    let mut header = vec!["t", "j"];
    header.extend(state_cols.iter().map(|s| s.as_str()));
    let mut csv = Csv::new(&header);
    for iv in &arc.intervals {
        for s in &iv.samples {
            let mut row = vec![CsvCell::F(s.t), CsvCell::U(iv.j)];
            row.extend(s.x.iter().map(|&v| CsvCell::F(v)));
            csv.row(&row);
        }
    }
    csv
}

fn feedforward_fn(u_ff: Feedforward) -> impl Fn(f64, &DVector<f64>) -> f64 + Copy {
    move |t: f64, _x: &DVector<f64>| u_ff.eval(t)
}

/// Simulates the reference (and, when configured, the open-loop neighbour)
/// and writes one CSV per trajectory.
pub fn cmd_simulate(config: &ScenarioConfig, out: &Path) -> Result<SimulationReport, CommandError> {
    let scenario = config.to_scenario()?;
    let dir = out.join(&scenario.name);
    let u = feedforward_fn(scenario.u_ff);
    let n = scenario.system.dim();

    let reference = simulate(
        &scenario.system,
        &scenario.x_d0,
        scenario.t0,
        scenario.horizon,
        &u,
        &scenario.sim,
    )?;
    let mut files = Vec::new();
    let ref_path = dir.join("reference.csv");
    arc_csv(&reference, n).write(&ref_path)?;
    files.push(rel_name(&ref_path, out));

    if let Some(alt) = &scenario.alt_y0 {
        let arc = simulate(
            &scenario.system,
            alt,
            scenario.t0,
            scenario.horizon,
            &u,
            &scenario.sim,
        )?;
        let path = dir.join("openloop_alt.csv");
        arc_csv(&arc, n).write(&path)?;
        files.push(rel_name(&path, out));
    }

    let report = SimulationReport {
        scenario: scenario.name.clone(),
        termination: termination_name(reference.termination).to_string(),
        jump_count: reference.jumps.len(),
        jump_times: reference.jump_times(),
        t_end: reference.t_end(),
        files,
    };
    write_atomic(&dir.join("sim_report.txt"), &report.to_text())?;
    write_atomic(
        &dir.join("sim_report.json"),
        &serde_json::to_string_pretty(&report).expect("report serialises"),
    )?;
    if reference.termination != Termination::HorizonReached {
        return Err(CommandError::Abnormal(report.termination));
    }
    Ok(report)
}

/// Runs the certificate pipeline and writes the report.
pub fn cmd_certify(config: &ScenarioConfig, out: &Path) -> Result<CertificateReport, CommandError> {
    let scenario = config.to_scenario()?;
    let dir = out.join(&scenario.name);
    let tols = &config.tolerances;

    let sys_r = scenario.truncated_system();
    let sampler = SamplerOptions {
        n_samples: tols.assumption_samples,
        ..SamplerOptions::new(scenario.system.dim(), tols.sampling_radius, tols.seed)
    };
    let assumption = verify_assumption3(&sys_r, &scenario.geometry, &sampler)
        .map_err(|e| CommandError::Infeasible(e.to_string()))?;
    let jump = check_jump_conditions(&scenario.system, &scenario.design, tols.tol_psd);
    let flow = check_flow_lmis(&scenario.system, &scenario.design, &scenario.gains, tols.tol_psd)
        .map_err(|e| CommandError::Infeasible(e.to_string()))?;
    let sublevel = estimate_sublevel(&sys_r, &scenario.design, &scenario.geometry)
        .map_err(|e| CommandError::Infeasible(e.to_string()))?;
    let class_k = class_k_bounds(&scenario.system, &scenario.design);

    let dwell = match scenario.dwell_kind {
        Some(_) => {
            let reference = scenario.reference()?;
            let domain = reference.domain()?;
            let spec = scenario
                .measured_dwell(&domain)
                .map_err(|e| CommandError::Infeasible(e.to_string()))?
                .expect("dwell kind configured");
            let check = check_inter_jump_time(&domain, &spec)?;
            Some((spec, check, domain.jump_count()))
        }
        None => None,
    };
    let verdict = stability_verdict(&scenario.design, dwell.as_ref().map(|(s, _, _)| s));

    let report = CertificateReport::new(
        scenario.name.clone(),
        &assumption,
        &jump,
        &flow,
        &sublevel,
        &class_k,
        dwell.map(|(spec, check, jumps)| DwellReport {
            kind: match spec.kind {
                hytraj::domain::DwellKind::MinimalAverage => "minimal-average".to_string(),
                hytraj::domain::DwellKind::MaximalAverage => "maximal-average".to_string(),
            },
            tau: spec.tau,
            n0: spec.n0,
            margin: check.margin,
            reference_jumps: jumps,
        }),
        &verdict,
    );
    write_atomic(&dir.join("report.txt"), &report.to_text())?;
    write_atomic(&dir.join("report.json"), &report.to_json())?;
    if !report.feasible {
        return Err(CommandError::Infeasible(format!(
            "jump margins {:?}, flow margins {:?}",
            report.jump_margins, report.flow_margins
        )));
    }
    Ok(report)
}

/// Runs the closed loop and writes the profile CSVs.
pub fn cmd_track(config: &ScenarioConfig, out: &Path) -> Result<SimulationReport, CommandError> {
    let scenario = config.to_scenario()?;
    let dir = out.join(&scenario.name);
    let run = run_tracking(&scenario)?;
    let files = write_tracking_profiles(&scenario, &run, &dir, out)?;

    let report = SimulationReport {
        scenario: scenario.name.clone(),
        termination: termination_name(run.arc.termination).to_string(),
        jump_count: run.arc.jumps.len(),
        jump_times: run.arc.jumps.iter().map(|j| j.t).collect(),
        t_end: run.arc.t_end(),
        files,
    };
    write_atomic(&dir.join("track_report.txt"), &report.to_text())?;
    write_atomic(
        &dir.join("track_report.json"),
        &serde_json::to_string_pretty(&report).expect("report serialises"),
    )?;
    if run.arc.termination != Termination::HorizonReached {
        return Err(CommandError::Abnormal(report.termination));
    }
    Ok(report)
}

fn run_tracking(scenario: &Scenario) -> Result<ClosedLoopRun, CommandError> {
    let ctrl = scenario.controller()?;
    let evaluator = scenario.distance_evaluator()?;
    Ok(closed_loop_simulate(
        &scenario.system,
        &scenario.design,
        &ctrl,
        &evaluator,
        &scenario.y0,
        scenario.t0,
        scenario.horizon,
        &scenario.sim,
        &MonitorOptions::default(),
    )?)
}

fn write_tracking_profiles(
    scenario: &Scenario,
    run: &ClosedLoopRun,
    dir: &Path,
    root: &Path,
) -> Result<Vec<String>, CommandError> {
    let ctrl = scenario.controller()?;
    let mut files = Vec::new();
    let mut push = |path: PathBuf| files.push(rel_name(&path, root));

    let mut eu = Csv::new(&["t", "error"]);
    for (t, _, e) in run.arc.euclidean_profile() {
        eu.row(&[CsvCell::F(t), CsvCell::F(e)]);
    }
    let p = dir.join("euclidean_error.csv");
    eu.write(&p)?;
    push(p);

    let mut dist = Csv::new(&["t", "j", "d"]);
    for point in &run.distance {
        dist.row(&[CsvCell::F(point.t), CsvCell::U(point.j), CsvCell::F(point.d)]);
    }
    let p = dir.join("distance_d.csv");
    dist.write(&p)?;
    push(p);

    let mut lyap = Csv::new(&["t", "j", "v"]);
    for s in &run.monitor.series {
        lyap.row(&[CsvCell::F(s.t), CsvCell::U(s.j), CsvCell::F(s.v)]);
    }
    let p = dir.join("lyapunov_v.csv");
    lyap.write(&p)?;
    push(p);

    let mut control = Csv::new(&["t", "u"]);
    let mut region = Csv::new(&["t", "region"]);
    for iv in &run.arc.intervals {
        for s in &iv.samples {
            let (u_fb, reg) = feedback_with_reference(
                &scenario.system,
                &scenario.design,
                &ctrl,
                s.t,
                &s.x,
                &s.y,
            )?;
            control.row(&[CsvCell::F(s.t), CsvCell::F(scenario.u_ff.eval(s.t) + u_fb)]);
            region.row(&[CsvCell::F(s.t), CsvCell::U(reg.index())]);
        }
    }
    let p = dir.join("control_u.csv");
    control.write(&p)?;
    push(p);
    let p = dir.join("region.csv");
    region.write(&p)?;
    push(p);

    Ok(files)
}

fn pair_csv(run: &ClosedLoopRun, n: usize) -> Csv {
    let mut header: Vec<String> = vec!["t".into(), "j".into()];
    header.extend((1..=n).map(|i| format!("xd{i}")));
    header.extend((1..=n).map(|i| format!("y{i}")));
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let mut csv = Csv::new(&header_refs);
    for iv in &run.arc.intervals {
        for s in &iv.samples {
            let mut row = vec![CsvCell::F(s.t), CsvCell::U(iv.j)];
            row.extend(s.x.iter().map(|&v| CsvCell::F(v)));
            row.extend(s.y.iter().map(|&v| CsvCell::F(v)));
            csv.row(&row);
        }
    }
    csv
}

/// Regenerates the data sets behind the published figures into a versioned
/// directory; byte-identical across runs.
pub fn cmd_figures(out: &Path) -> Result<Vec<String>, CommandError> {
    let dir = out.join("figures").join("v1");
    let mut files = Vec::new();
    let emit = |csv: Csv, path: PathBuf, files: &mut Vec<String>| -> Result<(), CommandError> {
        csv.write(&path)?;
        files.push(rel_name(&path, out));
        Ok(())
    };

    let scenarios = all_scenarios();
    let ball = &scenarios[0];
    let osc = &scenarios[1];

    // Bouncing ball: tracking run behind the peaking comparison, the distance
    // profile, the control signal and the Lyapunov profile.
    let run = run_tracking(ball)?;
    let n = ball.system.dim();
    emit(pair_csv(&run, n), dir.join("fig1_trajectories.csv"), &mut files)?;
    let mut eu = Csv::new(&["t", "error"]);
    for (t, _, e) in run.arc.euclidean_profile() {
        eu.row(&[CsvCell::F(t), CsvCell::F(e)]);
    }
    emit(eu, dir.join("fig1c_euclidean.csv"), &mut files)?;
    let mut dist = Csv::new(&["t", "j", "d"]);
    for p in &run.distance {
        dist.row(&[CsvCell::F(p.t), CsvCell::U(p.j), CsvCell::F(p.d)]);
    }
    emit(dist, dir.join("fig3_distance.csv"), &mut files)?;
    let ctrl = ball.controller()?;
    let mut control = Csv::new(&["t", "u"]);
    for iv in &run.arc.intervals {
        for s in &iv.samples {
            let (u_fb, _) =
                feedback_with_reference(&ball.system, &ball.design, &ctrl, s.t, &s.x, &s.y)?;
            control.row(&[CsvCell::F(s.t), CsvCell::F(ball.u_ff.eval(s.t) + u_fb)]);
        }
    }
    emit(control, dir.join("fig6a_control.csv"), &mut files)?;
    let mut lyap = Csv::new(&["t", "j", "v"]);
    for s in &run.monitor.series {
        lyap.row(&[CsvCell::F(s.t), CsvCell::U(s.j), CsvCell::F(s.v)]);
    }
    emit(lyap, dir.join("fig6b_lyapunov.csv"), &mut files)?;

    // Oscillator: open-loop divergence pair, the reference arc, and the
    // closed-loop tracking run with its profiles.
    let u = feedforward_fn(osc.u_ff);
    let n = osc.system.dim();
    let reference = simulate(&osc.system, &osc.x_d0, osc.t0, 40.0, &u, &osc.sim)?;
    emit(arc_csv(&reference, n), dir.join("fig7_reference.csv"), &mut files)?;
    let neighbour = simulate(
        &osc.system,
        osc.alt_y0.as_ref().expect("oscillator has a neighbour start"),
        osc.t0,
        40.0,
        &u,
        &osc.sim,
    )?;
    emit(arc_csv(&neighbour, n), dir.join("fig7_neighbour.csv"), &mut files)?;
    let full_reference = simulate(&osc.system, &osc.x_d0, osc.t0, osc.horizon, &u, &osc.sim)?;
    emit(arc_csv(&full_reference, n), dir.join("fig8_reference.csv"), &mut files)?;

    let run = run_tracking(osc)?;
    emit(pair_csv(&run, n), dir.join("fig9_trajectories.csv"), &mut files)?;
    let mut eu = Csv::new(&["t", "error"]);
    for (t, _, e) in run.arc.euclidean_profile() {
        eu.row(&[CsvCell::F(t), CsvCell::F(e)]);
    }
    emit(eu, dir.join("fig9c_euclidean.csv"), &mut files)?;
    let mut dist = Csv::new(&["t", "j", "d"]);
    for p in &run.distance {
        dist.row(&[CsvCell::F(p.t), CsvCell::U(p.j), CsvCell::F(p.d)]);
    }
    emit(dist, dir.join("fig9d_distance.csv"), &mut files)?;
    let ctrl = osc.controller()?;
    let mut control = Csv::new(&["t", "u"]);
    for iv in &run.arc.intervals {
        for s in &iv.samples {
            let (u_fb, _) =
                feedback_with_reference(&osc.system, &osc.design, &ctrl, s.t, &s.x, &s.y)?;
            control.row(&[CsvCell::F(s.t), CsvCell::F(osc.u_ff.eval(s.t) + u_fb)]);
        }
    }
    emit(control, dir.join("fig9e_control.csv"), &mut files)?;

    let manifest = files.join("\n") + "\n";
    write_atomic(&dir.join("MANIFEST.txt"), &manifest)?;
    files.push(rel_name(&dir.join("MANIFEST.txt"), out));
    Ok(files)
}

/// Bundled scenario configs, as TOML documents.
pub fn bundled_configs() -> Vec<(String, String)> {
    all_scenarios()
        .iter()
        .map(|s| (s.name.clone(), ScenarioConfig::from_scenario(s).to_toml_string()))
        .collect()
}
