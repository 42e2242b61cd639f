//! Scenario configuration: a TOML document carrying every field of a
//! scenario. Unknown keys are rejected and all matrices are
//! dimension-checked before a scenario is built.

use hytraj::domain::DwellKind;
use hytraj::lyapunov::{FeedbackGains, LyapunovDesign, VerdictCase};
use hytraj::models::Scenario;
use hytraj::ode::OdeOptions;
use hytraj::sim::SimOptions;
use hytraj::system::{AffineHybridSystem, Feedforward, GuardGeometry};
use nalgebra::{DMatrix, DVector, RowDVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid value for `{key}`: {message}")]
    Invalid { key: &'static str, message: String },
}

fn invalid(key: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub system: SystemConfig,
    pub design: DesignConfig,
    pub controller: ControllerConfig,
    pub geometry: GeometryConfig,
    pub run: RunConfig,
    #[serde(default)]
    pub tolerances: ToleranceConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// Row-major flow matrix.
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub e: Vec<f64>,
    pub l: Vec<Vec<f64>>,
    pub h: Vec<f64>,
    pub j: Vec<f64>,
    pub k: f64,
    pub z1: Vec<f64>,
    pub z2: f64,
    pub s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exclusion_radius: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    pub p0: Vec<Vec<f64>>,
    pub ps: Vec<Vec<f64>>,
    pub m: Vec<f64>,
    pub lambda_c: f64,
    pub lambda_d: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    pub c0: Vec<f64>,
    pub c1: Vec<f64>,
    pub c2: Vec<f64>,
    pub u_ff: FeedforwardConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "lowercase")]
pub enum FeedforwardConfig {
    Zero,
    Constant { value: f64 },
    Cosine { amplitude: f64, omega: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    /// Jump-set truncation depth along `z1`.
    pub r: f64,
    /// Restitution magnitude of the jump map (for the closed-form distance).
    pub eps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z3: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z4: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z5: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub x_d0: Vec<f64>,
    pub y0: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alt_y0: Option<Vec<f64>>,
    pub t0: f64,
    pub horizon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dwell: Option<DwellKindConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_case: Option<CaseConfig>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum DwellKindConfig {
    Minimal,
    Maximal,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum CaseConfig {
    Case1,
    Case2,
    Case3,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub tol_event: f64,
    pub tol_psd: f64,
    pub sample_dt: f64,
    pub max_jumps: usize,
    pub zeno_window: f64,
    pub escape_bound: f64,
    pub kbar_max: usize,
    pub seed: u64,
    pub assumption_samples: usize,
    pub sampling_radius: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            tol_event: 1e-10,
            tol_psd: 1e-9,
            sample_dt: 1e-3,
            max_jumps: 10_000,
            zeno_window: 1e-9,
            escape_bound: 1e9,
            kbar_max: 3,
            seed: 12345,
            assumption_samples: 10_000,
            sampling_radius: 8.0,
        }
    }
}

impl ScenarioConfig {
    pub fn from_path(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    /// Applies a `--tol-override KEY=VAL` pair.
    pub fn override_tolerance(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let parse_f64 = |v: &str| -> Result<f64, ConfigError> {
            v.parse()
                .map_err(|_| invalid("tol-override", format!("`{v}` is not a number")))
        };
        let t = &mut self.tolerances;
        match key {
            "rel_tol" => t.rel_tol = parse_f64(value)?,
            "abs_tol" => t.abs_tol = parse_f64(value)?,
            "tol_event" => t.tol_event = parse_f64(value)?,
            "tol_psd" => t.tol_psd = parse_f64(value)?,
            "sample_dt" => t.sample_dt = parse_f64(value)?,
            "zeno_window" => t.zeno_window = parse_f64(value)?,
            "escape_bound" => t.escape_bound = parse_f64(value)?,
            "max_jumps" => {
                t.max_jumps = value
                    .parse()
                    .map_err(|_| invalid("tol-override", format!("`{value}` is not an integer")))?
            }
            other => {
                return Err(invalid(
                    "tol-override",
                    format!("unknown tolerance key `{other}`"),
                ))
            }
        }
        Ok(())
    }

    pub fn to_scenario(&self) -> Result<Scenario, ConfigError> {
        let n = self.system.b.len();
        let matrix = |rows: &Vec<Vec<f64>>, key: &'static str| -> Result<DMatrix<f64>, ConfigError> {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(invalid(key, format!("expected a {n}x{n} matrix")));
            }
            Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
        };
        let vector = |v: &Vec<f64>, key: &'static str| -> Result<DVector<f64>, ConfigError> {
            if v.len() != n {
                return Err(invalid(key, format!("expected {n} entries, got {}", v.len())));
            }
            Ok(DVector::from_vec(v.clone()))
        };
        let row = |v: &Vec<f64>, key: &'static str| -> Result<RowDVector<f64>, ConfigError> {
            if v.len() != n {
                return Err(invalid(key, format!("expected {n} entries, got {}", v.len())));
            }
            Ok(RowDVector::from_row_slice(v))
        };

        let mut system = AffineHybridSystem::new(
            matrix(&self.system.a, "system.a")?,
            vector(&self.system.b, "system.b")?,
            vector(&self.system.e, "system.e")?,
            matrix(&self.system.l, "system.l")?,
            vector(&self.system.h, "system.h")?,
            row(&self.system.j, "system.j")?,
            self.system.k,
            row(&self.system.z1, "system.z1")?,
            self.system.z2,
            self.system.s,
        )
        .map_err(|e| invalid("system", e.to_string()))?;
        if let Some(radius) = self.system.exclusion_radius {
            system = system.with_exclusion_radius(radius);
        }

        let design = LyapunovDesign::new(
            matrix(&self.design.p0, "design.p0")?,
            matrix(&self.design.ps, "design.ps")?,
            vector(&self.design.m, "design.m")?,
            self.design.lambda_c,
            self.design.lambda_d,
        )
        .map_err(|e| invalid("design", e.to_string()))?;

        let gains = FeedbackGains {
            c0: row(&self.controller.c0, "controller.c0")?,
            c1: row(&self.controller.c1, "controller.c1")?,
            c2: row(&self.controller.c2, "controller.c2")?,
        };
        let u_ff = match self.controller.u_ff {
            FeedforwardConfig::Zero => Feedforward::Zero,
            FeedforwardConfig::Constant { value } => Feedforward::Constant(value),
            FeedforwardConfig::Cosine { amplitude, omega } => {
                Feedforward::Cosine { amplitude, omega }
            }
        };

        let g = &self.geometry;
        if !g.r.is_finite() || g.r <= 0.0 {
            return Err(invalid("geometry.r", "truncation depth must be positive"));
        }
        let exclusion = self.system.exclusion_radius.unwrap_or(3.0 * g.r);
        let z3 = g.z3.unwrap_or(g.eps * g.r);
        let z4_default_sq = exclusion * exclusion - (z3 + g.r) * (z3 + g.r);
        let z4 = match g.z4 {
            Some(z4) => z4,
            None if z4_default_sq > 0.0 => 0.99 * z4_default_sq.sqrt(),
            None => {
                return Err(invalid(
                    "geometry",
                    "exclusion radius too small to derive z4; supply z4 explicitly",
                ))
            }
        };
        let z5 = g.z5.unwrap_or(0.99);
        let geometry =
            GuardGeometry::new(z3, z4, z5).map_err(|e| invalid("geometry", e.to_string()))?;

        let t = &self.tolerances;
        let sim = SimOptions {
            ode: OdeOptions {
                rel_tol: t.rel_tol,
                abs_tol: t.abs_tol,
                tol_event: t.tol_event,
                escape_bound: t.escape_bound,
                ..OdeOptions::default()
            },
            sample_dt: t.sample_dt,
            max_jumps: t.max_jumps,
            zeno_window: t.zeno_window,
            ..SimOptions::default()
        };

        Ok(Scenario {
            name: self.name.clone(),
            eps: g.eps,
            system,
            design,
            gains,
            u_ff,
            r: g.r,
            geometry,
            x_d0: vector(&self.run.x_d0, "run.x_d0")?,
            y0: vector(&self.run.y0, "run.y0")?,
            alt_y0: match &self.run.alt_y0 {
                Some(v) => Some(vector(v, "run.alt_y0")?),
                None => None,
            },
            t0: self.run.t0,
            horizon: self.run.horizon,
            dwell_kind: self.run.dwell.map(|d| match d {
                DwellKindConfig::Minimal => DwellKind::MinimalAverage,
                DwellKindConfig::Maximal => DwellKind::MaximalAverage,
            }),
            expected_case: match self.run.expected_case {
                Some(CaseConfig::Case1) => VerdictCase::Case1,
                Some(CaseConfig::Case2) => VerdictCase::Case2,
                Some(CaseConfig::Case3) => VerdictCase::Case3,
                Some(CaseConfig::Inconclusive) | None => VerdictCase::Inconclusive,
            },
            sim,
            kbar_max: t.kbar_max,
        })
    }

    /// Serialises a scenario back into the config document.
    pub fn from_scenario(scenario: &Scenario) -> Self {
        let n = scenario.system.dim();
        let mat = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
            (0..n).map(|i| (0..n).map(|j| m[(i, j)]).collect()).collect()
        };
        let vec = |v: &DVector<f64>| v.iter().copied().collect::<Vec<f64>>();
        let rowv = |v: &RowDVector<f64>| v.iter().copied().collect::<Vec<f64>>();
        Self {
            name: scenario.name.clone(),
            system: SystemConfig {
                a: mat(&scenario.system.a),
                b: vec(&scenario.system.b),
                e: vec(&scenario.system.e),
                l: mat(&scenario.system.l),
                h: vec(&scenario.system.h),
                j: rowv(&scenario.system.j),
                k: scenario.system.k,
                z1: rowv(&scenario.system.z1),
                z2: scenario.system.z2,
                s: scenario.system.s,
                exclusion_radius: scenario.system.exclusion_radius,
            },
            design: DesignConfig {
                p0: mat(&scenario.design.p0),
                ps: mat(&scenario.design.ps),
                m: vec(&scenario.design.m),
                lambda_c: scenario.design.lambda_c,
                lambda_d: scenario.design.lambda_d,
            },
            controller: ControllerConfig {
                c0: rowv(&scenario.gains.c0),
                c1: rowv(&scenario.gains.c1),
                c2: rowv(&scenario.gains.c2),
                u_ff: match scenario.u_ff {
                    Feedforward::Zero => FeedforwardConfig::Zero,
                    Feedforward::Constant(value) => FeedforwardConfig::Constant { value },
                    Feedforward::Cosine { amplitude, omega } => {
                        FeedforwardConfig::Cosine { amplitude, omega }
                    }
                },
            },
            geometry: GeometryConfig {
                r: scenario.r,
                eps: scenario.eps,
                z3: Some(scenario.geometry.z3),
                z4: Some(scenario.geometry.z4),
                z5: Some(scenario.geometry.z5),
            },
            run: RunConfig {
                x_d0: vec(&scenario.x_d0),
                y0: vec(&scenario.y0),
                alt_y0: scenario.alt_y0.as_ref().map(vec),
                t0: scenario.t0,
                horizon: scenario.horizon,
                dwell: scenario.dwell_kind.map(|k| match k {
                    DwellKind::MinimalAverage => DwellKindConfig::Minimal,
                    DwellKind::MaximalAverage => DwellKindConfig::Maximal,
                }),
                expected_case: Some(match scenario.expected_case {
                    VerdictCase::Case1 => CaseConfig::Case1,
                    VerdictCase::Case2 => CaseConfig::Case2,
                    VerdictCase::Case3 => CaseConfig::Case3,
                    VerdictCase::Inconclusive => CaseConfig::Inconclusive,
                }),
            },
            tolerances: ToleranceConfig {
                rel_tol: scenario.sim.ode.rel_tol,
                abs_tol: scenario.sim.ode.abs_tol,
                tol_event: scenario.sim.ode.tol_event,
                sample_dt: scenario.sim.sample_dt,
                max_jumps: scenario.sim.max_jumps,
                zeno_window: scenario.sim.zeno_window,
                escape_bound: scenario.sim.ode.escape_bound,
                kbar_max: scenario.kbar_max,
                ..ToleranceConfig::default()
            },
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }
}
