//! Piecewise quadratic Lyapunov machinery for the affine class.
//!
//! The candidate function over pairs is
//!
//! ```text
//!   V(x, y) = min( ||x - y||^2_{P0},
//!                  ||x - Gbar(y)||^2_{Ps},
//!                  ||Gbar(x) - y||^2_{Ps} ),
//! ```
//!
//! with `Gbar(x) = L x + H + M (J x + K) + s L J^T max(0, z1 x + z2)` the
//! extension of the jump map off D. The argmin branch partitions the pair
//! space into regions S0, S1, S2; inside a small sub-level set `V <= v_L` the
//! regions are disconnected and jump/flow decay reduce to matrix conditions.

use nalgebra::{DMatrix, DVector, RowDVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::combined::{CombinedArc, JumpAttribution};
use crate::domain::{DwellKind, DwellTimeSpec};
use crate::error::{Error, Result};
use crate::system::{AffineHybridSystem, GuardGeometry};

/// Relative symmetry slack accepted on P0, Ps.
const SYM_TOL: f64 = 1e-12;
/// Guard band applied to the extreme eigenvalues of P0, Ps.
const EIG_GUARD: f64 = 1e-12;
/// Default cap on the largest eigenvalue in semidefiniteness checks.
pub const TOL_PSD: f64 = 1e-9;
/// Tie band of the argmin classification.
pub const REGION_TIE_BAND: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    S0,
    S1,
    S2,
}

impl Region {
    pub fn index(self) -> usize {
        match self {
            Region::S0 => 0,
            Region::S1 => 1,
            Region::S2 => 2,
        }
    }
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "S{}", self.index())
    }
}

/// Parameters of the piecewise quadratic candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovDesign {
    pub p0: DMatrix<f64>,
    pub ps: DMatrix<f64>,
    pub m: DVector<f64>,
    pub lambda_c: f64,
    pub lambda_d: f64,
}

impl LyapunovDesign {
    pub fn new(
        p0: DMatrix<f64>,
        ps: DMatrix<f64>,
        m: DVector<f64>,
        lambda_c: f64,
        lambda_d: f64,
    ) -> Result<Self> {
        for (p, name) in [(&p0, "P0"), (&ps, "Ps")] {
            if !p.is_square() {
                return Err(Error::InvalidSystem(format!("{name} must be square")));
            }
            let asym = (p - p.transpose()).norm();
            if asym > SYM_TOL * p.norm().max(1.0) {
                return Err(Error::InvalidSystem(format!(
                    "{name} is not symmetric (asymmetry {asym:.3e})"
                )));
            }
            let eig_min = p.clone().symmetric_eigen().eigenvalues.min();
            if eig_min <= 0.0 {
                return Err(Error::InvalidSystem(format!(
                    "{name} is not positive definite (min eigenvalue {eig_min:.3e})"
                )));
            }
        }
        if p0.nrows() != ps.nrows() || m.len() != p0.nrows() {
            return Err(Error::InvalidDimension {
                context: "LyapunovDesign",
                expected: p0.nrows(),
                got: m.len(),
            });
        }
        Ok(Self {
            p0,
            ps,
            m,
            lambda_c,
            lambda_d,
        })
    }

    /// Guarded extreme eigenvalues over both P matrices.
    pub fn lambda_extremes(&self) -> (f64, f64) {
        let e0 = self.p0.clone().symmetric_eigen().eigenvalues;
        let es = self.ps.clone().symmetric_eigen().eigenvalues;
        let lo = e0.min().min(es.min()) * (1.0 - EIG_GUARD);
        let hi = e0.max().max(es.max()) * (1.0 + EIG_GUARD);
        (lo, hi)
    }

    /// `L + M J` of the underlying system.
    pub fn l_mj(&self, sys: &AffineHybridSystem) -> DMatrix<f64> {
        &sys.l + &self.m * &sys.j
    }

    /// Gate scalar `s (1 + J L^-1 M)`; negative for an admissible design.
    pub fn gate(&self, sys: &AffineHybridSystem) -> f64 {
        sys.s * (1.0 + (&sys.j * sys.l_inverse() * &self.m)[0])
    }
}

/// Extension of the jump map off D; coincides with `L x + H` on D.
pub fn gbar(sys: &AffineHybridSystem, design: &LyapunovDesign, x: &DVector<f64>) -> DVector<f64> {
    let g = (&sys.j * x)[0] + sys.k;
    let h = (&sys.z1 * x)[0] + sys.z2;
    &sys.l * x + &sys.h + &design.m * g + (&sys.l * sys.j.transpose()) * (sys.s * h.max(0.0))
}

/// Inverse of `Gbar` on the region where the max-term is inactive:
/// `(L + M J)^{-1} (x - H - M K)`.
pub fn gbar_inverse(
    sys: &AffineHybridSystem,
    design: &LyapunovDesign,
    x: &DVector<f64>,
) -> Result<DVector<f64>> {
    let lmj = design.l_mj(sys);
    let inv = lmj.try_inverse().ok_or(Error::SingularDesign)?;
    Ok(inv * (x - &sys.h - &design.m * sys.k))
}

fn quad(p: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    (v.transpose() * p * v)[0]
}

/// The three branch values `(v0, v1, v2)` of V at a pair.
pub fn branch_values(
    sys: &AffineHybridSystem,
    design: &LyapunovDesign,
    x: &DVector<f64>,
    y: &DVector<f64>,
) -> [f64; 3] {
    let v0 = quad(&design.p0, &(x - y));
    let v1 = quad(&design.ps, &(x - gbar(sys, design, y)));
    let v2 = quad(&design.ps, &(gbar(sys, design, x) - y));
    [v0, v1, v2]
}

/// V and its argmin region with an explicit tie band (priority S0 > S1 > S2).
pub fn classify(
    sys: &AffineHybridSystem,
    design: &LyapunovDesign,
    x: &DVector<f64>,
    y: &DVector<f64>,
    band: f64,
) -> (f64, Region) {
    let [v0, v1, v2] = branch_values(sys, design, x, y);
    let vmin = v0.min(v1).min(v2);
    let region = if v0 <= vmin + band {
        Region::S0
    } else if v1 <= vmin + band {
        Region::S1
    } else {
        Region::S2
    };
    (vmin, region)
}

/// V and its region with the default tie band.
pub fn lyapunov_value(
    sys: &AffineHybridSystem,
    design: &LyapunovDesign,
    x: &DVector<f64>,
    y: &DVector<f64>,
) -> (f64, Region) {
    classify(sys, design, x, y, REGION_TIE_BAND)
}

fn max_eig_sym(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigen().eigenvalues.max()
}

/// Jump decay conditions: largest eigenvalues of
/// `(L+MJ)^T Ps (L+MJ) - e^{lambda_d} P0` and `P0 - e^{lambda_d} Ps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpConditionCheck {
    pub ok: bool,
    pub eig_margins: [f64; 2],
}

pub fn check_jump_conditions(
    sys: &AffineHybridSystem,
    design: &LyapunovDesign,
    tol_psd: f64,
) -> JumpConditionCheck {
    let lmj = design.l_mj(sys);
    let ed = design.lambda_d.exp();
    let m1 = lmj.transpose() * &design.ps * &lmj - &design.p0 * ed;
    let m2 = &design.p0 - &design.ps * ed;
    let margins = [max_eig_sym(&m1), max_eig_sym(&m2)];
    JumpConditionCheck {
        ok: margins.iter().all(|&m| m <= tol_psd),
        eig_margins: margins,
    }
}

/// Feedback row vectors of the switching controller.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackGains {
    pub c0: RowDVector<f64>,
    pub c1: RowDVector<f64>,
    pub c2: RowDVector<f64>,
}

/// Flow decay conditions per region, each as the largest eigenvalue of a
/// symmetric matrix that must be nonpositive:
///
/// ```text
///   S0: (A + B c0)^T P0 + P0 (A + B c0) - lambda_c P0
///   S1: X^T Ps + Ps X - lambda_c Ps,  X = (L+MJ) A (L+MJ)^{-1} + beta2 c1
///   S2: (A + B c2)^T Ps + Ps (A + B c2) - lambda_c Ps
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowLmiCheck {
    pub ok: bool,
    pub eig_margins: [f64; 3],
}

pub fn check_flow_lmis(
    sys: &AffineHybridSystem,
    design: &LyapunovDesign,
    gains: &FeedbackGains,
    tol_psd: f64,
) -> Result<FlowLmiCheck> {
    let lmj = design.l_mj(sys);
    let lmj_inv = lmj.clone().try_inverse().ok_or(Error::SingularDesign)?;
    let beta2 = -(&lmj * &sys.b);

    let x0 = &sys.a + &sys.b * &gains.c0;
    let m0 = x0.transpose() * &design.p0 + &design.p0 * &x0 - &design.p0 * design.lambda_c;

    let x1 = &lmj * &sys.a * &lmj_inv + beta2 * &gains.c1;
    let m1 = x1.transpose() * &design.ps + &design.ps * &x1 - &design.ps * design.lambda_c;

    let x2 = &sys.a + &sys.b * &gains.c2;
    let m2 = x2.transpose() * &design.ps + &design.ps * &x2 - &design.ps * design.lambda_c;

    let margins = [max_eig_sym(&m0), max_eig_sym(&m1), max_eig_sym(&m2)];
    Ok(FlowLmiCheck {
        ok: margins.iter().all(|&m| m <= tol_psd),
        eig_margins: margins,
    })
}

/// Frobenius residual of `Acl^T P + P Acl + Q`.
pub fn lyapunov_equation_residual(acl: &DMatrix<f64>, p: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
    (acl.transpose() * p + p * acl + q).norm()
}

/// Sub-level constants derived from the guard geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SublevelEstimate {
    pub delta1: f64,
    pub v_l: f64,
    /// Largest singular value of `L + M J`.
    pub ell_g: f64,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    /// Gate scalar `s (1 + J L^-1 M)`.
    pub gate: f64,
}

/// Computes `delta1` and `v_L` for the sub-level set on which the regions are
/// disconnected. `delta1` takes 0.99 times the smallest of three caps: the
/// guard-clearance cap from `(z3, z4)`, the image-clearance cap from
/// `(z3, z5)` (both printed sign variants of the gate term are evaluated and
/// the smaller positive one wins), and `z3 / (2 ||z1||)`. Then
/// `v_L = 0.99 lambda_lo min(delta1^2, (3 z3 / (2 ||z1||) - delta1)^2)`.
pub fn estimate_sublevel(
    sys: &AffineHybridSystem,
    design: &LyapunovDesign,
    geometry: &GuardGeometry,
) -> Result<SublevelEstimate> {
    let gate = design.gate(sys);
    if gate >= 0.0 {
        return Err(Error::InvalidGeometry(format!(
            "gate condition s(1 + J L^-1 M) < 0 violated (value {gate:.3e})"
        )));
    }
    let lmj = design.l_mj(sys);
    let ell_g = lmj.svd(false, false).singular_values.max();
    let n_gd_norm = sys.n_gd().norm();
    let jjt = sys.j.norm_squared();
    let z1_norm = sys.z1.norm();

    let bound_a = ((-gate * geometry.z4).min(jjt * geometry.z3)) / n_gd_norm;
    let gate_minus = sys.s * (1.0 - (&sys.j * sys.l_inverse() * &design.m)[0]);
    let denom = 2.0 * z1_norm * ell_g * n_gd_norm;
    let variants = [-gate_minus, -gate].map(|g| g * geometry.z5 * geometry.z3 / denom);
    let bound_b = match variants.iter().copied().filter(|&b| b > 0.0).reduce(f64::min) {
        Some(b) => b,
        None => {
            return Err(Error::InvalidGeometry(
                "image-clearance bound is nonpositive for both gate variants".into(),
            ))
        }
    };
    let bound_c = geometry.z3 / (2.0 * z1_norm);

    let delta1 = 0.99 * bound_a.min(bound_b).min(bound_c);
    if !delta1.is_finite() || delta1 <= 0.0 {
        return Err(Error::InvalidGeometry(format!(
            "delta1 bound nonpositive (a = {bound_a:.3e}, b = {bound_b:.3e}, c = {bound_c:.3e})"
        )));
    }
    let (lambda_lo, lambda_hi) = design.lambda_extremes();
    let slack = 1.5 * geometry.z3 / z1_norm - delta1;
    let v_l = 0.99 * lambda_lo * delta1.powi(2).min(slack.powi(2));
    Ok(SublevelEstimate {
        delta1,
        v_l,
        ell_g,
        lambda_lo,
        lambda_hi,
        gate,
    })
}

/// Quadratic class-K bound `r -> coeff r^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticBound(pub f64);

impl QuadraticBound {
    pub fn eval(&self, r: f64) -> f64 {
        self.0 * r * r
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassKBounds {
    /// Lower bound `alpha1(r) = lambda_lo r^2`.
    pub alpha1: QuadraticBound,
    /// Upper bound `alpha2(r) = L_V^2 r^2`.
    pub alpha2: QuadraticBound,
    /// Max singular value over the stacked difference operators.
    pub sigma: f64,
    pub l_v: f64,
}

/// Sandwich coefficients with `L_V = sqrt(lambda_hi) sigma`, `sigma` the
/// largest singular value over `[I, -I]`, `[I, -(L+MJ)]` and
/// `[I, -(L+MJ+sLJ^T z1)]`.
pub fn class_k_bounds(sys: &AffineHybridSystem, design: &LyapunovDesign) -> ClassKBounds {
    let n = sys.dim();
    let lmj = design.l_mj(sys);
    let slj = (&sys.l * sys.j.transpose()) * sys.s * &sys.z1;
    let blocks = [DMatrix::identity(n, n), lmj.clone(), &lmj + slj];
    let mut sigma = 0.0f64;
    for blk in blocks {
        let mut stacked = DMatrix::zeros(n, 2 * n);
        stacked
            .view_mut((0, 0), (n, n))
            .copy_from(&DMatrix::identity(n, n));
        stacked.view_mut((0, n), (n, n)).copy_from(&(-blk));
        sigma = sigma.max(stacked.svd(false, false).singular_values.max());
    }
    let (lambda_lo, lambda_hi) = design.lambda_extremes();
    let l_v = lambda_hi.sqrt() * sigma;
    ClassKBounds {
        alpha1: QuadraticBound(lambda_lo),
        alpha2: QuadraticBound(l_v * l_v),
        sigma,
        l_v,
    }
}

/// Lower sandwich coefficient valid inside the sub-level set.
///
/// The plain `lambda_lo d^2 <= V` fails on pairs whose jump-branch error is
/// small while the near-jump component sits off D: with restitution `eps`
/// the pair `x = G(proj_D(y))`, `y = (w, v)` has `V = eps lambda_lo w^2`
/// against `d = w`. Converting the branch error into a distance to the
/// nearest D point through the separation constants repairs the bound: with
/// `c1 = ||n_gd|| / (z5 |gate|)` every pair in `V <= v_L` satisfies
/// `d^2 <= (c1^2 + (1 + ell_g c1)^2) min_i ||e_i||^2`, so
/// `alpha1(r) = lambda_lo / (c1^2 + (1 + ell_g c1)^2) r^2` works.
pub fn graph_lower_bound(
    sys: &AffineHybridSystem,
    design: &LyapunovDesign,
    geometry: &GuardGeometry,
) -> Result<QuadraticBound> {
    let gate = design.gate(sys);
    if gate >= 0.0 {
        return Err(Error::InvalidGeometry(format!(
            "gate condition s(1 + J L^-1 M) < 0 violated (value {gate:.3e})"
        )));
    }
    let ell_g = design.l_mj(sys).svd(false, false).singular_values.max();
    let c1 = sys.n_gd().norm() / (geometry.z5 * gate.abs());
    let c_sq = (c1 * c1 + (1.0 + ell_g * c1).powi(2)).max(1.0);
    let (lambda_lo, _) = design.lambda_extremes();
    Ok(QuadraticBound(lambda_lo / c_sq))
}

/// Box sampler for the assumption checks; deterministic under a fixed seed.
#[derive(Debug, Clone)]
pub struct SamplerOptions {
    pub seed: u64,
    pub n_samples: usize,
    pub center: DVector<f64>,
    pub radius: f64,
}

impl SamplerOptions {
    pub fn new(dim: usize, radius: f64, seed: u64) -> Self {
        Self {
            seed,
            n_samples: 10_000,
            center: DVector::zeros(dim),
            radius,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assumption3Report {
    /// Worst slack of each bullet; all nonnegative when the constants hold.
    pub margins: [f64; 3],
    pub samples_per_bullet: usize,
}

/// Nearest point of D to `x` (hyperplane projection with the half-space
/// constraint clamped).
pub fn project_onto_jump_set(sys: &AffineHybridSystem, x: &DVector<f64>) -> DVector<f64> {
    let g = (&sys.j * x)[0] + sys.k;
    let p = x - sys.j.transpose() * (g / sys.j.norm_squared());
    if (&sys.z1 * &p)[0] + sys.z2 <= 0.0 {
        return p;
    }
    // Both constraints active: least-squares onto the intersection.
    let mut a = DMatrix::zeros(2, sys.dim());
    a.row_mut(0).copy_from(&sys.j);
    a.row_mut(1).copy_from(&sys.z1);
    let b = DVector::from_vec(vec![-sys.k, -sys.z2]);
    let aat = &a * a.transpose();
    match aat.try_inverse() {
        Some(inv) => x - a.transpose() * inv * (&a * x - b),
        None => p,
    }
}

/// Samples the three separation inequalities of the guard geometry.
///
/// Bullet 1: `z1 x + z2 >= z3` on G(D). Bullet 2: `J x + K < -z4` on the slab
/// of C with `|z1 x + z2| <= z3`. Bullet 3: each sampled `x in C` below the
/// `z1` hyperplane admits `y in D` with `J x + K <= -z5 ||x - y||`.
pub fn verify_assumption3(
    sys: &AffineHybridSystem,
    geometry: &GuardGeometry,
    sampler: &SamplerOptions,
) -> Result<Assumption3Report> {
    let n = sys.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(sampler.seed);
    let draw = |rng: &mut ChaCha8Rng| -> DVector<f64> {
        DVector::from_fn(n, |i, _| {
            sampler.center[i] + rng.gen_range(-sampler.radius..sampler.radius)
        })
    };
    let mut margins = [f64::INFINITY; 3];
    let check = |margins: &mut [f64; 3],
                 bullet: usize,
                 margin: f64,
                 witness: &DVector<f64>|
     -> Result<()> {
        if margin < margins[bullet] {
            margins[bullet] = margin;
        }
        if margin < 0.0 {
            let names = ["z3 on G(D)", "z4 slab clearance", "z5 cone bound"];
            return Err(Error::AssumptionViolated {
                bullet: names[bullet],
                margin,
                witness: witness.clone(),
            });
        }
        Ok(())
    };

    // Bullet 1: sample D through the hyperplane projection, then map by G.
    let mut accepted = 0;
    let mut attempts = 0usize;
    while accepted < sampler.n_samples && attempts < 200 * sampler.n_samples {
        attempts += 1;
        let z = project_onto_jump_set(sys, &draw(&mut rng));
        if !sys.in_jump_set(&z, 1e-9) {
            continue;
        }
        accepted += 1;
        let gx = sys.jump_image(&z);
        let h = (&sys.z1 * &gx)[0] + sys.z2;
        check(&mut margins, 0, h - geometry.z3, &gx)?;
    }

    // Bullet 2: slab of C with |z1 x + z2| <= z3.
    accepted = 0;
    attempts = 0;
    let z1n2 = sys.z1.norm_squared();
    while accepted < sampler.n_samples && attempts < 500 * sampler.n_samples {
        attempts += 1;
        let mut x = draw(&mut rng);
        let target: f64 = rng.gen_range(-geometry.z3..geometry.z3);
        let h = (&sys.z1 * &x)[0] + sys.z2;
        x += sys.z1.transpose() * ((target - h) / z1n2);
        if !sys.in_flow_set(&x, 0.0) {
            continue;
        }
        accepted += 1;
        let g = (&sys.j * &x)[0] + sys.k;
        check(&mut margins, 1, -geometry.z4 - g, &x)?;
    }

    // Bullet 3: C below the z1 hyperplane against the nearest D point.
    accepted = 0;
    attempts = 0;
    while accepted < sampler.n_samples && attempts < 500 * sampler.n_samples {
        attempts += 1;
        let x = draw(&mut rng);
        if !sys.in_flow_set(&x, 0.0) || (&sys.z1 * &x)[0] + sys.z2 > 0.0 {
            continue;
        }
        accepted += 1;
        let y = project_onto_jump_set(sys, &x);
        let g = (&sys.j * &x)[0] + sys.k;
        check(&mut margins, 2, -geometry.z5 * (&x - &y).norm() - g, &x)?;
    }

    Ok(Assumption3Report {
        margins,
        samples_per_bullet: sampler.n_samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictCase {
    Case1,
    Case2,
    Case3,
    Inconclusive,
}

impl std::fmt::Display for VerdictCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            VerdictCase::Case1 => "Case1",
            VerdictCase::Case2 => "Case2",
            VerdictCase::Case3 => "Case3",
            VerdictCase::Inconclusive => "Inconclusive",
        };
        f.write_str(s)
    }
}

/// Stability verdict with the margins of every inequality that was checked.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityVerdict {
    pub case: VerdictCase,
    /// `(inequality, slack)`; slack nonnegative means the inequality holds.
    pub details: Vec<(&'static str, f64)>,
}

/// First applicable decay case given the rates and an optional dwell spec
/// (interpreted on the combined domain). Assumes the jump and flow matrix
/// conditions already hold.
pub fn stability_verdict(
    design: &LyapunovDesign,
    dwell: Option<&DwellTimeSpec>,
) -> StabilityVerdict {
    let (lc, ld) = (design.lambda_c, design.lambda_d);
    let mut details = vec![("-lambda_c", -lc), ("-lambda_d", -ld)];
    if lc < 0.0 && ld <= 0.0 {
        return StabilityVerdict {
            case: VerdictCase::Case1,
            details,
        };
    }
    if let Some(spec) = dwell {
        let combo = -(ld + lc * spec.tau);
        details.push(("-(lambda_d + lambda_c tau)", combo));
        match spec.kind {
            DwellKind::MinimalAverage if lc <= 0.0 && combo > 0.0 => {
                return StabilityVerdict {
                    case: VerdictCase::Case2,
                    details,
                };
            }
            DwellKind::MaximalAverage if ld <= 0.0 && combo > 0.0 => {
                return StabilityVerdict {
                    case: VerdictCase::Case3,
                    details,
                };
            }
            _ => {}
        }
    }
    StabilityVerdict {
        case: VerdictCase::Inconclusive,
        details,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VSample {
    pub t: f64,
    pub j: usize,
    pub v: f64,
    pub region: Region,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowViolation {
    pub t: f64,
    pub j: usize,
    pub v_prev: f64,
    pub v_curr: f64,
    /// Allowed value `v_prev e^{lambda_c dt} (1 + tol) + floor`.
    pub allowed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpDecayRecord {
    pub t: f64,
    pub j_pre: usize,
    pub v_pre: f64,
    pub v_post: f64,
    pub violated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransitionTrigger {
    XJump,
    YJump,
    Flow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionRecord {
    pub t: f64,
    pub j: usize,
    pub trigger: TransitionTrigger,
    pub from: Region,
    pub to: Region,
    pub v_before: f64,
}

/// The admissible jump-induced region transitions.
pub fn transition_allowed(trigger: TransitionTrigger, from: Region, to: Region) -> bool {
    use Region::*;
    use TransitionTrigger::*;
    matches!(
        (trigger, from, to),
        (XJump, S0, S1) | (YJump, S1, S0) | (YJump, S0, S2) | (XJump, S2, S0)
    )
}

#[derive(Debug, Clone, Copy)]
pub struct MonitorOptions {
    /// Relative slack on the flow decay ratio test.
    pub flow_tol: f64,
    /// Relative slack on the jump decay test.
    pub jump_tol: f64,
    /// Absolute floor below which decay violations are ignored.
    pub v_floor: f64,
}

impl Default for MonitorOptions {
    fn default() -> Self {
        Self {
            flow_tol: 0.05,
            jump_tol: 1e-8,
            v_floor: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorReport {
    pub series: Vec<VSample>,
    pub flow_violations: Vec<FlowViolation>,
    pub jump_records: Vec<JumpDecayRecord>,
    pub transitions: Vec<TransitionRecord>,
    pub v_max: f64,
}

impl MonitorReport {
    pub fn jump_violations(&self) -> usize {
        self.jump_records.iter().filter(|r| r.violated).count()
    }

    /// Jump-induced transitions whose pre-jump V is at most `v_cap` and that
    /// fall outside the admissible arrow set.
    pub fn invalid_transitions_below(&self, v_cap: f64) -> Vec<&TransitionRecord> {
        self.transitions
            .iter()
            .filter(|tr| {
                tr.trigger != TransitionTrigger::Flow
                    && tr.v_before <= v_cap
                    && !transition_allowed(tr.trigger, tr.from, tr.to)
            })
            .collect()
    }
}

/// Evaluates V along a combined arc: decay ratio checks along flow, the
/// `e^{lambda_d}` factor at jumps, and the region-transition log. Violations
/// are recorded, never raised.
pub fn monitor_v_along_arc(
    arc: &CombinedArc,
    sys: &AffineHybridSystem,
    design: &LyapunovDesign,
    opts: &MonitorOptions,
) -> MonitorReport {
    let mut series = Vec::new();
    let mut flow_violations = Vec::new();
    let mut transitions = Vec::new();
    let mut v_max = 0.0f64;

    for iv in &arc.intervals {
        let mut prev: Option<(f64, f64, Region)> = None;
        for s in &iv.samples {
            let (v, region) = lyapunov_value(sys, design, &s.x, &s.y);
            v_max = v_max.max(v);
            series.push(VSample {
                t: s.t,
                j: iv.j,
                v,
                region,
            });
            if let Some((tp, vp, rp)) = prev {
                let allowed = vp * (design.lambda_c * (s.t - tp)).exp() * (1.0 + opts.flow_tol)
                    + opts.v_floor;
                if v > allowed {
                    flow_violations.push(FlowViolation {
                        t: s.t,
                        j: iv.j,
                        v_prev: vp,
                        v_curr: v,
                        allowed,
                    });
                }
                if region != rp {
                    transitions.push(TransitionRecord {
                        t: s.t,
                        j: iv.j,
                        trigger: TransitionTrigger::Flow,
                        from: rp,
                        to: region,
                        v_before: vp,
                    });
                }
            }
            prev = Some((s.t, v, region));
        }
    }

    let mut jump_records = Vec::new();
    for jr in &arc.jumps {
        let (v_pre, r_pre) = lyapunov_value(sys, design, &jr.pre_x, &jr.pre_y);
        let (v_post, r_post) = lyapunov_value(sys, design, &jr.post_x, &jr.post_y);
        let allowed = v_pre * design.lambda_d.exp() * (1.0 + opts.jump_tol) + opts.v_floor;
        jump_records.push(JumpDecayRecord {
            t: jr.t,
            j_pre: jr.j_pre,
            v_pre,
            v_post,
            violated: v_post > allowed,
        });
        let trigger = match jr.kind {
            JumpAttribution::XJumped => TransitionTrigger::XJump,
            JumpAttribution::YJumped => TransitionTrigger::YJump,
            JumpAttribution::BothEnumerated => {
                if jr.post_x != jr.pre_x {
                    TransitionTrigger::XJump
                } else {
                    TransitionTrigger::YJump
                }
            }
        };
        if r_pre != r_post {
            transitions.push(TransitionRecord {
                t: jr.t,
                j: jr.j_pre,
                trigger,
                from: r_pre,
                to: r_post,
                v_before: v_pre,
            });
        }
    }

    MonitorReport {
        series,
        flow_violations,
        jump_records,
        transitions,
        v_max,
    }
}

/// One grid point of the parameter sweep helper.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub lambda_c: f64,
    pub lambda_d: f64,
    pub jump: JumpConditionCheck,
    pub flow: FlowLmiCheck,
}

impl SweepEntry {
    pub fn feasible(&self) -> bool {
        self.jump.ok && self.flow.ok
    }
}

/// Grid sweep over `(lambda_c, lambda_d)` for fixed P matrices and gains; a
/// cheap feasibility explorer in place of a semidefinite-programming step.
pub fn sweep_decay_rates(
    sys: &AffineHybridSystem,
    design: &LyapunovDesign,
    gains: &FeedbackGains,
    lambda_c_grid: &[f64],
    lambda_d_grid: &[f64],
    tol_psd: f64,
) -> Result<Vec<SweepEntry>> {
    let mut out = Vec::with_capacity(lambda_c_grid.len() * lambda_d_grid.len());
    for &lc in lambda_c_grid {
        for &ld in lambda_d_grid {
            let d = LyapunovDesign {
                lambda_c: lc,
                lambda_d: ld,
                ..design.clone()
            };
            out.push(SweepEntry {
                lambda_c: lc,
                lambda_d: ld,
                jump: check_jump_conditions(sys, &d, tol_psd),
                flow: check_flow_lmis(sys, &d, gains, tol_psd)?,
            });
        }
    }
    Ok(out)
}
