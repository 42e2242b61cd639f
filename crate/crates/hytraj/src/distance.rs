//! Distance between two states of a hybrid system that stays small across
//! non-synchronised jumps.
//!
//! For a pair `(x, y)` the distance is the Euclidean distance in `R^{2n}`
//! from `(x, y)` to the set `A` of pairs that coincide or map onto each other
//! under at most `kbar` jumps. For the affine class each piece of `A` is an
//! affine set cut by half-space constraints, so the distance is a minimum of
//! small constrained least-squares projections solved exactly by active-set
//! enumeration.

use nalgebra::{DMatrix, DVector};

use crate::combined::CombinedArc;
use crate::error::{Error, Result};
use crate::system::AffineHybridSystem;

/// Which side of the pair carries the jump chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    /// `z_y = G^k(z_x)`, chain constraints on `z_x`.
    X,
    /// `z_x = G^k(z_y)`, chain constraints on `z_y`.
    Y,
}

#[derive(Debug, Clone)]
enum Branch {
    /// `z_x = z_y` in the flow set.
    Diagonal,
    Chain { k: usize, side: Side },
}

/// Iterated jump maps `G^k(x) = L_k x + H_k` together with the branch list
/// of the zero set `A` up to the detected `kbar`.
#[derive(Debug, Clone)]
pub struct JumpChainSet {
    kbar: usize,
    /// `(L_k, H_k)` for `k = 0..=kbar`.
    powers: Vec<(DMatrix<f64>, DVector<f64>)>,
    branches: Vec<Branch>,
}

impl JumpChainSet {
    /// Detects the smallest `k` with `G^k(D)` disjoint from `D` and builds the
    /// branches. Fails if no such `k <= kbar_max` exists.
    pub fn for_system(sys: &AffineHybridSystem, kbar_max: usize) -> Result<Self> {
        let n = sys.dim();
        let mut powers = vec![(DMatrix::identity(n, n), DVector::zeros(n))];
        for _ in 0..=kbar_max {
            let (lk, hk) = powers.last().unwrap();
            powers.push((&sys.l * lk, &sys.l * hk + &sys.h));
        }
        let mut kbar = None;
        for k in 1..=kbar_max {
            // G^k(D) n D = empty iff the (k+1)-point chain set is empty.
            if !chain_feasible(sys, &powers, k + 1) {
                kbar = Some(k);
                break;
            }
        }
        let kbar = kbar.ok_or_else(|| {
            Error::InvalidGeometry(format!(
                "no k <= {kbar_max} with G^k(D) disjoint from D; \
                 the jump set needs truncation away from fixed points"
            ))
        })?;
        // With an invertible jump map, pieces with both chain counters
        // positive are subsets of shorter ones, so only one-sided chains
        // remain alongside the diagonal.
        let mut branches = vec![Branch::Diagonal];
        for k in 1..=kbar {
            branches.push(Branch::Chain { k, side: Side::Y });
            branches.push(Branch::Chain { k, side: Side::X });
        }
        Ok(Self {
            kbar,
            powers,
            branches,
        })
    }

    pub fn kbar(&self) -> usize {
        self.kbar
    }

    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }
}

/// Whether a chain `z in D, G(z) in D, ..., G^{len-1}(z) in D` admits a point.
fn chain_feasible(
    sys: &AffineHybridSystem,
    powers: &[(DMatrix<f64>, DVector<f64>)],
    len: usize,
) -> bool {
    let n = sys.dim();
    let mut eq_rows = Vec::new();
    let mut eq_rhs = Vec::new();
    let mut ineq_rows = Vec::new();
    let mut ineq_rhs = Vec::new();
    for (lk, hk) in powers.iter().take(len) {
        eq_rows.push(&sys.j * lk);
        eq_rhs.push(-(sys.k + (&sys.j * hk)[0]));
        ineq_rows.push(&sys.z1 * lk);
        ineq_rhs.push(-(sys.z2 + (&sys.z1 * hk)[0]));
    }
    // Minimise ||z||^2 subject to the chain constraints; feasible iff some
    // active set yields a point satisfying everything.
    let q = DMatrix::identity(n, n) * 2.0;
    let c = DVector::zeros(n);
    project_active_set(&q, &c, &eq_rows, &eq_rhs, &ineq_rows, &ineq_rhs, |_| 0.0).is_some()
}

/// Stacks rows into a matrix; empty input yields a 0 x n matrix.
fn stack_rows(rows: &[nalgebra::RowDVector<f64>], n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows.len(), n);
    for (i, r) in rows.iter().enumerate() {
        m.row_mut(i).copy_from(r);
    }
    m
}

/// Exact minimiser of `1/2 z^T Q z - c^T z` under affine equalities and
/// half-space inequalities, by enumerating active sets (Q positive definite,
/// few constraints). Returns the feasible minimiser and its objective value,
/// where the objective is re-evaluated through `value`.
#[allow(clippy::too_many_arguments)]
fn project_active_set(
    q: &DMatrix<f64>,
    c: &DVector<f64>,
    eq_rows: &[nalgebra::RowDVector<f64>],
    eq_rhs: &[f64],
    ineq_rows: &[nalgebra::RowDVector<f64>],
    ineq_rhs: &[f64],
    value: impl Fn(&DVector<f64>) -> f64,
) -> Option<(DVector<f64>, f64)> {
    let n = q.nrows();
    let n_ineq = ineq_rows.len();
    let mut best: Option<(DVector<f64>, f64)> = None;
    for mask in 0u32..(1 << n_ineq) {
        let mut rows = eq_rows.to_vec();
        let mut rhs = eq_rhs.to_vec();
        for (i, row) in ineq_rows.iter().enumerate() {
            if mask & (1 << i) != 0 {
                rows.push(row.clone());
                rhs.push(ineq_rhs[i]);
            }
        }
        let m = rows.len();
        let a = stack_rows(&rows, n);
        let b = DVector::from_vec(rhs);

        // KKT system for the equality-constrained minimiser.
        let mut kkt = DMatrix::zeros(n + m, n + m);
        kkt.view_mut((0, 0), (n, n)).copy_from(q);
        if m > 0 {
            kkt.view_mut((n, 0), (m, n)).copy_from(&a);
            kkt.view_mut((0, n), (n, m)).copy_from(&a.transpose());
        }
        let mut rhs_full = DVector::zeros(n + m);
        rhs_full.rows_mut(0, n).copy_from(c);
        if m > 0 {
            rhs_full.rows_mut(n, m).copy_from(&b);
        }
        let svd = kkt.svd(true, true);
        let sol = match svd.solve(&rhs_full, 1e-12) {
            Ok(s) => s,
            Err(_) => continue,
        };
        let z = DVector::from(sol.rows(0, n).clone_owned());
        let scale = 1.0 + z.norm();
        // Constraint consistency (catches infeasible equality systems).
        if m > 0 && (&a * &z - &b).norm() > 1e-8 * scale {
            continue;
        }
        // Primal feasibility of the inactive inequalities.
        let feasible = ineq_rows
            .iter()
            .zip(ineq_rhs)
            .enumerate()
            .all(|(i, (row, &r))| {
                mask & (1 << i) != 0 || (row * &z)[0] <= r + 1e-9 * scale
            });
        if !feasible {
            continue;
        }
        let v = value(&z);
        if best.as_ref().is_none_or(|(_, bv)| v < *bv) {
            best = Some((z, v));
        }
    }
    best
}

/// Distance evaluator bound to one system (usually the truncated geometry).
#[derive(Debug, Clone)]
pub struct DistanceEvaluator {
    sys: AffineHybridSystem,
    chains: JumpChainSet,
    /// Slack allowed on the flow-set facets when validating arguments.
    pub membership_tol: f64,
}

impl DistanceEvaluator {
    pub fn new(sys: &AffineHybridSystem, kbar_max: usize) -> Result<Self> {
        Ok(Self {
            sys: sys.clone(),
            chains: JumpChainSet::for_system(sys, kbar_max)?,
            membership_tol: 1e-8,
        })
    }

    pub fn chains(&self) -> &JumpChainSet {
        &self.chains
    }

    pub fn system(&self) -> &AffineHybridSystem {
        &self.sys
    }

    fn check_membership(&self, x: &DVector<f64>) -> Result<()> {
        let g = (&self.sys.j * x)[0] + self.sys.k;
        let cgd = self.sys.c_gd(x);
        let violation = g.max(cgd);
        if violation > self.membership_tol {
            return Err(Error::OutsideStateSpace { violation });
        }
        Ok(())
    }

    /// Squared distance of `(x, y)` to one branch; `None` when the branch is empty.
    fn branch_sq(&self, branch: &Branch, x: &DVector<f64>, y: &DVector<f64>) -> Option<f64> {
        let sys = &self.sys;
        let n = sys.dim();
        match branch {
            Branch::Diagonal => {
                // minimise ||x-z||^2 + ||y-z||^2 over z in C.
                let q = DMatrix::identity(n, n) * 4.0;
                let c = (x + y) * 2.0;
                let ineq_rows = vec![
                    sys.j.clone(),
                    nalgebra::RowDVector::from_iterator(n, sys.n_gd().iter().copied()),
                ];
                let ineq_rhs = vec![-sys.k, -sys.k_gd()];
                let value =
                    |z: &DVector<f64>| (x - z).norm_squared() + (y - z).norm_squared();
                project_active_set(&q, &c, &[], &[], &ineq_rows, &ineq_rhs, value)
                    .map(|(_, v)| v)
            }
            Branch::Chain { k, side } => {
                let (lk, hk) = &self.chains.powers[*k];
                // Base point z carries the chain; the other side is L_k z + H_k.
                let (near, far) = match side {
                    Side::Y => (y, x),
                    Side::X => (x, y),
                };
                // minimise ||far - (L_k z + H_k)||^2 + ||near - z||^2.
                let q = (lk.transpose() * lk + DMatrix::identity(n, n)) * 2.0;
                let c = (lk.transpose() * (far - hk) + near) * 2.0;
                let mut eq_rows = Vec::with_capacity(*k);
                let mut eq_rhs = Vec::with_capacity(*k);
                let mut ineq_rows = Vec::with_capacity(*k);
                let mut ineq_rhs = Vec::with_capacity(*k);
                for (li, hi) in self.chains.powers.iter().take(*k) {
                    eq_rows.push(&sys.j * li);
                    eq_rhs.push(-(sys.k + (&sys.j * hi)[0]));
                    ineq_rows.push(&sys.z1 * li);
                    ineq_rhs.push(-(sys.z2 + (&sys.z1 * hi)[0]));
                }
                let value = |z: &DVector<f64>| {
                    (far - (lk * z + hk)).norm_squared() + (near - z).norm_squared()
                };
                project_active_set(&q, &c, &eq_rows, &eq_rhs, &ineq_rows, &ineq_rhs, value)
                    .map(|(_, v)| v)
            }
        }
    }

    /// The distance `d(x, y)`: minimum over branches of the projection distance.
    pub fn distance(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        self.check_membership(x)?;
        self.check_membership(y)?;
        let mut best = f64::INFINITY;
        for branch in &self.chains.branches {
            if let Some(v) = self.branch_sq(branch, x, y) {
                best = best.min(v);
            }
        }
        Ok(best.max(0.0).sqrt())
    }

    /// Whether `(x, y)` lies on some branch of `A` within `tol`.
    pub fn in_a(&self, x: &DVector<f64>, y: &DVector<f64>, tol: f64) -> bool {
        self.chains.branches.iter().any(|b| {
            self.branch_sq(b, x, y)
                .map(|v| v.max(0.0).sqrt() <= tol)
                .unwrap_or(false)
        })
    }

    /// Brute-force projection oracle: grid search with local refinement on
    /// each branch's free parameterisation. Independent of the active-set path.
    pub fn oracle(&self, x: &DVector<f64>, y: &DVector<f64>, spec: &OracleSpec) -> Result<f64> {
        self.check_membership(x)?;
        self.check_membership(y)?;
        let mut best = f64::INFINITY;
        for branch in &self.chains.branches {
            if let Some(v) = self.branch_oracle_sq(branch, x, y, spec)? {
                best = best.min(v);
            }
        }
        Ok(best.max(0.0).sqrt())
    }

    fn branch_oracle_sq(
        &self,
        branch: &Branch,
        x: &DVector<f64>,
        y: &DVector<f64>,
        spec: &OracleSpec,
    ) -> Result<Option<f64>> {
        type Objective = Box<dyn Fn(&DVector<f64>) -> f64>;
        type Filter = Box<dyn Fn(&DVector<f64>) -> bool>;
        let sys = &self.sys;
        let n = sys.dim();
        // Free parameterisation z = z_p + N w and the residual objective.
        let (z_p, basis, objective, feasible): (DVector<f64>, DMatrix<f64>, Objective, Filter) =
            match branch {
            Branch::Diagonal => {
                let xc = x.clone();
                let yc = y.clone();
                let s = sys.clone();
                (
                    DVector::zeros(n),
                    DMatrix::identity(n, n),
                    Box::new(move |z: &DVector<f64>| {
                        (&xc - z).norm_squared() + (&yc - z).norm_squared()
                    }),
                    Box::new(move |z: &DVector<f64>| {
                        (&s.j * z)[0] + s.k <= 1e-12 && s.c_gd(z) <= 1e-12
                    }),
                )
            }
            Branch::Chain { k, side } => {
                let mut rows = Vec::with_capacity(*k);
                let mut rhs = Vec::with_capacity(*k);
                for (li, hi) in self.chains.powers.iter().take(*k) {
                    rows.push(&sys.j * li);
                    rhs.push(-(sys.k + (&sys.j * hi)[0]));
                }
                let a = stack_rows(&rows, n);
                let b = DVector::from_vec(rhs);
                let svd = a.clone().svd(true, true);
                let z_p = match svd.solve(&b, 1e-12) {
                    Ok(s) => s,
                    Err(_) => return Ok(None),
                };
                if (&a * &z_p - &b).norm() > 1e-8 * (1.0 + z_p.norm()) {
                    return Ok(None);
                }
                let basis = nullspace(&a);
                let (lk, hk) = self.chains.powers[*k].clone();
                let (near, far) = match side {
                    Side::Y => (y.clone(), x.clone()),
                    Side::X => (x.clone(), y.clone()),
                };
                let chain: Vec<(DMatrix<f64>, DVector<f64>)> =
                    self.chains.powers.iter().take(*k).cloned().collect();
                let s = sys.clone();
                (
                    z_p,
                    basis,
                    Box::new(move |z: &DVector<f64>| {
                        (&far - (&lk * z + &hk)).norm_squared() + (&near - z).norm_squared()
                    }),
                    Box::new(move |z: &DVector<f64>| {
                        chain
                            .iter()
                            .all(|(li, hi)| (&s.z1 * (li * z + hi))[0] + s.z2 <= 1e-12)
                    }),
                )
            }
        };

        let m = basis.ncols();
        if m == 0 {
            // Fully determined branch: single candidate.
            return Ok(feasible(&z_p).then(|| objective(&z_p)));
        }
        if m > 3 {
            return Err(Error::OracleAccuracy {
                needed: spec.accuracy,
                got: f64::INFINITY,
            });
        }

        // Centre the first sweep on the free-space image of the pair midpoint.
        let mid = (x + y) * 0.5;
        let mut center = basis.transpose() * (&mid - &z_p);
        let span = (x - &mid).norm() + (y - &mid).norm() + 1.0;
        let mut radius = 2.0 * span;
        let mut best: Option<(DVector<f64>, f64)> = None;
        let pts = spec.points_per_dim.max(3);
        for _ in 0..spec.levels {
            let spacing = 2.0 * radius / (pts as f64 - 1.0);
            let mut idx = vec![0usize; m];
            loop {
                let mut w = center.clone();
                for (d, &i) in idx.iter().enumerate() {
                    w[d] += -radius + spacing * i as f64;
                }
                let z = &z_p + &basis * &w;
                if feasible(&z) {
                    let v = objective(&z);
                    if best.as_ref().is_none_or(|(_, bv)| v < *bv) {
                        best = Some((w.clone(), v));
                    }
                }
                // Odometer increment over the m-dimensional grid.
                let mut d = 0;
                loop {
                    if d == m {
                        break;
                    }
                    idx[d] += 1;
                    if idx[d] < pts {
                        break;
                    }
                    idx[d] = 0;
                    d += 1;
                }
                if d == m {
                    break;
                }
            }
            if let Some((w, _)) = &best {
                center = w.clone();
            }
            radius = 2.0 * spacing;
        }
        let final_spacing = {
            let mut r = 2.0 * span;
            let mut sp = 0.0;
            for _ in 0..spec.levels {
                sp = 2.0 * r / (pts as f64 - 1.0);
                r = 2.0 * sp;
            }
            sp
        };
        if final_spacing > spec.accuracy {
            return Err(Error::OracleAccuracy {
                needed: spec.accuracy,
                got: final_spacing,
            });
        }
        Ok(best.map(|(_, v)| v))
    }

    /// Euclidean distance from `x` to `D` and to each iterated image
    /// `G^k(D)`, `k = 1..=kbar` (infinite entries for empty images).
    pub fn distance_to_jump_sets(&self, x: &DVector<f64>) -> Vec<f64> {
        let sys = &self.sys;
        let mut out = Vec::with_capacity(self.chains.kbar + 1);
        for k in 0..=self.chains.kbar {
            // minimise ||x - (L_k z + H_k)||^2 over z in the k-step chain.
            let (lk, hk) = &self.chains.powers[k];
            let q = (lk.transpose() * lk) * 2.0;
            let c = (lk.transpose() * (x - hk)) * 2.0;
            let mut eq_rows = Vec::new();
            let mut eq_rhs = Vec::new();
            let mut ineq_rows = Vec::new();
            let mut ineq_rhs = Vec::new();
            for (li, hi) in self.chains.powers.iter().take(k.max(1)) {
                eq_rows.push(&sys.j * li);
                eq_rhs.push(-(sys.k + (&sys.j * hi)[0]));
                ineq_rows.push(&sys.z1 * li);
                ineq_rhs.push(-(sys.z2 + (&sys.z1 * hi)[0]));
            }
            let value = |z: &DVector<f64>| (x - (lk * z + hk)).norm_squared();
            let d = project_active_set(&q, &c, &eq_rows, &eq_rhs, &ineq_rows, &ineq_rhs, value)
                .map(|(_, v)| v.max(0.0).sqrt())
                .unwrap_or(f64::INFINITY);
            out.push(d);
        }
        out
    }

    /// Distance evaluated at every sample of a combined arc.
    pub fn profile(&self, arc: &CombinedArc) -> Result<Vec<DistancePoint>> {
        let mut out = Vec::new();
        for iv in &arc.intervals {
            for s in &iv.samples {
                let d = self.distance(&s.x, &s.y)?;
                out.push(DistancePoint { t: s.t, j: iv.j, d });
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistancePoint {
    pub t: f64,
    pub j: usize,
    pub d: f64,
}

/// Brute-force oracle resolution: `points_per_dim` grid points per free
/// dimension, refined `levels` times; `accuracy` is the guaranteed bound.
#[derive(Debug, Clone, Copy)]
pub struct OracleSpec {
    pub points_per_dim: usize,
    pub levels: usize,
    pub accuracy: f64,
}

impl Default for OracleSpec {
    fn default() -> Self {
        Self {
            points_per_dim: 17,
            levels: 14,
            accuracy: 1e-7,
        }
    }
}

/// Orthonormal null-space basis of `a` (columns), from the eigenvectors of
/// `a^T a` with near-zero eigenvalues.
fn nullspace(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.ncols();
    let gram = a.transpose() * a;
    let eig = gram.symmetric_eigen();
    let tol = 1e-20 * eig.eigenvalues.max().max(1.0);
    let cols: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] <= tol).collect();
    let mut basis = DMatrix::zeros(n, cols.len());
    for (col, &i) in cols.iter().enumerate() {
        basis.column_mut(col).copy_from(&eig.eigenvectors.column(i));
    }
    basis
}

/// Closed-form diagonal-branch distance for the planar examples:
/// `d0(x, y) = ||x - y|| / sqrt(2)` (midpoint projection).
pub fn d0_closed(x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    (x - y).norm() / std::f64::consts::SQRT_2
}

/// Closed-form jump-branch distance for the planar examples with
/// `G = -eps I` and jump set `{0} x (-inf, -r]`: projection of `(x, y)` onto
/// `{ x = G(z), z in D }` with the single inequality clamped at `-r`.
pub fn d1_closed(x: &DVector<f64>, y: &DVector<f64>, eps: f64, r: f64) -> f64 {
    let unconstrained = (y[1] - eps * x[1]) / (1.0 + eps * eps);
    let sq = if unconstrained < -r {
        x[0] * x[0] + y[0] * y[0] + (eps * y[1] + x[1]).powi(2) / (1.0 + eps * eps)
    } else {
        x[0] * x[0] + y[0] * y[0] + (x[1] - eps * r).powi(2) + (y[1] + r).powi(2)
    };
    sq.max(0.0).sqrt()
}

/// Closed-form distance for the planar examples: minimum over the diagonal
/// branch and the two jump branches.
pub fn distance_closed(x: &DVector<f64>, y: &DVector<f64>, eps: f64, r: f64) -> f64 {
    d0_closed(x, y)
        .min(d1_closed(x, y, eps, r))
        .min(d1_closed(y, x, eps, r))
}
