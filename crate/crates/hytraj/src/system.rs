//! Hybrid systems with affine flow, affine jump map and a half-hyperplane jump set.
//!
//! The plant class is
//!
//! ```text
//!   x' = A x + E + B u(t, x)          x in C,
//!   x+ = L x + H                      x in D,
//! ```
//!
//! with
//!
//! ```text
//!   C = { x | J x + K <= 0  and  s (J L^-1 x + K - J L^-1 H) <= 0 },
//!   D = { x in C | J x + K = 0  and  z1 x + z2 <= 0 },
//! ```
//!
//! `s` in {-1, +1} orients `n_gd = s (L^-1)^T J^T` as the outward normal of the
//! flow set on the jump-image hyperplane G(D).

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::error::{Error, Result};

/// Scalar feedforward input, closed-form so that runs are reproducible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Feedforward {
    Zero,
    Constant(f64),
    /// `amplitude * cos(omega * t)`
    Cosine { amplitude: f64, omega: f64 },
}

impl Feedforward {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Feedforward::Zero => 0.0,
            Feedforward::Constant(c) => c,
            Feedforward::Cosine { amplitude, omega } => amplitude * (omega * t).cos(),
        }
    }
}

/// Scalar input as a function of time and state.
pub type InputFn<'a> = dyn Fn(f64, &DVector<f64>) -> f64 + 'a;

/// Zero input, the default for autonomous runs.
pub fn zero_input(_t: f64, _x: &DVector<f64>) -> f64 {
    0.0
}

/// Separation constants of the guard geometry:
/// `z1 x + z2 >= z3` on G(D); `J x + K < -z4` on the slab of C with
/// `|z1 x + z2| <= z3`; and every `x in C` below the `z1`-hyperplane admits a
/// `y in D` with `J x + K <= -z5 ||x - y||`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuardGeometry {
    pub z3: f64,
    pub z4: f64,
    pub z5: f64,
}

impl GuardGeometry {
    pub fn new(z3: f64, z4: f64, z5: f64) -> Result<Self> {
        if !(z3 > 0.0 && z4 > 0.0 && z5 > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "separation constants must be positive, got z3 = {z3}, z4 = {z4}, z5 = {z5}"
            )));
        }
        Ok(Self { z3, z4, z5 })
    }
}

/// Affine hybrid system data. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineHybridSystem {
    n: usize,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub e: DVector<f64>,
    pub l: DMatrix<f64>,
    pub h: DVector<f64>,
    pub j: RowDVector<f64>,
    pub k: f64,
    pub z1: RowDVector<f64>,
    pub z2: f64,
    pub s: f64,
    /// Optional open ball around the origin excluded from the flow set.
    pub exclusion_radius: Option<f64>,
    l_inv: DMatrix<f64>,
}

/// Relative singular-value floor below which L is rejected as non-invertible.
pub const L_CONDITION_FLOOR: f64 = 1e-12;

impl AffineHybridSystem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: DMatrix<f64>,
        b: DVector<f64>,
        e: DVector<f64>,
        l: DMatrix<f64>,
        h: DVector<f64>,
        j: RowDVector<f64>,
        k: f64,
        z1: RowDVector<f64>,
        z2: f64,
        s: f64,
    ) -> Result<Self> {
        let n = a.nrows();
        for (len, context) in [
            (a.ncols(), "A columns"),
            (b.len(), "B"),
            (e.len(), "E"),
            (l.nrows(), "L rows"),
            (l.ncols(), "L columns"),
            (h.len(), "H"),
            (j.len(), "J"),
            (z1.len(), "z1"),
        ] {
            if len != n {
                return Err(Error::InvalidDimension {
                    context,
                    expected: n,
                    got: len,
                });
            }
        }
        if s != 1.0 && s != -1.0 {
            return Err(Error::InvalidSystem(format!("s must be -1 or +1, got {s}")));
        }
        if j.norm() == 0.0 {
            return Err(Error::InvalidSystem("J must be nonzero".into()));
        }
        if z1.norm() == 0.0 {
            return Err(Error::InvalidSystem("z1 must be nonzero".into()));
        }
        let svd = l.clone().svd(false, false);
        let (smax, smin) = (
            svd.singular_values.max(),
            svd.singular_values.min(),
        );
        if smin < L_CONDITION_FLOOR * smax {
            return Err(Error::InvalidSystem(format!(
                "L is numerically singular (sigma_min / sigma_max = {:.3e})",
                smin / smax
            )));
        }
        let l_inv = l
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidSystem("L is not invertible".into()))?;
        Ok(Self {
            n,
            a,
            b,
            e,
            l,
            h,
            j,
            k,
            z1,
            z2,
            s,
            exclusion_radius: None,
            l_inv,
        })
    }

    pub fn with_exclusion_radius(mut self, radius: f64) -> Self {
        self.exclusion_radius = Some(radius);
        self
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn l_inverse(&self) -> &DMatrix<f64> {
        &self.l_inv
    }

    /// Outward normal of the flow set on G(D): `s (L^-1)^T J^T`.
    pub fn n_gd(&self) -> DVector<f64> {
        (self.l_inv.transpose() * self.j.transpose()) * self.s
    }

    /// Affine offset of the G(D) hyperplane: `s (K - J L^-1 H)`.
    pub fn k_gd(&self) -> f64 {
        self.s * (self.k - (&self.j * &self.l_inv * &self.h)[0])
    }

    /// Signed value of the G(D) facet, nonpositive on C.
    pub fn c_gd(&self, x: &DVector<f64>) -> f64 {
        self.n_gd().dot(x) + self.k_gd()
    }

    /// Flow map `A x + E + B u`.
    pub fn flow(&self, x: &DVector<f64>, u: f64) -> DVector<f64> {
        &self.a * x + &self.e + &self.b * u
    }

    /// Jump-set coordinates `(g, h) = (J x + K, z1 x + z2)`.
    ///
    /// `x` lies in D iff `|g| <= tol` and `h <= tol` (and `x` is in C).
    pub fn guard_values(&self, x: &DVector<f64>) -> Result<(f64, f64)> {
        if x.len() != self.n {
            return Err(Error::InvalidDimension {
                context: "guard_values state",
                expected: self.n,
                got: x.len(),
            });
        }
        Ok(((&self.j * x)[0] + self.k, (&self.z1 * x)[0] + self.z2))
    }

    /// Membership in the implicit flow set, with slack `tol` on each facet.
    pub fn in_flow_set(&self, x: &DVector<f64>, tol: f64) -> bool {
        let g = (&self.j * x)[0] + self.k;
        if g > tol || self.c_gd(x) > tol {
            return false;
        }
        match self.exclusion_radius {
            Some(r) => x.norm() >= r - tol,
            None => true,
        }
    }

    /// Membership in the jump set within `tol`.
    pub fn in_jump_set(&self, x: &DVector<f64>, tol: f64) -> bool {
        match self.guard_values(x) {
            Ok((g, h)) => g.abs() <= tol && h <= tol,
            Err(_) => false,
        }
    }

    /// Applies the jump map `x+ = L x + H`. The state must lie in D within `tol`.
    pub fn apply_jump(&self, x: &DVector<f64>, tol: f64) -> Result<DVector<f64>> {
        let (g, h) = self.guard_values(x)?;
        if g.abs() > tol || h > tol {
            return Err(Error::NotInJumpSet { g, h });
        }
        Ok(self.jump_image(x))
    }

    /// The affine image `L x + H` without the membership check.
    pub fn jump_image(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.l * x + &self.h
    }

    /// Copy of the system with the jump half-hyperplane pulled back by `r`
    /// along `z1`, i.e. `D_r = { x | J x + K = 0, z1 x + z2 <= -r }`.
    ///
    /// The truncated variant feeds the distance function and the certificate
    /// geometry; event detection keeps the untruncated set.
    pub fn truncated(&self, r: f64) -> Self {
        let mut sys = self.clone();
        sys.z2 += r;
        sys
    }
}
