//! Quadratic initial data u0(x) = c0 + c1 x + c2 x^2 and the checks the
//! quenching theory places on it.

use serde::{Deserialize, Serialize};

use crate::error::{QuenchError, Result};
use crate::problem::{PhiSpec, ProblemSpec, Wall};
use crate::Scalar;

/// Points in the dense sample used by range and slope checks.
pub const DENSE_POINTS: usize = 1001;
/// Default tolerance on the compatibility residuals.
pub const DEFAULT_COMPAT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct InitialCondition<T> {
    coeffs: [T; 3],
    domain_length: T,
}

impl<T: Scalar> InitialCondition<T> {
    /// Builds u0 = c0 + c1 x + c2 x^2 on [0, a], requiring 0 < u0 < 1.
    pub fn quadratic(c0: T, c1: T, c2: T, a: T) -> Result<Self> {
        if !(a > T::zero() && a.is_finite()) {
            return Err(QuenchError::invalid("a", format!("need a > 0, got {a}")));
        }
        let ic = InitialCondition {
            coeffs: [c0, c1, c2],
            domain_length: a,
        };
        ic.check_range()?;
        Ok(ic)
    }

    pub fn coeffs(&self) -> [T; 3] {
        self.coeffs
    }

    pub fn domain_length(&self) -> T {
        self.domain_length
    }

    pub fn eval(&self, x: T) -> T {
        let [c0, c1, c2] = self.coeffs;
        c0 + x * (c1 + x * c2)
    }

    pub fn d1(&self, x: T) -> T {
        let [_, c1, c2] = self.coeffs;
        c1 + T::lit(2.0) * c2 * x
    }

    pub fn d2(&self, _x: T) -> T {
        T::lit(2.0) * self.coeffs[2]
    }

    /// Endpoints and the interior vertex (if any) bound a quadratic on [0, a];
    /// the dense sample is a second line of defence against NaN coefficients.
    pub fn check_range(&self) -> Result<()> {
        let a = self.domain_length;
        let [_, c1, c2] = self.coeffs;
        let mut probes = vec![T::zero(), a];
        if c2 != T::zero() {
            let vertex = -c1 / (T::lit(2.0) * c2);
            if vertex > T::zero() && vertex < a {
                probes.push(vertex);
            }
        }
        probes.extend(dense_grid(a, DENSE_POINTS));
        for x in probes {
            let v = self.eval(x);
            if !(v > T::zero() && v < T::one()) {
                return Err(QuenchError::InitialConditionRange {
                    x: x.as_f64(),
                    value: v.as_f64(),
                });
            }
        }
        Ok(())
    }
}

/// `n` equally spaced points on [0, a], endpoints included.
fn dense_grid<T: Scalar>(a: T, n: usize) -> impl Iterator<Item = T> {
    let last = T::from_usize_exact(n - 1);
    (0..n).map(move |i| {
        if i == n - 1 {
            a
        } else {
            a * T::from_usize_exact(i) / last
        }
    })
}

/// `n` equally spaced points strictly inside (0, a).
fn interior_grid<T: Scalar>(a: T, n: usize) -> impl Iterator<Item = T> {
    let denom = T::from_usize_exact(n + 1);
    (1..=n).map(move |i| a * T::from_usize_exact(i) / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConcavityClass {
    /// u0'' >= 0 with u0 not linear.
    ConcaveUp,
    /// u0'' <= 0 with u0 not linear.
    ConcaveDown,
    /// Neither strict class. For quadratics this is exactly the linear case,
    /// where the concavity condition no longer singles out a wall.
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictedSide {
    Left,
    Right,
    Undetermined,
}

impl PredictedSide {
    pub fn wall(self) -> Option<Wall> {
        match self {
            PredictedSide::Left => Some(Wall::Left),
            PredictedSide::Right => Some(Wall::Right),
            PredictedSide::Undetermined => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct ICValidationReport<T> {
    /// |u0'(0) - u0(0)^{-p}|
    pub compat_left_residual: T,
    /// |u0'(a) - (1 - u0(a))^{-q}|
    pub compat_right_residual: T,
    pub concavity_class: ConcavityClass,
    /// u0' >= 0 on (0, a).
    pub monotone_ok: bool,
    /// u0'(x) >= (x/a)(1 - u0(x))^{-q} on the dense interior grid.
    pub slope_cond_right_ok: bool,
    /// u0'(x) >= ((a - x)/a) u0(x)^{-p} on the dense interior grid.
    pub slope_cond_left_ok: bool,
    pub predicted_quench_side: PredictedSide,
    pub tol: T,
    /// Compatibility within `tol`, a predicted side, and the slope condition
    /// paired with that side.
    pub hypotheses_ok: bool,
}

/// Checks u0 against the compatibility, concavity, monotonicity and slope
/// hypotheses. Never fails: problems are recorded in the report.
pub fn validate<T: Scalar>(
    ic: &InitialCondition<T>,
    spec: &ProblemSpec<T>,
    tol: T,
) -> ICValidationReport<T> {
    let a = spec.a;
    let u_left = ic.eval(T::zero());
    let u_right = ic.eval(a);

    let compat_left_residual = (ic.d1(T::zero()) - u_left.powf(-spec.p)).abs();
    let compat_right_residual = (ic.d1(a) - (T::one() - u_right).powf(-spec.q)).abs();

    let c2 = ic.coeffs[2];
    let concavity_class = if c2 > T::zero() {
        ConcavityClass::ConcaveUp
    } else if c2 < T::zero() {
        ConcavityClass::ConcaveDown
    } else {
        ConcavityClass::Mixed
    };

    // u0' is affine, so its sign on [0, a] is fixed by the endpoints.
    let monotone_ok = ic.d1(T::zero()) >= T::zero() && ic.d1(a) >= T::zero();

    let mut slope_cond_right_ok = true;
    let mut slope_cond_left_ok = true;
    for x in interior_grid(a, DENSE_POINTS) {
        let u = ic.eval(x);
        let du = ic.d1(x);
        let right = du - x / a * (T::one() - u).powf(-spec.q);
        let left = du - (a - x) / a * u.powf(-spec.p);
        slope_cond_right_ok &= right >= T::zero();
        slope_cond_left_ok &= left >= T::zero();
    }

    let predicted_quench_side = match (concavity_class, monotone_ok) {
        (ConcavityClass::ConcaveUp, true) => PredictedSide::Right,
        (ConcavityClass::ConcaveDown, true) => PredictedSide::Left,
        _ => PredictedSide::Undetermined,
    };

    let compat_ok = compat_left_residual <= tol && compat_right_residual <= tol;
    let slope_ok = match predicted_quench_side {
        PredictedSide::Right => slope_cond_right_ok,
        PredictedSide::Left => slope_cond_left_ok,
        PredictedSide::Undetermined => false,
    };

    ICValidationReport {
        compat_left_residual,
        compat_right_residual,
        concavity_class,
        monotone_ok,
        slope_cond_right_ok,
        slope_cond_left_ok,
        predicted_quench_side,
        tol,
        hypotheses_ok: compat_ok && slope_ok,
    }
}

/// Concave-up data that quenches at x = a:
/// u0 = 1/4 + 4x + 4x^2 on [0, 1/8], p = 1, q = log_{16/3} 5, heat equation.
pub fn example_a<T: Scalar>() -> (ProblemSpec<T>, InitialCondition<T>) {
    let a = T::lit(0.125);
    let q = T::lit(5.0).ln() / (T::lit(16.0) / T::lit(3.0)).ln();
    let spec = ProblemSpec::new(a, T::one(), q, T::lit(2.0), PhiSpec::Identity)
        .expect("built-in problem is valid");
    let ic = InitialCondition::quadratic(T::lit(0.25), T::lit(4.0), T::lit(4.0), a)
        .expect("built-in initial condition is valid");
    (spec, ic)
}

/// Concave-down data that quenches at x = 0:
/// u0 = 1/4 + 4x - 2x^2 on [0, 1/8], p = 1, q = log_{32/9}(7/2), heat equation.
pub fn example_b<T: Scalar>() -> (ProblemSpec<T>, InitialCondition<T>) {
    let a = T::lit(0.125);
    let q = T::lit(3.5).ln() / (T::lit(32.0) / T::lit(9.0)).ln();
    let spec = ProblemSpec::new(a, T::one(), q, T::lit(2.0), PhiSpec::Identity)
        .expect("built-in problem is valid");
    let ic = InitialCondition::quadratic(T::lit(0.25), T::lit(4.0), T::lit(-2.0), a)
        .expect("built-in initial condition is valid");
    (spec, ic)
}

/// Looks up a built-in example by its config name.
pub fn builtin<T: Scalar>(name: &str) -> Option<(ProblemSpec<T>, InitialCondition<T>)> {
    match name {
        "example_A" => Some(example_a()),
        "example_B" => Some(example_b()),
        _ => None,
    }
}
