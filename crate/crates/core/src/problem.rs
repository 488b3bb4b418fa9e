//! Problem parameterization: the diffusion nonlinearity, the flux exponents
//! and the numerical experiment configuration.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{QuenchError, Result};
use crate::ic::InitialCondition;
use crate::Scalar;

/// Slack allowed when evaluating phi just outside [0, 1].
const PHI_DOMAIN_SLACK: f64 = 1e-12;
/// Samples used to check monotonicity of phi at construction.
const PHI_CHECK_SAMPLES: usize = 1000;

/// One of the two walls of the interval [0, a].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Wall {
    /// x = 0, singular as u -> 0.
    Left,
    /// x = a, singular as u -> 1.
    Right,
}

impl fmt::Display for Wall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Wall::Left => f.write_str("left"),
            Wall::Right => f.write_str("right"),
        }
    }
}

/// The nonlinearity phi in (phi(u))_t = (|u_x|^{r-2} u_x)_x.
///
/// The registry is closed: either the identity or phi(s) = s^{1/m} with
/// 0 < m < 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
#[serde(bound(deserialize = "T: Scalar"))]
pub enum PhiSpec<T> {
    Identity,
    Power { m: T },
}

impl<T: Scalar> PhiSpec<T> {
    pub fn identity() -> Self {
        PhiSpec::Identity
    }

    /// phi(s) = s^{1/m}; requires 0 < m < 1.
    pub fn power(m: T) -> Result<Self> {
        if !(m > T::zero() && m < T::one()) {
            return Err(QuenchError::invalid(
                "m",
                format!("need 0 < m < 1, got {m}"),
            ));
        }
        let phi = PhiSpec::Power { m };
        phi.check()?;
        Ok(phi)
    }

    /// Re-checks the invariants by evaluation. Used after deserialization.
    pub fn check(&self) -> Result<()> {
        if let PhiSpec::Power { m } = *self {
            if !(m > T::zero() && m < T::one()) {
                return Err(QuenchError::invalid(
                    "m",
                    format!("need 0 < m < 1, got {m}"),
                ));
            }
        }
        let tol = T::lit(PHI_DOMAIN_SLACK);
        if self.eval(T::zero())?.abs() > tol || (self.eval(T::one())? - T::one()).abs() > tol {
            return Err(QuenchError::invalid(
                "phi",
                "phi(0) = 0 and phi(1) = 1 violated",
            ));
        }
        for i in 1..=PHI_CHECK_SAMPLES {
            let s = T::from_usize_exact(i) / T::from_usize_exact(PHI_CHECK_SAMPLES);
            if !(self.derivative(s)? > T::zero()) {
                return Err(QuenchError::invalid(
                    "phi",
                    format!("phi'({s}) is not positive"),
                ));
            }
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, PhiSpec::Identity)
    }

    /// phi(s) for s in [0, 1] (with a 1e-12 slack, clamped).
    pub fn eval(&self, s: T) -> Result<T> {
        let s = clamp_unit(s)?;
        Ok(match *self {
            PhiSpec::Identity => s,
            PhiSpec::Power { m } => s.powf(m.recip()),
        })
    }

    /// phi'(s) for s in (0, 1].
    pub fn derivative(&self, s: T) -> Result<T> {
        let s = clamp_unit(s)?;
        match *self {
            PhiSpec::Identity => Ok(T::one()),
            PhiSpec::Power { m } => {
                if s <= T::zero() {
                    return Err(QuenchError::Singularity);
                }
                let k = m.recip();
                Ok(k * s.powf(k - T::one()))
            }
        }
    }

    /// phi''(s) for s in (0, 1].
    pub fn second_derivative(&self, s: T) -> Result<T> {
        let s = clamp_unit(s)?;
        match *self {
            PhiSpec::Identity => Ok(T::zero()),
            PhiSpec::Power { m } => {
                if s <= T::zero() {
                    return Err(QuenchError::Singularity);
                }
                let k = m.recip();
                Ok(k * (k - T::one()) * s.powf(k - T::lit(2.0)))
            }
        }
    }

    /// B(u) = 1 / phi'(u), the mobility in u_t = B(u) (|u_x|^{r-2} u_x)_x.
    pub fn mobility(&self, s: T) -> Result<T> {
        Ok(self.derivative(s)?.recip())
    }

    /// Whether phi'' <= 0 on a sample of (0, 1]. The power kind with 0 < m < 1
    /// is convex, so this is false for it.
    pub fn is_concave(&self) -> bool {
        (1..=PHI_CHECK_SAMPLES).all(|i| {
            let s = T::from_usize_exact(i) / T::from_usize_exact(PHI_CHECK_SAMPLES);
            self.second_derivative(s)
                .map(|v| v <= T::zero())
                .unwrap_or(false)
        })
    }
}

fn clamp_unit<T: Scalar>(s: T) -> Result<T> {
    let slack = T::lit(PHI_DOMAIN_SLACK);
    if s.is_nan() || s < -slack || s > T::one() + slack {
        return Err(QuenchError::Domain { value: s.as_f64() });
    }
    Ok(s.max(T::zero()).min(T::one()))
}

/// Full parameterization of the boundary value problem
/// (phi(u))_t = (|u_x|^{r-2} u_x)_x on (0, a),
/// u_x(0) = u^{-p}, u_x(a) = (1 - u)^{-q}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct ProblemSpec<T> {
    pub a: T,
    pub p: T,
    pub q: T,
    pub r: T,
    pub phi: PhiSpec<T>,
}

impl<T: Scalar> ProblemSpec<T> {
    pub fn new(a: T, p: T, q: T, r: T, phi: PhiSpec<T>) -> Result<Self> {
        let spec = ProblemSpec { a, p, q, r, phi };
        spec.check()?;
        Ok(spec)
    }

    /// Heat equation with the given walls: r = 2, phi = identity.
    pub fn heat(a: T, p: T, q: T) -> Result<Self> {
        Self::new(a, p, q, T::lit(2.0), PhiSpec::Identity)
    }

    pub fn check(&self) -> Result<()> {
        let finite_pos = |v: T| v.is_finite() && v > T::zero();
        if !finite_pos(self.a) {
            return Err(QuenchError::invalid(
                "a",
                format!("need a > 0, got {}", self.a),
            ));
        }
        if !finite_pos(self.p) {
            return Err(QuenchError::invalid(
                "p",
                format!("need p > 0, got {}", self.p),
            ));
        }
        if !finite_pos(self.q) {
            return Err(QuenchError::invalid(
                "q",
                format!("need q > 0, got {}", self.q),
            ));
        }
        if !(self.r.is_finite() && self.r >= T::lit(2.0)) {
            return Err(QuenchError::invalid(
                "r",
                format!("need r >= 2, got {}", self.r),
            ));
        }
        self.phi.check()
    }

    /// r = 2 and phi = identity.
    pub fn is_heat(&self) -> bool {
        self.r == T::lit(2.0) && self.phi.is_identity()
    }

    /// Prescribed gradient u_x(0) = u^{-p}.
    pub fn left_gradient(&self, u_left: T) -> Result<T> {
        if !(u_left > T::zero()) {
            return Err(QuenchError::SingularFlux {
                wall: Wall::Left,
                value: u_left.as_f64(),
            });
        }
        Ok(u_left.powf(-self.p))
    }

    /// Prescribed gradient u_x(a) = (1 - u)^{-q}.
    pub fn right_gradient(&self, u_right: T) -> Result<T> {
        if !(u_right < T::one()) || u_right.is_nan() {
            return Err(QuenchError::SingularFlux {
                wall: Wall::Right,
                value: u_right.as_f64(),
            });
        }
        Ok((T::one() - u_right).powf(-self.q))
    }
}

/// Whether the step size is held fixed or adapted from the derivative history.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum StepMode {
    Fixed,
    #[default]
    Adaptive,
}

/// Everything needed to reproduce one simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct ExperimentConfig<T> {
    pub problem: ProblemSpec<T>,
    pub ic: InitialCondition<T>,
    /// Interior resolution; the grid has n + 2 nodes.
    pub n: usize,
    pub mode: StepMode,
    pub tau0: T,
    pub tau1: T,
    pub tau_min: T,
    pub tau_max: T,
    pub epsilon_quench: T,
    /// Keep every `sample_stride`-th step in the trajectory.
    pub sample_stride: usize,
    /// The final `tail_len` steps are always kept at full resolution.
    pub tail_len: usize,
    pub max_time: Option<T>,
    pub max_steps: Option<usize>,
    /// Step-rejection halvings allowed per step before the run is declared
    /// stalled. Halving may go below `tau_min`.
    pub max_halvings: u32,
    pub output_dir: PathBuf,
}

impl<T: Scalar> ExperimentConfig<T> {
    /// Defaults: tau1 = tau0, tau_min = tau0 / 1000, tau_max = 10 tau0,
    /// epsilon = 1e-4, adaptive stepping.
    pub fn new(problem: ProblemSpec<T>, ic: InitialCondition<T>, n: usize, tau0: T) -> Self {
        ExperimentConfig {
            problem,
            ic,
            n,
            mode: StepMode::Adaptive,
            tau0,
            tau1: tau0,
            tau_min: tau0 / T::lit(1000.0),
            tau_max: tau0 * T::lit(10.0),
            epsilon_quench: T::lit(1e-4),
            sample_stride: 1,
            tail_len: 200_000,
            max_time: None,
            max_steps: None,
            max_halvings: 60,
            output_dir: PathBuf::from("out"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.problem.check()?;
        if self.n < 2 {
            return Err(QuenchError::invalid(
                "n",
                format!("need n >= 2, got {}", self.n),
            ));
        }
        if (self.ic.domain_length() - self.problem.a).abs() > T::lit(1e-12) * self.problem.a {
            return Err(QuenchError::invalid(
                "ic",
                "initial condition domain differs from problem a",
            ));
        }
        let z = T::zero();
        if !(self.tau_min > z
            && self.tau_min <= self.tau0
            && self.tau_min <= self.tau1
            && self.tau0 <= self.tau_max
            && self.tau1 <= self.tau_max)
        {
            return Err(QuenchError::invalid(
                "tau",
                "need 0 < tau_min <= tau0, tau1 <= tau_max",
            ));
        }
        if !(self.epsilon_quench > z && self.epsilon_quench < T::lit(0.5)) {
            return Err(QuenchError::invalid(
                "epsilon_quench",
                format!("need 0 < epsilon < 1/2, got {}", self.epsilon_quench),
            ));
        }
        if self.sample_stride == 0 {
            return Err(QuenchError::invalid("sample_stride", "must be at least 1"));
        }
        if let Some(tm) = self.max_time {
            if !(tm > z) {
                return Err(QuenchError::invalid("max_time", "must be positive"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn phi_eval_examples() {
        let id = PhiSpec::<f64>::identity();
        assert_eq!(id.eval(0.25).unwrap(), 0.25);
        let sq = PhiSpec::power(0.5).unwrap();
        assert_abs_diff_eq!(sq.eval(0.25).unwrap(), 0.0625, epsilon = 1e-15);
        let cube = PhiSpec::power(1.0 / 3.0).unwrap();
        // 0.5^3 exactly; 1/m = 3 up to one rounding
        assert_abs_diff_eq!(cube.eval(0.5).unwrap(), 0.125, epsilon = 1e-15);
    }

    #[test]
    fn phi_derivative_examples() {
        assert_eq!(PhiSpec::<f64>::identity().derivative(0.7).unwrap(), 1.0);
        let sq = PhiSpec::power(0.5).unwrap();
        assert_abs_diff_eq!(sq.derivative(0.5).unwrap(), 1.0, epsilon = 1e-15);
        let cube = PhiSpec::power(1.0 / 3.0).unwrap();
        assert_abs_diff_eq!(cube.derivative(0.5).unwrap(), 0.75, epsilon = 1e-14);
    }

    #[test]
    fn phi_domain_and_singularity() {
        let sq = PhiSpec::<f64>::power(0.5).unwrap();
        assert!(matches!(sq.eval(1.1), Err(QuenchError::Domain { .. })));
        assert!(matches!(sq.eval(-0.01), Err(QuenchError::Domain { .. })));
        assert!(sq.eval(1.0 + 1e-13).is_ok());
        assert_eq!(sq.derivative(0.0), Err(QuenchError::Singularity));
        assert_eq!(PhiSpec::<f64>::identity().derivative(0.0).unwrap(), 1.0);
    }

    #[test]
    fn power_kind_rejects_bad_m() {
        assert!(PhiSpec::<f64>::power(0.0).is_err());
        assert!(PhiSpec::<f64>::power(1.0).is_err());
        assert!(PhiSpec::<f64>::power(-0.5).is_err());
    }

    #[test]
    fn concavity_query() {
        assert!(PhiSpec::<f64>::identity().is_concave());
        assert!(!PhiSpec::<f64>::power(0.5).unwrap().is_concave());
    }

    #[test]
    fn central_difference_converges_to_derivative() {
        let phis = [
            PhiSpec::<f64>::identity(),
            PhiSpec::power(0.5).unwrap(),
            PhiSpec::power(1.0 / 3.0).unwrap(),
            PhiSpec::power(0.8).unwrap(),
        ];
        for phi in phis {
            for &s in &[0.2, 0.5, 0.9] {
                let err = |h: f64| {
                    let fd = (phi.eval(s + h).unwrap() - phi.eval(s - h).unwrap()) / (2.0 * h);
                    (fd - phi.derivative(s).unwrap()).abs()
                };
                let (e1, e2) = (err(1e-3), err(1e-4));
                if e1 < 1e-12 {
                    // exact for polynomials of degree <= 2
                    assert!(e2 < 1e-9, "{phi:?} s={s}");
                    continue;
                }
                let order = (e1 / e2).log10();
                assert!(order >= 1.8, "{phi:?} s={s} order={order}");
            }
        }
    }

    #[test]
    fn problem_spec_accepts_valid() {
        let spec = ProblemSpec::heat(0.125, 1.0, 0.9).unwrap();
        assert!(spec.is_heat());
        let gen = ProblemSpec::new(1.0, 1.0, 1.0, 3.0, PhiSpec::Identity).unwrap();
        assert!(!gen.is_heat());
    }

    #[test]
    fn wall_gradients() {
        let spec = ProblemSpec::heat(1.0, 1.0, 2.0).unwrap();
        assert_eq!(spec.left_gradient(0.25).unwrap(), 4.0);
        assert_eq!(spec.right_gradient(0.5).unwrap(), 4.0);
        assert!(matches!(
            spec.left_gradient(0.0),
            Err(QuenchError::SingularFlux {
                wall: Wall::Left,
                ..
            })
        ));
        assert!(matches!(
            spec.right_gradient(1.0),
            Err(QuenchError::SingularFlux {
                wall: Wall::Right,
                ..
            })
        ));
    }

    proptest! {
        #[test]
        fn problem_spec_rejects_each_invalid_field(
            a in 0.01f64..10.0, p in 0.01f64..5.0, q in 0.01f64..5.0, r in 2.0f64..5.0,
            bad in -10.0f64..0.0, bad_r in -5.0f64..1.999, which in 0usize..4,
        ) {
            let (mut a2, mut p2, mut q2, mut r2) = (a, p, q, r);
            let name = match which {
                0 => { a2 = bad; "a" }
                1 => { p2 = bad; "p" }
                2 => { q2 = bad; "q" }
                _ => { r2 = bad_r; "r" }
            };
            prop_assert!(ProblemSpec::new(a, p, q, r, PhiSpec::Identity).is_ok());
            match ProblemSpec::new(a2, p2, q2, r2, PhiSpec::Identity) {
                Err(QuenchError::InvalidParameter { name: n, .. }) => prop_assert_eq!(n, name),
                other => prop_assert!(false, "expected rejection of {}, got {:?}", name, other),
            }
        }
    }
}
