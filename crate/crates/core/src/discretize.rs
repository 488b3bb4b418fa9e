//! Uniform grid, the semidiscrete right-hand side h^2 du/dt = F(u), and the
//! mass functional used to audit the scheme.
//!
//! Walls are handled by ghost-node elimination: the prescribed gradients
//! u_x(0) = u0^{-p} and u_x(a) = (1 - u_{N+1})^{-q} replace the half-point
//! fluxes outside the domain, so the trapezoidal mass of the semidiscrete
//! solution changes exactly at the rate set by the two wall fluxes.

use serde::{Deserialize, Serialize};

use crate::error::{QuenchError, Result};
use crate::ic::InitialCondition;
use crate::problem::ProblemSpec;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    n: usize,
    h: T,
    nodes: Vec<T>,
}

impl<T: Scalar> Grid<T> {
    /// x_j = j h for j = 0..=n+1 with h = a / (n + 1); the last node is `a`.
    pub fn new(a: T, n: usize) -> Result<Self> {
        if !(a > T::zero() && a.is_finite()) {
            return Err(QuenchError::invalid("a", format!("need a > 0, got {a}")));
        }
        if n < 2 {
            return Err(QuenchError::invalid("n", format!("need n >= 2, got {n}")));
        }
        let h = a / T::from_usize_exact(n + 1);
        let mut nodes: Vec<T> = (0..=n).map(|j| T::from_usize_exact(j) * h).collect();
        nodes.push(a);
        Ok(Grid { n, h, nodes })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> T {
        self.h
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    /// Number of nodes, n + 2.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn a(&self) -> T {
        self.nodes[self.n + 1]
    }
}

pub fn build_grid<T: Scalar>(a: T, n: usize) -> Result<Grid<T>> {
    Grid::new(a, n)
}

/// Nodal values u_j(t), j = 0..=n+1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct StateVector<T> {
    pub t: T,
    pub u: Vec<T>,
}

impl<T: Scalar> StateVector<T> {
    pub fn new(t: T, u: Vec<T>) -> Self {
        StateVector { t, u }
    }

    /// The initial condition evaluated at the grid nodes, at t = 0.
    pub fn from_ic(ic: &InitialCondition<T>, grid: &Grid<T>) -> Self {
        let u = grid.nodes().iter().map(|&x| ic.eval(x)).collect();
        StateVector { t: T::zero(), u }
    }

    pub fn left(&self) -> T {
        self.u[0]
    }

    pub fn right(&self) -> T {
        self.u[self.u.len() - 1]
    }

    pub fn check(&self, grid: &Grid<T>) -> Result<()> {
        if self.u.len() != grid.len() {
            return Err(QuenchError::LengthMismatch {
                expected: grid.len(),
                found: self.u.len(),
            });
        }
        if let Some(bad) = self.u.iter().find(|v| !v.is_finite()) {
            return Err(QuenchError::invalid("u", format!("non-finite value {bad}")));
        }
        Ok(())
    }
}

/// A semidiscrete operator in the scaled form h^2 du/dt = F(u).
pub trait Semidiscrete<T> {
    fn eval(&self, u: &[T], out: &mut [T]) -> Result<()>;
}

/// Second-order central differences for the problem at hand. Uses the plain
/// heat stencil when r = 2 and phi is the identity, the flux form otherwise.
#[derive(Debug, Clone, Copy)]
pub struct FiniteDifference<T> {
    spec: ProblemSpec<T>,
    h: T,
}

impl<T: Scalar> FiniteDifference<T> {
    pub fn new(spec: &ProblemSpec<T>, grid: &Grid<T>) -> Self {
        FiniteDifference {
            spec: *spec,
            h: grid.h(),
        }
    }

    pub fn spec(&self) -> &ProblemSpec<T> {
        &self.spec
    }

    pub fn h(&self) -> T {
        self.h
    }
}

impl<T: Scalar> Semidiscrete<T> for FiniteDifference<T> {
    fn eval(&self, u: &[T], out: &mut [T]) -> Result<()> {
        if self.spec.is_heat() {
            heat_into(u, &self.spec, self.h, out)
        } else {
            general_into(u, &self.spec, self.h, out)
        }
    }
}

fn check_len<T>(u: &[T], out: &[T], grid_len: Option<usize>) -> Result<()> {
    let expected = grid_len.unwrap_or(out.len());
    if u.len() != expected || out.len() != expected {
        return Err(QuenchError::LengthMismatch {
            expected,
            found: u.len(),
        });
    }
    if expected < 3 {
        return Err(QuenchError::invalid("u", "need at least 3 nodes"));
    }
    Ok(())
}

/// Heat stencil written in difference form so that it coincides bit for bit
/// with the flux form at r = 2.
pub fn heat_into<T: Scalar>(u: &[T], spec: &ProblemSpec<T>, h: T, out: &mut [T]) -> Result<()> {
    check_len(u, out, None)?;
    let last = u.len() - 1;
    let two = T::lit(2.0);
    let g_left = spec.left_gradient(u[0])?;
    let g_right = spec.right_gradient(u[last])?;
    out[0] = two * ((u[1] - u[0]) - h * g_left);
    for k in 1..last {
        out[k] = (u[k + 1] - u[k]) - (u[k] - u[k - 1]);
    }
    out[last] = two * (h * g_right - (u[last] - u[last - 1]));
    Ok(())
}

/// h times the half-point flux |d|^{r-2} d with d = delta / h.
#[inline]
fn scaled_flux<T: Scalar>(delta: T, h: T, r_minus_2: T) -> T {
    if delta == T::zero() {
        return T::zero();
    }
    (delta / h).abs().powf(r_minus_2) * delta
}

pub fn general_into<T: Scalar>(u: &[T], spec: &ProblemSpec<T>, h: T, out: &mut [T]) -> Result<()> {
    check_len(u, out, None)?;
    let last = u.len() - 1;
    let two = T::lit(2.0);
    let rm2 = spec.r - two;
    let g_left = spec.left_gradient(u[0])?;
    let g_right = spec.right_gradient(u[last])?;
    // h * Phi at the walls from the prescribed gradients
    let wall_left = h * scaled_flux(g_left, T::one(), rm2);
    let wall_right = h * scaled_flux(g_right, T::one(), rm2);

    let mut flux_below = scaled_flux(u[1] - u[0], h, rm2);
    out[0] = spec.phi.mobility(u[0])? * two * (flux_below - wall_left);
    for k in 1..last {
        let flux_above = scaled_flux(u[k + 1] - u[k], h, rm2);
        out[k] = spec.phi.mobility(u[k])? * (flux_above - flux_below);
        flux_below = flux_above;
    }
    out[last] = spec.phi.mobility(u[last])? * two * (wall_right - flux_below);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(QuenchError::invalid("u", "non-finite flux"));
    }
    Ok(())
}

/// F for r = 2, phi = identity:
/// F_0 = 2u_1 - 2h u_0^{-p} - 2u_0, F_k = u_{k-1} - 2u_k + u_{k+1},
/// F_{N+1} = 2u_N + 2h (1 - u_{N+1})^{-q} - 2u_{N+1}.
///
/// The spec's `r` and `phi` are not consulted.
pub fn rhs_heat<T: Scalar>(
    v: &StateVector<T>,
    spec: &ProblemSpec<T>,
    grid: &Grid<T>,
) -> Result<Vec<T>> {
    v.check(grid)?;
    let mut out = vec![T::zero(); v.u.len()];
    heat_into(&v.u, spec, grid.h(), &mut out)?;
    Ok(out)
}

/// F for (phi(u))_t = (|u_x|^{r-2} u_x)_x in flux form:
/// F_k = B(u_k) h (Phi_{k+1/2} - Phi_{k-1/2}) with Phi = |d|^{r-2} d at the
/// half points and the wall gradients standing in for Phi_{-1/2}, Phi_{N+3/2}.
pub fn rhs_general<T: Scalar>(
    v: &StateVector<T>,
    spec: &ProblemSpec<T>,
    grid: &Grid<T>,
) -> Result<Vec<T>> {
    v.check(grid)?;
    let mut out = vec![T::zero(); v.u.len()];
    general_into(&v.u, spec, grid.h(), &mut out)?;
    Ok(out)
}

/// Trapezoidal approximation of the integral of phi(u) over [0, a].
pub fn mass<T: Scalar>(v: &StateVector<T>, spec: &ProblemSpec<T>, grid: &Grid<T>) -> Result<T> {
    v.check(grid)?;
    mass_of(&v.u, spec, grid.h())
}

pub(crate) fn mass_of<T: Scalar>(u: &[T], spec: &ProblemSpec<T>, h: T) -> Result<T> {
    let last = u.len() - 1;
    let half = T::lit(0.5);
    let mut interior = T::zero();
    if spec.phi.is_identity() {
        for &v in &u[1..last] {
            interior = interior + v;
        }
        return Ok(h * (half * (u[0] + u[last]) + interior));
    }
    for &v in &u[1..last] {
        interior = interior + spec.phi.eval(v)?;
    }
    Ok(h * (half * (spec.phi.eval(u[0])? + spec.phi.eval(u[last])?) + interior))
}

/// Rate of change of the mass dictated by the walls:
/// (1 - u_{N+1})^{-q(r-1)} - u_0^{-p(r-1)}.
pub fn flux_balance<T: Scalar>(v: &StateVector<T>, spec: &ProblemSpec<T>) -> Result<T> {
    flux_balance_of(v.left(), v.right(), spec)
}

pub(crate) fn flux_balance_of<T: Scalar>(left: T, right: T, spec: &ProblemSpec<T>) -> Result<T> {
    let rm1 = spec.r - T::one();
    Ok(spec.right_gradient(right)?.powf(rm1) - spec.left_gradient(left)?.powf(rm1))
}
