//! Post-processing of runs: theoretical rates and quenching-time bounds,
//! log-log rate fits near the quenching time, envelope checks, the temporal
//! order estimator and the discrete mass audit.

use serde::{Deserialize, Serialize};

use crate::discretize::{
    flux_balance_of, mass_of, FiniteDifference, Grid, Semidiscrete, StateVector,
};
use crate::error::{QuenchError, Result};
use crate::ic::InitialCondition;
use crate::integrate::{CrankNicolson, QuenchReport, RunRecord};
use crate::problem::{ProblemSpec, Wall};
use crate::Scalar;

/// Minimum number of samples a rate fit accepts.
pub const MIN_FIT_POINTS: usize = 10;
/// Default width of the fit window in decades of T - t.
pub const DEFAULT_WINDOW_DECADES: f64 = 2.0;
/// Nodes whose error differences fall below this are left out of the order estimate.
pub const ORDER_DENOMINATOR_FLOOR: f64 = 1e-13;

/// 1/(2(q+1)) at the right wall, 1/(2(p+1)) at the left.
pub fn theoretical_rate<T: Scalar>(wall: Wall, spec: &ProblemSpec<T>) -> T {
    let exponent = match wall {
        Wall::Right => spec.q,
        Wall::Left => spec.p,
    };
    rate_for_exponent(exponent)
}

pub(crate) fn rate_for_exponent<T: Scalar>(exponent: T) -> T {
    (T::lit(2.0) * (exponent + T::one())).recip()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct BoundsReport<T> {
    pub side: Wall,
    #[serde(rename = "T_lower")]
    pub t_lower: T,
    #[serde(rename = "C_envelope")]
    pub c_envelope: T,
    pub rate_theory: T,
}

/// Lower bound on the quenching time and the one-sided envelope constant.
///
/// Right wall: T_q = a (1 - u0(a))^{2q+2} / (2 (qa + 1)(q + 1)),
/// C2 = ((qa + 1)(2q + 2) / a)^{1/(2q+2)}.
/// Left wall: T_p = a u0(0)^{2p+2} / (2 (pa + 1)(p + 1)),
/// C4 = ((pa + 1)(2p + 2) / a)^{1/(2p+2)}.
pub fn lower_bound_t<T: Scalar>(
    wall: Wall,
    spec: &ProblemSpec<T>,
    ic: &InitialCondition<T>,
) -> BoundsReport<T> {
    let a = spec.a;
    let (exponent, gap) = match wall {
        Wall::Right => (spec.q, T::one() - ic.eval(a)),
        Wall::Left => (spec.p, ic.eval(T::zero())),
    };
    let one = T::one();
    let two = T::lit(2.0);
    let power = two * exponent + two;
    let t_lower = a * gap.powf(power) / (two * (exponent * a + one) * (exponent + one));
    let c_envelope = ((exponent * a + one) * power / a).powf(power.recip());
    BoundsReport {
        side: wall,
        t_lower,
        c_envelope,
        rate_theory: rate_for_exponent(exponent),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct RateFit<T> {
    pub slope: T,
    pub intercept: T,
    pub residual_rms: T,
    /// (smallest, largest) T - t in the window.
    pub window: (T, T),
    pub n_points: usize,
}

/// Distance of the quenching wall from its singular value.
fn wall_gap<T: Scalar>(wall: Wall, u_left: T, u_right: T) -> T {
    match wall {
        Wall::Left => u_left,
        Wall::Right => T::one() - u_right,
    }
}

/// Lower end of T - t used by default in rate fits: h^2. Closer to the
/// quenching time the spatial grid no longer resolves the boundary layer and
/// the wall follows the semidiscrete rate instead of the continuous one.
pub fn default_fit_floor<T: Scalar>(rec: &RunRecord<T>) -> T {
    rec.h * rec.h
}

/// (T - t, gap) pairs over `window_decades` decades of T - t, starting at
/// `floor` or one sample before the end of the record, whichever is later.
fn fit_window<T: Scalar>(
    rec: &RunRecord<T>,
    wall: Wall,
    t_end: T,
    window_decades: T,
    floor: T,
) -> Result<Vec<(T, T)>> {
    let n = rec.samples.len();
    if n < 2 {
        return Err(QuenchError::InsufficientPoints {
            found: 0,
            needed: MIN_FIT_POINTS,
        });
    }
    let lo = (t_end - rec.samples[n - 2].t).max(floor);
    let hi = lo * T::lit(10.0).powf(window_decades);
    let pts: Vec<(T, T)> = rec.samples[..n - 1]
        .iter()
        .map(|s| (t_end - s.t, wall_gap(wall, s.u_left, s.u_right)))
        .filter(|&(dt, y)| dt >= lo && dt <= hi && dt > T::zero() && y > T::zero())
        .collect();
    if pts.len() < MIN_FIT_POINTS {
        return Err(QuenchError::InsufficientPoints {
            found: pts.len(),
            needed: MIN_FIT_POINTS,
        });
    }
    Ok(pts)
}

/// The (T - t, gap) pairs that [`fit_quench_rate`] regresses on.
pub fn fit_points<T: Scalar>(
    rec: &RunRecord<T>,
    rep: &QuenchReport<T>,
    window_decades: T,
    floor: T,
) -> Result<Vec<(T, T)>> {
    let wall = rep.side.wall().ok_or(QuenchError::NotQuenched)?;
    fit_window(rec, wall, rep.t_est, window_decades, floor)
}

/// Ordinary least squares y = intercept + slope x; returns (slope, intercept, rms).
pub fn least_squares<T: Scalar>(xs: &[T], ys: &[T]) -> (T, T, T) {
    let n = T::from_usize_exact(xs.len());
    let mean_x = xs.iter().fold(T::zero(), |a, &b| a + b) / n;
    let mean_y = ys.iter().fold(T::zero(), |a, &b| a + b) / n;
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    for (&x, &y) in xs.iter().zip(ys) {
        sxx = sxx + (x - mean_x) * (x - mean_x);
        sxy = sxy + (x - mean_x) * (y - mean_y);
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss = xs.iter().zip(ys).fold(T::zero(), |acc, (&x, &y)| {
        let r = y - intercept - slope * x;
        acc + r * r
    });
    (slope, intercept, (ss / n).sqrt())
}

/// Fits ln(gap) against ln(T - t) near the quenching time, where the gap is
/// u(0, t) at the left wall and 1 - u(a, t) at the right.
pub fn fit_quench_rate<T: Scalar>(
    rec: &RunRecord<T>,
    rep: &QuenchReport<T>,
    window_decades: T,
    floor: T,
) -> Result<RateFit<T>> {
    let pts = fit_points(rec, rep, window_decades, floor)?;
    let xs: Vec<T> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<T> = pts.iter().map(|p| p.1.ln()).collect();
    let (slope, intercept, residual_rms) = least_squares(&xs, &ys);
    let lo = pts.iter().map(|p| p.0).fold(T::infinity(), T::min);
    let hi = pts.iter().map(|p| p.0).fold(T::neg_infinity(), T::max);
    Ok(RateFit {
        slope,
        intercept,
        residual_rms,
        window: (lo, hi),
        n_points: pts.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct EnvelopeReport<T> {
    pub side: Wall,
    /// Share of window samples on the correct side of the C2 / C4 envelope.
    pub fraction_satisfied: T,
    pub n_points: usize,
    pub window: (T, T),
    /// The gap shrinks as T - t shrinks (positive log-log slope), which is
    /// all that can be said about the companion bound with its unknown constant.
    pub companion_slope_positive: bool,
}

/// Checks gap <= C (T - t)^{rate} over the fit window, with C and the rate
/// from `bounds` and T taken as the run's T_est.
pub fn check_envelopes<T: Scalar>(
    rec: &RunRecord<T>,
    rep: &QuenchReport<T>,
    bounds: &BoundsReport<T>,
    window_decades: T,
    floor: T,
) -> Result<EnvelopeReport<T>> {
    let wall = rep.side.wall().ok_or(QuenchError::NotQuenched)?;
    let pts = fit_window(rec, wall, rep.t_est, window_decades, floor)?;
    let ok = pts
        .iter()
        .filter(|&&(dt, gap)| gap <= bounds.c_envelope * dt.powf(bounds.rate_theory))
        .count();
    let xs: Vec<T> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<T> = pts.iter().map(|p| p.1.ln()).collect();
    let (slope, _, _) = least_squares(&xs, &ys);
    Ok(EnvelopeReport {
        side: wall,
        fraction_satisfied: T::from_usize_exact(ok) / T::from_usize_exact(pts.len()),
        n_points: pts.len(),
        window: (pts[0].0, pts[pts.len() - 1].0),
        companion_slope_positive: slope > T::zero(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct ConvergenceReport<T> {
    pub per_node_order: Vec<T>,
    pub median_order: T,
    pub nodes_used: Vec<usize>,
}

/// p_i = ln(|v_tau - v_ref|_i / |v_{tau/2} - v_ref|_i) / ln 2 at every node
/// whose error differences are not below the indeterminacy floor.
pub fn estimate_order<T: Scalar>(
    run_tau: &StateVector<T>,
    run_tau_half: &StateVector<T>,
    run_ref: &StateVector<T>,
) -> Result<ConvergenceReport<T>> {
    let n = run_ref.u.len();
    for v in [run_tau, run_tau_half] {
        if v.u.len() != n {
            return Err(QuenchError::LengthMismatch {
                expected: n,
                found: v.u.len(),
            });
        }
    }
    let floor = T::lit(ORDER_DENOMINATOR_FLOOR);
    let mut per_node_order = Vec::new();
    let mut nodes_used = Vec::new();
    for i in 0..n {
        let coarse = (run_tau.u[i] - run_ref.u[i]).abs();
        let fine = (run_tau_half.u[i] - run_ref.u[i]).abs();
        if coarse < floor || fine < floor {
            continue;
        }
        per_node_order.push((coarse / fine).ln() / T::LN_2());
        nodes_used.push(i);
    }
    if per_node_order.is_empty() {
        return Err(QuenchError::AllNodesExcluded);
    }
    let median_order = median(&per_node_order);
    Ok(ConvergenceReport {
        per_node_order,
        median_order,
        nodes_used,
    })
}

fn median<T: Scalar>(values: &[T]) -> T {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite orders"));
    let m = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[m]
    } else {
        (sorted[m - 1] + sorted[m]) / T::lit(2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct MassAudit<T> {
    pub h: T,
    pub tau: T,
    pub steps: usize,
    /// max over steps of |(m_{k+1} - m_k)/tau - flux_balance(midpoint)|.
    pub max_defect: T,
    pub mean_defect: T,
}

/// Marches fixed steps from `ic` to `t_end` and compares the discrete mass
/// rate with the wall flux balance at the midpoint state (v_k + v_{k+1}) / 2.
pub fn mass_audit<T: Scalar>(
    spec: &ProblemSpec<T>,
    ic: &InitialCondition<T>,
    n: usize,
    tau: T,
    t_end: T,
) -> Result<MassAudit<T>> {
    let grid = Grid::new(spec.a, n)?;
    let h = grid.h();
    let rhs = FiniteDifference::new(spec, &grid);
    let mut cn = CrankNicolson::new(h, grid.len());
    let mut u = StateVector::from_ic(ic, &grid).u;
    let mut f = vec![T::zero(); u.len()];
    let steps = (t_end / tau).round().to_usize().unwrap_or(0).max(1);
    let last = u.len() - 1;
    let mut mass = mass_of(&u, spec, h)?;
    let mut max_defect = T::zero();
    let mut sum = T::zero();
    for _ in 0..steps {
        rhs.eval(&u, &mut f)?;
        cn.try_step(&rhs, &u, &f, tau)?;
        let next = cn.result();
        let next_mass = mass_of(next, spec, h)?;
        let half = T::lit(0.5);
        let mid_left = half * (u[0] + next[0]);
        let mid_right = half * (u[last] + next[last]);
        let defect = ((next_mass - mass) / tau - flux_balance_of(mid_left, mid_right, spec)?).abs();
        max_defect = max_defect.max(defect);
        sum = sum + defect;
        mass = next_mass;
        cn.swap_into(&mut u);
    }
    Ok(MassAudit {
        h,
        tau,
        steps,
        max_defect,
        mean_defect: sum / T::from_usize_exact(steps),
    })
}
