//! Time marching with the semi-explicit Crank-Nicolson scheme
//!
//!   v* = v + 2 mu F(v),   v_new = v + mu (F(v*) + F(v)),   mu = tau / (2 h^2),
//!
//! step-size adaptation from the history of nodal time derivatives, and
//! detection of quenching at either wall.

use std::collections::VecDeque;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::discretize::{
    flux_balance_of, mass_of, FiniteDifference, Grid, Semidiscrete, StateVector,
};
use crate::error::{QuenchError, Result};
use crate::ic::{validate, ICValidationReport, DEFAULT_COMPAT_TOL};
use crate::problem::{ExperimentConfig, ProblemSpec, StepMode, Wall};
use crate::Scalar;

/// Per-step wall change below which a run pinned at `tau_min` counts as stalled.
const STALL_WALL_CHANGE: f64 = 1e-14;
/// Samples inspected by the blow-up witness.
pub const BLOWUP_WINDOW: usize = 10;

/// Scratch space for repeated steps of one semidiscrete system.
#[derive(Debug, Clone)]
pub struct CrankNicolson<T> {
    h: T,
    predictor: Vec<T>,
    f_predictor: Vec<T>,
    next: Vec<T>,
}

impl<T: Scalar> CrankNicolson<T> {
    pub fn new(h: T, len: usize) -> Self {
        CrankNicolson {
            h,
            predictor: vec![T::zero(); len],
            f_predictor: vec![T::zero(); len],
            next: vec![T::zero(); len],
        }
    }

    /// Attempts one step from `u` (with `f_u = F(u)` already evaluated).
    /// On success the new state is available from [`Self::result`].
    ///
    /// A predictor or corrector that leaves (0, 1) at a wall yields
    /// [`QuenchError::SingularFlux`]; callers treat it as a rejection.
    pub fn try_step<S: Semidiscrete<T>>(
        &mut self,
        rhs: &S,
        u: &[T],
        f_u: &[T],
        tau: T,
    ) -> Result<()> {
        let mu = tau / (T::lit(2.0) * self.h * self.h);
        let two_mu = mu + mu;
        for ((p, &v), &f) in self.predictor.iter_mut().zip(u).zip(f_u) {
            *p = v + two_mu * f;
        }
        rhs.eval(&self.predictor, &mut self.f_predictor)?;
        for (((n, &v), &fs), &f) in self.next.iter_mut().zip(u).zip(&self.f_predictor).zip(f_u) {
            *n = v + mu * (fs + f);
        }
        let last = self.next.len() - 1;
        if !(self.next[0] > T::zero()) {
            return Err(QuenchError::SingularFlux {
                wall: Wall::Left,
                value: self.next[0].as_f64(),
            });
        }
        if !(self.next[last] < T::one()) {
            return Err(QuenchError::SingularFlux {
                wall: Wall::Right,
                value: self.next[last].as_f64(),
            });
        }
        if self.next.iter().any(|v| !v.is_finite()) {
            return Err(QuenchError::invalid("u", "non-finite value after step"));
        }
        Ok(())
    }

    pub fn result(&self) -> &[T] {
        &self.next
    }

    pub(crate) fn swap_into(&mut self, u: &mut Vec<T>) {
        std::mem::swap(u, &mut self.next);
    }
}

/// One semi-explicit Crank-Nicolson step of the problem's own operator.
pub fn step<T: Scalar>(
    v: &StateVector<T>,
    tau: T,
    spec: &ProblemSpec<T>,
    grid: &Grid<T>,
) -> Result<StateVector<T>> {
    v.check(grid)?;
    let rhs = FiniteDifference::new(spec, grid);
    step_with(&rhs, v, tau, grid.h())
}

/// One step of an arbitrary semidiscrete operator.
pub fn step_with<T: Scalar, S: Semidiscrete<T>>(
    rhs: &S,
    v: &StateVector<T>,
    tau: T,
    h: T,
) -> Result<StateVector<T>> {
    if !(tau > T::zero()) {
        return Err(QuenchError::invalid("tau", "step must be positive"));
    }
    let mut f = vec![T::zero(); v.u.len()];
    rhs.eval(&v.u, &mut f)?;
    let mut cn = CrankNicolson::new(h, v.u.len());
    cn.try_step(rhs, &v.u, &f, tau)?;
    Ok(StateVector::new(v.t + tau, cn.result().to_vec()))
}

/// Marches `steps` fixed steps of size `tau` from `v`. Any rejection is an error.
pub fn march_fixed<T: Scalar>(
    v: &StateVector<T>,
    tau: T,
    steps: usize,
    spec: &ProblemSpec<T>,
    grid: &Grid<T>,
) -> Result<StateVector<T>> {
    v.check(grid)?;
    let rhs = FiniteDifference::new(spec, grid);
    let mut cn = CrankNicolson::new(grid.h(), v.u.len());
    let mut u = v.u.clone();
    let mut f = vec![T::zero(); u.len()];
    for _ in 0..steps {
        rhs.eval(&u, &mut f)?;
        cn.try_step(&rhs, &u, &f, tau)?;
        cn.swap_into(&mut u);
    }
    Ok(StateVector::new(v.t + T::from_usize_exact(steps) * tau, u))
}

/// Chooses the next step from the two previous steps and the last three
/// nodal derivative vectors d = du/dt.
#[derive(Debug, Clone)]
pub struct StepController<T> {
    pub tau_prev2: T,
    pub tau_prev: T,
    pub tau_min: T,
    pub tau_max: T,
    pub mode: StepMode,
    /// Oldest first; at most three entries.
    deriv_hist: VecDeque<Vec<T>>,
}

impl<T: Scalar> StepController<T> {
    pub fn new(mode: StepMode, tau_min: T, tau_max: T) -> Self {
        StepController {
            tau_prev2: T::zero(),
            tau_prev: T::zero(),
            tau_min,
            tau_max,
            mode,
            deriv_hist: VecDeque::with_capacity(3),
        }
    }

    /// Records the derivative at the newest accepted state.
    pub fn push_derivative(&mut self, d: &[T]) {
        if self.deriv_hist.len() == 3 {
            let mut oldest = self.deriv_hist.pop_front().expect("len 3");
            oldest.clear();
            oldest.extend_from_slice(d);
            self.deriv_hist.push_back(oldest);
        } else {
            self.deriv_hist.push_back(d.to_vec());
        }
    }

    /// Records a step that was actually taken.
    pub fn record_step(&mut self, tau: T) {
        self.tau_prev2 = self.tau_prev;
        self.tau_prev = tau;
    }

    pub fn is_warm(&self) -> bool {
        self.deriv_hist.len() == 3
    }

    pub fn history(&self) -> impl Iterator<Item = &[T]> {
        self.deriv_hist.iter().map(Vec::as_slice)
    }

    pub fn clamp(&self, tau: T) -> T {
        tau.max(self.tau_min).min(self.tau_max)
    }
}

/// tau_next^2 = tau_k^2 + min_i { (d_i^{k-1} - d_i^{k-2})^2 - (d_i^k - d_i^{k-1})^2 },
/// clamped to [tau_min, tau_max]; a non-positive radicand gives tau_min.
///
/// In fixed mode, or before three derivatives are recorded, the previous step
/// is returned unchanged (clamped).
pub fn adapt_tau<T: Scalar>(ctrl: &StepController<T>) -> T {
    if ctrl.mode == StepMode::Fixed || !ctrl.is_warm() {
        return ctrl.clamp(ctrl.tau_prev);
    }
    let d2 = &ctrl.deriv_hist[0];
    let d1 = &ctrl.deriv_hist[1];
    let d0 = &ctrl.deriv_hist[2];
    let mut min = T::infinity();
    for i in 0..d0.len() {
        let older = d1[i] - d2[i];
        let newer = d0[i] - d1[i];
        let change = older * older - newer * newer;
        if change < min {
            min = change;
        }
    }
    let radicand = ctrl.tau_prev * ctrl.tau_prev + min;
    if !(radicand > T::zero()) {
        return ctrl.tau_min;
    }
    ctrl.clamp(radicand.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuenchSide {
    Left,
    Right,
    None,
}

impl QuenchSide {
    pub fn wall(self) -> Option<Wall> {
        match self {
            QuenchSide::Left => Some(Wall::Left),
            QuenchSide::Right => Some(Wall::Right),
            QuenchSide::None => None,
        }
    }
}

impl From<Wall> for QuenchSide {
    fn from(w: Wall) -> Self {
        match w {
            Wall::Left => QuenchSide::Left,
            Wall::Right => QuenchSide::Right,
        }
    }
}

/// Left if u_0 <= eps, right if u_{N+1} >= 1 - eps. When both trip, the wall
/// closer to its singular value wins (ties go left).
pub fn detect_quench<T: Scalar>(v: &StateVector<T>, epsilon: T) -> QuenchSide {
    detect_walls(v.left(), v.right(), epsilon)
}

fn detect_walls<T: Scalar>(left: T, right: T, epsilon: T) -> QuenchSide {
    let gap_left = left;
    let gap_right = T::one() - right;
    match (gap_left <= epsilon, gap_right <= epsilon) {
        (true, true) if gap_right < gap_left => QuenchSide::Right,
        (true, _) => QuenchSide::Left,
        (false, true) => QuenchSide::Right,
        (false, false) => QuenchSide::None,
    }
}

/// One retained point of the trajectory. The CSV trajectory file holds exactly
/// these columns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct Sample<T> {
    pub t: T,
    pub u_left: T,
    pub u_right: T,
    /// Step that produced this sample; 0 for the initial state.
    pub tau: T,
    pub mass: T,
    pub flux_balance: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Quenched,
    MaxTime,
    MaxSteps,
    StepFloorStall,
}

/// Running checks of the qualitative properties over every accepted state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct InvariantMonitor<T> {
    /// Smallest u_{j+1} - u_j seen.
    pub min_spatial_increment: T,
    /// Extremes of du/dt over interior nodes.
    pub min_interior_rate: T,
    pub max_interior_rate: T,
    pub states_checked: usize,
}

impl<T: Scalar> InvariantMonitor<T> {
    fn new() -> Self {
        InvariantMonitor {
            min_spatial_increment: T::infinity(),
            min_interior_rate: T::infinity(),
            max_interior_rate: T::neg_infinity(),
            states_checked: 0,
        }
    }

    fn observe(&mut self, u: &[T], d: &[T]) {
        for w in u.windows(2) {
            self.min_spatial_increment = self.min_spatial_increment.min(w[1] - w[0]);
        }
        for &r in &d[1..d.len() - 1] {
            self.min_interior_rate = self.min_interior_rate.min(r);
            self.max_interior_rate = self.max_interior_rate.max(r);
        }
        self.states_checked += 1;
    }

    /// u_{j+1} > u_j held at every checked state.
    pub fn strictly_monotone(&self) -> bool {
        self.min_spatial_increment > T::zero()
    }

    /// +1 if every interior du/dt was positive, -1 if every one was negative.
    pub fn uniform_rate_sign(&self) -> Option<i8> {
        if self.min_interior_rate > T::zero() {
            Some(1)
        } else if self.max_interior_rate < T::zero() {
            Some(-1)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunRecord<T> {
    pub samples: Vec<Sample<T>>,
    /// du/dt at (left, right) wall for each sample.
    pub wall_rates: Vec<(T, T)>,
    pub step_count: usize,
    pub termination: Termination,
    /// Step attempts rejected because a wall left (0, 1).
    pub rejections: usize,
    /// Accepted steps shorter than `tau_min` (only after rejections).
    pub steps_below_tau_min: usize,
    pub monitor: InvariantMonitor<T>,
    pub validation: ICValidationReport<T>,
    pub final_state: StateVector<T>,
    pub h: T,
}

impl<T: Scalar> RunRecord<T> {
    pub fn times(&self) -> impl Iterator<Item = T> + '_ {
        self.samples.iter().map(|s| s.t)
    }

    /// |du/dt| at `wall` over the final `BLOWUP_WINDOW` samples.
    pub fn final_wall_rates(&self, wall: Wall) -> Vec<T> {
        let start = self.wall_rates.len().saturating_sub(BLOWUP_WINDOW);
        self.wall_rates[start..]
            .iter()
            .map(|&(l, r)| match wall {
                Wall::Left => l.abs(),
                Wall::Right => r.abs(),
            })
            .collect()
    }

    /// Whether |du/dt| at `wall` strictly increases over the final samples.
    pub fn wall_rate_blows_up(&self, wall: Wall) -> bool {
        let rates = self.final_wall_rates(wall);
        rates.len() == BLOWUP_WINDOW && rates.windows(2).all(|w| w[1] > w[0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct QuenchReport<T> {
    pub side: QuenchSide,
    /// First time the threshold was crossed.
    #[serde(rename = "T_est")]
    pub t_est: T,
    pub epsilon: T,
    pub wall_value_at_stop: T,
    /// max |du/dt| at the quenching wall over the final samples.
    pub blowup_indicator: T,
}

struct Recorder<T> {
    stride: usize,
    tail_len: usize,
    kept: Vec<(usize, Sample<T>, (T, T))>,
    tail: VecDeque<(usize, Sample<T>, (T, T))>,
}

impl<T: Scalar> Recorder<T> {
    fn new(stride: usize, tail_len: usize) -> Self {
        let tail_len = tail_len.max(BLOWUP_WINDOW);
        Recorder {
            stride,
            tail_len,
            kept: Vec::new(),
            tail: VecDeque::with_capacity(tail_len.min(1 << 20)),
        }
    }

    fn push(&mut self, step: usize, sample: Sample<T>, rates: (T, T)) {
        if step.is_multiple_of(self.stride) {
            self.kept.push((step, sample, rates));
        }
        if self.tail.len() == self.tail_len {
            self.tail.pop_front();
        }
        self.tail.push_back((step, sample, rates));
    }

    fn finish(mut self) -> (Vec<Sample<T>>, Vec<(T, T)>) {
        if let Some(&(first_tail, _, _)) = self.tail.front() {
            self.kept.retain(|e| e.0 < first_tail);
        }
        self.kept.extend(self.tail);
        self.kept.into_iter().map(|(_, s, r)| (s, r)).unzip()
    }
}

/// Runs one experiment from t = 0 until quench, `max_time`, `max_steps` or a
/// stall.
///
/// The first two steps are `tau0` and `tau1`; afterwards [`adapt_tau`] picks
/// the step (or `tau0` is reused in fixed mode). A step whose predictor or
/// corrector leaves (0, 1) at a wall is halved and retried, also below
/// `tau_min`, at most `max_halvings` times; fixed mode never halves.
pub fn run<T: Scalar>(cfg: &ExperimentConfig<T>) -> Result<(RunRecord<T>, QuenchReport<T>)> {
    cfg.validate()?;
    let spec = cfg.problem;
    let grid = Grid::new(spec.a, cfg.n)?;
    let h = grid.h();
    let h2 = h * h;
    let len = grid.len();
    let last = len - 1;

    let validation = validate(&cfg.ic, &spec, T::lit(DEFAULT_COMPAT_TOL));
    if !validation.hypotheses_ok {
        warn!("initial condition fails the quenching hypotheses: {validation:?}");
    }

    let rhs = FiniteDifference::new(&spec, &grid);
    let mut cn = CrankNicolson::new(h, len);
    let mut ctrl = StepController::new(cfg.mode, cfg.tau_min, cfg.tau_max);
    let mut monitor = InvariantMonitor::new();
    let mut recorder = Recorder::new(cfg.sample_stride, cfg.tail_len);

    let mut t = T::zero();
    let mut u = StateVector::from_ic(&cfg.ic, &grid).u;
    let mut f = vec![T::zero(); len];
    let mut d = vec![T::zero(); len];
    rhs.eval(&u, &mut f)?;
    for (dk, &fk) in d.iter_mut().zip(&f) {
        *dk = fk / h2;
    }
    ctrl.push_derivative(&d);
    monitor.observe(&u, &d);

    let sample_at = |t: T, tau: T, u: &[T]| -> Result<Sample<T>> {
        Ok(Sample {
            t,
            u_left: u[0],
            u_right: u[last],
            tau,
            mass: mass_of(u, &spec, h)?,
            flux_balance: flux_balance_of(u[0], u[last], &spec)?,
        })
    };
    recorder.push(0, sample_at(t, T::zero(), &u)?, (d[0], d[last]));

    let mut step_count = 0usize;
    let mut rejections = 0usize;
    let mut steps_below_tau_min = 0usize;
    let termination = loop {
        if let Some(max_steps) = cfg.max_steps {
            if step_count >= max_steps {
                break Termination::MaxSteps;
            }
        }
        let mut tau = match (cfg.mode, step_count) {
            (StepMode::Fixed, _) | (_, 0) => cfg.tau0,
            (_, 1) => cfg.tau1,
            _ => adapt_tau(&ctrl),
        };
        if let (Some(max_time), StepMode::Adaptive) = (cfg.max_time, cfg.mode) {
            tau = tau.min(max_time - t);
        }

        let mut halvings = 0u32;
        let accepted = loop {
            match cn.try_step(&rhs, &u, &f, tau) {
                Ok(()) => break true,
                Err(QuenchError::SingularFlux { .. })
                    if cfg.mode == StepMode::Adaptive && halvings < cfg.max_halvings =>
                {
                    rejections += 1;
                    halvings += 1;
                    tau = tau / T::lit(2.0);
                }
                Err(QuenchError::SingularFlux { .. }) => {
                    rejections += 1;
                    break false;
                }
                Err(e) => return Err(e),
            }
        };
        if !accepted {
            debug!("step rejected at t = {t} after {halvings} halvings");
            break Termination::StepFloorStall;
        }

        let (old_left, old_right) = (u[0], u[last]);
        cn.swap_into(&mut u);
        t = t + tau;
        step_count += 1;
        if tau < cfg.tau_min {
            steps_below_tau_min += 1;
        }

        rhs.eval(&u, &mut f)?;
        for (dk, &fk) in d.iter_mut().zip(&f) {
            *dk = fk / h2;
        }
        ctrl.record_step(tau);
        ctrl.push_derivative(&d);
        monitor.observe(&u, &d);
        recorder.push(step_count, sample_at(t, tau, &u)?, (d[0], d[last]));

        if step_count.is_multiple_of(500_000) {
            debug!(
                "step {step_count}: t = {t}, tau = {tau}, walls = ({}, {})",
                u[0], u[last]
            );
        }

        if detect_walls(u[0], u[last], cfg.epsilon_quench) != QuenchSide::None {
            break Termination::Quenched;
        }
        if let Some(max_time) = cfg.max_time {
            // fixed mode keeps tau bit-constant and stops at the nearest step
            let reached = match cfg.mode {
                StepMode::Adaptive => t >= max_time,
                StepMode::Fixed => t + cfg.tau0 / T::lit(2.0) > max_time,
            };
            if reached {
                break Termination::MaxTime;
            }
        }
        let wall_change = (u[0] - old_left).abs().max((u[last] - old_right).abs());
        if tau <= cfg.tau_min && wall_change < T::lit(STALL_WALL_CHANGE) {
            break Termination::StepFloorStall;
        }
    };

    let (samples, wall_rates) = recorder.finish();
    let final_state = StateVector::new(t, u);
    let side = if termination == Termination::Quenched {
        detect_quench(&final_state, cfg.epsilon_quench)
    } else {
        QuenchSide::None
    };
    // report the wall nearest its singular value when nothing quenched
    let wall = side
        .wall()
        .unwrap_or(if final_state.left() <= T::one() - final_state.right() {
            Wall::Left
        } else {
            Wall::Right
        });
    let record = RunRecord {
        samples,
        wall_rates,
        step_count,
        termination,
        rejections,
        steps_below_tau_min,
        monitor,
        validation,
        final_state,
        h,
    };
    let blowup_indicator = record
        .final_wall_rates(wall)
        .into_iter()
        .fold(T::zero(), T::max);
    let report = QuenchReport {
        side,
        t_est: t,
        epsilon: cfg.epsilon_quench,
        wall_value_at_stop: match wall {
            Wall::Left => record.final_state.left(),
            Wall::Right => record.final_state.right(),
        },
        blowup_indicator,
    };
    Ok((record, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::{build_grid, rhs_heat};
    use crate::ic::example_a;
    use approx::assert_abs_diff_eq;

    struct ZeroRhs;
    impl Semidiscrete<f64> for ZeroRhs {
        fn eval(&self, _u: &[f64], out: &mut [f64]) -> Result<()> {
            out.iter_mut().for_each(|v| *v = 0.0);
            Ok(())
        }
    }

    #[test]
    fn zero_rhs_is_a_fixed_point() {
        let v = StateVector::new(0.0, vec![0.2, 0.4, 0.6, 0.8]);
        let next = step_with(&ZeroRhs, &v, 1e-3, 0.1).unwrap();
        assert_eq!(next.u, v.u);
        assert_eq!(next.t, 1e-3);
    }

    #[test]
    fn single_step_matches_scheme_formula() {
        let (spec, ic) = example_a::<f64>();
        let g = build_grid(spec.a, 3).unwrap();
        let v = StateVector::from_ic(&ic, &g);
        let tau = 1e-8;
        let next = step(&v, tau, &spec, &g).unwrap();
        let mu = tau / (2.0 * g.h() * g.h());
        let f0 = rhs_heat(&v, &spec, &g).unwrap();
        let pred: Vec<f64> = v.u.iter().zip(&f0).map(|(u, f)| u + 2.0 * mu * f).collect();
        let fs = rhs_heat(&StateVector::new(0.0, pred), &spec, &g).unwrap();
        for i in 0..5 {
            let expect = v.u[i] + mu * (fs[i] + f0[i]);
            assert_abs_diff_eq!(next.u[i], expect, epsilon = 1e-16);
        }
        // leading order change at node 2 is 2 mu F_2
        let change = next.u[2] - v.u[2];
        assert!((change - 2.0 * mu * f0[2]).abs() < 1e-6 * change.abs());
    }

    #[test]
    fn wall_exit_is_a_rejection() {
        let spec = ProblemSpec::heat(1.0f64, 1.0, 1.0).unwrap();
        let g = build_grid(1.0, 3).unwrap();
        let v = StateVector::new(0.0, vec![0.01, 0.3, 0.5, 0.7, 0.8]);
        // huge step drives the left wall negative in the predictor
        assert!(matches!(
            step(&v, 1.0, &spec, &g),
            Err(QuenchError::SingularFlux { .. })
        ));
    }

    fn warm(hist: [&[f64]; 3], tau: f64, tau_min: f64, tau_max: f64) -> StepController<f64> {
        let mut c = StepController::new(StepMode::Adaptive, tau_min, tau_max);
        for d in hist {
            c.push_derivative(d);
        }
        c.record_step(tau);
        c.record_step(tau);
        c
    }

    #[test]
    fn adapt_tau_examples() {
        let same = [1.0, 2.0, 3.0];
        let c = warm([&same, &same, &same], 1e-4, 1e-9, 1e-2);
        assert_eq!(adapt_tau(&c), 1e-4);

        let c = warm([&[0.0, 0.0], &[1.0, 1.0], &[1.5, 1.6]], 1e-4, 1e-9, 1e-2);
        assert!(adapt_tau(&c) > 1e-4);

        let c = warm([&[0.0], &[3.0], &[1.0]], 1e-3, 1e-9, 10.0);
        assert_abs_diff_eq!(adapt_tau(&c), 5.000001f64.sqrt(), epsilon = 1e-15);
        let c = warm([&[0.0], &[3.0], &[1.0]], 1e-3, 1e-9, 1e-2);
        assert_eq!(adapt_tau(&c), 1e-2);

        // growing differences: non-positive radicand
        let c = warm([&[0.0], &[1.0], &[3.0]], 1e-3, 1e-9, 1e-2);
        assert_eq!(adapt_tau(&c), 1e-9);
    }

    #[test]
    fn adapt_tau_cold_or_fixed() {
        let mut c = StepController::new(StepMode::Adaptive, 1e-9, 1e-3);
        c.record_step(5e-4);
        c.push_derivative(&[1.0]);
        assert_eq!(adapt_tau(&c), 5e-4);
        let mut c = warm([&[0.0], &[3.0], &[1.0]], 1e-4, 1e-9, 1.0);
        c.mode = StepMode::Fixed;
        assert_eq!(adapt_tau(&c), 1e-4);
    }

    #[test]
    fn detect_quench_examples() {
        let s = |l: f64, r: f64| StateVector::new(0.0, vec![l, 0.5, r]);
        assert_eq!(detect_quench(&s(5e-5, 0.5), 1e-4), QuenchSide::Left);
        assert_eq!(detect_quench(&s(0.2, 0.99995), 1e-4), QuenchSide::Right);
        assert_eq!(detect_quench(&s(0.2, 0.8), 1e-4), QuenchSide::None);
        assert_eq!(detect_quench(&s(5e-5, 0.99999), 1e-4), QuenchSide::Right);
        assert_eq!(detect_quench(&s(1e-6, 0.99995), 1e-4), QuenchSide::Left);
    }

    fn small_cfg() -> ExperimentConfig<f64> {
        let (spec, ic) = example_a::<f64>();
        let mut cfg = ExperimentConfig::new(spec, ic, 15, 1e-6);
        cfg.tau_min = 1e-9;
        cfg
    }

    #[test]
    fn fixed_mode_truncated_run() {
        let mut cfg = small_cfg();
        cfg.mode = StepMode::Fixed;
        cfg.max_time = Some(1e-4);
        let (rec, rep) = run(&cfg).unwrap();
        assert_eq!(rec.termination, Termination::MaxTime);
        assert_eq!(rep.side, QuenchSide::None);
        assert_eq!(rec.step_count, 100);
        assert!(rec.samples[1..].iter().all(|s| s.tau == 1e-6));
        assert!(rec.samples.windows(2).all(|w| w[1].t > w[0].t));
    }

    #[test]
    fn max_steps_termination() {
        let mut cfg = small_cfg();
        cfg.max_steps = Some(7);
        let (rec, _) = run(&cfg).unwrap();
        assert_eq!(rec.termination, Termination::MaxSteps);
        assert_eq!(rec.step_count, 7);
        assert_eq!(rec.samples.len(), 8);
    }

    #[test]
    fn stride_keeps_full_tail() {
        let mut cfg = small_cfg();
        cfg.mode = StepMode::Fixed;
        cfg.max_steps = Some(1000);
        cfg.sample_stride = 100;
        cfg.tail_len = 20;
        let (rec, _) = run(&cfg).unwrap();
        // 0, 100, ..., 900 plus steps 981..=1000
        assert_eq!(rec.samples.len(), 10 + 20);
        assert!(rec.samples.windows(2).all(|w| w[1].t > w[0].t));
        assert_eq!(rec.samples.len(), rec.wall_rates.len());
    }

    #[test]
    fn coarse_example_a_quenches_right() {
        let (rec, rep) = run(&small_cfg()).unwrap();
        assert_eq!(rec.termination, Termination::Quenched);
        assert_eq!(rep.side, QuenchSide::Right);
        assert!(rep.wall_value_at_stop >= 1.0 - 1e-4);
        assert!(rec.monitor.strictly_monotone());
        assert_eq!(rec.monitor.uniform_rate_sign(), Some(1));
        assert!(rec.wall_rate_blows_up(Wall::Right));
    }

    #[test]
    fn f32_smoke() {
        let (spec, ic) = example_a::<f32>();
        let mut cfg = ExperimentConfig::new(spec, ic, 7, 1e-5f32);
        cfg.mode = StepMode::Fixed;
        cfg.max_steps = Some(20);
        let (rec, _) = run(&cfg).unwrap();
        assert_eq!(rec.step_count, 20);
        assert!(rec.final_state.right() > ic.eval(spec.a));
    }
}
