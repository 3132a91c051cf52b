//! Fixed-step closed-loop simulation of an arm under the reaching
//! controller.
//!
//! The controller runs once per step at `t_n`; its command is held while a
//! classical RK4 step advances the plant to `t_{n+1}`.

use nalgebra::{DVector, Vector3};

use crate::chain::ChainModel;
use crate::controller::{control_step, Compensation, ControlOutput, ControllerParams, ControllerState};
use crate::dynamics::forward_dynamics;
use crate::error::{check_len, Error, Result};
use crate::kinematics::JointState;
use crate::scalar::Real;

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_MAX_TIME: f64 = 10.0;
pub const DEFAULT_POSITION_TOL: f64 = 0.02;
pub const DEFAULT_SPEED_TOL: f64 = 0.01;
/// Keeps `h * (eta + mu * beta) / I` inside the RK4 stability region for
/// the lightest built-in joint at `dt = 1e-3`.
pub const DEFAULT_PLANT_SUBSTEPS: usize = 10;

/// Constant joint torque added to the plant while `t0 <= t < t1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Disturbance<T: Real> {
    /// 1-based joint index.
    pub joint: usize,
    pub torque: T,
    pub t0: T,
    pub t1: Option<T>,
}

impl<T: Real> Disturbance<T> {
    pub fn constant(joint: usize, torque: T) -> Self {
        Self {
            joint,
            torque,
            t0: T::zero(),
            t1: None,
        }
    }

    pub fn active(&self, t: T) -> bool {
        t >= self.t0 && self.t1.is_none_or(|t1| t < t1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig<T: Real> {
    pub dt: T,
    pub max_time: T,
    /// Starting joint angles; `None` uses the zero (home) configuration.
    pub initial_q: Option<DVector<T>>,
    pub stop_position_tol: T,
    pub stop_speed_tol: T,
    pub friction_on: bool,
    pub gravity_comp_on: bool,
    pub observer_on: bool,
    pub disturbances: Vec<Disturbance<T>>,
    /// Fractional mass and inertia error of the plant relative to the
    /// controller's model.
    pub mass_perturbation: T,
    /// RK4 sub-steps of the plant per control tick. The control torque is
    /// held across all of them.
    pub plant_substeps: usize,
}

impl<T: Real> Default for SimConfig<T> {
    fn default() -> Self {
        Self {
            dt: T::lit(DEFAULT_DT),
            max_time: T::lit(DEFAULT_MAX_TIME),
            initial_q: None,
            stop_position_tol: T::lit(DEFAULT_POSITION_TOL),
            stop_speed_tol: T::lit(DEFAULT_SPEED_TOL),
            friction_on: true,
            gravity_comp_on: true,
            observer_on: false,
            disturbances: Vec::new(),
            mass_perturbation: T::zero(),
            plant_substeps: DEFAULT_PLANT_SUBSTEPS,
        }
    }
}

impl<T: Real> SimConfig<T> {
    pub fn validate(&self, dof: usize) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.dt.f64() > 0.0) || !self.dt.finite() {
            return bad("dt must be positive");
        }
        if !(self.max_time >= self.dt) || !self.max_time.finite() {
            return bad("max_time must be at least dt");
        }
        if !(self.stop_position_tol.f64() > 0.0) || !(self.stop_speed_tol.f64() > 0.0) {
            return bad("stop tolerances must be positive");
        }
        if !(self.mass_perturbation.f64() > -1.0) {
            return bad("mass perturbation must exceed -1");
        }
        if self.plant_substeps == 0 {
            return bad("plant_substeps must be at least 1");
        }
        if let Some(q) = &self.initial_q {
            check_len("initial_q", dof, q.len())?;
        }
        for d in &self.disturbances {
            if d.joint == 0 || d.joint > dof {
                return Err(Error::InvalidParameter(format!(
                    "disturbance joint {} out of range 1..={dof}",
                    d.joint
                )));
            }
        }
        Ok(())
    }

    fn compensation(&self) -> Compensation {
        Compensation {
            feedforward: self.gravity_comp_on,
            friction: self.friction_on,
            observer: self.observer_on,
        }
    }
}

/// One logged sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRecord<T: Real> {
    pub t: T,
    pub q: DVector<T>,
    pub qdot: DVector<T>,
    pub x: Vector3<T>,
    pub xdot: Vector3<T>,
    pub dx_norm: T,
    pub speed: T,
    pub u_raw: DVector<T>,
    pub u_filtered: DVector<T>,
    pub d_hat: DVector<T>,
    pub kv_diag: DVector<T>,
    pub fmus_diag: DVector<T>,
}

impl<T: Real> SimRecord<T> {
    fn from_output(t: T, state: &JointState<T>, out: &ControlOutput<T>) -> Self {
        Self {
            t,
            q: state.q.clone(),
            qdot: state.qdot.clone(),
            x: out.position,
            xdot: out.velocity,
            dx_norm: out.dx_norm,
            speed: out.velocity.norm(),
            u_raw: out.u_raw.clone(),
            u_filtered: out.u_filtered.clone(),
            d_hat: out.disturbance_estimate.clone(),
            kv_diag: out.kv_diag.clone(),
            fmus_diag: out.fmus_diag.clone(),
        }
    }

    pub fn is_finite(&self) -> bool {
        let scalars = [self.t, self.dx_norm, self.speed];
        scalars.iter().all(|v| v.finite())
            && [&self.q, &self.qdot, &self.u_raw, &self.u_filtered, &self.d_hat, &self.kv_diag, &self.fmus_diag]
                .iter()
                .all(|v| v.iter().all(|x| x.finite()))
            && self.x.iter().chain(self.xdot.iter()).all(|v| v.finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Converged,
    Timeout,
    NumericalFailure { time: f64, message: String },
}

impl Termination {
    pub fn label(&self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::Timeout => "timeout",
            Termination::NumericalFailure { .. } => "numerical_failure",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimTrace<T: Real> {
    pub dof: usize,
    pub dt: T,
    pub records: Vec<SimRecord<T>>,
    pub termination: Termination,
}

impl<T: Real> SimTrace<T> {
    pub fn last(&self) -> &SimRecord<T> {
        self.records.last().expect("trace holds at least one record")
    }

    pub fn duration(&self) -> T {
        self.last().t
    }
}

/// Result of advancing the simulation by one tick.
#[derive(Debug, Clone)]
pub enum StepOutcome<T: Real> {
    /// State advanced to the next sample.
    Advanced(SimRecord<T>),
    /// Run finished at this sample; no integration was performed.
    Finished(SimRecord<T>, Termination),
}

/// A closed-loop simulation instance. Sequential; not shared between
/// threads while running.
#[derive(Debug, Clone)]
pub struct Simulation<T: Real> {
    plant: ChainModel<T>,
    model: ChainModel<T>,
    params: ControllerParams<T>,
    config: SimConfig<T>,
    controller: ControllerState<T>,
    state: JointState<T>,
    step_index: usize,
}

impl<T: Real> Simulation<T> {
    pub fn new(chain: &ChainModel<T>, params: &ControllerParams<T>, config: &SimConfig<T>) -> Result<Self> {
        let n = chain.dof();
        config.validate(n)?;
        params.validate()?;
        check_len("controller gains", n, params.dof())?;
        let plant = if config.mass_perturbation == T::zero() {
            chain.clone()
        } else {
            chain.with_mass_perturbation(config.mass_perturbation)?
        };
        let q = config.initial_q.clone().unwrap_or_else(|| DVector::zeros(n));
        let state = JointState::at_rest(q);
        state.check(chain)?;
        Ok(Self {
            plant,
            model: chain.clone(),
            params: params.clone(),
            config: config.clone(),
            controller: ControllerState::new(n),
            state,
            step_index: 0,
        })
    }

    pub fn time(&self) -> T {
        T::from_usize(self.step_index).expect("step count fits scalar") * self.config.dt
    }

    pub fn state(&self) -> &JointState<T> {
        &self.state
    }

    pub fn controller(&self) -> &ControllerState<T> {
        &self.controller
    }

    pub fn plant(&self) -> &ChainModel<T> {
        &self.plant
    }

    fn disturbance_at(&self, t: T) -> DVector<T> {
        let mut d = DVector::zeros(self.plant.dof());
        for dist in self.config.disturbances.iter().filter(|d| d.active(t)) {
            d[dist.joint - 1] += dist.torque;
        }
        d
    }

    fn integrate(&self, t: T, torque: &DVector<T>) -> Result<JointState<T>> {
        let m = self.config.plant_substeps;
        let h = self.config.dt / T::from_usize(m).expect("substep count fits scalar");
        let mut state = self.state.clone();
        for i in 0..m {
            let ti = t + h * T::from_usize(i).expect("substep index fits scalar");
            state = rk4_step(&self.plant, &state, torque, |s| self.disturbance_at(s), ti, h, self.config.friction_on)?;
        }
        Ok(state)
    }

    /// Runs the controller at the current sample, logs it, checks the stop
    /// conditions and, unless finished, integrates one step.
    pub fn step(&mut self) -> Result<StepOutcome<T>> {
        let t = self.time();
        let out = control_step(
            &self.model,
            &self.params,
            &mut self.controller,
            &self.state,
            self.config.dt,
            self.config.compensation(),
            self.config.stop_position_tol,
        )?;
        let record = SimRecord::from_output(t, &self.state, &out);
        if !record.is_finite() {
            return Ok(StepOutcome::Finished(
                record,
                Termination::NumericalFailure {
                    time: t.f64(),
                    message: "non-finite controller output".into(),
                },
            ));
        }
        if record.dx_norm < self.config.stop_position_tol && record.speed < self.config.stop_speed_tol {
            return Ok(StepOutcome::Finished(record, Termination::Converged));
        }
        // Half a step of slack absorbs rounding in `n * dt`.
        if t + self.config.dt * T::lit(0.5) > self.config.max_time {
            return Ok(StepOutcome::Finished(record, Termination::Timeout));
        }
        let next = match self.integrate(t, &out.command) {
            Ok(s) => s,
            Err(e) => {
                return Ok(StepOutcome::Finished(
                    record,
                    Termination::NumericalFailure {
                        time: t.f64(),
                        message: e.to_string(),
                    },
                ))
            }
        };
        if !next.q.iter().chain(next.qdot.iter()).all(|v| v.finite()) {
            return Ok(StepOutcome::Finished(
                record,
                Termination::NumericalFailure {
                    time: t.f64(),
                    message: format!("state became non-finite; last q = {:?}", self.state.q.as_slice()),
                },
            ));
        }
        self.state = next;
        self.step_index += 1;
        Ok(StepOutcome::Advanced(record))
    }
}

/// One classical RK4 step of the plant with `torque` held constant and the
/// external disturbance sampled at each stage time.
pub fn rk4_step<T: Real>(
    plant: &ChainModel<T>,
    state: &JointState<T>,
    torque: &DVector<T>,
    disturbance: impl Fn(T) -> DVector<T>,
    t: T,
    dt: T,
    friction_on: bool,
) -> Result<JointState<T>> {
    let accel = |q: &DVector<T>, qdot: &DVector<T>, t: T| {
        let s = JointState::new(q.clone(), qdot.clone());
        forward_dynamics(plant, &s, torque, &disturbance(t), friction_on)
    };
    let h = dt;
    let half = h * T::lit(0.5);
    let q0 = &state.q;
    let v0 = &state.qdot;

    let a1 = accel(q0, v0, t)?;
    let q2 = q0 + v0 * half;
    let v2 = v0 + &a1 * half;
    let a2 = accel(&q2, &v2, t + half)?;
    let q3 = q0 + &v2 * half;
    let v3 = v0 + &a2 * half;
    let a3 = accel(&q3, &v3, t + half)?;
    let q4 = q0 + &v3 * h;
    let v4 = v0 + &a3 * h;
    let a4 = accel(&q4, &v4, t + h)?;

    let sixth = h / T::lit(6.0);
    let two = T::lit(2.0);
    let q = q0 + (v0 + &v2 * two + &v3 * two + &v4) * sixth;
    let qdot = v0 + (&a1 + &a2 * two + &a3 * two + &a4) * sixth;
    let mut next = JointState::new(q, qdot);
    next.qddot = a1;
    Ok(next)
}

/// Runs a full closed-loop simulation until convergence, timeout or failure.
pub fn run<T: Real>(chain: &ChainModel<T>, params: &ControllerParams<T>, config: &SimConfig<T>) -> Result<SimTrace<T>> {
    let mut sim = Simulation::new(chain, params, config)?;
    let mut records = Vec::new();
    loop {
        match sim.step()? {
            StepOutcome::Advanced(r) => records.push(r),
            StepOutcome::Finished(r, termination) => {
                records.push(r);
                return Ok(SimTrace {
                    dof: chain.dof(),
                    dt: config.dt,
                    records,
                    termination,
                });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::canonical_7dof;

    #[test]
    fn config_validation() {
        let mut c = SimConfig::<f64>::default();
        assert!(c.validate(7).is_ok());
        c.dt = 0.0;
        assert!(c.validate(7).is_err());
        let mut c = SimConfig::<f64>::default();
        c.disturbances.push(Disturbance::constant(8, 1.0));
        assert!(c.validate(7).is_err());
        let c = SimConfig::<f64> {
            initial_q: Some(DVector::zeros(3)),
            ..Default::default()
        };
        assert!(c.validate(7).is_err());
    }

    #[test]
    fn disturbance_window() {
        let d = Disturbance { joint: 1, torque: 1.0, t0: 0.5, t1: Some(1.0) };
        assert!(!d.active(0.4));
        assert!(d.active(0.5));
        assert!(!d.active(1.0));
    }

    #[test]
    fn start_at_target_converges_immediately() {
        let chain = canonical_7dof::<f64>();
        let mut params = ControllerParams::published();
        params.target = Vector3::new(0.085, 0.0, -0.5585);
        let trace = run(&chain, &params, &SimConfig::default()).unwrap();
        assert_eq!(trace.termination, Termination::Converged);
        assert!(trace.duration() < 5e-3);
    }

    #[test]
    fn first_record_has_boundary_gains() {
        let chain = canonical_7dof::<f64>();
        let params = ControllerParams::published();
        let mut sim = Simulation::new(&chain, &params, &SimConfig::default()).unwrap();
        let StepOutcome::Advanced(r) = sim.step().unwrap() else {
            panic!("first step should advance");
        };
        assert_eq!(r.t, 0.0);
        assert_eq!(r.kv_diag, DVector::zeros(7));
        assert_eq!(r.fmus_diag, params.stiffness);
    }

    #[test]
    fn forced_timeout() {
        let chain = canonical_7dof::<f64>();
        let cfg = SimConfig { max_time: 1e-3, ..SimConfig::default() };
        let trace = run(&chain, &ControllerParams::published(), &cfg).unwrap();
        assert_eq!(trace.termination, Termination::Timeout);
        assert_eq!(trace.records.len(), 2);
    }
}
