//! Human-like reaching control law.
//!
//! The actuator command is built from a virtual spring pulling the
//! end-effector to the target, scaled per joint by a muscle map that fades
//! out as the target approaches, plus joint damping that fades in over the
//! same progress variable. The sum passes through a bank of first-order
//! low-pass filters. Optional nominal-model feedforward (gravity and
//! friction) and a momentum disturbance observer act at the plant input.

use nalgebra::{DMatrix, DVector, Vector3};

use crate::chain::ChainModel;
use crate::dynamics::{coriolis_matrix, friction_torque, gravity_vector, mass_matrix};
use crate::error::{check_len, Error, Result};
use crate::kinematics::{end_effector_velocity, frames, jacobian_from_frames, JacobianPair, JointState};
use crate::scalar::Real;

/// Damping weights of the reference profile (N·m·s/rad).
pub const PUBLISHED_DAMPING: [f64; 7] = [20.0, 10.0, 20.0, 10.0, 10.0, 10.0, 0.1];
/// Muscle stiffness coefficients of the reference profile.
pub const PUBLISHED_STIFFNESS: [f64; 7] = [180.0, 40.0, 10.0, 20.0, 1.0, 1.0, 1.0];
/// Filter time constant shared by every joint (s).
pub const PUBLISHED_TAU: f64 = 0.015;
/// Virtual spring stiffness (N/m).
pub const REFERENCE_SPRING: f64 = 13.0;
/// Reaching target of the reference scenario (m).
pub const REFERENCE_TARGET: [f64; 3] = [0.3, 0.3, -0.3];
pub const DEFAULT_OBSERVER_CUTOFF: f64 = 50.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ObserverParams<T: Real> {
    pub enabled: bool,
    /// Observer bandwidth (rad/s).
    pub cutoff: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerParams<T: Real> {
    /// Damping weights `C_i`.
    pub damping: DVector<T>,
    /// Muscle stiffness coefficients `f_i`.
    pub stiffness: DVector<T>,
    /// Filter time constants `tau_i`.
    pub tau: DVector<T>,
    /// Virtual spring stiffness `k`.
    pub spring: T,
    pub target: Vector3<T>,
    pub observer: ObserverParams<T>,
}

impl<T: Real> ControllerParams<T> {
    pub fn dof(&self) -> usize {
        self.damping.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.damping.len();
        check_len("f", n, self.stiffness.len())?;
        check_len("tau", n, self.tau.len())?;
        let bad = |m: String| Err(Error::InvalidParameter(m));
        for i in 0..n {
            if !(self.damping[i].f64() >= 0.0) {
                return bad(format!("C[{}] must be non-negative", i + 1));
            }
            if !(self.stiffness[i].f64() >= 0.0) {
                return bad(format!("f[{}] must be non-negative", i + 1));
            }
            if !(self.tau[i].f64() > 0.0) || !self.tau[i].finite() {
                return bad(format!("tau[{}] must be positive", i + 1));
            }
        }
        if !(self.spring.f64() > 0.0) || !self.spring.finite() {
            return bad("k must be positive".into());
        }
        if !self.target.iter().all(|v| v.finite()) {
            return bad("target must be finite".into());
        }
        if !(self.observer.cutoff.f64() > 0.0) {
            return bad("observer cutoff must be positive".into());
        }
        Ok(())
    }

    /// Reference gains for the built-in seven-joint arm.
    pub fn published() -> Self {
        let v = |a: &[f64]| DVector::from_iterator(a.len(), a.iter().map(|&x| T::lit(x)));
        Self {
            damping: v(&PUBLISHED_DAMPING),
            stiffness: v(&PUBLISHED_STIFFNESS),
            tau: DVector::from_element(7, T::lit(PUBLISHED_TAU)),
            spring: T::lit(REFERENCE_SPRING),
            target: Vector3::from_iterator(REFERENCE_TARGET.iter().map(|&x| T::lit(x))),
            observer: ObserverParams {
                enabled: false,
                cutoff: T::lit(DEFAULT_OBSERVER_CUTOFF),
            },
        }
    }

    pub fn cast<U: Real>(&self) -> ControllerParams<U> {
        let c = |v: T| U::lit(v.f64());
        ControllerParams {
            damping: self.damping.map(c),
            stiffness: self.stiffness.map(c),
            tau: self.tau.map(c),
            spring: c(self.spring),
            target: self.target.map(c),
            observer: ObserverParams {
                enabled: self.observer.enabled,
                cutoff: c(self.observer.cutoff),
            },
        }
    }
}

/// Progress phase `pi (|dx0| - |dx|) / (2 |dx0|)`, clamped to `[0, pi/2]`.
pub fn phase<T: Real>(dx_norm: T, dx0_norm: T) -> Result<T> {
    if !(dx0_norm.f64() > 0.0) || !dx0_norm.finite() {
        return Err(Error::Uninitialized);
    }
    let dx = nalgebra::clamp(dx_norm, T::zero(), dx0_norm);
    let raw = T::pi() * (dx0_norm - dx) / (T::lit(2.0) * dx0_norm);
    Ok(nalgebra::clamp(raw, T::zero(), T::frac_pi_2()))
}

/// `(sin, cos)` of the phase, exact at both ends of the motion.
fn phase_sin_cos<T: Real>(dx_norm: T, dx0_norm: T) -> Result<(T, T)> {
    let p = phase(dx_norm, dx0_norm)?;
    Ok(if p == T::zero() {
        (T::zero(), T::one())
    } else if p == T::frac_pi_2() {
        (T::one(), T::zero())
    } else {
        p.sin_cos()
    })
}

/// Diagonal of the damping shaping matrix, `C_i sin(phase)`.
pub fn damping_diag<T: Real>(params: &ControllerParams<T>, dx_norm: T, dx0_norm: T) -> Result<DVector<T>> {
    let (s, _) = phase_sin_cos(dx_norm, dx0_norm)?;
    Ok(params.damping.map(|c| c * s))
}

/// Diagonal of the muscle mapping, `f_i cos(phase)`.
pub fn muscle_diag<T: Real>(params: &ControllerParams<T>, dx_norm: T, dx0_norm: T) -> Result<DVector<T>> {
    let (_, c) = phase_sin_cos(dx_norm, dx0_norm)?;
    Ok(params.stiffness.map(|f| f * c))
}

/// `-(K_V qdot + k F_mus J_lin^T dx)` for explicit gain diagonals.
pub fn raw_control_with_gains<T: Real>(
    kv: &DVector<T>,
    fmus: &DVector<T>,
    spring: T,
    qdot: &DVector<T>,
    j_lin: &DMatrix<T>,
    dx: &Vector3<T>,
) -> DVector<T> {
    let work = j_lin.transpose() * DVector::from_column_slice(dx.as_slice()) * spring;
    -(kv.component_mul(qdot) + fmus.component_mul(&work))
}

/// Pre-filter control torques at the current state.
pub fn raw_control<T: Real>(
    params: &ControllerParams<T>,
    state: &ControllerState<T>,
    qdot: &DVector<T>,
    jac: &JacobianPair<T>,
    x: &Vector3<T>,
) -> Result<DVector<T>> {
    let n = params.dof();
    check_len("qdot", n, qdot.len())?;
    check_len("jacobian columns", n, jac.j.ncols())?;
    let dx = x - params.target;
    let (kv, fmus) = state.gains(params, dx.norm())?;
    Ok(raw_control_with_gains(&kv, &fmus, params.spring, qdot, &jac.linear(), &dx))
}

/// Exact zero-order-hold update of first-order low-pass filters; returns
/// the new outputs.
pub fn lpf_step<T: Real>(
    outputs: &mut DVector<T>,
    input: &DVector<T>,
    dt: T,
    tau: &DVector<T>,
) -> DVector<T> {
    for i in 0..outputs.len() {
        let alpha = T::one() - (-dt / tau[i]).exp();
        let y = outputs[i];
        outputs[i] = y + alpha * (input[i] - y);
    }
    outputs.clone()
}

/// Generalized-momentum disturbance observer.
///
/// With `p = M(q) qdot`, the estimate is
/// `d = K (p - p0 - integral(u + C^T qdot - G - Fr + d) dt)`, which follows
/// the lumped joint disturbance through a first-order lag of bandwidth `K`.
#[derive(Debug, Clone)]
pub struct MomentumObserver<T: Real> {
    initial_momentum: Option<DVector<T>>,
    integral: DVector<T>,
    previous_model: DVector<T>,
    estimate: DVector<T>,
}

impl<T: Real> MomentumObserver<T> {
    pub fn new(dof: usize) -> Self {
        Self {
            initial_momentum: None,
            integral: DVector::zeros(dof),
            previous_model: DVector::zeros(dof),
            estimate: DVector::zeros(dof),
        }
    }

    pub fn estimate(&self) -> &DVector<T> {
        &self.estimate
    }

    pub fn reset(&mut self) {
        *self = Self::new(self.estimate.len());
    }

    /// Advances the observer to the sample `(q, qdot)`. `u_applied` is the
    /// torque that was held on the plant since the previous sample.
    #[allow(clippy::too_many_arguments)]
    pub fn step(
        &mut self,
        chain: &ChainModel<T>,
        q: &DVector<T>,
        qdot: &DVector<T>,
        u_applied: &DVector<T>,
        dt: T,
        cutoff: T,
        friction_on: bool,
        enabled: bool,
    ) -> Result<DVector<T>> {
        let n = chain.dof();
        check_len("u_applied", n, u_applied.len())?;
        if !enabled {
            self.reset();
            return Ok(self.estimate.clone());
        }
        let m = mass_matrix(chain, q)?;
        let c = coriolis_matrix(chain, q, qdot)?;
        let mut model = c.transpose() * qdot - gravity_vector(chain, q)?;
        if friction_on {
            model -= friction_torque(chain, qdot)?;
        }
        let momentum = m * qdot;
        match &self.initial_momentum {
            None => {
                self.initial_momentum = Some(momentum);
                self.previous_model = model;
            }
            Some(p0) => {
                let half = T::lit(0.5);
                self.integral += (u_applied + &self.estimate) * dt
                    + (&self.previous_model + &model) * (half * dt);
                self.estimate = (momentum - p0 - &self.integral) * cutoff;
                self.previous_model = model;
            }
        }
        Ok(self.estimate.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReachMode {
    /// Normal operation: gains follow the progress phase.
    Reaching,
    /// Start point already within tolerance of the target; phase pinned at
    /// `pi/2` (full damping, no spring).
    Holding,
}

#[derive(Debug, Clone)]
pub struct ControllerState<T: Real> {
    pub dx0_norm: Option<T>,
    pub mode: ReachMode,
    pub filter_outputs: DVector<T>,
    pub observer: MomentumObserver<T>,
    pub disturbance_estimate: DVector<T>,
    last_command: DVector<T>,
}

impl<T: Real> ControllerState<T> {
    pub fn new(dof: usize) -> Self {
        Self {
            dx0_norm: None,
            mode: ReachMode::Reaching,
            filter_outputs: DVector::zeros(dof),
            observer: MomentumObserver::new(dof),
            disturbance_estimate: DVector::zeros(dof),
            last_command: DVector::zeros(dof),
        }
    }

    /// Captures the initial distance to the target. Distances below
    /// `hold_tolerance` switch the controller to [`ReachMode::Holding`].
    pub fn initialize(&mut self, dx0_norm: T, hold_tolerance: T) {
        self.dx0_norm = Some(dx0_norm);
        self.mode = if dx0_norm < hold_tolerance || !(dx0_norm.f64() > 0.0) {
            ReachMode::Holding
        } else {
            ReachMode::Reaching
        };
    }

    pub fn is_initialized(&self) -> bool {
        self.dx0_norm.is_some()
    }

    /// `(K_V, F_mus)` diagonals for the current distance.
    pub fn gains(&self, params: &ControllerParams<T>, dx_norm: T) -> Result<(DVector<T>, DVector<T>)> {
        let dx0 = self.dx0_norm.ok_or(Error::Uninitialized)?;
        match self.mode {
            ReachMode::Reaching => Ok((
                damping_diag(params, dx_norm, dx0)?,
                muscle_diag(params, dx_norm, dx0)?,
            )),
            ReachMode::Holding => Ok((
                params.damping.clone(),
                DVector::zeros(params.dof()),
            )),
        }
    }

    pub fn last_command(&self) -> &DVector<T> {
        &self.last_command
    }
}

/// Switches that decide which nominal-model terms the controller adds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Compensation {
    /// Add `G(q) + Fr(qdot)` of the nominal model to the command.
    pub feedforward: bool,
    /// Whether the nominal model includes joint friction.
    pub friction: bool,
    pub observer: bool,
}

impl Default for Compensation {
    fn default() -> Self {
        Self {
            feedforward: true,
            friction: true,
            observer: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ControlOutput<T: Real> {
    /// Low-pass filtered control law.
    pub u_filtered: DVector<T>,
    /// Control law before filtering.
    pub u_raw: DVector<T>,
    pub kv_diag: DVector<T>,
    pub fmus_diag: DVector<T>,
    pub disturbance_estimate: DVector<T>,
    /// Nominal gravity and friction torques added to the command.
    pub feedforward: DVector<T>,
    /// Torque sent to the actuators.
    pub command: DVector<T>,
    pub position: Vector3<T>,
    pub velocity: Vector3<T>,
    pub dx_norm: T,
}

/// One controller tick: kinematics, control law, filter, compensation.
///
/// `hold_tolerance` is only used on the first call, when the initial
/// distance to the target is captured.
pub fn control_step<T: Real>(
    chain: &ChainModel<T>,
    params: &ControllerParams<T>,
    state: &mut ControllerState<T>,
    joint: &JointState<T>,
    dt: T,
    compensation: Compensation,
    hold_tolerance: T,
) -> Result<ControlOutput<T>> {
    joint.check(chain)?;
    check_len("controller gains", chain.dof(), params.dof())?;
    let fs = frames(chain, &joint.q)?;
    let jac = jacobian_from_frames(&fs, &joint.qdot);
    let x = fs.position;
    let dx_norm = (x - params.target).norm();
    if !state.is_initialized() {
        state.initialize(dx_norm, hold_tolerance);
    }
    let (kv, fmus) = state.gains(params, dx_norm)?;
    let u_raw = raw_control_with_gains(
        &kv,
        &fmus,
        params.spring,
        &joint.qdot,
        &jac.linear(),
        &(x - params.target),
    );
    let u_filtered = lpf_step(&mut state.filter_outputs, &u_raw, dt, &params.tau);

    let previous = state.last_command.clone();
    let d_hat = state.observer.step(
        chain,
        &joint.q,
        &joint.qdot,
        &previous,
        dt,
        params.observer.cutoff,
        compensation.friction,
        compensation.observer,
    )?;
    state.disturbance_estimate = d_hat.clone();

    let feedforward = if compensation.feedforward {
        let mut ff = gravity_vector(chain, &joint.q)?;
        if compensation.friction {
            ff += friction_torque(chain, &joint.qdot)?;
        }
        ff
    } else {
        DVector::zeros(chain.dof())
    };
    let command = &u_filtered + &feedforward - &d_hat;
    state.last_command = command.clone();

    Ok(ControlOutput {
        velocity: end_effector_velocity(&jac, &joint.qdot),
        u_filtered,
        u_raw,
        kv_diag: kv,
        fmus_diag: fmus,
        disturbance_estimate: d_hat,
        feedforward,
        command,
        position: x,
        dx_norm,
    })
}
