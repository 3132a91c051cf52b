//! Forward kinematics, the geometric Jacobian and its time derivative.

use nalgebra::{DVector, Matrix3, Matrix6xX, Rotation3, Unit, Vector3};

use crate::chain::ChainModel;
use crate::error::{check_len, Error, Result};
use crate::scalar::Real;

/// Joint positions, velocities and accelerations at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState<T: Real> {
    pub q: DVector<T>,
    pub qdot: DVector<T>,
    pub qddot: DVector<T>,
}

impl<T: Real> JointState<T> {
    pub fn new(q: DVector<T>, qdot: DVector<T>) -> Self {
        let n = q.len();
        Self {
            q,
            qdot,
            qddot: DVector::zeros(n),
        }
    }

    pub fn at_rest(q: DVector<T>) -> Self {
        let n = q.len();
        Self::new(q, DVector::zeros(n))
    }

    pub fn dof(&self) -> usize {
        self.q.len()
    }

    pub fn check(&self, chain: &ChainModel<T>) -> Result<()> {
        let n = chain.dof();
        check_len("q", n, self.q.len())?;
        check_len("qdot", n, self.qdot.len())?;
        check_len("qddot", n, self.qddot.len())?;
        let finite = self
            .q
            .iter()
            .chain(self.qdot.iter())
            .chain(self.qddot.iter())
            .all(|v| v.finite());
        if finite {
            Ok(())
        } else {
            Err(Error::NonFinite("joint state"))
        }
    }
}

/// Poses of every link frame for one configuration.
#[derive(Debug, Clone)]
pub struct FrameSet<T: Real> {
    /// `R_0 ..= R_N`, base-frame orientations.
    pub rotations: Vec<Matrix3<T>>,
    /// `O_0 ..= O_N`, base-frame origins.
    pub origins: Vec<Vector3<T>>,
    /// World-frame joint axes `e_1 ..= e_N` (index 0 is joint 1).
    pub axes: Vec<Vector3<T>>,
    /// End-effector position `O_N`.
    pub position: Vector3<T>,
    /// `p_i = x - O_{i-1}` for each joint.
    pub lever_arms: Vec<Vector3<T>>,
}

impl<T: Real> FrameSet<T> {
    pub fn end_effector_rotation(&self) -> &Matrix3<T> {
        self.rotations.last().expect("at least the base frame")
    }
}

/// Geometric Jacobian (angular rows 0..3 above linear rows 3..6) and its
/// time derivative. Column `i` is `[e_i; e_i x p_i]`.
#[derive(Debug, Clone)]
pub struct JacobianPair<T: Real> {
    pub j: Matrix6xX<T>,
    pub jdot: Matrix6xX<T>,
}

impl<T: Real> JacobianPair<T> {
    /// The 3×N linear-velocity block.
    pub fn linear(&self) -> nalgebra::DMatrix<T> {
        self.j.rows(3, 3).into_owned()
    }

    pub fn angular(&self) -> nalgebra::DMatrix<T> {
        self.j.rows(0, 3).into_owned()
    }

    pub fn linear_dot(&self) -> nalgebra::DMatrix<T> {
        self.jdot.rows(3, 3).into_owned()
    }
}

pub(crate) fn joint_rotation<T: Real>(axis: &Vector3<T>, angle: T) -> Matrix3<T> {
    Rotation3::from_axis_angle(&Unit::new_unchecked(*axis), angle).into_inner()
}

/// Link poses from joint positions alone.
pub fn frames<T: Real>(chain: &ChainModel<T>, q: &DVector<T>) -> Result<FrameSet<T>> {
    let n = chain.dof();
    check_len("q", n, q.len())?;
    if !q.iter().all(|v| v.finite()) {
        return Err(Error::NonFinite("q"));
    }
    let mut rotations = Vec::with_capacity(n + 1);
    let mut origins = Vec::with_capacity(n + 1);
    let mut axes = Vec::with_capacity(n);
    rotations.push(Matrix3::identity());
    origins.push(Vector3::zeros());
    for (i, link) in chain.links().iter().enumerate() {
        let parent = rotations[i];
        axes.push(parent * link.axis);
        let r = parent * joint_rotation(&link.axis, q[i]);
        origins.push(origins[i] + r * link.offset);
        rotations.push(r);
    }
    let position = origins[n];
    let lever_arms = origins[..n].iter().map(|o| position - o).collect();
    Ok(FrameSet {
        rotations,
        origins,
        axes,
        position,
        lever_arms,
    })
}

pub fn forward_kinematics<T: Real>(
    chain: &ChainModel<T>,
    state: &JointState<T>,
) -> Result<FrameSet<T>> {
    state.check(chain)?;
    frames(chain, &state.q)
}

/// Jacobian from an already computed frame set.
pub fn jacobian_from_frames<T: Real>(fs: &FrameSet<T>, qdot: &DVector<T>) -> JacobianPair<T> {
    let n = fs.axes.len();
    let mut j = Matrix6xX::zeros(n);
    let mut jdot = Matrix6xX::zeros(n);

    // omega[k]: angular velocity of frame k; vel[k]: velocity of O_k.
    let mut omega = vec![Vector3::zeros(); n + 1];
    let mut vel = vec![Vector3::zeros(); n + 1];
    for k in 1..=n {
        omega[k] = omega[k - 1] + fs.axes[k - 1] * qdot[k - 1];
        vel[k] = vel[k - 1] + omega[k].cross(&(fs.origins[k] - fs.origins[k - 1]));
    }
    let xdot = vel[n];

    for i in 0..n {
        let e = fs.axes[i];
        let p = fs.lever_arms[i];
        let edot = omega[i].cross(&e);
        let pdot = xdot - vel[i];
        j.fixed_view_mut::<3, 1>(0, i).copy_from(&e);
        j.fixed_view_mut::<3, 1>(3, i).copy_from(&e.cross(&p));
        jdot.fixed_view_mut::<3, 1>(0, i).copy_from(&edot);
        jdot.fixed_view_mut::<3, 1>(3, i)
            .copy_from(&(edot.cross(&p) + e.cross(&pdot)));
    }
    JacobianPair { j, jdot }
}

pub fn jacobian<T: Real>(chain: &ChainModel<T>, state: &JointState<T>) -> Result<JacobianPair<T>> {
    let fs = forward_kinematics(chain, state)?;
    Ok(jacobian_from_frames(&fs, &state.qdot))
}

/// End-effector linear velocity `J_lin * qdot`.
pub fn end_effector_velocity<T: Real>(jac: &JacobianPair<T>, qdot: &DVector<T>) -> Vector3<T> {
    let v = jac.j.rows(3, 3) * qdot;
    Vector3::new(v[0], v[1], v[2])
}
