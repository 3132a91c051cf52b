//! Inverse dynamics by a Newton–Euler recursion with an auxiliary velocity
//! slot, and the joint-space model terms extracted from it.
//!
//! All recursion quantities are expressed in the base frame. The auxiliary
//! velocity `qdot_aux` enters every velocity product linearly, so probing it
//! with unit vectors yields a Coriolis matrix `C(q, qdot)` for which
//! `Mdot - 2C` is skew-symmetric.

use nalgebra::{Cholesky, DMatrix, DVector, Matrix3, SymmetricEigen, Vector3};

use crate::chain::ChainModel;
use crate::error::{check_len, Error, Result};
use crate::kinematics::{frames, FrameSet, JointState};
use crate::scalar::Real;

/// Per-link scratch filled by one recursion.
#[derive(Debug, Clone)]
pub struct RecursionState<T: Real> {
    pub omega: Vec<Vector3<T>>,
    pub omega_aux: Vec<Vector3<T>>,
    pub omega_dot: Vec<Vector3<T>>,
    /// Acceleration of each frame origin `O_i`.
    pub origin_acc: Vec<Vector3<T>>,
    /// Acceleration of each link's center of mass.
    pub com_acc: Vec<Vector3<T>>,
    /// Force exerted on link `i` by link `i-1`.
    pub force: Vec<Vector3<T>>,
    /// Moment about `O_{i-1}` exerted on link `i` by link `i-1`.
    pub torque: Vec<Vector3<T>>,
}

/// `M`, `C`, `G` and friction evaluated at one state.
#[derive(Debug, Clone)]
pub struct DynamicsTerms<T: Real> {
    pub mass: DMatrix<T>,
    pub coriolis: DMatrix<T>,
    pub gravity: DVector<T>,
    pub friction: DVector<T>,
}

impl<T: Real> DynamicsTerms<T> {
    pub fn compute(chain: &ChainModel<T>, state: &JointState<T>) -> Result<Self> {
        state.check(chain)?;
        Ok(Self {
            mass: mass_matrix(chain, &state.q)?,
            coriolis: coriolis_matrix(chain, &state.q, &state.qdot)?,
            gravity: gravity_vector(chain, &state.q)?,
            friction: friction_torque(chain, &state.qdot)?,
        })
    }
}

fn check_finite<T: Real>(what: &'static str, v: &DVector<T>) -> Result<()> {
    if v.iter().all(|x| x.finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Full recursion, returning the scratch state alongside the joint torques.
pub fn ne_alpha_detailed<T: Real>(
    chain: &ChainModel<T>,
    q: &DVector<T>,
    qdot: &DVector<T>,
    qdot_aux: &DVector<T>,
    qddot: &DVector<T>,
    gravity_on: bool,
) -> Result<(DVector<T>, RecursionState<T>)> {
    let n = chain.dof();
    check_len("qdot", n, qdot.len())?;
    check_len("qdot_aux", n, qdot_aux.len())?;
    check_len("qddot", n, qddot.len())?;
    check_finite("qdot", qdot)?;
    check_finite("qdot_aux", qdot_aux)?;
    check_finite("qddot", qddot)?;
    let fs = frames(chain, q)?;
    Ok(recurse(chain, &fs, qdot, qdot_aux, qddot, gravity_on))
}

/// Joint torques `u` for the supplied motion.
///
/// With `qdot_aux == qdot` this is ordinary inverse dynamics,
/// `u = M qddot + C qdot + G` (the last only when `gravity_on`).
pub fn ne_alpha<T: Real>(
    chain: &ChainModel<T>,
    q: &DVector<T>,
    qdot: &DVector<T>,
    qdot_aux: &DVector<T>,
    qddot: &DVector<T>,
    gravity_on: bool,
) -> Result<DVector<T>> {
    ne_alpha_detailed(chain, q, qdot, qdot_aux, qddot, gravity_on).map(|(u, _)| u)
}

/// Configuration-dependent lever arms and world-frame inertias, shared by
/// every recursion at one `q`.
struct Geometry<T: Real> {
    axes: Vec<Vector3<T>>,
    /// `O_i - O_{i-1}`.
    r_link: Vec<Vector3<T>>,
    /// COM of link `i` relative to `O_{i-1}`.
    r_com: Vec<Vector3<T>>,
    /// COM of link `i` relative to `O_i`.
    r_com_tip: Vec<Vector3<T>>,
    inertia: Vec<Matrix3<T>>,
}

impl<T: Real> Geometry<T> {
    fn new(chain: &ChainModel<T>, fs: &FrameSet<T>) -> Self {
        let n = chain.dof();
        let mut g = Self {
            axes: fs.axes.clone(),
            r_link: Vec::with_capacity(n),
            r_com: Vec::with_capacity(n),
            r_com_tip: Vec::with_capacity(n),
            inertia: Vec::with_capacity(n),
        };
        for (i, link) in chain.links().iter().enumerate() {
            let rot = fs.rotations[i + 1];
            let r_link = fs.origins[i + 1] - fs.origins[i];
            let r_com = rot * link.com;
            g.r_link.push(r_link);
            g.r_com.push(r_com);
            g.r_com_tip.push(r_com - r_link);
            g.inertia.push(rot * link.inertia * rot.transpose());
        }
        g
    }
}

impl<T: Real> RecursionState<T> {
    fn new(n: usize) -> Self {
        let zero = vec![Vector3::zeros(); n];
        Self {
            omega: zero.clone(),
            omega_aux: zero.clone(),
            omega_dot: zero.clone(),
            origin_acc: zero.clone(),
            com_acc: zero.clone(),
            force: zero.clone(),
            torque: zero,
        }
    }
}

pub(crate) fn recurse<T: Real>(
    chain: &ChainModel<T>,
    fs: &FrameSet<T>,
    qdot: &DVector<T>,
    qdot_aux: &DVector<T>,
    qddot: &DVector<T>,
    gravity_on: bool,
) -> (DVector<T>, RecursionState<T>) {
    let geo = Geometry::new(chain, fs);
    let mut st = RecursionState::new(chain.dof());
    let u = recurse_with(chain, &geo, qdot, qdot_aux, qddot, gravity_on, Some(&mut st));
    (u, st)
}

fn recurse_with<T: Real>(
    chain: &ChainModel<T>,
    geo: &Geometry<T>,
    qdot: &DVector<T>,
    qdot_aux: &DVector<T>,
    qddot: &DVector<T>,
    gravity_on: bool,
    mut detail: Option<&mut RecursionState<T>>,
) -> DVector<T> {
    let n = chain.dof();
    // (omega, omega_aux, omega_dot, com_acc) per link.
    let mut fwd = Vec::with_capacity(n);
    let mut w = Vector3::zeros();
    let mut wa = Vector3::zeros();
    let mut wd = Vector3::zeros();
    let mut acc = if gravity_on { -chain.gravity() } else { Vector3::zeros() };
    for i in 0..n {
        let z = geo.axes[i];
        let r_link = geo.r_link[i];
        let r_tip = geo.r_com_tip[i];

        // Velocity products pair the true velocity on the outside with the
        // auxiliary velocity on the inside.
        wd = wd + z * qddot[i] + wa.cross(&z) * qdot[i];
        w += z * qdot[i];
        wa += z * qdot_aux[i];
        acc = acc + wd.cross(&r_link) + w.cross(&wa.cross(&r_link));
        let com_acc = acc + wd.cross(&r_tip) + w.cross(&wa.cross(&r_tip));
        if let Some(st) = detail.as_deref_mut() {
            st.omega[i] = w;
            st.omega_aux[i] = wa;
            st.omega_dot[i] = wd;
            st.origin_acc[i] = acc;
            st.com_acc[i] = com_acc;
        }
        fwd.push((w, wa, wd, com_acc));
    }

    let mut u = DVector::zeros(n);
    let mut f_next = Vector3::zeros();
    let mut t_next = Vector3::zeros();
    for i in (0..n).rev() {
        let (w, wa, wd, com_acc) = fwd[i];
        let inertia = &geo.inertia[i];
        let f_in = com_acc * chain.link(i).mass;
        let f = f_next + f_in;
        let t = t_next
            + geo.r_link[i].cross(&f_next)
            + geo.r_com[i].cross(&f_in)
            + inertia * wd
            + wa.cross(&(inertia * w));
        if let Some(st) = detail.as_deref_mut() {
            st.force[i] = f;
            st.torque[i] = t;
        }
        u[i] = t.dot(&geo.axes[i]);
        f_next = f;
        t_next = t;
    }
    u
}

fn unit<T: Real>(n: usize, j: usize) -> DVector<T> {
    let mut v = DVector::zeros(n);
    v[j] = T::one();
    v
}

fn mass_from_geometry<T: Real>(chain: &ChainModel<T>, geo: &Geometry<T>) -> DMatrix<T> {
    let n = chain.dof();
    let z = DVector::zeros(n);
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        m.set_column(j, &recurse_with(chain, geo, &z, &z, &unit(n, j), false, None));
    }
    m
}

fn symmetrized<T: Real>(m: DMatrix<T>) -> Result<DMatrix<T>> {
    let asym = (&m - m.transpose()).amax().f64();
    let scale = m.amax().f64().max(1.0);
    // 1e-9 is the double-precision contract; narrower scalars get a few
    // hundred ulps instead.
    let tol = 1e-9f64.max(256.0 * T::default_epsilon().f64());
    if asym > tol * scale {
        return Err(Error::InvalidModel(format!(
            "inertia matrix asymmetry {asym:e} exceeds tolerance"
        )));
    }
    Ok((&m + m.transpose()) * T::lit(0.5))
}

/// Inertia matrix exactly as assembled from unit-acceleration probes,
/// before symmetrization.
pub fn mass_matrix_unsymmetrized<T: Real>(chain: &ChainModel<T>, q: &DVector<T>) -> Result<DMatrix<T>> {
    let fs = frames(chain, q)?;
    Ok(mass_from_geometry(chain, &Geometry::new(chain, &fs)))
}

pub fn mass_matrix<T: Real>(chain: &ChainModel<T>, q: &DVector<T>) -> Result<DMatrix<T>> {
    symmetrized(mass_matrix_unsymmetrized(chain, q)?)
}

pub fn coriolis_matrix<T: Real>(
    chain: &ChainModel<T>,
    q: &DVector<T>,
    qdot: &DVector<T>,
) -> Result<DMatrix<T>> {
    let n = chain.dof();
    check_len("qdot", n, qdot.len())?;
    check_finite("qdot", qdot)?;
    let fs = frames(chain, q)?;
    let geo = Geometry::new(chain, &fs);
    let z = DVector::zeros(n);
    let mut c = DMatrix::zeros(n, n);
    for j in 0..n {
        c.set_column(j, &recurse_with(chain, &geo, qdot, &unit(n, j), &z, false, None));
    }
    Ok(c)
}

pub fn gravity_vector<T: Real>(chain: &ChainModel<T>, q: &DVector<T>) -> Result<DVector<T>> {
    let n = chain.dof();
    let fs = frames(chain, q)?;
    let z = DVector::zeros(n);
    Ok(recurse_with(chain, &Geometry::new(chain, &fs), &z, &z, &z, true, None))
}

/// `C(q, qdot) qdot + G(q)` in a single recursion.
pub fn bias_torque<T: Real>(
    chain: &ChainModel<T>,
    q: &DVector<T>,
    qdot: &DVector<T>,
) -> Result<DVector<T>> {
    let z = DVector::zeros(chain.dof());
    ne_alpha(chain, q, qdot, qdot, &z, true)
}

/// Smooth viscous plus Coulomb friction, `eta * qdot + mu * tanh(beta * qdot)`.
pub fn friction_torque<T: Real>(chain: &ChainModel<T>, qdot: &DVector<T>) -> Result<DVector<T>> {
    check_len("qdot", chain.dof(), qdot.len())?;
    Ok(DVector::from_iterator(
        qdot.len(),
        chain
            .links()
            .iter()
            .zip(qdot.iter())
            .map(|(l, &v)| l.viscous * v + l.coulomb * (l.slope * v).tanh()),
    ))
}

/// Total potential energy of the chain in its gravity field.
pub fn potential_energy<T: Real>(chain: &ChainModel<T>, q: &DVector<T>) -> Result<T> {
    let fs = frames(chain, q)?;
    let mut v = T::zero();
    for (i, link) in chain.links().iter().enumerate() {
        let com = fs.origins[i] + fs.rotations[i + 1] * link.com;
        v -= chain.gravity().dot(&com) * link.mass;
    }
    Ok(v)
}

pub fn kinetic_energy<T: Real>(chain: &ChainModel<T>, state: &JointState<T>) -> Result<T> {
    let m = mass_matrix(chain, &state.q)?;
    check_len("qdot", chain.dof(), state.qdot.len())?;
    Ok((state.qdot.transpose() * m * &state.qdot)[0] * T::lit(0.5))
}

/// Joint accelerations solving `M qddot = u + d - C qdot - G - Fr`.
pub fn forward_dynamics<T: Real>(
    chain: &ChainModel<T>,
    state: &JointState<T>,
    applied_torque: &DVector<T>,
    disturbance: &DVector<T>,
    friction_on: bool,
) -> Result<DVector<T>> {
    let n = chain.dof();
    check_len("q", n, state.q.len())?;
    check_len("qdot", n, state.qdot.len())?;
    check_len("applied torque", n, applied_torque.len())?;
    check_len("disturbance", n, disturbance.len())?;
    check_finite("applied torque", applied_torque)?;
    check_finite("disturbance", disturbance)?;

    let fs = frames(chain, &state.q)?;
    check_finite("qdot", &state.qdot)?;
    let geo = Geometry::new(chain, &fs);
    let z = DVector::zeros(n);
    let bias = recurse_with(chain, &geo, &state.qdot, &state.qdot, &z, true, None);
    let mut rhs = applied_torque + disturbance - bias;
    if friction_on {
        rhs -= friction_torque(chain, &state.qdot)?;
    }
    let m = symmetrized(mass_from_geometry(chain, &geo))?;
    match Cholesky::new(m.clone()) {
        Some(chol) => Ok(chol.solve(&rhs)),
        None => {
            let eig = SymmetricEigen::new(m).eigenvalues;
            let max = eig.iter().map(|v| v.f64().abs()).fold(0.0, f64::max);
            let min = eig.iter().map(|v| v.f64().abs()).fold(f64::INFINITY, f64::min);
            Err(Error::SingularConfiguration {
                condition: if min > 0.0 { max / min } else { f64::INFINITY },
            })
        }
    }
}
