//! Randomized self-checks of the dynamics, kinematics and controller
//! against independent references (closed-form two-link model, finite
//! differences, energy bookkeeping).

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chain::{canonical_7dof, ChainModel, LinkParams};
use crate::controller::{damping_diag, lpf_step, muscle_diag, ControllerParams};
use crate::dynamics::{
    coriolis_matrix, gravity_vector, kinetic_energy, mass_matrix, mass_matrix_unsymmetrized, ne_alpha,
    potential_energy,
};
use crate::error::Result;
use crate::kinematics::{frames, jacobian_from_frames, JointState};
use crate::sim::rk4_step;

#[derive(Debug, Clone)]
pub struct ValidateOptions {
    pub seed: u64,
    pub trials: usize,
    /// Negates the Coriolis matrix inside the skew-symmetry check. Exists
    /// only to prove that the check can fail.
    pub flip_coriolis_sign: bool,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            seed: 7,
            trials: 100,
            flip_coriolis_sign: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Worst residual observed over all trials.
    pub worst: f64,
    pub tolerance: f64,
    /// Inputs of the worst trial, for reproduction.
    pub detail: String,
}

/// Planar two-link arm in the x-y plane with gravity along -y, described
/// by its classical parameters.
#[derive(Debug, Clone, Copy)]
pub struct TwoLinkParams {
    pub m1: f64,
    pub m2: f64,
    pub l1: f64,
    pub l2: f64,
    pub lc1: f64,
    pub lc2: f64,
    pub i1: f64,
    pub i2: f64,
    pub g: f64,
}

impl Default for TwoLinkParams {
    fn default() -> Self {
        Self {
            m1: 1.3,
            m2: 0.8,
            l1: 0.6,
            l2: 0.45,
            lc1: 0.25,
            lc2: 0.2,
            i1: 0.04,
            i2: 0.02,
            g: 9.81,
        }
    }
}

impl TwoLinkParams {
    pub fn chain(&self) -> ChainModel<f64> {
        let link = |m: f64, l: f64, lc: f64, i: f64| LinkParams {
            mass: m,
            com: Vector3::new(lc, 0.0, 0.0),
            inertia: Matrix3::from_diagonal(&Vector3::new(0.5 * i, 0.5 * i, i)),
            axis: Vector3::z(),
            offset: Vector3::new(l, 0.0, 0.0),
            viscous: 0.0,
            coulomb: 0.0,
            slope: 1.0,
        };
        ChainModel::new(
            "two-link",
            Vector3::new(0.0, -self.g, 0.0),
            vec![
                link(self.m1, self.l1, self.lc1, self.i1),
                link(self.m2, self.l2, self.lc2, self.i2),
            ],
        )
        .expect("valid two-link arm")
    }

    /// Closed-form inertia matrix from the Lagrangian.
    pub fn mass(&self, q: &[f64; 2]) -> [[f64; 2]; 2] {
        let c2 = q[1].cos();
        let m11 = self.m1 * self.lc1.powi(2)
            + self.i1
            + self.m2 * (self.l1.powi(2) + self.lc2.powi(2) + 2.0 * self.l1 * self.lc2 * c2)
            + self.i2;
        let m12 = self.m2 * (self.lc2.powi(2) + self.l1 * self.lc2 * c2) + self.i2;
        let m22 = self.m2 * self.lc2.powi(2) + self.i2;
        [[m11, m12], [m12, m22]]
    }

    /// Christoffel-symbol Coriolis matrix.
    pub fn coriolis(&self, q: &[f64; 2], qd: &[f64; 2]) -> [[f64; 2]; 2] {
        let h = -self.m2 * self.l1 * self.lc2 * q[1].sin();
        [[h * qd[1], h * (qd[0] + qd[1])], [-h * qd[0], 0.0]]
    }

    pub fn gravity(&self, q: &[f64; 2]) -> [f64; 2] {
        let c1 = q[0].cos();
        let c12 = (q[0] + q[1]).cos();
        [
            (self.m1 * self.lc1 + self.m2 * self.l1) * self.g * c1 + self.m2 * self.lc2 * self.g * c12,
            self.m2 * self.lc2 * self.g * c12,
        ]
    }
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, half_range: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-half_range..half_range))
}

struct Worst {
    value: f64,
    detail: String,
}

impl Worst {
    fn new() -> Self {
        Self {
            value: 0.0,
            detail: String::new(),
        }
    }

    fn update(&mut self, value: f64, detail: impl FnOnce() -> String) {
        if !(value <= self.value) {
            self.value = value;
            self.detail = detail();
        }
    }

    fn finish(self, name: &'static str, tolerance: f64, strict_less: bool) -> CheckResult {
        let passed = if strict_less {
            self.value < tolerance
        } else {
            self.value <= tolerance
        };
        CheckResult {
            name,
            passed: passed && self.value.is_finite(),
            worst: self.value,
            tolerance,
            detail: self.detail,
        }
    }
}

fn fmt(v: &DVector<f64>) -> String {
    format!("{:?}", v.as_slice())
}

pub fn check_lagrangian_oracle(rng: &mut ChaCha8Rng, trials: usize) -> Result<CheckResult> {
    let p = TwoLinkParams::default();
    let chain = p.chain();
    let mut worst = Worst::new();
    for _ in 0..trials {
        let q = random_vec(rng, 2, std::f64::consts::PI);
        let qd = random_vec(rng, 2, 3.0);
        let qa = [q[0], q[1]];
        let qda = [qd[0], qd[1]];
        let m = mass_matrix(&chain, &q)?;
        let c = coriolis_matrix(&chain, &q, &qd)?;
        let g = gravity_vector(&chain, &q)?;
        let (mr, cr, gr) = (p.mass(&qa), p.coriolis(&qa, &qda), p.gravity(&qa));
        let mut err: f64 = 0.0;
        for i in 0..2 {
            err = err.max((g[i] - gr[i]).abs());
            for j in 0..2 {
                err = err.max((m[(i, j)] - mr[i][j]).abs());
                err = err.max((c[(i, j)] - cr[i][j]).abs());
            }
        }
        worst.update(err, || format!("q={} qdot={}", fmt(&q), fmt(&qd)));
    }
    Ok(worst.finish("lagrangian_oracle", 1e-8, true))
}

pub fn check_recursion_consistency(chain: &ChainModel<f64>, rng: &mut ChaCha8Rng, trials: usize) -> Result<CheckResult> {
    let n = chain.dof();
    let mut worst = Worst::new();
    for _ in 0..trials {
        let q = random_vec(rng, n, std::f64::consts::PI);
        let qd = random_vec(rng, n, 2.0);
        let qdd = random_vec(rng, n, 5.0);
        let u = ne_alpha(chain, &q, &qd, &qd, &qdd, true)?;
        let rebuilt = mass_matrix(chain, &q)? * &qdd + coriolis_matrix(chain, &q, &qd)? * &qd + gravity_vector(chain, &q)?;
        worst.update((u - rebuilt).amax(), || format!("q={} qdot={} qddot={}", fmt(&q), fmt(&qd), fmt(&qdd)));
    }
    Ok(worst.finish("recursion_consistency", 1e-8, true))
}

pub fn check_mass_matrix(chain: &ChainModel<f64>, rng: &mut ChaCha8Rng, trials: usize) -> Result<(CheckResult, CheckResult)> {
    let n = chain.dof();
    let mut asym = Worst::new();
    let mut neg = Worst::new();
    neg.value = f64::NEG_INFINITY;
    for _ in 0..trials {
        let q = random_vec(rng, n, std::f64::consts::PI);
        let raw = mass_matrix_unsymmetrized(chain, &q)?;
        asym.update((&raw - raw.transpose()).amax(), || format!("q={}", fmt(&q)));
        let min_eig = SymmetricEigen::new(mass_matrix(chain, &q)?).eigenvalues.min();
        // Track -min_eig so the worst case is the smallest eigenvalue.
        neg.update(-min_eig, || format!("q={} min_eig={min_eig:e}", fmt(&q)));
    }
    let sym = asym.finish("mass_symmetry", 1e-9, true);
    let mut pd = neg.finish("mass_positive_definite", 0.0, true);
    pd.worst = -pd.worst;
    Ok((sym, pd))
}

/// `max_x |x^T (Mdot - 2C) x| / |x|^2` with `Mdot` by central differences.
pub fn skew_residual(chain: &ChainModel<f64>, q: &DVector<f64>, qd: &DVector<f64>, flip: bool) -> Result<f64> {
    let h = 1e-6;
    let mdot = (mass_matrix(chain, &(q + qd * h))? - mass_matrix(chain, &(q - qd * h))?) / (2.0 * h);
    let mut c = coriolis_matrix(chain, q, qd)?;
    if flip {
        c = -c;
    }
    let n: DMatrix<f64> = mdot - c * 2.0;
    let sym = (&n + n.transpose()) * 0.5;
    Ok(SymmetricEigen::new(sym).eigenvalues.amax())
}

pub fn check_skew_symmetry(chain: &ChainModel<f64>, rng: &mut ChaCha8Rng, trials: usize, flip: bool) -> Result<CheckResult> {
    let n = chain.dof();
    let mut worst = Worst::new();
    for _ in 0..trials {
        let q = random_vec(rng, n, std::f64::consts::PI);
        let qd = random_vec(rng, n, 2.0);
        let r = skew_residual(chain, &q, &qd, flip)?;
        worst.update(r, || format!("q={} qdot={}", fmt(&q), fmt(&qd)));
    }
    Ok(worst.finish("skew_symmetry", 1e-4, true))
}

/// Central-difference gradient of the potential energy.
pub fn potential_gradient(chain: &ChainModel<f64>, q: &DVector<f64>) -> Result<DVector<f64>> {
    let h = 1e-6;
    let mut g = DVector::zeros(q.len());
    for i in 0..q.len() {
        let mut a = q.clone();
        let mut b = q.clone();
        a[i] += h;
        b[i] -= h;
        g[i] = (potential_energy(chain, &a)? - potential_energy(chain, &b)?) / (2.0 * h);
    }
    Ok(g)
}

pub fn check_gravity_gradient(chain: &ChainModel<f64>, rng: &mut ChaCha8Rng, trials: usize) -> Result<CheckResult> {
    let n = chain.dof();
    let mut worst = Worst::new();
    for _ in 0..trials {
        let q = random_vec(rng, n, std::f64::consts::PI);
        let g = gravity_vector(chain, &q)?;
        let fd = potential_gradient(chain, &q)?;
        worst.update((&g - fd).norm() / g.norm(), || format!("q={}", fmt(&q)));
    }
    Ok(worst.finish("gravity_gradient", 1e-5, true))
}

fn relative(err: f64, scale: f64) -> f64 {
    err / scale.max(1e-12)
}

pub fn check_jacobian(chain: &ChainModel<f64>, rng: &mut ChaCha8Rng, trials: usize) -> Result<(CheckResult, CheckResult, CheckResult)> {
    let n = chain.dof();
    let h = 1e-6;
    let mut lin = Worst::new();
    let mut ang = Worst::new();
    let mut dot = Worst::new();
    for _ in 0..trials {
        let q = random_vec(rng, n, std::f64::consts::PI);
        let qd = random_vec(rng, n, 2.0);
        let fs = frames(chain, &q)?;
        let jac = jacobian_from_frames(&fs, &qd);
        let fp = frames(chain, &(&q + &qd * h))?;
        let fm = frames(chain, &(&q - &qd * h))?;
        let detail = || format!("q={} qdot={}", fmt(&q), fmt(&qd));

        let v = jac.j.rows(3, 3) * &qd;
        let v_fd = (fp.position - fm.position) / (2.0 * h);
        let v = Vector3::new(v[0], v[1], v[2]);
        lin.update(relative((v - v_fd).norm(), v_fd.norm()), detail);

        let rdot = (fp.end_effector_rotation() - fm.end_effector_rotation()) / (2.0 * h);
        let w_hat = rdot * fs.end_effector_rotation().transpose();
        let w_fd = Vector3::new(
            0.5 * (w_hat[(2, 1)] - w_hat[(1, 2)]),
            0.5 * (w_hat[(0, 2)] - w_hat[(2, 0)]),
            0.5 * (w_hat[(1, 0)] - w_hat[(0, 1)]),
        );
        let w = jac.j.rows(0, 3) * &qd;
        let w = Vector3::new(w[0], w[1], w[2]);
        ang.update(relative((w - w_fd).norm(), w_fd.norm()), detail);

        let jp = jacobian_from_frames(&fp, &qd).j;
        let jm = jacobian_from_frames(&fm, &qd).j;
        let jdot_fd = (jp - jm) / (2.0 * h);
        dot.update(relative((&jac.jdot - &jdot_fd).amax(), jdot_fd.amax()), detail);
    }
    Ok((
        lin.finish("jacobian_linear", 1e-5, true),
        ang.finish("jacobian_angular", 1e-5, true),
        dot.finish("jacobian_derivative", 1e-4, true),
    ))
}

/// Relative drift of total mechanical energy of an unactuated, frictionless
/// two-link swing. Energy is measured above the hanging equilibrium.
pub fn energy_drift(duration: f64, dt: f64) -> Result<f64> {
    let p = TwoLinkParams::default();
    let chain = p.chain();
    let hanging = DVector::from_vec(vec![-std::f64::consts::FRAC_PI_2, 0.0]);
    let v_min = potential_energy(&chain, &hanging)?;
    let energy = |s: &JointState<f64>| -> Result<f64> {
        Ok(kinetic_energy(&chain, s)? + potential_energy(&chain, &s.q)? - v_min)
    };
    let mut state = JointState::at_rest(DVector::from_vec(vec![0.3, 0.6]));
    let e0 = energy(&state)?;
    let zero = DVector::zeros(2);
    let steps = (duration / dt).round() as usize;
    let mut worst: f64 = 0.0;
    for k in 0..steps {
        state = rk4_step(&chain, &state, &zero, |_| DVector::zeros(2), k as f64 * dt, dt, false)?;
        worst = worst.max((energy(&state)? - e0).abs() / e0);
    }
    Ok(worst)
}

pub fn check_energy() -> Result<CheckResult> {
    let drift = energy_drift(5.0, 1e-3)?;
    let mut w = Worst::new();
    w.update(drift, || "two-link swing from q=(0.3, 0.6), 5 s, dt=1e-3".into());
    Ok(w.finish("energy_conservation", 1e-3, true))
}

pub fn check_controller_identities(rng: &mut ChaCha8Rng, trials: usize) -> Result<CheckResult> {
    let p = ControllerParams::<f64>::published();
    let mut w = Worst::new();
    let mut boundary: f64 = 0.0;
    let dx0 = 0.45;
    boundary = boundary.max(damping_diag(&p, dx0, dx0)?.amax());
    boundary = boundary.max((damping_diag(&p, 0.0, dx0)? - &p.damping).amax());
    boundary = boundary.max((muscle_diag(&p, dx0, dx0)? - &p.stiffness).amax());
    boundary = boundary.max(muscle_diag(&p, 0.0, dx0)?.component_div(&p.stiffness).amax());
    w.update(boundary, || "boundary identities".into());
    for _ in 0..trials {
        let dx = rng.random_range(0.0..dx0);
        let kv = damping_diag(&p, dx, dx0)?.component_div(&p.damping);
        let fm = muscle_diag(&p, dx, dx0)?.component_div(&p.stiffness);
        let r = (kv.component_mul(&kv) + fm.component_mul(&fm)).add_scalar(-1.0).amax();
        w.update(r, || format!("dx={dx}"));
    }
    Ok(w.finish("controller_identities", 1e-12, true))
}

/// Fractional output of the discrete filter after `tau` seconds of a held
/// unit input.
pub fn filter_step_fraction(tau: f64, dt: f64) -> f64 {
    let mut y = DVector::zeros(1);
    let u = DVector::from_element(1, 1.0);
    let taus = DVector::from_element(1, tau);
    let steps = (tau / dt).round() as usize;
    for _ in 0..steps {
        lpf_step(&mut y, &u, dt, &taus);
    }
    y[0]
}

pub fn check_filter() -> CheckResult {
    let y = filter_step_fraction(0.015, 1e-3);
    let target = 1.0 - (-1.0f64).exp();
    let mut w = Worst::new();
    w.update((y - target).abs(), || format!("y(tau)={y}"));
    w.finish("filter_step_response", 0.005, false)
}

/// Runs every check and returns one result per check.
pub fn run_all(opts: &ValidateOptions) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let arm = canonical_7dof::<f64>();
    let trials = opts.trials.max(1);
    let mut out = vec![
        check_lagrangian_oracle(&mut rng, trials)?,
        check_recursion_consistency(&arm, &mut rng, trials)?,
    ];
    let (sym, pd) = check_mass_matrix(&arm, &mut rng, trials)?;
    out.push(sym);
    out.push(pd);
    out.push(check_skew_symmetry(&arm, &mut rng, trials, opts.flip_coriolis_sign)?);
    out.push(check_gravity_gradient(&arm, &mut rng, trials)?);
    let (lin, ang, dot) = check_jacobian(&arm, &mut rng, trials)?;
    out.extend([lin, ang, dot]);
    out.push(check_energy()?);
    out.push(check_controller_identities(&mut rng, trials)?);
    out.push(check_filter());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suite_passes() {
        let results = run_all(&ValidateOptions { trials: 20, ..Default::default() }).unwrap();
        for r in &results {
            assert!(r.passed, "{} failed: worst {:e} ({})", r.name, r.worst, r.detail);
        }
    }

    #[test]
    fn sign_flip_is_caught() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = check_skew_symmetry(&canonical_7dof(), &mut rng, 5, true).unwrap();
        assert!(!r.passed);
    }
}
