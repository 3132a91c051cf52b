//! Kinematic and inertial description of a serial revolute manipulator.
//!
//! Frame conventions used throughout the crate:
//!
//! * Frame 0 is the base. Joint `i` (1-based) rotates link `i` about
//!   `axis`, a unit vector expressed in frame `i-1`, passing through the
//!   origin `O_{i-1}`.
//! * Link frame `i` has orientation `R_i = R_{i-1} * Rot(axis_i, q_i)`. Its
//!   origin is `O_i = O_{i-1} + R_i * offset_i`; the next joint sits there.
//! * `com` is the center of mass of link `i` relative to `O_{i-1}` (the
//!   joint it hangs from), expressed in link frame `i`.
//! * `inertia` is taken about the center of mass, in link frame `i`.
//! * The end-effector point is the origin of the last frame, `O_N`.

use nalgebra::{DVector, Matrix3, SymmetricEigen, Vector3};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const STANDARD_GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, PartialEq)]
pub struct LinkParams<T: Real> {
    pub mass: T,
    pub com: Vector3<T>,
    pub inertia: Matrix3<T>,
    pub axis: Vector3<T>,
    pub offset: Vector3<T>,
    /// Viscous friction coefficient (N·m·s/rad).
    pub viscous: T,
    /// Coulomb friction level (N·m).
    pub coulomb: T,
    /// Slope of the smooth Coulomb term, `tanh(slope * qdot)` (s/rad).
    pub slope: T,
}

impl<T: Real> LinkParams<T> {
    /// Inertia tensor from the six independent entries `xx, yy, zz, xy, yz, xz`.
    pub fn inertia_from_components(c: [T; 6]) -> Matrix3<T> {
        let [xx, yy, zz, xy, yz, xz] = c;
        Matrix3::new(xx, xy, xz, xy, yy, yz, xz, yz, zz)
    }

    pub fn inertia_components(&self) -> [T; 6] {
        let i = &self.inertia;
        [i[(0, 0)], i[(1, 1)], i[(2, 2)], i[(0, 1)], i[(1, 2)], i[(0, 2)]]
    }

    /// Checks every physical invariant; `index` is the 1-based link number
    /// used in the error message.
    pub fn validate(&self, index: usize) -> Result<()> {
        let bad = |message: &str| Error::InvalidLink {
            link: index,
            message: message.to_string(),
        };
        let values = [self.mass, self.viscous, self.coulomb, self.slope];
        if !values.iter().all(|v| v.finite())
            || !self.com.iter().all(|v| v.finite())
            || !self.inertia.iter().all(|v| v.finite())
            || !self.axis.iter().all(|v| v.finite())
            || !self.offset.iter().all(|v| v.finite())
        {
            return Err(bad("all parameters must be finite"));
        }
        if self.mass.f64() <= 0.0 {
            return Err(bad("mass must be positive"));
        }
        if (self.axis.norm().f64() - 1.0).abs() > 1e-9 {
            return Err(bad("joint axis must be a unit vector"));
        }
        if self.viscous.f64() < 0.0 {
            return Err(bad("viscous friction must be non-negative"));
        }
        if self.coulomb.f64() < 0.0 {
            return Err(bad("coulomb friction must be non-negative"));
        }
        if self.slope.f64() <= 0.0 {
            return Err(bad("coulomb slope must be positive"));
        }

        let asym = (self.inertia - self.inertia.transpose()).amax().f64();
        if asym > 1e-12 {
            return Err(bad("inertia tensor must be symmetric"));
        }
        let eig = SymmetricEigen::new(self.inertia).eigenvalues;
        let p: Vec<f64> = eig.iter().map(|v| v.f64()).collect();
        let tol = 1e-12;
        if p.iter().any(|&v| v < -tol) {
            return Err(bad("inertia tensor must be positive semi-definite"));
        }
        if p[0] + p[1] < p[2] - tol || p[1] + p[2] < p[0] - tol || p[2] + p[0] < p[1] - tol {
            return Err(bad("principal moments violate the triangle inequality"));
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> LinkParams<U> {
        let c = |v: T| U::lit(v.f64());
        LinkParams {
            mass: c(self.mass),
            com: self.com.map(c),
            inertia: self.inertia.map(c),
            axis: self.axis.map(c),
            offset: self.offset.map(c),
            viscous: c(self.viscous),
            coulomb: c(self.coulomb),
            slope: c(self.slope),
        }
    }
}

/// Immutable, validated description of an N-joint serial arm.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainModel<T: Real> {
    name: String,
    gravity: Vector3<T>,
    links: Vec<LinkParams<T>>,
}

impl<T: Real> ChainModel<T> {
    pub fn new(
        name: impl Into<String>,
        gravity: Vector3<T>,
        links: Vec<LinkParams<T>>,
    ) -> Result<Self> {
        if links.is_empty() {
            return Err(Error::InvalidModel("chain needs at least one link".into()));
        }
        if !gravity.iter().all(|g| g.finite()) {
            return Err(Error::InvalidModel("gravity must be finite".into()));
        }
        let g = gravity.norm().f64();
        if g != 0.0 && (g - STANDARD_GRAVITY).abs() > 1e-6 {
            return Err(Error::InvalidModel(format!(
                "gravity magnitude must be 0 or {STANDARD_GRAVITY} m/s^2, got {g}"
            )));
        }
        for (i, link) in links.iter().enumerate() {
            link.validate(i + 1)?;
        }
        Ok(Self {
            name: name.into(),
            gravity,
            links,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn gravity(&self) -> &Vector3<T> {
        &self.gravity
    }

    pub fn links(&self) -> &[LinkParams<T>] {
        &self.links
    }

    pub fn link(&self, index: usize) -> &LinkParams<T> {
        &self.links[index]
    }

    pub fn dof(&self) -> usize {
        self.links.len()
    }

    /// Same chain with every mass and inertia scaled by `1 + fraction`.
    /// Used to build a plant that differs from the controller's model.
    pub fn with_mass_perturbation(&self, fraction: T) -> Result<Self> {
        let scale = T::one() + fraction;
        let links = self
            .links
            .iter()
            .map(|l| LinkParams {
                mass: l.mass * scale,
                inertia: l.inertia * scale,
                ..l.clone()
            })
            .collect();
        Self::new(self.name.clone(), self.gravity, links)
    }

    pub fn with_gravity(&self, gravity: Vector3<T>) -> Result<Self> {
        Self::new(self.name.clone(), gravity, self.links.clone())
    }

    pub fn cast<U: Real>(&self) -> ChainModel<U> {
        ChainModel {
            name: self.name.clone(),
            gravity: self.gravity.map(|v| U::lit(v.f64())),
            links: self.links.iter().map(LinkParams::cast).collect(),
        }
    }

    pub fn zero_vector(&self) -> DVector<T> {
        DVector::zeros(self.dof())
    }
}

/// Link masses of the built-in seven-joint arm (kg).
pub const CANONICAL_MASSES: [f64; 7] = [0.81, 2.096, 0.538, 0.407, 0.459, 0.396, 0.135];
/// Link lengths (m).
pub const CANONICAL_LENGTHS: [f64; 7] = [0.085, 0.171, 0.069, 0.148, 0.095, 0.0, 0.0755];
/// Distance of each link's center of mass from its joint (m).
pub const CANONICAL_COM: [f64; 7] = [0.011, 0.091, 0.007, 0.051, 0.058, 0.0, 0.0185];
pub const CANONICAL_IXX: [f64; 7] = [0.006, 0.012, 0.003, 0.005, 0.001, 0.002, 0.001];
pub const CANONICAL_IYY: [f64; 7] = [0.001, 0.002, 0.000, 0.001, 0.000, 0.001, 0.000];
pub const CANONICAL_IZZ: [f64; 7] = [0.006, 0.011, 0.003, 0.005, 0.001, 0.002, 0.001];
pub const CANONICAL_COULOMB: [f64; 7] = [3.704, 5.02, 1.359, 1.240, 0.607, 0.979, 0.778];
pub const CANONICAL_VISCOUS: [f64; 7] = [1.104, 2.086, 1.191, 1.016, 0.668, 0.794, 0.604];
pub const CANONICAL_SLOPE: f64 = 20.0;

/// End-effector position of the built-in arm at its home configuration.
pub const CANONICAL_HOME_POSITION: [f64; 3] = [0.085, 0.0, -0.5585];

/// Unit joint axes of the built-in arm, each in its parent frame. At home
/// the arm hangs straight down: shoulder flexion (y) and abduction (x),
/// upper-arm roll (z), elbow flexion (x), forearm roll (z), wrist flexion
/// (x), hand roll (z).
const CANONICAL_AXES: [[f64; 3]; 7] = [
    [0.0, 1.0, 0.0],
    [1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0],
    [1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0],
    [1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0],
];

/// The built-in seven-joint anthropomorphic arm.
///
/// The first link carries a horizontal shoulder offset along +x; every
/// other link hangs along -z at the home configuration `q = 0`, which puts
/// the end-effector at [`CANONICAL_HOME_POSITION`].
pub fn canonical_7dof<T: Real>() -> ChainModel<T> {
    let links = (0..7)
        .map(|i| {
            let dir = if i == 0 {
                Vector3::new(1.0, 0.0, 0.0)
            } else {
                Vector3::new(0.0, 0.0, -1.0)
            };
            let [ax, ay, az] = CANONICAL_AXES[i];
            LinkParams {
                mass: T::lit(CANONICAL_MASSES[i]),
                com: (dir * CANONICAL_COM[i]).map(T::lit),
                inertia: Matrix3::from_diagonal(&Vector3::new(
                    T::lit(CANONICAL_IXX[i]),
                    T::lit(CANONICAL_IYY[i]),
                    T::lit(CANONICAL_IZZ[i]),
                )),
                axis: Vector3::new(T::lit(ax), T::lit(ay), T::lit(az)),
                offset: (dir * CANONICAL_LENGTHS[i]).map(T::lit),
                viscous: T::lit(CANONICAL_VISCOUS[i]),
                coulomb: T::lit(CANONICAL_COULOMB[i]),
                slope: T::lit(CANONICAL_SLOPE),
            }
        })
        .collect();
    ChainModel::new(
        "builtin:7dof",
        Vector3::new(T::zero(), T::zero(), T::lit(-STANDARD_GRAVITY)),
        links,
    )
    .expect("built-in arm is valid")
}

/// Home joint configuration of [`canonical_7dof`].
pub fn canonical_home<T: Real>() -> DVector<T> {
    DVector::zeros(7)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_link() -> LinkParams<f64> {
        LinkParams {
            mass: 1.0,
            com: Vector3::new(0.5, 0.0, 0.0),
            inertia: Matrix3::zeros(),
            axis: Vector3::z(),
            offset: Vector3::new(1.0, 0.0, 0.0),
            viscous: 0.0,
            coulomb: 0.0,
            slope: 1.0,
        }
    }

    #[test]
    fn canonical_values_match_table() {
        let c = canonical_7dof::<f64>();
        assert_eq!(c.dof(), 7);
        assert_eq!(c.link(1).inertia[(0, 0)], 0.012);
        assert_eq!(c.link(6).inertia[(2, 2)], 0.001);
        assert_eq!(c.link(0).mass, 0.81);
        let eta: Vec<f64> = c.links().iter().map(|l| l.viscous).collect();
        assert_eq!(eta, CANONICAL_VISCOUS.to_vec());
        for (i, l) in c.links().iter().enumerate() {
            l.validate(i + 1).unwrap();
            assert_eq!(l.inertia[(0, 1)], 0.0);
        }
    }

    #[test]
    fn rejects_negative_mass() {
        let mut l = unit_link();
        l.mass = -1.0;
        let err = ChainModel::new("x", Vector3::zeros(), vec![unit_link(), unit_link(), l])
            .unwrap_err()
            .to_string();
        assert!(err.contains("link 3"), "{err}");
        assert!(err.contains("mass must be positive"), "{err}");
    }

    #[test]
    fn rejects_bad_axis_and_inertia() {
        let mut l = unit_link();
        l.axis = Vector3::new(0.0, 0.0, 1.1);
        assert!(l.validate(1).is_err());

        let mut l = unit_link();
        l.inertia = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, 3.0));
        assert!(l.validate(1).unwrap_err().to_string().contains("triangle"));

        let mut l = unit_link();
        l.inertia[(0, 1)] = 1e-6;
        assert!(l.validate(1).unwrap_err().to_string().contains("symmetric"));

        let mut l = unit_link();
        l.slope = 0.0;
        assert!(l.validate(1).is_err());
    }

    #[test]
    fn rejects_empty_chain_and_odd_gravity() {
        assert!(ChainModel::<f64>::new("x", Vector3::zeros(), vec![]).is_err());
        assert!(ChainModel::new("x", Vector3::new(0.0, 0.0, -3.0), vec![unit_link()]).is_err());
    }

    #[test]
    fn mass_perturbation_scales_mass_and_inertia() {
        let c = canonical_7dof::<f64>();
        let p = c.with_mass_perturbation(0.2).unwrap();
        assert!((p.link(1).mass - 2.096 * 1.2).abs() < 1e-12);
        assert!((p.link(1).inertia[(0, 0)] - 0.012 * 1.2).abs() < 1e-12);
        assert_eq!(p.link(1).viscous, c.link(1).viscous);
    }

    #[test]
    fn cast_to_f32() {
        let c = canonical_7dof::<f64>().cast::<f32>();
        assert_eq!(c.link(0).mass, 0.81f32);
    }
}
