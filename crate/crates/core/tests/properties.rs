use nalgebra::{DVector, Matrix3, Vector3};
use proptest::prelude::*;
use reachsim::config::{load_chain, serialize_chain};
use reachsim::controller::{damping_diag, lpf_step, muscle_diag, ControllerParams};
use reachsim::{ChainModel, LinkParams};

fn unit(v: [f64; 3]) -> Vector3<f64> {
    let v = Vector3::from(v);
    if v.norm() < 1e-3 {
        Vector3::z()
    } else {
        v.normalize()
    }
}

prop_compose! {
    fn link()(
        mass in 0.01..5.0f64,
        com in prop::array::uniform3(-0.3..0.3f64),
        // Principal moments built as pairwise sums satisfy the triangle
        // inequality by construction.
        spread in prop::array::uniform3(1e-4..0.05f64),
        axis in prop::array::uniform3(-1.0..1.0f64),
        offset in prop::array::uniform3(-0.3..0.3f64),
        viscous in 0.0..3.0f64,
        coulomb in 0.0..5.0f64,
        slope in 0.5..50.0f64,
    ) -> LinkParams<f64> {
        let [a, b, c] = spread;
        LinkParams {
            mass,
            com: Vector3::from(com),
            inertia: Matrix3::from_diagonal(&Vector3::new(b + c, a + c, a + b)),
            axis: unit(axis),
            offset: Vector3::from(offset),
            viscous,
            coulomb,
            slope,
        }
    }
}

fn chain() -> impl Strategy<Value = ChainModel<f64>> {
    (prop::collection::vec(link(), 1..8), prop::bool::ANY).prop_map(|(links, zero_g)| {
        let g = if zero_g { Vector3::zeros() } else { Vector3::new(0.0, 0.0, -9.81) };
        ChainModel::new("random", g, links).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn robot_documents_round_trip(c in chain()) {
        let back = load_chain(&serialize_chain(&c)).unwrap();
        prop_assert_eq!(back.dof(), c.dof());
        prop_assert_eq!(back.gravity(), c.gravity());
        for (a, b) in back.links().iter().zip(c.links()) {
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn gain_complementarity(frac in 0.0..1.0f64, dx0 in 1e-3..2.0f64) {
        let p = ControllerParams::<f64>::published();
        let kv = damping_diag(&p, frac * dx0, dx0).unwrap().component_div(&p.damping);
        let fm = muscle_diag(&p, frac * dx0, dx0).unwrap().component_div(&p.stiffness);
        for i in 0..7 {
            prop_assert!((kv[i] * kv[i] + fm[i] * fm[i] - 1.0).abs() < 1e-12);
            prop_assert!(kv[i] >= 0.0 && fm[i] >= 0.0);
        }
    }

    #[test]
    fn filter_output_moves_monotonically_toward_input(
        y0 in prop::collection::vec(-50.0..50.0f64, 4),
        u in prop::collection::vec(-50.0..50.0f64, 4),
        dt in 1e-5..0.1f64,
        tau in 1e-3..1.0f64,
    ) {
        let mut y = DVector::from_vec(y0.clone());
        let u = DVector::from_vec(u);
        let taus = DVector::from_element(4, tau);
        lpf_step(&mut y, &u, dt, &taus);
        for i in 0..4 {
            let (lo, hi) = if y0[i] <= u[i] { (y0[i], u[i]) } else { (u[i], y0[i]) };
            prop_assert!(y[i] >= lo - 1e-12 && y[i] <= hi + 1e-12);
        }
    }
}

#[test]
fn filter_is_exact_for_held_input() {
    // Two half steps equal one full step for a held input.
    let u = DVector::from_element(1, 1.0f64);
    let taus = DVector::from_element(1, 0.015);
    let mut a = DVector::zeros(1);
    let mut b = DVector::zeros(1);
    lpf_step(&mut a, &u, 2e-3, &taus);
    lpf_step(&mut b, &u, 1e-3, &taus);
    lpf_step(&mut b, &u, 1e-3, &taus);
    assert!((a[0] - b[0]).abs() < 1e-15);
}
