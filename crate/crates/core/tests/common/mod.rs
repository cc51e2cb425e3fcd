#![allow(dead_code)]

use eltrack::dynamics::CustomDynamics;
use eltrack::{JointState, RobotModel};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const G: f64 = 9.81;

pub fn v(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

pub fn pendulum() -> RobotModel {
    RobotModel::pendulum(1.0, 1.0, G).unwrap()
}

pub fn two_link() -> RobotModel {
    RobotModel::two_link_planar(1.0, 1.0, 1.0, 1.0, G).unwrap()
}

/// Unequal parameters so no term cancels by accident.
pub fn two_link_uneven() -> RobotModel {
    RobotModel::two_link_planar(1.7, 0.6, 0.8, 1.3, G).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, half: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(-half..half))
}

/// Planar point-mass positions for a serial chain with absolute angles
/// accumulated from relative joint angles.
pub fn point_positions(lengths: &[f64], q: &DVector<f64>) -> Vec<(f64, f64)> {
    let (mut x, mut y, mut angle) = (0.0, 0.0, 0.0);
    lengths
        .iter()
        .zip(q.iter())
        .map(|(l, qi)| {
            angle += qi;
            x += l * angle.cos();
            y += l * angle.sin();
            (x, y)
        })
        .collect()
}

pub fn chain_potential(masses: &[f64], lengths: &[f64], g: f64, q: &DVector<f64>) -> f64 {
    point_positions(lengths, q)
        .iter()
        .zip(masses)
        .map(|((_, y), m)| m * g * y)
        .sum()
}

/// Kinetic energy with point velocities from a central difference of the
/// positions along `qdot`.
pub fn chain_kinetic(
    masses: &[f64],
    lengths: &[f64],
    q: &DVector<f64>,
    qdot: &DVector<f64>,
) -> f64 {
    let h = 1e-6;
    let plus = point_positions(lengths, &(q + qdot * h));
    let minus = point_positions(lengths, &(q - qdot * h));
    plus.iter()
        .zip(&minus)
        .zip(masses)
        .map(|(((xp, yp), (xm, ym)), m)| {
            let (vx, vy) = ((xp - xm) / (2.0 * h), (yp - ym) / (2.0 * h));
            0.5 * m * (vx * vx + vy * vy)
        })
        .sum()
}

/// Inertia from the Hessian of the kinetic energy in `qdot`.
pub fn lagrangian_mass(masses: &[f64], lengths: &[f64], q: &DVector<f64>) -> DMatrix<f64> {
    let n = q.len();
    let t = |qd: &DVector<f64>| chain_kinetic(masses, lengths, q, qd);
    let e = |i: usize| {
        let mut x = DVector::zeros(n);
        x[i] = 1.0;
        x
    };
    // T is quadratic in qdot, so a unit step is exact up to rounding.
    DMatrix::from_fn(n, n, |i, j| {
        let (ei, ej) = (e(i), e(j));
        (t(&(&ei + &ej)) - t(&(&ei - &ej)) - t(&(-&ei + &ej)) + t(&(-&ei - &ej))) / 4.0
    })
}

pub fn gravity_fd(masses: &[f64], lengths: &[f64], g: f64, q: &DVector<f64>) -> DVector<f64> {
    let h = 1e-6;
    DVector::from_fn(q.len(), |k, _| {
        let mut p = q.clone();
        let mut m = q.clone();
        p[k] += h;
        m[k] -= h;
        (chain_potential(masses, lengths, g, &p) - chain_potential(masses, lengths, g, &m))
            / (2.0 * h)
    })
}

/// The planar two-link arm re-expressed as a user model, so the library has
/// to derive C and G numerically.
pub struct CustomTwoLink {
    pub masses: [f64; 2],
    pub lengths: [f64; 2],
    pub g: f64,
}

impl CustomDynamics for CustomTwoLink {
    fn dof(&self) -> usize {
        2
    }

    fn mass_matrix(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let [m1, m2] = self.masses;
        let [l1, l2] = self.lengths;
        let c2 = q[1].cos();
        let m22 = m2 * l2 * l2;
        let m12 = m22 + m2 * l1 * l2 * c2;
        let m11 = (m1 + m2) * l1 * l1 + m22 + 2.0 * m2 * l1 * l2 * c2;
        DMatrix::from_row_slice(2, 2, &[m11, m12, m12, m22])
    }

    fn potential_energy(&self, q: &DVector<f64>) -> f64 {
        chain_potential(&self.masses, &self.lengths, self.g, q)
    }
}

pub fn state(q: &[f64], qdot: &[f64]) -> JointState {
    JointState::from_slices(q, qdot).unwrap()
}
