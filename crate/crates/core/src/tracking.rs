//! Tracking errors, the backstepped virtual velocity input and the
//! exponential tracking torque law.

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{symmetry_defect, JointState, RobotModel};
use crate::error::{check_finite, check_len, Error, Result};

/// Largest tolerated `‖PM − (PM)ᵀ‖∞` for a general (non-scalar) `P`.
pub const PM_SYMMETRY_TOL: f64 = 1e-8;

/// Desired trajectory sample at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub t: f64,
    pub q_d: DVector<f64>,
    pub qd_dot: DVector<f64>,
    pub qd_ddot: DVector<f64>,
}

impl Reference {
    pub fn new(
        t: f64,
        q_d: DVector<f64>,
        qd_dot: DVector<f64>,
        qd_ddot: DVector<f64>,
    ) -> Result<Self> {
        check_len("reference velocity", q_d.len(), qd_dot.len())?;
        check_len("reference acceleration", q_d.len(), qd_ddot.len())?;
        check_finite("reference position", q_d.as_slice())?;
        check_finite("reference velocity", qd_dot.as_slice())?;
        check_finite("reference acceleration", qd_ddot.as_slice())?;
        Ok(Self {
            t,
            q_d,
            qd_dot,
            qd_ddot,
        })
    }

    pub fn dof(&self) -> usize {
        self.q_d.len()
    }
}

/// Position error `q̃ = q_d − q`, its rate, and the filtered error `q_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorState {
    pub q_tilde: DVector<f64>,
    pub q_tilde_dot: DVector<f64>,
    pub q_r: DVector<f64>,
}

impl ErrorState {
    /// `q̃̇` comes from measured velocity (`q̇_d − q̇`), never from
    /// differentiating `q̃`.
    pub fn compute(state: &JointState, reference: &Reference, lambda: f64) -> Result<Self> {
        let q_tilde = position_error(&reference.q_d, state.q())?;
        let q_tilde_dot = position_error(&reference.qd_dot, state.qdot())?;
        let q_r = filtered_error(&q_tilde, &q_tilde_dot, lambda)?;
        Ok(Self {
            q_tilde,
            q_tilde_dot,
            q_r,
        })
    }

    /// Recomputes `q_r` from the stored errors and compares bitwise.
    pub fn is_consistent(&self, lambda: f64) -> bool {
        filtered_error(&self.q_tilde, &self.q_tilde_dot, lambda)
            .map(|q_r| q_r == self.q_r)
            .unwrap_or(false)
    }
}

/// Controller parameters: the filter gain `λ` and the certificate weight `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gains {
    pub lambda: f64,
    pub p: DMatrix<f64>,
    /// Set when `P = p·I`.
    pub p_scalar: Option<f64>,
}

impl Gains {
    /// `P = p_scalar · I` on `n` joints.
    pub fn scalar(lambda: f64, p_scalar: f64, n: usize) -> Result<Self> {
        if !(p_scalar.is_finite() && p_scalar > 0.0) {
            return Err(Error::Gains(format!(
                "p_scalar must be positive, got {p_scalar}"
            )));
        }
        let gains = Self {
            lambda,
            p: DMatrix::identity(n, n) * p_scalar,
            p_scalar: Some(p_scalar),
        };
        gains.validate()?;
        Ok(gains)
    }

    pub fn with_matrix(lambda: f64, p: DMatrix<f64>) -> Result<Self> {
        let gains = Self {
            lambda,
            p,
            p_scalar: None,
        };
        gains.validate()?;
        Ok(gains)
    }

    pub fn dof(&self) -> usize {
        self.p.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        validate_lambda(self.lambda)?;
        validate_spd(&self.p)
    }

    /// `‖PM − (PM)ᵀ‖∞`; zero whenever `P` is a multiple of the identity.
    pub fn pm_asymmetry(&self, mass: &DMatrix<f64>) -> f64 {
        if self.p_scalar.is_some() {
            return 0.0;
        }
        symmetry_defect(&(&self.p * mass))
    }
}

pub(crate) fn validate_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda > 0.0 {
        Ok(())
    } else {
        Err(Error::Gains(format!(
            "lambda must be positive, got {lambda}"
        )))
    }
}

pub(crate) fn validate_spd(p: &DMatrix<f64>) -> Result<()> {
    if p.nrows() == 0 || p.nrows() != p.ncols() {
        return Err(Error::Gains(format!(
            "P must be square and non-empty, got {}x{}",
            p.nrows(),
            p.ncols()
        )));
    }
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::Gains("P must be finite".into()));
    }
    if symmetry_defect(p) > 1e-12 * p.amax().max(1.0) {
        return Err(Error::Gains("P must be symmetric".into()));
    }
    if p.clone().cholesky().is_none() {
        return Err(Error::Gains("P must be positive definite".into()));
    }
    Ok(())
}

/// `q_d − q`
pub fn position_error(q_d: &DVector<f64>, q: &DVector<f64>) -> Result<DVector<f64>> {
    check_len("position error operand", q_d.len(), q.len())?;
    Ok(q_d - q)
}

/// `q_r = q̃̇ + λ q̃`
pub fn filtered_error(
    q_tilde: &DVector<f64>,
    q_tilde_dot: &DVector<f64>,
    lambda: f64,
) -> Result<DVector<f64>> {
    validate_lambda(lambda)?;
    check_len("filtered error operand", q_tilde.len(), q_tilde_dot.len())?;
    Ok(q_tilde_dot + q_tilde * lambda)
}

/// Backstepped velocity input `η = q̇_d − e − ½ M⁻¹(q) Ṁ(q, q̇) e` for the
/// error `e` handed in as `q_tilde`. `Ṁ` is evaluated at `(q, qdot)`.
///
/// With `ė = η − q̇_d` this gives `d/dt(½ eᵀMe) = −eᵀMe`.
pub fn virtual_input(
    model: &RobotModel,
    q: &DVector<f64>,
    qdot: &DVector<f64>,
    q_tilde: &DVector<f64>,
    qd_dot: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = model.dof();
    check_len("q_tilde", n, q_tilde.len())?;
    check_len("qd_dot", n, qd_dot.len())?;
    let chol = model.factor_mass(q)?;
    let mdot = model.mass_matrix_rate(q, qdot)?;
    let correction = chol.solve(&(mdot * q_tilde)) * 0.5;
    Ok(qd_dot - q_tilde - correction)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutput {
    pub tau: DVector<f64>,
}

/// `τ = M(q)(q̈_d + λ q̃̇ + q_r) + C(q, q̇)(q̇ + q_r) + G(q)`.
///
/// Only `λ` enters the law; `P` is read for validation alone. Plant friction
/// is never compensated.
pub fn control_torque(
    model: &RobotModel,
    state: &JointState,
    reference: &Reference,
    gains: &Gains,
) -> Result<ControlOutput> {
    gains.validate()?;
    let n = model.dof();
    check_len("state", n, state.dof())?;
    check_len("reference", n, reference.dof())?;
    check_len("gain matrix P", n, gains.dof())?;

    let err = ErrorState::compute(state, reference, gains.lambda)?;
    let (q, qdot) = (state.q(), state.qdot());
    let mass = model.mass_matrix(q)?;
    let coriolis = model.coriolis_matrix(q, qdot)?;
    let gravity = model.gravity_vector(q)?;

    let accel_term = &reference.qd_ddot + &err.q_tilde_dot * gains.lambda + &err.q_r;
    let tau = mass * accel_term + coriolis * (qdot + &err.q_r) + gravity;
    check_finite("control torque", tau.as_slice())?;
    Ok(ControlOutput { tau })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn position_error_cases() {
        assert_eq!(
            position_error(&v(&[1.0, 2.0]), &v(&[1.0, 2.0])).unwrap(),
            v(&[0.0, 0.0])
        );
        assert_eq!(
            position_error(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(),
            v(&[1.0, -1.0])
        );
        assert!(matches!(
            position_error(&v(&[1.0]), &v(&[1.0, 2.0])),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn filtered_error_cases() {
        assert_eq!(
            filtered_error(&v(&[1.0, 0.0]), &v(&[0.0, 0.0]), 2.0).unwrap(),
            v(&[2.0, 0.0])
        );
        assert_eq!(
            filtered_error(&v(&[0.0]), &v(&[0.0]), 3.7).unwrap(),
            v(&[0.0])
        );
        for lambda in [0.1, 1.0, 4.5] {
            assert_eq!(
                filtered_error(&v(&[1.0]), &v(&[-lambda]), lambda).unwrap(),
                v(&[0.0])
            );
        }
        assert!(matches!(
            filtered_error(&v(&[1.0]), &v(&[0.0]), 0.0),
            Err(Error::Gains(_))
        ));
        assert!(filtered_error(&v(&[1.0]), &v(&[0.0]), -1.0).is_err());
    }

    #[test]
    fn gains_validation() {
        assert!(Gains::scalar(1.0, 1.0, 2).is_ok());
        assert!(Gains::scalar(-1.0, 1.0, 2).is_err());
        assert!(Gains::scalar(1.0, 0.0, 2).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(Gains::with_matrix(1.0, asym).is_err());
        let indef = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(Gains::with_matrix(1.0, indef).is_err());
    }

    #[test]
    fn virtual_input_constant_inertia() {
        let p = RobotModel::pendulum(2.0, 1.0, 9.81).unwrap();
        let eta = virtual_input(&p, &v(&[0.2]), &v(&[3.0]), &v(&[0.5]), &v(&[1.0])).unwrap();
        assert_eq!(eta, v(&[0.5]));
    }

    #[test]
    fn virtual_input_zero_error() {
        let m = RobotModel::two_link_planar(1.0, 1.0, 1.0, 1.0, 9.81).unwrap();
        let eta = virtual_input(
            &m,
            &v(&[0.3, 0.5]),
            &v(&[1.0, -2.0]),
            &v(&[0.0, 0.0]),
            &v(&[0.7, 0.1]),
        )
        .unwrap();
        assert_eq!(eta, v(&[0.7, 0.1]));
    }

    #[test]
    fn pendulum_setpoint_torque() {
        // q̃ = 1, q̃̇ = 0, λ = 1 ⇒ q_r = 1; τ = m l²(0 + 0 + 1) + m g l cos 0.
        let p = RobotModel::pendulum(1.0, 1.0, 9.81).unwrap();
        let state = JointState::at_rest(&[0.0]).unwrap();
        let r = Reference::new(0.0, v(&[1.0]), v(&[0.0]), v(&[0.0])).unwrap();
        let gains = Gains::scalar(1.0, 1.0, 1).unwrap();
        let tau = control_torque(&p, &state, &r, &gains).unwrap().tau;
        let oracle = 1.0 * 1.0 * 1.0 * (0.0 + 1.0 * 0.0 + (0.0 + 1.0 * 1.0)) + 9.81 * 0.0f64.cos();
        assert_eq!(tau[0], oracle);
        assert!((tau[0] - 10.81).abs() < 1e-12);
    }

    #[test]
    fn control_torque_rejects_bad_inputs() {
        let p = RobotModel::pendulum(1.0, 1.0, 9.81).unwrap();
        let state = JointState::at_rest(&[0.0]).unwrap();
        let r = Reference::new(0.0, v(&[1.0, 0.0]), v(&[0.0, 0.0]), v(&[0.0, 0.0])).unwrap();
        let gains = Gains::scalar(1.0, 1.0, 1).unwrap();
        assert!(matches!(
            control_torque(&p, &state, &r, &gains),
            Err(Error::Dimension { .. })
        ));
        let r1 = Reference::new(0.0, v(&[1.0]), v(&[0.0]), v(&[0.0])).unwrap();
        let bad = Gains {
            lambda: -1.0,
            ..gains
        };
        assert!(matches!(
            control_torque(&p, &state, &r1, &bad),
            Err(Error::Gains(_))
        ));
    }

    #[test]
    fn error_state_consistency() {
        let state = JointState::from_slices(&[0.1, 0.2], &[0.3, -0.4]).unwrap();
        let r = Reference::new(0.0, v(&[1.0, 2.0]), v(&[0.5, 0.5]), v(&[0.0, 0.0])).unwrap();
        let e = ErrorState::compute(&state, &r, 1.7).unwrap();
        assert!(e.is_consistent(1.7));
        assert!(!e.is_consistent(1.8));
    }
}
