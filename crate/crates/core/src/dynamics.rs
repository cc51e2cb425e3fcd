//! Rigid-body plant `M(q) q̈ + C(q, q̇) q̇ + G(q) + F(t, q̇) = τ`.
//!
//! Two closed-form mechanisms ship with the crate (a point-mass pendulum and
//! a planar two-link arm with point masses at the link ends). Anything else
//! is supplied through [`CustomDynamics`], which only has to provide the
//! inertia matrix and the potential energy; the Coriolis matrix, gravity
//! vector and inertia rate are derived here so that `Ṁ − 2C` stays
//! skew-symmetric.
//!
//! Angles are measured from the positive x-axis with gravity acting along
//! −y, so a single link has potential `m g l sin q` and gravity torque
//! `m g l cos q`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{check_finite, check_len, Error, Result};

/// Step used for finite-difference derivatives of user-supplied models.
pub const CUSTOM_FD_STEP: f64 = 1e-6;

/// Smoothing width of the tanh Coulomb friction model.
pub const COULOMB_SMOOTHING: f64 = 1e-3;

/// Generalized positions and velocities of an n-DOF mechanism.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    q: DVector<f64>,
    qdot: DVector<f64>,
}

impl JointState {
    pub fn new(q: DVector<f64>, qdot: DVector<f64>) -> Result<Self> {
        if q.is_empty() {
            return Err(Error::Dimension {
                what: "joint state",
                expected: 1,
                got: 0,
            });
        }
        check_len("joint velocity", q.len(), qdot.len())?;
        check_finite("joint position", q.as_slice())?;
        check_finite("joint velocity", qdot.as_slice())?;
        Ok(Self { q, qdot })
    }

    pub fn from_slices(q: &[f64], qdot: &[f64]) -> Result<Self> {
        Self::new(
            DVector::from_column_slice(q),
            DVector::from_column_slice(qdot),
        )
    }

    /// Zero velocity at the given configuration.
    pub fn at_rest(q: &[f64]) -> Result<Self> {
        Self::from_slices(q, &vec![0.0; q.len()])
    }

    pub fn dof(&self) -> usize {
        self.q.len()
    }

    pub fn q(&self) -> &DVector<f64> {
        &self.q
    }

    pub fn qdot(&self) -> &DVector<f64> {
        &self.qdot
    }
}

/// User-supplied mechanism. Only `M(q)` and the potential energy are needed.
pub trait CustomDynamics: Send + Sync {
    fn dof(&self) -> usize;

    fn mass_matrix(&self, q: &DVector<f64>) -> DMatrix<f64>;

    fn potential_energy(&self, q: &DVector<f64>) -> f64;

    fn name(&self) -> &str {
        "custom"
    }
}

#[derive(Clone)]
pub enum ModelKind {
    /// Point mass `mass` on a massless rod of length `length`.
    Pendulum {
        mass: f64,
        length: f64,
        gravity: f64,
    },
    /// Point masses at the ends of two links; `q[1]` is relative to link one.
    TwoLinkPlanar {
        m1: f64,
        m2: f64,
        l1: f64,
        l2: f64,
        gravity: f64,
    },
    Custom(Arc<dyn CustomDynamics>),
}

impl fmt::Debug for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::Pendulum {
                mass,
                length,
                gravity,
            } => f
                .debug_struct("Pendulum")
                .field("mass", mass)
                .field("length", length)
                .field("gravity", gravity)
                .finish(),
            ModelKind::TwoLinkPlanar {
                m1,
                m2,
                l1,
                l2,
                gravity,
            } => f
                .debug_struct("TwoLinkPlanar")
                .field("m1", m1)
                .field("m2", m2)
                .field("l1", l1)
                .field("l2", l2)
                .field("gravity", gravity)
                .finish(),
            ModelKind::Custom(c) => f.debug_tuple("Custom").field(&c.name()).finish(),
        }
    }
}

/// Plant-side friction `F(t, q̇)`. The controller never reads it.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Friction {
    #[default]
    Zero,
    /// `b q̇`
    Viscous { coefficient: f64 },
    /// `f_c tanh(q̇ / ε)` with ε = [`COULOMB_SMOOTHING`].
    SmoothCoulomb { level: f64 },
}

impl Friction {
    pub fn is_zero(&self) -> bool {
        matches!(self, Friction::Zero)
    }
}

/// An immutable Euler-Lagrange model. Cheap to clone and safe to share
/// across threads.
#[derive(Debug, Clone)]
pub struct RobotModel {
    kind: ModelKind,
    friction: Friction,
    coriolis_scale: f64,
}

impl RobotModel {
    pub fn pendulum(mass: f64, length: f64, gravity: f64) -> Result<Self> {
        positive("mass", mass)?;
        positive("length", length)?;
        finite_param("gravity", gravity)?;
        Ok(Self::from_kind(ModelKind::Pendulum {
            mass,
            length,
            gravity,
        }))
    }

    pub fn two_link_planar(m1: f64, m2: f64, l1: f64, l2: f64, gravity: f64) -> Result<Self> {
        positive("m1", m1)?;
        positive("m2", m2)?;
        positive("l1", l1)?;
        positive("l2", l2)?;
        finite_param("gravity", gravity)?;
        Ok(Self::from_kind(ModelKind::TwoLinkPlanar {
            m1,
            m2,
            l1,
            l2,
            gravity,
        }))
    }

    pub fn custom(dynamics: Arc<dyn CustomDynamics>) -> Result<Self> {
        if dynamics.dof() == 0 {
            return Err(Error::Model(
                "custom model must have at least one DOF".into(),
            ));
        }
        Ok(Self::from_kind(ModelKind::Custom(dynamics)))
    }

    fn from_kind(kind: ModelKind) -> Self {
        Self {
            kind,
            friction: Friction::Zero,
            coriolis_scale: 1.0,
        }
    }

    pub fn with_friction(mut self, friction: Friction) -> Result<Self> {
        match friction {
            Friction::Zero => {}
            Friction::Viscous { coefficient } => finite_param("viscous coefficient", coefficient)?,
            Friction::SmoothCoulomb { level } => finite_param("coulomb level", level)?,
        }
        self.friction = friction;
        Ok(self)
    }

    /// Fault-injection hook: multiplies the derived Coriolis matrix by
    /// `scale`. Anything other than 1.0 breaks the skew-symmetry property and
    /// exists so verification tooling can be shown to catch it.
    pub fn with_coriolis_scale(mut self, scale: f64) -> Result<Self> {
        finite_param("coriolis scale", scale)?;
        self.coriolis_scale = scale;
        Ok(self)
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn friction(&self) -> Friction {
        self.friction
    }

    pub fn coriolis_scale(&self) -> f64 {
        self.coriolis_scale
    }

    pub fn dof(&self) -> usize {
        match &self.kind {
            ModelKind::Pendulum { .. } => 1,
            ModelKind::TwoLinkPlanar { .. } => 2,
            ModelKind::Custom(c) => c.dof(),
        }
    }

    pub fn name(&self) -> &str {
        match &self.kind {
            ModelKind::Pendulum { .. } => "pendulum_1dof",
            ModelKind::TwoLinkPlanar { .. } => "two_link_planar",
            ModelKind::Custom(c) => c.name(),
        }
    }

    /// Named physical parameters (empty for custom models).
    pub fn parameters(&self) -> Vec<(&'static str, f64)> {
        match self.kind {
            ModelKind::Pendulum {
                mass,
                length,
                gravity,
            } => vec![("m", mass), ("l", length), ("g", gravity)],
            ModelKind::TwoLinkPlanar {
                m1,
                m2,
                l1,
                l2,
                gravity,
            } => vec![
                ("m1", m1),
                ("m2", m2),
                ("l1", l1),
                ("l2", l2),
                ("g", gravity),
            ],
            ModelKind::Custom(_) => Vec::new(),
        }
    }

    fn check_q(&self, q: &DVector<f64>) -> Result<()> {
        check_len("q", self.dof(), q.len())?;
        check_finite("q", q.as_slice())
    }

    fn check_qdot(&self, qdot: &DVector<f64>) -> Result<()> {
        check_len("qdot", self.dof(), qdot.len())?;
        check_finite("qdot", qdot.as_slice())
    }

    fn raw_mass_matrix(&self, q: &DVector<f64>) -> DMatrix<f64> {
        match self.kind {
            ModelKind::Pendulum { mass, length, .. } => {
                DMatrix::from_element(1, 1, mass * length * length)
            }
            ModelKind::TwoLinkPlanar { m1, m2, l1, l2, .. } => {
                let c2 = q[1].cos();
                let m22 = m2 * l2 * l2;
                let m12 = m22 + m2 * l1 * l2 * c2;
                let m11 = (m1 + m2) * l1 * l1 + m22 + 2.0 * m2 * l1 * l2 * c2;
                DMatrix::from_row_slice(2, 2, &[m11, m12, m12, m22])
            }
            ModelKind::Custom(ref c) => c.mass_matrix(q),
        }
    }

    /// Inertia matrix `M(q)`, validated symmetric positive definite.
    pub fn mass_matrix(&self, q: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_q(q)?;
        let m = self.raw_mass_matrix(q);
        self.validate_mass(q, &m)?;
        Ok(m)
    }

    /// Cholesky factor of `M(q)`. Fails if any pivot is non-positive.
    pub fn factor_mass(&self, q: &DVector<f64>) -> Result<Cholesky<f64, Dyn>> {
        self.check_q(q)?;
        let m = self.raw_mass_matrix(q);
        self.validate_mass(q, &m)
    }

    fn validate_mass(&self, q: &DVector<f64>, m: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
        let n = self.dof();
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::Model(format!(
                "mass matrix is {}x{}, expected {n}x{n}",
                m.nrows(),
                m.ncols()
            )));
        }
        check_finite("mass matrix", m.as_slice())?;
        let scale = m.amax().max(1.0);
        if symmetry_defect(m) > 1e-12 * scale {
            return Err(Error::Model(format!(
                "mass matrix is not symmetric at q = {:?}",
                q.as_slice()
            )));
        }
        Cholesky::new(m.clone()).ok_or_else(|| Error::NotPositiveDefinite {
            q: q.as_slice().to_vec(),
        })
    }

    /// Partial derivatives `∂M/∂q_k`, one matrix per joint.
    pub fn mass_matrix_partials(&self, q: &DVector<f64>) -> Result<Vec<DMatrix<f64>>> {
        self.check_q(q)?;
        let n = self.dof();
        let partials = match self.kind {
            ModelKind::Pendulum { .. } => vec![DMatrix::zeros(1, 1)],
            ModelKind::TwoLinkPlanar { m2, l1, l2, .. } => {
                let k = m2 * l1 * l2 * q[1].sin();
                vec![
                    DMatrix::zeros(2, 2),
                    DMatrix::from_row_slice(2, 2, &[-2.0 * k, -k, -k, 0.0]),
                ]
            }
            ModelKind::Custom(ref c) => (0..n)
                .map(|k| {
                    let mut plus = q.clone();
                    let mut minus = q.clone();
                    plus[k] += CUSTOM_FD_STEP;
                    minus[k] -= CUSTOM_FD_STEP;
                    (c.mass_matrix(&plus) - c.mass_matrix(&minus)) / (2.0 * CUSTOM_FD_STEP)
                })
                .collect(),
        };
        Ok(partials)
    }

    /// Christoffel symbols of the first kind, `out[k][(i, j)] = c_{ijk}` with
    /// `c_{ijk} = ½(∂M_ij/∂q_k + ∂M_ik/∂q_j − ∂M_jk/∂q_i)`.
    pub fn christoffel_symbols(&self, q: &DVector<f64>) -> Result<Vec<DMatrix<f64>>> {
        let dm = self.mass_matrix_partials(q)?;
        let n = self.dof();
        Ok((0..n)
            .map(|k| {
                DMatrix::from_fn(n, n, |i, j| {
                    0.5 * (dm[k][(i, j)] + dm[j][(i, k)] - dm[i][(j, k)])
                })
            })
            .collect())
    }

    /// Coriolis/centrifugal matrix `C_ij = Σ_k c_{ijk} q̇_k`.
    pub fn coriolis_matrix(&self, q: &DVector<f64>, qdot: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_qdot(qdot)?;
        let gamma = self.christoffel_symbols(q)?;
        let n = self.dof();
        let mut c = DMatrix::zeros(n, n);
        for (k, g) in gamma.iter().enumerate() {
            c += g * qdot[k];
        }
        if self.coriolis_scale != 1.0 {
            c *= self.coriolis_scale;
        }
        Ok(c)
    }

    pub fn potential_energy(&self, q: &DVector<f64>) -> Result<f64> {
        self.check_q(q)?;
        Ok(match self.kind {
            ModelKind::Pendulum {
                mass,
                length,
                gravity,
            } => mass * gravity * length * q[0].sin(),
            ModelKind::TwoLinkPlanar {
                m1,
                m2,
                l1,
                l2,
                gravity,
            } => (m1 + m2) * gravity * l1 * q[0].sin() + m2 * gravity * l2 * (q[0] + q[1]).sin(),
            ModelKind::Custom(ref c) => c.potential_energy(q),
        })
    }

    /// Gravity torque `G(q) = ∂U/∂q`.
    pub fn gravity_vector(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_q(q)?;
        Ok(match self.kind {
            ModelKind::Pendulum {
                mass,
                length,
                gravity,
            } => DVector::from_element(1, mass * gravity * length * q[0].cos()),
            ModelKind::TwoLinkPlanar {
                m1,
                m2,
                l1,
                l2,
                gravity,
            } => {
                let g2 = m2 * gravity * l2 * (q[0] + q[1]).cos();
                DVector::from_column_slice(&[(m1 + m2) * gravity * l1 * q[0].cos() + g2, g2])
            }
            ModelKind::Custom(ref c) => DVector::from_fn(self.dof(), |k, _| {
                let mut plus = q.clone();
                let mut minus = q.clone();
                plus[k] += CUSTOM_FD_STEP;
                minus[k] -= CUSTOM_FD_STEP;
                (c.potential_energy(&plus) - c.potential_energy(&minus)) / (2.0 * CUSTOM_FD_STEP)
            }),
        })
    }

    /// Plant friction `F(t, q̇)`.
    pub fn friction_vector(&self, t: f64, qdot: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_qdot(qdot)?;
        if t.is_nan() || t < 0.0 {
            return Err(Error::Setup(format!(
                "friction evaluated at negative time {t}"
            )));
        }
        Ok(match self.friction {
            Friction::Zero => DVector::zeros(qdot.len()),
            Friction::Viscous { coefficient } => qdot * coefficient,
            Friction::SmoothCoulomb { level } => {
                qdot.map(|v| level * (v / COULOMB_SMOOTHING).tanh())
            }
        })
    }

    /// `Ṁ(q) = C(q, q̇) + Cᵀ(q, q̇)`.
    pub fn mass_matrix_rate(&self, q: &DVector<f64>, qdot: &DVector<f64>) -> Result<DMatrix<f64>> {
        let c = self.coriolis_matrix(q, qdot)?;
        Ok(&c + c.transpose())
    }

    /// `Ṁ = Σ_k (∂M/∂q_k) q̇_k`, computed from the inertia partials without
    /// going through `C`.
    pub fn mass_matrix_rate_direct(
        &self,
        q: &DVector<f64>,
        qdot: &DVector<f64>,
    ) -> Result<DMatrix<f64>> {
        self.check_qdot(qdot)?;
        let dm = self.mass_matrix_partials(q)?;
        let n = self.dof();
        Ok(dm
            .iter()
            .enumerate()
            .fold(DMatrix::zeros(n, n), |acc, (k, d)| acc + d * qdot[k]))
    }

    /// Returns `‖S + Sᵀ‖∞` for `S = Ṁ − 2C`, with `Ṁ` taken from the inertia
    /// partials so a wrong `C` shows up as a non-zero residual.
    pub fn check_skew_symmetry(&self, q: &DVector<f64>, qdot: &DVector<f64>) -> Result<f64> {
        let mdot = self.mass_matrix_rate_direct(q, qdot)?;
        let c = self.coriolis_matrix(q, qdot)?;
        let s = mdot - c * 2.0;
        Ok(inf_norm(&(&s + s.transpose())))
    }

    pub fn kinetic_energy(&self, q: &DVector<f64>, qdot: &DVector<f64>) -> Result<f64> {
        self.check_qdot(qdot)?;
        let m = self.mass_matrix(q)?;
        Ok(0.5 * qdot.dot(&(m * qdot)))
    }

    pub fn total_energy(&self, q: &DVector<f64>, qdot: &DVector<f64>) -> Result<f64> {
        Ok(self.kinetic_energy(q, qdot)? + self.potential_energy(q)?)
    }

    /// Forward dynamics `q̈ = M⁻¹(τ − C q̇ − G − F)`.
    pub fn forward_dynamics(
        &self,
        t: f64,
        q: &DVector<f64>,
        qdot: &DVector<f64>,
        tau: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        check_len("tau", self.dof(), tau.len())?;
        let chol = self.factor_mass(q)?;
        let c = self.coriolis_matrix(q, qdot)?;
        let rhs = tau - c * qdot - self.gravity_vector(q)? - self.friction_vector(t, qdot)?;
        Ok(chol.solve(&rhs))
    }
}

fn positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::Model(format!(
            "{name} must be positive, got {value}"
        )))
    }
}

fn finite_param(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::Model(format!("{name} must be finite, got {value}")))
    }
}

/// Max absolute row sum.
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `‖M − Mᵀ‖∞`
pub fn symmetry_defect(m: &DMatrix<f64>) -> f64 {
    if m.nrows() != m.ncols() {
        return f64::INFINITY;
    }
    inf_norm(&(m - m.transpose()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn two_link() -> RobotModel {
        RobotModel::two_link_planar(1.0, 1.0, 1.0, 1.0, 9.81).unwrap()
    }

    #[test]
    fn pendulum_inertia_is_constant() {
        let p = RobotModel::pendulum(2.0, 1.0, 9.81).unwrap();
        let m = p.mass_matrix(&v(&[0.7])).unwrap();
        assert_eq!(m, DMatrix::from_element(1, 1, 2.0));
        let c = p.coriolis_matrix(&v(&[0.3]), &v(&[5.0])).unwrap();
        assert_eq!(c[(0, 0)], 0.0);
        assert_eq!(
            p.mass_matrix_rate(&v(&[0.3]), &v(&[5.0])).unwrap()[(0, 0)],
            0.0
        );
        assert_eq!(p.check_skew_symmetry(&v(&[0.3]), &v(&[5.0])).unwrap(), 0.0);
    }

    #[test]
    fn pendulum_gravity_uses_cosine() {
        let p = RobotModel::pendulum(1.0, 1.0, 9.81).unwrap();
        assert!(p.gravity_vector(&v(&[FRAC_PI_2])).unwrap()[0].abs() < 1e-15);
        assert_eq!(p.gravity_vector(&v(&[0.0])).unwrap()[0], 9.81);
    }

    #[test]
    fn two_link_coriolis_vanishes_at_rest() {
        let c = two_link()
            .coriolis_matrix(&v(&[0.3, 0.5]), &v(&[0.0, 0.0]))
            .unwrap();
        assert_eq!(c, DMatrix::zeros(2, 2));
    }

    #[test]
    fn two_link_coriolis_matches_textbook_form() {
        let model = RobotModel::two_link_planar(1.3, 0.7, 0.9, 1.1, 9.81).unwrap();
        let (q, qd) = (v(&[0.4, -1.2]), v(&[0.8, -0.3]));
        let c = model.coriolis_matrix(&q, &qd).unwrap();
        let h = -0.7 * 0.9 * 1.1 * q[1].sin();
        let expected =
            DMatrix::from_row_slice(2, 2, &[h * qd[1], h * (qd[0] + qd[1]), -h * qd[0], 0.0]);
        assert!((c - expected).amax() < 1e-14);
    }

    #[test]
    fn friction_configurations() {
        let p = RobotModel::pendulum(1.0, 1.0, 9.81).unwrap();
        assert_eq!(p.friction_vector(3.0, &v(&[2.0])).unwrap()[0], 0.0);
        let visc = p
            .clone()
            .with_friction(Friction::Viscous { coefficient: 0.5 })
            .unwrap();
        assert_eq!(visc.friction_vector(0.0, &v(&[2.0])).unwrap()[0], 1.0);
        let coul = p
            .with_friction(Friction::SmoothCoulomb { level: 0.3 })
            .unwrap();
        assert_eq!(coul.friction_vector(0.0, &v(&[0.0])).unwrap()[0], 0.0);
        assert!((coul.friction_vector(0.0, &v(&[1.0])).unwrap()[0] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn dimension_and_finiteness_errors() {
        let m = two_link();
        assert!(matches!(
            m.mass_matrix(&v(&[0.1])),
            Err(Error::Dimension {
                expected: 2,
                got: 1,
                ..
            })
        ));
        assert!(matches!(
            m.mass_matrix(&v(&[0.1, f64::NAN])),
            Err(Error::NonFinite(_))
        ));
        assert!(matches!(
            m.coriolis_matrix(&v(&[0.1, 0.2]), &v(&[1.0, 2.0, 3.0])),
            Err(Error::Dimension { .. })
        ));
        assert!(JointState::from_slices(&[1.0], &[1.0, 2.0]).is_err());
        assert!(JointState::from_slices(&[], &[]).is_err());
        assert!(JointState::from_slices(&[f64::INFINITY], &[0.0]).is_err());
    }

    #[test]
    fn rejects_nonpositive_parameters() {
        assert!(RobotModel::pendulum(0.0, 1.0, 9.81).is_err());
        assert!(RobotModel::pendulum(1.0, -1.0, 9.81).is_err());
        assert!(RobotModel::two_link_planar(1.0, 1.0, 1.0, 0.0, 9.81).is_err());
    }

    struct Indefinite;
    impl CustomDynamics for Indefinite {
        fn dof(&self) -> usize {
            2
        }
        fn mass_matrix(&self, q: &DVector<f64>) -> DMatrix<f64> {
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, q[0]])
        }
        fn potential_energy(&self, _q: &DVector<f64>) -> f64 {
            0.0
        }
    }

    #[test]
    fn cholesky_rejects_indefinite_inertia() {
        let m = RobotModel::custom(Arc::new(Indefinite)).unwrap();
        assert!(m.mass_matrix(&v(&[1.0, 0.0])).is_ok());
        assert!(matches!(
            m.mass_matrix(&v(&[-1.0, 0.0])),
            Err(Error::NotPositiveDefinite { .. })
        ));
        assert!(m.factor_mass(&v(&[0.0, 0.0])).is_err());
    }
}
