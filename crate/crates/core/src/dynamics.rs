//! Rigid-body attitude dynamics in Modified Rodrigues Parameters, the torque
//! compensator, and the per-agent consensus / augmented errors.
//!
//! The simulator integrates the physical states `(sigma, omega, tau)` and
//! derives `delta` and `e = [delta; tau]` algebraically; the drift of the
//! augmented system is never evaluated.

use nalgebra::{Cholesky, Matrix3, SMatrix, Vector3, U3};
use thiserror::Error;

use crate::graph::{GraphError, Topology};
use crate::scalar::Scalar;
use crate::{Vector6};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("inertia matrix is not symmetric (max asymmetry {asymmetry:e})")]
    InertiaNotSymmetric { asymmetry: f64 },
    #[error("inertia matrix is not positive definite")]
    InertiaNotPositiveDefinite,
    #[error("inertia matrix has non-finite entries")]
    InertiaNotFinite,
    #[error("missing held control for agent {0}")]
    MissingControl(usize),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Physical state of one rigid body: MRP attitude, body rate (rad/s) and torque (N·m).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidBodyState<T: Scalar> {
    pub sigma: Vector3<T>,
    pub omega: Vector3<T>,
    pub tau: Vector3<T>,
}

impl<T: Scalar> RigidBodyState<T> {
    pub fn new(sigma: Vector3<T>, omega: Vector3<T>, tau: Vector3<T>) -> Self {
        Self { sigma, omega, tau }
    }

    pub fn rest(sigma: Vector3<T>) -> Self {
        Self { sigma, omega: Vector3::zeros(), tau: Vector3::zeros() }
    }

    pub fn is_finite(&self) -> bool {
        self.sigma.iter().chain(self.omega.iter()).chain(self.tau.iter()).all(|x| x.is_finite())
    }

    /// `self + h * d`, used by the integrators.
    pub fn add_scaled(&self, d: &StateDerivative<T>, h: T) -> Self {
        Self {
            sigma: self.sigma + d.sigma_dot * h,
            omega: self.omega + d.omega_dot * h,
            tau: self.tau + d.tau_dot * h,
        }
    }
}

/// Time derivative of a [`RigidBodyState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative<T: Scalar> {
    pub sigma_dot: Vector3<T>,
    pub omega_dot: Vector3<T>,
    pub tau_dot: Vector3<T>,
}

/// Symmetric positive-definite inertia matrix (kg·m²) with its Cholesky factor cached.
#[derive(Debug, Clone)]
pub struct InertiaMatrix<T: Scalar> {
    j: Matrix3<T>,
    chol: Cholesky<T, U3>,
}

impl<T: Scalar> InertiaMatrix<T> {
    pub fn new(j: Matrix3<T>) -> Result<Self, DynamicsError> {
        if !j.iter().all(|x| x.is_finite()) {
            return Err(DynamicsError::InertiaNotFinite);
        }
        let scale = j.amax().max(T::one());
        let asymmetry = (j - j.transpose()).amax();
        if asymmetry > T::default_epsilon() * T::lit(16.0) * scale {
            return Err(DynamicsError::InertiaNotSymmetric { asymmetry: asymmetry.as_f64() });
        }
        let chol = Cholesky::new(j).ok_or(DynamicsError::InertiaNotPositiveDefinite)?;
        // Cholesky succeeds on tiny non-positive pivots in some edge cases.
        if chol.l_dirty().diagonal().iter().any(|&d| d <= T::zero()) {
            return Err(DynamicsError::InertiaNotPositiveDefinite);
        }
        Ok(Self { j, chol })
    }

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self, DynamicsError> {
        Self::new(Matrix3::from_fn(|r, c| T::lit(rows[r][c])))
    }

    pub fn matrix(&self) -> &Matrix3<T> {
        &self.j
    }

    /// `J⁻¹ v` through the cached factorization.
    pub fn solve(&self, v: &Vector3<T>) -> Vector3<T> {
        self.chol.solve(v)
    }
}

impl<T: Scalar> PartialEq for InertiaMatrix<T> {
    fn eq(&self, other: &Self) -> bool {
        self.j == other.j
    }
}

/// Augmented consensus error `e = [delta; tau]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentedError<T: Scalar> {
    e: Vector6<T>,
}

impl<T: Scalar> AugmentedError<T> {
    pub fn new(delta: Vector3<T>, tau: Vector3<T>) -> Self {
        let mut e = Vector6::zeros();
        e.fixed_rows_mut::<3>(0).copy_from(&delta);
        e.fixed_rows_mut::<3>(3).copy_from(&tau);
        Self { e }
    }

    pub fn from_vector(e: Vector6<T>) -> Self {
        Self { e }
    }

    pub fn delta(&self) -> Vector3<T> {
        self.e.fixed_rows::<3>(0).into_owned()
    }

    pub fn tau(&self) -> Vector3<T> {
        self.e.fixed_rows::<3>(3).into_owned()
    }

    pub fn e(&self) -> &Vector6<T> {
        &self.e
    }
}

/// Right-handed cross product, written out componentwise.
pub fn cross<T: Scalar>(a: &Vector3<T>, b: &Vector3<T>) -> Vector3<T> {
    let (x1, y1, z1) = (a[0], a[1], a[2]);
    let (x2, y2, z2) = (b[0], b[1], b[2]);
    Vector3::new(y1 * z2 - y2 * z1, x2 * z1 - x1 * z2, x1 * y2 - x2 * y1)
}

/// Skew-symmetric matrix `s×` with `s× v = s × v`.
pub fn skew<T: Scalar>(s: &Vector3<T>) -> Matrix3<T> {
    let z = T::zero();
    Matrix3::new(z, -s[2], s[1], s[2], z, -s[0], -s[1], s[0], z)
}

/// MRP kinematics matrix `G(σ) = ½(σ× + σσᵀ + ((1 − σᵀσ)/2) I)`.
pub fn mrp_kinematics_matrix<T: Scalar>(sigma: &Vector3<T>) -> Matrix3<T> {
    let half = T::lit(0.5);
    let diag = (T::one() - sigma.dot(sigma)) * half;
    (skew(sigma) + sigma * sigma.transpose() + Matrix3::identity() * diag) * half
}

/// `σ̇ = G(σ)ω`, `ω̇ = J⁻¹(−ω × Jω + τ)`.
pub fn body_derivative<T: Scalar>(
    s: &RigidBodyState<T>,
    inertia: &InertiaMatrix<T>,
) -> (Vector3<T>, Vector3<T>) {
    let sigma_dot = mrp_kinematics_matrix(&s.sigma) * s.omega;
    let momentum = inertia.matrix() * s.omega;
    let omega_dot = inertia.solve(&(s.tau - cross(&s.omega, &momentum)));
    (sigma_dot, omega_dot)
}

/// `δ_i = Σ_j a_ij (ω_i − ω_j) + α Σ_j a_ij (σ_i − σ_j)`.
pub fn consensus_error<T: Scalar>(
    i: usize,
    states: &[RigidBodyState<T>],
    topology: &Topology<T>,
    alpha: T,
) -> Result<Vector3<T>, GraphError> {
    topology.check_index(i)?;
    let me = &states[i];
    let mut rate = Vector3::zeros();
    let mut attitude = Vector3::zeros();
    for &j in topology.neighbors(i) {
        let a = topology.weight(i, j);
        rate += (me.omega - states[j].omega) * a;
        attitude += (me.sigma - states[j].sigma) * a;
    }
    Ok(rate + attitude * alpha)
}

/// Augmented errors of every agent, in index order.
pub fn augmented_errors<T: Scalar>(
    states: &[RigidBodyState<T>],
    topology: &Topology<T>,
    alpha: &[T],
) -> Vec<AugmentedError<T>> {
    (0..states.len())
        .map(|i| {
            let delta = consensus_error(i, states, topology, alpha[i]).expect("index in range");
            AugmentedError::new(delta, states[i].tau)
        })
        .collect()
}

/// Compensator drift and input gain: `f(τ) = −2τ`, `g(τ) = diag(cos² τ¹, cos² τ², cos² τ³)`.
pub fn compensator_terms<T: Scalar>(tau: &Vector3<T>) -> (Vector3<T>, Matrix3<T>) {
    let f = tau * T::lit(-2.0);
    let g = Matrix3::from_diagonal(&tau.map(|x| {
        let c = x.cos();
        c * c
    }));
    (f, g)
}

/// `Y(e) = [0; g(τ)]`, the input matrix of the augmented error system.
pub fn augmented_input_matrix<T: Scalar>(e: &Vector6<T>) -> SMatrix<T, 6, 3> {
    let tau = e.fixed_rows::<3>(3).into_owned();
    let (_, g) = compensator_terms(&tau);
    let mut y = SMatrix::<T, 6, 3>::zeros();
    y.fixed_view_mut::<3, 3>(3, 0).copy_from(&g);
    y
}

/// `τ̇_i = f(τ_i) + l_ii g(τ_i) û_i − Σ_j a_ij g(τ_j) û_j` using zero-order-held controls.
pub fn compensator_step_input<T: Scalar>(
    i: usize,
    held_u: &[Option<Vector3<T>>],
    states: &[RigidBodyState<T>],
    topology: &Topology<T>,
) -> Result<Vector3<T>, DynamicsError> {
    topology.check_index(i)?;
    let control = |k: usize| held_u.get(k).copied().flatten().ok_or(DynamicsError::MissingControl(k));
    let (f, g) = compensator_terms(&states[i].tau);
    let mut tau_dot = f + g * control(i)? * topology.l_ii(i);
    for &j in topology.neighbors(i) {
        let (_, gj) = compensator_terms(&states[j].tau);
        tau_dot -= gj * control(j)? * topology.weight(i, j);
    }
    Ok(tau_dot)
}

/// Derivative of the whole network under held controls.
pub fn network_derivative<T: Scalar>(
    states: &[RigidBodyState<T>],
    inertia: &[InertiaMatrix<T>],
    held_u: &[Option<Vector3<T>>],
    topology: &Topology<T>,
) -> Result<Vec<StateDerivative<T>>, DynamicsError> {
    (0..states.len())
        .map(|i| {
            let (sigma_dot, omega_dot) = body_derivative(&states[i], &inertia[i]);
            let tau_dot = compensator_step_input(i, held_u, states, topology)?;
            Ok(StateDerivative { sigma_dot, omega_dot, tau_dot })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn v(x: f64, y: f64, z: f64) -> Vector3<f64> {
        Vector3::new(x, y, z)
    }

    fn ring() -> Topology<f64> {
        Topology::from_rows(&[vec![0., 1.], vec![1., 0.]]).unwrap()
    }

    #[test]
    fn cross_products() {
        assert_eq!(cross(&v(1., 0., 0.), &v(0., 1., 0.)), v(0., 0., 1.));
        assert_eq!(cross(&v(1., 2., 3.), &v(4., 5., 6.)), v(-3., 6., -3.));
        let a = v(0.3, -1.7, 2.2);
        assert_eq!(cross(&a, &a), Vector3::zeros());
        assert_relative_eq!(cross(&a, &v(5., 1., -2.)), a.cross(&v(5., 1., -2.)), epsilon = 1e-15);
    }

    #[test]
    fn kinematics_matrix_values() {
        assert_eq!(mrp_kinematics_matrix(&Vector3::<f64>::zeros()), Matrix3::identity() * 0.25);
        let expected = Matrix3::new(1., 0., 0., 0., 0., -1., 0., 1., 0.) * 0.5;
        assert_eq!(mrp_kinematics_matrix(&v(1., 0., 0.)), expected);
    }

    #[test]
    fn torque_free_isotropic_body() {
        let j = InertiaMatrix::<f64>::new(Matrix3::identity()).unwrap();
        let s = RigidBodyState::new(v(0.1, 0.2, 0.3), v(1., 0., 0.), Vector3::zeros());
        let (sd, wd) = body_derivative(&s, &j);
        assert_eq!(wd, Vector3::zeros());
        assert_eq!(sd, mrp_kinematics_matrix(&s.sigma) * v(1., 0., 0.));

        let rest = RigidBodyState::rest(v(0.1, 0.0, -0.2));
        assert_eq!(body_derivative(&rest, &j), (Vector3::zeros(), Vector3::zeros()));
    }

    #[test]
    fn inertia_validation() {
        assert!(InertiaMatrix::<f64>::from_rows([[1., 0.1, 0.1], [0.1, 1., 0.1], [0.1, 0.1, 1.]]).is_ok());
        assert!(matches!(
            InertiaMatrix::<f64>::from_rows([[1., 0.2, 0.], [0.1, 1., 0.], [0., 0., 1.]]),
            Err(DynamicsError::InertiaNotSymmetric { .. })
        ));
        assert_eq!(
            InertiaMatrix::<f64>::from_rows([[1., 2., 0.], [2., 1., 0.], [0., 0., 1.]]),
            Err(DynamicsError::InertiaNotPositiveDefinite)
        );
        assert_eq!(
            InertiaMatrix::<f64>::from_rows([[0., 0., 0.], [0., 1., 0.], [0., 0., 1.]]),
            Err(DynamicsError::InertiaNotPositiveDefinite)
        );
    }

    #[test]
    fn ring_consensus_error() {
        let t = ring();
        let states = [
            RigidBodyState::new(v(0.1, 0., 0.), v(1., 0., 0.), Vector3::zeros()),
            RigidBodyState::new(v(0.1, 0., 0.), Vector3::zeros(), Vector3::zeros()),
        ];
        assert_eq!(consensus_error(0, &states, &t, 0.5).unwrap(), v(1., 0., 0.));
        assert_eq!(consensus_error(1, &states, &t, 0.5).unwrap(), v(-1., 0., 0.));
        assert!(consensus_error(2, &states, &t, 0.5).is_err());
    }

    #[test]
    fn compensator_values() {
        let (f, g) = compensator_terms(&Vector3::<f64>::zeros());
        assert_eq!(f, Vector3::zeros());
        assert_eq!(g, Matrix3::identity());
        assert_eq!(compensator_terms(&v(1., 1., 1.)).0, v(-2., -2., -2.));
        let (_, g) = compensator_terms(&v(FRAC_PI_2, 0., PI));
        assert_relative_eq!(g, Matrix3::from_diagonal(&v(0., 1., 1.)), epsilon = 1e-15);
    }

    #[test]
    fn input_matrix_shapes() {
        let y = augmented_input_matrix(&Vector6::<f64>::zeros());
        assert_eq!(y.fixed_view::<3, 3>(0, 0).into_owned(), Matrix3::zeros());
        assert_eq!(y.fixed_view::<3, 3>(3, 0).into_owned(), Matrix3::identity());
        let mut e = Vector6::zeros();
        e.fixed_rows_mut::<3>(3).fill(FRAC_PI_2);
        assert!(augmented_input_matrix(&e).amax() < 1e-30);
    }

    #[test]
    fn compensator_ring() {
        let t = ring();
        let states = [RigidBodyState::rest(Vector3::zeros()); 2];
        let held = [Some(v(1., 0., 0.)), Some(Vector3::zeros())];
        assert_eq!(compensator_step_input(0, &held, &states, &t).unwrap(), v(1., 0., 0.));
        let zero = [Some(Vector3::zeros()); 2];
        assert_eq!(compensator_step_input(1, &zero, &states, &t).unwrap(), Vector3::zeros());
        assert_eq!(
            compensator_step_input(0, &[Some(Vector3::zeros()), None], &states, &t),
            Err(DynamicsError::MissingControl(1))
        );
    }

    #[test]
    fn augmented_error_layout() {
        let ae = AugmentedError::new(v(1., 2., 3.), v(4., 5., 6.));
        assert_eq!(ae.e().as_slice(), &[1., 2., 3., 4., 5., 6.]);
        assert_eq!(ae.delta(), v(1., 2., 3.));
        assert_eq!(ae.tau(), v(4., 5., 6.));
    }
}
