//! Quadratic critic `V̂(e) = Ŵᵀφ(e)`, the model-free controller it induces,
//! and the normalized-gradient weight update applied at trigger instants.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use thiserror::Error;

use crate::dynamics::augmented_input_matrix;
use crate::scalar::Scalar;
use crate::{Matrix6, Vector6};

/// Number of quadratic monomials of a 6-vector.
pub const BASIS_DIM: usize = 21;

pub type Weights<T> = SVector<T, BASIS_DIM>;
pub type BasisJacobian<T> = SMatrix<T, BASIS_DIM, 6>;

/// Index pairs `(a, b)`, `a <= b`, of the monomials `e^a e^b`, row-major over the
/// upper triangle of `e eᵀ`: (0,0), (0,1), …, (0,5), (1,1), …, (5,5).
pub const BASIS_PAIRS: [(usize, usize); BASIS_DIM] = {
    let mut pairs = [(0, 0); BASIS_DIM];
    let mut k = 0;
    let mut a = 0;
    while a < 6 {
        let mut b = a;
        while b < 6 {
            pairs[k] = (a, b);
            k += 1;
            b += 1;
        }
        a += 1;
    }
    pairs
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CriticError {
    #[error("critic learning rate must be positive, got {0}")]
    LearningRate(f64),
    #[error("state cost Q must be symmetric positive semidefinite")]
    StateCost,
    #[error("input cost R must be symmetric positive definite")]
    InputCost,
}

/// Per-agent learning state: weights, held control and cost matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticState<T: Scalar> {
    pub weights: Weights<T>,
    pub learning_rate: T,
    pub held_control: Vector3<T>,
    q: Matrix6<T>,
    r: Matrix3<T>,
    r_inv: Matrix3<T>,
    l_ii: T,
}

impl<T: Scalar> CriticState<T> {
    pub fn new(
        weights: Weights<T>,
        learning_rate: T,
        q: Matrix6<T>,
        r: Matrix3<T>,
        l_ii: T,
    ) -> Result<Self, CriticError> {
        if !(learning_rate > T::zero()) {
            return Err(CriticError::LearningRate(learning_rate.as_f64()));
        }
        let tol = T::default_epsilon().sqrt();
        if !is_symmetric(&q) || min_eigenvalue(&q) < -tol * q.amax().max(T::one()) {
            return Err(CriticError::StateCost);
        }
        if !is_symmetric(&r) || !(min_eigenvalue(&r) > T::zero()) {
            return Err(CriticError::InputCost);
        }
        let r_inv = r.try_inverse().ok_or(CriticError::InputCost)?;
        Ok(Self { weights, learning_rate, held_control: Vector3::zeros(), q, r, r_inv, l_ii })
    }

    pub fn q(&self) -> &Matrix6<T> {
        &self.q
    }

    pub fn r(&self) -> &Matrix3<T> {
        &self.r
    }

    pub fn l_ii(&self) -> T {
        self.l_ii
    }

    /// Instantaneous cost `eᵀQe + uᵀRu`.
    pub fn stage_cost(&self, e: &Vector6<T>, u: &Vector3<T>) -> T {
        (e.transpose() * self.q * e)[0] + (u.transpose() * self.r * u)[0]
    }
}

fn is_symmetric<const D: usize, T: Scalar>(m: &SMatrix<T, D, D>) -> bool {
    (m - m.transpose()).amax() <= T::default_epsilon() * T::lit(16.0) * m.amax().max(T::one())
}

pub(crate) fn min_eigenvalue<const D: usize, T: Scalar>(m: &SMatrix<T, D, D>) -> T
where
    nalgebra::Const<D>: nalgebra::DimSub<nalgebra::U1>,
    nalgebra::DefaultAllocator: nalgebra::allocator::Allocator<nalgebra::DimDiff<nalgebra::Const<D>, nalgebra::U1>>,
{
    m.symmetric_eigenvalues().min()
}

pub(crate) fn max_eigenvalue<const D: usize, T: Scalar>(m: &SMatrix<T, D, D>) -> T
where
    nalgebra::Const<D>: nalgebra::DimSub<nalgebra::U1>,
    nalgebra::DefaultAllocator: nalgebra::allocator::Allocator<nalgebra::DimDiff<nalgebra::Const<D>, nalgebra::U1>>,
{
    m.symmetric_eigenvalues().max()
}

/// The 21 quadratic monomials of `e` in [`BASIS_PAIRS`] order.
pub fn phi<T: Scalar>(e: &Vector6<T>) -> Weights<T> {
    Weights::from_fn(|k, _| {
        let (a, b) = BASIS_PAIRS[k];
        e[a] * e[b]
    })
}

/// Exact Jacobian `∂φ/∂eᵀ` (21×6, at most two nonzeros per row).
pub fn grad_phi<T: Scalar>(e: &Vector6<T>) -> BasisJacobian<T> {
    let mut jac = BasisJacobian::zeros();
    for (k, &(a, b)) in BASIS_PAIRS.iter().enumerate() {
        jac[(k, a)] += e[b];
        jac[(k, b)] += e[a];
    }
    jac
}

pub fn value<T: Scalar>(c: &CriticState<T>, e: &Vector6<T>) -> T {
    c.weights.dot(&phi(e))
}

/// `û = −½ l_ii R⁻¹ Y(e)ᵀ (∇φ)ᵀ Ŵ`.
pub fn control_from_critic<T: Scalar>(c: &CriticState<T>, e: &Vector6<T>) -> Vector3<T> {
    let grad_v = grad_phi(e).transpose() * c.weights;
    let y = augmented_input_matrix(e);
    c.r_inv * (y.transpose() * grad_v) * (T::lit(-0.5) * c.l_ii)
}

/// Hamiltonian residual `k₁ᵀŴ + eᵀQe + uᵀRu` with `k₁ = ∇φ ė`.
pub fn hamiltonian_residual<T: Scalar>(
    c: &CriticState<T>,
    e: &Vector6<T>,
    e_dot: &Vector6<T>,
    u: &Vector3<T>,
) -> T {
    let k1 = grad_phi(e) * e_dot;
    k1.dot(&c.weights) + c.stage_cost(e, u)
}

/// One normalized-gradient step `Ŵ⁺ = Ŵ − l_c k (k₁ᵀŴ + eᵀQe + uᵀRu)`,
/// `k = k₁ / (k₁ᵀk₁ + 1)²`.
pub fn critic_update<T: Scalar>(
    c: &CriticState<T>,
    e: &Vector6<T>,
    e_dot: &Vector6<T>,
    u: &Vector3<T>,
) -> CriticState<T> {
    let k1 = grad_phi(e) * e_dot;
    let norm = k1.norm_squared() + T::one();
    let k = k1 / (norm * norm);
    let residual = k1.dot(&c.weights) + c.stage_cost(e, u);
    let mut next = c.clone();
    next.weights = c.weights - k * (c.learning_rate * residual);
    next
}

/// Policy evaluation with the previously held control, then policy improvement
/// with the updated weights. The returned state holds the new control.
pub fn policy_iteration_step<T: Scalar>(
    c: &CriticState<T>,
    e: &Vector6<T>,
    e_dot: &Vector6<T>,
) -> (CriticState<T>, Vector3<T>) {
    let mut next = critic_update(c, e, e_dot, &c.held_control);
    let u = control_from_critic(&next, e);
    next.held_control = u;
    (next, u)
}
