//! Problems with known optimal values, shared by the unit tests and the
//! self-test suites.

use super::{BlockMatrix, BlockSpec, LinearFunctional, RMatrix, SdpProblem};
use crate::operators::CMatrix;

/// `minimize t` subject to `t − s = 3`, `s ⪰ 0`: optimal value 3.
pub fn scalar_bound_problem() -> SdpProblem {
    let mut p = SdpProblem::new(vec![BlockSpec::Free(1), BlockSpec::Symmetric(1)]);
    p.set_objective(LinearFunctional::new().with(0, BlockMatrix::Vector(vec![1.0])));
    p.add_constraint(
        LinearFunctional::new()
            .with(0, BlockMatrix::Vector(vec![1.0]))
            .with(1, BlockMatrix::Real(RMatrix::from_element(1, 1, -1.0))),
        3.0,
    );
    p.set_interior_point(vec![
        BlockMatrix::Vector(vec![4.0]),
        BlockMatrix::Real(RMatrix::from_element(1, 1, 1.0)),
    ]);
    p
}

/// `minimize ⟨A, X⟩` subject to `tr X = 1`, `X ⪰ 0`: optimal value `λ_min(A)`.
pub fn min_eigen_problem(a: BlockMatrix, spec: BlockSpec) -> SdpProblem {
    let n = match spec {
        BlockSpec::Symmetric(n) | BlockSpec::Hermitian(n) => n,
        _ => panic!("min_eigen_problem needs a matrix block"),
    };
    let mut p = SdpProblem::new(vec![spec]);
    p.set_objective(LinearFunctional::new().with(0, a));
    let eye = match spec {
        BlockSpec::Symmetric(_) => BlockMatrix::Real(RMatrix::identity(n, n)),
        _ => BlockMatrix::Complex(CMatrix::identity(n, n)),
    };
    p.add_constraint(LinearFunctional::new().with(0, eye), 1.0);
    let start = match spec {
        BlockSpec::Symmetric(_) => BlockMatrix::Real(RMatrix::identity(n, n) / n as f64),
        _ => BlockMatrix::Complex(CMatrix::identity(n, n).map(|z| z / n as f64)),
    };
    p.set_interior_point(vec![start]);
    p
}

/// `minimize ⟨diag(1, 2), X⟩` subject to `tr X = 1`, `X ⪰ 0`: optimal value 1.
pub fn diagonal_eigen_problem() -> SdpProblem {
    min_eigen_problem(
        BlockMatrix::Real(RMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            1.0, 2.0,
        ]))),
        BlockSpec::Symmetric(2),
    )
}
