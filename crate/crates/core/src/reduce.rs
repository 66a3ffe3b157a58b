//! Fermionic partial trace.
//!
//! Tracing out one particle from an `N`-fermion state is
//! `ρ ↦ (1/N) Σ_k f_k ρ f†_k` for any orthonormal single-particle basis
//! `{f_k}`; the result lives on `F_{N-1}` and keeps unit trace.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fock::{self, DensityMatrix, FockBasis};
use crate::linalg::{self, CMatrix};
use crate::tol;

/// `(1/N) Σ_k f_k X f†_k` for an arbitrary square operator `X` on `basis`.
pub(crate) fn trace_out_one_matrix(
    basis: &Arc<FockBasis>,
    x: &CMatrix,
    sp_basis: Option<&CMatrix>,
) -> Result<(Arc<FockBasis>, CMatrix)> {
    let n = basis.num_particles();
    if n == 0 {
        return Err(Error::TraceVacuum);
    }
    let d = basis.dim();
    if x.shape() != (d, d) {
        return Err(Error::DimensionMismatch {
            expected: (d, d),
            found: x.shape(),
        });
    }
    let lowers = fock::rotated_annihilations(sp_basis, basis)?;
    let target = lowers[0].codomain().clone();
    let mut acc = CMatrix::zeros(target.dim(), target.dim());
    for f in &lowers {
        acc += f.conjugate(x);
    }
    acc /= linalg::real(n as f64);
    Ok((target, acc))
}

/// Trace out one fermion. `sp_basis` is the unitary `V` defining
/// `f†_k = Σ_l V_{kl} a†_l`; `None` uses the bare modes.
pub fn trace_out_one(rho: &DensityMatrix, sp_basis: Option<&CMatrix>) -> Result<DensityMatrix> {
    let (target, m) = trace_out_one_matrix(rho.basis(), rho.matrix(), sp_basis)?;
    DensityMatrix::new(target, hermitize(m))
}

/// Single-particle reduced state `Tr_{N-1} ρ`, obtained by tracing out
/// `N - 1` particles one at a time.
pub fn trace_to_single(rho: &DensityMatrix) -> Result<DensityMatrix> {
    let n = rho.basis().num_particles();
    if n == 0 {
        return Err(Error::TraceVacuum);
    }
    let mut basis = rho.basis().clone();
    let mut m = rho.matrix().clone();
    for _ in 1..n {
        let (b, next) = trace_out_one_matrix(&basis, &m, None)?;
        basis = b;
        m = next;
    }

    let direct = one_body_density(rho)?;
    let gap = linalg::max_abs_diff(&m, &direct);
    if gap > tol::ORACLE {
        return Err(Error::Consistency(format!(
            "iterated partial trace disagrees with one-body density by {gap:e}"
        )));
    }
    DensityMatrix::new(basis, hermitize(m))
}

/// `<i|ρ_r|j> = (1/N) Tr(a†_j a_i ρ)`.
fn one_body_density(rho: &DensityMatrix) -> Result<CMatrix> {
    let basis = rho.basis();
    let n = basis.num_particles();
    let modes = basis.num_modes();
    let lowers: Vec<_> = (0..modes)
        .map(|k| fock::annihilation(k, basis))
        .collect::<Result<_>>()?;
    let mut out = CMatrix::zeros(modes, modes);
    for i in 0..modes {
        // a_i ρ a†_j summed over the diagonal gives Tr(a†_j a_i ρ)
        let left = lowers[i].matrix() * rho.matrix();
        for j in 0..modes {
            let prod = &left * lowers[j].matrix().adjoint();
            out[(i, j)] = linalg::trace(&prod) / linalg::real(n as f64);
        }
    }
    Ok(out)
}

fn hermitize(m: CMatrix) -> CMatrix {
    (&m + m.adjoint()).map(|z| z * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{enumerate_basis, slater_vector};
    use crate::linalg::{real, CVector, ONE};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn slater_state(modes_occ: &[usize], modes: usize) -> DensityMatrix {
        let b = Arc::new(enumerate_basis(modes_occ.len(), modes).unwrap());
        DensityMatrix::pure(b, &slater_vector(modes_occ, modes).unwrap()).unwrap()
    }

    fn diag(entries: &[f64]) -> CMatrix {
        CMatrix::from_diagonal(&CVector::from_iterator(
            entries.len(),
            entries.iter().map(|&x| real(x)),
        ))
    }

    #[test]
    fn pair_state_reduces_to_half_half() {
        // a†_μ a†_k |0><0| a_k a_μ with μ = 2, k = 0 in four modes
        let rho = slater_state(&[2, 0], 4);
        let r = trace_out_one(&rho, None).unwrap();
        assert!(linalg::max_abs_diff(r.matrix(), &diag(&[0.5, 0.0, 0.5, 0.0])) < 1e-15);
    }

    #[test]
    fn single_particle_reduces_to_vacuum() {
        let rho = slater_state(&[1], 3);
        let r = trace_out_one(&rho, None).unwrap();
        assert_eq!(r.basis().num_particles(), 0);
        assert_eq!(r.matrix().shape(), (1, 1));
        assert!((r.matrix()[(0, 0)] - ONE).norm() < 1e-15);
    }

    #[test]
    fn vacuum_cannot_be_traced() {
        let b = Arc::new(enumerate_basis(0, 3).unwrap());
        let rho = DensityMatrix::new(b, CMatrix::identity(1, 1)).unwrap();
        assert_eq!(trace_out_one(&rho, None).unwrap_err(), Error::TraceVacuum);
        assert_eq!(trace_to_single(&rho).unwrap_err(), Error::TraceVacuum);
    }

    #[test]
    fn triple_slater_reduces_to_thirds() {
        let rho = slater_state(&[0, 1, 2], 4);
        let r = trace_to_single(&rho).unwrap();
        let third = 1.0 / 3.0;
        assert!(linalg::max_abs_diff(r.matrix(), &diag(&[third, third, third, 0.0])) < 1e-14);
    }

    #[test]
    fn two_particle_input_matches_single_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let b = Arc::new(enumerate_basis(2, 4).unwrap());
        let psi = linalg::random_state(b.dim(), &mut rng);
        let rho = DensityMatrix::pure(b, &psi).unwrap();
        let a = trace_out_one(&rho, None).unwrap();
        let t = trace_to_single(&rho).unwrap();
        assert!(linalg::max_abs_diff(a.matrix(), t.matrix()) < 1e-15);
    }

    #[test]
    fn basis_choice_does_not_matter() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let b = Arc::new(enumerate_basis(3, 5).unwrap());
        let psi = linalg::random_state(b.dim(), &mut rng);
        let rho = DensityMatrix::pure(b, &psi).unwrap();
        let plain = trace_out_one(&rho, None).unwrap();
        for _ in 0..50 {
            let v = linalg::random_unitary(5, &mut rng);
            let rotated = trace_out_one(&rho, Some(&v)).unwrap();
            assert!(linalg::max_abs_diff(plain.matrix(), rotated.matrix()) < 1e-12);
        }
    }

    #[test]
    fn rejects_non_unitary_single_particle_basis() {
        let rho = slater_state(&[0, 1], 3);
        let v = CMatrix::identity(3, 3).map(|z| z * 2.0);
        assert!(matches!(
            trace_out_one(&rho, Some(&v)),
            Err(Error::NotUnitary { .. })
        ));
    }

    #[test]
    fn classical_mixture_reduces_to_occupation_marginals() {
        // Σ p(k⃗) |k⃗><k⃗| over three-fermion Slater states in five modes
        let modes = 5;
        let b = Arc::new(enumerate_basis(3, modes).unwrap());
        let weights: Vec<f64> = (0..b.dim()).map(|i| (i * 7 % 5 + 1) as f64).collect();
        let total: f64 = weights.iter().sum();
        let mut m = CMatrix::zeros(b.dim(), b.dim());
        for (i, w) in weights.iter().enumerate() {
            m[(i, i)] = real(w / total);
        }
        let rho = DensityMatrix::new(b.clone(), m).unwrap();
        let r = trace_to_single(&rho).unwrap();

        // independent marginal sum
        let mut expected = vec![0.0; modes];
        for (state, w) in b.states().iter().zip(&weights) {
            for &k in state {
                expected[k] += w / total / 3.0;
            }
        }
        assert!(linalg::max_abs_diff(r.matrix(), &diag(&expected)) < 1e-14);
    }
}
