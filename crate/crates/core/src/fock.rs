//! Antisymmetric Fock sectors and fermionic ladder operators as explicit
//! matrices.
//!
//! A sector `F_N` over `M` modes is enumerated as strictly increasing mode
//! tuples in lexicographic order. The reference state for a tuple
//! `(k_1 < ... < k_N)` is `a†_{k_1} ... a†_{k_N} |0>`, which fixes every sign:
//! creating mode `k` on a tuple `t` picks up `(-1)^{#{j in t : j < k}}`.
//!
//! Ladder operators move between sectors, so the sector just below the vacuum
//! and the one just above the full band exist as zero-dimensional bases. They
//! are never produced by [`enumerate_basis`] but let products such as
//! `a_k a†_l` be formed uniformly on every sector.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use itertools::Itertools;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, ONE, ZERO};
use crate::tol;

/// Modes are tracked as bits of a `u64`.
pub const MAX_MODES: usize = 64;

/// Largest sector dimension [`enumerate_basis`] will materialize.
pub const MAX_DIM: usize = 1 << 16;

#[derive(Clone)]
pub struct FockBasis {
    particles: isize,
    modes: usize,
    states: Vec<Vec<usize>>,
    masks: Vec<u64>,
    index: HashMap<u64, usize>,
}

impl PartialEq for FockBasis {
    fn eq(&self, other: &Self) -> bool {
        self.particles == other.particles && self.modes == other.modes
    }
}

impl Eq for FockBasis {}

impl fmt::Debug for FockBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F_{}^{} (dim {})", self.particles, self.modes, self.dim())
    }
}

impl fmt::Display for FockBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F_{}^{}", self.particles, self.modes)
    }
}

/// Binomial coefficient, `None` on overflow.
pub fn binomial(n: usize, k: usize) -> Option<usize> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > usize::MAX as u128 {
            return None;
        }
    }
    Some(acc as usize)
}

/// All `N`-fermion occupation states over `modes` modes, lexicographically.
pub fn enumerate_basis(particles: usize, modes: usize) -> Result<FockBasis> {
    if modes == 0 || modes > MAX_MODES {
        return Err(Error::InvalidModeCount(modes));
    }
    if particles > modes {
        return Err(Error::TooManyParticles { particles, modes });
    }
    match binomial(modes, particles) {
        Some(d) if d <= MAX_DIM => {}
        _ => return Err(Error::BasisTooLarge { particles, modes }),
    }
    Ok(FockBasis::sector(particles as isize, modes))
}

impl FockBasis {
    /// Sector with `particles` fermions; empty outside `0..=modes`.
    pub(crate) fn sector(particles: isize, modes: usize) -> FockBasis {
        let states: Vec<Vec<usize>> = if particles < 0 || particles as usize > modes {
            Vec::new()
        } else {
            (0..modes).combinations(particles as usize).collect()
        };
        let masks: Vec<u64> = states.iter().map(|s| mask_of(s)).collect();
        let index = masks.iter().enumerate().map(|(i, &m)| (m, i)).collect();
        FockBasis {
            particles,
            modes,
            states,
            masks,
            index,
        }
    }

    pub(crate) fn shifted(&self, delta: isize) -> FockBasis {
        FockBasis::sector(self.particles + delta, self.modes)
    }

    pub fn vacuum(modes: usize) -> Result<FockBasis> {
        enumerate_basis(0, modes)
    }

    pub fn single_particle(modes: usize) -> Result<FockBasis> {
        enumerate_basis(1, modes)
    }

    /// Particle count; zero for the (empty) sector below the vacuum.
    pub fn num_particles(&self) -> usize {
        self.particles.max(0) as usize
    }

    /// Signed particle count, distinguishing the empty sector below the vacuum.
    pub fn sector_index(&self) -> isize {
        self.particles
    }

    pub fn num_modes(&self) -> usize {
        self.modes
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// True for sectors produced by [`enumerate_basis`].
    pub fn is_physical(&self) -> bool {
        self.particles >= 0 && self.particles as usize <= self.modes
    }

    pub fn states(&self) -> &[Vec<usize>] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &[usize] {
        &self.states[i]
    }

    /// Position of a strictly increasing tuple.
    pub fn index_of(&self, tuple: &[usize]) -> Option<usize> {
        if tuple.len() as isize != self.particles
            || tuple.windows(2).any(|w| w[0] >= w[1])
            || tuple.iter().any(|&k| k >= self.modes)
        {
            return None;
        }
        self.index.get(&mask_of(tuple)).copied()
    }

    pub(crate) fn index_of_mask(&self, mask: u64) -> Option<usize> {
        self.index.get(&mask).copied()
    }

    pub(crate) fn mask(&self, i: usize) -> u64 {
        self.masks[i]
    }

    pub(crate) fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.modes {
            return Err(Error::ModeOutOfRange {
                mode,
                modes: self.modes,
            });
        }
        Ok(())
    }

    /// Unit vector for a basis state.
    pub fn basis_vector(&self, i: usize) -> CVector {
        let mut v = CVector::zeros(self.dim());
        v[i] = ONE;
        v
    }
}

fn mask_of(tuple: &[usize]) -> u64 {
    tuple.iter().fold(0u64, |m, &k| m | (1u64 << k))
}

/// Sign picked up by `a†_k` (or `a_k`) acting on an occupation mask.
#[inline]
fn ladder_sign(mask: u64, mode: usize) -> f64 {
    let below = mask & ((1u64 << mode) - 1);
    if below.count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Dense matrix between two Fock sectors: `codomain.dim() x domain.dim()`.
#[derive(Clone)]
pub struct FermionOperator {
    domain: Arc<FockBasis>,
    codomain: Arc<FockBasis>,
    matrix: CMatrix,
}

impl fmt::Debug for FermionOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FermionOperator({:?} -> {:?})", self.domain, self.codomain)
    }
}

impl FermionOperator {
    pub fn new(domain: Arc<FockBasis>, codomain: Arc<FockBasis>, matrix: CMatrix) -> Result<Self> {
        let expected = (codomain.dim(), domain.dim());
        if matrix.shape() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: matrix.shape(),
            });
        }
        Ok(FermionOperator {
            domain,
            codomain,
            matrix,
        })
    }

    pub fn identity(basis: Arc<FockBasis>) -> Self {
        let d = basis.dim();
        FermionOperator {
            domain: basis.clone(),
            codomain: basis,
            matrix: CMatrix::identity(d, d),
        }
    }

    pub fn zero(domain: Arc<FockBasis>, codomain: Arc<FockBasis>) -> Self {
        let matrix = CMatrix::zeros(codomain.dim(), domain.dim());
        FermionOperator {
            domain,
            codomain,
            matrix,
        }
    }

    pub fn domain(&self) -> &Arc<FockBasis> {
        &self.domain
    }

    pub fn codomain(&self) -> &Arc<FockBasis> {
        &self.codomain
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn is_square(&self) -> bool {
        self.domain == self.codomain
    }

    /// `self ∘ inner`; the codomain of `inner` must be the domain of `self`.
    pub fn compose(&self, inner: &FermionOperator) -> Result<FermionOperator> {
        if inner.codomain != self.domain {
            return Err(Error::BasisMismatch {
                expected: self.domain.to_string(),
                found: inner.codomain.to_string(),
            });
        }
        Ok(FermionOperator {
            domain: inner.domain.clone(),
            codomain: self.codomain.clone(),
            matrix: &self.matrix * &inner.matrix,
        })
    }

    pub fn adjoint(&self) -> FermionOperator {
        FermionOperator {
            domain: self.codomain.clone(),
            codomain: self.domain.clone(),
            matrix: self.matrix.adjoint(),
        }
    }

    fn check_same_shape(&self, other: &FermionOperator) -> Result<()> {
        if self.domain != other.domain || self.codomain != other.codomain {
            return Err(Error::BasisMismatch {
                expected: format!("{} -> {}", self.domain, self.codomain),
                found: format!("{} -> {}", other.domain, other.codomain),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &FermionOperator) -> Result<FermionOperator> {
        self.check_same_shape(other)?;
        Ok(self.with_matrix(&self.matrix + &other.matrix))
    }

    pub fn sub(&self, other: &FermionOperator) -> Result<FermionOperator> {
        self.check_same_shape(other)?;
        Ok(self.with_matrix(&self.matrix - &other.matrix))
    }

    pub fn scale(&self, factor: num_complex::Complex64) -> FermionOperator {
        self.with_matrix(self.matrix.map(|z| z * factor))
    }

    pub(crate) fn with_matrix(&self, matrix: CMatrix) -> FermionOperator {
        debug_assert_eq!(matrix.shape(), self.matrix.shape());
        FermionOperator {
            domain: self.domain.clone(),
            codomain: self.codomain.clone(),
            matrix,
        }
    }

    /// `self · x · self†` for `x` square on the domain.
    pub fn conjugate(&self, x: &CMatrix) -> CMatrix {
        &self.matrix * x * self.matrix.adjoint()
    }

    pub fn apply(&self, v: &CVector) -> Result<CVector> {
        if v.len() != self.domain.dim() {
            return Err(Error::DimensionMismatch {
                expected: (self.domain.dim(), 1),
                found: (v.len(), 1),
            });
        }
        Ok(&self.matrix * v)
    }
}

/// `a†_k : F_N -> F_{N+1}`.
pub fn creation(mode: usize, from: &Arc<FockBasis>) -> Result<FermionOperator> {
    from.check_mode(mode)?;
    let to = Arc::new(from.shifted(1));
    let mut m = CMatrix::zeros(to.dim(), from.dim());
    let bit = 1u64 << mode;
    for col in 0..from.dim() {
        let mask = from.mask(col);
        if mask & bit != 0 {
            continue;
        }
        let row = to
            .index_of_mask(mask | bit)
            .expect("target state exists in the next sector");
        m[(row, col)] = linalg::real(ladder_sign(mask, mode));
    }
    FermionOperator::new(from.clone(), to, m)
}

/// `a_k : F_N -> F_{N-1}`, the adjoint of [`creation`] into `F_N`.
pub fn annihilation(mode: usize, from: &Arc<FockBasis>) -> Result<FermionOperator> {
    from.check_mode(mode)?;
    let below = Arc::new(from.shifted(-1));
    Ok(creation(mode, &below)?.adjoint())
}

/// `a†_{m_1} a†_{m_2} ... a†_{m_n}` acting on `from` (rightmost factor first).
pub fn creation_string(modes: &[usize], from: &Arc<FockBasis>) -> Result<FermionOperator> {
    for (i, &m) in modes.iter().enumerate() {
        from.check_mode(m)?;
        if modes[..i].contains(&m) {
            return Err(Error::RepeatedMode(m));
        }
    }
    let mut op = FermionOperator::identity(from.clone());
    for &m in modes.iter().rev() {
        let step = creation(m, op.codomain())?;
        op = step.compose(&op)?;
    }
    Ok(op)
}

/// `a_{m_n} ... a_{m_2} a_{m_1}`, the adjoint of [`creation_string`] into `from`.
pub fn annihilation_string(modes: &[usize], from: &Arc<FockBasis>) -> Result<FermionOperator> {
    let below = Arc::new(from.shifted(-(modes.len() as isize)));
    Ok(creation_string(modes, &below)?.adjoint())
}

/// State `a†_{m_1} ... a†_{m_n} |0>` as a vector in `F_n`.
pub fn slater_vector(modes: &[usize], num_modes: usize) -> Result<CVector> {
    let vacuum = Arc::new(FockBasis::vacuum(num_modes)?);
    let op = creation_string(modes, &vacuum)?;
    Ok(op.matrix().column(0).into_owned())
}

/// `n_k = a†_k a_k`, diagonal on `basis`.
pub fn number_operator(mode: usize, basis: &Arc<FockBasis>) -> Result<FermionOperator> {
    basis.check_mode(mode)?;
    let bit = 1u64 << mode;
    let diag = CVector::from_iterator(
        basis.dim(),
        (0..basis.dim()).map(|i| if basis.mask(i) & bit != 0 { ONE } else { ZERO }),
    );
    FermionOperator::new(basis.clone(), basis.clone(), CMatrix::from_diagonal(&diag))
}

/// Single-particle creation operators `f†_k = Σ_l V_{kl} a†_l` on `from`.
pub fn rotated_creations(v: &CMatrix, from: &Arc<FockBasis>) -> Result<Vec<FermionOperator>> {
    let modes = from.num_modes();
    let bare: Vec<FermionOperator> = (0..modes)
        .map(|l| creation(l, from))
        .collect::<Result<_>>()?;
    Ok((0..modes)
        .map(|k| {
            let mut m = CMatrix::zeros(bare[0].matrix().nrows(), bare[0].matrix().ncols());
            for (l, op) in bare.iter().enumerate() {
                let coeff = v[(k, l)];
                if coeff != ZERO {
                    m += op.matrix().map(|z| z * coeff);
                }
            }
            bare[0].with_matrix(m)
        })
        .collect())
}

/// Single-particle annihilation operators `f_k = Σ_l V*_{kl} a_l` on `from`.
/// With `v = None` these are the bare `a_k`.
pub fn rotated_annihilations(
    v: Option<&CMatrix>,
    from: &Arc<FockBasis>,
) -> Result<Vec<FermionOperator>> {
    let modes = from.num_modes();
    match v {
        None => (0..modes).map(|k| annihilation(k, from)).collect(),
        Some(v) => {
            check_single_particle_unitary(v, modes)?;
            let below = Arc::new(from.shifted(-1));
            Ok(rotated_creations(v, &below)?
                .iter()
                .map(FermionOperator::adjoint)
                .collect())
        }
    }
}

pub(crate) fn check_single_particle_unitary(v: &CMatrix, modes: usize) -> Result<()> {
    if v.shape() != (modes, modes) {
        return Err(Error::DimensionMismatch {
            expected: (modes, modes),
            found: v.shape(),
        });
    }
    linalg::ensure_unitary(v, tol::UNITARITY)
}

/// Many-body unitary `W` on `basis` with `W a†_{k⃗}|0> = f†_{k_1} ... f†_{k_N}|0>`
/// where `f†_k = Σ_l V_{kl} a†_l`.
pub fn induced_unitary(v: &CMatrix, basis: &Arc<FockBasis>) -> Result<FermionOperator> {
    let modes = basis.num_modes();
    check_single_particle_unitary(v, modes)?;
    let n = basis.num_particles();
    // f† ladders for sectors 0..N-1
    let mut ladders: Vec<Vec<FermionOperator>> = Vec::with_capacity(n);
    for p in 0..n {
        let sector = Arc::new(FockBasis::sector(p as isize, modes));
        ladders.push(rotated_creations(v, &sector)?);
    }
    let mut w = CMatrix::zeros(basis.dim(), basis.dim());
    for (col, tuple) in basis.states().iter().enumerate() {
        let mut vec = CVector::from_element(1, ONE);
        for (p, &k) in tuple.iter().rev().enumerate() {
            vec = ladders[p][k].matrix() * vec;
        }
        w.set_column(col, &vec);
    }
    let op = FermionOperator::new(basis.clone(), basis.clone(), w)?;
    let defect = linalg::unitarity_defect(op.matrix());
    if defect > tol::UNITARITY {
        return Err(Error::Consistency(format!(
            "induced many-body operator is not unitary (defect {defect:e})"
        )));
    }
    Ok(op)
}

/// Hermitian, unit-trace, positive semidefinite operator on one sector.
#[derive(Clone)]
pub struct DensityMatrix {
    basis: Arc<FockBasis>,
    matrix: CMatrix,
}

impl fmt::Debug for DensityMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DensityMatrix({:?}) {}", self.basis, self.matrix)
    }
}

impl DensityMatrix {
    pub fn new(basis: Arc<FockBasis>, matrix: CMatrix) -> Result<Self> {
        let d = basis.dim();
        if matrix.shape() != (d, d) {
            return Err(Error::DimensionMismatch {
                expected: (d, d),
                found: matrix.shape(),
            });
        }
        if d == 0 {
            return Err(Error::InvalidDensity("empty sector".into()));
        }
        let herm = linalg::hermiticity_defect(&matrix);
        if herm > tol::STRUCTURAL {
            return Err(Error::InvalidDensity(format!(
                "not Hermitian (defect {herm:e})"
            )));
        }
        let tr = linalg::trace(&matrix);
        if (tr - ONE).norm() > tol::STRUCTURAL {
            return Err(Error::InvalidDensity(format!("trace {tr} differs from 1")));
        }
        let min = linalg::min_eigenvalue(&matrix);
        if min < -tol::POSITIVITY {
            return Err(Error::InvalidDensity(format!(
                "negative eigenvalue {min:e}"
            )));
        }
        Ok(DensityMatrix { basis, matrix })
    }

    /// `|ψ><ψ|` for a normalized (or normalizable) vector.
    pub fn pure(basis: Arc<FockBasis>, psi: &CVector) -> Result<Self> {
        let n = psi.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidDensity("zero or non-finite state vector".into()));
        }
        let psi = psi / linalg::real(n);
        DensityMatrix::new(basis, linalg::outer(&psi, &psi))
    }

    pub fn from_operator(op: &FermionOperator) -> Result<Self> {
        if !op.is_square() {
            return Err(Error::BasisMismatch {
                expected: op.domain().to_string(),
                found: op.codomain().to_string(),
            });
        }
        DensityMatrix::new(op.domain().clone(), op.matrix().clone())
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn as_operator(&self) -> FermionOperator {
        FermionOperator {
            domain: self.basis.clone(),
            codomain: self.basis.clone(),
            matrix: self.matrix.clone(),
        }
    }

    pub fn purity(&self) -> f64 {
        linalg::trace(&(&self.matrix * &self.matrix)).re
    }

    /// `U ρ U†` for a unitary on the same sector.
    pub fn evolve(&self, u: &FermionOperator) -> Result<DensityMatrix> {
        if u.domain() != &self.basis || u.codomain() != &self.basis {
            return Err(Error::BasisMismatch {
                expected: self.basis.to_string(),
                found: format!("{} -> {}", u.domain(), u.codomain()),
            });
        }
        let m = u.conjugate(&self.matrix);
        // restore exact hermiticity lost to rounding
        let m = (&m + m.adjoint()).map(|z| z * 0.5);
        DensityMatrix::new(self.basis.clone(), m)
    }
}

/// Max deviation of `{a_k, a†_l} = δ_kl`, `{a_k, a_l} = 0` and
/// `{a†_k, a†_l} = 0` over all mode pairs, restricted to `basis`.
pub fn anticommutation_defect(basis: &Arc<FockBasis>) -> Result<f64> {
    let modes = basis.num_modes();
    let up = Arc::new(basis.shifted(1));
    let down = Arc::new(basis.shifted(-1));
    let create_here: Vec<_> = (0..modes).map(|k| creation(k, basis)).collect::<Result<_>>()?;
    let create_down: Vec<_> = (0..modes).map(|k| creation(k, &down)).collect::<Result<_>>()?;
    let create_up: Vec<_> = (0..modes).map(|k| creation(k, &up)).collect::<Result<_>>()?;
    let annih_here: Vec<_> = (0..modes).map(|k| annihilation(k, basis)).collect::<Result<_>>()?;
    let annih_up: Vec<_> = (0..modes).map(|k| annihilation(k, &up)).collect::<Result<_>>()?;
    let annih_down: Vec<_> = (0..modes).map(|k| annihilation(k, &down)).collect::<Result<_>>()?;

    let d = basis.dim();
    let mut worst = 0.0_f64;
    for k in 0..modes {
        for l in 0..modes {
            // {a_k, a†_l}
            let mixed = annih_up[k]
                .compose(&create_here[l])?
                .add(&create_down[l].compose(&annih_here[k])?)?;
            let expected = if k == l {
                CMatrix::identity(d, d)
            } else {
                CMatrix::zeros(d, d)
            };
            worst = worst.max(linalg::max_abs_diff(mixed.matrix(), &expected));
            // {a_k, a_l}
            let aa = annih_down[k]
                .compose(&annih_here[l])?
                .add(&annih_down[l].compose(&annih_here[k])?)?;
            worst = worst.max(linalg::max_abs(aa.matrix()));
            // {a†_k, a†_l}
            let cc = create_up[k]
                .compose(&create_here[l])?
                .add(&create_up[l].compose(&create_here[k])?)?;
            worst = worst.max(linalg::max_abs(cc.matrix()));
        }
    }
    Ok(worst)
}

/// Deviation of `Σ_k a†_k|0><0|a_k = I` on `F_1`.
pub fn single_particle_completeness_defect(modes: usize) -> Result<f64> {
    let f1 = Arc::new(FockBasis::single_particle(modes)?);
    let mut acc = CMatrix::zeros(f1.dim(), f1.dim());
    for k in 0..modes {
        let v = slater_vector(&[k], modes)?;
        acc += linalg::outer(&v, &v);
    }
    Ok(linalg::max_abs_diff(&acc, &CMatrix::identity(f1.dim(), f1.dim())))
}

/// Deviation of `Σ_{k,m} a†_m a†_k|0><0|a_k a_m = 2 I` on `F_2`.
pub fn pair_completeness_defect(modes: usize) -> Result<f64> {
    let f2 = Arc::new(enumerate_basis(2, modes)?);
    let d = f2.dim();
    let mut acc = CMatrix::zeros(d, d);
    for k in 0..modes {
        for m in 0..modes {
            if k == m {
                continue; // a†_m a†_m = 0
            }
            let v = slater_vector(&[m, k], modes)?;
            acc += linalg::outer(&v, &v);
        }
    }
    let two = CMatrix::identity(d, d).map(|z| z * 2.0);
    Ok(linalg::max_abs_diff(&acc, &two))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, real};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn basis(n: usize, m: usize) -> Arc<FockBasis> {
        Arc::new(enumerate_basis(n, m).unwrap())
    }

    #[test]
    fn enumerates_pairs_of_three_modes() {
        let b = enumerate_basis(2, 3).unwrap();
        assert_eq!(b.states(), &[vec![0, 1], vec![0, 2], vec![1, 2]]);
        assert_eq!(b.dim(), 3);
    }

    #[test]
    fn vacuum_sector_has_one_state() {
        let b = enumerate_basis(0, 5).unwrap();
        assert_eq!(b.dim(), 1);
        assert!(b.state(0).is_empty());
    }

    #[test]
    fn two_fermions_in_four_modes_give_six_configurations() {
        assert_eq!(enumerate_basis(2, 4).unwrap().dim(), 6);
    }

    #[test]
    fn too_many_particles_is_an_exclusion_violation() {
        let err = enumerate_basis(4, 3).unwrap_err();
        assert!(err.to_string().contains("exclusion violation"));
        assert!(matches!(enumerate_basis(1, 0), Err(Error::InvalidModeCount(0))));
        assert!(matches!(enumerate_basis(1, 65), Err(Error::InvalidModeCount(65))));
        assert!(matches!(
            enumerate_basis(32, 64),
            Err(Error::BasisTooLarge { .. })
        ));
    }

    #[test]
    fn index_of_round_trips() {
        let b = enumerate_basis(3, 6).unwrap();
        for (i, s) in b.states().iter().enumerate() {
            assert_eq!(b.index_of(s), Some(i));
        }
        assert_eq!(b.index_of(&[1, 0, 2]), None);
        assert_eq!(b.index_of(&[0, 1]), None);
        assert_eq!(b.index_of(&[0, 1, 9]), None);
    }

    #[test]
    fn creation_sign_follows_anticommutation() {
        // a†_1 a†_0 |0> = - a†_0 a†_1 |0>
        let f1 = basis(1, 2);
        let a1 = creation(1, &f1).unwrap();
        let col = f1.index_of(&[0]).unwrap();
        let row = a1.codomain().index_of(&[0, 1]).unwrap();
        assert_eq!(a1.matrix()[(row, col)], real(-1.0));
        // a†_0 |0> = +|(0)>
        let vac = basis(0, 2);
        let a0 = creation(0, &vac).unwrap();
        assert_eq!(a0.matrix()[(0, 0)], real(1.0));
    }

    #[test]
    fn double_creation_vanishes() {
        for m in 1..5 {
            for n in 0..m {
                let b = basis(n, m);
                for k in 0..m {
                    let once = creation(k, &b).unwrap();
                    let twice = creation(k, once.codomain()).unwrap().compose(&once).unwrap();
                    assert_eq!(linalg::max_abs(twice.matrix()), 0.0);
                }
            }
        }
    }

    #[test]
    fn annihilating_vacuum_gives_zero() {
        let vac = basis(0, 3);
        let a0 = annihilation(0, &vac).unwrap();
        assert_eq!(a0.codomain().dim(), 0);
        assert_eq!(a0.matrix().shape(), (0, 1));
        // a†_0 a_0 on the vacuum: the zero 1x1 operator
        let n0 = creation(0, a0.codomain()).unwrap().compose(&a0).unwrap();
        assert_eq!(n0.matrix().shape(), (1, 1));
        assert_eq!(n0.matrix()[(0, 0)], ZERO);
        assert_eq!(n0.codomain().as_ref(), vac.as_ref());
    }

    #[test]
    fn anticommutator_on_single_particle_sector() {
        let f1 = basis(1, 3);
        let a0dag = creation(0, &f1).unwrap();
        let a0 = annihilation(0, a0dag.codomain()).unwrap();
        let below = annihilation(0, &f1).unwrap();
        let above = creation(0, below.codomain()).unwrap();
        let anti = a0
            .compose(&a0dag)
            .unwrap()
            .add(&above.compose(&below).unwrap())
            .unwrap();
        assert!(linalg::max_abs_diff(anti.matrix(), &CMatrix::identity(3, 3)) < 1e-15);
        // {a_0, a_1} = 0
        let f2 = basis(2, 3);
        let x = annihilation(0, &Arc::new(f2.shifted(-1)))
            .unwrap()
            .compose(&annihilation(1, &f2).unwrap())
            .unwrap();
        let y = annihilation(1, &Arc::new(f2.shifted(-1)))
            .unwrap()
            .compose(&annihilation(0, &f2).unwrap())
            .unwrap();
        assert_eq!(linalg::max_abs(x.add(&y).unwrap().matrix()), 0.0);
    }

    #[test]
    fn anticommutation_holds_on_every_sector() {
        for m in 1..=5 {
            for n in 0..=m.min(3) {
                let d = anticommutation_defect(&basis(n, m)).unwrap();
                assert!(d <= 1e-12, "N={n} M={m}: {d}");
            }
        }
    }

    #[test]
    fn creation_strings() {
        let vac = basis(0, 3);
        let s = creation_string(&[0, 1], &vac).unwrap();
        let row = s.codomain().index_of(&[0, 1]).unwrap();
        assert_eq!(s.matrix()[(row, 0)], real(1.0));
        let s = creation_string(&[1, 0], &vac).unwrap();
        assert_eq!(s.matrix()[(row, 0)], real(-1.0));
        assert!(matches!(
            creation_string(&[0, 0], &vac),
            Err(Error::RepeatedMode(0))
        ));
        assert!(matches!(
            creation_string(&[3], &vac),
            Err(Error::ModeOutOfRange { .. })
        ));
    }

    #[test]
    fn number_operators() {
        let f1 = basis(1, 2);
        let n0 = number_operator(0, &f1).unwrap();
        assert_eq!(n0.matrix(), &CMatrix::from_diagonal(&CVector::from_vec(vec![ONE, ZERO])));
        for m in 2..6 {
            for n in 0..=m {
                let b = basis(n, m);
                let mut total = CMatrix::zeros(b.dim(), b.dim());
                for k in 0..m {
                    let nk = number_operator(k, &b).unwrap();
                    let sq = nk.compose(&nk).unwrap();
                    assert_eq!(sq.matrix(), nk.matrix());
                    total += nk.matrix();
                }
                let expected = CMatrix::identity(b.dim(), b.dim()).map(|z| z * n as f64);
                assert_eq!(total, expected);
            }
        }
        assert!(number_operator(2, &f1).is_err());
    }

    #[test]
    fn number_operator_matches_ladder_product() {
        let b = basis(2, 4);
        for k in 0..4 {
            let a = annihilation(k, &b).unwrap();
            let ad = creation(k, a.codomain()).unwrap();
            let n = number_operator(k, &b).unwrap();
            assert_eq!(ad.compose(&a).unwrap().matrix(), n.matrix());
        }
    }

    #[test]
    fn completeness_identities() {
        for m in 2..=6 {
            assert!(single_particle_completeness_defect(m).unwrap() < 1e-12);
            assert!(pair_completeness_defect(m).unwrap() < 1e-12);
        }
    }

    #[test]
    fn induced_unitary_trivial_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = basis(2, 4);
        let w = induced_unitary(&CMatrix::identity(4, 4), &b).unwrap();
        assert!(linalg::max_abs_diff(w.matrix(), &CMatrix::identity(6, 6)) < 1e-15);
        let v = linalg::random_unitary(4, &mut rng);
        let w1 = induced_unitary(&v, &basis(1, 4)).unwrap();
        // single particle: W|k> = f†_k|0> = Σ_l V_kl |l>, so W = V^T
        assert!(linalg::max_abs_diff(w1.matrix(), &v.transpose()) < 1e-14);
    }

    #[test]
    fn induced_unitary_rejects_non_unitary() {
        let b = basis(1, 2);
        let v = CMatrix::from_row_slice(2, 2, &[ONE, ONE, ZERO, ONE]);
        assert!(matches!(induced_unitary(&v, &b), Err(Error::NotUnitary { .. })));
        let v = CMatrix::identity(3, 3);
        assert!(matches!(
            induced_unitary(&v, &b),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn density_matrix_validation() {
        let b = basis(1, 2);
        let ok = CMatrix::from_row_slice(2, 2, &[real(0.5), c(0.0, 0.5), c(0.0, -0.5), real(0.5)]);
        assert!(DensityMatrix::new(b.clone(), ok).is_ok());
        let non_herm = CMatrix::from_row_slice(2, 2, &[real(0.5), real(0.1), ZERO, real(0.5)]);
        assert!(DensityMatrix::new(b.clone(), non_herm).is_err());
        let bad_trace = CMatrix::identity(2, 2);
        assert!(DensityMatrix::new(b.clone(), bad_trace).is_err());
        let negative = CMatrix::from_diagonal(&CVector::from_vec(vec![real(1.5), real(-0.5)]));
        assert!(DensityMatrix::new(b, negative).is_err());
    }
}
