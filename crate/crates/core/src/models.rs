//! Two worked Hamiltonians: a quadratic (non-interacting) model and a
//! two-site, two-fermion dimer with on-site and intersite interactions.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{self, DensityMatrix, FermionOperator, FockBasis};
use crate::linalg::{self, CMatrix, CVector};
use crate::maps::{self, DomainSpec, KrausSet};
use crate::tol;

/// `H = Σ_ij M_ij a†_i a_j` with `M` Hermitian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticModel {
    #[serde(rename = "M", with = "crate::io::matrix_serde")]
    m: CMatrix,
}

impl QuadraticModel {
    pub fn new(m: CMatrix) -> Result<Self> {
        let model = QuadraticModel { m };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        let n = self.m.nrows();
        if n == 0 || n > fock::MAX_MODES {
            return Err(Error::InvalidModeCount(n));
        }
        linalg::ensure_hermitian(&self.m, tol::STRUCTURAL)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn num_modes(&self) -> usize {
        self.m.nrows()
    }

    /// Single-particle energies `λ_k` (ascending) and the unitary `V` with
    /// `b†_k = Σ_i V_{ki} a†_i`, so that `H = Σ_k λ_k b†_k b_k`.
    pub fn eigen(&self) -> (Vec<f64>, CMatrix) {
        let (values, columns) = linalg::hermitian_eigen(&self.m);
        (values, columns.transpose())
    }

    /// Single-particle propagator `exp(-iMt)`.
    pub fn single_particle_unitary(&self, t: f64) -> CMatrix {
        linalg::evolve_hermitian(&self.m, t)
    }
}

/// Assemble `Σ_ij M_ij a†_i a_j` on `F_N`.
pub fn quadratic_many_body(m: &CMatrix, particles: usize) -> Result<FermionOperator> {
    linalg::ensure_hermitian(m, tol::STRUCTURAL)?;
    let modes = m.nrows();
    let basis = Arc::new(fock::enumerate_basis(particles, modes)?);
    let lowers: Vec<_> = (0..modes)
        .map(|j| fock::annihilation(j, &basis))
        .collect::<Result<_>>()?;
    let below = lowers[0].codomain().clone();
    let raises: Vec<_> = (0..modes)
        .map(|i| fock::creation(i, &below))
        .collect::<Result<_>>()?;
    let mut h = CMatrix::zeros(basis.dim(), basis.dim());
    for i in 0..modes {
        for j in 0..modes {
            if m[(i, j)] != linalg::ZERO {
                h += (raises[i].matrix() * lowers[j].matrix()) * m[(i, j)];
            }
        }
    }
    FermionOperator::new(basis.clone(), basis, h)
}

/// `exp(-iHt)` through the spectral decomposition of `H`.
pub fn unitary_at_time(h: &FermionOperator, t: f64) -> Result<FermionOperator> {
    if !h.is_square() {
        return Err(Error::NotNumberPreserving(format!(
            "Hamiltonian maps {} to {}",
            h.domain(),
            h.codomain()
        )));
    }
    linalg::ensure_hermitian(h.matrix(), tol::UNITARITY)?;
    let u = linalg::evolve_hermitian(h.matrix(), t);
    FermionOperator::new(h.domain().clone(), h.domain().clone(), u)
}

/// Kraus operators of the two-fermion quadratic model written directly in
/// the eigenmode basis:
/// `K_l = Σ_m e^{-it(λ_l+λ_m)} (V*_{lμ} |b_m><b_m| - V*_{mμ} |b_m><b_l|)`.
pub fn noninteracting_kraus_closed_form(model: &QuadraticModel, mu: usize, t: f64) -> Result<KrausSet> {
    let modes = model.num_modes();
    let domain = DomainSpec::pure2(mu, modes)?;
    let (lambda, v) = model.eigen();
    // |b_m> in the mode basis: components V_{mi}
    let kets: Vec<CVector> = (0..modes)
        .map(|m| CVector::from_fn(modes, |i, _| v[(m, i)]))
        .collect();
    let f1 = Arc::new(FockBasis::single_particle(modes)?);
    let operators = (0..modes)
        .map(|l| {
            let mut k = CMatrix::zeros(modes, modes);
            for m in 0..modes {
                let phase = num_complex::Complex64::from_polar(1.0, -t * (lambda[l] + lambda[m]));
                k += linalg::outer(&kets[m], &kets[m]) * (phase * v[(l, mu)].conj());
                k -= linalg::outer(&kets[m], &kets[l]) * (phase * v[(m, mu)].conj());
            }
            FermionOperator::new(f1.clone(), f1.clone(), k)
        })
        .collect::<Result<Vec<_>>>()?;
    KrausSet::new(operators, domain, Some(t))
}

/// The generic construction for the same model: `f_l = b_l` and
/// `U_t = exp(-iHt)` on `F_2`.
pub fn noninteracting_kraus_generic(model: &QuadraticModel, mu: usize, t: f64) -> Result<KrausSet> {
    let h = quadratic_many_body(model.matrix(), 2)?;
    let u = unitary_at_time(&h, t)?;
    let (_, v) = model.eigen();
    Ok(maps::kraus_pure2(&u, mu, Some(&v))?.at_time(t))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitarityReport {
    pub num_states: usize,
    /// Worst `‖Φ[ρ] - u ρ u†‖₁` over the domain states.
    pub max_deviation: f64,
    /// Worst change of `Tr ρ²`.
    pub max_purity_change: f64,
}

/// Checks that on its domain the two-fermion map of a quadratic model is
/// conjugation by the single-particle propagator.
pub fn noninteracting_unitarity_check(model: &QuadraticModel, mu: usize, t: f64) -> Result<UnitarityReport> {
    let ks = noninteracting_kraus_generic(model, mu, t)?;
    let u1 = model.single_particle_unitary(t);
    let states = maps::domain_states(ks.domain())?;
    let mut report = UnitarityReport {
        num_states: states.len(),
        max_deviation: 0.0,
        max_purity_change: 0.0,
    };
    for s in &states {
        let mapped = maps::apply_map(&ks, &s.reduced)?;
        let expected = &u1 * s.reduced.matrix() * u1.adjoint();
        let dev = linalg::trace_norm(&(mapped.matrix() - &expected));
        let purity_after = linalg::trace(&(mapped.matrix() * mapped.matrix())).re;
        report.max_deviation = report.max_deviation.max(dev);
        report.max_purity_change = report
            .max_purity_change
            .max((purity_after - s.reduced.purity()).abs());
    }
    Ok(report)
}

/// Mode labels of the dimer in index order.
pub const DIMER_MODES: [&str; 4] = ["1up", "1dn", "2up", "2dn"];

/// Two spin-1/2 fermions on two sites with unit hopping, on-site
/// interaction `u` and intersite interaction `v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimerModel {
    pub u: f64,
    pub v: f64,
}

impl DimerModel {
    pub fn new(u: f64, v: f64) -> Result<Self> {
        let d = DimerModel { u, v };
        d.validate()?;
        Ok(d)
    }

    fn validate(&self) -> Result<()> {
        if !self.u.is_finite() || !self.v.is_finite() {
            return Err(Error::Decode("dimer parameters must be finite".into()));
        }
        Ok(())
    }

    pub fn delta(&self) -> f64 {
        self.v - self.u
    }

    fn root(&self) -> f64 {
        (self.delta().powi(2) + 16.0).sqrt()
    }

    fn norm(&self) -> f64 {
        (2.0 * ((self.delta() + self.root()).powi(2) + 16.0)).sqrt()
    }

    pub fn a(&self) -> f64 {
        (self.delta() + self.root()) / self.norm()
    }

    pub fn b(&self) -> f64 {
        4.0 / self.norm()
    }

    /// Closed-form spectrum in the order `(u, v, v, v, λ-, λ+)`.
    pub fn analytic_spectrum(&self) -> [f64; 6] {
        let (u, v) = (self.u, self.v);
        let r = self.root();
        [u, v, v, v, 0.5 * ((u + v) - r), 0.5 * ((u + v) + r)]
    }

    pub fn hamiltonian(&self) -> Result<FermionOperator> {
        dimer_assemble(self.u, self.v, 1.0)
    }
}

fn dimer_assemble(u: f64, v: f64, hopping: f64) -> Result<FermionOperator> {
    let basis = Arc::new(fock::enumerate_basis(2, 4)?);
    let n: Vec<CMatrix> = (0..4)
        .map(|k| fock::number_operator(k, &basis).map(FermionOperator::into_matrix))
        .collect::<Result<_>>()?;
    let lowers: Vec<_> = (0..4)
        .map(|j| fock::annihilation(j, &basis))
        .collect::<Result<_>>()?;
    let below = lowers[0].codomain().clone();
    let hop = |i: usize, j: usize| -> Result<CMatrix> {
        Ok(fock::creation(i, &below)?.matrix() * lowers[j].matrix())
    };
    let mut h = CMatrix::zeros(6, 6);
    // spin σ on site 1 is mode σ, on site 2 is mode 2 + σ
    for sigma in 0..2 {
        let forward = hop(sigma, 2 + sigma)?;
        h -= (&forward + forward.adjoint()) * linalg::real(hopping);
    }
    h += (&n[0] * &n[1] + &n[2] * &n[3]) * linalg::real(u);
    let n1 = &n[0] + &n[1];
    let n2 = &n[2] + &n[3];
    h += (n1 * n2) * linalg::real(v);
    FermionOperator::new(basis.clone(), basis, h)
}

/// Real matrix with analytic rows, as printed alongside the closed-form spectrum.
pub fn dimer_analytic_unitary(model: &DimerModel) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let (a, b) = (model.a(), model.b());
    #[rustfmt::skip]
    let rows = [
        -s,  0.0, 0.0, 0.0, 0.0, s,
        0.0, 0.0, 0.0, 0.0, 1.0, 0.0,
        0.0, 0.0, s,   s,   0.0, 0.0,
        0.0, 1.0, 0.0, 0.0, 0.0, 0.0,
        a,   0.0, b,   -b,  0.0, a,
        b,   0.0, -a,  a,   0.0, b,
    ];
    CMatrix::from_iterator(6, 6, rows.iter().map(|&x| linalg::real(x))).transpose()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DimerDiag {
    pub u: f64,
    pub v: f64,
    pub a: f64,
    pub b: f64,
    /// `a² + b² - ½`.
    pub normalization_defect: f64,
    pub analytic_spectrum: [f64; 6],
    pub numerical_spectrum: Vec<f64>,
    /// Worst gap between the two spectra, compared as sorted multisets.
    pub spectrum_gap: f64,
    /// `max |V H V† - D|`.
    pub residual_v_h_vdag: f64,
    /// `max |V† H V - D|`.
    pub residual_vdag_h_v: f64,
    pub unitarity_defect: f64,
    #[serde(skip)]
    pub v_matrix: CMatrix,
    #[serde(skip)]
    pub d_matrix: CMatrix,
}

/// Closed-form diagonalization checked against the assembled Hamiltonian in
/// both orientations.
pub fn dimer_analytic_diag(model: &DimerModel) -> Result<DimerDiag> {
    let h = model.hamiltonian()?;
    let v = dimer_analytic_unitary(model);
    let spectrum = model.analytic_spectrum();
    let d = CMatrix::from_diagonal(&CVector::from_iterator(
        6,
        spectrum.iter().map(|&x| linalg::real(x)),
    ));
    let forward = &v * h.matrix() * v.adjoint();
    let backward = v.adjoint() * h.matrix() * &v;
    let numerical = linalg::hermitian_eigenvalues(h.matrix());
    let mut sorted = spectrum.to_vec();
    sorted.sort_by(f64::total_cmp);
    let gap = sorted
        .iter()
        .zip(&numerical)
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()));
    Ok(DimerDiag {
        u: model.u,
        v: model.v,
        a: model.a(),
        b: model.b(),
        normalization_defect: model.a().powi(2) + model.b().powi(2) - 0.5,
        analytic_spectrum: spectrum,
        numerical_spectrum: numerical,
        spectrum_gap: gap,
        residual_v_h_vdag: linalg::max_abs_diff(&forward, &d),
        residual_vdag_h_v: linalg::max_abs_diff(&backward, &d),
        unitarity_defect: linalg::unitarity_defect(&v),
        v_matrix: v,
        d_matrix: d,
    })
}

/// The printed 6×6 Hamiltonian listing, verbatim, rows in the printed order.
pub fn dimer_reference_listing(u: f64, v: f64) -> CMatrix {
    #[rustfmt::skip]
    let rows = [
        u,    0.0,  -1.0, 1.0, 0.0, 0.0,
        0.0,  v,    0.0,  0.0, 0.0, 0.0,
        -1.0, 0.0,  v,    0.0, 0.0, -1.0,
        1.0,  0.0,  0.0,  v,   0.0, 1.0,
        0.0,  v,    0.0,  0.0, v,   0.0,
        0.0,  0.0,  -1.0, 1.0, 0.0, u,
    ];
    CMatrix::from_iterator(6, 6, rows.iter().map(|&x| linalg::real(x))).transpose()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ListingDiff {
    pub row: usize,
    pub col: usize,
    pub row_state: String,
    pub col_state: String,
    pub assembled: f64,
    pub printed: f64,
}

/// Entries where the assembled Hamiltonian and the printed listing differ.
pub fn dimer_listing_diff(model: &DimerModel) -> Result<Vec<ListingDiff>> {
    let h = model.hamiltonian()?;
    let printed = dimer_reference_listing(model.u, model.v);
    let label = |i: usize| {
        let s = h.domain().state(i);
        format!("({},{})", DIMER_MODES[s[0]], DIMER_MODES[s[1]])
    };
    let mut out = Vec::new();
    for i in 0..6 {
        for j in 0..6 {
            let a = h.matrix()[(i, j)];
            let p = printed[(i, j)];
            if (a - p).norm() > tol::STRUCTURAL {
                out.push(ListingDiff {
                    row: i,
                    col: j,
                    row_state: label(i),
                    col_state: label(j),
                    assembled: a.re,
                    printed: p.re,
                });
            }
        }
    }
    Ok(out)
}

pub fn dimer_kraus(model: &DimerModel, t: f64, mu: usize) -> Result<KrausSet> {
    let u = unitary_at_time(&model.hamiltonian()?, t)?;
    Ok(maps::kraus_pure2(&u, mu, None)?.at_time(t))
}

/// A Hamiltonian description as read from JSON:
/// `{"quadratic": {"M": matrix}}` or `{"dimer": {"u": .., "v": ..}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelSpec {
    Quadratic(QuadraticModel),
    Dimer(DimerModel),
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Quadratic(q) => q.validate(),
            ModelSpec::Dimer(d) => d.validate(),
        }
    }

    pub fn num_modes(&self) -> usize {
        match self {
            ModelSpec::Quadratic(q) => q.num_modes(),
            ModelSpec::Dimer(_) => 4,
        }
    }

    /// Many-body Hamiltonian on `F_N`; the dimer exists only at `N = 2`.
    pub fn hamiltonian(&self, particles: usize) -> Result<FermionOperator> {
        match self {
            ModelSpec::Quadratic(q) => quadratic_many_body(q.matrix(), particles),
            ModelSpec::Dimer(d) if particles == 2 => d.hamiltonian(),
            ModelSpec::Dimer(_) => Err(Error::InvalidDomain(
                "the dimer model holds exactly two fermions".into(),
            )),
        }
    }

    pub fn unitary(&self, particles: usize, t: f64) -> Result<FermionOperator> {
        unitary_at_time(&self.hamiltonian(particles)?, t)
    }
}

/// `Tr(H ρ)`.
pub fn energy(h: &FermionOperator, rho: &DensityMatrix) -> f64 {
    linalg::trace(&(h.matrix() * rho.matrix())).re
}
