//! Restricted-domain Kraus maps for the single-fermion reduced state.
//!
//! Three families are supported, all built from a number-preserving global
//! unitary `U` on `F_N`:
//!
//! * `Pure2(μ)`: two fermions in `a†_μ a†_k |0>`, Kraus operators
//!   `K_l = f_l U a†_μ`.
//! * `Mixed2`: two fermions in `Σ p(μ) q(k) |μ k><μ k|` with `μ ∈ Σ`,
//!   `k ∈ Γ`, `p` fixed; `K_{l,μ} = f_l U a†_μ √p(μ) Π_Σ`.
//! * `GeneralN`: `N` fermions, `N - 1` of them drawn from `p` over
//!   `Σ_1 × ... × Σ_{N-1}`; `K_{l⃗,μ⃗} = √p(μ⃗) f_{l⃗} U a†_{μ⃗} Π_{∪Σ}`.
//!
//! `Π_S = Π_{m∈S} (1 - n_m)` removes the reference-mode part of the reduced
//! state. The maps are completely positive by construction and agree with
//! global evolution followed by a partial trace on their domain; outside it
//! they are still defined but carry no guarantee.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{self, DensityMatrix, FermionOperator, FockBasis};
use crate::linalg::{self, CMatrix, CVector};
use crate::tol;

/// Weight of one ordered tuple of reference modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TupleWeight {
    pub modes: Vec<usize>,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DomainVariant {
    Pure2 {
        mu: usize,
    },
    Mixed2 {
        sigma: BTreeSet<usize>,
        p: BTreeMap<usize, f64>,
        gamma: BTreeSet<usize>,
        q: BTreeMap<usize, f64>,
    },
    GeneralN {
        sigmas: Vec<BTreeSet<usize>>,
        p: Vec<TupleWeight>,
        gamma: BTreeSet<usize>,
        q: BTreeMap<usize, f64>,
    },
}

/// Which family of initial states a Kraus map is guaranteed on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub variant: DomainVariant,
    pub num_modes: usize,
    pub num_particles: usize,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidDomain(msg.into())
}

fn check_distribution<K: std::fmt::Debug + Ord>(
    name: &str,
    weights: impl IntoIterator<Item = (K, f64)>,
) -> Result<()> {
    let mut total = 0.0;
    for (k, w) in weights {
        if !w.is_finite() || w < 0.0 {
            return Err(invalid(format!("{name}: weight {w} for {k:?} is not a probability")));
        }
        total += w;
    }
    if (total - 1.0).abs() > tol::PROBABILITY {
        return Err(invalid(format!("{name} sums to {total}, not 1")));
    }
    Ok(())
}

fn check_modes(name: &str, set: &BTreeSet<usize>, modes: usize) -> Result<()> {
    if set.is_empty() {
        return Err(invalid(format!("{name} is empty")));
    }
    if let Some(&m) = set.iter().find(|&&m| m >= modes) {
        return Err(invalid(format!("{name} contains mode {m} outside 0..{modes}")));
    }
    Ok(())
}

fn check_support(name: &str, map: &BTreeMap<usize, f64>, set: &BTreeSet<usize>) -> Result<()> {
    if let Some(k) = map.keys().find(|k| !set.contains(k)) {
        return Err(invalid(format!("{name} assigns weight to mode {k} outside its set")));
    }
    Ok(())
}

impl DomainSpec {
    pub fn pure2(mu: usize, num_modes: usize) -> Result<Self> {
        let spec = DomainSpec {
            variant: DomainVariant::Pure2 { mu },
            num_modes,
            num_particles: 2,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn mixed2(
        p: BTreeMap<usize, f64>,
        q: BTreeMap<usize, f64>,
        num_modes: usize,
    ) -> Result<Self> {
        let spec = DomainSpec {
            variant: DomainVariant::Mixed2 {
                sigma: p.keys().copied().collect(),
                p,
                gamma: q.keys().copied().collect(),
                q,
            },
            num_modes,
            num_particles: 2,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn general_n(
        sigmas: Vec<BTreeSet<usize>>,
        p: Vec<TupleWeight>,
        q: BTreeMap<usize, f64>,
        num_modes: usize,
    ) -> Result<Self> {
        let spec = DomainSpec {
            num_particles: sigmas.len() + 1,
            variant: DomainVariant::GeneralN {
                sigmas,
                p,
                gamma: q.keys().copied().collect(),
                q,
            },
            num_modes,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let modes = self.num_modes;
        if modes == 0 || modes > fock::MAX_MODES {
            return Err(Error::InvalidModeCount(modes));
        }
        match &self.variant {
            DomainVariant::Pure2 { mu } => {
                if self.num_particles != 2 {
                    return Err(invalid("Pure2 requires exactly two particles"));
                }
                if *mu >= modes {
                    return Err(invalid(format!("reference mode {mu} outside 0..{modes}")));
                }
                if modes < 2 {
                    return Err(invalid("Pure2 needs at least two modes"));
                }
            }
            DomainVariant::Mixed2 { sigma, p, gamma, q } => {
                if self.num_particles != 2 {
                    return Err(invalid("Mixed2 requires exactly two particles"));
                }
                check_modes("Σ", sigma, modes)?;
                check_modes("Γ", gamma, modes)?;
                if let Some(m) = sigma.intersection(gamma).next() {
                    return Err(invalid(format!("Σ and Γ share mode {m}")));
                }
                check_support("p", p, sigma)?;
                check_support("q", q, gamma)?;
                check_distribution("p", p.iter().map(|(k, &w)| (*k, w)))?;
                check_distribution("q", q.iter().map(|(k, &w)| (*k, w)))?;
            }
            DomainVariant::GeneralN { sigmas, p, gamma, q } => {
                let n = self.num_particles;
                if n < 2 {
                    return Err(invalid("GeneralN requires at least two particles"));
                }
                if sigmas.len() != n - 1 {
                    return Err(invalid(format!(
                        "expected {} reference sets, found {}",
                        n - 1,
                        sigmas.len()
                    )));
                }
                for (j, s) in sigmas.iter().enumerate() {
                    check_modes(&format!("Σ_{j}"), s, modes)?;
                }
                check_modes("Γ", gamma, modes)?;
                let union: BTreeSet<usize> = sigmas.iter().flatten().copied().collect();
                if let Some(m) = union.intersection(gamma).next() {
                    return Err(invalid(format!("reference sets and Γ share mode {m}")));
                }
                if union.len() < n - 1 {
                    return Err(invalid(format!(
                        "reference sets cover {} modes, need at least {}",
                        union.len(),
                        n - 1
                    )));
                }
                let mut seen = BTreeSet::new();
                for tw in p {
                    if tw.modes.len() != n - 1 {
                        return Err(invalid(format!("tuple {:?} has wrong length", tw.modes)));
                    }
                    for (j, m) in tw.modes.iter().enumerate() {
                        if !sigmas[j].contains(m) {
                            return Err(invalid(format!(
                                "tuple {:?}: mode {m} not in Σ_{j}",
                                tw.modes
                            )));
                        }
                        if tw.modes[..j].contains(m) {
                            return Err(invalid(format!(
                                "tuple {:?} repeats mode {m} (exclusion violation)",
                                tw.modes
                            )));
                        }
                    }
                    if !seen.insert(tw.modes.clone()) {
                        return Err(invalid(format!("tuple {:?} listed twice", tw.modes)));
                    }
                }
                check_distribution("p", p.iter().map(|tw| (tw.modes.clone(), tw.prob)))?;
                check_support("q", q, gamma)?;
                check_distribution("q", q.iter().map(|(k, &w)| (*k, w)))?;
            }
        }
        Ok(())
    }

    /// Modes removed by the exclusion projector (the reference modes).
    pub fn reference_modes(&self) -> BTreeSet<usize> {
        match &self.variant {
            DomainVariant::Pure2 { mu } => [*mu].into(),
            DomainVariant::Mixed2 { sigma, .. } => sigma.clone(),
            DomainVariant::GeneralN { sigmas, .. } => sigmas.iter().flatten().copied().collect(),
        }
    }

    /// The `GeneralN` description of the same family; `Pure2` is not
    /// parameterized by `q` and has no such form.
    pub fn as_general_n(&self) -> Option<DomainSpec> {
        match &self.variant {
            DomainVariant::Pure2 { .. } => None,
            DomainVariant::Mixed2 { sigma, p, gamma, q } => Some(DomainSpec {
                variant: DomainVariant::GeneralN {
                    sigmas: vec![sigma.clone()],
                    p: p
                        .iter()
                        .map(|(&m, &w)| TupleWeight {
                            modes: vec![m],
                            prob: w,
                        })
                        .collect(),
                    gamma: gamma.clone(),
                    q: q.clone(),
                },
                num_modes: self.num_modes,
                num_particles: 2,
            }),
            DomainVariant::GeneralN { .. } => Some(self.clone()),
        }
    }

    /// Reference tuples with nonzero weight, in listing order.
    fn weighted_tuples(&self) -> Vec<(Vec<usize>, f64)> {
        match &self.variant {
            DomainVariant::Pure2 { mu } => vec![(vec![*mu], 1.0)],
            DomainVariant::Mixed2 { p, .. } => p
                .iter()
                .filter(|(_, &w)| w > 0.0)
                .map(|(&m, &w)| (vec![m], w))
                .collect(),
            DomainVariant::GeneralN { p, .. } => p
                .iter()
                .filter(|tw| tw.prob > 0.0)
                .map(|tw| (tw.modes.clone(), tw.prob))
                .collect(),
        }
    }

    /// Diagonal of the reduced state contributed by the reference tuples,
    /// `(1/N) Σ_j p_j(m)` per mode.
    fn reference_marginal(&self) -> Vec<f64> {
        let n = self.num_particles as f64;
        let mut diag = vec![0.0; self.num_modes];
        for (tuple, w) in self.weighted_tuples() {
            for m in tuple {
                diag[m] += w / n;
            }
        }
        diag
    }
}

/// Kraus operators on `F_1` together with the domain they are valid on.
#[derive(Debug, Clone)]
pub struct KrausSet {
    operators: Vec<FermionOperator>,
    domain: DomainSpec,
    time: Option<f64>,
}

impl KrausSet {
    /// Validates that every operator acts on `F_1` of the domain's mode count.
    pub fn new(operators: Vec<FermionOperator>, domain: DomainSpec, time: Option<f64>) -> Result<Self> {
        domain.validate()?;
        let f1 = FockBasis::single_particle(domain.num_modes)?;
        for op in &operators {
            if op.domain().as_ref() != &f1 || op.codomain().as_ref() != &f1 {
                return Err(Error::BasisMismatch {
                    expected: format!("{f1} -> {f1}"),
                    found: format!("{} -> {}", op.domain(), op.codomain()),
                });
            }
        }
        let ks = KrausSet {
            operators,
            domain,
            time,
        };
        let off = off_diagonal(&ks.tp_defect());
        if off > tol::UNITARITY {
            return Err(Error::Consistency(format!(
                "TP-defect matrix is not diagonal (off-diagonal {off:e})"
            )));
        }
        Ok(ks)
    }

    pub fn operators(&self) -> &[FermionOperator] {
        &self.operators
    }

    pub fn matrices(&self) -> impl Iterator<Item = &CMatrix> {
        self.operators.iter().map(FermionOperator::matrix)
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn time(&self) -> Option<f64> {
        self.time
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.domain.num_modes
    }

    pub fn at_time(mut self, t: f64) -> Self {
        self.time = Some(t);
        self
    }

    /// `Σ_l K†_l K_l`.
    pub fn tp_defect(&self) -> CMatrix {
        tp_defect(self)
    }

    /// Copy with one matrix entry shifted by `delta`. Skips all validation;
    /// meant for sensitivity checks of the verification harness.
    pub fn perturbed(&self, op: usize, row: usize, col: usize, delta: f64) -> KrausSet {
        let mut out = self.clone();
        let mut m = out.operators[op].matrix().clone();
        m[(row, col)] += linalg::real(delta);
        out.operators[op] = out.operators[op].with_matrix(m);
        out
    }

    /// `Σ_j K_j X K†_j` for any square operator on `F_1`.
    pub fn apply_to(&self, x: &CMatrix) -> Result<CMatrix> {
        let d = self.dim();
        if x.shape() != (d, d) {
            return Err(Error::DimensionMismatch {
                expected: (d, d),
                found: x.shape(),
            });
        }
        let mut acc = CMatrix::zeros(d, d);
        for k in &self.operators {
            acc += k.conjugate(x);
        }
        Ok(acc)
    }
}

fn off_diagonal(m: &CMatrix) -> f64 {
    let mut worst = 0.0_f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if i != j {
                worst = worst.max(m[(i, j)].norm());
            }
        }
    }
    worst
}

/// `Σ_l K†_l K_l`.
pub fn tp_defect(ks: &KrausSet) -> CMatrix {
    let d = ks.dim();
    let mut acc = CMatrix::zeros(d, d);
    for k in ks.matrices() {
        acc += k.adjoint() * k;
    }
    acc
}

/// `Φ[ρ_r] = Σ_j K_j ρ_r K†_j`.
///
/// Returns a plain operator: outside the map's domain the image is positive
/// but its trace need not be one.
pub fn apply_map(ks: &KrausSet, rho_r: &DensityMatrix) -> Result<FermionOperator> {
    let basis = rho_r.basis();
    if basis.num_particles() != 1 || basis.num_modes() != ks.dim() {
        return Err(Error::BasisMismatch {
            expected: format!("F_1^{}", ks.dim()),
            found: basis.to_string(),
        });
    }
    let out = ks.apply_to(rho_r.matrix())?;
    FermionOperator::new(basis.clone(), basis.clone(), out)
}

/// `Π_{m∈Σ} (1 - n_m)`: projector onto states leaving every mode in `Σ` empty.
pub fn exclusion_projector(sigma: &BTreeSet<usize>, basis: &Arc<FockBasis>) -> Result<FermionOperator> {
    for &m in sigma {
        basis.check_mode(m)?;
    }
    let d = basis.dim();
    let mut diag = CVector::zeros(d);
    for i in 0..d {
        let occupied = basis.state(i).iter().any(|m| sigma.contains(m));
        if !occupied {
            diag[i] = linalg::ONE;
        }
    }
    FermionOperator::new(basis.clone(), basis.clone(), CMatrix::from_diagonal(&diag))
}

/// A global `N`-fermion initial state paired with its single-particle reduction.
#[derive(Debug, Clone)]
pub struct DomainState {
    pub label: String,
    pub global: DensityMatrix,
    pub reduced: DensityMatrix,
}

/// Representative members of a domain.
///
/// `Pure2(μ)` yields every `a†_μ a†_k|0>` with `k ≠ μ`. The `q`-parameterized
/// families yield each corner `q = δ_k`, `k ∈ Γ`, followed by the spec's own `q`.
/// Reduced states are written in closed form; they are not obtained from the
/// partial trace.
pub fn domain_states(spec: &DomainSpec) -> Result<Vec<DomainState>> {
    spec.validate()?;
    let modes = spec.num_modes;
    let n = spec.num_particles;
    let global_basis = Arc::new(fock::enumerate_basis(n, modes)?);
    let f1 = Arc::new(FockBasis::single_particle(modes)?);

    let diag_state = |entries: &[f64]| -> Result<DensityMatrix> {
        let d = CVector::from_iterator(modes, entries.iter().map(|&x| linalg::real(x)));
        DensityMatrix::new(f1.clone(), CMatrix::from_diagonal(&d))
    };

    match &spec.variant {
        DomainVariant::Pure2 { mu } => (0..modes)
            .filter(|k| k != mu)
            .map(|k| {
                let psi = fock::slater_vector(&[*mu, k], modes)?;
                let global = DensityMatrix::pure(global_basis.clone(), &psi)?;
                let mut d = vec![0.0; modes];
                d[*mu] += 0.5;
                d[k] += 0.5;
                Ok(DomainState {
                    label: format!("pure2 mu={mu} k={k}"),
                    global,
                    reduced: diag_state(&d)?,
                })
            })
            .collect(),
        DomainVariant::Mixed2 { gamma, q, .. } | DomainVariant::GeneralN { gamma, q, .. } => {
            let tuples = spec.weighted_tuples();
            let marginal = spec.reference_marginal();
            let mut qs: Vec<(String, BTreeMap<usize, f64>)> = gamma
                .iter()
                .map(|&k| (format!("q=delta_{k}"), BTreeMap::from([(k, 1.0)])))
                .collect();
            qs.push(("q=given".to_string(), q.clone()));

            qs.into_iter()
                .map(|(label, q)| {
                    let mut global = CMatrix::zeros(global_basis.dim(), global_basis.dim());
                    for (tuple, pw) in &tuples {
                        for (&k, &qw) in q.iter().filter(|(_, &w)| w > 0.0) {
                            let mut occ = tuple.clone();
                            occ.push(k);
                            let psi = fock::slater_vector(&occ, modes)?;
                            global += linalg::outer(&psi, &psi).map(|z| z * (pw * qw));
                        }
                    }
                    let mut d = marginal.clone();
                    for (&k, &qw) in &q {
                        d[k] += qw / n as f64;
                    }
                    Ok(DomainState {
                        label,
                        global: DensityMatrix::new(global_basis.clone(), global)?,
                        reduced: diag_state(&d)?,
                    })
                })
                .collect()
        }
    }
}

/// Whether `rho_r` belongs to the reduced domain of `spec`, up to `tol`
/// elementwise.
pub fn in_domain(spec: &DomainSpec, rho_r: &DensityMatrix, tol: f64) -> bool {
    if spec.validate().is_err() {
        return false;
    }
    let modes = spec.num_modes;
    let m = rho_r.matrix();
    if rho_r.basis().num_particles() != 1 || m.nrows() != modes {
        return false;
    }
    if off_diagonal(m) > tol {
        return false;
    }
    let diag: Vec<f64> = (0..modes).map(|i| m[(i, i)].re).collect();
    match &spec.variant {
        DomainVariant::Pure2 { mu } => (0..modes).filter(|k| k != mu).any(|k| {
            diag.iter().enumerate().all(|(i, &x)| {
                let want = if i == *mu || i == k { 0.5 } else { 0.0 };
                (x - want).abs() <= tol
            })
        }),
        DomainVariant::Mixed2 { gamma, .. } | DomainVariant::GeneralN { gamma, .. } => {
            let n = spec.num_particles as f64;
            let marginal = spec.reference_marginal();
            let references = spec.reference_modes();
            let mut gamma_mass = 0.0;
            for (i, &x) in diag.iter().enumerate() {
                if references.contains(&i) {
                    if (x - marginal[i]).abs() > tol {
                        return false;
                    }
                } else if gamma.contains(&i) {
                    if x < -tol {
                        return false;
                    }
                    gamma_mass += x;
                } else if x.abs() > tol {
                    return false;
                }
            }
            (gamma_mass - 1.0 / n).abs() <= tol * modes as f64
        }
    }
}

fn check_global_unitary(u: &FermionOperator, particles: usize, modes: usize) -> Result<()> {
    if !u.is_square() {
        return Err(Error::NotNumberPreserving(format!(
            "maps {} to {}",
            u.domain(),
            u.codomain()
        )));
    }
    let b = u.domain();
    if b.num_particles() != particles || b.num_modes() != modes || !b.is_physical() {
        return Err(Error::NotNumberPreserving(format!(
            "acts on {b}, expected F_{particles}^{modes}"
        )));
    }
    linalg::ensure_unitary(u.matrix(), tol::UNITARITY)
}

/// Build `f_{l⃗} U a†_{μ⃗} Π` for every sorted `l⃗` and weighted `μ⃗`, scaled by `√p(μ⃗)`.
fn build_kraus(
    u: &FermionOperator,
    spec: &DomainSpec,
    sp_basis: Option<&CMatrix>,
) -> Result<KrausSet> {
    spec.validate()?;
    let modes = spec.num_modes;
    let n = spec.num_particles;
    check_global_unitary(u, n, modes)?;

    let f1 = Arc::new(FockBasis::single_particle(modes)?);
    let projector = match spec.variant {
        DomainVariant::Pure2 { .. } => FermionOperator::identity(f1.clone()),
        _ => exclusion_projector(&spec.reference_modes(), &f1)?,
    };

    // f_{l⃗} = f_{l_1} ... f_{l_{N-1}} : F_N -> F_1, built one particle at a time
    let lowerings = lowering_strings(u.domain(), n - 1, sp_basis)?;

    let mut operators = Vec::new();
    for (tuple, w) in spec.weighted_tuples() {
        let raise = fock::creation_string(&tuple, &f1)?;
        let inner = u.compose(&raise)?.compose(&projector)?.scale(linalg::real(w.sqrt()));
        for f in &lowerings {
            operators.push(f.compose(&inner)?);
        }
    }
    // Reorder Mixed2 as (l outer, μ inner).
    if matches!(spec.variant, DomainVariant::Mixed2 { .. }) {
        let per_tuple = lowerings.len();
        let tuples = operators.len() / per_tuple.max(1);
        let mut reordered = Vec::with_capacity(operators.len());
        for l in 0..per_tuple {
            for t in 0..tuples {
                reordered.push(operators[t * per_tuple + l].clone());
            }
        }
        operators = reordered;
    }
    KrausSet::new(operators, spec.clone(), None)
}

/// All `f_{l_1} ... f_{l_r}` with `l_1 < ... < l_r`, mapping `from` down `r` sectors.
fn lowering_strings(
    from: &Arc<FockBasis>,
    r: usize,
    sp_basis: Option<&CMatrix>,
) -> Result<Vec<FermionOperator>> {
    use itertools::Itertools;
    let modes = from.num_modes();
    // ladders[s] lowers sector (N - s) to (N - s - 1)
    let mut ladders = Vec::with_capacity(r);
    let mut sector = from.clone();
    for _ in 0..r {
        let ops = fock::rotated_annihilations(sp_basis, &sector)?;
        sector = ops[0].codomain().clone();
        ladders.push(ops);
    }
    (0..modes)
        .combinations(r)
        .map(|ls| {
            // f_{l_1} ... f_{l_r}: rightmost acts first on F_N
            let mut op = FermionOperator::identity(from.clone());
            for (s, &l) in ls.iter().rev().enumerate() {
                op = ladders[s][l].compose(&op)?;
            }
            Ok(op)
        })
        .collect()
}

/// `K_l = f_l U a†_μ`, `l = 0..L`.
pub fn kraus_pure2(u: &FermionOperator, mu: usize, sp_basis: Option<&CMatrix>) -> Result<KrausSet> {
    let spec = DomainSpec::pure2(mu, u.domain().num_modes())?;
    build_kraus(u, &spec, sp_basis)
}

/// `K_{l,μ} = f_l U a†_μ √p(μ) Π_Σ`, ordered with `l` outer and `μ` inner.
pub fn kraus_mixed2(u: &FermionOperator, spec: &DomainSpec, sp_basis: Option<&CMatrix>) -> Result<KrausSet> {
    if !matches!(spec.variant, DomainVariant::Mixed2 { .. }) {
        return Err(invalid("kraus_mixed2 needs a Mixed2 domain"));
    }
    build_kraus(u, spec, sp_basis)
}

/// `K_{l⃗,μ⃗} = √p(μ⃗) f_{l⃗} U a†_{μ⃗} Π_{∪Σ}`, ordered by `μ⃗` (listing order)
/// then sorted `l⃗`.
pub fn kraus_general_n(u: &FermionOperator, spec: &DomainSpec, sp_basis: Option<&CMatrix>) -> Result<KrausSet> {
    if !matches!(spec.variant, DomainVariant::GeneralN { .. }) {
        return Err(invalid("kraus_general_n needs a GeneralN domain"));
    }
    build_kraus(u, spec, sp_basis)
}

/// Dispatch on the domain variant.
pub fn kraus_for(u: &FermionOperator, spec: &DomainSpec, sp_basis: Option<&CMatrix>) -> Result<KrausSet> {
    build_kraus(u, spec, sp_basis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::enumerate_basis;
    use crate::linalg::{real, ONE, ZERO};
    use crate::reduce::trace_to_single;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diag(entries: &[f64]) -> CMatrix {
        CMatrix::from_diagonal(&CVector::from_iterator(
            entries.len(),
            entries.iter().map(|&x| real(x)),
        ))
    }

    fn random_global(n: usize, modes: usize, rng: &mut ChaCha8Rng) -> FermionOperator {
        let b = Arc::new(enumerate_basis(n, modes).unwrap());
        let u = linalg::random_unitary(b.dim(), rng);
        FermionOperator::new(b.clone(), b, u).unwrap()
    }

    fn identity_global(n: usize, modes: usize) -> FermionOperator {
        FermionOperator::identity(Arc::new(enumerate_basis(n, modes).unwrap()))
    }

    fn oracle_gap(ks: &KrausSet, u: &FermionOperator) -> f64 {
        domain_states(ks.domain())
            .unwrap()
            .iter()
            .map(|s| {
                let mapped = apply_map(ks, &s.reduced).unwrap();
                let truth = trace_to_single(&s.global.evolve(u).unwrap()).unwrap();
                linalg::trace_norm(&(mapped.matrix() - truth.matrix()))
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn pure2_domain_reduced_states() {
        let spec = DomainSpec::pure2(0, 3).unwrap();
        let states = domain_states(&spec).unwrap();
        assert_eq!(states.len(), 2);
        assert!(linalg::max_abs_diff(states[0].reduced.matrix(), &diag(&[0.5, 0.5, 0.0])) < 1e-15);
        assert!(linalg::max_abs_diff(states[1].reduced.matrix(), &diag(&[0.5, 0.0, 0.5])) < 1e-15);
        for s in &states {
            let traced = trace_to_single(&s.global).unwrap();
            assert!(linalg::max_abs_diff(traced.matrix(), s.reduced.matrix()) < 1e-15);
            assert!(in_domain(&spec, &s.reduced, 1e-10));
        }
    }

    #[test]
    fn mixed2_domain_reduced_state() {
        let spec = DomainSpec::mixed2(
            BTreeMap::from([(0, 1.0)]),
            BTreeMap::from([(1, 0.5), (2, 0.5)]),
            3,
        )
        .unwrap();
        let states = domain_states(&spec).unwrap();
        let given = states.last().unwrap();
        assert!(linalg::max_abs_diff(given.reduced.matrix(), &diag(&[0.5, 0.25, 0.25])) < 1e-15);
        for s in &states {
            let traced = trace_to_single(&s.global).unwrap();
            assert!(linalg::max_abs_diff(traced.matrix(), s.reduced.matrix()) < 1e-15);
            assert!(in_domain(&spec, &s.reduced, 1e-10));
        }
    }

    #[test]
    fn general_n_with_two_particles_matches_mixed2() {
        let mixed = DomainSpec::mixed2(
            BTreeMap::from([(0, 0.3), (1, 0.7)]),
            BTreeMap::from([(2, 0.6), (3, 0.4)]),
            4,
        )
        .unwrap();
        let general = mixed.as_general_n().unwrap();
        general.validate().unwrap();
        let a = domain_states(&mixed).unwrap();
        let b = domain_states(&general).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.reduced.matrix(), y.reduced.matrix());
            assert_eq!(x.global.matrix(), y.global.matrix());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = random_global(2, 4, &mut rng);
        let km = kraus_mixed2(&u, &mixed, None).unwrap();
        let kg = kraus_general_n(&u, &general, None).unwrap();
        for s in &a {
            let x = apply_map(&km, &s.reduced).unwrap();
            let y = apply_map(&kg, &s.reduced).unwrap();
            assert!(linalg::max_abs_diff(x.matrix(), y.matrix()) < 1e-14);
        }
    }

    #[test]
    fn domain_spec_validation() {
        assert!(DomainSpec::pure2(3, 3).is_err());
        assert!(DomainSpec::pure2(0, 1).is_err());
        // overlapping Σ and Γ
        assert!(DomainSpec::mixed2(
            BTreeMap::from([(0, 1.0)]),
            BTreeMap::from([(0, 0.5), (1, 0.5)]),
            3
        )
        .is_err());
        // p not normalized
        assert!(DomainSpec::mixed2(
            BTreeMap::from([(0, 0.9)]),
            BTreeMap::from([(1, 1.0)]),
            3
        )
        .is_err());
        // negative weight
        assert!(DomainSpec::mixed2(
            BTreeMap::from([(0, 1.2), (1, -0.2)]),
            BTreeMap::from([(2, 1.0)]),
            3
        )
        .is_err());
        // colliding tuple
        let sigmas = vec![BTreeSet::from([0, 1]), BTreeSet::from([0, 1])];
        let err = DomainSpec::general_n(
            sigmas.clone(),
            vec![TupleWeight { modes: vec![0, 0], prob: 1.0 }],
            BTreeMap::from([(2, 1.0)]),
            4,
        )
        .unwrap_err();
        assert!(err.to_string().contains("exclusion"));
        // tuple entry outside its Σ_j
        assert!(DomainSpec::general_n(
            vec![BTreeSet::from([0]), BTreeSet::from([1])],
            vec![TupleWeight { modes: vec![1, 0], prob: 1.0 }],
            BTreeMap::from([(2, 1.0)]),
            4,
        )
        .is_err());
        // union too small for N - 1 fermions
        assert!(DomainSpec::general_n(
            vec![BTreeSet::from([0]), BTreeSet::from([0])],
            vec![],
            BTreeMap::from([(2, 1.0)]),
            4,
        )
        .is_err());
        // valid
        assert!(DomainSpec::general_n(
            sigmas,
            vec![
                TupleWeight { modes: vec![0, 1], prob: 0.5 },
                TupleWeight { modes: vec![1, 0], prob: 0.5 },
            ],
            BTreeMap::from([(2, 1.0)]),
            4,
        )
        .is_ok());
    }

    #[test]
    fn exclusion_projectors() {
        let f1 = Arc::new(FockBasis::single_particle(2).unwrap());
        let empty = exclusion_projector(&BTreeSet::new(), &f1).unwrap();
        assert_eq!(empty.matrix(), &CMatrix::identity(2, 2));
        let p0 = exclusion_projector(&BTreeSet::from([0]), &f1).unwrap();
        assert_eq!(p0.matrix(), &diag(&[0.0, 1.0]));
        // kills every single-particle state in Σ
        let f1 = Arc::new(FockBasis::single_particle(5).unwrap());
        let sigma = BTreeSet::from([1, 3]);
        let p = exclusion_projector(&sigma, &f1).unwrap();
        for &j in &sigma {
            let v = fock::slater_vector(&[j], 5).unwrap();
            let killed = p.matrix() * linalg::outer(&v, &v);
            assert_eq!(linalg::max_abs(&killed), 0.0);
        }
        assert!(exclusion_projector(&BTreeSet::from([7]), &f1).is_err());
    }

    #[test]
    fn pure2_identity_evolution_two_modes() {
        let u = identity_global(2, 2);
        let ks = kraus_pure2(&u, 0, None).unwrap();
        assert_eq!(ks.len(), 2);
        // K_0 = a_0 a†_0 = 1 - n_0
        assert_eq!(ks.operators()[0].matrix(), &diag(&[0.0, 1.0]));
        // K_1 = a_1 a†_0 sends a†_1|0> to -a†_0|0>
        let k1 = ks.operators()[1].matrix();
        assert_eq!(k1, &CMatrix::from_row_slice(2, 2, &[ZERO, real(-1.0), ZERO, ZERO]));
        assert_eq!(ks.tp_defect(), diag(&[0.0, 2.0]));
    }

    #[test]
    fn pure2_tp_defect_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let u = random_global(2, 3, &mut rng);
            let ks = kraus_pure2(&u, 0, None).unwrap();
            assert!(linalg::max_abs_diff(&ks.tp_defect(), &diag(&[0.0, 2.0, 2.0])) < 1e-10);
            let u = random_global(2, 4, &mut rng);
            let ks = kraus_pure2(&u, 2, None).unwrap();
            assert!(linalg::max_abs_diff(&ks.tp_defect(), &diag(&[2.0, 2.0, 0.0, 2.0])) < 1e-10);
        }
    }

    #[test]
    fn mixed2_tp_defect_regression() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let spec = DomainSpec::mixed2(
            BTreeMap::from([(0, 0.5), (1, 0.5)]),
            BTreeMap::from([(2, 0.5), (3, 0.5)]),
            4,
        )
        .unwrap();
        let u = random_global(2, 4, &mut rng);
        let ks = kraus_mixed2(&u, &spec, None).unwrap();
        assert_eq!(ks.len(), 8);
        assert!(linalg::max_abs_diff(&ks.tp_defect(), &diag(&[0.0, 0.0, 2.0, 2.0])) < 1e-10);
    }

    #[test]
    fn general_n_tp_defect_regression() {
        // N = 3: Σ f†_{l⃗} f_{l⃗} over sorted pairs is 3·I on F_3, so the
        // defect is 3 on every mode outside the reference sets.
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let spec = DomainSpec::general_n(
            vec![BTreeSet::from([0]), BTreeSet::from([1])],
            vec![TupleWeight { modes: vec![0, 1], prob: 1.0 }],
            BTreeMap::from([(2, 0.2), (3, 0.3), (4, 0.5)]),
            5,
        )
        .unwrap();
        let u = random_global(3, 5, &mut rng);
        let ks = kraus_general_n(&u, &spec, None).unwrap();
        assert_eq!(ks.len(), 10); // C(5, 2) · 1
        assert!(
            linalg::max_abs_diff(&ks.tp_defect(), &diag(&[0.0, 0.0, 3.0, 3.0, 3.0])) < 1e-10
        );
    }

    #[test]
    fn identity_evolution_leaves_domain_states_unchanged() {
        let u = identity_global(2, 4);
        let ks = kraus_pure2(&u, 1, None).unwrap();
        for s in domain_states(ks.domain()).unwrap() {
            let out = apply_map(&ks, &s.reduced).unwrap();
            assert!(linalg::max_abs_diff(out.matrix(), s.reduced.matrix()) < 1e-15);
        }
    }

    #[test]
    fn maps_agree_with_global_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let u = random_global(2, 4, &mut rng);
            for mu in 0..4 {
                let ks = kraus_pure2(&u, mu, None).unwrap();
                assert!(oracle_gap(&ks, &u) < 1e-10);
            }
            let spec = DomainSpec::mixed2(
                BTreeMap::from([(0, 0.25), (1, 0.75)]),
                BTreeMap::from([(2, 0.4), (3, 0.6)]),
                4,
            )
            .unwrap();
            let ks = kraus_mixed2(&u, &spec, None).unwrap();
            assert!(oracle_gap(&ks, &u) < 1e-10);
        }
        let spec = DomainSpec::general_n(
            vec![BTreeSet::from([0]), BTreeSet::from([1])],
            vec![TupleWeight { modes: vec![0, 1], prob: 1.0 }],
            BTreeMap::from([(2, 0.2), (3, 0.3), (4, 0.5)]),
            5,
        )
        .unwrap();
        for _ in 0..5 {
            let u = random_global(3, 5, &mut rng);
            let ks = kraus_general_n(&u, &spec, None).unwrap();
            assert!(oracle_gap(&ks, &u) < 1e-10);
        }
    }

    #[test]
    fn mixed2_with_single_reference_mode_reproduces_pure2() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let u = random_global(2, 4, &mut rng);
        let spec = DomainSpec::mixed2(
            BTreeMap::from([(1, 1.0)]),
            BTreeMap::from([(0, 0.5), (2, 0.25), (3, 0.25)]),
            4,
        )
        .unwrap();
        let mixed = kraus_mixed2(&u, &spec, None).unwrap();
        let pure = kraus_pure2(&u, 1, None).unwrap();
        for s in domain_states(pure.domain()).unwrap() {
            let a = apply_map(&mixed, &s.reduced).unwrap();
            let b = apply_map(&pure, &s.reduced).unwrap();
            assert!(linalg::max_abs_diff(a.matrix(), b.matrix()) < 1e-14);
        }
    }

    #[test]
    fn reference_mode_support_is_projected_out() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let u = random_global(2, 4, &mut rng);
        let spec = DomainSpec::mixed2(
            BTreeMap::from([(0, 0.5), (1, 0.5)]),
            BTreeMap::from([(2, 0.5), (3, 0.5)]),
            4,
        )
        .unwrap();
        let ks = kraus_mixed2(&u, &spec, None).unwrap();
        let f1 = Arc::new(FockBasis::single_particle(4).unwrap());
        let on_sigma = DensityMatrix::new(f1.clone(), diag(&[0.5, 0.5, 0.0, 0.0])).unwrap();
        let out = apply_map(&ks, &on_sigma).unwrap();
        assert!(linalg::max_abs(out.matrix()) < 1e-15);
        // the reference-mode pure state is killed by the Pure2 map too
        let pure = kraus_pure2(&u, 2, None).unwrap();
        let p_mu = DensityMatrix::new(f1, diag(&[0.0, 0.0, 1.0, 0.0])).unwrap();
        assert!(linalg::max_abs(apply_map(&pure, &p_mu).unwrap().matrix()) < 1e-14);
    }

    #[test]
    fn single_particle_basis_choice_preserves_the_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let u = random_global(2, 4, &mut rng);
        let plain = kraus_pure2(&u, 0, None).unwrap();
        for _ in 0..10 {
            let v = linalg::random_unitary(4, &mut rng);
            let rotated = kraus_pure2(&u, 0, Some(&v)).unwrap();
            for s in domain_states(plain.domain()).unwrap() {
                let a = apply_map(&plain, &s.reduced).unwrap();
                let b = apply_map(&rotated, &s.reduced).unwrap();
                assert!(linalg::max_abs_diff(a.matrix(), b.matrix()) < 1e-10);
            }
        }
    }

    #[test]
    fn domain_outputs_have_unit_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let u = random_global(2, 5, &mut rng);
        let ks = kraus_pure2(&u, 3, None).unwrap();
        for s in domain_states(ks.domain()).unwrap() {
            let out = apply_map(&ks, &s.reduced).unwrap();
            assert!((linalg::trace(out.matrix()) - ONE).norm() < 1e-10);
        }
    }

    #[test]
    fn rejects_bad_global_unitaries() {
        let b2 = Arc::new(enumerate_basis(2, 3).unwrap());
        let b1 = Arc::new(enumerate_basis(1, 3).unwrap());
        let not_unitary =
            FermionOperator::new(b2.clone(), b2.clone(), CMatrix::identity(3, 3).map(|z| z * 2.0))
                .unwrap();
        assert!(matches!(kraus_pure2(&not_unitary, 0, None), Err(Error::NotUnitary { .. })));
        let changes_number = FermionOperator::zero(b2, b1.clone());
        assert!(matches!(
            kraus_pure2(&changes_number, 0, None),
            Err(Error::NotNumberPreserving(_))
        ));
        let wrong_sector = FermionOperator::identity(b1);
        assert!(matches!(
            kraus_pure2(&wrong_sector, 0, None),
            Err(Error::NotNumberPreserving(_))
        ));
    }

    #[test]
    fn apply_map_rejects_wrong_dimension() {
        let ks = kraus_pure2(&identity_global(2, 3), 0, None).unwrap();
        let f1 = Arc::new(FockBasis::single_particle(4).unwrap());
        let rho = DensityMatrix::new(f1, diag(&[1.0, 0.0, 0.0, 0.0])).unwrap();
        assert!(apply_map(&ks, &rho).is_err());
    }

    #[test]
    fn in_domain_rejects_outsiders() {
        let spec = DomainSpec::pure2(0, 3).unwrap();
        let f1 = Arc::new(FockBasis::single_particle(3).unwrap());
        let outsider = DensityMatrix::new(f1.clone(), diag(&[0.0, 0.5, 0.5])).unwrap();
        assert!(!in_domain(&spec, &outsider, 1e-10));
        let coherent = DensityMatrix::new(
            f1,
            CMatrix::from_row_slice(
                3,
                3,
                &[real(0.5), real(0.25), ZERO, real(0.25), real(0.5), ZERO, ZERO, ZERO, ZERO],
            ),
        )
        .unwrap();
        assert!(!in_domain(&spec, &coherent, 1e-10));
    }
}
