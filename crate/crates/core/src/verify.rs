//! Brute-force verification harness.
//!
//! Every reduced-map prediction is compared with global evolution followed by
//! the partial trace. Sweeps draw one RNG stream per case, derived from the
//! suite seed, scenario name and case index, so results do not depend on
//! thread scheduling.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::choi;
use crate::error::{Error, Result};
use crate::fock::{self, DensityMatrix, FermionOperator};
use crate::linalg::{self, CMatrix, CVector};
use crate::maps::{self, DomainSpec, KrausSet, TupleWeight};
use crate::models::{self, DimerModel, QuadraticModel};
use crate::reduce::trace_to_single;
use crate::tol;

/// How a metric is compared with its limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    /// `value ≤ limit`; worst case is the maximum.
    AtMost,
    /// `value ≥ -limit`; worst case is the minimum.
    AtLeastNegative,
    /// `value > limit`; worst case is the minimum.
    Above,
}

pub mod metric {
    pub const TRACE_NORM_DEVIATION: &str = "trace_norm_deviation";
    pub const TP_DEFECT_DEVIATION: &str = "tp_defect_deviation";
    pub const CP_MIN_EIGENVALUE: &str = "cp_min_eigenvalue";
    pub const IDENTITY_DEVIATION: &str = "identity_deviation";
    pub const CHOI_DISTANCE: &str = "choi_distance";
    pub const PURITY_CHANGE: &str = "purity_change";
    pub const HERMITICITY_DEFECT: &str = "hermiticity_defect";
    pub const SPECTRUM_GAP: &str = "spectrum_gap";
    pub const ORIGIN_SPECTRUM_GAP: &str = "origin_spectrum_gap";
    pub const ORIGIN_COEFFICIENT_GAP: &str = "origin_coefficient_gap";
    pub const NORMALIZATION_DEFECT: &str = "normalization_defect";
    pub const BOUND_EXCESS: &str = "bound_excess";
    pub const TRIVIAL_BOUND_VALUE: &str = "trivial_bound_value";
    pub const DOMAIN_DEVIATION: &str = "domain_deviation";
    pub const OUT_OF_DOMAIN_DEVIATION: &str = "out_of_domain_deviation";
}

fn bound_of(name: &str) -> Bound {
    match name {
        metric::CP_MIN_EIGENVALUE => Bound::AtLeastNegative,
        metric::OUT_OF_DOMAIN_DEVIATION => Bound::Above,
        _ => Bound::AtMost,
    }
}

/// Limits keyed by metric name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances(pub BTreeMap<String, f64>);

impl Default for Tolerances {
    fn default() -> Self {
        use metric::*;
        let pairs = [
            (TRACE_NORM_DEVIATION, tol::ORACLE),
            (TP_DEFECT_DEVIATION, tol::UNITARITY),
            (CP_MIN_EIGENVALUE, tol::POSITIVITY),
            (IDENTITY_DEVIATION, tol::STRUCTURAL),
            (CHOI_DISTANCE, tol::CHOI_MATCH),
            (PURITY_CHANGE, tol::ORACLE),
            (HERMITICITY_DEFECT, tol::STRUCTURAL),
            (SPECTRUM_GAP, tol::SPECTRUM),
            (ORIGIN_SPECTRUM_GAP, tol::STRUCTURAL),
            (ORIGIN_COEFFICIENT_GAP, tol::STRUCTURAL),
            (NORMALIZATION_DEFECT, tol::STRUCTURAL),
            (BOUND_EXCESS, tol::BOUND_SLACK),
            (TRIVIAL_BOUND_VALUE, tol::STRUCTURAL),
            (DOMAIN_DEVIATION, tol::ORACLE),
            (OUT_OF_DOMAIN_DEVIATION, tol::OUT_OF_DOMAIN),
        ];
        Tolerances(pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect())
    }
}

impl Tolerances {
    pub fn get(&self, name: &str) -> f64 {
        self.0.get(name).copied().unwrap_or(0.0)
    }

    /// Override one limit; the name must be known and the value positive.
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        if !self.0.contains_key(name) {
            return Err(Error::Decode(format!("unknown tolerance '{name}'")));
        }
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::Decode(format!("tolerance '{name}' must be positive")));
        }
        self.0.insert(name.to_string(), value);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub bound: Bound,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub scenario: String,
    pub seed: u64,
    pub num_cases: usize,
    pub max_trace_norm_deviation: Option<f64>,
    pub tp_defect_deviation: Option<f64>,
    pub cp_min_eigenvalue: Option<f64>,
    pub checks: Vec<Check>,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub notes: Option<Value>,
}

/// Worst-case metric values accumulated over cases.
#[derive(Debug, Clone, Default)]
pub struct Tally {
    cases: usize,
    values: BTreeMap<&'static str, f64>,
    error: Option<String>,
}

fn worse(bound: Bound, a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        return f64::NAN;
    }
    match bound {
        Bound::AtMost => a.max(b),
        Bound::AtLeastNegative | Bound::Above => a.min(b),
    }
}

impl Tally {
    pub fn case() -> Self {
        Tally {
            cases: 1,
            ..Default::default()
        }
    }

    pub fn record(&mut self, name: &'static str, value: f64) {
        let bound = bound_of(name);
        self.values
            .entry(name)
            .and_modify(|v| *v = worse(bound, *v, value))
            .or_insert(value);
    }

    fn failed(err: Error) -> Self {
        Tally {
            cases: 1,
            error: Some(err.to_string()),
            ..Default::default()
        }
    }

    pub fn merge(mut self, other: Tally) -> Self {
        self.cases += other.cases;
        for (k, v) in other.values {
            self.record(k, v);
        }
        if self.error.is_none() {
            self.error = other.error;
        }
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }

    fn into_report(self, scenario: &str, seed: u64, tols: &Tolerances, notes: Option<Value>) -> VerificationReport {
        let checks: Vec<Check> = self
            .values
            .iter()
            .map(|(&name, &value)| {
                let limit = tols.get(name);
                let bound = bound_of(name);
                let passed = match bound {
                    Bound::AtMost => value <= limit,
                    Bound::AtLeastNegative => value >= -limit,
                    Bound::Above => value > limit,
                };
                Check {
                    name: name.to_string(),
                    value,
                    limit,
                    bound,
                    passed,
                }
            })
            .collect();
        let passed = self.error.is_none() && self.cases > 0 && checks.iter().all(|c| c.passed);
        let max_dev = self.get(metric::TRACE_NORM_DEVIATION);
        let tp = self.get(metric::TP_DEFECT_DEVIATION);
        let cp = self.get(metric::CP_MIN_EIGENVALUE);
        let notes = match (self.error, notes) {
            (Some(e), Some(mut n)) => {
                n["error"] = json!(e);
                Some(n)
            }
            (Some(e), None) => Some(json!({ "error": e })),
            (None, n) => n,
        };
        VerificationReport {
            scenario: scenario.to_string(),
            seed,
            num_cases: self.cases,
            max_trace_norm_deviation: max_dev,
            tp_defect_deviation: tp,
            cp_min_eigenvalue: cp,
            checks,
            passed,
            notes,
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// RNG for one case, independent of every other case and scenario.
pub fn case_rng(seed: u64, scenario: &str, case: usize) -> ChaCha8Rng {
    // FNV-1a over the scenario name
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in scenario.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    ChaCha8Rng::seed_from_u64(splitmix(splitmix(seed ^ h) ^ case as u64))
}

/// Run `n` independent cases in parallel and fold their tallies in index order.
fn sweep<F>(seed: u64, scenario: &str, n: usize, f: F) -> Tally
where
    F: Fn(&mut ChaCha8Rng, usize) -> Result<Tally> + Sync,
{
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = case_rng(seed, scenario, i);
            f(&mut rng, i).unwrap_or_else(Tally::failed)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(Tally::default(), Tally::merge)
}

pub fn random_sector_unitary<R: Rng + ?Sized>(particles: usize, modes: usize, rng: &mut R) -> Result<FermionOperator> {
    let b = Arc::new(fock::enumerate_basis(particles, modes)?);
    let u = linalg::random_unitary(b.dim(), rng);
    FermionOperator::new(b.clone(), b, u)
}

/// `N · Π`: the expected TP-defect of a map for `spec`.
pub fn expected_tp_defect(spec: &DomainSpec) -> CMatrix {
    let refs = spec.reference_modes();
    let n = spec.num_particles as f64;
    let diag = CVector::from_fn(spec.num_modes, |m, _| {
        linalg::real(if refs.contains(&m) { 0.0 } else { n })
    });
    CMatrix::from_diagonal(&diag)
}

/// Worst trace-norm gap between the map and the global oracle on the
/// domain states of `ks`.
pub fn oracle_deviation(ks: &KrausSet, u: &FermionOperator) -> Result<f64> {
    let mut worst = 0.0_f64;
    for s in maps::domain_states(ks.domain())? {
        let mapped = maps::apply_map(ks, &s.reduced)?;
        let truth = trace_to_single(&s.global.evolve(u)?)?;
        worst = worse(Bound::AtMost, worst, linalg::trace_norm(&(mapped.matrix() - truth.matrix())));
    }
    Ok(worst)
}

/// Oracle, TP-defect and CP metrics for one Kraus set.
fn score_kraus(ks: &KrausSet, u: &FermionOperator, tally: &mut Tally) -> Result<()> {
    tally.record(metric::TRACE_NORM_DEVIATION, oracle_deviation(ks, u)?);
    let tp = linalg::max_abs_diff(&ks.tp_defect(), &expected_tp_defect(ks.domain()));
    tally.record(metric::TP_DEFECT_DEVIATION, tp);
    let cp = choi::is_cp(&choi::choi_from_kraus(ks), tol::POSITIVITY)?;
    tally.record(metric::CP_MIN_EIGENVALUE, cp.min_eigenvalue);
    Ok(())
}

/// Compare the map for `spec` built from `u` against the global oracle on
/// every domain state.
pub fn oracle_compare(u: &FermionOperator, spec: &DomainSpec, sp_basis: Option<&CMatrix>) -> Result<VerificationReport> {
    let ks = maps::kraus_for(u, spec, sp_basis)?;
    let mut tally = Tally::case();
    score_kraus(&ks, u, &mut tally)?;
    Ok(tally.into_report("oracle_compare", 0, &Tolerances::default(), None))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeCandidate {
    pub label: String,
    pub in_domain: bool,
    pub deviation: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeReport {
    pub found: bool,
    pub witness: Option<String>,
    pub deviation: f64,
    pub max_domain_deviation: f64,
    pub candidates: Vec<ProbeCandidate>,
    #[serde(skip)]
    pub witness_state: Option<DensityMatrix>,
}

/// Search a fixed family of two-fermion global states for reduced states on
/// which the `Pure2(μ)` map disagrees with the oracle.
///
/// The family is every Slater basis state of `F_2` plus the superpositions
/// `(|s> + |s'>)/√2` and `(|s> + i|s'>)/√2` of every pair of them.
pub fn out_of_domain_probe(u: &FermionOperator, mu: usize) -> Result<ProbeReport> {
    let ks = maps::kraus_pure2(u, mu, None)?;
    let basis = u.domain().clone();
    let d = basis.dim();
    let label = |i: usize| format!("{:?}", basis.state(i));

    let mut family: Vec<(String, CVector, bool)> = (0..d)
        .map(|i| (label(i), basis.basis_vector(i), basis.state(i).contains(&mu)))
        .collect();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..d {
        for j in i + 1..d {
            for (tag, phase) in [("+", linalg::ONE), ("+i", linalg::c(0.0, 1.0))] {
                let v = (basis.basis_vector(i) + basis.basis_vector(j) * phase) * linalg::real(s);
                family.push((format!("{} {tag} {}", label(i), label(j)), v, false));
            }
        }
    }

    let mut report = ProbeReport {
        found: false,
        witness: None,
        deviation: 0.0,
        max_domain_deviation: 0.0,
        candidates: Vec::with_capacity(family.len()),
        witness_state: None,
    };
    for (label, psi, in_domain) in family {
        let global = DensityMatrix::pure(basis.clone(), &psi)?;
        let reduced = trace_to_single(&global)?;
        let mapped = maps::apply_map(&ks, &reduced)?;
        let truth = trace_to_single(&global.evolve(u)?)?;
        let dev = linalg::trace_norm(&(mapped.matrix() - truth.matrix()));
        if in_domain {
            report.max_domain_deviation = worse(Bound::AtMost, report.max_domain_deviation, dev);
        } else if dev > report.deviation || dev.is_nan() {
            report.deviation = dev;
            report.witness = Some(label.clone());
            report.witness_state = Some(reduced);
        }
        report.candidates.push(ProbeCandidate {
            label,
            in_domain,
            deviation: dev,
        });
    }
    report.found = report.deviation > tol::OUT_OF_DOMAIN;
    Ok(report)
}

/// Which scenario groups to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Selection {
    pub algebra: bool,
    pub tp: bool,
    pub oracle: bool,
    pub noninteracting: bool,
    pub dimer: bool,
    pub bounds: bool,
    pub probe: bool,
}

impl Selection {
    pub fn all() -> Self {
        Selection {
            algebra: true,
            tp: true,
            oracle: true,
            noninteracting: true,
            dimer: true,
            bounds: true,
            probe: true,
        }
    }

    pub fn is_empty(&self) -> bool {
        *self == Selection::default()
    }
}

#[derive(Debug, Clone, Default)]
pub struct SuiteOptions {
    pub tolerances: Tolerances,
    /// Shift entry `(0,0)` of the first Kraus operator by this amount in the
    /// TP-defect and oracle sweeps; used to check the harness can fail.
    pub perturb: Option<f64>,
}

pub const RANDOM_CASES: usize = 100;

pub fn full_suite(seed: u64) -> Vec<VerificationReport> {
    run_suite(seed, Selection::all(), &SuiteOptions::default())
}

pub fn run_suite(seed: u64, selection: Selection, options: &SuiteOptions) -> Vec<VerificationReport> {
    let mut out = Vec::new();
    if selection.algebra {
        out.push(algebra(seed, options));
    }
    if selection.tp {
        for modes in [3, 4, 5] {
            out.push(tp_pure2(seed, modes, options));
        }
    }
    if selection.oracle {
        out.push(oracle_pure2(seed, options));
        out.push(oracle_mixed2(seed, options));
        out.push(oracle_general_n(seed, options));
    }
    if selection.noninteracting {
        out.push(noninteracting(seed, options));
    }
    if selection.dimer {
        out.push(dimer_spectrum(seed, options));
        out.push(dimer_oracle(seed, options));
    }
    if selection.bounds {
        for modes in [3, 4] {
            out.push(fermionic_bounds(seed, modes, options));
        }
        for d_e in [2, 3] {
            out.push(distinguishable_bounds(seed, 2, d_e, options));
        }
        out.push(trivial_bounds(seed, options));
    }
    if selection.probe {
        out.push(domain_probe(seed, options));
    }
    out
}

fn maybe_perturb(ks: KrausSet, options: &SuiteOptions) -> KrausSet {
    match options.perturb {
        Some(delta) => ks.perturbed(0, 0, 0, delta),
        None => ks,
    }
}

fn algebra(seed: u64, options: &SuiteOptions) -> VerificationReport {
    let name = "algebra/anticommutation_and_completeness";
    let cases: Vec<(usize, usize)> = (1..=6)
        .flat_map(|m| (0..=3.min(m)).map(move |n| (m, n)))
        .collect();
    let tally = sweep(seed, name, cases.len(), |_, i| {
        let (modes, n) = cases[i];
        let mut t = Tally::case();
        let basis = Arc::new(fock::enumerate_basis(n, modes)?);
        t.record(metric::IDENTITY_DEVIATION, fock::anticommutation_defect(&basis)?);
        t.record(metric::IDENTITY_DEVIATION, fock::single_particle_completeness_defect(modes)?);
        if modes >= 2 {
            t.record(metric::IDENTITY_DEVIATION, fock::pair_completeness_defect(modes)?);
        }
        Ok(t)
    });
    tally.into_report(name, seed, &options.tolerances, Some(json!({"max_modes": 6, "max_particles": 3})))
}

fn tp_pure2(seed: u64, modes: usize, options: &SuiteOptions) -> VerificationReport {
    let name = format!("tp_defect/pure2/modes={modes}");
    let tally = sweep(seed, &name, RANDOM_CASES, |rng, _| {
        let u = random_sector_unitary(2, modes, rng)?;
        let mut t = Tally::case();
        for mu in 0..modes {
            let ks = maybe_perturb(maps::kraus_pure2(&u, mu, None)?, options);
            let expected = expected_tp_defect(ks.domain());
            t.record(metric::TP_DEFECT_DEVIATION, linalg::max_abs_diff(&ks.tp_defect(), &expected));
            let cp = choi::is_cp(&choi::choi_from_kraus(&ks), tol::POSITIVITY)?;
            t.record(metric::CP_MIN_EIGENVALUE, cp.min_eigenvalue);
            let gap = (linalg::trace(choi::choi_from_kraus(&ks).matrix()) - linalg::trace(&ks.tp_defect())).norm();
            t.record(metric::IDENTITY_DEVIATION, gap);
        }
        Ok(t)
    });
    tally.into_report(&name, seed, &options.tolerances, None)
}

fn random_weights<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|w| w / total).collect()
}

fn weights_on(modes: &[usize], rng: &mut ChaCha8Rng) -> BTreeMap<usize, f64> {
    modes.iter().copied().zip(random_weights(modes.len(), rng)).collect()
}

fn oracle_pure2(seed: u64, options: &SuiteOptions) -> VerificationReport {
    let name = "oracle/pure2/modes=4";
    let tally = sweep(seed, name, RANDOM_CASES, |rng, _| {
        let u = random_sector_unitary(2, 4, rng)?;
        let mut t = Tally::case();
        for mu in 0..4 {
            let ks = maybe_perturb(maps::kraus_pure2(&u, mu, None)?, options);
            score_kraus(&ks, &u, &mut t)?;
        }
        Ok(t)
    });
    tally.into_report(name, seed, &options.tolerances, None)
}

fn oracle_mixed2(seed: u64, options: &SuiteOptions) -> VerificationReport {
    let name = "oracle/mixed2/modes=4";
    let tally = sweep(seed, name, RANDOM_CASES, |rng, _| {
        let u = random_sector_unitary(2, 4, rng)?;
        let spec = DomainSpec::mixed2(weights_on(&[0, 1], rng), weights_on(&[2, 3], rng), 4)?;
        let ks = maybe_perturb(maps::kraus_mixed2(&u, &spec, None)?, options);
        let mut t = Tally::case();
        score_kraus(&ks, &u, &mut t)?;
        Ok(t)
    });
    tally.into_report(
        name,
        seed,
        &options.tolerances,
        Some(json!({"sigma": [0, 1], "gamma": [2, 3]})),
    )
}

fn oracle_general_n(seed: u64, options: &SuiteOptions) -> VerificationReport {
    let name = "oracle/general_n/particles=3/modes=5";
    let tally = sweep(seed, name, RANDOM_CASES, |rng, _| {
        let u = random_sector_unitary(3, 5, rng)?;
        let tuples = [vec![0, 1], vec![0, 2], vec![1, 2]];
        let p = tuples
            .iter()
            .zip(random_weights(tuples.len(), rng))
            .map(|(m, prob)| TupleWeight {
                modes: m.clone(),
                prob,
            })
            .collect();
        let spec = DomainSpec::general_n(
            vec![BTreeSet::from([0, 1]), BTreeSet::from([1, 2])],
            p,
            weights_on(&[3, 4], rng),
            5,
        )?;
        let ks = maybe_perturb(maps::kraus_general_n(&u, &spec, None)?, options);
        let mut t = Tally::case();
        score_kraus(&ks, &u, &mut t)?;
        Ok(t)
    });
    tally.into_report(
        name,
        seed,
        &options.tolerances,
        Some(json!({"sigmas": [[0, 1], [1, 2]], "gamma": [3, 4]})),
    )
}

fn noninteracting(seed: u64, options: &SuiteOptions) -> VerificationReport {
    let name = "noninteracting/modes=4";
    let tally = sweep(seed, name, 20, |rng, _| {
        let model = QuadraticModel::new(linalg::random_hermitian(4, rng))?;
        let times: Vec<f64> = (0..20).map(|_| rng.random_range(-5.0..5.0)).collect();
        let h = models::quadratic_many_body(model.matrix(), 2)?;
        let mut t = Tally::case();
        for &time in &times {
            let u = models::unitary_at_time(&h, time)?;
            for mu in 0..4 {
                let r = models::noninteracting_unitarity_check(&model, mu, time)?;
                t.record(metric::TRACE_NORM_DEVIATION, r.max_deviation);
                t.record(metric::PURITY_CHANGE, r.max_purity_change);
                let closed = models::noninteracting_kraus_closed_form(&model, mu, time)?;
                let generic = models::noninteracting_kraus_generic(&model, mu, time)?;
                let gap = choi::trace_norm_distance(
                    &choi::choi_from_kraus(&closed),
                    &choi::choi_from_kraus(&generic),
                )?;
                t.record(metric::CHOI_DISTANCE, gap);
                score_kraus(&closed, &u, &mut t)?;
            }
        }
        Ok(t)
    });
    tally.into_report(name, seed, &options.tolerances, None)
}

fn grid() -> Vec<(f64, f64)> {
    let axis = [-2.0, -1.0, 0.0, 1.0, 2.0];
    axis.iter().flat_map(|&u| axis.iter().map(move |&v| (u, v))).collect()
}

fn dimer_spectrum(seed: u64, options: &SuiteOptions) -> VerificationReport {
    let name = "dimer/analytic_diagonalization";
    let points = grid();
    let tally = sweep(seed, name, points.len(), |_, i| {
        let (u, v) = points[i];
        let model = DimerModel::new(u, v)?;
        let h = model.hamiltonian()?;
        let diag = models::dimer_analytic_diag(&model)?;
        let mut t = Tally::case();
        t.record(metric::HERMITICITY_DEFECT, linalg::hermiticity_defect(h.matrix()));
        t.record(metric::SPECTRUM_GAP, diag.spectrum_gap);
        t.record(metric::NORMALIZATION_DEFECT, diag.normalization_defect.abs());
        Ok(t)
    });
    let origin = (|| -> Result<(f64, f64)> {
        let model = DimerModel::new(0.0, 0.0)?;
        let ev = linalg::hermitian_eigenvalues(model.hamiltonian()?.matrix());
        let spec_gap = ev
            .iter()
            .zip([-2.0, 0.0, 0.0, 0.0, 0.0, 2.0])
            .fold(0.0_f64, |acc, (a, b)| worse(Bound::AtMost, acc, (a - b).abs()));
        let coeff_gap = (model.a() - 0.5).abs().max((model.b() - 0.5).abs());
        Ok((spec_gap, coeff_gap))
    })();
    let mut extra = Tally::default();
    match origin {
        Ok((s, c)) => {
            extra.record(metric::ORIGIN_SPECTRUM_GAP, s);
            extra.record(metric::ORIGIN_COEFFICIENT_GAP, c);
        }
        Err(e) => extra = Tally::failed(e),
    }
    let notes = dimer_notes(&points);
    tally.merge(extra).into_report(name, seed, &options.tolerances, Some(notes))
}

/// Unasserted observations: orientation residuals and the listing diff.
fn dimer_notes(points: &[(f64, f64)]) -> Value {
    let mut forward = 0.0_f64;
    let mut backward = 0.0_f64;
    for &(u, v) in points {
        if let Ok(d) = DimerModel::new(u, v).and_then(|m| models::dimer_analytic_diag(&m)) {
            forward = forward.max(d.residual_v_h_vdag);
            backward = backward.max(d.residual_vdag_h_v);
        }
    }
    let diff = DimerModel::new(1.0, 2.0)
        .and_then(|m| models::dimer_listing_diff(&m))
        .map(|d| serde_json::to_value(d).unwrap_or(Value::Null))
        .unwrap_or(Value::Null);
    json!({
        "grid": "u, v in {-2, -1, 0, 1, 2}",
        "max_residual_V_H_Vdag": forward,
        "max_residual_Vdag_H_V": backward,
        "listing_diff_at_u1_v2": diff,
    })
}

fn dimer_oracle(seed: u64, options: &SuiteOptions) -> VerificationReport {
    let name = "dimer/oracle";
    let points = grid();
    let times = [0.0, 0.5, 1.0, 2.5];
    let tally = sweep(seed, name, points.len(), |_, i| {
        let (u, v) = points[i];
        let model = DimerModel::new(u, v)?;
        let h = model.hamiltonian()?;
        let mut t = Tally::case();
        for &time in &times {
            let ut = models::unitary_at_time(&h, time)?;
            for mu in 0..4 {
                let ks = models::dimer_kraus(&model, time, mu)?;
                score_kraus(&ks, &ut, &mut t)?;
            }
        }
        Ok(t)
    });
    tally.into_report(name, seed, &options.tolerances, Some(json!({"times": times})))
}

fn fermionic_bounds(seed: u64, modes: usize, options: &SuiteOptions) -> VerificationReport {
    let name = format!("bounds/fermionic/modes={modes}");
    let tally = sweep(seed, &name, RANDOM_CASES, |rng, _| {
        let u = random_sector_unitary(2, modes, rng)?;
        let mu = rng.random_range(0..modes);
        let nu = (mu + rng.random_range(1..modes)) % modes;
        let r = choi::fermionic_bound_check(&u, mu, nu, None)?;
        let mut t = Tally::case();
        t.record(metric::BOUND_EXCESS, r.excess());
        Ok(t)
    });
    tally.into_report(&name, seed, &options.tolerances, None)
}

fn distinguishable_bounds(seed: u64, d_s: usize, d_e: usize, options: &SuiteOptions) -> VerificationReport {
    let name = format!("bounds/distinguishable/d_S={d_s}/d_E={d_e}");
    let tally = sweep(seed, &name, RANDOM_CASES, |rng, _| {
        let u = linalg::random_unitary(d_s * d_e, rng);
        let v = linalg::random_unitary(d_e, rng);
        let r = choi::distinguishable_bound_check(&u, &v, d_s)?;
        let mut t = Tally::case();
        t.record(metric::BOUND_EXCESS, r.excess());
        Ok(t)
    });
    tally.into_report(&name, seed, &options.tolerances, None)
}

fn trivial_bounds(seed: u64, options: &SuiteOptions) -> VerificationReport {
    let name = "bounds/identity_transform";
    let tally = sweep(seed, name, 4, |rng, i| {
        let mut t = Tally::case();
        let r = if i < 2 {
            let modes = 3 + i;
            let u = random_sector_unitary(2, modes, rng)?;
            let id = FermionOperator::identity(u.domain().clone());
            choi::fermionic_bound_with_transform(&u, 0, &id, None)?
        } else {
            let d_e = i;
            let u = linalg::random_unitary(2 * d_e, rng);
            choi::distinguishable_bound_check(&u, &CMatrix::identity(d_e, d_e), 2)?
        };
        t.record(metric::TRIVIAL_BOUND_VALUE, r.lhs.abs().max(r.rhs.abs()));
        t.record(metric::BOUND_EXCESS, r.excess());
        Ok(t)
    });
    tally.into_report(name, seed, &options.tolerances, None)
}

fn domain_probe(seed: u64, options: &SuiteOptions) -> VerificationReport {
    let name = "domain_probe/pure2/modes=3";
    let mut notes = Value::Null;
    let mut tally = Tally::case();
    let mut rng = case_rng(seed, name, 0);
    let outcome = random_sector_unitary(2, 3, &mut rng).and_then(|u| out_of_domain_probe(&u, 0));
    match outcome {
        Ok(report) => {
            tally.record(metric::DOMAIN_DEVIATION, report.max_domain_deviation);
            tally.record(metric::OUT_OF_DOMAIN_DEVIATION, report.deviation);
            notes = json!({
                "mu": 0,
                "found": report.found,
                "witness": report.witness,
                "candidates": report.candidates.len(),
            });
        }
        Err(e) => tally = Tally::failed(e),
    }
    tally.into_report(name, seed, &options.tolerances, Some(notes))
}

/// One JSON object per line.
pub fn to_jsonl(reports: &[VerificationReport]) -> String {
    let mut out = String::new();
    for r in reports {
        out.push_str(&serde_json::to_string(r).expect("reports serialize"));
        out.push('\n');
    }
    out
}
