//! Dynamical (Choi) matrices and the two norm bounds relating maps built from
//! different reference states.
//!
//! The vec convention is `vec(|x><y|) = |x> ⊗ |y>`, so `vec(K)[x·d + y] = K[x][y]`
//! and `D[(x,y),(x',y')] = Φ(|y><y'|)[x][x']`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::fock::{self, FermionOperator, FockBasis};
use crate::linalg::{self, CMatrix, CVector};
use crate::maps::{self, KrausSet};
use crate::tol;

pub const VEC_CONVENTION: &str = "ket-tensor-ket";

#[derive(Debug, Clone, PartialEq)]
pub struct ChoiMatrix {
    matrix: CMatrix,
}

impl ChoiMatrix {
    /// Wraps a square matrix of dimension `d²`; checks hermiticity.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let n = matrix.nrows();
        let d = (n as f64).sqrt().round() as usize;
        if !matrix.is_square() || d * d != n {
            return Err(Error::DimensionMismatch {
                expected: (d * d, d * d),
                found: matrix.shape(),
            });
        }
        linalg::ensure_hermitian(&matrix, tol::UNITARITY)?;
        Ok(ChoiMatrix { matrix })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn vec_convention(&self) -> &'static str {
        VEC_CONVENTION
    }

    /// Dimension `d` of the space the map acts on.
    pub fn input_dim(&self) -> usize {
        (self.matrix.nrows() as f64).sqrt().round() as usize
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::hermitian_eigenvalues(&self.matrix)
    }
}

/// Row-major flattening: `vec(K)[x·d + y] = K[x][y]`.
pub fn vec(k: &CMatrix) -> CVector {
    let (rows, cols) = k.shape();
    CVector::from_fn(rows * cols, |i, _| k[(i / cols, i % cols)])
}

/// `Σ_j vec(K_j) vec(K_j)†` for square matrices of a common size.
pub fn choi_from_matrices<'a>(ops: impl IntoIterator<Item = &'a CMatrix>) -> Result<ChoiMatrix> {
    let mut acc: Option<CMatrix> = None;
    for k in ops {
        if !k.is_square() {
            return Err(Error::DimensionMismatch {
                expected: (k.nrows(), k.nrows()),
                found: k.shape(),
            });
        }
        let v = vec(k);
        let term = linalg::outer(&v, &v);
        match &mut acc {
            None => acc = Some(term),
            Some(a) if a.shape() == term.shape() => *a += term,
            Some(a) => {
                return Err(Error::DimensionMismatch {
                    expected: a.shape(),
                    found: term.shape(),
                })
            }
        }
    }
    let matrix = acc.unwrap_or_else(|| CMatrix::zeros(0, 0));
    Ok(ChoiMatrix { matrix })
}

pub fn choi_from_kraus(ks: &KrausSet) -> ChoiMatrix {
    let d = ks.dim();
    if ks.is_empty() {
        return ChoiMatrix {
            matrix: CMatrix::zeros(d * d, d * d),
        };
    }
    // every operator is (L+1)×(L+1) by KrausSet construction
    choi_from_matrices(ks.matrices()).expect("KrausSet operators share one square shape")
}

/// Choi matrix of an arbitrary linear map on `d×d` matrices, built from its
/// action on matrix units.
pub fn choi_from_map(d: usize, map: impl Fn(&CMatrix) -> CMatrix) -> Result<ChoiMatrix> {
    let mut out = CMatrix::zeros(d * d, d * d);
    for y in 0..d {
        for yp in 0..d {
            let mut unit = CMatrix::zeros(d, d);
            unit[(y, yp)] = linalg::ONE;
            let img = map(&unit);
            if img.shape() != (d, d) {
                return Err(Error::DimensionMismatch {
                    expected: (d, d),
                    found: img.shape(),
                });
            }
            for x in 0..d {
                for xp in 0..d {
                    out[(x * d + y, xp * d + yp)] = img[(x, xp)];
                }
            }
        }
    }
    ChoiMatrix::new(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpReport {
    pub cp: bool,
    pub min_eigenvalue: f64,
}

pub fn is_cp(d: &ChoiMatrix, tol: f64) -> Result<CpReport> {
    linalg::ensure_hermitian(d.matrix(), tol::UNITARITY)?;
    let min_eigenvalue = linalg::min_eigenvalue(d.matrix());
    Ok(CpReport {
        cp: min_eigenvalue >= -tol,
        min_eigenvalue,
    })
}

pub fn trace_norm_distance(a: &ChoiMatrix, b: &ChoiMatrix) -> Result<f64> {
    if a.matrix().shape() != b.matrix().shape() {
        return Err(Error::DimensionMismatch {
            expected: a.matrix().shape(),
            found: b.matrix().shape(),
        });
    }
    Ok(linalg::trace_norm(&(a.matrix() - b.matrix())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
    pub seed: Option<u64>,
    pub parameters: Value,
}

impl BoundReport {
    fn new(lhs: f64, rhs: f64, parameters: Value) -> Self {
        BoundReport {
            lhs,
            rhs,
            satisfied: lhs <= rhs + tol::BOUND_SLACK,
            seed: None,
            parameters,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    /// How far `lhs` exceeds `rhs`; negative when the bound holds with room.
    pub fn excess(&self) -> f64 {
        self.lhs - self.rhs
    }
}

/// Unitary on `F_2` induced by exchanging single-particle modes `μ` and `ν`.
///
/// Sends `a†_μ a†_k|0>` to `a†_ν a†_k|0>` for `k ∉ {μ, ν}` and
/// `a†_μ a†_ν|0>` to `a†_ν a†_μ|0> = -a†_μ a†_ν|0>`.
pub fn mode_swap_unitary(mu: usize, nu: usize, basis: &Arc<FockBasis>) -> Result<FermionOperator> {
    let modes = basis.num_modes();
    basis.check_mode(mu)?;
    basis.check_mode(nu)?;
    let mut p = CMatrix::identity(modes, modes);
    if mu != nu {
        p[(mu, mu)] = linalg::ZERO;
        p[(nu, nu)] = linalg::ZERO;
        p[(mu, nu)] = linalg::ONE;
        p[(nu, mu)] = linalg::ONE;
    }
    fock::induced_unitary(&p, basis)
}

/// Bound relating the `Pure2(μ)` map to the `Pure2(ν)` map, `ν ≠ μ`, with
/// the mode-exchange unitary as the connecting transformation.
pub fn fermionic_bound_check(
    u: &FermionOperator,
    mu: usize,
    nu: usize,
    sp_basis: Option<&CMatrix>,
) -> Result<BoundReport> {
    if mu == nu {
        return Err(Error::SameReferenceMode(mu));
    }
    let v = mode_swap_unitary(mu, nu, u.domain())?;
    let mut report = fermionic_bound_with_transform(u, mu, &v, sp_basis)?;
    report.parameters["nu"] = json!(nu);
    Ok(report)
}

/// `‖D_Φ - D_Λ‖₁ ≤ d² L² sup ‖E - Vᵀ E V*‖₁` with `Φ` from `f_j U a†_μ`,
/// `Λ` from `f_j U V a†_μ`, `E` ranging over Slater dyads of `F_2`,
/// `d = dim F_2` and `L` the number of `F_2` states with `μ` occupied.
pub fn fermionic_bound_with_transform(
    u: &FermionOperator,
    mu: usize,
    v: &FermionOperator,
    sp_basis: Option<&CMatrix>,
) -> Result<BoundReport> {
    let basis = u.domain();
    if v.domain() != basis || v.codomain() != basis {
        return Err(Error::BasisMismatch {
            expected: format!("{basis} -> {basis}"),
            found: format!("{} -> {}", v.domain(), v.codomain()),
        });
    }
    linalg::ensure_unitary(v.matrix(), tol::UNITARITY)?;
    let phi = maps::kraus_pure2(u, mu, sp_basis)?;
    let lambda = maps::kraus_pure2(&u.compose(v)?, mu, sp_basis)?;
    let lhs = trace_norm_distance(&choi_from_kraus(&phi), &choi_from_kraus(&lambda))?;

    let d = basis.dim();
    let l = basis.states().iter().filter(|s| s.contains(&mu)).count();
    let vt = v.matrix().transpose();
    let vc = v.matrix().conjugate();
    let mut sup = 0.0_f64;
    for k in 0..d {
        for kp in 0..d {
            let mut e = CMatrix::zeros(d, d);
            e[(k, kp)] = linalg::ONE;
            let moved = &vt * &e * &vc;
            sup = sup.max(linalg::trace_norm(&(e - moved)));
        }
    }
    let scale = (d * d * l * l) as f64;
    Ok(BoundReport::new(
        lhs,
        scale * sup,
        json!({
            "kind": "fermionic",
            "num_modes": basis.num_modes(),
            "mu": mu,
            "d": d,
            "L": l,
            "sup_dyad_distance": sup,
        }),
    ))
}

/// `K_a = <a|U|0>_E` for `U` on `S ⊗ E`, system index major.
fn environment_kraus(u: &CMatrix, d_s: usize, d_e: usize) -> Vec<CMatrix> {
    (0..d_e)
        .map(|a| CMatrix::from_fn(d_s, d_s, |s, sp| u[(s * d_e + a, sp * d_e)]))
        .collect()
}

/// Bound for a system `S` coupled to an environment `E` initially in `|0>`
/// versus in `V_E|0>`: `‖D_Φ - D_Λ‖₁ ≤ d_S² ‖|0><0| - V_E|0><0|V_E†‖₁`.
pub fn distinguishable_bound_check(u_se: &CMatrix, v_e: &CMatrix, d_s: usize) -> Result<BoundReport> {
    let d_e = v_e.nrows();
    if d_s == 0 || d_e == 0 || !v_e.is_square() || u_se.shape() != (d_s * d_e, d_s * d_e) {
        return Err(Error::DimensionMismatch {
            expected: (d_s * d_e, d_s * d_e),
            found: u_se.shape(),
        });
    }
    linalg::ensure_unitary(u_se, tol::UNITARITY)?;
    linalg::ensure_unitary(v_e, tol::UNITARITY)?;

    let lifted = CMatrix::identity(d_s, d_s).kronecker(v_e);
    let phi = environment_kraus(u_se, d_s, d_e);
    let lambda = environment_kraus(&(u_se * lifted), d_s, d_e);
    let lhs = trace_norm_distance(&choi_from_matrices(&phi)?, &choi_from_matrices(&lambda)?)?;

    let zero = CVector::from_fn(d_e, |i, _| if i == 0 { linalg::ONE } else { linalg::ZERO });
    let moved = v_e * &zero;
    let env_gap = linalg::trace_norm(&(linalg::outer(&zero, &zero) - linalg::outer(&moved, &moved)));
    Ok(BoundReport::new(
        lhs,
        (d_s * d_s) as f64 * env_gap,
        json!({"kind": "distinguishable", "d_S": d_s, "d_E": d_e}),
    ))
}
