//! Single-photon internal states: Gaussian wavepackets, polarization, overlaps,
//! distinguishability matrices and mixed states.

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{c, CMatrix, CVector, C64};

pub const NORM_TOL: f64 = 1e-12;
pub const COLLAPSE_TOL: f64 = 1e-10;
pub const RANK_STEP: f64 = 1e-6;
pub const RANK_CUTOFF: f64 = 1e-8;

/// Gaussian temporal wavepacket with delay `t`, width `sigma` and central frequency `omega`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianWavepacket {
    pub t: f64,
    pub sigma: f64,
    #[serde(default)]
    pub omega: f64,
}

impl GaussianWavepacket {
    pub fn new(t: f64, sigma: f64) -> Self {
        Self { t, sigma, omega: 0.0 }
    }
}

fn check_width(sigma: f64) -> Result<()> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::Parameter(format!("wavepacket width must be positive, got {sigma}")));
    }
    Ok(())
}

/// ⟨a|b⟩ for equal-width packets.
pub fn gaussian_overlap(a: &GaussianWavepacket, b: &GaussianWavepacket) -> Result<C64> {
    check_width(a.sigma)?;
    check_width(b.sigma)?;
    if (a.sigma - b.sigma).abs() > 1e-12 * a.sigma.max(b.sigma) {
        return Err(Error::Parameter(
            "widths differ; use unequal_width_overlap".to_string(),
        ));
    }
    if (a.omega - b.omega).abs() > 1e-12 * a.omega.abs().max(1.0) {
        return Err(Error::Parameter("central frequencies differ".to_string()));
    }
    let dt = a.t - b.t;
    Ok(C64::from_polar(
        (-dt * dt / (4.0 * a.sigma * a.sigma)).exp(),
        -a.omega * dt,
    ))
}

/// Normalized inner product of two Gaussian amplitudes of different widths.
pub fn unequal_width_overlap(a: &GaussianWavepacket, b: &GaussianWavepacket) -> Result<C64> {
    check_width(a.sigma)?;
    check_width(b.sigma)?;
    let s2 = a.sigma * a.sigma + b.sigma * b.sigma;
    let dt = a.t - b.t;
    let modulus = (2.0 * a.sigma * b.sigma / s2).sqrt() * (-dt * dt / (2.0 * s2)).exp();
    Ok(C64::from_polar(modulus, -a.omega * dt))
}

/// Orthonormal coordinates for a set of wavepackets, built by Gram-Schmidt on their
/// overlap matrix. Nearly dependent packets do not add a basis vector.
pub fn temporal_basis(packets: &[GaussianWavepacket]) -> Result<Vec<CVector>> {
    let n = packets.len();
    let mut gram = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            gram[(i, j)] = unequal_width_overlap(&packets[i], &packets[j])?;
        }
    }
    gram_schmidt_coordinates(&gram)
}

/// Coordinates `c_i` with `⟨c_i, c_j⟩ = gram[i][j]` in an orthonormal basis of minimal size.
pub fn gram_schmidt_coordinates(gram: &CMatrix) -> Result<Vec<CVector>> {
    let n = gram.nrows();
    if gram.ncols() != n {
        return Err(Error::Dimension("Gram matrix must be square".to_string()));
    }
    // basis[k] = Σ_j coeffs[k][j] |φ_j⟩
    let mut coeffs: Vec<Vec<C64>> = Vec::new();
    let mut coords: Vec<Vec<C64>> = Vec::with_capacity(n);
    for i in 0..n {
        let proj: Vec<C64> = coeffs
            .iter()
            .map(|row| (0..n).map(|j| row[j].conj() * gram[(j, i)]).sum())
            .collect();
        let residual2 = gram[(i, i)].re - proj.iter().map(|p| p.norm_sqr()).sum::<f64>();
        let mut coord = proj.clone();
        if residual2 > COLLAPSE_TOL * COLLAPSE_TOL {
            let norm = residual2.sqrt();
            let mut row = vec![c(0.0, 0.0); n];
            row[i] = c(1.0 / norm, 0.0);
            for (k, p) in proj.iter().enumerate() {
                for j in 0..n {
                    row[j] -= coeffs[k][j] * p / norm;
                }
            }
            coeffs.push(row);
            coord.push(c(norm, 0.0));
        }
        coords.push(coord);
    }
    let dim = coeffs.len();
    Ok(coords
        .into_iter()
        .map(|mut v| {
            v.resize(dim, c(0.0, 0.0));
            CVector::from_vec(v)
        })
        .collect())
}

/// Two-component polarization state (H, V).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarizationState {
    pub h: C64,
    pub v: C64,
}

impl PolarizationState {
    pub fn new(h: C64, v: C64) -> Result<Self> {
        let n = h.norm_sqr() + v.norm_sqr();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::Parameter(format!("polarization not normalized (|H|²+|V|² = {n})")));
        }
        Ok(Self { h, v })
    }

    pub fn horizontal() -> Self {
        Self { h: c(1.0, 0.0), v: c(0.0, 0.0) }
    }

    pub fn vertical() -> Self {
        Self { h: c(0.0, 0.0), v: c(1.0, 0.0) }
    }

    /// Linear polarization at angle `angle` from horizontal.
    pub fn linear(angle: f64) -> Self {
        Self { h: c(angle.cos(), 0.0), v: c(angle.sin(), 0.0) }
    }

    pub fn vector(&self) -> CVector {
        CVector::from_vec(vec![self.h, self.v])
    }
}

/// Unit vector over an orthonormal internal basis identified by `basis`.
#[derive(Debug, Clone, PartialEq)]
pub struct InternalState {
    pub amplitudes: CVector,
    pub basis: String,
}

pub const DEFAULT_BASIS: &str = "internal";

impl InternalState {
    pub fn new(amplitudes: CVector) -> Result<Self> {
        Self::with_basis(amplitudes, DEFAULT_BASIS)
    }

    pub fn with_basis(amplitudes: CVector, basis: &str) -> Result<Self> {
        let n = amplitudes.norm();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::Parameter(format!("internal state has norm {n}")));
        }
        Ok(Self { amplitudes, basis: basis.to_string() })
    }

    /// Normalizes before constructing.
    pub fn normalized(amplitudes: CVector) -> Result<Self> {
        let n = amplitudes.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::Parameter("cannot normalize a zero vector".to_string()));
        }
        Self::new(amplitudes.unscale(n))
    }

    /// Temporal coordinates ⊗ polarization.
    pub fn product(temporal: &CVector, pol: &PolarizationState) -> Result<Self> {
        let p = pol.vector();
        Self::new(temporal.kronecker(&p))
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn with_phase(&self, phase: f64) -> Self {
        Self {
            amplitudes: self.amplitudes.map(|a| a * C64::from_polar(1.0, phase)),
            basis: self.basis.clone(),
        }
    }

    pub fn projector(&self) -> CMatrix {
        &self.amplitudes * self.amplitudes.adjoint()
    }
}

/// ⟨a|b⟩
pub fn overlap(a: &InternalState, b: &InternalState) -> Result<C64> {
    if a.basis != b.basis || a.dim() != b.dim() {
        return Err(Error::Dimension(format!(
            "basis mismatch: {}[{}] vs {}[{}]",
            a.basis,
            a.dim(),
            b.basis,
            b.dim()
        )));
    }
    Ok(a.amplitudes.dotc(&b.amplitudes))
}

/// Gram matrix `S[i][j] = ⟨φ_i|φ_j⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistinguishabilityMatrix(pub CMatrix);

impl DistinguishabilityMatrix {
    pub fn from_matrix(m: CMatrix) -> Result<Self> {
        let s = Self(m);
        s.validate(1e-10)?;
        Ok(s)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.nrows() == 0
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.0 + self.0.adjoint()).scale(0.5);
        h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Hermitian, unit diagonal, |S_ij| ≤ 1 and PSD within `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let m = &self.0;
        let n = m.nrows();
        if m.ncols() != n {
            return Err(Error::Dimension("distinguishability matrix must be square".to_string()));
        }
        for i in 0..n {
            if (m[(i, i)] - c(1.0, 0.0)).norm() > tol {
                return Err(Error::Constraint(format!("diagonal entry {i} is {}", m[(i, i)])));
            }
            for j in 0..n {
                if (m[(i, j)] - m[(j, i)].conj()).norm() > tol {
                    return Err(Error::Constraint("not Hermitian".to_string()));
                }
                if m[(i, j)].norm() > 1.0 + tol {
                    return Err(Error::Constraint(format!("|S[{i}][{j}]| > 1")));
                }
            }
        }
        let min = self.min_eigenvalue();
        if min < -tol {
            return Err(Error::Constraint(format!("not positive semidefinite (λ_min = {min})")));
        }
        Ok(())
    }
}

pub fn distinguishability_matrix(states: &[InternalState]) -> Result<DistinguishabilityMatrix> {
    let n = states.len();
    let mut m = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = overlap(&states[i], &states[j])?;
        }
    }
    Ok(DistinguishabilityMatrix(m))
}

/// Gram-Schmidt parameters: state `i` carries `moduli[i][k]` and `phases[i][k]` for
/// `k = 1..=i` (state 0 is the reference vector).
#[derive(Debug, Clone, PartialEq)]
pub struct GramSchmidtParams {
    pub moduli: Vec<Vec<f64>>,
    pub phases: Vec<Vec<f64>>,
}

impl GramSchmidtParams {
    pub fn zeros(n: usize) -> Self {
        Self {
            moduli: (0..n).map(|i| vec![0.0; i]).collect(),
            phases: (0..n).map(|i| vec![0.0; i]).collect(),
        }
    }

    pub fn photons(&self) -> usize {
        self.moduli.len()
    }

    fn flatten(&self) -> Vec<f64> {
        let mut x = Vec::new();
        for i in 0..self.photons() {
            x.extend_from_slice(&self.moduli[i]);
            x.extend_from_slice(&self.phases[i]);
        }
        x
    }

    fn unflatten(&self, x: &[f64]) -> Self {
        let mut out = self.clone();
        let mut pos = 0;
        for i in 0..self.photons() {
            let k = self.moduli[i].len();
            out.moduli[i].copy_from_slice(&x[pos..pos + k]);
            pos += k;
            out.phases[i].copy_from_slice(&x[pos..pos + k]);
            pos += k;
        }
        out
    }
}

/// |φ_i⟩ = √(1 − Σ_k s²_{i,k}) |α_0⟩ + Σ_k s_{i,k} e^{iγ_{i,k}} |α_k⟩
pub fn gram_schmidt_states(params: &GramSchmidtParams) -> Result<Vec<InternalState>> {
    let n = params.photons();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let s = &params.moduli[i];
        let g = &params.phases[i];
        if s.len() != i || g.len() != i {
            return Err(Error::Dimension(format!("state {i} needs {i} moduli and phases")));
        }
        let sum: f64 = s.iter().map(|x| x * x).sum();
        if sum > 1.0 + 1e-12 {
            return Err(Error::Constraint(format!("state {i}: Σ s² = {sum} > 1")));
        }
        let mut v = CVector::zeros(n.max(1));
        v[0] = c((1.0 - sum).max(0.0).sqrt(), 0.0);
        for k in 0..i {
            v[k + 1] = C64::from_polar(s[k], g[k]);
        }
        out.push(InternalState::normalized(v)?);
    }
    Ok(out)
}

fn overlap_vector(params: &GramSchmidtParams) -> Result<Vec<f64>> {
    let states = gram_schmidt_states(params)?;
    let mut v = Vec::new();
    for i in 0..states.len() {
        for j in i + 1..states.len() {
            let o = overlap(&states[i], &states[j])?;
            v.push(o.re);
            v.push(o.im);
        }
    }
    Ok(v)
}

/// Numeric rank of the Jacobian of the stacked overlap vector at `base`.
pub fn independent_parameter_rank(base: &GramSchmidtParams) -> Result<usize> {
    let x0 = base.flatten();
    let rows = overlap_vector(base)?.len();
    if rows == 0 || x0.is_empty() {
        return Ok(0);
    }
    let mut jac = DMatrix::<f64>::zeros(rows, x0.len());
    for p in 0..x0.len() {
        let mut xp = x0.clone();
        let mut xm = x0.clone();
        xp[p] += RANK_STEP;
        xm[p] -= RANK_STEP;
        let fp = overlap_vector(&base.unflatten(&xp))?;
        let fm = overlap_vector(&base.unflatten(&xm))?;
        for r in 0..rows {
            jac[(r, p)] = (fp[r] - fm[r]) / (2.0 * RANK_STEP);
        }
    }
    let sv = jac.singular_values();
    Ok(sv.iter().filter(|&&s| s > RANK_CUTOFF).count())
}

/// arg(⟨a|b⟩⟨b|c⟩⟨c|a⟩) in [0, 2π).
pub fn triad_phase(a: &InternalState, b: &InternalState, cc: &InternalState) -> Result<f64> {
    let ab = overlap(a, b)?;
    let bc = overlap(b, cc)?;
    let ca = overlap(cc, a)?;
    if ab.norm() < NORM_TOL || bc.norm() < NORM_TOL || ca.norm() < NORM_TOL {
        return Err(Error::UndefinedPhase);
    }
    Ok(wrap_phase((ab * bc * ca).arg()))
}

pub fn wrap_phase(x: f64) -> f64 {
    let w = x.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Wraps into (−π, π].
pub fn wrap_signed(x: f64) -> f64 {
    let w = wrap_phase(x);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Density matrix on an internal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedState {
    pub rho: CMatrix,
}

impl MixedState {
    pub fn new(rho: CMatrix) -> Result<Self> {
        let n = rho.nrows();
        if rho.ncols() != n {
            return Err(Error::Dimension("density matrix must be square".to_string()));
        }
        let dev = crate::numerics::hermitian_deviation(&rho);
        if dev > 1e-10 {
            return Err(Error::NotHermitian(dev));
        }
        let tr = rho.trace();
        if (tr - c(1.0, 0.0)).norm() > 1e-10 {
            return Err(Error::Parameter(format!("density matrix trace {tr}")));
        }
        let min = rho.clone().symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
        if min < -1e-10 {
            return Err(Error::Parameter(format!("density matrix not PSD (λ_min = {min})")));
        }
        Ok(Self { rho })
    }

    pub fn pure(state: &InternalState) -> Self {
        Self { rho: state.projector() }
    }

    /// Σ p_k |ψ_k⟩⟨ψ_k|
    pub fn ensemble(parts: &[(f64, InternalState)]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::Parameter("empty ensemble".to_string()))?;
        let d = first.1.dim();
        let mut rho = CMatrix::zeros(d, d);
        for (p, s) in parts {
            if s.dim() != d {
                return Err(Error::Dimension("ensemble members differ in dimension".to_string()));
            }
            rho += s.projector().scale(*p);
        }
        Self::new(rho)
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn purity(&self) -> f64 {
        (&self.rho * &self.rho).trace().re
    }
}

/// Tr(ρ_1 ρ_2 ⋯ ρ_n)
pub fn cyclic_trace(rhos: &[&MixedState]) -> Result<C64> {
    let first = rhos.first().ok_or_else(|| Error::Parameter("empty cycle".to_string()))?;
    let d = first.dim();
    let mut acc = first.rho.clone();
    for r in &rhos[1..] {
        if r.dim() != d {
            return Err(Error::Dimension(format!("density matrices of size {d} and {}", r.dim())));
        }
        acc = acc * &r.rho;
    }
    Ok(acc.trace())
}

/// 𝒫|ψ⟩⟨ψ| + (1−𝒫)|aux⟩⟨aux| with the auxiliary vector `aux_slot` of `aux_slots`
/// appended after the physical dimensions.
pub fn impure_state(
    pure: &InternalState,
    purity: f64,
    aux_slot: usize,
    aux_slots: usize,
) -> Result<MixedState> {
    if !(purity > 0.0 && purity <= 1.0) {
        return Err(Error::Parameter(format!("purity must lie in (0, 1], got {purity}")));
    }
    if aux_slot >= aux_slots {
        return Err(Error::Parameter(format!("aux slot {aux_slot} out of {aux_slots}")));
    }
    let d = pure.dim();
    let total = d + aux_slots;
    let mut rho = CMatrix::zeros(total, total);
    let p = pure.projector();
    for i in 0..d {
        for j in 0..d {
            rho[(i, j)] = p[(i, j)] * purity;
        }
    }
    rho[(d + aux_slot, d + aux_slot)] = c(1.0 - purity, 0.0);
    Ok(MixedState { rho })
}
