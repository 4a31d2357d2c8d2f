//! Band topology: SSH chain, winding numbers, Jackiw-Rebbi domain-wall modes,
//! Berry phases and Chern numbers, graphene dispersion.

use std::f64::consts::PI;

use serde::Serialize;

use super::{bond_vectors, SparseHamiltonian};
use crate::numerics::{c, CMatrix, CVector, C64};
use crate::{Error, Result};

/// Rounding residue allowed for integer invariants.
pub const INTEGER_TOL: f64 = 0.01;
/// A loop this close to the origin has closed the gap.
pub const GAP_TOL: f64 = 1e-8;

/// H(k) = (t_R + t_L cos k)σ_x + t_L sin k σ_y.
pub fn ssh_bloch(k: f64, t_l: f64, t_r: f64) -> CMatrix {
    let q = ssh_q(k, t_l, t_r);
    CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), q.conj(), q, c(0.0, 0.0)])
}

/// Off-diagonal element q(k) = t_R + t_L e^{ik}, so H(k) has q̄ above the diagonal.
pub fn ssh_q(k: f64, t_l: f64, t_r: f64) -> C64 {
    c(t_r, 0.0) + C64::from_polar(t_l, k)
}

/// E = ±√(t_R² + t_L² + 2 t_R t_L cos k), returned as (−E, +E).
pub fn ssh_dispersion(k: f64, t_l: f64, t_r: f64) -> (f64, f64) {
    let e = (t_r * t_r + t_l * t_l + 2.0 * t_r * t_l * k.cos()).max(0.0).sqrt();
    (-e, e)
}

/// Samples q(k) on `n` points of [0, 2π).
pub fn ssh_loop(t_l: f64, t_r: f64, n: usize) -> Vec<C64> {
    (0..n).map(|j| ssh_q(2.0 * PI * j as f64 / n as f64, t_l, t_r)).collect()
}

/// Number of counterclockwise turns of a closed sampled loop around 0.
pub fn winding_number(q: &[C64]) -> Result<i64> {
    if q.len() < 3 {
        return Err(Error::Parameter("winding number needs at least 3 samples".into()));
    }
    let min = q.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    if min < GAP_TOL {
        return Err(Error::GapClosed(min));
    }
    let total: f64 = (0..q.len()).map(|j| (q[(j + 1) % q.len()] / q[j]).arg()).sum();
    round_invariant(total / (2.0 * PI))
}

fn round_invariant(x: f64) -> Result<i64> {
    let r = x.round();
    if (x - r).abs() > INTEGER_TOL {
        return Err(Error::NonInteger((x - r).abs()));
    }
    Ok(r as i64)
}

/// Open SSH chain of `cells` unit cells (A, B per cell). Intra-cell hopping
/// t_R(n) from `t_r` per cell, inter-cell hopping `t_l`, both entering as −t.
pub fn ssh_chain_hamiltonian(t_r: &[f64], t_l: f64) -> SparseHamiltonian {
    let cells = t_r.len();
    let mut h = SparseHamiltonian::zeros(2 * cells);
    for n in 0..cells {
        h.set_pair(2 * n, 2 * n + 1, c(-t_r[n], 0.0));
        if n + 1 < cells {
            h.set_pair(2 * n + 1, 2 * n + 2, c(-t_l, 0.0));
        }
    }
    h
}

/// Intra-cell hoppings t_R = t_L + m(n) for a mass step of size `m0` at cell
/// `wall`: m = −m₀ before, +m₀ after.
pub fn domain_wall_hoppings(cells: usize, wall: usize, t_l: f64, m0: f64) -> Vec<f64> {
    (0..cells).map(|n| t_l + if n < wall { -m0 } else { m0 }).collect()
}

/// Two-component Jackiw-Rebbi profile on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JackiwRebbiMode {
    pub grid: Vec<f64>,
    /// Component on sublattice A.
    pub a: Vec<f64>,
    /// Component on sublattice B.
    pub b: Vec<f64>,
}

impl JackiwRebbiMode {
    /// Interleaves components as chain sites A₀, B₀, A₁, B₁, ... with the
    /// (−1)ⁿ staggering of the k = π expansion restored.
    pub fn chain_amplitudes(&self) -> Vec<f64> {
        self.a
            .iter()
            .zip(&self.b)
            .enumerate()
            .flat_map(|(n, (&a, &b))| {
                let s = if n % 2 == 0 { 1.0 } else { -1.0 };
                [s * a, s * b]
            })
            .collect()
    }
}

/// ψ(r) ∝ exp(−(1/t_L)∫_{r₀}^r m dr′) around the sign change r₀ of `mass`.
/// A mass rising through zero binds on B, a falling one on A.
pub fn jackiw_rebbi_mode(mass: &[f64], t_l: f64, grid: &[f64]) -> Result<JackiwRebbiMode> {
    if mass.len() != grid.len() || grid.len() < 2 {
        return Err(Error::Dimension("mass profile and grid must match".into()));
    }
    if !(t_l > 0.0) {
        return Err(Error::Parameter("t_L must be positive".into()));
    }
    let changes: Vec<usize> = (0..mass.len() - 1).filter(|&j| mass[j].signum() != mass[j + 1].signum()).collect();
    if changes.len() != 1 {
        return Err(Error::NoMode(format!("mass changes sign {} times, expected once", changes.len())));
    }
    let rising = mass[changes[0] + 1] > mass[changes[0]];
    let s = if rising { 1.0 } else { -1.0 };
    // Trapezoidal ∫ m from the left end; the reference point only sets the norm.
    let mut integral = vec![0.0; grid.len()];
    for j in 1..grid.len() {
        integral[j] = integral[j - 1] + 0.5 * (mass[j] + mass[j - 1]) * (grid[j] - grid[j - 1]);
    }
    let min = integral.iter().map(|v| s * v).fold(f64::INFINITY, f64::min);
    let mut psi: Vec<f64> = integral.iter().map(|v| (-(s * v - min) / t_l).exp()).collect();
    let norm = psi.iter().map(|v| v * v).sum::<f64>().sqrt();
    psi.iter_mut().for_each(|v| *v /= norm);
    let zero = vec![0.0; grid.len()];
    let (a, b) = if rising { (zero, psi) } else { (psi, zero) };
    Ok(JackiwRebbiMode { grid: grid.to_vec(), a, b })
}

/// arg Π⟨ψᵢ|ψᵢ₊₁⟩ around a closed loop, in (−π, π].
pub fn berry_phase(states: &[CVector]) -> Result<f64> {
    if states.len() < 2 {
        return Err(Error::Parameter("Berry phase needs a loop of at least two states".into()));
    }
    let mut prod = c(1.0, 0.0);
    for j in 0..states.len() {
        let o = states[j].dotc(&states[(j + 1) % states.len()]);
        if o.norm() < 1e-12 {
            return Err(Error::UndefinedPhase);
        }
        prod *= o / o.norm();
    }
    Ok(prod.arg())
}

/// Chern number of band `band` (ascending) by summing plaquette Berry fluxes
/// on an `n` × `n` grid over [0, 2π)².
pub fn chern_number<F>(bloch: F, n: usize, band: usize) -> Result<i64>
where
    F: Fn(f64, f64) -> CMatrix,
{
    if n < 3 {
        return Err(Error::Parameter("Chern grid needs n ≥ 3".into()));
    }
    let mut states = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let (kx, ky) = (2.0 * PI * i as f64 / n as f64, 2.0 * PI * j as f64 / n as f64);
            let eig = bloch(kx, ky).symmetric_eigen();
            let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
            if band >= order.len() {
                return Err(Error::Parameter(format!("band {band} out of range")));
            }
            let e = |b: usize| eig.eigenvalues[order[b]];
            let gap = [band.checked_sub(1), (band + 1 < order.len()).then_some(band + 1)]
                .into_iter()
                .flatten()
                .map(|b| (e(b) - e(band)).abs())
                .fold(f64::INFINITY, f64::min);
            if gap < GAP_TOL {
                return Err(Error::GapClosed(gap));
            }
            states.push(eig.eigenvectors.column(order[band]).into_owned());
        }
    }
    let at = |i: usize, j: usize| &states[(i % n) * n + (j % n)];
    let mut flux = 0.0;
    for i in 0..n {
        for j in 0..n {
            let links = at(i, j).dotc(at(i + 1, j))
                * at(i + 1, j).dotc(at(i + 1, j + 1))
                * at(i + 1, j + 1).dotc(at(i, j + 1))
                * at(i, j + 1).dotc(at(i, j));
            if links.norm() < 1e-14 {
                return Err(Error::UndefinedPhase);
            }
            flux += links.arg();
        }
    }
    round_invariant(flux / (2.0 * PI))
}

/// Two-band model d(k)·σ with d = (sin kx, sin ky, m + cos kx + cos ky). Its
/// lower-band spinor wraps the Bloch sphere once for 0 < |m| < 2.
pub fn two_band_bloch(kx: f64, ky: f64, m: f64) -> CMatrix {
    let (dx, dy, dz) = (kx.sin(), ky.sin(), m + kx.cos() + ky.cos());
    CMatrix::from_row_slice(2, 2, &[c(dz, 0.0), c(dx, -dy), c(dx, dy), c(-dz, 0.0)])
}

/// Bloch-sphere spinor (cos θ/2, e^{iφ} sin θ/2).
pub fn bloch_spinor(theta: f64, phi: f64) -> CVector {
    CVector::from_vec(vec![c((theta / 2.0).cos(), 0.0), C64::from_polar((theta / 2.0).sin(), phi)])
}

/// Φ(k) = −t Σ_j e^{ik·s_j}; returns (−|Φ|, +|Φ|).
pub fn graphene_dispersion(k: [f64; 2], t: f64, a0: f64) -> (f64, f64) {
    let phi: C64 = bond_vectors(a0).iter().map(|s| C64::from_polar(-t, k[0] * s[0] + k[1] * s[1])).sum();
    (-phi.norm(), phi.norm())
}

/// v_F = 3ta₀/2.
pub fn fermi_velocity(t: f64, a0: f64) -> f64 {
    1.5 * t * a0
}
