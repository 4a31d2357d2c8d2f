//! First-quantization reference for event probabilities.
//!
//! Photons are placed in a dense tensor over (mode ⊗ internal)^N, projected with the
//! symmetrizer or antisymmetrizer, propagated factor by factor and measured by summing
//! squared amplitudes over all basis tuples with the requested mode occupations. No
//! permanent appears anywhere in this path.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::engine::{event_probability_states, OccupationPattern, Statistics};
use crate::error::{Error, Result};
use crate::numerics::{c, random_unitary, random_vector, CMatrix, CVector, C64};
use crate::states::InternalState;

pub const MAX_ORACLE_PHOTONS: usize = 5;
pub const MAX_ORACLE_SPACE: usize = 12;

/// Dense N-particle amplitude tensor.
#[derive(Debug, Clone)]
pub struct FirstQuantizedState {
    pub local_dim: usize,
    pub particles: usize,
    pub amplitudes: Vec<C64>,
}

impl FirstQuantizedState {
    fn product(vectors: &[CVector], order: &[usize]) -> Self {
        let n = vectors.len();
        let d = vectors.first().map_or(1, |v| v.len());
        let size = d.pow(n as u32);
        let mut amplitudes = vec![c(0.0, 0.0); size];
        let mut idx = vec![0usize; n];
        for amp in amplitudes.iter_mut() {
            let mut a = c(1.0, 0.0);
            for (slot, &k) in idx.iter().enumerate() {
                a *= vectors[order[slot]][k];
            }
            *amp = a;
            for pos in (0..n).rev() {
                idx[pos] += 1;
                if idx[pos] < d {
                    break;
                }
                idx[pos] = 0;
            }
        }
        Self { local_dim: d, particles: n, amplitudes }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }
}

/// Heap's algorithm, yielding (ordering, parity).
fn orderings(n: usize) -> Vec<(Vec<usize>, i32)> {
    let mut a: Vec<usize> = (0..n).collect();
    let mut out = vec![(a.clone(), 1)];
    let mut cnt = vec![0usize; n];
    let mut sign = 1;
    let mut i = 1;
    while i < n {
        if cnt[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(cnt[i], i);
            }
            sign = -sign;
            out.push((a.clone(), sign));
            cnt[i] += 1;
            i = 1;
        } else {
            cnt[i] = 0;
            i += 1;
        }
    }
    out
}

fn propagated_photons(
    u: &CMatrix,
    states: &[InternalState],
    r: &OccupationPattern,
) -> Result<(Vec<CVector>, usize)> {
    let m = u.nrows();
    let n = r.photons();
    if states.len() != n {
        return Err(Error::Dimension(format!("{} states for {n} photons", states.len())));
    }
    if n > MAX_ORACLE_PHOTONS {
        return Err(Error::TooLarge { what: "oracle photon number", n, max: MAX_ORACLE_PHOTONS });
    }
    let d = states.first().map_or(1, InternalState::dim);
    if m * d > MAX_ORACLE_SPACE {
        return Err(Error::TooLarge { what: "oracle single-particle dimension", n: m * d, max: MAX_ORACLE_SPACE });
    }
    let modes: Vec<usize> = r.0.iter().enumerate().flat_map(|(i, &k)| std::iter::repeat(i).take(k)).collect();
    let mut out = Vec::with_capacity(n);
    for (photon, &mode) in modes.iter().enumerate() {
        let st = &states[photon];
        if st.dim() != d {
            return Err(Error::Dimension("states differ in internal dimension".to_string()));
        }
        // (U ⊗ 1)(|mode⟩ ⊗ |φ⟩)
        let mut v = CVector::zeros(m * d);
        for out_mode in 0..m {
            for k in 0..d {
                v[out_mode * d + k] = u[(out_mode, mode)] * st.amplitudes[k];
            }
        }
        out.push(v);
    }
    Ok((out, d))
}

/// Builds the propagated N-photon state. Bosons and fermions are (anti)symmetrized,
/// classical photons keep their labels.
pub fn propagated_state(
    u: &CMatrix,
    states: &[InternalState],
    r: &OccupationPattern,
    stats: Statistics,
) -> Result<FirstQuantizedState> {
    let (vectors, _) = propagated_photons(u, states, r)?;
    let n = vectors.len();
    let identity: Vec<usize> = (0..n).collect();
    let mut acc = FirstQuantizedState::product(&vectors, &identity);
    if stats == Statistics::Classical {
        return Ok(acc);
    }
    for amp in acc.amplitudes.iter_mut() {
        *amp = c(0.0, 0.0);
    }
    for (order, parity) in orderings(n) {
        let term = FirstQuantizedState::product(&vectors, &order);
        let sign = if stats == Statistics::Fermion { f64::from(parity) } else { 1.0 };
        for (a, t) in acc.amplitudes.iter_mut().zip(&term.amplitudes) {
            *a += t * sign;
        }
    }
    Ok(acc)
}

/// Probability that the output mode occupations equal `s`.
pub fn brute_force_probability(
    u: &CMatrix,
    states: &[InternalState],
    r: &OccupationPattern,
    s: &OccupationPattern,
    stats: Statistics,
) -> Result<f64> {
    if r.photons() != s.photons() {
        return Err(Error::PhotonNumber { input: r.photons(), output: s.photons() });
    }
    if u.nrows() != r.modes() || u.nrows() != s.modes() {
        return Err(Error::Dimension("pattern length differs from interferometer size".to_string()));
    }
    let psi = propagated_state(u, states, r, stats)?;
    let norm = psi.norm_sqr();
    if norm < 1e-24 {
        return Ok(0.0);
    }
    let d = states.first().map_or(1, InternalState::dim);
    let n = psi.particles;
    let m = u.nrows();
    let mut idx = vec![0usize; n];
    let mut hit = 0.0;
    for amp in &psi.amplitudes {
        let mut occ = vec![0usize; m];
        for &k in &idx {
            occ[k / d] += 1;
        }
        if occ == s.0 {
            hit += amp.norm_sqr();
        }
        for pos in (0..n).rev() {
            idx[pos] += 1;
            if idx[pos] < psi.local_dim {
                break;
            }
            idx[pos] = 0;
        }
    }
    Ok(hit / norm)
}

/// A random scattering problem: 2–4 modes, 1–4 photons, internal dimension 1–3.
pub fn random_configuration(seed: u64) -> Result<(CMatrix, Vec<InternalState>, OccupationPattern)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.gen_range(2..=4);
    let n = rng.gen_range(1..=4);
    let d = rng.gen_range(1..=3);
    let u = random_unitary(m, &mut rng);
    let mut r = vec![0; m];
    for _ in 0..n {
        r[rng.gen_range(0..m)] += 1;
    }
    let states = (0..n).map(|_| InternalState::new(random_vector(d, &mut rng))).collect::<Result<_>>()?;
    Ok((u, states, OccupationPattern(r)))
}

/// Summary of an engine-versus-oracle comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub configurations: usize,
    /// Individual (statistics, output pattern) probabilities compared.
    pub comparisons: usize,
    pub max_error: f64,
    pub worst_seed: u64,
}

/// Compares the permanent engine with this oracle on `configurations` random
/// problems (seeds `seed`, `seed + 1`, ...), for every statistics and every
/// output pattern.
pub fn equivalence_check(configurations: usize, seed: u64) -> Result<EquivalenceReport> {
    let mut report = EquivalenceReport { configurations, comparisons: 0, max_error: 0.0, worst_seed: seed };
    for k in 0..configurations as u64 {
        let (u, states, r) = random_configuration(seed + k)?;
        for stats in [Statistics::Boson, Statistics::Fermion, Statistics::Classical] {
            for s in OccupationPattern::all(r.photons(), r.modes()) {
                let engine = event_probability_states(&u, &states, &r, &s, stats)?;
                let oracle = brute_force_probability(&u, &states, &r, &s, stats)?;
                report.comparisons += 1;
                let err = (engine - oracle).abs();
                if err > report.max_error {
                    report.max_error = err;
                    report.worst_seed = seed + k;
                }
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::PolarizationState;
    use std::f64::consts::PI;

    fn h() -> InternalState {
        InternalState::new(PolarizationState::horizontal().vector()).unwrap()
    }

    #[test]
    fn heap_orderings_cover_all() {
        let o = orderings(4);
        assert_eq!(o.len(), 24);
        let mut seen: Vec<Vec<usize>> = o.iter().map(|x| x.0.clone()).collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 24);
        assert_eq!(o.iter().map(|x| x.1).sum::<i32>(), 0);
    }

    #[test]
    fn hom_dip_and_tritter() {
        let x = 1.0 / 2f64.sqrt();
        let bs = CMatrix::from_row_slice(2, 2, &[c(x, 0.0), c(x, 0.0), c(x, 0.0), c(-x, 0.0)]);
        let r = OccupationPattern(vec![1, 1]);
        let p = brute_force_probability(&bs, &[h(), h()], &r, &r, Statistics::Boson).unwrap();
        assert!(p.abs() < 1e-15);
        let z = C64::from_polar(1.0, 2.0 * PI / 3.0);
        let one = c(1.0, 0.0);
        let t = CMatrix::from_row_slice(3, 3, &[one, one, one, one, z * z, z, one, z, z * z])
            .scale(1.0 / 3f64.sqrt());
        let r3 = OccupationPattern(vec![1, 1, 1]);
        let p = brute_force_probability(&t, &[h(), h(), h()], &r3, &r3, Statistics::Boson).unwrap();
        assert!((p - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn agrees_with_the_engine() {
        let report = equivalence_check(30, 7).unwrap();
        assert!(report.comparisons > 100);
        assert!(report.max_error < 1e-10, "{report:?}");
    }

    #[test]
    fn pauli_exclusion() {
        let u = CMatrix::identity(2, 2);
        let r = OccupationPattern(vec![2, 0]);
        let p = brute_force_probability(&u, &[h(), h()], &r, &r, Statistics::Fermion).unwrap();
        assert_eq!(p, 0.0);
    }

    #[test]
    fn size_limits() {
        let u = CMatrix::identity(2, 2);
        let r = OccupationPattern(vec![3, 3]);
        let st = vec![h(); 6];
        assert!(matches!(
            brute_force_probability(&u, &st, &r, &r, Statistics::Boson),
            Err(Error::TooLarge { .. })
        ));
        let u7 = CMatrix::identity(7, 7);
        let r7 = OccupationPattern(vec![1, 0, 0, 0, 0, 0, 0]);
        assert!(brute_force_probability(&u7, &[h()], &r7, &r7, Statistics::Boson).is_err());
    }
}
