//! Detection-event probabilities for partially distinguishable photons in a linear
//! interferometer, and their decomposition into interference orders.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    c, cycle_decomposition, permanent, permutations, unitarity_residual, CMatrix, Permutation, C64,
};
use crate::states::{cyclic_trace, distinguishability_matrix, InternalState, MixedState};

pub const MAX_PHOTONS: usize = 8;
pub const UNITARY_TOL: f64 = 1e-8;
pub const IMAG_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistics {
    Boson,
    Fermion,
    Classical,
}

/// Photons per mode.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OccupationPattern(pub Vec<usize>);

impl OccupationPattern {
    pub fn new(occupations: Vec<usize>) -> Result<Self> {
        if occupations.is_empty() {
            return Err(Error::Parameter("pattern needs at least one mode".to_string()));
        }
        Ok(Self(occupations))
    }

    pub fn modes(&self) -> usize {
        self.0.len()
    }

    pub fn photons(&self) -> usize {
        self.0.iter().sum()
    }

    /// All patterns of `n` photons in `m` modes, in lexicographically descending order
    /// of the first mode.
    pub fn all(n: usize, m: usize) -> Vec<Self> {
        fn rec(n: usize, m: usize, prefix: &mut Vec<usize>, out: &mut Vec<OccupationPattern>) {
            if m == 1 {
                prefix.push(n);
                out.push(OccupationPattern(prefix.clone()));
                prefix.pop();
                return;
            }
            for k in (0..=n).rev() {
                prefix.push(k);
                rec(n - k, m - 1, prefix, out);
                prefix.pop();
            }
        }
        let mut out = Vec::new();
        if m > 0 {
            rec(n, m, &mut Vec::new(), &mut out);
        }
        out
    }

    fn factorial_product(&self) -> f64 {
        self.0.iter().map(|&k| (1..=k).product::<usize>() as f64).product()
    }
}

impl From<&[usize]> for OccupationPattern {
    fn from(v: &[usize]) -> Self {
        Self(v.to_vec())
    }
}

/// Mode index `i` repeated `n_i` times (0-based).
pub fn mode_assignment(p: &OccupationPattern) -> Vec<usize> {
    p.0.iter().enumerate().flat_map(|(i, &n)| std::iter::repeat(i).take(n)).collect()
}

/// Photon-indexed Gram matrix from a mode-indexed one: `G[k][l] = S[d(r)_k][d(r)_l]`.
pub fn build_g(s: &CMatrix, r: &OccupationPattern) -> Result<CMatrix> {
    if s.nrows() != r.modes() || s.ncols() != r.modes() {
        return Err(Error::Dimension(format!(
            "{}x{} overlap matrix for {} modes",
            s.nrows(),
            s.ncols(),
            r.modes()
        )));
    }
    let d = mode_assignment(r);
    Ok(CMatrix::from_fn(d.len(), d.len(), |k, l| s[(d[k], d[l])]))
}

/// Rows follow input photons `d(r)`, columns output slots `d(s)`: `M[i][j] = U[d(s)_j][d(r)_i]`.
pub fn build_m(u: &CMatrix, r: &OccupationPattern, s: &OccupationPattern) -> Result<CMatrix> {
    check_patterns(u, r, s)?;
    let dr = mode_assignment(r);
    let ds = mode_assignment(s);
    Ok(CMatrix::from_fn(dr.len(), ds.len(), |i, j| u[(ds[j], dr[i])]))
}

fn check_patterns(u: &CMatrix, r: &OccupationPattern, s: &OccupationPattern) -> Result<()> {
    if u.nrows() != u.ncols() {
        return Err(Error::Dimension("interferometer must be square".to_string()));
    }
    if r.modes() != u.nrows() || s.modes() != u.nrows() {
        return Err(Error::Dimension(format!(
            "patterns of {} and {} modes for a {}-mode interferometer",
            r.modes(),
            s.modes(),
            u.nrows()
        )));
    }
    if r.photons() != s.photons() {
        return Err(Error::PhotonNumber { input: r.photons(), output: s.photons() });
    }
    if r.photons() > MAX_PHOTONS {
        return Err(Error::TooLarge { what: "photon number", n: r.photons(), max: MAX_PHOTONS });
    }
    Ok(())
}

fn check_unitary(u: &CMatrix) -> Result<()> {
    let res = unitarity_residual(u);
    if res > UNITARY_TOL {
        return Err(Error::NotUnitary(res));
    }
    Ok(())
}

fn weight(sigma: &Permutation, stats: Statistics) -> f64 {
    match stats {
        Statistics::Boson => 1.0,
        Statistics::Fermion => f64::from(sigma.sign()),
        Statistics::Classical => {
            if sigma.is_identity() {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// perm(M ⋆ M*_σ) where row `i` of the second factor is row `σ(i)` of conj(M).
fn exchange_permanent(m: &CMatrix, sigma: &Permutation) -> Result<C64> {
    let n = m.nrows();
    let a = CMatrix::from_fn(n, n, |i, j| m[(i, j)] * m[(sigma.apply(i), j)].conj());
    permanent(&a)
}

/// Norm of the input state: Π over input modes of perm (bosons) or det (fermions) of the
/// Gram block of photons sharing that mode.
fn input_norm(g: &CMatrix, r: &OccupationPattern, stats: Statistics) -> Result<f64> {
    if stats == Statistics::Classical {
        return Ok(1.0);
    }
    let mut norm = 1.0;
    let mut start = 0;
    for &k in &r.0 {
        if k > 1 {
            let block = g.view((start, start), (k, k)).into_owned();
            let v = match stats {
                Statistics::Boson => permanent(&block)?.re,
                _ => block.determinant().re,
            };
            norm *= v;
        }
        start += k;
    }
    Ok(norm)
}

/// Σ_σ w(σ)·cycle_weight(σ)·perm(M ⋆ M*_σ), grouped by cycle type.
fn sum_terms<F>(
    u: &CMatrix,
    r: &OccupationPattern,
    s: &OccupationPattern,
    stats: Statistics,
    mut cycle_weight: F,
) -> Result<BTreeMap<Vec<usize>, C64>>
where
    F: FnMut(&Permutation) -> Result<C64>,
{
    let m = build_m(u, r, s)?;
    let n = r.photons();
    let mut terms: BTreeMap<Vec<usize>, C64> = BTreeMap::new();
    for sigma in permutations(n) {
        let w = weight(&sigma, stats);
        let entry = terms.entry(sigma.cycle_type()).or_insert(c(0.0, 0.0));
        if w == 0.0 {
            continue;
        }
        let g = cycle_weight(&sigma)?;
        if g == c(0.0, 0.0) {
            continue;
        }
        *entry += g * exchange_permanent(&m, &sigma)? * w;
    }
    Ok(terms)
}

fn finish(total: C64, norm: f64) -> Result<f64> {
    if norm.abs() < 1e-14 {
        // Pauli-forbidden input: no state to scatter.
        return Ok(0.0);
    }
    let p = total / norm;
    if p.im.abs() > IMAG_TOL {
        return Err(Error::ImaginaryResidue(p.im.abs()));
    }
    Ok(p.re)
}

/// Π_j ⟨ψ_σ(j)|ψ_j⟩: in perm(M ⋆ M*_σ) photon j's ket shares each output slot
/// with photon σ(j)'s bra.
fn gram_product(g: &CMatrix, sigma: &Permutation) -> C64 {
    (0..sigma.len()).fold(c(1.0, 0.0), |acc, j| acc * g[(sigma.apply(j), j)])
}

/// Event probability for photons with Gram matrix `g` (ordered as `d(r)`), entering with
/// occupations `r` and detected with occupations `s`.
pub fn event_probability(
    u: &CMatrix,
    g: &CMatrix,
    r: &OccupationPattern,
    s: &OccupationPattern,
    stats: Statistics,
) -> Result<f64> {
    let terms = decompose_raw(u, g, r, s, stats, None)?;
    let total: C64 = terms.values().sum();
    finish(total, s.factorial_product() * input_norm(g, r, stats)?)
}

/// Same as [`event_probability`], with internal states given per photon in `d(r)` order.
pub fn event_probability_states(
    u: &CMatrix,
    states: &[InternalState],
    r: &OccupationPattern,
    s: &OccupationPattern,
    stats: Statistics,
) -> Result<f64> {
    let g = distinguishability_matrix(states)?;
    event_probability(u, &g.0, r, s, stats)
}

/// Pure-state probability where every cycle of length ≥ 2 is damped by `purity^len`,
/// the value for impure photons whose mixed parts sit in private auxiliary slots.
pub fn event_probability_impure(
    u: &CMatrix,
    g: &CMatrix,
    r: &OccupationPattern,
    s: &OccupationPattern,
    purity: f64,
) -> Result<f64> {
    let terms = decompose_raw(u, g, r, s, Statistics::Boson, Some(purity))?;
    let total: C64 = terms.values().sum();
    let norm = input_norm(g, r, Statistics::Boson)?;
    finish(total, s.factorial_product() * norm)
}

fn decompose_raw(
    u: &CMatrix,
    g: &CMatrix,
    r: &OccupationPattern,
    s: &OccupationPattern,
    stats: Statistics,
    purity: Option<f64>,
) -> Result<BTreeMap<Vec<usize>, C64>> {
    check_patterns(u, r, s)?;
    check_unitary(u)?;
    let n = r.photons();
    if g.nrows() != n || g.ncols() != n {
        return Err(Error::Dimension(format!("{}x{} Gram matrix for {n} photons", g.nrows(), g.ncols())));
    }
    sum_terms(u, r, s, stats, |sigma| {
        let mut w = gram_product(g, sigma);
        if let Some(p) = purity {
            for cyc in cycle_decomposition(sigma) {
                if cyc.len() > 1 {
                    w *= p.powi(cyc.len() as i32);
                }
            }
        }
        Ok(w)
    })
}

/// Mixed-state probability: every cycle contributes the trace of its density-matrix product.
pub fn event_probability_mixed(
    u: &CMatrix,
    rhos: &[MixedState],
    r: &OccupationPattern,
    s: &OccupationPattern,
) -> Result<f64> {
    check_patterns(u, r, s)?;
    check_unitary(u)?;
    if r.0.iter().any(|&k| k > 1) {
        return Err(Error::Unsupported(
            "mixed states need at most one photon per input mode".to_string(),
        ));
    }
    if rhos.len() != r.photons() {
        return Err(Error::Dimension(format!(
            "{} density matrices for {} photons",
            rhos.len(),
            r.photons()
        )));
    }
    let terms = sum_terms(u, r, s, Statistics::Boson, |sigma| {
        let mut w = c(1.0, 0.0);
        for cyc in cycle_decomposition(sigma) {
            if cyc.len() > 1 {
                // Walked backwards so pure states reproduce Π⟨ψ_σ(j)|ψ_j⟩.
                let refs: Vec<&MixedState> = cyc.iter().rev().map(|&j| &rhos[j]).collect();
                w *= cyclic_trace(&refs)?;
            }
        }
        Ok(w)
    })?;
    finish(terms.values().sum(), s.factorial_product())
}

/// Ensemble average over joint pure-state realizations.
pub fn event_probability_ensemble(
    u: &CMatrix,
    ensembles: &[Vec<(f64, InternalState)>],
    r: &OccupationPattern,
    s: &OccupationPattern,
) -> Result<f64> {
    for e in ensembles {
        let total: f64 = e.iter().map(|(p, _)| p).sum();
        if (total - 1.0).abs() > 1e-10 || e.iter().any(|(p, _)| *p < 0.0) {
            return Err(Error::NotNormalized(total));
        }
    }
    if ensembles.len() != r.photons() {
        return Err(Error::Dimension(format!(
            "{} ensembles for {} photons",
            ensembles.len(),
            r.photons()
        )));
    }
    let mut idx = vec![0usize; ensembles.len()];
    let mut total = 0.0;
    loop {
        let weight: f64 = idx.iter().zip(ensembles).map(|(&k, e)| e[k].0).product();
        if weight > 0.0 {
            let states: Vec<InternalState> =
                idx.iter().zip(ensembles).map(|(&k, e)| e[k].1.clone()).collect();
            total += weight * event_probability_states(u, &states, r, s, Statistics::Boson)?;
        }
        let mut pos = 0;
        loop {
            if pos == idx.len() {
                return Ok(total);
            }
            idx[pos] += 1;
            if idx[pos] < ensembles[pos].len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// Probability split by cycle type. The partition `[1, 1, …]` is the classical term.
#[derive(Debug, Clone, PartialEq)]
pub struct EventProbabilityBreakdown {
    pub total: f64,
    pub terms: BTreeMap<Vec<usize>, f64>,
}

impl EventProbabilityBreakdown {
    /// Contribution of all terms whose largest cycle has length `k`.
    pub fn order(&self, k: usize) -> f64 {
        self.terms.iter().filter(|(t, _)| t.first() == Some(&k)).map(|(_, v)| v).sum()
    }
}

pub fn decompose_terms(
    u: &CMatrix,
    g: &CMatrix,
    r: &OccupationPattern,
    s: &OccupationPattern,
    stats: Statistics,
) -> Result<EventProbabilityBreakdown> {
    let raw = decompose_raw(u, g, r, s, stats, None)?;
    let norm = s.factorial_product() * input_norm(g, r, stats)?;
    let mut terms = BTreeMap::new();
    let mut total = 0.0;
    for (k, v) in raw {
        let p = finish(v, norm)?;
        total += p;
        terms.insert(k, p);
    }
    Ok(EventProbabilityBreakdown { total, terms })
}

/// Directed overlap graph; `edges[i][j]` holds ⟨φ_i|φ_j⟩ when above threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapGraph {
    pub edges: Vec<Vec<Option<C64>>>,
}

impl OverlapGraph {
    pub fn vertices(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges[i][j].is_some()
    }
}

pub const GRAPH_THRESHOLD: f64 = 1e-9;

pub fn overlap_graph(s: &CMatrix, threshold: f64) -> OverlapGraph {
    let n = s.nrows();
    let edges = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i != j && s[(i, j)].norm() >= threshold {
                        Some(s[(i, j)])
                    } else {
                        None
                    }
                })
                .collect()
        })
        .collect();
    OverlapGraph { edges }
}

/// True when a directed cycle visits every vertex exactly once.
pub fn has_n_photon_interference(g: &OverlapGraph) -> bool {
    let n = g.vertices();
    if n < 2 {
        return false;
    }
    fn extend(g: &OverlapGraph, path: &mut Vec<usize>, used: &mut [bool]) -> bool {
        let n = g.vertices();
        let last = *path.last().unwrap();
        if path.len() == n {
            return g.has_edge(last, path[0]);
        }
        for next in 0..n {
            if !used[next] && g.has_edge(last, next) {
                used[next] = true;
                path.push(next);
                if extend(g, path, used) {
                    return true;
                }
                path.pop();
                used[next] = false;
            }
        }
        false
    }
    let mut used = vec![false; n];
    used[0] = true;
    extend(g, &mut vec![0], &mut used)
}

/// Full output distribution over all patterns with `r.photons()` photons.
pub fn output_distribution(
    u: &CMatrix,
    g: &CMatrix,
    r: &OccupationPattern,
    stats: Statistics,
) -> Result<Vec<(OccupationPattern, f64)>> {
    OccupationPattern::all(r.photons(), r.modes())
        .into_iter()
        .map(|s| event_probability(u, g, r, &s, stats).map(|p| (s, p)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{InternalState, PolarizationState};
    use crate::numerics::CVector;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn bs() -> CMatrix {
        let h = 1.0 / 2f64.sqrt();
        CMatrix::from_row_slice(2, 2, &[c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0)])
    }

    fn tritter() -> CMatrix {
        let z = C64::from_polar(1.0, 2.0 * PI / 3.0);
        let one = c(1.0, 0.0);
        CMatrix::from_row_slice(3, 3, &[one, one, one, one, z * z, z, one, z, z * z])
            .scale(1.0 / 3f64.sqrt())
    }

    fn pat(v: &[usize]) -> OccupationPattern {
        OccupationPattern(v.to_vec())
    }

    fn random_state(d: usize, rng: &mut impl Rng) -> InternalState {
        let v = CVector::from_fn(d, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        InternalState::normalized(v).unwrap()
    }

    fn random_unitary(m: usize, rng: &mut impl Rng) -> CMatrix {
        let a = CMatrix::from_fn(m, m, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let qr = a.qr();
        qr.q()
    }

    fn gram(states: &[InternalState]) -> CMatrix {
        distinguishability_matrix(states).unwrap().0
    }

    #[test]
    fn mode_assignment_examples() {
        assert_eq!(mode_assignment(&pat(&[1, 1, 1])), vec![0, 1, 2]);
        assert_eq!(mode_assignment(&pat(&[2, 1])), vec![0, 0, 1]);
        assert_eq!(mode_assignment(&pat(&[0, 3])), vec![1, 1, 1]);
    }

    #[test]
    fn block_matrices() {
        let s = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.3, 0.2), c(0.3, -0.2), c(1.0, 0.0)]);
        assert_eq!(build_g(&s, &pat(&[1, 1])).unwrap(), s);
        let u = bs();
        assert_eq!(build_m(&u, &pat(&[1, 1]), &pat(&[1, 1])).unwrap(), u.transpose());
        let g = build_g(&s, &pat(&[2, 1])).unwrap();
        assert_eq!(g[(0, 1)], c(1.0, 0.0));
        assert_eq!(g[(0, 2)], s[(0, 1)]);
        let u = CMatrix::from_fn(2, 2, |i, j| c((i * 2 + j) as f64, 0.0));
        let m = build_m(&u, &pat(&[2, 1]), &pat(&[1, 2])).unwrap();
        // rows d(r) = (0,0,1), columns d(s) = (0,1,1)
        assert_eq!(m[(2, 0)], u[(0, 1)]);
        assert_eq!(m[(0, 2)], u[(1, 0)]);
        assert!(matches!(
            build_m(&u, &pat(&[2, 1]), &pat(&[1, 1])),
            Err(Error::PhotonNumber { .. })
        ));
        let ones = CMatrix::from_element(3, 3, c(1.0, 0.0));
        assert_eq!(build_g(&ones, &pat(&[1, 0, 2])).unwrap(), ones);
    }

    #[test]
    fn hom_and_fermion_antibunching() {
        let id = CMatrix::from_element(2, 2, c(1.0, 0.0));
        let orth = CMatrix::identity(2, 2);
        let r = pat(&[1, 1]);
        assert!(event_probability(&bs(), &id, &r, &r, Statistics::Boson).unwrap().abs() < 1e-15);
        assert!((event_probability(&bs(), &orth, &r, &r, Statistics::Boson).unwrap() - 0.5).abs() < 1e-15);
        assert!((event_probability(&bs(), &id, &r, &r, Statistics::Fermion).unwrap() - 1.0).abs() < 1e-15);
        assert!((event_probability(&bs(), &id, &r, &r, Statistics::Classical).unwrap() - 0.5).abs() < 1e-15);
        let ones = CMatrix::from_element(3, 3, c(1.0, 0.0));
        let r3 = pat(&[1, 1, 1]);
        let p = event_probability(&tritter(), &ones, &r3, &r3, Statistics::Boson).unwrap();
        assert!((p - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_input() {
        let g = CMatrix::identity(2, 2);
        let bad = CMatrix::from_element(2, 2, c(1.0, 0.0));
        let r = pat(&[1, 1]);
        assert!(matches!(event_probability(&bad, &g, &r, &r, Statistics::Boson), Err(Error::NotUnitary(_))));
        assert!(event_probability(&bs(), &g, &r, &pat(&[2, 1]), Statistics::Boson).is_err());
        let big = CMatrix::identity(9, 9);
        let r9 = pat(&[9, 0]);
        assert!(matches!(
            event_probability(&bs(), &big, &r9, &r9, Statistics::Boson),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn mixed_and_ensemble_beamsplitter() {
        let h = InternalState::new(PolarizationState::horizontal().vector()).unwrap();
        let v = InternalState::new(PolarizationState::vertical().vector()).unwrap();
        let r = pat(&[1, 1]);
        let mm = MixedState::ensemble(&[(0.5, h.clone()), (0.5, v.clone())]).unwrap();
        let p = event_probability_mixed(&bs(), &[mm.clone(), mm], &r, &r).unwrap();
        assert!((p - 0.25).abs() < 1e-14);
        let e = event_probability_ensemble(
            &bs(),
            &[vec![(0.5, h.clone()), (0.5, v.clone())], vec![(1.0, h.clone())]],
            &r,
            &r,
        )
        .unwrap();
        assert!((e - 0.25).abs() < 1e-14);
        let single = event_probability_ensemble(&bs(), &[vec![(1.0, h.clone())], vec![(1.0, h.clone())]], &r, &r).unwrap();
        assert!(single.abs() < 1e-15);
        assert!(matches!(
            event_probability_ensemble(&bs(), &[vec![(0.7, h.clone())], vec![(1.0, h.clone())]], &r, &r),
            Err(Error::NotNormalized(_))
        ));
        let p = MixedState::pure(&h);
        assert!(matches!(
            event_probability_mixed(&bs(), &[p.clone(), p], &pat(&[2, 0]), &r),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn breakdown_hom_and_tritter() {
        let id = CMatrix::from_element(2, 2, c(1.0, 0.0));
        let r = pat(&[1, 1]);
        let b = decompose_terms(&bs(), &id, &r, &r, Statistics::Boson).unwrap();
        assert!((b.terms[&vec![1, 1]] - 0.5).abs() < 1e-15);
        assert!((b.terms[&vec![2]] + 0.5).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let st: Vec<_> = (0..3).map(|_| random_state(3, &mut rng)).collect();
        let g = gram(&st);
        let (rab, rbc, rca) = (g[(0, 1)].norm(), g[(1, 2)].norm(), g[(2, 0)].norm());
        let phi = (g[(0, 1)] * g[(1, 2)] * g[(2, 0)]).arg();
        let r3 = pat(&[1, 1, 1]);
        let b = decompose_terms(&tritter(), &g, &r3, &r3, Statistics::Boson).unwrap();
        assert!((b.terms[&vec![1, 1, 1]] - 2.0 / 9.0).abs() < 1e-14);
        assert!((b.terms[&vec![2, 1]] + (rab * rab + rbc * rbc + rca * rca) / 9.0).abs() < 1e-14);
        assert!((b.terms[&vec![3]] - 4.0 * rab * rbc * rca * phi.cos() / 9.0).abs() < 1e-14);
        let p = event_probability(&tritter(), &g, &r3, &r3, Statistics::Boson).unwrap();
        assert!((b.total - p).abs() < 1e-14);

        let orth = CMatrix::identity(3, 3);
        let b = decompose_terms(&tritter(), &orth, &r3, &r3, Statistics::Boson).unwrap();
        assert!(b.terms[&vec![2, 1]].abs() < 1e-15 && b.terms[&vec![3]].abs() < 1e-15);
    }

    #[test]
    fn overlap_graph_examples() {
        let full = CMatrix::from_element(3, 3, c(0.5, 0.0));
        assert!(has_n_photon_interference(&overlap_graph(&full, GRAPH_THRESHOLD)));
        // square with both diagonals absent
        let mut sq = CMatrix::identity(4, 4);
        for i in 0..4 {
            sq[(i, (i + 1) % 4)] = c(0.5, 0.0);
            sq[((i + 1) % 4, i)] = c(0.5, 0.0);
        }
        assert!(has_n_photon_interference(&overlap_graph(&sq, GRAPH_THRESHOLD)));
        // vertex 0 orthogonal to 1 and 2, which are orthogonal to each other; 3 linked to all
        let mut star = CMatrix::identity(3, 3);
        star[(0, 1)] = c(0.5, 0.0);
        star[(1, 0)] = c(0.5, 0.0);
        star[(0, 2)] = c(0.5, 0.0);
        star[(2, 0)] = c(0.5, 0.0);
        assert!(!has_n_photon_interference(&overlap_graph(&star, GRAPH_THRESHOLD)));
        let g = overlap_graph(&sq, GRAPH_THRESHOLD);
        assert!(!g.has_edge(0, 2) && g.has_edge(0, 1));
    }

    fn sample_config(seed: u64) -> (CMatrix, Vec<InternalState>, OccupationPattern) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = rng.gen_range(2..=4);
        let n = rng.gen_range(1..=4);
        let d = rng.gen_range(1..=3);
        let u = random_unitary(m, &mut rng);
        let mut r = vec![0; m];
        for _ in 0..n {
            r[rng.gen_range(0..m)] += 1;
        }
        let states = (0..n).map(|_| random_state(d, &mut rng)).collect();
        (u, states, OccupationPattern(r))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn distributions_sum_to_one(seed in any::<u64>()) {
            let (u, states, r) = sample_config(seed);
            let g = gram(&states);
            for stats in [Statistics::Boson, Statistics::Fermion, Statistics::Classical] {
                let norm = input_norm(&g, &r, stats).unwrap();
                if norm.abs() < 1e-6 {
                    continue;
                }
                let total: f64 = output_distribution(&u, &g, &r, stats).unwrap().iter().map(|x| x.1).sum();
                prop_assert!((total - 1.0).abs() < 1e-8, "{stats:?}: {total}");
            }
        }

        #[test]
        fn mode_relabeling_invariance(seed in any::<u64>()) {
            let (u, states, r) = sample_config(seed);
            let m = u.nrows();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcdef);
            let mut pi: Vec<usize> = (0..m).collect();
            for i in (1..m).rev() {
                pi.swap(i, rng.gen_range(0..=i));
            }
            let mut pin: Vec<usize> = (0..m).collect();
            for i in (1..m).rev() {
                pin.swap(i, rng.gen_range(0..=i));
            }
            // output mode k -> pi[k], input mode k -> pin[k]
            let mut up = CMatrix::zeros(m, m);
            for i in 0..m {
                for j in 0..m {
                    up[(pi[i], pin[j])] = u[(i, j)];
                }
            }
            let mut rp = vec![0; m];
            for k in 0..m {
                rp[pin[k]] = r.0[k];
            }
            // photon order follows d(r'), so reorder states accordingly
            let dr = mode_assignment(&r);
            let mut order: Vec<usize> = (0..dr.len()).collect();
            order.sort_by_key(|&i| (pin[dr[i]], i));
            let sp: Vec<InternalState> = order.iter().map(|&i| states[i].clone()).collect();
            let g = gram(&states);
            let gp = gram(&sp);
            for s in OccupationPattern::all(r.photons(), m) {
                let mut sp_pat = vec![0; m];
                for k in 0..m {
                    sp_pat[pi[k]] = s.0[k];
                }
                let a = event_probability(&u, &g, &r, &s, Statistics::Boson).unwrap();
                let b = event_probability(&up, &gp, &OccupationPattern(rp.clone()), &OccupationPattern(sp_pat), Statistics::Boson).unwrap();
                prop_assert!((a - b).abs() < 1e-10);
            }
        }

        #[test]
        fn photon_phases_do_not_matter(seed in any::<u64>(), phases in proptest::collection::vec(-6.0f64..6.0, 4)) {
            let (u, states, r) = sample_config(seed);
            let shifted: Vec<_> = states.iter().zip(&phases).map(|(s, &p)| s.with_phase(p)).collect();
            let (g, gs) = (gram(&states), gram(&shifted));
            for s in OccupationPattern::all(r.photons(), r.modes()) {
                let a = event_probability(&u, &g, &r, &s, Statistics::Boson).unwrap();
                let b = event_probability(&u, &gs, &r, &s, Statistics::Boson).unwrap();
                prop_assert!((a - b).abs() < 1e-10);
            }
        }

        #[test]
        fn orthogonal_photons_ignore_statistics(seed in any::<u64>()) {
            let (u, states, r) = sample_config(seed);
            let g = CMatrix::identity(states.len(), states.len());
            for s in OccupationPattern::all(r.photons(), r.modes()) {
                let b = event_probability(&u, &g, &r, &s, Statistics::Boson).unwrap();
                let f = event_probability(&u, &g, &r, &s, Statistics::Fermion).unwrap();
                let cl = event_probability(&u, &g, &r, &s, Statistics::Classical).unwrap();
                prop_assert!((b - f).abs() < 1e-10 && (b - cl).abs() < 1e-10);
            }
        }

        #[test]
        fn breakdown_sums_to_total(seed in any::<u64>()) {
            let (u, states, r) = sample_config(seed);
            let g = gram(&states);
            for s in OccupationPattern::all(r.photons(), r.modes()).into_iter().take(6) {
                let b = decompose_terms(&u, &g, &r, &s, Statistics::Boson).unwrap();
                let p = event_probability(&u, &g, &r, &s, Statistics::Boson).unwrap();
                let sum: f64 = b.terms.values().sum();
                prop_assert!((b.total - p).abs() < 1e-10 && (sum - p).abs() < 1e-10);
            }
        }

        #[test]
        fn mixed_equals_ensemble(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = tritter();
            let r = pat(&[1, 1, 1]);
            let ens: Vec<Vec<(f64, InternalState)>> = (0..3).map(|_| {
                let p = rng.gen_range(0.05..0.95);
                vec![(p, random_state(3, &mut rng)), (1.0 - p, random_state(3, &mut rng))]
            }).collect();
            let rhos: Vec<MixedState> = ens.iter().map(|e| MixedState::ensemble(e).unwrap()).collect();
            for s in OccupationPattern::all(3, 3) {
                let a = event_probability_mixed(&u, &rhos, &r, &s).unwrap();
                let b = event_probability_ensemble(&u, &ens, &r, &s).unwrap();
                prop_assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn pure_mixed_matches_pure_engine() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let st: Vec<_> = (0..3).map(|_| random_state(2, &mut rng)).collect();
        let rhos: Vec<_> = st.iter().map(MixedState::pure).collect();
        let r = pat(&[1, 1, 1]);
        for s in OccupationPattern::all(3, 3) {
            let a = event_probability_mixed(&tritter(), &rhos, &r, &s).unwrap();
            let b = event_probability(&tritter(), &gram(&st), &r, &s, Statistics::Boson).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn impure_weighting_matches_aux_slots() {
        use crate::states::impure_state;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let st: Vec<_> = (0..3).map(|_| random_state(2, &mut rng)).collect();
        let rhos: Vec<_> = st.iter().enumerate().map(|(k, s)| impure_state(s, 0.9, k, 3).unwrap()).collect();
        let r = pat(&[1, 1, 1]);
        for s in OccupationPattern::all(3, 3) {
            let a = event_probability_mixed(&tritter(), &rhos, &r, &s).unwrap();
            let b = event_probability_impure(&tritter(), &gram(&st), &r, &s, 0.9).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }
}
