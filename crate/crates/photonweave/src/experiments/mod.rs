//! Scenario generators for the three- and four-photon experiments: delay scans on the
//! tritter, the triad-phase sweep with compensating delays, circle-dance interference on
//! the quitter, the phase-locking monitor, and visibilities.

pub mod noise;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::engine::{event_probability, OccupationPattern, Statistics};
use crate::error::{Error, Result};
use crate::interferometers::{quitter, tritter};
use crate::numerics::{c, CMatrix, C64};
use crate::states::{
    gram_schmidt_coordinates, overlap, triad_phase, unequal_width_overlap, GaussianWavepacket,
    InternalState, PolarizationState,
};

pub use noise::{
    simulate_counts, source_emission_density, ClickRule, CountScenario, CountSummary, DetectorConfig,
    EmissionTerm, SourceModel, SourceSpec,
};

/// A single photon: polarization times a Gaussian temporal mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Photon {
    pub pol: PolarizationState,
    pub packet: GaussianWavepacket,
}

impl Photon {
    pub fn new(pol: PolarizationState, t: f64, sigma: f64) -> Self {
        Self { pol, packet: GaussianWavepacket::new(t, sigma) }
    }
}

pub fn polarization_overlap(a: &PolarizationState, b: &PolarizationState) -> C64 {
    a.h.conj() * b.h + a.v.conj() * b.v
}

/// ⟨a|b⟩ for two photons.
pub fn photon_overlap(a: &Photon, b: &Photon) -> Result<C64> {
    Ok(polarization_overlap(&a.pol, &b.pol) * unequal_width_overlap(&a.packet, &b.packet)?)
}

/// Gram matrix of a photon list.
pub fn photon_gram(photons: &[Photon]) -> Result<CMatrix> {
    let n = photons.len();
    let mut g = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            g[(i, j)] = photon_overlap(&photons[i], &photons[j])?;
        }
    }
    Ok(g)
}

/// Concrete internal-state vectors (temporal coordinates ⊗ polarization) for a photon list.
pub fn photon_states(photons: &[Photon]) -> Result<Vec<InternalState>> {
    let packets: Vec<GaussianWavepacket> = photons.iter().map(|p| p.packet).collect();
    let temporal = crate::states::temporal_basis(&packets)?;
    photons.iter().zip(&temporal).map(|(p, t)| InternalState::product(t, &p.pol)).collect()
}

pub(crate) fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Closed-form tritter probabilities for one photon in each input, in terms of the
/// overlap moduli and the triad phase. The pattern labels below hold for the complex
/// conjugate of [`crate::interferometers::tritter`]; on that matrix itself `p120` and
/// `p021` swap pattern classes (equivalently φ → −φ).
pub mod tritter_formulas {
    use std::f64::consts::PI;

    fn sum_sq(r: [f64; 3]) -> f64 {
        r.iter().map(|x| x * x).sum()
    }

    /// All three outputs occupied.
    pub fn p111(r: [f64; 3], phi: f64) -> f64 {
        (2.0 + 4.0 * r[0] * r[1] * r[2] * phi.cos() - sum_sq(r)) / 9.0
    }

    /// All photons in one output.
    pub fn p300(r: [f64; 3], phi: f64) -> f64 {
        (1.0 + sum_sq(r) + 2.0 * r[0] * r[1] * r[2] * phi.cos()) / 27.0
    }

    /// Patterns (1,2,0), (0,1,2), (2,0,1).
    pub fn p120(r: [f64; 3], phi: f64) -> f64 {
        (1.0 - 2.0 * r[0] * r[1] * r[2] * (phi + PI / 3.0).cos()) / 9.0
    }

    /// Patterns (0,2,1), (2,1,0), (1,0,2).
    pub fn p021(r: [f64; 3], phi: f64) -> f64 {
        (1.0 - 2.0 * r[0] * r[1] * r[2] * (phi - PI / 3.0).cos()) / 9.0
    }

    /// Two photons in two inputs, detected in two distinct outputs.
    pub fn p011(r_pair: f64) -> f64 {
        (2.0 - r_pair * r_pair) / 9.0
    }
}

/// Three photons on the tritter with delays t1 = t2 − τ/2, t3 = t2 + τ/2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreePhotonScenario {
    pub pols: [PolarizationState; 3],
    pub sigma: f64,
}

impl ThreePhotonScenario {
    pub fn identical(sigma: f64) -> Self {
        let h = PolarizationState::horizontal();
        Self { pols: [h, h, h], sigma }
    }

    /// Linear polarizations 60° apart, i.e. 120° on the Bloch sphere.
    pub fn mercedes(sigma: f64) -> Self {
        Self {
            pols: [
                PolarizationState::horizontal(),
                PolarizationState::linear(PI / 3.0),
                PolarizationState::linear(-PI / 3.0),
            ],
            sigma,
        }
    }

    pub fn photons(&self, tau: f64) -> [Photon; 3] {
        [
            Photon::new(self.pols[0], -tau / 2.0, self.sigma),
            Photon::new(self.pols[1], 0.0, self.sigma),
            Photon::new(self.pols[2], tau / 2.0, self.sigma),
        ]
    }

    /// Threefold coincidence on the ideal tritter at delay τ.
    pub fn p111(&self, tau: f64) -> Result<f64> {
        let g = photon_gram(&self.photons(tau))?;
        let one = OccupationPattern(vec![1, 1, 1]);
        event_probability(&tritter().matrix, &g, &one, &one, Statistics::Boson)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub tau: f64,
    pub p111: f64,
}

pub fn three_photon_scan(scenario: &ThreePhotonScenario, taus: &[f64]) -> Result<Vec<ScanPoint>> {
    par_map(taus, |&tau| scenario.p111(tau).map(|p111| ScanPoint { tau, p111 })).into_iter().collect()
}

/// Identical horizontal photons: the W-shaped curve.
pub fn w_shape_scan(sigma: f64, taus: &[f64]) -> Result<Vec<ScanPoint>> {
    three_photon_scan(&ThreePhotonScenario::identical(sigma), taus)
}

pub fn mercedes_scan(sigma: f64, taus: &[f64]) -> Result<Vec<ScanPoint>> {
    three_photon_scan(&ThreePhotonScenario::mercedes(sigma), taus)
}

/// Indices of strict interior local minima.
pub fn local_minima(values: &[f64]) -> Vec<usize> {
    (1..values.len().saturating_sub(1))
        .filter(|&i| values[i] < values[i - 1] && values[i] < values[i + 1])
        .collect()
}

/// Delay of photon a relative to b and c that keeps |⟨a|b⟩|² = |⟨a|c⟩|² = 1/4.
pub fn triad_delay(theta: f64, sigma: f64) -> f64 {
    sigma * (2.0 * (2.0 + (4.0 * theta).cos()).ln()).sqrt()
}

/// Photons a = (cos 2θ, i sin 2θ) delayed, b = (√3/2, 1/2), c = (√3/2, −1/2) at zero.
pub fn triad_photons(theta: f64, sigma: f64) -> Result<[Photon; 3]> {
    let s3 = 3f64.sqrt() / 2.0;
    let a = PolarizationState::new(c((2.0 * theta).cos(), 0.0), c(0.0, (2.0 * theta).sin()))?;
    let b = PolarizationState::new(c(s3, 0.0), c(0.5, 0.0))?;
    let cc = PolarizationState::new(c(s3, 0.0), c(-0.5, 0.0))?;
    Ok([
        Photon::new(a, triad_delay(theta, sigma), sigma),
        Photon::new(b, 0.0, sigma),
        Photon::new(cc, 0.0, sigma),
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriadPoint {
    pub theta: f64,
    pub delay: f64,
    pub phase: f64,
    pub photons: [Photon; 3],
    pub p111: f64,
    /// Twofold coincidences for input pairs (b,c), (a,c), (a,b).
    pub p011: f64,
    pub p101: f64,
    pub p110: f64,
}

pub fn triad_point(theta: f64, sigma: f64) -> Result<TriadPoint> {
    if !(0.0..=PI / 2.0 + 1e-12).contains(&theta) {
        return Err(Error::Parameter(format!("theta {theta} outside [0, π/2]")));
    }
    let photons = triad_photons(theta, sigma)?;
    let states = photon_states(&photons)?;
    let phase = triad_phase(&states[0], &states[1], &states[2])?;
    let u = tritter().matrix;
    let g = photon_gram(&photons)?;
    let one = OccupationPattern(vec![1, 1, 1]);
    let p111 = event_probability(&u, &g, &one, &one, Statistics::Boson)?;
    let pair = |i: usize, j: usize| -> Result<f64> {
        let mut occ = vec![0, 0, 0];
        occ[i] = 1;
        occ[j] = 1;
        let gp = CMatrix::from_row_slice(2, 2, &[g[(i, i)], g[(i, j)], g[(j, i)], g[(j, j)]]);
        let pat = OccupationPattern(occ);
        event_probability(&u, &gp, &pat, &pat, Statistics::Boson)
    };
    Ok(TriadPoint {
        theta,
        delay: triad_delay(theta, sigma),
        phase,
        photons,
        p111,
        p011: pair(1, 2)?,
        p101: pair(0, 2)?,
        p110: pair(0, 1)?,
    })
}

pub fn triad_sweep(thetas: &[f64], sigma: f64) -> Result<Vec<TriadPoint>> {
    par_map(thetas, |&t| triad_point(t, sigma)).into_iter().collect()
}

/// Four-fold probability on the quitter for a cyclic overlap graph with moduli
/// `r = [r_ab, r_bc, r_cd, r_ad]`.
pub fn p5678(r: [f64; 4], chi: f64, theta: f64) -> f64 {
    let [ab, bc, cd, ad] = r;
    let c2 = (2.0 * chi).cos();
    (3.0 - ab * ab - bc * bc - cd * cd - ad * ad
        + (2.0 + c2) * (ab * ab * cd * cd + ad * ad * bc * bc)
        + 2.0 * (c2 - 2.0) * ab * bc * cd * ad * theta.cos())
        / 32.0
}

pub const BANDWIDTH_RATIO: f64 = 2.2;
pub const MAX_WALKOFF_OVERLAP: f64 = 0.1;

/// Four photons a = |H,t1⟩, b = |+,t2⟩, c = |V,t1⟩, d = (|H⟩ + e^{iθ}|V⟩)|t3⟩/√2, with a
/// and c broad in time and b and d narrow. Injection: d, b, c, a into inputs 0..3.
///
/// With `orthogonalize` the temporal mode of d is projected orthogonal to that of b, so
/// ⟨b|d⟩ vanishes exactly; otherwise the residual walk-off overlap is kept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleDanceScenario {
    pub theta: f64,
    pub chi: f64,
    pub sigma_broad: f64,
    pub sigma_narrow: f64,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub orthogonalize: bool,
}

/// Overlap moduli around the cycle plus the residual narrow-mode overlap |⟨t2|t3⟩|.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleOverlaps {
    pub ab: f64,
    pub bc: f64,
    pub cd: f64,
    pub ad: f64,
    pub ac: f64,
    pub bd: f64,
    pub t23: f64,
}

impl CircleOverlaps {
    pub fn cycle(&self) -> [f64; 4] {
        [self.ab, self.bc, self.cd, self.ad]
    }
}

impl CircleDanceScenario {
    /// Symmetric walk-off with the narrow modes separated by `separation`.
    pub fn symmetric(theta: f64, chi: f64, sigma_narrow: f64, separation: f64) -> Self {
        Self {
            theta,
            chi,
            sigma_broad: BANDWIDTH_RATIO * sigma_narrow,
            sigma_narrow,
            t1: 0.0,
            t2: -separation / 2.0,
            t3: separation / 2.0,
            orthogonalize: true,
        }
    }

    pub fn with_theta(&self, theta: f64) -> Self {
        Self { theta, ..*self }
    }

    fn packets(&self) -> [GaussianWavepacket; 3] {
        [
            GaussianWavepacket::new(self.t1, self.sigma_broad),
            GaussianWavepacket::new(self.t2, self.sigma_narrow),
            GaussianWavepacket::new(self.t3, self.sigma_narrow),
        ]
    }

    pub fn narrow_overlap(&self) -> Result<f64> {
        let [_, p2, p3] = self.packets();
        Ok(unequal_width_overlap(&p2, &p3)?.norm())
    }

    /// Internal states in injection order (d, b, c, a).
    pub fn states(&self) -> Result<Vec<InternalState>> {
        let p = self.packets();
        let mut gram = CMatrix::zeros(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                gram[(i, j)] = unequal_width_overlap(&p[i], &p[j])?;
            }
        }
        if self.orthogonalize {
            // |t3'⟩ = (|t3⟩ − ⟨t2|t3⟩|t2⟩)/n
            let g23 = gram[(1, 2)];
            let n = (1.0 - g23.norm_sqr()).sqrt();
            if n < 1e-9 {
                return Err(Error::Parameter("narrow modes coincide".into()));
            }
            let g13 = (gram[(0, 2)] - gram[(0, 1)] * g23) / n;
            gram[(0, 2)] = g13;
            gram[(2, 0)] = g13.conj();
            gram[(1, 2)] = c(0.0, 0.0);
            gram[(2, 1)] = c(0.0, 0.0);
        }
        let t = gram_schmidt_coordinates(&gram)?;
        let h = PolarizationState::horizontal();
        let v = PolarizationState::vertical();
        let plus = PolarizationState::linear(PI / 4.0);
        let s = 0.5f64.sqrt();
        let d_pol = PolarizationState::new(c(s, 0.0), C64::from_polar(s, self.theta))?;
        Ok(vec![
            InternalState::product(&t[2], &d_pol)?,
            InternalState::product(&t[1], &plus)?,
            InternalState::product(&t[0], &v)?,
            InternalState::product(&t[0], &h)?,
        ])
    }

    pub fn overlaps(&self) -> Result<CircleOverlaps> {
        let s = self.states()?;
        let (d, b, cc, a) = (&s[0], &s[1], &s[2], &s[3]);
        Ok(CircleOverlaps {
            ab: overlap(a, b)?.norm(),
            bc: overlap(b, cc)?.norm(),
            cd: overlap(cc, d)?.norm(),
            ad: overlap(a, d)?.norm(),
            ac: overlap(a, cc)?.norm(),
            bd: overlap(b, d)?.norm(),
            t23: self.narrow_overlap()?,
        })
    }
}

/// Four-fold coincidence from the closed form.
pub fn circle_dance_probability(scenario: &CircleDanceScenario) -> Result<f64> {
    let r = scenario.overlaps()?;
    Ok(p5678(r.cycle(), scenario.chi, scenario.theta))
}

/// Probability of output occupations `s` from the generic engine on quitter(χ).
pub fn circle_dance_engine(scenario: &CircleDanceScenario, s: &OccupationPattern) -> Result<f64> {
    let states = scenario.states()?;
    let g = crate::states::distinguishability_matrix(&states)?;
    event_probability(&quitter(scenario.chi).matrix, &g.0, &OccupationPattern(vec![1; 4]), s, Statistics::Boson)
}

/// Output distributions when only a proper subset of the four photons is injected, for
/// every nonempty subset (indices into the injection order d, b, c, a). Uniform loss
/// reduces lower-order coincidences to these.
pub fn circle_dance_subsets(
    scenario: &CircleDanceScenario,
) -> Result<Vec<(Vec<usize>, Vec<(OccupationPattern, f64)>)>> {
    let states = scenario.states()?;
    let u = quitter(scenario.chi).matrix;
    let mut out = Vec::new();
    for mask in 1u32..15 {
        let subset: Vec<usize> = (0..4).filter(|k| mask >> k & 1 == 1).collect();
        let chosen: Vec<InternalState> = subset.iter().map(|&k| states[k].clone()).collect();
        let g = crate::states::distinguishability_matrix(&chosen)?;
        let r = OccupationPattern((0..4).map(|k| (mask >> k & 1) as usize).collect());
        out.push((subset, crate::engine::output_distribution(&u, &g.0, &r, Statistics::Boson)?));
    }
    Ok(out)
}

/// Fringe visibility (max − min)/max of the closed-form four-fold probability over θ.
pub fn circle_dance_visibility(scenario: &CircleDanceScenario) -> Result<f64> {
    let r = scenario.overlaps()?.cycle();
    let (a, b) = (p5678(r, scenario.chi, 0.0), p5678(r, scenario.chi, PI));
    let (hi, lo) = (a.max(b), a.min(b));
    Ok((hi - lo) / hi)
}

/// Maximizes the circle-dance visibility over the separation of the narrow modes,
/// subject to |⟨t2|t3⟩| ≤ `max_overlap`. Golden-section search on the separation.
pub fn optimize_walkoff(
    sigma_narrow: f64,
    chi: f64,
    max_overlap: f64,
    orthogonalize: bool,
) -> Result<(CircleDanceScenario, f64)> {
    if !(max_overlap > 0.0 && max_overlap < 1.0) {
        return Err(Error::Parameter(format!("overlap bound {max_overlap} outside (0, 1)")));
    }
    // Equal narrow widths: |⟨t2|t3⟩| = exp(−δ²/(4σ²)).
    let min_sep = 2.0 * sigma_narrow * (-max_overlap.ln()).sqrt();
    let eval = |sep: f64| -> Result<f64> {
        let mut sc = CircleDanceScenario::symmetric(0.0, chi, sigma_narrow, sep);
        sc.orthogonalize = orthogonalize;
        circle_dance_visibility(&sc)
    };
    let (mut lo, mut hi) = (min_sep, min_sep + 8.0 * BANDWIDTH_RATIO * sigma_narrow);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let x1 = hi - g * (hi - lo);
        let x2 = lo + g * (hi - lo);
        if eval(x1)? >= eval(x2)? {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    let sep = 0.5 * (lo + hi);
    let mut sc = CircleDanceScenario::symmetric(0.0, chi, sigma_narrow, sep);
    sc.orthogonalize = orthogonalize;
    let v = eval(sep)?;
    Ok((sc, v))
}

/// Inputs and outputs of the quitter channel whose twofold rate monitors χ.
pub const LOCKING_INPUTS: [usize; 2] = [0, 2];
pub const LOCKING_OUTPUTS: [usize; 2] = [0, 3];

/// Twofold rate of the χ-monitor channel for two photons with overlap modulus `r`.
pub fn locking_signal(chi: f64, r: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::Parameter(format!("overlap modulus {r} outside [0, 1]")));
    }
    Ok((1.0 - r * r * chi.cos()) / 8.0)
}

/// Same channel computed by the engine on quitter(χ).
pub fn locking_engine(chi: f64, r: f64) -> Result<f64> {
    let g = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(r, 0.0), c(r, 0.0), c(1.0, 0.0)]);
    let mut rin = vec![0; 4];
    let mut rout = vec![0; 4];
    for k in 0..2 {
        rin[LOCKING_INPUTS[k]] = 1;
        rout[LOCKING_OUTPUTS[k]] = 1;
    }
    event_probability(
        &quitter(chi).matrix,
        &g,
        &OccupationPattern(rin),
        &OccupationPattern(rout),
        Statistics::Boson,
    )
}

/// Baseline-relative visibility: a dip gives (baseline − min)/baseline, a peak gives
/// (max − baseline)/baseline, whichever departs further from the baseline.
pub fn visibility(curve: &[f64], baseline: f64) -> Result<f64> {
    if !(baseline > 0.0) {
        return Err(Error::Parameter(format!("baseline must be positive, got {baseline}")));
    }
    if curve.is_empty() {
        return Err(Error::Parameter("empty curve".into()));
    }
    let lo = curve.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = curve.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(if baseline - lo >= hi - baseline { (baseline - lo) / baseline } else { (hi - baseline) / baseline })
}
