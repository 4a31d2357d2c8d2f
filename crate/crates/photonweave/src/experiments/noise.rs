//! Heralded-source model: multi-pair emission, uncorrelated noise photons, impure
//! photons and pseudo-number-resolving detector cascades.
//!
//! Impurity enters through a two-dimensional mixed factor shared by all photons and
//! orthogonal to time and polarization: each photon is independently in slot 0 with
//! probability 𝒫 and in slot 1 otherwise, and only photons in equal slots overlap.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::engine::{output_distribution, OccupationPattern, Statistics};
use crate::error::{Error, Result};
use crate::interferometers::{matrix_json, tritter};
use crate::numerics::{c, CMatrix};
use crate::states::PolarizationState;

use super::{photon_gram, triad_photons, Photon};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceModel {
    /// Squeezing parameter.
    pub lambda: f64,
    pub purity: f64,
    /// Noise probability P_I. As in the emission density, it weights the number of
    /// uncorrelated photons in the signal arm.
    pub p_idler: f64,
    /// Noise probability P_S, weighting the number of uncorrelated idler-arm photons.
    pub p_signal: f64,
    /// Truncation on the total photon number over all sources.
    pub max_photons: usize,
    /// Truncation on the total number of noise photons.
    pub max_noise: usize,
}

impl Default for SourceModel {
    fn default() -> Self {
        Self { lambda: 0.16, purity: 0.9, p_idler: 0.035, p_signal: 0.009, max_photons: 8, max_noise: 3 }
    }
}

impl SourceModel {
    pub fn ideal() -> Self {
        Self { lambda: 1e-4, purity: 1.0, p_idler: 0.0, p_signal: 0.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.lambda) {
            return Err(Error::Parameter(format!("squeezing {} outside [0, 1)", self.lambda)));
        }
        for (name, p) in [("idler noise", self.p_idler), ("signal noise", self.p_signal)] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::Parameter(format!("{name} probability {p} outside [0, 1)")));
            }
        }
        if !(self.purity > 0.0 && self.purity <= 1.0) {
            return Err(Error::Parameter(format!("purity {} outside (0, 1]", self.purity)));
        }
        if self.max_photons > crate::engine::MAX_PHOTONS * 2 {
            return Err(Error::TooLarge { what: "photon truncation", n: self.max_photons, max: 16 });
        }
        Ok(())
    }

    fn raw_weight(&self, t: (usize, usize, usize)) -> f64 {
        let (n, k, l) = t;
        (1.0 - self.lambda.powi(2))
            * (1.0 - self.p_idler)
            * (1.0 - self.p_signal)
            * self.lambda.powi(2 * n as i32)
            * self.p_idler.powi(k as i32)
            * self.p_signal.powi(l as i32)
    }

    fn single_source_terms(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for n in 0..=self.max_photons / 2 {
            for k in 0..=self.max_noise {
                for l in 0..=self.max_noise {
                    if 2 * n + k + l <= self.max_photons && k + l <= self.max_noise {
                        out.push((n, k, l));
                    }
                }
            }
        }
        out
    }
}

/// One term of a source's emission: `pairs` signal/idler pairs, `signal_noise` and
/// `idler_noise` uncorrelated photons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmissionTerm {
    pub pairs: usize,
    pub signal_noise: usize,
    pub idler_noise: usize,
    pub weight: f64,
}

/// Truncated, renormalized emission mixture of a single source.
pub fn source_emission_density(model: &SourceModel) -> Result<Vec<EmissionTerm>> {
    model.validate()?;
    let terms = model.single_source_terms();
    let total: f64 = terms.iter().map(|&t| model.raw_weight(t)).sum();
    Ok(terms
        .into_iter()
        .map(|t| EmissionTerm { pairs: t.0, signal_noise: t.1, idler_noise: t.2, weight: model.raw_weight(t) / total })
        .collect())
}

/// What a detector group must register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClickRule {
    Any,
    Exactly(usize),
    AtLeast(usize),
}

impl ClickRule {
    fn accepts(&self, clicks: usize) -> bool {
        match *self {
            Self::Any => true,
            Self::Exactly(n) => clicks == n,
            Self::AtLeast(n) => clicks >= n,
        }
    }
}

/// Per output port, the splitting ratios of the detector cascade behind it. A single
/// detector is `[1.0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub splits: Vec<Vec<f64>>,
}

impl DetectorConfig {
    pub fn single(m: usize) -> Self {
        Self { splits: vec![vec![1.0]; m] }
    }

    /// Port 0 behind a two-level 50:50 cascade, ports 1 and 2 single.
    pub fn config_a() -> Self {
        Self { splits: vec![vec![0.5, 0.25, 0.25], vec![1.0], vec![1.0]] }
    }

    /// Ports 0 and 2 behind balanced three-way splitters, port 1 single.
    pub fn config_b() -> Self {
        let third = 1.0 / 3.0;
        Self { splits: vec![vec![third; 3], vec![1.0], vec![third; 3]] }
    }

    fn validate(&self, m: usize) -> Result<()> {
        if self.splits.len() != m {
            return Err(Error::Dimension(format!("{} detector groups for {m} outputs", self.splits.len())));
        }
        for s in &self.splits {
            let total: f64 = s.iter().sum();
            if s.is_empty() || s.iter().any(|&p| p < 0.0) || (total - 1.0).abs() > 1e-9 {
                return Err(Error::Parameter(format!("splitting ratios {s:?} do not sum to 1")));
            }
        }
        Ok(())
    }
}

/// Distribution of the number of distinct detectors hit by `n` photons routed
/// independently with probabilities `split`.
pub fn cascade_clicks(n: usize, split: &[f64]) -> Vec<f64> {
    let d = split.len();
    let mut out = vec![0.0; d + 1];
    // State: bitmask of detectors hit so far.
    let mut masks = vec![0.0; 1 << d];
    masks[0] = 1.0;
    for _ in 0..n {
        let mut next = vec![0.0; 1 << d];
        for (mask, &p) in masks.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (k, &q) in split.iter().enumerate() {
                next[mask | (1 << k)] += p * q;
            }
        }
        masks = next;
    }
    for (mask, p) in masks.iter().enumerate() {
        out[mask.count_ones() as usize] += p;
    }
    out
}

/// A heralded source feeding input `input` with signal photons in state `photon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub input: usize,
    pub photon: Photon,
}

/// Heralded-count experiment: rates with the given photons and with the reference
/// delays (which make all photons distinguishable) give the model visibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountScenario {
    pub label: String,
    #[serde(with = "matrix_json")]
    pub interferometer: CMatrix,
    pub sources: Vec<SourceSpec>,
    pub reference_times: Vec<f64>,
    pub rules: Vec<ClickRule>,
    pub detectors: DetectorConfig,
}

fn pol_b() -> PolarizationState {
    PolarizationState::linear(PI / 3.0)
}

impl CountScenario {
    fn pairwise(label: &str, pols: [PolarizationState; 2]) -> Self {
        Self {
            label: label.into(),
            interferometer: tritter().matrix,
            sources: vec![
                SourceSpec { input: 0, photon: Photon::new(pols[0], 0.0, 1.0) },
                SourceSpec { input: 1, photon: Photon::new(pols[1], 0.0, 1.0) },
            ],
            reference_times: vec![0.0, 20.0],
            rules: vec![ClickRule::AtLeast(1), ClickRule::AtLeast(1), ClickRule::Any],
            detectors: DetectorConfig::config_a(),
        }
    }

    /// Two identical photons into inputs 0 and 1, coincidences between outputs 0 and 1.
    pub fn hom() -> Self {
        let h = PolarizationState::horizontal();
        Self::pairwise("hom", [h, h])
    }

    /// As [`Self::hom`] with polarizations 120° apart on the Bloch sphere.
    pub fn mercedes_pair() -> Self {
        Self::pairwise("mercedes-pair", [PolarizationState::horizontal(), pol_b()])
    }

    /// Three identical photons, two clicks in the output-0 cascade, one in output 1 and
    /// none in output 2: an event suppressed for indistinguishable photons.
    pub fn suppressed_210() -> Self {
        let h = PolarizationState::horizontal();
        Self {
            label: "suppressed-210".into(),
            interferometer: tritter().matrix,
            sources: (0..3).map(|k| SourceSpec { input: k, photon: Photon::new(h, 0.0, 1.0) }).collect(),
            reference_times: vec![-20.0, 0.0, 20.0],
            rules: vec![ClickRule::Exactly(2), ClickRule::AtLeast(1), ClickRule::Exactly(0)],
            detectors: DetectorConfig::config_b(),
        }
    }

    /// Threefold dip with the triad-sweep photons at θ = π/4 (triad phase π).
    pub fn triad_dip() -> Result<Self> {
        let photons = triad_photons(PI / 4.0, 1.0)?;
        Ok(Self {
            label: "triad-dip".into(),
            interferometer: tritter().matrix,
            sources: photons.iter().enumerate().map(|(k, p)| SourceSpec { input: k, photon: *p }).collect(),
            reference_times: vec![-40.0, 0.0, 40.0],
            rules: vec![ClickRule::Exactly(1); 3],
            detectors: DetectorConfig::config_b(),
        })
    }

    /// Two sources each sending both photons of a pair into the quitter.
    pub fn quitter_four_photon() -> Self {
        let h = PolarizationState::horizontal();
        Self {
            label: "quitter-four-photon".into(),
            interferometer: crate::interferometers::quitter(PI / 2.0).matrix,
            sources: (0..4).map(|k| SourceSpec { input: k, photon: Photon::new(h, 0.0, 1.0) }).collect(),
            reference_times: vec![-40.0, -20.0, 20.0, 40.0],
            rules: vec![ClickRule::Exactly(1); 4],
            detectors: DetectorConfig::single(4),
        }
    }

    fn with_reference_times(&self) -> Result<Vec<SourceSpec>> {
        if self.reference_times.len() != self.sources.len() {
            return Err(Error::Dimension(format!(
                "{} reference times for {} sources",
                self.reference_times.len(),
                self.sources.len()
            )));
        }
        Ok(self
            .sources
            .iter()
            .zip(&self.reference_times)
            .map(|(s, &t)| {
                let mut s = *s;
                s.photon.packet.t = t;
                s
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountSummary {
    /// Event probability per pulse.
    pub rate: f64,
    pub reference_rate: f64,
    /// Rates divided by the probability that every herald fired.
    pub conditional_rate: f64,
    pub conditional_reference_rate: f64,
    /// (reference − rate)/reference
    pub visibility: f64,
}

type Distribution = BTreeMap<Vec<usize>, f64>;

fn convolve(a: &Distribution, b: &Distribution) -> Distribution {
    let mut out = Distribution::new();
    for (s1, p1) in a {
        for (s2, p2) in b {
            let key: Vec<usize> = s1.iter().zip(s2).map(|(x, y)| x + y).collect();
            *out.entry(key).or_insert(0.0) += p1 * p2;
        }
    }
    out
}

/// Output distribution of the signal photons, averaged over mixed-slot realizations.
fn pair_distribution(u: &CMatrix, photons: &[(usize, Photon)], purity: f64) -> Result<Distribution> {
    let m = u.nrows();
    let mut out = Distribution::new();
    if photons.is_empty() {
        out.insert(vec![0; m], 1.0);
        return Ok(out);
    }
    let mut sorted = photons.to_vec();
    sorted.sort_by_key(|p| p.0);
    let mut occ = vec![0; m];
    for (mode, _) in &sorted {
        occ[*mode] += 1;
    }
    let r = OccupationPattern(occ);
    let ph: Vec<Photon> = sorted.iter().map(|p| p.1).collect();
    let g = photon_gram(&ph)?;
    let n = ph.len();
    for mask in 0u32..(1 << n) {
        let pure = mask.count_ones() as i32;
        let w = purity.powi(pure) * (1.0 - purity).powi(n as i32 - pure);
        if w == 0.0 {
            continue;
        }
        let both = |i: usize, j: usize| (mask >> i & 1) == (mask >> j & 1);
        let gm = CMatrix::from_fn(n, n, |i, j| if both(i, j) { g[(i, j)] } else { c(0.0, 0.0) });
        for (s, p) in output_distribution(u, &gm, &r, Statistics::Boson)? {
            *out.entry(s.0).or_insert(0.0) += w * p;
        }
    }
    Ok(out)
}

/// A distinguishable photon entering `input`.
fn classical_photon(u: &CMatrix, input: usize) -> Distribution {
    let m = u.nrows();
    (0..m)
        .map(|k| {
            let mut s = vec![0; m];
            s[k] = 1;
            (s, u[(k, input)].norm_sqr())
        })
        .collect()
}

fn click_probability(s: &[usize], rules: &[ClickRule], detectors: &DetectorConfig) -> f64 {
    let mut p = 1.0;
    for (port, &n) in s.iter().enumerate() {
        let dist = cascade_clicks(n, &detectors.splits[port]);
        p *= dist.iter().enumerate().filter(|(k, _)| rules[port].accepts(*k)).map(|(_, q)| q).sum::<f64>();
        if p == 0.0 {
            break;
        }
    }
    p
}

/// Event probability and herald probability for one set of source photons.
fn event_rate(
    model: &SourceModel,
    u: &CMatrix,
    sources: &[SourceSpec],
    rules: &[ClickRule],
    detectors: &DetectorConfig,
) -> Result<(f64, f64)> {
    let per = model.single_source_terms();
    let nsrc = sources.len();
    // Joint truncation, grouped by (pairs, signal noise) per source.
    let mut groups: HashMap<(Vec<usize>, Vec<usize>), f64> = HashMap::new();
    let mut total = 0.0;
    let mut heralded = 0.0;
    let mut idx = vec![0usize; nsrc];
    loop {
        let combo: Vec<(usize, usize, usize)> = idx.iter().map(|&i| per[i]).collect();
        let photons: usize = combo.iter().map(|t| 2 * t.0 + t.1 + t.2).sum();
        let noise: usize = combo.iter().map(|t| t.1 + t.2).sum();
        if photons <= model.max_photons && noise <= model.max_noise {
            let w: f64 = combo.iter().map(|&t| model.raw_weight(t)).product();
            total += w;
            if combo.iter().all(|t| t.0 + t.2 >= 1) {
                heralded += w;
                let key = (combo.iter().map(|t| t.0).collect(), combo.iter().map(|t| t.1).collect());
                *groups.entry(key).or_insert(0.0) += w;
            }
        }
        let mut pos = 0;
        while pos < nsrc {
            idx[pos] += 1;
            if idx[pos] < per.len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
        if pos == nsrc {
            break;
        }
    }
    let mut cache: HashMap<Vec<usize>, Distribution> = HashMap::new();
    let mut rate = 0.0;
    for ((pairs, signal_noise), w) in &groups {
        if !cache.contains_key(pairs) {
            let photons: Vec<(usize, Photon)> = sources
                .iter()
                .zip(pairs)
                .flat_map(|(s, &n)| std::iter::repeat((s.input, s.photon)).take(n))
                .collect();
            cache.insert(pairs.clone(), pair_distribution(u, &photons, model.purity)?);
        }
        let mut dist = cache[pairs].clone();
        for (s, &k) in sources.iter().zip(signal_noise) {
            for _ in 0..k {
                dist = convolve(&dist, &classical_photon(u, s.input));
            }
        }
        let p: f64 = dist.iter().map(|(s, p)| p * click_probability(s, rules, detectors)).sum();
        rate += w * p;
    }
    Ok((rate / total, heralded / total))
}

/// Expected heralded event rates and the model visibility of a count scenario.
pub fn simulate_counts(model: &SourceModel, scenario: &CountScenario) -> Result<CountSummary> {
    model.validate()?;
    let u = &scenario.interferometer;
    let m = u.nrows();
    if m > 3 || scenario.sources.len() > 3 {
        return Err(Error::Unsupported(
            "only heralded three-port configurations; in the four-photon quitter setup both photons \
             of a pair enter the network unheralded"
                .into(),
        ));
    }
    scenario.detectors.validate(m)?;
    if scenario.rules.len() != m {
        return Err(Error::Dimension(format!("{} click rules for {m} outputs", scenario.rules.len())));
    }
    if scenario.sources.iter().any(|s| s.input >= m) {
        return Err(Error::Parameter("source input outside the interferometer".into()));
    }
    let (rate, herald) = event_rate(model, u, &scenario.sources, &scenario.rules, &scenario.detectors)?;
    let (reference_rate, _) =
        event_rate(model, u, &scenario.with_reference_times()?, &scenario.rules, &scenario.detectors)?;
    if !(reference_rate > 0.0) {
        return Err(Error::Parameter("reference configuration never registers the event".into()));
    }
    Ok(CountSummary {
        rate,
        reference_rate,
        conditional_rate: rate / herald,
        conditional_reference_rate: reference_rate / herald,
        visibility: (reference_rate - rate) / reference_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::event_probability;

    #[test]
    fn emission_density_examples() {
        let vac = SourceModel { lambda: 0.0, purity: 1.0, p_idler: 0.0, p_signal: 0.0, ..SourceModel::default() };
        let d = source_emission_density(&vac).unwrap();
        let w0 = d.iter().find(|t| t.pairs == 0 && t.signal_noise == 0 && t.idler_noise == 0).unwrap();
        assert_eq!(w0.weight, 1.0);
        let d = source_emission_density(&SourceModel::default()).unwrap();
        let one = d.iter().find(|t| (t.pairs, t.signal_noise, t.idler_noise) == (1, 0, 0)).unwrap().weight;
        let two = d.iter().find(|t| (t.pairs, t.signal_noise, t.idler_noise) == (2, 0, 0)).unwrap().weight;
        assert!((two / one - 0.0256).abs() < 1e-14);
        assert!((d.iter().map(|t| t.weight).sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cascade_distribution() {
        let d = cascade_clicks(2, &[0.5, 0.5]);
        assert!((d[1] - 0.5).abs() < 1e-15 && (d[2] - 0.5).abs() < 1e-15);
        assert_eq!(cascade_clicks(0, &[1.0]), vec![1.0, 0.0]);
        assert_eq!(cascade_clicks(3, &[1.0]), vec![0.0, 1.0]);
    }

    #[test]
    fn weak_pumping_recovers_ideal() {
        let sc = CountScenario::hom();
        let s = simulate_counts(&SourceModel::ideal(), &sc).unwrap();
        // Ideal: photons into tritter inputs 0,1, at least one click in outputs 0 and 1.
        let u = tritter().matrix;
        let g = CMatrix::from_element(2, 2, c(1.0, 0.0));
        let p = event_probability(&u, &g, &OccupationPattern(vec![1, 1, 0]), &OccupationPattern(vec![1, 1, 0]), Statistics::Boson)
            .unwrap();
        assert!((s.conditional_rate - p).abs() < 1e-6, "{} vs {p}", s.conditional_rate);
        assert!((s.conditional_reference_rate - 2.0 / 9.0).abs() < 1e-6);
    }

    #[test]
    fn quitter_configuration_unsupported() {
        let r = simulate_counts(&SourceModel::default(), &CountScenario::quitter_four_photon());
        assert!(matches!(r, Err(Error::Unsupported(_))));
    }

    #[test]
    fn purity_ensemble_damps_hom() {
        let pure = SourceModel { purity: 1.0, ..SourceModel::ideal() };
        let mixed = SourceModel { purity: 0.9, ..SourceModel::ideal() };
        let vp = simulate_counts(&pure, &CountScenario::hom()).unwrap().visibility;
        let vm = simulate_counts(&mixed, &CountScenario::hom()).unwrap().visibility;
        // Twofold exchange weighted by 𝒫² + (1 − 𝒫)².
        assert!((vm / vp - 0.82).abs() < 1e-4, "{vp} {vm}");
    }
}
