//! Browser bindings: a handful of cheap photon-interference calculations for the demo
//! page in `www/`. Results come back as flat `Float64Array`s.

use wasm_bindgen::prelude::*;

use photonweave::engine::{event_probability, OccupationPattern, Statistics};
use photonweave::experiments::{circle_dance_engine, optimize_walkoff, photon_gram, Photon, MAX_WALKOFF_OVERLAP};
use photonweave::interferometers::{beamsplitter, tritter};
use photonweave::numerics::{c, CMatrix};
use photonweave::states::{DistinguishabilityMatrix, PolarizationState};
use photonweave::Result;

/// Rows of (tau, boson, fermion, classical) coincidence probabilities at a balanced
/// beamsplitter for two H-polarized Gaussian photons.
pub fn hom_rows(sigma: f64, tau_max: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 || !(tau_max > 0.0) {
        return Err(photonweave::Error::Parameter("need points ≥ 2 and tau_max > 0".into()));
    }
    let u = beamsplitter().matrix;
    let one = OccupationPattern(vec![1, 1]);
    let h = PolarizationState::horizontal();
    let mut out = Vec::with_capacity(4 * points);
    for k in 0..points {
        let tau = -tau_max + 2.0 * tau_max * k as f64 / (points - 1) as f64;
        let g = photon_gram(&[Photon::new(h, 0.0, sigma), Photon::new(h, tau, sigma)])?;
        out.push(tau);
        for stats in [Statistics::Boson, Statistics::Fermion, Statistics::Classical] {
            out.push(event_probability(&u, &g, &one, &one, stats)?);
        }
    }
    Ok(out)
}

/// All ten output patterns of the tritter with one photon per input, given the overlap
/// moduli and triad phase. Rows of (n0, n1, n2, probability).
pub fn tritter_rows(r_ab: f64, r_bc: f64, r_ca: f64, phi: f64) -> Result<Vec<f64>> {
    let mut g = CMatrix::identity(3, 3);
    g[(0, 1)] = c(r_ab, 0.0);
    g[(1, 2)] = c(r_bc * phi.cos(), r_bc * phi.sin());
    g[(2, 0)] = c(r_ca, 0.0);
    for (i, j) in [(0, 1), (1, 2), (2, 0)] {
        g[(j, i)] = g[(i, j)].conj();
    }
    // Rejects overlap sets no three states can realize.
    let g = DistinguishabilityMatrix::from_matrix(g)?;
    let u = tritter().matrix;
    let input = OccupationPattern(vec![1, 1, 1]);
    let mut out = Vec::new();
    for s in OccupationPattern::all(3, 3) {
        let p = event_probability(&u, g.matrix(), &input, &s, Statistics::Boson)?;
        out.extend(s.0.iter().map(|&n| n as f64));
        out.push(p);
    }
    Ok(out)
}

/// Rows of (theta, P1111) for the circle-dance state on the quitter with phase `chi`,
/// at the walk-off that maximizes visibility with narrow-mode overlap ≤ 0.1.
pub fn circle_rows(chi: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(photonweave::Error::Parameter("need points ≥ 2".into()));
    }
    let (base, _) = optimize_walkoff(1.0, chi, MAX_WALKOFF_OVERLAP, true)?;
    let four = OccupationPattern(vec![1; 4]);
    let mut out = Vec::with_capacity(2 * points);
    for k in 0..points {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / (points - 1) as f64;
        out.push(theta);
        out.push(circle_dance_engine(&base.with_theta(theta), &four)?);
    }
    Ok(out)
}

fn js(r: Result<Vec<f64>>) -> std::result::Result<Vec<f64>, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = homCurve)]
pub fn hom_curve(sigma: f64, tau_max: f64, points: usize) -> std::result::Result<Vec<f64>, JsError> {
    js(hom_rows(sigma, tau_max, points))
}

#[wasm_bindgen(js_name = tritterEvents)]
pub fn tritter_events(r_ab: f64, r_bc: f64, r_ca: f64, phi: f64) -> std::result::Result<Vec<f64>, JsError> {
    js(tritter_rows(r_ab, r_bc, r_ca, phi))
}

#[wasm_bindgen(js_name = circleDanceFringe)]
pub fn circle_dance_fringe(chi: f64, points: usize) -> std::result::Result<Vec<f64>, JsError> {
    js(circle_rows(chi, points))
}
