//! Canonical multiport unitaries, gauge-aware comparison, phase reconstruction from
//! measured moduli, characterization from two-beam fringes, and GHZ-interferometer rates.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{c, unitarity_residual, CMatrix, C64};

pub const BUILDER_TOL: f64 = 1e-12;
pub const ROW_SUM_TOL: f64 = 0.05;
pub const RECONSTRUCTION_TOL: f64 = 0.1;
pub const FIT_AMPLITUDE_TOL: f64 = 1e-6;
pub const DEFAULT_FRINGE_SAMPLES: usize = 16;
pub const MIN_FRINGE_SAMPLES: usize = 8;

/// A linear-optical network. `relaxed` marks measured matrices that are not exactly
/// unitary; `fidelity` records their gauge-optimized agreement with the ideal device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interferometer {
    #[serde(with = "matrix_json")]
    pub matrix: CMatrix,
    pub label: String,
    #[serde(default)]
    pub relaxed: bool,
    #[serde(default)]
    pub fidelity: Option<f64>,
}

impl Interferometer {
    /// Wraps an exactly unitary matrix.
    pub fn new(matrix: CMatrix, label: &str) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Dimension(format!("{}x{} interferometer", matrix.nrows(), matrix.ncols())));
        }
        let res = unitarity_residual(&matrix);
        if res > crate::engine::UNITARY_TOL {
            return Err(Error::NotUnitary(res));
        }
        Ok(Self { matrix, label: label.to_string(), relaxed: false, fidelity: None })
    }

    pub fn modes(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn residual(&self) -> f64 {
        unitarity_residual(&self.matrix)
    }

    /// Matrix handed to the engine: the stored one if unitary, otherwise its nearest
    /// unitary. Also returns the max-entry perturbation that was applied.
    pub fn engine_matrix(&self) -> Result<(CMatrix, f64)> {
        if !self.relaxed {
            return Ok((self.matrix.clone(), 0.0));
        }
        let w = nearest_unitary(&self.matrix)?;
        let delta = (&w - &self.matrix).iter().map(|z| z.norm()).fold(0.0, f64::max);
        Ok((w, delta))
    }
}

/// Row-major `[[re, im], …]` serialization for complex matrices.
pub mod matrix_json {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn to_rows(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
        (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
    }

    pub fn from_rows(rows: &[Vec<[f64; 2]>]) -> std::result::Result<CMatrix, String> {
        let n = rows.len();
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err("ragged matrix rows".to_string());
        }
        Ok(CMatrix::from_fn(n, k, |i, j| c(rows[i][j][0], rows[i][j][1])))
    }

    pub fn serialize<S: Serializer>(m: &CMatrix, s: S) -> std::result::Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<CMatrix, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(d)?;
        from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

pub fn beamsplitter() -> Interferometer {
    let h = 1.0 / 2f64.sqrt();
    let m = CMatrix::from_row_slice(2, 2, &[c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0)]);
    Interferometer { matrix: m, label: "beamsplitter".into(), relaxed: false, fidelity: None }
}

pub fn tritter() -> Interferometer {
    let z = C64::from_polar(1.0, 2.0 * PI / 3.0);
    let one = c(1.0, 0.0);
    let m = CMatrix::from_row_slice(3, 3, &[one, one, one, one, z * z, z, one, z, z * z])
        .scale(1.0 / 3f64.sqrt());
    Interferometer { matrix: m, label: "tritter".into(), relaxed: false, fidelity: None }
}

/// Balanced four-port with internal phase `chi`.
pub fn quitter(chi: f64) -> Interferometer {
    let one = c(1.0, 0.0);
    let e = C64::from_polar(1.0, chi);
    #[rustfmt::skip]
    let m = CMatrix::from_row_slice(4, 4, &[
        one, one, one, one,
        one, one, -one, -one,
        one, -one, e, -e,
        one, -one, -e, e,
    ]).scale(0.5);
    Interferometer { matrix: m, label: format!("quitter(chi={chi})"), relaxed: false, fidelity: None }
}

/// The reconstructed three-port from the integrated-waveguide characterization, stored
/// verbatim. Its fidelity is measured against the ideal tritter.
pub fn measured_tritter() -> Interferometer {
    #[rustfmt::skip]
    let m = CMatrix::from_row_slice(3, 3, &[
        c(0.6, 0.0), c(0.6, 0.0), c(0.53, 0.0),
        c(0.6, 0.0), c(-0.28, 0.48), c(-0.27, -0.48),
        c(0.6, 0.0), c(-0.28, -0.5), c(-0.27, 0.48),
    ]);
    let fidelity = gauge_fidelity(&tritter().matrix, &m).map(|g| g.fidelity).ok();
    Interferometer { matrix: m, label: "measured tritter".into(), relaxed: true, fidelity }
}

/// Polar-decomposition factor W of `a = W P`, the closest unitary in Frobenius norm.
pub fn nearest_unitary(a: &CMatrix) -> Result<CMatrix> {
    if !a.is_square() {
        return Err(Error::Dimension(format!("{}x{} matrix", a.nrows(), a.ncols())));
    }
    let svd = a.clone().svd(true, true);
    match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => Ok(u * v_t),
        _ => Err(Error::Parameter("singular value decomposition failed".into())),
    }
}

/// Result of maximizing |Tr(A† L B R)|/m over diagonal phase matrices L, R.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeFit {
    pub fidelity: f64,
    /// True when the best match used the complex conjugate of `b`.
    pub conjugate: bool,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

fn gauge_overlap(a: &CMatrix, b: &CMatrix, start: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let m = a.nrows();
    let mut r: Vec<C64> = start.iter().map(|&p| C64::from_polar(1.0, p)).collect();
    let mut l = vec![c(1.0, 0.0); m];
    let mut best = 0.0;
    for _ in 0..500 {
        for i in 0..m {
            let x: C64 = (0..m).map(|j| a[(i, j)].conj() * b[(i, j)] * r[j]).sum();
            l[i] = C64::from_polar(1.0, -x.arg());
        }
        let mut total = 0.0;
        for j in 0..m {
            let y: C64 = (0..m).map(|i| a[(i, j)].conj() * l[i] * b[(i, j)]).sum();
            r[j] = C64::from_polar(1.0, -y.arg());
            total += y.norm();
        }
        let converged = (total - best).abs() < 1e-15;
        best = total;
        if converged {
            break;
        }
    }
    (best / m as f64, l.iter().map(|z| z.arg()).collect(), r.iter().map(|z| z.arg()).collect())
}

/// Gauge-optimized normalized trace overlap between two m×m matrices, also trying the
/// complex conjugate of `b`.
pub fn gauge_fidelity(a: &CMatrix, b: &CMatrix) -> Result<GaugeFit> {
    if a.shape() != b.shape() || !a.is_square() {
        return Err(Error::Dimension(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    let m = a.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(0x6761_7567);
    let mut best = GaugeFit { fidelity: -1.0, conjugate: false, left: vec![], right: vec![] };
    for conjugate in [false, true] {
        let target = if conjugate { b.map(|z| z.conj()) } else { b.clone() };
        for start in 0..12 {
            let init: Vec<f64> =
                if start == 0 { vec![0.0; m] } else { (0..m).map(|_| rng.gen_range(0.0..2.0 * PI)).collect() };
            let (f, left, right) = gauge_overlap(a, &target, &init);
            if f > best.fidelity + 1e-14 {
                best = GaugeFit { fidelity: f, conjugate, left, right };
            }
        }
    }
    Ok(best)
}

fn assemble(moduli: &CMatrix, theta: &[f64]) -> CMatrix {
    let m = moduli.nrows();
    CMatrix::from_fn(m, m, |i, j| {
        if i == 0 || j == 0 {
            moduli[(i, j)]
        } else {
            moduli[(i, j)] * C64::from_polar(1.0, theta[(i - 1) * (m - 1) + (j - 1)])
        }
    })
}

/// ‖U†U − I‖²_F and its gradient with respect to the free phases.
fn unitarity_cost(moduli: &CMatrix, theta: &[f64]) -> (f64, Vec<f64>) {
    let m = moduli.nrows();
    let u = assemble(moduli, theta);
    let d = u.adjoint() * &u - CMatrix::identity(m, m);
    let f = d.iter().map(|z| z.norm_sqr()).sum();
    let du = &d * u.adjoint();
    let mut grad = vec![0.0; theta.len()];
    for i in 1..m {
        for j in 1..m {
            grad[(i - 1) * (m - 1) + (j - 1)] = -4.0 * (u[(i, j)] * du[(j, i)]).im;
        }
    }
    (f, grad)
}

fn descend(moduli: &CMatrix, mut theta: Vec<f64>) -> (f64, Vec<f64>) {
    let (mut f, mut g) = unitarity_cost(moduli, &theta);
    let mut step = 0.1;
    for _ in 0..20_000 {
        let gg: f64 = g.iter().map(|x| x * x).sum();
        if gg < 1e-28 || f < 1e-28 {
            break;
        }
        // Armijo backtracking.
        let mut accepted = false;
        while step > 1e-16 {
            let trial: Vec<f64> = theta.iter().zip(&g).map(|(t, d)| t - step * d).collect();
            let (ft, gt) = unitarity_cost(moduli, &trial);
            if ft <= f - 1e-4 * step * gg {
                theta = trial;
                f = ft;
                g = gt;
                accepted = true;
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (f, theta)
}

/// Completes a matrix of moduli to a (near-)unitary one with a real first row and column,
/// choosing the remaining (m−1)² phases by multi-start local minimization of ‖U†U − I‖_F.
pub fn phases_from_amplitudes(moduli: &nalgebra::DMatrix<f64>, seed: u64) -> Result<Interferometer> {
    let m = moduli.nrows();
    if m == 0 || moduli.ncols() != m {
        return Err(Error::Dimension(format!("{}x{} moduli", moduli.nrows(), moduli.ncols())));
    }
    if moduli.iter().any(|&x| x < 0.0 || !x.is_finite()) {
        return Err(Error::Parameter("moduli must be finite and nonnegative".into()));
    }
    for k in 0..m {
        let row: f64 = moduli.row(k).iter().map(|x| x * x).sum();
        let col: f64 = moduli.column(k).iter().map(|x| x * x).sum();
        if (row - 1.0).abs() > ROW_SUM_TOL || (col - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::Parameter(format!("squared sums of row/column {k} are {row:.4}/{col:.4}")));
        }
    }
    let cm = moduli.map(|x| c(x, 0.0));
    let free = (m - 1) * (m - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..24 {
        let start: Vec<f64> = (0..free).map(|_| rng.gen_range(-PI..PI)).collect();
        let (f, theta) = descend(&cm, start);
        if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
            best = Some((f, theta));
        }
        if f < 1e-24 {
            break;
        }
    }
    let (f, theta) = best.unwrap_or((0.0, vec![]));
    let residual = f.sqrt();
    if residual > RECONSTRUCTION_TOL {
        return Err(Error::Reconstruction(residual));
    }
    let matrix = assemble(&cm, &theta);
    let relaxed = unitarity_residual(&matrix) > crate::engine::UNITARY_TOL;
    Ok(Interferometer { matrix, label: "reconstructed from moduli".into(), relaxed, fidelity: None })
}

/// Sampled intensities at output `k` while the probe beam `j` is phase-shifted by φ
/// against the reference beam in port 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fringe {
    pub probe: usize,
    pub output: usize,
    pub phases: Vec<f64>,
    pub intensities: Vec<f64>,
}

/// Two-beam fringe data and single-beam output intensities. `singles[(j, k)]` is the
/// intensity at output k with light injected into input j only.
#[derive(Debug, Clone, PartialEq)]
pub struct FringeData {
    pub singles: nalgebra::DMatrix<f64>,
    pub fringes: Vec<Fringe>,
}

/// Generates fringe data from a known network by propagating coherent fields, with
/// optional multiplicative Gaussian noise of relative size `noise`.
pub fn synthesize_fringes<R: Rng>(
    u: &CMatrix,
    samples: usize,
    intensity: f64,
    noise: f64,
    rng: &mut R,
) -> FringeData {
    let m = u.nrows();
    let mut jitter = |x: f64| {
        if noise > 0.0 {
            // Box-Muller normal deviate.
            let (a, b): (f64, f64) = (rng.gen_range(f64::EPSILON..1.0), rng.gen());
            x * (1.0 + noise * (-2.0 * a.ln()).sqrt() * (2.0 * PI * b).cos())
        } else {
            x
        }
    };
    let singles = nalgebra::DMatrix::from_fn(m, m, |j, k| jitter(intensity * u[(k, j)].norm_sqr()));
    let mut fringes = Vec::new();
    let phases: Vec<f64> = (0..samples).map(|s| 2.0 * PI * s as f64 / samples as f64).collect();
    for j in 1..m {
        for k in 0..m {
            let intensities = phases
                .iter()
                .map(|&p| {
                    let field = (u[(k, 0)] + u[(k, j)] * C64::from_polar(1.0, p)) * intensity.sqrt();
                    jitter(field.norm_sqr())
                })
                .collect();
            fringes.push(Fringe { probe: j, output: k, phases: phases.clone(), intensities });
        }
    }
    FringeData { singles, fringes }
}

/// Least-squares fit of I(φ) = A + B cos φ + C sin φ.
fn fit_cosine(phases: &[f64], values: &[f64]) -> Result<(f64, f64, f64)> {
    let mut ata = nalgebra::Matrix3::<f64>::zeros();
    let mut atb = nalgebra::Vector3::<f64>::zeros();
    for (&p, &y) in phases.iter().zip(values) {
        let row = nalgebra::Vector3::new(1.0, p.cos(), p.sin());
        ata += row * row.transpose();
        atb += row * y;
    }
    let sol = ata
        .try_inverse()
        .ok_or_else(|| Error::Fit("phase samples do not determine a cosine".into()))?
        * atb;
    Ok((sol[0], sol[1], sol[2]))
}

/// Reconstructs U from single-beam intensities and reference/probe fringes. The result
/// has a real nonnegative first row and column.
pub fn characterize_from_fringes(data: &FringeData) -> Result<Interferometer> {
    let m = data.singles.nrows();
    if m < 2 || data.singles.ncols() != m {
        return Err(Error::Dimension(format!("{}x{} singles", m, data.singles.ncols())));
    }
    let mut moduli = nalgebra::DMatrix::<f64>::zeros(m, m);
    for j in 0..m {
        let total: f64 = data.singles.row(j).iter().map(|x| x.max(0.0)).sum();
        if total <= 0.0 {
            return Err(Error::Fit(format!("no light from input {j}")));
        }
        for k in 0..m {
            moduli[(j, k)] = (data.singles[(j, k)].max(0.0) / total).sqrt();
        }
    }
    let mut u = CMatrix::from_fn(m, m, |k, j| c(moduli[(j, k)], 0.0));
    for j in 1..m {
        for k in 0..m {
            let fringe = data
                .fringes
                .iter()
                .find(|f| f.probe == j && f.output == k)
                .ok_or_else(|| Error::Fit(format!("missing fringe for probe {j}, output {k}")))?;
            if fringe.phases.len() < MIN_FRINGE_SAMPLES || fringe.phases.len() != fringe.intensities.len() {
                return Err(Error::Fit(format!("fringe ({j}, {k}) needs ≥ {MIN_FRINGE_SAMPLES} samples")));
            }
            let (_, b, cc) = fit_cosine(&fringe.phases, &fringe.intensities)?;
            let amp = b.hypot(cc);
            let theta = if moduli[(j, k)] < 1e-12 || moduli[(0, k)] < 1e-12 {
                0.0
            } else if amp < FIT_AMPLITUDE_TOL {
                return Err(Error::Fit(format!("flat fringe at probe {j}, output {k}")));
            } else {
                (-cc).atan2(b)
            };
            u[(k, j)] = C64::from_polar(moduli[(j, k)], theta);
        }
    }
    // Make the first row real by rephasing columns.
    for j in 1..m {
        let ph = C64::from_polar(1.0, -u[(0, j)].arg());
        for k in 0..m {
            u[(k, j)] *= ph;
        }
    }
    let relaxed = unitarity_residual(&u) > crate::engine::UNITARY_TOL;
    Ok(Interferometer { matrix: u, label: "characterized from fringes".into(), relaxed, fidelity: None })
}

/// Detection probability in the n-particle GHZ interferometer with `j` photons in the A
/// detectors and `k` in the B detectors. `full` selects the n-fold event (j + k = n).
pub fn ghz_probability(n: usize, j: usize, k: usize, phase: f64, full: bool) -> Result<f64> {
    if n % 2 == 1 {
        return Err(Error::Unsupported(format!("odd photon number {n}")));
    }
    if j + k > n {
        return Err(Error::Parameter(format!("{j} + {k} detections exceed {n} photons")));
    }
    if full {
        if j + k != n {
            return Err(Error::Parameter(format!("full event needs j + k = {n}")));
        }
        let sign = if (k + n / 2) % 2 == 0 { 1.0 } else { -1.0 };
        Ok(0.5f64.powi(2 * n as i32 - 1) * (1.0 + sign * phase.cos()))
    } else {
        Ok(0.5f64.powi((j + k) as i32))
    }
}
