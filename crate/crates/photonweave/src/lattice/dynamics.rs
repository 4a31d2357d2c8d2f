//! Propagation along z, adiabatic paths, vortex braiding and input shaping.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    analytic_zero_mode, kekule_hamiltonian, multi_vortex_delta, near_zero_mode, sparse_coupling_hamiltonian,
    spectrum, sublattice_ratio, Bond, CouplingModel, LatticeGeometry, ModeField, SparseHamiltonian,
    VortexField, ZeroModeSearch,
};
use crate::numerics::{c, CMatrix, CVector, C64};
use crate::states::wrap_signed;
use crate::{Error, Result};

/// Doubling the step count must change the output by less than this.
pub const ADIABATIC_CONVERGENCE_TOL: f64 = 1e-3;
/// Braids whose mode fidelity drops below this are rejected.
pub const MIN_BRAID_FIDELITY: f64 = 0.5;

const TAYLOR_TOL: f64 = 1e-16;
const TAYLOR_MAX_TERMS: usize = 80;

/// exp(−iHz)·v through the dense eigendecomposition.
pub fn propagate(h: &CMatrix, z: f64, input: &ModeField) -> Result<ModeField> {
    if input.len() != h.nrows() {
        return Err(Error::Dimension(format!("{} amplitudes for a {}-site Hamiltonian", input.len(), h.nrows())));
    }
    let spec = spectrum(h)?;
    Ok(ModeField { amplitudes: spec.evolve(z, &input.amplitudes), energy: input.energy })
}

/// exp(−iHz)·v by a truncated Taylor series on substeps with ‖H‖dz ≤ 1.
/// Terms are summed until they drop below 1e−16 of the running sum.
pub fn sparse_evolve(h: &SparseHamiltonian, z: f64, v: &CVector) -> CVector {
    let bound = h.norm_bound();
    let substeps = ((bound * z.abs()).ceil() as usize).max(1);
    let dz = z / substeps as f64;
    let mut out = v.clone();
    for _ in 0..substeps {
        let mut term = out.clone();
        let mut sum = out.clone();
        for k in 1..=TAYLOR_MAX_TERMS {
            term = h.apply(&term) * c(0.0, -dz / k as f64);
            sum += &term;
            if term.norm() <= TAYLOR_TOL * sum.norm() {
                break;
            }
        }
        out = sum;
    }
    out
}

/// A Hamiltonian family H(s), s ∈ [0, 1].
pub trait HamiltonianPath: Sync {
    fn dim(&self) -> usize;
    fn at(&self, s: f64) -> SparseHamiltonian;
}

/// Time-independent path.
pub struct StaticPath(pub SparseHamiltonian);

impl HamiltonianPath for StaticPath {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn at(&self, _: f64) -> SparseHamiltonian {
        self.0.clone()
    }
}

/// Keyframe index and fraction for s ∈ [0, 1] over `n` keyframes.
fn segment(s: f64, n: usize) -> (usize, f64) {
    if n < 2 {
        return (0, 0.0);
    }
    let x = s.clamp(0.0, 1.0) * (n - 1) as f64;
    let k = (x.floor() as usize).min(n - 2);
    (k, x - k as f64)
}

/// Waveguide positions interpolated linearly between keyframes, couplings from
/// the distance law.
pub struct GeometryPath {
    pub keyframes: Vec<LatticeGeometry>,
    pub model: CouplingModel,
}

impl GeometryPath {
    pub fn new(keyframes: Vec<LatticeGeometry>, model: CouplingModel) -> Result<Self> {
        let Some(first) = keyframes.first() else {
            return Err(Error::Parameter("geometry path needs a keyframe".into()));
        };
        if keyframes.iter().any(|g| g.len() != first.len()) {
            return Err(Error::Dimension("keyframes differ in site count".into()));
        }
        model.validate()?;
        Ok(Self { keyframes, model })
    }

    pub fn geometry_at(&self, s: f64) -> LatticeGeometry {
        let (k, f) = segment(s, self.keyframes.len());
        let mut g = self.keyframes[k].clone();
        if let Some(next) = self.keyframes.get(k + 1) {
            for (site, q) in g.sites.iter_mut().zip(&next.sites) {
                site.x += f * (q.x - site.x);
                site.y += f * (q.y - site.y);
            }
        }
        g
    }
}

impl HamiltonianPath for GeometryPath {
    fn dim(&self) -> usize {
        self.keyframes[0].len()
    }
    fn at(&self, s: f64) -> SparseHamiltonian {
        sparse_coupling_hamiltonian(&self.geometry_at(s), &self.model)
    }
}

/// Direct Kekulé model with vortex cores moving between keyframes.
pub struct VortexPath {
    pub geometry: LatticeGeometry,
    bonds: Vec<Bond>,
    pub t: f64,
    pub delta0: f64,
    pub l0: f64,
    pub alpha: f64,
    pub windings: Vec<i32>,
    /// Core positions per keyframe.
    pub keyframes: Vec<Vec<[f64; 2]>>,
}

impl VortexPath {
    pub fn new(
        geometry: LatticeGeometry,
        field: &VortexField,
        t: f64,
        windings: Vec<i32>,
        keyframes: Vec<Vec<[f64; 2]>>,
    ) -> Result<Self> {
        field.validate()?;
        if keyframes.is_empty() || keyframes.iter().any(|k| k.len() != windings.len()) {
            return Err(Error::Parameter("every keyframe needs one center per vortex".into()));
        }
        let bonds = geometry.honeycomb_bonds();
        Ok(Self {
            geometry,
            bonds,
            t,
            delta0: field.delta0,
            l0: field.l0,
            alpha: field.alpha,
            windings,
            keyframes,
        })
    }

    pub fn centers_at(&self, s: f64) -> Vec<[f64; 2]> {
        let (k, f) = segment(s, self.keyframes.len());
        let a = &self.keyframes[k];
        let b = self.keyframes.get(k + 1).unwrap_or(a);
        a.iter().zip(b).map(|(p, q)| [p[0] + f * (q[0] - p[0]), p[1] + f * (q[1] - p[1])]).collect()
    }

    pub fn hamiltonian_for(&self, centers: &[[f64; 2]]) -> SparseHamiltonian {
        let vortices: Vec<([f64; 2], i32)> = centers.iter().copied().zip(self.windings.iter().copied()).collect();
        kekule_hamiltonian(&self.geometry, &self.bonds, self.t, |p| {
            multi_vortex_delta(p, self.delta0, self.l0, self.alpha, &vortices)
        })
    }
}

impl HamiltonianPath for VortexPath {
    fn dim(&self) -> usize {
        self.geometry.len()
    }
    fn at(&self, s: f64) -> SparseHamiltonian {
        self.hamiltonian_for(&self.centers_at(s))
    }
}

/// Π exp(−iH(ℓₙ)δl) with midpoints ℓₙ = (n + ½)δl, applied to each input.
pub fn step_evolution(path: &dyn HamiltonianPath, length: f64, steps: usize, inputs: &[CVector]) -> Vec<CVector> {
    let dl = length / steps as f64;
    let mut states: Vec<CVector> = inputs.to_vec();
    for n in 0..steps {
        let h = path.at((n as f64 + 0.5) / steps as f64);
        for v in states.iter_mut() {
            *v = sparse_evolve(&h, dl, v);
        }
    }
    states
}

/// Output of an adiabatic evolution.
#[derive(Debug, Clone)]
pub struct AdiabaticResult {
    /// Fields after `steps` steps.
    pub outputs: Vec<ModeField>,
    /// Largest change in norm when the step count is doubled.
    pub change: f64,
    pub converged: bool,
    pub steps: usize,
}

/// Evolves `inputs` along `path` over `length` mm and checks convergence
/// against twice the step count.
pub fn adiabatic_evolution(
    path: &dyn HamiltonianPath,
    length: f64,
    steps: usize,
    inputs: &[ModeField],
) -> Result<AdiabaticResult> {
    if steps == 0 {
        return Err(Error::Parameter("adiabatic evolution needs at least one step".into()));
    }
    if let Some(bad) = inputs.iter().find(|f| f.len() != path.dim()) {
        return Err(Error::Dimension(format!("{} amplitudes for {} sites", bad.len(), path.dim())));
    }
    let vs: Vec<CVector> = inputs.iter().map(|f| f.amplitudes.clone()).collect();
    let coarse = step_evolution(path, length, steps, &vs);
    let fine = step_evolution(path, length, 2 * steps, &vs);
    let change = coarse.iter().zip(&fine).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    Ok(AdiabaticResult {
        outputs: coarse.into_iter().map(|amplitudes| ModeField { amplitudes, energy: None }).collect(),
        change,
        converged: change < ADIABATIC_CONVERGENCE_TOL,
        steps,
    })
}

/// Full evolution operator, column by column. Intended for small systems.
pub fn evolution_operator(path: &dyn HamiltonianPath, length: f64, steps: usize) -> Result<CMatrix> {
    if steps == 0 {
        return Err(Error::Parameter("evolution needs at least one step".into()));
    }
    let n = path.dim();
    let basis: Vec<CVector> = (0..n)
        .map(|k| {
            let mut e = CVector::zeros(n);
            e[k] = c(1.0, 0.0);
            e
        })
        .collect();
    let cols = step_evolution(path, length, steps, &basis);
    Ok(CMatrix::from_fn(n, n, |i, j| cols[j][i]))
}

/// Vortex translation settings for the direct model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranslationConfig {
    pub field: VortexField,
    pub t: f64,
    pub start: [f64; 2],
    pub end: [f64; 2],
    pub length: f64,
    pub steps: usize,
    /// Near-zero window in units of t.
    pub window: f64,
}

impl TranslationConfig {
    /// 100 μm along x at t = 0.5/mm over 40 mm.
    pub fn standard() -> Self {
        Self {
            field: VortexField::standard(),
            t: 0.5,
            start: [-50.0, 0.0],
            end: [50.0, 0.0],
            length: 40.0,
            steps: 100,
            window: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TranslationResult {
    /// |⟨target|ψ(L)⟩|² with the zero mode at the end position.
    pub fidelity: f64,
    pub converged: bool,
    pub change: f64,
    pub output: ModeField,
}

/// Drags a vortex from `start` to `end` and compares with the displaced mode.
pub fn translate_vortex(geometry: &LatticeGeometry, cfg: &TranslationConfig) -> Result<TranslationResult> {
    let path = VortexPath::new(geometry.clone(), &cfg.field, cfg.t, vec![cfg.field.winding], vec![vec![cfg.start], vec![cfg.end]])?;
    let radius = 2.0 * cfg.field.l0;
    let mode_at = |p: [f64; 2]| -> Result<ModeField> {
        let spec = spectrum(&path.hamiltonian_for(&[p]).to_dense())?;
        Ok(near_zero_mode(&spec, geometry, &ZeroModeSearch::new(p, radius, cfg.window * cfg.t))?.field)
    };
    let input = mode_at(cfg.start)?;
    let target = mode_at(cfg.end)?;
    let res = adiabatic_evolution(&path, cfg.length, cfg.steps, &[input])?;
    let output = res.outputs.into_iter().next().expect("one input");
    Ok(TranslationResult { fidelity: target.fidelity(&output), converged: res.converged, change: res.change, output })
}

/// Two-vortex exchange settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BraidConfig {
    pub field: VortexField,
    pub t: f64,
    /// Cores start at (∓ρ, 0).
    pub radius: f64,
    pub length: f64,
    pub keyframes: usize,
    pub substeps: usize,
    /// Rotate the pair by π; otherwise the cores stay put.
    pub swap: bool,
    pub window: f64,
}

impl BraidConfig {
    /// 19 keyframes over 60 mm with six substeps each.
    pub fn standard(swap: bool) -> Self {
        Self {
            field: VortexField::standard(),
            t: 0.5,
            radius: 50.0,
            length: 60.0,
            keyframes: 19,
            substeps: 6,
            swap,
            window: 0.05,
        }
    }

    fn centers(&self, s: f64) -> [[f64; 2]; 2] {
        let th = if self.swap { PI * s } else { 0.0 };
        let r1 = [-self.radius * th.cos(), -self.radius * th.sin()];
        [r1, [-r1[0], -r1[1]]]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BraidResult {
    /// arg⟨target|ψ⟩ for the modes that started at (−ρ, 0) and (ρ, 0).
    pub phases: [f64; 2],
    pub fidelities: [f64; 2],
    pub converged: bool,
    pub change: f64,
}

/// atan2 folded into (−π, π], so that −0.0 offsets land on +π.
fn principal_angle(y: f64, x: f64) -> f64 {
    let a = y.atan2(x);
    if a <= -PI + 1e-12 {
        a + 2.0 * PI
    } else {
        a
    }
}

/// Zero modes of a vortex pair, phase-fixed against the continuum profile
/// with the local offset α + arg(R_self − R_other) on the branch (−π, π].
/// The mode whose relative angle crosses the branch cut during an exchange
/// picks up the sign.
fn pair_modes(path: &VortexPath, centers: &[[f64; 2]; 2], cfg: &BraidConfig) -> Result<[ModeField; 2]> {
    let spec = spectrum(&path.hamiltonian_for(centers).to_dense())?;
    let mut out = Vec::with_capacity(2);
    for (me, other) in [(0, 1), (1, 0)] {
        let (p, q) = (centers[me], centers[other]);
        let search = ZeroModeSearch::new(p, 2.0 * cfg.field.l0, cfg.window * cfg.t);
        let mut mode = near_zero_mode(&spec, &path.geometry, &search)?.field;
        let local = VortexField { center: p, alpha: cfg.field.alpha + principal_angle(p[1] - q[1], p[0] - q[0]), ..cfg.field };
        mode.align_to(&analytic_zero_mode(&path.geometry, &local)?);
        out.push(mode);
    }
    let second = out.pop().expect("two modes");
    let first = out.pop().expect("two modes");
    Ok([first, second])
}

/// Evolves both zero modes of a vortex pair along the exchange path and reads
/// off their phases against the zero modes at the final core positions.
pub fn braid(geometry: &LatticeGeometry, cfg: &BraidConfig) -> Result<BraidResult> {
    if cfg.keyframes < 2 || cfg.substeps == 0 {
        return Err(Error::Parameter("braid needs ≥ 2 keyframes and ≥ 1 substep".into()));
    }
    let keyframes: Vec<Vec<[f64; 2]>> = (0..cfg.keyframes)
        .map(|k| cfg.centers(k as f64 / (cfg.keyframes - 1) as f64).to_vec())
        .collect();
    let path = VortexPath::new(geometry.clone(), &cfg.field, cfg.t, vec![cfg.field.winding; 2], keyframes)?;
    let start = pair_modes(&path, &cfg.centers(0.0), cfg)?;
    let end = pair_modes(&path, &cfg.centers(1.0), cfg)?;
    let steps = (cfg.keyframes - 1) * cfg.substeps;
    let res = adiabatic_evolution(&path, cfg.length, steps, &start)?;
    // The mode starting at (−ρ, 0) ends where the first core ends.
    let o = [end[0].overlap(&res.outputs[0]), end[1].overlap(&res.outputs[1])];
    let fidelities = [o[0].norm_sqr(), o[1].norm_sqr()];
    let worst = fidelities[0].min(fidelities[1]);
    if worst < MIN_BRAID_FIDELITY {
        return Err(Error::BraidFailed(worst));
    }
    let phases = [wrap_signed(o[0].arg()), wrap_signed(o[1].arg())];
    Ok(BraidResult { phases, fidelities, converged: res.converged, change: res.change })
}

/// Applies b†_L → b†_R, b†_R → −b†_L `times` times to a two-mode state in the
/// basis |n_L n_R⟩ = |00⟩, |10⟩, |01⟩, |11⟩ (bosonic mode labels).
pub fn exchange_modes(state: [C64; 4], times: usize) -> [C64; 4] {
    let mut s = state;
    for _ in 0..times {
        s = [s[0], -s[2], s[1], -s[3]];
    }
    s
}

/// Input-shaping optimization settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExcitationConfig {
    pub z: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Success when total/target intensity falls below this.
    pub threshold: f64,
    pub max_iter: usize,
}

impl Default for ExcitationConfig {
    /// 9 cm chip. The threshold separates the vortex optimum (≈ 2) from the
    /// best confinement reachable without a bound mode (≈ 4).
    fn default() -> Self {
        Self { z: 90.0, restarts: 4, seed: 1, threshold: 3.0, max_iter: 2000 }
    }
}

#[derive(Debug, Clone)]
pub struct ExcitationResult {
    pub amplitudes: Vec<f64>,
    pub phases: Vec<f64>,
    /// Best (total intensity)/(target intensity).
    pub objective: f64,
    pub success: bool,
    pub restart_objectives: Vec<f64>,
    pub output: ModeField,
}

/// Maximal input set for the standard excitation setup.
pub const MAX_INPUT_SITES: usize = 13;

/// The `count` sites carrying the most intensity of the continuum zero mode
/// of `field`, brightest first.
pub fn excitation_inputs(geometry: &LatticeGeometry, field: &VortexField, count: usize) -> Result<Vec<usize>> {
    let intensity = analytic_zero_mode(geometry, field)?.intensities();
    let mut order: Vec<usize> = (0..geometry.len()).collect();
    order.sort_by(|&i, &j| intensity[j].total_cmp(&intensity[i]).then(i.cmp(&j)));
    order.truncate(count.min(MAX_INPUT_SITES));
    Ok(order)
}

/// Gradient descent over the complex input amplitudes on `inputs`, minimizing
/// total over target intensity after propagating `z`. Amplitudes are carried
/// as real and imaginary parts and reported as modulus and phase.
pub fn excitation_optimize(
    h: &SparseHamiltonian,
    inputs: &[usize],
    target: &[usize],
    cfg: &ExcitationConfig,
    start: Option<&[C64]>,
) -> Result<ExcitationResult> {
    let n = h.dim();
    if inputs.is_empty() || inputs.len() > MAX_INPUT_SITES {
        return Err(Error::Parameter(format!("{} input sites, expected 1..={MAX_INPUT_SITES}", inputs.len())));
    }
    if inputs.iter().chain(target).any(|&i| i >= n) || target.is_empty() {
        return Err(Error::Parameter("input or target site out of range".into()));
    }
    let columns: Vec<CVector> = inputs
        .iter()
        .map(|&k| {
            let mut e = CVector::zeros(n);
            e[k] = c(1.0, 0.0);
            sparse_evolve(h, cfg.z, &e)
        })
        .collect();
    let m = inputs.len();
    let output = |x: &[f64]| -> CVector {
        let mut v = CVector::zeros(n);
        for k in 0..m {
            v += &columns[k] * c(x[k], x[m + k]);
        }
        v
    };
    let objective = |x: &[f64]| -> f64 {
        let v = output(x);
        let total = v.norm_squared();
        let inside: f64 = target.iter().map(|&i| v[i].norm_sqr()).sum();
        if inside > 0.0 {
            total / inside
        } else {
            f64::INFINITY
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut starts: Vec<Vec<f64>> = Vec::new();
    if let Some(amps) = start {
        if amps.len() != m {
            return Err(Error::Dimension(format!("{} start amplitudes for {m} inputs", amps.len())));
        }
        starts.push(amps.iter().map(|a| a.re).chain(amps.iter().map(|a| a.im)).collect());
    }
    for _ in 0..cfg.restarts {
        starts.push((0..2 * m).map(|_| rng.gen_range(-1.0..1.0)).collect());
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut restart_objectives = Vec::new();
    let mut any_converged = false;
    for x0 in starts {
        let (f, x, converged) = descend(&objective, x0, cfg.max_iter);
        any_converged |= converged;
        restart_objectives.push(f);
        if best.as_ref().map_or(true, |(b, _)| f < *b) {
            best = Some((f, x));
        }
    }
    let (f, x) = best.expect("at least one start");
    if !any_converged || !f.is_finite() {
        return Err(Error::OptimizationFailed(format!("no restart converged (best objective {f:.4})")));
    }
    let amps: Vec<C64> = (0..m).map(|k| c(x[k], x[m + k])).collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    Ok(ExcitationResult {
        amplitudes: amps.iter().map(|a| a.norm() / norm).collect(),
        phases: amps.iter().map(|a| a.arg()).collect(),
        objective: f,
        success: f < cfg.threshold,
        restart_objectives,
        output: ModeField::new(output(&x), None)?,
    })
}

/// Finite-difference gradient descent with step halving. Returns the final
/// value, point and whether it stalled before `max_iter`.
fn descend(f: &dyn Fn(&[f64]) -> f64, mut x: Vec<f64>, max_iter: usize) -> (f64, Vec<f64>, bool) {
    let mut fx = f(&x);
    let mut step = 0.1;
    for _ in 0..max_iter {
        let scale = x.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        let h = 1e-7 * scale;
        let grad: Vec<f64> = (0..x.len())
            .map(|k| {
                let mut xp = x.clone();
                xp[k] += h;
                let mut xm = x.clone();
                xm[k] -= h;
                (f(&xp) - f(&xm)) / (2.0 * h)
            })
            .collect();
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm * scale < 1e-9 * fx {
            return (fx, x, true);
        }
        loop {
            let trial: Vec<f64> = x.iter().zip(&grad).map(|(xi, g)| xi - step * scale * g / gnorm).collect();
            let ft = f(&trial);
            if ft < fx {
                let gain = fx - ft;
                x = trial;
                fx = ft;
                step = (step * 1.5).min(1.0);
                if gain < 1e-10 * fx {
                    return (fx, x, true);
                }
                break;
            }
            step *= 0.5;
            if step < 1e-12 {
                return (fx, x, true);
            }
        }
    }
    (fx, x, false)
}

/// γ_AB of the optimized output.
pub fn excitation_gamma(result: &ExcitationResult, geometry: &LatticeGeometry) -> Result<f64> {
    sublattice_ratio(&result.output, geometry)
}
