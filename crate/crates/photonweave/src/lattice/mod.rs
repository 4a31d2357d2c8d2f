//! Photonic-crystal lattices: geometries, coupled-mode Hamiltonians, spectra,
//! vortex zero modes and disorder.
//!
//! Lengths are in μm, couplings in 1/mm and propagation lengths in mm. The
//! direct Kekulé model writes the bond modulation straight into the hopping;
//! the geometry model displaces waveguides and derives couplings from the
//! exponential distance law.

mod dynamics;
mod topology;

pub use dynamics::*;
pub use topology::*;

use std::collections::HashMap;
use std::f64::consts::PI;

use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::numerics::{c, CMatrix, CVector, C64, HERMITIAN_TOL};
use crate::{Error, Result};

/// Default lattice constant (μm).
pub const DEFAULT_A0: f64 = 10.0;
/// Sites closer than this fraction of a₀ make a geometry invalid.
pub const MIN_SITE_SEPARATION: f64 = 0.2;
/// Displacements above this fraction of a₀ leave the perturbative regime.
pub const DISPLACEMENT_WARNING: f64 = 0.3;
/// Displacement scale tuned so the standard vortex gives 0.8 μm at most.
pub const DEFAULT_XI_EFF: f64 = 0.8;
/// Decay constant of the coupling law (1/μm).
pub const DEFAULT_GAMMA: f64 = 0.45;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sublattice {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub x: f64,
    pub y: f64,
    pub sublattice: Sublattice,
}

impl Site {
    pub fn pos(&self) -> [f64; 2] {
        [self.x, self.y]
    }
}

/// Waveguide positions with sublattice labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeGeometry {
    pub sites: Vec<Site>,
    pub a0: f64,
    /// Width and height of the crop box, centered on the origin.
    pub bounds: [f64; 2],
}

/// A nearest-neighbour A→B bond of an undistorted honeycomb, `j` indexing s_j.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub j: usize,
}

impl LatticeGeometry {
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn positions(&self) -> Vec<[f64; 2]> {
        self.sites.iter().map(Site::pos).collect()
    }

    pub fn count(&self, sub: Sublattice) -> usize {
        self.sites.iter().filter(|s| s.sublattice == sub).count()
    }

    /// Pairs (i < j) closer than `rmax`, with their distance.
    pub fn pairs_within(&self, rmax: f64) -> Vec<(usize, usize, f64)> {
        pairs_within(&self.positions(), rmax)
    }

    /// Indices of sites within `radius` of `center`.
    pub fn sites_within(&self, center: [f64; 2], radius: f64) -> Vec<usize> {
        (0..self.len()).filter(|&i| dist(self.sites[i].pos(), center) < radius).collect()
    }

    /// Index of the site nearest to `p`.
    pub fn nearest_site(&self, p: [f64; 2]) -> Option<usize> {
        (0..self.len()).min_by(|&i, &j| {
            dist(self.sites[i].pos(), p).total_cmp(&dist(self.sites[j].pos(), p))
        })
    }

    pub fn min_separation(&self) -> f64 {
        self.pairs_within(self.a0)
            .iter()
            .map(|&(_, _, d)| d)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a0 > 0.0) {
            return Err(Error::Parameter(format!("lattice constant {} must be positive", self.a0)));
        }
        let min = self.min_separation();
        if min < MIN_SITE_SEPARATION * self.a0 {
            return Err(Error::Constraint(format!(
                "sites {min:.3} μm apart, below {:.3} μm",
                MIN_SITE_SEPARATION * self.a0
            )));
        }
        Ok(())
    }

    /// Nearest-neighbour bonds classified by bond vector. Only meaningful on
    /// undistorted honeycomb geometries.
    pub fn honeycomb_bonds(&self) -> Vec<Bond> {
        let s = bond_vectors(self.a0);
        let mut bonds = Vec::new();
        for (i, k, _) in self.pairs_within(1.1 * self.a0) {
            let (a, b) = match (self.sites[i].sublattice, self.sites[k].sublattice) {
                (Sublattice::A, Sublattice::B) => (i, k),
                (Sublattice::B, Sublattice::A) => (k, i),
                _ => continue,
            };
            let d = [self.sites[b].x - self.sites[a].x, self.sites[b].y - self.sites[a].y];
            if let Some(j) = (0..3).find(|&j| dist(d, s[j]) < 0.1 * self.a0) {
                bonds.push(Bond { a, b, j });
            }
        }
        bonds.sort_by_key(|b| (b.a, b.j));
        bonds
    }

    /// Number of nearest neighbours (0.5 a₀ < d < 1.1 a₀) of every site.
    pub fn coordination(&self) -> Vec<usize> {
        let mut nn = vec![0; self.len()];
        for (i, j, d) in self.pairs_within(1.1 * self.a0) {
            if d > 0.5 * self.a0 {
                nn[i] += 1;
                nn[j] += 1;
            }
        }
        nn
    }

    /// Repeatedly drops sites with fewer than two nearest neighbours, then
    /// orders sites by row.
    fn prune(&mut self) {
        loop {
            let nn = self.coordination();
            if nn.iter().all(|&k| k >= 2) {
                break;
            }
            self.sites = self.sites.iter().zip(&nn).filter(|(_, &k)| k >= 2).map(|(s, _)| *s).collect();
        }
        self.sites.sort_by(|p, q| p.y.total_cmp(&q.y).then(p.x.total_cmp(&q.x)));
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parameter(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let g: Self = serde_json::from_str(s).map_err(|e| Error::Parameter(e.to_string()))?;
        g.validate()?;
        Ok(g)
    }
}

pub(crate) fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Grid-binned neighbour search.
pub fn pairs_within(points: &[[f64; 2]], rmax: f64) -> Vec<(usize, usize, f64)> {
    let cell = rmax.max(1e-12);
    let key = |p: [f64; 2]| ((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, &p) in points.iter().enumerate() {
        grid.entry(key(p)).or_default().push(i);
    }
    let mut out = Vec::new();
    for (i, &p) in points.iter().enumerate() {
        let (cx, cy) = key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                let Some(bucket) = grid.get(&(cx + dx, cy + dy)) else { continue };
                for &j in bucket {
                    if j > i {
                        let d = dist(p, points[j]);
                        if d < rmax {
                            out.push((i, j, d));
                        }
                    }
                }
            }
        }
    }
    out.sort_by_key(|&(i, j, _)| (i, j));
    out
}

/// Nearest-neighbour vectors s₁, s₂, s₃ pointing from A to B.
pub fn bond_vectors(a0: f64) -> [[f64; 2]; 3] {
    let h = 3f64.sqrt() / 2.0;
    [[0.0, -a0], [h * a0, 0.5 * a0], [-h * a0, 0.5 * a0]]
}

/// Dirac point K₊ = (4π/(3√3 a₀), 0).
pub fn dirac_point(a0: f64) -> [f64; 2] {
    [4.0 * PI / (3.0 * 3f64.sqrt() * a0), 0.0]
}

/// Honeycomb cropped to a `width` × `height` box centered on a B site at the
/// origin. Sites with fewer than two neighbours are pruned repeatedly.
pub fn graphene_box(width: f64, height: f64, a0: f64) -> Result<LatticeGeometry> {
    if !(width > 0.0 && height > 0.0) {
        return Err(Error::Parameter("graphene dimensions must be positive".into()));
    }
    let eps = 1e-9 * a0;
    honeycomb_crop(a0, [width, height], |p| p[0].abs() <= width / 2.0 + eps && p[1].abs() <= height / 2.0 + eps)
}

/// Honeycomb cropped to an ellipse with semi-axes `rx`, `ry` around a B site
/// at the origin.
pub fn graphene_ellipse(rx: f64, ry: f64, a0: f64) -> Result<LatticeGeometry> {
    if !(rx > 0.0 && ry > 0.0) {
        return Err(Error::Parameter("ellipse semi-axes must be positive".into()));
    }
    honeycomb_crop(a0, [2.0 * rx, 2.0 * ry], |p| (p[0] / rx).powi(2) + (p[1] / ry).powi(2) <= 1.0)
}

/// Roughly circular honeycomb with exactly `n` sites: the nearest sites to the
/// origin after pruning, then outermost two-bond sites peeled off one at a time.
pub fn graphene_with_sites(n: usize, a0: f64) -> Result<LatticeGeometry> {
    if n < 6 {
        return Err(Error::Parameter("need at least one hexagon".into()));
    }
    // Honeycomb density is 4/(3√3 a₀²); start from the smallest disk that holds n.
    let density = 4.0 / (3.0 * 3f64.sqrt() * a0 * a0);
    let mut radius = (n as f64 / (density * PI)).sqrt();
    let mut geom = honeycomb_crop(a0, [2.0 * radius; 2], |p| p[0].hypot(p[1]) <= radius)?;
    while geom.len() < n {
        radius += 0.1 * a0;
        geom = honeycomb_crop(a0, [2.0 * radius; 2], |p| p[0].hypot(p[1]) <= radius)?;
    }
    let rank = |s: &Site| (s.x.hypot(s.y), s.y.atan2(s.x));
    while geom.len() > n {
        let nn = geom.coordination();
        let mut neighbours = vec![Vec::new(); geom.len()];
        for (i, j, d) in geom.pairs_within(1.1 * a0) {
            if d > 0.5 * a0 {
                neighbours[i].push(j);
                neighbours[j].push(i);
            }
        }
        let removable = (0..geom.len())
            .filter(|&i| nn[i] == 2 && neighbours[i].iter().all(|&j| nn[j] >= 3))
            .max_by(|&i, &j| {
                let (ri, ai) = rank(&geom.sites[i]);
                let (rj, aj) = rank(&geom.sites[j]);
                ri.total_cmp(&rj).then(ai.total_cmp(&aj))
            });
        let Some(i) = removable else {
            return Err(Error::Unsupported(format!("no pruned honeycomb with exactly {n} sites")));
        };
        geom.sites.remove(i);
    }
    let r = geom.sites.iter().map(|s| s.x.hypot(s.y)).fold(0.0, f64::max);
    geom.bounds = [2.0 * r, 2.0 * r];
    Ok(geom)
}

fn honeycomb_crop(a0: f64, bounds: [f64; 2], keep: impl Fn([f64; 2]) -> bool) -> Result<LatticeGeometry> {
    if !(a0 > 0.0) {
        return Err(Error::Parameter("lattice constant must be positive".into()));
    }
    let s = bond_vectors(a0);
    let a1 = [s[1][0] - s[0][0], s[1][1] - s[0][1]];
    let a2 = [s[2][0] - s[0][0], s[2][1] - s[0][1]];
    let reach = (2.0 * bounds[0].max(bounds[1]) / a0) as i64 + 4;
    let mut sites = Vec::new();
    for n in -reach..=reach {
        for m in -reach..=reach {
            let (n, m) = (n as f64, m as f64);
            let a = [n * a1[0] + m * a2[0] - s[0][0], n * a1[1] + m * a2[1] - s[0][1]];
            let b = [a[0] + s[0][0], a[1] + s[0][1]];
            for (p, sub) in [(a, Sublattice::A), (b, Sublattice::B)] {
                if keep(p) {
                    sites.push(Site { x: p[0], y: p[1], sublattice: sub });
                }
            }
        }
    }
    let mut geom = LatticeGeometry { sites, a0, bounds };
    geom.prune();
    Ok(geom)
}

/// Honeycomb with `rows` zigzag chains of `cols` sites each.
pub fn graphene_lattice(rows: usize, cols: usize, a0: f64) -> Result<LatticeGeometry> {
    if rows == 0 || cols == 0 {
        return Err(Error::Parameter("rows and cols must be positive".into()));
    }
    let width = (cols as f64 - 1.0) * 3f64.sqrt() / 2.0 * a0 + 0.01 * a0;
    let height = (rows as f64 - 1.0) * 1.5 * a0 + 0.5 * a0 + 0.01 * a0;
    graphene_box(width, height, a0)
}

/// Linear chain of `n` sites with alternating A/B labels.
pub fn ssh_chain(n: usize, spacing: f64) -> Result<LatticeGeometry> {
    if n == 0 || !(spacing > 0.0) {
        return Err(Error::Parameter("chain needs positive length and spacing".into()));
    }
    let sites = (0..n)
        .map(|k| Site {
            x: k as f64 * spacing,
            y: 0.0,
            sublattice: if k % 2 == 0 { Sublattice::A } else { Sublattice::B },
        })
        .collect();
    Ok(LatticeGeometry { sites, a0: spacing, bounds: [n as f64 * spacing, 0.0] })
}

/// How a named geometry is cut from the honeycomb.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LatticeShape {
    /// Rectangle crop, width × height in μm.
    Box(f64, f64),
    /// Near-circular flake with an exact site count.
    Sites(usize),
}

/// Named geometries at a₀ = 10 μm with their site counts.
pub const LATTICE_PRESETS: [(&str, LatticeShape, usize); 5] = [
    ("thesis-1192", LatticeShape::Sites(1192), 1192),
    ("vortex-1267", LatticeShape::Box(400.0, 400.0), 1267),
    ("translate-940", LatticeShape::Box(400.0, 300.0), 940),
    ("disorder-700", LatticeShape::Box(300.0, 300.0), 700),
    ("small-432", LatticeShape::Box(240.0, 240.0), 432),
];

pub fn lattice_preset(name: &str) -> Result<LatticeGeometry> {
    let (_, shape, _) = LATTICE_PRESETS
        .iter()
        .find(|p| p.0 == name)
        .ok_or_else(|| Error::Parameter(format!("unknown lattice preset '{name}'")))?;
    match *shape {
        LatticeShape::Box(w, h) => graphene_box(w, h, DEFAULT_A0),
        LatticeShape::Sites(n) => graphene_with_sites(n, DEFAULT_A0),
    }
}

/// Δ₀ tanh(r/l₀) e^{i(α + nθ)} around R₀.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VortexField {
    pub delta0: f64,
    pub l0: f64,
    pub winding: i32,
    pub alpha: f64,
    pub center: [f64; 2],
}

impl VortexField {
    /// Standard parameters: Δ₀ = 0.5, l₀ = 2a₀, α = π/2, n = 1 at the origin.
    pub fn standard() -> Self {
        Self { delta0: 0.5, l0: 2.0 * DEFAULT_A0, winding: 1, alpha: PI / 2.0, center: [0.0, 0.0] }
    }

    pub fn at(self, center: [f64; 2]) -> Self {
        Self { center, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l0 > 0.0) || !self.delta0.is_finite() || self.delta0 < 0.0 {
            return Err(Error::Parameter("vortex needs l0 > 0 and delta0 >= 0".into()));
        }
        Ok(())
    }
}

pub fn vortex_delta(pos: [f64; 2], field: &VortexField) -> C64 {
    multi_vortex_delta(pos, field.delta0, field.l0, field.alpha, &[(field.center, field.winding)])
}

/// Product ansatz Δ₀ Π tanh(|r−Rᵢ|/l₀) e^{i(α + Σ nᵢ arg(r−Rᵢ))}.
pub fn multi_vortex_delta(
    pos: [f64; 2],
    delta0: f64,
    l0: f64,
    alpha: f64,
    vortices: &[([f64; 2], i32)],
) -> C64 {
    let mut modulus = delta0;
    let mut phase = alpha;
    for &(r0, n) in vortices {
        let d = [pos[0] - r0[0], pos[1] - r0[1]];
        let r = d[0].hypot(d[1]);
        modulus *= (r / l0).tanh();
        if r > 0.0 {
            phase += n as f64 * d[1].atan2(d[0]);
        }
    }
    C64::from_polar(modulus, phase)
}

/// Result of displacing waveguides by the Kekulé field.
#[derive(Debug, Clone, PartialEq)]
pub struct Displacement {
    pub geometry: LatticeGeometry,
    pub max_displacement: f64,
    /// Set when some site moved by more than 0.3 a₀.
    pub warning: bool,
}

/// Shift A sites by 2Re[iξΔe^{iG·r}(1, i)] and B sites by 2Re[iξΔe^{iG·r}(1, −i)]
/// with G = 2K₊.
pub fn kekule_displace(geometry: &LatticeGeometry, field: &VortexField, xi_eff: f64) -> Displacement {
    let k = dirac_point(geometry.a0);
    let g = [2.0 * k[0], 2.0 * k[1]];
    let mut out = geometry.clone();
    let mut max = 0.0f64;
    for site in &mut out.sites {
        let p = site.pos();
        let w = C64::i() * xi_eff * vortex_delta(p, field) * C64::from_polar(1.0, dot(g, p));
        let sy = if site.sublattice == Sublattice::A { 1.0 } else { -1.0 };
        let u = [2.0 * w.re, 2.0 * (w * C64::i() * sy).re];
        site.x += u[0];
        site.y += u[1];
        max = max.max(u[0].hypot(u[1]));
    }
    Displacement {
        geometry: out,
        max_displacement: max,
        warning: max > DISPLACEMENT_WARNING * geometry.a0,
    }
}

/// Exponential coupling law k(d) = a·e^{−γd} within a cutoff radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingModel {
    pub amplitude: f64,
    pub gamma: f64,
    pub cutoff: f64,
}

impl CouplingModel {
    /// Model with coupling `t` at distance `a0`.
    pub fn normalized(t: f64, gamma: f64, a0: f64, cutoff: f64) -> Self {
        Self { amplitude: t * (gamma * a0).exp(), gamma, cutoff }
    }

    /// t = 1/mm at 10 μm, γ = 0.45/μm, cutoff 1.9 a₀ (includes next-nearest).
    pub fn standard() -> Self {
        Self::normalized(1.0, DEFAULT_GAMMA, DEFAULT_A0, 1.9 * DEFAULT_A0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.amplitude > 0.0 && self.cutoff > 0.0) {
            return Err(Error::Parameter("coupling model needs a, γ, cutoff > 0".into()));
        }
        Ok(())
    }

    pub fn coupling(&self, d: f64) -> f64 {
        if d < self.cutoff {
            self.amplitude * (-self.gamma * d).exp()
        } else {
            0.0
        }
    }

    /// Beat length 2π/k(d) in mm.
    pub fn beat_length(&self, d: f64) -> f64 {
        2.0 * PI / self.coupling(d)
    }

    /// Next-nearest over nearest coupling on a honeycomb of constant a₀.
    pub fn nnn_ratio(&self, a0: f64) -> f64 {
        (-self.gamma * (3f64.sqrt() - 1.0) * a0).exp()
    }
}

/// Sparse Hermitian matrix stored by rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseHamiltonian {
    pub rows: Vec<Vec<(usize, C64)>>,
}

impl SparseHamiltonian {
    pub fn zeros(n: usize) -> Self {
        Self { rows: vec![Vec::new(); n] }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    /// Sets H[i][j] = v and H[j][i] = v̄.
    pub fn set_pair(&mut self, i: usize, j: usize, v: C64) {
        self.rows[i].push((j, v));
        if i != j {
            self.rows[j].push((i, v.conj()));
        }
    }

    pub fn from_dense(h: &CMatrix) -> Self {
        let rows = (0..h.nrows())
            .map(|i| (0..h.ncols()).filter(|&j| h[(i, j)] != c(0.0, 0.0)).map(|j| (j, h[(i, j)])).collect())
            .collect();
        Self { rows }
    }

    pub fn to_dense(&self) -> CMatrix {
        let n = self.dim();
        let mut h = CMatrix::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                h[(i, j)] += v;
            }
        }
        h
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        CVector::from_iterator(
            self.dim(),
            self.rows.iter().map(|row| row.iter().map(|&(j, h)| h * v[j]).sum::<C64>()),
        )
    }

    /// Gershgorin bound on the spectral radius.
    pub fn norm_bound(&self) -> f64 {
        self.rows.iter().map(|r| r.iter().map(|(_, h)| h.norm()).sum::<f64>()).fold(0.0, f64::max)
    }
}

/// H[i][j] = −a e^{−γ d_ij} within the cutoff, zero diagonal.
pub fn coupling_hamiltonian(geometry: &LatticeGeometry, model: &CouplingModel) -> CMatrix {
    sparse_coupling_hamiltonian(geometry, model).to_dense()
}

pub fn sparse_coupling_hamiltonian(geometry: &LatticeGeometry, model: &CouplingModel) -> SparseHamiltonian {
    let mut h = SparseHamiltonian::zeros(geometry.len());
    for (i, j, d) in geometry.pairs_within(model.cutoff) {
        h.set_pair(i, j, c(-model.coupling(d), 0.0));
    }
    h
}

/// Direct Kekulé model on an undistorted honeycomb: each A→B bond along s_j
/// carries −t(1 + 2Re[(1/3)Δ(r_A) e^{iK·s_j} e^{2iK·r_A}]).
pub fn kekule_hamiltonian<F>(geometry: &LatticeGeometry, bonds: &[Bond], t: f64, delta: F) -> SparseHamiltonian
where
    F: Fn([f64; 2]) -> C64,
{
    let k = dirac_point(geometry.a0);
    let s = bond_vectors(geometry.a0);
    let mut h = SparseHamiltonian::zeros(geometry.len());
    for b in bonds {
        let r = geometry.sites[b.a].pos();
        let phase = C64::from_polar(1.0, dot(k, s[b.j]) + 2.0 * dot(k, r));
        let dt = 2.0 * (delta(r) * phase / 3.0).re;
        h.set_pair(b.a, b.b, c(-t * (1.0 + dt), 0.0));
    }
    h
}

/// Single-vortex direct model.
pub fn vortex_hamiltonian(geometry: &LatticeGeometry, field: &VortexField, t: f64) -> SparseHamiltonian {
    let bonds = geometry.honeycomb_bonds();
    kekule_hamiltonian(geometry, &bonds, t, |p| vortex_delta(p, field))
}

/// Amplitudes over sites, unit norm, with an eigenvalue when one applies.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeField {
    pub amplitudes: CVector,
    pub energy: Option<f64>,
}

impl ModeField {
    /// Normalizes `amplitudes`.
    pub fn new(amplitudes: CVector, energy: Option<f64>) -> Result<Self> {
        let norm = amplitudes.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Parameter("mode field has zero norm".into()));
        }
        Ok(Self { amplitudes: amplitudes.unscale(norm), energy })
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::new(CVector::from_iterator(values.len(), values.iter().map(|&v| c(v, 0.0))), None)
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    /// ⟨self|other⟩
    pub fn overlap(&self, other: &ModeField) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    pub fn fidelity(&self, other: &ModeField) -> f64 {
        self.overlap(other).norm_sqr()
    }

    pub fn intensities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn weight_on(&self, sites: &[usize]) -> f64 {
        sites.iter().map(|&i| self.amplitudes[i].norm_sqr()).sum()
    }

    /// Removes the global phase so that ⟨reference|self⟩ is real positive.
    pub fn align_to(&mut self, reference: &ModeField) {
        let o = reference.overlap(self);
        if o.norm() > 0.0 {
            let p = o.conj() / o.norm();
            self.amplitudes *= p;
        }
    }

    /// CSV rows `site,re,im`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("site,re,im\n");
        for (i, a) in self.amplitudes.iter().enumerate() {
            s.push_str(&format!("{i},{:.12e},{:.12e}\n", a.re, a.im));
        }
        s
    }
}

/// Eigenvalues ascending with matching column eigenvectors.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Spectrum {
    pub fn mode(&self, k: usize) -> ModeField {
        ModeField { amplitudes: self.vectors.column(k).into_owned(), energy: Some(self.values[k]) }
    }

    /// exp(−iHz)·v
    pub fn evolve(&self, z: f64, v: &CVector) -> CVector {
        let mut coeffs = self.vectors.adjoint() * v;
        for (k, e) in self.values.iter().enumerate() {
            coeffs[k] *= C64::from_polar(1.0, -e * z);
        }
        &self.vectors * coeffs
    }
}

/// Full eigendecomposition. Real-symmetric input takes the real solver.
pub fn spectrum(h: &CMatrix) -> Result<Spectrum> {
    let n = h.nrows();
    if h.ncols() != n {
        return Err(Error::Dimension(format!("{}x{} Hamiltonian", n, h.ncols())));
    }
    let dev = crate::numerics::hermitian_deviation(h);
    if dev > HERMITIAN_TOL {
        return Err(Error::NotHermitian(dev));
    }
    let failed = |e: faer::linalg::evd::EvdError| Error::Parameter(format!("eigensolver failed: {e:?}"));
    if h.iter().all(|z| z.im == 0.0) {
        let m = Mat::<f64>::from_fn(n, n, |i, j| 0.5 * (h[(i, j)].re + h[(j, i)].re));
        let eig = m.self_adjoint_eigen(Side::Lower).map_err(failed)?;
        let s = eig.S().column_vector();
        let u = eig.U();
        Ok(Spectrum {
            values: (0..n).map(|k| s[k]).collect(),
            vectors: CMatrix::from_fn(n, n, |i, j| c(u[(i, j)], 0.0)),
        })
    } else {
        let m = Mat::<faer::c64>::from_fn(n, n, |i, j| 0.5 * (h[(i, j)] + h[(j, i)].conj()));
        let eig = m.self_adjoint_eigen(Side::Lower).map_err(failed)?;
        let s = eig.S().column_vector();
        let u = eig.U();
        Ok(Spectrum { values: (0..n).map(|k| s[k].re).collect(), vectors: CMatrix::from_fn(n, n, |i, j| u[(i, j)]) })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }
}

/// Histogram of eigenvalues over `bins` equal bins spanning their range.
pub fn density_of_states(values: &[f64], bins: usize) -> Result<Histogram> {
    if bins == 0 || values.is_empty() {
        return Err(Error::Parameter("density of states needs bins and eigenvalues".into()));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let half = (hi - lo).max(1e-12) / 2.0 * (1.0 + 1e-9);
    let mid = 0.5 * (lo + hi);
    let (lo, width) = (mid - half, 2.0 * half / bins as f64);
    let edges = (0..=bins).map(|k| lo + k as f64 * width).collect();
    let mut counts = vec![0; bins];
    for &v in values {
        counts[(((v - lo) / width) as usize).min(bins - 1)] += 1;
    }
    Ok(Histogram { edges, counts })
}

/// How to pick a localized mode out of the near-zero subspace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZeroModeSearch {
    pub center: [f64; 2],
    /// Radius of the localization region (μm).
    pub radius: f64,
    /// Half-width of the energy window around the window center.
    pub window: f64,
    /// Center the window on the median of the three smallest |E| instead of 0.
    /// Needed once next-nearest couplings shift the mid-gap energy.
    pub recenter: bool,
}

impl ZeroModeSearch {
    pub fn new(center: [f64; 2], radius: f64, window: f64) -> Self {
        Self { center, radius, window, recenter: false }
    }
}

/// A mode extracted from the near-zero subspace.
#[derive(Debug, Clone)]
pub struct ZeroMode {
    pub field: ModeField,
    /// Fraction of intensity inside the search region.
    pub region_weight: f64,
    /// Region weights of all subspace directions, descending.
    pub region_weights: Vec<f64>,
    pub subspace_dim: usize,
}

impl ZeroMode {
    /// Subspace directions with a majority of their weight in the region.
    pub fn localized_count(&self) -> usize {
        self.region_weights.iter().filter(|&&w| w > 0.5).count()
    }
}

/// Diagonalizes the region projector inside the near-zero subspace and keeps
/// the direction with the largest in-region weight.
pub fn near_zero_mode(spec: &Spectrum, geometry: &LatticeGeometry, search: &ZeroModeSearch) -> Result<ZeroMode> {
    let e0 = if search.recenter {
        let mut by_abs: Vec<f64> = spec.values.clone();
        by_abs.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
        let mut three: Vec<f64> = by_abs.into_iter().take(3).collect();
        three.sort_by(f64::total_cmp);
        three[three.len() / 2]
    } else {
        0.0
    };
    let cols: Vec<usize> = (0..spec.values.len()).filter(|&k| (spec.values[k] - e0).abs() < search.window).collect();
    if cols.is_empty() {
        return Err(Error::NoMode(format!("no eigenvalue within {} of {e0:.3e}", search.window)));
    }
    let region = geometry.sites_within(search.center, search.radius);
    let k = cols.len();
    let proj = CMatrix::from_fn(k, k, |a, b| {
        region.iter().map(|&i| spec.vectors[(i, cols[a])].conj() * spec.vectors[(i, cols[b])]).sum()
    });
    let eig = proj.symmetric_eigen();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = order[0];
    let u = eig.eigenvectors.column(top);
    let mut v = CVector::zeros(spec.vectors.nrows());
    let mut energy = 0.0;
    for (a, &col) in cols.iter().enumerate() {
        v += spec.vectors.column(col) * u[a];
        energy += u[a].norm_sqr() * spec.values[col];
    }
    let field = ModeField::new(v, Some(energy))?;
    Ok(ZeroMode {
        region_weight: field.weight_on(&region),
        region_weights: order.iter().map(|&a| eig.eigenvalues[a]).collect(),
        subspace_dim: k,
        field,
    })
}

/// Continuum vortex mode e^{−Δ₀ l₀ ln cosh(r/l₀)/v_F}·cos(K₊·r + α/2 − π/4) on
/// B for n = +1; the n = −1 mode lives on A with the conjugate phase.
/// Δ₀ is in units of the hopping, so v_F = 3a₀/2.
pub fn analytic_zero_mode(geometry: &LatticeGeometry, field: &VortexField) -> Result<ModeField> {
    let (support, sign) = match field.winding {
        1 => (Sublattice::B, 1.0),
        -1 => (Sublattice::A, -1.0),
        n => return Err(Error::Unsupported(format!("analytic zero mode for winding {n}"))),
    };
    let k = dirac_point(geometry.a0);
    let vf = 1.5 * geometry.a0;
    let amps: Vec<f64> = geometry
        .sites
        .iter()
        .map(|s| {
            if s.sublattice != support {
                return 0.0;
            }
            let r = dist(s.pos(), field.center);
            let decay = (-field.delta0 * field.l0 * (r / field.l0).cosh().ln() / vf).exp();
            decay * (dot(k, s.pos()) + sign * (field.alpha / 2.0 - PI / 4.0)).cos()
        })
        .collect();
    ModeField::from_real(&amps).map(|mut m| {
        m.energy = Some(0.0);
        m
    })
}

/// Σ_B |ψ|² / Σ_A |ψ|², +∞ when A carries no intensity.
pub fn sublattice_ratio(field: &ModeField, geometry: &LatticeGeometry) -> Result<f64> {
    if field.len() != geometry.len() {
        return Err(Error::Dimension(format!("{} amplitudes for {} sites", field.len(), geometry.len())));
    }
    let (mut a, mut b) = (0.0, 0.0);
    for (s, amp) in geometry.sites.iter().zip(field.amplitudes.iter()) {
        match s.sublattice {
            Sublattice::A => a += amp.norm_sqr(),
            Sublattice::B => b += amp.norm_sqr(),
        }
    }
    Ok(if a == 0.0 { f64::INFINITY } else { b / a })
}

/// Intensity at the site nearest `center` over the mean intensity of the
/// supporting-sublattice sites on the ring at distance `ring` (±1 μm).
pub fn center_ring_ratio(field: &ModeField, geometry: &LatticeGeometry, center: [f64; 2], ring: f64, sub: Sublattice) -> Result<f64> {
    let c0 = geometry.nearest_site(center).ok_or_else(|| Error::Parameter("empty geometry".into()))?;
    let ring_sites: Vec<usize> = (0..geometry.len())
        .filter(|&i| geometry.sites[i].sublattice == sub && (dist(geometry.sites[i].pos(), center) - ring).abs() < 1.0)
        .collect();
    if ring_sites.is_empty() {
        return Err(Error::Parameter(format!("no sites on the ring at {ring} μm")));
    }
    let mean = field.weight_on(&ring_sites) / ring_sites.len() as f64;
    Ok(field.amplitudes[c0].norm_sqr() / mean)
}

/// Sites within `margin` of an under-coordinated (boundary) site.
pub fn edge_sites(geometry: &LatticeGeometry, margin: f64) -> Vec<usize> {
    let nn = geometry.coordination();
    let boundary: Vec<[f64; 2]> = (0..geometry.len()).filter(|&i| nn[i] < 3).map(|i| geometry.sites[i].pos()).collect();
    (0..geometry.len())
        .filter(|&i| boundary.iter().any(|&b| dist(b, geometry.sites[i].pos()) <= margin))
        .collect()
}

/// Smallest |E| among eigenstates that are neither in the near-zero window nor
/// edge-bound: a state counts as bulk when at most half its intensity sits
/// within `edge_margin` of the boundary.
pub fn bulk_gap(spec: &Spectrum, geometry: &LatticeGeometry, window: f64, edge_margin: f64) -> f64 {
    let edge = edge_sites(geometry, edge_margin);
    (0..spec.values.len())
        .filter(|&k| spec.values[k].abs() >= window)
        .filter(|&k| edge.iter().map(|&i| spec.vectors[(i, k)].norm_sqr()).sum::<f64>() <= 0.5)
        .map(|k| spec.values[k].abs())
        .fold(f64::INFINITY, f64::min)
}

/// Shifts every site by a uniform sample from the disk of radius `r_d`.
/// The unit-disk samples depend on `seed` only, so sweeps over `r_d` share them.
pub fn apply_disorder(geometry: &LatticeGeometry, r_d: f64, seed: u64) -> Result<LatticeGeometry> {
    if !(r_d >= 0.0) {
        return Err(Error::Parameter(format!("disorder radius {r_d} must be non-negative")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = geometry.clone();
    for s in &mut out.sites {
        let angle = rng.gen_range(0.0..2.0 * PI);
        let radius = r_d * rng.gen::<f64>().sqrt();
        s.x += radius * angle.cos();
        s.y += radius * angle.sin();
    }
    Ok(out)
}

/// Disorder sweep settings on a displaced (geometry-model) lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderSweep {
    pub radii: Vec<f64>,
    pub seeds: u64,
    pub base_seed: u64,
    pub model: CouplingModel,
    pub search: ZeroModeSearch,
}

impl DisorderSweep {
    pub fn standard() -> Self {
        Self {
            radii: vec![0.0, 0.2, 0.4, 0.6],
            seeds: 20,
            base_seed: 0,
            model: CouplingModel::standard(),
            search: ZeroModeSearch { center: [0.0, 0.0], radius: 40.0, window: 0.15, recenter: true },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisorderPoint {
    pub r_d: f64,
    pub mean_gamma: f64,
    pub min_gamma: f64,
    pub gammas: Vec<f64>,
}

/// Mean zero-mode γ_AB per disorder radius over seeded realizations.
pub fn disorder_sweep(displaced: &LatticeGeometry, sweep: &DisorderSweep) -> Result<Vec<DisorderPoint>> {
    sweep.model.validate()?;
    let seeds: Vec<u64> = (0..sweep.seeds).map(|k| sweep.base_seed + k).collect();
    let mut out = Vec::new();
    for &r_d in &sweep.radii {
        let gammas = crate::experiments::par_map(&seeds, |&seed| -> Result<f64> {
            let g = apply_disorder(displaced, r_d, seed)?;
            let spec = spectrum(&coupling_hamiltonian(&g, &sweep.model))?;
            let mode = near_zero_mode(&spec, &g, &sweep.search)?;
            sublattice_ratio(&mode.field, &g)
        })
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
        let mean = gammas.iter().sum::<f64>() / gammas.len().max(1) as f64;
        let min = gammas.iter().copied().fold(f64::INFINITY, f64::min);
        out.push(DisorderPoint { r_d, mean_gamma: mean, min_gamma: min, gammas });
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
