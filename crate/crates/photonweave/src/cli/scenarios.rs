//! Parameter sets and runners for each subcommand.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::output::{Cell, Plot, Table};
use crate::engine::{event_probability, OccupationPattern, Statistics};
use crate::experiments::{
    circle_dance_engine, circle_dance_probability, circle_dance_subsets, local_minima,
    locking_engine, locking_signal, optimize_walkoff, photon_gram, simulate_counts, three_photon_scan,
    triad_sweep, CircleDanceScenario, CountScenario, Photon, SourceModel, ThreePhotonScenario,
};
use crate::interferometers::{
    beamsplitter, characterize_from_fringes, gauge_fidelity, ghz_probability, quitter, synthesize_fringes, tritter,
};
use crate::lattice::*;
use crate::numerics::{random_unitary, unitarity_residual};
use crate::oracle::equivalence_check;
use crate::states::PolarizationState;
use crate::{Error, Result};

/// What a runner hands back for writing.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub table: Table,
    pub plot: Plot,
    pub summary: Value,
    /// Additional CSV files, by file name.
    pub extra: Vec<(String, Table)>,
    /// Names of failed checks; any entry turns the exit status into 2.
    pub failures: Vec<String>,
}

impl Outcome {
    fn new(table: Table, plot: Plot, summary: Value) -> Self {
        Self { table, plot, summary, extra: Vec::new(), failures: Vec::new() }
    }
}

/// Settings that come from flags or the top level of the config file.
#[derive(Debug, Clone, Default)]
pub struct Context {
    pub seed: Option<u64>,
    pub preset: Option<String>,
}

impl Context {
    fn geometry(&self, default: &str) -> Result<LatticeGeometry> {
        lattice_preset(self.preset.as_deref().unwrap_or(default))
    }
}

fn grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 || !(hi > lo) {
        return Err(Error::Parameter(format!("grid needs points ≥ 2 and max > min, got {points} on [{lo}, {hi}]")));
    }
    Ok((0..points).map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64).collect())
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} must be positive, got {x}")))
    }
}

fn spread(values: &[f64]) -> f64 {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    hi - lo
}

// ---------------------------------------------------------------- photons

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HomParams {
    pub sigma: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    pub points: usize,
}

impl Default for HomParams {
    fn default() -> Self {
        Self { sigma: 1.0, tau_min: -5.0, tau_max: 5.0, points: 201 }
    }
}

pub fn hom(p: &HomParams, _: &Context) -> Result<Outcome> {
    positive("sigma", p.sigma)?;
    let u = beamsplitter().matrix;
    let one = OccupationPattern(vec![1, 1]);
    let h = PolarizationState::horizontal();
    let p11 = |tau: f64, stats: Statistics| -> Result<f64> {
        let g = photon_gram(&[Photon::new(h, 0.0, p.sigma), Photon::new(h, tau, p.sigma)])?;
        event_probability(&u, &g, &one, &one, stats)
    };
    let mut table = Table::new(&["tau", "P11_boson", "P11_fermion", "P11_classical"]);
    for tau in grid(p.tau_min, p.tau_max, p.points)? {
        table.push(vec![
            tau.into(),
            p11(tau, Statistics::Boson)?.into(),
            p11(tau, Statistics::Fermion)?.into(),
            p11(tau, Statistics::Classical)?.into(),
        ]);
    }
    let summary = json!({
        "p11_boson_at_zero": p11(0.0, Statistics::Boson)?,
        "p11_fermion_at_zero": p11(0.0, Statistics::Fermion)?,
        "p11_asymptote": p11(40.0 * p.sigma, Statistics::Boson)?,
    });
    let plot = Plot::from_table("HOM coincidences", &table, "tau", &["P11_boson", "P11_fermion", "P11_classical"]);
    Ok(Outcome::new(table, plot, summary))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TritterScanParams {
    pub sigma: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    pub points: usize,
}

impl Default for TritterScanParams {
    fn default() -> Self {
        Self { sigma: 1.0, tau_min: -8.0, tau_max: 8.0, points: 401 }
    }
}

fn tritter_scan(p: &TritterScanParams, scenario: ThreePhotonScenario, title: &str) -> Result<Outcome> {
    positive("sigma", p.sigma)?;
    let taus = grid(p.tau_min, p.tau_max, p.points)?;
    let scan = three_photon_scan(&scenario, &taus)?;
    let mut table = Table::new(&["tau", "P111"]);
    for s in &scan {
        table.push(vec![s.tau.into(), s.p111.into()]);
    }
    let curve: Vec<f64> = scan.iter().map(|s| s.p111).collect();
    let summary = json!({
        "p111_at_zero": scenario.p111(0.0)?,
        "p111_asymptote": scenario.p111(60.0 * p.sigma)?,
        "interior_minima": local_minima(&curve).len(),
    });
    let plot = Plot::from_table(title, &table, "tau", &["P111"]);
    Ok(Outcome::new(table, plot, summary))
}

pub fn w_shape(p: &TritterScanParams, _: &Context) -> Result<Outcome> {
    tritter_scan(p, ThreePhotonScenario::identical(p.sigma), "Threefold coincidences, identical photons")
}

pub fn mercedes(p: &TritterScanParams, _: &Context) -> Result<Outcome> {
    tritter_scan(p, ThreePhotonScenario::mercedes(p.sigma), "Threefold coincidences, Mercedes polarizations")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TriadParams {
    pub sigma: f64,
    pub points: usize,
}

impl Default for TriadParams {
    fn default() -> Self {
        Self { sigma: 1.0, points: 91 }
    }
}

pub fn triad(p: &TriadParams, _: &Context) -> Result<Outcome> {
    positive("sigma", p.sigma)?;
    let pts = triad_sweep(&grid(0.0, PI / 2.0, p.points)?, p.sigma)?;
    let mut table = Table::new(&["theta", "triad_phase", "P111", "P011", "P101", "P110"]);
    for t in &pts {
        table.push(vec![t.theta.into(), t.phase.into(), t.p111.into(), t.p011.into(), t.p101.into(), t.p110.into()]);
    }
    let twofold: Vec<f64> = pts.iter().flat_map(|t| [t.p011, t.p101, t.p110]).collect();
    let residual = cosine_fit_residual(&pts.iter().map(|t| (t.phase, t.p111)).collect::<Vec<_>>());
    let summary = json!({
        "twofold_spread": spread(&twofold),
        "p111_cosine_fit_residual": residual,
        "p111_min": pts.iter().map(|t| t.p111).fold(f64::INFINITY, f64::min),
        "p111_max": pts.iter().map(|t| t.p111).fold(f64::NEG_INFINITY, f64::max),
    });
    let plot = Plot::from_table("Triad-phase sweep", &table, "theta", &["P111", "P011", "P101", "P110"]);
    Ok(Outcome::new(table, plot, summary))
}

/// Largest residual of the least-squares fit y = a + b cos x.
pub fn cosine_fit_residual(xy: &[(f64, f64)]) -> f64 {
    let n = xy.len() as f64;
    let (sc, sy) = xy.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x.cos(), b + y));
    let (scc, scy) = xy.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x.cos() * x.cos(), b + x.cos() * y));
    let det = n * scc - sc * sc;
    if det.abs() < 1e-300 {
        return f64::NAN;
    }
    let b = (n * scy - sc * sy) / det;
    let a = (sy - b * sc) / n;
    xy.iter().map(|&(x, y)| (y - a - b * x.cos()).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CircleDanceParams {
    pub chi: f64,
    pub sigma_narrow: f64,
    /// Separation of the two narrow modes; null picks the visibility optimum
    /// under `max_overlap`.
    pub separation: Option<f64>,
    pub max_overlap: f64,
    pub points: usize,
}

impl Default for CircleDanceParams {
    fn default() -> Self {
        Self { chi: PI / 2.0, sigma_narrow: 1.0, separation: None, max_overlap: 0.1, points: 73 }
    }
}

pub fn circle_dance(p: &CircleDanceParams, _: &Context) -> Result<Outcome> {
    positive("sigma_narrow", p.sigma_narrow)?;
    let base = match p.separation {
        Some(sep) => CircleDanceScenario::symmetric(0.0, p.chi, p.sigma_narrow, sep),
        None => optimize_walkoff(p.sigma_narrow, p.chi, p.max_overlap, true)?.0,
    };
    let thetas = grid(0.0, 2.0 * PI, p.points)?;
    let four = OccupationPattern(vec![1; 4]);
    let mut table = Table::new(&["theta", "P1111_engine", "P1111_formula"]);
    for &theta in &thetas {
        let sc = base.with_theta(theta);
        table.push(vec![theta.into(), circle_dance_engine(&sc, &four)?.into(), circle_dance_probability(&sc)?.into()]);
    }
    // Every proper subset of photons must see a θ-independent distribution.
    let reference = circle_dance_subsets(&base)?;
    let mut lower_order = 0.0f64;
    for &theta in thetas.iter().step_by(6) {
        for ((_, a), (_, b)) in reference.iter().zip(circle_dance_subsets(&base.with_theta(theta))?) {
            for ((_, x), (_, y)) in a.iter().zip(&b) {
                lower_order = lower_order.max((x - y).abs());
            }
        }
    }
    let engine = table.column("P1111_engine");
    let hi = engine.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (physical, best) = optimize_walkoff(p.sigma_narrow, p.chi, p.max_overlap, false)?;
    let summary = json!({
        "separation": base.t3 - base.t2,
        "narrow_overlap": base.narrow_overlap()?,
        "fringe_visibility": (hi - engine.iter().copied().fold(f64::INFINITY, f64::min)) / hi,
        "lower_order_max_deviation": lower_order,
        "constrained_max_visibility": best,
        "constrained_optimum_separation": physical.t3 - physical.t2,
    });
    let plot = Plot::from_table("Circle-dance fourfold fringe", &table, "theta", &["P1111_engine", "P1111_formula"]);
    Ok(Outcome::new(table, plot, summary))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LockingParams {
    pub r: f64,
    pub points: usize,
}

impl Default for LockingParams {
    fn default() -> Self {
        Self { r: 1.0, points: 73 }
    }
}

pub fn locking(p: &LockingParams, _: &Context) -> Result<Outcome> {
    let mut table = Table::new(&["chi", "P_formula", "P_engine"]);
    let mut worst = 0.0f64;
    for chi in grid(0.0, 2.0 * PI, p.points)? {
        let (f, e) = (locking_signal(chi, p.r)?, locking_engine(chi, p.r)?);
        worst = worst.max((f - e).abs());
        table.push(vec![chi.into(), f.into(), e.into()]);
    }
    let plot = Plot::from_table("Phase-locking twofold signal", &table, "chi", &["P_formula", "P_engine"]);
    Ok(Outcome::new(table, plot, json!({ "max_deviation": worst })))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GhzParams {
    pub n: usize,
    pub points: usize,
}

impl Default for GhzParams {
    fn default() -> Self {
        Self { n: 4, points: 73 }
    }
}

pub fn ghz(p: &GhzParams, _: &Context) -> Result<Outcome> {
    let phases = grid(0.0, 2.0 * PI, p.points)?;
    let rows: Vec<Vec<f64>> = phases
        .iter()
        .map(|&phase| (0..=p.n).map(|j| ghz_probability(p.n, j, p.n - j, phase, true)).collect())
        .collect::<Result<_>>()?;
    let mut columns = vec!["phase".to_string()];
    columns.extend((0..=p.n).map(|j| format!("P_A{j}_B{}", p.n - j)));
    let mut table = Table::with_columns(columns.clone());
    for (phase, probs) in phases.iter().zip(&rows) {
        let mut row = vec![Cell::from(*phase)];
        row.extend(probs.iter().map(|&x| Cell::from(x)));
        table.push(row);
    }
    let total: Vec<f64> = rows.iter().map(|r| r.iter().sum()).collect();
    let ys: Vec<&str> = columns[1..].iter().map(String::as_str).collect();
    let plot = Plot::from_table("GHZ n-fold events", &table, "phase", &ys);
    Ok(Outcome::new(table, plot, json!({ "nfold_total_min": total.iter().copied().fold(f64::INFINITY, f64::min) })))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseParams {
    pub source: SourceModel,
    pub scenarios: Vec<String>,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            source: SourceModel::default(),
            scenarios: ["hom", "mercedes-pair", "suppressed-210", "triad-dip"].map(String::from).to_vec(),
        }
    }
}

pub fn count_scenario(name: &str) -> Result<CountScenario> {
    match name {
        "hom" => Ok(CountScenario::hom()),
        "mercedes-pair" => Ok(CountScenario::mercedes_pair()),
        "suppressed-210" => Ok(CountScenario::suppressed_210()),
        "triad-dip" => CountScenario::triad_dip(),
        other => Err(Error::Parameter(format!(
            "unknown count scenario '{other}' (expected hom, mercedes-pair, suppressed-210, triad-dip)"
        ))),
    }
}

pub fn noise_model(p: &NoiseParams, _: &Context) -> Result<Outcome> {
    p.source.validate()?;
    let scenarios: Vec<CountScenario> = p.scenarios.iter().map(|s| count_scenario(s)).collect::<Result<_>>()?;
    let mut table = Table::new(&[
        "scenario",
        "rate",
        "reference_rate",
        "conditional_rate",
        "conditional_reference_rate",
        "visibility",
    ]);
    let mut summary = serde_json::Map::new();
    let mut pts = Vec::new();
    for (k, sc) in scenarios.iter().enumerate() {
        let s = simulate_counts(&p.source, sc)?;
        summary.insert(format!("visibility_{}", sc.label), json!(s.visibility));
        pts.push([k as f64, 100.0 * s.visibility]);
        table.push(vec![
            sc.label.as_str().into(),
            s.rate.into(),
            s.reference_rate.into(),
            s.conditional_rate.into(),
            s.conditional_reference_rate.into(),
            s.visibility.into(),
        ]);
    }
    let plot = Plot::lines("Model visibilities (%)", "scenario index", "visibility", vec![("visibility".into(), pts)]);
    Ok(Outcome::new(table, plot, Value::Object(summary)))
}

// ---------------------------------------------------------------- lattice

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatticeModel {
    /// Kekulé modulation written into the hoppings.
    Direct,
    /// Displaced waveguides with the exponential coupling law.
    Geometry,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumParams {
    pub model: LatticeModel,
    /// Null gives the undistorted lattice.
    pub vortex: Option<VortexField>,
    pub t: f64,
    pub xi_eff: f64,
    pub coupling: CouplingModel,
    pub bins: usize,
}

impl Default for SpectrumParams {
    fn default() -> Self {
        Self {
            model: LatticeModel::Direct,
            vortex: Some(VortexField::standard()),
            t: 1.0,
            xi_eff: DEFAULT_XI_EFF,
            coupling: CouplingModel::standard(),
            bins: 61,
        }
    }
}

pub fn lattice_spectrum(p: &SpectrumParams, ctx: &Context) -> Result<Outcome> {
    let g = ctx.geometry("vortex-1267")?;
    let field = p.vortex.unwrap_or(VortexField { delta0: 0.0, ..VortexField::standard() });
    field.validate()?;
    let (h, geom) = match p.model {
        LatticeModel::Direct => (vortex_hamiltonian(&g, &field, p.t).to_dense(), g),
        LatticeModel::Geometry => {
            p.coupling.validate()?;
            let d = kekule_displace(&g, &field, p.xi_eff).geometry;
            (coupling_hamiltonian(&d, &p.coupling), d)
        }
    };
    let spec = spectrum(&h)?;
    let n = spec.values.len();
    let mut table = Table::new(&["index", "energy"]);
    for (k, e) in spec.values.iter().enumerate() {
        table.push(vec![k.into(), (*e).into()]);
    }
    let dos = density_of_states(&spec.values, p.bins)?;
    let mut dos_table = Table::new(&["energy", "count"]);
    for (c, &k) in dos.centers().iter().zip(&dos.counts) {
        dos_table.push(vec![(*c).into(), k.into()]);
    }
    let asym = (0..n).map(|k| (spec.values[k] + spec.values[n - 1 - k]).abs()).fold(0.0, f64::max);
    let summary = json!({
        "sites": n,
        "chiral_asymmetry": asym,
        "min_abs_energy": spec.values.iter().map(|e| e.abs()).fold(f64::INFINITY, f64::min),
        "bulk_gap": bulk_gap(&spec, &geom, 0.05, 20.0),
    });
    let plot = Plot::from_table("Density of states", &dos_table, "energy", &["count"]);
    let mut out = Outcome::new(table, plot, summary);
    out.extra.push(("dos.csv".into(), dos_table));
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZeroModeParams {
    pub vortex: VortexField,
    pub t: f64,
    pub radius: f64,
    pub window: f64,
    pub edge_margin: f64,
    pub ring: f64,
}

impl Default for ZeroModeParams {
    fn default() -> Self {
        Self { vortex: VortexField::standard(), t: 1.0, radius: 40.0, window: 0.05, edge_margin: 20.0, ring: 30.0 }
    }
}

pub fn zero_mode(p: &ZeroModeParams, ctx: &Context) -> Result<Outcome> {
    let g = ctx.geometry("thesis-1192")?;
    p.vortex.validate()?;
    let spec = spectrum(&vortex_hamiltonian(&g, &p.vortex, p.t).to_dense())?;
    let mode = near_zero_mode(&spec, &g, &ZeroModeSearch::new(p.vortex.center, p.radius, p.window))?;
    let analytic = analytic_zero_mode(&g, &p.vortex).ok();
    let sub = if p.vortex.winding < 0 { Sublattice::A } else { Sublattice::B };
    let gap = bulk_gap(&spec, &g, p.window, p.edge_margin);
    let energy = mode.field.energy.unwrap_or(f64::NAN);
    let mut table = Table::new(&["site", "x", "y", "sublattice", "amplitude_re", "amplitude_im", "intensity", "analytic_intensity"]);
    let ai = analytic.as_ref().map(ModeField::intensities);
    for (k, s) in g.sites.iter().enumerate() {
        let a = mode.field.amplitudes[k];
        table.push(vec![
            k.into(),
            s.x.into(),
            s.y.into(),
            if s.sublattice == Sublattice::A { "A" } else { "B" }.into(),
            a.re.into(),
            a.im.into(),
            a.norm_sqr().into(),
            ai.as_ref().map_or(f64::NAN, |v| v[k]).into(),
        ]);
    }
    let mut eig = Table::new(&["index", "energy"]);
    for (k, e) in spec.values.iter().enumerate() {
        eig.push(vec![k.into(), (*e).into()]);
    }
    let summary = json!({
        "sites": g.len(),
        "energy": energy,
        "bulk_gap": gap,
        "energy_over_gap": energy.abs() / gap,
        "gamma_ab": sublattice_ratio(&mode.field, &g)?,
        "analytic_overlap": analytic.as_ref().map(|a| mode.field.fidelity(a)),
        "center_ring_ratio": center_ring_ratio(&mode.field, &g, p.vortex.center, p.ring, sub)?,
        "localized_count": mode.localized_count(),
        "region_weight": mode.region_weight,
        "subspace_dim": mode.subspace_dim,
    });
    let plot = Plot::Heat {
        title: format!("Zero-mode intensity, E = {energy:.2e}"),
        points: g.sites.iter().zip(mode.field.intensities()).map(|(s, v)| (s.pos(), v)).collect(),
    };
    let mut out = Outcome::new(table, plot, summary);
    out.extra.push(("eigenvalues.csv".into(), eig));
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TranslateParams {
    pub translation: TranslationConfig,
    /// Propagation lengths (mm) to compare.
    pub lengths: Vec<f64>,
}

impl Default for TranslateParams {
    fn default() -> Self {
        Self { translation: TranslationConfig::standard(), lengths: vec![40.0, 20.0, 10.0] }
    }
}

pub fn translate(p: &TranslateParams, ctx: &Context) -> Result<Outcome> {
    let g = ctx.geometry("translate-940")?;
    let mut table = Table::new(&["length_mm", "steps", "fidelity", "change", "converged"]);
    let mut summary = serde_json::Map::new();
    for &length in &p.lengths {
        positive("length", length)?;
        let cfg = TranslationConfig { length, ..p.translation };
        let r = translate_vortex(&g, &cfg)?;
        summary.insert(format!("fidelity_{}", super::output::format_sig(length)), json!(r.fidelity));
        table.push(vec![length.into(), cfg.steps.into(), r.fidelity.into(), r.change.into(), r.converged.into()]);
    }
    let pts = p.lengths.iter().zip(table.column("fidelity")).map(|(&l, f)| [l, f]).collect();
    let plot = Plot::lines("Transport fidelity", "length (mm)", "fidelity", vec![("fidelity".into(), pts)]);
    Ok(Outcome::new(table, plot, Value::Object(summary)))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisorderParams {
    pub vortex: VortexField,
    pub xi_eff: f64,
    pub sweep: DisorderSweep,
}

impl Default for DisorderParams {
    fn default() -> Self {
        Self { vortex: VortexField::standard(), xi_eff: DEFAULT_XI_EFF, sweep: DisorderSweep::standard() }
    }
}

pub fn disorder(p: &DisorderParams, ctx: &Context) -> Result<Outcome> {
    let g = ctx.geometry("disorder-700")?;
    let displaced = kekule_displace(&g, &p.vortex, p.xi_eff);
    let mut sweep = p.sweep.clone();
    if let Some(seed) = ctx.seed {
        sweep.base_seed = seed;
    }
    let pts = disorder_sweep(&displaced.geometry, &sweep)?;
    let mut table = Table::new(&["r_d", "mean_gamma", "min_gamma", "seeds"]);
    for d in &pts {
        table.push(vec![d.r_d.into(), d.mean_gamma.into(), d.min_gamma.into(), d.gammas.len().into()]);
    }
    let means: Vec<f64> = pts.iter().map(|d| d.mean_gamma).collect();
    let summary = json!({
        "max_displacement": displaced.max_displacement,
        "displacement_warning": displaced.warning,
        "mean_gamma": means,
        "non_increasing": means.windows(2).all(|w| w[1] <= w[0]),
    });
    let plot = Plot::from_table("Zero-mode sublattice ratio under disorder", &table, "r_d", &["mean_gamma", "min_gamma"]);
    Ok(Outcome::new(table, plot, summary))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BraidParams {
    /// The `swap` flag is ignored: both cases run when `control` is set.
    pub braid: BraidConfig,
    pub control: bool,
}

impl Default for BraidParams {
    fn default() -> Self {
        Self { braid: BraidConfig::standard(true), control: true }
    }
}

pub fn braid_run(p: &BraidParams, ctx: &Context) -> Result<Outcome> {
    let g = ctx.geometry("thesis-1192")?;
    let mut cases = vec![("exchange", true)];
    if p.control {
        cases.push(("control", false));
    }
    let mut table = Table::new(&["case", "mode", "phase", "fidelity", "change", "converged"]);
    let mut summary = serde_json::Map::new();
    for (name, swap) in cases {
        let r = braid(&g, &BraidConfig { swap, ..p.braid })?;
        for k in 0..2 {
            table.push(vec![
                name.into(),
                k.into(),
                r.phases[k].into(),
                r.fidelities[k].into(),
                r.change.into(),
                r.converged.into(),
            ]);
        }
        summary.insert(format!("{name}_phases"), json!(r.phases));
    }
    let pts = table.column("phase").into_iter().enumerate().map(|(k, v)| [k as f64, v]).collect();
    let plot = Plot::lines("Braid phases (rows of results.csv)", "row", "phase (rad)", vec![("phase".into(), pts)]);
    Ok(Outcome::new(table, plot, Value::Object(summary)))
}

// ---------------------------------------------------------------- topology

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainWallParams {
    pub cells: usize,
    pub wall: usize,
    pub m0: f64,
    pub radius: f64,
    pub window: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindingParams {
    pub t_l: f64,
    pub t_r_min: f64,
    pub t_r_max: f64,
    pub points: usize,
    pub samples: usize,
    pub domain_wall: DomainWallParams,
}

impl Default for DomainWallParams {
    fn default() -> Self {
        Self { cells: 100, wall: 50, m0: 0.2, radius: 30.0, window: 0.05 }
    }
}

impl Default for WindingParams {
    fn default() -> Self {
        Self { t_l: 1.0, t_r_min: 0.0, t_r_max: 2.0, points: 41, samples: 256, domain_wall: DomainWallParams::default() }
    }
}

pub fn winding(p: &WindingParams, _: &Context) -> Result<Outcome> {
    let mut table = Table::new(&["t_r", "winding"]);
    for t_r in grid(p.t_r_min, p.t_r_max, p.points)? {
        let w = match winding_number(&ssh_loop(p.t_l, t_r, p.samples)) {
            Ok(w) => w as f64,
            Err(Error::GapClosed(_)) => f64::NAN,
            Err(e) => return Err(e),
        };
        table.push(vec![t_r.into(), w.into()]);
    }
    let dw = &p.domain_wall;
    if dw.wall == 0 || dw.wall >= dw.cells {
        return Err(Error::Parameter("domain wall must sit inside the chain".into()));
    }
    let t_r = domain_wall_hoppings(dw.cells, dw.wall, p.t_l, dw.m0);
    let spec = spectrum(&ssh_chain_hamiltonian(&t_r, p.t_l).to_dense())?;
    let chain = ssh_chain(2 * dw.cells, 1.0)?;
    let mode = near_zero_mode(&spec, &chain, &ZeroModeSearch::new([chain.sites[2 * dw.wall].x, 0.0], dw.radius, dw.window))?;
    let grid_x: Vec<f64> = (0..dw.cells).map(|n| n as f64).collect();
    let mass: Vec<f64> = t_r.iter().map(|t| t - p.t_l).collect();
    let jr = ModeField::from_real(&jackiw_rebbi_mode(&mass, p.t_l, &grid_x)?.chain_amplitudes())?;
    let summary = json!({
        "domain_wall_sites": 2 * dw.cells,
        "domain_wall_energy": mode.field.energy,
        "domain_wall_localized_modes": mode.localized_count(),
        "jackiw_rebbi_overlap": mode.field.fidelity(&jr),
    });
    let plot = Plot::from_table("SSH winding number", &table, "t_r", &["winding"]);
    Ok(Outcome::new(table, plot, summary))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChernParams {
    pub m_min: f64,
    pub m_max: f64,
    pub points: usize,
    pub grid: usize,
    pub band: usize,
}

impl Default for ChernParams {
    fn default() -> Self {
        Self { m_min: -3.0, m_max: 3.0, points: 25, grid: 24, band: 0 }
    }
}

pub fn chern(p: &ChernParams, _: &Context) -> Result<Outcome> {
    let mut table = Table::new(&["m", "chern"]);
    for m in grid(p.m_min, p.m_max, p.points)? {
        let c = match chern_number(|kx, ky| two_band_bloch(kx, ky, m), p.grid, p.band) {
            Ok(c) => c as f64,
            Err(Error::GapClosed(_)) => f64::NAN,
            Err(e) => return Err(e),
        };
        table.push(vec![m.into(), c.into()]);
    }
    let plot = Plot::from_table("Two-band Chern number", &table, "m", &["chern"]);
    Ok(Outcome::new(table, plot, json!({})))
}

// ---------------------------------------------------------------- characterization

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CharacterizeParams {
    pub modes: usize,
    pub trials: usize,
    /// Relative intensity noise levels.
    pub noise: Vec<f64>,
    pub samples: usize,
    pub intensity: f64,
}

impl Default for CharacterizeParams {
    fn default() -> Self {
        Self { modes: 4, trials: 20, noise: vec![0.0, 0.01], samples: 16, intensity: 1.0 }
    }
}

pub fn characterize(p: &CharacterizeParams, ctx: &Context) -> Result<Outcome> {
    if p.modes < 2 {
        return Err(Error::Parameter("characterization needs at least 2 modes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed.unwrap_or(0));
    let mut table = Table::new(&["trial", "noise", "fidelity"]);
    let mut worst = vec![1.0f64; p.noise.len()];
    for trial in 0..p.trials {
        let u = random_unitary(p.modes, &mut rng);
        for (k, &noise) in p.noise.iter().enumerate() {
            let data = synthesize_fringes(&u, p.samples, p.intensity, noise, &mut rng);
            let rec = characterize_from_fringes(&data)?;
            let f = gauge_fidelity(&u, &rec.matrix)?.fidelity;
            worst[k] = worst[k].min(f);
            table.push(vec![trial.into(), noise.into(), f.into()]);
        }
    }
    let series = p
        .noise
        .iter()
        .map(|&noise| {
            let pts = table.rows.iter().filter(|r| r[1] == Cell::Num(noise)).map(|r| match (&r[0], &r[2]) {
                (Cell::Int(t), Cell::Num(f)) => [*t as f64, *f],
                _ => [f64::NAN, f64::NAN],
            });
            (format!("noise {noise}"), pts.collect())
        })
        .collect();
    let plot = Plot::lines("Reconstruction fidelity", "trial", "fidelity", series);
    Ok(Outcome::new(table, plot, json!({ "noise": p.noise, "min_fidelity": worst })))
}

// ---------------------------------------------------------------- validate

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateParams {
    pub oracle_configurations: usize,
    pub random_cases: usize,
}

impl Default for ValidateParams {
    fn default() -> Self {
        Self { oracle_configurations: 200, random_cases: 20 }
    }
}

pub fn validate(p: &ValidateParams, ctx: &Context) -> Result<Outcome> {
    let seed = ctx.seed.unwrap_or(0);
    let mut checks: Vec<(&str, f64, f64)> = Vec::new();

    let report = equivalence_check(p.oracle_configurations, seed)?;
    checks.push(("oracle_equivalence", report.max_error, 1e-9));

    let hom = hom(&HomParams { points: 3, ..Default::default() }, ctx)?;
    checks.push(("hom_zero_boson", hom.summary["p11_boson_at_zero"].as_f64().unwrap_or(f64::NAN).abs(), 1e-15));
    checks.push(("hom_zero_fermion", (hom.summary["p11_fermion_at_zero"].as_f64().unwrap_or(f64::NAN) - 1.0).abs(), 1e-15));

    let builders = [beamsplitter(), tritter(), quitter(PI / 2.0), quitter(0.7)];
    checks.push(("builder_unitarity", builders.iter().map(|b| unitarity_residual(&b.matrix)).fold(0.0, f64::max), 1e-12));

    let w = ThreePhotonScenario::identical(1.0);
    checks.push(("w_shape_center", (w.p111(0.0)? - 1.0 / 3.0).abs(), 1e-12));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lock = 0.0f64;
    for _ in 0..p.random_cases {
        let (r, chi) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..2.0 * PI));
        lock = lock.max((locking_engine(chi, r)? - locking_signal(chi, r)?).abs());
    }
    checks.push(("locking_formula", lock, 1e-10));

    let triad = triad(&TriadParams { points: 19, ..Default::default() }, ctx)?;
    checks.push(("triad_twofold_flatness", triad.summary["twofold_spread"].as_f64().unwrap_or(f64::NAN), 1e-12));

    let g = lattice_preset("small-432")?;
    let h = vortex_hamiltonian(&g, &VortexField { delta0: 0.0, ..VortexField::standard() }, 1.0);
    let spec = spectrum(&h.to_dense())?;
    let n = spec.values.len();
    let chiral = (0..n).map(|k| (spec.values[k] + spec.values[n - 1 - k]).abs()).fold(0.0, f64::max);
    checks.push(("lattice_chiral_symmetry", chiral, 1e-9));
    let mut e = crate::numerics::CVector::zeros(n);
    e[n / 2] = crate::numerics::c(1.0, 0.0);
    checks.push(("propagation_norm", (sparse_evolve(&h, 30.0, &e).norm() - 1.0).abs(), 1e-9));

    let w1 = winding_number(&ssh_loop(1.0, 0.5, 256))?;
    let w0 = winding_number(&ssh_loop(0.5, 1.0, 256))?;
    checks.push(("ssh_winding", ((w1 - 1).abs() + w0.abs()) as f64, 0.0));
    let c1 = chern_number(|kx, ky| two_band_bloch(kx, ky, 1.0), 24, 0)?;
    checks.push(("chern_number", (c1.abs() - 1).abs() as f64, 0.0));

    let mut table = Table::new(&["check", "value", "tolerance", "passed"]);
    let mut failures = Vec::new();
    for &(name, value, tol) in &checks {
        let ok = value <= tol;
        if !ok {
            failures.push(name.to_string());
        }
        table.push(vec![name.into(), value.into(), tol.into(), ok.into()]);
    }
    let pts = checks.iter().enumerate().map(|(k, c)| [k as f64, (c.1.max(1e-300)).log10()]).collect();
    let plot = Plot::lines("Validation residuals (log10)", "check", "log10 value", vec![("value".into(), pts)]);
    let mut out = Outcome::new(table, plot, json!({ "oracle": report, "checks": checks.len(), "failed": failures }));
    out.failures = failures;
    Ok(out)
}
