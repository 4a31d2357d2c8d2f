use super::*;
use crate::numerics::{c, CMatrix, CVector};
use approx::assert_relative_eq;
use proptest::prelude::*;
use std::f64::consts::PI;

fn small() -> LatticeGeometry {
    lattice_preset("small-432").unwrap()
}

fn basis(n: usize, k: usize) -> CVector {
    let mut e = CVector::zeros(n);
    e[k] = c(1.0, 0.0);
    e
}

#[test]
fn interior_sites_have_three_neighbours_at_a0() {
    let g = small();
    let nn = g.coordination();
    assert!(nn.iter().all(|&k| (2..=3).contains(&k)));
    let center = g.nearest_site([0.0, 0.0]).unwrap();
    assert_eq!(nn[center], 3);
    for b in g.honeycomb_bonds() {
        assert_relative_eq!(dist(g.sites[b.a].pos(), g.sites[b.b].pos()), DEFAULT_A0, epsilon = 1e-9);
        assert_eq!(g.sites[b.a].sublattice, Sublattice::A);
        assert_eq!(g.sites[b.b].sublattice, Sublattice::B);
    }
}

#[test]
fn presets_have_their_site_counts() {
    for (name, _, n) in LATTICE_PRESETS {
        let g = lattice_preset(name).unwrap();
        assert_eq!(g.len(), n, "{name}");
        let imbalance = g.count(Sublattice::A).abs_diff(g.count(Sublattice::B));
        assert!(imbalance <= 4, "{name}: sublattice imbalance {imbalance}");
    }
    assert!(lattice_preset("nope").is_err());
}

#[test]
fn geometry_json_round_trips_and_validates() {
    let g = small();
    let back = LatticeGeometry::from_json(&g.to_json().unwrap()).unwrap();
    assert_eq!(back, g);
    let mut bad = g.clone();
    bad.sites[1].x = bad.sites[0].x + 0.1;
    bad.sites[1].y = bad.sites[0].y;
    assert!(bad.validate().is_err());
    assert!(LatticeGeometry::from_json(&bad.to_json().unwrap()).is_err());
    assert!(LatticeGeometry::from_json(r#"{"sites":[],"a0":10,"bounds":[1,1],"extra":1}"#).is_err());
}

#[test]
fn grid_pair_search_matches_brute_force() {
    let g = small();
    let pts = g.positions();
    let mut fast: Vec<(usize, usize)> = pairs_within(&pts, 18.0).into_iter().map(|(i, j, _)| (i.min(j), i.max(j))).collect();
    let mut slow = Vec::new();
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            if dist(pts[i], pts[j]) <= 18.0 {
                slow.push((i, j));
            }
        }
    }
    fast.sort();
    assert_eq!(fast, slow);
}

#[test]
fn vortex_profile() {
    let f = VortexField::standard();
    assert_relative_eq!(vortex_delta([0.0, 0.0], &f).norm(), 0.0);
    assert_relative_eq!(vortex_delta([500.0, 0.0], &f).norm(), 0.5, epsilon = 1e-9);
    // Phase winds once around the core.
    let n = 64;
    let total: f64 = (0..n)
        .map(|k| {
            let a = |k: usize| {
                let t = 2.0 * PI * k as f64 / n as f64;
                vortex_delta([30.0 * t.cos(), 30.0 * t.sin()], &f)
            };
            (a(k + 1) / a(k)).arg()
        })
        .sum();
    assert_relative_eq!(total / (2.0 * PI), 1.0, epsilon = 1e-9);
    let two = multi_vortex_delta([0.0, 50.0], 0.5, 20.0, 0.0, &[([-50.0, 0.0], 1), ([50.0, 0.0], -1)]);
    // π/4 from the vortex, −3π/4 from the antivortex.
    assert_relative_eq!(two.arg(), -PI / 2.0, epsilon = 1e-9);
}

#[test]
fn kekule_displacement() {
    let g = small();
    let none = kekule_displace(&g, &VortexField { delta0: 0.0, ..VortexField::standard() }, DEFAULT_XI_EFF);
    assert_eq!(none.geometry, g);
    assert_eq!(none.max_displacement, 0.0);
    let d = kekule_displace(&lattice_preset("disorder-700").unwrap(), &VortexField::standard(), DEFAULT_XI_EFF);
    assert!(d.max_displacement > 0.7 && d.max_displacement < 0.81, "{}", d.max_displacement);
    assert!(!d.warning);
    // A uniform field repeats every three unit cells (G = 2K).
    let uniform = VortexField { l0: 1e-9, winding: 0, center: [1e6, 1e6], ..VortexField::standard() };
    let a1 = [3f64.sqrt() * DEFAULT_A0, 0.0];
    let pair = |p: [f64; 2]| LatticeGeometry {
        sites: vec![
            Site { x: p[0], y: p[1], sublattice: Sublattice::A },
            Site { x: p[0] + 3.0 * a1[0], y: p[1] + 3.0 * a1[1], sublattice: Sublattice::A },
        ],
        a0: DEFAULT_A0,
        bounds: [1e3, 1e3],
    };
    let moved = kekule_displace(&pair([0.0, -DEFAULT_A0]), &uniform, 0.8).geometry;
    assert_relative_eq!(moved.sites[0].x, moved.sites[1].x - 3.0 * a1[0], epsilon = 1e-9);
    assert_relative_eq!(moved.sites[0].y + DEFAULT_A0, moved.sites[1].y - 3.0 * a1[1] + DEFAULT_A0, epsilon = 1e-9);
}

#[test]
fn coupling_law() {
    let m = CouplingModel::standard();
    assert_relative_eq!(m.coupling(DEFAULT_A0), 1.0, epsilon = 1e-12);
    assert_relative_eq!(m.coupling(DEFAULT_A0 + 2f64.ln() / DEFAULT_GAMMA), 0.5, epsilon = 1e-12);
    assert_eq!(m.coupling(m.cutoff + 0.1), 0.0);
    assert!(m.nnn_ratio(DEFAULT_A0) < 0.05);
    assert_relative_eq!(m.beat_length(DEFAULT_A0), 2.0 * PI, epsilon = 1e-12);
    let h = coupling_hamiltonian(&small(), &m);
    assert!(crate::numerics::hermitian_deviation(&h) < 1e-12);
    assert_eq!(sparse_coupling_hamiltonian(&small(), &m).to_dense(), h);
    assert!(CouplingModel { gamma: -1.0, ..m }.validate().is_err());
}

#[test]
fn undistorted_spectrum_is_chiral() {
    let g = small();
    let h = kekule_hamiltonian(&g, &g.honeycomb_bonds(), 1.0, |_| c(0.0, 0.0)).to_dense();
    let spec = spectrum(&h).unwrap();
    let n = spec.values.len();
    for k in 0..n {
        assert_relative_eq!(spec.values[k], -spec.values[n - 1 - k], epsilon = 1e-9);
    }
    let dos = density_of_states(&spec.values, 31).unwrap();
    let mid = dos.counts[15];
    let peak = *dos.counts.iter().max().unwrap();
    assert!(mid * 3 < peak, "dos at zero {mid} vs peak {peak}");
    assert_eq!(dos.counts.iter().sum::<usize>(), n);
    assert!(dos.centers()[15].abs() < 1e-9);
}

#[test]
fn spectrum_rejects_non_hermitian_and_reconstructs() {
    let bad = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(2.0, 0.0), c(0.0, 0.0)]);
    assert!(spectrum(&bad).is_err());
    let h = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, -0.5), c(0.0, 0.5), c(-1.0, 0.0)]);
    let s = spectrum(&h).unwrap();
    let d = CMatrix::from_diagonal(&CVector::from_iterator(2, s.values.iter().map(|&v| c(v, 0.0))));
    let back = &s.vectors * d * s.vectors.adjoint();
    assert!((back - h).norm() < 1e-12);
}

fn jackiw_rossi(g: &LatticeGeometry, field: &VortexField) -> (Spectrum, ZeroMode) {
    let spec = spectrum(&vortex_hamiltonian(g, field, 1.0).to_dense()).unwrap();
    let mode = near_zero_mode(&spec, g, &ZeroModeSearch::new(field.center, 40.0, 0.05)).unwrap();
    (spec, mode)
}

#[test]
fn vortex_binds_one_zero_mode_on_b() {
    let g = small();
    let field = VortexField::standard();
    let (spec, mode) = jackiw_rossi(&g, &field);
    assert_eq!(mode.localized_count(), 1);
    assert!(mode.field.energy.unwrap().abs() < 1e-3);
    assert!(sublattice_ratio(&mode.field, &g).unwrap() > 100.0);
    let analytic = analytic_zero_mode(&g, &field).unwrap();
    assert!(mode.field.fidelity(&analytic) > 0.95, "{}", mode.field.fidelity(&analytic));
    assert!(bulk_gap(&spec, &g, 0.05, 20.0) > 0.2);
    let ratio = center_ring_ratio(&mode.field, &g, [0.0, 0.0], 30.0, Sublattice::B).unwrap();
    assert!(ratio > 2.0 && ratio < 4.5, "{ratio}");
}

#[test]
fn antivortex_mode_moves_to_a() {
    let g = small();
    let field = VortexField { winding: -1, ..VortexField::standard() };
    let (_, mode) = jackiw_rossi(&g, &field);
    assert!(sublattice_ratio(&mode.field, &g).unwrap() < 0.01);
    let analytic = analytic_zero_mode(&g, &field).unwrap();
    assert_eq!(sublattice_ratio(&analytic, &g).unwrap(), 0.0);
    assert!(mode.field.fidelity(&analytic) > 0.95);
    assert!(analytic_zero_mode(&g, &VortexField { winding: 2, ..field }).is_err());
}

#[test]
fn sublattice_ratio_edge_cases() {
    let g = small();
    let analytic = analytic_zero_mode(&g, &VortexField::standard()).unwrap();
    assert_eq!(sublattice_ratio(&analytic, &g).unwrap(), f64::INFINITY);
    let flat = ModeField::from_real(&vec![1.0; g.len()]).unwrap();
    let expect = g.count(Sublattice::B) as f64 / g.count(Sublattice::A) as f64;
    assert_relative_eq!(sublattice_ratio(&flat, &g).unwrap(), expect, epsilon = 1e-12);
    assert!(sublattice_ratio(&ModeField::from_real(&[1.0]).unwrap(), &g).is_err());
}

#[test]
fn two_waveguides_exchange_power() {
    let g = LatticeGeometry {
        sites: vec![Site { x: 0.0, y: 0.0, sublattice: Sublattice::A }, Site { x: 10.0, y: 0.0, sublattice: Sublattice::B }],
        a0: DEFAULT_A0,
        bounds: [20.0, 20.0],
    };
    let m = CouplingModel::standard();
    let h = coupling_hamiltonian(&g, &m);
    let input = ModeField::from_real(&[1.0, 0.0]).unwrap();
    for z in [0.3, 1.0, PI / 2.0, 2.7] {
        let out = propagate(&h, z, &input).unwrap();
        assert_relative_eq!(out.intensities()[0], z.cos().powi(2), epsilon = 1e-9);
        let sparse = sparse_evolve(&SparseHamiltonian::from_dense(&h), z, &input.amplitudes);
        assert!((sparse - &out.amplitudes).norm() < 1e-10);
    }
}

#[test]
fn sparse_and_dense_propagation_agree() {
    let g = small();
    let h = vortex_hamiltonian(&g, &VortexField::standard(), 1.0);
    let v = basis(g.len(), 7);
    let dense = propagate(&h.to_dense(), 12.5, &ModeField::new(v.clone(), None).unwrap()).unwrap();
    let sparse = sparse_evolve(&h, 12.5, &v);
    assert!((sparse.norm() - 1.0).abs() < 1e-9);
    assert!((sparse - dense.amplitudes).norm() < 1e-8);
}

#[test]
fn static_path_and_unitarity() {
    let g = graphene_box(60.0, 60.0, DEFAULT_A0).unwrap();
    let h = vortex_hamiltonian(&g, &VortexField::standard(), 1.0);
    let path = StaticPath(h.clone());
    let v = basis(g.len(), 3);
    let stepped = step_evolution(&path, 5.0, 7, &[v.clone()]);
    assert!((&stepped[0] - sparse_evolve(&h, 5.0, &v)).norm() < 1e-9);
    let f1 = VortexField::standard().at([-10.0, 0.0]);
    let moving = VortexPath::new(g.clone(), &f1, 1.0, vec![1], vec![vec![[-10.0, 0.0]], vec![[10.0, 0.0]]]).unwrap();
    let u = evolution_operator(&moving, 4.0, 8).unwrap();
    let id = CMatrix::identity(g.len(), g.len());
    assert!((u.adjoint() * &u - id).norm() < 1e-8);
    assert!(evolution_operator(&moving, 4.0, 0).is_err());
    assert!(VortexPath::new(g, &f1, 1.0, vec![1, -1], vec![vec![[0.0, 0.0]]]).is_err());
}

#[test]
fn exchange_twice_flips_the_single_particle_states() {
    let s = [c(0.1, 0.0), c(0.2, 0.0), c(0.3, 0.0), c(0.4, 0.0)];
    let once = exchange_modes(s, 1);
    let twice = exchange_modes(s, 2);
    assert_eq!(twice, [s[0], -s[1], -s[2], s[3]]);
    assert_eq!(exchange_modes(s, 4), s);
    let norm = |x: [C64; 4]| x.iter().map(|v| v.norm_sqr()).sum::<f64>();
    assert_relative_eq!(norm(once), norm(s));
    // A single excitation after a full exchange is orthogonal to the input
    // superposition (|10⟩ + |01⟩)/√2 ↦ (|10⟩ − |01⟩)/√2 up to sign.
    let h = 0.5f64.sqrt();
    let plus = [c(0.0, 0.0), c(h, 0.0), c(h, 0.0), c(0.0, 0.0)];
    let out = exchange_modes(plus, 1);
    let overlap: C64 = plus.iter().zip(&out).map(|(a, b)| a.conj() * b).sum();
    assert!(overlap.norm() < 1e-12);
}

#[test]
fn disorder_is_bounded_and_reproducible() {
    let g = small();
    assert_eq!(apply_disorder(&g, 0.0, 3).unwrap(), g);
    let a = apply_disorder(&g, 0.6, 3).unwrap();
    assert_eq!(a, apply_disorder(&g, 0.6, 3).unwrap());
    assert_ne!(a, apply_disorder(&g, 0.6, 4).unwrap());
    let shifts: Vec<f64> = a.sites.iter().zip(&g.sites).map(|(p, q)| dist(p.pos(), q.pos())).collect();
    assert!(shifts.iter().all(|&s| s <= 0.6 + 1e-12));
    let mean = shifts.iter().sum::<f64>() / shifts.len() as f64;
    assert!((mean - 0.4).abs() < 0.03, "{mean}");
    assert!(apply_disorder(&g, -1.0, 0).is_err());
}

#[test]
fn disorder_sweep_keeps_the_mode_on_b() {
    let g = small();
    let displaced = kekule_displace(&g, &VortexField::standard(), DEFAULT_XI_EFF).geometry;
    let sweep = DisorderSweep { radii: vec![0.0, 0.6], seeds: 3, ..DisorderSweep::standard() };
    let pts = disorder_sweep(&displaced, &sweep).unwrap();
    assert_eq!(pts.len(), 2);
    assert!(pts.iter().all(|p| p.gammas.len() == 3 && p.min_gamma > 2.0));
    assert_eq!(pts[0].gammas[0], pts[0].gammas[2]);
}

#[test]
fn excitation_matches_the_generalized_eigenproblem() {
    // For few inputs the optimum of total/target is the smallest generalized
    // eigenvalue of (C†C, C†PC), solved here through a Cholesky whitening.
    let g = graphene_box(80.0, 80.0, DEFAULT_A0).unwrap();
    let h = vortex_hamiltonian(&g, &VortexField::standard(), 1.0);
    let inputs: Vec<usize> = g.sites_within([0.0, 0.0], 12.0);
    let target = g.sites_within([0.0, 0.0], 20.0);
    let cfg = ExcitationConfig { z: 5.0, restarts: 3, ..Default::default() };
    let r = excitation_optimize(&h, &inputs, &target, &cfg, None).unwrap();

    let cols: Vec<CVector> = inputs.iter().map(|&k| sparse_evolve(&h, cfg.z, &basis(g.len(), k))).collect();
    let m = inputs.len();
    let total = CMatrix::from_fn(m, m, |a, b| cols[a].dotc(&cols[b]));
    let inside = CMatrix::from_fn(m, m, |a, b| target.iter().map(|&i| cols[a][i].conj() * cols[b][i]).sum());
    let l = inside.clone().cholesky().unwrap().l();
    let li = l.try_inverse().unwrap();
    let whitened = &li * total * li.adjoint();
    let best = whitened.symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    assert_relative_eq!(r.objective, best, max_relative = 1e-6);
    assert_relative_eq!(r.amplitudes.iter().map(|a| a * a).sum::<f64>(), 1.0, epsilon = 1e-12);
    for f in &r.restart_objectives {
        assert_relative_eq!(*f, best, max_relative = 1e-5);
    }
}

#[test]
fn excitation_input_validation() {
    let g = small();
    let h = vortex_hamiltonian(&g, &VortexField::standard(), 1.0);
    let cfg = ExcitationConfig::default();
    let many: Vec<usize> = (0..14).collect();
    assert!(excitation_optimize(&h, &many, &[0], &cfg, None).is_err());
    assert!(excitation_optimize(&h, &[0], &[g.len()], &cfg, None).is_err());
    assert!(excitation_optimize(&h, &[0, 1], &[0], &cfg, Some(&[c(1.0, 0.0)])).is_err());
    let inputs = excitation_inputs(&g, &VortexField::standard(), 20).unwrap();
    assert_eq!(inputs.len(), MAX_INPUT_SITES);
    assert!(inputs.iter().all(|&i| g.sites[i].sublattice == Sublattice::B));
}

#[test]
fn ssh_winding() {
    assert_eq!(winding_number(&ssh_loop(1.0, 0.5, 200)).unwrap(), 1);
    assert_eq!(winding_number(&ssh_loop(0.5, 1.0, 200)).unwrap(), 0);
    assert_eq!(winding_number(&ssh_loop(0.0, 1.0, 200)).unwrap(), 0);
    assert!(matches!(winding_number(&ssh_loop(1.0, 1.0, 200)), Err(Error::GapClosed(_))));
    assert!(winding_number(&ssh_loop(1.0, 0.5, 2)).is_err());
    let (lo, hi) = ssh_dispersion(PI, 1.0, 0.6);
    assert_relative_eq!(hi - lo, 2.0 * 0.4, epsilon = 1e-12);
    let eig = ssh_bloch(0.7, 1.0, 0.6).symmetric_eigen();
    let mut e: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    e.sort_by(f64::total_cmp);
    let (lo, hi) = ssh_dispersion(0.7, 1.0, 0.6);
    assert_relative_eq!(e[0], lo, epsilon = 1e-12);
    assert_relative_eq!(e[1], hi, epsilon = 1e-12);
}

#[test]
fn domain_wall_binds_a_jackiw_rebbi_mode() {
    let (cells, wall, t_l, m0) = (100, 50, 1.0, 0.2);
    let t_r = domain_wall_hoppings(cells, wall, t_l, m0);
    let h = ssh_chain_hamiltonian(&t_r, t_l).to_dense();
    let spec = spectrum(&h).unwrap();
    let chain = ssh_chain(2 * cells, 1.0).unwrap();
    let wall_x = chain.sites[2 * wall].x;
    let mode = near_zero_mode(&spec, &chain, &ZeroModeSearch::new([wall_x, 0.0], 30.0, 0.05)).unwrap();
    assert_eq!(mode.localized_count(), 1);
    let b_weight: f64 = (0..cells).map(|n| mode.field.amplitudes[2 * n + 1].norm_sqr()).sum();
    assert!(b_weight > 0.99, "{b_weight}");

    let grid: Vec<f64> = (0..cells).map(|n| n as f64).collect();
    let mass: Vec<f64> = t_r.iter().map(|t| t - t_l).collect();
    let jr = jackiw_rebbi_mode(&mass, t_l, &grid).unwrap();
    let jr_field = ModeField::from_real(&jr.chain_amplitudes()).unwrap();
    assert!(mode.field.fidelity(&jr_field) > 0.95, "{}", mode.field.fidelity(&jr_field));

    let flipped: Vec<f64> = mass.iter().map(|m| -m).collect();
    let jr = jackiw_rebbi_mode(&flipped, t_l, &grid).unwrap();
    assert!(jr.b.iter().all(|&v| v == 0.0) && jr.a.iter().any(|&v| v > 0.0));
    assert!(jackiw_rebbi_mode(&vec![0.2; cells], t_l, &grid).is_err());
}

#[test]
fn berry_and_chern() {
    let loop_states: Vec<CVector> = (0..64).map(|k| bloch_spinor(PI / 2.0, 2.0 * PI * k as f64 / 64.0)).collect();
    // Half the solid angle of the equator: phase π.
    assert_relative_eq!(berry_phase(&loop_states).unwrap().abs(), PI, epsilon = 1e-3);
    let same = vec![bloch_spinor(0.3, 0.2); 5];
    assert_relative_eq!(berry_phase(&same).unwrap(), 0.0, epsilon = 1e-12);
    let regauged: Vec<CVector> = loop_states.iter().enumerate().map(|(k, v)| v * C64::from_polar(1.0, 0.37 * k as f64)).collect();
    let shift = berry_phase(&regauged).unwrap() - berry_phase(&loop_states).unwrap();
    assert!(C64::from_polar(1.0, shift).re > 1.0 - 1e-12);
    assert!(berry_phase(&[bloch_spinor(0.0, 0.0), bloch_spinor(PI, 0.0)]).is_err());

    let c1 = chern_number(|kx, ky| two_band_bloch(kx, ky, 1.0), 24, 0).unwrap();
    let c2 = chern_number(|kx, ky| two_band_bloch(kx, ky, -1.0), 24, 0).unwrap();
    assert_eq!(c1.abs(), 1);
    assert_eq!(c2, -c1);
    assert_eq!(chern_number(|kx, ky| two_band_bloch(kx, ky, 3.0), 24, 0).unwrap(), 0);
    assert_eq!(chern_number(|kx, ky| two_band_bloch(kx, ky, 1.0), 24, 1).unwrap(), -c1);
}

#[test]
fn graphene_bands() {
    let a0 = DEFAULT_A0;
    let k = dirac_point(a0);
    assert!(graphene_dispersion(k, 1.0, a0).1 < 1e-12);
    assert_relative_eq!(graphene_dispersion([0.0, 0.0], 1.0, a0).1, 3.0, epsilon = 1e-12);
    let dk = 1e-3 / a0;
    let slope = graphene_dispersion([k[0] + dk, k[1]], 1.0, a0).1 / dk;
    assert_relative_eq!(slope, fermi_velocity(1.0, a0), max_relative = 0.02);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sparse_evolution_is_unitary(z in 0.0f64..20.0, k in 0usize..432) {
        let g = small();
        let h = vortex_hamiltonian(&g, &VortexField::standard(), 1.0);
        let out = sparse_evolve(&h, z, &basis(g.len(), k));
        prop_assert!((out.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn coupling_matrix_is_symmetric_under_disorder(seed in 0u64..1000, r in 0.0f64..1.0) {
        let g = apply_disorder(&graphene_box(60.0, 60.0, DEFAULT_A0).unwrap(), r, seed).unwrap();
        let h = coupling_hamiltonian(&g, &CouplingModel::standard());
        prop_assert!(crate::numerics::hermitian_deviation(&h) < 1e-12);
    }

    #[test]
    fn winding_is_one_iff_inter_dominates(t_l in 0.05f64..2.0, t_r in 0.05f64..2.0) {
        prop_assume!((t_l - t_r).abs() > 0.02);
        let w = winding_number(&ssh_loop(t_l, t_r, 256)).unwrap();
        prop_assert_eq!(w, i64::from(t_l > t_r));
    }
}
