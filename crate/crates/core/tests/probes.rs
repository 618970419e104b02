use eulerlab::aligned::{vortex_tube_scenario, TubeParams};
use eulerlab::eigen::Sym3;
use eulerlab::flow::Preset;
use eulerlab::probes::{
    frozen_invariant_check, invariant_components, material_derivative_checks, seed_probes,
    tetrahedron_cloud, tetrahedron_volume, track, trajectories_csv, FramePolicy, ProbeSample,
    ProbeTrajectory, RefinedTrilinear, SeedSpec, TRAJECTORY_HEADER,
};
use eulerlab::spectral::SpectralField;
use eulerlab::{FlowState64, Grid64};
use proptest::prelude::*;

/// Pure stretching along the first axis: `ω = e^{γt} e₁`, `S = diag(γ, −γ/2, −γ/2)`,
/// `P = −S²`, sampled with spacing `h`.
fn stretching_trajectory(gamma: f64, h: f64, count: usize) -> ProbeTrajectory<f64> {
    let mut tr = ProbeTrajectory::new(0);
    let strain = Sym3::diag(gamma, -gamma / 2.0, -gamma / 2.0);
    let hessian = Sym3::diag(-gamma * gamma, -gamma * gamma / 4.0, -gamma * gamma / 4.0);
    for i in 0..count {
        let t = i as f64 * h;
        let w = [(gamma * t).exp(), 0.0, 0.0];
        tr.push(ProbeSample::new(t, [1.0; 3], [0.0; 3], w, strain, hessian).unwrap())
            .unwrap();
    }
    tr
}

#[test]
fn linear_stretching_oracle() {
    let (gamma, h) = (0.8, 0.05);
    let rep = material_derivative_checks(&stretching_trajectory(gamma, h, 9)).unwrap();
    let want = (gamma * h).sinh() / (gamma * h) - 1.0;
    let [r1, r2, _] = rep.ratios();
    assert!(
        (r1 - want).abs() < 1e-9 * want.max(1e-6),
        "{r1:e} vs {want:e}"
    );
    assert!(
        (r2 - want).abs() < 1e-9 * want.max(1e-6),
        "{r2:e} vs {want:e}"
    );
    assert_eq!(rep.order, 2);
}

#[test]
fn identity_checks_need_five_samples() {
    assert!(material_derivative_checks(&stretching_trajectory(1.0, 0.1, 4)).is_err());
}

#[test]
fn seeding_examples() {
    let g = Grid64::new(16).unwrap();
    let p = seed_probes(&g, &SeedSpec::Uniform { per_axis: 2 }).unwrap();
    assert_eq!(p.len(), 8);
    let q = std::f64::consts::PI / 2.0;
    assert!(p.iter().all(|x| x
        .iter()
        .all(|c| (c - q).abs() < 1e-14 || (c - 3.0 * q).abs() < 1e-14)));
    let a = seed_probes(&g, &SeedSpec::Random { count: 10, seed: 7 }).unwrap();
    let b = seed_probes(&g, &SeedSpec::Random { count: 10, seed: 7 }).unwrap();
    assert_eq!(a, b);
    let e = seed_probes(
        &g,
        &SeedSpec::Explicit {
            positions: vec![[-1.0, 7.0, 3.0]],
        },
    )
    .unwrap();
    let tau = std::f64::consts::TAU;
    assert!((e[0][0] - (tau - 1.0)).abs() < 1e-14 && (e[0][1] - (7.0 - tau)).abs() < 1e-14);
    assert!(seed_probes(&g, &SeedSpec::Random { count: 0, seed: 1 }).is_err());
}

#[test]
fn positions_converge_under_refinement() {
    let start = seed_probes(
        &Grid64::new(16).unwrap(),
        &SeedSpec::Random { count: 3, seed: 5 },
    )
    .unwrap();
    let run = |n: usize| {
        let g = Grid64::new(n).unwrap();
        let mut s = FlowState64::init(&Preset::TaylorGreen, &g).unwrap();
        let mut pos = start.clone();
        for _ in 0..50 {
            s.advance(0.01, &mut pos).unwrap();
        }
        pos
    };
    let (a, b) = (run(32), run(64));
    let g = Grid64::new(32).unwrap();
    for (p, q) in a.iter().zip(&b) {
        for d in 0..3 {
            let mut diff = (p[d] - q[d]).abs();
            diff = diff.min(g.box_length() - diff);
            assert!(diff <= 1e-4, "{p:?} vs {q:?}");
        }
    }
}

#[test]
fn tetrahedron_volume_is_preserved() {
    let g = Grid64::new(32).unwrap();
    let mut s = FlowState64::init(&Preset::TaylorGreen, &g).unwrap();
    let mut cloud = tetrahedron_cloud(&g, [0.7, 1.9, 2.6], 0.05);
    let v0 = tetrahedron_volume(&g, &cloud);
    for _ in 0..50 {
        s.advance(0.01, &mut cloud).unwrap();
    }
    let v1 = tetrahedron_volume(&g, &cloud);
    assert!(((v1 - v0) / v0).abs() <= 0.02, "{v0} -> {v1}");
}

#[test]
fn refined_trilinear_is_second_order() {
    let f = |x: [f64; 3]| (x[0] + 2.0 * x[1]).sin() * x[2].cos();
    let err = |n: usize| {
        let g = Grid64::new(n).unwrap();
        let interp = RefinedTrilinear::new(&SpectralField::scalar_from_fn(&g, f)).unwrap();
        (0..400)
            .map(|i| {
                let s = i as f64;
                [(0.37 * s) % 6.0, (1.13 * s) % 6.0, (2.71 * s) % 6.0]
            })
            .map(|x| (interp.eval(0, x) - f(x)).abs())
            .fold(0.0, f64::max)
    };
    let (a, b) = (err(16), err(32));
    assert!(a / b >= 3.5, "{a:e} -> {b:e}");
}

#[test]
fn tube_trajectory_keeps_invariant_frozen() {
    let rep = vortex_tube_scenario(&TubeParams::default()).unwrap();
    let tr = rep.trajectory().unwrap();
    let first = tr.samples[0].invariant;
    for s in &tr.samples {
        let d: f64 = (0..3)
            .map(|i| (s.invariant[i] - first[i]).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(d <= 1e-8, "t = {}", s.t);
    }
    let check = frozen_invariant_check(&tr, 1e-10);
    assert!(check.checked > 0);
    assert_eq!(check.violations, 0);
    let comps = invariant_components(&tr, FramePolicy::PrincipalAxes);
    assert_eq!(comps.len(), tr.samples.len());
}

#[test]
fn taylor_green_trajectories_csv() {
    let g = Grid64::new(16).unwrap();
    let mut s = FlowState64::init(&Preset::TaylorGreen, &g).unwrap();
    let mut pos = seed_probes(&g, &SeedSpec::Random { count: 2, seed: 1 }).unwrap();
    let trajs = track(&mut s, &mut pos, 0.02, 10, 2).unwrap();
    assert_eq!(trajs[0].samples.len(), 6);
    let csv = trajectories_csv(&trajs, FramePolicy::PrincipalAxes);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(TRAJECTORY_HEADER));
    let cols = TRAJECTORY_HEADER.split(',').count();
    assert!(lines.all(|l| l.split(',').count() == cols));
    let rep = material_derivative_checks(&trajs[1]).unwrap();
    assert!(rep.ratios().iter().all(|r| r.is_finite() && *r < 1e-2));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// The oracle holds for any growth rate and spacing.
    #[test]
    fn stretching_oracle_for_any_rate(gamma in 0.1f64..3.0, h in 0.005f64..0.1) {
        let rep = material_derivative_checks(&stretching_trajectory(gamma, h, 7)).unwrap();
        let want = (gamma * h).sinh() / (gamma * h) - 1.0;
        prop_assert!((rep.ratios()[0] - want).abs() <= 1e-7 * want + 1e-12);
    }

    #[test]
    fn non_increasing_times_are_rejected(dt in -1.0f64..=0.0) {
        let mut tr = stretching_trajectory(1.0, 0.1, 2);
        let last = *tr.samples.last().unwrap();
        let mut bad = last;
        bad.t = last.t + dt;
        prop_assert!(tr.push(bad).is_err());
    }
}
