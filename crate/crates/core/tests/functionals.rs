use eulerlab::aligned::{aligned_point, synthetic_snapshots, ElementSpec, OdeOptions};
use eulerlab::eigen::Sym3;
use eulerlab::flow::Preset;
use eulerlab::functionals::{
    doubly_aligned_monitor, enstrophy_functionals, hessian_aligned_monitor, inequality_check,
    reduce_points, reduce_state, spectral_enstrophy, MonitorParams, QuadraturePoint, Region,
    SERIES_HEADER,
};
use eulerlab::{FlowState64, Grid64};
use proptest::prelude::*;

fn specs(mu0: &[f64]) -> Vec<ElementSpec> {
    mu0.iter()
        .enumerate()
        .map(|(i, &m)| ElementSpec {
            id: Some(i),
            mu0: m,
            position: [i as f64; 3],
            omega0: 1.0,
        })
        .collect()
}

fn synthetic_params(c0: f64) -> MonitorParams {
    MonitorParams {
        eps_align: 1e-10,
        c0: Some(c0),
    }
}

#[test]
fn hand_value_of_v_and_phi() {
    let pt = QuadraturePoint {
        weight: 1.0,
        vorticity: [2.0, 0.0, 0.0],
        strain: Sym3::diag(2.0, -1.0, -1.0),
        hessian: Sym3::diag(-1.0, 0.5, 0.5),
    };
    let snaps: Vec<_> = (0..3)
        .map(|i| reduce_points(i as f64, [pt], &MonitorParams::default()).unwrap())
        .collect();
    assert_eq!(snaps[0].enstrophy, 4.0);
    assert_eq!(snaps[0].v(), 0.5);
    let s2 = enstrophy_functionals(&snaps, Region::ProbeVolume, 2).unwrap();
    assert_eq!(s2.rows[0].phi_n, 0.25);
    let s1 = enstrophy_functionals(&snaps, Region::ProbeVolume, 1).unwrap();
    assert_eq!(s1.rows[0].phi_n, 0.125);
}

#[test]
fn orthogonal_stretching_gives_zero_v() {
    // Sω = (0, 1, 0) is orthogonal to ω = (1, 0, 0)
    let pt = QuadraturePoint {
        weight: 1.0,
        vorticity: [1.0, 0.0, 0.0],
        strain: Sym3::new(0.0, 0.0, 0.0, 1.0, 0.0, 0.0),
        hessian: Sym3::diag(1.0, 1.0, 1.0),
    };
    let snaps: Vec<_> = (0..3)
        .map(|i| reduce_points(i as f64, [pt], &MonitorParams::default()).unwrap())
        .collect();
    let series = enstrophy_functionals(&snaps, Region::ProbeVolume, 1).unwrap();
    assert_eq!(series.rows[1].v_direct, 0.0);
    let rep = inequality_check(&series).unwrap();
    assert!(rep.cs_holds.iter().all(|h| *h));
    assert_eq!(series.rows[1].cs_lhs, 0.0);
    assert_eq!(series.rows[1].cs_rhs, 1.0);
}

#[test]
fn series_needs_three_samples_and_positive_enstrophy() {
    let pt = aligned_point(1.0, 1.0, 4.0);
    let p = MonitorParams::default();
    let two: Vec<_> = (0..2)
        .map(|i| reduce_points(i as f64, [pt], &p).unwrap())
        .collect();
    assert!(enstrophy_functionals(&two, Region::WholeBox, 1).is_err());
    let zero = aligned_point(1.0, 0.0, 4.0);
    let dead: Vec<_> = (0..3)
        .map(|i| reduce_points(i as f64, [zero], &p).unwrap())
        .collect();
    assert_eq!(
        enstrophy_functionals(&dead, Region::WholeBox, 1)
            .unwrap_err()
            .exit_code(),
        4
    );
}

#[test]
fn hessian_aligned_hand_constants() {
    // one element with ϖ₀ = 2, μ = 1 and λ = 4μ² gives v₀ = 0.5 and c = 1
    let pt = aligned_point(1.0, 2f64.sqrt(), 4.0);
    let p = MonitorParams::default();
    let snaps: Vec<_> = (0..3)
        .map(|i| reduce_points(0.1 * i as f64, [pt], &p).unwrap())
        .collect();
    let v = hessian_aligned_monitor(&snaps, 0.0, 1e-3).unwrap();
    assert!(v.applicable);
    assert!((v.varpi0 - 2.0).abs() < 1e-14 && (v.v0 - 0.5).abs() < 1e-14);
    assert!((v.c.unwrap() - 1.0).abs() < 1e-12);
    assert!((v.t_critical.unwrap() - 1.0).abs() < 1e-12);
    assert!((v.a.unwrap() - 0.5).abs() < 1e-12);
    assert!((v.b.unwrap() - 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn doubly_aligned_hand_constants_and_rejection() {
    let pt = aligned_point(1.0, 1.0, 4.0);
    let p = MonitorParams {
        eps_align: 1e-3,
        c0: Some(4.0),
    };
    let snaps: Vec<_> = (0..3)
        .map(|i| reduce_points(0.1 * i as f64, [pt], &p).unwrap())
        .collect();
    let v = doubly_aligned_monitor(&snaps, 0.0, 4.0, 1e-3).unwrap();
    assert!(v.applicable);
    assert_eq!(v.c, Some(1.0));
    assert!((v.t_critical.unwrap() - 1.0).abs() < 1e-12);
    let err = doubly_aligned_monitor(&snaps, 0.0, 3.0, 1e-3).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("c₀ > 3"));
}

#[test]
fn nonpositive_v0_is_reported() {
    let mut pt = aligned_point(1.0, 1.0, 4.0);
    pt.strain = Sym3::diag(-1.0, 0.5, 0.5);
    let p = MonitorParams::default();
    let snaps: Vec<_> = (0..3)
        .map(|i| reduce_points(0.1 * i as f64, [pt], &p).unwrap())
        .collect();
    let v = hessian_aligned_monitor(&snaps, 0.0, 1e-3).unwrap();
    assert_eq!(v.verdict, "hypotheses not met at t0");
    assert!(v.t_critical.is_none());
}

fn taylor_green_snaps(steps: usize, dt: f64) -> Vec<eulerlab::functionals::SnapshotReduction> {
    let g = Grid64::new(32).unwrap();
    let mut s = FlowState64::init(&Preset::TaylorGreen, &g).unwrap();
    let p = MonitorParams::default();
    let mut out = vec![reduce_state(&mut s, &p).unwrap()];
    for _ in 0..steps {
        s.step(dt).unwrap();
        out.push(reduce_state(&mut s, &p).unwrap());
    }
    out
}

#[test]
fn taylor_green_early_time_does_not_meet_condition() {
    let snaps = taylor_green_snaps(4, 0.05);
    let v = hessian_aligned_monitor(&snaps, 0.0, 1e-3).unwrap();
    assert!(v.satisfied_fraction_min < 1.0);
    assert_eq!(v.verdict, "condition not met");
    assert!(v.t_critical.is_none());
    let series = enstrophy_functionals(&snaps, Region::WholeBox, 1).unwrap();
    let rep = inequality_check(&series).unwrap();
    assert!(rep.cs_margin.iter().all(|m| *m >= 0.0));
    assert!(series.to_csv().starts_with(SERIES_HEADER));
}

#[test]
fn grid_and_spectral_enstrophy_agree() {
    let g = Grid64::new(32).unwrap();
    for preset in [
        Preset::TaylorGreen,
        Preset::RandomSolenoidal {
            seed: 8,
            slope: -5.0 / 3.0,
            cutoff: 8.0,
        },
    ] {
        let mut s = FlowState64::init(&preset, &g).unwrap();
        let grid = reduce_state(&mut s, &MonitorParams::default())
            .unwrap()
            .enstrophy;
        let spec = spectral_enstrophy(&mut s).unwrap();
        assert!((grid - spec).abs() <= 1e-10 * spec);
    }
}

fn vprime_disagreement(h: f64) -> f64 {
    let c0 = 4.0;
    let times: Vec<f64> = (0..=(0.08 / h).round() as usize)
        .map(|i| i as f64 * h)
        .collect();
    let opts = OdeOptions {
        dt: h / 10.0,
        threshold: 1e6,
    };
    let (snaps, blown) = synthetic_snapshots(
        &specs(&[0.5, 1.0, 2.0]),
        c0,
        0.0,
        &times,
        &opts,
        &synthetic_params(c0),
    )
    .unwrap();
    assert!(blown.is_none());
    let series = enstrophy_functionals(&snaps, Region::ProbeVolume, 1).unwrap();
    // compare at t = 0.04, common to both spacings
    let row = series
        .rows
        .iter()
        .find(|r| (r.t - 0.04).abs() < 1e-12)
        .unwrap();
    (row.vprime_fd - row.vprime_integral).abs()
}

#[test]
fn vprime_estimators_converge() {
    let (a, b) = (vprime_disagreement(0.01), vprime_disagreement(0.005));
    assert!(a >= 4.0 * b * 0.95, "{a:e} -> {b:e}");
}

#[test]
fn enstrophy_grows_while_condition_holds() {
    let c0 = 4.0;
    let times: Vec<f64> = (0..=15).map(|i| i as f64 * 0.01).collect();
    let opts = OdeOptions {
        dt: 1e-4,
        threshold: 1e6,
    };
    let (snaps, _) = synthetic_snapshots(
        &specs(&[0.5, 1.0, 2.0]),
        c0,
        0.0,
        &times,
        &opts,
        &synthetic_params(c0),
    )
    .unwrap();
    assert!(snaps
        .iter()
        .all(|s| s.hessian_aligned_fraction == 1.0 && s.v() > 0.0));
    for w in snaps.windows(2) {
        assert!(w[1].enstrophy >= w[0].enstrophy);
    }
    let series = enstrophy_functionals(&snaps, Region::ProbeVolume, 1).unwrap();
    let rep = inequality_check(&series).unwrap();
    assert!(rep.growth_holds_direct.iter().all(|h| *h));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Cauchy-Schwarz on arbitrary point sets.
    #[test]
    fn cauchy_schwarz_on_random_points(
        vals in prop::collection::vec(prop::array::uniform12(-3.0f64..3.0), 1..20)
    ) {
        let pts: Vec<_> = vals.iter().map(|v| QuadraturePoint {
            weight: 0.5 + v[0].abs(),
            vorticity: [v[1], v[2], v[3]],
            strain: Sym3::new(v[4], v[5], -v[4] - v[5], v[6], v[7], v[8]),
            hessian: Sym3::diag(v[9], v[10], v[11]),
        }).collect();
        let p = MonitorParams::default();
        let snaps: Vec<_> = (0..3).map(|i| reduce_points(i as f64, pts.iter().copied(), &p).unwrap()).collect();
        prop_assume!(snaps[0].enstrophy > 1e-6);
        let series = enstrophy_functionals(&snaps, Region::ProbeVolume, 1).unwrap();
        let rep = inequality_check(&series).unwrap();
        prop_assert!(rep.cs_holds.iter().all(|h| *h));
    }
}
