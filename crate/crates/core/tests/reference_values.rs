//! Closed form and frozen reference values across the modules.

use std::f64::consts::{PI, SQRT_2};

use apkin_core::collision::{estimate_mu, CollisionOperator, SpectralBoltzmann, DEFAULT_SIGMA};
use apkin_core::phase_space::{entropy, maxwellian, moments, Correction, MomentState, VelocityGrid};
use apkin_core::solver::euler_flux;
use apkin_core::stability::{
    dirk_stability, monotonicity_penalized, monotonicity_standard, penalized_stability, stability_at_infinity,
    weak_ap_range, ZGrid,
};
use apkin_core::tableau::{check_method_order, check_order_conditions, classify, Part, Registry, SchemeKind};
use apkin_core::transport::{advection_rhs, cfl_dt, weno3_derivative, SpaceGrid};
use apkin_core::phase_space::DistributionField;

fn reg() -> Registry {
    Registry::standard()
}

#[test]
fn registry_shapes() {
    let r = reg();
    let dp1 = r.get("DP1-A(2,4,2)").unwrap();
    assert_eq!(dp1.stages(), 4);
    let last: Vec<f64> = (0..4).map(|j| dp1.a_im()[(3, j)]).collect();
    assert_eq!(last, vec![1.5, -1.5, 0.5, 0.5]);
    let dp2 = r.get("DP2-A(2,4,2)").unwrap_or_else(|| r.get("DP2-A2(2,4,2)").unwrap());
    assert!((0..4).all(|i| dp2.a_im()[(i, i)] == 2.0));
    assert!(r.get("nosuch").is_none());
}

#[test]
fn classification_follows_names() {
    for t in reg().iter() {
        let c = classify(t).unwrap();
        assert!(c.gsa, "{}", t.name());
        let head = t.name().split('(').next().unwrap();
        let expect = if head.ends_with("CK") {
            SchemeKind::TypeCk
        } else if head.starts_with("ARS") || head.ends_with("ARS") {
            SchemeKind::TypeArs
        } else {
            SchemeKind::TypeA
        };
        assert_eq!(c.kind, expect, "{}", t.name());
    }
}

#[test]
fn order_conditions() {
    let r = reg();
    let rep = check_order_conditions(r.get("ARS(2,2,2)").unwrap(), 2);
    assert!(rep.max_residual() <= 1e-14);
    assert!(!check_order_conditions(r.get("ARS(1,1,1)").unwrap(), 2).all_satisfied());
    assert!(check_method_order(r.get("DP1-A(2,4,2)").unwrap(), Part::Implicit, 3).all_satisfied());
}

#[test]
fn dirk_stability_values() {
    let r = reg();
    let ars111 = r.get("ARS(1,1,1)").unwrap();
    assert!((dirk_stability(ars111, 1.0).unwrap() - 0.5).abs() < 1e-15);
    assert!(dirk_stability(r.get("ARS(2,2,2)").unwrap(), 1e8).unwrap().abs() < 1e-7);
    for t in r.iter() {
        assert_eq!(dirk_stability(t, 0.0).unwrap(), 1.0);
    }
}

#[test]
fn penalized_stability_values() {
    let r = reg();
    let ars111 = r.get("ARS(1,1,1)").unwrap();
    assert!((penalized_stability(ars111, 1.5, 1.0).unwrap() - 0.75).abs() < 1e-15);
    assert!((penalized_stability(ars111, 1.0, 3.0).unwrap() - 0.25).abs() < 1e-15);
    for t in r.iter() {
        for a in [0.3, 1.0, 2.5] {
            assert_eq!(penalized_stability(t, a, 0.0).unwrap(), 1.0);
        }
        for z in [0.01, 0.3, 2.0, 50.0, 1e3] {
            let d = dirk_stability(t, z).unwrap();
            assert!((penalized_stability(t, 1.0, z).unwrap() - d).abs() < 1e-12);
        }
        for a in [0.3, 0.7, 1.2, 1.7] {
            let inf = stability_at_infinity(t, a).unwrap();
            // at z = 1e10 the direct evaluation already loses about six digits to rounding
            let big = penalized_stability(t, a, 1e8).unwrap();
            assert!((inf - big).abs() < 1e-6, "{} alpha={a}: {inf} vs {big}", t.name());
        }
    }
}

#[test]
fn limits_follow_closed_forms() {
    let r = reg();
    let cases: [(&str, fn(f64) -> f64); 4] = [
        ("ARS(1,1,1)", |a| a - 1.0),
        ("JF-CK(2,3,2)", |a| 2.0 * a * a - 4.0 * a + 1.0),
        ("BPR-CK(3,5,3)", |a| 4.0 * (2.0 * a.powi(3) - 5.0 * a * a + 2.0 * a) / 3.0 + 1.0),
        ("DP-A(1,2,1)", |_| 0.0),
    ];
    for (name, f) in cases {
        for a in [0.1, 0.25, 0.5, 0.9, 1.0, 1.5, 2.0, 3.0] {
            let got = stability_at_infinity(r.get(name).unwrap(), a).unwrap();
            assert!((got - f(a)).abs() < 1e-10, "{name} alpha={a}: {got}");
        }
    }
}

#[test]
fn weak_ap_intervals() {
    let r = reg();
    let bpr = weak_ap_range(r.get("BPR-CK(3,5,3)").unwrap(), 16.0, 1e-4).unwrap();
    let expect = [(0.5, (1.0 + 3f64.sqrt()) / 2.0), (1.5, 2.0)];
    assert_eq!(bpr.intervals.len(), 2);
    for (i, (lo, hi)) in bpr.intervals.iter().zip(expect) {
        assert!((i.lo - lo).abs() < 1e-8 && (i.hi - hi).abs() < 1e-8, "{i:?}");
    }
    let ars111 = weak_ap_range(r.get("ARS(1,1,1)").unwrap(), 16.0, 1e-4).unwrap();
    assert_eq!(ars111.to_string(), "(0,2)");
    let ars443 = weak_ap_range(r.get("ARS(4,4,3)").unwrap(), 16.0, 1e-4).unwrap();
    assert!((ars443.intervals[0].lo - 0.13475).abs() < 1e-5);
    assert!((ars443.intervals[0].hi - 2.0).abs() < 1e-8);
    // frozen: computed tableau values, which differ from the reference ARS(2,2,2) rows
    let ars222 = weak_ap_range(r.get("ARS(2,2,2)").unwrap(), 16.0, 1e-4).unwrap();
    assert!((ars222.intervals[0].lo - (2.0 * SQRT_2 - 2.0)).abs() < 1e-6);
    assert_eq!(weak_ap_range(r.get("DP2-A1(2,4,2)").unwrap(), 16.0, 1e-4).unwrap().to_string(), "(0,inf)");
}

#[test]
fn monotonicity_radii() {
    let r = reg();
    let g = ZGrid::default();
    let radius = |n: &str| monotonicity_standard(r.get(n).unwrap(), &g).radius;
    assert!(radius("ARS(1,1,1)").is_infinite());
    assert!(radius("DP-A(1,2,1)").is_infinite());
    assert!((radius("ARS(2,2,2)") - (1.0 + SQRT_2)).abs() < 2e-3);
    assert!((radius("JF-CK(2,3,2)") - 2.0).abs() < 2e-3);
    assert!((radius("DP2-A1(2,4,2)") - 3f64.sqrt()).abs() < 2e-3);
    assert!((radius("DP1-A(2,4,2)") - 2.8473).abs() < 2e-3);

    let pen = |n: &str| monotonicity_penalized(r.get(n).unwrap(), &g).summary();
    assert_eq!(pen("ARS(1,1,1)"), "[0,inf)");
    assert_eq!(pen("ARS(2,2,2)"), "z=0");
    assert_eq!(pen("DP-A(1,2,1)"), "[0,inf)");
    assert_eq!(pen("JF-CK(2,3,2)"), "[0,2]");
    assert_eq!(pen("DP2-A2(2,4,2)"), "[1,inf)");
    assert_eq!(pen("DP1-A(2,4,2)"), "z=0");
}

#[test]
fn discrete_maxwellian_moments() {
    let g = VelocityGrid::new(32, 8.0).unwrap();
    let m = maxwellian(&MomentState::from_primitive(1.0, [0.0, 0.0], 1.0), &g, Correction::None).unwrap();
    let got = moments(&m, &g).to_array();
    for (a, b) in got.iter().zip([1.0, 0.0, 0.0, 1.0]) {
        assert!((a - b).abs() < 1e-8, "{got:?}");
    }
    let m = maxwellian(&MomentState::from_primitive(2.0, [0.2, 0.0], 0.75), &g, Correction::None).unwrap();
    let s = moments(&m, &g);
    assert!((s.rho - 2.0).abs() < 1e-8);
    assert!((s.velocity()[0] - 0.2).abs() < 1e-8 && s.velocity()[1].abs() < 1e-12);
    assert!((s.temperature() - 0.75).abs() < 1e-8);
    // pointwise formula
    let [vx, vy] = g.velocity(0);
    let m = maxwellian(&MomentState::from_primitive(1.0, [0.0, 0.0], 1.0), &g, Correction::None).unwrap();
    assert!((m[0] - (-(vx * vx + vy * vy) / 2.0).exp() / (2.0 * PI)).abs() < 1e-18);
}

#[test]
fn gaussian_entropy() {
    let g = VelocityGrid::new(32, 8.0).unwrap();
    let m = maxwellian(&MomentState::from_primitive(1.0, [0.0, 0.0], 1.0), &g, Correction::None).unwrap();
    let h = entropy(&m, &g).unwrap();
    assert!((h + 1.0 + (2.0 * PI).ln()).abs() < 1e-6, "{h}");
    let m2: Vec<f64> = m.iter().map(|x| 2.0 * x).collect();
    let rho = moments(&m, &g).rho;
    assert!((entropy(&m2, &g).unwrap() - (2.0 * h + 2.0 * 2f64.ln() * rho)).abs() < 1e-12);
    assert_eq!(entropy(&vec![0.0; g.len()], &g).unwrap(), 0.0);
}

#[test]
fn maxwell_molecule_rate() {
    let g = VelocityGrid::new(16, 8.0).unwrap();
    let m1 = maxwellian(&MomentState::from_primitive(1.0, [0.0, 0.0], 1.0), &g, Correction::Conservative).unwrap();
    assert!((estimate_mu(&m1, &g, DEFAULT_SIGMA).unwrap() - 1.0).abs() < 1e-12);
    let m2: Vec<f64> = m1.iter().map(|x| 2.0 * x).collect();
    assert!((estimate_mu(&m2, &g, DEFAULT_SIGMA).unwrap() - 2.0).abs() < 1e-12);
    assert_eq!(estimate_mu(&vec![0.0; g.len()], &g, DEFAULT_SIGMA).unwrap(), 0.0);
}

#[test]
fn spectral_equilibrium_residual_shrinks() {
    let mut last = f64::INFINITY;
    for nv in [16, 32, 64] {
        let g = VelocityGrid::new(nv, 8.0).unwrap();
        let op = SpectralBoltzmann::new(&g, DEFAULT_SIGMA).unwrap();
        let m = maxwellian(&MomentState::from_primitive(1.0, [0.2, 0.0], 0.8), &g, Correction::None).unwrap();
        let q = op.apply(&m, &g).unwrap();
        let res = q.iter().map(|v| v.abs()).sum::<f64>() / m.iter().sum::<f64>();
        if nv >= 32 {
            assert!(res <= 1e-5, "nv={nv}: {res}");
        }
        assert!(res < last);
        last = res;
    }
}

#[test]
fn time_step_from_cfl() {
    let g = SpaceGrid::new(128).unwrap();
    assert!((cfl_dt(&g, 8.0, 0.5).unwrap() - 4.8828125e-4).abs() < 1e-18);
    let g = SpaceGrid::new(100).unwrap();
    assert!((cfl_dt(&g, 8.0, 1.0).unwrap() - 1.25e-3).abs() < 1e-18);
    assert!(cfl_dt(&g, 0.0, 0.5).is_err());
}

#[test]
fn weno_refinement_order() {
    let err = |n: usize| {
        let g = SpaceGrid::new(n).unwrap();
        let q: Vec<f64> = g.centers().iter().map(|x| (2.0 * PI * x).sin()).collect();
        let d = weno3_derivative(&q, 1.0, g.dx()).unwrap();
        g.centers().iter().zip(&d).map(|(x, v)| (v - 2.0 * PI * (2.0 * PI * x).cos()).abs()).sum::<f64>() * g.dx()
    };
    let (e64, e128, e256) = (err(64), err(128), err(256));
    assert!(e128 < e64 && (e128 / e256).log2() >= 2.5, "{e64} {e128} {e256}");
}

#[test]
fn weno_is_non_oscillatory_on_a_jump() {
    let q: Vec<f64> = (0..40).map(|i| if (10..25).contains(&i) { 1.0 } else { 0.0 }).collect();
    let d = weno3_derivative(&q, 1.0, 1.0).unwrap();
    // away from the two jumps the derivative stays negligible
    for (i, v) in d.iter().enumerate() {
        let near = [10usize, 25].iter().any(|&j| i + 3 > j && i < j + 3);
        if !near {
            assert!(v.abs() < 1e-3, "{i}: {v}");
        }
        assert!(v.abs() <= 1.0 + 1e-12);
    }
}

#[test]
fn advection_moments_match_flux_derivative() {
    let n = 512;
    let s = SpaceGrid::new(n).unwrap();
    let v = VelocityGrid::new(16, 8.0).unwrap();
    let m = maxwellian(&MomentState::from_primitive(1.0, [0.0, 0.0], 1.0), &v, Correction::Conservative).unwrap();
    let f = DistributionField::from_cells(n, v.clone(), |i, out| {
        let a = (2.0 * PI * s.center(i)).sin();
        for (o, mv) in out.iter_mut().zip(&m) {
            *o = a * mv;
        }
        Ok(())
    })
    .unwrap();
    let l = advection_rhs(&f, &s).unwrap();
    let mut err = [0.0; 4];
    for (i, mom) in l.moments().iter().enumerate() {
        // <v_x phi M> = (0, 1, 0, 0) for the unit Maxwellian
        let exact = [0.0, -2.0 * PI * (2.0 * PI * s.center(i)).cos(), 0.0, 0.0];
        for (e, (a, b)) in err.iter_mut().zip(mom.to_array().iter().zip(exact)) {
            *e += (a - b).abs() * s.dx();
        }
    }
    // the other components vanish up to the scale dependence of the WENO weights
    assert!(err[1] < 2.0 * PI * 1e-4, "{err:?}");
    assert!(err[0] < 1e-5 && err[2] < 1e-12 && err[3] < 1e-5, "{err:?}");
    let uniform = DistributionField::from_cells(8, v.clone(), |_, out| {
        out.copy_from_slice(&m);
        Ok(())
    })
    .unwrap();
    let z = advection_rhs(&uniform, &SpaceGrid::new(8).unwrap()).unwrap();
    assert!(z.data().iter().all(|x| x.abs() < 1e-13));
}

#[test]
fn euler_flux_of_rest_state() {
    let g = VelocityGrid::new(32, 8.0).unwrap();
    let fl = euler_flux(&MomentState::from_primitive(1.0, [0.0, 0.0], 1.0), &g, Correction::Conservative).unwrap();
    assert!(fl[0].abs() < 1e-14 && fl[2].abs() < 1e-14 && fl[3].abs() < 1e-14);
    assert!((fl[1] - 1.0).abs() < 1e-8, "{fl:?}");
    let fl = euler_flux(&MomentState::from_primitive(2.0, [0.3, 0.0], 0.5), &g, Correction::Conservative).unwrap();
    assert!((fl[0] - 0.6).abs() < 1e-12);
    assert!((fl[1] - (2.0 * 0.5 + 2.0 * 0.09)).abs() < 1e-8, "{fl:?}");
}
