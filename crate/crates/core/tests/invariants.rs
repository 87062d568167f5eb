//! Randomized invariants of the moment, collision and stepping layers.

use apkin_core::collision::{
    moment_defect, penalize, BgkOperator, CollisionOperator, SpectralBoltzmann, DEFAULT_SIGMA,
};
use apkin_core::phase_space::{
    entropy, maxwellian, moments, Correction, DistributionField, MomentState, VelocityGrid,
};
use apkin_core::solver::{
    homogeneous_step, imex_step_traced, non_equilibrium_initial, StepConfig, StepMode,
};
use apkin_core::stability::{dirk_stability, monotonicity_standard, ZGrid};
use apkin_core::tableau::{parse_tableau, write_tableau, ImexTableau, Registry};
use apkin_core::transport::{advection_rhs, SpaceGrid};
use proptest::prelude::*;
use std::sync::OnceLock;

fn registry() -> &'static Registry {
    static R: OnceLock<Registry> = OnceLock::new();
    R.get_or_init(Registry::standard)
}

fn scheme(i: usize) -> &'static ImexTableau {
    registry().iter().nth(i % registry().len()).unwrap()
}

fn grid16() -> &'static (VelocityGrid, SpectralBoltzmann) {
    static G: OnceLock<(VelocityGrid, SpectralBoltzmann)> = OnceLock::new();
    G.get_or_init(|| {
        let g = VelocityGrid::new(16, 8.0).unwrap();
        let op = SpectralBoltzmann::new(&g, DEFAULT_SIGMA).unwrap();
        (g, op)
    })
}

fn state() -> impl Strategy<Value = MomentState> {
    (0.2f64..3.0, -1.0f64..1.0, -1.0f64..1.0, 0.4f64..1.5)
        .prop_map(|(rho, ux, uy, t)| MomentState::from_primitive(rho, [ux, uy], t))
}

/// Sum of one to three Maxwellians sampled on `g`.
fn mixture(parts: &[MomentState], g: &VelocityGrid) -> Vec<f64> {
    let mut f = vec![0.0; g.len()];
    for p in parts {
        for (a, b) in f.iter_mut().zip(maxwellian(p, g, Correction::None).unwrap()) {
            *a += b;
        }
    }
    f
}

fn max_abs_diff(a: [f64; 4], b: [f64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn corrected_maxwellian_reproduces_moments(m in state()) {
        let g = VelocityGrid::new(32, 8.0).unwrap();
        let got = moments(&maxwellian(&m, &g, Correction::Conservative).unwrap(), &g);
        let scale = m.rho + m.energy;
        prop_assert!(max_abs_diff(got.to_array(), m.to_array()) <= 1e-13 * scale);
    }

    #[test]
    fn moments_are_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, p in state(), q in state()) {
        let g = VelocityGrid::new(16, 8.0).unwrap();
        let f = mixture(&[p], &g);
        let h = mixture(&[q], &g);
        let comb: Vec<f64> = f.iter().zip(&h).map(|(x, y)| a * x + b * y).collect();
        let lhs = moments(&comb, &g).to_array();
        let (mf, mh) = (moments(&f, &g).to_array(), moments(&h, &g).to_array());
        for k in 0..4 {
            prop_assert!((lhs[k] - (a * mf[k] + b * mh[k])).abs() <= 1e-12 * (1.0 + lhs[k].abs()));
        }
    }

    #[test]
    fn even_slices_carry_no_momentum(rho in 0.2f64..3.0, t in 0.4f64..1.5) {
        let g = VelocityGrid::new(16, 8.0).unwrap();
        let f = mixture(&[MomentState::from_primitive(rho, [0.0, 0.0], t)], &g);
        let m = moments(&f, &g);
        prop_assert!(m.momentum[0].abs() < 1e-15 && m.momentum[1].abs() < 1e-15);
    }

    #[test]
    fn collision_conserves_mass_and_is_quadratic(p in state(), q in state(), a in 0.1f64..4.0) {
        let (g, op) = grid16();
        let f = mixture(&[p, q], g);
        let qf = op.apply(&f, g).unwrap();
        prop_assert!(moment_defect(&qf, g)[0].abs() <= 1e-10);
        let fa: Vec<f64> = f.iter().map(|x| a * x).collect();
        let qa = op.apply(&fa, g).unwrap();
        let scale = qf.iter().fold(0.0f64, |s, v| s.max(v.abs())) * a * a;
        for (x, y) in qa.iter().zip(&qf) {
            prop_assert!((x - a * a * y).abs() <= 1e-12 * scale.max(1e-300));
        }
        let bgk = BgkOperator { mu: a }.apply(&f, g).unwrap();
        prop_assert!(max_abs_diff(moment_defect(&bgk, g), [0.0; 4]) <= 1e-12);
    }

    #[test]
    fn penalization_split_is_exact(p in state(), q in state(), mu in 0.1f64..3.0) {
        let (g, op) = grid16();
        let f = mixture(&[p, q], g);
        let qb = op.apply(&f, g).unwrap();
        let s = penalize(&qb, &f, &moments(&f, g), mu, g).unwrap();
        let scale = qb.iter().chain(&s.q_part).fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..qb.len() {
            prop_assert!((s.g_part[k] + s.q_part[k] - qb[k]).abs() <= 1e-15 * scale);
        }
    }

    #[test]
    fn homogeneous_steps_conserve(
        i in 0usize..11, parts in prop::collection::vec(state(), 1..3), z in 1e-3f64..1e4, alpha in 0.2f64..3.0, mode in 0u8..3,
    ) {
        let (g, op) = grid16();
        let t = scheme(i);
        let f = mixture(&parts, g);
        let mu = match mode { 2 => moments(&f, g).rho, _ => 1.0 };
        let m = match mode {
            0 => StepMode::HomogeneousBgk,
            1 => StepMode::HomogeneousLinearized { alpha },
            _ => StepMode::HomogeneousPenalized,
        };
        let cfg = StepConfig::new(t, 1.0, z / mu, mu, m);
        let f1 = homogeneous_step(&f, g, &cfg, Some(op as &dyn CollisionOperator)).unwrap();
        let (a, b) = (moments(&f, g).to_array(), moments(&f1, g).to_array());
        prop_assert!(max_abs_diff(a, b) <= 1e-11 * (1.0 + a[0] + a[3]), "{a:?} {b:?}");
    }

    #[test]
    fn bgk_recursion_is_a_power(i in 0usize..11, z in 1e-2f64..50.0, p in state(), q in state()) {
        let g = VelocityGrid::new(16, 8.0).unwrap();
        let t = scheme(i);
        let f0 = mixture(&[p, q], &g);
        let m = maxwellian(&moments(&f0, &g), &g, Correction::Conservative).unwrap();
        let cfg = StepConfig::new(t, 1.0, z, 1.0, StepMode::HomogeneousBgk);
        let mut f = f0.clone();
        for _ in 0..50 {
            f = homogeneous_step(&f, &g, &cfg, None).unwrap();
        }
        let r = dirk_stability(t, z).unwrap().powi(50);
        let scale = f0.iter().zip(&m).fold(0.0f64, |s, (a, b)| s.max((a - b).abs()));
        for k in 0..f.len() {
            let d = (f[k] - m[k] - r * (f0[k] - m[k])).abs();
            prop_assert!(d <= 1e-10 * scale.max(1e-300), "{d:e} r={r:e} scale={scale:e}");
        }
    }

    #[test]
    fn bgk_positivity_and_entropy(i in 0usize..11, frac in 0.0f64..1.0, z in 1e-3f64..1e4, p in state(), q in state()) {
        let g = VelocityGrid::new(16, 8.0).unwrap();
        let t = scheme(i);
        let f0 = mixture(&[p, q], &g);
        let radius = monotonicity_standard(t, &ZGrid::default()).radius;
        let zm = if radius.is_finite() { frac * radius } else { z };
        let f1 = homogeneous_step(&f0, &g, &StepConfig::new(t, 1.0, zm.max(1e-12), 1.0, StepMode::HomogeneousBgk), None).unwrap();
        prop_assert!(f1.iter().all(|&v| v >= -1e-14));
        let r = dirk_stability(t, z).unwrap();
        if (0.0..=1.0).contains(&r) {
            let f1 = homogeneous_step(&f0, &g, &StepConfig::new(t, 1.0, z, 1.0, StepMode::HomogeneousBgk), None).unwrap();
            prop_assert!(entropy(&f1, &g).unwrap() <= entropy(&f0, &g).unwrap() + 1e-10);
        }
    }

    #[test]
    fn kinetic_moments_follow_the_explicit_recursion(i in 0usize..11, log_eps in -8.0f64..0.0, penalized in any::<bool>()) {
        let (g, op) = grid16();
        let t = scheme(i);
        let s = SpaceGrid::new(8).unwrap();
        let f = non_equilibrium_initial(&s, g).unwrap();
        let dt = 0.5 * s.dx() / g.vmax();
        let (mode, qb) = if penalized {
            (StepMode::PenalizedBoltzmann, Some(op as &dyn CollisionOperator))
        } else {
            (StepMode::StandardBgk, None)
        };
        let eps = 10f64.powf(log_eps);
        let cfg = StepConfig::new(t, eps, dt, 1.0, mode);
        let (f1, trace) = imex_step_traced(&f, &s, &cfg, qb).unwrap();
        let (u0, u1) = (f.moments(), f1.moments());
        let w = t.w_ex();
        let a = t.a_ex();
        for c in 0..s.nx() {
            let mut expect = u0[c].to_array();
            for (j, tm) in trace.transport_moments.iter().enumerate() {
                if !tm.is_empty() {
                    for k in 0..4 {
                        expect[k] += w[j] * tm[c][k];
                    }
                }
            }
            let d = max_abs_diff(expect, u1[c].to_array());
            prop_assert!(d <= 1e-11, "cell {c}: {d:e}");
            for (st, um) in trace.stage_moments.iter().enumerate() {
                let mut e = u0[c].to_array();
                for j in 0..st {
                    if !trace.transport_moments[j].is_empty() {
                        for k in 0..4 {
                            e[k] += a[(st, j)] * trace.transport_moments[j][c][k];
                        }
                    }
                }
                prop_assert!(max_abs_diff(e, um[c].to_array()) <= 1e-13);
            }
        }
    }

    #[test]
    fn advection_mirror_symmetry(amp in 0.0f64..0.9, shift in 0.0f64..1.0) {
        let g = VelocityGrid::new(8, 6.0).unwrap();
        let s = SpaceGrid::new(16).unwrap();
        let nx = s.nx();
        let base = maxwellian(&MomentState::from_primitive(1.0, [0.3, -0.2], 0.7), &g, Correction::None).unwrap();
        let make = |mirror: bool| {
            DistributionField::from_cells(nx, g.clone(), |i, out| {
                let ci = if mirror { nx - 1 - i } else { i };
                let a = 1.0 + amp * (2.0 * std::f64::consts::PI * (s.center(ci) + shift)).sin();
                for (k, o) in out.iter_mut().enumerate() {
                    let kk = if mirror { g.len() - 1 - k } else { k };
                    *o = a * base[kk];
                }
                Ok(())
            })
            .unwrap()
        };
        let (l, lm) = (advection_rhs(&make(false), &s).unwrap(), advection_rhs(&make(true), &s).unwrap());
        for i in 0..nx {
            for k in 0..g.len() {
                let a = l.cell(i)[k];
                let b = lm.cell(nx - 1 - i)[g.len() - 1 - k];
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            }
        }
    }

    #[test]
    fn tableau_text_roundtrip(i in 0usize..11) {
        let t = scheme(i);
        let back = parse_tableau(&write_tableau(t)).unwrap();
        prop_assert_eq!(&back, t);
    }
}
