mod common;

use nvpump::experiments::{
    default_gamma_grid, entropy_decomposition_run, excitation_crossover, ness1, ness2,
    run_protocol, sweep_entropy, sweep_ness1, sweep_polarization_vs_gamma,
    sweep_polarization_vs_toff, time_to_ness, InitialState, ProtocolConfig,
};
use nvpump::lindblad::PopulationVector;
use nvpump::model::Level;
use nvpump::thermo::{entropy_rates, power_exact};
use nvpump::{build_model, Error, ModelParams};

fn defaults() -> ModelParams {
    ModelParams::default()
}

#[test]
fn default_protocol_shape() {
    let r = run_protocol(&ProtocolConfig::default(), &defaults()).unwrap();
    let i_off = r.t_off_index();
    assert_eq!(r.trajectory.times[i_off], 10.0);
    assert!(r.trajectory.laser_on[..=i_off].iter().all(|x| *x));
    assert!(r.trajectory.laser_on[i_off + 1..].iter().all(|x| !*x));

    // P1 rises after switch-off and ends well above the other ground levels.
    let p1_off = r.trajectory.states[i_off][0];
    let p1_end = r.trajectory.last().unwrap()[0];
    assert!(p1_end > p1_off);
    assert!(r.polarization > 0.75 && r.polarization < 1.0);
    assert!(r.rho2_ss[1] > 0.0 && r.rho2_ss[2] > 0.0);
    assert_eq!(r.polarization, r.rho2_ss[0]);
    assert!(r.rho2_ss.excited() + r.rho2_ss.intersystem() < 1e-9);

    // |8⟩ drains into |7⟩ a thousand times faster than |7⟩ empties.
    assert!(r.rho1_ss.get(Level::of(8)) / r.rho1_ss.get(Level::of(7)) < 1e-2);
}

#[test]
fn default_protocol_just_misses_ness_tolerance_at_t_off() {
    let r = run_protocol(&ProtocolConfig::default(), &defaults()).unwrap();
    assert!(r.ness1_reached_at.is_none());
    assert!(r.rho1_residual > 1e-8 && r.rho1_residual < 1.1e-8);
    assert!(r.warnings.iter().any(|w| w.contains("NESS not reached")));

    let longer = ProtocolConfig::default().with_t_off(12.0);
    let r = run_protocol(&longer, &defaults()).unwrap();
    let t = r.ness1_reached_at.unwrap();
    assert!((t - 10.009).abs() < 0.01, "{t}");
    assert!(r.warnings.is_empty(), "{:?}", r.warnings);
}

#[test]
fn no_pump_polarization_is_one_third() {
    let r = run_protocol(&ProtocolConfig::default().with_gamma_p(0.0), &defaults()).unwrap();
    assert!((r.polarization - 1.0 / 3.0).abs() < 1e-12);
    let first = r.trajectory.states[0];
    assert!(r.trajectory.states.iter().all(|p| p.max_abs_diff(&first) < 1e-12));
}

#[test]
fn short_relaxation_is_flagged() {
    let cfg = ProtocolConfig {
        t_end: 12.0,
        ..ProtocolConfig::default()
    };
    let r = run_protocol(&cfg, &defaults()).unwrap();
    assert!(r.warnings.iter().any(|w| w.contains("relaxation not converged")));
}

#[test]
fn explicit_initial_state() {
    let cfg = ProtocolConfig {
        initial_state: InitialState::Explicit(PopulationVector::basis(Level::of(1))),
        ..ProtocolConfig::default()
    };
    let r = run_protocol(&cfg, &defaults()).unwrap();
    assert_eq!(r.trajectory.states[0], PopulationVector::basis(Level::of(1)));

    let bad = ProtocolConfig {
        initial_state: InitialState::Explicit(PopulationVector::from_vector_unchecked(
            [0.5; 8].into(),
        )),
        ..ProtocolConfig::default()
    };
    assert!(run_protocol(&bad, &defaults()).is_err());
}

#[test]
fn invalid_protocols_are_rejected() {
    let cfg = ProtocolConfig {
        t_end: 10.0,
        ..ProtocolConfig::default()
    };
    assert!(matches!(
        run_protocol(&cfg, &defaults()),
        Err(Error::InvalidParameter { field: "t_end", .. })
    ));
}

#[test]
fn ness1_sweep_matches_oracle_and_diagnostics() {
    let grid = default_gamma_grid();
    let s = sweep_ness1(&grid, &defaults()).unwrap();
    assert_eq!(s.rows.len(), 101);
    for r in s.rows.iter().skip(1) {
        let o = common::null_space(&common::rate_matrix(r.gamma_p, true));
        for n in 0..8 {
            assert!((r.populations[n] - o[n]).abs() < 1e-8);
        }
    }
    assert!(s.p1_decreasing && s.p4_increasing && s.pi_increasing);
    // Populations still move by more than 1e-3 per unit gamma_p at 5.
    assert_eq!(s.saturation_gamma, None);
}

#[test]
fn zero_pump_limit_is_continuous() {
    let limit = ness1(&defaults().with_gamma_p(0.0)).unwrap();
    let small = ness1(&defaults().with_gamma_p(1e-7)).unwrap();
    assert!(limit.max_abs_diff(&small) < 1e-5);
    assert!((limit[0] - 0.898179).abs() < 1e-6);
    assert!((limit[1] - 0.050911).abs() < 1e-6);
}

#[test]
fn polarization_sweep() {
    let s = sweep_polarization_vs_gamma(&default_gamma_grid(), &defaults()).unwrap();
    assert!(s.decreasing);
    let at = |g: f64| s.rows.iter().find(|r| (r.0 - g).abs() < 1e-12).unwrap().1;
    for (g, expected) in [(0.1, 0.87826), (0.5, 0.831443), (1.0, 0.803678), (2.0, 0.778857), (5.0, 0.756534)] {
        assert!((at(g) - expected).abs() < 1e-5, "gamma_p {g}: {}", at(g));
    }
}

#[test]
fn polarization_sweep_agrees_with_protocol_at_long_t_off() {
    let p = defaults().with_gamma_p(2.0);
    let via_sweep = ness2(&p, &ness1(&p).unwrap()).unwrap();
    let r = run_protocol(&ProtocolConfig::default().with_gamma_p(2.0).with_t_off(40.0), &defaults())
        .unwrap();
    assert!(via_sweep.max_abs_diff(&r.rho2_ss) < 1e-9);
}

#[test]
fn toff_sweep_short_grid() {
    let grid: Vec<f64> = (1..=24).map(|k| k as f64 * 0.5).collect();
    let s = sweep_polarization_vs_toff(&grid, 1.0, &defaults(), 1e-8).unwrap();
    assert!(s.non_decreasing);
    assert!(s.rows.windows(2).all(|w| w[1].work > w[0].work));
    let w = s.work_at_ness.unwrap();
    let first = s.rows.iter().find(|r| r.residual <= 1e-8).unwrap();
    assert_eq!(first.t_off, 10.5);
    assert_eq!(w, first.work);
    assert!(s.plateau_spread.unwrap() < 1e-4);
}

#[test]
fn toff_sweep_without_ness_reports_none() {
    let grid = [0.5, 1.0, 2.0];
    let s = sweep_polarization_vs_toff(&grid, 1.0, &defaults(), 1e-8).unwrap();
    assert_eq!(s.work_at_ness, None);
    assert_eq!(s.plateau_spread, None);
}

#[test]
fn entropy_sweep() {
    let s = sweep_entropy(&default_gamma_grid(), &defaults()).unwrap();
    assert!(s.s2_increasing);
    assert!(s.s1_unimodal);
    let g = s.s1_argmax.unwrap();
    assert!((g - 1.13785).abs() < 2e-4, "{g}");
    let top = s.rows.iter().max_by(|a, b| a.s1.total_cmp(&b.s1)).unwrap();
    assert_eq!(top.gamma_p, 1.15);
    for r in s.rows.iter().skip(1) {
        let o = common::null_space(&common::rate_matrix(r.gamma_p, true));
        assert!((r.s1 - common::entropy(&o)).abs() < 1e-8);
    }
}

#[test]
fn entropy_sign_regimes_at_ness() {
    let crossing = {
        let f = |g: f64| {
            let p = ness1(&defaults().with_gamma_p(g)).unwrap();
            entropy_rates(&p, &build_model(defaults().with_gamma_p(g)).unwrap(), true).work
        };
        let (mut a, mut b) = (0.5, 2.0);
        assert!(f(a) > 0.0 && f(b) < 0.0);
        while b - a > 1e-8 {
            let m = 0.5 * (a + b);
            if f(m) > 0.0 {
                a = m
            } else {
                b = m
            }
        }
        a
    };
    assert!((crossing - 1.02451).abs() < 1e-4, "{crossing}");
}

#[test]
fn excitation_crossover_value() {
    let c = excitation_crossover(&defaults(), 0.9, 1.1, 1e-10).unwrap();
    assert!((c - 1.02315).abs() < 1e-5);
    assert!(excitation_crossover(&defaults(), 1.5, 2.0, 1e-6).is_err());
}

#[test]
fn time_to_ness_decreases_with_pump() {
    let times: Vec<f64> = [0.25, 0.5, 1.0, 2.0, 4.0]
        .iter()
        .map(|g| time_to_ness(&defaults().with_gamma_p(*g), 1e-8, 50.0).unwrap().unwrap())
        .collect();
    assert!(times.windows(2).all(|w| w[1] < w[0]), "{times:?}");
    assert!((times[2] - 10.009).abs() < 0.01);
}

#[test]
fn entropy_decomposition_closes() {
    let configs: Vec<ProtocolConfig> = [0.5, 1.0, 2.0]
        .iter()
        .map(|g| ProtocolConfig::default().with_gamma_p(*g))
        .collect();
    let runs = entropy_decomposition_run(&configs, &defaults()).unwrap();
    assert_eq!(runs.len(), 3);
    for r in &runs {
        assert_eq!(r.delta_s[0], 0.0);
        let scale = r
            .s_w
            .iter()
            .chain(&r.s_q)
            .map(|x| x.abs())
            .fold(1e-3, f64::max);
        assert!(r.max_closure_residual <= 1e-6 * scale, "{} {}", r.gamma_p, r.max_closure_residual);
    }
    // Weak pumping pays entropy through work; strong pumping through heat.
    assert!(runs[0].s_w[runs[0].s_w.len() - 1] > 0.0);
}

#[test]
fn power_at_ness_matches_pumped_ground_population() {
    for g in [0.5, 3.0] {
        let p = ness1(&defaults().with_gamma_p(g)).unwrap();
        let m = build_model(defaults().with_gamma_p(g)).unwrap();
        let expected = g * 77.0 * 4.7e8 * p[0]
            + g * 77.0 * (4.7e8 + 1.40e3 - 2.87e3) * (p[1] + p[2]);
        assert!((power_exact(&p, &m, true) - expected).abs() <= 1e-12 * expected);
    }
}
