use std::sync::OnceLock;

use proptest::prelude::*;
use reserve_dyn_core::config::LoadedConfig;
use reserve_dyn_core::dynamics::{duty_at, MigrationTimeline};
use reserve_dyn_core::population::Device;
use reserve_dyn_core::reliability::{cumulative, eens, ClusteredFleet};
use reserve_dyn_core::stochastic::{deviation_cumulants, Deviation, Sensitivity, StochasticModel, UncertaintySpec};
use reserve_dyn_core::thermal::{temperature_step, DeviceParams, DeviceState, HysteresisBand, Mode};

fn device() -> impl Strategy<Value = Device> {
    (1.5..2.5f64, 1.5..2.5f64, 4.0..7.2f64, 18.0..27.0f64).prop_map(|(c, r, p, sp)| Device {
        params: DeviceParams::new(c, r, p, 2.5).unwrap(),
        band: HysteresisBand::new(sp, 1.0).unwrap(),
    })
}

fn small_fleet() -> &'static ClusteredFleet {
    static FLEET: OnceLock<ClusteredFleet> = OnceLock::new();
    FLEET.get_or_init(|| {
        let mut s = LoadedConfig::bundled("table1_fleet.json").unwrap().scenario().unwrap();
        s.population.count = 2000;
        ClusteredFleet::build(&s).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_steps_compose(d in device(), theta in 15.0..30.0f64, dt in 1e-4..0.5f64, on in any::<bool>()) {
        let mode = if on { Mode::On } else { Mode::Off };
        let s0 = DeviceState { theta, mode };
        let whole = temperature_step(s0, 32.0, &d.params, dt).unwrap();
        let half = temperature_step(s0, 32.0, &d.params, dt / 2.0).unwrap();
        let twice = temperature_step(half, 32.0, &d.params, dt / 2.0).unwrap();
        prop_assert!((whole.theta - twice.theta).abs() < 1e-9);
        let eq = 32.0 - mode.indicator() * d.params.cooling_drop();
        prop_assert!((whole.theta - eq).abs() <= (theta - eq).abs() + 1e-12);
    }

    #[test]
    fn timeline_pieces_tile_and_duty_is_bounded(d in device(), beta in 0.2..1.5f64, s in -0.5..4.0f64) {
        let tl = MigrationTimeline::for_device(&d, beta, 32.0, 1.0);
        prop_assume!(tl.is_ok());
        let tl = tl.unwrap();
        prop_assert_eq!(tl.pieces[0].lower, f64::NEG_INFINITY);
        prop_assert_eq!(tl.pieces.last().unwrap().upper, f64::INFINITY);
        for w in tl.pieces.windows(2) {
            prop_assert_eq!(w[0].upper, w[1].lower);
        }
        let eta = duty_at(&tl, 1.0 + s);
        prop_assert!((0.0..=1.0).contains(&eta));
    }

    #[test]
    fn aggregate_cdf_is_a_distribution(sa in 0.0..2.0f64, half in 0.0..1.0f64, minute in 0.0..240.0f64) {
        let fleet = small_fleet();
        let u = UncertaintySpec {
            ambient: Deviation::Normal { sigma: sa },
            setpoint: Deviation::Uniform { half_width: half },
            ..UncertaintySpec::default()
        };
        let model = StochasticModel::new(&fleet.clusters, &fleet.timelines, u).unwrap();
        let d = model.distribution(minute / 60.0);
        let lo = d.mean - 6.0 * d.std_dev() - 1.0;
        let mut prev = 0.0;
        for i in 0..=((12.0 * d.std_dev() + 2.0) / 0.1) as usize {
            let f = d.cdf(lo + 0.1 * i as f64);
            prop_assert!((0.0..=1.0).contains(&f));
            prop_assert!(f >= prev - 1e-12, "drop {:e} at {}", prev - f, lo + 0.1 * i as f64);
            prev = f;
        }
    }

    #[test]
    fn cumulants_scale_with_the_input(a in -50.0..50.0f64, sigma in 0.1..2.0f64, s in 0.2..3.0f64) {
        let sens = Sensitivity { ambient: a, setpoint: vec![0.0] };
        let base = UncertaintySpec {
            ambient: Deviation::Uniform { half_width: sigma },
            setpoint: Deviation::Zero,
            ..UncertaintySpec::default()
        };
        let scaled = UncertaintySpec { ambient: base.ambient.scaled(s), ..base.clone() };
        let k0 = deviation_cumulants(&sens, &base, 4);
        let k1 = deviation_cumulants(&sens, &scaled, 4);
        for v in 2..=4 {
            let expect = k0.get(v) * s.powi(v as i32);
            prop_assert!((k1.get(v) - expect).abs() <= 1e-9 * expect.abs().max(1e-12));
        }
    }

    #[test]
    fn energy_accumulates(trace in proptest::collection::vec(0.0..100.0f64, 2..60), dt in 0.01..0.5f64) {
        let c = cumulative(&trace, dt);
        prop_assert_eq!(c[0], 0.0);
        prop_assert!(c.windows(2).all(|w| w[1] >= w[0]));
        let horizon = dt * (trace.len() - 1) as f64;
        let total = eens(&trace, dt, horizon).unwrap();
        prop_assert!((total - c[c.len() - 1]).abs() < 1e-9 * total.max(1.0));
    }
}
