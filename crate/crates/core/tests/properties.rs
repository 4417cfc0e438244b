use nalgebra::DMatrix;
use ofgnss_core::constellation::{propagate, solve_kepler, OrbitalElements, SatId, SatelliteState};
use ofgnss_core::estimator::{ekf_predict, ekf_update_epoch, ekf_update_flow, InitConfig, MotionModel, NavState, ProcessConfig};
use ofgnss_core::geodesy::{
    ecef_to_enu, ecef_to_geodetic, enu_to_ecef, geodetic_to_ecef, look_angles, EcefCoord, EnuCoord, GeodeticCoord,
};
use ofgnss_core::measurements::{apply_spoof, synth_pseudorange, ErrorBudget, FlowVelocityMeas, NoiseStreams, PseudorangeMeas, SpoofProfile};
use ofgnss_core::optical_flow::{
    compute_gradients, constancy_residual, flow_to_ground_velocity, horn_schunck, lucas_kanade, windowed_residual_gradient,
    CameraModel, FlowVector,
};
use ofgnss_core::texture::{translated_pair, GroundTexture};
use proptest::prelude::*;

fn lat_lon_alt() -> impl Strategy<Value = (f64, f64, f64)> {
    (-89.9f64..=89.9, -180.0f64..180.0, -1e3f64..=1e7)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn geodetic_round_trip((lat, lon, alt) in lat_lon_alt()) {
        let g = GeodeticCoord::from_degrees(lat, lon, alt).unwrap();
        let back = ecef_to_geodetic(&geodetic_to_ecef(&g)).unwrap();
        prop_assert!((back.lat_deg() - lat).abs() < 1e-9);
        let dlon = (back.lon_deg() - g.lon_deg() + 540.0).rem_euclid(360.0) - 180.0;
        prop_assert!(dlon.abs() < 1e-9);
        prop_assert!((back.alt() - alt).abs() < 1e-6, "alt {} vs {}", back.alt(), alt);
    }

    #[test]
    fn kepler_residual(m in -20.0f64..20.0, e in 0.0f64..0.9) {
        let big_e = solve_kepler(m, e).unwrap();
        prop_assert!((big_e - e * big_e.sin() - m).abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn enu_preserves_distance(
        (lat, lon, alt) in lat_lon_alt(),
        a in prop::array::uniform3(-1e6f64..1e6),
        b in prop::array::uniform3(-1e6f64..1e6),
    ) {
        let o = GeodeticCoord::from_degrees(lat, lon, alt.min(1e5)).unwrap();
        let base = geodetic_to_ecef(&o);
        let p1 = EcefCoord::new(base.x + a[0], base.y + a[1], base.z + a[2]);
        let p2 = EcefCoord::new(base.x + b[0], base.y + b[1], base.z + b[2]);
        let d_enu = (ecef_to_enu(&p1, &o).to_vector() - ecef_to_enu(&p2, &o).to_vector()).norm();
        let d = p1.distance(&p2);
        prop_assert!((d_enu - d).abs() <= 1e-9 * d.max(1.0));
    }

    #[test]
    fn elevation_flips_with_up(
        (lat, lon) in (-80.0f64..80.0, -180.0f64..180.0),
        e in -1e6f64..1e6, n in -1e6f64..1e6, u in 1e3f64..1e7,
    ) {
        let o = GeodeticCoord::from_degrees(lat, lon, 0.0).unwrap();
        let up = look_angles(&o, &enu_to_ecef(&EnuCoord::new(e, n, u), &o)).unwrap();
        let down = look_angles(&o, &enu_to_ecef(&EnuCoord::new(e, n, -u), &o)).unwrap();
        prop_assert!((up.elevation + down.elevation).abs() < 1e-9);
    }

    #[test]
    fn circular_orbit_radius_is_constant(raan in 0.0f64..360.0, inc in 0.0f64..90.0, t in 0.0f64..200_000.0) {
        let el = OrbitalElements {
            sat_id: SatId(1),
            semi_major_axis: 2.6e7,
            eccentricity: 0.0,
            inclination: inc,
            raan,
            arg_perigee: 10.0,
            mean_anomaly_epoch: 40.0,
            epoch: 0.0,
            clock_bias: 0.0,
        };
        let r = propagate(&el, t).unwrap().pos.norm();
        prop_assert!((r - 2.6e7).abs() < 1e-3);
    }

    #[test]
    fn residual_is_linear_in_flow(
        seed in any::<u64>(),
        v1 in prop::array::uniform2(-5.0f64..5.0),
        v2 in prop::array::uniform2(-5.0f64..5.0),
        px in 0usize..32, py in 0usize..32,
    ) {
        let (f0, f1) = translated_pair(&GroundTexture::new(seed, 8.0), 32, 32, (0.7, -0.3), 0.1);
        let g = compute_gradients(&f0, &f1).unwrap();
        let a = FlowVector::new(v1[0], v1[1]);
        let b = FlowVector::new(v2[0], v2[1]);
        let r = |v| constancy_residual(&g, v, (px, py)).unwrap();
        let defect = r(a + b) - r(a) - r(b) + r(FlowVector::new(0.0, 0.0));
        prop_assert!(defect.abs() < 1e-12, "{defect}");
    }

    #[test]
    fn lk_solution_is_stationary(
        seed in any::<u64>(),
        dx in -2.0f64..2.0, dy in -2.0f64..2.0,
        cx in 8usize..56, cy in 8usize..56,
    ) {
        let (f0, f1) = translated_pair(&GroundTexture::new(seed, 16.0), 64, 64, (dx, dy), 0.1);
        let g = compute_gradients(&f0, &f1).unwrap();
        if let Ok((v, _)) = lucas_kanade(&g, (cx, cy), 15) {
            let grad = windowed_residual_gradient(&g, (cx, cy), 15, v).unwrap();
            prop_assert!(grad.norm() < 1e-9, "{}", grad.norm());
        }
    }

    #[test]
    fn ground_velocity_is_homogeneous(
        vx in -10.0f64..10.0, vy in -10.0f64..10.0, k in -5.0f64..5.0, heading in 0.0f64..360.0,
    ) {
        let cam = CameraModel { focal_px: 300.0, cx: 32.0, cy: 32.0, width: 64, height: 64, height_agl: 80.0, heading };
        let (e, n) = flow_to_ground_velocity(FlowVector::new(vx, vy), &cam, 0.1).unwrap();
        let (ek, nk) = flow_to_ground_velocity(FlowVector::new(vx, vy) * k, &cam, 0.1).unwrap();
        prop_assert!((ek - k * e).abs() < 1e-9 && (nk - k * n).abs() < 1e-9);
    }

    #[test]
    fn spoof_ramps_commute(
        t in 0.0f64..500.0,
        a in (0.0f64..300.0, -3.0f64..3.0),
        b in (0.0f64..300.0, -3.0f64..3.0),
    ) {
        let profile = |(start, rate): (f64, f64)| SpoofProfile {
            start_epoch: start,
            ramp_rate: rate,
            affected_sat_ids: [SatId(2)].into_iter().collect(),
        };
        let m = PseudorangeMeas { sat_id: SatId(2), rho: 3.6e7, sigma: 1.0, epoch: t };
        let ab = apply_spoof(apply_spoof(m, &profile(a), t), &profile(b), t);
        let ba = apply_spoof(apply_spoof(m, &profile(b), t), &profile(a), t);
        prop_assert!((ab.rho - ba.rho).abs() < 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn horn_schunck_energy_never_increases(seed in any::<u64>(), dx in -1.5f64..1.5, dy in -1.5f64..1.5) {
        let (f0, f1) = translated_pair(&GroundTexture::new(seed, 12.0), 32, 32, (dx, dy), 0.1);
        let out = horn_schunck(&f0, &f1, 1.0, 60).unwrap();
        for w in out.energy.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12), "{} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn seeded_pseudoranges_repeat_bitwise() {
    let sat = SatelliteState {
        sat_id: SatId(3),
        pos: EcefCoord::new(2.0e7, 3.0e7, 1.0e7),
        vel: nalgebra::Vector3::zeros(),
        clock_bias: 0.0,
    };
    let user = EcefCoord::new(6.3e6, 1.0e5, 2.0e5);
    let budget = ErrorBudget {
        noise_sigma: 4.0,
        multipath_sigma: 1.0,
        ..Default::default()
    };
    let run = || {
        let mut streams = NoiseStreams::new(77);
        (0..50)
            .map(|k| synth_pseudorange(&sat, &user, 40.0, &budget, k % 3 == 0, k as f64, &mut streams).unwrap().rho.to_bits())
            .collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

#[test]
fn higher_elevation_means_smaller_deterministic_error() {
    let sat = SatelliteState {
        sat_id: SatId(1),
        pos: EcefCoord::new(4.2e7, 0.0, 0.0),
        vel: nalgebra::Vector3::zeros(),
        clock_bias: 0.0,
    };
    let user = EcefCoord::new(6.4e6, 0.0, 0.0);
    let budget = ErrorBudget {
        iono_zenith: 4.0,
        tropo_zenith: 2.3,
        ..Default::default()
    };
    let mut streams = NoiseStreams::new(0);
    let mut previous = f64::INFINITY;
    for el in [5.0, 10.0, 20.0, 45.0, 70.0, 89.0] {
        let m = synth_pseudorange(&sat, &user, el, &budget, false, 0.0, &mut streams).unwrap();
        let deterministic = m.rho - 3.56e7;
        assert!(deterministic < previous);
        previous = deterministic;
    }
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.min()
}

#[test]
fn updates_never_grow_covariance() {
    let origin = GeodeticCoord::from_degrees(15.4, 73.8, 0.0).unwrap();
    let user = geodetic_to_ecef(&origin);
    let sats: Vec<SatelliteState> = ofgnss_core::constellation::default_navic_constellation()
        .iter()
        .map(|el| propagate(el, 0.0).unwrap())
        .collect();
    let budget = ErrorBudget {
        noise_sigma: 3.0,
        ..Default::default()
    };
    let mut streams = NoiseStreams::new(5);
    let process = ProcessConfig::default();
    let mut s = NavState::from_fix(MotionModel::ConstantVelocity, user, 0.0, 0.0, &InitConfig::default());
    for k in 1..30 {
        s = ekf_predict(&s, 1.0, &process).unwrap();
        let meas: Vec<_> = sats
            .iter()
            .map(|sat| synth_pseudorange(sat, &user, 30.0, &budget, false, k as f64, &mut streams).unwrap())
            .collect();
        let (post, _) = ekf_update_epoch(&s, &meas, &sats).unwrap();
        assert!(min_eigenvalue(&(s.covariance() - post.covariance())) >= -1e-9);
        let flow = FlowVelocityMeas {
            v_east: 0.1,
            v_north: -0.2,
            sigma: 0.2,
            epoch: k as f64,
        };
        let (after_flow, _) = ekf_update_flow(&post, &flow, &origin).unwrap();
        assert!(min_eigenvalue(&(post.covariance() - after_flow.covariance())) >= -1e-9);
        after_flow.check_covariance().unwrap();
        s = after_flow;
    }
}
