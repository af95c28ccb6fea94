//! Property-based invariants across modules.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use proptest::prelude::*;
use rand_distr::{Distribution, StandardNormal};

use chan3d::antenna::{self, ArrayGeometry, PatternSpec, Polarization, PortMapping};
use chan3d::calib;
use chan3d::geom::{self, AngleVector, Rotation, Vec3};
use chan3d::linalg::CMatrix;
use chan3d::lsp::{Condition, LargeScaleParams};
use chan3d::rng::{substream, Stream};
use chan3d::ssp::{self, SspParams};
use chan3d::synth::{ChannelRealization, Tap};

fn angles() -> impl Strategy<Value = AngleVector> {
    (-PI..PI, 0.0..=PI).prop_map(|(a, z)| AngleVector::new(a, z).unwrap())
}

fn rotation() -> impl Strategy<Value = Rotation> {
    (-PI..PI, -PI..PI, -PI..PI).prop_map(|(a, b, c)| {
        Rotation::about_z(a)
            .then(&Rotation::about_y(b))
            .then(&Rotation::about_x(c))
    })
}

fn vec3() -> impl Strategy<Value = Vec3> {
    (-500.0..500.0, -500.0..500.0, 0.0..40.0).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn complex() -> impl Strategy<Value = Complex64> {
    (-2.0..2.0, -2.0..2.0).prop_map(|(re, im)| Complex64::new(re, im))
}

proptest! {
    #[test]
    fn unit_vectors_have_unit_norm(a in angles()) {
        prop_assert!((geom::unit_vector(a).norm() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn field_rotation_preserves_norm(fv in -3.0..3.0f64, fh in -3.0..3.0f64, r in rotation(), dir in angles()) {
        let (gv, gh) = geom::field_lcs_to_gcs(fv, fh, &r, dir);
        prop_assert!((gv.hypot(gh) - fv.hypot(fh)).abs() <= 1e-12);
    }

    #[test]
    fn los_angles_are_reciprocal(a in vec3(), b in vec3()) {
        prop_assume!((a - b).norm() > 1e-3);
        let (dep, arr) = geom::los_angles(a, b).unwrap();
        let (dep_r, arr_r) = geom::los_angles(b, a).unwrap();
        prop_assert_eq!(dep, arr_r);
        prop_assert_eq!(arr, dep_r);
    }

    #[test]
    fn doppler_is_linear(a in angles(), vx in -30.0..30.0f64, vy in -30.0..30.0f64, t in 0.0..2.0f64, c in -3.0..3.0f64) {
        let k = geom::wave_vector(2e9, a).unwrap();
        let v = Vec3::new(vx, vy, 0.0);
        let base = geom::doppler_phase(&k, v, t);
        let tol = 1e-9 * (1.0 + base.abs() * c.abs());
        prop_assert!((geom::doppler_phase(&k, v, c * t) - c * base).abs() <= tol);
        prop_assert!((geom::doppler_phase(&k, v * c, t) - c * base).abs() <= tol);
    }

    #[test]
    fn patterns_are_symmetric(phi in 0.0..180.0f64, dtheta in 0.0..80.0f64, tilt in -10.0..10.0f64) {
        let spec = PatternSpec { theta_tilt: tilt, ..PatternSpec::ELEMENT };
        let at = |az: f64, zen: f64| AngleVector::from_degrees(az, zen).unwrap();
        let z = 90.0 + tilt;
        prop_assert_eq!(antenna::element_gain_db(&spec, at(phi, z)), antenna::element_gain_db(&spec, at(-phi, z)));
        let up = antenna::element_gain_db(&spec, at(0.0, z - dtheta));
        let down = antenna::element_gain_db(&spec, at(0.0, z + dtheta));
        prop_assert!((up - down).abs() <= 1e-9);
        let itu = PatternSpec::itu_port(tilt);
        prop_assert_eq!(antenna::port_gain_itu_db(&itu, at(phi, z)), antenna::port_gain_itu_db(&itu, at(-phi, z)));
    }

    #[test]
    fn element_gain_never_exceeds_peak(dir in angles()) {
        prop_assert!(antenna::element_gain_db(&PatternSpec::ELEMENT, dir) <= PatternSpec::ELEMENT.g_max);
    }

    #[test]
    fn slant_split_conserves_power(g in 0.0..100.0f64, alpha in -PI..PI) {
        let (v, h) = antenna::slant_fields_36814(g, alpha);
        prop_assert!((v * v + h * h - g).abs() <= 1e-12 * (1.0 + g));
    }

    #[test]
    fn array_response_has_unit_modulus(rows in 1usize..6, cols in 1usize..4, d_v in 0.3..1.0f64, dir in angles()) {
        let lambda = geom::wavelength(2e9);
        let g = ArrayGeometry::panel(rows, cols, d_v, 0.5, Polarization::Cross, PortMapping::Column, lambda, 1.7).unwrap();
        let k = geom::wave_vector(2e9, dir).unwrap();
        for a in antenna::array_response(&g, &k) {
            prop_assert!((a.norm() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn virtualization_is_linear(
        a in complex(),
        b in complex(),
        h1 in proptest::collection::vec(complex(), 16),
        h2 in proptest::collection::vec(complex(), 16),
    ) {
        let lambda = geom::wavelength(2e9);
        let g = ArrayGeometry::panel(4, 1, 0.5, 0.5, Polarization::Cross, PortMapping::Column, lambda, 1.8).unwrap();
        let m1 = CMatrix::from_fn(8, 2, |r, c| h1[r * 2 + c]);
        let m2 = CMatrix::from_fn(8, 2, |r, c| h2[r * 2 + c]);
        let mix = CMatrix::from_fn(8, 2, |r, c| a * m1.get(r, c) + b * m2.get(r, c));
        let v1 = antenna::virtualize_all(&m1, &g).unwrap();
        let v2 = antenna::virtualize_all(&m2, &g).unwrap();
        let vm = antenna::virtualize_all(&mix, &g).unwrap();
        for r in 0..vm.rows() {
            for c in 0..vm.cols() {
                let want = a * v1.get(r, c) + b * v2.get(r, c);
                prop_assert!((vm.get(r, c) - want).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn attach_is_first_argmax(rsrp in proptest::collection::vec(-140.0..-40.0f64, 1..60), dup in any::<bool>()) {
        let mut rsrp = rsrp;
        if dup && rsrp.len() > 1 {
            let last = rsrp.len() - 1;
            rsrp[last] = rsrp[0];
        }
        let max = rsrp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let first = rsrp.iter().position(|&r| r == max).unwrap();
        prop_assert_eq!(calib::attach(&rsrp).unwrap(), first);
    }

    #[test]
    fn geometry_factor_ignores_common_offset(rsrp in proptest::collection::vec(-140.0..-40.0f64, 2..60), offset in -50.0..50.0f64) {
        let s = calib::attach(&rsrp).unwrap();
        let shifted: Vec<f64> = rsrp.iter().map(|r| r + offset).collect();
        prop_assert!((calib::geometry_factor_db(&rsrp, s) - calib::geometry_factor_db(&shifted, s)).abs() <= 1e-9);
    }

    #[test]
    fn cdf_is_monotone_in_unit_range(samples in proptest::collection::vec(-1e3..1e3f64, 1..200)) {
        let cdf = calib::empirical_cdf(&samples).unwrap();
        prop_assert_eq!(cdf.len(), samples.len());
        for w in cdf.windows(2) {
            prop_assert!(w[0].0 <= w[1].0 && w[0].1 <= w[1].1);
        }
        prop_assert!(cdf.iter().all(|&(_, p)| p > 0.0 && p <= 1.0));
        prop_assert_eq!(cdf.last().unwrap().1, 1.0);
    }

    #[test]
    fn eigenvalues_bounded_by_trace(h in proptest::collection::vec(complex(), 8), taps in 1usize..3) {
        let m = CMatrix::from_fn(2, 4, |r, c| h[r * 4 + c]);
        let r = ChannelRealization {
            frequency: 2e9,
            times: vec![0.0],
            taps: (0..taps).map(|_| Tap { delay: 0.0, matrices: vec![m.clone()] }).collect(),
        };
        let (l1, l2) = calib::top_eigenvalues(&r).unwrap();
        let trace = taps as f64 * m.frobenius_sq();
        prop_assert!(l1 >= 0.0 && l2 >= 0.0 && l2 <= l1);
        prop_assert!(l1 + l2 <= trace * (1.0 + 1e-12));
    }

    #[test]
    fn cluster_sets_hold_invariants(
        seed in any::<u64>(),
        cond in 0usize..3,
        log_ds in -7.5..-6.0f64,
        asa in 1.0..100.0f64,
        asd in 1.0..100.0f64,
        esa in 0.5..50.0f64,
        esd in 0.1..50.0f64,
        k_db in -5.0..15.0f64,
        dep in angles(),
    ) {
        let lsp = LargeScaleParams { sf_db: 0.0, k_factor_db: k_db, ds: 10f64.powf(log_ds), asa, asd, esa, esd };
        let mut params = SspParams::default_for(Condition::ALL[cond]);
        params.subclusters = seed % 2 == 0;
        let gen = || {
            let mut rng = substream(seed, Stream::SmallScale, &[1, 2]);
            ssp::generate_cluster_set(&params, &lsp, dep, dep.reversed(), &mut rng)
        };
        let cs = gen();
        prop_assert_eq!(&cs, &gen());
        prop_assert_eq!(cs.clusters[0].delay, 0.0);
        for w in cs.clusters.windows(2) {
            prop_assert!(w[0].delay <= w[1].delay);
        }
        prop_assert!((cs.total_power() - 1.0).abs() <= 1e-9);
        prop_assert!(cs.los_phases.iter().all(|p| (0.0..TAU).contains(p)));
        for sp in cs.clusters.iter().flat_map(|c| &c.subpaths) {
            prop_assert!(sp.polar.kappa > 0.0);
            prop_assert!(sp.polar.phases.iter().all(|p| (0.0..TAU).contains(p)));
            for a in [sp.angles.departure, sp.angles.arrival] {
                prop_assert!((0.0..=PI).contains(&a.zenith));
                prop_assert!((-PI..PI).contains(&a.azimuth));
            }
        }
    }
}

#[test]
fn normal_cdf_at_zero() {
    let mut rng = substream(2024, Stream::SmallScale, &[7]);
    let samples: Vec<f64> = (0..10_000)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let cdf = calib::empirical_cdf(&samples).unwrap();
    let below = cdf
        .iter()
        .filter(|&&(v, _)| v <= 0.0)
        .map(|&(_, p)| p)
        .next_back()
        .unwrap_or(0.0);
    assert!((below - 0.5).abs() <= 0.015, "{below}");
}
