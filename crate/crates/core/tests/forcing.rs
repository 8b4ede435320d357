use magrelax::eigenbasis::{enumerate_basis, Flavor};
use magrelax::forcing::{mode_streams, wiener_increment, ForcingSpec, Preset, RngStream};
use magrelax::spectral::GridSpec;
use magrelax::stats::ks_two_sample;

fn draws(seed: u64, traj: u64, mode: u64, n: usize) -> Vec<f64> {
    let mut s = RngStream::new(seed, traj, mode);
    (0..n).map(|_| s.normal()).collect()
}

fn moments(xs: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let m1 = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| x * x).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| x.powi(4)).sum::<f64>() / n;
    (m1, m2, m4)
}

#[test]
fn normals_have_gaussian_moments() {
    let n = 200_000;
    let xs = draws(7, 0, 0, n);
    let (m1, m2, m4) = moments(&xs);
    let nf = n as f64;
    // SEs of the sample mean, second and fourth moment of N(0, 1)
    assert!(m1.abs() < 4.0 / nf.sqrt(), "mean {m1}");
    assert!((m2 - 1.0).abs() < 4.0 * 2f64.sqrt() / nf.sqrt(), "second moment {m2}");
    assert!((m4 - 3.0).abs() < 4.0 * 96f64.sqrt() / nf.sqrt(), "fourth moment {m4}");
    // both halves of the Box-Muller pair are used by the noise path
    let mut s = RngStream::new(7, 0, 1);
    let ys: Vec<f64> = (0..n / 2).map(|_| s.normal_pair().1).collect();
    let (_, v2, _) = moments(&ys);
    assert!((v2 - 1.0).abs() < 4.0 * 2f64.sqrt() / (ys.len() as f64).sqrt());
}

#[test]
fn streams_are_disjoint() {
    let n = 20_000;
    let base = draws(3, 0, 0, n);
    for (seed, traj, mode) in [(4, 0, 0), (3, 1, 0), (3, 0, 1)] {
        let other = draws(seed, traj, mode, n);
        assert_ne!(base[..8], other[..8]);
        let corr = base.iter().zip(&other).map(|(a, b)| a * b).sum::<f64>() / n as f64;
        assert!(corr.abs() < 4.0 / (n as f64).sqrt(), "({seed}, {traj}, {mode}) corr {corr}");
        let (_, p) = ks_two_sample(&base, &other);
        assert!(p > 1e-4, "({seed}, {traj}, {mode}) KS p = {p}");
    }
}

#[test]
fn seek_reproduces_later_draws() {
    let xs = draws(11, 2, 5, 50);
    let mut s = RngStream::new(11, 2, 5);
    s.seek(37);
    assert_eq!(s.counter(), 37);
    assert_eq!(s.normal(), xs[37]);
    s.seek(3);
    assert_eq!(s.normal(), xs[3]);
}

#[test]
fn increment_coefficients_have_variance_b_squared_dt() {
    let basis = enumerate_basis(2, 2.0, Flavor::Stokes).unwrap();
    let spec = ForcingSpec::from_preset(basis, Preset::PowerLaw { c: 1.5, q: 1.0, shells: 2 }, None).unwrap();
    let grid = GridSpec::new(2, 8).unwrap();
    let modes = &spec.enumeration.modes;
    let norm = modes[0].project(&modes[0].field(grid).unwrap());
    let dt = 0.3;
    let reps = 4000;
    let mut streams = mode_streams(&spec, 1, 0);
    let mut sums = vec![0.0; modes.len()];
    let mut cross = 0.0;
    for _ in 0..reps {
        let w = wiener_increment(&spec, grid, dt, &mut streams).unwrap();
        let c: Vec<f64> = modes.iter().map(|m| m.project(&w) / norm).collect();
        for (s, v) in sums.iter_mut().zip(&c) {
            *s += v * v;
        }
        cross += c[0] * c[1];
    }
    for (j, s) in sums.iter().enumerate() {
        let want = spec.amplitudes[j].powi(2) * dt;
        let got = s / reps as f64;
        // var of a chi-square(1) mean is 2 / reps
        assert!((got / want - 1.0).abs() < 4.0 * (2.0 / reps as f64).sqrt(), "mode {j}: {got} vs {want}");
    }
    let scale = spec.amplitudes[0] * spec.amplitudes[1] * dt;
    assert!((cross / reps as f64 / scale).abs() < 4.0 / (reps as f64).sqrt());
}

#[test]
fn constants_match_direct_sums() {
    let basis = enumerate_basis(2, 5.0, Flavor::Stokes).unwrap();
    let spec = ForcingSpec::from_preset(basis, Preset::PowerLaw { c: 2.0, q: 0.5, shells: 3 }, None).unwrap();
    for s in [-1.0, -0.5, 0.0, 1.0] {
        let direct: f64 = spec
            .enumeration
            .modes
            .iter()
            .zip(&spec.amplitudes)
            .map(|(m, b)| m.lambda.powf(s) * b * b)
            .sum();
        assert!((spec.c_s(s) - direct).abs() < 1e-12 * direct);
    }
    // shells 1, 2, 4 have 4 modes each and b_j^2 = 4 / lambda_j
    assert!((spec.c_s(0.0) - 16.0 * 1.75).abs() < 1e-12);
}

#[test]
fn constants_do_not_depend_on_mode_order() {
    let basis = enumerate_basis(3, 3.0, Flavor::Beltrami).unwrap();
    let spec = ForcingSpec::from_preset(basis, Preset::PowerLaw { c: 1.0, q: 0.75, shells: 3 }, Some(1)).unwrap();
    let mut rev = spec.clone();
    rev.enumeration.modes.reverse();
    rev.amplitudes.reverse();
    for s in [-1.0, -0.5, 0.0, 2.0] {
        assert!((spec.c_s(s) - rev.c_s(s)).abs() < 1e-12 * spec.c_s(s));
    }
    let (h, hr) = (spec.helicity_constant().unwrap(), rev.helicity_constant().unwrap());
    assert!((h - hr).abs() < 1e-12 * h.abs());
}
