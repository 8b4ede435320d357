use magrelax::eigenbasis::{curl_inv_basis, enumerate_basis, Flavor};
use magrelax::spectral::{random_field, GridSpec, SpectralField};
use proptest::prelude::*;
use rand::SeedableRng;

/// Random field restricted to `|k|^2 <= lambda_max`.
fn shell_limited(grid: GridSpec, lambda_max: f64, seed: u64) -> SpectralField {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let full = random_field(grid, lambda_max.sqrt().ceil() as i64, &mut rng);
    let mut out = SpectralField::zeros(grid);
    for (k, v) in full.support(0.0) {
        if (k.norm_sq() as f64) <= lambda_max {
            out.set_mode(&k, &v[..grid.dim()]).unwrap();
        }
    }
    out
}

fn max_diff(a: &SpectralField, b: &SpectralField) -> f64 {
    a.sub(b).max_abs()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn stokes_basis_is_complete_below_cutoff(seed in any::<u64>(), d in 2usize..=3) {
        let lambda_max = if d == 2 { 8.0 } else { 5.0 };
        let grid = GridSpec::new(d, 16).unwrap();
        let b = shell_limited(grid, lambda_max, seed);
        let basis = enumerate_basis(d, lambda_max, Flavor::Stokes).unwrap();
        let norm = basis.modes[0].project(&basis.modes[0].field(grid).unwrap());
        let coeffs: Vec<f64> = basis.project(&b).iter().map(|c| c / norm).collect();
        let back = basis.synthesize(grid, &coeffs).unwrap();
        prop_assert!(max_diff(&back, &b) < 1e-12 * b.max_abs().max(1.0));
        // Parseval in the basis
        let energy: f64 = coeffs.iter().map(|c| c * c).sum::<f64>() * norm;
        prop_assert!((energy - b.norm_sq()).abs() < 1e-10 * b.norm_sq());
    }

    #[test]
    fn beltrami_and_stokes_span_the_same_space(seed in any::<u64>()) {
        let grid = GridSpec::new(3, 16).unwrap();
        let b = shell_limited(grid, 6.0, seed);
        for flavor in [Flavor::Stokes, Flavor::Beltrami] {
            let basis = enumerate_basis(3, 6.0, flavor).unwrap();
            let norm = basis.modes[0].project(&basis.modes[0].field(grid).unwrap());
            let coeffs: Vec<f64> = basis.project(&b).iter().map(|c| c / norm).collect();
            let back = basis.synthesize(grid, &coeffs).unwrap();
            prop_assert!(max_diff(&back, &b) < 1e-12 * b.max_abs().max(1.0));
        }
    }
}

#[test]
fn gram_matrix_is_diagonal_and_uniform() {
    for (d, flavor, lambda_max) in [(2, Flavor::Stokes, 10.0), (3, Flavor::Stokes, 3.0), (3, Flavor::Beltrami, 3.0)] {
        let grid = GridSpec::new(d, 16).unwrap();
        let basis = enumerate_basis(d, lambda_max, flavor).unwrap();
        let fields: Vec<SpectralField> = basis.modes.iter().map(|m| m.field(grid).unwrap()).collect();
        let norm = fields[0].norm_sq();
        for (i, fi) in fields.iter().enumerate() {
            for (j, fj) in fields.iter().enumerate() {
                let g = fi.inner(fj) / norm;
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g - want).abs() < 1e-12, "{flavor:?} d={d} G[{i}][{j}] = {g}");
            }
        }
    }
}

#[test]
fn flux_functions_are_orthonormal() {
    let grid = GridSpec::new(2, 16).unwrap();
    let basis = enumerate_basis(2, 8.0, Flavor::Stokes).unwrap();
    let phis = curl_inv_basis(&basis, grid).unwrap();
    let v = grid.volume();
    let n0 = basis.modes[0].field(grid).unwrap().norm_sq() / v;
    for (i, a) in phis.iter().enumerate() {
        for (j, b) in phis.iter().enumerate() {
            let g = a.inner(b) / v / n0;
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((g - want).abs() < 1e-12, "({i}, {j}) = {g}");
        }
    }
    let b3 = enumerate_basis(3, 2.0, Flavor::Stokes).unwrap();
    assert!(curl_inv_basis(&b3, GridSpec::new(3, 8).unwrap()).is_err());
}

#[test]
fn ordering_is_by_eigenvalue_then_wavevector() {
    let basis = enumerate_basis(3, 6.0, Flavor::Beltrami).unwrap();
    for w in basis.modes.windows(2) {
        assert!(w[0].lambda < w[1].lambda || (w[0].lambda == w[1].lambda && w[0].k <= w[1].k));
    }
    let idx: Vec<usize> = basis.modes.iter().map(|m| m.index).collect();
    assert_eq!(idx, (1..=basis.len()).collect::<Vec<_>>());
}
