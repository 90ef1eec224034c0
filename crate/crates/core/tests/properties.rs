use std::f64::consts::TAU;

use kacrice::field_models::{
    sample_realization, ChiSquareField, Field, FieldModel, MicrolensRealization, MicrolensSystem,
    ShotNoiseModel, SpectralGaussian1D, SpectralGaussian2D,
};
use kacrice::integral_geometry::{crofton_identity_mc, normal_jacobian, JacobianMatrix};
use kacrice::kac_rice::{
    ae_level_consistency, conditional_jacobian_expectation, level_density, shotnoise_rhs,
    weighted_kacrice_rhs, AeSpec, Bump, LevelGrid, WeightSpec,
};
use kacrice::level_set::{count_roots_1d, kac_counter};
use kacrice::{BoxDomain, Exec};
use proptest::prelude::*;

fn band(n: usize) -> FieldModel {
    FieldModel::SpectralGaussian1d(SpectralGaussian1D::band(n, 0.5, 1.5, 1.0))
}

fn chi2() -> FieldModel {
    FieldModel::ChiSquare(ChiSquareField::new(2, band(8)))
}

fn shot_noise() -> ShotNoiseModel {
    ShotNoiseModel::new(1, 1.0, BoxDomain::interval(0.0, 12.0))
}

fn central_difference(f: &dyn Field, t: &[f64], h: f64) -> Vec<f64> {
    let (d, dim) = (f.output_dim(), f.input_dim());
    let mut out = vec![0.0; d * dim];
    for col in 0..dim {
        let mut a = t.to_vec();
        let mut b = t.to_vec();
        a[col] += h;
        b[col] -= h;
        let (fa, fb) = (f.eval(&a).unwrap(), f.eval(&b).unwrap());
        for row in 0..d {
            out[row * dim + col] = (fa.value[row] - fb.value[row]) / (2.0 * h);
        }
    }
    out
}

fn check_gradient(f: &dyn Field, t: &[f64]) -> Result<(), TestCaseError> {
    let jet = f.eval(t).unwrap();
    let fd = central_difference(f, t, 1e-5);
    let scale = jet.jacobian.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for (a, b) in jet.jacobian.iter().zip(&fd) {
        prop_assert!((a - b).abs() <= 1e-6 * scale, "{a} vs {b}");
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn spectral_gradients_match_finite_differences(seed in any::<u64>(), t in 0.0..20.0f64, s in 0.0..1.0f64) {
        let r = sample_realization(&band(12), seed).unwrap();
        check_gradient(&r, &[t])?;
        let planar = FieldModel::SpectralGaussian2d(SpectralGaussian2D::isotropic(4.0, 8, 1.0));
        let r = sample_realization(&planar, seed).unwrap();
        check_gradient(&r, &[s, t / 20.0])?;
        let r = sample_realization(&chi2(), seed).unwrap();
        check_gradient(&r, &[t])?;
    }

    #[test]
    fn shot_noise_gradients_and_locality(seed in any::<u64>(), t in 1.0..11.0f64) {
        let r = sample_realization(&FieldModel::ShotNoise(shot_noise()), seed).unwrap();
        check_gradient(&r, &[t])?;
        let sn = r.as_shot_noise().unwrap();
        let local = sn.localized(&[t]);
        prop_assert!(local.points().len() <= sn.points().len());
        prop_assert_eq!(local.eval(&[t]).unwrap(), sn.eval(&[t]).unwrap());
    }

    #[test]
    fn microlens_quadratic_form(
        seed in any::<u64>(),
        x in -2.0..2.0f64,
        y in -2.0..2.0f64,
        angle in 0.0..TAU,
    ) {
        let sys = MicrolensSystem::new(2.0, 0.0, 0.5, 3, 1.0);
        let r = sample_realization(&FieldModel::Microlens(sys), seed).unwrap();
        let lens = r.as_microlens().unwrap();
        let p = [x, y];
        prop_assume!(lens.stars().iter().all(|s| (s[0] - x).hypot(s[1] - y) > 1e-3));
        check_gradient(lens, &p)?;
        // ⟨J v, v⟩ = c + 2m Σ (2⟨ẑ, v⟩² − 1) / ‖z‖²
        let v = [angle.cos(), angle.sin()];
        let mut expected = lens.linear_coefficient();
        for s in lens.stars() {
            let z = [x - s[0], y - s[1]];
            let r2 = z[0] * z[0] + z[1] * z[1];
            let c = (z[0] * v[0] + z[1] * v[1]).powi(2) / r2;
            expected += 2.0 * lens.mass() * (2.0 * c - 1.0) / r2;
        }
        let got = lens.jacobian_quadratic_form(p, v).unwrap();
        prop_assert!((got - expected).abs() <= 1e-9 * expected.abs().max(1.0));
    }

    #[test]
    fn crofton_identity_tracks_normal_jacobian(entries in prop::collection::vec(-2.0..2.0f64, 6), seed in any::<u64>()) {
        let m = JacobianMatrix::new(2, 3, entries).unwrap();
        let exact = normal_jacobian(&m);
        let e = crofton_identity_mc(&m, 20_000, seed).unwrap();
        prop_assert!((e.value - exact).abs() <= 4.0 * e.std_error + 1e-9, "{} ± {} vs {exact}", e.value, e.std_error);
    }

    #[test]
    fn chi_square_density_decreases(a in 0.05..6.0f64, b in 0.05..6.0f64) {
        prop_assume!((a - b).abs() > 1e-6);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let m = chi2();
        prop_assert!(level_density(&m, &[0.0], &[lo]).unwrap() > level_density(&m, &[0.0], &[hi]).unwrap());
    }

    #[test]
    fn gaussian_density_peaks_at_the_mean(u in -4.0..4.0f64, t in 0.0..10.0f64) {
        prop_assume!(u.abs() > 1e-9);
        let m = band(6);
        prop_assert!(level_density(&m, &[t], &[0.0]).unwrap() > level_density(&m, &[t], &[u]).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn conditional_jacobian_ignores_the_level(u in -3.0..3.0f64, seed in any::<u64>()) {
        let m = FieldModel::SpectralGaussian2d(SpectralGaussian2D::isotropic(3.0, 7, 1.0));
        let at0 = conditional_jacobian_expectation(&m, &[0.3, 0.4], &[0.0], 20_000, seed).unwrap();
        let atu = conditional_jacobian_expectation(&m, &[0.3, 0.4], &[u], 20_000, seed ^ 1).unwrap();
        let se = at0.std_error.hypot(atu.std_error);
        prop_assert!((at0.value - atu.value).abs() <= 4.0 * se + 1e-12);
    }

    #[test]
    fn weights_are_additive(u in -2.0..2.0f64, seed in any::<u64>()) {
        let m = band(10);
        let dom = BoxDomain::interval(0.0, 10.0);
        let sum = WeightSpec::Sum { terms: vec![WeightSpec::UpCrossing, WeightSpec::DownCrossing] };
        let a = weighted_kacrice_rhs(&m, &dom, &[u], &sum, 1000, seed).unwrap();
        let up = weighted_kacrice_rhs(&m, &dom, &[u], &WeightSpec::UpCrossing, 1000, seed).unwrap();
        let down = weighted_kacrice_rhs(&m, &dom, &[u], &WeightSpec::DownCrossing, 1000, seed).unwrap();
        let se = (a.total_error.powi(2) + up.total_error.powi(2) + down.total_error.powi(2)).sqrt();
        prop_assert!((a.value - up.value - down.value).abs() <= 4.0 * se + 1e-9 * a.value);
    }
}

#[test]
fn truncation_bound_dominates_refinement() {
    let m = shot_noise();
    let dom = BoxDomain::interval(1.0, 11.0);
    for p in [2, 4, 6] {
        let a = shotnoise_rhs(&m, &dom, 0.5, Some(p), 4000, 3).unwrap();
        let b = shotnoise_rhs(&m, &dom, 0.5, Some(p + 2), 4000, 3).unwrap();
        assert!(a.truncation_error > 0.0);
        assert!((b.value - a.value).abs() <= a.total_error, "p={p}: {} → {} (err {})", a.value, b.value, a.total_error);
    }
}

#[test]
fn every_level_matches_almost_every_level() {
    let spec = AeSpec {
        levels: LevelGrid { lo: -1.5, hi: 1.5, n: 60 },
        bump: Bump { center: 0.0, half_width: 1.5 },
        cells: 512,
        realizations: 400,
    };
    for model in [band(8), chi2()] {
        let spec = if matches!(model, FieldModel::ChiSquare(_)) {
            AeSpec {
                levels: LevelGrid { lo: 0.0, hi: 3.0, n: 60 },
                bump: Bump { center: 1.5, half_width: 1.4 },
                ..spec.clone()
            }
        } else {
            spec.clone()
        };
        let r = ae_level_consistency(&model, &BoxDomain::interval(0.0, 10.0), &spec, 2000, 5, Exec::default()).unwrap();
        assert!(r.agrees(3.0, 1e-9), "{:?} vs {:?}", r.lhs, r.rhs_integral);
    }
}

#[test]
fn supercritical_lens_is_not_negative_definite() {
    // the bound ⟨J v, v⟩ < 0 fails next to a star for v along x − ξ
    let lens = MicrolensRealization::new(-1.0, 0.5, vec![[0.0, 0.0]]);
    let q = lens.jacobian_quadratic_form([0.5, 0.0], [1.0, 0.0]).unwrap();
    assert!((q - 3.0).abs() < 1e-12, "{q}");
    // and holds for v orthogonal to it
    let q = lens.jacobian_quadratic_form([0.5, 0.0], [0.0, 1.0]).unwrap();
    assert!((q + 5.0).abs() < 1e-12, "{q}");
}

#[test]
fn kac_counter_converges_monotonically() {
    // the counter is exact on monotone stretches; its error comes from
    // turning points inside the window, so single paths jump around and the
    // corpus mean is what decreases
    let dom = BoxDomain::interval(0.0, 20.0);
    let deltas = [0.8, 0.4, 0.2, 0.1, 0.05];
    let mut mean_gap = vec![0.0; deltas.len()];
    let corpus = 20;
    for seed in 0..corpus {
        let r = sample_realization(&band(12), seed).unwrap();
        let n = count_roots_1d(&r, &dom, 0.3, 4096).unwrap().len() as f64;
        for (g, &d) in mean_gap.iter_mut().zip(&deltas) {
            *g += (kac_counter(&r, &dom, &[0.3], d, 1 << 18).unwrap() - n).abs() / corpus as f64;
        }
    }
    assert!(mean_gap.windows(2).all(|w| w[1] < w[0]), "{mean_gap:?}");
    // turning points within δ of the level occur at rate O(δ)
    assert!(mean_gap[4] < 0.25 * mean_gap[0], "{mean_gap:?}");
}

#[test]
fn stationary_mean_and_variance_do_not_drift() {
    let m = band(15);
    let n = 4000;
    let ts = [0.0, 3.7, 11.2];
    let mut stats = Vec::new();
    for &t in &ts {
        let xs: Vec<f64> = (0..n)
            .map(|i| sample_realization(&m, i).unwrap().eval(&[t]).unwrap().value[0])
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        stats.push((mean, var));
    }
    let se_mean = (1.0 / n as f64).sqrt();
    let se_var = (2.0 / n as f64).sqrt();
    for (mean, var) in stats {
        assert!(mean.abs() <= 3.0 * se_mean, "{mean}");
        assert!((var - 1.0).abs() <= 3.0 * se_var, "{var}");
    }
}
