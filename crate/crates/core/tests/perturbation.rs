use heisenberg_semigroups::generators::GeneratorSpec;
use heisenberg_semigroups::grid::{fourier_forward, fourier_inverse, GridSpec, SampledField, Space};
use heisenberg_semigroups::perturbation::{
    correction_term, correction_term_space, fourier_remainder_check, remainder_parts, resolvent_first_order_hat,
    resolvent_first_order_space, resolvent_perturbation_with,
};
use heisenberg_semigroups::semigroups::{abelian_semigroup, resolvent, FiberGenerator};
use heisenberg_semigroups::C64;

#[test]
fn correction_frequency_and_space_routes_agree() {
    let g = GridSpec::cubic(1, 48, 24.0).unwrap();
    let spec = GeneratorSpec::gamma_variance();
    let a = correction_term(&spec, 1.0, &g).unwrap();
    let b = correction_term_space(&spec, 1.0, &g).unwrap();
    let d = a.sub(&b).unwrap().sup_norm() / a.sup_norm();
    println!("correction routes: {d:.3e}");
    assert!(d < 1e-8);
    assert!(a.max_imag() < 1e-9 * a.sup_norm());
    let z = C64::new(1.0, 0.0);
    let fa = fourier_inverse(&resolvent_first_order_hat(&spec, z, &g).unwrap()).unwrap();
    let fb = resolvent_first_order_space(&spec, z, &g).unwrap();
    let d = fa.sub(&fb).unwrap().sup_norm() / fa.sup_norm();
    println!("resolvent first-order routes: {d:.3e}");
    assert!(d < 1e-7);
}

/// Relative sup-difference in frequency space, off the `x3` Nyquist plane.
fn rel_off_nyquist(a: &SampledField, b: &SampledField) -> f64 {
    let (ah, bh) = (fourier_forward(a).unwrap(), fourier_forward(b).unwrap());
    let g = a.grid();
    let nyq = g.frequency(2, 0);
    let (mut num, mut den) = (0.0f64, 0.0f64);
    for i in 0..g.len() {
        if g.point(i, Space::Frequency)[2] != nyq {
            num = num.max((ah.values()[i] - bh.values()[i]).norm());
            den = den.max(bh.values()[i].norm());
        }
    }
    num / den
}

#[test]
fn first_order_terms_are_theta_derivatives() {
    // d/dtheta at 0 of mu_t^theta is -correction, of B_z^theta is F
    let g = GridSpec::cubic(1, 16, 8.0).unwrap();
    let spec = GeneratorSpec::gamma_variance();
    let corr = correction_term(&spec, 1.0, &g).unwrap().scale(C64::new(-1.0, 0.0));
    let nu = abelian_semigroup(&spec, 1.0, &g).unwrap().field;
    let z = C64::new(4.0, 0.0);
    let b0 = resolvent(&spec, z, 0.0, &g).unwrap();
    let f = fourier_inverse(&resolvent_first_order_hat(&spec, z, &g).unwrap()).unwrap();
    let mut errs = Vec::new();
    for theta in [1e-2, 1e-3] {
        let gen = FiberGenerator::new(&spec, &g, theta).unwrap();
        let k = C64::new(1.0 / theta, 0.0);
        let s = gen.semigroup(1.0).unwrap().sub(&nu).unwrap().scale(k);
        let r = gen.resolvent(z).unwrap().sub(&b0).unwrap().scale(k);
        errs.push((rel_off_nyquist(&s, &corr), rel_off_nyquist(&r, &f)));
    }
    println!("first-order errors at theta = 1e-2, 1e-3: {errs:?}");
    assert!(errs[1].0 < 5e-3 && errs[1].1 < 5e-3);
    assert!(errs[0].0 / errs[1].0 > 8.0 && errs[0].1 / errs[1].1 > 8.0);
}

#[test]
fn theta_degenerate_controls() {
    let g = GridSpec::cubic(1, 12, 6.0).unwrap();
    let spec = GeneratorSpec::gamma_variance();
    let gen0 = FiberGenerator::new(&spec, &g, 0.0).unwrap();
    let p = remainder_parts(&gen0, &spec, 1.0).unwrap();
    assert!(p.gap().unwrap().sup_norm() < 1e-8 * p.mu.sup_norm());
    assert!(p.remainder.sub(&p.correction).unwrap().sup_norm() < 1e-8 * p.correction.sup_norm());
    let rep = resolvent_perturbation_with(&gen0, &spec, C64::new(1.0, 0.0)).unwrap();
    // with B1 = B0 the error term is -F
    assert!((rep.error_sup - rep.first_order_sup).abs() < 1e-8 * rep.first_order_sup);
}

#[test]
fn heisenberg_remainder_is_real_and_massless() {
    let g = GridSpec::cubic(1, 12, 6.0).unwrap();
    let spec = GeneratorSpec::gamma_variance();
    let gen = FiberGenerator::new(&spec, &g, 1.0).unwrap();
    let p = remainder_parts(&gen, &spec, 1.0).unwrap();
    assert!(p.remainder.max_imag() < 1e-8 * p.remainder.sup_norm());
    let h = fourier_forward(&p.remainder).unwrap();
    assert!(h.values()[g.origin_index()].norm() < 1e-6);
}

#[test]
fn fourier_remainder_fit_reports() {
    let g = GridSpec::cubic(1, 12, 6.0).unwrap();
    let spec = GeneratorSpec::gamma_variance();
    let rep = fourier_remainder_check(&spec, &[0.25, 1.0], &g, 1).unwrap();
    assert_eq!(rep.fits.len(), 8);
    assert!(rep.fits.iter().all(|f| f.c.is_finite() && f.c > 0.0));
    assert!(rep.h_at_zero < 1e-6);
    assert!(fourier_remainder_check(&spec, &[1.0], &g, 2).is_err());
}
