use heisenberg_semigroups::generators::{realize_on_grid, symbol_on_grid, GeneratorSpec};
use heisenberg_semigroups::grid::{fourier_forward, sample, GridSpec, SampledField, Space};
use heisenberg_semigroups::group_conv::{convolve, ConvMethod, ThetaLaw};
use heisenberg_semigroups::linalg::{self, CVec};
use heisenberg_semigroups::semigroups::{
    abelian_semigroup, build_generator_matrix, compose_inverse, contour_bound_check, contour_semigroup,
    contour_semigroup_theta, group_symmetrize, heisenberg_semigroup_expm, resolvent, semigroup_expm, ContourSpec,
    FiberGenerator,
};
use heisenberg_semigroups::C64;

fn grid12() -> GridSpec {
    GridSpec::cubic(1, 12, 6.0).unwrap()
}

fn rel(a: &SampledField, b: &SampledField) -> f64 {
    a.sub(b).unwrap().sup_norm() / b.sup_norm()
}

#[test]
fn fourier_route_matches_abelian_expm() {
    let g = grid12();
    for spec in [GeneratorSpec::gamma_variance(), GeneratorSpec::gamma_full()] {
        let f = abelian_semigroup(&spec, 1.0, &g).unwrap();
        let e = semigroup_expm(&spec, 1.0, &g, 0.0).unwrap();
        let d = rel(&e.field, &f.field);
        println!("{}: fourier vs expm(theta=0) {d:.3e}", spec.name);
        assert!(d < 1e-8);
    }
}

#[test]
fn abelian_matrix_has_plane_wave_eigenvectors() {
    let g = GridSpec::cubic(1, 8, 4.0).unwrap();
    let spec = GeneratorSpec::gamma_full();
    let a = build_generator_matrix(&spec, &g, 0.0).unwrap();
    let psi = symbol_on_grid(&spec, &g);
    for k in [0usize, 37, 200, 511] {
        let xi = g.point(k, Space::Frequency);
        let wave = sample(|x| C64::from_polar(1.0, x.iter().zip(&xi).map(|(a, b)| a * b).sum()), &g).unwrap();
        let v = CVec::from_vec(wave.values().to_vec());
        let out = &a * &v;
        let want = &v * C64::new(-psi.values()[k].re, 0.0);
        assert!((out - want).camax() < 1e-8, "mode {k}");
    }
}

#[test]
fn generator_sums_match_psi_at_zero() {
    let g = grid12();
    let spec = GeneratorSpec::gamma_full();
    let psi0 = spec.psi_on(&[0.0; 3], &g.spacings());
    for theta in [0.0, 1.0] {
        let a = build_generator_matrix(&spec, &g, theta).unwrap();
        let n = g.len();
        let mut worst = 0.0f64;
        for i in 0..n {
            let r: C64 = a.row(i).iter().sum();
            let c: C64 = a.column(i).iter().sum();
            worst = worst.max((r + psi0).norm()).max((c + psi0).norm());
        }
        println!("theta={theta}: row/column sums vs -psi(0): {worst:.3e}");
        assert!(worst < 1e-9);
    }
}

#[test]
fn dense_and_fiber_exponentials_agree() {
    let g = GridSpec::cubic(1, 8, 4.0).unwrap();
    let spec = GeneratorSpec::gamma_variance();
    let a = build_generator_matrix(&spec, &g, 1.0).unwrap();
    let e = linalg::expm(&(a * C64::new(0.5, 0.0))).unwrap();
    let delta = SampledField::delta(&g);
    let dense = e * CVec::from_vec(delta.values().to_vec());
    let fib = heisenberg_semigroup_expm(&spec, 0.5, &g).unwrap();
    let diff = dense.iter().zip(fib.field.values()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(diff < 1e-10 * fib.field.sup_norm());
}

#[test]
fn symmetrized_generator_is_hermitian() {
    let g = grid12();
    let p = group_symmetrize(&realize_on_grid(&GeneratorSpec::gamma_variance(), &g)).unwrap();
    let a = FiberGenerator::from_kernel(&p, 1.0).unwrap().dense();
    let dev = (&a - a.adjoint()).camax() / a.camax();
    let raw = build_generator_matrix(&GeneratorSpec::gamma_variance(), &g, 1.0).unwrap();
    let raw_dev = (&raw - raw.adjoint()).camax() / raw.camax();
    println!("hermitian deviation: symmetrized {dev:.3e}, radial kernel {raw_dev:.3e}");
    assert!(dev < 1e-9);
}

#[test]
fn heisenberg_semigroup_law_and_diagnostics() {
    let g = grid12();
    let spec = GeneratorSpec::gamma_variance();
    let a = heisenberg_semigroup_expm(&spec, 0.3, &g).unwrap();
    let b = heisenberg_semigroup_expm(&spec, 0.7, &g).unwrap();
    let c = heisenberg_semigroup_expm(&spec, 1.0, &g).unwrap();
    let ab = convolve(ThetaLaw::heisenberg(), &a.field, &b.field, ConvMethod::Spectral).unwrap();
    let law = rel(&ab, &c.field);
    println!("semigroup law {law:.3e}; diagnostics {:?}", c.diagnostics);
    assert!(law < 1e-6);
    for r in [&a, &b, &c] {
        assert!(r.diagnostics.subprobabilistic());
        assert!(r.diagnostics.positive());
        assert!((r.diagnostics.mass - 1.0).abs() < 1e-10);
    }
    let full = heisenberg_semigroup_expm(&GeneratorSpec::gamma_full(), 1.0, &g).unwrap();
    assert!((full.diagnostics.mass - (-1.0f64).exp()).abs() < 1e-10);
}

#[test]
fn semigroup_is_continuous_at_zero() {
    let g = grid12();
    let delta = SampledField::delta(&g);
    let mu = heisenberg_semigroup_expm(&GeneratorSpec::gamma_variance(), 1e-3, &g).unwrap();
    let l1 = mu.field.sub(&delta).unwrap().values().iter().map(|v| v.norm()).sum::<f64>() * g.cell_volume();
    println!("|mu_0.001 - delta|_1 = {l1:.3e}");
    assert!(l1 < 1e-2);
}

#[test]
fn contour_route_matches_expm() {
    let g = grid12();
    let spec = GeneratorSpec::gamma_variance();
    for t in [0.5, 1.0] {
        let e = heisenberg_semigroup_expm(&spec, t, &g).unwrap();
        let c = contour_semigroup(&spec, t, &g, &ContourSpec::new(t).unwrap()).unwrap();
        let d = rel(&c.field, &e.field);
        println!("t={t}: contour vs expm {d:.3e}; {:?}", c.contour);
        assert!(d < 1e-4);
    }
}

#[test]
fn abelian_contour_reproduces_exponential() {
    let g = grid12();
    let spec = GeneratorSpec::gamma_full();
    let c = contour_semigroup_theta(&spec, &g, 0.0, &ContourSpec::new(1.0).unwrap()).unwrap();
    let hat = fourier_forward(&c.field).unwrap();
    let psi = symbol_on_grid(&spec, &g);
    let err = hat.values().iter().zip(psi.values()).map(|(h, p)| (h - (-p.re).exp()).norm()).fold(0.0, f64::max);
    println!("theta=0 contour vs e^(-psi): {err:.3e}");
    assert!(err < 1e-5);
}

#[test]
fn symmetric_generator_gives_symmetric_measures() {
    let g = grid12();
    let p = group_symmetrize(&realize_on_grid(&GeneratorSpec::gamma_variance(), &g)).unwrap();
    let mu = FiberGenerator::from_kernel(&p, 1.0).unwrap().semigroup(1.0).unwrap();
    let inv = compose_inverse(ThetaLaw::heisenberg(), &mu).unwrap();
    let d = rel(&inv, &mu);
    println!("mu_1 vs mu_1 o inv: {d:.3e}");
    assert!(d < 1e-8);
}

#[test]
fn resolvent_oracles_and_bound() {
    let g = grid12();
    let spec = GeneratorSpec::gamma_variance();
    let psi = symbol_on_grid(&spec, &g);
    let z = C64::new(1.0, 0.5);
    let b0 = fourier_forward(&resolvent(&spec, z, 0.0, &g).unwrap()).unwrap();
    let err = b0.values().iter().zip(psi.values()).map(|(b, p)| (b - 1.0 / (z + p.re)).norm()).fold(0.0, f64::max);
    assert!(err < 1e-9);
    let gen = FiberGenerator::new(&spec, &g, 1.0).unwrap();
    let delta = SampledField::delta(&g);
    for z in [C64::new(1.0, 0.0), C64::new(1.0, 1.0), C64::new(1.0, -1.0), C64::new(10.0, 0.0)] {
        let b = gen.resolvent(z).unwrap();
        let res = b.scale(z).sub(&gen.apply(&b).unwrap()).unwrap().sub(&delta).unwrap().sup_norm() / delta.sup_norm();
        assert!(res < 1e-9, "identity residual {res}");
        let bh = fourier_forward(&b).unwrap();
        let c = bh.values().iter().zip(psi.values()).map(|(b, p)| b.norm() * (z.norm() + p.re)).fold(0.0, f64::max);
        println!("z={z}: sup |B^| (|z| + psi) = {c:.4}");
        assert!(c <= 2.0);
    }
}

#[test]
fn contour_bound_constant() {
    let rep = contour_bound_check(&[0, 1, 2], &[1.0, 4.0], &[0.1, 1.0, 10.0], 0.75 * std::f64::consts::PI, 10.0).unwrap();
    for e in &rep.entries {
        println!("k={} a={} t={}: ratio {:.4}", e.k, e.a, e.t, e.ratio);
    }
    println!("fitted C = {:.4}", rep.fitted_c);
    assert!(rep.passes);
}
