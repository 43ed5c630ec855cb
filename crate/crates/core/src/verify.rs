//! Named invariant suites, addressable as `module.name` from the command line.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::generators::{maximal_principle_spotcheck, GeneratorSpec};
use crate::grid::{fourier_forward, fourier_inverse, make_grid, sample, GridSpec, SampledField, Space};
use crate::group_conv::{convolve, leibniz_check, taylor_expansion, taylor_remainder, ConvMethod, ThetaLaw};
use crate::linalg::CMat;
use crate::perturbation::{correction_term, correction_term_space};
use crate::semigroups::{
    abelian_semigroup, contour_bound_check, contour_semigroup, heisenberg_semigroup_expm, semigroup_expm,
    ContourSpec,
};
use crate::specfun::{bessel_k, gamma_variance_density, radial_fourier_inverse, slope_fit};
use crate::symbols::{
    homomorphism_residual, kn_quantize, rep_symbol_check, schrodinger_point, DEFAULT_MATRIX_CAP,
};
use crate::C64;

#[derive(Clone, Debug, Serialize)]
pub struct SuiteOutcome {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub tolerance: f64,
    #[serde(skip)]
    pub seconds: f64,
    pub detail: String,
}

type Check = fn() -> Result<(f64, String)>;

pub struct Suite {
    pub name: &'static str,
    pub tolerance: f64,
    check: Check,
}

impl Suite {
    pub fn run(&self) -> SuiteOutcome {
        let start = Instant::now();
        let (passed, measured, detail) = match (self.check)() {
            Ok((m, d)) => (m.is_finite() && m <= self.tolerance, m, d),
            Err(e) => (false, f64::NAN, format!("error: {e}")),
        };
        SuiteOutcome {
            name: self.name.to_string(),
            passed,
            measured,
            tolerance: self.tolerance,
            seconds: start.elapsed().as_secs_f64(),
            detail,
        }
    }
}

pub fn suites() -> Vec<Suite> {
    vec![
        Suite { name: "grid.roundtrip", tolerance: 1e-10, check: grid_roundtrip },
        Suite { name: "grid.parseval", tolerance: 1e-9, check: grid_parseval },
        Suite { name: "group_conv.identity", tolerance: 1e-12, check: conv_identity },
        Suite { name: "group_conv.spectral_direct", tolerance: 1e-10, check: conv_spectral_direct },
        Suite { name: "group_conv.associativity", tolerance: 1e-8, check: conv_associativity },
        Suite { name: "group_conv.taylor", tolerance: 1e-7, check: conv_taylor },
        Suite { name: "group_conv.leibniz", tolerance: 1e-9, check: conv_leibniz },
        Suite { name: "symbols.identity", tolerance: 1e-10, check: symbols_identity },
        Suite { name: "symbols.xi_sharp_x", tolerance: 1e-8, check: symbols_xi_sharp_x },
        Suite { name: "symbols.unitarity", tolerance: 1e-10, check: symbols_unitarity },
        Suite { name: "symbols.homomorphism", tolerance: 1e-6, check: symbols_homomorphism },
        Suite { name: "symbols.rep_symbol", tolerance: 1e-6, check: symbols_rep_symbol },
        Suite { name: "generators.max_principle", tolerance: 1e-8, check: generators_max_principle },
        Suite { name: "semigroups.fourier_expm", tolerance: 1e-8, check: semigroups_fourier_expm },
        Suite { name: "semigroups.law", tolerance: 1e-6, check: semigroups_law },
        Suite { name: "semigroups.contour", tolerance: 1e-4, check: semigroups_contour },
        Suite { name: "semigroups.contour_bound", tolerance: 10.0, check: semigroups_contour_bound },
        Suite { name: "perturbation.correction_routes", tolerance: 1e-8, check: perturbation_routes },
        Suite { name: "specfun.k_half", tolerance: 1e-12, check: specfun_k_half },
        Suite { name: "specfun.radial_inversion", tolerance: 1e-6, check: specfun_radial_inversion },
        Suite { name: "specfun.slope", tolerance: 0.05, check: specfun_slope },
    ]
}

fn select(pattern: Option<&str>) -> Result<Vec<Suite>> {
    let selected: Vec<Suite> = suites()
        .into_iter()
        .filter(|s| pattern.is_none_or(|p| s.name == p || s.name.starts_with(&format!("{p}."))))
        .collect();
    if selected.is_empty() {
        return Err(Error::InvalidArgument(format!("no suite matches {:?}", pattern.unwrap_or(""))));
    }
    Ok(selected)
}

/// Names selected by `pattern`, without running anything.
pub fn run_names(pattern: Option<&str>) -> Result<Vec<&'static str>> {
    Ok(select(pattern)?.iter().map(|s| s.name).collect())
}

/// Runs every suite whose name equals `pattern` or starts with `pattern.`; `None` runs all.
pub fn run(pattern: Option<&str>) -> Result<Vec<SuiteOutcome>> {
    Ok(select(pattern)?.iter().map(Suite::run).collect())
}

/// Fixed-width PASS/FAIL table.
pub fn table(outcomes: &[SuiteOutcome]) -> String {
    let mut out = format!("{:<34} {:<6} {:>11} {:>11} {:>8}\n", "suite", "result", "measured", "tolerance", "seconds");
    for o in outcomes {
        out.push_str(&format!(
            "{:<34} {:<6} {:>11.3e} {:>11.3e} {:>8.2}\n",
            o.name,
            if o.passed { "PASS" } else { "FAIL" },
            o.measured,
            o.tolerance,
            o.seconds
        ));
    }
    out
}

fn gauss(grid: &GridSpec, widths: [f64; 3], shift: [f64; 3]) -> Result<SampledField> {
    sample(
        |p| {
            let e: f64 = (0..3).map(|k| (p[k] - shift[k]).powi(2) / (2.0 * widths[k] * widths[k])).sum();
            C64::new((-e).exp(), 0.0)
        },
        grid,
    )
}

fn rel(a: &SampledField, b: &SampledField) -> Result<f64> {
    Ok(a.sub(b)?.sup_norm() / b.sup_norm())
}

fn random_field(grid: &GridSpec, seed: u64) -> Result<SampledField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = (0..grid.len()).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    SampledField::new(grid.clone(), v, Space::Position)
}

fn transform_grids() -> Result<[GridSpec; 2]> {
    Ok([GridSpec::euclidean(&[64], &[5.0])?, GridSpec::cubic(1, 32, 4.0)?])
}

fn grid_roundtrip() -> Result<(f64, String)> {
    let mut worst = 0.0f64;
    for (i, g) in transform_grids()?.iter().enumerate() {
        let f = random_field(g, 7 + i as u64)?;
        worst = worst.max(rel(&fourier_inverse(&fourier_forward(&f)?)?, &f)?);
    }
    Ok((worst, "d=1 N=64 and d=3 N=32".into()))
}

fn grid_parseval() -> Result<(f64, String)> {
    let mut worst = 0.0f64;
    for (i, g) in transform_grids()?.iter().enumerate() {
        let f = random_field(g, 11 + i as u64)?;
        let a = f.l2_norm_sq();
        worst = worst.max((fourier_forward(&f)?.l2_norm_sq() - a).abs() / a);
    }
    Ok((worst, "d=1 N=64 and d=3 N=32".into()))
}

fn conv_identity() -> Result<(f64, String)> {
    let g = GridSpec::cubic(1, 8, 4.0)?;
    let f = gauss(&g, [1.0; 3], [0.3, -0.2, 0.5])?;
    let d = SampledField::delta(&g);
    let mut worst = 0.0f64;
    for theta in [0.0, 0.5, 1.0] {
        let law = ThetaLaw::new(theta)?;
        worst = worst.max(rel(&convolve(law, &f, &d, ConvMethod::Spectral)?, &f)?);
        worst = worst.max(rel(&convolve(law, &d, &f, ConvMethod::Spectral)?, &f)?);
    }
    Ok((worst, "f * delta = delta * f = f for theta in {0, 1/2, 1}".into()))
}

fn conv_spectral_direct() -> Result<(f64, String)> {
    let g = GridSpec::cubic(1, 8, 4.0)?;
    let f = gauss(&g, [1.0, 0.8, 1.2], [0.5, 0.0, -0.5])?;
    let h = gauss(&g, [0.7, 1.0, 1.0], [0.0, 0.4, 0.0])?.map(|v| v * C64::new(1.0, 0.3));
    let mut worst = 0.0f64;
    for theta in [0.0, 1.0] {
        let law = ThetaLaw::new(theta)?;
        worst = worst.max(rel(&convolve(law, &f, &h, ConvMethod::Spectral)?, &convolve(law, &f, &h, ConvMethod::Direct)?)?);
    }
    Ok((worst, "8^3 shear-aligned grid".into()))
}

fn conv_associativity() -> Result<(f64, String)> {
    let g = GridSpec::cubic(1, 12, 6.0)?;
    let a = gauss(&g, [1.0, 0.8, 1.0], [0.3, 0.0, 0.0])?;
    let b = gauss(&g, [0.9, 1.0, 1.1], [0.0, -0.4, 0.2])?;
    let c = gauss(&g, [1.0, 1.0, 0.8], [0.0; 3])?;
    let law = ThetaLaw::heisenberg();
    let sp = ConvMethod::Spectral;
    let l = convolve(law, &convolve(law, &a, &b, sp)?, &c, sp)?;
    let r = convolve(law, &a, &convolve(law, &b, &c, sp)?, sp)?;
    Ok((rel(&l, &r)?, "(a * b) * c vs a * (b * c), theta = 1".into()))
}

fn conv_taylor() -> Result<(f64, String)> {
    let g = GridSpec::cubic(1, 16, 8.0)?;
    let f = gauss(&g, [1.0; 3], [0.5, 0.0, 0.0])?;
    let h = gauss(&g, [1.0, 1.2, 0.9], [0.0, -0.5, 0.3])?;
    let full = convolve(ThetaLaw::heisenberg(), &f, &h, ConvMethod::Spectral)?;
    let mut worst = 0.0f64;
    for order in 1..=3 {
        let sum = taylor_expansion(&f, &h, order)?.add(&taylor_remainder(&f, &h, order)?)?;
        worst = worst.max(rel(&sum, &full)?);
    }
    Ok((worst, "expansion + remainder vs f *_1 g, N = 1, 2, 3".into()))
}

fn conv_leibniz() -> Result<(f64, String)> {
    let g = make_grid(1, &[24, 24, 64], &[6.0, 6.0, 12.0])?;
    let f = gauss(&g, [0.5, 0.5, 1.0], [0.2, 0.0, 0.0])?;
    let h = gauss(&g, [0.5, 0.5, 1.0], [0.0, -0.2, 0.3])?;
    let mut worst = 0.0f64;
    for gamma in [[1, 0, 0], [0, 1, 0], [0, 0, 1], [2, 0, 0], [1, 1, 0], [0, 0, 2], [1, 0, 1]] {
        worst = worst.max(leibniz_check(ThetaLaw::heisenberg(), &f, &h, &gamma)?.residual);
    }
    Ok((worst, "|gamma| <= 2".into()))
}

fn symbols_identity() -> Result<(f64, String)> {
    let g = GridSpec::euclidean(&[64], &[8.0])?;
    let id = kn_quantize(|_, _| C64::new(1.0, 0.0), &g, DEFAULT_MATRIX_CAP)?;
    Ok(((id - CMat::identity(64, 64)).camax(), "Op(1) = I".into()))
}

fn symbols_xi_sharp_x() -> Result<(f64, String)> {
    let g = GridSpec::euclidean(&[128], &[16.0])?;
    let d = kn_quantize(|_, xi| C64::new(xi[0], 0.0), &g, DEFAULT_MATRIX_CAP)?;
    let x = kn_quantize(|x, _| C64::new(x[0], 0.0), &g, DEFAULT_MATRIX_CAP)?;
    let want = kn_quantize(|x, xi| C64::new(x[0] * xi[0], -1.0), &g, DEFAULT_MATRIX_CAP)?;
    let prod = &d * &x;
    let mut worst = 0.0f64;
    for (c, s) in [(0.0, 1.0), (1.5, 0.7), (-2.0, 1.3)] {
        let f = sample(|p| C64::from_polar((-(p[0] - c) * (p[0] - c) / (2.0 * s * s)).exp(), 0.4 * p[0]), &g)?;
        let v = nalgebra::DVector::from_vec(f.values().to_vec());
        let w = &want * &v;
        worst = worst.max((&prod * &v - &w).camax() / w.camax());
    }
    Ok((worst, "Op(xi) Op(x) vs Op(x xi - i) on Gaussian probes".into()))
}

fn symbols_unitarity() -> Result<(f64, String)> {
    let g = GridSpec::euclidean(&[64], &[8.0])?;
    let f = sample(|x| C64::new((-x[0] * x[0] / 2.0).exp(), 0.3 * x[0] * (-x[0] * x[0]).exp()), &g)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..8 {
        let h: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let lambda = if rng.random_bool(0.5) { 1.0 } else { -2.0 };
        let out = schrodinger_point(lambda, &h, &f)?;
        worst = worst.max((out.l2_norm_sq().sqrt() - f.l2_norm_sq().sqrt()).abs() / f.l2_norm_sq().sqrt());
    }
    Ok((worst, "|pi_h f| = |f| for random h".into()))
}

fn symbols_homomorphism() -> Result<(f64, String)> {
    let hg = make_grid(1, &[64, 64, 48], &[12.0; 3])?;
    let f = gauss(&hg, [1.0; 3], [0.0; 3])?;
    let g = gauss(&hg, [1.0, 1.0 / 2f64.sqrt(), 1.0], [0.5, 0.0, 0.3])?;
    let pg = GridSpec::euclidean(&[256], &[16.0])?;
    let probe = sample(|x| C64::new((-x[0] * x[0] / 2.0).exp(), 0.0), &pg)?;
    let mut worst = 0.0f64;
    for lambda in [1.0, 2.0] {
        worst = worst.max(homomorphism_residual(lambda, &f, &g, &probe)?);
    }
    Ok((worst, "pi(F *_1 G) vs pi(F) pi(G), lambda in {1, 2}".into()))
}

fn symbols_rep_symbol() -> Result<(f64, String)> {
    let hg = GridSpec::cubic(1, 24, 6.0)?;
    let pg = GridSpec::euclidean(&[96], &[12.0])?;
    let f = gauss(&hg, [1.0, 1.0 / 1.5f64.sqrt(), 1.0 / 0.8f64.sqrt()], [0.3, -0.2, 0.1])?;
    let mut worst = 0.0f64;
    for lambda in [1.0, 4.0] {
        worst = worst.max(rep_symbol_check(lambda, &f, &pg, DEFAULT_MATRIX_CAP)?.relative_residual);
    }
    Ok((worst, "pi_F vs Op(F^(-s xi, s x, lambda)), lambda in {1, 4}".into()))
}

fn generators_max_principle() -> Result<(f64, String)> {
    let grid = GridSpec::cubic(1, 16, 8.0)?;
    let mut worst = f64::NEG_INFINITY;
    for spec in [GeneratorSpec::gamma_variance(), GeneratorSpec::gamma_full()] {
        worst = worst.max(maximal_principle_spotcheck(&spec, &grid, 20, 2024)?.max_value);
    }
    Ok((worst, "max <P, f> over 20 seeded bumps, both gamma generators".into()))
}

fn semigroups_fourier_expm() -> Result<(f64, String)> {
    let g = GridSpec::cubic(1, 12, 6.0)?;
    let spec = GeneratorSpec::gamma_variance();
    let f = abelian_semigroup(&spec, 1.0, &g)?;
    let e = semigroup_expm(&spec, 1.0, &g, 0.0)?;
    Ok((rel(&e.field, &f.field)?, "12^3, t = 1".into()))
}

fn semigroups_law() -> Result<(f64, String)> {
    let g = GridSpec::cubic(1, 12, 6.0)?;
    let spec = GeneratorSpec::gamma_variance();
    let a = heisenberg_semigroup_expm(&spec, 0.3, &g)?;
    let b = heisenberg_semigroup_expm(&spec, 0.7, &g)?;
    let c = heisenberg_semigroup_expm(&spec, 1.0, &g)?;
    let ab = convolve(ThetaLaw::heisenberg(), &a.field, &b.field, ConvMethod::Spectral)?;
    Ok((rel(&ab, &c.field)?, "mu_0.3 *_1 mu_0.7 vs mu_1".into()))
}

fn semigroups_contour() -> Result<(f64, String)> {
    let g = GridSpec::cubic(1, 12, 6.0)?;
    let spec = GeneratorSpec::gamma_variance();
    let e = heisenberg_semigroup_expm(&spec, 1.0, &g)?;
    let c = contour_semigroup(&spec, 1.0, &g, &ContourSpec::new(1.0)?)?;
    Ok((rel(&c.field, &e.field)?, "phi0 = 3 pi / 4, 200 nodes per piece".into()))
}

fn semigroups_contour_bound() -> Result<(f64, String)> {
    let rep = contour_bound_check(&[0, 1, 2], &[1.0, 4.0], &[0.1, 1.0, 10.0], 0.75 * std::f64::consts::PI, 10.0)?;
    Ok((rep.fitted_c, format!("{} (k, a, t) triples", rep.entries.len())))
}

fn perturbation_routes() -> Result<(f64, String)> {
    let g = GridSpec::cubic(1, 48, 24.0)?;
    let spec = GeneratorSpec::gamma_variance();
    let a = correction_term(&spec, 1.0, &g)?;
    let b = correction_term_space(&spec, 1.0, &g)?;
    Ok((rel(&b, &a)?, "frequency vs space route, 48^3, L = 24".into()))
}

fn specfun_k_half() -> Result<(f64, String)> {
    let mut worst = 0.0f64;
    for x in [0.1, 1.0, 7.0, 40.0] {
        let exact = (std::f64::consts::PI / (2.0 * x)).sqrt() * (-x).exp();
        worst = worst.max((bessel_k(0.5, x)? - exact).abs() / exact);
    }
    Ok((worst, "K_1/2 closed form".into()))
}

fn specfun_radial_inversion() -> Result<(f64, String)> {
    let mut worst = 0.0f64;
    for t in [0.5, 1.0, 2.0] {
        let sym = move |k: f64| (1.0 + k * k).powf(-t);
        let exact = gamma_variance_density(t, 3, 1.0)?;
        worst = worst.max((radial_fourier_inverse(&sym, 3, 1.0)? - exact).abs() / exact);
    }
    Ok((worst, "d = 3, |x| = 1, t in {1/2, 1, 2}".into()))
}

fn specfun_slope() -> Result<(f64, String)> {
    let samples = (0..8)
        .map(|i| {
            let r = 0.01 * 1.5f64.powi(i);
            Ok((r, gamma_variance_density(0.5, 3, r)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let s = slope_fit(&samples)?;
    Ok(((s + 2.0).abs(), format!("slope {s:.4} for d = 3, t = 1/2")))
}
