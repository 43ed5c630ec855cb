//! Generalised laplacians given spectrally by `psi = -P^`.
//!
//! Every generator here is `psi(xi) = phi(|xi|^2)` with `phi` a nonnegative
//! combination of `1`, `log(1 + q)` and `(1 + q)^s`, `0 < s <= 1`.
//!
//! On a grid the default realization evaluates `phi` at the lattice symbol
//! `q_h(xi) = sum_k (2/h_k)^2 sin^2(h_k xi_k / 2)` instead of `|xi|^2`. This keeps
//! the realized kernel nonnegative away from the origin.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{self, GridSpec, SampledField};
use crate::specfun::bessel_k;
use crate::weights::{check_tempered, rho, WeightReport};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Term {
    Const { coeff: f64 },
    Log1p { coeff: f64 },
    Pow { coeff: f64, exponent: f64 },
}

impl Term {
    fn phi(&self, q: f64) -> f64 {
        match *self {
            Term::Const { coeff } => coeff,
            Term::Log1p { coeff } => coeff * q.ln_1p(),
            Term::Pow { coeff, exponent } => coeff * (1.0 + q).powf(exponent),
        }
    }

    fn dphi(&self, q: f64) -> f64 {
        match *self {
            Term::Const { .. } => 0.0,
            Term::Log1p { coeff } => coeff / (1.0 + q),
            Term::Pow { coeff, exponent } => coeff * exponent * (1.0 + q).powf(exponent - 1.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Realization {
    /// `phi` evaluated at the lattice symbol (default).
    Lattice,
    /// `phi` evaluated at `|xi|^2` and truncated to the grid band.
    Truncated,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeneratorSpec {
    pub name: String,
    pub terms: Vec<Term>,
    pub claims_assumptions: bool,
    pub realization: Realization,
}

impl GeneratorSpec {
    fn new(name: &str, terms: Vec<Term>) -> Result<Self> {
        for t in &terms {
            let ok = match *t {
                Term::Const { coeff } | Term::Log1p { coeff } => coeff >= 0.0 && coeff.is_finite(),
                Term::Pow { coeff, exponent } => {
                    coeff >= 0.0 && coeff.is_finite() && exponent > 0.0 && exponent <= 1.0
                }
            };
            if !ok {
                return Err(Error::InvalidArgument(format!(
                    "{t:?} does not give a generalised laplacian"
                )));
            }
        }
        if terms.is_empty() {
            return Err(Error::InvalidArgument("empty generator".into()));
        }
        let claims = terms.iter().map(|t| t.phi(0.0)).sum::<f64>() >= 1.0;
        Ok(GeneratorSpec {
            name: name.into(),
            terms,
            claims_assumptions: claims,
            realization: Realization::Lattice,
        })
    }

    /// `psi = 1 + log(1 + |xi|^2)`.
    pub fn gamma_full() -> Self {
        Self::new("gamma_full", vec![Term::Const { coeff: 1.0 }, Term::Log1p { coeff: 1.0 }]).unwrap()
    }

    /// `psi = log(1 + |xi|^2)`.
    pub fn gamma_variance() -> Self {
        Self::new("gamma_variance", vec![Term::Log1p { coeff: 1.0 }]).unwrap()
    }

    /// `psi = (1 + |xi|^2)^s`, `0 < s <= 1`.
    pub fn relativistic(s: f64) -> Result<Self> {
        Self::new("relativistic", vec![Term::Pow { coeff: 1.0, exponent: s }])
    }

    /// Built-in generator by name; `relativistic` takes an optional `:s` suffix.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "gamma_full" => Ok(Self::gamma_full()),
            "gamma_variance" => Ok(Self::gamma_variance()),
            "relativistic" => Self::relativistic(0.5),
            _ => {
                if let Some(s) = name.strip_prefix("relativistic:") {
                    let s: f64 = s.parse().map_err(|_| Error::Parse(format!("bad exponent in {name}")))?;
                    Self::relativistic(s)
                } else {
                    Err(Error::InvalidArgument(format!("unknown generator {name}")))
                }
            }
        }
    }

    /// Parses compositions such as `1*const + 0.5*log1p + 2*pow(0.5)`.
    pub fn from_composition(name: &str, expr: &str) -> Result<Self> {
        let mut terms = Vec::new();
        for raw in expr.split('+') {
            let raw = raw.trim();
            let (coeff, body) = match raw.split_once('*') {
                Some((c, b)) => (
                    c.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad coefficient in `{raw}`")))?,
                    b.trim(),
                ),
                None => (1.0, raw),
            };
            let term = if body == "const" {
                Term::Const { coeff }
            } else if body == "log1p" {
                Term::Log1p { coeff }
            } else if let Some(arg) = body.strip_prefix("pow(").and_then(|b| b.strip_suffix(')')) {
                let exponent =
                    arg.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad exponent in `{raw}`")))?;
                Term::Pow { coeff, exponent }
            } else {
                return Err(Error::Parse(format!("unknown term `{body}`")));
            };
            terms.push(term);
        }
        Self::new(name, terms)
    }

    pub fn with_realization(mut self, r: Realization) -> Self {
        self.realization = r;
        self
    }

    pub fn phi(&self, q: f64) -> f64 {
        self.terms.iter().map(|t| t.phi(q)).sum()
    }

    pub fn dphi(&self, q: f64) -> f64 {
        self.terms.iter().map(|t| t.dphi(q)).sum()
    }

    pub fn psi(&self, xi: &[f64]) -> f64 {
        self.phi(xi.iter().map(|v| v * v).sum())
    }

    pub fn psi_gradient(&self, xi: &[f64]) -> Vec<f64> {
        let d = self.dphi(xi.iter().map(|v| v * v).sum());
        xi.iter().map(|v| 2.0 * d * v).collect()
    }

    /// `psi(0)`, the total mass of `-P`.
    pub fn psi0(&self) -> f64 {
        self.phi(0.0)
    }

    /// Coefficient of the atom at the origin in `P^` language.
    pub fn atom_at_zero(&self) -> f64 {
        -self.psi0()
    }

    /// Lattice symbol `psi(sigma_h(xi))` with `sigma_k = (2/h_k) sin(h_k xi_k / 2)`.
    pub fn psi_lattice(&self, xi: &[f64], h: &[f64]) -> f64 {
        self.phi(lattice_q(xi, h))
    }

    pub fn psi_lattice_gradient(&self, xi: &[f64], h: &[f64]) -> Vec<f64> {
        let d = self.dphi(lattice_q(xi, h));
        xi.iter()
            .zip(h)
            .map(|(&x, &hk)| {
                let (s, c) = (0.5 * hk * x).sin_cos();
                2.0 * d * (2.0 / hk) * s * c
            })
            .collect()
    }

    /// Grid symbol under the configured realization.
    pub fn psi_on(&self, xi: &[f64], h: &[f64]) -> f64 {
        match self.realization {
            Realization::Lattice => self.psi_lattice(xi, h),
            Realization::Truncated => self.psi(xi),
        }
    }

    pub fn psi_gradient_on(&self, xi: &[f64], h: &[f64]) -> Vec<f64> {
        match self.realization {
            Realization::Lattice => self.psi_lattice_gradient(xi, h),
            Realization::Truncated => self.psi_gradient(xi),
        }
    }

    /// Normalized Lévy density, when the generator has a closed form for it.
    pub fn levy_density(&self, x: &[f64]) -> Option<Result<f64>> {
        let mut c = 0.0;
        for t in &self.terms {
            match *t {
                Term::Const { .. } => {}
                Term::Log1p { coeff } => c += coeff,
                Term::Pow { .. } => return None,
            }
        }
        Some(levy_gamma_density_normalized(x).map(|v| c * v))
    }
}

fn lattice_q(xi: &[f64], h: &[f64]) -> f64 {
    xi.iter()
        .zip(h)
        .map(|(&x, &hk)| {
            let s = (2.0 / hk) * (0.5 * hk * x).sin();
            s * s
        })
        .sum()
}

/// `psi` sampled on the frequency grid under the spec's realization.
pub fn symbol_on_grid(spec: &GeneratorSpec, grid: &GridSpec) -> SampledField {
    let h = grid.spacings();
    grid::sample_frequency(|xi| C64::new(spec.psi_on(xi, &h), 0.0), grid).expect("psi is finite")
}

/// `d psi / d xi_axis` on the frequency grid.
pub fn symbol_gradient_on_grid(spec: &GeneratorSpec, grid: &GridSpec, axis: usize) -> SampledField {
    let h = grid.spacings();
    grid::sample_frequency(|xi| C64::new(spec.psi_gradient_on(xi, &h)[axis], 0.0), grid)
        .expect("gradient is finite")
}

/// Band-limited realization `P_grid = F^{-1}(-psi)`.
pub fn realize_on_grid(spec: &GeneratorSpec, grid: &GridSpec) -> SampledField {
    let neg = symbol_on_grid(spec, grid).scale(C64::new(-1.0, 0.0));
    grid::fourier_inverse(&neg).expect("frequency field")
}

/// `<P, f> = (2 pi)^{-d} int (-psi) f^` by grid quadrature (real part).
pub fn pairing(spec: &GeneratorSpec, f: &SampledField) -> Result<f64> {
    let fh = grid::fourier_forward(f)?;
    let psi = symbol_on_grid(spec, f.grid());
    let s: C64 = fh.values().iter().zip(psi.values()).map(|(a, p)| -a * p.re).sum();
    Ok(s.re * f.grid().freq_cell_volume())
}

/// `|x|^{-d/2} K_{d/2}(|x|)`, the Lévy kernel of the gamma generators up to normalization.
pub fn levy_gamma_density(x: &[f64]) -> Result<f64> {
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r == 0.0 {
        return Err(Error::Domain("Lévy density is singular at the origin".into()));
    }
    let half = x.len() as f64 / 2.0;
    Ok(r.powf(-half) * bessel_k(half, r)?)
}

/// Lévy density of `log(1 + |xi|^2)`: `2 (2 pi)^{-d/2} |x|^{-d/2} K_{d/2}(|x|)`.
pub fn levy_gamma_density_normalized(x: &[f64]) -> Result<f64> {
    let half = x.len() as f64 / 2.0;
    Ok(2.0 * (2.0 * PI).powf(-half) * levy_gamma_density(x)?)
}

#[derive(Clone, Debug, Serialize)]
pub struct AssumptionReport {
    pub generator: String,
    pub max_order: u32,
    pub min_psi: f64,
    pub lower_bound_ok: bool,
    pub symmetric: bool,
    /// Smallest `M` with `psi <= rho^M` on the sample.
    pub fitted_m: f64,
    /// Per order `k`: fitted `c` on the full sample.
    pub c_alpha: Vec<(u32, f64)>,
    /// Per order `k`: fitted `c` restricted to `1e-2 <= |xi| <= 1e2`.
    pub c_alpha_core: Vec<(u32, f64)>,
    pub derivative_bounds_ok: bool,
    pub weight: WeightReport,
    pub passes: bool,
}

/// Seeded frequency sample: log-spaced radii in `[1e-3, 1e3]` times random directions.
pub fn default_frequency_sample(d: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![vec![0.0; d]];
    for i in 0..count {
        let r = 10f64.powf(-3.0 + 6.0 * i as f64 / (count.max(2) - 1) as f64);
        let dir: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        out.push(dir.iter().map(|v| r * v / norm).collect());
    }
    out
}

/// Central-difference estimate of `d^alpha psi`.
fn fd_derivative(psi: &dyn Fn(&[f64]) -> f64, x: &[f64], alpha: &[u32]) -> f64 {
    let k: u32 = alpha.iter().sum();
    if k == 0 {
        return psi(x);
    }
    let axis = alpha.iter().position(|&a| a > 0).unwrap();
    let step = [0.0, 1e-5, 1e-4, 1e-3][k.min(3) as usize] * (1.0 + x[axis].abs());
    let mut lower = alpha.to_vec();
    lower[axis] -= 1;
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    xp[axis] += step;
    xm[axis] -= step;
    (fd_derivative(psi, &xp, &lower) - fd_derivative(psi, &xm, &lower)) / (2.0 * step)
}

fn all_multiindices(d: usize, k: u32) -> Vec<Vec<u32>> {
    crate::group_conv::multiindices(d, k)
}

/// Checks `1 <= psi <= rho^M`, `|d^alpha psi| <= c_alpha psi rho^{-|alpha|}` and that
/// `psi` is a weight for `rho`.
pub fn check_symbol_assumptions(
    spec: &GeneratorSpec,
    max_order: u32,
    sample: &[Vec<f64>],
) -> Result<AssumptionReport> {
    if max_order > 3 {
        return Err(Error::InvalidArgument("derivative order above 3 is not supported".into()));
    }
    check_psi_assumptions(&spec.name, &|x| spec.psi(x), max_order, sample)
}

/// Same as [`check_symbol_assumptions`] for an arbitrary symbol.
pub fn check_psi_assumptions(
    name: &str,
    psi: &dyn Fn(&[f64]) -> f64,
    max_order: u32,
    sample: &[Vec<f64>],
) -> Result<AssumptionReport> {
    let d = sample.first().map(|p| p.len()).unwrap_or(0);
    let values: Vec<f64> = sample.iter().map(|x| psi(x)).collect();
    let min_psi = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let symmetric = sample.iter().zip(&values).all(|(x, &v)| {
        let neg: Vec<f64> = x.iter().map(|a| -a).collect();
        (psi(&neg) - v).abs() <= 1e-12 * v.abs().max(1.0)
    });
    let mut fitted_m = 0.0f64;
    for (x, &v) in sample.iter().zip(&values) {
        let r = rho(x);
        if r > 1.0 + 1e-9 && v > 0.0 {
            fitted_m = fitted_m.max(v.ln() / r.ln());
        } else if v > 1.0 {
            fitted_m = f64::INFINITY;
        }
    }
    let mut c_alpha = Vec::new();
    let mut c_alpha_core = Vec::new();
    for k in 1..=max_order {
        let mut c = 0.0f64;
        let mut c_core = 0.0f64;
        for (x, &v) in sample.iter().zip(&values) {
            let r = rho(x);
            let norm = x.iter().map(|a| a * a).sum::<f64>().sqrt();
            for alpha in all_multiindices(d, k) {
                let der = fd_derivative(psi, x, &alpha);
                if !der.is_finite() {
                    return Err(Error::NonFinite { coordinate: x.clone() });
                }
                let ratio = if v > 0.0 {
                    der.abs() * r.powi(k as i32) / v
                } else if der.abs() < 1e-12 {
                    0.0
                } else {
                    f64::INFINITY
                };
                c = c.max(ratio);
                if (1e-2..=1e2).contains(&norm) {
                    c_core = c_core.max(ratio);
                }
            }
        }
        c_alpha.push((k, c));
        c_alpha_core.push((k, c_core));
    }
    // a bound that keeps growing as the sample reaches further is not a bound
    let derivative_bounds_ok =
        c_alpha.iter().zip(&c_alpha_core).all(|(a, b)| a.1.is_finite() && a.1 <= 1.5 * b.1.max(1e-300));
    let weight = if min_psi > 0.0 {
        check_tempered(psi, &rho, sample, 2.0, 2.0, false)?
    } else {
        let one = |_: &[f64]| 1.0;
        let mut w = check_tempered(&one, &rho, sample, 2.0, 2.0, false)?;
        w.passes = false;
        w
    };
    let lower_bound_ok = min_psi >= 1.0 - 1e-12;
    let passes = lower_bound_ok && symmetric && derivative_bounds_ok && weight.passes;
    Ok(AssumptionReport {
        generator: name.into(),
        max_order,
        min_psi,
        lower_bound_ok,
        symmetric,
        fitted_m,
        c_alpha,
        c_alpha_core,
        derivative_bounds_ok,
        weight,
        passes,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct MaxPrincipleReport {
    pub generator: String,
    pub values: Vec<f64>,
    pub max_value: f64,
    pub tolerance: f64,
    pub passes: bool,
}

/// Random smooth bump with a strict global maximum at the origin.
pub fn random_bump(grid: &GridSpec, rng: &mut ChaCha8Rng) -> Result<SampledField> {
    let d = grid.dim();
    let hmax = grid.spacings().iter().cloned().fold(0.0, f64::max);
    let lmin = grid.half_extent.iter().cloned().fold(f64::INFINITY, f64::min);
    let (smin, smax) = (2.0 * hmax, (lmin / 5.0).max(2.5 * hmax));
    for _ in 0..100 {
        let parts = rng.random_range(1..=3);
        let mut comps: Vec<(f64, Vec<f64>, Vec<f64>)> = (0..parts)
            .map(|_| {
                let a = rng.random_range(0.2..1.0);
                let s: Vec<f64> = (0..d).map(|_| rng.random_range(smin..smax)).collect();
                (a, vec![0.0; d], s)
            })
            .collect();
        if rng.random_bool(0.5) {
            let c: Vec<f64> = (0..d).map(|_| rng.random_range(-0.5 * lmin..0.5 * lmin)).collect();
            let s: Vec<f64> = (0..d).map(|_| rng.random_range(smin..smax)).collect();
            comps.push((rng.random_range(0.01..0.1), c, s));
        }
        let f = grid::sample(
            |x| {
                let v: f64 = comps
                    .iter()
                    .map(|(a, c, s)| {
                        a * (-(0..d).map(|k| (x[k] - c[k]).powi(2) / (2.0 * s[k] * s[k])).sum::<f64>()).exp()
                    })
                    .sum();
                C64::new(v, 0.0)
            },
            grid,
        )?;
        let o = grid.origin_index();
        let top = f.values()[o].re;
        if f.values().iter().enumerate().all(|(i, v)| i == o || v.re < top) {
            return Ok(f);
        }
    }
    Err(Error::NotConverged("could not build a bump with its maximum at the origin".into()))
}

/// Checks `<P, f> <= tol` on seeded random bumps peaked at the origin.
pub fn maximal_principle_spotcheck(
    spec: &GeneratorSpec,
    grid: &GridSpec,
    trials: usize,
    seed: u64,
) -> Result<MaxPrincipleReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(trials);
    for _ in 0..trials {
        let f = random_bump(grid, &mut rng)?;
        values.push(pairing(spec, &f)?);
    }
    let tolerance = 1e-8;
    let max_value = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(MaxPrincipleReport {
        generator: spec.name.clone(),
        values,
        max_value,
        tolerance,
        passes: max_value <= tolerance,
    })
}

/// Realized kernel restricted to points away from the origin: `(min, sup)`.
pub fn off_origin_range(p: &SampledField) -> (f64, f64) {
    let o = p.grid().origin_index();
    let mut lo = f64::INFINITY;
    let mut sup = 0.0f64;
    for (i, v) in p.values().iter().enumerate() {
        if i != o {
            lo = lo.min(v.re);
        }
        sup = sup.max(v.norm());
    }
    (lo, sup)
}
