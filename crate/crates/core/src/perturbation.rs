//! The Heisenberg semigroup as a perturbation of the Euclidean one.
//!
//! With `lambda = xi_3` and `psi` the grid symbol, the first-order terms are
//!
//! - semigroup: `mu_t^ = nu_t^ + i lambda (t^2/2) nu_t^ sum_j d_{1j} psi d_{2j} psi + h_t`,
//! - resolvent: `B1^ = B0^ + i lambda sum_j d_{1j} psi d_{2j} psi / (z + psi)^3 + H_z^`.
//!
//! The correction term is the negative of the first-order semigroup term, so
//! `r_t = mu_t - nu_t + correction` is the remainder.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::generators::{realize_on_grid, symbol_gradient_on_grid, symbol_on_grid, GeneratorSpec};
use crate::grid::{self, apply_t, GridSpec, SampledField, Space};
use crate::group_conv::{convolve_abelian, d3};
use crate::semigroups::{abelian_semigroup, FiberGenerator};
use crate::weights::rho;
use crate::C64;

fn check_t(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("t = {t} must be positive")))
    }
}

/// `sum_j d_{1j} psi d_{2j} psi` on the frequency grid.
pub fn gradient_pairing(spec: &GeneratorSpec, grid: &GridSpec) -> Result<SampledField> {
    let n = grid.heisenberg_n()?;
    let mut acc = SampledField::zeros(grid, Space::Frequency);
    for j in 0..n {
        let a = symbol_gradient_on_grid(spec, grid, j);
        let b = symbol_gradient_on_grid(spec, grid, n + j);
        acc = acc.add(&a.zip_with(&b, |x, y| x * y)?)?;
    }
    Ok(acc)
}

/// `lambda = xi_3`, taken as 0 on the Nyquist plane where `+-lambda` coincide.
fn lambda_of(grid: &GridSpec) -> impl Fn(&[f64]) -> f64 + '_ {
    let x3 = grid.x3_axis();
    let nyquist = grid.frequency(x3, 0);
    move |xi: &[f64]| if xi[x3] == nyquist { 0.0 } else { xi[x3] }
}

/// `d3` with the `x3` Nyquist plane removed, matching [`lambda_of`].
fn d3_symmetric(field: &SampledField) -> Result<SampledField> {
    let grid = field.grid();
    let x3 = grid.x3_axis();
    let mut vals = d3(field, 1)?.into_values();
    grid::forward_axes(&mut vals, grid, &[x3]);
    let nf = grid.points[x3];
    for v in vals.iter_mut().step_by(nf) {
        *v = C64::new(0.0, 0.0);
    }
    grid::inverse_axes(&mut vals, grid, &[x3]);
    SampledField::new(grid.clone(), vals, Space::Position)
}

/// Fourier transform of the correction: `-i lambda (t^2/2) e^{-t psi} sum_j d_{1j} psi d_{2j} psi`.
pub fn correction_hat(spec: &GeneratorSpec, t: f64, grid: &GridSpec) -> Result<SampledField> {
    check_t(t)?;
    let pair = gradient_pairing(spec, grid)?;
    let psi = symbol_on_grid(spec, grid);
    let lam = lambda_of(grid);
    let scaled = pair.zip_with(&psi, |g, p| g * (-t * p.re).exp())?;
    Ok(scaled.map_with_point(|xi, v| v * C64::new(0.0, -lam(xi) * 0.5 * t * t)))
}

/// `(t^2/2) d3 nu_t *0 sum_j (T_{1j} P *0 T_{2j} P)`, computed from its transform.
pub fn correction_term(spec: &GeneratorSpec, t: f64, grid: &GridSpec) -> Result<SampledField> {
    grid::fourier_inverse(&correction_hat(spec, t, grid)?)
}

fn unit(d: usize, k: usize) -> Vec<u32> {
    (0..d).map(|i| u32::from(i == k)).collect()
}

/// The correction assembled in position space from `P_grid`, `nu_t`, `T` and `d3`.
pub fn correction_term_space(spec: &GeneratorSpec, t: f64, grid: &GridSpec) -> Result<SampledField> {
    check_t(t)?;
    let n = grid.heisenberg_n()?;
    let d = grid.dim();
    let p = realize_on_grid(spec, grid);
    let mut sum = SampledField::zeros(grid, Space::Position);
    for j in 0..n {
        let a = apply_t(&p, &unit(d, j))?;
        let b = apply_t(&p, &unit(d, n + j))?;
        sum = sum.add(&convolve_abelian(&a, &b)?)?;
    }
    let nu = abelian_semigroup(spec, t, grid)?.field;
    Ok(d3_symmetric(&convolve_abelian(&nu, &sum)?)?.scale(C64::new(0.5 * t * t, 0.0)))
}

#[derive(Clone, Debug)]
pub struct RemainderParts {
    pub t: f64,
    pub mu: SampledField,
    pub nu: SampledField,
    pub correction: SampledField,
    pub remainder: SampledField,
}

impl RemainderParts {
    pub fn gap(&self) -> Result<SampledField> {
        self.mu.sub(&self.nu)
    }
}

/// `mu_t`, `nu_t`, the correction and `r_t = mu_t - nu_t + correction` for one generator.
pub fn remainder_parts(gen: &FiberGenerator, spec: &GeneratorSpec, t: f64) -> Result<RemainderParts> {
    let grid = gen.grid();
    let mu = gen.semigroup(t)?;
    let nu = abelian_semigroup(spec, t, grid)?.field;
    let correction = correction_term(spec, t, grid)?;
    let remainder = mu.sub(&nu)?.add(&correction)?;
    Ok(RemainderParts { t, mu, nu, correction, remainder })
}

/// `r_t` with `mu_t` from the expm route.
pub fn remainder(spec: &GeneratorSpec, t: f64, grid: &GridSpec) -> Result<SampledField> {
    let gen = FiberGenerator::new(spec, grid, 1.0)?;
    Ok(remainder_parts(&gen, spec, t)?.remainder)
}

/// Sup norms of the even and odd parts of a field in `x3`.
pub fn x3_parity_norms(field: &SampledField) -> (f64, f64) {
    let g = field.grid();
    let ax = g.dim() - 1;
    let nx = g.points[ax];
    let (mut even, mut odd) = (0.0f64, 0.0f64);
    for i in 0..g.len() {
        let mut idx = g.unravel(i);
        idx[ax] = (nx - idx[ax]) % nx;
        let r = field.values()[g.ravel(&idx)];
        let v = field.values()[i];
        even = even.max(((v + r) * 0.5).norm());
        odd = odd.max(((v - r) * 0.5).norm());
    }
    (even, odd)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayEntry {
    pub t: f64,
    #[serde(rename = "C")]
    pub c: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayReport {
    pub p: f64,
    pub shells: [f64; 2],
    pub entries: Vec<DecayEntry>,
    pub ratio: f64,
}

/// Radial window `[0.25 L, 0.9 L]` minus the 3-cell block around the origin.
pub fn shell_points(grid: &GridSpec) -> ([f64; 2], Vec<(usize, f64)>) {
    let l = grid.half_extent.iter().cloned().fold(f64::INFINITY, f64::min);
    let shells = [0.25 * l, 0.9 * l];
    let h = grid.spacings();
    let pts = (0..grid.len())
        .filter_map(|i| {
            let x = grid.point(i, Space::Position);
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let near = x.iter().zip(&h).all(|(v, hk)| v.abs() <= 3.0 * hk + 1e-12);
            (r >= shells[0] && r <= shells[1] && !near).then_some((i, r))
        })
        .collect();
    (shells, pts)
}

/// `C(t) = sup_shells |f_t(x)| |x|^p / min(t, 1/t)` per field and the max/min spread.
pub fn decay_report(fields: &[(f64, SampledField)], p: f64) -> Result<DecayReport> {
    let first = fields.first().ok_or_else(|| Error::InvalidArgument("no fields".into()))?;
    let grid = first.1.grid();
    let (shells, pts) = shell_points(grid);
    if pts.is_empty() {
        return Err(Error::InvalidArgument("empty shell set".into()));
    }
    let mut entries = Vec::with_capacity(fields.len());
    for (t, f) in fields {
        check_t(*t)?;
        f.same_grid(&first.1)?;
        f.expect_space(Space::Position)?;
        let sup = pts.iter().map(|&(i, r)| f.values()[i].norm() * r.powf(p)).fold(0.0, f64::max);
        entries.push(DecayEntry { t: *t, c: sup / t.min(1.0 / t) });
    }
    let max = entries.iter().map(|e| e.c).fold(0.0, f64::max);
    let min = entries.iter().map(|e| e.c).fold(f64::INFINITY, f64::min);
    let ratio = if max == 0.0 { 1.0 } else { max / min };
    Ok(DecayReport { p, shells, entries, ratio })
}

#[derive(Clone, Debug, Serialize)]
pub struct FourierFit {
    pub t: f64,
    pub alpha: Vec<u32>,
    pub c: f64,
    pub sup: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FourierRemainderReport {
    pub generator: String,
    pub fits: Vec<FourierFit>,
    /// `max_t |h_t(0)|`.
    pub h_at_zero: f64,
    /// Max/min spread of `c` across `t`, per multi-index.
    pub ratios: Vec<(Vec<u32>, f64)>,
}

/// `h_t = mu_t^ - nu_t^ + correction^` on the frequency grid.
pub fn fourier_remainder(gen: &FiberGenerator, spec: &GeneratorSpec, t: f64) -> Result<SampledField> {
    let parts = remainder_parts(gen, spec, t)?;
    grid::fourier_forward(&parts.remainder)
}

/// Fits `c_alpha = sup |D^alpha h_t| / (min(t^2 psi^2, (t psi)^{-1}) rho^{-2-|alpha|})` for `|alpha| <= alpha_max`.
pub fn fourier_remainder_check(
    spec: &GeneratorSpec,
    ts: &[f64],
    grid: &GridSpec,
    alpha_max: u32,
) -> Result<FourierRemainderReport> {
    if alpha_max > 1 {
        return Err(Error::InvalidArgument("alpha_max must be 0 or 1".into()));
    }
    let gen = FiberGenerator::new(spec, grid, 1.0)?;
    let psi = symbol_on_grid(spec, grid);
    let d = grid.dim();
    let mut alphas = vec![vec![0u32; d]];
    if alpha_max == 1 {
        alphas.extend((0..d).map(|k| unit(d, k)));
    }
    let origin = grid.origin_index();
    let mut fits = Vec::new();
    let mut h_at_zero = 0.0f64;
    for &t in ts {
        let r = remainder_parts(&gen, spec, t)?.remainder;
        for alpha in &alphas {
            // D^alpha h = F((-i x)^alpha r)
            let k: u32 = alpha.iter().sum();
            let phase = C64::new(0.0, -1.0).powu(k);
            let dh = grid::fourier_forward(&apply_t(&r, alpha)?.scale(phase))?;
            if k == 0 {
                h_at_zero = h_at_zero.max(dh.values()[origin].norm());
            }
            let mut c = 0.0f64;
            let mut sup = 0.0f64;
            for i in 0..grid.len() {
                let p = psi.values()[i].re;
                if i == origin || p <= 0.0 {
                    continue;
                }
                let xi = grid.point(i, Space::Frequency);
                let w = (t * t * p * p).min(1.0 / (t * p)) * rho(&xi).powi(-2 - k as i32);
                let v = dh.values()[i].norm();
                sup = sup.max(v);
                c = c.max(v / w);
            }
            fits.push(FourierFit { t, alpha: alpha.clone(), c, sup });
        }
    }
    let ratios = alphas
        .iter()
        .map(|a| {
            let cs: Vec<f64> = fits.iter().filter(|f| &f.alpha == a).map(|f| f.c).collect();
            let max = cs.iter().cloned().fold(0.0, f64::max);
            let min = cs.iter().cloned().fold(f64::INFINITY, f64::min);
            (a.clone(), if max == 0.0 { 1.0 } else { max / min })
        })
        .collect();
    Ok(FourierRemainderReport { generator: spec.name.clone(), fits, h_at_zero, ratios })
}

/// Fourier transform of the first-order resolvent term `i lambda sum_j d_{1j} psi d_{2j} psi / (z + psi)^3`.
pub fn resolvent_first_order_hat(spec: &GeneratorSpec, z: C64, grid: &GridSpec) -> Result<SampledField> {
    let pair = gradient_pairing(spec, grid)?;
    let psi = symbol_on_grid(spec, grid);
    let lam = lambda_of(grid);
    let f = pair.zip_with(&psi, |g, p| g / (z + p.re).powi(3))?;
    Ok(f.map_with_point(|xi, v| v * C64::new(0.0, lam(xi))))
}

/// `-sum_j d3 (T_{1j} B0 *0 T_{2j} P *0 B0)` in position space.
pub fn resolvent_first_order_space(spec: &GeneratorSpec, z: C64, grid: &GridSpec) -> Result<SampledField> {
    let n = grid.heisenberg_n()?;
    let d = grid.dim();
    let psi = symbol_on_grid(spec, grid);
    let b0 = grid::fourier_inverse(&psi.map(|p| 1.0 / (z + p.re)))?;
    let p = realize_on_grid(spec, grid);
    let mut sum = SampledField::zeros(grid, Space::Position);
    for j in 0..n {
        let a = apply_t(&b0, &unit(d, j))?;
        let b = apply_t(&p, &unit(d, n + j))?;
        sum = sum.add(&convolve_abelian(&convolve_abelian(&a, &b)?, &b0)?)?;
    }
    Ok(d3_symmetric(&sum)?.scale(C64::new(-1.0, 0.0)))
}

#[derive(Clone, Debug, Serialize)]
pub struct ResolventPerturbationReport {
    pub z: [f64; 2],
    /// `sup |F^| / (psi^2 (|z| + psi)^{-3} rho^{-2})` for the first-order term.
    pub first_order_fit: f64,
    /// The same with `rho^{-1}`, the weight of the first-order class.
    pub first_order_class_fit: f64,
    /// `sup |H^| / (psi^2 (|z| + psi)^{-3} rho^{-2})`.
    pub error_fit: f64,
    pub first_order_sup: f64,
    pub error_sup: f64,
    pub hierarchy: bool,
}

fn fit(field: &SampledField, psi: &SampledField, z: C64, rho_power: i32) -> (f64, f64) {
    let grid = field.grid();
    let mut c = 0.0f64;
    let mut sup = 0.0f64;
    for i in 0..grid.len() {
        let p = psi.values()[i].re;
        let v = field.values()[i].norm();
        sup = sup.max(v);
        if p <= 0.0 {
            continue;
        }
        let xi = grid.point(i, Space::Frequency);
        let w = p * p * (z.norm() + p).powi(-3) * rho(&xi).powi(-rho_power);
        c = c.max(v / w);
    }
    (c, sup)
}

/// `H_z^ = B1^ - B0^ - F^` from solved resolvents, fitted against its class weight.
pub fn resolvent_perturbation_check(spec: &GeneratorSpec, z: C64, grid: &GridSpec) -> Result<ResolventPerturbationReport> {
    let gen = FiberGenerator::new(spec, grid, 1.0)?;
    resolvent_perturbation_with(&gen, spec, z)
}

pub fn resolvent_perturbation_with(
    gen: &FiberGenerator,
    spec: &GeneratorSpec,
    z: C64,
) -> Result<ResolventPerturbationReport> {
    let grid = gen.grid();
    let psi = symbol_on_grid(spec, grid);
    let b1 = grid::fourier_forward(&gen.resolvent(z)?)?;
    let b0 = psi.map(|p| 1.0 / (z + p.re));
    let f = resolvent_first_order_hat(spec, z, grid)?;
    let h = b1.sub(&b0)?.sub(&f)?;
    let (first_order_fit, first_order_sup) = fit(&f, &psi, z, 2);
    let (first_order_class_fit, _) = fit(&f, &psi, z, 1);
    let (error_fit, error_sup) = fit(&h, &psi, z, 2);
    Ok(ResolventPerturbationReport {
        z: [z.re, z.im],
        first_order_fit,
        first_order_class_fit,
        error_fit,
        first_order_sup,
        error_sup,
        hierarchy: error_fit.is_finite() && error_fit < first_order_fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn correction_vanishes_on_the_xi1_plane_and_is_real() {
        let g = GridSpec::cubic(1, 12, 6.0).unwrap();
        let spec = GeneratorSpec::gamma_variance();
        let c = correction_hat(&spec, 1.0, &g).unwrap();
        for i in 0..g.len() {
            let xi = g.point(i, Space::Frequency);
            if xi[0] == 0.0 {
                assert_eq!(c.values()[i].norm(), 0.0);
            }
        }
        let x = correction_term(&spec, 1.0, &g).unwrap();
        assert!(x.max_imag() < 1e-9 * x.sup_norm());
    }

    #[test]
    fn decay_report_definitions() {
        let g = GridSpec::cubic(1, 16, 8.0).unwrap();
        let zero = SampledField::zeros(&g, Space::Position);
        let r = decay_report(&[(0.5, zero.clone()), (2.0, zero)], 5.0).unwrap();
        assert!(r.entries.iter().all(|e| e.c == 0.0));
        let f = grid::sample(
            |x| {
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                C64::new(if r > 0.0 { r.powf(-5.0) } else { 0.0 }, 0.0)
            },
            &g,
        )
        .unwrap();
        let r = decay_report(&[(0.25, f.clone()), (1.0, f.clone()), (3.0, f)], 5.0).unwrap();
        for e in &r.entries {
            assert!((e.c - 1.0 / e.t.min(1.0 / e.t)).abs() < 1e-12);
        }
        assert_eq!(r.shells, [2.0, 7.2]);
        assert!(decay_report(&[], 5.0).is_err());
    }

    #[test]
    fn parity_of_odd_and_even_fields() {
        let g = GridSpec::cubic(1, 8, 4.0).unwrap();
        let odd = grid::sample(|x| C64::new(x[2] * (-2.0 * x[2] * x[2]).exp(), 0.0), &g).unwrap();
        let (e, o) = x3_parity_norms(&odd);
        assert!(e < 1e-12 * o && o > 0.1);
        let even = grid::sample(|x| C64::new((-2.0 * x[2] * x[2]).exp(), 0.0), &g).unwrap();
        let (e, o) = x3_parity_norms(&even);
        assert!(o < 1e-12 * e && e > 0.1);
    }
}
