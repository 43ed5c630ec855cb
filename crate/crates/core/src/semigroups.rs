//! Semigroups `nu_t` (Abelian) and `mu_t` (Heisenberg) and resolvents of a generator.
//!
//! The Heisenberg routes work fiberwise: a Fourier transform in `x3` splits the
//! convolution operator into one dense twisted-convolution matrix per frequency
//! `lambda`, so the full generator is block diagonal in that basis.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::generators::{realize_on_grid, symbol_on_grid, GeneratorSpec};
use crate::grid::{self, GridSpec, SampledField, Space};
use crate::group_conv::{from_fibers, to_fibers, Plane, ThetaLaw};
use crate::linalg::{self, CMat, CVec, HessenbergForm};
use crate::specfun::{gamma_variance_density, gauss_legendre_on, slope_fit};
use crate::C64;

/// Default cap on the number of grid points handled by the matrix routes.
pub const MATRIX_CAP: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    Fourier,
    Expm,
    Contour,
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Route::Fourier => "fourier",
            Route::Expm => "expm",
            Route::Contour => "contour",
        })
    }
}

impl FromStr for Route {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fourier" => Ok(Route::Fourier),
            "expm" => Ok(Route::Expm),
            "contour" => Ok(Route::Contour),
            _ => Err(Error::Parse(format!("unknown route {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Diagnostics {
    pub mass: f64,
    pub min_value: f64,
    pub sup: f64,
    pub boundary_mass: f64,
    pub max_imag: f64,
}

impl Diagnostics {
    pub fn of(field: &SampledField) -> Self {
        Diagnostics {
            mass: field.integral().re,
            min_value: field.min_real(),
            sup: field.sup_norm(),
            boundary_mass: field.boundary_mass(),
            max_imag: field.max_imag(),
        }
    }

    pub fn subprobabilistic(&self) -> bool {
        self.mass <= 1.0 + 1e-6
    }

    pub fn positive(&self) -> bool {
        self.min_value >= -1e-6 * self.sup
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ContourDiagnostics {
    /// Sup-difference between the full and the half node count, relative to the sup.
    pub quadrature_delta: f64,
    /// Estimate of the neglected ray tails beyond `r_max`, relative to the sup.
    pub tail_bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SemigroupResult {
    pub t: f64,
    #[serde(skip)]
    pub field: SampledField,
    pub route: Route,
    pub generator: String,
    pub theta: f64,
    pub diagnostics: Diagnostics,
    pub contour: Option<ContourDiagnostics>,
}

impl SemigroupResult {
    fn new(t: f64, field: SampledField, route: Route, spec: &GeneratorSpec, theta: f64) -> Self {
        let diagnostics = Diagnostics::of(&field);
        SemigroupResult { t, field, route, generator: spec.name.clone(), theta, diagnostics, contour: None }
    }
}

/// Three-piece contour: rays `r e^{-+i phi0}`, `1/t <= r <= r_max`, joined by the arc `|z| = 1/t`.
#[derive(Clone, Debug, Serialize)]
pub struct ContourSpec {
    pub phi0: f64,
    pub t: f64,
    pub r_max: f64,
    pub nodes_per_piece: usize,
}

impl ContourSpec {
    pub fn new(t: f64) -> Result<Self> {
        check_t(t)?;
        Ok(ContourSpec { phi0: 0.75 * PI, t, r_max: 50.0 / t, nodes_per_piece: 200 })
    }

    pub fn validate(&self) -> Result<()> {
        check_t(self.t)?;
        if !(self.phi0 > PI / 2.0 && self.phi0 < PI) {
            return Err(Error::InvalidArgument(format!("phi0 = {} is outside (pi/2, pi)", self.phi0)));
        }
        if !(self.r_max > 1.0 / self.t) {
            return Err(Error::InvalidArgument("r_max must exceed 1/t".into()));
        }
        if self.nodes_per_piece < 2 {
            return Err(Error::InvalidArgument("at least 2 nodes per piece".into()));
        }
        Ok(())
    }

    /// Nodes `z_k` and weights `w_k` with `int_Gamma F dz ~ sum w_k F(z_k)`, oriented upward.
    pub fn nodes(&self, per_piece: usize) -> Vec<(C64, C64)> {
        let r0 = 1.0 / self.t;
        let up = C64::from_polar(1.0, self.phi0);
        let down = C64::from_polar(1.0, -self.phi0);
        let mut out = Vec::with_capacity(3 * per_piece);
        let (rs, ws) = gauss_legendre_on(per_piece, r0, self.r_max);
        for (r, w) in rs.iter().zip(&ws) {
            // traversed from r_max down to r0
            out.push((down * r, -down * w));
        }
        let (ps, wp) = gauss_legendre_on(per_piece, -self.phi0, self.phi0);
        for (p, w) in ps.iter().zip(&wp) {
            let z = C64::from_polar(r0, *p);
            out.push((z, C64::new(0.0, 1.0) * z * w));
        }
        for (r, w) in rs.iter().zip(&ws) {
            out.push((up * r, up * w));
        }
        out
    }
}

fn check_t(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("t = {t} must be positive")))
    }
}

fn check_cap(grid: &GridSpec, cap: usize) -> Result<()> {
    if grid.len() > cap {
        return Err(Error::CapExceeded { dim: grid.len(), cap });
    }
    Ok(())
}

/// `nu_t = F^{-1}(e^{-t psi})`.
pub fn abelian_semigroup(spec: &GeneratorSpec, t: f64, grid: &GridSpec) -> Result<SemigroupResult> {
    check_t(t)?;
    let psi = symbol_on_grid(spec, grid);
    let field = grid::fourier_inverse(&psi.map(|p| (-t * p).exp()))?;
    Ok(SemigroupResult::new(t, field, Route::Fourier, spec, 0.0))
}

/// `f o inv_theta` computed fiberwise: `f~(-w, -lambda) e^{-i lambda theta w1.w2}`.
pub fn compose_inverse(law: ThetaLaw, field: &SampledField) -> Result<SampledField> {
    let grid = field.grid();
    let plane = Plane::new(grid)?;
    let fib = to_fibers(field)?;
    let nf = plane.fibers;
    let out: Vec<Vec<C64>> = (0..nf)
        .map(|m| {
            let src = &fib[(nf - m) % nf];
            let lam = plane.lambda(m);
            (0..plane.len)
                .map(|w| src[plane.neg(w)] * C64::from_polar(1.0, -lam * law.theta * plane.shear(w, w)))
                .collect()
        })
        .collect();
    Ok(from_fibers(grid, &out))
}

/// `(P + P o inv) / 2` for the Heisenberg law.
pub fn group_symmetrize(field: &SampledField) -> Result<SampledField> {
    let inv = compose_inverse(ThetaLaw::heisenberg(), field)?;
    Ok(field.add(&inv)?.scale(C64::new(0.5, 0.0)))
}

/// The convolution operator `g -> P *_theta g` split into `x3`-frequency fibers.
pub struct FiberGenerator {
    grid: GridSpec,
    plane: Plane,
    theta: f64,
    mats: Vec<CMat>,
    delta: Vec<CVec>,
}

impl FiberGenerator {
    pub fn new(spec: &GeneratorSpec, grid: &GridSpec, theta: f64) -> Result<Self> {
        Self::from_kernel(&realize_on_grid(spec, grid), theta)
    }

    /// Builds the fibers from an explicit position-space kernel.
    pub fn from_kernel(kernel: &SampledField, theta: f64) -> Result<Self> {
        let grid = kernel.grid().clone();
        check_cap(&grid, MATRIX_CAP)?;
        ThetaLaw::new(theta)?;
        let plane = Plane::new(&grid)?;
        let pf = to_fibers(kernel)?;
        let mats = (0..plane.fibers)
            .map(|m| linalg::from_row_major(plane.len, &plane.twisted_matrix(&pf[m], plane.lambda(m) * theta)))
            .collect();
        let delta = to_fibers(&SampledField::delta(&grid))?.into_iter().map(CVec::from_vec).collect();
        Ok(FiberGenerator { grid, plane, theta, mats, delta })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn fiber(&self, m: usize) -> &CMat {
        &self.mats[m]
    }

    fn assemble(&self, fibers: Vec<CVec>) -> SampledField {
        let v: Vec<Vec<C64>> = fibers.into_iter().map(|c| c.iter().cloned().collect()).collect();
        from_fibers(&self.grid, &v)
    }

    /// Applies the generator to a position-space field.
    pub fn apply(&self, f: &SampledField) -> Result<SampledField> {
        f.same_grid(&SampledField::zeros(&self.grid, Space::Position))?;
        let fib = to_fibers(f)?;
        let out = (0..self.plane.fibers).map(|m| &self.mats[m] * CVec::from_vec(fib[m].clone())).collect();
        Ok(self.assemble(out))
    }

    /// `exp(tA) delta` by fiberwise scaling and squaring.
    pub fn semigroup(&self, t: f64) -> Result<SampledField> {
        check_t(t)?;
        let out: Result<Vec<CVec>> = (0..self.plane.fibers)
            .into_par_iter()
            .map(|m| {
                let e = linalg::expm(&(&self.mats[m] * C64::new(t, 0.0)))?;
                Ok(e * &self.delta[m])
            })
            .collect();
        Ok(self.assemble(out?))
    }

    /// Solves `(z - A) b = delta`.
    pub fn resolvent(&self, z: C64) -> Result<SampledField> {
        let out: Result<Vec<CVec>> = (0..self.plane.fibers)
            .into_par_iter()
            .map(|m| {
                let mut a = -self.mats[m].clone();
                for i in 0..a.nrows() {
                    a[(i, i)] += z;
                }
                linalg::solve(a, &self.delta[m])
                    .map_err(|_| Error::Singular(format!("z = {z} is in the numerical spectrum")))
            })
            .collect();
        Ok(self.assemble(out?))
    }

    /// `(1 / 2 pi i) int_Gamma e^{zt} (z - A)^{-1} delta dz` at the full and the half node count.
    pub fn contour(&self, contour: &ContourSpec) -> Result<(SampledField, ContourDiagnostics)> {
        contour.validate()?;
        let full = contour.nodes(contour.nodes_per_piece);
        let half = contour.nodes(contour.nodes_per_piece.div_ceil(2));
        let norm = C64::new(0.0, 1.0 / (2.0 * PI)) * C64::new(-1.0, 0.0);
        let t = contour.t;
        let tails = [C64::from_polar(contour.r_max, contour.phi0), C64::from_polar(contour.r_max, -contour.phi0)];
        let per: Result<Vec<(CVec, CVec, f64)>> = (0..self.plane.fibers)
            .into_par_iter()
            .map(|m| {
                let hf = HessenbergForm::new(self.mats[m].clone());
                let c = hf.q.adjoint() * &self.delta[m];
                let integrate = |nodes: &[(C64, C64)]| -> Result<CVec> {
                    let mut acc = CVec::zeros(c.len());
                    for &(z, w) in nodes {
                        let y = hf.shifted_solve(z, &c)?;
                        acc += y * ((z * t).exp() * w);
                    }
                    Ok(&hf.q * acc * norm)
                };
                let a = integrate(&full)?;
                let b = integrate(&half)?;
                let mut tail = 0.0f64;
                for z in tails {
                    let y = hf.shifted_solve(z, &c)?;
                    let decay = (contour.r_max * t * contour.phi0.cos()).exp() / (t * contour.phi0.cos().abs());
                    tail += decay * y.norm() / (2.0 * PI);
                }
                Ok((a, b, tail))
            })
            .collect();
        let per = per?;
        let tail_abs: f64 = per.iter().map(|p| p.2).sum::<f64>() / self.grid.spacing(self.grid.x3_axis()) / self.plane.fibers as f64;
        let (a, b): (Vec<CVec>, Vec<CVec>) = per.into_iter().map(|(a, b, _)| (a, b)).unzip();
        let fa = self.assemble(a);
        let fb = self.assemble(b);
        let sup = fa.sup_norm().max(f64::MIN_POSITIVE);
        let diag = ContourDiagnostics {
            quadrature_delta: fa.sub(&fb)?.sup_norm() / sup,
            tail_bound: tail_abs / sup,
        };
        if !(diag.quadrature_delta < 1e-6) {
            return Err(Error::NotConverged(format!(
                "contour quadrature changes by {:.2e} between node counts",
                diag.quadrature_delta
            )));
        }
        Ok((fa, diag))
    }

    /// The dense operator on grid values; `(u, v)` entries are `(P *_theta e_v)(u)`.
    pub fn dense(&self) -> CMat {
        let nf = self.plane.fibers;
        let np = self.plane.len;
        let n = self.grid.len();
        let lam: Vec<f64> = (0..nf).map(|m| self.plane.lambda(m)).collect();
        let x3 = self.grid.axis_values(self.grid.x3_axis(), Space::Position);
        // phase[d][m] = e^{i lambda_m (x_j - x_k)} / nf for j - k = d (mod nf)
        let phase: Vec<Vec<C64>> = (0..nf)
            .map(|d| lam.iter().map(|l| C64::from_polar(1.0 / nf as f64, l * (x3[d] - x3[0]))).collect())
            .collect();
        let mut data = vec![C64::new(0.0, 0.0); n * n];
        data.par_chunks_mut(n).enumerate().for_each(|(row, out)| {
            let (u, j) = (row / nf, row % nf);
            for v in 0..np {
                for k in 0..nf {
                    let ph = &phase[(j + nf - k) % nf];
                    let s: C64 = (0..nf).map(|m| self.mats[m][(u, v)] * ph[m]).sum();
                    out[v * nf + k] = s;
                }
            }
        });
        CMat::from_row_slice(n, n, &data)
    }
}

/// Dense generator matrix for `P *_theta` on the grid, capped at [`MATRIX_CAP`] points.
pub fn build_generator_matrix(spec: &GeneratorSpec, grid: &GridSpec, theta: f64) -> Result<CMat> {
    Ok(FiberGenerator::new(spec, grid, theta)?.dense())
}

/// `mu_t` for the law `*_theta` by the matrix exponential.
pub fn semigroup_expm(spec: &GeneratorSpec, t: f64, grid: &GridSpec, theta: f64) -> Result<SemigroupResult> {
    let field = FiberGenerator::new(spec, grid, theta)?.semigroup(t)?;
    Ok(SemigroupResult::new(t, field, Route::Expm, spec, theta))
}

/// `mu_t = exp(tA) delta` on the Heisenberg group.
pub fn heisenberg_semigroup_expm(spec: &GeneratorSpec, t: f64, grid: &GridSpec) -> Result<SemigroupResult> {
    semigroup_expm(spec, t, grid, 1.0)
}

/// `B_z` solving `(z delta - P) *_theta B_z = delta`.
pub fn resolvent(spec: &GeneratorSpec, z: C64, theta: f64, grid: &GridSpec) -> Result<SampledField> {
    FiberGenerator::new(spec, grid, theta)?.resolvent(z)
}

/// `mu_t` by contour quadrature of the resolvent, for the law `*_theta`.
pub fn contour_semigroup_theta(
    spec: &GeneratorSpec,
    grid: &GridSpec,
    theta: f64,
    contour: &ContourSpec,
) -> Result<SemigroupResult> {
    let (field, diag) = FiberGenerator::new(spec, grid, theta)?.contour(contour)?;
    let mut r = SemigroupResult::new(contour.t, field, Route::Contour, spec, theta);
    r.contour = Some(diag);
    Ok(r)
}

/// `mu_t` on the Heisenberg group by contour quadrature.
pub fn contour_semigroup(spec: &GeneratorSpec, t: f64, grid: &GridSpec, contour: &ContourSpec) -> Result<SemigroupResult> {
    if (contour.t - t).abs() > 1e-15 * t {
        return Err(Error::InvalidArgument("contour was built for a different t".into()));
    }
    contour_semigroup_theta(spec, grid, 1.0, contour)
}

#[derive(Clone, Debug, Serialize)]
pub struct ContourBoundEntry {
    pub k: u32,
    pub a: f64,
    pub t: f64,
    /// `|int_Gamma e^{zt} H(z) dz|` with `H(z) = (a + |z|)^{-k-1}`.
    pub integral: f64,
    pub bound_shape: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ContourBoundReport {
    pub phi0: f64,
    pub entries: Vec<ContourBoundEntry>,
    pub fitted_c: f64,
    pub passes: bool,
}

/// Checks `|int_Gamma e^{zt} (a + |z|)^{-k-1} dz| <= C t^k a^k (1 + a t)^{-k-1}` and fits `C`.
pub fn contour_bound_check(ks: &[u32], avals: &[f64], ts: &[f64], phi0: f64, claimed_c: f64) -> Result<ContourBoundReport> {
    let mut entries = Vec::new();
    for &k in ks {
        for &a in avals {
            if !(a > 0.0) {
                return Err(Error::InvalidArgument("a must be positive".into()));
            }
            for &t in ts {
                let mut c = ContourSpec::new(t)?;
                c.phi0 = phi0;
                c.validate()?;
                let h = |z: C64| (a + z.norm()).powi(-(k as i32) - 1);
                let integral_at = |n: usize| -> f64 {
                    c.nodes(n).iter().map(|&(z, w)| (z * t).exp() * w * h(z)).sum::<C64>().norm()
                };
                let integral = integral_at(400);
                let check = integral_at(200);
                if (integral - check).abs() > 1e-8 * integral.max(1e-300) {
                    return Err(Error::NotConverged(format!("contour bound quadrature at k={k}, a={a}, t={t}")));
                }
                let bound_shape = t.powi(k as i32) * a.powi(k as i32) * (1.0 + a * t).powi(-(k as i32) - 1);
                entries.push(ContourBoundEntry { k, a, t, integral, bound_shape, ratio: integral / bound_shape });
            }
        }
    }
    let fitted_c = entries.iter().map(|e| e.ratio).fold(0.0, f64::max);
    Ok(ContourBoundReport { phi0, entries, fitted_c, passes: fitted_c <= claimed_c })
}


#[derive(Clone, Debug, Serialize)]
pub struct SlopeReport {
    pub t: f64,
    pub window: [f64; 2],
    pub samples: usize,
    /// `2t - 2n - 1`, shared by `mu_t` and the Euclidean `nu_t` in dimension `2n + 1`.
    pub predicted: f64,
    pub heisenberg_slope: f64,
    pub abelian_slope: f64,
    /// Slope of the continuum gamma-variance density over the same radii, when applicable.
    pub continuum_slope: Option<f64>,
}

/// Log-log slopes of `mu_t` and `nu_t` against the Euclidean norm over `window`.
pub fn heisenberg_slope(spec: &GeneratorSpec, t: f64, grid: &GridSpec, window: [f64; 2]) -> Result<SlopeReport> {
    check_t(t)?;
    if !(window[0] > 0.0 && window[1] > window[0]) {
        return Err(Error::InvalidArgument(format!("bad radial window {window:?}")));
    }
    let d = grid.dim();
    let mu = heisenberg_semigroup_expm(spec, t, grid)?.field;
    let nu = abelian_semigroup(spec, t, grid)?.field;
    let pts: Vec<(usize, f64)> = (0..grid.len())
        .filter_map(|i| {
            let r = grid.point(i, Space::Position).iter().map(|v| v * v).sum::<f64>().sqrt();
            (r >= window[0] && r <= window[1]).then_some((i, r))
        })
        .collect();
    let fit = |f: &SampledField| {
        let samples: Vec<(f64, f64)> = pts.iter().map(|&(i, r)| (r, f.values()[i].re)).collect();
        slope_fit(&samples)
    };
    let continuum_slope = if spec.name == "gamma_variance" {
        let samples = pts
            .iter()
            .map(|&(_, r)| Ok((r, gamma_variance_density(t, d, r)?)))
            .collect::<Result<Vec<_>>>()?;
        Some(slope_fit(&samples)?)
    } else {
        None
    };
    Ok(SlopeReport {
        t,
        window,
        samples: pts.len(),
        predicted: 2.0 * t - d as f64,
        heisenberg_slope: fit(&mu)?,
        abelian_slope: fit(&nu)?,
        continuum_slope,
    })
}
