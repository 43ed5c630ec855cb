//! Special functions: `K_nu`, `Gamma`, gamma-variance densities, slope fits,
//! and Gauss–Legendre rules.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Largest supported Bessel order.
pub const MAX_BESSEL_ORDER: f64 = 10.0;

/// Below this argument `K_mu` comes from Temme's series, above it from Steed's
/// continued fraction. Both sides agree to ~1e-15 at the switch.
const TEMME_SWITCH: f64 = 2.0;

const EPS: f64 = 1e-16;

// Taylor coefficients of 1/Gamma(z) = sum c_k z^k, k = 1..26.
const RGAMMA: [f64; 26] = [
    1.0,
    0.5772156649015329,
    -0.6558780715202538,
    -0.0420026350340952,
    0.1665386113822915,
    -0.0421977345555443,
    -0.0096219715278770,
    0.0072189432466630,
    -0.0011651675918591,
    -0.0002152416741149,
    0.0001280502823882,
    -0.0000201348547807,
    -0.0000012504934821,
    0.0000011330272320,
    -0.0000002056338417,
    0.0000000061160950,
    0.0000000050020075,
    -0.0000000011812746,
    0.0000000001043427,
    0.0000000000077823,
    -0.0000000000036968,
    0.0000000000005100,
    -0.0000000000000206,
    -0.0000000000000054,
    0.0000000000000014,
    0.0000000000000001,
];

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Temme's auxiliary quantities for |mu| <= 1/2:
/// (gam1, gam2, 1/Gamma(1+mu), 1/Gamma(1-mu)).
fn temme_gammas(mu: f64) -> (f64, f64, f64, f64) {
    let mut even = 0.0; // sum over even k of c_k mu^(k-2)
    let mut odd = 0.0; // sum over odd k of c_k mu^(k-1)
    let mut p = 1.0;
    for (i, &c) in RGAMMA.iter().enumerate() {
        let k = i + 1;
        if k % 2 == 1 {
            odd += c * p;
        } else {
            even += c * p;
            p *= mu * mu;
        }
    }
    let gam1 = -even;
    let gam2 = odd;
    let gampl = gam2 - mu * gam1;
    let gammi = gam2 + mu * gam1;
    (gam1, gam2, gampl, gammi)
}

/// Returns `(K_mu(x), K_{mu+1}(x))` for `|mu| <= 1/2`.
fn bessel_k_pair(mu: f64, x: f64) -> (f64, f64) {
    let mu2 = mu * mu;
    if x < TEMME_SWITCH {
        let x2 = 0.5 * x;
        let pimu = PI * mu;
        let fact = if pimu.abs() < EPS { 1.0 } else { pimu / pimu.sin() };
        let d = -x2.ln();
        let e = mu * d;
        let fact2 = if e.abs() < EPS { 1.0 } else { e.sinh() / e };
        let (gam1, gam2, gampl, gammi) = temme_gammas(mu);
        let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
        let mut sum = ff;
        let ee = e.exp();
        let mut p = 0.5 * ee / gampl;
        let mut q = 0.5 / (ee * gammi);
        let mut c = 1.0;
        let dd = x2 * x2;
        let mut sum1 = p;
        for i in 1..500 {
            let fi = i as f64;
            ff = (fi * ff + p + q) / (fi * fi - mu2);
            c *= dd / fi;
            p /= fi - mu;
            q /= fi + mu;
            let del = c * ff;
            sum += del;
            sum1 += c * (p - fi * ff);
            if del.abs() < sum.abs() * EPS {
                break;
            }
        }
        (sum, sum1 * 2.0 / x)
    } else {
        let mut b = 2.0 * (1.0 + x);
        let mut d = 1.0 / b;
        let mut h = d;
        let mut delh = d;
        let mut q1 = 0.0;
        let mut q2 = 1.0;
        let a1 = 0.25 - mu2;
        let mut q = a1;
        let mut c = a1;
        let mut a = -a1;
        let mut s = 1.0 + q * delh;
        for i in 2..10_000 {
            let fi = i as f64;
            a -= 2.0 * (fi - 1.0);
            c = -a * c / fi;
            let qnew = (q1 - b * q2) / a;
            q1 = q2;
            q2 = qnew;
            q += c * qnew;
            b += 2.0;
            d = 1.0 / (b + a * d);
            delh = (b * d - 1.0) * delh;
            h += delh;
            let dels = q * delh;
            s += dels;
            if (dels / s).abs() < EPS {
                break;
            }
        }
        h *= a1;
        let k = (PI / (2.0 * x)).sqrt() * (-x).exp() / s;
        (k, k * (mu + x + 0.5 - h) / x)
    }
}

/// Modified Bessel function of the second kind `K_nu(x)`, `0 <= nu <= 10`, `x > 0`.
pub fn bessel_k(nu: f64, x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("bessel_k needs x > 0, got {x}")));
    }
    if !(0.0..=MAX_BESSEL_ORDER).contains(&nu) {
        return Err(Error::Domain(format!("bessel_k order {nu} outside [0, {MAX_BESSEL_ORDER}]")));
    }
    let nl = (nu + 0.5).floor();
    let mu = nu - nl;
    let (mut k0, mut k1) = bessel_k_pair(mu, x);
    for i in 1..=(nl as usize) {
        let next = (mu + i as f64) * (2.0 / x) * k1 + k0;
        k0 = k1;
        k1 = next;
    }
    Ok(k0)
}

/// `Gamma(t)` for `t > 0` via the Lanczos approximation.
pub fn gamma_fn(t: f64) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("gamma_fn needs t > 0, got {t}")));
    }
    Ok(gamma_unchecked(t))
}

fn gamma_unchecked(t: f64) -> f64 {
    if t < 0.5 {
        return PI / ((PI * t).sin() * gamma_unchecked(1.0 - t));
    }
    if t == t.floor() && t <= 171.0 {
        return (1..t as u64).fold(1.0, |acc, k| acc * k as f64);
    }
    let z = t - 1.0;
    let mut a = LANCZOS[0];
    let tt = z + LANCZOS_G + 0.5;
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (z + i as f64);
    }
    (2.0 * PI).sqrt() * tt.powf(z + 0.5) * (-tt).exp() * a
}

/// Density of the gamma-variance law at time `t` in dimension `d` at radius `r`:
/// the inverse transform of `(1 + |xi|^2)^{-t}`.
pub fn gamma_variance_density(t: f64, d: usize, r: f64) -> Result<f64> {
    if !(t > 0.0) || d == 0 {
        return Err(Error::Domain(format!("need t > 0 and d >= 1, got t = {t}, d = {d}")));
    }
    let half_d = d as f64 / 2.0;
    let r = r.abs();
    if r == 0.0 {
        if 2.0 * t > d as f64 {
            return Ok((4.0 * PI).powf(-half_d) * gamma_unchecked(t - half_d) / gamma_unchecked(t));
        }
        return Err(Error::Domain("density is singular at the origin when 2t <= d".into()));
    }
    let nu = (t - half_d).abs();
    let k = bessel_k(nu, r)?;
    Ok((2.0 * PI).powf(-half_d) * 2f64.powf(1.0 - t) / gamma_unchecked(t)
        * r.powf(t - half_d)
        * k)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Power,
    Logarithmic,
    Bounded,
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Asymptotic {
    pub regime: Regime,
    /// Exponent of `|x|` as `x -> 0`; zero for the logarithmic and bounded regimes.
    pub exponent: f64,
}

/// Behaviour of the gamma-variance density near the origin.
pub fn asymptotic_classify(t: f64, d: usize) -> Asymptotic {
    let e = 2.0 * t - d as f64;
    if e.abs() < 1e-12 {
        Asymptotic { regime: Regime::Logarithmic, exponent: 0.0 }
    } else if e < 0.0 {
        Asymptotic { regime: Regime::Power, exponent: e }
    } else {
        Asymptotic { regime: Regime::Bounded, exponent: 0.0 }
    }
}

/// Leading behaviour of the gamma-variance density as `r -> 0`, in each of the three regimes.
pub fn near_origin_asymptote(t: f64, d: usize, r: f64) -> Result<f64> {
    if !(t > 0.0) || d == 0 || !(r > 0.0) {
        return Err(Error::Domain(format!("need t > 0, d >= 1, r > 0, got t = {t}, d = {d}, r = {r}")));
    }
    let half_d = d as f64 / 2.0;
    let a = asymptotic_classify(t, d);
    Ok(match a.regime {
        Regime::Power => {
            gamma_unchecked(half_d - t) / (4f64.powf(t) * PI.powf(half_d) * gamma_unchecked(t)) * r.powf(a.exponent)
        }
        Regime::Logarithmic => (1.0 / r).ln() / (2f64.powf(d as f64 - 1.0) * PI.powf(half_d) * gamma_unchecked(half_d)),
        Regime::Bounded => gamma_variance_density(t, d, 0.0)?,
    })
}

/// Least-squares slope of `log value` against `log r`.
pub fn slope_fit(samples: &[(f64, f64)]) -> Result<f64> {
    let mut radii: Vec<f64> = samples.iter().map(|s| s.0).collect();
    radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
    radii.dedup();
    if radii.len() < 5 {
        return Err(Error::InvalidArgument(format!(
            "slope fit needs at least 5 distinct radii, got {}",
            radii.len()
        )));
    }
    if samples.iter().any(|&(r, v)| !(r > 0.0) || !(v > 0.0)) {
        return Err(Error::Domain("slope fit needs positive radii and values".into()));
    }
    let n = samples.len() as f64;
    let (sx, sy) = samples.iter().fold((0.0, 0.0), |(a, b), &(r, v)| (a + r.ln(), b + v.ln()));
    let (mx, my) = (sx / n, sy / n);
    let (num, den) = samples.iter().fold((0.0, 0.0), |(a, b), &(r, v)| {
        let dx = r.ln() - mx;
        (a + dx * (v.ln() - my), b + dx * dx)
    });
    Ok(num / den)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    (x.iter().map(|t| c + h * t).collect(), w.iter().map(|v| v * h).collect())
}

/// Inverse Fourier transform of a radial symbol `s(|xi|)` in dimension 1 or 3, at radius `r > 0`:
/// `(1/pi) int_0^inf s(k) cos(k r) dk` for d = 1 and `(1/(2 pi^2 r)) int_0^inf k s(k) sin(k r) dk` for d = 3.
///
/// Each half period is integrated by Gauss–Legendre; the alternating tail is summed by iterated averaging
/// of the partial sums, which also assigns the Abel value to non-decaying integrands.
pub fn radial_fourier_inverse(s: &dyn Fn(f64) -> f64, d: usize, r: f64) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!("radius must be positive, got {r}")));
    }
    let (offset, integrand): (f64, Box<dyn Fn(f64) -> f64 + '_>) = match d {
        1 => (0.5, Box::new(|k: f64| s(k) * (k * r).cos())),
        3 => (0.0, Box::new(|k: f64| k * s(k) * (k * r).sin())),
        _ => return Err(Error::InvalidArgument(format!("radial inversion supports d = 1 or 3, got {d}"))),
    };
    const SEGMENTS: usize = 80;
    const LEVELS: usize = 40;
    let half = PI / r;
    let mut edges = vec![0.0];
    edges.extend((0..=SEGMENTS).map(|j| (j as f64 + offset) * half).filter(|&k| k > 0.0));
    let mut partial = Vec::with_capacity(edges.len());
    let mut acc = 0.0;
    for w in edges.windows(2) {
        let (x, wt) = gauss_legendre_on(32, w[0], w[1]);
        acc += x.iter().zip(&wt).map(|(k, v)| v * integrand(*k)).sum::<f64>();
        if !acc.is_finite() {
            return Err(Error::NonFinite { coordinate: vec![w[0], w[1]] });
        }
        partial.push(acc);
    }
    let mut tail = partial[partial.len() - LEVELS - 1..].to_vec();
    while tail.len() > 1 {
        tail = tail.windows(2).map(|p| 0.5 * (p[0] + p[1])).collect();
    }
    let scale = if d == 1 { 1.0 / PI } else { 1.0 / (2.0 * PI * PI * r) };
    Ok(tail[0] * scale)
}
