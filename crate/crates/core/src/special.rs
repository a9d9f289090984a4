//! Probability kernels: normal and Student t quantiles, central and
//! noncentral t distribution functions.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Inverse standard normal distribution function (Wichura's AS 241).
pub fn normal_quantile(p: f64) -> Result<f64> {
    check_probability(p)?;
    Ok(ppnd16(p))
}

fn check_probability(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "probability must lie in (0, 1), got {p}"
        )))
    }
}

fn poly(coef: &[f64], x: f64) -> f64 {
    coef.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn ppnd16(p: f64) -> f64 {
    const A: [f64; 8] = [
        3.387_132_872_796_366_6,
        1.331_416_678_917_843_8e2,
        1.971_590_950_306_551_4e3,
        1.373_169_376_550_946_1e4,
        4.592_195_393_154_987_1e4,
        6.726_577_092_700_870_1e4,
        3.343_057_558_358_812_8e4,
        2.509_080_928_730_122_7e3,
    ];
    const B: [f64; 8] = [
        1.0,
        4.231_333_070_160_091_1e1,
        6.871_870_074_920_579_1e2,
        5.394_196_021_424_751_1e3,
        2.121_379_430_158_659_6e4,
        3.930_789_580_009_271_1e4,
        2.872_908_573_572_194_3e4,
        5.226_495_278_852_854_6e3,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_6,
        4.630_337_846_156_545_3,
        5.769_497_221_460_691_4,
        3.647_848_324_763_204_6,
        1.270_458_252_452_368_4,
        2.417_807_251_774_506_1e-1,
        2.272_384_498_926_918_4e-2,
        7.745_450_142_783_414_1e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_758_8,
        1.676_384_830_183_803_8,
        6.897_673_349_851e-1,
        1.481_039_764_274_800_7e-1,
        1.519_866_656_361_645_7e-2,
        5.475_938_084_995_345e-4,
        1.050_750_071_644_416_8e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103_8,
        5.463_784_911_164_114,
        1.784_826_539_917_291_3,
        2.965_605_718_285_048_9e-1,
        2.653_218_952_657_612_3e-2,
        1.242_660_947_388_078_4e-3,
        2.711_555_568_743_487_6e-5,
        2.010_334_399_292_288_1e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        5.998_322_065_558_879_4e-1,
        1.369_298_809_227_358e-1,
        1.487_536_129_085_061_5e-2,
        7.868_691_311_456_132_6e-4,
        1.846_318_317_510_054_7e-5,
        1.421_511_758_316_445_9e-7,
        2.044_263_103_389_939_8e-15,
    ];

    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let x = if r <= 5.0 {
        let r = r - 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        let r = r - 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    const MAX_ITER: usize = 200_000;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Regularized incomplete beta `I_x(a, b)`, with `y = 1 - x` passed
/// separately so callers can keep full precision near either end.
pub(crate) fn beta_reg(a: f64, b: f64, x: f64, y: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if y <= 0.0 {
        return 1.0;
    }
    let front = (a * x.ln() + b * y.ln() - ln_beta(a, b)).exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, y) / b
    }
}

/// `P(T > t)` for `t >= 0`, central t with `dof` degrees of freedom.
fn t_upper_tail(t: f64, dof: f64) -> f64 {
    let t2 = t * t;
    let x = dof / (dof + t2);
    let y = t2 / (dof + t2);
    0.5 * beta_reg(0.5 * dof, 0.5, x, y)
}

/// Central t distribution function.
pub fn t_cdf(x: f64, dof: u64) -> f64 {
    let nu = dof as f64;
    if x >= 0.0 {
        1.0 - t_upper_tail(x, nu)
    } else {
        t_upper_tail(-x, nu)
    }
}

fn t_pdf(x: f64, nu: f64) -> f64 {
    (ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * PI).ln() - 0.5 * (nu + 1.0) * (x * x / nu).ln_1p())
        .exp()
}

/// Central t quantile.
pub fn t_quantile(dof: u64, p: f64) -> Result<f64> {
    check_probability(p)?;
    if dof == 0 {
        return Err(Error::InvalidArgument("degrees of freedom must be at least 1".into()));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    match dof {
        1 => return Ok((PI * (p - 0.5)).tan()),
        2 => return Ok((2.0 * p - 1.0) / (2.0 * p * (1.0 - p)).sqrt()),
        _ => {}
    }
    let upper = p > 0.5;
    let tail = if upper { 1.0 - p } else { p };
    let t = upper_tail_inverse(tail, dof as f64);
    Ok(if upper { t } else { -t })
}

/// Solves `P(T > t) = tail` for `t > 0` by safeguarded Newton iteration.
fn upper_tail_inverse(tail: f64, nu: f64) -> f64 {
    let mut lo = 0.0;
    let mut hi = 1.0;
    while t_upper_tail(hi, nu) > tail {
        lo = hi;
        hi *= 2.0;
    }
    let z = ppnd16(1.0 - tail);
    let mut t = if z > lo && z < hi { z } else { 0.5 * (lo + hi) };
    for _ in 0..200 {
        let f = t_upper_tail(t, nu) - tail;
        if f > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let step = f / t_pdf(t, nu);
        let mut next = t + step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() <= 1e-15 * t.max(1.0) {
            return next;
        }
        t = next;
    }
    t
}

/// Noncentral t distribution function `P(T <= x)` with noncentrality `lambda`.
///
/// Poisson-mixture series of Benton and Krishnamoorthy, summed outward from
/// the modal term with recurrences on the incomplete beta ratios.
pub fn noncentral_t_cdf(x: f64, dof: u64, lambda: f64) -> f64 {
    let nu = dof as f64;
    let value = if x >= 0.0 {
        nct_nonnegative(x, nu, lambda)
    } else {
        1.0 - nct_nonnegative(-x, nu, -lambda)
    };
    value.clamp(0.0, 1.0)
}

fn nct_nonnegative(t: f64, nu: f64, delta: f64) -> f64 {
    const ERRMAX: f64 = 1e-15;
    const MAX_TERMS: usize = 100_000;

    let base = normal_cdf(-delta);
    if t == 0.0 {
        return base;
    }
    let t2 = t * t;
    let y = t2 / (nu + t2);
    let ymc = nu / (nu + t2);
    let b = 0.5 * nu;
    let lam = 0.5 * delta * delta;
    let qscale = delta * FRAC_1_SQRT_2;
    let k = lam.floor();

    // Poisson weight P_k and its companion Q_k = e^{-lam} lam^k / Gamma(k + 3/2).
    let (pk, qk) = if lam == 0.0 {
        (1.0, 1.0 / ln_gamma(1.5).exp())
    } else {
        let log_lam = lam.ln();
        (
            (-lam + k * log_lam - ln_gamma(k + 1.0)).exp(),
            (-lam + k * log_lam - ln_gamma(k + 1.5)).exp(),
        )
    };

    let ly = y.ln();
    let lymc = ymc.ln();
    // I_y(a, b) and the recurrence increments g(a) = I_y(a, b) - I_y(a + 1, b).
    let inc = |a: f64| (ln_gamma(a + b) - ln_gamma(a + 1.0) - ln_gamma(b) + a * ly + b * lymc).exp();
    let ip_k = beta_reg(k + 0.5, b, y, ymc);
    let iq_k = beta_reg(k + 1.0, b, y, ymc);
    let gp_k = inc(k + 0.5);
    let gq_k = inc(k + 1.0);

    let mut sum = pk * ip_k + qscale * qk * iq_k;
    let mut mass = pk;

    // Downward from the mode.
    let (mut p, mut q, mut ip, mut iq) = (pk, qk, ip_k, iq_k);
    let (mut gp, mut gq) = (gp_k, gq_k);
    let mut j = k;
    while j > 0.0 {
        // Step from index j to j - 1.
        let (ap, aq) = (j + 0.5, j + 1.0);
        gp *= ap / (y * (ap - 1.0 + b));
        gq *= aq / (y * (aq - 1.0 + b));
        ip += gp;
        iq += gq;
        p *= j / lam;
        q *= (j + 0.5) / lam;
        j -= 1.0;
        sum += p * ip + qscale * q * iq;
        mass += p;
        if p < 1e-300 && q < 1e-300 {
            break;
        }
    }

    // Upward from the mode.
    let (mut p, mut q, mut ip, mut iq) = (pk, qk, ip_k, iq_k);
    let (mut gp, mut gq) = (gp_k, gq_k);
    let mut j = k;
    for _ in 0..MAX_TERMS {
        ip -= gp;
        iq -= gq;
        let (ap, aq) = (j + 0.5, j + 1.0);
        gp *= y * (ap + b) / (ap + 1.0);
        gq *= y * (aq + b) / (aq + 1.0);
        j += 1.0;
        p *= lam / j;
        q *= lam / (j + 0.5);
        sum += p * ip + qscale * q * iq;
        mass += p;
        let remaining = (1.0 - mass).max(0.0);
        if 2.0 * remaining * ip.max(iq).max(0.0) < ERRMAX || (p < 1e-300 && q < 1e-300) {
            break;
        }
    }

    base + 0.5 * sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_quantile_values() {
        assert_eq!(normal_quantile(0.5).unwrap(), 0.0);
        assert!((normal_quantile(0.975).unwrap() - 1.959_963_984_540_054).abs() < 1e-12);
        for &p in &[1e-20, 1e-6, 0.01, 0.2, 0.49] {
            let a = normal_quantile(p).unwrap();
            let b = normal_quantile(1.0 - p);
            if let Ok(b) = b {
                if p > 1e-15 {
                    assert!((a + b).abs() < 1e-9 * a.abs().max(1.0), "{p}");
                }
            }
            assert!((normal_cdf(a) / p - 1.0).abs() < 1e-9, "{p}");
        }
        assert!(normal_quantile(0.0).is_err());
        assert!(normal_quantile(1.0).is_err());
    }

    #[test]
    fn t_quantile_values() {
        assert_eq!(t_quantile(7, 0.5).unwrap(), 0.0);
        assert!((t_quantile(1, 0.975).unwrap() - 12.706_204_736_174_7).abs() < 1e-9);
        assert!((t_quantile(1, 0.95).unwrap() - 6.313_751_514_675_04).abs() < 1e-9);
        assert!((t_quantile(1_000_000, 0.975).unwrap() - 1.959_966).abs() < 1e-4);
        assert!(t_quantile(3, 1.0).is_err());
        for dof in [3u64, 4, 9, 49, 500, 10_000] {
            for &p in &[1e-10, 0.001, 0.05, 0.3, 0.7, 0.95, 0.999] {
                let q = t_quantile(dof, p).unwrap();
                assert!((t_cdf(q, dof) - p).abs() < 1e-12 * p.max(1e-3), "{dof} {p}");
            }
        }
    }

    #[test]
    fn t_cdf_matches_small_dof_closed_forms() {
        for &x in &[-30.0, -2.0, -0.3, 0.0, 0.7, 4.0, 100.0] {
            let c1 = 0.5 + f64::atan(x) / PI;
            assert!((t_cdf(x, 1) - c1).abs() < 1e-14);
            let c2 = 0.5 + x / (2.0 * (2.0 + x * x).sqrt());
            assert!((t_cdf(x, 2) - c2).abs() < 1e-14);
        }
    }

    #[test]
    fn noncentral_reduces_to_central() {
        for dof in [1u64, 4, 30] {
            for &x in &[-3.0, -0.5, 0.0, 1.2, 8.0] {
                assert!((noncentral_t_cdf(x, dof, 0.0) - t_cdf(x, dof)).abs() < 1e-14);
            }
            assert!((noncentral_t_cdf(0.0, dof, 0.0) - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn noncentral_fixture_value() {
        // Adaptive quadrature of the defining integral.
        let v = noncentral_t_cdf(2.0, 5, 1.5);
        assert!((v - 0.631_449_247_255_671_7).abs() < 1e-10, "{v}");
    }

    #[test]
    fn noncentral_zero_point_is_normal() {
        for &l in &[-3.0, 0.4, 12.0] {
            assert!((noncentral_t_cdf(0.0, 7, l) - normal_cdf(-l)).abs() < 1e-15);
        }
    }

    #[test]
    fn noncentral_reflection() {
        for dof in [1u64, 3, 17, 400] {
            for &x in &[0.1, 1.0, 3.5, 20.0] {
                for &l in &[-6.0, -0.5, 0.0, 2.0, 25.0] {
                    let a = noncentral_t_cdf(-x, dof, -l);
                    let b = noncentral_t_cdf(x, dof, l);
                    assert!((a + b - 1.0).abs() < 1e-12, "{x} {dof} {l}");
                }
            }
        }
    }
}
