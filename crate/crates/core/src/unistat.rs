//! Uniformity statistics for ciphertext vectors.
//!
//! A vector is min-max normalized to `[0, 1]`, binned into `m` equal-width
//! bins, and scored with `χ² = m·Σ (p_j − 1/m)²` over the bin probabilities.
//! `θ` is the chi-squared CDF of that statistic with `m − 1` degrees of
//! freedom. A vector is reported as uniform when `θ < 0.05`.
//!
//! Two things differ from a textbook Pearson goodness-of-fit test. The
//! statistic uses probabilities rather than counts, so it equals the
//! count-based statistic divided by the sample size. And the verdict reads
//! a *small* CDF value as "uniform", where a rejection test would look at
//! the upper tail. Both conventions are kept as-is.
//!
//! [`histogram_soft`] replaces hard binning with logistic bin memberships so
//! that `θ` has a usable gradient during training.

use crate::error::{Error, Result};

/// θ below this value counts as uniform.
pub const UNIFORM_THRESHOLD: f64 = 0.05;

const MAX_ITER: usize = 10_000;
const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformityReport {
    pub chi_square: f64,
    pub dof: usize,
    pub theta: f64,
    pub uniform: bool,
    pub bin_count: usize,
}

/// Min-max normalization. A constant vector maps to 0.5 everywhere.
pub fn normalize(values: &[f64]) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "normalization needs at least 2 values, got {}",
            values.len()
        )));
    }
    let (lo, hi) = min_max(values);
    let span = hi - lo;
    if span <= 0.0 {
        return Ok(vec![0.5; values.len()]);
    }
    Ok(values.iter().map(|v| (v - lo) / span).collect())
}

/// Gradient of a scalar wrt the raw values, given its gradient wrt the
/// normalized values.
///
/// The minimum and maximum are treated as the (unique) elements attaining
/// them; the degenerate constant case has zero gradient.
pub fn normalize_backward(values: &[f64], grad_h: &[f64]) -> Vec<f64> {
    let mut grad = vec![0.0; values.len()];
    let (lo, hi) = min_max(values);
    let span = hi - lo;
    if span <= 0.0 {
        return grad;
    }
    let argmin = values.iter().position(|&v| v == lo).unwrap_or(0);
    let argmax = values.iter().position(|&v| v == hi).unwrap_or(0);
    let mut via_min = 0.0;
    let mut via_max = 0.0;
    for ((g, &v), &gh) in grad.iter_mut().zip(values).zip(grad_h) {
        let h = (v - lo) / span;
        *g = gh / span;
        via_min += gh * (h - 1.0) / span;
        via_max -= gh * h / span;
    }
    grad[argmin] += via_min;
    grad[argmax] += via_max;
    grad
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

fn check_bins(m: usize) -> Result<()> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!("bin count must be at least 2, got {m}")));
    }
    Ok(())
}

/// Bin probabilities with bins `[(j−1)/m, j/m)`, the last bin closed at 1.
pub fn histogram_hard(h: &[f64], m: usize) -> Result<Vec<f64>> {
    check_bins(m)?;
    if h.is_empty() {
        return Err(Error::InvalidArgument("cannot bin an empty vector".into()));
    }
    let mut counts = vec![0usize; m];
    for &v in h {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidArgument(format!("value {v} outside [0, 1]")));
        }
        let bin = ((v * m as f64).floor() as usize).min(m - 1);
        counts[bin] += 1;
    }
    let n = h.len() as f64;
    Ok(counts.into_iter().map(|c| c as f64 / n).collect())
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn sigmoid_prime(z: f64) -> f64 {
    let s = sigmoid(z);
    s * (1.0 - s)
}

/// Per-sample bin memberships and their derivatives wrt the sample.
///
/// Membership in bin `[a, b)` is `σ((h−a)/w) − σ((h−b)/w)`, renormalized
/// over the bins so each sample contributes a total weight of one.
fn soft_memberships(h: f64, m: usize, bandwidth: f64) -> (Vec<f64>, Vec<f64>) {
    let edges: Vec<f64> = (0..=m).map(|j| j as f64 / m as f64).collect();
    let s: Vec<f64> = edges.iter().map(|e| sigmoid((h - e) / bandwidth)).collect();
    let ds: Vec<f64> = edges.iter().map(|e| sigmoid_prime((h - e) / bandwidth) / bandwidth).collect();
    let raw: Vec<f64> = (0..m).map(|j| s[j] - s[j + 1]).collect();
    let draw: Vec<f64> = (0..m).map(|j| ds[j] - ds[j + 1]).collect();
    let total = s[0] - s[m];
    let dtotal = ds[0] - ds[m];
    let w = raw.iter().map(|r| r / total).collect();
    let dw = raw
        .iter()
        .zip(&draw)
        .map(|(r, dr)| (dr * total - r * dtotal) / (total * total))
        .collect();
    (w, dw)
}

fn check_bandwidth(bandwidth: f64) -> Result<()> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {bandwidth}")));
    }
    Ok(())
}

/// Differentiable histogram. Converges to [`histogram_hard`] as the bandwidth shrinks.
pub fn histogram_soft(h: &[f64], m: usize, bandwidth: f64) -> Result<Vec<f64>> {
    check_bins(m)?;
    check_bandwidth(bandwidth)?;
    if h.is_empty() {
        return Err(Error::InvalidArgument("cannot bin an empty vector".into()));
    }
    let mut p = vec![0.0; m];
    for &v in h {
        let (w, _) = soft_memberships(v, m, bandwidth);
        for (pj, wj) in p.iter_mut().zip(w) {
            *pj += wj;
        }
    }
    let n = h.len() as f64;
    p.iter_mut().for_each(|pj| *pj /= n);
    Ok(p)
}

/// Gradient wrt `h` of a scalar whose gradient wrt the soft histogram is `grad_p`.
pub fn histogram_soft_backward(h: &[f64], m: usize, bandwidth: f64, grad_p: &[f64]) -> Vec<f64> {
    let n = h.len() as f64;
    h.iter()
        .map(|&v| {
            let (_, dw) = soft_memberships(v, m, bandwidth);
            dw.iter().zip(grad_p).map(|(d, g)| d * g).sum::<f64>() / n
        })
        .collect()
}

/// `m·Σ (p_j − 1/m)²`.
pub fn chi_square(p: &[f64]) -> Result<f64> {
    check_bins(p.len())?;
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "probabilities must sum to 1, got {total}"
        )));
    }
    Ok(chi_square_unchecked(p))
}

fn chi_square_unchecked(p: &[f64]) -> f64 {
    let m = p.len() as f64;
    m * p.iter().map(|pj| (pj - 1.0 / m).powi(2)).sum::<f64>()
}

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
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
    if x < 0.5 {
        // Reflection: Γ(x)Γ(1−x) = π / sin(πx)
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized lower incomplete gamma `P(a, x) = γ(a, x) / Γ(a)`.
///
/// Power series below `x = a + 1`, Lentz's continued fraction for the
/// upper tail above it.
pub fn regularized_lower_gamma(a: f64, x: f64) -> Result<f64> {
    if !(a > 0.0) || !(x >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "incomplete gamma needs a > 0 and x >= 0, got a={a}, x={x}"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    let log_prefactor = -x + a * x.ln() - ln_gamma(a);
    if x < a + 1.0 {
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut denom = a;
        for _ in 0..MAX_ITER {
            denom += 1.0;
            term *= x / denom;
            sum += term;
            if term.abs() < sum.abs() * EPS {
                break;
            }
        }
        Ok((sum * log_prefactor.exp()).clamp(0.0, 1.0))
    } else {
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < EPS {
                break;
            }
        }
        Ok((1.0 - log_prefactor.exp() * h).clamp(0.0, 1.0))
    }
}

fn check_dof(dof: usize) -> Result<()> {
    if dof == 0 {
        return Err(Error::InvalidArgument("degrees of freedom must be at least 1".into()));
    }
    Ok(())
}

/// Chi-squared CDF: `P(dof/2, x/2)`.
pub fn chi2_cdf(x: f64, dof: usize) -> Result<f64> {
    check_dof(dof)?;
    if !(x >= 0.0) {
        return Err(Error::InvalidArgument(format!("chi-squared value must be >= 0, got {x}")));
    }
    regularized_lower_gamma(dof as f64 / 2.0, x / 2.0)
}

/// Chi-squared density. At `x = 0` with one degree of freedom the density is
/// unbounded; 0 is returned there so gradients stay finite.
pub fn chi2_pdf(x: f64, dof: usize) -> f64 {
    if x < 0.0 || dof == 0 {
        return 0.0;
    }
    let k = dof as f64 / 2.0;
    if x == 0.0 {
        return if dof == 2 { 0.5 } else { 0.0 };
    }
    ((k - 1.0) * x.ln() - x / 2.0 - k * 2f64.ln() - ln_gamma(k)).exp()
}

/// Hard-histogram uniformity verdict for one vector.
pub fn uniformity_report(values: &[f64], m: usize) -> Result<UniformityReport> {
    let h = normalize(values)?;
    let p = histogram_hard(&h, m)?;
    let chi_square = chi_square(&p)?;
    let theta = chi2_cdf(chi_square, m - 1)?;
    Ok(UniformityReport {
        chi_square,
        dof: m - 1,
        theta,
        uniform: theta < UNIFORM_THRESHOLD,
        bin_count: m,
    })
}

/// Smoothed θ of one vector and its gradient wrt the raw values.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftTheta {
    pub theta: f64,
    pub grad: Vec<f64>,
}

/// θ computed through [`histogram_soft`], with the exact gradient of the
/// whole normalize → soft histogram → χ² → CDF chain.
pub fn soft_theta(values: &[f64], m: usize, bandwidth: f64) -> Result<SoftTheta> {
    let h = normalize(values)?;
    let p = histogram_soft(&h, m, bandwidth)?;
    let chi = chi_square_unchecked(&p);
    let theta = chi2_cdf(chi, m - 1)?;
    let dtheta_dchi = chi2_pdf(chi, m - 1);
    let mf = m as f64;
    let grad_p: Vec<f64> = p
        .iter()
        .map(|pj| dtheta_dchi * 2.0 * mf * (pj - 1.0 / mf))
        .collect();
    let grad_h = histogram_soft_backward(&h, m, bandwidth, &grad_p);
    let grad = normalize_backward(values, &grad_h);
    Ok(SoftTheta { theta, grad })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_from_seed;
    use rand::Rng;

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize(&[2.0, 4.0, 6.0]).unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(normalize(&[3.0, 3.0, 3.0]).unwrap(), vec![0.5; 3]);
        assert!(normalize(&[1.0]).is_err());
        let mut rng = rng_from_seed(4);
        let v: Vec<f64> = (0..50).map(|_| rng.gen_range(-3.0..7.0)).collect();
        let h = normalize(&v).unwrap();
        assert_eq!(h.iter().cloned().fold(f64::INFINITY, f64::min), 0.0);
        assert_eq!(h.iter().cloned().fold(f64::NEG_INFINITY, f64::max), 1.0);
    }

    #[test]
    fn hard_histogram_examples() {
        let p = histogram_hard(&[0.0, 0.5, 0.999], 2).unwrap();
        assert_eq!(p, vec![1.0 / 3.0, 2.0 / 3.0]);
        let m = 8;
        let mids: Vec<f64> = (0..m).map(|j| (j as f64 + 0.5) / m as f64).collect();
        assert_eq!(histogram_hard(&mids, m).unwrap(), vec![1.0 / m as f64; m]);
        assert_eq!(histogram_hard(&[1.0, 1.0], 4).unwrap(), vec![0.0, 0.0, 0.0, 1.0]);
        assert!(histogram_hard(&[0.5], 1).is_err());
        assert!(histogram_hard(&[1.5], 4).is_err());

        let mut rng = rng_from_seed(6);
        let h: Vec<f64> = (0..333).map(|_| rng.gen::<f64>()).collect();
        let total: f64 = histogram_hard(&h, 13).unwrap().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chi_square_examples() {
        assert_eq!(chi_square(&[0.25; 4]).unwrap(), 0.0);
        for m in 2..20 {
            let mut p = vec![0.0; m];
            p[m / 2] = 1.0;
            assert!((chi_square(&p).unwrap() - (m as f64 - 1.0)).abs() < 1e-12);
        }
        assert!(chi_square(&[0.5, 0.6]).is_err());

        let mut rng = rng_from_seed(9);
        for _ in 0..20 {
            let raw: Vec<f64> = (0..10).map(|_| rng.gen::<f64>()).collect();
            let s: f64 = raw.iter().sum();
            let p: Vec<f64> = raw.iter().map(|r| r / s).collect();
            let mut oracle = 0.0;
            for pj in &p {
                oracle += (pj - 0.1) * (pj - 0.1) / 0.1;
            }
            assert!((chi_square(&p).unwrap() - oracle).abs() < 1e-12);
            let mut rev = p.clone();
            rev.reverse();
            assert!((chi_square(&rev).unwrap() - chi_square(&p).unwrap()).abs() < 1e-15);
        }
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!(ln_gamma(1.0).abs() < 1e-14);
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-13);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
        assert!((ln_gamma(0.25) - 3.625_609_908_221_908_f64.ln()).abs() < 1e-13);
    }

    #[test]
    fn chi2_cdf_closed_forms() {
        assert_eq!(chi2_cdf(0.0, 5).unwrap(), 0.0);
        assert!((chi2_cdf(2.0, 2).unwrap() - 0.632_120_558_828_557_7).abs() < 1e-12);
        for i in 1..=200 {
            let x = i as f64 * 0.1;
            let exact = 1.0 - (-x / 2.0).exp();
            assert!((chi2_cdf(x, 2).unwrap() - exact).abs() < 1e-12, "x={x}");
        }
        assert!(chi2_cdf(-1.0, 3).is_err());
        assert!(chi2_cdf(1.0, 0).is_err());
    }

    #[test]
    fn chi2_cdf_monotone_and_saturates() {
        for dof in 1..=30 {
            let mut prev = 0.0;
            for i in 0..400 {
                let v = chi2_cdf(i as f64 * 0.25, dof).unwrap();
                assert!(v >= prev - 1e-15);
                prev = v;
            }
            assert!((chi2_cdf(50.0 * dof as f64, dof).unwrap() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn chi2_pdf_matches_cdf_slope() {
        for dof in [1usize, 2, 3, 7, 15] {
            for x in [0.3, 1.0, 4.0, 12.0] {
                let step = 1e-5;
                let fd = (chi2_cdf(x + step, dof).unwrap() - chi2_cdf(x - step, dof).unwrap()) / (2.0 * step);
                assert!((fd - chi2_pdf(x, dof)).abs() < 1e-7, "dof={dof} x={x}");
            }
        }
    }

    #[test]
    fn uniformity_report_cases() {
        let m = 16;
        let mids: Vec<f64> = (0..64).map(|i| ((i % m) as f64 + 0.5) / m as f64).collect();
        // After normalization midpoint j sits at j/15, still inside bin j.
        let r = uniformity_report(&mids, m).unwrap();
        assert_eq!(r.chi_square, 0.0);
        assert_eq!(r.theta, 0.0);
        assert!(r.uniform);

        let constant = uniformity_report(&[0.3; 64], m).unwrap();
        assert!((constant.chi_square - 15.0).abs() < 1e-12);
        assert!(constant.theta > 0.05);
        assert!(!constant.uniform);
        assert_eq!(constant.dof, 15);
        assert_eq!(constant.bin_count, 16);
    }

    #[test]
    fn soft_histogram_limits() {
        let m = 6;
        let mids: Vec<f64> = (0..m).map(|j| (j as f64 + 0.5) / m as f64).collect();
        let soft = histogram_soft(&mids, m, 1e-4).unwrap();
        let hard = histogram_hard(&mids, m).unwrap();
        for (s, h) in soft.iter().zip(&hard) {
            assert!((s - h).abs() < 1e-3);
        }
        for bw in [1e-3, 0.05, 0.5, 3.0] {
            let p = histogram_soft(&[0.37], 5, bw).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(histogram_soft(&[0.2], 4, 0.0).is_err());
    }

    #[test]
    fn soft_histogram_gradient_matches_finite_differences() {
        let mut rng = rng_from_seed(12);
        let m = 5;
        let bw = 0.05;
        let h: Vec<f64> = (0..9).map(|_| rng.gen::<f64>()).collect();
        let weights: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let objective = |h: &[f64]| -> f64 {
            histogram_soft(h, m, bw)
                .unwrap()
                .iter()
                .zip(&weights)
                .map(|(p, w)| p * w)
                .sum()
        };
        let analytic = histogram_soft_backward(&h, m, bw, &weights);
        for i in 0..h.len() {
            let step = 1e-6;
            let mut up = h.clone();
            up[i] += step;
            let mut down = h.clone();
            down[i] -= step;
            let fd = (objective(&up) - objective(&down)) / (2.0 * step);
            let rel = (fd - analytic[i]).abs() / fd.abs().max(analytic[i].abs()).max(1e-6);
            assert!(rel < 1e-4, "i={i} fd={fd} analytic={}", analytic[i]);
        }
    }

    #[test]
    fn soft_theta_gradient_matches_finite_differences() {
        let mut rng = rng_from_seed(21);
        for _ in 0..5 {
            let v: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..2.0)).collect();
            let st = soft_theta(&v, 4, 0.05).unwrap();
            for i in 0..v.len() {
                let step = 1e-6;
                let mut up = v.clone();
                up[i] += step;
                let mut down = v.clone();
                down[i] -= step;
                let fd = (soft_theta(&up, 4, 0.05).unwrap().theta
                    - soft_theta(&down, 4, 0.05).unwrap().theta)
                    / (2.0 * step);
                let rel = (fd - st.grad[i]).abs() / fd.abs().max(st.grad[i].abs()).max(1e-6);
                assert!(rel < 1e-4, "i={i} fd={fd} analytic={}", st.grad[i]);
            }
        }
    }

    #[test]
    fn normalize_backward_constant_is_zero() {
        assert_eq!(normalize_backward(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), vec![0.0; 3]);
    }
}
