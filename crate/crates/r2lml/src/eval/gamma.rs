//! Regularized incomplete gamma function by series/continued-fraction
//! evaluation, used for chi-square tail probabilities without statistical
//! tables.

const EPS: f64 = 1e-14;
const MAX_ITER: usize = 500;

/// Lanczos approximation of `ln Gamma(x)` for `x > 0`.
fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 6] = [
        76.18009172947146,
        -86.50532032941677,
        24.01409824083091,
        -1.231739572450155,
        0.1208650973866179e-2,
        -0.5395239384953e-5,
    ];
    let tmp = x + 5.5 - (x + 0.5) * (x + 5.5).ln();
    let mut series = 1.000000000190015;
    for (i, c) in COEFFS.iter().enumerate() {
        series += c / (x + 1.0 + i as f64);
    }
    -tmp + (2.5066282746310005 * series / x).ln()
}

/// Lower regularized incomplete gamma `P(a, x)` by its power series,
/// convergent for `x < a + 1`.
fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut sum = 1.0 / a;
    let mut del = sum;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

/// Upper regularized incomplete gamma `Q(a, x)` by modified Lentz continued
/// fraction, convergent for `x >= a + 1`.
fn gamma_q_continued_fraction(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
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
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Upper regularized incomplete gamma `Q(a, x)` for `a > 0`, `x >= 0`.
pub(crate) fn reg_gamma_upper(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x >= 0.0, "invalid incomplete gamma arguments");
    if x == 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_continued_fraction(a, x)
    }
}

/// Survival function of the chi-square distribution with one degree of
/// freedom: `P(X > x) = Q(1/2, x/2)`.
pub fn chi_square_survival_1df(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    reg_gamma_upper(0.5, x / 2.0).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi_square_reference_values() {
        // classical critical values of the 1-dof chi-square
        assert!((chi_square_survival_1df(3.841458820694124) - 0.05).abs() < 1e-9);
        assert!((chi_square_survival_1df(6.634896601021213) - 0.01).abs() < 1e-9);
        assert!((chi_square_survival_1df(0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ln_gamma_half_is_ln_sqrt_pi() {
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-12);
    }

    #[test]
    fn survival_is_erfc_of_sqrt_half() {
        // Q(1/2, x/2) = erfc(sqrt(x/2)); spot-check a few points against
        // a series evaluation of erfc
        for &x in &[0.5, 1.0, 2.0, 5.0, 16.82] {
            let ours = chi_square_survival_1df(x);
            let z = (x / 2.0f64).sqrt();
            // erfc via the same machinery at a = 1/2 is circular, so use a
            // numerically integrated tail instead
            let mut tail = 0.0;
            let steps = 400_000;
            let upper = z + 12.0;
            let h = (upper - z) / steps as f64;
            for i in 0..steps {
                let t0 = z + i as f64 * h;
                let t1 = t0 + h;
                tail += 0.5 * h * ((-t0 * t0).exp() + (-t1 * t1).exp());
            }
            let erfc = 2.0 / std::f64::consts::PI.sqrt() * tail;
            assert!((ours - erfc).abs() < 1e-9, "x={x}: {ours} vs {erfc}");
        }
    }
}
