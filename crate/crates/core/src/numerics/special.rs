//! Special functions: Legendre recurrences, elliptic integrals, log-sum-exp.

use std::f64::consts::{FRAC_PI_2, PI};
use std::ops::{Add, Mul, Sub};

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Scalar types the Legendre recurrences can run over (`f64` and `Complex64`).
pub trait RecurrenceScalar:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Mul<f64, Output = Self>
{
    fn from_f64(x: f64) -> Self;
}

impl RecurrenceScalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
}

impl RecurrenceScalar for num_complex::Complex64 {
    fn from_f64(x: f64) -> Self {
        num_complex::Complex64::new(x, 0.0)
    }
}

/// Fully normalized associated Legendre values of a single degree `n`.
///
/// Entry `m` (for `m = 0..=n`) holds
/// `sqrt((2n+1)/(4π) (n-m)!/(n+m)!) P_n^m(cos t)` without the Condon-Shortley
/// phase, where `P_n^m(cos t) = sin^m t · (d/dx)^m P_n(x)`. Passing `cos t` and
/// `sin t` of a complex angle gives the analytic continuation.
///
/// With `divide_by_sin` set, every `m ≥ 1` entry is divided by `sin t`; the
/// quotient stays finite at the poles, which the gradient formulas rely on.
/// Entry 0 is computed before the division and stays undivided.
pub fn normalized_legendre_degree<T: RecurrenceScalar>(
    n: usize,
    cos_t: T,
    sin_t: T,
    divide_by_sin: bool,
) -> Vec<T> {
    let mut out = vec![T::from_f64(0.0); n + 1];
    // sectoral seed p_m^m, built up in m
    let mut sectoral = T::from_f64((1.0 / (4.0 * PI)).sqrt());
    for m in 0..=n {
        if m > 0 {
            let factor = ((2 * m + 1) as f64 / (2 * m) as f64).sqrt();
            if divide_by_sin && m == 1 {
                sectoral = sectoral * factor;
            } else {
                sectoral = sectoral * sin_t * factor;
            }
        }
        if m == n {
            out[m] = sectoral;
            continue;
        }
        let mut prev = sectoral;
        let mut cur = cos_t * sectoral * ((2 * m + 3) as f64).sqrt();
        for l in (m + 2)..=n {
            let lf = l as f64;
            let mf = m as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
            let next = (cos_t * cur - prev * b) * a;
            prev = cur;
            cur = next;
        }
        out[m] = cur;
    }
    out
}

/// Real normalized associated Legendre row with θ-derivatives.
#[derive(Debug, Clone)]
pub struct LegendreRow {
    pub value: Vec<f64>,
    /// `value[m] / sin θ` for `m ≥ 1` (finite at the poles); entry 0 unused.
    pub over_sin: Vec<f64>,
    pub d_theta: Vec<f64>,
}

/// Values, quotients by `sin θ` and θ-derivatives of the normalized
/// associated Legendre functions of degree `n` at colatitude `theta`.
pub fn legendre_row(n: usize, theta: f64) -> LegendreRow {
    let (s, c) = theta.sin_cos();
    let value = normalized_legendre_degree(n, c, s, false);
    let over_sin = normalized_legendre_degree(n, c, s, true);
    let mut d_theta = vec![0.0; n + 1];
    for m in 0..=n {
        let mf = m as f64;
        let lowering = if m > 0 { mf * c * over_sin[m] } else { 0.0 };
        let raising = if m < n {
            (((n + m + 1) * (n - m)) as f64).sqrt() * value[m + 1]
        } else {
            0.0
        };
        d_theta[m] = lowering - raising;
    }
    LegendreRow {
        value,
        over_sin,
        d_theta,
    }
}

/// Legendre polynomial `P_n(x)` by the three-term recurrence.
pub fn legendre_p<T: RecurrenceScalar>(n: usize, x: T) -> T {
    if n == 0 {
        return T::from_f64(1.0);
    }
    let mut prev = T::from_f64(1.0);
    let mut cur = x;
    for k in 1..n {
        let kf = k as f64;
        let next = (x * cur * (2.0 * kf + 1.0) - prev * kf) * (1.0 / (kf + 1.0));
        prev = cur;
        cur = next;
    }
    cur
}

/// `ln P_n(x)` for `x ≥ 1`, rescaling during the recurrence so that large
/// degrees and arguments never overflow.
pub fn ln_legendre_p_ge1(n: usize, x: f64) -> f64 {
    debug_assert!(x >= 1.0);
    if n == 0 {
        return 0.0;
    }
    let mut log_scale = 0.0;
    let mut prev = 1.0;
    let mut cur = x;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * cur - kf * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
        if cur > 1e150 {
            prev /= cur;
            log_scale += cur.ln();
            cur = 1.0;
        }
    }
    log_scale + cur.ln()
}

/// Complete elliptic integral of the second kind, `E(m) = ∫₀^{π/2} sqrt(1 - m sin²t) dt`,
/// for parameter `0 ≤ m ≤ 1`, by the arithmetic-geometric mean.
pub fn elliptic_e(m: f64) -> f64 {
    assert!((0.0..=1.0).contains(&m), "elliptic parameter out of range: {m}");
    if m == 1.0 {
        return 1.0;
    }
    let mut a = 1.0;
    let mut b = (1.0 - m).sqrt();
    let mut c = m.sqrt();
    let mut sum = 0.5 * c * c;
    let mut pow = 0.5;
    for _ in 0..64 {
        if c.abs() <= 1e-17 * a {
            break;
        }
        let an = 0.5 * (a + b);
        let bn = (a * b).sqrt();
        // (a - b)/2 without cancellation
        c = c * c / (4.0 * an);
        pow *= 2.0;
        sum += pow * c * c;
        a = an;
        b = bn;
    }
    FRAC_PI_2 / a * (1.0 - sum)
}

/// `ln Σ exp(x_i)`; returns `-∞` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}
