use crate::error::{Error, Result};

pub const BESSEL_MAX_ARG: f64 = 30.0;
pub const BESSEL_MAX_ORDER: u32 = 100;

/// Below this argument the ascending series loses less than ~1e-11 to cancellation.
const SERIES_LIMIT: f64 = 12.0;

/// Bessel function of the first kind, integer order.
pub fn bessel_j(n: u32, z: f64) -> Result<f64> {
    if n > BESSEL_MAX_ORDER || !z.is_finite() || z.abs() > BESSEL_MAX_ARG {
        return Err(Error::BesselRange { n, z });
    }
    let sign = if z < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 };
    let x = z.abs();
    let v = if x < SERIES_LIMIT { series(n, x) } else { miller(n, x) };
    Ok(sign * v)
}

fn series(n: u32, x: f64) -> f64 {
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let h = 0.5 * x;
    // (x/2)^n / n!
    let mut term = 1.0;
    for k in 1..=n {
        term *= h / k as f64;
    }
    let q = -h * h;
    let mut sum = term;
    let mut k = 1u32;
    loop {
        term *= q / (k as f64 * (k + n) as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) && k as f64 > h {
            break;
        }
        k += 1;
    }
    sum
}

/// Downward recurrence from well above both `n` and `x`, normalized with
/// `J₀ + 2ΣJ₂ₖ = 1`.
fn miller(n: u32, x: f64) -> f64 {
    let start = {
        let m = (n.max(x.ceil() as u32) + 40) as usize;
        m + m % 2
    };
    let (mut jp1, mut j) = (0.0f64, 1e-300f64);
    let mut norm = 0.0;
    let mut result = 0.0;
    for k in (1..=start).rev() {
        let jm1 = 2.0 * k as f64 / x * j - jp1;
        jp1 = j;
        j = jm1;
        // j now holds J_{k-1}
        if (k - 1) % 2 == 0 && k > 1 {
            norm += 2.0 * j;
        }
        if k - 1 == n as usize {
            result = j;
        }
        if j.abs() > 1e250 {
            j *= 1e-250;
            jp1 *= 1e-250;
            norm *= 1e-250;
            result *= 1e-250;
        }
    }
    norm += j;
    result / norm
}
