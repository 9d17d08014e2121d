//! Numerical Laplace inversion by Euler summation (Abate–Whitt).
//!
//! Only used as an independent oracle for closed-form results; no production
//! path in the crate depends on it.

use num_complex::Complex64;

/// Euler summation parameter used when none is given (2M + 1 = 31 terms).
pub const DEFAULT_EULER_M: usize = 15;

/// Inverts `transform` at `t > 0`.
///
/// `shift` moves the Bromwich contour: the transform is evaluated at
/// `β + shift`, which is required when `transform` has singularities with
/// positive real part (for scale functions, put `shift` above Φ(q)).
pub fn euler_inversion<F>(transform: F, t: f64, m: usize, shift: f64) -> f64
where
    F: Fn(Complex64) -> Complex64,
{
    assert!(t > 0.0, "inversion point must be positive");
    let (nodes, weights) = euler_nodes(m);
    let sum: f64 = nodes
        .iter()
        .zip(&weights)
        .map(|(&beta, &eta)| eta * transform(beta / t + shift).re)
        .sum();
    (shift * t).exp() * sum / t
}

fn euler_nodes(m: usize) -> (Vec<Complex64>, Vec<f64>) {
    let mf = m as f64;
    let mut xi = vec![1.0; 2 * m + 1];
    xi[0] = 0.5;
    xi[2 * m] = 0.5f64.powi(m as i32);
    let mut binom = 1.0;
    for k in 1..m {
        // binom = C(M, k)
        binom *= (m - k + 1) as f64 / k as f64;
        xi[2 * m - k] = xi[2 * m - k + 1] + 0.5f64.powi(m as i32) * binom;
    }
    let scale = 10f64.powf(mf / 3.0);
    let re = mf * std::f64::consts::LN_10 / 3.0;
    (0..=2 * m)
        .map(|k| {
            let beta = Complex64::new(re, std::f64::consts::PI * k as f64);
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            (beta, scale * sign * xi[k])
        })
        .unzip()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverts_exponential() {
        // L[e^{-2t}](β) = 1/(β + 2)
        for t in [0.1, 1.0, 3.0] {
            let v = euler_inversion(|b| 1.0 / (b + 2.0), t, DEFAULT_EULER_M, 0.0);
            assert!((v - (-2.0 * t).exp()).abs() < 1e-8, "t = {t}: {v}");
        }
    }

    #[test]
    fn shift_handles_growing_functions() {
        // L[e^{t}](β) = 1/(β − 1), singular at β = 1.
        let v = euler_inversion(|b| 1.0 / (b - 1.0), 2.0, DEFAULT_EULER_M, 2.0);
        assert!((v / 2f64.exp() - 1.0).abs() < 1e-8, "{v}");
    }

    #[test]
    fn inverts_power() {
        // L[t^{1/2}](β) = Γ(3/2) β^{-3/2}
        let g = crate::special::gamma(1.5);
        let v = euler_inversion(|b| g * b.powf(-1.5), 2.0, DEFAULT_EULER_M, 0.0);
        assert!((v - 2f64.sqrt()).abs() < 1e-8, "{v}");
    }
}
