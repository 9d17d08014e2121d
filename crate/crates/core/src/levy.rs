//! Parametric spectrally negative Lévy processes and their small-jump
//! truncations.
//!
//! Two families are supported:
//!
//! * `CppHyperexp`: drift δ > 0 minus a compound Poisson process whose jumps
//!   are a mixture of exponentials, Π(dy) = Σ λ_i μ_i e^{μ_i y} dy on y < 0.
//!   Bounded variation, Ψ(θ) = δθ − Σ λ_i θ / (μ_i + θ).
//! * `Stable`: Ψ(θ) = θ^α with α ∈ (1, 2), Π(dy) = c_α |y|^{−1−α} dy.
//!   Unbounded variation, no Gaussian part.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::{integrate, Estimate, QuadOptions};
use crate::special::gamma;

/// The jump-measure family of a [`LevySpec`].
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    CppHyperexp {
        delta: f64,
        lambda: Vec<f64>,
        mu: Vec<f64>,
    },
    Stable {
        alpha: f64,
        c_alpha: f64,
    },
}

/// A validated spectrally negative Lévy process. Immutable once built.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevySpec {
    family: Family,
}

impl LevySpec {
    /// Drift `delta` minus hyperexponential jumps with intensities `lambda`
    /// and rates `mu`. Components with equal rates are merged.
    pub fn cpp(delta: f64, lambda: Vec<f64>, mu: Vec<f64>) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "drift must be positive, got {delta}"
            )));
        }
        if lambda.len() != mu.len() || lambda.is_empty() {
            return Err(Error::InvalidSpec(format!(
                "need matching non-empty lambda/mu lists, got {} and {}",
                lambda.len(),
                mu.len()
            )));
        }
        let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(mu.len());
        for (&l, &m) in lambda.iter().zip(&mu) {
            if !(l > 0.0 && l.is_finite()) || !(m > 0.0 && m.is_finite()) {
                return Err(Error::InvalidSpec(format!(
                    "jump intensities and rates must be positive, got lambda = {l}, mu = {m}"
                )));
            }
            pairs.push((m, l));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(pairs.len());
        for (m, l) in pairs {
            match merged.last_mut() {
                Some(last) if last.0 == m => last.1 += l,
                _ => merged.push((m, l)),
            }
        }
        let (mu, lambda) = merged.into_iter().unzip();
        Ok(Self {
            family: Family::CppHyperexp { delta, lambda, mu },
        })
    }

    /// Spectrally negative α-stable process normalized so that Ψ(θ) = θ^α.
    pub fn stable(alpha: f64) -> Result<Self> {
        if !(alpha > 1.0 && alpha < 2.0) {
            return Err(Error::InvalidSpec(format!(
                "stable index must lie in (1, 2), got {alpha}"
            )));
        }
        let opts = QuadOptions::default().with_rel_tol(1e-11);
        let normalizer = stable_integral(alpha, 1.0, exp_second_remainder, &[], &opts)?;
        let c_numeric = 1.0 / normalizer.value;
        let c_closed = alpha * (alpha - 1.0) / gamma(2.0 - alpha);
        if (c_numeric - c_closed).abs() > 1e-8 * c_closed {
            return Err(Error::InvalidSpec(format!(
                "stable normalization mismatch: numeric {c_numeric}, closed form {c_closed}"
            )));
        }
        Ok(Self {
            family: Family::Stable {
                alpha,
                c_alpha: c_closed,
            },
        })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn is_bounded_variation(&self) -> bool {
        matches!(self.family, Family::CppHyperexp { .. })
    }

    /// δ for bounded-variation specs (W(0) = 1/δ), `None` otherwise.
    pub fn bv_drift(&self) -> Option<f64> {
        match &self.family {
            Family::CppHyperexp { delta, .. } => Some(*delta),
            Family::Stable { .. } => None,
        }
    }

    /// The same spec with `extra` added to the drift. Bounded variation only.
    pub fn with_extra_drift(&self, extra: f64) -> Result<Self> {
        match &self.family {
            Family::CppHyperexp { delta, lambda, mu } => {
                Self::cpp(delta + extra, lambda.clone(), mu.clone())
            }
            Family::Stable { .. } => Err(Error::InvalidSpec(
                "drift refraction needs a bounded-variation spec".into(),
            )),
        }
    }

    /// Ψ(θ). Valid for θ ≥ 0; CPP specs also accept θ > −min μ.
    pub fn psi(&self, theta: f64) -> f64 {
        match &self.family {
            Family::CppHyperexp { delta, lambda, mu } => {
                delta * theta
                    - lambda
                        .iter()
                        .zip(mu)
                        .map(|(l, m)| l * theta / (m + theta))
                        .sum::<f64>()
            }
            Family::Stable { alpha, .. } => {
                if theta >= 0.0 {
                    theta.powf(*alpha)
                } else {
                    f64::NAN
                }
            }
        }
    }

    /// Ψ'(θ), with θ = 0 read as the right derivative.
    pub fn psi_prime(&self, theta: f64) -> Result<f64> {
        let v = match &self.family {
            Family::CppHyperexp { delta, lambda, mu } => {
                delta
                    - lambda
                        .iter()
                        .zip(mu)
                        .map(|(l, m)| l * m / ((m + theta) * (m + theta)))
                        .sum::<f64>()
            }
            Family::Stable { alpha, .. } => {
                if theta == 0.0 {
                    0.0
                } else {
                    alpha * theta.powf(alpha - 1.0)
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite(theta))
        }
    }

    /// Ψ(θ)/θ for CPP specs, continuous through θ = 0 where it equals Ψ'(0+).
    pub(crate) fn psi_over_theta(&self, theta: f64) -> f64 {
        match &self.family {
            Family::CppHyperexp { delta, lambda, mu } => {
                delta
                    - lambda
                        .iter()
                        .zip(mu)
                        .map(|(l, m)| l / (m + theta))
                        .sum::<f64>()
            }
            Family::Stable { alpha, .. } => theta.powf(alpha - 1.0),
        }
    }

    /// Ψ on the complex right half-plane (principal branch for stable).
    pub fn psi_complex(&self, beta: Complex64) -> Complex64 {
        match &self.family {
            Family::CppHyperexp { delta, lambda, mu } => {
                let mut v = beta * *delta;
                for (l, m) in lambda.iter().zip(mu) {
                    v -= beta * *l / (beta + *m);
                }
                v
            }
            Family::Stable { alpha, .. } => beta.powf(*alpha),
        }
    }

    /// γ in Ψ(θ) = γθ + ∫(e^{θy} − 1 − θy 1_{y>−1}) Π(dy).
    pub fn gamma_drift(&self) -> f64 {
        match &self.family {
            Family::CppHyperexp { delta, lambda, mu } => {
                delta
                    - lambda
                        .iter()
                        .zip(mu)
                        .map(|(l, m)| l * small_jump_mean(*m, 1.0) / m)
                        .sum::<f64>()
            }
            Family::Stable { alpha, c_alpha } => c_alpha / (alpha - 1.0),
        }
    }

    /// Total jump intensity Π((−∞, 0)); infinite for stable.
    pub fn jump_rate(&self) -> f64 {
        match &self.family {
            Family::CppHyperexp { lambda, .. } => lambda.iter().sum(),
            Family::Stable { .. } => f64::INFINITY,
        }
    }

    /// Whether ∫_{(−∞,−1)} |θ| Π(dθ) is finite.
    pub fn has_finite_first_moment_tail(&self) -> bool {
        // Exponential tails and α > 1 power tails both qualify.
        true
    }

    /// Right inverse Φ(q): the largest root of Ψ(θ) = q.
    pub fn phi(&self, q: f64) -> Result<f64> {
        if !(q >= 0.0) || !q.is_finite() {
            return Err(Error::Domain(format!("phi needs q >= 0, got {q}")));
        }
        let mut lo = 0.0;
        if q == 0.0 {
            if self.psi_prime(0.0)? >= 0.0 {
                return Ok(0.0);
            }
            lo = 1e-8;
            if self.psi(lo) >= 0.0 {
                return Err(Error::NoConvergence(
                    "Ψ'(0+) < 0 but Ψ is not negative just right of 0".into(),
                ));
            }
        }
        let target = |t: f64| self.psi(t) - q;
        let mut hi = 1.0f64.max(2.0 * lo);
        let mut grow = 0;
        while target(hi) <= 0.0 {
            lo = hi;
            hi *= 2.0;
            grow += 1;
            if grow > 1100 {
                return Err(Error::NoConvergence(format!("no bracket for Φ({q})")));
            }
        }
        // Bisection to a coarse bracket, then Newton from the right. Ψ is
        // convex, so Newton from above decreases monotonically onto the root.
        for _ in 0..200 {
            if hi - lo <= 1e-3 * hi.max(1.0) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let t = target(mid);
            if t == 0.0 {
                return Ok(mid);
            }
            if t > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let scale = q.max(1.0);
        let mut x = hi;
        for _ in 0..100 {
            let fx = target(x);
            if fx.abs() <= 1e-13 * scale {
                return Ok(x);
            }
            let d = self.psi_prime(x)?;
            let next = x - fx / d;
            if !(next >= lo && next <= x) || next == x {
                // Newton stalled at roundoff; accept if within contract.
                break;
            }
            x = next;
        }
        if target(x).abs() <= 1e-12 * scale {
            Ok(x)
        } else {
            Err(Error::NoConvergence(format!(
                "Φ({q}) ended at {x} with residual {}",
                target(x)
            )))
        }
    }

    /// ∫_{(−∞,0)} g(θ) Π(dθ).
    ///
    /// `breaks` lists jump sizes (negative) where `g` has kinks. For stable
    /// specs `g` must be O(θ²) at 0 and O(|θ|) at −∞; the integral is mapped
    /// to bounded intervals so no truncation of the tail is needed.
    pub fn jump_integral<G>(&self, mut g: G, breaks: &[f64], opts: &QuadOptions) -> Result<Estimate>
    where
        G: FnMut(f64) -> f64,
    {
        match &self.family {
            Family::CppHyperexp { lambda, mu, .. } => {
                let mut total = Estimate::exact(0.0);
                for (&l, &m) in lambda.iter().zip(mu) {
                    // s = e^{μθ} turns λμ e^{μθ} dθ into λ ds on (0, 1).
                    let s_breaks: Vec<f64> = breaks
                        .iter()
                        .filter(|&&b| b < 0.0)
                        .map(|&b| (m * b).exp())
                        .collect();
                    let part = integrate(
                        |s: f64| {
                            if s <= 0.0 {
                                return 0.0;
                            }
                            g(s.ln() / m)
                        },
                        0.0,
                        1.0,
                        &s_breaks,
                        opts,
                    )?;
                    total = total + part.scale(l);
                }
                Ok(total)
            }
            Family::Stable { alpha, c_alpha } => {
                let t_breaks: Vec<f64> = breaks.iter().filter(|&&b| b < 0.0).map(|&b| -b).collect();
                stable_integral(*alpha, *c_alpha, |t| g(-t), &t_breaks, opts)
            }
        }
    }

    /// ∫ Π(dθ) ∫_0^{−θ} f(θ + v, v) dv, i.e. the integral of f(u, v) against
    /// Π̃(du dv) = Π(du − v) dv on u < 0 < v.
    ///
    /// `u_kinks` (negative) and `v_kinks` (positive) are lines along which `f`
    /// is not smooth. The inner integral is evaluated for each outer point so
    /// that brackets whose parts are separately non-integrable stay together.
    pub fn tilde_integral<F>(
        &self,
        mut f: F,
        u_kinks: &[f64],
        v_kinks: &[f64],
        opts: &QuadOptions,
    ) -> Result<Estimate>
    where
        F: FnMut(f64, f64) -> f64,
    {
        let inner_opts = opts.nested();
        let mut outer_breaks: Vec<f64> = Vec::new();
        outer_breaks.extend(v_kinks.iter().filter(|&&v| v > 0.0).map(|&v| -v));
        outer_breaks.extend(u_kinks.iter().copied().filter(|&u| u < 0.0));
        for &u in u_kinks.iter().filter(|&&u| u < 0.0) {
            for &v in v_kinks.iter().filter(|&&v| v > 0.0) {
                outer_breaks.push(u - v);
            }
        }
        let mut failure: Option<Error> = None;
        let mut inner_breaks: Vec<f64> = Vec::new();
        let outer = self.jump_integral(
            |theta| {
                if failure.is_some() {
                    return 0.0;
                }
                inner_breaks.clear();
                inner_breaks.extend(v_kinks.iter().copied());
                inner_breaks.extend(u_kinks.iter().map(|&u| u - theta));
                match integrate(|v| f(theta + v, v), 0.0, -theta, &inner_breaks, &inner_opts) {
                    Ok(e) => e.value,
                    Err(e) => {
                        failure = Some(e);
                        0.0
                    }
                }
            },
            &outer_breaks,
            opts,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        outer
    }

    /// The level-n truncation: jumps smaller than 1/n removed and their
    /// compensation folded into the drift.
    pub fn truncate(&self, n: u32) -> Result<TruncatedSpec> {
        if n == 0 {
            return Err(Error::Domain("truncation level must be at least 1".into()));
        }
        let nf = n as f64;
        let (drift, rate, sampler) = match &self.family {
            Family::CppHyperexp { delta, lambda, mu } => {
                let drift = delta
                    - lambda
                        .iter()
                        .zip(mu)
                        .map(|(l, m)| l * small_jump_mean(*m, 1.0 / nf) / m)
                        .sum::<f64>();
                let kept: Vec<f64> = lambda
                    .iter()
                    .zip(mu)
                    .map(|(l, m)| l * (-m / nf).exp())
                    .collect();
                let rate: f64 = kept.iter().sum();
                let weights = kept.iter().map(|k| k / rate).collect();
                (
                    drift,
                    rate,
                    JumpSampler::Hyperexp {
                        weights,
                        mu: mu.clone(),
                        cutoff: 1.0 / nf,
                    },
                )
            }
            Family::Stable { alpha, c_alpha } => {
                let drift = c_alpha * nf.powf(alpha - 1.0) / (alpha - 1.0);
                let rate = c_alpha * nf.powf(*alpha) / alpha;
                (
                    drift,
                    rate,
                    JumpSampler::PowerTail {
                        alpha: *alpha,
                        cutoff: 1.0 / nf,
                    },
                )
            }
        };
        if !(drift > 0.0) {
            return Err(Error::NegativeDrift { level: n, drift });
        }
        Ok(TruncatedSpec {
            source: self.clone(),
            level: Some(n),
            drift,
            rate,
            sampler,
        })
    }

    /// The untruncated process viewed as a compound Poisson process with
    /// drift. Only available for bounded-variation specs.
    pub fn untruncated(&self) -> Result<TruncatedSpec> {
        match &self.family {
            Family::CppHyperexp { delta, lambda, mu } => {
                let rate: f64 = lambda.iter().sum();
                Ok(TruncatedSpec {
                    source: self.clone(),
                    level: None,
                    drift: *delta,
                    rate,
                    sampler: JumpSampler::Hyperexp {
                        weights: lambda.iter().map(|l| l / rate).collect(),
                        mu: mu.clone(),
                        cutoff: 0.0,
                    },
                })
            }
            Family::Stable { .. } => Err(Error::UnsupportedMode(
                "an unbounded-variation process has no exact compound Poisson form".into(),
            )),
        }
    }
}

/// μ² ∫_0^a t e^{−μt} dt = 1 − (1 + μa) e^{−μa}. Times λ/μ this is the
/// jump mass ∫_{(−a,0)} |y| Π(dy) of one exponential component.
fn small_jump_mean(mu: f64, a: f64) -> f64 {
    let x = mu * a;
    if x < 1e-3 {
        // Series of 1 − (1 + x)e^{−x} = x²/2 − x³/3 + x⁴/8 − …
        x * x * (0.5 - x / 3.0 + x * x / 8.0 - x * x * x / 30.0)
    } else {
        -(-x).exp_m1() - x * (-x).exp()
    }
}

/// e^{−t} − 1 + t without cancellation for small t.
fn exp_second_remainder(t: f64) -> f64 {
    if t < 0.1 {
        let mut term = t * t / 2.0;
        let mut sum = term;
        for k in 3..20 {
            term *= -t / k as f64;
            sum += term;
        }
        sum
    } else {
        (-t).exp_m1() + t
    }
}

/// c ∫_0^∞ g(t) t^{−1−α} dt with the substitutions t = s^{1/(2−α)} on (0, 1]
/// and t = s^{−1/(α−1)} on [1, ∞), which make the integrand bounded when g is
/// O(t²) at 0 and O(t) at ∞.
fn stable_integral<G>(
    alpha: f64,
    c: f64,
    mut g: G,
    t_breaks: &[f64],
    opts: &QuadOptions,
) -> Result<Estimate>
where
    G: FnMut(f64) -> f64,
{
    let m = 1.0 / (2.0 - alpha);
    let p = 1.0 / (alpha - 1.0);
    let near: Vec<f64> = t_breaks
        .iter()
        .filter(|&&t| t > 0.0 && t < 1.0)
        .map(|&t| t.powf(1.0 / m))
        .collect();
    let far: Vec<f64> = t_breaks
        .iter()
        .filter(|&&t| t > 1.0)
        .map(|&t| t.powf(-1.0 / p))
        .collect();
    let head = integrate(
        |s: f64| {
            if s <= 0.0 {
                return 0.0;
            }
            let gv = g(s.powf(m));
            if gv == 0.0 {
                0.0
            } else {
                m * gv * s.powf(-m * alpha - 1.0)
            }
        },
        0.0,
        1.0,
        &near,
        opts,
    )?;
    let tail = integrate(
        |s: f64| {
            if s <= 0.0 {
                return 0.0;
            }
            let gv = g(s.powf(-p));
            if gv == 0.0 {
                0.0
            } else {
                p * gv * s.powf(p * alpha - 1.0)
            }
        },
        0.0,
        1.0,
        &far,
        opts,
    )?;
    Ok((head + tail).scale(c))
}

#[derive(Clone, Debug, PartialEq)]
enum JumpSampler {
    /// Mixture of exponentials conditioned on magnitude above `cutoff`.
    Hyperexp {
        weights: Vec<f64>,
        mu: Vec<f64>,
        cutoff: f64,
    },
    /// Pareto tail t^{−α} above `cutoff`.
    PowerTail { alpha: f64, cutoff: f64 },
}

/// A compound Poisson process with positive drift approximating a
/// [`LevySpec`] (exactly equal to it for [`LevySpec::untruncated`]).
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedSpec {
    source: LevySpec,
    level: Option<u32>,
    drift: f64,
    rate: f64,
    sampler: JumpSampler,
}

impl TruncatedSpec {
    pub fn source(&self) -> &LevySpec {
        &self.source
    }

    /// Truncation level n, `None` for an untruncated compound Poisson spec.
    pub fn level(&self) -> Option<u32> {
        self.level
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    /// Total intensity of the retained jumps.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    fn cutoff(&self) -> f64 {
        match &self.sampler {
            JumpSampler::Hyperexp { cutoff, .. } | JumpSampler::PowerTail { cutoff, .. } => *cutoff,
        }
    }

    /// Inverse-CDF sample of a jump (a negative number) from the normalized
    /// truncated jump measure; `u ∈ [0, 1)`, with `u = 0` giving −1/n.
    pub fn sample_jump(&self, u: f64) -> f64 {
        debug_assert!((0.0..1.0).contains(&u));
        match &self.sampler {
            JumpSampler::PowerTail { alpha, cutoff } => -cutoff * (1.0 - u).powf(-1.0 / alpha),
            JumpSampler::Hyperexp {
                weights,
                mu,
                cutoff,
            } => {
                let target = -(-u).ln_1p();
                if mu.len() == 1 {
                    return -(cutoff + target / mu[0]);
                }
                // Solve −ln S(t) = −ln(1 − u) for the excess t over the cutoff,
                // S(t) = Σ w_i e^{−μ_i t}. −ln S is concave and increasing, so
                // Newton from t = 0 increases monotonically to the root.
                let mut t = 0.0;
                for _ in 0..200 {
                    let (s, ds) = weights.iter().zip(mu).fold((0.0, 0.0), |(s, ds), (w, m)| {
                        let e = w * (-m * t).exp();
                        (s + e, ds + m * e)
                    });
                    let h = -s.ln() - target;
                    let step = -h * s / ds;
                    if !(step > 0.0) {
                        break;
                    }
                    t += step;
                    if step <= 1e-15 * t {
                        break;
                    }
                }
                -(cutoff + t)
            }
        }
    }

    /// Mean jump magnitude under the normalized truncated measure.
    pub fn mean_jump(&self) -> f64 {
        match &self.sampler {
            JumpSampler::PowerTail { alpha, cutoff } => cutoff * alpha / (alpha - 1.0),
            JumpSampler::Hyperexp {
                weights,
                mu,
                cutoff,
            } => cutoff + weights.iter().zip(mu).map(|(w, m)| w / m).sum::<f64>(),
        }
    }

    /// The truncated process's own exponent δ_n θ − ∫_{y<−1/n}(1 − e^{θy}) Π(dy),
    /// evaluated through the source spec's jump measure.
    pub fn psi(&self, theta: f64, opts: &QuadOptions) -> Result<f64> {
        let cut = self.cutoff();
        let removed = self.source.jump_integral(
            |y| if y < -cut { -(theta * y).exp_m1() } else { 0.0 },
            &[-cut],
            opts,
        )?;
        Ok(self.drift * theta - removed.value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x_spec() -> LevySpec {
        LevySpec::cpp(2.0, vec![1.0], vec![1.0]).unwrap()
    }

    #[test]
    fn psi_values() {
        assert_eq!(x_spec().psi(0.0), 0.0);
        assert!((x_spec().psi(1.0) - 1.5).abs() < 1e-15);
        let s = LevySpec::stable(1.5).unwrap();
        assert!((s.psi(4.0) - 8.0).abs() < 1e-13);
    }

    #[test]
    fn psi_prime_values() {
        assert!((x_spec().psi_prime(0.0).unwrap() - 1.0).abs() < 1e-15);
        let s = LevySpec::stable(1.5).unwrap();
        assert_eq!(s.psi_prime(0.0).unwrap(), 0.0);
        assert!((s.psi_prime(1.0).unwrap() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn phi_values() {
        assert!((x_spec().phi(1.0).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        let s = LevySpec::stable(1.5).unwrap();
        assert!((s.phi(8.0).unwrap() - 4.0).abs() < 1e-12);
        assert_eq!(x_spec().phi(0.0).unwrap(), 0.0);
    }

    #[test]
    fn phi_root_hit_exactly_by_bisection() {
        // Ψ(θ) = θ(0.1 − 5/(1 + θ)) vanishes at 49, a bisection midpoint.
        let s = LevySpec::cpp(0.1, vec![5.0], vec![1.0]).unwrap();
        assert_eq!(s.phi(0.0).unwrap(), 49.0);
    }

    #[test]
    fn phi_zero_with_negative_mean() {
        // Ψ(θ) = 0.5θ − θ/(1+θ) vanishes at θ = 1.
        let spec = LevySpec::cpp(0.5, vec![1.0], vec![1.0]).unwrap();
        assert!((spec.phi(0.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn duplicate_rates_are_merged() {
        let spec = LevySpec::cpp(2.0, vec![0.4, 0.6], vec![1.0, 1.0]).unwrap();
        assert_eq!(spec, x_spec());
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(LevySpec::cpp(0.0, vec![1.0], vec![1.0]).is_err());
        assert!(LevySpec::cpp(1.0, vec![1.0], vec![-1.0]).is_err());
        assert!(LevySpec::cpp(1.0, vec![1.0, 2.0], vec![1.0]).is_err());
        assert!(LevySpec::stable(2.0).is_err());
        assert!(LevySpec::stable(1.0).is_err());
    }

    #[test]
    fn truncation_values() {
        let t = x_spec().truncate(2).unwrap();
        let drift_oracle = 2.0 - (1.0 - 1.5 * (-0.5f64).exp());
        assert!((t.drift() - drift_oracle).abs() < 1e-12);
        assert!((t.drift() - 1.909796).abs() < 1e-6);
        assert!((t.rate() - (-0.5f64).exp()).abs() < 1e-15);

        let s = LevySpec::stable(1.5).unwrap();
        let Family::Stable { c_alpha, .. } = *s.family() else {
            unreachable!()
        };
        let t1 = s.truncate(1).unwrap();
        assert!((t1.rate() - c_alpha / 1.5).abs() < 1e-14);
    }

    #[test]
    fn truncated_drift_tends_to_delta() {
        let t = x_spec().truncate(1_000_000).unwrap();
        assert!((t.drift() - 2.0).abs() < 1e-11);
    }

    #[test]
    fn jump_integral_values() {
        let opts = QuadOptions::default();
        let mass = x_spec().jump_integral(|_| 1.0, &[], &opts).unwrap();
        assert!((mass.value - 1.0).abs() < 1e-10);
        let mean = x_spec().jump_integral(|t| -t, &[], &opts).unwrap();
        assert!((mean.value - 1.0).abs() < 1e-8);

        let s = LevySpec::stable(1.5).unwrap();
        let Family::Stable { c_alpha, .. } = *s.family() else {
            unreachable!()
        };
        let v = s
            .jump_integral(|t| if t > -1.0 { t * t } else { 0.0 }, &[-1.0], &opts)
            .unwrap();
        assert!((v.value - 2.0 * c_alpha).abs() < 1e-8 * c_alpha);
    }

    #[test]
    fn stable_density_constant_reproduces_exponent() {
        let s = LevySpec::stable(1.5).unwrap();
        let opts = QuadOptions::default().with_rel_tol(1e-10);
        let jumps = s
            .jump_integral(
                |t| {
                    let small = if t > -1.0 { t } else { 0.0 };
                    -t.exp_m1() + small
                },
                &[-1.0],
                &opts,
            )
            .unwrap();
        assert!((s.gamma_drift() - jumps.value - 1.0).abs() < 1e-6);
    }

    #[test]
    fn stable_constant_matches_gamma_form() {
        for alpha in [1.1, 1.5, 1.9] {
            let s = LevySpec::stable(alpha).unwrap();
            let Family::Stable { c_alpha, .. } = *s.family() else {
                unreachable!()
            };
            // 1/Γ(−α)
            assert!((c_alpha - 1.0 / gamma(-alpha)).abs() < 1e-12 * c_alpha);
        }
    }

    #[test]
    fn cpp_gamma_drift_consistent() {
        // Ψ(1) = γ + ∫(e^{y} − 1 − y 1_{y>−1}) Π(dy)
        let spec = LevySpec::cpp(1.2, vec![1.0, 0.5], vec![2.0, 0.7]).unwrap();
        let opts = QuadOptions::default().with_rel_tol(1e-11);
        let jumps = spec
            .jump_integral(
                |y| y.exp_m1() - if y > -1.0 { y } else { 0.0 },
                &[-1.0],
                &opts,
            )
            .unwrap();
        assert!((spec.gamma_drift() + jumps.value - spec.psi(1.0)).abs() < 1e-9);
    }

    #[test]
    fn sample_jump_values() {
        let t = x_spec().truncate(2).unwrap();
        assert_eq!(t.sample_jump(0.0), -0.5);
        assert!((t.sample_jump(0.5) + (0.5 + 2f64.ln())).abs() < 1e-14);
        let s = LevySpec::stable(1.5).unwrap().truncate(4).unwrap();
        assert_eq!(s.sample_jump(0.0), -0.25);
    }

    #[test]
    fn mixture_sampler_inverts_survival() {
        let spec = LevySpec::cpp(3.0, vec![1.0, 2.0], vec![0.5, 4.0]).unwrap();
        let t = spec.truncate(3).unwrap();
        let JumpSampler::Hyperexp {
            weights,
            mu,
            cutoff,
        } = &t.sampler
        else {
            unreachable!()
        };
        for u in [0.0, 0.1, 0.5, 0.9, 0.999] {
            let y = -t.sample_jump(u);
            let surv: f64 = weights
                .iter()
                .zip(mu)
                .map(|(w, m)| w * (-m * (y - cutoff)).exp())
                .sum();
            assert!((surv - (1.0 - u)).abs() < 1e-12, "u = {u}");
        }
    }

    #[test]
    fn truncated_exponent_converges() {
        let s = LevySpec::stable(1.5).unwrap();
        let opts = QuadOptions::default().with_rel_tol(1e-11);
        let gaps: Vec<f64> = [4, 16, 64]
            .iter()
            .map(|&n| (s.truncate(n).unwrap().psi(1.0, &opts).unwrap() - 1.0).abs())
            .collect();
        assert!(gaps[1] < gaps[0] && gaps[2] < gaps[1], "{gaps:?}");
    }

    #[test]
    fn tilde_integral_of_product_measure() {
        // ∫Π(dθ)∫_0^{−θ} 1 dv = ∫ (−θ) Π(dθ) = Σ λ/μ.
        let opts = QuadOptions::default();
        let v = x_spec()
            .tilde_integral(|_, _| 1.0, &[], &[], &opts)
            .unwrap();
        assert!((v.value - 1.0).abs() < 1e-8);
    }

    #[test]
    fn psi_complex_agrees_on_real_axis() {
        for spec in [x_spec(), LevySpec::stable(1.5).unwrap()] {
            for theta in [0.3, 1.0, 7.0] {
                let c = spec.psi_complex(Complex64::new(theta, 0.0));
                assert!((c.re - spec.psi(theta)).abs() < 1e-12 && c.im.abs() < 1e-12);
            }
        }
    }
}
