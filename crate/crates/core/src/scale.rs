//! q-scale functions W^(q) and the classical single-process exit identities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levy::{Family, LevySpec};
use crate::quadrature::{integrate_upper_tail, Estimate, QuadOptions};
use crate::special::{ml_asymptotic, ml_series};

/// Relative root separation below which a CPP root set is treated as repeated.
const ROOT_GAP: f64 = 1e-8;
/// Shift applied to q when the CPP root set is degenerate.
const Q_PERTURBATION: f64 = 1e-10;
/// Round-off allowance for densities, relative to the size of their terms.
const CLAMP: f64 = 1e-12;

/// Mittag-Leffler evaluation for scale functions (z ≥ 0).
pub(crate) fn ml_eval(alpha: f64, beta: f64, z: f64) -> f64 {
    if z > 50.0 {
        if let Some(v) = ml_asymptotic(alpha, beta, z) {
            return v;
        }
    }
    ml_series(alpha, beta, z)
}

#[derive(Clone, Debug)]
enum Kernel {
    /// W(x) = Σ_k coef_k e^{root_k x} with coef_k = 1/Ψ'(root_k).
    Cpp {
        roots: Vec<f64>,
        coefs: Vec<f64>,
        phi_index: usize,
        delta: f64,
    },
    Stable {
        alpha: f64,
    },
}

/// A Lévy spec bound to a discount rate q, with everything needed to evaluate
/// W^(q) cheaply precomputed.
#[derive(Clone, Debug)]
pub struct ScaleEvaluator {
    spec: LevySpec,
    q: f64,
    phi: f64,
    psi_prime_phi: f64,
    kernel: Kernel,
}

impl ScaleEvaluator {
    pub fn new(spec: &LevySpec, q: f64) -> Result<Self> {
        if !(q >= 0.0) || !q.is_finite() {
            return Err(Error::Domain(format!(
                "discount rate must be >= 0, got {q}"
            )));
        }
        match spec.family() {
            Family::CppHyperexp { delta, mu, .. } => match cpp_roots(spec, mu, q) {
                Ok(built) => Ok(Self::from_cpp(spec, q, *delta, built)),
                Err(Error::RepeatedRoot(at)) => {
                    log::warn!(
                        "repeated root of Ψ(θ) = {q} near θ = {at}; using q + {Q_PERTURBATION:e}"
                    );
                    let q2 = q + Q_PERTURBATION;
                    let built = cpp_roots(spec, mu, q2)?;
                    Ok(Self::from_cpp(spec, q2, *delta, built))
                }
                Err(e) => Err(e),
            },
            Family::Stable { alpha, .. } => {
                let phi = spec.phi(q)?;
                Ok(Self {
                    spec: spec.clone(),
                    q,
                    phi,
                    psi_prime_phi: spec.psi_prime(phi)?,
                    kernel: Kernel::Stable { alpha: *alpha },
                })
            }
        }
    }

    fn from_cpp(
        spec: &LevySpec,
        q: f64,
        delta: f64,
        (roots, phi_index): (Vec<f64>, usize),
    ) -> Self {
        let coefs: Vec<f64> = roots
            .iter()
            .map(|&r| 1.0 / spec.psi_prime(r).expect("finite at simple roots"))
            .collect();
        Self {
            spec: spec.clone(),
            q,
            phi: roots[phi_index],
            psi_prime_phi: 1.0 / coefs[phi_index],
            kernel: Kernel::Cpp {
                roots,
                coefs,
                phi_index,
                delta,
            },
        }
    }

    pub fn spec(&self) -> &LevySpec {
        &self.spec
    }

    /// The discount rate actually used (differs from the requested one by
    /// 1e-10 when a repeated root forced a perturbation).
    pub fn q(&self) -> f64 {
        self.q
    }

    /// Φ(q).
    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// Ψ'(Φ(q)) = 1/Φ'(q).
    pub fn psi_prime_phi(&self) -> f64 {
        self.psi_prime_phi
    }

    /// For CPP specs, the roots of Ψ(θ) = q in decreasing order.
    pub fn roots(&self) -> Option<&[f64]> {
        match &self.kernel {
            Kernel::Cpp { roots, .. } => Some(roots),
            Kernel::Stable { .. } => None,
        }
    }

    /// W^(q)(x); zero for x < 0.
    pub fn w(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        match &self.kernel {
            Kernel::Cpp {
                roots,
                coefs,
                delta,
                ..
            } => {
                if x == 0.0 {
                    return 1.0 / delta;
                }
                roots
                    .iter()
                    .zip(coefs)
                    .map(|(r, c)| c * (r * x).exp())
                    .sum()
            }
            Kernel::Stable { alpha } => {
                if x == 0.0 {
                    return 0.0;
                }
                x.powf(alpha - 1.0) * ml_eval(*alpha, *alpha, self.q * x.powf(*alpha))
            }
        }
    }

    /// Right derivative of W^(q) at x ≥ 0 (+∞ at 0 for stable).
    pub fn w_prime(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        match &self.kernel {
            Kernel::Cpp { roots, coefs, .. } => roots
                .iter()
                .zip(coefs)
                .map(|(r, c)| c * r * (r * x).exp())
                .sum(),
            Kernel::Stable { alpha } => {
                if x == 0.0 {
                    return f64::INFINITY;
                }
                x.powf(alpha - 2.0) * ml_eval(*alpha, alpha - 1.0, self.q * x.powf(*alpha))
            }
        }
    }

    /// W^(q)(x) − e^{Φ(q)x}/Ψ'(Φ(q)), computed without cancellation for
    /// large x. Needs Ψ'(Φ(q)) > 0, which fails only for q = 0 with Φ(0) = 0
    /// and Ψ'(0+) = 0 (e.g. stable at q = 0).
    pub fn excess(&self, x: f64) -> Result<f64> {
        if !(self.psi_prime_phi > 0.0) {
            return Err(Error::Domain(format!(
                "W^({}) has no exponential leading term (Ψ'(Φ) = {})",
                self.q, self.psi_prime_phi
            )));
        }
        let main = (self.phi * x).exp() / self.psi_prime_phi;
        if x < 0.0 {
            return Ok(-main);
        }
        match &self.kernel {
            Kernel::Cpp {
                roots,
                coefs,
                phi_index,
                delta,
            } => {
                if x == 0.0 {
                    return Ok(1.0 / delta - coefs[*phi_index]);
                }
                Ok(roots
                    .iter()
                    .zip(coefs)
                    .enumerate()
                    .filter(|(k, _)| k != phi_index)
                    .map(|(_, (r, c))| c * (r * x).exp())
                    .sum())
            }
            Kernel::Stable { alpha } => {
                let direct = self.w(x) - main;
                if direct.abs() >= 1e-6 * main {
                    return Ok(direct);
                }
                // Contribution of the branch cut of 1/(β^α − q) along β < 0.
                let (a, q) = (*alpha, self.q);
                let s = (std::f64::consts::PI * a).sin();
                let c = (std::f64::consts::PI * a).cos();
                let cut = integrate_upper_tail(
                    |r: f64| {
                        if r <= 0.0 {
                            return 0.0;
                        }
                        let ra = r.powf(a);
                        (-r * x).exp() * ra * s / (ra * ra - 2.0 * q * ra * c + q * q)
                    },
                    0.0,
                    1.0 / x,
                    &[self.phi],
                    &QuadOptions::default().with_rel_tol(1e-11),
                )?;
                Ok(cut.value / std::f64::consts::PI)
            }
        }
    }

    /// Two-sided or one-sided upward exit transform E_x[e^{−qτ_a⁺}; …].
    pub fn exit_levy(&self, mode: BarrierMode, x: f64) -> Result<f64> {
        mode.validate()?;
        match mode {
            BarrierMode::Both { b, a } => {
                if !(b <= x && x <= a) {
                    return Err(Error::Domain(format!("x = {x} outside [{b}, {a}]")));
                }
                if x == a {
                    return Ok(1.0);
                }
                Ok(self.w(x - b) / self.w(a - b))
            }
            BarrierMode::Upper { a } => {
                if !(x <= a) {
                    return Err(Error::Domain(format!("x = {x} above a = {a}")));
                }
                Ok((-self.phi * (a - x)).exp())
            }
            other => Err(Error::UnsupportedMode(format!("{other:?}"))),
        }
    }

    /// Potential density of the process killed according to `mode`.
    pub fn potential_density(&self, mode: BarrierMode, x: f64, y: f64) -> Result<f64> {
        mode.validate()?;
        let has_excess = self.psi_prime_phi > 0.0;
        let (value, scale) = match mode {
            BarrierMode::None => {
                if !(self.q > 0.0) {
                    return Err(Error::Domain("whole-line potential needs q > 0".into()));
                }
                let v = -self.excess(x - y)?;
                (v, v.abs())
            }
            BarrierMode::Lower { b } => {
                if !(x >= b) {
                    return Err(Error::Domain(format!("x = {x} below b = {b}")));
                }
                if y < b {
                    return Ok(0.0);
                }
                if has_excess {
                    let t1 = (-self.phi * (y - b)).exp() * self.excess(x - b)?;
                    let t2 = self.excess(x - y)?;
                    (t1 - t2, t1.abs().max(t2.abs()))
                } else {
                    let t1 = (-self.phi * (y - b)).exp() * self.w(x - b);
                    let t2 = self.w(x - y);
                    (t1 - t2, t1.max(t2))
                }
            }
            BarrierMode::Upper { a } => {
                if !(x <= a) {
                    return Err(Error::Domain(format!("x = {x} above a = {a}")));
                }
                if y > a {
                    return Ok(0.0);
                }
                if has_excess {
                    let t1 = (-self.phi * (a - x)).exp() * self.excess(a - y)?;
                    let t2 = self.excess(x - y)?;
                    (t1 - t2, t1.abs().max(t2.abs()))
                } else {
                    let t1 = (-self.phi * (a - x)).exp() * self.w(a - y);
                    let t2 = self.w(x - y);
                    (t1 - t2, t1.max(t2))
                }
            }
            BarrierMode::Both { b, a } => {
                if !(b <= x && x <= a) {
                    return Err(Error::Domain(format!("x = {x} outside [{b}, {a}]")));
                }
                if y < b || y > a {
                    return Ok(0.0);
                }
                let t1 = self.w(x - b) * self.w(a - y) / self.w(a - b);
                let t2 = self.w(x - y);
                (t1 - t2, t1.max(t2))
            }
        };
        clamp_density(value, scale)
    }

    /// ∫ f(u, v) G(x, du dv): the q-discounted joint law of the undershoot
    /// u = Z_{τ₀⁻} and the pre-passage position v = Z_{τ₀⁻−}, optionally on the
    /// event that a is not reached first.
    pub fn gerber_shiu_integrate<F>(
        &self,
        mode: BarrierMode,
        x: f64,
        f: F,
        opts: &QuadOptions,
    ) -> Result<Estimate>
    where
        F: Fn(f64, f64) -> f64,
    {
        match mode {
            BarrierMode::None => {
                if !(x > 0.0) {
                    return Err(Error::Domain(format!(
                        "Gerber–Shiu start must be positive, got {x}"
                    )));
                }
                self.spec.tilde_integral(
                    |u, v| {
                        let density = self
                            .potential_density(BarrierMode::Lower { b: 0.0 }, x, v)
                            .unwrap_or(0.0);
                        if density == 0.0 {
                            0.0
                        } else {
                            density * f(u, v)
                        }
                    },
                    &[],
                    &[x],
                    opts,
                )
            }
            BarrierMode::Upper { a } => {
                if !(x > 0.0 && x < a) {
                    return Err(Error::Domain(format!(
                        "Gerber–Shiu start {x} outside (0, {a})"
                    )));
                }
                let mode = BarrierMode::Both { b: 0.0, a };
                self.spec.tilde_integral(
                    |u, v| {
                        let density = self.potential_density(mode, x, v).unwrap_or(0.0);
                        if density == 0.0 {
                            0.0
                        } else {
                            density * f(u, v)
                        }
                    },
                    &[],
                    &[x, a],
                    opts,
                )
            }
            other => Err(Error::UnsupportedMode(format!("{other:?}"))),
        }
    }

    /// ∫ f dK^(q) (`None`) or ∫ f dK̄^(q,a) (`Some(a)`), where
    /// K^(q)(du dv) = e^{−Φ(q)v} Π̃(du dv) and
    /// K̄^(q,a)(du dv) = W(a − v)/W(a) 1_{v<a} Π̃(du dv).
    pub fn excursion_kernel_integrate<F>(
        &self,
        upper: Option<f64>,
        f: F,
        opts: &QuadOptions,
    ) -> Result<Estimate>
    where
        F: Fn(f64, f64) -> f64,
    {
        match upper {
            None => {
                self.spec
                    .tilde_integral(|u, v| (-self.phi * v).exp() * f(u, v), &[], &[], opts)
            }
            Some(a) => {
                if !(a > 0.0) {
                    return Err(Error::Domain(format!(
                        "upper barrier must be positive, got {a}"
                    )));
                }
                let wa = self.w(a);
                self.spec.tilde_integral(
                    |u, v| {
                        if v >= a {
                            0.0
                        } else {
                            self.w(a - v) / wa * f(u, v)
                        }
                    },
                    &[],
                    &[a],
                    opts,
                )
            }
        }
    }
}

/// Zeroes round-off negatives, rejects genuinely negative densities.
pub(crate) fn clamp_density(value: f64, scale: f64) -> Result<f64> {
    if value >= 0.0 {
        Ok(value)
    } else if value >= -CLAMP * scale.max(1.0) {
        Ok(0.0)
    } else {
        Err(Error::Domain(format!("density evaluated to {value}")))
    }
}

/// Roots of Ψ(θ) = q for a hyperexponential spec, in decreasing order, and
/// the index of Φ(q) among them.
fn cpp_roots(spec: &LevySpec, mu: &[f64], q: f64) -> Result<(Vec<f64>, usize)> {
    let f = |b: f64| spec.psi(b) - q;
    let mut roots = Vec::with_capacity(mu.len() + 1);
    let phi = spec.phi(q)?;
    roots.push(phi);
    if q > 0.0 {
        roots.push(bisect(f, -mu[0], 0.0));
    } else {
        let slope = spec.psi_prime(0.0)?;
        if slope == 0.0 {
            return Err(Error::RepeatedRoot(0.0));
        }
        if phi > 0.0 {
            roots.push(0.0);
        } else {
            // Ψ(θ)/θ = δ − Σ λ/(μ + θ) rises from −∞ to Ψ'(0+) > 0 on (−μ_1, 0).
            let g = |b: f64| -spec.psi_over_theta(b);
            roots.push(bisect(g, -mu[0], 0.0));
        }
    }
    for w in mu.windows(2) {
        roots.push(bisect(f, -w[1], -w[0]));
    }
    roots.sort_by(|a, b| b.total_cmp(a));
    for pair in roots.windows(2) {
        let scale = pair[0].abs().max(pair[1].abs()).max(1e-300);
        if (pair[0] - pair[1]).abs() < ROOT_GAP * scale.max(1.0) {
            return Err(Error::RepeatedRoot(pair[0]));
        }
    }
    let phi_index = roots
        .iter()
        .position(|&r| r == phi)
        .expect("Φ is among the roots");
    Ok((roots, phi_index))
}

/// Root of `f` on the open interval (lo, hi), where f(lo⁺) > 0 > f(hi⁻).
fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Killing/absorbing barriers for single-process identities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum BarrierMode {
    None,
    Lower { b: f64 },
    Upper { a: f64 },
    Both { b: f64, a: f64 },
}

impl BarrierMode {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            BarrierMode::None => true,
            BarrierMode::Lower { b } => b.is_finite(),
            BarrierMode::Upper { a } => a.is_finite(),
            BarrierMode::Both { b, a } => b.is_finite() && a.is_finite() && b < a,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid barriers {self:?}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inversion::{euler_inversion, DEFAULT_EULER_M};
    use crate::special::gamma;

    fn x_spec() -> LevySpec {
        LevySpec::cpp(2.0, vec![1.0], vec![1.0]).unwrap()
    }

    #[test]
    fn cpp_scale_values() {
        let ev = ScaleEvaluator::new(&x_spec(), 0.0).unwrap();
        assert_eq!(ev.w(0.0), 0.5);
        assert!((ev.w(1.0) - (1.0 - 0.5 * (-0.5f64).exp())).abs() < 1e-14);
        assert!((ev.w_prime(1.0) - 0.25 * (-0.5f64).exp()).abs() < 1e-14);
        assert_eq!(ev.w(-1.0), 0.0);
    }

    #[test]
    fn stable_scale_values() {
        let ev = ScaleEvaluator::new(&LevySpec::stable(1.5).unwrap(), 0.0).unwrap();
        assert!((ev.w(1.0) - 1.0 / gamma(1.5)).abs() < 1e-14);
        assert!((ev.w_prime(1.0) - 0.5 / gamma(1.5)).abs() < 1e-14);
        assert_eq!(ev.w(0.0), 0.0);
    }

    #[test]
    fn matches_laplace_inversion() {
        let specs = [
            x_spec(),
            LevySpec::cpp(1.2, vec![1.0, 0.4], vec![2.0, 0.5]).unwrap(),
            LevySpec::stable(1.5).unwrap(),
        ];
        for spec in &specs {
            for q in [0.0, 1.0] {
                let ev = ScaleEvaluator::new(spec, q).unwrap();
                for x in [0.2, 1.0, 3.0] {
                    let inv = euler_inversion(
                        |b| 1.0 / (spec.psi_complex(b) - q),
                        x,
                        DEFAULT_EULER_M,
                        ev.phi() + 1.0,
                    );
                    let w = ev.w(x);
                    assert!((inv / w - 1.0).abs() < 1e-6, "q={q} x={x}: {w} vs {inv}");
                }
            }
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        for spec in [x_spec(), LevySpec::stable(1.5).unwrap()] {
            for q in [0.0, 2.0] {
                let ev = ScaleEvaluator::new(&spec, q).unwrap();
                for x in [0.3, 1.0, 2.5] {
                    let h = 1e-6;
                    let fd = (ev.w(x + h) - ev.w(x - h)) / (2.0 * h);
                    assert!((fd / ev.w_prime(x) - 1.0).abs() < 1e-5);
                }
            }
        }
    }

    #[test]
    fn excess_matches_direct_difference() {
        for spec in [
            x_spec(),
            LevySpec::cpp(1.2, vec![1.0, 0.4], vec![2.0, 0.5]).unwrap(),
            LevySpec::stable(1.5).unwrap(),
        ] {
            let ev = ScaleEvaluator::new(&spec, 1.0).unwrap();
            for x in [-0.5, 0.0, 0.1, 0.7, 2.0] {
                let direct = ev.w(x) - (ev.phi() * x).exp() / ev.psi_prime_phi();
                let ex = ev.excess(x).unwrap();
                assert!(
                    (ex - direct).abs() < 1e-9 * direct.abs().max(1.0),
                    "x={x}: {ex} vs {direct}"
                );
            }
        }
    }

    #[test]
    fn stable_excess_branch_cut_route() {
        // Force the branch-cut integral and compare with a direct difference
        // at a point where the latter is still accurate to ~1e-10.
        let ev = ScaleEvaluator::new(&LevySpec::stable(1.5).unwrap(), 1.0).unwrap();
        let x = 3.0;
        let direct = ev.w(x) - (ev.phi() * x).exp() / ev.psi_prime_phi();
        let (a, q) = (1.5f64, 1.0);
        let s = (std::f64::consts::PI * a).sin();
        let c = (std::f64::consts::PI * a).cos();
        let cut = integrate_upper_tail(
            |r: f64| {
                if r <= 0.0 {
                    return 0.0;
                }
                let ra = r.powf(a);
                (-r * x).exp() * ra * s / (ra * ra - 2.0 * q * ra * c + q * q)
            },
            0.0,
            1.0 / x,
            &[1.0],
            &QuadOptions::default().with_rel_tol(1e-11),
        )
        .unwrap()
        .value
            / std::f64::consts::PI;
        assert!(
            (cut - direct).abs() < 1e-8 * direct.abs(),
            "{cut} vs {direct}"
        );
        // Far out only the branch-cut route is usable; it must decay.
        let far = ev.excess(40.0).unwrap();
        assert!(far < 0.0 && far.abs() < 1e-3);
    }

    #[test]
    fn repeated_root_is_perturbed() {
        // Ψ(θ) = θ − θ/(1+θ) has Ψ'(0+) = 0: double root at q = 0.
        let spec = LevySpec::cpp(1.0, vec![1.0], vec![1.0]).unwrap();
        let ev = ScaleEvaluator::new(&spec, 0.0).unwrap();
        assert!((ev.q() - 1e-10).abs() < 1e-20);
        assert_eq!(ev.w(0.0), 1.0);
        assert!(ev.w(1.0).is_finite());
    }

    #[test]
    fn exit_values() {
        let ev = ScaleEvaluator::new(&x_spec(), 0.0).unwrap();
        let v = ev
            .exit_levy(BarrierMode::Both { b: 0.0, a: 2.0 }, 1.0)
            .unwrap();
        let oracle = (1.0 - 0.5 * (-0.5f64).exp()) / (1.0 - 0.5 * (-1.0f64).exp());
        assert!((v - oracle).abs() < 1e-13);
        assert!((v - 0.853779).abs() < 1e-6);
        assert_eq!(
            ev.exit_levy(BarrierMode::Both { b: 0.0, a: 2.0 }, 2.0)
                .unwrap(),
            1.0
        );
        let st = ScaleEvaluator::new(&LevySpec::stable(1.5).unwrap(), 8.0).unwrap();
        let up = st.exit_levy(BarrierMode::Upper { a: 1.0 }, 0.0).unwrap();
        assert!((up - (-4.0f64).exp()).abs() < 1e-13);
        assert!(matches!(
            ev.exit_levy(BarrierMode::None, 0.0),
            Err(Error::UnsupportedMode(_))
        ));
    }

    #[test]
    fn whole_line_density_matches_inversion() {
        // r(0,0) = Φ'(1) − W(0), and for x > y the density r(x,y) is the
        // inverse transform of 1/(Ψ'(Φ)(β − Φ)) − 1/(Ψ(β) − q) at x − y.
        let spec = x_spec();
        let ev = ScaleEvaluator::new(&spec, 1.0).unwrap();
        let r00 = ev.potential_density(BarrierMode::None, 0.0, 0.0).unwrap();
        assert!((r00 - (1.0 / ev.psi_prime_phi() - 0.5)).abs() < 1e-14);
        let (phi, pp) = (ev.phi(), ev.psi_prime_phi());
        let t = 0.8;
        let inv = euler_inversion(
            |b| 1.0 / (pp * (b - phi)) - 1.0 / (spec.psi_complex(b) - 1.0),
            t,
            DEFAULT_EULER_M,
            phi + 1.0,
        );
        let r = ev.potential_density(BarrierMode::None, t, 0.0).unwrap();
        assert!((inv - r).abs() < 1e-6, "{inv} vs {r}");
    }

    #[test]
    fn whole_line_density_has_mass_one_over_q() {
        let opts = QuadOptions::default().with_rel_tol(1e-10);
        for spec in [x_spec(), LevySpec::stable(1.5).unwrap()] {
            let q = 0.7;
            let ev = ScaleEvaluator::new(&spec, q).unwrap();
            let x = 0.4;
            let dens = |y: f64| ev.potential_density(BarrierMode::None, x, y).unwrap();
            let above = integrate_upper_tail(dens, x, 1.0 / ev.phi(), &[], &opts).unwrap();
            let below = crate::quadrature::integrate_lower_tail(dens, x, 1.0, &[], &opts).unwrap();
            assert!((q * (above.value + below.value) - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn killed_densities_vanish_off_domain() {
        let ev = ScaleEvaluator::new(&x_spec(), 0.5).unwrap();
        let both = BarrierMode::Both { b: 0.0, a: 2.0 };
        assert_eq!(ev.potential_density(both, 1.0, 2.5).unwrap(), 0.0);
        assert_eq!(ev.potential_density(both, 1.0, -0.1).unwrap(), 0.0);
        assert!(ev.potential_density(both, 3.0, 1.0).is_err());
        let st = ScaleEvaluator::new(&LevySpec::stable(1.5).unwrap(), 0.5).unwrap();
        let at_top = st
            .potential_density(BarrierMode::Both { b: -1.0, a: 1.0 }, 1.0, 1.0)
            .unwrap();
        assert_eq!(at_top, 0.0);
    }

    #[test]
    fn one_sided_densities_agree_with_direct_formulas() {
        let ev =
            ScaleEvaluator::new(&LevySpec::cpp(1.2, vec![1.0], vec![2.0]).unwrap(), 0.3).unwrap();
        let phi = ev.phi();
        for (x, y) in [(0.5, 0.2), (0.5, 1.5), (2.0, 0.1)] {
            let lower = ev
                .potential_density(BarrierMode::Lower { b: 0.0 }, x, y)
                .unwrap();
            let direct = (-phi * y).exp() * ev.w(x) - ev.w(x - y);
            assert!((lower - direct).abs() < 1e-12);
            let upper = ev
                .potential_density(BarrierMode::Upper { a: 3.0 }, x, y)
                .unwrap();
            let direct = (-phi * (3.0 - x)).exp() * ev.w(3.0 - y) - ev.w(x - y);
            assert!((upper - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn ruin_probability_identity() {
        let ev = ScaleEvaluator::new(&x_spec(), 0.0).unwrap();
        let opts = QuadOptions::default();
        let gs = ev
            .gerber_shiu_integrate(BarrierMode::None, 1.0, |_, _| 1.0, &opts)
            .unwrap();
        let oracle = 1.0 - ev.w(1.0);
        assert!((gs.value - oracle).abs() < 1e-7, "{} vs {oracle}", gs.value);
        assert!((gs.value - 0.303265).abs() < 1e-6);
    }

    #[test]
    fn gerber_shiu_discounted_ruin_matches_closed_form() {
        // E_x[e^{−qτ₀⁻}; τ₀⁻ < ∞] = Z(x) − q W(x)/Φ(q) with Z = 1 + q∫W; no creeping.
        let spec = x_spec();
        let q = 0.5;
        let ev = ScaleEvaluator::new(&spec, q).unwrap();
        let x = 0.8;
        let opts = QuadOptions::default().with_rel_tol(1e-10);
        let int_w = crate::quadrature::integrate(|t| ev.w(t), 0.0, x, &[], &opts)
            .unwrap()
            .value;
        let oracle = 1.0 + q * int_w - q * ev.w(x) / ev.phi();
        let gs = ev
            .gerber_shiu_integrate(BarrierMode::None, x, |_, _| 1.0, &opts)
            .unwrap();
        assert!((gs.value - oracle).abs() < 1e-7, "{} vs {oracle}", gs.value);
    }

    #[test]
    fn kernel_equals_drift_times_gerber_shiu_at_zero() {
        let spec = LevySpec::cpp(1.2, vec![1.0], vec![2.0]).unwrap();
        let ev = ScaleEvaluator::new(&spec, 0.6).unwrap();
        let opts = QuadOptions::default().with_rel_tol(1e-10);
        let f = |u: f64, v: f64| (0.7 * u).exp() * (1.0 + v);
        let k = ev.excursion_kernel_integrate(None, f, &opts).unwrap();
        let gs = ev
            .gerber_shiu_integrate(BarrierMode::None, 1e-9, f, &opts)
            .unwrap();
        assert!(
            (k.value - 1.2 * gs.value).abs() < 1e-6 * k.value,
            "{} vs {}",
            k.value,
            1.2 * gs.value
        );
    }

    #[test]
    fn kernel_mass_at_zero_discount() {
        let ev = ScaleEvaluator::new(&x_spec(), 0.0).unwrap();
        let k = ev
            .excursion_kernel_integrate(None, |_, _| 1.0, &QuadOptions::default())
            .unwrap();
        assert!((k.value - 1.0).abs() < 1e-8);
        let zero = ev
            .excursion_kernel_integrate(Some(1.0), |_, _| 0.0, &QuadOptions::default())
            .unwrap();
        assert_eq!(zero.value, 0.0);
    }
}
