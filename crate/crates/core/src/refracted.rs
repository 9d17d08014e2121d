//! Exit transforms, resolvents and killed potential densities of the refracted
//! process U, which moves like X on [0, ∞) and like Y on (−∞, 0).
//!
//! Every double integral over Π̃_X(du dv) = Π_X(du − v) dv is evaluated by
//! [`LevySpec::tilde_integral`], which keeps each bracket together: for an
//! unbounded-variation X the two halves of a bracket have infinite Π̃-mass
//! separately.

use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::levy::LevySpec;
use crate::quadrature::{
    integrate, integrate_lower_tail, integrate_upper_tail, Estimate, QuadOptions,
};
use crate::scale::{clamp_density, BarrierMode, ScaleEvaluator};

/// Conditions under which the refracted formulas are known to be finite.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Certificate {
    /// X has no Gaussian part (always true for the supported families).
    pub x_no_gaussian_ok: bool,
    /// Φ_Y(0) > 0 or Π_X has a finite first moment away from 0.
    pub convergence_ok: bool,
}

/// The pair (X, Y) defining U.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RefractedSpec {
    x: LevySpec,
    y: LevySpec,
    certificate: Certificate,
}

impl RefractedSpec {
    pub fn new(x: LevySpec, y: LevySpec) -> Result<Self> {
        let certificate = Certificate {
            x_no_gaussian_ok: true,
            convergence_ok: y.phi(0.0)? > 0.0 || x.has_finite_first_moment_tail(),
        };
        if !certificate.convergence_ok {
            return Err(Error::CertInvalid(
                "Φ_Y(0) = 0 and Π_X has an infinite first moment".into(),
            ));
        }
        Ok(Self { x, y, certificate })
    }

    /// The drift-refracted case Y = X + α·t (bounded-variation X only).
    pub fn drift_refracted(x: LevySpec, alpha: f64) -> Result<Self> {
        let y = x.with_extra_drift(alpha)?;
        Self::new(x, y)
    }

    pub fn x(&self) -> &LevySpec {
        &self.x
    }

    pub fn y(&self) -> &LevySpec {
        &self.y
    }

    pub fn certificate(&self) -> Certificate {
        self.certificate
    }

    /// Binds the spec to a discount rate with default quadrature settings.
    pub fn at(&self, q: f64) -> Result<RefractedEvaluator> {
        RefractedEvaluator::new(self, q, QuadOptions::default())
    }
}

/// A bounded measurable function together with its discontinuities and
/// support, as integrated by the resolvent.
#[derive(Clone)]
pub struct Observable {
    label: String,
    func: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    breaks: Vec<f64>,
    support: (f64, f64),
}

impl Observable {
    pub fn constant(c: f64) -> Self {
        Self {
            label: format!("const({c})"),
            func: Arc::new(move |_| c),
            breaks: Vec::new(),
            support: (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// 1_{(lo, hi]}; either end may be infinite.
    pub fn indicator(lo: f64, hi: f64) -> Self {
        Self {
            label: format!("1({lo},{hi}]"),
            func: Arc::new(move |x| if x > lo && x <= hi { 1.0 } else { 0.0 }),
            breaks: [lo, hi].into_iter().filter(|b| b.is_finite()).collect(),
            support: (lo, hi),
        }
    }

    /// A general observable vanishing outside `support`, smooth except at `breaks`.
    pub fn from_fn<F>(label: &str, f: F, breaks: Vec<f64>, support: (f64, f64)) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            label: label.to_owned(),
            func: Arc::new(f),
            breaks,
            support,
        }
    }

    /// Piecewise-linear interpolant of `(xs[i], ys[i])`, held constant
    /// outside [xs[0], xs[last]]. `xs` must be strictly increasing.
    pub fn tabulated(label: &str, xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() < 2 || xs.len() != ys.len() || xs.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Domain(
                "table needs at least two strictly increasing nodes".into(),
            ));
        }
        if ys.iter().any(|y| !y.is_finite()) {
            return Err(Error::Domain("table values must be finite".into()));
        }
        let func = move |x: f64| {
            let i = xs.partition_point(|&n| n <= x);
            if i == 0 {
                return ys[0];
            }
            if i == xs.len() {
                return ys[i - 1];
            }
            let w = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
            ys[i - 1] + w * (ys[i] - ys[i - 1])
        };
        Ok(Self {
            label: label.to_owned(),
            func: Arc::new(func),
            breaks: Vec::new(),
            support: (f64::NEG_INFINITY, f64::INFINITY),
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x < self.support.0 || x > self.support.1 {
            0.0
        } else {
            (self.func)(x)
        }
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// ∫ g(y) f(y) dy over (lo, hi) ∩ support, with `extra` kinks of g.
    fn integrate_against<G>(
        &self,
        g: G,
        lo: f64,
        hi: f64,
        extra: &[f64],
        tail_scale: f64,
        opts: &QuadOptions,
    ) -> Result<Estimate>
    where
        G: Fn(f64) -> f64,
    {
        let lo = lo.max(self.support.0);
        let hi = hi.min(self.support.1);
        if !(lo < hi) {
            return Ok(Estimate::exact(0.0));
        }
        let mut breaks: Vec<f64> = self.breaks.clone();
        breaks.extend_from_slice(extra);
        let h = |y: f64| {
            let fv = self.eval(y);
            if fv == 0.0 {
                0.0
            } else {
                g(y) * fv
            }
        };
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => integrate(h, lo, hi, &breaks, opts),
            (true, false) => integrate_upper_tail(h, lo, tail_scale, &breaks, opts),
            (false, true) => integrate_lower_tail(h, hi, tail_scale, &breaks, opts),
            (false, false) => {
                let split = breaks.first().copied().unwrap_or(0.0);
                Ok(integrate_lower_tail(&h, split, tail_scale, &breaks, opts)?
                    + integrate_upper_tail(&h, split, tail_scale, &breaks, opts)?)
            }
        }
    }
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Observable")
            .field("label", &self.label)
            .field("breaks", &self.breaks)
            .field("support", &self.support)
            .finish()
    }
}

/// A [`RefractedSpec`] bound to a discount rate q.
#[derive(Debug)]
pub struct RefractedEvaluator {
    spec: RefractedSpec,
    q: f64,
    wx: ScaleEvaluator,
    wy: ScaleEvaluator,
    phi_x0: f64,
    /// Ψ_X'(0+) ∨ 0.
    drift_term: f64,
    opts: QuadOptions,
    resolvent_opts: QuadOptions,
    n_u_one: OnceLock<Estimate>,
}

impl RefractedEvaluator {
    pub fn new(spec: &RefractedSpec, q: f64, opts: QuadOptions) -> Result<Self> {
        let wx = ScaleEvaluator::new(spec.x(), q)?;
        let wy = ScaleEvaluator::new(spec.y(), q)?;
        Ok(Self {
            spec: spec.clone(),
            q,
            phi_x0: spec.x().phi(0.0)?,
            drift_term: spec.x().psi_prime(0.0)?.max(0.0),
            wx,
            wy,
            resolvent_opts: opts.clone().with_rel_tol(opts.rel_tol.max(1e-6)),
            opts,
            n_u_one: OnceLock::new(),
        })
    }

    /// Quadrature settings for the single and double kernel integrals
    /// (W_U, W̄_U, normalization). Default relative tolerance 1e-8.
    pub fn with_options(mut self, opts: QuadOptions) -> Self {
        self.opts = opts;
        self
    }

    /// Quadrature settings for the resolvent paths, which nest a third
    /// integral inside the kernel integrals. Default relative tolerance 1e-6.
    pub fn with_resolvent_options(mut self, opts: QuadOptions) -> Self {
        self.resolvent_opts = opts;
        self.n_u_one = OnceLock::new();
        self
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn scale_x(&self) -> &ScaleEvaluator {
        &self.wx
    }

    pub fn scale_y(&self) -> &ScaleEvaluator {
        &self.wy
    }

    pub fn options(&self) -> &QuadOptions {
        &self.opts
    }

    fn x_spec(&self) -> &LevySpec {
        self.spec.x()
    }

    /// W_U^(q)(x, y) for y ≤ 0. The x ≤ 0 branch (including x = 0) is
    /// W_Y(x − y); for x > 0 see [`Self::w_u_positive_branch`].
    pub fn w_u(&self, x: f64, y: f64) -> Result<Estimate> {
        if !(y <= 0.0) {
            return Err(Error::Domain(format!("W_U needs y <= 0, got {y}")));
        }
        if x <= 0.0 {
            return Ok(Estimate::exact(self.wy.w(x - y)));
        }
        self.w_u_positive_branch(x, y)
    }

    /// The x > 0 expression of W_U(x, y), also evaluated at x = 0 to expose
    /// its right limit (which is 0 for unbounded-variation X):
    ///
    /// A (Ψ_X'(0) ∨ 0) + ∬ [A e^{−Φ_X(0)v} − W_Y(u − y) W_X(x − v)] Π̃_X(du dv),
    /// A = W_X(x) W_Y(−y).
    pub fn w_u_positive_branch(&self, x: f64, y: f64) -> Result<Estimate> {
        if !(x >= 0.0 && y <= 0.0) {
            return Err(Error::Domain(format!(
                "positive branch needs x >= 0 >= y, got ({x}, {y})"
            )));
        }
        let a = self.wx.w(x) * self.wy.w(-y);
        let phi0 = self.phi_x0;
        let bracket = self.x_spec().tilde_integral(
            |u, v| {
                let wy = self.wy.w(u - y);
                let wx = self.wx.w(x - v);
                a * (-phi0 * v).exp() - wy * wx
            },
            &[y],
            &[x],
            &self.opts,
        )?;
        Ok(Estimate::exact(a * self.drift_term) + bracket)
    }

    /// W̄_U^(q)(x): e^{Φ_Y(q)x} for x ≤ 0, otherwise
    /// W_X(x)(Ψ_X'(0) ∨ 0) + ∬ [W_X(x) e^{−Φ_X(0)v} − W_X(x − v) e^{Φ_Y(q)u}] Π̃_X(du dv).
    pub fn w_u_bar(&self, x: f64) -> Result<Estimate> {
        let phi_y = self.wy.phi();
        if x <= 0.0 {
            return Ok(Estimate::exact((phi_y * x).exp()));
        }
        let wx_x = self.wx.w(x);
        let phi0 = self.phi_x0;
        let bracket = self.x_spec().tilde_integral(
            |u, v| wx_x * (-phi0 * v).exp() - self.wx.w(x - v) * (phi_y * u).exp(),
            &[],
            &[x],
            &self.opts,
        )?;
        Ok(Estimate::exact(wx_x * self.drift_term) + bracket)
    }

    /// E_x[e^{−qτ_a⁺}; τ_a⁺ < τ_b⁻] for b < 0 < a.
    pub fn exit_up(&self, b: f64, x: f64, a: f64) -> Result<f64> {
        check_barriers(b, x, a)?;
        if x == a {
            return Ok(1.0);
        }
        let num = self.w_u(x, b)?.value;
        let den = self.w_u(a, b)?.value;
        Ok((num / den).clamp(0.0, 1.0))
    }

    /// E_x[e^{−qτ_a⁺}; τ_a⁺ < ∞].
    pub fn exit_up_one_sided(&self, x: f64, a: f64) -> Result<f64> {
        if !(x <= a && a > 0.0) {
            return Err(Error::Domain(format!(
                "need x <= a and a > 0, got x = {x}, a = {a}"
            )));
        }
        if x == a {
            return Ok(1.0);
        }
        let num = self.w_u_bar(x)?.value;
        let den = self.w_u_bar(a)?.value;
        Ok((num / den).clamp(0.0, 1.0))
    }

    /// Density in y of the q-potential of U killed on leaving [b, a].
    pub fn killed_potential_density(&self, b: f64, a: f64, x: f64, y: f64) -> Result<f64> {
        check_barriers(b, x, a)?;
        if y < b || y > a {
            return Ok(0.0);
        }
        if y == 0.0 {
            return Err(Error::Domain(
                "killed density is not defined at y = 0".into(),
            ));
        }
        let ratio = self.exit_up(b, x, a)?;
        let (t1, t2) = if y > 0.0 {
            (ratio * self.wx.w(a - y), self.wx.w(x - y))
        } else {
            (ratio * self.w_u(a, y)?.value, self.w_u(x, y)?.value)
        };
        clamp_density(t1 - t2, t1.abs().max(t2.abs()))
    }

    /// (Ψ_X'(0) ∨ 0) + ∬ [e^{−Φ_X(0)v} − e^{Φ_Y(q)u − Φ_X(q)v}] Π̃_X(du dv).
    pub fn normalization(&self) -> Result<Estimate> {
        if !(self.q > 0.0) {
            return Err(Error::Domain("normalization needs q > 0".into()));
        }
        let (phi0, phi_x, phi_y) = (self.phi_x0, self.wx.phi(), self.wy.phi());
        let bracket = self.x_spec().tilde_integral(
            |u, v| {
                // e^{−Φ_X(0)v}(1 − e^{Φ_Y u − (Φ_X(q) − Φ_X(0))v})
                -(-phi0 * v).exp() * (phi_y * u - (phi_x - phi0) * v).exp_m1()
            },
            &[],
            &[],
            &self.opts,
        )?;
        Ok(Estimate::exact(self.drift_term) + bracket)
    }

    /// R_{Y⁰}^(q) f(u): potential of Y killed on passing above 0, started at u ≤ 0.
    pub fn resolvent_y_killed(&self, u: f64, f: &Observable) -> Result<Estimate> {
        self.resolvent_y_killed_with(u, f, &self.resolvent_opts)
    }

    fn resolvent_y_killed_with(
        &self,
        u: f64,
        f: &Observable,
        opts: &QuadOptions,
    ) -> Result<Estimate> {
        if !(u <= 0.0) {
            return Err(Error::Domain(format!("R_Y0 needs u <= 0, got {u}")));
        }
        if u == 0.0 {
            return Ok(Estimate::exact(0.0));
        }
        let mode = BarrierMode::Upper { a: 0.0 };
        let density = |y: f64| self.wy.potential_density(mode, u, y).unwrap_or(0.0);
        let scale = tail_scale(&self.wy);
        let near = f.integrate_against(density, u, 0.0, &[], scale, opts)?;
        let far = f.integrate_against(density, f64::NEG_INFINITY, u, &[], scale, opts)?;
        Ok(near + far)
    }

    /// N_U^(q) f = ∫_0^∞ e^{−Φ_X(q)y} f(y) dy + ∬ R_{Y⁰} f(u) e^{−Φ_X(q)v} Π̃_X(du dv).
    pub fn n_u(&self, f: &Observable) -> Result<Estimate> {
        if !(self.q > 0.0) {
            return Err(Error::Domain("N_U needs q > 0".into()));
        }
        let phi_x = self.wx.phi();
        let positive = f.integrate_against(
            |y| (-phi_x * y).exp(),
            0.0,
            f64::INFINITY,
            &[],
            1.0 / phi_x,
            &self.resolvent_opts,
        )?;
        let inner_opts = self.resolvent_opts.nested();
        let u_kinks: Vec<f64> = f.breaks().iter().copied().filter(|&b| b < 0.0).collect();
        let mut failure = None;
        let kernel = self.x_spec().tilde_integral(
            |u, v| match self.resolvent_y_killed_with(u, f, &inner_opts) {
                Ok(r) => r.value * (-phi_x * v).exp(),
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            },
            &u_kinks,
            &[],
            &self.resolvent_opts,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(positive + kernel?)
    }

    fn n_u_one(&self) -> Result<Estimate> {
        if let Some(v) = self.n_u_one.get() {
            return Ok(*v);
        }
        let v = self.n_u(&Observable::constant(1.0))?;
        Ok(*self.n_u_one.get_or_init(|| v))
    }

    /// q · N_U^(q) 1, the dual route to [`Self::normalization`].
    pub fn normalization_via_resolvent(&self) -> Result<Estimate> {
        Ok(self.n_u_one()?.scale(self.q))
    }

    /// R_U^(q) f(x) = E_x ∫_0^∞ e^{−qt} f(U_t) dt.
    ///
    /// The value of f at the single point 0 does not matter: U spends zero
    /// Lebesgue time there.
    pub fn resolvent(&self, x: f64, f: &Observable) -> Result<Estimate> {
        if !(self.q > 0.0) {
            return Err(Error::Domain("resolvent needs q > 0".into()));
        }
        let n1 = self.n_u_one()?;
        let nf = self.n_u(f)?;
        let at_zero_value = nf.value / (self.q * n1.value);
        let at_zero = Estimate {
            value: at_zero_value,
            error: (nf.error / nf.value.abs().max(f64::MIN_POSITIVE) + n1.error / n1.value)
                * at_zero_value.abs(),
        };
        let phi_y = self.wy.phi();
        if x == 0.0 {
            return Ok(at_zero);
        }
        if x < 0.0 {
            return Ok(self.resolvent_y_killed(x, f)? + at_zero.scale((phi_y * x).exp()));
        }
        let lower = BarrierMode::Lower { b: 0.0 };
        let killed = f.integrate_against(
            |y| self.wx.potential_density(lower, x, y).unwrap_or(0.0),
            0.0,
            f64::INFINITY,
            &[x],
            1.0 / self.wx.phi(),
            &self.resolvent_opts,
        )?;
        let inner_opts = self.resolvent_opts.nested();
        let u_kinks: Vec<f64> = f.breaks().iter().copied().filter(|&b| b < 0.0).collect();
        let mut failure = None;
        let jumped = self.x_spec().tilde_integral(
            |u, v| {
                // e^{−Φ_X v} W_X(x) − W_X(x − v), in the cancellation-free form.
                let density = match self.wx.potential_density(lower, x, v) {
                    Ok(d) => d,
                    Err(e) => {
                        failure.get_or_insert(e);
                        return 0.0;
                    }
                };
                if density == 0.0 {
                    return 0.0;
                }
                match self.resolvent_y_killed_with(u, f, &inner_opts) {
                    Ok(r) => density * (r.value + (phi_y * u).exp() * at_zero_value),
                    Err(e) => {
                        failure.get_or_insert(e);
                        0.0
                    }
                }
            },
            &u_kinks,
            &[x],
            &self.resolvent_opts,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(killed + jumped?)
    }
}

impl RefractedEvaluator {
    /// R_U^(q) f as an observable, so that resolvents can be composed. `f`
    /// must vanish on (−∞, 0); then R_U^(q) f(x) = e^{Φ_Y(q)x} R_U^(q) f(0)
    /// for x < 0 exactly. On [0, ∞) the values at `grid` (increasing, starting
    /// at 0, evaluated in parallel) are interpolated linearly and held
    /// constant beyond the last node.
    pub fn tabulate_resolvent(&self, f: &Observable, grid: &[f64]) -> Result<Observable> {
        use rayon::prelude::*;
        if f.support().0 < 0.0 {
            return Err(Error::Domain(
                "tabulation needs f supported on [0, ∞)".into(),
            ));
        }
        if grid.first() != Some(&0.0) {
            return Err(Error::Domain("tabulation grid must start at 0".into()));
        }
        let ys = grid
            .par_iter()
            .map(|&x| self.resolvent(x, f).map(|e| e.value))
            .collect::<Result<Vec<f64>>>()?;
        let (at_zero, phi_y) = (ys[0], self.wy.phi());
        let table = Observable::tabulated("", grid.to_vec(), ys)?;
        Ok(Observable::from_fn(
            &format!("R^({}) {}", self.q, f.label()),
            move |x| {
                if x < 0.0 {
                    at_zero * (phi_y * x).exp()
                } else {
                    table.eval(x)
                }
            },
            vec![0.0],
            (f64::NEG_INFINITY, f64::INFINITY),
        ))
    }
}

/// W_U for the drift-refracted case Y = X + α·t, via the single integral
/// W_Y(x − y) + α 1_{x≥0} ∫_0^x W_X(x − z) W_Y'(z − y) dz.
#[derive(Debug)]
pub struct DriftRefracted {
    alpha: f64,
    wx: ScaleEvaluator,
    wy: ScaleEvaluator,
    opts: QuadOptions,
}

impl DriftRefracted {
    pub fn new(x_spec: &LevySpec, alpha: f64, q: f64, opts: QuadOptions) -> Result<Self> {
        if !x_spec.is_bounded_variation() {
            return Err(Error::InvalidSpec(
                "drift refraction needs a bounded-variation X".into(),
            ));
        }
        if !(alpha > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "refraction drift must be positive, got {alpha}"
            )));
        }
        let y_spec = x_spec.with_extra_drift(alpha)?;
        Ok(Self {
            alpha,
            wx: ScaleEvaluator::new(x_spec, q)?,
            wy: ScaleEvaluator::new(&y_spec, q)?,
            opts,
        })
    }

    pub fn w_u(&self, x: f64, y: f64) -> Result<Estimate> {
        if !(y <= 0.0) {
            return Err(Error::Domain(format!("W_U needs y <= 0, got {y}")));
        }
        let base = self.wy.w(x - y);
        if x < 0.0 {
            return Ok(Estimate::exact(base));
        }
        let conv = integrate(
            |z| self.wx.w(x - z) * self.wy.w_prime(z - y),
            0.0,
            x,
            &[],
            &self.opts,
        )?;
        Ok(Estimate::exact(base) + conv.scale(self.alpha))
    }

    pub fn exit_up(&self, b: f64, x: f64, a: f64) -> Result<f64> {
        check_barriers(b, x, a)?;
        if x == a {
            return Ok(1.0);
        }
        Ok(self.w_u(x, b)?.value / self.w_u(a, b)?.value)
    }

    pub fn killed_potential_density(&self, b: f64, a: f64, x: f64, y: f64) -> Result<f64> {
        check_barriers(b, x, a)?;
        if y < b || y > a {
            return Ok(0.0);
        }
        let ratio = self.exit_up(b, x, a)?;
        let (t1, t2) = if y > 0.0 {
            (ratio * self.wx.w(a - y), self.wx.w(x - y))
        } else {
            (ratio * self.w_u(a, y)?.value, self.w_u(x, y)?.value)
        };
        clamp_density(t1 - t2, t1.abs().max(t2.abs()))
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

fn check_barriers(b: f64, x: f64, a: f64) -> Result<()> {
    if !(b < 0.0 && a > 0.0) {
        return Err(Error::Domain(format!(
            "need b < 0 < a, got b = {b}, a = {a}"
        )));
    }
    if !(b <= x && x <= a) {
        return Err(Error::Domain(format!("x = {x} outside [{b}, {a}]")));
    }
    Ok(())
}

/// Length scale on which W_Y − leading exponential decays, for tail maps.
fn tail_scale(ev: &ScaleEvaluator) -> f64 {
    match ev.roots() {
        Some(roots) if roots.len() > 1 => {
            let nearest = roots
                .iter()
                .copied()
                .filter(|&r| r < ev.phi())
                .fold(f64::NEG_INFINITY, f64::max);
            if nearest < 0.0 {
                1.0 / -nearest
            } else {
                1.0
            }
        }
        _ => 1.0,
    }
}
