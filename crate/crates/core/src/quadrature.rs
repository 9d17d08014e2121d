//! Globally adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! Every integral in the crate, including the double integrals against the
//! jump measure, goes through [`integrate`]. Known kinks and discontinuities of
//! the integrand should be passed as breakpoints so that no panel straddles
//! them; the refinement then only has to resolve smooth behaviour.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::atomic::{AtomicBool, Ordering as AtomicOrdering};
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Cooperative cancellation flag shared between a caller and long quadratures.
#[derive(Clone, Debug, Default)]
pub struct CancelToken(Arc<AtomicBool>);

impl CancelToken {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cancel(&self) {
        self.0.store(true, AtomicOrdering::Relaxed);
    }

    pub fn is_cancelled(&self) -> bool {
        self.0.load(AtomicOrdering::Relaxed)
    }
}

/// Accuracy and budget controls for one adaptive integration.
#[derive(Clone, Debug)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_segments: usize,
    pub cancel: Option<CancelToken>,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-15,
            max_segments: 4000,
            cancel: None,
        }
    }
}

impl QuadOptions {
    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_abs_tol(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_cancel(mut self, cancel: CancelToken) -> Self {
        self.cancel = Some(cancel);
        self
    }

    /// Options for an integral nested inside another one: tighter so that
    /// inner errors do not dominate the outer error estimate.
    pub fn nested(&self) -> Self {
        Self {
            rel_tol: (self.rel_tol * 0.1).max(1e-12),
            abs_tol: self.abs_tol * 0.1,
            max_segments: self.max_segments,
            cancel: self.cancel.clone(),
        }
    }

    fn check_cancel(&self) -> Result<()> {
        match &self.cancel {
            Some(token) if token.is_cancelled() => Err(Error::Cancelled),
            _ => Ok(()),
        }
    }
}

/// A quadrature value together with its estimated absolute error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, error: 0.0 }
    }

    pub fn scale(self, factor: f64) -> Self {
        Self {
            value: self.value * factor,
            error: self.error * factor.abs(),
        }
    }
}

impl std::ops::Add for Estimate {
    type Output = Estimate;

    fn add(self, rhs: Estimate) -> Estimate {
        Estimate {
            value: self.value + rhs.value,
            error: self.error + rhs.error,
        }
    }
}

impl std::ops::Sub for Estimate {
    type Output = Estimate;

    fn sub(self, rhs: Estimate) -> Estimate {
        Estimate {
            value: self.value - rhs.value,
            error: self.error + rhs.error,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
    /// Kronrod estimate of ∫|f|, which sets the roundoff floor.
    abs_value: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: FnMut(f64) -> f64>(f: &mut F, lo: f64, hi: f64) -> Result<Segment> {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    if !fc.is_finite() {
        return Err(Error::Domain(format!("non-finite integrand at {center}")));
    }
    let mut kron = WGK[7] * fc;
    let mut kron_abs = WGK[7] * fc.abs();
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        if !f1.is_finite() || !f2.is_finite() {
            let at = if f1.is_finite() {
                center + dx
            } else {
                center - dx
            };
            return Err(Error::Domain(format!("non-finite integrand at {at}")));
        }
        kron += WGK[j] * (f1 + f2);
        kron_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let value = kron * half;
    let error = ((kron - gauss) * half).abs();
    Ok(Segment {
        lo,
        hi,
        value,
        error,
        abs_value: kron_abs * half.abs(),
    })
}

/// Integrates `f` over `[a, b]`, splitting first at every breakpoint that
/// lies strictly inside the interval.
pub fn integrate<F>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    opts: &QuadOptions,
) -> Result<Estimate>
where
    F: FnMut(f64) -> f64,
{
    if a == b {
        return Ok(Estimate::exact(0.0));
    }
    if a > b {
        return integrate(f, b, a, breaks, opts).map(|e| e.scale(-1.0));
    }
    opts.check_cancel()?;

    let mut points: Vec<f64> = Vec::with_capacity(breaks.len() + 2);
    points.push(a);
    points.extend(
        breaks
            .iter()
            .copied()
            .filter(|&p| p > a && p < b && p.is_finite()),
    );
    points.push(b);
    points.sort_by(f64::total_cmp);
    points.dedup();

    let mut heap = BinaryHeap::new();
    let mut frozen: Vec<Segment> = Vec::new();
    for w in points.windows(2) {
        heap.push(kronrod(&mut f, w[0], w[1])?);
    }

    loop {
        let (value, error, abs_value) = heap
            .iter()
            .chain(frozen.iter())
            .fold((0.0, 0.0, 0.0), |(v, e, a), s| {
                (v + s.value, e + s.error, a + s.abs_value)
            });
        // Requests below the roundoff level of the sum are met by roundoff.
        let target = opts
            .abs_tol
            .max(opts.rel_tol * value.abs())
            .max(50.0 * f64::EPSILON * abs_value);
        if error <= target {
            return Ok(Estimate { value, error });
        }
        if heap.len() + frozen.len() >= opts.max_segments || heap.is_empty() {
            return Err(Error::TolNotMet {
                value,
                error,
                requested: target,
            });
        }
        opts.check_cancel()?;

        let worst = heap.pop().expect("heap is non-empty");
        let mid = 0.5 * (worst.lo + worst.hi);
        let scale = worst.lo.abs().max(worst.hi.abs()).max(f64::MIN_POSITIVE);
        if (worst.hi - worst.lo) <= 64.0 * f64::EPSILON * scale
            || mid <= worst.lo
            || mid >= worst.hi
        {
            frozen.push(worst);
            continue;
        }
        heap.push(kronrod(&mut f, worst.lo, mid)?);
        heap.push(kronrod(&mut f, mid, worst.hi)?);
    }
}

/// Integrates `f` over `[a, ∞)` using `x = a + scale (1 - s) / s`.
///
/// `scale` should be comparable to the decay length of the integrand.
pub fn integrate_upper_tail<F>(
    mut f: F,
    a: f64,
    scale: f64,
    breaks: &[f64],
    opts: &QuadOptions,
) -> Result<Estimate>
where
    F: FnMut(f64) -> f64,
{
    let s_breaks: Vec<f64> = breaks
        .iter()
        .filter(|&&x| x > a)
        .map(|&x| scale / (scale + x - a))
        .collect();
    integrate(
        |s| {
            let x = a + scale * (1.0 - s) / s;
            let fx = f(x);
            if fx == 0.0 {
                0.0
            } else {
                fx * scale / (s * s)
            }
        },
        0.0,
        1.0,
        &s_breaks,
        opts,
    )
}

/// Integrates `f` over `(-∞, b]` using `x = b - scale (1 - s) / s`.
pub fn integrate_lower_tail<F>(
    mut f: F,
    b: f64,
    scale: f64,
    breaks: &[f64],
    opts: &QuadOptions,
) -> Result<Estimate>
where
    F: FnMut(f64) -> f64,
{
    let mirrored: Vec<f64> = breaks.iter().map(|&x| 2.0 * b - x).collect();
    integrate_upper_tail(|x| f(2.0 * b - x), b, scale, &mirrored, opts)
}
