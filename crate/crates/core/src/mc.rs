//! Exact event-driven simulation of the truncated refracted process U^(n).
//!
//! Between events U^(n) moves linearly with the truncated drift of X (while
//! U ≥ 0) or of Y (while U < 0), so zero-crossings and barrier hits are found
//! in closed form. Only the active regime's Poisson clock is run; its
//! memorylessness makes restarting it after a regime switch exact.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::levy::TruncatedSpec;
use crate::refracted::RefractedSpec;

/// Replicas per work unit. Fixed so the reduction order does not depend on
/// the number of worker threads.
const CHUNK: u64 = 1024;

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub spec: RefractedSpec,
    /// Truncation level n. `None` simulates the untruncated compound Poisson
    /// processes, which requires both X and Y to have bounded variation.
    pub level: Option<u32>,
    pub x0: f64,
    /// Lower barrier b < 0; the path is killed on jumping strictly below it.
    pub b: Option<f64>,
    /// Upper barrier a > 0.
    pub a: Option<f64>,
    pub q: f64,
    pub reps: u64,
    pub seed: u64,
    /// Time horizon. Defaults to 50/q for q > 0 and to no horizon for q = 0.
    pub t_max: Option<f64>,
    /// Events per path after which the path is censored.
    pub max_events: u64,
}

impl SimConfig {
    pub fn new(spec: RefractedSpec, level: Option<u32>, x0: f64, q: f64) -> Self {
        Self {
            spec,
            level,
            x0,
            b: None,
            a: None,
            q,
            reps: 10_000,
            seed: 0,
            t_max: None,
            max_events: 10_000_000,
        }
    }

    pub fn with_barriers(mut self, b: f64, a: f64) -> Self {
        self.b = Some(b);
        self.a = Some(a);
        self
    }

    pub fn with_upper(mut self, a: f64) -> Self {
        self.a = Some(a);
        self
    }

    pub fn with_reps(mut self, reps: u64) -> Self {
        self.reps = reps;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_level(mut self, level: Option<u32>) -> Self {
        self.level = level;
        self
    }

    pub fn with_t_max(mut self, t_max: f64) -> Self {
        self.t_max = Some(t_max);
        self
    }

    pub fn with_max_events(mut self, max_events: u64) -> Self {
        self.max_events = max_events;
        self
    }

    pub fn horizon(&self) -> f64 {
        match self.t_max {
            Some(t) => t,
            None if self.q > 0.0 => 50.0 / self.q,
            None => f64::INFINITY,
        }
    }

    fn prepare(&self) -> Result<Prepared> {
        if self.reps == 0 {
            return Err(Error::Domain("at least one replicate is needed".into()));
        }
        if !(self.q >= 0.0 && self.q.is_finite()) {
            return Err(Error::Domain(format!(
                "discount rate must be finite and >= 0, got {}",
                self.q
            )));
        }
        if let Some(t) = self.t_max {
            if !(t > 0.0) {
                return Err(Error::Domain(format!("time cap must be positive, got {t}")));
            }
        }
        if self.max_events == 0 {
            return Err(Error::Domain("event cap must be positive".into()));
        }
        if !self.x0.is_finite() {
            return Err(Error::Domain(format!("start {} is not finite", self.x0)));
        }
        if let Some(b) = self.b {
            if !(b < 0.0) || self.x0 < b {
                return Err(Error::Domain(format!(
                    "need b < 0 and b <= x0, got b = {b}, x0 = {}",
                    self.x0
                )));
            }
        }
        if let Some(a) = self.a {
            if !(a > 0.0 && a.is_finite()) || self.x0 > a {
                return Err(Error::Domain(format!(
                    "need 0 < a and x0 <= a, got a = {a}, x0 = {}",
                    self.x0
                )));
            }
        }
        let truncate = |spec: &crate::levy::LevySpec| match self.level {
            Some(n) => spec.truncate(n),
            None => spec.untruncated(),
        };
        Ok(Prepared {
            x: truncate(self.spec.x())?,
            y: truncate(self.spec.y())?,
            x0: self.x0,
            b: self.b,
            a: self.a,
            horizon: self.horizon(),
            max_events: self.max_events,
        })
    }

    fn rng(&self, replica: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(replica);
        rng
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EventKind {
    JumpX,
    JumpY,
    CrossUpZero,
    HitA,
    /// A jump ending strictly below b; the path is killed.
    JumpBelowB,
    TimeCap,
}

impl EventKind {
    pub fn is_jump(self) -> bool {
        matches!(self, Self::JumpX | Self::JumpY | Self::JumpBelowB)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PathEvent {
    pub time: f64,
    /// Position just before the event.
    pub position: f64,
    /// Jump size, 0 for barrier, regime and cap events.
    pub jump: f64,
    pub kind: EventKind,
}

/// One simulated path with its full event log.
#[derive(Clone, Debug, Serialize)]
pub struct SamplePath {
    pub replica: u64,
    pub x0: f64,
    pub events: Vec<PathEvent>,
    /// The event cap was reached before the path ended.
    pub censored: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum BiasBound {
    /// Absolute bound on the bias introduced by the time cap.
    Bound(f64),
    /// No bound is available (q = 0, or a path hit the event cap).
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FunctionalEstimate {
    pub mean: f64,
    /// Sample standard deviation over √R (0 when R = 1).
    pub std_error: f64,
    pub reps: u64,
    pub seed: u64,
    pub bias_bound: BiasBound,
    /// Paths stopped by the time or event cap; they contribute their value
    /// accumulated up to the cap.
    pub censored: u64,
}

/// Per-bin discounted occupation together with the totals it must add up to.
#[derive(Clone, Debug, Serialize)]
pub struct OccupationEstimate {
    /// Bin edges e_0 < ... < e_k; bin i is (e_i, e_{i+1}].
    pub edges: Vec<f64>,
    pub bins: Vec<FunctionalEstimate>,
    /// ∫_0^τ e^{−qt} dt with τ the exit time from [b, a].
    pub total: FunctionalEstimate,
    /// E[e^{−qτ}; τ before the cap].
    pub exit_transform: FunctionalEstimate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: u32,
    pub estimate: f64,
    pub std_error: f64,
    pub abs_error: f64,
}

/// E_x[e^{−qτ_a⁺}; τ_a⁺ < τ_b⁻] for U^(n); without a lower barrier, E_x e^{−qτ_a⁺}.
pub fn simulate_exit(cfg: &SimConfig) -> Result<FunctionalEstimate> {
    let prep = cfg.prepare()?;
    if prep.a.is_none() {
        return Err(Error::Domain(
            "the exit functional needs an upper barrier a".into(),
        ));
    }
    let q = cfg.q;
    let stats = run_replicas(cfg, 1, |rng, out| {
        let end = prep.run(rng, |_, _, _, _| {}, |_| {});
        out[0] = match end.kind {
            EndKind::HitA => (-q * end.time).exp(),
            _ => 0.0,
        };
        end.censored()
    });
    Ok(finish(
        cfg,
        &stats.moments[0],
        stats.censored,
        stats.event_capped,
        1.0,
    ))
}

/// Discounted occupation of the bins (e_i, e_{i+1}] before exit from [b, a].
pub fn simulate_occupation(cfg: &SimConfig, edges: &[f64]) -> Result<OccupationEstimate> {
    let prep = cfg.prepare()?;
    if prep.b.is_none() || prep.a.is_none() {
        return Err(Error::Domain("occupation needs both barriers".into()));
    }
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Domain(
            "bin edges must be strictly increasing, at least two".into(),
        ));
    }
    let q = cfg.q;
    let k = edges.len() - 1;
    let discounted = move |t: f64, w: f64| {
        if q > 0.0 {
            (-q * t).exp() * -(-q * w).exp_m1() / q
        } else {
            w
        }
    };
    let stats = run_replicas(cfg, k + 2, |rng, out| {
        out.fill(0.0);
        let (bins, rest) = out.split_at_mut(k);
        let end = prep.run(
            rng,
            |t0, p0, drift, len| {
                let p1 = p0 + drift * len;
                let mut i = edges.partition_point(|&e| e <= p0).saturating_sub(1);
                while i < k && edges[i] < p1 {
                    let s1 = ((edges[i] - p0) / drift).max(0.0);
                    let s2 = ((edges[i + 1] - p0) / drift).min(len);
                    if s2 > s1 {
                        bins[i] += discounted(t0 + s1, s2 - s1);
                    }
                    i += 1;
                }
            },
            |_| {},
        );
        rest[0] = discounted(0.0, end.time);
        rest[1] = match end.kind {
            EndKind::HitA | EndKind::BelowB => (-q * end.time).exp(),
            _ => 0.0,
        };
        end.censored()
    });
    let per_time = if q > 0.0 { 1.0 / q } else { 1.0 };
    let est = |i: usize, scale: f64| {
        finish(
            cfg,
            &stats.moments[i],
            stats.censored,
            stats.event_capped,
            scale,
        )
    };
    Ok(OccupationEstimate {
        edges: edges.to_vec(),
        bins: (0..k).map(|i| est(i, per_time)).collect(),
        total: est(k, per_time),
        exit_transform: est(k + 1, 1.0),
    })
}

/// Replays one replica of `cfg` and records its events. The path is the same
/// one that replica contributes to [`simulate_exit`] and [`simulate_occupation`].
pub fn simulate_path(cfg: &SimConfig, replica: u64) -> Result<SamplePath> {
    let prep = cfg.prepare()?;
    let mut rng = cfg.rng(replica);
    let mut events = Vec::new();
    let end = prep.run(&mut rng, |_, _, _, _| {}, |e| events.push(e));
    Ok(SamplePath {
        replica,
        x0: cfg.x0,
        events,
        censored: end.kind == EndKind::EventCap,
    })
}

/// Exit estimates at increasing truncation levels against an analytic value.
pub fn convergence_study(
    template: &SimConfig,
    levels: &[u32],
    analytic: f64,
) -> Result<Vec<ConvergenceRow>> {
    if levels.is_empty() || levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain(
            "levels must be strictly increasing and nonempty".into(),
        ));
    }
    levels
        .iter()
        .map(|&n| {
            let cfg = template.clone().with_level(Some(n));
            let est = simulate_exit(&cfg)?;
            Ok(ConvergenceRow {
                n,
                estimate: est.mean,
                std_error: est.std_error,
                abs_error: (est.mean - analytic).abs(),
            })
        })
        .collect()
}

/// Whether the errors are nonincreasing up to `k` combined standard errors
/// between consecutive rows.
pub fn errors_nonincreasing(rows: &[ConvergenceRow], k: f64) -> bool {
    rows.windows(2)
        .all(|w| w[1].abs_error <= w[0].abs_error + k * w[0].std_error.hypot(w[1].std_error))
}

struct Prepared {
    x: TruncatedSpec,
    y: TruncatedSpec,
    x0: f64,
    b: Option<f64>,
    a: Option<f64>,
    horizon: f64,
    max_events: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum EndKind {
    HitA,
    BelowB,
    TimeCap,
    EventCap,
}

#[derive(Clone, Copy, Debug)]
struct PathEnd {
    kind: EndKind,
    time: f64,
}

impl PathEnd {
    fn censored(&self) -> Censoring {
        match self.kind {
            EndKind::TimeCap => Censoring::Time,
            EndKind::EventCap => Censoring::Events,
            _ => Censoring::None,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Censoring {
    None,
    Time,
    Events,
}

impl Prepared {
    /// Runs one path. `segment(t0, p0, drift, len)` is called for every linear
    /// piece before the path ends, `event` for every event.
    fn run<S, E>(&self, rng: &mut ChaCha8Rng, mut segment: S, mut event: E) -> PathEnd
    where
        S: FnMut(f64, f64, f64, f64),
        E: FnMut(PathEvent),
    {
        let mut t = 0.0;
        let mut pos = self.x0;
        let mut emit = |time, position, jump, kind| {
            event(PathEvent {
                time,
                position,
                jump,
                kind,
            })
        };
        if let Some(a) = self.a {
            if pos >= a {
                emit(0.0, pos, 0.0, EventKind::HitA);
                return PathEnd {
                    kind: EndKind::HitA,
                    time: 0.0,
                };
            }
        }
        let mut count = 0u64;
        loop {
            if count >= self.max_events {
                return PathEnd {
                    kind: EndKind::EventCap,
                    time: t,
                };
            }
            count += 1;
            let in_x = pos >= 0.0;
            let ts = if in_x { &self.x } else { &self.y };
            let drift = ts.drift();
            let u: f64 = rng.random();
            let wait = -(-u).ln_1p() / ts.rate();
            let (level, level_kind) = if in_x {
                (self.a.unwrap_or(f64::INFINITY), EventKind::HitA)
            } else {
                (0.0, EventKind::CrossUpZero)
            };
            let to_level = (level - pos) / drift;
            let to_cap = self.horizon - t;
            if to_level <= wait && to_level <= to_cap {
                segment(t, pos, drift, to_level);
                t += to_level;
                pos = level;
                emit(t, pos, 0.0, level_kind);
                if level_kind == EventKind::HitA {
                    return PathEnd {
                        kind: EndKind::HitA,
                        time: t,
                    };
                }
                continue;
            }
            if to_cap < wait {
                segment(t, pos, drift, to_cap);
                pos += drift * to_cap;
                t = self.horizon;
                emit(t, pos, 0.0, EventKind::TimeCap);
                return PathEnd {
                    kind: EndKind::TimeCap,
                    time: t,
                };
            }
            segment(t, pos, drift, wait);
            t += wait;
            pos += drift * wait;
            let jump = ts.sample_jump(rng.random());
            let landed = pos + jump;
            if self.b.is_some_and(|b| landed < b) {
                emit(t, pos, jump, EventKind::JumpBelowB);
                return PathEnd {
                    kind: EndKind::BelowB,
                    time: t,
                };
            }
            emit(
                t,
                pos,
                jump,
                if in_x {
                    EventKind::JumpX
                } else {
                    EventKind::JumpY
                },
            );
            pos = landed;
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let (na, nb) = (self.n as f64, other.n as f64);
        self.mean += d * nb / n as f64;
        self.m2 += other.m2 + d * d * na * nb / n as f64;
        self.n = n;
    }
}

struct ReplicaStats {
    moments: Vec<Moments>,
    censored: u64,
    event_capped: u64,
}

impl ReplicaStats {
    fn new(width: usize) -> Self {
        Self {
            moments: vec![Moments::default(); width],
            censored: 0,
            event_capped: 0,
        }
    }

    fn merge(&mut self, other: &Self) {
        for (m, o) in self.moments.iter_mut().zip(&other.moments) {
            m.merge(o);
        }
        self.censored += other.censored;
        self.event_capped += other.event_capped;
    }
}

/// Runs every replica, each writing `width` values, and reduces in replica
/// order so the result is independent of thread scheduling.
fn run_replicas<F>(cfg: &SimConfig, width: usize, one: F) -> ReplicaStats
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) -> Censoring + Sync,
{
    let chunks = cfg.reps.div_ceil(CHUNK);
    let partial: Vec<ReplicaStats> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut stats = ReplicaStats::new(width);
            let mut out = vec![0.0; width];
            for i in c * CHUNK..((c + 1) * CHUNK).min(cfg.reps) {
                let mut rng = cfg.rng(i);
                match one(&mut rng, &mut out) {
                    Censoring::None => {}
                    Censoring::Time => stats.censored += 1,
                    Censoring::Events => {
                        stats.censored += 1;
                        stats.event_capped += 1;
                    }
                }
                for (m, &v) in stats.moments.iter_mut().zip(&out) {
                    m.push(v);
                }
            }
            stats
        })
        .collect();
    let mut total = ReplicaStats::new(width);
    for p in &partial {
        total.merge(p);
    }
    total
}

/// `tail_scale` bounds the functional's value over [t_max, ∞) per unit e^{−q t_max}.
fn finish(
    cfg: &SimConfig,
    m: &Moments,
    censored: u64,
    event_capped: u64,
    tail_scale: f64,
) -> FunctionalEstimate {
    let std_error = if m.n > 1 {
        (m.m2 / (m.n - 1) as f64).sqrt() / (m.n as f64).sqrt()
    } else {
        0.0
    };
    let horizon = cfg.horizon();
    let bias_bound = if cfg.q > 0.0 && event_capped == 0 {
        BiasBound::Bound(if horizon.is_finite() {
            tail_scale * (-cfg.q * horizon).exp()
        } else {
            0.0
        })
    } else {
        BiasBound::Unknown
    };
    FunctionalEstimate {
        mean: m.mean,
        std_error,
        reps: m.n,
        seed: cfg.seed,
        bias_bound,
        censored,
    }
}
