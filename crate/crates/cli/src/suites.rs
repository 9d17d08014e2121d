//! Validation checks. Each builder returns [`CheckRecord`]s; a numerical
//! failure inside a check becomes a failed record rather than an error so
//! the rest of the suite still runs.

use std::time::Instant;

use refracted_core::quadrature::{integrate, integrate_upper_tail};
use refracted_core::{
    convergence_study, simulate_exit, simulate_occupation, BarrierMode, DriftRefracted, Family,
    LevySpec, Observable, QuadOptions, RefractedEvaluator, RefractedSpec, ScaleEvaluator,
    SimConfig,
};

use crate::config::{ExitCase, Scenario, Suite};
use crate::report::CheckRecord;

#[derive(Clone, Copy, Debug)]
pub enum Tol {
    Abs(f64),
    /// Relative to |reference|.
    Rel(f64),
}

impl Tol {
    fn absolute(self, reference: f64) -> f64 {
        match self {
            Tol::Abs(t) => t,
            Tol::Rel(r) => r * reference.abs(),
        }
    }
}

/// Runs `f`, which yields (analytic, reference, stderr), into a timed record.
pub fn check<F>(name: String, tol: Tol, f: F) -> CheckRecord
where
    F: FnOnce() -> refracted_core::Result<(f64, f64, Option<f64>)>,
{
    let start = Instant::now();
    let mut record = match f() {
        Ok((analytic, reference, stderr)) => {
            CheckRecord::new(name, analytic, reference, stderr, tol.absolute(reference))
        }
        Err(e) => {
            log::error!("{name}: {e}");
            let nominal = match tol {
                Tol::Abs(t) | Tol::Rel(t) => t,
            };
            CheckRecord::new(name, f64::NAN, f64::NAN, None, nominal)
        }
    };
    record.seconds = Some(start.elapsed().as_secs_f64());
    record
}

fn fmt_case(c: &ExitCase) -> String {
    format!("b={} a={} x0={} q={}", c.b, c.a, c.x0, c.q)
}

/// ∫_0^∞ e^{−βx} W^(q)(x) dx against 1/(Ψ(β) − q) at β = Φ(q) + offset.
pub fn transform_checks(
    label: &str,
    spec: &LevySpec,
    q: f64,
    offsets: &[f64],
    tol: f64,
) -> Vec<CheckRecord> {
    let ev = match ScaleEvaluator::new(spec, q) {
        Ok(ev) => ev,
        Err(e) => {
            return vec![check(
                format!("transform/{label} q={q}"),
                Tol::Rel(tol),
                || Err(e),
            )]
        }
    };
    offsets
        .iter()
        .map(|&off| {
            let beta = ev.phi() + off;
            check(
                format!("transform/{label} q={q} beta={beta:.6}"),
                Tol::Rel(tol),
                || {
                    let opts = QuadOptions::default().with_rel_tol(1e-10);
                    // e^{−βx}W(x) ≈ e^{−off·x}/Ψ'(Φ); past βx = 700 W itself may overflow.
                    let lt = integrate_upper_tail(
                        |x| {
                            if beta * x > 700.0 {
                                0.0
                            } else {
                                (-beta * x).exp() * ev.w(x)
                            }
                        },
                        0.0,
                        1.0 / off,
                        &[],
                        &opts,
                    )?;
                    Ok((lt.value, 1.0 / (spec.psi(beta) - q), None))
                },
            )
        })
        .collect()
}

/// Exact boundary values: W(0), exit at the upper barrier, killed densities
/// outside the interval, Monte Carlo started at a.
pub fn boundary_checks(
    label: &str,
    rs: &RefractedSpec,
    q: f64,
    barriers: &[(f64, f64)],
) -> Vec<CheckRecord> {
    let mut out = Vec::new();
    for (which, spec) in [("X", rs.x()), ("Y", rs.y())] {
        let expected = match spec.family() {
            Family::CppHyperexp { delta, .. } => 1.0 / delta,
            Family::Stable { .. } => 0.0,
        };
        out.push(check(
            format!("boundary/{label} W_{which}(0) q={q}"),
            Tol::Abs(0.0),
            || Ok((ScaleEvaluator::new(spec, q)?.w(0.0), expected, None)),
        ));
        for &(b, a) in barriers {
            out.push(check(
                format!("boundary/{label} exit_levy_{which}(a) b={b} a={a} q={q}"),
                Tol::Abs(0.0),
                || {
                    Ok((
                        ScaleEvaluator::new(spec, q)?.exit_levy(BarrierMode::Both { b, a }, a)?,
                        1.0,
                        None,
                    ))
                },
            ));
        }
    }
    for &(b, a) in barriers {
        out.push(check(
            format!("boundary/{label} exit_up(a) b={b} a={a} q={q}"),
            Tol::Abs(0.0),
            || Ok((rs.at(q)?.exit_up(b, a, a)?, 1.0, None)),
        ));
        out.push(check(
            format!("boundary/{label} killed density above a b={b} a={a} q={q}"),
            Tol::Abs(0.0),
            || {
                Ok((
                    rs.at(q)?.killed_potential_density(b, a, 0.0, a + 0.5)?,
                    0.0,
                    None,
                ))
            },
        ));
        out.push(check(
            format!("boundary/{label} W_U(x<0) = W_Y b={b} q={q}"),
            Tol::Abs(0.0),
            || {
                let ev = rs.at(q)?;
                Ok((ev.w_u(0.5 * b, b)?.value, ev.scale_y().w(-0.5 * b), None))
            },
        ));
        if let (Ok(_), Ok(_)) = (rs.x().truncate(64), rs.y().truncate(64)) {
            let cfg = SimConfig::new(rs.clone(), Some(64), a, q)
                .with_barriers(b, a)
                .with_reps(1000);
            out.push(check(
                format!("boundary/{label} MC start at a b={b} a={a} q={q}"),
                Tol::Abs(0.0),
                || {
                    let est = simulate_exit(&cfg)?;
                    // A nonzero standard error would make the 3·stderr rule vacuous.
                    Ok((est.mean + est.std_error, 1.0, None))
                },
            ));
            out.push(check(
                format!("boundary/{label} MC occupation above a b={b} a={a} q={q}"),
                Tol::Abs(0.0),
                || {
                    let occ = simulate_occupation(&cfg.clone().with_reps(200), &[a, a + 1.0])?;
                    Ok((occ.bins[0].mean, 0.0, None))
                },
            ));
        }
    }
    out
}

/// Generalized formulas with Y = X + α·t against the single-integral forms,
/// on an x grid (exit) and an x × y grid (killed density), plus the
/// resolvent of 1_{(−1,1]} against the killed density with far barriers ±20.
#[allow(clippy::too_many_arguments)]
pub fn kl_checks(
    x: &LevySpec,
    alpha: f64,
    q: f64,
    b: f64,
    a: f64,
    xs: &[f64],
    ys: &[f64],
    tol: f64,
) -> Vec<CheckRecord> {
    let setup = || -> refracted_core::Result<(RefractedEvaluator, DriftRefracted)> {
        let ev = RefractedSpec::drift_refracted(x.clone(), alpha)?.at(q)?;
        let kl = DriftRefracted::new(x, alpha, q, QuadOptions::default().with_rel_tol(1e-10))?;
        Ok((ev, kl))
    };
    let (ev, kl) = match setup() {
        Ok(v) => v,
        Err(e) => return vec![check(format!("kl/setup q={q}"), Tol::Rel(tol), || Err(e))],
    };
    let mut out = Vec::new();
    let inside = |v: f64| b <= v && v <= a;
    for &x0 in xs.iter().filter(|&&v| inside(v)) {
        out.push(check(
            format!("kl/exit_up b={b} a={a} x={x0} q={q}"),
            Tol::Rel(tol),
            || Ok((ev.exit_up(b, x0, a)?, kl.exit_up(b, x0, a)?, None)),
        ));
        for &y in ys.iter().filter(|&&v| inside(v) && v != 0.0) {
            out.push(check(
                format!("kl/killed_density b={b} a={a} x={x0} y={y} q={q}"),
                Tol::Rel(tol),
                || {
                    Ok((
                        ev.killed_potential_density(b, a, x0, y)?,
                        kl.killed_potential_density(b, a, x0, y)?,
                        None,
                    ))
                },
            ));
        }
    }
    if q > 0.0 {
        let f = Observable::indicator(-1.0, 1.0);
        let opts = QuadOptions::default().with_rel_tol(1e-10);
        for &x0 in xs.iter().filter(|&&v| v.abs() < 20.0) {
            out.push(check(
                format!("kl/resolvent 1(-1,1] x={x0} q={q}"),
                Tol::Rel(tol),
                || {
                    let oracle = integrate(
                        |y| {
                            kl.killed_potential_density(-20.0, 20.0, x0, y)
                                .unwrap_or(f64::NAN)
                        },
                        -1.0,
                        1.0,
                        &[0.0, x0],
                        &opts,
                    )?;
                    Ok((ev.resolvent(x0, &f)?.value, oracle.value, None))
                },
            ));
        }
    }
    out
}

/// Direct normalization against q·N_U 1.
pub fn normalization_checks(
    label: &str,
    rs: &RefractedSpec,
    q: f64,
    tol: f64,
    resolvent_tol: f64,
) -> CheckRecord {
    check(
        format!("normalization/{label} dual route q={q}"),
        Tol::Rel(tol),
        || {
            let ev = rs
                .at(q)?
                .with_options(QuadOptions::default().with_rel_tol(1e-9))
                .with_resolvent_options(QuadOptions::default().with_rel_tol(resolvent_tol));
            Ok((
                ev.normalization()?.value,
                ev.normalization_via_resolvent()?.value,
                None,
            ))
        },
    )
}

/// With Y = X the normalization is Ψ_X'(Φ_X(q)).
pub fn no_refraction_check(label: &str, x: &LevySpec, q: f64, tol: f64) -> CheckRecord {
    check(
        format!("normalization/{label} X=Y q={q}"),
        Tol::Rel(tol),
        || {
            let ev = RefractedSpec::new(x.clone(), x.clone())?
                .at(q)?
                .with_options(QuadOptions::default().with_rel_tol(1e-9));
            Ok((
                ev.normalization()?.value,
                ev.scale_x().psi_prime_phi(),
                None,
            ))
        },
    )
}

/// q·R_U 1(x) = 1.
pub fn resolvent_mass_checks(
    label: &str,
    rs: &RefractedSpec,
    q: f64,
    xs: &[f64],
    tol: f64,
    resolvent_tol: f64,
) -> Vec<CheckRecord> {
    let ev = rs
        .at(q)
        .map(|ev| ev.with_resolvent_options(QuadOptions::default().with_rel_tol(resolvent_tol)));
    xs.iter()
        .map(|&x| {
            check(
                format!("resolvent/{label} mass x={x} q={q}"),
                Tol::Abs(tol),
                || {
                    let ev = ev.as_ref().map_err(Clone::clone)?;
                    Ok((
                        q * ev.resolvent(x, &Observable::constant(1.0))?.value,
                        1.0,
                        None,
                    ))
                },
            )
        })
        .collect()
}

/// R^(q1) f − R^(q2) f = (q2 − q1) R^(q1) R^(q2) f at x = 0 for f = 1_{(0,∞)}.
/// R^(q2) f is tabulated on a grid graded towards 0 and composed with
/// coarse (1e-4) resolvent quadrature.
pub fn resolvent_equation_check(
    label: &str,
    rs: &RefractedSpec,
    q1: f64,
    q2: f64,
    tol: f64,
) -> CheckRecord {
    check(
        format!("resolvent/{label} equation q1={q1} q2={q2}"),
        Tol::Abs(tol),
        || {
            let coarse = QuadOptions::default().with_rel_tol(1e-4);
            let r1 = rs.at(q1)?.with_resolvent_options(coarse.clone());
            let r2 = rs.at(q2)?.with_resolvent_options(coarse);
            let f = Observable::indicator(0.0, f64::INFINITY);
            let lhs = r1.resolvent(0.0, &f)?.value - r2.resolvent(0.0, &f)?.value;
            // R^(q1) weighs [0, ∞) by e^{−Φ_X(q1) y}; beyond 15/Φ the table is flat.
            let extent = 15.0 / r1.scale_x().phi().min(1.0);
            let nodes = 60;
            let grid: Vec<f64> = (0..=nodes)
                .map(|i| extent * (i as f64 / nodes as f64).powi(2))
                .collect();
            let g = r2.tabulate_resolvent(&f, &grid)?;
            let rhs = (q2 - q1) * r1.resolvent(0.0, &g)?.value;
            Ok((lhs, rhs, None))
        },
    )
}

/// Monte Carlo exit estimate at level n against the analytic exit transform.
pub fn mc_exit_check(
    label: &str,
    rs: &RefractedSpec,
    case: &ExitCase,
    n: u32,
    reps: u64,
    seed: u64,
) -> CheckRecord {
    check(
        format!("mc/{label} exit n={n} R={reps} {}", fmt_case(case)),
        Tol::Abs(0.0),
        || {
            let analytic = rs.at(case.q)?.exit_up(case.b, case.x0, case.a)?;
            let cfg = SimConfig::new(rs.clone(), Some(n), case.x0, case.q)
                .with_barriers(case.b, case.a)
                .with_reps(reps)
                .with_seed(seed);
            let est = simulate_exit(&cfg)?;
            if est.censored > 0 {
                log::warn!("{} of {reps} paths censored", est.censored);
            }
            Ok((analytic, est.mean, Some(est.std_error)))
        },
    )
}

/// Per-bin discounted occupation against the bin integral of the killed
/// potential density.
#[allow(clippy::too_many_arguments)]
pub fn mc_occupation_checks(
    label: &str,
    rs: &RefractedSpec,
    (b, a): (f64, f64),
    x0: f64,
    q: f64,
    bins: usize,
    n: u32,
    reps: u64,
    seed: u64,
    extra_tol: f64,
) -> Vec<CheckRecord> {
    let edges: Vec<f64> = (0..=bins)
        .map(|i| b + (a - b) * i as f64 / bins as f64)
        .collect();
    let cfg = SimConfig::new(rs.clone(), Some(n), x0, q)
        .with_barriers(b, a)
        .with_reps(reps)
        .with_seed(seed);
    let prefix = format!("mc/{label} occupation n={n} R={reps} b={b} a={a} x0={x0} q={q}");
    let run =
        || -> refracted_core::Result<_> { Ok((rs.at(q)?, simulate_occupation(&cfg, &edges)?)) };
    let (ev, occ) = match run() {
        Ok(v) => v,
        Err(e) => return vec![check(prefix, Tol::Abs(extra_tol), || Err(e))],
    };
    edges
        .windows(2)
        .zip(&occ.bins)
        .map(|(w, est)| {
            check(
                format!("{prefix} bin=({:.4},{:.4}]", w[0], w[1]),
                Tol::Abs(extra_tol),
                || {
                    let mut failure = None;
                    let analytic = integrate(
                        |y| match ev.killed_potential_density(b, a, x0, y) {
                            Ok(d) => d,
                            Err(e) => {
                                failure.get_or_insert(e);
                                0.0
                            }
                        },
                        w[0],
                        w[1],
                        &[0.0, x0],
                        &QuadOptions::default(),
                    )?;
                    if let Some(e) = failure {
                        return Err(e);
                    }
                    Ok((analytic.value, est.mean, Some(est.std_error)))
                },
            )
        })
        .collect()
}

/// One record per consecutive pair of levels: the increase of the absolute
/// error, which must stay within 2 combined standard errors.
pub fn mc_convergence_checks(
    label: &str,
    rs: &RefractedSpec,
    case: &ExitCase,
    levels: &[u32],
    reps: u64,
    seed: u64,
) -> Vec<CheckRecord> {
    let prefix = format!("mc/{label} convergence R={reps} {}", fmt_case(case));
    let run = || -> refracted_core::Result<_> {
        let analytic = rs.at(case.q)?.exit_up(case.b, case.x0, case.a)?;
        let template = SimConfig::new(rs.clone(), None, case.x0, case.q)
            .with_barriers(case.b, case.a)
            .with_reps(reps)
            .with_seed(seed);
        convergence_study(&template, levels, analytic)
    };
    let start = Instant::now();
    let rows = match run() {
        Ok(rows) => rows,
        Err(e) => return vec![check(prefix, Tol::Abs(0.0), || Err(e))],
    };
    let per_row = start.elapsed().as_secs_f64() / rows.len() as f64;
    for r in &rows {
        log::info!(
            "{prefix}: n={} estimate={} se={} error={}",
            r.n,
            r.estimate,
            r.std_error,
            r.abs_error
        );
    }
    rows.windows(2)
        .map(|w| {
            let increase = (w[1].abs_error - w[0].abs_error).max(0.0);
            let mut rec = CheckRecord::new(
                format!("{prefix} error increase n={} vs n={}", w[1].n, w[0].n),
                increase,
                0.0,
                None,
                2.0 * w[0].std_error.hypot(w[1].std_error),
            );
            rec.seconds = Some(per_row);
            rec
        })
        .collect()
}

/// Runs the scenario's suite; records come back in a fixed order.
pub fn run_suite(s: &Scenario) -> Vec<CheckRecord> {
    let mut out = Vec::new();
    let run = |suite: Suite| s.suite == suite || s.suite == Suite::All;
    let positive_q: Vec<f64> = s.q.iter().copied().filter(|&q| q > 0.0).collect();
    let tol = &s.tolerances;
    if run(Suite::Trivial) {
        let mut qs = vec![0.0];
        qs.extend(positive_q.iter().copied());
        for q in qs {
            out.extend(boundary_checks("U", &s.spec, q, &s.barriers));
        }
    }
    if run(Suite::KlEquivalence) {
        if s.x.is_bounded_variation() {
            for &q in &s.q {
                for &(b, a) in &s.barriers {
                    out.extend(kl_checks(
                        &s.x, s.kl_alpha, q, b, a, &s.x_grid, &s.y_grid, tol.kl,
                    ));
                }
            }
        } else {
            log::warn!("skipping kl-equivalence: X has unbounded variation");
        }
    }
    if run(Suite::Identities) {
        let mut qs = vec![0.0];
        qs.extend(positive_q.iter().copied());
        for q in &qs {
            out.extend(transform_checks(
                "X",
                &s.x,
                *q,
                &[0.5, 1.0, 2.0],
                tol.transform,
            ));
            out.extend(transform_checks(
                "Y",
                &s.y,
                *q,
                &[0.5, 1.0, 2.0],
                tol.transform,
            ));
        }
        for &q in &positive_q {
            out.push(normalization_checks(
                "U",
                &s.spec,
                q,
                tol.dual_route,
                tol.resolvent_quadrature,
            ));
            out.push(no_refraction_check("X", &s.x, q, tol.dual_route));
            out.extend(resolvent_mass_checks(
                "U",
                &s.spec,
                q,
                &[-1.0, 0.0, 1.0],
                tol.mass,
                tol.resolvent_quadrature,
            ));
        }
        let [q1, q2] = s.resolvent_equation_q;
        out.push(resolvent_equation_check(
            "U",
            &s.spec,
            q1,
            q2,
            tol.resolvent_equation,
        ));
    }
    if run(Suite::Mc) {
        let mc = &s.mc;
        let n = *mc.levels.last().expect("validated nonempty");
        for case in &mc.exit {
            out.push(mc_exit_check("U", &s.spec, case, n, mc.reps, mc.seed));
        }
        let [b, a] = mc.occupation_barriers;
        if mc.occupation_bins > 0 {
            out.extend(mc_occupation_checks(
                "U",
                &s.spec,
                (b, a),
                mc.occupation_x0,
                mc.occupation_q,
                mc.occupation_bins,
                n,
                mc.occupation_reps,
                mc.seed,
                tol.occupation,
            ));
        }
        out.extend(mc_convergence_checks(
            "U",
            &s.spec,
            &mc.convergence,
            &mc.levels,
            mc.reps,
            mc.seed,
        ));
    }
    out
}
