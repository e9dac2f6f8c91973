use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::report::{CheckResult, Status, SuiteResult, Table, Value};
use crate::classical_flow::{
    check_nontrapping, compute_asymptotes, effective_hamiltonian_flow, high_energy_limit,
    integrate_flow_with, verify_flow_estimates, wave_map, AsymptoteOptions, FlowOptions,
    FlowVariant, MapDirection, PhasePoint, WaveMapOptions,
};
use crate::dollard_phase::{verify_phase_bounds, BoundSettings, PhaseFunction};
use crate::error::{Error, Result};
use crate::quantum_propagator::GridState;
use crate::symbols::{verify_decay, LongRangeConfig, SampleBox, SymbolModel};
use crate::wavefront_detector::{
    singular_control, verify_shift_law, verify_smoothing, CoherentProbe, SmoothingSettings,
    Verdict, WFSample,
};

pub const SUITES: [&str; 7] = [
    "prop1_asymptotes",
    "thm6_highenergy",
    "lemma7_bounds",
    "lemma8_consistency",
    "thm4_shift",
    "thm5_smoothing",
    "assumption_audit",
];

/// One-line description per suite.
pub fn describe(name: &str) -> Option<&'static str> {
    Some(match name {
        "prop1_asymptotes" => {
            "decay rates, asymptotes and wave-map round trips of classical trajectories"
        }
        "thm6_highenergy" => "high-energy limit of the scaled flow against the asymptotes",
        "lemma7_bounds" => "growth of the Dollard phase correction and its gradient in |xi|",
        "lemma8_consistency" => "effective-Hamiltonian flow against the free-frame full flow",
        "thm4_shift" => {
            "displacement of a coherent state under e^(itH_0) e^(-itH) for a degree-one potential"
        }
        "thm5_smoothing" => "probe regularity and weighted norm ratios after e^(i sigma V(D))",
        "assumption_audit" => "decay, positivity, exponent and nontrapping conditions of the model",
        _ => return None,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Propagator aborts instead of warning when the absorbing layer eats
    /// too much norm.
    pub strict: bool,
    /// Run independent seeds or rungs of a suite in parallel.
    pub parallel: bool,
}

type Metrics = Vec<(String, f64)>;

fn check(
    name: impl Into<String>,
    tolerance: impl Into<String>,
    f: impl FnOnce() -> Result<(Status, Metrics)>,
) -> CheckResult {
    let name = name.into();
    let tolerance = tolerance.into();
    match f() {
        Ok((status, metrics)) => CheckResult {
            name,
            status,
            tolerance,
            metrics,
            message: None,
        },
        Err(e) => {
            log::warn!("check {name} failed to run: {e}");
            CheckResult {
                name,
                status: Status::Fail,
                tolerance,
                metrics: Vec::new(),
                message: Some(e.to_string()),
            }
        }
    }
}

fn m(key: &str, v: f64) -> (String, f64) {
    (key.to_string(), v)
}

fn map_items<T: Sync, R: Send>(
    parallel: bool,
    items: &[T],
    f: impl Fn(usize, &T) -> R + Sync + Send,
) -> Vec<R> {
    if parallel {
        items.par_iter().enumerate().map(|(i, x)| f(i, x)).collect()
    } else {
        items.iter().enumerate().map(|(i, x)| f(i, x)).collect()
    }
}

/// Which model conditions a suite relies on.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Requirement {
    Mu,
    Nu,
    /// Homogeneous long-range part with degree in `[1, 3/2)` when present.
    BetaRange,
    /// Homogeneous long-range part of degree exactly one.
    BetaOne,
    /// Homogeneous long-range part with degree in `(1, 3/2)`.
    BetaSmoothing,
    Decay,
    Nontrapping,
}

fn requirements(suite: &str) -> &'static [Requirement] {
    use Requirement::*;
    match suite {
        "prop1_asymptotes" | "thm6_highenergy" | "lemma8_consistency" => {
            &[Mu, Nu, BetaRange, Decay]
        }
        "lemma7_bounds" => &[Mu, Nu, BetaRange],
        "thm4_shift" => &[BetaOne],
        "thm5_smoothing" => &[BetaSmoothing],
        "assumption_audit" => &[Mu, Nu, BetaRange, Decay, Nontrapping],
        _ => &[],
    }
}

fn assumption_checks(
    cfg: &ExperimentConfig,
    model: &SymbolModel,
    suite: &str,
    opts: RunOptions,
) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let beta = cfg.model.beta();
    let harmonic = matches!(
        cfg.model.potential.long_range,
        LongRangeConfig::Harmonic { .. }
    );
    for req in requirements(suite) {
        match req {
            Requirement::Mu => out.push(check("assumption.mu", "1/2 < mu <= 1", || {
                let mu = cfg.model.effective_mu();
                Ok((Status::from_bool(mu > 0.5 && mu <= 1.0), vec![m("mu", mu)]))
            })),
            Requirement::Nu => out.push(check("assumption.nu", "nu > 1", || {
                let nu = cfg.model.nu;
                Ok((Status::from_bool(nu > 1.0), vec![m("nu", nu)]))
            })),
            Requirement::BetaRange => out.push(check(
                "assumption.beta",
                "1 <= beta < 3/2 when homogeneous",
                || {
                    Ok(match beta {
                        Some(b) => (
                            Status::from_bool((1.0..1.5).contains(&b)),
                            vec![m("beta", b)],
                        ),
                        None => (Status::from_bool(!harmonic), Vec::new()),
                    })
                },
            )),
            Requirement::BetaOne => out.push(check(
                "assumption.beta",
                "beta = 1 or no long-range part",
                || {
                    Ok(match beta {
                        Some(b) => (Status::from_bool(b == 1.0), vec![m("beta", b)]),
                        None => (
                            Status::from_bool(model.potential().long_range().is_zero()),
                            Vec::new(),
                        ),
                    })
                },
            )),
            Requirement::BetaSmoothing => out.push(check(
                "assumption.beta",
                "1 < beta < 3/2, nonvanishing gradient",
                || {
                    let b = beta.ok_or_else(|| {
                        Error::Precondition("no homogeneous long-range part".into())
                    })?;
                    let ok = b > 1.0 && b < 1.5 && model.potential().gradient_nonvanishing();
                    Ok((Status::from_bool(ok), vec![m("beta", b)]))
                },
            )),
            Requirement::Decay => out.push(check(
                "assumption.decay",
                "symbol bounds hold, metric positive definite",
                || {
                    let r = verify_decay(model, &SampleBox::default(), 2);
                    let worst = r
                        .entries
                        .iter()
                        .filter_map(|e| e.slope.map(|s| s - e.bound))
                        .fold(f64::NEG_INFINITY, f64::max);
                    Ok((
                        Status::from_bool(r.pass && r.positive_definite),
                        vec![
                            m("min_eigenvalue", r.min_eigenvalue),
                            m("worst_slope_excess", worst),
                        ],
                    ))
                },
            )),
            Requirement::Nontrapping => {
                let starts = cfg.starting_points();
                let rows = map_items(opts.parallel, &starts, |i, p| {
                    [1.0, -1.0].map(|sign| {
                        check(
                            format!(
                                "assumption.nontrapping[{i}{}]",
                                if sign > 0.0 { "+" } else { "-" }
                            ),
                            "c >= 0.1 |xi_inf|",
                            || {
                                let tr = integrate_flow_with(
                                    model,
                                    p,
                                    0.0,
                                    sign * cfg.flow.t_max,
                                    FlowVariant::Kinetic,
                                    &FlowOptions::new(cfg.flow.tol),
                                )?;
                                let n = check_nontrapping(&tr)?;
                                Ok((
                                    Status::from_bool(n.pass),
                                    vec![m("c", n.c), m("big_c", n.big_c), m("speed", n.speed)],
                                ))
                            },
                        )
                    })
                });
                out.extend(rows.into_iter().flatten());
            }
        }
    }
    out
}

/// Runs one named suite. Errors are returned only for unknown suites and
/// invalid configurations; failures inside checks are recorded as such.
pub fn run_suite(name: &str, cfg: &ExperimentConfig, opts: RunOptions) -> Result<SuiteResult> {
    if describe(name).is_none() {
        return Err(Error::Configuration(format!(
            "unknown suite `{name}`; expected one of {}",
            SUITES.join(", ")
        )));
    }
    cfg.validate()?;
    let model = Arc::new(cfg.model.build()?);
    let clock = Instant::now();
    let mut checks = assumption_checks(cfg, &model, name, opts);
    let mut tables = Vec::new();
    match name {
        "prop1_asymptotes" => prop1(cfg, &model, opts, &mut checks, &mut tables),
        "thm6_highenergy" => thm6(cfg, &model, opts, &mut checks, &mut tables),
        "lemma7_bounds" => lemma7(cfg, &model, &mut checks, &mut tables),
        "lemma8_consistency" => lemma8(cfg, &model, opts, &mut checks, &mut tables),
        "thm4_shift" => thm4(cfg, &model, opts, &mut checks, &mut tables),
        "thm5_smoothing" => thm5(cfg, &model, &mut checks, &mut tables),
        _ => {}
    }
    Ok(SuiteResult {
        suite: name.to_string(),
        checks,
        tables,
        wall_clock: clock.elapsed().as_secs_f64(),
        config_hash: cfg.hash(),
    })
}

fn asymptote_options(cfg: &ExperimentConfig) -> AsymptoteOptions {
    AsymptoteOptions {
        t_max: cfg.flow.t_max,
        tol: cfg.flow.tol,
        phase_tol: cfg.flow.phase_tol,
        ..AsymptoteOptions::default()
    }
}

fn exponent_value(s: Option<f64>) -> f64 {
    s.unwrap_or(f64::NEG_INFINITY)
}

fn prop1(
    cfg: &ExperimentConfig,
    model: &SymbolModel,
    opts: RunOptions,
    checks: &mut Vec<CheckResult>,
    tables: &mut Vec<Table>,
) {
    let starts = cfg.starting_points();
    let mut rates = Table::new("rates", &["seed", "t", "|z-x+|", "fitted_exponent"]);
    let per_seed = map_items(opts.parallel, &starts, |i, p| {
        let mut rows = Vec::new();
        let mut local = Vec::new();
        local.push(check(
            format!("estimates[{i}]"),
            "fitted slopes <= expected + 0.15",
            || {
                let r = verify_flow_estimates(model, p, cfg.flow.t_max)?;
                let mut metrics = vec![m("mu", r.mu), m("mu_prime", r.mu_prime)];
                for e in &r.entries {
                    metrics.push(m(&format!("{}_slope", e.quantity), exponent_value(e.slope)));
                    metrics.push(m(&format!("{}_expected", e.quantity), e.expected));
                    if e.quantity == "free_frame_position" {
                        for (t, g) in e.times.iter().zip(&e.magnitude) {
                            rows.push(vec![
                                Value::from(i),
                                (*t).into(),
                                (*g).into(),
                                exponent_value(e.slope).into(),
                            ]);
                        }
                    }
                }
                Ok((Status::from_bool(r.pass), metrics))
            },
        ));
        let tol = cfg.flow.asymptote_tol;
        local.push(check(
            format!("asymptotes[{i}]"),
            format!("nontrapping, extrapolation error <= {tol:e}"),
            || {
                let s = compute_asymptotes(model, p, &asymptote_options(cfg))?;
                let trapped = [&s.plus, &s.minus]
                    .iter()
                    .any(|side| side.nontrapping.is_some_and(|n| !n.pass));
                Ok((
                    Status::from_bool(!trapped && s.error <= tol),
                    vec![
                        m("error", s.error),
                        m("x_exponent_plus", s.plus.x_exponent),
                        m("x_exponent_minus", s.minus.x_exponent),
                        m(
                            "asymptote_shift",
                            s.plus.point().distance(p).max(s.minus.point().distance(p)),
                        ),
                    ],
                ))
            },
        ));
        let tol = cfg.flow.round_trip_tol;
        local.push(check(
            format!("wave_map[{i}]"),
            format!("round trip <= {tol:e}"),
            || {
                let mut wopts = WaveMapOptions::default();
                wopts.asymptotes.t_max = cfg.flow.t_max;
                wopts.asymptotes.tol = cfg.flow.tol;
                wopts.asymptotes.phase_tol = cfg.flow.phase_tol;
                let mut worst = 0.0f64;
                for sign in [1.0, -1.0] {
                    let a = wave_map(model, p, MapDirection::Inverse, sign, &wopts)?;
                    let back = wave_map(model, &a, MapDirection::Forward, sign, &wopts)?;
                    worst = worst.max(back.distance(p));
                }
                Ok((
                    Status::from_bool(worst <= tol),
                    vec![m("round_trip", worst)],
                ))
            },
        ));
        (local, rows)
    });
    for (c, rows) in per_seed {
        checks.extend(c);
        for r in rows {
            rates.push(r);
        }
    }
    tables.push(rates);
}

fn thm6(
    cfg: &ExperimentConfig,
    model: &Arc<SymbolModel>,
    opts: RunOptions,
    checks: &mut Vec<CheckResult>,
    tables: &mut Vec<Table>,
) {
    let starts = cfg.starting_points();
    let mut table = Table::new(
        "limits",
        &[
            "seed",
            "t",
            "lambda",
            "component",
            "sample",
            "limit",
            "asymptote",
        ],
    );
    let tol = cfg.flow.limit_tol;
    let per_seed = map_items(opts.parallel, &starts, |i, p| {
        let mut rows = Vec::new();
        let c = check(
            format!("high_energy[{i}]"),
            format!("max component discrepancy <= {tol:e}"),
            || {
                let pf = PhaseFunction::long_range(Arc::clone(model), cfg.flow.phase_tol)?;
                let s = compute_asymptotes(model, p, &asymptote_options(cfg))?;
                let mut worst = 0.0f64;
                let mut metrics = Vec::new();
                for &t in &cfg.flow.times {
                    let h = high_energy_limit(model, &pf, p, t, &cfg.flow.lambdas, cfg.flow.tol)?;
                    let cmp = h.compare(&s);
                    worst = worst.max(cmp.max_discrepancy);
                    metrics.push(m(&format!("discrepancy_t{t}"), cmp.max_discrepancy));
                    metrics.push(m(&format!("x_exponent_t{t}"), h.x_exponent));
                    metrics.push(m(&format!("xi_exponent_t{t}"), h.xi_exponent));
                    let side = s.side(t);
                    let d = p.dim();
                    for (k, lam) in h.lambdas.iter().enumerate() {
                        for a in 0..2 * d {
                            let (name, sample, limit, asym) = if a < d {
                                (
                                    format!("x_{}", a + 1),
                                    h.x_samples[k][a],
                                    h.limit.x[a],
                                    side.x[a],
                                )
                            } else {
                                let b = a - d;
                                (
                                    format!("xi_{}", b + 1),
                                    h.xi_samples[k][b],
                                    h.limit.xi[b],
                                    side.xi[b],
                                )
                            };
                            rows.push(vec![
                                Value::from(i),
                                t.into(),
                                (*lam).into(),
                                name.into(),
                                sample.into(),
                                limit.into(),
                                asym.into(),
                            ]);
                        }
                    }
                }
                metrics.insert(0, m("max_discrepancy", worst));
                Ok((Status::from_bool(worst <= tol), metrics))
            },
        );
        (c, rows)
    });
    for (c, rows) in per_seed {
        checks.push(c);
        for r in rows {
            table.push(r);
        }
    }
    tables.push(table);
}

fn lemma7(
    cfg: &ExperimentConfig,
    model: &Arc<SymbolModel>,
    checks: &mut Vec<CheckResult>,
    tables: &mut Vec<Table>,
) {
    let mut table = Table::new(
        "slopes",
        &["t", "order", "xi", "magnitude", "fitted_slope", "bound"],
    );
    let slack = cfg.flow.slope_slack;
    let report = PhaseFunction::long_range(Arc::clone(model), cfg.flow.phase_tol).and_then(|pf| {
        let mut s = BoundSettings::new(model.dim());
        s.times = cfg.flow.bound_times.clone();
        s.xi_min = cfg.flow.bound_xi[0];
        s.xi_max = cfg.flow.bound_xi[1];
        s.slope_slack = slack;
        verify_phase_bounds(&pf, &s)
    });
    match report {
        Ok(r) => {
            for e in &r.entries {
                checks.push(check(
                    format!("bound[t={},order={}]", e.t, e.order),
                    format!("slope <= 2 - mu - order + {slack}"),
                    || {
                        Ok((
                            Status::from_bool(e.pass),
                            vec![
                                m("slope", exponent_value(e.slope)),
                                m("bound", e.bound),
                                m("max_ratio", e.max_ratio),
                                m("growth", e.growth),
                            ],
                        ))
                    },
                ));
                for (xi, mag) in e.xi.iter().zip(&e.magnitude) {
                    table.push(vec![
                        e.t.into(),
                        e.order.into(),
                        (*xi).into(),
                        (*mag).into(),
                        exponent_value(e.slope).into(),
                        e.bound.into(),
                    ]);
                }
            }
        }
        Err(e) => checks.push(failed("bounds", "runs", &e)),
    }
    tables.push(table);
}

fn lemma8(
    cfg: &ExperimentConfig,
    model: &Arc<SymbolModel>,
    opts: RunOptions,
    checks: &mut Vec<CheckResult>,
    tables: &mut Vec<Table>,
) {
    let starts = cfg.starting_points();
    let tol = cfg.flow.consistency_tol;
    let h = cfg.flow.horizon;
    let stops: Vec<f64> = (1..=4).map(|k| h * k as f64 / 4.0).collect();
    let mut table = Table::new("reconstruction", &["seed", "t", "x_error", "xi_error"]);
    let per_seed = map_items(opts.parallel, &starts, |i, p| {
        let mut rows = Vec::new();
        let c = check(
            format!("reconstruction[{i}]"),
            format!("<= 10 * {tol:e}"),
            || {
                let pf = PhaseFunction::long_range(
                    Arc::clone(model),
                    1e-2 * tol.min(cfg.flow.phase_tol),
                )?;
                let inner = 1e-2 * tol;
                let mut worst = 0.0f64;
                for sign in [1.0, -1.0] {
                    let ts: Vec<f64> = stops.iter().map(|s| sign * s).collect();
                    let full = integrate_flow_with(
                        model,
                        p,
                        0.0,
                        sign * h,
                        FlowVariant::Full,
                        &FlowOptions::new(inner).with_checkpoints(ts.clone()),
                    )?;
                    let eff =
                        effective_hamiltonian_flow(model, &pf, p, (0.0, sign * h), inner, &ts)?;
                    for &t in &ts {
                        let missing = || Error::Integration {
                            t,
                            reason: "checkpoint missing".into(),
                        };
                        let e = full.at(t).ok_or_else(missing)?;
                        let q = eff.at(t).ok_or_else(missing)?;
                        let g = pf.phase_gradient(t, &e.xi)?;
                        let dx =
                            q.x.iter()
                                .zip(&e.x)
                                .zip(&g)
                                .map(|((z, x), g)| (z - (x - g)).abs())
                                .fold(0.0, f64::max);
                        let dxi =
                            q.xi.iter()
                                .zip(&e.xi)
                                .map(|(a, b)| (a - b).abs())
                                .fold(0.0, f64::max);
                        worst = worst.max(dx).max(dxi);
                        rows.push(vec![Value::from(i), t.into(), dx.into(), dxi.into()]);
                    }
                }
                Ok((
                    Status::from_bool(worst <= 10.0 * tol),
                    vec![m("max_error", worst)],
                ))
            },
        );
        (c, rows)
    });
    for (c, rows) in per_seed {
        checks.push(c);
        for r in rows {
            table.push(r);
        }
    }
    tables.push(table);
}

fn thm4(
    cfg: &ExperimentConfig,
    model: &SymbolModel,
    opts: RunOptions,
    checks: &mut Vec<CheckResult>,
    tables: &mut Vec<Table>,
) {
    let d = &cfg.detector;
    let g = &cfg.grid;
    let mut sizes = vec![g.n];
    if g.refine {
        sizes.push(2 * g.n);
    }
    let runs = map_items(opts.parallel, &sizes, |_, &n| {
        let grid = GridState::zeros(&g.sizes(n), &g.extents(g.extent))?;
        let u0 = CoherentProbe::new(d.source.clone(), d.search.lambda)?.packet(&grid)?;
        verify_shift_law(
            &u0,
            &d.source,
            model,
            d.t,
            &g.propagator(opts.strict),
            &d.search,
        )
    });
    let mut table = Table::new(
        "displacement",
        &[
            "n",
            "cell",
            "axis",
            "source_x",
            "predicted_x",
            "mirror_x",
            "detected_x",
            "source_xi",
            "detected_xi",
            "displacement_cells",
            "covector_cells",
            "mirror_cells",
        ],
    );
    for (n, r) in sizes.iter().zip(&runs) {
        if let Ok(r) = r {
            for a in 0..r.source.dim() {
                table.push(vec![
                    (*n).into(),
                    r.cell.into(),
                    a.into(),
                    r.source.x[a].into(),
                    r.predicted.x[a].into(),
                    r.mirror.x[a].into(),
                    r.detected.x[a].into(),
                    r.source.xi[a].into(),
                    r.detected.xi[a].into(),
                    r.displacement_cells.into(),
                    r.covector_cells.into(),
                    r.mirror_cells.into(),
                ]);
            }
        }
    }
    for (n, r) in sizes.iter().zip(&runs) {
        let tolerance = format!(
            "position within {} cells of x - t^2/2 sign(xi), covector within {} frequency cells",
            d.search.position_cells, d.search.covector_cells
        );
        checks.push(match r {
            Ok(r) => check(format!("shift[n={n}]"), tolerance, || {
                Ok((
                    Status::from_bool(r.pass),
                    vec![
                        m("displacement_cells", r.displacement_cells),
                        m("covector_cells", r.covector_cells),
                        m("mirror_cells", r.mirror_cells),
                        m("peak", r.peak),
                    ],
                ))
            }),
            Err(e) => failed(format!("shift[n={n}]"), tolerance, e),
        });
    }
    if g.refine {
        let rule = "fine error <= coarse error + half a coarse cell";
        checks.push(match (&runs[0], &runs[1]) {
            (Ok(coarse), Ok(fine)) => check("refinement", rule, || {
                let (ec, ef) = (coarse.position_error(), fine.position_error());
                Ok((
                    Status::from_bool(ef <= ec + 0.5 * coarse.cell),
                    vec![
                        m("coarse_error", ec),
                        m("fine_error", ef),
                        m("coarse_cell", coarse.cell),
                    ],
                ))
            }),
            (Err(e), _) | (_, Err(e)) => failed("refinement", rule, e),
        });
    }
    tables.push(table);
}

fn failed(name: impl Into<String>, tolerance: impl Into<String>, e: &Error) -> CheckResult {
    CheckResult {
        name: name.into(),
        status: Status::Fail,
        tolerance: tolerance.into(),
        metrics: Vec::new(),
        message: Some(e.to_string()),
    }
}

fn panel_points(cfg: &ExperimentConfig) -> Vec<PhasePoint> {
    let dim = cfg.model.dim;
    let axis = |v: f64| {
        let mut p = vec![0.0; dim];
        p[0] = v;
        p
    };
    cfg.detector
        .panel_x
        .iter()
        .flat_map(|&x| {
            cfg.detector.panel_xi.iter().map(move |&xi| PhasePoint {
                x: axis(x),
                xi: axis(xi),
            })
        })
        .collect()
}

fn gaussian(sizes: &[usize], extents: &[f64], w: f64) -> Result<GridState> {
    let mut g = GridState::from_fn(sizes, extents, |x| {
        Complex64::new(
            (-x.iter().map(|c| c * c).sum::<f64>() / (2.0 * w * w)).exp(),
            0.0,
        )
    })?;
    g.normalize()?;
    Ok(g)
}

fn thm5(
    cfg: &ExperimentConfig,
    model: &SymbolModel,
    checks: &mut Vec<CheckResult>,
    tables: &mut Vec<Table>,
) {
    let d = &cfg.detector;
    let g = &cfg.grid;
    let dim = cfg.model.dim;
    let beta = cfg.model.beta().unwrap_or(f64::NAN);
    let top = 1.0 / (1.0 + beta);
    let sigmas: Vec<f64> = match d.sigma_count {
        0 => Vec::new(),
        1 => vec![top],
        k => (0..k)
            .map(|j| 0.1 + (top - 0.1) * j as f64 / (k - 1) as f64)
            .collect(),
    };
    let translates: Vec<Vec<f64>> = (0..d.translates)
        .map(|k| {
            let mut a = vec![0.0; dim];
            a[0] = if d.translates > 1 {
                -d.translate_radius
                    + 2.0 * d.translate_radius * k as f64 / (d.translates - 1) as f64
            } else {
                0.0
            };
            a
        })
        .collect();
    let settings = SmoothingSettings {
        ladder: d.ladder.clone(),
        panel: panel_points(cfg),
        sigmas,
        weights: d.weights.clone(),
        translates,
        thresholds: d.thresholds,
        max_spread: d.max_spread,
    };
    let mut panel = Table::new(
        "panel",
        &[
            "role",
            "x",
            "xi",
            "lambda",
            "coefficient",
            "exponent",
            "verdict",
        ],
    );
    let mut ratios = Table::new("ratios", &["weight", "s", "sigma", "translate", "ratio"]);
    let report = gaussian(&g.sizes(g.n), &g.extents(g.extent), d.width).and_then(|probe| {
        let norm = gaussian(&g.sizes(g.norm_n), &g.extents(g.norm_extent), d.norm_width)?;
        verify_smoothing(&probe, &norm, model, d.t, &settings)
    });
    let push_panel = |table: &mut Table, role: &str, samples: &[WFSample]| {
        for s in samples {
            for (l, c) in s.ladder.iter().zip(&s.magnitudes) {
                table.push(vec![
                    role.into(),
                    join(&s.center.x).into(),
                    join(&s.center.xi).into(),
                    (*l).into(),
                    (*c).into(),
                    s.exponent.into(),
                    s.verdict.to_string().into(),
                ]);
            }
        }
    };
    match &report {
        Ok(r) => {
            push_panel(&mut panel, "smoothed", &r.samples);
            push_panel(&mut panel, "baseline", &r.baseline);
            for e in &r.ratios {
                ratios.push(vec![
                    e.weight.into(),
                    e.s.into(),
                    e.sigma.into(),
                    join(&e.translate).into(),
                    e.ratio.into(),
                ]);
            }
            checks.push(check(
                "panel_regular",
                format!("every exponent <= {}", d.thresholds.regular),
                || {
                    let worst = r
                        .samples
                        .iter()
                        .map(|s| s.exponent)
                        .fold(f64::NEG_INFINITY, f64::max);
                    let regular = r
                        .samples
                        .iter()
                        .filter(|s| s.verdict == Verdict::Regular)
                        .count();
                    Ok((
                        Status::from_bool(r.all_regular),
                        vec![
                            m("sigma", r.sigma),
                            m("worst_exponent", worst),
                            m("regular", regular as f64),
                        ],
                    ))
                },
            ));
            for (w, spread) in &r.spreads {
                checks.push(check(
                    format!("ratio_spread[N={w}]"),
                    format!("max/min < {:e}", d.max_spread),
                    || {
                        Ok((
                            Status::from_bool(spread.is_finite() && *spread < d.max_spread),
                            vec![m("spread", *spread)],
                        ))
                    },
                ));
            }
        }
        Err(e) => checks.push(failed("smoothing", "runs", e)),
    }
    checks.push(check(
        "singular_control",
        "jump exponent lowered by e^(i sigma V(D))",
        || {
            let n = g.n;
            let grid = GridState::zeros(&g.sizes(n), &g.extents(g.extent))?;
            let h = grid.spacing(0);
            let step = GridState::from_fn(&g.sizes(n), &g.extents(g.extent), |x| {
                let a = x[0];
                let v = if a.abs() < 0.5 * h || (a - 5.0).abs() < 0.5 * h {
                    0.5
                } else if a > 0.0 && a < 5.0 {
                    1.0
                } else {
                    0.0
                };
                Complex64::new(v, 0.0)
            })?;
            let mut axis = vec![0.0; dim];
            axis[0] = 0.5;
            let center = PhasePoint {
                x: vec![0.0; dim],
                xi: axis,
            };
            let sigma = 0.5 * top;
            let ctl = singular_control(
                &step,
                &center,
                model.potential(),
                sigma,
                &d.ladder,
                &d.thresholds,
            )?;
            let status = if ctl.before.verdict != Verdict::Singular {
                Status::Inconclusive
            } else {
                Status::from_bool(ctl.lowered())
            };
            Ok((
                status,
                vec![
                    m("before_exponent", ctl.before.exponent),
                    m("after_exponent", ctl.after.exponent),
                    m("sigma", sigma),
                ],
            ))
        },
    ));
    tables.push(panel);
    tables.push(ratios);
}

fn join(v: &[f64]) -> String {
    v.iter()
        .map(|c| super::report::fmt_float(*c))
        .collect::<Vec<_>>()
        .join(" ")
}
