//! One PASS/FAIL line per acceptance criterion; exits non-zero if any line
//! is FAIL.

mod common;

use std::f64::consts::PI;

use common::{
    dense_solve, max_diff, oracle_semi_step, oracle_stage, random_instance, BoundaryKind,
};
use fastrd_core::analysis::{fitted_slope, growth_factors, GrowthFactorQuery, LimitState};
use fastrd_core::experiment::{preset, run_experiment, Norm, Report, RunOptions, Sweep};
use fastrd_core::semi_implicit;
use fastrd_core::sirk2::{gamma, stage_residual, stage_rhs_norm, stage_solve};
use fastrd_core::spatial::interior_l2;
use fastrd_core::{
    BoundarySpec, FieldBoundary, ModelParams, Problem, SolverOptions, StateField,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Line {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn line(name: &'static str, passed: bool, detail: String) -> Line {
    Line { name, passed, detail }
}

fn quiet() -> RunOptions {
    RunOptions { threads: None, quiet: true }
}

fn run_preset(name: &str, edit: impl FnOnce(&mut fastrd_core::experiment::ExperimentSpec)) -> Report {
    let mut spec = preset(name).unwrap();
    spec.expectations.clear();
    edit(&mut spec);
    run_experiment(&spec, quiet()).unwrap()
}

// Reference order columns, coarsest pair last.
const T1_ORDER_INF: [f64; 10] =
    [1.0995, 1.0473, 1.0231, 1.0114, 1.0056, 1.0027, 1.0011, 1.0001, 0.99917, 0.99780];
const T1_ORDER_L2: [f64; 10] =
    [1.0995, 1.0473, 1.0231, 1.0114, 1.0056, 1.0027, 1.0011, 1.0001, 0.99923, 0.99793];
const T2_ORDER_INF: [f64; 6] = [2.0704, 2.0171, 2.0042, 2.0010, 1.9999, 1.9995];
const T2_ORDER_L2: [f64; 6] = [2.0704, 2.0171, 2.0042, 2.0010, 2.0002, 1.9999];

fn order_table(
    name: &'static str,
    report: &Report,
    cols: [(Norm, &[f64]); 2],
    at: f64,
    want: f64,
) -> Line {
    if report.solver_failed() || report.tables.len() != 1 {
        return line(name, false, "run failed".into());
    }
    let t = &report.tables[0];
    let mut worst = 0.0f64;
    for (norm, values) in cols {
        let got: Vec<Option<f64>> = t.rows.iter().skip(1).map(|r| r.orders[norm.index()]).collect();
        if got.len() != values.len() {
            return line(name, false, format!("{} orders, expected {}", got.len(), values.len()));
        }
        for (g, w) in got.iter().zip(values) {
            worst = worst.max(g.map_or(f64::INFINITY, |g| (g - w).abs()));
        }
    }
    let row = t.rows.iter().find(|r| (r.sweep_value - at).abs() <= 1e-12 * at);
    let Some(row) = row else {
        return line(name, false, format!("no row at {at}"));
    };
    let rel = (row.errors.e_inf - want).abs() / want;
    line(
        name,
        worst <= 0.03 && rel <= 0.05,
        format!(
            "max order deviation {worst:.2e} (tol 0.03); e_inf at {at} = {:.5e} vs {want:.4e}, rel {rel:.3} (tol 0.05)",
            row.errors.e_inf
        ),
    )
}

fn table1() -> Line {
    let r = run_preset("table1", |_| {});
    // the reference tau labels are ten times the actual steps: "1e-2" is tau = 1e-3
    order_table(
        "table1 temporal order",
        &r,
        [(Norm::Inf, &T1_ORDER_INF), (Norm::L2, &T1_ORDER_L2)],
        1e-3,
        3.5766e-4,
    )
}

fn table2() -> Line {
    let r = run_preset("table2", |_| {});
    order_table(
        "table2 spatial order",
        &r,
        [(Norm::Inf, &T2_ORDER_INF), (Norm::L2, &T2_ORDER_L2)],
        0.04,
        5.3758e-5,
    )
}

fn sirk2_slope() -> Line {
    let r = run_preset("fig2-sirk2", |_| {});
    let slope = r.tables.first().and_then(|t| fitted_slope(&t.column(Norm::Inf)));
    let ok = !r.solver_failed() && slope.is_some_and(|s| (1.85..=2.15).contains(&s));
    line("sirk2 temporal slope", ok, format!("slope {slope:?} (want [1.85, 2.15])"))
}

fn bound_constants(pr: &Problem, s: &StateField) -> (f64, f64) {
    let max = |x: &[f64]| x.iter().cloned().fold(0.0f64, f64::max);
    let hi = |bc: &FieldBoundary| bc.dirichlet_range(&pr.grid, 1.0).map_or(0.0, |r| r.1);
    (max(&s.u).max(hi(&pr.boundary.u)), max(&s.v).max(hi(&pr.boundary.v)))
}

fn bounds() -> Line {
    const SLACK: f64 = 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = f64::NEG_INFINITY;
    let mut failures = 0;
    let mut count = 0;
    let epsilons = [1.0, 1e-2, 1e-4];
    let kinds = [BoundaryKind::Dirichlet, BoundaryKind::Neumann];
    for i in 0..200 {
        let dim = 1 + i % 2;
        let kind = kinds[(i / 2) % 2];
        let eps = epsilons[(i / 4) % 3];
        let (pr, mut s, tau) = random_instance(&mut rng, dim, kind, eps, if dim == 1 { 64 } else { 16 });
        let (cu, cv) = bound_constants(&pr, &s);
        let mut inst_worst = f64::NEG_INFINITY;
        for _ in 0..50 {
            s = match semi_implicit::step(&pr, &s, tau) {
                Ok(s) => s,
                Err(_) => {
                    inst_worst = f64::INFINITY;
                    break;
                }
            };
            for j in 0..s.len() {
                let excess = [
                    -s.p[j],
                    s.p[j] - 1.0,
                    -s.u[j],
                    s.u[j] - cu,
                    -s.v[j],
                    s.v[j] - cv,
                ];
                inst_worst = excess.iter().cloned().fold(inst_worst, f64::max);
            }
        }
        count += 1;
        if inst_worst > SLACK {
            failures += 1;
        }
        worst = worst.max(inst_worst);
    }
    line(
        "bound preservation",
        failures == 0,
        format!("{count} instances, {failures} violating, worst excess {worst:.2e} (slack {SLACK:e})"),
    )
}

fn l2_decay() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut worst = f64::NEG_INFINITY;
    let mut count = 0;
    for i in 0..60 {
        let dim = 1 + i % 2;
        let eps = [1.0, 1e-2, 1e-4][(i / 2) % 3];
        let (mut pr, mut s, tau) = random_instance(&mut rng, dim, BoundaryKind::Dirichlet, eps, if dim == 1 { 64 } else { 16 });
        pr.boundary = BoundarySpec::dirichlet(0.0, 0.0);
        for k in 0..s.len() {
            if !pr.grid.is_interior(k) {
                s.u[k] = 0.0;
                s.v[k] = 0.0;
            }
        }
        for _ in 0..100 {
            let next = semi_implicit::step(&pr, &s, tau).unwrap();
            worst = worst
                .max(interior_l2(&pr.grid, &next.u) - interior_l2(&pr.grid, &s.u))
                .max(interior_l2(&pr.grid, &next.v) - interior_l2(&pr.grid, &s.v));
            s = next;
        }
        count += 1;
    }
    line(
        "l2 decay",
        worst <= 1e-11,
        format!("{count} instances x 100 steps, largest increase {worst:.2e} (tol 1e-11)"),
    )
}

fn random_state(rng: &mut ChaCha8Rng, label: usize) -> LimitState {
    match label {
        0 => LimitState::S1 { v_star: rng.gen_range(1e-3..2.0) },
        1 => LimitState::S2 { u_star: rng.gen_range(1e-3..2.0) },
        _ => LimitState::S3 { p1: rng.gen_range(0.0..=1.0) },
    }
}

fn growth() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut bad = 0;
    let mut s2_not_strict = 0;
    for case in 0..3 {
        for _ in 0..10_000 {
            let params = ModelParams::new(
                1.0,
                rng.gen_range(0.1..3.0),
                rng.gen_range(0.0..3.0),
                rng.gen_range(0.0..3.0),
            )
            .unwrap();
            let q = GrowthFactorQuery {
                r: if rng.gen_bool(0.05) { 0.0 } else { 10f64.powf(rng.gen_range(-6.0..6.0)) },
                r_eps: if rng.gen_bool(0.05) { 0.0 } else { 10f64.powf(rng.gen_range(-6.0..6.0)) },
                phi: rng.gen_range(-PI..=PI),
                params,
                state: random_state(&mut rng, case),
            };
            let roots = growth_factors(&q);
            if !roots.iter().all(|g| *g > 0.0 && *g <= 1.0) {
                bad += 1;
            }
            // strict contraction needs every branch to feel diffusion or reaction
            if case == 1
                && q.r > 0.0
                && q.r_eps > 0.0
                && q.phi.cos() < 1.0
                && params.d1 > 0.0
                && !roots.iter().all(|g| *g < 1.0)
            {
                s2_not_strict += 1;
            }
        }
    }
    let p = ModelParams::new(1.0, 1.0, 1.0, 2.0).unwrap();
    let q = |state, r, r_eps, phi| GrowthFactorQuery { r, r_eps, phi, params: p, state };
    // S3, p1 = 1/2, r_eps = 1, r = 0: 1/(1 + 0.5)
    let a = growth_factors(&q(LimitState::S3 { p1: 0.5 }, 0.0, 1.0, 0.7))[0];
    // S1, v* = 1, r_eps = 1, r = 1/4, phi = pi/2: 1/(1 + 2 + 0.5), 1/(1 + 1), 1/2
    let b = growth_factors(&q(LimitState::S1 { v_star: 1.0 }, 0.25, 1.0, PI / 2.0));
    // S2, u* = 1/2, r_eps = 2, r = 1/8, phi = pi: 1/(1 + 1/2), 1/(1 + 1 + 3), 1/2
    let c = growth_factors(&q(LimitState::S2 { u_star: 0.5 }, 0.125, 2.0, PI));
    let spot = [
        (a, 2.0 / 3.0),
        (b[0], 1.0 / 3.5),
        (b[1], 0.5),
        (b[2], 0.5),
        (c[0], 2.0 / 3.0),
        (c[1], 0.2),
        (c[2], 0.5),
    ];
    let spot_err = spot.iter().fold(0.0f64, |m, (g, w)| m.max((g - w).abs()));
    line(
        "growth factor soundness",
        bad == 0 && s2_not_strict == 0 && spot_err <= 1e-14,
        format!("30000 queries, {bad} outside (0,1], {s2_not_strict} S2 non-strict; spot-check error {spot_err:.1e}"),
    )
}

fn widths_line(name: &'static str, r: &Report) -> Line {
    let w: Vec<f64> = r.widths.iter().map(|x| x.1).collect();
    let ok = !r.solver_failed() && w.len() == 4 && w.windows(2).all(|p| p[1] < p[0]);
    line(name, ok, format!("widths {w:?} for eps 1e-2..1e-5"))
}

fn fig5_gate() -> Line {
    let r = run_preset("fig5", |s| s.run.t_final = 0.1);
    widths_line("interface sharpening t=0.1", &r)
}

fn fig5_full() -> Line {
    let r = run_preset("fig5", |_| {});
    widths_line("interface sharpening t=1", &r)
}

fn fig6() -> Line {
    let r = run_preset("fig6", |s| {
        if let Sweep::ImplicitComparison { taus, .. } = &mut s.sweep {
            *taus = vec![0.01, 0.005, 0.0025];
        }
    });
    let mut ok = !r.solver_failed() && r.tables.len() == 2;
    let mut detail = Vec::new();
    for t in &r.tables {
        let mut col = t.column(Norm::L1);
        col.sort_by(|a, b| b.0.total_cmp(&a.0));
        ok &= col.len() == 3 && col.windows(2).all(|p| p[1].1 < p[0].1);
        let vals: Vec<String> = col.iter().map(|(s, e)| format!("{s}:{e:.3e}")).collect();
        detail.push(format!("{} [{}]", t.label, vals.join(" ")));
    }
    line("fully implicit comparison trend", ok, detail.join("; "))
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    max_diff(a, b) / scale
}

fn oracles() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let kinds = [BoundaryKind::Dirichlet, BoundaryKind::Neumann];

    // diffusion off: pointwise closed forms
    let mut off = 0.0f64;
    for i in 0..40 {
        let (mut pr, s, tau) = random_instance(&mut rng, 1 + i % 2, kinds[i % 2], [1.0, 1e-2, 1e-4][i % 3], 12);
        pr.params.d1 = 0.0;
        pr.params.d2 = 0.0;
        let out = semi_implicit::step(&pr, &s, tau).unwrap();
        let (r, lam) = (tau / pr.params.epsilon, pr.params.lambda);
        for j in 0..s.len() {
            let p = (s.p[j] + r * s.u[j]) / (1.0 + r * (s.u[j] + s.v[j]));
            let u = pr.boundary.u.dirichlet_value(&pr.grid, j, out.t)
                .unwrap_or(s.u[j] / (1.0 + r * (s.v[j] + lam * (1.0 - p))));
            let v = pr.boundary.v.dirichlet_value(&pr.grid, j, out.t)
                .unwrap_or(s.v[j] / (1.0 + r * (u + lam * p)));
            off = off.max((out.p[j] - p).abs()).max((out.u[j] - u).abs()).max((out.v[j] - v).abs());
        }
    }

    // dense direct solves, grids up to 8 x 8 nodes
    let mut dense_err = [0.0f64; 2];
    for i in 0..60 {
        let dim = 1 + i % 2;
        let (mut pr, s, tau) = random_instance(&mut rng, dim, kinds[(i / 2) % 2], [1.0, 1e-2, 1e-4][i % 3], 7);
        pr.solver = SolverOptions { cg_tol: 1e-14, cg_max_iter: None };
        let got = semi_implicit::step(&pr, &s, tau).unwrap();
        let want = oracle_semi_step(&pr, &s, tau);
        let e = rel(&got.u, &want.u).max(rel(&got.v, &want.v)).max(rel(&got.p, &want.p));
        dense_err[dim - 1] = dense_err[dim - 1].max(e);
    }

    // stage systems: multiply-back and the dense block system
    let mut mb = 0.0f64;
    let mut stage_err = 0.0f64;
    for i in 0..40 {
        let (mut pr, y, tau) = random_instance(&mut rng, 1 + i % 2, kinds[(i / 2) % 2], [1.0, 1e-2, 1e-4][i % 3], 7);
        pr.solver = SolverOptions { cg_tol: 1e-14, cg_max_iter: None };
        let mut z = y.clone();
        for (f, g) in [(&mut z.u, &y.u), (&mut z.v, &y.v)] {
            for (a, b) in f.iter_mut().zip(g) {
                *a = 0.9 * b;
            }
        }
        let t_stage = y.t + gamma() * tau;
        let k = stage_solve(&pr, &y, &z, gamma(), tau, t_stage).unwrap();
        let res = stage_residual(&pr, &y, &z, gamma(), tau, &k);
        mb = mb.max(res / (stage_rhs_norm(&pr, &y, &z) + 1.0));
        let (ku, kv, kp) = oracle_stage(&pr, &y, &z, gamma(), tau, t_stage);
        stage_err = stage_err
            .max(rel(&k.k_u, &ku))
            .max(rel(&k.k_v, &kv))
            .max(rel(&k.k_p, &kp));
    }

    // the 2x2 hand system
    let hand = dense_solve(vec![vec![2.0, -1.0], vec![-1.0, 2.0]], vec![1.0, 1.0]);
    let hand_ok = (hand[0] - 1.0).abs() < 1e-15 && (hand[1] - 1.0).abs() < 1e-15;

    let ok = hand_ok
        && off <= 1e-15
        && dense_err[0] <= 1e-13
        && dense_err[1] <= 1e-11
        && mb <= 1e-10
        && stage_err <= 1e-9;
    line(
        "oracle equivalences",
        ok,
        format!(
            "diffusion-off {off:.1e}; dense 1D {:.1e} 2D {:.1e}; stage multiply-back {mb:.1e}, dense stage {stage_err:.1e}",
            dense_err[0], dense_err[1]
        ),
    )
}

fn main() {
    let criteria: [fn() -> Line; 10] = [
        table1, table2, sirk2_slope, bounds, l2_decay, growth, fig5_gate, fig5_full, fig6, oracles,
    ];
    let mut failed = Vec::new();
    for c in criteria {
        let l = c();
        println!("{} {}: {}", if l.passed { "PASS" } else { "FAIL" }, l.name, l.detail);
        if !l.passed {
            failed.push(l.name);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed: {failed:?}");
        std::process::exit(1);
    }
}
