//! Acceptance suite. Each test prints one `PASS`/`FAIL` line for its criterion.
//!
//! Runs shared between criteria are computed once per process.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::OnceLock;

use kpplab_core::fronts::{decay_rate, minimal_speed, solve_profile};
use kpplab_core::levelsets::{average_speed, fit_growth_law, LevelSetObserver};
use kpplab_core::solver::{
    convergence_order, heat_kernel_error, run, uniform_logistic_error, ConvergenceProblem,
    SnapshotObserver,
};
use kpplab_core::theory::{
    band_membership, derive_comparison_params, entry_monotone_in_eps, flatness_report,
    refined_band, BoundKind, FlatnessObserver, SandwichObserver, SANDWICH_TOLERANCE,
};
use kpplab_core::{
    Family, GridKind, GridSpec, GrowthLaw, InitialProfile, LevelSetTrajectory, Nonlinearity,
    SolverConfig, TargetCurve, TimeStep,
};

const LEVELS: [f64; 3] = [0.25, 0.5, 0.75];

fn verdict(id: u32, pass: bool, detail: String) -> bool {
    // direct writes bypass the test harness capture, so passing criteria show up too
    let line = format!(
        "{} criterion {id}: {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
    pass
}

fn time(t: Option<f64>) -> String {
    t.map_or("never".into(), |t| format!("{t:.1}"))
}

fn logistic() -> Nonlinearity {
    Nonlinearity::logistic(1.0).unwrap()
}

fn profile(family: Family, params: &[(&str, f64)]) -> InitialProfile {
    let params: BTreeMap<String, f64> = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    InitialProfile::new(family, &params, 0.9, None, 2.0).unwrap()
}

fn solver(kind: GridKind, x_left: f64, x_right: f64, n: usize) -> SolverConfig {
    let mut cfg = SolverConfig::new(GridSpec {
        kind,
        x_left,
        x_right,
        n,
        stretch: 0.5,
        node_budget: 400_000,
    });
    cfg.tracked_levels = LEVELS.to_vec();
    cfg
}

struct Run {
    profile: InitialProfile,
    trajectories: Vec<LevelSetTrajectory>,
}

impl Run {
    fn level(&self, lambda: f64) -> &LevelSetTrajectory {
        self.trajectories
            .iter()
            .find(|t| t.lambda == lambda)
            .unwrap()
    }
}

fn simulate(profile: InitialProfile, cfg: &SolverConfig, t_end: f64) -> Run {
    let mut obs = LevelSetObserver::new(&LEVELS).unwrap();
    run(&profile, &logistic(), cfg, t_end, &mut [&mut obs])
        .unwrap()
        .into_result()
        .unwrap();
    Run {
        profile,
        trajectories: obs.trajectories,
    }
}

/// Algebraic alpha=2 run to t=25, with sandwich and flatness observers attached.
struct AlgebraicRun {
    run: Run,
    sandwich: SandwichObserver,
    flatness: FlatnessObserver,
}

fn algebraic() -> &'static AlgebraicRun {
    static RUN: OnceLock<AlgebraicRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let p = profile(Family::Algebraic, &[("alpha", 2.0)]);
        let nl = logistic();
        let upper = derive_comparison_params(&p, &nl, 0.4, BoundKind::Super).unwrap();
        let lower = derive_comparison_params(&p, &nl, 0.4, BoundKind::Sub).unwrap();
        let mut sandwich = SandwichObserver::new(p.clone(), upper, lower).unwrap();
        let mut flatness = FlatnessObserver::default();
        let mut levels = LevelSetObserver::new(&LEVELS).unwrap();
        let cfg = solver(GridKind::LogStretched, -10.0, 1000.0, 1600);
        run(
            &p,
            &nl,
            &cfg,
            25.0,
            &mut [&mut levels, &mut sandwich, &mut flatness],
        )
        .unwrap()
        .into_result()
        .unwrap();
        AlgebraicRun {
            run: Run {
                profile: p,
                trajectories: levels.trajectories,
            },
            sandwich,
            flatness,
        }
    })
}

fn stretched() -> &'static Run {
    static RUN: OnceLock<Run> = OnceLock::new();
    RUN.get_or_init(|| {
        let p = profile(Family::StretchedExp, &[("alpha", 0.5), ("beta", 1.0)]);
        simulate(
            p,
            &solver(GridKind::LogStretched, -10.0, 1000.0, 1600),
            60.0,
        )
    })
}

fn tlnt() -> &'static Run {
    static RUN: OnceLock<Run> = OnceLock::new();
    RUN.get_or_init(|| {
        let p = profile(Family::Tlnt, &[("alpha", 1.0)]);
        simulate(p, &solver(GridKind::Uniform, -10.0, 2500.0, 10_000), 200.0)
    })
}

fn log_power() -> &'static Run {
    static RUN: OnceLock<Run> = OnceLock::new();
    RUN.get_or_init(|| {
        let p = profile(Family::LogPower, &[("alpha", 1.0)]);
        let mut cfg = solver(GridKind::LogStretched, -10.0, 1e7, 2400);
        cfg.observation_interval = 0.1;
        simulate(p, &cfg, 3.5)
    })
}

#[test]
fn c01_exponential_tail_speed() {
    let p = profile(Family::Exponential, &[("alpha", 0.5)]);
    let r = simulate(p, &solver(GridKind::Uniform, -30.0, 200.0, 4600), 40.0);
    let c = average_speed(r.level(0.5), 30.0, 40.0).unwrap();
    let rel = (c / 2.5 - 1.0).abs();
    assert!(verdict(
        1,
        rel <= 0.02,
        format!("speed over [30,40] = {c:.4}, expected 2.5 (rel err {rel:.2e}, tol 2%)")
    ));
}

#[test]
fn c02_minimal_speed_regime() {
    let p = profile(Family::Exponential, &[("alpha", 2.0)]);
    let r = simulate(p, &solver(GridKind::Uniform, -30.0, 200.0, 4600), 50.0);
    let c = average_speed(r.level(0.5), 40.0, 50.0).unwrap();
    let rel = (c / 2.0 - 1.0).abs();
    assert!(verdict(
        2,
        rel <= 0.05,
        format!("speed over [40,50] = {c:.4}, expected 2 (rel err {rel:.2e}, tol 5%)")
    ));
}

#[test]
fn c03_algebraic_exponential_rate() {
    let f = fit_growth_law(
        algebraic().run.level(0.5),
        GrowthLaw::Exponential,
        [10.0, 25.0],
    )
    .unwrap();
    let rate = f.param("rate").unwrap();
    let rel = (rate / 0.5 - 1.0).abs();
    assert!(verdict(
        3,
        rel <= 0.05,
        format!("exponential fit rate over [10,25] = {rate:.4}, expected 0.5 (tol 5%)")
    ));
}

#[test]
fn c04_stretched_power_law() {
    let f = fit_growth_law(stretched().level(0.5), GrowthLaw::Power, [20.0, 60.0]).unwrap();
    let (k, a) = (f.param("exponent").unwrap(), f.param("prefactor").unwrap());
    let pass = (k / 2.0 - 1.0).abs() <= 0.05 && (a - 1.0).abs() <= 0.15;
    assert!(verdict(
        4,
        pass,
        format!("power fit over [20,60]: exponent {k:.4} (2 +/- 5%), prefactor {a:.4} (1 +/- 15%)")
    ));
}

#[test]
fn c05_tlnt_slope() {
    let f = fit_growth_law(tlnt().level(0.5), GrowthLaw::TLogT, [50.0, 200.0]).unwrap();
    let s = f.param("slope").unwrap();
    let rel = (s - 1.0).abs();
    assert!(verdict(
        5,
        rel <= 0.10,
        format!("t ln t fit slope over [50,200] = {s:.4}, expected 1 (tol 10%)")
    ));
}

#[test]
fn c06_log_power_band() {
    let r = log_power();
    let rep = band_membership(r.level(0.5), &r.profile, &logistic(), 0.3, 0.5, 0.5).unwrap();
    let x_end = r.level(0.5).samples.last().unwrap().x_min;
    assert!(verdict(
        6,
        rep.pass,
        format!(
            "band eps=0.3 on [0,3.5]: entry t={}, re-exits {}, inside from {}, x_0.5(3.5) = {x_end:.3e}",
            time(rep.first_entry),
            rep.re_exits,
            time(rep.final_entry)
        )
    ));
}

#[test]
fn c07_band_inclusion_all_families() {
    let nl = logistic();
    let runs: [(&str, &Run); 4] = [
        ("tlnt", tlnt()),
        ("stretched_exp", stretched()),
        ("algebraic", &algebraic().run),
        ("log_power", log_power()),
    ];
    let mut pass = true;
    let mut lines = Vec::new();
    for (name, r) in runs {
        for lambda in LEVELS {
            let reps: Vec<_> = [0.2, 0.4]
                .iter()
                .map(|&eps| {
                    band_membership(r.level(lambda), &r.profile, &nl, eps, lambda, lambda).unwrap()
                })
                .collect();
            let ok = reps[0].pass && entry_monotone_in_eps(&reps);
            pass &= ok;
            lines.push(format!(
                "{name} lambda={lambda}: T*(0.2)={} T*(0.4)={} re-exits {}, inside from {}{}",
                time(reps[0].first_entry),
                time(reps[1].first_entry),
                reps[0].re_exits,
                time(reps[0].final_entry),
                if ok { "" } else { " <-" }
            ));
        }
    }
    let _ = std::io::stdout().lock().write_all(
        lines
            .iter()
            .map(|l| format!("    {l}\n"))
            .collect::<String>()
            .as_bytes(),
    );
    assert!(verdict(
        7,
        pass,
        "band eps=0.2 entered with no re-exit, eps=0.4 entered no later".into()
    ));
}

#[test]
fn c08_refined_band() {
    let r = &algebraic().run;
    let nl = logistic();
    let reps: Vec<_> = [0.25, 0.5]
        .iter()
        .map(|&l| refined_band(r.level(l), &r.profile, &nl, [0.02, 50.0], [10.0, 25.0]).unwrap())
        .collect();
    let pass = reps.iter().all(|r| r.pass);
    let detail = reps
        .iter()
        .map(|r| {
            format!(
                "lambda={}: r in [{:.4}, {:.4}], min r/lambda {:.4} >= c {:.4}",
                r.lambda, r.r_min, r.r_max, r.min_ratio, r.c_lower
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    assert!(verdict(8, pass, detail));
}

#[test]
fn c09_sandwich() {
    let rep = algebraic().sandwich.report(SANDWICH_TOLERANCE);
    assert!(verdict(
        9,
        rep.pass,
        format!(
            "eps=0.4, xi1={:.4}, xi2={:.4}, B={:.2}: worst upper {:.2e}, worst lower {:.2e} (tol 1e-3)",
            rep.upper.xi1.unwrap(),
            rep.lower.xi2.unwrap(),
            rep.lower.b.unwrap(),
            rep.worst_upper.upper_margin,
            rep.worst_lower.lower_margin
        )
    ));
}

#[test]
fn c10_flatness() {
    let rep = flatness_report(&algebraic().flatness.records, 1e-6, 5.0, 20.0);
    let ratio = rep.decay_ratio.unwrap_or(f64::NAN);
    let pass = rep.envelope_holds() && ratio < 0.5;
    assert!(verdict(
        10,
        pass,
        format!(
            "M+ increase {:.2e}, M- decrease {:.2e} (slack 1e-6); sup|u_x/u|(20)/sup|u_x/u|(5) = {ratio:.4} (< 0.5)",
            rep.worst_m_plus_increase, rep.worst_m_minus_decrease
        )
    ));
}

#[test]
fn c11_target_curve_lower_bound() {
    let p = InitialProfile::from_target_curve(TargetCurve::Quadratic { a: 1.0 }, 1.0).unwrap();
    let r = simulate(
        p,
        &solver(GridKind::LogStretched, -10.0, 1000.0, 1600),
        60.0,
    );
    let worst = r
        .level(0.5)
        .window(10.0, 60.0)
        .map(|s| (s.t, s.x_min / (s.t * s.t / 4.0)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    assert!(verdict(
        11,
        worst.1 >= 1.0,
        format!(
            "min over t in [10,60] of min E_0.5(t) / (t^2/4) = {:.4} at t={}",
            worst.1, worst.0
        )
    ));
}

/// Paired runs from ordered data on one fixed grid with one fixed step.
fn comparison_gap() -> f64 {
    let xb = 10.0;
    let mk = |c: f64| {
        let params = BTreeMap::from([("alpha".to_string(), 2.0), ("C".to_string(), c)]);
        InitialProfile::new(Family::Algebraic, &params, 0.9, Some(xb), 2.0).unwrap()
    };
    let (a, b) = (mk(1.0), mk(1.5));
    let mut cfg = solver(GridKind::LogStretched, -10.0, 2000.0, 1600);
    cfg.expand = false;
    cfg.time_step = TimeStep::Fixed { dt: 0.01 };
    let nl = logistic();
    let mut runs = [SnapshotObserver::default(), SnapshotObserver::default()];
    for (p, obs) in [&a, &b].into_iter().zip(runs.iter_mut()) {
        run(p, &nl, &cfg, 10.0, &mut [obs])
            .unwrap()
            .into_result()
            .unwrap();
    }
    let data_gap = runs[0].snapshots[0]
        .u
        .iter()
        .zip(&runs[1].snapshots[0].u)
        .map(|(x, y)| x - y)
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(data_gap <= 0.0, "paired data not ordered: {data_gap}");
    runs[0]
        .snapshots
        .iter()
        .zip(&runs[1].snapshots)
        .flat_map(|(sa, sb)| sa.u.iter().zip(&sb.u).map(|(x, y)| x - y))
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn c12_solver_oracles() {
    let heat = heat_kernel_error(3200, 1e-3, 1.0).unwrap();
    let logi = uniform_logistic_error(&logistic(), 0.3, 0.01, 5.0).unwrap();
    let space = convergence_order(ConvergenceProblem::HeatSpace)
        .unwrap()
        .order;
    let time = convergence_order(ConvergenceProblem::StrangTime)
        .unwrap()
        .order;
    // uniform states make the splitting exact, so this is the RK4 order
    let reaction = convergence_order(ConvergenceProblem::ReactionTime)
        .unwrap()
        .order;
    let gap = comparison_gap();
    let pass = heat < 1e-5
        && logi < 1e-8
        && [space, time].iter().all(|o| (1.7..=2.3).contains(o))
        && gap <= 1e-8;
    assert!(verdict(
        12,
        pass,
        format!(
            "heat err {heat:.2e} (< 1e-5), logistic err {logi:.2e} (< 1e-8), orders space {space:.3} time {time:.3} (reaction-only {reaction:.3}), comparison max(uA-uB) {gap:.2e} (<= 1e-8)"
        )
    ));
}

#[test]
fn c13_traveling_front() {
    let nl = logistic();
    let f = solve_profile(2.5, &nl).unwrap();
    let a = decay_rate(2.5, &nl).unwrap();
    let rel = (f.alpha_c / a - 1.0).abs();
    let cs = minimal_speed(&nl);
    let pass = f.residual < 1e-6 && rel <= 0.02 && cs == 2.0;
    assert!(verdict(
        13,
        pass,
        format!(
            "c=2.5: residual {:.2e}, tail rate {:.4} vs {a} (rel {rel:.2e}); c* = {cs}",
            f.residual, f.alpha_c
        )
    ));
}
