use std::collections::BTreeMap;

use kpplab_core::levelsets::LevelSetObserver;
use kpplab_core::solver::{run, RunRecord};
use kpplab_core::{
    Family, GridKind, GridSpec, InitialProfile, LevelSetTrajectory, Nonlinearity, SolverConfig,
};

const LEVELS: [f64; 3] = [0.25, 0.5, 0.75];

fn algebraic_run(margin: f64, t_end: f64) -> (RunRecord, Vec<LevelSetTrajectory>) {
    let params = BTreeMap::from([("alpha".to_string(), 2.0)]);
    let p = InitialProfile::new(Family::Algebraic, &params, 0.9, None, 2.0).unwrap();
    let nl = Nonlinearity::logistic(1.0).unwrap();
    let mut cfg = SolverConfig::new(GridSpec {
        kind: GridKind::LogStretched,
        x_left: -10.0,
        x_right: 100.0,
        n: 800,
        stretch: 0.5,
        node_budget: 200_000,
    });
    cfg.tracked_levels = LEVELS.to_vec();
    cfg.expansion_margin = margin;
    let mut obs = LevelSetObserver::new(&LEVELS).unwrap();
    let rec = run(&p, &nl, &cfg, t_end, &mut [&mut obs])
        .unwrap()
        .into_result()
        .unwrap();
    (rec, obs.trajectories)
}

#[test]
fn algebraic_run_expands_and_keeps_invariants() {
    let (rec, trajs) = algebraic_run(0.2, 20.0);
    assert_eq!(rec.observations.len(), 41);
    let exps = &rec.state.stats.expansions;
    assert!(exps.len() >= 4, "{} expansions", exps.len());
    assert!(exps
        .windows(2)
        .all(|w| w[1].x_right_after > w[0].x_right_after));
    // the domain always extends past the tracked levels
    for tr in &trajs {
        assert!(tr.samples.iter().all(|s| !s.empty));
    }
    let x_end = trajs[1].samples.last().unwrap().x_min;
    assert!(rec.state.grid.x_right() > x_end / 0.8);
}

#[test]
fn plateau_rises_and_far_field_stays_small() {
    let (rec, _) = algebraic_run(0.2, 20.0);
    let obs = &rec.observations;
    assert!(obs.windows(2).all(|w| w[1].u_left >= w[0].u_left - 1e-12));
    assert!(obs.last().unwrap().u_left > 1.0 - 1e-6);
    assert!(obs.iter().all(|o| o.u_right < LEVELS[0]));
}

#[test]
fn tracked_positions_insensitive_to_expansion_margin() {
    let (_, a) = algebraic_run(0.2, 15.0);
    let (_, b) = algebraic_run(0.4, 15.0);
    let mut worst: f64 = 0.0;
    for (ta, tb) in a.iter().zip(&b) {
        for (sa, sb) in ta
            .samples
            .iter()
            .zip(&tb.samples)
            .filter(|(s, _)| s.t >= 1.0)
        {
            worst = worst.max((sa.x_min / sb.x_min - 1.0).abs());
        }
    }
    assert!(worst < 1e-3, "relative position change {worst:.2e}");
}
