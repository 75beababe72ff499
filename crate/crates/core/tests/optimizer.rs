//! Per-bin scheme search: load refinement against a dense scan, ranking
//! consistency and precision independence.

use netmimo::asymptotic::scheme_rate;
use netmimo::channel::{Pathloss, SystemParams};
use netmimo::geometry::{cell_representatives, ClusterTemplate, Layout};
use netmimo::optimizer::{
    best_load, load_ceiling, optimize_bin, sweep_bins, SchemeChoice, SchemeFamily, ScenarioTemplate, RANKING_DEPTH,
};

fn ring_template() -> ScenarioTemplate<f64> {
    ScenarioTemplate { layout: Layout::line(24, 20).unwrap(), pathloss: Pathloss::ring_default(), system: SystemParams::default() }
}

fn ring_family() -> SchemeFamily<f64> {
    SchemeFamily::grid(&[1, 2], &[ClusterTemplate::Single, ClusterTemplate::Pair], &[1, 2, 3], None)
}

#[test]
fn ceilings() {
    let pair = SchemeChoice::new(1, ClusterTemplate::Pair, 3, 2);
    assert_eq!(load_ceiling(&pair, 30.0, 40.0, None), 20.0);
    assert_eq!(load_ceiling(&pair, 30.0, 30.0, None), 15.0);
    assert_eq!(load_ceiling(&pair, 30.0, 40.0, Some(4.0)), 4.0);
    assert_eq!(load_ceiling(&SchemeChoice::baseline(), 30.0, 100.0, None), 30.0);
}

#[test]
fn refined_load_beats_dense_scan() {
    let tpl = ring_template();
    let reps = cell_representatives(&tpl.layout);
    for choice in [
        SchemeChoice::baseline(),
        SchemeChoice::new(1, ClusterTemplate::Single, 1, 1),
        SchemeChoice::new(2, ClusterTemplate::Pair, 2, 2),
        SchemeChoice::new(1, ClusterTemplate::Pair, 3, 3),
    ] {
        for rep in [reps[0], reps[6]] {
            let scn = tpl.scenario(&choice, rep).unwrap();
            let ceiling = load_ceiling(&choice, 30.0, 40.0, None);
            let cfg = choice.config(ceiling, 30.0);
            let (load, net, group) = best_load(&scn, &cfg, ceiling).unwrap();
            let at = scheme_rate(&scn, &cfg.with_load(load)).unwrap();
            assert!((at.net_rate - net).abs() < 1e-12 && (at.group_rate - group).abs() < 1e-12);
            let scan = (1..=20_000)
                .map(|k| ceiling * k as f64 / 20_000.0)
                .filter_map(|s| scheme_rate(&scn, &cfg.with_load(s)).ok())
                .map(|r| r.net_rate)
                .fold(0.0, f64::max);
            assert!(net >= scan * (1.0 - 1e-6), "{}: {net} < scan {scan}", choice.label());
        }
    }
}

#[test]
fn ranking_is_sorted_and_headed_by_best() {
    let tpl = ring_template();
    let family = ring_family();
    for (k, rep) in cell_representatives(&tpl.layout).into_iter().enumerate() {
        let opt = optimize_bin(&tpl, k, rep, &family, 30.0).unwrap();
        assert!(!opt.ranking.is_empty() && opt.ranking.len() <= RANKING_DEPTH);
        assert_eq!(opt.ranking[0], opt.best);
        assert!(opt.ranking.windows(2).all(|w| w[0].net_rate >= w[1].net_rate));
        // Exhaustive check: no family member does better.
        for choice in &family.choices {
            let single = optimize_bin(&tpl, k, rep, &SchemeFamily::singleton(*choice), 30.0).unwrap();
            assert!(single.r_star() <= opt.r_star() * (1.0 + 1e-12), "{} beats best", choice.label());
        }
    }
}

#[test]
fn sweep_includes_baseline_gain() {
    let tpl = ring_template();
    let reps = cell_representatives(&tpl.layout);
    let mut family = ring_family();
    family.choices.push(SchemeChoice::baseline());
    let sweep = sweep_bins(&tpl, &reps, &family, 30.0).unwrap();
    assert_eq!(sweep.len(), reps.len());
    for (k, s) in sweep.iter().enumerate() {
        assert_eq!(s.optimum.bin_id, k);
        assert!(s.gain_over_baseline() >= 1.0);
    }
}

#[test]
fn empty_family_and_bad_antennas_rejected() {
    let tpl = ring_template();
    let rep = cell_representatives(&tpl.layout)[0];
    assert!(optimize_bin(&tpl, 0, rep, &SchemeFamily::new(vec![]), 30.0).is_err());
    assert!(optimize_bin(&tpl, 0, rep, &ring_family(), 0.0).is_err());
}

#[test]
fn single_precision_picks_the_same_schemes() {
    let t64 = ring_template();
    let t32 = ScenarioTemplate {
        layout: Layout::<f32>::line(24, 20).unwrap(),
        pathloss: Pathloss::ring_default(),
        system: SystemParams::default(),
    };
    let f32_family = SchemeFamily::<f32>::grid(&[1, 2], &[ClusterTemplate::Single, ClusterTemplate::Pair], &[1, 2, 3], None);
    let reps64 = cell_representatives(&t64.layout);
    let reps32 = cell_representatives(&t32.layout);
    for k in [0, 5, 9] {
        let a = optimize_bin(&t64, k, reps64[k], &ring_family(), 30.0).unwrap();
        let b = optimize_bin(&t32, k, reps32[k], &f32_family, 30.0).unwrap();
        assert!((b.r_star() as f64 / a.r_star() - 1.0).abs() < 1e-3);
        if (a.ranking[0].net_rate - a.ranking[1].net_rate) > 1e-3 * a.r_star() {
            assert_eq!(a.best.choice, b.best.choice);
        }
    }
}
