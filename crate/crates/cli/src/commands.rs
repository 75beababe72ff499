//! Subcommands. Each returns its CSV tables plus a few summary lines; the
//! binary writes the tables and prints the summary.

use netmimo::asymptotic::{scheme_rate, SchemeConfig};
use netmimo::channel::{Scenario, TrainingCoefficients};
use netmimo::geometry::{cell_representatives, Point};
use netmimo::montecarlo::{partial_trace_profile, round_load, Simulator};
use netmimo::optimizer::{
    best_massive_load, load_ceiling, optimize_bin, sweep_bins, SchemeChoice, SchemeFamily, ScenarioTemplate,
};
use netmimo::scheduler::{schedule, system_throughput, Utility};
use log::warn;
use rayon::prelude::*;

use crate::config::Experiment;
use crate::table::{num, Table};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    BinRates,
    OptimizeMap,
    ThroughputSweep,
    Validate,
    Schedule,
}

#[derive(Clone, Debug, Default)]
pub struct Report {
    pub tables: Vec<Table>,
    pub summary: Vec<String>,
}

pub fn run_command(cmd: Command, exp: &Experiment) -> Result<Report, CliError> {
    match cmd {
        Command::BinRates => bin_rates(exp),
        Command::OptimizeMap => optimize_map(exp),
        Command::ThroughputSweep => throughput_sweep(exp),
        Command::Validate => validate(exp),
        Command::Schedule => schedule_bins(exp),
    }
}

/// Distinct, reproducible seed per (scheme, bin, system size) cell.
fn cell_seed(seed: u64, scheme: usize, bin: usize, size: usize) -> u64 {
    let key = ((scheme as u64) << 40) ^ ((bin as u64) << 20) ^ size as u64;
    seed ^ key.wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

fn physical(exp: &Experiment, rep: Point<f64>) -> [String; 2] {
    let p = exp.template.layout.to_physical(rep);
    [num(p[0]), num(p[1])]
}

fn antenna_list(exp: &Experiment) -> Vec<f64> {
    if exp.antenna_sweep.is_empty() {
        vec![exp.antennas]
    } else {
        exp.antenna_sweep.clone()
    }
}

/// S* rounded so that S*N/m is an integer, kept under the scheme's ceiling.
pub fn simulation_load(load: f64, system_size: usize, multiplicity: usize, ceiling: f64) -> f64 {
    let unit = multiplicity as f64 / system_size as f64;
    let s = round_load(load, system_size, multiplicity);
    if s > ceiling * (1.0 + 1e-12) && s - unit >= unit {
        s - unit
    } else {
        s
    }
}

/// Simulator for one cell, or None (with a warning) when no ZF precoder
/// exists for the scheme at this bin and load.
fn simulator<'a>(scn: &'a Scenario<f64>, cfg: &SchemeConfig<f64>, n: usize) -> Result<Option<Simulator<'a, f64>>, CliError> {
    match Simulator::new(scn, cfg, n) {
        Ok(sim) => Ok(Some(sim)),
        Err(netmimo::Error::Infeasible(why)) => {
            warn!("skipping Monte Carlo: {why}");
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

/// R*(X_k) of every scheme at every bin, [scheme][bin].
pub fn per_scheme_r_star(
    template: &ScenarioTemplate<f64>,
    reps: &[Point<f64>],
    choices: &[SchemeChoice],
    antennas: f64,
    max_load: Option<f64>,
) -> Result<Vec<Vec<f64>>, CliError> {
    let cells: Vec<(usize, usize)> = (0..choices.len()).flat_map(|s| (0..reps.len()).map(move |k| (s, k))).collect();
    let flat: Vec<f64> = cells
        .par_iter()
        .map(|&(s, k)| {
            let family = SchemeFamily { choices: vec![choices[s]], max_load };
            Ok(optimize_bin(template, k, reps[k], &family, antennas)?.r_star())
        })
        .collect::<Result<_, netmimo::Error>>()?;
    Ok(flat.chunks(reps.len().max(1)).map(|c| c.to_vec()).take(choices.len()).collect())
}

/// Throughput in bit/s of PF scheduling over bins with peak rates `r_star`.
/// Bins where a fixed scheme is infeasible keep their 1/K share at rate 0.
pub fn pf_throughput(r_star: &[f64], bandwidth_hz: f64) -> Result<f64, CliError> {
    if r_star.iter().all(|r| *r > 0.0) {
        let plan = schedule(r_star, Utility::ProportionalFair)?;
        return Ok(system_throughput(&plan, bandwidth_hz));
    }
    Ok(r_star.iter().sum::<f64>() / r_star.len() as f64 * bandwidth_hz)
}

/// PF throughput of the single-cell matched filter with Q = 1 as M -> infinity,
/// with S re-optimized against the limiting rate at every bin.
pub fn baseline_asymptote(
    template: &ScenarioTemplate<f64>,
    reps: &[Point<f64>],
    bandwidth_hz: f64,
    max_load: Option<f64>,
) -> Result<f64, CliError> {
    let base = SchemeChoice::baseline();
    let ceiling = load_ceiling(&base, f64::INFINITY, template.system.coherence, max_load);
    let rates: Vec<f64> = reps
        .par_iter()
        .map(|&rep| {
            let scn = template.scenario(&base, rep)?;
            Ok(best_massive_load(&scn, &base.config(ceiling, f64::INFINITY), ceiling)?.1)
        })
        .collect::<Result<_, netmimo::Error>>()?;
    pf_throughput(&rates, bandwidth_hz)
}

fn bin_rates(exp: &Experiment) -> Result<Report, CliError> {
    let reps = cell_representatives(&exp.template.layout);
    let trials = exp.run.trials;
    let mut header = vec!["bin", "x", "y", "scheme", "load", "group_rate", "net_rate"];
    if trials > 0 {
        header.extend(["mc_system_size", "mc_load", "mc_cf_group_rate", "mc_group_rate", "mc_std_error", "mc_net_rate"]);
    }
    let mut table = Table::new("bin_rates", &header);
    let choices = &exp.family.choices;
    let cells: Vec<(usize, usize)> = (0..choices.len()).flat_map(|s| (0..reps.len()).map(move |k| (s, k))).collect();
    let optima = cells
        .par_iter()
        .map(|&(s, k)| {
            let family = SchemeFamily { choices: vec![choices[s]], max_load: exp.family.max_load };
            optimize_bin(&exp.template, k, reps[k], &family, exp.antennas)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let n = exp.run.system_sizes[0];
    let mut skipped = 0usize;
    for (&(s, k), opt) in cells.iter().zip(&optima) {
        let choice = &choices[s];
        let best = &opt.best;
        let [x, y] = physical(exp, reps[k]);
        let mut row = vec![
            k.to_string(),
            x,
            y,
            choice.label(),
            num(best.config.load),
            num(best.group_rate),
            num(best.net_rate),
        ];
        if trials > 0 {
            let mut mc_cells = None;
            if best.net_rate > 0.0 {
                let scn = exp.template.scenario(choice, reps[k])?;
                let ceiling = load_ceiling(choice, exp.antennas, exp.template.system.coherence, exp.family.max_load);
                let load = simulation_load(best.config.load, n, scn.multiplicity(), ceiling);
                let cfg = choice.config(load, exp.antennas);
                if let Some(sim) = simulator(&scn, &cfg, n)? {
                    let cf = scheme_rate(&scn, &cfg)?;
                    let mc = sim.estimate_rates(trials, cell_seed(exp.run.seed, s, k, n), false)?;
                    let overhead = cf.net_rate / cf.group_rate;
                    mc_cells = Some([
                        n.to_string(),
                        num(load),
                        num(cf.group_rate),
                        num(mc.group_rate),
                        num(mc.group_std_error),
                        num(mc.group_rate * overhead),
                    ]);
                }
            }
            match mc_cells {
                Some(c) => row.extend(c),
                None => {
                    skipped += 1;
                    row.extend(std::iter::repeat_n(String::new(), 6));
                }
            }
        }
        table.push(row);
    }
    let mut summary = vec![format!("bin-rates: {} schemes x {} bins", choices.len(), reps.len())];
    if skipped > 0 {
        summary.push(format!("{skipped} cells without Monte Carlo columns (infeasible scheme or no ZF precoder)"));
    }
    Ok(Report { tables: vec![table], summary })
}

fn optimize_map(exp: &Experiment) -> Result<Report, CliError> {
    let reps = cell_representatives(&exp.template.layout);
    let mut table = Table::new(
        "optimize_map",
        &[
            "antennas",
            "bin",
            "x",
            "y",
            "scheme",
            "frequency_reuse",
            "cluster_size",
            "zf_order",
            "pilot_reuse",
            "load",
            "group_rate",
            "net_rate",
            "baseline_net_rate",
            "gain",
        ],
    );
    let mut summary = Vec::new();
    for m in antenna_list(exp) {
        let sweep = sweep_bins(&exp.template, &reps, &exp.family, m)?;
        let mut gains = Vec::with_capacity(sweep.len());
        for s in &sweep {
            let best = &s.optimum.best;
            let [x, y] = physical(exp, s.optimum.representative);
            gains.push(s.gain_over_baseline());
            table.push(vec![
                num(m),
                s.optimum.bin_id.to_string(),
                x,
                y,
                best.choice.label(),
                best.choice.frequency_reuse.to_string(),
                best.choice.template.size().to_string(),
                best.choice.zf_order.to_string(),
                best.choice.pilot_reuse.to_string(),
                num(best.config.load),
                num(best.group_rate),
                num(best.net_rate),
                num(s.baseline.net_rate),
                num(s.gain_over_baseline()),
            ]);
        }
        let lo = gains.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = gains.iter().copied().fold(0.0, f64::max);
        summary.push(format!("M = {m}: gain over baseline {lo:.3} to {hi:.3}"));
    }
    Ok(Report { tables: vec![table], summary })
}

fn throughput_sweep(exp: &Experiment) -> Result<Report, CliError> {
    let reps = cell_representatives(&exp.template.layout);
    let bw = exp.bandwidth_hz;
    let cap = exp.family.max_load;
    let mut table = Table::new("throughput_sweep", &["antennas", "series", "throughput_bps"]);
    let asymptote = baseline_asymptote(&exp.template, &reps, bw, cap)?;
    let choices = &exp.family.choices;
    for m in antenna_list(exp) {
        let per_scheme = per_scheme_r_star(&exp.template, &reps, choices, m, cap)?;
        for (choice, rates) in choices.iter().zip(&per_scheme) {
            table.push(vec![num(m), choice.label(), num(pf_throughput(rates, bw)?)]);
        }
        if !choices.is_empty() {
            let best: Vec<f64> =
                (0..reps.len()).map(|k| per_scheme.iter().map(|r| r[k]).fold(0.0, f64::max)).collect();
            table.push(vec![num(m), "optimized".into(), num(pf_throughput(&best, bw)?)]);
        }
        let base = per_scheme_r_star(&exp.template, &reps, &[SchemeChoice::baseline()], m, cap)?;
        table.push(vec![num(m), "baseline".into(), num(pf_throughput(&base[0], bw)?)]);
        table.push(vec![num(m), "baseline_asymptote".into(), num(asymptote)]);
    }
    let summary = vec![format!("baseline asymptote {:.4e} bit/s", asymptote)];
    Ok(Report { tables: vec![table], summary })
}

fn schedule_bins(exp: &Experiment) -> Result<Report, CliError> {
    let reps = cell_representatives(&exp.template.layout);
    let sweep = sweep_bins(&exp.template, &reps, &exp.family, exp.antennas)?;
    let r_star: Vec<f64> = sweep.iter().map(|s| s.optimum.r_star()).collect();
    let plan = schedule(&r_star, exp.utility)?;
    let mut table =
        Table::new("schedule", &["bin", "x", "y", "scheme", "r_star", "share", "bin_rate", "throughput_bps"]);
    for (k, s) in sweep.iter().enumerate() {
        let [x, y] = physical(exp, reps[k]);
        table.push(vec![
            k.to_string(),
            x,
            y,
            s.optimum.best.choice.label(),
            num(r_star[k]),
            num(plan.shares[k]),
            num(plan.bin_rates[k]),
            num(plan.bin_rates[k] * exp.bandwidth_hz),
        ]);
    }
    let summary = vec![
        format!("utility {:?} = {}", exp.utility, plan.utility_value),
        format!("system throughput {:.6e} bit/s", system_throughput(&plan, exp.bandwidth_hz)),
    ];
    Ok(Report { tables: vec![table], summary })
}

/// Checks xi + sigma = g for one link to a few ulps.
pub fn check_mmse_identity(t: &TrainingCoefficients<f64>) -> Result<(), CliError> {
    let err = (t.xi + t.sigma - t.gain).abs();
    if err > 8.0 * f64::EPSILON * t.gain || t.xi < 0.0 || t.sigma < 0.0 {
        return Err(CliError::Numerical(format!(
            "MMSE identity violated: xi {} + sigma {} != gain {}",
            t.xi, t.sigma, t.gain
        )));
    }
    Ok(())
}

/// Checks the MMSE identity on every link of `scn` at loading `load`.
pub fn check_training_identities(scn: &Scenario<f64>, load: f64) -> Result<(), CliError> {
    let nb = scn.bs_count();
    for loc in 0..scn.multiplicity() {
        for src in 0..nb {
            for serve in 0..nb {
                for b in 0..scn.cluster_size() {
                    check_mmse_identity(&scn.link_coefficients(loc, src, serve, b, load))?;
                }
            }
        }
    }
    Ok(())
}

/// Trials at system size N. Per-trial rate variance falls roughly like 1/N
/// while the cost of a trial grows like N^3, so the budget shrinks with N.
pub fn trials_at_size(trials: usize, system_size: usize) -> usize {
    trials.div_ceil(system_size.max(1))
}

fn validate(exp: &Experiment) -> Result<Report, CliError> {
    let run = &exp.run;
    if run.trials == 0 {
        return Err(CliError::Config("validate needs run.trials > 0".into()));
    }
    let reps = cell_representatives(&exp.template.layout);
    let coherence = exp.template.system.coherence;
    let mut rates = Table::new(
        "validate",
        &[
            "scheme",
            "bin",
            "x",
            "y",
            "system_size",
            "trials",
            "load",
            "cf_group_rate",
            "mc_group_rate",
            "mc_std_error",
            "relative_error",
            "z_score",
            "pass",
        ],
    );
    let mut traces = Table::new(
        "partial_traces",
        &["scheme", "system_size", "realizations", "bs", "mean_partial_trace", "mean_max_deviation", "max_total_error"],
    );
    let (mut passed, mut total, mut skipped) = (0usize, 0usize, 0usize);
    for (s, choice) in exp.family.choices.iter().enumerate() {
        let ceiling = load_ceiling(choice, exp.antennas, coherence, exp.family.max_load);
        for (k, &rep) in reps.iter().enumerate() {
            let family = SchemeFamily { choices: vec![*choice], max_load: exp.family.max_load };
            let best = optimize_bin(&exp.template, k, rep, &family, exp.antennas)?.best;
            if !(best.net_rate > 0.0) {
                continue;
            }
            let scn = exp.template.scenario(choice, rep)?;
            for &n in &run.system_sizes {
                let load = simulation_load(best.config.load, n, scn.multiplicity(), ceiling);
                check_training_identities(&scn, load)?;
                let cfg = choice.config(load, exp.antennas);
                let Some(sim) = simulator(&scn, &cfg, n)? else {
                    skipped += 1;
                    continue;
                };
                let cf = scheme_rate(&scn, &cfg)?.group_rate;
                let mc = sim.estimate_rates(trials_at_size(run.trials, n), cell_seed(run.seed, s, k, n), false)?;
                let diff = mc.group_rate - cf;
                let ok = diff.abs() <= (run.relative_tolerance * cf).max(run.sigma_tolerance * mc.group_std_error);
                total += 1;
                passed += ok as usize;
                let [x, y] = physical(exp, rep);
                rates.push(vec![
                    choice.label(),
                    k.to_string(),
                    x,
                    y,
                    n.to_string(),
                    trials_at_size(run.trials, n).to_string(),
                    num(load),
                    num(cf),
                    num(mc.group_rate),
                    num(mc.group_std_error),
                    num(diff / cf),
                    num(if mc.group_std_error > 0.0 { diff / mc.group_std_error } else { 0.0 }),
                    ok.to_string(),
                ]);
            }
            if k == 0 && choice.template.size() > 1 && choice.zf_order > 0 {
                for &n in &run.system_sizes {
                    let load = simulation_load(best.config.load, n, scn.multiplicity(), ceiling);
                    let cfg = choice.config(load, exp.antennas);
                    if simulator(&scn, &cfg, n)?.is_none() {
                        continue;
                    }
                    for row in partial_trace_rows(&scn, &cfg, n, run.partial_trace_realizations, cell_seed(run.seed, s, k, n))? {
                        let mut r = vec![choice.label()];
                        r.extend(row);
                        traces.push(r);
                    }
                }
            }
        }
    }
    let mut summary = vec![format!("validate: {passed}/{total} closed-form vs Monte Carlo comparisons within tolerance")];
    if skipped > 0 {
        summary.push(format!("{skipped} cells skipped: no ZF precoder exists"));
    }
    Ok(Report { tables: vec![rates, traces], summary })
}

/// Mean per-BS partial trace of cluster 0's precoder, the mean over
/// realizations of max_b |trace_b - 1/C|, and the worst |sum_b trace_b - 1|.
pub fn partial_trace_stats(
    scn: &Scenario<f64>,
    cfg: &SchemeConfig<f64>,
    system_size: usize,
    realizations: usize,
    seed: u64,
) -> Result<(Vec<f64>, f64, f64), CliError> {
    let c = scn.cluster_size();
    let sim = Simulator::new(scn, cfg, system_size)?;
    let profiles: Vec<Vec<f64>> = (0..realizations as u64)
        .into_par_iter()
        .map(|t| Ok(partial_trace_profile(&sim.draw_cluster(seed, t, 0)?.1, c)))
        .collect::<Result<_, netmimo::Error>>()?;
    let r = realizations as f64;
    let mut mean = vec![0.0; c];
    let (mut deviation, mut total_err) = (0.0, 0.0f64);
    for p in &profiles {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v / r;
        }
        deviation += p.iter().map(|v| (v - 1.0 / c as f64).abs()).fold(0.0, f64::max) / r;
        total_err = total_err.max((p.iter().sum::<f64>() - 1.0).abs());
    }
    Ok((mean, deviation, total_err))
}

fn partial_trace_rows(
    scn: &Scenario<f64>,
    cfg: &SchemeConfig<f64>,
    n: usize,
    realizations: usize,
    seed: u64,
) -> Result<Vec<Vec<String>>, CliError> {
    let (mean, deviation, total_err) = partial_trace_stats(scn, cfg, n, realizations, seed)?;
    Ok(mean
        .iter()
        .enumerate()
        .map(|(b, m)| {
            vec![n.to_string(), realizations.to_string(), b.to_string(), num(*m), num(deviation), num(total_err)]
        })
        .collect())
}
