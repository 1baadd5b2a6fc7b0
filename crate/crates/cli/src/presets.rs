//! Fixed experiment grids: delay against arrival rate for one class, the
//! weighted-delay power allocation of two classes against the weight and
//! against the second arrival rate, and the D2D rate envelope.

use std::path::PathBuf;

use aloha_core::optimize::{cell_arrival_for_share, envelope_config};
use aloha_core::simulate::{self, SimulationSpec};
use aloha_core::{max_d2d_rate, multi_class_metrics, optimal_powers, single_class, DelayWeights, NetworkConfig, TrafficClass};
use clap::{Args, ValueEnum};
use serde_json::json;

use crate::output::{num, opt, write_file, Format, Output, Report, Table};
use crate::{CliError, Context, Status};

/// Path-loss exponent used by every preset. Delays depend on it only through
/// the contention constants, which the presets fix directly; power ratios do
/// depend on it.
const ALPHA: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PresetName {
    /// One class: delay against arrival rate for φλ = 0.5, 1, 2, with simulated points.
    Fig1Delay,
    /// Two classes, a = 0.7 and φλ = 0.15 each: optimal delays and power ratio against the weight c2.
    Fig2Weights,
    /// Two classes, a1 = 0.7: optimal delays and power ratio against a2 for a few weights c2.
    Fig3Arrival,
    /// Maximum D2D arrival rate against its delay cap, per cellular channel share.
    Fig4Envelope,
}

impl PresetName {
    fn file_stem(self) -> &'static str {
        match self {
            PresetName::Fig1Delay => "fig1-delay",
            PresetName::Fig2Weights => "fig2-weights",
            PresetName::Fig3Arrival => "fig3-arrival",
            PresetName::Fig4Envelope => "fig4-envelope",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct PresetArgs {
    #[arg(value_enum)]
    pub name: PresetName,
    /// Also write a gnuplot script next to the CSV data.
    #[arg(long)]
    pub gnuplot: bool,
    /// Skip the simulated points of fig1-delay.
    #[arg(long)]
    pub no_sim: bool,
    #[arg(long, default_value_t = 50_000)]
    pub sim_slots: u64,
    #[arg(long, default_value_t = 5)]
    pub sim_replications: usize,
    #[arg(long, default_value_t = 400)]
    pub sim_links: usize,
}

fn one_class(phi_lambda: f64, a: f64) -> NetworkConfig {
    NetworkConfig::new(ALPHA, vec![TrafficClass::with_contention(ALPHA, phi_lambda, 1.0, 1.0, a)]).expect("valid preset")
}

fn two_class(phi_lambda: f64, a1: f64, a2: f64) -> NetworkConfig {
    let class = |a| TrafficClass::with_contention(ALPHA, phi_lambda, 1.0, 1.0, a);
    NetworkConfig::new(ALPHA, vec![class(a1), class(a2)]).expect("valid preset")
}

fn linspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    let k = (count - 1) as f64;
    (0..count).map(|i| (start * (k - i as f64) + stop * i as f64) / k).collect()
}

const FIG1_PHI_LAMBDA: [f64; 3] = [0.5, 1.0, 2.0];
const FIG1_SIM_FRACTIONS: [f64; 4] = [0.2, 0.4, 0.6, 0.8];

fn fig1_curves() -> Result<Table, CliError> {
    let mut t = Table::new(["phi_lambda", "arrival_rate", "fraction_of_bound", "mean_delay"]);
    for pl in FIG1_PHI_LAMBDA {
        let bound = 1.0 / (1.0 + pl);
        for k in 0..=95 {
            let frac = k as f64 / 100.0;
            let a = frac * bound;
            let r = single_class(&one_class(pl, a), 0)?;
            t.push(vec![num(pl), num(a), num(frac), num(r.mean_delay)]);
        }
    }
    Ok(t)
}

fn fig1_simulated(args: &PresetArgs, seed: u64) -> Result<Table, CliError> {
    let mut t = Table::new([
        "phi_lambda",
        "arrival_rate",
        "fraction_of_bound",
        "analytic_delay",
        "simulated_delay",
        "ci_half_width",
        "rel_error",
        "within_tolerance",
    ]);
    let mut point = 0u64;
    for pl in FIG1_PHI_LAMBDA {
        let bound = 1.0 / (1.0 + pl);
        for frac in FIG1_SIM_FRACTIONS {
            let cfg = one_class(pl, frac * bound);
            let analytic = single_class(&cfg, 0)?.mean_delay;
            let mut spec = SimulationSpec::new(cfg);
            spec.slots = args.sim_slots;
            spec.replications = args.sim_replications;
            spec.target_links_per_class = args.sim_links;
            spec.seed = seed.wrapping_add(point);
            point += 1;
            eprintln!("simulating phi_lambda={pl} at {frac} of the bound");
            let est = simulate::run(&spec)?.classes[0].mean_delay_hat;
            let rel = est.map(|e| (e.mean - analytic).abs() / analytic);
            let ok = est.map(|e| e.contains(analytic) || rel.unwrap_or(f64::INFINITY) <= 0.05);
            t.push(vec![
                num(pl),
                num(frac * bound),
                num(frac),
                num(analytic),
                opt(est.map(|e| e.mean)),
                opt(est.and_then(|e| e.ci_half_width)),
                opt(rel),
                ok.map_or(serde_json::Value::Null, |b| json!(b)),
            ]);
        }
    }
    Ok(t)
}

fn allocation_row(cfg: &NetworkConfig, c2: f64) -> Result<(f64, f64, f64, f64), CliError> {
    let w = DelayWeights::new(vec![1.0, c2])?;
    let best = optimal_powers(cfg, &w)?;
    let m = multi_class_metrics(&best.apply(cfg))?;
    let ratio = best.powers[0] / best.powers[1];
    Ok((ratio, m.mean_delay[0], m.mean_delay[1], m.mean_delay[0] + c2 * m.mean_delay[1]))
}

fn fig2_table() -> Result<Table, CliError> {
    let mut t = Table::new(["c1", "c2", "p1_over_p2", "delay_1", "delay_2", "objective"]);
    let cfg = two_class(0.15, 0.7, 0.7);
    for c2 in linspace(0.1, 1.0, 37) {
        let (ratio, d1, d2, j) = allocation_row(&cfg, c2)?;
        t.push(vec![num(1.0), num(c2), num(ratio), num(d1), num(d2), num(j)]);
    }
    Ok(t)
}

/// Weight grid for the a2 sweep. A reconstruction: only c1 = 1 is fixed.
const FIG3_C2: [f64; 3] = [0.1, 0.5, 1.0];

fn fig3_table() -> Result<Table, CliError> {
    let mut t = Table::new(["c2_grid", "c1", "c2", "a1", "a2", "p1_over_p2", "delay_1", "delay_2"]);
    for c2 in FIG3_C2 {
        // feasibility needs a2 < 0.8125 with a1 = 0.7 and φλ = 0.15
        for a2 in linspace(0.025, 0.8, 32) {
            let cfg = two_class(0.15, 0.7, a2);
            let (ratio, d1, d2, _) = allocation_row(&cfg, c2)?;
            t.push(vec![
                json!("reconstructed"),
                num(1.0),
                num(c2),
                num(0.7),
                num(a2),
                num(ratio),
                num(d1),
                num(d2),
            ]);
        }
    }
    Ok(t)
}

const FIG4_PSI2: [f64; 3] = [0.25, 0.5, 0.75];
const FIG4_D2_MAX: f64 = 3.0;

fn fig4_table() -> Result<Table, CliError> {
    let mut t = Table::new([
        "psi2",
        "d1_max",
        "d2_max",
        "cell_arrival_rate",
        "max_a1",
        "power_ratio",
        "p1_over_p2",
    ]);
    for psi2 in FIG4_PSI2 {
        let a2 = cell_arrival_for_share(1.0, psi2, FIG4_D2_MAX);
        let cfg = two_class(1.0, 0.0, a2);
        for d1 in linspace(1.5, 10.0, 35) {
            let env = max_d2d_rate(&cfg, 0, 1, d1, FIG4_D2_MAX)?;
            let at = envelope_config(&cfg, 0, 1, &env, 1.0);
            t.push(vec![
                num(psi2),
                num(d1),
                num(FIG4_D2_MAX),
                num(a2),
                num(env.max_a1),
                num(env.power_ratio),
                num(at.classes[0].power / at.classes[1].power),
            ]);
        }
    }
    Ok(t)
}

fn gnuplot_script(name: PresetName, sim: bool) -> String {
    let head = "set datafile separator ','\nset key autotitle columnhead\nset grid\n";
    let body = match name {
        PresetName::Fig1Delay => {
            let mut s = String::from(
                "set xlabel 'arrival rate a'\nset ylabel 'mean delay [slots]'\nset logscale y\n\
                 plot for [pl in '0.5 1 2'] 'fig1-delay.csv' using 2:(($1 == pl + 0) ? $4 : 1/0) \
                 with lines title 'phi*lambda = '.pl",
            );
            if sim {
                s.push_str(", \\\n     'fig1-delay-sim.csv' using 2:5 with points pt 2 title 'simulation'");
            }
            s.push('\n');
            s
        }
        PresetName::Fig2Weights => "set multiplot layout 1,2\nset xlabel 'c2'\n\
             set ylabel 'delay [slots]'\n\
             plot 'fig2-weights.csv' using 2:4 with lines dt 2 title 'D1', '' using 2:5 with lines title 'D2'\n\
             set ylabel 'P1/P2'\nplot 'fig2-weights.csv' using 2:3 with lines title 'P1/P2'\nunset multiplot\n"
            .to_string(),
        PresetName::Fig3Arrival => "# c2 values per curve are a reconstructed grid\n\
             set multiplot layout 1,2\nset xlabel 'a2'\nset ylabel 'delay [slots]'\n\
             plot for [c in '0.1 0.5 1'] 'fig3-arrival.csv' using 5:(($3 == c + 0) ? $7 : 1/0) with lines dt 2 title 'D1, c2 = '.c, \\\n\
             \x20    for [c in '0.1 0.5 1'] '' using 5:(($3 == c + 0) ? $8 : 1/0) with lines title 'D2, c2 = '.c\n\
             set ylabel 'P1/P2'\n\
             plot for [c in '0.1 0.5 1'] 'fig3-arrival.csv' using 5:(($3 == c + 0) ? $6 : 1/0) with lines title 'c2 = '.c\n\
             unset multiplot\n"
            .to_string(),
        PresetName::Fig4Envelope => "set multiplot layout 1,2\nset xlabel 'D1* [slots]'\nset ylabel 'max a1'\n\
             plot for [s in '0.25 0.5 0.75'] 'fig4-envelope.csv' using 2:(($1 == s + 0) ? $5 : 1/0) with lines title 'Psi2 = '.s\n\
             set ylabel 'P1/P2'\n\
             plot for [s in '0.25 0.5 0.75'] 'fig4-envelope.csv' using 2:(($1 == s + 0) ? $7 : 1/0) with lines title 'Psi2 = '.s\n\
             unset multiplot\n"
            .to_string(),
    };
    format!("{head}{body}")
}

pub fn run(ctx: &Context, args: &PresetArgs) -> Result<Status, CliError> {
    let dir = ctx.output.dir.clone().unwrap_or_else(|| PathBuf::from("."));
    let out = Output {
        format: ctx.output.format,
        dir: Some(dir.clone()),
    };
    let stem = args.name.file_stem();
    let main = match args.name {
        PresetName::Fig1Delay => fig1_curves()?,
        PresetName::Fig2Weights => fig2_table()?,
        PresetName::Fig3Arrival => fig3_table()?,
        PresetName::Fig4Envelope => fig4_table()?,
    };
    let mut rep = Report::new(stem, main);
    rep.fact("alpha", num(ALPHA));
    if args.name == PresetName::Fig3Arrival {
        rep.fact("note", json!("the c2 grid {0.1, 0.5, 1} is a reconstruction; only c1 = 1 is fixed"));
    }
    out.emit(&rep)?;

    let sim = args.name == PresetName::Fig1Delay && !args.no_sim;
    if sim {
        let t = fig1_simulated(args, ctx.seed)?;
        let mut r = Report::new("fig1-delay-sim", t);
        r.fact("slots", json!(args.sim_slots));
        r.fact("replications", json!(args.sim_replications));
        r.fact("links", json!(args.sim_links));
        out.emit(&r)?;
    }
    if args.gnuplot {
        if ctx.output.format != Format::Csv {
            eprintln!("note: the gnuplot script reads the CSV files; rerun with --format csv to produce them");
        }
        write_file(&dir.join(format!("{stem}.gp")), &gnuplot_script(args.name, sim))?;
    }
    Ok(Status::Ok)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_weights_give_unit_ratio() {
        let t = fig2_table().unwrap();
        let last = t.rows.last().unwrap();
        assert_eq!(last[1].as_f64(), Some(1.0));
        assert!((last[2].as_f64().unwrap() - 1.0).abs() < 1e-12);
        assert!((last[3].as_f64().unwrap() - 10.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn envelope_shrinks_with_cellular_share() {
        let t = fig4_table().unwrap();
        let at = |psi: f64, d1: f64| {
            t.rows
                .iter()
                .find(|r| r[0].as_f64() == Some(psi) && (r[1].as_f64().unwrap() - d1).abs() < 1e-9)
                .unwrap()[4]
                .as_f64()
                .unwrap()
        };
        assert!(at(0.25, 3.0) > at(0.5, 3.0) && at(0.5, 3.0) > at(0.75, 3.0));
        assert!(at(0.5, 10.0) > at(0.5, 1.5));
    }

    #[test]
    fn fig3_grid_stays_feasible() {
        assert_eq!(fig3_table().unwrap().rows.len(), 3 * 32);
    }
}
