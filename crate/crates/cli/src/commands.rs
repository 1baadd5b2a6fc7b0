use std::path::PathBuf;

use aloha_core::analytic::channel_budget;
use aloha_core::simulate::{self, DistanceBins, FadingModel, SimulationMode, SimulationResult, SimulationSpec};
use aloha_core::stability::feasibility_verdict;
use aloha_core::{
    check_permutation_region, check_region, derive_constants, max_d2d_rate, multi_class_metrics, numeric_power_oracle,
    optimal_powers, physical_identity_lhs, share_identity_residuals, single_class, DelayWeights, NetworkConfig,
};
use serde_json::{json, Value};

use crate::output::{num, opt, write_file, Report, Table};
use crate::{CliError, Context, FadingArg, ModeArg, SimulateArgs, StabilityMethodArg, Status};

fn rel_error(x: f64, reference: f64) -> f64 {
    (x - reference).abs() / reference.abs()
}

pub fn analyze(ctx: &Context, saturated_others: Option<usize>) -> Result<Status, CliError> {
    let cfg = ctx.load_config()?;
    let mut table = Table::new([
        "class",
        "arrival_rate",
        "success_prob",
        "mean_delay",
        "load",
        "channel_share",
        "stability_bound",
    ]);
    // a lone class with p < 1 has no multi-class closed form, only the single-class one
    let single = saturated_others.or((cfg.num_classes() == 1 && cfg.classes[0].access_prob < 1.0).then_some(0));

    let report = if let Some(i) = single {
        let r = single_class(&cfg, i)?;
        let c = &cfg.classes[i];
        table.push(vec![
            json!(i),
            num(c.arrival_rate),
            num(r.success_prob),
            num(r.mean_delay),
            num(c.arrival_rate / (c.access_prob * r.success_prob)),
            Value::Null,
            num(r.stability_bound),
        ]);
        let mut rep = Report::new("analyze", table);
        rep.fact("analysis", json!("single-class, other classes saturated"));
        rep
    } else {
        let m = multi_class_metrics(&cfg)?;
        for i in 0..cfg.num_classes() {
            table.push(vec![
                json!(i),
                num(cfg.classes[i].arrival_rate),
                num(m.success_prob[i]),
                num(m.mean_delay[i]),
                num(m.load[i]),
                num(m.channel_share[i]),
                Value::Null,
            ]);
        }
        let residuals = share_identity_residuals(&m, &cfg);
        let idle = cfg.classes.iter().all(|c| c.arrival_rate == 0.0);
        let lhs = physical_identity_lhs(&cfg, &m);
        let budget = channel_budget(cfg.alpha);
        let mut rep = Report::new("analyze", table);
        rep.fact("analysis", json!("multi-class"));
        rep.fact("channel_share_sum", num(m.channel_share.iter().sum()));
        rep.fact("share_sum_residual", num(residuals.sum));
        rep.fact("share_pairwise_residual", num(residuals.pairwise));
        rep.fact("physical_identity_lhs", num(lhs));
        rep.fact("channel_budget", num(budget));
        // vacuous with no traffic: nothing uses the channel
        rep.fact("physical_identity_residual", if idle { Value::Null } else { num((lhs - budget).abs()) });
        rep
    };
    ctx.output.emit(&report)?;
    Ok(Status::Ok)
}

pub fn stability(ctx: &Context, method: StabilityMethodArg) -> Result<Status, CliError> {
    let cfg = ctx.load_config()?;
    let mut table = Table::new([
        "verdict",
        "method",
        "stable",
        "violated_class",
        "witness_permutation",
        "forms_agree",
        "stability_bound",
    ]);
    let single_bound = (cfg.num_classes() == 1)
        .then(|| aloha_core::analytic::single_class_bound(&cfg, 0))
        .transpose()?
        .map(|b| b.bound);

    let (stable, name, violated, witness, agree) =
        if method != StabilityMethodArg::Corollary && cfg.num_classes() == 1 && cfg.classes[0].access_prob < 1.0 {
            let stable = cfg.classes[0].arrival_rate < single_bound.unwrap_or(0.0);
            (stable, "single-class".to_string(), (!stable).then_some(0), None, true)
        } else {
            let v = match method {
                StabilityMethodArg::Region => check_region(&cfg)?,
                StabilityMethodArg::Permutation => check_permutation_region(&cfg)?,
                StabilityMethodArg::Corollary => feasibility_verdict(&cfg)?,
            };
            let name = serde_json::to_value(v.method).expect("enum").as_str().unwrap_or_default().to_string();
            (v.stable, name, v.violated_class, v.witness_permutation, v.forms_agree)
        };

    let verdict = match (stable, method) {
        (true, _) => "stable",
        (false, StabilityMethodArg::Corollary) => "infeasible",
        (false, _) => "unstable",
    };
    table.push(vec![
        json!(verdict),
        json!(name),
        json!(stable),
        violated.map_or(Value::Null, |i| json!(i)),
        witness.map_or(Value::Null, |w| json!(w)),
        json!(agree),
        opt(single_bound),
    ]);
    ctx.output.emit(&Report::new("stability", table))?;
    if let Some(i) = violated {
        eprintln!("class {i} violates its stability inequality");
    }
    Ok(match verdict {
        "stable" => Status::Ok,
        "infeasible" => Status::Infeasible,
        _ => Status::Unstable,
    })
}

pub fn optimize(ctx: &Context, weights: Option<Vec<f64>>, verify: bool) -> Result<Status, CliError> {
    let cfg = ctx.load_config()?;
    let n = cfg.num_classes();
    let weights = match weights {
        Some(w) => DelayWeights::new(w)?,
        None => DelayWeights::uniform(n),
    };
    let best = optimal_powers(&cfg, &weights)?;
    let tuned = best.apply(&cfg);
    let m = multi_class_metrics(&tuned)?;
    let objective: f64 = m.mean_delay.iter().zip(weights.as_slice()).map(|(d, c)| c * d).sum();

    let oracle = verify.then(|| numeric_power_oracle(&cfg, &weights)).transpose()?;
    let oracle_objective = oracle
        .as_ref()
        .map(|o| aloha_core::optimize::weighted_delay(&o.apply(&cfg), &weights))
        .transpose()?;

    let mut table = Table::new([
        "class",
        "weight",
        "power",
        "success_prob",
        "mean_delay",
        "oracle_power",
        "power_rel_deviation",
    ]);
    for i in 0..n {
        let o = oracle.as_ref().map(|o| o.powers[i]);
        table.push(vec![
            json!(i),
            num(weights.as_slice()[i]),
            num(best.powers[i]),
            num(m.success_prob[i]),
            num(m.mean_delay[i]),
            opt(o),
            opt(o.map(|o| rel_error(o, best.powers[i]))),
        ]);
    }
    let mut rep = Report::new("optimize", table);
    rep.fact("power_gauge", json!("last class transmits at 1"));
    rep.fact("objective", num(objective));
    if let Some(j) = oracle_objective {
        rep.fact("oracle_objective", num(j));
        rep.fact("objective_gap", num(objective - j));
    }
    ctx.output.emit(&rep)?;
    Ok(Status::Ok)
}

pub fn max_rate(ctx: &Context, d2d: usize, cell: usize, d1_max: f64, d2_max: f64) -> Result<Status, CliError> {
    let cfg = ctx.load_config()?;
    let env = max_d2d_rate(&cfg, d2d, cell, d1_max, d2_max)?;
    let at_envelope = aloha_core::optimize::envelope_config(&cfg, d2d, cell, &env, 1.0);
    let mut table = Table::new([
        "d2d",
        "cell",
        "d1_max",
        "d2_max",
        "cell_arrival_rate",
        "max_a1",
        "power_ratio",
        "d2d_power",
        "psi2_star",
    ]);
    table.push(vec![
        json!(d2d),
        json!(cell),
        num(d1_max),
        num(d2_max),
        num(cfg.classes[cell].arrival_rate),
        num(env.max_a1),
        num(env.power_ratio),
        num(at_envelope.classes[d2d].power),
        num(env.psi2_star),
    ]);
    let mut rep = Report::new("max-rate", table);
    rep.fact("note", json!("max_a1 is a supremum; both delay caps bind there, d2d_power is relative to a cellular power of 1"));
    ctx.output.emit(&rep)?;
    Ok(Status::Ok)
}

/// Closed-form success probability and delay per class for the regime the
/// spec simulates, where one exists.
pub fn analytic_reference(spec: &SimulationSpec) -> Vec<(Option<f64>, Option<f64>)> {
    let cfg = &spec.config;
    let n = cfg.num_classes();
    if spec.saturated {
        // every class always contends with its access probability
        return (0..n)
            .map(|i| {
                let ps = derive_constants(cfg, i).ok().map(|d| {
                    let c = &cfg.classes[i];
                    1.0 / (1.0 + d.phi[i] * (c.lambda * c.access_prob + d.zeta))
                });
                (ps, None)
            })
            .collect();
    }
    if n == 1 {
        return match single_class(cfg, 0) {
            Ok(r) => vec![(Some(r.success_prob), Some(r.mean_delay))],
            Err(_) => vec![(None, None)],
        };
    }
    match multi_class_metrics(cfg) {
        Ok(m) => (0..n).map(|i| (Some(m.success_prob[i]), Some(m.mean_delay[i]))).collect(),
        Err(_) => vec![(None, None); n],
    }
}

/// Whether class `n` shows a positive queue trend in every replication, with
/// the interval for the mean trend above zero.
pub fn positive_drift(result: &SimulationResult, n: usize) -> bool {
    let c = &result.classes[n];
    let all_up = !c.drift_per_replication.is_empty() && c.drift_per_replication.iter().all(|&d| d > 0.0);
    let lower = c.drift_estimate.and_then(|e| e.lower());
    all_up && lower.is_some_and(|l| l > 0.0)
}

pub fn build_spec(cfg: NetworkConfig, args: &SimulateArgs, seed: u64) -> Result<SimulationSpec, CliError> {
    let mut spec = SimulationSpec::new(cfg);
    spec.slots = args.slots;
    spec.target_links_per_class = args.links;
    spec.replications = args.replications;
    spec.warmup_fraction = args.warmup;
    spec.seed = seed;
    spec.saturated = args.saturated;
    spec.trajectory_points = args.trajectory_points;
    spec.max_queue = args.max_queue;
    spec.mode = match args.mode {
        ModeArg::Spatial => SimulationMode::Spatial,
        ModeArg::MeanField => SimulationMode::MeanField,
    };
    spec.fading = match args.fading {
        FadingArg::Marginalized => FadingModel::Marginalized,
        FadingArg::Sampled => FadingModel::Sampled,
    };
    if let Some(bins) = args.distance_bins {
        let class = spec.config.classes.get(args.bin_class).ok_or_else(|| {
            CliError::Usage(format!("--bin-class {} is out of range for {} classes", args.bin_class, spec.config.num_classes()))
        })?;
        if bins == 0 {
            return Err(CliError::Usage("--distance-bins must be at least 1".into()));
        }
        spec.distance_bins = Some(DistanceBins::central_quantiles(args.bin_class, class.mean_link_distance, 0.9, bins));
    }
    Ok(spec)
}

pub fn simulate(ctx: &Context, args: &SimulateArgs) -> Result<Status, CliError> {
    let cfg = ctx.load_config()?;
    let spec = build_spec(cfg, args, ctx.seed)?;
    let result = simulate::run(&spec)?;
    let dir = ctx.output.dir.clone().unwrap_or_else(|| PathBuf::from("."));

    let mut traj = Vec::new();
    simulate::write_trajectory_csv(&mut traj, &result).map_err(CliError::io("trajectory.csv"))?;
    write_file(&dir.join("trajectory.csv"), &String::from_utf8(traj).expect("utf-8"))?;
    write_file(&dir.join("summary.json"), &(simulate::summary_json(&result) + "\n"))?;

    if let Some(bins) = &result.distance_bins {
        let mut t = Table::new(["lower", "upper", "attempts", "successes", "success_rate", "wilson_low", "wilson_high"]);
        for b in bins {
            let w = b.wilson_interval();
            t.push(vec![
                num(b.lower),
                num(b.upper),
                json!(b.attempts),
                json!(b.successes),
                opt(b.success_rate()),
                opt(w.map(|w| w.0)),
                opt(w.map(|w| w.1)),
            ]);
        }
        write_file(&dir.join("distance_bins.csv"), &t.to_csv())?;
    }

    let mut header = vec![
        "class",
        "links",
        "attempts",
        "successes",
        "delivered",
        "success_prob",
        "success_ci_half_width",
        "mean_delay",
        "delay_ci_half_width",
        "drift",
        "drift_ci_half_width",
        "positive_drift",
    ];
    if args.compare_analytic {
        header.extend(["analytic_success_prob", "success_rel_error", "analytic_mean_delay", "delay_rel_error"]);
    }
    let reference = analytic_reference(&spec);
    let mut table = Table::new(header);
    let mut unstable = Vec::new();
    for (i, c) in result.classes.iter().enumerate() {
        let drifting = positive_drift(&result, i);
        if drifting {
            unstable.push(i);
        }
        let ps = c.success_prob_hat;
        let d = c.mean_delay_hat;
        let mut row = vec![
            json!(i),
            json!(result.links_per_class[i]),
            json!(c.attempts),
            json!(c.successes),
            json!(c.delivered),
            opt(ps.map(|e| e.mean)),
            opt(ps.and_then(|e| e.ci_half_width)),
            opt(d.map(|e| e.mean)),
            opt(d.and_then(|e| e.ci_half_width)),
            opt(c.drift_estimate.map(|e| e.mean)),
            opt(c.drift_estimate.and_then(|e| e.ci_half_width)),
            json!(drifting),
        ];
        if args.compare_analytic {
            let (aps, ad) = reference[i];
            row.extend([
                opt(aps),
                opt(aps.zip(ps).map(|(a, e)| rel_error(e.mean, a))),
                opt(ad),
                opt(ad.zip(d).map(|(a, e)| rel_error(e.mean, a))),
            ]);
        }
        table.push(row);
    }

    let mut rep = Report::new("classes", table);
    rep.fact("mode", serde_json::to_value(result.mode).expect("enum"));
    rep.fact("replications", json!(result.replications));
    rep.fact("confidence_available", json!(result.confidence_available));
    rep.fact("unvalidated_regime", json!(result.unvalidated_regime));
    if result.classes.iter().any(|c| c.attempts == 0) {
        rep.fact("no_data", json!("some classes never transmitted; their estimates are empty"));
    }
    ctx.output.emit(&rep)?;

    if unstable.is_empty() {
        Ok(Status::Ok)
    } else {
        for i in unstable {
            eprintln!("class {i}: queues grow in every replication; the network looks unstable");
        }
        Ok(Status::Unstable)
    }
}
