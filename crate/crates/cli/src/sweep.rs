//! One-parameter sweeps of the analytic metrics.

use aloha_core::model::AnalysisMode;
use aloha_core::stability::feasibility_over_powers;
use aloha_core::{multi_class_metrics, single_class, NetworkConfig};
use serde_json::{json, Value};

use crate::output::{num, Report, Table};
use crate::{CliError, Context, Status};

const CLASS_FIELDS: [&str; 6] = ["lambda", "power", "mean_link_distance", "sir_threshold", "arrival_rate", "access_prob"];
const METRICS: [&str; 7] = ["stable", "feasible", "success_prob", "mean_delay", "excess_delay", "load", "channel_share"];

#[derive(Debug, Clone, PartialEq)]
pub enum ParamPath {
    Alpha,
    Class { index: usize, field: String },
}

impl ParamPath {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        let bad = || {
            CliError::Usage(format!(
                "bad parameter path `{s}`; expected `alpha` or `classes[i].<field>` with field one of {}",
                CLASS_FIELDS.join(", ")
            ))
        };
        if s == "alpha" {
            return Ok(ParamPath::Alpha);
        }
        let rest = s.strip_prefix("classes[").ok_or_else(bad)?;
        let (idx, field) = rest.split_once("].").ok_or_else(bad)?;
        let index = idx.parse().map_err(|_| bad())?;
        if !CLASS_FIELDS.contains(&field) {
            return Err(bad());
        }
        Ok(ParamPath::Class {
            index,
            field: field.to_string(),
        })
    }

    /// Returns a copy of `cfg` with the parameter set to `value`. Goes through
    /// the JSON form so the same field names as the config file apply.
    pub fn apply(&self, cfg: &NetworkConfig, value: f64) -> Result<NetworkConfig, CliError> {
        let mut v = serde_json::to_value(cfg).expect("config serializes");
        let slot = match self {
            ParamPath::Alpha => &mut v["alpha"],
            ParamPath::Class { index, field } => {
                let classes = v["classes"].as_array_mut().expect("classes array");
                let n = classes.len();
                let class = classes
                    .get_mut(*index)
                    .ok_or_else(|| CliError::Usage(format!("class index {index} out of range for {n} classes")))?;
                &mut class[field.as_str()]
            }
        };
        *slot = num(value);
        let text = v.to_string();
        NetworkConfig::from_json_str(&text).map_err(|e| CliError::Usage(format!("value {value}: {e}")))
    }
}

/// `a,b,c` or the inclusive linear grid `start:stop:count`.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let bad = |what: &str| CliError::Usage(format!("bad grid `{s}`: {what}"));
    let grid = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected start:stop:count"));
        }
        let start: f64 = parts[0].trim().parse().map_err(|_| bad("start is not a number"))?;
        let stop: f64 = parts[1].trim().parse().map_err(|_| bad("stop is not a number"))?;
        let count: usize = parts[2].trim().parse().map_err(|_| bad("count is not a whole number"))?;
        match count {
            0 => Vec::new(),
            1 => vec![start],
            _ => (0..count)
                .map(|i| {
                    let k = (count - 1) as f64;
                    (start * (k - i as f64) + stop * i as f64) / k
                })
                .collect(),
        }
    } else {
        s.split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|_| bad(&format!("`{x}` is not a number"))))
            .collect::<Result<_, _>>()?
    };
    if grid.is_empty() {
        return Err(bad("no values"));
    }
    if let Some(x) = grid.iter().find(|x| !x.is_finite()) {
        return Err(bad(&format!("{x} is not finite")));
    }
    Ok(grid)
}

struct Point {
    stable: bool,
    feasible: Option<bool>,
    success_prob: Vec<f64>,
    mean_delay: Vec<f64>,
    excess_delay: Vec<f64>,
    load: Vec<f64>,
    channel_share: Vec<f64>,
}

fn evaluate(cfg: &NetworkConfig, single: bool) -> Result<Point, CliError> {
    let empty = |stable, feasible| Point {
        stable,
        feasible,
        success_prob: Vec::new(),
        mean_delay: Vec::new(),
        excess_delay: Vec::new(),
        load: Vec::new(),
        channel_share: Vec::new(),
    };
    if single {
        cfg.validate(AnalysisMode::SingleClass)?;
        return Ok(match single_class(cfg, 0) {
            Ok(r) => {
                let c = &cfg.classes[0];
                Point {
                    stable: true,
                    feasible: None,
                    success_prob: vec![r.success_prob],
                    mean_delay: vec![r.mean_delay],
                    excess_delay: vec![r.mean_delay - 1.0],
                    load: vec![c.arrival_rate / (c.access_prob * r.success_prob)],
                    channel_share: Vec::new(),
                }
            }
            Err(aloha_core::Error::SingleClassUnstable { .. }) => empty(false, None),
            Err(e) => return Err(e.into()),
        });
    }
    cfg.validate(AnalysisMode::MultiClass)?;
    let feasible = Some(feasibility_over_powers(cfg));
    Ok(match multi_class_metrics(cfg) {
        Ok(m) => Point {
            stable: true,
            feasible,
            success_prob: m.success_prob,
            mean_delay: m.mean_delay,
            excess_delay: m.excess_delay,
            load: m.load,
            channel_share: m.channel_share,
        },
        Err(aloha_core::Error::Unstable { .. } | aloha_core::Error::ContentionSaturated { .. }) => empty(false, feasible),
        Err(e) => return Err(e.into()),
    })
}

fn per_class<'a>(p: &'a Point, metric: &str) -> &'a [f64] {
    match metric {
        "success_prob" => &p.success_prob,
        "mean_delay" => &p.mean_delay,
        "excess_delay" => &p.excess_delay,
        "load" => &p.load,
        "channel_share" => &p.channel_share,
        _ => unreachable!("checked against METRICS"),
    }
}

pub fn sweep_table(cfg: &NetworkConfig, param: &ParamPath, grid: &[f64], outputs: &[String]) -> Result<Table, CliError> {
    if outputs.is_empty() {
        return Err(CliError::Usage("--outputs needs at least one metric".into()));
    }
    if let Some(bad) = outputs.iter().find(|m| !METRICS.contains(&m.as_str())) {
        return Err(CliError::Usage(format!("unknown metric `{bad}`; expected one of {}", METRICS.join(", "))));
    }
    let n = cfg.num_classes();
    let single = n == 1 && cfg.classes[0].access_prob < 1.0;

    let mut header = vec!["value".to_string()];
    for m in outputs {
        match m.as_str() {
            "stable" | "feasible" => header.push(m.clone()),
            _ => header.extend((0..n).map(|i| format!("{m}_{i}"))),
        }
    }
    let mut table = Table::new(header);

    for &x in grid {
        let point_cfg = param.apply(cfg, x)?;
        let p = evaluate(&point_cfg, single)?;
        let mut row = vec![num(x)];
        for m in outputs {
            match m.as_str() {
                "stable" => row.push(json!(p.stable)),
                "feasible" => row.push(p.feasible.map_or(Value::Null, |f| json!(f))),
                _ => {
                    let vals = per_class(&p, m);
                    row.extend((0..n).map(|i| vals.get(i).map_or(Value::Null, |&v| num(v))));
                }
            }
        }
        table.push(row);
    }
    Ok(table)
}

pub fn run(ctx: &Context, param: &str, grid: &str, outputs: &[String]) -> Result<Status, CliError> {
    let cfg = ctx.load_config()?;
    let path = ParamPath::parse(param)?;
    let grid = parse_grid(grid)?;
    let table = sweep_table(&cfg, &path, &grid, outputs)?;
    let mut rep = Report::new("sweep", table);
    rep.fact("parameter", json!(param));
    ctx.output.emit(&rep)?;
    Ok(Status::Ok)
}
