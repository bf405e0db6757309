//! Commands built on the accuracy–SINR model: fitting, power control and
//! outage simulation.

use std::path::Path;

use serde::Serialize;
use serde_json::json;
use sfdma_core::abg_power::{
    abg_eval, abg_fit, outage_sim, power_control, rayleigh_trace, sinr_linear, AbgParams, FadingTrace, FitReport,
    FixedPower, OutageReport, Policy,
};
use sfdma_core::channel::{from_db, to_db};
use sfdma_core::io::{read_csv, write_csv, CsvTable};
use sfdma_core::nncore::SeededRng;
use sfdma_core::par::Exec;

use crate::manifest::Manifest;
use crate::CliError;

const MULTISTART: usize = 16;

fn f(v: f64) -> String {
    format!("{v}")
}

fn prepare_out(out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out)?;
    Ok(())
}

/// Points from `sinr_db`/`snr_db` and `accuracy_pct` columns; `user`
/// restricts sweep output to one receiver.
fn fit_points(table: &CsvTable, user: Option<usize>) -> Result<Vec<(f64, f64)>, CliError> {
    let db = table.floats("sinr_db").or_else(|_| table.floats("snr_db"))?;
    let acc = table.floats("accuracy_pct")?;
    let keep: Vec<bool> = match (user, table.column("user")) {
        (Some(u), Ok(_)) => table.floats("user")?.iter().map(|&v| v == u as f64).collect(),
        (Some(_), Err(e)) => return Err(e.into()),
        (None, _) => vec![true; db.len()],
    };
    Ok(db.iter().zip(&acc).zip(keep).filter(|(_, k)| *k).map(|((&s, &a), _)| (from_db(s), a)).collect())
}

pub fn fit(input: &Path, out: &Path, user: Option<usize>) -> Result<(), CliError> {
    prepare_out(out)?;
    let points = fit_points(&read_csv(input)?, user)?;
    let report: FitReport = abg_fit(&points, MULTISTART)?;
    let rows = points.iter().zip(&report.residuals).map(|(&(s, a), r)| vec![f(to_db(s)), f(a), f(a - r), f(*r)]);
    write_csv(&out.join("fit_residuals.csv"), &["sinr_db", "accuracy_pct", "model_pct", "residual"], rows)?;
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    std::fs::write(out.join("fit.json"), text)?;
    let mut m = Manifest::new("fit-abg");
    m.input_file("data", input)?;
    m.options = json!({ "user": user, "multistart": MULTISTART });
    m.outputs = vec!["fit.json".into(), "fit_residuals.csv".into()];
    m.write(out)
}

/// ABG parameters from a `fit-abg` report, else from the individual flags.
pub fn params(from: Option<&Path>, alpha: f64, beta: f64, gamma: f64, tau: f64) -> Result<AbgParams, CliError> {
    let p = match from {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let v: serde_json::Value = serde_json::from_str(&text)?;
            let params = v.get("params").cloned().unwrap_or(v);
            serde_json::from_value(params).map_err(|e| CliError::Config(format!("--abg {}: {e}", path.display())))?
        }
        None => AbgParams::new(alpha, beta, gamma, tau),
    };
    p.validate()?;
    Ok(p)
}

/// Trace CSV with columns `t, g_ii, interference_power, sigma2`.
fn read_trace(path: &Path) -> Result<(Vec<f64>, FadingTrace), CliError> {
    let t = read_csv(path)?;
    let trace = FadingTrace::new(t.floats("g_ii")?, t.floats("interference_power")?, t.floats("sigma2")?)?;
    Ok((t.floats("t")?, trace))
}

pub fn power(input: &Path, out: &Path, params: &AbgParams, eta: f64) -> Result<(), CliError> {
    prepare_out(out)?;
    let (times, trace) = read_trace(input)?;
    let mut rows = Vec::with_capacity(trace.len());
    for k in 0..trace.len() {
        let (g, i, s2) = (trace.own_gain[k], trace.interference[k], trace.noise_var[k]);
        let p = power_control(params, eta, g, &[(1.0, i)], s2)?;
        let sinr = sinr_linear(p, g, i + s2);
        rows.push(vec![f(times[k]), f(p), f(to_db(sinr)), f(abg_eval(params, sinr)?)]);
    }
    write_csv(&out.join("power.csv"), &["t", "power", "sinr_db", "accuracy_pct"], rows)?;
    let mut m = Manifest::new("power");
    m.input_file("trace", input)?;
    m.options = json!({ "eta": eta, "params": params });
    m.outputs = vec!["power.csv".into()];
    m.write(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyChoice {
    Fixed,
    Adaptive,
    Both,
}

/// Synthetic trace settings used when no trace CSV is given.
#[derive(Debug, Clone, Serialize)]
pub struct TraceSpec {
    pub trials: usize,
    pub diversity: usize,
    pub interference: Vec<f64>,
    pub noise: f64,
    pub seed: u64,
}

pub struct OutageArgs {
    pub eta: f64,
    pub policy: PolicyChoice,
    pub percentile: f64,
    pub budget: Option<f64>,
}

#[derive(Serialize)]
struct Summary {
    policy: &'static str,
    outage: f64,
    mean_power: f64,
    mean_power_dbm: f64,
}

pub fn outage(
    input: Option<&Path>,
    synth: &TraceSpec,
    out: &Path,
    params: &AbgParams,
    args: &OutageArgs,
) -> Result<(), CliError> {
    prepare_out(out)?;
    let mut m = Manifest::new("outage");
    let trace = match input {
        Some(path) => {
            m.input_file("trace", path)?;
            read_trace(path)?.1
        }
        None => {
            m.seed = Some(synth.seed);
            let rng = SeededRng::new(synth.seed);
            rayleigh_trace(synth.trials, synth.diversity, &synth.interference, synth.noise, &rng, Exec::default())?
        }
    };
    let mut policies = Vec::new();
    if args.policy != PolicyChoice::Adaptive {
        policies.push(Policy::Fixed(FixedPower::Percentile(args.percentile)));
    }
    if args.policy != PolicyChoice::Fixed {
        policies.push(Policy::Adaptive { budget: args.budget });
    }
    let mut summaries = Vec::new();
    for policy in policies {
        let r: OutageReport = outage_sim(params, args.eta, &trace, policy, Exec::default())?;
        let name = format!("outage_cdf_{}.csv", policy.name());
        let n = r.accuracy.len() as f64;
        let rows = r.accuracy.iter().enumerate().map(|(k, a)| vec![f(*a), f((k + 1) as f64 / n)]);
        write_csv(&out.join(&name), &["accuracy_pct", "cdf"], rows)?;
        m.outputs.push(name);
        summaries.push(Summary {
            policy: policy.name(),
            outage: r.outage,
            mean_power: r.mean_power,
            mean_power_dbm: r.mean_power_dbm,
        });
    }
    let mut text = serde_json::to_string_pretty(&json!({ "eta": args.eta, "params": params, "policies": summaries }))?;
    text.push('\n');
    std::fs::write(out.join("outage_summary.json"), text)?;
    m.outputs.push("outage_summary.json".into());
    m.options = json!({
        "eta": args.eta,
        "policy": args.policy,
        "percentile": args.percentile,
        "budget": args.budget,
        "params": params,
        "synthetic_trace": input.is_none().then_some(synth),
    });
    m.write(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(headers: &[&str], rows: &[&[&str]]) -> CsvTable {
        CsvTable {
            headers: headers.iter().map(|s| s.to_string()).collect(),
            rows: rows.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect(),
        }
    }

    #[test]
    fn sweep_columns_map_to_sinr() {
        let t = table(&["snr_db", "user", "accuracy_pct"], &[&["0", "0", "50"], &["0", "1", "40"], &["10", "0", "90"]]);
        assert_eq!(fit_points(&t, Some(0)).unwrap(), vec![(1.0, 50.0), (10.0, 90.0)]);
        assert_eq!(fit_points(&t, None).unwrap().len(), 3);
        let plain = table(&["sinr_db", "accuracy_pct"], &[&["20", "1"]]);
        assert_eq!(fit_points(&plain, None).unwrap(), vec![(100.0, 1.0)]);
        assert!(fit_points(&plain, Some(0)).is_err());
    }
}
