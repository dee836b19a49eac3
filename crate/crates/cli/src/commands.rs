use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use stablecf::exact::{forward_params, posterior_params, posterior_transformed, ForwardOptions, SkewWeighting};
use stablecf::flow::{
    build_observation_model, ingest_flow_params, load_topology, report, report_params, synth_planetlab_surrogate,
    write_flow_params, write_topology, FlowReport, ObservationPartition,
};
use stablecf::format::{sig17, sig6};
use stablecf::tree::csp_run_rooted;
use stablecf::{
    check_convergence_conditions, convolution_oracle, jacobi_run, load_model, pdf_from_cf, save_model,
    slicing_oracle_2var, Error, JacobiOptions, LinearStableModel, OracleReport, Result, ShiftUpdate, Side,
    StableParams,
};

use crate::args::{Cli, Command, Format, Method, ShiftRule, Weighting};

pub fn run(cli: &Cli) -> Result<()> {
    let c = &cli.common;
    match &cli.command {
        Command::Forward { skew_weighting } => {
            let skew = match skew_weighting {
                Weighting::ScalePower => SkewWeighting::ScalePower,
                Weighting::PlainScale => SkewWeighting::PlainScale,
            };
            let model = forward_params(&model(cli)?, ForwardOptions { skew })?;
            let text = match c.format {
                Some(Format::Csv) => params_csv(model.labels(), model.params()),
                _ => model.to_json_string() + "\n",
            };
            emit(cli, &text)
        }
        Command::Posterior => {
            let model = model(cli)?;
            let result = posterior_params(&model)?;
            emit_params(cli, &model, &result.x_given_y, &result.solver_stats)
        }
        Command::Jacobi {
            trace,
            damping,
            shift_update,
        } => {
            let model = model(cli)?;
            let defaults = JacobiOptions::default();
            let opts = JacobiOptions {
                tol: c.tol.unwrap_or(defaults.tol),
                max_iter: c.max_iter.unwrap_or(defaults.max_iter),
                damping: *damping,
                shift_update: match shift_update {
                    ShiftRule::Consistent => ShiftUpdate::Consistent,
                    ShiftRule::Printed => ShiftUpdate::Printed,
                },
                ..defaults
            };
            let outcome = jacobi_run(&model, &opts);
            if let Some(path) = trace {
                match &outcome {
                    Ok(r) => write_file(path, &r.trace.to_csv())?,
                    Err(Error::NotConverged { trace: t, .. }) => write_file(path, &t.to_csv())?,
                    Err(_) => {}
                }
            }
            let result = outcome?;
            let stats = json!({
                "iterations": result.trace.final_iterations,
                "residual": result.trace.residual_inf().last(),
                "converged": result.trace.converged,
                "entry_visits_per_sweep": result.trace.entry_visits_per_sweep,
            });
            emit_params(cli, &model, &result.x_given_y, &stats)
        }
        Command::Tree { root } => {
            let model = model(cli)?;
            let result = csp_run_rooted(&model, *root)?;
            let stats = json!({ "root": root, "messages": result.messages.len() });
            emit_params(cli, &model, &result.x_given_y, &stats)
        }
        Command::Check => {
            let report = check_convergence_conditions(&model(cli)?)?;
            let text = match c.format {
                Some(Format::Json) => to_json(&report),
                Some(Format::Csv) => format!(
                    "rho_r,rho_abs_r,rho_abs_r_alpha,condition1_holds,condition2_holds,normalized\n{},{},{},{},{},{}\n",
                    sig17(report.rho_r),
                    sig17(report.rho_abs_r),
                    sig17(report.rho_abs_r_alpha),
                    report.condition1_holds,
                    report.condition2_holds,
                    report.normalized
                ),
                None => {
                    let holds = |b: bool| if b { "holds" } else { "violated" };
                    format!(
                        "rho(R)          {}\nrho(|R|)        {}\nrho(|R|^alpha)  {}\nrho(|R|^alpha) < 1: {}\nrho(R) < 1:         {}\n{}\n",
                        sig6(report.rho_r),
                        sig6(report.rho_abs_r),
                        sig6(report.rho_abs_r_alpha),
                        holds(report.condition1_holds),
                        holds(report.condition2_holds),
                        if report.normalized { "A was rescaled to a unit diagonal" } else { "A already has a unit diagonal" }
                    )
                }
            };
            emit(cli, &text)
        }
        Command::Pdf {
            alpha,
            beta,
            gamma,
            delta,
            range,
            n,
        } => {
            let [lo, hi] = range[..] else {
                return Err(Error::InvalidArgument("--range needs MIN and MAX".into()));
            };
            let p = StableParams::new(*alpha, *beta, *gamma, *delta)?;
            let grid = pdf_from_cf(&p, lo, hi, *n)?;
            let text = match c.format {
                Some(Format::Json) => to_json(&grid),
                _ => grid.to_csv(),
            };
            emit(cli, &text)
        }
        Command::Oracle { p1, p2 } => {
            let report = match (&c.model, p1, p2) {
                (Some(_), None, None) => {
                    let model = model(cli)?;
                    if model.side() != Side::X || model.len() != 2 {
                        return Err(Error::Validation(
                            "the slicing oracle needs a 2-variable model with x-side parameters".into(),
                        ));
                    }
                    let x = [model.params()[0], model.params()[1]];
                    slicing_oracle_2var(model.alpha(), model.matrix(), &x)?
                }
                (None, Some(p1), Some(p2)) => {
                    convolution_oracle(&StableParams::from_csv_row(p1)?, &StableParams::from_csv_row(p2)?)?
                }
                _ => {
                    return Err(Error::InvalidArgument(
                        "oracle needs either --model or both --p1 and --p2".into(),
                    ))
                }
            };
            emit(cli, &oracle_text(&report, c.format))
        }
        Command::Synth { n, rho } => {
            let dir = c
                .out
                .as_deref()
                .ok_or_else(|| Error::InvalidArgument("synth needs --out <directory>".into()))?;
            let s = synth_planetlab_surrogate(*n, *rho, c.seed.unwrap_or(1))?;
            let model = build_observation_model(&s.records, &s.topology, &s.partition)?;
            fs::create_dir_all(dir)?;
            write_file(&dir.join("flows.csv"), &write_flow_params(&s.records))?;
            write_file(&dir.join("topology.csv"), &write_topology(&s.topology))?;
            write_file(&dir.join("truth.csv"), &write_flow_params(&s.hidden_truth))?;
            save_model(&model, dir.join("model.json"))?;
            for name in ["flows.csv", "topology.csv", "truth.csv", "model.json"] {
                println!("{}", dir.join(name).display());
            }
            Ok(())
        }
        Command::FlowReport {
            flows,
            topology,
            method,
        } => {
            let records = ingest_flow_params(flows)?;
            let edges = load_topology(topology)?;
            let partition = ObservationPartition::from_records(&records, &edges)?;
            let model = build_observation_model(&records, &edges, &partition)?;
            let report = flow_report(cli, &model, *method)?;
            let text = match c.format {
                None => report.to_tsv(),
                Some(Format::Json) => report.to_json() + "\n",
                Some(Format::Csv) => {
                    return Err(Error::InvalidArgument(
                        "flow-report writes TSV by default or JSON with --format json".into(),
                    ))
                }
            };
            emit(cli, &text)
        }
    }
}

fn flow_report(cli: &Cli, model: &LinearStableModel, method: Method) -> Result<FlowReport> {
    match method {
        Method::Exact => {
            let estimates = posterior_transformed(model.alpha(), model.matrix(), model.params())?;
            report(model.labels(), &estimates, model.alpha())
        }
        Method::Jacobi => {
            let defaults = JacobiOptions::default();
            let opts = JacobiOptions {
                tol: cli.common.tol.unwrap_or(defaults.tol),
                max_iter: cli.common.max_iter.unwrap_or(defaults.max_iter),
                ..defaults
            };
            let result = jacobi_run(model, &opts)?;
            log::info!("converged after {} sweeps", result.trace.final_iterations);
            report_params(model.labels(), &result.x_given_y)
        }
    }
}

fn model(cli: &Cli) -> Result<LinearStableModel> {
    let path = cli
        .common
        .model
        .as_deref()
        .ok_or_else(|| Error::InvalidArgument("this command needs --model <file>".into()))?;
    load_model(path)
}

fn emit(cli: &Cli, text: &str) -> Result<()> {
    match &cli.common.out {
        Some(path) => write_file(path, text),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

fn to_json(value: &impl Serialize) -> String {
    serde_json::to_string_pretty(value).expect("serializing plain data cannot fail") + "\n"
}

fn params_csv(labels: &[String], params: &[StableParams]) -> String {
    let mut out = String::from("label,alpha,beta,gamma,delta\n");
    for (label, p) in labels.iter().zip(params) {
        out.push_str(&format!("{label},{}\n", p.to_csv_row()));
    }
    out
}

fn emit_params(cli: &Cli, model: &LinearStableModel, params: &[StableParams], stats: &impl Serialize) -> Result<()> {
    let text = match cli.common.format {
        Some(Format::Csv) => params_csv(model.labels(), params),
        _ => {
            let rows: Vec<[f64; 3]> = params.iter().map(|p| [p.beta, p.gamma, p.delta]).collect();
            let stats: Value = serde_json::to_value(stats).expect("serializing plain data cannot fail");
            to_json(&json!({
                "alpha": model.alpha(),
                "labels": model.labels(),
                "side": "x",
                "params": rows,
                "stats": stats,
            }))
        }
    };
    emit(cli, &text)
}

fn oracle_text(report: &OracleReport, format: Option<Format>) -> String {
    match format {
        Some(Format::Json) => report.to_json() + "\n",
        Some(Format::Csv) => format!(
            "max_abs_err,argmax,grid_spec\n{},{},\"{}\"\n",
            sig17(report.max_abs_err),
            sig17(report.argmax),
            report.grid_spec
        ),
        None => format!(
            "max abs error {} at t = {} over {}\n",
            sig6(report.max_abs_err),
            sig6(report.argmax),
            report.grid_spec
        ),
    }
}
