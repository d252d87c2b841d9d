use std::fs;
use std::io::Write;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use rstein_core::mc::{tail_ratios, McConfig, Provenance};
use rstein_core::report::{format_float, Cell, Format, Table};
use rstein_core::subgraph::{CopyCatalog, PatternGraph, SubgraphBoundInputs, SubgraphSampler, BOUND_COLUMNS};
use rstein_core::tworuns::{indicator_tail_ratio, TwoRunsConfig};
use rstein_core::verify::{core_suite, lemma_suite, Fault, SuiteConfig, SuiteReport};
use rstein_core::{CoefficientSequence, GammaConstants, TwoRunsModel};
use serde::Serialize;

use crate::{Cli, Command, Common, FaultArg, OutputFormat, SubgraphArgs, TwoRunsArgs};

/// Marker error for input problems found after argument parsing.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

/// 3 for cap overruns, 2 for bad input, 1 for anything else.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return 2;
    }
    match err.downcast_ref::<rstein_core::Error>() {
        Some(e) if e.is_cap_exceeded() => 3,
        Some(rstein_core::Error::Io(_)) | None => {
            if err.downcast_ref::<std::io::Error>().is_some() {
                2
            } else {
                1
            }
        }
        Some(_) => 2,
    }
}

pub fn run(cli: &Cli) -> Result<ExitCode> {
    validate(&cli.common)?;
    match &cli.command {
        Command::VerifyCore => verify(&cli.common, true),
        Command::LemmasCheck => verify(&cli.common, false),
        Command::TworunsBound(args) => tworuns(&cli.common, args, false),
        Command::TworunsSimulate(args) => tworuns(&cli.common, args, true),
        Command::SubgraphBound(args) => subgraph_bound(&cli.common, args),
        Command::SubgraphSimulate(args) => subgraph_simulate(&cli.common, args),
    }
}

fn validate(c: &Common) -> Result<()> {
    for (name, v) in [("--big-o", c.big_o), ("--c-exp", c.c_exp), ("--c1", c.c1), ("--c2", c.c2), ("--zhang-c", c.zhang_c)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(usage(format!("{name} must be positive, got {v}")));
        }
    }
    if c.samples == 0 || c.cases == 0 || c.cap == 0 {
        return Err(usage("--samples, --cases and --cap must be positive"));
    }
    Ok(())
}

fn emit(common: &Common, table: &Table) -> Result<()> {
    let format = match common.format {
        OutputFormat::Csv => Format::Csv,
        OutputFormat::Json => Format::Json,
    };
    let text = table.emit(format)?;
    match &common.out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn mc_config(common: &Common) -> McConfig {
    McConfig::new(common.samples, common.seed).with_threads(common.threads)
}

fn add_provenance<C: Serialize>(table: &mut Table, common: &Common, config: &C) -> Result<()> {
    let prov = Provenance::new(common.seed, config)?;
    table.meta.insert("seed".into(), common.seed.to_string());
    table.meta.insert("config_hash".into(), prov.config_hash);
    table.meta.insert("version".into(), prov.version);
    Ok(())
}

fn verify(common: &Common, with_core: bool) -> Result<ExitCode> {
    let config = SuiteConfig {
        cases: common.cases,
        seed: common.seed,
        fault: match common.inject_fault {
            FaultArg::None => Fault::None,
            FaultArg::NegateOuInverse => Fault::NegateOuInverse,
        },
    };
    let lemmas = lemma_suite(&config)?;
    let report: SuiteReport = if with_core { core_suite(&config)?.merge(lemmas) } else { lemmas };
    let mut table = report.to_table(common.seed)?;
    add_provenance(&mut table, common, &config)?;
    if let Some(cx) = report.first_counterexample() {
        table.meta.insert("first_failure".into(), cx.property.clone());
    }
    emit(common, &table)?;
    match report.first_counterexample() {
        None => Ok(ExitCode::SUCCESS),
        Some(cx) => {
            eprintln!("{}", serde_json::to_string(cx)?);
            Ok(ExitCode::from(1))
        }
    }
}

fn default_z_grid(max: f64) -> Vec<f64> {
    (0..).map(|i| i as f64 * 0.25).take_while(|&z| z <= max + 1e-12).collect()
}

#[derive(Serialize)]
struct TwoRunsRun<'a> {
    command: &'static str,
    models: Vec<&'a CoefficientSequence>,
    z: &'a [f64],
    big_o: f64,
    c_exp: f64,
    samples: u64,
}

fn tworuns(common: &Common, args: &TwoRunsArgs, simulate: bool) -> Result<ExitCode> {
    let mut consts = GammaConstants::new(common.big_o, common.c_exp)?;
    let mut models = Vec::new();
    let mut indicator = Vec::new();
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg = TwoRunsConfig::from_json(&text)?;
        // flags override the file only when given explicitly
        if common.big_o == 1.0 && common.c_exp == 1.0 {
            consts = cfg.constants();
        }
        models.push(TwoRunsModel::new(cfg.coeffs)?);
        indicator.push(false);
    } else {
        if args.n.is_empty() {
            return Err(usage("--n needs at least one length"));
        }
        for &n in &args.n {
            models.push(TwoRunsModel::new(CoefficientSequence::indicator(n)?)?);
            indicator.push(true);
        }
    }

    let mut table = Table::new([
        "n", "z", "C_n", "var_g", "gamma_n", "bound_rhs", "ratio_hat", "ci_low", "ci_high", "admissible", "exact_ratio",
        "seed",
    ]);
    let mc = mc_config(common);
    for (model, &is_indicator) in models.iter().zip(&indicator) {
        let n = model.coeffs().len();
        let zs = if args.z.is_empty() {
            default_z_grid((n as f64).powf(0.1))
        } else {
            args.z.clone()
        };
        if zs.iter().any(|&z| !(z >= 0.0)) {
            return Err(usage("thresholds must be nonnegative"));
        }
        let range = model.admissible_range();
        let estimates = if simulate { Some(tail_ratios(&model.sampler(), &zs, &mc)?) } else { None };
        for (i, &z) in zs.iter().enumerate() {
            let est = estimates.as_ref().map(|e| &e[i]);
            let exact = if is_indicator { Cell::Float(indicator_tail_ratio(n, z)?) } else { Cell::Empty };
            table.push(vec![
                n.into(),
                z.into(),
                model.c_n().into(),
                model.var_g().into(),
                model.gamma_n(z, consts)?.into(),
                model.bound_rhs(z, consts)?.into(),
                est.and_then(|e| e.ratio_hat).map_or(Cell::Empty, Cell::Float),
                est.map_or(Cell::Empty, |e| Cell::Float(e.ci_low)),
                est.map_or(Cell::Empty, |e| Cell::Float(e.ci_high)),
                (z <= range).into(),
                exact,
                Cell::UInt(common.seed),
            ])?;
        }
        if !zs.iter().any(|&z| z <= range) {
            log::warn!("n = {n}: no threshold inside the admissible range [0, {range}]");
            let mut row = vec![Cell::Empty; table.columns().len()];
            row[0] = n.into();
            row[2] = model.c_n().into();
            row[3] = model.var_g().into();
            row[9] = false.into();
            row[11] = Cell::UInt(common.seed);
            table.push(row)?;
            table.meta.insert(format!("warning_n{n}"), format!("empty z-grid: admissible range is [0, {}]", format_float(range)));
        }
        table.meta.insert(format!("admissible_range_n{n}"), format_float(range));
    }
    table.meta.insert("big_o".into(), format!("{} (no known value; --big-o)", format_float(consts.big_o)));
    table.meta.insert("c_exp".into(), format!("{} (no known value; --c-exp)", format_float(consts.c_exp)));
    let run = TwoRunsRun {
        command: if simulate { "tworuns-simulate" } else { "tworuns-bound" },
        models: models.iter().map(|m| m.coeffs()).collect(),
        z: &args.z,
        big_o: consts.big_o,
        c_exp: consts.c_exp,
        samples: if simulate { common.samples } else { 0 },
    };
    add_provenance(&mut table, common, &run)?;
    emit(common, &table)?;
    Ok(ExitCode::SUCCESS)
}

fn parse_pattern(spec: &str) -> Result<PatternGraph> {
    let mut chars = spec.chars();
    let kind = chars.next();
    if let (Some(kind), Ok(k)) = (kind, chars.as_str().parse::<usize>()) {
        let g = match kind {
            'K' => PatternGraph::complete(k),
            'P' => PatternGraph::path(k),
            'C' => PatternGraph::cycle(k),
            _ => return Err(usage(format!("unknown pattern family {kind}"))),
        };
        return g.map_err(|e| usage(e.to_string()));
    }
    let text = fs::read_to_string(spec).with_context(|| format!("reading pattern file {spec}"))?;
    PatternGraph::from_json(&text).map_err(|e| usage(format!("{spec}: {e}")))
}

fn subgraph_inputs(common: &Common, args: &SubgraphArgs) -> Result<(PatternGraph, Vec<(CopyCatalog, SubgraphBoundInputs)>)> {
    let g = parse_pattern(&args.pattern)?;
    if args.p.is_empty() {
        bail!(usage("--p needs at least one value"));
    }
    let mut out = Vec::new();
    for &p in &args.p {
        if !(p > 0.0 && p < 1.0) {
            return Err(usage(format!("p must lie in (0, 1), got {p}")));
        }
        let cat = CopyCatalog::enumerate_with_cap(&g, args.n, p, common.cap as u128)?;
        if cat.is_empty() {
            return Err(usage(format!("K_{} contains no copy of {}", args.n, g.label())));
        }
        let inputs = SubgraphBoundInputs::from_catalog(&cat)?;
        if !inputs.certified() {
            log::warn!("n = {} < 4v² = {}: sigma lower bound not certified", args.n, 4 * g.vertices() * g.vertices());
        }
        out.push((cat, inputs));
    }
    Ok((g, out))
}

fn t_grid(args: &SubgraphArgs) -> Result<Vec<f64>> {
    let ts = if args.t.is_empty() { default_z_grid(2.0) } else { args.t.clone() };
    if ts.iter().any(|&t| !(t >= 0.0)) {
        return Err(usage("thresholds must be nonnegative"));
    }
    Ok(ts)
}

fn pattern_meta(table: &mut Table, inputs: &SubgraphBoundInputs, common: &Common) {
    for (k, v) in inputs.meta() {
        if k != "sigma2_lower_bound" {
            table.meta.insert(k.into(), v);
        }
    }
    if !inputs.certified() {
        table.meta.insert("certified".into(), "false: sigma lower bound not certified (n < 4v^2)".into());
    }
    table.meta.insert("zhang_c".into(), format!("{} (no known value; --zhang-c)", format_float(common.zhang_c)));
    table.meta.insert("c1".into(), format_float(common.c1));
    table.meta.insert("c2".into(), format_float(common.c2));
}

#[derive(Serialize)]
struct SubgraphRun<'a> {
    command: &'static str,
    pattern: String,
    n: usize,
    p: &'a [f64],
    t: &'a [f64],
    c1: f64,
    c2: f64,
    zhang_c: f64,
    samples: u64,
}

fn subgraph_bound(common: &Common, args: &SubgraphArgs) -> Result<ExitCode> {
    let ts = t_grid(args)?;
    let (g, instances) = subgraph_inputs(common, args)?;
    let mut columns: Vec<&str> = BOUND_COLUMNS.to_vec();
    columns.extend(["sigma2_lower_bound", "seed"]);
    let mut table = Table::new(columns);
    for (_, inputs) in &instances {
        for mut row in inputs.bound_rows(&ts, common.c1, common.c2, common.zhang_c)? {
            row.push(inputs.sigma2_lower_bound().into());
            row.push(Cell::UInt(common.seed));
            table.push(row)?;
        }
    }
    pattern_meta(&mut table, &instances[0].1, common);
    let run = SubgraphRun {
        command: "subgraph-bound",
        pattern: g.to_json()?,
        n: args.n,
        p: &args.p,
        t: &ts,
        c1: common.c1,
        c2: common.c2,
        zhang_c: common.zhang_c,
        samples: 0,
    };
    add_provenance(&mut table, common, &run)?;
    emit(common, &table)?;
    Ok(ExitCode::SUCCESS)
}

fn subgraph_simulate(common: &Common, args: &SubgraphArgs) -> Result<ExitCode> {
    let ts = t_grid(args)?;
    let (g, instances) = subgraph_inputs(common, args)?;
    let mut table = Table::new([
        "n", "p", "t", "theorem_rhs", "informative_flag", "ratio_hat", "ci_low", "ci_high", "abs_error", "hits",
        "degenerate", "theorem_holds", "psi_min", "sigma2", "d", "seed",
    ]);
    let mc = mc_config(common);
    for (cat, inputs) in &instances {
        let sampler = SubgraphSampler::new(cat)?;
        let estimates = tail_ratios(&sampler, &ts, &mc)?;
        for e in estimates {
            let th = inputs.theorem_bound(e.z)?;
            table.push(vec![
                args.n.into(),
                inputs.p.into(),
                e.z.into(),
                th.rhs.into(),
                th.informative().into(),
                e.ratio_hat.map_or(Cell::Empty, Cell::Float),
                e.ci_low.into(),
                e.ci_high.into(),
                e.abs_error().into(),
                e.hits.into(),
                e.degenerate.into(),
                (e.abs_error() <= th.rhs).into(),
                inputs.psi_min.into(),
                inputs.sigma2.into(),
                Cell::UInt(inputs.d_neighbors),
                Cell::UInt(common.seed),
            ])?;
        }
    }
    pattern_meta(&mut table, &instances[0].1, common);
    let run = SubgraphRun {
        command: "subgraph-simulate",
        pattern: g.to_json()?,
        n: args.n,
        p: &args.p,
        t: &ts,
        c1: common.c1,
        c2: common.c2,
        zhang_c: common.zhang_c,
        samples: common.samples,
    };
    add_provenance(&mut table, common, &run)?;
    emit(common, &table)?;
    Ok(ExitCode::SUCCESS)
}
