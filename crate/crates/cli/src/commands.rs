use std::fmt::Write as _;
use std::path::Path;

use aoi_mech::eval::write_csv;
use aoi_mech::sim::rate_form;
use aoi_mech::{
    build_quantized, closed_forms, loss_bound, run_sweep, verify, BenchmarkMechanism,
    CompleteInfoPricing, Experiment, Mechanism, MultiSourceMechanism, NaiveMechanism, Setting,
    SingleSourceMechanism, SourceProfile,
};
use serde_json::{Map, Value};

use crate::config::{sha256_hex, LoadedConfig, RunConfig};
use crate::error::CliError;
use crate::output::{command_line, emit, jnum, jnums, join, json_document, num, Metadata};
use crate::{
    Baseline, BaselineArgs, ClosedFormsArgs, Command, Common, ExperimentArgs, MechanismArgs,
    MechanismKind, MechanismMode, QuantizeArgs, SettingKind, SimulateArgs, VerifyArgs,
};

const QUANTIZER_NOTE: &str = "cells anchored at c_low, width delta, last cell clamped to c_high";

pub fn run(cmd: Command, args: &[String]) -> Result<(), CliError> {
    let line = command_line(args);
    match cmd {
        Command::Mechanism(a) => mechanism(a, line),
        Command::Quantize(a) => quantize(a, line),
        Command::Baseline(a) => baseline(a, line),
        Command::Verify(a) => verify_cmd(a, line),
        Command::Simulate(a) => simulate(a, line),
        Command::Experiment(a) => experiment(a, line),
        Command::ClosedForms(a) => closed_forms_cmd(a, line),
    }
}

fn load(common: &Common) -> Result<LoadedConfig, CliError> {
    LoadedConfig::load(common.config.as_deref())
}

fn out_path<'a>(common: &'a Common, cfg: &'a RunConfig) -> Option<&'a Path> {
    common.out.as_deref().or(cfg.out.as_deref())
}

fn delta_of(flag: Option<f64>, cfg: &RunConfig) -> Result<f64, CliError> {
    let d = flag.or(cfg.delta_q).ok_or_else(|| {
        CliError::Validation("a quantization step is needed: pass --delta or set delta_q".into())
    })?;
    if d.is_finite() && d > 0.0 {
        Ok(d)
    } else {
        Err(CliError::Validation(format!(
            "delta must be positive and finite, got {d}"
        )))
    }
}

fn optimal(cfg: &RunConfig, profile: SourceProfile) -> Result<Box<dyn Mechanism>, CliError> {
    Ok(if profile.len() == 1 {
        Box::new(SingleSourceMechanism::from_profile(
            profile,
            cfg.aoi.clone(),
        )?)
    } else {
        Box::new(MultiSourceMechanism::new(profile, cfg.aoi.clone()))
    })
}

fn build(
    kind: MechanismKind,
    cfg: &RunConfig,
    delta: Option<f64>,
) -> Result<Box<dyn Mechanism>, CliError> {
    let profile = cfg.profile()?;
    Ok(match kind {
        MechanismKind::Optimal => optimal(cfg, profile)?,
        MechanismKind::Quantized => {
            let d = delta_of(delta, cfg)?;
            Box::new(build_quantized(optimal(cfg, profile)?.as_ref(), d)?)
        }
        MechanismKind::Benchmark => Box::new(BenchmarkMechanism::new(profile, cfg.aoi.clone())),
        MechanismKind::Complete => Box::new(CompleteInfoPricing::new(profile, cfg.aoi.clone())),
        MechanismKind::Naive => {
            if profile.len() != 1 {
                return Err(CliError::Validation(
                    "the naive mechanism is defined for a single source".into(),
                ));
            }
            let s = &profile.sources()[0];
            Box::new(NaiveMechanism::new(
                s.dist.clone(),
                cfg.aoi.clone(),
                s.f_max,
            )?)
        }
    })
}

/// `p = h/f` and `x = 1/f`, both infinite without trade.
fn price_and_interarrival(f: f64, h: f64) -> (f64, f64) {
    if f > 0.0 {
        (h / f, 1.0 / f)
    } else {
        (f64::INFINITY, f64::INFINITY)
    }
}

fn mechanism(a: MechanismArgs, line: String) -> Result<(), CliError> {
    let loaded = load(&a.common)?;
    let cfg = &loaded.config;
    let profile = cfg.profile()?;
    let meta = Metadata::new(line, loaded.sha256.clone(), cfg.seed);
    let out = out_path(&a.common, cfg);
    match a.mode {
        MechanismMode::Single => {
            if profile.len() != 1 {
                return Err(CliError::Validation(format!(
                    "`mechanism single` needs exactly one source, the configuration has {}",
                    profile.len()
                )));
            }
            let (lo, hi) = profile.dist(0).support();
            let grid = match &a.costs {
                Some(c) => {
                    let mut g = c.clone();
                    for &x in &g {
                        profile.check_reports(&[x])?;
                    }
                    g.sort_by(f64::total_cmp);
                    g
                }
                None => {
                    let n = a.grid.or(cfg.grid).unwrap_or(200);
                    if n < 2 {
                        return Err(CliError::Validation(
                            "--grid needs at least two points".into(),
                        ));
                    }
                    aoi_mech::mechanism::linspace(lo, hi, n - 1)
                }
            };
            let mech = SingleSourceMechanism::from_profile(profile, cfg.aoi.clone())?;
            let schedule = mech.schedule_along(0, &[lo], &grid)?;
            let mut s = meta.comment_block();
            s.push_str("c,f,h,p,x\n");
            for (&c, &(f, h)) in grid.iter().zip(&schedule) {
                let (p, x) = price_and_interarrival(f, h);
                let _ = writeln!(s, "{},{},{},{},{}", num(c), num(f), num(h), num(p), num(x));
            }
            emit(out, &s)
        }
        MechanismMode::Multi => {
            let costs = cfg.realized_costs(&profile, a.costs.as_deref())?;
            let mech = MultiSourceMechanism::new(profile, cfg.aoi.clone());
            let alloc = mech.allocation(&costs)?;
            let h = mech.payment_rates(&costs)?;
            let phi = mech.virtual_costs(&costs)?;
            let sources: Vec<Value> = (0..costs.len())
                .map(|i| {
                    let (p, _) = price_and_interarrival(alloc.rates[i], h[i]);
                    let mut m = Map::new();
                    m.insert("source".into(), i.into());
                    m.insert("cost".into(), jnum(costs[i]));
                    m.insert("virtual_cost".into(), jnum(phi[i]));
                    m.insert("f".into(), jnum(alloc.rates[i]));
                    m.insert("pi".into(), jnum(alloc.pi[i]));
                    m.insert("h".into(), jnum(h[i]));
                    m.insert("p".into(), jnum(p));
                    Value::Object(m)
                })
                .collect();
            let mut body = Map::new();
            body.insert("costs".into(), jnums(&costs));
            body.insert("f_agg".into(), jnum(alloc.f_agg));
            body.insert("x".into(), jnum(alloc.interarrival));
            body.insert("f".into(), jnums(&alloc.rates));
            body.insert("pi".into(), jnums(&alloc.pi));
            body.insert("h".into(), jnums(&h));
            body.insert(
                "p".into(),
                jnums(
                    &alloc
                        .rates
                        .iter()
                        .zip(&h)
                        .map(|(&f, &h)| price_and_interarrival(f, h).0)
                        .collect::<Vec<_>>(),
                ),
            );
            body.insert("sources".into(), Value::Array(sources));
            emit(out, &json_document(&meta, body))
        }
    }
}

fn quantize(a: QuantizeArgs, line: String) -> Result<(), CliError> {
    let loaded = load(&a.common)?;
    let cfg = &loaded.config;
    let delta = delta_of(a.delta, cfg)?;
    let profile = cfg.profile()?;
    let reports = cfg.realized_costs(&profile, a.costs.as_deref())?;
    let bound = loss_bound(&profile, delta);
    let base = optimal(cfg, profile.clone())?;
    let q = build_quantized(base.as_ref(), delta)?;
    let mut meta = Metadata::new(line, loaded.sha256.clone(), cfg.seed)
        .with("delta", num(delta))
        .with("quantizer", QUANTIZER_NOTE)
        .with("loss_bound", num(bound));
    if profile.len() == 1 {
        let jq = q.single_source_cost()?;
        meta = meta.with("J_quantized", num(jq));
    } else {
        meta = meta.with("other_reports", join(&reports));
    }
    let mut s = meta.comment_block();
    s.push_str("source,cell_lo,cell_hi,midpoint,f_q,h_q_at_midpoint\n");
    for i in 0..profile.len() {
        for c in q.cells(i, &reports)? {
            let _ = writeln!(
                s,
                "{i},{},{},{},{},{}",
                num(c.lo),
                num(c.hi),
                num(c.midpoint),
                num(c.rate),
                num(c.payment_at_midpoint)
            );
        }
    }
    emit(out_path(&a.common, cfg), &s)
}

fn baseline(a: BaselineArgs, line: String) -> Result<(), CliError> {
    let loaded = load(&a.common)?;
    let cfg = &loaded.config;
    let profile = cfg.profile()?;
    let costs = cfg.realized_costs(&profile, a.costs.as_deref())?;
    let (name, outcome) = match a.kind {
        Baseline::Benchmark => (
            "benchmark",
            BenchmarkMechanism::new(profile, cfg.aoi.clone()).outcome(&costs)?,
        ),
        Baseline::Complete => (
            "complete",
            CompleteInfoPricing::new(profile, cfg.aoi.clone()).outcome(&costs)?,
        ),
    };
    let alloc = &outcome.allocation;
    let meta = Metadata::new(line, loaded.sha256.clone(), cfg.seed)
        .with("baseline", name)
        .with("f_agg", num(alloc.f_agg))
        .with("x", num(alloc.interarrival));
    let mut s = meta.comment_block();
    s.push_str("source,cost,f,pi,h,p\n");
    for i in 0..costs.len() {
        let (f, h) = (alloc.rates[i], outcome.payments[i]);
        let (p, _) = price_and_interarrival(f, h);
        let _ = writeln!(
            s,
            "{i},{},{},{},{},{}",
            num(costs[i]),
            num(f),
            num(alloc.pi[i]),
            num(h),
            num(p)
        );
    }
    emit(out_path(&a.common, cfg), &s)
}

fn verify_cmd(a: VerifyArgs, line: String) -> Result<(), CliError> {
    let loaded = load(&a.common)?;
    let cfg = &loaded.config;
    let seed = a.seed.unwrap_or(cfg.seed);
    let mech = build(a.mechanism, cfg, a.delta)?;
    let opts = aoi_mech::VerifyOptions {
        seed,
        ..cfg.verify_options()
    };
    let reports = verify(mech.as_ref(), &opts)?;
    let passed = reports.iter().all(|r| r.passed());
    let mut meta = Metadata::new(line, loaded.sha256.clone(), seed);
    if a.mechanism == MechanismKind::Quantized {
        meta = meta
            .with("delta", num(delta_of(a.delta, cfg)?))
            .with("quantizer", QUANTIZER_NOTE);
    }
    let items: Vec<Value> = reports
        .iter()
        .map(|r| {
            let mut m = Map::new();
            m.insert("source".into(), r.source.into());
            m.insert("ic".into(), r.ic.into());
            m.insert("ir".into(), r.ir.into());
            m.insert("max_gain".into(), jnum(r.max_gain));
            m.insert("worst_cost".into(), jnum(r.worst_cost));
            m.insert("best_deviation".into(), jnum(r.best_deviation));
            m.insert("min_truthful_payoff".into(), jnum(r.min_truthful_payoff));
            m.insert("payoff_at_top".into(), jnum(r.payoff_at_top));
            m.insert("tolerance".into(), jnum(r.tolerance));
            if a.points {
                let pts = r
                    .points
                    .iter()
                    .map(|p| {
                        let mut q = Map::new();
                        q.insert("cost".into(), jnum(p.cost));
                        q.insert("best_report".into(), jnum(p.best_report));
                        q.insert("gain".into(), jnum(p.gain));
                        q.insert("gain_stderr".into(), jnum(p.gain_stderr));
                        q.insert("truthful_payoff".into(), jnum(p.truthful_payoff));
                        q.insert("truthful_stderr".into(), jnum(p.truthful_stderr));
                        Value::Object(q)
                    })
                    .collect();
                m.insert("points".into(), Value::Array(pts));
            }
            Value::Object(m)
        })
        .collect();
    let mut body = Map::new();
    body.insert("mechanism".into(), mech.name().into());
    body.insert("passed".into(), passed.into());
    body.insert("reports".into(), Value::Array(items));
    emit(out_path(&a.common, cfg), &json_document(&meta, body))?;
    if passed {
        Ok(())
    } else {
        let failing: Vec<String> = reports
            .iter()
            .filter(|r| !r.passed())
            .map(|r| {
                format!(
                    "source {} (ic: {}, ir: {}, best deviation {})",
                    r.source,
                    r.ic,
                    r.ir,
                    num(r.best_deviation)
                )
            })
            .collect();
        Err(CliError::Verdict(format!(
            "{} failed certification: {}",
            mech.name(),
            failing.join("; ")
        )))
    }
}

fn simulate(a: SimulateArgs, line: String) -> Result<(), CliError> {
    let loaded = load(&a.common)?;
    let cfg = &loaded.config;
    let seed = a.seed.unwrap_or(cfg.seed);
    let opts = cfg.sim_options(a.updates, seed);
    if opts.updates == 0 {
        return Err(CliError::Validation("--updates must be positive".into()));
    }
    let mech = build(a.mechanism, cfg, a.delta)?;
    let costs = cfg.realized_costs(mech.profile(), a.costs.as_deref())?;
    let trace = aoi_mech::simulate(mech.as_ref(), &costs, &opts)?;
    let closed = rate_form(mech.as_ref(), &costs)?;
    let counts: Vec<String> = trace
        .schedule_counts
        .iter()
        .map(|c| c.to_string())
        .collect();
    let meta = Metadata::new(line, loaded.sha256.clone(), seed)
        .with("mechanism", mech.name())
        .with("costs", join(&costs))
        .with("updates", opts.updates.to_string())
        .with("horizon", num(trace.horizon))
        .with("destination_cost_rate", num(trace.destination_cost_rate))
        .with(
            "destination_cost_rate_closed_form",
            num(closed.destination_cost_rate),
        )
        .with("aoi_cost_rate", num(trace.aoi_cost_rate))
        .with("payoff_rates", join(&trace.payoff_rates))
        .with("payoff_rates_closed_form", join(&closed.payoff_rates))
        .with("schedule_counts", counts.join(","));
    let mut s = meta.comment_block();
    s.push_str("k,time,interarrival,source,payment\n");
    for (k, u) in trace.updates.iter().enumerate() {
        let _ = writeln!(
            s,
            "{k},{},{},{},{}",
            num(u.time),
            num(u.interarrival),
            u.source,
            num(u.payment)
        );
    }
    emit(out_path(&a.common, cfg), &s)?;
    if let Some(path) = &a.ages {
        let mut t = meta.comment_block();
        t.push_str("t,age\n");
        for &(time, age) in &trace.age_samples {
            let _ = writeln!(t, "{},{}", num(time), num(age));
        }
        emit(Some(path.as_path()), &t)?;
    }
    Ok(())
}

fn experiment(a: ExperimentArgs, line: String) -> Result<(), CliError> {
    let loaded = load(&a.common)?;
    let cfg = &loaded.config;
    let exp: Experiment = a.name.parse()?;
    let seed = a.seed.unwrap_or(cfg.seed);
    let sweep = cfg.sweep_config(seed);
    let rows = run_sweep(exp, &sweep)?;
    let meta = Metadata::new(line, loaded.sha256.clone(), seed)
        .with("experiment", exp.name())
        .with("qmc_points", sweep.qmc_points.to_string())
        .with("replicates", sweep.replicates.to_string());
    let mut buf = meta.comment_block().into_bytes();
    write_csv(&rows, &mut buf)?;
    let text = String::from_utf8(buf).expect("CSV is UTF-8");
    emit(out_path(&a.common, cfg), &text)
}

fn closed_forms_cmd(a: ClosedFormsArgs, line: String) -> Result<(), CliError> {
    let setting = match a.setting {
        SettingKind::Uniform => Setting::Uniform {
            c_low: a.c_low,
            c_high: a.c_high,
            alpha: a.alpha,
        },
        SettingKind::TruncExp => Setting::TruncExp {
            mu: a.mu,
            c_high: a.c_high,
            alpha: a.alpha,
        },
    };
    let cf = closed_forms(setting)?;
    let meta = Metadata::new(line, sha256_hex(b""), 0);
    let mut s = meta.comment_block();
    s.push_str("quantity,value\n");
    let mut row = |k: &str, v: f64| {
        let _ = writeln!(s, "{k},{}", num(v));
    };
    row("J_benchmark", cf.j_benchmark);
    row("J_complete", cf.j_complete);
    row("J_optimal", cf.j_optimal);
    row("J_benchmark/J_complete", cf.benchmark_ratio);
    if let Some(b) = cf.benchmark_bound {
        row("J_benchmark/J_complete bound", b);
    }
    row("J_optimal/J_complete", cf.optimal_ratio);
    if let Some(b) = cf.optimal_bound {
        row("J_optimal/J_complete bound", b);
    }
    if let Some(g) = cf.j_complete_gamma {
        row("J_complete (incomplete gamma)", g);
    }
    emit(a.out.as_deref(), &s)
}
