use std::fmt;
use std::io::{self, Write};

use anyhow::{anyhow, Context, Result};
use rayon::prelude::*;
use simcache::baselines::{run_per_cache_baseline, solve_adaptive_caching, PerCacheConfig, ServeRule};
use simcache::hibsa::{solve_offline, DualRule, OfflineSolution, SolverConfig};
use simcache::model::validate_scenario;
use simcache::online::{run_online, write_slot_csv, GradientEstimator, OnlineConfig, SlotRecord};
use simcache::scenario::{generate_seeded, load_scenario, scenario_to_string, GenConfig, Topology};
use simcache::{Error, Scenario64};

use crate::output::{
    ensure_dir, quote, scheme_name, solution_json, write_file, write_manifest, Manifest, ScenarioInfo, Summary,
    SUMMARY_HEADER, SWEEP_HEADER_PREFIX, VERSION,
};
use crate::{
    BaselineArg, DualRuleArg, EstimatorArg, GenArgs, GenerateArgs, OnlineArgs, SchemeArg, ServeRuleArg, SolveArgs,
    SolverArgs, SourceArgs, SweepArgs, TopoArgs, TopologyArg, ValidateArgs,
};

/// Bad flag values or combinations; exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// 2 for usage errors (including invalid parameter values), 3 for I/O, parse
/// and scenario errors.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<UsageError>() || matches!(cause.downcast_ref::<Error>(), Some(Error::Config(_))) {
            return 2;
        }
    }
    3
}

fn gen_config(topo: &TopoArgs, rho: f64, capacity: usize, alpha: f64, seed: u64) -> GenConfig {
    GenConfig {
        nodes_side: topo.nodes_side,
        topology: match topo.topology {
            TopologyArg::Grid => Topology::Grid,
            TopologyArg::Torus => Topology::Torus,
        },
        num_contents: topo.contents,
        num_requests: topo.requests,
        num_origins: topo.origins,
        capacity,
        beta: topo.beta,
        rho,
        alpha,
        min_delay: topo.min_delay,
        max_delay: topo.max_delay,
        seed,
    }
}

fn default_gen_config(gen: &GenArgs, seed: u64) -> GenConfig {
    let d = GenConfig::default();
    gen_config(&gen.topo, gen.rho, gen.capacity.unwrap_or(d.capacity), gen.alpha.unwrap_or(d.alpha), seed)
}

struct Loaded {
    scenario: Scenario64,
    info: ScenarioInfo,
}

fn scenario_from(source: &SourceArgs, gen: &GenArgs, seed: u64) -> Result<Loaded> {
    match &source.scenario {
        Some(path) => {
            let mut s: Scenario64 =
                load_scenario(path).with_context(|| format!("reading scenario {}", path.display()))?;
            if let Some(alpha) = gen.alpha {
                if !(alpha >= 0.0 && alpha.is_finite()) {
                    return Err(usage("--alpha must be a nonnegative number"));
                }
                s = s.with_alpha(alpha);
            }
            if let Some(c) = gen.capacity {
                s = s.with_uniform_capacity(c);
            }
            let violations = validate_scenario(&s);
            if !violations.is_empty() {
                return Err(anyhow!(Error::InvalidScenario(violations)))
                    .with_context(|| format!("scenario {}", path.display()));
            }
            let info = ScenarioInfo::of(&s, Some(path), None);
            Ok(Loaded { scenario: s, info })
        }
        None => {
            let gseed = source.scenario_seed.unwrap_or(seed);
            let s: Scenario64 = generate_seeded(&default_gen_config(gen, gseed))?;
            let info = ScenarioInfo::of(&s, None, Some(gseed));
            Ok(Loaded { scenario: s, info })
        }
    }
}

fn solver_config(a: &SolverArgs, seed: u64) -> Result<SolverConfig<f64>> {
    let cfg = SolverConfig {
        eta_s: a.eta_s,
        eta_mu: a.eta_mu,
        delta: a.delta,
        max_iters: a.max_iters,
        seed,
        random_init: false,
        dual_rule: match a.dual_rule {
            DualRuleArg::Damped => DualRule::Damped,
            DualRuleArg::Amplified => DualRule::Amplified,
        },
    };
    cfg.validate()?;
    Ok(cfg)
}

fn run_scheme(s: &Scenario64, cfg: &SolverConfig<f64>, scheme: SchemeArg) -> simcache::Result<OfflineSolution<f64>> {
    match scheme {
        SchemeArg::Similarity => solve_offline(s, cfg),
        SchemeArg::Adaptive => solve_adaptive_caching(s, cfg),
    }
}

pub fn generate(a: &GenerateArgs) -> Result<()> {
    let s: Scenario64 = generate_seeded(&default_gen_config(&a.gen, a.seed))?;
    let violations = validate_scenario(&s);
    let summary = format!(
        "{} nodes, {} links, {} contents, {} requests: {}",
        s.num_nodes(),
        s.network().edges().len(),
        s.num_contents(),
        s.num_requests(),
        if violations.is_empty() { "valid".to_string() } else { format!("{} violations", violations.len()) }
    );
    let text = scenario_to_string(&s);
    match &a.out {
        Some(path) => {
            write_file(path, text.as_bytes())?;
            println!("{summary}");
        }
        None => {
            io::stdout().write_all(text.as_bytes())?;
            eprintln!("{summary}");
        }
    }
    Ok(())
}

pub fn validate(a: &ValidateArgs) -> Result<()> {
    let s: Scenario64 =
        load_scenario(&a.scenario).with_context(|| format!("reading scenario {}", a.scenario.display()))?;
    let violations = validate_scenario(&s);
    if violations.is_empty() {
        println!(
            "valid: {} nodes, {} links, {} contents, {} requests",
            s.num_nodes(),
            s.network().edges().len(),
            s.num_contents(),
            s.num_requests()
        );
        return Ok(());
    }
    for v in &violations {
        println!("{v}");
    }
    Err(anyhow!("{} violations in {}", violations.len(), a.scenario.display()))
}

pub fn solve(a: &SolveArgs) -> Result<()> {
    let scheme = match a.baseline {
        None => SchemeArg::Similarity,
        Some(BaselineArg::Adaptive) => SchemeArg::Adaptive,
        Some(BaselineArg::PerCache) => {
            return Err(usage("the per-cache baseline is simulated by `online --baseline per-cache`"))
        }
    };
    let cfg = solver_config(&a.solver, a.seed)?;
    let loaded = scenario_from(&a.source, &a.gen, a.seed)?;
    let s = &loaded.scenario;
    ensure_dir(&a.out)?;

    let sol = run_scheme(s, &cfg, scheme)?;
    let summary = Summary::new(s, &sol, scheme);

    let mut trace = Vec::new();
    sol.trace.write_csv(&mut trace)?;
    write_file(&a.out.join("trace.csv"), &trace)?;
    write_file(&a.out.join("solution.json"), solution_json(s, &sol.integer, scheme).as_bytes())?;
    let row = summary.csv();
    write_file(&a.out.join("summary.csv"), format!("{SUMMARY_HEADER}\n{row}\n").as_bytes())?;
    write_file(&a.out.join("scenario.json"), scenario_to_string(s).as_bytes())?;
    write_manifest(
        &a.out,
        &Manifest {
            command: "solve",
            version: VERSION,
            seed: a.seed,
            config: a,
            scenario: Some(loaded.info),
            outputs: vec!["trace.csv", "solution.json", "summary.csv", "scenario.json"],
        },
    )?;

    println!("{SUMMARY_HEADER}\n{row}");
    if !summary.converged {
        eprintln!("warning: stopped after {} iterations without converging", summary.iterations);
    }
    Ok(())
}

struct Point {
    rho: f64,
    capacity: usize,
    alpha: f64,
    seed: u64,
    scheme: SchemeArg,
}

pub fn sweep(a: &SweepArgs) -> Result<()> {
    if a.rhos.is_empty() || a.capacities.is_empty() || a.alphas.is_empty() || a.seeds.is_empty() || a.schemes.is_empty()
    {
        return Err(usage("every sweep list needs at least one value"));
    }
    let cfg = solver_config(&a.solver, 0)?;
    let mut points = Vec::new();
    for &rho in &a.rhos {
        for &capacity in &a.capacities {
            for &alpha in &a.alphas {
                gen_config(&a.topo, rho, capacity, alpha, 0).validate()?;
                for &seed in &a.seeds {
                    for &scheme in &a.schemes {
                        points.push(Point { rho, capacity, alpha, seed, scheme });
                    }
                }
            }
        }
    }
    points.sort_by(|x, y| {
        x.rho
            .total_cmp(&y.rho)
            .then(x.capacity.cmp(&y.capacity))
            .then(x.alpha.total_cmp(&y.alpha))
            .then(x.seed.cmp(&y.seed))
            .then(x.scheme.cmp(&y.scheme))
    });

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs)
        .build()
        .context("starting worker pool")?;
    let rows: Vec<String> = pool.install(|| {
        points
            .par_iter()
            .map(|p| {
                let prefix = format!("{},{},{}", p.rho, p.capacity, p.seed);
                let result = generate_seeded::<f64>(&gen_config(&a.topo, p.rho, p.capacity, p.alpha, p.seed))
                    .and_then(|s| run_scheme(&s, &cfg, p.scheme).map(|sol| Summary::new(&s, &sol, p.scheme)));
                match result {
                    Ok(summary) => format!("{prefix},{},", summary.csv()),
                    Err(e) => format!("{prefix},{},{},,,,,,,{}", scheme_name(p.scheme), p.alpha, quote(&e.to_string())),
                }
            })
            .collect()
    });

    ensure_dir(&a.out)?;
    let mut text = format!("{SWEEP_HEADER_PREFIX},{SUMMARY_HEADER},error\n");
    for r in &rows {
        text.push_str(r);
        text.push('\n');
    }
    write_file(&a.out.join("sweep.csv"), text.as_bytes())?;
    write_manifest(
        &a.out,
        &Manifest {
            command: "sweep",
            version: VERSION,
            seed: 0,
            config: a,
            scenario: None,
            outputs: vec!["sweep.csv"],
        },
    )?;
    println!("{} rows written to {}", rows.len(), a.out.join("sweep.csv").display());
    Ok(())
}

fn slot_csv_with_reference(records: &[SlotRecord<f64>], offline_delay: f64) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_slot_csv(records, &mut buf)?;
    let text = String::from_utf8(buf).expect("csv is utf-8");
    let mut out = String::with_capacity(text.len() + records.len() * 24);
    for (i, line) in text.lines().enumerate() {
        out.push_str(line);
        if i == 0 {
            out.push_str(",offline_delay\n");
        } else {
            out.push_str(&format!(",{offline_delay}\n"));
        }
    }
    Ok(out.into_bytes())
}

pub fn online(a: &OnlineArgs) -> Result<()> {
    if a.baseline == Some(BaselineArg::Adaptive) {
        return Err(usage("adaptive caching is an offline scheme; use `solve --baseline adaptive`"));
    }
    let solver = solver_config(&a.solver, a.seed)?;
    let loaded = scenario_from(&a.source, &a.gen, a.seed)?;
    let s = &loaded.scenario;

    let reference = solve_offline(s, &solver)?;
    let offline_delay = simcache::cost::expected_delay(s, &reference.integer.to_state::<f64>());

    ensure_dir(&a.out)?;
    let (name, records) = match a.baseline {
        Some(_) => {
            let cfg = PerCacheConfig {
                insert_prob: a.insert_prob,
                num_slots: a.slots,
                seed: a.seed,
                slot_length: a.slot_length,
                delay_window: a.window,
                serve_rule: match a.serve_rule {
                    ServeRuleArg::MostSimilar => ServeRule::MostSimilar,
                    ServeRuleArg::CostAware => ServeRule::CostAware,
                },
            };
            ("per_cache.csv", run_per_cache_baseline(s, &cfg)?.records())
        }
        None => {
            let cfg = OnlineConfig {
                slot_length: a.slot_length,
                eta_x: a.eta_x,
                eta_q: a.eta_q,
                eta_mu: a.solver.eta_mu,
                num_slots: a.slots,
                seed: a.seed,
                delay_window: a.window,
                dual_rule: solver.dual_rule,
                estimator: match a.estimator {
                    EstimatorArg::Rows => GradientEstimator::RequestRows,
                    EstimatorArg::Delivered => GradientEstimator::DeliveredOnly,
                },
            };
            let run = run_online(s, &cfg)?;
            write_file(
                &a.out.join("placement.json"),
                solution_json(s, &run.placement, SchemeArg::Similarity).as_bytes(),
            )?;
            ("online.csv", run.records())
        }
    };
    write_file(&a.out.join(name), &slot_csv_with_reference(&records, offline_delay)?)?;
    write_file(&a.out.join("scenario.json"), scenario_to_string(s).as_bytes())?;
    let mut outputs = vec![name, "scenario.json"];
    if a.baseline.is_none() {
        outputs.push("placement.json");
    }
    write_manifest(
        &a.out,
        &Manifest {
            command: "online",
            version: VERSION,
            seed: a.seed,
            config: a,
            scenario: Some(loaded.info),
            outputs,
        },
    )?;
    if let Some(last) = records.last() {
        println!(
            "slot {}: windowed delay {} (offline reference {offline_delay})",
            last.t, last.avg_delay_window
        );
    }
    Ok(())
}
