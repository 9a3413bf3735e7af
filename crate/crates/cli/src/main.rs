//! Command-line surface: `report` (descriptive estimates), `optimize`
//! (policy search with comparison rows), `simulate` (regret experiments on
//! synthetic data) and `probe` (orthogonality checks).

mod config;
mod output;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use config::RunConfig;
use output::{fnv1a64, kv_table, Emitter};
use treatrule::data::make_unit_folds;
use treatrule::data::{load_dataset, Dataset};
use treatrule::error::{Error, Result};
use treatrule::learners::fit_outcome_mean;
use treatrule::pipeline::{analyze, build_report_bundle};
use treatrule::policy::{
    build_grid, estimate_ate, estimate_welfare, optimize_policy, policy_report, render_tree,
    score_diagnostics, GridSpec, PolicyTree, ScoreBundle,
};
use treatrule::scores::{Identification, ScoreSet, WelfareFamily, WelfareSpec};
use treatrule::sim::{probe_experiment, regret_experiment, DgpSpec, Perturbation, PerturbTarget, RegretConfig};
use treatrule::ustat;

#[derive(Parser)]
#[command(
    name = "treatrule",
    version,
    about = "Optimal binary treatment rules for distribution-aware welfare objectives"
)]
struct Cli {
    /// JSON config file; command-line flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Cap on worker threads (default: all cores). Totals are identical
    /// for any thread count.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write structured JSONL records to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// First-stage learner: kernel | knn | forest.
    #[arg(long, global = true)]
    learner: Option<String>,
    /// Propensity trimming constant in (0, 0.5).
    #[arg(long, global = true)]
    trim: Option<f64>,
    /// Cap on pairwise training sets.
    #[arg(long, global = true)]
    pair_cap: Option<usize>,
    /// Number of cross-fitting folds.
    #[arg(long, global = true)]
    folds: Option<usize>,
    /// Kernel bandwidth (default: rule of thumb).
    #[arg(long, global = true)]
    bandwidth: Option<f64>,
    /// Neighbour count for knn.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Tree count for the forest learner.
    #[arg(long, global = true)]
    trees: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Descriptive estimates: ATE (AIPW), Gini, IOp, IOp share, Kendall tau.
    Report {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        mapping: Option<PathBuf>,
        #[arg(long)]
        delimiter: Option<char>,
    },
    /// Estimate the welfare-optimal rule; compare with treat-none/everyone.
    Optimize {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        mapping: Option<PathBuf>,
        #[arg(long)]
        delimiter: Option<char>,
        /// additive | atkinson_iop | gini | iop_gini | kendall_tau
        #[arg(long)]
        family: Option<String>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long = "target-t")]
        target_t: Option<f64>,
        /// dm | ipw | dr
        #[arg(long)]
        identification: Option<String>,
        /// Tree depth: 0, 1 or 2.
        #[arg(long)]
        depth: Option<u8>,
        /// deciles | all | quantiles:Q
        #[arg(long)]
        grid: Option<String>,
        /// Comma-separated covariate names used as split features.
        #[arg(long, value_delimiter = ',')]
        features: Option<Vec<String>>,
    },
    /// Regret experiment on a synthetic DGP.
    Simulate {
        /// Preset name (reference | positive | randomized | kendall) or a
        /// JSON DGP spec file.
        #[arg(long)]
        dgp: Option<String>,
        #[arg(long)]
        family: Option<String>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long = "target-t")]
        target_t: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        n_list: Option<Vec<usize>>,
        #[arg(long)]
        reps: Option<usize>,
        /// Tree depth of the simulated policy class (default 1).
        #[arg(long)]
        depth: Option<u8>,
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        mc_draws: Option<usize>,
    },
    /// Orthogonality probe: orthogonal vs plug-in slope under a nuisance
    /// perturbation.
    Probe {
        #[arg(long)]
        dgp: Option<String>,
        /// atkinson_iop | gini | iop_gini
        #[arg(long)]
        family: Option<String>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long = "tau-step")]
        tau_step: Option<f64>,
        /// Nuisance to perturb: gamma | propensity.
        #[arg(long)]
        perturb: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let mut cfg = RunConfig::load(cli.config.as_ref())?;
    apply_global_overrides(&mut cfg, cli);
    match cli.threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t.max(1))
                .build()
                .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
            pool.install(|| dispatch(cli, cfg))
        }
        None => dispatch(cli, cfg),
    }
}

fn apply_global_overrides(cfg: &mut RunConfig, cli: &Cli) {
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(l) = &cli.learner {
        cfg.fit.learner = l.clone();
    }
    if let Some(t) = cli.trim {
        cfg.fit.trim = t;
    }
    if let Some(p) = cli.pair_cap {
        cfg.fit.pair_cap = p;
    }
    if let Some(f) = cli.folds {
        cfg.fit.folds = f;
    }
    if let Some(b) = cli.bandwidth {
        cfg.fit.bandwidth = Some(b);
    }
    if let Some(k) = cli.k {
        cfg.fit.k = Some(k);
    }
    if let Some(t) = cli.trees {
        cfg.fit.trees = t;
    }
}

fn dispatch(cli: &Cli, mut cfg: RunConfig) -> Result<()> {
    match &cli.cmd {
        Cmd::Report { data, mapping, delimiter } => {
            apply_data_overrides(&mut cfg, data, mapping, delimiter);
            cmd_report(&cfg, cli.out.clone())
        }
        Cmd::Optimize {
            data,
            mapping,
            delimiter,
            family,
            theta,
            target_t,
            identification,
            depth,
            grid,
            features,
        } => {
            apply_data_overrides(&mut cfg, data, mapping, delimiter);
            apply_welfare_overrides(&mut cfg, family, theta, target_t, identification);
            if let Some(d) = depth {
                cfg.policy.depth = *d;
            }
            if let Some(g) = grid {
                cfg.policy.grid = g.clone();
            }
            if let Some(f) = features {
                cfg.policy.features = f.clone();
            }
            cmd_optimize(&cfg, cli.out.clone())
        }
        Cmd::Simulate { dgp, family, theta, target_t, n_list, reps, depth, grid, mc_draws } => {
            apply_welfare_overrides(&mut cfg, family, theta, target_t, &None);
            if let Some(d) = dgp {
                cfg.sim.dgp = d.clone();
            }
            if let Some(nl) = n_list {
                cfg.sim.n_list = nl.clone();
            }
            if let Some(r) = reps {
                cfg.sim.reps = *r;
            }
            if let Some(m) = mc_draws {
                cfg.sim.mc_draws = *m;
            }
            if let Some(g) = grid {
                cfg.policy.grid = g.clone();
            }
            cfg.policy.depth = depth.unwrap_or(1);
            cmd_simulate(&cfg, cli.out.clone())
        }
        Cmd::Probe { dgp, family, theta, n, reps, tau_step, perturb } => {
            cfg.sim.dgp = dgp.clone().unwrap_or_else(|| "positive".into());
            cfg.welfare.family = family.clone().unwrap_or_else(|| "atkinson_iop".into());
            if let Some(t) = theta {
                cfg.welfare.theta = *t;
            }
            if let Some(n) = n {
                cfg.sim.probe_n = *n;
            }
            if let Some(r) = reps {
                cfg.sim.reps = *r;
            }
            if let Some(t) = tau_step {
                cfg.sim.tau_step = *t;
            }
            let target = match perturb.as_deref() {
                None | Some("gamma") => PerturbTarget::OutcomeRegression,
                Some("propensity") => PerturbTarget::Propensity,
                Some(other) => {
                    return Err(Error::Config(format!(
                        "unknown perturbation target '{other}' (expected gamma | propensity)"
                    )))
                }
            };
            cmd_probe(&cfg, target, cli.out.clone())
        }
    }
}

fn apply_data_overrides(
    cfg: &mut RunConfig,
    data: &Option<PathBuf>,
    mapping: &Option<PathBuf>,
    delimiter: &Option<char>,
) {
    if let Some(d) = data {
        let section = cfg.data.get_or_insert_with(|| config::DataSection {
            path: String::new(),
            delimiter: ',',
            mapping: None,
            mapping_file: None,
        });
        section.path = d.display().to_string();
    }
    if let Some(m) = mapping {
        if let Some(section) = cfg.data.as_mut() {
            section.mapping_file = Some(m.display().to_string());
        }
    }
    if let Some(d) = delimiter {
        if let Some(section) = cfg.data.as_mut() {
            section.delimiter = *d;
        }
    }
}

fn apply_welfare_overrides(
    cfg: &mut RunConfig,
    family: &Option<String>,
    theta: &Option<f64>,
    target_t: &Option<f64>,
    identification: &Option<String>,
) {
    if let Some(f) = family {
        cfg.welfare.family = f.clone();
    }
    if let Some(t) = theta {
        cfg.welfare.theta = *t;
    }
    if let Some(t) = target_t {
        cfg.welfare.target_t = *t;
    }
    if let Some(i) = identification {
        cfg.welfare.identification = i.clone();
    }
}

/// The resolved-config record every output begins with.
fn config_record(cfg: &RunConfig) -> (serde_json::Value, String) {
    let cfg_json = serde_json::to_value(cfg).expect("config serializes");
    let hash = format!("{:016x}", fnv1a64(cfg_json.to_string().as_bytes()));
    (json!({"record": "config", "hash": hash, "seed": cfg.seed, "config": cfg_json}), hash)
}

fn load_data(cfg: &RunConfig) -> Result<(Dataset, usize)> {
    let section = cfg
        .data
        .as_ref()
        .ok_or_else(|| Error::Config("no dataset configured (data.path / --data)".into()))?;
    if section.path.is_empty() {
        return Err(Error::Config("empty dataset path".into()));
    }
    let mapping = cfg.mapping()?;
    let report = load_dataset(std::path::Path::new(&section.path), &mapping, section.delimiter)?;
    Ok((report.dataset, report.rows_dropped))
}

fn resolve_dgp(name: &str) -> Result<DgpSpec> {
    if let Ok(spec) = DgpSpec::preset(name) {
        return Ok(spec);
    }
    let path = std::path::Path::new(name);
    if !path.exists() {
        return DgpSpec::preset(name); // surfaces the preset-name error
    }
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read DGP file {name}: {e}")))?;
    let spec: DgpSpec = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("bad DGP file {name}: {e}")))?;
    spec.validate()?;
    Ok(spec)
}

fn cmd_report(cfg: &RunConfig, out: Option<PathBuf>) -> Result<()> {
    let (data, rows_dropped) = load_data(cfg)?;
    let settings = cfg.fit.resolve(cfg.seed)?;
    let mut emitter = Emitter::new(out);
    let (config_rec, hash) = config_record(cfg);
    emitter.record(config_rec);

    // AIPW ATE from additive doubly robust scores.
    let spec = WelfareSpec::new(WelfareFamily::Additive, Identification::Dr)?;
    let scores = analyze(&data, &spec, &settings)?;
    let ate = match &scores {
        ScoreSet::Linear(l) => estimate_ate(l),
        _ => unreachable!(),
    };
    let diag = score_diagnostics(&scores);

    let gini = ustat::gini_index(data.outcome())?;
    let folds = make_unit_folds(data.n(), settings.folds, settings.seed)?;
    let gamma_circ = fit_outcome_mean(&data, &folds, &settings, data.circumstance_cols())?;
    let (iop, iop_share) = ustat::iop_share(data.outcome(), &gamma_circ)?;
    let kendall = match data.parental_outcome() {
        Some(x1) => Some(ustat::kendall_tau(data.outcome(), x1)?),
        None => None,
    };

    let rows = vec![
        ("n", data.n().to_string()),
        ("rows dropped", rows_dropped.to_string()),
        ("ate", format!("{:.6}", ate.ate)),
        ("se", format!("{:.6}", ate.se)),
        ("p value", format!("{:.6}", ate.p_value)),
        ("gini", format!("{gini:.6}")),
        ("iop", format!("{iop:.6}")),
        ("iop / gini", format!("{iop_share:.6}")),
        ("kendall tau", kendall.map_or("n/a".into(), |t| format!("{t:.6}"))),
        ("clamped propensities", format!("{:.4}", scores.clamped_share())),
    ];
    print!("{}", kv_table("sample report", &rows));

    emitter.record(json!({
        "record": "table1",
        "hash": hash,
        "n": data.n(),
        "rows_dropped": rows_dropped,
        "ate": ate.ate,
        "se": ate.se,
        "p_value": ate.p_value,
        "gini": gini,
        "iop": iop,
        "iop_share": iop_share,
        "kendall_tau": kendall,
        "clamped_share": scores.clamped_share(),
    }));
    emitter.record(json!({
        "record": "score_diagnostics",
        "hash": hash,
        "slices": serde_json::to_value(&diag.slices).unwrap(),
    }));
    emitter.finish()
}

fn resolve_features(data: &Dataset, names: &[String]) -> Result<Vec<usize>> {
    if names.is_empty() {
        return Ok((0..data.k()).collect());
    }
    names
        .iter()
        .map(|n| {
            data.column_index(n)
                .ok_or_else(|| Error::Config(format!("unknown feature column '{n}'")))
        })
        .collect()
}

fn family_scores(
    data: &Dataset,
    bundle: &ScoreBundle,
    spec: &WelfareSpec,
    settings: &treatrule::learners::nuisance::FitSettings,
) -> Result<ScoreSet> {
    if spec.identification == Identification::Dr {
        match spec.family {
            WelfareFamily::Additive => return Ok(ScoreSet::Linear(bundle.additive.clone())),
            WelfareFamily::Gini => return Ok(ScoreSet::Pair(bundle.gini.clone())),
            WelfareFamily::IopGini => return Ok(ScoreSet::Pair(bundle.iop.clone())),
            WelfareFamily::KendallTau { .. } => {
                if let Some(k) = &bundle.kendall {
                    return Ok(ScoreSet::Pair(k.clone()));
                }
            }
            WelfareFamily::AtkinsonIop { .. } => {}
        }
    }
    analyze(data, spec, settings)
}

fn cmd_optimize(cfg: &RunConfig, out: Option<PathBuf>) -> Result<()> {
    let (data, _) = load_data(cfg)?;
    let spec = cfg.welfare.resolve()?;
    spec.validate_for(&data)?;
    let settings = cfg.fit.resolve(cfg.seed)?;
    let mut emitter = Emitter::new(out);
    let (config_rec, hash) = config_record(cfg);
    emitter.record(config_rec);

    let bundle = build_report_bundle(&data, &settings)?;
    let driving = family_scores(&data, &bundle, &spec, &settings)?;
    let features = resolve_features(&data, &cfg.policy.features)?;
    let grid_spec = GridSpec::parse(&cfg.policy.grid)?;
    let grid = build_grid(&data, &features, grid_spec)?;
    let (optimal, _) = optimize_policy(&data, &driving, &spec, &grid, cfg.policy.depth)?;

    let mut table = String::new();
    table.push_str(&format!(
        "{:<12} {:>12} {:>12} {:>8} {:>8} {:>8} {:>8}\n",
        "rule", "welfare", "mean", "gini", "iop", "igm", "treated"
    ));
    for (label, policy) in [
        ("optimal", optimal.clone()),
        ("treat_none", PolicyTree::Leaf { treat: false }),
        ("treat_all", PolicyTree::Leaf { treat: true }),
    ] {
        let welfare = estimate_welfare(&data, &driving, &policy, &spec)?;
        let eval = policy_report(&data, &bundle, &policy, welfare)?;
        table.push_str(&format!(
            "{:<12} {:>12.4} {:>12.4} {:>8.4} {:>8.4} {:>8} {:>8.3}\n",
            label,
            eval.welfare,
            eval.mean,
            eval.gini,
            eval.iop,
            eval.kendall_tau.map_or("n/a".to_string(), |t| format!("{t:.4}")),
            eval.share_treated
        ));
        emitter.record(json!({
            "record": "policy_row",
            "hash": hash,
            "family": spec.family.name(),
            "rule": label,
            "welfare": eval.welfare,
            "mean": eval.mean,
            "gini": eval.gini,
            "iop": eval.iop,
            "igm": eval.kendall_tau,
            "share_treated": eval.share_treated,
            "leaves": serde_json::to_value(&eval.leaves).unwrap(),
        }));
        if label == "optimal" {
            let tree_text = render_tree(&policy, data.column_names(), &eval.leaves);
            println!("optimal rule ({}):", spec.family.name());
            println!("{tree_text}");
            println!();
            emitter.record(json!({
                "record": "tree",
                "hash": hash,
                "family": spec.family.name(),
                "encoding": optimal.encoding(),
                "text": tree_text,
            }));
        }
    }
    print!("{table}");
    emitter.finish()
}

fn cmd_simulate(cfg: &RunConfig, out: Option<PathBuf>) -> Result<()> {
    let dgp = resolve_dgp(&cfg.sim.dgp)?;
    let family = cfg.welfare.family()?;
    let settings = cfg.fit.resolve(cfg.seed)?;
    let mut emitter = Emitter::new(out);
    let (config_rec, hash) = config_record(cfg);
    emitter.record(config_rec);

    let features = if cfg.policy.features.is_empty() {
        None
    } else {
        let probe = treatrule::sim::draw_sample(&dgp, 2, 0)?;
        Some(resolve_features(&probe.data, &cfg.policy.features)?)
    };
    let regret_cfg = RegretConfig {
        depth: cfg.policy.depth,
        grid: GridSpec::parse(&cfg.policy.grid)?,
        features,
        n_list: cfg.sim.n_list.clone(),
        replications: cfg.sim.reps,
        mc_draws: cfg.sim.mc_draws,
        seed: cfg.seed,
    };
    let curve = regret_experiment(&dgp, &family, &settings, &regret_cfg)?;

    let mut rows: Vec<(&str, String)> = vec![
        ("dgp", dgp.name.clone()),
        ("family", curve.family.clone()),
        ("depth", curve.depth.to_string()),
        ("oracle best", format!("{:.6} (se {:.6})", curve.oracle_best, curve.oracle_best_se)),
    ];
    let point_strings: Vec<String> = curve
        .points
        .iter()
        .map(|p| format!("n={} mean_regret={:.6} sd={:.6}", p.n, p.mean_regret, p.sd_regret))
        .collect();
    for ps in &point_strings {
        rows.push(("regret", ps.clone()));
    }
    print!("{}", kv_table("regret experiment", &rows));

    for row in &curve.rows {
        emitter.record(json!({
            "record": "regret_row",
            "hash": hash,
            "family": curve.family,
            "n": row.n,
            "replication": row.replication,
            "estimated_welfare": row.estimated_welfare,
            "oracle_welfare": row.oracle_welfare,
            "regret": row.regret,
        }));
    }
    for p in &curve.points {
        emitter.record(json!({
            "record": "regret_point",
            "hash": hash,
            "family": curve.family,
            "n": p.n,
            "replications": p.replications,
            "mean_regret": p.mean_regret,
            "sd_regret": p.sd_regret,
            "oracle_best": curve.oracle_best,
        }));
    }
    emitter.finish()
}

fn cmd_probe(cfg: &RunConfig, target: PerturbTarget, out: Option<PathBuf>) -> Result<()> {
    let dgp = resolve_dgp(&cfg.sim.dgp)?;
    let family = cfg.welfare.family()?;
    let mut emitter = Emitter::new(out);
    let (config_rec, hash) = config_record(cfg);
    emitter.record(config_rec);

    let seeds = cfg.seed..cfg.seed + cfg.sim.reps as u64;
    let (share, curves) = probe_experiment(
        &dgp,
        &family,
        cfg.sim.probe_n,
        seeds,
        cfg.sim.tau_step,
        Perturbation::SinFirst,
        target,
    )?;
    let rows = vec![
        ("dgp", dgp.name.clone()),
        ("family", family.name().to_string()),
        (
            "perturbation",
            match target {
                PerturbTarget::OutcomeRegression => "gamma".to_string(),
                PerturbTarget::Propensity => "propensity".to_string(),
            },
        ),
        ("replications", cfg.sim.reps.to_string()),
        ("n", cfg.sim.probe_n.to_string()),
        ("tau step", format!("{}", cfg.sim.tau_step)),
        ("orthogonal flatter", format!("{share:.3}")),
    ];
    print!("{}", kv_table("orthogonality probe", &rows));
    for (k, c) in curves.iter().enumerate() {
        emitter.record(json!({
            "record": "probe_row",
            "hash": hash,
            "family": family.name(),
            "replication": k,
            "slope_orthogonal": c.slope_orthogonal,
            "slope_plugin": c.slope_plugin,
        }));
    }
    emitter.record(json!({
        "record": "probe_summary",
        "hash": hash,
        "family": family.name(),
        "share_orthogonal_flatter": share,
    }));
    emitter.finish()
}
