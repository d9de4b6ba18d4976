use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use c2s_core::config::{AgentCombo, Mode, RunConfig};
use c2s_core::metrics::{export_csv, export_summary, EpisodeMetrics};
use c2s_core::oracle::{brute_force, heuristic_routes, validate, MicroInstance};
use c2s_core::orchestrator::{
    checkpoint_dir, ensure_gae, episode_seed, evaluate, gae_path, run_episode, train, train_gae_model, Agents,
    EpisodeSettings,
};
use c2s_core::records::{world_orders, write_decisions, write_instance, write_orders, write_trips};
use c2s_core::rng::{self, tag};
use c2s_core::Error;
use clap::{Args, Parser, Subcommand};
use rand::Rng as _;

/// Order-to-warehouse assignment and routing benchmark.
#[derive(Parser, Debug)]
#[command(name = "c2s", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML run configuration.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set env.capacity=60`.
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_kv, global = true)]
    set: Vec<(String, String)>,
}

#[derive(Subcommand, Debug)]
enum Verb {
    /// Train the configured combo on every seed and save checkpoints.
    Train,
    /// Greedy evaluation of the configured combo.
    Eval {
        /// Training seed whose checkpoint to load (default: first seed).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train the graph encoder on heuristic rollouts.
    TrainGae,
    /// Compare heuristic routes against exact solutions on tiny instances.
    OracleCheck {
        #[arg(long, default_value_t = 200)]
        instances: usize,
        #[arg(long, default_value_t = 7)]
        max_orders: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write every instance here.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Run one episode and dump orders, trips and decisions.
    DumpWorld {
        #[arg(long, default_value_t = 0)]
        episode: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_kv(s: &str) -> Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected KEY=VALUE, got {s:?}"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

fn load_config(common: &Common, mode: Option<&str>) -> anyhow::Result<RunConfig> {
    let mut set = common.set.clone();
    if let Some(m) = mode {
        set.insert(0, ("mode".into(), format!("\"{m}\"")));
    }
    let cfg = match &common.config {
        Some(p) => RunConfig::load(p, &set).with_context(|| format!("loading {}", p.display()))?,
        None => RunConfig::parse("", &set)?,
    };
    Ok(cfg)
}

fn out_file(cfg: &RunConfig, name: &str) -> anyhow::Result<PathBuf> {
    fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    Ok(cfg.out_dir.join(name))
}

fn tag_of(combo: AgentCombo) -> String {
    combo.to_string().replace('+', "")
}

fn mean_of(records: &[EpisodeMetrics], f: fn(&EpisodeMetrics) -> f64) -> f64 {
    if records.is_empty() {
        0.0
    } else {
        records.iter().map(f).sum::<f64>() / records.len() as f64
    }
}

fn report(label: &str, records: &[EpisodeMetrics]) {
    println!(
        "{label}: episodes={} trips={:.3} utilization={:.4} reward={:.3} served={:.2} dropped={:.2}",
        records.len(),
        mean_of(records, |m| m.trips as f64),
        mean_of(records, |m| m.utilization),
        mean_of(records, |m| m.sum_reward),
        mean_of(records, |m| m.served as f64),
        mean_of(records, |m| m.dropped as f64),
    );
}

fn cmd_train(cfg: &RunConfig) -> anyhow::Result<()> {
    if cfg.mode != Mode::Train {
        bail!("train needs mode = \"train\"");
    }
    let gae = if cfg.combo.learned_c2s() { Some(ensure_gae(cfg)?) } else { None };
    let runs = train(cfg, gae)?;
    for run in &runs {
        for p in &run.phases {
            println!("seed {} phase {}: episodes {}..{}", run.seed, p.name, p.first_episode, p.first_episode + p.episodes);
        }
        if let Some((before, after)) = &run.frozen_check {
            let same = before.len() == after.len() && before.iter().zip(after).all(|(a, b)| a.to_bits() == b.to_bits());
            if !same {
                return Err(Error::Invariant(format!("seed {}: C2S weights changed while frozen", run.seed)).into());
            }
        }
        let path = out_file(cfg, &format!("curves_{}_{}.csv", tag_of(cfg.combo), run.seed))?;
        export_csv(&run.curve, &path)?;
        let dir = checkpoint_dir(cfg, cfg.combo, run.seed);
        run.agents.save(&dir)?;
        let tail = &run.curve[run.curve.len().saturating_sub(10)..];
        report(&format!("seed {} last {} episodes", run.seed, tail.len()), tail);
        println!("  curve {}  checkpoint {}", path.display(), dir.display());
    }
    Ok(())
}

fn cmd_eval(cfg: &RunConfig, seed: Option<u64>) -> anyhow::Result<()> {
    let combo = cfg.combo;
    let agents = if combo.learns() {
        let seed = seed.unwrap_or(cfg.seeds[0]);
        let dir = checkpoint_dir(cfg, combo, seed);
        Agents::load(&dir, combo, cfg).with_context(|| format!("no usable checkpoint for {combo} in {}", dir.display()))?
    } else {
        Agents::default()
    };
    let records = evaluate(combo, &agents, cfg)?;
    let t = tag_of(combo);
    export_csv(&records, out_file(cfg, &format!("eval_{t}_episodes.csv"))?)?;
    let summary = out_file(cfg, &format!("eval_{t}.csv"))?;
    export_summary(&records, &summary)?;
    report(&format!("eval {combo}"), &records);
    println!("  summary {}", summary.display());
    Ok(())
}

fn cmd_train_gae(cfg: &RunConfig) -> anyhow::Result<()> {
    let r = train_gae_model(cfg)?;
    let path = gae_path(cfg);
    fs::create_dir_all(&cfg.checkpoint_dir)?;
    r.model.net.save(&path)?;
    println!(
        "graphs={} loss {:.5} -> {:.5}  held-out AUC {:.4} (untrained {:.4})",
        r.train_graphs.len(),
        r.losses.first().copied().unwrap_or(f64::NAN),
        r.losses.last().copied().unwrap_or(f64::NAN),
        r.heldout_auc,
        r.untrained_auc
    );
    println!("  saved {}", path.display());
    Ok(())
}

fn cmd_oracle(cfg: &RunConfig, instances: usize, max_orders: usize, seed: u64, dump: Option<&Path>) -> anyhow::Result<()> {
    if max_orders == 0 || max_orders > c2s_core::oracle::MAX_ORDERS {
        bail!("--max-orders must be 1..={}", c2s_core::oracle::MAX_ORDERS);
    }
    if let Some(d) = dump {
        fs::create_dir_all(d)?;
    }
    let mut r = rng::substream(seed, tag::INSTANCES);
    let env = &cfg.env;
    let (mut worse, mut infeasible, mut gap) = (Vec::new(), 0, 0.0);
    for k in 0..instances {
        let n = r.random_range(1..=max_orders);
        let inst = MicroInstance::random(&mut r, n, env.vehicle_capacity, env.vehicle_speed, env.service_time);
        if let Some(d) = dump {
            write_instance(d.join(format!("instance_{k:04}.csv")), &inst)?;
        }
        let (routes, dropped) = heuristic_routes(&inst);
        let violations: Vec<String> = validate(&inst, &routes)
            .into_iter()
            .filter(|v| !matches!(v, c2s_core::Violation::Missing(id) if dropped.iter().any(|&i| inst.orders[i].id == *id)))
            .map(|v| v.to_string())
            .collect();
        if !violations.is_empty() {
            return Err(Error::Invariant(format!("instance {k}: heuristic route invalid: {}", violations.join("; "))).into());
        }
        let Some(best) = brute_force(&inst)? else {
            infeasible += 1;
            continue;
        };
        if let Some(v) = validate(&inst, &best.routes).first() {
            return Err(Error::Invariant(format!("instance {k}: exact solution invalid: {v}")).into());
        }
        if dropped.is_empty() {
            let h: f64 = routes.iter().map(|route| inst.route_distance(route)).sum();
            if best.cost > h + 1e-9 {
                worse.push(k);
            }
            gap += h / best.cost.max(1e-12) - 1.0;
        }
    }
    let compared = instances - infeasible;
    println!("instances={instances} solved={compared} mean heuristic gap {:.2}%", 100.0 * gap / compared.max(1) as f64);
    if !worse.is_empty() {
        return Err(Error::Invariant(format!("exact cost above heuristic on instances {worse:?}")).into());
    }
    Ok(())
}

fn cmd_dump(cfg: &RunConfig, episode: u64, seed: u64) -> anyhow::Result<()> {
    let combo = cfg.combo;
    let mut agents = if combo.learns() {
        let dir = checkpoint_dir(cfg, combo, seed);
        Agents::load(&dir, combo, cfg).with_context(|| format!("no usable checkpoint for {combo} in {}", dir.display()))?
    } else {
        Agents::default()
    };
    let settings = EpisodeSettings { trace: true, ..EpisodeSettings::eval() };
    let out = run_episode(combo, &mut agents, cfg, &cfg.demand, episode_seed(seed, episode), settings)?;
    let orders = out_file(cfg, &format!("world_dump_{episode}.csv"))?;
    write_orders(&orders, &world_orders(&out.world))?;
    write_trips(out_file(cfg, &format!("trips_{episode}.csv"))?, &out.world.trips, cfg.env.vehicle_capacity)?;
    if !out.decisions.is_empty() {
        write_decisions(out_file(cfg, &format!("decisions_{episode}.csv"))?, &out.decisions)?;
    }
    report(&format!("episode {episode} ({combo})"), &[out.metrics]);
    println!("  orders {}", orders.display());
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.verb {
        Verb::Train => cmd_train(&load_config(&cli.common, Some("train"))?),
        Verb::Eval { seed } => cmd_eval(&load_config(&cli.common, Some("eval"))?, seed),
        Verb::TrainGae => cmd_train_gae(&load_config(&cli.common, None)?),
        Verb::OracleCheck { instances, max_orders, seed, dump } => {
            cmd_oracle(&load_config(&cli.common, None)?, instances, max_orders, seed, dump.as_deref())
        }
        Verb::DumpWorld { episode, seed } => cmd_dump(&load_config(&cli.common, None)?, episode, seed),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Error>() {
                Some(Error::Invariant(_)) => ExitCode::from(3),
                Some(Error::Config(_)) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
