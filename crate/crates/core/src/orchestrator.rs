//! Episode loop, training schedules and evaluation for the five agent
//! combinations.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::c2s::{self, C2sAgent, Decision, PendingLedger, RewardComponents, DROP_PENALTY};
use crate::config::{AgentCombo, C2sKind, RunConfig};
use crate::demand::{DemandParams, DemandSampler};
use crate::env::{capacity_utilization, validate_trip, OrderId, WorldState};
use crate::error::{Error, Result};
use crate::graph::{build_graph, mean_edge_auc, train_gae, GaeModel, GraphSnapshot};
use crate::metrics::EpisodeMetrics;
use crate::nn::{DenseNet, ReplayBuffer};
use crate::records::DecisionRecord;
use crate::rng::{self, tag, Rng};
use crate::vrp::{apply_plan, vrp_heuristic, vrp_learned, RoutingContext, SelectMode, VrpAgent};

/// The learned parts a combo needs.
#[derive(Debug, Clone, Default)]
pub struct Agents {
    pub c2s: Option<C2sAgent>,
    pub vrp: Option<VrpAgent>,
    pub gae: Option<GaeModel>,
}

impl Agents {
    /// Fresh agents for `combo`, initialized from the seed's init stream.
    pub fn init(combo: AgentCombo, cfg: &RunConfig, seed: u64, gae: Option<GaeModel>) -> Self {
        let mut r = rng::substream(seed, tag::INIT);
        let c2s = combo.learned_c2s().then(|| {
            let mut a = C2sAgent::new(cfg.env.n_warehouses, &mut r);
            a.gamma = cfg.learn.gamma;
            a.lr = cfg.learn.c2s_lr;
            a.batch = cfg.learn.batch;
            a.replay = ReplayBuffer::new(cfg.learn.buffer);
            a
        });
        let vrp = combo.learned_vrp().then(|| {
            let mut a = VrpAgent::new(&mut r);
            a.gamma = cfg.learn.gamma;
            a.lr = cfg.learn.vrp_lr;
            a.batch = cfg.learn.batch;
            a.replay = ReplayBuffer::new(cfg.learn.buffer);
            a
        });
        Self { c2s, vrp, gae: if combo.learned_c2s() { gae } else { None } }
    }

    pub fn check(&self, combo: AgentCombo) -> Result<()> {
        let mut missing = Vec::new();
        if combo.learned_c2s() && self.c2s.is_none() {
            missing.push("C2S network");
        }
        if combo.learned_c2s() && self.gae.is_none() {
            missing.push("graph encoder");
        }
        if combo.learned_vrp() && self.vrp.is_none() {
            missing.push("VRP network");
        }
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::AgentMismatch(format!("combo {combo} lacks {}", missing.join(", "))))
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        if let Some(a) = &self.c2s {
            a.net.save(dir.join("c2s.net"))?;
        }
        if let Some(a) = &self.vrp {
            a.net.save(dir.join("vrp.net"))?;
        }
        if let Some(g) = &self.gae {
            g.net.save(dir.join("gae.net"))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path, combo: AgentCombo, cfg: &RunConfig) -> Result<Self> {
        let read = |name: &str| -> Result<DenseNet> {
            let p = dir.join(name);
            DenseNet::load(&p).map_err(|e| Error::Checkpoint(format!("{}: {e}", p.display())))
        };
        let mut agents = Agents::init(combo, cfg, 0, None);
        if let Some(a) = &mut agents.c2s {
            a.net = read("c2s.net")?;
            agents.gae = Some(GaeModel::from_net(read("gae.net")?)?);
        }
        if let Some(a) = &mut agents.vrp {
            a.net = read("vrp.net")?;
        }
        agents.check(combo)?;
        Ok(agents)
    }
}

/// Exploration and learning switches for one episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSettings {
    pub c2s_epsilon: f64,
    pub vrp_epsilon: f64,
    pub train_c2s: bool,
    pub train_vrp: bool,
    pub vrp_mode: SelectMode,
    /// Keep graphs, decision traces and settlement details.
    pub trace: bool,
}

impl EpisodeSettings {
    pub fn eval() -> Self {
        Self { c2s_epsilon: 0.0, vrp_epsilon: 0.0, train_c2s: false, train_vrp: false, vrp_mode: SelectMode::Greedy, trace: false }
    }

    pub fn train(combo: AgentCombo, epsilon: f64) -> Self {
        Self {
            c2s_epsilon: epsilon,
            vrp_epsilon: epsilon,
            train_c2s: combo.learned_c2s(),
            train_vrp: combo.learned_vrp(),
            vrp_mode: SelectMode::Exploit,
            trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    Restock { wave: usize },
    Spawn { wave: usize, orders: usize },
    Expire { wave: usize, orders: usize },
    Decide { wave: usize, assigned: usize, deferred: usize, dropped: usize },
    Route { wave: usize, depot: usize, trips: usize, dropped: usize },
    Settle { wave: usize, orders: usize },
    Train { wave: usize, c2s_steps: usize, vrp_steps: usize },
}

impl Event {
    pub fn stage(&self) -> &'static str {
        match self {
            Event::Restock { .. } => "restock",
            Event::Spawn { .. } => "spawn",
            Event::Expire { .. } => "expire",
            Event::Decide { .. } => "decide",
            Event::Route { .. } => "route",
            Event::Settle { .. } => "settle",
            Event::Train { .. } => "train",
        }
    }

    pub fn wave(&self) -> usize {
        match *self {
            Event::Restock { wave }
            | Event::Spawn { wave, .. }
            | Event::Expire { wave, .. }
            | Event::Decide { wave, .. }
            | Event::Route { wave, .. }
            | Event::Settle { wave, .. }
            | Event::Train { wave, .. } => wave,
        }
    }
}

/// One order's settlement, kept when tracing.
#[derive(Debug, Clone, PartialEq)]
pub struct Settlement {
    pub order: OrderId,
    pub components: Option<RewardComponents>,
    pub base: f64,
    /// Rewards handed to the stored decisions, oldest defer first.
    pub rewards: Vec<f64>,
    pub defers: usize,
    pub has_final: bool,
}

#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    pub metrics: EpisodeMetrics,
    pub world: WorldState,
    pub events: Vec<Event>,
    pub graphs: Vec<GraphSnapshot>,
    pub decisions: Vec<DecisionRecord>,
    pub settlements: Vec<Settlement>,
    pub vrp_rewards: Vec<f64>,
    pub discarded_pending: usize,
}

/// Seed of episode `episode` in the run seeded by `seed`.
pub fn episode_seed(seed: u64, episode: u64) -> u64 {
    rng::mix(seed, episode)
}

struct Streams {
    c2s: Rng,
    vrp: Rng,
    replay: Rng,
}

struct Tally {
    comps: Vec<RewardComponents>,
    sum_reward: f64,
    deferred: u64,
    vrp_reward: f64,
}

fn graph_of_open(world: &WorldState) -> GraphSnapshot {
    let nodes: Vec<(OrderId, crate::geometry::Point)> =
        world.open_orders_fcfs().into_iter().map(|id| (id, world.orders[&id].location)).collect();
    let wh: Vec<_> = world.warehouses.iter().map(|w| w.location).collect();
    build_graph(&nodes, &wh)
}

/// Settles one order: records rewards into the C2S buffer (when learning)
/// and into the trace.
#[allow(clippy::too_many_arguments)]
fn settle(
    order: OrderId,
    components: Option<RewardComponents>,
    base: f64,
    ledger: &mut PendingLedger,
    agents: &mut Agents,
    settings: &EpisodeSettings,
    out: &mut EpisodeOutcome,
    gamma: f64,
) -> Result<()> {
    let (defers, has_final) = ledger.shape(order);
    let transitions = ledger.settle(order, base, gamma)?;
    if settings.trace {
        for t in &transitions {
            out.decisions.push(DecisionRecord { order, state_hash: c2s::state_hash(&t.state), action: t.action, reward: t.reward });
        }
        out.settlements.push(Settlement {
            order,
            components,
            base,
            rewards: transitions.iter().map(|t| t.reward).collect(),
            defers,
            has_final,
        });
    }
    if settings.train_c2s {
        if let Some(a) = agents.c2s.as_mut() {
            for t in transitions {
                a.replay.push(t);
            }
        }
    }
    Ok(())
}

/// Runs one episode of `combo` with the demand stream of `seed`.
pub fn run_episode(
    combo: AgentCombo,
    agents: &mut Agents,
    cfg: &RunConfig,
    demand: &DemandParams,
    seed: u64,
    settings: EpisodeSettings,
) -> Result<EpisodeOutcome> {
    agents.check(combo)?;
    let env = &cfg.env;
    let mut world = WorldState::new(env.clone())?;
    let mut sampler = DemandSampler::new(seed);
    let mut streams = Streams {
        c2s: rng::substream(seed, tag::C2S_POLICY),
        vrp: rng::substream(seed, tag::VRP_POLICY),
        replay: rng::substream(seed, tag::REPLAY),
    };
    let mut ledger = PendingLedger::default();
    let mut tally = Tally { comps: Vec::new(), sum_reward: 0.0, deferred: 0, vrp_reward: 0.0 };
    let mut out = EpisodeOutcome {
        metrics: EpisodeMetrics::default(),
        world: world.clone(),
        events: Vec::new(),
        graphs: Vec::new(),
        decisions: Vec::new(),
        settlements: Vec::new(),
        vrp_rewards: Vec::new(),
        discarded_pending: 0,
    };
    let gamma = cfg.learn.gamma;
    let (a1, a2) = (cfg.reward.a1, cfg.reward.a2);
    let n = env.n_warehouses;

    for wave in 0..env.waves() {
        let now = wave as f64 * env.wave_period;
        world.clock = now;

        world.restock();
        out.events.push(Event::Restock { wave });

        let fresh = sampler.sample_wave(now, env.wave_period, demand, env.vehicle_capacity);
        out.events.push(Event::Spawn { wave, orders: fresh.len() });
        world.add_orders(fresh);

        let expired = world.drop_expired(now);
        out.events.push(Event::Expire { wave, orders: expired.len() });
        for id in expired {
            tally.sum_reward += DROP_PENALTY;
            settle(id, None, DROP_PENALTY, &mut ledger, agents, &settings, &mut out, gamma)?;
        }

        // decisions, first come first served
        let graph = graph_of_open(&world);
        let embeddings: BTreeMap<OrderId, [f64; 2]> = match (&agents.gae, combo.learned_c2s()) {
            (Some(g), true) => graph.order_ids.iter().copied().zip(g.encode(&graph)).collect(),
            _ => BTreeMap::new(),
        };
        if settings.trace {
            out.graphs.push(graph);
        }
        let (mut assigned, mut deferred, mut dropped) = (0, 0, 0);
        for id in world.open_orders_fcfs() {
            if !combo.learned_c2s() {
                let a = c2s::c2s_heuristic(&world, id)?;
                if a < n {
                    world.assign_order(id, a)?;
                    assigned += 1;
                } else if world.defer_order(id, now)? == crate::env::DeferOutcome::Deferred {
                    deferred += 1;
                } else {
                    dropped += 1;
                    tally.sum_reward += DROP_PENALTY;
                    settle(id, None, DROP_PENALTY, &mut ledger, agents, &settings, &mut out, gamma)?;
                }
                continue;
            }
            let agent = agents.c2s.as_ref().expect("checked");
            let mask = c2s::feasibility_mask(&world, id)?;
            if !mask.iter().any(|&m| m) {
                world.drop_order(id)?;
                dropped += 1;
                tally.sum_reward += DROP_PENALTY;
                settle(id, None, DROP_PENALTY, &mut ledger, agents, &settings, &mut out, gamma)?;
                continue;
            }
            let state = c2s::c2s_state(&world, id, &embeddings)?;
            let action = agent.act(&state, settings.c2s_epsilon, &mask, &mut streams.c2s)?;
            let record = settings.train_c2s || settings.trace;
            if action < n {
                world.assign_order(id, action)?;
                assigned += 1;
                if record {
                    ledger.record_final(id, Decision { state, action });
                }
            } else {
                // legal defers never drop
                world.defer_order(id, now)?;
                deferred += 1;
                if record {
                    ledger.record_defer(id, Decision { state, action });
                }
            }
        }
        tally.deferred += deferred as u64;
        out.events.push(Event::Decide { wave, assigned, deferred, dropped });

        // routing, depot by depot
        let mut wave_trips = Vec::new();
        let mut vrp_experiences = Vec::new();
        for depot in 0..n {
            let ctx = RoutingContext::from_world(&world, depot);
            if ctx.is_empty() {
                out.events.push(Event::Route { wave, depot, trips: 0, dropped: 0 });
                continue;
            }
            let plan = match (combo.learned_vrp(), &agents.vrp) {
                (true, Some(a)) => vrp_learned(&ctx, &a.net, settings.vrp_epsilon, settings.vrp_mode, &mut streams.vrp)?,
                _ => vrp_heuristic(&ctx),
            };
            let routed = apply_plan(&mut world, depot, &ctx, plan, gamma)?;
            out.events.push(Event::Route { wave, depot, trips: routed.trips.len(), dropped: routed.dropped.len() });
            for id in routed.dropped {
                tally.sum_reward += DROP_PENALTY;
                settle(id, None, DROP_PENALTY, &mut ledger, agents, &settings, &mut out, gamma)?;
            }
            wave_trips.extend(routed.trips);
            vrp_experiences.extend(routed.experiences);
        }

        let mut settled = 0;
        for trip in &wave_trips {
            for v in &trip.visits {
                let comps = c2s::reward_components(&world, v.order, trip)?;
                let base = c2s::c2s_reward(&comps, a1, a2)?;
                tally.sum_reward += base;
                tally.comps.push(comps);
                settle(v.order, Some(comps), base, &mut ledger, agents, &settings, &mut out, gamma)?;
                settled += 1;
            }
        }
        for (_, r) in &vrp_experiences {
            tally.vrp_reward += r;
            if settings.trace {
                out.vrp_rewards.push(*r);
            }
        }
        if settings.train_vrp {
            if let Some(a) = agents.vrp.as_mut() {
                for e in vrp_experiences {
                    a.replay.push(e);
                }
            }
        }
        out.events.push(Event::Settle { wave, orders: settled });

        let (mut c2s_steps, mut vrp_steps) = (0, 0);
        for _ in 0..cfg.learn.train_steps {
            if settings.train_c2s {
                if let Some(a) = agents.c2s.as_mut() {
                    c2s_steps += usize::from(a.train_step(&mut streams.replay)?.is_some());
                }
            }
            if settings.train_vrp {
                if let Some(a) = agents.vrp.as_mut() {
                    vrp_steps += usize::from(a.train_step(&mut streams.replay)?.is_some());
                }
            }
        }
        out.events.push(Event::Train { wave, c2s_steps, vrp_steps });
    }

    out.discarded_pending = ledger.discard_unsettled();
    check_invariants(&world)?;
    out.metrics = episode_metrics(&world, &tally);
    out.world = world;
    Ok(out)
}

/// Conservation of orders and an independent replay of every trip.
pub fn check_invariants(world: &WorldState) -> Result<()> {
    let census = world.census();
    let mut problems = Vec::new();
    if !census.is_conserved() {
        problems.push(format!("order census does not add up: {census:?}"));
    }
    if census.assigned != 0 {
        problems.push(format!("{} orders left assigned after routing", census.assigned));
    }
    for trip in &world.trips {
        let depot = world.warehouses[trip.depot].location;
        for v in validate_trip(trip, &world.orders, depot, &world.config) {
            problems.push(format!("trip {}: {v}", trip.id.0));
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::Invariant(problems.join("; ")))
    }
}

fn episode_metrics(world: &WorldState, tally: &Tally) -> EpisodeMetrics {
    let census = world.census();
    let trips = world.trips.len() as u64;
    let mean = |f: fn(&RewardComponents) -> f64| {
        if tally.comps.is_empty() {
            0.0
        } else {
            tally.comps.iter().map(f).sum::<f64>() / tally.comps.len() as f64
        }
    };
    let q = world.config.vehicle_capacity;
    EpisodeMetrics {
        sum_reward: tally.sum_reward,
        mean_d: mean(|c| c.d),
        mean_l: mean(|c| c.l),
        mean_u: mean(|c| c.u),
        trips,
        served_per_trip: if trips == 0 { 0.0 } else { census.served as f64 / trips as f64 },
        generated: census.generated as u64,
        served: census.served as u64,
        dropped: census.dropped as u64,
        deferred: tally.deferred,
        utilization: if trips == 0 {
            0.0
        } else {
            world.trips.iter().map(|t| capacity_utilization(t, q)).sum::<f64>() / trips as f64
        },
        distance: world.trips.iter().map(|t| t.total_distance()).sum(),
        vrp_reward: tally.vrp_reward,
        ..EpisodeMetrics::default()
    }
}

/// Graphs of open customers at each decision epoch of H+H rollouts.
pub fn collect_graphs(cfg: &RunConfig, seed: u64, count: usize) -> Result<Vec<GraphSnapshot>> {
    let combo: AgentCombo = "H+H".parse()?;
    let mut agents = Agents::default();
    let settings = EpisodeSettings { trace: true, ..EpisodeSettings::eval() };
    let mut graphs = Vec::with_capacity(count);
    let mut episode = 0;
    while graphs.len() < count {
        let out = run_episode(combo, &mut agents, cfg, &cfg.demand, episode_seed(seed, episode), settings)?;
        graphs.extend(out.graphs.into_iter().filter(|g| g.len() >= 2).take(count - graphs.len()));
        episode += 1;
        if episode > 10 * count as u64 + 10 {
            return Err(Error::EmptyBuffer);
        }
    }
    Ok(graphs)
}

#[derive(Debug, Clone)]
pub struct GaeReport {
    pub model: GaeModel,
    pub losses: Vec<f64>,
    pub train_graphs: Vec<GraphSnapshot>,
    pub heldout_auc: f64,
    pub untrained_auc: f64,
}

/// Trains the encoder on H+H rollout graphs and scores it on graphs from
/// a disjoint seed.
pub fn train_gae_model(cfg: &RunConfig) -> Result<GaeReport> {
    let seed = cfg.gae.seed;
    let graphs = collect_graphs(cfg, seed, cfg.gae.graphs)?;
    let heldout = collect_graphs(cfg, rng::mix(seed, 0x4845_4c44), (cfg.gae.graphs / 5).max(10))?;
    let mut model = GaeModel::new(cfg.gae.hidden, &mut rng::substream(seed, tag::INIT));
    let untrained_auc = mean_edge_auc(&model, &heldout, &mut rng::substream(seed, tag::INSTANCES)).unwrap_or(0.5);
    let losses = train_gae(&mut model, &graphs, cfg.gae.epochs, cfg.gae.lr, &mut rng::substream(seed, tag::GAE))?;
    let heldout_auc = mean_edge_auc(&model, &heldout, &mut rng::substream(seed, tag::INSTANCES)).unwrap_or(0.5);
    Ok(GaeReport { model, losses, train_graphs: graphs, heldout_auc, untrained_auc })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phase {
    pub name: &'static str,
    pub first_episode: u64,
    pub episodes: u64,
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub curve: Vec<EpisodeMetrics>,
    pub agents: Agents,
    pub phases: Vec<Phase>,
    /// C2S parameters at the start and end of the frozen phase.
    pub frozen_check: Option<(Vec<f64>, Vec<f64>)>,
}

#[allow(clippy::too_many_arguments)]
fn run_phase(
    combo: AgentCombo,
    agents: &mut Agents,
    cfg: &RunConfig,
    seed: u64,
    first: u64,
    episodes: u64,
    freeze_c2s: bool,
    curve: &mut Vec<EpisodeMetrics>,
) -> Result<()> {
    for k in 0..episodes {
        let eps = cfg.epsilon(k);
        let mut settings = EpisodeSettings::train(combo, eps);
        if freeze_c2s {
            settings.train_c2s = false;
            settings.c2s_epsilon = 0.0;
        }
        let episode = first + k;
        let out = run_episode(combo, agents, cfg, &cfg.demand, episode_seed(seed, episode), settings)?;
        curve.push(EpisodeMetrics { episode, seed, epsilon: eps, ..out.metrics });
    }
    Ok(())
}

/// Trains `cfg.combo` on one seed. C2S-P runs two phases: C2S-L with
/// heuristic routing, then VRP-L behind the frozen C2S network.
pub fn train_seed(cfg: &RunConfig, seed: u64, gae: Option<GaeModel>) -> Result<SeedRun> {
    let combo = cfg.combo;
    if !combo.learns() {
        return Err(Error::Config(vec![format!("combo {combo} has nothing to train")]));
    }
    let mut curve = Vec::new();
    if combo.c2s != C2sKind::Pretrained {
        let mut agents = Agents::init(combo, cfg, seed, gae);
        run_phase(combo, &mut agents, cfg, seed, 0, cfg.episodes, false, &mut curve)?;
        let phases = vec![Phase { name: "joint", first_episode: 0, episodes: cfg.episodes }];
        return Ok(SeedRun { seed, curve, agents, phases, frozen_check: None });
    }
    let p1 = cfg.phase1_episodes();
    let phase1: AgentCombo = "L+H".parse()?;
    let mut first = Agents::init(phase1, cfg, seed, gae);
    run_phase(phase1, &mut first, cfg, seed, 0, p1, false, &mut curve)?;
    let mut agents = Agents::init(combo, cfg, seed, first.gae.clone());
    agents.c2s = first.c2s;
    let before = agents.c2s.as_ref().expect("phase one trains C2S").net.flat_parameters();
    run_phase(combo, &mut agents, cfg, seed, p1, cfg.episodes, true, &mut curve)?;
    let after = agents.c2s.as_ref().expect("kept").net.flat_parameters();
    let phases = vec![
        Phase { name: "c2s", first_episode: 0, episodes: p1 },
        Phase { name: "vrp", first_episode: p1, episodes: cfg.episodes },
    ];
    Ok(SeedRun { seed, curve, agents, phases, frozen_check: Some((before, after)) })
}

/// Trains on every configured seed in parallel; results in seed order.
pub fn train(cfg: &RunConfig, gae: Option<GaeModel>) -> Result<Vec<SeedRun>> {
    cfg.seeds.par_iter().map(|&s| train_seed(cfg, s, gae.clone())).collect()
}

/// Greedy evaluation over `eval.seeds x eval.episodes`.
pub fn evaluate(combo: AgentCombo, agents: &Agents, cfg: &RunConfig) -> Result<Vec<EpisodeMetrics>> {
    agents.check(combo)?;
    let demand = cfg.eval_demand();
    let per_seed: Vec<Vec<EpisodeMetrics>> = cfg
        .eval
        .seeds
        .par_iter()
        .map(|&seed| {
            let mut local = agents.clone();
            (0..cfg.eval.episodes)
                .map(|episode| {
                    let out = run_episode(combo, &mut local, cfg, &demand, episode_seed(seed, episode), EpisodeSettings::eval())?;
                    Ok(EpisodeMetrics { episode, seed, ..out.metrics })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(per_seed.into_iter().flatten().collect())
}

pub fn checkpoint_dir(cfg: &RunConfig, combo: AgentCombo, seed: u64) -> PathBuf {
    cfg.checkpoint_dir.join(combo.to_string()).join(format!("seed_{seed}"))
}

pub fn gae_path(cfg: &RunConfig) -> PathBuf {
    cfg.checkpoint_dir.join("gae.net")
}

/// The encoder from the checkpoint directory, trained and saved if absent.
pub fn ensure_gae(cfg: &RunConfig) -> Result<GaeModel> {
    let path = gae_path(cfg);
    if path.exists() {
        return GaeModel::from_net(DenseNet::load(&path)?);
    }
    let report = train_gae_model(cfg)?;
    fs::create_dir_all(&cfg.checkpoint_dir)?;
    report.model.net.save(&path)?;
    Ok(report.model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RunConfig {
        let mut c = RunConfig::default();
        c.demand.customers_per_wave = (8, 12);
        c
    }

    #[test]
    fn event_order_per_wave() {
        let cfg = small();
        let out = run_episode("H+H".parse().unwrap(), &mut Agents::default(), &cfg, &cfg.demand, 3, EpisodeSettings::eval()).unwrap();
        let stages: Vec<&str> = out.events.iter().filter(|e| e.wave() == 1).map(Event::stage).collect();
        let mut dedup = stages.clone();
        dedup.dedup();
        assert_eq!(dedup, ["restock", "spawn", "expire", "decide", "route", "settle", "train"]);
        assert!(out.world.census().is_conserved());
    }

    #[test]
    fn empty_waves() {
        let mut cfg = small();
        cfg.demand.customers_per_wave = (0, 0);
        let out = run_episode("H+H".parse().unwrap(), &mut Agents::default(), &cfg, &cfg.demand, 1, EpisodeSettings::eval()).unwrap();
        assert_eq!(out.metrics.trips, 0);
        assert_eq!(out.metrics.sum_reward, 0.0);
    }

    #[test]
    fn missing_agents_rejected() {
        let cfg = small();
        let r = run_episode("H+L".parse().unwrap(), &mut Agents::default(), &cfg, &cfg.demand, 1, EpisodeSettings::eval());
        assert!(matches!(r, Err(Error::AgentMismatch(_))));
    }
}
