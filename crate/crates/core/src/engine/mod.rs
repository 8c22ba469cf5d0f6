//! Deterministic discrete-event simulation of the team-triggered, robust
//! team-triggered and self-triggered laws.
//!
//! Time advances on a grid of `dt_sim`. Every event carries a grid tick and
//! events within a tick are ordered by kind priority, then insertion order.
//! Agent states are never integrated separately from the agents' plans: the
//! physical state at any time is the state the plan's piecewise-constant
//! controls produce, evaluated in closed form.

mod agent;
mod metrics;
mod queue;

use crate::config::{Law, ScenarioConfig};
use crate::controllers::{control_from_estimates, u_star, NeighborSet};
use crate::error::{Error, Result};
use crate::formation::{edge_ratios, lyapunov};
use crate::model::{SimTime, UnicycleState, Vec2};
use crate::network::{message_rng, transmit, Delivery, Message, MessageKind, MessageRecord};
use crate::promises::{
    check_breach, fallback_to_reachability, make_promise, validate_noisy_promise,
    PromiseRuleConfig, PromiseWire, BREACH_EPSILON,
};
use crate::triggers::{
    adaptive_dwell, event_breach_action, BreachAction, ControlPlan, PlanContext,
};

use agent::{AgentRuntime, Held};
pub use metrics::{AgentMode, EventMessage, EventMessageKind, Metrics, RequestEvent, TraceRow};
use queue::{Event, EventQueue};

/// Relative tolerance of the per-tick monotonicity check on V.
pub const MONOTONICITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct RunOutput {
    /// The configuration actually simulated (the self-triggered law pins the promise rule).
    pub config: ScenarioConfig,
    pub metrics: Metrics,
    /// `(t, V)` at every tick.
    pub lyapunov: Vec<(SimTime, f64)>,
    /// Cumulative `N_comm` at every tick.
    pub n_comm: Vec<u64>,
    pub trace: Vec<TraceRow>,
    pub messages: Vec<MessageRecord>,
    pub requests: Vec<RequestEvent>,
    pub event_messages: Vec<EventMessage>,
    /// True positions at the final tick.
    pub final_states: Vec<UnicycleState>,
}

impl RunOutput {
    pub fn tick_seconds(&self) -> f64 {
        self.config.dt_sim
    }

    /// V at the last tick not after `t`.
    pub fn v_at(&self, t: f64) -> f64 {
        let k = ((t / self.config.dt_sim) + 1e-9).floor() as usize;
        self.lyapunov[k.min(self.lyapunov.len() - 1)].1
    }

    /// Cumulative N_comm at the last tick not after `t`.
    pub fn n_comm_at(&self, t: f64) -> u64 {
        let k = ((t / self.config.dt_sim) + 1e-9).floor() as usize;
        self.n_comm[k.min(self.n_comm.len() - 1)]
    }
}

/// Runs the law selected in `config`.
pub fn run(config: &ScenarioConfig) -> Result<RunOutput> {
    config.validate()?;
    let mut effective = config.clone();
    if config.law == Law::SelfTriggered {
        // guaranteed sets are promises that commit to nothing: any admissible control
        effective.promise = PromiseRuleConfig::static_ball(1.0);
    }
    Simulation::new(effective).run()
}

/// Runs the self-triggered baseline on `config`'s scenario.
pub fn run_self_triggered(config: &ScenarioConfig) -> Result<RunOutput> {
    let mut cfg = config.clone();
    cfg.law = Law::SelfTriggered;
    run(&cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SendCause {
    Response,
    Event,
}

fn ceil_ticks(seconds: f64, dt: f64) -> u64 {
    ((seconds / dt) - 1e-9).ceil().max(0.0) as u64
}

struct Simulation {
    cfg: ScenarioConfig,
    dt: f64,
    end_tick: u64,
    event_ticks: u64,
    retry_ticks: u64,
    events_enabled: bool,
    robust: bool,
    queue: EventQueue,
    agents: Vec<AgentRuntime>,

    n_s: Vec<u64>,
    n_e: Vec<u64>,
    warn_count: u64,
    req_count: u64,
    ack_count: u64,
    promise_messages: u64,
    dropped: u64,
    pair_promises: Vec<u64>,
    containment_violations: u64,
    monotonicity_violations: u64,
    max_v_increase: f64,

    lyapunov: Vec<(SimTime, f64)>,
    n_comm: Vec<u64>,
    trace: Vec<TraceRow>,
    messages: Vec<MessageRecord>,
    requests: Vec<RequestEvent>,
    event_messages: Vec<EventMessage>,
    last_positions: Vec<UnicycleState>,
    monitored_tick: Option<u64>,
}

impl Simulation {
    fn new(cfg: ScenarioConfig) -> Self {
        let n = cfg.agent_count();
        let dt = cfg.dt_sim;
        let positions: Vec<Vec2> = cfg.initial.iter().map(|s| s.position).collect();
        let dwell_ticks = ceil_ticks(cfg.dwell.t_d_self, dt).max(1);
        let agents = (0..n)
            .map(|i| {
                let provisional = u_star(
                    i,
                    &positions,
                    cfg.initial[i].heading,
                    &cfg.formation,
                    &cfg.bounds,
                );
                AgentRuntime::new(
                    i,
                    cfg.graph.neighbors(i).to_vec(),
                    cfg.initial[i],
                    provisional,
                    dwell_ticks,
                )
            })
            .collect();
        Self {
            dt,
            end_tick: (cfg.duration / dt).round() as u64,
            event_ticks: ceil_ticks(cfg.dwell.t_d_event, dt).max(1),
            retry_ticks: ceil_ticks(cfg.network.max_delay, dt).max(1),
            events_enabled: cfg.law != Law::SelfTriggered,
            robust: cfg.law == Law::RobustTeam,
            queue: EventQueue::default(),
            agents,
            n_s: vec![0; n],
            n_e: vec![0; n],
            warn_count: 0,
            req_count: 0,
            ack_count: 0,
            promise_messages: 0,
            dropped: 0,
            pair_promises: vec![0; n * n],
            containment_violations: 0,
            monotonicity_violations: 0,
            max_v_increase: f64::NEG_INFINITY,
            lyapunov: Vec::new(),
            n_comm: Vec::new(),
            trace: Vec::new(),
            messages: Vec::new(),
            requests: Vec::new(),
            event_messages: Vec::new(),
            last_positions: cfg.initial.clone(),
            monitored_tick: None,
            cfg,
        }
    }

    fn time(&self, tick: u64) -> SimTime {
        SimTime::from_secs(tick as f64 * self.dt)
    }

    fn run(mut self) -> Result<RunOutput> {
        // cold start: every agent runs one request round at t = 0
        for i in 0..self.agents.len() {
            self.queue.push(
                0,
                Event::SelfRequest {
                    agent: i,
                    generation: 0,
                },
            );
        }
        self.queue.push(0, Event::Tick);
        while let Some((tick, event)) = self.queue.pop() {
            if tick > self.end_tick {
                break;
            }
            self.dispatch(tick, event)?;
        }
        Ok(self.finish())
    }

    fn dispatch(&mut self, k: u64, event: Event) -> Result<()> {
        match event {
            Event::Warn { from, to, seq } => self.on_warn(k, from, to, seq),
            Event::Req { from, to } => {
                self.on_req(k, from, to);
                Ok(())
            }
            Event::PromiseArrival {
                from,
                to,
                seq,
                wire,
            } => self.on_promise(k, from, to, seq, wire),
            Event::Ack { from, to, seq } => {
                self.on_ack(from, to, seq);
                Ok(())
            }
            Event::Replan { agent } => self.on_replan(k, agent),
            Event::Respond { agent } => self.on_respond(k, agent),
            Event::SelfRequest { agent, generation } => {
                self.on_self_request(k, agent, generation);
                Ok(())
            }
            Event::ScheduledSend {
                from,
                to,
                generation,
            } => {
                let slot = self.slot(from, to)?;
                let out = &self.agents[from].out[slot];
                if out.warned && out.scheduled_gen == generation {
                    self.send_promise(k, from, slot, SendCause::Event)?;
                }
                Ok(())
            }
            Event::ReqRetry {
                from,
                to,
                generation,
            } => {
                let slot = self.slot(from, to)?;
                let a = &self.agents[from];
                if a.awaiting[slot] && a.retry_gen[slot] == generation {
                    self.send_req(k, from, to);
                    self.queue.push(
                        k + self.retry_ticks,
                        Event::ReqRetry {
                            from,
                            to,
                            generation,
                        },
                    );
                }
                Ok(())
            }
            Event::Tick => self.on_tick(k),
        }
    }

    fn slot(&self, agent: usize, neighbor: usize) -> Result<usize> {
        self.agents[agent]
            .slot(neighbor)
            .ok_or_else(|| Error::Invariant {
                at: SimTime::ZERO,
                what: format!("agent {neighbor} is not a neighbor of agent {agent}"),
            })
    }

    fn plan_ctx(cfg: &ScenarioConfig) -> PlanContext<'_> {
        PlanContext {
            spec: &cfg.formation,
            bounds: &cfg.bounds,
            trigger: &cfg.trigger,
        }
    }

    fn record_signal(&mut self, k: u64, kind: MessageKind, from: usize, to: usize) {
        let t = self.time(k);
        self.messages.push(MessageRecord {
            sent_at: t,
            deliver_at: Some(t),
            kind: kind.label(),
            sender: from,
            receiver: to,
            size_class: kind.size_class(),
        });
    }

    fn send_req(&mut self, k: u64, from: usize, to: usize) {
        self.req_count += 1;
        self.record_signal(k, MessageKind::Req, from, to);
        self.queue.push(k, Event::Req { from, to });
    }

    fn send_warn(&mut self, k: u64, from: usize, to: usize, seq: u64) {
        log::trace!("t={}: {from} -> {to} WARN seq {seq}", self.time(k));
        self.warn_count += 1;
        self.record_signal(k, MessageKind::Warn { seq }, from, to);
        self.event_messages.push(EventMessage {
            tick: k,
            sender: from,
            receiver: to,
            kind: EventMessageKind::Warn,
        });
        self.queue.push(k, Event::Warn { from, to, seq });
    }

    /// Issues a promise from agent `i` to its neighbor in `slot`, anchored
    /// at the exact state and the control applied at tick `k`.
    fn send_promise(&mut self, k: u64, i: usize, slot: usize, cause: SendCause) -> Result<()> {
        let t = self.time(k);
        let next = self.time(k + 1).secs();
        let cfg = &self.cfg;
        let ctx = Self::plan_ctx(cfg);
        let agent = &mut self.agents[i];
        agent.plan.extend_to(next, &ctx)?;
        let state = agent.plan.state_at(t.secs());
        let (control, gap) = match agent.provisional {
            Some(c) => (c, c.as_vector().norm()),
            None => {
                let control = agent.plan.control_at(t.secs());
                let estimates = agent
                    .plan
                    .sets()
                    .iter()
                    .map(|s| s.estimate_at(t))
                    .collect::<Result<Vec<_>>>()?;
                let gap = if estimates.len() == agent.neighbors.len() {
                    control_from_estimates(i, &state, &estimates, &cfg.formation, &cfg.bounds)
                        .as_vector()
                        .norm()
                } else {
                    0.0
                };
                (control, gap)
            }
        };
        let j = agent.neighbors[slot];
        let promise = make_promise(
            &cfg.promise,
            crate::model::AgentId(i),
            crate::model::AgentId(j),
            &state,
            &control,
            t,
            &cfg.bounds,
        );
        let out = &mut agent.out[slot];
        let seq = out.next_seq;
        log::trace!("t={t}: {i} -> {j} promise seq {seq} ({cause:?})");
        out.next_seq += 1;
        if self.robust {
            out.monitored.push((seq, promise));
        } else {
            out.monitored = vec![(seq, promise)];
        }
        out.last_sent_tick = Some(k);
        out.warned = false;
        out.scheduled_gen += 1;

        let n = self.agents.len();
        self.promise_messages += 1;
        self.pair_promises[i * n + j] += 1;
        if cause == SendCause::Event {
            self.n_e[i] += 1;
            self.event_messages.push(EventMessage {
                tick: k,
                sender: i,
                receiver: j,
                kind: EventMessageKind::Promise,
            });
        }
        let msg = Message {
            kind: MessageKind::Promise(PromiseWire::encode(&promise, gap)),
            sender: i,
            receiver: j,
            sent_at: t,
            seq,
        };
        let mut rng = message_rng(self.cfg.seed, i, j, seq);
        match transmit(msg, &self.cfg.network, &self.cfg.bounds, &mut rng) {
            Delivery::Dropped => {
                self.dropped += 1;
                self.messages.push(MessageRecord {
                    sent_at: t,
                    deliver_at: None,
                    kind: "PROMISE",
                    sender: i,
                    receiver: j,
                    size_class: msg.kind.size_class(),
                });
            }
            Delivery::Delivered { delay, message } => {
                // round down so the realized delay never exceeds the bound
                let deliver = k + (delay / self.dt).floor() as u64;
                self.messages.push(MessageRecord {
                    sent_at: t,
                    deliver_at: Some(self.time(deliver)),
                    kind: "PROMISE",
                    sender: i,
                    receiver: j,
                    size_class: msg.kind.size_class(),
                });
                let MessageKind::Promise(wire) = message.kind else {
                    unreachable!("transmit preserves the message kind")
                };
                self.queue.push(
                    deliver,
                    Event::PromiseArrival {
                        from: i,
                        to: j,
                        seq,
                        wire,
                    },
                );
            }
        }
        Ok(())
    }

    fn schedule_replan(&mut self, k: u64, i: usize, receipt: bool) {
        let a = &mut self.agents[i];
        a.replan_has_receipt |= receipt;
        if !a.replan_pending {
            a.replan_pending = true;
            self.queue.push(k, Event::Replan { agent: i });
        }
    }

    fn on_warn(&mut self, k: u64, from: usize, to: usize, seq: u64) -> Result<()> {
        let t = self.time(k);
        let slot = self.slot(to, from)?;
        let robust = self.robust;
        let a = &mut self.agents[to];
        if let Some(h) = a.held[slot].as_mut() {
            if (!robust || h.seq <= seq) && !h.promise.is_fallback() {
                h.promise = fallback_to_reachability(&h.promise, t)?;
            }
        }
        if robust {
            a.warned_seq[slot] = Some(a.warned_seq[slot].map_or(seq, |s| s.max(seq)));
            a.awaiting[slot] = true;
            a.retry_gen[slot] += 1;
            let generation = a.retry_gen[slot];
            self.queue.push(
                k + self.retry_ticks,
                Event::ReqRetry {
                    from: to,
                    to: from,
                    generation,
                },
            );
        }
        self.schedule_replan(k, to, false);
        Ok(())
    }

    fn on_req(&mut self, k: u64, from: usize, to: usize) {
        let a = &mut self.agents[to];
        if !a.pending_responses.contains(&from) {
            a.pending_responses.push(from);
        }
        if !a.respond_pending {
            a.respond_pending = true;
            self.queue.push(k, Event::Respond { agent: to });
        }
    }

    fn on_respond(&mut self, k: u64, i: usize) -> Result<()> {
        let a = &mut self.agents[i];
        a.respond_pending = false;
        let requesters = std::mem::take(&mut a.pending_responses);
        for r in requesters {
            let slot = self.slot(i, r)?;
            self.send_promise(k, i, slot, SendCause::Response)?;
        }
        Ok(())
    }

    fn on_promise(
        &mut self,
        k: u64,
        from: usize,
        to: usize,
        seq: u64,
        wire: PromiseWire,
    ) -> Result<()> {
        let slot = self.slot(to, from)?;
        let mut promise = wire.decode(&self.cfg.bounds)?;
        if self.robust {
            let a = &self.agents[to];
            let stale = a.held[slot].is_some_and(|h| h.seq >= seq)
                || a.warned_seq[slot].is_some_and(|s| s >= seq);
            if stale {
                log::trace!(
                    "t={}: {to} drops stale promise seq {seq} from {from}",
                    self.time(k)
                );
                return Ok(());
            }
            promise = validate_noisy_promise(
                &promise,
                self.cfg.network.noise_bound,
                self.cfg.network.radius_noise_bound,
            );
            self.ack_count += 1;
            self.record_signal(k, MessageKind::Ack { seq }, to, from);
            self.queue.push(
                k,
                Event::Ack {
                    from: to,
                    to: from,
                    seq,
                },
            );
        }
        log::trace!(
            "t={}: {to} holds promise seq {seq} from {from}",
            self.time(k)
        );
        let a = &mut self.agents[to];
        a.held[slot] = Some(Held { promise, seq });
        a.neighbor_gaps[slot] = Some(wire.control_gap);
        a.awaiting[slot] = false;
        a.retry_gen[slot] += 1;
        a.received_tick[slot] = Some(k);
        self.schedule_replan(k, to, true);
        Ok(())
    }

    fn on_ack(&mut self, from: usize, to: usize, seq: u64) {
        if let Some(slot) = self.agents[to].slot(from) {
            self.agents[to].out[slot]
                .monitored
                .retain(|(s, _)| *s >= seq);
        }
    }

    fn on_replan(&mut self, k: u64, i: usize) -> Result<()> {
        let t = self.time(k);
        let next = self.time(k + 1).secs();
        let cfg = &self.cfg;
        let ctx = Self::plan_ctx(cfg);
        let a = &mut self.agents[i];
        a.replan_pending = false;
        let state = a.plan.state_at(t.secs());
        a.provisional = None;
        let sets: Option<Vec<_>> = a.held.iter().map(|h| h.map(|h| h.promise)).collect();
        a.plan = match sets {
            Some(sets) => ControlPlan::new(
                i,
                state,
                sets,
                t,
                cfg.trigger.horizon_factor * cfg.dwell.t_d_self,
                &cfg.trigger,
            ),
            None => ControlPlan::idle(i, state, t),
        };
        if a.replan_has_receipt {
            a.anchor_tick = k;
            if cfg.dwell.adaptive && a.received_tick.iter().all(|&r| r == Some(k)) {
                let gaps: Option<Vec<f64>> = a.neighbor_gaps.iter().copied().collect();
                if let Some(gaps) = gaps {
                    let estimates = a
                        .plan
                        .sets()
                        .iter()
                        .map(|s| s.estimate_at(t))
                        .collect::<Result<Vec<_>>>()?;
                    let own_gap =
                        control_from_estimates(i, &state, &estimates, &cfg.formation, &cfg.bounds)
                            .as_vector()
                            .norm();
                    let dwell = adaptive_dwell(
                        own_gap,
                        &gaps,
                        cfg.dwell.adaptive_scale,
                        cfg.dwell.adaptive_floor,
                    );
                    a.dwell_ticks = ceil_ticks(dwell, self.dt).max(1);
                    log::debug!("t={t}: agent {i} dwell {dwell:.4} (own gap {own_gap:.3e}, neighbor gaps {gaps:?})");
                }
            }
        }
        a.replan_has_receipt = false;
        a.request_armed = true;
        a.request_gen += 1;
        a.plan.extend_to(next, &ctx)?;
        if self.monitored_tick == Some(k) {
            // this tick's trace row and breach check already saw the old plan
            let mode = if self.agents[i].plan.in_safe_mode(t.secs()) {
                AgentMode::Safe
            } else {
                AgentMode::Normal
            };
            if let Some(row) = self.trace.last_mut().filter(|row| row.t == t) {
                row.agents[i].3 = mode;
            }
            if self.events_enabled {
                self.monitor_agent(k, i)?;
            }
        }
        Ok(())
    }

    fn on_self_request(&mut self, k: u64, i: usize, generation: u64) {
        if self.agents[i].request_gen != generation {
            return;
        }
        self.agents[i].request_armed = false;
        self.n_s[i] += 1;
        self.requests.push(RequestEvent { tick: k, agent: i });
        let neighbors = self.agents[i].neighbors.clone();
        for (slot, j) in neighbors.into_iter().enumerate() {
            self.send_req(k, i, j);
            if self.robust {
                let a = &mut self.agents[i];
                a.awaiting[slot] = true;
                a.retry_gen[slot] += 1;
                let generation = a.retry_gen[slot];
                self.queue.push(
                    k + self.retry_ticks,
                    Event::ReqRetry {
                        from: i,
                        to: j,
                        generation,
                    },
                );
            }
        }
    }

    fn on_tick(&mut self, k: u64) -> Result<()> {
        let t = self.time(k);
        let next = self.time(k + 1);
        {
            let ctx = Self::plan_ctx(&self.cfg);
            for a in &mut self.agents {
                a.plan.extend_to(next.secs(), &ctx)?;
                a.plan.forget_before(t.secs());
            }
        }
        let states: Vec<UnicycleState> = self
            .agents
            .iter()
            .map(|a| a.plan.state_at(t.secs()))
            .collect();
        let positions: Vec<Vec2> = states.iter().map(|s| s.position).collect();
        let v = lyapunov(&positions, &self.cfg.formation);
        if let Some(&(_, prev)) = self.lyapunov.last() {
            let inc = v - prev;
            self.max_v_increase = self.max_v_increase.max(inc);
            if inc > MONOTONICITY_TOLERANCE * prev.max(1.0) {
                self.monotonicity_violations += 1;
            }
        }
        self.lyapunov.push((t, v));
        let n_comm = self.current_n_comm();
        self.n_comm.push(n_comm);
        if k.is_multiple_of(self.cfg.trace_stride) || k == self.end_tick {
            self.trace.push(TraceRow {
                t,
                agents: self
                    .agents
                    .iter()
                    .zip(&states)
                    .map(|(a, s)| {
                        let mode = if a.plan.in_safe_mode(t.secs()) {
                            AgentMode::Safe
                        } else {
                            AgentMode::Normal
                        };
                        (s.position.x, s.position.y, s.heading, mode)
                    })
                    .collect(),
            });
        }
        self.audit(t, &positions)?;
        if self.events_enabled {
            self.monitor(k)?;
        }
        self.monitored_tick = Some(k);
        for i in 0..self.agents.len() {
            let a = &mut self.agents[i];
            if !a.request_armed {
                continue;
            }
            if let Some(ts) = a.plan.t_star() {
                let due = (a.anchor_tick + a.dwell_ticks)
                    .max(ceil_ticks(ts.secs(), self.dt))
                    .max(k + 1);
                a.request_armed = false;
                let generation = a.request_gen;
                self.queue.push(
                    due,
                    Event::SelfRequest {
                        agent: i,
                        generation,
                    },
                );
            }
        }
        self.last_positions = states;
        if k < self.end_tick {
            self.queue.push(k + 1, Event::Tick);
        }
        Ok(())
    }

    fn current_n_comm(&self) -> u64 {
        self.agents
            .iter()
            .enumerate()
            .map(|(i, a)| a.neighbors.len() as u64 * self.n_s[i] + self.n_e[i])
            .sum()
    }

    /// Counts recipient disks that miss the issuer's true position.
    fn audit(&mut self, t: SimTime, positions: &[Vec2]) -> Result<()> {
        for (i, a) in self.agents.iter().enumerate() {
            for (slot, h) in a.held.iter().enumerate() {
                let Some(h) = h else { continue };
                let disk = h.promise.disk_at(t)?;
                let j = a.neighbors[slot];
                if !disk.contains(&positions[j], BREACH_EPSILON) {
                    log::debug!(
                        "t={t}: disk of agent {j} held by agent {} misses by {:.3e} (seq {}, mode {:?})",
                        i,
                        (positions[j] - disk.center).norm() - disk.radius(),
                        h.seq,
                        h.promise.mode
                    );
                    self.containment_violations += 1;
                }
            }
        }
        Ok(())
    }

    /// Issuer-side breach monitoring. A promise counts as broken at tick `k`
    /// if the issuer is outside it now or will be at the next tick, so the
    /// recipient can fall back from a disk that still holds the issuer.
    fn monitor(&mut self, k: u64) -> Result<()> {
        for i in 0..self.agents.len() {
            self.monitor_agent(k, i)?;
        }
        Ok(())
    }

    fn monitor_agent(&mut self, k: u64, i: usize) -> Result<()> {
        let t = self.time(k);
        let next = self.time(k + 1);
        let state = self.agents[i].plan.state_at(t.secs());
        let next_state = self.agents[i].plan.state_at(next.secs());
        {
            for slot in 0..self.agents[i].neighbors.len() {
                let out = &self.agents[i].out[slot];
                if !self.robust && out.warned {
                    continue;
                }
                let mut broken: Option<u64> = None;
                let mut expiring = false;
                for (seq, p) in &out.monitored {
                    if check_breach(p, &state, t)? || check_breach(p, &next_state, next)? {
                        broken = Some(broken.map_or(*seq, |b: u64| b.max(*seq)));
                    } else if p.expires_at.is_some_and(|e| next > e) {
                        expiring = true;
                    }
                }
                let j = self.agents[i].neighbors[slot];
                let Some(last_sent) = out.last_sent_tick else {
                    continue;
                };
                if let Some(seq) = broken {
                    if self.robust {
                        self.send_warn(k, i, j, seq);
                        self.agents[i].out[slot].monitored.retain(|(s, _)| *s > seq);
                    }
                    match event_breach_action(t, self.time(last_sent), self.cfg.dwell.t_d_event) {
                        BreachAction::SendPromiseNow => {
                            self.send_promise(k, i, slot, SendCause::Event)?
                        }
                        BreachAction::WarnThenPromiseAt(_) => {
                            let out = &mut self.agents[i].out[slot];
                            if out.warned {
                                continue;
                            }
                            out.warned = true;
                            let generation = out.scheduled_gen;
                            if !self.robust {
                                self.send_warn(k, i, j, seq);
                            }
                            self.queue.push(
                                k + self.event_ticks,
                                Event::ScheduledSend {
                                    from: i,
                                    to: j,
                                    generation,
                                },
                            );
                        }
                    }
                } else if expiring && !out.warned {
                    self.send_promise(k, i, slot, SendCause::Event)?;
                }
            }
        }
        Ok(())
    }

    fn finish(self) -> RunOutput {
        let positions: Vec<Vec2> = self.last_positions.iter().map(|s| s.position).collect();
        let degree: Vec<u64> = self
            .agents
            .iter()
            .map(|a| a.neighbors.len() as u64)
            .collect();
        let n = self.agents.len();
        let n_comm = (0..n).map(|i| degree[i] * self.n_s[i] + self.n_e[i]).sum();
        let metrics = Metrics {
            law: self.cfg.law.as_str().to_string(),
            seed: self.cfg.seed,
            duration: self.cfg.duration,
            n_s: self.n_s.clone(),
            n_e: self.n_e.clone(),
            n_comm,
            warn_count: self.warn_count,
            req_count: self.req_count,
            ack_count: self.ack_count,
            promise_messages: self.promise_messages,
            dropped_promises: self.dropped,
            pair_promises: (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .filter(|&(i, j)| self.cfg.graph.has_edge(i, j))
                .map(|(i, j)| (i, j, self.pair_promises[i * n + j]))
                .collect(),
            containment_violations: self.containment_violations,
            monotonicity_violations: self.monotonicity_violations,
            max_v_increase: if self.max_v_increase.is_finite() {
                self.max_v_increase
            } else {
                0.0
            },
            v_initial: self.lyapunov.first().map_or(0.0, |p| p.1),
            v_final: self.lyapunov.last().map_or(0.0, |p| p.1),
            final_edge_ratios: edge_ratios(&positions, &self.cfg.formation)
                .into_iter()
                .map(|((i, j), r)| (i, j, r))
                .collect(),
        };
        RunOutput {
            config: self.cfg,
            metrics,
            lyapunov: self.lyapunov,
            n_comm: self.n_comm,
            trace: self.trace,
            messages: self.messages,
            requests: self.requests,
            event_messages: self.event_messages,
            final_states: self.last_positions,
        }
    }
}
