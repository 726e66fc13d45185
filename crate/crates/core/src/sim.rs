//! Exact continuous-time simulation (direct-method Gillespie) of the node
//! population and the edge process.
//!
//! Four event categories fire with total rates `lambda N`, `mu N`,
//! `alpha sum(S)` and `beta M`. Edge creators are drawn proportionally to
//! their index from a Fenwick weight index over the living nodes; partners
//! are uniform (U) or index-weighted (P). A node may pick itself, and
//! parallel copies of an edge are kept, each dying at rate `beta`.

use alloc::string::String;
use alloc::vec::Vec;
#[allow(unused_imports)] // float methods come from std when it is linked
use num_traits::Float;

use rand::Rng;
use thiserror::Error;

use crate::fenwick::WeightIndex;
use crate::params::{ModelParams, ParamError, Version};
use crate::rng::{Rng as StreamRng, RngStream};
use crate::snapshot::{NodeRow, Snapshot};
use crate::social::{DistError, IndexSampler, SocialIndexDistribution};

const DEAD: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("population is extinct")]
    Extinct,
    #[error("population went extinct in {cap} consecutive attempts")]
    TooManyRestarts { cap: u32 },
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Dist(#[from] DistError),
}

#[derive(Debug, Clone)]
struct NodeInfo {
    birth: f64,
    s: f64,
    /// Dense position among the living, `DEAD` once gone.
    pos: u32,
    /// `(edge index, which end)` for every edge end at this node.
    incident: Vec<(u32, u8)>,
}

#[derive(Debug, Clone, Copy)]
struct Edge {
    ends: [u32; 2],
    /// Position of each end's entry in the endpoint's incidence list.
    slot: [u32; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Event {
    Birth { node: u32 },
    Death { node: u32, edges_removed: u32 },
    EdgeCreated { creator: u32, partner: u32 },
    EdgeDeleted { a: u32, b: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord {
    pub time: f64,
    pub event: Event,
}

/// The parameters and a prepared index sampler.
#[derive(Debug, Clone)]
pub struct Dynamics {
    pub params: ModelParams,
    sampler: IndexSampler,
}

impl Dynamics {
    pub fn new(params: ModelParams, dist: &SocialIndexDistribution) -> Result<Self, SimError> {
        params.validate_dynamics()?;
        dist.validate()?;
        Ok(Self { params, sampler: dist.sampler() })
    }

    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sampler.sample(rng)
    }
}

/// The live population and edge multiset.
#[derive(Debug, Clone)]
pub struct SimState {
    clock: f64,
    nodes: Vec<NodeInfo>,
    alive: Vec<u32>,
    index: WeightIndex,
    edges: Vec<Edge>,
    sum_s: f64,
    events: u64,
    since_rebuild: u64,
}

/// One discrepancy found by [`SimState::audit`].
#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub what: String,
    pub incremental: f64,
    pub recomputed: f64,
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

impl SimState {
    /// A population of one isolated node with index `s` at time 0.
    pub fn founder(s: f64) -> Self {
        let mut state = Self {
            clock: 0.0,
            nodes: Vec::new(),
            alive: Vec::new(),
            index: WeightIndex::new(),
            edges: Vec::new(),
            sum_s: 0.0,
            events: 0,
            since_rebuild: 0,
        };
        state.add_node(s);
        state
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn population(&self) -> usize {
        self.alive.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn index_sum(&self) -> f64 {
        self.sum_s
    }

    /// Incrementally maintained total event rate.
    pub fn total_rate(&self, p: &ModelParams) -> f64 {
        let n = self.alive.len() as f64;
        (p.lambda + p.mu) * n + p.alpha * self.sum_s + p.beta * self.edges.len() as f64
    }

    fn add_node(&mut self, s: f64) -> u32 {
        let id = self.nodes.len() as u32;
        let pos = self.alive.len() as u32;
        self.nodes.push(NodeInfo { birth: self.clock, s, pos, incident: Vec::new() });
        self.alive.push(id);
        self.index.push(s);
        self.sum_s += s;
        id
    }

    fn remove_incidence(&mut self, node: u32, slot: u32) {
        let list = &mut self.nodes[node as usize].incident;
        list.swap_remove(slot as usize);
        if let Some(&(e, end)) = list.get(slot as usize) {
            self.edges[e as usize].slot[end as usize] = slot;
        }
    }

    fn remove_edge(&mut self, e: u32) -> (u32, u32) {
        let ends = self.edges[e as usize].ends;
        #[allow(clippy::needless_range_loop)]
        for end in 0..2 {
            // re-read: removing end 0 of a self-loop may move end 1's entry
            let slot = self.edges[e as usize].slot[end];
            self.remove_incidence(ends[end], slot);
        }
        self.edges.swap_remove(e as usize);
        if let Some(moved) = self.edges.get(e as usize).copied() {
            for end in 0..2 {
                self.nodes[moved.ends[end] as usize].incident[moved.slot[end] as usize].0 = e;
            }
        }
        (ends[0], ends[1])
    }

    fn add_edge(&mut self, a: u32, b: u32) {
        let e = self.edges.len() as u32;
        let sa = self.nodes[a as usize].incident.len() as u32;
        self.nodes[a as usize].incident.push((e, 0));
        let sb = self.nodes[b as usize].incident.len() as u32;
        self.nodes[b as usize].incident.push((e, 1));
        self.edges.push(Edge { ends: [a, b], slot: [sa, sb] });
    }

    fn kill_node(&mut self, id: u32) -> u32 {
        let mut removed = 0;
        while let Some(&(e, _)) = self.nodes[id as usize].incident.last() {
            self.remove_edge(e);
            removed += 1;
        }
        let pos = self.nodes[id as usize].pos as usize;
        let last = self.alive.len() - 1;
        let s = self.nodes[id as usize].s;
        if pos != last {
            let moved = self.alive[last];
            self.alive[pos] = moved;
            self.nodes[moved as usize].pos = pos as u32;
            self.index.set(pos, self.nodes[moved as usize].s);
        }
        self.alive.pop();
        self.index.pop();
        self.nodes[id as usize].pos = DEAD;
        self.sum_s -= s;
        removed
    }

    fn weighted_alive(&self, rng: &mut StreamRng) -> u32 {
        let target = rng.random::<f64>() * self.index.total();
        let pos = self.index.find(target).expect("non-empty population");
        self.alive[pos]
    }

    fn maybe_rebuild(&mut self) {
        self.since_rebuild += 1;
        if self.since_rebuild as usize > 1024.max(4 * self.alive.len()) {
            self.index.rebuild();
            self.sum_s = self.index.weights().iter().sum();
            self.since_rebuild = 0;
        }
    }

    /// Executes the next event, or stops the clock at `horizon` if the next
    /// event would fire later (returns `Ok(None)` then).
    pub fn advance(
        &mut self,
        dynamics: &Dynamics,
        rng: &mut StreamRng,
        horizon: f64,
    ) -> Result<Option<EventRecord>, SimError> {
        if self.alive.is_empty() {
            return Err(SimError::Extinct);
        }
        let p = &dynamics.params;
        let n = self.alive.len() as f64;
        let births = p.lambda * n;
        let deaths = p.mu * n;
        let creations = p.alpha * self.index.total();
        let deletions = p.beta * self.edges.len() as f64;
        let total = births + deaths + creations + deletions;
        let u: f64 = rng.random();
        let dt = -(-u).ln_1p() / total;
        if self.clock + dt > horizon {
            self.clock = horizon;
            return Ok(None);
        }
        self.clock += dt;
        let pick = rng.random::<f64>() * total;
        let event = if pick < births || (creations == 0.0 && deletions == 0.0 && deaths == 0.0) {
            let s = dynamics.sample_index(rng);
            Event::Birth { node: self.add_node(s) }
        } else if pick < births + deaths || (creations == 0.0 && deletions == 0.0) {
            let pos = rng.random_range(0..self.alive.len());
            let node = self.alive[pos];
            let edges_removed = self.kill_node(node);
            Event::Death { node, edges_removed }
        } else if pick < births + deaths + creations || deletions == 0.0 {
            let creator = self.weighted_alive(rng);
            let partner = match p.version {
                Version::U => self.alive[rng.random_range(0..self.alive.len())],
                Version::P => self.weighted_alive(rng),
            };
            self.add_edge(creator, partner);
            Event::EdgeCreated { creator, partner }
        } else {
            let e = rng.random_range(0..self.edges.len()) as u32;
            let (a, b) = self.remove_edge(e);
            Event::EdgeDeleted { a, b }
        };
        self.events += 1;
        self.maybe_rebuild();
        Ok(Some(EventRecord { time: self.clock, event }))
    }

    /// Executes exactly one event.
    pub fn step(&mut self, dynamics: &Dynamics, rng: &mut StreamRng) -> Result<EventRecord, SimError> {
        Ok(self.advance(dynamics, rng, f64::INFINITY)?.expect("infinite horizon"))
    }

    /// Recomputes every aggregate from the raw collections and lists the
    /// disagreements. An empty report means the state is consistent.
    pub fn audit(&self, params: &ModelParams) -> Vec<Mismatch> {
        let mut out = Vec::new();
        let mut push = |what: &str, incremental: f64, recomputed: f64| {
            out.push(Mismatch { what: String::from(what), incremental, recomputed });
        };
        let living: Vec<u32> = (0..self.nodes.len() as u32).filter(|&i| self.nodes[i as usize].pos != DEAD).collect();
        if living.len() != self.alive.len() {
            push("population", self.alive.len() as f64, living.len() as f64);
        }
        let fresh_sum: f64 = living.iter().map(|&i| self.nodes[i as usize].s).sum();
        if !rel_close(self.sum_s, fresh_sum, 1e-9) {
            push("index sum", self.sum_s, fresh_sum);
        }
        if !rel_close(self.index.total(), fresh_sum, 1e-9) {
            push("weight index total", self.index.total(), fresh_sum);
        }
        let fresh_rate = (params.lambda + params.mu) * living.len() as f64
            + params.alpha * fresh_sum
            + params.beta * self.edges.len() as f64;
        if !rel_close(self.total_rate(params), fresh_rate, 1e-9) {
            push("total rate", self.total_rate(params), fresh_rate);
        }
        for (pos, &id) in self.alive.iter().enumerate() {
            let node = &self.nodes[id as usize];
            if node.pos as usize != pos {
                push("dense position", node.pos as f64, pos as f64);
            }
            if self.index.weight(pos) != node.s {
                push("weight index entry", self.index.weight(pos), node.s);
            }
        }
        let mut ends_seen = 0usize;
        for (e, edge) in self.edges.iter().enumerate() {
            for end in 0..2 {
                let node = &self.nodes[edge.ends[end] as usize];
                if node.pos == DEAD {
                    push("edge endpoint alive", 0.0, 1.0);
                }
                match node.incident.get(edge.slot[end] as usize) {
                    Some(&(ie, iend)) if ie as usize == e && iend as usize == end => {}
                    _ => push("incidence back-pointer", e as f64, edge.slot[end] as f64),
                }
            }
            ends_seen += 2;
        }
        let listed: usize = self.nodes.iter().map(|n| n.incident.len()).sum();
        if listed != ends_seen {
            push("edge ends", listed as f64, ends_seen as f64);
        }
        out
    }

    /// Freezes the current state.
    pub fn snapshot(&self) -> Snapshot {
        let nodes = self
            .alive
            .iter()
            .map(|&id| {
                let n = &self.nodes[id as usize];
                NodeRow { id: id as u64, age: self.clock - n.birth, social_index: n.s, degree: 0 }
            })
            .collect();
        let copies = self.edges.iter().map(|e| (e.ends[0] as u64, e.ends[1] as u64));
        Snapshot::from_parts(self.clock, nodes, copies)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Stop the first time the population reaches this size.
    Population(usize),
    /// Observe the network at this time.
    Time(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub max_restarts: u32,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { max_restarts: 1000 }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub snapshot: Snapshot,
    /// Attempts discarded because the population died out first.
    pub discards: u32,
    pub events: u64,
}

/// Runs until `stop` fires, conditioning on survival by discarding extinct
/// attempts. Attempt `k` draws from `rng.child(k)`.
pub fn run(
    params: &ModelParams,
    dist: &SocialIndexDistribution,
    stop: StopRule,
    rng: RngStream,
    opts: RunOptions,
) -> Result<RunOutcome, SimError> {
    let dynamics = Dynamics::new(*params, dist)?;
    let mut discards = 0u32;
    loop {
        let mut r = rng.child(discards as u64).rng();
        let founder = dynamics.sample_index(&mut r);
        let mut state = SimState::founder(founder);
        let survived = match stop {
            StopRule::Population(target) => loop {
                if state.population() >= target {
                    break true;
                }
                match state.step(&dynamics, &mut r) {
                    Ok(_) => {}
                    Err(SimError::Extinct) => break false,
                    Err(e) => return Err(e),
                }
                if state.population() == 0 {
                    break false;
                }
            },
            StopRule::Time(horizon) => loop {
                match state.advance(&dynamics, &mut r, horizon)? {
                    None => break true,
                    Some(_) if state.population() == 0 => break false,
                    Some(_) => {}
                }
            },
        };
        if survived {
            return Ok(RunOutcome { snapshot: state.snapshot(), discards, events: state.events() });
        }
        discards += 1;
        if discards >= opts.max_restarts {
            return Err(SimError::TooManyRestarts { cap: opts.max_restarts });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::social::SocialIndexDistribution as Dist;

    fn params(lambda: f64, mu: f64, alpha: f64, beta: f64, v: Version) -> ModelParams {
        ModelParams::new(lambda, mu, alpha, beta, v)
    }

    #[test]
    fn only_positive_rate_is_birth() {
        let d = Dynamics::new(params(1.0, 0.0, 0.0, 1.0, Version::U), &Dist::constant(1.0)).unwrap();
        let mut rng = RngStream::new(1, 0).rng();
        for _ in 0..50 {
            let mut st = SimState::founder(1.0);
            assert!(matches!(st.step(&d, &mut rng).unwrap().event, Event::Birth { .. }));
        }
    }

    #[test]
    fn preferential_creator_is_index_weighted() {
        // lambda and mu tiny so almost every event is an edge creation
        let d = Dynamics::new(params(1e-12, 0.0, 1.0, 0.0, Version::P), &Dist::constant(1.0)).unwrap();
        let mut base = SimState::founder(1.0);
        base.add_node(3.0);
        let mut rng = RngStream::new(2, 0).rng();
        let trials = 40_000;
        let mut by_second = 0;
        let mut partner_second = 0;
        for _ in 0..trials {
            let mut st = base.clone();
            if let Event::EdgeCreated { creator, partner } = st.step(&d, &mut rng).unwrap().event {
                by_second += (creator == 1) as u32;
                partner_second += (partner == 1) as u32;
            }
        }
        let f = by_second as f64 / trials as f64;
        let g = partner_second as f64 / trials as f64;
        assert!((f - 0.75).abs() < 0.01, "{f}");
        assert!((g - 0.75).abs() < 0.01, "{g}");
    }

    #[test]
    fn uniform_partner_ignores_index() {
        let d = Dynamics::new(params(1e-12, 0.0, 1.0, 0.0, Version::U), &Dist::constant(1.0)).unwrap();
        let mut base = SimState::founder(1.0);
        base.add_node(3.0);
        let mut rng = RngStream::new(3, 0).rng();
        let trials = 40_000;
        let mut partner_second = 0;
        for _ in 0..trials {
            let mut st = base.clone();
            if let Event::EdgeCreated { partner, .. } = st.step(&d, &mut rng).unwrap().event {
                partner_second += (partner == 1) as u32;
            }
        }
        assert!((partner_second as f64 / trials as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn extinct_state_refuses_to_step() {
        let d = Dynamics::new(params(1.0, 0.5, 1.0, 1.0, Version::U), &Dist::constant(1.0)).unwrap();
        let mut st = SimState::founder(1.0);
        st.kill_node(0);
        let mut rng = RngStream::new(4, 0).rng();
        assert_eq!(st.step(&d, &mut rng), Err(SimError::Extinct));
    }

    #[test]
    fn yule_mean_population() {
        // mu = alpha = 0: E[N(t)] = e^{lambda t}, Var = e^{2 lambda t}(1 - e^{-lambda t})
        let p = params(1.0, 0.0, 0.0, 0.0, Version::U);
        let d = Dynamics::new(p, &Dist::constant(1.0)).unwrap();
        let reps = 10_000;
        let root = RngStream::new(77, 0);
        let mut sum = 0.0;
        for r in 0..reps {
            let mut rng = root.replica(r).rng();
            let mut st = SimState::founder(1.0);
            while st.advance(&d, &mut rng, 2.0).unwrap().is_some() {}
            sum += st.population() as f64;
        }
        let mean = sum / reps as f64;
        let e2 = 2.0f64.exp();
        let sd = (e2 * e2 * (1.0 - 1.0 / e2)).sqrt();
        assert!((mean - e2).abs() < 3.0 * sd / (reps as f64).sqrt(), "{mean}");
    }

    #[test]
    fn pure_growth_has_no_edges() {
        let out = run(
            &params(1.0, 0.0, 0.0, 0.0, Version::U),
            &Dist::constant(1.0),
            StopRule::Population(100),
            RngStream::new(5, 0),
            RunOptions::default(),
        )
        .unwrap();
        assert_eq!(out.snapshot.node_count(), 100);
        assert!(out.snapshot.edges.is_empty());
        assert_eq!(out.discards, 0);
    }

    #[test]
    fn discard_fraction_is_extinction_probability() {
        // P(extinct before reaching 20 | start at 1) = 0.5 - O(2^-20)
        let p = params(1.0, 0.5, 0.5, 0.5, Version::U);
        let mut attempts = 0u64;
        let mut discards = 0u64;
        let mut r = 0;
        while attempts < 10_000 {
            let out =
                run(&p, &Dist::constant(1.0), StopRule::Population(20), RngStream::new(8, r), RunOptions::default())
                    .unwrap();
            assert!(out.snapshot.node_count() >= 20);
            attempts += out.discards as u64 + 1;
            discards += out.discards as u64;
            r += 1;
        }
        let frac = discards as f64 / attempts as f64;
        assert!((frac - 0.5).abs() < 0.02, "{frac}");
    }

    #[test]
    fn too_many_restarts_is_reported() {
        // survival probability 1 - 0.99 per attempt, cap 3: almost surely fails
        let p = params(1.0, 0.99, 0.0, 0.0, Version::U);
        let res = run(
            &p,
            &Dist::constant(1.0),
            StopRule::Population(10_000),
            RngStream::new(9, 0),
            RunOptions { max_restarts: 3 },
        );
        assert_eq!(res.unwrap_err(), SimError::TooManyRestarts { cap: 3 });
    }

    #[test]
    fn time_stop_observes_exactly_at_horizon() {
        let p = params(1.0, 0.2, 1.0, 0.8, Version::P);
        let out = run(&p, &Dist::exponential(1.0), StopRule::Time(6.0), RngStream::new(10, 0), RunOptions::default())
            .unwrap();
        assert_eq!(out.snapshot.time, 6.0);
        assert!(out.snapshot.nodes.iter().all(|n| n.age >= 0.0 && n.age <= 6.0));
    }

    #[test]
    fn audit_is_clean_along_a_long_run() {
        for (v, dist) in [(Version::U, Dist::exponential(1.0)), (Version::P, Dist::two_point(0.5, 4.0, 0.6))] {
            let p = params(1.0, 0.3, 1.5, 0.7, v);
            let d = Dynamics::new(p, &dist).unwrap();
            let mut rng = RngStream::new(12, 0).rng();
            let mut st = SimState::founder(1.0);
            assert!(st.audit(&p).is_empty());
            // grow to a few thousand, then churn near a fixed size
            let mut steps = 0u64;
            while steps < 1_000_000 {
                match st.step(&d, &mut rng) {
                    Ok(_) => {}
                    Err(SimError::Extinct) => st = SimState::founder(1.0),
                    Err(e) => panic!("{e}"),
                }
                if st.population() > 3000 {
                    let id = st.alive[0];
                    st.kill_node(id);
                }
                steps += 1;
                if steps.is_multiple_of(250_000) {
                    assert_eq!(st.audit(&p), alloc::vec![]);
                }
            }
            let snap = st.snapshot();
            let deg: u64 = snap.nodes.iter().map(|n| n.degree).sum();
            assert_eq!(deg, 2 * snap.edge_copies());
            assert_eq!(snap.edge_copies() as usize, st.edge_count());
        }
    }

    #[test]
    fn corrupted_aggregate_is_one_mismatch() {
        let p = params(1.0, 0.3, 1.0, 0.7, Version::U);
        let d = Dynamics::new(p, &Dist::constant(1.0)).unwrap();
        let mut rng = RngStream::new(13, 0).rng();
        let mut st = SimState::founder(1.0);
        for _ in 0..200 {
            if st.step(&d, &mut rng).is_err() {
                st = SimState::founder(1.0);
            }
        }
        // corrupting the sum also moves the total rate when alpha > 0
        let p0 = p.with_alpha(0.0);
        st.sum_s += 5.0;
        let report = st.audit(&p0);
        assert_eq!(report.len(), 1, "{report:?}");
        assert_eq!(report[0].what, "index sum");
    }

    #[test]
    fn node_death_removes_incident_multiplicity() {
        let mut st = SimState::founder(1.0);
        st.add_node(1.0);
        st.add_node(1.0);
        st.add_edge(0, 1);
        st.add_edge(1, 0);
        st.add_edge(1, 1);
        st.add_edge(0, 2);
        assert_eq!(st.kill_node(1), 3);
        assert_eq!(st.edge_count(), 1);
        assert!(st.audit(&params(1.0, 0.5, 1.0, 1.0, Version::U)).is_empty());
    }
}
