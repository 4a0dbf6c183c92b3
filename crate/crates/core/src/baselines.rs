//! Comparison schemes: adaptive caching (no similarity, every request gets
//! exactly what it asked for) and a per-cache scheme in which each ingress
//! node runs its own LRU cache and answers with the most similar local item.

use std::collections::BTreeSet;

use rand::distr::{Bernoulli, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hibsa::{solve_with_mode, DeliveryMode, OfflineSolution, SolverConfig};
use crate::model::{validate_scenario, ContentId, NodeId, RequestId, Scenario};
use crate::online::{draw_slot_requests, Delivery, RequestStreams, SlotRecord, Window};
use crate::scalar::Scalar;

/// Offline solver with delivery fixed to the requested content; only the
/// placement is optimised.
pub fn solve_adaptive_caching<T: Scalar>(s: &Scenario<T>, cfg: &SolverConfig<T>) -> Result<OfflineSolution<T>> {
    solve_with_mode(s, cfg, DeliveryMode::Identity)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerCacheConfig<T> {
    /// Probability of admitting the requested content after a request.
    pub insert_prob: f64,
    pub num_slots: usize,
    pub seed: u64,
    pub slot_length: T,
    pub delay_window: usize,
    pub serve_rule: ServeRule,
}

/// How the ingress node answers a request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ServeRule {
    /// Always the most similar local content when anything is stored.
    #[default]
    MostSimilar,
    /// The most similar local content only if its weighted dissimilarity does
    /// not exceed the delay of fetching the requested content.
    CostAware,
}

impl<T: Scalar> Default for PerCacheConfig<T> {
    fn default() -> Self {
        Self {
            insert_prob: 0.5,
            num_slots: 5_000,
            seed: 0,
            slot_length: T::one(),
            delay_window: 10,
            serve_rule: ServeRule::default(),
        }
    }
}

impl<T: Scalar> PerCacheConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.insert_prob) {
            return Err(Error::Config("insert probability must lie in [0, 1]".into()));
        }
        if !(self.slot_length > T::zero() && self.slot_length.is_finite()) {
            return Err(Error::Config("slot length must be positive".into()));
        }
        if self.delay_window == 0 {
            return Err(Error::Config("delay window must be at least one slot".into()));
        }
        Ok(())
    }
}

/// LRU caches of every node, least recently used first. Contents a node is a
/// source of are always local and never occupy LRU space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PerCacheState {
    lru: Vec<Vec<ContentId>>,
}

impl PerCacheState {
    pub fn new(num_nodes: usize) -> Self {
        Self {
            lru: vec![Vec::new(); num_nodes],
        }
    }

    pub fn lru(&self, v: NodeId) -> &[ContentId] {
        &self.lru[v]
    }

    /// Everything node `v` can answer from: its LRU entries and its sources.
    pub fn local<T: Scalar>(&self, s: &Scenario<T>, v: NodeId) -> BTreeSet<ContentId> {
        let mut out: BTreeSet<ContentId> = self.lru[v].iter().copied().collect();
        out.extend((0..s.num_contents()).filter(|&f| s.is_pinned(v, f)));
        out
    }

    /// Serves one instance of request `r` at its ingress node.
    pub fn serve<T: Scalar>(&mut self, s: &Scenario<T>, r: RequestId, rule: ServeRule) -> Delivery<T> {
        let req = s.request(r);
        let fetch: T = s.hop_delays(r).iter().copied().sum();
        let v = req.path.nodes()[0];
        let d = s.dissimilarity();
        // BTreeSet iterates in id order, so min_by keeps the smaller id on ties
        let best = self
            .local(s, v)
            .into_iter()
            .min_by(|&a, &b| d.get(req.content, a).partial_cmp(&d.get(req.content, b)).unwrap_or(std::cmp::Ordering::Equal));
        let best = best.filter(|&g| rule == ServeRule::MostSimilar || s.alpha() * d.get(req.content, g) <= fetch);
        match best {
            Some(g) => {
                self.touch(v, g);
                Delivery {
                    request: r,
                    content: g,
                    delay: T::zero(),
                    dissimilarity: d.get(req.content, g),
                }
            }
            None => Delivery {
                request: r,
                content: req.content,
                delay: fetch,
                dissimilarity: T::zero(),
            },
        }
    }

    /// Places the requested content of `r` at the ingress node as most recently
    /// used, evicting the least recently used entry when full.
    pub fn admit<T: Scalar>(&mut self, s: &Scenario<T>, r: RequestId) {
        let req = s.request(r);
        let v = req.path.nodes()[0];
        let cap = s.capacities()[v];
        if cap == 0 || s.is_pinned(v, req.content) {
            return;
        }
        let list = &mut self.lru[v];
        if let Some(i) = list.iter().position(|&g| g == req.content) {
            list.remove(i);
        } else if list.len() == cap {
            list.remove(0);
        }
        list.push(req.content);
    }

    fn touch(&mut self, v: NodeId, g: ContentId) {
        let list = &mut self.lru[v];
        if let Some(i) = list.iter().position(|&h| h == g) {
            list.remove(i);
            list.push(g);
        }
    }

    fn churn(&self, other: &Self) -> usize {
        self.lru
            .iter()
            .zip(&other.lru)
            .map(|(a, b)| a.iter().filter(|g| !b.contains(g)).count() + b.iter().filter(|g| !a.contains(g)).count())
            .sum()
    }
}

#[derive(Debug, Clone)]
pub struct PerCacheSlot<T> {
    pub record: SlotRecord<T>,
    pub deliveries: Vec<Delivery<T>>,
}

#[derive(Debug, Clone)]
pub struct PerCacheRun<T> {
    pub slots: Vec<PerCacheSlot<T>>,
    pub caches: PerCacheState,
}

impl<T: Scalar> PerCacheRun<T> {
    pub fn records(&self) -> Vec<SlotRecord<T>> {
        self.slots.iter().map(|s| s.record).collect()
    }
}

/// Simulates the per-cache scheme on the same arrival streams as
/// [`crate::online::run_online`] with the same seed. `lagrangian_estimate`
/// holds the realized delay plus weighted dissimilarity per unit time.
pub fn run_per_cache_baseline<T: Scalar>(s: &Scenario<T>, cfg: &PerCacheConfig<T>) -> Result<PerCacheRun<T>> {
    cfg.validate()?;
    let violations = validate_scenario(s);
    if !violations.is_empty() {
        return Err(Error::InvalidScenario(violations));
    }
    let mut streams = RequestStreams::new(cfg.seed, s.num_requests());
    let mut coin_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    coin_rng.set_stream(s.num_requests() as u64);
    let coin = Bernoulli::new(cfg.insert_prob).expect("probability checked above");

    let mut caches = PerCacheState::new(s.num_nodes());
    let mut window = Window::new(cfg.delay_window);
    let mut slots = Vec::with_capacity(cfg.num_slots);
    let t_len = cfg.slot_length;
    for t in 1..=cfg.num_slots {
        let before = caches.clone();
        let arrivals = draw_slot_requests(s, t_len, &mut streams);
        let mut deliveries = Vec::with_capacity(arrivals.len());
        let (mut tot_delay, mut tot_dissim) = (T::zero(), T::zero());
        for &r in &arrivals {
            let d = caches.serve(s, r, cfg.serve_rule);
            tot_delay += d.delay;
            tot_dissim += d.dissimilarity;
            deliveries.push(d);
            if coin.sample(&mut coin_rng) {
                caches.admit(s, r);
            }
        }
        let (avg_delay, avg_dissim) = window.push(tot_delay, tot_dissim, t_len);
        slots.push(PerCacheSlot {
            record: SlotRecord {
                t,
                num_requests: arrivals.len(),
                avg_delay_window: avg_delay,
                dissimilarity_window: avg_dissim,
                lagrangian_estimate: (tot_delay + s.alpha() * tot_dissim) / t_len,
                cache_churn: caches.churn(&before),
            },
            deliveries,
        });
    }
    Ok(PerCacheRun { slots, caches })
}
