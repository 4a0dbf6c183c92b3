//! Online scheme: rates are unknown, requests arrive as Poisson counts per time
//! slot, and the primal/dual updates use stochastic gradient estimates built
//! from the deliveries actually made in the slot.

use std::collections::VecDeque;
use std::io::{self, Write};

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::cost::{delivery_cost, delivery_delay, miss_probability, DualState, PrimalState};
use crate::error::{Error, Result};
use crate::gradients::PathPartials;
use crate::hibsa::{
    apply_dual_step, apply_primal_step, initial_state, round_caching, round_delivery, DeliveryMode,
    DualRule, IntegerSolution,
};
use crate::model::{validate_scenario, ContentId, RequestId, Scenario};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct OnlineConfig<T> {
    pub slot_length: T,
    pub eta_x: T,
    pub eta_q: T,
    pub eta_mu: T,
    pub num_slots: usize,
    pub seed: u64,
    /// Number of trailing slots in the moving delay average.
    pub delay_window: usize,
    pub dual_rule: DualRule,
    pub estimator: GradientEstimator,
}

/// Which (request, content) pairs an arrived request contributes to the
/// stochastic gradient estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientEstimator {
    /// Every content of the arrived request's row; unbiased for all entries.
    #[default]
    RequestRows,
    /// Only the delivered content.
    DeliveredOnly,
}

impl<T: Scalar> Default for OnlineConfig<T> {
    fn default() -> Self {
        Self {
            slot_length: T::one(),
            eta_x: T::lit(1e-3),
            eta_q: T::lit(1e-4),
            eta_mu: T::one(),
            num_slots: 5_000,
            seed: 0,
            delay_window: 10,
            dual_rule: DualRule::default(),
            estimator: GradientEstimator::default(),
        }
    }
}

impl<T: Scalar> OnlineConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: T| v > T::zero() && v.is_finite();
        if !pos(self.slot_length) || !pos(self.eta_x) || !pos(self.eta_q) || !pos(self.eta_mu) {
            return Err(Error::Config("slot length and step sizes must be positive".into()));
        }
        if self.delay_window == 0 {
            return Err(Error::Config("delay window must be at least one slot".into()));
        }
        Ok(())
    }
}

/// One served request instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Delivery<T> {
    pub request: RequestId,
    pub content: ContentId,
    pub delay: T,
    pub dissimilarity: T,
}

/// Per-slot metrics, shared with the per-cache baseline. Column order of the
/// slot-log CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotRecord<T> {
    pub t: usize,
    pub num_requests: usize,
    /// Realized delay per unit time averaged over the trailing window.
    pub avg_delay_window: T,
    /// Realized dissimilarity per unit time averaged over the trailing window.
    pub dissimilarity_window: T,
    pub lagrangian_estimate: T,
    /// Cache entries that changed since the previous slot.
    pub cache_churn: usize,
}

pub const SLOT_CSV_HEADER: &str =
    "t,num_requests,avg_delay_window,dissimilarity_window,lagrangian_estimate,cache_churn";

pub fn write_slot_csv<T: Scalar, W: Write>(records: &[SlotRecord<T>], mut w: W) -> io::Result<()> {
    writeln!(w, "{SLOT_CSV_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.t, r.num_requests, r.avg_delay_window, r.dissimilarity_window, r.lagrangian_estimate, r.cache_churn
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SlotOutcome<T> {
    pub record: SlotRecord<T>,
    pub deliveries: Vec<Delivery<T>>,
    /// Rounded decisions used to serve this slot.
    pub placement: IntegerSolution,
}

#[derive(Debug, Clone)]
pub struct OnlineRun<T> {
    pub slots: Vec<SlotOutcome<T>>,
    pub state: PrimalState<T>,
    pub dual: DualState<T>,
    pub placement: IntegerSolution,
}

impl<T: Scalar> OnlineRun<T> {
    pub fn records(&self) -> Vec<SlotRecord<T>> {
        self.slots.iter().map(|s| s.record).collect()
    }
}

/// Independent Poisson arrival streams, one per request.
pub struct RequestStreams {
    rngs: Vec<ChaCha8Rng>,
}

impl RequestStreams {
    /// Request `r` draws from stream `r` of the generator seeded with `seed`,
    /// so adding requests leaves the other streams unchanged.
    pub fn new(seed: u64, num_requests: usize) -> Self {
        let rngs = (0..num_requests)
            .map(|r| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(r as u64);
                rng
            })
            .collect();
        Self { rngs }
    }
}

/// Draws one slot: `Poisson(lambda_r T)` instances of every request, listed in
/// request order.
pub fn draw_slot_requests<T: Scalar>(s: &Scenario<T>, slot_length: T, streams: &mut RequestStreams) -> Vec<RequestId> {
    let mut out = Vec::new();
    for (r, req) in s.requests().iter().enumerate() {
        let mean = (req.rate * slot_length).as_f64();
        if mean <= 0.0 {
            continue;
        }
        let count = Poisson::new(mean)
            .expect("positive finite Poisson mean")
            .sample(&mut streams.rngs[r]) as usize;
        out.extend(std::iter::repeat_n(r, count));
    }
    out
}

/// Content delivered for request `r`: the largest current fractional delivery
/// value among contents available under the rounded placement.
pub fn serve_request<T: Scalar>(s: &Scenario<T>, cache: &Array2<bool>, q: &Array2<T>, r: RequestId) -> ContentId {
    crate::hibsa::best_available(s, cache, q.row(r).iter().copied(), r)
}

/// Stochastic estimates of the three gradient blocks from the observed
/// `(request, content)` pairs of one slot. Unobserved pairs get zero. Each observation contributes the bracketed per-request term of the
/// corresponding analytic gradient, divided by the slot length.
pub fn stochastic_gradients<T: Scalar>(
    s: &Scenario<T>,
    state: &PrimalState<T>,
    dual: &DualState<T>,
    delivered: &[(RequestId, ContentId)],
    slot_length: T,
) -> (Array2<T>, Array2<T>, Array2<T>) {
    let (nv, nf, nr) = (s.num_nodes(), s.num_contents(), s.num_requests());
    let mut gx = Array2::zeros((nv, nf));
    let mut gq = Array2::zeros((nr, nf));
    let mut parts = PathPartials::with_capacity(16);
    for &(r, g) in delivered {
        let q = state.q[[r, g]];
        let mu = dual.mu[[r, g]];
        parts.compute(s, &state.x, r, g);
        for (j, &v) in s.request(r).path.nodes().iter().enumerate() {
            gx[[v, g]] -= q * (parts.delay[j] + mu * parts.miss[j]) / slot_length;
        }
        gq[[r, g]] += (delivery_cost(s, &state.x, r, g) + mu * miss_probability(s, &state.x, r, g)) / slot_length;
    }
    let gmu = stochastic_grad_mu(s, state, delivered, slot_length);
    (gx, gq, gmu)
}

/// Pairs fed to [`stochastic_gradients`] for one slot, given the arrived
/// request instances and the `(request, delivered content)` pairs.
pub fn observed_pairs<T: Scalar>(
    s: &Scenario<T>,
    estimator: GradientEstimator,
    arrivals: &[RequestId],
    delivered: &[(RequestId, ContentId)],
) -> Vec<(RequestId, ContentId)> {
    match estimator {
        GradientEstimator::DeliveredOnly => delivered.to_vec(),
        GradientEstimator::RequestRows => arrivals
            .iter()
            .flat_map(|&r| (0..s.num_contents()).map(move |g| (r, g)))
            .collect(),
    }
}

pub fn stochastic_grad_mu<T: Scalar>(
    s: &Scenario<T>,
    state: &PrimalState<T>,
    delivered: &[(RequestId, ContentId)],
    slot_length: T,
) -> Array2<T> {
    let mut gmu = Array2::zeros((s.num_requests(), s.num_contents()));
    for &(r, g) in delivered {
        gmu[[r, g]] += state.q[[r, g]] * miss_probability(s, &state.x, r, g) / slot_length;
    }
    gmu
}

fn churn(a: &Array2<bool>, b: &Array2<bool>) -> usize {
    a.iter().zip(b.iter()).filter(|(x, y)| x != y).count()
}

/// Trailing-window average of per-slot totals divided by the slot length.
pub(crate) struct Window<T> {
    len: usize,
    delay: VecDeque<T>,
    dissim: VecDeque<T>,
}

impl<T: Scalar> Window<T> {
    pub fn new(len: usize) -> Self {
        Self {
            len,
            delay: VecDeque::with_capacity(len),
            dissim: VecDeque::with_capacity(len),
        }
    }

    pub fn push(&mut self, delay: T, dissim: T, slot_length: T) -> (T, T) {
        if self.delay.len() == self.len {
            self.delay.pop_front();
            self.dissim.pop_front();
        }
        self.delay.push_back(delay / slot_length);
        self.dissim.push_back(dissim / slot_length);
        let n = T::from_count(self.delay.len());
        (
            self.delay.iter().copied().sum::<T>() / n,
            self.dissim.iter().copied().sum::<T>() / n,
        )
    }
}

/// Runs the online scheme for `cfg.num_slots` slots.
pub fn run_online<T: Scalar>(s: &Scenario<T>, cfg: &OnlineConfig<T>) -> Result<OnlineRun<T>> {
    cfg.validate()?;
    let violations = validate_scenario(s);
    if !violations.is_empty() {
        return Err(Error::InvalidScenario(violations));
    }
    let mut streams = RequestStreams::new(cfg.seed, s.num_requests());
    let mut state = initial_state(s, DeliveryMode::Optimize);
    let mut dual = DualState::zeros(s.num_requests(), s.num_contents());
    let mut cache = round_caching(s, &state.x);
    let mut window = Window::new(cfg.delay_window);
    let mut prev_cache = cache.clone();
    let mut slots = Vec::with_capacity(cfg.num_slots);
    let t_len = cfg.slot_length;

    for t in 1..=cfg.num_slots {
        let arrivals = draw_slot_requests(s, t_len, &mut streams);
        let rounded_x = cache.mapv(|b| if b { T::one() } else { T::zero() });
        let mut deliveries = Vec::with_capacity(arrivals.len());
        let mut pairs = Vec::with_capacity(arrivals.len());
        let (mut tot_delay, mut tot_dissim) = (T::zero(), T::zero());
        for &r in &arrivals {
            let g = serve_request(s, &cache, &state.q, r);
            let delay = delivery_delay(s, &rounded_x, r, g);
            let dissimilarity = s.dissimilarity().get(s.request(r).content, g);
            tot_delay += delay;
            tot_dissim += dissimilarity;
            deliveries.push(Delivery {
                request: r,
                content: g,
                delay,
                dissimilarity,
            });
            pairs.push((r, g));
        }
        let (avg_delay, avg_dissim) = window.push(tot_delay, tot_dissim, t_len);
        let placement = IntegerSolution {
            cache: cache.clone(),
            delivery: round_delivery(s, &cache, &state.q),
        };

        let mut lag_est = T::zero();
        for &(r, g) in &pairs {
            let q = state.q[[r, g]];
            lag_est += q
                * (delivery_cost(s, &state.x, r, g) + dual.mu[[r, g]] * miss_probability(s, &state.x, r, g))
                / t_len;
        }

        let observed = observed_pairs(s, cfg.estimator, &arrivals, &pairs);
        let (gx, gq, _) = stochastic_gradients(s, &state, &dual, &observed, t_len);
        let next = apply_primal_step(s, &state, &gx, Some(&gq), cfg.eta_x, cfg.eta_q);
        let gmu = stochastic_grad_mu(s, &next, &observed, t_len);
        dual = apply_dual_step(&dual, &gmu, t, cfg.eta_mu, cfg.dual_rule);
        state = next;

        slots.push(SlotOutcome {
            record: SlotRecord {
                t,
                num_requests: arrivals.len(),
                avg_delay_window: avg_delay,
                dissimilarity_window: avg_dissim,
                lagrangian_estimate: lag_est,
                cache_churn: churn(&prev_cache, &cache),
            },
            deliveries,
            placement,
        });
        prev_cache = cache;
        cache = round_caching(s, &state.x);
    }

    let delivery = round_delivery(s, &cache, &state.q);
    Ok(OnlineRun {
        slots,
        state,
        dual,
        placement: IntegerSolution { cache, delivery },
    })
}
