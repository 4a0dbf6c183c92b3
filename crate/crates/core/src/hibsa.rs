//! Offline solver: alternating projected gradient descent on `(X, Q)` and
//! perturbed projected gradient ascent on `mu`, followed by greedy rounding.

use std::io::{self, Write};

use ndarray::{Array2, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cost::{
    dissimilarity_cost, expected_delay, lagrangian, max_violation, miss_probability, objective,
    DualState, PrimalState,
};
use crate::error::{Error, Result};
use crate::gradients::{grad_mu, grad_q, grad_x};
use crate::model::{validate_scenario, ContentId, Scenario};
use crate::projection::project_rows;
use crate::scalar::Scalar;

/// Coefficient applied to `mu(n)` in the dual step, with `g(n) = 1 / (eta_mu n^{1/4})`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DualRule {
    /// `(1 - g(n) eta_mu)`: the maximiser of the proximal dual model with the
    /// `-g(n)/2 |mu|^2` regulariser.
    #[default]
    Damped,
    /// `(1 + g(n) eta_mu)`, growing without bound while any multiplier is positive.
    Amplified,
}

/// How the delivery block is treated during a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeliveryMode {
    #[default]
    Optimize,
    /// `Q` fixed to the identity delivery (requested content only).
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig<T> {
    pub eta_s: T,
    pub eta_mu: T,
    pub delta: T,
    pub max_iters: usize,
    pub seed: u64,
    /// Start from a random feasible point instead of the uniform one.
    pub random_init: bool,
    pub dual_rule: DualRule,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            eta_s: T::lit(1e-3),
            eta_mu: T::one(),
            delta: T::lit(1e-6),
            max_iters: 50_000,
            seed: 0,
            random_init: false,
            dual_rule: DualRule::default(),
        }
    }
}

impl<T: Scalar> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: T| v > T::zero() && v.is_finite();
        if !pos(self.eta_s) || !pos(self.eta_mu) || !pos(self.delta) {
            return Err(Error::Config("step sizes and delta must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord<T> {
    pub n: usize,
    pub lagrangian: T,
    pub objective: T,
    pub expected_delay: T,
    pub dissimilarity_cost: T,
    pub max_h: T,
    pub dual_norm: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// `|L(n+1) - L(n)| <= delta`.
    Converged,
    MaxIters,
    /// The Lagrangian became non-finite; the last finite iterate is returned.
    Diverged,
}

#[derive(Debug, Clone)]
pub struct SolveTrace<T> {
    pub records: Vec<IterRecord<T>>,
    pub iterations: usize,
    pub stop: StopReason,
}

impl<T: Scalar> SolveTrace<T> {
    pub const CSV_HEADER: &'static str =
        "n,lagrangian,objective,expected_delay,dissimilarity_cost,max_h,dual_norm";

    pub fn converged(&self) -> bool {
        self.stop == StopReason::Converged
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.n,
                r.lagrangian,
                r.objective,
                r.expected_delay,
                r.dissimilarity_cost,
                r.max_h,
                r.dual_norm
            )?;
        }
        Ok(())
    }
}

/// Integer placement and delivery decisions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegerSolution {
    /// `cache[[v, f]]` is true when node `v` stores content `f` (sources included).
    pub cache: Array2<bool>,
    /// Content delivered for each request.
    pub delivery: Vec<ContentId>,
}

impl IntegerSolution {
    /// The solution as a 0/1 primal state, for evaluation with the cost functions.
    pub fn to_state<T: Scalar>(&self) -> PrimalState<T> {
        let x = self.cache.mapv(|b| if b { T::one() } else { T::zero() });
        let mut q = Array2::zeros((self.delivery.len(), self.cache.ncols()));
        for (r, &g) in self.delivery.iter().enumerate() {
            q[[r, g]] = T::one();
        }
        PrimalState { x, q }
    }
}

#[derive(Debug, Clone)]
pub struct OfflineSolution<T> {
    pub fractional: PrimalState<T>,
    pub dual: DualState<T>,
    pub integer: IntegerSolution,
    pub trace: SolveTrace<T>,
}

/// Deterministic feasible starting point: uniform capacity-tight caches and
/// uniform delivery rows.
pub fn initial_state<T: Scalar>(s: &Scenario<T>, mode: DeliveryMode) -> PrimalState<T> {
    let (nv, nf, nr) = (s.num_nodes(), s.num_contents(), s.num_requests());
    let mut x = Array2::zeros((nv, nf));
    for v in 0..nv {
        let pins = (0..nf).filter(|&f| s.is_pinned(v, f)).count();
        let free = nf - pins;
        let fill = if free == 0 {
            T::zero()
        } else {
            (T::from_count(s.capacities()[v]) / T::from_count(free)).min(T::one())
        };
        for f in 0..nf {
            x[[v, f]] = if s.is_pinned(v, f) { T::one() } else { fill };
        }
    }
    let q = match mode {
        DeliveryMode::Optimize => Array2::from_elem((nr, nf), T::one() / T::from_count(nf)),
        DeliveryMode::Identity => identity_delivery(s),
    };
    PrimalState { x, q }
}

fn random_state<T: Scalar>(s: &Scenario<T>, mode: DeliveryMode, seed: u64) -> PrimalState<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Array2::from_shape_fn((s.num_nodes(), s.num_contents()), |_| T::lit(rng.random::<f64>()));
    let mut q = match mode {
        DeliveryMode::Optimize => {
            Array2::from_shape_fn((s.num_requests(), s.num_contents()), |_| T::lit(rng.random::<f64>()))
        }
        DeliveryMode::Identity => identity_delivery(s),
    };
    project_rows(&mut x, &mut q, s.capacities(), s.pinned());
    PrimalState { x, q }
}

pub(crate) fn identity_delivery<T: Scalar>(s: &Scenario<T>) -> Array2<T> {
    let mut q = Array2::zeros((s.num_requests(), s.num_contents()));
    for (r, req) in s.requests().iter().enumerate() {
        q[[r, req.content]] = T::one();
    }
    q
}

/// Gradient step on both primal blocks followed by the row-wise projection.
/// Gradient entries of pinned cache variables are zeroed before the step.
pub(crate) fn apply_primal_step<T: Scalar>(
    s: &Scenario<T>,
    state: &PrimalState<T>,
    gx: &Array2<T>,
    gq: Option<&Array2<T>>,
    eta_x: T,
    eta_q: T,
) -> PrimalState<T> {
    let mut x = state.x.clone();
    Zip::from(&mut x)
        .and(gx)
        .and(s.pinned())
        .for_each(|xv, &g, &pin| {
            if !pin {
                *xv -= eta_x * g;
            }
        });
    let mut q = state.q.clone();
    if let Some(gq) = gq {
        Zip::from(&mut q).and(gq).for_each(|qv, &g| *qv -= eta_q * g);
    }
    project_rows(&mut x, &mut q, s.capacities(), s.pinned());
    PrimalState { x, q }
}

/// `S(n+1) = P(S(n) - eta_s grad_S L(S(n), mu(n)))`.
pub fn primal_step<T: Scalar>(
    s: &Scenario<T>,
    state: &PrimalState<T>,
    dual: &DualState<T>,
    cfg: &SolverConfig<T>,
) -> PrimalState<T> {
    primal_step_with(s, state, dual, cfg, DeliveryMode::Optimize)
}

fn primal_step_with<T: Scalar>(
    s: &Scenario<T>,
    state: &PrimalState<T>,
    dual: &DualState<T>,
    cfg: &SolverConfig<T>,
    mode: DeliveryMode,
) -> PrimalState<T> {
    let gx = grad_x(s, state, dual);
    match mode {
        DeliveryMode::Optimize => {
            let gq = grad_q(s, state, dual);
            apply_primal_step(s, state, &gx, Some(&gq), cfg.eta_s, cfg.eta_s)
        }
        DeliveryMode::Identity => apply_primal_step(s, state, &gx, None, cfg.eta_s, cfg.eta_s),
    }
}

/// Perturbation coefficient `g(n) = 1 / (eta_mu n^{1/4})`, `n >= 1`.
pub fn perturbation<T: Scalar>(eta_mu: T, n: usize) -> T {
    T::one() / (eta_mu * T::from_count(n.max(1)).powf(T::lit(0.25)))
}

/// Applies the perturbed ascent step to `mu` given a dual gradient.
pub(crate) fn apply_dual_step<T: Scalar>(
    dual: &DualState<T>,
    grad: &Array2<T>,
    n: usize,
    eta_mu: T,
    rule: DualRule,
) -> DualState<T> {
    let g = perturbation(eta_mu, n) * eta_mu;
    let factor = match rule {
        DualRule::Damped => T::one() - g,
        DualRule::Amplified => T::one() + g,
    };
    let mut mu = dual.mu.clone();
    Zip::from(&mut mu)
        .and(grad)
        .for_each(|m, &d| *m = (factor * *m + eta_mu * d).max(T::zero()));
    DualState { mu }
}

/// `mu(n+1) = (c(n) mu(n) + eta_mu grad_mu L(S(n+1)))^+` where `state` is `S(n+1)`.
pub fn dual_step<T: Scalar>(
    s: &Scenario<T>,
    state: &PrimalState<T>,
    dual: &DualState<T>,
    n: usize,
    cfg: &SolverConfig<T>,
) -> DualState<T> {
    let g = grad_mu(s, state);
    apply_dual_step(dual, &g, n, cfg.eta_mu, cfg.dual_rule)
}

fn record<T: Scalar>(s: &Scenario<T>, n: usize, st: &PrimalState<T>, du: &DualState<T>, lag: T) -> IterRecord<T> {
    IterRecord {
        n,
        lagrangian: lag,
        objective: objective(s, st),
        expected_delay: expected_delay(s, st),
        dissimilarity_cost: dissimilarity_cost(s, st),
        max_h: max_violation(s, st),
        dual_norm: du.norm(),
    }
}

/// Runs the offline solver and rounds the result.
pub fn solve_offline<T: Scalar>(s: &Scenario<T>, cfg: &SolverConfig<T>) -> Result<OfflineSolution<T>> {
    solve_with_mode(s, cfg, DeliveryMode::Optimize)
}

pub fn solve_with_mode<T: Scalar>(
    s: &Scenario<T>,
    cfg: &SolverConfig<T>,
    mode: DeliveryMode,
) -> Result<OfflineSolution<T>> {
    cfg.validate()?;
    let violations = validate_scenario(s);
    if !violations.is_empty() {
        return Err(Error::InvalidScenario(violations));
    }

    let mut state = if cfg.random_init {
        random_state(s, mode, cfg.seed)
    } else {
        initial_state(s, mode)
    };
    let mut dual = DualState::zeros(s.num_requests(), s.num_contents());
    let mut lag = lagrangian(s, &state, &dual);
    let mut records = Vec::new();
    let mut stop = StopReason::MaxIters;
    let mut iterations = 0;

    for n in 1..=cfg.max_iters {
        let next = primal_step_with(s, &state, &dual, cfg, mode);
        let next_dual = dual_step(s, &next, &dual, n, cfg);
        let next_lag = lagrangian(s, &next, &next_dual);
        if !next_lag.is_finite() {
            stop = StopReason::Diverged;
            break;
        }
        iterations = n;
        records.push(record(s, n, &next, &next_dual, next_lag));
        let change = (next_lag - lag).abs();
        state = next;
        dual = next_dual;
        lag = next_lag;
        if change <= cfg.delta {
            stop = StopReason::Converged;
            break;
        }
    }

    let cache = round_caching(s, &state.x);
    let delivery = match mode {
        DeliveryMode::Optimize => round_delivery(s, &cache, &state.q),
        DeliveryMode::Identity => s.requests().iter().map(|r| r.content).collect(),
    };
    Ok(OfflineSolution {
        fractional: state,
        dual,
        integer: IntegerSolution { cache, delivery },
        trace: SolveTrace {
            records,
            iterations,
            stop,
        },
    })
}

/// Greedy cache rounding: each node keeps its sources and fills its capacity
/// with the non-source contents of largest fractional value (smaller id on ties).
pub fn round_caching<T: Scalar>(s: &Scenario<T>, x: &Array2<T>) -> Array2<bool> {
    let (nv, nf) = (s.num_nodes(), s.num_contents());
    let mut cache = Array2::from_elem((nv, nf), false);
    let mut order: Vec<ContentId> = Vec::with_capacity(nf);
    for v in 0..nv {
        order.clear();
        for f in 0..nf {
            if s.is_pinned(v, f) {
                cache[[v, f]] = true;
            } else {
                order.push(f);
            }
        }
        // stable sort keeps ascending ids among equal values
        order.sort_by(|&a, &b| {
            x[[v, b]]
                .partial_cmp(&x[[v, a]])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        for &f in order.iter().take(s.capacities()[v]) {
            cache[[v, f]] = true;
        }
    }
    cache
}

/// Whether `content` is available to request `r` under an integer placement.
pub fn is_available<T: Scalar>(s: &Scenario<T>, cache: &Array2<bool>, r: usize, content: ContentId) -> bool {
    let req = s.request(r);
    content == req.content
        || req.path.nodes()[..s.availability_len(r, content)]
            .iter()
            .any(|&v| cache[[v, content]])
}

/// Largest fractional delivery value among contents available under `cache`;
/// smaller id on ties, requested content as the fallback.
pub fn best_available<T: Scalar>(
    s: &Scenario<T>,
    cache: &Array2<bool>,
    q_row: impl IntoIterator<Item = T>,
    r: usize,
) -> ContentId {
    let mut best: Option<(ContentId, T)> = None;
    for (g, q) in q_row.into_iter().enumerate() {
        if !is_available(s, cache, r, g) {
            continue;
        }
        if best.is_none_or(|(_, b)| q > b) {
            best = Some((g, q));
        }
    }
    best.map_or(s.request(r).content, |(g, _)| g)
}

/// Greedy delivery rounding against an integer placement.
pub fn round_delivery<T: Scalar>(s: &Scenario<T>, cache: &Array2<bool>, q: &Array2<T>) -> Vec<ContentId> {
    (0..s.num_requests())
        .map(|r| best_available(s, cache, q.row(r).iter().copied(), r))
        .collect()
}

/// Checks every integer constraint: sources cached, capacities respected and
/// each delivered content available on its path.
pub fn is_integer_feasible<T: Scalar>(s: &Scenario<T>, sol: &IntegerSolution) -> bool {
    let (nv, nf) = (s.num_nodes(), s.num_contents());
    if sol.cache.dim() != (nv, nf) || sol.delivery.len() != s.num_requests() {
        return false;
    }
    for v in 0..nv {
        let mut used = 0;
        for f in 0..nf {
            if s.is_pinned(v, f) {
                if !sol.cache[[v, f]] {
                    return false;
                }
            } else if sol.cache[[v, f]] {
                used += 1;
            }
        }
        if used > s.capacities()[v] {
            return false;
        }
    }
    let st: PrimalState<T> = sol.to_state();
    sol.delivery.iter().enumerate().all(|(r, &g)| {
        g < nf && miss_probability(s, &st.x, r, g) == T::zero()
    })
}
