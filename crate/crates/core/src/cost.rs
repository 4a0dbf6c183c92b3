//! Delay, delivery cost, objective, availability constraint and Lagrangian.
//!
//! Every aggregate is a fold over requests in index order, so results are
//! reproducible bit for bit.

use ndarray::Array2;

use crate::model::{ContentId, RequestId, Scenario};
use crate::scalar::Scalar;

/// Relaxed caching matrix `X` (`|V| x |F|`) and delivery matrix `Q` (`|R| x |F|`).
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalState<T> {
    pub x: Array2<T>,
    pub q: Array2<T>,
}

/// Multipliers of the availability constraints, one per (request, content).
#[derive(Debug, Clone, PartialEq)]
pub struct DualState<T> {
    pub mu: Array2<T>,
}

impl<T: Scalar> DualState<T> {
    pub fn zeros(num_requests: usize, num_contents: usize) -> Self {
        Self {
            mu: Array2::zeros((num_requests, num_contents)),
        }
    }

    /// Euclidean norm of the multiplier matrix.
    pub fn norm(&self) -> T {
        self.mu.iter().map(|&m| m * m).sum::<T>().sqrt()
    }
}

/// Delay of delivering `content` for request `r`:
/// `sum_k tau_{p_{k+1},p_k} prod_{k' <= k} (1 - x_{p_k', content})`.
pub fn delivery_delay<T: Scalar>(s: &Scenario<T>, x: &Array2<T>, r: RequestId, content: ContentId) -> T {
    let nodes = s.request(r).path.nodes();
    let mut miss = T::one();
    let mut total = T::zero();
    for (k, &tau) in s.hop_delays(r).iter().enumerate() {
        miss *= T::one() - x[[nodes[k], content]];
        total += tau * miss;
    }
    total
}

/// Delay plus `alpha`-weighted dissimilarity.
pub fn delivery_cost<T: Scalar>(s: &Scenario<T>, x: &Array2<T>, r: RequestId, content: ContentId) -> T {
    let wanted = s.request(r).content;
    delivery_delay(s, x, r, content) + s.alpha() * s.dissimilarity().get(wanted, content)
}

/// `prod_k (1 - x_{p_k, content})` over the nodes that count for availability.
pub fn miss_probability<T: Scalar>(s: &Scenario<T>, x: &Array2<T>, r: RequestId, content: ContentId) -> T {
    let nodes = s.request(r).path.nodes();
    nodes[..s.availability_len(r, content)]
        .iter()
        .fold(T::one(), |acc, &v| acc * (T::one() - x[[v, content]]))
}

/// `h = q_{r,content} * prod_k (1 - x_{p_k,content})`; zero when the delivered
/// content is present somewhere along the path.
pub fn availability_violation<T: Scalar>(
    s: &Scenario<T>,
    state: &PrimalState<T>,
    r: RequestId,
    content: ContentId,
) -> T {
    state.q[[r, content]] * miss_probability(s, &state.x, r, content)
}

/// Rate-weighted sum over requests and delivered contents of `weight(r, content)`.
fn weighted_sum<T: Scalar>(
    s: &Scenario<T>,
    state: &PrimalState<T>,
    mut weight: impl FnMut(RequestId, ContentId) -> T,
) -> T {
    let mut total = T::zero();
    for (r, req) in s.requests().iter().enumerate() {
        let mut inner = T::zero();
        for g in 0..s.num_contents() {
            let q = state.q[[r, g]];
            if q != T::zero() {
                inner += q * weight(r, g);
            }
        }
        total += req.rate * inner;
    }
    total
}

/// Weighted sum of delay and dissimilarity, `c(X, Q)`.
pub fn objective<T: Scalar>(s: &Scenario<T>, state: &PrimalState<T>) -> T {
    weighted_sum(s, state, |r, g| delivery_cost(s, &state.x, r, g))
}

/// Expected delay `D(X, Q)`.
pub fn expected_delay<T: Scalar>(s: &Scenario<T>, state: &PrimalState<T>) -> T {
    weighted_sum(s, state, |r, g| delivery_delay(s, &state.x, r, g))
}

/// Rate-weighted dissimilarity of the delivered contents, without `alpha`.
pub fn dissimilarity_cost<T: Scalar>(s: &Scenario<T>, state: &PrimalState<T>) -> T {
    weighted_sum(s, state, |r, g| s.dissimilarity().get(s.request(r).content, g))
}

/// `L(X, Q, mu) = c(X, Q) + sum_r lambda_r sum_g mu_{r,g} h_{r,g}(X, Q)`.
pub fn lagrangian<T: Scalar>(s: &Scenario<T>, state: &PrimalState<T>, dual: &DualState<T>) -> T {
    let mut total = T::zero();
    for (r, req) in s.requests().iter().enumerate() {
        let mut inner = T::zero();
        for g in 0..s.num_contents() {
            let q = state.q[[r, g]];
            if q == T::zero() {
                continue;
            }
            let mut term = delivery_cost(s, &state.x, r, g);
            let mu = dual.mu[[r, g]];
            if mu != T::zero() {
                term += mu * miss_probability(s, &state.x, r, g);
            }
            inner += q * term;
        }
        total += req.rate * inner;
    }
    total
}

/// Largest availability violation over all (request, content) pairs.
pub fn max_violation<T: Scalar>(s: &Scenario<T>, state: &PrimalState<T>) -> T {
    let mut worst = T::zero();
    for r in 0..s.num_requests() {
        for g in 0..s.num_contents() {
            if state.q[[r, g]] != T::zero() {
                worst = worst.max(availability_violation(s, state, r, g));
            }
        }
    }
    worst
}
