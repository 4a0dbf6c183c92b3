//! Partial derivatives of the Lagrangian and a finite-difference oracle.

use ndarray::Array2;

use crate::cost::{delivery_cost, lagrangian, miss_probability, DualState, PrimalState};
use crate::model::{ContentId, RequestId, Scenario};
use crate::scalar::Scalar;

/// Per-position sensitivities of one (request, content) pair along its path.
///
/// `delay[j]` is `-d t / d x_{p_j}` and `miss[j]` is `-d prod / d x_{p_j}` where
/// `prod` is the availability product. Both are nonnegative inside the box.
pub(crate) struct PathPartials<T> {
    pub delay: Vec<T>,
    pub miss: Vec<T>,
}

impl<T: Scalar> PathPartials<T> {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            delay: Vec::with_capacity(n),
            miss: Vec::with_capacity(n),
        }
    }

    pub fn compute(&mut self, s: &Scenario<T>, x: &Array2<T>, r: RequestId, g: ContentId) {
        let nodes = s.request(r).path.nodes();
        let taus = s.hop_delays(r);
        let len = nodes.len();
        let avail = s.availability_len(r, g);
        let y = |k: usize| T::one() - x[[nodes[k], g]];

        self.delay.clear();
        self.delay.resize(len, T::zero());
        self.miss.clear();
        self.miss.resize(len, T::zero());

        // suffix recursions, then scale by the prefix product
        let mut tail = T::zero();
        for j in (0..len.saturating_sub(1)).rev() {
            tail = taus[j] + if j + 2 < len { y(j + 1) * tail } else { T::zero() };
            self.delay[j] = tail;
        }
        let mut suffix = T::one();
        for j in (0..avail).rev() {
            self.miss[j] = suffix;
            suffix *= y(j);
        }
        let mut prefix = T::one();
        for j in 0..len {
            self.delay[j] *= prefix;
            self.miss[j] *= prefix;
            prefix *= y(j);
        }
    }
}

/// `dL/dx_{v,g}` for every node and content. Entries of pinned (source)
/// variables are returned as computed; callers decide whether to use them.
pub fn grad_x<T: Scalar>(s: &Scenario<T>, state: &PrimalState<T>, dual: &DualState<T>) -> Array2<T> {
    let mut grad = Array2::zeros((s.num_nodes(), s.num_contents()));
    let mut parts = PathPartials::with_capacity(16);
    for (r, req) in s.requests().iter().enumerate() {
        for g in 0..s.num_contents() {
            let q = state.q[[r, g]];
            if q == T::zero() || req.rate == T::zero() {
                continue;
            }
            let mu = dual.mu[[r, g]];
            parts.compute(s, &state.x, r, g);
            let w = req.rate * q;
            for (j, &v) in req.path.nodes().iter().enumerate() {
                grad[[v, g]] -= w * (parts.delay[j] + mu * parts.miss[j]);
            }
        }
    }
    grad
}

/// `dL/dq_{r,g} = lambda_r (t_{r,g}(X) + alpha d(f,g) + mu_{r,g} prod_k (1 - x_{p_k,g}))`.
pub fn grad_q<T: Scalar>(s: &Scenario<T>, state: &PrimalState<T>, dual: &DualState<T>) -> Array2<T> {
    let mut grad = Array2::zeros((s.num_requests(), s.num_contents()));
    for (r, req) in s.requests().iter().enumerate() {
        for g in 0..s.num_contents() {
            let mut v = delivery_cost(s, &state.x, r, g);
            let mu = dual.mu[[r, g]];
            if mu != T::zero() {
                v += mu * miss_probability(s, &state.x, r, g);
            }
            grad[[r, g]] = req.rate * v;
        }
    }
    grad
}

/// `dL/dmu_{r,g} = lambda_r h_{r,g}(X, Q)`.
pub fn grad_mu<T: Scalar>(s: &Scenario<T>, state: &PrimalState<T>) -> Array2<T> {
    let mut grad = Array2::zeros((s.num_requests(), s.num_contents()));
    for (r, req) in s.requests().iter().enumerate() {
        for g in 0..s.num_contents() {
            let q = state.q[[r, g]];
            if q != T::zero() {
                grad[[r, g]] = req.rate * q * miss_probability(s, &state.x, r, g);
            }
        }
    }
    grad
}

/// Variable block selector for [`fd_gradient`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    X,
    Q,
    Mu,
}

/// Central-difference approximation of one gradient block of the Lagrangian.
///
/// Perturbed points are clamped to `[0, 1]` for `X`/`Q` and to `[0, inf)` for
/// `mu`; the difference quotient uses the actual clamped spacing.
pub fn fd_gradient<T: Scalar>(
    s: &Scenario<T>,
    state: &PrimalState<T>,
    dual: &DualState<T>,
    which: Block,
    step: T,
) -> Array2<T> {
    let shape = match which {
        Block::X => state.x.dim(),
        Block::Q => state.q.dim(),
        Block::Mu => dual.mu.dim(),
    };
    let mut out = Array2::zeros(shape);
    let mut st = state.clone();
    let mut du = dual.clone();
    for i in 0..shape.0 {
        for j in 0..shape.1 {
            let orig = match which {
                Block::X => st.x[[i, j]],
                Block::Q => st.q[[i, j]],
                Block::Mu => du.mu[[i, j]],
            };
            let hi = match which {
                Block::Mu => orig + step,
                _ => (orig + step).min(T::one()),
            };
            let lo = (orig - step).max(T::zero());
            set(&mut st, &mut du, which, i, j, hi);
            let f_hi = lagrangian(s, &st, &du);
            set(&mut st, &mut du, which, i, j, lo);
            let f_lo = lagrangian(s, &st, &du);
            set(&mut st, &mut du, which, i, j, orig);
            out[[i, j]] = if hi > lo { (f_hi - f_lo) / (hi - lo) } else { T::zero() };
        }
    }
    out
}

fn set<T: Scalar>(st: &mut PrimalState<T>, du: &mut DualState<T>, which: Block, i: usize, j: usize, v: T) {
    match which {
        Block::X => st.x[[i, j]] = v,
        Block::Q => st.q[[i, j]] = v,
        Block::Mu => du.mu[[i, j]] = v,
    }
}
