//! Exhaustive search over integer decisions, for instances small enough to
//! enumerate every placement.

use ndarray::Array2;

use crate::cost::delivery_cost;
use crate::hibsa::{is_available, IntegerSolution};
use crate::model::{ContentId, Scenario};
use crate::scalar::Scalar;

/// Upper bound on the number of placements [`exhaustive_optimum`] will visit.
pub const MAX_PLACEMENTS: u128 = 1 << 22;

/// Minimum-objective integer solution, or `None` when the placement space
/// exceeds [`MAX_PLACEMENTS`]. For a fixed placement every request independently
/// takes its cheapest available content, so only placements are enumerated.
/// Ties keep the first placement found in enumeration order.
pub fn exhaustive_optimum<T: Scalar>(s: &Scenario<T>) -> Option<(IntegerSolution, T)> {
    let (nv, nf) = (s.num_nodes(), s.num_contents());
    let choices: Vec<Vec<Vec<ContentId>>> = (0..nv)
        .map(|v| {
            let free: Vec<ContentId> = (0..nf).filter(|&f| !s.is_pinned(v, f)).collect();
            subsets_up_to(&free, s.capacities()[v])
        })
        .collect();
    let total = choices.iter().try_fold(1u128, |acc, c| acc.checked_mul(c.len() as u128))?;
    if total > MAX_PLACEMENTS {
        return None;
    }

    let mut idx = vec![0usize; nv];
    let mut best: Option<(IntegerSolution, T)> = None;
    loop {
        let mut cache = s.pinned().clone();
        for (v, &i) in idx.iter().enumerate() {
            for &f in &choices[v][i] {
                cache[[v, f]] = true;
            }
        }
        let (delivery, cost) = cheapest_delivery(s, &cache);
        if best.as_ref().is_none_or(|(_, b)| cost < *b) {
            best = Some((IntegerSolution { cache, delivery }, cost));
        }

        // odometer increment
        let mut v = 0;
        loop {
            if v == nv {
                return best;
            }
            idx[v] += 1;
            if idx[v] < choices[v].len() {
                break;
            }
            idx[v] = 0;
            v += 1;
        }
    }
}

fn cheapest_delivery<T: Scalar>(s: &Scenario<T>, cache: &Array2<bool>) -> (Vec<ContentId>, T) {
    let x = cache.mapv(|b| if b { T::one() } else { T::zero() });
    let mut total = T::zero();
    let delivery = (0..s.num_requests())
        .map(|r| {
            let mut best = (s.request(r).content, T::infinity());
            for g in 0..s.num_contents() {
                if is_available(s, cache, r, g) {
                    let c = delivery_cost(s, &x, r, g);
                    if c < best.1 {
                        best = (g, c);
                    }
                }
            }
            total += s.request(r).rate * best.1;
            best.0
        })
        .collect();
    (delivery, total)
}

fn subsets_up_to(items: &[ContentId], k: usize) -> Vec<Vec<ContentId>> {
    let mut out = vec![Vec::new()];
    for &it in items {
        let grown: Vec<Vec<ContentId>> = out
            .iter()
            .filter(|s| s.len() < k)
            .map(|s| {
                let mut t = s.clone();
                t.push(it);
                t
            })
            .collect();
        out.extend(grown);
    }
    out
}
