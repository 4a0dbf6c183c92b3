//! Euclidean projections onto the relaxed feasible sets.
//!
//! The feasible set of `(X, Q)` is a product over cache rows and delivery rows,
//! so projecting row by row gives the exact joint projection.

use ndarray::{Array2, ArrayViewMut1};

use crate::scalar::Scalar;

const BISECTION_TOL: f64 = 1e-10;
const BISECTION_MAX_ITERS: usize = 200;

/// Projects a cache row onto `{y in [0,1]^F : sum of unpinned y <= capacity}`
/// with pinned coordinates fixed to one.
pub fn project_cache_row<T: Scalar>(x: &[T], capacity: usize, pinned: &[bool]) -> Vec<T> {
    let mut out = x.to_vec();
    project_cache_row_in_place(&mut out, capacity, pinned);
    out
}

pub fn project_cache_row_in_place<T: Scalar>(x: &mut [T], capacity: usize, pinned: &[bool]) {
    debug_assert_eq!(x.len(), pinned.len());
    let cap = T::from_count(capacity);
    let shifted_sum = |theta: T| -> T {
        x.iter()
            .zip(pinned)
            .filter(|(_, &p)| !p)
            .map(|(&v, _)| clip01(v - theta))
            .sum()
    };
    let mut theta = T::zero();
    if shifted_sum(T::zero()) > cap {
        // The clipped sum is nonincreasing in theta and vanishes at max(x).
        let mut a = T::zero();
        let mut b = x
            .iter()
            .zip(pinned)
            .filter(|(_, &p)| !p)
            .fold(T::zero(), |m, (&v, _)| m.max(v));
        let tol = T::lit(BISECTION_TOL);
        for _ in 0..BISECTION_MAX_ITERS {
            if b - a <= tol {
                break;
            }
            let mid = (a + b) / T::lit(2.0);
            if shifted_sum(mid) > cap {
                a = mid;
            } else {
                b = mid;
            }
        }
        theta = (a + b) / T::lit(2.0);
        theta = polish_theta(x, pinned, theta, cap).unwrap_or(theta);
    }
    for (v, &p) in x.iter_mut().zip(pinned) {
        *v = if p { T::one() } else { clip01(*v - theta) };
    }
}

/// Solves the linear piece containing `theta` exactly.
fn polish_theta<T: Scalar>(x: &[T], pinned: &[bool], theta: T, cap: T) -> Option<T> {
    let row = || x.iter().copied().zip(pinned.iter().copied()).filter(|(_, p)| !p);
    let mut free_sum = T::zero();
    let mut free = 0usize;
    let mut upper = 0usize;
    for (v, _) in row() {
        let s = v - theta;
        if s >= T::one() {
            upper += 1;
        } else if s > T::zero() {
            free += 1;
            free_sum += v;
        }
    }
    if free == 0 {
        return None;
    }
    let exact = (free_sum + T::from_count(upper) - cap) / T::from_count(free);
    // accept only if the active set is unchanged
    let consistent = exact >= T::zero() && row().all(|(v, _)| classify(v - theta) == classify(v - exact));
    consistent.then_some(exact)
}

fn classify<T: Scalar>(s: T) -> i8 {
    if s >= T::one() {
        1
    } else if s > T::zero() {
        0
    } else {
        -1
    }
}

#[inline]
fn clip01<T: Scalar>(v: T) -> T {
    v.max(T::zero()).min(T::one())
}

/// Projects a delivery row onto the probability simplex (sort and threshold).
pub fn project_delivery_row<T: Scalar>(q: &[T]) -> Vec<T> {
    let mut out = q.to_vec();
    project_simplex_in_place(&mut out);
    out
}

pub fn project_simplex_in_place<T: Scalar>(q: &mut [T]) {
    if q.is_empty() {
        return;
    }
    let mut sorted = q.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cumsum = T::zero();
    let mut theta = T::zero();
    for (i, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - T::one()) / T::from_count(i + 1);
        if u - t > T::zero() {
            theta = t;
        } else {
            break;
        }
    }
    for v in q.iter_mut() {
        *v = (*v - theta).max(T::zero());
    }
}

/// Elementwise `max(0, mu)`.
pub fn clamp_dual<T: Scalar>(mu: &Array2<T>) -> Array2<T> {
    mu.mapv(|m| m.max(T::zero()))
}

pub(crate) fn project_rows<T: Scalar>(
    x: &mut Array2<T>,
    q: &mut Array2<T>,
    capacities: &[usize],
    pinned: &Array2<bool>,
) {
    let mut row_buf = Vec::new();
    for (v, mut row) in x.rows_mut().into_iter().enumerate() {
        let pins = pinned.row(v);
        row_buf.clear();
        row_buf.extend(row.iter().copied());
        let pins: Vec<bool> = pins.iter().copied().collect();
        project_cache_row_in_place(&mut row_buf, capacities[v], &pins);
        write_back(&mut row, &row_buf);
    }
    for mut row in q.rows_mut() {
        row_buf.clear();
        row_buf.extend(row.iter().copied());
        project_simplex_in_place(&mut row_buf);
        write_back(&mut row, &row_buf);
    }
}

fn write_back<T: Scalar>(row: &mut ArrayViewMut1<'_, T>, values: &[T]) {
    for (dst, &src) in row.iter_mut().zip(values) {
        *dst = src;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-10)
    }

    #[test]
    fn cache_row_clip_suffices() {
        let y = project_cache_row(&[1.2, 0.5, -0.1], 2, &[false; 3]);
        assert!(close(&y, &[1.0, 0.5, 0.0]));
    }

    #[test]
    fn cache_row_symmetric_shift() {
        let y = project_cache_row(&[1.0, 1.0, 1.0], 1, &[false; 3]);
        assert!(close(&y, &[1.0 / 3.0; 3]));
    }

    #[test]
    fn cache_row_pinned() {
        let y = project_cache_row(&[0.9, 0.2], 1, &[true, false]);
        assert!(close(&y, &[1.0, 0.2]));
        let z = project_cache_row(&[0.9, 0.2, 0.7], 0, &[true, false, false]);
        assert!(close(&z, &[1.0, 0.0, 0.0]));
    }

    #[test]
    fn simplex_examples() {
        assert!(close(&project_delivery_row(&[0.8, 0.8]), &[0.5, 0.5]));
        assert!(close(&project_delivery_row(&[2.0, 0.0, 0.0]), &[1.0, 0.0, 0.0]));
        assert!(close(&project_delivery_row(&[0.2, 0.3, 0.5]), &[0.2, 0.3, 0.5]));
    }

    #[test]
    fn dual_clamp() {
        assert_eq!(clamp_dual(&array![[-1.0, 2.0]]), array![[0.0, 2.0]]);
        assert_eq!(clamp_dual(&array![[-1.0, -2.0]]), array![[0.0, 0.0]]);
        assert_eq!(clamp_dual(&array![[1.0, 2.0]]), array![[1.0, 2.0]]);
    }
}
