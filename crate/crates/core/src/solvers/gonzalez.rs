//! Farthest-first traversal.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Farthest-first reordering of a point set.
///
/// `insertion_radius[q - 1]` is the distance from the `q`-th ordered point
/// (1-based, `q >= 2`) to its nearest predecessor, so the vector has one entry
/// fewer than `order`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GonzalezOrder {
    pub order: Vec<usize>,
    pub insertion_radius: Vec<f64>,
}

impl GonzalezOrder {
    /// Distance from the `position`-th ordered point (1-based) to its
    /// predecessors; zero past the end of the computed order.
    pub fn radius_at(&self, position: usize) -> f64 {
        if position < 2 {
            return f64::INFINITY;
        }
        self.insertion_radius.get(position - 2).copied().unwrap_or(0.0)
    }
}

/// Orders `n` items so that every prefix is a 2-approximate center set.
/// Seeds with item 0; ties go to the lowest index.
pub fn gonzalez_order<D>(n: usize, dist: D) -> Result<GonzalezOrder>
where
    D: Fn(usize, usize) -> f64,
{
    gonzalez_prefix(n, n, dist)
}

/// The first `min(limit, n)` points of the farthest-first order, using
/// `O(limit * n)` distance evaluations.
pub fn gonzalez_prefix<D>(n: usize, limit: usize, dist: D) -> Result<GonzalezOrder>
where
    D: Fn(usize, usize) -> f64,
{
    if n == 0 {
        return Err(Error::DegenerateInstance("farthest-first traversal of an empty set".into()));
    }
    let limit = limit.clamp(1, n);
    let mut order = Vec::with_capacity(limit);
    let mut radius = Vec::with_capacity(limit - 1);
    let mut chosen = vec![false; n];
    let mut gap: Vec<f64> = (0..n).map(|i| dist(0, i)).collect();
    order.push(0);
    chosen[0] = true;
    for _ in 1..limit {
        let mut next = None;
        let mut best = f64::NEG_INFINITY;
        for i in 0..n {
            if !chosen[i] && gap[i] > best {
                best = gap[i];
                next = Some(i);
            }
        }
        let p = next.expect("unchosen point exists");
        chosen[p] = true;
        order.push(p);
        radius.push(best);
        for i in 0..n {
            if !chosen[i] {
                gap[i] = gap[i].min(dist(p, i));
            }
        }
    }
    Ok(GonzalezOrder {
        order,
        insertion_radius: radius,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64]) -> impl Fn(usize, usize) -> f64 + '_ {
        move |a, b| (xs[a] - xs[b]).abs()
    }

    #[test]
    fn hand_simulated_line() {
        let xs = [0.0, 1.0, 10.0, 11.0, 100.0];
        let g = gonzalez_order(xs.len(), line(&xs)).unwrap();
        assert_eq!(g.order, vec![0, 4, 3, 1, 2]);
        assert_eq!(g.insertion_radius, vec![100.0, 11.0, 1.0, 1.0]);
    }

    #[test]
    fn tiny_inputs() {
        let g = gonzalez_order(1, |_, _| 0.0).unwrap();
        assert_eq!(g.order, vec![0]);
        assert!(g.insertion_radius.is_empty());

        let xs = [2.0, 5.0];
        let g = gonzalez_order(2, line(&xs)).unwrap();
        assert_eq!(g.order, vec![0, 1]);
        assert_eq!(g.insertion_radius, vec![3.0]);

        assert!(gonzalez_order(0, |_, _| 0.0).is_err());
    }

    #[test]
    fn prefix_matches_full_order() {
        let xs = [0.0, 1.0, 10.0, 11.0, 100.0];
        let g = gonzalez_prefix(xs.len(), 3, line(&xs)).unwrap();
        assert_eq!(g.order, vec![0, 4, 3]);
        assert_eq!(g.insertion_radius, vec![100.0, 11.0]);
    }

    #[test]
    fn radius_lookup() {
        let xs = [0.0, 1.0, 10.0, 11.0, 100.0];
        let g = gonzalez_order(xs.len(), line(&xs)).unwrap();
        assert_eq!(g.radius_at(2), 100.0);
        assert_eq!(g.radius_at(5), 1.0);
        assert_eq!(g.radius_at(6), 0.0);
    }
}
