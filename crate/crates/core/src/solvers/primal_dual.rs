//! Facility-location primal-dual with a uniform opening cost and early
//! stopping once only `t` copies of the clients remain unprocessed.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::instance::CostTable;
use crate::metric::Objective;

/// Dual values at the end of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualCertificate {
    /// Freeze time of each client (the stopping time for unprocessed mass).
    pub alpha: Vec<f64>,
    /// Copies of each client still unprocessed when the run stopped.
    pub unprocessed: Vec<u64>,
}

impl DualCertificate {
    pub fn unprocessed_weight(&self) -> u64 {
        self.unprocessed.iter().sum()
    }
}

/// One primal-dual run at a fixed facility cost.
#[derive(Debug, Clone, PartialEq)]
pub struct DualRun {
    pub facility_cost: f64,
    /// Facility slots that became tight, in opening order.
    pub opened: Vec<usize>,
    /// Maximal independent subset of `opened` in the conflict graph; these
    /// are the centers of the run.
    pub centers: Vec<usize>,
    pub certificate: DualCertificate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Tight {
    time: f64,
    facility: usize,
    version: u32,
}

impl Eq for Tight {}

impl Ord for Tight {
    // min-heap on (time, facility)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.facility.cmp(&self.facility))
            .then(other.version.cmp(&self.version))
    }
}

impl PartialOrd for Tight {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Precomputed orderings for repeated runs on the same table.
pub struct PrimalDual<'t, 'a> {
    table: &'t CostTable<'a>,
    n_c: usize,
    n_f: usize,
    cost: Vec<f64>,
    /// Per facility, clients by increasing cost.
    order: Vec<Vec<u32>>,
    /// Position of each client in `order[f]`, row-major by facility.
    rank: Vec<u32>,
    /// Every (client, facility) pair by increasing cost.
    pairs: Vec<(u32, u32)>,
}

impl<'t, 'a> PrimalDual<'t, 'a> {
    pub fn new(table: &'t CostTable<'a>, obj: Objective) -> Self {
        let n_c = table.n_clients();
        let n_f = table.n_facilities();
        let mut cost = vec![0.0; n_c * n_f];
        for j in 0..n_c {
            for f in 0..n_f {
                cost[j * n_f + f] = obj.power(table.raw(j, f));
            }
        }
        let mut order = Vec::with_capacity(n_f);
        let mut rank = vec![0u32; n_f * n_c];
        for f in 0..n_f {
            let mut o: Vec<u32> = (0..n_c as u32).collect();
            o.sort_by(|&a, &b| {
                cost[a as usize * n_f + f]
                    .total_cmp(&cost[b as usize * n_f + f])
                    .then(a.cmp(&b))
            });
            for (r, &j) in o.iter().enumerate() {
                rank[f * n_c + j as usize] = r as u32;
            }
            order.push(o);
        }
        let mut pairs: Vec<(u32, u32)> = (0..n_c as u32)
            .flat_map(|j| (0..n_f as u32).map(move |f| (j, f)))
            .collect();
        pairs.sort_by(|&(ja, fa), &(jb, fb)| {
            cost[ja as usize * n_f + fa as usize]
                .total_cmp(&cost[jb as usize * n_f + fb as usize])
                .then(fa.cmp(&fb))
                .then(ja.cmp(&jb))
        });
        Self {
            table,
            n_c,
            n_f,
            cost,
            order,
            rank,
            pairs,
        }
    }

    pub fn table(&self) -> &'t CostTable<'a> {
        self.table
    }

    /// Largest powered client-facility cost.
    pub fn max_cost(&self) -> f64 {
        self.cost.iter().copied().fold(0.0, f64::max)
    }

    #[inline]
    fn c(&self, j: usize, f: usize) -> f64 {
        self.cost[j * self.n_f + f]
    }

    /// Runs the dual ascent with opening cost `z` until at most `t` copies
    /// are unprocessed. Requires `t < total weight`.
    pub fn run(&self, z: f64, t: u64) -> DualRun {
        let (n_c, n_f) = (self.n_c, self.n_f);
        let w = self.table.weights();
        let total: u64 = w.iter().sum();
        debug_assert!(total > t);

        let mut alpha = vec![f64::NAN; n_c];
        let mut frozen = vec![0u64; n_c];
        let mut is_frozen = vec![false; n_c];
        let mut unfrozen = total;

        let mut reached = vec![0usize; n_f];
        let mut open = vec![false; n_f];
        let mut opened = Vec::new();
        let mut pay = vec![0.0f64; n_f];
        let mut slope = vec![0.0f64; n_f];
        let mut last = vec![0.0f64; n_f];
        let mut version = vec![0u32; n_f];
        let mut heap = BinaryHeap::new();

        let schedule = |f: usize, pay: &[f64], slope: &[f64], last: &[f64], version: &mut [u32], heap: &mut BinaryHeap<Tight>| {
            version[f] += 1;
            let time = if pay[f] >= z {
                last[f]
            } else if slope[f] > 0.0 {
                last[f] + (z - pay[f]) / slope[f]
            } else {
                return;
            };
            heap.push(Tight {
                time,
                facility: f,
                version: version[f],
            });
        };
        for f in 0..n_f {
            schedule(f, &pay, &slope, &last, &mut version, &mut heap);
        }

        let mut next_pair = 0usize;
        let mut now = 0.0f64;
        let mut done = false;

        // Freezes client `j` at `now`; returns true once the stopping rule fires.
        macro_rules! freeze {
            ($j:expr) => {{
                let j: usize = $j;
                let wj = w[j];
                let take = if unfrozen - wj < t { unfrozen - t } else { wj };
                is_frozen[j] = true;
                frozen[j] = take;
                alpha[j] = now;
                unfrozen -= take;
                for f in 0..n_f {
                    if !open[f] && (self.rank[f * n_c + j] as usize) < reached[f] {
                        pay[f] += slope[f] * (now - last[f]);
                        last[f] = now;
                        slope[f] -= wj as f64;
                        if slope[f] < 0.5 {
                            slope[f] = 0.0;
                        }
                        schedule(f, &pay, &slope, &last, &mut version, &mut heap);
                    }
                }
                unfrozen <= t
            }};
        }

        while !done {
            let pair_time = self
                .pairs
                .get(next_pair)
                .map(|&(j, f)| self.c(j as usize, f as usize));
            let tight = loop {
                match heap.peek() {
                    Some(e) if e.version != version[e.facility] || open[e.facility] => {
                        heap.pop();
                    }
                    other => break other.copied(),
                }
            };
            let take_pair = match (pair_time, tight) {
                (Some(p), Some(e)) => p <= e.time,
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (None, None) => break,
            };
            if take_pair {
                let (j, f) = self.pairs[next_pair];
                let (j, f) = (j as usize, f as usize);
                next_pair += 1;
                now = now.max(self.c(j, f));
                reached[f] += 1;
                if is_frozen[j] {
                    continue;
                }
                if open[f] {
                    done = freeze!(j);
                } else {
                    pay[f] += slope[f] * (now - last[f]);
                    last[f] = now;
                    slope[f] += w[j] as f64;
                    schedule(f, &pay, &slope, &last, &mut version, &mut heap);
                }
            } else {
                let e = heap.pop().expect("peeked");
                let f = e.facility;
                now = now.max(e.time);
                open[f] = true;
                opened.push(f);
                pay[f] = z;
                for r in 0..reached[f] {
                    let j = self.order[f][r] as usize;
                    if !is_frozen[j] {
                        done = freeze!(j);
                        if done {
                            break;
                        }
                    }
                }
            }
        }

        let mut unprocessed = vec![0u64; n_c];
        for j in 0..n_c {
            unprocessed[j] = w[j] - frozen[j];
            if !is_frozen[j] {
                alpha[j] = now;
            }
        }

        // Conflict graph: two opened facilities conflict when some processed
        // client pays both. Greedy independent set in opening order.
        let mut taken = vec![false; n_c];
        let mut centers = Vec::new();
        for &f in &opened {
            let paying = |j: usize| frozen[j] > 0 && alpha[j] > self.c(j, f);
            if (0..n_c).any(|j| paying(j) && taken[j]) {
                continue;
            }
            centers.push(f);
            for j in 0..n_c {
                if paying(j) {
                    taken[j] = true;
                }
            }
        }

        DualRun {
            facility_cost: z,
            opened,
            centers,
            certificate: DualCertificate { alpha, unprocessed },
        }
    }
}
