//! Min-cost flow on the bounded transportation graph, solved over records.
//!
//! Graph: source → input (cap 1) → record (cap 1, cost −w) → sink. Each record
//! reaches the sink through two parallel arcs: one of capacity `lower` carrying
//! a large negative cost, and one of capacity `upper − lower` at zero cost, so
//! any optimal `n`-unit flow saturates every lower-bound arc whenever the
//! bounds are feasible.
//!
//! Input nodes are never materialized. A residual path through an assigned
//! input `i` goes record `j` → `i` → record `k` at cost `w_ij − w_ik`, so the
//! search runs on `m + 2` nodes whose record-to-record arcs are the cheapest
//! such move, kept in lazily pruned heaps with static keys. Successive
//! shortest paths (dense Dijkstra under Johnson potentials) place one input
//! per round.
//!
//! A tie-break pass then walks inputs in order and moves each to the smallest
//! record reachable through a zero-cost residual cycle that leaves earlier
//! inputs untouched, which yields the lexicographically smallest optimal map.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;

const INF: i64 = i64::MAX / 4;

type MinHeap = BinaryHeap<Reverse<(i64, usize)>>;

/// Cheapest entry satisfying `valid`; invalid entries are dropped for good.
fn top(heap: &mut MinHeap, valid: impl Fn(usize) -> bool) -> Option<(i64, usize)> {
    while let Some(&Reverse((c, i))) = heap.peek() {
        if valid(i) {
            return Some((c, i));
        }
        heap.pop();
    }
    None
}

#[derive(Debug, Clone, Copy)]
struct Step {
    from: usize,
    /// Input that moves along this arc, if any.
    via: Option<usize>,
}

struct Transport<'a> {
    n: usize,
    m: usize,
    w: &'a [i64],
    lower: &'a [usize],
    upper: &'a [usize],
    big: i64,
    assign: Vec<Option<usize>>,
    count: Vec<usize>,
    /// `unassigned[j]`: inputs not yet placed, keyed by `−w_ij`.
    unassigned: Vec<MinHeap>,
    /// `moves[j·m + k]`: inputs at `j`, keyed by `w_ij − w_ik`.
    moves: Vec<MinHeap>,
    /// Inputs `≤ frozen` may not move (tie-break pass only).
    frozen: Option<usize>,
    pot: Vec<i64>,
}

impl Transport<'_> {
    fn source(&self) -> usize {
        self.m
    }

    fn sink(&self) -> usize {
        self.m + 1
    }

    fn weight(&self, i: usize, j: usize) -> i64 {
        self.w[i * self.m + j]
    }

    fn arc_to_sink(&self, j: usize) -> Option<i64> {
        if self.count[j] < self.lower[j] {
            Some(-self.big)
        } else if self.count[j] < self.upper[j] {
            Some(0)
        } else {
            None
        }
    }

    fn arc_from_sink(&self, j: usize) -> Option<i64> {
        if self.count[j] > self.lower[j] {
            Some(0)
        } else if self.count[j] > 0 {
            Some(self.big)
        } else {
            None
        }
    }

    fn place(&mut self, i: usize, j: usize) {
        if let Some(old) = self.assign[i] {
            self.count[old] -= 1;
        }
        self.assign[i] = Some(j);
        self.count[j] += 1;
        for k in 0..self.m {
            if k != j {
                let key = self.weight(i, j) - self.weight(i, k);
                self.moves[j * self.m + k].push(Reverse((key, i)));
            }
        }
    }

    /// Residual arcs leaving `u` as `(to, cost, via)`.
    fn arcs(&mut self, u: usize, out: &mut Vec<(usize, i64, Option<usize>)>) {
        out.clear();
        let (m, s, t) = (self.m, self.source(), self.sink());
        if u == s {
            for j in 0..m {
                let assign = &self.assign;
                if let Some((c, i)) = top(&mut self.unassigned[j], |i| assign[i].is_none()) {
                    out.push((j, c, Some(i)));
                }
            }
        } else if u == t {
            for j in 0..m {
                if let Some(c) = self.arc_from_sink(j) {
                    out.push((j, c, None));
                }
            }
        } else {
            for k in 0..m {
                if k == u {
                    continue;
                }
                let (assign, frozen) = (&self.assign, self.frozen);
                let valid = |i: usize| assign[i] == Some(u) && frozen.is_none_or(|f| i > f);
                if let Some((c, i)) = top(&mut self.moves[u * m + k], valid) {
                    out.push((k, c, Some(i)));
                }
            }
            if let Some(c) = self.arc_to_sink(u) {
                out.push((t, c, None));
            }
        }
    }

    /// Dense Dijkstra on reduced costs from `start`.
    fn shortest(&mut self, start: usize) -> (Vec<i64>, Vec<Option<Step>>) {
        let nodes = self.m + 2;
        let mut dist = vec![INF; nodes];
        let mut prev: Vec<Option<Step>> = vec![None; nodes];
        let mut done = vec![false; nodes];
        let mut arcs = Vec::with_capacity(nodes);
        dist[start] = 0;
        loop {
            let mut next = None;
            for v in 0..nodes {
                if !done[v] && dist[v] < INF && next.is_none_or(|b: usize| dist[v] < dist[b]) {
                    next = Some(v);
                }
            }
            let Some(u) = next else { break };
            done[u] = true;
            self.arcs(u, &mut arcs);
            for &(v, cost, via) in &arcs {
                let reduced = cost + self.pot[u] - self.pot[v];
                debug_assert!(reduced >= 0, "potentials infeasible");
                if dist[u] + reduced < dist[v] {
                    dist[v] = dist[u] + reduced;
                    prev[v] = Some(Step { from: u, via });
                }
            }
        }
        (dist, prev)
    }

    fn raise_potentials(&mut self, dist: &[i64], reach: i64) {
        for (p, d) in self.pot.iter_mut().zip(dist) {
            *p += (*d).min(reach);
        }
    }

    /// Feasible potentials for the empty flow, whose residual graph is the
    /// DAG source → records → sink.
    fn initial_potentials(&mut self) {
        let (m, s, t) = (self.m, self.source(), self.sink());
        let mut arcs = Vec::new();
        self.arcs(s, &mut arcs);
        let mut pot = vec![0; m + 2];
        for &(j, c, _) in &arcs {
            pot[j] = c;
        }
        pot[t] = (0..m).filter_map(|j| self.arc_to_sink(j).map(|c| pot[j] + c)).min().unwrap_or(0).min(0);
        pot[s] = 0;
        self.pot = pot;
    }

    fn augment(&mut self) -> bool {
        let (s, t) = (self.source(), self.sink());
        let (dist, prev) = self.shortest(s);
        if dist[t] >= INF {
            return false;
        }
        self.raise_potentials(&dist, dist[t]);
        self.apply_path(&prev, s, t);
        true
    }

    /// Moves the inputs on the recorded path from `start` to `end`.
    fn apply_path(&mut self, prev: &[Option<Step>], start: usize, end: usize) {
        let mut steps = Vec::new();
        let mut v = end;
        while v != start {
            let step = prev[v].expect("path is connected");
            steps.push((v, step.via));
            v = step.from;
        }
        for (to, via) in steps.into_iter().rev() {
            if let Some(i) = via {
                self.place(i, to);
            }
        }
    }

    fn lexicographic_pass(&mut self) {
        for i in 0..self.n {
            self.frozen = Some(i);
            let cur = self.assign[i].expect("all inputs placed");
            for j in 0..cur {
                let detour = self.weight(i, cur) - self.weight(i, j) + self.pot[cur] - self.pot[j];
                if detour > 0 {
                    continue;
                }
                let (dist, prev) = self.shortest(j);
                if dist[cur] >= INF || detour + dist[cur] != 0 {
                    continue;
                }
                self.raise_potentials(&dist, dist[cur]);
                self.place(i, j);
                self.apply_path(&prev, j, cur);
                break;
            }
        }
    }
}

/// Maximizes `Σ_i w[i·m + π(i)]` with `lower[j] ≤ |π⁻¹(j)| ≤ upper[j]`.
/// Returns `None` if the bounds cannot all be met.
pub(super) fn solve_transport(n: usize, m: usize, w: &[i64], lower: &[usize], upper: &[usize]) -> Option<Vec<usize>> {
    debug_assert_eq!(w.len(), n * m);
    let max_w = w.iter().map(|v| v.unsigned_abs()).max().unwrap_or(0) as i64;
    // dominates any difference in assignment cost
    let big = max_w.saturating_mul(2 * n as i64 + 2).saturating_add(1);
    let mut unassigned: Vec<MinHeap> = (0..m).map(|_| BinaryHeap::with_capacity(n)).collect();
    for i in 0..n {
        for (j, heap) in unassigned.iter_mut().enumerate() {
            heap.push(Reverse((-w[i * m + j], i)));
        }
    }
    let mut tr = Transport {
        n,
        m,
        w,
        lower,
        upper,
        big,
        assign: vec![None; n],
        count: vec![0; m],
        unassigned,
        moves: (0..m * m).map(|_| BinaryHeap::new()).collect(),
        frozen: None,
        pot: Vec::new(),
    };
    tr.initial_potentials();
    for _ in 0..n {
        if !tr.augment() {
            return None;
        }
    }
    if (0..m).any(|j| tr.count[j] < lower[j]) {
        return None;
    }
    tr.lexicographic_pass();
    Some(tr.assign.into_iter().map(|j| j.expect("all inputs placed")).collect())
}
