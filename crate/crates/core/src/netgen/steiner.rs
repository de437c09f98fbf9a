// SPDX-License-Identifier: Apache-2.0

//! Rectilinear Steiner trees by iterated 1-Steiner insertion over the Hanan
//! grid.

pub type Point = (i64, i64);

pub fn manhattan(a: Point, b: Point) -> i64 {
    (a.0 - b.0).abs() + (a.1 - b.1).abs()
}

/// Tree over `points`; the first `terminal_count` entries are the input
/// terminals in their original order, the rest are Steiner points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SteinerTree {
    pub points: Vec<Point>,
    pub terminal_count: usize,
    pub edges: Vec<(usize, usize)>,
}

impl SteinerTree {
    pub fn length(&self) -> i64 {
        self.edges.iter().map(|&(a, b)| manhattan(self.points[a], self.points[b])).sum()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == v || b == v).count()
    }
}

struct DisjointSet(Vec<usize>);

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.0[ra.max(rb)] = ra.min(rb);
        true
    }
}

/// Rectilinear minimum spanning tree (Prim, O(n^2)); ties broken by index.
pub fn rectilinear_mst(points: &[Point]) -> Vec<(usize, usize)> {
    let n = points.len();
    if n < 2 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![(i64::MAX, 0usize); n];
    let mut edges = Vec::with_capacity(n - 1);
    in_tree[0] = true;
    for j in 1..n {
        best[j] = (manhattan(points[0], points[j]), 0);
    }
    for _ in 1..n {
        let mut pick = usize::MAX;
        for j in 0..n {
            if !in_tree[j] && (pick == usize::MAX || best[j].0 < best[pick].0) {
                pick = j;
            }
        }
        in_tree[pick] = true;
        edges.push((best[pick].1, pick));
        for j in 0..n {
            if !in_tree[j] {
                let d = manhattan(points[pick], points[j]);
                if d < best[j].0 {
                    best[j] = (d, pick);
                }
            }
        }
    }
    edges
}

fn octant(dx: i64, dy: i64) -> usize {
    ((dx >= 0) as usize) << 2 | ((dy >= 0) as usize) << 1 | (dx.abs() >= dy.abs()) as usize
}

/// Tree edges as `(length, a, b)` sorted ascending.
fn sorted_edges(points: &[Point], tree: &[(usize, usize)]) -> Vec<(i64, usize, usize)> {
    let mut e: Vec<_> = tree.iter().map(|&(a, b)| (manhattan(points[a], points[b]), a, b)).collect();
    e.sort_unstable();
    e
}

/// Length of the MST of the current tree's points plus `extra`.
///
/// Only existing tree edges and edges at the new points can enter the new MST,
/// and each new point needs at most its nearest neighbour per octant, so the
/// whole update is a merge of two sorted edge lists through a union-find.
fn mst_with_points(points: &[Point], tree_sorted: &[(i64, usize, usize)], extra: &[Point], scratch: &mut Vec<(i64, usize, usize)>) -> i64 {
    let n = points.len();
    let total_n = n + extra.len();
    scratch.clear();
    for (k, &e) in extra.iter().enumerate() {
        let mut near = [(i64::MAX, usize::MAX); 8];
        let others = points.iter().copied().enumerate().chain(extra.iter().copied().enumerate().map(|(m, p)| (n + m, p)));
        for (j, p) in others {
            if j == n + k {
                continue;
            }
            let (dx, dy) = (p.0 - e.0, p.1 - e.1);
            let d = dx.abs() + dy.abs();
            let o = octant(dx, dy);
            if d < near[o].0 {
                near[o] = (d, j);
            }
        }
        scratch.extend(near.iter().filter(|x| x.1 != usize::MAX).map(|&(d, j)| (d, j, n + k)));
    }
    scratch.sort_unstable();
    let mut ds = DisjointSet::new(total_n);
    let (mut i, mut j) = (0, 0);
    let mut total = 0;
    let mut used = 0;
    while used + 1 < total_n {
        let take_tree = match (tree_sorted.get(i), scratch.get(j)) {
            (Some(a), Some(b)) => a.0 <= b.0,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => break,
        };
        let (w, a, b) = if take_tree {
            i += 1;
            tree_sorted[i - 1]
        } else {
            j += 1;
            scratch[j - 1]
        };
        if ds.union(a, b) {
            total += w;
            used += 1;
        }
    }
    total
}

fn tree_length(points: &[Point], edges: &[(usize, usize)]) -> i64 {
    edges.iter().map(|&(a, b)| manhattan(points[a], points[b])).sum()
}

/// Drops Steiner points of degree at most two, re-spanning after each removal.
fn prune(points: &mut Vec<Point>, terminal_count: usize, edges: &mut Vec<(usize, usize)>) {
    loop {
        let mut deg = vec![0usize; points.len()];
        for &(a, b) in edges.iter() {
            deg[a] += 1;
            deg[b] += 1;
        }
        let Some(s) = (terminal_count..points.len()).find(|&s| deg[s] <= 2) else {
            return;
        };
        points.remove(s);
        *edges = rectilinear_mst(points);
    }
}

/// Nets up to this many terminals get extra search: every improving first
/// insertion is used as a separate starting point, and two Hanan points are
/// tried at once when no single insertion helps.
pub const SMALL_NET_MAX_TERMINALS: usize = 6;

struct Search<'a> {
    hanan: &'a [Point],
    terminal_count: usize,
    scratch: Vec<(i64, usize, usize)>,
}

impl Search<'_> {
    fn free(&self, points: &[Point]) -> Vec<Point> {
        self.hanan.iter().copied().filter(|c| !points.contains(c)).collect()
    }

    /// Improving insertions from the current tree, best first.
    fn single_moves(&mut self, points: &[Point], edges: &[(usize, usize)], length: i64) -> Vec<(i64, Point)> {
        let mut moves: Vec<(i64, Point)> = Vec::new();
        let sorted = sorted_edges(points, edges);
        for c in self.free(points) {
            let l = mst_with_points(points, &sorted, &[c], &mut self.scratch);
            if l < length {
                moves.push((l, c));
            }
        }
        moves.sort();
        moves
    }

    fn best_pair(&mut self, points: &[Point], edges: &[(usize, usize)], length: i64) -> Option<[Point; 2]> {
        let free = self.free(points);
        let sorted = sorted_edges(points, edges);
        let mut best: Option<(i64, [Point; 2])> = None;
        for (i, &a) in free.iter().enumerate() {
            for &b in &free[i + 1..] {
                let l = mst_with_points(points, &sorted, &[a, b], &mut self.scratch);
                if l < length && best.map_or(true, |(bl, _)| l < bl) {
                    best = Some((l, [a, b]));
                }
            }
        }
        best.map(|(_, p)| p)
    }

    /// Adds points, re-spans and prunes; `None` unless the tree got shorter.
    fn apply(&self, points: &[Point], length: i64, added: &[Point]) -> Option<(Vec<Point>, Vec<(usize, usize)>, i64)> {
        let mut p = points.to_vec();
        p.extend_from_slice(added);
        let mut e = rectilinear_mst(&p);
        prune(&mut p, self.terminal_count, &mut e);
        let l = tree_length(&p, &e);
        (l < length).then_some((p, e, l))
    }

    /// Batched rounds: every candidate that still improves the current tree is
    /// inserted, in order of its gain at the start of the round.
    fn batched(&mut self, mut points: Vec<Point>, mut edges: Vec<(usize, usize)>) -> (Vec<Point>, Vec<(usize, usize)>) {
        let mut length = tree_length(&points, &edges);
        loop {
            let moves = self.single_moves(&points, &edges, length);
            if moves.is_empty() {
                break;
            }
            let start = length;
            for (_, c) in moves {
                let sorted = sorted_edges(&points, &edges);
                if mst_with_points(&points, &sorted, &[c], &mut self.scratch) < length {
                    points.push(c);
                    edges = rectilinear_mst(&points);
                    length = tree_length(&points, &edges);
                }
            }
            prune(&mut points, self.terminal_count, &mut edges);
            length = tree_length(&points, &edges);
            if length >= start {
                break;
            }
        }
        (points, edges)
    }

    /// One insertion per round, falling back to the best pair when stuck.
    fn greedy(&mut self, mut points: Vec<Point>, mut edges: Vec<(usize, usize)>) -> (Vec<Point>, Vec<(usize, usize)>) {
        let mut length = tree_length(&points, &edges);
        loop {
            let added: Vec<Point> = match self.single_moves(&points, &edges, length).first() {
                Some(&(_, c)) => vec![c],
                None => match self.best_pair(&points, &edges, length) {
                    Some(pair) => pair.to_vec(),
                    None => break,
                },
            };
            match self.apply(&points, length, &added) {
                Some((p, e, l)) => (points, edges, length) = (p, e, l),
                None => break,
            }
        }
        (points, edges)
    }
}

/// Iterated 1-Steiner over the Hanan grid. Larger nets use batched rounds;
/// small nets use one insertion per round with multi-start and pair lookahead.
pub fn build_rsmt(terminals: &[Point]) -> SteinerTree {
    let terminal_count = terminals.len();
    let points: Vec<Point> = terminals.to_vec();
    let edges = rectilinear_mst(&points);
    if terminal_count <= 2 {
        return SteinerTree { points, terminal_count, edges };
    }
    let mut xs: Vec<i64> = terminals.iter().map(|p| p.0).collect();
    let mut ys: Vec<i64> = terminals.iter().map(|p| p.1).collect();
    xs.sort_unstable();
    xs.dedup();
    ys.sort_unstable();
    ys.dedup();
    let hanan: Vec<Point> = xs.iter().flat_map(|&x| ys.iter().map(move |&y| (x, y))).collect();
    let mut search = Search { hanan: &hanan, terminal_count, scratch: Vec::new() };
    if terminal_count > SMALL_NET_MAX_TERMINALS {
        let (points, edges) = search.batched(points, edges);
        return SteinerTree { points, terminal_count, edges };
    }
    let (mut best_p, mut best_e) = search.greedy(points.clone(), edges.clone());
    let length = tree_length(&points, &edges);
    for (_, c) in search.single_moves(&points, &edges, length) {
        if let Some((p, e, _)) = search.apply(&points, length, &[c]) {
            let (p, e) = search.greedy(p, e);
            if tree_length(&p, &e) < tree_length(&best_p, &best_e) {
                (best_p, best_e) = (p, e);
            }
        }
    }
    SteinerTree { points: best_p, terminal_count, edges: best_e }
}
