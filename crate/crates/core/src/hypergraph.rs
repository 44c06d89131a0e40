//! Layered hypergraphs, oriented hyperedges, neighbourhoods and
//! tangle-freeness.

use std::collections::{HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::par;
use crate::sparse::CsrMatrix;
use crate::{Error, Result};

/// Vertex set `0..n` plus one edge list per layer.
///
/// Layer `k` holds `q_k`-subsets stored flat (`q_k` sorted vertices per
/// edge), sorted lexicographically and without repeats. The same vertex set
/// may appear in several layers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayeredHypergraph {
    n: usize,
    q_sizes: Vec<usize>,
    layers: Vec<Vec<u32>>,
}

impl LayeredHypergraph {
    /// Canonicalises and validates the given edge lists.
    pub fn new(n: usize, q_sizes: Vec<usize>, layers: Vec<Vec<Vec<u32>>>) -> Result<Self> {
        if layers.len() != q_sizes.len() {
            return Err(Error::DimensionMismatch {
                expected: q_sizes.len(),
                got: layers.len(),
            });
        }
        let mut flat = Vec::with_capacity(layers.len());
        for (k, (edges, &q)) in layers.into_iter().zip(&q_sizes).enumerate() {
            if q < 2 {
                return Err(Error::InvalidHypergraph(format!("layer {k} has q = {q}")));
            }
            let mut edges = edges;
            for e in edges.iter_mut() {
                if e.len() != q {
                    return Err(Error::InvalidHypergraph(format!(
                        "layer {k}: edge {e:?} does not have {q} vertices"
                    )));
                }
                e.sort_unstable();
                if e.windows(2).any(|w| w[0] == w[1]) {
                    return Err(Error::InvalidHypergraph(format!(
                        "layer {k}: edge {e:?} repeats a vertex"
                    )));
                }
                if e.last().is_some_and(|&v| v as usize >= n) {
                    return Err(Error::InvalidHypergraph(format!(
                        "layer {k}: edge {e:?} has a vertex outside 0..{n}"
                    )));
                }
            }
            edges.sort_unstable();
            if let Some(w) = edges.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::InvalidHypergraph(format!(
                    "layer {k}: edge {:?} appears twice",
                    w[0]
                )));
            }
            flat.push(edges.into_iter().flatten().collect());
        }
        Ok(Self {
            n,
            q_sizes,
            layers: flat,
        })
    }

    pub fn empty(n: usize, q_sizes: Vec<usize>) -> Self {
        let k = q_sizes.len();
        Self {
            n,
            q_sizes,
            layers: vec![Vec::new(); k],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_layers(&self) -> usize {
        self.q_sizes.len()
    }

    pub fn q_sizes(&self) -> &[usize] {
        &self.q_sizes
    }

    pub fn q(&self, k: usize) -> usize {
        self.q_sizes[k]
    }

    pub fn num_edges(&self, k: usize) -> usize {
        self.layers[k].len() / self.q_sizes[k]
    }

    pub fn edge_counts(&self) -> Vec<usize> {
        (0..self.num_layers()).map(|k| self.num_edges(k)).collect()
    }

    pub fn edge(&self, k: usize, e: usize) -> &[u32] {
        let q = self.q_sizes[k];
        &self.layers[k][e * q..(e + 1) * q]
    }

    pub fn edges(&self, k: usize) -> impl Iterator<Item = &[u32]> {
        self.layers[k].chunks_exact(self.q_sizes[k])
    }

    /// Flat vertex array of layer `k` (`q_k` entries per edge).
    pub fn layer_flat(&self, k: usize) -> &[u32] {
        &self.layers[k]
    }

    /// Total number of oriented hyperedges `sum_k q_k |E_k|`.
    pub fn num_oriented(&self) -> usize {
        self.layers.iter().map(|l| l.len()).sum()
    }

    /// Number of layer-`k` hyperedges containing each vertex.
    pub fn degrees(&self, k: usize) -> Vec<u32> {
        let mut deg = vec![0u32; self.n];
        for &v in &self.layers[k] {
            deg[v as usize] += 1;
        }
        deg
    }

    /// `A_k(x, y)`: number of layer-`k` edges containing both `x != y`.
    pub fn adjacency(&self, k: usize) -> CsrMatrix {
        let q = self.q_sizes[k];
        let mut trip = Vec::with_capacity(self.num_edges(k) * q * (q - 1));
        for e in self.edges(k) {
            for &x in e {
                for &y in e {
                    if x != y {
                        trip.push((x as usize, y as usize, 1.0));
                    }
                }
            }
        }
        CsrMatrix::from_triplets(self.n, self.n, trip)
    }

    /// Per-vertex list of `(layer, edge)` incidences in layer-major,
    /// edge-ascending order.
    pub fn incidence(&self) -> Incidence {
        let mut ptr = vec![0usize; self.n + 1];
        for l in &self.layers {
            for &v in l {
                ptr[v as usize + 1] += 1;
            }
        }
        for i in 0..self.n {
            ptr[i + 1] += ptr[i];
        }
        let mut fill = ptr.clone();
        let mut items = vec![(0u32, 0u32); ptr[self.n]];
        for k in 0..self.num_layers() {
            for (e, edge) in self.edges(k).enumerate() {
                for &v in edge {
                    items[fill[v as usize]] = (k as u32, e as u32);
                    fill[v as usize] += 1;
                }
            }
        }
        Incidence { ptr, items }
    }

    /// Ball of radius `t` around `x`: vertices at distance at most `t` and
    /// the edges incident to vertices at distance below `t`.
    pub fn neighborhood(&self, x: usize, t: usize) -> Neighborhood {
        self.neighborhood_with(&self.incidence(), x, t)
    }

    pub fn neighborhood_with(&self, inc: &Incidence, x: usize, t: usize) -> Neighborhood {
        let mut dist: HashMap<u32, usize> = HashMap::new();
        let mut seen_edges: HashSet<(u32, u32)> = HashSet::new();
        let mut edges = Vec::new();
        let mut order = vec![x as u32];
        dist.insert(x as u32, 0);
        let mut queue = VecDeque::from([x as u32]);
        while let Some(v) = queue.pop_front() {
            let dv = dist[&v];
            if dv >= t {
                continue;
            }
            for &(k, e) in inc.of(v as usize) {
                if !seen_edges.insert((k, e)) {
                    continue;
                }
                edges.push((k as usize, e as usize));
                for &y in self.edge(k as usize, e as usize) {
                    if let std::collections::hash_map::Entry::Vacant(s) = dist.entry(y) {
                        s.insert(dv + 1);
                        order.push(y);
                        queue.push_back(y);
                    }
                }
            }
        }
        let mut vertices: Vec<(usize, usize)> =
            order.iter().map(|&v| (v as usize, dist[&v])).collect();
        vertices.sort_unstable();
        edges.sort_unstable();
        let mut layer_counts = vec![0usize; self.num_layers()];
        for &(k, _) in &edges {
            layer_counts[k] += 1;
        }
        Neighborhood {
            root: x,
            radius: t,
            vertices,
            edges,
            layer_counts,
        }
    }

    /// Tangle-freeness of every radius-`ell` ball.
    ///
    /// Each ball is viewed as a bipartite factor graph (vertices and
    /// hyperedges as nodes, incidences as links); the ball is tangle-free
    /// when `links - nodes + 1 <= 1`.
    pub fn is_tangle_free(&self, ell: usize) -> TangleReport {
        let inc = self.incidence();
        let excess: Vec<i64> = par::map_range(self.n, |x| {
            let b = self.neighborhood_with(&inc, x, ell);
            b.excess(self)
        });
        let per_vertex: Vec<bool> = excess.iter().map(|&e| e <= 1).collect();
        TangleReport {
            radius: ell,
            tangle_free: per_vertex.iter().all(|&b| b),
            max_excess: excess.iter().copied().max().unwrap_or(0),
            per_vertex,
        }
    }
}

/// Compressed per-vertex incidence lists.
#[derive(Debug, Clone)]
pub struct Incidence {
    ptr: Vec<usize>,
    items: Vec<(u32, u32)>,
}

impl Incidence {
    pub fn of(&self, v: usize) -> &[(u32, u32)] {
        &self.items[self.ptr[v]..self.ptr[v + 1]]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Neighborhood {
    pub root: usize,
    pub radius: usize,
    /// `(vertex, distance)` sorted by vertex.
    pub vertices: Vec<(usize, usize)>,
    /// `(layer, edge)` sorted.
    pub edges: Vec<(usize, usize)>,
    pub layer_counts: Vec<usize>,
}

impl Neighborhood {
    pub fn vertex_set(&self) -> Vec<usize> {
        self.vertices.iter().map(|&(v, _)| v).collect()
    }

    /// Cycle excess of the factor graph of the ball (it is connected).
    pub fn excess(&self, g: &LayeredHypergraph) -> i64 {
        let links: usize = self.edges.iter().map(|&(k, _)| g.q(k)).sum();
        links as i64 - (self.vertices.len() + self.edges.len()) as i64 + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TangleReport {
    pub radius: usize,
    pub tangle_free: bool,
    pub max_excess: i64,
    pub per_vertex: Vec<bool>,
}

/// Dense ids for oriented hyperedges `(x -> e)`.
///
/// The id of vertex position `pos` in edge `e` of layer `k` is
/// `offset_k + e q_k + pos`, so ids are stable for a given canonical
/// hypergraph.
#[derive(Debug, Clone)]
pub struct OrientedIndex {
    offsets: Vec<usize>,
    q_sizes: Vec<usize>,
    tails: Vec<u32>,
    out_ptr: Vec<usize>,
    out_ids: Vec<usize>,
}

impl OrientedIndex {
    pub fn new(g: &LayeredHypergraph) -> Self {
        let mut offsets = vec![0usize];
        for k in 0..g.num_layers() {
            offsets.push(offsets[k] + g.layer_flat(k).len());
        }
        let tails: Vec<u32> = (0..g.num_layers())
            .flat_map(|k| g.layer_flat(k).iter().copied())
            .collect();
        let n = g.n();
        let mut out_ptr = vec![0usize; n + 1];
        for &v in &tails {
            out_ptr[v as usize + 1] += 1;
        }
        for i in 0..n {
            out_ptr[i + 1] += out_ptr[i];
        }
        let mut fill = out_ptr.clone();
        let mut out_ids = vec![0usize; tails.len()];
        for (id, &v) in tails.iter().enumerate() {
            out_ids[fill[v as usize]] = id;
            fill[v as usize] += 1;
        }
        Self {
            offsets,
            q_sizes: g.q_sizes().to_vec(),
            tails,
            out_ptr,
            out_ids,
        }
    }

    pub fn m(&self) -> usize {
        self.tails.len()
    }

    /// Id range of layer `k`.
    pub fn layer_range(&self, k: usize) -> std::ops::Range<usize> {
        self.offsets[k]..self.offsets[k + 1]
    }

    pub fn id(&self, k: usize, e: usize, pos: usize) -> usize {
        self.offsets[k] + e * self.q_sizes[k] + pos
    }

    /// `(layer, edge, position)` of an id.
    pub fn locate(&self, id: usize) -> (usize, usize, usize) {
        let k = self.offsets.partition_point(|&o| o <= id) - 1;
        let rel = id - self.offsets[k];
        (k, rel / self.q_sizes[k], rel % self.q_sizes[k])
    }

    /// Tail vertex `x` of `(x -> e)`.
    pub fn tail(&self, id: usize) -> usize {
        self.tails[id] as usize
    }

    pub fn tails(&self) -> &[u32] {
        &self.tails
    }

    /// Ids `(x -> f)` for all `f` containing `x`, ascending.
    pub fn out_of(&self, x: usize) -> &[usize] {
        &self.out_ids[self.out_ptr[x]..self.out_ptr[x + 1]]
    }
}

/// Community labels, 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub labels: Vec<u32>,
}

impl Assignment {
    pub fn new(labels: Vec<u32>, r: usize) -> Result<Self> {
        if let Some(&l) = labels.iter().find(|&&l| l as usize >= r) {
            return Err(Error::IndexOutOfRange {
                index: l as usize,
                limit: r,
            });
        }
        Ok(Self { labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// One more than the largest label.
    pub fn num_labels(&self) -> usize {
        self.labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0)
    }

    pub fn sizes(&self, r: usize) -> Vec<usize> {
        let mut s = vec![0; r];
        for &l in &self.labels {
            s[l as usize] += 1;
        }
        s
    }

    /// `+1` / `-1` indicator of label 0 vs the rest.
    pub fn signs(&self) -> Vec<f64> {
        self.labels
            .iter()
            .map(|&l| if l == 0 { 1.0 } else { -1.0 })
            .collect()
    }
}
