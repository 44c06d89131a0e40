//! Exact HSBM sampling and Galton–Watson hypertrees.

use std::collections::{BTreeMap, HashSet};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Binomial, Poisson};
use serde::{Deserialize, Serialize};

use crate::hypergraph::{Assignment, LayeredHypergraph};
use crate::model::{compositions, multinomial, pi_power, ModelParams};
use crate::par;
use crate::rng::{substream, tag, StreamRng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelMode {
    /// Community `i` occupies a contiguous block of vertex ids.
    #[default]
    DeterministicBlocks,
    /// Block labels under a seeded random permutation of the vertices.
    Shuffled,
}

#[derive(Debug, Clone)]
pub struct SampleConfig {
    pub params: ModelParams,
    pub n: usize,
    pub seed: u64,
    pub label_mode: LabelMode,
}

/// Community sizes closest to `pi * n` (largest remainder, ties to the
/// lower index).
pub fn community_sizes(pi: &[f64], n: usize) -> Vec<usize> {
    let raw: Vec<f64> = pi.iter().map(|p| p * n as f64).collect();
    let mut sizes: Vec<usize> = raw.iter().map(|x| x.floor() as usize).collect();
    let mut left = n - sizes.iter().sum::<usize>().min(n);
    let mut order: Vec<usize> = (0..pi.len()).collect();
    order.sort_by(|&a, &b| {
        (raw[b] - raw[b].floor())
            .total_cmp(&(raw[a] - raw[a].floor()))
            .then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        sizes[i] += 1;
        left -= 1;
    }
    sizes
}

/// `C(n, k)` exactly, `None` on overflow.
pub fn binom_u128(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// `C(n, k)` as a float.
pub fn binom_f64(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

struct Class {
    layer: usize,
    index: usize,
    comp: Vec<u32>,
    count: u128,
    prob: f64,
}

fn classes(params: &ModelParams, sizes: &[usize], n: usize) -> Result<Vec<Class>> {
    let mut out = Vec::new();
    for (k, l) in params.layers.iter().enumerate() {
        let denom = binom_f64(n, l.q - 1);
        for (index, comp) in compositions(l.q, params.r).into_iter().enumerate() {
            let p = l.tensor.get(&comp);
            if p == 0.0 {
                continue;
            }
            let prob = p / denom;
            if prob > 1.0 {
                return Err(Error::ProbabilityOverflow { layer: k, prob });
            }
            let mut count: u128 = 1;
            for (i, &c) in comp.iter().enumerate() {
                count = binom_u128(sizes[i], c as usize)
                    .and_then(|b| count.checked_mul(b))
                    .ok_or_else(|| {
                        Error::InvalidModel(format!("candidate count overflows for layer {k}"))
                    })?;
            }
            if count > 0 {
                out.push(Class {
                    layer: k,
                    index,
                    comp,
                    count,
                    prob,
                });
            }
        }
    }
    Ok(out)
}

/// Expected number of layer-`k` edges for the given community sizes.
pub fn expected_edges(params: &ModelParams, n: usize, k: usize) -> f64 {
    let sizes = community_sizes(&params.pi, n);
    let l = &params.layers[k];
    let denom = binom_f64(n, l.q - 1);
    compositions(l.q, params.r)
        .iter()
        .map(|c| {
            let cnt: f64 = c
                .iter()
                .enumerate()
                .map(|(i, &ci)| binom_f64(sizes[i], ci as usize))
                .product();
            cnt * l.tensor.get(c) / denom
        })
        .sum()
}

const ENUMERATE_BELOW: u128 = 1 << 20;

fn binomial_count(rng: &mut StreamRng, count: u128, p: f64) -> u128 {
    if p <= 0.0 {
        return 0;
    }
    let mut left = count;
    let mut total: u128 = 0;
    while left > 0 {
        let chunk = left.min(u64::MAX as u128) as u64;
        let b = Binomial::new(chunk, p).expect("valid binomial");
        total += b.sample(rng) as u128;
        left -= chunk as u128;
    }
    total
}

/// All `c`-subsets of `members` in lexicographic order.
fn combos(members: &[u32], c: usize) -> Vec<Vec<u32>> {
    fn rec(m: &[u32], c: usize, start: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == c {
            out.push(cur.clone());
            return;
        }
        for i in start..m.len() {
            if m.len() - i < c - cur.len() {
                break;
            }
            cur.push(m[i]);
            rec(m, c, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(members, c, 0, &mut Vec::with_capacity(c), &mut out);
    out
}

fn sample_class(class: &Class, members: &[Vec<u32>], rng: &mut StreamRng) -> Vec<Vec<u32>> {
    let parts: Vec<usize> = (0..members.len())
        .filter(|&i| class.comp[i] > 0)
        .collect();
    if class.count <= ENUMERATE_BELOW || class.prob > 0.25 {
        // One Bernoulli draw per candidate.
        let lists: Vec<Vec<Vec<u32>>> = parts
            .iter()
            .map(|&i| combos(&members[i], class.comp[i] as usize))
            .collect();
        let mut out = Vec::new();
        let mut idx = vec![0usize; lists.len()];
        'outer: loop {
            if rng.random::<f64>() < class.prob {
                let mut e: Vec<u32> = idx
                    .iter()
                    .zip(&lists)
                    .flat_map(|(&j, l)| l[j].iter().copied())
                    .collect();
                e.sort_unstable();
                out.push(e);
            }
            for d in (0..idx.len()).rev() {
                idx[d] += 1;
                if idx[d] < lists[d].len() {
                    continue 'outer;
                }
                idx[d] = 0;
            }
            break;
        }
        return out;
    }
    let m = binomial_count(rng, class.count, class.prob) as usize;
    let mut seen: HashSet<Vec<u32>> = HashSet::with_capacity(m);
    let mut out = Vec::with_capacity(m);
    while out.len() < m {
        let mut e = Vec::new();
        for &i in &parts {
            let pool = &members[i];
            for j in rand::seq::index::sample(rng, pool.len(), class.comp[i] as usize) {
                e.push(pool[j]);
            }
        }
        e.sort_unstable();
        if seen.insert(e.clone()) {
            out.push(e);
        }
    }
    out
}

/// Samples a non-uniform HSBM instance.
///
/// For every layer and community composition the number of present edges is
/// drawn from its binomial law and that many distinct candidates are placed
/// uniformly, which reproduces independent inclusion of every candidate.
pub fn sample_hsbm(cfg: &SampleConfig) -> Result<(LayeredHypergraph, Assignment)> {
    let params = &cfg.params;
    let n = cfg.n;
    if n < params.q_max() {
        return Err(Error::InvalidModel(format!(
            "n = {n} is smaller than the largest hyperedge size {}",
            params.q_max()
        )));
    }
    let sizes = community_sizes(&params.pi, n);
    let mut labels = Vec::with_capacity(n);
    for (i, &s) in sizes.iter().enumerate() {
        labels.extend(std::iter::repeat_n(i as u32, s));
    }
    if cfg.label_mode == LabelMode::Shuffled {
        labels.shuffle(&mut substream(cfg.seed, &[tag::LABELS]));
    }
    let mut members = vec![Vec::new(); params.r];
    for (v, &l) in labels.iter().enumerate() {
        members[l as usize].push(v as u32);
    }
    let cls = classes(params, &sizes, n)?;
    let drawn = par::map_slice(&cls, |c| {
        let mut rng = substream(cfg.seed, &[tag::SAMPLER, c.layer as u64, c.index as u64]);
        sample_class(c, &members, &mut rng)
    });
    let mut layers = vec![Vec::new(); params.num_layers()];
    for (c, edges) in cls.iter().zip(drawn) {
        layers[c.layer].extend(edges);
    }
    let g = LayeredHypergraph::new(n, params.q_sizes(), layers)?;
    Ok((g, Assignment { labels }))
}

/// Uniformly random layered hypergraph with exactly `edges[k]` distinct
/// edges in layer `k`. Used for operator checks and benchmarks.
pub fn random_layered(
    n: usize,
    q_sizes: &[usize],
    edges: &[usize],
    seed: u64,
) -> Result<LayeredHypergraph> {
    let mut layers = Vec::with_capacity(q_sizes.len());
    for (k, (&q, &m)) in q_sizes.iter().zip(edges).enumerate() {
        let avail = binom_u128(n, q).unwrap_or(u128::MAX);
        if (m as u128) > avail {
            return Err(Error::InvalidHypergraph(format!(
                "layer {k}: {m} edges requested, only {avail} exist"
            )));
        }
        let mut rng = substream(seed, &[tag::SAMPLER, u64::MAX, k as u64]);
        let mut seen = HashSet::with_capacity(m);
        let mut out = Vec::with_capacity(m);
        while out.len() < m {
            let mut e: Vec<u32> = rand::seq::index::sample(&mut rng, n, q)
                .into_iter()
                .map(|v| v as u32)
                .collect();
            e.sort_unstable();
            if seen.insert(e.clone()) {
                out.push(e);
            }
        }
        layers.push(out);
    }
    LayeredHypergraph::new(n, q_sizes.to_vec(), layers)
}

/// Default node cap for tree sampling.
pub const DEFAULT_POPULATION_CAP: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeNode {
    pub typ: u32,
    pub depth: u32,
    /// Index into [`HyperTree::edges`] of the edge that created the node.
    pub parent_edge: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeEdge {
    pub layer: u32,
    pub weight: f64,
    pub parent: u32,
    /// The `q_k - 1` children, in their sampled order.
    pub children: Vec<u32>,
}

/// Truncated multi-type Galton–Watson hypertree. Node 0 is the root;
/// children always have larger ids than their parent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HyperTree {
    pub depth: usize,
    pub nodes: Vec<TreeNode>,
    pub edges: Vec<TreeEdge>,
    /// Edges hanging below each node.
    pub child_edges: Vec<Vec<u32>>,
}

impl HyperTree {
    pub fn root_type(&self) -> usize {
        self.nodes[0].typ as usize
    }

    /// Number of nodes at distance exactly `t` from the root.
    pub fn generation_size(&self, t: usize) -> usize {
        self.nodes.iter().filter(|v| v.depth as usize == t).count()
    }
}

/// Per-layer child-composition laws: for each layer and parent type, the
/// compositions of `q - 1` and their probabilities.
#[derive(Debug, Clone)]
pub struct OffspringLaw {
    pub d: Vec<f64>,
    pub q: Vec<usize>,
    pub weights: Vec<f64>,
    /// `comps[k]`: compositions of `q_k - 1`.
    pub comps: Vec<Vec<Vec<u32>>>,
    /// `probs[k][i][c]`: probability of composition `c` under parent type `i`.
    pub probs: Vec<Vec<Vec<f64>>>,
    samplers: Vec<Vec<Option<WeightedIndex<f64>>>>,
}

impl OffspringLaw {
    pub fn new(params: &ModelParams) -> Self {
        let r = params.r;
        let mut comps = Vec::new();
        let mut probs = Vec::new();
        let mut samplers = Vec::new();
        for l in &params.layers {
            let cs = compositions(l.q - 1, r);
            let mut pk = Vec::with_capacity(r);
            let mut sk = Vec::with_capacity(r);
            for i in 0..r {
                let raw: Vec<f64> = cs
                    .iter()
                    .map(|c| {
                        let mut key = c.clone();
                        key[i] += 1;
                        multinomial(c) * l.tensor.get(&key) * pi_power(&params.pi, c)
                    })
                    .collect();
                let s: f64 = raw.iter().sum();
                let p: Vec<f64> = raw.iter().map(|x| if s > 0.0 { x / s } else { 0.0 }).collect();
                sk.push(WeightedIndex::new(&p).ok());
                pk.push(p);
            }
            comps.push(cs);
            probs.push(pk);
            samplers.push(sk);
        }
        Self {
            d: params.layers.iter().map(|l| l.d).collect(),
            q: params.q_sizes(),
            weights: params.weights.clone(),
            comps,
            probs,
            samplers,
        }
    }

    fn draw_comp(&self, k: usize, i: usize, rng: &mut StreamRng) -> usize {
        self.samplers[k][i]
            .as_ref()
            .expect("positive layer degree")
            .sample(rng)
    }
}

fn poisson(rng: &mut StreamRng, lambda: f64) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda).expect("finite rate").sample(rng) as u64
}

/// Samples one hypertree to depth `depth` rooted at type `root_type`.
pub fn sample_gw_tree(
    params: &ModelParams,
    root_type: usize,
    depth: usize,
    seed: u64,
) -> Result<HyperTree> {
    let law = OffspringLaw::new(params);
    let mut rng = substream(seed, &[tag::GW_TREE]);
    sample_gw_tree_with(&law, root_type, depth, DEFAULT_POPULATION_CAP, &mut rng)
}

pub fn sample_gw_tree_with(
    law: &OffspringLaw,
    root_type: usize,
    depth: usize,
    cap: usize,
    rng: &mut StreamRng,
) -> Result<HyperTree> {
    let mut nodes = vec![TreeNode {
        typ: root_type as u32,
        depth: 0,
        parent_edge: None,
    }];
    let mut edges: Vec<TreeEdge> = Vec::new();
    let mut child_edges: Vec<Vec<u32>> = vec![Vec::new()];
    let mut v = 0;
    while v < nodes.len() {
        let (typ, dv) = (nodes[v].typ as usize, nodes[v].depth);
        if (dv as usize) < depth {
            for k in 0..law.d.len() {
                let m = poisson(rng, law.d[k]);
                for _ in 0..m {
                    let c = &law.comps[k][law.draw_comp(k, typ, rng)];
                    let mut types: Vec<u32> = c
                        .iter()
                        .enumerate()
                        .flat_map(|(j, &cnt)| std::iter::repeat_n(j as u32, cnt as usize))
                        .collect();
                    types.shuffle(rng);
                    let eid = edges.len() as u32;
                    let mut children = Vec::with_capacity(types.len());
                    for t in types {
                        children.push(nodes.len() as u32);
                        nodes.push(TreeNode {
                            typ: t,
                            depth: dv + 1,
                            parent_edge: Some(eid),
                        });
                        child_edges.push(Vec::new());
                    }
                    if nodes.len() > cap {
                        return Err(Error::PopulationCap { cap });
                    }
                    edges.push(TreeEdge {
                        layer: k as u32,
                        weight: law.weights[k],
                        parent: v as u32,
                        children,
                    });
                    child_edges[v].push(eid);
                }
            }
        }
        v += 1;
    }
    Ok(HyperTree {
        depth,
        nodes,
        edges,
        child_edges,
    })
}

/// Generation profile of a hypertree: for each depth, the number of nodes of
/// each type reached through each multiset of layers, keyed by
/// `(type, per-layer edge counts along the path)`.
pub type Generation = BTreeMap<(u32, Vec<u32>), u64>;

/// Samples the generation profiles of a hypertree without materialising it.
///
/// Nodes sharing a type and a path-layer multiset have i.i.d. subtrees, so
/// a group of `c` such nodes spawns `Poisson(c d_k P(comp))` layer-`k` edges
/// of each child composition, independently across compositions. The joint
/// law of the profiles is the same as for [`sample_gw_tree`].
pub fn sample_generations(
    law: &OffspringLaw,
    root_type: usize,
    depth: usize,
    cap: usize,
    rng: &mut StreamRng,
) -> Result<Vec<Generation>> {
    let kk = law.d.len();
    let mut gens: Vec<Generation> = Vec::with_capacity(depth + 1);
    let mut first = Generation::new();
    first.insert((root_type as u32, vec![0; kk]), 1);
    gens.push(first);
    let mut total: u64 = 1;
    for _ in 0..depth {
        let mut next = Generation::new();
        for ((typ, path), &cnt) in gens.last().unwrap() {
            for k in 0..kk {
                let mut child_path = path.clone();
                child_path[k] += 1;
                for (ci, c) in law.comps[k].iter().enumerate() {
                    let p = law.probs[k][*typ as usize][ci];
                    if p == 0.0 {
                        continue;
                    }
                    let m = poisson(rng, cnt as f64 * law.d[k] * p);
                    if m == 0 {
                        continue;
                    }
                    for (j, &cj) in c.iter().enumerate() {
                        if cj > 0 {
                            *next.entry((j as u32, child_path.clone())).or_insert(0) +=
                                m * cj as u64;
                            total += m * cj as u64;
                        }
                    }
                }
            }
        }
        if total > cap as u64 {
            return Err(Error::PopulationCap { cap });
        }
        gens.push(next);
    }
    Ok(gens)
}
