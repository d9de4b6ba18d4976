//! Customer graphs and the two-layer graph-convolutional autoencoder whose
//! 2-D node embeddings feed the fulfillment agent.
//!
//! Encoder: `H = ReLU(Â X W1)`, `E = Â H W2`, with `Â` the symmetrically
//! normalized adjacency including self-loops. Decoder: similarity
//! `1 - |e_i - e_j| / max |e_a - e_b|`, trained with binary cross-entropy
//! against edge labels on all edges plus an equal number of sampled
//! non-edges.

use rand::seq::index;

use crate::env::OrderId;
use crate::error::{Error, Result};
use crate::geometry::{distance, Point};
use crate::nn::{Activation, DenseNet, Grads};
use crate::rng::Rng;

pub const EMBEDDING_DIM: usize = 2;
pub const DEFAULT_HIDDEN: usize = 16;
const PROB_CLAMP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GraphSnapshot {
    pub order_ids: Vec<OrderId>,
    pub features: Vec<[f64; 2]>,
    /// Symmetric, no self-loops.
    pub adjacency: Vec<Vec<bool>>,
}

impl GraphSnapshot {
    pub fn len(&self) -> usize {
        self.order_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order_ids.is_empty()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.len();
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).filter(|&(i, j)| self.adjacency[i][j]).collect()
    }

    pub fn non_edges(&self) -> Vec<(usize, usize)> {
        let n = self.len();
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).filter(|&(i, j)| !self.adjacency[i][j]).collect()
    }

    /// Reorders nodes: node `k` of the result is node `perm[k]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            order_ids: perm.iter().map(|&p| self.order_ids[p]).collect(),
            features: perm.iter().map(|&p| self.features[p]).collect(),
            adjacency: perm.iter().map(|&a| perm.iter().map(|&b| self.adjacency[a][b]).collect()).collect(),
        }
    }
}

/// Customers `i` and `j` are linked when they are no farther apart than
/// either one is from its nearest warehouse.
pub fn build_graph(nodes: &[(OrderId, Point)], warehouses: &[Point]) -> GraphSnapshot {
    let nearest: Vec<f64> = nodes
        .iter()
        .map(|(_, p)| warehouses.iter().map(|w| distance(*p, *w)).fold(f64::INFINITY, f64::min))
        .collect();
    let n = nodes.len();
    let mut adjacency = vec![vec![false; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let linked = distance(nodes[i].1, nodes[j].1) <= nearest[i].min(nearest[j]);
            adjacency[i][j] = linked;
            adjacency[j][i] = linked;
        }
    }
    GraphSnapshot {
        order_ids: nodes.iter().map(|(id, _)| *id).collect(),
        features: nodes.iter().map(|(_, p)| [p.x, p.y]).collect(),
        adjacency,
    }
}

/// `D^-1/2 (A + I) D^-1/2`, dense.
pub fn normalized_adjacency(adjacency: &[Vec<bool>]) -> Vec<Vec<f64>> {
    let n = adjacency.len();
    let deg: Vec<f64> = adjacency.iter().map(|row| 1.0 + row.iter().filter(|&&e| e).count() as f64).collect();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j || adjacency[i][j] { 1.0 / (deg[i] * deg[j]).sqrt() } else { 0.0 })
                .collect()
        })
        .collect()
}

fn propagate(a_hat: &[Vec<f64>], x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let cols = x.first().map_or(0, |r| r.len());
    a_hat
        .iter()
        .map(|row| {
            let mut out = vec![0.0; cols];
            for (a, xr) in row.iter().zip(x) {
                if *a != 0.0 {
                    for (o, v) in out.iter_mut().zip(xr) {
                        *o += a * v;
                    }
                }
            }
            out
        })
        .collect()
}

/// `X W` where the weight is stored as a dense layer (`outputs x inputs`).
fn project(x: &[Vec<f64>], w: &[f64], inputs: usize, outputs: usize) -> Vec<Vec<f64>> {
    x.iter()
        .map(|r| (0..outputs).map(|o| (0..inputs).map(|k| r[k] * w[o * inputs + k]).sum()).collect())
        .collect()
}

#[derive(Debug, Clone)]
struct Forward {
    ax: Vec<Vec<f64>>,
    h: Vec<Vec<f64>>,
    ah: Vec<Vec<f64>>,
    e: Vec<Vec<f64>>,
}

/// Two GCN layers stored as a bias-free `[2, hidden, 2]` dense net so the
/// parameters share the dense checkpoint format.
#[derive(Debug, Clone, PartialEq)]
pub struct GaeModel {
    pub net: DenseNet,
}

/// A labelled node pair for reconstruction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pair {
    pub i: usize,
    pub j: usize,
    pub linked: bool,
}

impl GaeModel {
    pub fn new(hidden: usize, rng: &mut Rng) -> Self {
        let mut net = DenseNet::new(&[2, hidden, EMBEDDING_DIM], Activation::Relu, rng);
        for l in &mut net.layers {
            l.biases.iter_mut().for_each(|b| *b = 0.0);
        }
        Self { net }
    }

    pub fn zeros(hidden: usize) -> Self {
        Self { net: DenseNet::zeros(&[2, hidden, EMBEDDING_DIM], Activation::Relu) }
    }

    pub fn from_net(net: DenseNet) -> Result<Self> {
        let sizes = net.sizes();
        if sizes.len() != 3 || sizes[0] != 2 || sizes[2] != EMBEDDING_DIM {
            return Err(Error::Checkpoint(format!("GAE needs sizes [2, h, 2], got {sizes:?}")));
        }
        Ok(Self { net })
    }

    pub fn hidden(&self) -> usize {
        self.net.layers[0].outputs
    }

    fn forward(&self, a_hat: &[Vec<f64>], features: &[[f64; 2]]) -> Forward {
        let x: Vec<Vec<f64>> = features.iter().map(|f| f.to_vec()).collect();
        let (l1, l2) = (&self.net.layers[0], &self.net.layers[1]);
        let ax = propagate(a_hat, &x);
        let mut h = project(&ax, &l1.weights, l1.inputs, l1.outputs);
        for row in &mut h {
            row.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        let ah = propagate(a_hat, &h);
        let e = project(&ah, &l2.weights, l2.inputs, l2.outputs);
        Forward { ax, h, ah, e }
    }

    pub fn encode(&self, graph: &GraphSnapshot) -> Vec<[f64; 2]> {
        let a_hat = normalized_adjacency(&graph.adjacency);
        self.forward(&a_hat, &graph.features).e.into_iter().map(|r| [r[0], r[1]]).collect()
    }

    /// Binary cross-entropy over `pairs` and its gradient.
    pub fn loss_and_gradient(&self, graph: &GraphSnapshot, pairs: &[Pair]) -> (f64, Grads) {
        let a_hat = normalized_adjacency(&graph.adjacency);
        self.loss_and_gradient_with(&a_hat, graph, pairs)
    }

    fn loss_and_gradient_with(&self, a_hat: &[Vec<f64>], graph: &GraphSnapshot, pairs: &[Pair]) -> (f64, Grads) {
        let fwd = self.forward(a_hat, &graph.features);
        let n = graph.len();
        let mut grads: Grads = self
            .net
            .layers
            .iter()
            .map(|l| crate::nn::LayerGrads { weights: vec![0.0; l.weights.len()], biases: vec![0.0; l.biases.len()] })
            .collect();
        if pairs.is_empty() || n < 2 {
            return (0.0, grads);
        }
        let e = &fwd.e;
        let (max_dist, arg) = max_pair_distance(e);
        let scale = 1.0 / pairs.len() as f64;
        let mut loss = 0.0;
        let mut d_e = vec![vec![0.0; EMBEDDING_DIM]; n];
        if max_dist <= 0.0 {
            // similarity is identically 1
            for p in pairs {
                let prob = 1.0 - PROB_CLAMP;
                loss -= if p.linked { prob.ln() } else { (1.0 - prob).ln() };
            }
            return (loss * scale, grads);
        }
        let mut d_max = 0.0;
        for p in pairs {
            let dist = emb_distance(&e[p.i], &e[p.j]);
            let s = 1.0 - dist / max_dist;
            let prob = s.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            let y = if p.linked { 1.0 } else { 0.0 };
            loss -= y * prob.ln() + (1.0 - y) * (1.0 - prob).ln();
            if s <= PROB_CLAMP || s >= 1.0 - PROB_CLAMP {
                continue;
            }
            let g = scale * (-y / prob + (1.0 - y) / (1.0 - prob));
            // s = 1 - dist / M
            let g_dist = -g / max_dist;
            d_max += g * dist / (max_dist * max_dist);
            if dist > 0.0 {
                for k in 0..EMBEDDING_DIM {
                    let u = (e[p.i][k] - e[p.j][k]) / dist;
                    d_e[p.i][k] += g_dist * u;
                    d_e[p.j][k] -= g_dist * u;
                }
            }
        }
        if let Some((a, b)) = arg {
            for k in 0..EMBEDDING_DIM {
                let u = (e[a][k] - e[b][k]) / max_dist;
                d_e[a][k] += d_max * u;
                d_e[b][k] -= d_max * u;
            }
        }
        self.backward(a_hat, &fwd, &d_e, &mut grads);
        (loss * scale, grads)
    }

    fn backward(&self, a_hat: &[Vec<f64>], fwd: &Forward, d_e: &[Vec<f64>], grads: &mut Grads) {
        let (l1, l2) = (&self.net.layers[0], &self.net.layers[1]);
        // E = AH W2
        for (row_in, row_d) in fwd.ah.iter().zip(d_e) {
            for o in 0..l2.outputs {
                for k in 0..l2.inputs {
                    grads[1].weights[o * l2.inputs + k] += row_d[o] * row_in[k];
                }
            }
        }
        // d(AH) = dE W2^T, dH = Â^T d(AH) with Â symmetric
        let d_ah: Vec<Vec<f64>> = d_e
            .iter()
            .map(|row| (0..l2.inputs).map(|k| (0..l2.outputs).map(|o| row[o] * l2.weights[o * l2.inputs + k]).sum()).collect())
            .collect();
        let mut d_z = propagate(a_hat, &d_ah);
        for (dz, h) in d_z.iter_mut().zip(&fwd.h) {
            for (d, v) in dz.iter_mut().zip(h) {
                if *v <= 0.0 {
                    *d = 0.0;
                }
            }
        }
        for (row_in, row_d) in fwd.ax.iter().zip(&d_z) {
            for o in 0..l1.outputs {
                for k in 0..l1.inputs {
                    grads[0].weights[o * l1.inputs + k] += row_d[o] * row_in[k];
                }
            }
        }
    }

    /// Finite-difference check (step 1e-5) of the reconstruction gradient
    /// with respect to both GCN weight matrices.
    pub fn gradient_check(&self, graph: &GraphSnapshot, pairs: &[Pair]) -> f64 {
        let a_hat = normalized_adjacency(&graph.adjacency);
        let (_, grads) = self.loss_and_gradient_with(&a_hat, graph, pairs);
        let h = 1e-5;
        let mut probe = self.clone();
        let mut worst: f64 = 0.0;
        for k in 0..2 {
            for idx in 0..probe.net.layers[k].weights.len() {
                let orig = probe.net.layers[k].weights[idx];
                probe.net.layers[k].weights[idx] = orig + h;
                let plus = probe.loss_and_gradient_with(&a_hat, graph, pairs).0;
                probe.net.layers[k].weights[idx] = orig - h;
                let minus = probe.loss_and_gradient_with(&a_hat, graph, pairs).0;
                probe.net.layers[k].weights[idx] = orig;
                let numeric = (plus - minus) / (2.0 * h);
                let a = grads[k].weights[idx];
                worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6));
            }
        }
        worst
    }
}

fn emb_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn max_pair_distance(e: &[Vec<f64>]) -> (f64, Option<(usize, usize)>) {
    let mut best = (0.0, None);
    for i in 0..e.len() {
        for j in i + 1..e.len() {
            let d = emb_distance(&e[i], &e[j]);
            if d > best.0 {
                best = (d, Some((i, j)));
            }
        }
    }
    best
}

/// Largest pairwise distance among embeddings.
pub fn max_embedding_distance(e: &[[f64; 2]]) -> f64 {
    let rows: Vec<Vec<f64>> = e.iter().map(|r| r.to_vec()).collect();
    max_pair_distance(&rows).0
}

/// `1 - |e1 - e2| / max_dist`, clamped to `[0, 1]`; identically 1 when
/// `max_dist` is not positive.
pub fn decode_similarity(e1: [f64; 2], e2: [f64; 2], max_dist: f64) -> f64 {
    if max_dist <= 0.0 {
        return 1.0;
    }
    (1.0 - emb_distance(&e1, &e2) / max_dist).clamp(0.0, 1.0)
}

/// All edges plus an equal number of uniformly sampled non-edges.
pub fn sample_pairs(graph: &GraphSnapshot, rng: &mut Rng) -> Vec<Pair> {
    let pos = graph.edges();
    let neg = graph.non_edges();
    let k = pos.len().min(neg.len());
    let mut pairs: Vec<Pair> = pos.iter().map(|&(i, j)| Pair { i, j, linked: true }).collect();
    pairs.extend(index::sample(rng, neg.len(), k).into_iter().map(|t| Pair { i: neg[t].0, j: neg[t].1, linked: false }));
    pairs
}

/// Trains on every graph once per epoch (one Adam step per graph, fresh
/// negatives each time). Returns the mean loss of each epoch.
pub fn train_gae(model: &mut GaeModel, graphs: &[GraphSnapshot], epochs: usize, lr: f64, rng: &mut Rng) -> Result<Vec<f64>> {
    if graphs.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    let a_hats: Vec<Vec<Vec<f64>>> = graphs.iter().map(|g| normalized_adjacency(&g.adjacency)).collect();
    let mut history = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        let mut total = 0.0;
        for (g, a_hat) in graphs.iter().zip(&a_hats) {
            let pairs = sample_pairs(g, rng);
            let (loss, grads) = model.loss_and_gradient_with(a_hat, g, &pairs);
            model.net.apply_adam(&grads, lr);
            total += loss;
        }
        history.push(total / graphs.len() as f64);
    }
    Ok(history)
}

/// Area under the ROC curve of similarity scores, positives vs negatives.
/// Ties count half.
pub fn auc(pos: &[f64], neg: &[f64]) -> Option<f64> {
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let mut all: Vec<(f64, bool)> = pos.iter().map(|&s| (s, true)).chain(neg.iter().map(|&s| (s, false))).collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    // mid-ranks over tie groups
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        let mid = (i + 1 + j) as f64 / 2.0;
        rank_sum += mid * all[i..j].iter().filter(|x| x.1).count() as f64;
        i = j;
    }
    let (np, nn) = (pos.len() as f64, neg.len() as f64);
    Some((rank_sum - np * (np + 1.0) / 2.0) / (np * nn))
}

/// Edge-reconstruction AUC of a model on one graph.
pub fn edge_auc(model: &GaeModel, graph: &GraphSnapshot, rng: &mut Rng) -> Option<f64> {
    let e = model.encode(graph);
    let m = max_embedding_distance(&e);
    let pairs = sample_pairs(graph, rng);
    let score = |p: &Pair| decode_similarity(e[p.i], e[p.j], m);
    let pos: Vec<f64> = pairs.iter().filter(|p| p.linked).map(score).collect();
    let neg: Vec<f64> = pairs.iter().filter(|p| !p.linked).map(score).collect();
    auc(&pos, &neg)
}

/// Pooled AUC over many graphs (scores from each graph's own decoder).
pub fn mean_edge_auc(model: &GaeModel, graphs: &[GraphSnapshot], rng: &mut Rng) -> Option<f64> {
    let vals: Vec<f64> = graphs.iter().filter_map(|g| edge_auc(model, g, rng)).collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::QUADRANT_CENTERS;
    use crate::rng::seeded;

    fn ids(n: u64) -> impl Iterator<Item = OrderId> {
        (0..n).map(OrderId)
    }

    #[test]
    fn adjacency_rule() {
        // both 0.3 from warehouse (0.5,0.5), 0.1 apart
        let nodes: Vec<_> = ids(2).zip([Point::new(0.5, 0.8), Point::new(0.6, 0.8)]).collect();
        let g = build_graph(&nodes, &[Point::new(0.5, 0.5), Point::new(0.6, 0.5)]);
        assert!(g.adjacency[0][1] && g.adjacency[1][0]);

        let nodes: Vec<_> = ids(2).zip([Point::new(0.5, 0.8), Point::new(0.9, 0.8)]).collect();
        let g = build_graph(&nodes, &[Point::new(0.5, 0.5)]);
        assert!(!g.adjacency[0][1]);

        let g = build_graph(&[(OrderId(0), Point::new(0.1, 0.1))], &QUADRANT_CENTERS);
        assert!(g.edges().is_empty());
        assert!(!g.adjacency[0][0]);
    }

    #[test]
    fn normalization_cases() {
        let a = normalized_adjacency(&[vec![false, false], vec![false, false]]);
        assert_eq!(a, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let a = normalized_adjacency(&[vec![false, true], vec![true, false]]);
        assert!(a.iter().flatten().all(|v| (v - 0.5).abs() < 1e-15));
        // 4-cycle: every node has degree 2
        let c = |i: usize, j: usize| (i + 1) % 4 == j || (j + 1) % 4 == i;
        let adj: Vec<Vec<bool>> = (0..4).map(|i| (0..4).map(|j| c(i, j)).collect()).collect();
        for row in normalized_adjacency(&adj) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_model_embeds_at_origin() {
        let nodes: Vec<_> = ids(3).zip([Point::new(0.1, 0.2), Point::new(0.3, 0.2), Point::new(-0.5, 0.9)]).collect();
        let g = build_graph(&nodes, &QUADRANT_CENTERS);
        assert!(GaeModel::zeros(16).encode(&g).iter().all(|e| *e == [0.0, 0.0]));
    }

    #[test]
    fn similarity_decoder() {
        assert_eq!(decode_similarity([0.3, 0.1], [0.3, 0.1], 2.0), 1.0);
        assert_eq!(decode_similarity([0.0, 0.0], [2.0, 0.0], 2.0), 0.0);
        assert!((decode_similarity([0.0, 0.0], [1.0, 0.0], 2.0) - 0.5).abs() < 1e-15);
        assert_eq!(decode_similarity([0.0, 0.0], [1.0, 0.0], 0.0), 1.0);
    }

    #[test]
    fn auc_extremes() {
        assert_eq!(auc(&[0.9, 0.8], &[0.1, 0.2]), Some(1.0));
        assert_eq!(auc(&[0.1], &[0.9]), Some(0.0));
        assert_eq!(auc(&[0.5, 0.5], &[0.5]), Some(0.5));
        assert_eq!(auc(&[], &[0.5]), None);
    }

    #[test]
    fn train_rejects_empty_buffer() {
        let mut m = GaeModel::new(4, &mut seeded(0));
        assert!(matches!(train_gae(&mut m, &[], 1, 0.01, &mut seeded(0)), Err(Error::EmptyBuffer)));
    }
}
