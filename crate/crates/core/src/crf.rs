//! Label fusion over boundary hypotheses: unary costs from clustered outlier
//! scores, contrast-weighted pairwise costs over a feature-space kNN graph,
//! and exact energy minimization by s-t min-cut.

use crate::boundary::{CandidateBoundary, FusionLabel};
use crate::error::{Error, Result};
use crate::hog::HogDescriptor;
use crate::kmeans::kmeans2;
use crate::maxflow::{FlowNetwork, SINK, SOURCE};
use crate::scalar::Scalar;

/// Floor applied to label probabilities so unary costs stay finite.
pub const PROB_FLOOR: f64 = 1e-6;

/// Index of [`FusionLabel::Boundary`] in unary cost pairs.
pub const LBL_BOUNDARY: usize = 0;
/// Index of [`FusionLabel::Outlier`] in unary cost pairs.
pub const LBL_OUTLIER: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeSpec<T> {
    pub a: usize,
    pub b: usize,
    /// Contrast term `1 / (1 + L1(feat_a, feat_b))`, in (0, 1].
    pub scale: T,
}

/// Binary CRF over the hypothesis points.
#[derive(Debug, Clone)]
pub struct FusionGraph<T> {
    /// Per node: cost of labeling it `[boundary, outlier]`.
    pub unary: Vec<[T; 2]>,
    /// Symmetric neighbor pairs with their contrast scale, stored once with
    /// `a < b`.
    pub edges: Vec<EdgeSpec<T>>,
    /// Weight of the pairwise term.
    pub pairwise_weight: T,
}

/// A labeling together with its total energy.
#[derive(Debug, Clone, PartialEq)]
pub struct Labeling<T> {
    pub labels: Vec<FusionLabel>,
    pub energy: T,
}

fn label_index(l: FusionLabel) -> usize {
    match l {
        FusionLabel::Boundary => LBL_BOUNDARY,
        FusionLabel::Outlier => LBL_OUTLIER,
    }
}

/// Total energy of `labels` under the graph: sum of unary costs plus the
/// weighted contrast scale of every label-disagreeing edge.
pub fn energy_of<T: Scalar>(graph: &FusionGraph<T>, labels: &[FusionLabel]) -> T {
    let mut e = T::zero();
    for (u, &l) in graph.unary.iter().zip(labels.iter()) {
        e = e + u[label_index(l)];
    }
    for spec in &graph.edges {
        if labels[spec.a] != labels[spec.b] {
            e = e + graph.pairwise_weight * spec.scale;
        }
    }
    e
}

/// Pairwise potential of one edge: the contrast scale if the labels differ,
/// zero otherwise.
pub fn pairwise_potential<T: Scalar>(
    feat_a: &[T],
    feat_b: &[T],
    label_a: FusionLabel,
    label_b: FusionLabel,
) -> T {
    if label_a == label_b {
        return T::zero();
    }
    let l1: T = feat_a
        .iter()
        .zip(feat_b.iter())
        .map(|(&x, &y)| (x - y).abs())
        .sum();
    T::one() / (T::one() + l1)
}

fn min_max_normalize<T: Scalar>(values: &[T]) -> Vec<T> {
    let min = values.iter().copied().fold(T::infinity(), T::min);
    let max = values.iter().copied().fold(T::neg_infinity(), T::max);
    let span = max - min;
    if span <= T::from_f64_(1e-12) {
        vec![T::zero(); values.len()]
    } else {
        values.iter().map(|&v| (v - min) / span).collect()
    }
}

/// Unary costs from the two outlier scores: min-max normalize each score over
/// the slice, cluster the 2D score vectors with seeded two-means (10
/// restarts), call the lower-mean-norm cluster "boundary", and convert
/// centroid distances into probabilities `Pr = d_other / (d_self + d_other)`.
/// Cost is `-ln(max(Pr, 1e-6))`.
pub fn unary_potentials<T: Scalar>(
    candidates: &CandidateBoundary<T>,
    seed: u64,
) -> Result<Vec<[T; 2]>> {
    let n = candidates.len();
    if n == 0 {
        return Err(Error::TooFewCandidates { need: 1, got: 0 });
    }
    let geo: Vec<T> = candidates
        .candidates
        .iter()
        .map(|c| {
            c.geo_score
                .ok_or_else(|| Error::Misaligned("candidate missing geometric score".into()))
        })
        .collect::<Result<_>>()?;
    let app: Vec<T> = candidates
        .candidates
        .iter()
        .map(|c| {
            c.app_score
                .ok_or_else(|| Error::Misaligned("candidate missing appearance score".into()))
        })
        .collect::<Result<_>>()?;

    let geo_n = min_max_normalize(&geo);
    let app_n = min_max_normalize(&app);
    let points: Vec<(T, T)> = geo_n.into_iter().zip(app_n).collect();

    let half = T::from_f64_(0.5);
    let ln2 = T::from_f64_(std::f64::consts::LN_2);
    let all_same = points.iter().all(|&p| p == points[0]);
    if all_same {
        return Ok(vec![[ln2, ln2]; n]);
    }

    let fit = kmeans2(&points, 10, seed);
    let mut mean_norm = [T::zero(); 2];
    let mut count = [0usize; 2];
    for (&p, &a) in points.iter().zip(fit.assignment.iter()) {
        mean_norm[a] = mean_norm[a] + (p.0 * p.0 + p.1 * p.1).sqrt();
        count[a] += 1;
    }
    for c in 0..2 {
        if count[c] > 0 {
            mean_norm[c] = mean_norm[c] / T::from_usize_(count[c]);
        }
    }
    let inlier_cluster = if count[0] == 0 {
        1
    } else if count[1] == 0 {
        0
    } else if mean_norm[0] <= mean_norm[1] {
        0
    } else {
        1
    };
    let c_in = fit.centroids[inlier_cluster];
    let c_out = fit.centroids[1 - inlier_cluster];

    let floor = T::from_f64_(PROB_FLOOR);
    let costs = points
        .iter()
        .map(|&p| {
            let d_in = ((p.0 - c_in.0).powi(2) + (p.1 - c_in.1).powi(2)).sqrt();
            let d_out = ((p.0 - c_out.0).powi(2) + (p.1 - c_out.1).powi(2)).sqrt();
            let total = d_in + d_out;
            let (pr_in, pr_out) = if total <= T::from_f64_(1e-12) {
                (half, half)
            } else {
                (d_out / total, d_in / total)
            };
            [
                -(pr_in.max(floor).ln()),
                -(pr_out.max(floor).ln()),
            ]
        })
        .collect();
    Ok(costs)
}

/// Symmetric kNN graph under L1 distance on the fusion features. With
/// `n <= k_nn` every pair is connected.
pub fn build_edges<T: Scalar>(features: &[Vec<T>], k_nn: usize) -> Vec<EdgeSpec<T>> {
    let n = features.len();
    if n < 2 {
        return Vec::new();
    }
    let l1 = |i: usize, j: usize| -> T {
        features[i]
            .iter()
            .zip(features[j].iter())
            .map(|(&x, &y)| (x - y).abs())
            .sum()
    };
    let mut pairs = std::collections::BTreeSet::new();
    if n <= k_nn + 1 {
        for i in 0..n {
            for j in (i + 1)..n {
                pairs.insert((i, j));
            }
        }
    } else {
        for i in 0..n {
            let mut dists: Vec<(T, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (l1(i, j), j))
                .collect();
            dists.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            for &(_, j) in dists.iter().take(k_nn) {
                pairs.insert((i.min(j), i.max(j)));
            }
        }
    }
    pairs
        .into_iter()
        .map(|(a, b)| EdgeSpec {
            a,
            b,
            scale: T::one() / (T::one() + l1(a, b)),
        })
        .collect()
}

/// Per-candidate fusion features: the appearance descriptor concatenated with
/// the min-max-normalized skin distance and the ray angle as sin/cos.
pub fn fusion_features<T: Scalar>(
    candidates: &CandidateBoundary<T>,
    descriptors: &[HogDescriptor<T>],
) -> Result<Vec<Vec<T>>> {
    if descriptors.len() != candidates.len() {
        return Err(Error::Misaligned(format!(
            "{} descriptors for {} candidates",
            descriptors.len(),
            candidates.len()
        )));
    }
    let dist: Vec<T> = candidates
        .candidates
        .iter()
        .map(|c| c.skin_distance)
        .collect();
    let dist_n = min_max_normalize(&dist);
    Ok(candidates
        .candidates
        .iter()
        .zip(descriptors.iter())
        .zip(dist_n)
        .map(|((c, d), dn)| {
            let mut f = d.values.clone();
            f.push(dn);
            f.push(c.ray_angle.sin());
            f.push(c.ray_angle.cos());
            f
        })
        .collect())
}

/// Exact global minimizer. Binary labels with nonnegative contrast (Potts)
/// pairwise terms form a submodular energy, so one s-t min-cut solves it:
/// source->i carries the outlier cost, i->sink the boundary cost, neighbors
/// get undirected capacity `w * scale`. Source-side nodes take the boundary
/// label.
pub fn minimize_energy<T: Scalar>(graph: &FusionGraph<T>) -> Result<Labeling<T>> {
    let n = graph.unary.len();
    if graph.pairwise_weight < T::zero() {
        return Err(Error::Param("pairwise weight must be >= 0".into()));
    }
    for u in &graph.unary {
        if !u[0].is_finite() || !u[1].is_finite() {
            return Err(Error::Param("non-finite unary potential".into()));
        }
    }
    for e in &graph.edges {
        if e.a >= n || e.b >= n || e.a == e.b {
            return Err(Error::Misaligned(format!("bad edge ({}, {})", e.a, e.b)));
        }
        if !e.scale.is_finite() || e.scale < T::zero() {
            return Err(Error::Param("non-finite or negative edge scale".into()));
        }
    }

    let mut net = FlowNetwork::new(n);
    for (i, u) in graph.unary.iter().enumerate() {
        let node = FlowNetwork::node(i);
        net.add_edge(SOURCE, node, u[LBL_OUTLIER].to_f64().unwrap());
        net.add_edge(node, SINK, u[LBL_BOUNDARY].to_f64().unwrap());
    }
    let w = graph.pairwise_weight.to_f64().unwrap();
    for e in &graph.edges {
        let cap = w * e.scale.to_f64().unwrap();
        if cap > 0.0 {
            net.add_undirected(FlowNetwork::node(e.a), FlowNetwork::node(e.b), cap);
        }
    }
    let (_, side) = net.max_flow();
    let labels: Vec<FusionLabel> = (0..n)
        .map(|i| {
            if side[FlowNetwork::node(i)] {
                FusionLabel::Boundary
            } else {
                FusionLabel::Outlier
            }
        })
        .collect();
    let energy = energy_of(graph, &labels);
    Ok(Labeling { labels, energy })
}

/// Exhaustive minimizer for cross-checking; limited to 20 nodes.
pub fn brute_force_minimize<T: Scalar>(graph: &FusionGraph<T>) -> Result<Labeling<T>> {
    let n = graph.unary.len();
    if n > 20 {
        return Err(Error::Param(format!("brute force capped at 20 nodes, got {n}")));
    }
    let mut best: Option<Labeling<T>> = None;
    for mask in 0..(1u32 << n) {
        let labels: Vec<FusionLabel> = (0..n)
            .map(|i| {
                if mask & (1 << i) != 0 {
                    FusionLabel::Outlier
                } else {
                    FusionLabel::Boundary
                }
            })
            .collect();
        let energy = energy_of(graph, &labels);
        if best.as_ref().map_or(true, |b| energy < b.energy) {
            best = Some(Labeling { labels, energy });
        }
    }
    Ok(best.expect("at least one labeling"))
}
