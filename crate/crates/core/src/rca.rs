//! Root-cause windows: service-count vectors, agglomerative clustering,
//! cluster-size balancing of the U class, and per-window line ranking.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ingest::LogMessage;
use crate::math;
use crate::pumodel::LineScore;
use crate::weaklabel::{WeakEntry, WeakLabel, WeakLabeledDataset};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RcaWarning {
    EmptyWindow(u32),
    /// The window holds fewer lines than requested.
    ShortWindow { window_id: u32, available: usize },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VectorMode {
    #[default]
    Counts,
    Binary,
}

/// Per-service line counts of one window, over every service in the corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowVector {
    pub window_id: u32,
    pub counts: Vec<f64>,
    /// U lines whose lowest covering window is this one.
    pub line_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowVectors {
    /// Sorted unique sources; the vector dimension.
    pub services: Vec<String>,
    pub vectors: Vec<WindowVector>,
    pub warnings: Vec<RcaWarning>,
}

pub fn vectorize_windows(dataset: &WeakLabeledDataset, corpus: &[LogMessage], mode: VectorMode) -> Result<WindowVectors> {
    let n_windows = dataset.window_count();
    if n_windows == 0 {
        return Err(Error::Invalid("dataset has no failure windows".into()));
    }
    let services: Vec<String> = corpus
        .iter()
        .map(|m| m.source.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(String::from)
        .collect();
    let column: BTreeMap<&str, usize> = services.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut vectors: Vec<WindowVector> = (0..n_windows)
        .map(|w| WindowVector { window_id: w as u32, counts: vec![0.0; services.len()], line_count: 0 })
        .collect();
    let mut members = vec![0usize; n_windows];
    for e in dataset.entries.iter().filter(|e| e.label == WeakLabel::U) {
        let msg = corpus.get(e.line).ok_or(Error::LengthMismatch { left: e.line, right: corpus.len() })?;
        let col = column[msg.source.as_str()];
        for &w in &e.windows {
            vectors[w as usize].counts[col] += 1.0;
            members[w as usize] += 1;
        }
        vectors[e.windows[0] as usize].line_count += 1;
    }
    if mode == VectorMode::Binary {
        for v in &mut vectors {
            for c in &mut v.counts {
                *c = if *c > 0.0 { 1.0 } else { 0.0 };
            }
        }
    }
    let warnings = (0..n_windows).filter(|&w| members[w] == 0).map(|w| RcaWarning::EmptyWindow(w as u32)).collect();
    Ok(WindowVectors { services, vectors, warnings })
}

/// `1 - cos(u, v)`; two zero vectors are at distance 0, a zero and a
/// non-zero vector at distance 1.
pub fn cosine_distance(u: &[f64], v: &[f64]) -> f64 {
    let nu = math::norm(u);
    let nv = math::norm(v);
    match (nu == 0.0, nv == 0.0) {
        (true, true) => 0.0,
        (true, false) | (false, true) => 1.0,
        _ => (1.0 - math::dot(u, v) / (nu * nv)).max(0.0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterConfig {
    /// Average-linkage merges at or below this cosine distance are kept.
    pub distance_threshold: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self { distance_threshold: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterInfo {
    pub id: u32,
    /// Member window ids, ascending.
    pub windows: Vec<u32>,
    /// Sum of member windows' line counts.
    pub line_count: usize,
}

/// Clusters are numbered by their smallest window id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clustering {
    /// `(window_id, cluster_id)`, ascending by window id.
    pub assignment: Vec<(u32, u32)>,
    pub clusters: Vec<ClusterInfo>,
}

impl Clustering {
    pub fn cluster_of(&self, window_id: u32) -> Option<u32> {
        self.assignment.binary_search_by_key(&window_id, |&(w, _)| w).ok().map(|i| self.assignment[i].1)
    }
}

/// One agglomerative merge: the two cluster slots and the linkage distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub distance: f64,
}

/// Average-linkage dendrogram via the nearest-neighbor chain, `O(n²)` time
/// and memory. Merges come out in chain order, not sorted by distance; the
/// merged cluster keeps slot `min(a, b)`.
pub fn average_linkage(points: &[Vec<f64>]) -> Vec<Merge> {
    let n = points.len();
    let mut dist = vec![0.0f64; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = cosine_distance(&points[i], &points[j]);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut remaining = n;
    let mut chain: Vec<usize> = Vec::new();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    while remaining > 1 {
        if chain.is_empty() {
            chain.push(active.iter().position(|&a| a).unwrap());
        }
        loop {
            let top = *chain.last().unwrap();
            let prev = if chain.len() >= 2 { Some(chain[chain.len() - 2]) } else { None };
            // nearest active neighbor; the previous chain element wins ties
            let mut best = prev;
            let mut best_d = prev.map_or(f64::INFINITY, |p| dist[top * n + p]);
            for k in 0..n {
                if !active[k] || k == top {
                    continue;
                }
                let d = dist[top * n + k];
                if d < best_d {
                    best_d = d;
                    best = Some(k);
                }
            }
            let next = best.unwrap();
            if Some(next) == prev {
                break;
            }
            chain.push(next);
        }
        let x = chain.pop().unwrap();
        let y = chain.pop().unwrap();
        let (a, b) = if x < y { (x, y) } else { (y, x) };
        merges.push(Merge { a, b, distance: dist[a * n + b] });
        let (sa, sb) = (size[a] as f64, size[b] as f64);
        for k in 0..n {
            if active[k] && k != a && k != b {
                let d = (sa * dist[a * n + k] + sb * dist[b * n + k]) / (sa + sb);
                dist[a * n + k] = d;
                dist[k * n + a] = d;
            }
        }
        size[a] += size[b];
        active[b] = false;
        remaining -= 1;
    }
    merges
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Groups windows by cutting the average-linkage dendrogram at the
/// configured distance; the number of clusters follows from the data.
pub fn cluster_windows(vectors: &[WindowVector], cfg: &ClusterConfig) -> Result<Clustering> {
    if vectors.is_empty() {
        return Err(Error::Invalid("no window vectors to cluster".into()));
    }
    // Fixed order by window id makes the result independent of input order.
    let mut order: Vec<&WindowVector> = vectors.iter().collect();
    order.sort_by_key(|v| v.window_id);
    let points: Vec<Vec<f64>> = order.iter().map(|v| v.counts.clone()).collect();
    let merges = average_linkage(&points);
    let mut parent: Vec<usize> = (0..order.len()).collect();
    for m in merges.iter().filter(|m| m.distance <= cfg.distance_threshold) {
        let ra = find(&mut parent, m.a);
        let rb = find(&mut parent, m.b);
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut cluster_of_root: BTreeMap<usize, u32> = BTreeMap::new();
    let mut clusters: Vec<ClusterInfo> = Vec::new();
    let mut assignment = Vec::with_capacity(order.len());
    for (i, v) in order.iter().enumerate() {
        let root = find(&mut parent, i);
        let next = clusters.len() as u32;
        let id = *cluster_of_root.entry(root).or_insert(next);
        if id == next {
            clusters.push(ClusterInfo { id, windows: Vec::new(), line_count: 0 });
        }
        clusters[id as usize].windows.push(v.window_id);
        clusters[id as usize].line_count += v.line_count;
        assignment.push((v.window_id, id));
    }
    Ok(Clustering { assignment, clusters })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub cluster_id: u32,
    pub size: usize,
    pub target: f64,
}

impl PlanEntry {
    /// Target rounded to a whole line count.
    pub fn rounded_target(&self) -> usize {
        math::round(self.target).max(0.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalancePlan {
    pub entries: Vec<PlanEntry>,
}

/// Affine map of cluster sizes onto `[max/2, max]`: the smallest cluster
/// gets `max/2`, the largest `max`. When all sizes are equal the sizes are
/// kept.
pub fn balance_targets(sizes: &[usize]) -> Vec<f64> {
    let (Some(&min), Some(&max)) = (sizes.iter().min(), sizes.iter().max()) else {
        return Vec::new();
    };
    if min == max {
        return sizes.iter().map(|&s| s as f64).collect();
    }
    let (min, max) = (min as f64, max as f64);
    let half = max / 2.0;
    sizes.iter().map(|&s| (s as f64 - min) / (max - min) * (max - half) + half).collect()
}

pub fn target_sizes(clustering: &Clustering) -> Result<BalancePlan> {
    if clustering.clusters.is_empty() {
        return Err(Error::Invalid("clustering has no clusters".into()));
    }
    let sizes: Vec<usize> = clustering.clusters.iter().map(|c| c.line_count).collect();
    let targets = balance_targets(&sizes);
    Ok(BalancePlan {
        entries: clustering
            .clusters
            .iter()
            .zip(targets)
            .map(|(c, target)| PlanEntry { cluster_id: c.id, size: c.line_count, target })
            .collect(),
    })
}

/// Resamples the U lines of every cluster to its rounded target: seeded
/// duplication when growing, seeded uniform removal when shrinking. P lines
/// are untouched. A U line belongs to the cluster of its lowest window.
pub fn rebalance(dataset: &WeakLabeledDataset, clustering: &Clustering, plan: &BalancePlan, seed: u64) -> Result<WeakLabeledDataset> {
    let targets: BTreeMap<u32, usize> = plan.entries.iter().map(|e| (e.cluster_id, e.rounded_target())).collect();
    let mut members: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, e) in dataset.entries.iter().enumerate() {
        if e.label == WeakLabel::U {
            let c = clustering
                .cluster_of(e.windows[0])
                .ok_or_else(|| Error::Invalid(alloc::format!("window {} is not clustered", e.windows[0])))?;
            if !targets.contains_key(&c) {
                return Err(Error::Invalid(alloc::format!("plan does not cover cluster {}", c)));
            }
            members.entry(c).or_default().push(i);
        }
    }
    let mut copies = vec![1usize; dataset.entries.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (cluster, idx) in &members {
        let target = targets[cluster];
        let current = idx.len();
        if target < current {
            let keep: BTreeSet<usize> = sample(&mut rng, current, target).into_iter().collect();
            for (k, &i) in idx.iter().enumerate() {
                if !keep.contains(&k) {
                    copies[i] = 0;
                }
            }
        } else {
            for _ in current..target {
                copies[idx[rng.gen_range(0..current)]] += 1;
            }
        }
    }
    let entries: Vec<WeakEntry> = dataset
        .entries
        .iter()
        .zip(&copies)
        .flat_map(|(e, &c)| core::iter::repeat_n(e.clone(), c))
        .collect();
    Ok(WeakLabeledDataset { entries, ..dataset.clone() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedLine {
    /// Corpus position.
    pub line: usize,
    pub z_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedWindow {
    pub window_id: u32,
    pub lines: Vec<RankedLine>,
}

/// Top `top_n` lines of every window by score, descending; ties go to the
/// earlier timestamp, then the earlier position. `scores` is aligned with
/// corpus positions.
pub fn rank_root_causes(
    dataset: &WeakLabeledDataset,
    corpus: &[LogMessage],
    scores: &[LineScore],
    top_n: usize,
) -> Result<(Vec<RankedWindow>, Vec<RcaWarning>)> {
    if scores.len() != corpus.len() {
        return Err(Error::LengthMismatch { left: scores.len(), right: corpus.len() });
    }
    let mut per_window: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); dataset.window_count()];
    for e in dataset.entries.iter().filter(|e| e.label == WeakLabel::U) {
        for &w in &e.windows {
            per_window[w as usize].insert(e.line);
        }
    }
    let mut warnings = Vec::new();
    let mut ranked = Vec::with_capacity(per_window.len());
    for (w, lines) in per_window.into_iter().enumerate() {
        let mut lines: Vec<usize> = lines.into_iter().collect();
        lines.sort_by(|&x, &y| {
            scores[y]
                .z_norm
                .total_cmp(&scores[x].z_norm)
                .then(corpus[x].timestamp_ms.cmp(&corpus[y].timestamp_ms))
                .then(x.cmp(&y))
        });
        if lines.len() < top_n {
            warnings.push(RcaWarning::ShortWindow { window_id: w as u32, available: lines.len() });
        }
        lines.truncate(top_n);
        ranked.push(RankedWindow {
            window_id: w as u32,
            lines: lines.into_iter().map(|line| RankedLine { line, z_norm: scores[line].z_norm }).collect(),
        });
    }
    Ok((ranked, warnings))
}
