//! Deterministic clustering: Ward agglomerative, k-means (Lloyd) and PAM k-medoids.
//! All distances are Euclidean. Ties always resolve to the lowest index.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClusteringError {
    #[error("cluster count {k} outside [1, {n}]")]
    KOutOfRange { k: usize, n: usize },
    #[error("points have inconsistent dimensions")]
    Ragged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClusteringMethod {
    Hierarchical,
    KMeans,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    pub k: usize,
    pub labels: Vec<usize>,
    /// Representative point of each cluster (k-medoids only).
    pub medoids: Option<Vec<usize>>,
}

impl ClusterAssignment {
    /// Relabels clusters in order of first appearance; medoids follow their clusters.
    pub fn from_labels(labels: Vec<usize>, medoids: Option<Vec<usize>>) -> Self {
        let mut map = std::collections::BTreeMap::new();
        let mut canonical = Vec::with_capacity(labels.len());
        for &l in &labels {
            let next = map.len();
            canonical.push(*map.entry(l).or_insert(next));
        }
        let medoids = medoids.map(|m| {
            let mut out = vec![0; map.len()];
            for (&old, &new) in &map {
                out[new] = m[old];
            }
            out
        });
        ClusterAssignment {
            k: map.len(),
            labels: canonical,
            medoids,
        }
    }

    /// Member indices of each cluster, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &l) in self.labels.iter().enumerate() {
            if l < self.k {
                out[l].push(i);
            }
        }
        out
    }

    pub fn singletons(n: usize) -> Self {
        ClusterAssignment {
            k: n,
            labels: (0..n).collect(),
            medoids: None,
        }
    }

    pub fn single(n: usize) -> Self {
        ClusterAssignment {
            k: 1,
            labels: vec![0; n],
            medoids: None,
        }
    }
}

pub fn cluster(method: ClusteringMethod, points: &[Vec<f64>], k: usize) -> Result<ClusterAssignment, ClusteringError> {
    match method {
        ClusteringMethod::Hierarchical => hierarchical(points, k),
        ClusteringMethod::KMeans => kmeans(points, k),
    }
}

fn check(points: &[Vec<f64>], k: usize) -> Result<(), ClusteringError> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(ClusteringError::KOutOfRange { k, n });
    }
    if points.iter().any(|p| p.len() != points[0].len()) {
        return Err(ClusteringError::Ragged);
    }
    Ok(())
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

fn mean(points: &[Vec<f64>], members: &[usize]) -> Vec<f64> {
    let mut c = vec![0.0; points[0].len()];
    for &i in members {
        for (s, v) in c.iter_mut().zip(&points[i]) {
            *s += v;
        }
    }
    let n = members.len() as f64;
    c.iter_mut().for_each(|s| *s /= n);
    c
}

/// Agglomerative clustering with Ward linkage.
pub fn hierarchical(points: &[Vec<f64>], k: usize) -> Result<ClusterAssignment, ClusteringError> {
    check(points, k)?;
    let n = points.len();
    // slot i holds the cluster whose lowest member is i, or None once merged away
    let mut slots: Vec<Option<(Vec<usize>, Vec<f64>)>> =
        (0..n).map(|i| Some((vec![i], points[i].clone()))).collect();
    let mut live = n;
    while live > k {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..n {
            let Some((mi, ci)) = &slots[i] else { continue };
            for j in i + 1..n {
                let Some((mj, cj)) = &slots[j] else { continue };
                let (a, b) = (mi.len() as f64, mj.len() as f64);
                let cost = a * b / (a + b) * sq_dist(ci, cj);
                if best.map_or(true, |(c, _, _)| cost < c) {
                    best = Some((cost, i, j));
                }
            }
        }
        let (_, i, j) = best.expect("at least two live clusters");
        let (mj, _) = slots[j].take().unwrap();
        let (mi, _) = slots[i].take().unwrap();
        let mut members = mi;
        members.extend(mj);
        members.sort_unstable();
        let centroid = mean(points, &members);
        slots[i] = Some((members, centroid));
        live -= 1;
    }
    let mut labels = vec![0; n];
    for (slot, entry) in slots.iter().enumerate() {
        if let Some((members, _)) = entry {
            for &m in members {
                labels[m] = slot;
            }
        }
    }
    Ok(ClusterAssignment::from_labels(labels, None))
}

pub const KMEANS_MAX_ITERATIONS: usize = 100;

/// Lloyd's algorithm from farthest-first seeds starting at point 0.
pub fn kmeans(points: &[Vec<f64>], k: usize) -> Result<ClusterAssignment, ClusteringError> {
    kmeans_traced(points, k).map(|(a, _)| a)
}

/// k-means that also returns the within-cluster sum of squares after each iteration.
pub fn kmeans_traced(points: &[Vec<f64>], k: usize) -> Result<(ClusterAssignment, Vec<f64>), ClusteringError> {
    check(points, k)?;
    let n = points.len();
    let mut seeds = vec![0usize];
    let mut nearest: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[0])).collect();
    while seeds.len() < k {
        let mut pick = None;
        for i in 0..n {
            if seeds.contains(&i) {
                continue;
            }
            if pick.map_or(true, |p: usize| nearest[i] > nearest[p]) {
                pick = Some(i);
            }
        }
        let p = pick.expect("k <= n");
        seeds.push(p);
        for i in 0..n {
            nearest[i] = nearest[i].min(sq_dist(&points[i], &points[p]));
        }
    }
    let mut centroids: Vec<Vec<f64>> = seeds.iter().map(|&s| points[s].clone()).collect();
    let mut labels: Vec<usize> = Vec::new();
    let mut trace = Vec::new();
    for _ in 0..KMEANS_MAX_ITERATIONS {
        let mut next: Vec<usize> = points
            .iter()
            .map(|p| {
                let mut best = 0;
                for c in 1..k {
                    if sq_dist(p, &centroids[c]) < sq_dist(p, &centroids[best]) {
                        best = c;
                    }
                }
                best
            })
            .collect();
        repair_empty(points, &centroids, &mut next, k);
        let members = group(&next, k);
        centroids = members.iter().map(|m| mean(points, m)).collect();
        trace.push(wcss(points, &next, &centroids));
        let stable = next == labels;
        labels = next;
        if stable {
            break;
        }
    }
    Ok((ClusterAssignment::from_labels(labels, None), trace))
}

fn group(labels: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        out[l].push(i);
    }
    out
}

fn wcss(points: &[Vec<f64>], labels: &[usize], centroids: &[Vec<f64>]) -> f64 {
    points.iter().zip(labels).map(|(p, &l)| sq_dist(p, &centroids[l])).sum()
}

/// Gives each empty cluster the point farthest from its current centroid,
/// taken from a cluster that keeps at least one member.
fn repair_empty(points: &[Vec<f64>], centroids: &[Vec<f64>], labels: &mut [usize], k: usize) {
    loop {
        let sizes = group(labels, k).iter().map(Vec::len).collect::<Vec<_>>();
        let Some(empty) = sizes.iter().position(|&s| s == 0) else { return };
        let mut pick: Option<(f64, usize)> = None;
        for (i, p) in points.iter().enumerate() {
            if sizes[labels[i]] < 2 {
                continue;
            }
            let d = sq_dist(p, &centroids[labels[i]]);
            if pick.map_or(true, |(best, _)| d > best) {
                pick = Some((d, i));
            }
        }
        let (_, i) = pick.expect("k <= n leaves a donor");
        labels[i] = empty;
    }
}

/// Partitioning around medoids: greedy BUILD, then SWAP until no swap lowers the cost.
pub fn kmedoids(points: &[Vec<f64>], k: usize) -> Result<ClusterAssignment, ClusteringError> {
    check(points, k)?;
    let n = points.len();
    let d: Vec<Vec<f64>> = points
        .iter()
        .map(|a| points.iter().map(|b| dist(a, b)).collect())
        .collect();
    let cost = |medoids: &[usize]| -> f64 {
        (0..n)
            .map(|i| medoids.iter().map(|&m| d[i][m]).fold(f64::INFINITY, f64::min))
            .sum()
    };

    let mut medoids: Vec<usize> = Vec::with_capacity(k);
    while medoids.len() < k {
        let mut best: Option<(f64, usize)> = None;
        for c in 0..n {
            if medoids.contains(&c) {
                continue;
            }
            let mut trial = medoids.clone();
            trial.push(c);
            let value = cost(&trial);
            if best.map_or(true, |(b, _)| value < b) {
                best = Some((value, c));
            }
        }
        medoids.push(best.expect("k <= n").1);
    }

    let mut current = cost(&medoids);
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for slot in 0..k {
            for h in 0..n {
                if medoids.contains(&h) {
                    continue;
                }
                let mut trial = medoids.clone();
                trial[slot] = h;
                let value = cost(&trial);
                if value < current - 1e-12 && best.map_or(true, |(b, _, _)| value < b) {
                    best = Some((value, slot, h));
                }
            }
        }
        match best {
            Some((value, slot, h)) => {
                medoids[slot] = h;
                current = value;
            }
            None => break,
        }
    }

    // Within each cluster prefer the lowest-index point among equally central ones.
    let mut labels = assign_to_medoids(&d, &medoids);
    for _ in 0..n {
        let members = group(&labels, k);
        let refined: Vec<usize> = members
            .iter()
            .zip(&medoids)
            .map(|(m, &old)| {
                let spread = |c: usize| m.iter().map(|&i| d[i][c]).sum::<f64>();
                let target = spread(old);
                m.iter()
                    .copied()
                    .find(|&c| spread(c) <= target + 1e-12)
                    .unwrap_or(old)
            })
            .collect();
        if refined == medoids {
            break;
        }
        medoids = refined;
        labels = assign_to_medoids(&d, &medoids);
    }
    Ok(ClusterAssignment::from_labels(labels, Some(medoids)))
}

fn assign_to_medoids(d: &[Vec<f64>], medoids: &[usize]) -> Vec<usize> {
    (0..d.len())
        .map(|i| {
            if let Some(slot) = medoids.iter().position(|&m| m == i) {
                return slot;
            }
            let mut best = 0;
            for slot in 1..medoids.len() {
                let (a, b) = (d[i][medoids[slot]], d[i][medoids[best]]);
                if a < b || (a == b && medoids[slot] < medoids[best]) {
                    best = slot;
                }
            }
            best
        })
        .collect()
}
