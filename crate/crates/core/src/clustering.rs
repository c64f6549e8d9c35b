//! Agglomerative hierarchical clustering over pairwise distance matrices.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::RngStream;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusterError {
    #[error("need at least two items to cluster, got {0}")]
    DegenerateMatrix(usize),
    #[error("cannot cut {n} leaves into {k} clusters")]
    BadK { k: usize, n: usize },
    #[error("distance matrix is not symmetric at ({0},{1})")]
    Asymmetric(usize, usize),
    #[error("distance matrix has {got} entries, expected {expected}")]
    BadShape { got: usize, expected: usize },
    #[error("distance matrix contains a non-finite or negative entry at ({0},{1})")]
    BadEntry(usize, usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricTag {
    EuclideanRatio,
    Ncd,
}

/// Symmetric `n x n` distances.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    entries: Vec<f64>,
    tag: MetricTag,
}

impl DistanceMatrix {
    /// Entries are symmetrised by averaging; pairs further apart than 1e-9
    /// are rejected. Euclidean matrices get an exact zero diagonal.
    pub fn from_dense(n: usize, mut entries: Vec<f64>, tag: MetricTag) -> Result<Self, ClusterError> {
        if entries.len() != n * n {
            return Err(ClusterError::BadShape {
                got: entries.len(),
                expected: n * n,
            });
        }
        for i in 0..n {
            for j in 0..n {
                let v = entries[i * n + j];
                if !(v.is_finite() && v >= 0.0) {
                    return Err(ClusterError::BadEntry(i, j));
                }
            }
            for j in i + 1..n {
                let (a, b) = (entries[i * n + j], entries[j * n + i]);
                if (a - b).abs() > 1e-9 {
                    return Err(ClusterError::Asymmetric(i, j));
                }
                let m = 0.5 * (a + b);
                entries[i * n + j] = m;
                entries[j * n + i] = m;
            }
            if tag == MetricTag::EuclideanRatio {
                entries[i * n + i] = 0.0;
            }
        }
        Ok(DistanceMatrix { n, entries, tag })
    }

    /// `|x_i - x_j|` over scalar features.
    pub fn euclidean_1d(values: &[f64]) -> Self {
        let n = values.len();
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                entries[i * n + j] = (values[i] - values[j]).abs();
            }
        }
        DistanceMatrix {
            n,
            entries,
            tag: MetricTag::EuclideanRatio,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn tag(&self) -> MetricTag {
        self.tag
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    /// Matrix of the items reordered so that new item `k` is old `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let n = self.n;
        let mut entries = vec![0.0; n * n];
        for (a, &i) in order.iter().enumerate() {
            for (b, &j) in order.iter().enumerate() {
                entries[a * n + b] = self.get(i, j);
            }
        }
        DistanceMatrix {
            n,
            entries,
            tag: self.tag,
        }
    }

    pub fn submatrix(&self, items: &[usize]) -> Self {
        let m = items.len();
        let mut entries = vec![0.0; m * m];
        for (a, &i) in items.iter().enumerate() {
            for (b, &j) in items.iter().enumerate() {
                entries[a * m + b] = self.get(i, j);
            }
        }
        DistanceMatrix {
            n: m,
            entries,
            tag: self.tag,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    Single,
    Complete,
    #[default]
    Average,
}

impl Linkage {
    /// Lance-Williams update for the distance from `k` to `a ∪ b`.
    fn update(self, dka: f64, dkb: f64, na: usize, nb: usize) -> f64 {
        match self {
            Linkage::Single => dka.min(dkb),
            Linkage::Complete => dka.max(dkb),
            Linkage::Average => (na as f64 * dka + nb as f64 * dkb) / (na + nb) as f64,
        }
    }
}

/// One agglomeration step. Leaves are clusters `0..n`; the cluster formed by
/// merge `s` gets id `n + s`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    leaves: usize,
    merges: Vec<Merge>,
}

struct Condensed {
    n: usize,
    data: Vec<f64>,
}

impl Condensed {
    fn idx(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        i * self.n - i * (i + 1) / 2 + (j - i - 1)
    }
    fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.idx(i, j)]
    }
    fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }
}

/// Agglomerative clustering. At each step the closest pair of active
/// clusters merges; ties go to the pair with the smallest leaf ids.
pub fn hcluster(matrix: &DistanceMatrix, linkage: Linkage) -> Result<Dendrogram, ClusterError> {
    let n = matrix.len();
    if n < 2 {
        return Err(ClusterError::DegenerateMatrix(n));
    }
    let mut d = Condensed {
        n,
        data: Vec::with_capacity(n * (n - 1) / 2),
    };
    for i in 0..n {
        for j in i + 1..n {
            d.data.push(matrix.get(i, j));
        }
    }
    // slot i always holds the cluster whose smallest leaf is i
    let mut active = vec![true; n];
    let mut size = vec![1usize; n];
    let mut id: Vec<usize> = (0..n).collect();
    let mut nn = vec![usize::MAX; n];
    let mut nnd = vec![f64::INFINITY; n];

    let nearest = |d: &Condensed, active: &[bool], i: usize| -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for j in i + 1..n {
            if active[j] {
                let v = d.get(i, j);
                if v < best.1 {
                    best = (j, v);
                }
            }
        }
        best
    };
    for i in 0..n {
        (nn[i], nnd[i]) = nearest(&d, &active, i);
    }

    let mut merges = Vec::with_capacity(n - 1);
    for step in 0..n - 1 {
        let mut i = usize::MAX;
        let mut best = f64::INFINITY;
        for k in 0..n {
            if active[k] && nn[k] != usize::MAX && (i == usize::MAX || nnd[k] < best) {
                i = k;
                best = nnd[k];
            }
        }
        let j = nn[i];
        merges.push(Merge {
            a: id[i],
            b: id[j],
            height: best,
            size: size[i] + size[j],
        });
        for k in 0..n {
            if active[k] && k != i && k != j {
                let v = linkage.update(d.get(k, i), d.get(k, j), size[i], size[j]);
                d.set(k, i, v);
            }
        }
        active[j] = false;
        size[i] += size[j];
        id[i] = n + step;
        (nn[i], nnd[i]) = nearest(&d, &active, i);
        for k in 0..i {
            if !active[k] {
                continue;
            }
            if nn[k] == i || nn[k] == j {
                (nn[k], nnd[k]) = nearest(&d, &active, k);
            } else {
                let v = d.get(k, i);
                if v < nnd[k] || (v == nnd[k] && i < nn[k]) {
                    nn[k] = i;
                    nnd[k] = v;
                }
            }
        }
        for k in i + 1..j {
            if active[k] && nn[k] == j {
                (nn[k], nnd[k]) = nearest(&d, &active, k);
            }
        }
    }
    Ok(Dendrogram { leaves: n, merges })
}

impl Dendrogram {
    pub fn leaves(&self) -> usize {
        self.leaves
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    /// Flat clustering with exactly `k` clusters, obtained by undoing the
    /// last `k - 1` merges. Cluster labels follow the order of each
    /// cluster's smallest leaf.
    pub fn cut(&self, k: usize) -> Result<Vec<usize>, ClusterError> {
        let n = self.leaves;
        if k == 0 || k > n {
            return Err(ClusterError::BadK { k, n });
        }
        let mut parent: Vec<usize> = (0..2 * n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for (s, m) in self.merges.iter().take(n - k).enumerate() {
            let (ra, rb) = (find(&mut parent, m.a), find(&mut parent, m.b));
            parent[ra] = n + s;
            parent[rb] = n + s;
        }
        let mut label_of_root = std::collections::HashMap::new();
        let mut out = Vec::with_capacity(n);
        for leaf in 0..n {
            let r = find(&mut parent, leaf);
            let next = label_of_root.len();
            out.push(*label_of_root.entry(r).or_insert(next));
        }
        Ok(out)
    }

    /// Newick text with branch lengths from merge heights.
    pub fn to_newick(&self, labels: &[String]) -> String {
        let n = self.leaves;
        let mut text: Vec<String> = (0..n)
            .map(|i| labels.get(i).cloned().unwrap_or_else(|| i.to_string()))
            .collect();
        let mut height = vec![0.0; n];
        for m in &self.merges {
            let h = m.height;
            let node = format!(
                "({}:{},{}:{})",
                text[m.a],
                fmt_len(h - height[m.a]),
                text[m.b],
                fmt_len(h - height[m.b])
            );
            text.push(node);
            height.push(h);
        }
        format!("{};", text.last().cloned().unwrap_or_default())
    }
}

fn fmt_len(x: f64) -> String {
    format!("{:.6}", x.max(0.0))
}

/// Members of each cluster label, in label order.
pub fn groups(assignments: &[usize]) -> Vec<Vec<usize>> {
    let k = assignments.iter().copied().max().map_or(0, |m| m + 1);
    let mut out = vec![Vec::new(); k];
    for (i, &a) in assignments.iter().enumerate() {
        out[a].push(i);
    }
    out
}

/// One member per cluster, drawn uniformly with a seeded stream.
pub fn pick_representatives(assignments: &[usize], seed: u64) -> Vec<usize> {
    let mut rng = RngStream::new(seed);
    groups(assignments)
        .into_iter()
        .map(|members| members[rng.below(members.len() as u64) as usize])
        .collect()
}

/// Cluster an NCD matrix and cut it into `k` groups, returned in ascending
/// order of mean compression ratio.
pub fn ncd_group(matrix: &DistanceMatrix, ratios: &[f64], k: usize, linkage: Linkage) -> Result<Vec<Vec<usize>>, ClusterError> {
    let dendro = hcluster(matrix, linkage)?;
    let mut gs = groups(&dendro.cut(k)?);
    let mean = |g: &Vec<usize>| g.iter().map(|&i| ratios[i]).sum::<f64>() / g.len() as f64;
    gs.sort_by(|a, b| mean(a).total_cmp(&mean(b)).then_with(|| a[0].cmp(&b[0])));
    Ok(gs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Reference: recompute every cluster-pair linkage from the leaves.
    fn brute_force(m: &DistanceMatrix, linkage: Linkage) -> Vec<(Vec<usize>, f64)> {
        let mut clusters: Vec<Vec<usize>> = (0..m.len()).map(|i| vec![i]).collect();
        let mut out = Vec::new();
        while clusters.len() > 1 {
            let mut best: Option<(usize, usize, f64)> = None;
            for a in 0..clusters.len() {
                for b in a + 1..clusters.len() {
                    let ds: Vec<f64> = clusters[a]
                        .iter()
                        .flat_map(|&i| clusters[b].iter().map(move |&j| (i, j)))
                        .map(|(i, j)| m.get(i, j))
                        .collect();
                    let v = match linkage {
                        Linkage::Average => ds.iter().sum::<f64>() / ds.len() as f64,
                        Linkage::Single => ds.iter().copied().fold(f64::INFINITY, f64::min),
                        Linkage::Complete => ds.iter().copied().fold(0.0, f64::max),
                    };
                    if best.is_none_or(|(_, _, bv)| v < bv) {
                        best = Some((a, b, v));
                    }
                }
            }
            let (a, b, v) = best.unwrap();
            let moved = clusters.remove(b);
            clusters[a].extend(moved);
            clusters[a].sort_unstable();
            out.push((clusters[a].clone(), v));
        }
        out
    }

    fn members_of(d: &Dendrogram) -> Vec<Vec<usize>> {
        let n = d.leaves();
        let mut sets: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for m in d.merges() {
            let mut s = sets[m.a].clone();
            s.extend(&sets[m.b]);
            s.sort_unstable();
            sets.push(s);
        }
        sets[n..].to_vec()
    }

    fn random_matrix(n: usize, seed: u64) -> DistanceMatrix {
        let mut r = RngStream::new(seed);
        let mut e = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = r.uniform() * 10.0;
                e[i * n + j] = v;
                e[j * n + i] = v;
            }
        }
        DistanceMatrix::from_dense(n, e, MetricTag::EuclideanRatio).unwrap()
    }

    #[test]
    fn two_points_single_merge() {
        let m = DistanceMatrix::euclidean_1d(&[0.1, 0.4]);
        let d = hcluster(&m, Linkage::Average).unwrap();
        assert_eq!(d.merges().len(), 1);
        assert!((d.merges()[0].height - 0.3).abs() < 1e-12);
    }

    #[test]
    fn tight_pairs_merge_first() {
        let m = DistanceMatrix::euclidean_1d(&[0.0, 0.01, 5.0, 5.02]);
        let d = hcluster(&m, Linkage::Average).unwrap();
        let sets = members_of(&d);
        assert_eq!(sets[0], vec![0, 1]);
        assert_eq!(sets[1], vec![2, 3]);
        assert_eq!(d.cut(2).unwrap(), vec![0, 0, 1, 1]);
    }

    #[test]
    fn degenerate_and_bad_k() {
        assert_eq!(
            hcluster(&DistanceMatrix::euclidean_1d(&[1.0]), Linkage::Average),
            Err(ClusterError::DegenerateMatrix(1))
        );
        let d = hcluster(&DistanceMatrix::euclidean_1d(&[1.0, 2.0, 4.0]), Linkage::Average).unwrap();
        assert_eq!(d.cut(0), Err(ClusterError::BadK { k: 0, n: 3 }));
        assert_eq!(d.cut(4), Err(ClusterError::BadK { k: 4, n: 3 }));
        assert_eq!(d.cut(3).unwrap(), vec![0, 1, 2]);
        assert_eq!(d.cut(1).unwrap(), vec![0, 0, 0]);
    }

    #[test]
    fn matrix_validation() {
        assert!(matches!(
            DistanceMatrix::from_dense(2, vec![0.0, 1.0, 2.0, 0.0], MetricTag::Ncd),
            Err(ClusterError::Asymmetric(0, 1))
        ));
        assert!(DistanceMatrix::from_dense(2, vec![0.0; 3], MetricTag::Ncd).is_err());
        assert!(DistanceMatrix::from_dense(2, vec![0.0, f64::NAN, f64::NAN, 0.0], MetricTag::Ncd).is_err());
    }

    #[test]
    fn identical_inputs_split_deterministically() {
        let m = DistanceMatrix::from_dense(4, vec![0.0; 16], MetricTag::Ncd).unwrap();
        let a = ncd_group(&m, &[0.25; 4], 2, Linkage::Average).unwrap();
        let b = ncd_group(&m, &[0.25; 4], 2, Linkage::Average).unwrap();
        assert_eq!(a, b);
        // ties merge the smallest leaf ids first: 0+1, then (01)+2, leaving 3
        assert_eq!(a, vec![vec![0, 1, 2], vec![3]]);
    }

    #[test]
    fn ncd_group_orders_by_ratio() {
        let e = vec![
            0.0, 0.1, 0.9, 0.9, //
            0.1, 0.0, 0.9, 0.9, //
            0.9, 0.9, 0.0, 0.2, //
            0.9, 0.9, 0.2, 0.0,
        ];
        let m = DistanceMatrix::from_dense(4, e, MetricTag::Ncd).unwrap();
        let g = ncd_group(&m, &[0.03, 0.02, 0.001, 0.002], 2, Linkage::Average).unwrap();
        assert_eq!(g, vec![vec![2, 3], vec![0, 1]]);
    }

    #[test]
    fn newick_shape() {
        let d = hcluster(&DistanceMatrix::euclidean_1d(&[0.0, 1.0, 5.0]), Linkage::Average).unwrap();
        let labels: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        assert_eq!(
            d.to_newick(&labels),
            "((a:1.000000,b:1.000000):3.500000,c:4.500000);"
        );
    }

    #[test]
    fn representatives_are_members() {
        let assign = vec![0, 1, 0, 2, 1, 2, 2];
        let reps = pick_representatives(&assign, 5);
        assert_eq!(reps.len(), 3);
        for (c, &r) in reps.iter().enumerate() {
            assert_eq!(assign[r], c);
        }
        assert_eq!(reps, pick_representatives(&assign, 5));
    }

    #[test]
    fn matches_brute_force_on_small_random_matrices() {
        for seed in 0..200 {
            let n = 2 + (seed as usize % 7);
            let m = random_matrix(n, seed);
            for linkage in [Linkage::Average, Linkage::Single, Linkage::Complete] {
                let d = hcluster(&m, linkage).unwrap();
                let reference = brute_force(&m, linkage);
                let sets = members_of(&d);
                for (s, (set, h)) in reference.iter().enumerate() {
                    assert_eq!(&sets[s], set, "seed {seed} {linkage:?} step {s}");
                    assert!((d.merges()[s].height - h).abs() < 1e-9);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn average_heights_are_monotone(seed in 0u64..1000, n in 2usize..20) {
            let d = hcluster(&random_matrix(n, seed), Linkage::Average).unwrap();
            prop_assert_eq!(d.merges().len(), n - 1);
            prop_assert!(d.merges().windows(2).all(|w| w[0].height <= w[1].height + 1e-12));
        }

        #[test]
        fn cuts_are_nested(seed in 0u64..1000, n in 2usize..16) {
            let d = hcluster(&random_matrix(n, seed), Linkage::Average).unwrap();
            for k in 2..=n {
                let fine = d.cut(k).unwrap();
                let coarse = d.cut(k - 1).unwrap();
                prop_assert_eq!(groups(&fine).len(), k);
                for a in 0..n {
                    for b in 0..n {
                        if fine[a] == fine[b] {
                            prop_assert_eq!(coarse[a], coarse[b]);
                        }
                    }
                }
            }
        }

        #[test]
        fn permutation_invariance(seed in 0u64..500, n in 2usize..10, shuffle_seed in 0u64..100) {
            let m = random_matrix(n, seed);
            let mut order: Vec<usize> = (0..n).collect();
            let mut r = RngStream::new(shuffle_seed);
            for i in (1..n).rev() {
                order.swap(i, r.below(i as u64 + 1) as usize);
            }
            let p = m.permuted(&order);
            let d1 = hcluster(&m, Linkage::Average).unwrap();
            let d2 = hcluster(&p, Linkage::Average).unwrap();
            for k in 1..=n {
                let c1 = d1.cut(k).unwrap();
                let c2 = d2.cut(k).unwrap();
                // item order[a] in the original is item a in the permuted matrix
                for a in 0..n {
                    for b in 0..n {
                        prop_assert_eq!(c2[a] == c2[b], c1[order[a]] == c1[order[b]]);
                    }
                }
            }
        }
    }
}
