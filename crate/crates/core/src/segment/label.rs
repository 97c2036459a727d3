use std::collections::{BTreeMap, BTreeSet};

use crate::imgcore::FeatureImage;

/// Dense region labelling of an image.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentMap {
    pub width: usize,
    pub height: usize,
    /// Region id per pixel, row-major, ids dense in `0..regions.len()`.
    pub labels: Vec<u32>,
    pub regions: Vec<RegionStats>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionStats {
    pub size: usize,
    pub mean: [f64; 2],
}

impl SegmentMap {
    pub fn region_count(&self) -> usize {
        self.regions.len()
    }

    pub fn label(&self, u: usize, v: usize) -> u32 {
        self.labels[v * self.width + u]
    }

    /// The region covering the most pixels of the bottom row; smallest id
    /// on ties.
    pub fn bottom_row_majority(&self) -> Option<u32> {
        let row = &self.labels[(self.height - 1) * self.width..];
        let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
        for &l in row {
            *counts.entry(l).or_default() += 1;
        }
        counts
            .into_iter()
            .fold(None, |best: Option<(u32, usize)>, (l, n)| match best {
                Some((_, m)) if m >= n => best,
                _ => Some((l, n)),
            })
            .map(|(l, _)| l)
    }
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Smaller root becomes the representative.
    fn union(&mut self, a: usize, b: usize) -> usize {
        let (ra, rb) = (self.find(a), self.find(b));
        let (keep, gone) = if ra <= rb { (ra, rb) } else { (rb, ra) };
        self.parent[gone] = keep;
        keep
    }
}

/// Groups 4-connected pixels whose filtered features differ by less than
/// `range_bandwidth`, then folds every region smaller than
/// `min_region_size` into the adjacent region with the closest mean
/// feature (smallest id on ties), smallest regions first. Final ids are
/// assigned in raster order of first appearance.
pub fn label_segments(filtered: &FeatureImage, range_bandwidth: f64, min_region_size: usize) -> SegmentMap {
    let (w, h) = (filtered.width(), filtered.height());
    let data = filtered.data();
    let hr2 = range_bandwidth * range_bandwidth;
    let close = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) < hr2;

    let mut ds = DisjointSet::new(w * h);
    for v in 0..h {
        for u in 0..w {
            let i = v * w + u;
            if u + 1 < w && close(data[i], data[i + 1]) {
                ds.union(i, i + 1);
            }
            if v + 1 < h && close(data[i], data[i + w]) {
                ds.union(i, i + w);
            }
        }
    }

    // provisional regions keyed by union-find root
    let mut size: BTreeMap<usize, usize> = BTreeMap::new();
    let mut sum: BTreeMap<usize, [f64; 2]> = BTreeMap::new();
    for (i, f) in data.iter().enumerate() {
        let r = ds.find(i);
        *size.entry(r).or_default() += 1;
        let s = sum.entry(r).or_insert([0.0; 2]);
        s[0] += f[0];
        s[1] += f[1];
    }
    let mut adjacency: BTreeMap<usize, BTreeSet<usize>> = size.keys().map(|&r| (r, BTreeSet::new())).collect();
    for v in 0..h {
        for u in 0..w {
            let i = v * w + u;
            let a = ds.find(i);
            for j in [(u + 1 < w).then(|| i + 1), (v + 1 < h).then(|| i + w)].into_iter().flatten() {
                let b = ds.find(j);
                if a != b {
                    adjacency.get_mut(&a).unwrap().insert(b);
                    adjacency.get_mut(&b).unwrap().insert(a);
                }
            }
        }
    }

    let mean = |r: usize, size: &BTreeMap<usize, usize>, sum: &BTreeMap<usize, [f64; 2]>| {
        let s = sum[&r];
        let n = size[&r] as f64;
        [s[0] / n, s[1] / n]
    };

    // (size, root) ordered queue of undersized regions
    let mut small: BTreeSet<(usize, usize)> = size.iter().filter(|(_, &n)| n < min_region_size).map(|(&r, &n)| (n, r)).collect();
    while let Some(&(n, r)) = small.iter().next() {
        small.remove(&(n, r));
        let neighbours = &adjacency[&r];
        if neighbours.is_empty() {
            continue;
        }
        let mr = mean(r, &size, &sum);
        let target = neighbours
            .iter()
            .map(|&q| {
                let mq = mean(q, &size, &sum);
                ((mq[0] - mr[0]).powi(2) + (mq[1] - mr[1]).powi(2), q)
            })
            .fold(None, |best: Option<(f64, usize)>, cand| match best {
                Some(b) if b.0 < cand.0 || (b.0 == cand.0 && b.1 < cand.1) => Some(b),
                _ => Some(cand),
            })
            .unwrap()
            .1;

        let target_size = size[&target];
        small.remove(&(target_size, target));
        let keep = ds.union(r, target);
        let gone = if keep == r { target } else { r };

        let merged_size = size.remove(&gone).unwrap() + size[&keep];
        size.insert(keep, merged_size);
        let gs = sum.remove(&gone).unwrap();
        let ks = sum.get_mut(&keep).unwrap();
        ks[0] += gs[0];
        ks[1] += gs[1];

        let gone_adj = adjacency.remove(&gone).unwrap();
        for q in &gone_adj {
            if *q == keep {
                continue;
            }
            let qa = adjacency.get_mut(q).unwrap();
            qa.remove(&gone);
            qa.insert(keep);
        }
        let ka = adjacency.get_mut(&keep).unwrap();
        ka.remove(&gone);
        ka.extend(gone_adj.into_iter().filter(|&q| q != keep));

        if merged_size < min_region_size {
            small.insert((merged_size, keep));
        }
    }

    // dense relabel in raster order
    let mut dense: BTreeMap<usize, u32> = BTreeMap::new();
    let mut labels = Vec::with_capacity(w * h);
    let mut regions: Vec<RegionStats> = Vec::new();
    for i in 0..w * h {
        let r = ds.find(i);
        let next = dense.len() as u32;
        let id = *dense.entry(r).or_insert_with(|| {
            regions.push(RegionStats {
                size: size[&r],
                mean: mean(r, &size, &sum),
            });
            next
        });
        labels.push(id);
    }
    SegmentMap {
        width: w,
        height: h,
        labels,
        regions,
    }
}
