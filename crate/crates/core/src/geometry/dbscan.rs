//! Density-based clustering over a uniform grid.
//!
//! A point is core when at least `min_pts` points (itself included) lie
//! within `eps`. Clusters are numbered in order of their lowest-index core
//! point, and a border point reachable from several clusters joins the one
//! numbered first. That makes the labeling a function of the input order only.

use std::collections::HashMap;

pub const NOISE: i32 = -1;

pub fn dbscan<P: AsRef<[f64]>>(points: &[P], eps: f64, min_pts: usize) -> Vec<i32> {
    assert!(eps > 0.0, "eps must be positive");
    assert!(min_pts >= 1, "min_pts must be at least 1");
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    let grid = Grid::new(points, eps);
    let eps2 = eps * eps;
    let near = |i: usize, j: usize| dist2(points[i].as_ref(), points[j].as_ref()) <= eps2;

    // cells are small enough that any two points sharing one are neighbors
    let mut core = vec![false; n];
    for (c, members) in grid.members.iter().enumerate() {
        if members.len() >= min_pts {
            for &i in members {
                core[i] = true;
            }
            continue;
        }
        for &i in members {
            let mut count = 0;
            'scan: for &d in &grid.adjacent[c] {
                for &j in &grid.members[d] {
                    if near(i, j) {
                        count += 1;
                        if count >= min_pts {
                            break 'scan;
                        }
                    }
                }
            }
            core[i] = count >= min_pts;
        }
    }

    let cores: Vec<Vec<usize>> = grid
        .members
        .iter()
        .map(|m| m.iter().copied().filter(|&i| core[i]).collect())
        .collect();
    let mut parent: Vec<usize> = (0..grid.members.len()).collect();
    for c in 0..cores.len() {
        if cores[c].is_empty() {
            continue;
        }
        for &d in &grid.adjacent[c] {
            if d <= c || cores[d].is_empty() || find(&mut parent, c) == find(&mut parent, d) {
                continue;
            }
            let linked = cores[c].iter().any(|&i| cores[d].iter().any(|&j| near(i, j)));
            if linked {
                let (a, b) = (find(&mut parent, c), find(&mut parent, d));
                parent[a.max(b)] = a.min(b);
            }
        }
    }

    // number components by their lowest core index
    let mut lowest: HashMap<usize, usize> = HashMap::new();
    for (c, members) in cores.iter().enumerate() {
        if let Some(&first) = members.first() {
            let root = find(&mut parent, c);
            let e = lowest.entry(root).or_insert(first);
            *e = (*e).min(first);
        }
    }
    let mut order: Vec<(usize, usize)> = lowest.into_iter().map(|(r, i)| (i, r)).collect();
    order.sort_unstable();
    let label_of: HashMap<usize, i32> = order
        .iter()
        .enumerate()
        .map(|(k, &(_, r))| (r, k as i32))
        .collect();
    let cell_label: Vec<i32> = (0..cores.len())
        .map(|c| {
            if cores[c].is_empty() {
                NOISE
            } else {
                label_of[&find(&mut parent, c)]
            }
        })
        .collect();

    let mut labels = vec![NOISE; n];
    for (c, members) in grid.members.iter().enumerate() {
        for &i in members {
            if core[i] {
                labels[i] = cell_label[c];
                continue;
            }
            let mut best = NOISE;
            for &d in &grid.adjacent[c] {
                let l = cell_label[d];
                if l == NOISE || (best != NOISE && l >= best) {
                    continue;
                }
                if cores[d].iter().any(|&j| near(i, j)) {
                    best = l;
                }
            }
            labels[i] = best;
        }
    }
    labels
}

fn dist2(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Occupied cells of side slightly under eps/sqrt(dims), each with the list
/// of occupied cells (itself included) that can hold a point within eps.
struct Grid {
    members: Vec<Vec<usize>>,
    adjacent: Vec<Vec<usize>>,
}

impl Grid {
    fn new<P: AsRef<[f64]>>(points: &[P], eps: f64) -> Self {
        let dims = points[0].as_ref().len();
        let side = eps / (dims as f64).sqrt() * (1.0 - 1e-9);
        let mut ids: HashMap<Vec<i64>, usize> = HashMap::new();
        let mut keys: Vec<Vec<i64>> = Vec::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        for (i, p) in points.iter().enumerate() {
            let p = p.as_ref();
            assert_eq!(p.len(), dims, "all points must share one dimension");
            let key: Vec<i64> = p.iter().map(|c| (c / side).floor() as i64).collect();
            let c = *ids.entry(key.clone()).or_insert_with(|| {
                keys.push(key);
                members.push(Vec::new());
                members.len() - 1
            });
            members[c].push(i);
        }

        let reach = (eps / side).ceil() as i64;
        let mut offsets = Vec::new();
        let mut offset = vec![-reach; dims];
        loop {
            let gap: f64 = offset
                .iter()
                .map(|&o| {
                    let g = (o.abs() - 1).max(0) as f64 * side;
                    g * g
                })
                .sum();
            if gap <= eps * eps {
                offsets.push(offset.clone());
            }
            let mut k = 0;
            while k < dims {
                offset[k] += 1;
                if offset[k] <= reach {
                    break;
                }
                offset[k] = -reach;
                k += 1;
            }
            if k == dims {
                break;
            }
        }

        let mut adjacent = Vec::with_capacity(keys.len());
        let mut probe = vec![0i64; dims];
        for key in &keys {
            let mut near = Vec::new();
            for off in &offsets {
                for k in 0..dims {
                    probe[k] = key[k] + off[k];
                }
                if let Some(&d) = ids.get(&probe) {
                    near.push(d);
                }
            }
            near.sort_unstable();
            adjacent.push(near);
        }
        Self { members, adjacent }
    }
}
