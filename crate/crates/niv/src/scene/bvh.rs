//! Binary BVH over a triangle soup.
//!
//! The contract is exactness: traversal returns the same nearest hit a
//! linear scan over all triangles would, including the tie rule that the
//! lowest triangle id wins at equal `t`. Both paths share one intersection
//! kernel, and nodes are only pruned when strictly beyond the current best.

use glam::Vec3;

use super::{Aabb, Ray};

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone, Copy)]
pub struct RawHit {
    pub t: f32,
    pub u: f32,
    pub v: f32,
    pub triangle: u32,
}

#[derive(Debug)]
struct Node {
    bounds: Aabb,
    /// Leaf: index into `order`; interior: index of the left child
    /// (right child follows at `+1`).
    first: u32,
    /// Number of triangles for a leaf, 0 for interior nodes.
    count: u32,
}

#[derive(Debug)]
pub struct Bvh {
    nodes: Vec<Node>,
    /// Triangle ids permuted so each leaf covers a contiguous range.
    order: Vec<u32>,
}

/// Moeller-Trumbore. Accepts hits with `0 < t < t_max`.
fn intersect_triangle(tri: &[Vec3; 3], ray: &Ray, t_max: f32) -> Option<(f32, f32, f32)> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let pvec = ray.dir.cross(e2);
    let det = e1.dot(pvec);
    if det.abs() < 1e-12 {
        return None;
    }
    let inv_det = 1.0 / det;
    let tvec = ray.origin - tri[0];
    let u = tvec.dot(pvec) * inv_det;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let qvec = tvec.cross(e1);
    let v = ray.dir.dot(qvec) * inv_det;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(qvec) * inv_det;
    if t > 0.0 && t < t_max {
        Some((t, u, v))
    } else {
        None
    }
}

/// (t, id) ordering: nearer wins, lower id breaks ties.
fn better(candidate: (f32, u32), best: Option<(f32, u32)>) -> bool {
    match best {
        None => true,
        Some((bt, bid)) => candidate.0 < bt || (candidate.0 == bt && candidate.1 < bid),
    }
}

/// Reference nearest-hit by scanning every triangle.
pub fn intersect_linear(tris: &[[Vec3; 3]], ray: &Ray, t_max: f32) -> Option<RawHit> {
    let mut best: Option<RawHit> = None;
    for (i, tri) in tris.iter().enumerate() {
        if let Some((t, u, v)) = intersect_triangle(tri, ray, t_max) {
            if better((t, i as u32), best.map(|h| (h.t, h.triangle))) {
                best = Some(RawHit {
                    t,
                    u,
                    v,
                    triangle: i as u32,
                });
            }
        }
    }
    best
}

fn slab_entry(bounds: &Aabb, ray: &Ray, inv_dir: Vec3) -> Option<f32> {
    let t0 = (bounds.min - ray.origin) * inv_dir;
    let t1 = (bounds.max - ray.origin) * inv_dir;
    let lo = t0.min(t1);
    let hi = t0.max(t1);
    let t_enter = lo.max_element().max(0.0);
    let t_exit = hi.min_element();
    if t_enter <= t_exit {
        Some(t_enter)
    } else {
        None
    }
}

impl Bvh {
    pub fn build(tris: &[[Vec3; 3]]) -> Bvh {
        let mut order: Vec<u32> = (0..tris.len() as u32).collect();
        let mut nodes = Vec::new();
        if tris.is_empty() {
            return Bvh { nodes, order };
        }
        let centroids: Vec<Vec3> = tris
            .iter()
            .map(|t| (t[0] + t[1] + t[2]) / 3.0)
            .collect();
        nodes.push(make_node(tris, &order));
        subdivide(0, tris, &centroids, &mut nodes, &mut order, 0, tris.len());
        Bvh { nodes, order }
    }

    pub fn intersect(&self, tris: &[[Vec3; 3]], ray: &Ray, t_max: f32) -> Option<RawHit> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv_dir = Vec3::new(1.0 / ray.dir.x, 1.0 / ray.dir.y, 1.0 / ray.dir.z);
        let mut best: Option<RawHit> = None;
        let mut stack = [0u32; 64];
        let mut top = 0usize;
        stack[top] = 0;
        top += 1;
        while top > 0 {
            top -= 1;
            let node = &self.nodes[stack[top] as usize];
            let best_t = best.map_or(t_max, |h| h.t);
            // Keep nodes whose entry equals the best t: an equal-t hit with
            // a lower triangle id may still live inside.
            match slab_entry(&node.bounds, ray, inv_dir) {
                Some(entry) if entry <= best_t => {}
                _ => continue,
            }
            if node.count > 0 {
                for &id in &self.order[node.first as usize..(node.first + node.count) as usize] {
                    if let Some((t, u, v)) = intersect_triangle(&tris[id as usize], ray, t_max) {
                        if better((t, id), best.map(|h| (h.t, h.triangle))) {
                            best = Some(RawHit { t, u, v, triangle: id });
                        }
                    }
                }
            } else {
                // Near child last so it pops first.
                let l = node.first as usize;
                let dl = slab_entry(&self.nodes[l].bounds, ray, inv_dir);
                let dr = slab_entry(&self.nodes[l + 1].bounds, ray, inv_dir);
                let (near, far) = if dl.unwrap_or(f32::INFINITY) <= dr.unwrap_or(f32::INFINITY) {
                    (l, l + 1)
                } else {
                    (l + 1, l)
                };
                stack[top] = far as u32;
                stack[top + 1] = near as u32;
                top += 2;
            }
        }
        best
    }
}

fn make_node(tris: &[[Vec3; 3]], ids: &[u32]) -> Node {
    let mut bounds = Aabb::EMPTY;
    for &id in ids {
        for v in &tris[id as usize] {
            bounds.grow(*v);
        }
    }
    Node {
        bounds,
        first: 0,
        count: 0,
    }
}

fn subdivide(
    node: usize,
    tris: &[[Vec3; 3]],
    centroids: &[Vec3],
    nodes: &mut Vec<Node>,
    order: &mut [u32],
    start: usize,
    end: usize,
) {
    let count = end - start;
    if count <= LEAF_SIZE {
        nodes[node].first = start as u32;
        nodes[node].count = count as u32;
        return;
    }

    let mut cb = Aabb::EMPTY;
    for &id in &order[start..end] {
        cb.grow(centroids[id as usize]);
    }
    let extent = cb.max - cb.min;
    let axis = if extent.x >= extent.y && extent.x >= extent.z {
        0
    } else if extent.y >= extent.z {
        1
    } else {
        2
    };

    // Median split keeps the tree balanced without tuning; sort is stable
    // on ids so construction is deterministic.
    order[start..end].sort_unstable_by(|&a, &b| {
        let ca = centroids[a as usize][axis];
        let cb = centroids[b as usize][axis];
        ca.partial_cmp(&cb).unwrap().then(a.cmp(&b))
    });
    let mid = start + count / 2;

    let left = nodes.len();
    nodes.push(make_node(tris, &order[start..mid]));
    nodes.push(make_node(tris, &order[mid..end]));
    nodes[node].first = left as u32;
    nodes[node].count = 0;
    subdivide(left, tris, centroids, nodes, order, start, mid);
    subdivide(left + 1, tris, centroids, nodes, order, mid, end);
}
