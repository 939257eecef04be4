//! Binary bounding volume hierarchy over a triangle mesh.
//!
//! Construction splits at the centroid median along the longest axis of the
//! centroid bounds. Triangle tests use the watertight formulation of
//! Woop, Benthin and Wald (JCGT 2013), so rays cannot slip between triangles
//! that share an edge.

use glam::Vec3A;

use super::mesh::{Aabb, TriangleMesh};

const MAX_LEAF: usize = 4;

#[derive(Clone, Copy, Debug)]
pub struct Ray {
    pub origin: Vec3A,
    pub dir: Vec3A,
    pub t_min: f32,
    pub t_max: f32,
}

impl Ray {
    pub fn new(origin: Vec3A, dir: Vec3A) -> Self {
        Ray {
            origin,
            dir,
            t_min: 0.0,
            t_max: f32::INFINITY,
        }
    }

    pub fn at(&self, t: f32) -> Vec3A {
        self.origin + self.dir * t
    }
}

/// Nearest hit: triangle id, barycentric weights of the triangle's first two
/// vertices (the third gets `1 - b0 - b1`), and ray distance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub tri: u32,
    pub bary: [f32; 2],
    pub t: f32,
}

#[derive(Clone, Copy, Debug)]
struct Node {
    bounds: Aabb,
    /// Leaf: first triangle slot. Interior: index of the right child (left is `self + 1`).
    offset: u32,
    /// Number of triangles, zero for interior nodes.
    count: u32,
    axis: u8,
}

/// Flattened BVH. Triangles are stored in leaf order for locality.
#[derive(Clone, Debug, Default)]
pub struct Bvh {
    nodes: Vec<Node>,
    tris: Vec<[Vec3A; 3]>,
    tri_ids: Vec<u32>,
}

/// Per-ray constants of the watertight test.
struct RayPre {
    kx: usize,
    ky: usize,
    kz: usize,
    sx: f32,
    sy: f32,
    sz: f32,
    inv_dir: Vec3A,
    neg: [bool; 3],
}

impl RayPre {
    fn new(ray: &Ray) -> Self {
        let a = ray.dir.abs();
        let kz = if a.x > a.y {
            if a.x > a.z {
                0
            } else {
                2
            }
        } else if a.y > a.z {
            1
        } else {
            2
        };
        let mut kx = (kz + 1) % 3;
        let mut ky = (kx + 1) % 3;
        if ray.dir[kz] < 0.0 {
            std::mem::swap(&mut kx, &mut ky);
        }
        let inv_dir = Vec3A::ONE / ray.dir;
        RayPre {
            kx,
            ky,
            kz,
            sx: ray.dir[kx] / ray.dir[kz],
            sy: ray.dir[ky] / ray.dir[kz],
            sz: 1.0 / ray.dir[kz],
            inv_dir,
            neg: [inv_dir.x < 0.0, inv_dir.y < 0.0, inv_dir.z < 0.0],
        }
    }
}

/// Watertight ray/triangle test. Returns `(t, b0, b1)`.
#[inline]
fn intersect_tri(ray: &Ray, pre: &RayPre, v: &[Vec3A; 3]) -> Option<(f32, f32, f32)> {
    let a = (v[0] - ray.origin).to_array();
    let b = (v[1] - ray.origin).to_array();
    let c = (v[2] - ray.origin).to_array();
    let (kx, ky, kz) = (pre.kx, pre.ky, pre.kz);
    let ax = a[kx] - pre.sx * a[kz];
    let ay = a[ky] - pre.sy * a[kz];
    let bx = b[kx] - pre.sx * b[kz];
    let by = b[ky] - pre.sy * b[kz];
    let cx = c[kx] - pre.sx * c[kz];
    let cy = c[ky] - pre.sy * c[kz];
    let mut u = cx * by - cy * bx;
    let mut vv = ax * cy - ay * cx;
    let mut w = bx * ay - by * ax;
    if u == 0.0 || vv == 0.0 || w == 0.0 {
        // edge case: redo the 2D edge functions in double precision
        let (ax, ay, bx, by, cx, cy) = (ax as f64, ay as f64, bx as f64, by as f64, cx as f64, cy as f64);
        u = (cx * by - cy * bx) as f32;
        vv = (ax * cy - ay * cx) as f32;
        w = (bx * ay - by * ax) as f32;
    }
    if (u < 0.0 || vv < 0.0 || w < 0.0) && (u > 0.0 || vv > 0.0 || w > 0.0) {
        return None;
    }
    let det = u + vv + w;
    if det == 0.0 {
        return None;
    }
    let az = pre.sz * a[kz];
    let bz = pre.sz * b[kz];
    let cz = pre.sz * c[kz];
    let t_scaled = u * az + vv * bz + w * cz;
    let inv = 1.0 / det;
    let t = t_scaled * inv;
    if !(t > ray.t_min && t < ray.t_max) {
        return None;
    }
    Some((t, u * inv, vv * inv))
}

#[inline]
fn slab(bounds: &Aabb, ray: &Ray, pre: &RayPre, t_max: f32) -> Option<f32> {
    let t0 = (bounds.min - ray.origin) * pre.inv_dir;
    let t1 = (bounds.max - ray.origin) * pre.inv_dir;
    let tmin = t0.min(t1).max_element().max(ray.t_min);
    let tmax = t0.max(t1).min_element().min(t_max);
    // the 1 + 2γ(3) factor keeps boxes from clipping hits on their faces
    if tmin <= tmax * 1.000_000_4 {
        Some(tmin)
    } else {
        None
    }
}

impl Bvh {
    pub fn build(mesh: &TriangleMesh) -> Bvh {
        let n = mesh.num_triangles();
        if n == 0 {
            return Bvh::default();
        }
        let mut ids: Vec<u32> = (0..n as u32).collect();
        let boxes: Vec<Aabb> = (0..n)
            .map(|i| {
                let mut b = Aabb::EMPTY;
                for p in mesh.triangle(i) {
                    b.grow(p);
                }
                b
            })
            .collect();
        let centroids: Vec<Vec3A> = boxes.iter().map(|b| b.center()).collect();
        let mut nodes = Vec::with_capacity(2 * n / MAX_LEAF + 1);
        build_rec(&mut nodes, &mut ids, 0, &boxes, &centroids);
        let tris = ids.iter().map(|&i| mesh.triangle(i as usize)).collect();
        Bvh {
            nodes,
            tris,
            tri_ids: ids,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.count > 0).count()
    }

    pub fn bounds(&self) -> Aabb {
        self.nodes.first().map(|n| n.bounds).unwrap_or(Aabb::EMPTY)
    }

    /// Nearest hit within the ray's t-range. Ties in `t` resolve to the lower
    /// triangle id so results match a brute-force scan exactly.
    pub fn intersect(&self, ray: &Ray) -> Option<Hit> {
        if self.nodes.is_empty() {
            return None;
        }
        let pre = RayPre::new(ray);
        let mut best: Option<Hit> = None;
        let mut t_best = ray.t_max;
        let mut stack = [0u32; 64];
        let mut sp = 0usize;
        let mut node_idx = 0u32;
        if slab(&self.nodes[0].bounds, ray, &pre, t_best).is_none() {
            return None;
        }
        loop {
            let node = &self.nodes[node_idx as usize];
            if node.count > 0 {
                let start = node.offset as usize;
                let mut r = *ray;
                for slot in start..start + node.count as usize {
                    // admit equal-t candidates so ties can be broken by id
                    r.t_max = if best.is_some() { next_up(t_best) } else { ray.t_max };
                    if let Some((t, b0, b1)) = intersect_tri(&r, &pre, &self.tris[slot]) {
                        let id = self.tri_ids[slot];
                        let better = match best {
                            None => true,
                            Some(h) => t < h.t || (t == h.t && id < h.tri),
                        };
                        if better {
                            t_best = t;
                            best = Some(Hit {
                                tri: id,
                                bary: [b0, b1],
                                t,
                            });
                        }
                    }
                }
            } else {
                let (near, far) = if pre.neg[node.axis as usize] {
                    (node.offset, node_idx + 1)
                } else {
                    (node_idx + 1, node.offset)
                };
                let hit_near = slab(&self.nodes[near as usize].bounds, ray, &pre, t_best);
                let hit_far = slab(&self.nodes[far as usize].bounds, ray, &pre, t_best);
                match (hit_near, hit_far) {
                    (Some(_), Some(_)) => {
                        stack[sp] = far;
                        sp += 1;
                        node_idx = near;
                        continue;
                    }
                    (Some(_), None) => {
                        node_idx = near;
                        continue;
                    }
                    (None, Some(_)) => {
                        node_idx = far;
                        continue;
                    }
                    (None, None) => {}
                }
            }
            if sp == 0 {
                break;
            }
            sp -= 1;
            node_idx = stack[sp];
        }
        best
    }

    /// Any hit strictly inside the ray's t-range.
    pub fn occluded(&self, ray: &Ray) -> bool {
        if self.nodes.is_empty() {
            return false;
        }
        let pre = RayPre::new(ray);
        let mut stack = [0u32; 64];
        let mut sp = 0usize;
        let mut node_idx = 0u32;
        if slab(&self.nodes[0].bounds, ray, &pre, ray.t_max).is_none() {
            return false;
        }
        loop {
            let node = &self.nodes[node_idx as usize];
            if node.count > 0 {
                let start = node.offset as usize;
                for slot in start..start + node.count as usize {
                    if intersect_tri(ray, &pre, &self.tris[slot]).is_some() {
                        return true;
                    }
                }
            } else {
                let l = node_idx + 1;
                let r = node.offset;
                let hl = slab(&self.nodes[l as usize].bounds, ray, &pre, ray.t_max).is_some();
                let hr = slab(&self.nodes[r as usize].bounds, ray, &pre, ray.t_max).is_some();
                if hl && hr {
                    stack[sp] = r;
                    sp += 1;
                    node_idx = l;
                    continue;
                } else if hl {
                    node_idx = l;
                    continue;
                } else if hr {
                    node_idx = r;
                    continue;
                }
            }
            if sp == 0 {
                return false;
            }
            sp -= 1;
            node_idx = stack[sp];
        }
    }

    /// Checks that every leaf box contains its triangles and every interior
    /// box contains its children.
    pub fn check_bounds(&self) -> bool {
        self.nodes.iter().enumerate().all(|(i, n)| {
            if n.count > 0 {
                let s = n.offset as usize;
                self.tris[s..s + n.count as usize]
                    .iter()
                    .all(|t| t.iter().all(|&p| n.bounds.contains(p)))
            } else {
                let l = &self.nodes[i + 1].bounds;
                let r = &self.nodes[n.offset as usize].bounds;
                n.bounds.contains(l.min)
                    && n.bounds.contains(l.max)
                    && n.bounds.contains(r.min)
                    && n.bounds.contains(r.max)
            }
        })
    }
}

#[inline]
fn next_up(t: f32) -> f32 {
    if t.is_finite() {
        f32::from_bits(t.to_bits() + 1)
    } else {
        t
    }
}

fn build_rec(nodes: &mut Vec<Node>, ids: &mut [u32], first: usize, boxes: &[Aabb], centroids: &[Vec3A]) -> u32 {
    let mut bounds = Aabb::EMPTY;
    let mut cbounds = Aabb::EMPTY;
    for &i in ids.iter() {
        bounds = bounds.union(&boxes[i as usize]);
        cbounds.grow(centroids[i as usize]);
    }
    let idx = nodes.len() as u32;
    let ext = cbounds.extent();
    let axis = if ext.x >= ext.y && ext.x >= ext.z {
        0
    } else if ext.y >= ext.z {
        1
    } else {
        2
    };
    if ids.len() <= MAX_LEAF || ext[axis] <= 0.0 {
        nodes.push(Node {
            bounds,
            offset: first as u32,
            count: ids.len() as u32,
            axis: 0,
        });
        return idx;
    }
    nodes.push(Node {
        bounds,
        offset: 0,
        count: 0,
        axis: axis as u8,
    });
    let mid = ids.len() / 2;
    ids.select_nth_unstable_by(mid, |&a, &b| {
        centroids[a as usize][axis]
            .partial_cmp(&centroids[b as usize][axis])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let (left, right) = ids.split_at_mut(mid);
    build_rec(nodes, left, first, boxes, centroids);
    let r = build_rec(nodes, right, first + mid, boxes, centroids);
    nodes[idx as usize].offset = r;
    idx
}

/// Reference nearest-hit scan over every triangle; the oracle for [`Bvh::intersect`].
pub fn brute_force_intersect(mesh: &TriangleMesh, ray: &Ray) -> Option<Hit> {
    let pre = RayPre::new(ray);
    let mut best: Option<Hit> = None;
    for tri in 0..mesh.num_triangles() {
        if let Some((t, b0, b1)) = intersect_tri(ray, &pre, &mesh.triangle(tri)) {
            if best.map_or(true, |h| t < h.t) {
                best = Some(Hit {
                    tri: tri as u32,
                    bary: [b0, b1],
                    t,
                });
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single_triangle() -> TriangleMesh {
        TriangleMesh::new(
            vec![Vec3A::new(-1.0, -1.0, 0.0), Vec3A::new(1.0, -1.0, 0.0), Vec3A::new(0.0, 1.0, 0.0)],
            vec![],
            vec![],
            vec![[0, 1, 2]],
        )
    }

    #[test]
    fn one_triangle_is_a_single_leaf() {
        let bvh = Bvh::build(&single_triangle());
        assert_eq!(bvh.num_nodes(), 1);
        assert_eq!(bvh.num_leaves(), 1);
        let hit = bvh.intersect(&Ray::new(Vec3A::new(0.0, 0.0, 2.0), -Vec3A::Z)).unwrap();
        assert_eq!(hit.tri, 0);
        assert!((hit.t - 2.0).abs() < 1e-6);
    }

    #[test]
    fn ray_missing_bounds_has_no_hit() {
        let mesh = synthetic::uv_sphere(32, 16, 1.0);
        let bvh = Bvh::build(&mesh);
        let ray = Ray::new(Vec3A::new(5.0, 5.0, 5.0), Vec3A::X);
        assert!(bvh.intersect(&ray).is_none());
        assert!(!bvh.occluded(&ray));
    }

    #[test]
    fn axis_ray_hits_unit_sphere_at_two() {
        let mesh = synthetic::uv_sphere(128, 64, 1.0);
        let bvh = Bvh::build(&mesh);
        let hit = bvh.intersect(&Ray::new(Vec3A::new(0.0, 0.0, 3.0), -Vec3A::Z)).unwrap();
        assert!((hit.t - 2.0).abs() < 1e-2, "t = {}", hit.t);
    }

    #[test]
    fn origin_inside_returns_forward_hit() {
        let mesh = synthetic::uv_sphere(64, 32, 1.0);
        let bvh = Bvh::build(&mesh);
        let hit = bvh.intersect(&Ray::new(Vec3A::ZERO, Vec3A::X)).unwrap();
        assert!(hit.t > 0.0 && (hit.t - 1.0).abs() < 1e-2);
    }

    #[test]
    fn grazing_rays_never_report_negative_t() {
        let mesh = synthetic::uv_sphere(64, 32, 1.0);
        let bvh = Bvh::build(&mesh);
        for k in 0..200 {
            let y = 0.99 + 0.0001 * k as f32;
            let ray = Ray::new(Vec3A::new(-3.0, y, 0.0), Vec3A::X);
            if let Some(h) = bvh.intersect(&ray) {
                assert!(h.t >= 0.0);
            }
        }
    }

    #[test]
    fn leaf_boxes_contain_their_triangles() {
        let mesh = synthetic::uv_sphere(48, 24, 1.0);
        assert!(Bvh::build(&mesh).check_bounds());
    }

    #[test]
    fn matches_brute_force_on_random_rays() {
        let mesh = synthetic::noisy_sphere(50, 50, 0.15, 7);
        assert!(mesh.num_triangles() >= 4900);
        let bvh = Bvh::build(&mesh);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut hits = 0;
        for _ in 0..1000 {
            let o = Vec3A::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let target = Vec3A::new(rng.gen_range(-0.8..0.8), rng.gen_range(-0.8..0.8), rng.gen_range(-0.8..0.8));
            let ray = Ray::new(o, (target - o).normalize());
            let a = bvh.intersect(&ray);
            let b = brute_force_intersect(&mesh, &ray);
            match (a, b) {
                (Some(a), Some(b)) => {
                    hits += 1;
                    assert_eq!(a.tri, b.tri);
                    assert!((a.t - b.t).abs() <= 1e-6 * b.t.abs());
                }
                (None, None) => {}
                other => panic!("mismatch {other:?}"),
            }
            assert_eq!(bvh.occluded(&ray), b.is_some());
        }
        assert!(hits > 500);
    }
}
