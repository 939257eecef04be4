use glam::{Vec2, Vec3A};

/// Axis-aligned bounding box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Vec3A,
    pub max: Vec3A,
}

impl Aabb {
    pub const EMPTY: Aabb = Aabb {
        min: Vec3A::splat(f32::INFINITY),
        max: Vec3A::splat(f32::NEG_INFINITY),
    };

    pub fn grow(&mut self, p: Vec3A) {
        self.min = self.min.min(p);
        self.max = self.max.max(p);
    }

    pub fn union(&self, o: &Aabb) -> Aabb {
        Aabb {
            min: self.min.min(o.min),
            max: self.max.max(o.max),
        }
    }

    pub fn center(&self) -> Vec3A {
        0.5 * (self.min + self.max)
    }

    pub fn extent(&self) -> Vec3A {
        (self.max - self.min).max(Vec3A::ZERO)
    }

    pub fn diagonal(&self) -> f32 {
        self.extent().length()
    }

    pub fn is_empty(&self) -> bool {
        self.min.x > self.max.x
    }

    pub fn contains(&self, p: Vec3A) -> bool {
        p.cmpge(self.min).all() && p.cmple(self.max).all()
    }
}

/// Indexed triangle mesh with per-vertex normals and UVs.
#[derive(Clone, Debug)]
pub struct TriangleMesh {
    pub positions: Vec<Vec3A>,
    pub normals: Vec<Vec3A>,
    pub uvs: Vec<Vec2>,
    pub indices: Vec<[u32; 3]>,
    pub bounds: Aabb,
}

impl TriangleMesh {
    /// Builds a mesh and fills in area-weighted normals when `normals` is empty.
    pub fn new(
        positions: Vec<Vec3A>,
        normals: Vec<Vec3A>,
        uvs: Vec<Vec2>,
        indices: Vec<[u32; 3]>,
    ) -> Self {
        let mut bounds = Aabb::EMPTY;
        for &p in &positions {
            bounds.grow(p);
        }
        let mut mesh = TriangleMesh {
            positions,
            normals,
            uvs,
            indices,
            bounds,
        };
        if mesh.normals.len() != mesh.positions.len() {
            mesh.normals = mesh.area_weighted_normals();
        }
        for n in &mut mesh.normals {
            *n = n.normalize_or_zero();
        }
        mesh
    }

    pub fn num_triangles(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn has_uvs(&self) -> bool {
        !self.uvs.is_empty() && self.uvs.len() == self.positions.len()
    }

    pub fn triangle(&self, tri: usize) -> [Vec3A; 3] {
        let [a, b, c] = self.indices[tri];
        [
            self.positions[a as usize],
            self.positions[b as usize],
            self.positions[c as usize],
        ]
    }

    /// Unnormalized face normal (length = 2 × area).
    pub fn face_cross(&self, tri: usize) -> Vec3A {
        let [a, b, c] = self.triangle(tri);
        (b - a).cross(c - a)
    }

    /// Area-weighted vertex normals; vertices sharing a position share a normal
    /// so UV seams do not show up as shading creases.
    pub fn area_weighted_normals(&self) -> Vec<Vec3A> {
        use std::collections::HashMap;
        let key = |p: Vec3A| (p.x.to_bits(), p.y.to_bits(), p.z.to_bits());
        let mut by_pos: HashMap<(u32, u32, u32), Vec3A> = HashMap::new();
        for tri in 0..self.indices.len() {
            let n = self.face_cross(tri);
            for &v in &self.indices[tri] {
                *by_pos.entry(key(self.positions[v as usize])).or_insert(Vec3A::ZERO) += n;
            }
        }
        self.positions
            .iter()
            .map(|&p| {
                let n = by_pos.get(&key(p)).copied().unwrap_or(Vec3A::ZERO);
                n.try_normalize().unwrap_or(Vec3A::Y)
            })
            .collect()
    }

    /// Checks index bounds and unit normals; returns a description of the
    /// first violation.
    pub fn validate(&self) -> Result<(), String> {
        let n = self.positions.len() as u32;
        for (i, tri) in self.indices.iter().enumerate() {
            if tri.iter().any(|&v| v >= n) {
                return Err(format!("triangle {i} indexes past {n} vertices"));
            }
        }
        if self.normals.len() != self.positions.len() {
            return Err("normal count differs from vertex count".into());
        }
        for (i, nrm) in self.normals.iter().enumerate() {
            if (nrm.length() - 1.0).abs() > 1e-4 {
                return Err(format!("normal {i} is not unit length"));
            }
        }
        if !self.uvs.is_empty() && self.uvs.len() != self.positions.len() {
            return Err("uv count differs from vertex count".into());
        }
        Ok(())
    }

    /// Rescales the mesh into a unit-diagonal box centered at the origin.
    pub fn normalize_unit_diagonal(&mut self) {
        if self.bounds.is_empty() {
            return;
        }
        let c = self.bounds.center();
        let d = self.bounds.diagonal();
        if d <= 0.0 {
            return;
        }
        let s = 1.0 / d;
        let mut bounds = Aabb::EMPTY;
        for p in &mut self.positions {
            *p = (*p - c) * s;
            bounds.grow(*p);
        }
        self.bounds = bounds;
    }

    /// Appends another mesh, offsetting its indices.
    pub fn append(&mut self, other: &TriangleMesh) {
        let off = self.positions.len() as u32;
        self.positions.extend_from_slice(&other.positions);
        self.normals.extend_from_slice(&other.normals);
        self.uvs.extend_from_slice(&other.uvs);
        self.indices
            .extend(other.indices.iter().map(|t| [t[0] + off, t[1] + off, t[2] + off]));
        self.bounds = self.bounds.union(&other.bounds);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn computed_normals_are_unit_and_face_aligned() {
        let mesh = TriangleMesh::new(
            vec![Vec3A::ZERO, Vec3A::X, Vec3A::Y],
            vec![],
            vec![Vec2::ZERO, Vec2::X, Vec2::Y],
            vec![[0, 1, 2]],
        );
        for n in &mesh.normals {
            assert!((*n - Vec3A::Z).length() < 1e-6);
        }
        assert!(mesh.validate().is_ok());
    }

    #[test]
    fn normalization_gives_unit_diagonal() {
        let mut mesh = TriangleMesh::new(
            vec![Vec3A::new(1.0, 1.0, 1.0), Vec3A::new(3.0, 1.0, 1.0), Vec3A::new(1.0, 4.0, 2.0)],
            vec![],
            vec![],
            vec![[0, 1, 2]],
        );
        mesh.normalize_unit_diagonal();
        assert!((mesh.bounds.diagonal() - 1.0).abs() < 1e-6);
        assert!(mesh.bounds.center().length() < 1e-6);
    }
}
