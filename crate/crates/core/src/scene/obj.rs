//! Wavefront OBJ reader for `v`/`vn`/`vt`/`f` records.
//!
//! OBJ indexes positions, normals and texture coordinates separately; every
//! distinct `(v, vt, vn)` triple becomes one mesh vertex. Polygons are
//! fan-triangulated around their first corner.

use std::collections::HashMap;
use std::path::Path;

use glam::{Vec2, Vec3A};

use super::mesh::TriangleMesh;
use crate::error::{Error, Result};

pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_obj(&text, &path.display().to_string())
}

pub fn parse_obj(text: &str, origin: &str) -> Result<TriangleMesh> {
    let mut v: Vec<Vec3A> = Vec::new();
    let mut vn: Vec<Vec3A> = Vec::new();
    let mut vt: Vec<Vec2> = Vec::new();

    let mut positions = Vec::new();
    let mut normals = Vec::new();
    let mut uvs = Vec::new();
    let mut indices = Vec::new();
    let mut remap: HashMap<(usize, usize, Option<usize>), u32> = HashMap::new();
    let mut any_missing_normal = false;

    let parse_err = |line: usize, msg: String| Error::Parse {
        path: origin.to_string(),
        line,
        msg,
    };

    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut toks = line.split_whitespace();
        let tag = toks.next().unwrap_or("");
        let floats = |toks: std::str::SplitWhitespace<'_>, n: usize| -> Result<Vec<f32>> {
            let vals: Vec<f32> = toks
                .take(n)
                .map(|t| {
                    t.parse::<f32>()
                        .map_err(|_| parse_err(line_no, format!("bad number {t:?}")))
                })
                .collect::<Result<_>>()?;
            if vals.len() < n {
                return Err(parse_err(line_no, format!("expected {n} numbers after {tag:?}")));
            }
            Ok(vals)
        };
        match tag {
            "v" => {
                let p = floats(toks, 3)?;
                v.push(Vec3A::new(p[0], p[1], p[2]));
            }
            "vn" => {
                let p = floats(toks, 3)?;
                vn.push(Vec3A::new(p[0], p[1], p[2]));
            }
            "vt" => {
                let p = floats(toks, 2)?;
                vt.push(Vec2::new(p[0], p[1]));
            }
            "f" => {
                let mut corners = Vec::new();
                for tok in toks {
                    let mut parts = tok.split('/');
                    let resolve = |s: Option<&str>, count: usize, required: bool| -> Result<Option<usize>> {
                        match s {
                            None | Some("") => {
                                if required {
                                    Err(parse_err(line_no, format!("missing index in {tok:?}")))
                                } else {
                                    Ok(None)
                                }
                            }
                            Some(s) => {
                                let i: i64 = s
                                    .parse()
                                    .map_err(|_| parse_err(line_no, format!("bad index {s:?}")))?;
                                let idx = if i > 0 { i - 1 } else { count as i64 + i };
                                if i == 0 || idx < 0 || idx >= count as i64 {
                                    return Err(Error::IndexOutOfBounds {
                                        path: origin.to_string(),
                                        line: line_no,
                                        index: i,
                                        count,
                                    });
                                }
                                Ok(Some(idx as usize))
                            }
                        }
                    };
                    let pi = resolve(parts.next(), v.len(), true)?.unwrap();
                    let ti = match resolve(parts.next(), vt.len(), false)? {
                        Some(t) => t,
                        None => return Err(Error::MissingUvs),
                    };
                    let ni = resolve(parts.next(), vn.len(), false)?;
                    if ni.is_none() {
                        any_missing_normal = true;
                    }
                    let key = (pi, ti, ni);
                    let id = *remap.entry(key).or_insert_with(|| {
                        positions.push(v[pi]);
                        normals.push(ni.map(|n| vn[n]).unwrap_or(Vec3A::ZERO));
                        uvs.push(vt[ti]);
                        (positions.len() - 1) as u32
                    });
                    corners.push(id);
                }
                if corners.len() < 3 {
                    return Err(parse_err(line_no, "face with fewer than 3 vertices".into()));
                }
                for k in 1..corners.len() - 1 {
                    indices.push([corners[0], corners[k], corners[k + 1]]);
                }
            }
            // groups, materials, smoothing and other records are irrelevant here
            _ => {}
        }
    }

    let degenerate_normal = normals.iter().any(|n: &Vec3A| n.length_squared() < 1e-12);
    let normals = if any_missing_normal || degenerate_normal {
        Vec::new()
    } else {
        normals
    };
    Ok(TriangleMesh::new(positions, normals, uvs, indices))
}

/// Serializes a mesh as OBJ with shared `v/vt/vn` indices.
pub fn write_obj(mesh: &TriangleMesh) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    for p in &mesh.positions {
        let _ = writeln!(s, "v {} {} {}", p.x, p.y, p.z);
    }
    for t in &mesh.uvs {
        let _ = writeln!(s, "vt {} {}", t.x, t.y);
    }
    for n in &mesh.normals {
        let _ = writeln!(s, "vn {} {} {}", n.x, n.y, n.z);
    }
    for tri in &mesh.indices {
        let [a, b, c] = tri.map(|i| i + 1);
        let _ = writeln!(s, "f {a}/{a}/{a} {b}/{b}/{b} {c}/{c}/{c}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const CUBE: &str = "\
v -0.5 -0.5 -0.5
v 0.5 -0.5 -0.5
v 0.5 0.5 -0.5
v -0.5 0.5 -0.5
v -0.5 -0.5 0.5
v 0.5 -0.5 0.5
v 0.5 0.5 0.5
v -0.5 0.5 0.5
vt 0 0
vt 1 0
vt 1 1
vt 0 1
f 1/1 4/4 3/3 2/2
f 5/1 6/2 7/3 8/4
f 1/1 2/2 6/3 5/4
f 2/1 3/2 7/3 6/4
f 3/1 4/2 8/3 7/4
f 4/1 1/2 5/3 8/4
";

    #[test]
    fn unit_cube_has_twelve_triangles() {
        let mesh = parse_obj(CUBE, "cube.obj").unwrap();
        assert_eq!(mesh.num_triangles(), 12);
        assert_eq!(mesh.bounds.min, Vec3A::splat(-0.5));
        assert_eq!(mesh.bounds.max, Vec3A::splat(0.5));
        mesh.validate().unwrap();
    }

    #[test]
    fn out_of_range_index_names_line() {
        let text = format!("{CUBE}f 1/1 2/2 99/3\n");
        match parse_obj(&text, "bad.obj") {
            Err(Error::IndexOutOfBounds { line, index, count, .. }) => {
                assert_eq!(line, 19);
                assert_eq!(index, 99);
                assert_eq!(count, 8);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn quad_is_split_along_shared_diagonal() {
        let text = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvt 0 0\nvt 1 0\nvt 1 1\nvt 0 1\nf 1/1 2/2 3/3 4/4\n";
        let mesh = parse_obj(text, "quad.obj").unwrap();
        assert_eq!(mesh.indices, vec![[0, 1, 2], [0, 2, 3]]);
        // both triangles contain the 0-2 diagonal
        for t in &mesh.indices {
            assert!(t.contains(&0) && t.contains(&2));
        }
    }

    #[test]
    fn negative_indices_are_relative() {
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvt 1 0\nvt 0 1\nvn 0 0 1\nf -3/-3/-1 -2/-2/-1 -1/-1/-1\n";
        let mesh = parse_obj(text, "neg.obj").unwrap();
        assert_eq!(mesh.num_triangles(), 1);
        assert_eq!(mesh.positions[1], Vec3A::X);
        assert!((mesh.normals[0] - Vec3A::Z).length() < 1e-6);
    }

    #[test]
    fn missing_uvs_is_an_error() {
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n";
        assert!(matches!(parse_obj(text, "x.obj"), Err(Error::MissingUvs)));
    }

    #[test]
    fn parse_failure_names_line() {
        let text = "v 0 0 0\nv 1 zero 0\n";
        match parse_obj(text, "x.obj") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn write_then_parse_preserves_geometry() {
        let mesh = parse_obj(CUBE, "cube.obj").unwrap();
        let again = parse_obj(&write_obj(&mesh), "again.obj").unwrap();
        assert_eq!(again.num_triangles(), mesh.num_triangles());
        assert_eq!(again.positions, mesh.positions);
        assert_eq!(again.uvs, mesh.uvs);
    }
}
