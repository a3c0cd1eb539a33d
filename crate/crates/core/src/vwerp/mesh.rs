use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boundary tag of a facet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FacetTag {
    Inlet,
    Outlet(u32),
    Wall,
}

impl FacetTag {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "inlet" => Some(FacetTag::Inlet),
            "wall" => Some(FacetTag::Wall),
            _ => s.strip_prefix("outlet:").and_then(|k| k.parse().ok()).map(FacetTag::Outlet),
        }
    }

    fn label(self) -> String {
        match self {
            FacetTag::Inlet => "inlet".into(),
            FacetTag::Wall => "wall".into(),
            FacetTag::Outlet(k) => format!("outlet:{k}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryFacet {
    pub vertices: [usize; 3],
    pub tag: FacetTag,
    /// Outward unit normal.
    pub normal: [f64; 3],
    pub area: f64,
    /// Tetrahedron the facet belongs to.
    pub element: usize,
}

/// Tetrahedral mesh with tagged boundary facets. Lengths in cm.
#[derive(Clone, Debug, PartialEq)]
pub struct SimplexMesh {
    pub vertices: Vec<[f64; 3]>,
    pub tets: Vec<[usize; 4]>,
    pub facets: Vec<BoundaryFacet>,
}

/// P1 geometry of one tetrahedron.
#[derive(Clone, Copy, Debug)]
pub struct TetGeometry {
    pub volume: f64,
    /// Gradients of the four barycentric basis functions.
    pub grads: [[f64; 3]; 4],
    /// Longest edge.
    pub diameter: f64,
}

pub(crate) fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn signed_volume(v: &[[f64; 3]], t: [usize; 4]) -> f64 {
    let (a, b, c) = (sub(v[t[1]], v[t[0]]), sub(v[t[2]], v[t[0]]), sub(v[t[3]], v[t[0]]));
    dot(a, cross(b, c)) / 6.0
}

impl TetGeometry {
    pub fn new(v: [[f64; 3]; 4]) -> Self {
        let e = [sub(v[1], v[0]), sub(v[2], v[0]), sub(v[3], v[0])];
        let det = dot(e[0], cross(e[1], e[2]));
        // rows of the inverse Jacobian are the reciprocal basis
        let g1 = cross(e[1], e[2]).map(|c| c / det);
        let g2 = cross(e[2], e[0]).map(|c| c / det);
        let g3 = cross(e[0], e[1]).map(|c| c / det);
        let g0 = [-(g1[0] + g2[0] + g3[0]), -(g1[1] + g2[1] + g3[1]), -(g1[2] + g2[2] + g3[2])];
        let mut diameter: f64 = 0.0;
        for i in 0..4 {
            for j in i + 1..4 {
                let d = sub(v[i], v[j]);
                diameter = diameter.max(dot(d, d).sqrt());
            }
        }
        TetGeometry {
            volume: det / 6.0,
            grads: [g0, g1, g2, g3],
            diameter,
        }
    }
}

/// Structured pipe mesh parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipeMeshSpec {
    pub radius: f64,
    pub length: f64,
    /// Radial rings in the cross section.
    pub rings: usize,
    /// Angular sectors of the innermost ring; ring i carries i times as many.
    pub sectors: usize,
    /// Axial layers.
    pub layers: usize,
}

impl PipeMeshSpec {
    /// About 5k tetrahedra for a pipe of aspect ratio 4.
    pub fn benchmark(radius: f64, length: f64) -> Self {
        PipeMeshSpec {
            radius,
            length,
            rings: 4,
            sectors: 6,
            layers: 18,
        }
    }

    /// One uniform refinement level.
    pub fn refined(&self) -> Self {
        PipeMeshSpec {
            rings: 2 * self.rings,
            layers: 2 * self.layers,
            ..*self
        }
    }
}

/// Pipe along z from 0 (inlet) to `length` (outlet 0), radius `radius`.
pub fn build_pipe_mesh(spec: &PipeMeshSpec) -> Result<SimplexMesh> {
    if !(spec.radius > 0.0 && spec.length > 0.0) || spec.rings == 0 || spec.sectors < 3 || spec.layers == 0 {
        return Err(Error::Meshing(format!("invalid pipe mesh parameters {spec:?}")));
    }
    let mut section = vec![[0.0, 0.0]];
    let mut ring_start = vec![0usize];
    for i in 1..=spec.rings {
        ring_start.push(section.len());
        let r = spec.radius * i as f64 / spec.rings as f64;
        let m = spec.sectors * i;
        for j in 0..m {
            let a = 2.0 * PI * j as f64 / m as f64;
            section.push([r * a.cos(), r * a.sin()]);
        }
    }
    let mut tris: Vec<[usize; 3]> = Vec::new();
    for i in 1..=spec.rings {
        let (inner, outer) = (ring_start[i - 1], ring_start[i]);
        let (mi, mo) = (if i == 1 { 1 } else { spec.sectors * (i - 1) }, spec.sectors * i);
        if i == 1 {
            for j in 0..mo {
                tris.push([0, outer + j, outer + (j + 1) % mo]);
            }
            continue;
        }
        // walk both rings by angle, emitting a triangle per advance
        let (mut a, mut b) = (0usize, 0usize);
        while a < mi || b < mo {
            let ta = (a + 1) as f64 / mi as f64;
            let tb = (b + 1) as f64 / mo as f64;
            if b < mo && (a == mi || tb <= ta) {
                tris.push([inner + a % mi, outer + b, outer + (b + 1) % mo]);
                b += 1;
            } else {
                tris.push([inner + a, outer + b % mo, inner + (a + 1) % mi]);
                a += 1;
            }
        }
    }
    let np = section.len();
    let mut vertices = Vec::with_capacity(np * (spec.layers + 1));
    for l in 0..=spec.layers {
        let z = spec.length * l as f64 / spec.layers as f64;
        vertices.extend(section.iter().map(|s| [s[0], s[1], z]));
    }
    let mut tets = Vec::with_capacity(3 * tris.len() * spec.layers);
    for l in 0..spec.layers {
        for t in &tris {
            let mut b = t.map(|v| v + l * np);
            b.sort_unstable();
            let [a, bb, c] = b;
            let (a2, b2, c2) = (a + np, bb + np, c + np);
            // diagonals of each side face start at its lowest index
            tets.push([a, bb, c, c2]);
            tets.push([a, bb, b2, c2]);
            tets.push([a, a2, b2, c2]);
        }
    }
    let z_max = spec.length;
    SimplexMesh::from_tets(vertices, tets, |c| {
        if c.iter().all(|v| v[2].abs() < 1e-12 * z_max) {
            FacetTag::Inlet
        } else if c.iter().all(|v| (v[2] - z_max).abs() < 1e-12 * z_max) {
            FacetTag::Outlet(0)
        } else {
            FacetTag::Wall
        }
    })
}

fn facet_normal(v: &[[f64; 3]], f: [usize; 3], opposite: usize) -> ([f64; 3], f64) {
    let n = cross(sub(v[f[1]], v[f[0]]), sub(v[f[2]], v[f[0]]));
    let len = dot(n, n).sqrt();
    let mut n = n.map(|c| c / len);
    if dot(n, sub(v[opposite], v[f[0]])) > 0.0 {
        n = n.map(|c| -c);
    }
    (n, 0.5 * len)
}

impl SimplexMesh {
    /// Orients the tetrahedra positively, extracts the boundary and tags each
    /// facet from its corner coordinates.
    pub fn from_tets<T: Fn([[f64; 3]; 3]) -> FacetTag>(vertices: Vec<[f64; 3]>, mut tets: Vec<[usize; 4]>, tag: T) -> Result<Self> {
        for t in tets.iter_mut() {
            if t.iter().any(|&i| i >= vertices.len()) {
                return Err(Error::Meshing("vertex index out of range".into()));
            }
            if signed_volume(&vertices, *t) < 0.0 {
                t.swap(2, 3);
            }
        }
        let mut faces: HashMap<[usize; 3], (usize, usize, usize)> = HashMap::new();
        for (e, t) in tets.iter().enumerate() {
            for skip in 0..4 {
                let mut f = [0; 3];
                let mut k = 0;
                for (j, &v) in t.iter().enumerate() {
                    if j != skip {
                        f[k] = v;
                        k += 1;
                    }
                }
                f.sort_unstable();
                faces.entry(f).or_insert((0, t[skip], e)).0 += 1;
            }
        }
        let mut boundary: Vec<([usize; 3], usize, usize)> = faces.into_iter().filter(|(_, (c, _, _))| *c == 1).map(|(f, (_, o, e))| (f, o, e)).collect();
        boundary.sort_unstable();
        let facets = boundary
            .into_iter()
            .map(|(f, o, element)| {
                let (normal, area) = facet_normal(&vertices, f, o);
                BoundaryFacet {
                    vertices: f,
                    tag: tag(f.map(|i| vertices[i])),
                    normal,
                    area,
                    element,
                }
            })
            .collect();
        let mesh = SimplexMesh { vertices, tets, facets };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<()> {
        for (k, t) in self.tets.iter().enumerate() {
            let v = signed_volume(&self.vertices, *t);
            if !(v > 0.0) {
                return Err(Error::Meshing(format!("tetrahedron {k} has volume {v:e}")));
            }
        }
        if self.facets.iter().any(|f| !(f.area > 0.0)) {
            return Err(Error::Meshing("degenerate boundary facet".into()));
        }
        Ok(())
    }

    pub fn geometry(&self, k: usize) -> TetGeometry {
        TetGeometry::new(self.tets[k].map(|i| self.vertices[i]))
    }

    pub fn volume(&self) -> f64 {
        self.tets.iter().map(|t| signed_volume(&self.vertices, *t)).sum()
    }

    pub fn tag_area(&self, tag: FacetTag) -> f64 {
        self.facets.iter().filter(|f| f.tag == tag).map(|f| f.area).sum()
    }

    /// Distinct outlet ids in ascending order.
    pub fn outlets(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self
            .facets
            .iter()
            .filter_map(|f| match f.tag {
                FacetTag::Outlet(k) => Some(k),
                _ => None,
            })
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Area-weighted unit normal per vertex over facets with the given tag;
    /// `None` for vertices not on such a facet.
    pub fn vertex_normals(&self, tag: FacetTag) -> Vec<Option<[f64; 3]>> {
        let mut acc = vec![[0.0; 3]; self.vertices.len()];
        let mut hit = vec![false; self.vertices.len()];
        for f in self.facets.iter().filter(|f| f.tag == tag) {
            for &v in &f.vertices {
                hit[v] = true;
                for c in 0..3 {
                    acc[v][c] += f.area * f.normal[c];
                }
            }
        }
        acc.into_iter()
            .zip(hit)
            .map(|(n, h)| {
                h.then(|| {
                    let len = dot(n, n).sqrt();
                    n.map(|c| c / len)
                })
            })
            .collect()
    }

    /// Plain-text mesh: vertex block, tetrahedron block, tagged facet block.
    pub fn to_text(&self) -> String {
        let mut s = String::from("F4DMESH 1\n");
        let _ = writeln!(s, "vertices {}", self.vertices.len());
        for v in &self.vertices {
            let _ = writeln!(s, "{:?} {:?} {:?}", v[0], v[1], v[2]);
        }
        let _ = writeln!(s, "tetrahedra {}", self.tets.len());
        for t in &self.tets {
            let _ = writeln!(s, "{} {} {} {}", t[0], t[1], t[2], t[3]);
        }
        let _ = writeln!(s, "facets {}", self.facets.len());
        for f in &self.facets {
            let _ = writeln!(s, "{} {} {} {}", f.vertices[0], f.vertices[1], f.vertices[2], f.tag.label());
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::Meshing(format!("mesh file: {m}"));
        let lines: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).collect();
        if lines.first() != Some(&"F4DMESH 1") {
            return Err(bad("missing F4DMESH 1 header"));
        }
        let mut at = 1;
        let mut block = |name: &str| -> Result<Vec<Vec<&str>>> {
            let l = lines.get(at).ok_or_else(|| bad("truncated"))?;
            let n: usize = l
                .strip_prefix(name)
                .and_then(|r| r.trim().parse().ok())
                .ok_or_else(|| bad(&format!("expected '{name} <count>', got '{l}'")))?;
            let rows = lines.get(at + 1..at + 1 + n).ok_or_else(|| bad("truncated block"))?;
            at += 1 + n;
            Ok(rows.iter().map(|l| l.split_whitespace().collect()).collect())
        };
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(&format!("bad number '{s}'")));
        let idx = |s: &str| s.parse::<usize>().map_err(|_| bad(&format!("bad index '{s}'")));
        let vertices = block("vertices")?
            .into_iter()
            .map(|r| match r[..] {
                [x, y, z] => Ok([num(x)?, num(y)?, num(z)?]),
                _ => Err(bad("vertex rows need 3 coordinates")),
            })
            .collect::<Result<Vec<_>>>()?;
        let tets = block("tetrahedra")?
            .into_iter()
            .map(|r| match r[..] {
                [a, b, c, d] => Ok([idx(a)?, idx(b)?, idx(c)?, idx(d)?]),
                _ => Err(bad("tetrahedron rows need 4 indices")),
            })
            .collect::<Result<Vec<_>>>()?;
        let mut tags: HashMap<[usize; 3], FacetTag> = HashMap::new();
        for r in block("facets")? {
            let [a, b, c, t] = r[..] else {
                return Err(bad("facet rows need 3 indices and a tag"));
            };
            let mut f = [idx(a)?, idx(b)?, idx(c)?];
            f.sort_unstable();
            let tag = FacetTag::parse(t).ok_or_else(|| bad(&format!("unknown tag '{t}'")))?;
            if tags.insert(f, tag).is_some() {
                return Err(bad("facet tagged twice"));
            }
        }
        let mut mesh = SimplexMesh::from_tets(vertices, tets, |_| FacetTag::Wall)?;
        if mesh.facets.len() != tags.len() {
            return Err(bad(&format!("{} boundary facets but {} tagged", mesh.facets.len(), tags.len())));
        }
        for f in mesh.facets.iter_mut() {
            f.tag = *tags.get(&f.vertices).ok_or_else(|| bad("boundary facet without tag"))?;
        }
        Ok(mesh)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coarse() -> SimplexMesh {
        build_pipe_mesh(&PipeMeshSpec::benchmark(1.0, 4.0)).unwrap()
    }

    #[test]
    fn pipe_volume_and_areas() {
        let m = coarse();
        assert!(m.tets.len() > 4000 && m.tets.len() < 6000, "{}", m.tets.len());
        let exact = PI * 4.0;
        assert!((m.volume() - exact).abs() < 0.02 * exact, "{}", m.volume());
        assert!((m.tag_area(FacetTag::Inlet) - PI).abs() < 0.02 * PI);
        assert!((m.tag_area(FacetTag::Outlet(0)) - PI).abs() < 0.02 * PI);
        assert!((m.tag_area(FacetTag::Wall) - 2.0 * PI * 4.0).abs() < 0.02 * 8.0 * PI);
        assert_eq!(m.outlets(), vec![0]);
    }

    #[test]
    fn boundary_is_closed_and_tagged_once() {
        let m = coarse();
        // each boundary edge is shared by exactly two boundary facets
        let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
        for f in &m.facets {
            for (a, b) in [(0, 1), (1, 2), (0, 2)] {
                let (x, y) = (f.vertices[a], f.vertices[b]);
                *edges.entry((x.min(y), x.max(y))).or_default() += 1;
            }
        }
        assert!(edges.values().all(|&c| c == 2));
        let total: f64 = m.facets.iter().map(|f| f.area).sum();
        let parts = m.tag_area(FacetTag::Inlet) + m.tag_area(FacetTag::Outlet(0)) + m.tag_area(FacetTag::Wall);
        assert!((total - parts).abs() < 1e-12);
        // divergence theorem on the closed surface: sum of n dA vanishes
        let mut s = [0.0; 3];
        for f in &m.facets {
            for c in 0..3 {
                s[c] += f.area * f.normal[c];
            }
        }
        assert!(s.iter().all(|v| v.abs() < 1e-10), "{s:?}");
        let n_in = m.vertex_normals(FacetTag::Inlet);
        assert!(n_in.iter().flatten().all(|n| (n[2] + 1.0).abs() < 1e-12));
    }

    #[test]
    fn p1_gradients_reproduce_linear_functions() {
        let m = coarse();
        let f = |x: [f64; 3]| 1.0 + 2.0 * x[0] - 3.0 * x[1] + 0.5 * x[2];
        for k in (0..m.tets.len()).step_by(97) {
            let g = m.geometry(k);
            let mut grad = [0.0; 3];
            for (a, &v) in m.tets[k].iter().enumerate() {
                for c in 0..3 {
                    grad[c] += f(m.vertices[v]) * g.grads[a][c];
                }
            }
            assert!((grad[0] - 2.0).abs() < 1e-10 && (grad[1] + 3.0).abs() < 1e-10 && (grad[2] - 0.5).abs() < 1e-10);
        }
    }

    #[test]
    fn refinement_multiplies_elements() {
        let spec = PipeMeshSpec::benchmark(1.0, 4.0);
        let a = build_pipe_mesh(&spec).unwrap();
        let b = build_pipe_mesh(&spec.refined()).unwrap();
        assert_eq!(b.tets.len(), 8 * a.tets.len());
    }

    #[test]
    fn text_round_trip() {
        let m = build_pipe_mesh(&PipeMeshSpec {
            radius: 0.5,
            length: 1.0,
            rings: 2,
            sectors: 4,
            layers: 2,
        })
        .unwrap();
        let back = SimplexMesh::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
        assert!(SimplexMesh::from_text("F4DMESH 2\n").is_err());
        let broken = m.to_text().replace("inlet", "nowhere");
        assert!(SimplexMesh::from_text(&broken).is_err());
    }

    #[test]
    fn rejects_bad_parameters() {
        let mut s = PipeMeshSpec::benchmark(1.0, 4.0);
        s.sectors = 2;
        assert!(matches!(build_pipe_mesh(&s), Err(Error::Meshing(_))));
    }
}
