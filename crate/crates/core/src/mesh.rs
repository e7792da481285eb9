//! Conforming P1 triangulations: a structured polar-fan generator for the
//! quarter disk, uniform 4:1 refinement with arc re-projection, and a
//! plain-text interchange format.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Immutable planar triangulation with an oriented boundary loop.
///
/// Triangles are counterclockwise; `boundary_edges` walk the boundary
/// counterclockwise (domain on the left) and their vertex set equals
/// `boundary_nodes`, which is kept sorted.
#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<[usize; 2]>,
    boundary_nodes: Vec<usize>,
    /// vertex index -> position in `boundary_nodes`, or None for interior
    boundary_index: Vec<Option<usize>>,
    /// refinement snaps midpoints of unit-circle chords back onto the circle
    snap_to_arc: bool,
}

impl PartialEq for Mesh {
    /// Coordinates and connectivity only; refinement provenance is not identity.
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices
            && self.triangles == other.triangles
            && self.boundary_edges == other.boundary_edges
    }
}

impl Mesh {
    /// Build and validate a mesh. Checks every structural invariant: positive
    /// triangle areas, dense vertex use, manifold edge incidence, and a single
    /// closed counterclockwise boundary loop matching the triangulation.
    pub fn new(
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        boundary_edges: Vec<[usize; 2]>,
        snap_to_arc: bool,
    ) -> Result<Self> {
        let nv = vertices.len();
        if nv < 3 || triangles.is_empty() {
            return Err(Error::Mesh(format!(
                "need at least 3 vertices and 1 triangle, got {nv} and {}",
                triangles.len()
            )));
        }
        for (i, v) in vertices.iter().enumerate() {
            if !v[0].is_finite() || !v[1].is_finite() {
                return Err(Error::Mesh(format!("vertex {i} has non-finite coordinates")));
            }
        }

        let mut used = vec![false; nv];
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= nv {
                    return Err(Error::Mesh(format!(
                        "triangle {t} references vertex {v} but there are only {nv} vertices"
                    )));
                }
                used[v] = true;
            }
            let area = signed_area(&vertices, tri);
            if !(area > 0.0) {
                return Err(Error::Mesh(format!(
                    "triangle {t} has non-positive signed area {area:.3e} (vertices must be counterclockwise)"
                )));
            }
        }
        if let Some(i) = used.iter().position(|u| !u) {
            return Err(Error::Mesh(format!("vertex {i} belongs to no triangle")));
        }

        // Directed edge census. A CCW-consistent manifold triangulation uses
        // each directed edge at most once; an undirected edge is interior iff
        // its reverse also appears.
        let mut directed: HashSet<(usize, usize)> = HashSet::new();
        for (t, tri) in triangles.iter().enumerate() {
            for (u, v) in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])] {
                if !directed.insert((u, v)) {
                    return Err(Error::Mesh(format!(
                        "edge {u}-{v} is traversed twice in the same direction (triangle {t}); \
                         mesh is non-manifold or inconsistently oriented"
                    )));
                }
            }
        }
        let tri_boundary: HashSet<(usize, usize)> = directed
            .iter()
            .filter(|&&(u, v)| !directed.contains(&(v, u)))
            .copied()
            .collect();

        if boundary_edges.len() != tri_boundary.len() {
            return Err(Error::Mesh(format!(
                "boundary edge list has {} edges but the triangulation exposes {}",
                boundary_edges.len(),
                tri_boundary.len()
            )));
        }
        let mut sources = HashSet::new();
        for (k, e) in boundary_edges.iter().enumerate() {
            if !tri_boundary.contains(&(e[0], e[1])) {
                return Err(Error::Mesh(format!(
                    "listed boundary edge {}-{} is not a free triangle edge in that orientation",
                    e[0], e[1]
                )));
            }
            let succ = boundary_edges[(k + 1) % boundary_edges.len()];
            if e[1] != succ[0] {
                return Err(Error::Mesh(format!(
                    "boundary loop breaks after edge {}-{}: next edge starts at {}",
                    e[0], e[1], succ[0]
                )));
            }
            if !sources.insert(e[0]) {
                return Err(Error::Mesh(format!(
                    "boundary loop visits vertex {} twice (loop is not simple)",
                    e[0]
                )));
            }
        }
        // counterclockwise loop <=> positive shoelace area
        let shoelace: f64 = boundary_edges
            .iter()
            .map(|e| {
                let (a, b) = (vertices[e[0]], vertices[e[1]]);
                a[0] * b[1] - b[0] * a[1]
            })
            .sum();
        if !(shoelace > 0.0) {
            return Err(Error::Mesh(format!(
                "boundary loop is not counterclockwise (signed area {:.3e})",
                0.5 * shoelace
            )));
        }

        let mut boundary_nodes: Vec<usize> = sources.into_iter().collect();
        boundary_nodes.sort_unstable();
        let mut boundary_index = vec![None; nv];
        for (pos, &v) in boundary_nodes.iter().enumerate() {
            boundary_index[v] = Some(pos);
        }

        Ok(Self {
            vertices,
            triangles,
            boundary_edges,
            boundary_nodes,
            boundary_index,
            snap_to_arc,
        })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[[usize; 2]] {
        &self.boundary_edges
    }

    /// Boundary vertex indices, sorted ascending.
    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    /// For each vertex, its position within `boundary_nodes` (None = interior).
    pub fn boundary_index(&self) -> &[Option<usize>] {
        &self.boundary_index
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_boundary_nodes(&self) -> usize {
        self.boundary_nodes.len()
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.num_vertices())
            .filter(|&v| self.boundary_index[v].is_none())
            .collect()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        signed_area(&self.vertices, &self.triangles[t])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn centroid(&self, t: usize) -> [f64; 2] {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn edge_length(&self, e: [usize; 2]) -> f64 {
        let (a, b) = (self.vertices[e[0]], self.vertices[e[1]]);
        ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
    }

    /// Split every triangle into four by edge midpoints. For meshes that came
    /// from the quarter-disk generator, midpoints of unit-circle chords are
    /// re-projected radially onto the circle, so the polygonal arc converges
    /// to the true arc under repeated refinement.
    pub fn refine_uniform(&self) -> Mesh {
        let mut vertices = self.vertices.clone();
        let mut midpoint_of: HashMap<(usize, usize), usize> = HashMap::new();
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());

        let on_arc = |v: [f64; 2]| ((v[0] * v[0] + v[1] * v[1]).sqrt() - 1.0).abs() <= 1e-12;
        let mut midpoint = |u: usize, v: usize, vertices: &mut Vec<[f64; 2]>| -> usize {
            let key = (u.min(v), u.max(v));
            if let Some(&m) = midpoint_of.get(&key) {
                return m;
            }
            let (a, b) = (vertices[u], vertices[v]);
            let mut p = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
            if self.snap_to_arc && on_arc(a) && on_arc(b) {
                let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
                p = [p[0] / r, p[1] / r];
            }
            let m = vertices.len();
            vertices.push(p);
            midpoint_of.insert(key, m);
            m
        };

        for &[a, b, c] in &self.triangles {
            let mab = midpoint(a, b, &mut vertices);
            let mbc = midpoint(b, c, &mut vertices);
            let mca = midpoint(c, a, &mut vertices);
            triangles.push([a, mab, mca]);
            triangles.push([mab, b, mbc]);
            triangles.push([mca, mbc, c]);
            triangles.push([mab, mbc, mca]);
        }

        let mut boundary_edges = Vec::with_capacity(2 * self.boundary_edges.len());
        for &[u, v] in &self.boundary_edges {
            let m = midpoint_of[&(u.min(v), u.max(v))];
            boundary_edges.push([u, m]);
            boundary_edges.push([m, v]);
        }

        Mesh::new(vertices, triangles, boundary_edges, self.snap_to_arc)
            .expect("uniform refinement of a valid mesh stays valid")
    }

    /// Write the mesh in the plain-text interchange format: header `NV NT NB`,
    /// then vertex coordinates (17 significant digits, so the round trip is
    /// bit-exact), triangles, and the ordered boundary loop.
    pub fn export(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        writeln!(
            out,
            "{} {} {}",
            self.num_vertices(),
            self.num_triangles(),
            self.boundary_edges.len()
        )
        .unwrap();
        for v in &self.vertices {
            writeln!(out, "{:.16e} {:.16e}", v[0], v[1]).unwrap();
        }
        for t in &self.triangles {
            writeln!(out, "{} {} {}", t[0], t[1], t[2]).unwrap();
        }
        for e in &self.boundary_edges {
            writeln!(out, "{} {}", e[0], e[1]).unwrap();
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Parse the text format written by `export`. Malformed content reports
    /// its 1-based line number; the assembled mesh is then fully validated.
    pub fn import(path: &Path) -> Result<Mesh> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let lines: Vec<&str> = text.lines().collect();
        let get = |idx: usize| -> Result<&str> {
            lines
                .get(idx)
                .copied()
                .ok_or_else(|| Error::parse(idx + 1, "unexpected end of file"))
        };

        let header = fields(get(0)?, 3, 1)?;
        let nv = parse_usize(&header[0], 1)?;
        let nt = parse_usize(&header[1], 1)?;
        let nb = parse_usize(&header[2], 1)?;

        let mut vertices = Vec::with_capacity(nv);
        for i in 0..nv {
            let ln = 1 + i;
            let f = fields(get(ln)?, 2, ln + 1)?;
            vertices.push([parse_f64(&f[0], ln + 1)?, parse_f64(&f[1], ln + 1)?]);
        }
        let mut triangles = Vec::with_capacity(nt);
        for i in 0..nt {
            let ln = 1 + nv + i;
            let f = fields(get(ln)?, 3, ln + 1)?;
            let tri = [
                parse_usize(&f[0], ln + 1)?,
                parse_usize(&f[1], ln + 1)?,
                parse_usize(&f[2], ln + 1)?,
            ];
            for &v in &tri {
                if v >= nv {
                    return Err(Error::parse(
                        ln + 1,
                        format!("triangle vertex {v} out of range (mesh declares {nv} vertices)"),
                    ));
                }
            }
            triangles.push(tri);
        }
        let mut boundary_edges = Vec::with_capacity(nb);
        for i in 0..nb {
            let ln = 1 + nv + nt + i;
            let f = fields(get(ln)?, 2, ln + 1)?;
            let e = [parse_usize(&f[0], ln + 1)?, parse_usize(&f[1], ln + 1)?];
            for &v in &e {
                if v >= nv {
                    return Err(Error::parse(
                        ln + 1,
                        format!("boundary vertex {v} out of range (mesh declares {nv} vertices)"),
                    ));
                }
            }
            boundary_edges.push(e);
        }
        let end = 1 + nv + nt + nb;
        if let Some(extra) = lines[end.min(lines.len())..].iter().position(|l| !l.trim().is_empty()) {
            return Err(Error::parse(end + extra + 1, "trailing content after declared counts"));
        }

        Mesh::new(vertices, triangles, boundary_edges, false)
    }
}

fn signed_area(vertices: &[[f64; 2]], tri: &[usize; 3]) -> f64 {
    let [a, b, c] = tri.map(|v| vertices[v]);
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn fields(line: &str, want: usize, lineno: usize) -> Result<Vec<String>> {
    let f: Vec<String> = line.split_whitespace().map(str::to_owned).collect();
    if f.len() != want {
        return Err(Error::parse(
            lineno,
            format!("expected {want} whitespace-separated fields, found {}", f.len()),
        ));
    }
    Ok(f)
}

fn parse_usize(s: &str, lineno: usize) -> Result<usize> {
    s.parse()
        .map_err(|_| Error::parse(lineno, format!("`{s}` is not a nonnegative integer")))
}

fn parse_f64(s: &str, lineno: usize) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| Error::parse(lineno, format!("`{s}` is not a number")))?;
    if !v.is_finite() {
        return Err(Error::parse(lineno, format!("`{s}` is not finite")));
    }
    Ok(v)
}

/// Triangulate the quarter disk {x >= 0, y >= 0, |x| <= 1} on a polar grid
/// with `n` concentric rings. Ring i sits at radius i/n and carries 2i+1
/// equally spaced vertices, so ring i starts at flat index i^2; strips between
/// rings are triangulated by merging the two vertex sequences in angular
/// order. Arc vertices land exactly on the unit circle.
pub fn generate_quarter_disk(n: usize) -> Result<Mesh> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "quarter-disk generator needs at least 2 rings, got {n}"
        )));
    }
    let start = |i: usize| i * i;

    let mut vertices = vec![[0.0, 0.0]];
    for i in 1..=n {
        let r = i as f64 / n as f64;
        let seg = 2 * i;
        for j in 0..=seg {
            // snap the axis vertices so boundary coordinates are exact
            vertices.push(if j == 0 {
                [r, 0.0]
            } else if j == seg {
                [0.0, r]
            } else {
                let th = j as f64 * std::f64::consts::FRAC_PI_2 / seg as f64;
                [r * th.cos(), r * th.sin()]
            });
        }
    }

    let mut triangles = Vec::with_capacity(2 * n * n);
    for i in 1..=n {
        let (in0, in_seg) = (start(i - 1), 2 * (i - 1));
        let (out0, out_seg) = (start(i), 2 * i);
        let (mut p, mut q) = (0, 0);
        while p < in_seg || q < out_seg {
            // advance whichever ring's next vertex sits at the smaller angle;
            // compare j_out/out_seg vs j_in/in_seg in integers, ties to outer
            let advance_outer =
                q < out_seg && (p == in_seg || (q + 1) * in_seg <= (p + 1) * out_seg);
            if advance_outer {
                triangles.push([in0 + p, out0 + q, out0 + q + 1]);
                q += 1;
            } else {
                triangles.push([in0 + p, out0 + q, in0 + p + 1]);
                p += 1;
            }
        }
    }

    // boundary walk: out the x-axis, over the arc, back down the y-axis
    let mut boundary_edges = Vec::with_capacity(4 * n);
    for i in 1..=n {
        boundary_edges.push([start(i - 1), start(i)]);
    }
    for q in 0..2 * n {
        boundary_edges.push([start(n) + q, start(n) + q + 1]);
    }
    for i in (1..=n).rev() {
        boundary_edges.push([start(i) + 2 * i, start(i - 1) + 2 * (i - 1)]);
    }

    Mesh::new(vertices, triangles, boundary_edges, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn generator_counts_match_closed_forms() {
        // (n+1)^2 vertices, 2n^2 triangles, 4n boundary edges
        let m = generate_quarter_disk(10).unwrap();
        assert_eq!(m.num_vertices(), 121);
        assert_eq!(m.num_triangles(), 200);
        assert_eq!(m.boundary_edges().len(), 40);
        assert_eq!(m.num_boundary_nodes(), 40);
    }

    #[test]
    fn two_rings_is_already_valid() {
        let m = generate_quarter_disk(2).unwrap();
        assert_eq!(m.num_vertices(), 9);
        assert_eq!(m.num_triangles(), 8);
        for t in 0..m.num_triangles() {
            assert!(m.triangle_area(t) > 0.0);
        }
    }

    #[test]
    fn single_ring_rejected() {
        assert!(matches!(
            generate_quarter_disk(1),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn area_matches_inscribed_polygon() {
        // chords of the outer ring span pi/(4n) each, so the polygonal domain
        // has area n*sin(pi/(4n)); triangle areas must tile it exactly
        let m = generate_quarter_disk(8).unwrap();
        let area = m.total_area();
        let polygon = 8.0 * (PI / 32.0).sin();
        assert!(
            (area - polygon).abs() <= 1e-12 * polygon,
            "area {area:.15} vs polygon {polygon:.15}"
        );
        let quarter_disk = PI / 4.0;
        assert!((area - quarter_disk).abs() / quarter_disk < 0.01);
    }

    #[test]
    fn boundary_vertices_lie_on_axes_or_circle() {
        let m = generate_quarter_disk(6).unwrap();
        for &v in m.boundary_nodes() {
            let [x, y] = m.vertices()[v];
            let r = (x * x + y * y).sqrt();
            assert!(
                x == 0.0 || y == 0.0 || (r - 1.0).abs() <= 1e-12,
                "boundary vertex {v} at ({x}, {y}) is off the domain boundary"
            );
        }
    }

    #[test]
    fn refinement_quadruples_and_grows_area() {
        let coarse = generate_quarter_disk(10).unwrap();
        let medium = coarse.refine_uniform();
        assert_eq!(medium.num_vertices(), 441);
        assert_eq!(medium.num_triangles(), 800);
        assert_eq!(medium.boundary_edges().len(), 80);
        let fine = medium.refine_uniform();
        assert_eq!(fine.num_vertices(), 1681);
        assert_eq!(fine.num_triangles(), 3200);

        // arc midpoints get pushed out onto the circle, so area only grows
        let (a0, a1, a2) = (coarse.total_area(), medium.total_area(), fine.total_area());
        assert!(a1 >= a0 && a2 >= a1, "{a0} {a1} {a2}");
        assert!(a2 < PI / 4.0);
    }

    #[test]
    fn refinement_keeps_parent_boundary_nodes() {
        let parent = generate_quarter_disk(4).unwrap();
        let child = parent.refine_uniform();
        for &v in parent.boundary_nodes() {
            assert!(child.boundary_index()[v].is_some());
        }
        // and new arc vertices really sit on the circle
        for &v in child.boundary_nodes() {
            let [x, y] = child.vertices()[v];
            let r = (x * x + y * y).sqrt();
            assert!(x == 0.0 || y == 0.0 || (r - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn export_import_round_trips_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.txt");
        for mesh in [
            generate_quarter_disk(3).unwrap(),
            generate_quarter_disk(5).unwrap().refine_uniform(),
        ] {
            mesh.export(&path).unwrap();
            let back = Mesh::import(&path).unwrap();
            assert_eq!(mesh, back);
            assert_eq!(mesh.boundary_nodes(), back.boundary_nodes());
        }
    }

    const UNIT_SQUARE: &str = "4 2 4\n0 0\n1 0\n1 1\n0 1\n0 1 2\n0 2 3\n0 1\n1 2\n2 3\n3 0\n";

    #[test]
    fn hand_written_unit_square_imports() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("square.txt");
        std::fs::write(&path, UNIT_SQUARE).unwrap();
        let m = Mesh::import(&path).unwrap();
        assert_eq!(m.num_vertices(), 4);
        assert_eq!(m.num_triangles(), 2);
        assert_eq!(m.num_boundary_nodes(), 4);
        assert!((m.total_area() - 1.0).abs() < 1e-15);
        assert_eq!(m.interior_nodes(), Vec::<usize>::new());
    }

    #[test]
    fn out_of_range_triangle_is_a_parse_error_with_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.txt");
        let bad = UNIT_SQUARE.replace("0 1 2\n", "0 1 4\n");
        std::fs::write(&path, bad).unwrap();
        match Mesh::import(&path) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 6);
                assert!(message.contains("out of range"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn garbage_coordinate_reports_its_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.txt");
        std::fs::write(&path, UNIT_SQUARE.replace("1 0\n", "1 zero\n")).unwrap();
        match Mesh::import(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn truncated_file_reports_end() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.txt");
        std::fs::write(&path, "4 2 4\n0 0\n1 0\n").unwrap();
        assert!(matches!(Mesh::import(&path), Err(Error::Parse { line: 4, .. })));
    }

    #[test]
    fn inconsistent_boundary_is_an_invariant_error() {
        // boundary loop wrong orientation (clockwise)
        let cw = "4 2 4\n0 0\n1 0\n1 1\n0 1\n0 1 2\n0 2 3\n1 0\n0 3\n3 2\n2 1\n";
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cw.txt");
        std::fs::write(&path, cw).unwrap();
        assert!(matches!(Mesh::import(&path), Err(Error::Mesh(_))));
    }
}
