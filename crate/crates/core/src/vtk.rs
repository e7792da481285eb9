//! Legacy ASCII VTK output (unstructured triangle grids, point scalars) plus
//! a minimal reader for the comparison workflow. Floats carry 9 significant
//! digits, enough to round-trip the plotted fields.

use std::fmt::Write as _;
use std::path::Path;

use crate::assembly::NodalField;
use crate::error::{Error, Result};
use crate::mesh::Mesh;

fn fmt9(v: f64) -> String {
    format!("{:.8e}", v)
}

/// Render mesh plus named nodal scalar fields.
pub fn vtk_string(mesh: &Mesh, fields: &[(&str, &NodalField)]) -> Result<String> {
    for (name, field) in fields {
        if name.is_empty() || name.chars().any(|c| c.is_whitespace()) {
            return Err(Error::Config(format!(
                "scalar name '{name}' must be nonempty without whitespace"
            )));
        }
        if field.mesh().as_ref() != mesh {
            return Err(Error::Dimensions(format!(
                "field '{name}' lives on a different mesh"
            )));
        }
    }
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    out.push_str("fractional boundary-value solve\n");
    out.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    let nv = mesh.num_vertices();
    writeln!(out, "POINTS {nv} double").unwrap();
    for v in mesh.vertices() {
        writeln!(out, "{} {} 0", fmt9(v[0]), fmt9(v[1])).unwrap();
    }
    let nt = mesh.num_triangles();
    writeln!(out, "CELLS {nt} {}", 4 * nt).unwrap();
    for t in mesh.triangles() {
        writeln!(out, "3 {} {} {}", t[0], t[1], t[2]).unwrap();
    }
    writeln!(out, "CELL_TYPES {nt}").unwrap();
    for _ in 0..nt {
        out.push_str("5\n");
    }
    if !fields.is_empty() {
        writeln!(out, "POINT_DATA {nv}").unwrap();
        for (name, field) in fields {
            writeln!(out, "SCALARS {name} double 1").unwrap();
            out.push_str("LOOKUP_TABLE default\n");
            for v in field.values() {
                out.push_str(&fmt9(*v));
                out.push('\n');
            }
        }
    }
    Ok(out)
}

pub fn write_vtk(mesh: &Mesh, fields: &[(&str, &NodalField)], path: &Path) -> Result<()> {
    let text = vtk_string(mesh, fields)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Points, cells and scalar arrays of a legacy ASCII VTK file.
#[derive(Debug, Clone, PartialEq)]
pub struct VtkData {
    pub points: Vec<[f64; 2]>,
    pub cells: Vec<[usize; 3]>,
    pub scalars: Vec<(String, Vec<f64>)>,
}

struct Cursor<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Cursor<'a> {
    fn next_content(&mut self) -> Result<(usize, &'a str)> {
        for (idx, line) in self.lines.by_ref() {
            let t = line.trim();
            if !t.is_empty() {
                return Ok((idx + 1, t));
            }
        }
        Err(Error::parse(0, "unexpected end of VTK data"))
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, token: &str, what: &str) -> Result<T> {
    token
        .parse()
        .map_err(|_| Error::parse(line, format!("cannot parse {what} from '{token}'")))
}

pub fn parse_vtk(text: &str) -> Result<VtkData> {
    let mut cur = Cursor {
        lines: text.lines().enumerate(),
    };
    let (_, magic) = cur.next_content()?;
    if !magic.starts_with("# vtk DataFile") {
        return Err(Error::parse(1, "not a VTK data file"));
    }
    cur.next_content()?; // title
    let (ln, fmt) = cur.next_content()?;
    if fmt != "ASCII" {
        return Err(Error::parse(ln, "only ASCII VTK is supported"));
    }
    let (ln, ds) = cur.next_content()?;
    if ds != "DATASET UNSTRUCTURED_GRID" {
        return Err(Error::parse(ln, "expected DATASET UNSTRUCTURED_GRID"));
    }

    let (ln, pts) = cur.next_content()?;
    let mut it = pts.split_whitespace();
    if it.next() != Some("POINTS") {
        return Err(Error::parse(ln, "expected POINTS"));
    }
    let n: usize = parse_num(ln, it.next().unwrap_or(""), "point count")?;
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let (ln, line) = cur.next_content()?;
        let nums: Vec<&str> = line.split_whitespace().collect();
        if nums.len() != 3 {
            return Err(Error::parse(ln, "expected x y z"));
        }
        points.push([
            parse_num(ln, nums[0], "coordinate")?,
            parse_num(ln, nums[1], "coordinate")?,
        ]);
    }

    let (ln, cells_hdr) = cur.next_content()?;
    let mut it = cells_hdr.split_whitespace();
    if it.next() != Some("CELLS") {
        return Err(Error::parse(ln, "expected CELLS"));
    }
    let nt: usize = parse_num(ln, it.next().unwrap_or(""), "cell count")?;
    let mut cells = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (ln, line) = cur.next_content()?;
        let nums: Vec<&str> = line.split_whitespace().collect();
        if nums.len() != 4 || nums[0] != "3" {
            return Err(Error::parse(ln, "expected a 3-vertex cell"));
        }
        cells.push([
            parse_num(ln, nums[1], "vertex index")?,
            parse_num(ln, nums[2], "vertex index")?,
            parse_num(ln, nums[3], "vertex index")?,
        ]);
    }

    let (ln, types_hdr) = cur.next_content()?;
    if !types_hdr.starts_with("CELL_TYPES") {
        return Err(Error::parse(ln, "expected CELL_TYPES"));
    }
    for _ in 0..nt {
        let (ln, line) = cur.next_content()?;
        if line != "5" {
            return Err(Error::parse(ln, "expected triangle cell type 5"));
        }
    }

    let mut scalars = Vec::new();
    if let Ok((ln, pd)) = cur.next_content() {
        if !pd.starts_with("POINT_DATA") {
            return Err(Error::parse(ln, "expected POINT_DATA"));
        }
        loop {
            let Ok((ln, hdr)) = cur.next_content() else {
                break;
            };
            let mut it = hdr.split_whitespace();
            if it.next() != Some("SCALARS") {
                return Err(Error::parse(ln, "expected SCALARS"));
            }
            let name = it
                .next()
                .ok_or_else(|| Error::parse(ln, "SCALARS without a name"))?
                .to_string();
            let (ln2, lut) = cur.next_content()?;
            if !lut.starts_with("LOOKUP_TABLE") {
                return Err(Error::parse(ln2, "expected LOOKUP_TABLE"));
            }
            let mut vals = Vec::with_capacity(n);
            for _ in 0..n {
                let (ln3, line) = cur.next_content()?;
                vals.push(parse_num(ln3, line, "scalar value")?);
            }
            scalars.push((name, vals));
        }
    }

    Ok(VtkData {
        points,
        cells,
        scalars,
    })
}

pub fn read_vtk(path: &Path) -> Result<VtkData> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_vtk(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_quarter_disk;
    use std::sync::Arc;

    fn tiny_mesh() -> Mesh {
        Mesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            vec![[0, 1], [1, 2], [2, 0]],
            false,
        )
        .unwrap()
    }

    #[test]
    fn single_triangle_layout() {
        let mesh = tiny_mesh();
        let text = vtk_string(&mesh, &[]).unwrap();
        assert!(text.contains("POINTS 3 double"));
        assert!(text.contains("CELLS 1 4"));
        assert!(text.contains("CELL_TYPES 1\n5\n"));
        assert!(!text.contains("POINT_DATA"));
    }

    #[test]
    fn round_trip_preserves_nine_digits() {
        let mesh = Arc::new(generate_quarter_disk(4).unwrap());
        let field = NodalField::new(
            mesh.clone(),
            mesh.vertices()
                .iter()
                .map(|v| (3.0 * v[0] + v[1]).sin())
                .collect(),
        )
        .unwrap();
        let text = vtk_string(&mesh, &[("solution", &field)]).unwrap();
        let data = parse_vtk(&text).unwrap();
        assert_eq!(data.points.len(), mesh.num_vertices());
        assert_eq!(data.cells, mesh.triangles());
        assert_eq!(data.scalars.len(), 1);
        assert_eq!(data.scalars[0].0, "solution");
        for (a, b) in data.points.iter().zip(mesh.vertices()) {
            assert!((a[0] - b[0]).abs() <= 5e-9 * b[0].abs().max(1.0));
            assert!((a[1] - b[1]).abs() <= 5e-9 * b[1].abs().max(1.0));
        }
        for (a, b) in data.scalars[0].1.iter().zip(field.values()) {
            assert!((a - b).abs() <= 5e-9 * b.abs().max(1.0));
        }
    }

    #[test]
    fn foreign_field_is_rejected() {
        let mesh = tiny_mesh();
        let other = Arc::new(generate_quarter_disk(3).unwrap());
        let field = NodalField::new(other.clone(), vec![0.0; other.num_vertices()]).unwrap();
        assert!(vtk_string(&mesh, &[("u", &field)]).is_err());
    }

    #[test]
    fn bad_scalar_name_is_rejected() {
        let mesh = Arc::new(tiny_mesh());
        let field = NodalField::new(mesh.clone(), vec![0.0; 3]).unwrap();
        assert!(vtk_string(&mesh, &[("two words", &field)]).is_err());
        assert!(vtk_string(&mesh, &[("", &field)]).is_err());
    }

    #[test]
    fn malformed_input_reports_line() {
        let err = parse_vtk("# vtk DataFile Version 3.0\nt\nASCII\nDATASET UNSTRUCTURED_GRID\nPOINTS 1 double\n1 2\n").unwrap_err();
        assert!(err.to_string().contains("line 6"), "{err}");
        assert!(parse_vtk("not vtk\n").is_err());
    }

    #[test]
    fn multiple_fields_round_trip() {
        let mesh = Arc::new(tiny_mesh());
        let f1 = NodalField::new(mesh.clone(), vec![1.0, 2.0, 3.0]).unwrap();
        let f2 = NodalField::new(mesh.clone(), vec![-1.0, 0.5, 0.25]).unwrap();
        let text = vtk_string(&mesh, &[("a", &f1), ("b", &f2)]).unwrap();
        let data = parse_vtk(&text).unwrap();
        assert_eq!(data.scalars.len(), 2);
        assert_eq!(data.scalars[1].0, "b");
        assert_eq!(data.scalars[1].1, vec![-1.0, 0.5, 0.25]);
    }
}
