//! Text formats: OFF and OBJ meshes, XYZ and ASCII PLY point clouds.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::{GeometryError, PointCloud, TriangleMesh, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    Xyz,
    PlyAscii,
}

impl CloudFormat {
    /// Picks PLY when the text starts with the `ply` magic, XYZ otherwise.
    pub fn sniff(bytes: &[u8]) -> CloudFormat {
        let head = String::from_utf8_lossy(&bytes[..bytes.len().min(16)]);
        if head.trim_start().starts_with("ply") {
            CloudFormat::PlyAscii
        } else {
            CloudFormat::Xyz
        }
    }
}

impl FromStr for CloudFormat {
    type Err = GeometryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "xyz" => Ok(CloudFormat::Xyz),
            "ply" | "ply-ascii" => Ok(CloudFormat::PlyAscii),
            other => Err(GeometryError::Unsupported(format!("point cloud format {other:?}"))),
        }
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> GeometryError {
    GeometryError::Parse {
        line,
        message: message.into(),
    }
}

fn as_text(bytes: &[u8]) -> Result<&str, GeometryError> {
    std::str::from_utf8(bytes).map_err(|e| {
        let line = bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1;
        parse_err(line, "invalid UTF-8")
    })
}

/// Non-empty lines with `#` comments stripped, paired with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.split('#').next().unwrap_or("").trim();
        (!line.is_empty()).then_some((i + 1, line))
    })
}

fn parse_num<T: FromStr>(token: &str, line: usize) -> Result<T, GeometryError> {
    token
        .parse()
        .map_err(|_| parse_err(line, format!("expected a number, found {token:?}")))
}

fn parse_coord(token: &str, line: usize) -> Result<f64, GeometryError> {
    let v: f64 = parse_num(token, line)?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite coordinate {token:?}")));
    }
    Ok(v)
}

fn fan(polygon: &[usize]) -> impl Iterator<Item = [usize; 3]> + '_ {
    (1..polygon.len() - 1).map(move |i| [polygon[0], polygon[i], polygon[i + 1]])
}

/// Parses an ASCII OFF mesh, fan-triangulating polygons from their first vertex.
pub fn parse_off(bytes: &[u8]) -> Result<TriangleMesh, GeometryError> {
    let text = as_text(bytes)?;
    let mut lines = content_lines(text);

    let (header_line, header) = lines.next().ok_or(GeometryError::Empty)?;
    let rest = header
        .strip_prefix("OFF")
        .ok_or_else(|| parse_err(header_line, "missing OFF header"))?;
    if rest.starts_with(|c: char| !c.is_whitespace()) {
        return Err(parse_err(header_line, "missing OFF header"));
    }

    // Counts may share the header line ("OFF 8 6 0") or follow it.
    let (count_line, counts) = if rest.trim().is_empty() {
        lines
            .next()
            .ok_or_else(|| parse_err(header_line, "missing vertex/face counts"))?
    } else {
        (header_line, rest.trim())
    };
    let counts: Vec<&str> = counts.split_whitespace().collect();
    if counts.len() < 2 {
        return Err(parse_err(count_line, "expected vertex and face counts"));
    }
    let n_vertices: usize = parse_num(counts[0], count_line)?;
    let n_faces: usize = parse_num(counts[1], count_line)?;

    let mut vertices = Vec::with_capacity(n_vertices);
    for k in 0..n_vertices {
        let (ln, line) = lines.next().ok_or_else(|| {
            parse_err(count_line, format!("declared {n_vertices} vertices, found {k}"))
        })?;
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() < 3 {
            return Err(parse_err(ln, "vertex needs 3 coordinates"));
        }
        vertices.push(Vec3::new(
            parse_coord(tok[0], ln)?,
            parse_coord(tok[1], ln)?,
            parse_coord(tok[2], ln)?,
        ));
    }

    let mut faces = Vec::with_capacity(n_faces);
    for k in 0..n_faces {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| parse_err(count_line, format!("declared {n_faces} faces, found {k}")))?;
        let mut tok = line.split_whitespace();
        let arity: usize = parse_num(tok.next().unwrap_or(""), ln)?;
        if arity < 3 {
            return Err(parse_err(ln, format!("face with {arity} vertices")));
        }
        let polygon = tok
            .by_ref()
            .take(arity)
            .map(|t| parse_num::<usize>(t, ln))
            .collect::<Result<Vec<_>, _>>()?;
        if polygon.len() != arity {
            return Err(parse_err(ln, format!("face declares {arity} vertices, lists {}", polygon.len())));
        }
        if let Some(&bad) = polygon.iter().find(|&&i| i >= n_vertices) {
            return Err(parse_err(
                ln,
                format!("vertex index {bad} out of range (mesh has {n_vertices})"),
            ));
        }
        faces.extend(fan(&polygon));
    }

    TriangleMesh::new(vertices, faces)
}

/// Parses the `v` and `f` records of a Wavefront OBJ file; everything else is ignored.
pub fn parse_obj(bytes: &[u8]) -> Result<TriangleMesh, GeometryError> {
    let text = as_text(bytes)?;
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (ln, line) in content_lines(text) {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let c: Vec<&str> = tok.collect();
                if c.len() < 3 {
                    return Err(parse_err(ln, "vertex needs 3 coordinates"));
                }
                vertices.push(Vec3::new(
                    parse_coord(c[0], ln)?,
                    parse_coord(c[1], ln)?,
                    parse_coord(c[2], ln)?,
                ));
            }
            Some("f") => {
                let polygon = tok
                    .map(|t| {
                        // `f v/vt/vn`: only the position index matters.
                        let raw: i64 = parse_num(t.split('/').next().unwrap_or(""), ln)?;
                        let idx = if raw > 0 {
                            raw - 1
                        } else {
                            vertices.len() as i64 + raw
                        };
                        if raw == 0 || idx < 0 || idx as usize >= vertices.len() {
                            return Err(parse_err(ln, format!("vertex index {raw} out of range")));
                        }
                        Ok(idx as usize)
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                if polygon.len() < 3 {
                    return Err(parse_err(ln, "face needs at least 3 vertices"));
                }
                faces.extend(fan(&polygon));
            }
            _ => {}
        }
    }
    if vertices.is_empty() {
        return Err(GeometryError::Empty);
    }
    TriangleMesh::new(vertices, faces)
}

/// Loads an OFF or OBJ mesh, chosen by file extension (OFF when unknown).
pub fn load_mesh(path: &Path) -> Result<TriangleMesh, GeometryError> {
    let bytes = std::fs::read(path).map_err(|e| GeometryError::Io(format!("{}: {e}", path.display())))?;
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("obj") => parse_obj(&bytes),
        _ => parse_off(&bytes),
    }
}

/// Serializes `v` lines then 1-based `f` lines, LF-terminated.
///
/// Coordinates use the shortest decimal form that parses back to the same `f64`.
pub fn write_mesh_obj(mesh: &TriangleMesh) -> Vec<u8> {
    let mut out = String::with_capacity(mesh.vertices.len() * 40 + mesh.faces.len() * 20);
    for v in &mesh.vertices {
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
    }
    for f in &mesh.faces {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    out.into_bytes()
}

/// `OFF` header, counts, vertices, then `3 a b c` face lines.
pub fn write_mesh_off(mesh: &TriangleMesh) -> Vec<u8> {
    let mut out = String::with_capacity(mesh.vertices.len() * 40 + mesh.faces.len() * 20);
    let _ = writeln!(out, "OFF\n{} {} 0", mesh.vertices.len(), mesh.faces.len());
    for v in &mesh.vertices {
        let _ = writeln!(out, "{} {} {}", v.x, v.y, v.z);
    }
    for f in &mesh.faces {
        let _ = writeln!(out, "3 {} {} {}", f[0], f[1], f[2]);
    }
    out.into_bytes()
}

pub fn write_xyz(cloud: &PointCloud) -> Vec<u8> {
    let mut out = String::with_capacity(cloud.len() * 40);
    for p in &cloud.points {
        let _ = writeln!(out, "{} {} {}", p.x, p.y, p.z);
    }
    out.into_bytes()
}

pub fn parse_pointcloud(bytes: &[u8], format: CloudFormat) -> Result<PointCloud, GeometryError> {
    let text = as_text(bytes)?;
    let cloud = match format {
        CloudFormat::Xyz => parse_xyz(text)?,
        CloudFormat::PlyAscii => parse_ply(text)?,
    };
    if cloud.is_empty() {
        return Err(GeometryError::Empty);
    }
    Ok(cloud)
}

fn parse_xyz(text: &str) -> Result<PointCloud, GeometryError> {
    let mut points = Vec::new();
    for (ln, line) in content_lines(text) {
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() < 3 {
            return Err(parse_err(ln, format!("expected x y z, found {} values", tok.len())));
        }
        // Trailing columns (normals, colors) must still be numeric.
        for t in &tok[3..] {
            parse_num::<f64>(t, ln)?;
        }
        points.push(Vec3::new(
            parse_coord(tok[0], ln)?,
            parse_coord(tok[1], ln)?,
            parse_coord(tok[2], ln)?,
        ));
    }
    Ok(PointCloud::new(points))
}

struct PlyElement {
    name: String,
    count: usize,
    properties: Vec<String>,
}

fn parse_ply(text: &str) -> Result<PointCloud, GeometryError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, "ply")) => {}
        Some((ln, _)) => return Err(parse_err(ln, "missing ply magic")),
        None => return Err(GeometryError::Empty),
    }

    let mut elements: Vec<PlyElement> = Vec::new();
    let mut saw_format = false;
    loop {
        let (ln, line) = lines.next().ok_or_else(|| parse_err(0, "unterminated PLY header"))?;
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            ["end_header"] => break,
            ["format", "ascii", _] => saw_format = true,
            ["format", other, ..] => {
                return Err(GeometryError::Unsupported(format!("PLY format {other} (only ascii is read)")))
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => elements.push(PlyElement {
                name: name.to_string(),
                count: parse_num(count, ln)?,
                properties: Vec::new(),
            }),
            ["property", "list", _, _, name] | ["property", _, name] => elements
                .last_mut()
                .ok_or_else(|| parse_err(ln, "property before any element"))?
                .properties
                .push(name.to_string()),
            _ => return Err(parse_err(ln, format!("unrecognized header line {line:?}"))),
        }
    }
    if !saw_format {
        return Err(parse_err(1, "missing format line"));
    }

    let mut points = Vec::new();
    for element in &elements {
        let axes = if element.name == "vertex" {
            let find = |axis: &str| element.properties.iter().position(|p| p == axis);
            match (find("x"), find("y"), find("z")) {
                (Some(x), Some(y), Some(z)) => Some([x, y, z]),
                _ => return Err(parse_err(0, "vertex element lacks x/y/z properties")),
            }
        } else {
            None
        };
        for k in 0..element.count {
            let (ln, line) = lines.next().ok_or_else(|| {
                parse_err(0, format!("declared {} {} records, found {k}", element.count, element.name))
            })?;
            if let Some([x, y, z]) = axes {
                let tok: Vec<&str> = line.split_whitespace().collect();
                if tok.len() < element.properties.len() {
                    return Err(parse_err(
                        ln,
                        format!("expected {} values, found {}", element.properties.len(), tok.len()),
                    ));
                }
                for t in &tok {
                    parse_num::<f64>(t, ln)?;
                }
                points.push(Vec3::new(
                    parse_coord(tok[x], ln)?,
                    parse_coord(tok[y], ln)?,
                    parse_coord(tok[z], ln)?,
                ));
            }
        }
    }
    Ok(PointCloud::new(points))
}
