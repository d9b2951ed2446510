//! Plain-text interchange formats.
//!
//! All geometry travels as line-oriented ASCII with six fractional digits:
//!
//! * curve networks and sketches: `v x y z` vertex lines followed by
//!   `l i1 i2 ...` polyline lines with 1-based indices; `#` starts a comment;
//! * sketches carry a `# la=<value> seed=<value> source=<id>` header line;
//! * meshes: `v x y z` and triangle `f i j k` lines (1-based);
//! * point clouds: one `x y z` triple per line.
//!
//! Parsers report the 1-based line number of anything they reject.

use crate::geom::{Chain, CurveNetwork, Point3, PointCloud, Sketch, Stroke, TriMesh};
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: polyline references vertex {index} but only {count} are defined")]
    IndexOutOfRange {
        line: usize,
        index: usize,
        count: usize,
    },
    #[error("sketch header missing (expected '# la=<v> seed=<v> source=<id>')")]
    MissingSketchHeader,
    #[error("file has no usable content")]
    Empty,
    #[error("invalid geometry: {0}")]
    Geometry(#[from] crate::geom::GeomError),
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn parse_err(line: usize, message: impl Into<String>) -> IoError {
    IoError::Parse {
        line,
        message: message.into(),
    }
}

fn fmt_point(out: &mut String, prefix: &str, p: Point3) {
    let _ = writeln!(out, "{prefix}{:.6} {:.6} {:.6}", p.x, p.y, p.z);
}

fn parse_f64(tok: &str, line: usize) -> Result<f64, IoError> {
    let v: f64 = tok
        .parse()
        .map_err(|_| parse_err(line, format!("expected a number, got '{tok}'")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite number '{tok}'")));
    }
    Ok(v)
}

fn parse_point(tokens: &[&str], line: usize) -> Result<Point3, IoError> {
    if tokens.len() != 3 {
        return Err(parse_err(
            line,
            format!("expected 3 coordinates, got {}", tokens.len()),
        ));
    }
    Ok(Point3::new(
        parse_f64(tokens[0], line)?,
        parse_f64(tokens[1], line)?,
        parse_f64(tokens[2], line)?,
    ))
}

/// Vertex + polyline body shared by networks and sketches.
struct PolylineFile {
    vertices: Vec<Point3>,
    polylines: Vec<(usize, Vec<usize>)>, // (line number, 0-based indices)
}

fn parse_polyline_body(text: &str) -> Result<PolylineFile, IoError> {
    let mut vertices = Vec::new();
    let mut polylines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let tag = tokens.next().unwrap();
        let rest: Vec<&str> = tokens.collect();
        match tag {
            "v" => vertices.push(parse_point(&rest, line_no)?),
            "l" => {
                if rest.len() < 2 {
                    return Err(parse_err(
                        line_no,
                        format!("polyline needs at least 2 indices, got {}", rest.len()),
                    ));
                }
                let mut idx = Vec::with_capacity(rest.len());
                for tok in rest {
                    let one_based: usize = tok.parse().map_err(|_| {
                        parse_err(line_no, format!("expected a vertex index, got '{tok}'"))
                    })?;
                    if one_based == 0 || one_based > vertices.len() {
                        return Err(IoError::IndexOutOfRange {
                            line: line_no,
                            index: one_based,
                            count: vertices.len(),
                        });
                    }
                    idx.push(one_based - 1);
                }
                polylines.push((line_no, idx));
            }
            other => {
                return Err(parse_err(line_no, format!("unknown record type '{other}'")));
            }
        }
    }
    Ok(PolylineFile {
        vertices,
        polylines,
    })
}

fn chains_from_body(body: &PolylineFile) -> Result<Vec<Chain>, IoError> {
    let mut chains = Vec::with_capacity(body.polylines.len());
    for (line_no, idx) in &body.polylines {
        let pts: Vec<Point3> = idx.iter().map(|&i| body.vertices[i]).collect();
        let chain = Chain::new(pts)
            .map_err(|e| parse_err(*line_no, format!("invalid polyline: {e}")))?;
        chains.push(chain);
    }
    Ok(chains)
}

/// Serialize a curve network. Vertices are written per chain, in chain order.
pub fn write_curve_network(net: &CurveNetwork) -> String {
    let mut out = String::new();
    let mut next_index = 1usize;
    let mut lines = Vec::new();
    for chain in net.chains() {
        let start = next_index;
        for &v in chain.vertices() {
            fmt_point(&mut out, "v ", v);
        }
        next_index += chain.len();
        lines.push((start, chain.len()));
    }
    for (start, count) in lines {
        out.push('l');
        for k in 0..count {
            let _ = write!(out, " {}", start + k);
        }
        out.push('\n');
    }
    out
}

pub fn read_curve_network(text: &str) -> Result<CurveNetwork, IoError> {
    let body = parse_polyline_body(text)?;
    let chains = chains_from_body(&body)?;
    if chains.is_empty() {
        return Err(IoError::Empty);
    }
    Ok(CurveNetwork::from_chains(chains)?)
}

/// Serialize a sketch: header comment, then the polyline body.
pub fn write_sketch(sketch: &Sketch) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# la={:.6} seed={} source={}",
        sketch.abstraction, sketch.seed, sketch.source_id
    );
    let mut next_index = 1usize;
    let mut lines = Vec::new();
    for stroke in &sketch.strokes {
        let start = next_index;
        for &v in stroke.vertices() {
            fmt_point(&mut out, "v ", v);
        }
        next_index += stroke.len();
        lines.push((start, stroke.len()));
    }
    for (start, count) in lines {
        out.push('l');
        for k in 0..count {
            let _ = write!(out, " {}", start + k);
        }
        out.push('\n');
    }
    out
}

pub fn read_sketch(text: &str) -> Result<Sketch, IoError> {
    // The header must be the first non-empty line.
    let header = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .ok_or(IoError::Empty)?;
    let header = header
        .strip_prefix('#')
        .map(str::trim)
        .ok_or(IoError::MissingSketchHeader)?;
    let mut la = None;
    let mut seed = None;
    let mut source = None;
    for field in header.split_whitespace() {
        if let Some(v) = field.strip_prefix("la=") {
            la = Some(parse_f64(v, 1)?);
        } else if let Some(v) = field.strip_prefix("seed=") {
            seed = Some(
                v.parse::<u64>()
                    .map_err(|_| parse_err(1, format!("bad seed '{v}'")))?,
            );
        } else if let Some(v) = field.strip_prefix("source=") {
            source = Some(v.to_string());
        }
    }
    let (Some(abstraction), Some(seed), Some(source_id)) = (la, seed, source) else {
        return Err(IoError::MissingSketchHeader);
    };
    let body = parse_polyline_body(text)?;
    let chains = chains_from_body(&body)?;
    if chains.is_empty() {
        return Err(IoError::Empty);
    }
    Ok(Sketch {
        strokes: chains.iter().map(Stroke::from_chain).collect(),
        abstraction,
        seed,
        source_id,
    })
}

pub fn write_mesh(mesh: &TriMesh) -> String {
    let mut out = String::new();
    for &v in &mesh.vertices {
        fmt_point(&mut out, "v ", v);
    }
    for f in &mesh.faces {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    out
}

pub fn read_mesh(text: &str) -> Result<TriMesh, IoError> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let tag = tokens.next().unwrap();
        let rest: Vec<&str> = tokens.collect();
        match tag {
            "v" => vertices.push(parse_point(&rest, line_no)?),
            "f" => {
                if rest.len() != 3 {
                    return Err(parse_err(
                        line_no,
                        format!("faces must be triangles, got {} indices", rest.len()),
                    ));
                }
                let mut f = [0usize; 3];
                for (k, tok) in rest.iter().enumerate() {
                    let one_based: usize = tok.parse().map_err(|_| {
                        parse_err(line_no, format!("expected a vertex index, got '{tok}'"))
                    })?;
                    if one_based == 0 || one_based > vertices.len() {
                        return Err(IoError::IndexOutOfRange {
                            line: line_no,
                            index: one_based,
                            count: vertices.len(),
                        });
                    }
                    f[k] = one_based - 1;
                }
                faces.push(f);
            }
            other => {
                return Err(parse_err(line_no, format!("unknown record type '{other}'")));
            }
        }
    }
    if vertices.is_empty() && faces.is_empty() {
        return Err(IoError::Empty);
    }
    Ok(TriMesh::new(vertices, faces)?)
}

pub fn write_point_cloud(cloud: &PointCloud) -> String {
    let mut out = String::new();
    for &p in &cloud.points {
        fmt_point(&mut out, "", p);
    }
    out
}

pub fn read_point_cloud(text: &str) -> Result<PointCloud, IoError> {
    let mut points = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        points.push(parse_point(&tokens, line_no)?);
    }
    if points.is_empty() {
        return Err(IoError::Empty);
    }
    Ok(PointCloud::new(points)?)
}

fn file_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::File {
        path: path.display().to_string(),
        source,
    }
}

pub fn load_curve_network(path: &Path) -> Result<CurveNetwork, IoError> {
    let text = std::fs::read_to_string(path).map_err(file_err(path))?;
    read_curve_network(&text)
}

pub fn save_curve_network(path: &Path, net: &CurveNetwork) -> Result<(), IoError> {
    std::fs::write(path, write_curve_network(net)).map_err(file_err(path))
}

pub fn load_sketch(path: &Path) -> Result<Sketch, IoError> {
    let text = std::fs::read_to_string(path).map_err(file_err(path))?;
    read_sketch(&text)
}

pub fn save_sketch(path: &Path, sketch: &Sketch) -> Result<(), IoError> {
    std::fs::write(path, write_sketch(sketch)).map_err(file_err(path))
}

pub fn load_mesh(path: &Path) -> Result<TriMesh, IoError> {
    let text = std::fs::read_to_string(path).map_err(file_err(path))?;
    read_mesh(&text)
}

pub fn save_mesh(path: &Path, mesh: &TriMesh) -> Result<(), IoError> {
    std::fs::write(path, write_mesh(mesh)).map_err(file_err(path))
}

pub fn load_point_cloud(path: &Path) -> Result<PointCloud, IoError> {
    let text = std::fs::read_to_string(path).map_err(file_err(path))?;
    read_point_cloud(&text)
}

pub fn save_point_cloud(path: &Path, cloud: &PointCloud) -> Result<(), IoError> {
    std::fs::write(path, write_point_cloud(cloud)).map_err(file_err(path))
}
