//! PLY reading and writing for colored point clouds.
//!
//! Reads ASCII and binary little-endian files with any set of elements and
//! properties; only the `vertex` element's `x y z red green blue` are kept.
//! Coordinates may be stored as `float` or `double`. Writing uses `double`
//! coordinates by default so a binary round trip is bit-exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::cloud::{ColoredPointCloud, Point3, Rgb};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PlyFormat {
    Ascii,
    #[default]
    BinaryLittleEndian,
}

/// Storage type written for vertex coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CoordPrecision {
    Float32,
    #[default]
    Float64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn decode(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Clone, Debug)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { count: Scalar, item: Scalar },
}

#[derive(Clone, Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

struct Header {
    format: PlyFormat,
    elements: Vec<Element>,
}

fn read_header(reader: &mut impl BufRead) -> Result<Header> {
    let mut line = String::new();
    let mut next_line = |line: &mut String| -> Result<bool> {
        line.clear();
        let n = reader
            .read_line(line)
            .map_err(|e| Error::MalformedHeader(e.to_string()))?;
        Ok(n > 0)
    };
    if !next_line(&mut line)? || line.trim_end() != "ply" {
        return Err(Error::MalformedHeader("missing 'ply' magic".into()));
    }
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        if !next_line(&mut line)? {
            return Err(Error::MalformedHeader("missing end_header".into()));
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            [] => continue,
            ["end_header"] => break,
            ["comment", ..] | ["obj_info", ..] => continue,
            ["format", fmt, _version] => {
                format = Some(match *fmt {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLittleEndian,
                    other => {
                        return Err(Error::MalformedHeader(format!(
                            "unsupported format '{other}'"
                        )))
                    }
                });
            }
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| Error::MalformedHeader(format!("bad element count '{count}'")))?,
                props: Vec::new(),
            }),
            ["property", "list", count, item, _name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::MalformedHeader("property before element".into()))?;
                let count = Scalar::parse(count)
                    .ok_or_else(|| Error::MalformedHeader(format!("unknown type '{count}'")))?;
                let item = Scalar::parse(item)
                    .ok_or_else(|| Error::MalformedHeader(format!("unknown type '{item}'")))?;
                el.props.push(Property::List { count, item });
            }
            ["property", ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::MalformedHeader("property before element".into()))?;
                let ty = Scalar::parse(ty)
                    .ok_or_else(|| Error::MalformedHeader(format!("unknown type '{ty}'")))?;
                el.props.push(Property::Scalar {
                    name: name.to_string(),
                    ty,
                });
            }
            other => {
                return Err(Error::MalformedHeader(format!(
                    "unexpected header line '{}'",
                    other.join(" ")
                )))
            }
        }
    }
    let format = format.ok_or_else(|| Error::MalformedHeader("missing format line".into()))?;
    Ok(Header { format, elements })
}

/// Column indices of the six vertex properties we keep.
fn vertex_columns(el: &Element) -> Result<[usize; 6]> {
    let find = |name: &str| {
        el.props.iter().position(
            |p| matches!(p, Property::Scalar { name: n, .. } if n == name),
        )
    };
    let x = find("x").ok_or(Error::MissingCoordinate("x"))?;
    let y = find("y").ok_or(Error::MissingCoordinate("y"))?;
    let z = find("z").ok_or(Error::MissingCoordinate("z"))?;
    let r = find("red").ok_or(Error::MissingColor("red"))?;
    let g = find("green").ok_or(Error::MissingColor("green"))?;
    let b = find("blue").ok_or(Error::MissingColor("blue"))?;
    Ok([x, y, z, r, g, b])
}

fn to_color(v: f64, el: &Element, col: usize) -> Result<u8> {
    match &el.props[col] {
        Property::Scalar { ty: Scalar::U8, .. } if (0.0..=255.0).contains(&v) => Ok(v as u8),
        Property::Scalar { name, ty } => Err(Error::MalformedBody(format!(
            "color property '{name}' must be uchar, found {ty:?} value {v}"
        ))),
        Property::List { .. } => unreachable!(),
    }
}

/// Load a colored point cloud from a PLY file.
pub fn load_ply(path: impl AsRef<Path>) -> Result<ColoredPointCloud> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_ply(BufReader::new(file))
}

pub fn read_ply(mut reader: impl BufRead) -> Result<ColoredPointCloud> {
    let header = read_header(&mut reader)?;
    let vertex_idx = header
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| Error::MalformedHeader("no vertex element".into()))?;
    let cols = vertex_columns(&header.elements[vertex_idx])?;
    if header.elements[vertex_idx].count == 0 {
        return Err(Error::EmptyCloud);
    }
    let mut vertices: Vec<Point3> = Vec::new();
    let mut colors: Vec<Rgb> = Vec::new();
    match header.format {
        PlyFormat::Ascii => {
            let mut lines = reader.lines();
            for (ei, el) in header.elements.iter().enumerate() {
                for row in 0..el.count {
                    let line = lines
                        .next()
                        .ok_or_else(|| {
                            Error::MalformedBody(format!("{} row {row} missing", el.name))
                        })?
                        .map_err(|e| Error::MalformedBody(e.to_string()))?;
                    if ei != vertex_idx {
                        continue;
                    }
                    let values = parse_ascii_row(&line, el)?;
                    push_vertex(&values, el, &cols, &mut vertices, &mut colors)?;
                }
                if ei == vertex_idx {
                    break;
                }
            }
        }
        PlyFormat::BinaryLittleEndian => {
            for (ei, el) in header.elements.iter().enumerate() {
                for _ in 0..el.count {
                    let values = read_binary_row(&mut reader, el)?;
                    if ei == vertex_idx {
                        push_vertex(&values, el, &cols, &mut vertices, &mut colors)?;
                    }
                }
                if ei == vertex_idx {
                    break;
                }
            }
        }
    }
    ColoredPointCloud::new(vertices, colors)
}

fn push_vertex(
    values: &[f64],
    el: &Element,
    cols: &[usize; 6],
    vertices: &mut Vec<Point3>,
    colors: &mut Vec<Rgb>,
) -> Result<()> {
    vertices.push([values[cols[0]], values[cols[1]], values[cols[2]]]);
    colors.push([
        to_color(values[cols[3]], el, cols[3])?,
        to_color(values[cols[4]], el, cols[4])?,
        to_color(values[cols[5]], el, cols[5])?,
    ]);
    Ok(())
}

/// One value per property; list properties contribute a NaN placeholder.
fn parse_ascii_row(line: &str, el: &Element) -> Result<Vec<f64>> {
    let mut tokens = line.split_whitespace();
    let mut next = || -> Result<f64> {
        let t = tokens
            .next()
            .ok_or_else(|| Error::MalformedBody(format!("short {} row '{line}'", el.name)))?;
        t.parse::<f64>()
            .map_err(|_| Error::MalformedBody(format!("bad number '{t}'")))
    };
    let mut out = Vec::with_capacity(el.props.len());
    for p in &el.props {
        match p {
            Property::Scalar { .. } => out.push(next()?),
            Property::List { .. } => {
                let n = next()? as usize;
                for _ in 0..n {
                    next()?;
                }
                out.push(f64::NAN);
            }
        }
    }
    Ok(out)
}

fn read_binary_row(reader: &mut impl Read, el: &Element) -> Result<Vec<f64>> {
    let mut buf = [0u8; 8];
    let mut read_scalar = |ty: Scalar| -> Result<f64> {
        let n = ty.size();
        reader
            .read_exact(&mut buf[..n])
            .map_err(|e| Error::MalformedBody(format!("truncated {} data: {e}", el.name)))?;
        Ok(ty.decode(&buf[..n]))
    };
    let mut out = Vec::with_capacity(el.props.len());
    for p in &el.props {
        match *p {
            Property::Scalar { ty, .. } => out.push(read_scalar(ty)?),
            Property::List { count, item } => {
                let n = read_scalar(count)? as usize;
                for _ in 0..n {
                    read_scalar(item)?;
                }
                out.push(f64::NAN);
            }
        }
    }
    Ok(out)
}

/// Write `cloud` to `path` with `double` coordinates.
pub fn save_ply(cloud: &ColoredPointCloud, path: impl AsRef<Path>, format: PlyFormat) -> Result<()> {
    save_ply_with(cloud, path, format, CoordPrecision::Float64)
}

pub fn save_ply_with(
    cloud: &ColoredPointCloud,
    path: impl AsRef<Path>,
    format: PlyFormat,
    precision: CoordPrecision,
) -> Result<()> {
    cloud.ensure_nonempty()?;
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_ply(cloud, &mut w, format, precision).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_ply(
    cloud: &ColoredPointCloud,
    w: &mut impl Write,
    format: PlyFormat,
    precision: CoordPrecision,
) -> std::io::Result<()> {
    let fmt = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    let ty = match precision {
        CoordPrecision::Float32 => "float",
        CoordPrecision::Float64 => "double",
    };
    writeln!(w, "ply")?;
    writeln!(w, "format {fmt} 1.0")?;
    writeln!(w, "element vertex {}", cloud.len())?;
    for axis in ["x", "y", "z"] {
        writeln!(w, "property {ty} {axis}")?;
    }
    for ch in ["red", "green", "blue"] {
        writeln!(w, "property uchar {ch}")?;
    }
    writeln!(w, "end_header")?;
    for (v, c) in cloud.vertices().iter().zip(cloud.colors()) {
        match format {
            // `{:?}` prints the shortest representation that parses back to
            // the same value.
            PlyFormat::Ascii => match precision {
                CoordPrecision::Float64 => {
                    writeln!(w, "{:?} {:?} {:?} {} {} {}", v[0], v[1], v[2], c[0], c[1], c[2])?
                }
                CoordPrecision::Float32 => writeln!(
                    w,
                    "{:?} {:?} {:?} {} {} {}",
                    v[0] as f32, v[1] as f32, v[2] as f32, c[0], c[1], c[2]
                )?,
            },
            PlyFormat::BinaryLittleEndian => {
                for x in v {
                    match precision {
                        CoordPrecision::Float64 => w.write_all(&x.to_le_bytes())?,
                        CoordPrecision::Float32 => w.write_all(&(*x as f32).to_le_bytes())?,
                    }
                }
                w.write_all(c)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const ASCII3: &str = "ply\nformat ascii 1.0\ncomment test\nelement vertex 3\n\
property float x\nproperty float y\nproperty float z\nproperty uchar red\n\
property uchar green\nproperty uchar blue\nelement face 1\n\
property list uchar int vertex_indices\nend_header\n\
0 0 0 255 0 0\n1 0.5 -2 0 255 0\n3.25 1 1 0 0 255\n3 0 1 2\n";

    #[test]
    fn reads_ascii_with_faces() {
        let c = read_ply(ASCII3.as_bytes()).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.vertices()[1], [1.0, 0.5, -2.0]);
        assert_eq!(c.vertices()[2], [3.25, 1.0, 1.0]);
        assert_eq!(c.colors()[2], [0, 0, 255]);
    }

    #[test]
    fn missing_red_is_reported() {
        let text = ASCII3.replace("property uchar red\n", "");
        assert!(matches!(
            read_ply(text.as_bytes()),
            Err(Error::MissingColor("red"))
        ));
    }

    #[test]
    fn malformed_and_empty() {
        assert!(matches!(
            read_ply("plx\n".as_bytes()),
            Err(Error::MalformedHeader(_))
        ));
        let empty = ASCII3.replace("element vertex 3", "element vertex 0");
        assert!(matches!(read_ply(empty.as_bytes()), Err(Error::EmptyCloud)));
        let big_endian = ASCII3.replace("format ascii", "format binary_big_endian");
        assert!(matches!(
            read_ply(big_endian.as_bytes()),
            Err(Error::MalformedHeader(_))
        ));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            load_ply("/nonexistent/dir/cloud.ply"),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn binary_float32_reads_back() {
        let c = ColoredPointCloud::new(vec![[0.5, -1.25, 3.0]], vec![[1, 2, 3]]).unwrap();
        let mut buf = Vec::new();
        write_ply(&c, &mut buf, PlyFormat::BinaryLittleEndian, CoordPrecision::Float32).unwrap();
        assert_eq!(read_ply(buf.as_slice()).unwrap(), c);
    }

    #[test]
    fn empty_cloud_is_not_written() {
        let dir = tempfile::tempdir().unwrap();
        let err = save_ply(
            &ColoredPointCloud::default(),
            dir.path().join("e.ply"),
            PlyFormat::Ascii,
        );
        assert!(matches!(err, Err(Error::EmptyCloud)));
    }

    #[test]
    fn unwritable_path() {
        let c = ColoredPointCloud::new(vec![[0.0; 3]], vec![[0; 3]]).unwrap();
        assert!(matches!(
            save_ply(&c, "/nonexistent/dir/x.ply", PlyFormat::Ascii),
            Err(Error::Io { .. })
        ));
    }

    fn arb_cloud() -> impl Strategy<Value = ColoredPointCloud> {
        prop::collection::vec(
            (prop::array::uniform3(-1e6f64..1e6), prop::array::uniform3(any::<u8>())),
            1..50,
        )
        .prop_map(|rows| {
            let (v, c) = rows.into_iter().unzip();
            ColoredPointCloud::new(v, c).unwrap()
        })
    }

    proptest! {
        #[test]
        fn binary_round_trip_is_lossless(cloud in arb_cloud()) {
            let mut buf = Vec::new();
            write_ply(&cloud, &mut buf, PlyFormat::BinaryLittleEndian, CoordPrecision::Float64).unwrap();
            prop_assert_eq!(read_ply(buf.as_slice()).unwrap(), cloud);
        }

        #[test]
        fn ascii_round_trip_within_text_precision(cloud in arb_cloud()) {
            let mut buf = Vec::new();
            write_ply(&cloud, &mut buf, PlyFormat::Ascii, CoordPrecision::Float64).unwrap();
            let back = read_ply(buf.as_slice()).unwrap();
            prop_assert_eq!(back.colors(), cloud.colors());
            for (a, b) in back.vertices().iter().zip(cloud.vertices()) {
                for k in 0..3 {
                    prop_assert!((a[k] - b[k]).abs() <= 1e-6 * b[k].abs().max(1e-12));
                }
            }
        }
    }
}
