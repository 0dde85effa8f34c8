//! Point cloud files: PLY (ASCII or binary) and whitespace-separated text.
//!
//! PLY vertices need `x`, `y`, `z` properties of any scalar type; an
//! optional integer `object_id` property becomes the cloud's partition.
//! Writing always produces `binary_little_endian` with `double` coordinates
//! so a round trip is bit-exact.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::{GeometryError, PointCloud};

#[derive(Debug, Error)]
pub enum CloudIoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed PLY: {0}")]
    Ply(String),
    #[error("line {line}: {msg}")]
    Text { line: usize, msg: String },
    #[error(transparent)]
    Cloud(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
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

    fn read(self, b: &[u8], little: bool) -> f64 {
        macro_rules! num {
            ($t:ty, $n:expr) => {{
                let arr: [u8; $n] = b[..$n].try_into().unwrap();
                (if little { <$t>::from_le_bytes(arr) } else { <$t>::from_be_bytes(arr) }) as f64
            }};
        }
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => num!(i16, 2),
            Scalar::U16 => num!(u16, 2),
            Scalar::I32 => num!(i32, 4),
            Scalar::U32 => num!(u32, 4),
            Scalar::F32 => num!(f32, 4),
            Scalar::F64 => num!(f64, 8),
        }
    }
}

#[derive(Debug, PartialEq)]
enum Format {
    Ascii,
    BinaryLe,
    BinaryBe,
}

pub fn read_ply(bytes: &[u8]) -> Result<PointCloud, CloudIoError> {
    let mut reader = BufReader::new(bytes);
    let mut line = String::new();
    let next_line = |reader: &mut BufReader<&[u8]>, line: &mut String| -> Result<(), CloudIoError> {
        line.clear();
        let n = reader
            .read_line(line)
            .map_err(|e| CloudIoError::Ply(e.to_string()))?;
        if n == 0 {
            return Err(CloudIoError::Ply("unexpected end of header".into()));
        }
        Ok(())
    };
    next_line(&mut reader, &mut line)?;
    if line.trim() != "ply" {
        return Err(CloudIoError::Ply("missing 'ply' magic".into()));
    }
    let mut format = None;
    let mut vertex_count = None;
    let mut props: Vec<(String, Scalar)> = Vec::new();
    let mut in_vertex = false;
    let mut seen_vertex = false;
    loop {
        next_line(&mut reader, &mut line)?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["end_header"] => break,
            ["format", f, _] => {
                format = Some(match *f {
                    "ascii" => Format::Ascii,
                    "binary_little_endian" => Format::BinaryLe,
                    "binary_big_endian" => Format::BinaryBe,
                    other => return Err(CloudIoError::Ply(format!("unknown format {other}"))),
                })
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => {
                in_vertex = *name == "vertex";
                if in_vertex {
                    if seen_vertex {
                        return Err(CloudIoError::Ply("duplicate vertex element".into()));
                    }
                    seen_vertex = true;
                    vertex_count = Some(
                        count
                            .parse::<usize>()
                            .map_err(|_| CloudIoError::Ply(format!("bad vertex count {count}")))?,
                    );
                } else if !seen_vertex {
                    return Err(CloudIoError::Ply(format!(
                        "element {name} precedes vertex; only vertex-first files are supported"
                    )));
                }
            }
            ["property", "list", ..] if in_vertex => {
                return Err(CloudIoError::Ply("list properties on vertices are not supported".into()))
            }
            ["property", ty, name] if in_vertex => {
                let s = Scalar::parse(ty).ok_or_else(|| CloudIoError::Ply(format!("unknown type {ty}")))?;
                props.push((name.to_string(), s));
            }
            ["property", ..] => {}
            _ => return Err(CloudIoError::Ply(format!("unexpected header line: {}", line.trim()))),
        }
    }
    let format = format.ok_or_else(|| CloudIoError::Ply("missing format line".into()))?;
    let count = vertex_count.ok_or_else(|| CloudIoError::Ply("missing vertex element".into()))?;
    let find = |n: &str| props.iter().position(|(p, _)| p == n);
    let (ix, iy, iz) = match (find("x"), find("y"), find("z")) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        _ => return Err(CloudIoError::Ply("vertex needs x, y, z".into())),
    };
    let iid = find("object_id");
    if let Some(i) = iid {
        if matches!(props[i].1, Scalar::F32 | Scalar::F64) {
            return Err(CloudIoError::Ply("object_id must be an integer property".into()));
        }
    }

    let mut points = Vec::with_capacity(count);
    let mut ids = iid.map(|_| Vec::with_capacity(count));
    let mut row = vec![0.0f64; props.len()];
    match format {
        Format::Ascii => {
            let mut rest = String::new();
            reader
                .read_to_string(&mut rest)
                .map_err(|e| CloudIoError::Ply(e.to_string()))?;
            let mut toks = rest.split_whitespace();
            for v in 0..count {
                for slot in row.iter_mut() {
                    let t = toks
                        .next()
                        .ok_or_else(|| CloudIoError::Ply(format!("vertex {v}: truncated")))?;
                    *slot = t
                        .parse()
                        .map_err(|_| CloudIoError::Ply(format!("vertex {v}: bad number {t}")))?;
                }
                points.push([row[ix], row[iy], row[iz]]);
                if let (Some(out), Some(i)) = (ids.as_mut(), iid) {
                    out.push(row[i] as u32);
                }
            }
        }
        Format::BinaryLe | Format::BinaryBe => {
            let little = format == Format::BinaryLe;
            let stride: usize = props.iter().map(|(_, s)| s.size()).sum();
            let mut buf = vec![0u8; stride];
            for v in 0..count {
                reader
                    .read_exact(&mut buf)
                    .map_err(|_| CloudIoError::Ply(format!("vertex {v}: truncated binary body")))?;
                let mut off = 0;
                for (k, (_, s)) in props.iter().enumerate() {
                    row[k] = s.read(&buf[off..], little);
                    off += s.size();
                }
                points.push([row[ix], row[iy], row[iz]]);
                if let (Some(out), Some(i)) = (ids.as_mut(), iid) {
                    out.push(row[i] as u32);
                }
            }
        }
    }
    Ok(match ids {
        Some(ids) => PointCloud::with_object_ids(points, ids)?,
        None => PointCloud::new(points)?,
    })
}

pub fn write_ply(cloud: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(128 + cloud.len() * 28);
    let ids = cloud.object_ids();
    let _ = write!(
        out,
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\n",
        cloud.len()
    );
    if ids.is_some() {
        out.extend_from_slice(b"property uint object_id\n");
    }
    out.extend_from_slice(b"end_header\n");
    for (i, p) in cloud.points().iter().enumerate() {
        for c in p {
            out.extend_from_slice(&c.to_le_bytes());
        }
        if let Some(ids) = ids {
            out.extend_from_slice(&ids[i].to_le_bytes());
        }
    }
    out
}

/// One point per line: `x y z` or `x y z object_id`. `#` starts a comment.
pub fn read_xyz(text: &str) -> Result<PointCloud, CloudIoError> {
    let mut points = Vec::new();
    let mut ids: Vec<u32> = Vec::new();
    let mut with_ids = None;
    for (n, raw) in text.lines().enumerate() {
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let toks: Vec<&str> = body.split_whitespace().collect();
        let line = n + 1;
        let has_id = match toks.len() {
            3 => false,
            4 => true,
            k => return Err(CloudIoError::Text { line, msg: format!("expected 3 or 4 fields, got {k}") }),
        };
        if *with_ids.get_or_insert(has_id) != has_id {
            return Err(CloudIoError::Text { line, msg: "object_id present on some lines only".into() });
        }
        let mut xyz = [0.0; 3];
        for k in 0..3 {
            xyz[k] = toks[k]
                .parse()
                .map_err(|_| CloudIoError::Text { line, msg: format!("bad number {}", toks[k]) })?;
        }
        points.push(xyz);
        if has_id {
            ids.push(
                toks[3]
                    .parse()
                    .map_err(|_| CloudIoError::Text { line, msg: format!("bad object_id {}", toks[3]) })?,
            );
        }
    }
    Ok(if with_ids == Some(true) {
        PointCloud::with_object_ids(points, ids)?
    } else {
        PointCloud::new(points)?
    })
}

pub fn write_xyz(cloud: &PointCloud) -> String {
    let mut s = String::new();
    for (i, p) in cloud.points().iter().enumerate() {
        match cloud.object_ids() {
            Some(ids) => s.push_str(&format!("{:?} {:?} {:?} {}\n", p[0], p[1], p[2], ids[i])),
            None => s.push_str(&format!("{:?} {:?} {:?}\n", p[0], p[1], p[2])),
        }
    }
    s
}

/// Reads `.ply` by header, anything else as text.
pub fn load_cloud(path: &Path) -> Result<PointCloud, CloudIoError> {
    let bytes = fs::read(path).map_err(|source| CloudIoError::Io {
        path: path.display().to_string(),
        source,
    })?;
    if bytes.starts_with(b"ply") {
        read_ply(&bytes)
    } else {
        read_xyz(&String::from_utf8_lossy(&bytes))
    }
}

pub fn save_ply(path: &Path, cloud: &PointCloud) -> Result<(), CloudIoError> {
    fs::write(path, write_ply(cloud)).map_err(|source| CloudIoError::Io {
        path: path.display().to_string(),
        source,
    })
}
