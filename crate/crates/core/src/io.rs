//! File formats: PLY point clouds (ASCII subset), VSM1 label/vote maps,
//! VSP1 prototypes, and the plain-text landmark, patch, detection, pose,
//! camera and key-value configuration files.
//!
//! Binary formats are little-endian with a four-byte magic. Text formats
//! write floats in shortest round-trip form, so they also reload exactly.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::detect::DetectedLandmark;
use crate::geometry::{CameraIntrinsics, Pixel, Point3, Pose};
use crate::landmark::{Landmark, LandmarkMaps, LandmarkSet, PatchSet, SurfaceCloud};
use crate::pnp::PoseEstimate;
use crate::triplet::PrototypeBank;

pub const VSM1_MAGIC: [u8; 4] = *b"VSM1";
pub const VSP1_MAGIC: [u8; 4] = *b"VSP1";

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic at byte offset {offset}: expected {expected:?}, found {found:?}")]
    BadMagic {
        offset: usize,
        expected: String,
        found: String,
    },
    #[error("truncated file: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("{extra} unexpected trailing bytes after byte offset {offset}")]
    TrailingBytes { offset: usize, extra: usize },
    #[error("invalid value at byte offset {offset}: {reason}")]
    InvalidValue { offset: usize, reason: String },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn parse_err(line: usize, reason: impl Into<String>) -> FormatError {
    FormatError::Parse {
        line,
        reason: reason.into(),
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn magic(&mut self, expected: [u8; 4]) -> Result<(), FormatError> {
        let found = &self.bytes[..self.bytes.len().min(4)];
        if found != expected {
            return Err(FormatError::BadMagic {
                offset: 0,
                expected: String::from_utf8_lossy(&expected).into_owned(),
                found: String::from_utf8_lossy(found).into_owned(),
            });
        }
        self.pos = 4;
        Ok(())
    }

    fn require(&self, total: usize) -> Result<(), FormatError> {
        if self.bytes.len() < total {
            return Err(FormatError::Truncated {
                expected: total,
                actual: self.bytes.len(),
            });
        }
        Ok(())
    }

    fn word(&mut self) -> [u8; 4] {
        let w = self.bytes[self.pos..self.pos + 4].try_into().expect("length checked");
        self.pos += 4;
        w
    }

    fn finish(&self) -> Result<(), FormatError> {
        if self.bytes.len() > self.pos {
            return Err(FormatError::TrailingBytes {
                offset: self.pos,
                extra: self.bytes.len() - self.pos,
            });
        }
        Ok(())
    }
}

/// VSM1: magic, `u32` height, width, label count, then `H·W` `i32`
/// labels and `H·W` pairs of `f32` votes, all row-major.
pub fn encode_maps(maps: &LandmarkMaps) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + maps.len() * 12);
    out.extend_from_slice(&VSM1_MAGIC);
    for v in [maps.height, maps.width, maps.n] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for &l in &maps.labels {
        out.extend_from_slice(&(l as i32).to_le_bytes());
    }
    for v in &maps.votes {
        out.extend_from_slice(&v[0].to_le_bytes());
        out.extend_from_slice(&v[1].to_le_bytes());
    }
    out
}

pub fn decode_maps(bytes: &[u8]) -> Result<LandmarkMaps, FormatError> {
    let mut r = Reader::new(bytes);
    r.require(4)?;
    r.magic(VSM1_MAGIC)?;
    r.require(16)?;
    let height = u32::from_le_bytes(r.word());
    let width = u32::from_le_bytes(r.word());
    let n = u32::from_le_bytes(r.word());
    let len = (height as usize)
        .checked_mul(width as usize)
        .ok_or_else(|| FormatError::InvalidValue {
            offset: 4,
            reason: "image size overflows".into(),
        })?;
    r.require(16 + len * 12)?;
    let mut labels = Vec::with_capacity(len);
    for _ in 0..len {
        let offset = r.pos;
        let l = i32::from_le_bytes(r.word());
        if l < 0 || l as u32 > n {
            return Err(FormatError::InvalidValue {
                offset,
                reason: format!("label {l} outside 0..={n}"),
            });
        }
        labels.push(l as u32);
    }
    let votes = (0..len)
        .map(|_| [f32::from_le_bytes(r.word()), f32::from_le_bytes(r.word())])
        .collect();
    r.finish()?;
    Ok(LandmarkMaps {
        height,
        width,
        n,
        labels,
        votes,
    })
}

/// Prototypes at file precision.
#[derive(Debug, Clone, PartialEq)]
pub struct Prototypes {
    pub count: u32,
    pub dim: u32,
    pub values: Vec<f32>,
}

impl Prototypes {
    pub fn from_bank(bank: &PrototypeBank) -> Self {
        Self {
            count: bank.count() as u32,
            dim: bank.dim as u32,
            values: bank.values.iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn to_bank(&self) -> Result<PrototypeBank, crate::triplet::LossError> {
        PrototypeBank::new(
            self.count as usize,
            self.dim as usize,
            self.values.iter().map(|&v| v as f64).collect(),
        )
    }
}

/// VSP1: magic, `u32` count, `u32` dim, then `count·dim` `f32` values.
pub fn encode_prototypes(p: &Prototypes) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + p.values.len() * 4);
    out.extend_from_slice(&VSP1_MAGIC);
    out.extend_from_slice(&p.count.to_le_bytes());
    out.extend_from_slice(&p.dim.to_le_bytes());
    for v in &p.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_prototypes(bytes: &[u8]) -> Result<Prototypes, FormatError> {
    let mut r = Reader::new(bytes);
    r.require(4)?;
    r.magic(VSP1_MAGIC)?;
    r.require(12)?;
    let count = u32::from_le_bytes(r.word());
    let dim = u32::from_le_bytes(r.word());
    let len = count as usize * dim as usize;
    r.require(12 + len * 4)?;
    let values = (0..len).map(|_| f32::from_le_bytes(r.word())).collect();
    r.finish()?;
    Ok(Prototypes { count, dim, values })
}

fn numbers<T: std::str::FromStr>(line: usize, text: &str, expected: usize) -> Result<Vec<T>, FormatError> {
    let vals = text
        .split_whitespace()
        .map(|t| {
            t.parse::<T>()
                .map_err(|_| parse_err(line, format!("cannot parse '{t}'")))
        })
        .collect::<Result<Vec<T>, _>>()?;
    if vals.len() != expected {
        return Err(parse_err(
            line,
            format!("expected {expected} fields, found {}", vals.len()),
        ));
    }
    Ok(vals)
}

/// Non-empty, non-comment lines with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// ASCII PLY with a single `vertex` element whose first properties are
/// `x y z` (float or double), optionally followed by `nx ny nz`.
pub fn write_ply(cloud: &SurfaceCloud) -> String {
    let mut s = String::from("ply\nformat ascii 1.0\n");
    s.push_str(&format!("element vertex {}\n", cloud.len()));
    s.push_str("property double x\nproperty double y\nproperty double z\n");
    if cloud.normals.is_some() {
        s.push_str("property double nx\nproperty double ny\nproperty double nz\n");
    }
    s.push_str("end_header\n");
    for (i, p) in cloud.points.iter().enumerate() {
        s.push_str(&format!("{} {} {}", p.x, p.y, p.z));
        if let Some(n) = &cloud.normals {
            s.push_str(&format!(" {} {} {}", n[i].x, n[i].y, n[i].z));
        }
        s.push('\n');
    }
    s
}

pub fn read_ply(text: &str) -> Result<SurfaceCloud, FormatError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, "ply")) => {}
        _ => {
            return Err(FormatError::BadMagic {
                offset: 0,
                expected: "ply".into(),
                found: text.lines().next().unwrap_or("").chars().take(8).collect(),
            })
        }
    }
    let mut vertices: Option<usize> = None;
    let mut props: Vec<String> = Vec::new();
    let mut in_vertex = false;
    let mut header_done = false;
    for (no, line) in lines.by_ref() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["format", "ascii", "1.0"] => {}
            ["format", other, ..] => return Err(parse_err(no, format!("unsupported PLY format '{other}'"))),
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", "vertex", n] => {
                vertices = Some(
                    n.parse()
                        .map_err(|_| parse_err(no, format!("bad vertex count '{n}'")))?,
                );
                in_vertex = true;
            }
            ["element", name, _] => return Err(parse_err(no, format!("unsupported element '{name}'"))),
            ["property", ty, name] if in_vertex => {
                if !matches!(*ty, "float" | "double" | "float32" | "float64") {
                    return Err(parse_err(no, format!("unsupported property type '{ty}'")));
                }
                props.push(name.to_string());
            }
            ["end_header"] => {
                header_done = true;
                break;
            }
            _ => return Err(parse_err(no, format!("unexpected header line '{line}'"))),
        }
    }
    if !header_done {
        return Err(parse_err(text.lines().count(), "missing end_header"));
    }
    let n = vertices.ok_or_else(|| parse_err(1, "missing vertex element"))?;
    let has_normals = match props.as_slice() {
        [x, y, z] if x == "x" && y == "y" && z == "z" => false,
        [x, y, z, a, b, c] if x == "x" && y == "y" && z == "z" && a == "nx" && b == "ny" && c == "nz" => true,
        _ => return Err(parse_err(1, format!("unsupported vertex properties {props:?}"))),
    };
    let mut points = Vec::with_capacity(n);
    let mut normals = Vec::new();
    for (no, line) in lines.filter(|(_, l)| !l.is_empty()) {
        if points.len() == n {
            return Err(parse_err(no, "more vertices than declared"));
        }
        let v: Vec<f64> = numbers(no, line, props.len())?;
        points.push(Point3::new(v[0], v[1], v[2]));
        if has_normals {
            normals.push(Vector3::new(v[3], v[4], v[5]));
        }
    }
    if points.len() != n {
        return Err(parse_err(
            text.lines().count(),
            format!("declared {n} vertices, found {}", points.len()),
        ));
    }
    let mut cloud = SurfaceCloud::new(points).map_err(|e| parse_err(0, e.to_string()))?;
    if has_normals {
        cloud.normals = Some(normals);
    }
    Ok(cloud)
}

/// One `id x y z` line per landmark.
pub fn write_landmarks(lms: &LandmarkSet) -> String {
    let mut s = String::from("# id x y z\n");
    for lm in &lms.landmarks {
        s.push_str(&format!(
            "{} {} {} {}\n",
            lm.id, lm.position.x, lm.position.y, lm.position.z
        ));
    }
    s
}

pub fn read_landmarks(text: &str) -> Result<LandmarkSet, FormatError> {
    let mut landmarks: Vec<Landmark> = Vec::new();
    for (no, line) in content_lines(text) {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 4 {
            return Err(parse_err(no, format!("expected 4 fields, found {}", toks.len())));
        }
        let id: u32 = toks[0]
            .parse()
            .map_err(|_| parse_err(no, format!("bad id '{}'", toks[0])))?;
        let xyz: Vec<f64> = numbers(no, &toks[1..].join(" "), 3)?;
        if id as usize != landmarks.len() + 1 {
            return Err(parse_err(
                no,
                format!("expected id {}, found {id}", landmarks.len() + 1),
            ));
        }
        landmarks.push(Landmark {
            id,
            position: Point3::new(xyz[0], xyz[1], xyz[2]),
        });
    }
    Ok(LandmarkSet { landmarks })
}

/// Header `patches <points> <patches> <target_size>`, then one label per line.
pub fn write_patches(p: &PatchSet) -> String {
    let mut s = format!("patches {} {} {}\n", p.labels.len(), p.patch_count, p.target_size);
    for l in &p.labels {
        s.push_str(&format!("{l}\n"));
    }
    s
}

pub fn read_patches(text: &str) -> Result<PatchSet, FormatError> {
    let mut lines = content_lines(text);
    let (no, header) = lines.next().ok_or_else(|| parse_err(1, "empty patch file"))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 4 || toks[0] != "patches" {
        return Err(parse_err(no, "expected 'patches <points> <patches> <target_size>'"));
    }
    let points: usize = toks[1].parse().map_err(|_| parse_err(no, "bad point count"))?;
    let patch_count: u32 = toks[2].parse().map_err(|_| parse_err(no, "bad patch count"))?;
    let target_size: f64 = toks[3].parse().map_err(|_| parse_err(no, "bad target size"))?;
    let labels = lines
        .map(|(no, l)| {
            let v: u32 = l.parse().map_err(|_| parse_err(no, format!("bad label '{l}'")))?;
            if v == 0 || v > patch_count {
                return Err(parse_err(no, format!("label {v} outside 1..={patch_count}")));
            }
            Ok(v)
        })
        .collect::<Result<Vec<u32>, _>>()?;
    if labels.len() != points {
        return Err(parse_err(
            no,
            format!("declared {points} labels, found {}", labels.len()),
        ));
    }
    Ok(PatchSet {
        labels,
        patch_count,
        target_size,
    })
}

/// One `id u v support residual` line per detection.
pub fn write_detections(dets: &[DetectedLandmark]) -> String {
    let mut s = String::from("# id u v support residual\n");
    for d in dets {
        s.push_str(&format!(
            "{} {} {} {} {}\n",
            d.landmark_id, d.location.u, d.location.v, d.support, d.residual
        ));
    }
    s
}

pub fn read_detections(text: &str) -> Result<Vec<DetectedLandmark>, FormatError> {
    content_lines(text)
        .map(|(no, line)| {
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 5 {
                return Err(parse_err(no, format!("expected 5 fields, found {}", toks.len())));
            }
            let bad = |t: &str| parse_err(no, format!("cannot parse '{t}'"));
            Ok(DetectedLandmark {
                landmark_id: toks[0].parse().map_err(|_| bad(toks[0]))?,
                location: Pixel::new(
                    toks[1].parse().map_err(|_| bad(toks[1]))?,
                    toks[2].parse().map_err(|_| bad(toks[2]))?,
                ),
                support: toks[3].parse().map_err(|_| bad(toks[3]))?,
                residual: toks[4].parse().map_err(|_| bad(toks[4]))?,
            })
        })
        .collect()
}

/// Three rows of `[R | t]`, then `inliers <n>` and `mean_reproj_error <px>`.
pub fn write_pose(est: &PoseEstimate) -> String {
    let mut s = String::from("# world-to-camera [R | t], row-major\n");
    let m = est.pose.matrix();
    for r in 0..3 {
        let row: Vec<String> = (0..4).map(|c| m[(r, c)].to_string()).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s.push_str(&format!("inliers {}\n", est.inlier_ids.len()));
    s.push_str(&format!("mean_reproj_error {}\n", est.mean_reproj_error));
    s
}

/// Reads the pose block of a pose file (trailing statistics are ignored).
pub fn read_pose(text: &str) -> Result<Pose, FormatError> {
    let rows: Vec<(usize, Vec<f64>)> = content_lines(text)
        .take(3)
        .map(|(no, l)| numbers::<f64>(no, l, 4).map(|v| (no, v)))
        .collect::<Result<_, _>>()?;
    if rows.len() != 3 {
        return Err(parse_err(text.lines().count(), "expected three pose rows"));
    }
    let rot = Matrix3::from_fn(|r, c| rows[r].1[c]);
    let t = Vector3::new(rows[0].1[3], rows[1].1[3], rows[2].1[3]);
    Pose::new(rot, t).map_err(|e| parse_err(rows[0].0, e.to_string()))
}

/// Ordered `key = value` pairs; `#` starts a comment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, (usize, String)>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| parse_err(i + 1, format!("expected 'key = value', found '{line}'")))?;
            let key = k.trim().to_string();
            if key.is_empty() {
                return Err(parse_err(i + 1, "empty key"));
            }
            if entries.insert(key.clone(), (i + 1, v.trim().to_string())).is_some() {
                return Err(parse_err(i + 1, format!("duplicate key '{key}'")));
            }
        }
        Ok(Self { entries })
    }

    pub fn insert(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), (0, value.to_string()));
    }

    pub fn get_raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, FormatError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| parse_err(*line, format!("invalid value '{v}' for '{key}'"))),
        }
    }

    pub fn require<T: std::str::FromStr>(&self, key: &str) -> Result<T, FormatError> {
        self.get(key)?
            .ok_or_else(|| parse_err(0, format!("missing key '{key}'")))
    }

    /// Fails on the first key not in `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<(), FormatError> {
        match self.entries.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            Some((k, (line, _))) => Err(parse_err(*line, format!("unknown key '{k}'"))),
            None => Ok(()),
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

impl std::fmt::Display for KeyValues {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (k, (_, v)) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

const CAMERA_KEYS: [&str; 8] = ["fx", "fy", "cx", "cy", "width", "height", "rotation", "translation"];

/// Intrinsics and optional world-to-camera pose as `key = value` lines;
/// `rotation` is nine row-major numbers, `translation` three.
pub fn write_camera(k: &CameraIntrinsics, pose: Option<&Pose>) -> String {
    let mut s = format!(
        "fx = {}\nfy = {}\ncx = {}\ncy = {}\nwidth = {}\nheight = {}\n",
        k.fx, k.fy, k.cx, k.cy, k.width, k.height
    );
    if let Some(p) = pose {
        let r: Vec<String> = (0..9).map(|i| p.rotation[(i / 3, i % 3)].to_string()).collect();
        let t: Vec<String> = p.translation.iter().map(|v| v.to_string()).collect();
        s.push_str(&format!("rotation = {}\ntranslation = {}\n", r.join(" "), t.join(" ")));
    }
    s
}

pub fn read_camera(text: &str) -> Result<(CameraIntrinsics, Option<Pose>), FormatError> {
    let kv = KeyValues::parse(text)?;
    kv.check_keys(&CAMERA_KEYS)?;
    let k = CameraIntrinsics::new(
        kv.require("fx")?,
        kv.require("fy")?,
        kv.require("cx")?,
        kv.require("cy")?,
        kv.require("width")?,
        kv.require("height")?,
    )
    .map_err(|e| parse_err(0, e.to_string()))?;
    let pose = match (kv.get_raw("rotation"), kv.get_raw("translation")) {
        (None, None) => None,
        (Some(r), Some(t)) => {
            let r: Vec<f64> = numbers(0, r, 9)?;
            let t: Vec<f64> = numbers(0, t, 3)?;
            Some(
                Pose::new(Matrix3::from_row_slice(&r), Vector3::new(t[0], t[1], t[2]))
                    .map_err(|e| parse_err(0, e.to_string()))?,
            )
        }
        _ => return Err(parse_err(0, "rotation and translation must be given together")),
    };
    Ok((k, pose))
}

pub fn load_text(path: &Path) -> Result<String, FormatError> {
    Ok(fs::read_to_string(path)?)
}

pub fn save_text(path: &Path, text: &str) -> Result<(), FormatError> {
    Ok(fs::write(path, text)?)
}

pub fn load_maps(path: &Path) -> Result<LandmarkMaps, FormatError> {
    decode_maps(&fs::read(path)?)
}

pub fn save_maps(path: &Path, maps: &LandmarkMaps) -> Result<(), FormatError> {
    Ok(fs::write(path, encode_maps(maps))?)
}

pub fn load_prototypes(path: &Path) -> Result<Prototypes, FormatError> {
    decode_prototypes(&fs::read(path)?)
}

pub fn save_prototypes(path: &Path, p: &Prototypes) -> Result<(), FormatError> {
    Ok(fs::write(path, encode_prototypes(p))?)
}
