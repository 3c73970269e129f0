//! Point-cloud and image files: XYZ text, binary PLY and 16-bit PGM.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, RenderedView, RESOLUTION};

/// Writes `bytes` to a temporary sibling and renames it over `path`, so a
/// reader never sees a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// One `x y z` line per point, 9 significant digits.
pub fn format_xyz(cloud: &PointCloud) -> String {
    let mut s = String::with_capacity(cloud.len() * 48);
    for p in cloud.iter() {
        s.push_str(&format!("{:.8e} {:.8e} {:.8e}\n", p[0], p[1], p[2]));
    }
    s
}

pub fn parse_xyz(text: &str, path: &Path) -> Result<PointCloud> {
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut coords = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(err(i + 1, format!("expected 3 coordinates, found {}", fields.len())));
        }
        for f in fields {
            let v: f64 = f.parse().map_err(|_| err(i + 1, format!("not a number: '{f}'")))?;
            if !v.is_finite() {
                return Err(err(i + 1, format!("non-finite coordinate '{f}'")));
            }
            coords.push(v);
        }
    }
    if coords.is_empty() {
        return Err(err(0, "no points".into()));
    }
    PointCloud::from_flat(coords)
}

pub fn write_xyz(path: &Path, cloud: &PointCloud) -> Result<()> {
    write_atomic(path, format_xyz(cloud).as_bytes())
}

pub fn read_xyz(path: &Path) -> Result<PointCloud> {
    parse_xyz(&fs::read_to_string(path)?, path)
}

/// Binary little-endian PLY with float `x y z` and optional uchar colors.
pub fn encode_ply(cloud: &PointCloud, colors: Option<&[[u8; 3]]>) -> Result<Vec<u8>> {
    if let Some(c) = colors {
        if c.len() != cloud.len() {
            return Err(Error::shape("ply colors", &[c.len()], &[cloud.len()]));
        }
    }
    let mut header = format!(
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\n",
        cloud.len()
    );
    if colors.is_some() {
        header.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    header.push_str("end_header\n");
    let stride = if colors.is_some() { 15 } else { 12 };
    let mut out = header.into_bytes();
    out.reserve(cloud.len() * stride);
    for (i, p) in cloud.iter().enumerate() {
        for v in p {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        if let Some(c) = colors {
            out.extend_from_slice(&c[i]);
        }
    }
    Ok(out)
}

pub fn write_ply(path: &Path, cloud: &PointCloud, colors: Option<&[[u8; 3]]>) -> Result<()> {
    write_atomic(path, &encode_ply(cloud, colors)?)
}

const PGM_MAX: f64 = 65535.0;

/// 16-bit binary PGM (`P5`, big-endian samples). The viewpoint is kept in a
/// header comment so the file alone reconstructs the view.
pub fn encode_pgm(view: &RenderedView) -> Vec<u8> {
    let mut out = format!(
        "P5\n# azimuth {} elevation {}\n{RESOLUTION} {RESOLUTION}\n65535\n",
        view.azimuth_deg, view.elevation_deg
    )
    .into_bytes();
    for &p in view.pixels() {
        out.extend_from_slice(&((p as f64 * PGM_MAX).round() as u16).to_be_bytes());
    }
    out
}

pub fn decode_pgm(bytes: &[u8], path: &Path) -> Result<RenderedView> {
    let err = |line: usize, msg: &str| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    };
    // header: four text lines
    let mut pos = 0;
    let mut lines = Vec::new();
    while lines.len() < 4 {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| err(lines.len() + 1, "truncated header"))?;
        lines.push(std::str::from_utf8(&bytes[pos..pos + end]).map_err(|_| err(lines.len() + 1, "non-text header"))?);
        pos += end + 1;
    }
    if lines[0] != "P5" {
        return Err(err(1, "not a binary PGM"));
    }
    let angles: Vec<&str> = lines[1].split_whitespace().collect();
    let (azimuth, elevation) = match angles.as_slice() {
        ["#", "azimuth", a, "elevation", e] => (
            a.parse::<f64>().map_err(|_| err(2, "bad azimuth"))?,
            e.parse::<f64>().map_err(|_| err(2, "bad elevation"))?,
        ),
        _ => return Err(err(2, "missing '# azimuth A elevation E' comment")),
    };
    if lines[2] != format!("{RESOLUTION} {RESOLUTION}") {
        return Err(err(3, "expected a 128x128 image"));
    }
    if lines[3] != "65535" {
        return Err(err(4, "expected 16-bit samples"));
    }
    let payload = &bytes[pos..];
    if payload.len() != RESOLUTION * RESOLUTION * 2 {
        return Err(err(5, "payload size does not match 128x128x2 bytes"));
    }
    let pixels = payload
        .chunks_exact(2)
        .map(|c| (u16::from_be_bytes([c[0], c[1]]) as f64 / PGM_MAX) as f32)
        .collect();
    RenderedView::new(pixels, azimuth, elevation)
}

pub fn write_pgm(path: &Path, view: &RenderedView) -> Result<()> {
    write_atomic(path, &encode_pgm(view))
}

pub fn read_pgm(path: &Path) -> Result<RenderedView> {
    decode_pgm(&fs::read(path)?, path)
}
