//! STL triangle-soup I/O, binary and ASCII, with auto-detection on read.
//!
//! Binary layout: 80-byte header, 4-byte little-endian triangle count, then
//! 50-byte records (normal as 3 f32, vertices as 9 f32, 2-byte attribute
//! set to zero). Binary write-read-write round trips are byte identical.

use crate::error::{Error, Result};
use crate::geometry::{Triangle, TriangleSoup};

const HEADER: &[u8; 80] = b"lrkit binary STL\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0";
const RECORD_SIZE: usize = 50;
const MAX_TRIANGLES: u32 = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StlMode {
    Ascii,
    Binary,
}

pub fn write_stl(soup: &TriangleSoup, mode: StlMode) -> Vec<u8> {
    match mode {
        StlMode::Binary => write_binary(soup),
        StlMode::Ascii => write_ascii(soup).into_bytes(),
    }
}

fn write_binary(soup: &TriangleSoup) -> Vec<u8> {
    let mut out = Vec::with_capacity(84 + RECORD_SIZE * soup.triangles.len());
    out.extend_from_slice(HEADER);
    out.extend_from_slice(&(soup.triangles.len() as u32).to_le_bytes());
    for t in &soup.triangles {
        for &v in &t.normal {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        for vertex in &t.vertices {
            for &v in vertex {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(&0u16.to_le_bytes());
    }
    out
}

fn write_ascii(soup: &TriangleSoup) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    let _ = writeln!(out, "solid lrkit");
    for t in &soup.triangles {
        let n: Vec<String> = t.normal.iter().map(|&v| format!("{:e}", v as f32)).collect();
        let _ = writeln!(out, "  facet normal {} {} {}", n[0], n[1], n[2]);
        let _ = writeln!(out, "    outer loop");
        for vertex in &t.vertices {
            let v: Vec<String> = vertex.iter().map(|&v| format!("{:e}", v as f32)).collect();
            let _ = writeln!(out, "      vertex {} {} {}", v[0], v[1], v[2]);
        }
        let _ = writeln!(out, "    endloop");
        let _ = writeln!(out, "  endfacet");
    }
    let _ = writeln!(out, "endsolid lrkit");
    out
}

/// Read STL data, auto-detecting the flavour: content starting with `solid`
/// is tried as ASCII first, with a binary fallback (binary headers may start
/// with the same bytes).
pub fn read_stl(bytes: &[u8]) -> Result<TriangleSoup> {
    let looks_ascii = bytes.starts_with(b"solid")
        || bytes
            .iter()
            .take_while(|b| b.is_ascii_whitespace())
            .count()
            .checked_add(5)
            .is_some_and(|_| {
                let trimmed: Vec<u8> = bytes
                    .iter()
                    .skip_while(|b| b.is_ascii_whitespace())
                    .take(5)
                    .copied()
                    .collect();
                trimmed == b"solid"
            });
    if looks_ascii {
        if let Ok(text) = std::str::from_utf8(bytes) {
            if let Ok(soup) = read_ascii(text) {
                return Ok(soup);
            }
        }
    }
    read_binary(bytes)
}

pub fn read_binary(bytes: &[u8]) -> Result<TriangleSoup> {
    if bytes.len() < 84 {
        return Err(Error::Parse {
            line: 0,
            msg: format!("binary STL needs at least 84 bytes, got {}", bytes.len()),
        });
    }
    let count = u32::from_le_bytes([bytes[80], bytes[81], bytes[82], bytes[83]]);
    if count > MAX_TRIANGLES {
        return Err(Error::Parse {
            line: 0,
            msg: format!("triangle count {count} exceeds the supported maximum"),
        });
    }
    let expected = 84usize + RECORD_SIZE * count as usize;
    if bytes.len() != expected {
        return Err(Error::Parse {
            line: 0,
            msg: format!(
                "binary STL length {} does not match header count {count} (expected {expected})",
                bytes.len()
            ),
        });
    }
    let mut triangles = Vec::with_capacity(count as usize);
    let mut offset = 84usize;
    let read_f32 = |offset: &mut usize| -> f64 {
        let v = f32::from_le_bytes([
            bytes[*offset],
            bytes[*offset + 1],
            bytes[*offset + 2],
            bytes[*offset + 3],
        ]);
        *offset += 4;
        v as f64
    };
    for _ in 0..count {
        let normal = [
            read_f32(&mut offset),
            read_f32(&mut offset),
            read_f32(&mut offset),
        ];
        let mut vertices = [[0.0f64; 3]; 3];
        for vertex in vertices.iter_mut() {
            for v in vertex.iter_mut() {
                *v = read_f32(&mut offset);
            }
        }
        offset += 2; // attribute byte count
        triangles.push(Triangle { vertices, normal });
    }
    Ok(TriangleSoup { triangles })
}

pub fn read_ascii(text: &str) -> Result<TriangleSoup> {
    let mut triangles = Vec::new();
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let parse_f = |s: &str, line: usize| -> Result<f64> {
        s.parse::<f32>()
            .map(|v| v as f64)
            .map_err(|_| Error::Parse {
                line,
                msg: format!("malformed coordinate {s:?}"),
            })
    };
    let (line, first) = lines
        .find(|(_, l)| !l.is_empty())
        .ok_or(Error::Parse {
            line: 0,
            msg: "empty input".to_string(),
        })?;
    if !first.starts_with("solid") {
        return Err(Error::Parse {
            line,
            msg: "ASCII STL must start with \"solid\"".to_string(),
        });
    }
    let mut closed = false;
    while let Some((line, text)) = lines.next() {
        if text.is_empty() {
            continue;
        }
        if text.starts_with("endsolid") {
            closed = true;
            break;
        }
        let rest = text.strip_prefix("facet normal").ok_or(Error::Parse {
            line,
            msg: format!("expected \"facet normal\", found {text:?}"),
        })?;
        let n: Vec<f64> = rest
            .split_whitespace()
            .map(|s| parse_f(s, line))
            .collect::<Result<_>>()?;
        if n.len() != 3 {
            return Err(Error::Parse {
                line,
                msg: "facet normal needs three components".to_string(),
            });
        }
        let (line2, loop_line) = lines.next().ok_or(Error::Parse {
            line,
            msg: "truncated facet".to_string(),
        })?;
        if loop_line != "outer loop" {
            return Err(Error::Parse {
                line: line2,
                msg: format!("expected \"outer loop\", found {loop_line:?}"),
            });
        }
        let mut vertices = [[0.0f64; 3]; 3];
        for vertex in vertices.iter_mut() {
            let (vline, vtext) = lines.next().ok_or(Error::Parse {
                line,
                msg: "truncated facet".to_string(),
            })?;
            let rest = vtext.strip_prefix("vertex").ok_or(Error::Parse {
                line: vline,
                msg: format!("expected \"vertex\", found {vtext:?}"),
            })?;
            let coords: Vec<f64> = rest
                .split_whitespace()
                .map(|s| parse_f(s, vline))
                .collect::<Result<_>>()?;
            if coords.len() != 3 {
                return Err(Error::Parse {
                    line: vline,
                    msg: "vertex needs three coordinates".to_string(),
                });
            }
            vertex.copy_from_slice(&coords);
        }
        for expected in ["endloop", "endfacet"] {
            let (eline, etext) = lines.next().ok_or(Error::Parse {
                line,
                msg: "truncated facet".to_string(),
            })?;
            if etext != expected {
                return Err(Error::Parse {
                    line: eline,
                    msg: format!("expected {expected:?}, found {etext:?}"),
                });
            }
        }
        triangles.push(Triangle {
            vertices,
            normal: [n[0], n[1], n[2]],
        });
    }
    if !closed {
        return Err(Error::Parse {
            line: 0,
            msg: "missing \"endsolid\"".to_string(),
        });
    }
    Ok(TriangleSoup { triangles })
}
