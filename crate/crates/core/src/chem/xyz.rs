//! Extended XYZ reading and writing.
//!
//! Line 1 holds the atom count, line 2 a comment that may carry `key=value`
//! metadata, then one `symbol x y z` line per atom. Recognised keys:
//! `tag=<name>` and `bonds="i-j,k-l,..."` (zero-based atom indices). Other keys,
//! such as `Properties=...`, are accepted and ignored. Values containing
//! whitespace must be double-quoted.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{elements, Bond, ChemError, Structure};

fn parse_err(line: usize, msg: impl Into<String>) -> ChemError {
    ChemError::Parse { line, msg: msg.into() }
}

/// Splits a comment line into `key=value` pairs, honouring double quotes.
fn metadata(comment: &str) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut chars = comment.chars().peekable();
    loop {
        while chars.peek().is_some_and(|c| c.is_whitespace()) {
            chars.next();
        }
        if chars.peek().is_none() {
            break;
        }
        let mut key = String::new();
        while let Some(&c) = chars.peek() {
            if c == '=' || c.is_whitespace() {
                break;
            }
            key.push(c);
            chars.next();
        }
        if chars.peek() != Some(&'=') {
            // bare word, not metadata
            continue;
        }
        chars.next();
        let mut value = String::new();
        if chars.peek() == Some(&'"') {
            chars.next();
            for c in chars.by_ref() {
                if c == '"' {
                    break;
                }
                value.push(c);
            }
        } else {
            while let Some(&c) = chars.peek() {
                if c.is_whitespace() {
                    break;
                }
                value.push(c);
                chars.next();
            }
        }
        out.push((key, value));
    }
    out
}

fn parse_bonds(value: &str, line: usize) -> Result<Vec<Bond>, ChemError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|pair| {
            let (a, b) = pair
                .split_once('-')
                .ok_or_else(|| parse_err(line, format!("malformed bond '{pair}'")))?;
            let a = a.trim().parse().map_err(|_| parse_err(line, format!("malformed bond '{pair}'")))?;
            let b = b.trim().parse().map_err(|_| parse_err(line, format!("malformed bond '{pair}'")))?;
            Ok((a, b))
        })
        .collect()
}

/// Parses one frame starting at `lines[start]`; returns the structure and the
/// index of the first line after it. Line numbers in errors are 1-based.
fn parse_frame(lines: &[&str], start: usize, default_tag: &str) -> Result<(Structure, usize), ChemError> {
    let count_line = start + 1;
    let n: usize = lines[start]
        .trim()
        .parse()
        .map_err(|_| parse_err(count_line, format!("expected atom count, found '{}'", lines[start].trim())))?;
    let comment = lines.get(start + 1).copied().unwrap_or("");
    let mut tag = default_tag.to_string();
    let mut bonds = None;
    for (k, v) in metadata(comment) {
        match k.to_ascii_lowercase().as_str() {
            "tag" => tag = v,
            "bonds" => bonds = Some(parse_bonds(&v, start + 2)?),
            _ => {}
        }
    }
    let mut species = Vec::with_capacity(n);
    let mut positions = Vec::with_capacity(n);
    for a in 0..n {
        let idx = start + 2 + a;
        let Some(line) = lines.get(idx) else {
            return Err(parse_err(
                lines.len(),
                format!("header declares {n} atoms but input ends after {a}"),
            ));
        };
        let mut fields = line.split_whitespace();
        let sym = fields.next().ok_or_else(|| parse_err(idx + 1, "empty atom line"))?;
        let z = match elements::from_symbol(sym) {
            Some(e) => e.atomic_number,
            None => sym
                .parse::<u8>()
                .ok()
                .filter(|&z| elements::element(z).is_ok())
                .ok_or_else(|| parse_err(idx + 1, format!("unknown element symbol '{sym}'")))?,
        };
        let mut xyz = [0.0f64; 3];
        for (d, slot) in xyz.iter_mut().enumerate() {
            let tok = fields
                .next()
                .ok_or_else(|| parse_err(idx + 1, format!("missing coordinate {d}")))?;
            *slot = tok
                .parse()
                .map_err(|_| parse_err(idx + 1, format!("unparseable coordinate '{tok}'")))?;
            if !slot.is_finite() {
                return Err(parse_err(idx + 1, format!("non-finite coordinate '{tok}'")));
            }
        }
        species.push(z);
        positions.push(xyz);
    }
    let s = Structure::new(species, positions, bonds, tag)
        .map_err(|e| parse_err(start + 2, e.to_string()))?;
    Ok((s, start + 2 + n))
}

pub fn parse_xyz(text: &str) -> Result<Structure, ChemError> {
    let lines: Vec<&str> = text.lines().collect();
    if lines.is_empty() {
        return Err(parse_err(1, "empty input"));
    }
    let (s, next) = parse_frame(&lines, 0, "")?;
    if let Some(extra) = lines[next..].iter().position(|l| !l.trim().is_empty()) {
        return Err(parse_err(next + extra + 1, "unexpected content after the declared atoms"));
    }
    Ok(s)
}

/// Parses concatenated frames (a trajectory or scan file).
pub fn parse_xyz_frames(text: &str) -> Result<Vec<Structure>, ChemError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut frames = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        if lines[i].trim().is_empty() {
            i += 1;
            continue;
        }
        let (s, next) = parse_frame(&lines, i, "")?;
        frames.push(s);
        i = next;
    }
    Ok(frames)
}

/// Formats with 12 significant digits, then prints the shortest decimal that
/// round-trips that rounded value.
pub fn fmt12(x: f64) -> String {
    if x == 0.0 {
        return "0.0".into();
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float");
    format!("{rounded:?}")
}

fn quote(v: &str) -> String {
    if v.is_empty() || v.contains(char::is_whitespace) {
        format!("\"{v}\"")
    } else {
        v.to_string()
    }
}

pub fn write_xyz(s: &Structure) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", s.len());
    let mut comment = String::from("Properties=species:S:1:pos:R:3");
    if !s.tag.is_empty() {
        let _ = write!(comment, " tag={}", quote(&s.tag));
    }
    if let Some(b) = s.explicit_bonds() {
        let list: Vec<String> = b.iter().map(|(i, j)| format!("{i}-{j}")).collect();
        let _ = write!(comment, " bonds=\"{}\"", list.join(","));
    }
    let _ = writeln!(out, "{comment}");
    for (z, p) in s.species().iter().zip(s.positions()) {
        let sym = elements::symbol(*z).expect("validated species");
        let _ = writeln!(out, "{sym} {} {} {}", fmt12(p[0]), fmt12(p[1]), fmt12(p[2]));
    }
    out
}

pub fn read_xyz_file(path: &Path) -> Result<Structure, ChemError> {
    let text = fs::read_to_string(path).map_err(|source| ChemError::Io { path: path.into(), source })?;
    let mut s = parse_xyz(&text)?;
    if s.tag.is_empty() {
        s.tag = path.file_stem().map(|t| t.to_string_lossy().into_owned()).unwrap_or_default();
    }
    Ok(s)
}

/// Loads every `.xyz` file in `dir` (sorted by file name); tags default to the file stem.
pub fn load_dir(dir: &Path) -> Result<Vec<Structure>, ChemError> {
    let rd = fs::read_dir(dir).map_err(|source| ChemError::Io { path: dir.into(), source })?;
    let mut paths: Vec<_> = rd
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("xyz")))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let mut s = read_xyz_file(p)?;
            s.tag = p.file_stem().map(|t| t.to_string_lossy().into_owned()).unwrap_or_default();
            Ok(s)
        })
        .collect()
}
