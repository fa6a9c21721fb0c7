//! Plain-text file formats.
//!
//! Floats are written with 17 significant digits so every value round-trips.
//! Electrode and pattern numbers in CSV files are 1-based.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::contact::{pl_offsets, ContactParams, Variant};
use crate::error::{Error, Result};
use crate::fem::DomainConductivity;
use crate::mesh::{build_boundary, ExtendedElectrode, TriMesh};

/// Round-trip formatting of a float.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.trim().parse().map_err(|_| parse_err(line, format!("bad {what} {tok:?}")))
}

/// Non-empty, non-comment lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
}

pub fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// `nodes N triangles T`, then `N` lines `x y`, then `T` lines `i j k` (0-based).
pub fn parse_mesh(text: &str) -> Result<TriMesh> {
    let mut lines = content_lines(text);
    let (ln, header) = lines.next().ok_or_else(|| parse_err(1, "empty mesh file"))?;
    let tok: Vec<&str> = header.split_whitespace().collect();
    if tok.len() != 4 || tok[0] != "nodes" || tok[2] != "triangles" {
        return Err(parse_err(ln, "expected `nodes <N> triangles <T>`"));
    }
    let n: usize = num(Some(tok[1]), ln, "node count")?;
    let t: usize = num(Some(tok[3]), ln, "triangle count")?;
    let mut nodes = Vec::with_capacity(n);
    let mut tris = Vec::with_capacity(t);
    for _ in 0..n {
        let (ln, l) = lines.next().ok_or_else(|| parse_err(0, format!("expected {n} nodes")))?;
        let mut it = l.split_whitespace();
        let x: f64 = num(it.next(), ln, "x")?;
        let y: f64 = num(it.next(), ln, "y")?;
        if it.next().is_some() || !x.is_finite() || !y.is_finite() {
            return Err(parse_err(ln, "expected `x y`"));
        }
        nodes.push([x, y]);
    }
    for _ in 0..t {
        let (ln, l) = lines.next().ok_or_else(|| parse_err(0, format!("expected {t} triangles")))?;
        let mut it = l.split_whitespace();
        let tri = [num(it.next(), ln, "index")?, num(it.next(), ln, "index")?, num(it.next(), ln, "index")?];
        if it.next().is_some() {
            return Err(parse_err(ln, "expected `i j k`"));
        }
        tris.push(tri);
    }
    if let Some((ln, _)) = lines.next() {
        return Err(parse_err(ln, "trailing content"));
    }
    build_boundary(nodes, tris)
}

pub fn format_mesh(mesh: &TriMesh) -> String {
    let mut s = format!("nodes {} triangles {}\n", mesh.node_count(), mesh.triangles().len());
    for p in mesh.nodes() {
        let _ = writeln!(s, "{} {}", fmt_f64(p[0]), fmt_f64(p[1]));
    }
    for t in mesh.triangles() {
        let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
    }
    s
}

/// One `a b` arclength interval per line.
pub fn parse_intervals(text: &str) -> Result<Vec<(f64, f64)>> {
    content_lines(text)
        .map(|(ln, l)| {
            let mut it = l.split_whitespace();
            let a: f64 = num(it.next(), ln, "start")?;
            let b: f64 = num(it.next(), ln, "end")?;
            if it.next().is_some() {
                return Err(parse_err(ln, "expected `a b`"));
            }
            Ok((a, b))
        })
        .collect()
}

pub fn format_intervals(intervals: &[(f64, f64)]) -> String {
    intervals.iter().map(|&(a, b)| format!("{} {}\n", fmt_f64(a), fmt_f64(b))).collect()
}

/// `pattern,electrode,voltage` rows, pattern-major.
pub fn format_measurements(values: &[f64], electrodes: usize) -> String {
    let mut s = String::from("pattern,electrode,voltage\n");
    for (k, v) in values.iter().enumerate() {
        let _ = writeln!(s, "{},{},{}", k / electrodes + 1, k % electrodes + 1, fmt_f64(*v));
    }
    s
}

/// Reads a measurement CSV for `electrodes` electrodes. Rows may come in any
/// order but every (pattern, electrode) pair must appear exactly once.
pub fn parse_measurements(text: &str, electrodes: usize) -> Result<Vec<f64>> {
    let expected = electrodes * electrodes.saturating_sub(1);
    let mut lines = content_lines(text);
    match lines.next() {
        Some((_, h)) if h.replace(' ', "") == "pattern,electrode,voltage" => {}
        Some((ln, _)) => return Err(parse_err(ln, "expected header `pattern,electrode,voltage`")),
        None => return Err(Error::dims("measurement rows", expected, 0)),
    }
    let rows: Vec<(usize, &str)> = lines.collect();
    if rows.len() != expected {
        return Err(Error::dims("measurement rows", expected, rows.len()));
    }
    let mut out = vec![f64::NAN; expected];
    for (ln, l) in rows {
        let mut it = l.split(',');
        let p: usize = num(it.next(), ln, "pattern")?;
        let e: usize = num(it.next(), ln, "electrode")?;
        let v: f64 = num(it.next(), ln, "voltage")?;
        if p == 0 || p >= electrodes || e == 0 || e > electrodes {
            return Err(parse_err(ln, format!("pattern {p} / electrode {e} out of range")));
        }
        let k = (p - 1) * electrodes + (e - 1);
        if !out[k].is_nan() {
            return Err(parse_err(ln, format!("duplicate row for pattern {p}, electrode {e}")));
        }
        if !v.is_finite() {
            return Err(parse_err(ln, "non-finite voltage"));
        }
        out[k] = v;
    }
    Ok(out)
}

/// `node,kappa` rows; a scalar is written as the single row `all,<value>`.
pub fn format_kappa(kappa: &DomainConductivity) -> String {
    let mut s = String::from("node,kappa\n");
    match kappa {
        DomainConductivity::Scalar(k) => {
            let _ = writeln!(s, "all,{}", fmt_f64(*k));
        }
        DomainConductivity::Nodal(v) => {
            for (i, k) in v.iter().enumerate() {
                let _ = writeln!(s, "{i},{}", fmt_f64(*k));
            }
        }
    }
    s
}

pub fn parse_kappa(text: &str) -> Result<DomainConductivity> {
    let mut lines = content_lines(text);
    match lines.next() {
        Some((_, h)) if h.replace(' ', "") == "node,kappa" => {}
        Some((ln, _)) => return Err(parse_err(ln, "expected header `node,kappa`")),
        None => return Err(parse_err(1, "empty kappa file")),
    }
    let rows: Vec<(usize, &str)> = lines.collect();
    if let [(ln, l)] = rows.as_slice() {
        if let Some(v) = l.strip_prefix("all,") {
            return Ok(DomainConductivity::Scalar(num(Some(v), *ln, "kappa")?));
        }
    }
    let mut out = Vec::with_capacity(rows.len());
    for (ln, l) in rows {
        let mut it = l.split(',');
        let i: usize = num(it.next(), ln, "node")?;
        if i != out.len() {
            return Err(parse_err(ln, format!("expected node {}, got {i}", out.len())));
        }
        out.push(num(it.next(), ln, "kappa")?);
    }
    Ok(DomainConductivity::Nodal(out))
}

/// `variant,<name>` followed by `electrode,param,value` rows. CEM rows use
/// `theta`, PH rows `h`, `l`, `w`, and PL rows `node<id>` with the mesh node
/// id of each interior electrode node.
pub fn format_contact(contact: &ContactParams, electrodes: &[ExtendedElectrode]) -> Result<String> {
    contact.check(electrodes)?;
    let mut s = format!("variant,{}\nelectrode,param,value\n", contact.variant);
    let th = &contact.theta;
    let m = electrodes.len();
    match contact.variant {
        Variant::Cem => {
            for (k, v) in th.iter().enumerate() {
                let _ = writeln!(s, "{},theta,{}", k + 1, fmt_f64(*v));
            }
        }
        Variant::Pl => {
            let off = pl_offsets(electrodes);
            for (k, e) in electrodes.iter().enumerate() {
                for (j, id) in e.interior_nodes().iter().enumerate() {
                    let _ = writeln!(s, "{},node{id},{}", k + 1, fmt_f64(th[off[k] + j]));
                }
            }
        }
        Variant::Ph => {
            for k in 0..m {
                for (name, b) in [("h", 0), ("l", 1), ("w", 2)] {
                    let _ = writeln!(s, "{},{name},{}", k + 1, fmt_f64(th[b * m + k]));
                }
            }
        }
    }
    Ok(s)
}

pub fn parse_contact(text: &str, electrodes: &[ExtendedElectrode]) -> Result<ContactParams> {
    let mut lines = content_lines(text);
    let (ln, first) = lines.next().ok_or_else(|| parse_err(1, "empty contact file"))?;
    let variant: Variant = first
        .strip_prefix("variant,")
        .ok_or_else(|| parse_err(ln, "expected `variant,<name>`"))?
        .parse()?;
    match lines.next() {
        Some((_, h)) if h.replace(' ', "") == "electrode,param,value" => {}
        Some((ln, _)) => return Err(parse_err(ln, "expected header `electrode,param,value`")),
        None => return Err(parse_err(ln + 1, "missing header")),
    }
    let m = electrodes.len();
    let n = crate::contact::param_count(variant, electrodes);
    let off = pl_offsets(electrodes);
    let mut theta = vec![f64::NAN; n];
    let mut rows = 0;
    for (ln, l) in lines {
        rows += 1;
        let mut it = l.split(',');
        let e: usize = num(it.next(), ln, "electrode")?;
        let name = it.next().ok_or_else(|| parse_err(ln, "missing param"))?.trim();
        let v: f64 = num(it.next(), ln, "value")?;
        if e == 0 || e > m {
            return Err(parse_err(ln, format!("electrode {e} out of range")));
        }
        let k = e - 1;
        let idx = match (variant, name) {
            (Variant::Cem, "theta") => Some(k),
            (Variant::Ph, "h") => Some(k),
            (Variant::Ph, "l") => Some(m + k),
            (Variant::Ph, "w") => Some(2 * m + k),
            (Variant::Pl, p) => p
                .strip_prefix("node")
                .and_then(|id| id.parse::<usize>().ok())
                .and_then(|id| electrodes[k].interior_nodes().iter().position(|&x| x == id))
                .map(|j| off[k] + j),
            _ => None,
        };
        let idx = idx.ok_or_else(|| parse_err(ln, format!("unknown parameter {name:?} for electrode {e}")))?;
        if !theta[idx].is_nan() {
            return Err(parse_err(ln, format!("duplicate parameter {name:?} for electrode {e}")));
        }
        theta[idx] = v;
    }
    if rows != n || theta.iter().any(|v| v.is_nan()) {
        return Err(Error::dims("contact parameter rows", n, rows));
    }
    ContactParams::new(variant, theta, electrodes)
}

/// Flat `key = value` text with `[section]` headers. Keys inside a section
/// are stored as `section.key`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, (usize, String)>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (ln, l) in content_lines(text) {
            if let Some(rest) = l.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| parse_err(ln, "unterminated section header"))?;
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = l.split_once('=').ok_or_else(|| parse_err(ln, "expected `key = value`"))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(parse_err(ln, "empty key"));
            }
            let key = if section.is_empty() { k.to_string() } else { format!("{section}.{k}") };
            if entries.insert(key.clone(), (ln, v.trim().to_string())).is_some() {
                return Err(parse_err(ln, format!("duplicate key {key:?}")));
            }
        }
        Ok(KeyValues { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    /// Parsed value of `key`, or `None` if absent.
    pub fn parse_key<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((ln, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| parse_err(*ln, format!("bad value {v:?} for {key}"))),
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn insert(&mut self, key: &str, value: &str) {
        self.entries.insert(key.to_string(), (0, value.to_string()));
    }
}
