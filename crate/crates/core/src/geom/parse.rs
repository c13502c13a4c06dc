use std::fmt::Write as _;
use std::path::Path;

use super::{atomic_number, element_symbol, Atom, Structure};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Pdb,
    Xyz,
}

impl Format {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref()
        {
            Some("pdb") | Some("ent") => Ok(Format::Pdb),
            Some("xyz") => Ok(Format::Xyz),
            _ => Err(Error::UnknownFormat(path.to_path_buf())),
        }
    }
}

/// Reads a structure file, choosing the format from the extension. The id is
/// the path as given.
pub fn read_structure(path: &Path) -> Result<Structure> {
    let format = Format::from_path(path)?;
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_structure(&bytes, format, path.display().to_string())
}

/// Parses raw text in the given format. All atoms are kept in file order;
/// element filtering happens in [`super::filter_heavy_cno`].
pub fn parse_structure(bytes: &[u8], format: Format, id: impl Into<String>) -> Result<Structure> {
    let atoms = match format {
        Format::Pdb => parse_pdb(bytes)?,
        Format::Xyz => parse_xyz(bytes)?,
    };
    Structure::new(id, atoms)
}

fn lines(bytes: &[u8]) -> impl Iterator<Item = (usize, Result<&str>)> {
    bytes.split(|b| *b == b'\n').enumerate().map(|(i, raw)| {
        let line = i + 1;
        let text = std::str::from_utf8(raw)
            .map(|s| s.trim_end_matches('\r'))
            .map_err(|_| Error::Parse {
                line,
                msg: "invalid UTF-8".into(),
            });
        (line, text)
    })
}

fn parse_coord(field: Option<&str>, line: usize, axis: &str) -> Result<f64> {
    let raw = field.ok_or_else(|| Error::Parse {
        line,
        msg: format!("record too short for {axis} coordinate"),
    })?;
    let v: f64 = raw.trim().parse().map_err(|_| Error::Parse {
        line,
        msg: format!("bad {axis} coordinate {raw:?}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            msg: format!("non-finite {axis} coordinate"),
        });
    }
    Ok(v)
}

// Columns 77-78 when present; otherwise the atom name (columns 13-16) is
// used. A name starting with a blank or digit carries a one-letter element in
// its second column. A name starting at column 13 is a two-letter element
// when that symbol exists, except four-character hydrogen names (HO5' etc.).
fn pdb_element(line: &str, line_no: usize) -> Result<u8> {
    if let Some(sym) = line.get(76..78.min(line.len())) {
        let sym = sym.trim();
        if !sym.is_empty() {
            return atomic_number(sym).ok_or_else(|| Error::Parse {
                line: line_no,
                msg: format!("unknown element {sym:?}"),
            });
        }
    }
    let name = line.get(12..16).unwrap_or("");
    let chars: Vec<char> = name.chars().collect();
    let fail = || Error::Parse {
        line: line_no,
        msg: format!("cannot infer element from atom name {name:?}"),
    };
    let first = *chars.first().ok_or_else(fail)?;
    if first == ' ' || first.is_ascii_digit() {
        let second = chars.get(1).ok_or_else(fail)?;
        return atomic_number(&second.to_string()).ok_or_else(fail);
    }
    let full_width = chars.len() == 4 && chars[3] != ' ';
    if first.eq_ignore_ascii_case(&'H') && full_width {
        return Ok(1);
    }
    if let Some(second) = chars.get(1).filter(|c| c.is_ascii_alphabetic()) {
        let two: String = [first, *second].iter().collect();
        if let Some(z) = atomic_number(&two) {
            return Ok(z);
        }
    }
    atomic_number(&first.to_string()).ok_or_else(fail)
}

fn parse_pdb(bytes: &[u8]) -> Result<Vec<Atom>> {
    let mut atoms = Vec::new();
    let mut first_model_done = false;
    for (line_no, text) in lines(bytes) {
        let line = text?;
        let record = line.get(0..6.min(line.len())).unwrap_or("").trim_end();
        match record {
            "ENDMDL" => first_model_done = true,
            "MODEL" if first_model_done => {
                log::warn!("multiple MODEL records; using the first model only");
                break;
            }
            "ATOM" | "HETATM" => {
                if first_model_done {
                    log::warn!("atoms after ENDMDL ignored; using the first model only");
                    break;
                }
                let alt = line.get(16..17).unwrap_or(" ");
                if alt != " " && alt != "A" {
                    continue;
                }
                let x = parse_coord(line.get(30..38), line_no, "x")?;
                let y = parse_coord(line.get(38..46), line_no, "y")?;
                let z = parse_coord(line.get(46..54), line_no, "z")?;
                let element = pdb_element(line, line_no)?;
                atoms.push(Atom {
                    element,
                    position: [x, y, z],
                });
            }
            _ => {}
        }
    }
    if atoms.is_empty() {
        return Err(Error::EmptyStructure);
    }
    Ok(atoms)
}

fn parse_xyz_atom(line: &str, line_no: usize) -> Result<Atom> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 4 {
        return Err(Error::Parse {
            line: line_no,
            msg: format!("expected `SYMBOL x y z`, found {} field(s)", fields.len()),
        });
    }
    let element = atomic_number(fields[0]).ok_or_else(|| Error::Parse {
        line: line_no,
        msg: format!("unknown element {:?}", fields[0]),
    })?;
    let mut position = [0.0; 3];
    for (axis, (slot, raw)) in position.iter_mut().zip(&fields[1..]).enumerate() {
        *slot = parse_coord(Some(raw), line_no, ["x", "y", "z"][axis])?;
    }
    Ok(Atom { element, position })
}

// Line 1 is the atom count. Line 2 is either the first atom or, when it does
// not start with an element symbol followed by three fields, a comment.
fn parse_xyz(bytes: &[u8]) -> Result<Vec<Atom>> {
    let mut it = lines(bytes).filter(|(_, l)| !matches!(l, Ok(s) if s.trim().is_empty()));
    let (count_line, count_text) = it.next().ok_or(Error::EmptyStructure)?;
    let count: usize = count_text?.trim().parse().map_err(|_| Error::Parse {
        line: count_line,
        msg: "first line must be the atom count".into(),
    })?;
    if count == 0 {
        return Err(Error::EmptyStructure);
    }
    let mut atoms = Vec::with_capacity(count);
    for (idx, (line_no, text)) in it.enumerate() {
        let line = text?;
        if idx == 0 && line_no == 2 {
            let fields: Vec<&str> = line.split_whitespace().collect();
            let looks_like_atom = fields.len() == 4 && atomic_number(fields[0]).is_some();
            if !looks_like_atom {
                continue;
            }
        }
        if atoms.len() == count {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("more atom lines than the declared count {count}"),
            });
        }
        atoms.push(parse_xyz_atom(line, line_no)?);
    }
    if atoms.len() != count {
        return Err(Error::Parse {
            line: count_line,
            msg: format!("declared {count} atoms, found {}", atoms.len()),
        });
    }
    Ok(atoms)
}

/// Serialises to the xyz text format with shortest round-trip float formatting.
pub fn write_xyz(s: &Structure) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", s.atoms.len());
    let _ = writeln!(out, "{}", s.id);
    for a in &s.atoms {
        let sym = element_symbol(a.element).unwrap_or("X");
        let [x, y, z] = a.position;
        let _ = writeln!(out, "{sym} {x} {y} {z}");
    }
    out
}
