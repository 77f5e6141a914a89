//! MPS export and import.
//!
//! Fixed format uses the classic column layout and needs every name to fit
//! in 8 characters; free format separates fields by whitespace. Binaries are
//! written inside `MARKER INTORG`/`INTEND` blocks with `BV` bounds. Branching
//! priorities are not part of the format and are lost on import.

use std::fmt::Write as _;
use std::path::Path;

use crate::instance::{MilpInstance, Relation, VarKind};
use crate::MilpError;

const OBJ_ROW: &str = "obj";
const RHS_SET: &str = "RHS";
const BND_SET: &str = "BND";
const FIXED_NAME_LEN: usize = 8;
const FIXED_NUM_LEN: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MpsFormat {
    #[default]
    Fixed,
    Free,
}

/// Render `instance` as MPS text.
pub fn write_mps(instance: &MilpInstance, format: MpsFormat) -> Result<String, MilpError> {
    instance.validate()?;
    if format == MpsFormat::Fixed {
        let names = instance
            .variables
            .iter()
            .map(|v| &v.name)
            .chain(instance.constraints.iter().map(|c| &c.name));
        for name in names {
            if name.len() > FIXED_NAME_LEN || name.contains(char::is_whitespace) || name.is_empty() {
                return Err(MilpError::NameTooLong(name.clone()));
            }
        }
    } else {
        let names = instance
            .variables
            .iter()
            .map(|v| &v.name)
            .chain(instance.constraints.iter().map(|c| &c.name));
        for name in names {
            if name.is_empty() || name.contains(char::is_whitespace) {
                return Err(MilpError::InvalidInstance(format!(
                    "name {name:?} cannot be written to MPS"
                )));
            }
        }
    }
    let num = |v: f64| format_number(v, format);
    let mut out = String::new();
    let name = if instance.name.is_empty() {
        "model"
    } else {
        instance.name.as_str()
    };
    match format {
        MpsFormat::Fixed => writeln!(out, "NAME          {name}"),
        MpsFormat::Free => writeln!(out, "NAME {name}"),
    }
    .expect("write to string");

    out.push_str("ROWS\n");
    line(&mut out, format, &["N", OBJ_ROW]);
    for c in &instance.constraints {
        let kind = match c.relation {
            Relation::Le => "L",
            Relation::Eq => "E",
            Relation::Ge => "G",
        };
        line(&mut out, format, &[kind, &c.name]);
    }

    // Column-major view of the rows.
    let n = instance.variables.len();
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, c) in instance.constraints.iter().enumerate() {
        for &(j, a) in &c.coeffs {
            if a != 0.0 {
                cols[j].push((i, a));
            }
        }
    }
    let obj = instance.objective_dense();

    out.push_str("COLUMNS\n");
    let mut in_int = false;
    let mut markers = 0usize;
    for (j, v) in instance.variables.iter().enumerate() {
        let is_int = v.kind == VarKind::Binary;
        if is_int != in_int {
            let tag = format!("M{markers:07}");
            markers += 1;
            let kind = if is_int { "'INTORG'" } else { "'INTEND'" };
            line(&mut out, format, &["", &tag, "'MARKER'", "", kind]);
            in_int = is_int;
        }
        let mut wrote = false;
        if obj[j] != 0.0 {
            line(&mut out, format, &["", &v.name, OBJ_ROW, &num(obj[j])?]);
            wrote = true;
        }
        cols[j].sort_by_key(|&(i, _)| i);
        for &(i, a) in &cols[j] {
            line(&mut out, format, &["", &v.name, &instance.constraints[i].name, &num(a)?]);
            wrote = true;
        }
        if !wrote {
            line(&mut out, format, &["", &v.name, OBJ_ROW, &num(0.0)?]);
        }
    }
    if in_int {
        let tag = format!("M{markers:07}");
        line(&mut out, format, &["", &tag, "'MARKER'", "", "'INTEND'"]);
    }

    out.push_str("RHS\n");
    for c in &instance.constraints {
        if c.rhs != 0.0 {
            line(&mut out, format, &["", RHS_SET, &c.name, &num(c.rhs)?]);
        }
    }

    out.push_str("BOUNDS\n");
    for v in &instance.variables {
        let (lo, up) = (v.lower, v.upper);
        let name = v.name.as_str();
        if v.kind == VarKind::Binary && lo == 0.0 && up == 1.0 {
            line(&mut out, format, &[" BV", BND_SET, name]);
            continue;
        }
        if lo == up {
            line(&mut out, format, &[" FX", BND_SET, name, &num(lo)?]);
            continue;
        }
        match (lo.is_finite(), up.is_finite()) {
            (false, false) => line(&mut out, format, &[" FR", BND_SET, name]),
            (false, true) => {
                line(&mut out, format, &[" MI", BND_SET, name]);
                line(&mut out, format, &[" UP", BND_SET, name, &num(up)?]);
            }
            (true, up_finite) => {
                if lo != 0.0 || (up_finite && up < 0.0) {
                    line(&mut out, format, &[" LO", BND_SET, name, &num(lo)?]);
                }
                if up_finite {
                    line(&mut out, format, &[" UP", BND_SET, name, &num(up)?]);
                } else if v.kind == VarKind::Binary {
                    line(&mut out, format, &[" PL", BND_SET, name]);
                }
            }
        }
    }
    out.push_str("ENDATA\n");
    Ok(out)
}

pub fn export_mps(instance: &MilpInstance, path: &Path, format: MpsFormat) -> Result<(), MilpError> {
    let text = write_mps(instance, format)?;
    std::fs::write(path, text).map_err(|e| MilpError::io(path, e))
}

/// Append one record. Fixed format places fields at columns 2, 5, 15, 25,
/// 40 and 50; free format joins them with single spaces.
fn line(out: &mut String, format: MpsFormat, fields: &[&str]) {
    match format {
        MpsFormat::Free => {
            let parts: Vec<&str> = fields
                .iter()
                .map(|f| f.trim())
                .filter(|f| !f.is_empty())
                .collect();
            out.push(' ');
            out.push_str(&parts.join(" "));
        }
        MpsFormat::Fixed => {
            const STARTS: [usize; 6] = [1, 4, 14, 24, 39, 49];
            let mut buf = String::new();
            for (k, f) in fields.iter().enumerate() {
                let f = if k == 0 { f.trim() } else { *f };
                if f.is_empty() {
                    continue;
                }
                let start = if k == 0 { STARTS[0] } else { STARTS[k] };
                while buf.len() < start {
                    buf.push(' ');
                }
                buf.push_str(f);
            }
            out.push_str(buf.trim_end());
        }
    }
    out.push('\n');
}

/// Shortest text that reads back as `v`; in fixed format, significant
/// digits are dropped until it fits the 12-character field.
fn format_number(v: f64, format: MpsFormat) -> Result<String, MilpError> {
    if !v.is_finite() {
        return Err(MilpError::InvalidInstance(format!(
            "non-finite number {v} in MPS output"
        )));
    }
    let shortest = |v: f64| {
        let plain = format!("{v}");
        let sci = format!("{v:e}");
        if sci.len() < plain.len() {
            sci
        } else {
            plain
        }
    };
    let s = shortest(v);
    if format == MpsFormat::Free || s.len() <= FIXED_NUM_LEN {
        return Ok(s);
    }
    for digits in (1..17).rev() {
        let rounded: f64 = format!("{v:.digits$e}").parse().expect("formatted float");
        let s = shortest(rounded);
        if s.len() <= FIXED_NUM_LEN {
            return Ok(s);
        }
    }
    unreachable!("one significant digit always fits")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Rows,
    Columns,
    Rhs,
    Bounds,
    Done,
}

/// Parse MPS text (fixed or free; fields are split on whitespace, so names
/// must not contain spaces).
pub fn parse_mps(text: &str) -> Result<MilpInstance, MilpError> {
    let mut inst = MilpInstance::new("");
    let mut section = Section::None;
    let mut obj_row: Option<String> = None;
    let mut row_index = std::collections::HashMap::new();
    let mut col_index = std::collections::HashMap::new();
    let mut integer = Vec::<bool>::new();
    let mut bounded = Vec::<bool>::new();
    let mut in_int = false;
    let err = |line: usize, msg: String| MilpError::MpsParse { line, msg };

    for (ln, raw) in text.lines().enumerate() {
        let ln = ln + 1;
        if raw.starts_with('*') || raw.trim().is_empty() {
            continue;
        }
        let header = !raw.starts_with(' ') && !raw.starts_with('\t');
        let f: Vec<&str> = raw.split_whitespace().collect();
        if header {
            section = match f[0] {
                "NAME" => {
                    inst.name = f.get(1..).map(|r| r.join(" ")).unwrap_or_default();
                    Section::None
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => Section::Done,
                "RANGES" => return Err(err(ln, "RANGES section is not supported".into())),
                "OBJSENSE" | "OBJSENSE MAX" => {
                    return Err(err(ln, "OBJSENSE is not supported; minimization assumed".into()))
                }
                other => return Err(err(ln, format!("unknown section {other}"))),
            };
            continue;
        }
        let number = |s: &str| -> Result<f64, MilpError> {
            let v: f64 = s.parse().map_err(|_| err(ln, format!("bad number {s:?}")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(err(ln, format!("non-finite number {s:?}")))
            }
        };
        match section {
            Section::None | Section::Done => {
                return Err(err(ln, "data line outside a section".into()));
            }
            Section::Rows => {
                if f.len() != 2 {
                    return Err(err(ln, "ROWS entry needs a type and a name".into()));
                }
                let rel = match f[0] {
                    "N" => {
                        if obj_row.is_some() {
                            return Err(err(ln, "more than one objective row".into()));
                        }
                        obj_row = Some(f[1].to_string());
                        continue;
                    }
                    "L" => Relation::Le,
                    "E" => Relation::Eq,
                    "G" => Relation::Ge,
                    t => return Err(err(ln, format!("unknown row type {t}"))),
                };
                if row_index.insert(f[1].to_string(), inst.constraints.len()).is_some() {
                    return Err(err(ln, format!("duplicate row {}", f[1])));
                }
                inst.add_constraint(f[1], Vec::new(), rel, 0.0);
            }
            Section::Columns => {
                if f.len() >= 3 && f[1] == "'MARKER'" {
                    in_int = match f[f.len() - 1] {
                        "'INTORG'" => true,
                        "'INTEND'" => false,
                        m => return Err(err(ln, format!("unknown marker {m}"))),
                    };
                    continue;
                }
                if f.len() != 3 && f.len() != 5 {
                    return Err(err(ln, "COLUMNS entry needs 3 or 5 fields".into()));
                }
                let j = match col_index.get(f[0]) {
                    Some(&j) => j,
                    None => {
                        let j = inst.add_continuous(f[0], 0.0, f64::INFINITY);
                        col_index.insert(f[0].to_string(), j);
                        integer.push(in_int);
                        bounded.push(false);
                        j
                    }
                };
                for pair in f[1..].chunks(2) {
                    let v = number(pair[1])?;
                    if Some(pair[0]) == obj_row.as_deref() {
                        if v != 0.0 {
                            inst.set_objective(j, v);
                        }
                    } else {
                        let &i = row_index
                            .get(pair[0])
                            .ok_or_else(|| err(ln, format!("unknown row {}", pair[0])))?;
                        inst.constraints[i].coeffs.push((j, v));
                    }
                }
            }
            Section::Rhs => {
                if f.len() != 3 && f.len() != 5 && f.len() != 2 && f.len() != 4 {
                    return Err(err(ln, "RHS entry has the wrong number of fields".into()));
                }
                // The set name is optional in free format.
                let pairs = if f.len() % 2 == 1 { &f[1..] } else { &f[..] };
                for pair in pairs.chunks(2) {
                    let v = number(pair[1])?;
                    if Some(pair[0]) == obj_row.as_deref() {
                        return Err(err(ln, "objective constants are not supported".into()));
                    }
                    let &i = row_index
                        .get(pair[0])
                        .ok_or_else(|| err(ln, format!("unknown row {}", pair[0])))?;
                    inst.constraints[i].rhs = v;
                }
            }
            Section::Bounds => {
                if f.len() < 3 {
                    return Err(err(ln, "BOUNDS entry needs a type, set and column".into()));
                }
                let &j = col_index
                    .get(f[2])
                    .ok_or_else(|| err(ln, format!("unknown column {}", f[2])))?;
                let value = || -> Result<f64, MilpError> {
                    f.get(3)
                        .ok_or_else(|| err(ln, format!("{} bound needs a value", f[0])))
                        .and_then(|s| number(s))
                };
                let v = &mut inst.variables[j];
                bounded[j] = true;
                match f[0] {
                    "UP" | "UI" => v.upper = value()?,
                    "LO" | "LI" => v.lower = value()?,
                    "FX" => {
                        let x = value()?;
                        v.lower = x;
                        v.upper = x;
                    }
                    "FR" => {
                        v.lower = f64::NEG_INFINITY;
                        v.upper = f64::INFINITY;
                    }
                    "MI" => v.lower = f64::NEG_INFINITY,
                    "PL" => v.upper = f64::INFINITY,
                    "BV" => {
                        v.lower = 0.0;
                        v.upper = 1.0;
                        integer[j] = true;
                    }
                    t => return Err(err(ln, format!("unknown bound type {t}"))),
                }
                if matches!(f[0], "UI" | "LI") {
                    integer[j] = true;
                }
            }
        }
    }
    if section != Section::Done {
        return Err(MilpError::MpsParse {
            line: text.lines().count(),
            msg: "missing ENDATA".into(),
        });
    }
    for (j, v) in inst.variables.iter_mut().enumerate() {
        if integer[j] {
            if !bounded[j] && v.upper == f64::INFINITY {
                // Integer columns without bounds default to binary.
                v.upper = 1.0;
            }
            if v.lower < 0.0 || v.upper > 1.0 {
                return Err(MilpError::MpsParse {
                    line: 0,
                    msg: format!("integer column {} is not binary", v.name),
                });
            }
            v.kind = VarKind::Binary;
        }
    }
    inst.validate()?;
    Ok(inst)
}

pub fn import_mps(path: &Path) -> Result<MilpInstance, MilpError> {
    let text = std::fs::read_to_string(path).map_err(|e| MilpError::io(path, e))?;
    parse_mps(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> MilpInstance {
        let mut inst = MilpInstance::new("small");
        let x = inst.add_continuous("x", 0.0, 4.0);
        let y = inst.add_continuous("y", f64::NEG_INFINITY, f64::INFINITY);
        let b = inst.add_binary("b", 0);
        inst.add_constraint("c1", vec![(x, 1.0), (y, -2.5)], Relation::Le, 3.0);
        inst.add_constraint("c2", vec![(y, 1.0), (b, 1e6)], Relation::Ge, -1.0);
        inst.add_constraint("c3", vec![(x, 1.0), (b, 1.0)], Relation::Eq, 1.0);
        inst.set_objective(x, 1.0);
        inst.set_objective(b, -0.1234567890123456);
        inst
    }

    #[test]
    fn fixed_round_trip_is_idempotent() {
        let text = write_mps(&small(), MpsFormat::Fixed).unwrap();
        let back = parse_mps(&text).unwrap();
        assert_eq!(write_mps(&back, MpsFormat::Fixed).unwrap(), text);
        assert_eq!(back.variables[2].kind, VarKind::Binary);
        assert_eq!(back.variables[1].lower, f64::NEG_INFINITY);
        assert_eq!(back.constraints[1].rhs, -1.0);
    }

    #[test]
    fn free_round_trip_is_lossless() {
        let inst = small();
        let text = write_mps(&inst, MpsFormat::Free).unwrap();
        let back = parse_mps(&text).unwrap();
        assert_eq!(back.objective_dense(), inst.objective_dense());
        assert_eq!(back.constraints, inst.constraints);
        assert_eq!(write_mps(&back, MpsFormat::Free).unwrap(), text);
    }

    #[test]
    fn fixed_rounds_long_numbers() {
        assert_eq!(format_number(-0.1234567890123456, MpsFormat::Fixed).unwrap(), "-0.123456789");
        assert_eq!(format_number(1e6, MpsFormat::Fixed).unwrap(), "1e6");
        assert_eq!(format_number(0.5, MpsFormat::Fixed).unwrap(), "0.5");
        assert_eq!(format_number(-1.5e-7, MpsFormat::Fixed).unwrap(), "-1.5e-7");
        assert!(format_number(-0.1234567890123456, MpsFormat::Free).unwrap().len() > 12);
    }

    #[test]
    fn long_names_need_free_format() {
        let mut inst = MilpInstance::new("t");
        inst.add_continuous("a_very_long_name", 0.0, 1.0);
        assert!(matches!(
            write_mps(&inst, MpsFormat::Fixed),
            Err(MilpError::NameTooLong(_))
        ));
        assert!(write_mps(&inst, MpsFormat::Free).is_ok());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "NAME t\nROWS\n N obj\n L c1\nCOLUMNS\n x c9 1\nRHS\nBOUNDS\nENDATA\n";
        match parse_mps(text) {
            Err(MilpError::MpsParse { line, msg }) => {
                assert_eq!(line, 6);
                assert!(msg.contains("c9"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_mps("NAME t\nROWS\n N obj\n").is_err());
    }

    #[test]
    fn empty_column_survives() {
        let mut inst = MilpInstance::new("t");
        inst.add_continuous("lonely", 0.0, 2.0);
        let back = parse_mps(&write_mps(&inst, MpsFormat::Fixed).unwrap()).unwrap();
        assert_eq!(back.variables.len(), 1);
        assert_eq!(back.variables[0].upper, 2.0);
    }
}
