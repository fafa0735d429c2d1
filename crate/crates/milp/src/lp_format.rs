//! CPLEX LP file dialect: writer and a reader for the subset it emits
//! (plus the common aliases other tools produce).

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::model::{Comparator, MilpModel, ModelBuilder, Sense, VarId, VarKind};
use crate::MilpError;

const LINE_WIDTH: usize = 240;

/// Maps model variable names onto identifiers legal in LP files.
///
/// Characters outside `[A-Za-z0-9_.]` become `_`; names starting with a digit,
/// a period or `e`/`E` get an `x_` prefix. Collisions get a numeric suffix.
pub fn lp_names(model: &MilpModel) -> Vec<String> {
    let mut seen: HashMap<String, usize> = HashMap::new();
    model
        .variables()
        .iter()
        .map(|v| {
            let mut s: String = v
                .name
                .chars()
                .map(|c| {
                    if c.is_ascii_alphanumeric() || c == '_' || c == '.' {
                        c
                    } else {
                        '_'
                    }
                })
                .collect();
            let first = s.chars().next();
            if matches!(first, None | Some('0'..='9' | '.' | 'e' | 'E')) {
                s.insert_str(0, "x_");
            }
            let n = seen.entry(s.clone()).or_insert(0);
            *n += 1;
            if *n > 1 {
                s = format!("{s}__{}", *n - 1);
            }
            s
        })
        .collect()
}

fn fmt_num(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x:e}")
    }
}

fn write_expr(out: &mut String, terms: &[(VarId, f64)], names: &[String]) {
    if terms.is_empty() {
        out.push_str(" 0");
        return;
    }
    let mut line_len = 0;
    for (i, &(v, c)) in terms.iter().enumerate() {
        let sign = if c < 0.0 { '-' } else { '+' };
        let mag = c.abs();
        let piece = if mag == 1.0 {
            format!(" {sign} {}", names[v.0])
        } else {
            format!(" {sign} {} {}", fmt_num(mag), names[v.0])
        };
        let piece = if i == 0 && sign == '+' {
            piece[2..].to_string()
        } else {
            piece
        };
        if line_len + piece.len() > LINE_WIDTH {
            out.push_str("\n   ");
            line_len = 0;
        }
        line_len += piece.len();
        out.push_str(&piece);
    }
}

/// Writes `model` in LP format.
pub fn export_lp(model: &MilpModel) -> String {
    let names = lp_names(model);
    let mut out = String::new();
    out.push_str(match model.sense() {
        Sense::Maximize => "Maximize\n",
        Sense::Minimize => "Minimize\n",
    });
    out.push_str(" obj:");
    if !model.objective().is_empty() {
        out.push(' ');
    }
    write_expr(&mut out, model.objective(), &names);
    out.push_str("\nSubject To\n");
    for (i, c) in model.constraints().iter().enumerate() {
        let _ = write!(out, " r{i}: ");
        write_expr(&mut out, &c.terms, &names);
        let _ = writeln!(out, " {} {}", c.cmp.symbol(), fmt_num(c.rhs));
    }
    out.push_str("Bounds\n");
    for (v, name) in model.variables().iter().zip(&names) {
        if v.kind == VarKind::Binary {
            continue;
        }
        match (v.lower.is_finite(), v.upper.is_finite()) {
            (false, false) => {
                let _ = writeln!(out, " {name} free");
            }
            (true, true) if v.lower == v.upper => {
                let _ = writeln!(out, " {name} = {}", fmt_num(v.lower));
            }
            (true, true) => {
                let _ = writeln!(out, " {} <= {name} <= {}", fmt_num(v.lower), fmt_num(v.upper));
            }
            (true, false) => {
                if v.lower != 0.0 {
                    let _ = writeln!(out, " {name} >= {}", fmt_num(v.lower));
                }
            }
            (false, true) => {
                let _ = writeln!(out, " -inf <= {name} <= {}", fmt_num(v.upper));
            }
        }
    }
    let bins: Vec<&str> = model
        .variables()
        .iter()
        .zip(&names)
        .filter(|(v, _)| v.kind == VarKind::Binary)
        .map(|(_, n)| n.as_str())
        .collect();
    if !bins.is_empty() {
        out.push_str("Binaries\n");
        for chunk in bins.chunks(16) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
    }
    out.push_str("End\n");
    out
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Name(String),
    Cmp(Comparator),
    Plus,
    Minus,
    Colon,
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || "!\"#$%&()/,.;?@_`'{}|~[]".contains(c)
}

fn tokenize(line: &str, line_no: usize) -> Result<Vec<Tok>, MilpError> {
    let chars: Vec<char> = line.chars().collect();
    let mut i = 0;
    let mut toks = Vec::new();
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '+' {
            toks.push(Tok::Plus);
            i += 1;
        } else if c == '-' {
            toks.push(Tok::Minus);
            i += 1;
        } else if c == ':' {
            toks.push(Tok::Colon);
            i += 1;
        } else if c == '<' || c == '>' || c == '=' {
            let mut j = i + 1;
            if j < chars.len() && matches!(chars[j], '<' | '>' | '=') {
                j += 1;
            }
            let s: String = chars[i..j].iter().collect();
            let cmp = match s.as_str() {
                "<" | "<=" | "=<" => Comparator::Le,
                ">" | ">=" | "=>" => Comparator::Ge,
                "=" | "==" => Comparator::Eq,
                _ => {
                    return Err(MilpError::Parse {
                        line: line_no,
                        message: format!("bad comparator `{s}`"),
                    })
                }
            };
            toks.push(Tok::Cmp(cmp));
            i = j;
        } else if c.is_ascii_digit() || c == '.' {
            let mut j = i;
            while j < chars.len()
                && (chars[j].is_ascii_digit()
                    || chars[j] == '.'
                    || ((chars[j] == 'e' || chars[j] == 'E')
                        && j + 1 < chars.len()
                        && (chars[j + 1].is_ascii_digit() || chars[j + 1] == '-' || chars[j + 1] == '+'))
                    || ((chars[j] == '-' || chars[j] == '+') && j > i && matches!(chars[j - 1], 'e' | 'E')))
            {
                j += 1;
            }
            let s: String = chars[i..j].iter().collect();
            let v = s.parse::<f64>().map_err(|_| MilpError::Parse {
                line: line_no,
                message: format!("bad number `{s}`"),
            })?;
            toks.push(Tok::Num(v));
            i = j;
        } else if is_name_char(c) {
            let mut j = i;
            while j < chars.len() && (is_name_char(chars[j])) {
                j += 1;
            }
            let s: String = chars[i..j].iter().collect();
            let lower = s.to_ascii_lowercase();
            if lower == "inf" || lower == "infinity" {
                toks.push(Tok::Num(f64::INFINITY));
            } else {
                toks.push(Tok::Name(s));
            }
            i = j;
        } else {
            return Err(MilpError::Parse {
                line: line_no,
                message: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(toks)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Objective,
    Constraints,
    Bounds,
    Binaries,
    Generals,
    End,
}

fn section_header(line: &str) -> Option<(Section, Option<Sense>)> {
    let l = line.trim().to_ascii_lowercase();
    let l = l.as_str();
    match l {
        "maximize" | "maximise" | "maximum" | "max" => Some((Section::Objective, Some(Sense::Maximize))),
        "minimize" | "minimise" | "minimum" | "min" => Some((Section::Objective, Some(Sense::Minimize))),
        "subject to" | "such that" | "st" | "s.t." => Some((Section::Constraints, None)),
        "bounds" | "bound" => Some((Section::Bounds, None)),
        "binaries" | "binary" | "bin" => Some((Section::Binaries, None)),
        "generals" | "general" | "gen" | "integers" => Some((Section::Generals, None)),
        "end" => Some((Section::End, None)),
        _ => None,
    }
}

struct RawRow {
    name: Option<String>,
    terms: Vec<(String, f64)>,
    cmp: Comparator,
    rhs: f64,
}

/// Parses a linear expression `[name:] (+|-)? [coef] var ...`, returning the
/// optional label, terms, and the index of the first unconsumed token.
#[allow(clippy::type_complexity)]
fn parse_expr(toks: &[Tok], line: usize) -> Result<(Option<String>, Vec<(String, f64)>, f64, usize), MilpError> {
    let mut i = 0;
    let mut label = None;
    if toks.len() >= 2 {
        if let (Tok::Name(n), Tok::Colon) = (&toks[0], &toks[1]) {
            label = Some(n.clone());
            i = 2;
        }
    }
    let mut terms = Vec::new();
    let mut constant = 0.0;
    let mut sign = 1.0;
    let mut coef: Option<f64> = None;
    while i < toks.len() {
        match &toks[i] {
            Tok::Plus => {}
            Tok::Minus => sign = -sign,
            Tok::Num(v) => {
                if coef.is_some() {
                    return Err(MilpError::Parse {
                        line,
                        message: "two numbers in a row".into(),
                    });
                }
                coef = Some(*v);
            }
            Tok::Name(n) => {
                terms.push((n.clone(), sign * coef.take().unwrap_or(1.0)));
                sign = 1.0;
            }
            Tok::Cmp(_) => break,
            Tok::Colon => {
                return Err(MilpError::Parse {
                    line,
                    message: "unexpected `:`".into(),
                })
            }
        }
        if matches!(toks[i], Tok::Name(_) | Tok::Plus) || matches!(toks[i], Tok::Minus) {
            // sign resets after a term; minus accumulates until the term
        }
        i += 1;
    }
    if let Some(c) = coef {
        constant += sign * c;
    }
    Ok((label, terms, constant, i))
}

fn parse_signed_number(toks: &[Tok], line: usize) -> Result<f64, MilpError> {
    let mut sign = 1.0;
    for t in toks {
        match t {
            Tok::Plus => {}
            Tok::Minus => sign = -sign,
            Tok::Num(v) => return Ok(sign * v),
            _ => break,
        }
    }
    Err(MilpError::Parse {
        line,
        message: "expected a number".into(),
    })
}

/// Variable table built up while reading, in order of first appearance.
#[derive(Default)]
struct Symbols {
    order: Vec<String>,
    index: HashMap<String, usize>,
    bounds: Vec<(f64, f64)>,
    binary: Vec<bool>,
}

impl Symbols {
    fn intern(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.order.len();
        self.index.insert(name.to_string(), i);
        self.order.push(name.to_string());
        self.bounds.push((0.0, f64::INFINITY));
        self.binary.push(false);
        i
    }
}

/// Parses LP text back into a model. Variables default to `[0, +inf)`.
pub fn parse_lp(text: &str) -> Result<MilpModel, MilpError> {
    let mut section = Section::None;
    let mut sense = Sense::Maximize;
    let mut obj_toks: Vec<Tok> = Vec::new();
    let mut syms = Symbols::default();
    let mut rows: Vec<RawRow> = Vec::new();
    let mut pending: Vec<Tok> = Vec::new();
    let mut pending_line = 0;

    let flush_row = |pending: &mut Vec<Tok>, rows: &mut Vec<RawRow>, line: usize| -> Result<(), MilpError> {
        if pending.is_empty() {
            return Ok(());
        }
        let (label, terms, constant, at) = parse_expr(pending, line)?;
        let Some(Tok::Cmp(cmp)) = pending.get(at).cloned() else {
            return Err(MilpError::Parse {
                line,
                message: "constraint without comparator".into(),
            });
        };
        let rhs = parse_signed_number(&pending[at + 1..], line)?;
        rows.push(RawRow {
            name: label,
            terms,
            cmp,
            rhs: rhs - constant,
        });
        pending.clear();
        Ok(())
    };

    for (no, raw) in text.lines().enumerate() {
        let line_no = no + 1;
        let line = raw.split('\\').next().unwrap_or("");
        if line.trim().is_empty() {
            continue;
        }
        if let Some((sec, s)) = section_header(line) {
            if section == Section::Constraints {
                flush_row(&mut pending, &mut rows, pending_line)?;
            }
            section = sec;
            if let Some(s) = s {
                sense = s;
            }
            if sec == Section::Generals {
                return Err(MilpError::Parse {
                    line: line_no,
                    message: "general integer variables are not supported".into(),
                });
            }
            continue;
        }
        let toks = tokenize(line, line_no)?;
        match section {
            Section::None | Section::End => {
                return Err(MilpError::Parse {
                    line: line_no,
                    message: "content outside of a section".into(),
                })
            }
            Section::Objective => obj_toks.extend(toks),
            Section::Constraints => {
                // A new labelled row, or a continuation of the previous one.
                let starts_row = matches!(toks.as_slice(), [Tok::Name(_), Tok::Colon, ..]);
                let prev_complete = pending.iter().any(|t| matches!(t, Tok::Cmp(_)))
                    && matches!(pending.last(), Some(Tok::Num(_)));
                if starts_row || prev_complete {
                    flush_row(&mut pending, &mut rows, pending_line)?;
                }
                if pending.is_empty() {
                    pending_line = line_no;
                }
                pending.extend(toks);
            }
            Section::Bounds => {
                parse_bound(&toks, line_no, &mut syms)?;
            }
            Section::Binaries => {
                for t in toks {
                    let Tok::Name(n) = t else {
                        return Err(MilpError::Parse {
                            line: line_no,
                            message: "expected variable names".into(),
                        });
                    };
                    let i = syms.intern(&n);
                    syms.binary[i] = true;
                }
            }
            Section::Generals => unreachable!(),
        }
    }
    if section == Section::Constraints {
        flush_row(&mut pending, &mut rows, pending_line)?;
    }

    let (_, obj_terms, _, _) = parse_expr(&obj_toks, 0)?;
    for (n, _) in &obj_terms {
        syms.intern(n);
    }
    for r in &rows {
        for (n, _) in &r.terms {
            syms.intern(n);
        }
    }

    let mut b = ModelBuilder::new(sense);
    let mut ids = Vec::with_capacity(syms.order.len());
    for (i, name) in syms.order.iter().enumerate() {
        let id = if syms.binary[i] {
            b.binary(name.clone())?
        } else {
            b.continuous(name.clone(), syms.bounds[i].0, syms.bounds[i].1)?
        };
        ids.push(id);
    }
    let lookup = |n: &str| ids[syms.index[n]];
    for (k, r) in rows.into_iter().enumerate() {
        let terms: Vec<(VarId, f64)> = r.terms.iter().map(|(n, c)| (lookup(n), *c)).collect();
        b.constraint(r.name.unwrap_or_else(|| format!("r{k}")), terms, r.cmp, r.rhs);
    }
    for (n, c) in obj_terms {
        b.objective(lookup(&n), c);
    }
    Ok(b.finish())
}

fn parse_bound(
    toks: &[Tok],
    line: usize,
    syms: &mut Symbols,
) -> Result<(), MilpError> {
    let err = |m: &str| MilpError::Parse {
        line,
        message: m.to_string(),
    };
    // Collapse signed numbers.
    let mut items: Vec<Tok> = Vec::new();
    let mut sign = 1.0;
    for t in toks {
        match t {
            Tok::Minus => sign = -sign,
            Tok::Plus => {}
            Tok::Num(v) => {
                items.push(Tok::Num(sign * v));
                sign = 1.0;
            }
            other => {
                items.push(other.clone());
                sign = 1.0;
            }
        }
    }
    match items.as_slice() {
        [Tok::Name(n), Tok::Name(f)] if f.eq_ignore_ascii_case("free") => {
            let i = syms.intern(n);
            syms.bounds[i] = (f64::NEG_INFINITY, f64::INFINITY);
        }
        [Tok::Num(lo), Tok::Cmp(Comparator::Le), Tok::Name(n), Tok::Cmp(Comparator::Le), Tok::Num(hi)] => {
            let i = syms.intern(n);
            syms.bounds[i] = (*lo, *hi);
        }
        [Tok::Name(n), Tok::Cmp(cmp), Tok::Num(v)] => {
            let i = syms.intern(n);
            match cmp {
                Comparator::Le => syms.bounds[i].1 = *v,
                Comparator::Ge => syms.bounds[i].0 = *v,
                Comparator::Eq => syms.bounds[i] = (*v, *v),
            }
        }
        [Tok::Num(v), Tok::Cmp(cmp), Tok::Name(n)] => {
            let i = syms.intern(n);
            match cmp {
                Comparator::Le => syms.bounds[i].0 = *v,
                Comparator::Ge => syms.bounds[i].1 = *v,
                Comparator::Eq => syms.bounds[i] = (*v, *v),
            }
        }
        _ => return Err(err("unrecognised bound")),
    }
    Ok(())
}
