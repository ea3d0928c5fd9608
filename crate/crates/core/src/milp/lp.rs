//! CPLEX-style LP text files.
//!
//! The writer emits `Maximize|Minimize`, `Subject To`, `Bounds`, `Binaries`
//! and `End` in declaration order, so equal models give byte-identical
//! files. The reader accepts that subset back (plus the usual keyword
//! spellings), which is what the reference external solver uses.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Cmp, MilpModel, ObjSense, VarId, VarKind};
use crate::error::{Error, Result};

const TERMS_PER_LINE: usize = 8;

fn fmt_num(x: f64) -> String {
    if x == f64::INFINITY {
        "+inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x}")
    }
}

fn write_expr(out: &mut String, model: &MilpModel, terms: &[(VarId, f64)]) {
    if terms.is_empty() {
        if let Some(first) = model.variables().first() {
            let _ = write!(out, " 0 {}", first.name);
        }
        return;
    }
    for (i, &(v, a)) in terms.iter().enumerate() {
        if i > 0 && i % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let sign = if a < 0.0 { '-' } else { '+' };
        let _ = write!(out, " {sign} {} {}", fmt_num(a.abs()), model.variable(v).name);
    }
}

/// Renders `model` as LP text.
pub fn to_lp_string(model: &MilpModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "\\ {}", model.name());
    out.push_str(match model.objective().sense {
        ObjSense::Maximize => "Maximize\n",
        ObjSense::Minimize => "Minimize\n",
    });
    out.push_str(" obj:");
    write_expr(&mut out, model, &model.objective().terms);
    out.push('\n');
    out.push_str("Subject To\n");
    for c in model.constraints() {
        let _ = write!(out, " {}:", c.name);
        write_expr(&mut out, model, &c.terms);
        let _ = writeln!(out, " {} {}", c.cmp, fmt_num(c.rhs));
    }
    let continuous: Vec<_> = model
        .variables()
        .iter()
        .filter(|v| v.kind == VarKind::Continuous)
        .collect();
    if !continuous.is_empty() {
        out.push_str("Bounds\n");
        for v in continuous {
            let line = match (v.lower.is_finite(), v.upper.is_finite()) {
                (false, false) => format!(" {} free", v.name),
                (true, false) => format!(" {} >= {}", v.name, fmt_num(v.lower)),
                _ if v.lower == v.upper => format!(" {} = {}", v.name, fmt_num(v.lower)),
                _ => format!(" {} <= {} <= {}", fmt_num(v.lower), v.name, fmt_num(v.upper)),
            };
            out.push_str(&line);
            out.push('\n');
        }
    }
    let binaries: Vec<_> = model
        .variables()
        .iter()
        .filter(|v| v.kind == VarKind::Binary)
        .collect();
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        for chunk in binaries.chunks(TERMS_PER_LINE) {
            let names: Vec<&str> = chunk.iter().map(|v| v.name.as_str()).collect();
            let _ = writeln!(out, " {}", names.join(" "));
        }
    }
    out.push_str("End\n");
    out
}

pub fn emit_lp_file(model: &MilpModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_lp_string(model))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Name(String),
    Colon,
    Plus,
    Minus,
    Cmp(Cmp),
}

fn lex(text: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = text.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            c if c.is_whitespace() => i += 1,
            ':' => {
                toks.push(Tok::Colon);
                i += 1;
            }
            '+' => {
                toks.push(Tok::Plus);
                i += 1;
            }
            '-' => {
                toks.push(Tok::Minus);
                i += 1;
            }
            '<' | '>' | '=' => {
                let mut op = String::from(c);
                i += 1;
                while i < chars.len() && matches!(chars[i], '<' | '>' | '=') {
                    op.push(chars[i]);
                    i += 1;
                }
                let cmp = match op.as_str() {
                    "<" | "<=" | "=<" => Cmp::Le,
                    ">" | ">=" | "=>" => Cmp::Ge,
                    "=" => Cmp::Eq,
                    _ => return Err(Error::Parse(format!("bad operator `{op}`"))),
                };
                toks.push(Tok::Cmp(cmp));
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_ascii_digit()
                        || chars[i] == '.'
                        || ((chars[i] == 'e' || chars[i] == 'E')
                            && i + 1 < chars.len()
                            && (chars[i + 1].is_ascii_digit() || chars[i + 1] == '+' || chars[i + 1] == '-')))
                {
                    if chars[i] == 'e' || chars[i] == 'E' {
                        i += 2;
                    } else {
                        i += 1;
                    }
                }
                let s: String = chars[start..i].iter().collect();
                let v = s
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad number `{s}`")))?;
                toks.push(Tok::Num(v));
            }
            _ => {
                let start = i;
                while i < chars.len()
                    && !chars[i].is_whitespace()
                    && !matches!(chars[i], ':' | '+' | '-' | '<' | '>' | '=')
                {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                match s.to_ascii_lowercase().as_str() {
                    "inf" | "infinity" => toks.push(Tok::Num(f64::INFINITY)),
                    _ => toks.push(Tok::Name(s)),
                }
            }
        }
    }
    Ok(toks)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Section {
    Preamble,
    Objective(ObjSense),
    Constraints,
    Bounds,
    Binaries,
    Generals,
    End,
}

fn section_keyword(line: &str) -> Option<Section> {
    let lower = line.trim().to_ascii_lowercase();
    let words: Vec<&str> = lower.split_whitespace().collect();
    match words.as_slice() {
        ["maximize" | "maximise" | "maximum" | "max"] => Some(Section::Objective(ObjSense::Maximize)),
        ["minimize" | "minimise" | "minimum" | "min"] => Some(Section::Objective(ObjSense::Minimize)),
        ["subject", "to"] | ["such", "that"] | ["st"] | ["s.t."] => Some(Section::Constraints),
        ["bounds" | "bound"] => Some(Section::Bounds),
        ["binaries" | "binary" | "bin"] => Some(Section::Binaries),
        ["generals" | "general" | "gen" | "integers"] => Some(Section::Generals),
        ["end"] => Some(Section::End),
        _ => None,
    }
}

/// An expression term list plus what terminated it.
struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, off: usize) -> Option<&Tok> {
        self.toks.get(self.pos + off)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn done(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn label(&mut self) -> Option<String> {
        if let (Some(Tok::Name(n)), Some(Tok::Colon)) = (self.peek(), self.peek_at(1)) {
            let n = n.clone();
            self.pos += 2;
            Some(n)
        } else {
            None
        }
    }

    fn signed_number(&mut self) -> Result<f64> {
        let mut sign = 1.0;
        loop {
            match self.next() {
                Some(Tok::Plus) => {}
                Some(Tok::Minus) => sign = -sign,
                Some(Tok::Num(v)) => return Ok(sign * v),
                other => return Err(Error::Parse(format!("expected a number, found {other:?}"))),
            }
        }
    }

    /// Reads `[+|-] [coef] name ...` until a comparison, a new label or the end.
    fn expr(&mut self) -> Result<Vec<(String, f64)>> {
        let mut terms = Vec::new();
        loop {
            match self.peek() {
                None | Some(Tok::Cmp(_)) => return Ok(terms),
                Some(Tok::Name(_)) if matches!(self.peek_at(1), Some(Tok::Colon)) => return Ok(terms),
                _ => {}
            }
            let mut sign = 1.0;
            let mut coef = 1.0;
            while let Some(t) = self.peek() {
                match t {
                    Tok::Plus => {}
                    Tok::Minus => sign = -sign,
                    _ => break,
                }
                self.pos += 1;
            }
            if let Some(Tok::Num(v)) = self.peek() {
                coef = *v;
                self.pos += 1;
            }
            match self.next() {
                Some(Tok::Name(n)) => terms.push((n, sign * coef)),
                // a bare constant in an objective: allowed only if zero
                Some(Tok::Cmp(_)) | None if coef == 0.0 => return Ok(terms),
                other => return Err(Error::Parse(format!("expected a variable name, found {other:?}"))),
            }
        }
    }
}

/// Parses LP text into a model. Variables are declared in order of first
/// appearance; `Generals` (integer) sections are rejected.
pub fn parse_lp(text: &str) -> Result<MilpModel> {
    let mut section = Section::Preamble;
    let mut buckets: Vec<(Section, String)> = Vec::new();
    for raw in text.lines() {
        let line = raw.split('\\').next().unwrap_or("");
        if let Some(s) = section_keyword(line) {
            section = s;
            buckets.push((s, String::new()));
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        match buckets.last_mut() {
            Some((_, body)) => {
                body.push_str(line);
                body.push('\n');
            }
            None => return Err(Error::Parse(format!("content before objective section: `{}`", line.trim()))),
        }
    }
    if section != Section::End {
        return Err(Error::Parse("missing `End`".into()));
    }

    // pass 1: collect names, kinds and bounds
    let mut sense = None;
    let mut obj_terms: Vec<(String, f64)> = Vec::new();
    let mut rows: Vec<(String, Vec<(String, f64)>, Cmp, f64)> = Vec::new();
    let mut order: Vec<String> = Vec::new();
    let mut bounds: std::collections::HashMap<String, (f64, f64)> = Default::default();
    let mut binaries: std::collections::HashSet<String> = Default::default();
    let note = |order: &mut Vec<String>, n: &str| {
        if !order.iter().any(|o| o == n) {
            order.push(n.to_string());
        }
    };

    for (sec, body) in &buckets {
        let mut p = Parser {
            toks: lex(body)?,
            pos: 0,
        };
        match sec {
            Section::Objective(s) => {
                sense = Some(*s);
                p.label();
                obj_terms = p.expr()?;
                if !p.done() {
                    return Err(Error::Parse("trailing tokens after objective".into()));
                }
                for (n, _) in &obj_terms {
                    note(&mut order, n);
                }
            }
            Section::Constraints => {
                while !p.done() {
                    let name = p.label().unwrap_or_else(|| format!("r{}", rows.len()));
                    let terms = p.expr()?;
                    let cmp = match p.next() {
                        Some(Tok::Cmp(c)) => c,
                        other => return Err(Error::Parse(format!("constraint `{name}`: expected comparison, found {other:?}"))),
                    };
                    let rhs = p.signed_number()?;
                    for (n, _) in &terms {
                        note(&mut order, n);
                    }
                    rows.push((name, terms, cmp, rhs));
                }
            }
            Section::Bounds => {
                for line in body.lines() {
                    let toks = lex(line)?;
                    let (name, lo, hi) = parse_bound(&toks)?;
                    note(&mut order, &name);
                    let entry = bounds.entry(name).or_insert((0.0, f64::INFINITY));
                    if let Some(lo) = lo {
                        entry.0 = lo;
                    }
                    if let Some(hi) = hi {
                        entry.1 = hi;
                    }
                }
            }
            Section::Binaries => {
                for t in lex(body)? {
                    match t {
                        Tok::Name(n) => {
                            note(&mut order, &n);
                            binaries.insert(n);
                        }
                        other => return Err(Error::Parse(format!("unexpected {other:?} in Binaries"))),
                    }
                }
            }
            Section::Generals => {
                if !lex(body)?.is_empty() {
                    return Err(Error::Parse("general integer variables are not supported".into()));
                }
            }
            Section::Preamble | Section::End => {}
        }
    }
    let sense = sense.ok_or_else(|| Error::Parse("missing objective section".into()))?;

    let mut model = MilpModel::new("lp", sense);
    for name in order {
        if binaries.contains(&name) {
            model.add_binary(name)?;
        } else {
            let (lo, hi) = bounds.get(&name).copied().unwrap_or((0.0, f64::INFINITY));
            model.add_continuous(name, lo, hi)?;
        }
    }
    let resolve = |model: &MilpModel, terms: &[(String, f64)]| -> Vec<(VarId, f64)> {
        terms
            .iter()
            .map(|(n, a)| (model.var(n).expect("declared in pass 1"), *a))
            .collect()
    };
    let obj = resolve(&model, &obj_terms);
    model.set_objective(sense, obj)?;
    for (name, terms, cmp, rhs) in rows {
        let t = resolve(&model, &terms);
        model.add_constraint(name, t, cmp, rhs)?;
    }
    Ok(model)
}

fn parse_bound(toks: &[Tok]) -> Result<(String, Option<f64>, Option<f64>)> {
    let mut p = Parser {
        toks: toks.to_vec(),
        pos: 0,
    };
    let err = || Error::Parse(format!("unsupported bound line {toks:?}"));
    match p.peek() {
        Some(Tok::Name(_)) => {
            let Some(Tok::Name(name)) = p.next() else { unreachable!() };
            match p.next() {
                Some(Tok::Name(f)) if f.eq_ignore_ascii_case("free") => {
                    Ok((name, Some(f64::NEG_INFINITY), Some(f64::INFINITY)))
                }
                Some(Tok::Cmp(c)) => {
                    let v = p.signed_number()?;
                    Ok(match c {
                        Cmp::Ge => (name, Some(v), None),
                        Cmp::Le => (name, None, Some(v)),
                        Cmp::Eq => (name, Some(v), Some(v)),
                    })
                }
                _ => Err(err()),
            }
        }
        _ => {
            let lo = p.signed_number()?;
            let Some(Tok::Cmp(c1)) = p.next() else { return Err(err()) };
            let Some(Tok::Name(name)) = p.next() else { return Err(err()) };
            let first = match c1 {
                Cmp::Le => (Some(lo), None),
                Cmp::Ge => (None, Some(lo)),
                Cmp::Eq => (Some(lo), Some(lo)),
            };
            if p.done() {
                return Ok((name, first.0, first.1));
            }
            let Some(Tok::Cmp(c2)) = p.next() else { return Err(err()) };
            let hi = p.signed_number()?;
            match (c1, c2) {
                (Cmp::Le, Cmp::Le) => Ok((name, Some(lo), Some(hi))),
                (Cmp::Ge, Cmp::Ge) => Ok((name, Some(hi), Some(lo))),
                _ => Err(err()),
            }
        }
    }
}

pub fn read_lp_file(path: impl AsRef<Path>) -> Result<MilpModel> {
    parse_lp(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> MilpModel {
        let mut m = MilpModel::new("sample", ObjSense::Maximize);
        let x = m.add_binary("x_0_1").unwrap();
        let s = m.add_continuous("s_0_1", 0.0, f64::INFINITY).unwrap();
        let f = m.add_continuous("f_0_1", 0.0, 540.0).unwrap();
        let u = m.add_continuous("u", f64::NEG_INFINITY, f64::INFINITY).unwrap();
        m.add_constraint("link", [(s, 1.0), (x, -800.0)], Cmp::Ge, -790.5).unwrap();
        m.add_constraint("fin", [(f, 1.0), (s, -1.0)], Cmp::Eq, 20.0).unwrap();
        m.add_constraint("free_u", [(u, 1.0), (x, 1e-4)], Cmp::Le, 3.0).unwrap();
        m.set_objective(ObjSense::Maximize, [(x, 1.0), (f, -0.0001), (u, -0.99)]).unwrap();
        m
    }

    #[test]
    fn writer_layout() {
        let text = to_lp_string(&sample());
        let expected = "\\ sample\nMaximize\n obj: + 1 x_0_1 - 0.0001 f_0_1 - 0.99 u\nSubject To\n link: + 1 s_0_1 - 800 x_0_1 >= -790.5\n fin: + 1 f_0_1 - 1 s_0_1 = 20\n free_u: + 1 u + 0.0001 x_0_1 <= 3\nBounds\n s_0_1 >= 0\n 0 <= f_0_1 <= 540\n u free\nBinaries\n x_0_1\nEnd\n";
        assert_eq!(text, expected);
    }

    #[test]
    fn empty_objective_and_byte_stability() {
        let mut m = MilpModel::new("e", ObjSense::Maximize);
        m.add_binary("x").unwrap();
        let text = to_lp_string(&m);
        assert!(text.contains(" obj: 0 x\n"));
        assert_eq!(text, to_lp_string(&m.clone()));
        let back = parse_lp(&text).unwrap();
        assert!(back.objective().terms.is_empty());
        assert_eq!(back.num_binaries(), 1);
    }

    #[test]
    fn reader_restores_structure() {
        let m = sample();
        let back = parse_lp(&to_lp_string(&m)).unwrap();
        assert_eq!(back.num_vars(), m.num_vars());
        for v in m.variables() {
            let w = back.variable(back.var(&v.name).unwrap());
            assert_eq!((w.kind, w.lower, w.upper), (v.kind, v.lower, v.upper), "{}", v.name);
        }
        for c in m.constraints() {
            let d = back.constraint(&c.name).unwrap();
            assert_eq!((d.cmp, d.rhs), (c.cmp, c.rhs));
            let named = |mm: &MilpModel, t: &[(VarId, f64)]| {
                let mut v: Vec<(String, f64)> =
                    t.iter().map(|&(id, a)| (mm.variable(id).name.clone(), a)).collect();
                v.sort_by(|a, b| a.0.cmp(&b.0));
                v
            };
            assert_eq!(named(&back, &d.terms), named(&m, &c.terms));
        }
    }

    #[test]
    fn reader_accepts_common_spellings() {
        let text = "\\ c\nMINIMIZE\n cost: 2 a + 3.5e0 b\nst\n c1: a + b >= 1\n -a + b <= 0.5\nbounds\n -inf <= b <= 4\n a <= 2\nend\n";
        let m = parse_lp(text).unwrap();
        assert_eq!(m.objective().sense, ObjSense::Minimize);
        assert_eq!(m.constraints().len(), 2);
        let b = m.variable(m.var("b").unwrap());
        assert_eq!((b.lower, b.upper), (f64::NEG_INFINITY, 4.0));
        let a = m.variable(m.var("a").unwrap());
        assert_eq!((a.lower, a.upper), (0.0, 2.0));
    }

    #[test]
    fn reader_rejects_generals_and_missing_end() {
        assert!(parse_lp("Maximize\n obj: x\nSubject To\n c: x <= 1\nGenerals\n x\nEnd\n").is_err());
        assert!(parse_lp("Maximize\n obj: x\nSubject To\n c: x <= 1\n").is_err());
    }
}
