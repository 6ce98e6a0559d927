//! Line-oriented text form of a [`LinearProgram`].
//!
//! ```text
//! qclp 1 <n> <min|max>
//! var <index> <name>
//! row <family> <relation> <rhs> <k> <idx:coef>...
//! obj <k> <idx:coef>...
//! ```

use std::fmt::Write;

use super::{Family, LinearProgram, LpError, Relation, Row, Sense};
use crate::numeric::Rational;

const MAGIC: &str = "qclp";
const VERSION: &str = "1";

fn write_terms(out: &mut String, terms: &[(usize, Rational)]) {
    write!(out, "{}", terms.len()).unwrap();
    for (j, c) in terms {
        write!(out, " {j}:{c}").unwrap();
    }
}

/// Deterministic text export; rows and terms keep their in-memory order.
pub fn export_lp(lp: &LinearProgram) -> String {
    let mut out = String::new();
    writeln!(out, "{MAGIC} {VERSION} {} {}", lp.dimension, lp.sense).unwrap();
    for (i, name) in lp.var_names.iter().enumerate() {
        writeln!(out, "var {i} {name}").unwrap();
    }
    for row in &lp.rows {
        write!(out, "row {} {} {} ", row.family, row.relation, row.rhs).unwrap();
        write_terms(&mut out, &row.coeffs);
        out.push('\n');
    }
    out.push_str("obj ");
    write_terms(&mut out, &lp.objective);
    out.push('\n');
    out
}

struct Cursor<'a> {
    line: usize,
    tokens: std::str::SplitAsciiWhitespace<'a>,
}

impl<'a> Cursor<'a> {
    fn err(&self, message: impl Into<String>) -> LpError {
        LpError::Format {
            line: self.line,
            message: message.into(),
        }
    }

    fn next(&mut self, what: &str) -> Result<&'a str, LpError> {
        self.tokens
            .next()
            .ok_or_else(|| self.err(format!("missing {what}")))
    }

    fn usize(&mut self, what: &str) -> Result<usize, LpError> {
        let tok = self.next(what)?;
        tok.parse()
            .map_err(|_| self.err(format!("bad {what} {tok:?}")))
    }

    fn rational(&mut self, what: &str) -> Result<Rational, LpError> {
        let tok = self.next(what)?;
        tok.parse()
            .map_err(|e| self.err(format!("bad {what}: {e}")))
    }

    fn terms(&mut self) -> Result<Vec<(usize, Rational)>, LpError> {
        let k = self.usize("term count")?;
        let mut terms = Vec::with_capacity(k);
        for _ in 0..k {
            let tok = self.next("term")?;
            let (idx, coef) = tok
                .split_once(':')
                .ok_or_else(|| self.err(format!("bad term {tok:?}")))?;
            let idx = idx
                .parse()
                .map_err(|_| self.err(format!("bad term index {idx:?}")))?;
            let coef = coef
                .parse()
                .map_err(|e| self.err(format!("bad coefficient: {e}")))?;
            terms.push((idx, coef));
        }
        Ok(terms)
    }

    fn finish(&mut self) -> Result<(), LpError> {
        match self.tokens.next() {
            Some(extra) => Err(self.err(format!("unexpected token {extra:?}"))),
            None => Ok(()),
        }
    }
}

/// Parses the output of [`export_lp`].
pub fn parse_lp(text: &str) -> Result<LinearProgram, LpError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());

    let (line, header) = lines.next().ok_or(LpError::Format {
        line: 1,
        message: "empty input".into(),
    })?;
    let mut cur = Cursor {
        line,
        tokens: header.split_ascii_whitespace(),
    };
    if cur.next("magic")? != MAGIC {
        return Err(cur.err("expected qclp header"));
    }
    if cur.next("version")? != VERSION {
        return Err(cur.err("unsupported version"));
    }
    let dimension = cur.usize("dimension")?;
    let sense = match cur.next("sense")? {
        "min" => Sense::Minimize,
        "max" => Sense::Maximize,
        other => return Err(cur.err(format!("bad sense {other:?}"))),
    };
    cur.finish()?;

    let mut lp = LinearProgram::new(Vec::new(), sense);
    lp.dimension = dimension;
    let mut saw_objective = false;
    for (line, text) in lines {
        let mut cur = Cursor {
            line,
            tokens: text.split_ascii_whitespace(),
        };
        if saw_objective {
            return Err(cur.err("content after objective line"));
        }
        match cur.next("keyword")? {
            "var" => {
                if !lp.rows.is_empty() {
                    return Err(cur.err("variable declared after rows"));
                }
                let idx = cur.usize("variable index")?;
                if idx != lp.var_names.len() {
                    return Err(cur.err(format!("expected variable {}", lp.var_names.len())));
                }
                lp.var_names.push(cur.next("variable name")?.to_string());
            }
            "row" => {
                let tag = cur.next("family")?;
                let family =
                    Family::from_tag(tag).ok_or_else(|| cur.err(format!("bad family {tag:?}")))?;
                let relation = match cur.next("relation")? {
                    "<=" => Relation::LessEq,
                    ">=" => Relation::GreaterEq,
                    other => return Err(cur.err(format!("bad relation {other:?}"))),
                };
                let rhs = cur.rational("rhs")?;
                let coeffs = cur.terms()?;
                lp.rows.push(Row {
                    family,
                    coeffs,
                    relation,
                    rhs,
                });
            }
            "obj" => {
                lp.objective = cur.terms()?;
                saw_objective = true;
            }
            other => return Err(cur.err(format!("unknown keyword {other:?}"))),
        }
        cur.finish()?;
    }
    if !saw_objective {
        return Err(LpError::Format {
            line: text.lines().count(),
            message: "missing objective line".into(),
        });
    }
    lp.validate()?;
    Ok(lp)
}
