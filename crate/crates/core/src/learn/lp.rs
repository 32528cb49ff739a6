//! CPLEX LP text export of a [`MilpProblem`] and a reader for the subset of
//! the format the exporter produces.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::milp::{MilpProblem, Sense, Var};

const TERMS_PER_LINE: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpObjective {
    /// `Maximize 0`: pure feasibility.
    Feasibility,
    /// Maximize the number of covered negatives; coverage rows become
    /// `Σ_i S_li - y_l >= 0` with binary indicators `y_l`.
    MaxCoverage,
}

fn write_expr<W: Write>(out: &mut W, coeffs: &[(String, f64)]) -> std::io::Result<()> {
    let mut written = 0;
    for (name, c) in coeffs {
        if *c == 0.0 {
            continue;
        }
        if written > 0 && written % TERMS_PER_LINE == 0 {
            write!(out, "\n  ")?;
        }
        let sign = if *c < 0.0 { '-' } else { '+' };
        if written == 0 && sign == '+' {
            write!(out, " {} {}", c.abs(), name)?;
        } else {
            write!(out, " {} {} {}", sign, c.abs(), name)?;
        }
        written += 1;
    }
    if written == 0 {
        // an empty expression is not valid LP; anchor on some variable
        if let Some((name, _)) = coeffs.first() {
            write!(out, " 0 {name}")?;
        }
    }
    Ok(())
}

pub fn write_lp<W: Write>(p: &MilpProblem, objective: LpObjective, out: &mut W) -> std::io::Result<()> {
    writeln!(
        out,
        "\\ bound learning: {} constraint(s), {} terms, {} positive / {} negative examples",
        p.num_constraints,
        p.num_terms(),
        p.num_positives(),
        p.num_negatives()
    )?;
    writeln!(out, "\\ M = {}, eps = {}", p.big_m, p.epsilon)?;
    writeln!(out, "Maximize")?;
    match objective {
        LpObjective::MaxCoverage if p.num_negatives() > 0 => {
            let terms: Vec<(String, f64)> =
                (0..p.num_negatives()).map(|l| (format!("y_{l}"), 1.0)).collect();
            write!(out, " obj:")?;
            write_expr(out, &terms)?;
            writeln!(out)?;
        }
        _ => writeln!(out, " obj: 0 {}", Var::Offset { constraint: 0 })?,
    }
    writeln!(out, "Subject To")?;
    for row in p.rows() {
        let mut coeffs: Vec<(String, f64)> =
            row.coeffs.iter().map(|(v, c)| (v.to_string(), *c)).collect();
        let mut rhs = row.rhs;
        let mut sense = row.sense;
        if objective == LpObjective::MaxCoverage && row.name.starts_with("cover_") {
            coeffs.push((format!("y_{}", &row.name["cover_".len()..]), -1.0));
            rhs = 0.0;
            sense = Sense::Ge;
        }
        write!(out, " {}:", row.name)?;
        write_expr(out, &coeffs)?;
        let op = match sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
        };
        writeln!(out, " {op} {rhs}")?;
    }
    writeln!(out, "Bounds")?;
    let b = p.weight_bound;
    for v in p.continuous() {
        writeln!(out, " -{b} <= {v} <= {b}")?;
    }
    if p.num_negatives() > 0 {
        writeln!(out, "Binaries")?;
        let mut line = 0;
        for v in p.binaries() {
            write!(out, " {v}")?;
            line += 1;
            if line % TERMS_PER_LINE == 0 {
                writeln!(out)?;
            }
        }
        if objective == LpObjective::MaxCoverage {
            for l in 0..p.num_negatives() {
                write!(out, " y_{l}")?;
                line += 1;
                if line % TERMS_PER_LINE == 0 {
                    writeln!(out)?;
                }
            }
        }
        if line % TERMS_PER_LINE != 0 {
            writeln!(out)?;
        }
    }
    writeln!(out, "End")
}

pub fn export_lp(p: &MilpProblem, objective: LpObjective, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_lp(p, objective, &mut out)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

/// Structural summary of a parsed LP file.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LpSummary {
    pub maximize: bool,
    pub objective_terms: usize,
    pub row_names: Vec<String>,
    pub bounded: usize,
    pub binaries: usize,
    pub variables: BTreeSet<String>,
}

impl LpSummary {
    pub fn rows(&self) -> usize {
        self.row_names.len()
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    Preamble,
    Objective,
    Constraints,
    Bounds,
    Binaries,
    End,
}

fn section_of(line: &str) -> Option<Section> {
    match line.trim().to_ascii_lowercase().as_str() {
        "maximize" | "maximum" | "max" | "minimize" | "minimum" | "min" => Some(Section::Objective),
        "subject to" | "such that" | "st" | "s.t." => Some(Section::Constraints),
        "bounds" => Some(Section::Bounds),
        "binaries" | "binary" => Some(Section::Binaries),
        "end" => Some(Section::End),
        _ => None,
    }
}

fn is_number(tok: &str) -> bool {
    tok.parse::<f64>().is_ok()
}

fn is_operator(tok: &str) -> bool {
    matches!(tok, "<=" | ">=" | "=" | "<" | ">" | "=<" | "=>")
}

/// Parses `[+|-] [coef] var ...` and returns the variable names.
fn parse_expr(tokens: &[&str], line: usize) -> Result<Vec<String>> {
    let err = |msg: String| Error::Schema { line, msg };
    let mut vars = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let mut t = tokens[i];
        if t == "+" || t == "-" {
            i += 1;
            t = *tokens.get(i).ok_or_else(|| err("dangling sign".into()))?;
        }
        if is_number(t) {
            i += 1;
            t = *tokens.get(i).ok_or_else(|| err("coefficient without variable".into()))?;
        }
        if is_number(t) || is_operator(t) || t == "+" || t == "-" {
            return Err(err(format!("expected a variable, found {t:?}")));
        }
        vars.push(t.to_string());
        i += 1;
    }
    Ok(vars)
}

pub fn parse_lp(text: &str) -> Result<LpSummary> {
    let mut summary = LpSummary::default();
    let mut section = Section::Preamble;
    // (name, tokens, first line) of constraints being assembled
    let mut pending: Vec<(String, Vec<String>, usize)> = Vec::new();
    let mut objective: Vec<String> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('\\').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(s) = section_of(line) {
            if s == Section::Objective {
                summary.maximize = line.to_ascii_lowercase().starts_with("max");
            }
            section = s;
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match section {
            Section::Preamble | Section::End => {
                return Err(Error::Schema {
                    line: line_no,
                    msg: "content outside of a section".into(),
                })
            }
            Section::Objective => objective.extend(tokens.iter().map(|t| t.to_string())),
            Section::Constraints => {
                for tok in tokens {
                    if let Some(name) = tok.strip_suffix(':') {
                        pending.push((name.to_string(), Vec::new(), line_no));
                    } else {
                        match pending.last_mut() {
                            Some((_, toks, _)) => toks.push(tok.to_string()),
                            None => {
                                return Err(Error::Schema {
                                    line: line_no,
                                    msg: "unnamed constraint".into(),
                                })
                            }
                        }
                    }
                }
            }
            Section::Bounds => {
                // lo <= var <= hi
                if tokens.len() != 5 || !is_number(tokens[0]) || !is_number(tokens[4]) {
                    return Err(Error::Schema {
                        line: line_no,
                        msg: format!("unsupported bound {line:?}"),
                    });
                }
                summary.bounded += 1;
                summary.variables.insert(tokens[2].to_string());
            }
            Section::Binaries => {
                for t in tokens {
                    summary.binaries += 1;
                    summary.variables.insert(t.to_string());
                }
            }
        }
    }
    if section != Section::End {
        return Err(Error::Schema {
            line: text.lines().count(),
            msg: "missing End".into(),
        });
    }
    let obj_tokens: Vec<&str> = objective
        .iter()
        .map(String::as_str)
        .skip_while(|t| t.ends_with(':'))
        .collect();
    let obj_vars = parse_expr(&obj_tokens, 0)?;
    summary.objective_terms = obj_vars.len();
    summary.variables.extend(obj_vars);
    for (name, toks, line) in pending {
        let toks: Vec<&str> = toks.iter().map(String::as_str).collect();
        let op = toks.iter().position(|t| is_operator(t)).ok_or_else(|| Error::Schema {
            line,
            msg: format!("constraint {name} has no relational operator"),
        })?;
        if op + 2 != toks.len() || !is_number(toks[op + 1]) {
            return Err(Error::Schema {
                line,
                msg: format!("constraint {name} must end with a numeric right-hand side"),
            });
        }
        summary.variables.extend(parse_expr(&toks[..op], line)?);
        summary.row_names.push(name);
    }
    Ok(summary)
}

pub fn read_lp(path: impl AsRef<Path>) -> Result<LpSummary> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_lp(&text)
}
