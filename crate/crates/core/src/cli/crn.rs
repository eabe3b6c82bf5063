//! The `.crn` text format.
//!
//! ```text
//! # comment
//! species: A B C
//! A + B <-> 2 C ; kf=1 kr=0.5
//! C -> 0 ; k=2
//! frozen: A=1.0, B=2
//! constrained: A + B <-> 2 C
//! ```
//!
//! `0` stands for an empty side. Rates default to 1 when the `;` clause is
//! left out.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::kinetics::RateFunction;
use crate::network::{ChemicalNetwork, Reaction};

const MAX_COEFF: i64 = 1 << 31;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkFile {
    pub network: ChemicalNetwork,
    pub rates: RateFunction,
    /// `(species index, concentration)` in file order.
    pub frozen: Vec<(usize, f64)>,
    /// Constrained reaction indices, closed under reversal.
    pub constrained: Vec<usize>,
}

impl NetworkFile {
    pub fn is_bidirectional(&self) -> bool {
        self.network.is_bidirectional()
    }
}

#[derive(Clone, Copy)]
struct Loc {
    line: usize,
    column: usize,
}

impl Loc {
    fn err(self, message: impl Into<String>) -> ParseError {
        ParseError {
            line: self.line,
            column: self.column,
            message: message.into(),
        }
    }

    fn at(self, offset: usize) -> Self {
        Self {
            line: self.line,
            column: self.column + offset,
        }
    }
}

/// Species names: a letter or `_`, then letters, digits, `_`, `'` or `.`.
fn is_name_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\'' || c == '.'
}

#[derive(Default)]
struct Registry {
    names: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl Registry {
    fn get_or_insert(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), self.names.len() - 1);
        self.names.len() - 1
    }
}

/// A side of a reaction as `(species name, coefficient, location)`.
type Side = Vec<(String, i64, Loc)>;

fn parse_side(text: &str, loc: Loc) -> Result<Side, ParseError> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(loc.err("empty side; write 0 for no species"));
    }
    if trimmed == "0" {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut offset = 0;
    for term in text.split('+') {
        let lead = term.len() - term.trim_start().len();
        let t = term.trim();
        let tloc = loc.at(offset + lead);
        offset += term.len() + 1;
        if t.is_empty() {
            return Err(tloc.err("missing term around '+'"));
        }
        let digits: String = t.chars().take_while(char::is_ascii_digit).collect();
        let rest = t[digits.len()..].trim_start();
        let name_loc = tloc.at(t.len() - rest.len());
        let coeff = if digits.is_empty() {
            1
        } else {
            match digits.parse::<i64>() {
                Ok(0) => return Err(tloc.err("coefficient must be positive")),
                Ok(c) if c <= MAX_COEFF => c,
                _ => return Err(tloc.err(format!("coefficient {digits} exceeds 2^31"))),
            }
        };
        let mut chars = rest.chars();
        match chars.next() {
            Some(c) if is_name_start(c) => {}
            Some(c) => return Err(name_loc.err(format!("unexpected character '{c}'"))),
            None => return Err(name_loc.err("missing species name")),
        }
        if let Some(bad) = rest.chars().find(|&c| !is_name_char(c)) {
            let pos = rest.find(bad).unwrap_or(0);
            return Err(name_loc
                .at(pos)
                .err(format!("unexpected character '{bad}'")));
        }
        out.push((rest.to_string(), coeff, name_loc));
    }
    Ok(out)
}

struct Equation {
    lhs: Side,
    rhs: Side,
    reversible: bool,
}

fn parse_equation(text: &str, loc: Loc) -> Result<Equation, ParseError> {
    let (pos, arrow, reversible) = if let Some(p) = text.find("<->") {
        (p, 3, true)
    } else if let Some(p) = text.find("->") {
        (p, 2, false)
    } else {
        return Err(loc.err("expected '<->' or '->'"));
    };
    if text[pos + arrow..].contains("->") {
        return Err(loc.at(pos + arrow).err("more than one arrow"));
    }
    Ok(Equation {
        lhs: parse_side(&text[..pos], loc)?,
        rhs: parse_side(&text[pos + arrow..], loc.at(pos + arrow))?,
        reversible,
    })
}

/// Net stoichiometric vector `RHS − LHS`, summing repeated species.
fn equation_vector(
    eq: &Equation,
    reg: &mut Registry,
    loc: Loc,
) -> Result<Vec<(usize, i64)>, ParseError> {
    let mut lhs: BTreeMap<usize, i64> = BTreeMap::new();
    let mut rhs: BTreeMap<usize, i64> = BTreeMap::new();
    for (side, map) in [(&eq.lhs, &mut lhs), (&eq.rhs, &mut rhs)] {
        for (name, c, l) in side {
            let i = reg.get_or_insert(name);
            let total = map.entry(i).or_insert(0);
            *total += c;
            if *total > MAX_COEFF {
                return Err(l.err(format!("total coefficient of {name} exceeds 2^31")));
            }
        }
    }
    for (name, _, l) in &eq.rhs {
        if lhs.contains_key(&reg.index[name]) {
            return Err(l.err(format!("species {name} appears on both sides")));
        }
    }
    let mut v: Vec<(usize, i64)> = lhs.into_iter().map(|(i, c)| (i, -c)).collect();
    v.extend(rhs);
    if v.is_empty() {
        return Err(loc.err("reaction has no species"));
    }
    Ok(v)
}

fn parse_rate(value: &str, loc: Loc) -> Result<f64, ParseError> {
    let v: f64 = value
        .trim()
        .parse()
        .map_err(|_| loc.err(format!("invalid rate '{}'", value.trim())))?;
    if !(v > 0.0 && v.is_finite()) {
        return Err(loc.err(format!("rate must be positive and finite, got {v}")));
    }
    Ok(v)
}

/// Parses `key=value` assignments separated by whitespace or commas.
fn parse_assignments(text: &str, loc: Loc) -> Result<Vec<(String, String, Loc)>, ParseError> {
    let mut out = Vec::new();
    let mut offset = 0;
    for piece in text.split([',', ' ', '\t']) {
        let l = loc.at(offset);
        offset += piece.len() + 1;
        if piece.is_empty() {
            continue;
        }
        let Some((k, v)) = piece.split_once('=') else {
            return Err(l.err(format!("expected key=value, found '{piece}'")));
        };
        out.push((k.to_string(), v.to_string(), l.at(k.len() + 1)));
    }
    Ok(out)
}

fn parse_rates(text: &str, reversible: bool, loc: Loc) -> Result<(f64, Option<f64>), ParseError> {
    let mut kf = None;
    let mut kr = None;
    for (key, value, l) in parse_assignments(text, loc)? {
        let slot = match (key.as_str(), reversible) {
            ("kf", true) | ("k", false) => &mut kf,
            ("kr", true) => &mut kr,
            _ => return Err(l.err(format!("unknown rate key '{key}'"))),
        };
        if slot.is_some() {
            return Err(l.err(format!("rate '{key}' given twice")));
        }
        *slot = Some(parse_rate(&value, l)?);
    }
    let kf = kf.unwrap_or(1.0);
    Ok((kf, reversible.then(|| kr.unwrap_or(1.0))))
}

/// Strips the comment and returns the content with its starting column.
fn content(line: &str) -> &str {
    match line.find('#') {
        Some(p) => &line[..p],
        None => line,
    }
}

/// Terms, rate and source location of one parsed reaction.
type ReactionLine = (Vec<(usize, i64)>, f64, Loc);

pub fn parse_network(text: &str) -> Result<NetworkFile, ParseError> {
    let mut reg = Registry::default();
    let mut reactions: Vec<ReactionLine> = Vec::new();
    let mut frozen_raw: Vec<(String, f64, Loc)> = Vec::new();
    let mut constraint_raw: Vec<(Equation, Loc)> = Vec::new();
    let mut declared = false;

    for (ln, raw) in text.lines().enumerate() {
        let line = content(raw);
        if line.trim().is_empty() {
            continue;
        }
        let indent = line.len() - line.trim_start().len();
        let loc = Loc {
            line: ln + 1,
            column: indent + 1,
        };
        let body = line.trim_start();

        if let Some(rest) = body.strip_prefix("species:") {
            if declared || !reg.names.is_empty() {
                return Err(loc.err("species must be declared once, before any reaction"));
            }
            declared = true;
            let mut offset = "species:".len();
            for name in rest.split([',', ' ', '\t']) {
                let l = loc.at(offset);
                offset += name.len() + 1;
                if name.is_empty() {
                    continue;
                }
                if !name.starts_with(is_name_start) || !name.chars().all(is_name_char) {
                    return Err(l.err(format!("invalid species name '{name}'")));
                }
                if reg.index.contains_key(name) {
                    return Err(l.err(format!("species {name} declared twice")));
                }
                reg.get_or_insert(name);
            }
        } else if let Some(rest) = body.strip_prefix("frozen:") {
            let l = loc.at("frozen:".len());
            for (name, value, vl) in parse_assignments(rest, l)? {
                let v = parse_rate(&value, vl).map_err(|_| {
                    vl.err(format!("frozen value for {name} must be a positive number"))
                })?;
                frozen_raw.push((name, v, vl));
            }
        } else if let Some(rest) = body.strip_prefix("constrained:") {
            let mut offset = "constrained:".len();
            for piece in rest.split(',') {
                let l = loc.at(offset);
                offset += piece.len() + 1;
                if piece.trim().is_empty() {
                    continue;
                }
                constraint_raw.push((parse_equation(piece, l)?, l));
            }
        } else {
            let (eq_text, rate_text) = match body.split_once(';') {
                Some((a, b)) => (a, Some(b)),
                None => (body, None),
            };
            let eq = parse_equation(eq_text, loc)?;
            let (kf, kr) = match rate_text {
                Some(r) => parse_rates(r, eq.reversible, loc.at(eq_text.len() + 1))?,
                None => (1.0, eq.reversible.then_some(1.0)),
            };
            if declared {
                for (name, _, l) in eq.lhs.iter().chain(&eq.rhs) {
                    if !reg.index.contains_key(name) {
                        return Err(l.err(format!("species {name} is not declared")));
                    }
                }
            }
            let v = equation_vector(&eq, &mut reg, loc)?;
            reactions.push((v.clone(), kf, loc));
            if let Some(kr) = kr {
                reactions.push((v.iter().map(|&(i, c)| (i, -c)).collect(), kr, loc));
            }
        }
    }

    let n = reg.names.len();
    let dense = |v: &[(usize, i64)]| {
        let mut out = vec![0; n];
        for &(i, c) in v {
            out[i] = c;
        }
        out
    };
    let mut seen: BTreeMap<Vec<i64>, usize> = BTreeMap::new();
    let mut list = Vec::with_capacity(reactions.len());
    let mut rates = Vec::with_capacity(reactions.len());
    for (v, k, loc) in &reactions {
        let d = dense(v);
        if let Some(&prev) = seen.get(&d) {
            return Err(loc.err(format!("duplicate reaction (first given on line {prev})")));
        }
        seen.insert(d.clone(), loc.line);
        list.push(Reaction::new(d));
        rates.push(*k);
    }
    if list.is_empty() {
        return Err(ParseError {
            line: text.lines().count().max(1),
            column: 1,
            message: "no reactions".into(),
        });
    }
    let network = ChemicalNetwork::new(reg.names.clone(), list).map_err(|e| ParseError {
        line: 1,
        column: 1,
        message: e.to_string(),
    })?;
    let rates = RateFunction::new(rates).map_err(|e| ParseError {
        line: 1,
        column: 1,
        message: e.to_string(),
    })?;

    let mut frozen = Vec::new();
    for (name, v, l) in frozen_raw {
        let Some(&i) = reg.index.get(&name) else {
            return Err(l.err(format!("unknown species {name}")));
        };
        if frozen.iter().any(|&(j, _)| j == i) {
            return Err(l.err(format!("species {name} frozen twice")));
        }
        frozen.push((i, v));
    }
    let mut constrained = Vec::new();
    for (eq, l) in constraint_raw {
        let k = resolve_reaction(&network, &reg.index, &eq, l)?;
        for idx in [Some(k), network.reverse_of(k)].into_iter().flatten() {
            if !constrained.contains(&idx) {
                constrained.push(idx);
            }
        }
    }
    constrained.sort_unstable();
    Ok(NetworkFile {
        network,
        rates,
        frozen,
        constrained,
    })
}

fn resolve_reaction(
    net: &ChemicalNetwork,
    index: &BTreeMap<String, usize>,
    eq: &Equation,
    loc: Loc,
) -> Result<usize, ParseError> {
    let mut v = vec![0; net.num_species()];
    for (side, sign) in [(&eq.lhs, -1), (&eq.rhs, 1)] {
        for (name, c, l) in side {
            let Some(&i) = index.get(name) else {
                return Err(l.err(format!("unknown species {name}")));
            };
            v[i] += sign * c;
        }
    }
    net.reaction_index(&v)
        .or_else(|| net.reaction_index(&v.iter().map(|x| -x).collect::<Vec<_>>()))
        .ok_or_else(|| loc.err("reaction is not in the network"))
}

/// Parses a reaction reference such as `B <-> C` against a network.
pub fn parse_reaction_ref(net: &ChemicalNetwork, text: &str) -> Result<usize, ParseError> {
    let loc = Loc { line: 1, column: 1 };
    let eq = parse_equation(text, loc)?;
    let index = net
        .species()
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), i))
        .collect();
    resolve_reaction(net, &index, &eq, loc)
}

/// Parses `A=1.0,B=2` against a network's species.
pub fn parse_species_values(
    net: &ChemicalNetwork,
    text: &str,
) -> Result<Vec<(usize, f64)>, ParseError> {
    let loc = Loc { line: 1, column: 1 };
    let mut out: Vec<(usize, f64)> = Vec::new();
    for (name, value, l) in parse_assignments(text, loc)? {
        let Some(i) = net.species_index(&name) else {
            return Err(l.err(format!("unknown species {name}")));
        };
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| l.err(format!("invalid number '{value}'")))?;
        if !(v >= 0.0 && v.is_finite()) {
            return Err(l.err(format!("value for {name} must be nonnegative and finite")));
        }
        if out.iter().any(|&(j, _)| j == i) {
            return Err(l.err(format!("species {name} given twice")));
        }
        out.push((i, v));
    }
    Ok(out)
}

/// Reaction as text, `LHS -> RHS`.
pub fn reaction_label(species: &[String], coeffs: &[i64]) -> String {
    let side = |sign: i64| {
        let terms: Vec<String> = coeffs
            .iter()
            .zip(species)
            .filter(|(&c, _)| c * sign > 0)
            .map(|(&c, s)| {
                if c.abs() == 1 {
                    s.clone()
                } else {
                    format!("{} {s}", c.abs())
                }
            })
            .collect();
        if terms.is_empty() {
            "0".to_string()
        } else {
            terms.join(" + ")
        }
    };
    format!("{} -> {}", side(-1), side(1))
}

/// Canonical text of a network file; parsing it gives the same file back.
pub struct Canonical<'a>(pub &'a NetworkFile);

impl fmt::Display for Canonical<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let file = self.0;
        let net = &file.network;
        writeln!(f, "species: {}", net.species().join(" "))?;
        for (k, r) in net.reactions().iter().enumerate() {
            let label = reaction_label(net.species(), r.coeffs());
            match net.reverse_of(k) {
                Some(rev) if rev > k => {
                    let (lhs, rhs) = label.split_once(" -> ").expect("label has an arrow");
                    writeln!(
                        f,
                        "{lhs} <-> {rhs} ; kf={} kr={}",
                        file.rates.get(k),
                        file.rates.get(rev)
                    )?;
                }
                Some(_) => {}
                None => writeln!(f, "{label} ; k={}", file.rates.get(k))?,
            }
        }
        if !file.frozen.is_empty() {
            let parts: Vec<String> = file
                .frozen
                .iter()
                .map(|&(i, v)| format!("{}={v}", net.species()[i]))
                .collect();
            writeln!(f, "frozen: {}", parts.join(", "))?;
        }
        let shown: Vec<String> = file
            .constrained
            .iter()
            .filter(|&&k| net.reverse_of(k).is_none_or(|r| r > k))
            .map(|&k| {
                let label = reaction_label(net.species(), net.reactions()[k].coeffs());
                if net.reverse_of(k).is_some() {
                    label.replacen(" -> ", " <-> ", 1)
                } else {
                    label
                }
            })
            .collect();
        if !shown.is_empty() {
            writeln!(f, "constrained: {}", shown.join(", "))?;
        }
        Ok(())
    }
}
