//! The line-oriented text formats and the element syntax used on the
//! command line.
//!
//! Model files (`HSMODEL 1`):
//! ```text
//! HSMODEL 1
//! N 2
//! ATOMS a b c
//! Q {b,c}|{a,b,c} 1
//! ```
//! Sets list atoms in declaration order, comma-separated, without spaces.
//! Absent tuples mean twist 0; serialization emits tuples in canonical
//! order and omits zeros. Lines starting with `#` are comments.
//!
//! Solution files (`HSSOL 1`) carry a `MODEL <path or sha256:...>`
//! reference, a `DOMAIN` line, and one `F`/`L` line per domain block.
//! Embedding files (`HSEMB 1`) carry `PI a->x ...` plus sparse `D`/`E`
//! offset lines, and are interpreted against externally supplied source
//! and target models.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::group::GroupElem;
use crate::index::{AtomId, Block};
use crate::model::{Element, Model, StalkPoint};
use crate::solution::Solution;

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

/// Atoms of a set, listed in the model's declaration order.
fn format_atom_set(model: &Model, atoms: &[AtomId]) -> String {
    let ordered = model.order_atoms(atoms.iter().cloned());
    let mut s = String::from("{");
    for (i, a) in ordered.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        s.push_str(a.token());
    }
    s.push('}');
    s
}

fn format_block(model: &Model, b: &Block) -> String {
    format_atom_set(model, b.atoms())
}

fn format_support(model: &Model, g: &GroupElem) -> String {
    // Blocks in declaration-lexicographic order.
    let mut blocks: Vec<&Block> = g.support().iter().collect();
    blocks.sort_by_key(|b| {
        b.atoms()
            .iter()
            .map(|a| model.atom_position(a).unwrap_or(usize::MAX))
            .collect::<Vec<_>>()
    });
    let mut s = String::from("{");
    for (i, b) in blocks.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        s.push_str(&format_block(model, b));
    }
    s.push('}');
    s
}

fn parse_atom_set(text: &str, line: usize) -> Result<Vec<AtomId>> {
    let inner = text
        .strip_prefix('{')
        .and_then(|t| t.strip_suffix('}'))
        .ok_or_else(|| parse_err(line, format!("expected a braced set, got {text:?}")))?;
    if inner.is_empty() {
        return Ok(Vec::new());
    }
    inner
        .split(',')
        .map(|t| AtomId::new(t).map_err(|e| parse_err(line, e.to_string())))
        .collect()
}

fn parse_block(text: &str, line: usize) -> Result<Block> {
    Block::new(parse_atom_set(text, line)?).map_err(|e| parse_err(line, e.to_string()))
}

/// Splits a `{{a,b},{c,d}}` support into its top-level braced items.
fn parse_support(text: &str, line: usize) -> Result<GroupElem> {
    let inner = text
        .strip_prefix('{')
        .and_then(|t| t.strip_suffix('}'))
        .ok_or_else(|| parse_err(line, format!("expected a braced support set, got {text:?}")))?;
    if inner.is_empty() {
        return Ok(GroupElem::zero());
    }
    let mut blocks = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    for (i, c) in inner.char_indices() {
        match c {
            '{' => depth += 1,
            '}' => {
                depth = depth
                    .checked_sub(1)
                    .ok_or_else(|| parse_err(line, "unbalanced braces in support set"))?;
            }
            ',' if depth == 0 => {
                blocks.push(parse_block(&inner[start..i], line)?);
                start = i + 1;
            }
            _ => {}
        }
    }
    if depth != 0 {
        return Err(parse_err(line, "unbalanced braces in support set"));
    }
    blocks.push(parse_block(&inner[start..], line)?);
    Ok(GroupElem::from_blocks(blocks))
}

/// Non-comment, non-blank lines with their 1-based numbers.
fn content_lines(text: &str) -> Vec<(usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .collect()
}

/// Canonical text for a model: header, arity, atoms, then the twisted
/// tuples in canonical order.
pub fn serialize_model(model: &Model) -> String {
    let mut out = String::from("HSMODEL 1\n");
    let _ = writeln!(out, "N {}", model.arity());
    let mut atoms_line = String::from("ATOMS");
    for a in model.atoms() {
        atoms_line.push(' ');
        atoms_line.push_str(a.token());
    }
    out.push_str(&atoms_line);
    out.push('\n');
    for t in model.compatible_tuples() {
        if model.twist(&t) {
            let _ = writeln!(
                out,
                "Q {}|{} 1",
                format_block(model, t.v()),
                format_atom_set(model, t.w())
            );
        }
    }
    out
}

/// Parses an `HSMODEL 1` document; syntax errors carry line numbers and
/// semantic defects are reported through model validation.
pub fn parse_model(text: &str) -> Result<Model> {
    let lines = content_lines(text);
    let mut iter = lines.iter();

    let (ln, header) = iter.next().ok_or_else(|| parse_err(1, "empty document"))?;
    if header.trim() != "HSMODEL 1" {
        return Err(parse_err(*ln, "expected header `HSMODEL 1`"));
    }

    let (ln, n_line) = iter
        .next()
        .ok_or_else(|| parse_err(*ln, "missing `N <n>` line"))?;
    let n: usize = n_line
        .strip_prefix("N ")
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| parse_err(*ln, "expected `N <arity>`"))?;

    let (ln, atoms_line) = iter
        .next()
        .ok_or_else(|| parse_err(*ln, "missing `ATOMS ...` line"))?;
    let rest = atoms_line
        .strip_prefix("ATOMS")
        .ok_or_else(|| parse_err(*ln, "expected `ATOMS <a1> <a2> ...`"))?;
    let mut atoms = Vec::new();
    for token in rest.split_whitespace() {
        atoms.push(AtomId::new(token).map_err(|e| parse_err(*ln, e.to_string()))?);
    }

    let mut twists = BTreeSet::new();
    for (ln, line) in iter {
        let rest = line
            .strip_prefix("Q ")
            .ok_or_else(|| parse_err(*ln, format!("unexpected line {line:?}")))?;
        let mut parts = rest.split_whitespace();
        let tuple_text = parts
            .next()
            .ok_or_else(|| parse_err(*ln, "expected `Q <v>|<w> <0|1>`"))?;
        let value = parts
            .next()
            .ok_or_else(|| parse_err(*ln, "missing twist value"))?;
        if parts.next().is_some() {
            return Err(parse_err(*ln, "trailing tokens on Q line"));
        }
        let (v_text, w_text) = tuple_text
            .split_once('|')
            .ok_or_else(|| parse_err(*ln, "expected `<v>|<w>` in Q line"))?;
        let v = parse_block(v_text, *ln)?;
        let w = parse_atom_set(w_text, *ln)?;
        let tuple =
            crate::index::CompTuple::new(v, w).map_err(|e| parse_err(*ln, e.to_string()))?;
        match value {
            "1" => {
                twists.insert(tuple);
            }
            "0" => {}
            other => {
                return Err(parse_err(
                    *ln,
                    format!("twist value must be 0 or 1, got {other:?}"),
                ))
            }
        }
    }

    Model::new(atoms, n, twists)
}

/// The canonical content hash reference for a model.
pub fn model_hash(model: &Model) -> String {
    let mut hasher = Sha256::new();
    hasher.update(serialize_model(model).as_bytes());
    format!("sha256:{:x}", hasher.finalize())
}

/// Canonical text for a solution. `model_ref` is stored verbatim on the
/// `MODEL` line; use a path or [`model_hash`].
pub fn serialize_solution(sol: &Solution, model_ref: &str) -> String {
    let model = sol.model();
    let mut out = String::from("HSSOL 1\n");
    let _ = writeln!(out, "MODEL {model_ref}");
    let domain: Vec<&Block> = {
        let mut v: Vec<&Block> = sol.domain().iter().collect();
        v.sort_by_key(|b| {
            b.atoms()
                .iter()
                .map(|a| model.atom_position(a).unwrap_or(usize::MAX))
                .collect::<Vec<_>>()
        });
        v
    };
    let mut domain_line = String::from("DOMAIN");
    for b in &domain {
        domain_line.push(' ');
        domain_line.push_str(&format_block(model, b));
    }
    out.push_str(&domain_line);
    out.push('\n');
    for b in &domain {
        let _ = writeln!(
            out,
            "F {} = {}",
            format_block(model, b),
            format_support(model, &sol.gamma_at(b))
        );
    }
    for b in &domain {
        let _ = writeln!(
            out,
            "L {} = {}",
            format_block(model, b),
            if sol.ell_at(b) { 1 } else { 0 }
        );
    }
    out
}

/// The `MODEL` reference of a solution document, for resolving the model
/// before a full parse.
pub fn solution_model_ref(text: &str) -> Result<String> {
    let lines = content_lines(text);
    let mut iter = lines.iter();
    let (ln, header) = iter.next().ok_or_else(|| parse_err(1, "empty document"))?;
    if header.trim() != "HSSOL 1" {
        return Err(parse_err(*ln, "expected header `HSSOL 1`"));
    }
    let (ln, model_line) = iter
        .next()
        .ok_or_else(|| parse_err(*ln, "missing `MODEL <ref>` line"))?;
    model_line
        .strip_prefix("MODEL ")
        .map(|s| s.trim().to_string())
        .ok_or_else(|| parse_err(*ln, "expected `MODEL <path or sha256:...>`"))
}

/// Parses an `HSSOL 1` document against its model. A `sha256:` model
/// reference is checked against the model's canonical hash.
pub fn parse_solution(text: &str, model: &Model) -> Result<Solution> {
    let lines = content_lines(text);
    let mut iter = lines.iter().peekable();

    let (ln, header) = iter.next().ok_or_else(|| parse_err(1, "empty document"))?;
    if header.trim() != "HSSOL 1" {
        return Err(parse_err(*ln, "expected header `HSSOL 1`"));
    }
    let (ln, model_line) = iter
        .next()
        .ok_or_else(|| parse_err(*ln, "missing `MODEL <ref>` line"))?;
    let model_ref = model_line
        .strip_prefix("MODEL ")
        .map(str::trim)
        .ok_or_else(|| parse_err(*ln, "expected `MODEL <path or sha256:...>`"))?;
    if model_ref.starts_with("sha256:") && model_ref != model_hash(model) {
        return Err(Error::ModelRefMismatch(model_ref.to_string()));
    }

    let (ln, domain_line) = iter
        .next()
        .ok_or_else(|| parse_err(*ln, "missing `DOMAIN` line"))?;
    let rest = domain_line
        .strip_prefix("DOMAIN")
        .ok_or_else(|| parse_err(*ln, "expected `DOMAIN <block> ...`"))?;
    let mut domain = BTreeSet::new();
    for token in rest.split_whitespace() {
        domain.insert(parse_block(token, *ln)?);
    }

    let mut gamma = BTreeMap::new();
    let mut ell = BTreeSet::new();
    for (ln, line) in iter {
        let (kind, rest) = line
            .split_once(' ')
            .ok_or_else(|| parse_err(*ln, format!("unexpected line {line:?}")))?;
        let (lhs, rhs) = rest
            .split_once(" = ")
            .ok_or_else(|| parse_err(*ln, "expected `<block> = <value>`"))?;
        let b = parse_block(lhs.trim(), *ln)?;
        match kind {
            "F" => {
                let g = parse_support(rhs.trim(), *ln)?;
                if !g.is_zero() {
                    gamma.insert(b, g);
                }
            }
            "L" => match rhs.trim() {
                "1" => {
                    ell.insert(b);
                }
                "0" => {}
                other => {
                    return Err(parse_err(
                        *ln,
                        format!("L value must be 0 or 1, got {other:?}"),
                    ))
                }
            },
            other => return Err(parse_err(*ln, format!("unexpected directive {other:?}"))),
        }
    }

    Solution::new(model.clone(), domain, gamma, ell)
}

/// Canonical text for an embedding: the full atom map plus sparse offset
/// lines, zeros omitted.
pub fn serialize_embedding(f: &Embedding) -> String {
    let source = f.source();
    let target = f.target();
    let mut out = String::from("HSEMB 1\n");
    let mut pi_line = String::from("PI");
    for a in source.atoms() {
        let image = f.map_atom(a).expect("total atom map");
        pi_line.push(' ');
        pi_line.push_str(a.token());
        pi_line.push_str("->");
        pi_line.push_str(image.token());
    }
    out.push_str(&pi_line);
    out.push('\n');
    for u in source.blocks() {
        let d = f.delta_at(&u);
        if !d.is_zero() {
            let _ = writeln!(
                out,
                "D {} = {}",
                format_block(source, &u),
                format_support(target, &d)
            );
        }
    }
    for v in source.blocks() {
        if f.eps_at(&v) {
            let _ = writeln!(out, "E {} = 1", format_block(source, &v));
        }
    }
    out
}

/// Parses an `HSEMB 1` document against the given source and target models.
pub fn parse_embedding(text: &str, source: &Model, target: &Model) -> Result<Embedding> {
    let lines = content_lines(text);
    let mut iter = lines.iter();

    let (ln, header) = iter.next().ok_or_else(|| parse_err(1, "empty document"))?;
    if header.trim() != "HSEMB 1" {
        return Err(parse_err(*ln, "expected header `HSEMB 1`"));
    }
    let (ln, pi_line) = iter
        .next()
        .ok_or_else(|| parse_err(*ln, "missing `PI` line"))?;
    let rest = pi_line
        .strip_prefix("PI")
        .ok_or_else(|| parse_err(*ln, "expected `PI a->x ...`"))?;
    let mut atom_map = BTreeMap::new();
    for pair in rest.split_whitespace() {
        let (from, to) = pair
            .split_once("->")
            .ok_or_else(|| parse_err(*ln, format!("expected `a->x`, got {pair:?}")))?;
        let from = AtomId::new(from).map_err(|e| parse_err(*ln, e.to_string()))?;
        let to = AtomId::new(to).map_err(|e| parse_err(*ln, e.to_string()))?;
        if atom_map.insert(from, to).is_some() {
            return Err(parse_err(*ln, "repeated source atom in PI line"));
        }
    }

    let mut delta = BTreeMap::new();
    let mut eps = BTreeSet::new();
    for (ln, line) in iter {
        let (kind, rest) = line
            .split_once(' ')
            .ok_or_else(|| parse_err(*ln, format!("unexpected line {line:?}")))?;
        let (lhs, rhs) = rest
            .split_once(" = ")
            .ok_or_else(|| parse_err(*ln, "expected `<block> = <value>`"))?;
        let b = parse_block(lhs.trim(), *ln)?;
        match kind {
            "D" => {
                let g = parse_support(rhs.trim(), *ln)?;
                if !g.is_zero() {
                    delta.insert(b, g);
                }
            }
            "E" => match rhs.trim() {
                "1" => {
                    eps.insert(b);
                }
                "0" => {}
                other => {
                    return Err(parse_err(
                        *ln,
                        format!("E value must be 0 or 1, got {other:?}"),
                    ))
                }
            },
            other => return Err(parse_err(*ln, format!("unexpected directive {other:?}"))),
        }
    }

    Embedding::new(source.clone(), target.clone(), atom_map, delta, eps)
}

/// Canonical text for a tuple element, using the prefixes accepted by
/// [`parse_element`].
pub fn serialize_element(e: &Element, model: &Model) -> String {
    match e {
        Element::Atom(a) => format!("atom:{}", a.token()),
        Element::Block(b) => format!("block:{}", format_block(model, b)),
        Element::Bit(b) => format!("h:{}", if *b { 1 } else { 0 }),
        Element::Group(g) => format!("g:{}", format_support(model, g)),
        Element::Point(StalkPoint::GStar { block, offset }) => format!(
            "gs:{}+{}",
            format_block(model, block),
            format_support(model, offset)
        ),
        Element::Point(StalkPoint::HStar { block, bit }) => format!(
            "hs:{}+{}",
            format_block(model, block),
            if *bit { 1 } else { 0 }
        ),
    }
}

/// Parses one element: `atom:a`, `block:{a,b}`, `h:0`, `g:{{a,b}}`,
/// `gs:{a,b}+{{c,d}}`, or `hs:{a,b}+1`. The element must belong to the
/// given model.
pub fn parse_element(text: &str, model: &Model) -> Result<Element> {
    let (kind, rest) = text.split_once(':').ok_or_else(|| {
        Error::BadConfiguration(format!("element {text:?} is missing its sort prefix"))
    })?;
    let e = match kind {
        "atom" => Element::Atom(AtomId::new(rest)?),
        "block" => Element::Block(parse_block(rest, 0)?),
        "h" => Element::Bit(parse_bit(rest)?),
        "g" => Element::Group(parse_support(rest, 0)?),
        "gs" => {
            let (block_text, offset_text) = rest.split_once('+').ok_or_else(|| {
                Error::BadConfiguration("expected `gs:<block>+<support>`".to_string())
            })?;
            Element::Point(StalkPoint::g_star(
                parse_block(block_text, 0)?,
                parse_support(offset_text, 0)?,
            ))
        }
        "hs" => {
            let (block_text, bit_text) = rest
                .split_once('+')
                .ok_or_else(|| Error::BadConfiguration("expected `hs:<block>+<0|1>`".to_string()))?;
            Element::Point(StalkPoint::h_star(
                parse_block(block_text, 0)?,
                parse_bit(bit_text)?,
            ))
        }
        other => {
            return Err(Error::BadConfiguration(format!(
                "unknown element sort prefix {other:?}"
            )))
        }
    };
    if !model.contains_element(&e) {
        return Err(Error::NotInModel { what: "element" });
    }
    Ok(e)
}

fn parse_bit(text: &str) -> Result<bool> {
    match text {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(Error::BadConfiguration(format!(
            "expected a bit 0 or 1, got {other:?}"
        ))),
    }
}

/// Parses a semicolon-separated tuple of elements.
pub fn parse_tuple(text: &str, model: &Model) -> Result<Vec<Element>> {
    text.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_element(s.trim(), model))
        .collect()
}

pub fn serialize_tuple(tuple: &[Element], model: &Model) -> String {
    tuple
        .iter()
        .map(|e| serialize_element(e, model))
        .collect::<Vec<_>>()
        .join(";")
}
