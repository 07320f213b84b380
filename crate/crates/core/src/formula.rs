//! Wilkinson-style model formulas.
//!
//! Grammar (whitespace is ignored, identifiers are `[A-Za-z_.][A-Za-z0-9_.]*`):
//!
//! ```text
//! formula := ident "~" term ("+" term)*
//! term    := ident
//!          | ident ":" ident
//!          | group "*" group
//! group   := ident | "(" ident ("+" ident)* ")"
//! ```
//!
//! `a*b` expands to `a + b + a:b`; `(a + b)*c` expands to `a + b + c + a:c + b:c`.
//! Only pairwise interactions exist. There is no term removal and no
//! transformation syntax.
//!
//! Parsing only records names and interaction structure. Whether a variable
//! is continuous or categorical is decided by [`validate_spec`] against a
//! dataset schema.

use std::collections::BTreeSet;
use std::fmt;

use indexmap::IndexMap;

use crate::error::{Error, Result};

/// Column type as seen by the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Continuous,
    Categorical,
}

/// Name → kind lookup used to resolve a parsed formula.
pub type Schema = IndexMap<String, VarKind>;

/// A parsed but untyped formula.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Formula {
    pub response: String,
    /// Main terms in order of first appearance.
    pub mains: Vec<String>,
    /// Pairwise interactions, each pair sorted lexicographically, in order of
    /// first appearance.
    pub interactions: Vec<(String, String)>,
}

impl Formula {
    /// Renders the formula using only `+` and `:`; parsing the result gives
    /// back the same formula.
    pub fn render(&self) -> String {
        let mut terms: Vec<String> = self.mains.clone();
        terms.extend(self.interactions.iter().map(|(a, b)| format!("{a}:{b}")));
        if terms.is_empty() {
            // An intercept-only model is written with an explicit constant.
            return format!("{} ~ 1", self.response);
        }
        format!("{} ~ {}", self.response, terms.join(" + "))
    }

    /// Every variable mentioned on the right-hand side.
    pub fn variables(&self) -> BTreeSet<&str> {
        let mut out: BTreeSet<&str> = self.mains.iter().map(String::as_str).collect();
        for (a, b) in &self.interactions {
            out.insert(a);
            out.insert(b);
        }
        out
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    One,
    Tilde,
    Plus,
    Colon,
    Star,
    LParen,
    RParen,
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok)>> {
    let mut out = Vec::new();
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        match c {
            c if c.is_whitespace() => {
                i += 1;
            }
            '~' => {
                out.push((pos, Tok::Tilde));
                i += 1;
            }
            '+' => {
                out.push((pos, Tok::Plus));
                i += 1;
            }
            ':' => {
                out.push((pos, Tok::Colon));
                i += 1;
            }
            '*' => {
                out.push((pos, Tok::Star));
                i += 1;
            }
            '(' => {
                out.push((pos, Tok::LParen));
                i += 1;
            }
            ')' => {
                out.push((pos, Tok::RParen));
                i += 1;
            }
            '1' if chars
                .get(i + 1)
                .map_or(true, |&(_, n)| !(n.is_ascii_alphanumeric() || n == '_' || n == '.')) =>
            {
                out.push((pos, Tok::One));
                i += 1;
            }
            c if c.is_ascii_alphabetic() || c == '_' || c == '.' => {
                let start = i;
                while i < chars.len()
                    && (chars[i].1.is_ascii_alphanumeric() || chars[i].1 == '_' || chars[i].1 == '.')
                {
                    i += 1;
                }
                let name: String = chars[start..i].iter().map(|&(_, c)| c).collect();
                out.push((pos, Tok::Ident(name)));
            }
            other => {
                return Err(Error::FormulaSyntax {
                    position: pos,
                    message: format!("unexpected character '{other}'"),
                })
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.end, |(p, _)| *p)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::FormulaSyntax {
            position: self.pos(),
            message: message.into(),
        })
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek() {
            Some(Tok::Ident(name)) => {
                let name = name.clone();
                self.at += 1;
                Ok(name)
            }
            Some(t) => {
                let t = format!("{t:?}");
                self.err(format!("expected variable name, found {t}"))
            }
            None => self.err("expected variable name, found end of input"),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if self.peek() == Some(&tok) {
            self.at += 1;
            Ok(())
        } else {
            self.err(format!("expected {what}"))
        }
    }

    /// `ident` or a parenthesized `+`-list of identifiers. Returns the names
    /// and whether the group was parenthesized.
    fn group(&mut self) -> Result<(Vec<String>, bool)> {
        if self.peek() == Some(&Tok::LParen) {
            self.at += 1;
            let mut names = vec![self.ident()?];
            while self.peek() == Some(&Tok::Plus) {
                self.at += 1;
                names.push(self.ident()?);
            }
            self.expect(Tok::RParen, "')'")?;
            Ok((names, true))
        } else {
            Ok((vec![self.ident()?], false))
        }
    }
}

#[derive(Default)]
struct TermSet {
    mains: Vec<String>,
    interactions: Vec<(String, String)>,
}

impl TermSet {
    fn add_main(&mut self, name: &str) {
        if !self.mains.iter().any(|m| m == name) {
            self.mains.push(name.to_string());
        }
    }

    fn add_interaction(&mut self, pair: (String, String)) {
        if !self.interactions.contains(&pair) {
            self.interactions.push(pair);
        }
    }
}

fn ordered(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

/// Parses a formula string.
///
/// Terms written explicitly twice (`x + x`, `a:b + b:a`) are rejected as
/// duplicates; overlap produced by `*` expansion is merged silently.
pub fn parse_formula(text: &str) -> Result<Formula> {
    let toks = tokenize(text)?;
    let mut p = Parser {
        toks,
        at: 0,
        end: text.len(),
    };
    let response = p.ident()?;
    p.expect(Tok::Tilde, "'~'")?;

    let mut terms = TermSet::default();
    let mut explicit_mains: BTreeSet<String> = BTreeSet::new();
    let mut explicit_pairs: BTreeSet<(String, String)> = BTreeSet::new();
    let mut saw_constant = false;

    loop {
        let term_pos = p.pos();
        if p.peek() == Some(&Tok::One) {
            p.at += 1;
            if saw_constant {
                return Err(Error::Spec(format!("duplicate term '1' at position {term_pos}")));
            }
            saw_constant = true;
        } else {
            let (left, left_group) = p.group()?;
            match p.peek() {
                Some(Tok::Colon) => {
                    if left_group {
                        return p.err("':' requires single variables on both sides");
                    }
                    p.at += 1;
                    let right_pos = p.pos();
                    let (right, right_group) = p.group()?;
                    if right_group {
                        return Err(Error::FormulaSyntax {
                            position: right_pos,
                            message: "':' requires single variables on both sides".into(),
                        });
                    }
                    let (a, b) = (&left[0], &right[0]);
                    if a == b {
                        return Err(Error::Spec(format!("self-interaction '{a}:{b}'")));
                    }
                    let pair = ordered(a, b);
                    if !explicit_pairs.insert(pair.clone()) {
                        return Err(Error::Spec(format!(
                            "duplicate term '{}:{}'",
                            pair.0, pair.1
                        )));
                    }
                    terms.add_interaction(pair);
                }
                Some(Tok::Star) => {
                    p.at += 1;
                    let (right, _) = p.group()?;
                    for name in left.iter().chain(right.iter()) {
                        terms.add_main(name);
                    }
                    for a in &left {
                        for b in &right {
                            if a == b {
                                return Err(Error::Spec(format!("self-interaction '{a}*{b}'")));
                            }
                            terms.add_interaction(ordered(a, b));
                        }
                    }
                }
                _ => {
                    if left_group {
                        return Err(Error::FormulaSyntax {
                            position: term_pos,
                            message: "a parenthesized group must be combined with '*'".into(),
                        });
                    }
                    let name = &left[0];
                    if !explicit_mains.insert(name.clone()) {
                        return Err(Error::Spec(format!("duplicate term '{name}'")));
                    }
                    terms.add_main(name);
                }
            }
        }
        match p.peek() {
            Some(Tok::Plus) => p.at += 1,
            None => break,
            Some(_) => return p.err("expected '+' or end of formula"),
        }
    }

    let formula = Formula {
        response,
        mains: terms.mains,
        interactions: terms.interactions,
    };
    if formula.variables().contains(formula.response.as_str()) {
        return Err(Error::Spec(format!(
            "response '{}' appears on the right-hand side",
            formula.response
        )));
    }
    Ok(formula)
}

/// A formula resolved against a schema, in canonical term order.
///
/// The intercept is always present. Continuous and categorical mains are
/// each sorted lexicographically; cat-cont pairs are `(continuous,
/// categorical)` sorted lexicographically; cat-cat pairs are stored with the
/// lexicographically smaller variable first.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct ModelSpec {
    pub response: String,
    pub continuous: Vec<String>,
    pub categorical: Vec<String>,
    pub cat_cont: Vec<(String, String)>,
    pub cat_cat: Vec<(String, String)>,
}

impl ModelSpec {
    pub fn continuous_index(&self, name: &str) -> Option<usize> {
        self.continuous.iter().position(|v| v == name)
    }

    pub fn categorical_index(&self, name: &str) -> Option<usize> {
        self.categorical.iter().position(|v| v == name)
    }

    /// Canonical formula text for this spec.
    pub fn render(&self) -> String {
        let mut terms: Vec<String> = Vec::new();
        terms.extend(self.continuous.iter().cloned());
        terms.extend(self.categorical.iter().cloned());
        terms.extend(self.cat_cont.iter().map(|(x, c)| format!("{x}:{c}")));
        terms.extend(self.cat_cat.iter().map(|(a, b)| format!("{a}:{b}")));
        if terms.is_empty() {
            return format!("{} ~ 1", self.response);
        }
        format!("{} ~ {}", self.response, terms.join(" + "))
    }

    /// True when every term of `other` is also a term of `self` (same
    /// response).
    pub fn contains(&self, other: &ModelSpec) -> bool {
        self.response == other.response
            && other.continuous.iter().all(|t| self.continuous.contains(t))
            && other.categorical.iter().all(|t| self.categorical.contains(t))
            && other.cat_cont.iter().all(|t| self.cat_cont.contains(t))
            && other.cat_cat.iter().all(|t| self.cat_cat.contains(t))
    }

    pub fn term_count(&self) -> usize {
        1 + self.continuous.len() + self.categorical.len() + self.cat_cont.len() + self.cat_cat.len()
    }

    /// Whether `x` has at least one categorical modifier.
    pub fn is_cat_modified(&self, x: &str) -> bool {
        self.cat_cont.iter().any(|(c, _)| c == x)
    }
}

/// Result of [`validate_spec`]: the resolved spec plus any hierarchy repairs
/// that were made.
#[derive(Debug, Clone)]
pub struct Validated {
    pub spec: ModelSpec,
    pub warnings: Vec<String>,
}

/// Resolves variable kinds, classifies interactions and enforces hierarchy.
///
/// Interactions whose members are missing as main terms get those mains
/// added, with a warning recorded. Continuous-by-continuous interactions and
/// categorical responses are rejected.
pub fn validate_spec(formula: &Formula, schema: &Schema) -> Result<Validated> {
    let kind_of = |name: &str| -> Result<VarKind> {
        schema
            .get(name)
            .copied()
            .ok_or_else(|| Error::Spec(format!("unknown variable '{name}'")))
    };

    match kind_of(&formula.response)? {
        VarKind::Continuous => {}
        VarKind::Categorical => {
            return Err(Error::Spec(format!(
                "response '{}' is categorical; a numeric response is required",
                formula.response
            )))
        }
    }

    let mut continuous: BTreeSet<String> = BTreeSet::new();
    let mut categorical: BTreeSet<String> = BTreeSet::new();
    for name in &formula.mains {
        match kind_of(name)? {
            VarKind::Continuous => continuous.insert(name.clone()),
            VarKind::Categorical => categorical.insert(name.clone()),
        };
    }

    let mut warnings = Vec::new();
    let mut cat_cont: BTreeSet<(String, String)> = BTreeSet::new();
    let mut cat_cat: BTreeSet<(String, String)> = BTreeSet::new();
    for (a, b) in &formula.interactions {
        let (ka, kb) = (kind_of(a)?, kind_of(b)?);
        for (name, kind) in [(a, ka), (b, kb)] {
            let present = match kind {
                VarKind::Continuous => continuous.contains(name),
                VarKind::Categorical => categorical.contains(name),
            };
            if !present {
                warnings.push(format!(
                    "interaction '{a}:{b}' has no main term '{name}'; adding it"
                ));
                match kind {
                    VarKind::Continuous => continuous.insert(name.clone()),
                    VarKind::Categorical => categorical.insert(name.clone()),
                };
            }
        }
        match (ka, kb) {
            (VarKind::Continuous, VarKind::Continuous) => {
                return Err(Error::Spec(format!(
                    "continuous-by-continuous interaction '{a}:{b}' is not supported"
                )))
            }
            (VarKind::Continuous, VarKind::Categorical) => {
                cat_cont.insert((a.clone(), b.clone()));
            }
            (VarKind::Categorical, VarKind::Continuous) => {
                cat_cont.insert((b.clone(), a.clone()));
            }
            (VarKind::Categorical, VarKind::Categorical) => {
                cat_cat.insert(ordered(a, b));
            }
        }
    }

    Ok(Validated {
        spec: ModelSpec {
            response: formula.response.clone(),
            continuous: continuous.into_iter().collect(),
            categorical: categorical.into_iter().collect(),
            cat_cont: cat_cont.into_iter().collect(),
            cat_cat: cat_cat.into_iter().collect(),
        },
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema(entries: &[(&str, VarKind)]) -> Schema {
        entries.iter().map(|(n, k)| (n.to_string(), *k)).collect()
    }

    fn pair(a: &str, b: &str) -> (String, String) {
        (a.to_string(), b.to_string())
    }

    #[test]
    fn main_only_formula() {
        let f = parse_formula("y ~ x + race").unwrap();
        assert_eq!(f.response, "y");
        assert_eq!(f.mains, vec!["x", "race"]);
        assert!(f.interactions.is_empty());
    }

    #[test]
    fn star_expands_to_mains_and_interaction() {
        let f = parse_formula("y ~ x*race").unwrap();
        assert_eq!(f.mains, vec!["x", "race"]);
        assert_eq!(f.interactions, vec![pair("race", "x")]);
    }

    #[test]
    fn group_star_expands_every_member() {
        let f = parse_formula("y ~ (x1 + x2 + sex)*race").unwrap();
        assert_eq!(f.mains, vec!["x1", "x2", "sex", "race"]);
        assert_eq!(
            f.interactions,
            vec![pair("race", "x1"), pair("race", "x2"), pair("race", "sex")]
        );
    }

    #[test]
    fn groups_on_both_sides() {
        let f = parse_formula("y ~ (x1 + x2)*(a + b) + a*b").unwrap();
        assert_eq!(f.mains, vec!["x1", "x2", "a", "b"]);
        assert_eq!(f.interactions.len(), 5);
    }

    #[test]
    fn intercept_only() {
        let f = parse_formula("y ~ 1").unwrap();
        assert!(f.mains.is_empty());
        assert_eq!(f.render(), "y ~ 1");
    }

    #[test]
    fn syntax_errors_carry_position() {
        match parse_formula("y ~ x + + z") {
            Err(Error::FormulaSyntax { position, .. }) => assert_eq!(position, 8),
            other => panic!("unexpected {other:?}"),
        }
        match parse_formula("y x") {
            Err(Error::FormulaSyntax { position, .. }) => assert_eq!(position, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_formula("y ~ x $ z"),
            Err(Error::FormulaSyntax { position: 6, .. })
        ));
        assert!(matches!(
            parse_formula("y ~ (a + b)"),
            Err(Error::FormulaSyntax { .. })
        ));
        assert!(matches!(
            parse_formula("y ~ x +"),
            Err(Error::FormulaSyntax { position: 7, .. })
        ));
    }

    #[test]
    fn rejects_duplicates_self_interactions_and_response_on_rhs() {
        assert!(matches!(parse_formula("y ~ x + x"), Err(Error::Spec(_))));
        assert!(matches!(parse_formula("y ~ a:b + b:a"), Err(Error::Spec(_))));
        assert!(matches!(parse_formula("y ~ x:x"), Err(Error::Spec(_))));
        assert!(matches!(parse_formula("y ~ (x + r)*r"), Err(Error::Spec(_))));
        assert!(matches!(parse_formula("y ~ x + y"), Err(Error::Spec(_))));
    }

    #[test]
    fn star_overlap_is_merged() {
        let f = parse_formula("y ~ x*race + race*sex").unwrap();
        assert_eq!(f.mains, vec!["x", "race", "sex"]);
        assert_eq!(f.interactions.len(), 2);
    }

    #[test]
    fn hierarchy_is_completed_with_warning() {
        let s = schema(&[
            ("y", VarKind::Continuous),
            ("x", VarKind::Continuous),
            ("race", VarKind::Categorical),
        ]);
        let f = parse_formula("y ~ race + x:race").unwrap();
        let v = validate_spec(&f, &s).unwrap();
        assert_eq!(v.spec.continuous, vec!["x"]);
        assert_eq!(v.spec.cat_cont, vec![pair("x", "race")]);
        assert_eq!(v.warnings.len(), 1);
    }

    #[test]
    fn continuous_pairs_are_rejected() {
        let s = schema(&[
            ("y", VarKind::Continuous),
            ("x1", VarKind::Continuous),
            ("x2", VarKind::Continuous),
        ]);
        let f = parse_formula("y ~ x1*x2").unwrap();
        assert!(matches!(validate_spec(&f, &s), Err(Error::Spec(_))));
    }

    #[test]
    fn two_way_anova_classification() {
        let s = schema(&[
            ("y", VarKind::Continuous),
            ("race", VarKind::Categorical),
            ("sex", VarKind::Categorical),
        ]);
        let f = parse_formula("y ~ race + sex + race:sex").unwrap();
        let v = validate_spec(&f, &s).unwrap();
        assert_eq!(v.spec.categorical, vec!["race", "sex"]);
        assert_eq!(v.spec.cat_cat, vec![pair("race", "sex")]);
        assert!(v.warnings.is_empty());
    }

    #[test]
    fn unknown_variable_and_categorical_response() {
        let s = schema(&[("y", VarKind::Categorical), ("g", VarKind::Categorical)]);
        assert!(validate_spec(&parse_formula("y ~ g").unwrap(), &s).is_err());
        let s = schema(&[("y", VarKind::Continuous)]);
        assert!(validate_spec(&parse_formula("y ~ z").unwrap(), &s).is_err());
    }

    #[test]
    fn canonical_order_is_independent_of_input_order() {
        let s = schema(&[
            ("y", VarKind::Continuous),
            ("b", VarKind::Continuous),
            ("a", VarKind::Continuous),
            ("r", VarKind::Categorical),
            ("q", VarKind::Categorical),
        ]);
        let v1 = validate_spec(&parse_formula("y ~ b*r + a + q*r").unwrap(), &s).unwrap();
        let v2 = validate_spec(&parse_formula("y ~ r:q + q + a + r*b").unwrap(), &s).unwrap();
        assert_eq!(v1.spec, v2.spec);
        assert_eq!(v1.spec.render(), "y ~ a + b + q + r + b:r + q:r");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn term() -> impl Strategy<Value = String> {
            let var = prop::sample::select(vec!["a", "b", "c", "x1", "x2"]);
            prop_oneof![
                var.clone().prop_map(|v| v.to_string()),
                (var.clone(), var.clone()).prop_map(|(a, b)| format!("{a}:{b}")),
                (var.clone(), var.clone()).prop_map(|(a, b)| format!("{a}*{b}")),
                (prop::collection::vec(var.clone(), 1..3), var)
                    .prop_map(|(g, b)| format!("({})*{b}", g.join(" + "))),
            ]
        }

        proptest! {
            #[test]
            fn parse_render_parse_is_stable(terms in prop::collection::vec(term(), 1..5)) {
                let text = format!("y ~ {}", terms.join(" + "));
                if let Ok(f) = parse_formula(&text) {
                    let again = parse_formula(&f.render()).unwrap();
                    prop_assert_eq!(&again, &f);
                    prop_assert_eq!(parse_formula(&again.render()).unwrap(), again);
                }
            }

            #[test]
            fn star_yields_exactly_three_terms(a in "[a-m][a-z0-9]{0,3}", b in "[n-w][a-z0-9]{0,3}") {
                let f = parse_formula(&format!("y ~ {a}*{b}")).unwrap();
                prop_assert_eq!(f.mains.clone(), vec![a.clone(), b.clone()]);
                prop_assert_eq!(f.interactions.clone(), vec![(a, b)]);
            }
        }
    }
}
