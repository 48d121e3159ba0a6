//! Immutable domain types shared by every other module: atoms, literals,
//! exact probabilities, CP-laws and validated CP-theories.
//!
//! Every probability in the crate is a [`Rational`]; no floating-point value
//! takes part in any computation whose result is compared.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Mul, Sub};

use fixedbitset::FixedBitSet;
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Position-independent identity of a law inside its theory.
pub type LawId = u32;

// ---------------------------------------------------------------------------
// Rational
// ---------------------------------------------------------------------------

/// Exact rational number, always kept in lowest terms with a positive
/// denominator.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rational(BigRational);

impl Rational {
    /// Panics when `denominator` is zero.
    pub fn new(numerator: i64, denominator: i64) -> Self {
        assert!(denominator != 0, "zero denominator");
        Rational(BigRational::new(numerator.into(), denominator.into()))
    }

    pub fn zero() -> Self {
        Rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Rational(BigRational::one())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_one()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    /// Parses `"0.9"`, `"1"` or `"9/10"` into an exact value.
    pub fn from_decimal(text: &str) -> Result<Self> {
        let bad = || Error::Numeral(text.to_string());
        let digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
        let text_trimmed = text.trim();
        if let Some((num, den)) = text_trimmed.split_once('/') {
            if !digits(num) || !digits(den) {
                return Err(bad());
            }
            let num: BigInt = num.parse().map_err(|_| bad())?;
            let den: BigInt = den.parse().map_err(|_| bad())?;
            if den.is_zero() {
                return Err(bad());
            }
            return Ok(Rational(BigRational::new(num, den)));
        }
        let (int_part, frac_part) = match text_trimmed.split_once('.') {
            Some((i, f)) => (i, f),
            None => (text_trimmed, ""),
        };
        if !digits(int_part) || (text_trimmed.contains('.') && !digits(frac_part)) {
            return Err(bad());
        }
        let scale = BigInt::from(10u32).pow(frac_part.len() as u32);
        let joined: BigInt = format!("{int_part}{frac_part}").parse().map_err(|_| bad())?;
        Ok(Rational(BigRational::new(joined, scale)))
    }

    /// Like [`Rational::from_decimal`], additionally requiring a value in `[0, 1]`.
    pub fn parse_probability(text: &str) -> Result<Self> {
        let value = Self::from_decimal(text)?;
        if value.0.is_negative() || value.0 > BigRational::one() {
            return Err(Error::ProbabilityRange(text.trim().to_string()));
        }
        Ok(value)
    }

    /// Decimal rendering. The flag is true when the rendering is exact
    /// (the denominator has no prime factors besides 2 and 5); otherwise the
    /// value is rounded to six places.
    pub fn to_decimal(&self) -> (String, bool) {
        let den = self.0.denom().clone();
        let mut d = den.clone();
        let (two, five) = (BigInt::from(2u32), BigInt::from(5u32));
        let (mut twos, mut fives) = (0u32, 0u32);
        while d.is_even() {
            d /= &two;
            twos += 1;
        }
        while (&d % &five).is_zero() {
            d /= &five;
            fives += 1;
        }
        if d.is_one() {
            let places = twos.max(fives);
            let scaled = self.0.numer() * (BigInt::from(10u32).pow(places) / &den);
            return (insert_point(&scaled, places as usize), true);
        }
        let scale = BigInt::from(10u32).pow(6);
        let scaled = (self.0.clone() * BigRational::from_integer(scale)).round().to_integer();
        (trim_zeros(insert_point(&scaled, 6)), false)
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }
}

fn insert_point(scaled: &BigInt, places: usize) -> String {
    let negative = scaled.is_negative();
    let mut digits = scaled.abs().to_string();
    if places > 0 {
        if digits.len() <= places {
            digits = format!("{}{}", "0".repeat(places + 1 - digits.len()), digits);
        }
        digits.insert(digits.len() - places, '.');
    }
    if negative {
        digits.insert(0, '-');
    }
    digits
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.denom().is_one() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl std::str::FromStr for Rational {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Rational::from_decimal(s)
    }
}

macro_rules! rational_binop {
    ($trait:ident, $method:ident) => {
        impl $trait for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational(self.0.$method(rhs.0))
            }
        }
        impl<'a> $trait<&'a Rational> for &'a Rational {
            type Output = Rational;
            fn $method(self, rhs: &'a Rational) -> Rational {
                Rational((&self.0).$method(&rhs.0))
            }
        }
        impl<'a> $trait<&'a Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: &'a Rational) -> Rational {
                Rational(self.0.$method(&rhs.0))
            }
        }
    };
}

rational_binop!(Add, add);
rational_binop!(Sub, sub);
rational_binop!(Mul, mul);

impl Sum for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Rational {
        iter.fold(Rational::zero(), |acc, x| acc + x)
    }
}

impl<'a> Sum<&'a Rational> for Rational {
    fn sum<I: Iterator<Item = &'a Rational>>(iter: I) -> Rational {
        iter.fold(Rational::zero(), |acc, x| acc + x)
    }
}

// ---------------------------------------------------------------------------
// Atoms and literals
// ---------------------------------------------------------------------------

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_alphabetic() => chars.all(|c| c.is_alphanumeric() || c == '_'),
        _ => false,
    }
}

/// A ground atom such as `Breaks` or `Throws(Suzy)`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    name: String,
    args: Vec<String>,
}

impl Atom {
    pub fn new<S: Into<String>>(name: impl Into<String>, args: impl IntoIterator<Item = S>) -> Result<Self> {
        let name = name.into();
        let args: Vec<String> = args.into_iter().map(Into::into).collect();
        if !is_identifier(&name) {
            return Err(Error::theory(None, format!("`{name}` is not an identifier")));
        }
        if let Some(bad) = args.iter().find(|a| !is_identifier(a)) {
            return Err(Error::theory(
                None,
                format!("argument `{bad}` of `{name}` is not a ground constant"),
            ));
        }
        Ok(Atom { name, args })
    }

    /// Panics on an invalid identifier; meant for literals in code.
    pub fn named(name: &str) -> Self {
        Atom::new(name, Vec::<String>::new()).expect("valid identifier")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn args(&self) -> &[String] {
        &self.args
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        if !self.args.is_empty() {
            write!(f, "({})", self.args.join(","))?;
        }
        Ok(())
    }
}

impl fmt::Debug for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub atom: Atom,
    pub positive: bool,
}

impl Literal {
    pub fn pos(atom: Atom) -> Self {
        Literal { atom, positive: true }
    }

    pub fn neg(atom: Atom) -> Self {
        Literal { atom, positive: false }
    }

    pub fn negated(&self) -> Self {
        Literal {
            atom: self.atom.clone(),
            positive: !self.positive,
        }
    }

    /// Truth of the literal in a set of true atoms.
    pub fn holds_in<'a>(&self, mut true_atoms: impl Iterator<Item = &'a Atom>) -> bool {
        true_atoms.any(|a| a == &self.atom) == self.positive
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.positive {
            f.write_str("~")?;
        }
        write!(f, "{}", self.atom)
    }
}

impl fmt::Debug for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

// ---------------------------------------------------------------------------
// Laws
// ---------------------------------------------------------------------------

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Disjunct {
    pub atom: Atom,
    pub prob: Rational,
}

/// Which alternative of a head was chosen when a law was applied.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Outcome {
    /// Zero-based index into the head.
    Disjunct(usize),
    /// The implicit empty disjunct.
    Nothing,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Disjunct(i) => write!(f, "{}", i + 1),
            Outcome::Nothing => f.write_str("none"),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CpLaw {
    pub id: LawId,
    pub label: Option<String>,
    pub head: Vec<Disjunct>,
    pub body: Vec<Literal>,
}

impl CpLaw {
    pub fn new(id: LawId, head: Vec<Disjunct>, body: Vec<Literal>) -> Self {
        CpLaw {
            id,
            label: None,
            head,
            body,
        }
    }

    /// Probability of the implicit empty disjunct.
    pub fn remainder(&self) -> Rational {
        Rational::one() - self.head.iter().map(|d| &d.prob).sum::<Rational>()
    }

    pub fn is_deterministic(&self) -> bool {
        self.head.len() == 1 && self.head[0].prob.is_one()
    }

    /// Number of children this law produces when applied, counting the
    /// implicit empty disjunct when it has positive probability.
    pub fn alternatives(&self) -> usize {
        self.head.len() + usize::from(self.remainder().is_positive())
    }

    /// All outcomes with positive probability, head order first.
    pub fn outcomes(&self) -> Vec<(Outcome, Rational)> {
        let mut out: Vec<_> = self
            .head
            .iter()
            .enumerate()
            .map(|(i, d)| (Outcome::Disjunct(i), d.prob.clone()))
            .collect();
        let rest = self.remainder();
        if rest.is_positive() {
            out.push((Outcome::Nothing, rest));
        }
        out
    }

    pub fn outcome_probability(&self, outcome: Outcome) -> Option<Rational> {
        match outcome {
            Outcome::Disjunct(i) => self.head.get(i).map(|d| d.prob.clone()),
            Outcome::Nothing => Some(self.remainder()).filter(Rational::is_positive),
        }
    }

    pub fn outcome_atom(&self, outcome: Outcome) -> Option<&Atom> {
        match outcome {
            Outcome::Disjunct(i) => self.head.get(i).map(|d| &d.atom),
            Outcome::Nothing => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for d in &self.head {
            if !d.prob.is_positive() || d.prob > Rational::one() {
                return Err(Error::theory(
                    Some(self.id),
                    format!("probability {} of `{}` must lie in (0, 1]", d.prob, d.atom),
                ));
            }
            if !seen.insert(&d.atom) {
                return Err(Error::theory(
                    Some(self.id),
                    format!("atom `{}` occurs twice in the head", d.atom),
                ));
            }
        }
        let total: Rational = self.head.iter().map(|d| &d.prob).sum();
        if total > Rational::one() {
            return Err(Error::theory(
                Some(self.id),
                format!("head probabilities sum to {total}, which exceeds 1"),
            ));
        }
        let mut seen = HashSet::new();
        for l in &self.body {
            if !seen.insert(l) {
                return Err(Error::theory(
                    Some(self.id),
                    format!("literal `{l}` occurs twice in the body"),
                ));
            }
        }
        Ok(())
    }
}

/// 1 − Σ head probabilities.
pub fn head_remainder(law: &CpLaw) -> Rational {
    law.remainder()
}

// ---------------------------------------------------------------------------
// Atom sets
// ---------------------------------------------------------------------------

/// Set of atoms of one theory, indexed by the theory's vocabulary.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct AtomSet(FixedBitSet);

impl AtomSet {
    pub fn empty(universe: usize) -> Self {
        AtomSet(FixedBitSet::with_capacity(universe))
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.0.contains(idx)
    }

    pub fn insert(&mut self, idx: usize) {
        if idx >= self.0.len() {
            self.0.grow(idx + 1);
        }
        self.0.insert(idx);
    }

    pub fn is_subset(&self, other: &AtomSet) -> bool {
        self.0.ones().all(|i| other.0.contains(i))
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.ones()
    }

    pub fn len(&self) -> usize {
        self.0.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_clear()
    }

    /// Resolves indices against `theory`'s vocabulary.
    pub fn to_atoms(&self, theory: &CpTheory) -> BTreeSet<Atom> {
        self.iter().map(|i| theory.atoms()[i].clone()).collect()
    }
}

impl fmt::Debug for AtomSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

// ---------------------------------------------------------------------------
// Theories
// ---------------------------------------------------------------------------

/// Index-resolved form of a law used by the execution engine.
#[derive(Clone, Debug)]
pub(crate) struct CompiledLaw {
    pub head: Vec<usize>,
    pub pos: Vec<usize>,
    pub neg: Vec<usize>,
}

/// A validated, stratified CP-theory.
///
/// Besides the laws, a theory carries a vocabulary: every atom occurring in
/// it plus any atom that occurred in a theory it was derived from. Transforms
/// keep the vocabulary, so an atom deleted from all heads can still be
/// queried. Equality compares the laws only.
#[derive(Clone, Debug)]
pub struct CpTheory {
    laws: Vec<CpLaw>,
    vocabulary: Vec<Atom>,
    index: HashMap<Atom, usize>,
    compiled: Vec<CompiledLaw>,
    strata: Vec<usize>,
}

impl PartialEq for CpTheory {
    fn eq(&self, other: &Self) -> bool {
        self.laws == other.laws
    }
}

impl Eq for CpTheory {}

impl CpTheory {
    pub fn new(laws: Vec<CpLaw>) -> Result<Self> {
        Self::with_vocabulary(laws, Vec::new())
    }

    pub fn empty() -> Self {
        Self::new(Vec::new()).expect("empty theory is valid")
    }

    /// Builds a theory whose vocabulary starts with `vocabulary` (in order) and
    /// is extended by atoms of `laws` in order of first occurrence.
    pub fn with_vocabulary(laws: Vec<CpLaw>, vocabulary: Vec<Atom>) -> Result<Self> {
        let mut index = HashMap::new();
        let mut vocab = Vec::new();
        let mut intern = |a: &Atom, vocab: &mut Vec<Atom>| -> usize {
            *index.entry(a.clone()).or_insert_with(|| {
                vocab.push(a.clone());
                vocab.len() - 1
            })
        };
        for a in &vocabulary {
            intern(a, &mut vocab);
        }
        let mut prev: Option<LawId> = None;
        let mut labels = HashSet::new();
        let mut compiled = Vec::with_capacity(laws.len());
        for law in &laws {
            if prev.is_some_and(|p| law.id <= p) {
                return Err(Error::theory(Some(law.id), "law ids must be strictly increasing"));
            }
            prev = Some(law.id);
            if let Some(label) = &law.label {
                if !is_identifier(label) {
                    return Err(Error::theory(
                        Some(law.id),
                        format!("label `{label}` is not an identifier"),
                    ));
                }
                if !labels.insert(label.clone()) {
                    return Err(Error::theory(Some(law.id), format!("duplicate label `{label}`")));
                }
            }
            law.validate()?;
            let head = law.head.iter().map(|d| intern(&d.atom, &mut vocab)).collect();
            let mut pos = Vec::new();
            let mut neg = Vec::new();
            for l in &law.body {
                let i = intern(&l.atom, &mut vocab);
                if l.positive {
                    pos.push(i);
                } else {
                    neg.push(i);
                }
            }
            compiled.push(CompiledLaw { head, pos, neg });
        }
        let strata = stratify(&laws, &compiled, vocab.len())?;
        Ok(CpTheory {
            laws,
            vocabulary: vocab,
            index,
            compiled,
            strata,
        })
    }

    pub fn laws(&self) -> &[CpLaw] {
        &self.laws
    }

    pub fn len(&self) -> usize {
        self.laws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.laws.is_empty()
    }

    pub fn law(&self, id: LawId) -> Option<&CpLaw> {
        self.position(id).map(|p| &self.laws[p])
    }

    /// Index of law `id` in [`CpTheory::laws`].
    pub fn position(&self, id: LawId) -> Option<usize> {
        self.laws.binary_search_by_key(&id, |l| l.id).ok()
    }

    pub fn law_by_label(&self, label: &str) -> Option<&CpLaw> {
        self.laws.iter().find(|l| l.label.as_deref() == Some(label))
    }

    pub fn next_id(&self) -> LawId {
        self.laws.last().map_or(1, |l| l.id + 1)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.vocabulary
    }

    pub fn atom_index(&self, atom: &Atom) -> Option<usize> {
        self.index.get(atom).copied()
    }

    pub(crate) fn require_atom(&self, atom: &Atom) -> Result<usize> {
        self.atom_index(atom)
            .ok_or_else(|| Error::UnknownAtom(atom.to_string()))
    }

    /// Stratum (level) of an atom in the negation stratification.
    pub fn stratum(&self, atom: &Atom) -> Option<usize> {
        self.atom_index(atom).map(|i| self.strata[i])
    }

    pub(crate) fn compiled(&self) -> &[CompiledLaw] {
        &self.compiled
    }

    /// Rebuilds a theory from new laws while keeping this vocabulary.
    pub(crate) fn derive(&self, laws: Vec<CpLaw>) -> Result<Self> {
        Self::with_vocabulary(laws, self.vocabulary.clone())
    }
}

/// Least level mapping with level(head) ≥ level(positive body atom) and
/// level(head) > level(negated body atom). Relaxation diverges exactly when
/// a dependency cycle passes through negation.
fn stratify(laws: &[CpLaw], compiled: &[CompiledLaw], atoms: usize) -> Result<Vec<usize>> {
    let mut level = vec![0usize; atoms];
    loop {
        let mut changed = false;
        for (law, c) in laws.iter().zip(compiled) {
            let need = c
                .pos
                .iter()
                .map(|&a| level[a])
                .chain(c.neg.iter().map(|&a| level[a] + 1))
                .max()
                .unwrap_or(0);
            for &h in &c.head {
                if level[h] < need {
                    level[h] = need;
                    changed = true;
                    if need > atoms {
                        return Err(Error::theory(
                            Some(law.id),
                            "negation is not stratified: a dependency cycle passes through a negated literal",
                        ));
                    }
                }
            }
        }
        if !changed {
            return Ok(level);
        }
    }
}
