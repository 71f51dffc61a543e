//! Standard presentation of the fundamental group of a punctured surface.

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{identity, inverse, CMatrix};

/// Genus g and puncture count n of the surface.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Presentation {
    pub genus: usize,
    pub punctures: usize,
}

impl Presentation {
    pub fn new(genus: usize, punctures: usize) -> Result<Self> {
        if punctures == 0 {
            return Err(Error::InvalidPresentation("at least one puncture is required".into()));
        }
        Ok(Self { genus, punctures })
    }

    /// 2 − 2g − n; the hyperbolic case has this negative.
    pub fn euler_characteristic(&self) -> i64 {
        2 - 2 * self.genus as i64 - self.punctures as i64
    }

    pub fn is_hyperbolic(&self) -> bool {
        self.euler_characteristic() < 0
    }

    /// Number of standard generators, 2g + n.
    pub fn generator_count(&self) -> usize {
        2 * self.genus + self.punctures
    }

    /// Generators in index order: α₁..α_g, β₁..β_g, γ₁..γ_n.
    pub fn generators(&self) -> Vec<Generator> {
        let g = self.genus;
        (1..=g)
            .map(Generator::Alpha)
            .chain((1..=g).map(Generator::Beta))
            .chain((1..=self.punctures).map(Generator::Gamma))
            .collect()
    }

    pub fn index_of(&self, gen: Generator) -> Result<usize> {
        let g = self.genus;
        match gen {
            Generator::Alpha(j) if (1..=g).contains(&j) => Ok(j - 1),
            Generator::Beta(j) if (1..=g).contains(&j) => Ok(g + j - 1),
            Generator::Gamma(i) if (1..=self.punctures).contains(&i) => Ok(2 * g + i - 1),
            other => Err(Error::InvalidWord(format!(
                "generator {other} does not exist for genus {g} with {} punctures",
                self.punctures
            ))),
        }
    }

    pub fn gamma_index(&self, i: usize) -> usize {
        2 * self.genus + i
    }

    /// [α₁,β₁]⋯[α_g,β_g]γ₁⋯γ_n.
    pub fn relator(&self) -> Word {
        let mut letters = Vec::with_capacity(4 * self.genus + self.punctures);
        for j in 1..=self.genus {
            letters.push(Letter::new(Generator::Alpha(j), 1));
            letters.push(Letter::new(Generator::Beta(j), 1));
            letters.push(Letter::new(Generator::Alpha(j), -1));
            letters.push(Letter::new(Generator::Beta(j), -1));
        }
        for i in 1..=self.punctures {
            letters.push(Letter::new(Generator::Gamma(i), 1));
        }
        Word { letters }
    }
}

pub fn relator(p: &Presentation) -> Word {
    p.relator()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Generator {
    Alpha(usize),
    Beta(usize),
    Gamma(usize),
}

impl Generator {
    pub fn parse(token: &str) -> Result<Self> {
        let bad = || Error::InvalidWord(format!("unknown generator token {token:?}"));
        let (kind, idx) = token.split_at(token.char_indices().nth(1).map_or(token.len(), |(i, _)| i));
        let idx: usize = idx.parse().map_err(|_| bad())?;
        if idx == 0 {
            return Err(bad());
        }
        match kind {
            "a" => Ok(Self::Alpha(idx)),
            "b" => Ok(Self::Beta(idx)),
            "g" => Ok(Self::Gamma(idx)),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Alpha(j) => write!(f, "a{j}"),
            Self::Beta(j) => write!(f, "b{j}"),
            Self::Gamma(i) => write!(f, "g{i}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Letter {
    pub gen: Generator,
    /// +1 or −1.
    pub exp: i8,
}

impl Letter {
    pub fn new(gen: Generator, exp: i8) -> Self {
        debug_assert!(exp == 1 || exp == -1);
        Self { gen, exp }
    }

    pub fn inverse(self) -> Self {
        Self { gen: self.gen, exp: -self.exp }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Word {
    pub letters: Vec<Letter>,
}

impl Word {
    pub fn new(letters: Vec<Letter>) -> Self {
        Self { letters }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&other.letters);
        Word { letters }
    }

    pub fn inverse(&self) -> Word {
        Word { letters: self.letters.iter().rev().map(|l| l.inverse()).collect() }
    }

    /// Parses whitespace-separated tokens such as `a1 b1^-1 g2`.
    pub fn parse(text: &str) -> Result<Self> {
        let letters = text
            .split_whitespace()
            .map(|tok| match tok.strip_suffix("^-1") {
                Some(base) => Generator::parse(base).map(|g| Letter::new(g, -1)),
                None => Generator::parse(tok).map(|g| Letter::new(g, 1)),
            })
            .collect::<Result<_>>()?;
        Ok(Self { letters })
    }

    pub fn validate(&self, p: &Presentation) -> Result<()> {
        for l in &self.letters {
            p.index_of(l.gen)?;
        }
        Ok(())
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let toks: Vec<String> = self
            .letters
            .iter()
            .map(|l| if l.exp < 0 { format!("{}^-1", l.gen) } else { l.gen.to_string() })
            .collect();
        f.write_str(&toks.join(" "))
    }
}

/// Cancels adjacent inverse pairs with a stack; the result is the unique reduced word.
pub fn free_reduce(w: &Word) -> Word {
    let mut out: Vec<Letter> = Vec::with_capacity(w.len());
    for &l in &w.letters {
        if out.last().is_some_and(|&top| top == l.inverse()) {
            out.pop();
        } else {
            out.push(l);
        }
    }
    Word { letters: out }
}

/// Generator images indexed in presentation order.
#[derive(Clone, Debug)]
pub struct Assignment<'a> {
    pub presentation: &'a Presentation,
    pub images: &'a [CMatrix],
}

impl<'a> Assignment<'a> {
    pub fn new(presentation: &'a Presentation, images: &'a [CMatrix]) -> Result<Self> {
        if images.len() != presentation.generator_count() {
            return Err(Error::DimensionMismatch(format!(
                "{} images for {} generators",
                images.len(),
                presentation.generator_count()
            )));
        }
        let r = images.first().map_or(0, |m| m.nrows());
        if images.iter().any(|m| m.nrows() != r || m.ncols() != r) {
            return Err(Error::DimensionMismatch("generator images must all be r x r".into()));
        }
        Ok(Self { presentation, images })
    }

    pub fn rank(&self) -> usize {
        self.images.first().map_or(0, |m| m.nrows())
    }

    pub fn image(&self, gen: Generator) -> Result<&CMatrix> {
        Ok(&self.images[self.presentation.index_of(gen)?])
    }
}

/// Left-to-right product of images, inverting on exponent −1.
pub fn evaluate(assign: &Assignment<'_>, w: &Word) -> Result<CMatrix> {
    let mut acc = identity(assign.rank());
    for l in &w.letters {
        let m = assign.image(l.gen)?;
        if l.exp > 0 {
            acc *= m;
        } else {
            acc *= inverse(m)?;
        }
    }
    Ok(acc)
}
