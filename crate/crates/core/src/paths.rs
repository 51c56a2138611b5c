//! Colored Motzkin paths: the basis labels of the chain ground state.
//!
//! A path is a word over up / down / flat steps whose running height never
//! drops below zero and returns to zero at the end. In the bicolored model
//! every up and down step carries a color, and nested up-down partners must
//! agree on it.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::config::Caps;
use crate::error::{check_cap, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Color {
    Red,
    Blue,
}

impl Color {
    pub const ALL: [Color; 2] = [Color::Red, Color::Blue];

    pub fn index(self) -> usize {
        match self {
            Color::Red => 0,
            Color::Blue => 1,
        }
    }

    pub fn from_index(i: usize) -> Color {
        Color::ALL[i]
    }

    fn suffix(self) -> char {
        match self {
            Color::Red => 'r',
            Color::Blue => 'b',
        }
    }
}

/// Number of colors `c`: a runtime mode, not a type parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Colors {
    One,
    Two,
}

impl Colors {
    pub fn count(self) -> u32 {
        match self {
            Colors::One => 1,
            Colors::Two => 2,
        }
    }

    pub fn is_colored(self) -> bool {
        self == Colors::Two
    }

    /// Colors an up/down step may carry in this mode.
    pub fn palette(self) -> &'static [Option<Color>] {
        match self {
            Colors::One => &[None],
            Colors::Two => &[Some(Color::Red), Some(Color::Blue)],
        }
    }
}

impl TryFrom<u32> for Colors {
    type Error = Error;

    fn try_from(c: u32) -> Result<Self> {
        match c {
            1 => Ok(Colors::One),
            2 => Ok(Colors::Two),
            _ => Err(Error::invalid(format!("colors must be 1 or 2, got {c}"))),
        }
    }
}

impl fmt::Display for Colors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.count())
    }
}

impl Serialize for Colors {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u32(self.count())
    }
}

impl<'de> Deserialize<'de> for Colors {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let c = u32::deserialize(d)?;
        Colors::try_from(c).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StepKind {
    Up,
    Down,
    Flat,
}

impl StepKind {
    #[inline]
    pub fn delta(self) -> i64 {
        match self {
            StepKind::Up => 1,
            StepKind::Down => -1,
            StepKind::Flat => 0,
        }
    }

    fn letter(self) -> char {
        match self {
            StepKind::Up => 'U',
            StepKind::Down => 'D',
            StepKind::Flat => 'F',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Step {
    pub kind: StepKind,
    pub color: Option<Color>,
}

impl Step {
    pub const FLAT: Step = Step {
        kind: StepKind::Flat,
        color: None,
    };
    pub const UP: Step = Step {
        kind: StepKind::Up,
        color: None,
    };
    pub const DOWN: Step = Step {
        kind: StepKind::Down,
        color: None,
    };

    pub fn up(color: Color) -> Step {
        Step {
            kind: StepKind::Up,
            color: Some(color),
        }
    }

    pub fn down(color: Color) -> Step {
        Step {
            kind: StepKind::Down,
            color: Some(color),
        }
    }

    pub fn skeleton(self) -> Step {
        Step {
            kind: self.kind,
            color: None,
        }
    }

    /// Whether the step's color pattern suits the given mode.
    pub fn fits(self, colors: Colors) -> bool {
        match (self.kind, colors) {
            (StepKind::Flat, _) | (_, Colors::One) => self.color.is_none(),
            (_, Colors::Two) => self.color.is_some(),
        }
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind.letter())?;
        if let Some(c) = self.color {
            write!(f, "{}", c.suffix())?;
        }
        Ok(())
    }
}

/// Validity of a raw step word: heights stay nonnegative, end at zero, each
/// step matches the color mode, and nested partners carry equal colors.
pub fn validate(steps: &[Step], colors: Colors) -> bool {
    let mut open: Vec<Option<Color>> = Vec::new();
    for step in steps {
        if !step.fits(colors) {
            return false;
        }
        match step.kind {
            StepKind::Up => open.push(step.color),
            StepKind::Down => match open.pop() {
                Some(c) if c == step.color => {}
                _ => return false,
            },
            StepKind::Flat => {}
        }
    }
    open.is_empty()
}

/// A validated (colored) Motzkin path.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MotzkinPath {
    steps: Vec<Step>,
    colors: Colors,
}

impl MotzkinPath {
    pub fn new(steps: Vec<Step>, colors: Colors) -> Result<Self> {
        if !validate(&steps, colors) {
            return Err(Error::invalid(format!(
                "not a valid {}-color Motzkin path: {}",
                colors.count(),
                format_steps(&steps)
            )));
        }
        Ok(MotzkinPath { steps, colors })
    }

    /// Colorless path from step kinds.
    pub fn from_kinds(kinds: &[StepKind]) -> Result<Self> {
        let steps = kinds.iter().map(|&kind| Step { kind, color: None }).collect();
        Self::new(steps, Colors::One)
    }

    pub(crate) fn from_trusted(steps: Vec<Step>, colors: Colors) -> Self {
        debug_assert!(validate(&steps, colors));
        MotzkinPath { steps, colors }
    }

    /// Parse the `U`/`D`/`F` alphabet with optional `r`/`b` color suffixes;
    /// whitespace is ignored.
    pub fn parse(text: &str, colors: Colors) -> Result<Self> {
        Self::new(parse_steps(text)?, colors)
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn colors(&self) -> Colors {
        self.colors
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn kinds(&self) -> impl Iterator<Item = StepKind> + '_ {
        self.steps.iter().map(|s| s.kind)
    }

    /// Colorless path with the same shape.
    pub fn skeleton(&self) -> MotzkinPath {
        MotzkinPath {
            steps: self.steps.iter().map(|s| s.skeleton()).collect(),
            colors: Colors::One,
        }
    }

    pub fn up_count(&self) -> usize {
        self.kinds().filter(|&k| k == StepKind::Up).count()
    }

    /// Running heights `h_0 ..= h_n`.
    pub fn heights(&self) -> Vec<u32> {
        let mut h = 0i64;
        let mut out = Vec::with_capacity(self.len() + 1);
        out.push(0);
        for k in self.kinds() {
            h += k.delta();
            out.push(h as u32);
        }
        out
    }

    pub fn max_height(&self) -> u32 {
        self.heights().into_iter().max().unwrap_or(0)
    }

    /// Area under the path: trapezoid sum with unit horizontal steps.
    pub fn area(&self) -> u64 {
        self.doubled_area() / 2
    }

    /// `2 A(m)`, the exponent of `q` in the Born weight.
    pub fn doubled_area(&self) -> u64 {
        self.heights()
            .windows(2)
            .map(|w| u64::from(w[0] + w[1]))
            .sum()
    }

    pub fn arc_matching(&self) -> ArcMatching {
        let mut stack = Vec::new();
        let mut pairs = Vec::with_capacity(self.up_count());
        for (j, k) in self.kinds().enumerate() {
            match k {
                StepKind::Up => stack.push(j),
                StepKind::Down => {
                    let i = stack.pop().expect("validated path");
                    pairs.push((i, j));
                }
                StepKind::Flat => {}
            }
        }
        pairs.sort_unstable();
        ArcMatching { pairs }
    }
}

impl fmt::Display for MotzkinPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_steps(&self.steps))
    }
}

impl FromStr for MotzkinPath {
    type Err = Error;

    /// Mode is inferred: any color suffix makes the path bicolored.
    fn from_str(s: &str) -> Result<Self> {
        let steps = parse_steps(s)?;
        let colors = if steps.iter().any(|s| s.color.is_some()) {
            Colors::Two
        } else {
            Colors::One
        };
        Self::new(steps, colors)
    }
}

pub fn format_steps(steps: &[Step]) -> String {
    steps.iter().map(|s| s.to_string()).collect()
}

pub fn parse_steps(text: &str) -> Result<Vec<Step>> {
    let mut steps: Vec<Step> = Vec::new();
    for ch in text.chars().filter(|c| !c.is_whitespace()) {
        let kind = match ch {
            'U' => Some(StepKind::Up),
            'D' => Some(StepKind::Down),
            'F' => Some(StepKind::Flat),
            _ => None,
        };
        if let Some(kind) = kind {
            steps.push(Step { kind, color: None });
            continue;
        }
        let color = match ch {
            'r' => Color::Red,
            'b' => Color::Blue,
            _ => return Err(Error::invalid(format!("unexpected character {ch:?} in path {text:?}"))),
        };
        match steps.last_mut() {
            Some(last) if last.color.is_none() => last.color = Some(color),
            _ => return Err(Error::invalid(format!("misplaced color suffix in path {text:?}"))),
        }
    }
    Ok(steps)
}

/// Nested pairing of every up step with its partner down step.
///
/// Pairs are 0-based `(up, down)` indices sorted by the up index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArcMatching {
    pairs: Vec<(usize, usize)>,
}

impl ArcMatching {
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Pairs in the 1-based convention used at the CLI surface.
    pub fn one_based(&self) -> Vec<(usize, usize)> {
        self.pairs.iter().map(|&(i, j)| (i + 1, j + 1)).collect()
    }

    pub fn is_non_crossing(&self) -> bool {
        self.pairs.iter().enumerate().all(|(a, &(i, j))| {
            self.pairs[a + 1..]
                .iter()
                .all(|&(k, l)| !(i < k && k < j) || l < j)
        })
    }

    /// Arcs spanning the cut after `x` steps; equals `h_x`.
    pub fn spanning(&self, x: usize) -> usize {
        self.pairs.iter().filter(|&&(i, j)| i < x && j >= x).count()
    }
}

fn enumeration_cap(colors: Colors, caps: &Caps) -> (&'static str, usize) {
    match colors {
        Colors::One => ("enumerate_colorless", caps.enumerate_colorless),
        Colors::Two => ("enumerate_colored", caps.enumerate_colored),
    }
}

/// Stream every valid path of length `n` exactly once, in lexicographic
/// order of the per-position options (flat, up colors, down).
pub fn enumerate(n: usize, colors: Colors, caps: &Caps) -> Result<Enumerator> {
    let (name, limit) = enumeration_cap(colors, caps);
    check_cap(name, limit as u64, n as u64)?;
    Ok(Enumerator::new(n, colors))
}

#[derive(Debug, Clone)]
pub struct Enumerator {
    n: usize,
    colors: Colors,
    steps: Vec<Step>,
    choice: Vec<usize>,
    open: Vec<Option<Color>>,
    height: usize,
    started: bool,
    done: bool,
}

impl Enumerator {
    fn new(n: usize, colors: Colors) -> Self {
        Enumerator {
            n,
            colors,
            steps: Vec::with_capacity(n),
            choice: Vec::with_capacity(n),
            open: Vec::new(),
            height: 0,
            started: false,
            done: false,
        }
    }

    fn option_count(&self) -> usize {
        2 + self.colors.palette().len()
    }

    /// Option `idx` at the current position if it keeps a completion possible.
    fn option(&self, idx: usize) -> Option<Step> {
        let remaining_after = self.n - self.steps.len() - 1;
        let palette = self.colors.palette();
        if idx == 0 {
            return (self.height <= remaining_after).then_some(Step::FLAT);
        }
        if idx <= palette.len() {
            return (self.height < remaining_after).then_some(Step {
                kind: StepKind::Up,
                color: palette[idx - 1],
            });
        }
        let color = *self.open.last()?;
        Some(Step {
            kind: StepKind::Down,
            color,
        })
    }

    fn push(&mut self, idx: usize, step: Step) {
        match step.kind {
            StepKind::Up => {
                self.open.push(step.color);
                self.height += 1;
            }
            StepKind::Down => {
                self.open.pop();
                self.height -= 1;
            }
            StepKind::Flat => {}
        }
        self.steps.push(step);
        self.choice.push(idx);
    }

    fn pop(&mut self) -> Option<usize> {
        let step = self.steps.pop()?;
        let idx = self.choice.pop().expect("parallel stacks");
        match step.kind {
            StepKind::Up => {
                self.open.pop();
                self.height -= 1;
            }
            StepKind::Down => {
                self.open.push(step.color);
                self.height += 1;
            }
            StepKind::Flat => {}
        }
        Some(idx)
    }

    fn try_from_option(&mut self, start: usize) -> bool {
        for idx in start..self.option_count() {
            if let Some(step) = self.option(idx) {
                self.push(idx, step);
                return true;
            }
        }
        false
    }

    fn descend(&mut self) {
        while self.steps.len() < self.n {
            let ok = self.try_from_option(0);
            debug_assert!(ok, "a completion always exists");
        }
    }

    fn current(&self) -> MotzkinPath {
        MotzkinPath::from_trusted(self.steps.clone(), self.colors)
    }
}

impl Iterator for Enumerator {
    type Item = MotzkinPath;

    fn next(&mut self) -> Option<MotzkinPath> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            self.descend();
            return Some(self.current());
        }
        loop {
            let Some(idx) = self.pop() else {
                self.done = true;
                return None;
            };
            if self.try_from_option(idx + 1) {
                self.descend();
                return Some(self.current());
            }
        }
    }
}

/// Number of valid `c`-colored paths of length `n`, i.e. `sum_m c^{#Up(m)}`.
pub fn count(n: usize, colors: Colors) -> BigUint {
    count_from_height(n, 0, 0, colors)
}

/// Number of height-nonnegative step words of length `x` from height `h0` to
/// `h1`.
///
/// For two colors this counts colored strings: every up step and every down
/// step that drops below the starting level (no partner inside the window)
/// carries a free color, while a matched down inherits its partner's color.
pub fn count_from_height(x: usize, h0: usize, h1: usize, colors: Colors) -> BigUint {
    if h1.abs_diff(h0) > x {
        return BigUint::zero();
    }
    let top = h0 + x + 1;
    match colors {
        Colors::One => {
            let mut cur = vec![BigUint::zero(); top + 1];
            cur[h0] = BigUint::one();
            for _ in 0..x {
                let mut next = vec![BigUint::zero(); top + 1];
                for h in 0..top {
                    if cur[h].is_zero() {
                        continue;
                    }
                    next[h] += &cur[h];
                    next[h + 1] += &cur[h];
                    if h > 0 {
                        next[h - 1] += &cur[h];
                    }
                }
                cur = next;
            }
            std::mem::take(&mut cur[h1])
        }
        Colors::Two => {
            // State (height, running minimum); min only matters up to h0.
            let c = BigUint::from(2u32);
            let idx = |h: usize, m: usize| h * (h0 + 1) + m;
            let mut cur = vec![BigUint::zero(); (top + 1) * (h0 + 1)];
            cur[idx(h0, h0)] = BigUint::one();
            for _ in 0..x {
                let mut next = vec![BigUint::zero(); cur.len()];
                for h in 0..top {
                    for m in 0..=h0.min(h) {
                        let w = &cur[idx(h, m)];
                        if w.is_zero() {
                            continue;
                        }
                        next[idx(h, m)] += w;
                        next[idx(h + 1, m)] += w * &c;
                        if h > 0 {
                            if h - 1 < m {
                                next[idx(h - 1, h - 1)] += w * &c;
                            } else {
                                next[idx(h - 1, m)] += w;
                            }
                        }
                    }
                }
                cur = next;
            }
            (0..=h0.min(h1)).map(|m| cur[idx(h1, m)].clone()).sum()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> MotzkinPath {
        s.parse().unwrap()
    }

    #[test]
    fn validation_examples() {
        let steps = |s: &str| parse_steps(s).unwrap();
        assert!(validate(&steps("UD"), Colors::One));
        assert!(!validate(&steps("DU"), Colors::One));
        assert!(!validate(&steps("UrDb"), Colors::Two));
        assert!(validate(&steps("UrFDr"), Colors::Two));
        assert!(!validate(&steps("UrFDb"), Colors::Two));
        assert!(validate(&[], Colors::One));
        // wrong mode
        assert!(!validate(&steps("UD"), Colors::Two));
        assert!(!validate(&steps("UrDr"), Colors::One));
        assert!(!validate(&steps("UU"), Colors::One));
    }

    #[test]
    fn heights_and_area() {
        assert_eq!(p("UUDD").heights(), vec![0, 1, 2, 1, 0]);
        assert_eq!(p("FF").heights(), vec![0, 0, 0]);
        assert_eq!(p("UFD").heights(), vec![0, 1, 1, 0]);
        assert_eq!(p("UUDD").area(), 4);
        assert_eq!(p("FFFF").area(), 0);
        assert_eq!(p("UD").area(), 1);
        assert_eq!(p("UFD").area(), 2);
    }

    #[test]
    fn arcs() {
        assert_eq!(p("UUDD").arc_matching().one_based(), vec![(1, 4), (2, 3)]);
        assert_eq!(p("UDUD").arc_matching().one_based(), vec![(1, 2), (3, 4)]);
        assert_eq!(p("UFD").arc_matching().one_based(), vec![(1, 3)]);
    }

    #[test]
    fn parse_and_display() {
        assert_eq!(p("Ur F Dr").to_string(), "UrFDr");
        assert!("Ur F Db".parse::<MotzkinPath>().is_err());
        assert!("UX".parse::<MotzkinPath>().is_err());
        assert!("rU".parse::<MotzkinPath>().is_err());
        assert_eq!(MotzkinPath::parse("FF", Colors::Two).unwrap().colors(), Colors::Two);
    }

    #[test]
    fn enumeration_examples() {
        let caps = Caps::default();
        let all: Vec<String> = enumerate(2, Colors::One, &caps)
            .unwrap()
            .map(|m| m.to_string())
            .collect();
        assert_eq!(all, vec!["FF", "UD"]);
        assert_eq!(enumerate(3, Colors::One, &caps).unwrap().count(), 4);
        assert_eq!(enumerate(4, Colors::Two, &caps).unwrap().count(), 21);
        assert_eq!(enumerate(0, Colors::Two, &caps).unwrap().count(), 1);
    }

    #[test]
    fn enumeration_cap_is_named() {
        let caps = Caps::default();
        let err = enumerate(17, Colors::One, &caps).unwrap_err();
        assert!(err.to_string().contains("enumerate_colorless"), "{err}");
        let err = enumerate(15, Colors::Two, &caps).unwrap_err();
        assert!(err.to_string().contains("enumerate_colored"), "{err}");
    }

    #[test]
    fn count_examples() {
        assert_eq!(count(4, Colors::One), BigUint::from(9u32));
        assert_eq!(count(4, Colors::Two), BigUint::from(21u32));
        assert_eq!(count(0, Colors::One), BigUint::one());
        assert_eq!(count(0, Colors::Two), BigUint::one());
        assert_eq!(count_from_height(2, 0, 0, Colors::One), BigUint::from(2u32));
        assert_eq!(count_from_height(1, 0, 1, Colors::One), BigUint::one());
        // walks from 1 back to 1 staying >= 0; 9 of the 18 stay >= 1
        assert_eq!(count_from_height(4, 1, 1, Colors::One), BigUint::from(18u32));
        assert_eq!(count_from_height(1, 0, 3, Colors::One), BigUint::zero());
    }

    /// Brute force over all colored words, independent of the DP.
    fn brute_colored_strings(x: usize, h0: usize, h1: usize) -> usize {
        let alphabet = [
            Step::FLAT,
            Step::up(Color::Red),
            Step::up(Color::Blue),
            Step::down(Color::Red),
            Step::down(Color::Blue),
        ];
        let mut total = 0;
        let mut word = vec![0usize; x];
        loop {
            let mut h = h0 as i64;
            let mut open: Vec<Option<Color>> = Vec::new();
            let mut ok = true;
            for &w in &word {
                let s = alphabet[w];
                h += s.kind.delta();
                if h < 0 {
                    ok = false;
                    break;
                }
                match s.kind {
                    StepKind::Up => open.push(s.color),
                    StepKind::Down => {
                        if let Some(c) = open.pop() {
                            if c != s.color {
                                ok = false;
                                break;
                            }
                        }
                    }
                    StepKind::Flat => {}
                }
            }
            if ok && h == h1 as i64 {
                total += 1;
            }
            let mut i = 0;
            loop {
                if i == x {
                    return total;
                }
                word[i] += 1;
                if word[i] < alphabet.len() {
                    break;
                }
                word[i] = 0;
                i += 1;
            }
        }
    }

    #[test]
    fn colored_window_counts_match_brute_force() {
        for x in 0..=6 {
            for h0 in 0..=3 {
                for h1 in 0..=3 {
                    let dp = count_from_height(x, h0, h1, Colors::Two);
                    assert_eq!(dp, BigUint::from(brute_colored_strings(x, h0, h1)), "x={x} h0={h0} h1={h1}");
                }
            }
        }
    }
}
