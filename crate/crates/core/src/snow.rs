//! Single-node state machines for Slush, Snowflake and Snowball.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    Red,
    Blue,
    Unset,
}

impl Color {
    /// The other of the two real colors; `Unset` stays `Unset`.
    pub fn opposite(self) -> Color {
        match self {
            Color::Red => Color::Blue,
            Color::Blue => Color::Red,
            Color::Unset => Color::Unset,
        }
    }

    pub fn is_set(self) -> bool {
        self != Color::Unset
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Color::Red => "red",
            Color::Blue => "blue",
            Color::Unset => "unset",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Slush,
    Snowflake,
    Snowball,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Slush => "slush",
            Variant::Snowflake => "snowflake",
            Variant::Snowball => "snowball",
        })
    }
}

/// How the consecutive-success counter is compared against `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionRule {
    /// Decide once `cnt >= beta`.
    #[default]
    AtLeast,
    /// Decide once `cnt > beta`.
    Exceeds,
}

impl DecisionRule {
    pub fn reached(self, cnt: u64, beta: u64) -> bool {
        match self {
            DecisionRule::AtLeast => cnt >= beta,
            DecisionRule::Exceeds => cnt > beta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolParams {
    /// Sample size.
    pub k: u32,
    /// Votes needed for a successful sample.
    pub a: u32,
    /// Consecutive successes needed to decide.
    pub beta: u32,
    /// Slush round budget.
    pub m: u32,
    #[serde(default)]
    pub rule: DecisionRule,
}

impl ProtocolParams {
    pub fn new(k: u32, a: u32, beta: u32, m: u32) -> Result<Self> {
        let p = Self {
            k,
            a,
            beta,
            m,
            rule: DecisionRule::AtLeast,
        };
        p.validate()?;
        Ok(p)
    }

    /// Builds parameters from a fractional quorum, with `a = ceil(alpha * k)`.
    pub fn from_alpha(k: u32, alpha: f64, beta: u32, m: u32) -> Result<Self> {
        ensure!(
            alpha > 0.5 && alpha <= 1.0,
            Argument,
            "alpha = {alpha} outside (0.5, 1]"
        );
        Self::new(k, threshold_from_alpha(k, alpha), beta, m)
    }

    pub fn with_rule(mut self, rule: DecisionRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.k >= 1, Argument, "k must be at least 1");
        ensure!(
            self.a > self.k / 2 && self.a <= self.k,
            Argument,
            "a = {} outside ({}, {}]",
            self.a,
            self.k / 2,
            self.k
        );
        ensure!(self.beta >= 1, Argument, "beta must be at least 1");
        ensure!(self.m >= 1, Argument, "m must be at least 1");
        Ok(())
    }
}

/// `ceil(alpha * k)`, tolerant of products like `0.8 * 10` landing a hair
/// above the integer.
pub fn threshold_from_alpha(k: u32, alpha: f64) -> u32 {
    (alpha * k as f64 - 1e-9).ceil().max(0.0) as u32
}

/// Votes for each color in one completed sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SampleCounts {
    pub red: u32,
    pub blue: u32,
}

impl SampleCounts {
    pub fn new(red: u32, blue: u32) -> Self {
        Self { red, blue }
    }

    pub fn of(&self, color: Color) -> u32 {
        match color {
            Color::Red => self.red,
            Color::Blue => self.blue,
            Color::Unset => 0,
        }
    }

    pub fn add(&mut self, color: Color) {
        match color {
            Color::Red => self.red += 1,
            Color::Blue => self.blue += 1,
            Color::Unset => {}
        }
    }

    pub fn total(&self) -> u32 {
        self.red + self.blue
    }

    /// The color reaching the threshold, if any. At most one can when
    /// `a > k / 2`.
    pub fn winner(&self, a: u32) -> Option<Color> {
        if self.red >= a {
            Some(Color::Red)
        } else if self.blue >= a {
            Some(Color::Blue)
        } else {
            None
        }
    }
}

/// Per-color Snowball confidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confidence {
    pub red: u64,
    pub blue: u64,
}

impl Confidence {
    pub fn of(&self, color: Color) -> u64 {
        match color {
            Color::Red => self.red,
            Color::Blue => self.blue,
            Color::Unset => 0,
        }
    }

    fn bump(&mut self, color: Color) {
        match color {
            Color::Red => self.red += 1,
            Color::Blue => self.blue += 1,
            Color::Unset => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnowState {
    pub variant: Variant,
    pub col: Color,
    pub lastcol: Color,
    pub cnt: u64,
    pub d: Confidence,
    pub decided: Option<Color>,
    /// Sample results processed so far.
    pub rounds: u64,
}

impl SnowState {
    pub fn new(variant: Variant, col: Color) -> Self {
        Self {
            variant,
            col,
            lastcol: col,
            cnt: 0,
            d: Confidence::default(),
            decided: None,
            rounds: 0,
        }
    }

    pub fn is_decided(&self) -> Option<Color> {
        self.decided
    }

    /// Answers an incoming query, adopting its color if still uncolored.
    pub fn on_query(&mut self, incoming: Color) -> Result<Color> {
        ensure!(incoming.is_set(), Argument, "queries must carry a color");
        if !self.col.is_set() {
            self.col = incoming;
            if !self.lastcol.is_set() {
                self.lastcol = incoming;
            }
        }
        Ok(self.col)
    }

    /// Applies the outcome of one completed `k`-sample.
    pub fn on_sample(&mut self, params: &ProtocolParams, counts: SampleCounts) -> Result<()> {
        ensure!(
            counts.total() == params.k,
            Argument,
            "sample counts total {} but k = {}",
            counts.total(),
            params.k
        );
        if let Some(c) = self.decided {
            return Err(Error::Protocol(format!("node already decided {c}")));
        }
        self.rounds += 1;
        let winner = counts.winner(params.a);
        let beta = params.beta as u64;
        match self.variant {
            Variant::Slush => {
                if let Some(w) = winner {
                    self.col = w;
                }
                if self.rounds >= params.m as u64 {
                    self.decided = Some(self.col);
                }
            }
            Variant::Snowflake => match winner {
                Some(w) if w != self.col => {
                    self.col = w;
                    self.cnt = 0;
                }
                Some(w) => {
                    self.cnt += 1;
                    if params.rule.reached(self.cnt, beta) {
                        self.decided = Some(w);
                    }
                }
                None => self.cnt = 0,
            },
            Variant::Snowball => match winner {
                Some(w) => {
                    self.d.bump(w);
                    if self.d.of(w) > self.d.of(self.col) {
                        self.col = w;
                    }
                    if w != self.lastcol {
                        self.lastcol = w;
                        self.cnt = 1;
                    } else {
                        self.cnt += 1;
                    }
                    if params.rule.reached(self.cnt, beta) {
                        self.decided = Some(self.lastcol);
                    }
                }
                None => self.cnt = 0,
            },
        }
        Ok(())
    }
}

/// Pure form of [`SnowState::on_query`].
pub fn handle_query(state: &SnowState, incoming: Color) -> Result<(SnowState, Color)> {
    let mut next = state.clone();
    let response = next.on_query(incoming)?;
    Ok((next, response))
}

/// Pure form of [`SnowState::on_sample`].
pub fn handle_sample_result(
    state: &SnowState,
    params: &ProtocolParams,
    counts: SampleCounts,
) -> Result<SnowState> {
    let mut next = state.clone();
    next.on_sample(params, counts)?;
    Ok(next)
}

pub fn is_decided(state: &SnowState) -> Option<Color> {
    state.decided
}
