use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::snow::{Color, SnowState, Variant};

/// How Byzantine nodes answer the queries that land on them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Answer a fixed stored color (alternating red/blue by node index).
    #[default]
    None,
    /// Never answer; the querier draws replacements.
    Refuse,
    /// Keep the correct nodes split evenly by telling each node the color
    /// of the half it is assigned to.
    BalanceKeeper,
    /// Answer the color opposite to the current correct majority.
    MinorityPush,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::None,
        Strategy::Refuse,
        Strategy::BalanceKeeper,
        Strategy::MinorityPush,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::None => "none",
            Strategy::Refuse => "refuse",
            Strategy::BalanceKeeper => "balance-keeper",
            Strategy::MinorityPush => "minority-push",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| {
                Error::Argument(format!(
                    "unknown adversary '{s}' (expected none, refuse, balance-keeper or minority-push)"
                ))
            })
    }
}

/// When the adversary picks its answers relative to the querier's draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdversaryTiming {
    #[default]
    BeforeSample,
    AfterSample,
}

/// Everything the adversary may look at: the full state of every correct
/// node.
#[derive(Debug, Clone, Copy)]
pub struct NetworkView<'a> {
    pub nodes: &'a [SnowState],
    pub reds: usize,
}

impl NetworkView<'_> {
    pub fn blues(&self) -> usize {
        self.nodes.len() - self.reds
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversaryState {
    pub strategy: Strategy,
    /// Color each correct node is pushed toward (BalanceKeeper only).
    pub assignments: Vec<Color>,
    /// Answers of each Byzantine node under [`Strategy::None`].
    pub stored: Vec<Color>,
    /// Number of times a correct node was moved to the other half.
    pub reassignments: u64,
}

impl AdversaryState {
    pub fn new(strategy: Strategy, view: &NetworkView<'_>, byzantine: usize) -> Self {
        let stored = (0..byzantine)
            .map(|i| if i % 2 == 0 { Color::Red } else { Color::Blue })
            .collect();
        let mut adv = Self {
            strategy,
            assignments: Vec::new(),
            stored,
            reassignments: 0,
        };
        if strategy == Strategy::BalanceKeeper {
            adv.assignments = view.nodes.iter().map(|s| s.col).collect();
            adv.rebalance(view);
        }
        adv
    }

    /// Lets the adversary react after correct node `node` processed a sample.
    pub fn observe(&mut self, view: &NetworkView<'_>, flipped: bool) {
        if self.strategy == Strategy::BalanceKeeper && flipped {
            self.rebalance(view);
        }
    }

    // Every node is pushed toward its own color, except that the
    // least-committed members of the majority are pushed across until the
    // assigned halves are even.
    fn rebalance(&mut self, view: &NetworkView<'_>) {
        let (reds, blues) = (view.reds, view.blues());
        let before = std::mem::take(&mut self.assignments);
        self.assignments = view.nodes.iter().map(|s| s.col).collect();
        if reds != blues {
            let majority = if reds > blues { Color::Red } else { Color::Blue };
            let need = reds.abs_diff(blues).div_ceil(2);
            let mut members: Vec<(u64, usize)> = view
                .nodes
                .iter()
                .enumerate()
                .filter(|(_, s)| s.col == majority)
                .map(|(i, s)| (skew(s), i))
                .collect();
            members.sort_unstable();
            for &(_, i) in members.iter().take(need) {
                self.assignments[i] = majority.opposite();
            }
        }
        if !before.is_empty() {
            self.reassignments += before
                .iter()
                .zip(&self.assignments)
                .filter(|(a, b)| a != b)
                .count() as u64;
        }
    }
}

/// How firmly a node holds its color: the consecutive counter for
/// Snowflake, the confidence gap for Snowball.
fn skew(s: &SnowState) -> u64 {
    match s.variant {
        Variant::Slush => 0,
        Variant::Snowflake => s.cnt,
        Variant::Snowball => s.d.of(s.col).saturating_sub(s.d.of(s.col.opposite())),
    }
}

/// Answer of Byzantine node `byz` to `querier`; `None` means no answer.
pub fn adversary_respond(
    adv: &AdversaryState,
    view: &NetworkView<'_>,
    querier: usize,
    byz: usize,
) -> Option<Color> {
    match adv.strategy {
        Strategy::None => Some(adv.stored[byz]),
        Strategy::Refuse => None,
        Strategy::BalanceKeeper => Some(adv.assignments[querier]),
        Strategy::MinorityPush => {
            let (reds, blues) = (view.reds, view.blues());
            Some(if reds > blues {
                Color::Blue
            } else if blues > reds {
                Color::Red
            } else {
                view.nodes[querier].col.opposite()
            })
        }
    }
}
