//! Typed messages and exact word accounting.

use std::io::Write;

use serde::{Deserialize, Serialize};

/// Direction of a message on the star network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "site->coord")]
    SiteToCoordinator,
    #[serde(rename = "coord->site")]
    CoordinatorToSite,
}

/// Message contents, reduced to what determines their size.
///
/// Word model: a point costs `B` words, a node distribution `I = 2|support|`
/// words, and every count, scalar or real one word.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Payload {
    /// Hull vertices, one (q, cost) pair each.
    CostCurve { vertices: u64 },
    /// A bag of scalars.
    ScalarSet { values: u64 },
    /// Pivot marginal, site and index.
    Pivot,
    /// Local clustering: weighted centers (point + count), forwarded outlier
    /// points, forwarded collapsed nodes (point + collapse cost), forwarded
    /// node distributions (their total encoding words) and optionally the
    /// number of ignored points.
    Preclustering {
        weighted_centers: u64,
        points: u64,
        collapsed: u64,
        node_words: u64,
        count: bool,
    },
    /// A selected truncation threshold.
    TauReport,
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::CostCurve { .. } => "cost-curve",
            Payload::ScalarSet { .. } => "scalar-set",
            Payload::Pivot => "pivot",
            Payload::Preclustering { .. } => "preclustering",
            Payload::TauReport => "tau-report",
        }
    }

    pub fn words(&self, point_words: u64) -> u64 {
        match *self {
            Payload::CostCurve { vertices } => 2 * vertices,
            Payload::ScalarSet { values } => values,
            Payload::Pivot => 3,
            Payload::Preclustering {
                weighted_centers,
                points,
                collapsed,
                node_words,
                count,
            } => {
                weighted_centers * (point_words + 1)
                    + points * point_words
                    + collapsed * (point_words + 1)
                    + node_words
                    + u64::from(count)
            }
            Payload::TauReport => 1,
        }
    }

    /// Words spent on forwarded outlier identities.
    pub fn outlier_words(&self, point_words: u64) -> u64 {
        match *self {
            Payload::Preclustering {
                points,
                collapsed,
                node_words,
                ..
            } => points * point_words + collapsed * (point_words + 1) + node_words,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub round: u32,
    pub direction: Direction,
    pub site: usize,
    pub payload: Payload,
    pub words: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundTotals {
    pub round: u32,
    pub site_to_coordinator: u64,
    pub coordinator_to_site: u64,
}

/// Every message of a run plus per-round and overall totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommLedger {
    pub point_words: u64,
    pub messages: Vec<Message>,
    pub rounds: Vec<RoundTotals>,
    pub total: u64,
    pub outlier_words: u64,
}

/// One line of the transcript dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub round: u32,
    pub direction: Direction,
    pub site: usize,
    #[serde(rename = "payload-kind")]
    pub payload_kind: String,
    pub words: u64,
}

impl CommLedger {
    pub fn new(point_words: u64) -> Self {
        Self {
            point_words,
            messages: Vec::new(),
            rounds: Vec::new(),
            total: 0,
            outlier_words: 0,
        }
    }

    pub fn send(&mut self, round: u32, direction: Direction, site: usize, payload: Payload) -> u64 {
        let words = payload.words(self.point_words);
        self.outlier_words += payload.outlier_words(self.point_words);
        let pos = match self.rounds.iter().position(|r| r.round == round) {
            Some(p) => p,
            None => {
                self.rounds.push(RoundTotals {
                    round,
                    ..Default::default()
                });
                self.rounds.sort_by_key(|r| r.round);
                self.rounds.iter().position(|r| r.round == round).expect("inserted")
            }
        };
        match direction {
            Direction::SiteToCoordinator => self.rounds[pos].site_to_coordinator += words,
            Direction::CoordinatorToSite => self.rounds[pos].coordinator_to_site += words,
        }
        self.total += words;
        self.messages.push(Message {
            round,
            direction,
            site,
            payload,
            words,
        });
        words
    }

    /// The coordinator's broadcast, counted once per site.
    pub fn broadcast(&mut self, round: u32, sites: usize, payload: Payload) {
        for site in 0..sites {
            self.send(round, Direction::CoordinatorToSite, site, payload.clone());
        }
    }

    pub fn num_rounds(&self) -> u32 {
        self.rounds.iter().map(|r| r.round).max().unwrap_or(0)
    }

    /// Total words of messages in the given direction.
    pub fn words(&self, direction: Direction) -> u64 {
        self.rounds
            .iter()
            .map(|r| match direction {
                Direction::SiteToCoordinator => r.site_to_coordinator,
                Direction::CoordinatorToSite => r.coordinator_to_site,
            })
            .sum()
    }

    pub fn transcript(&self) -> Vec<TranscriptRecord> {
        self.messages
            .iter()
            .map(|m| TranscriptRecord {
                round: m.round,
                direction: m.direction,
                site: m.site,
                payload_kind: m.payload.kind().to_string(),
                words: m.words,
            })
            .collect()
    }

    /// Writes the transcript as newline-delimited JSON.
    pub fn write_transcript<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for rec in self.transcript() {
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}
