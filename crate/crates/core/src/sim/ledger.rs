use serde::Serialize;

/// Fixed per-message framing overhead.
pub const FRAME_HEADER_BYTES: u64 = 16;

/// Wire size of a message carrying `elements` values at 32-bit precision.
pub fn account_bytes(elements: usize) -> u64 {
    4 * elements as u64 + FRAME_HEADER_BYTES
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    /// Client to server: smashed data and end-of-round reports.
    Up,
    /// Server to client: smashed-data gradients.
    Down,
    /// Fresh prefixes pushed to clients.
    Broadcast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CommEvent {
    pub round: usize,
    pub client: usize,
    pub channel: Channel,
    pub bytes: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ByteTotals {
    pub up: u64,
    pub down: u64,
    pub broadcast: u64,
}

impl ByteTotals {
    pub fn total(&self) -> u64 {
        self.up + self.down + self.broadcast
    }

    fn add(&mut self, channel: Channel, bytes: u64) {
        match channel {
            Channel::Up => self.up += bytes,
            Channel::Down => self.down += bytes,
            Channel::Broadcast => self.broadcast += bytes,
        }
    }
}

/// Double-entry byte accounting: every message is logged as an event and
/// also added to running per-round counters, and the two must agree.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CommLedger {
    events: Vec<CommEvent>,
    per_round: Vec<ByteTotals>,
}

impl CommLedger {
    pub fn record(&mut self, round: usize, client: usize, channel: Channel, bytes: u64) {
        self.events.push(CommEvent { round, client, channel, bytes });
        if self.per_round.len() <= round {
            self.per_round.resize(round + 1, ByteTotals::default());
        }
        self.per_round[round].add(channel, bytes);
    }

    pub fn events(&self) -> &[CommEvent] {
        &self.events
    }

    pub fn round(&self, round: usize) -> ByteTotals {
        self.per_round.get(round).copied().unwrap_or_default()
    }

    /// Running totals through `round` inclusive.
    pub fn cumulative_through(&self, round: usize) -> ByteTotals {
        let mut acc = ByteTotals::default();
        for t in self.per_round.iter().take(round + 1) {
            acc.up += t.up;
            acc.down += t.down;
            acc.broadcast += t.broadcast;
        }
        acc
    }

    pub fn cumulative(&self) -> ByteTotals {
        self.cumulative_through(self.per_round.len().saturating_sub(1))
    }

    /// Re-derives every round's counters from the event log.
    pub fn balances(&self) -> bool {
        let mut replay = vec![ByteTotals::default(); self.per_round.len()];
        for e in &self.events {
            match replay.get_mut(e.round) {
                Some(t) => t.add(e.channel, e.bytes),
                None => return false,
            }
        }
        replay == self.per_round
    }
}
