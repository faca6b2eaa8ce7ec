use crate::rng::{stream_rng, Stream};
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkStatus {
    Available,
    TimedOut,
}

#[derive(Debug, Clone, PartialEq)]
enum Schedule {
    Always,
    Never,
    /// Row-major `[client][round]` availability.
    PerRound { rounds: usize, up: Vec<bool> },
}

/// Deterministic failure model. A request is answered after the client's
/// round-trip time when the server is up and never otherwise; the client
/// gives up once the delay exceeds its timeout.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityOracle {
    schedule: Schedule,
    round_trip_s: Vec<f64>,
}

impl ConnectivityOracle {
    pub fn always() -> Self {
        Self { schedule: Schedule::Always, round_trip_s: Vec::new() }
    }

    pub fn never() -> Self {
        Self { schedule: Schedule::Never, round_trip_s: Vec::new() }
    }

    /// Per-client, per-round availability. Status is constant within a round.
    pub fn sample(num_clients: usize, rounds: usize, availability_p: f64, seed: u64) -> Self {
        let mut rng = stream_rng(seed, Stream::Connectivity, 0);
        let up = (0..num_clients * rounds).map(|_| rng.random_bool(availability_p.clamp(0.0, 1.0))).collect();
        Self { schedule: Schedule::PerRound { rounds, up }, round_trip_s: Vec::new() }
    }

    /// Per-client round trip, used as the response delay when the server is up.
    pub fn with_round_trips(mut self, round_trip_s: Vec<f64>) -> Self {
        self.round_trip_s = round_trip_s;
        self
    }

    /// Whether the server answers this client at all during `round` (0-based).
    pub fn is_up(&self, client: usize, round: usize) -> bool {
        match &self.schedule {
            Schedule::Always => true,
            Schedule::Never => false,
            Schedule::PerRound { rounds, up } => {
                round < *rounds && up.get(client * rounds + round).copied().unwrap_or(false)
            }
        }
    }

    /// Simulated seconds until the server's reply arrives; infinite when it never does.
    pub fn response_delay_s(&self, client: usize, round: usize, _step: usize) -> f64 {
        if self.is_up(client, round) {
            self.round_trip_s.get(client).copied().unwrap_or(0.0)
        } else {
            f64::INFINITY
        }
    }

    pub fn status(&self, client: usize, round: usize, step: usize, timeout_s: f64) -> LinkStatus {
        if self.response_delay_s(client, round, step) <= timeout_s {
            LinkStatus::Available
        } else {
            LinkStatus::TimedOut
        }
    }

    /// Fraction of scheduled (client, round) slots that are up.
    pub fn availability(&self) -> f64 {
        match &self.schedule {
            Schedule::Always => 1.0,
            Schedule::Never => 0.0,
            Schedule::PerRound { up, .. } if up.is_empty() => 0.0,
            Schedule::PerRound { up, .. } => up.iter().filter(|u| **u).count() as f64 / up.len() as f64,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extremes() {
        let up = ConnectivityOracle::sample(5, 7, 1.0, 3);
        let down = ConnectivityOracle::sample(5, 7, 0.0, 3);
        for c in 0..5 {
            for r in 0..7 {
                assert_eq!(up.status(c, r, 0, 5.0), LinkStatus::Available);
                assert_eq!(down.status(c, r, 0, 5.0), LinkStatus::TimedOut);
            }
        }
    }

    #[test]
    fn half_availability_frequency() {
        let o = ConnectivityOracle::sample(100, 100, 0.5, 42);
        let a = o.availability();
        assert!((0.45..=0.55).contains(&a), "{a}");
        assert_eq!(o, ConnectivityOracle::sample(100, 100, 0.5, 42));
    }

    #[test]
    fn constant_within_round() {
        let o = ConnectivityOracle::sample(4, 10, 0.5, 1);
        for c in 0..4 {
            for r in 0..10 {
                let s0 = o.status(c, r, 0, 5.0);
                assert!((1..20).all(|s| o.status(c, r, s, 5.0) == s0));
            }
        }
    }

    #[test]
    fn slow_replies_time_out() {
        let o = ConnectivityOracle::always().with_round_trips(vec![0.4, 6.0]);
        assert_eq!(o.status(0, 0, 0, 5.0), LinkStatus::Available);
        assert_eq!(o.status(1, 0, 0, 5.0), LinkStatus::TimedOut);
    }
}
