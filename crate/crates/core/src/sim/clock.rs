use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClockEventKind {
    /// Everything one client did in a round, including the server work and
    /// network waits on its behalf.
    ClientPath,
    Aggregation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClockEvent {
    pub round: usize,
    pub client: Option<usize>,
    pub kind: ClockEventKind,
    pub duration_s: f64,
}

/// Simulated wall clock. Clients run in parallel, so a round lasts as long as
/// its slowest client path plus the aggregation that follows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimClock {
    now_s: f64,
    events: Vec<ClockEvent>,
    open_round: Option<usize>,
}

impl SimClock {
    pub fn now_s(&self) -> f64 {
        self.now_s
    }

    pub fn events(&self) -> &[ClockEvent] {
        &self.events
    }

    pub fn record(&mut self, event: ClockEvent) -> Result<()> {
        if !(event.duration_s >= 0.0 && event.duration_s.is_finite()) {
            return Err(Error::Input(format!("event duration must be >= 0, got {}", event.duration_s)));
        }
        if let Some(open) = self.open_round {
            if open != event.round {
                return Err(Error::Input(format!("round {open} still open, got event for {}", event.round)));
            }
        }
        self.open_round = Some(event.round);
        self.events.push(event);
        Ok(())
    }

    /// Closes `round`, advances the clock by its duration and returns it.
    pub fn close_round(&mut self, round: usize) -> f64 {
        let of_round = self.events.iter().filter(|e| e.round == round);
        let mut slowest: f64 = 0.0;
        let mut aggregation = 0.0;
        for e in of_round {
            match e.kind {
                ClockEventKind::ClientPath => slowest = slowest.max(e.duration_s),
                ClockEventKind::Aggregation => aggregation += e.duration_s,
            }
        }
        let duration = slowest + aggregation;
        self.now_s += duration;
        self.open_round = None;
        duration
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(round: usize, client: usize, d: f64) -> ClockEvent {
        ClockEvent { round, client: Some(client), kind: ClockEventKind::ClientPath, duration_s: d }
    }

    #[test]
    fn slowest_client_sets_the_pace() {
        let mut c = SimClock::default();
        c.record(path(0, 0, 1.5)).unwrap();
        c.record(path(0, 1, 4.0)).unwrap();
        c.record(ClockEvent { round: 0, client: None, kind: ClockEventKind::Aggregation, duration_s: 0.5 }).unwrap();
        assert_eq!(c.close_round(0), 4.5);
        c.record(path(1, 0, 1.0)).unwrap();
        assert_eq!(c.close_round(1), 1.0);
        assert_eq!(c.now_s(), 5.5);
    }

    #[test]
    fn rejects_negative_and_interleaved() {
        let mut c = SimClock::default();
        assert!(c.record(path(0, 0, -1.0)).is_err());
        c.record(path(0, 0, 1.0)).unwrap();
        assert!(c.record(path(1, 0, 1.0)).is_err());
    }
}
