use serde::Serialize;

/// How a simulated path ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PathEnd {
    /// Reached the requested horizon.
    Horizon,
    /// Entered a state with no outgoing dynamics; the last state persists.
    Absorbed,
    /// A stopping rule fired (total mass left its guard interval).
    Stopped,
    /// Some coordinate exceeded the explosion threshold.
    Exploded,
}

/// Piecewise-constant path: `states[k]` holds on `[times[k], times[k + 1])`
/// and the last state holds until the horizon.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory<S> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
    pub seed: u64,
    pub meta: String,
    pub end: PathEnd,
}

impl<S> Trajectory<S> {
    pub fn new(initial: S, seed: u64, meta: impl Into<String>) -> Self {
        Self {
            times: vec![0.0],
            states: vec![initial],
            seed,
            meta: meta.into(),
            end: PathEnd::Horizon,
        }
    }

    /// Appends a state. Panics if `time` does not strictly exceed the last
    /// recorded time.
    pub fn push(&mut self, time: f64, state: S) {
        let last = *self.times.last().expect("trajectory is never empty");
        assert!(time > last, "trajectory times must increase: {time} <= {last}");
        self.times.push(time);
        self.states.push(state);
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> &S {
        self.states.last().expect("trajectory is never empty")
    }

    /// State in force at time `t` (clamped to the first state for `t < 0`).
    pub fn state_at(&self, t: f64) -> &S {
        let idx = self.times.partition_point(|&s| s <= t);
        &self.states[idx.saturating_sub(1)]
    }

    pub fn map<T>(&self, f: impl FnMut(&S) -> T) -> Trajectory<T> {
        Trajectory {
            times: self.times.clone(),
            states: self.states.iter().map(f).collect(),
            seed: self.seed,
            meta: self.meta.clone(),
            end: self.end,
        }
    }
}

/// Splits `[0, horizon]` into steps of length `dt`, the last one shortened
/// so the grid lands on `horizon` exactly.
pub(crate) fn time_grid(horizon: f64, dt: f64) -> impl Iterator<Item = (f64, f64)> {
    let steps = if horizon <= 0.0 {
        0
    } else {
        ((horizon / dt) - 1e-9).ceil().max(1.0) as u64
    };
    (1..=steps).map(move |k| {
        let t = if k == steps { horizon } else { k as f64 * dt };
        let prev = (k - 1) as f64 * dt;
        (t, t - prev)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_lookup() {
        let mut tr = Trajectory::new(0, 1, "");
        tr.push(1.0, 1);
        tr.push(2.5, 2);
        assert_eq!(*tr.state_at(0.0), 0);
        assert_eq!(*tr.state_at(0.99), 0);
        assert_eq!(*tr.state_at(1.0), 1);
        assert_eq!(*tr.state_at(10.0), 2);
    }

    #[test]
    #[should_panic]
    fn times_must_increase() {
        let mut tr = Trajectory::new(0, 1, "");
        tr.push(0.0, 1);
    }

    #[test]
    fn grid_lands_on_horizon() {
        let g: Vec<_> = time_grid(1.0, 0.3).collect();
        assert_eq!(g.len(), 4);
        assert_eq!(g.last().unwrap().0, 1.0);
        assert!((g.last().unwrap().1 - 0.1).abs() < 1e-12);
        let g: Vec<_> = time_grid(1.0, 0.25).collect();
        assert_eq!(g.len(), 4);
        assert_eq!(time_grid(0.0, 0.1).count(), 0);
    }
}
