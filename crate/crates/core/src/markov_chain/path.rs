use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::generator::GeneratorMatrix;
use super::two_scale::StatePartition;
use crate::error::{Error, Result};

/// Right-continuous piecewise-constant chain trajectory on [t0, T].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainPath {
    t0: f64,
    horizon: f64,
    initial_state: usize,
    jump_times: Vec<f64>,
    states: Vec<usize>,
}

/// A maximal interval on which the chain sits in one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub state: usize,
}

impl Segment {
    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

impl ChainPath {
    pub fn new(
        t0: f64,
        horizon: f64,
        initial_state: usize,
        jump_times: Vec<f64>,
        states: Vec<usize>,
    ) -> Result<Self> {
        if !(horizon > t0) {
            return Err(Error::InvalidArgument(format!("horizon {horizon} must exceed t0 {t0}")));
        }
        if jump_times.len() != states.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} jump times but {} post-jump states",
                jump_times.len(),
                states.len()
            )));
        }
        let mut prev_t = t0;
        let mut prev_s = initial_state;
        for (&t, &s) in jump_times.iter().zip(&states) {
            if !(t > prev_t && t <= horizon) {
                return Err(Error::InvalidArgument(format!(
                    "jump time {t} not strictly increasing inside ({t0}, {horizon}]"
                )));
            }
            if s == prev_s {
                return Err(Error::InvalidArgument(format!("jump at {t} does not change state")));
            }
            prev_t = t;
            prev_s = s;
        }
        Ok(Self {
            t0,
            horizon,
            initial_state,
            jump_times,
            states,
        })
    }

    pub fn constant(state: usize, t0: f64, horizon: f64) -> Self {
        Self {
            t0,
            horizon,
            initial_state: state,
            jump_times: Vec::new(),
            states: Vec::new(),
        }
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn post_jump_states(&self) -> &[usize] {
        &self.states
    }

    pub fn n_jumps(&self) -> usize {
        self.jump_times.len()
    }

    pub fn final_state(&self) -> usize {
        self.states.last().copied().unwrap_or(self.initial_state)
    }

    /// State at time t (right-continuous); t is clamped to [t0, T].
    pub fn state_at(&self, t: f64) -> usize {
        let idx = self.jump_times.partition_point(|&s| s <= t);
        if idx == 0 {
            self.initial_state
        } else {
            self.states[idx - 1]
        }
    }

    pub fn segments(&self) -> impl Iterator<Item = Segment> + '_ {
        let n = self.jump_times.len();
        (0..=n).map(move |k| {
            let start = if k == 0 { self.t0 } else { self.jump_times[k - 1] };
            let end = if k == n { self.horizon } else { self.jump_times[k] };
            let state = if k == 0 { self.initial_state } else { self.states[k - 1] };
            Segment { start, end, state }
        })
    }

    /// Segments clipped to [a, b], empty pieces dropped.
    pub fn segments_in(&self, a: f64, b: f64) -> Vec<Segment> {
        let first = self.jump_times.partition_point(|&s| s <= a);
        let mut out = Vec::new();
        let mut start = a;
        let mut state = if first == 0 {
            self.initial_state
        } else {
            self.states[first - 1]
        };
        for k in first..self.jump_times.len() {
            let t = self.jump_times[k];
            if t >= b {
                break;
            }
            if t > start {
                out.push(Segment { start, end: t, state });
            }
            start = t;
            state = self.states[k];
        }
        if b > start {
            out.push(Segment { start, end: b, state });
        }
        out
    }

    /// Time spent in each of `n_states` states during [a, b].
    pub fn occupation(&self, a: f64, b: f64, n_states: usize) -> Vec<f64> {
        let mut occ = vec![0.0; n_states];
        for seg in self.segments_in(a, b) {
            occ[seg.state] += seg.len();
        }
        occ
    }

    /// Largest state index visited.
    pub fn max_state(&self) -> usize {
        self.states.iter().copied().fold(self.initial_state, usize::max)
    }
}

/// Exact event-driven simulation: Exp(−q_ii) holding times, jump to j with
/// probability q_ij / (−q_ii). States with zero exit rate are absorbing.
pub fn simulate_chain<R: Rng + ?Sized>(
    q: &GeneratorMatrix,
    initial_state: usize,
    t0: f64,
    horizon: f64,
    rng: &mut R,
) -> ChainPath {
    assert!(initial_state < q.dim(), "initial state {initial_state} out of range");
    assert!(horizon > t0, "horizon must exceed t0");
    let mut t = t0;
    let mut state = initial_state;
    let mut jump_times = Vec::new();
    let mut states = Vec::new();
    loop {
        let rate = q.exit_rate(state);
        if rate <= 0.0 {
            break;
        }
        let hold: f64 = Exp1.sample(rng);
        t += hold / rate;
        if t > horizon {
            break;
        }
        let u: f64 = rng.random::<f64>() * rate;
        let mut acc = 0.0;
        let mut next = state;
        for j in 0..q.dim() {
            if j == state {
                continue;
            }
            let r = q.rate(state, j);
            if r <= 0.0 {
                continue;
            }
            acc += r;
            next = j;
            if u < acc {
                break;
            }
        }
        jump_times.push(t);
        states.push(next);
        state = next;
    }
    ChainPath {
        t0,
        horizon,
        initial_state,
        jump_times,
        states,
    }
}

/// Map a path to block labels, erasing jumps that stay inside a block.
pub fn aggregate_path(path: &ChainPath, partition: &StatePartition) -> Result<ChainPath> {
    let initial = partition.block_of(path.initial_state)?;
    let mut jump_times = Vec::new();
    let mut states = Vec::new();
    let mut current = initial;
    for (&t, &s) in path.jump_times.iter().zip(&path.states) {
        let b = partition.block_of(s)?;
        if b != current {
            jump_times.push(t);
            states.push(b);
            current = b;
        }
    }
    Ok(ChainPath {
        t0: path.t0,
        horizon: path.horizon,
        initial_state: initial,
        jump_times,
        states,
    })
}

/// CSV with columns (path_id, jump_time, new_state); each path starts with a
/// row at t0 carrying its initial state.
pub fn write_chain_paths_csv<W: Write>(out: W, paths: &[ChainPath]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["path_id", "jump_time", "new_state"])?;
    for (id, p) in paths.iter().enumerate() {
        w.write_record([id.to_string(), p.t0.to_string(), p.initial_state.to_string()])?;
        for (t, s) in p.jump_times.iter().zip(&p.states) {
            w.write_record([id.to_string(), t.to_string(), s.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamKey;

    #[test]
    fn zero_generator_never_jumps() {
        let q = GeneratorMatrix::zeros(3);
        let p = simulate_chain(&q, 1, 0.0, 10.0, &mut StreamKey::new(1).rng());
        assert_eq!(p.n_jumps(), 0);
        assert_eq!(p.state_at(5.0), 1);
    }

    #[test]
    fn state_at_is_right_continuous() {
        let p = ChainPath::new(0.0, 1.0, 0, vec![0.25, 0.5], vec![1, 2]).unwrap();
        assert_eq!(p.state_at(0.0), 0);
        assert_eq!(p.state_at(0.2499), 0);
        assert_eq!(p.state_at(0.25), 1);
        assert_eq!(p.state_at(0.5), 2);
        assert_eq!(p.state_at(1.0), 2);
        let occ = p.occupation(0.0, 1.0, 3);
        assert_eq!(occ, vec![0.25, 0.25, 0.5]);
        let occ = p.occupation(0.3, 0.6, 3);
        assert!((occ[1] - 0.2).abs() < 1e-15 && (occ[2] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_paths() {
        assert!(ChainPath::new(0.0, 1.0, 0, vec![0.5, 0.4], vec![1, 0]).is_err());
        assert!(ChainPath::new(0.0, 1.0, 0, vec![0.5], vec![0]).is_err());
        assert!(ChainPath::new(0.0, 1.0, 0, vec![1.5], vec![1]).is_err());
        assert!(ChainPath::new(1.0, 1.0, 0, vec![], vec![]).is_err());
    }

    #[test]
    fn aggregation_erases_inner_jumps() {
        let part = StatePartition::new(vec![vec![0, 1], vec![2]]).unwrap();
        let p = ChainPath::new(0.0, 1.0, 0, vec![0.1, 0.4, 0.7], vec![1, 2, 0]).unwrap();
        let a = aggregate_path(&p, &part).unwrap();
        assert_eq!(a.initial_state(), 0);
        assert_eq!(a.jump_times(), &[0.4, 0.7]);
        assert_eq!(a.post_jump_states(), &[1, 0]);

        let inside = ChainPath::new(0.0, 1.0, 0, vec![0.1, 0.2], vec![1, 0]).unwrap();
        assert_eq!(aggregate_path(&inside, &part).unwrap().n_jumps(), 0);

        let bad = ChainPath::new(0.0, 1.0, 0, vec![0.1], vec![7]).unwrap();
        assert!(matches!(aggregate_path(&bad, &part), Err(Error::UnknownState(7))));
    }

    #[test]
    fn csv_layout() {
        let p = ChainPath::new(0.0, 1.0, 2, vec![0.5], vec![0]).unwrap();
        let mut buf = Vec::new();
        write_chain_paths_csv(&mut buf, &[p]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "path_id,jump_time,new_state\n0,0,2\n0,0.5,0\n");
    }
}
