//! Dual-view experience buffer: every transition stores the privileged state
//! AND the paired noisy observation, so the teacher and student can learn
//! from the same samples. Also holds the expert demonstration buffer and its
//! text file format.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("transition violates the noise box at index {index}: |o - s| = {diff:e} > {bound:e}")]
    NoiseBox { index: usize, diff: f64, bound: f64 },
    #[error("transition has non-finite reward {0}")]
    NonFiniteReward(f64),
    #[error("action entry {index} = {value} outside [{low}, {high}]")]
    ActionBounds {
        index: usize,
        value: f64,
        low: f64,
        high: f64,
    },
    #[error("cannot sample from an empty buffer")]
    Empty,
    #[error("dimension mismatch: {0}")]
    Dims(String),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// One environment step, carrying both views of each state.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub s: Vec<f64>,
    pub o: Vec<f64>,
    pub a: Vec<f64>,
    pub r: f64,
    pub s_next: Vec<f64>,
    pub o_next: Vec<f64>,
    pub done: bool,
    pub alpha_at_collection: f64,
}

/// FIFO ring buffer of transitions with invariant checks on insert.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    action_low: f64,
    action_high: f64,
    items: Vec<Transition>,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, action_low: f64, action_high: f64) -> Self {
        assert!(capacity > 0, "capacity must be positive");
        ReplayBuffer {
            capacity,
            action_low,
            action_high,
            items: Vec::new(),
            cursor: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, idx: usize) -> &Transition {
        &self.items[idx]
    }

    /// Inserts a transition, evicting the oldest when full. Rejects
    /// transitions whose stored observation leaves the noise box, whose
    /// reward is non-finite, or whose action is out of bounds.
    pub fn push(&mut self, t: Transition) -> Result<(), ReplayError> {
        validate_noise_box(&t.s, &t.o, t.alpha_at_collection)?;
        validate_noise_box(&t.s_next, &t.o_next, t.alpha_at_collection)?;
        if !t.r.is_finite() {
            return Err(ReplayError::NonFiniteReward(t.r));
        }
        for (i, &a) in t.a.iter().enumerate() {
            if a < self.action_low || a > self.action_high {
                return Err(ReplayError::ActionBounds {
                    index: i,
                    value: a,
                    low: self.action_low,
                    high: self.action_high,
                });
            }
        }
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.cursor] = t;
            self.cursor = (self.cursor + 1) % self.capacity;
        }
        Ok(())
    }

    /// Uniform sample with replacement; deterministic under a seeded rng.
    pub fn sample_indices<R: Rng>(&self, n: usize, rng: &mut R) -> Result<Vec<usize>, ReplayError> {
        if self.items.is_empty() {
            return Err(ReplayError::Empty);
        }
        Ok((0..n).map(|_| rng.random_range(0..self.items.len())).collect())
    }

    pub fn sample_minibatch<R: Rng>(
        &self,
        n: usize,
        rng: &mut R,
    ) -> Result<Vec<&Transition>, ReplayError> {
        let idx = self.sample_indices(n, rng)?;
        Ok(idx.into_iter().map(|i| &self.items[i]).collect())
    }

    /// Checks the noise-box invariant over the whole buffer (O(len)).
    pub fn audit(&self) -> Result<(), ReplayError> {
        for t in &self.items {
            validate_noise_box(&t.s, &t.o, t.alpha_at_collection)?;
            validate_noise_box(&t.s_next, &t.o_next, t.alpha_at_collection)?;
        }
        Ok(())
    }
}

fn validate_noise_box(s: &[f64], o: &[f64], alpha: f64) -> Result<(), ReplayError> {
    if s.len() != o.len() {
        return Err(ReplayError::Dims(format!(
            "state dim {} != observation dim {}",
            s.len(),
            o.len()
        )));
    }
    for i in 0..s.len() {
        let diff = (o[i] - s[i]).abs();
        let bound = alpha * s[i].abs();
        if diff > bound {
            return Err(ReplayError::NoiseBox {
                index: i,
                diff,
                bound,
            });
        }
    }
    Ok(())
}

/// Index-aligned flat matrices for one sampled minibatch: row i of every
/// field comes from the same transition, so the teacher view (s, a, r, s',
/// done) and the student view (o, a, r, o', done) stay paired.
#[derive(Debug, Clone)]
pub struct MiniBatch {
    pub rows: usize,
    pub state_dim: usize,
    pub obs_dim: usize,
    pub action_dim: usize,
    pub s: Vec<f64>,
    pub o: Vec<f64>,
    pub a: Vec<f64>,
    pub r: Vec<f64>,
    pub s_next: Vec<f64>,
    pub o_next: Vec<f64>,
    pub done: Vec<f64>,
}

impl MiniBatch {
    pub fn gather(transitions: &[&Transition]) -> Self {
        assert!(!transitions.is_empty(), "empty minibatch");
        let rows = transitions.len();
        let state_dim = transitions[0].s.len();
        let obs_dim = transitions[0].o.len();
        let action_dim = transitions[0].a.len();
        let mut batch = MiniBatch {
            rows,
            state_dim,
            obs_dim,
            action_dim,
            s: Vec::with_capacity(rows * state_dim),
            o: Vec::with_capacity(rows * obs_dim),
            a: Vec::with_capacity(rows * action_dim),
            r: Vec::with_capacity(rows),
            s_next: Vec::with_capacity(rows * state_dim),
            o_next: Vec::with_capacity(rows * obs_dim),
            done: Vec::with_capacity(rows),
        };
        for t in transitions {
            batch.s.extend_from_slice(&t.s);
            batch.o.extend_from_slice(&t.o);
            batch.a.extend_from_slice(&t.a);
            batch.r.push(t.r);
            batch.s_next.extend_from_slice(&t.s_next);
            batch.o_next.extend_from_slice(&t.o_next);
            batch.done.push(if t.done { 1.0 } else { 0.0 });
        }
        batch
    }

    /// Replaces the student's observation view with fresh noise at scale
    /// `alpha`, drawn from the stored privileged states. Used while the
    /// curriculum ramps, so already-collected data matches the current
    /// noise level.
    pub fn renoise_student_view<R: Rng>(&mut self, alpha: f64, rng: &mut R) {
        let d = self.state_dim;
        for row in 0..self.rows {
            crate::envs::observe_into(
                &self.s[row * d..(row + 1) * d],
                alpha,
                rng,
                &mut self.o[row * d..(row + 1) * d],
            );
        }
        let mut next = vec![0.0; d];
        for row in 0..self.rows {
            crate::envs::observe_into(&self.s_next[row * d..(row + 1) * d], alpha, rng, &mut next);
            self.o_next[row * d..(row + 1) * d].copy_from_slice(&next);
        }
    }
}

/// Expert demonstrations: (state, action) pairs with episode boundaries.
#[derive(Debug, Clone, Default)]
pub struct ExpertBuffer {
    pub state_dim: usize,
    pub action_dim: usize,
    pairs: Vec<(Vec<f64>, Vec<f64>)>,
    /// Exclusive end index of each episode.
    episode_ends: Vec<usize>,
}

impl ExpertBuffer {
    pub fn new(state_dim: usize, action_dim: usize) -> Self {
        ExpertBuffer {
            state_dim,
            action_dim,
            pairs: Vec::new(),
            episode_ends: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn episodes(&self) -> usize {
        self.episode_ends.len()
    }

    pub fn pair(&self, idx: usize) -> (&[f64], &[f64]) {
        let (s, a) = &self.pairs[idx];
        (s, a)
    }

    /// Pairs of episode `ep` in collection order.
    pub fn episode(&self, ep: usize) -> &[(Vec<f64>, Vec<f64>)] {
        let start = if ep == 0 { 0 } else { self.episode_ends[ep - 1] };
        &self.pairs[start..self.episode_ends[ep]]
    }

    pub fn push_pair(&mut self, s: Vec<f64>, a: Vec<f64>) {
        assert_eq!(s.len(), self.state_dim, "state dim mismatch");
        assert_eq!(a.len(), self.action_dim, "action dim mismatch");
        self.pairs.push((s, a));
    }

    /// Marks the end of the episode currently being filled.
    pub fn end_episode(&mut self) {
        let last = self.episode_ends.last().copied().unwrap_or(0);
        if self.pairs.len() > last {
            self.episode_ends.push(self.pairs.len());
        }
    }

    /// Uniform (s*, a*) minibatch with replacement, flattened row-major.
    pub fn sample_flat<R: Rng>(&self, n: usize, rng: &mut R) -> Result<(Vec<f64>, Vec<f64>), ReplayError> {
        if self.pairs.is_empty() {
            return Err(ReplayError::Empty);
        }
        let mut s = Vec::with_capacity(n * self.state_dim);
        let mut a = Vec::with_capacity(n * self.action_dim);
        for _ in 0..n {
            let idx = rng.random_range(0..self.pairs.len());
            s.extend_from_slice(&self.pairs[idx].0);
            a.extend_from_slice(&self.pairs[idx].1);
        }
        Ok((s, a))
    }

    pub fn save(&self, path: &Path) -> Result<(), ReplayError> {
        let mut out = String::new();
        let _ = writeln!(out, "state_dim={},action_dim={}", self.state_dim, self.action_dim);
        for ep in 0..self.episodes() {
            if ep > 0 {
                out.push('\n');
            }
            for (s, a) in self.episode(ep) {
                let fields: Vec<String> = s.iter().chain(a.iter()).map(|v| format!("{v}")).collect();
                let _ = writeln!(out, "{}", fields.join(","));
            }
        }
        let mut file = std::fs::File::create(path)?;
        file.write_all(out.as_bytes())?;
        Ok(())
    }
}

/// Parses the demonstration text format: a `state_dim=<n>,action_dim=<m>`
/// header, one comma-separated transition per line, blank lines between
/// episodes.
pub fn load_demonstrations(path: &Path) -> Result<ExpertBuffer, ReplayError> {
    let display = path.display().to_string();
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines().enumerate();

    let (_, header) = lines.next().ok_or_else(|| ReplayError::Parse {
        path: display.clone(),
        line: 1,
        message: "empty file".into(),
    })?;
    let header = header?;
    let (state_dim, action_dim) = parse_header(&header).map_err(|message| ReplayError::Parse {
        path: display.clone(),
        line: 1,
        message,
    })?;

    let mut buf = ExpertBuffer::new(state_dim, action_dim);
    for (lineno, line) in lines {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            buf.end_episode();
            continue;
        }
        let values: Result<Vec<f64>, _> = trimmed.split(',').map(|f| f.trim().parse::<f64>()).collect();
        let values = values.map_err(|e| ReplayError::Parse {
            path: display.clone(),
            line: lineno + 1,
            message: format!("bad number: {e}"),
        })?;
        if values.len() != state_dim + action_dim {
            return Err(ReplayError::Parse {
                path: display.clone(),
                line: lineno + 1,
                message: format!(
                    "expected {} fields, found {}",
                    state_dim + action_dim,
                    values.len()
                ),
            });
        }
        let (s, a) = values.split_at(state_dim);
        buf.push_pair(s.to_vec(), a.to_vec());
    }
    buf.end_episode();
    if buf.is_empty() {
        return Err(ReplayError::Parse {
            path: display,
            line: 2,
            message: "no demonstration rows".into(),
        });
    }
    Ok(buf)
}

fn parse_header(header: &str) -> Result<(usize, usize), String> {
    let mut state_dim = None;
    let mut action_dim = None;
    for part in header.trim().split(',') {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| format!("malformed header field '{part}'"))?;
        let parsed: usize = value
            .trim()
            .parse()
            .map_err(|_| format!("bad value in '{part}'"))?;
        match key.trim() {
            "state_dim" => state_dim = Some(parsed),
            "action_dim" => action_dim = Some(parsed),
            other => return Err(format!("unknown header key '{other}'")),
        }
    }
    match (state_dim, action_dim) {
        (Some(s), Some(a)) if s > 0 && a > 0 => Ok((s, a)),
        _ => Err("header must declare positive state_dim and action_dim".into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn transition(tag: f64) -> Transition {
        Transition {
            s: vec![tag, -tag],
            o: vec![tag, -tag],
            a: vec![0.5],
            r: -tag,
            s_next: vec![tag + 1.0, -tag],
            o_next: vec![tag + 1.0, -tag],
            done: false,
            alpha_at_collection: 0.0,
        }
    }

    #[test]
    fn push_grows_then_evicts_fifo() {
        let mut buf = ReplayBuffer::new(2, -1.0, 1.0);
        buf.push(transition(1.0)).unwrap();
        assert_eq!(buf.len(), 1);
        buf.push(transition(2.0)).unwrap();
        buf.push(transition(3.0)).unwrap();
        assert_eq!(buf.len(), 2);
        let held: Vec<f64> = (0..2).map(|i| buf.get(i).s[0]).collect();
        assert!(held.contains(&2.0) && held.contains(&3.0), "held {held:?}");
    }

    #[test]
    fn fifo_keeps_exactly_the_last_capacity_pushes() {
        let cap = 5;
        let extra = 7;
        let mut buf = ReplayBuffer::new(cap, -1.0, 1.0);
        for k in 0..cap + extra {
            buf.push(transition(k as f64)).unwrap();
        }
        let mut held: Vec<f64> = (0..cap).map(|i| buf.get(i).s[0]).collect();
        held.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expect: Vec<f64> = (extra..cap + extra).map(|k| k as f64).collect();
        assert_eq!(held, expect);
    }

    #[test]
    fn noise_box_violations_are_rejected() {
        let mut buf = ReplayBuffer::new(4, -1.0, 1.0);
        let mut t = transition(1.0);
        t.o[0] = t.s[0] + 0.5; // exceeds alpha = 0 box
        assert!(matches!(buf.push(t), Err(ReplayError::NoiseBox { .. })));
        assert!(buf.is_empty());
    }

    #[test]
    fn out_of_bounds_action_rejected() {
        let mut buf = ReplayBuffer::new(4, -1.0, 1.0);
        let mut t = transition(1.0);
        t.a[0] = 1.5;
        assert!(matches!(buf.push(t), Err(ReplayError::ActionBounds { .. })));
    }

    #[test]
    fn sampling_single_item_repeats_it() {
        let mut buf = ReplayBuffer::new(4, -1.0, 1.0);
        buf.push(transition(9.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let batch = buf.sample_minibatch(4, &mut rng).unwrap();
        assert_eq!(batch.len(), 4);
        assert!(batch.iter().all(|t| t.s[0] == 9.0));
    }

    #[test]
    fn sampling_is_deterministic_under_seed() {
        let mut buf = ReplayBuffer::new(64, -1.0, 1.0);
        for k in 0..20 {
            buf.push(transition(k as f64)).unwrap();
        }
        let mut r1 = ChaCha8Rng::seed_from_u64(3);
        let mut r2 = ChaCha8Rng::seed_from_u64(3);
        let i1 = buf.sample_indices(16, &mut r1).unwrap();
        let i2 = buf.sample_indices(16, &mut r2).unwrap();
        assert_eq!(i1, i2);
    }

    #[test]
    fn empty_buffer_errors() {
        let buf = ReplayBuffer::new(4, -1.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            buf.sample_indices(1, &mut rng),
            Err(ReplayError::Empty)
        ));
    }

    #[test]
    fn sampling_is_close_to_uniform() {
        // Chi-square style check: each of 10 items within 3 sigma of n/10.
        let mut buf = ReplayBuffer::new(10, -1.0, 1.0);
        for k in 0..10 {
            buf.push(transition(k as f64)).unwrap();
        }
        let n = 100_000usize;
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let idx = buf.sample_indices(n, &mut rng).unwrap();
        let mut counts = [0usize; 10];
        for i in idx {
            counts[i] += 1;
        }
        let p = 0.1;
        let mean = n as f64 * p;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for (i, &c) in counts.iter().enumerate() {
            assert!(
                (c as f64 - mean).abs() <= 3.0 * sigma,
                "item {i} drawn {c} times, expected {mean} +- {sigma}"
            );
        }
    }

    #[test]
    fn minibatch_views_stay_index_aligned() {
        let mut buf = ReplayBuffer::new(8, -1.0, 1.0);
        for k in 0..8 {
            let mut t = transition(k as f64);
            t.r = k as f64;
            buf.push(t).unwrap();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sample = buf.sample_minibatch(6, &mut rng).unwrap();
        let batch = MiniBatch::gather(&sample);
        for row in 0..batch.rows {
            // The transition's s[0] equals its reward by construction.
            assert_eq!(batch.s[row * 2], batch.r[row]);
            assert_eq!(batch.o[row * 2], batch.s[row * 2]);
        }
    }

    #[test]
    fn renoise_respects_current_alpha() {
        let mut buf = ReplayBuffer::new(8, -1.0, 1.0);
        for k in 1..=8 {
            buf.push(transition(k as f64)).unwrap();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let sample = buf.sample_minibatch(8, &mut rng).unwrap();
        let mut batch = MiniBatch::gather(&sample);
        batch.renoise_student_view(0.25, &mut rng);
        for row in 0..batch.rows {
            for j in 0..2 {
                let s = batch.s[row * 2 + j];
                let o = batch.o[row * 2 + j];
                assert!((o - s).abs() <= 0.25 * s.abs());
            }
        }
    }

    #[test]
    fn demo_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("demo.txt");
        let mut buf = ExpertBuffer::new(2, 1);
        buf.push_pair(vec![0.1, -0.2], vec![0.3]);
        buf.push_pair(vec![1.0 / 3.0, 2.0f64.sqrt()], vec![-1.0 / 7.0]);
        buf.end_episode();
        buf.push_pair(vec![5e-324, -0.0], vec![1e308]);
        buf.end_episode();
        buf.save(&path).unwrap();

        let loaded = load_demonstrations(&path).unwrap();
        assert_eq!(loaded.len(), 3);
        assert_eq!(loaded.episodes(), 2);
        for i in 0..3 {
            let (s0, a0) = buf.pair(i);
            let (s1, a1) = loaded.pair(i);
            for (x, y) in s0.iter().zip(s1.iter()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
            for (x, y) in a0.iter().zip(a1.iter()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn demo_header_and_rows_parse() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("demo.txt");
        let mut content = String::from("state_dim=2,action_dim=1\n");
        for k in 0..200 {
            content.push_str(&format!("{},{},{}\n", k, -k, 0));
        }
        std::fs::write(&path, content).unwrap();
        let buf = load_demonstrations(&path).unwrap();
        assert_eq!(buf.len(), 200);
        assert_eq!(buf.episodes(), 1);
    }

    #[test]
    fn empty_demo_data_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("demo.txt");
        std::fs::write(&path, "state_dim=2,action_dim=1\n").unwrap();
        assert!(matches!(
            load_demonstrations(&path),
            Err(ReplayError::Parse { .. })
        ));
    }

    #[test]
    fn malformed_row_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("demo.txt");
        std::fs::write(&path, "state_dim=2,action_dim=1\n1,2,3\n1,oops,3\n").unwrap();
        match load_demonstrations(&path) {
            Err(ReplayError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
