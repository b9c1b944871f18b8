//! Precomputed jump-chain tables and the event loop shared by every aggregate simulation.

use rand::Rng;
use rand_distr::Exp1;

use crate::chain::BirthDeath;

/// Per-state total rate and up-jump probability of a birth–death chain.
#[derive(Debug, Clone)]
pub struct JumpTable {
    rate: Vec<f64>,
    p_up: Vec<f64>,
}

/// Where a path stopped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Passage {
    pub state: usize,
    pub time: f64,
    pub events: u64,
    /// First time the path was at or beyond the watch levels, if any.
    pub watch_time: Option<f64>,
}

/// Stopping rule for [`JumpTable::run`]: stop at `<= lower` or `>= upper`;
/// record the first entry into `<= watch.0` or `>= watch.1`.
#[derive(Debug, Clone, Copy)]
pub struct Stops {
    pub lower: usize,
    pub upper: usize,
    pub watch: (usize, usize),
    pub max_time: f64,
    pub max_events: u64,
}

impl JumpTable {
    pub fn new(chain: &impl BirthDeath) -> Self {
        let n = chain.size();
        let mut rate = Vec::with_capacity(n + 1);
        let mut p_up = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let (u, d) = (chain.up_rate(i), chain.down_rate(i));
            let r = u + d;
            rate.push(r);
            p_up.push(if r > 0.0 { u / r } else { 0.0 });
        }
        Self { rate, p_up }
    }

    pub fn size(&self) -> usize {
        self.rate.len() - 1
    }

    /// Runs the chain from `start` until a stop, the time cap or the event cap.
    ///
    /// `trajectory`, when given as `(stride, sink)`, receives `(time, state)`
    /// at time 0 and after every `stride`-th event.
    pub fn run<R: Rng + ?Sized>(
        &self,
        start: usize,
        stops: &Stops,
        rng: &mut R,
        mut trajectory: Option<(u64, &mut Vec<(f64, usize)>)>,
    ) -> Passage {
        let watched = |s: usize| s <= stops.watch.0 || s >= stops.watch.1;
        let mut state = start;
        let mut time = 0.0;
        let mut events = 0u64;
        let mut watch_time = watched(state).then_some(0.0);
        if let Some((_, sink)) = trajectory.as_mut() {
            sink.push((0.0, state));
        }
        while state > stops.lower && state < stops.upper {
            let rate = self.rate[state];
            if rate <= 0.0 || events >= stops.max_events {
                break;
            }
            let hold: f64 = rng.sample::<f64, _>(Exp1) / rate;
            if time + hold > stops.max_time {
                time = stops.max_time;
                break;
            }
            time += hold;
            events += 1;
            if rng.random::<f64>() < self.p_up[state] {
                state += 1;
            } else {
                state -= 1;
            }
            if watch_time.is_none() && watched(state) {
                watch_time = Some(time);
            }
            if let Some((stride, sink)) = trajectory.as_mut() {
                if events % *stride == 0 {
                    sink.push((time, state));
                }
            }
        }
        Passage {
            state,
            time,
            events,
            watch_time,
        }
    }
}
