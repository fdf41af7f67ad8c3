//! Replay buffer with a protected demonstration prefix: demonstrations are
//! loaded once and never evicted; agent experience cycles through the
//! remaining capacity oldest-first.

use crate::env::Transition;
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    demos: Vec<Transition>,
    agent: Vec<Transition>,
    next_slot: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::argument("buffer capacity must be at least 1"));
        }
        Ok(ReplayBuffer {
            capacity,
            demos: Vec::new(),
            agent: Vec::new(),
            next_slot: 0,
        })
    }

    /// Installs the protected demonstration region. Must happen before any
    /// agent experience is pushed and must leave room for at least one agent
    /// transition.
    pub fn load_demos(&mut self, demos: Vec<Transition>) -> Result<()> {
        if !self.demos.is_empty() || !self.agent.is_empty() {
            return Err(Error::state("demonstrations must be loaded into an empty buffer"));
        }
        if demos.len() >= self.capacity {
            return Err(Error::argument(format!(
                "{} demonstrations do not fit a capacity-{} buffer with agent space",
                demos.len(),
                self.capacity
            )));
        }
        if demos.iter().any(|t| !t.is_demo) {
            return Err(Error::argument("demo region transition without is_demo flag"));
        }
        self.demos = demos;
        Ok(())
    }

    /// Appends one agent transition, evicting the oldest agent entry once the
    /// ring is full. Demonstrations are never touched.
    pub fn push(&mut self, t: Transition) {
        debug_assert!(!t.is_demo, "agent pushes must not carry the demo flag");
        let agent_capacity = self.capacity - self.demos.len();
        if self.agent.len() < agent_capacity {
            self.agent.push(t);
        } else {
            self.agent[self.next_slot] = t;
            self.next_slot = (self.next_slot + 1) % agent_capacity;
        }
    }

    pub fn len(&self) -> usize {
        self.demos.len() + self.agent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn demo_len(&self) -> usize {
        self.demos.len()
    }

    pub fn agent_len(&self) -> usize {
        self.agent.len()
    }

    pub fn demos(&self) -> &[Transition] {
        &self.demos
    }

    pub fn get(&self, i: usize) -> &Transition {
        if i < self.demos.len() {
            &self.demos[i]
        } else {
            &self.agent[i - self.demos.len()]
        }
    }

    /// Uniform index into the combined demo + agent contents.
    pub fn sample_index(&self, rng: &mut Rng) -> usize {
        rng.next_below(self.len())
    }

    /// Uniform batch with replacement.
    pub fn sample_batch(&self, batch_size: usize, rng: &mut Rng) -> Result<Vec<usize>> {
        if self.is_empty() {
            return Err(Error::state("cannot sample from an empty buffer"));
        }
        Ok((0..batch_size).map(|_| self.sample_index(rng)).collect())
    }

    pub(crate) fn parts(&self) -> (usize, &[Transition], &[Transition], usize) {
        (self.capacity, &self.demos, &self.agent, self.next_slot)
    }

    pub(crate) fn from_parts(
        capacity: usize,
        demos: Vec<Transition>,
        agent: Vec<Transition>,
        next_slot: usize,
    ) -> Self {
        ReplayBuffer {
            capacity,
            demos,
            agent,
            next_slot,
        }
    }
}
