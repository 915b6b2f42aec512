/// Per-step records of one rollout, stored column-wise.
#[derive(Debug, Clone, Default)]
pub struct RolloutBuffer {
    obs_dim: usize,
    capacity: usize,
    pub observations: Vec<f64>,
    pub actions: Vec<usize>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    /// Ground-truth penalty of each step, kept for curve logging.
    pub ground_truth: Vec<f64>,
}

impl RolloutBuffer {
    pub fn new(obs_dim: usize, capacity: usize) -> Self {
        Self {
            obs_dim,
            capacity,
            observations: Vec::with_capacity(obs_dim * capacity),
            actions: Vec::with_capacity(capacity),
            log_probs: Vec::with_capacity(capacity),
            rewards: Vec::with_capacity(capacity),
            values: Vec::with_capacity(capacity),
            dones: Vec::with_capacity(capacity),
            ground_truth: Vec::with_capacity(capacity),
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn push(
        &mut self,
        observation: &[f64],
        action: usize,
        log_prob: f64,
        reward: f64,
        value: f64,
        done: bool,
        ground_truth: f64,
    ) {
        assert!(!self.is_full(), "rollout buffer over capacity");
        assert_eq!(observation.len(), self.obs_dim);
        self.observations.extend_from_slice(observation);
        self.actions.push(action);
        self.log_probs.push(log_prob);
        self.rewards.push(reward);
        self.values.push(value);
        self.dones.push(done);
        self.ground_truth.push(ground_truth);
    }

    pub fn observation(&self, i: usize) -> &[f64] {
        &self.observations[i * self.obs_dim..(i + 1) * self.obs_dim]
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.len() >= self.capacity
    }

    pub fn clear(&mut self) {
        self.observations.clear();
        self.actions.clear();
        self.log_probs.clear();
        self.rewards.clear();
        self.values.clear();
        self.dones.clear();
        self.ground_truth.clear();
    }
}
