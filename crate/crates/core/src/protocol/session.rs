use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::qsim::Bits;

use super::{HookCtx, Result, ServerView, World};

/// Picks one outcome out of a probability vector.
pub trait Chooser {
    fn choose(&mut self, probs: &[f64]) -> usize;
}

fn sample_index(rng: &mut ChaCha8Rng, probs: &[f64], total: f64) -> usize {
    let mut r = rng.random::<f64>() * total;
    for (i, p) in probs.iter().enumerate() {
        if r < *p {
            return i;
        }
        r -= p;
    }
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

/// Source of measurement and adversary-coin outcomes.
#[derive(Clone, Debug)]
pub enum OutcomeSource {
    /// Born-rule sampling from a seeded stream.
    Sampled(ChaCha8Rng),
    /// Follows a forced prefix of choices (then always 0), logging the
    /// number of options and the path probability.
    Scripted { forced: Vec<usize>, pos: usize, options: Vec<usize>, prob: f64 },
}

impl OutcomeSource {
    pub fn sampled(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        OutcomeSource::Sampled(rng)
    }

    pub fn scripted(forced: Vec<usize>) -> Self {
        OutcomeSource::Scripted { forced, pos: 0, options: Vec::new(), prob: 1.0 }
    }

    /// Probability of the path taken so far (1 when sampling).
    pub fn path_probability(&self) -> f64 {
        match self {
            OutcomeSource::Sampled(_) => 1.0,
            OutcomeSource::Scripted { prob, .. } => *prob,
        }
    }
}

impl Chooser for OutcomeSource {
    fn choose(&mut self, probs: &[f64]) -> usize {
        let total: f64 = probs.iter().sum();
        match self {
            OutcomeSource::Sampled(rng) => sample_index(rng, probs, total),
            OutcomeSource::Scripted { forced, pos, options, prob } => {
                let i = forced.get(*pos).copied().unwrap_or(0).min(probs.len() - 1);
                *pos += 1;
                // below the prune weight the path is dropped anyway, so stop branching;
                // this keeps redraw loops from growing the tree without bound
                options.push(if *prob < crate::qsim::BRANCH_PRUNE { 1 } else { probs.len() });
                *prob *= probs[i] / total;
                i
            }
        }
    }
}

/// Ordered (client message, server message) pairs.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub rounds: Vec<(Vec<u8>, Vec<u8>)>,
}

impl Transcript {
    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }
}

/// A message: tag then fields, each length-prefixed (u32 little-endian).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Message(Vec<u8>);

impl Message {
    pub fn new(tag: &str) -> Self {
        Message::default().field(tag.as_bytes())
    }

    pub fn field(mut self, data: &[u8]) -> Self {
        self.0.extend_from_slice(&(data.len() as u32).to_le_bytes());
        self.0.extend_from_slice(data);
        self
    }

    pub fn bits(self, b: &Bits) -> Self {
        let s = b.to_string();
        self.field(s.as_bytes())
    }

    pub fn number(self, v: u64) -> Self {
        self.field(&v.to_le_bytes())
    }

    pub fn bytes(&self) -> &[u8] {
        &self.0
    }

    /// Splits serialized bytes back into fields.
    pub fn fields(bytes: &[u8]) -> Option<Vec<Vec<u8>>> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < bytes.len() {
            let len = u32::from_le_bytes(bytes.get(i..i + 4)?.try_into().ok()?) as usize;
            i += 4;
            out.push(bytes.get(i..i + len)?.to_vec());
            i += len;
        }
        Some(out)
    }
}

/// Test hooks that force ideal functionalities to chosen outputs.
#[derive(Clone, Debug, Default)]
pub struct Rigging {
    /// Forced BB84 descriptor index (0, 1, +, − as 0..4) for every ideal round.
    pub bb84: Option<u8>,
}

/// Everything one protocol execution owns.
#[derive(Debug)]
pub struct Session {
    pub world: World,
    pub rig: Rigging,
    transcript: Transcript,
    client_rng: ChaCha8Rng,
    outcomes: OutcomeSource,
    scope: Vec<String>,
    protocol: String,
    divergence: Option<usize>,
    enumerate_client: bool,
}

impl Session {
    pub fn new(seed: u64, outcomes: OutcomeSource) -> Self {
        let mut client_rng = ChaCha8Rng::seed_from_u64(seed);
        client_rng.set_stream(0);
        Self {
            world: World::new(),
            rig: Rigging::default(),
            transcript: Transcript::default(),
            client_rng,
            outcomes,
            scope: Vec::new(),
            protocol: String::new(),
            divergence: None,
            enumerate_client: false,
        }
    }

    pub fn set_protocol(&mut self, id: &str) {
        self.protocol = id.to_string();
    }

    pub fn protocol(&self) -> &str {
        &self.protocol
    }

    /// Routes client randomness through the outcome source so exact runs
    /// also enumerate the client's choices.
    pub fn set_enumerate_client(&mut self, on: bool) {
        self.enumerate_client = on;
    }

    pub fn outcomes(&mut self) -> &mut OutcomeSource {
        &mut self.outcomes
    }

    /// The world together with the outcome source, for channels that need both.
    pub fn world_and_outcomes(&mut self) -> (&mut World, &mut OutcomeSource) {
        (&mut self.world, &mut self.outcomes)
    }

    pub fn into_parts(self) -> (World, Transcript, OutcomeSource, Option<usize>) {
        (self.world, self.transcript, self.outcomes, self.divergence)
    }

    // ---- naming ----

    /// Full register name for a name local to the current scope.
    pub fn reg(&self, local: &str) -> String {
        if self.scope.is_empty() {
            local.to_string()
        } else {
            format!("{}/{}", self.scope.join("/"), local)
        }
    }

    /// Runs `f` with register names prefixed by `name`.
    pub fn scoped<T>(&mut self, name: &str, f: impl FnOnce(&mut Session) -> T) -> T {
        self.scope.push(name.to_string());
        let out = f(self);
        self.scope.pop();
        out
    }

    // ---- rounds ----

    /// Sends a client message, opening a new round.
    pub fn send(&mut self, msg: Message) -> usize {
        self.transcript.rounds.push((msg.0, Vec::new()));
        self.transcript.rounds.len() - 1
    }

    /// Records the server's reply to the current round.
    pub fn reply(&mut self, msg: Message) {
        if let Some(last) = self.transcript.rounds.last_mut() {
            last.1 = msg.0;
        }
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn round(&self) -> usize {
        self.transcript.rounds.len()
    }

    /// Marks the point where the two modes of a protocol start to differ.
    pub fn mark_divergence(&mut self) {
        if self.divergence.is_none() {
            self.divergence = Some(self.transcript.rounds.len());
        }
    }

    pub fn divergence(&self) -> Option<usize> {
        self.divergence
    }

    pub fn clear_divergence(&mut self) {
        self.divergence = None;
    }

    /// Hook context for the current round.
    pub fn ctx(&self, step: &'static str) -> HookCtx {
        HookCtx { protocol: self.protocol.clone(), step, round: self.round(), scope: self.scope.join("/") }
    }

    /// The adversary's handle on the world.
    pub fn view(&mut self) -> ServerView<'_> {
        ServerView::new(&mut self.world, &mut self.outcomes)
    }

    // ---- client records ----

    pub fn set_client(&mut self, local: &str, v: Bits) -> Result<String> {
        let name = self.reg(local);
        self.world.set_client(&name, v)?;
        Ok(name)
    }

    pub fn client(&self, full: &str) -> Option<Bits> {
        self.world.client(full).cloned()
    }

    /// Client-side random choice among weighted options.
    pub fn client_choice(&mut self, probs: &[f64]) -> usize {
        if self.enumerate_client {
            self.outcomes.choose(probs)
        } else {
            let total = probs.iter().sum();
            sample_index(&mut self.client_rng, probs, total)
        }
    }

    /// Uniform integer in 0..n from the client's randomness.
    pub fn client_uniform(&mut self, n: usize) -> usize {
        if self.enumerate_client {
            self.outcomes.choose(&vec![1.0; n])
        } else {
            self.client_rng.random_range(0..n)
        }
    }

    /// Client-side Bernoulli draw.
    pub fn client_bernoulli(&mut self, p_true: f64) -> bool {
        if p_true >= 1.0 {
            return true;
        }
        if p_true <= 0.0 {
            return false;
        }
        self.client_choice(&[1.0 - p_true, p_true]) == 1
    }

    /// Uniform random bit string from the client's randomness.
    pub fn client_bits(&mut self, len: usize) -> Bits {
        Bits::from_bools((0..len).map(|_| self.client_uniform(2) == 1).collect())
    }

    /// Fisher-Yates shuffle driven by client randomness.
    pub fn client_shuffle<T>(&mut self, v: &mut [T]) {
        for i in (1..v.len()).rev() {
            let j = self.client_uniform(i + 1);
            v.swap(i, j);
        }
    }

    /// Measurement-style coin drawn from the outcome source (enumerated in exact runs).
    pub fn coin(&mut self, p_true: f64) -> bool {
        if p_true >= 1.0 {
            return true;
        }
        if p_true <= 0.0 {
            return false;
        }
        self.outcomes.choose(&[1.0 - p_true, p_true]) == 1
    }
}
