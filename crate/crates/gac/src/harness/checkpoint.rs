//! Full-state run checkpoints.
//!
//! A checkpoint is a text header followed by one raw binary blob. The header
//! records the format version, the resolved run configuration, loop counters,
//! RNG stream positions, and a table of named arrays (name, shape, offset in
//! f64 units). The blob holds those arrays concatenated as little-endian
//! 64-bit floats. Save -> load -> save reproduces the file byte for byte, and
//! a loaded trainer continues exactly where the saved one stopped.

use std::fs;
use std::path::Path;

use crate::agent::{AlphaMode, ReplayBuffer, Trainer};
use crate::diffcore::{AdamState, Tensor};
use crate::envs::{EnvSnapshot, ObsNormalizer};
use crate::error::{GacError, Result};
use crate::harness::config::RunConfig;
use crate::harness::rngs::RunRngs;

pub const FORMAT_VERSION: &str = "gac-checkpoint v1";

fn err(msg: impl Into<String>) -> GacError {
    GacError::Checkpoint(msg.into())
}

fn shape_string(shape: &[usize]) -> String {
    if shape.is_empty() {
        "1".to_string()
    } else {
        shape.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("x")
    }
}

struct ArrayWriter {
    lines: Vec<String>,
    data: Vec<f64>,
}

impl ArrayWriter {
    fn new() -> Self {
        ArrayWriter { lines: Vec::new(), data: Vec::new() }
    }

    fn push(&mut self, name: &str, shape: &[usize], values: &[f64]) {
        let want: usize = if shape.is_empty() { 1 } else { shape.iter().product() };
        assert_eq!(values.len(), want, "array {name} length disagrees with shape {shape:?}");
        self.lines.push(format!("{name} {} {}", shape_string(shape), self.data.len()));
        self.data.extend_from_slice(values);
    }

    fn push_tensor(&mut self, name: &str, t: &Tensor) {
        self.push(name, t.shape(), t.data());
    }
}

fn push_mlp(w: &mut ArrayWriter, prefix: &str, params: &crate::diffcore::MlpParams) {
    for (l, (weight, bias)) in params.weights.iter().zip(&params.biases).enumerate() {
        w.push_tensor(&format!("{prefix}.w{l}"), weight);
        w.push_tensor(&format!("{prefix}.b{l}"), bias);
    }
}

fn push_moments(w: &mut ArrayWriter, prefix: &str, adam: &AdamState) {
    let (m, v) = adam.moments();
    for (i, t) in m.iter().enumerate() {
        w.push_tensor(&format!("{prefix}.m{i}"), t);
    }
    for (i, t) in v.iter().enumerate() {
        w.push_tensor(&format!("{prefix}.v{i}"), t);
    }
}

/// Saves the complete run state. The embedded configuration text is the
/// resolved snapshot, so a checkpoint is self-describing.
pub fn save(path: &Path, trainer: &Trainer, config: &RunConfig) -> Result<()> {
    let config_text = config.resolved_text();
    let mut header = String::new();
    header.push_str(FORMAT_VERSION);
    header.push('\n');
    header.push_str(&format!("config_bytes = {}\n", config_text.len()));
    header.push_str(&config_text);
    header.push_str(&format!("seed = {}\n", trainer.root_seed()));
    header.push_str(&format!("iteration = {}\n", trainer.iteration()));
    header.push_str(&format!("env_steps = {}\n", trainer.env_steps()));
    let words = trainer.rngs.word_positions();
    let words: Vec<String> = words.iter().map(|w| w.to_string()).collect();
    header.push_str(&format!("rng_words = {}\n", words.join(",")));
    let snap = trainer.env().snapshot();
    header.push_str(&format!("env_episode_steps = {}\n", snap.steps));
    header.push_str(&format!("env_clipped = {}\n", snap.clipped));
    header.push_str(&format!("buffer_cursor = {}\n", trainer.buffer.cursor()));
    header.push_str(&format!("normalizer_count = {}\n", trainer.normalizer.count()));
    let (critic_adam, actor_adam) = trainer.agent.optimizers();
    header.push_str(&format!("critic_adam_t = {}\n", critic_adam.t()));
    header.push_str(&format!("actor_adam_t = {}\n", actor_adam.t()));
    if let AlphaMode::Adaptive(a) = trainer.agent.alpha_mode() {
        let (_, seeded, _, alpha_adam) = a.state();
        header.push_str(&format!("alpha_adam_t = {}\n", alpha_adam.t()));
        header.push_str(&format!("beta_seeded = {}\n", u8::from(seeded)));
    }

    let mut arrays = ArrayWriter::new();
    let nets = &trainer.agent.nets;
    push_mlp(&mut arrays, "actor", &nets.actor.params);
    push_mlp(&mut arrays, "q1a", &nets.critics.q1a);
    push_mlp(&mut arrays, "q1b", &nets.critics.q1b);
    push_mlp(&mut arrays, "q2a", &nets.critics.q2a);
    push_mlp(&mut arrays, "q2b", &nets.critics.q2b);
    push_moments(&mut arrays, "critic_adam", critic_adam);
    push_moments(&mut arrays, "actor_adam", actor_adam);
    if let AlphaMode::Adaptive(a) = trainer.agent.alpha_mode() {
        let (log_alpha, _, beta, alpha_adam) = a.state();
        arrays.push("alpha.log_alpha", &[], &[log_alpha]);
        arrays.push("alpha.beta", &[], &[beta]);
        push_moments(&mut arrays, "alpha_adam", alpha_adam);
    }
    let (count, mean, m2) = trainer.normalizer.state();
    debug_assert_eq!(count, trainer.normalizer.count());
    arrays.push("norm.mean", &[mean.len()], mean);
    arrays.push("norm.m2", &[m2.len()], m2);
    arrays.push("env.state", &[snap.state.len()], &snap.state);
    arrays.push("obs", &[trainer.current_obs().len()], trainer.current_obs());
    let (bs, ba, br, bn, bt) = trainer.buffer.dump();
    let fill = br.len();
    let sd = trainer.buffer.state_dim();
    let ad = trainer.buffer.action_dim();
    arrays.push("buffer.states", &[fill, sd], &bs);
    arrays.push("buffer.actions", &[fill, ad], &ba);
    arrays.push("buffer.rewards", &[fill], &br);
    arrays.push("buffer.next_states", &[fill, sd], &bn);
    arrays.push("buffer.terminals", &[fill], &bt);

    header.push_str(&format!("arrays = {}\n", arrays.lines.len()));
    for line in &arrays.lines {
        header.push_str(line);
        header.push('\n');
    }
    header.push_str("binary\n");

    let mut bytes = header.into_bytes();
    bytes.reserve(arrays.data.len() * 8);
    for v in &arrays.data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| GacError::io(path.to_path_buf(), e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn line(&mut self) -> Result<&'a str> {
        let rest = &self.bytes[self.pos..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| err("unexpected end of header"))?;
        let line = std::str::from_utf8(&rest[..end]).map_err(|_| err("header is not utf-8"))?;
        self.pos += end + 1;
        Ok(line)
    }

    fn key_line(&mut self, key: &str) -> Result<&'a str> {
        let line = self.line()?;
        let (k, v) = line.split_once(" = ").ok_or_else(|| err(format!("malformed line {line:?}")))?;
        if k != key {
            return Err(err(format!("expected key {key:?}, found {k:?}")));
        }
        Ok(v)
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.key_line(key)?;
        v.parse::<T>().map_err(|_| err(format!("bad value {v:?} for {key}")))
    }
}

struct ArrayTable {
    entries: Vec<(String, usize, usize)>,
    data: Vec<f64>,
    used: Vec<bool>,
}

impl ArrayTable {
    fn take(&mut self, name: &str) -> Result<&[f64]> {
        let idx = self
            .entries
            .iter()
            .position(|(n, _, _)| n == name)
            .ok_or_else(|| err(format!("checkpoint is missing array {name:?}")))?;
        if self.used[idx] {
            return Err(err(format!("array {name:?} consumed twice")));
        }
        self.used[idx] = true;
        let (_, len, offset) = self.entries[idx];
        Ok(&self.data[offset..offset + len])
    }

    fn take_scalar(&mut self, name: &str) -> Result<f64> {
        let data = self.take(name)?;
        if data.len() != 1 {
            return Err(err(format!("array {name:?} should hold one value, has {}", data.len())));
        }
        Ok(data[0])
    }

    fn finish(&self) -> Result<()> {
        for (i, used) in self.used.iter().enumerate() {
            if !used {
                return Err(err(format!("unexpected array {:?} in checkpoint", self.entries[i].0)));
            }
        }
        Ok(())
    }
}

fn set_tensor(target: &mut Tensor, data: &[f64], name: &str) -> Result<()> {
    if target.data().len() != data.len() {
        return Err(err(format!(
            "array {name:?} has {} values, expected {}",
            data.len(),
            target.data().len()
        )));
    }
    target.data_mut().copy_from_slice(data);
    Ok(())
}

fn restore_mlp(params: &mut crate::diffcore::MlpParams, prefix: &str, table: &mut ArrayTable) -> Result<()> {
    let layers = params.weights.len();
    for l in 0..layers {
        let w = table.take(&format!("{prefix}.w{l}"))?.to_vec();
        set_tensor(&mut params.weights[l], &w, &format!("{prefix}.w{l}"))?;
        let b = table.take(&format!("{prefix}.b{l}"))?.to_vec();
        set_tensor(&mut params.biases[l], &b, &format!("{prefix}.b{l}"))?;
    }
    Ok(())
}

fn restore_moments(adam: &mut AdamState, prefix: &str, t: u64, table: &mut ArrayTable) -> Result<()> {
    let shapes: Vec<Vec<usize>> = adam.moments().0.iter().map(|m| m.shape().to_vec()).collect();
    let mut m = Vec::with_capacity(shapes.len());
    let mut v = Vec::with_capacity(shapes.len());
    for (i, shape) in shapes.iter().enumerate() {
        let name = format!("{prefix}.m{i}");
        let data = table.take(&name)?.to_vec();
        m.push(Tensor::new(shape.clone(), data).map_err(|e| err(format!("{name}: {e}")))?);
    }
    for (i, shape) in shapes.iter().enumerate() {
        let name = format!("{prefix}.v{i}");
        let data = table.take(&name)?.to_vec();
        v.push(Tensor::new(shape.clone(), data).map_err(|e| err(format!("{name}: {e}")))?);
    }
    adam.restore(t, m, v)
}

/// Loads a checkpoint and rebuilds the trainer it was saved from, along with
/// the run configuration embedded in the file.
pub fn load(path: &Path) -> Result<(Trainer, RunConfig)> {
    let bytes = fs::read(path).map_err(|e| GacError::io(path.to_path_buf(), e))?;
    let mut r = Reader { bytes: &bytes, pos: 0 };
    let version = r.line()?;
    if version != FORMAT_VERSION {
        return Err(err(format!(
            "unsupported checkpoint format {version:?}, this build reads {FORMAT_VERSION:?}"
        )));
    }
    let config_bytes: usize = r.parse("config_bytes")?;
    if r.pos + config_bytes > bytes.len() {
        return Err(err("config section runs past end of file"));
    }
    let config_text = std::str::from_utf8(&bytes[r.pos..r.pos + config_bytes])
        .map_err(|_| err("embedded config is not utf-8"))?
        .to_string();
    r.pos += config_bytes;
    let config = RunConfig::parse(&config_text)?;

    let seed: u64 = r.parse("seed")?;
    let iteration: u64 = r.parse("iteration")?;
    let env_steps: u64 = r.parse("env_steps")?;
    let words_line = r.key_line("rng_words")?;
    let mut words = Vec::new();
    for part in words_line.split(',') {
        words.push(
            part.parse::<u128>()
                .map_err(|_| err(format!("bad rng position {part:?}")))?,
        );
    }
    let env_episode_steps: u64 = r.parse("env_episode_steps")?;
    let env_clipped: u64 = r.parse("env_clipped")?;
    let buffer_cursor: usize = r.parse("buffer_cursor")?;
    let normalizer_count: u64 = r.parse("normalizer_count")?;
    let critic_adam_t: u64 = r.parse("critic_adam_t")?;
    let actor_adam_t: u64 = r.parse("actor_adam_t")?;

    let mut trainer = Trainer::new(&config.env_name, config.reward_scale, config.gac.clone(), seed)?;
    let adaptive = matches!(trainer.agent.alpha_mode(), AlphaMode::Adaptive(_));
    let (alpha_adam_t, beta_seeded) = if adaptive {
        let t: u64 = r.parse("alpha_adam_t")?;
        let s: u8 = r.parse("beta_seeded")?;
        (t, s != 0)
    } else {
        (0, false)
    };

    let array_count: usize = r.parse("arrays")?;
    let mut entries = Vec::with_capacity(array_count);
    let mut total = 0usize;
    for _ in 0..array_count {
        let line = r.line()?;
        let mut parts = line.split(' ');
        let (name, shape, offset) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
            (Some(n), Some(s), Some(o), None) => (n, s, o),
            _ => return Err(err(format!("malformed array line {line:?}"))),
        };
        let len: usize = shape
            .split('x')
            .map(|d| d.parse::<usize>().map_err(|_| err(format!("bad shape {shape:?} for {name}"))))
            .try_fold(1usize, |acc, d| d.map(|d| acc * d))?;
        let offset: usize =
            offset.parse().map_err(|_| err(format!("bad offset {offset:?} for {name}")))?;
        if offset != total {
            return Err(err(format!("array {name} offset {offset} does not match layout {total}")));
        }
        total += len;
        entries.push((name.to_string(), len, offset));
    }
    if r.line()? != "binary" {
        return Err(err("missing binary marker after array table"));
    }
    let blob = &bytes[r.pos..];
    if blob.len() != total * 8 {
        return Err(err(format!(
            "binary section holds {} bytes, array table requires {}",
            blob.len(),
            total * 8
        )));
    }
    let data: Vec<f64> =
        blob.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let mut table = ArrayTable { used: vec![false; entries.len()], entries, data };

    let nets = &mut trainer.agent.nets;
    restore_mlp(&mut nets.actor.params, "actor", &mut table)?;
    restore_mlp(&mut nets.critics.q1a, "q1a", &mut table)?;
    restore_mlp(&mut nets.critics.q1b, "q1b", &mut table)?;
    restore_mlp(&mut nets.critics.q2a, "q2a", &mut table)?;
    restore_mlp(&mut nets.critics.q2b, "q2b", &mut table)?;
    {
        let (critic_adam, actor_adam) = trainer.agent.optimizers_mut();
        restore_moments(critic_adam, "critic_adam", critic_adam_t, &mut table)?;
        restore_moments(actor_adam, "actor_adam", actor_adam_t, &mut table)?;
    }
    if adaptive {
        let log_alpha = table.take_scalar("alpha.log_alpha")?;
        let beta = table.take_scalar("alpha.beta")?;
        let m = Tensor::scalar(table.take_scalar("alpha_adam.m0")?);
        let v = Tensor::scalar(table.take_scalar("alpha_adam.v0")?);
        match trainer.agent.alpha_mode_mut() {
            AlphaMode::Adaptive(a) => {
                a.restore(log_alpha, beta_seeded, beta, alpha_adam_t, vec![m], vec![v])?
            }
            AlphaMode::Fixed(_) => unreachable!("mode checked above"),
        }
    }
    let mean = table.take("norm.mean")?.to_vec();
    let m2 = table.take("norm.m2")?.to_vec();
    trainer.normalizer = ObsNormalizer::restore(normalizer_count, mean, m2)?;
    let env_state = table.take("env.state")?.to_vec();
    trainer.env_mut().restore(&EnvSnapshot {
        state: env_state,
        steps: env_episode_steps,
        clipped: env_clipped,
    })?;
    let obs = table.take("obs")?.to_vec();
    let bs = table.take("buffer.states")?.to_vec();
    let ba = table.take("buffer.actions")?.to_vec();
    let br = table.take("buffer.rewards")?.to_vec();
    let bn = table.take("buffer.next_states")?.to_vec();
    let bt = table.take("buffer.terminals")?.to_vec();
    table.finish()?;
    let (capacity, sd, ad) =
        (trainer.buffer.capacity(), trainer.buffer.state_dim(), trainer.buffer.action_dim());
    trainer.buffer = ReplayBuffer::restore(capacity, sd, ad, buffer_cursor, &bs, &ba, &br, &bn, &bt)?;
    trainer.rngs = RunRngs::restore(seed, &words)?;
    trainer.restore_cursor(obs, env_steps, iteration)?;
    Ok((trainer, config))
}
