use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::params::{AttentionDirection, ModelConfig, ModelParams};

const MAGIC: &str = "gateau-checkpoint";
const VERSION: u32 = 1;

/// A versioned snapshot of everything needed to run or resume a model:
/// configuration, trainable tensors, batch-norm running statistics, and
/// training metadata.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: ModelParams,
    pub iteration: u32,
    /// Variants this parameter set has been trained on, in order.
    pub variant_history: Vec<String>,
}

impl Checkpoint {
    pub fn fresh(config: ModelConfig, seed: u64) -> Checkpoint {
        Checkpoint {
            model: ModelParams::init(config, seed),
            iteration: 0,
            variant_history: Vec::new(),
        }
    }
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("not a checkpoint file: {0}")]
    BadMagic(String),
    #[error("unsupported checkpoint version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("checksum mismatch: {0}")]
    Checksum(String),
    #[error("malformed header: {0}")]
    Header(String),
    #[error("tensor manifest mismatch: {0}")]
    Manifest(String),
}

type Result<T> = std::result::Result<T, CheckpointError>;

fn io_err(path: &Path, source: std::io::Error) -> CheckpointError {
    CheckpointError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Serializes the checkpoint: a plain-text header (version, config, tensor
/// manifest with shapes and byte offsets, payload checksum) followed by the
/// raw little-endian 32-bit float payload in manifest order.
pub fn save_checkpoint(cp: &Checkpoint, path: &Path) -> Result<()> {
    let (header, payload) = encode(cp);
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
        f.write_all(header.as_bytes()).map_err(|e| io_err(&tmp, e))?;
        f.write_all(&payload).map_err(|e| io_err(&tmp, e))?;
        f.sync_all().map_err(|e| io_err(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

fn encode(cp: &Checkpoint) -> (String, Vec<u8>) {
    let model = &cp.model;
    let mut payload: Vec<u8> = Vec::new();
    let mut manifest = String::new();
    let mut count = 0usize;
    let mut push_tensor = |name: &str, dims: Vec<usize>, data: &mut dyn Iterator<Item = f64>,
                           payload: &mut Vec<u8>,
                           manifest: &mut String| {
        let offset = payload.len();
        for v in data {
            payload.extend_from_slice(&(v as f32).to_le_bytes());
        }
        let shape = dims
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join("x");
        manifest.push_str(&format!("tensor {name} {shape} {offset}\n"));
        count += 1;
    };
    for (name, value) in model.names.iter().zip(model.values.iter()) {
        push_tensor(
            name,
            value.shape().to_vec(),
            &mut value.iter().copied(),
            &mut payload,
            &mut manifest,
        );
    }
    for stat in &model.stats {
        push_tensor(
            &format!("{}.running_mean", stat.name),
            vec![stat.mean.len()],
            &mut stat.mean.iter().copied(),
            &mut payload,
            &mut manifest,
        );
        push_tensor(
            &format!("{}.running_var", stat.name),
            vec![stat.var.len()],
            &mut stat.var.iter().copied(),
            &mut payload,
            &mut manifest,
        );
    }
    let digest = hex(&Sha256::digest(&payload));
    let attention = match model.config.attention {
        AttentionDirection::OutEdges => "out",
        AttentionDirection::InEdges => "in",
    };
    let header = format!(
        "{MAGIC} {VERSION}\nhidden = {}\nblocks = {}\nattention = {attention}\n\
         iteration = {}\nvariants = {}\ntensors = {count}\n{manifest}\
         payload-bytes = {}\nchecksum = sha256:{digest}\nEND\n",
        model.config.hidden,
        model.config.blocks,
        cp.iteration,
        cp.variant_history.join(","),
        payload.len(),
    );
    (header, payload)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes).map_err(|e| io_err(path, e))?;

    let end_marker = b"\nEND\n";
    let header_end = bytes
        .windows(end_marker.len())
        .position(|w| w == end_marker)
        .ok_or_else(|| CheckpointError::Header("missing END marker".into()))?;
    let header = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| CheckpointError::Header("header is not utf-8".into()))?
        .to_string();
    let payload = &bytes[header_end + end_marker.len()..];

    let mut lines = header.lines();
    let first = lines
        .next()
        .ok_or_else(|| CheckpointError::Header("empty header".into()))?;
    let mut first_parts = first.split_whitespace();
    if first_parts.next() != Some(MAGIC) {
        return Err(CheckpointError::BadMagic(first.to_string()));
    }
    let version: u32 = first_parts
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| CheckpointError::Header("missing version".into()))?;
    if version != VERSION {
        return Err(CheckpointError::Version {
            found: version,
            expected: VERSION,
        });
    }

    let mut hidden = None;
    let mut blocks = None;
    let mut attention = AttentionDirection::OutEdges;
    let mut iteration = 0u32;
    let mut variants = Vec::new();
    let mut manifest: Vec<(String, Vec<usize>, usize)> = Vec::new();
    let mut payload_bytes = None;
    let mut checksum = None;
    for line in lines {
        if let Some(rest) = line.strip_prefix("tensor ") {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(CheckpointError::Header(format!("bad tensor line: {line}")));
            }
            let dims: Vec<usize> = parts[1]
                .split('x')
                .map(|d| d.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| CheckpointError::Header(format!("bad shape: {line}")))?;
            let offset: usize = parts[2]
                .parse()
                .map_err(|_| CheckpointError::Header(format!("bad offset: {line}")))?;
            manifest.push((parts[0].to_string(), dims, offset));
            continue;
        }
        let Some((key, value)) = line.split_once(" = ") else {
            return Err(CheckpointError::Header(format!("bad line: {line}")));
        };
        match key {
            "hidden" => hidden = value.parse().ok(),
            "blocks" => blocks = value.parse().ok(),
            "attention" => {
                attention = match value {
                    "out" => AttentionDirection::OutEdges,
                    "in" => AttentionDirection::InEdges,
                    _ => return Err(CheckpointError::Header(format!("bad attention: {value}"))),
                }
            }
            "iteration" => {
                iteration = value
                    .parse()
                    .map_err(|_| CheckpointError::Header("bad iteration".into()))?
            }
            "variants" => {
                variants = value
                    .split(',')
                    .filter(|s| !s.is_empty())
                    .map(|s| s.to_string())
                    .collect()
            }
            "payload-bytes" => payload_bytes = value.parse::<usize>().ok(),
            "checksum" => checksum = value.strip_prefix("sha256:").map(|s| s.to_string()),
            "tensors" => {}
            _ => return Err(CheckpointError::Header(format!("unknown key: {key}"))),
        }
    }

    let expected_len =
        payload_bytes.ok_or_else(|| CheckpointError::Header("missing payload-bytes".into()))?;
    if payload.len() < expected_len {
        return Err(CheckpointError::Checksum(format!(
            "payload truncated: {} of {} bytes",
            payload.len(),
            expected_len
        )));
    }
    let payload = &payload[..expected_len];
    let digest = hex(&Sha256::digest(payload));
    let expected_digest =
        checksum.ok_or_else(|| CheckpointError::Header("missing checksum".into()))?;
    if digest != expected_digest {
        return Err(CheckpointError::Checksum(format!(
            "sha256 {digest} != {expected_digest}"
        )));
    }

    let config = ModelConfig {
        hidden: hidden.ok_or_else(|| CheckpointError::Header("missing hidden".into()))?,
        blocks: blocks.ok_or_else(|| CheckpointError::Header("missing blocks".into()))?,
        attention,
    };
    let mut model = ModelParams::zeroed(config);

    let read_tensor = |name: &str, len: usize| -> Result<Vec<f64>> {
        let (_, dims, offset) = manifest
            .iter()
            .find(|(n, _, _)| n == name)
            .ok_or_else(|| CheckpointError::Manifest(format!("missing tensor {name}")))?;
        let count: usize = dims.iter().product();
        if count != len {
            return Err(CheckpointError::Manifest(format!(
                "tensor {name}: expected {len} values, manifest has {count}"
            )));
        }
        let end = offset + 4 * count;
        if end > payload.len() {
            return Err(CheckpointError::Manifest(format!(
                "tensor {name} overruns payload"
            )));
        }
        Ok(payload[*offset..end]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect())
    };

    for i in 0..model.values.len() {
        let name = model.names[i].clone();
        let data = read_tensor(&name, model.values[i].len())?;
        model.values[i] = ndarray::ArrayD::from_shape_vec(model.values[i].raw_dim(), data)
            .expect("shape checked against manifest");
    }
    for i in 0..model.stats.len() {
        let name = model.stats[i].name.clone();
        let mean = read_tensor(&format!("{name}.running_mean"), model.stats[i].mean.len())?;
        let var = read_tensor(&format!("{name}.running_var"), model.stats[i].var.len())?;
        model.stats[i].mean = mean;
        model.stats[i].var = var;
    }

    Ok(Checkpoint {
        model,
        iteration,
        variant_history: variants,
    })
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
