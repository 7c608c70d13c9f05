use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::chess::{
    emit_fen, parse_fen, parse_placement_fen, Board, HistoryEntry, Position, Variant, HISTORY_LEN,
};
use crate::graph::{legal_action_mask, MoveGraph};
use crate::mcts::PlayedGame;

/// One training sample: a compact position record (FEN plus the history
/// digest the encoder needs), a sparse policy target over legal actions,
/// and the game outcome from the mover's perspective.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayFrame {
    pub variant: Variant,
    pub fen: String,
    /// Times the position had already occurred when it was recorded.
    pub repetitions: u8,
    /// Up to 7 prior positions, newest first: piece placement and their
    /// repetition counts.
    pub history: Vec<(String, u8)>,
    /// (action index, probability), support within the legal actions.
    pub policy: Vec<(u32, f32)>,
    /// Outcome from the side to move: -1, 0, or +1.
    pub value: i8,
    pub iteration: u32,
}

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("frame position is invalid: {0}")]
    Position(#[from] crate::chess::ChessError),
    #[error("policy target sums to {0}, expected 1")]
    PolicyNotNormalized(f64),
    #[error("policy target puts mass {prob} on illegal action {action}")]
    SupportMismatch { action: u32, prob: f32 },
    #[error("value target {0} is not in {{-1, 0, 1}}")]
    BadValue(i8),
    #[error("window capacity {capacity} exceeded by {new} new frames")]
    Capacity { capacity: usize, new: usize },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed frame file: {0}")]
    Format(String),
}

impl ReplayFrame {
    /// Rebuilds the position, including the retained history digest.
    pub fn position(&self) -> Result<Position, FrameError> {
        let mut pos = parse_fen(&self.fen, self.variant)?;
        let entries = self
            .history
            .iter()
            .map(|(placement, reps)| {
                let board = parse_placement_board(placement, self.variant)?;
                Ok(HistoryEntry {
                    board,
                    repetitions: *reps,
                })
            })
            .collect::<Result<Vec<_>, FrameError>>()?;
        pos.restore_history(entries, self.repetitions);
        Ok(pos)
    }

    /// Checks the frame invariants: normalized policy, support within the
    /// legal actions of the stored position, value in {-1, 0, 1}.
    pub fn validate(&self, graph: &MoveGraph) -> Result<(), FrameError> {
        if !matches!(self.value, -1 | 0 | 1) {
            return Err(FrameError::BadValue(self.value));
        }
        let pos = self.position()?;
        let legal = legal_action_mask(&pos, graph).expect("variants match");
        let mut total = 0.0;
        for &(action, prob) in &self.policy {
            if prob < 0.0 || (action as usize) >= legal.len() || !legal[action as usize] {
                return Err(FrameError::SupportMismatch { action, prob });
            }
            total += prob as f64;
        }
        if (total - 1.0).abs() > 1e-4 {
            return Err(FrameError::PolicyNotNormalized(total));
        }
        Ok(())
    }
}

fn parse_placement_board(placement: &str, variant: Variant) -> Result<Board, FrameError> {
    Ok(parse_placement_fen(placement, variant)?)
}

/// Converts a played game into one frame per ply: the policy target is the
/// search's improved policy, the value target the final outcome re-signed
/// for the side to move. Truncated games already carry a draw outcome.
pub fn frames_from_game(game: &PlayedGame, iteration: u32) -> Vec<ReplayFrame> {
    let mut frames = Vec::with_capacity(game.moves.len());
    let mut pos = Position::starting(game.variant);
    for (mv, ply) in game.moves.iter().zip(&game.plies) {
        let policy: Vec<(u32, f32)> = ply
            .policy
            .iter()
            .map(|&(action, p)| (action as u32, p as f32))
            .collect();
        frames.push(ReplayFrame {
            variant: game.variant,
            fen: emit_fen(&pos),
            repetitions: pos.repetition_count().min(255) as u8,
            history: pos
                .recent_history()
                .take(HISTORY_LEN)
                .map(|e| (e.board.placement_fen(), e.repetitions))
                .collect(),
            policy,
            value: game.outcome.value_for(pos.side_to_move) as i8,
            iteration,
        });
        pos = pos.apply_move_unchecked(*mv);
    }
    frames
}

/// Bounded replay store. An update keeps every newly generated frame and
/// fills the remaining capacity with a uniform sample (without
/// replacement) of the previous window.
#[derive(Debug, Clone, Default)]
pub struct FrameWindow {
    pub frames: Vec<ReplayFrame>,
}

impl FrameWindow {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

pub fn update_window(
    new_frames: Vec<ReplayFrame>,
    previous: FrameWindow,
    capacity: usize,
    rng: &mut ChaCha8Rng,
) -> Result<FrameWindow, FrameError> {
    if new_frames.len() > capacity {
        return Err(FrameError::Capacity {
            capacity,
            new: new_frames.len(),
        });
    }
    let mut frames = new_frames;
    let keep = capacity - frames.len();
    let mut old = previous.frames;
    if old.len() > keep {
        old.shuffle(rng);
        old.truncate(keep);
    }
    frames.extend(old);
    Ok(FrameWindow { frames })
}

const MAGIC: &[u8] = b"gateau-frames\n";
const VERSION: u32 = 1;

/// Writes the window as a container file: header (version, variant, count)
/// followed by length-prefixed frame records. Atomic via temp + rename.
pub fn save_window(window: &FrameWindow, variant: Variant, path: &Path) -> Result<(), FrameError> {
    let io = |source| FrameError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.push(match variant {
        Variant::Chess => 0,
        Variant::Gardner => 1,
    });
    buf.extend_from_slice(&(window.frames.len() as u64).to_le_bytes());
    for frame in &window.frames {
        let rec = encode_frame(frame);
        buf.extend_from_slice(&(rec.len() as u32).to_le_bytes());
        buf.extend_from_slice(&rec);
    }
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(&buf).map_err(io)?;
    f.sync_all().map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

/// Loads and re-validates every frame against the variant's move graph.
pub fn load_window(path: &Path, graph: &MoveGraph) -> Result<FrameWindow, FrameError> {
    let io = |source| FrameError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut bytes = Vec::new();
    fs::File::open(path).map_err(io)?.read_to_end(&mut bytes).map_err(io)?;
    let mut r = Reader { bytes: &bytes, pos: 0 };
    let magic = r.take(MAGIC.len())?;
    if magic != MAGIC {
        return Err(FrameError::Format("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(FrameError::Format(format!("unsupported version {version}")));
    }
    let variant = match r.u8()? {
        0 => Variant::Chess,
        1 => Variant::Gardner,
        v => return Err(FrameError::Format(format!("unknown variant tag {v}"))),
    };
    if variant != graph.variant {
        return Err(FrameError::Format(format!(
            "window holds {variant} frames, expected {}",
            graph.variant
        )));
    }
    let count = r.u64()? as usize;
    let mut frames = Vec::with_capacity(count);
    for _ in 0..count {
        let len = r.u32()? as usize;
        let rec = r.take(len)?;
        let frame = decode_frame(rec, variant)?;
        frame.validate(graph)?;
        frames.push(frame);
    }
    Ok(FrameWindow { frames })
}

fn encode_frame(frame: &ReplayFrame) -> Vec<u8> {
    let mut b = Vec::new();
    let put_str = |b: &mut Vec<u8>, s: &str| {
        b.extend_from_slice(&(s.len() as u16).to_le_bytes());
        b.extend_from_slice(s.as_bytes());
    };
    put_str(&mut b, &frame.fen);
    b.push(frame.repetitions);
    b.push(frame.history.len() as u8);
    for (placement, reps) in &frame.history {
        put_str(&mut b, placement);
        b.push(*reps);
    }
    b.extend_from_slice(&(frame.policy.len() as u16).to_le_bytes());
    for &(action, prob) in &frame.policy {
        b.extend_from_slice(&action.to_le_bytes());
        b.extend_from_slice(&prob.to_le_bytes());
    }
    b.push(frame.value as u8);
    b.extend_from_slice(&frame.iteration.to_le_bytes());
    b
}

fn decode_frame(rec: &[u8], variant: Variant) -> Result<ReplayFrame, FrameError> {
    let mut r = Reader { bytes: rec, pos: 0 };
    let fen = r.string()?;
    let repetitions = r.u8()?;
    let hist_count = r.u8()? as usize;
    if hist_count > HISTORY_LEN {
        return Err(FrameError::Format(format!("history of {hist_count} entries")));
    }
    let mut history = Vec::with_capacity(hist_count);
    for _ in 0..hist_count {
        let placement = r.string()?;
        let reps = r.u8()?;
        history.push((placement, reps));
    }
    let policy_count = r.u16()? as usize;
    let mut policy = Vec::with_capacity(policy_count);
    for _ in 0..policy_count {
        let action = r.u32()?;
        let prob = f32::from_le_bytes(r.take(4)?.try_into().unwrap());
        policy.push((action, prob));
    }
    let value = r.u8()? as i8;
    let iteration = r.u32()?;
    if r.pos != rec.len() {
        return Err(FrameError::Format("trailing bytes in frame record".into()));
    }
    Ok(ReplayFrame {
        variant,
        fen,
        repetitions,
        history,
        policy,
        value,
        iteration,
    })
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FrameError> {
        if self.pos + n > self.bytes.len() {
            return Err(FrameError::Format("unexpected end of file".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, FrameError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, FrameError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, FrameError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, FrameError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String, FrameError> {
        let len = self.u16()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| FrameError::Format("non-utf8 string".into()))
    }
}
