use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use rand::Rng;

use crate::game::Player;
use crate::nn::{decode_checkpoint, encode_checkpoint, CheckpointMeta, Mlp};
use crate::sampling::ReservoirBuffer;

use super::{IterationPolicy, SdCfrError};

/// Decoded checkpoints kept in memory by default.
pub const DEFAULT_LRU_CAPACITY: usize = 8;

const MANIFEST_HEADER: &str = "player\titeration\tpath\tbyte_len\tcrc32";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelStorage {
    KeepAll,
    /// Keep a uniform sample of this many networks per player.
    Reservoir(usize),
}

#[derive(Debug, Clone)]
pub enum ModelSource {
    Resident(Arc<dyn IterationPolicy>),
    Checkpoint { path: PathBuf, byte_len: u64, checksum: u32 },
}

impl ModelSource {
    /// Writes `net` to `path` and returns a reference to it.
    pub fn write_checkpoint(net: &Mlp<f32>, meta: CheckpointMeta, path: &Path) -> Result<Self, SdCfrError> {
        let bytes = encode_checkpoint(net, meta);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, &bytes)?;
        fs::rename(&tmp, path)?;
        Ok(ModelSource::Checkpoint {
            path: path.to_path_buf(),
            byte_len: bytes.len() as u64,
            checksum: crc32fast::hash(&bytes),
        })
    }
}

#[derive(Debug, Clone)]
pub struct ModelEntry {
    pub player: Player,
    pub iteration: u64,
    pub source: ModelSource,
}

/// Per-player store of iteration networks.
///
/// Checkpoint-backed entries are decoded on demand into a small LRU cache,
/// so the whole buffer never has to be resident.
pub struct ModelBuffer {
    storage: ModelStorage,
    slots: [ReservoirBuffer<ModelEntry>; 2],
    lru: Mutex<Vec<(PathBuf, Arc<Mlp<f32>>)>>,
    lru_capacity: usize,
    loads: AtomicU64,
}

impl fmt::Debug for ModelBuffer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelBuffer")
            .field("storage", &self.storage)
            .field("len", &[self.slots[0].len(), self.slots[1].len()])
            .field("loads", &self.loads())
            .finish()
    }
}

impl ModelBuffer {
    pub fn new(storage: ModelStorage) -> Self {
        let cap = match storage {
            ModelStorage::KeepAll => usize::MAX,
            ModelStorage::Reservoir(c) => c.max(1),
        };
        ModelBuffer {
            storage,
            slots: [ReservoirBuffer::new(cap), ReservoirBuffer::new(cap)],
            lru: Mutex::new(Vec::new()),
            lru_capacity: DEFAULT_LRU_CAPACITY,
            loads: AtomicU64::new(0),
        }
    }

    pub fn with_lru_capacity(mut self, capacity: usize) -> Self {
        self.lru_capacity = capacity.max(1);
        self
    }

    /// Rebuilds a buffer from saved entries and per-player insertion counts.
    pub fn restore(storage: ModelStorage, entries: Vec<ModelEntry>, seen: [u64; 2]) -> Result<Self, SdCfrError> {
        let mut b = ModelBuffer::new(storage);
        let cap = b.slots[0].capacity();
        let mut per: [Vec<ModelEntry>; 2] = [Vec::new(), Vec::new()];
        for e in entries {
            per[e.player.seat()].push(e);
        }
        for (seat, list) in per.into_iter().enumerate() {
            let seen = if storage == ModelStorage::KeepAll { list.len() as u64 } else { seen[seat] };
            b.slots[seat] = ReservoirBuffer::from_parts(cap, list, seen)
                .ok_or_else(|| SdCfrError::Manifest(format!("entry count inconsistent with seen={seen}")))?;
        }
        Ok(b)
    }

    pub fn storage(&self) -> ModelStorage {
        self.storage
    }

    /// Adds a network; `rng` decides retention in reservoir mode.
    pub fn push<R: Rng + ?Sized>(&mut self, entry: ModelEntry, rng: &mut R) -> Result<(), SdCfrError> {
        let slot = &mut self.slots[entry.player.seat()];
        if self.storage == ModelStorage::KeepAll {
            if let Some(last) = slot.entries().last() {
                if entry.iteration <= last.iteration {
                    return Err(SdCfrError::NonMonotonic { last: last.iteration, got: entry.iteration });
                }
            }
        }
        slot.insert(entry, rng);
        Ok(())
    }

    pub fn entries(&self, player: Player) -> &[ModelEntry] {
        self.slots[player.seat()].entries()
    }

    pub fn all_entries(&self) -> impl Iterator<Item = &ModelEntry> {
        self.slots[0].iter().chain(self.slots[1].iter())
    }

    pub fn len(&self, player: Player) -> usize {
        self.slots[player.seat()].len()
    }

    pub fn is_empty(&self, player: Player) -> bool {
        self.slots[player.seat()].is_empty()
    }

    /// Networks ever offered for `player`.
    pub fn seen(&self, player: Player) -> u64 {
        self.slots[player.seat()].seen()
    }

    /// Checkpoint decodes performed so far.
    pub fn loads(&self) -> u64 {
        self.loads.load(Ordering::Relaxed)
    }

    /// The entry's iteration strategy, decoding its checkpoint if needed.
    pub fn load(&self, entry: &ModelEntry) -> Result<Arc<dyn IterationPolicy>, SdCfrError> {
        match &entry.source {
            ModelSource::Resident(p) => Ok(p.clone()),
            ModelSource::Checkpoint { path, byte_len, checksum } => {
                let mut lru = self.lru.lock().expect("lru lock");
                if let Some(pos) = lru.iter().position(|(p, _)| p == path) {
                    let hit = lru.remove(pos);
                    let net = hit.1.clone();
                    lru.insert(0, hit);
                    return Ok(net);
                }
                let net = Arc::new(load_verified(path, *byte_len, *checksum)?);
                self.loads.fetch_add(1, Ordering::Relaxed);
                lru.insert(0, (path.clone(), net.clone()));
                lru.truncate(self.lru_capacity);
                Ok(net)
            }
        }
    }

    /// Checks that every checkpoint exists with the recorded length and checksum.
    pub fn verify(&self) -> Result<(), SdCfrError> {
        for e in self.all_entries() {
            if let ModelSource::Checkpoint { path, byte_len, checksum } = &e.source {
                load_verified(path, *byte_len, *checksum)?;
            }
        }
        Ok(())
    }

    /// Tab-separated manifest of checkpoint entries, paths relative to `base`.
    pub fn write_manifest<W: Write>(&self, mut w: W, base: &Path) -> Result<(), SdCfrError> {
        writeln!(w, "{MANIFEST_HEADER}")?;
        let mut entries: Vec<&ModelEntry> = self.all_entries().collect();
        entries.sort_by_key(|e| (e.iteration, e.player.seat()));
        for e in entries {
            let ModelSource::Checkpoint { path, byte_len, checksum } = &e.source else {
                return Err(SdCfrError::Manifest("resident networks cannot be listed in a manifest".into()));
            };
            let rel = path.strip_prefix(base).unwrap_or(path);
            writeln!(w, "{}\t{}\t{}\t{}\t{:08x}", e.player.seat(), e.iteration, rel.display(), byte_len, checksum)?;
        }
        Ok(())
    }
}

fn load_verified(path: &Path, byte_len: u64, checksum: u32) -> Result<Mlp<f32>, SdCfrError> {
    let corrupt = |reason: String| SdCfrError::CorruptCheckpoint { path: path.to_path_buf(), reason };
    let bytes = fs::read(path).map_err(|e| corrupt(e.to_string()))?;
    if bytes.len() as u64 != byte_len {
        return Err(corrupt(format!("{} bytes, manifest says {byte_len}", bytes.len())));
    }
    if crc32fast::hash(&bytes) != checksum {
        return Err(corrupt("checksum mismatch".into()));
    }
    Ok(decode_checkpoint(&bytes)?.1)
}

/// Parses a manifest written by [`ModelBuffer::write_manifest`]; relative
/// paths are resolved against `base`.
pub fn read_manifest<R: Read>(r: R, base: &Path) -> Result<Vec<ModelEntry>, SdCfrError> {
    let mut out = Vec::new();
    for (n, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        if n == 0 {
            if line != MANIFEST_HEADER {
                return Err(SdCfrError::Manifest(format!("unexpected header {line:?}")));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let bad = |what: &str| SdCfrError::Manifest(format!("line {}: bad {what}", n + 1));
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 {
            return Err(bad("field count"));
        }
        let seat: usize = f[0].parse().map_err(|_| bad("player"))?;
        if seat > 1 {
            return Err(bad("player"));
        }
        let iteration = f[1].parse().map_err(|_| bad("iteration"))?;
        let byte_len = f[3].parse().map_err(|_| bad("byte length"))?;
        let checksum = u32::from_str_radix(f[4], 16).map_err(|_| bad("checksum"))?;
        out.push(ModelEntry {
            player: Player::from_seat(seat),
            iteration,
            source: ModelSource::Checkpoint { path: base.join(f[2]), byte_len, checksum },
        });
    }
    Ok(out)
}
