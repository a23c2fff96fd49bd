//! Binary checkpoints: named tensors as little-endian f32 plus a text
//! manifest carrying the architecture and run parameters.
//!
//! Layout of the binary file:
//!
//! ```text
//! magic  b"HRCK"
//! u32    format version (1)
//! u32    tensor count
//! per tensor:
//!   u16  name length, then that many UTF-8 bytes
//!   u8   rank, then rank u32 dimensions
//!   f32  values, row-major
//! ```
//!
//! All integers and floats are little-endian. The manifest is written next
//! to the binary as `<file>.manifest.txt`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;

use super::{GameConfig, TrainedPair};
use crate::nn::{NnError, TemperatureSchedule};
use crate::{RunRng, Scalar};

const MAGIC: &[u8; 4] = b"HRCK";
const VERSION: u32 = 1;

pub fn manifest_path(checkpoint: &Path) -> PathBuf {
    let mut name = checkpoint
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "checkpoint".into());
    name.push_str(".manifest.txt");
    checkpoint.with_file_name(name)
}

/// Saves the pair's tensors and writes the manifest alongside.
pub fn save_checkpoint<F: Scalar>(
    pair: &mut TrainedPair<F>,
    epoch: usize,
    path: &Path,
) -> Result<(), NnError> {
    let mut entries: Vec<(String, Vec<usize>, Vec<f32>)> = Vec::new();
    pair.for_each_param(&mut |name, p| {
        let values: Vec<f32> = p.values().iter().map(|v| v.as_f64() as f32).collect();
        entries.push((name, p.tensor.shape().to_vec(), values));
    });

    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(entries.len() as u32).to_le_bytes())?;
    for (name, shape, values) in &entries {
        let name_bytes = name.as_bytes();
        w.write_all(&(name_bytes.len() as u16).to_le_bytes())?;
        w.write_all(name_bytes)?;
        w.write_all(&[shape.len() as u8])?;
        for &d in shape {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for &v in values {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;

    let cfg = &pair.config;
    let manifest = format!(
        "hierref-checkpoint v1\nn={}\nk={}\nmax_len={}\nvocab_factor={}\nembed_dim={}\n\
         hidden_dim={}\nepochs={}\nbatch_size={}\nlearning_rate={}\ntemperature_initial={}\n\
         temperature_decay={}\nseed={}\nepoch={}\nvocab_size={}\n",
        cfg.n,
        cfg.k,
        cfg.max_len,
        cfg.vocab_factor,
        cfg.embed_dim,
        cfg.hidden_dim,
        cfg.epochs,
        cfg.batch_size,
        cfg.learning_rate,
        cfg.temperature.initial,
        cfg.temperature.decay,
        cfg.seed,
        epoch,
        cfg.vocab_size(),
    );
    std::fs::write(manifest_path(path), manifest)?;
    Ok(())
}

fn parse_manifest(text: &str) -> Result<(GameConfig, usize), NnError> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if header != "hierref-checkpoint v1" {
        return Err(NnError::Checkpoint(format!(
            "unsupported manifest header {header:?}"
        )));
    }
    let mut kv = BTreeMap::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| NnError::Checkpoint(format!("bad manifest line {line:?}")))?;
        kv.insert(key.to_string(), value.to_string());
    }
    let get = |key: &str| {
        kv.get(key)
            .ok_or_else(|| NnError::Checkpoint(format!("manifest missing {key}")))
    };
    let parse_usize = |key: &str| -> Result<usize, NnError> {
        get(key)?
            .parse()
            .map_err(|_| NnError::Checkpoint(format!("bad manifest value for {key}")))
    };
    let parse_f64 = |key: &str| -> Result<f64, NnError> {
        get(key)?
            .parse()
            .map_err(|_| NnError::Checkpoint(format!("bad manifest value for {key}")))
    };

    let cfg = GameConfig {
        n: parse_usize("n")?,
        k: parse_usize("k")? as u8,
        max_len: parse_usize("max_len")?,
        vocab_factor: parse_usize("vocab_factor")?,
        embed_dim: parse_usize("embed_dim")?,
        hidden_dim: parse_usize("hidden_dim")?,
        epochs: parse_usize("epochs")?,
        batch_size: parse_usize("batch_size")?,
        learning_rate: parse_f64("learning_rate")?,
        temperature: TemperatureSchedule::new(
            parse_f64("temperature_initial")?,
            parse_f64("temperature_decay")?,
        ),
        seed: parse_usize("seed")? as u64,
    };
    let epoch = parse_usize("epoch")?;
    Ok((cfg, epoch))
}

fn read_exact_n<R: Read>(r: &mut R, n: usize) -> Result<Vec<u8>, NnError> {
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

/// Loads a checkpoint written by [`save_checkpoint`]; the manifest next to
/// the binary supplies the architecture.
pub fn load_checkpoint(path: &Path) -> Result<(TrainedPair<f32>, usize), NnError> {
    let manifest = std::fs::read_to_string(manifest_path(path))?;
    let (cfg, epoch) = parse_manifest(&manifest)?;

    let mut r = BufReader::new(File::open(path)?);
    let magic = read_exact_n(&mut r, 4)?;
    if magic.as_slice() != MAGIC {
        return Err(NnError::Checkpoint("bad magic".into()));
    }
    let version = u32::from_le_bytes(read_exact_n(&mut r, 4)?.try_into().unwrap());
    if version != VERSION {
        return Err(NnError::Checkpoint(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let count = u32::from_le_bytes(read_exact_n(&mut r, 4)?.try_into().unwrap()) as usize;

    let mut tensors: BTreeMap<String, (Vec<usize>, Vec<f32>)> = BTreeMap::new();
    for _ in 0..count {
        let name_len = u16::from_le_bytes(read_exact_n(&mut r, 2)?.try_into().unwrap()) as usize;
        let name = String::from_utf8(read_exact_n(&mut r, name_len)?)
            .map_err(|_| NnError::Checkpoint("tensor name is not UTF-8".into()))?;
        let rank = read_exact_n(&mut r, 1)?[0] as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape
                .push(u32::from_le_bytes(read_exact_n(&mut r, 4)?.try_into().unwrap()) as usize);
        }
        let len: usize = shape.iter().product();
        let bytes = read_exact_n(&mut r, len * 4)?;
        let values = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        tensors.insert(name, (shape, values));
    }

    // Build the architecture, then overwrite every tensor by name.
    let mut rng = RunRng::seed_from_u64(cfg.seed);
    let mut pair = TrainedPair::<f32>::init(&cfg, &mut rng);
    let mut missing = Vec::new();
    pair.for_each_param(&mut |name, p| match tensors.get(&name) {
        Some((shape, values)) if shape == p.tensor.shape() && values.len() == p.len() => {
            p.values_mut().copy_from_slice(values);
        }
        Some((shape, _)) => missing.push(format!(
            "{name}: shape {:?} in file, {:?} expected",
            shape,
            p.tensor.shape()
        )),
        None => missing.push(format!("{name}: absent from file")),
    });
    if !missing.is_empty() {
        return Err(NnError::Checkpoint(format!(
            "checkpoint does not match architecture: {}",
            missing.join("; ")
        )));
    }
    Ok((pair, epoch))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_round_trip() {
        let cfg = GameConfig {
            embed_dim: 6,
            hidden_dim: 10,
            vocab_factor: 1,
            ..GameConfig::new(2, 3, 21)
        };
        let mut rng = RunRng::seed_from_u64(cfg.seed);
        let mut pair = TrainedPair::<f32>::init(&cfg, &mut rng);

        let dir = std::env::temp_dir().join("hierref-checkpoint-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("pair.bin");
        save_checkpoint(&mut pair, 17, &path).unwrap();
        let (mut loaded, epoch) = load_checkpoint(&path).unwrap();
        assert_eq!(epoch, 17);
        assert_eq!(loaded.config, cfg);

        let mut originals = Vec::new();
        pair.for_each_param(&mut |name, p| originals.push((name, p.values().to_vec())));
        let mut restored = Vec::new();
        loaded.for_each_param(&mut |name, p| restored.push((name, p.values().to_vec())));
        assert_eq!(originals, restored);
    }

    #[test]
    fn truncated_checkpoint_is_an_error() {
        let dir = std::env::temp_dir().join("hierref-checkpoint-bad");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.bin");
        std::fs::write(&path, b"HRCK\x01\x00\x00\x00").unwrap();
        std::fs::write(
            manifest_path(&path),
            "hierref-checkpoint v1\nn=2\nk=3\nmax_len=2\nvocab_factor=1\nembed_dim=4\n\
             hidden_dim=6\nepochs=1\nbatch_size=8\nlearning_rate=0.0005\n\
             temperature_initial=1.5\ntemperature_decay=0.99\nseed=0\nepoch=0\nvocab_size=5\n",
        )
        .unwrap();
        assert!(load_checkpoint(&path).is_err());
    }
}
