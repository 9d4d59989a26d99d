//! Binary checkpoints for both model kinds.
//!
//! All numbers are little-endian. PBP files start with `PBPRNN1\0`, MDE
//! files with `MDE1\0`. A trained model's input statistics live next to the
//! checkpoint as a pool dump at `<path>.pool`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::experience::{read_exact, read_f64s, read_u32, ExperiencePool};
use crate::experiments::{ModelState, TrainedModel};
use crate::mde::{Ensemble, LstmNet, MdeSettings};
use crate::pbp::{GammaPosterior, GaussianMatrix, PriorSpec};
use crate::rnn::RecurrentBayesNet;

pub const PBP_MAGIC: &[u8] = b"PBPRNN1\0";
pub const MDE_MAGIC: &[u8] = b"MDE1\0";

fn write_f64s<W: Write>(out: &mut W, values: &[f64]) -> Result<()> {
    for v in values {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_f64<R: Read>(input: &mut R, what: &'static str) -> Result<f64> {
    Ok(read_f64s(input, 1, what)?[0])
}

fn expect_magic<R: Read>(input: &mut R, magic: &[u8]) -> Result<()> {
    let mut got = vec![0u8; magic.len()];
    read_exact(input, &mut got, "magic bytes")?;
    if got != magic {
        return Err(Error::WrongMagic {
            expected: magic.to_vec(),
            actual: got,
        });
    }
    Ok(())
}

fn write_matrix<W: Write>(out: &mut W, m: &GaussianMatrix) -> Result<()> {
    write_f64s(out, m.means())?;
    write_f64s(out, m.variances())
}

fn read_matrix<R: Read>(input: &mut R, rows: usize, cols: usize) -> Result<GaussianMatrix> {
    let means = read_f64s(input, rows * cols, "matrix means")?;
    let variances = read_f64s(input, rows * cols, "matrix variances")?;
    GaussianMatrix::from_parts(rows, cols, means, variances).map_err(|e| Error::Malformed(e.to_string()))
}

/// Input, transition and readout matrices, then noise α, β and prior α, β.
pub fn write_pbp<W: Write>(out: &mut W, net: &RecurrentBayesNet) -> Result<()> {
    out.write_all(PBP_MAGIC)?;
    out.write_all(&(net.input_dim() as u32).to_le_bytes())?;
    out.write_all(&(net.hidden_dim() as u32).to_le_bytes())?;
    write_matrix(out, &net.recurrent_input)?;
    write_matrix(out, &net.recurrent_hidden)?;
    write_matrix(out, &net.readout)?;
    write_f64s(
        out,
        &[
            net.noise.alpha(),
            net.noise.beta(),
            net.prior.alpha_lambda(),
            net.prior.beta_lambda(),
        ],
    )
}

pub fn read_pbp<R: Read>(input: &mut R) -> Result<RecurrentBayesNet> {
    expect_magic(input, PBP_MAGIC)?;
    let d = read_u32(input, "input dimension")? as usize;
    let h = read_u32(input, "hidden dimension")? as usize;
    if d == 0 || h == 0 {
        return Err(Error::Malformed("zero network dimension".into()));
    }
    let w_in = read_matrix(input, h, d + 1)?;
    let w_h = read_matrix(input, h, h + 1)?;
    let w_out = read_matrix(input, 1, h + 1)?;
    let p = read_f64s(input, 4, "hyper-parameters")?;
    let noise = GammaPosterior::new(p[0], p[1]).map_err(|e| Error::Malformed(e.to_string()))?;
    let prior = PriorSpec::new(p[2], p[3]).map_err(|e| Error::Malformed(e.to_string()))?;
    RecurrentBayesNet::from_parts(w_in, w_h, w_out, noise, prior).map_err(|e| Error::Malformed(e.to_string()))
}

/// Member count and dimensions, each member's flat parameters, then the
/// dropout rate and passes per member.
pub fn write_mde<W: Write>(out: &mut W, ens: &Ensemble) -> Result<()> {
    out.write_all(MDE_MAGIC)?;
    out.write_all(&(ens.members.len() as u32).to_le_bytes())?;
    out.write_all(&(ens.input_dim() as u32).to_le_bytes())?;
    out.write_all(&(ens.hidden_dim() as u32).to_le_bytes())?;
    for m in &ens.members {
        write_f64s(out, m.params())?;
    }
    out.write_all(&ens.dropout_rate.to_le_bytes())?;
    out.write_all(&(ens.passes_per_member as u32).to_le_bytes())?;
    Ok(())
}

pub fn read_mde<R: Read>(input: &mut R) -> Result<Ensemble> {
    expect_magic(input, MDE_MAGIC)?;
    let n = read_u32(input, "member count")? as usize;
    let d = read_u32(input, "input dimension")? as usize;
    let h = read_u32(input, "hidden dimension")? as usize;
    if n == 0 || d == 0 || h == 0 {
        return Err(Error::Malformed("empty ensemble or zero dimension".into()));
    }
    let members = (0..n)
        .map(|_| {
            let params = read_f64s(input, LstmNet::param_count(d, h), "member parameters")?;
            LstmNet::from_params(d, h, params).map_err(|e| Error::Malformed(e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    let dropout_rate = read_f64(input, "dropout rate")?;
    if !(0.0..1.0).contains(&dropout_rate) {
        return Err(Error::Malformed(format!("dropout rate {dropout_rate} outside [0, 1)")));
    }
    let passes = read_u32(input, "passes per member")? as usize;
    Ok(Ensemble {
        members,
        dropout_rate,
        passes_per_member: passes,
        settings: MdeSettings::default(),
    })
}

pub fn pool_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".pool");
    PathBuf::from(s)
}

/// Writes the model to `path` and `pool` to `<path>.pool`.
pub fn save_checkpoint(path: &Path, model: &TrainedModel, pool: &ExperiencePool) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    match &model.state {
        ModelState::Pbp(net) => write_pbp(&mut out, net)?,
        ModelState::Mde(ens) => write_mde(&mut out, ens)?,
    }
    out.flush()?;
    let mut out = BufWriter::new(File::create(pool_path(path))?);
    pool.write_to(&mut out)?;
    out.flush()?;
    Ok(())
}

/// Reads a checkpoint of either kind, detected from its magic bytes.
pub fn load_checkpoint(path: &Path) -> Result<(TrainedModel, ExperiencePool)> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    let state = if bytes.starts_with(PBP_MAGIC) {
        ModelState::Pbp(read_pbp(&mut bytes.as_slice())?)
    } else if bytes.starts_with(MDE_MAGIC) {
        ModelState::Mde(read_mde(&mut bytes.as_slice())?)
    } else {
        return Err(Error::WrongMagic {
            expected: PBP_MAGIC.to_vec(),
            actual: bytes.iter().take(PBP_MAGIC.len()).copied().collect(),
        });
    };
    let pool = ExperiencePool::read_from(&mut BufReader::new(File::open(pool_path(path))?))?;
    let model = TrainedModel {
        state,
        stats: pool.feature_stats().clone(),
    };
    Ok((model, pool))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;

    #[test]
    fn pbp_round_trip_is_bitwise() {
        let mut rng = SeedTree::new(0).stream("ckpt", 0);
        let net = RecurrentBayesNet::new(9, 4, &mut rng).unwrap();
        let mut buf = Vec::new();
        write_pbp(&mut buf, &net).unwrap();
        let back = read_pbp(&mut buf.as_slice()).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn mde_round_trip_is_bitwise() {
        let mut rng = SeedTree::new(1).stream("ckpt", 0);
        let ens = Ensemble::new(2, 9, 3, 0.7, 20, &mut rng).unwrap();
        let mut buf = Vec::new();
        write_mde(&mut buf, &ens).unwrap();
        assert_eq!(read_mde(&mut buf.as_slice()).unwrap(), ens);
    }

    #[test]
    fn cross_kind_and_truncation_rejected() {
        let mut rng = SeedTree::new(2).stream("ckpt", 0);
        let ens = Ensemble::new(1, 9, 2, 0.5, 2, &mut rng).unwrap();
        let mut buf = Vec::new();
        write_mde(&mut buf, &ens).unwrap();
        match read_pbp(&mut buf.as_slice()) {
            Err(Error::WrongMagic { expected, actual }) => {
                assert_eq!(expected, PBP_MAGIC);
                assert_eq!(&actual[..5], MDE_MAGIC);
            }
            other => panic!("unexpected {other:?}"),
        }
        let cut = &buf[..buf.len() - 1];
        assert!(matches!(read_mde(&mut &cut[..]), Err(Error::Truncated(_))));
    }
}
