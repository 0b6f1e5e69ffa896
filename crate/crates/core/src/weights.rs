//! Neural model parameters and their binary container format.
//!
//! Container layout: magic `HYWT`, u32 format version, u32 embed size,
//! u32 hidden size, u32 tensor count, then per tensor a header entry
//! (u32 name length, UTF-8 name, u32 rank, u32 dims...), then the payloads
//! as row-major little-endian f32 in header order.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

const MAGIC: &[u8; 4] = b"HYWT";
const VERSION: u32 = 1;

/// Gate/candidate parameters of one GRU layer.
#[derive(Debug, Clone)]
pub struct GruParams {
    pub wz: Matrix,
    pub wr: Matrix,
    pub wh: Matrix,
    pub uz: Matrix,
    pub ur: Matrix,
    pub uh: Matrix,
    pub bz: Vec<f64>,
    pub br: Vec<f64>,
    pub bh: Vec<f64>,
}

/// Decoder GRU additionally conditions every gate on the context vector.
#[derive(Debug, Clone)]
pub struct DecoderGruParams {
    pub gru: GruParams,
    pub cz: Matrix,
    pub cr: Matrix,
    pub ch: Matrix,
}

#[derive(Debug, Clone)]
pub struct ModelWeights {
    pub embed: usize,
    pub hidden: usize,
    pub src_vocab: usize,
    pub tgt_vocab: usize,
    pub src_embed: Matrix,
    pub tgt_embed: Matrix,
    pub enc_fwd: GruParams,
    pub enc_bwd: GruParams,
    pub dec: DecoderGruParams,
    pub init_w: Matrix,
    pub init_b: Vec<f64>,
    pub att_w: Matrix,
    pub att_u: Matrix,
    pub att_b: Vec<f64>,
    pub att_v: Vec<f64>,
    pub ro_s: Matrix,
    pub ro_y: Matrix,
    pub ro_c: Matrix,
    pub ro_b: Vec<f64>,
    pub out_w: Matrix,
    pub out_b: Vec<f64>,
}

/// Canonical tensor inventory for given sizes: (name, dims).
fn tensor_spec(embed: usize, hidden: usize, vs: usize, vt: usize) -> Vec<(String, Vec<usize>)> {
    let e = embed;
    let h = hidden;
    let mut spec = vec![
        ("src_embed".to_string(), vec![vs, e]),
        ("tgt_embed".to_string(), vec![vt, e]),
    ];
    for enc in ["enc_fwd", "enc_bwd"] {
        for gate in ["wz", "wr", "wh"] {
            spec.push((format!("{enc}.{gate}"), vec![h, e]));
        }
        for gate in ["uz", "ur", "uh"] {
            spec.push((format!("{enc}.{gate}"), vec![h, h]));
        }
        for gate in ["bz", "br", "bh"] {
            spec.push((format!("{enc}.{gate}"), vec![h]));
        }
    }
    for gate in ["wz", "wr", "wh"] {
        spec.push((format!("dec.{gate}"), vec![h, e]));
    }
    for gate in ["cz", "cr", "ch"] {
        spec.push((format!("dec.{gate}"), vec![h, 2 * h]));
    }
    for gate in ["uz", "ur", "uh"] {
        spec.push((format!("dec.{gate}"), vec![h, h]));
    }
    for gate in ["bz", "br", "bh"] {
        spec.push((format!("dec.{gate}"), vec![h]));
    }
    for (name, dims) in [
        ("init.w", vec![h, h]),
        ("init.b", vec![h]),
        ("att.w", vec![h, h]),
        ("att.u", vec![h, 2 * h]),
        ("att.b", vec![h]),
        ("att.v", vec![h]),
        ("ro.s", vec![h, h]),
        ("ro.y", vec![h, e]),
        ("ro.c", vec![h, 2 * h]),
        ("ro.b", vec![h]),
        ("out.w", vec![vt, h]),
        ("out.b", vec![vt]),
    ] {
        spec.push((name.to_string(), dims));
    }
    spec
}

impl ModelWeights {
    /// Deterministic random initialization, used by the fixture generator.
    pub fn seeded(seed: u64, embed: usize, hidden: usize, src_vocab: usize, tgt_vocab: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = tensor_spec(embed, hidden, src_vocab, tgt_vocab);
        let tensors: Vec<(String, Vec<usize>, Vec<f64>)> = spec
            .into_iter()
            .map(|(name, dims)| {
                let n: usize = dims.iter().product();
                let fan_in = *dims.last().unwrap() as f64;
                let scale = 1.0 / fan_in.sqrt();
                let data: Vec<f64> = (0..n)
                    .map(|_| (rng.gen::<f64>() - 0.5) * 2.0 * scale)
                    // round-trip through f32 so seeded weights equal their
                    // serialized form bit-for-bit
                    .map(|x| x as f32 as f64)
                    .collect();
                (name, dims, data)
            })
            .collect();
        Self::from_tensors(embed, hidden, src_vocab, tgt_vocab, tensors).expect("seeded build")
    }

    fn from_tensors(
        embed: usize,
        hidden: usize,
        src_vocab: usize,
        tgt_vocab: usize,
        tensors: Vec<(String, Vec<usize>, Vec<f64>)>,
    ) -> Result<Self> {
        let spec = tensor_spec(embed, hidden, src_vocab, tgt_vocab);
        let mut map: std::collections::HashMap<String, (Vec<usize>, Vec<f64>)> = tensors
            .into_iter()
            .map(|(n, d, v)| (n, (d, v)))
            .collect();
        let mut take_mat = |name: &str| -> Result<Matrix> {
            let (dims, data) = map
                .remove(name)
                .ok_or_else(|| Error::MissingTensor(name.to_string()))?;
            let expected = &spec.iter().find(|(n, _)| n == name).unwrap().1;
            if &dims != expected {
                return Err(Error::DimMismatch {
                    name: name.to_string(),
                    expected: expected.clone(),
                    got: dims,
                });
            }
            if data.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(name.to_string()));
            }
            let (rows, cols) = match dims.len() {
                1 => (1, dims[0]),
                2 => (dims[0], dims[1]),
                _ => {
                    return Err(Error::WeightsFormat(format!(
                        "tensor `{name}` has unsupported rank {}",
                        dims.len()
                    )))
                }
            };
            Ok(Matrix::from_vec(rows, cols, data))
        };
        let mut mat = |name: &str| take_mat(name);
        let gru = |m: &mut dyn FnMut(&str) -> Result<Matrix>, prefix: &str| -> Result<GruParams> {
            Ok(GruParams {
                wz: m(&format!("{prefix}.wz"))?,
                wr: m(&format!("{prefix}.wr"))?,
                wh: m(&format!("{prefix}.wh"))?,
                uz: m(&format!("{prefix}.uz"))?,
                ur: m(&format!("{prefix}.ur"))?,
                uh: m(&format!("{prefix}.uh"))?,
                bz: m(&format!("{prefix}.bz"))?.data,
                br: m(&format!("{prefix}.br"))?.data,
                bh: m(&format!("{prefix}.bh"))?.data,
            })
        };
        let w = ModelWeights {
            embed,
            hidden,
            src_vocab,
            tgt_vocab,
            src_embed: mat("src_embed")?,
            tgt_embed: mat("tgt_embed")?,
            enc_fwd: gru(&mut mat, "enc_fwd")?,
            enc_bwd: gru(&mut mat, "enc_bwd")?,
            dec: DecoderGruParams {
                gru: gru(&mut mat, "dec")?,
                cz: mat("dec.cz")?,
                cr: mat("dec.cr")?,
                ch: mat("dec.ch")?,
            },
            init_w: mat("init.w")?,
            init_b: mat("init.b")?.data,
            att_w: mat("att.w")?,
            att_u: mat("att.u")?,
            att_b: mat("att.b")?.data,
            att_v: mat("att.v")?.data,
            ro_s: mat("ro.s")?,
            ro_y: mat("ro.y")?,
            ro_c: mat("ro.c")?,
            ro_b: mat("ro.b")?.data,
            out_w: mat("out.w")?,
            out_b: mat("out.b")?.data,
        };
        if let Some(name) = map.keys().next() {
            return Err(Error::WeightsFormat(format!("unexpected tensor `{name}`")));
        }
        Ok(w)
    }

    fn canonical_tensors(&self) -> Vec<(String, Vec<usize>, Vec<f64>)> {
        let spec = tensor_spec(self.embed, self.hidden, self.src_vocab, self.tgt_vocab);
        let gru_field = |g: &GruParams, gate: &str| -> Vec<f64> {
            match gate {
                "wz" => g.wz.data.clone(),
                "wr" => g.wr.data.clone(),
                "wh" => g.wh.data.clone(),
                "uz" => g.uz.data.clone(),
                "ur" => g.ur.data.clone(),
                "uh" => g.uh.data.clone(),
                "bz" => g.bz.clone(),
                "br" => g.br.clone(),
                "bh" => g.bh.clone(),
                _ => unreachable!(),
            }
        };
        spec.into_iter()
            .map(|(name, dims)| {
                let data = match name.as_str() {
                    "src_embed" => self.src_embed.data.clone(),
                    "tgt_embed" => self.tgt_embed.data.clone(),
                    "init.w" => self.init_w.data.clone(),
                    "init.b" => self.init_b.clone(),
                    "att.w" => self.att_w.data.clone(),
                    "att.u" => self.att_u.data.clone(),
                    "att.b" => self.att_b.clone(),
                    "att.v" => self.att_v.clone(),
                    "ro.s" => self.ro_s.data.clone(),
                    "ro.y" => self.ro_y.data.clone(),
                    "ro.c" => self.ro_c.data.clone(),
                    "ro.b" => self.ro_b.clone(),
                    "out.w" => self.out_w.data.clone(),
                    "out.b" => self.out_b.clone(),
                    other => {
                        let (prefix, gate) = other.split_once('.').unwrap();
                        match prefix {
                            "enc_fwd" => gru_field(&self.enc_fwd, gate),
                            "enc_bwd" => gru_field(&self.enc_bwd, gate),
                            "dec" => match gate {
                                "cz" => self.dec.cz.data.clone(),
                                "cr" => self.dec.cr.data.clone(),
                                "ch" => self.dec.ch.data.clone(),
                                _ => gru_field(&self.dec.gru, gate),
                            },
                            _ => unreachable!(),
                        }
                    }
                };
                (name, dims, data)
            })
            .collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let tensors = self.canonical_tensors();
        let mut buf: Vec<u8> = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.embed as u32).to_le_bytes());
        buf.extend_from_slice(&(self.hidden as u32).to_le_bytes());
        buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
        for (name, dims, _) in &tensors {
            buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
            buf.extend_from_slice(name.as_bytes());
            buf.extend_from_slice(&(dims.len() as u32).to_le_bytes());
            for d in dims {
                buf.extend_from_slice(&(*d as u32).to_le_bytes());
            }
        }
        for (_, _, data) in &tensors {
            for x in data {
                buf.extend_from_slice(&(*x as f32).to_le_bytes());
            }
        }
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(&buf))
            .map_err(|e| Error::io(path, e))
    }

    /// Loads and validates a weights container. Sizes of the vocabulary-shaped
    /// tensors determine the vocabulary sizes.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        let mut pos = 0usize;
        let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
            if *pos + n > bytes.len() {
                return Err(Error::WeightsFormat("truncated container".into()));
            }
            let s = &bytes[*pos..*pos + n];
            *pos += n;
            Ok(s)
        };
        let read_u32 = |pos: &mut usize| -> Result<u32> {
            Ok(u32::from_le_bytes(take(pos, 4)?.try_into().unwrap()))
        };
        if take(&mut pos, 4)? != MAGIC {
            return Err(Error::WeightsFormat("bad magic".into()));
        }
        let version = read_u32(&mut pos)?;
        if version != VERSION {
            return Err(Error::WeightsFormat(format!("unsupported version {version}")));
        }
        let embed = read_u32(&mut pos)? as usize;
        let hidden = read_u32(&mut pos)? as usize;
        let count = read_u32(&mut pos)? as usize;
        let mut headers: Vec<(String, Vec<usize>)> = Vec::with_capacity(count);
        for _ in 0..count {
            let name_len = read_u32(&mut pos)? as usize;
            let name = String::from_utf8(take(&mut pos, name_len)?.to_vec())
                .map_err(|_| Error::WeightsFormat("non-UTF-8 tensor name".into()))?;
            let rank = read_u32(&mut pos)? as usize;
            let mut dims = Vec::with_capacity(rank);
            for _ in 0..rank {
                dims.push(read_u32(&mut pos)? as usize);
            }
            headers.push((name, dims));
        }
        let mut tensors = Vec::with_capacity(count);
        for (name, dims) in headers {
            let n: usize = dims.iter().product();
            let raw = take(&mut pos, 4 * n)?;
            let data: Vec<f64> = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect();
            tensors.push((name, dims, data));
        }
        if pos != bytes.len() {
            return Err(Error::WeightsFormat("trailing bytes after payload".into()));
        }
        let src_vocab = tensors
            .iter()
            .find(|(n, _, _)| n == "src_embed")
            .map(|(_, d, _)| d[0])
            .ok_or_else(|| Error::MissingTensor("src_embed".into()))?;
        let tgt_vocab = tensors
            .iter()
            .find(|(n, _, _)| n == "tgt_embed")
            .map(|(_, d, _)| d[0])
            .ok_or_else(|| Error::MissingTensor("tgt_embed".into()))?;
        Self::from_tensors(embed, hidden, src_vocab, tgt_vocab, tensors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn save_load_roundtrip() {
        let w = ModelWeights::seeded(7, 4, 8, 10, 12);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("model.hywt");
        w.save(&p).unwrap();
        let w2 = ModelWeights::load(&p).unwrap();
        assert_eq!(w2.embed, 4);
        assert_eq!(w2.hidden, 8);
        assert_eq!(w.src_embed, w2.src_embed);
        assert_eq!(w.dec.ch, w2.dec.ch);
        assert_eq!(w.out_b, w2.out_b);
    }

    #[test]
    fn missing_tensor_reported() {
        let w = ModelWeights::seeded(1, 3, 4, 5, 6);
        let mut tensors = w.canonical_tensors();
        tensors.retain(|(n, _, _)| n != "dec.bz");
        let err = ModelWeights::from_tensors(3, 4, 5, 6, tensors).unwrap_err();
        assert!(matches!(err, Error::MissingTensor(ref n) if n == "dec.bz"), "{err}");
    }

    #[test]
    fn non_finite_reported() {
        let w = ModelWeights::seeded(1, 3, 4, 5, 6);
        let mut tensors = w.canonical_tensors();
        let att_v = tensors.iter_mut().find(|(n, _, _)| n == "att.v").unwrap();
        att_v.2[0] = f64::NAN;
        let err = ModelWeights::from_tensors(3, 4, 5, 6, tensors).unwrap_err();
        assert!(matches!(err, Error::NonFinite(ref n) if n == "att.v"), "{err}");
    }

    #[test]
    fn dim_mismatch_reported() {
        let w = ModelWeights::seeded(1, 3, 4, 5, 6);
        let mut tensors = w.canonical_tensors();
        let t = tensors.iter_mut().find(|(n, _, _)| n == "init.w").unwrap();
        t.1 = vec![4, 5];
        t.2 = vec![0.0; 20];
        let err = ModelWeights::from_tensors(3, 4, 5, 6, tensors).unwrap_err();
        assert!(matches!(err, Error::DimMismatch { ref name, .. } if name == "init.w"), "{err}");
    }
}
