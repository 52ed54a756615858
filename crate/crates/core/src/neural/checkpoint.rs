//! Checkpoint files: an 8-byte little-endian header length, a JSON header,
//! then every parameter and buffer tensor as little-endian `f32`, layer by
//! layer (parameters before buffers).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LayerSpec, Network, NeuralError, Scalar, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub input_dim: usize,
    pub layers: Vec<LayerSpec>,
    pub tensor_shapes: Vec<Vec<usize>>,
    #[serde(default)]
    pub metadata: serde_json::Value,
}

fn tensors<T: Scalar>(net: &Network<T>) -> Vec<&Tensor<T>> {
    let mut out = Vec::new();
    for layer in net.layers() {
        out.extend(layer.params().into_iter().map(|p| &p.value));
        out.extend(layer.buffers());
    }
    out
}

fn tensors_mut<T: Scalar>(net: &mut Network<T>) -> Vec<&mut Tensor<T>> {
    net.layers_mut().iter_mut().flat_map(|l| l.tensors_mut()).collect()
}

pub fn write<T: Scalar, W: Write>(net: &Network<T>, metadata: serde_json::Value, mut w: W) -> Result<(), NeuralError> {
    let ts = tensors(net);
    let header = CheckpointHeader {
        input_dim: net.input_dim(),
        layers: net.specs().to_vec(),
        tensor_shapes: ts.iter().map(|t| t.shape().to_vec()).collect(),
        metadata,
    };
    let json = serde_json::to_vec(&header).map_err(|e| NeuralError::Checkpoint(e.to_string()))?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    for t in ts {
        for v in t.data() {
            w.write_all(&(v.as_f64() as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read<T: Scalar, R: Read>(mut r: R) -> Result<(Network<T>, CheckpointHeader), NeuralError> {
    let bad = |m: String| NeuralError::Checkpoint(m);
    let mut len = [0u8; 8];
    r.read_exact(&mut len).map_err(|_| bad("truncated header length".into()))?;
    let len = u64::from_le_bytes(len);
    if len > 1 << 26 {
        return Err(bad(format!("header length {len} is implausible")));
    }
    let mut json = vec![0u8; len as usize];
    r.read_exact(&mut json).map_err(|_| bad("truncated header".into()))?;
    let header: CheckpointHeader = serde_json::from_slice(&json).map_err(|e| bad(e.to_string()))?;
    let mut net = Network::new(header.input_dim, header.layers.clone(), 0)?;
    {
        let targets = tensors_mut(&mut net);
        if targets.len() != header.tensor_shapes.len() {
            return Err(bad(format!("header lists {} tensors, network has {}", header.tensor_shapes.len(), targets.len())));
        }
        let mut buf = [0u8; 4];
        for (t, shape) in targets.into_iter().zip(&header.tensor_shapes) {
            if t.shape() != shape.as_slice() {
                return Err(bad(format!("tensor shape {shape:?} does not match layer shape {:?}", t.shape())));
            }
            for v in t.data_mut() {
                r.read_exact(&mut buf).map_err(|_| bad("truncated tensor data".into()))?;
                *v = T::from_f64(f64::from(f32::from_le_bytes(buf)));
            }
        }
    }
    if r.read(&mut [0u8; 1])? != 0 {
        return Err(bad("trailing bytes after tensor data".into()));
    }
    Ok((net, header))
}

pub fn save<T: Scalar>(net: &Network<T>, metadata: serde_json::Value, path: impl AsRef<Path>) -> Result<(), NeuralError> {
    write(net, metadata, BufWriter::new(File::create(path)?))
}

pub fn load<T: Scalar>(path: impl AsRef<Path>) -> Result<(Network<T>, CheckpointHeader), NeuralError> {
    read(BufReader::new(File::open(path)?))
}
