//! JSON file formats. Complex entries are `[re, im]` pairs in row-major
//! nested arrays.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::algebra::WedderburnData;
use crate::error::{Error, Result};
use crate::linops::{C64, CMatrix, QuantumModel};
use crate::observability::{CVector, LinearFilter};
use crate::reduction::{LabeledOp, ReducedModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JsonMatrix(pub Vec<Vec<[f64; 2]>>);

impl From<&CMatrix> for JsonMatrix {
    fn from(m: &CMatrix) -> Self {
        JsonMatrix(
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
                .collect(),
        )
    }
}

impl JsonMatrix {
    pub fn to_matrix(&self) -> Result<CMatrix> {
        let rows = self.0.len();
        let cols = self.0.first().map_or(0, Vec::len);
        if rows == 0 || self.0.iter().any(|r| r.len() != cols) {
            return Err(Error::Parse("matrix rows must be non-empty and of equal length".into()));
        }
        Ok(CMatrix::from_fn(rows, cols, |i, j| {
            let [re, im] = self.0[i][j];
            C64::new(re, im)
        }))
    }
}

fn vector_json(v: &CVector) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

fn matrices(list: &[JsonMatrix]) -> Result<Vec<CMatrix>> {
    list.iter().map(JsonMatrix::to_matrix).collect()
}

fn json_list(list: &[CMatrix]) -> Vec<JsonMatrix> {
    list.iter().map(JsonMatrix::from).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct ModelFile {
    pub n: usize,
    pub H: JsonMatrix,
    #[serde(default)]
    pub L: Vec<JsonMatrix>,
    #[serde(default)]
    pub D: Vec<JsonMatrix>,
    #[serde(default)]
    pub C: Vec<JsonMatrix>,
    pub O: Vec<JsonMatrix>,
}

impl From<&QuantumModel> for ModelFile {
    fn from(m: &QuantumModel) -> Self {
        ModelFile {
            n: m.n,
            H: (&m.h).into(),
            L: json_list(&m.l),
            D: json_list(&m.d),
            C: json_list(&m.c),
            O: json_list(&m.o),
        }
    }
}

impl ModelFile {
    pub fn to_model(&self) -> Result<QuantumModel> {
        let model = QuantumModel::new(
            self.H.to_matrix()?,
            matrices(&self.L)?,
            matrices(&self.D)?,
            matrices(&self.C)?,
            matrices(&self.O)?,
        )?;
        if model.n != self.n {
            return Err(Error::Parse(format!("n = {} but H is {}×{}", self.n, model.n, model.n)));
        }
        Ok(model)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LabeledJson {
    pub channel: usize,
    pub l: usize,
    pub e: isize,
    pub op: JsonMatrix,
}

fn labeled(list: &[Vec<LabeledOp>]) -> Vec<LabeledJson> {
    list.iter()
        .enumerate()
        .flat_map(|(channel, ops)| {
            ops.iter().map(move |x| LabeledJson {
                channel,
                l: x.l,
                e: x.e,
                op: (&x.op).into(),
            })
        })
        .collect()
}

/// Reduced model together with the decomposition it was built from.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct ReducedModelFile {
    pub n: usize,
    pub m: usize,
    pub U: JsonMatrix,
    /// (d_F, d_G) per block.
    pub blocks: Vec<(usize, usize)>,
    pub H: JsonMatrix,
    pub L: Vec<LabeledJson>,
    pub D: Vec<JsonMatrix>,
    pub D_extra: Vec<LabeledJson>,
    pub C: Vec<LabeledJson>,
    pub O: Vec<JsonMatrix>,
    /// Number of original channels of each kind, so empty ones survive a round trip.
    pub channels: (usize, usize, usize),
}

impl ReducedModelFile {
    pub fn new(red: &ReducedModel, w: &WedderburnData) -> Self {
        ReducedModelFile {
            n: w.n(),
            m: red.m,
            U: (&w.u).into(),
            blocks: red.blocks.clone(),
            H: (&red.h).into(),
            L: labeled(&red.l),
            D: json_list(&red.d),
            D_extra: labeled(&red.d_extra),
            C: labeled(&red.c),
            O: json_list(&red.o),
            channels: (red.l.len(), red.d.len(), red.c.len()),
        }
    }

    pub fn wedderburn(&self) -> Result<WedderburnData> {
        WedderburnData::new(self.U.to_matrix()?, self.blocks.clone())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct LinearFilterFile {
    pub kappa: usize,
    pub Q: JsonMatrix,
    pub G: Vec<JsonMatrix>,
    pub K: Vec<JsonMatrix>,
    pub zeta: Vec<Vec<[f64; 2]>>,
    pub e: Vec<[f64; 2]>,
    /// Operator basis {Eₖ} of the observable space.
    pub basis: Vec<JsonMatrix>,
}

impl From<&LinearFilter> for LinearFilterFile {
    fn from(lin: &LinearFilter) -> Self {
        LinearFilterFile {
            kappa: lin.kappa,
            Q: (&lin.q).into(),
            G: json_list(&lin.g),
            K: json_list(&lin.k),
            zeta: lin.zeta.iter().map(vector_json).collect(),
            e: vector_json(&lin.e_vec),
            basis: json_list(&lin.basis.basis),
        }
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json(value))?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<QuantumModel> {
    read_json::<ModelFile>(path)?.to_model()
}

pub fn write_model(path: &Path, model: &QuantumModel) -> Result<()> {
    write_json(path, &ModelFile::from(model))
}
