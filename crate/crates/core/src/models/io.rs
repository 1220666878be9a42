//! JSON model documents.
//!
//! Every document carries a `type` tag (`one_layer`, `deep`, `icnn1`,
//! `icnn2`, `icgn`), its dimensions, activation names, and weights as flat
//! row-major arrays. Field order is fixed by the declarations below and
//! floats are written with 17 significant digits, so a roundtrip is exact.
//!
//! ```json
//! {
//!   "type": "one_layer",
//!   "dims": [5, 2],
//!   "activation": "tanh",
//!   "A": [ ...10 values, row-major 5x2... ],
//!   "b": [ ...5 values... ]
//! }
//! ```

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::value::RawValue;

use super::{DeepMap, HiddenMap, Icnn, Icnn1, Icnn2, Layer, OneLayerMap, OutputWeights};
use crate::autodiff::Activation;
use crate::error::{Error, Result};
use crate::integrator::{ConvexGradientModel, QuadratureRule};
use crate::numeric::{Matrix, Vector};

/// Any model that can be saved.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Hidden(HiddenMap),
    Icnn(Icnn),
    Icgn(ConvexGradientModel),
}

impl From<HiddenMap> for Model {
    fn from(m: HiddenMap) -> Self {
        Model::Hidden(m)
    }
}

impl From<Icnn> for Model {
    fn from(m: Icnn) -> Self {
        Model::Icnn(m)
    }
}

impl From<ConvexGradientModel> for Model {
    fn from(m: ConvexGradientModel) -> Self {
        Model::Icgn(m)
    }
}

/// A float written with 17 significant digits.
#[derive(Debug, Clone, Copy)]
struct F17(f64);

impl Serialize for F17 {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let text = format!("{:.16e}", self.0);
        RawValue::from_string(text)
            .map_err(serde::ser::Error::custom)?
            .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for F17 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        f64::deserialize(deserializer).map(F17)
    }
}

fn floats(v: &[f64]) -> Vec<F17> {
    v.iter().copied().map(F17).collect()
}

fn unwrap_floats(v: &[F17]) -> Vec<f64> {
    v.iter().map(|f| f.0).collect()
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerDoc {
    dims: [usize; 2],
    activation: String,
    #[serde(rename = "W")]
    w: Vec<F17>,
    b: Vec<F17>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum Doc {
    OneLayer {
        dims: [usize; 2],
        activation: String,
        #[serde(rename = "A")]
        a: Vec<F17>,
        b: Vec<F17>,
    },
    Deep {
        dims: Vec<usize>,
        layers: Vec<LayerDoc>,
    },
    Icnn1 {
        dims: [usize; 2],
        activation: String,
        #[serde(rename = "W0")]
        w0: Vec<F17>,
        b0: Vec<F17>,
        w: Option<Vec<F17>>,
        a: Vec<F17>,
        c: F17,
    },
    Icnn2 {
        dims: [usize; 3],
        activation: String,
        #[serde(rename = "W0")]
        w0: Vec<F17>,
        b0: Vec<F17>,
        #[serde(rename = "Wz")]
        wz: Vec<F17>,
        #[serde(rename = "Wx")]
        wx: Vec<F17>,
        b1: Vec<F17>,
        w: Option<Vec<F17>>,
        a: Vec<F17>,
        c: F17,
    },
    Icgn {
        hidden: Box<Doc>,
        train_rule: QuadratureRule,
        eval_rule: QuadratureRule,
        offset: Option<Vec<F17>>,
    },
}

fn activation_name(act: Activation, field: &str) -> Result<String> {
    if act.is_builtin() {
        Ok(act.name().to_string())
    } else {
        Err(Error::invalid(format!(
            "field `{field}`: custom activation `{}` cannot be serialized",
            act.name()
        )))
    }
}

fn parse_activation(name: &str, field: &str) -> Result<Activation> {
    Activation::builtin(name).map_err(|e| Error::Parse(format!("field `{field}`: {e}")))
}

fn matrix(rows: usize, cols: usize, data: &[F17], field: &str) -> Result<Matrix> {
    if data.len() != rows * cols {
        return Err(Error::Parse(format!(
            "field `{field}`: expected {} values for a {rows}x{cols} matrix, got {}",
            rows * cols,
            data.len()
        )));
    }
    Matrix::new(rows, cols, unwrap_floats(data)).map_err(|e| Error::Parse(format!("field `{field}`: {e}")))
}

fn vector(len: usize, data: &[F17], field: &str) -> Result<Vector> {
    if data.len() != len {
        return Err(Error::Parse(format!(
            "field `{field}`: expected {len} values, got {}",
            data.len()
        )));
    }
    Vector::new(unwrap_floats(data)).map_err(|e| Error::Parse(format!("field `{field}`: {e}")))
}

fn output_weights(w: &Option<Vec<F17>>, len: usize) -> Result<OutputWeights> {
    match w {
        None => Ok(OutputWeights::FixedOnes),
        Some(v) => Ok(OutputWeights::Learned(vector(len, v, "w")?)),
    }
}

fn learned(w: &OutputWeights) -> Option<Vec<F17>> {
    match w {
        OutputWeights::FixedOnes => None,
        OutputWeights::Learned(v) => Some(floats(v)),
    }
}

fn hidden_doc(m: &HiddenMap) -> Result<Doc> {
    Ok(match m {
        HiddenMap::OneLayer(m) => Doc::OneLayer {
            dims: [m.output_dim(), m.input_dim()],
            activation: activation_name(m.activation(), "activation")?,
            a: floats(m.weight().data()),
            b: floats(m.bias()),
        },
        HiddenMap::Deep(m) => {
            let mut dims = vec![m.input_dim()];
            dims.extend(m.layers().iter().map(|l| l.w.rows()));
            let layers = m
                .layers()
                .iter()
                .enumerate()
                .map(|(i, l)| {
                    Ok(LayerDoc {
                        dims: [l.w.rows(), l.w.cols()],
                        activation: activation_name(l.act, &format!("layers[{i}].activation"))?,
                        w: floats(l.w.data()),
                        b: floats(&l.b),
                    })
                })
                .collect::<Result<_>>()?;
            Doc::Deep { dims, layers }
        }
    })
}

fn to_doc(model: &Model) -> Result<Doc> {
    Ok(match model {
        Model::Hidden(m) => hidden_doc(m)?,
        Model::Icnn(Icnn::One(m)) => Doc::Icnn1 {
            dims: [m.w0.rows(), m.w0.cols()],
            activation: activation_name(m.act, "activation")?,
            w0: floats(m.w0.data()),
            b0: floats(&m.b0),
            w: learned(&m.w),
            a: floats(&m.a),
            c: F17(m.c),
        },
        Model::Icnn(Icnn::Two(m)) => Doc::Icnn2 {
            dims: [m.w0.rows(), m.wz.rows(), m.w0.cols()],
            activation: activation_name(m.act, "activation")?,
            w0: floats(m.w0.data()),
            b0: floats(&m.b0),
            wz: floats(m.wz.data()),
            wx: floats(m.wx.data()),
            b1: floats(&m.b1),
            w: learned(&m.w),
            a: floats(&m.a),
            c: F17(m.c),
        },
        Model::Icgn(m) => Doc::Icgn {
            hidden: Box::new(hidden_doc(m.hidden())?),
            train_rule: m.train_rule(),
            eval_rule: m.eval_rule(),
            offset: m.offset().map(|o| floats(o)),
        },
    })
}

fn from_doc(doc: &Doc) -> Result<Model> {
    Ok(match doc {
        Doc::OneLayer { dims: [m, n], activation, a, b } => {
            let act = parse_activation(activation, "activation")?;
            let map = OneLayerMap::new(matrix(*m, *n, a, "A")?, vector(*m, b, "b")?, act)
                .map_err(|e| Error::Parse(e.to_string()))?;
            Model::Hidden(map.into())
        }
        Doc::Deep { dims, layers } => {
            if dims.len() != layers.len() + 1 {
                return Err(Error::Parse(format!(
                    "field `dims`: {} entries for {} layers",
                    dims.len(),
                    layers.len()
                )));
            }
            let built = layers
                .iter()
                .enumerate()
                .map(|(i, l)| {
                    let [r, c] = l.dims;
                    if c != dims[i] || r != dims[i + 1] {
                        return Err(Error::Parse(format!(
                            "field `layers[{i}].dims`: {r}x{c} inconsistent with dims {dims:?}"
                        )));
                    }
                    Ok(Layer {
                        w: matrix(r, c, &l.w, &format!("layers[{i}].W"))?,
                        b: vector(r, &l.b, &format!("layers[{i}].b"))?,
                        act: parse_activation(&l.activation, &format!("layers[{i}].activation"))?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Model::Hidden(DeepMap::new(built).map_err(|e| Error::Parse(e.to_string()))?.into())
        }
        Doc::Icnn1 { dims: [h, n], activation, w0, b0, w, a, c } => {
            let m = Icnn1::new(
                matrix(*h, *n, w0, "W0")?,
                vector(*h, b0, "b0")?,
                output_weights(w, *h)?,
                vector(*n, a, "a")?,
                c.0,
                parse_activation(activation, "activation")?,
            )
            .map_err(|e| Error::Parse(e.to_string()))?;
            Model::Icnn(Icnn::One(m))
        }
        Doc::Icnn2 { dims: [h1, h2, n], activation, w0, b0, wz, wx, b1, w, a, c } => {
            let m = Icnn2 {
                w0: matrix(*h1, *n, w0, "W0")?,
                b0: vector(*h1, b0, "b0")?,
                wz: matrix(*h2, *h1, wz, "Wz")?,
                wx: matrix(*h2, *n, wx, "Wx")?,
                b1: vector(*h2, b1, "b1")?,
                w: output_weights(w, *h2)?,
                a: vector(*n, a, "a")?,
                c: c.0,
                act: parse_activation(activation, "activation")?,
            };
            m.validate().map_err(|e| Error::Parse(e.to_string()))?;
            Model::Icnn(Icnn::Two(m))
        }
        Doc::Icgn { hidden, train_rule, eval_rule, offset } => {
            let Model::Hidden(h) = from_doc(hidden)? else {
                return Err(Error::Parse("field `hidden`: must be a one_layer or deep map".into()));
            };
            let dim = h.input_dim();
            let offset = offset.as_ref().map(|o| vector(dim, o, "offset")).transpose()?;
            let model = ConvexGradientModel::new(h, *train_rule, *eval_rule)
                .and_then(|m| m.with_offset(offset))
                .map_err(|e| Error::Parse(e.to_string()))?;
            Model::Icgn(model)
        }
    })
}

/// Pretty-printed JSON document for `model`.
pub fn serialize_model(model: &Model) -> Result<String> {
    let doc = to_doc(model)?;
    let mut text = serde_json::to_string_pretty(&doc).map_err(|e| Error::invalid(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

pub fn deserialize_model(text: &str) -> Result<Model> {
    let doc: Doc = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    from_doc(&doc)
}

impl Model {
    pub fn to_json(&self) -> Result<String> {
        serialize_model(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        deserialize_model(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::RngStream;

    fn samples() -> Vec<Model> {
        let mut rng = RngStream::new(41);
        let one = OneLayerMap::init(2, 5, Activation::tanh(), &mut rng);
        let deep = DeepMap::init(&[2, 4, 3], Activation::softplus(), &mut rng).unwrap();
        let icgn = ConvexGradientModel::with_defaults(one.clone().into())
            .with_offset(Some(Vector::new(vec![0.25, -1.0 / 3.0]).unwrap()))
            .unwrap();
        vec![
            Model::Hidden(one.into()),
            Model::Hidden(deep.clone().into()),
            Model::Icnn(Icnn::One(Icnn1::init(2, 25, false, &mut rng))),
            Model::Icnn(Icnn::One(Icnn1::init(2, 4, true, &mut rng))),
            Model::Icnn(Icnn::Two(Icnn2::init(2, 3, 4, true, &mut rng))),
            Model::Icgn(icgn),
            Model::Icgn(ConvexGradientModel::with_defaults(deep.into())),
        ]
    }

    #[test]
    fn roundtrip_is_exact() {
        for m in samples() {
            let text = serialize_model(&m).unwrap();
            let back = deserialize_model(&text).unwrap();
            assert_eq!(back, m);
            assert_eq!(serialize_model(&back).unwrap(), text);
        }
    }

    #[test]
    fn floats_use_17_significant_digits() {
        let m = OneLayerMap::new(
            Matrix::from_rows(&[&[0.1, 1.0 / 3.0]]).unwrap(),
            Vector::new(vec![-2.5]).unwrap(),
            Activation::identity(),
        )
        .unwrap();
        let text = serialize_model(&Model::Hidden(m.into())).unwrap();
        assert!(text.contains("1.0000000000000001e-1"), "{text}");
        assert!(text.contains("3.3333333333333331e-1"));
        assert!(text.contains("-2.5000000000000000e0"));
        let type_pos = text.find("\"type\"").unwrap();
        assert!(type_pos < text.find("\"dims\"").unwrap());
        assert!(text.find("\"A\"").unwrap() < text.find("\"b\"").unwrap());
    }

    #[test]
    fn truncated_document_is_rejected() {
        let text = serialize_model(&samples()[0]).unwrap();
        let cut = &text[..text.len() / 2];
        assert!(matches!(deserialize_model(cut), Err(Error::Parse(_))));
    }

    #[test]
    fn unknown_activation_names_the_field() {
        let text = serialize_model(&samples()[1]).unwrap().replacen("\"softplus\"", "\"relu\"", 1);
        let err = deserialize_model(&text).unwrap_err().to_string();
        assert!(err.contains("layers[0].activation") && err.contains("relu"), "{err}");
        let text = serialize_model(&samples()[0]).unwrap().replace("\"tanh\"", "\"swish\"");
        let err = deserialize_model(&text).unwrap_err().to_string();
        assert!(err.contains("`activation`") && err.contains("swish"), "{err}");
    }

    #[test]
    fn unknown_type_and_bad_dims_are_rejected() {
        let err = deserialize_model(r#"{"type": "transformer"}"#).unwrap_err().to_string();
        assert!(err.contains("transformer"), "{err}");
        let bad = r#"{"type":"one_layer","dims":[2,2],"activation":"tanh","A":[1,2,3],"b":[0,0]}"#;
        let err = deserialize_model(bad).unwrap_err().to_string();
        assert!(err.contains("`A`"), "{err}");
    }

    #[test]
    fn custom_activation_is_not_serializable() {
        let act = Activation::custom("cube", |x| x * x * x, |x| 3.0 * x * x, None);
        let m = OneLayerMap::new(Matrix::identity(1), Vector::zeros(1), act).unwrap();
        assert!(serialize_model(&Model::Hidden(m.into())).is_err());
    }
}
