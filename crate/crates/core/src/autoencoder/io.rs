//! Line-oriented text model files.
//!
//! ```text
//! GDRAE1
//! M=8
//! n=7
//! m=1
//! trained_ebn0_db=0
//! seed=1
//! strict_power=false
//! bn_momentum=9.9000000000000000e-1
//! bn_epsilon=1.0000000000000000e-3
//! tensor tx_dense1.weights 8 8 trainable
//! <8 lines of 8 numbers>
//! ...
//! tensor norm.running_var 1 7 non-trainable
//! <1 line of 7 numbers>
//! end
//! ```
//!
//! Numbers are written with 17 significant digits, which reproduces every
//! `f64` exactly on reload.

use std::path::Path;

use super::{Autoencoder, ModelMeta};
use crate::error::{Error, Result};
use crate::nn::{Activation, BatchNormLayer, DenseLayer, Matrix};
use crate::report::write_atomic;

pub const MAGIC: &str = "GDRAE1";

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn push_tensor(
    out: &mut String,
    name: &str,
    rows: usize,
    cols: usize,
    data: &[f64],
    trainable: bool,
) {
    let kind = if trainable {
        "trainable"
    } else {
        "non-trainable"
    };
    out.push_str(&format!("tensor {name} {rows} {cols} {kind}\n"));
    for row in data.chunks(cols.max(1)) {
        let line: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
}

/// Serializes a model to the text format.
pub fn render_model(model: &Autoencoder) -> String {
    let meta = &model.meta;
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    out.push_str(&format!("M={}\n", meta.vector_size));
    out.push_str(&format!("n={}\n", meta.channel_uses));
    out.push_str(&format!("m={}\n", meta.order));
    out.push_str(&format!("trained_ebn0_db={}\n", meta.trained_ebn0_db));
    out.push_str(&format!("seed={}\n", meta.seed));
    out.push_str(&format!("strict_power={}\n", model.strict_power));
    out.push_str(&format!("bn_momentum={}\n", fmt_f64(model.norm.momentum)));
    out.push_str(&format!("bn_epsilon={}\n", fmt_f64(model.norm.epsilon)));
    let dense = |out: &mut String, name: &str, l: &DenseLayer| {
        push_tensor(
            out,
            &format!("{name}.weights"),
            l.outputs(),
            l.inputs(),
            l.weights.as_slice(),
            true,
        );
        push_tensor(out, &format!("{name}.bias"), 1, l.outputs(), &l.bias, true);
    };
    dense(&mut out, "tx_dense1", &model.tx_dense1);
    dense(&mut out, "tx_dense2", &model.tx_dense2);
    let n = model.norm.features();
    push_tensor(&mut out, "norm.gamma", 1, n, &model.norm.gamma, true);
    push_tensor(&mut out, "norm.beta", 1, n, &model.norm.beta, true);
    push_tensor(
        &mut out,
        "norm.running_mean",
        1,
        n,
        &model.norm.running_mean,
        false,
    );
    push_tensor(
        &mut out,
        "norm.running_var",
        1,
        n,
        &model.norm.running_var,
        false,
    );
    dense(&mut out, "rx_dense", &model.rx_dense);
    dense(&mut out, "rx_out", &model.rx_out);
    out.push_str("end\n");
    out
}

/// Writes the model through a temporary file so a failed write never leaves
/// a partial model at `path`.
pub fn save_model(model: &Autoencoder, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), render_model(model).as_bytes())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Autoencoder> {
    parse_model(&std::fs::read_to_string(path)?)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self, expecting: &str) -> Result<(usize, &'a str)> {
        match self.inner.next() {
            Some((i, line)) => {
                self.last = i + 1;
                Ok((i + 1, line.trim_end()))
            }
            None => Err(Error::Parse {
                line: self.last + 1,
                message: format!("unexpected end of file, expected {expecting}"),
            }),
        }
    }

    fn header<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let (line, text) = self.next(&format!("`{key}=`"))?;
        let value = text
            .strip_prefix(key)
            .and_then(|rest| rest.strip_prefix('='))
            .ok_or_else(|| Error::Parse {
                line,
                message: format!("expected `{key}=<value>`, found `{text}`"),
            })?;
        value.trim().parse().map_err(|_| Error::Parse {
            line,
            message: format!("cannot parse `{value}` for `{key}`"),
        })
    }

    fn tensor(
        &mut self,
        name: &str,
        rows: usize,
        cols: usize,
        trainable: bool,
    ) -> Result<Vec<f64>> {
        let (line, text) = self.next(&format!("tensor `{name}`"))?;
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() != 5 || fields[0] != "tensor" {
            return Err(Error::Parse {
                line,
                message: format!("expected `tensor {name} <rows> <cols> <kind>`, found `{text}`"),
            });
        }
        if fields[1] != name {
            return Err(Error::Format {
                layer: name.to_string(),
                message: format!("line {line}: found tensor `{}` instead", fields[1]),
            });
        }
        let parse_dim = |s: &str| {
            s.parse::<usize>().map_err(|_| Error::Parse {
                line,
                message: format!("bad dimension `{s}`"),
            })
        };
        let (r, c) = (parse_dim(fields[2])?, parse_dim(fields[3])?);
        if (r, c) != (rows, cols) {
            return Err(Error::Format {
                layer: name.to_string(),
                message: format!("shape {r}x{c} does not match header, expected {rows}x{cols}"),
            });
        }
        let kind = if trainable {
            "trainable"
        } else {
            "non-trainable"
        };
        if fields[4] != kind {
            return Err(Error::Format {
                layer: name.to_string(),
                message: format!("marked `{}`, expected `{kind}`", fields[4]),
            });
        }
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (line, text) = self.next(&format!("a row of `{name}`"))?;
            let before = data.len();
            for tok in text.split_whitespace() {
                let v: f64 = tok.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("`{tok}` is not a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        line,
                        message: format!("non-finite value `{tok}`"),
                    });
                }
                data.push(v);
            }
            if data.len() - before != cols {
                return Err(Error::Format {
                    layer: name.to_string(),
                    message: format!(
                        "line {line} has {} values, expected {cols}",
                        data.len() - before
                    ),
                });
            }
        }
        Ok(data)
    }

    fn dense(
        &mut self,
        name: &str,
        inputs: usize,
        outputs: usize,
        activation: Activation,
    ) -> Result<DenseLayer> {
        let weights = self.tensor(&format!("{name}.weights"), outputs, inputs, true)?;
        let bias = self.tensor(&format!("{name}.bias"), 1, outputs, true)?;
        DenseLayer::new(
            Matrix::from_vec(outputs, inputs, weights)?,
            bias,
            activation,
        )
    }
}

/// Parses a complete model. Nothing is returned unless the whole file
/// validates.
pub fn parse_model(text: &str) -> Result<Autoencoder> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last: 0,
    };
    let (line, magic) = lines.next("magic")?;
    if magic != MAGIC {
        return Err(Error::Parse {
            line,
            message: format!("expected magic `{MAGIC}`, found `{magic}`"),
        });
    }
    let vector_size: usize = lines.header("M")?;
    let channel_uses: usize = lines.header("n")?;
    let order: usize = lines.header("m")?;
    let trained_ebn0_db: f64 = lines.header("trained_ebn0_db")?;
    let seed: u64 = lines.header("seed")?;
    let strict_power: bool = lines.header("strict_power")?;
    let momentum: f64 = lines.header("bn_momentum")?;
    let epsilon: f64 = lines.header("bn_epsilon")?;
    if vector_size < 2 || channel_uses < 1 {
        return Err(Error::Format {
            layer: "header".into(),
            message: format!("invalid dimensions M={vector_size}, n={channel_uses}"),
        });
    }
    let (m, n) = (vector_size, channel_uses);

    let tx_dense1 = lines.dense("tx_dense1", m, m, Activation::Relu)?;
    let tx_dense2 = lines.dense("tx_dense2", m, n, Activation::Identity)?;
    let mut norm = BatchNormLayer::with_constants(n, momentum, epsilon);
    norm.gamma = lines.tensor("norm.gamma", 1, n, true)?;
    norm.beta = lines.tensor("norm.beta", 1, n, true)?;
    norm.running_mean = lines.tensor("norm.running_mean", 1, n, false)?;
    norm.running_var = lines.tensor("norm.running_var", 1, n, false)?;
    let rx_dense = lines.dense("rx_dense", n, m, Activation::Relu)?;
    let rx_out = lines.dense("rx_out", m, m, Activation::Softmax)?;
    let (line, end) = lines.next("`end`")?;
    if end != "end" {
        return Err(Error::Parse {
            line,
            message: format!("expected `end`, found `{end}`"),
        });
    }

    Ok(Autoencoder {
        tx_dense1,
        tx_dense2,
        norm,
        rx_dense,
        rx_out,
        strict_power,
        meta: ModelMeta {
            vector_size,
            channel_uses,
            order,
            trained_ebn0_db,
            seed,
        },
    })
}
