//! Plain-text model persistence.
//!
//! Layout, in order: a version header, `key value` lines for the dimensions
//! and hyperparameters, then four labelled sections — `u` (K rows of N
//! space-separated values), `theta` (K rows of M), `eta` (one row of M), and
//! `v` (one row of N). Floats are written in shortest round-trip scientific
//! form, which carries every significant digit the value has (15 to 17), so
//! reloading reproduces the state bit for bit.

use super::{HyperParams, ModelError, ModelState};
use nalgebra::{DMatrix, DVector};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

const HEADER: &str = "#vip-checkpoint v1";

pub fn save_checkpoint(
    path: &Path,
    state: &ModelState,
    hyper: &HyperParams,
) -> Result<(), ModelError> {
    state.validate()?;
    hyper.validate()?;
    if state.k() != hyper.k {
        return Err(ModelError::DimensionMismatch(format!(
            "state has {} topics but hyperparameters say {}",
            state.k(),
            hyper.k
        )));
    }

    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{HEADER}")?;
    writeln!(w, "n_users {}", state.n_users())?;
    writeln!(w, "n_items {}", state.n_items())?;
    writeln!(w, "k {}", hyper.k)?;
    writeln!(w, "lambda_u {:e}", hyper.lambda_u)?;
    writeln!(w, "lambda_theta {:e}", hyper.lambda_theta)?;
    writeln!(w, "lambda_eta {:e}", hyper.lambda_eta)?;
    writeln!(w, "conf_a {:e}", hyper.conf_a)?;
    writeln!(w, "conf_b {:e}", hyper.conf_b)?;
    writeln!(w, "conf_c {:e}", hyper.conf_c)?;
    writeln!(w, "l_max {}", hyper.l_max)?;
    writeln!(w, "tol {:e}", hyper.tol)?;
    writeln!(w, "max_iters {}", hyper.max_iters)?;
    writeln!(w, "u")?;
    write_matrix(&mut w, &state.u)?;
    writeln!(w, "theta")?;
    write_matrix(&mut w, &state.theta)?;
    writeln!(w, "eta")?;
    write_row(&mut w, state.eta.iter().copied())?;
    writeln!(w, "v")?;
    write_row(&mut w, state.v.iter().copied())?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(ModelState, HyperParams), ModelError> {
    let mut r = Reader {
        lines: BufReader::new(File::open(path)?).lines(),
        line_no: 0,
    };
    let header = r.next_line()?;
    if header != HEADER {
        return Err(ModelError::Checkpoint {
            line: 1,
            message: format!("expected header {HEADER:?}, got {header:?}"),
        });
    }

    let n_users = r.kv("n_users")?.parse_int()?;
    let n_items = r.kv("n_items")?.parse_int()?;
    let k = r.kv("k")?.parse_int()?;
    let hyper = HyperParams {
        k,
        lambda_u: r.kv("lambda_u")?.parse_float()?,
        lambda_theta: r.kv("lambda_theta")?.parse_float()?,
        lambda_eta: r.kv("lambda_eta")?.parse_float()?,
        conf_a: r.kv("conf_a")?.parse_float()?,
        conf_b: r.kv("conf_b")?.parse_float()?,
        conf_c: r.kv("conf_c")?.parse_float()?,
        l_max: r.kv("l_max")?.parse_int()?,
        tol: r.kv("tol")?.parse_float()?,
        max_iters: r.kv("max_iters")?.parse_int()?,
    };
    hyper.validate()?;

    r.marker("u")?;
    let u = r.matrix(k, n_users)?;
    r.marker("theta")?;
    let theta = r.matrix(k, n_items)?;
    r.marker("eta")?;
    let eta = DVector::from_vec(r.row(n_items)?);
    r.marker("v")?;
    let v = DVector::from_vec(r.row(n_users)?);
    r.expect_eof()?;

    let state = ModelState::new(u, theta, eta, v)?;
    Ok((state, hyper))
}

fn write_matrix(w: &mut impl Write, m: &DMatrix<f64>) -> Result<(), ModelError> {
    for r in 0..m.nrows() {
        write_row(w, m.row(r).iter().copied())?;
    }
    Ok(())
}

fn write_row(w: &mut impl Write, values: impl Iterator<Item = f64>) -> Result<(), ModelError> {
    let mut first = true;
    for value in values {
        if first {
            first = false;
        } else {
            write!(w, " ")?;
        }
        write!(w, "{value:e}")?;
    }
    writeln!(w)?;
    Ok(())
}

struct Reader<B> {
    lines: std::io::Lines<B>,
    line_no: usize,
}

struct Field {
    line: usize,
    key: &'static str,
    value: String,
}

impl Field {
    fn parse_float(&self) -> Result<f64, ModelError> {
        self.value.parse().map_err(|_| ModelError::Checkpoint {
            line: self.line,
            message: format!("expected a number for {}, got {:?}", self.key, self.value),
        })
    }

    fn parse_int<T: std::str::FromStr>(&self) -> Result<T, ModelError> {
        self.value.parse().map_err(|_| ModelError::Checkpoint {
            line: self.line,
            message: format!("expected an integer for {}, got {:?}", self.key, self.value),
        })
    }
}

impl<B: BufRead> Reader<B> {
    fn next_line(&mut self) -> Result<String, ModelError> {
        self.line_no += 1;
        match self.lines.next() {
            Some(Ok(s)) => Ok(s),
            Some(Err(e)) => Err(ModelError::Io(e)),
            None => Err(ModelError::Checkpoint {
                line: self.line_no,
                message: "unexpected end of file".into(),
            }),
        }
    }

    fn kv(&mut self, key: &'static str) -> Result<Field, ModelError> {
        let line = self.next_line()?;
        let (got_key, value) = line.split_once(' ').ok_or(ModelError::Checkpoint {
            line: self.line_no,
            message: format!("expected \"{key} <value>\""),
        })?;
        if got_key != key {
            return Err(ModelError::Checkpoint {
                line: self.line_no,
                message: format!("expected key {key:?}, got {got_key:?}"),
            });
        }
        Ok(Field {
            line: self.line_no,
            key,
            value: value.to_string(),
        })
    }

    fn marker(&mut self, name: &str) -> Result<(), ModelError> {
        let line = self.next_line()?;
        if line != name {
            return Err(ModelError::Checkpoint {
                line: self.line_no,
                message: format!("expected section marker {name:?}, got {line:?}"),
            });
        }
        Ok(())
    }

    fn row(&mut self, len: usize) -> Result<Vec<f64>, ModelError> {
        let line = self.next_line()?;
        let mut out = Vec::with_capacity(len);
        for token in line.split_whitespace() {
            out.push(token.parse().map_err(|_| ModelError::Checkpoint {
                line: self.line_no,
                message: format!("expected a number, got {token:?}"),
            })?);
        }
        if out.len() != len {
            return Err(ModelError::Checkpoint {
                line: self.line_no,
                message: format!("expected {len} values, got {}", out.len()),
            });
        }
        Ok(out)
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<DMatrix<f64>, ModelError> {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            data.extend(self.row(cols)?);
        }
        Ok(DMatrix::from_row_slice(rows, cols, &data))
    }

    fn expect_eof(&mut self) -> Result<(), ModelError> {
        self.line_no += 1;
        match self.lines.next() {
            None => Ok(()),
            Some(Err(e)) => Err(ModelError::Io(e)),
            Some(Ok(extra)) => Err(ModelError::Checkpoint {
                line: self.line_no,
                message: format!("trailing content {extra:?}"),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn awkward_state() -> (ModelState, HyperParams) {
        // Entries chosen to stress the float round trip: non-terminating
        // binary fractions, subnormal-adjacent magnitudes, negatives.
        let u = DMatrix::from_column_slice(2, 3, &[1.0 / 3.0, -0.1, 2e-17, 0.7, -1e16, 0.25]);
        let theta = DMatrix::from_column_slice(2, 2, &[0.1 + 0.2, -2.0 / 7.0, 1e-300, 3.5]);
        let eta = DVector::from_vec(vec![0.062, -0.9999999999999999]);
        let v = DVector::from_vec(vec![1.0, 0.43022734204476665, 1e-12]);
        let hyper = HyperParams {
            k: 2,
            lambda_u: 0.007,
            ..HyperParams::default()
        };
        (ModelState::new(u, theta, eta, v).unwrap(), hyper)
    }

    #[test]
    fn round_trip_preserves_every_bit() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let (state, hyper) = awkward_state();
        save_checkpoint(&path, &state, &hyper).unwrap();
        let (loaded_state, loaded_hyper) = load_checkpoint(&path).unwrap();
        assert_eq!(state, loaded_state);
        assert_eq!(hyper, loaded_hyper);
    }

    #[test]
    fn layout_is_the_documented_plain_text() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let u = DMatrix::from_column_slice(1, 2, &[0.5, -0.25]);
        let theta = DMatrix::from_column_slice(1, 1, &[2.0]);
        let state = ModelState::new(
            u,
            theta,
            DVector::from_vec(vec![0.125]),
            DVector::from_vec(vec![1.0, 0.5]),
        )
        .unwrap();
        let hyper = HyperParams {
            k: 1,
            ..HyperParams::default()
        };
        save_checkpoint(&path, &state, &hyper).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "#vip-checkpoint v1");
        assert_eq!(lines[1], "n_users 2");
        assert_eq!(lines[2], "n_items 1");
        assert_eq!(lines[3], "k 1");
        // The u section holds one row of two values.
        let u_at = lines.iter().position(|&l| l == "u").unwrap();
        assert_eq!(lines[u_at + 1], "5e-1 -2.5e-1");
        assert_eq!(lines[u_at + 2], "theta");
        assert_eq!(lines[u_at + 3], "2e0");
        assert_eq!(lines[u_at + 4], "eta");
        assert_eq!(lines[u_at + 5], "1.25e-1");
        assert_eq!(lines[u_at + 6], "v");
        assert_eq!(lines[u_at + 7], "1e0 5e-1");
    }

    #[test]
    fn malformed_files_are_rejected_with_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let (state, hyper) = awkward_state();
        save_checkpoint(&path, &state, &hyper).unwrap();
        let good = std::fs::read_to_string(&path).unwrap();

        // Wrong header.
        std::fs::write(&path, good.replacen("v1", "v9", 1)).unwrap();
        match load_checkpoint(&path).unwrap_err() {
            ModelError::Checkpoint { line, .. } => assert_eq!(line, 1),
            other => panic!("unexpected error {other:?}"),
        }

        // Truncated mid-matrix.
        let cut: Vec<&str> = good.lines().take(15).collect();
        std::fs::write(&path, cut.join("\n")).unwrap();
        assert!(matches!(
            load_checkpoint(&path).unwrap_err(),
            ModelError::Checkpoint { .. }
        ));

        // A value replaced by garbage.
        std::fs::write(&path, good.replacen("lambda_u 7e-3", "lambda_u x", 1)).unwrap();
        match load_checkpoint(&path).unwrap_err() {
            ModelError::Checkpoint { line, message } => {
                assert_eq!(line, 5);
                assert!(message.contains("lambda_u"));
            }
            other => panic!("unexpected error {other:?}"),
        }

        // Row with the wrong arity.
        std::fs::write(
            &path,
            good.replace("1e0 4.3022734204476665e-1 1e-12", "1e0 4e-1"),
        )
        .unwrap();
        assert!(matches!(
            load_checkpoint(&path).unwrap_err(),
            ModelError::Checkpoint { .. }
        ));

        // Trailing garbage.
        std::fs::write(&path, format!("{good}stray\n")).unwrap();
        match load_checkpoint(&path).unwrap_err() {
            ModelError::Checkpoint { message, .. } => assert!(message.contains("trailing")),
            other => panic!("unexpected error {other:?}"),
        }

        // Missing file surfaces as an i/o error.
        assert!(matches!(
            load_checkpoint(&dir.path().join("absent.ckpt")).unwrap_err(),
            ModelError::Io(_)
        ));
    }
}
