use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::Failure;

/// Reals in CSV output: 17 significant digits, no locale.
pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn optional_real(x: Option<f64>) -> String {
    x.map(real).unwrap_or_default()
}

pub fn sink(out: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(File::create(path).map_err(|e| {
            Failure::Runtime(format!("cannot create {}: {e}", path.display()))
        })?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub struct Csv {
    w: Box<dyn Write>,
}

impl Csv {
    pub fn new(out: Option<&Path>, header: &[&str]) -> Result<Self, Failure> {
        let mut w = sink(out)?;
        writeln!(w, "{}", header.join(","))?;
        Ok(Self { w })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<(), Failure> {
        writeln!(self.w, "{}", fields.join(","))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), Failure> {
        self.w.flush()?;
        Ok(())
    }
}

pub fn json<T: Serialize + ?Sized>(out: Option<&Path>, value: &T) -> Result<(), Failure> {
    let mut w = sink(out)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Failure::Runtime(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn text(out: Option<&Path>, body: &str) -> Result<(), Failure> {
    let mut w = sink(out)?;
    writeln!(w, "{body}")?;
    w.flush()?;
    Ok(())
}
