//! Opening XTF sources: files, stdin and TCP endpoints.

use std::fs::File;
use std::io::{BufReader, Read};
use std::net::TcpStream;
use std::path::Path;

use anyhow::Context;
use sidescan::xtf::PacketReader;

use crate::Failure;

pub enum Source {
    File(String),
    Stdin,
    Tcp(String),
}

impl Source {
    pub fn from_args(input: Option<&str>, live: Option<&str>) -> Self {
        match (input, live) {
            (_, Some(addr)) => Source::Tcp(addr.to_string()),
            (Some("-") | None, None) => Source::Stdin,
            (Some(p), None) => Source::File(p.to_string()),
        }
    }

    /// Survey name used in output file names.
    pub fn stem(&self) -> String {
        match self {
            Source::File(p) => Path::new(p)
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("survey")
                .to_string(),
            Source::Stdin => "stdin".into(),
            Source::Tcp(_) => "live".into(),
        }
    }

    /// Name recorded in the catalog.
    pub fn label(&self) -> String {
        match self {
            Source::File(p) => p.clone(),
            Source::Stdin => "stdin".into(),
            Source::Tcp(a) => format!("tcp://{a}"),
        }
    }

    pub fn open(&self) -> Result<PacketReader<Box<dyn Read>>, Failure> {
        let inner: Box<dyn Read> = match self {
            Source::File(p) => {
                let f = File::open(p).with_context(|| format!("cannot open {p}")).map_err(Failure::Input)?;
                Box::new(BufReader::with_capacity(1 << 20, f))
            }
            Source::Stdin => Box::new(BufReader::with_capacity(1 << 20, std::io::stdin())),
            Source::Tcp(a) => {
                let s = TcpStream::connect(a)
                    .with_context(|| format!("cannot connect to {a}"))
                    .map_err(Failure::Input)?;
                Box::new(BufReader::new(s))
            }
        };
        PacketReader::new(inner)
            .with_context(|| format!("{} is not a readable XTF stream", self.label()))
            .map_err(Failure::Input)
    }
}
