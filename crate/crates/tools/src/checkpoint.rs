//! Plain-text model checkpoints.
//!
//! ```text
//! C2GAN-CKPT-1
//! seed <u64>
//! step <u64>
//! dims <d1> <d2> <K>
//! layout gen1=[noise1,view2] gen2=[noise2,view1] disc=[view1,view2]
//! net gen1 <in> <hidden> <out> linear
//! weights_in <row-major values>
//! bias_in <values>
//! weights_out <row-major values>
//! bias_out <values>
//! net gen2 ...
//! net disc ... softmax
//! end
//! ```
//!
//! Values are written with the shortest round-tripping decimal form, so a
//! reload reproduces every parameter bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use mvgan_core::{Mlp, OutputKind, TripartiteModel};

use crate::error::{Error, Result};

pub const MAGIC: &str = "C2GAN-CKPT-1";
pub const LAYOUT: &str = "layout gen1=[noise1,view2] gen2=[noise2,view1] disc=[view1,view2]";

const NETS: [&str; 3] = ["gen1", "gen2", "disc"];
const BLOCKS: [&str; 4] = ["weights_in", "bias_in", "weights_out", "bias_out"];

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub seed: u64,
    pub step: u64,
    pub model: TripartiteModel,
}

fn kind_name(kind: OutputKind) -> &'static str {
    match kind {
        OutputKind::Linear => "linear",
        OutputKind::Softmax => "softmax",
    }
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let m = &self.model;
        let mut out = format!(
            "{MAGIC}\nseed {}\nstep {}\ndims {} {} {}\n{LAYOUT}\n",
            self.seed,
            self.step,
            m.d1(),
            m.d2(),
            m.num_classes()
        );
        for (name, net) in NETS.iter().zip([&m.gen1, &m.gen2, &m.disc]) {
            let _ = writeln!(
                out,
                "net {name} {} {} {} {}",
                net.input_dim(),
                net.hidden_dim(),
                net.output_dim(),
                kind_name(net.output_kind())
            );
            for (block, values) in BLOCKS.iter().zip(net.param_blocks()) {
                out.push_str(block);
                for v in values {
                    let _ = write!(out, " {v}");
                }
                out.push('\n');
            }
        }
        out.push_str("end\n");
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = Lines::new(text);

        let (n, magic) = lines.next_line()?;
        if magic != MAGIC {
            return Err(Error::parse(n, format!("expected `{MAGIC}`, got `{magic}`")));
        }
        let seed = lines.keyed_ints::<u64>("seed", 1)?[0];
        let step = lines.keyed_ints::<u64>("step", 1)?[0];
        let dims = lines.keyed_ints::<usize>("dims", 3)?;
        let (n, layout) = lines.next_line()?;
        if layout != LAYOUT {
            return Err(Error::parse(n, "unsupported input layout"));
        }

        let mut nets = Vec::with_capacity(3);
        for expected in NETS {
            nets.push(lines.net(expected)?);
        }
        let (n, tail) = lines.next_line()?;
        if tail != "end" {
            return Err(Error::parse(n, "expected `end`"));
        }
        let disc = nets.pop().expect("three nets");
        let gen2 = nets.pop().expect("three nets");
        let gen1 = nets.pop().expect("three nets");
        let model = TripartiteModel::from_networks(dims[0], dims[1], dims[2], gen1, gen2, disc)?;
        Ok(Self { seed, step, model })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(Error::io(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path).map_err(Error::io(path))?)
    }
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate(),
            last: 0,
        }
    }

    fn next_line(&mut self) -> Result<(usize, &'a str)> {
        for (i, l) in self.inner.by_ref() {
            self.last = i + 1;
            let l = l.trim();
            if !l.is_empty() {
                return Ok((i + 1, l));
            }
        }
        Err(Error::parse(self.last + 1, "unexpected end of checkpoint"))
    }

    fn keyed(&mut self, key: &str) -> Result<(usize, Vec<&'a str>)> {
        let (n, l) = self.next_line()?;
        let mut parts = l.split_whitespace();
        if parts.next() != Some(key) {
            return Err(Error::parse(n, format!("expected `{key}`")));
        }
        Ok((n, parts.collect()))
    }

    fn keyed_ints<T: std::str::FromStr>(&mut self, key: &str, count: usize) -> Result<Vec<T>> {
        let (n, parts) = self.keyed(key)?;
        if parts.len() != count {
            return Err(Error::parse(n, format!("`{key}` takes {count} value(s)")));
        }
        parts
            .iter()
            .map(|p| p.parse().map_err(|_| Error::parse(n, format!("bad integer `{p}`"))))
            .collect()
    }

    fn net(&mut self, name: &str) -> Result<Mlp> {
        let (n, parts) = self.keyed("net")?;
        let [got, din, hid, dout, kind] = parts[..] else {
            return Err(Error::parse(n, "`net` takes name, three dimensions and a kind"));
        };
        if got != name {
            return Err(Error::parse(n, format!("expected network `{name}`, got `{got}`")));
        }
        let dim = |s: &str| s.parse::<usize>().map_err(|_| Error::parse(n, format!("bad dimension `{s}`")));
        let (din, hid, dout) = (dim(din)?, dim(hid)?, dim(dout)?);
        let kind = match kind {
            "linear" => OutputKind::Linear,
            "softmax" => OutputKind::Softmax,
            other => return Err(Error::parse(n, format!("unknown output kind `{other}`"))),
        };
        let mut blocks = Vec::with_capacity(4);
        for block in BLOCKS {
            let (n, parts) = self.keyed(block)?;
            let values = parts
                .iter()
                .map(|p| p.parse::<f64>().map_err(|_| Error::parse(n, format!("bad value `{p}`"))))
                .collect::<Result<Vec<f64>>>()?;
            blocks.push(values);
        }
        let [wi, bi, wo, bo]: [Vec<f64>; 4] = blocks.try_into().expect("four blocks");
        Ok(Mlp::from_parts(din, hid, dout, kind, wi, bi, wo, bo)?)
    }
}
