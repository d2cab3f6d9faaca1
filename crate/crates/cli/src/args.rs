use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;

/// `WIDTHxHEIGHT`
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Resolution {
    pub width: usize,
    pub height: usize,
}

impl FromStr for Resolution {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected WIDTHxHEIGHT, got `{s}`"))?;
        let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("bad dimension `{v}`: {e}"));
        Ok(Resolution { width: parse(w)?, height: parse(h)? })
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

/// `30` or `30000/1001`
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FrameRate {
    pub num: u32,
    pub den: u32,
}

impl FromStr for FrameRate {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (num, den) = s.split_once('/').unwrap_or((s, "1"));
        let parse = |v: &str| v.trim().parse::<u32>().map_err(|e| format!("bad frame rate `{s}`: {e}"));
        let rate = FrameRate { num: parse(num)?, den: parse(den)? };
        if rate.num == 0 || rate.den == 0 {
            return Err(format!("frame rate `{s}` must be positive"));
        }
        Ok(rate)
    }
}

impl fmt::Display for FrameRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// `sim` or `log:<path>`
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EncoderSpec {
    Sim,
    Log(PathBuf),
}

impl FromStr for EncoderSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            None if s == "sim" => Ok(EncoderSpec::Sim),
            Some(("log", path)) if !path.is_empty() => Ok(EncoderSpec::Log(PathBuf::from(path))),
            _ => Err(format!("unknown encoder backend `{s}` (expected `sim` or `log:<path>`)")),
        }
    }
}

impl fmt::Display for EncoderSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EncoderSpec::Sim => f.write_str("sim"),
            EncoderSpec::Log(p) => write!(f, "log:{}", p.display()),
        }
    }
}
