use std::path::PathBuf;

use approxgroup::resid::QuotientFamily;
use approxgroup::setcalc::SetSpec;
use approxgroup::{Error, GroupCtx, GroupSpec, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const COMMANDS: &[&str] = &[
    "doubling",
    "certify",
    "decompose",
    "structure",
    "progression",
    "torsion",
    "growth",
    "verify",
];

/// Everything a run depends on. The config file uses the same keys; flags
/// given on the command line override it.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    /// Compact string, JSON object, or `@path`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub set: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_cap: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exp_cap: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certify: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verbose: Option<u8>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f; } )*
    };
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))
    }

    /// Fields set in `top` win.
    pub fn overlay(mut self, top: RunConfig) -> Self {
        overlay!(self, top; command, group, set, family, cap, rank_cap, exp_cap, r, n, c, alpha,
            certify, report, csv, out, verbose);
        self
    }

    pub fn check(&self) -> Result<&str> {
        let cmd = self
            .command
            .as_deref()
            .ok_or_else(|| Error::Malformed("no command given".into()))?;
        if !COMMANDS.contains(&cmd) {
            return Err(Error::Malformed(format!("unknown command {cmd:?}")));
        }
        for (name, v) in [("cap", self.cap), ("rank_cap", self.rank_cap), ("exp_cap", self.exp_cap), ("n", self.n)] {
            if v == Some(0) {
                return Err(Error::Malformed(format!("{name} must be positive")));
            }
        }
        if self.r == Some(0) {
            return Err(Error::Malformed("r must be positive".into()));
        }
        Ok(cmd)
    }

    pub fn group_spec(&self) -> Result<GroupSpec> {
        let v = self.group.as_ref().ok_or_else(|| Error::Malformed("--group is required".into()))?;
        let mut spec: GroupSpec = match resolve(v)? {
            Value::String(s) => GroupSpec::parse_compact(&s)?,
            other => serde_json::from_value(other).map_err(|e| Error::Malformed(format!("group: {e}")))?,
        };
        if let Some(cap) = self.cap {
            spec.cap = Some(cap);
        }
        Ok(spec)
    }

    pub fn set_spec(&self) -> Result<Option<SetSpec>> {
        let Some(v) = &self.set else { return Ok(None) };
        Ok(Some(match resolve(v)? {
            Value::String(s) => SetSpec::parse_compact(&s)?,
            other => serde_json::from_value(other).map_err(|e| Error::Malformed(format!("set: {e}")))?,
        }))
    }

    /// `identity`, `mod:LO:HI`, or the JSON family forms; the kind's default otherwise.
    pub fn family(&self, source: &GroupCtx) -> Result<QuotientFamily> {
        let Some(v) = &self.family else { return QuotientFamily::default_for(source) };
        match resolve(v)? {
            Value::String(s) if s.starts_with("mod:") => {
                let parts: Vec<&str> = s.split(':').collect();
                let num = |p: &str| p.parse::<u64>().map_err(|_| Error::Malformed(format!("bad family {s:?}")));
                match parts.as_slice() {
                    [_, lo, hi] => Ok(QuotientFamily::mod_range(source, num(lo)?, num(hi)?)),
                    _ => Err(Error::Malformed(format!("bad family {s:?}"))),
                }
            }
            other => QuotientFamily::from_json(source, &other),
        }
    }

    /// The resolved inputs, as embedded in reports: specs are expanded to
    /// JSON and output-only fields are dropped.
    pub fn embedded(&self) -> Result<Value> {
        let mut cfg = self.clone();
        cfg.group = Some(serde_json::to_value(self.group_spec()?).expect("spec serializes"));
        cfg.set = self
            .set_spec()?
            .map(|s| serde_json::to_value(s).expect("spec serializes"));
        cfg.family = match &self.family {
            Some(v) => Some(resolve(v)?),
            None => None,
        };
        cfg.cap = None;
        cfg.out = None;
        cfg.csv = None;
        cfg.verbose = None;
        Ok(serde_json::to_value(cfg).expect("config serializes"))
    }
}

/// Strings of the form `@path` are replaced by the file's contents, parsed
/// as JSON when possible.
fn resolve(v: &Value) -> Result<Value> {
    match v {
        Value::String(s) if s.starts_with('@') => {
            let text = std::fs::read_to_string(&s[1..])
                .map_err(|e| Error::Malformed(format!("{}: {e}", &s[1..])))?;
            Ok(serde_json::from_str(&text).unwrap_or_else(|_| Value::String(text.trim().to_string())))
        }
        other => Ok(other.clone()),
    }
}
