//! Plain-text output helpers: `#`-prefixed config headers and CSV numbers
//! with 17 significant digits.

use std::fmt::{Display, LowerExp};
use std::io::{self, Write};

/// Ordered `key=value` record of a resolved run configuration.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigRecord {
    entries: Vec<(String, String)>,
}

impl ConfigRecord {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets `key`, replacing an earlier value in place.
    pub fn set(&mut self, key: impl Into<String>, value: impl Display) -> &mut Self {
        let key = key.into();
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| *k == key) {
            Some(slot) => slot.1 = value,
            None => self.entries.push((key, value)),
        }
        self
    }

    pub fn with(mut self, key: impl Into<String>, value: impl Display) -> Self {
        self.set(key, value);
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn extend(&mut self, other: &ConfigRecord) {
        for (k, v) in &other.entries {
            self.set(k.clone(), v);
        }
    }

    /// Writes one `# key=value` line per entry.
    pub fn write_header<W: Write>(&self, w: &mut W) -> io::Result<()> {
        for (k, v) in &self.entries {
            writeln!(w, "# {k}={v}")?;
        }
        Ok(())
    }
}

/// Round-trippable decimal rendering (17 significant digits).
pub fn num<T: LowerExp>(v: T) -> String {
    format!("{v:.16e}")
}

/// Writes one CSV row of numbers.
pub fn write_row<W: Write, T: LowerExp + Copy>(w: &mut W, values: &[T]) -> io::Result<()> {
    let mut first = true;
    for &v in values {
        if !first {
            w.write_all(b",")?;
        }
        first = false;
        w.write_all(num(v).as_bytes())?;
    }
    w.write_all(b"\n")
}
