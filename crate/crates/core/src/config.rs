//! Line-oriented `key=value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Every key must be
//! consumed by the caller; leftovers are reported as unknown.

use std::str::FromStr;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {0}: expected key=value")]
    Syntax(usize),
    #[error("line {line}: duplicate key {key}")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: invalid value {value:?} for {key}")]
    Value {
        line: usize,
        key: String,
        value: String,
    },
    #[error("unknown key {key} (line {line})")]
    UnknownKey { line: usize, key: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    entries: Vec<(usize, String, String)>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries: Vec<(usize, String, String)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax(i + 1))?;
            let key = k.trim().to_string();
            if key.is_empty() {
                return Err(ConfigError::Syntax(i + 1));
            }
            if entries.iter().any(|e| e.1 == key) {
                return Err(ConfigError::Duplicate { line: i + 1, key });
            }
            entries.push((i + 1, key, v.trim().to_string()));
        }
        Ok(Self { entries })
    }

    /// Removes `key` and parses its value.
    pub fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, ConfigError> {
        let Some(pos) = self.entries.iter().position(|e| e.1 == key) else {
            return Ok(None);
        };
        let (line, key, value) = self.entries.remove(pos);
        value
            .parse()
            .map(Some)
            .map_err(|_| ConfigError::Value { line, key, value })
    }

    /// Removes `key` and parses its comma separated items.
    pub fn take_list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>, ConfigError> {
        let Some(pos) = self.entries.iter().position(|e| e.1 == key) else {
            return Ok(None);
        };
        let (line, key, value) = self.entries.remove(pos);
        value
            .split(',')
            .map(|t| t.trim().parse())
            .collect::<Result<Vec<T>, _>>()
            .map(Some)
            .map_err(|_| ConfigError::Value { line, key, value })
    }

    /// Like [`take`](Self::take) but writes into `slot` when present.
    pub fn set<T: FromStr>(&mut self, key: &str, slot: &mut T) -> Result<(), ConfigError> {
        if let Some(v) = self.take(key)? {
            *slot = v;
        }
        Ok(())
    }

    /// Fails on the first key nobody consumed.
    pub fn finish(self) -> Result<(), ConfigError> {
        match self.entries.into_iter().next() {
            Some((line, key, _)) => Err(ConfigError::UnknownKey { line, key }),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_take_finish() {
        let mut kv =
            KeyValues::parse("# comment\nbatch_size = 32\n\nlearning_rate=0.001\n").unwrap();
        let mut lr = 0.0f64;
        kv.set("learning_rate", &mut lr).unwrap();
        assert_eq!(lr, 0.001);
        assert_eq!(kv.take::<usize>("batch_size").unwrap(), Some(32));
        assert_eq!(kv.take::<usize>("epochs").unwrap(), None);
        kv.finish().unwrap();
    }

    #[test]
    fn errors() {
        assert_eq!(
            KeyValues::parse("novalue").unwrap_err(),
            ConfigError::Syntax(1)
        );
        assert!(matches!(
            KeyValues::parse("a=1\na=2").unwrap_err(),
            ConfigError::Duplicate { line: 2, .. }
        ));
        let mut kv = KeyValues::parse("epochs=ten\nbogus=1").unwrap();
        assert!(matches!(
            kv.take::<usize>("epochs"),
            Err(ConfigError::Value { line: 1, .. })
        ));
        assert_eq!(
            kv.finish().unwrap_err(),
            ConfigError::UnknownKey {
                line: 2,
                key: "bogus".into()
            }
        );
        let mut kv = KeyValues::parse("ids = 6, 7\nbad=1,x").unwrap();
        assert_eq!(kv.take_list::<u16>("ids").unwrap(), Some(vec![6, 7]));
        assert!(matches!(
            kv.take_list::<u16>("bad"),
            Err(ConfigError::Value { line: 2, .. })
        ));
    }
}
