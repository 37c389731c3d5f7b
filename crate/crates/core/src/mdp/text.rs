//! Plain-text MDP serialization.
//!
//! ```text
//! # comment lines and blank lines are ignored
//! S A gamma
//! <S rows of A rewards>
//! <S·A rows of S transition probabilities, pair (s, a) at row s·A + a>
//! <1 row of S initial probabilities>
//! <1 row of S terminal flags, 0 or 1>
//! ```
//!
//! Numbers are written with 17 significant digits so a write/read cycle is exact.

use std::fmt::Write as _;

use super::TabularMdp;
use crate::{Error, Result};

/// Refuse headers that would make the dense tensor absurdly large.
const MAX_ENTRIES: usize = 1 << 26;

pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_mdp(mdp: &TabularMdp) -> String {
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let mut out = String::new();
    let _ = writeln!(out, "{ns} {na} {}", format_f64(mdp.discount()));
    let row = |vals: &[f64]| vals.iter().map(|v| format_f64(*v)).collect::<Vec<_>>().join(" ");
    for s in 0..ns {
        let _ = writeln!(out, "{}", row(&mdp.reward()[s * na..(s + 1) * na]));
    }
    for s in 0..ns {
        for a in 0..na {
            let _ = writeln!(out, "{}", row(mdp.transition_row(s, a)));
        }
    }
    let _ = writeln!(out, "{}", row(mdp.initial_dist()));
    let flags: Vec<&str> = mdp.terminal().iter().map(|t| if *t { "1" } else { "0" }).collect();
    let _ = writeln!(out, "{}", flags.join(" "));
    out
}

pub fn parse_mdp(text: &str) -> Result<TabularMdp> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (line, header) = lines.next().ok_or_else(|| Error::parse(1, "missing header"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(Error::parse(line, "header must be `S A gamma`"));
    }
    let ns: usize = fields[0].parse().map_err(|_| Error::parse(line, "bad state count"))?;
    let na: usize = fields[1].parse().map_err(|_| Error::parse(line, "bad action count"))?;
    let gamma: f64 = fields[2].parse().map_err(|_| Error::parse(line, "bad discount"))?;
    if ns == 0 || na == 0 {
        return Err(Error::parse(line, "state and action counts must be positive"));
    }
    if ns.checked_mul(na).and_then(|sa| sa.checked_mul(ns)).is_none_or(|n| n > MAX_ENTRIES) {
        return Err(Error::parse(line, "MDP too large"));
    }

    let mut read_row = |expected: usize, what: &str| -> Result<(usize, Vec<f64>)> {
        let (line, text) = lines
            .next()
            .ok_or_else(|| Error::parse(0, format!("unexpected end of input reading {what}")))?;
        let vals = text
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| Error::parse(line, format!("bad number `{t}` in {what}"))))
            .collect::<Result<Vec<_>>>()?;
        if vals.len() != expected {
            return Err(Error::parse(line, format!("{what} row has {} values, expected {expected}", vals.len())));
        }
        Ok((line, vals))
    };

    let mut reward = Vec::with_capacity(ns * na);
    for _ in 0..ns {
        reward.extend(read_row(na, "reward")?.1);
    }
    let mut transition = Vec::with_capacity(ns * na * ns);
    for _ in 0..ns * na {
        transition.extend(read_row(ns, "transition")?.1);
    }
    let (_, initial) = read_row(ns, "initial distribution")?;
    let (flag_line, flags) = read_row(ns, "terminal flags")?;
    let terminal = flags
        .iter()
        .map(|f| match *f {
            0.0 => Ok(false),
            1.0 => Ok(true),
            _ => Err(Error::parse(flag_line, "terminal flags must be 0 or 1")),
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some((line, _)) = lines.next() {
        return Err(Error::parse(line, "trailing content after terminal flags"));
    }
    TabularMdp::new(ns, na, transition, reward, gamma, initial, terminal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::random::random_mdp;
    use proptest::prelude::*;

    #[test]
    fn rejects_malformed_input() {
        assert!(matches!(parse_mdp(""), Err(Error::Parse { .. })));
        assert!(matches!(parse_mdp("1 1"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_mdp("1 1 0.9\n1\n1\n1\n2\n"), Err(Error::Parse { line: 5, .. })));
        // valid syntax, invalid MDP (row does not sum to one)
        assert!(matches!(parse_mdp("1 1 0.9\n0\n0.5\n1\n0\n"), Err(Error::InvalidMdp(_))));
        assert!(matches!(parse_mdp("1 1 0.9\n0\n1\n1\n0\nextra\n"), Err(Error::Parse { line: 6, .. })));
    }

    #[test]
    fn comments_and_blank_lines() {
        let mdp = parse_mdp("# tiny\n\n1 1 0.5\n# reward\n1\n1\n1\n0\n").unwrap();
        assert_eq!(mdp.reward(), &[1.0]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn round_trip_is_exact(seed in any::<u64>(), ns in 1usize..8, na in 1usize..4, gamma in 0.01f64..0.999) {
            let mut rng = crate::rng::stream(seed, crate::rng::Stream::Layout);
            let mdp = random_mdp(ns, na, gamma, &mut rng);
            let back = parse_mdp(&write_mdp(&mdp)).unwrap();
            prop_assert_eq!(back, mdp);
        }
    }
}
