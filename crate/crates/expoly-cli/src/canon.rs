//! Canonical output formatting: every number is rendered the same way on
//! every platform, documents are minified with byte-sorted keys, so repeated
//! runs are byte-identical and goldens stay diff-able.

use std::collections::BTreeMap;

/// Shortest round-trip decimal, zero-padded to exactly 17 significant
/// digits. Values outside [1e-4, 1e17) in magnitude use scientific notation
/// with the same 17-digit significand.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        return "0.0000000000000000".into();
    }
    let (sign, mag) = if x < 0.0 { ("-", -x) } else { ("", x) };
    if (1e-4..1e17).contains(&mag) {
        let mut s = format!("{mag}");
        // leading zeros (as in 0.0001) are not significant
        let sig = s
            .chars()
            .filter(|c| c.is_ascii_digit())
            .skip_while(|&c| c == '0')
            .count();
        let pad = 17usize.saturating_sub(sig);
        if pad > 0 {
            if !s.contains('.') {
                s.push('.');
            }
            s.extend(std::iter::repeat_n('0', pad));
        }
        format!("{sign}{s}")
    } else {
        let s = format!("{mag:e}");
        let (mant, exp) = s.split_once('e').expect("exponent form");
        let mut mant = mant.to_string();
        if !mant.contains('.') {
            mant.push('.');
        }
        let sig = mant.chars().filter(|c| c.is_ascii_digit()).count();
        mant.extend(std::iter::repeat_n('0', 17usize.saturating_sub(sig)));
        format!("{sign}{mant}e{exp}")
    }
}

/// Document tree for the structured outputs.
pub enum Val {
    Null,
    Bool(bool),
    Int(usize),
    Num(f64),
    List(Vec<Val>),
    Map(BTreeMap<&'static str, Val>),
}

impl Val {
    pub fn nums(xs: &[f64]) -> Val {
        Val::List(xs.iter().map(|&x| Val::Num(x)).collect())
    }

    pub fn rows(xs: &[Vec<f64>]) -> Val {
        Val::List(xs.iter().map(|r| Val::nums(r)).collect())
    }

    /// Non-finite endpoints (unbounded intervals) serialize as null.
    pub fn num_or_null(x: f64) -> Val {
        if x.is_finite() {
            Val::Num(x)
        } else {
            Val::Null
        }
    }
}

pub fn render(v: &Val) -> String {
    let mut out = String::new();
    write_val(v, &mut out);
    out
}

fn write_val(v: &Val, out: &mut String) {
    match v {
        Val::Null => out.push_str("null"),
        Val::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Val::Int(i) => out.push_str(&i.to_string()),
        Val::Num(x) => out.push_str(&fmt_f64(*x)),
        Val::List(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_val(item, out);
            }
            out.push(']');
        }
        Val::Map(map) => {
            out.push('{');
            for (i, (k, item)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('"');
                out.push_str(k);
                out.push_str("\":");
                write_val(item, out);
            }
            out.push('}');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pads_shortest_representation_to_seventeen_digits() {
        assert_eq!(fmt_f64(1.0 / 2f64.ln() - 1.0), "0.44269504088896340");
        assert_eq!(fmt_f64(2.0 - 1.0 / 2f64.ln()), "0.55730495911103660");
        assert_eq!(fmt_f64(1.0), "1.0000000000000000");
        assert_eq!(fmt_f64(0.0), "0.0000000000000000");
        assert_eq!(fmt_f64(-0.0), "0.0000000000000000");
        assert_eq!(fmt_f64(-2.5), "-2.5000000000000000");
        assert_eq!(fmt_f64(320.0), "320.00000000000000");
        assert_eq!(fmt_f64(0.15273230608635846), "0.15273230608635846");
        assert_eq!(fmt_f64(1e-14), "1.0000000000000000e-14");
        assert_eq!(fmt_f64(-3.25e19), "-3.2500000000000000e19");
        assert_eq!(fmt_f64(0.0001), "0.00010000000000000000");
    }

    #[test]
    fn documents_are_minified_and_key_sorted() {
        let mut m = BTreeMap::new();
        m.insert("b", Val::Int(2));
        m.insert("a", Val::nums(&[0.5]));
        m.insert("A", Val::Bool(true));
        assert_eq!(
            render(&Val::Map(m)),
            r#"{"A":true,"a":[0.50000000000000000],"b":2}"#
        );
    }
}
