//! Deterministic float encoding for JSON: 12 significant digits, with the
//! non-finite values written as the strings "inf", "-inf" and "nan".

use serde::de::{self, Deserializer, Visitor};
use serde::ser::{SerializeSeq, Serializer};
use std::fmt;

pub fn round12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    if x.is_nan() {
        s.serialize_str("nan")
    } else if x.is_infinite() {
        s.serialize_str(if *x > 0.0 { "inf" } else { "-inf" })
    } else {
        s.serialize_f64(round12(*x))
    }
}

struct F64Visitor;

impl<'de> Visitor<'de> for F64Visitor {
    type Value = f64;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a number or one of \"inf\", \"-inf\", \"nan\"")
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
        Ok(v)
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
        Ok(v as f64)
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
        Ok(v as f64)
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
        match v {
            "inf" | "+inf" => Ok(f64::INFINITY),
            "-inf" => Ok(f64::NEG_INFINITY),
            "nan" => Ok(f64::NAN),
            _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
        }
    }
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    d.deserialize_any(F64Visitor)
}

/// Same encoding for `Vec<f64>`.
pub mod vec {
    use super::*;

    pub fn serialize<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
        struct W(f64);
        impl serde::Serialize for W {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                super::serialize(&self.0, s)
            }
        }
        let mut seq = s.serialize_seq(Some(xs.len()))?;
        for x in xs {
            seq.serialize_element(&W(*x))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        #[derive(serde::Deserialize)]
        struct W(#[serde(deserialize_with = "super::deserialize")] f64);
        let v: Vec<W> = serde::Deserialize::deserialize(d)?;
        Ok(v.into_iter().map(|w| w.0).collect())
    }
}

/// `Vec<Complex64>` as a list of `[re, im]` pairs.
pub mod cvec {
    use super::*;
    use num_complex::Complex64;

    pub fn serialize<S: Serializer>(xs: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = xs.iter().map(|z| [z.re, z.im]).collect();
        let mut seq = s.serialize_seq(Some(pairs.len()))?;
        for p in &pairs {
            seq.serialize_element(&P(p))?;
        }
        seq.end()
    }

    struct P<'a>(&'a [f64; 2]);

    impl serde::Serialize for P<'_> {
        fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
            super::vec::serialize(self.0, s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
        #[derive(serde::Deserialize)]
        struct W(#[serde(with = "super::vec")] Vec<f64>);
        let v: Vec<W> = serde::Deserialize::deserialize(d)?;
        v.into_iter()
            .map(|w| match w.0.as_slice() {
                [re, im] => Ok(Complex64::new(*re, *im)),
                _ => Err(de::Error::custom("complex values are [re, im] pairs")),
            })
            .collect()
    }
}

/// `Complex64` as `{"re": .., "im": ..}`.
pub mod complex {
    use super::*;
    use num_complex::Complex64;

    #[derive(serde::Serialize, serde::Deserialize)]
    struct C {
        #[serde(with = "super")]
        re: f64,
        #[serde(with = "super")]
        im: f64,
    }

    pub fn serialize<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        serde::Serialize::serialize(&C { re: z.re, im: z.im }, s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        let c: C = serde::Deserialize::deserialize(d)?;
        Ok(Complex64::new(c.re, c.im))
    }
}


/// Same encoding for `Option<f64>`, with `None` as `null`.
pub mod opt {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match x {
            Some(v) => super::serialize(v, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        #[derive(Deserialize)]
        struct W(#[serde(with = "super")] f64);
        Ok(Option::<W>::deserialize(d)?.map(|w| w.0))
    }
}
