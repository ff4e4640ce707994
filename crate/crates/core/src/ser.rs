//! Serialization helpers: exact rationals as `"p/q"` strings, big integers
//! as decimal strings.

use num_bigint::BigUint;
use num_rational::BigRational;
use serde::Serializer;

pub fn rational_string(r: &BigRational) -> String {
    if r.denom() == &1.into() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn rational<S: Serializer>(r: &BigRational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&rational_string(r))
}

pub fn biguint<S: Serializer>(n: &BigUint, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&n.to_string())
}

pub fn biguints<S: Serializer>(ns: &[BigUint], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(ns.iter().map(|n| n.to_string()))
}
