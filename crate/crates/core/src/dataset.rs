//! The bundled mobile-phone product line and its "no polyphonic sounds, no
//! message alert" configuration.

use crate::feature_model::Configuration;
use crate::io::{parse_configuration, parse_product_line, ProductLineDocument};

pub const MOBILE_PHONE: &str = include_str!("../../../data/mobile-phone/mp.pl.json");
pub const MOBILE_PHONE_NO_POLY: &str = include_str!("../../../data/mobile-phone/mp-no-poly.conf.json");

pub fn mobile_phone() -> ProductLineDocument {
    parse_product_line(MOBILE_PHONE).expect("bundled product line parses")
}

pub fn mobile_phone_no_poly() -> Configuration {
    parse_configuration(MOBILE_PHONE_NO_POLY).expect("bundled configuration parses")
}
