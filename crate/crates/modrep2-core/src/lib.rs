//! Representations of the automorphism groups `G_lambda` of finite modules
//! `o_l1 + o_l2` over truncated local rings.

pub mod charm;
pub mod dixon;
pub mod glam;
pub mod group;
pub mod irrbuild;
pub mod orbit;
pub mod tring;
