//! Convex hull and hull-derived trajectory features.

pub mod features;
pub mod hull;

pub use features::{extract_features, features_of, FeatureVector, FEATURE_COUNT};
pub use hull::{convex_hull, HullError, HullPolygon, Point};
