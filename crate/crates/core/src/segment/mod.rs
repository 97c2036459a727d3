//! Mean shift segmentation of the feature image and region boundary
//! extraction.

mod contour;
mod label;
mod mean_shift;

pub use contour::{extract_boundaries, Contour};
pub use label::{label_segments, RegionStats, SegmentMap};
pub use mean_shift::{mean_shift_filter, seek_mode, MeanShiftParams};

use serde::{Deserialize, Serialize};

use crate::imgcore::{render_labels, FeatureImage, RgbImage};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SegmentParams {
    #[serde(rename = "h_s")]
    pub spatial_bandwidth: f64,
    #[serde(rename = "h_r")]
    pub range_bandwidth: f64,
    pub max_iter: usize,
    pub eps: f64,
    pub min_region_size: usize,
}

impl Default for SegmentParams {
    fn default() -> Self {
        let ms = MeanShiftParams::default();
        Self {
            spatial_bandwidth: ms.spatial_bandwidth,
            range_bandwidth: ms.range_bandwidth,
            max_iter: ms.max_iter,
            eps: ms.eps,
            min_region_size: 64,
        }
    }
}

impl SegmentParams {
    pub fn mean_shift(&self) -> MeanShiftParams {
        MeanShiftParams {
            spatial_bandwidth: self.spatial_bandwidth,
            range_bandwidth: self.range_bandwidth,
            max_iter: self.max_iter,
            eps: self.eps,
        }
    }
}

/// Filter then label.
pub fn segment(features: &FeatureImage, params: &SegmentParams) -> SegmentMap {
    let filtered = mean_shift_filter(features, &params.mean_shift());
    label_segments(&filtered, params.range_bandwidth, params.min_region_size)
}

/// Debug rendering of a label map.
pub fn label_image(map: &SegmentMap) -> RgbImage {
    render_labels(&map.labels, map.width, map.height)
}
