//! Region features, attribute detections and the attribute-extended
//! detection loss.

mod detections;
mod io;
mod loss;
mod synth;

pub use detections::{filter_detections, read_detections, write_detections, AttributeRecord, DetectionRecord, FilterConfig, RegionRecord};
pub use io::{read_features, write_features, FeatureEntry};
pub use loss::{
    class_balanced_weights, detection_loss, smooth_l1, AnchorPrediction, AnchorTarget, AttributeLoss, DetectionLoss, LossConfig,
    PROB_EPS,
};
pub use synth::{SceneGenerator, SceneSpec};

/// One detected region.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub feature: Vec<f32>,
    pub bbox: [f32; 4],
    pub category_id: u32,
    pub confidence: f64,
    /// `(attribute_id, score)`, the attribute subset of this region.
    pub attributes: Vec<(u32, f64)>,
}

impl Region {
    pub fn attribute_ids(&self) -> Vec<u32> {
        self.attributes.iter().map(|a| a.0).collect()
    }
}

/// All regions of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionFeatureSet {
    pub image_id: String,
    pub regions: Vec<Region>,
}

impl RegionFeatureSet {
    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.regions.first().map_or(0, |r| r.feature.len())
    }

    /// Attribute ids per region, in region order.
    pub fn attribute_sets(&self) -> Vec<Vec<u32>> {
        self.regions.iter().map(Region::attribute_ids).collect()
    }

    /// `(category_id, attribute_ids)` per region, as consumed by caption augmentation.
    pub fn annotations(&self) -> Vec<(u32, Vec<u32>)> {
        self.regions.iter().map(|r| (r.category_id, r.attribute_ids())).collect()
    }
}
